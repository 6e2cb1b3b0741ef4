//! Reference influence by explicit enumeration of branching structures.
//!
//! Every event after the first picks one earlier parent, giving `(n - 1)!`
//! trees. Each tree's probability is the product of its parent probabilities,
//! computed here straight from the Hawkes intensities (no log-space shift), and
//! each event's influence in a tree is what it keeps of its own capital plus
//! what flows up to it from every descendant. The expectation over trees is the
//! reference the column recursion must match.

use crate::cascade::Cascade;
use crate::conductance::ConductanceProvider;
use crate::error::{Error, Result};
use crate::kernel::{kernel_eval, MarkConfig, MemoryKernel};

use super::CapitalPolicy;

/// Largest cascade the enumeration accepts (720 trees).
pub const MAX_ENUMERATION_EVENTS: usize = 7;

pub fn brute_force_influence(
    cascade: &Cascade,
    kernel: &MemoryKernel,
    marks: &MarkConfig,
    conductance: Option<&dyn ConductanceProvider>,
    policy: &CapitalPolicy,
) -> Result<Vec<f64>> {
    let n = cascade.len();
    if n > MAX_ENUMERATION_EVENTS {
        return Err(Error::TooLargeForEnumeration(n, MAX_ENUMERATION_EVENTS));
    }
    policy.validate()?;
    let ev = cascade.events();

    // parent_prob[j][k]: probability that k is the parent of j
    let mut parent_prob = vec![Vec::new(); n];
    for j in 1..n {
        let weights: Vec<f64> = (0..j)
            .map(|k| {
                let gamma = conductance.map_or(1.0, |c| c.conductance(&ev[k].user, &ev[j].user));
                Ok(ev[k].mark.powf(marks.b) * kernel_eval(kernel, ev[j].t - ev[k].t)? * gamma)
            })
            .collect::<Result<_>>()?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateColumn { cascade_id: cascade.cascade_id.clone(), column: j });
        }
        parent_prob[j] = weights.iter().map(|w| w / total).collect();
    }

    let (transfer, kept_by_retweet) = match *policy {
        CapitalPolicy::None => (1.0, 1.0),
        CapitalPolicy::SocialCapital { alpha } => (alpha, 1.0 - alpha),
    };
    let kept = |i: usize| if i == 0 { 1.0 } else { kept_by_retweet };

    let mut expected = vec![0.0; n];
    let mut parent = vec![0usize; n];
    let mut in_tree = vec![0.0; n];

    fn visit(
        j: usize,
        prob: f64,
        parent: &mut Vec<usize>,
        parent_prob: &[Vec<f64>],
        leaf: &mut dyn FnMut(&[usize], f64),
    ) {
        if j == parent.len() {
            leaf(parent, prob);
            return;
        }
        for k in 0..j {
            parent[j] = k;
            visit(j + 1, prob * parent_prob[j][k], parent, parent_prob, leaf);
        }
    }

    let mut leaf = |parent: &[usize], prob: f64| {
        in_tree.iter_mut().for_each(|v| *v = 0.0);
        for node in 0..n {
            in_tree[node] += kept(node);
            let mut path = 1.0;
            let mut cur = node;
            while cur != 0 {
                let up = parent[cur];
                path *= transfer;
                in_tree[up] += kept(up) * path;
                cur = up;
            }
        }
        for (e, v) in expected.iter_mut().zip(&in_tree) {
            *e += prob * v;
        }
    };
    visit(1, 1.0, &mut parent, &parent_prob, &mut leaf);
    Ok(expected)
}
