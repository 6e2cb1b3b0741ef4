//! Parent (branching) probabilities of a marked cascade.
//!
//! Entry `(i, j)` is the probability that event `j` is a direct retweet of
//! event `i`: the share of the intensity at `t_j` contributed by event `i`,
//! optionally weighted by the conductance between the two posters. The
//! background intensity of a retweet cascade is zero, so every column after
//! the first is a probability distribution over earlier events.

use crate::cascade::Cascade;
use crate::conductance::ConductanceProvider;
use crate::error::{Error, Result};
use crate::kernel::{MarkConfig, MemoryKernel};
use crate::matrix::UpperTriangular;

/// Strictly upper-triangular, column-stochastic matrix of parent probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ParentProbabilityMatrix(UpperTriangular);

impl ParentProbabilityMatrix {
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    /// Rows `0..=j` of column `j` (the diagonal entry is always 0).
    pub fn column(&self, j: usize) -> &[f64] {
        self.0.column(j)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.0.column_sums()
    }

    pub fn as_triangular(&self) -> &UpperTriangular {
        &self.0
    }

    /// Wraps externally computed probabilities after checking the invariants.
    pub fn from_triangular(m: UpperTriangular, tolerance: f64) -> Result<Self> {
        for j in 0..m.dim() {
            let col = m.column(j);
            if col[j] != 0.0 {
                return Err(Error::Domain(format!("diagonal entry ({j}, {j}) must be zero")));
            }
            if col.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Domain(format!("column {j} has an entry outside [0, 1]")));
            }
            let sum: f64 = col.iter().sum();
            if j > 0 && (sum - 1.0).abs() > tolerance {
                return Err(Error::Domain(format!("column {j} sums to {sum}")));
            }
        }
        Ok(Self(m))
    }
}

/// Computes parent probabilities for `cascade`.
///
/// Without a conductance provider every pair has conductance 1. Weights are
/// formed in log space and shifted by the column maximum before
/// exponentiation, which keeps power-law kernels with a tiny cutoff finite.
pub fn branching_matrix(
    cascade: &Cascade,
    kernel: &MemoryKernel,
    marks: &MarkConfig,
    conductance: Option<&dyn ConductanceProvider>,
) -> Result<ParentProbabilityMatrix> {
    kernel.validate()?;
    let events = cascade.events();
    let n = events.len();
    if n == 0 {
        return Err(Error::InvalidCascade { cascade_id: cascade.cascade_id.clone(), reason: "no events".into() });
    }
    let ln_marks: Vec<f64> = events.iter().map(|e| marks.ln_weight(e.mark)).collect::<Result<_>>()?;

    let mut out = UpperTriangular::zeros(n);
    let mut ln_w = Vec::with_capacity(n);
    for j in 1..n {
        let tj = events[j].t;
        ln_w.clear();
        for k in 0..j {
            let mut w = ln_marks[k] + kernel.ln_eval(tj - events[k].t);
            if let Some(provider) = conductance {
                let gamma = provider.conductance(&events[k].user, &events[j].user);
                if !(0.0..=1.0).contains(&gamma) {
                    return Err(Error::ConductanceRange {
                        source_user: events[k].user.clone(),
                        target_user: events[j].user.clone(),
                        value: gamma,
                    });
                }
                w += gamma.ln();
            }
            ln_w.push(w);
        }
        let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateColumn { cascade_id: cascade.cascade_id.clone(), column: j });
        }
        let col = out.column_mut(j);
        let mut total = 0.0;
        for (c, &w) in col.iter_mut().zip(&ln_w) {
            *c = (w - max).exp();
            total += *c;
        }
        for c in &mut col[..j] {
            *c /= total;
        }
    }
    Ok(ParentProbabilityMatrix(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Event;
    use crate::conductance::ConstantConductance;

    fn cascade(times: &[f64], marks: &[f64]) -> Cascade {
        let events =
            times.iter().zip(marks).enumerate().map(|(i, (&t, &m))| Event::new(format!("u{i}"), t, m)).collect();
        Cascade::new("c", events).unwrap()
    }

    #[test]
    fn two_events_single_parent() {
        for kernel in [MemoryKernel::Exponential { r: 3.0 }, MemoryKernel::PowerLaw { r: 0.5, c: 2.0 }] {
            let p = branching_matrix(&cascade(&[0.0, 7.0], &[10.0, 1.0]), &kernel, &MarkConfig { b: 0.8 }, None)
                .unwrap();
            assert_eq!(p.get(0, 1), 1.0);
        }
    }

    #[test]
    fn three_event_hand_values() {
        let p = branching_matrix(
            &cascade(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]),
            &MemoryKernel::Exponential { r: 1.0 },
            &MarkConfig::default(),
            None,
        )
        .unwrap();
        let e = std::f64::consts::E;
        assert!((p.get(0, 2) - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((p.get(1, 2) - e / (1.0 + e)).abs() < 1e-12);
        assert!((p.get(0, 2) - 0.26894).abs() < 1e-5);
        assert_eq!(p.get(2, 1), 0.0);
        assert_eq!(p.column(0), &[0.0]);
    }

    #[test]
    fn tied_times_are_legal() {
        let p = branching_matrix(
            &cascade(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]),
            &MemoryKernel::PowerLaw { r: 1.0, c: 1e-9 },
            &MarkConfig::default(),
            None,
        )
        .unwrap();
        assert!((p.get(0, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tiny_cutoff_stays_finite() {
        let p = branching_matrix(
            &cascade(&[0.0, 1e-300, 1.0, 1.0], &[1e6, 1.0, 3.0, 2.0]),
            &MemoryKernel::PowerLaw { r: 5.0, c: 1e-300 },
            &MarkConfig { b: 1.0 },
            None,
        )
        .unwrap();
        for s in &p.column_sums()[1..] {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(p.as_triangular().to_dense().iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn all_zero_marks_is_degenerate() {
        let r = branching_matrix(
            &cascade(&[0.0, 1.0], &[0.0, 4.0]),
            &MemoryKernel::default(),
            &MarkConfig { b: 1.0 },
            None,
        );
        assert!(matches!(r, Err(Error::DegenerateColumn { column: 1, .. })));
    }

    #[test]
    fn rejects_out_of_range_conductance() {
        let c = ConstantConductance(1.5);
        let r = branching_matrix(&cascade(&[0.0, 1.0], &[1.0, 1.0]), &MemoryKernel::default(), &MarkConfig::default(), Some(&c));
        assert!(matches!(r, Err(Error::ConductanceRange { .. })));
    }

    #[test]
    fn from_triangular_checks() {
        let mut m = UpperTriangular::zeros(2);
        m.set(0, 1, 0.5);
        assert!(ParentProbabilityMatrix::from_triangular(m.clone(), 1e-9).is_err());
        m.set(0, 1, 1.0);
        assert!(ParentProbabilityMatrix::from_triangular(m, 1e-9).is_ok());
    }
}
