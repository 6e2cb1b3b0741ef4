//! Pairwise conductance between users.
//!
//! A conductance value scales how readily influence flows from the poster of a
//! parent event to the poster of a candidate child event. All lenses return a
//! value in `[beta, 1]`, and a user paired with itself always has conductance 1.

mod embedding;
mod graph;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{
    cosine, following_embeddings, hash_term, lexical_embeddings, read_embedding_cache, tokenize,
    write_embedding_cache, CacheHeader, Embeddings, SparseVector, DEFAULT_LEXICAL_DIMENSION, HASH_ID,
};
pub use graph::FollowerGraph;

/// Anything that can answer "how conductive is the edge from `source_user` to `target_user`".
///
/// Providers are queried concurrently from many cascades and must be immutable
/// after construction.
pub trait ConductanceProvider: Send + Sync {
    fn conductance(&self, source_user: &str, target_user: &str) -> f64;
}

impl<F> ConductanceProvider for F
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    fn conductance(&self, source_user: &str, target_user: &str) -> f64 {
        self(source_user, target_user)
    }
}

impl<P: ConductanceProvider + ?Sized> ConductanceProvider for Arc<P> {
    fn conductance(&self, source_user: &str, target_user: &str) -> f64 {
        (**self).conductance(source_user, target_user)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lens {
    Topological,
    Following,
    Lexical,
}

impl Lens {
    pub fn as_str(&self) -> &'static str {
        match self {
            Lens::Topological => "topological",
            Lens::Following => "following",
            Lens::Lexical => "lexical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductanceConfig {
    pub lens: Lens,
    pub beta: f64,
}

impl ConductanceConfig {
    pub fn new(lens: Lens, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("baseline conductance must lie in [0, 1], got {beta}")));
        }
        Ok(Self { lens, beta })
    }
}

/// Same conductance for every pair. With any positive value this reproduces the
/// unweighted branching probabilities.
#[derive(Clone, Copy, Debug)]
pub struct ConstantConductance(pub f64);

impl ConductanceProvider for ConstantConductance {
    fn conductance(&self, _: &str, _: &str) -> f64 {
        self.0
    }
}

/// `beta + (1 - beta) * a(source, target)` where `a` is 1 iff `target` follows `source`.
pub fn topological_conductance(beta: f64, graph: &FollowerGraph, source_user: &str, target_user: &str) -> f64 {
    if source_user == target_user {
        return 1.0;
    }
    let a = if graph.follows(target_user, source_user) { 1.0 } else { 0.0 };
    beta + (1.0 - beta) * a
}

/// `beta + (1 - beta) * cosine(h_source, h_target)`. Users missing from the
/// embedding map count as zero vectors and bump `missing`.
pub fn homophilic_conductance(
    beta: f64,
    embeddings: &Embeddings,
    source_user: &str,
    target_user: &str,
    missing: &AtomicUsize,
) -> f64 {
    if source_user == target_user {
        return 1.0;
    }
    let lookup = |u: &str| {
        let v = embeddings.get(u);
        if v.is_none() {
            missing.fetch_add(1, Ordering::Relaxed);
        }
        v
    };
    let sim = match (lookup(source_user), lookup(target_user)) {
        (Some(a), Some(b)) => cosine(a, b).clamp(0.0, 1.0),
        _ => 0.0,
    };
    beta + (1.0 - beta) * sim
}

pub struct TopologicalProvider {
    beta: f64,
    graph: Arc<FollowerGraph>,
}

impl TopologicalProvider {
    pub fn new(cfg: ConductanceConfig, graph: Arc<FollowerGraph>) -> Result<Self> {
        if cfg.lens != Lens::Topological {
            return Err(Error::Domain(format!("topological provider built with lens {}", cfg.lens.as_str())));
        }
        Ok(Self { beta: cfg.beta, graph })
    }
}

impl ConductanceProvider for TopologicalProvider {
    fn conductance(&self, source_user: &str, target_user: &str) -> f64 {
        topological_conductance(self.beta, &self.graph, source_user, target_user)
    }
}

pub struct HomophilicProvider {
    beta: f64,
    embeddings: Arc<Embeddings>,
    missing: AtomicUsize,
}

impl HomophilicProvider {
    pub fn new(cfg: ConductanceConfig, embeddings: Arc<Embeddings>) -> Result<Self> {
        if cfg.lens == Lens::Topological {
            return Err(Error::Domain("homophilic provider needs the following or lexical lens".into()));
        }
        Ok(Self { beta: cfg.beta, embeddings, missing: AtomicUsize::new(0) })
    }

    /// Number of lookups that hit a user without an embedding.
    pub fn missing_lookups(&self) -> usize {
        self.missing.load(Ordering::Relaxed)
    }
}

impl ConductanceProvider for HomophilicProvider {
    fn conductance(&self, source_user: &str, target_user: &str) -> f64 {
        homophilic_conductance(self.beta, &self.embeddings, source_user, target_user, &self.missing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_graph() -> FollowerGraph {
        // B and C follow A, C follows B
        FollowerGraph::from_edges([("A", "B"), ("A", "C"), ("B", "C")])
    }

    #[test]
    fn topological_values() {
        let g = toy_graph();
        assert_eq!(topological_conductance(0.3, &g, "A", "B"), 1.0);
        assert_eq!(topological_conductance(0.3, &g, "B", "A"), 0.3);
        assert_eq!(topological_conductance(0.3, &g, "A", "nobody"), 0.3);
        assert_eq!(topological_conductance(0.18, &g, "C", "C"), 1.0);
    }

    #[test]
    fn homophilic_values() {
        let mut emb = Embeddings::new("following", 3);
        emb.insert("i", SparseVector::from_dense(&[1.0, 1.0, 0.0]));
        emb.insert("j", SparseVector::from_dense(&[1.0, 0.0, 0.0]));
        emb.insert("k", SparseVector::from_dense(&[0.0, 0.0, 2.0]));
        emb.insert("i2", SparseVector::from_dense(&[1.0, 1.0, 0.0]));
        let missing = AtomicUsize::new(0);
        assert!((homophilic_conductance(0.0, &emb, "i", "j", &missing) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((homophilic_conductance(0.18, &emb, "i", "i2", &missing) - 1.0).abs() < 1e-12);
        assert!((homophilic_conductance(0.18, &emb, "i", "k", &missing) - 0.18).abs() < 1e-12);
        assert_eq!(missing.load(Ordering::Relaxed), 0);
        assert!((homophilic_conductance(0.18, &emb, "i", "ghost", &missing) - 0.18).abs() < 1e-12);
        assert_eq!(missing.load(Ordering::Relaxed), 1);
        assert_eq!(homophilic_conductance(0.18, &emb, "ghost", "ghost", &missing), 1.0);
    }

    #[test]
    fn homophilic_is_symmetric() {
        let mut emb = Embeddings::new("following", 4);
        emb.insert("a", SparseVector::from_dense(&[0.2, 0.0, 3.0, 1.0]));
        emb.insert("b", SparseVector::from_dense(&[1.0, 0.5, 0.0, 1.0]));
        let m = AtomicUsize::new(0);
        assert_eq!(
            homophilic_conductance(0.3, &emb, "a", "b", &m),
            homophilic_conductance(0.3, &emb, "b", "a", &m)
        );
    }

    #[test]
    fn config_validation() {
        assert!(ConductanceConfig::new(Lens::Lexical, 1.2).is_err());
        assert!(ConductanceConfig::new(Lens::Lexical, 0.18).is_ok());
        let cfg = ConductanceConfig::new(Lens::Lexical, 0.18).unwrap();
        assert!(TopologicalProvider::new(cfg, Arc::new(toy_graph())).is_err());
    }
}
