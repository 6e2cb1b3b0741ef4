//! Sparse user representations for the homophilic lenses.
//!
//! The lexical lens hashes TF-IDF term weights into a fixed number of buckets.
//! Term hashing is MurmurHash3 (x86, 32-bit, seed 0) read as a signed integer:
//! the bucket is `|h| mod dimension` and the sign of `h` is the sign applied to
//! the term weight. Colliding weights are summed, bucket magnitudes are kept
//! (so all values are non-negative) and the result is L2-normalized.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Cursor, Write};

use serde::{Deserialize, Serialize};

use super::graph::FollowerGraph;
use crate::error::{Error, Result};

pub const DEFAULT_LEXICAL_DIMENSION: usize = 1 << 20;
pub const HASH_ID: &str = "murmur3_x86_32:seed=0:signed-abs-mod";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    /// Strictly increasing.
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    /// Builds from `(index, value)` pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        Self { indices, values }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_pairs(dense.iter().enumerate().map(|(i, &v)| (i as u32, v)))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

/// Embeddings for one lens, keyed by user id.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub lens: String,
    pub dimension: usize,
    vectors: BTreeMap<String, SparseVector>,
}

impl Embeddings {
    pub fn new(lens: impl Into<String>, dimension: usize) -> Self {
        Self { lens: lens.into(), dimension, vectors: BTreeMap::new() }
    }

    pub fn insert(&mut self, user: impl Into<String>, v: SparseVector) {
        debug_assert!(v.indices.iter().all(|&i| (i as usize) < self.dimension));
        self.vectors.insert(user.into(), v);
    }

    pub fn get(&self, user: &str) -> Option<&SparseVector> {
        self.vectors.get(user)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SparseVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// One-hot "who do you follow among the `top_k` most-followed users" vectors.
///
/// Top users are ranked by follower count, ties broken by user id. Every user
/// in the graph receives a vector (possibly zero). If the graph has fewer than
/// `top_k` users the dimension shrinks accordingly.
pub fn following_embeddings(graph: &FollowerGraph, top_k: usize) -> Result<Embeddings> {
    if graph.is_empty() {
        return Err(Error::Empty("follower graph"));
    }
    let users = graph.users();
    let mut ranked: Vec<&str> = users.iter().copied().collect();
    ranked.sort_by(|a, b| graph.follower_count(b).cmp(&graph.follower_count(a)).then(a.cmp(b)));
    if ranked.len() < top_k {
        log::warn!("only {} users available, following embedding dimension shrinks from {top_k}", ranked.len());
    }
    ranked.truncate(top_k);
    let column: HashMap<&str, u32> = ranked.iter().enumerate().map(|(j, u)| (*u, j as u32)).collect();

    let mut out = Embeddings::new("following", ranked.len());
    for user in users {
        let v = SparseVector::from_pairs(graph.followees_of(user).filter_map(|f| column.get(f).map(|&j| (j, 1.0))));
        out.insert(user, v);
    }
    Ok(out)
}

/// Lowercased tokens split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Bucket and sign for a term.
pub fn hash_term(term: &str, dimension: usize) -> (u32, f64) {
    let h = murmur3::murmur3_32(&mut Cursor::new(term.as_bytes()), 0).expect("in-memory read") as i32;
    let bucket = (h.unsigned_abs() as u64 % dimension as u64) as u32;
    let sign = if h >= 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

fn l2_normalize(pairs: &mut [(u32, f64)]) {
    let norm = pairs.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in pairs.iter_mut() {
            *v /= norm;
        }
    }
}

/// TF-IDF vectors hashed into `dimension` buckets.
///
/// Term weight is `count * (ln((1 + N) / (1 + df)) + 1)`, normalized per document
/// before hashing. Terms are visited in sorted order so the output is bit-stable.
pub fn lexical_embeddings<'a, I>(documents: I, dimension: usize) -> Result<Embeddings>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    if dimension == 0 || dimension > u32::MAX as usize {
        return Err(Error::Domain(format!("invalid hashing dimension {dimension}")));
    }
    let docs: Vec<(&str, BTreeMap<String, usize>)> = documents
        .into_iter()
        .map(|(user, text)| {
            let mut tf = BTreeMap::new();
            for tok in tokenize(text) {
                *tf.entry(tok).or_insert(0) += 1;
            }
            (user, tf)
        })
        .collect();
    let n_docs = docs.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for (_, tf) in &docs {
        for term in tf.keys() {
            *df.entry(term.as_str()).or_insert(0) += 1;
        }
    }

    let mut out = Embeddings::new("lexical", dimension);
    for (user, tf) in &docs {
        let mut weights: Vec<(u32, f64)> = Vec::with_capacity(tf.len());
        let mut terms = Vec::with_capacity(tf.len());
        for (term, &count) in tf {
            let idf = ((1.0 + n_docs) / (1.0 + df[term.as_str()] as f64)).ln() + 1.0;
            terms.push(term);
            weights.push((0, count as f64 * idf));
        }
        l2_normalize(&mut weights);
        let mut buckets: BTreeMap<u32, f64> = BTreeMap::new();
        for (term, (_, w)) in terms.iter().zip(&weights) {
            let (bucket, sign) = hash_term(term, dimension);
            *buckets.entry(bucket).or_insert(0.0) += sign * w;
        }
        let mut hashed: Vec<(u32, f64)> = buckets.into_iter().map(|(b, v)| (b, v.abs())).collect();
        l2_normalize(&mut hashed);
        out.insert(*user, SparseVector::from_pairs(hashed));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub lens: String,
    pub dimension: usize,
    pub hash_id: String,
    /// Seconds since the Unix epoch.
    pub built_at: u64,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    user: String,
    indices: Vec<u32>,
    values: Vec<f64>,
}

pub fn write_embedding_cache<W: Write>(mut w: W, emb: &Embeddings, built_at: u64) -> Result<()> {
    let header =
        CacheHeader { lens: emb.lens.clone(), dimension: emb.dimension, hash_id: HASH_ID.to_string(), built_at };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for (user, v) in emb.iter() {
        let rec = CacheRecord { user: user.to_string(), indices: v.indices.clone(), values: v.values.clone() };
        writeln!(w, "{}", serde_json::to_string(&rec)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embedding_cache<R: BufRead>(r: R) -> Result<(CacheHeader, Embeddings)> {
    let mut lines = r.lines().enumerate();
    let header: CacheHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?,
        None => return Err(Error::Empty("embedding cache")),
    };
    if header.lens == "lexical" && header.hash_id != HASH_ID {
        return Err(Error::Parse { line: 1, reason: format!("cache built with unknown hash {}", header.hash_id) });
    }
    let mut emb = Embeddings::new(header.lens.clone(), header.dimension);
    let mut seen = BTreeSet::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse { line: idx + 1, reason };
        let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.indices.len() != rec.values.len() {
            return Err(parse_err("indices and values differ in length".into()));
        }
        if rec.indices.windows(2).any(|w| w[0] >= w[1]) || rec.indices.iter().any(|&i| i as usize >= header.dimension) {
            return Err(parse_err("indices must be increasing and below the dimension".into()));
        }
        if rec.values.iter().any(|&v| !(v >= 0.0)) {
            return Err(parse_err("embedding values must be non-negative".into()));
        }
        if !seen.insert(rec.user.clone()) {
            return Err(parse_err(format!("duplicate user {}", rec.user)));
        }
        emb.insert(rec.user, SparseVector { indices: rec.indices, values: rec.values });
    }
    Ok((header, emb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn murmur_reference_vectors() {
        // published MurmurHash3_x86_32 test vectors
        let h = |s: &str, seed| murmur3::murmur3_32(&mut Cursor::new(s.as_bytes()), seed).unwrap();
        assert_eq!(h("", 0), 0);
        assert_eq!(h("", 1), 0x514E28B7);
        assert_eq!(h("hello", 0), 0x248BFA47);
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Hello, World!! #Bushfire-crisis 2020"), ["hello", "world", "bushfire", "crisis", "2020"]);
        assert_eq!(tokenize("  ...  "), Vec::<String>::new());
    }

    #[test]
    fn following_toy_graph() {
        let g = FollowerGraph::from_edges([("A", "B"), ("A", "C"), ("B", "C")]);
        let emb = following_embeddings(&g, 2).unwrap();
        assert_eq!(emb.dimension, 2);
        assert_eq!(emb.get("C").unwrap(), &SparseVector::from_dense(&[1.0, 1.0]));
        assert_eq!(emb.get("B").unwrap(), &SparseVector::from_dense(&[1.0, 0.0]));
        assert!(emb.get("A").unwrap().is_zero());
    }

    #[test]
    fn following_shrinks_dimension() {
        let g = FollowerGraph::from_edges([("A", "B")]);
        assert_eq!(following_embeddings(&g, 1000).unwrap().dimension, 2);
        assert!(following_embeddings(&FollowerGraph::default(), 10).is_err());
    }

    #[test]
    fn single_word_document() {
        let emb = lexical_embeddings([("u", "fire")], DEFAULT_LEXICAL_DIMENSION).unwrap();
        let v = emb.get("u").unwrap();
        assert_eq!(v.nnz(), 1);
        assert_eq!(v.values[0], 1.0);
        assert_eq!(v.indices[0], hash_term("fire", DEFAULT_LEXICAL_DIMENSION).0);
    }

    #[test]
    fn identical_and_empty_documents() {
        let emb =
            lexical_embeddings([("a", "smoke over the hills"), ("b", "smoke over the hills"), ("c", "")], 1 << 16).unwrap();
        assert_eq!(emb.get("a"), emb.get("b"));
        assert!(emb.get("c").unwrap().is_zero());
        assert!((cosine(emb.get("a").unwrap(), emb.get("b").unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_vocabularies_are_orthogonal() {
        let dim = DEFAULT_LEXICAL_DIMENSION;
        let a = "arson emergency bushfire";
        let b = "vaccine mask lockdown";
        let buckets_a: BTreeSet<u32> = tokenize(a).iter().map(|t| hash_term(t, dim).0).collect();
        let buckets_b: BTreeSet<u32> = tokenize(b).iter().map(|t| hash_term(t, dim).0).collect();
        assert!(buckets_a.is_disjoint(&buckets_b), "collision in fixture");
        let emb = lexical_embeddings([("a", a), ("b", b)], dim).unwrap();
        assert_eq!(cosine(emb.get("a").unwrap(), emb.get("b").unwrap()), 0.0);
    }

    #[test]
    fn cache_round_trip() {
        let emb = lexical_embeddings([("a", "one two two"), ("b", "two three")], 1 << 10).unwrap();
        let mut buf = Vec::new();
        write_embedding_cache(&mut buf, &emb, 1234).unwrap();
        let (header, back) = read_embedding_cache(buf.as_slice()).unwrap();
        assert_eq!(header.hash_id, HASH_ID);
        assert_eq!(header.built_at, 1234);
        assert_eq!(back, emb);
    }

    #[test]
    fn cache_rejects_negative_values() {
        let text = "{\"lens\":\"following\",\"dimension\":3,\"hash_id\":\"x\",\"built_at\":0}\n{\"user\":\"a\",\"indices\":[0],\"values\":[-1.0]}\n";
        assert!(read_embedding_cache(text.as_bytes()).is_err());
    }
}
