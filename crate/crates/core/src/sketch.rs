//! Bottom-k sketches of `l`-neighborhoods.
//!
//! Every node gets a pseudo-random 64-bit rank from a seeded bijective mixer;
//! the sketch of a set is the `k` smallest ranks of its members. Sketches of
//! `N_l(v)` are built by `l` rounds of min-merging along edges, so the whole
//! table costs `O(l·m·k)`.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

/// Smallest sketch size handed out by [`choose_k`].
pub const K_MIN: usize = 8;

/// `k = max(K_MIN, ⌈ln n / ε²⌉)`.
pub fn choose_k(n: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("node count must be positive".into()));
    }
    Ok(k_for_log_n((n as f64).ln(), epsilon))
}

pub(crate) fn k_for_log_n(ln_n: f64, epsilon: f64) -> usize {
    // guard against 11.0000000001-style float noise pushing the ceiling up
    let raw = ln_n / (epsilon * epsilon);
    let k = (raw - 1e-9).ceil().max(0.0) as usize;
    k.max(K_MIN)
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Rank of node `v` under the permutation selected by `seed`.
///
/// The map `v ↦ rank` is a bijection on `u64`, so distinct nodes never
/// collide.
#[inline]
pub fn node_rank(seed: u64, v: usize) -> u64 {
    mix64((v as u64).wrapping_add(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Merges two ascending rank lists into `out`, keeping at most `k` distinct
/// smallest values.
fn merge_bottom_k(a: &[u64], b: &[u64], k: usize, out: &mut Vec<u64>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while out.len() < k && (i < a.len() || j < b.len()) {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
}

/// Union estimator: among the `k` smallest ranks of `a ∪ b`, the fraction
/// present in both. Returns the Jaccard *distance* (1 − similarity).
pub(crate) fn jaccard_distance_from_ranks(a: &[u64], b: &[u64], k: usize) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut union = 0usize;
    let mut shared = 0usize;
    while union < k && (i < a.len() || j < b.len()) {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                shared += 1;
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => i += 1,
            (Some(_), Some(_)) => j += 1,
            (Some(_), None) => i += 1,
            (None, Some(_)) => j += 1,
            (None, None) => unreachable!(),
        }
        union += 1;
    }
    if union == 0 {
        0.0
    } else {
        1.0 - shared as f64 / union as f64
    }
}

/// The `k` smallest ranks of a set, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottomKSketch {
    ranks: Vec<u64>,
    k: usize,
    seed: u64,
}

impl BottomKSketch {
    pub fn from_nodes<I: IntoIterator<Item = usize>>(nodes: I, k: usize, seed: u64) -> Self {
        let mut ranks: Vec<u64> = nodes.into_iter().map(|v| node_rank(seed, v)).collect();
        ranks.sort_unstable();
        ranks.dedup();
        ranks.truncate(k);
        BottomKSketch { ranks, k, seed }
    }

    pub fn ranks(&self) -> &[u64] {
        &self.ranks
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Exact cardinality of the represented set, known only when the
    /// sketch is not full.
    pub fn cardinality_hint(&self) -> Option<usize> {
        (self.ranks.len() < self.k).then_some(self.ranks.len())
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.k != other.k || self.seed != other.seed {
            return Err(Error::SketchMismatch {
                k1: self.k,
                k2: other.k,
                seed1: self.seed,
                seed2: other.seed,
            });
        }
        Ok(())
    }

    /// Sketch of the union of the two represented sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let mut ranks = Vec::with_capacity(self.k);
        merge_bottom_k(&self.ranks, &other.ranks, self.k, &mut ranks);
        Ok(BottomKSketch {
            ranks,
            k: self.k,
            seed: self.seed,
        })
    }
}

/// Estimated Jaccard distance between the sets behind two sketches. Exact
/// when both sets have at most `k` elements.
pub fn estimate_jaccard_distance(s1: &BottomKSketch, s2: &BottomKSketch) -> Result<f64> {
    s1.compatible(s2)?;
    Ok(jaccard_distance_from_ranks(&s1.ranks, &s2.ranks, s1.k))
}

/// Per-node bottom-k sketches of `N_l(v)` sharing one rank permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchTable {
    l: usize,
    k: usize,
    seed: u64,
    lens: Vec<u32>,
    // fixed stride k; entries past lens[v] are unused
    data: Vec<u64>,
}

impl SketchTable {
    /// Builds sketches of `N_l(v)` for every node by `l` synchronous rounds of
    /// neighbor merging.
    pub fn build(g: &AttributedGraph, l: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("sketch size k must be positive".into()));
        }
        let mut table = Self::round_zero(g, k, seed);
        for _ in 0..l {
            table = table.extend(g);
        }
        Ok(table)
    }

    fn round_zero(g: &AttributedGraph, k: usize, seed: u64) -> Self {
        let n = g.node_count();
        let mut data = vec![0u64; n * k];
        for (v, chunk) in data.chunks_mut(k).enumerate() {
            chunk[0] = node_rank(seed, v);
        }
        SketchTable {
            l: 0,
            k,
            seed,
            lens: vec![1; n],
            data,
        }
    }

    /// One more propagation round: the sketches of `N_{l+1}` from those of `N_l`.
    pub fn extend(&self, g: &AttributedGraph) -> Self {
        let k = self.k;
        let n = g.node_count();
        assert_eq!(n, self.lens.len(), "sketch table does not match the graph");
        let mut data = vec![0u64; n * k];
        let mut lens = vec![0u32; n];
        data.par_chunks_mut(k)
            .zip(lens.par_iter_mut())
            .enumerate()
            .for_each_init(
                || (Vec::with_capacity(k), Vec::with_capacity(k)),
                |(acc, tmp), (v, (chunk, len))| {
                    acc.clear();
                    acc.extend_from_slice(self.ranks(v));
                    for &u in g.adjacency(v) {
                        merge_bottom_k(acc, self.ranks(u), k, tmp);
                        std::mem::swap(acc, tmp);
                    }
                    chunk[..acc.len()].copy_from_slice(acc);
                    *len = acc.len() as u32;
                },
            );
        SketchTable {
            l: self.l + 1,
            k,
            seed: self.seed,
            lens,
            data,
        }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.lens.len()
    }

    #[inline]
    pub fn ranks(&self, v: usize) -> &[u64] {
        let start = v * self.k;
        &self.data[start..start + self.lens[v] as usize]
    }

    pub fn sketch(&self, v: usize) -> BottomKSketch {
        BottomKSketch {
            ranks: self.ranks(v).to_vec(),
            k: self.k,
            seed: self.seed,
        }
    }

    /// Estimated `d_T(v1, v2)`.
    #[inline]
    pub fn distance(&self, v1: usize, v2: usize) -> f64 {
        if v1 == v2 {
            return 0.0;
        }
        jaccard_distance_from_ranks(self.ranks(v1), self.ranks(v2), self.k)
    }

    /// Maps every sketch back to node indices (ascending).
    pub fn decode_all(&self) -> Vec<Vec<usize>> {
        let lookup: std::collections::HashMap<u64, usize> = (0..self.node_count())
            .map(|v| (node_rank(self.seed, v), v))
            .collect();
        (0..self.node_count())
            .map(|v| {
                let mut nodes: Vec<usize> = self.ranks(v).iter().map(|r| lookup[r]).collect();
                nodes.sort_unstable();
                nodes
            })
            .collect()
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.data.len() * 8 + self.lens.len() * 4
    }

    /// Serializes the table, keyed by the digest of the graph it was built on.
    ///
    /// Layout (little endian): magic `STOCSKT\0`, version `u32`, graph digest
    /// `[u8; 32]`, `l`, `k`, `seed`, `n` as `u64`, then per node a `u32`
    /// length followed by that many `u64` ranks.
    pub fn write_to<W: Write>(&self, mut w: W, graph_digest: &[u8; 32]) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(graph_digest)?;
        for x in [self.l as u64, self.k as u64, self.seed, self.lens.len() as u64] {
            w.write_all(&x.to_le_bytes())?;
        }
        for v in 0..self.lens.len() {
            w.write_all(&self.lens[v].to_le_bytes())?;
            for r in self.ranks(v) {
                w.write_all(&r.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`SketchTable::write_to`], rejecting caches
    /// built for a different graph.
    pub fn read_from<R: Read>(mut r: R, graph_digest: &[u8; 32]) -> Result<Self> {
        let bad = |msg: &str| Error::SketchCache(msg.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != CACHE_VERSION {
            return Err(bad("unsupported version"));
        }
        let mut digest = [0u8; 32];
        r.read_exact(&mut digest)?;
        if &digest != graph_digest {
            return Err(bad("cache was built for a different graph"));
        }
        let mut b8 = [0u8; 8];
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut b8)?;
            *h = u64::from_le_bytes(b8);
        }
        let [l, k, seed, n] = header;
        let (l, k, n) = (l as usize, k as usize, n as usize);
        if k == 0 {
            return Err(bad("k = 0"));
        }
        let mut lens = vec![0u32; n];
        let mut data = vec![0u64; n * k];
        for v in 0..n {
            r.read_exact(&mut b4)?;
            let len = u32::from_le_bytes(b4);
            if len as usize > k {
                return Err(bad("sketch longer than k"));
            }
            lens[v] = len;
            for slot in &mut data[v * k..v * k + len as usize] {
                r.read_exact(&mut b8)?;
                *slot = u64::from_le_bytes(b8);
            }
        }
        Ok(SketchTable {
            l,
            k,
            seed,
            lens,
            data,
        })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"STOCSKT\0";
const CACHE_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{sample_graph, unlabeled};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn exact_jaccard_distance(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
        let inter = a.intersection(b).count() as f64;
        let union = a.union(b).count() as f64;
        if union == 0.0 {
            0.0
        } else {
            1.0 - inter / union
        }
    }

    #[test]
    fn choose_k_examples() {
        // ln(60977) = 11.0182..., / 0.81 = 13.60 -> 14
        assert_eq!(choose_k(60_977, 0.9).unwrap(), 14);
        assert_eq!(choose_k(1, 0.5).unwrap(), K_MIN);
        assert_eq!(k_for_log_n(81.0, 0.9), 100);
        assert!(choose_k(10, 0.0).is_err());
        assert!(choose_k(10, 1.5).is_err());
    }

    #[test]
    fn ranks_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for v in 0..100_000 {
            assert!(seen.insert(node_rank(7, v)));
        }
    }

    #[test]
    fn identical_and_disjoint_sketches() {
        let a = BottomKSketch::from_nodes(0..20, 32, 3);
        assert_eq!(estimate_jaccard_distance(&a, &a).unwrap(), 0.0);
        let b = BottomKSketch::from_nodes(20..40, 32, 3);
        assert_eq!(estimate_jaccard_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(a.cardinality_hint(), Some(20));
    }

    #[test]
    fn mismatched_sketches_are_rejected() {
        let a = BottomKSketch::from_nodes(0..5, 8, 1);
        let b = BottomKSketch::from_nodes(0..5, 8, 2);
        let c = BottomKSketch::from_nodes(0..5, 9, 1);
        assert!(estimate_jaccard_distance(&a, &b).is_err());
        assert!(estimate_jaccard_distance(&a, &c).is_err());
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn overlapping_ranges_estimate() {
        // {1..100} vs {51..150}: true distance 1 - 50/150
        let truth = 1.0 - 50.0 / 150.0;
        let mean: f64 = (0..20u64)
            .map(|seed| {
                let a = BottomKSketch::from_nodes(1..=100, 64, seed);
                let b = BottomKSketch::from_nodes(51..=150, 64, seed);
                estimate_jaccard_distance(&a, &b).unwrap()
            })
            .sum::<f64>()
            / 20.0;
        assert!((mean - truth).abs() <= 0.15, "mean {mean}");
    }

    #[test]
    fn estimator_is_unbiased_over_seeds() {
        let pairs: [(std::ops::Range<usize>, std::ops::Range<usize>); 3] =
            [(0..200, 100..300), (0..500, 0..250), (0..80, 60..400)];
        for (x, y) in pairs {
            let sx: BTreeSet<usize> = x.clone().collect();
            let sy: BTreeSet<usize> = y.clone().collect();
            let truth = exact_jaccard_distance(&sx, &sy);
            let runs = 60u64;
            let mean: f64 = (0..runs)
                .map(|seed| {
                    let a = BottomKSketch::from_nodes(x.clone(), 64, seed * 31 + 5);
                    let b = BottomKSketch::from_nodes(y.clone(), 64, seed * 31 + 5);
                    estimate_jaccard_distance(&a, &b).unwrap()
                })
                .sum::<f64>()
                / runs as f64;
            assert!((mean - truth).abs() <= 0.05, "mean {mean} truth {truth}");
        }
    }

    #[test]
    fn sample_graph_radius_one_sketch() {
        let g = sample_graph(false);
        let t = SketchTable::build(&g, 1, 8, 99).unwrap();
        assert_eq!(t.decode_all()[0], vec![0, 1, 2, 7]);
        assert_eq!(t.l(), 1);
    }

    #[test]
    fn path_graph_two_rounds() {
        let g = unlabeled(3, &[(0, 1), (1, 2)]);
        let t = SketchTable::build(&g, 2, 4, 5).unwrap();
        assert_eq!(t.decode_all()[0], vec![0, 1, 2]);
        let t1 = SketchTable::build(&g, 1, 4, 5).unwrap();
        assert_eq!(t1.decode_all()[0], vec![0, 1]);
    }

    #[test]
    fn full_sketches_match_bfs_balls() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let n = rng.gen_range(5..200);
            let m = rng.gen_range(0..3 * n);
            let edges: Vec<(usize, usize)> =
                (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
            let g = unlabeled(n, &edges);
            for l in 1..=3 {
                let t = SketchTable::build(&g, l, n, trial).unwrap();
                let decoded = t.decode_all();
                for (v, ball) in decoded.iter().enumerate() {
                    assert_eq!(*ball, g.exact_l_neighborhood(v, l).unwrap());
                }
                for v in 0..n.min(20) {
                    for u in 0..n.min(20) {
                        let a: BTreeSet<usize> = decoded[v].iter().copied().collect();
                        let b: BTreeSet<usize> = decoded[u].iter().copied().collect();
                        assert!((t.distance(v, u) - exact_jaccard_distance(&a, &b)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let g = sample_graph(false);
        let a = SketchTable::build(&g, 2, 3, 42).unwrap();
        let b = SketchTable::build(&g, 2, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = SketchTable::build(&g, 2, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cache_round_trip() {
        let g = sample_graph(false);
        let t = SketchTable::build(&g, 2, 3, 42).unwrap();
        let digest = g.digest();
        let mut buf = Vec::new();
        t.write_to(&mut buf, &digest).unwrap();
        let back = SketchTable::read_from(buf.as_slice(), &digest).unwrap();
        assert_eq!(t, back);
        let mut again = Vec::new();
        back.write_to(&mut again, &digest).unwrap();
        assert_eq!(buf, again);
        assert!(SketchTable::read_from(buf.as_slice(), &[0u8; 32]).is_err());
        assert!(SketchTable::read_from(&buf[..buf.len() - 3], &digest).is_err());
    }

    proptest! {
        #[test]
        fn merge_of_sketches_is_sketch_of_union(
            a in proptest::collection::btree_set(0usize..400, 0..80),
            b in proptest::collection::btree_set(0usize..400, 0..80),
            k in 1usize..40,
            seed in any::<u64>(),
        ) {
            let sa = BottomKSketch::from_nodes(a.iter().copied(), k, seed);
            let sb = BottomKSketch::from_nodes(b.iter().copied(), k, seed);
            let merged = sa.merge(&sb).unwrap();
            let direct = BottomKSketch::from_nodes(a.union(&b).copied(), k, seed);
            prop_assert_eq!(merged, direct);
        }

        #[test]
        fn small_sets_are_estimated_exactly(
            a in proptest::collection::btree_set(0usize..60, 1..30),
            b in proptest::collection::btree_set(0usize..60, 1..30),
            seed in any::<u64>(),
        ) {
            let sa = BottomKSketch::from_nodes(a.iter().copied(), 60, seed);
            let sb = BottomKSketch::from_nodes(b.iter().copied(), 60, seed);
            let est = estimate_jaccard_distance(&sa, &sb).unwrap();
            prop_assert!((est - exact_jaccard_distance(&a, &b)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&est));
        }
    }
}
