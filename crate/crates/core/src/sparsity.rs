//! Sparsity pattern of a POP, chordal extension and maximal-clique covers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::{ComplementarityFamily, Polynomial};
use crate::rng::SeededRng;

/// Symmetric 0/1 pattern with an implicit unit diagonal, stored as sorted neighbour lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    adj: Vec<Vec<usize>>,
}

impl SparsityPattern {
    pub fn empty(n: usize) -> Self {
        SparsityPattern { adj: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut sets = vec![BTreeSet::new(); n];
        for (i, j) in edges {
            if i != j {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        SparsityPattern { adj: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn is_set(&self, i: usize, j: usize) -> bool {
        i == j || self.adj[i].binary_search(&j).is_ok()
    }

    /// Off-diagonal edges with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.adj.iter().enumerate() {
            out.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.is_set(i, j) as u8).collect()).collect()
    }
}

/// Index sets `V^1..V^l`, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueCover {
    pub n: usize,
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueCover {
    /// The single clique `{0..n}`.
    pub fn dense(n: usize) -> Self {
        CliqueCover { n, cliques: vec![(0..n).collect()] }
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Every pattern entry lies inside some `V^k x V^k`.
    pub fn covers(&self, p: &SparsityPattern) -> bool {
        let mut member = vec![Vec::new(); self.n];
        for (k, c) in self.cliques.iter().enumerate() {
            for &i in c {
                member[i].push(k);
            }
        }
        (0..p.n()).all(|i| !member[i].is_empty())
            && p.edges().iter().all(|&(i, j)| {
                member[i].iter().any(|k| member[j].binary_search(k).is_ok())
            })
    }
}

/// `R_ij = 1` iff `i == j`, a monomial of `f` involves both, or both lie in a common `C`.
pub fn build_pattern(f: &Polynomial, comp: &ComplementarityFamily) -> SparsityPattern {
    let mut edges = Vec::new();
    for alpha in f.support() {
        let s: Vec<usize> = alpha.support().collect();
        push_clique_edges(&s, &mut edges);
    }
    for c in comp.sets() {
        push_clique_edges(c, &mut edges);
    }
    SparsityPattern::from_edges(f.n(), edges)
}

fn push_clique_edges(s: &[usize], edges: &mut Vec<(usize, usize)>) {
    for (a, &i) in s.iter().enumerate() {
        for &j in &s[a + 1..] {
            edges.push((i, j));
        }
    }
}

/// Minimum-degree symbolic elimination; returns the filled graph and the
/// candidate cliques `{v} ∪ N(v)` at elimination time.
fn eliminate(p: &SparsityPattern) -> (SparsityPattern, Vec<Vec<usize>>) {
    let n = p.n();
    let mut adj: Vec<BTreeSet<usize>> = p.adj.iter().map(|nb| nb.iter().copied().collect()).collect();
    let mut filled = adj.clone();
    let mut alive = vec![true; n];
    let mut candidates = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("vertex left to eliminate");
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for (a, &i) in nb.iter().enumerate() {
            adj[i].remove(&v);
            for &j in &nb[a + 1..] {
                if adj[i].insert(j) {
                    adj[j].insert(i);
                    filled[i].insert(j);
                    filled[j].insert(i);
                }
            }
        }
        let mut clique = nb;
        clique.push(v);
        clique.sort_unstable();
        candidates.push(clique);
        alive[v] = false;
        adj[v].clear();
    }
    let filled = SparsityPattern { adj: filled.into_iter().map(|s| s.into_iter().collect()).collect() };
    (filled, candidates)
}

/// Chordal supergraph of `p` produced by minimum-degree elimination.
pub fn chordal_extension(p: &SparsityPattern) -> SparsityPattern {
    eliminate(p).0
}

/// Maximal cliques of a chordal extension of `p`, sorted lexicographically.
pub fn chordal_extend_and_cliques(p: &SparsityPattern) -> CliqueCover {
    let (_, mut cands) = eliminate(p);
    cands.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    cands.dedup();
    let n = p.n();
    let mut kept: Vec<Vec<usize>> = Vec::new();
    let mut kept_bits: Vec<Vec<bool>> = Vec::new();
    for c in cands {
        let contained = kept_bits.iter().any(|bits| c.iter().all(|&i| bits[i]));
        if !contained {
            let mut bits = vec![false; n];
            for &i in &c {
                bits[i] = true;
            }
            kept_bits.push(bits);
            kept.push(c);
        }
    }
    kept.sort();
    CliqueCover { n, cliques: kept }
}

/// Arrow-type cover: `l` overlapping windows of width `a` (overlap `b`) plus a shared tail of size `c`.
pub fn arrow_cliques(a: usize, b: usize, c: usize, ell: usize) -> Result<CliqueCover> {
    if ell < 2 || a < 2 || b >= a || c < 1 {
        return Err(Error::InvalidParameter(format!(
            "arrow parameters need l>=2, a>=2, 0<=b<a, c>=1; got a={a} b={b} c={c} l={ell}"
        )));
    }
    let step = a - b;
    let tail_start = (ell - 1) * step + a;
    let n = tail_start + c;
    let cliques = (0..ell)
        .map(|k| (k * step..k * step + a).chain(tail_start..n).collect())
        .collect();
    Ok(CliqueCover { n, cliques })
}

/// Pattern induced by a cover: every pair inside a common clique.
pub fn pattern_of_cover(cover: &CliqueCover) -> SparsityPattern {
    let mut edges = Vec::new();
    for c in &cover.cliques {
        push_clique_edges(c, &mut edges);
    }
    SparsityPattern::from_edges(cover.n, edges)
}

/// Unit-disk graph on `n` seeded uniform points in the unit square.
pub fn chordal_random_pattern(n: usize, radio_range: f64, seed: u64) -> Result<SparsityPattern> {
    if n == 0 || !(radio_range > 0.0) {
        return Err(Error::InvalidParameter("need n >= 1 and radio_range > 0".into()));
    }
    let mut rng = SeededRng::new(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.uniform(), rng.uniform())).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
            if (dx * dx + dy * dy).sqrt() <= radio_range {
                edges.push((i, j));
            }
        }
    }
    Ok(SparsityPattern::from_edges(n, edges))
}
