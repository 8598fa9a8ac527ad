//! Moment bases, lifting of the objective, the K2 class structure and assembly
//! of the complete DNN relaxation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::cones::BlockSymMatrix;
use crate::error::{Error, Result};
use crate::instances::PopInstance;
use crate::polyalg::{dominates, reduce_unchecked, ExponentVec, IndexPartition, Polynomial};
use crate::rhobound::{submodular_rho, trivial_rho, TraceBoundProblem};
use crate::sparsity::{build_pattern, chordal_extend_and_cliques, CliqueCover};

/// `A^k_omega`: exponents supported on the clique with total degree at most `omega`, graded-lex sorted.
#[derive(Clone, Debug)]
pub struct MomentBasis {
    pub clique: Vec<usize>,
    pub omega: u32,
    pub elems: Vec<ExponentVec>,
    index: HashMap<ExponentVec, usize>,
}

impl MomentBasis {
    pub fn new(n: usize, clique: &[usize], omega: u32) -> Self {
        let mut elems = Vec::new();
        let mut cur = vec![0u32; n];
        enumerate(clique, omega, &mut cur, &mut elems);
        elems.sort();
        let index = elems.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        MomentBasis { clique: clique.to_vec(), omega, elems, index }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn position(&self, alpha: &ExponentVec) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    /// True if `alpha` is supported on the clique and splits into two basis elements.
    pub fn covers(&self, alpha: &ExponentVec) -> bool {
        alpha.total_degree() <= 2 * self.omega
            && alpha.support().all(|i| self.clique.binary_search(&i).is_ok())
    }

    /// The moment matrix `x^{A x A}` at a point.
    pub fn moment_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mono: Vec<f64> = self.elems.iter().map(|a| a.eval(x)).collect();
        mono.iter().map(|a| mono.iter().map(|b| a * b).collect()).collect()
    }
}

fn enumerate(vars: &[usize], budget: u32, cur: &mut Vec<u32>, out: &mut Vec<ExponentVec>) {
    match vars.split_first() {
        None => out.push(ExponentVec::new(cur.clone())),
        Some((&i, rest)) => {
            for k in 0..=budget {
                cur[i] = k;
                enumerate(rest, budget - k, cur, out);
            }
            cur[i] = 0;
        }
    }
}

/// Bases for every clique; fails if some monomial of `support` is not covered.
pub fn build_bases(cover: &CliqueCover, omega: u32, support: &[ExponentVec]) -> Result<Vec<MomentBasis>> {
    if omega == 0 {
        return Err(Error::InvalidParameter("relaxation order must be at least 1".into()));
    }
    let bases: Vec<MomentBasis> = cover.cliques.iter().map(|c| MomentBasis::new(cover.n, c, omega)).collect();
    for alpha in support {
        if !bases.iter().any(|b| b.covers(alpha)) {
            return Err(Error::Coverage { monomial: alpha.entries().to_vec() });
        }
    }
    Ok(bases)
}

/// Smallest relaxation order whose bases can hold every monomial of `f` and every `gamma`.
pub fn default_omega(f: &Polynomial, gamma: &[ExponentVec]) -> u32 {
    let d = f
        .support()
        .chain(gamma)
        .map(ExponentVec::total_degree)
        .max()
        .unwrap_or(0);
    d.div_ceil(2).max(1)
}

fn first_split(basis: &MomentBasis, alpha: &ExponentVec) -> Option<(usize, usize)> {
    for (i, a) in basis.elems.iter().enumerate() {
        if !dominates(alpha, a) {
            continue;
        }
        let rest = ExponentVec::new(alpha.entries().iter().zip(a.entries()).map(|(x, y)| x - y).collect());
        if let Some(j) = basis.position(&rest) {
            if j >= i {
                return Some((i, j));
            }
        }
    }
    None
}

/// `F0` with `sum_k <F0^k, x^{A^k x A^k}> = f(x)`.
///
/// Each monomial goes to the lowest-index covering clique at the graded-lex
/// first pair realizing it; off-diagonal coefficients are split in halves.
pub fn lift_objective(f: &Polynomial, bases: &[MomentBasis]) -> Result<BlockSymMatrix> {
    let sizes: Vec<usize> = bases.iter().map(MomentBasis::len).collect();
    let mut out = BlockSymMatrix::zeros(&sizes);
    for (alpha, c) in f.terms() {
        let (k, (i, j)) = bases
            .iter()
            .enumerate()
            .filter(|(_, b)| b.covers(alpha))
            .find_map(|(k, b)| first_split(b, alpha).map(|p| (k, p)))
            .ok_or_else(|| Error::Coverage { monomial: alpha.entries().to_vec() })?;
        let blk = &mut out.blocks[k];
        if i == j {
            blk[(i, i)] += c;
        } else {
            blk[(i, j)] += 0.5 * c;
            blk[(j, i)] += 0.5 * c;
        }
    }
    Ok(out)
}

/// `H0`: `1/l` at each block's constant-constant entry.
pub fn normalization(bases: &[MomentBasis]) -> BlockSymMatrix {
    let sizes: Vec<usize> = bases.iter().map(MomentBasis::len).collect();
    let mut h = BlockSymMatrix::zeros(&sizes);
    let ell = bases.len() as f64;
    for b in &mut h.blocks {
        b[(0, 0)] = 1.0 / ell;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum K2Component {
    /// Classes ordered so that each value dominates the next.
    Chain(Vec<usize>),
    /// A component that is not a simple path; `edges` use indices into `nodes`.
    General { nodes: Vec<usize>, edges: Vec<(usize, usize)> },
}

/// Partition of all block entries into classes keyed by `r(alpha + beta)`.
#[derive(Clone, Debug)]
pub struct K2Structure {
    /// Per block, class id of entry `(i, j)` at `j * m + i`.
    pub class_of: Vec<Vec<u32>>,
    pub keys: Vec<ExponentVec>,
    pub sizes: Vec<usize>,
    pub zero: Vec<bool>,
    /// Transitively reduced edges `(parent, child)`: value(parent) >= value(child).
    pub chain_edges: Vec<(usize, usize)>,
    pub components: Vec<K2Component>,
    block_sizes: Vec<usize>,
}

impl K2Structure {
    pub fn num_classes(&self) -> usize {
        self.keys.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Builds a structure directly from class assignments (for synthetic tests and tools).
    pub fn from_parts(
        class_of: Vec<Vec<u32>>,
        zero: Vec<bool>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let nc = zero.len();
        let mut sizes = vec![0usize; nc];
        let mut block_sizes = Vec::new();
        for ids in &class_of {
            let m = (ids.len() as f64).sqrt().round() as usize;
            assert_eq!(m * m, ids.len(), "class map must be square");
            block_sizes.push(m);
            for &c in ids {
                sizes[c as usize] += 1;
            }
        }
        let edges: Vec<(usize, usize)> =
            transitive_reduction(edges.into_iter().filter(|&(u, w)| !zero[u] && !zero[w]).collect());
        let components = components_of(&edges);
        K2Structure {
            class_of,
            keys: vec![ExponentVec::zeros(0); nc],
            sizes,
            zero,
            chain_edges: edges,
            components,
            block_sizes,
        }
    }

    /// Tuple whose entries take the given per-class values.
    pub fn expand(&self, vals: &[f64]) -> BlockSymMatrix {
        BlockSymMatrix {
            blocks: self
                .class_of
                .iter()
                .zip(&self.block_sizes)
                .map(|(ids, &m)| faer::Mat::from_fn(m, m, |i, j| vals[ids[j * m + i] as usize]))
                .collect(),
        }
    }

    /// Largest violation of the K2 constraints by `z` (class spread, sign, order, zero-fixing).
    pub fn violation(&self, z: &BlockSymMatrix) -> f64 {
        let nc = self.num_classes();
        let mut lo = vec![f64::INFINITY; nc];
        let mut hi = vec![f64::NEG_INFINITY; nc];
        for ((b, ids), &m) in z.blocks.iter().zip(&self.class_of).zip(&self.block_sizes) {
            for j in 0..m {
                for i in 0..m {
                    let c = ids[j * m + i] as usize;
                    lo[c] = lo[c].min(b[(i, j)]);
                    hi[c] = hi[c].max(b[(i, j)]);
                }
            }
        }
        let mut worst: f64 = 0.0;
        for c in 0..nc {
            if self.sizes[c] == 0 {
                continue;
            }
            worst = worst.max(hi[c] - lo[c]).max(-lo[c]);
            if self.zero[c] {
                worst = worst.max(hi[c].abs()).max(lo[c].abs());
            }
        }
        for &(u, w) in &self.chain_edges {
            worst = worst.max(hi[w] - lo[u]);
        }
        worst
    }
}

fn transitive_reduction(mut edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    edges.sort_unstable();
    edges.dedup();
    let mut out_adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, w) in &edges {
        out_adj.entry(u).or_default().push(w);
    }
    let reachable_indirect = |u: usize, w: usize| -> bool {
        let mut stack: Vec<usize> = out_adj[&u].iter().copied().filter(|&v| v != w).collect();
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == w {
                return true;
            }
            if seen.insert(v) {
                if let Some(next) = out_adj.get(&v) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        false
    };
    edges.iter().copied().filter(|&(u, w)| !reachable_indirect(u, w)).collect()
}

fn components_of(edges: &[(usize, usize)]) -> Vec<K2Component> {
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    fn find(p: &mut BTreeMap<usize, usize>, x: usize) -> usize {
        let mut r = x;
        while p[&r] != r {
            r = p[&r];
        }
        let mut y = x;
        while p[&y] != r {
            let next = p[&y];
            p.insert(y, r);
            y = next;
        }
        r
    }
    for &(u, w) in edges {
        parent.entry(u).or_insert(u);
        parent.entry(w).or_insert(w);
        let (a, b) = (find(&mut parent, u), find(&mut parent, w));
        if a != b {
            parent.insert(a.max(b), a.min(b));
        }
    }
    let nodes: Vec<usize> = parent.keys().copied().collect();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in nodes {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut out = Vec::new();
    for (_, nodes) in groups {
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let ledges: Vec<(usize, usize)> = edges
            .iter()
            .filter(|(u, _)| local.contains_key(u))
            .map(|(u, w)| (local[u], local[w]))
            .collect();
        let mut indeg = vec![0; nodes.len()];
        let mut outdeg = vec![0; nodes.len()];
        let mut next = vec![usize::MAX; nodes.len()];
        for &(u, w) in &ledges {
            outdeg[u] += 1;
            indeg[w] += 1;
            next[u] = w;
        }
        if indeg.iter().chain(&outdeg).all(|&d| d <= 1) {
            let mut cur = (0..nodes.len()).find(|&i| indeg[i] == 0).expect("acyclic chain has a head");
            let mut order = vec![nodes[cur]];
            while next[cur] != usize::MAX {
                cur = next[cur];
                order.push(nodes[cur]);
            }
            out.push(K2Component::Chain(order));
        } else {
            out.push(K2Component::General { nodes, edges: ledges });
        }
    }
    out
}

/// Classes, zero classes and chain edges of K2 for the given bases.
pub fn build_k2(bases: &[MomentBasis], part: &IndexPartition, gamma: &[ExponentVec]) -> K2Structure {
    let mut key_ids: BTreeMap<ExponentVec, usize> = BTreeMap::new();
    let mut raw: Vec<Vec<ExponentVec>> = Vec::with_capacity(bases.len());
    for b in bases {
        let m = b.len();
        let mut keys = vec![ExponentVec::zeros(0); m * m];
        for j in 0..m {
            for i in 0..=j {
                let key = reduce_unchecked(&b.elems[i].add(&b.elems[j]), part);
                key_ids.entry(key.clone()).or_insert(0);
                keys[j * m + i] = key.clone();
                keys[i * m + j] = key;
            }
        }
        raw.push(keys);
    }
    let keys: Vec<ExponentVec> = key_ids.keys().cloned().collect();
    for (id, v) in key_ids.values_mut().enumerate() {
        *v = id;
    }
    let class_of: Vec<Vec<u32>> = raw
        .iter()
        .map(|ks| ks.iter().map(|k| key_ids[k] as u32).collect())
        .collect();
    let zero: Vec<bool> = keys.iter().map(|k| gamma.iter().any(|g| dominates(k, g))).collect();

    let omega = bases.iter().map(|b| b.omega).max().unwrap_or(0);
    let mut edges = Vec::new();
    for (id, delta) in keys.iter().enumerate() {
        if zero[id] {
            continue;
        }
        for c in 2.. {
            let e = reduce_unchecked(&delta.scale(c), part);
            if &e == delta || e.total_degree() > 2 * omega {
                break;
            }
            if let Some(&t) = key_ids.get(&e) {
                if !zero[t] {
                    edges.push((id, t));
                }
            }
        }
    }
    let mut k2 = K2Structure::from_parts(class_of, zero, edges);
    k2.keys = keys;
    k2
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    #[default]
    Trivial,
    Submodular,
}

#[derive(Clone, Debug, Default)]
pub struct AssembleOptions {
    /// Relaxation order; `None` picks the smallest valid order.
    pub omega: Option<u32>,
    /// Use a single clique containing every variable.
    pub dense: bool,
    /// Explicit clique cover, overriding both the chordal extension and `dense`.
    pub cover: Option<CliqueCover>,
    pub rho: RhoMode,
}

/// The DNN relaxation `min <F0, Z>` s.t. `<H0, Z> = 1`, `Z in K1 ∩ K2`.
#[derive(Clone, Debug)]
pub struct DnnCop {
    pub n: usize,
    pub cover: CliqueCover,
    pub bases: Vec<MomentBasis>,
    pub f0: BlockSymMatrix,
    pub h0: BlockSymMatrix,
    pub k2: K2Structure,
    pub rho: f64,
    pub omega: u32,
    /// Largest total degree among the objective and complementarity monomials.
    pub degree: u32,
}

impl DnnCop {
    pub fn num_blocks(&self) -> usize {
        self.bases.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.bases.iter().map(MomentBasis::len).collect()
    }

    /// `G(y0) = F0 - y0 H0`.
    pub fn g(&self, y0: f64) -> BlockSymMatrix {
        BlockSymMatrix::lincomb(1.0, &self.f0, -y0, &self.h0)
    }

    /// The lifted point `(x^{A^1 x A^1}, ...)`.
    pub fn moment_tuple(&self, x: &[f64]) -> BlockSymMatrix {
        BlockSymMatrix::from_rows(&self.bases.iter().map(|b| b.moment_matrix(x)).collect::<Vec<_>>())
    }
}

/// Pattern, cliques, bases, lifting, K2 and the trace bound for one POP.
pub fn assemble(pop: &PopInstance, opts: &AssembleOptions) -> Result<DnnCop> {
    let n = pop.f0.n();
    let gamma = pop.comp.gamma(n);
    let cover = match (&opts.cover, opts.dense) {
        (Some(c), _) => c.clone(),
        (None, true) => crate::sparsity::CliqueCover::dense(n),
        (None, false) => chordal_extend_and_cliques(&build_pattern(&pop.f0, &pop.comp)),
    };
    let degree = pop.f0.support().chain(&gamma).map(ExponentVec::total_degree).max().unwrap_or(0);
    let omega = opts.omega.unwrap_or_else(|| default_omega(&pop.f0, &gamma));
    let support: Vec<ExponentVec> = pop.f0.support().cloned().chain(gamma.iter().cloned()).collect();
    let bases = build_bases(&cover, omega, &support)?;
    let f0 = lift_objective(&pop.f0, &bases)?;
    let h0 = normalization(&bases);
    let k2 = build_k2(&bases, &pop.partition, &gamma);
    let rho = match opts.rho {
        RhoMode::Trivial => trivial_rho(&bases, &gamma),
        RhoMode::Submodular => submodular_rho(&TraceBoundProblem::new(&bases, &gamma))?,
    };
    Ok(DnnCop { n, cover, bases, f0, h0, k2, rho, omega, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: &[u32]) -> ExponentVec {
        ExponentVec::new(v.to_vec())
    }

    #[test]
    fn univariate_basis() {
        let b = MomentBasis::new(1, &[0], 2);
        assert_eq!(b.elems, vec![ev(&[0]), ev(&[1]), ev(&[2])]);
    }

    #[test]
    fn coverage_error() {
        let cover = CliqueCover { n: 3, cliques: vec![vec![0, 1], vec![1, 2]] };
        let err = build_bases(&cover, 1, &[ev(&[1, 0, 1])]).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
        assert!(build_bases(&cover, 1, &[ev(&[1, 1, 0])]).is_ok());
        let err = build_bases(&cover, 1, &[ev(&[1, 1, 1])]).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn box_chain_edges() {
        let part = IndexPartition::all_box(1);
        let bases = vec![MomentBasis::new(1, &[0], 2)];
        let k2 = build_k2(&bases, &part, &[]);
        assert_eq!(k2.keys, vec![ev(&[0]), ev(&[1]), ev(&[2]), ev(&[3]), ev(&[4])]);
        let mut named: Vec<(u32, u32)> = k2
            .chain_edges
            .iter()
            .map(|&(u, w)| (k2.keys[u].get(0), k2.keys[w].get(0)))
            .collect();
        named.sort();
        assert_eq!(named, vec![(1, 2), (1, 3), (2, 4)]);
        // 1 -> {2, 3}, 2 -> 4 is a tree, not a chain.
        assert!(matches!(k2.components[0], K2Component::General { .. }));
        assert_eq!(k2.sizes.iter().sum::<usize>(), 9);
    }

    #[test]
    fn binary_has_no_chains() {
        let part = IndexPartition::all_binary(2);
        let bases = vec![MomentBasis::new(2, &[0, 1], 2)];
        let k2 = build_k2(&bases, &part, &[]);
        assert!(k2.chain_edges.is_empty());
        assert!(k2.components.is_empty());
    }

    #[test]
    fn transitive_reduction_drops_shortcut() {
        assert_eq!(transitive_reduction(vec![(0, 1), (1, 2), (0, 2)]), vec![(0, 1), (1, 2)]);
    }
}
