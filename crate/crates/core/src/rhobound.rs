//! Upper bounds on the trace `<I, Z>` over the feasible set of the relaxation.

use crate::error::{Error, Result};
use crate::polyalg::{dominates, ExponentVec};
use crate::relaxation::MomentBasis;

/// Filtered bases `B^k` and the incidence sets `E_i`, `F_i`.
#[derive(Clone, Debug)]
pub struct TraceBoundProblem {
    pub n: usize,
    /// `B^k = {alpha in A^k : alpha not >= gamma for all gamma}`.
    pub b: Vec<Vec<ExponentVec>>,
    pub gamma: Vec<ExponentVec>,
    /// `E_i`: elements `(k, position in b[k])` with `alpha_i >= 1`.
    pub e: Vec<Vec<(usize, usize)>>,
    /// `F_i`: indices of `gamma` with `gamma_i >= 1`.
    pub f: Vec<Vec<usize>>,
}

impl TraceBoundProblem {
    pub fn new(bases: &[MomentBasis], gamma: &[ExponentVec]) -> Self {
        let n = gamma.first().map(ExponentVec::dim).or_else(|| {
            bases.iter().flat_map(|b| b.elems.first()).map(ExponentVec::dim).next()
        });
        let n = n.unwrap_or(0);
        let b: Vec<Vec<ExponentVec>> = bases.iter().map(|bk| filtered(&bk.elems, gamma)).collect();
        let mut e = vec![Vec::new(); n];
        for (k, bk) in b.iter().enumerate() {
            for (p, alpha) in bk.iter().enumerate() {
                for i in alpha.support() {
                    e[i].push((k, p));
                }
            }
        }
        let mut f = vec![Vec::new(); n];
        for (g, gm) in gamma.iter().enumerate() {
            for i in gm.support() {
                f[i].push(g);
            }
        }
        TraceBoundProblem { n, b, gamma: gamma.to_vec(), e, f }
    }

    pub fn total(&self) -> usize {
        self.b.iter().map(Vec::len).sum()
    }
}

fn filtered(elems: &[ExponentVec], gamma: &[ExponentVec]) -> Vec<ExponentVec> {
    elems.iter().filter(|a| !gamma.iter().any(|g| dominates(a, g))).cloned().collect()
}

/// `sum_k |B^k|`.
pub fn trivial_rho(bases: &[MomentBasis], gamma: &[ExponentVec]) -> f64 {
    bases.iter().map(|b| filtered(&b.elems, gamma).len()).sum::<usize>() as f64
}

/// `sum_k |B^k| - c`, where `c` lower-bounds the fewest basis elements any
/// complementarity-feasible 0/1 point must annihilate.
///
/// Splitting each element's unit cost evenly over its support gives a linear
/// minorant `sum_{i in S0} w_i` of `c(S0)`. Its covering LP has a row
/// `sum_{i in supp gamma} z_i >= 1` per `gamma` and, for every clique `T` of
/// the pairwise conflict graph, the valid row `sum_{i in T} z_i >= |T| - 1`.
/// `c` is the better of two dual-feasible solutions (with and without the
/// clique rows), rounded up.
pub fn submodular_rho(p: &TraceBoundProblem) -> Result<f64> {
    let total = p.total() as f64;
    if p.gamma.is_empty() {
        return Ok(total);
    }
    for (g, gm) in p.gamma.iter().enumerate() {
        if gm.is_zero() {
            return Err(Error::InfeasibleCover(format!("complementarity set {g} is empty")));
        }
    }
    let mut w = vec![0.0; p.n];
    for (i, ei) in p.e.iter().enumerate() {
        w[i] = ei.iter().map(|&(k, q)| 1.0 / p.b[k][q].support().count() as f64).sum();
    }
    let plain = gamma_dual(p, w.clone());
    let (from_cliques, residual) = clique_dual(p, w);
    let c = plain.max(from_cliques + gamma_dual(p, residual));
    // The minimum is an integer, so a fractional lower bound rounds up.
    let c = (c - 1e-9).ceil().max(0.0);
    Ok(total - c)
}

/// Dual ascent on the rows `sum_{i in supp gamma} z_i >= 1` with capacities `cap`.
fn gamma_dual(p: &TraceBoundProblem, mut cap: Vec<f64>) -> f64 {
    let mut y = vec![0.0; p.gamma.len()];
    let share: Vec<f64> = (0..p.n).map(|i| cap[i] / p.f[i].len().max(1) as f64).collect();
    for (g, gm) in p.gamma.iter().enumerate() {
        y[g] = gm.support().map(|i| share[i]).fold(f64::INFINITY, f64::min).max(0.0);
        for i in gm.support() {
            cap[i] -= y[g];
        }
    }
    for (g, gm) in p.gamma.iter().enumerate() {
        let extra = gm.support().map(|i| cap[i]).fold(f64::INFINITY, f64::min).max(0.0);
        y[g] += extra;
        for i in gm.support() {
            cap[i] -= extra;
        }
    }
    y.iter().sum()
}

/// Greedy edge-disjoint clique cover of the conflict graph formed by the
/// two-variable `gamma`, then dual ascent on the clique rows, largest first.
/// Returns the dual objective and the residual capacities.
fn clique_dual(p: &TraceBoundProblem, mut cap: Vec<f64>) -> (f64, Vec<f64>) {
    let n = p.n;
    let mut adj = vec![vec![false; n]; n];
    for gm in &p.gamma {
        let s: Vec<usize> = gm.support().collect();
        if let [i, j] = s[..] {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    let mut used = vec![vec![false; n]; n];
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !adj[i][j] || used[i][j] {
                continue;
            }
            let mut t = vec![i, j];
            for v in 0..n {
                if !t.contains(&v) && t.iter().all(|&u| adj[u][v] && !used[u.min(v)][u.max(v)]) {
                    t.push(v);
                }
            }
            for (a, &u) in t.iter().enumerate() {
                for &v in &t[a + 1..] {
                    used[u.min(v)][u.max(v)] = true;
                }
            }
            cliques.push(t);
        }
    }
    cliques.retain(|t| t.len() > 2);
    cliques.sort_by(|a, b| b.len().cmp(&a.len()));
    let mut obj = 0.0;
    for t in &cliques {
        let y = t.iter().map(|&i| cap[i]).fold(f64::INFINITY, f64::min).max(0.0);
        if y > 0.0 {
            obj += (t.len() - 1) as f64 * y;
            for &i in t {
                cap[i] -= y;
            }
        }
    }
    (obj, cap)
}
