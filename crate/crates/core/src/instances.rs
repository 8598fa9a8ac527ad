//! Problem instances: the JSON format, random generators, QAPLIB ingestion with
//! the penalized QAP reduction, and enumeration oracles.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::{canonicalize_objective, ComplementarityFamily, ExponentVec, IndexPartition, Polynomial};
use crate::rng::SeededRng;
use crate::sparsity::CliqueCover;

/// `min f0(x)` over binary/box variables with complementarity constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct PopInstance {
    pub f0: Polynomial,
    pub partition: IndexPartition,
    pub comp: ComplementarityFamily,
    pub seed: Option<u64>,
    pub provenance: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    expo: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    objective: Vec<TermJson>,
    bin: Vec<usize>,
    #[serde(rename = "box")]
    box_: Vec<usize>,
    #[serde(default)]
    comp: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl PopInstance {
    /// Builds an instance, canonicalizing the objective.
    pub fn new(f0: Polynomial, partition: IndexPartition, comp: ComplementarityFamily) -> Result<Self> {
        let f0 = canonicalize_objective(&f0, &partition)?;
        Ok(PopInstance { f0, partition, comp, seed: None, provenance: None })
    }

    pub fn n(&self) -> usize {
        self.f0.n()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = InstanceJson {
            n: self.n(),
            objective: self
                .f0
                .terms()
                .map(|(a, c)| TermJson { expo: a.entries().to_vec(), coef: c })
                .collect(),
            bin: self.partition.bin(),
            box_: self.partition.box_indices(),
            comp: self.comp.sets().to_vec(),
            seed: self.seed,
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: InstanceJson = serde_json::from_str(s)?;
        let partition = IndexPartition::new(doc.n, &doc.bin, &doc.box_)?;
        let comp = ComplementarityFamily::new(doc.n, doc.comp)?;
        let f0 = Polynomial::from_terms(
            doc.n,
            doc.objective.into_iter().map(|t| (ExponentVec::new(t.expo), t.coef)),
        )?;
        let mut pop = PopInstance::new(f0, partition, comp)?;
        pop.seed = doc.seed;
        pop.provenance = doc.provenance;
        Ok(pop)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// True if `x` lies in the feasible set (binary coordinates in {0,1}, box in [0,1], complementarity).
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| {
            if self.partition.is_binary(i) {
                v == 0.0 || v == 1.0
            } else {
                (0.0..=1.0).contains(&v)
            }
        }) && self.comp.satisfied_by(x)
    }
}

/// Random POP with dense-in-clique support of total degree at most `d`.
///
/// Random draws, in order: one coefficient `2u - 1` per support monomial in
/// graded-lex order, then `comp_count` distinct pairs by partial Fisher-Yates
/// over the sorted within-clique pairs `i < j`.
pub fn gen_random_pop(
    cover: &CliqueCover,
    d: u32,
    partition: &IndexPartition,
    comp_count: usize,
    seed: u64,
) -> Result<PopInstance> {
    if d < 1 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    let n = cover.n;
    if partition.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: partition.n() });
    }
    let mut support = BTreeSet::new();
    for c in &cover.cliques {
        for a in crate::relaxation::MomentBasis::new(n, c, d).elems {
            support.insert(a);
        }
    }
    let mut rng = SeededRng::new(seed);
    let terms: Vec<(ExponentVec, f64)> = support.into_iter().map(|a| (a, rng.uniform_in(-1.0, 1.0))).collect();
    let f0 = Polynomial::from_terms(n, terms)?;

    let mut pairs = BTreeSet::new();
    for c in &cover.cliques {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    let take = comp_count.min(pairs.len());
    for t in 0..take {
        let s = t + rng.index(pairs.len() - t);
        pairs.swap(t, s);
    }
    let comp = ComplementarityFamily::new(n, pairs[..take].iter().map(|&(i, j)| vec![i, j]).collect())?;
    let mut pop = PopInstance::new(f0, partition.clone(), comp)?;
    pop.seed = Some(seed);
    pop.provenance = Some(serde_json::json!({
        "generator": "random",
        "d": d,
        "cliques": cover.cliques,
        "comp_count": comp_count,
    }));
    Ok(pop)
}

/// `min <X, A X B^T>` over permutation matrices `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct QapInstance {
    pub r: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub optimum: Option<f64>,
}

impl QapInstance {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let r = a.len();
        if a.iter().chain(&b).any(|row| row.len() != r) || b.len() != r {
            return Err(Error::InvalidParameter("QAP matrices must be square and of equal size".into()));
        }
        Ok(QapInstance { r, a, b, optimum: None })
    }

    /// `<X, A X B^T>` where column `p` of `X` has its one in row `perm[p]`.
    pub fn cost(&self, perm: &[usize]) -> f64 {
        let mut s = 0.0;
        for p in 0..self.r {
            for q in 0..self.r {
                s += self.b[p][q] * self.a[perm[p]][perm[q]];
            }
        }
        s
    }

    /// Exact optimum by enumerating all permutations (small `r` only).
    pub fn enumerate_optimum(&self) -> Result<f64> {
        if self.r > 9 {
            return Err(Error::TooLarge(format!("r = {} is too large to enumerate", self.r)));
        }
        let mut perm: Vec<usize> = (0..self.r).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| best = best.min(self.cost(p)));
        Ok(best)
    }
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Parses the QAPLIB text layout: `r`, then `A` and `B` as `r x r` whitespace-separated values.
pub fn parse_qaplib(text: &str) -> Result<QapInstance> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(l, line)| line.split_whitespace().enumerate().map(move |(o, t)| (l + 1, o + 1, t)));
    let mut last = (1, 0);
    let mut next = |what: &str| -> Result<(usize, usize, f64)> {
        match tokens.next() {
            Some((l, o, t)) => {
                last = (l, o);
                t.parse::<f64>()
                    .map(|v| (l, o, v))
                    .map_err(|_| Error::Parse { line: l, offset: o, message: format!("expected {what}, found {t:?}") })
            }
            None => Err(Error::Parse {
                line: last.0,
                offset: last.1,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    };
    let (l, o, rv) = next("matrix size")?;
    if rv < 1.0 || rv.fract() != 0.0 {
        return Err(Error::Parse { line: l, offset: o, message: format!("invalid size {rv}") });
    }
    let r = rv as usize;
    let mut read = |name: &str| -> Result<Vec<Vec<f64>>> {
        (0..r)
            .map(|i| (0..r).map(|j| next(&format!("{name}[{}][{}]", i + 1, j + 1)).map(|t| t.2)).collect())
            .collect()
    };
    let a = read("A")?;
    let b = read("B")?;
    QapInstance::new(a, b)
}

pub fn load_qaplib(path: impl AsRef<Path>) -> Result<QapInstance> {
    parse_qaplib(&std::fs::read_to_string(path)?)
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
fn power_iteration(dim: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i % 7) as f64 / 10.0).collect();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = apply(&v);
        let next = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let done = (next - lambda).abs() <= 1e-10 * next;
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    lambda
}

/// Spectral norm of a dense square matrix.
pub fn spectral_norm(m: &[Vec<f64>]) -> f64 {
    let r = m.len();
    power_iteration(r, |v| {
        let mv: Vec<f64> = (0..r).map(|i| (0..r).map(|j| m[i][j] * v[j]).sum()).collect();
        (0..r).map(|j| (0..r).map(|i| m[i][j] * mv[i]).sum()).collect()
    })
    .sqrt()
}

/// Variable index of `X_{i,p}` in the column-stacked vector.
pub fn qap_var(r: usize, row: usize, col: usize) -> usize {
    col * r + row
}

/// Penalized box-constrained POP: `x^T (B ⊗ A) x + lambda' ||C x - d||^2` with
/// complementarity on every row and column of `X`.
pub fn qap_to_pop(q: &QapInstance, lambda: f64) -> Result<PopInstance> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("penalty parameter must be positive".into()));
    }
    let r = q.r;
    let n = r * r;
    let norm_ba = spectral_norm(&q.a) * spectral_norm(&q.b);
    // M = [d C]^T [d C]; its norm is the top eigenvalue.
    let rows: Vec<Vec<usize>> = (0..r)
        .map(|p| (0..r).map(|i| qap_var(r, i, p)).collect())
        .chain((0..r).map(|i| (0..r).map(|p| qap_var(r, i, p)).collect()))
        .collect();
    let norm_m = power_iteration(n + 1, |v| {
        let dc: Vec<f64> = rows.iter().map(|row| v[0] + row.iter().map(|&u| v[u + 1]).sum::<f64>()).collect();
        let mut out = vec![0.0; n + 1];
        out[0] = dc.iter().sum();
        for (row, s) in rows.iter().zip(&dc) {
            for &u in row {
                out[u + 1] += s;
            }
        }
        out
    });
    let lam = lambda * norm_ba / norm_m;

    let mut f = Polynomial::zero(n);
    let same_col = |u: usize, v: usize| u / r == v / r;
    let same_row = |u: usize, v: usize| u % r == v % r;
    for u in 0..n {
        for v in u..n {
            let (pu, iu, pv, iv) = (u / r, u % r, v / r, v % r);
            let quad = 0.5 * (q.b[pu][pv] * q.a[iu][iv] + q.b[pv][pu] * q.a[iv][iu]);
            let ctc = (same_col(u, v) as u32 + same_row(u, v) as u32) as f64;
            let c = quad + lam * ctc;
            let mono = ExponentVec::new((0..n).map(|w| (w == u) as u32 + (w == v) as u32).collect());
            f.add_term(mono, if u == v { c } else { 2.0 * c })?;
        }
        f.add_term(ExponentVec::unit(n, u, 1), -4.0 * lam)?;
    }
    f.add_term(ExponentVec::zeros(n), 2.0 * r as f64 * lam)?;

    let mut sets = Vec::new();
    for row in &rows {
        for (a, &u) in row.iter().enumerate() {
            for &v in &row[a + 1..] {
                sets.push(vec![u, v]);
            }
        }
    }
    let comp = ComplementarityFamily::new(n, sets)?;
    let mut pop = PopInstance::new(f, IndexPartition::all_box(n), comp)?;
    pop.provenance = Some(serde_json::json!({
        "generator": "qap",
        "r": r,
        "lambda": lambda,
        "penalty_scale": lam,
    }));
    Ok(pop)
}

/// Result of exhaustive minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub value: f64,
    pub x: Vec<f64>,
    /// True when there are no box variables, so the value is the exact optimum.
    pub exact: bool,
}

struct SparseTerms {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
    by_var: Vec<Vec<usize>>,
}

impl SparseTerms {
    fn new(f: &Polynomial) -> Self {
        let mut by_var = vec![Vec::new(); f.n()];
        let terms: Vec<(f64, Vec<(usize, i32)>)> = f
            .terms()
            .enumerate()
            .map(|(t, (a, c))| {
                let vars: Vec<(usize, i32)> = a.support().map(|i| (i, a.get(i) as i32)).collect();
                for &(i, _) in &vars {
                    by_var[i].push(t);
                }
                (c, vars)
            })
            .collect();
        SparseTerms { terms, by_var }
    }

    fn term(&self, t: usize, x: &[f64]) -> f64 {
        let (c, vars) = &self.terms[t];
        c * vars.iter().map(|&(i, k)| x[i].powi(k)).product::<f64>()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (0..self.terms.len()).map(|t| self.term(t, x)).sum()
    }

    /// Change in value when `x[i]` is set to `v`.
    fn delta(&self, x: &mut [f64], i: usize, v: f64) -> f64 {
        let old = x[i];
        let before: f64 = self.by_var[i].iter().map(|&t| self.term(t, x)).sum();
        x[i] = v;
        let after: f64 = self.by_var[i].iter().map(|&t| self.term(t, x)).sum();
        x[i] = old;
        after - before
    }
}

/// Minimizes `f0` over binary assignments times a uniform grid of `grid_per_box`
/// points on each box coordinate, skipping complementarity violations.
pub fn brute_force_optimum(pop: &PopInstance, grid_per_box: usize) -> Result<BruteForce> {
    let n = pop.n();
    if n > 14 {
        return Err(Error::TooLarge(format!("{n} variables exceed the enumeration limit of 14")));
    }
    if grid_per_box < 2 {
        return Err(Error::InvalidParameter("grid_per_box must be at least 2".into()));
    }
    let levels: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if pop.partition.is_binary(i) {
                vec![0.0, 1.0]
            } else {
                (0..grid_per_box).map(|k| k as f64 / (grid_per_box - 1) as f64).collect()
            }
        })
        .collect();
    let total: f64 = levels.iter().map(|l| l.len() as f64).product();
    if total > 5e7 {
        return Err(Error::TooLarge(format!("{total} grid points")));
    }
    let terms = SparseTerms::new(&pop.f0);
    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = levels.iter().map(|l| l[0]).collect();
    let mut best = BruteForce { value: f64::INFINITY, x: x.clone(), exact: pop.partition.box_indices().is_empty() };
    loop {
        if pop.comp.satisfied_by(&x) {
            let v = terms.eval(&x);
            if v < best.value {
                best.value = v;
                best.x = x.clone();
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < levels[k].len() {
                x[k] = levels[k][idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = levels[k][0];
            k += 1;
        }
    }
}

/// A feasible point and its objective value, for the initial upper bracket.
///
/// Candidates are `x = 0` and the all-ones point with one variable zeroed per
/// violated complementarity set; each is improved by best-improvement 0/1
/// coordinate moves that keep complementarity.
pub fn heuristic_upper_bound(pop: &PopInstance) -> (Vec<f64>, f64) {
    let n = pop.n();
    let terms = SparseTerms::new(&pop.f0);
    let mut ones = vec![1.0; n];
    for c in pop.comp.sets() {
        if c.iter().all(|&i| ones[i] != 0.0) {
            ones[c[0]] = 0.0;
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in [vec![0.0; n], ones] {
        let (x, v) = descend(pop, &terms, start);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    best.expect("at least one candidate")
}

fn descend(pop: &PopInstance, terms: &SparseTerms, mut x: Vec<f64>) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut members = vec![Vec::new(); n];
    for (s, c) in pop.comp.sets().iter().enumerate() {
        for &i in c {
            members[i].push(s);
        }
    }
    let sets = pop.comp.sets();
    let mut value = terms.eval(&x);
    for _ in 0..10 * n + 10 {
        let mut best = (0.0, usize::MAX);
        for i in 0..n {
            let v = 1.0 - x[i].round();
            if v == 1.0 && members[i].iter().any(|&s| sets[s].iter().all(|&j| j == i || x[j] != 0.0)) {
                continue;
            }
            let d = terms.delta(&mut x, i, v);
            if d < best.0 {
                best = (d, i);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let i = best.1;
        x[i] = 1.0 - x[i].round();
        value = terms.eval(&x);
    }
    (x, value)
}
