//! Block-symmetric tuples and the projections onto K1 (product of PSD cones),
//! K2 (the polyhedral cone of linearized valid constraints) and their duals.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::relaxation::{K2Component, K2Structure};

/// Element of the product space of symmetric matrices, one block per clique basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSymMatrix {
    pub blocks: Vec<Mat<f64>>,
}

impl BlockSymMatrix {
    pub fn zeros(sizes: &[usize]) -> Self {
        BlockSymMatrix { blocks: sizes.iter().map(|&m| Mat::zeros(m, m)).collect() }
    }

    pub fn identity(sizes: &[usize]) -> Self {
        BlockSymMatrix { blocks: sizes.iter().map(|&m| Mat::identity(m, m)).collect() }
    }

    /// Builds blocks from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Self {
        BlockSymMatrix {
            blocks: rows
                .iter()
                .map(|b| Mat::from_fn(b.len(), b.len(), |i, j| b[i][j]))
                .collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.blocks
            .iter()
            .map(|b| (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| b[(i, j)]).collect()).collect())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    fn zip_cols<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = (&'a [f64], &'a [f64])> + 'a {
        assert_eq!(self.sizes(), other.sizes(), "block shapes differ");
        self.blocks.iter().zip(&other.blocks).flat_map(|(a, b)| {
            (0..a.ncols()).map(move |j| (a.col_as_slice(j), b.col_as_slice(j)))
        })
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.zip_cols(other)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (0..b.ncols()).map(|j| b.col_as_slice(j).iter().map(|x| x * x).sum::<f64>()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.ncols()).flat_map(move |j| b.col_as_slice(j).iter().map(|x| x.abs())))
            .fold(0.0, f64::max)
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        assert_eq!(self.sizes(), x.sizes(), "block shapes differ");
        for (a, b) in self.blocks.iter_mut().zip(&x.blocks) {
            for j in 0..a.ncols() {
                for (u, v) in a.col_as_slice_mut(j).iter_mut().zip(b.col_as_slice(j)) {
                    *u += alpha * v;
                }
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.blocks {
            for j in 0..a.ncols() {
                for u in a.col_as_slice_mut(j) {
                    *u *= alpha;
                }
            }
        }
    }

    /// `a * x + b * y`.
    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let mut out = x.clone();
        out.scale(a);
        out.axpy(b, y);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::lincomb(1.0, self, -1.0, other)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::lincomb(1.0, self, 1.0, other)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.scale(-1.0);
        out
    }

    /// Largest `|Z_ij - Z_ji|` relative to `max(1, max|Z_ij|)`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(1.0);
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            for j in 0..b.ncols() {
                for i in 0..j {
                    worst = worst.max((b[(i, j)] - b[(j, i)]).abs());
                }
            }
        }
        worst / scale
    }
}

fn symmetrized(b: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(b.nrows(), b.ncols(), |i, j| 0.5 * (b[(i, j)] + b[(j, i)]))
}

fn eigenvalues(b: &Mat<f64>, block: usize) -> Result<Vec<f64>> {
    if b.nrows() == 0 {
        return Ok(Vec::new());
    }
    symmetrized(b)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigen { block })
}

fn project_psd_block(b: &Mat<f64>, block: usize) -> Result<Mat<f64>> {
    let m = b.nrows();
    let sym = symmetrized(b);
    if m == 0 {
        return Ok(sym);
    }
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen { block })?;
    let s: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();
    // Eigenvalues are nondecreasing.
    let neg = s.iter().take_while(|&&x| x < 0.0).count();
    let pos = s.iter().rev().take_while(|&&x| x > 0.0).count();
    if neg == 0 {
        return Ok(sym);
    }
    if pos == 0 {
        return Ok(Mat::zeros(m, m));
    }
    let out = if pos <= neg {
        let w = Mat::from_fn(m, pos, |i, c| {
            let k = m - pos + c;
            u[(i, k)] * s[k].sqrt()
        });
        &w * w.transpose()
    } else {
        let w = Mat::from_fn(m, neg, |i, c| u[(i, c)] * (-s[c]).sqrt());
        &sym + &w * w.transpose()
    };
    Ok(symmetrized(&out))
}

/// Blockwise spectral projection onto the PSD cone (negative eigenvalues clipped to 0).
pub fn project_psd_product(z: &BlockSymMatrix) -> Result<BlockSymMatrix> {
    let blocks = z
        .blocks
        .iter()
        .enumerate()
        .map(|(k, b)| project_psd_block(b, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockSymMatrix { blocks })
}

/// `||Pi_K1(Z)||`, from eigenvalues only.
pub fn psd_part_norm(z: &BlockSymMatrix) -> Result<f64> {
    let mut s = 0.0;
    for (k, b) in z.blocks.iter().enumerate() {
        s += eigenvalues(b, k)?.iter().filter(|&&x| x > 0.0).map(|x| x * x).sum::<f64>();
    }
    Ok(s.sqrt())
}

/// Smallest eigenvalue over all blocks, i.e. `sup{lambda : Z - lambda I in K1}`.
pub fn lambda_min_shift(z: &BlockSymMatrix) -> Result<f64> {
    let mut lo = f64::INFINITY;
    for (k, b) in z.blocks.iter().enumerate() {
        if let Some(&x) = eigenvalues(b, k)?.first() {
            lo = lo.min(x);
        }
    }
    Ok(if lo.is_finite() { lo } else { 0.0 })
}

/// Scratch buffers for K2 projections; holds no state between calls.
#[derive(Default)]
pub struct ProjectionWorkspace {
    sums: Vec<f64>,
}

impl ProjectionWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Optimal class values of the K2 projection of `z`.
    pub fn k2_class_values(&mut self, z: &BlockSymMatrix, k2: &K2Structure) -> Result<Vec<f64>> {
        assert_eq!(z.sizes(), k2.block_sizes(), "shape does not match K2 structure");
        let nc = k2.num_classes();
        self.sums.clear();
        self.sums.resize(nc, 0.0);
        for (b, ids) in z.blocks.iter().zip(&k2.class_of) {
            let m = b.nrows();
            for j in 0..m {
                let col = b.col_as_slice(j);
                let ids = &ids[j * m..(j + 1) * m];
                for (v, &c) in col.iter().zip(ids) {
                    self.sums[c as usize] += v;
                }
            }
        }
        let mut vals: Vec<f64> = (0..nc)
            .map(|c| if k2.zero[c] { 0.0 } else { self.sums[c] / k2.sizes[c] as f64 })
            .collect();
        for comp in &k2.components {
            match comp {
                K2Component::Chain(nodes) => {
                    let v: Vec<f64> = nodes.iter().map(|&c| vals[c]).collect();
                    let w: Vec<f64> = nodes.iter().map(|&c| k2.sizes[c] as f64).collect();
                    for (&c, x) in nodes.iter().zip(pava_nonincreasing(&v, &w)) {
                        vals[c] = x;
                    }
                }
                K2Component::General { nodes, edges } => {
                    let v: Vec<f64> = nodes.iter().map(|&c| vals[c]).collect();
                    let w: Vec<f64> = nodes.iter().map(|&c| k2.sizes[c] as f64).collect();
                    for (&c, x) in nodes.iter().zip(monotone_nonneg_ls(&v, &w, edges)?) {
                        vals[c] = x;
                    }
                }
            }
        }
        for v in &mut vals {
            *v = v.max(0.0);
        }
        Ok(vals)
    }

    pub fn project_k2(&mut self, z: &BlockSymMatrix, k2: &K2Structure) -> Result<BlockSymMatrix> {
        let vals = self.k2_class_values(z, k2)?;
        Ok(k2.expand(&vals))
    }
}

/// Euclidean projection onto K2.
pub fn project_k2(z: &BlockSymMatrix, k2: &K2Structure) -> Result<BlockSymMatrix> {
    ProjectionWorkspace::new().project_k2(z, k2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    K1,
    K2,
}

/// `Pi_{K*}(Z) = Z + Pi_K(-Z)`.
pub fn project_dual(z: &BlockSymMatrix, cone: Cone, k2: &K2Structure) -> Result<BlockSymMatrix> {
    let p = match cone {
        Cone::K1 => project_psd_product(&z.neg())?,
        Cone::K2 => project_k2(&z.neg(), k2)?,
    };
    Ok(z.add(&p))
}

/// Weighted least squares fit that is nonincreasing along the sequence.
pub fn pava_nonincreasing(v: &[f64], w: &[f64]) -> Vec<f64> {
    // Stack of pooled blocks: (mean, weight, count).
    let mut stack: Vec<(f64, f64, usize)> = Vec::with_capacity(v.len());
    for (&x, &wx) in v.iter().zip(w) {
        let mut cur = (x, wx, 1);
        while let Some(&(m, wm, cm)) = stack.last() {
            if m >= cur.0 {
                break;
            }
            stack.pop();
            let wt = wm + cur.1;
            cur = ((m * wm + cur.0 * cur.1) / wt, wt, cm + cur.2);
        }
        stack.push(cur);
    }
    stack.into_iter().flat_map(|(m, _, c)| std::iter::repeat(m).take(c)).collect()
}

/// `argmin sum_c w_c (x_c - v_c)^2` subject to `x_u >= x_w` on `edges` (local
/// indices) and `x >= 0`, solved exactly through its dual nonnegative least
/// squares problem.
pub fn monotone_nonneg_ls(v: &[f64], w: &[f64], edges: &[(usize, usize)]) -> Result<Vec<f64>> {
    let m = v.len();
    // Constraint rows a_r with a_r . x >= 0.
    let mut rows: Vec<Vec<(usize, f64)>> = edges.iter().map(|&(u, t)| vec![(u, 1.0), (t, -1.0)]).collect();
    rows.extend((0..m).map(|c| vec![(c, 1.0)]));
    // x = v + W^-1 A^T lambda; dual: min ||M lambda - b||, M = W^-1/2 A^T, b = -W^1/2 v.
    let mut mat = vec![vec![0.0; rows.len()]; m];
    for (r, row) in rows.iter().enumerate() {
        for &(c, a) in row {
            mat[c][r] = a / w[c].sqrt();
        }
    }
    let b: Vec<f64> = (0..m).map(|c| -w[c].sqrt() * v[c]).collect();
    let lambda = nnls(&mat, &b)?;
    Ok((0..m)
        .map(|c| {
            let s: f64 = (0..rows.len()).map(|r| mat[c][r] * lambda[r]).sum();
            v[c] + s / w[c].sqrt()
        })
        .collect())
}

/// Lawson-Hanson active-set NNLS for small dense problems; `a` is row-major.
pub fn nnls(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs())).max(1.0)
        * b.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(1.0);
    let tol = 1e-13 * scale * (m.max(n) as f64);
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let grad = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = (0..m).map(|i| b[i] - (0..n).map(|j| a[i][j] * x[j]).sum::<f64>()).collect();
        (0..n).map(|j| (0..m).map(|i| a[i][j] * r[i]).sum()).collect()
    };
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let g = grad(&x);
        let pick = (0..n)
            .filter(|&j| !passive[j] && g[j] > tol)
            .max_by(|&i, &j| g[i].total_cmp(&g[j]));
        let Some(j) = pick else { return Ok(x) };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let zp = least_squares_on(a, b, &idx)?;
            if zp.iter().all(|&z| z > 0.0) {
                for (&j, &z) in idx.iter().zip(&zp) {
                    x[j] = z;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&j, &z) in idx.iter().zip(&zp) {
                if z <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z));
                }
            }
            for (&j, &z) in idx.iter().zip(&zp) {
                x[j] += alpha * (z - x[j]);
                if x[j] <= 1e-15 * scale {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    Err(Error::NonConvergence("NNLS active-set iteration cap reached".into()))
}

/// Least squares restricted to columns `idx`, via normal equations and Cholesky.
fn least_squares_on(a: &[Vec<f64>], b: &[f64], idx: &[usize]) -> Result<Vec<f64>> {
    let p = idx.len();
    let m = a.len();
    let mut g = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (s, &js) in idx.iter().enumerate() {
        rhs[s] = (0..m).map(|i| a[i][js] * b[i]).sum();
        for (t, &jt) in idx.iter().enumerate() {
            g[s][t] = (0..m).map(|i| a[i][js] * a[i][jt]).sum();
        }
    }
    // In-place Cholesky.
    for c in 0..p {
        let mut d = g[c][c];
        for k in 0..c {
            d -= g[c][k] * g[c][k];
        }
        if d <= 1e-14 * g[c][c].max(1e-300) {
            return Err(Error::NonConvergence("rank-deficient active set in NNLS".into()));
        }
        let d = d.sqrt();
        g[c][c] = d;
        for r in c + 1..p {
            let mut s = g[r][c];
            for k in 0..c {
                s -= g[r][k] * g[c][k];
            }
            g[r][c] = s / d;
        }
    }
    let mut y = rhs;
    for r in 0..p {
        for k in 0..r {
            y[r] -= g[r][k] * y[k];
        }
        y[r] /= g[r][r];
    }
    for r in (0..p).rev() {
        for k in r + 1..p {
            y[r] -= g[k][r] * y[k];
        }
        y[r] /= g[r][r];
    }
    Ok(y)
}
