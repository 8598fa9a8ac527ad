//! Accelerated proximal gradient feasibility test (with adaptive restarts) and
//! the bisection-projection loop producing certified lower bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cones::{lambda_min_shift, project_psd_product, psd_part_norm, BlockSymMatrix, ProjectionWorkspace};
use crate::error::{Error, Result};
use crate::instances::{heuristic_upper_bound, PopInstance};
use crate::relaxation::{assemble, AssembleOptions, DnnCop, K2Structure};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApgParams {
    /// Threshold on `||X||` for a Feasible verdict.
    pub eps: f64,
    /// Threshold on the KKT error for an Infeasible verdict.
    pub delta: f64,
    pub k_max: usize,
    /// Growth factor of the step constant at each restart.
    pub eta_r: f64,
    pub l_init: f64,
    /// Adaptive restarts; off gives plain APG.
    pub restart: bool,
    pub heuristic_stop: bool,
}

impl Default for ApgParams {
    fn default() -> Self {
        ApgParams {
            eps: 1e-13,
            delta: 1e-6,
            k_max: 20_000,
            eta_r: 1.1,
            l_init: 0.8,
            restart: true,
            heuristic_stop: true,
        }
    }
}

impl ApgParams {
    /// Plain APG: fixed `L = 1`, no restarts.
    pub fn plain() -> Self {
        ApgParams { l_init: 1.0, restart: false, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eps > 0.0
            && self.delta > 0.0
            && self.k_max > 0
            && self.eta_r > 1.0
            && self.l_init > 0.0
            && self.l_init <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid APG parameters {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Feasible,
    Infeasible,
    Undecided,
}

#[derive(Clone, Debug)]
pub struct FeasibilityOutcome {
    pub verdict: Verdict,
    /// `X = G - Y1 - Y2`.
    pub x: BlockSymMatrix,
    pub y1: BlockSymMatrix,
    pub y2: BlockSymMatrix,
    pub iterations: usize,
    pub final_g: f64,
    pub x_norm: f64,
    /// `(||X^k||, g^k)` per iteration.
    pub history: Vec<(f64, f64)>,
}

/// KKT error
/// `max(<X,Y1>/(1+|X|+|Y1|), <X,Y2>/(1+|X|+|Y2|), |Pi_K1*(-X)|/(1+|X|), |Pi_K2*(-X)|/(1+|X|))`.
pub fn kkt_error(x: &BlockSymMatrix, y1: &BlockSymMatrix, y2: &BlockSymMatrix, k2: &K2Structure) -> Result<f64> {
    kkt_error_ws(x, y1, y2, k2, &mut ProjectionWorkspace::new())
}

fn kkt_error_ws(
    x: &BlockSymMatrix,
    y1: &BlockSymMatrix,
    y2: &BlockSymMatrix,
    k2: &K2Structure,
    ws: &mut ProjectionWorkspace,
) -> Result<f64> {
    let nx = x.norm();
    let t1 = x.inner(y1) / (1.0 + nx + y1.norm());
    let t2 = x.inner(y2) / (1.0 + nx + y2.norm());
    let neg_x = x.neg();
    let t3 = psd_part_norm(&neg_x)? / (1.0 + nx);
    // Pi_K2*(-X) = -X + Pi_K2(X).
    let mut d = ws.project_k2(x, k2)?;
    d.axpy(1.0, &neg_x);
    let t4 = d.norm() / (1.0 + nx);
    Ok(t1.max(t2).max(t3).max(t4))
}

/// Heuristic early Infeasible decision from the `(||X^k||, g^k)` history.
pub fn heuristic_stop(history: &[(f64, f64)], delta: f64) -> bool {
    let k = history.len();
    if k < 40 {
        return false;
    }
    let (xn, g) = history[k - 1];
    if !(g > 0.0) || xn / g < 1e4 || g > delta.sqrt() {
        return false;
    }
    let geo = |f: &dyn Fn(usize) -> f64| -> f64 {
        let s: f64 = (0..10).map(|i| (f(k - 1 - i) / f(k - 1 - i - 30)).ln()).sum();
        (s / 10.0).exp()
    };
    let mg = geo(&|j| history[j].1);
    let mx = geo(&|j| history[j].0);
    mg >= 0.95 && mx >= 0.995
}

/// Decides whether `G` lies in `K1* + K2*` by minimizing `||Pi_K2(Y1 - G)||^2 / 2` over `Y1 in K1`.
///
/// The KKT error is evaluated at the primal candidate `-X = Y1 + Y2 - G`, the
/// sign under which optimality reads `-X in K1 ∩ K2`.
pub fn apgr_feasibility(
    g: &BlockSymMatrix,
    y1_init: &BlockSymMatrix,
    k2: &K2Structure,
    params: &ApgParams,
) -> Result<FeasibilityOutcome> {
    params.validate()?;
    let mut ws = ProjectionWorkspace::new();
    let mut y1_prev = y1_init.clone();
    let mut ybar = y1_init.clone();
    let mut t: f64 = 1.0;
    let mut l = params.l_init;
    let mut gap = 2usize;
    let mut k_re = 0usize;
    let mut xn_prev = f64::INFINITY;
    let mut history = Vec::new();
    let mut last = None;
    for k in 1..=params.k_max {
        let grad = ws.project_k2(&ybar.sub(g), k2)?;
        let y1 = project_psd_product(&BlockSymMatrix::lincomb(1.0, &ybar, -1.0 / l, &grad))?;
        let w = g.sub(&y1);
        let mut y2 = ws.project_k2(&w.neg(), k2)?;
        y2.axpy(1.0, &w);
        let x = w.sub(&y2);
        let xn = x.norm();
        let gk = kkt_error_ws(&x.neg(), &y1, &y2, k2, &mut ws)?;
        history.push((xn, gk));
        let verdict = if xn < params.eps {
            Some(Verdict::Feasible)
        } else if gk < params.delta || (params.heuristic_stop && heuristic_stop(&history, params.delta)) {
            Some(Verdict::Infeasible)
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok(FeasibilityOutcome { verdict, x, y1, y2, iterations: k, final_g: gk, x_norm: xn, history });
        }
        let mut t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if params.restart && xn > xn_prev && k > gap + k_re {
            t_next = 1.0;
            ybar = y1.clone();
            k_re = k;
            gap *= 2;
            l *= params.eta_r;
        } else {
            ybar = BlockSymMatrix::lincomb(1.0 + (t - 1.0) / t_next, &y1, -(t - 1.0) / t_next, &y1_prev);
        }
        t = t_next;
        xn_prev = xn;
        y1_prev = y1.clone();
        last = Some((x, y1, y2, gk, xn));
    }
    let (x, y1, y2, gk, xn) = last.expect("k_max >= 1");
    Ok(FeasibilityOutcome {
        verdict: Verdict::Undecided,
        x,
        y1,
        y2,
        iterations: params.k_max,
        final_g: gk,
        x_norm: xn,
        history,
    })
}

/// `y0 + rho * min(0, lambda_min(G(y0) - Y2))`, valid whenever `Y2 in K2*`.
pub fn certified_bound(cop: &DnnCop, y0: f64, y2: &BlockSymMatrix) -> Result<f64> {
    let mu = lambda_min_shift(&cop.g(y0).sub(y2))?.min(0.0);
    Ok(y0 + cop.rho * mu)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpParams {
    /// Bracket tolerance, relative to `max(1, |y0_u|)`.
    pub tol: f64,
    pub apg: ApgParams,
    pub max_iterations: usize,
    pub warm_start: bool,
    /// Divide `F0` by `max(1, min(||F0||, |y0_u|))` before solving, so that
    /// objective values are of order one; bounds are reported unscaled.
    pub scale_objective: bool,
    /// If set and the starting upper bound tests Feasible, raise it by
    /// `expand * max(1, |y0_u|)` and retry.
    pub expand: Option<f64>,
}

impl Default for BpParams {
    fn default() -> Self {
        BpParams {
            tol: 1e-5,
            apg: ApgParams::default(),
            max_iterations: 100,
            warm_start: true,
            scale_objective: true,
            expand: None,
        }
    }
}

/// Dual feasible point `(y0, Y2, mu)` behind a certified bound, in original units.
#[derive(Clone, Debug)]
pub struct Witness {
    pub y0: f64,
    pub y2: BlockSymMatrix,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct BoundCertificate {
    pub y0_vl: f64,
    pub y0_l: f64,
    pub y0_u: f64,
    pub bp_iterations: usize,
    pub apg_total_iterations: usize,
    /// 1: closed after a Feasible verdict; 2: closed after an Infeasible one; 3: stalled bound.
    pub term_code: u8,
    pub wall_time: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BpProgress {
    pub iteration: usize,
    pub y0_m: f64,
    pub verdict: Verdict,
    pub x_norm: f64,
    pub g: f64,
    pub apg_iterations: usize,
    pub y0_vl: f64,
    pub y0_l: f64,
    pub y0_u: f64,
}

/// Bisection on `y0` with APGR membership tests of `G(y0)`; returns the best certified bound.
pub fn bp_solve(
    cop: &DnnCop,
    y0_u: f64,
    params: &BpParams,
    mut progress: impl FnMut(&BpProgress),
) -> Result<BoundCertificate> {
    params.apg.validate()?;
    if !y0_u.is_finite() || !(params.tol > 0.0) {
        return Err(Error::InvalidParameter("need a finite upper bound and tol > 0".into()));
    }
    let start = Instant::now();
    let s = if params.scale_objective { cop.f0.norm().min(y0_u.abs()).max(1.0) } else { 1.0 };
    let f0 = {
        let mut f = cop.f0.clone();
        f.scale(1.0 / s);
        f
    };
    let g_at = |y: f64| BlockSymMatrix::lincomb(1.0, &f0, -y, &cop.h0);

    // Scaled bracket.
    let mut yu = y0_u / s;
    let mut yl = f64::NEG_INFINITY;
    let mut ym = yu;
    let mut y1_hat = project_psd_product(&g_at(ym))?;
    let mut vl = f64::NEG_INFINITY;
    let mut best: Option<(f64, BlockSymMatrix, f64)> = None;
    let mut apg_total = 0;
    let mut last_verdict = Verdict::Undecided;
    let mut small_gains = 0;
    let mut term_code = 0;
    let mut iters = 0;
    let mut expanded = false;
    let closed = |yl: f64, yu: f64| (yu - yl) * s <= params.tol * (s * yu).abs().max(1.0);

    while !closed(yl, yu) && iters < params.max_iterations {
        iters += 1;
        let g = g_at(ym);
        let init = if params.warm_start { y1_hat.clone() } else { project_psd_product(&g)? };
        let out = apgr_feasibility(&g, &init, &cop.k2, &params.apg)?;
        apg_total += out.iterations;
        let mu = lambda_min_shift(&g.sub(&out.y2))?.min(0.0);
        let cand = ym + cop.rho * mu;
        if cand > vl {
            let gain = (cand - vl) * s;
            small_gains = if vl.is_finite() && gain < params.tol * (1.0 + (s * cand).abs()) {
                small_gains + 1
            } else {
                0
            };
            vl = cand;
            best = Some((ym, out.y2.clone(), mu));
        }
        last_verdict = out.verdict;
        if out.verdict == Verdict::Feasible {
            if iters == 1 && !expanded {
                if let Some(e) = params.expand {
                    expanded = true;
                    yu += e * yu.abs().max(1.0 / s);
                    ym = yu;
                    y1_hat = out.y1;
                    continue;
                }
            }
            yl = ym;
        } else if (ym - cand) * s <= params.tol * (s * ym).abs().max(1.0) {
            // The certificate already pins y0* to within tol below y0_m, so
            // the Infeasible verdict is a stopping artifact of g < delta.
            yl = yl.max(vl);
        } else {
            yu = ym;
            yl = yl.max(vl);
        }
        y1_hat = out.y1;
        progress(&BpProgress {
            iteration: iters,
            y0_m: ym * s,
            verdict: out.verdict,
            x_norm: out.x_norm,
            g: out.final_g,
            apg_iterations: out.iterations,
            y0_vl: vl * s,
            y0_l: yl * s,
            y0_u: yu * s,
        });
        ym = 0.5 * (yl + yu);
        if small_gains >= 2 {
            term_code = 3;
            break;
        }
    }
    if term_code == 0 {
        term_code = if last_verdict == Verdict::Feasible { 1 } else { 2 };
    }
    let witness = best.map(|(y, mut y2, mu)| {
        y2.scale(s);
        Witness { y0: y * s, y2, mu: mu * s }
    });
    Ok(BoundCertificate {
        y0_vl: vl * s,
        y0_l: yl * s,
        y0_u: yu * s,
        bp_iterations: iters,
        apg_total_iterations: apg_total,
        term_code,
        wall_time: start.elapsed().as_secs_f64(),
        witness,
    })
}

/// Relaxation plus certificate for one instance.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub cop: DnnCop,
    pub certificate: BoundCertificate,
    /// Objective value of the heuristic feasible point used as the initial upper bound.
    pub upper_bound: f64,
}

/// Assembles the relaxation and runs the bisection from a heuristic upper bound.
pub fn solve_pop(
    pop: &PopInstance,
    opts: &AssembleOptions,
    params: &BpParams,
    progress: impl FnMut(&BpProgress),
) -> Result<SolveOutcome> {
    let cop = assemble(pop, opts)?;
    let (_, upper) = heuristic_upper_bound(pop);
    let certificate = bp_solve(&cop, upper, params, progress)?;
    Ok(SolveOutcome { cop, certificate, upper_bound: upper })
}
