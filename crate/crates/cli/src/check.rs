//! Self-checks on a single instance: lifting, membership and projection optimality.

use dnnbound::cones::{lambda_min_shift, project_dual, project_k2, project_psd_product, BlockSymMatrix, Cone};
use dnnbound::instances::PopInstance;
use dnnbound::relaxation::{assemble, AssembleOptions};
use dnnbound::rng::SeededRng;
use dnnbound::Result;

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn result(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult { name, pass: worst <= tol, detail: format!("worst {worst:.3e} (tol {tol:.0e})") }
}

/// Random point of the feasible set: binaries in {0,1}, boxes uniform, then
/// one variable of each violated complementarity set zeroed.
fn feasible_point(pop: &PopInstance, rng: &mut SeededRng) -> Vec<f64> {
    let n = pop.n();
    let mut x: Vec<f64> = (0..n)
        .map(|i| if pop.partition.is_binary(i) { (rng.uniform() < 0.5) as u8 as f64 } else { rng.uniform() })
        .collect();
    for set in pop.comp.sets() {
        if set.iter().all(|&i| x[i] != 0.0) {
            x[set[rng.index(set.len())]] = 0.0;
        }
    }
    x
}

fn random_sym(sizes: &[usize], rng: &mut SeededRng) -> BlockSymMatrix {
    let rows = sizes
        .iter()
        .map(|&m| {
            let mut b = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in 0..=i {
                    let v = rng.uniform_in(-1.0, 1.0);
                    b[i][j] = v;
                    b[j][i] = v;
                }
            }
            b
        })
        .collect::<Vec<_>>();
    BlockSymMatrix::from_rows(&rows)
}

pub fn run(pop: &PopInstance, opts: &AssembleOptions, samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let cop = assemble(pop, opts)?;
    let mut rng = SeededRng::new(seed);
    let sizes = cop.block_sizes();

    let mut lift: f64 = 0.0;
    let mut norm: f64 = 0.0;
    let mut psd: f64 = 0.0;
    let mut k2: f64 = 0.0;
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = feasible_point(pop, &mut rng);
        let z = cop.moment_tuple(&x);
        let f = pop.f0.eval(&x);
        lift = lift.max((cop.f0.inner(&z) - f).abs() / (1.0 + f.abs()));
        norm = norm.max((cop.h0.inner(&z) - 1.0).abs());
        psd = psd.max(-lambda_min_shift(&z)?);
        k2 = k2.max(cop.k2.violation(&z));
        points.push(z);
    }

    let mut idem: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    let mut obtuse: f64 = 0.0;
    let mut moreau: f64 = 0.0;
    let mut inside: f64 = 0.0;
    let mut projected = Vec::with_capacity(samples);
    for _ in 0..samples {
        let z = random_sym(&sizes, &mut rng);
        let p = project_k2(&z, &cop.k2)?;
        inside = inside.max(cop.k2.violation(&p));
        idem = idem.max(project_k2(&p, &cop.k2)?.sub(&p).max_abs());
        let r = z.sub(&p);
        ortho = ortho.max(r.inner(&p).abs());
        let d = project_dual(&z.neg(), Cone::K2, &cop.k2)?;
        moreau = moreau.max(z.sub(&p.sub(&d)).max_abs());
        let k1 = project_psd_product(&z)?;
        let d1 = project_dual(&z.neg(), Cone::K1, &cop.k2)?;
        moreau = moreau.max(z.sub(&k1.sub(&d1)).max_abs());
        projected.push((z, p));
    }
    // Every feasible moment tuple and every projection lies in K2.
    for (z, p) in &projected {
        let r = z.sub(p);
        for q in points.iter().chain(projected.iter().map(|(_, p)| p)) {
            obtuse = obtuse.max(r.inner(&q.sub(p)));
        }
    }

    Ok(vec![
        result("lifting identity", lift, 1e-9),
        result("normalization <H0, Z> = 1", norm, 1e-12),
        result("moment tuple in K1", psd, 1e-9),
        result("moment tuple in K2", k2, 1e-12),
        result("Pi_K2 lands in K2", inside, 1e-10),
        result("Pi_K2 idempotent", idem, 1e-10),
        result("Pi_K2 orthogonality", ortho, 1e-9),
        result("Pi_K2 obtuse angle", obtuse, 1e-9),
        result("Moreau decomposition", moreau, 1e-10),
    ])
}
