mod common;

use common::{ev, random_pop};
use dnnbound::cones::lambda_min_shift;
use dnnbound::instances::PopInstance;
use dnnbound::polyalg::{
    canonicalize_objective, reduce_exponent, ComplementarityFamily, ExponentVec, IndexPartition, Polynomial,
};
use dnnbound::relaxation::{assemble, AssembleOptions, RhoMode};
use dnnbound::rng::SeededRng;
use dnnbound::sparsity::{
    arrow_cliques, build_pattern, chordal_extend_and_cliques, chordal_extension, chordal_random_pattern,
    SparsityPattern,
};
use proptest::prelude::*;

fn small_example() -> PopInstance {
    let f = Polynomial::from_terms(3, [(ev(&[1, 1, 0]), -1.0), (ev(&[0, 1, 1]), -1.0)]).unwrap();
    PopInstance::new(
        f,
        IndexPartition::new(3, &[1, 2], &[0]).unwrap(),
        ComplementarityFamily::new(3, vec![vec![0, 1]]).unwrap(),
    )
    .unwrap()
}

fn block(cop: &dnnbound::relaxation::DnnCop, k: usize) -> Vec<Vec<f64>> {
    cop.f0.to_rows()[k].clone()
}

#[test]
fn three_variable_example_dense() {
    let pop = small_example();
    let cop = assemble(&pop, &AssembleOptions { dense: true, ..Default::default() }).unwrap();
    assert_eq!(cop.bases.len(), 1);
    assert_eq!(cop.bases[0].elems, vec![ev(&[0, 0, 0]), ev(&[1, 0, 0]), ev(&[0, 1, 0]), ev(&[0, 0, 1])]);
    // -x1x2 sits at (e1, e2) and -x2x3 at (e2, e3).
    let want = vec![
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, -0.5, 0.0],
        vec![0.0, -0.5, 0.0, -0.5],
        vec![0.0, 0.0, -0.5, 0.0],
    ];
    assert_eq!(block(&cop, 0), want);
    assert_eq!(cop.h0.to_rows()[0][0][0], 1.0);
}

#[test]
fn three_variable_example_sparse() {
    let pop = small_example();
    let r = build_pattern(&pop.f0, &pop.comp);
    assert_eq!(r.to_dense(), vec![vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]]);
    let cop = assemble(&pop, &AssembleOptions::default()).unwrap();
    assert_eq!(cop.cover.cliques, vec![vec![0, 1], vec![1, 2]]);
    assert_eq!(cop.bases[0].elems, vec![ev(&[0, 0, 0]), ev(&[1, 0, 0]), ev(&[0, 1, 0])]);
    assert_eq!(cop.bases[1].elems, vec![ev(&[0, 0, 0]), ev(&[0, 1, 0]), ev(&[0, 0, 1])]);
    let want = vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, -0.5], vec![0.0, -0.5, 0.0]];
    assert_eq!(block(&cop, 0), want);
    assert_eq!(block(&cop, 1), want);
    assert_eq!(cop.block_sizes(), vec![3, 3]);
    assert_eq!(cop.h0.to_rows()[0][0][0], 0.5);
    assert_eq!(cop.h0.to_rows()[1][0][0], 0.5);
    assert_eq!(cop.rho, 6.0);

    // (e1, e2) in the first block is fixed at zero by x1 x2 = 0; the x2 entries
    // of both blocks share one class.
    let c = |k: usize, i: usize, j: usize| cop.k2.class_of[k][j * 3 + i] as usize;
    assert!(cop.k2.zero[c(0, 1, 2)]);
    assert_eq!(c(0, 2, 2), c(1, 1, 1));
    assert_eq!(c(0, 0, 2), c(1, 1, 1));
    assert_eq!(c(1, 0, 1), c(0, 2, 2));
}

#[test]
fn arrow_sizes() {
    assert_eq!(arrow_cliques(10, 2, 2, 160).unwrap().n, 1284);
    let c = arrow_cliques(5, 2, 2, 3).unwrap();
    assert_eq!(c.n, 13);
    assert_eq!(c.cliques.len(), 3);
}

fn random_partition(n: usize, rng: &mut SeededRng) -> IndexPartition {
    let (bin, bx): (Vec<usize>, Vec<usize>) = (0..n).partition(|_| rng.uniform() < 0.5);
    IndexPartition::new(n, &bin, &bx).unwrap()
}

fn random_point(part: &IndexPartition, rng: &mut SeededRng) -> Vec<f64> {
    (0..part.n())
        .map(|i| if part.is_binary(i) { (rng.uniform() < 0.5) as u8 as f64 } else { rng.uniform() })
        .collect()
}

/// Simplicial-vertex elimination: succeeds exactly on chordal graphs.
fn is_chordal(p: &SparsityPattern) -> bool {
    let n = p.n();
    let mut alive = vec![true; n];
    for _ in 0..n {
        let simplicial = (0..n).find(|&v| {
            alive[v] && {
                let nb: Vec<usize> = p.neighbors(v).iter().copied().filter(|&u| u != v && alive[u]).collect();
                nb.iter().all(|&a| nb.iter().all(|&b| a == b || p.is_set(a, b)))
            }
        });
        match simplicial {
            Some(v) => alive[v] = false,
            None => return false,
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduce_is_idempotent(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let n = 1 + rng.index(6);
        let part = random_partition(n, &mut rng);
        let a = ExponentVec::new((0..n).map(|_| rng.index(5) as u32).collect());
        let r = reduce_exponent(&a, &part).unwrap();
        prop_assert_eq!(reduce_exponent(&r, &part).unwrap(), r);
    }

    #[test]
    fn canonicalization_preserves_values(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let n = 1 + rng.index(5);
        let part = random_partition(n, &mut rng);
        let terms: Vec<(ExponentVec, f64)> = (0..1 + rng.index(8))
            .map(|_| (ExponentVec::new((0..n).map(|_| rng.index(4) as u32).collect()), rng.uniform_in(-1.0, 1.0)))
            .collect();
        let f = Polynomial::from_terms(n, terms).unwrap();
        let g = canonicalize_objective(&f, &part).unwrap();
        prop_assert_eq!(canonicalize_objective(&g, &part).unwrap(), g.clone());
        for _ in 0..10 {
            let x = random_point(&part, &mut rng);
            let (a, b) = (f.eval(&x), g.eval(&x));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn cliques_cover_the_pattern_and_extension_is_chordal(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let n = 2 + rng.index(14);
        let p = chordal_random_pattern(n, rng.uniform_in(0.1, 0.7), seed).unwrap();
        let cover = chordal_extend_and_cliques(&p);
        prop_assert!(cover.covers(&p));
        prop_assert!(cover.len() <= n);
        prop_assert!(is_chordal(&chordal_extension(&p)));
        for (a, c) in cover.cliques.iter().enumerate() {
            for (b, d) in cover.cliques.iter().enumerate() {
                prop_assert!(a == b || !c.iter().all(|v| d.contains(v)), "clique {a} inside {b}");
            }
        }
    }

    #[test]
    fn lifting_identity_and_membership(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let n = 2 + rng.index(5);
        let d = 2 + rng.index(2) as u32;
        let pop = random_pop(n, d, rng.uniform() < 0.5, rng.index(n + 1), seed);
        let opts = AssembleOptions { dense: rng.uniform() < 0.3, rho: RhoMode::Trivial, ..Default::default() };
        let cop = assemble(&pop, &opts).unwrap();
        for _ in 0..10 {
            let mut x = random_point(&pop.partition, &mut rng);
            for s in pop.comp.sets() {
                if s.iter().all(|&i| x[i] != 0.0) {
                    x[s[0]] = 0.0;
                }
            }
            let z = cop.moment_tuple(&x);
            let f = pop.f0.eval(&x);
            prop_assert!((cop.f0.inner(&z) - f).abs() <= 1e-10 * (1.0 + f.abs()));
            prop_assert_eq!(cop.h0.inner(&z), 1.0);
            prop_assert!(cop.k2.violation(&z) <= 1e-12);
            prop_assert!(lambda_min_shift(&z).unwrap() >= -1e-10);
        }
    }
}
