#![allow(dead_code)]

use dnnbound::cones::BlockSymMatrix;
use dnnbound::instances::{gen_random_pop, PopInstance};
use dnnbound::polyalg::{dominates, ExponentVec, IndexPartition};
use dnnbound::relaxation::{K2Structure, MomentBasis};
use dnnbound::rng::SeededRng;
use dnnbound::sparsity::{chordal_extend_and_cliques, chordal_random_pattern};

pub fn ev(v: &[u32]) -> ExponentVec {
    ExponentVec::new(v.to_vec())
}

/// Random sparse POP on a unit-disk pattern with `comp` complementarity pairs.
pub fn random_pop(n: usize, d: u32, binary: bool, comp: usize, seed: u64) -> PopInstance {
    let cover = chordal_extend_and_cliques(&chordal_random_pattern(n, 0.6, seed).unwrap());
    let part = if binary { IndexPartition::all_binary(n) } else { IndexPartition::all_box(n) };
    gen_random_pop(&cover, d, &part, comp, seed).unwrap()
}

pub fn random_sym(sizes: &[usize], rng: &mut SeededRng, scale: f64) -> BlockSymMatrix {
    let rows: Vec<Vec<Vec<f64>>> = sizes
        .iter()
        .map(|&m| {
            let mut b = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in 0..=i {
                    let v = scale * rng.uniform_in(-1.0, 1.0);
                    b[i][j] = v;
                    b[j][i] = v;
                }
            }
            b
        })
        .collect();
    BlockSymMatrix::from_rows(&rows)
}

/// `W W^T` for a random `m x m` block `W`: a generic element of K1.
pub fn random_psd(sizes: &[usize], rng: &mut SeededRng) -> BlockSymMatrix {
    let rows: Vec<Vec<Vec<f64>>> = sizes
        .iter()
        .map(|&m| {
            let w: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
            (0..m)
                .map(|i| (0..m).map(|j| (0..m).map(|k| w[i][k] * w[j][k]).sum()).collect())
                .collect()
        })
        .collect();
    BlockSymMatrix::from_rows(&rows)
}

/// Synthetic K2 structure: one or two blocks whose symmetric entry pairs are
/// assigned to random classes, some fixed at zero, plus random order edges
/// forming chains and small trees among the free classes.
pub fn random_k2(rng: &mut SeededRng) -> K2Structure {
    let nblocks = 1 + rng.index(2);
    let sizes: Vec<usize> = (0..nblocks).map(|_| 2 + rng.index(3)).collect();
    let free = 3 + rng.index(10);
    let zeros = rng.index(3);
    let nc = free + zeros;
    let mut used = vec![false; nc];
    let mut class_of = Vec::new();
    for &m in &sizes {
        let mut ids = vec![0u32; m * m];
        for j in 0..m {
            for i in 0..=j {
                let c = rng.index(nc) as u32;
                used[c as usize] = true;
                ids[j * m + i] = c;
                ids[i * m + j] = c;
            }
        }
        class_of.push(ids);
    }
    // Unused class ids are remapped so every class has entries.
    let mut remap = vec![u32::MAX; nc];
    let mut next = 0;
    for c in 0..nc {
        if used[c] {
            remap[c] = next;
            next += 1;
        }
    }
    for ids in &mut class_of {
        for c in ids.iter_mut() {
            *c = remap[*c as usize];
        }
    }
    let nc = next as usize;
    let zero: Vec<bool> = (0..nc).map(|c| c >= nc.saturating_sub(zeros.min(nc - 1))).collect();
    let free: Vec<usize> = (0..nc).filter(|&c| !zero[c]).collect();
    let mut edges = Vec::new();
    let mut pool = free.clone();
    for t in 0..pool.len() {
        let s = t + rng.index(pool.len() - t);
        pool.swap(t, s);
    }
    // Up to three components: chains, or a root with two children.
    let mut at = 0;
    for _ in 0..3 {
        let len = 2 + rng.index(3);
        if at + len > pool.len() {
            break;
        }
        let part = &pool[at..at + len];
        if rng.uniform() < 0.5 {
            for w in part.windows(2) {
                edges.push((w[0], w[1]));
            }
        } else {
            for &c in &part[1..] {
                edges.push((part[0], c));
            }
        }
        at += len;
    }
    K2Structure::from_parts(class_of, zero, edges)
}

/// Projection onto K2 by the min-max formula for isotonic regression on the
/// order `parent >= child`, evaluated by enumerating upper and lower sets of
/// each component, then clamped at zero.
pub fn k2_oracle(z: &BlockSymMatrix, k2: &K2Structure) -> BlockSymMatrix {
    let nc = k2.zero.len();
    let mut sum = vec![0.0; nc];
    let mut wt = vec![0.0; nc];
    for (b, ids) in z.blocks.iter().zip(&k2.class_of) {
        let m = b.nrows();
        for j in 0..m {
            for i in 0..m {
                let c = ids[j * m + i] as usize;
                sum[c] += b[(i, j)];
                wt[c] += 1.0;
            }
        }
    }
    let mean: Vec<f64> = (0..nc).map(|c| if wt[c] > 0.0 { sum[c] / wt[c] } else { 0.0 }).collect();
    let mut val = vec![0.0; nc];

    // Components by union-find over the order edges.
    let mut parent: Vec<usize> = (0..nc).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for &(u, w) in &k2.chain_edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, w));
        parent[a] = b;
    }
    let mut comps: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for c in 0..nc {
        if !k2.zero[c] {
            let r = find(&mut parent, c);
            comps.entry(r).or_default().push(c);
        }
    }
    for nodes in comps.values() {
        let k = nodes.len();
        assert!(k <= 16, "oracle component too large");
        let local = |c: usize| nodes.iter().position(|&x| x == c);
        let edges: Vec<(usize, usize)> = k2
            .chain_edges
            .iter()
            .filter_map(|&(u, w)| Some((local(u)?, local(w)?)))
            .collect();
        // Upper set: contains every parent of a member. Lower set: every child.
        let is_upper = |s: u32| edges.iter().all(|&(p, c)| s & (1 << c) == 0 || s & (1 << p) != 0);
        let is_lower = |s: u32| edges.iter().all(|&(p, c)| s & (1 << p) == 0 || s & (1 << c) != 0);
        let uppers: Vec<u32> = (1..1u32 << k).filter(|&s| is_upper(s)).collect();
        let lowers: Vec<u32> = (1..1u32 << k).filter(|&s| is_lower(s)).collect();
        let avg = |s: u32| {
            let (mut a, mut w) = (0.0, 0.0);
            for (t, &c) in nodes.iter().enumerate() {
                if s & (1 << t) != 0 {
                    a += mean[c] * wt[c];
                    w += wt[c];
                }
            }
            a / w
        };
        for (t, &c) in nodes.iter().enumerate() {
            let bit = 1u32 << t;
            // Parents sit above children: upper sets are closed under taking
            // parents, and the value is the max over upper sets of the min over
            // lower sets.
            let v = uppers
                .iter()
                .filter(|&&u| u & bit != 0)
                .map(|&u| {
                    lowers
                        .iter()
                        .filter(|&&l| l & bit != 0)
                        .map(|&l| avg(u & l))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            val[c] = v.max(0.0);
        }
    }
    k2.expand(&val)
}

/// Exact max of the trace bound problem over complementarity-feasible 0/1 points.
pub fn rho_star(bases: &[MomentBasis], gamma: &[ExponentVec], n: usize) -> f64 {
    let filtered: Vec<Vec<&ExponentVec>> = bases
        .iter()
        .map(|b| b.elems.iter().filter(|a| !gamma.iter().any(|g| dominates(a, g))).collect())
        .collect();
    let mut best = 0usize;
    for mask in 0..1u32 << n {
        let x: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
        if gamma.iter().any(|g| g.eval(&x) != 0.0) {
            continue;
        }
        let count: usize = filtered.iter().map(|b| b.iter().filter(|a| a.eval(&x) == 1.0).count()).sum();
        best = best.max(count);
    }
    best as f64
}
