#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symred::{ConicProblem, Partition, Sense, SymMatrix};

/// Resolves against the core crate from any package in the workspace.
pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(rel)
}

/// Orbital partition of the Frobenius group `Z7 ⋊ Z3` acting on itself,
/// symmetrized: the cell `(g, h)` is labeled by `{g⁻¹h, h⁻¹g}`. Its algebra
/// has no real block-diagonalization with the minimal number of blocks
/// because two of the irreducible characters are complex.
pub fn frobenius21() -> Partition {
    let pw = [1usize, 2, 4];
    let mul = |x: (usize, usize), y: (usize, usize)| ((x.0 + pw[x.1] * y.0) % 7, (x.1 + y.1) % 3);
    let inv = |x: (usize, usize)| {
        let b = (3 - x.1) % 3;
        ((7 - (pw[b] * x.0) % 7) % 7, b)
    };
    let els: Vec<(usize, usize)> = (0..7).flat_map(|a| (0..3).map(move |b| (a, b))).collect();
    let idx = |x: (usize, usize)| x.0 * 3 + x.1;
    let mut labels = vec![0u32; 21 * 21];
    for (i, &g) in els.iter().enumerate() {
        for (j, &h) in els.iter().enumerate() {
            let s = mul(inv(g), h);
            labels[i * 21 + j] = idx(s).min(idx(inv(s))) as u32;
        }
    }
    Partition::from_labels(21, &labels).unwrap()
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(lo..=hi) as f64;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Averages a dense matrix over the cyclic group generated by `perm`.
fn symmetrize_under(m: &[Vec<f64>], perm: &[usize]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut power: Vec<usize> = (0..n).collect();
    let mut acc = vec![vec![0.0; n]; n];
    let mut order = 0;
    loop {
        for i in 0..n {
            for j in 0..n {
                acc[power[i]][power[j]] += m[i][j];
            }
        }
        order += 1;
        power = power.iter().map(|&k| perm[k]).collect();
        if power.iter().enumerate().all(|(i, &k)| i == k) {
            break;
        }
    }
    for row in acc.iter_mut() {
        for v in row.iter_mut() {
            *v /= order as f64;
        }
    }
    acc
}

fn to_sym(m: &[Vec<f64>]) -> SymMatrix {
    let n = m.len();
    let mut trip = Vec::new();
    for i in 0..n {
        for j in i..n {
            if m[i][j] != 0.0 {
                trip.push((i, j, m[i][j]));
            }
        }
    }
    SymMatrix::from_triplets(n, &trip).unwrap()
}

/// A random DNN problem with `n ≤ 6` and `m ≤ 4` rows, bounded through a
/// trace row and strictly feasible at a known interior point. Every other
/// seed makes the data invariant under a random permutation so that the
/// reduction is nontrivial.
pub fn random_dnn_problem(seed: u64) -> ConicProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=6);
    let m = rng.gen_range(1..=4);
    let mut perm: Vec<usize> = (0..n).collect();
    if seed % 2 == 1 {
        perm.rotate_left(1);
        if n > 3 && rng.gen_bool(0.5) {
            perm.swap(0, 1);
        }
    }
    let sym = |a: Vec<Vec<f64>>| symmetrize_under(&a, &perm);
    // interior point: diagonally dominant with positive entries
    let mut x = random_sym(n, &mut rng, 1, 3);
    for (i, row) in x.iter_mut().enumerate() {
        row[i] += 3.0 * n as f64;
    }
    let x = sym(x);
    let c = sym(random_sym(n, &mut rng, -4, 4));
    let mut rows = vec![(0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>())
        .collect::<Vec<_>>()];
    for _ in 1..m {
        rows.push(sym(random_sym(n, &mut rng, -2, 2)));
    }
    let b = rows
        .iter()
        .map(|a| (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[i][j] * x[i][j]).sum())
        .collect();
    ConicProblem::new(n, Sense::Min, to_sym(&c), rows.iter().map(|a| to_sym(a)).collect(), b).unwrap()
}

/// Characteristic matrices of the spanning parts as exact integer arrays.
fn characteristic_ints(p: &Partition) -> Vec<Vec<i64>> {
    let n = p.n();
    (0..p.n_parts())
        .filter(|&k| p.null_part() != Some(k))
        .map(|k| {
            (0..n * n)
                .map(|idx| i64::from(p.label(idx / n, idx % n) == k))
                .collect()
        })
        .collect()
}

/// Exact check that `B_a B_b + B_b B_a` lies in the span: constant on every
/// part and zero on the null part.
pub fn jordan_closed_exact(p: &Partition) -> bool {
    let n = p.n();
    let bs = characteristic_ints(p);
    for a in 0..bs.len() {
        for b in a..bs.len() {
            let mut prod = vec![0i64; n * n];
            for i in 0..n {
                for k in 0..n {
                    let (x, y) = (bs[a][i * n + k], bs[b][i * n + k]);
                    if x == 0 && y == 0 {
                        continue;
                    }
                    for j in 0..n {
                        prod[i * n + j] += x * bs[b][k * n + j] + y * bs[a][k * n + j];
                    }
                }
            }
            let mut value: Vec<Option<i64>> = vec![None; p.n_parts()];
            if let Some(z) = p.null_part() {
                value[z] = Some(0);
            }
            for i in 0..n {
                for j in 0..n {
                    let l = p.label(i, j);
                    match value[l] {
                        None => value[l] = Some(prod[i * n + j]),
                        Some(v) if v != prod[i * n + j] => return false,
                        _ => {}
                    }
                }
            }
        }
    }
    true
}

/// True when the two label matrices agree up to a bijective renaming.
pub fn same_up_to_renaming(n: usize, a: impl Fn(usize, usize) -> usize, b: impl Fn(usize, usize) -> usize) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a(i, j), b(i, j));
            if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
                return false;
            }
        }
    }
    true
}
