#![allow(dead_code)]

//! Independent oracles shared by the integration suites.

use freightcon::simplex::{LpProblem, LpStatus, RowSense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense `min c'x, Ax {=,<=} b, x >= 0` used by the vertex oracle.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub senses: Vec<RowSense>,
    pub c: Vec<f64>,
}

impl DenseLp {
    pub fn to_problem(&self) -> LpProblem {
        let mut trips = Vec::new();
        for (i, row) in self.a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trips.push((i, j, v));
                }
            }
        }
        LpProblem::from_triplets(self.senses.clone(), self.b.clone(), self.c.clone(), &trips)
            .unwrap()
    }

    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=6);
        let mut v = || rng.random_range(-5..=5) as f64;
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| v()).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| v()).collect();
        let c: Vec<f64> = (0..n).map(|_| v()).collect();
        let senses = (0..m)
            .map(|_| {
                if rng.random_bool(0.3) {
                    RowSense::Eq
                } else {
                    RowSense::Le
                }
            })
            .collect();
        DenseLp { a, b, senses, c }
    }

    pub fn random_seeded(seed: u64) -> Self {
        Self::random(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-9 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimizes `obj` over the vertices of `{x >= 0 : rows}` where rows are
/// `(coeffs, sense, rhs)`. Returns `None` when there is no vertex.
fn min_over_vertices(rows: &[(Vec<f64>, RowSense, f64)], n: usize, obj: &[f64]) -> Option<f64> {
    // Candidate tight constraints: every row, then every bound x_j = 0.
    let total = rows.len() + n;
    let mut best: Option<f64> = None;
    combinations(total, n, |pick| {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for &t in pick {
            if t < rows.len() {
                a.push(rows[t].0.clone());
                b.push(rows[t].2);
            } else {
                let mut e = vec![0.0; n];
                e[t - rows.len()] = 1.0;
                a.push(e);
                b.push(0.0);
            }
        }
        let Some(x) = solve_dense(a, b) else { return };
        if x.iter().any(|&v| v < -1e-9) {
            return;
        }
        for (coef, sense, rhs) in rows {
            let act: f64 = coef.iter().zip(&x).map(|(a, x)| a * x).sum();
            let ok = match sense {
                RowSense::Eq => (act - rhs).abs() <= 1e-9,
                RowSense::Le => act <= rhs + 1e-9,
            };
            if !ok {
                return;
            }
        }
        let val: f64 = obj.iter().zip(&x).map(|(c, x)| c * x).sum();
        best = Some(best.map_or(val, |b: f64| b.min(val)));
    });
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleResult {
    Infeasible,
    Unbounded,
    Optimal(f64),
}

impl OracleResult {
    pub fn status(&self) -> LpStatus {
        match self {
            OracleResult::Infeasible => LpStatus::Infeasible,
            OracleResult::Unbounded => LpStatus::Unbounded,
            OracleResult::Optimal(_) => LpStatus::Optimal,
        }
    }
}

/// Exhaustive vertex enumeration. A nonempty polyhedron in the nonnegative
/// orthant always has a vertex; unboundedness is decided on the normalized
/// recession cone `{d >= 0, A d (=,<=) 0, sum d = 1}`.
pub fn vertex_oracle(lp: &DenseLp) -> OracleResult {
    let n = lp.c.len();
    let rows: Vec<(Vec<f64>, RowSense, f64)> =
        lp.a.iter()
            .zip(&lp.senses)
            .zip(&lp.b)
            .map(|((a, s), b)| (a.clone(), *s, *b))
            .collect();
    let Some(best) = min_over_vertices(&rows, n, &lp.c) else {
        return OracleResult::Infeasible;
    };
    let mut cone: Vec<(Vec<f64>, RowSense, f64)> =
        rows.iter().map(|(a, s, _)| (a.clone(), *s, 0.0)).collect();
    cone.push((vec![1.0; n], RowSense::Eq, 1.0));
    if let Some(dir) = min_over_vertices(&cone, n, &lp.c) {
        if dir < -1e-9 {
            return OracleResult::Unbounded;
        }
    }
    OracleResult::Optimal(best)
}
