//! Basis factorization: a sparse LU that peels triangular parts off the
//! basis and factors only the remaining nucleus densely, plus a product-form
//! eta file between refactorizations.

/// `P A = L U`, stored row-major in one buffer (unit diagonal of `L` implied).
#[derive(Clone, Debug)]
pub(crate) struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    /// `perm[i]` is the row of `A` that ended up in position `i`.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix. Fails with the elimination step
    /// whose best pivot is below `pivot_tol`.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize, pivot_tol: f64) -> Result<Self, (usize, f64)> {
        debug_assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_abs = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if best_abs < pivot_tol {
                return Err((k, best_abs));
            }
            if best != k {
                for j in 0..n {
                    a.swap(k * n + j, best * n + j);
                }
                perm.swap(k, best);
            }
            let pivot = a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n..(k + 1) * n];
            for row in bottom.chunks_exact_mut(n) {
                let factor = row[k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                row[k] = factor;
                for j in k + 1..n {
                    row[j] -= factor * pivot_row[j];
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(u, v)| u * v)
                .sum();
            x[i] = (x[i] - s) / row[i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `A' x = b` in place.
    pub(crate) fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        let mut z = b.to_vec();
        // U' w = b
        for i in 0..n {
            let zi = z[i] / self.lu[i * n + i];
            z[i] = zi;
            if zi != 0.0 {
                let row = &self.lu[i * n..(i + 1) * n];
                for j in i + 1..n {
                    z[j] -= row[j] * zi;
                }
            }
        }
        // L' v = w
        for i in (0..n).rev() {
            let zi = z[i];
            if zi != 0.0 {
                let row = &self.lu[i * n..i * n + i];
                for (j, l) in row.iter().enumerate() {
                    z[j] -= l * zi;
                }
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = z[i];
        }
    }
}

/// Sparse LU for bases that are mostly triangular.
///
/// Column singletons are peeled off first (`front`), then row singletons
/// (`back`); what remains is factored densely. With rows and columns ordered
/// `front, nucleus, reversed back` the basis is block upper triangular, so
/// both solves are substitutions around one small dense solve.
#[derive(Clone, Debug)]
pub(crate) struct SparseLu {
    m: usize,
    /// Basis columns by position.
    cols: Vec<Vec<(usize, f64)>>,
    /// `(row, position, pivot)` in discovery order.
    front: Vec<(usize, usize, f64)>,
    back: Vec<(usize, usize, f64)>,
    nucleus_rows: Vec<usize>,
    nucleus_cols: Vec<usize>,
    nucleus: Option<DenseLu>,
}

impl SparseLu {
    /// Factors the `m x m` basis whose columns are `cols`. Fails with the
    /// elimination step and pivot magnitude where the basis is found singular.
    pub(crate) fn factor(
        cols: Vec<Vec<(usize, f64)>>,
        m: usize,
        pivot_tol: f64,
    ) -> Result<Self, (usize, f64)> {
        debug_assert_eq!(cols.len(), m);
        let cols: Vec<Vec<(usize, f64)>> = cols
            .into_iter()
            .map(|c| c.into_iter().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, col) in cols.iter().enumerate() {
            for &(i, _) in col {
                row_cols[i].push(k);
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut front = Vec::new();
        let mut back = Vec::new();

        let mut col_count: Vec<usize> = cols.iter().map(Vec::len).collect();
        if let Some(k) = col_count.iter().position(|&c| c == 0) {
            return Err((k, 0.0));
        }
        let mut queue: Vec<usize> = (0..m).filter(|&k| col_count[k] == 1).rev().collect();
        while let Some(k) = queue.pop() {
            if !col_active[k] || col_count[k] != 1 {
                continue;
            }
            let &(i, v) = cols[k]
                .iter()
                .find(|&&(i, _)| row_active[i])
                .expect("count matches");
            if v.abs() < pivot_tol {
                return Err((front.len(), v.abs()));
            }
            front.push((i, k, v));
            col_active[k] = false;
            row_active[i] = false;
            for &k2 in &row_cols[i] {
                if col_active[k2] {
                    col_count[k2] -= 1;
                    match col_count[k2] {
                        0 => return Err((front.len(), 0.0)),
                        1 => queue.push(k2),
                        _ => {}
                    }
                }
            }
        }

        let mut row_count: Vec<usize> = (0..m)
            .map(|i| {
                if row_active[i] {
                    row_cols[i].iter().filter(|&&k| col_active[k]).count()
                } else {
                    0
                }
            })
            .collect();
        let mut queue: Vec<usize> = (0..m)
            .filter(|&i| row_active[i] && row_count[i] == 1)
            .rev()
            .collect();
        while let Some(i) = queue.pop() {
            if !row_active[i] || row_count[i] != 1 {
                continue;
            }
            let k = *row_cols[i]
                .iter()
                .find(|&&k| col_active[k])
                .expect("count matches");
            let v = cols[k]
                .iter()
                .find(|&&(r, _)| r == i)
                .map_or(0.0, |&(_, v)| v);
            if v.abs() < pivot_tol {
                return Err((front.len() + back.len(), v.abs()));
            }
            back.push((i, k, v));
            row_active[i] = false;
            col_active[k] = false;
            for &(i2, _) in &cols[k] {
                if row_active[i2] {
                    row_count[i2] -= 1;
                    if row_count[i2] == 1 {
                        queue.push(i2);
                    }
                }
            }
        }

        let nucleus_rows: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
        let nucleus_cols: Vec<usize> = (0..m).filter(|&k| col_active[k]).collect();
        let r = nucleus_rows.len();
        debug_assert_eq!(r, nucleus_cols.len());
        let nucleus = if r == 0 {
            None
        } else {
            let mut local = vec![usize::MAX; m];
            for (a, &i) in nucleus_rows.iter().enumerate() {
                local[i] = a;
            }
            let mut dense = vec![0.0; r * r];
            for (b, &k) in nucleus_cols.iter().enumerate() {
                for &(i, v) in &cols[k] {
                    if local[i] != usize::MAX {
                        dense[local[i] * r + b] = v;
                    }
                }
            }
            let offset = front.len() + back.len();
            Some(DenseLu::factor(dense, r, pivot_tol).map_err(|(step, piv)| (offset + step, piv))?)
        };
        Ok(SparseLu {
            m,
            cols,
            front,
            back,
            nucleus_rows,
            nucleus_cols,
            nucleus,
        })
    }

    pub(crate) fn identity(m: usize) -> Self {
        Self::factor((0..m).map(|i| vec![(i, 1.0)]).collect(), m, 0.0).expect("identity is regular")
    }

    fn subtract_column(&self, k: usize, xk: f64, r: &mut [f64]) {
        if xk != 0.0 {
            for &(i, v) in &self.cols[k] {
                r[i] -= v * xk;
            }
        }
    }

    fn dot_column(&self, k: usize, y: &[f64]) -> f64 {
        self.cols[k].iter().map(|&(i, v)| v * y[i]).sum()
    }

    /// Solves `B x = b` in place: `b` is indexed by row on entry and `x` by
    /// basis position on exit.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let mut r = b.to_vec();
        let mut x = vec![0.0; self.m];
        for &(i, k, p) in &self.back {
            x[k] = r[i] / p;
            self.subtract_column(k, x[k], &mut r);
        }
        if let Some(lu) = &self.nucleus {
            let mut z: Vec<f64> = self.nucleus_rows.iter().map(|&i| r[i]).collect();
            lu.solve(&mut z);
            for (&k, &zk) in self.nucleus_cols.iter().zip(&z) {
                x[k] = zk;
                self.subtract_column(k, zk, &mut r);
            }
        }
        for &(i, k, p) in self.front.iter().rev() {
            x[k] = r[i] / p;
            self.subtract_column(k, x[k], &mut r);
        }
        b.copy_from_slice(&x);
    }

    /// Solves `B' y = c` in place: `c` is indexed by basis position on entry
    /// and `y` by row on exit.
    pub(crate) fn solve_transpose(&self, c: &mut [f64]) {
        let mut y = vec![0.0; self.m];
        for &(i, k, p) in &self.front {
            y[i] = (c[k] - self.dot_column(k, &y)) / p;
        }
        if let Some(lu) = &self.nucleus {
            let mut z: Vec<f64> = self
                .nucleus_cols
                .iter()
                .map(|&k| c[k] - self.dot_column(k, &y))
                .collect();
            lu.solve_transpose(&mut z);
            for (&i, &zi) in self.nucleus_rows.iter().zip(&z) {
                y[i] = zi;
            }
        }
        for &(i, k, p) in self.back.iter().rev() {
            y[i] = (c[k] - self.dot_column(k, &y)) / p;
        }
        c.copy_from_slice(&y);
    }
}

/// Elementary column transformation recorded at a pivot on `row` with
/// entering column `w = B^{-1} a_q`.
#[derive(Clone, Debug)]
struct Eta {
    row: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct BasisFactor {
    lu: SparseLu,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub(crate) fn new(lu: SparseLu) -> Self {
        BasisFactor {
            lu,
            etas: Vec::new(),
        }
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// `v <- B^{-1} v`.
    pub(crate) fn ftran(&self, v: &mut [f64]) {
        self.lu.solve(v);
        for eta in &self.etas {
            let vr = v[eta.row] / eta.pivot;
            v[eta.row] = vr;
            if vr != 0.0 {
                for &(i, w) in &eta.others {
                    v[i] -= w * vr;
                }
            }
        }
    }

    /// `v <- B^{-T} v`.
    pub(crate) fn btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.others.iter().map(|&(i, w)| w * v[i]).sum();
            v[eta.row] = (v[eta.row] - s) / eta.pivot;
        }
        self.lu.solve_transpose(v);
    }

    /// Records the basis change at `row` given the entering column `w`.
    pub(crate) fn update(&mut self, row: usize, w: &[f64]) {
        let others = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != row && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            row,
            pivot: w[row],
            others,
        });
    }
}
