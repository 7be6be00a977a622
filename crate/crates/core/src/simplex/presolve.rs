//! Removes rows that pin all their columns to zero, empty rows, rows that
//! can never bind, and columns left without rows. Postsolve rebuilds a dual
//! (or Farkas) vector that is feasible for the original problem.

use std::collections::VecDeque;

use super::{LpProblem, RowSense};

pub(super) enum Presolve {
    Reduced(Reduced),
    Infeasible { farkas: Vec<f64> },
}

#[derive(Debug)]
enum Removal {
    /// Zero-rhs row whose remaining coefficients share a sign; all of
    /// `cols` are fixed at zero.
    Forcing { row: usize, cols: Vec<usize> },
    /// Empty or never-binding row; its dual is zero.
    Dropped,
}

pub(super) struct Reduced {
    pub(super) problem: LpProblem,
    row_map: Vec<usize>,
    col_map: Vec<usize>,
    num_rows: usize,
    num_cols: usize,
    removals: Vec<Removal>,
}

pub(super) fn presolve(lp: &LpProblem, tol: f64) -> Presolve {
    let m = lp.num_rows();
    let n = lp.num_cols();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for j in 0..n {
        let (idx, val) = lp.column(j);
        for (&r, &v) in idx.iter().zip(val) {
            rows[r].push((j, v));
        }
    }
    let mut row_alive = vec![true; m];
    let mut col_alive = vec![true; n];
    let mut queued = vec![true; m];
    let mut queue: VecDeque<usize> = (0..m).collect();
    let mut removals = Vec::new();

    while let Some(r) = queue.pop_front() {
        queued[r] = false;
        if !row_alive[r] {
            continue;
        }
        let live: Vec<(usize, f64)> = rows[r]
            .iter()
            .copied()
            .filter(|&(j, _)| col_alive[j])
            .collect();
        let rhs = lp.rhs()[r];
        let sense = lp.senses()[r];
        if live.is_empty() {
            let consistent = match sense {
                RowSense::Eq => rhs.abs() <= tol,
                RowSense::Le => rhs >= -tol,
            };
            if !consistent {
                let mut y = vec![0.0; m];
                y[r] = match sense {
                    RowSense::Eq => rhs.signum(),
                    RowSense::Le => -1.0,
                };
                reconstruct(lp, &mut y, &removals, false);
                return Presolve::Infeasible { farkas: y };
            }
            row_alive[r] = false;
            removals.push(Removal::Dropped);
            continue;
        }
        let all_pos = live.iter().all(|&(_, v)| v > 0.0);
        let all_neg = live.iter().all(|&(_, v)| v < 0.0);
        if rhs == 0.0 && (all_pos || (sense == RowSense::Eq && all_neg)) {
            row_alive[r] = false;
            let cols: Vec<usize> = live.iter().map(|&(j, _)| j).collect();
            for &j in &cols {
                col_alive[j] = false;
                let (idx, _) = lp.column(j);
                for &i in idx {
                    if row_alive[i] && !queued[i] {
                        queued[i] = true;
                        queue.push_back(i);
                    }
                }
            }
            removals.push(Removal::Forcing { row: r, cols });
            continue;
        }
        if sense == RowSense::Le && rhs >= 0.0 && live.iter().all(|&(_, v)| v <= 0.0) {
            row_alive[r] = false;
            removals.push(Removal::Dropped);
        }
    }

    // Columns without live rows and with nonnegative cost sit at zero.
    for j in 0..n {
        if col_alive[j] && lp.objective()[j] >= 0.0 {
            let (idx, _) = lp.column(j);
            if idx.iter().all(|&i| !row_alive[i]) {
                col_alive[j] = false;
            }
        }
    }

    let row_map: Vec<usize> = (0..m).filter(|&i| row_alive[i]).collect();
    let col_map: Vec<usize> = (0..n).filter(|&j| col_alive[j]).collect();
    let mut new_row = vec![usize::MAX; m];
    for (k, &i) in row_map.iter().enumerate() {
        new_row[i] = k;
    }
    let mut problem = LpProblem::with_rows(
        row_map.iter().map(|&i| lp.senses()[i]).collect(),
        row_map.iter().map(|&i| lp.rhs()[i]).collect(),
    );
    for &j in &col_map {
        let (idx, val) = lp.column(j);
        let entries = idx
            .iter()
            .zip(val)
            .filter(|(&i, _)| row_alive[i])
            .map(|(&i, &v)| (new_row[i], v));
        problem.add_column(lp.objective()[j], entries);
    }
    Presolve::Reduced(Reduced {
        problem,
        row_map,
        col_map,
        num_rows: m,
        num_cols: n,
        removals,
    })
}

impl Reduced {
    pub(super) fn expand_primal(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_cols];
        for (k, &j) in self.col_map.iter().enumerate() {
            full[j] = x[k];
        }
        full
    }

    /// Lifts a reduced dual vector (or Farkas ray, when `with_costs` is
    /// false) back to the original rows.
    pub(super) fn expand_duals(&self, lp: &LpProblem, y: &[f64], with_costs: bool) -> Vec<f64> {
        let mut full = vec![0.0; self.num_rows];
        for (k, &i) in self.row_map.iter().enumerate() {
            full[i] = y[k];
        }
        reconstruct(lp, &mut full, &self.removals, with_costs);
        full
    }
}

/// Assigns duals to forcing rows in reverse removal order so that every
/// column they fixed keeps a nonnegative reduced cost (`c_j - A_j'y >= 0`,
/// or `-A_j'y >= 0` for a Farkas ray). Each row gets the value closest to
/// zero-cost slack, i.e. the largest admissible dual.
fn reconstruct(lp: &LpProblem, y: &mut [f64], removals: &[Removal], with_costs: bool) {
    for removal in removals.iter().rev() {
        let Removal::Forcing { row, cols } = removal else {
            continue;
        };
        let row = *row;
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        for &j in cols {
            let (idx, val) = lp.column(j);
            let mut slack = if with_costs { lp.objective()[j] } else { 0.0 };
            let mut a_r = 0.0;
            for (&i, &v) in idx.iter().zip(val) {
                if i == row {
                    a_r += v;
                } else {
                    slack -= v * y[i];
                }
            }
            if a_r > 0.0 {
                upper = upper.min(slack / a_r);
            } else if a_r < 0.0 {
                lower = lower.max(slack / a_r);
            }
        }
        y[row] = if upper.is_finite() {
            match lp.senses()[row] {
                RowSense::Le => upper.min(0.0),
                RowSense::Eq => upper,
            }
        } else if lower.is_finite() {
            lower
        } else {
            0.0
        };
    }
}
