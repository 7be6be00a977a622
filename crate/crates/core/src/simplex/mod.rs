//! Two-phase revised simplex for `min c'x  s.t.  Ax {=,<=} b, x >= 0`.
//!
//! Every solve returns a certificate: primal and dual vectors at an optimum,
//! a Farkas ray when the rows are inconsistent, or a primal ray when the
//! objective is unbounded. [`verify_certificate`] re-checks any of them
//! against the original problem.
//!
//! Dual sign convention (minimization): `c - A'y >= 0` and `y_i <= 0` for
//! every `<=` row; equality duals are free. A Farkas ray `y` satisfies
//! `A'y <= 0`, `y_i <= 0` on `<=` rows and `b'y > 0`.

mod lu;
mod presolve;
mod revised;

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowSense {
    Eq,
    Le,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSense::Eq => f.write_str("="),
            RowSense::Le => f.write_str("<="),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical breakdown at iteration {iteration}: {detail}")]
    NumericalBreakdown { iteration: usize, detail: String },
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

/// Sparse LP in column-major storage. All columns are bounded below by zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    col_start: Vec<usize>,
    row_index: Vec<usize>,
    values: Vec<f64>,
    senses: Vec<RowSense>,
    rhs: Vec<f64>,
    objective: Vec<f64>,
}

impl LpProblem {
    /// An LP with the given rows and no columns yet.
    pub fn with_rows(senses: Vec<RowSense>, rhs: Vec<f64>) -> Self {
        assert_eq!(senses.len(), rhs.len(), "one rhs per row");
        LpProblem {
            col_start: vec![0],
            row_index: Vec::new(),
            values: Vec::new(),
            senses,
            rhs,
            objective: Vec::new(),
        }
    }

    /// Appends a column; entries with a zero coefficient are skipped and
    /// repeated row indices are summed.
    pub fn add_column<I>(&mut self, cost: f64, entries: I) -> usize
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut col: Vec<(usize, f64)> = entries.into_iter().collect();
        col.sort_by_key(|&(r, _)| r);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for (r, v) in col {
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            if v != 0.0 {
                self.row_index.push(r);
                self.values.push(v);
            }
        }
        self.col_start.push(self.row_index.len());
        self.objective.push(cost);
        self.objective.len() - 1
    }

    /// Builds a problem from `(row, col, value)` triplets.
    pub fn from_triplets(
        senses: Vec<RowSense>,
        rhs: Vec<f64>,
        objective: Vec<f64>,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LpError> {
        if senses.len() != rhs.len() {
            return Err(LpError::InvalidProblem(format!(
                "{} senses but {} rhs entries",
                senses.len(),
                rhs.len()
            )));
        }
        let n = objective.len();
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            if c >= n || r >= senses.len() {
                return Err(LpError::InvalidProblem(format!(
                    "triplet ({r}, {c}) outside {}x{n}",
                    senses.len()
                )));
            }
            per_col[c].push((r, v));
        }
        let mut lp = LpProblem::with_rows(senses, rhs);
        for (c, entries) in per_col.into_iter().enumerate() {
            lp.add_column(objective[c], entries);
        }
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_start[j]..self.col_start[j + 1];
        (&self.row_index[range.clone()], &self.values[range])
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn senses(&self) -> &[RowSense] {
        &self.senses
    }

    pub fn set_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] = value;
    }

    /// Returns a copy with extra rows appended, each given as
    /// `(sense, rhs, entries)`.
    pub fn with_appended_rows(&self, rows: &[(RowSense, f64, Vec<(usize, f64)>)]) -> LpProblem {
        let base = self.num_rows();
        let mut extra: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_cols()];
        for (k, (_, _, entries)) in rows.iter().enumerate() {
            for &(c, v) in entries {
                extra[c].push((base + k, v));
            }
        }
        let mut senses = self.senses.clone();
        let mut rhs = self.rhs.clone();
        for (s, b, _) in rows {
            senses.push(*s);
            rhs.push(*b);
        }
        let mut out = LpProblem::with_rows(senses, rhs);
        for j in 0..self.num_cols() {
            let (idx, val) = self.column(j);
            let entries = idx
                .iter()
                .copied()
                .zip(val.iter().copied())
                .chain(extra[j].iter().copied());
            out.add_column(self.objective[j], entries);
        }
        out
    }

    /// `Ax` for a column vector `x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, &xj) in x.iter().enumerate().take(self.num_cols()) {
            if xj == 0.0 {
                continue;
            }
            let (idx, val) = self.column(j);
            for (&r, &v) in idx.iter().zip(val) {
                act[r] += v * xj;
            }
        }
        act
    }

    /// `A'y` for a row vector `y`.
    pub fn column_activity(&self, y: &[f64]) -> Vec<f64> {
        (0..self.num_cols())
            .map(|j| {
                let (idx, val) = self.column(j);
                idx.iter().zip(val).map(|(&r, &v)| v * y[r]).sum()
            })
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let m = self.num_rows();
        if self.col_start.len() != self.objective.len() + 1 {
            return Err(LpError::InvalidProblem(
                "column pointer length mismatch".into(),
            ));
        }
        if let Some(r) = self.row_index.iter().find(|&&r| r >= m) {
            return Err(LpError::InvalidProblem(format!(
                "row index {r} out of range {m}"
            )));
        }
        let finite = |what: &str, v: &[f64]| {
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                Err(LpError::InvalidProblem(format!(
                    "non-finite {what} at {pos}"
                )))
            } else {
                Ok(())
            }
        };
        finite("coefficient", &self.values)?;
        finite("rhs", &self.rhs)?;
        finite("objective", &self.objective)?;
        Ok(())
    }

    /// Plain-text dump, one row per line.
    pub fn dump(&self) -> String {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_rows()];
        for j in 0..self.num_cols() {
            let (idx, val) = self.column(j);
            for (&r, &v) in idx.iter().zip(val) {
                rows[r].push((j, v));
            }
        }
        let mut out = String::new();
        out.push_str("obj");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                out.push_str(&format!(" {j}:{c}"));
            }
        }
        out.push('\n');
        for (i, row) in rows.iter().enumerate() {
            out.push_str(&format!("r{i} {} {}", self.senses[i], self.rhs[i]));
            for (j, v) in row {
                out.push_str(&format!(" {j}:{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// Ray over rows, normalized to unit max-norm.
    Infeasible {
        farkas: Vec<f64>,
    },
    /// Improving direction over columns, normalized to unit max-norm.
    Unbounded {
        ray: Vec<f64>,
    },
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal(_) => LpStatus::Optimal,
            LpOutcome::Infeasible { .. } => LpStatus::Infeasible,
            LpOutcome::Unbounded { .. } => LpStatus::Unbounded,
        }
    }

    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(sol) => Some(sol),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpParams {
    /// Primal feasibility and reduced-cost tolerance.
    pub tol: f64,
    /// Smallest acceptable pivot magnitude.
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// Pivots between basis refactorizations.
    pub refactor_every: usize,
    /// `None` picks a limit from the problem size.
    pub max_iterations: Option<usize>,
    /// Drop empty rows/columns and rows that force their columns to zero.
    pub presolve: bool,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams {
            tol: 1e-7,
            pivot_tol: 1e-9,
            bland_after: 1000,
            refactor_every: 100,
            max_iterations: None,
            presolve: true,
        }
    }
}

impl LpParams {
    pub fn with_tol(tol: f64) -> Self {
        LpParams {
            tol,
            ..LpParams::default()
        }
    }
}

/// Solves `problem`. Deterministic for identical input.
pub fn solve_lp(problem: &LpProblem, params: &LpParams) -> Result<LpOutcome, LpError> {
    problem.validate()?;
    if !params.presolve {
        return revised::solve(problem, params);
    }
    match presolve::presolve(problem, params.tol) {
        presolve::Presolve::Infeasible { farkas } => Ok(LpOutcome::Infeasible {
            farkas: normalized(farkas),
        }),
        presolve::Presolve::Reduced(reduced) => {
            let outcome = revised::solve(&reduced.problem, params)?;
            Ok(match outcome {
                LpOutcome::Optimal(sol) => {
                    let x = reduced.expand_primal(&sol.x);
                    let duals = reduced.expand_duals(problem, &sol.duals, true);
                    let objective = problem.objective_value(&x);
                    LpOutcome::Optimal(LpSolution {
                        x,
                        duals,
                        objective,
                        iterations: sol.iterations,
                    })
                }
                LpOutcome::Infeasible { farkas } => LpOutcome::Infeasible {
                    farkas: normalized(reduced.expand_duals(problem, &farkas, false)),
                },
                LpOutcome::Unbounded { ray } => LpOutcome::Unbounded {
                    ray: reduced.expand_primal(&ray),
                },
            })
        }
    }
}

/// Solves without presolve and also returns the optimal basis (variable
/// numbers: column `j` is `j`, the slack of row `i` is `num_cols + i`) for
/// later warm starts. With `start`, the solve begins from that basis with
/// the dual simplex, falling back to a cold solve if it cannot be used.
pub fn solve_lp_warm(
    problem: &LpProblem,
    params: &LpParams,
    start: Option<&[usize]>,
) -> Result<(LpOutcome, Option<Vec<usize>>), LpError> {
    problem.validate()?;
    let params = LpParams {
        presolve: false,
        ..params.clone()
    };
    if let Some(start) = start {
        if let Some((sol, basis)) = revised::solve_warm(problem, &params, start) {
            return Ok((LpOutcome::Optimal(sol), Some(basis)));
        }
    }
    revised::solve_keeping_basis(problem, &params)
}

pub(crate) fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale > 0.0 {
        v.iter_mut().for_each(|x| *x /= scale);
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub failures: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Independently re-checks the certificate carried by `outcome`.
pub fn verify_certificate(problem: &LpProblem, outcome: &LpOutcome, tol: f64) -> CertificateReport {
    let mut failures = Vec::new();
    let m = problem.num_rows();
    let n = problem.num_cols();
    match outcome {
        LpOutcome::Optimal(sol) => {
            if sol.x.len() != n || sol.duals.len() != m {
                failures.push("dimension mismatch".to_string());
                return CertificateReport { failures };
            }
            if let Some((j, v)) = sol.x.iter().enumerate().find(|(_, v)| **v < -tol) {
                failures.push(format!("primal bound violated: x[{j}] = {v}"));
            }
            let act = problem.row_activity(&sol.x);
            for i in 0..m {
                let b = problem.rhs[i];
                let viol = match problem.senses[i] {
                    RowSense::Eq => (act[i] - b).abs(),
                    RowSense::Le => (act[i] - b).max(0.0),
                };
                if viol > tol * (1.0 + b.abs()) {
                    failures.push(format!("primal residual {viol:e} on row {i}"));
                    break;
                }
            }
            for i in 0..m {
                if problem.senses[i] == RowSense::Le && sol.duals[i] > tol {
                    failures.push(format!("dual sign on <= row {i}: {}", sol.duals[i]));
                    break;
                }
            }
            let aty = problem.column_activity(&sol.duals);
            for j in 0..n {
                let d = problem.objective[j] - aty[j];
                if d < -tol * (1.0 + problem.objective[j].abs()) {
                    failures.push(format!("negative reduced cost {d:e} on column {j}"));
                    break;
                }
            }
            let primal = problem.objective_value(&sol.x);
            let dual: f64 = problem.rhs.iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
            if (primal - dual).abs() > tol * (1.0 + primal.abs()) {
                failures.push(format!(
                    "strong duality gap: primal {primal} vs dual {dual}"
                ));
            }
            if (primal - sol.objective).abs() > tol * (1.0 + primal.abs()) {
                failures.push(format!(
                    "reported objective {} differs from c'x {primal}",
                    sol.objective
                ));
            }
        }
        LpOutcome::Infeasible { farkas } => {
            if farkas.len() != m {
                failures.push("dimension mismatch".to_string());
                return CertificateReport { failures };
            }
            let scale = farkas.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if scale <= tol {
                failures.push("farkas ray is zero".to_string());
                return CertificateReport { failures };
            }
            let y: Vec<f64> = farkas.iter().map(|v| v / scale).collect();
            for i in 0..m {
                if problem.senses[i] == RowSense::Le && y[i] > tol {
                    failures.push(format!("farkas sign on <= row {i}: {}", y[i]));
                    break;
                }
            }
            let aty = problem.column_activity(&y);
            for (j, v) in aty.iter().enumerate() {
                if *v > tol {
                    failures.push(format!("farkas column {j} aggregates to {v:e} > 0"));
                    break;
                }
            }
            let by: f64 = problem.rhs.iter().zip(&y).map(|(b, y)| b * y).sum();
            if by <= tol {
                failures.push(format!("farkas rhs aggregate {by:e} is not positive"));
            }
        }
        LpOutcome::Unbounded { ray } => {
            if ray.len() != n {
                failures.push("dimension mismatch".to_string());
                return CertificateReport { failures };
            }
            let scale = ray.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if scale <= tol {
                failures.push("unbounded ray is zero".to_string());
                return CertificateReport { failures };
            }
            let d: Vec<f64> = ray.iter().map(|v| v / scale).collect();
            if let Some(j) = d.iter().position(|v| *v < -tol) {
                failures.push(format!("ray leaves the nonnegative orthant at column {j}"));
            }
            let act = problem.row_activity(&d);
            for i in 0..m {
                let bad = match problem.senses[i] {
                    RowSense::Eq => act[i].abs() > tol,
                    RowSense::Le => act[i] > tol,
                };
                if bad {
                    failures.push(format!("ray violates row {i}: {}", act[i]));
                    break;
                }
            }
            let cd = problem.objective_value(&d);
            if cd >= -tol {
                failures.push(format!("ray does not improve the objective: c'd = {cd:e}"));
            }
        }
    }
    CertificateReport { failures }
}
