//! Bounded-below revised simplex with artificial-variable phase one.

use super::lu::{BasisFactor, SparseLu};
use super::{normalized, LpError, LpOutcome, LpParams, LpProblem, LpSolution, RowSense};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, column: Vec<f64> },
}

/// Working state. Variables are numbered: structural `0..n`, slack of row
/// `i` at `n + i`, artificial of row `i` at `n + m + i`. Rows with a
/// negative rhs are negated so that the working rhs is nonnegative.
struct Simplex<'a> {
    lp: &'a LpProblem,
    params: &'a LpParams,
    m: usize,
    n: usize,
    sign: Vec<f64>,
    b: Vec<f64>,
    has_slack: Vec<bool>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    x_b: Vec<f64>,
    factor: BasisFactor,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

pub(super) fn solve(lp: &LpProblem, params: &LpParams) -> Result<LpOutcome, LpError> {
    solve_keeping_basis(lp, params).map(|(outcome, _)| outcome)
}

/// Two-phase solve that also returns the optimal basis as variable numbers,
/// or `None` when an artificial is still basic at the end.
pub(super) fn solve_keeping_basis(
    lp: &LpProblem,
    params: &LpParams,
) -> Result<(LpOutcome, Option<Vec<usize>>), LpError> {
    let mut s = Simplex::new(lp, params)?;
    let any_artificial = s.basis.iter().any(|&v| s.is_artificial(v));
    if any_artificial {
        match s.run(Phase::One)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded { .. } => {
                return Err(LpError::NumericalBreakdown {
                    iteration: s.iterations,
                    detail: "phase one reported an unbounded direction".into(),
                })
            }
        }
        let infeasibility: f64 = s
            .basis
            .iter()
            .zip(&s.x_b)
            .filter(|(&v, _)| s.is_artificial(v))
            .map(|(_, &x)| x.max(0.0))
            .sum();
        let bmax = s.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if infeasibility > params.tol * (1.0 + bmax) {
            let y = s.duals(Phase::One);
            let farkas: Vec<f64> = y.iter().zip(&s.sign).map(|(y, sg)| y * sg).collect();
            return Ok((
                LpOutcome::Infeasible {
                    farkas: normalized(farkas),
                },
                None,
            ));
        }
        s.drive_out_artificials()?;
    }
    match s.run(Phase::Two)? {
        PhaseEnd::Optimal => {
            let basis = (!s.basis.iter().any(|&v| s.is_artificial(v))).then(|| s.basis.clone());
            Ok((LpOutcome::Optimal(s.solution()), basis))
        }
        PhaseEnd::Unbounded { entering, column } => {
            let mut ray = vec![0.0; s.n];
            if entering < s.n {
                ray[entering] = 1.0;
            }
            for (k, &v) in s.basis.iter().enumerate() {
                if v < s.n {
                    ray[v] = -column[k];
                }
            }
            for r in ray.iter_mut() {
                if r.abs() < params.pivot_tol {
                    *r = 0.0;
                }
            }
            Ok((
                LpOutcome::Unbounded {
                    ray: normalized(ray),
                },
                None,
            ))
        }
    }
}

/// Dual simplex from `start`, a basis of structurals and slacks that is dual
/// feasible for `lp` (typically the optimum of the same problem before rows
/// were added, extended by the slacks of the new rows). Returns `None` when
/// the basis is unusable or the rows turn out infeasible; callers fall back
/// to a cold solve, which also produces the certificate.
pub(super) fn solve_warm(
    lp: &LpProblem,
    params: &LpParams,
    start: &[usize],
) -> Option<(LpSolution, Vec<usize>)> {
    let mut s = Simplex::new(lp, params).ok()?;
    if start.len() != s.m {
        return None;
    }
    let mut position = vec![None; s.n + 2 * s.m];
    for (k, &v) in start.iter().enumerate() {
        if v >= s.n + s.m || !s.eligible(v) || position[v].is_some() {
            return None;
        }
        position[v] = Some(k);
    }
    s.basis = start.to_vec();
    s.position = position;
    s.refactor().ok()?;
    let limit = 5 * (s.m + s.n) + 100;
    let tol = params.tol;
    loop {
        if s.iterations >= limit {
            return None;
        }
        if s.factor.num_updates() >= params.refactor_every {
            s.refactor().ok()?;
        }
        let leaving = (0..s.m)
            .filter(|&k| s.x_b[k] < -tol)
            .min_by(|&a, &b| s.x_b[a].total_cmp(&s.x_b[b]));
        let Some(row) = leaving else { break };
        let mut rho = vec![0.0; s.m];
        rho[row] = 1.0;
        s.factor.btran(&mut rho);
        let y = s.duals(Phase::Two);
        let amax = (0..s.n + s.m)
            .filter(|&v| s.position[v].is_none() && s.eligible(v))
            .map(|v| s.dot_column(v, &rho).abs())
            .fold(0.0f64, f64::max);
        let ptol = params.pivot_tol * amax.max(1.0);
        let mut best: Option<(usize, f64, f64)> = None;
        for var in 0..s.n + s.m {
            if s.position[var].is_some() || !s.eligible(var) {
                continue;
            }
            let alpha = s.dot_column(var, &rho);
            if alpha >= -ptol {
                continue;
            }
            let d = (s.cost(var, Phase::Two) - s.dot_column(var, &y)).max(0.0);
            let ratio = d / -alpha;
            let better = match best {
                None => true,
                Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && -alpha > ba),
            };
            if better {
                best = Some((var, ratio, -alpha));
            }
        }
        let (entering, _, _) = best?;
        let mut w = s.dense_column(entering);
        s.factor.ftran(&mut w);
        if w[row].abs() < params.pivot_tol {
            return None;
        }
        let theta = s.x_b[row] / w[row];
        for k in 0..s.m {
            if w[k] != 0.0 {
                s.x_b[k] -= theta * w[k];
            }
        }
        s.x_b[row] = theta;
        let out = s.basis[row];
        s.position[out] = None;
        s.position[entering] = Some(row);
        s.basis[row] = entering;
        s.factor.update(row, &w);
        s.iterations += 1;
    }
    // Primal feasible now; primal iterations clean up any reduced cost that
    // drifted past the tolerance.
    match s.run(Phase::Two).ok()? {
        PhaseEnd::Optimal => Some((s.solution(), s.basis.clone())),
        PhaseEnd::Unbounded { .. } => None,
    }
}

impl<'a> Simplex<'a> {
    fn solution(&self) -> LpSolution {
        let tol = self.params.tol;
        let mut x = vec![0.0; self.n];
        for (k, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                x[v] = if self.x_b[k] < 0.0 && self.x_b[k] > -tol {
                    0.0
                } else {
                    self.x_b[k]
                };
            }
        }
        let y = self.duals(Phase::Two);
        let duals: Vec<f64> = y.iter().zip(&self.sign).map(|(y, sg)| y * sg).collect();
        let objective = self.lp.objective_value(&x);
        LpSolution {
            x,
            duals,
            objective,
            iterations: self.iterations,
        }
    }

    fn new(lp: &'a LpProblem, params: &'a LpParams) -> Result<Self, LpError> {
        let m = lp.num_rows();
        let n = lp.num_cols();
        let sign: Vec<f64> = lp
            .rhs()
            .iter()
            .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let b: Vec<f64> = lp.rhs().iter().map(|b| b.abs()).collect();
        let has_slack: Vec<bool> = lp.senses().iter().map(|s| *s == RowSense::Le).collect();
        let has_artificial: Vec<bool> = (0..m).map(|i| !(has_slack[i] && sign[i] > 0.0)).collect();
        let basis: Vec<usize> = (0..m)
            .map(|i| if has_artificial[i] { n + m + i } else { n + i })
            .collect();
        let mut position = vec![None; n + 2 * m];
        for (k, &v) in basis.iter().enumerate() {
            position[v] = Some(k);
        }
        let max_iterations = params.max_iterations.unwrap_or(50 * (m + n) + 10_000);
        Ok(Simplex {
            lp,
            params,
            m,
            n,
            sign,
            x_b: b.clone(),
            b,
            has_slack,
            basis,
            position,
            factor: BasisFactor::new(SparseLu::identity(m)),
            iterations: 0,
            max_iterations,
            degenerate_run: 0,
            bland: false,
        })
    }

    fn is_artificial(&self, var: usize) -> bool {
        var >= self.n + self.m
    }

    fn eligible(&self, var: usize) -> bool {
        if var < self.n {
            true
        } else if var < self.n + self.m {
            self.has_slack[var - self.n]
        } else {
            false
        }
    }

    fn cost(&self, var: usize, phase: Phase) -> f64 {
        match phase {
            Phase::One => {
                if self.is_artificial(var) {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if var < self.n {
                    self.lp.objective()[var]
                } else {
                    0.0
                }
            }
        }
    }

    fn for_column<F: FnMut(usize, f64)>(&self, var: usize, mut f: F) {
        if var < self.n {
            let (idx, val) = self.lp.column(var);
            for (&r, &v) in idx.iter().zip(val) {
                f(r, v * self.sign[r]);
            }
        } else if var < self.n + self.m {
            let r = var - self.n;
            f(r, self.sign[r]);
        } else {
            f(var - self.n - self.m, 1.0);
        }
    }

    fn dense_column(&self, var: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.m];
        self.for_column(var, |r, v| col[r] = v);
        col
    }

    fn dot_column(&self, var: usize, y: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_column(var, |r, v| s += v * y[r]);
        s
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let cols: Vec<Vec<(usize, f64)>> = self
            .basis
            .iter()
            .map(|&var| {
                let mut col = Vec::new();
                self.for_column(var, |r, v| col.push((r, v)));
                col
            })
            .collect();
        let lu =
            SparseLu::factor(cols, self.m, self.params.pivot_tol).map_err(|(step, pivot)| {
                LpError::NumericalBreakdown {
                    iteration: self.iterations,
                    detail: format!("basis singular at elimination step {step} (pivot {pivot:e})"),
                }
            })?;
        self.factor = BasisFactor::new(lu);
        let mut x = self.b.clone();
        self.factor.ftran(&mut x);
        self.x_b = x;
        Ok(())
    }

    fn duals(&self, phase: Phase) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&v| self.cost(v, phase)).collect();
        self.factor.btran(&mut y);
        y
    }

    fn price(&self, phase: Phase, y: &[f64]) -> Option<usize> {
        let tol = self.params.tol;
        let mut best: Option<(usize, f64)> = None;
        for var in 0..self.n + self.m {
            if self.position[var].is_some() || !self.eligible(var) {
                continue;
            }
            let d = self.cost(var, phase) - self.dot_column(var, y);
            if d >= -tol {
                continue;
            }
            if self.bland {
                return Some(var);
            }
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((var, d));
            }
        }
        best.map(|(v, _)| v)
    }

    /// Leaving position for entering column `w`, or `None` if unbounded.
    fn ratio_test(&self, phase: Phase, w: &[f64]) -> Option<usize> {
        // Entries that are tiny next to the rest of the column are treated as
        // zero: pivoting on them is what drives a basis towards singularity.
        let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ptol = self.params.pivot_tol * wmax.max(1.0);
        if phase == Phase::Two {
            // A basic artificial sits at zero on a redundant row; it must
            // leave before it can move.
            let stuck = (0..self.m)
                .filter(|&k| self.is_artificial(self.basis[k]) && w[k].abs() > ptol)
                .max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()));
            if stuck.is_some() {
                return stuck;
            }
        }
        let mut theta_min = f64::INFINITY;
        for k in 0..self.m {
            if w[k] > ptol {
                let t = self.x_b[k].max(0.0) / w[k];
                if t < theta_min {
                    theta_min = t;
                }
            }
        }
        if !theta_min.is_finite() {
            return None;
        }
        let slack = 1e-12 * (1.0 + theta_min);
        let mut chosen: Option<usize> = None;
        for k in 0..self.m {
            if w[k] <= ptol || self.x_b[k].max(0.0) / w[k] > theta_min + slack {
                continue;
            }
            chosen = match chosen {
                None => Some(k),
                Some(c) => {
                    let better = if self.bland {
                        self.basis[k] < self.basis[c]
                    } else {
                        w[k] > w[c]
                    };
                    if better {
                        Some(k)
                    } else {
                        Some(c)
                    }
                }
            };
        }
        chosen
    }

    fn pivot(&mut self, entering: usize, row: usize, w: &[f64]) {
        let theta = self.x_b[row].max(0.0) / w[row];
        let theta = if self.is_artificial(self.basis[row]) && self.x_b[row].abs() <= self.params.tol
        {
            self.x_b[row] / w[row]
        } else {
            theta
        };
        if theta != 0.0 {
            for k in 0..self.m {
                if w[k] != 0.0 {
                    self.x_b[k] -= theta * w[k];
                }
            }
        }
        self.x_b[row] = theta;
        let leaving = self.basis[row];
        self.position[leaving] = None;
        self.position[entering] = Some(row);
        self.basis[row] = entering;
        self.factor.update(row, w);
        self.iterations += 1;
        if theta.abs() <= 1e-11 {
            self.degenerate_run += 1;
            if self.degenerate_run >= self.params.bland_after {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    fn run(&mut self, phase: Phase) -> Result<PhaseEnd, LpError> {
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.factor.num_updates() >= self.params.refactor_every {
                self.refactor()?;
            }
            let y = self.duals(phase);
            let Some(entering) = self.price(phase, &y) else {
                if self.factor.num_updates() > 0 {
                    // Confirm optimality on a fresh factorization.
                    self.refactor()?;
                    let y = self.duals(phase);
                    if self.price(phase, &y).is_some() {
                        continue;
                    }
                }
                return Ok(PhaseEnd::Optimal);
            };
            let mut w = self.dense_column(entering);
            self.factor.ftran(&mut w);
            let Some(row) = self.ratio_test(phase, &w) else {
                return Ok(PhaseEnd::Unbounded {
                    entering,
                    column: w,
                });
            };
            if w[row].abs() < self.params.pivot_tol {
                return Err(LpError::NumericalBreakdown {
                    iteration: self.iterations,
                    detail: format!("pivot {:e} below tolerance", w[row]),
                });
            }
            self.pivot(entering, row, &w);
        }
    }

    /// Pivots zero-level artificials out of the basis wherever some
    /// non-artificial column has a usable entry in their row.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        for row in 0..self.m {
            if !self.is_artificial(self.basis[row]) {
                continue;
            }
            let mut e = vec![0.0; self.m];
            e[row] = 1.0;
            self.factor.btran(&mut e);
            let mut best: Option<(usize, f64)> = None;
            for var in 0..self.n + self.m {
                if self.position[var].is_some() || !self.eligible(var) {
                    continue;
                }
                let alpha = self.dot_column(var, &e);
                if alpha.abs() > 1e-7 && best.is_none_or(|(_, a)| alpha.abs() > a.abs()) {
                    best = Some((var, alpha));
                }
            }
            if let Some((var, _)) = best {
                let mut w = self.dense_column(var);
                self.factor.ftran(&mut w);
                self.pivot(var, row, &w);
                if self.factor.num_updates() >= self.params.refactor_every {
                    self.refactor()?;
                }
            }
        }
        self.degenerate_run = 0;
        self.bland = false;
        Ok(())
    }
}
