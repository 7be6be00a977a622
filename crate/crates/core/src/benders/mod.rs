//! Benders decomposition on the container counts.
//!
//! With `T` fixed the rest of the model is an LP, the subproblem `q(T)`.
//! Its rows read `A x (=, <=) b - B T`, where `B` is nonzero only in the
//! capacity rows (`-k` on the matching `T`). An optimal dual `y` yields the
//! optimality cut `y'(b - B T) <= q`; a Farkas ray yields the feasibility cut
//! `y'(b - B T) <= 0`. The master minimizes `c3'T + q` over the cuts, with
//! `T` integer, and its optimum is a lower bound on the full problem.
//!
//! The run starts with cut rounds on the master's LP relaxation, whose cuts
//! are valid for every schedule. It then searches a single branch-and-bound
//! tree over the master: an integral node is evaluated by the subproblem,
//! and if the new cut cuts it off the node is solved again. Cuts are global,
//! so the tree is never rebuilt.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{validate_routes, Instance};
use crate::milp::{
    branching_column, relative_gap, solve_milp, MilpError, MilpParams, MilpProblem, MilpStatus,
};
use crate::model::{
    build_mip, build_mip_unchecked, objective_breakdown, CostBreakdown, DeliveryMode, MipModel,
    ModelError, VarKey,
};
use crate::simplex::{
    solve_lp, solve_lp_warm, verify_certificate, LpError, LpOutcome, LpParams, LpProblem, RowSense,
};

#[derive(Debug, Error)]
pub enum BendersError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("instance is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("subproblem is unbounded; the model was assembled incorrectly")]
    SubproblemUnbounded,
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iteration {iteration}: cut evaluates to {cut} at its generator but q = {q}")]
    CutNotTight { iteration: usize, cut: f64, q: f64 },
    #[error("invalid infeasibility ray: {0}")]
    BadRay(String),
    #[error("master problem hit the node limit after {0} nodes")]
    MasterNodeLimit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CutKind {
    Optimality,
    Feasibility,
}

impl CutKind {
    pub fn label(&self) -> &'static str {
        match self {
            CutKind::Optimality => "optimality",
            CutKind::Feasibility => "feasibility",
        }
    }
}

/// `constant + t_coefficients · T <= q` (optimality) or `<= 0` (feasibility).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cut {
    pub kind: CutKind,
    /// Sparse `(position in T, coefficient)` pairs.
    pub t_coefficients: Vec<(usize, f64)>,
    pub constant: f64,
    /// Iteration that produced the cut; 0 for the initial `q >= 0`.
    pub iteration: usize,
}

impl Cut {
    /// `q >= 0`, valid because every cost is nonnegative.
    pub fn initial() -> Self {
        Cut {
            kind: CutKind::Optimality,
            t_coefficients: Vec::new(),
            constant: 0.0,
            iteration: 0,
        }
    }

    /// Left-hand side at `t`: the implied lower bound on `q` for an
    /// optimality cut.
    pub fn evaluate(&self, t: &[f64]) -> f64 {
        self.constant
            + self
                .t_coefficients
                .iter()
                .map(|&(i, a)| a * t[i])
                .sum::<f64>()
    }
}

/// Everything the master needs: the `B` pattern, `b`, container costs and
/// the cut pool, plus the subproblem LP with the `T` columns emptied.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterData {
    /// Model column of each `T`, in `(h, d)` order.
    pub t_columns: Vec<usize>,
    /// `(row, position in T, coefficient)`; only capacity rows appear.
    pub b_matrix: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub h_costs: Vec<f64>,
    pub t_upper: f64,
    pub cuts: Vec<Cut>,
    subproblem: LpProblem,
}

impl MasterData {
    pub fn new(model: &MipModel) -> Self {
        let t_columns: Vec<usize> = model.integer_columns().collect();
        let mut b_matrix = Vec::new();
        let mut is_t = vec![false; model.num_cols()];
        for (i, &j) in t_columns.iter().enumerate() {
            is_t[j] = true;
            let (rows, vals) = model.lp.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                b_matrix.push((r, i, v));
            }
        }
        let mut subproblem =
            LpProblem::with_rows(model.lp.senses().to_vec(), model.lp.rhs().to_vec());
        for j in 0..model.num_cols() {
            if is_t[j] {
                subproblem.add_column(0.0, std::iter::empty());
            } else {
                let (rows, vals) = model.lp.column(j);
                subproblem.add_column(
                    model.lp.objective()[j],
                    rows.iter().copied().zip(vals.iter().copied()),
                );
            }
        }
        MasterData {
            h_costs: t_columns.iter().map(|&j| model.lp.objective()[j]).collect(),
            t_columns,
            b_matrix,
            b: model.lp.rhs().to_vec(),
            t_upper: model.container_bound,
            cuts: vec![Cut::initial()],
            subproblem,
        }
    }

    pub fn num_t(&self) -> usize {
        self.t_columns.len()
    }

    /// `b - B T`.
    pub fn rhs_at(&self, t: &[f64]) -> Vec<f64> {
        let mut rhs = self.b.clone();
        for &(r, i, v) in &self.b_matrix {
            rhs[r] -= v * t[i];
        }
        rhs
    }

    /// The subproblem LP at `t`.
    pub fn subproblem_lp(&self, t: &[f64]) -> LpProblem {
        let mut lp = self.subproblem.clone();
        for (r, v) in self.rhs_at(t).into_iter().enumerate() {
            if v != lp.rhs()[r] {
                lp.set_rhs(r, v);
            }
        }
        lp
    }

    fn check_len(&self, t: &[f64]) -> Result<(), BendersError> {
        if t.len() != self.num_t() {
            return Err(BendersError::DimensionMismatch {
                expected: self.num_t(),
                got: t.len(),
            });
        }
        Ok(())
    }

    /// `(y'b, -(y'B))` for a row vector `y`.
    fn aggregate(&self, y: &[f64]) -> Result<(f64, Vec<(usize, f64)>), BendersError> {
        if y.len() != self.b.len() {
            return Err(BendersError::DimensionMismatch {
                expected: self.b.len(),
                got: y.len(),
            });
        }
        let constant: f64 = y.iter().zip(&self.b).map(|(a, b)| a * b).sum();
        let mut coef = vec![0.0; self.num_t()];
        for &(r, i, v) in &self.b_matrix {
            coef[i] -= y[r] * v;
        }
        // Round-off leaves coefficients many orders of magnitude below the
        // rest; they only hurt the master LP. Dropping a negative one would
        // strengthen the cut, so its largest effect is moved into the constant.
        let scale = coef.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut constant = constant;
        let mut sparse = Vec::new();
        for (i, a) in coef.into_iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            if a.abs() <= 1e-9 * scale {
                if a < 0.0 {
                    constant += a * self.t_upper;
                }
            } else {
                sparse.push((i, a));
            }
        }
        Ok((constant, sparse))
    }
}

/// Outcome of `q(T)` at a fixed container schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum SubproblemResult {
    Feasible {
        value: f64,
        /// Full model vector, with `T` filled in.
        x: Vec<f64>,
        duals: Vec<f64>,
    },
    Infeasible {
        ray: Vec<f64>,
    },
}

/// Solves the subproblem at `t` (one entry per `T` column).
pub fn solve_subproblem_with(
    master: &MasterData,
    t: &[f64],
    params: &LpParams,
) -> Result<SubproblemResult, BendersError> {
    master.check_len(t)?;
    if t.iter().any(|&v| v < 0.0) {
        return Err(BendersError::Infeasible(
            "container counts must be nonnegative".into(),
        ));
    }
    let lp = master.subproblem_lp(t);
    match solve_lp(&lp, params)? {
        LpOutcome::Optimal(sol) => {
            let mut x = sol.x;
            for (i, &j) in master.t_columns.iter().enumerate() {
                x[j] = t[i];
            }
            Ok(SubproblemResult::Feasible {
                value: sol.objective,
                x,
                duals: sol.duals,
            })
        }
        LpOutcome::Infeasible { farkas } => Ok(SubproblemResult::Infeasible { ray: farkas }),
        LpOutcome::Unbounded { .. } => Err(BendersError::SubproblemUnbounded),
    }
}

/// Builds the model of `instance` (without rejecting unroutable pickups) and
/// solves `q(t)`; `t` is indexed `h * horizon + d`.
pub fn solve_subproblem(
    instance: &Instance,
    t: &[f64],
    mode: DeliveryMode,
) -> Result<SubproblemResult, BendersError> {
    let model = build_mip_unchecked(instance, mode);
    solve_subproblem_with(&MasterData::new(&model), t, &LpParams::default())
}

/// `y'(b - B T) <= q` from the optimal subproblem duals `y`.
pub fn make_optimality_cut(
    duals: &[f64],
    master: &MasterData,
    iteration: usize,
) -> Result<Cut, BendersError> {
    let (constant, t_coefficients) = master.aggregate(duals)?;
    Ok(Cut {
        kind: CutKind::Optimality,
        t_coefficients,
        constant,
        iteration,
    })
}

/// `y'(b - B T) <= 0` from a Farkas ray of the subproblem at `t_bar`. The ray
/// is checked first; the cut must cut `t_bar` off.
pub fn make_feasibility_cut(
    ray: &[f64],
    master: &MasterData,
    t_bar: &[f64],
    iteration: usize,
) -> Result<Cut, BendersError> {
    master.check_len(t_bar)?;
    let outcome = LpOutcome::Infeasible {
        farkas: ray.to_vec(),
    };
    let report = verify_certificate(&master.subproblem_lp(t_bar), &outcome, 1e-7);
    if !report.passed() {
        return Err(BendersError::BadRay(report.failures.join("; ")));
    }
    let (constant, t_coefficients) = master.aggregate(ray)?;
    let cut = Cut {
        kind: CutKind::Feasibility,
        t_coefficients,
        constant,
        iteration,
    };
    if cut.evaluate(t_bar) <= 0.0 {
        return Err(BendersError::BadRay(
            "cut does not separate the generating schedule".into(),
        ));
    }
    Ok(cut)
}

/// Optimum of the master over the current cut pool.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterSolution {
    pub t: Vec<f64>,
    pub q: f64,
    pub objective: f64,
    /// Proven lower bound for the full problem.
    pub lower_bound: f64,
    pub nodes: usize,
}

/// The master as a MILP over `(T, q)`; `q` is the last column.
pub fn master_problem(master: &MasterData) -> MilpProblem {
    let n = master.num_t();
    let mut rows = Vec::with_capacity(master.cuts.len());
    for cut in &master.cuts {
        let mut entries = cut.t_coefficients.clone();
        if cut.kind == CutKind::Optimality {
            entries.push((n, -1.0));
        }
        // Rows are scaled to unit size; cut coefficients are typically
        // container-sized while q enters with -1.
        let scale = entries
            .iter()
            .fold(cut.constant.abs(), |a, &(_, v)| a.max(v.abs()))
            .max(1.0);
        for e in &mut entries {
            e.1 /= scale;
        }
        rows.push((RowSense::Le, -cut.constant / scale, entries));
    }
    let mut lp = LpProblem::with_rows(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
    );
    let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
    for (r, (_, _, entries)) in rows.iter().enumerate() {
        for &(c, v) in entries {
            per_col[c].push((r, v));
        }
    }
    for (c, entries) in per_col.into_iter().enumerate() {
        let cost = if c < n { master.h_costs[c] } else { 1.0 };
        lp.add_column(cost, entries);
    }
    MilpProblem {
        lp,
        integer: (0..n).collect(),
        upper: (0..n).map(|i| (i, master.t_upper)).collect(),
        start: None,
    }
}

/// Master point `(t, q)` with `q` as small as the optimality cuts allow.
fn master_point(master: &MasterData, t: &[f64]) -> Vec<f64> {
    let q = master
        .cuts
        .iter()
        .filter(|c| c.kind == CutKind::Optimality)
        .map(|c| c.evaluate(t))
        .fold(0.0f64, f64::max);
    let mut x = t.to_vec();
    x.push(q);
    x
}

/// Solves the master. `start` is a container schedule known to satisfy the
/// feasibility cuts, typically the best one so far; it seeds the search.
pub fn solve_master(
    master: &MasterData,
    params: &MilpParams,
    start: Option<&[f64]>,
) -> Result<MasterSolution, BendersError> {
    let mut problem = master_problem(master);
    problem.start = start.map(|t| master_point(master, t));
    solve_master_problem(master, &problem, params)
}

/// Solves the master with continuous container counts.
pub fn solve_relaxed_master(
    master: &MasterData,
    params: &MilpParams,
) -> Result<MasterSolution, BendersError> {
    let mut problem = master_problem(master);
    problem.integer.clear();
    solve_master_problem(master, &problem, params)
}

fn solve_master_problem(
    master: &MasterData,
    problem: &MilpProblem,
    params: &MilpParams,
) -> Result<MasterSolution, BendersError> {
    let out = solve_milp(problem, params)?;
    match out.status {
        MilpStatus::Infeasible => Err(BendersError::Infeasible(
            "feasibility cuts exclude every container schedule".into(),
        )),
        MilpStatus::NodeLimit => Err(BendersError::MasterNodeLimit(out.nodes)),
        MilpStatus::Optimal => {
            let x = out.incumbent.expect("optimal master has an incumbent");
            let n = master.num_t();
            Ok(MasterSolution {
                t: x[..n].to_vec(),
                q: x[n],
                objective: out.objective,
                lower_bound: out.bound,
                nodes: out.nodes,
            })
        }
    }
}

/// How the integer master is searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MasterStrategy {
    /// One branch-and-bound tree; cuts are added to it as integral nodes are
    /// evaluated.
    SingleTree,
    /// The master MILP is solved from scratch after every cut, seeded with
    /// the incumbent schedule. Simple, but the repeated trees grow costly.
    Resolve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BendersParams {
    /// Stop when `(UB - LB) / (1 + |UB|)` reaches this value.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative gap to which each master is solved; keep below `tol`.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub strategy: MasterStrategy,
    /// Iterations spent on the LP relaxation of the master before the integer
    /// master takes over. Cuts found at fractional schedules are valid for
    /// the integer problem and give the master a much tighter start.
    pub relaxed_iters: usize,
    pub lp: LpParams,
}

impl Default for BendersParams {
    fn default() -> Self {
        BendersParams {
            tol: 1e-9,
            max_iters: 500,
            gap_tol: 1e-10,
            node_limit: 100_000,
            strategy: MasterStrategy::SingleTree,
            relaxed_iters: 200,
            lp: LpParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    /// Master candidate, one entry per `T` column.
    pub t: Vec<f64>,
    /// `q(T)` at the candidate, absent when the subproblem was infeasible.
    pub subproblem_value: Option<f64>,
    pub cut: CutKind,
    pub master_nodes: usize,
    /// The candidate came from the relaxed master.
    pub relaxed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BendersTrace {
    pub entries: Vec<TraceEntry>,
}

impl BendersTrace {
    /// `iteration,lb,ub,gap,cut_kind,subproblem_value`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,lb,ub,gap,cut_kind,subproblem_value\n");
        for e in &self.entries {
            let q = e
                .subproblem_value
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.iteration,
                e.lower_bound,
                e.upper_bound,
                e.gap,
                e.cut.label(),
                q
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BendersResult {
    /// Gap closed to `tol`; false when `max_iters` ran out first.
    pub proven: bool,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub t: Vec<f64>,
    pub solution: Vec<f64>,
    pub breakdown: CostBreakdown,
    pub trace: BendersTrace,
    pub cuts: Vec<Cut>,
}

/// Runs the decomposition on an assembled model.
pub fn run_benders_on(
    model: &MipModel,
    params: &BendersParams,
) -> Result<BendersResult, BendersError> {
    let mut run = Run {
        master: MasterData::new(model),
        params,
        milp_params: MilpParams {
            gap_tol: params.gap_tol,
            node_limit: params.node_limit,
            lp: params.lp.clone(),
            ..MilpParams::default()
        },
        lb: f64::NEG_INFINITY,
        ub: f64::INFINITY,
        best: None,
        trace: BendersTrace::default(),
        iteration: 0,
        evaluated: HashMap::new(),
        nodes: 0,
    };
    let mut proven = run.relaxed_rounds()?;
    if !proven {
        proven = match params.strategy {
            MasterStrategy::SingleTree => run.tree()?,
            MasterStrategy::Resolve => run.resolve_loop()?,
        };
    }

    let (t, solution) = run.best.ok_or_else(|| {
        BendersError::Infeasible(format!(
            "no feasible container schedule after {} iterations",
            run.iteration
        ))
    })?;
    let breakdown = objective_breakdown(model, &solution)?;
    Ok(BendersResult {
        proven,
        objective: run.ub,
        lower_bound: run.lb,
        gap: relative_gap(run.ub, run.lb),
        t,
        solution,
        breakdown,
        trace: run.trace,
        cuts: run.master.cuts,
    })
}

/// Branch-and-bound node of the master tree.
struct TreeNode {
    bound: f64,
    seq: usize,
    branches: Vec<(RowSense, f64, Vec<(usize, f64)>)>,
    /// Optimal basis of the parent, used to warm-start this node.
    basis: Option<Rc<NodeBasis>>,
}

struct NodeBasis {
    roles: Vec<BasisRole>,
    cuts: usize,
    branches: usize,
}

/// A basic variable of a node LP, named independently of how many cuts the
/// LP had, so that a basis stays meaningful after cuts are added.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BasisRole {
    Column(usize),
    CutSlack(usize),
    UpperSlack(usize),
    BranchSlack(usize),
}

/// Node LP row layout: cuts, then one upper-bound row per `T`, then branches.
#[derive(Clone, Copy)]
struct NodeLayout {
    cols: usize,
    cuts: usize,
    upper: usize,
}

impl NodeLayout {
    fn roles(&self, basis: &[usize]) -> Vec<BasisRole> {
        basis
            .iter()
            .map(|&v| {
                if v < self.cols {
                    BasisRole::Column(v)
                } else {
                    let row = v - self.cols;
                    if row < self.cuts {
                        BasisRole::CutSlack(row)
                    } else if row < self.cuts + self.upper {
                        BasisRole::UpperSlack(row - self.cuts)
                    } else {
                        BasisRole::BranchSlack(row - self.cuts - self.upper)
                    }
                }
            })
            .collect()
    }

    /// Basis for an LP with this layout and `branches` branch rows, from the
    /// roles of an LP with `old_cuts` cuts and `old_branches` branch rows.
    /// Rows added since then enter with their slacks.
    fn basis(
        &self,
        roles: &[BasisRole],
        old_cuts: usize,
        old_branches: usize,
        branches: usize,
    ) -> Vec<usize> {
        let mut basis: Vec<usize> = roles
            .iter()
            .map(|&r| match r {
                BasisRole::Column(j) => j,
                BasisRole::CutSlack(c) => self.cols + c,
                BasisRole::UpperSlack(i) => self.cols + self.cuts + i,
                BasisRole::BranchSlack(b) => self.cols + self.cuts + self.upper + b,
            })
            .collect();
        basis.extend((old_cuts..self.cuts).map(|c| self.cols + c));
        basis.extend((old_branches..branches).map(|b| self.cols + self.cuts + self.upper + b));
        basis
    }
}

impl PartialEq for TreeNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TreeNode {}

impl PartialOrd for TreeNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TreeNode {
    // Smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Run<'a> {
    master: MasterData,
    params: &'a BendersParams,
    milp_params: MilpParams,
    lb: f64,
    ub: f64,
    best: Option<(Vec<f64>, Vec<f64>)>,
    trace: BendersTrace,
    iteration: usize,
    /// Subproblem values of the integral schedules evaluated so far.
    evaluated: HashMap<Vec<i64>, f64>,
    /// Master LPs solved since the last trace entry.
    nodes: usize,
}

fn schedule_key(t: &[f64]) -> Vec<i64> {
    t.iter().map(|v| v.round() as i64).collect()
}

fn is_integral(t: &[f64]) -> bool {
    t.iter().all(|v| (v - v.round()).abs() <= 1e-9)
}

impl Run<'_> {
    fn out_of_iterations(&self) -> bool {
        self.iteration >= self.params.max_iters
    }

    /// Evaluates `q` at `t`, records the cut and the trace entry, and returns
    /// `c3't + q(t)` when the subproblem is feasible. `lower` is a valid
    /// lower bound known at this point.
    fn evaluate(
        &mut self,
        t: Vec<f64>,
        lower: f64,
        relaxed: bool,
    ) -> Result<Option<f64>, BendersError> {
        self.iteration += 1;
        let iteration = self.iteration;
        let (cut, value, total) = match solve_subproblem_with(&self.master, &t, &self.params.lp)? {
            SubproblemResult::Feasible { value, x, duals } => {
                let total = value
                    + self
                        .master
                        .h_costs
                        .iter()
                        .zip(&t)
                        .map(|(c, t)| c * t)
                        .sum::<f64>();
                if is_integral(&t) {
                    let rounded: Vec<f64> = t.iter().map(|v| v.round()).collect();
                    self.evaluated.insert(schedule_key(&t), value);
                    if total < self.ub - 1e-12 {
                        self.ub = total;
                        self.best = Some((rounded, x));
                    }
                }
                let cut = make_optimality_cut(&duals, &self.master, iteration)?;
                let at = cut.evaluate(&t);
                if (at - value).abs() > 1e-6 * (1.0 + value.abs()) {
                    return Err(BendersError::CutNotTight {
                        iteration,
                        cut: at,
                        q: value,
                    });
                }
                (cut, Some(value), Some(total))
            }
            SubproblemResult::Infeasible { ray } => (
                make_feasibility_cut(&ray, &self.master, &t, iteration)?,
                None,
                None,
            ),
        };
        self.lb = self.lb.max(lower.min(self.ub));
        self.trace.entries.push(TraceEntry {
            iteration,
            lower_bound: self.lb,
            upper_bound: self.ub,
            gap: relative_gap(self.ub, self.lb),
            t,
            subproblem_value: value,
            cut: cut.kind,
            master_nodes: std::mem::take(&mut self.nodes),
            relaxed,
        });
        self.master.cuts.push(cut);
        Ok(total)
    }

    fn closed(&self) -> bool {
        relative_gap(self.ub, self.lb) <= self.params.tol
    }

    /// Cut rounds on the relaxed master until its own gap closes. Each
    /// fractional candidate is also rounded to the nearest schedule, which is
    /// evaluated as an upper-bound heuristic. Returns whether the overall
    /// gap closed already.
    fn relaxed_rounds(&mut self) -> Result<bool, BendersError> {
        let mut rounds = 0;
        while rounds < self.params.relaxed_iters && !self.out_of_iterations() {
            rounds += 1;
            let cand = solve_relaxed_master(&self.master, &self.milp_params)?;
            self.nodes += cand.nodes;
            let total = self.evaluate(cand.t.clone(), cand.lower_bound, true)?;
            if self.closed() {
                return Ok(true);
            }
            if !is_integral(&cand.t) && !self.out_of_iterations() {
                let nearest: Vec<f64> = cand
                    .t
                    .iter()
                    .map(|v| v.round().clamp(0.0, self.master.t_upper))
                    .collect();
                if !self.evaluated.contains_key(&schedule_key(&nearest)) {
                    self.evaluate(nearest, self.lb, true)?;
                    if self.closed() {
                        return Ok(true);
                    }
                }
            }
            if total.is_some_and(|total| relative_gap(total, cand.objective) <= 1e-7) {
                break;
            }
        }
        Ok(false)
    }

    /// Master LP with the upper-bound rows, rebuilt only when cuts change.
    fn node_base(&self, cache: &mut Option<(usize, LpProblem)>) -> LpProblem {
        let cuts = self.master.cuts.len();
        if cache.as_ref().is_none_or(|(c, _)| *c != cuts) {
            let problem = master_problem(&self.master);
            let rows: Vec<_> = problem
                .upper
                .iter()
                .map(|&(j, u)| (RowSense::Le, u, vec![(j, 1.0)]))
                .collect();
            *cache = Some((cuts, problem.lp.with_appended_rows(&rows)));
        }
        cache.as_ref().expect("just filled").1.clone()
    }

    /// Classic loop: solve the integer master to optimality, evaluate its
    /// schedule, add the cut, repeat.
    fn resolve_loop(&mut self) -> Result<bool, BendersError> {
        while !self.out_of_iterations() {
            let start = self.best.as_ref().map(|b| b.0.clone());
            let cand = solve_master(&self.master, &self.milp_params, start.as_deref())?;
            self.nodes += cand.nodes;
            self.evaluate(cand.t, cand.lower_bound, false)?;
            if self.closed() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Best-bound search over the master with cuts added as the search goes.
    /// Returns whether the gap closed.
    fn tree(&mut self) -> Result<bool, BendersError> {
        let n = self.master.num_t();
        let integer: Vec<usize> = (0..n).collect();
        let int_tol = self.milp_params.int_tol;
        let mut heap = BinaryHeap::new();
        heap.push(TreeNode {
            bound: self.lb,
            seq: 0,
            branches: Vec::new(),
            basis: None,
        });
        let mut seq = 1;
        let mut solved = 0;
        // Smallest bound among nodes closed by the gap test.
        let mut pruned = f64::INFINITY;
        let mut base = None;

        while let Some(node) = heap.pop() {
            let open = node.bound.min(pruned);
            self.lb = self.lb.max(open.min(self.ub));
            if self.closed() {
                return Ok(true);
            }
            if relative_gap(self.ub, node.bound) <= self.params.gap_tol {
                pruned = pruned.min(node.bound);
                continue;
            }
            if solved >= self.params.node_limit {
                return Err(BendersError::MasterNodeLimit(solved));
            }
            solved += 1;
            self.nodes += 1;
            let layout = NodeLayout {
                cols: n + 1,
                cuts: self.master.cuts.len(),
                upper: n,
            };
            let start = node
                .basis
                .as_ref()
                .map(|b| layout.basis(&b.roles, b.cuts, b.branches, node.branches.len()));
            let (outcome, basis) = {
                let lp = self.node_base(&mut base).with_appended_rows(&node.branches);
                solve_lp_warm(&lp, &self.params.lp, start.as_deref())?
            };
            let sol = match outcome {
                LpOutcome::Optimal(sol) => sol,
                LpOutcome::Infeasible { .. } => continue,
                LpOutcome::Unbounded { .. } => return Err(MilpError::Unbounded.into()),
            };
            let basis = basis.map(|b| {
                Rc::new(NodeBasis {
                    roles: layout.roles(&b),
                    cuts: layout.cuts,
                    branches: node.branches.len(),
                })
            });
            let bound = sol.objective.max(node.bound);
            if relative_gap(self.ub, bound) <= self.params.gap_tol {
                pruned = pruned.min(bound);
                continue;
            }
            if let Some((j, v)) = branching_column(&sol.x, &integer, int_tol) {
                for row in [
                    (RowSense::Le, v.floor(), vec![(j, 1.0)]),
                    (RowSense::Le, -v.ceil(), vec![(j, -1.0)]),
                ] {
                    let mut branches = node.branches.clone();
                    branches.push(row);
                    heap.push(TreeNode {
                        bound,
                        seq,
                        branches,
                        basis: basis.clone(),
                    });
                    seq += 1;
                }
                continue;
            }
            let t: Vec<f64> = sol.x[..n].iter().map(|v| v.round()).collect();
            let q = sol.x[n];
            let cut_off = match self.evaluated.get(&schedule_key(&t)) {
                // Its cut is already in the master, so the node is exact.
                Some(_) => false,
                None => {
                    if self.out_of_iterations() {
                        return Ok(false);
                    }
                    let lower = heap
                        .peek()
                        .map_or(bound, |top| top.bound.min(bound))
                        .min(pruned);
                    match self.evaluate(t, lower, false)? {
                        Some(total) => {
                            let value = total
                                - self
                                    .master
                                    .h_costs
                                    .iter()
                                    .zip(&sol.x[..n])
                                    .map(|(c, t)| c * t.round())
                                    .sum::<f64>();
                            value > q + 1e-9 * (1.0 + value.abs())
                        }
                        None => true,
                    }
                }
            };
            if cut_off {
                heap.push(TreeNode {
                    bound,
                    seq,
                    branches: node.branches,
                    basis,
                });
                seq += 1;
            }
        }
        // Every node is closed: the incumbent is optimal up to `gap_tol`.
        self.lb = self.lb.max(pruned.min(self.ub));
        Ok(self.best.is_some()
            && relative_gap(self.ub, self.lb) <= self.params.tol.max(self.params.gap_tol))
    }
}

/// Validates routes, builds the model and runs the decomposition.
pub fn run_benders(
    instance: &Instance,
    mode: DeliveryMode,
    params: &BendersParams,
) -> Result<BendersResult, BendersError> {
    let model = build_for(instance, mode)?;
    run_benders_on(&model, params)
}

fn build_for(instance: &Instance, mode: DeliveryMode) -> Result<MipModel, BendersError> {
    let routes = validate_routes(instance);
    if !routes.feasible() {
        let first = &routes.issues[0];
        return Err(BendersError::Infeasible(format!(
            "{} pickup(s) cannot be routed, first: product {} from {} on day {} ({:?})",
            routes.issues.len(),
            first.product,
            first.supplier,
            first.day,
            first.issue
        )));
    }
    Ok(build_mip(instance, mode)?)
}

/// LP optimum of the model with continuous container counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Relaxation {
    pub objective: f64,
    pub solution: Vec<f64>,
    pub breakdown: CostBreakdown,
}

pub fn lp_relaxation_on(model: &MipModel, params: &LpParams) -> Result<Relaxation, BendersError> {
    match solve_lp(&model.lp, params)? {
        LpOutcome::Optimal(sol) => Ok(Relaxation {
            objective: sol.objective,
            breakdown: objective_breakdown(model, &sol.x)?,
            solution: sol.x,
        }),
        LpOutcome::Infeasible { .. } => {
            Err(BendersError::Infeasible("relaxation is infeasible".into()))
        }
        LpOutcome::Unbounded { .. } => Err(BendersError::SubproblemUnbounded),
    }
}

pub fn lp_relaxation(instance: &Instance, mode: DeliveryMode) -> Result<Relaxation, BendersError> {
    lp_relaxation_on(&build_for(instance, mode)?, &LpParams::default())
}

/// Sum of all `T` in a Benders result, i.e. containers shipped.
pub fn container_count(model: &MipModel, solution: &[f64]) -> f64 {
    model.integer_columns().map(|j| solution[j]).sum()
}

/// Column of `T[h, d]` relative to the start of the `T` block, the index
/// used by master vectors.
pub fn t_position(model: &MipModel, h: usize, d: usize) -> usize {
    model.column(&VarKey::T { h, d }).expect("T in range") - model.integer_columns().start
}
