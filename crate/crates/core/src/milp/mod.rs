//! Best-bound branch-and-bound over the simplex solver.
//!
//! Branching decisions are added to the node LP as extra rows (`x <= v` or
//! `-x <= -v`), so every node is a plain [`LpProblem`] solved from scratch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

use crate::model::MipModel;
use crate::simplex::{solve_lp, LpError, LpOutcome, LpParams, LpProblem, RowSense};

/// An LP over nonnegative columns with integrality on some of them.
#[derive(Clone, Debug, PartialEq)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub integer: Vec<usize>,
    /// Upper bounds `(column, value)`; enforced as rows.
    pub upper: Vec<(usize, f64)>,
    /// Optional known solution used as the first incumbent. Ignored unless it
    /// is integral and feasible.
    pub start: Option<Vec<f64>>,
}

impl MilpProblem {
    /// The monolithic problem of a model; container counts are bounded by
    /// the number of containers needed to carry all freight.
    pub fn from_model(model: &MipModel) -> Self {
        let integer: Vec<usize> = model.integer_columns().collect();
        let upper = integer
            .iter()
            .map(|&j| (j, model.container_bound))
            .collect();
        MilpProblem {
            lp: model.lp.clone(),
            integer,
            upper,
            start: None,
        }
    }

    /// Whether `x` satisfies every row, bound and integrality within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.lp.num_cols() || x.iter().any(|v| !(*v >= -tol)) {
            return false;
        }
        if self
            .integer
            .iter()
            .any(|&j| (x[j] - x[j].round()).abs() > tol)
        {
            return false;
        }
        if self.upper.iter().any(|&(j, u)| x[j] > u + tol) {
            return false;
        }
        let act = self.lp.row_activity(x);
        act.iter()
            .zip(self.lp.rhs())
            .zip(self.lp.senses())
            .all(|((a, b), sense)| {
                let slack = tol * (1.0 + b.abs());
                match sense {
                    RowSense::Le => *a <= b + slack,
                    RowSense::Eq => (a - b).abs() <= slack,
                }
            })
    }

    fn root(&self) -> LpProblem {
        let rows: Vec<_> = self
            .upper
            .iter()
            .map(|&(j, u)| (RowSense::Le, u, vec![(j, 1.0)]))
            .collect();
        self.lp.with_appended_rows(&rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpParams {
    /// Stop once `(UB - LB) / (1 + |UB|)` falls to this value.
    pub gap_tol: f64,
    /// Maximum number of node LPs solved.
    pub node_limit: usize,
    /// Distance from an integer below which a value counts as integral.
    pub int_tol: f64,
    pub lp: LpParams,
    /// Record a node log.
    pub log: bool,
}

impl Default for MilpParams {
    fn default() -> Self {
        MilpParams {
            gap_tol: 1e-9,
            node_limit: 100_000,
            int_tol: 1e-6,
            lp: LpParams::default(),
            log: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Node limit reached; the incumbent (if any) is not proven optimal.
    NodeLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeLogEntry {
    pub node: usize,
    pub depth: usize,
    pub bound: f64,
    /// Incumbent objective after the node was processed (`inf` if none).
    pub incumbent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Incumbent objective, `+inf` when there is none.
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub gap: f64,
    /// Node LPs solved.
    pub nodes: usize,
    /// Objective of the root relaxation.
    pub root_bound: f64,
    pub log: Vec<NodeLogEntry>,
}

impl MilpOutcome {
    /// Node log as CSV: `node,depth,bound,incumbent`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("node,depth,bound,incumbent\n");
        for e in &self.log {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.node, e.depth, e.bound, e.incumbent
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("relaxation is unbounded")]
    Unbounded,
}

/// `(UB - LB) / (1 + |UB|)`, zero when the bounds have crossed.
pub fn relative_gap(upper: f64, lower: f64) -> f64 {
    if upper.is_infinite() {
        return f64::INFINITY;
    }
    ((upper - lower) / (1.0 + upper.abs())).max(0.0)
}

struct Node {
    bound: f64,
    seq: usize,
    depth: usize,
    branches: Vec<(RowSense, f64, Vec<(usize, f64)>)>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node,
    // must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

enum NodeLp {
    Solved { objective: f64, x: Vec<f64> },
    Infeasible,
}

fn solve_node(
    root: &LpProblem,
    branches: &[(RowSense, f64, Vec<(usize, f64)>)],
    params: &LpParams,
) -> Result<NodeLp, MilpError> {
    let lp = if branches.is_empty() {
        root.clone()
    } else {
        root.with_appended_rows(branches)
    };
    match solve_lp(&lp, params)? {
        LpOutcome::Optimal(sol) => Ok(NodeLp::Solved {
            objective: sol.objective,
            x: sol.x,
        }),
        LpOutcome::Infeasible { .. } => Ok(NodeLp::Infeasible),
        LpOutcome::Unbounded { .. } => Err(MilpError::Unbounded),
    }
}

/// Most fractional integer column, ties to the lowest index.
pub(crate) fn branching_column(x: &[f64], integer: &[usize], int_tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &j in integer {
        let v = x[j];
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac <= int_tol {
            continue;
        }
        match best {
            Some((bj, _, bf)) if frac < bf || (frac == bf && j > bj) => {}
            _ => best = Some((j, v, frac)),
        }
    }
    best.map(|(j, v, _)| (j, v))
}

/// Solves `problem` to `gap_tol`, or reports the best incumbent when the node
/// limit is hit. Deterministic for fixed inputs.
pub fn solve_milp(problem: &MilpProblem, params: &MilpParams) -> Result<MilpOutcome, MilpError> {
    let root = problem.root();
    let mut nodes = 0;
    let mut log = Vec::new();
    let mut seq = 0;

    let (root_bound, root_x) = match solve_node(&root, &[], &params.lp)? {
        NodeLp::Solved { objective, x } => (objective, x),
        NodeLp::Infeasible => {
            return Ok(MilpOutcome {
                status: MilpStatus::Infeasible,
                incumbent: None,
                objective: f64::INFINITY,
                bound: f64::INFINITY,
                gap: f64::INFINITY,
                nodes: 1,
                root_bound: f64::INFINITY,
                log,
            })
        }
    };
    nodes += 1;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: root_bound,
        seq,
        depth: 0,
        branches: Vec::new(),
        x: root_x,
    });
    seq += 1;

    let mut incumbent: Option<Vec<f64>> = None;
    let mut best = f64::INFINITY;
    if let Some(start) = problem
        .start
        .as_ref()
        .filter(|x| problem.is_feasible(x, 1e-9))
    {
        best = problem.lp.objective_value(start);
        incumbent = Some(start.clone());
    }
    let mut status = MilpStatus::Optimal;
    // Smallest bound among nodes discarded by the gap test.
    let mut pruned = f64::INFINITY;

    while let Some(node) = heap.pop() {
        if relative_gap(best, node.bound) <= params.gap_tol {
            // Best-first: every open node is at least as bad.
            pruned = pruned.min(node.bound);
            heap.clear();
            break;
        }
        match branching_column(&node.x, &problem.integer, params.int_tol) {
            None => {
                let (obj, x) = polish(&root, &node, &problem.integer, &params.lp)?;
                if obj < best - 1e-12 {
                    best = obj;
                    incumbent = Some(x);
                }
                if params.log {
                    log.push(NodeLogEntry {
                        node: node.seq,
                        depth: node.depth,
                        bound: node.bound,
                        incumbent: best,
                    });
                }
            }
            Some((j, v)) => {
                if params.log {
                    log.push(NodeLogEntry {
                        node: node.seq,
                        depth: node.depth,
                        bound: node.bound,
                        incumbent: best,
                    });
                }
                let children = [
                    (RowSense::Le, v.floor(), vec![(j, 1.0)]),
                    (RowSense::Le, -v.ceil(), vec![(j, -1.0)]),
                ];
                for child in children {
                    if nodes >= params.node_limit {
                        status = MilpStatus::NodeLimit;
                        break;
                    }
                    let mut branches = node.branches.clone();
                    branches.push(child);
                    nodes += 1;
                    if let NodeLp::Solved { objective, x } =
                        solve_node(&root, &branches, &params.lp)?
                    {
                        if relative_gap(best, objective) <= params.gap_tol {
                            pruned = pruned.min(objective);
                        } else {
                            heap.push(Node {
                                bound: objective.max(node.bound),
                                seq,
                                depth: node.depth + 1,
                                branches,
                                x,
                            });
                        }
                    }
                    seq += 1;
                }
                if status == MilpStatus::NodeLimit {
                    heap.push(node);
                    break;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let bound = open_bound.min(pruned).min(best).max(root_bound);
    if incumbent.is_none() && status == MilpStatus::Optimal {
        status = MilpStatus::Infeasible;
    }
    Ok(MilpOutcome {
        status,
        gap: relative_gap(best, bound),
        incumbent,
        objective: best,
        bound,
        nodes,
        root_bound,
        log,
    })
}

/// Re-solves an integral node with its integer columns pinned to their
/// rounded values so that continuous columns are consistent to full
/// precision.
fn polish(
    root: &LpProblem,
    node: &Node,
    integer: &[usize],
    params: &LpParams,
) -> Result<(f64, Vec<f64>), MilpError> {
    let mut rows = node.branches.clone();
    for &j in integer {
        rows.push((RowSense::Eq, node.x[j].round(), vec![(j, 1.0)]));
    }
    match solve_node(root, &rows, params)? {
        NodeLp::Solved { objective, mut x } => {
            for &j in integer {
                x[j] = x[j].round();
            }
            Ok((objective, x))
        }
        NodeLp::Infeasible => Ok((node.bound, node.x.clone())),
    }
}

#[cfg(test)]
mod tests;
