//! Assembly of the time-expanded consolidation MIP.
//!
//! Every pickup `(p, s, d)` leaves its supplier on day `d` by land (`X`) or
//! air (`Y`) towards some gateway. At the gateway freight is either held
//! (`I`), shipped LCL (`Z`) or loaded into containers (`U`, paid for per
//! container through `T`). Arrivals at the customer must cover every pickup
//! by its due day; in window mode freight may arrive early and wait (`N`).

mod keys;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{validate_routes, Instance, Mode, RouteDiagnostics};
use crate::simplex::{LpProblem, RowSense};

pub use keys::{Dims, ParseKeyError, VarKey, VarKind};

/// Whether freight may reach the customer before its due day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeliveryMode {
    /// Delivery on any day up to `pickup day + window`.
    Window,
    /// Delivery exactly `window` days after pickup.
    ExactDay,
}

impl DeliveryMode {
    pub fn label(&self) -> &'static str {
        match self {
            DeliveryMode::Window => "window",
            DeliveryMode::ExactDay => "exact-day",
        }
    }
}

/// Constraint family of a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowTag {
    Pickup,
    Capacity,
    GatewayBalance,
    /// Customer balance on a day at or past the window length.
    CustomerLate,
    /// Customer balance on a day before the first possible due day.
    CustomerEarly,
}

impl RowTag {
    pub const ALL: [RowTag; 5] = [
        RowTag::Pickup,
        RowTag::Capacity,
        RowTag::GatewayBalance,
        RowTag::CustomerLate,
        RowTag::CustomerEarly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            RowTag::Pickup => "pickup",
            RowTag::Capacity => "capacity",
            RowTag::GatewayBalance => "gateway_balance",
            RowTag::CustomerLate => "customer_balance_late",
            RowTag::CustomerEarly => "customer_balance_early",
        }
    }
}

/// Identifies one row of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowKey {
    Pickup { p: usize, s: usize, d: usize },
    Capacity { h: usize, d: usize },
    Gateway { p: usize, h: usize, d: usize },
    Customer { p: usize, d: usize },
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            RowKey::Pickup { p, s, d } => write!(f, "pickup[{p},{s},{d}]"),
            RowKey::Capacity { h, d } => write!(f, "capacity[{h},{d}]"),
            RowKey::Gateway { p, h, d } => write!(f, "gateway[{p},{h},{d}]"),
            RowKey::Customer { p, d } => write!(f, "customer[{p},{d}]"),
        }
    }
}

/// Which objective component a column is charged to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostClass {
    /// `f`: first-leg transport (X, Y).
    FirstLeg,
    /// `g`: LCL shipping and gateway holding (Z, I).
    LclAndHold,
    /// `h`: containers (T).
    Fcl,
    /// Unpriced bookkeeping columns (U, N).
    Free,
}

impl CostClass {
    pub fn of(kind: VarKind) -> Self {
        match kind {
            VarKind::X | VarKind::Y => CostClass::FirstLeg,
            VarKind::Z | VarKind::I => CostClass::LclAndHold,
            VarKind::T => CostClass::Fcl,
            VarKind::U | VarKind::N => CostClass::Free,
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{} of {} pickups have no route inside the window and horizon", .0.issues.len(), .0.checked)]
    Routes(RouteDiagnostics),
    #[error("solution has {got} entries, model has {expected} columns")]
    LengthMismatch { expected: usize, got: usize },
}

/// The assembled MIP: an LP over nonnegative columns plus integrality on
/// the container counts.
#[derive(Clone, Debug, PartialEq)]
pub struct MipModel {
    pub mode: DeliveryMode,
    pub dims: Dims,
    pub lp: LpProblem,
    pub row_keys: Vec<RowKey>,
    /// Columns that no row references: flows that would leave the horizon,
    /// and the terminal gateway/customer stocks. They must stay at zero.
    pub fixed_zero: Vec<bool>,
    pub window_days: usize,
    pub container_capacity: f64,
    /// Implied upper bound on every container count.
    pub container_bound: f64,
    /// Charge added outside the optimization for every pickup that carries
    /// freight.
    pub pickup_fixed_total: f64,
}

impl MipModel {
    pub fn num_cols(&self) -> usize {
        self.lp.num_cols()
    }

    pub fn num_rows(&self) -> usize {
        self.lp.num_rows()
    }

    pub fn key(&self, col: usize) -> VarKey {
        self.dims.key(col)
    }

    pub fn column(&self, key: &VarKey) -> Option<usize> {
        self.dims.column(key)
    }

    pub fn row_tag(&self, row: usize) -> RowTag {
        match self.row_keys[row] {
            RowKey::Pickup { .. } => RowTag::Pickup,
            RowKey::Capacity { .. } => RowTag::Capacity,
            RowKey::Gateway { .. } => RowTag::GatewayBalance,
            RowKey::Customer { .. } => {
                if self.is_late_customer_row(row) {
                    RowTag::CustomerLate
                } else {
                    RowTag::CustomerEarly
                }
            }
        }
    }

    fn is_late_customer_row(&self, row: usize) -> bool {
        match self.row_keys[row] {
            RowKey::Customer { d, .. } => d >= self.window_days,
            _ => false,
        }
    }

    /// The integer columns: exactly the container counts.
    pub fn integer_columns(&self) -> std::ops::Range<usize> {
        self.dims.block(VarKind::T)
    }

    pub fn cost_class(&self, col: usize) -> CostClass {
        CostClass::of(self.key(col).kind())
    }

    /// Row index of the capacity row of `(h, d)`.
    pub fn capacity_row(&self, h: usize, d: usize) -> usize {
        let dims = &self.dims;
        dims.products * dims.suppliers * dims.days + h * dims.days + d
    }

    /// Rows per family, in [`RowTag::ALL`] order.
    pub fn row_tally(&self) -> [usize; 5] {
        let mut out = [0; 5];
        for r in 0..self.num_rows() {
            let i = RowTag::ALL
                .iter()
                .position(|t| *t == self.row_tag(r))
                .unwrap();
            out[i] += 1;
        }
        out
    }

    /// Plain-text sparse listing: objective, then one line per row with its
    /// tag, key, sense, rhs and `column:coefficient` pairs.
    pub fn dump(&self) -> String {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_rows()];
        for j in 0..self.num_cols() {
            let (idx, val) = self.lp.column(j);
            for (&r, &v) in idx.iter().zip(val) {
                rows[r].push((j, v));
            }
        }
        let mut out = String::from("objective");
        for (j, c) in self.lp.objective().iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {}:{}", self.key(j), c);
            }
        }
        out.push('\n');
        for (r, row) in rows.iter().enumerate() {
            let _ = write!(
                out,
                "{} {} {} {}",
                self.row_tag(r).label(),
                self.row_keys[r],
                self.lp.senses()[r],
                self.lp.rhs()[r]
            );
            for (j, v) in row {
                let _ = write!(out, " {}:{}", self.key(*j), v);
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "integer {}",
            self.integer_columns()
                .map(|j| self.key(j).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        );
        out
    }
}

/// Builds the model for `instance`. Fails when some pickup has no route that
/// fits the window and horizon.
pub fn build_mip(instance: &Instance, mode: DeliveryMode) -> Result<MipModel, ModelError> {
    let routes = validate_routes(instance);
    if !routes.feasible() {
        return Err(ModelError::Routes(routes));
    }
    Ok(build_mip_unchecked(instance, mode))
}

/// [`build_mip`] without the route check; the model of an unroutable
/// instance is simply infeasible.
pub fn build_mip_unchecked(instance: &Instance, mode: DeliveryMode) -> MipModel {
    let (np, ns, nh, nd) = (
        instance.num_products(),
        instance.num_suppliers(),
        instance.num_gateways(),
        instance.horizon_days,
    );
    let dims = Dims {
        products: np,
        suppliers: ns,
        gateways: nh,
        days: nd,
        with_early_stock: mode == DeliveryMode::Window,
    };
    let k = instance.container_capacity;

    let pickup_row = |p: usize, s: usize, d: usize| (p * ns + s) * nd + d;
    let cap_base = np * ns * nd;
    let capacity_row = |h: usize, d: usize| cap_base + h * nd + d;
    let gw_base = cap_base + nh * nd;
    let gateway_row = |p: usize, h: usize, d: usize| gw_base + (p * nh + h) * nd + d;
    let cust_base = gw_base + np * nh * nd;
    let customer_row = |p: usize, d: usize| cust_base + p * nd + d;

    let mut row_keys = Vec::with_capacity(dims.num_rows());
    let mut senses = Vec::with_capacity(dims.num_rows());
    let mut rhs = Vec::with_capacity(dims.num_rows());
    for p in 0..np {
        for s in 0..ns {
            for d in 0..nd {
                row_keys.push(RowKey::Pickup { p, s, d });
                senses.push(RowSense::Eq);
                rhs.push(0.0);
            }
        }
    }
    for h in 0..nh {
        for d in 0..nd {
            row_keys.push(RowKey::Capacity { h, d });
            senses.push(RowSense::Le);
            rhs.push(0.0);
        }
    }
    for p in 0..np {
        for h in 0..nh {
            for d in 0..nd {
                row_keys.push(RowKey::Gateway { p, h, d });
                senses.push(RowSense::Eq);
                rhs.push(0.0);
            }
        }
    }
    for p in 0..np {
        for d in 0..nd {
            row_keys.push(RowKey::Customer { p, d });
            senses.push(RowSense::Eq);
            rhs.push(0.0);
        }
    }
    for pk in &instance.pickups {
        rhs[pickup_row(pk.product, pk.supplier, pk.day)] = pk.weight;
        rhs[customer_row(pk.product, instance.due_day(pk.day))] += pk.weight;
    }

    let mut lp = LpProblem::with_rows(senses, rhs);
    let mut fixed_zero = Vec::with_capacity(dims.num_cols());
    let mut push = |lp: &mut LpProblem, cost: f64, entries: &[(usize, f64)], live: bool| {
        if live {
            lp.add_column(cost, entries.iter().copied());
        } else {
            lp.add_column(cost, std::iter::empty());
        }
        fixed_zero.push(!live);
    };

    for mode_ in [Mode::Land, Mode::Air] {
        for p in 0..np {
            for s in 0..ns {
                for h in 0..nh {
                    let lane = instance.lane(s, h, mode_);
                    for d in 0..nd {
                        let arrive = d + lane.transit_days;
                        let live = arrive < nd;
                        let entries = if live {
                            [
                                (pickup_row(p, s, d), 1.0),
                                (gateway_row(p, h, arrive), -1.0),
                            ]
                        } else {
                            [(0, 0.0); 2]
                        };
                        push(&mut lp, lane.cost_per_lb, &entries, live);
                    }
                }
            }
        }
    }
    // Z then U: outbound from the gateway, arriving t2 days later.
    for with_container in [false, true] {
        for p in 0..np {
            for h in 0..nh {
                let t2 = instance.second_leg_time(h);
                let cost = if with_container {
                    0.0
                } else {
                    instance.lcl_cost(h)
                };
                for d in 0..nd {
                    let live = d + t2 < nd;
                    let mut entries = Vec::with_capacity(3);
                    if live {
                        entries.push((gateway_row(p, h, d), 1.0));
                        entries.push((customer_row(p, d + t2), 1.0));
                        if with_container {
                            entries.push((capacity_row(h, d), 1.0));
                        }
                    }
                    push(&mut lp, cost, &entries, live);
                }
            }
        }
    }
    for p in 0..np {
        for h in 0..nh {
            for d in 0..nd {
                let live = d + 1 < nd;
                let entries = if live {
                    vec![
                        (gateway_row(p, h, d), 1.0),
                        (gateway_row(p, h, d + 1), -1.0),
                    ]
                } else {
                    Vec::new()
                };
                push(&mut lp, instance.hold_cost(h), &entries, live);
            }
        }
    }
    for h in 0..nh {
        for d in 0..nd {
            push(
                &mut lp,
                instance.fcl_cost(h),
                &[(capacity_row(h, d), -k)],
                true,
            );
        }
    }
    if dims.with_early_stock {
        for p in 0..np {
            for d in 0..nd {
                let live = d + 1 < nd;
                let entries = if live {
                    vec![(customer_row(p, d), -1.0), (customer_row(p, d + 1), 1.0)]
                } else {
                    Vec::new()
                };
                push(&mut lp, 0.0, &entries, live);
            }
        }
    }
    debug_assert_eq!(lp.num_cols(), dims.num_cols());

    let container_bound = if k > 0.0 {
        (instance.total_weight() / k).ceil()
    } else {
        0.0
    };
    MipModel {
        mode,
        dims,
        lp,
        row_keys,
        fixed_zero,
        window_days: instance.window_days,
        container_capacity: k,
        container_bound,
        pickup_fixed_total: instance.pickup_fixed_cost * instance.pickup_events() as f64,
    }
}

/// Objective split into its components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// First-leg transport.
    pub first_leg: f64,
    /// LCL shipping plus gateway holding.
    pub lcl_and_hold: f64,
    pub lcl: f64,
    pub hold: f64,
    /// Container charges.
    pub fcl: f64,
    /// `first_leg + lcl_and_hold + fcl`: the optimized objective.
    pub total: f64,
    /// Fixed pickup charges, reported outside the objective.
    pub pickup_fixed: f64,
}

impl CostBreakdown {
    /// Objective plus fixed pickup charges.
    pub fn grand_total(&self) -> f64 {
        self.total + self.pickup_fixed
    }
}

pub fn objective_breakdown(
    model: &MipModel,
    solution: &[f64],
) -> Result<CostBreakdown, ModelError> {
    check_len(model, solution)?;
    let mut b = CostBreakdown {
        pickup_fixed: model.pickup_fixed_total,
        ..CostBreakdown::default()
    };
    let c = model.lp.objective();
    for (j, (&cj, &xj)) in c.iter().zip(solution).enumerate() {
        let v = cj * xj;
        if v == 0.0 {
            continue;
        }
        match model.key(j).kind() {
            VarKind::X | VarKind::Y => b.first_leg += v,
            VarKind::Z => b.lcl += v,
            VarKind::I => b.hold += v,
            VarKind::T => b.fcl += v,
            VarKind::U | VarKind::N => {}
        }
    }
    b.lcl_and_hold = b.lcl + b.hold;
    b.total = b.first_leg + b.lcl_and_hold + b.fcl;
    Ok(b)
}

fn check_len(model: &MipModel, solution: &[f64]) -> Result<(), ModelError> {
    if solution.len() != model.num_cols() {
        return Err(ModelError::LengthMismatch {
            expected: model.num_cols(),
            got: solution.len(),
        });
    }
    Ok(())
}

/// Largest violations of a candidate solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Max absolute row violation per family, in [`RowTag::ALL`] order.
    pub rows: [f64; 5],
    /// Max distance of a container count from the nearest integer.
    pub integrality: f64,
    /// Max amount by which a column is negative.
    pub negativity: f64,
    /// Max absolute value of a column that must be zero.
    pub fixed_zero: f64,
}

impl ResidualReport {
    pub fn family(&self, tag: RowTag) -> f64 {
        self.rows[RowTag::ALL.iter().position(|t| *t == tag).unwrap()]
    }

    pub fn max_row(&self) -> f64 {
        self.rows.iter().copied().fold(0.0, f64::max)
    }

    pub fn worst(&self) -> f64 {
        self.max_row()
            .max(self.integrality)
            .max(self.negativity)
            .max(self.fixed_zero)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Measures residuals of `solution`. A vector of the wrong length is
/// reported as infinitely violated rather than as an error.
pub fn check_solution(model: &MipModel, solution: &[f64]) -> ResidualReport {
    if solution.len() != model.num_cols() {
        return ResidualReport {
            rows: [f64::INFINITY; 5],
            integrality: f64::INFINITY,
            negativity: f64::INFINITY,
            fixed_zero: f64::INFINITY,
        };
    }
    let act = model.lp.row_activity(solution);
    let mut rows = [0.0f64; 5];
    for (r, a) in act.iter().enumerate() {
        let b = model.lp.rhs()[r];
        let v = match model.lp.senses()[r] {
            RowSense::Eq => (a - b).abs(),
            RowSense::Le => (a - b).max(0.0),
        };
        let i = RowTag::ALL
            .iter()
            .position(|t| *t == model.row_tag(r))
            .unwrap();
        rows[i] = rows[i].max(v);
    }
    let integrality = model
        .integer_columns()
        .map(|j| (solution[j] - solution[j].round()).abs())
        .fold(0.0, f64::max);
    let negativity = solution.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    let fixed_zero = solution
        .iter()
        .zip(&model.fixed_zero)
        .filter(|(_, &f)| f)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    ResidualReport {
        rows,
        integrality,
        negativity,
        fixed_zero,
    }
}

/// Weight arriving at the customer per `(product, day)`, from the second-leg
/// columns of `solution`.
pub fn arrivals(model: &MipModel, instance: &Instance, solution: &[f64]) -> Vec<Vec<f64>> {
    let dims = &model.dims;
    let mut out = vec![vec![0.0; dims.days]; dims.products];
    for kind in [VarKind::Z, VarKind::U] {
        for j in dims.block(kind) {
            let v = solution[j];
            if v == 0.0 || model.fixed_zero[j] {
                continue;
            }
            if let VarKey::Z { p, h, d } | VarKey::U { p, h, d } = model.key(j) {
                out[p][d + instance.second_leg_time(h)] += v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
