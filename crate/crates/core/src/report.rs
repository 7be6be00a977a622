//! Cost tables, delivery-day histograms and solution files.
//!
//! Every figure here is a pure function of an [`Instance`], a delivery mode and
//! a column vector, so anything printed by the command line can be recomputed
//! from a saved [`SolutionFile`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::model::{
    arrivals, check_solution, objective_breakdown, CostBreakdown, DeliveryMode, MipModel,
    ModelError, VarKey, VarKind,
};

/// Weight below this is treated as rounding noise when matching flows.
const DUST: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solution violates the model by {violation:.3e} (tolerance {tol:.3e})")]
    Infeasible { violation: f64, tol: f64 },
    #[error("product {product}: {weight:.6} lb picked up on day {pickup} delivered after {lag} days, past the {window}-day window")]
    LateDelivery {
        product: usize,
        pickup: usize,
        lag: usize,
        window: usize,
        weight: f64,
    },
    #[error("product {product}: {weight:.6} lb arrives without a matching pickup")]
    Unmatched { product: usize, weight: f64 },
    #[error("solution file: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One line of a scenario comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub label: String,
    /// Containers dispatched; fractional for relaxations.
    pub containers: f64,
    pub pickup_fixed: f64,
    pub first_leg: f64,
    pub lcl: f64,
    pub hold: f64,
    pub fcl: f64,
    /// `pickup_fixed + first_leg + lcl + hold + fcl`.
    pub total: f64,
    /// Share of `total` spent before the gateway (fixed pickups plus first leg).
    pub first_stage_share: f64,
    /// Share of delivered weight that travels in containers, if anything is delivered.
    pub consolidation_share: Option<f64>,
}

impl ScenarioRow {
    pub fn from_solution(
        label: impl Into<String>,
        model: &MipModel,
        solution: &[f64],
    ) -> Result<Self, ReportError> {
        let costs = objective_breakdown(model, solution)?;
        let containers = model
            .dims
            .block(VarKind::T)
            .map(|j| solution[j])
            .sum::<f64>();
        Ok(Self::from_costs(
            label,
            &costs,
            containers,
            consolidation_share(model, solution),
        ))
    }

    pub fn from_costs(
        label: impl Into<String>,
        costs: &CostBreakdown,
        containers: f64,
        consolidation_share: Option<f64>,
    ) -> Self {
        let total = costs.pickup_fixed + costs.first_leg + costs.lcl + costs.hold + costs.fcl;
        let first_stage_share = if total > 0.0 {
            (costs.pickup_fixed + costs.first_leg) / total
        } else {
            0.0
        };
        ScenarioRow {
            label: label.into(),
            containers,
            pickup_fixed: costs.pickup_fixed,
            first_leg: costs.first_leg,
            lcl: costs.lcl,
            hold: costs.hold,
            fcl: costs.fcl,
            total,
            first_stage_share,
            consolidation_share,
        }
    }
}

/// Rows of a scenario comparison, in the order they were run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub rows: Vec<ScenarioRow>,
}

const COLUMNS: [&str; 10] = [
    "scenario",
    "containers",
    "pickup_fixed",
    "first_leg",
    "lcl",
    "hold",
    "fcl",
    "total",
    "first_stage_share",
    "fcl_weight_share",
];

impl ScenarioReport {
    pub fn push(&mut self, row: ScenarioRow) {
        self.rows.push(row);
    }

    fn cells(row: &ScenarioRow) -> [String; 10] {
        [
            row.label.clone(),
            format!("{:.4}", row.containers),
            format!("{:.2}", row.pickup_fixed),
            format!("{:.2}", row.first_leg),
            format!("{:.2}", row.lcl),
            format!("{:.2}", row.hold),
            format!("{:.2}", row.fcl),
            format!("{:.2}", row.total),
            format!("{:.4}", row.first_stage_share),
            row.consolidation_share
                .map(|s| format!("{s:.4}"))
                .unwrap_or_default(),
        ]
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for row in &self.rows {
            w.write_record(Self::cells(row))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Right-aligned plain-text table.
    pub fn to_table(&self) -> String {
        let body: Vec<[String; 10]> = self.rows.iter().map(Self::cells).collect();
        let mut widths = COLUMNS.map(str::len);
        for cells in &body {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&COLUMNS.map(String::from));
        for cells in &body {
            line(cells);
        }
        out
    }
}

/// One bin of a delivery-day histogram.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    pub weight: f64,
    /// Distinct products with freight in this bin.
    pub products: usize,
}

/// Delivered weight by days between pickup and arrival at the customer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryHistogram {
    /// Indexed by lag, `0..=window_days`.
    pub bins: Vec<LagBin>,
}

impl DeliveryHistogram {
    pub fn total_weight(&self) -> f64 {
        self.bins.iter().map(|b| b.weight).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(|b| b.weight == 0.0)
    }

    /// Smallest and largest lag carrying weight.
    pub fn support(&self) -> Option<(usize, usize)> {
        let mut lags = self
            .bins
            .iter()
            .enumerate()
            .filter(|(_, b)| b.weight > 0.0)
            .map(|(i, _)| i);
        let first = lags.next()?;
        Some((first, lags.next_back().unwrap_or(first)))
    }

    /// Fraction of delivered weight at `lag`.
    pub fn share(&self, lag: usize) -> Option<f64> {
        let total = self.total_weight();
        (total > 0.0).then(|| self.bins.get(lag).map_or(0.0, |b| b.weight) / total)
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lag_days", "weight_lbs", "products"])?;
        for (lag, b) in self.bins.iter().enumerate() {
            w.write_record([
                lag.to_string(),
                format!("{:.6}", b.weight),
                b.products.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Bins delivered weight by lag, matching each product's arrivals to its
/// pickups first-in first-out.
///
/// Freight is fungible within a product once it reaches the customer, so the
/// FIFO matching is the natural reading of "which pickup was delivered when";
/// under the window constraints it never assigns a lag beyond `t_w`.
/// Container counts are not required to be integral, so relaxations can be
/// binned too; flow violations are rejected.
pub fn delivery_histogram(
    model: &MipModel,
    instance: &Instance,
    solution: &[f64],
) -> Result<DeliveryHistogram, ReportError> {
    let residuals = check_solution(model, solution);
    let max_weight = instance
        .pickups
        .iter()
        .map(|p| p.weight)
        .fold(0.0, f64::max);
    let tol = 1e-6 * (1.0 + max_weight);
    let violation = residuals
        .max_row()
        .max(residuals.negativity)
        .max(residuals.fixed_zero);
    if violation > tol {
        return Err(ReportError::Infeasible { violation, tol });
    }

    let window = instance.window_days;
    let days = instance.horizon_days;
    let arrived = arrivals(model, instance, solution);
    let mut bins = vec![LagBin::default(); window + 1];
    let mut seen = vec![vec![false; window + 1]; instance.num_products()];

    for (p, by_day) in arrived.iter().enumerate() {
        let mut picked = vec![0.0; days];
        for pk in instance.pickups.iter().filter(|pk| pk.product == p) {
            picked[pk.day] += pk.weight;
        }
        let mut queue = picked
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(d, &w)| (d, w));
        let mut head: Option<(usize, f64)> = queue.next();
        for (day, &amount) in by_day.iter().enumerate() {
            let mut left = amount;
            while left > DUST {
                let Some((pickup, remaining)) = head.as_mut() else {
                    return Err(ReportError::Unmatched {
                        product: p,
                        weight: left,
                    });
                };
                let take = left.min(*remaining);
                let lag = day.saturating_sub(*pickup);
                if lag > window {
                    return Err(ReportError::LateDelivery {
                        product: p,
                        pickup: *pickup,
                        lag,
                        window,
                        weight: take,
                    });
                }
                bins[lag].weight += take;
                seen[p][lag] = true;
                left -= take;
                *remaining -= take;
                if *remaining <= DUST {
                    head = queue.next();
                }
            }
        }
    }
    for (lag, bin) in bins.iter_mut().enumerate() {
        bin.products = seen.iter().filter(|s| s[lag]).count();
    }
    Ok(DeliveryHistogram { bins })
}

/// Weight loaded into containers over all weight leaving the gateways;
/// `None` when nothing leaves.
pub fn consolidation_share(model: &MipModel, solution: &[f64]) -> Option<f64> {
    let sum = |kind| -> f64 {
        model
            .dims
            .block(kind)
            .filter(|&j| !model.fixed_zero[j])
            .map(|j| solution[j].max(0.0))
            .sum()
    };
    let fcl = sum(VarKind::U);
    let total = fcl + sum(VarKind::Z);
    (total > DUST).then(|| fcl / total)
}

/// A solved scenario on disk: the instance, the delivery mode and the nonzero
/// column values keyed by their printed [`VarKey`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub label: String,
    pub mode: DeliveryMode,
    pub objective: f64,
    pub instance: Instance,
    pub values: BTreeMap<String, f64>,
}

impl SolutionFile {
    pub fn new(
        label: impl Into<String>,
        instance: &Instance,
        model: &MipModel,
        solution: &[f64],
        objective: f64,
    ) -> Self {
        let values = solution
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (model.key(j).to_string(), v))
            .collect();
        SolutionFile {
            label: label.into(),
            mode: model.mode,
            objective,
            instance: instance.clone(),
            values,
        }
    }

    /// Expands the stored values into a column vector for `model`.
    pub fn column_values(&self, model: &MipModel) -> Result<Vec<f64>, ReportError> {
        let mut x = vec![0.0; model.num_cols()];
        for (name, &v) in &self.values {
            let key: VarKey = name
                .parse()
                .map_err(|e: crate::model::ParseKeyError| ReportError::File(e.to_string()))?;
            let j = model
                .column(&key)
                .ok_or_else(|| ReportError::File(format!("{name} is not a column of the model")))?;
            x[j] = v;
        }
        Ok(x)
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), ReportError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ReportError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests;
