//! Problem data: suppliers, gateways, the pickup schedule, first-leg lanes
//! and the second-leg tariff.

mod io;
mod synthetic;
mod zones;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_instance, save_instance, InstanceConfig, InstancePaths};
pub use synthetic::{generate_synthetic, GeneratorConfig};
pub use zones::{RateClass, ZoneTable};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}, row {row}: {message}")]
    Schema {
        file: String,
        row: usize,
        message: String,
    },
    #[error("invalid {field}: {message}")]
    Invariant { field: String, message: String },
    #[error("unknown zone {0}")]
    UnknownZone(String),
    #[error("unknown rate class {0}")]
    UnknownClass(String),
}

impl InstanceError {
    pub(crate) fn invariant(field: &str, message: impl Into<String>) -> Self {
        InstanceError::Invariant {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Supplier {
    pub id: String,
    pub zone: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gateway {
    pub id: String,
    pub zone: Option<String>,
    /// LCL tariff as published, currency per 100 lbs.
    pub lcl_rate_per_100lb: f64,
    pub fcl_rate_per_container: f64,
    pub transit_days_to_customer: usize,
    pub hold_cost_per_lb_day: f64,
}

/// One first-leg option between a supplier and a gateway.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub cost_per_lb: f64,
    pub transit_days: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Land,
    Air,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pickup {
    pub product: usize,
    pub supplier: usize,
    pub day: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub horizon_days: usize,
    pub window_days: usize,
    pub container_capacity: f64,
    pub pickup_fixed_cost: f64,
    pub air_cost_multiplier: f64,
    pub air_time_delta: usize,
    pub products: Vec<String>,
    pub suppliers: Vec<Supplier>,
    pub gateways: Vec<Gateway>,
    /// Sorted by (product, supplier, day), at most one entry per key.
    pub pickups: Vec<Pickup>,
    /// Indexed `s * |H| + h`.
    pub land: Vec<Lane>,
    pub air: Vec<Lane>,
}

impl Instance {
    pub fn num_products(&self) -> usize {
        self.products.len()
    }

    pub fn num_suppliers(&self) -> usize {
        self.suppliers.len()
    }

    pub fn num_gateways(&self) -> usize {
        self.gateways.len()
    }

    pub fn lane(&self, s: usize, h: usize, mode: Mode) -> Lane {
        let k = s * self.gateways.len() + h;
        match mode {
            Mode::Land => self.land[k],
            Mode::Air => self.air[k],
        }
    }

    pub fn lcl_cost(&self, h: usize) -> f64 {
        self.gateways[h].lcl_rate_per_100lb / 100.0
    }

    pub fn fcl_cost(&self, h: usize) -> f64 {
        self.gateways[h].fcl_rate_per_container
    }

    pub fn hold_cost(&self, h: usize) -> f64 {
        self.gateways[h].hold_cost_per_lb_day
    }

    pub fn second_leg_time(&self, h: usize) -> usize {
        self.gateways[h].transit_days_to_customer
    }

    pub fn demand(&self, p: usize, s: usize, d: usize) -> f64 {
        self.pickups
            .binary_search_by(|pk| (pk.product, pk.supplier, pk.day).cmp(&(p, s, d)))
            .map(|i| self.pickups[i].weight)
            .unwrap_or(0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.pickups.iter().map(|p| p.weight).sum()
    }

    /// Pickup events that carry freight; each one incurs the fixed pickup charge.
    pub fn pickup_events(&self) -> usize {
        self.pickups.iter().filter(|p| p.weight > 0.0).count()
    }

    /// Day by which freight picked up on `day` must be at the customer.
    /// Deadlines past the horizon are pulled back to its last day.
    pub fn due_day(&self, day: usize) -> usize {
        (day + self.window_days).min(self.horizon_days - 1)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        use InstanceError as E;
        if self.horizon_days < 1 {
            return Err(E::invariant("horizon_days", "must be at least 1"));
        }
        if self.window_days < 1 {
            return Err(E::invariant("window_days", "must be at least 1"));
        }
        if !(self.container_capacity.is_finite() && self.container_capacity >= 0.0) {
            return Err(E::invariant(
                "container_capacity",
                "must be finite and nonnegative",
            ));
        }
        if !(self.pickup_fixed_cost.is_finite() && self.pickup_fixed_cost >= 0.0) {
            return Err(E::invariant(
                "pickup_fixed_cost",
                "must be finite and nonnegative",
            ));
        }
        if self.gateways.is_empty() {
            return Err(E::invariant("gateways", "at least one gateway is required"));
        }
        let pairs = self.suppliers.len() * self.gateways.len();
        if self.land.len() != pairs || self.air.len() != pairs {
            return Err(E::invariant(
                "lanes",
                format!("expected {pairs} land and air lanes"),
            ));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        for g in &self.gateways {
            if !nonneg(g.lcl_rate_per_100lb)
                || !nonneg(g.fcl_rate_per_container)
                || !nonneg(g.hold_cost_per_lb_day)
            {
                return Err(E::invariant(
                    "gateway costs",
                    format!("{} has a negative or non-finite cost", g.id),
                ));
            }
            if g.transit_days_to_customer < 1 {
                return Err(E::invariant(
                    "transit_days_to_customer",
                    format!("{} must be at least 1", g.id),
                ));
            }
        }
        for s in 0..self.suppliers.len() {
            for h in 0..self.gateways.len() {
                let land = self.lane(s, h, Mode::Land);
                let air = self.lane(s, h, Mode::Air);
                let names = || format!("{} -> {}", self.suppliers[s].id, self.gateways[h].id);
                if !nonneg(land.cost_per_lb) || !nonneg(air.cost_per_lb) {
                    return Err(E::invariant(
                        "cost_per_lb",
                        format!("{} is negative or non-finite", names()),
                    ));
                }
                if land.transit_days < 1 || air.transit_days < 1 {
                    return Err(E::invariant(
                        "transit_days",
                        format!("{} must be at least 1", names()),
                    ));
                }
                if air.transit_days > land.transit_days {
                    return Err(E::invariant(
                        "transit_days",
                        format!(
                            "{}: air ({}) slower than land ({})",
                            names(),
                            air.transit_days,
                            land.transit_days
                        ),
                    ));
                }
            }
        }
        for w in self.pickups.windows(2) {
            if (w[0].product, w[0].supplier, w[0].day) >= (w[1].product, w[1].supplier, w[1].day) {
                return Err(E::invariant("pickups", "must be sorted with unique keys"));
            }
        }
        for pk in &self.pickups {
            if !nonneg(pk.weight) {
                return Err(E::invariant("weight_lbs", "must be finite and nonnegative"));
            }
            if pk.product >= self.products.len() || pk.supplier >= self.suppliers.len() {
                return Err(E::invariant(
                    "pickups",
                    "references an undeclared product or supplier",
                ));
            }
            if pk.day >= self.horizon_days {
                return Err(E::invariant(
                    "day",
                    format!(
                        "pickup on day {} outside horizon {}",
                        pk.day, self.horizon_days
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Break-even container fill fraction `c3 / (c2 k)` above which a full
/// container is cheaper than shipping the same weight LCL.
pub fn fcl_threshold(instance: &Instance, h: usize) -> Result<f64, InstanceError> {
    let lcl = instance.lcl_cost(h);
    let k = instance.container_capacity;
    if lcl <= 0.0 || k <= 0.0 {
        return Err(InstanceError::invariant(
            "fcl_threshold",
            format!(
                "{} needs a positive LCL rate and container capacity",
                instance.gateways[h].id
            ),
        ));
    }
    Ok(instance.fcl_cost(h) / (lcl * k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RouteIssue {
    /// No gateway/mode combination fits inside the delivery window.
    WindowExceeded,
    /// Routes fit the window but would arrive after the last horizon day.
    HorizonOverrun,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PickupDiagnostic {
    pub pickup: usize,
    pub product: String,
    pub supplier: String,
    pub day: usize,
    pub issue: RouteIssue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouteDiagnostics {
    pub checked: usize,
    pub issues: Vec<PickupDiagnostic>,
}

impl RouteDiagnostics {
    pub fn feasible(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks every loaded pickup for a gateway and first-leg mode whose total
/// transit fits both the window and the horizon.
pub fn validate_routes(instance: &Instance) -> RouteDiagnostics {
    let mut issues = Vec::new();
    let mut checked = 0;
    for (i, pk) in instance.pickups.iter().enumerate() {
        if pk.weight <= 0.0 {
            continue;
        }
        checked += 1;
        let mut fits_window = false;
        let mut fits_both = false;
        for h in 0..instance.num_gateways() {
            for mode in [Mode::Land, Mode::Air] {
                let total =
                    instance.lane(pk.supplier, h, mode).transit_days + instance.second_leg_time(h);
                if total <= instance.window_days {
                    fits_window = true;
                    if pk.day + total < instance.horizon_days {
                        fits_both = true;
                    }
                }
            }
        }
        if !fits_both {
            issues.push(PickupDiagnostic {
                pickup: i,
                product: instance.products[pk.product].clone(),
                supplier: instance.suppliers[pk.supplier].id.clone(),
                day: pk.day,
                issue: if fits_window {
                    RouteIssue::HorizonOverrun
                } else {
                    RouteIssue::WindowExceeded
                },
            });
        }
    }
    RouteDiagnostics { checked, issues }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Single-lane instance used across unit tests: one supplier, `gateways`
    /// copies of the Jacksonville tariff, land lanes of `t1` days.
    pub(crate) fn toy(
        products: usize,
        gateways: usize,
        horizon: usize,
        window: usize,
        t1: usize,
        t2: usize,
        pickups: &[(usize, usize, f64)],
    ) -> Instance {
        let inst = Instance {
            horizon_days: horizon,
            window_days: window,
            container_capacity: 48_000.0,
            pickup_fixed_cost: 80.0,
            air_cost_multiplier: 3.0,
            air_time_delta: 2,
            products: (0..products).map(|p| format!("P{p}")).collect(),
            suppliers: vec![Supplier {
                id: "S0".into(),
                zone: None,
            }],
            gateways: (0..gateways)
                .map(|h| Gateway {
                    id: format!("G{h}"),
                    zone: None,
                    lcl_rate_per_100lb: 25.5,
                    fcl_rate_per_container: 4773.0,
                    transit_days_to_customer: t2,
                    hold_cost_per_lb_day: 0.001,
                })
                .collect(),
            pickups: pickups
                .iter()
                .map(|&(product, day, weight)| Pickup {
                    product,
                    supplier: 0,
                    day,
                    weight,
                })
                .collect(),
            land: vec![
                Lane {
                    cost_per_lb: 0.29,
                    transit_days: t1
                };
                gateways
            ],
            air: vec![
                Lane {
                    cost_per_lb: 0.87,
                    transit_days: t1.saturating_sub(1).max(1)
                };
                gateways
            ],
        };
        inst.validate().unwrap();
        inst
    }
}

#[cfg(test)]
mod tests {
    use super::testing::toy;
    use super::*;

    fn case_study_gateways() -> Instance {
        let mut inst = toy(1, 3, 10, 9, 2, 1, &[]);
        let rates = [
            ("Jacksonville", 25.50, 4773.00),
            ("Elizabeth", 17.13, 4805.46),
            ("Miami", 16.02, 3888.00),
        ];
        for (g, (id, lcl, fcl)) in inst.gateways.iter_mut().zip(rates) {
            g.id = id.into();
            g.lcl_rate_per_100lb = lcl;
            g.fcl_rate_per_container = fcl;
        }
        inst
    }

    #[test]
    fn thresholds_match_published_rates() {
        let inst = case_study_gateways();
        let expected = [0.390, 0.584, 0.506];
        for (h, want) in expected.iter().enumerate() {
            let got = fcl_threshold(&inst, h).unwrap();
            assert!((got - want).abs() <= 0.001, "{h}: {got}");
        }
    }

    #[test]
    fn zero_container_rate_means_always_worthwhile() {
        let mut inst = case_study_gateways();
        inst.gateways[0].fcl_rate_per_container = 0.0;
        assert_eq!(fcl_threshold(&inst, 0).unwrap(), 0.0);
    }

    #[test]
    fn threshold_rejects_zero_lcl() {
        let mut inst = case_study_gateways();
        inst.gateways[1].lcl_rate_per_100lb = 0.0;
        assert!(fcl_threshold(&inst, 1).is_err());
        inst.container_capacity = 0.0;
        assert!(fcl_threshold(&inst, 0).is_err());
    }

    #[test]
    fn land_route_within_window() {
        let inst = toy(1, 1, 20, 9, 2, 1, &[(0, 0, 100.0)]);
        assert!(validate_routes(&inst).feasible());
    }

    #[test]
    fn window_violation_is_listed() {
        let mut inst = toy(1, 1, 30, 9, 8, 2, &[(0, 0, 100.0)]);
        inst.air[0].transit_days = 8;
        let diag = validate_routes(&inst);
        assert!(!diag.feasible());
        assert_eq!(diag.issues[0].issue, RouteIssue::WindowExceeded);
        assert_eq!(diag.issues[0].product, "P0");
    }

    #[test]
    fn late_pickup_overruns_horizon() {
        let mut inst = toy(1, 1, 10, 9, 2, 1, &[(0, 9, 100.0)]);
        inst.air[0].transit_days = 2;
        let diag = validate_routes(&inst);
        assert_eq!(diag.issues.len(), 1);
        assert_eq!(diag.issues[0].issue, RouteIssue::HorizonOverrun);
    }

    #[test]
    fn air_slower_than_land_rejected() {
        let mut inst = toy(1, 1, 10, 9, 2, 1, &[]);
        inst.air[0].transit_days = 3;
        assert!(matches!(
            inst.validate(),
            Err(InstanceError::Invariant { .. })
        ));
    }

    #[test]
    fn pickup_outside_horizon_rejected() {
        let mut inst = toy(1, 1, 10, 9, 2, 1, &[]);
        inst.pickups.push(Pickup {
            product: 0,
            supplier: 0,
            day: 10,
            weight: 1.0,
        });
        let err = inst.validate().unwrap_err();
        assert!(err.to_string().contains("day"));
    }

    #[test]
    fn demand_lookup() {
        let inst = toy(2, 1, 10, 9, 2, 1, &[(0, 1, 50.0), (1, 0, 20.0)]);
        assert_eq!(inst.demand(0, 0, 1), 50.0);
        assert_eq!(inst.demand(1, 0, 0), 20.0);
        assert_eq!(inst.demand(1, 0, 1), 0.0);
        assert_eq!(inst.total_weight(), 70.0);
        assert_eq!(inst.pickup_events(), 2);
    }
}
