use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::io::read_rows;
use super::{Gateway, Instance, InstanceError, Lane, Pickup, Supplier, ZoneTable};

const GATEWAY_TEMPLATES: &str = include_str!("../../data/gateways.csv");

#[derive(serde::Deserialize)]
struct TemplateRow {
    gateway_id: String,
    zone: String,
    lcl_rate_per_100lb: f64,
    fcl_rate_per_container: f64,
    container_capacity_lbs: f64,
    transit_days_to_customer: usize,
    hold_cost_per_lb_day: f64,
}

/// Sizes and weight law of a synthetic instance. Defaults mirror the
/// case study: 722 products from 104 suppliers over a year, three gateways.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub products: usize,
    pub suppliers: usize,
    pub gateways: usize,
    pub horizon_days: usize,
    pub window_days: usize,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Median and mean of the (clipped) log-normal pickup weight.
    pub median_weight: f64,
    pub mean_weight: f64,
    pub pickup_fixed_cost: f64,
    pub air_cost_multiplier: f64,
    pub air_time_delta: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            products: 722,
            suppliers: 104,
            gateways: 3,
            horizon_days: 365,
            window_days: 9,
            min_weight: 15.0,
            max_weight: 40_000.0,
            median_weight: 1414.0,
            mean_weight: 3028.0,
            pickup_fixed_cost: 80.0,
            air_cost_multiplier: 3.0,
            air_time_delta: 2,
        }
    }
}

impl GeneratorConfig {
    pub fn sized(products: usize, suppliers: usize, gateways: usize, horizon_days: usize) -> Self {
        GeneratorConfig {
            products,
            suppliers,
            gateways,
            horizon_days,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), InstanceError> {
        let counts = [
            ("products", self.products),
            ("suppliers", self.suppliers),
            ("gateways", self.gateways),
            ("horizon_days", self.horizon_days),
            ("window_days", self.window_days),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(InstanceError::invariant(field, "must be positive"));
            }
        }
        if self.horizon_days <= self.window_days {
            return Err(InstanceError::invariant(
                "horizon_days",
                "must exceed window_days",
            ));
        }
        if !(self.min_weight >= 0.0
            && self.min_weight <= self.max_weight
            && self.max_weight.is_finite())
        {
            return Err(InstanceError::invariant(
                "weight bounds",
                format!(
                    "need 0 <= min <= max, got [{}, {}]",
                    self.min_weight, self.max_weight
                ),
            ));
        }
        if !(self.median_weight > 0.0 && self.mean_weight >= self.median_weight) {
            return Err(InstanceError::invariant(
                "weight law",
                "need 0 < median <= mean",
            ));
        }
        Ok(())
    }
}

/// Draws a random instance. The result depends only on `(config, seed)`.
///
/// Suppliers sit in random zones of the bundled zone table and gateways cycle
/// through the bundled tariffs, so first-leg lanes come from the zone
/// costing. Each product gets one pickup on a day that leaves the whole
/// window inside the horizon.
pub fn generate_synthetic(config: &GeneratorConfig, seed: u64) -> Result<Instance, InstanceError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = ZoneTable::reference();
    let templates: Vec<TemplateRow> = read_rows(
        GATEWAY_TEMPLATES.as_bytes(),
        "gateways.csv",
        &[
            "gateway_id",
            "zone",
            "lcl_rate_per_100lb",
            "fcl_rate_per_container",
            "container_capacity_lbs",
            "transit_days_to_customer",
            "hold_cost_per_lb_day",
        ],
    )?;

    let gateways: Vec<Gateway> = (0..config.gateways)
        .map(|h| {
            let t = &templates[h % templates.len()];
            let round = h / templates.len();
            Gateway {
                id: if round == 0 {
                    t.gateway_id.clone()
                } else {
                    format!("{}-{}", t.gateway_id, round + 1)
                },
                zone: Some(t.zone.clone()),
                lcl_rate_per_100lb: t.lcl_rate_per_100lb,
                fcl_rate_per_container: t.fcl_rate_per_container,
                transit_days_to_customer: t.transit_days_to_customer,
                hold_cost_per_lb_day: t.hold_cost_per_lb_day,
            }
        })
        .collect();
    let capacity = templates[0].container_capacity_lbs;

    let zones = table.zones();
    let suppliers: Vec<Supplier> = (0..config.suppliers)
        .map(|s| Supplier {
            id: format!("S{s:03}"),
            zone: Some(zones[rng.random_range(0..zones.len())].clone()),
        })
        .collect();

    let mut land = Vec::with_capacity(suppliers.len() * gateways.len());
    let mut air = Vec::with_capacity(suppliers.len() * gateways.len());
    for s in &suppliers {
        for g in &gateways {
            let (days, cost) =
                table.land_lane(s.zone.as_deref().unwrap(), g.zone.as_deref().unwrap())?;
            land.push(Lane {
                cost_per_lb: cost,
                transit_days: days,
            });
            air.push(Lane {
                cost_per_lb: cost * config.air_cost_multiplier,
                transit_days: days.saturating_sub(config.air_time_delta).max(1),
            });
        }
    }

    let sigma = (2.0 * (config.mean_weight / config.median_weight).ln()).sqrt();
    let law = LogNormal::new(config.median_weight.ln(), sigma)
        .map_err(|e| InstanceError::invariant("weight law", e.to_string()))?;
    let last_day = config.horizon_days - config.window_days - 1;
    let mut pickups: Vec<Pickup> = (0..config.products)
        .map(|p| {
            let supplier = rng.random_range(0..config.suppliers);
            let day = rng.random_range(0..=last_day);
            let raw: f64 = law.sample(&mut rng);
            let weight = raw.clamp(config.min_weight, config.max_weight).round();
            Pickup {
                product: p,
                supplier,
                day,
                weight: weight.clamp(config.min_weight, config.max_weight),
            }
        })
        .collect();
    pickups.sort_by_key(|pk| (pk.product, pk.supplier, pk.day));

    let instance = Instance {
        horizon_days: config.horizon_days,
        window_days: config.window_days,
        container_capacity: capacity,
        pickup_fixed_cost: config.pickup_fixed_cost,
        air_cost_multiplier: config.air_cost_multiplier,
        air_time_delta: config.air_time_delta,
        products: (0..config.products).map(|p| format!("P{p:04}")).collect(),
        suppliers,
        gateways,
        pickups,
        land,
        air,
    };
    instance.validate()?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Mode;

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig {
            window_days: 5,
            ..GeneratorConfig::sized(1, 1, 1, 10)
        };
        assert_eq!(
            generate_synthetic(&cfg, 7).unwrap(),
            generate_synthetic(&cfg, 7).unwrap()
        );
        let other = generate_synthetic(&GeneratorConfig::sized(20, 5, 3, 30), 8).unwrap();
        assert_ne!(
            generate_synthetic(&GeneratorConfig::sized(20, 5, 3, 30), 7).unwrap(),
            other
        );
    }

    #[test]
    fn case_study_size_respects_bounds() {
        let inst = generate_synthetic(&GeneratorConfig::default(), 1).unwrap();
        assert_eq!(inst.pickups.len(), 722);
        assert_eq!(inst.gateways.len(), 3);
        for pk in &inst.pickups {
            assert!((15.0..=40_000.0).contains(&pk.weight));
            assert!(pk.day + inst.window_days < inst.horizon_days);
        }
        let mut per_product = vec![0; 722];
        for pk in &inst.pickups {
            per_product[pk.product] += 1;
        }
        assert!(per_product.iter().all(|&c| c == 1));
    }

    #[test]
    fn degenerate_weight_law() {
        let cfg = GeneratorConfig {
            min_weight: 100.0,
            max_weight: 100.0,
            ..GeneratorConfig::sized(30, 4, 2, 40)
        };
        let inst = generate_synthetic(&cfg, 3).unwrap();
        assert!(inst.pickups.iter().all(|p| p.weight == 100.0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_synthetic(&GeneratorConfig::sized(0, 1, 1, 20), 0).is_err());
        assert!(generate_synthetic(&GeneratorConfig::sized(1, 1, 1, 9), 0).is_err());
        let inverted = GeneratorConfig {
            min_weight: 10.0,
            max_weight: 5.0,
            ..GeneratorConfig::sized(1, 1, 1, 20)
        };
        assert!(generate_synthetic(&inverted, 0).is_err());
    }

    #[test]
    fn lanes_follow_zone_costing() {
        let inst = generate_synthetic(&GeneratorConfig::sized(5, 6, 4, 30), 11).unwrap();
        let table = ZoneTable::reference();
        assert_eq!(inst.gateways[3].id, "Jacksonville-2");
        for (s, sup) in inst.suppliers.iter().enumerate() {
            for (h, g) in inst.gateways.iter().enumerate() {
                let (days, cost) = table
                    .land_lane(sup.zone.as_deref().unwrap(), g.zone.as_deref().unwrap())
                    .unwrap();
                assert_eq!(
                    inst.lane(s, h, Mode::Land),
                    Lane {
                        cost_per_lb: cost,
                        transit_days: days
                    }
                );
            }
        }
    }
}
