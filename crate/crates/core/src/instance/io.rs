use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Gateway, Instance, InstanceError, Lane, Mode, Pickup, Supplier, ZoneTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub horizon_days: usize,
    pub window_days: usize,
    #[serde(default = "default_pickup_fixed_cost")]
    pub pickup_fixed_cost: f64,
    #[serde(default = "default_air_cost_multiplier")]
    pub air_cost_multiplier: f64,
    #[serde(default = "default_air_time_delta")]
    pub air_time_delta: usize,
}

fn default_pickup_fixed_cost() -> f64 {
    80.0
}

fn default_air_cost_multiplier() -> f64 {
    3.0
}

fn default_air_time_delta() -> usize {
    2
}

impl InstanceConfig {
    /// Parses either a JSON object or `key = value` lines (`#` comments).
    pub fn parse(text: &str, name: &str) -> Result<Self, InstanceError> {
        let schema = |row: usize, message: String| InstanceError::Schema {
            file: name.to_string(),
            row,
            message,
        };
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| schema(e.line(), e.to_string()));
        }
        let mut map = serde_json::Map::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| schema(i + 1, format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            let number: serde_json::Value = serde_json::from_str(value)
                .ok()
                .filter(serde_json::Value::is_number)
                .ok_or_else(|| {
                    schema(i + 1, format!("{} is not a number: {value:?}", key.trim()))
                })?;
            map.insert(key.trim().to_string(), number);
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| schema(0, e.to_string()))
    }
}

/// Locations of the input files of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstancePaths {
    pub suppliers: PathBuf,
    pub gateways: PathBuf,
    pub pickups: PathBuf,
    pub config: PathBuf,
    pub zone_matrix: Option<PathBuf>,
    pub rate_classes: Option<PathBuf>,
    pub rates_override: Option<PathBuf>,
}

impl InstancePaths {
    /// Standard file names inside `dir`; optional files are picked up when present.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        let config = ["config.json", "config.txt", "config"]
            .iter()
            .map(|n| dir.join(n))
            .find(|p| p.exists())
            .unwrap_or_else(|| dir.join("config.json"));
        InstancePaths {
            suppliers: dir.join("suppliers.csv"),
            gateways: dir.join("gateways.csv"),
            pickups: dir.join("pickups.csv"),
            config,
            zone_matrix: optional("zone_matrix.csv"),
            rate_classes: optional("rate_classes.csv"),
            rates_override: optional("rates_override.csv"),
        }
    }
}

#[derive(Deserialize)]
struct SupplierRow {
    supplier_id: String,
    zone: String,
}

#[derive(Deserialize)]
struct GatewayRow {
    gateway_id: String,
    zone: String,
    lcl_rate_per_100lb: f64,
    fcl_rate_per_container: f64,
    container_capacity_lbs: f64,
    transit_days_to_customer: usize,
    hold_cost_per_lb_day: f64,
}

#[derive(Deserialize)]
struct PickupRow {
    product_id: String,
    supplier_id: String,
    day: usize,
    weight_lbs: f64,
}

#[derive(Deserialize)]
struct OverrideRow {
    supplier_id: String,
    gateway_id: String,
    mode: String,
    cost_per_lb: f64,
    transit_days: usize,
}

const SUPPLIER_HEADERS: &[&str] = &["supplier_id", "zone"];
const GATEWAY_HEADERS: &[&str] = &[
    "gateway_id",
    "zone",
    "lcl_rate_per_100lb",
    "fcl_rate_per_container",
    "container_capacity_lbs",
    "transit_days_to_customer",
    "hold_cost_per_lb_day",
];
const PICKUP_HEADERS: &[&str] = &["product_id", "supplier_id", "day", "weight_lbs"];
const OVERRIDE_HEADERS: &[&str] = &[
    "supplier_id",
    "gateway_id",
    "mode",
    "cost_per_lb",
    "transit_days",
];

/// Reads a headed CSV whose header set must equal `expected`.
pub(super) fn read_rows<T: DeserializeOwned, R: Read>(
    reader: R,
    name: &str,
    expected: &[&str],
) -> Result<Vec<T>, InstanceError> {
    let schema = |row: usize, message: String| InstanceError::Schema {
        file: name.to_string(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| schema(1, e.to_string()))?.clone();
    let mut got: Vec<&str> = headers.iter().collect();
    let mut want: Vec<&str> = expected.to_vec();
    got.sort_unstable();
    want.sort_unstable();
    if got != want {
        return Err(schema(
            1,
            format!(
                "expected columns {expected:?}, found {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e: csv::Error| schema(i + 2, e.to_string()))?);
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<String, InstanceError> {
    fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_csv<T: DeserializeOwned>(path: &Path, expected: &[&str]) -> Result<Vec<T>, InstanceError> {
    let text = read_file(path)?;
    read_rows(text.as_bytes(), &file_name(path), expected)
}

fn optional_zone(z: String) -> Option<String> {
    if z.is_empty() {
        None
    } else {
        Some(z)
    }
}

/// Loads and validates an instance. First-leg lanes come from
/// `rates_override` where given, otherwise from the zone tables.
pub fn load_instance(paths: &InstancePaths) -> Result<Instance, InstanceError> {
    let config = InstanceConfig::parse(&read_file(&paths.config)?, &file_name(&paths.config))?;

    let suppliers: Vec<Supplier> = load_csv::<SupplierRow>(&paths.suppliers, SUPPLIER_HEADERS)?
        .into_iter()
        .map(|r| Supplier {
            id: r.supplier_id,
            zone: optional_zone(r.zone),
        })
        .collect();
    let gateway_rows: Vec<GatewayRow> = load_csv(&paths.gateways, GATEWAY_HEADERS)?;
    let gw_file = file_name(&paths.gateways);
    let capacity = gateway_rows
        .first()
        .map(|g| g.container_capacity_lbs)
        .unwrap_or(0.0);
    for (i, g) in gateway_rows.iter().enumerate() {
        if g.container_capacity_lbs != capacity {
            return Err(InstanceError::Schema {
                file: gw_file.clone(),
                row: i + 2,
                message: format!(
                    "container capacity {} differs from {capacity}; all gateways share one container size",
                    g.container_capacity_lbs
                ),
            });
        }
    }
    let gateways: Vec<Gateway> = gateway_rows
        .into_iter()
        .map(|g| Gateway {
            id: g.gateway_id,
            zone: optional_zone(g.zone),
            lcl_rate_per_100lb: g.lcl_rate_per_100lb,
            fcl_rate_per_container: g.fcl_rate_per_container,
            transit_days_to_customer: g.transit_days_to_customer,
            hold_cost_per_lb_day: g.hold_cost_per_lb_day,
        })
        .collect();
    let supplier_index = unique_index(
        suppliers.iter().map(|s| s.id.as_str()),
        &file_name(&paths.suppliers),
    )?;
    let gateway_index = unique_index(gateways.iter().map(|g| g.id.as_str()), &gw_file)?;

    let zone_table = match (&paths.zone_matrix, &paths.rate_classes) {
        (Some(m), Some(c)) => Some(ZoneTable::from_csv(
            &read_file(m)?,
            &file_name(m),
            &read_file(c)?,
            &file_name(c),
        )?),
        (None, None) => None,
        _ => {
            return Err(InstanceError::invariant(
                "zone tables",
                "zone_matrix.csv and rate_classes.csv must be given together",
            ))
        }
    };
    if let Some(table) = &zone_table {
        let zones = suppliers
            .iter()
            .filter_map(|s| s.zone.as_ref())
            .chain(gateways.iter().filter_map(|g| g.zone.as_ref()));
        for z in zones {
            if !table.zones().contains(z) {
                return Err(InstanceError::UnknownZone(z.clone()));
            }
        }
    }

    let mut overrides: HashMap<(usize, usize, Mode), Lane> = HashMap::new();
    if let Some(path) = &paths.rates_override {
        let name = file_name(path);
        for (i, row) in load_csv::<OverrideRow>(path, OVERRIDE_HEADERS)?
            .into_iter()
            .enumerate()
        {
            let bad = |message: String| InstanceError::Schema {
                file: name.clone(),
                row: i + 2,
                message,
            };
            let s = *supplier_index
                .get(row.supplier_id.as_str())
                .ok_or_else(|| bad(format!("unknown supplier {}", row.supplier_id)))?;
            let h = *gateway_index
                .get(row.gateway_id.as_str())
                .ok_or_else(|| bad(format!("unknown gateway {}", row.gateway_id)))?;
            let mode = match row.mode.as_str() {
                "land" => Mode::Land,
                "air" => Mode::Air,
                other => return Err(bad(format!("mode must be land or air, got {other:?}"))),
            };
            let lane = Lane {
                cost_per_lb: row.cost_per_lb,
                transit_days: row.transit_days,
            };
            if overrides.insert((s, h, mode), lane).is_some() {
                return Err(bad("duplicate override".to_string()));
            }
        }
    }

    let mut land = Vec::with_capacity(suppliers.len() * gateways.len());
    let mut air = Vec::with_capacity(suppliers.len() * gateways.len());
    for (s, sup) in suppliers.iter().enumerate() {
        for (h, gw) in gateways.iter().enumerate() {
            let land_lane = match overrides.get(&(s, h, Mode::Land)) {
                Some(l) => *l,
                None => zone_lane(zone_table.as_ref(), sup, gw)?,
            };
            let air_lane = match overrides.get(&(s, h, Mode::Air)) {
                Some(l) => *l,
                None => Lane {
                    cost_per_lb: land_lane.cost_per_lb * config.air_cost_multiplier,
                    transit_days: land_lane
                        .transit_days
                        .saturating_sub(config.air_time_delta)
                        .max(1),
                },
            };
            land.push(land_lane);
            air.push(air_lane);
        }
    }

    let pickup_file = file_name(&paths.pickups);
    let mut products: Vec<String> = Vec::new();
    let mut product_index: HashMap<String, usize> = HashMap::new();
    let mut pickups: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
    for (i, row) in load_csv::<PickupRow>(&paths.pickups, PICKUP_HEADERS)?
        .into_iter()
        .enumerate()
    {
        let bad = |message: String| InstanceError::Schema {
            file: pickup_file.clone(),
            row: i + 2,
            message,
        };
        let s = *supplier_index
            .get(row.supplier_id.as_str())
            .ok_or_else(|| bad(format!("unknown supplier {}", row.supplier_id)))?;
        let p = match product_index.get(&row.product_id) {
            Some(&p) => p,
            None => {
                products.push(row.product_id.clone());
                product_index.insert(row.product_id.clone(), products.len() - 1);
                products.len() - 1
            }
        };
        if row.day >= config.horizon_days {
            return Err(bad(format!(
                "day {} outside horizon {}",
                row.day, config.horizon_days
            )));
        }
        if !(row.weight_lbs.is_finite() && row.weight_lbs >= 0.0) {
            return Err(bad(format!(
                "weight_lbs must be nonnegative, got {}",
                row.weight_lbs
            )));
        }
        if pickups
            .insert((p, s, row.day), (row.weight_lbs, i))
            .is_some()
        {
            return Err(bad(format!(
                "duplicate pickup ({}, {}, {})",
                row.product_id, row.supplier_id, row.day
            )));
        }
    }
    let pickups = pickups
        .into_iter()
        .map(|((product, supplier, day), (weight, _))| Pickup {
            product,
            supplier,
            day,
            weight,
        })
        .collect();

    let instance = Instance {
        horizon_days: config.horizon_days,
        window_days: config.window_days,
        container_capacity: capacity,
        pickup_fixed_cost: config.pickup_fixed_cost,
        air_cost_multiplier: config.air_cost_multiplier,
        air_time_delta: config.air_time_delta,
        products,
        suppliers,
        gateways,
        pickups,
        land,
        air,
    };
    instance.validate()?;
    Ok(instance)
}

fn unique_index<'a>(
    ids: impl Iterator<Item = &'a str>,
    file: &str,
) -> Result<HashMap<&'a str, usize>, InstanceError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id, i).is_some() {
            return Err(InstanceError::Schema {
                file: file.to_string(),
                row: i + 2,
                message: format!("duplicate id {id}"),
            });
        }
    }
    Ok(map)
}

fn zone_lane(
    table: Option<&ZoneTable>,
    sup: &Supplier,
    gw: &Gateway,
) -> Result<Lane, InstanceError> {
    let missing = || {
        InstanceError::invariant(
            "rates",
            format!(
                "no land rate for {} -> {}: add an override or zone tables",
                sup.id, gw.id
            ),
        )
    };
    let table = table.ok_or_else(missing)?;
    let (from, to) = match (&sup.zone, &gw.zone) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(missing()),
    };
    let (transit_days, cost_per_lb) = table.land_lane(from, to)?;
    Ok(Lane {
        cost_per_lb,
        transit_days,
    })
}

/// Writes `instance` into `dir` with explicit lanes for every pair, so that
/// loading the directory back reproduces it exactly.
pub fn save_instance(instance: &Instance, dir: impl AsRef<Path>) -> Result<(), InstanceError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| InstanceError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| InstanceError::Io { path, source })
    };
    let zone = |z: &Option<String>| z.clone().unwrap_or_default();

    let mut w = csv_writer(SUPPLIER_HEADERS);
    for s in &instance.suppliers {
        w.write_record([s.id.clone(), zone(&s.zone)])
            .expect("in-memory write");
    }
    write("suppliers.csv", finish(w))?;

    let mut w = csv_writer(GATEWAY_HEADERS);
    for g in &instance.gateways {
        w.write_record([
            g.id.clone(),
            zone(&g.zone),
            g.lcl_rate_per_100lb.to_string(),
            g.fcl_rate_per_container.to_string(),
            instance.container_capacity.to_string(),
            g.transit_days_to_customer.to_string(),
            g.hold_cost_per_lb_day.to_string(),
        ])
        .expect("in-memory write");
    }
    write("gateways.csv", finish(w))?;

    let mut w = csv_writer(PICKUP_HEADERS);
    for pk in &instance.pickups {
        w.write_record([
            instance.products[pk.product].clone(),
            instance.suppliers[pk.supplier].id.clone(),
            pk.day.to_string(),
            pk.weight.to_string(),
        ])
        .expect("in-memory write");
    }
    write("pickups.csv", finish(w))?;

    let mut w = csv_writer(OVERRIDE_HEADERS);
    for (s, sup) in instance.suppliers.iter().enumerate() {
        for (h, gw) in instance.gateways.iter().enumerate() {
            for (mode, label) in [(Mode::Land, "land"), (Mode::Air, "air")] {
                let lane = instance.lane(s, h, mode);
                w.write_record([
                    sup.id.clone(),
                    gw.id.clone(),
                    label.to_string(),
                    lane.cost_per_lb.to_string(),
                    lane.transit_days.to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    write("rates_override.csv", finish(w))?;

    let config = InstanceConfig {
        horizon_days: instance.horizon_days,
        window_days: instance.window_days,
        pickup_fixed_cost: instance.pickup_fixed_cost,
        air_cost_multiplier: instance.air_cost_multiplier,
        air_time_delta: instance.air_time_delta,
    };
    write(
        "config.json",
        serde_json::to_string_pretty(&config).expect("config serializes") + "\n",
    )?;
    Ok(())
}

fn csv_writer(headers: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers).expect("in-memory write");
    w
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_case(dir: &Path, pickups: &str) {
        fs::write(dir.join("suppliers.csv"), "supplier_id,zone\nS1,1\nS2,2\n").unwrap();
        fs::write(
            dir.join("gateways.csv"),
            "gateway_id,zone,lcl_rate_per_100lb,fcl_rate_per_container,container_capacity_lbs,transit_days_to_customer,hold_cost_per_lb_day\n\
             Jacksonville,1,25.50,4773.00,48000,1,0.001\n",
        )
        .unwrap();
        fs::write(dir.join("pickups.csv"), pickups).unwrap();
        fs::write(
            dir.join("config.txt"),
            "horizon_days = 20\nwindow_days = 9 # days\n",
        )
        .unwrap();
        fs::copy(
            concat!(env!("CARGO_MANIFEST_DIR"), "/data/zone_matrix.csv"),
            dir.join("zone_matrix.csv"),
        )
        .unwrap();
        fs::copy(
            concat!(env!("CARGO_MANIFEST_DIR"), "/data/rate_classes.csv"),
            dir.join("rate_classes.csv"),
        )
        .unwrap();
    }

    #[test]
    fn loads_zone_costed_instance() {
        let dir = tempfile::tempdir().unwrap();
        write_case(
            dir.path(),
            "product_id,supplier_id,day,weight_lbs\nA,S1,0,100\nB,S2,3,250\n",
        );
        let inst = load_instance(&InstancePaths::in_dir(dir.path())).unwrap();
        assert_eq!(inst.lcl_cost(0), 0.255);
        assert_eq!(inst.fcl_cost(0), 4773.0);
        assert_eq!(inst.container_capacity, 48_000.0);
        let land = inst.lane(0, 0, Mode::Land);
        assert_eq!((land.transit_days, land.cost_per_lb), (2, 0.29));
        let air = inst.lane(0, 0, Mode::Air);
        assert_eq!(air.transit_days, 1);
        assert!((air.cost_per_lb - 0.87).abs() < 1e-12);
        assert_eq!(inst.pickup_fixed_cost, 80.0);
        assert_eq!(inst.products, vec!["A", "B"]);
    }

    #[test]
    fn empty_pickups_load() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "product_id,supplier_id,day,weight_lbs\n");
        let inst = load_instance(&InstancePaths::in_dir(dir.path())).unwrap();
        assert_eq!(inst.total_weight(), 0.0);
        assert!(inst.products.is_empty());
    }

    #[test]
    fn bad_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_case(
            dir.path(),
            "product_id,supplier_id,day,weight_lbs\nA,S1,0,100\nB,S9,1,5\n",
        );
        let err = load_instance(&InstancePaths::in_dir(dir.path())).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("pickups.csv") && msg.contains("row 3"),
            "{msg}"
        );
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "product,supplier_id,day,weight_lbs\n");
        assert!(matches!(
            load_instance(&InstancePaths::in_dir(dir.path())),
            Err(InstanceError::Schema { .. })
        ));
    }

    #[test]
    fn dangling_zone_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "product_id,supplier_id,day,weight_lbs\n");
        fs::write(
            dir.path().join("suppliers.csv"),
            "supplier_id,zone\nS1,99\n",
        )
        .unwrap();
        assert!(matches!(
            load_instance(&InstancePaths::in_dir(dir.path())),
            Err(InstanceError::UnknownZone(z)) if z == "99"
        ));
    }

    #[test]
    fn overrides_replace_zone_rates() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "product_id,supplier_id,day,weight_lbs\n");
        fs::write(
            dir.path().join("rates_override.csv"),
            "supplier_id,gateway_id,mode,cost_per_lb,transit_days\nS2,Jacksonville,air,1.5,1\n",
        )
        .unwrap();
        let inst = load_instance(&InstancePaths::in_dir(dir.path())).unwrap();
        assert_eq!(
            inst.lane(1, 0, Mode::Air),
            Lane {
                cost_per_lb: 1.5,
                transit_days: 1
            }
        );
        assert_eq!(inst.lane(1, 0, Mode::Land).transit_days, 3);
    }

    #[test]
    fn air_slower_than_land_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "product_id,supplier_id,day,weight_lbs\n");
        fs::write(
            dir.path().join("rates_override.csv"),
            "supplier_id,gateway_id,mode,cost_per_lb,transit_days\nS1,Jacksonville,air,1.5,4\n",
        )
        .unwrap();
        let err = load_instance(&InstancePaths::in_dir(dir.path())).unwrap_err();
        assert!(err.to_string().contains("transit_days"), "{err}");
    }

    #[test]
    fn json_config_with_defaults() {
        let cfg =
            InstanceConfig::parse(r#"{"horizon_days": 30, "window_days": 9}"#, "c.json").unwrap();
        assert_eq!(cfg.air_time_delta, 2);
        assert_eq!(cfg.air_cost_multiplier, 3.0);
        let err =
            InstanceConfig::parse("horizon_days = 30\nwindow_days = nine\n", "c").unwrap_err();
        assert!(err.to_string().contains("window_days"));
    }

    #[test]
    fn saved_instance_reloads_identically() {
        let dir = tempfile::tempdir().unwrap();
        write_case(
            dir.path(),
            "product_id,supplier_id,day,weight_lbs\nA,S1,0,100.25\nB,S2,3,250\nA,S2,1,0.1\n",
        );
        let inst = load_instance(&InstancePaths::in_dir(dir.path())).unwrap();
        let out = tempfile::tempdir().unwrap();
        save_instance(&inst, out.path()).unwrap();
        let again = load_instance(&InstancePaths::in_dir(out.path())).unwrap();
        assert_eq!(inst, again);
    }
}
