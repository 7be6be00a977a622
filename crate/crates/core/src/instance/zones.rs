use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Deserialize;

use super::InstanceError;

/// Transit time and unit cost of one first-leg rate class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateClass {
    pub transit_days: usize,
    pub cents_per_lb: f64,
}

/// Zone-to-zone rate classes plus per-class transit time and tariff.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoneTable {
    zones: Vec<String>,
    matrix: HashMap<(String, String), String>,
    classes: BTreeMap<String, RateClass>,
}

const REFERENCE_MATRIX: &str = include_str!("../../data/zone_matrix.csv");
const REFERENCE_CLASSES: &str = include_str!("../../data/rate_classes.csv");

#[derive(Deserialize)]
struct MatrixRow {
    from_zone: String,
    to_zone: String,
    rate_class: String,
}

#[derive(Deserialize)]
struct ClassRow {
    rate_class: String,
    transit_days: usize,
    cents_per_lb: f64,
}

impl ZoneTable {
    /// Builds and validates a table from its two CSV documents.
    pub fn from_csv(
        matrix_csv: &str,
        matrix_name: &str,
        classes_csv: &str,
        classes_name: &str,
    ) -> Result<Self, InstanceError> {
        let matrix_rows: Vec<MatrixRow> = super::io::read_rows(
            matrix_csv.as_bytes(),
            matrix_name,
            &["from_zone", "to_zone", "rate_class"],
        )?;
        let class_rows: Vec<ClassRow> = super::io::read_rows(
            classes_csv.as_bytes(),
            classes_name,
            &["rate_class", "transit_days", "cents_per_lb"],
        )?;
        let mut classes = BTreeMap::new();
        for (i, row) in class_rows.into_iter().enumerate() {
            if !(row.cents_per_lb.is_finite() && row.cents_per_lb >= 0.0) || row.transit_days < 1 {
                return Err(InstanceError::Schema {
                    file: classes_name.to_string(),
                    row: i + 2,
                    message: format!(
                        "class {} needs transit_days >= 1 and cents_per_lb >= 0",
                        row.rate_class
                    ),
                });
            }
            let prev = classes.insert(
                row.rate_class.clone(),
                RateClass {
                    transit_days: row.transit_days,
                    cents_per_lb: row.cents_per_lb,
                },
            );
            if prev.is_some() {
                return Err(InstanceError::Schema {
                    file: classes_name.to_string(),
                    row: i + 2,
                    message: format!("duplicate rate class {}", row.rate_class),
                });
            }
        }
        let mut zones: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut matrix = HashMap::new();
        for (i, row) in matrix_rows.into_iter().enumerate() {
            for z in [&row.from_zone, &row.to_zone] {
                if seen.insert(z.clone()) {
                    zones.push(z.clone());
                }
            }
            if !classes.contains_key(&row.rate_class) {
                return Err(InstanceError::Schema {
                    file: matrix_name.to_string(),
                    row: i + 2,
                    message: format!(
                        "rate class {} has no entry in {classes_name}",
                        row.rate_class
                    ),
                });
            }
            if matrix
                .insert((row.from_zone.clone(), row.to_zone.clone()), row.rate_class)
                .is_some()
            {
                return Err(InstanceError::Schema {
                    file: matrix_name.to_string(),
                    row: i + 2,
                    message: format!("duplicate cell ({}, {})", row.from_zone, row.to_zone),
                });
            }
        }
        let table = ZoneTable {
            zones,
            matrix,
            classes,
        };
        table.check_square(matrix_name)?;
        Ok(table)
    }

    /// Zone matrix and rate classes of the case-study carrier.
    pub fn reference() -> Self {
        Self::from_csv(
            REFERENCE_MATRIX,
            "zone_matrix.csv",
            REFERENCE_CLASSES,
            "rate_classes.csv",
        )
        .expect("bundled zone table is valid")
    }

    fn check_square(&self, file: &str) -> Result<(), InstanceError> {
        let n = self.zones.len();
        if self.matrix.len() != n * n {
            return Err(InstanceError::Schema {
                file: file.to_string(),
                row: 0,
                message: format!(
                    "zone matrix is ragged: {} cells for {n} zones",
                    self.matrix.len()
                ),
            });
        }
        for z in &self.zones {
            match self.matrix.get(&(z.clone(), z.clone())) {
                Some(c) if c == "A1" => {}
                Some(c) => {
                    return Err(InstanceError::Schema {
                        file: file.to_string(),
                        row: 0,
                        message: format!("diagonal cell ({z}, {z}) is {c}, expected A1"),
                    })
                }
                None => {
                    return Err(InstanceError::Schema {
                        file: file.to_string(),
                        row: 0,
                        message: format!("zone matrix is ragged: missing ({z}, {z})"),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn zones(&self) -> &[String] {
        &self.zones
    }

    pub fn lookup(&self, from: &str, to: &str) -> Result<&str, InstanceError> {
        for z in [from, to] {
            if !self.zones.iter().any(|k| k == z) {
                return Err(InstanceError::UnknownZone(z.to_string()));
            }
        }
        Ok(self
            .matrix
            .get(&(from.to_string(), to.to_string()))
            .map(String::as_str)
            .expect("square matrix covers every pair"))
    }

    /// Transit days and currency per lb of a rate class.
    pub fn class_params(&self, class: &str) -> Result<(usize, f64), InstanceError> {
        self.classes
            .get(class)
            .map(|c| (c.transit_days, c.cents_per_lb / 100.0))
            .ok_or_else(|| InstanceError::UnknownClass(class.to_string()))
    }

    /// Land lane for a supplier zone and gateway zone.
    pub fn land_lane(&self, from: &str, to: &str) -> Result<(usize, f64), InstanceError> {
        let class = self.lookup(from, to)?;
        self.class_params(class)
    }
}
