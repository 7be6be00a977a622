use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Variable family of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    /// First-leg land flow, lbs, indexed by pickup day.
    X,
    /// First-leg air flow.
    Y,
    /// LCL shipment leaving a gateway.
    Z,
    /// Weight loaded into full containers at a gateway.
    U,
    /// Weight held at a gateway overnight.
    I,
    /// Containers dispatched from a gateway (integer).
    T,
    /// Early-arrived stock waiting at the customer.
    N,
}

/// Identifies one column of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    X {
        p: usize,
        s: usize,
        h: usize,
        d: usize,
    },
    Y {
        p: usize,
        s: usize,
        h: usize,
        d: usize,
    },
    Z {
        p: usize,
        h: usize,
        d: usize,
    },
    U {
        p: usize,
        h: usize,
        d: usize,
    },
    I {
        p: usize,
        h: usize,
        d: usize,
    },
    T {
        h: usize,
        d: usize,
    },
    N {
        p: usize,
        d: usize,
    },
}

impl VarKey {
    pub fn kind(&self) -> VarKind {
        match self {
            VarKey::X { .. } => VarKind::X,
            VarKey::Y { .. } => VarKind::Y,
            VarKey::Z { .. } => VarKind::Z,
            VarKey::U { .. } => VarKind::U,
            VarKey::I { .. } => VarKind::I,
            VarKey::T { .. } => VarKind::T,
            VarKey::N { .. } => VarKind::N,
        }
    }

    pub fn day(&self) -> usize {
        match *self {
            VarKey::X { d, .. }
            | VarKey::Y { d, .. }
            | VarKey::Z { d, .. }
            | VarKey::U { d, .. }
            | VarKey::I { d, .. }
            | VarKey::T { d, .. }
            | VarKey::N { d, .. } => d,
        }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::X { p, s, h, d } => write!(f, "X[{p},{s},{h},{d}]"),
            VarKey::Y { p, s, h, d } => write!(f, "Y[{p},{s},{h},{d}]"),
            VarKey::Z { p, h, d } => write!(f, "Z[{p},{h},{d}]"),
            VarKey::U { p, h, d } => write!(f, "U[{p},{h},{d}]"),
            VarKey::I { p, h, d } => write!(f, "I[{p},{h},{d}]"),
            VarKey::T { h, d } => write!(f, "T[{h},{d}]"),
            VarKey::N { p, d } => write!(f, "N[{p},{d}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseKeyError(pub String);

impl fmt::Display for ParseKeyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed variable key {:?}", self.0)
    }
}

impl std::error::Error for ParseKeyError {}

impl FromStr for VarKey {
    type Err = ParseKeyError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || ParseKeyError(text.to_string());
        let (kind, rest) = text.split_once('[').ok_or_else(err)?;
        let inner = rest.strip_suffix(']').ok_or_else(err)?;
        let idx: Vec<usize> = inner
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| err()))
            .collect::<Result<_, _>>()?;
        Ok(match (kind, idx.as_slice()) {
            ("X", &[p, s, h, d]) => VarKey::X { p, s, h, d },
            ("Y", &[p, s, h, d]) => VarKey::Y { p, s, h, d },
            ("Z", &[p, h, d]) => VarKey::Z { p, h, d },
            ("U", &[p, h, d]) => VarKey::U { p, h, d },
            ("I", &[p, h, d]) => VarKey::I { p, h, d },
            ("T", &[h, d]) => VarKey::T { h, d },
            ("N", &[p, d]) => VarKey::N { p, d },
            _ => return Err(err()),
        })
    }
}

/// Set sizes of a model and the column block layout derived from them.
///
/// Columns are laid out kind by kind (X, Y, Z, U, I, T, then N when early
/// delivery is allowed); within a block indices vary fastest on the day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub products: usize,
    pub suppliers: usize,
    pub gateways: usize,
    pub days: usize,
    pub with_early_stock: bool,
}

impl Dims {
    fn pshd(&self) -> usize {
        self.products * self.suppliers * self.gateways * self.days
    }

    fn phd(&self) -> usize {
        self.products * self.gateways * self.days
    }

    fn hd(&self) -> usize {
        self.gateways * self.days
    }

    fn pd(&self) -> usize {
        if self.with_early_stock {
            self.products * self.days
        } else {
            0
        }
    }

    pub fn block_start(&self, kind: VarKind) -> usize {
        let (a, b, c) = (self.pshd(), self.phd(), self.hd());
        match kind {
            VarKind::X => 0,
            VarKind::Y => a,
            VarKind::Z => 2 * a,
            VarKind::U => 2 * a + b,
            VarKind::I => 2 * a + 2 * b,
            VarKind::T => 2 * a + 3 * b,
            VarKind::N => 2 * a + 3 * b + c,
        }
    }

    pub fn block(&self, kind: VarKind) -> std::ops::Range<usize> {
        let len = match kind {
            VarKind::X | VarKind::Y => self.pshd(),
            VarKind::Z | VarKind::U | VarKind::I => self.phd(),
            VarKind::T => self.hd(),
            VarKind::N => self.pd(),
        };
        let start = self.block_start(kind);
        start..start + len
    }

    /// `2·PSHD + 3·PHD + HD (+ PD)`.
    pub fn num_cols(&self) -> usize {
        2 * self.pshd() + 3 * self.phd() + self.hd() + self.pd()
    }

    /// `PSD + HD + PHD + PD`: pickup, capacity, gateway and customer rows.
    pub fn num_rows(&self) -> usize {
        self.products * self.suppliers * self.days
            + self.hd()
            + self.phd()
            + self.products * self.days
    }

    /// Column of `key`, or `None` when an index is out of range (or the key
    /// is an N column and early stock is disabled).
    pub fn column(&self, key: &VarKey) -> Option<usize> {
        let (pp, ss, hh, dd) = (self.products, self.suppliers, self.gateways, self.days);
        let local = match *key {
            VarKey::X { p, s, h, d } | VarKey::Y { p, s, h, d } => {
                (p < pp && s < ss && h < hh && d < dd).then(|| ((p * ss + s) * hh + h) * dd + d)
            }
            VarKey::Z { p, h, d } | VarKey::U { p, h, d } | VarKey::I { p, h, d } => {
                (p < pp && h < hh && d < dd).then(|| (p * hh + h) * dd + d)
            }
            VarKey::T { h, d } => (h < hh && d < dd).then(|| h * dd + d),
            VarKey::N { p, d } => (self.with_early_stock && p < pp && d < dd).then(|| p * dd + d),
        }?;
        Some(self.block_start(key.kind()) + local)
    }

    /// Inverse of [`Dims::column`].
    pub fn key(&self, col: usize) -> VarKey {
        assert!(col < self.num_cols(), "column {col} out of range");
        let (ss, hh, dd) = (self.suppliers, self.gateways, self.days);
        let kinds = [
            VarKind::N,
            VarKind::T,
            VarKind::I,
            VarKind::U,
            VarKind::Z,
            VarKind::Y,
            VarKind::X,
        ];
        let kind = kinds
            .into_iter()
            .find(|&k| col >= self.block_start(k) && !self.block(k).is_empty())
            .expect("column lies in some block");
        let i = col - self.block_start(kind);
        let d = i % dd;
        match kind {
            VarKind::X | VarKind::Y => {
                let h = (i / dd) % hh;
                let s = (i / dd / hh) % ss;
                let p = i / dd / hh / ss;
                if kind == VarKind::X {
                    VarKey::X { p, s, h, d }
                } else {
                    VarKey::Y { p, s, h, d }
                }
            }
            VarKind::Z | VarKind::U | VarKind::I => {
                let h = (i / dd) % hh;
                let p = i / dd / hh;
                match kind {
                    VarKind::Z => VarKey::Z { p, h, d },
                    VarKind::U => VarKey::U { p, h, d },
                    _ => VarKey::I { p, h, d },
                }
            }
            VarKind::T => VarKey::T { h: i / dd, d },
            VarKind::N => VarKey::N { p: i / dd, d },
        }
    }
}
