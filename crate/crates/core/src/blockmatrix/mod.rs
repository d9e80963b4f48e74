//! Momentum-tagged 4x4 boxes and grids of them.
//!
//! Every entry of a box is `coeff * exp(i (p_a K_a + p_b K_b))` with integer
//! exponents, so grids can be evaluated at any momentum pair and products of
//! boxes can be checked as Laurent polynomials in `exp(i K_a)`, `exp(i K_b)`.

mod audit;
mod grid;
mod layout;

pub use audit::{
    audit_block_unitarity, box_identity_deviation, BlockAudit, IdentityCheck, LineAudit, LineKind, Product,
};
pub use grid::{BoxGrid, GridLayout, MAX_DUMP_BLOCKS};
pub use layout::{assemble_concentric, assemble_moire, moire_events, EventKind, MoireEvent, MAX_MOIRE_EVENTS};

use std::fmt;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One box entry: `coeff * exp(i (p_a K_a + p_b K_b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasedEntry {
    pub coeff: Complex64,
    pub p_a: i32,
    pub p_b: i32,
}

impl PhasedEntry {
    pub const ZERO: PhasedEntry = PhasedEntry {
        coeff: Complex64::new(0.0, 0.0),
        p_a: 0,
        p_b: 0,
    };

    pub fn new(coeff: f64, p_a: i32, p_b: i32) -> Self {
        PhasedEntry {
            coeff: Complex64::new(coeff, 0.0),
            p_a,
            p_b,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == Complex64::new(0.0, 0.0)
    }

    pub fn value(&self, k_a: f64, k_b: f64) -> Complex64 {
        if self.is_zero() {
            return self.coeff;
        }
        if self.p_a == 0 && self.p_b == 0 {
            return self.coeff;
        }
        self.coeff * Complex64::cis(self.p_a as f64 * k_a + self.p_b as f64 * k_b)
    }

    fn conj(&self) -> PhasedEntry {
        PhasedEntry {
            coeff: self.coeff.conj(),
            p_a: -self.p_a,
            p_b: -self.p_b,
        }
    }
}

/// Names of the printed boxes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxTag {
    M13,
    M24,
    M1,
    M2,
    M3p,
    M3G,
    M4p,
    M4G,
    Zero,
    Custom(String),
}

impl BoxTag {
    pub const NAMED: [BoxTag; 8] = [
        BoxTag::M13,
        BoxTag::M24,
        BoxTag::M1,
        BoxTag::M2,
        BoxTag::M3p,
        BoxTag::M3G,
        BoxTag::M4p,
        BoxTag::M4G,
    ];
}

impl fmt::Display for BoxTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxTag::Custom(label) => write!(f, "Custom({label})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// A 4x4 box of phased entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasedBox {
    pub tag: BoxTag,
    pub theta_n: f64,
    pub theta1: f64,
    pub entries: [[PhasedEntry; 4]; 4],
}

impl PhasedBox {
    pub fn zero() -> Self {
        PhasedBox {
            tag: BoxTag::Zero,
            theta_n: 0.0,
            theta1: 0.0,
            entries: [[PhasedEntry::ZERO; 4]; 4],
        }
    }

    pub fn custom(label: impl Into<String>, entries: [[PhasedEntry; 4]; 4]) -> Self {
        PhasedBox {
            tag: BoxTag::Custom(label.into()),
            theta_n: 0.0,
            theta1: 0.0,
            entries,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(PhasedEntry::is_zero)
    }

    pub fn row_is_zero(&self, row: usize) -> bool {
        self.entries[row].iter().all(PhasedEntry::is_zero)
    }

    pub fn value(&self, k_a: f64, k_b: f64) -> Matrix4<Complex64> {
        Matrix4::from_fn(|i, j| self.entries[i][j].value(k_a, k_b))
    }

    /// Conjugate transpose; exponents flip sign.
    pub fn adjoint(&self) -> PhasedBox {
        let mut entries = [[PhasedEntry::ZERO; 4]; 4];
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                entries[j][i] = e.conj();
            }
        }
        PhasedBox {
            tag: match &self.tag {
                BoxTag::Zero => BoxTag::Zero,
                t => BoxTag::Custom(format!("{t}^H")),
            },
            theta_n: self.theta_n,
            theta1: self.theta1,
            entries,
        }
    }

    /// Multiplies every exponent by `factor`.
    pub fn with_exponent_scale(&self, factor: i32) -> PhasedBox {
        if factor == 1 {
            return self.clone();
        }
        let mut out = self.clone();
        for e in out.entries.iter_mut().flatten() {
            e.p_a *= factor;
            e.p_b *= factor;
        }
        out
    }

    /// Entrywise sum of two boxes. Overlapping nonzero entries must carry the
    /// same exponents.
    pub fn merge(&self, other: &PhasedBox) -> Result<PhasedBox> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let mut entries = self.entries;
        for (i, row) in other.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let slot = &mut entries[i][j];
                if e.is_zero() {
                    continue;
                }
                if slot.is_zero() {
                    *slot = *e;
                } else if slot.p_a == e.p_a && slot.p_b == e.p_b {
                    slot.coeff += e.coeff;
                } else {
                    return Err(Error::invalid(format!(
                        "cannot merge {} into {}: entry ({i}, {j}) has conflicting exponents",
                        other.tag, self.tag
                    )));
                }
            }
        }
        Ok(PhasedBox {
            tag: BoxTag::Custom(format!("{}+{}", self.tag, other.tag)),
            theta_n: self.theta_n,
            theta1: self.theta1,
            entries,
        })
    }

    /// Adds a bare unit entry on the diagonal slot `component`.
    pub(crate) fn with_identity_on(mut self, component: usize, label: &str) -> PhasedBox {
        debug_assert!(self.row_is_zero(component));
        self.entries[component][component] = PhasedEntry::new(1.0, 0, 0);
        self.tag = BoxTag::Custom(label.to_string());
        self
    }
}

fn row(values: [f64; 4], p_a: i32, p_b: i32) -> [PhasedEntry; 4] {
    values.map(|v| {
        if v == 0.0 {
            PhasedEntry::ZERO
        } else {
            PhasedEntry::new(v, p_a, p_b)
        }
    })
}

fn unit(component: usize) -> [PhasedEntry; 4] {
    let mut r = [PhasedEntry::ZERO; 4];
    r[component] = PhasedEntry::new(1.0, 0, 0);
    r
}

/// The printed boxes.
///
/// `M13` holds coin rows 1 and 3 with `exp(-i K_a)`, `exp(-i K_b)`; `M24`
/// rows 2 and 4 with `exp(+i K_a)`, `exp(+i K_b)`. `M1`, `M2` are the A/B
/// rows of the `theta1` rotation, `M3p`, `M4p` the C/D rows of the `theta_n`
/// rotation, and the `G` variants add the identity on components 1 and 2.
pub fn make_box(tag: BoxTag, theta_n: f64, theta1: f64) -> Result<PhasedBox> {
    let (sn, cn) = theta_n.sin_cos();
    let (s1, c1) = theta1.sin_cos();
    let zero = [PhasedEntry::ZERO; 4];
    let entries = match tag {
        BoxTag::M13 => [
            row([c1 * cn, s1 * cn, c1 * sn, s1 * sn], -1, 0),
            zero,
            row([-sn * c1, -sn * s1, cn * c1, cn * s1], 0, -1),
            zero,
        ],
        BoxTag::M24 => [
            zero,
            row([-s1 * cn, c1 * cn, -s1 * sn, c1 * sn], 1, 0),
            zero,
            row([sn * s1, -sn * c1, -cn * s1, cn * c1], 0, 1),
        ],
        BoxTag::M1 => [row([c1, s1, 0.0, 0.0], -1, 0), zero, zero, zero],
        BoxTag::M2 => [zero, row([-s1, c1, 0.0, 0.0], 1, 0), zero, zero],
        BoxTag::M3p => [zero, zero, row([0.0, 0.0, cn, sn], 0, -1), zero],
        BoxTag::M3G => [unit(0), unit(1), row([0.0, 0.0, cn, sn], 0, -1), zero],
        BoxTag::M4p => [zero, zero, zero, row([0.0, 0.0, -sn, cn], 0, 1)],
        BoxTag::M4G => [unit(0), unit(1), zero, row([0.0, 0.0, -sn, cn], 0, 1)],
        BoxTag::Zero | BoxTag::Custom(_) => return Err(Error::invalid(format!("{tag} is not a printed box"))),
    };
    Ok(PhasedBox {
        tag,
        theta_n,
        theta1,
        entries,
    })
}
