use std::collections::BTreeMap;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoxGrid, PhasedBox};
use crate::linalg::unitarity_residual;

const AUDIT_SEED: u64 = 0x5eed_b0c5;
const AUDIT_SAMPLES: usize = 8;

/// Which Gram product to form from a set of boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Product {
    /// `sum M M^H`
    Left,
    /// `sum M^H M`
    Right,
}

/// Laurent polynomial in `(exp(i K_a), exp(i K_b))` with 4x4 coefficients.
type Laurent = BTreeMap<(i32, i32), [[Complex64; 4]; 4]>;

#[allow(clippy::needless_range_loop)]
fn gram(boxes: &[&PhasedBox], product: Product) -> Laurent {
    let mut out = Laurent::new();
    for b in boxes {
        let e = &b.entries;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let (x, y) = match product {
                        Product::Left => (e[i][k], e[j][k]),
                        Product::Right => (e[k][i], e[k][j]),
                    };
                    if x.is_zero() || y.is_zero() {
                        continue;
                    }
                    // Left: x * conj(y); Right: conj(x) * y.
                    let (coeff, key) = match product {
                        Product::Left => (x.coeff * y.coeff.conj(), (x.p_a - y.p_a, x.p_b - y.p_b)),
                        Product::Right => (x.coeff.conj() * y.coeff, (y.p_a - x.p_a, y.p_b - x.p_b)),
                    };
                    out.entry(key).or_insert([[Complex64::new(0.0, 0.0); 4]; 4])[i][j] += coeff;
                }
            }
        }
    }
    out
}

/// Result of comparing a Gram sum against the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// Bound on `max |sum - I|` valid for every momentum pair.
    pub bound: f64,
    /// True when every term's exponents cancel, so the bound is attained.
    pub symbolic: bool,
}

fn identity_deviation(poly: &Laurent) -> IdentityCheck {
    let mut totals = [[0.0f64; 4]; 4];
    let mut symbolic = true;
    let mut saw_constant = false;
    for (&key, coeffs) in poly {
        let constant = key == (0, 0);
        saw_constant |= constant;
        if !constant {
            symbolic = false;
        }
        for i in 0..4 {
            for j in 0..4 {
                let mut c = coeffs[i][j];
                if constant && i == j {
                    c -= 1.0;
                }
                totals[i][j] += c.norm();
            }
        }
    }
    if !saw_constant {
        for (i, row) in totals.iter_mut().enumerate() {
            row[i] += 1.0;
        }
    }
    IdentityCheck {
        bound: totals.iter().flatten().fold(0.0, |m, &x| m.max(x)),
        symbolic,
    }
}

/// Deviation of `sum M M^H` (or `sum M^H M`) from the identity, treating the
/// boxes as Laurent polynomials in the momenta.
pub fn box_identity_deviation(boxes: &[&PhasedBox], product: Product) -> IdentityCheck {
    identity_deviation(&gram(boxes, product))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Row,
    Col,
}

/// Gram check for one block row (`sum M M^H`) or block column (`sum M^H M`).
#[derive(Debug, Clone, PartialEq)]
pub struct LineAudit {
    pub kind: LineKind,
    pub index: usize,
    pub deviation: f64,
    pub symbolic: bool,
    /// Largest deviation seen at the sampled momenta.
    pub sampled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAudit {
    pub lines: Vec<LineAudit>,
    pub max_deviation: f64,
    /// `max |U U^H - I|` of the evaluated grid over the sampled momenta;
    /// infinite for non-square grids.
    pub evaluated_residual: f64,
    pub momenta: Vec<(f64, f64)>,
}

impl BlockAudit {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_deviation <= tolerance && self.evaluated_residual <= tolerance
    }

    /// The `n` lines with the largest deviation.
    pub fn worst(&self, n: usize) -> Vec<&LineAudit> {
        let mut v: Vec<&LineAudit> = self.lines.iter().collect();
        v.sort_by(|a, b| b.deviation.total_cmp(&a.deviation));
        v.truncate(n);
        v
    }
}

fn sampled_deviation(boxes: &[&PhasedBox], product: Product, momenta: &[(f64, f64)]) -> f64 {
    let mut worst = 0.0f64;
    for &(ka, kb) in momenta {
        let mut sum = Matrix4::<Complex64>::zeros();
        for b in boxes {
            let m = b.value(ka, kb);
            sum += match product {
                Product::Left => m * m.adjoint(),
                Product::Right => m.adjoint() * m,
            };
        }
        sum -= Matrix4::identity();
        worst = worst.max(sum.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    worst
}

/// Checks that every block row satisfies `sum M M^H = I` and every block
/// column `sum M^H M = I`, symbolically in the momenta, and cross-checks at
/// seeded random momenta.
pub fn audit_block_unitarity(grid: &BoxGrid) -> BlockAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(AUDIT_SEED);
    let pi = std::f64::consts::PI;
    let momenta: Vec<(f64, f64)> = (0..AUDIT_SAMPLES)
        .map(|_| (rng.gen_range(-pi..pi), rng.gen_range(-pi..pi)))
        .collect();
    let mut lines = Vec::with_capacity(grid.rows() + grid.cols());
    let mut audit_line = |kind, index, boxes: Vec<(usize, PhasedBox)>| {
        let refs: Vec<&PhasedBox> = boxes.iter().map(|(_, b)| b).collect();
        let product = match kind {
            LineKind::Row => Product::Left,
            LineKind::Col => Product::Right,
        };
        let check = box_identity_deviation(&refs, product);
        lines.push(LineAudit {
            kind,
            index,
            deviation: check.bound,
            symbolic: check.symbolic,
            sampled: sampled_deviation(&refs, product, &momenta),
        });
    };
    for r in 0..grid.rows() {
        audit_line(LineKind::Row, r, grid.block_row(r));
    }
    for c in 0..grid.cols() {
        audit_line(LineKind::Col, c, grid.block_col(c));
    }
    let max_deviation = lines.iter().map(|l| l.deviation).fold(0.0, f64::max);
    let evaluated_residual = if grid.rows() == grid.cols() {
        momenta
            .iter()
            .map(|&(ka, kb)| unitarity_residual(&grid.evaluate(ka, kb)))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    BlockAudit {
        lines,
        max_deviation,
        evaluated_residual,
        momenta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmatrix::{assemble_concentric, assemble_moire, make_box, BoxTag};
    use crate::ring::CoinAngles;

    #[test]
    fn printed_identities() {
        let (tn, t1) = (0.83, -1.9);
        let b = |t| make_box(t, tn, t1).unwrap();
        let (m13, m24, m1, m3p, m4g) = (
            b(BoxTag::M13),
            b(BoxTag::M24),
            b(BoxTag::M1),
            b(BoxTag::M3p),
            b(BoxTag::M4G),
        );
        for set in [vec![&m13, &m24], vec![&m1, &m24, &m3p], vec![&m4g, &m3p]] {
            let c = box_identity_deviation(&set, Product::Left);
            assert!(c.bound <= 1e-14, "{c:?}");
        }
        // M13 alone is a projector, not the identity.
        assert!((box_identity_deviation(&[&m13], Product::Left).bound - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_products_are_symbolic() {
        let m1 = make_box(BoxTag::M1, 0.0, 0.4).unwrap();
        assert!(box_identity_deviation(&[&m1], Product::Left).symbolic);
        let m13 = make_box(BoxTag::M13, 0.3, 0.4).unwrap();
        assert!(!box_identity_deviation(&[&m13], Product::Left).symbolic);
        assert_eq!(box_identity_deviation(&[], Product::Left).bound, 1.0);
    }

    #[test]
    fn concentric_and_moire_pass() {
        let g = assemble_concentric(6, &[0.2, 0.9, 0.2, 0.2, 1.4, 0.2], 0.7).unwrap();
        let a = audit_block_unitarity(&g);
        assert!(a.passes(1e-12), "{:?}", a.worst(3));
        let angles = CoinAngles::new(std::f64::consts::PI / 6.0, std::f64::consts::PI / 2.0);
        let m = assemble_moire(8, 6, &angles, 2).unwrap();
        let a = audit_block_unitarity(&m);
        assert!(a.passes(1e-12), "{:?}", a.worst(3));
        assert_eq!(a.lines.len(), 2 * m.rows());
    }

    #[test]
    fn zeroed_box_is_reported() {
        let mut g = assemble_concentric(5, &[0.3; 5], 0.7).unwrap();
        g.remove(3, 2);
        let a = audit_block_unitarity(&g);
        assert!(!a.passes(1e-12));
        let worst = a.worst(2);
        assert!(worst.iter().any(|l| l.kind == LineKind::Row && l.index == 3));
        assert!(worst.iter().any(|l| l.kind == LineKind::Col && l.index == 2));
        assert!(worst[0].deviation >= 0.5);
    }

    #[test]
    fn audit_is_deterministic() {
        let g = assemble_concentric(3, &[0.3, 0.1, 0.3], 0.7).unwrap();
        assert_eq!(audit_block_unitarity(&g), audit_block_unitarity(&g));
    }
}
