//! Dense complex linear algebra for unitary step operators.
//!
//! The eigen-solver is a complex Schur decomposition (Householder reduction to
//! Hessenberg form followed by implicitly shifted single-shift QR with
//! exceptional shifts). For a normal matrix the Schur factor is diagonal, so
//! the unitary Schur vectors double as an orthonormal eigenbasis even inside
//! degenerate eigenspaces. Permutation-like unitaries (the zero-angle walk)
//! stall plain Wilkinson-shifted QR, which is why the exceptional shifts are
//! not optional here.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on `max|U U† - I|` accepted by [`eigen_decompose_unitary`].
pub const UNITARY_INPUT_TOL: f64 = 1e-10;
/// Tolerance on eigenpair residuals and eigenvalue moduli.
pub const EIGEN_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Max-norm of `U U† - I`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    // U U† = V† V with V = U†; the column-dot form is cache friendly.
    let v = u.adjoint();
    let prod = v.ad_mul(&v);
    let mut worst = 0.0f64;
    for j in 0..prod.ncols() {
        for i in 0..prod.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

/// Max-norm of the entrywise difference; infinite on shape mismatch.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Maps an angle onto the half-open branch `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Argument of a complex number on the `(-pi, pi]` branch.
pub fn phase_of(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Bottleneck distance between two multisets of phases on the unit circle.
///
/// Both inputs must be sorted ascending. On a circle the optimal bottleneck
/// matching between sorted sets is a cyclic rotation, so every rotation is
/// tried. Sizes that differ give `f64::INFINITY`.
pub fn multiset_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for r in 0..n {
        let mut worst = 0.0f64;
        for j in 0..n {
            worst = worst.max(wrap_phase(a[j] - b[(j + r) % n]).abs());
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
    }
    best
}

/// Eigen-decomposition of a unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    /// Eigenvalues, ordered by ascending eigenphase.
    pub eigenvalues: Vec<Complex64>,
    /// Eigenphases on `(-pi, pi]`, ascending. Ties keep the Schur order.
    pub phases: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the same order as `phases`.
    /// `None` when only eigenphases were requested.
    pub vectors: Option<CMatrix>,
}

impl UnitaryEigen {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Eigenphases and eigenvectors of a unitary matrix.
///
/// Rejects inputs whose unitarity residual exceeds [`UNITARY_INPUT_TOL`], and
/// verifies every returned pair against [`EIGEN_TOL`].
pub fn eigen_decompose_unitary(u: &CMatrix) -> Result<UnitaryEigen> {
    decompose(u, true)
}

/// Eigenphases only; skips accumulation of the Schur vectors.
pub fn eigenphases_unitary(u: &CMatrix) -> Result<UnitaryEigen> {
    decompose(u, false)
}

fn decompose(u: &CMatrix, want_vectors: bool) -> Result<UnitaryEigen> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.ncols(),
        });
    }
    let residual = unitarity_residual(u);
    if residual.is_nan() || residual > UNITARY_INPUT_TOL {
        return Err(Error::Contract {
            what: "unitarity of input matrix",
            residual,
            tolerance: UNITARY_INPUT_TOL,
        });
    }

    let (t, q) = complex_schur(u.clone(), want_vectors)?;
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|j| (phase_of(t[(j, j)]), j)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    for &(phase, j) in &pairs {
        let lambda = t[(j, j)];
        let modulus_err = (lambda.norm() - 1.0).abs();
        if modulus_err > EIGEN_TOL {
            return Err(Error::Contract {
                what: "eigenvalue modulus",
                residual: modulus_err,
                tolerance: EIGEN_TOL,
            });
        }
        eigenvalues.push(lambda);
        phases.push(phase);
    }

    let vectors = match q {
        None => None,
        Some(q) => {
            let mut v = CMatrix::zeros(n, n);
            let scale = operator_scale(u);
            for (dst, &(_, j)) in pairs.iter().enumerate() {
                let col = q.column(j);
                let r = (u * col - col * t[(j, j)]).norm();
                if r > EIGEN_TOL * scale {
                    return Err(Error::Contract {
                        what: "eigenpair residual",
                        residual: r,
                        tolerance: EIGEN_TOL * scale,
                    });
                }
                v.set_column(dst, &col);
            }
            Some(v)
        }
    };

    Ok(UnitaryEigen {
        eigenvalues,
        phases,
        vectors,
    })
}

fn operator_scale(u: &CMatrix) -> f64 {
    (0..u.ncols()).map(|j| u.column(j).norm()).fold(1.0, f64::max)
}

#[inline]
fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Complex Schur decomposition `A = Q T Q†`, returning `(T, Q)`.
pub(crate) fn complex_schur(mut h: CMatrix, want_q: bool) -> Result<(CMatrix, Option<CMatrix>)> {
    let n = h.nrows();
    let mut z = if want_q { Some(CMatrix::identity(n, n)) } else { None };
    if n == 0 {
        return Ok((h, z));
    }
    to_hessenberg(&mut h, z.as_mut());
    hessenberg_qr(&mut h, z.as_mut())?;
    Ok((h, z))
}

/// Householder reduction to upper Hessenberg form, accumulating into `z`.
fn to_hessenberg(a: &mut CMatrix, mut z: Option<&mut CMatrix>) {
    let n = a.nrows();
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let norm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let unit = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -unit * norm;
        v[0] = x0 - alpha;
        for i in 1..m {
            v[i] = a[(k + 1 + i, k)];
        }
        let vnorm2: f64 = v[..m].iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;

        // Left: rows k+1.., columns k..
        for j in k..n {
            let mut s = ZERO;
            for i in 0..m {
                s += v[i].conj() * a[(k + 1 + i, j)];
            }
            s *= tau;
            for i in 0..m {
                a[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        // Right: all rows, columns k+1..
        reflect_columns(a, k + 1, &v[..m], tau, &mut w);
        if let Some(z) = z.as_deref_mut() {
            reflect_columns(z, k + 1, &v[..m], tau, &mut w);
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// `M[:, first..first+len(v)] -= tau (M[:, first..] v) v†`, column by column.
fn reflect_columns(m: &mut CMatrix, first: usize, v: &[Complex64], tau: f64, w: &mut [Complex64]) {
    w.fill(ZERO);
    for (j, &vj) in v.iter().enumerate() {
        for (wi, &x) in w.iter_mut().zip(m.column(first + j).iter()) {
            *wi += x * vj;
        }
    }
    for (j, &vj) in v.iter().enumerate() {
        let f = vj.conj() * tau;
        for (x, &wi) in m.column_mut(first + j).iter_mut().zip(w.iter()) {
            *x -= wi * f;
        }
    }
}

/// Rotation `G = [[c, s], [-conj(s), c]]` with `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    if ax == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let norm = ax.hypot(y.norm());
    (ax / norm, (x / ax) * y.conj() / norm)
}

fn hessenberg_qr(h: &mut CMatrix, mut z: Option<&mut CMatrix>) -> Result<()> {
    let n = h.nrows();
    let ulp = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n as f64) / ulp;
    let anorm = h.iter().map(|x| cabs1(*x)).fold(0.0, f64::max).max(small);
    let max_sweeps = 100 * n.max(10);
    let mut sweeps = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        // Deflation: find the start of the unreduced trailing block.
        let mut lo = 0;
        for k in (1..=hi).rev() {
            let sub = cabs1(h[(k, k - 1)]);
            if sub <= small {
                h[(k, k - 1)] = ZERO;
                lo = k;
                break;
            }
            let mut tst = cabs1(h[(k - 1, k - 1)]) + cabs1(h[(k, k)]);
            if tst == 0.0 {
                if k >= 2 {
                    tst += h[(k - 1, k - 2)].re.abs();
                }
                if k < hi {
                    tst += h[(k + 1, k)].re.abs();
                }
                if tst == 0.0 {
                    tst = anorm;
                }
            }
            if sub <= ulp * tst {
                // Ahues & Tisseur conservative criterion.
                let ab = sub.max(cabs1(h[(k - 1, k)]));
                let ba = sub.min(cabs1(h[(k - 1, k)]));
                let aa = cabs1(h[(k, k)]).max(cabs1(h[(k - 1, k - 1)] - h[(k, k)]));
                let bb = cabs1(h[(k, k)]).min(cabs1(h[(k - 1, k - 1)] - h[(k, k)]));
                let s = aa + ab;
                if s == 0.0 || ba * (ab / s) <= small.max(ulp * (bb * (aa / s))) {
                    h[(k, k - 1)] = ZERO;
                    lo = k;
                    break;
                }
            }
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }

        sweeps += 1;
        its += 1;
        if sweeps > max_sweeps {
            return Err(Error::NoConvergence(sweeps));
        }

        let shift = if its.is_multiple_of(20) {
            h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].re.abs()
        } else if its.is_multiple_of(10) {
            h[(lo, lo)] + 0.75 * h[(lo + 1, lo)].re.abs()
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        // Without Schur vectors only the active block needs updating.
        let (row_end, col_start) = if z.is_some() { (n, 0) } else { (hi + 1, lo) };
        // Implicit single-shift bulge chase over [lo, hi].
        for k in lo..hi {
            let (x, y) = if k == lo {
                (h[(lo, lo)] - shift, h[(lo + 1, lo)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let start = if k == lo { lo } else { k - 1 };
            for j in start..row_end {
                let p = h[(k, j)];
                let q = h[(k + 1, j)];
                h[(k, j)] = p * c + s * q;
                h[(k + 1, j)] = -s.conj() * p + q * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
            let last = (k + 2).min(hi);
            for i in col_start..=last {
                let p = h[(i, k)];
                let q = h[(i, k + 1)];
                h[(i, k)] = p * c + q * s.conj();
                h[(i, k + 1)] = -s * p + q * c;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let p = z[(i, k)];
                    let q = z[(i, k + 1)];
                    z[(i, k)] = p * c + q * s.conj();
                    z[(i, k + 1)] = -s * p + q * c;
                }
            }
        }
    }
    Ok(())
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let r1 = mean + disc;
    let r2 = mean - disc;
    if (r1 - d).norm() <= (r2 - d).norm() {
        r1
    } else {
        r2
    }
}
