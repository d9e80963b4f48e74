//! Momentum-space spectra of the ring walk.
//!
//! The reported "spectrum" is the eigenphase `omega` of `U(k) v = e^{i omega} v`
//! on the branch `(-pi, pi]`; no sign flip to an energy is applied.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Distribution;
use crate::linalg::{
    eigen_decompose_unitary, eigenphases_unitary, multiset_distance, wrap_phase, CMatrix, UnitaryEigen,
};
use crate::ring::{bloch_step_matrix, CoinAngles, JunctionSchedule, MagneticConfig, RingPairConfig};

/// Momentum axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Ka,
    Kb,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Ka => "k_a",
            Axis::Kb => "k_b",
        }
    }
}

/// Momentum samples: a sweep along one axis with the other fixed, or the full
/// product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MomentumGrid {
    Sweep { axis: Axis, samples: Vec<f64>, fixed: f64 },
    Full { k_a: Vec<f64>, k_b: Vec<f64> },
}

fn check_samples(name: &str, samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid(format!("{name} samples are empty")));
    }
    for &k in samples {
        if !(k > -PI && k <= PI) {
            return Err(Error::invalid(format!("{name} sample {k} lies outside (-pi, pi]")));
        }
    }
    if samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{name} samples must be strictly increasing")));
    }
    Ok(())
}

impl MomentumGrid {
    pub fn sweep(axis: Axis, samples: Vec<f64>, fixed: f64) -> Result<Self> {
        check_samples(axis.as_str(), &samples)?;
        if !fixed.is_finite() {
            return Err(Error::invalid("fixed momentum must be finite"));
        }
        Ok(MomentumGrid::Sweep { axis, samples, fixed })
    }

    pub fn full(k_a: Vec<f64>, k_b: Vec<f64>) -> Result<Self> {
        check_samples("k_a", &k_a)?;
        check_samples("k_b", &k_b)?;
        Ok(MomentumGrid::Full { k_a, k_b })
    }

    /// `n` evenly spaced samples `-pi + 2 pi (j + 1) / n`, ending at `pi`.
    pub fn uniform_samples(n: usize) -> Vec<f64> {
        (0..n).map(|j| -PI + 2.0 * PI * (j + 1) as f64 / n as f64).collect()
    }

    /// `(k_a, k_b)` pairs in evaluation order (row-major over `k_a` for the
    /// full grid).
    pub fn points(&self) -> Vec<(f64, f64)> {
        match self {
            MomentumGrid::Sweep {
                axis: Axis::Ka,
                samples,
                fixed,
            } => samples.iter().map(|&k| (k, *fixed)).collect(),
            MomentumGrid::Sweep {
                axis: Axis::Kb,
                samples,
                fixed,
            } => samples.iter().map(|&k| (*fixed, k)).collect(),
            MomentumGrid::Full { k_a, k_b } => k_a.iter().flat_map(|&a| k_b.iter().map(move |&b| (a, b))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MomentumGrid::Sweep { samples, .. } => samples.len(),
            MomentumGrid::Full { k_a, k_b } => k_a.len() * k_b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Swept values and axis for a 1-D sweep.
    pub fn sweep_values(&self) -> Option<(Axis, &[f64])> {
        match self {
            MomentumGrid::Sweep { axis, samples, .. } => Some((*axis, samples)),
            MomentumGrid::Full { .. } => None,
        }
    }
}

/// Eigenphase bands over a momentum grid.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub grid: MomentumGrid,
    pub points: Vec<(f64, f64)>,
    /// Sorted eigenphases per momentum point.
    pub bands: Vec<Vec<f64>>,
    /// Eigenvectors per point, columns ordered like `bands`.
    pub eigenvectors: Option<Vec<CMatrix>>,
    pub field_b: f64,
}

impl SpectrumResult {
    pub fn branch_count(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub eigenvectors: bool,
    pub parallel: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            eigenvectors: false,
            parallel: true,
        }
    }
}

/// Diagonalizes `build(k_a, k_b)` at every grid point. Results come back in
/// grid order whether or not the sweep runs in parallel.
pub fn sweep<F>(grid: &MomentumGrid, options: SweepOptions, build: F) -> Result<SpectrumResult>
where
    F: Fn(f64, f64) -> Result<CMatrix> + Sync,
{
    let points = grid.points();
    let solve = |(i, &(ka, kb)): (usize, &(f64, f64))| -> Result<UnitaryEigen> {
        let wrap = |e: Error| Error::Sample {
            sample: i,
            source: Box::new(e),
        };
        let u = build(ka, kb).map_err(wrap)?;
        if options.eigenvectors {
            eigen_decompose_unitary(&u).map_err(wrap)
        } else {
            eigenphases_unitary(&u).map_err(wrap)
        }
    };
    let decomposed: Vec<UnitaryEigen> = if options.parallel {
        points.par_iter().enumerate().map(solve).collect::<Result<_>>()?
    } else {
        points.iter().enumerate().map(solve).collect::<Result<_>>()?
    };

    let mut bands = Vec::with_capacity(decomposed.len());
    let mut vectors = options.eigenvectors.then(Vec::new);
    for e in decomposed {
        bands.push(e.phases);
        if let (Some(vs), Some(v)) = (vectors.as_mut(), e.vectors) {
            vs.push(v);
        }
    }
    Ok(SpectrumResult {
        grid: grid.clone(),
        points,
        bands,
        eigenvectors: vectors,
        field_b: 0.0,
    })
}

/// Eigenphases of the Bloch step matrix over `grid`.
pub fn compute_spectrum(
    config: &RingPairConfig,
    angles: &CoinAngles,
    schedule: &JunctionSchedule,
    magnetic: &MagneticConfig,
    grid: &MomentumGrid,
) -> Result<SpectrumResult> {
    compute_spectrum_with(config, angles, schedule, magnetic, grid, SweepOptions::default())
}

pub fn compute_spectrum_with(
    config: &RingPairConfig,
    angles: &CoinAngles,
    schedule: &JunctionSchedule,
    magnetic: &MagneticConfig,
    grid: &MomentumGrid,
    options: SweepOptions,
) -> Result<SpectrumResult> {
    let mut result = sweep(grid, options, |ka, kb| {
        bloch_step_matrix(config, angles, schedule, magnetic, ka, kb)
    })?;
    result.field_b = magnetic.field_b;
    Ok(result)
}

/// Outcome of [`ab_shift_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbShiftReport {
    pub field_b: f64,
    /// Momentum shift on the A/B ring.
    pub phi_a: f64,
    /// Momentum shift on the C/D ring.
    pub phi_b: f64,
    /// Multiset distance per grid point.
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub worst_point: Option<(f64, f64)>,
}

impl AbShiftReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_distance <= tolerance
    }
}

/// Compares the spectrum with field `field_b` at `(k_a, k_b)` against the
/// zero-field spectrum at `(k_a - phi_a, k_b - phi_b)`.
pub fn ab_shift_check(
    config: &RingPairConfig,
    angles: &CoinAngles,
    schedule: &JunctionSchedule,
    field_b: f64,
    grid: &MomentumGrid,
) -> Result<AbShiftReport> {
    let with_field = MagneticConfig::for_sites(config.sites(), field_b);
    let without = with_field.with_field(0.0);
    let (phi_a, phi_b) = with_field.phase_angles(config);

    let points = grid.points();
    let distances: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(ka, kb))| -> Result<f64> {
            let wrap = |e: Error| Error::Sample {
                sample: i,
                source: Box::new(e),
            };
            let shifted = bloch_step_matrix(config, angles, schedule, &with_field, ka, kb)
                .and_then(|u| eigenphases_unitary(&u))
                .map_err(wrap)?;
            let reference = bloch_step_matrix(config, angles, schedule, &without, ka - phi_a, kb - phi_b)
                .and_then(|u| eigenphases_unitary(&u))
                .map_err(wrap)?;
            Ok(multiset_distance(&shifted.phases, &reference.phases))
        })
        .collect::<Result<_>>()?;

    let (max_distance, worst_point) = distances
        .iter()
        .zip(&points)
        .fold((0.0f64, None), |(best, at), (&d, &p)| {
            if d > best || at.is_none() {
                (d.max(best), Some(p))
            } else {
                (best, at)
            }
        });
    Ok(AbShiftReport {
        field_b,
        phi_a,
        phi_b,
        distances,
        max_distance,
        worst_point,
    })
}

/// A tracked band and its slope along a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupVelocity {
    pub k: Vec<f64>,
    /// Unwrapped eigenphase of the tracked band.
    pub omega: Vec<f64>,
    /// `d omega / d k`: central differences inside, one-sided at the ends.
    pub velocity: Vec<f64>,
    /// Sample indices where band continuation was ambiguous.
    pub ambiguous: Vec<usize>,
}

/// Follows band `band_index` (its position in the sorted eigenphases at the
/// first sample) along the sweep by nearest continuation and differentiates.
///
/// Near-degenerate candidates are separated by eigenvector overlap when the
/// result carries eigenvectors; anything still unresolved is listed in
/// [`GroupVelocity::ambiguous`].
pub fn group_velocity(result: &SpectrumResult, band_index: usize, axis: Axis) -> Result<GroupVelocity> {
    let (sweep_axis, ks) = result
        .grid
        .sweep_values()
        .ok_or_else(|| Error::invalid("group velocity needs a one-dimensional sweep"))?;
    if sweep_axis != axis {
        return Err(Error::invalid(format!(
            "spectrum sweeps {} but velocity was requested along {}",
            sweep_axis.as_str(),
            axis.as_str()
        )));
    }
    if ks.len() < 3 {
        return Err(Error::invalid("group velocity needs at least three samples"));
    }
    let branches = result.branch_count();
    if band_index >= branches {
        return Err(Error::IndexOutOfRange {
            index: band_index,
            len: branches,
        });
    }

    let mut index = band_index;
    let mut omega = vec![result.bands[0][index]];
    let mut ambiguous = Vec::new();

    for s in 1..ks.len() {
        let last = omega[s - 1];
        let predicted = if s >= 2 {
            last + (last - omega[s - 2]) * (ks[s] - ks[s - 1]) / (ks[s - 1] - ks[s - 2])
        } else {
            last
        };
        let row = &result.bands[s];
        let mut dist: Vec<(f64, usize)> = row
            .iter()
            .enumerate()
            .map(|(j, &w)| (wrap_phase(w - predicted).abs(), j))
            .collect();
        dist.sort_by(|x, y| x.0.total_cmp(&y.0));
        let window = 4.0 * dist[0].0 + 1e-10;
        let contenders: Vec<usize> = dist.iter().take_while(|(d, _)| *d <= window).map(|&(_, j)| j).collect();

        let chosen = if contenders.len() == 1 {
            contenders[0]
        } else if let Some(vectors) = &result.eigenvectors {
            let prev = vectors[s - 1].column(index);
            let mut overlaps: Vec<(f64, usize)> = contenders
                .iter()
                .map(|&j| (prev.dotc(&vectors[s].column(j)).norm(), j))
                .collect();
            overlaps.sort_by(|x, y| y.0.total_cmp(&x.0));
            if overlaps[0].0 - overlaps[1].0 < 0.2 {
                ambiguous.push(s);
            }
            overlaps[0].1
        } else {
            ambiguous.push(s);
            dist[0].1
        };
        index = chosen;
        omega.push(last + wrap_phase(row[chosen] - last));
    }

    let n = ks.len();
    let mut velocity = Vec::with_capacity(n);
    velocity.push((omega[1] - omega[0]) / (ks[1] - ks[0]));
    for j in 1..n - 1 {
        velocity.push((omega[j + 1] - omega[j - 1]) / (ks[j + 1] - ks[j - 1]));
    }
    velocity.push((omega[n - 1] - omega[n - 2]) / (ks[n - 1] - ks[n - 2]));

    Ok(GroupVelocity {
        k: ks.to_vec(),
        omega,
        velocity,
        ambiguous,
    })
}

/// Site-resolved probabilities of eigenvector `eigen_index` (sorted by
/// eigenphase) of a unitary whose dimension is a multiple of four.
pub fn eigenstate_distribution(matrix: &CMatrix, eigen_index: usize) -> Result<Distribution> {
    if !matrix.nrows().is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "matrix dimension {} is not a multiple of four",
            matrix.nrows()
        )));
    }
    let e = eigen_decompose_unitary(matrix)?;
    if eigen_index >= e.len() {
        return Err(Error::IndexOutOfRange {
            index: eigen_index,
            len: e.len(),
        });
    }
    let vectors = e.vectors.as_ref().expect("requested eigenvectors");
    Ok(Distribution::from_amplitudes(
        vectors.column(eigen_index).iter().copied(),
    ))
}

/// Fraction of probability within cyclic distance `window` of any junction.
pub fn junction_mass(dist: &Distribution, junction_sites: &[usize], window: usize) -> f64 {
    let s = dist.sites();
    if s == 0 || junction_sites.is_empty() {
        return 0.0;
    }
    (0..s)
        .filter(|&n| {
            junction_sites.iter().any(|&j| {
                let d = (n + s - j % s) % s;
                d.min(s - d) <= window
            })
        })
        .map(|n| dist.site_total(n))
        .sum::<f64>()
        / dist.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{build_step_operator, junction_schedule, JunctionMode};
    use num_rational::Rational64;

    fn ring(n: usize, a: i64, b: i64) -> RingPairConfig {
        RingPairConfig::new(n, Rational64::from_integer(a), Rational64::from_integer(b))
    }

    #[test]
    fn grid_validation() {
        assert!(MomentumGrid::sweep(Axis::Ka, vec![], 0.0).is_err());
        assert!(MomentumGrid::sweep(Axis::Ka, vec![0.1, 0.1], 0.0).is_err());
        assert!(MomentumGrid::sweep(Axis::Ka, vec![-PI], 0.0).is_err());
        assert!(MomentumGrid::sweep(Axis::Ka, vec![PI], 0.0).is_ok());
        assert!(MomentumGrid::sweep(Axis::Kb, vec![0.0], f64::NAN).is_err());
        let u = MomentumGrid::uniform_samples(8);
        assert_eq!(u.len(), 8);
        assert_eq!(*u.last().unwrap(), PI);
        assert!(MomentumGrid::full(u.clone(), u).is_ok());
    }

    #[test]
    fn full_grid_points_are_row_major() {
        let g = MomentumGrid::full(vec![0.1, 0.2], vec![-0.5, 0.5, 1.0]).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], (0.1, -0.5));
        assert_eq!(p[2], (0.1, 1.0));
        assert_eq!(p[3], (0.2, -0.5));
    }

    #[test]
    fn zero_angle_band_count_and_closed_form() {
        // theta1 = theta2 = 0: phased cyclic shifts, eigenphases -k - 2 pi m / S
        // and +k + 2 pi m / S on each ring.
        let c = ring(3, 2, 1);
        let s = c.sites();
        let angles = CoinAngles::new(0.0, 0.0);
        let sched = junction_schedule(&c, JunctionMode::FormulaOr).unwrap();
        let mag = MagneticConfig::zero_field(s);
        let grid = MomentumGrid::sweep(Axis::Ka, vec![-1.0, 0.3, 2.0], 0.7).unwrap();
        let res = compute_spectrum(&c, &angles, &sched, &mag, &grid).unwrap();
        for (bands, &(ka, kb)) in res.bands.iter().zip(&res.points) {
            assert_eq!(bands.len(), 4 * s);
            let mut expected = Vec::new();
            for m in 0..s {
                let q = 2.0 * PI * m as f64 / s as f64;
                for k in [ka, kb] {
                    expected.push(wrap_phase(-(k + q)));
                    expected.push(wrap_phase(k + q));
                }
            }
            expected.sort_by(f64::total_cmp);
            assert!(multiset_distance(bands, &expected) < 1e-12);
        }
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let c = ring(4, 3, 2);
        let angles = CoinAngles::new(0.4, 0.9);
        let sched = junction_schedule(&c, JunctionMode::FormulaOr).unwrap();
        let mag = MagneticConfig::for_sites(c.sites(), 0.5);
        let grid = MomentumGrid::sweep(Axis::Kb, MomentumGrid::uniform_samples(16), 0.2).unwrap();
        let par = compute_spectrum_with(
            &c,
            &angles,
            &sched,
            &mag,
            &grid,
            SweepOptions {
                eigenvectors: false,
                parallel: true,
            },
        )
        .unwrap();
        let ser = compute_spectrum_with(
            &c,
            &angles,
            &sched,
            &mag,
            &grid,
            SweepOptions {
                eigenvectors: false,
                parallel: false,
            },
        )
        .unwrap();
        assert_eq!(par.bands, ser.bands);
    }

    #[test]
    fn free_walker_velocity_is_minus_one() {
        // S = 1, no mixing: the A band is omega = -k.
        let c = ring(0, 1, 1);
        let angles = CoinAngles::new(0.0, 0.0);
        let sched = JunctionSchedule::uniform(1, true);
        let mag = MagneticConfig::zero_field(1);
        let ks: Vec<f64> = (0..200).map(|j| 0.5 + 0.01 * j as f64).collect();
        let grid = MomentumGrid::sweep(Axis::Ka, ks, 2.9).unwrap();
        let res = compute_spectrum(&c, &angles, &sched, &mag, &grid).unwrap();
        let band = res.bands[0].iter().position(|&w| (w + 0.5).abs() < 1e-12).unwrap();
        let gv = group_velocity(&res, band, Axis::Ka).unwrap();
        assert!(gv.ambiguous.is_empty());
        for v in gv.velocity {
            assert!((v + 1.0).abs() < 1e-9, "{v}");
        }
        assert!(group_velocity(&res, band, Axis::Kb).is_err());
        assert!(group_velocity(&res, 4, Axis::Ka).is_err());
    }

    #[test]
    fn eigenstate_distribution_of_shift_is_uniform() {
        let c = ring(2, 1, 1);
        let s = c.sites();
        let angles = CoinAngles::new(0.0, 0.0);
        let sched = JunctionSchedule::uniform(s, true);
        let op = build_step_operator(&c, &angles, &sched, &MagneticConfig::zero_field(s)).unwrap();
        let e = eigen_decompose_unitary(&op.matrix).unwrap();
        // Eigenphases are distinct within a sector only for generic momenta;
        // at zero momentum the four sectors share each Fourier eigenvalue, so
        // look at sector-resolved totals instead of picking a sector.
        for j in 0..e.len() {
            let d = eigenstate_distribution(&op.matrix, j).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-10);
        }
        let u = bloch_step_matrix(&c, &angles, &sched, &MagneticConfig::zero_field(s), 0.3, 1.1).unwrap();
        for j in 0..4 * s {
            let d = eigenstate_distribution(&u, j).unwrap();
            let marg = d.component_marginals();
            let comp = (0..4).find(|&k| marg[k] > 0.5).unwrap();
            for n in 0..s {
                assert!((d.probs[n][comp] - 1.0 / s as f64).abs() < 1e-10);
            }
        }
        assert!(matches!(
            eigenstate_distribution(&u, 4 * s),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn junction_mass_window() {
        let d = Distribution {
            probs: vec![
                [0.25, 0.0, 0.0, 0.0],
                [0.0, 0.25, 0.0, 0.0],
                [0.0; 4],
                [0.0; 4],
                [0.5, 0.0, 0.0, 0.0],
            ],
        };
        assert!((junction_mass(&d, &[0], 0) - 0.25).abs() < 1e-15);
        assert!((junction_mass(&d, &[0], 1) - 1.0).abs() < 1e-15);
        assert_eq!(junction_mass(&d, &[], 1), 0.0);
    }
}
