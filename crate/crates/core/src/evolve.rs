//! Real-space evolution of a single walker state.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ring::{Component, StepOperator};

pub const NORM_TOL: f64 = 1e-10;

/// Per-site, per-component probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    /// `probs[site][component]`, component order A, B, C, D.
    pub probs: Vec<[f64; 4]>,
}

impl Distribution {
    pub fn from_amplitudes<I: IntoIterator<Item = Complex64>>(amplitudes: I) -> Self {
        let flat: Vec<f64> = amplitudes.into_iter().map(|z| z.norm_sqr()).collect();
        let probs = flat
            .chunks(4)
            .map(|c| {
                let mut site = [0.0; 4];
                site[..c.len()].copy_from_slice(c);
                site
            })
            .collect();
        Distribution { probs }
    }

    pub fn sites(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }

    pub fn site_total(&self, site: usize) -> f64 {
        self.probs[site].iter().sum()
    }

    /// Total probability per component.
    pub fn component_marginals(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for site in &self.probs {
            for (acc, p) in m.iter_mut().zip(site) {
                *acc += p;
            }
        }
        m
    }

    /// `(P(A) + P(B), P(C) + P(D))`.
    pub fn sector_occupation(&self) -> (f64, f64) {
        let m = self.component_marginals();
        (m[0] + m[1], m[2] + m[3])
    }
}

/// Normalized amplitudes over `S` sites at an integer time.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    /// Site-major, component order A, B, C, D.
    pub amplitudes: DVector<Complex64>,
    pub time: u64,
}

/// One term of an initial superposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialTerm {
    pub site: usize,
    pub component: Component,
    pub weight: Complex64,
}

impl InitialTerm {
    pub fn new(site: usize, component: Component, weight: Complex64) -> Self {
        InitialTerm {
            site,
            component,
            weight,
        }
    }
}

impl WalkState {
    pub fn sites(&self) -> usize {
        self.amplitudes.len() / 4
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn amplitude(&self, site: usize, component: Component) -> Complex64 {
        self.amplitudes[4 * site + component.index()]
    }

    /// Normalizes an arbitrary amplitude vector.
    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_multiple_of(4) {
            return Err(Error::invalid(format!(
                "state length {} is not a positive multiple of four",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("state amplitudes have zero or non-finite norm"));
        }
        Ok(WalkState {
            amplitudes: amplitudes / Complex64::new(norm, 0.0),
            time: 0,
        })
    }

    pub fn conj(&self) -> WalkState {
        WalkState {
            amplitudes: self.amplitudes.map(|z| z.conj()),
            time: self.time,
        }
    }
}

/// Normalized superposition of the given terms on a ring of `sites` sites.
/// An empty term list means the localized default, amplitude 1 on `(0, A)`.
pub fn initial_state(sites: usize, terms: &[InitialTerm]) -> Result<WalkState> {
    if sites == 0 {
        return Err(Error::invalid("a ring needs at least one site"));
    }
    let mut amps = DVector::from_element(4 * sites, Complex64::new(0.0, 0.0));
    if terms.is_empty() {
        amps[0] = Complex64::new(1.0, 0.0);
    }
    for t in terms {
        if t.site >= sites {
            return Err(Error::IndexOutOfRange {
                index: t.site,
                len: sites,
            });
        }
        amps[4 * t.site + t.component.index()] += t.weight;
    }
    if amps.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::invalid("initial state weights are all zero"));
    }
    WalkState::from_amplitudes(amps)
}

/// `t` applications of `operator`.
pub fn evolve(state: &WalkState, operator: &StepOperator, t: u64) -> Result<WalkState> {
    evolve_matrix(state, &operator.matrix, t)
}

/// [`evolve`] for a bare unitary of matching dimension.
pub fn evolve_matrix(state: &WalkState, u: &CMatrix, t: u64) -> Result<WalkState> {
    check_dims(state, u)?;
    let mut psi = state.amplitudes.clone();
    let mut next = psi.clone();
    for _ in 0..t {
        u.mul_to(&psi, &mut next);
        std::mem::swap(&mut psi, &mut next);
    }
    Ok(WalkState {
        amplitudes: psi,
        time: state.time + t,
    })
}

fn check_dims(state: &WalkState, u: &CMatrix) -> Result<()> {
    if u.nrows() != state.amplitudes.len() || u.ncols() != state.amplitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: state.amplitudes.len(),
            found: u.nrows(),
        });
    }
    Ok(())
}

/// Bounded record of states along an evolution.
#[derive(Debug, Clone)]
pub struct History {
    /// Recorded states, the initial one first.
    pub states: Vec<WalkState>,
    /// Set when more snapshots were due than `cap` allowed.
    pub truncated: bool,
}

/// Evolves `t` steps, recording the state every `every` steps (including the
/// start) until `cap` snapshots are held.
pub fn evolve_with_history(
    state: &WalkState,
    operator: &StepOperator,
    t: u64,
    every: u64,
    cap: usize,
) -> Result<(WalkState, History)> {
    let u = &operator.matrix;
    check_dims(state, u)?;
    if every == 0 || cap == 0 {
        return Err(Error::invalid("history stride and cap must be positive"));
    }
    let mut history = History {
        states: vec![state.clone()],
        truncated: false,
    };
    let mut current = state.clone();
    for step in 1..=t {
        current = evolve_matrix(&current, u, 1)?;
        if step % every == 0 {
            if history.states.len() < cap {
                history.states.push(current.clone());
            } else {
                history.truncated = true;
            }
        }
    }
    Ok((current, history))
}

pub fn probability_distribution(state: &WalkState) -> Distribution {
    Distribution::from_amplitudes(state.amplitudes.iter().copied())
}

/// Ring-sector occupations `(P(A) + P(B), P(C) + P(D))` per recorded state.
pub fn sector_transfer(states: &[WalkState]) -> Vec<(f64, f64)> {
    states
        .iter()
        .map(|s| probability_distribution(s).sector_occupation())
        .collect()
}
