use num_integer::Integer;

use super::{make_box, BoxGrid, BoxTag, GridLayout};
use crate::error::{Error, Result};
use crate::ring::CoinAngles;

/// Largest number of events a Moire layout may have.
pub const MAX_MOIRE_EVENTS: usize = 512;

/// Cyclic concentric grid for `L` sites.
///
/// Row `j` holds `M13(theta_{j-1})` in column `j-1` and `M24(theta_{j+1})` in
/// column `j+1` (mod `L`). For `L = 2` both land in the same cell and are
/// merged. Evaluating at `(K_a, K_b)` reproduces the Bloch step matrix.
pub fn assemble_concentric(sites: usize, theta_profile: &[f64], theta1: f64) -> Result<BoxGrid> {
    if sites < 2 {
        return Err(Error::invalid(format!(
            "concentric grid needs at least 2 sites, got {sites}"
        )));
    }
    if theta_profile.len() != sites {
        return Err(Error::DimensionMismatch {
            expected: sites,
            found: theta_profile.len(),
        });
    }
    if !theta1.is_finite() || theta_profile.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("coin angles must be finite"));
    }
    let mut grid = BoxGrid::new(sites, sites, GridLayout::Concentric, true);
    for j in 0..sites {
        let prev = (j + sites - 1) % sites;
        let next = (j + 1) % sites;
        grid.insert(j, prev, make_box(BoxTag::M13, theta_profile[prev], theta1)?)?;
        grid.insert(j, next, make_box(BoxTag::M24, theta_profile[next], theta1)?)?;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Both rings have a node here and the rings are coupled.
    Junction,
    /// Both rings have a node here, without coupling.
    Coincident,
    OuterOnly,
    InnerOnly,
}

impl EventKind {
    pub fn on_outer(self) -> bool {
        !matches!(self, EventKind::InnerOnly)
    }

    pub fn on_inner(self) -> bool {
        !matches!(self, EventKind::OuterOnly)
    }
}

/// A node position on the shared circumference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoireEvent {
    /// Position in units of `circumference / lcm(n_outer, n_inner)`.
    pub position: u64,
    pub kind: EventKind,
}

/// Merged node positions of two rings with `n_outer` and `n_inner` nodes on
/// the same circumference, in angular order.
///
/// `junction_count` coupled nodes are spread evenly over the coincident
/// positions, starting at position 0.
pub fn moire_events(n_outer: usize, n_inner: usize, junction_count: usize) -> Result<Vec<MoireEvent>> {
    if n_outer < 2 || n_inner < 2 {
        return Err(Error::invalid(format!(
            "each ring needs at least 2 nodes, got {n_outer} and {n_inner}"
        )));
    }
    let circumference = (n_outer as u64).lcm(&(n_inner as u64));
    let s_outer = circumference / n_outer as u64;
    let s_inner = circumference / n_inner as u64;
    let s_both = s_outer.lcm(&s_inner);
    let coincident = (circumference / s_both) as usize;
    let events = n_outer + n_inner - coincident;
    if events > MAX_MOIRE_EVENTS {
        return Err(Error::invalid(format!(
            "{events} merged nodes exceed the limit of {MAX_MOIRE_EVENTS}"
        )));
    }
    if junction_count == 0 || junction_count > coincident {
        return Err(Error::invalid(format!(
            "junction_count must be in 1..={coincident}, got {junction_count}"
        )));
    }
    let junction_slots: Vec<usize> = (0..junction_count).map(|j| j * coincident / junction_count).collect();
    let mut out = Vec::with_capacity(events);
    let mut coincident_seen = 0;
    for position in 0..circumference {
        let outer = position % s_outer == 0;
        let inner = position % s_inner == 0;
        let kind = match (outer, inner) {
            (true, true) => {
                let slot = coincident_seen;
                coincident_seen += 1;
                if junction_slots.contains(&slot) {
                    EventKind::Junction
                } else {
                    EventKind::Coincident
                }
            }
            (true, false) => EventKind::OuterOnly,
            (false, true) => EventKind::InnerOnly,
            (false, false) => continue,
        };
        out.push(MoireEvent { position, kind });
    }
    debug_assert_eq!(out.len(), events);
    Ok(out)
}

/// Cyclic Moire grid over the merged node sequence of two rings.
///
/// Event `e` scatters into event `e+1` through its forward rows (A, C) and
/// into `e-1` through its backward rows (B, D):
///
/// * junction: `M13(theta2, theta1)` / `M24(theta2, theta1)`
/// * coincident: `M13(0, theta1)` / `M24(0, theta1)`
/// * outer only: `M1` / `M2`, the inner components pass through unchanged
/// * inner only: `M3p` / `M4p` with angle `theta1`, the outer components pass
///   through unchanged
///
/// With `n_outer = n_inner = junction_count = L` the grid equals the
/// concentric grid with `theta2` on every site.
pub fn assemble_moire(n_outer: usize, n_inner: usize, angles: &CoinAngles, junction_count: usize) -> Result<BoxGrid> {
    angles.validate()?;
    let events = moire_events(n_outer, n_inner, junction_count)?;
    let e_count = events.len();
    let (t1, t2) = (angles.theta1, angles.theta2);
    let mut grid = BoxGrid::new(e_count, e_count, GridLayout::Moire, true);
    for (e, event) in events.iter().enumerate() {
        let next = (e + 1) % e_count;
        let prev = (e + e_count - 1) % e_count;
        let (forward, backward) = match event.kind {
            EventKind::Junction => (make_box(BoxTag::M13, t2, t1)?, make_box(BoxTag::M24, t2, t1)?),
            EventKind::Coincident => (make_box(BoxTag::M13, 0.0, t1)?, make_box(BoxTag::M24, 0.0, t1)?),
            EventKind::OuterOnly => (
                make_box(BoxTag::M1, 0.0, t1)?.with_identity_on(2, "M1+I"),
                make_box(BoxTag::M2, 0.0, t1)?.with_identity_on(3, "M2+I"),
            ),
            EventKind::InnerOnly => (
                make_box(BoxTag::M3p, t1, t1)?.with_identity_on(0, "M3p+I"),
                make_box(BoxTag::M4p, t1, t1)?.with_identity_on(1, "M4p+I"),
            ),
        };
        grid.insert(next, e, forward)?;
        grid.insert(prev, e, backward)?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_residual};
    use crate::ring::{walk_matrix, HopPhases};

    #[test]
    fn concentric_matches_walk_matrix() {
        for sites in [2usize, 3, 5, 8] {
            let profile: Vec<f64> = (0..sites).map(|j| 0.1 + 0.37 * j as f64).collect();
            let g = assemble_concentric(sites, &profile, 0.6).unwrap();
            for &(ka, kb) in &[(0.0, 0.0), (0.3, -1.2), (2.9, 2.2)] {
                let lhs = g.evaluate(ka, kb);
                let rhs = walk_matrix(&profile, 0.6, &HopPhases::momentum(ka, kb));
                assert!(max_abs_diff(&lhs, &rhs) <= 1e-14, "sites {sites}");
            }
        }
    }

    #[test]
    fn concentric_validation() {
        assert!(assemble_concentric(1, &[0.0], 0.0).is_err());
        assert!(assemble_concentric(3, &[0.0; 2], 0.0).is_err());
        assert!(assemble_concentric(3, &[0.0, f64::NAN, 0.0], 0.0).is_err());
    }

    #[test]
    fn moire_event_counts() {
        let ev = moire_events(28, 21, 1).unwrap();
        assert_eq!(ev.len(), 42);
        let count = |k| ev.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EventKind::Junction), 1);
        assert_eq!(count(EventKind::Coincident), 6);
        assert_eq!(count(EventKind::OuterOnly), 21);
        assert_eq!(count(EventKind::InnerOnly), 14);
        assert_eq!(ev[0].kind, EventKind::Junction);
        let ev = moire_events(28, 21, 7).unwrap();
        assert_eq!(ev.iter().filter(|e| e.kind == EventKind::Junction).count(), 7);
        assert!(moire_events(28, 21, 8).is_err());
        assert!(moire_events(28, 21, 0).is_err());
        assert!(moire_events(1, 21, 1).is_err());
        assert!(moire_events(509, 503, 1).is_err());
    }

    #[test]
    fn moire_is_unitary() {
        let angles = CoinAngles::new(std::f64::consts::PI / 6.0, std::f64::consts::PI / 2.0);
        for (no, ni, j) in [(28, 21, 1), (4, 3, 1), (6, 4, 2), (5, 5, 3)] {
            let g = assemble_moire(no, ni, &angles, j).unwrap();
            for &(ka, kb) in &[(0.0, 0.0), (1.1, -0.4)] {
                assert!(unitarity_residual(&g.evaluate(ka, kb)) < 1e-13);
            }
        }
    }

    #[test]
    fn moire_degenerates_to_concentric() {
        let angles = CoinAngles::new(0.4, 1.3);
        for l in [2usize, 3, 6] {
            let m = assemble_moire(l, l, &angles, l).unwrap();
            let c = assemble_concentric(l, &vec![1.3; l], 0.4).unwrap();
            for &(ka, kb) in &[(0.0, 0.0), (0.8, 2.0)] {
                assert_eq!(m.evaluate(ka, kb), c.evaluate(ka, kb));
            }
        }
    }
}
