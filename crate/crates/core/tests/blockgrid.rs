use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringwalk::blockmatrix::{
    assemble_concentric, assemble_moire, audit_block_unitarity, moire_events, BoxGrid, EventKind,
};
use ringwalk::linalg::{eigenphases_unitary, max_abs_diff, multiset_distance, unitarity_residual, CMatrix};
use ringwalk::ring::build_coin;
use ringwalk::{
    bloch_step_matrix, build_step_operator, junction_schedule, CoinAngles, JunctionMode, MagneticConfig, RingPairConfig,
};

const MODES: [JunctionMode; 3] = [JunctionMode::FormulaOr, JunctionMode::FormulaAnd, JunctionMode::All];

#[test]
fn concentric_grid_reproduces_bloch_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let config = RingPairConfig::new(
            rng.gen_range(1..10),
            Rational64::new(rng.gen_range(1..9), rng.gen_range(1..4)),
            Rational64::new(rng.gen_range(1..9), rng.gen_range(1..4)),
        );
        let angles = CoinAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let schedule = junction_schedule(&config, MODES[rng.gen_range(0..3)]).unwrap();
        let magnetic = MagneticConfig::zero_field(config.sites());
        let grid = assemble_concentric(config.sites(), &schedule.theta_profile(&angles), angles.theta1).unwrap();
        let (ka, kb) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let bloch = bloch_step_matrix(&config, &angles, &schedule, &magnetic, ka, kb).unwrap();
        assert!(max_abs_diff(&grid.evaluate(ka, kb), &bloch) <= 1e-14);
        let step = build_step_operator(&config, &angles, &schedule, &magnetic).unwrap();
        assert!(max_abs_diff(&grid.evaluate(0.0, 0.0), &step.matrix) <= 1e-14);
        assert!(audit_block_unitarity(&grid).passes(1e-12));
    }
}

#[test]
fn column_swap_changes_spectrum_but_not_unitarity() {
    let theta1 = PI / 3.0;
    for l in [4usize, 5, 9] {
        let profile: Vec<f64> = (0..l).map(|j| if j % 2 == 0 { PI / 4.0 } else { 0.0 }).collect();
        let grid = assemble_concentric(l, &profile, theta1).unwrap();
        let swapped = grid.swap_block_columns(0, 2).unwrap();
        assert_eq!(swapped.swap_block_columns(0, 2).unwrap(), grid);
        let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
        for _ in 0..5 {
            let (ka, kb) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            assert!(unitarity_residual(&swapped.evaluate(ka, kb)) <= 1e-12);
        }
        let (ka, kb) = (0.737, -1.291);
        let before = eigenphases_unitary(&grid.evaluate(ka, kb)).unwrap().phases;
        let after = eigenphases_unitary(&swapped.evaluate(ka, kb)).unwrap().phases;
        assert_eq!(after.len(), 4 * l);
        assert!(multiset_distance(&before, &after) > 1e-6);
    }
}

#[test]
fn degenerate_moire_matches_concentric_spectrum() {
    let angles = CoinAngles::new(PI / 6.0, PI / 2.0);
    for l in [3usize, 7] {
        let moire = assemble_moire(l, l, &angles, l).unwrap();
        let concentric = assemble_concentric(l, &vec![angles.theta2; l], angles.theta1).unwrap();
        for &(ka, kb) in &[(0.0, 0.0), (0.4, -2.2)] {
            let a = eigenphases_unitary(&moire.evaluate(ka, kb)).unwrap().phases;
            let b = eigenphases_unitary(&concentric.evaluate(ka, kb)).unwrap().phases;
            assert!(multiset_distance(&a, &b) <= 1e-12);
        }
    }
}

/// Two-component walk on the outer ring built directly from the event list:
/// `R(theta1)` at events carrying an outer node, identity elsewhere.
fn outer_sector_walk(kinds: &[EventKind], theta1: f64) -> CMatrix {
    let e = kinds.len();
    let (s, c) = theta1.sin_cos();
    let mut u = CMatrix::zeros(2 * e, 2 * e);
    for (n, kind) in kinds.iter().enumerate() {
        let coin = if kind.on_outer() {
            [[c, s], [-s, c]]
        } else {
            [[1.0, 0.0], [0.0, 1.0]]
        };
        let fwd = (n + 1) % e;
        let bwd = (n + e - 1) % e;
        for j in 0..2 {
            u[(2 * fwd, 2 * n + j)] += Complex64::new(coin[0][j], 0.0);
            u[(2 * bwd + 1, 2 * n + j)] += Complex64::new(coin[1][j], 0.0);
        }
    }
    u
}

#[test]
fn moire_outer_sector_matches_direct_walk() {
    let theta1 = PI / 6.0;
    let angles = CoinAngles::new(theta1, 0.0);
    for (n_outer, n_inner) in [(28usize, 21usize), (6, 4), (5, 3)] {
        let kinds: Vec<EventKind> = moire_events(n_outer, n_inner, 1)
            .unwrap()
            .iter()
            .map(|e| e.kind)
            .collect();
        let grid = assemble_moire(n_outer, n_inner, &angles, 1).unwrap();
        let u = grid.evaluate(0.0, 0.0);
        let e = kinds.len();
        // Block diagonal: no amplitude between (A, B) and (C, D).
        for r in 0..4 * e {
            for c in 0..4 * e {
                if (r % 4 < 2) != (c % 4 < 2) {
                    assert_eq!(u[(r, c)], Complex64::new(0.0, 0.0));
                }
            }
        }
        let outer_idx: Vec<usize> = (0..4 * e).filter(|i| i % 4 < 2).collect();
        let outer = CMatrix::from_fn(2 * e, 2 * e, |r, c| u[(outer_idx[r], outer_idx[c])]);
        let oracle = outer_sector_walk(&kinds, theta1);
        assert!(max_abs_diff(&outer, &oracle) <= 1e-15);
        let a = eigenphases_unitary(&outer).unwrap().phases;
        let b = eigenphases_unitary(&oracle).unwrap().phases;
        assert!(multiset_distance(&a, &b) <= 1e-10);
    }
}

#[test]
fn moire_paper_geometry_audits_clean() {
    let angles = CoinAngles::new(PI / 6.0, PI / 2.0);
    let grid = assemble_moire(28, 21, &angles, 1).unwrap();
    assert_eq!(grid.rows(), 42);
    let audit = audit_block_unitarity(&grid);
    assert!(audit.passes(1e-12), "{:?}", audit.worst(3));
    // The junction couples the rings; coincident non-junction nodes do not.
    let u = grid.evaluate(0.0, 0.0);
    let junction_col = 0;
    let mixes = (0..4 * 42).any(|r| r % 4 >= 2 && u[(r, 4 * junction_col)].norm() > 1e-12);
    assert!(mixes);
}

#[test]
fn coin_rows_appear_verbatim_in_moire_junction() {
    let angles = CoinAngles::new(0.3, 1.2);
    let grid = assemble_moire(4, 2, &angles, 1).unwrap();
    let coin = build_coin(1.2, 0.3);
    let m = grid.evaluate(0.0, 0.0);
    let e = grid.rows();
    for j in 0..4 {
        assert_eq!(m[(4, j)].re, coin[(0, j)]);
        assert_eq!(m[(4 * (e - 1) + 1, j)].re, coin[(1, j)]);
    }
}

#[test]
fn golden_dump() {
    let grid = assemble_concentric(3, &[PI / 4.0, 0.0, PI / 4.0], PI / 3.0).unwrap();
    let swapped = grid.swap_block_columns(0, 2).unwrap();
    let text = swapped.to_dump();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/concentric3_swap02.json");
    if std::env::var_os("RINGWALK_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, golden);
    let parsed = BoxGrid::from_dump(&golden).unwrap();
    assert_eq!(parsed, swapped);
    assert_eq!(parsed.evaluate(0.3, 0.2), swapped.evaluate(0.3, 0.2));
}
