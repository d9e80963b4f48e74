//! Acceptance criteria, run in order with one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout and the
//! timed criteria are not competing with other tests for cores.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::Matrix4;
use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringwalk::blockmatrix::{
    assemble_concentric, assemble_moire, audit_block_unitarity, box_identity_deviation, make_box, BoxTag, Product,
};
use ringwalk::evolve::{evolve, evolve_matrix, initial_state, InitialTerm, WalkState};
use ringwalk::linalg::{
    eigen_decompose_unitary, eigenphases_unitary, max_abs_diff, multiset_distance, unitarity_residual,
};
use ringwalk::spectrum::{ab_shift_check, compute_spectrum, Axis, MomentumGrid};
use ringwalk::{
    bloch_step_matrix, build_step_operator, junction_schedule, CoinAngles, Component, JunctionMode, JunctionSchedule,
    MagneticConfig, RingPairConfig,
};
use ringwalk_cli::output::parse_spectrum_csv;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["ringwalk"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = ringwalk_cli::run_with(argv, &mut out, &mut err);
    if code != 0 {
        eprint!("{}", String::from_utf8_lossy(&err));
    }
    code
}

fn random_ring(rng: &mut ChaCha8Rng, max_half: usize) -> RingPairConfig {
    RingPairConfig::new(
        rng.gen_range(1..=max_half),
        Rational64::new(rng.gen_range(1..9), rng.gen_range(1..4)),
        Rational64::new(rng.gen_range(1..9), rng.gen_range(1..4)),
    )
}

const MODES: [JunctionMode; 3] = [JunctionMode::FormulaOr, JunctionMode::FormulaAnd, JunctionMode::All];

fn unitarity_suite() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let config = random_ring(&mut rng, 15);
        let angles = CoinAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let schedule = junction_schedule(&config, MODES[rng.gen_range(0..3)]).map_err(|e| e.to_string())?;
        let magnetic = MagneticConfig::for_sites(config.sites(), rng.gen_range(-3.0..=3.0));
        let (ka, kb) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let step = build_step_operator(&config, &angles, &schedule, &magnetic).map_err(|e| e.to_string())?;
        let bloch = bloch_step_matrix(&config, &angles, &schedule, &magnetic, ka, kb).map_err(|e| e.to_string())?;
        let grid = assemble_concentric(config.sites(), &schedule.theta_profile(&angles), angles.theta1)
            .map_err(|e| e.to_string())?;
        for r in [
            unitarity_residual(&step.matrix),
            unitarity_residual(&bloch),
            unitarity_residual(&grid.evaluate(ka, kb)),
        ] {
            worst = worst.max(r);
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-12 && elapsed < Duration::from_secs(30),
        format!(
            "100 configs, max residual {worst:.2e} (tol 1e-12), {:.2}s (limit 30s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn dispersion_oracle() -> Verdict {
    // Closed form with theta2 = 0: cos w = cos theta1 cos K, K = k - phi + 2 pi m / S.
    let config = RingPairConfig::new(15, Rational64::from_integer(3), Rational64::from_integer(2));
    let sites = config.sites();
    let theta1 = PI / 3.0;
    let angles = CoinAngles::new(theta1, 0.0);
    let schedule = JunctionSchedule::uniform(sites, false);
    let magnetic = MagneticConfig::for_sites(sites, 0.7);
    let (phi_a, phi_b) = magnetic.phase_angles(&config);
    let grid = MomentumGrid::sweep(Axis::Ka, MomentumGrid::uniform_samples(256), 0.41).map_err(|e| e.to_string())?;
    let result = compute_spectrum(&config, &angles, &schedule, &magnetic, &grid).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (&(ka, kb), phases) in result.points.iter().zip(&result.bands) {
        let mut expected = Vec::with_capacity(4 * sites);
        for k in [ka - phi_a, kb - phi_b] {
            for m in 0..sites {
                let big_k = k + 2.0 * PI * m as f64 / sites as f64;
                let w = (theta1.cos() * big_k.cos()).clamp(-1.0, 1.0).acos();
                expected.push(w);
                expected.push(-w);
            }
        }
        expected.sort_by(f64::total_cmp);
        worst = worst.max(multiset_distance(phases, &expected));
    }
    check(
        worst <= 1e-10 && result.points.len() == 256,
        format!("256 samples, S = {sites}, B = 0.7, max band error {worst:.2e} (tol 1e-10)"),
    )
}

fn aharonov_bohm() -> Verdict {
    let config = RingPairConfig::new(15, Rational64::from_integer(3), Rational64::from_integer(2));
    let angles = CoinAngles::new(PI / 4.0, PI / 4.0);
    let schedule = junction_schedule(&config, JunctionMode::FormulaOr).map_err(|e| e.to_string())?;
    let ks = MomentumGrid::uniform_samples(8);
    let grid = MomentumGrid::full(ks.clone(), ks).map_err(|e| e.to_string())?;
    let report = ab_shift_check(&config, &angles, &schedule, 2.0, &grid).map_err(|e| e.to_string())?;
    check(
        report.distances.len() == 64 && report.passes(1e-10),
        format!(
            "B = 2, 64-point grid, shift ({:.6}, {:.6}), max distance {:.2e} (tol 1e-10)",
            report.phi_a, report.phi_b, report.max_distance
        ),
    )
}

fn block_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut symbolic: f64 = 0.0;
    let mut evaluated: f64 = 0.0;
    for _ in 0..50 {
        let (tn, t1) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let b = |t| make_box(t, tn, t1).unwrap();
        let (m13, m24, m1, m3p, m4g) = (
            b(BoxTag::M13),
            b(BoxTag::M24),
            b(BoxTag::M1),
            b(BoxTag::M3p),
            b(BoxTag::M4G),
        );
        let (ka, kb) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        for set in [vec![&m13, &m24], vec![&m1, &m24, &m3p], vec![&m4g, &m3p]] {
            symbolic = symbolic.max(box_identity_deviation(&set, Product::Left).bound);
            let sum: Matrix4<Complex64> = set
                .iter()
                .map(|m| {
                    let v = m.value(ka, kb);
                    v * v.adjoint()
                })
                .sum();
            evaluated = (sum - Matrix4::identity())
                .iter()
                .map(|z| z.norm())
                .fold(evaluated, f64::max);
        }
    }
    check(
        symbolic <= 1e-14 && evaluated <= 1e-14,
        format!("50 angle pairs x 3 identities, bound {symbolic:.2e}, evaluated {evaluated:.2e} (tol 1e-14)"),
    )
}

fn cross_module() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let config = random_ring(&mut rng, 15);
        let sites = config.sites();
        let angles = CoinAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let schedule = junction_schedule(&config, MODES[rng.gen_range(0..3)]).map_err(|e| e.to_string())?;
        let magnetic = MagneticConfig::zero_field(sites);
        let grid =
            assemble_concentric(sites, &schedule.theta_profile(&angles), angles.theta1).map_err(|e| e.to_string())?;
        let (ka, kb) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let bloch = bloch_step_matrix(&config, &angles, &schedule, &magnetic, ka, kb).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&grid.evaluate(ka, kb), &bloch));
    }
    check(
        worst <= 1e-14,
        format!("20 configs, max entry difference {worst:.2e} (tol 1e-14)"),
    )
}

fn column_swap() -> Verdict {
    let theta1 = PI / 3.0;
    let (ka, kb) = ringwalk_cli::commands::GENERIC_MOMENTUM;
    let mut notes = Vec::new();
    let mut ok = true;
    for l in [4usize, 5, 9, 31] {
        let profile: Vec<f64> = (0..l).map(|j| if j % 2 == 0 { PI / 4.0 } else { 0.0 }).collect();
        let grid = assemble_concentric(l, &profile, theta1).map_err(|e| e.to_string())?;
        let swapped = grid.swap_block_columns(0, 2).map_err(|e| e.to_string())?;
        let involution = swapped.swap_block_columns(0, 2).map_err(|e| e.to_string())? == grid;
        let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
        let residual = (0..5)
            .map(|_| unitarity_residual(&swapped.evaluate(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI))))
            .fold(0.0, f64::max);
        let before = eigenphases_unitary(&grid.evaluate(ka, kb))
            .map_err(|e| e.to_string())?
            .phases;
        let after = eigenphases_unitary(&swapped.evaluate(ka, kb))
            .map_err(|e| e.to_string())?
            .phases;
        let change = multiset_distance(&before, &after);
        ok &= involution && residual <= 1e-12 && change > 1e-6;
        notes.push(format!(
            "L={l}: residual {residual:.1e}, involution {involution}, change {change:.2e}"
        ));
    }
    check(ok, notes.join("; "))
}

fn moire_audit() -> Verdict {
    let start = Instant::now();
    let dir = scratch("moire");
    let cfg = dir.join("moire.toml");
    fs::write(
        &cfg,
        "theta1 = \"pi/6\"\ntheta2 = \"pi/2\"\nmoire_outer = 28\nmoire_inner = 21\njunction_count = 1\nk_samples = 128\n",
    )
    .unwrap();
    let code = cli(&["moire", "--config", cfg.to_str().unwrap()]);
    let grid = assemble_moire(28, 21, &CoinAngles::new(PI / 6.0, PI / 2.0), 1).map_err(|e| e.to_string())?;
    let audit = audit_block_unitarity(&grid);
    let csv = fs::read_to_string(dir.join("moire.csv")).map_err(|e| e.to_string())?;
    let rows = parse_spectrum_csv(&csv).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected_rows = 128 * 4 * grid.rows();
    check(
        code == 0 && audit.passes(1e-12) && rows.len() == expected_rows && elapsed < Duration::from_secs(60),
        format!(
            "exit {code}, {} lines, max deviation {:.2e}, evaluated residual {:.2e}, {} csv rows, {:.1}s (limit 60s)",
            audit.lines.len(),
            audit.max_deviation,
            audit.evaluated_residual,
            rows.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn norm_conservation() -> Verdict {
    let config = RingPairConfig::new(15, Rational64::from_integer(3), Rational64::from_integer(2));
    let angles = CoinAngles::new(PI / 4.0, PI / 4.0);
    let schedule = junction_schedule(&config, JunctionMode::FormulaOr).map_err(|e| e.to_string())?;
    let magnetic = MagneticConfig::for_sites(config.sites(), 0.5);
    let op = build_step_operator(&config, &angles, &schedule, &magnetic).map_err(|e| e.to_string())?;
    let start = initial_state(
        config.sites(),
        &[
            InitialTerm::new(0, Component::A, Complex64::new(1.0, 0.0)),
            InitialTerm::new(7, Component::C, Complex64::new(0.0, 1.0)),
        ],
    )
    .map_err(|e| e.to_string())?;
    let end = evolve(&start, &op, 10_000).map_err(|e| e.to_string())?;
    let drift = (end.norm() - start.norm()).abs();

    let u = bloch_step_matrix(&config, &angles, &schedule, &magnetic, 0.3, -1.1).map_err(|e| e.to_string())?;
    let e = eigen_decompose_unitary(&u).map_err(|e| e.to_string())?;
    let vectors = e.vectors.as_ref().unwrap();
    let mut eig_residual: f64 = 0.0;
    for i in 0..e.len() {
        let v = WalkState::from_amplitudes(vectors.column(i).into_owned()).map_err(|e| e.to_string())?;
        let stepped = evolve_matrix(&v, &u, 1).map_err(|e| e.to_string())?;
        let diff = &stepped.amplitudes - &v.amplitudes * e.eigenvalues[i];
        eig_residual = diff.iter().map(|z| z.norm()).fold(eig_residual, f64::max);
    }
    check(
        drift <= 1e-10 && eig_residual <= 1e-9,
        format!("10^4 steps drift {drift:.2e} (tol 1e-10), eigenvector residual {eig_residual:.2e} over {} vectors (tol 1e-9)", e.len()),
    )
}

fn figure_pipeline() -> Verdict {
    let ids = [
        "3a", "3b", "3c", "3d", "3e", "3f", "3g", "3h", "3i", "6a", "6b", "8a", "8b", "10",
    ];
    let runs = [scratch("figures_run1"), scratch("figures_run2")];
    for dir in &runs {
        for id in ids {
            let code = cli(&["reproduce-figure", id, "--out-dir", dir.to_str().unwrap()]);
            if code != 0 {
                return Err(format!("reproduce-figure {id} exited {code}"));
            }
        }
    }
    let mut files: Vec<String> = fs::read_dir(&runs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    for id in ids {
        for ext in ["csv", "gp", "meta.json"] {
            let name = format!("fig{id}.{ext}");
            if !files.contains(&name) {
                return Err(format!("missing {name}"));
            }
        }
    }
    for name in &files {
        let a = fs::read(runs[0].join(name)).unwrap();
        let b = fs::read(runs[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    let fig3a =
        parse_spectrum_csv(&fs::read_to_string(runs[0].join("fig3a.csv")).unwrap()).map_err(|e| e.to_string())?;
    check(
        fig3a.len() == 128 * 124,
        format!(
            "{} panels, {} files byte-identical across two runs, fig3a has {} rows",
            ids.len(),
            files.len(),
            fig3a.len()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("unitarity suite", unitarity_suite),
        ("dispersion oracle", dispersion_oracle),
        ("Aharonov-Bohm shift", aharonov_bohm),
        ("printed block identities", block_identities),
        ("cross-module equivalence", cross_module),
        ("column-swap experiment", column_swap),
        ("Moire audit", moire_audit),
        ("norm conservation", norm_conservation),
        ("figure pipeline", figure_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = run();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {}: {name} [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
