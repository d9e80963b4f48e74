//! Subcommand runners. Each returns the artifacts to write plus a short
//! report; nothing here touches the filesystem.

use std::collections::BTreeMap;

use ringwalk::blockmatrix::{
    assemble_concentric, assemble_moire, audit_block_unitarity, BlockAudit, BoxGrid, LineKind,
};
use ringwalk::evolve::{evolve_with_history, initial_state, probability_distribution, sector_transfer, Distribution};
use ringwalk::linalg::{eigen_decompose_unitary, eigenphases_unitary, multiset_distance, unitarity_residual};
use ringwalk::spectrum::{
    ab_shift_check, compute_spectrum, eigenstate_distribution, sweep, MomentumGrid, SpectrumResult, SweepOptions,
};
use ringwalk::{bloch_step_matrix, build_step_operator, JunctionMode, StepOperator};
use serde_json::json;

use crate::config::{ExperimentConfig, RingSetup, SweepAxis};
use crate::error::CliError;
use crate::figures::{figure_spec, FigureId, FigureKind};
use crate::output::{
    distribution_csv, distribution_gnuplot, fmt_f64, grid_spectrum_gnuplot, sectors_csv, sectors_gnuplot, spectrum_csv,
    spectrum_gnuplot, table_csv, Metadata,
};

/// Unitarity, block-audit and grid-residual tolerance.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Largest accepted multiset distance in the flux-shift check.
pub const AB_SHIFT_TOL: f64 = 1e-10;
/// Largest accepted norm drift of an evolution.
pub const NORM_TOL: f64 = 1e-10;
/// Momentum at which swap experiments compare spectra.
pub const GENERIC_MOMENTUM: (f64, f64) = (0.737, -1.291);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<Artifact>,
    /// Lines for stdout.
    pub report: Vec<String>,
    pub warnings: Vec<String>,
    /// Set when a tolerance check failed; the artifacts are still written.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn add(&mut self, name: String, contents: String) {
        self.files.push(Artifact { name, contents });
    }

    fn finish(mut self, stem: &str, mut meta: Metadata) -> Outcome {
        meta.outputs = self.files.iter().map(|a| a.name.clone()).collect();
        self.add(format!("{stem}.meta.json"), meta.to_json());
        self
    }

    fn fail(&mut self, msg: String) {
        if self.failure.is_none() {
            self.failure = Some(CliError::Numerical(msg));
        }
    }
}

fn axis_label(cfg: &ExperimentConfig) -> &'static str {
    match cfg.sweep_axis() {
        SweepAxis::Kb => "K_b",
        _ => "K_a",
    }
}

/// Band CSV and the matching plot script.
fn add_bands(out: &mut Outcome, stem: &str, cfg: &ExperimentConfig, result: &SpectrumResult, title: &str) {
    let csv = format!("{stem}.csv");
    let png = format!("{stem}.png");
    let script = if matches!(result.grid, MomentumGrid::Full { .. }) {
        grid_spectrum_gnuplot(&csv, &png, title)
    } else {
        spectrum_gnuplot(&csv, &png, title, axis_label(cfg))
    };
    out.add(csv, spectrum_csv(result));
    out.add(format!("{stem}.gp"), script);
}

fn ring_summary(setup: &RingSetup) -> serde_json::Value {
    let (phi_a, phi_b) = setup.magnetic.phase_angles(&setup.config);
    json!({
        "sites": setup.config.sites(),
        "step_a": setup.config.step_a.to_string(),
        "step_b": setup.config.step_b.to_string(),
        "theta1": setup.angles.theta1,
        "theta2": setup.angles.theta2,
        "junction_sites": setup.schedule.junction_sites(),
        "field_b": setup.magnetic.field_b,
        "phi_a": phi_a,
        "phi_b": phi_b,
    })
}

fn junction_warning(cfg: &ExperimentConfig, setup: &RingSetup) -> Option<String> {
    let mode = cfg.junction_mode.unwrap_or(JunctionMode::FormulaOr);
    let formula = matches!(mode, JunctionMode::FormulaOr | JunctionMode::FormulaAnd);
    (formula && setup.or_and_differ).then(|| {
        format!(
            "junction rule is ambiguous for a = {}, b = {}: the OR and AND readings select different sites; using {}",
            setup.config.step_a,
            setup.config.step_b,
            mode.as_str()
        )
    })
}

/// Checks the real-space step operator before any sweep.
fn checked_step_operator(setup: &RingSetup, out: &mut Outcome) -> Result<(StepOperator, f64), CliError> {
    let op = build_step_operator(&setup.config, &setup.angles, &setup.schedule, &setup.magnetic)?;
    let residual = unitarity_residual(&op.matrix);
    if residual > UNITARITY_TOL {
        out.fail(format!(
            "step operator unitarity residual {residual:e} exceeds {UNITARITY_TOL:e}"
        ));
    }
    Ok((op, residual))
}

pub fn spectrum(cfg: &ExperimentConfig, stem: &str, mut meta: Metadata) -> Result<Outcome, CliError> {
    let setup = cfg.ring()?;
    let grid = cfg.momentum_grid()?;
    let mut out = Outcome::default();
    out.warnings.extend(junction_warning(cfg, &setup));
    let (_, residual) = checked_step_operator(&setup, &mut out)?;
    let result = compute_spectrum(&setup.config, &setup.angles, &setup.schedule, &setup.magnetic, &grid)?;
    let title = format!(
        "a = {}, b = {}, S = {}, B = {}",
        setup.config.step_a,
        setup.config.step_b,
        setup.config.sites(),
        setup.magnetic.field_b
    );
    add_bands(&mut out, stem, cfg, &result, &title);
    out.report.push(format!(
        "{} samples x {} branches, step unitarity residual {residual:.3e}",
        result.points.len(),
        result.branch_count()
    ));
    let mut summary = ring_summary(&setup);
    summary["samples"] = json!(result.points.len());
    summary["branches"] = json!(result.branch_count());
    summary["unitarity_residual"] = json!(residual);
    meta.results = summary;
    Ok(out.finish(stem, meta))
}

pub fn evolve(cfg: &ExperimentConfig, stem: &str, mut meta: Metadata) -> Result<Outcome, CliError> {
    let setup = cfg.ring()?;
    let steps = cfg.steps()?;
    let (every, cap) = cfg.history()?;
    let terms = cfg.initial_terms()?;
    let mut out = Outcome::default();
    out.warnings.extend(junction_warning(cfg, &setup));
    let (op, _) = checked_step_operator(&setup, &mut out)?;
    let start = initial_state(setup.config.sites(), &terms)?;
    let (end, history) = evolve_with_history(&start, &op, steps, every, cap)?;
    if history.truncated {
        out.warnings.push(format!(
            "history capped at {cap} snapshots; later steps are not in the sector series"
        ));
    }
    let drift = (end.norm() - start.norm()).abs();
    if drift > NORM_TOL {
        out.fail(format!("norm drift {drift:e} after {steps} steps exceeds {NORM_TOL:e}"));
    }

    let dist = probability_distribution(&end);
    let series: Vec<(u64, f64, f64)> = history
        .states
        .iter()
        .zip(sector_transfer(&history.states))
        .map(|(s, (ab, cd))| (s.time, ab, cd))
        .collect();
    let csv = format!("{stem}.csv");
    let sectors = format!("{stem}_sectors.csv");
    let title = format!("t = {steps}, S = {}", setup.config.sites());
    out.add(csv.clone(), distribution_csv(&dist));
    out.add(sectors.clone(), sectors_csv(&series));
    out.add(
        format!("{stem}.gp"),
        distribution_gnuplot(&[csv], &format!("{stem}.png"), &title),
    );
    out.add(
        format!("{stem}_sectors.gp"),
        sectors_gnuplot(&sectors, &format!("{stem}_sectors.png"), &title),
    );
    let (ab, cd) = dist.sector_occupation();
    out.report.push(format!(
        "{steps} steps, norm drift {drift:.3e}, sectors A+B {ab:.6} C+D {cd:.6}"
    ));
    let mut summary = ring_summary(&setup);
    summary["steps"] = json!(steps);
    summary["norm_drift"] = json!(drift);
    summary["final_sectors"] = json!([ab, cd]);
    summary["history_truncated"] = json!(history.truncated);
    meta.results = summary;
    Ok(out.finish(stem, meta))
}

fn audit_rows(audit: &BlockAudit) -> Vec<Vec<String>> {
    audit
        .lines
        .iter()
        .map(|l| {
            vec![
                match l.kind {
                    LineKind::Row => "row".to_string(),
                    LineKind::Col => "col".to_string(),
                },
                l.index.to_string(),
                fmt_f64(l.deviation),
                l.symbolic.to_string(),
                fmt_f64(l.sampled),
            ]
        })
        .collect()
}

/// Appends the audit table and records a failure if any line breaks tolerance.
fn add_audit(out: &mut Outcome, stem: &str, audit: &BlockAudit) -> serde_json::Value {
    out.add(
        format!("{stem}_audit.csv"),
        table_csv(
            &["line", "index", "deviation", "symbolic", "sampled"],
            &audit_rows(audit),
        ),
    );
    let symbolic = audit.lines.iter().filter(|l| l.symbolic).count();
    out.report.push(format!(
        "block audit: {} lines ({symbolic} symbolic), max deviation {:.3e}, evaluated residual {:.3e}",
        audit.lines.len(),
        audit.max_deviation,
        audit.evaluated_residual
    ));
    if !audit.passes(UNITARITY_TOL) {
        let worst: Vec<String> = audit
            .worst(3)
            .iter()
            .map(|l| format!("{:?} {} = {:e}", l.kind, l.index, l.deviation))
            .collect();
        out.fail(format!(
            "block audit exceeds {UNITARITY_TOL:e}: max deviation {:e}, evaluated residual {:e}; worst {}",
            audit.max_deviation,
            audit.evaluated_residual,
            worst.join(", ")
        ));
    }
    json!({
        "lines": audit.lines.len(),
        "symbolic_lines": symbolic,
        "max_deviation": audit.max_deviation,
        "evaluated_residual": audit.evaluated_residual,
        "passes": audit.passes(UNITARITY_TOL),
    })
}

fn grid_bands(grid: &BoxGrid, momenta: &MomentumGrid) -> Result<SpectrumResult, CliError> {
    Ok(sweep(momenta, SweepOptions::default(), |ka, kb| {
        Ok(grid.evaluate(ka, kb))
    })?)
}

pub fn moire(cfg: &ExperimentConfig, stem: &str, mut meta: Metadata) -> Result<Outcome, CliError> {
    let (n_outer, n_inner, junctions) = cfg.moire()?;
    let angles = cfg.angles()?;
    let momenta = cfg.momentum_grid()?;
    let grid = assemble_moire(n_outer, n_inner, &angles, junctions)?;
    let mut out = Outcome::default();
    let audit = audit_block_unitarity(&grid);
    let audit_json = add_audit(&mut out, stem, &audit);
    let bands = grid_bands(&grid, &momenta)?;
    let title = format!(
        "Moire {n_outer}/{n_inner}, E = {}, {junctions} junction(s)",
        grid.rows()
    );
    add_bands(&mut out, stem, cfg, &bands, &title);
    out.report
        .push(format!("{} merged nodes, {} samples", grid.rows(), bands.points.len()));
    meta.results = json!({
        "n_outer": n_outer,
        "n_inner": n_inner,
        "junction_count": junctions,
        "events": grid.rows(),
        "branches": bands.branch_count(),
        "audit": audit_json,
    });
    Ok(out.finish(stem, meta))
}

/// Concentric box grid for a zero-field ring config.
fn concentric_grid(setup: &RingSetup) -> Result<BoxGrid, CliError> {
    if setup.magnetic.field_b != 0.0 {
        return Err(CliError::config("box grids carry no field phases; set field_b = 0"));
    }
    let profile = setup.schedule.theta_profile(&setup.angles);
    Ok(assemble_concentric(
        setup.config.sites(),
        &profile,
        setup.angles.theta1,
    )?)
}

pub fn swap(cfg: &ExperimentConfig, stem: &str, mut meta: Metadata) -> Result<Outcome, CliError> {
    let setup = cfg.ring()?;
    let (i, j) = cfg.swap_pair()?;
    let momenta = cfg.momentum_grid()?;
    let grid = concentric_grid(&setup)?;
    let swapped = grid.swap_block_columns(i, j)?;
    let mut out = Outcome::default();
    let involution = swapped.swap_block_columns(i, j)? == grid;
    if !involution {
        out.fail(format!("swapping columns {i} and {j} twice did not restore the grid"));
    }
    let residual = swapped.sampled_unitarity_residual();
    if residual > UNITARITY_TOL {
        out.fail(format!(
            "swapped grid unitarity residual {residual:e} exceeds {UNITARITY_TOL:e}"
        ));
    }
    let (ka, kb) = GENERIC_MOMENTUM;
    let before = eigenphases_unitary(&grid.evaluate(ka, kb))?.phases;
    let after = eigenphases_unitary(&swapped.evaluate(ka, kb))?.phases;
    let change = multiset_distance(&before, &after);

    let bands = grid_bands(&swapped, &momenta)?;
    let title = if i == j {
        format!("concentric grid, S = {}", setup.config.sites())
    } else {
        format!("columns {i} and {j} swapped, S = {}", setup.config.sites())
    };
    add_bands(&mut out, stem, cfg, &bands, &title);
    out.add(format!("{stem}.grid.json"), swapped.to_dump());
    out.report.push(format!(
        "swap ({i}, {j}): residual {residual:.3e}, involution {involution}, spectral change {change:.3e} at ({ka}, {kb})"
    ));
    let mut summary = ring_summary(&setup);
    summary["swap"] = json!([i, j]);
    summary["unitarity_residual"] = json!(residual);
    summary["involution"] = json!(involution);
    summary["spectral_change"] = json!(change);
    summary["spectral_change_momentum"] = json!([ka, kb]);
    meta.results = summary;
    Ok(out.finish(stem, meta))
}

/// Where the audited grid comes from.
pub enum AuditSource<'a> {
    Dump(&'a str),
    Config(&'a ExperimentConfig),
}

pub fn audit(source: AuditSource<'_>, stem: &str, mut meta: Metadata) -> Result<Outcome, CliError> {
    let grid = match source {
        AuditSource::Dump(text) => BoxGrid::from_dump(text)?,
        AuditSource::Config(cfg) if cfg.moire_outer.is_some() => {
            let (n_outer, n_inner, junctions) = cfg.moire()?;
            assemble_moire(n_outer, n_inner, &cfg.angles()?, junctions)?
        }
        AuditSource::Config(cfg) => concentric_grid(&cfg.ring()?)?,
    };
    let mut out = Outcome::default();
    let mut summary = add_audit(&mut out, stem, &audit_block_unitarity(&grid));
    summary["rows"] = json!(grid.rows());
    summary["cols"] = json!(grid.cols());
    meta.results = summary;
    Ok(out.finish(stem, meta))
}

pub fn ab_shift(
    cfg: &ExperimentConfig,
    field: Option<f64>,
    stem: &str,
    mut meta: Metadata,
) -> Result<Outcome, CliError> {
    let setup = cfg.ring()?;
    let field = field
        .or(cfg.field_b)
        .ok_or_else(|| CliError::config("ab-shift needs --field or `field_b`"))?;
    if !field.is_finite() {
        return Err(CliError::config(format!("field {field} is not finite")));
    }
    let momenta = cfg.momentum_grid()?;
    let report = ab_shift_check(&setup.config, &setup.angles, &setup.schedule, field, &momenta)?;
    let mut out = Outcome::default();
    let rows: Vec<Vec<String>> = momenta
        .points()
        .iter()
        .zip(&report.distances)
        .map(|(&(ka, kb), &d)| vec![fmt_f64(ka), fmt_f64(kb), fmt_f64(d)])
        .collect();
    out.add(format!("{stem}.csv"), table_csv(&["k_a", "k_b", "distance"], &rows));
    let verdict = report.passes(AB_SHIFT_TOL);
    out.report.push(format!(
        "B = {field}: phi_a = {:.12}, phi_b = {:.12}, max multiset distance {:.3e} over {} points ({})",
        report.phi_a,
        report.phi_b,
        report.max_distance,
        report.distances.len(),
        if verdict {
            "rigid shift confirmed"
        } else {
            "shift broken"
        }
    ));
    if !verdict {
        out.fail(format!(
            "flux-shift distance {:e} exceeds {AB_SHIFT_TOL:e} at {:?}",
            report.max_distance, report.worst_point
        ));
    }
    let mut summary = ring_summary(&setup);
    summary["field_b"] = json!(field);
    summary["phi_a"] = json!(report.phi_a);
    summary["phi_b"] = json!(report.phi_b);
    summary["max_distance"] = json!(report.max_distance);
    summary["points"] = json!(report.distances.len());
    meta.results = summary;
    Ok(out.finish(stem, meta))
}

/// Site distributions of selected Bloch eigenvectors at zero momentum.
fn eigenstates(cfg: &ExperimentConfig, indices: &[usize], stem: &str, mut meta: Metadata) -> Result<Outcome, CliError> {
    let setup = cfg.ring()?;
    let u = bloch_step_matrix(&setup.config, &setup.angles, &setup.schedule, &setup.magnetic, 0.0, 0.0)?;
    let e = eigen_decompose_unitary(&u)?;
    let vectors = e.vectors.as_ref().expect("eigenvectors requested");
    let mut out = Outcome::default();
    let mut csvs = Vec::new();
    let mut states = Vec::new();
    for &i in indices {
        if i >= e.len() {
            return Err(CliError::config(format!(
                "eigenstate index {i} out of range (dimension {})",
                e.len()
            )));
        }
        let dist = Distribution::from_amplitudes(vectors.column(i).iter().copied());
        let name = format!("{stem}_state{i}.csv");
        out.add(name.clone(), distribution_csv(&dist));
        csvs.push(name);
        states.push(json!({"index": i, "omega": e.phases[i]}));
    }
    out.add(
        format!("{stem}.gp"),
        distribution_gnuplot(
            &csvs,
            &format!("{stem}.png"),
            &format!("eigenstates at K = 0, S = {}", setup.config.sites()),
        ),
    );
    out.report.push(format!("{} eigenstates written", indices.len()));
    let mut summary = ring_summary(&setup);
    summary["states"] = json!(states);
    meta.results = summary;
    Ok(out.finish(stem, meta))
}

fn moire_eigenstate(
    cfg: &ExperimentConfig,
    eighths: usize,
    stem: &str,
    mut meta: Metadata,
) -> Result<Outcome, CliError> {
    let (n_outer, n_inner, junctions) = cfg.moire()?;
    let grid = assemble_moire(n_outer, n_inner, &cfg.angles()?, junctions)?;
    let u = grid.evaluate(0.0, 0.0);
    let index = 4 * grid.rows() * eighths / 8;
    let dist = eigenstate_distribution(&u, index)?;
    let mut out = Outcome::default();
    let csv = format!("{stem}.csv");
    out.add(csv.clone(), distribution_csv(&dist));
    out.add(
        format!("{stem}.gp"),
        distribution_gnuplot(
            &[csv],
            &format!("{stem}.png"),
            &format!("Moire eigenstate {index} at K = 0"),
        ),
    );
    out.report.push(format!("eigenstate {index} of {}", 4 * grid.rows()));
    meta.results = json!({"events": grid.rows(), "index": index});
    Ok(out.finish(stem, meta))
}

/// Runs one built-in figure; artifacts are named `fig<id>...`.
pub fn reproduce_figure(id: &FigureId) -> Result<Outcome, CliError> {
    let spec = figure_spec(id);
    let stem = spec.stem();
    let mut meta = Metadata::new("reproduce-figure", &spec.config);
    meta.figure = Some(spec.id.clone());
    meta.pinned = spec
        .pinned
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect::<BTreeMap<_, _>>();
    let cfg = &spec.config;
    match &spec.kind {
        FigureKind::Spectrum => spectrum(cfg, &stem, meta),
        FigureKind::Moire => moire(cfg, &stem, meta),
        FigureKind::Swap => swap(cfg, &stem, meta),
        FigureKind::Evolve => evolve(cfg, &stem, meta),
        FigureKind::Eigenstates(indices) => eigenstates(cfg, indices, &stem, meta),
        FigureKind::MoireEigenstate { eighths } => moire_eigenstate(cfg, *eighths, &stem, meta),
    }
}
