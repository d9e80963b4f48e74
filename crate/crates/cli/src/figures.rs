//! Built-in parameter table for the reproducible figures.
//!
//! Values the source figures leave open are pinned here and echoed into each
//! figure's metadata under `pinned`.

use std::fmt;

use ringwalk::JunctionMode;

use crate::config::{AngleValue, ExperimentConfig, RationalValue, SweepAxis};
use crate::error::CliError;

/// What a figure computes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FigureKind {
    Spectrum,
    Moire,
    /// Band spectrum of the concentric grid after a column swap.
    Swap,
    Evolve,
    /// Distributions of the Bloch eigenvectors at these sorted indices.
    Eigenstates(Vec<usize>),
    /// Distribution of one Moire eigenvector at zero momentum, selected as
    /// `floor(4 E eighths / 8)` with `E` merged nodes.
    MoireEigenstate {
        eighths: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    /// Canonical id, e.g. `3a`, `5L`.
    pub id: String,
    pub kind: FigureKind,
    pub config: ExperimentConfig,
    pub pinned: Vec<(&'static str, String)>,
}

impl FigureSpec {
    pub fn stem(&self) -> String {
        format!("fig{}", self.id)
    }
}

/// Every id accepted by [`figure_spec`].
pub const FIGURE_IDS: [&str; 23] = [
    "2", "3a", "3b", "3c", "3d", "3e", "3f", "3g", "3h", "3i", "4a", "4b", "5L", "5R", "6a", "6b", "8a", "8b", "8c",
    "8d", "8e", "8f", "10",
];

/// Case-normalized figure id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureId(String);

impl FigureId {
    pub fn parse(s: &str) -> Result<FigureId, CliError> {
        let t = s.trim();
        FIGURE_IDS
            .iter()
            .find(|id| id.eq_ignore_ascii_case(t))
            .map(|id| FigureId(id.to_string()))
            .ok_or_else(|| CliError::Usage(format!("unknown figure id {t:?}; known ids: {}", FIGURE_IDS.join(", "))))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn ring(n_half: usize, a: &str, b: &str, theta1: &str, theta2: &str) -> ExperimentConfig {
    ExperimentConfig {
        n_half: Some(n_half),
        step_a: Some(RationalValue::text(a)),
        step_b: Some(RationalValue::text(b)),
        theta1: Some(AngleValue::expr(theta1)),
        theta2: Some(AngleValue::expr(theta2)),
        junction_mode: Some(JunctionMode::FormulaOr),
        field_b: Some(0.0),
        sweep_axis: Some(SweepAxis::Ka),
        k_samples: Some(128),
        k_fixed: Some(AngleValue::expr("0")),
        ..ExperimentConfig::default()
    }
}

fn moire(axis: SweepAxis) -> ExperimentConfig {
    ExperimentConfig {
        theta1: Some(AngleValue::expr("pi/6")),
        theta2: Some(AngleValue::expr("pi/2")),
        moire_outer: Some(28),
        moire_inner: Some(21),
        junction_count: Some(1),
        sweep_axis: Some(axis),
        k_samples: Some(128),
        k_fixed: Some(AngleValue::expr("0")),
        ..ExperimentConfig::default()
    }
}

pub fn figure_spec(id: &FigureId) -> FigureSpec {
    let fixed_k = ("fixed momentum", "0 on the axis not swept".to_string());
    let samples = ("momentum samples", "128, k_j = -pi + 2 pi (j + 1) / 128".to_string());
    let (kind, config, mut pinned) = match id.as_str() {
        "2" => (
            FigureKind::Eigenstates(vec![0, 31, 62, 93]),
            ExperimentConfig {
                sweep_axis: None,
                k_samples: None,
                k_fixed: None,
                ..ring(15, "3", "2", "pi/3", "pi/3")
            },
            vec![
                ("geometry", "a = 3, b = 2, N = 15, theta1 = theta2 = pi/3".to_string()),
                ("momentum", "K_a = K_b = 0".to_string()),
                ("eigenstates", "sorted indices 0, S, 2S, 3S with S = 31".to_string()),
            ],
        ),
        "3a" => (
            FigureKind::Spectrum,
            ring(15, "2", "1", "pi/3", "pi/3"),
            vec![fixed_k.clone()],
        ),
        "3b" => (
            FigureKind::Spectrum,
            ring(15, "3", "1", "pi/3", "pi/3"),
            vec![fixed_k.clone()],
        ),
        "3c" => (
            FigureKind::Spectrum,
            ExperimentConfig {
                k_fixed: Some(AngleValue::expr("pi/2")),
                ..ring(15, "3", "1", "pi/3", "pi/3")
            },
            vec![("fixed momentum", "K_b = pi/2".to_string())],
        ),
        "3d" => (
            FigureKind::Spectrum,
            ring(15, "4", "2", "pi/4", "pi/4"),
            vec![fixed_k.clone()],
        ),
        "3e" => (
            FigureKind::Spectrum,
            ring(15, "3", "2", "pi/4", "pi/4"),
            vec![fixed_k.clone()],
        ),
        "3f" => (
            FigureKind::Spectrum,
            ExperimentConfig {
                field_b: Some(2.0),
                ..ring(15, "3", "2", "pi/4", "pi/4")
            },
            vec![fixed_k.clone(), ("field", "B = 2".to_string())],
        ),
        "3g" => (
            FigureKind::Spectrum,
            ring(15, "2", "1", "pi/6", "pi/2"),
            vec![fixed_k.clone()],
        ),
        "3h" => (
            FigureKind::Spectrum,
            ring(15, "1", "2/3", "pi/6", "pi/2"),
            vec![fixed_k.clone()],
        ),
        "3i" => (
            FigureKind::Spectrum,
            ring(15, "1", "3/7", "pi/6", "pi/2"),
            vec![fixed_k.clone()],
        ),
        "4a" => (
            FigureKind::Spectrum,
            ExperimentConfig {
                sweep_axis: Some(SweepAxis::Kb),
                ..ring(15, "3", "2", "pi/4", "pi/4")
            },
            vec![fixed_k.clone(), ("swept axis", "K_b".to_string())],
        ),
        "4b" => (
            FigureKind::Spectrum,
            ring(15, "3", "2", "pi/4", "pi/4"),
            vec![fixed_k.clone(), ("swept axis", "K_a".to_string())],
        ),
        "5L" | "5R" => {
            let (i, j) = if id.as_str() == "5L" { (0, 2) } else { (0, 0) };
            (
                FigureKind::Swap,
                ExperimentConfig {
                    swap_i: Some(i),
                    swap_j: Some(j),
                    ..ring(15, "2", "1", "pi/3", "pi/3")
                },
                vec![
                    fixed_k.clone(),
                    (
                        "swap",
                        if i == j {
                            "none (reference grid)".to_string()
                        } else {
                            format!("block columns {i} and {j}")
                        },
                    ),
                ],
            )
        }
        "6a" => (
            FigureKind::Spectrum,
            ring(15, "3", "2", "pi/4", "pi/4"),
            vec![fixed_k.clone()],
        ),
        "6b" => (
            FigureKind::Spectrum,
            ExperimentConfig {
                field_b: Some(2.0),
                ..ring(15, "3", "2", "pi/4", "pi/4")
            },
            vec![fixed_k.clone(), ("field", "B = 2".to_string())],
        ),
        "8a" => (FigureKind::Moire, moire(SweepAxis::Ka), vec![fixed_k.clone()]),
        "8b" => (FigureKind::Moire, moire(SweepAxis::Kb), vec![fixed_k.clone()]),
        "8c" | "8d" | "8e" | "8f" => {
            let eighths = match id.as_str() {
                "8c" => 1,
                "8d" => 3,
                "8e" => 5,
                _ => 7,
            };
            (
                FigureKind::MoireEigenstate { eighths },
                ExperimentConfig {
                    sweep_axis: None,
                    k_samples: None,
                    k_fixed: None,
                    ..moire(SweepAxis::Ka)
                },
                vec![
                    ("momentum", "K_a = K_b = 0".to_string()),
                    (
                        "eigenstate",
                        format!("sorted index floor(4 E * {eighths} / 8), E merged nodes"),
                    ),
                ],
            )
        }
        "10" => (
            FigureKind::Evolve,
            ExperimentConfig {
                sweep_axis: None,
                k_samples: None,
                k_fixed: None,
                steps: Some(20),
                initial: Some(vec!["0 A 1 0".to_string()]),
                record_every: Some(1),
                ..ring(15, "3", "2", "pi/4", "pi/4")
            },
            vec![
                ("initial state", "amplitude 1 on site 0, component A".to_string()),
                ("steps", "20".to_string()),
            ],
        ),
        other => unreachable!("figure id {other} passed validation"),
    };
    if matches!(kind, FigureKind::Spectrum | FigureKind::Moire | FigureKind::Swap) {
        pinned.push(samples);
    }
    FigureSpec {
        id: id.as_str().to_string(),
        kind,
        config,
        pinned,
    }
}
