//! Two concentric rings: geometry, junction schedule, coin, magnetic phases
//! and the real-space one-step unitary.
//!
//! Amplitudes are stored site-major with component order `A, B, C, D`, so
//! component `c` of site `n` lives at index `4 * n + c`. `A` and `C` hop
//! forward (`n -> n + 1`), `B` and `D` hop backward, all indices mod `S`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Matrix4;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unitarity_residual, CMatrix};

/// Unitarity tolerance every assembled step operator must meet.
pub const STEP_UNITARITY_TOL: f64 = 1e-12;

/// Upper bound on `half_sites`; keeps the dense `4S x 4S` operator tractable.
pub const MAX_HALF_SITES: usize = 500;

/// Largest numerator or denominator accepted for a step length.
pub const MAX_STEP_PART: i64 = 1_000_000;

/// The four amplitude components, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    A,
    B,
    C,
    D,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::A, Component::B, Component::C, Component::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Component> {
        Component::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::A => "A",
            Component::B => "B",
            Component::C => "C",
            Component::D => "D",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Component::A),
            "B" | "b" => Ok(Component::B),
            "C" | "c" => Ok(Component::C),
            "D" | "d" => Ok(Component::D),
            other => Err(Error::invalid(format!("unknown component {other:?}"))),
        }
    }
}

/// Geometry of the ring pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingPairConfig {
    /// Each ring has `S = 2 * half_sites + 1` sites.
    pub half_sites: usize,
    /// Hop length on the A/B ring.
    pub step_a: Rational64,
    /// Hop length on the C/D ring.
    pub step_b: Rational64,
    /// Radius of the ring carrying A and B.
    pub radius_ab: f64,
    /// Radius of the ring carrying C and D.
    pub radius_cd: f64,
}

impl RingPairConfig {
    pub const DEFAULT_RADIUS_AB: f64 = 2.0;
    pub const DEFAULT_RADIUS_CD: f64 = 1.0;

    /// Config with the default radii.
    pub fn new(half_sites: usize, step_a: Rational64, step_b: Rational64) -> Self {
        RingPairConfig {
            half_sites,
            step_a,
            step_b,
            radius_ab: Self::DEFAULT_RADIUS_AB,
            radius_cd: Self::DEFAULT_RADIUS_CD,
        }
    }

    pub fn with_radii(mut self, radius_ab: f64, radius_cd: f64) -> Self {
        self.radius_ab = radius_ab;
        self.radius_cd = radius_cd;
        self
    }

    /// Number of sites per ring, `2N + 1`.
    pub fn sites(&self) -> usize {
        2 * self.half_sites + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_sites > MAX_HALF_SITES {
            return Err(Error::invalid(format!(
                "half_sites = {} exceeds the supported maximum {MAX_HALF_SITES}",
                self.half_sites
            )));
        }
        for (name, step) in [("step_a", self.step_a), ("step_b", self.step_b)] {
            if *step.numer() <= 0 || *step.denom() <= 0 {
                return Err(Error::invalid(format!(
                    "{name} must be a positive rational, got {step}"
                )));
            }
            if *step.numer() > MAX_STEP_PART || *step.denom() > MAX_STEP_PART {
                return Err(Error::invalid(format!(
                    "{name} = {step} has a numerator or denominator above {MAX_STEP_PART}"
                )));
            }
        }
        for (name, r) in [("radius_ab", self.radius_ab), ("radius_cd", self.radius_cd)] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be a positive finite real, got {r}"
                )));
            }
        }
        Ok(())
    }

    /// Least common multiple of the two step lengths over the rationals.
    pub fn step_lcm(&self) -> Rational64 {
        rational_lcm(self.step_a, self.step_b)
    }
}

/// `lcm(p1/q1, p2/q2) = lcm(p1, p2) / gcd(q1, q2)` for reduced fractions.
pub fn rational_lcm(x: Rational64, y: Rational64) -> Rational64 {
    Rational64::new(x.numer().lcm(y.numer()), x.denom().gcd(y.denom()))
}

/// The two coin angles: intra-pair mixing and junction mixing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinAngles {
    pub theta1: f64,
    pub theta2: f64,
}

impl CoinAngles {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        CoinAngles { theta1, theta2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta1.is_finite() && self.theta2.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("coin angles must be finite"))
        }
    }
}

/// How junction sites are derived from the step lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionMode {
    /// `[n a = 0 mod lcm] OR [n b = 0 mod lcm]`, the printed Kronecker form.
    FormulaOr,
    /// Both conditions must hold; agrees with the worked `a = 9, b = 7` case.
    FormulaAnd,
    /// Every site is a junction.
    All,
    /// Explicit site list.
    Custom,
}

impl JunctionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            JunctionMode::FormulaOr => "formula_or",
            JunctionMode::FormulaAnd => "formula_and",
            JunctionMode::All => "all",
            JunctionMode::Custom => "custom",
        }
    }
}

impl std::str::FromStr for JunctionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula_or" => Ok(JunctionMode::FormulaOr),
            "formula_and" => Ok(JunctionMode::FormulaAnd),
            "all" => Ok(JunctionMode::All),
            "custom" => Ok(JunctionMode::Custom),
            other => Err(Error::invalid(format!("unknown junction mode {other:?}"))),
        }
    }
}

/// Per-site junction indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionSchedule {
    pub mode: JunctionMode,
    pub flags: Vec<bool>,
    pub custom_sites: Option<Vec<usize>>,
}

impl JunctionSchedule {
    /// Junction flags from the step lengths. `Custom` is rejected; use
    /// [`JunctionSchedule::custom`].
    pub fn from_config(config: &RingPairConfig, mode: JunctionMode) -> Result<Self> {
        config.validate()?;
        let s = config.sites();
        let flags = match mode {
            JunctionMode::All => vec![true; s],
            JunctionMode::FormulaOr | JunctionMode::FormulaAnd => {
                let lcm = config.step_lcm();
                (0..s)
                    .map(|n| {
                        let n = Rational64::from_integer(n as i64);
                        let on_a = (n * config.step_a / lcm).is_integer();
                        let on_b = (n * config.step_b / lcm).is_integer();
                        if mode == JunctionMode::FormulaOr {
                            on_a || on_b
                        } else {
                            on_a && on_b
                        }
                    })
                    .collect()
            }
            JunctionMode::Custom => return Err(Error::invalid("custom junction schedules need an explicit site list")),
        };
        Ok(JunctionSchedule {
            mode,
            flags,
            custom_sites: None,
        })
    }

    pub fn custom(sites: usize, junctions: &[usize]) -> Result<Self> {
        let mut flags = vec![false; sites];
        for &j in junctions {
            if j >= sites {
                return Err(Error::IndexOutOfRange { index: j, len: sites });
            }
            flags[j] = true;
        }
        Ok(JunctionSchedule {
            mode: JunctionMode::Custom,
            flags,
            custom_sites: Some(junctions.to_vec()),
        })
    }

    pub fn uniform(sites: usize, junction: bool) -> Self {
        JunctionSchedule {
            mode: if junction {
                JunctionMode::All
            } else {
                JunctionMode::Custom
            },
            flags: vec![junction; sites],
            custom_sites: if junction { None } else { Some(Vec::new()) },
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn junction_sites(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(n, &f)| f.then_some(n))
            .collect()
    }

    /// Junction angle per site: `theta2` at junctions, zero elsewhere.
    pub fn theta_profile(&self, angles: &CoinAngles) -> Vec<f64> {
        self.flags
            .iter()
            .map(|&f| if f { angles.theta2 } else { 0.0 })
            .collect()
    }
}

/// Flags of `mode` for `config`; see [`JunctionSchedule::from_config`].
pub fn junction_schedule(config: &RingPairConfig, mode: JunctionMode) -> Result<JunctionSchedule> {
    JunctionSchedule::from_config(config, mode)
}

/// Magnetic field and the angle subtended by one hop on each ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticConfig {
    pub field_b: f64,
    pub dphi_a: f64,
    pub dphi_b: f64,
}

impl MagneticConfig {
    /// One hop subtends `2 pi / S` on both rings.
    pub fn for_sites(sites: usize, field_b: f64) -> Self {
        let dphi = 2.0 * PI / sites as f64;
        MagneticConfig {
            field_b,
            dphi_a: dphi,
            dphi_b: dphi,
        }
    }

    pub fn zero_field(sites: usize) -> Self {
        Self::for_sites(sites, 0.0)
    }

    pub fn with_field(mut self, field_b: f64) -> Self {
        self.field_b = field_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.field_b.is_finite() && self.dphi_a.is_finite() && self.dphi_b.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("magnetic parameters must be finite"))
        }
    }

    /// Forward-hop phase angles `(phi_a, phi_b) = (R_ab^2 dphi_a B, R_cd^2 dphi_b B)`.
    pub fn phase_angles(&self, config: &RingPairConfig) -> (f64, f64) {
        (
            config.radius_ab * config.radius_ab * self.dphi_a * self.field_b,
            config.radius_cd * config.radius_cd * self.dphi_b * self.field_b,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Vector-potential phase picked up by one hop: `exp(+i R^2 dphi B)` forward,
/// its conjugate backward.
pub fn magnetic_phase(radius: f64, dphi: f64, field_b: f64, direction: Direction) -> Complex64 {
    let forward = Complex64::cis(radius * radius * dphi * field_b);
    match direction {
        Direction::Forward => forward,
        Direction::Backward => forward.conj(),
    }
}

/// The 4x4 coin: the `theta_n` rotation on the ring-pair index tensored with
/// the `theta1` rotation on the direction index.
pub fn build_coin(theta_n: f64, theta1: f64) -> Matrix4<f64> {
    let (sn, cn) = theta_n.sin_cos();
    let (s1, c1) = theta1.sin_cos();
    Matrix4::new(
        cn * c1,
        cn * s1,
        sn * c1,
        sn * s1,
        -cn * s1,
        cn * c1,
        -sn * s1,
        sn * c1,
        -sn * c1,
        -sn * s1,
        cn * c1,
        cn * s1,
        sn * s1,
        -sn * c1,
        -cn * s1,
        cn * c1,
    )
}

/// Multipliers attached to the four hop kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopPhases {
    /// A: forward on the A/B ring.
    pub a_forward: Complex64,
    /// B: backward on the A/B ring.
    pub a_backward: Complex64,
    /// C: forward on the C/D ring.
    pub c_forward: Complex64,
    /// D: backward on the C/D ring.
    pub c_backward: Complex64,
}

impl HopPhases {
    pub const UNIT: HopPhases = HopPhases {
        a_forward: Complex64::new(1.0, 0.0),
        a_backward: Complex64::new(1.0, 0.0),
        c_forward: Complex64::new(1.0, 0.0),
        c_backward: Complex64::new(1.0, 0.0),
    };

    /// Magnetic phases times the per-hop Bloch factors: forward hops carry
    /// `exp(-i k)`, backward hops `exp(+i k)`.
    pub fn new(config: &RingPairConfig, magnetic: &MagneticConfig, k_a: f64, k_b: f64) -> HopPhases {
        let b = magnetic.field_b;
        let (ra, rc) = (config.radius_ab, config.radius_cd);
        HopPhases {
            a_forward: magnetic_phase(ra, magnetic.dphi_a, b, Direction::Forward) * Complex64::cis(-k_a),
            a_backward: magnetic_phase(ra, magnetic.dphi_a, b, Direction::Backward) * Complex64::cis(k_a),
            c_forward: magnetic_phase(rc, magnetic.dphi_b, b, Direction::Forward) * Complex64::cis(-k_b),
            c_backward: magnetic_phase(rc, magnetic.dphi_b, b, Direction::Backward) * Complex64::cis(k_b),
        }
    }

    /// Pure Bloch factors, no field.
    pub fn momentum(k_a: f64, k_b: f64) -> HopPhases {
        HopPhases {
            a_forward: Complex64::cis(-k_a),
            a_backward: Complex64::cis(k_a),
            c_forward: Complex64::cis(-k_b),
            c_backward: Complex64::cis(k_b),
        }
    }
}

/// Coin-then-shift matrix for an arbitrary per-site junction-angle profile.
///
/// Row `(n, A)` receives coin row 0 of site `n - 1`, `(n, B)` row 1 of site
/// `n + 1`, `(n, C)` row 2 of `n - 1` and `(n, D)` row 3 of `n + 1`, each
/// scaled by the matching hop phase. Works for any ring length `>= 1`.
pub fn walk_matrix(profile: &[f64], theta1: f64, hops: &HopPhases) -> CMatrix {
    let s = profile.len();
    let mut u = CMatrix::zeros(4 * s, 4 * s);
    for (n, &theta_n) in profile.iter().enumerate() {
        let coin = build_coin(theta_n, theta1);
        let fwd = (n + 1) % s;
        let bwd = (n + s - 1) % s;
        let targets = [
            (4 * fwd, hops.a_forward),
            (4 * bwd + 1, hops.a_backward),
            (4 * fwd + 2, hops.c_forward),
            (4 * bwd + 3, hops.c_backward),
        ];
        for (row, &(dst, phase)) in targets.iter().enumerate() {
            for col in 0..4 {
                u[(dst, 4 * n + col)] += phase * coin[(row, col)];
            }
        }
    }
    u
}

/// The real-space one-step unitary together with the inputs that built it.
#[derive(Debug, Clone)]
pub struct StepOperator {
    pub matrix: CMatrix,
    pub config: RingPairConfig,
    pub angles: CoinAngles,
    pub schedule: JunctionSchedule,
    pub magnetic: MagneticConfig,
}

impl StepOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn sites(&self) -> usize {
        self.config.sites()
    }
}

fn check_inputs(
    config: &RingPairConfig,
    angles: &CoinAngles,
    schedule: &JunctionSchedule,
    magnetic: &MagneticConfig,
) -> Result<()> {
    config.validate()?;
    angles.validate()?;
    magnetic.validate()?;
    if schedule.len() != config.sites() {
        return Err(Error::DimensionMismatch {
            expected: config.sites(),
            found: schedule.len(),
        });
    }
    Ok(())
}

fn checked_unitary(matrix: CMatrix) -> Result<CMatrix> {
    let residual = unitarity_residual(&matrix);
    if residual.is_nan() || residual > STEP_UNITARITY_TOL {
        return Err(Error::Contract {
            what: "step operator unitarity",
            residual,
            tolerance: STEP_UNITARITY_TOL,
        });
    }
    Ok(matrix)
}

/// Coin followed by the magnetic-phased cyclic shift.
pub fn build_step_operator(
    config: &RingPairConfig,
    angles: &CoinAngles,
    schedule: &JunctionSchedule,
    magnetic: &MagneticConfig,
) -> Result<StepOperator> {
    check_inputs(config, angles, schedule, magnetic)?;
    let hops = HopPhases::new(config, magnetic, 0.0, 0.0);
    let matrix = walk_matrix(&schedule.theta_profile(angles), angles.theta1, &hops);
    Ok(StepOperator {
        matrix: checked_unitary(matrix)?,
        config: config.clone(),
        angles: *angles,
        schedule: schedule.clone(),
        magnetic: *magnetic,
    })
}

/// [`build_step_operator`] with every hop additionally carrying its Bloch
/// factor for momenta `(k_a, k_b)`.
pub fn bloch_step_matrix(
    config: &RingPairConfig,
    angles: &CoinAngles,
    schedule: &JunctionSchedule,
    magnetic: &MagneticConfig,
    k_a: f64,
    k_b: f64,
) -> Result<CMatrix> {
    check_inputs(config, angles, schedule, magnetic)?;
    if !(k_a.is_finite() && k_b.is_finite()) {
        return Err(Error::invalid("momenta must be finite"));
    }
    let hops = HopPhases::new(config, magnetic, k_a, k_b);
    checked_unitary(walk_matrix(&schedule.theta_profile(angles), angles.theta1, &hops))
}
