//! Flat TOML experiment configuration.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_rational::Rational64;
use ringwalk::evolve::InitialTerm;
use ringwalk::spectrum::{Axis, MomentumGrid};
use ringwalk::{
    junction_schedule, CoinAngles, Component, JunctionMode, JunctionSchedule, MagneticConfig, RingPairConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Longest accepted config file, in bytes.
pub const MAX_CONFIG_BYTES: usize = 64 * 1024;
const MAX_EXPR_LEN: usize = 64;
const MAX_K_SAMPLES: usize = 4096;
const MAX_STEPS: u64 = 1_000_000;
const MAX_HISTORY: usize = 100_000;

/// An angle given as a number or a short expression such as `"2*pi/3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleValue {
    Number(f64),
    Expr(String),
}

impl AngleValue {
    pub fn expr(s: &str) -> Self {
        AngleValue::Expr(s.to_string())
    }

    pub fn resolve(&self) -> Result<f64, CliError> {
        let v = match self {
            AngleValue::Number(x) => *x,
            AngleValue::Expr(s) => parse_angle(s)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::config(format!("angle {self} is not finite")))
        }
    }
}

impl fmt::Display for AngleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngleValue::Number(x) => write!(f, "{x}"),
            AngleValue::Expr(s) => write!(f, "{s:?}"),
        }
    }
}

/// A rational given as an integer, a decimal, or `"p/q"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RationalValue {
    pub fn text(s: &str) -> Self {
        RationalValue::Text(s.to_string())
    }

    pub fn resolve(&self) -> Result<Rational64, CliError> {
        match self {
            RationalValue::Int(n) => Ok(Rational64::from_integer(*n)),
            RationalValue::Float(x) => {
                if !x.is_finite() {
                    return Err(CliError::config(format!("{x} is not a finite number")));
                }
                // Shortest round-trip decimal, then exact conversion.
                parse_rational(&format!("{x}"))
            }
            RationalValue::Text(s) => parse_rational(s),
        }
    }
}

/// Parses `p`, `p/q` or a plain decimal like `-0.125` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational64, CliError> {
    let s = s.trim();
    let bad = || CliError::config(format!("{s:?} is not a rational number"));
    if s.is_empty() || s.len() > MAX_EXPR_LEN {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(CliError::config(format!("{s:?} has a zero denominator")));
        }
        if p == i64::MIN || q == i64::MIN {
            return Err(bad());
        }
        return Ok(Rational64::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let digits_ok = |d: &str| d.bytes().all(|b| b.is_ascii_digit());
    if (int_part.is_empty() && frac_part.is_empty()) || !digits_ok(int_part) || !digits_ok(frac_part) {
        return Err(bad());
    }
    if frac_part.len() > 18 {
        return Err(bad());
    }
    let denom = 10i64.pow(frac_part.len() as u32);
    let whole: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let frac: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse().map_err(|_| bad())?
    };
    let numer = whole
        .checked_mul(denom)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Rational64::new(if neg { -numer } else { numer }, denom))
}

/// Evaluates a product/quotient of numbers and `pi`, with an optional sign:
/// `pi/3`, `-pi/4`, `2*pi/3`, `3pi/4`, `0.25`.
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let bad = |why: &str| CliError::config(format!("angle {s:?}: {why}"));
    if s.len() > MAX_EXPR_LEN {
        return Err(bad("expression too long"));
    }
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, mut rest) = match compact.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, compact.strip_prefix('+').unwrap_or(&compact)),
    };
    if rest.is_empty() {
        return Err(bad("empty expression"));
    }
    let mut value = 1.0;
    let mut op = '*';
    loop {
        let (factor, tail) = take_factor(rest).ok_or_else(|| bad("expected a number or pi"))?;
        match op {
            '*' => value *= factor,
            _ => {
                if factor == 0.0 {
                    return Err(bad("division by zero"));
                }
                value /= factor;
            }
        }
        let mut chars = tail.chars();
        match chars.next() {
            None => break,
            Some(c @ ('*' | '/')) => {
                op = c;
                rest = chars.as_str();
            }
            Some(_) => return Err(bad("unexpected character")),
        }
    }
    let v = sign * value;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad("not finite"))
    }
}

/// One factor: a number, `pi`, or a number immediately followed by `pi`.
fn take_factor(s: &str) -> Option<(f64, &str)> {
    fn take_pi(t: &str) -> Option<&str> {
        t.strip_prefix("pi").or_else(|| t.strip_prefix('π'))
    }
    if let Some(rest) = take_pi(s) {
        return Some((PI, rest));
    }
    let end = s
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || c == '.'))
        .map_or(s.len(), |(i, _)| i);
    if end == 0 {
        return None;
    }
    let (num, rest) = s.split_at(end);
    let mut x: f64 = num.parse().ok()?;
    let rest = match take_pi(rest) {
        Some(r) => {
            x *= PI;
            r
        }
        None => rest,
    };
    Some((x, rest))
}

/// Which momentum grid a spectrum-type command sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Ka,
    Kb,
    Full,
}

/// The config file. Every key is optional here; commands check for the ones
/// they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_half: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_a: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_b: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_ab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_cd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<AngleValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<AngleValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub junction_mode: Option<JunctionMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub junction_sites: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_fixed: Option<AngleValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    /// Terms `"site comp re im"`, e.g. `"0 A 1 0"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moire_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moire_inner: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub junction_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_i: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Ring-pair inputs resolved into core types.
#[derive(Debug, Clone)]
pub struct RingSetup {
    pub config: RingPairConfig,
    pub angles: CoinAngles,
    pub schedule: JunctionSchedule,
    pub magnetic: MagneticConfig,
    /// Set when the OR and AND readings of the junction rule disagree.
    pub or_and_differ: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        if text.len() > MAX_CONFIG_BYTES {
            return Err(CliError::config(format!("config exceeds {MAX_CONFIG_BYTES} bytes")));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))?;
        cfg.check_finite()?;
        Ok(cfg)
    }

    /// TOML admits `nan` and `inf`; no key accepts them.
    fn check_finite(&self) -> Result<(), CliError> {
        let number = |v: Option<f64>| v.is_none_or(f64::is_finite);
        let angle = |v: &Option<AngleValue>| !matches!(v, Some(AngleValue::Number(x)) if !x.is_finite());
        let rational = |v: &Option<RationalValue>| !matches!(v, Some(RationalValue::Float(x)) if !x.is_finite());
        let checks = [
            ("radius_ab", number(self.radius_ab)),
            ("radius_cd", number(self.radius_cd)),
            ("field_b", number(self.field_b)),
            ("theta1", angle(&self.theta1)),
            ("theta2", angle(&self.theta2)),
            ("k_fixed", angle(&self.k_fixed)),
            ("step_a", rational(&self.step_a)),
            ("step_b", rational(&self.step_b)),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((key, _)) => Err(CliError::config(format!("`{key}` must be finite"))),
            None => Ok(()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
        value
            .clone()
            .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
    }

    pub fn angles(&self) -> Result<CoinAngles, CliError> {
        let get = |v: &Option<AngleValue>| v.as_ref().map_or(Ok(0.0), AngleValue::resolve);
        let angles = CoinAngles::new(get(&self.theta1)?, get(&self.theta2)?);
        angles.validate()?;
        Ok(angles)
    }

    pub fn ring(&self) -> Result<RingSetup, CliError> {
        let n_half = Self::require(&self.n_half, "n_half")?;
        let step_a = Self::require(&self.step_a, "step_a")?.resolve()?;
        let step_b = Self::require(&self.step_b, "step_b")?.resolve()?;
        let config = RingPairConfig::new(n_half, step_a, step_b).with_radii(
            self.radius_ab.unwrap_or(RingPairConfig::DEFAULT_RADIUS_AB),
            self.radius_cd.unwrap_or(RingPairConfig::DEFAULT_RADIUS_CD),
        );
        config.validate()?;
        let angles = self.angles()?;
        let mode = self.junction_mode.unwrap_or(JunctionMode::FormulaOr);
        let schedule = match mode {
            JunctionMode::Custom => {
                let sites = Self::require(&self.junction_sites, "junction_sites")?;
                JunctionSchedule::custom(config.sites(), &sites)?
            }
            _ => {
                if self.junction_sites.is_some() {
                    return Err(CliError::config("`junction_sites` requires junction_mode = \"custom\""));
                }
                junction_schedule(&config, mode)?
            }
        };
        let or_and_differ = junction_schedule(&config, JunctionMode::FormulaOr)?.flags
            != junction_schedule(&config, JunctionMode::FormulaAnd)?.flags;
        let magnetic = MagneticConfig::for_sites(config.sites(), self.field_b.unwrap_or(0.0));
        magnetic.validate()?;
        Ok(RingSetup {
            config,
            angles,
            schedule,
            magnetic,
            or_and_differ,
        })
    }

    pub fn sweep_axis(&self) -> SweepAxis {
        self.sweep_axis.unwrap_or(SweepAxis::Ka)
    }

    pub fn momentum_grid(&self) -> Result<MomentumGrid, CliError> {
        let n = self.k_samples.unwrap_or(128);
        if n == 0 || n > MAX_K_SAMPLES {
            return Err(CliError::config(format!(
                "k_samples must be in 1..={MAX_K_SAMPLES}, got {n}"
            )));
        }
        let fixed = self.k_fixed.as_ref().map_or(Ok(0.0), AngleValue::resolve)?;
        let samples = MomentumGrid::uniform_samples(n);
        let grid = match self.sweep_axis() {
            SweepAxis::Ka => MomentumGrid::sweep(Axis::Ka, samples, fixed)?,
            SweepAxis::Kb => MomentumGrid::sweep(Axis::Kb, samples, fixed)?,
            SweepAxis::Full => MomentumGrid::full(samples.clone(), samples)?,
        };
        Ok(grid)
    }

    pub fn steps(&self) -> Result<u64, CliError> {
        let t = self.steps.unwrap_or(20);
        if t > MAX_STEPS {
            return Err(CliError::config(format!("steps must be at most {MAX_STEPS}")));
        }
        Ok(t)
    }

    pub fn history(&self) -> Result<(u64, usize), CliError> {
        let every = self.record_every.unwrap_or(1);
        let cap = self.history_cap.unwrap_or(10_000);
        if every == 0 {
            return Err(CliError::config("record_every must be positive"));
        }
        if cap == 0 || cap > MAX_HISTORY {
            return Err(CliError::config(format!("history_cap must be in 1..={MAX_HISTORY}")));
        }
        Ok((every, cap))
    }

    pub fn initial_terms(&self) -> Result<Vec<InitialTerm>, CliError> {
        self.initial.iter().flatten().map(|s| parse_initial_term(s)).collect()
    }

    pub fn moire(&self) -> Result<(usize, usize, usize), CliError> {
        Ok((
            Self::require(&self.moire_outer, "moire_outer")?,
            Self::require(&self.moire_inner, "moire_inner")?,
            self.junction_count.unwrap_or(1),
        ))
    }

    pub fn swap_pair(&self) -> Result<(usize, usize), CliError> {
        Ok((
            Self::require(&self.swap_i, "swap_i")?,
            Self::require(&self.swap_j, "swap_j")?,
        ))
    }
}

/// Parses `"site comp re im"`; the imaginary part may be omitted.
pub fn parse_initial_term(s: &str) -> Result<InitialTerm, CliError> {
    let bad = || CliError::config(format!("initial term {s:?}: expected \"site comp re [im]\""));
    let parts: Vec<&str> = s.split_whitespace().collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(bad());
    }
    let site: usize = parts[0].parse().map_err(|_| bad())?;
    let component: Component = parts[1].parse().map_err(|_| bad())?;
    let re: f64 = parts[2].parse().map_err(|_| bad())?;
    let im: f64 = parts.get(3).map_or(Ok(0.0), |p| p.parse()).map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(InitialTerm::new(site, component, Complex64::new(re, im)))
}
