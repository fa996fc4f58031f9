//! One-dimensional chaotic maps on the unit interval.
//!
//! All arithmetic here is `f64`. Callers working in lower precision convert
//! at their own boundary.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Inputs this far outside `[0, 1]` are clamped instead of rejected.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Logistic control value giving fully developed chaos.
pub const DEFAULT_R: f64 = 4.0;

/// Skew tent apex position used throughout the experiments.
pub const DEFAULT_P: f64 = 0.499;

/// Default starting point for orbit diagnostics.
pub const DEFAULT_X0: f64 = 0.123456;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MapKind {
    /// Identity transform (the standalone baseline).
    #[default]
    None,
    Logistic,
    SkewTent,
    Sine,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [
        MapKind::None,
        MapKind::Logistic,
        MapKind::SkewTent,
        MapKind::Sine,
    ];

    /// Config spelling: `none`, `logistic`, `skew_tent`, `sine`.
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::None => "none",
            MapKind::Logistic => "logistic",
            MapKind::SkewTent => "skew_tent",
            MapKind::Sine => "sine",
        }
    }

    /// Column label used in result tables: SA, L, ST, SP.
    pub fn short_label(self) -> &'static str {
        match self {
            MapKind::None => "SA",
            MapKind::Logistic => "L",
            MapKind::SkewTent => "ST",
            MapKind::Sine => "SP",
        }
    }

    pub fn from_short_label(label: &str) -> Option<MapKind> {
        MapKind::ALL.into_iter().find(|k| k.short_label() == label)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "sa" | "identity" => Ok(MapKind::None),
            "logistic" | "l" => Ok(MapKind::Logistic),
            "skew_tent" | "skew-tent" | "skewtent" | "tent" | "st" => Ok(MapKind::SkewTent),
            "sine" | "sin" | "sp" => Ok(MapKind::Sine),
            other => Err(Error::Config(format!(
                "unknown map `{other}` (expected none|logistic|skew_tent|sine)"
            ))),
        }
    }
}

/// Control parameters shared by the maps. Validated on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    r: f64,
    p: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            r: DEFAULT_R,
            p: DEFAULT_P,
        }
    }
}

impl MapParams {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 4.0) {
            return Err(Error::InvalidParameter(format!(
                "logistic r must lie in (0, 4], got {r}"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "skew tent p must lie in (0, 1), got {p}"
            )));
        }
        Ok(MapParams { r, p })
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        MapParams::new(r, self.p)
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        MapParams::new(self.r, p)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Checks that `x` lies in `[0, 1]`, clamping rounding residue up to
/// [`CLAMP_TOLERANCE`].
pub fn check_unit(x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else if (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&x) {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(Error::Domain(format!("map input {x} lies outside [0, 1]")))
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r <= 4.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "logistic r must lie in (0, 4], got {r}"
        )))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "skew tent p must lie in (0, 1), got {p}"
        )))
    }
}

pub fn logistic_step(x: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    let x = check_unit(x)?;
    Ok(r * x * (1.0 - x))
}

pub fn skew_tent_step(x: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let x = check_unit(x)?;
    Ok(tent(x, p))
}

pub fn sine_step(x: f64) -> Result<f64> {
    let x = check_unit(x)?;
    Ok(sine(x))
}

#[inline]
fn tent(x: f64, p: f64) -> f64 {
    if x < p {
        x / p
    } else {
        (1.0 - x) / (1.0 - p)
    }
}

#[inline]
fn sine(x: f64) -> f64 {
    // sin(pi) evaluates to ~1.2e-16 and sin of values just above 0 is exact
    // enough; only guard the sign.
    (PI * x).sin().max(0.0)
}

/// Applies one step of `kind` to an already validated point.
#[inline]
pub(crate) fn step_unchecked(kind: MapKind, x: f64, params: &MapParams) -> f64 {
    match kind {
        MapKind::None => x,
        MapKind::Logistic => params.r * x * (1.0 - x),
        MapKind::SkewTent => tent(x, params.p),
        MapKind::Sine => sine(x),
    }
}

/// The map formulas evaluated as written, without clamping, on any real
/// input. Used where a caller deliberately leaves the unit interval.
pub(crate) fn step_extended(kind: MapKind, x: f64, params: &MapParams) -> f64 {
    match kind {
        MapKind::Sine => (PI * x).sin(),
        _ => step_unchecked(kind, x, params),
    }
}

/// Slope of `kind` at an already validated point.
#[inline]
pub(crate) fn derivative_unchecked(kind: MapKind, x: f64, params: &MapParams) -> f64 {
    match kind {
        MapKind::None => 1.0,
        MapKind::Logistic => params.r * (1.0 - 2.0 * x),
        // The kink at x == p takes the left-branch slope.
        MapKind::SkewTent => {
            if x <= params.p {
                1.0 / params.p
            } else {
                -1.0 / (1.0 - params.p)
            }
        }
        MapKind::Sine => PI * (PI * x).cos(),
    }
}

/// One application of `kind` with domain checking.
pub fn apply(kind: MapKind, x: f64, params: &MapParams) -> Result<f64> {
    let x = check_unit(x)?;
    Ok(step_unchecked(kind, x, params))
}

pub fn map_derivative(kind: MapKind, x: f64, params: &MapParams) -> Result<f64> {
    let x = check_unit(x)?;
    Ok(derivative_unchecked(kind, x, params))
}

/// Orbit `[x0, x1, ..., xn]`.
pub fn iterate(kind: MapKind, x0: f64, n: usize, params: &MapParams) -> Result<Vec<f64>> {
    let mut x = check_unit(x0)?;
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(x);
    for _ in 0..n {
        x = step_unchecked(kind, x, params);
        orbit.push(x);
    }
    Ok(orbit)
}

/// Orbit-averaged log slope along a trajectory of length `n`.
///
/// Terms with `|f'(x)| < 1e-15` are skipped; the estimate is rejected when
/// more than 1% of the terms had to be skipped.
pub fn estimate_lyapunov(kind: MapKind, x0: f64, n: usize, params: &MapParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "lyapunov estimate needs at least one iterate".into(),
        ));
    }
    if kind == MapKind::None {
        return Ok(0.0);
    }
    let mut x = check_unit(x0)?;
    let mut sum = 0.0;
    let mut skipped = 0usize;
    for _ in 0..n {
        let slope = derivative_unchecked(kind, x, params).abs();
        if slope < 1e-15 {
            skipped += 1;
        } else {
            sum += slope.ln();
        }
        x = step_unchecked(kind, x, params);
    }
    if skipped * 100 > n {
        return Err(Error::Numerical(format!(
            "lyapunov estimate skipped {skipped} of {n} terms with vanishing slope"
        )));
    }
    Ok(sum / n as f64)
}
