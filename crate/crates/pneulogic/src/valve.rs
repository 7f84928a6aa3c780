//! Switch-valve flow semantics and slider-crank linkage geometry.
//!
//! A valve sits on one actuator's vent line and is actuated by another
//! actuator's pressure. Monostable kinds (NC, NO) switch at a single
//! threshold; bistable kinds (HNO, HNC) latch over a low/high band, which is
//! what a snap-through slider-crank linkage realizes mechanically.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::logic::{hysteretic_step, HystMemory, LogicError, ThresholdSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValveError {
    #[error("valve kind {kind} requires {expected} thresholds")]
    ThresholdKindMismatch { kind: ValveKind, expected: &'static str },
    #[error("hysteretic valve evaluated without a memory bit")]
    MissingMemory,
    #[error("link lengths must be positive, got l_AB = {l_ab}, l_BC = {l_bc}")]
    BadLinkage { l_ab: f64, l_bc: f64 },
    #[error("critical angle {0} deg must lie strictly inside (0, 180)")]
    BadCriticalAngle(f64),
    #[error("pivot distance {s} outside the feasible range ({min}, {max}]")]
    InfeasiblePivot { s: f64, min: f64, max: f64 },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValveKind {
    /// Normally closed: unblocks while the sensed pressure is at or above
    /// the threshold.
    Nc,
    /// Normally open: blocks while the sensed pressure is at or above the
    /// threshold.
    No,
    /// Hysteretic normally open: blocks while the latch is set.
    Hno,
    /// Hysteretic normally closed: unblocks while the latch is set.
    Hnc,
}

impl ValveKind {
    pub fn is_hysteretic(&self) -> bool {
        matches!(self, ValveKind::Hno | ValveKind::Hnc)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ValveKind::Nc => "NC",
            ValveKind::No => "NO",
            ValveKind::Hno => "HNO",
            ValveKind::Hnc => "HNC",
        }
    }
}

impl fmt::Display for ValveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValveKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "NC" => Ok(ValveKind::Nc),
            "NO" => Ok(ValveKind::No),
            "HNO" => Ok(ValveKind::Hno),
            "HNC" => Ok(ValveKind::Hnc),
            _ => Err(()),
        }
    }
}

/// A valve declaration: which actuator it senses, which actuator's vent it
/// controls, and at what thresholds it switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ValveSpec {
    pub id: String,
    pub kind: ValveKind,
    pub sense: String,
    pub thresholds: ThresholdSpec,
    pub controls: String,
    /// Initial latch state; meaningful only for hysteretic kinds.
    pub init_memory: HystMemory,
}

impl ValveSpec {
    pub fn new(
        id: impl Into<String>,
        kind: ValveKind,
        sense: impl Into<String>,
        thresholds: ThresholdSpec,
        controls: impl Into<String>,
    ) -> Result<Self, ValveError> {
        match (kind.is_hysteretic(), &thresholds) {
            (false, ThresholdSpec::Constant(_)) | (true, ThresholdSpec::Hysteretic { .. }) => {}
            (true, _) => {
                return Err(ValveError::ThresholdKindMismatch { kind, expected: "low/high" })
            }
            (false, _) => {
                return Err(ValveError::ThresholdKindMismatch { kind, expected: "threshold" })
            }
        }
        Ok(ValveSpec {
            id: id.into(),
            kind,
            sense: sense.into(),
            thresholds,
            controls: controls.into(),
            init_memory: HystMemory::RESET,
        })
    }

    pub fn with_init_memory(mut self, mem: HystMemory) -> Self {
        self.init_memory = mem;
        self
    }
}

/// Whether flow can pass through the vent line the valve sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowStatus {
    Blocked,
    Unblocked,
}

impl FlowStatus {
    pub fn is_unblocked(&self) -> bool {
        *self == FlowStatus::Unblocked
    }

    pub fn as_bit(&self) -> u8 {
        self.is_unblocked() as u8
    }
}

impl fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowStatus::Blocked => write!(f, "blocked"),
            FlowStatus::Unblocked => write!(f, "unblocked"),
        }
    }
}

/// The result of evaluating a valve: flow status plus, for hysteretic kinds,
/// the advanced latch memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValveFlowState {
    pub status: FlowStatus,
    pub memory: Option<HystMemory>,
}

/// Evaluates a valve against the sensed pressure.
///
/// Hysteretic kinds require `mem` and return the advanced memory; monostable
/// kinds ignore it and return none.
pub fn valve_flow(
    spec: &ValveSpec,
    p_sense: f64,
    mem: Option<HystMemory>,
) -> Result<ValveFlowState, ValveError> {
    match (spec.kind, spec.thresholds) {
        (ValveKind::Nc, ThresholdSpec::Constant(t)) => {
            let bit = crate::logic::discretize_binary(p_sense, t)?;
            let status = if bit == 1 { FlowStatus::Unblocked } else { FlowStatus::Blocked };
            Ok(ValveFlowState { status, memory: None })
        }
        (ValveKind::No, ThresholdSpec::Constant(t)) => {
            let bit = crate::logic::discretize_binary(p_sense, t)?;
            let status = if bit == 1 { FlowStatus::Blocked } else { FlowStatus::Unblocked };
            Ok(ValveFlowState { status, memory: None })
        }
        (ValveKind::Hno, ThresholdSpec::Hysteretic { low, high }) => {
            let mem = mem.ok_or(ValveError::MissingMemory)?;
            let (bit, next) = hysteretic_step(mem, p_sense, low, high)?;
            let status = if bit == 1 { FlowStatus::Blocked } else { FlowStatus::Unblocked };
            Ok(ValveFlowState { status, memory: Some(next) })
        }
        (ValveKind::Hnc, ThresholdSpec::Hysteretic { low, high }) => {
            let mem = mem.ok_or(ValveError::MissingMemory)?;
            let (bit, next) = hysteretic_step(mem, p_sense, low, high)?;
            let status = if bit == 1 { FlowStatus::Unblocked } else { FlowStatus::Blocked };
            Ok(ValveFlowState { status, memory: Some(next) })
        }
        (kind, _) => {
            let expected = if kind.is_hysteretic() { "low/high" } else { "threshold" };
            Err(ValveError::ThresholdKindMismatch { kind, expected })
        }
    }
}

/// Slider-crank linkage of a snap-through valve: links A-B (crank) and B-C
/// (coupler) with pivots A and C a tunable distance apart. The valve snaps
/// when the crank angle at B passes `theta_crit_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliderCrankGeometry {
    pub l_ab: f64,
    pub l_bc: f64,
    /// Rest pivot distance the linkage is assembled at.
    pub s0: f64,
    /// Snap-through angle in degrees, strictly inside (0, 180).
    pub theta_crit_deg: f64,
}

impl SliderCrankGeometry {
    pub fn new(l_ab: f64, l_bc: f64, s0: f64, theta_crit_deg: f64) -> Result<Self, ValveError> {
        if !(l_ab. is_finite() && l_bc.is_finite() && l_ab > 0.0 && l_bc > 0.0) {
            return Err(ValveError::BadLinkage { l_ab, l_bc });
        }
        if !(theta_crit_deg.is_finite() && 0.0 < theta_crit_deg && theta_crit_deg < 180.0) {
            return Err(ValveError::BadCriticalAngle(theta_crit_deg));
        }
        let geom = SliderCrankGeometry { l_ab, l_bc, s0, theta_crit_deg };
        geom.check_pivot(s0)?;
        Ok(geom)
    }

    fn check_pivot(&self, s: f64) -> Result<(), ValveError> {
        let min = (self.l_ab - self.l_bc).abs();
        let max = self.l_ab + self.l_bc;
        if !(s.is_finite() && s > min && s <= max) {
            return Err(ValveError::InfeasiblePivot { s, min, max });
        }
        Ok(())
    }
}

/// The crank angle at joint B, in degrees, for pivot distance `s`.
pub fn crank_angle(geom: &SliderCrankGeometry, s: f64) -> Result<f64, ValveError> {
    geom.check_pivot(s)?;
    let (a, b) = (geom.l_ab, geom.l_bc);
    let cos_theta = (a * a + b * b - s * s) / (2.0 * a * b);
    Ok(cos_theta.clamp(-1.0, 1.0).acos().to_degrees())
}

/// The pivot distance at which the crank angle equals the critical angle;
/// closed-form inverse of [`crank_angle`].
pub fn critical_distance(geom: &SliderCrankGeometry) -> f64 {
    let (a, b) = (geom.l_ab, geom.l_bc);
    let cos_theta = geom.theta_crit_deg.to_radians().cos();
    (a * a + b * b - 2.0 * a * b * cos_theta).max(0.0).sqrt()
}
