//! Discretization of analog pressure into logic levels, and gate semantics.
//!
//! An actuator's continuous pressure is read against one or more thresholds:
//! a single threshold yields a binary level, an ordered pair yields a ternary
//! level, and a hysteretic low/high band yields a binary level with memory.
//! Multi-bit codes are monotone: a set bit implies every lower-threshold bit
//! is also set, so `[1 0]` is not a legal ternary code.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// A single logic bit (0 or 1).
pub type Bit = u8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("pressure values must be finite, got {0}")]
    NonFinite(f64),
    #[error("threshold {0} must be finite and non-negative")]
    BadThreshold(f64),
    #[error("lower threshold {lo} must lie strictly below upper threshold {hi}")]
    ThresholdOrder { lo: f64, hi: f64 },
    #[error("logic codes of arity {left} and {right} are not comparable")]
    ArityMismatch { left: usize, right: usize },
    #[error("illegal logic code [{0}]: a set bit implies all lower bits set")]
    NonMonotoneCode(String),
    #[error("bits must be 0 or 1, got {0}")]
    BadBit(u8),
    #[error("arity {0} out of range (1..=8)")]
    BadArity(usize),
    #[error("bit index {bit} out of range for arity {arity}")]
    BitOutOfRange { bit: usize, arity: usize },
}

fn check_finite(p: f64) -> Result<(), LogicError> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(LogicError::NonFinite(p))
    }
}

fn check_threshold(t: f64) -> Result<(), LogicError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(LogicError::BadThreshold(t))
    }
}

/// A discretized actuator state of small fixed arity.
///
/// Because legal codes are monotone, a level is fully determined by its arity
/// and the number of set bits; that is the stored representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LogicLevel {
    arity: u8,
    ones: u8,
}

impl LogicLevel {
    /// The all-zero code of the given arity.
    pub fn low(arity: usize) -> Self {
        assert!((1..=8).contains(&arity), "arity out of range");
        LogicLevel { arity: arity as u8, ones: 0 }
    }

    /// The all-one code of the given arity.
    pub fn high(arity: usize) -> Self {
        assert!((1..=8).contains(&arity), "arity out of range");
        LogicLevel { arity: arity as u8, ones: arity as u8 }
    }

    /// A single-bit level.
    pub fn binary(bit: Bit) -> Self {
        LogicLevel { arity: 1, ones: if bit == 0 { 0 } else { 1 } }
    }

    /// Builds a level from an explicit code, most significant bit first.
    pub fn from_bits(bits: &[Bit]) -> Result<Self, LogicError> {
        if !(1..=8).contains(&bits.len()) {
            return Err(LogicError::BadArity(bits.len()));
        }
        let mut seen_one = false;
        for &b in bits {
            if b > 1 {
                return Err(LogicError::BadBit(b));
            }
            if seen_one && b == 0 {
                let code: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
                return Err(LogicError::NonMonotoneCode(code.join(" ")));
            }
            seen_one |= b == 1;
        }
        let ones = bits.iter().filter(|&&b| b == 1).count();
        Ok(LogicLevel { arity: bits.len() as u8, ones: ones as u8 })
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    /// Number of set bits; legal codes are totally ordered by this count.
    pub fn ones(&self) -> usize {
        self.ones as usize
    }

    /// The code, most significant (highest threshold) bit first.
    pub fn bits(&self) -> Vec<Bit> {
        (0..self.arity()).map(|i| (self.arity() - i <= self.ones()) as Bit).collect()
    }

    /// The bit for the `index`-th threshold counting from the lowest (0).
    pub fn bit(&self, index: usize) -> Result<Bit, LogicError> {
        if index >= self.arity() {
            return Err(LogicError::BitOutOfRange { bit: index, arity: self.arity() });
        }
        Ok((index < self.ones()) as Bit)
    }

    pub fn compare(&self, other: &LogicLevel) -> Result<Ordering, LogicError> {
        if self.arity != other.arity {
            return Err(LogicError::ArityMismatch {
                left: self.arity(),
                right: other.arity(),
            });
        }
        Ok(self.ones.cmp(&other.ones))
    }
}

impl fmt::Display for LogicLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let code: Vec<String> = self.bits().iter().map(|b| b.to_string()).collect();
        write!(f, "[{}]", code.join(" "))
    }
}

/// How an actuator's pressure is read back as a logic level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// One threshold, binary output.
    Constant(f64),
    /// Two ordered thresholds, ternary output.
    Pair { lower: f64, upper: f64 },
    /// A low/high band with memory inside it, binary output.
    Hysteretic { low: f64, high: f64 },
}

impl ThresholdSpec {
    pub fn constant(t: f64) -> Result<Self, LogicError> {
        check_threshold(t)?;
        Ok(ThresholdSpec::Constant(t))
    }

    pub fn pair(lower: f64, upper: f64) -> Result<Self, LogicError> {
        check_threshold(lower)?;
        check_threshold(upper)?;
        if lower >= upper {
            return Err(LogicError::ThresholdOrder { lo: lower, hi: upper });
        }
        Ok(ThresholdSpec::Pair { lower, upper })
    }

    pub fn hysteretic(low: f64, high: f64) -> Result<Self, LogicError> {
        check_threshold(low)?;
        check_threshold(high)?;
        if low >= high {
            return Err(LogicError::ThresholdOrder { lo: low, hi: high });
        }
        Ok(ThresholdSpec::Hysteretic { low, high })
    }

    /// Arity of the level this spec produces.
    pub fn arity(&self) -> usize {
        match self {
            ThresholdSpec::Pair { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_hysteretic(&self) -> bool {
        matches!(self, ThresholdSpec::Hysteretic { .. })
    }

    /// The threshold values in ascending order.
    pub fn rungs(&self) -> Vec<f64> {
        match *self {
            ThresholdSpec::Constant(t) => vec![t],
            ThresholdSpec::Pair { lower, upper } => vec![lower, upper],
            ThresholdSpec::Hysteretic { low, high } => vec![low, high],
        }
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ThresholdSpec::Constant(t) => write!(f, "{}", t),
            ThresholdSpec::Pair { lower, upper } => write!(f, "({}, {})", lower, upper),
            ThresholdSpec::Hysteretic { low, high } => write!(f, "hyst({}, {})", low, high),
        }
    }
}

/// The retained state of a hysteretic discretizer: the last emitted bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct HystMemory(Bit);

impl HystMemory {
    pub const RESET: HystMemory = HystMemory(0);
    pub const SET: HystMemory = HystMemory(1);

    pub fn new(bit: Bit) -> Self {
        HystMemory(if bit == 0 { 0 } else { 1 })
    }

    pub fn bit(&self) -> Bit {
        self.0
    }
}

/// 1 iff the pressure has reached the threshold (closed lower bound).
pub fn discretize_binary(p: f64, threshold: f64) -> Result<Bit, LogicError> {
    check_finite(p)?;
    check_threshold(threshold)?;
    Ok((p >= threshold) as Bit)
}

/// Reads `p` against an ordered threshold pair, producing one of the ternary
/// codes `[0 0]`, `[0 1]`, `[1 1]`. Band bounds are closed below.
pub fn discretize_ternary(p: f64, lower: f64, upper: f64) -> Result<LogicLevel, LogicError> {
    check_finite(p)?;
    check_threshold(lower)?;
    check_threshold(upper)?;
    if lower >= upper {
        return Err(LogicError::ThresholdOrder { lo: lower, hi: upper });
    }
    let ones = (p >= lower) as u8 + (p >= upper) as u8;
    Ok(LogicLevel { arity: 2, ones })
}

/// One step of the hysteretic discretizer: set at or above `high`, reset at
/// or below `low`, hold the previous bit inside the open band. The returned
/// memory always equals the returned bit.
pub fn hysteretic_step(
    mem: HystMemory,
    p: f64,
    low: f64,
    high: f64,
) -> Result<(Bit, HystMemory), LogicError> {
    check_finite(p)?;
    check_threshold(low)?;
    check_threshold(high)?;
    if low >= high {
        return Err(LogicError::ThresholdOrder { lo: low, hi: high });
    }
    let bit = if p >= high {
        1
    } else if p <= low {
        0
    } else {
        mem.bit()
    };
    Ok((bit, HystMemory::new(bit)))
}

/// Totally orders two legal codes of equal arity by their set-bit count.
pub fn compare_levels(a: &LogicLevel, b: &LogicLevel) -> Result<Ordering, LogicError> {
    a.compare(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    /// Output driven toward the extreme opposite the input bit.
    Not,
    /// Output driven toward the same extreme as the input bit.
    Buffer,
}

impl GateKind {
    pub fn apply(&self, bit: Bit) -> Bit {
        match self {
            GateKind::Not => 1 - (bit & 1),
            GateKind::Buffer => bit & 1,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::Not => write!(f, "NOT"),
            GateKind::Buffer => write!(f, "BUFFER"),
        }
    }
}

/// One valve coupling viewed as a logic gate: the level of the `input`
/// actuator (read against `input_threshold`) decides which extreme the
/// `output` actuator's pressure is driven toward.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRelation {
    pub kind: GateKind,
    pub input: String,
    pub output: String,
    pub input_threshold: ThresholdSpec,
    /// Which bit of the input encoding this gate senses, counting from the
    /// lowest threshold. Always 0 for single-threshold inputs.
    pub input_bit: usize,
    /// Labels of the output actuator's encoding thresholds, lowest first.
    /// Empty when the output is read as plain binary.
    pub output_thresholds: Vec<String>,
}

impl GateRelation {
    pub fn binary(
        kind: GateKind,
        input: impl Into<String>,
        output: impl Into<String>,
        input_threshold: ThresholdSpec,
    ) -> Self {
        GateRelation {
            kind,
            input: input.into(),
            output: output.into(),
            input_threshold,
            input_bit: 0,
            output_thresholds: Vec::new(),
        }
    }

    pub fn output_arity(&self) -> usize {
        self.output_thresholds.len().max(1)
    }

    pub fn is_hysteretic(&self) -> bool {
        self.input_threshold.is_hysteretic()
    }
}

/// The level a gate drives its output toward, given the input's level.
///
/// Because a valve either fills or vents the output, the target is always an
/// extreme code: all-one or all-zero at the output's arity.
pub fn gate_target(gate: &GateRelation, input: LogicLevel) -> Result<LogicLevel, LogicError> {
    if input.arity() != gate.input_threshold.arity() {
        return Err(LogicError::ArityMismatch {
            left: input.arity(),
            right: gate.input_threshold.arity(),
        });
    }
    let bit = input.bit(gate.input_bit)?;
    let arity = gate.output_arity();
    Ok(if gate.kind.apply(bit) == 1 { LogicLevel::high(arity) } else { LogicLevel::low(arity) })
}
