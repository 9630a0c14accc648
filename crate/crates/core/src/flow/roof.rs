use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default floor guarding the singularity of power-law roofs at y = 0.
pub const DEFAULT_Y_MIN: f64 = 1e-12;

type RoofFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum RoofKind {
    Constant { value: f64 },
    /// base + amp·sin(2πy), requires base > |amp|.
    Sine { base: f64, amp: f64 },
    /// max(y, y_min)^(−exponent), 0 < exponent < 1.
    Power { exponent: f64, y_min: f64 },
    Custom {
        name: String,
        eval: RoofFn,
        upper: Option<f64>,
    },
}

impl fmt::Debug for RoofKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoofKind::Constant { value } => write!(f, "Constant({value})"),
            RoofKind::Sine { base, amp } => write!(f, "Sine({base} + {amp} sin 2πy)"),
            RoofKind::Power { exponent, y_min } => write!(f, "Power(y^-{exponent}, floor {y_min})"),
            RoofKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// ∫ f² dν, which decides whether the fiber-weighted law of f has a mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondMoment {
    Finite(f64),
    Divergent,
    Unknown,
}

/// Roof function f: Y → [C, ∞) with its lower bound C and mean ∫ f dν.
#[derive(Debug, Clone)]
pub struct RoofFunction {
    kind: RoofKind,
    lower_bound: f64,
    mean: f64,
}

impl RoofFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::config(format!("constant roof must be positive, got {value}")));
        }
        Ok(Self {
            kind: RoofKind::Constant { value },
            lower_bound: value,
            mean: value,
        })
    }

    pub fn sine(base: f64, amp: f64) -> Result<Self> {
        if !(base > amp.abs()) {
            return Err(Error::config(format!(
                "sine roof needs base > |amp| (base {base}, amp {amp})"
            )));
        }
        Ok(Self {
            kind: RoofKind::Sine { base, amp },
            lower_bound: base - amp.abs(),
            mean: base,
        })
    }

    pub fn power(exponent: f64, y_min: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::config(format!(
                "power roof y^-p needs 0 < p < 1 to be integrable, got p = {exponent}"
            )));
        }
        if !(y_min > 0.0 && y_min < 1.0) {
            return Err(Error::config(format!("power roof floor must lie in (0, 1), got {y_min}")));
        }
        let q = 1.0 - exponent;
        let mean = y_min.powf(q) + (1.0 - y_min.powf(q)) / q;
        Ok(Self {
            kind: RoofKind::Power { exponent, y_min },
            lower_bound: 1.0,
            mean,
        })
    }

    /// The unbounded roof y^(−2/3), whose mean is 3.
    pub fn example2() -> Self {
        Self::power(2.0 / 3.0, DEFAULT_Y_MIN).expect("valid parameters")
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lower_bound: f64,
        mean: f64,
        upper: Option<f64>,
    ) -> Result<Self> {
        if !(lower_bound > 0.0) || !(mean >= lower_bound) {
            return Err(Error::config(format!(
                "custom roof needs 0 < lower_bound <= mean (got {lower_bound}, {mean})"
            )));
        }
        Ok(Self {
            kind: RoofKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
                upper,
            },
            lower_bound,
            mean,
        })
    }

    pub fn kind(&self) -> &RoofKind {
        &self.kind
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.kind {
            RoofKind::Constant { value } => *value,
            RoofKind::Sine { base, amp } => base + amp * (std::f64::consts::TAU * y).sin(),
            RoofKind::Power { exponent, y_min } => y.max(*y_min).powf(-exponent),
            RoofKind::Custom { eval, .. } => eval(y),
        }
    }

    /// Evaluates and enforces f(y) ≥ C.
    pub fn checked_eval(&self, y: f64) -> Result<f64> {
        let v = self.eval(y);
        if v >= self.lower_bound && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::config(format!(
                "roof f({y}) = {v} is below its lower bound {} or not finite",
                self.lower_bound
            )))
        }
    }

    /// Supremum of f when finite.
    pub fn upper_bound(&self) -> Option<f64> {
        match &self.kind {
            RoofKind::Constant { value } => Some(*value),
            RoofKind::Sine { base, amp } => Some(base + amp.abs()),
            RoofKind::Power { exponent, y_min } => Some(y_min.powf(-exponent)),
            RoofKind::Custom { upper, .. } => *upper,
        }
    }

    pub fn second_moment(&self) -> SecondMoment {
        match &self.kind {
            RoofKind::Constant { value } => SecondMoment::Finite(value * value),
            RoofKind::Sine { base, amp } => SecondMoment::Finite(base * base + 0.5 * amp * amp),
            RoofKind::Power { exponent, .. } => {
                if 2.0 * exponent < 1.0 {
                    SecondMoment::Finite(1.0 / (1.0 - 2.0 * exponent))
                } else {
                    SecondMoment::Divergent
                }
            }
            RoofKind::Custom { .. } => SecondMoment::Unknown,
        }
    }
}
