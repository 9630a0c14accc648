//! Declarative flow and cocycle specifications, read from TOML.
//!
//! ```toml
//! [flow]
//! base = { kind = "rotation" }              # alpha defaults to the golden mean
//! roof = { kind = "sine", base = 1.5, amp = 0.5 }
//!
//! [cocycle]
//! kind = "integral"
//! observable = { offset = 0.25, cos_amp = 1.0 }
//! ```
//!
//! Unknown kinds fail with a message listing the accepted ones.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cocycle::{
    example2_cocycle, AdditiveAsSubadditive, AdditiveCocycle, Coboundary, ConstantRate, FiberCocycle, FiberData,
    IntegralCocycle, LogNormCocycle, MatrixCocycle, Observable, Potential, SubadditiveCocycle,
};
use crate::error::{Error, Result};
use crate::flow::{BaseSystem, RoofFunction, SuspensionFlow, DEFAULT_Y_MIN, GOLDEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSpec {
    Rotation {
        #[serde(default = "golden")]
        alpha: f64,
    },
    /// `seed` defaults to the experiment seed.
    Doubling { seed: Option<u64> },
    Bernoulli {
        seed: Option<u64>,
        #[serde(default = "one_bit")]
        bits: u32,
    },
}

fn golden() -> f64 {
    GOLDEN
}

fn one_bit() -> u32 {
    1
}

fn y_min() -> f64 {
    DEFAULT_Y_MIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoofSpec {
    Constant {
        value: f64,
    },
    Sine {
        base: f64,
        amp: f64,
    },
    Power {
        exponent: f64,
        #[serde(default = "y_min")]
        y_min: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub base: BaseSpec,
    pub roof: RoofSpec,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            base: BaseSpec::Rotation { alpha: GOLDEN },
            roof: RoofSpec::Sine { base: 1.5, amp: 0.5 },
        }
    }
}

impl FlowSpec {
    pub fn build(&self, seed: u64) -> Result<SuspensionFlow> {
        let base = match self.base {
            BaseSpec::Rotation { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::config("rotation number must be finite"));
                }
                BaseSystem::rotation(alpha)
            }
            BaseSpec::Doubling { seed: s } => BaseSystem::doubling(s.unwrap_or(seed)),
            BaseSpec::Bernoulli { seed: s, bits } => {
                if !(1..=8).contains(&bits) {
                    return Err(Error::config(format!("bernoulli bits must lie in 1..=8 (got {bits})")));
                }
                BaseSystem::bernoulli(s.unwrap_or(seed), bits)
            }
        };
        let roof = match self.roof {
            RoofSpec::Constant { value } => RoofFunction::constant(value)?,
            RoofSpec::Sine { base, amp } => RoofFunction::sine(base, amp)?,
            RoofSpec::Power { exponent, y_min } => RoofFunction::power(exponent, y_min)?,
        };
        Ok(SuspensionFlow::new(base, roof))
    }
}

/// offset + cos_amp·cos(2π·freq·y) + sin_amp·sin(2π·freq·y) + tau_coeff·τ
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableSpec {
    pub offset: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
    pub freq: f64,
    pub tau_coeff: f64,
}

impl Default for ObservableSpec {
    fn default() -> Self {
        Self {
            offset: 0.0,
            cos_amp: 0.0,
            sin_amp: 0.0,
            freq: 1.0,
            tau_coeff: 0.0,
        }
    }
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Observable> {
        let vals = [self.offset, self.cos_amp, self.sin_amp, self.freq, self.tau_coeff];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("observable coefficients must be finite"));
        }
        Ok(Observable::Trig {
            offset: self.offset,
            cos_amp: self.cos_amp,
            sin_amp: self.sin_amp,
            freq: self.freq,
            tau_coeff: self.tau_coeff,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant { value: f64 },
    /// (f(y) − τ)^(−1/2).
    FiberTop,
    Bounded { amp: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FiberDataSpec {
    /// g(t, y) = c·t.
    Linear { c: f64 },
    /// g(t, y) = sin(t)·y.
    SinTimesY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CocycleSpec {
    ConstantRate {
        rate: f64,
    },
    Integral {
        #[serde(default)]
        observable: ObservableSpec,
    },
    Coboundary {
        potential: PotentialSpec,
    },
    Fiber {
        data: FiberDataSpec,
    },
    /// Integer spikes √n over the roof y^(−2/3).
    Example2,
    RandomSl2 {
        seed: Option<u64>,
        #[serde(default = "eight")]
        cells: usize,
    },
    Diagonal {
        rates: Vec<f64>,
    },
    Scalar {
        dim: usize,
        rate: f64,
    },
    Identity {
        dim: usize,
    },
    ConstantMatrix {
        rows: Vec<Vec<f64>>,
    },
}

fn eight() -> usize {
    8
}

/// A built cocycle, additive or matrix-valued.
#[derive(Clone)]
pub enum Cocycle {
    Additive(Arc<dyn AdditiveCocycle>),
    Matrix(MatrixCocycle),
}

impl std::fmt::Debug for Cocycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Cocycle {
    pub fn name(&self) -> String {
        match self {
            Cocycle::Additive(c) => c.name(),
            Cocycle::Matrix(a) => a.name(),
        }
    }

    pub fn flow(&self) -> &SuspensionFlow {
        match self {
            Cocycle::Additive(c) => c.flow(),
            Cocycle::Matrix(a) => a.flow(),
        }
    }

    pub fn additive(&self) -> Result<Arc<dyn AdditiveCocycle>> {
        match self {
            Cocycle::Additive(c) => Ok(c.clone()),
            Cocycle::Matrix(a) => Err(Error::config(format!(
                "this estimator needs an additive cocycle, got the matrix cocycle {}",
                a.name()
            ))),
        }
    }

    pub fn matrix(&self) -> Result<&MatrixCocycle> {
        match self {
            Cocycle::Matrix(a) => Ok(a),
            Cocycle::Additive(c) => Err(Error::config(format!(
                "this estimator needs a matrix cocycle, got the additive cocycle {}",
                c.name()
            ))),
        }
    }

    /// ln‖A‖ for matrix cocycles; additive cocycles are subadditive as they are.
    pub fn subadditive(&self) -> Box<dyn SubadditiveCocycle> {
        match self {
            Cocycle::Additive(c) => Box::new(AdditiveAsSubadditive(c.clone())),
            Cocycle::Matrix(a) => Box::new(LogNormCocycle::new(a.clone())),
        }
    }
}

impl CocycleSpec {
    pub fn build(&self, flow: SuspensionFlow, seed: u64) -> Result<Cocycle> {
        let additive = |c: Arc<dyn AdditiveCocycle>| Ok(Cocycle::Additive(c));
        match self {
            CocycleSpec::ConstantRate { rate } => {
                if !rate.is_finite() {
                    return Err(Error::config("rate must be finite"));
                }
                additive(Arc::new(ConstantRate::new(flow, *rate)))
            }
            CocycleSpec::Integral { observable } => {
                additive(Arc::new(IntegralCocycle::new(flow, observable.build()?)))
            }
            CocycleSpec::Coboundary { potential } => {
                let h = match potential {
                    PotentialSpec::Constant { value } => Potential::Constant(*value),
                    PotentialSpec::FiberTop => Potential::FiberTop,
                    PotentialSpec::Bounded { amp } => Potential::Bounded { amp: *amp },
                };
                additive(Arc::new(Coboundary::new(flow, h)))
            }
            CocycleSpec::Fiber { data } => {
                let d = match data {
                    FiberDataSpec::Linear { c } => FiberData::linear(*c),
                    FiberDataSpec::SinTimesY => FiberData::sin_times_y(),
                };
                additive(Arc::new(FiberCocycle::new(flow, d)?))
            }
            CocycleSpec::Example2 => additive(Arc::new(example2_cocycle(flow)?)),
            CocycleSpec::RandomSl2 { seed: s, cells } => {
                Ok(Cocycle::Matrix(MatrixCocycle::random_sl2(flow, s.unwrap_or(seed), *cells)?))
            }
            CocycleSpec::Diagonal { rates } => Ok(Cocycle::Matrix(MatrixCocycle::diagonal_exp(flow, rates.clone())?)),
            CocycleSpec::Scalar { dim, rate } => Ok(Cocycle::Matrix(MatrixCocycle::scalar_exp(flow, *dim, *rate)?)),
            CocycleSpec::Identity { dim } => Ok(Cocycle::Matrix(MatrixCocycle::identity(flow, *dim)?)),
            CocycleSpec::ConstantMatrix { rows } => {
                let m = rows.len();
                if m == 0 || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::config("constant matrix must be a nonempty square array of rows"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(Cocycle::Matrix(MatrixCocycle::constant(flow, DMatrix::from_row_slice(m, m, &flat))?))
            }
        }
    }
}

/// Parses a TOML fragment into `T`, mapping failures to configuration errors.
pub fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
