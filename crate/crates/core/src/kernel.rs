//! Hawkes memory kernels and mark scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-decay function of the self-exciting intensity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MemoryKernel {
    /// `e^(-r dt)`
    Exponential { r: f64 },
    /// `(dt + c)^(-(1 + r))`
    PowerLaw { r: f64, c: f64 },
}

impl Default for MemoryKernel {
    fn default() -> Self {
        MemoryKernel::Exponential { r: 1.0 }
    }
}

impl MemoryKernel {
    pub fn exponential(r: f64) -> Result<Self> {
        let k = MemoryKernel::Exponential { r };
        k.validate()?;
        Ok(k)
    }

    pub fn power_law(r: f64, c: f64) -> Result<Self> {
        let k = MemoryKernel::PowerLaw { r, c };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MemoryKernel::Exponential { r } if r > 0.0 && r.is_finite() => Ok(()),
            MemoryKernel::PowerLaw { r, c } if r > 0.0 && r.is_finite() && c > 0.0 && c.is_finite() => Ok(()),
            k => Err(Error::Domain(format!("invalid kernel parameters {k:?}"))),
        }
    }

    /// Natural log of the kernel at `dt`, used by the branching computation.
    pub(crate) fn ln_eval(&self, dt: f64) -> f64 {
        match *self {
            MemoryKernel::Exponential { r } => -r * dt,
            MemoryKernel::PowerLaw { r, c } => -(1.0 + r) * (dt + c).ln(),
        }
    }
}

/// Evaluates the kernel at a non-negative lag.
pub fn kernel_eval(kernel: &MemoryKernel, dt: f64) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("kernel lag must be non-negative, got {dt}")));
    }
    Ok(match *kernel {
        MemoryKernel::Exponential { r } => (-r * dt).exp(),
        MemoryKernel::PowerLaw { r, c } => (dt + c).powf(-(1.0 + r)),
    })
}

/// Exponent applied to event marks; `b = 0` disables marks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkConfig {
    pub b: f64,
}

impl MarkConfig {
    pub fn new(b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::Domain(format!("mark exponent must be finite, got {b}")));
        }
        Ok(Self { b })
    }

    /// `ln(mark^b)`, with `0^0 = 1`. A zero mark under a negative exponent is rejected.
    pub(crate) fn ln_weight(&self, mark: f64) -> Result<f64> {
        if self.b == 0.0 {
            return Ok(0.0);
        }
        if mark == 0.0 {
            if self.b < 0.0 {
                return Err(Error::Domain("zero mark with a negative mark exponent".into()));
            }
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.b * mark.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_values() {
        let k = MemoryKernel::exponential(1.0).unwrap();
        assert_eq!(kernel_eval(&k, 0.0).unwrap(), 1.0);
        assert!((kernel_eval(&k, 1.0).unwrap() - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn power_law_value() {
        let k = MemoryKernel::power_law(1.0, 1.0).unwrap();
        assert!((kernel_eval(&k, 1.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_lag_is_domain_error() {
        assert!(kernel_eval(&MemoryKernel::default(), -0.1).is_err());
        assert!(kernel_eval(&MemoryKernel::default(), f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MemoryKernel::exponential(0.0).is_err());
        assert!(MemoryKernel::power_law(1.0, 0.0).is_err());
        assert!(MemoryKernel::power_law(-1.0, 1.0).is_err());
    }

    #[test]
    fn ln_eval_matches_eval() {
        for k in [MemoryKernel::Exponential { r: 0.7 }, MemoryKernel::PowerLaw { r: 0.4, c: 0.01 }] {
            for dt in [0.0, 0.3, 12.0, 4000.0] {
                let direct = kernel_eval(&k, dt).unwrap();
                assert!((k.ln_eval(dt).exp() - direct).abs() <= 1e-12 * direct.max(1e-300));
            }
        }
    }

    #[test]
    fn mark_weights() {
        let off = MarkConfig::default();
        assert_eq!(off.ln_weight(0.0).unwrap(), 0.0);
        let on = MarkConfig::new(0.5).unwrap();
        assert_eq!(on.ln_weight(0.0).unwrap(), f64::NEG_INFINITY);
        assert!((on.ln_weight(100.0).unwrap() - 10f64.ln()).abs() < 1e-15);
        assert!(MarkConfig::new(-0.5).unwrap().ln_weight(0.0).is_err());
    }
}
