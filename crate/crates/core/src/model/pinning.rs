use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Self-potential favouring height zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PinningSpec {
    /// No pinning.
    Free,
    /// `V(h) = -ε·1{|h| ≤ a}`.
    SquareWell { strength: f64, half_width: f64 },
    /// Reference measure `dh + e^J δ₀(dh)` per site.
    Delta { log_weight: f64 },
}

impl PinningSpec {
    pub fn square_well(strength: f64, half_width: f64) -> Result<Self> {
        let p = PinningSpec::SquareWell {
            strength,
            half_width,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn delta(log_weight: f64) -> Result<Self> {
        let p = PinningSpec::Delta { log_weight };
        p.validate()?;
        Ok(p)
    }

    /// δ-pinning parameterised by the atom weight `e^J` directly.
    pub fn delta_weight(atom_weight: f64) -> Result<Self> {
        if !(atom_weight > 0.0) {
            return Err(Error::param("e^J", format!("must be > 0, got {atom_weight}")));
        }
        Self::delta(atom_weight.ln())
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PinningSpec::Free => Ok(()),
            PinningSpec::SquareWell {
                strength,
                half_width,
            } => {
                if !(strength > 0.0) || !strength.is_finite() {
                    return Err(Error::param("epsilon", format!("must be > 0, got {strength}")));
                }
                if !(half_width > 0.0) || !half_width.is_finite() {
                    return Err(Error::param("a", format!("must be > 0, got {half_width}")));
                }
                Ok(())
            }
            PinningSpec::Delta { log_weight } => {
                if log_weight.is_nan() || log_weight == f64::INFINITY {
                    return Err(Error::param("J", format!("must be real, got {log_weight}")));
                }
                Ok(())
            }
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            PinningSpec::Free => "free",
            PinningSpec::SquareWell { .. } => "square-well",
            PinningSpec::Delta { .. } => "delta",
        }
    }

    /// `a(e^ε − 1)` for the square well, `e^J` for δ-pinning, 0 when free.
    pub fn coupling(&self) -> f64 {
        match *self {
            PinningSpec::Free => 0.0,
            PinningSpec::SquareWell {
                strength,
                half_width,
            } => half_width * strength.exp_m1(),
            PinningSpec::Delta { log_weight } => log_weight.exp(),
        }
    }

    /// The δ-pinning reached as `ε → ∞` with `2(e^ε − 1)a = e^J` held fixed.
    pub fn limiting_delta(&self) -> Result<PinningSpec> {
        match *self {
            PinningSpec::SquareWell { .. } => Self::delta((2.0 * self.coupling()).ln()),
            _ => Err(Error::WrongVariant {
                expected: "square-well",
                found: self.variant_name(),
            }),
        }
    }

    /// Square well of depth `strength` with the same limiting atom weight as `self`.
    pub fn square_well_approximation(&self, strength: f64) -> Result<PinningSpec> {
        match *self {
            PinningSpec::Delta { log_weight } => {
                Self::square_well(strength, log_weight.exp() / (2.0 * strength.exp_m1()))
            }
            _ => Err(Error::WrongVariant {
                expected: "delta",
                found: self.variant_name(),
            }),
        }
    }

    /// `V(h)`; zero for free and δ variants.
    #[inline]
    pub fn potential(&self, h: f64) -> f64 {
        match *self {
            PinningSpec::SquareWell {
                strength,
                half_width,
            } if h.abs() <= half_width => -strength,
            _ => 0.0,
        }
    }
}

/// `e^{-V(h)} = 1 + (e^ε − 1)·1{|h| ≤ a}`.
pub fn pin_weight(pinning: &PinningSpec, h: f64) -> Result<f64> {
    match *pinning {
        PinningSpec::Free => Ok(1.0),
        PinningSpec::SquareWell {
            strength,
            half_width,
        } => Ok(if h.abs() <= half_width {
            1.0 + strength.exp_m1()
        } else {
            1.0
        }),
        PinningSpec::Delta { .. } => Err(Error::WrongVariant {
            expected: "square-well",
            found: "delta",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_well_weights() {
        let p = PinningSpec::square_well(2f64.ln(), 1.0).unwrap();
        assert!((pin_weight(&p, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(pin_weight(&p, 1.5).unwrap(), 1.0);
        assert!((pin_weight(&p, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let weak = PinningSpec::square_well(1e-12, 1.0).unwrap();
        assert!((pin_weight(&weak, 0.0).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn delta_has_no_density() {
        let p = PinningSpec::delta(0.0).unwrap();
        assert!(pin_weight(&p, 0.0).is_err());
    }

    #[test]
    fn limit_relation() {
        let sw = PinningSpec::square_well(5.0, 0.01).unwrap();
        let d = sw.limiting_delta().unwrap();
        assert!((d.coupling() - 2.0 * 0.01 * 5f64.exp_m1()).abs() < 1e-12);
        let back = d.square_well_approximation(5.0).unwrap();
        match back {
            PinningSpec::SquareWell { half_width, .. } => assert!((half_width - 0.01).abs() < 1e-14),
            _ => unreachable!(),
        }
    }

    #[test]
    fn validation() {
        assert!(PinningSpec::square_well(0.0, 1.0).is_err());
        assert!(PinningSpec::square_well(1.0, -1.0).is_err());
        assert!(PinningSpec::delta(f64::NAN).is_err());
        assert!(PinningSpec::delta(f64::NEG_INFINITY).is_ok());
        assert_eq!(PinningSpec::delta(f64::NEG_INFINITY).unwrap().coupling(), 0.0);
    }
}
