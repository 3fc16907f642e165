use crate::error::{NlsError, Result};

/// External potential `V(x)`, radial in all catalog kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// `a |x|^2`.
    Harmonic {
        a: f64,
    },
    /// `a |x|^2 / (1 + |x|^2)`.
    Saturating {
        a: f64,
    },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Zero => Ok(()),
            Potential::Harmonic { a } | Potential::Saturating { a } => {
                if a.is_finite() && a >= 0.0 {
                    Ok(())
                } else {
                    Err(NlsError::InvalidModel(format!("potential coefficient must be >= 0, got {a}")))
                }
            }
        }
    }

    /// True when `V` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match *self {
            Potential::Zero => true,
            Potential::Harmonic { a } | Potential::Saturating { a } => a == 0.0,
        }
    }

    /// `V` at squared radius `r2`.
    pub fn value(&self, r2: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Harmonic { a } => a * r2,
            Potential::Saturating { a } => a * r2 / (1.0 + r2),
        }
    }

    /// `x . grad V` at squared radius `r2`.
    pub fn radial_derivative(&self, r2: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Harmonic { a } => 2.0 * a * r2,
            Potential::Saturating { a } => {
                let d = 1.0 + r2;
                2.0 * a * r2 / (d * d)
            }
        }
    }

    /// Bounded potentials satisfy the `L^r + L^inf` class; unbounded ones the complement.
    pub fn is_bounded(&self) -> bool {
        !matches!(*self, Potential::Harmonic { a } if a > 0.0)
    }
}
