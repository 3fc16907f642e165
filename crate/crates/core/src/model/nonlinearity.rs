use num_rational::Rational64;

use crate::error::{NlsError, Result};

/// Local nonlinearity `f(s)` with `s = |u|^2`; all catalog kinds are x-independent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Nonlinearity {
    Zero,
    /// `b s^p`.
    Power {
        b: f64,
        p: Rational64,
    },
    /// `mu s^p1 + nu s^p2` with `p1 < p2`.
    TwoPower {
        mu: f64,
        p1: Rational64,
        nu: f64,
        p2: Rational64,
    },
    /// `b s^p ln(1 + s)`.
    LogPower {
        b: f64,
        p: Rational64,
    },
}

pub(crate) fn ratio_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `s^p` with `0^p = 0` for `p > 0` and `0^0 = 1`.
#[inline]
fn pow(s: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if s == 0.0 {
        0.0
    } else if p == p.trunc() && p.abs() <= 16.0 {
        s.powi(p as i32)
    } else if 2.0 * p == (2.0 * p).trunc() && p.abs() <= 16.0 {
        s.powi((p - 0.5) as i32) * s.sqrt()
    } else {
        s.powf(p)
    }
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        let zero = Rational64::from_integer(0);
        let bad = |msg: String| Err(NlsError::InvalidModel(msg));
        match *self {
            Nonlinearity::Zero => Ok(()),
            Nonlinearity::Power { b, p } | Nonlinearity::LogPower { b, p } => {
                if !b.is_finite() {
                    return bad("nonlinearity coefficient must be finite".into());
                }
                if p <= zero && !matches!(self, Nonlinearity::LogPower { .. }) {
                    return bad(format!("power exponent must be positive, got {p}"));
                }
                if p < zero {
                    return bad(format!("exponent must be nonnegative, got {p}"));
                }
                Ok(())
            }
            Nonlinearity::TwoPower { mu, p1, nu, p2 } => {
                if !(mu.is_finite() && nu.is_finite()) {
                    return bad("nonlinearity coefficients must be finite".into());
                }
                if p1 <= zero || p2 <= p1 {
                    return bad(format!("two-power exponents need 0 < p1 < p2, got {p1}, {p2}"));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::Power { b, .. } | Nonlinearity::LogPower { b, .. } => b == 0.0,
            Nonlinearity::TwoPower { mu, nu, .. } => mu == 0.0 && nu == 0.0,
        }
    }

    /// `f(s)`.
    pub fn f(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { b, p } => b * pow(s, ratio_f64(p)),
            Nonlinearity::TwoPower { mu, p1, nu, p2 } => mu * pow(s, ratio_f64(p1)) + nu * pow(s, ratio_f64(p2)),
            Nonlinearity::LogPower { b, p } => b * pow(s, ratio_f64(p)) * s.ln_1p(),
        }
    }

    /// `F(s) = int_0^s f`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { b, p } => {
                let q = ratio_f64(p) + 1.0;
                b * pow(s, q) / q
            }
            Nonlinearity::TwoPower { mu, p1, nu, p2 } => {
                let (q1, q2) = (ratio_f64(p1) + 1.0, ratio_f64(p2) + 1.0);
                mu * pow(s, q1) / q1 + nu * pow(s, q2) / q2
            }
            Nonlinearity::LogPower { b, p } => {
                let q = ratio_f64(p) + 1.0;
                b * (pow(s, q) * s.ln_1p() - log_moment(q, s)) / q
            }
        }
    }

    /// `s f'(s)`, finite at `s = 0` even when `f'` is not.
    pub fn s_fprime(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { b, p } => {
                let p = ratio_f64(p);
                b * p * pow(s, p)
            }
            Nonlinearity::TwoPower { mu, p1, nu, p2 } => {
                let (p1, p2) = (ratio_f64(p1), ratio_f64(p2));
                mu * p1 * pow(s, p1) + nu * p2 * pow(s, p2)
            }
            Nonlinearity::LogPower { b, p } => {
                let p = ratio_f64(p);
                b * (p * pow(s, p) * s.ln_1p() + pow(s, p + 1.0) / (1.0 + s))
            }
        }
    }

    /// `f'(s)` for `s > 0`.
    pub fn fprime(&self, s: f64) -> f64 {
        self.s_fprime(s) / s
    }
}

// Gauss-Legendre 8-point nodes and weights on [-1, 1].
const GL_X: [f64; 4] =
    [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] =
    [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// `int_0^s sigma^q / (1 + sigma) d sigma` for `q >= 1`.
///
/// Alternating series up to `s = 1/2`, then composite Gauss-Legendre in `ln sigma`.
pub(crate) fn log_moment(q: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let series = |x: f64| {
        let mut total = 0.0;
        let mut term = x.powf(q + 1.0);
        for n in 0..200 {
            let c = term / (q + n as f64 + 1.0);
            total += if n % 2 == 0 { c } else { -c };
            if c.abs() < 1e-18 * total.abs() {
                break;
            }
            term *= x;
        }
        total
    };
    if s <= 0.5 {
        return series(s);
    }
    let (t0, t1) = (0.5f64.ln(), s.ln());
    let panels = ((t1 - t0) / 0.25).ceil().max(1.0) as usize;
    let width = (t1 - t0) / panels as f64;
    let integrand = |t: f64| {
        let e = t.exp();
        e.powf(q + 1.0) / (1.0 + e)
    };
    let mut total = 0.0;
    for k in 0..panels {
        let mid = t0 + (k as f64 + 0.5) * width;
        let half = 0.5 * width;
        let mut acc = 0.0;
        for (x, w) in GL_X.iter().zip(GL_W) {
            acc += w * (integrand(mid - half * x) + integrand(mid + half * x));
        }
        total += acc * half;
    }
    series(0.5) + total
}
