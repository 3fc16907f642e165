use std::fmt;

use num_rational::Rational64;

/// Endpoint of a rational interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Unbounded,
    Open(Rational64),
    Closed(Rational64),
}

/// Interval of rationals with independently open, closed or infinite ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    pub const ALL: Interval = Interval { lo: Bound::Unbounded, hi: Bound::Unbounded };

    pub fn empty() -> Self {
        let z = Rational64::from_integer(0);
        Interval { lo: Bound::Open(z), hi: Bound::Open(z) }
    }

    pub fn new(lo: Bound, hi: Bound) -> Self {
        Interval { lo, hi }
    }

    pub fn above(lo: Bound) -> Self {
        Interval { lo, hi: Bound::Unbounded }
    }

    pub fn below(hi: Bound) -> Self {
        Interval { lo: Bound::Unbounded, hi }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval { lo: tighter_lo(self.lo, other.lo), hi: tighter_hi(self.hi, other.hi) }
    }

    pub fn is_empty(&self) -> bool {
        match (self.lo, self.hi) {
            (Bound::Unbounded, _) | (_, Bound::Unbounded) => false,
            (Bound::Closed(a), Bound::Closed(b)) => a > b,
            (Bound::Open(a), Bound::Open(b))
            | (Bound::Open(a), Bound::Closed(b))
            | (Bound::Closed(a), Bound::Open(b)) => a >= b,
        }
    }

    pub fn contains(&self, x: Rational64) -> bool {
        let lo_ok = match self.lo {
            Bound::Unbounded => true,
            Bound::Open(a) => x > a,
            Bound::Closed(a) => x >= a,
        };
        let hi_ok = match self.hi {
            Bound::Unbounded => true,
            Bound::Open(b) => x < b,
            Bound::Closed(b) => x <= b,
        };
        lo_ok && hi_ok
    }

    /// Some member of the interval, preferring a closed endpoint.
    pub fn witness(&self) -> Option<Rational64> {
        if self.is_empty() {
            return None;
        }
        let one = Rational64::from_integer(1);
        let two = Rational64::from_integer(2);
        Some(match (self.lo, self.hi) {
            (_, Bound::Closed(b)) => b,
            (Bound::Closed(a), _) => a,
            (Bound::Open(a), Bound::Open(b)) => (a + b) / two,
            (Bound::Open(a), Bound::Unbounded) => a + one,
            (Bound::Unbounded, Bound::Open(b)) => b - one,
            (Bound::Unbounded, Bound::Unbounded) => one,
        })
    }
}

fn tighter_lo(a: Bound, b: Bound) -> Bound {
    match (a, b) {
        (Bound::Unbounded, x) | (x, Bound::Unbounded) => x,
        (Bound::Open(x), Bound::Open(y)) => Bound::Open(x.max(y)),
        (Bound::Closed(x), Bound::Closed(y)) => Bound::Closed(x.max(y)),
        (Bound::Open(x), Bound::Closed(y)) | (Bound::Closed(y), Bound::Open(x)) => {
            if y > x {
                Bound::Closed(y)
            } else {
                Bound::Open(x)
            }
        }
    }
}

fn tighter_hi(a: Bound, b: Bound) -> Bound {
    match (a, b) {
        (Bound::Unbounded, x) | (x, Bound::Unbounded) => x,
        (Bound::Open(x), Bound::Open(y)) => Bound::Open(x.min(y)),
        (Bound::Closed(x), Bound::Closed(y)) => Bound::Closed(x.min(y)),
        (Bound::Open(x), Bound::Closed(y)) | (Bound::Closed(y), Bound::Open(x)) => {
            if y < x {
                Bound::Closed(y)
            } else {
                Bound::Open(x)
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "empty");
        }
        match self.lo {
            Bound::Unbounded => write!(f, "(-inf")?,
            Bound::Open(a) => write!(f, "({a}")?,
            Bound::Closed(a) => write!(f, "[{a}")?,
        }
        match self.hi {
            Bound::Unbounded => write!(f, ", inf)"),
            Bound::Open(b) => write!(f, ", {b})"),
            Bound::Closed(b) => write!(f, ", {b}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn intersection_and_emptiness() {
        let a = Interval::new(Bound::Open(r(2, 1)), Bound::Closed(r(5, 2)));
        assert!(!a.is_empty());
        assert!(a.contains(r(5, 2)));
        assert!(!a.contains(r(2, 1)));
        assert_eq!(a.witness(), Some(r(5, 2)));
        let b = a.intersect(&Interval::below(Bound::Closed(r(2, 1))));
        assert!(b.is_empty());
        let c = Interval::new(Bound::Closed(r(1, 1)), Bound::Closed(r(1, 1)));
        assert!(!c.is_empty());
        assert_eq!(c.witness(), Some(r(1, 1)));
        let d = Interval::above(Bound::Open(r(2, 3))).intersect(&Interval::below(Bound::Open(r(1, 1))));
        assert_eq!(d.witness(), Some(r(5, 6)));
        assert_eq!(format!("{a}"), "(2, 5/2]");
    }
}
