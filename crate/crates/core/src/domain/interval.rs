//! The interval lattice over the integers.
//!
//! Elements are ⊥ (the empty set) and `[lo, hi]` with bounds drawn from
//! ℤ ∪ {−∞, +∞}. Join is the convex hull, meet the intersection, and the
//! widening operator jumps growing bounds to infinity so ascending chains
//! stabilize.

use std::fmt;

/// Interval endpoint. The derived ordering places `NegInf` below every finite
/// value and `PosInf` above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    NegInf,
    Finite(i64),
    PosInf,
}

impl Bound {
    fn pred(self) -> Bound {
        match self {
            Bound::Finite(c) => c.checked_sub(1).map(Bound::Finite).unwrap_or(Bound::NegInf),
            inf => inf,
        }
    }

    fn succ(self) -> Bound {
        match self {
            Bound::Finite(c) => c.checked_add(1).map(Bound::Finite).unwrap_or(Bound::PosInf),
            inf => inf,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => write!(f, "-inf"),
            Bound::Finite(c) => write!(f, "{c}"),
            Bound::PosInf => write!(f, "+inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Interval {
    Bottom,
    Range { lo: Bound, hi: Bound },
}

impl Interval {
    pub const TOP: Interval = Interval::Range {
        lo: Bound::NegInf,
        hi: Bound::PosInf,
    };

    /// Booleans encoded as integers live in [0, 1].
    pub const BOOL: Interval = Interval::Range {
        lo: Bound::Finite(0),
        hi: Bound::Finite(1),
    };

    /// Normalizing constructor: an empty range is ⊥.
    pub fn range(lo: Bound, hi: Bound) -> Interval {
        if lo > hi || lo == Bound::PosInf || hi == Bound::NegInf {
            Interval::Bottom
        } else {
            Interval::Range { lo, hi }
        }
    }

    pub fn bounded(lo: i64, hi: i64) -> Interval {
        Interval::range(Bound::Finite(lo), Bound::Finite(hi))
    }

    pub fn constant(c: i64) -> Interval {
        Interval::bounded(c, c)
    }

    pub fn at_least(lo: Bound) -> Interval {
        Interval::range(lo, Bound::PosInf)
    }

    pub fn at_most(hi: Bound) -> Interval {
        Interval::range(Bound::NegInf, hi)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Interval::Bottom)
    }

    pub fn lo(&self) -> Option<Bound> {
        match self {
            Interval::Bottom => None,
            Interval::Range { lo, .. } => Some(*lo),
        }
    }

    pub fn hi(&self) -> Option<Bound> {
        match self {
            Interval::Bottom => None,
            Interval::Range { hi, .. } => Some(*hi),
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        match self {
            Interval::Bottom => false,
            Interval::Range { lo, hi } => *lo <= Bound::Finite(v) && Bound::Finite(v) <= *hi,
        }
    }

    /// Least interval containing both; ⊥ is the identity.
    pub fn join(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Bottom, x) | (x, Interval::Bottom) => x,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                Interval::Range { lo: a.min(c), hi: b.max(d) }
            }
        }
    }

    /// Intersection; disjoint ranges yield ⊥.
    pub fn meet(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Bottom, _) | (_, Interval::Bottom) => Interval::Bottom,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                Interval::range(a.max(c), b.min(d))
            }
        }
    }

    /// Set inclusion; ⊥ is below everything.
    pub fn leq(self, other: Interval) -> bool {
        match (self, other) {
            (Interval::Bottom, _) => true,
            (_, Interval::Bottom) => false,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                c <= a && b <= d
            }
        }
    }

    /// Standard interval widening: a bound that grew jumps to infinity, a
    /// stable bound is kept from `self`.
    pub fn widen(self, new: Interval) -> Interval {
        match (self, new) {
            (Interval::Bottom, n) => n,
            (o, Interval::Bottom) => o,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                let lo = if c < a { Bound::NegInf } else { a };
                let hi = if d > b { Bound::PosInf } else { b };
                Interval::Range { lo, hi }
            }
        }
    }

    pub fn add(self, other: Interval) -> Interval {
        self.zip(other, |a, c| add_bound(a, c, false), |b, d| add_bound(b, d, true))
    }

    pub fn sub(self, other: Interval) -> Interval {
        // [a,b] - [c,d] = [a-d, b-c]
        match (self, other) {
            (Interval::Bottom, _) | (_, Interval::Bottom) => Interval::Bottom,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                Interval::range(sub_bound(a, d, false), sub_bound(b, c, true))
            }
        }
    }

    pub fn mul(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Bottom, _) | (_, Interval::Bottom) => Interval::Bottom,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                let products = [wide_mul(a, c), wide_mul(a, d), wide_mul(b, c), wide_mul(b, d)];
                let lo = products.iter().copied().min().unwrap();
                let hi = products.iter().copied().max().unwrap();
                Interval::range(clamp_lo(lo), clamp_hi(hi))
            }
        }
    }

    fn zip(
        self,
        other: Interval,
        f_lo: impl Fn(Bound, Bound) -> Bound,
        f_hi: impl Fn(Bound, Bound) -> Bound,
    ) -> Interval {
        match (self, other) {
            (Interval::Bottom, _) | (_, Interval::Bottom) => Interval::Bottom,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                Interval::range(f_lo(a, c), f_hi(b, d))
            }
        }
    }

    /// Refinement of `self` under `self < other-side` etc., used by the
    /// backward condition transfer. `other` is the interval of the opposite
    /// comparison operand.
    pub fn refine_lt(self, other: Interval) -> Interval {
        match other.hi() {
            None => Interval::Bottom,
            Some(h) => self.meet(Interval::at_most(h.pred())),
        }
    }

    pub fn refine_le(self, other: Interval) -> Interval {
        match other.hi() {
            None => Interval::Bottom,
            Some(h) => self.meet(Interval::at_most(h)),
        }
    }

    pub fn refine_gt(self, other: Interval) -> Interval {
        match other.lo() {
            None => Interval::Bottom,
            Some(l) => self.meet(Interval::at_least(l.succ())),
        }
    }

    pub fn refine_ge(self, other: Interval) -> Interval {
        match other.lo() {
            None => Interval::Bottom,
            Some(l) => self.meet(Interval::at_least(l)),
        }
    }

    pub fn refine_eq(self, other: Interval) -> Interval {
        self.meet(other)
    }

    /// `self != other`: only a singleton on a boundary trims anything.
    pub fn refine_ne(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Bottom, _) | (_, Interval::Bottom) => Interval::Bottom,
            (Interval::Range { lo, hi }, Interval::Range { lo: c, hi: d }) if c == d => {
                if lo == c && hi == c {
                    Interval::Bottom
                } else if lo == c {
                    Interval::range(lo.succ(), hi)
                } else if hi == c {
                    Interval::range(lo, hi.pred())
                } else {
                    self
                }
            }
            _ => self,
        }
    }
}

// Endpoint addition; a finite overflow rounds outward (toward the infinity on
// that side), which only widens the result.
fn add_bound(a: Bound, b: Bound, upper: bool) -> Bound {
    match (a, b) {
        (Bound::Finite(x), Bound::Finite(y)) => x.checked_add(y).map(Bound::Finite).unwrap_or({
            if upper {
                Bound::PosInf
            } else {
                Bound::NegInf
            }
        }),
        (Bound::NegInf, _) | (_, Bound::NegInf) if !upper => Bound::NegInf,
        (Bound::PosInf, _) | (_, Bound::PosInf) if upper => Bound::PosInf,
        (Bound::NegInf, _) | (_, Bound::NegInf) => Bound::NegInf,
        (Bound::PosInf, _) | (_, Bound::PosInf) => Bound::PosInf,
    }
}

fn sub_bound(a: Bound, b: Bound, upper: bool) -> Bound {
    let neg_b = match b {
        Bound::NegInf => Bound::PosInf,
        Bound::Finite(c) => match c.checked_neg() {
            Some(n) => Bound::Finite(n),
            None => Bound::PosInf,
        },
        Bound::PosInf => Bound::NegInf,
    };
    add_bound(a, neg_b, upper)
}

// Endpoint products computed in i128 so finite overflow cannot occur; the
// ±∞ · 0 = 0 convention keeps products of bounded-by-zero intervals exact.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Wide {
    NegInf,
    Val(i128),
    PosInf,
}

fn wide_mul(a: Bound, b: Bound) -> Wide {
    match (a, b) {
        (Bound::Finite(x), Bound::Finite(y)) => Wide::Val(i128::from(x) * i128::from(y)),
        (Bound::Finite(0), _) | (_, Bound::Finite(0)) => Wide::Val(0),
        (Bound::PosInf, Bound::PosInf) | (Bound::NegInf, Bound::NegInf) => Wide::PosInf,
        (Bound::PosInf, Bound::NegInf) | (Bound::NegInf, Bound::PosInf) => Wide::NegInf,
        (Bound::PosInf, Bound::Finite(c)) | (Bound::Finite(c), Bound::PosInf) => {
            if c > 0 {
                Wide::PosInf
            } else {
                Wide::NegInf
            }
        }
        (Bound::NegInf, Bound::Finite(c)) | (Bound::Finite(c), Bound::NegInf) => {
            if c > 0 {
                Wide::NegInf
            } else {
                Wide::PosInf
            }
        }
    }
}

fn clamp_lo(w: Wide) -> Bound {
    match w {
        Wide::NegInf => Bound::NegInf,
        Wide::PosInf => Bound::PosInf,
        Wide::Val(v) => {
            if v < i128::from(i64::MIN) {
                Bound::NegInf
            } else if v > i128::from(i64::MAX) {
                // A huge positive lower bound: clamping down stays sound.
                Bound::Finite(i64::MAX)
            } else {
                Bound::Finite(v as i64)
            }
        }
    }
}

fn clamp_hi(w: Wide) -> Bound {
    match w {
        Wide::NegInf => Bound::NegInf,
        Wide::PosInf => Bound::PosInf,
        Wide::Val(v) => {
            if v > i128::from(i64::MAX) {
                Bound::PosInf
            } else if v < i128::from(i64::MIN) {
                Bound::Finite(i64::MIN)
            } else {
                Bound::Finite(v as i64)
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Bottom => write!(f, "bottom"),
            Interval::Range { lo, hi } => write!(f, "[{lo}, {hi}]"),
        }
    }
}
