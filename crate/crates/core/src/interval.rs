//! Outward-rounded interval arithmetic on binary64 endpoints.
//!
//! Every operation returns a superset of the exact real image of its
//! operands. Native round-to-nearest results are widened to the next
//! representable float, except where the result is provably exact:
//! add/sub exactness is decided by the TwoSum residual, mul/div/sqrt by
//! an fma residual (only trusted when the result is normal or a genuine
//! zero; double rounding can lie in the subnormal range). The exactness
//! escape keeps dyadic arithmetic, 0·x, and structural zeros exact,
//! which downstream checks rely on (symplecticity widths, exact zero
//! tableau entries).
//!
//! sin/cos enclose the native function with a ±2 ulp trust margin plus
//! conservative critical-point capture; this is the kernel's weakest
//! link and is documented as such.

use std::fmt;
use std::str::FromStr;

/// Closed interval [lo, hi] with extended-real endpoints, or EMPTY.
///
/// Invariant: lo <= hi, endpoints never NaN, -0.0 normalized to +0.0,
/// except EMPTY which is stored as [+inf, -inf].
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Build [lo, hi]. NaN endpoints, lo > hi, or a degenerate
    /// [±inf, ±inf] all normalize to EMPTY.
    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Interval::EMPTY;
        }
        // [+inf,+inf] and [-inf,-inf] contain no real number.
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Interval::EMPTY;
        }
        Interval {
            lo: norm_zero(lo),
            hi: norm_zero(hi),
        }
    }

    pub fn point(x: f64) -> Interval {
        Interval::new(x, x)
    }

    /// Enclosure of a decimal literal: the nearest float when the
    /// decimal is provably exact in binary64, otherwise widened one ulp
    /// outward. For constants known to more digits than a float holds
    /// (catalog tableau entries frozen from high-precision solves).
    pub fn enclose_decimal(s: &str) -> Result<Interval, ParseIntervalError> {
        let (lo, hi) = parse_decimal_outward(s)?;
        Ok(Interval::new(lo, hi))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        !self.is_empty() && self.lo.is_finite() && self.hi.is_finite()
    }

    /// Upper bound of hi - lo, rounded up. Empty gives 0, unbounded inf.
    pub fn width(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        sub_up(self.hi, self.lo)
    }

    /// A representable point inside the interval, None if empty or unbounded.
    pub fn midpoint(&self) -> Option<f64> {
        if !self.is_bounded() {
            return None;
        }
        if self.lo == self.hi {
            return Some(self.lo);
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        let m = if m.is_finite() { m } else { 0.0 };
        // Rounding could in principle escape the interval; clamp back.
        Some(m.clamp(self.lo, self.hi))
    }

    /// max(|x|) over the interval (magnitude).
    pub fn mag(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.lo.abs().max(self.hi.abs())
    }

    /// min(|x|) over the interval (mignitude).
    pub fn mig(&self) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        if self.lo <= 0.0 && 0.0 <= self.hi {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    /// Strict inclusion in the interior (both inequalities strict, or the
    /// outer side unbounded). Used by the Newton existence test.
    pub fn is_interior(&self, other: &Interval) -> bool {
        if self.is_empty() {
            return true;
        }
        if other.is_empty() {
            return false;
        }
        let lo_ok = other.lo < self.lo || other.lo == f64::NEG_INFINITY;
        let hi_ok = self.hi < other.hi || other.hi == f64::INFINITY;
        lo_ok && hi_ok
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn neg(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(-self.hi, -self.lo)
    }

    pub fn add(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(add_down(self.lo, other.lo), add_up(self.hi, other.hi))
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(sub_down(self.lo, other.hi), sub_up(self.hi, other.lo))
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        let (a, b) = (self.lo, self.hi);
        let (c, d) = (other.lo, other.hi);
        let lo = mul_down(a, c)
            .min(mul_down(a, d))
            .min(mul_down(b, c))
            .min(mul_down(b, d));
        let hi = mul_up(a, c)
            .max(mul_up(a, d))
            .max(mul_up(b, c))
            .max(mul_up(b, d));
        Interval::new(lo, hi)
    }

    /// Relational division: hull of {x/y : x in self, y in other, y != 0}.
    /// Division by exactly [0,0] yields EMPTY.
    pub fn div(&self, other: &Interval) -> Interval {
        let (p, q) = self.div_extended(other);
        match q {
            Some(q) => p.hull(&q),
            None => p,
        }
    }

    /// Extended division: the true quotient set is either one interval or
    /// (when 0 is interior to the divisor and 0 is not in the dividend)
    /// two disjoint unbounded pieces. Returns them unhulled; the second
    /// piece, when present, lies to the right of the first.
    pub fn div_extended(&self, other: &Interval) -> (Interval, Option<Interval>) {
        if self.is_empty() || other.is_empty() {
            return (Interval::EMPTY, None);
        }
        let (a, b) = (self.lo, self.hi);
        let (c, d) = (other.lo, other.hi);
        if c == 0.0 && d == 0.0 {
            return (Interval::EMPTY, None);
        }
        if !other.contains_zero() {
            let lo = div_down(a, c)
                .min(div_down(a, d))
                .min(div_down(b, c))
                .min(div_down(b, d));
            let hi = div_up(a, c)
                .max(div_up(a, d))
                .max(div_up(b, c))
                .max(div_up(b, d));
            return (Interval::new(lo, hi), None);
        }
        // 0 in divisor.
        if self.contains_zero() {
            return (Interval::ENTIRE, None);
        }
        // Dividend strictly signed; divisor straddles or touches zero.
        if b < 0.0 {
            if c == 0.0 {
                // y in (0, d]: x/y <= b/d < 0
                (Interval::new(f64::NEG_INFINITY, div_up(b, d)), None)
            } else if d == 0.0 {
                // y in [c, 0): x/y >= b/c > 0
                (Interval::new(div_down(b, c), f64::INFINITY), None)
            } else {
                (
                    Interval::new(f64::NEG_INFINITY, div_up(b, d)),
                    Some(Interval::new(div_down(b, c), f64::INFINITY)),
                )
            }
        } else {
            // a > 0
            if c == 0.0 {
                (Interval::new(div_down(a, d), f64::INFINITY), None)
            } else if d == 0.0 {
                (Interval::new(f64::NEG_INFINITY, div_up(a, c)), None)
            } else {
                (
                    Interval::new(f64::NEG_INFINITY, div_up(a, c)),
                    Some(Interval::new(div_down(a, d), f64::INFINITY)),
                )
            }
        }
    }

    pub fn sqr(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let (a, b) = (self.lo, self.hi);
        if a >= 0.0 {
            Interval::new(mul_down(a, a), mul_up(b, b))
        } else if b <= 0.0 {
            Interval::new(mul_down(b, b), mul_up(a, a))
        } else {
            let m = (-a).max(b);
            Interval::new(0.0, mul_up(m, m))
        }
    }

    /// Integer power, n >= 0. Tight on even powers (range of |x|^n).
    pub fn powi(&self, n: u32) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        match n {
            0 => Interval::ONE,
            1 => *self,
            2 => self.sqr(),
            _ => {
                if n % 2 == 0 {
                    let m = self.abs();
                    Interval::new(pow_down_nonneg(m.lo, n), pow_up_nonneg(m.hi, n))
                } else {
                    Interval::new(pow_down_signed(self.lo, n), pow_up_signed(self.hi, n))
                }
            }
        }
    }

    /// sqrt over the nonnegative part of the interval; EMPTY when the
    /// interval lies entirely below zero.
    pub fn sqrt(&self) -> Interval {
        let x = self.intersect(&Interval::new(0.0, f64::INFINITY));
        if x.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(sqrt_down(x.lo), sqrt_up(x.hi))
    }

    pub fn abs(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let (a, b) = (self.lo, self.hi);
        if a >= 0.0 {
            *self
        } else if b <= 0.0 {
            self.neg()
        } else {
            Interval::new(0.0, (-a).max(b))
        }
    }

    pub fn sin(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        // Critical points: pi/2 + 2k*pi (max), -pi/2 + 2k*pi (min).
        trig_enclose(self, 0.5, -0.5, f64::sin)
    }

    pub fn cos(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        // Critical points: 2k*pi (max), pi + 2k*pi (min).
        trig_enclose(self, 0.0, 1.0, f64::cos)
    }
}

fn norm_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

// ---- directed rounding primitives ----

/// TwoSum residual is zero iff a+b is exact (valid for all finite inputs).
fn add_exact(a: f64, b: f64, s: f64) -> bool {
    if !s.is_finite() {
        return !a.is_finite() || !b.is_finite();
    }
    let bp = s - a;
    let ap = s - bp;
    (b - bp) + (a - ap) == 0.0
}

fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_nan() {
        // inf + -inf cannot happen for normalized nonempty operand
        // endpoints on the lo side; keep a hard stop in debug builds.
        debug_assert!(false, "NaN in add_down({a}, {b})");
        return f64::NEG_INFINITY;
    }
    if add_exact(a, b, s) {
        s
    } else {
        s.next_down()
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_nan() {
        debug_assert!(false, "NaN in add_up({a}, {b})");
        return f64::INFINITY;
    }
    if add_exact(a, b, s) {
        s
    } else {
        s.next_up()
    }
}

fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// fma-based exactness for p ~ a*b. Only trusted when p is normal or a
/// genuine zero: in the subnormal range fma(a,b,-p) can report zero
/// residual after double rounding.
fn mul_exact(a: f64, b: f64, p: f64) -> bool {
    if !p.is_finite() {
        return false;
    }
    if p == 0.0 {
        return a == 0.0 || b == 0.0;
    }
    p.is_normal() && f64::mul_add(a, b, -p) == 0.0
}

/// Endpoint product with the 0 * inf -> 0 convention used by interval
/// multiplication candidate evaluation.
fn raw_prod(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    a * b
}

fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = raw_prod(a, b);
    if mul_exact(a, b, p) {
        p
    } else {
        p.next_down()
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = raw_prod(a, b);
    if mul_exact(a, b, p) {
        p
    } else {
        p.next_up()
    }
}

/// fma-based exactness for q ~ a/b: q*b == a with the same subnormal guard.
fn div_exact(a: f64, b: f64, q: f64) -> bool {
    if !q.is_finite() || !b.is_finite() {
        return false;
    }
    if q == 0.0 {
        return a == 0.0;
    }
    q.is_normal() && f64::mul_add(q, b, -a) == 0.0
}

fn div_down(a: f64, b: f64) -> f64 {
    debug_assert!(b != 0.0);
    if a == 0.0 {
        return 0.0;
    }
    let q = a / b;
    if q.is_nan() {
        // inf/inf: magnitude unknown, round maximally down.
        return f64::NEG_INFINITY;
    }
    if div_exact(a, b, q) {
        q
    } else {
        q.next_down()
    }
}

fn div_up(a: f64, b: f64) -> f64 {
    debug_assert!(b != 0.0);
    if a == 0.0 {
        return 0.0;
    }
    let q = a / b;
    if q.is_nan() {
        return f64::INFINITY;
    }
    if div_exact(a, b, q) {
        q
    } else {
        q.next_up()
    }
}

fn sqrt_exact(a: f64, r: f64) -> bool {
    // sqrt results of positive args are always >= 2^-537, i.e. normal,
    // so the fma residual is trustworthy; r == 0 only for a == 0.
    if r == 0.0 {
        return a == 0.0;
    }
    r.is_finite() && f64::mul_add(r, r, -a) == 0.0
}

fn sqrt_down(a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    let r = a.sqrt();
    if sqrt_exact(a, r) {
        r
    } else {
        r.next_down().max(0.0)
    }
}

fn sqrt_up(a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    let r = a.sqrt();
    if sqrt_exact(a, r) {
        r
    } else {
        r.next_up()
    }
}

/// x^n lower bound for x >= 0 by repeated down-rounded multiplication.
fn pow_down_nonneg(x: f64, n: u32) -> f64 {
    debug_assert!(x >= 0.0);
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = mul_down(acc, x);
    }
    acc
}

fn pow_up_nonneg(x: f64, n: u32) -> f64 {
    debug_assert!(x >= 0.0);
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = mul_up(acc, x);
    }
    acc
}

/// x^n lower bound for odd n, any sign of x (odd powers are monotone).
fn pow_down_signed(x: f64, n: u32) -> f64 {
    debug_assert!(n % 2 == 1);
    if x >= 0.0 {
        pow_down_nonneg(x, n)
    } else {
        -pow_up_nonneg(-x, n)
    }
}

fn pow_up_signed(x: f64, n: u32) -> f64 {
    debug_assert!(n % 2 == 1);
    if x >= 0.0 {
        pow_up_nonneg(x, n)
    } else {
        -pow_down_nonneg(-x, n)
    }
}

// Inverse-function helpers for the HC4 backward pass. All are loose by a
// few ulp but certified outward.

/// Lower bound for y^(1/n), y >= 0: the result r satisfies r^n <= y.
pub(crate) fn nth_root_down(y: f64, n: u32) -> f64 {
    debug_assert!(y >= 0.0 && n >= 1);
    if y == 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return f64::MAX;
    }
    let mut r = y.powf(1.0 / n as f64);
    if !r.is_finite() || r < 0.0 {
        r = 0.0;
    }
    for _ in 0..64 {
        if pow_up_nonneg(r, n) <= y {
            return r;
        }
        r = r.next_down().max(0.0);
    }
    0.0
}

/// Upper bound for y^(1/n), y >= 0: the result r satisfies r^n >= y.
pub(crate) fn nth_root_up(y: f64, n: u32) -> f64 {
    debug_assert!(y >= 0.0 && n >= 1);
    if y == 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return f64::INFINITY;
    }
    let mut r = y.powf(1.0 / n as f64);
    if !r.is_finite() {
        return f64::INFINITY;
    }
    for _ in 0..64 {
        if pow_down_nonneg(r, n) >= y {
            return r;
        }
        r = r.next_up();
    }
    f64::INFINITY
}

pub(crate) fn asin_down(y: f64) -> f64 {
    widen2(y.clamp(-1.0, 1.0).asin()).0
}

pub(crate) fn asin_up(y: f64) -> f64 {
    widen2(y.clamp(-1.0, 1.0).asin()).1
}

pub(crate) fn acos_down(y: f64) -> f64 {
    widen2(y.clamp(-1.0, 1.0).acos()).0.max(0.0)
}

pub(crate) fn acos_up(y: f64) -> f64 {
    widen2(y.clamp(-1.0, 1.0).acos()).1
}

pub(crate) fn pi_enclosure() -> Interval {
    Interval::new(PI_LO, pi_hi())
}

pub(crate) const TWO_PI_LOOSE: f64 = TWO_PI_UB;

// pi is not representable; the true value lies strictly between
// f64::consts::PI and its successor.
const PI_LO: f64 = std::f64::consts::PI;
fn pi_hi() -> f64 {
    PI_LO.next_up()
}

const TWO_PI_UB: f64 = 6.283185307179587; // > 2*pi

/// Trust margin on native sin/cos: two ulps each side.
fn widen2(x: f64) -> (f64, f64) {
    (x.next_down().next_down(), x.next_up().next_up())
}

/// Shared sin/cos enclosure. Critical points of the function are at
/// (max_frac + 2k)*pi for the maximum and (min_frac + 2k)*pi for the
/// minimum; endpoint values come from the native function with a ±2 ulp
/// trust margin; everything is clamped to [-1, 1].
fn trig_enclose(x: &Interval, max_frac: f64, min_frac: f64, f: fn(f64) -> f64) -> Interval {
    let (a, b) = (x.lo, x.hi);
    // Bail out to the full range when the interval spans a period or
    // sits too far out for reliable argument reduction.
    if !x.is_bounded() || x.width() >= TWO_PI_UB || a.abs() > 1e15 || b.abs() > 1e15 {
        return Interval::new(-1.0, 1.0);
    }
    let (fa_lo, fa_hi) = widen2(f(a));
    let (fb_lo, fb_hi) = widen2(f(b));
    let mut lo = fa_lo.min(fb_lo);
    let mut hi = fa_hi.max(fb_hi);
    if crit_point_hits(a, b, max_frac) {
        hi = 1.0;
    }
    if crit_point_hits(a, b, min_frac) {
        lo = -1.0;
    }
    Interval::new(lo.max(-1.0), hi.min(1.0))
}

/// Conservative test: does some point (frac + 2k)*pi, k integer, possibly
/// lie in [a, b]? Enumerates the few candidate k and checks whether the
/// interval enclosure of (frac + 2k)*pi intersects [a, b].
fn crit_point_hits(a: f64, b: f64, frac: f64) -> bool {
    let k_lo = (a / TWO_PI_UB - 1.0).floor() as i64;
    let k_hi = (b / TWO_PI_UB + 1.0).ceil() as i64;
    let pi_iv = Interval::new(PI_LO, pi_hi());
    for k in k_lo..=k_hi {
        // frac + 2k is exact for |k| well below 2^52.
        let m = frac + 2.0 * k as f64;
        let t = pi_iv.mul(&Interval::point(m));
        if !(t.hi < a || t.lo > b) {
            return true;
        }
    }
    false
}

// ---- text form ----

impl fmt::Display for Interval {
    /// "[lo,hi]" with shortest round-trip decimals; "[empty]" when empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Error from interval text parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIntervalError {
    pub msg: String,
}

impl fmt::Display for ParseIntervalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid interval: {}", self.msg)
    }
}

impl std::error::Error for ParseIntervalError {}

fn perr(msg: impl Into<String>) -> ParseIntervalError {
    ParseIntervalError { msg: msg.into() }
}

impl FromStr for Interval {
    type Err = ParseIntervalError;

    /// Accepts three forms:
    ///   "[lo,hi]"            endpoints parsed as nearest binary64
    ///   "3.5" / "-inf"       degenerate scalar
    ///   "0.12345[6,7]"       compressed digit-bracket notation: each
    ///                        bracket digit string is appended to the
    ///                        prefix magnitude, giving the two bounds
    /// Compressed-form bounds are decimal enclosure endpoints and are
    /// widened outward by one ulp unless provably exact; the explicit
    /// forms are taken as binary64 values verbatim so that formatting
    /// round-trips identically.
    fn from_str(s: &str) -> Result<Interval, ParseIntervalError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(perr("empty string"));
        }
        if s == "[empty]" {
            return Ok(Interval::EMPTY);
        }
        if let Some(rest) = s.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or_else(|| perr("missing ']'"))?;
            let (a, b) = inner.split_once(',').ok_or_else(|| perr("missing ','"))?;
            let lo = parse_endpoint(a.trim())?;
            let hi = parse_endpoint(b.trim())?;
            if lo > hi {
                return Err(perr(format!("lo {} > hi {}", lo, hi)));
            }
            return Ok(Interval::new(lo, hi));
        }
        if let Some(open) = s.find('[') {
            // compressed form: PREFIX[d1,d2]
            let close = s.strip_suffix(']').ok_or_else(|| perr("missing ']'"))?;
            let prefix = &close[..open];
            let digits = &close[open + 1..];
            let (d1, d2) = digits.split_once(',').ok_or_else(|| perr("missing ','"))?;
            let (d1, d2) = (d1.trim(), d2.trim());
            if d1.is_empty()
                || d2.is_empty()
                || !d1.chars().all(|c| c.is_ascii_digit())
                || !d2.chars().all(|c| c.is_ascii_digit())
            {
                return Err(perr("compressed digits must be decimal"));
            }
            let v1 = parse_decimal_outward(&format!("{prefix}{d1}"))?;
            let v2 = parse_decimal_outward(&format!("{prefix}{d2}"))?;
            let lo = v1.0.min(v2.0);
            let hi = v1.1.max(v2.1);
            return Ok(Interval::new(lo, hi));
        }
        let x = parse_endpoint(s)?;
        Ok(Interval::point(x))
    }
}

fn parse_endpoint(s: &str) -> Result<f64, ParseIntervalError> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => {
            let v: f64 = s.parse().map_err(|_| perr(format!("bad number '{s}'")))?;
            if v.is_nan() {
                Err(perr("NaN endpoint"))
            } else {
                Ok(v)
            }
        }
    }
}

/// Parse a plain decimal as an enclosure [down, up] of its exact value.
/// The nearest float is kept when the decimal is provably exact
/// (checked via an fma scaling argument for <= 22 fraction digits and a
/// <= 2^53 integer significand); otherwise widened one ulp outward.
fn parse_decimal_outward(s: &str) -> Result<(f64, f64), ParseIntervalError> {
    let v: f64 = s.parse().map_err(|_| perr(format!("bad number '{s}'")))?;
    if v.is_nan() {
        return Err(perr("NaN"));
    }
    if decimal_is_exact(s, v) {
        Ok((v, v))
    } else {
        Ok((v.next_down(), v.next_up()))
    }
}

/// Does the decimal string s denote exactly the float v? Sound but not
/// complete: may answer false for exact values outside its guard range.
fn decimal_is_exact(s: &str, v: f64) -> bool {
    let t = s.trim().trim_start_matches('+');
    let (neg, t) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t),
    };
    if t.contains(['e', 'E']) {
        return false;
    }
    let (int_part, frac_part) = match t.split_once('.') {
        Some((i, f)) => (i, f),
        None => (t, ""),
    };
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return false;
    }
    let digits: String = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('0');
    if digits.len() > 15 {
        // Mantissa may exceed 2^53 or be awkward; give up (sound).
        return false;
    }
    let m: u64 = if digits.is_empty() {
        0
    } else {
        match digits.parse() {
            Ok(m) => m,
            Err(_) => return false,
        }
    };
    let d = frac_part.len() as u32;
    if d > 22 {
        return false;
    }
    // v exact <=> v * 10^d == m in real arithmetic; 10^d is exact for
    // d <= 22 and the product check uses an fma residual.
    let pow = 10f64.powi(d as i32);
    let prod = v.abs() * pow;
    if prod != m as f64 {
        return false;
    }
    if m as f64 as u64 != m {
        return false;
    }
    if f64::mul_add(v.abs(), pow, -prod) != 0.0 {
        return false;
    }
    let _ = neg;
    true
}

// ---- boxes ----

/// Ordered list of named interval components. Any EMPTY component makes
/// the whole box empty.
#[derive(Clone, PartialEq)]
pub struct IntervalBox {
    names: std::sync::Arc<Vec<String>>,
    vals: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(names: Vec<String>, vals: Vec<Interval>) -> IntervalBox {
        assert_eq!(names.len(), vals.len(), "name/value length mismatch");
        IntervalBox {
            names: std::sync::Arc::new(names),
            vals,
        }
    }

    pub fn from_pairs(pairs: &[(&str, Interval)]) -> IntervalBox {
        IntervalBox::new(
            pairs.iter().map(|(n, _)| n.to_string()).collect(),
            pairs.iter().map(|(_, v)| *v).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty_box(&self) -> bool {
        self.vals.iter().any(|v| v.is_empty())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vals(&self) -> &[Interval] {
        &self.vals
    }

    pub fn vals_mut(&mut self) -> &mut [Interval] {
        &mut self.vals
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.index_of(name).map(|i| self.vals[i])
    }

    pub fn set(&mut self, idx: usize, v: Interval) {
        self.vals[idx] = v;
    }

    /// Same variable list (shared), values replaced.
    pub fn with_vals(&self, vals: Vec<Interval>) -> IntervalBox {
        assert_eq!(vals.len(), self.vals.len());
        IntervalBox {
            names: self.names.clone(),
            vals,
        }
    }

    /// Largest relative width and its index: width / max(1, mag),
    /// ties broken by variable order.
    pub fn widest_relative(&self) -> (usize, f64) {
        let mut best = (0usize, -1.0f64);
        for (i, v) in self.vals.iter().enumerate() {
            let w = v.width() / v.mag().max(1.0);
            if w > best.1 {
                best = (i, w);
            }
        }
        best
    }

    pub fn max_relative_width(&self) -> f64 {
        self.widest_relative().1.max(0.0)
    }

    /// Componentwise midpoint box (point intervals). None if any
    /// component is unbounded or empty.
    pub fn midpoint(&self) -> Option<IntervalBox> {
        let mut vals = Vec::with_capacity(self.vals.len());
        for v in &self.vals {
            vals.push(Interval::point(v.midpoint()?));
        }
        Some(self.with_vals(vals))
    }

    pub fn is_subset(&self, other: &IntervalBox) -> bool {
        debug_assert_eq!(self.names, other.names);
        self.vals
            .iter()
            .zip(&other.vals)
            .all(|(a, b)| a.is_subset(b))
    }

    pub fn hull(&self, other: &IntervalBox) -> IntervalBox {
        debug_assert_eq!(self.names, other.names);
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| a.hull(b))
            .collect();
        self.with_vals(vals)
    }

    pub fn intersect(&self, other: &IntervalBox) -> IntervalBox {
        debug_assert_eq!(self.names, other.names);
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| a.intersect(b))
            .collect();
        self.with_vals(vals)
    }

    /// Split along variable idx at its midpoint. Lower half keeps the
    /// midpoint as its upper bound, upper half starts there.
    pub fn bisect(&self, idx: usize) -> (IntervalBox, IntervalBox) {
        let v = self.vals[idx];
        let m = v.midpoint().expect("bisect needs a bounded component");
        let mut lo = self.clone();
        let mut hi = self.clone();
        lo.vals[idx] = Interval::new(v.lo(), m);
        hi.vals[idx] = Interval::new(m, v.hi());
        (lo, hi)
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (n, v)) in self.names.iter().zip(&self.vals).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}: {v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn add_exact_rationals() {
        assert_eq!(iv(1.0, 2.0).add(&iv(3.0, 4.0)), iv(4.0, 6.0));
    }

    #[test]
    fn sqr_straddling_zero() {
        assert_eq!(iv(-1.0, 2.0).sqr(), iv(0.0, 4.0));
    }

    #[test]
    fn div_one_third_tight() {
        let q = Interval::ONE.div(&iv(3.0, 3.0));
        let third = 1.0f64 / 3.0;
        assert!(q.lo() < third || q.lo() == third.next_down());
        assert!(q.contains(third));
        // Width at most 2 ulps of 1/3.
        assert!(q.hi() - q.lo() <= 2.0 * (third.next_up() - third));
        // 1/3 real value is strictly inside: 1/3 rounds up in binary64.
        assert!(q.lo() < q.hi());
    }

    #[test]
    fn div_by_zero_interval_is_empty() {
        assert!(iv(1.0, 2.0).div(&Interval::ZERO).is_empty());
        assert!(Interval::ZERO.div(&Interval::ZERO).is_empty());
    }

    #[test]
    fn div_straddle_zero_hulls_to_entire() {
        assert_eq!(iv(1.0, 1.0).div(&iv(-1.0, 1.0)), Interval::ENTIRE);
        let (p, q) = iv(1.0, 1.0).div_extended(&iv(-1.0, 1.0));
        let q = q.unwrap();
        assert_eq!(p.hi(), -1.0);
        assert_eq!(q.lo(), 1.0);
    }

    #[test]
    fn div_touching_zero_single_piece() {
        let (p, q) = iv(1.0, 2.0).div_extended(&iv(0.0, 4.0));
        assert!(q.is_none());
        assert_eq!(p.hi(), f64::INFINITY);
        assert!(p.lo() <= 0.25 && p.lo() >= 0.25_f64.next_down());
    }

    #[test]
    fn intersect_cases() {
        assert!(iv(1.0, 2.0).intersect(&iv(3.0, 4.0)).is_empty());
        assert_eq!(iv(1.0, 3.0).intersect(&iv(2.0, 5.0)), iv(2.0, 3.0));
        let x = iv(-0.5, 7.25);
        assert_eq!(x.intersect(&x), x);
    }

    #[test]
    fn measures() {
        assert_eq!(iv(1.0, 4.0).width(), 3.0);
        assert_eq!(iv(0.0, 1.0).midpoint(), Some(0.5));
        assert_eq!(iv(2.5, 2.5).midpoint(), Some(2.5));
        assert_eq!(iv(0.0, f64::INFINITY).midpoint(), None);
        assert_eq!(Interval::EMPTY.midpoint(), None);
    }

    #[test]
    fn empty_propagates() {
        assert!(Interval::EMPTY.add(&iv(1.0, 2.0)).is_empty());
        assert!(iv(1.0, 2.0).mul(&Interval::EMPTY).is_empty());
        assert!(Interval::EMPTY.sqrt().is_empty());
        assert!(Interval::EMPTY.sin().is_empty());
    }

    #[test]
    fn sqrt_negative_is_empty() {
        assert!(iv(-4.0, -1.0).sqrt().is_empty());
        assert_eq!(iv(-4.0, 4.0).sqrt(), iv(0.0, 2.0));
        assert_eq!(iv(4.0, 9.0).sqrt(), iv(2.0, 3.0));
    }

    #[test]
    fn mul_zero_times_anything_is_zero() {
        assert_eq!(Interval::ZERO.mul(&Interval::ENTIRE), Interval::ZERO);
        assert_eq!(iv(-5.0, 5.0).mul(&Interval::ZERO), Interval::ZERO);
    }

    #[test]
    fn mul_exactness_dyadic() {
        assert_eq!(iv(0.25, 0.5).mul(&iv(2.0, 4.0)), iv(0.5, 2.0));
        // 0.1 * 3 is inexact, so the result must be widened outward.
        let p = Interval::point(0.1).mul(&Interval::point(3.0));
        assert!(p.lo() < p.hi());
        assert!(p.contains(0.30000000000000004)); // nearest to 0.1*3 in f64
    }

    #[test]
    fn powi_matches_cases() {
        assert_eq!(iv(-1.0, 2.0).powi(0), Interval::ONE);
        assert_eq!(iv(-1.0, 2.0).powi(2), iv(0.0, 4.0));
        assert_eq!(iv(-2.0, 1.0).powi(3), iv(-8.0, 1.0));
        assert_eq!(iv(-2.0, -1.0).powi(4), iv(1.0, 16.0));
    }

    #[test]
    fn abs_and_neg() {
        assert_eq!(iv(-3.0, 1.0).abs(), iv(0.0, 3.0));
        assert_eq!(iv(-3.0, 1.0).neg(), iv(-1.0, 3.0));
        assert_eq!(iv(2.0, 3.0).abs(), iv(2.0, 3.0));
    }

    #[test]
    fn sin_contains_extrema() {
        let s = iv(0.0, 4.0).sin(); // passes pi/2
        assert_eq!(s.hi(), 1.0);
        assert!(s.lo() <= f64::sin(4.0));
        let s = iv(3.0, 7.0).sin(); // passes 3pi/2 (minimum)
        assert_eq!(s.lo(), -1.0);
        let wide = iv(0.0, 10.0).sin();
        assert_eq!(wide, iv(-1.0, 1.0));
    }

    #[test]
    fn cos_small_interval_tight() {
        let c = iv(1.0, 1.0).cos();
        assert!(c.contains(f64::cos(1.0)));
        assert!(c.width() <= 5.0 * f64::EPSILON);
        let c = iv(-0.5, 0.5).cos();
        assert_eq!(c.hi(), 1.0); // max at 0
        assert!(c.lo() <= f64::cos(0.5));
    }

    #[test]
    fn trig_always_within_unit() {
        for (a, b) in [(-8.0, -7.9), (0.0, 100.0), (1e14, 1e14 + 1.0)] {
            let s = iv(a, b).sin();
            assert!(s.lo() >= -1.0 && s.hi() <= 1.0);
            let c = iv(a, b).cos();
            assert!(c.lo() >= -1.0 && c.hi() <= 1.0);
        }
    }

    #[test]
    fn display_roundtrip() {
        for x in [
            iv(0.1, 0.2),
            iv(-3.0, 4.5),
            Interval::point(1.0 / 3.0),
            iv(f64::NEG_INFINITY, 2.0),
            Interval::EMPTY,
        ] {
            let s = x.to_string();
            let back: Interval = s.parse().unwrap();
            assert_eq!(back, x, "roundtrip of {s}");
        }
    }

    #[test]
    fn parse_compressed_notation() {
        let x: Interval = "0.21132486540[5,6]".parse().unwrap();
        assert!(x.lo() <= 0.211324865405 && 0.211324865406 <= x.hi());
        assert!(x.width() < 2e-12);
        // Negative: digits append to the magnitude, so order flips.
        let y: Interval = "-0.038675134594[9,8]".parse().unwrap();
        assert!(y.lo() <= -0.0386751345949 && -0.0386751345948 <= y.hi());
        assert!(y.width() < 2e-13);
    }

    #[test]
    fn parse_scalar_and_errors() {
        let x: Interval = "0.25".parse().unwrap();
        assert_eq!(x, Interval::point(0.25));
        assert!("[2,1]".parse::<Interval>().is_err());
        assert!("[1,foo]".parse::<Interval>().is_err());
        assert!("".parse::<Interval>().is_err());
    }

    #[test]
    fn exactness_aware_rounding_keeps_dyadics() {
        // Long dyadic chains stay exact: no spurious widening.
        let mut x = Interval::point(1.0);
        for _ in 0..50 {
            x = x.mul(&Interval::point(0.5)).add(&Interval::point(0.25));
        }
        assert!(x.is_point());
    }

    #[test]
    fn interiority() {
        assert!(iv(1.0, 2.0).is_interior(&iv(0.9, 2.1)));
        assert!(!iv(1.0, 2.0).is_interior(&iv(1.0, 2.1)));
        assert!(iv(1.0, 2.0).is_interior(&Interval::ENTIRE));
        assert!(Interval::EMPTY.is_interior(&iv(0.0, 0.0)));
    }

    #[test]
    fn box_basics() {
        let b = IntervalBox::from_pairs(&[("x", iv(0.0, 1.0)), ("y", iv(2.0, 2.0))]);
        assert_eq!(b.get("x"), Some(iv(0.0, 1.0)));
        assert_eq!(b.get("z"), None);
        assert!(!b.is_empty_box());
        let (lo, hi) = b.bisect(0);
        assert_eq!(lo.get("x"), Some(iv(0.0, 0.5)));
        assert_eq!(hi.get("x"), Some(iv(0.5, 1.0)));
        let mut e = b.clone();
        e.set(1, Interval::EMPTY);
        assert!(e.is_empty_box());
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn finite_f64() -> impl Strategy<Value = f64> {
            prop_oneof![
                -1e6f64..1e6f64,
                -1.0f64..1.0f64,
                Just(0.0),
                Just(1.0),
                Just(-1.0),
                Just(0.5),
                Just(1.0 / 3.0),
            ]
        }

        fn arb_interval() -> impl Strategy<Value = Interval> {
            (finite_f64(), finite_f64()).prop_map(|(a, b)| {
                if a <= b {
                    Interval::new(a, b)
                } else {
                    Interval::new(b, a)
                }
            })
        }

        fn sample_in(x: &Interval, t: f64) -> f64 {
            x.lo() + (x.hi() - x.lo()) * t
        }

        proptest! {
            #[test]
            fn containment_binary(a in arb_interval(), b in arb_interval(),
                                  s in 0.0f64..1.0, t in 0.0f64..1.0) {
                let (x, y) = (sample_in(&a, s), sample_in(&b, t));
                prop_assert!(a.add(&b).contains(x + y));
                prop_assert!(a.sub(&b).contains(x - y));
                prop_assert!(a.mul(&b).contains(x * y));
                if y != 0.0 {
                    prop_assert!(a.div(&b).contains(x / y));
                }
            }

            #[test]
            fn containment_unary(a in arb_interval(), s in 0.0f64..1.0) {
                let x = sample_in(&a, s);
                prop_assert!(a.neg().contains(-x));
                prop_assert!(a.sqr().contains(x * x));
                prop_assert!(a.abs().contains(x.abs()));
                prop_assert!(a.powi(3).contains(x * x * x));
                prop_assert!(a.sin().contains(x.sin()));
                prop_assert!(a.cos().contains(x.cos()));
                if x >= 0.0 {
                    prop_assert!(a.sqrt().contains(x.sqrt()));
                }
            }

            #[test]
            fn inclusion_monotone(a in arb_interval(), b in arb_interval(),
                                  s in 0.0f64..0.5, t in 0.0f64..0.5) {
                // Shrink to inner subintervals, results must stay inside.
                let a2 = Interval::new(sample_in(&a, s), sample_in(&a, 1.0 - s));
                let b2 = Interval::new(sample_in(&b, t), sample_in(&b, 1.0 - t));
                prop_assert!(a2.add(&b2).is_subset(&a.add(&b)));
                prop_assert!(a2.sub(&b2).is_subset(&a.sub(&b)));
                prop_assert!(a2.mul(&b2).is_subset(&a.mul(&b)));
                prop_assert!(a2.div(&b2).is_subset(&a.div(&b)));
                prop_assert!(a2.sqr().is_subset(&a.sqr()));
                prop_assert!(a2.sqrt().is_subset(&a.sqrt()));
                prop_assert!(a2.sin().is_subset(&a.sin()));
                prop_assert!(a2.cos().is_subset(&a.cos()));
            }

            #[test]
            fn dyadic_width_small(a in -1000i64..1000, b in -1000i64..1000) {
                // Degenerate dyadic inputs: add/sub/mul within 2 ulps.
                let x = Interval::point(a as f64 / 16.0);
                let y = Interval::point(b as f64 / 16.0);
                for r in [x.add(&y), x.sub(&y), x.mul(&y)] {
                    let ulps = r.width() / r.mag().max(1.0) / f64::EPSILON;
                    prop_assert!(ulps <= 2.0, "width {} too wide", r.width());
                }
            }
        }
    }
}
