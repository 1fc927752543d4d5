//! Outward-rounded real enclosures.
//!
//! A [`Ball`] is a pair `(center, radius)` of `f64` values representing the closed
//! interval `[center - radius, center + radius]`. Every operation rounds to
//! nearest and then widens the radius by a bound on the rounding error, so no
//! global rounding mode is touched.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Unit roundoff `2^-53`.
pub const U: f64 = f64::EPSILON / 2.0;
/// Smallest positive subnormal.
pub const TINY: f64 = 4.9406564584124654e-324;

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn add_dn(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn sub_dn(a: f64, b: f64) -> f64 {
    add_dn(a, -b)
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let c = a * b;
    if a == 0.0 || b == 0.0 || product_is_exact(a, b, c) {
        c
    } else {
        c.next_up()
    }
}

#[inline]
pub fn mul_dn(a: f64, b: f64) -> f64 {
    let c = a * b;
    if a == 0.0 || b == 0.0 || product_is_exact(a, b, c) {
        c
    } else {
        c.next_down()
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if a == 0.0 || (product_is_exact(q, b, q * b) && q * b == a) {
        q
    } else {
        q.next_up()
    }
}

#[inline]
pub fn div_dn(a: f64, b: f64) -> f64 {
    let q = a / b;
    if a == 0.0 || (product_is_exact(q, b, q * b) && q * b == a) {
        q
    } else {
        q.next_down()
    }
}

#[inline]
pub fn sqrt_up(a: f64) -> f64 {
    let r = a.sqrt();
    if a == 0.0 || (product_is_exact(r, r, r * r) && r * r == a) {
        r
    } else {
        r.next_up()
    }
}

#[inline]
pub fn sqrt_dn(a: f64) -> f64 {
    let r = a.sqrt();
    if a == 0.0 || (product_is_exact(r, r, r * r) && r * r == a) {
        r
    } else {
        r.next_down()
    }
}

/// Upper bound on `x^n` for `x >= 0`.
pub fn pow_up(x: f64, n: u32) -> f64 {
    let mut r = 1.0;
    for _ in 0..n {
        r = mul_up(r, x);
    }
    r
}

/// Lower bound on `x^n` for `x >= 0`.
pub fn pow_dn(x: f64, n: u32) -> f64 {
    let mut r = 1.0;
    for _ in 0..n {
        r = mul_dn(r, x).max(0.0);
    }
    r
}

/// Bound on the error of a round-to-nearest result `c`.
#[inline]
fn rerr(c: f64) -> f64 {
    (c.abs() * U).next_up().max(TINY)
}

/// Number of significant bits of a finite nonzero `x`.
#[inline]
fn sig_bits(x: f64) -> u32 {
    let bits = x.to_bits();
    let frac = bits & ((1u64 << 52) - 1);
    let m = if (bits >> 52) & 0x7ff == 0 { frac } else { frac | (1u64 << 52) };
    64 - m.leading_zeros() - m.trailing_zeros()
}

/// Sufficient test for `a * b` being exactly `c`.
#[inline]
fn product_is_exact(a: f64, b: f64, c: f64) -> bool {
    c.is_finite() && c.abs() >= f64::MIN_POSITIVE && sig_bits(a) + sig_bits(b) <= 53
}

/// Exact two-sum: `s + e == a + b` with `s = fl(a + b)`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Ball {
    center: f64,
    radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl Ball {
    pub const ZERO: Ball = Ball { center: 0.0, radius: 0.0 };
    pub const ONE: Ball = Ball { center: 1.0, radius: 0.0 };

    pub fn new(center: f64, radius: f64) -> Result<Ball> {
        if !center.is_finite() || !radius.is_finite() || radius < 0.0 {
            return Err(Error::Domain(format!("invalid ball ({center}, {radius})")));
        }
        Ok(Ball { center, radius })
    }

    /// Ball without validation, for internal use with known-good values.
    #[inline]
    pub(crate) const fn raw(center: f64, radius: f64) -> Ball {
        Ball { center, radius }
    }

    #[inline]
    pub const fn exact(x: f64) -> Ball {
        Ball { center: x, radius: 0.0 }
    }

    /// Smallest-radius ball containing `[lo, hi]`.
    pub fn from_bounds(lo: f64, hi: f64) -> Result<Ball> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
        }
        let c = 0.5 * lo + 0.5 * hi;
        let r = (hi - c).next_up().max((c - lo).next_up()).max(0.0);
        let b = Ball { center: c, radius: r };
        Ok(if lo == hi { Ball::exact(lo) } else { b })
    }

    /// Enclosure of `[0, x]` for `x >= 0`.
    pub fn zero_to(x: f64) -> Ball {
        let x = x.max(0.0);
        let c = 0.5 * x;
        Ball { center: c, radius: (x - c).next_up().max(c) }
    }

    #[inline]
    pub fn center(&self) -> f64 {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.center.is_finite() && self.radius.is_finite()
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.center == 0.0 && self.radius == 0.0
    }

    /// Lower endpoint, rounded down.
    pub fn lo(&self) -> f64 {
        if self.radius == 0.0 {
            return self.center;
        }
        let (s, e) = two_sum(self.center, -self.radius);
        if e >= 0.0 {
            s
        } else {
            s.next_down()
        }
    }

    /// Upper endpoint, rounded up.
    pub fn hi(&self) -> f64 {
        if self.radius == 0.0 {
            return self.center;
        }
        let (s, e) = two_sum(self.center, self.radius);
        if e <= 0.0 {
            s
        } else {
            s.next_up()
        }
    }

    /// Upper bound on `|x|` over the ball.
    #[inline]
    pub fn mag(&self) -> f64 {
        if self.radius == 0.0 {
            self.center.abs()
        } else {
            add_up(self.center.abs(), self.radius)
        }
    }

    /// Lower bound on `|x|` over the ball.
    pub fn mig(&self) -> f64 {
        if self.radius == 0.0 {
            return self.center.abs();
        }
        let lo = self.lo();
        let hi = self.hi();
        if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// Whether `other` lies inside `self`, judged on outward endpoints.
    pub fn contains_ball(&self, other: &Ball) -> bool {
        self.lo() <= other.lo() && other.hi() <= self.hi()
    }

    /// Smallest enclosing ball of both operands.
    pub fn hull(&self, other: &Ball) -> Ball {
        Ball::from_bounds(self.lo().min(other.lo()), self.hi().max(other.hi()))
            .unwrap_or(Ball::raw(f64::NAN, f64::INFINITY))
    }

    /// Widen the radius by `r >= 0`.
    #[inline]
    pub fn inflate(&self, r: f64) -> Ball {
        Ball { center: self.center, radius: add_up(self.radius, r) }
    }

    /// Ball with the same bounds on `|x|`-free form: `[-mag, mag]`.
    pub fn symmetric(&self) -> Ball {
        Ball { center: 0.0, radius: self.mag() }
    }

    #[inline]
    pub fn abs(&self) -> Ball {
        if self.center.abs() >= self.radius {
            Ball { center: self.center.abs(), radius: self.radius }
        } else {
            Ball::zero_to(self.mag())
        }
    }

    #[inline]
    pub fn scale(&self, x: f64) -> Ball {
        *self * Ball::exact(x)
    }

    pub fn sqr(&self) -> Ball {
        let a = self.abs();
        let c = a.center * a.center;
        let mut r = if a.radius == 0.0 {
            0.0
        } else {
            add_up(mul_up(2.0 * a.center, a.radius), mul_up(a.radius, a.radius))
        };
        if a.center != 0.0 && !product_is_exact(a.center, a.center, c) {
            r = add_up(r, rerr(c));
        }
        Ball { center: c, radius: r }
    }

    pub fn powi(&self, n: u32) -> Ball {
        let mut r = Ball::ONE;
        for _ in 0..n {
            r = r * *self;
        }
        r
    }

    pub fn recip(&self) -> Result<Ball> {
        let lo = self.lo();
        let hi = self.hi();
        if lo <= 0.0 && hi >= 0.0 {
            return Err(Error::Domain(format!("division by a ball containing zero: {self}")));
        }
        if self.radius == 0.0 {
            return Ball::ONE.div(self);
        }
        let (a, b) = (div_dn(1.0, hi), div_up(1.0, lo));
        Ball::from_bounds(a, b).map_err(|_| Error::Overflow("recip"))
    }

    pub fn div(&self, other: &Ball) -> Result<Ball> {
        if other.radius == 0.0 && self.radius == 0.0 {
            if other.center == 0.0 {
                return Err(Error::Domain("division by zero".into()));
            }
            let c = self.center / other.center;
            if self.center == 0.0 {
                return Ok(Ball::ZERO);
            }
            if c.is_finite() && product_is_exact(c, other.center, c * other.center) && c * other.center == self.center {
                return Ok(Ball::exact(c));
            }
            return Ball::new(c, rerr(c)).map_err(|_| Error::Overflow("div"));
        }
        let q = *self * other.recip()?;
        q.checked("div")
    }

    pub fn sqrt(&self) -> Result<Ball> {
        let lo = self.lo();
        if lo < 0.0 {
            return Err(Error::Domain(format!("sqrt of a ball with negative part: {self}")));
        }
        if self.radius == 0.0 {
            let c = self.center.sqrt();
            return Ok(if c == 0.0 || (c * c == self.center && product_is_exact(c, c, c * c)) { Ball::exact(c) } else { Ball::raw(c, rerr(c)) });
        }
        let a = sqrt_dn(lo).max(0.0);
        let b = sqrt_up(self.hi());
        Ball::from_bounds(a, b)
    }

    /// Checked arithmetic entry point.
    pub fn arith(op: ArithOp, a: Ball, b: Ball) -> Result<Ball> {
        let r = match op {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => return a.div(&b),
        };
        r.checked(match op {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            _ => "mul",
        })
    }

    pub fn checked(self, what: &'static str) -> Result<Ball> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::Overflow(what))
        }
    }

    /// Parse a finite decimal into a ball containing its exact value.
    pub fn enclose_decimal(s: &str) -> Result<Ball> {
        let t = s.trim();
        let (digits, exp10) = parse_decimal(t).ok_or_else(|| Error::Parse(format!("not a decimal: {s:?}")))?;
        let v: f64 = t.parse().map_err(|_| Error::Parse(format!("not a decimal: {s:?}")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("decimal out of range: {s:?}")));
        }
        if decimal_is_exact(digits, exp10, v.abs()) {
            return Ok(Ball::exact(v));
        }
        let gap = (v.next_up() - v).max(v - v.next_down());
        Ok(Ball { center: v, radius: gap })
    }
}

/// Split a decimal string into significand digits (when they fit in u64)
/// and a power-of-ten exponent. Digits that do not fit are reported as `None`.
fn parse_decimal(t: &str) -> Option<(Option<u64>, i64)> {
    let b = t.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let mut mant: Option<u64> = Some(0);
    let mut ndig = 0usize;
    let mut exp10: i64 = 0;
    let mut seen_dot = false;
    while i < b.len() {
        let ch = b[i];
        if ch.is_ascii_digit() {
            ndig += 1;
            let d = (ch - b'0') as u64;
            mant = mant.and_then(|m| m.checked_mul(10)).and_then(|m| m.checked_add(d));
            if seen_dot {
                exp10 -= 1;
            }
        } else if ch == b'.' && !seen_dot {
            seen_dot = true;
        } else {
            break;
        }
        i += 1;
    }
    if ndig == 0 {
        return None;
    }
    if i < b.len() {
        if b[i] != b'e' && b[i] != b'E' {
            return None;
        }
        i += 1;
        let rest = &t[i..];
        if rest.is_empty() {
            return None;
        }
        let e: i64 = rest.parse().ok()?;
        exp10 = exp10.checked_add(e)?;
    }
    Some((mant, exp10))
}

/// Whether `digits * 10^exp10 == v` exactly (`v >= 0`); `false` when undecidable cheaply.
fn decimal_is_exact(digits: Option<u64>, exp10: i64, v: f64) -> bool {
    let Some(m_dec) = digits else { return false };
    if v == 0.0 {
        return m_dec == 0;
    }
    if m_dec == 0 {
        return false;
    }
    let bits = v.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp_bits == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_bits - 1075) };
    while m & 1 == 0 {
        m >>= 1;
        e += 1;
    }
    // v = m * 2^e with m odd.
    if exp10 >= 0 {
        if e < 0 {
            return false;
        }
        let lhs = (0..exp10).try_fold(m_dec as u128, |acc, _| acc.checked_mul(10));
        let rhs = if e >= 128 { None } else { (m as u128).checked_mul(1u128.checked_shl(e as u32).unwrap_or(0)) };
        matches!((lhs, rhs), (Some(a), Some(b)) if b != 0 && a == b)
    } else {
        let k = -exp10;
        if e + k < 0 {
            return false;
        }
        let mut acc = Some(m as u128);
        for _ in 0..k {
            acc = acc.and_then(|a| a.checked_mul(5));
        }
        let sh = e + k;
        if sh >= 128 {
            return false;
        }
        let rhs = acc.and_then(|a| a.checked_mul(1u128 << sh));
        rhs == Some(m_dec as u128)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e} ± {:e})", self.center, self.radius)
    }
}

impl Add for Ball {
    type Output = Ball;
    #[inline]
    fn add(self, o: Ball) -> Ball {
        let c = self.center + o.center;
        let mut r = if self.radius == 0.0 && o.radius == 0.0 { 0.0 } else { add_up(self.radius, o.radius) };
        let (_, e) = two_sum(self.center, o.center);
        if e != 0.0 {
            r = add_up(r, rerr(c));
        }
        Ball { center: c, radius: r }
    }
}

impl Sub for Ball {
    type Output = Ball;
    #[inline]
    fn sub(self, o: Ball) -> Ball {
        self + (-o)
    }
}

impl Neg for Ball {
    type Output = Ball;
    #[inline]
    fn neg(self) -> Ball {
        Ball { center: -self.center, radius: self.radius }
    }
}

impl Mul for Ball {
    type Output = Ball;
    #[inline]
    fn mul(self, o: Ball) -> Ball {
        let c = self.center * o.center;
        let mut r = 0.0;
        if self.radius != 0.0 || o.radius != 0.0 {
            r = add_up(
                add_up(mul_up(self.center.abs(), o.radius), mul_up(self.radius, o.center.abs())),
                mul_up(self.radius, o.radius),
            );
        }
        if self.center != 0.0 && o.center != 0.0 && !product_is_exact(self.center, o.center, c) {
            r = add_up(r, rerr(c));
        }
        Ball { center: c, radius: r }
    }
}

impl Mul<f64> for Ball {
    type Output = Ball;
    #[inline]
    fn mul(self, x: f64) -> Ball {
        self * Ball::exact(x)
    }
}

impl Add<f64> for Ball {
    type Output = Ball;
    #[inline]
    fn add(self, x: f64) -> Ball {
        self + Ball::exact(x)
    }
}

impl AddAssign for Ball {
    #[inline]
    fn add_assign(&mut self, o: Ball) {
        *self = *self + o;
    }
}

impl SubAssign for Ball {
    #[inline]
    fn sub_assign(&mut self, o: Ball) {
        *self = *self - o;
    }
}

impl From<f64> for Ball {
    fn from(x: f64) -> Ball {
        Ball::exact(x)
    }
}

impl std::iter::Sum for Ball {
    fn sum<I: Iterator<Item = Ball>>(iter: I) -> Ball {
        iter.fold(Ball::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_exact_integers() {
        let s = Ball::arith(ArithOp::Add, Ball::exact(1.0), Ball::exact(2.0)).unwrap();
        assert!(s.contains(3.0));
        assert_eq!(s.radius(), 0.0);
    }

    #[test]
    fn mul_interval_product() {
        let a = Ball::new(1.0, 0.1).unwrap();
        let p = a * a;
        assert!(p.lo() <= 0.81 && p.hi() >= 1.21);
    }

    #[test]
    fn div_by_zero_ball() {
        let a = Ball::exact(1.0);
        assert!(matches!(a.div(&Ball::new(0.5, 1.0).unwrap()), Err(Error::Domain(_))));
        assert!(matches!(Ball::arith(ArithOp::Div, a, Ball::ZERO), Err(Error::Domain(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let big = Ball::exact(f64::MAX);
        assert!(matches!(Ball::arith(ArithOp::Mul, big, big), Err(Error::Overflow(_))));
    }

    #[test]
    fn sqrt_cases() {
        assert!(Ball::exact(4.0).sqrt().unwrap().contains(2.0));
        let r2 = Ball::exact(2.0).sqrt().unwrap();
        assert!(r2.contains(std::f64::consts::SQRT_2) && r2.radius() > 0.0);
        assert!(r2.lo() * r2.lo() <= 2.0 && r2.hi() * r2.hi() >= 2.0);
        assert!(matches!(Ball::new(0.0, 1.0).unwrap().sqrt(), Err(Error::Domain(_))));
        assert_eq!(Ball::ZERO.sqrt().unwrap(), Ball::ZERO);
    }

    #[test]
    fn decimals() {
        assert_eq!(Ball::enclose_decimal("0.5").unwrap(), Ball::exact(0.5));
        let t = Ball::enclose_decimal("0.1").unwrap();
        assert!(t.radius() > 0.0 && t.contains(0.1));
        let g = Ball::enclose_decimal("83.1733117").unwrap();
        assert!(g.radius() > 0.0 && g.contains(83.1733117));
        assert_eq!(Ball::enclose_decimal("-12.25e2").unwrap(), Ball::exact(-1225.0));
        assert_eq!(Ball::enclose_decimal("3").unwrap(), Ball::exact(3.0));
        assert!(Ball::enclose_decimal("1e400").is_err());
        for bad in ["", "abc", "1.2.3", "--1", "1e", "0x10"] {
            assert!(matches!(Ball::enclose_decimal(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn endpoints_are_outward() {
        let b = Ball::raw(0.1, 0.2);
        assert!(b.lo() <= -0.1 && b.hi() >= 0.30000000000000004);
        assert_eq!(Ball::exact(0.0).lo(), 0.0);
    }
}
