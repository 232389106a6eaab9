//! Non-negative floating-point numbers with a double mantissa and a 64-bit
//! exponent, for probability masses far below the reach of `f64` subnormals.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num::bigint::BigInt;
use num::rational::{BigRational, Ratio};
use num::{Signed, ToPrimitive, Zero};

/// Value `mantissa * 2^exponent` with `mantissa` in `[1, 2)`, or exact zero.
///
/// Covers the whole non-negative range reachable with an `i64` exponent, so
/// quantities like `2^(-2^60)` survive multiplication and powering without
/// flushing to zero. Precision is that of the `f64` mantissa (about 16
/// decimal digits), which all downstream tolerances account for.
#[derive(Copy, Clone, Debug)]
pub struct WideFloat {
    mantissa: f64,
    exponent: i64,
}

/// Mantissa held as an unevaluated sum `hi + lo` (`hi` in `[1, 2)`), with a
/// separate binary exponent. Internal to [`WideFloat::powi`].
#[derive(Copy, Clone)]
struct DdMantissa {
    hi: f64,
    lo: f64,
    exp: i64,
}

impl DdMantissa {
    fn mul(&self, other: &DdMantissa) -> DdMantissa {
        // Exact product of the high parts via fused multiply-add.
        let p = self.hi * other.hi;
        let mut err = self.hi.mul_add(other.hi, -p);
        err += self.hi * other.lo + self.lo * other.hi;
        // Renormalize so that hi + lo == p + err with hi = fl(p + err).
        let mut hi = p + err;
        let mut lo = err - (hi - p);
        let mut exp = self.exp + other.exp;
        if hi >= 2.0 {
            hi *= 0.5;
            lo *= 0.5;
            exp += 1;
        }
        DdMantissa { hi, lo, exp }
    }
}

/// Splits a positive finite `f64` into `(m, e)` with `m` in `[1, 2)`.
fn frexp2(x: f64) -> (f64, i64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    if raw_exp == 0 {
        // Subnormal: renormalize through a 2^64 scale.
        let (m, e) = frexp2(x * (2f64).powi(64));
        (m, e - 64)
    } else {
        let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
        (m, raw_exp - 1023)
    }
}

impl WideFloat {
    pub const ZERO: WideFloat = WideFloat { mantissa: 0.0, exponent: 0 };
    pub const ONE: WideFloat = WideFloat { mantissa: 1.0, exponent: 0 };

    pub fn from_f64(x: f64) -> WideFloat {
        assert!(x >= 0.0 && x.is_finite(), "WideFloat::from_f64({x})");
        if x == 0.0 {
            return WideFloat::ZERO;
        }
        let (mantissa, exponent) = frexp2(x);
        WideFloat { mantissa, exponent }
    }

    /// Exact power of two, `2^e`.
    pub fn pow2(e: i64) -> WideFloat {
        WideFloat { mantissa: 1.0, exponent: e }
    }

    pub fn from_u64(n: u64) -> WideFloat {
        WideFloat::from_f64(n as f64)
    }

    /// Rounds an exact rational to the nearest representable value. Handles
    /// denominators far beyond `f64` range (e.g. `1 / 2^1024`).
    pub fn from_big_ratio(r: &BigRational) -> WideFloat {
        assert!(!r.is_negative(), "WideFloat::from_big_ratio on negative value");
        if r.is_zero() {
            return WideFloat::ZERO;
        }
        let num = r.numer();
        let den = r.denom();
        let diff = num.bits() as i64 - den.bits() as i64;
        // Scale the numerator so the integer quotient keeps ~80 significant bits.
        let shift = 80 - diff;
        let scaled: BigInt = if shift >= 0 { num << shift as usize } else { num >> (-shift) as usize };
        let q: BigInt = scaled / den;
        let qf = q.to_f64().expect("80-bit quotient fits in f64 range");
        WideFloat::from_f64(qf) * WideFloat::pow2(-shift)
    }

    pub fn from_ratio(r: &Ratio<i64>) -> WideFloat {
        assert!(*r.numer() >= 0);
        if r.numer() == &0 {
            return WideFloat::ZERO;
        }
        WideFloat::from_f64(*r.numer() as f64) / WideFloat::from_f64(*r.denom() as f64)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Nearest `f64`, saturating to `0.0` below and `f64::INFINITY` above the
    /// representable range. Exact round trip whenever the exponent fits.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.exponent > 1023 {
            return f64::INFINITY;
        }
        if self.exponent < -1080 {
            return 0.0;
        }
        if self.exponent >= -1022 {
            return self.mantissa * (2f64).powi(self.exponent as i32);
        }
        // Subnormal result: reach it in two exact normal-range scalings so
        // no intermediate overflows or flushes to zero.
        (self.mantissa * (2f64).powi(-537)) * (2f64).powi((self.exponent + 537) as i32)
    }

    pub fn log2(&self) -> f64 {
        assert!(!self.is_zero(), "log2 of zero");
        self.exponent as f64 + self.mantissa.log2()
    }

    fn normalized(mantissa: f64, exponent: i64) -> WideFloat {
        if mantissa == 0.0 {
            return WideFloat::ZERO;
        }
        let (m, e) = frexp2(mantissa);
        WideFloat { mantissa: m, exponent: exponent.checked_add(e).expect("WideFloat exponent overflow") }
    }

    /// `self - other` if non-negative, else `None`.
    pub fn checked_sub(&self, other: &WideFloat) -> Option<WideFloat> {
        match self.cmp(other) {
            Ordering::Less => None,
            Ordering::Equal => Some(WideFloat::ZERO),
            Ordering::Greater => {
                if other.is_zero() {
                    return Some(*self);
                }
                let de = self.exponent - other.exponent;
                if de > 120 {
                    return Some(*self);
                }
                let m = self.mantissa - other.mantissa * (2f64).powi(-(de as i32));
                Some(WideFloat::normalized(m, self.exponent))
            }
        }
    }

    /// Integer power by binary exponentiation. Plain squaring would amplify
    /// one rounding into a relative error of order `n * 2^-53`, so the
    /// mantissa is carried as an unevaluated double-double (~106 bits)
    /// throughout; the final rounding leaves a relative error of order
    /// `n * 2^-106`, negligible for any `n` an exponent can hold.
    pub fn powi(&self, n: u64) -> WideFloat {
        if n == 0 {
            return WideFloat::ONE;
        }
        if self.is_zero() {
            return WideFloat::ZERO;
        }
        let mut base = DdMantissa { hi: self.mantissa, lo: 0.0, exp: self.exponent };
        let mut acc: Option<DdMantissa> = None;
        let mut n = n;
        while n > 1 {
            if n & 1 == 1 {
                acc = Some(match acc {
                    None => base,
                    Some(a) => a.mul(&base),
                });
            }
            base = base.mul(&base);
            n >>= 1;
        }
        let total = match acc {
            None => base,
            Some(a) => a.mul(&base),
        };
        WideFloat::normalized(total.hi + total.lo, total.exp)
    }

    pub fn sqrt(&self) -> WideFloat {
        if self.is_zero() {
            return WideFloat::ZERO;
        }
        let (mut m, mut e) = (self.mantissa, self.exponent);
        if e.rem_euclid(2) != 0 {
            m *= 2.0;
            e -= 1;
        }
        WideFloat::normalized(m.sqrt(), 0) * WideFloat::pow2(e / 2)
    }

    /// Fractional power via `exp2(a * log2 self)`. Absolute error in the
    /// base-2 logarithm is about `|log2 self| * 2^-53`, so keep to exponents
    /// below ~2^20 when 1e-12 relative accuracy matters. `sqrt` is exact to
    /// one rounding and preferred for `a = 1/2`.
    pub fn powf(&self, a: f64) -> WideFloat {
        assert!(a.is_finite());
        if self.is_zero() {
            assert!(a > 0.0, "0^a for a <= 0");
            return WideFloat::ZERO;
        }
        if a == 0.5 {
            return self.sqrt();
        }
        let y = a * self.log2();
        let k = y.floor();
        let f = y - k;
        WideFloat::from_f64(f.exp2()) * WideFloat::pow2(k as i64)
    }
}

impl Add for WideFloat {
    type Output = WideFloat;
    fn add(self, other: WideFloat) -> WideFloat {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exponent >= other.exponent { (self, other) } else { (other, self) };
        let de = hi.exponent - lo.exponent;
        if de > 120 {
            return hi;
        }
        let m = hi.mantissa + lo.mantissa * (2f64).powi(-(de as i32));
        WideFloat::normalized(m, hi.exponent)
    }
}

impl Sub for WideFloat {
    type Output = WideFloat;
    fn sub(self, other: WideFloat) -> WideFloat {
        self.checked_sub(&other)
            .unwrap_or_else(|| panic!("WideFloat subtraction went negative: {self} - {other}"))
    }
}

impl Mul for WideFloat {
    type Output = WideFloat;
    fn mul(self, other: WideFloat) -> WideFloat {
        if self.is_zero() || other.is_zero() {
            return WideFloat::ZERO;
        }
        let e = self.exponent.checked_add(other.exponent).expect("WideFloat exponent overflow");
        WideFloat::normalized(self.mantissa * other.mantissa, e)
    }
}

impl Div for WideFloat {
    type Output = WideFloat;
    fn div(self, other: WideFloat) -> WideFloat {
        assert!(!other.is_zero(), "WideFloat division by zero");
        if self.is_zero() {
            return WideFloat::ZERO;
        }
        let e = self.exponent.checked_sub(other.exponent).expect("WideFloat exponent overflow");
        WideFloat::normalized(self.mantissa / other.mantissa, e)
    }
}

impl Add for &WideFloat {
    type Output = WideFloat;
    fn add(self, other: &WideFloat) -> WideFloat {
        *self + *other
    }
}

impl Sub for &WideFloat {
    type Output = WideFloat;
    fn sub(self, other: &WideFloat) -> WideFloat {
        *self - *other
    }
}

impl Mul for &WideFloat {
    type Output = WideFloat;
    fn mul(self, other: &WideFloat) -> WideFloat {
        *self * *other
    }
}

impl Div for &WideFloat {
    type Output = WideFloat;
    fn div(self, other: &WideFloat) -> WideFloat {
        *self / *other
    }
}

impl PartialEq for WideFloat {
    fn eq(&self, other: &WideFloat) -> bool {
        self.mantissa == other.mantissa && (self.exponent == other.exponent || self.is_zero())
    }
}

impl Eq for WideFloat {}

impl PartialOrd for WideFloat {
    fn partial_cmp(&self, other: &WideFloat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WideFloat {
    fn cmp(&self, other: &WideFloat) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => (self.exponent, self.mantissa)
                .partial_cmp(&(other.exponent, other.mantissa))
                .expect("mantissa is never NaN"),
        }
    }
}

impl fmt::Display for WideFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let v = self.to_f64();
        if v.is_finite() && v > 0.0 {
            return write!(f, "{v}");
        }
        // Out of f64 range: render in decimal scientific notation by hand.
        let log10 = self.log2() * std::f64::consts::LOG10_2;
        let d = log10.floor();
        let mant10 = (log10 - d).exp10();
        write!(f, "{mant10:.12}e{d}")
    }
}

trait Exp10 {
    fn exp10(self) -> f64;
}

impl Exp10 for f64 {
    fn exp10(self) -> f64 {
        (self * std::f64::consts::LN_10).exp()
    }
}

/// `-ln(1 - u)` for `u` in `[0, 1)`, keeping full relative precision for
/// arbitrarily small `u`.
pub fn neg_ln_one_minus(u: WideFloat) -> WideFloat {
    assert!(u < WideFloat::ONE, "neg_ln_one_minus needs u < 1");
    if u.is_zero() {
        return WideFloat::ZERO;
    }
    if u >= WideFloat::pow2(-40) {
        WideFloat::from_f64(-(-u.to_f64()).ln_1p())
    } else {
        // -ln(1-u) = u + u^2/2 + u^3/3 + ...; three terms reach 2^-120 relative.
        let half = WideFloat::from_f64(0.5);
        let third = WideFloat::ONE / WideFloat::from_f64(3.0);
        u * (WideFloat::ONE + u * (half + u * third))
    }
}

/// `1 - exp(-t)` for `t >= 0` with full relative precision near zero.
pub fn one_minus_exp_neg(t: WideFloat) -> WideFloat {
    if t.is_zero() {
        return WideFloat::ZERO;
    }
    if t < WideFloat::pow2(-40) {
        // t - t^2/2 + t^3/6
        let half = WideFloat::from_f64(0.5);
        let sixth = WideFloat::ONE / WideFloat::from_f64(6.0);
        return t * ((WideFloat::ONE + t * t * sixth) - t * half);
    }
    let tf = t.to_f64();
    if tf.is_finite() {
        WideFloat::from_f64(-(-tf).exp_m1())
    } else {
        WideFloat::ONE
    }
}

/// `exp(-t)` for `t >= 0`. Beyond the `f64` exponent range the result is
/// assembled as `2^(-t log2 e)`; relative error grows like `t * 2^-53`.
pub fn exp_neg(t: WideFloat) -> WideFloat {
    if t.is_zero() {
        return WideFloat::ONE;
    }
    let tf = t.to_f64();
    if tf <= 700.0 {
        return WideFloat::from_f64((-tf).exp());
    }
    let y = tf * std::f64::consts::LOG2_E;
    let k = y.floor();
    let f = tf.mul_add(std::f64::consts::LOG2_E, -k).clamp(0.0, 1.0);
    WideFloat::from_f64((-f).exp2()) * WideFloat::pow2(-(k as i64))
}

/// `ge^m - gt^m` where `ge = gt + s`, without catastrophic cancellation.
///
/// For the sphere law this is the probability that `m` independent draws all
/// land at distance `>= r` but not all at distance `> r`. Small `m` uses the
/// positive-term binomial expansion; large `m` factors the difference as
/// `ge^m * (1 - (1 - s/ge)^m)` in the log domain.
pub fn pow_diff(ge: WideFloat, gt: WideFloat, s: WideFloat, m: u64) -> WideFloat {
    debug_assert_eq!(gt + s, ge, "pow_diff operands must satisfy ge = gt + s");
    if m == 0 || s.is_zero() {
        return WideFloat::ZERO;
    }
    if gt.is_zero() {
        return ge.powi(m);
    }
    if m == 1 {
        return s;
    }
    if m <= 64 {
        return binomial_diff(gt, s, m);
    }
    let u = s / ge;
    if u >= WideFloat::ONE {
        return ge.powi(m);
    }
    // gt so far below ge that gt^m cannot perturb a single mantissa bit.
    if gt.log2() * (m as f64) < ge.log2() * (m as f64) - 80.0 {
        return ge.powi(m);
    }
    ge.powi(m) * one_minus_exp_neg(neg_ln_one_minus(u) * WideFloat::from_u64(m))
}

/// `(gt + s)^m - gt^m` as the positive-term binomial sum
/// `sum_k C(m,k) s^k gt^(m-k)`, exact in sign for any operands.
fn binomial_diff(gt: WideFloat, s: WideFloat, m: u64) -> WideFloat {
    let mut sum = WideFloat::ZERO;
    let mut coef = WideFloat::ONE;
    for k in 1..=m {
        coef = coef * WideFloat::from_u64(m - k + 1) / WideFloat::from_u64(k);
        sum = sum + coef * s.powi(k) * gt.powi(m - k);
    }
    sum
}

/// `base^m` where `complement = 1 - base`, both supplied at full relative
/// precision. Bases at or above one half are powered through
/// `exp(-m * (-ln(1 - complement)))`, so a base like `1 - 2^-60` keeps its
/// distance from one even though a 53-bit mantissa would round it away.
pub fn pow_via_complement(base: WideFloat, complement: WideFloat, m: u64) -> WideFloat {
    if m == 0 {
        return WideFloat::ONE;
    }
    if base.is_zero() {
        return WideFloat::ZERO;
    }
    if complement.is_zero() {
        return base.powi(m);
    }
    let half = WideFloat::from_f64(0.5);
    if complement < half {
        exp_neg(neg_ln_one_minus(complement) * WideFloat::from_u64(m))
    } else {
        base.powi(m)
    }
}

/// `hi^m - lo^m` where `hi = lo + gap` and `hi_comp = 1 - hi`, both sides
/// supplied at full relative precision. Same shape as [`pow_diff`], but the
/// dominant power `hi^m` goes through [`pow_via_complement`], so a base like
/// `1 - 2^-60` is not flattened to `1` by its 53-bit mantissa before the
/// exponent multiplies the loss by `m`.
pub fn power_difference(
    hi: WideFloat,
    hi_comp: WideFloat,
    lo: WideFloat,
    gap: WideFloat,
    m: u64,
) -> WideFloat {
    if m == 0 || gap.is_zero() {
        return WideFloat::ZERO;
    }
    if m == 1 {
        return gap;
    }
    if lo.is_zero() {
        return pow_via_complement(hi, hi_comp, m);
    }
    if m <= 64 {
        return binomial_diff(lo, gap, m);
    }
    let u = gap / hi;
    if u >= WideFloat::ONE {
        return pow_via_complement(hi, hi_comp, m);
    }
    if lo.log2() * (m as f64) < hi.log2() * (m as f64) - 80.0 {
        return pow_via_complement(hi, hi_comp, m);
    }
    pow_via_complement(hi, hi_comp, m)
        * one_minus_exp_neg(neg_ln_one_minus(u) * WideFloat::from_u64(m))
}
