//! Bounded scalar fields over a space, with exact rational evaluation and
//! closed-form integrals over interval windows.

use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{CoreError, Result};
use crate::space::ratio_to_f64;

use super::{DyadicIntervalSpace, IntervalWindow, Point};

/// The function itself.
#[derive(Clone, Debug)]
pub enum FieldKind {
    /// `1` at points with positive coordinate, `0` elsewhere.
    PositiveIndicator,
    Constant(BigRational),
    /// Indicator of `∪_{n=1..D} (θ_{2n}, θ_{2n-1}]` on `[0,1]`.
    DyadicBands { depth: u32, thetas: Vec<BigRational> },
    /// Values per atom of a finite space, indexed like its atom list.
    Table(Vec<BigRational>),
}

/// A bounded measurable function together with its bound and the reference
/// value it is compared against at the anchor — the function's own value
/// there by default, or any candidate value under study.
#[derive(Clone, Debug)]
pub struct ScalarField {
    kind: FieldKind,
    bound: f64,
    anchor_value: BigRational,
}

impl ScalarField {
    pub fn positive_indicator() -> ScalarField {
        ScalarField {
            kind: FieldKind::PositiveIndicator,
            bound: 1.0,
            anchor_value: BigRational::zero(),
        }
    }

    pub fn constant(value: BigRational) -> ScalarField {
        let bound = ratio_to_f64(&value).abs();
        ScalarField { kind: FieldKind::Constant(value.clone()), bound, anchor_value: value }
    }

    /// The canonical field of a [`DyadicIntervalSpace`], anchored at 0
    /// (where it vanishes: every band sits strictly right of 0).
    pub fn dyadic_bands(space: &DyadicIntervalSpace) -> ScalarField {
        ScalarField {
            kind: FieldKind::DyadicBands {
                depth: space.depth(),
                thetas: space.thetas().to_vec(),
            },
            bound: 1.0,
            anchor_value: BigRational::zero(),
        }
    }

    /// Per-atom values for a finite space; `anchor_value` is the reference
    /// value at the query anchor.
    pub fn table(values: Vec<BigRational>, anchor_value: BigRational) -> ScalarField {
        let bound = values
            .iter()
            .map(|v| ratio_to_f64(&v.abs()))
            .fold(0.0f64, f64::max)
            .max(ratio_to_f64(&anchor_value.abs()));
        ScalarField { kind: FieldKind::Table(values), bound, anchor_value }
    }

    /// Replaces the reference value at the anchor (e.g. by a candidate limit
    /// value rather than the function's own value there).
    pub fn with_anchor_value(mut self, value: BigRational) -> ScalarField {
        self.bound = self.bound.max(ratio_to_f64(&value.abs()));
        self.anchor_value = value;
        self
    }

    /// Recomputes the reference value as the field's own value at `anchor`.
    pub fn with_anchor_at(mut self, anchor: &Point) -> Result<ScalarField> {
        self.anchor_value = self.evaluate_exact(anchor)?;
        Ok(self)
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// A bound with `|value| <= bound` everywhere.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn anchor_value(&self) -> &BigRational {
        &self.anchor_value
    }

    pub fn anchor_value_f64(&self) -> f64 {
        ratio_to_f64(&self.anchor_value)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            FieldKind::PositiveIndicator => "positive-indicator".into(),
            FieldKind::Constant(c) => format!("constant({c})"),
            FieldKind::DyadicBands { depth, .. } => format!("dyadic-bands(D={depth})"),
            FieldKind::Table(v) => format!("table({} values)", v.len()),
        }
    }

    /// Exact value at a point. Errors when the field and the point do not
    /// belong to the same kind of space (e.g. a per-atom table asked at a
    /// continuum point).
    pub fn evaluate_exact(&self, p: &Point) -> Result<BigRational> {
        match &self.kind {
            FieldKind::Constant(c) => Ok(c.clone()),
            FieldKind::Table(values) => match p {
                Point::Labeled(i) => values.get(*i).cloned().ok_or_else(|| {
                    CoreError::InvalidParam(format!("field table has no entry for atom #{i}"))
                }),
                _ => Err(CoreError::InvalidParam(
                    "per-atom field table evaluated at a non-atom point".into(),
                )),
            },
            FieldKind::PositiveIndicator => {
                let c = p.coord_exact().ok_or_else(|| {
                    CoreError::InvalidParam("positive-indicator needs a coordinate".into())
                })?;
                Ok(if c.is_positive() { BigRational::one() } else { BigRational::zero() })
            }
            FieldKind::DyadicBands { depth, thetas } => {
                let c = p.coord_exact().ok_or_else(|| {
                    CoreError::InvalidParam("band indicator needs a coordinate".into())
                })?;
                for n in 1..=*depth {
                    let hi = &thetas[(2 * n - 2) as usize]; // θ_{2n-1}
                    let lo = &thetas[(2 * n - 1) as usize]; // θ_{2n}
                    if &c > lo && &c <= hi {
                        return Ok(BigRational::one());
                    }
                }
                Ok(BigRational::zero())
            }
        }
    }

    pub fn evaluate(&self, p: &Point) -> f64 {
        let v = self
            .evaluate_exact(p)
            .unwrap_or_else(|e| panic!("field/space mismatch: {e}"));
        let out = ratio_to_f64(&v);
        debug_assert!(out.abs() <= self.bound * (1.0 + 1e-12) + 1e-300);
        out
    }

    /// Exact absolute deviation from the anchor value at a point:
    /// `|value(p) - anchor_value|`.
    pub fn abs_dev_exact(&self, p: &Point) -> Result<BigRational> {
        Ok((self.evaluate_exact(p)? - &self.anchor_value).abs())
    }

    /// Exact signed `∫ value(t) dt` over `[a-r, a+r] ∩ [lo, hi]` against
    /// unit-density Lebesgue measure (the caller applies the window's
    /// density). `None` for per-atom tables.
    pub fn interval_integral(
        &self,
        window: &IntervalWindow,
        anchor: &BigRational,
        radius: &BigRational,
    ) -> Option<BigRational> {
        let lo = (anchor - radius).max(window.lo.clone());
        let hi = (anchor + radius).min(window.hi.clone());
        if hi <= lo {
            return Some(BigRational::zero());
        }
        let len = &hi - &lo;
        match &self.kind {
            FieldKind::Table(_) => None,
            FieldKind::Constant(v) => Some(v * len),
            FieldKind::PositiveIndicator => Some(if lo >= BigRational::zero() {
                len
            } else if hi <= BigRational::zero() {
                BigRational::zero()
            } else {
                hi
            }),
            FieldKind::DyadicBands { depth, thetas } => {
                let mut band_len = BigRational::zero();
                for n in 1..=*depth {
                    let b_hi = &thetas[(2 * n - 2) as usize];
                    let b_lo = &thetas[(2 * n - 1) as usize];
                    let seg_lo = b_lo.max(&lo);
                    let seg_hi = b_hi.min(&hi);
                    if seg_hi > seg_lo {
                        band_len += seg_hi - seg_lo;
                    }
                }
                Some(band_len)
            }
        }
    }

    /// Exact `∫ |value(t) - anchor_value| dt` over `[a-r, a+r] ∩ [lo, hi]`
    /// against unit-density Lebesgue measure (the caller applies the
    /// window's density). `None` for per-atom tables.
    pub fn abs_dev_interval_integral(
        &self,
        window: &IntervalWindow,
        anchor: &BigRational,
        radius: &BigRational,
    ) -> Option<BigRational> {
        let lo = (anchor - radius).max(window.lo.clone());
        let hi = (anchor + radius).min(window.hi.clone());
        if hi <= lo {
            return Some(BigRational::zero());
        }
        let len = &hi - &lo;
        let c = &self.anchor_value;
        match &self.kind {
            FieldKind::Table(_) => None,
            FieldKind::Constant(v) => Some((v - c).abs() * len),
            FieldKind::PositiveIndicator => {
                // Value 1 on (0, ∞), 0 on (-∞, 0].
                let pos_len = if lo >= BigRational::zero() {
                    len.clone()
                } else if hi <= BigRational::zero() {
                    BigRational::zero()
                } else {
                    hi.clone()
                };
                let zero_len = &len - &pos_len;
                Some((BigRational::one() - c).abs() * pos_len + c.abs() * zero_len)
            }
            FieldKind::DyadicBands { depth, thetas } => {
                // Length of the band union inside [lo, hi].
                let mut band_len = BigRational::zero();
                for n in 1..=*depth {
                    let b_hi = &thetas[(2 * n - 2) as usize];
                    let b_lo = &thetas[(2 * n - 1) as usize];
                    let seg_lo = b_lo.max(&lo);
                    let seg_hi = b_hi.min(&hi);
                    if seg_hi > seg_lo {
                        band_len += seg_hi - seg_lo;
                    }
                }
                let off_len = &len - &band_len;
                Some((BigRational::one() - c).abs() * band_len + c.abs() * off_len)
            }
        }
    }
}
