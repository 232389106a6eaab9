//! Metric measure spaces with exactly representable structure.
//!
//! Every built-in space either enumerates its atoms with exact rational
//! coordinates and weights (the *atomic* spaces) or is an interval of the
//! real line carrying Lebesgue measure (the *continuum* spaces). Ball and
//! sphere masses are reported as [`WideFloat`] so that super-exponentially
//! small atoms never underflow, and radii are exact rationals wherever the
//! space itself is exact.

mod dyadic;
mod field;
mod finite;
mod harmonic;
mod restricted;

pub use dyadic::{DyadicIntervalSpace, UnitIntervalSpace};
pub use field::{FieldKind, ScalarField};
pub use finite::{FiniteAtomicSpace, FiniteMetric};
pub use harmonic::SignedHarmonicSpace;
pub use restricted::{normalize_to_ball, RestrictedSpace};

use std::cmp::Ordering;
use std::fmt;

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::wide::WideFloat;

/// A point of a space.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    /// Exact coordinate on the real line.
    Atom(BigRational),
    /// Abstract atom of a [`FiniteAtomicSpace`], identified by its position
    /// in the original atom list (stable under restriction).
    Labeled(usize),
    /// Sampled point of a continuum space.
    Real(f64),
}

impl Point {
    pub fn atom_i64(n: i64, d: i64) -> Point {
        Point::Atom(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Point {
        Point::Atom(BigRational::zero())
    }

    /// Coordinate as `f64` for reporting; `None` for abstract atoms.
    pub fn coord_f64(&self) -> Option<f64> {
        match self {
            Point::Atom(q) => Some(ratio_to_f64(q)),
            Point::Real(v) => Some(*v),
            Point::Labeled(_) => None,
        }
    }

    /// Exact coordinate if the point carries one. Finite doubles are exact
    /// binary rationals, so `Real` converts losslessly.
    pub fn coord_exact(&self) -> Option<BigRational> {
        match self {
            Point::Atom(q) => Some(q.clone()),
            Point::Real(v) => BigRational::from_float(*v),
            Point::Labeled(_) => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Atom(q) => write!(f, "{q}"),
            Point::Labeled(i) => write!(f, "#{i}"),
            Point::Real(v) => write!(f, "{v}"),
        }
    }
}

/// A distance value: exact rational where the space is exact, double
/// otherwise. Exact–exact comparisons are exact; mixed comparisons go
/// through [`WideFloat`], which keeps tiny exact radii ordered correctly
/// far below the double subnormal range.
#[derive(Clone, Debug)]
pub enum Dist {
    Exact(BigRational),
    Approx(f64),
}

impl Dist {
    pub fn zero() -> Dist {
        Dist::Exact(BigRational::zero())
    }

    pub fn from_i64(n: i64, d: i64) -> Dist {
        Dist::Exact(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Dist::Exact(q) => ratio_to_f64(q),
            Dist::Approx(v) => *v,
        }
    }

    pub fn to_wide(&self) -> WideFloat {
        match self {
            Dist::Exact(q) => WideFloat::from_big_ratio(q),
            Dist::Approx(v) => WideFloat::from_f64(*v),
        }
    }

    /// Exact rational value; finite doubles convert losslessly.
    pub fn to_exact(&self) -> BigRational {
        match self {
            Dist::Exact(q) => q.clone(),
            Dist::Approx(v) => BigRational::from_float(*v).expect("finite distance"),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Dist::Exact(q) => q.is_zero(),
            Dist::Approx(v) => *v == 0.0,
        }
    }
}

impl PartialEq for Dist {
    fn eq(&self, other: &Dist) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Dist) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Dist) -> Ordering {
        match (self, other) {
            (Dist::Exact(a), Dist::Exact(b)) => a.cmp(b),
            _ => self.to_wide().cmp(&other.to_wide()),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Exact(q) => write!(f, "{q}"),
            Dist::Approx(v) => write!(f, "{v}"),
        }
    }
}

/// Converts a rational to the nearest double, correct even when numerator or
/// denominator alone would overflow `f64` (e.g. `1 / 2^1024` becomes a
/// subnormal instead of `0/inf`).
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        0.0
    } else if r.is_negative() {
        -WideFloat::from_big_ratio(&-r.clone()).to_f64()
    } else {
        WideFloat::from_big_ratio(r).to_f64()
    }
}

/// Absolute-difference metric on the line, exact whenever both coordinates
/// are exact.
pub fn line_distance(a: &Point, b: &Point) -> Dist {
    match (a.coord_exact(), b.coord_exact()) {
        (Some(x), Some(y)) => Dist::Exact((x - y).abs()),
        _ => {
            let x = a.coord_f64().expect("line space points carry coordinates");
            let y = b.coord_f64().expect("line space points carry coordinates");
            Dist::Approx((x - y).abs())
        }
    }
}

/// One atom of an atomic space.
#[derive(Clone, Debug)]
pub struct SpaceAtom {
    /// Human-readable name, e.g. `+1/2`; targets for atom-preferring rules.
    pub label: String,
    pub point: Point,
    pub weight: WideFloat,
    /// Exact weight when the space's normalization is rational.
    pub exact_weight: Option<BigRational>,
}

/// Continuum description: an interval `[lo, hi]` of the line carrying
/// `density` times Lebesgue measure.
#[derive(Clone, Debug)]
pub struct IntervalWindow {
    pub lo: BigRational,
    pub hi: BigRational,
    pub density: WideFloat,
    pub density_exact: Option<BigRational>,
}

impl IntervalWindow {
    pub fn unit() -> IntervalWindow {
        IntervalWindow {
            lo: BigRational::zero(),
            hi: BigRational::one(),
            density: WideFloat::ONE,
            density_exact: Some(BigRational::one()),
        }
    }

    /// Measure of the ball `[c - r, c + r]` under this window (open and
    /// closed balls agree: the boundary is Lebesgue-null).
    pub fn ball_mass(&self, center: &BigRational, radius: &BigRational) -> WideFloat {
        let lo = (center - radius).max(self.lo.clone());
        let hi = (center + radius).min(self.hi.clone());
        if hi <= lo {
            return WideFloat::ZERO;
        }
        WideFloat::from_big_ratio(&(hi - lo)) * self.density
    }
}

/// A space with a metric and a probability measure.
///
/// Exactly one of [`atoms`](MetricMeasureSpace::atoms) (atomic spaces) and
/// [`interval_window`](MetricMeasureSpace::interval_window) (continuum
/// spaces) returns `Some` for every built-in space.
pub trait MetricMeasureSpace: Send + Sync {
    /// Short self-description including parameters.
    fn name(&self) -> String;

    fn distance(&self, a: &Point, b: &Point) -> Dist;

    /// One independent draw from the measure.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point;

    /// Draw an index into [`atoms`](MetricMeasureSpace::atoms); `None` for
    /// continuum spaces. Zero-weight atoms are never drawn.
    fn sample_atom_index(&self, rng: &mut ChaCha8Rng) -> Option<usize>;

    /// The exact atomic support, if enumerable. Includes structural
    /// zero-weight atoms (which sampling and sphere tables skip).
    fn atoms(&self) -> Option<&[SpaceAtom]>;

    /// Interval-with-density description, for continuum spaces.
    fn interval_window(&self) -> Option<IntervalWindow>;

    /// Masses of the open ball, sphere, and closed ball around `anchor`.
    /// The triple satisfies `closed = open + sphere` bit-exactly: `closed`
    /// is always produced by that single addition.
    fn ball_masses(&self, anchor: &Point, radius: &Dist) -> BallMasses {
        if let Some(w) = self.interval_window() {
            let c = anchor.coord_exact().expect("continuum anchor has a coordinate");
            let open = w.ball_mass(&c, &radius.to_exact());
            return BallMasses { open, sphere: WideFloat::ZERO, closed: open + WideFloat::ZERO };
        }
        let table = SphereTable::new_unchecked(self, anchor);
        table.ball_masses(radius)
    }

    fn closed_ball(&self, anchor: &Point, radius: &Dist) -> WideFloat {
        self.ball_masses(anchor, radius).closed
    }

    fn open_ball(&self, anchor: &Point, radius: &Dist) -> WideFloat {
        self.ball_masses(anchor, radius).open
    }

    fn sphere(&self, anchor: &Point, radius: &Dist) -> WideFloat {
        self.ball_masses(anchor, radius).sphere
    }
}

#[derive(Clone, Debug)]
pub struct BallMasses {
    pub open: WideFloat,
    pub sphere: WideFloat,
    pub closed: WideFloat,
}

/// Checks `closed_ball(x, r) > 0` for every probe radius. A finite probe
/// list approximates support membership; all built-in anchors have
/// analytically known support, so the probes serve as regression guards.
pub fn support_check(space: &dyn MetricMeasureSpace, anchor: &Point, radii: &[Dist]) -> bool {
    radii.iter().all(|r| !space.closed_ball(anchor, r).is_zero())
}

/// One distance stratum of an atomic space as seen from an anchor.
#[derive(Clone, Debug)]
pub struct SphereRow {
    /// Distance from the anchor; strictly increasing down the table. A
    /// radius-zero row appears when the anchor itself carries mass.
    pub radius: BigRational,
    /// Indices into the space's atom list.
    pub members: Vec<usize>,
    /// Mass of the sphere at this distance.
    pub sphere: WideFloat,
    /// Mass strictly inside: `P(d < radius)`.
    pub open: WideFloat,
    /// `open + sphere`, computed as that single addition.
    pub closed: WideFloat,
    /// Suffix mass `P(d >= radius)`.
    pub ge: WideFloat,
    /// Suffix mass `P(d > radius)`; `ge = gt + sphere` by construction.
    pub gt: WideFloat,
    pub sphere_exact: Option<BigRational>,
    pub open_exact: Option<BigRational>,
    pub ge_exact: Option<BigRational>,
    pub gt_exact: Option<BigRational>,
}

/// Distance decomposition of an atomic space around an anchor: all sphere
/// radii with their masses, prefix (ball) and suffix (exterior) sums.
///
/// Suffix sums are kept explicitly instead of `1 - ball` so that the
/// exterior of a tiny ball never suffers catastrophic cancellation.
#[derive(Clone, Debug)]
pub struct SphereTable {
    rows: Vec<SphereRow>,
    total: WideFloat,
    total_exact: Option<BigRational>,
}

impl SphereTable {
    pub fn new<S: MetricMeasureSpace + ?Sized>(space: &S, anchor: &Point) -> Result<SphereTable> {
        if space.atoms().is_none() {
            return Err(CoreError::AtomicRequired(space.name()));
        }
        Ok(SphereTable::new_unchecked(space, anchor))
    }

    fn new_unchecked<S: MetricMeasureSpace + ?Sized>(space: &S, anchor: &Point) -> SphereTable {
        let atoms = space.atoms().expect("atomic space");
        let mut groups: std::collections::BTreeMap<BigRational, Vec<usize>> =
            std::collections::BTreeMap::new();
        for (i, atom) in atoms.iter().enumerate() {
            if atom.weight.is_zero() {
                continue;
            }
            let d = match space.distance(anchor, &atom.point) {
                Dist::Exact(q) => q,
                Dist::Approx(_) => unreachable!("atomic spaces have exact distances"),
            };
            groups.entry(d).or_default().push(i);
        }

        let all_exact = atoms
            .iter()
            .filter(|a| !a.weight.is_zero())
            .all(|a| a.exact_weight.is_some());

        // When every atom carries an exact weight, each stored float is the
        // single rounding of the exact rational sum, so equal rationals give
        // bit-equal floats (adjacent rows share open/closed and gt/ge) and
        // no accumulation drift can push a mass past its true value.
        let mut rows: Vec<SphereRow> = Vec::with_capacity(groups.len());
        let mut open = WideFloat::ZERO;
        let mut open_exact = BigRational::zero();
        for (radius, members) in groups {
            let mut sphere = WideFloat::ZERO;
            let mut sphere_exact = BigRational::zero();
            for &i in &members {
                sphere = sphere + atoms[i].weight;
                if all_exact {
                    sphere_exact += atoms[i].exact_weight.as_ref().unwrap();
                }
            }
            let (sphere, open_wide, closed) = if all_exact {
                let closed_exact = &open_exact + &sphere_exact;
                (
                    WideFloat::from_big_ratio(&sphere_exact),
                    WideFloat::from_big_ratio(&open_exact),
                    WideFloat::from_big_ratio(&closed_exact),
                )
            } else {
                (sphere, open, open + sphere)
            };
            rows.push(SphereRow {
                radius,
                members,
                sphere,
                open: open_wide,
                closed,
                ge: WideFloat::ZERO,
                gt: WideFloat::ZERO,
                sphere_exact: all_exact.then(|| sphere_exact.clone()),
                open_exact: all_exact.then(|| open_exact.clone()),
                ge_exact: None,
                gt_exact: None,
            });
            open = open + sphere;
            if all_exact {
                open_exact += &sphere_exact;
            }
        }

        // Suffix pass: gt of the largest radius is zero, then ge = gt + sphere
        // and the next row down inherits gt = ge (no mass lies between rows).
        let mut gt = WideFloat::ZERO;
        let mut gt_exact = BigRational::zero();
        for row in rows.iter_mut().rev() {
            if all_exact {
                row.gt_exact = Some(gt_exact.clone());
                row.gt = WideFloat::from_big_ratio(&gt_exact);
                gt_exact += row.sphere_exact.as_ref().unwrap();
                row.ge_exact = Some(gt_exact.clone());
                row.ge = WideFloat::from_big_ratio(&gt_exact);
            } else {
                row.gt = gt;
                row.ge = gt + row.sphere;
                gt = row.ge;
            }
        }

        let total = rows.first().map_or(WideFloat::ZERO, |r| r.ge);
        let total_exact = if all_exact {
            Some(rows.first().and_then(|r| r.ge_exact.clone()).unwrap_or_else(BigRational::zero))
        } else {
            None
        };
        SphereTable { rows, total, total_exact }
    }

    pub fn rows(&self) -> &[SphereRow] {
        &self.rows
    }

    /// Total mass of the support (should be 1 up to rounding).
    pub fn total(&self) -> WideFloat {
        self.total
    }

    pub fn total_exact(&self) -> Option<&BigRational> {
        self.total_exact.as_ref()
    }

    /// The row at exactly this radius, if the radius carries mass.
    pub fn row_at(&self, radius: &BigRational) -> Option<&SphereRow> {
        self.rows
            .binary_search_by(|row| row.radius.cmp(radius))
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Ball masses at an arbitrary radius (not necessarily a sphere radius).
    pub fn ball_masses(&self, radius: &Dist) -> BallMasses {
        let r = radius.to_exact();
        // Index of the first row with row.radius > r.
        let above = self.rows.partition_point(|row| row.radius <= r);
        let (open, sphere) = match self.row_at(&r) {
            Some(row) => (row.open, row.sphere),
            None => {
                let open = if above == 0 { WideFloat::ZERO } else { self.rows[above - 1].closed };
                (open, WideFloat::ZERO)
            }
        };
        BallMasses { open, sphere, closed: open + sphere }
    }

    /// All radii with positive sphere mass, ascending.
    pub fn sphere_radii(&self) -> Vec<BigRational> {
        self.rows.iter().map(|r| r.radius.clone()).collect()
    }
}

/// Shared sampler for atomic spaces: cumulative scan over positive weights.
#[derive(Clone, Debug)]
pub(crate) struct AtomSampler {
    /// (cumulative weight, atom index) over positive-weight atoms.
    cumulative: Vec<(f64, usize)>,
}

impl AtomSampler {
    pub(crate) fn new(atoms: &[SpaceAtom]) -> AtomSampler {
        let mut cumulative = Vec::new();
        let mut acc = 0.0f64;
        for (i, a) in atoms.iter().enumerate() {
            if a.weight.is_zero() {
                continue;
            }
            acc += a.weight.to_f64();
            cumulative.push((acc, i));
        }
        AtomSampler { cumulative }
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        use rand::Rng;
        let total = self.cumulative.last().expect("sampler over nonempty support").0;
        let u: f64 = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&(c, _)| c < u);
        self.cumulative[k.min(self.cumulative.len() - 1)].1
    }
}

/// Parses a rational written as `p/q`, a plain integer, a decimal like
/// `0.25`, or a dyadic power `2^-k`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || CoreError::InvalidParam(format!("cannot parse `{s}` as a rational number"));
    if let Some(rest) = s.strip_prefix("2^") {
        let k: i64 = rest.parse().map_err(|_| bad())?;
        let mag = BigInt::one() << k.unsigned_abs() as usize;
        return Ok(if k >= 0 {
            BigRational::from_integer(mag)
        } else {
            BigRational::new(BigInt::one(), mag)
        });
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| bad())? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = BigRational::new(digits, scale);
        let int_part = BigRational::from_integer(int.clone());
        return Ok(if neg || int.is_negative() { int_part - frac_part } else { int_part + frac_part });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rational_parsing_accepts_all_documented_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), BigRational::new(3.into(), 4.into()));
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("2^-4").unwrap(), BigRational::new(1.into(), 16.into()));
        assert_eq!(parse_rational("7").unwrap(), BigRational::from_integer(7.into()));
        assert_eq!(parse_rational("-0.5").unwrap(), BigRational::new((-1).into(), 2.into()));
        assert_eq!(
            parse_rational("2^-256").unwrap(),
            BigRational::new(1.into(), BigInt::one() << 256)
        );
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn ratio_to_f64_reaches_subnormals() {
        let tiny = BigRational::new(1.into(), BigInt::one() << 1024);
        let v = ratio_to_f64(&tiny);
        assert!(v > 0.0 && v < 1e-300);
        let negative = BigRational::new((-3).into(), 4.into());
        assert_eq!(ratio_to_f64(&negative), -0.75);
    }

    #[test]
    fn dist_ordering_mixes_exact_and_approx() {
        let a = Dist::from_i64(1, 3);
        let b = Dist::Approx(0.25);
        assert!(b < a);
        assert_eq!(Dist::from_i64(1, 4), Dist::Approx(0.25));
        // Exact radii far below double range stay strictly ordered.
        let t1 = Dist::Exact(BigRational::new(1.into(), BigInt::one() << 2000));
        let t2 = Dist::Exact(BigRational::new(1.into(), BigInt::one() << 3000));
        assert!(t2 < t1);
        assert!(!t2.is_zero());
    }

    fn toy_space() -> FiniteAtomicSpace {
        // Three atoms at distances 1, 1, 2 from the anchor atom `x`.
        FiniteAtomicSpace::from_table(
            vec!["x", "a", "b", "c"].into_iter().map(String::from).collect(),
            vec![
                parse_rational("0").unwrap(),
                parse_rational("0.2").unwrap(),
                parse_rational("0.3").unwrap(),
                parse_rational("0.5").unwrap(),
            ],
            vec![
                vec![0, 1, 1, 2],
                vec![1, 0, 1, 2],
                vec![1, 1, 0, 2],
                vec![2, 2, 2, 0],
            ]
            .into_iter()
            .map(|row| row.into_iter().map(|v| BigRational::from_integer(v.into())).collect())
            .collect(),
        )
        .unwrap()
    }

    #[test]
    fn sphere_table_merges_equal_distances_and_accumulates() {
        let space = toy_space();
        let table = SphereTable::new(&space, &Point::Labeled(0)).unwrap();
        let rows = table.rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].radius, BigRational::from_integer(1.into()));
        assert_eq!(rows[0].members, vec![1, 2]);
        assert!((rows[0].sphere.to_f64() - 0.5).abs() < 1e-15);
        assert!(rows[0].open.is_zero());
        assert!((rows[0].closed.to_f64() - 0.5).abs() < 1e-15);
        assert_eq!(rows[1].radius, BigRational::from_integer(2.into()));
        assert!((rows[1].open.to_f64() - 0.5).abs() < 1e-15);
        assert!((rows[1].closed.to_f64() - 1.0).abs() < 1e-15);
        // Exact bookkeeping: total is exactly one.
        assert_eq!(table.total_exact().unwrap(), &BigRational::one());
        // Suffix sums: ge at the smallest radius is the whole mass.
        assert_eq!(rows[0].ge, table.total());
        assert!(rows[1].gt.is_zero());
    }

    #[test]
    fn sphere_table_identities_hold() {
        let space = toy_space();
        let table = SphereTable::new(&space, &Point::Labeled(0)).unwrap();
        // Every float is the single rounding of its exact rational, so the
        // within-row sums agree to one rounding...
        for row in table.rows() {
            let closed = (row.open + row.sphere).to_f64();
            assert!((row.closed.to_f64() - closed).abs() <= closed.abs() * 2f64.powi(-52));
            let ge = (row.gt + row.sphere).to_f64();
            assert!((row.ge.to_f64() - ge).abs() <= ge.abs() * 2f64.powi(-52));
            // ...and exactly in the rational bookkeeping.
            let ge_exact = row.gt_exact.clone().unwrap() + row.sphere_exact.clone().unwrap();
            assert_eq!(ge_exact, row.ge_exact.clone().unwrap());
        }
        // Contiguity is bit-exact: adjacent rows share the same underlying
        // rational, hence the same float.
        let rows = table.rows();
        for k in 0..rows.len() - 1 {
            assert_eq!(rows[k + 1].open, rows[k].closed);
            assert_eq!(rows[k].gt, rows[k + 1].ge);
            assert_eq!(
                rows[k + 1].open_exact.as_ref().unwrap(),
                &(rows[k].open_exact.clone().unwrap() + rows[k].sphere_exact.clone().unwrap())
            );
        }
    }

    #[test]
    fn ball_masses_between_rows_and_at_rows() {
        let space = toy_space();
        let table = SphereTable::new(&space, &Point::Labeled(0)).unwrap();
        let at = table.ball_masses(&Dist::from_i64(1, 1));
        assert!((at.open.to_f64() - 0.0).abs() < 1e-15);
        assert!((at.sphere.to_f64() - 0.5).abs() < 1e-15);
        let between = table.ball_masses(&Dist::from_i64(3, 2));
        assert!((between.closed.to_f64() - 0.5).abs() < 1e-15);
        assert!(between.sphere.is_zero());
        let below = table.ball_masses(&Dist::from_i64(1, 2));
        assert!(below.closed.is_zero());
        let above = table.ball_masses(&Dist::from_i64(5, 1));
        assert!((above.closed.to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anchor_with_mass_produces_radius_zero_row() {
        let space = toy_space();
        let table = SphereTable::new(&space, &Point::Labeled(2)).unwrap();
        assert!(table.rows()[0].radius.is_zero());
        assert!((table.rows()[0].sphere.to_f64() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn support_check_distinguishes_anchors() {
        let space = toy_space();
        let radii: Vec<Dist> = (1..=4).map(|n| Dist::from_i64(1, n)).collect();
        // Anchor `x` carries no atom and its 1/2-ball is empty.
        assert!(!support_check(&space, &Point::Labeled(0), &radii));
        // Anchor `b` is an atom: every ball holds it.
        assert!(support_check(&space, &Point::Labeled(2), &radii));
        // With probe radii >= 1, anchor `x` passes.
        let coarse = vec![Dist::from_i64(1, 1)];
        assert!(support_check(&space, &Point::Labeled(0), &coarse));
    }

    #[test]
    fn atom_sampler_respects_weights() {
        let space = toy_space();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0u32; 4];
        for _ in 0..40_000 {
            counts[space.sample_atom_index(&mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[0], 0); // zero-weight anchor never drawn
        for (i, expect) in [(1, 0.2), (2, 0.3), (3, 0.5)] {
            let freq = counts[i] as f64 / 40_000.0;
            let se = (expect * (1.0 - expect) / 40_000.0_f64).sqrt();
            assert!((freq - expect).abs() < 5.0 * se, "atom {i}: freq {freq} vs {expect}");
        }
    }
}
