//! Continuum spaces: the unit interval under Lebesgue measure, plain or
//! equipped with the doubly-exponential threshold ladder `θ_k = 2^(-2^k)`.

use num::rational::BigRational;
use num::{BigInt, One};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

use super::{line_distance, Dist, IntervalWindow, MetricMeasureSpace, Point, SpaceAtom};

/// `[0,1]` with Lebesgue measure and thresholds `θ_k = 2^(-2^k)` for
/// `k = 1..=2D+2`.
///
/// Its canonical scalar field (see
/// [`ScalarField::dyadic_bands`](super::ScalarField::dyadic_bands)) is the
/// indicator of the union of bands `(θ_{2n}, θ_{2n-1}]` for `n = 1..=D`:
/// near zero it alternates between long runs of 0 and long runs of 1 on a
/// doubly-exponential scale, so local averages at the origin oscillate
/// between nearly 0 and nearly 1 instead of settling.
#[derive(Clone, Debug)]
pub struct DyadicIntervalSpace {
    depth: u32,
    thetas: Vec<BigRational>,
}

impl DyadicIntervalSpace {
    /// Largest supported depth: `θ_{2D+2} = 2^(-2^18)` already has 32 KiB of
    /// bits as an exact rational.
    pub const MAX_DEPTH: u32 = 8;

    pub fn new(depth: u32) -> Result<DyadicIntervalSpace> {
        if !(2..=Self::MAX_DEPTH).contains(&depth) {
            return Err(CoreError::Construction(format!(
                "depth must lie in 2..={}, got {depth}",
                Self::MAX_DEPTH
            )));
        }
        let thetas = (1..=2 * depth + 2)
            .map(|k| BigRational::new(BigInt::one(), BigInt::one() << (1usize << k)))
            .collect();
        Ok(DyadicIntervalSpace { depth, thetas })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `θ_k` for `k = 1..=2D+2` (1-based).
    pub fn theta(&self, k: u32) -> &BigRational {
        &self.thetas[(k - 1) as usize]
    }

    pub fn thetas(&self) -> &[BigRational] {
        &self.thetas
    }
}

impl MetricMeasureSpace for DyadicIntervalSpace {
    fn name(&self) -> String {
        format!("dyadic(D={})", self.depth)
    }

    fn distance(&self, a: &Point, b: &Point) -> Dist {
        line_distance(a, b)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::Real(rng.random::<f64>())
    }

    fn sample_atom_index(&self, _rng: &mut ChaCha8Rng) -> Option<usize> {
        None
    }

    fn atoms(&self) -> Option<&[SpaceAtom]> {
        None
    }

    fn interval_window(&self) -> Option<IntervalWindow> {
        Some(IntervalWindow::unit())
    }
}

/// `[0,1]` with Lebesgue measure and no additional structure.
#[derive(Clone, Debug, Default)]
pub struct UnitIntervalSpace;

impl UnitIntervalSpace {
    pub fn new() -> UnitIntervalSpace {
        UnitIntervalSpace
    }
}

impl MetricMeasureSpace for UnitIntervalSpace {
    fn name(&self) -> String {
        "unit_interval".to_string()
    }

    fn distance(&self, a: &Point, b: &Point) -> Dist {
        line_distance(a, b)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::Real(rng.random::<f64>())
    }

    fn sample_atom_index(&self, _rng: &mut ChaCha8Rng) -> Option<usize> {
        None
    }

    fn atoms(&self) -> Option<&[SpaceAtom]> {
        None
    }

    fn interval_window(&self) -> Option<IntervalWindow> {
        Some(IntervalWindow::unit())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ratio_to_f64;
    use crate::wide::WideFloat;

    #[test]
    fn thresholds_are_the_doubly_exponential_ladder() {
        let space = DyadicIntervalSpace::new(3).unwrap();
        assert_eq!(space.thetas().len(), 8);
        assert_eq!(space.theta(1), &BigRational::new(1.into(), 4.into()));
        assert_eq!(space.theta(2), &BigRational::new(1.into(), 16.into()));
        assert_eq!(space.theta(3), &BigRational::new(1.into(), 256.into()));
        assert_eq!(space.theta(8), &BigRational::new(1.into(), BigInt::one() << 256));
        assert!((ratio_to_f64(space.theta(4)) - 1.52587890625e-5).abs() < 1e-20);
    }

    #[test]
    fn ball_mass_at_origin_is_clamped_radius() {
        let space = DyadicIntervalSpace::new(3).unwrap();
        let anchor = Point::zero();
        for (r, want) in [(Dist::from_i64(1, 4), 0.25), (Dist::from_i64(3, 1), 1.0)] {
            let m = space.ball_masses(&anchor, &r);
            assert!((m.closed.to_f64() - want).abs() < 1e-15);
            assert!(m.sphere.is_zero());
            assert_eq!(m.open, m.closed);
        }
        // Interior anchor: ball may stick out on both sides.
        let m = space.ball_masses(&Point::atom_i64(9, 10), &Dist::from_i64(1, 5));
        assert!((m.closed.to_f64() - 0.3).abs() < 1e-15);
        // Tiny exact radius stays positive in wide arithmetic.
        let tiny = Dist::Exact(space.theta(8).clone());
        let m = space.ball_masses(&anchor, &tiny);
        assert!(!m.closed.is_zero());
        assert!((m.closed.log2() - (-256.0)).abs() < 1e-12);
    }

    #[test]
    fn construction_bounds_depth() {
        assert!(DyadicIntervalSpace::new(1).is_err());
        assert!(DyadicIntervalSpace::new(9).is_err());
        assert!(DyadicIntervalSpace::new(2).is_ok());
        assert!(DyadicIntervalSpace::new(8).is_ok());
    }

    #[test]
    fn unit_interval_masses() {
        let space = UnitIntervalSpace::new();
        let m = space.ball_masses(&Point::atom_i64(1, 2), &Dist::from_i64(1, 4));
        assert!((m.closed.to_f64() - 0.5).abs() < 1e-15);
        assert_eq!(space.closed_ball(&Point::zero(), &Dist::from_i64(2, 1)), WideFloat::ONE);
    }

    #[test]
    fn sampling_is_uniform_in_bulk() {
        use rand::SeedableRng;
        let space = DyadicIntervalSpace::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut below_half = 0u32;
        for _ in 0..n {
            match space.sample(&mut rng) {
                Point::Real(v) => {
                    assert!((0.0..1.0).contains(&v));
                    if v < 0.5 {
                        below_half += 1;
                    }
                }
                _ => panic!("continuum sample expected"),
            }
        }
        let freq = below_half as f64 / n as f64;
        assert!((freq - 0.5).abs() < 5.0 * (0.25f64 / n as f64).sqrt());
    }
}
