//! Conditioning a space on a closed ball: the measure restricted to
//! `B̄_R(x)` and renormalized by its mass.

use num::rational::BigRational;
use num::Zero;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::wide::WideFloat;

use super::{AtomSampler, Dist, IntervalWindow, MetricMeasureSpace, Point, SpaceAtom};

/// A base space conditioned on the closed ball `B̄_R(center)`.
///
/// Ball and sphere queries are rescaled by the reciprocal ball mass;
/// sampling rejects draws that land outside the ball. For atomic bases the
/// surviving atoms get exactly renormalized weights; for interval bases the
/// window shrinks and its density grows.
pub struct RestrictedSpace {
    base: Box<dyn MetricMeasureSpace>,
    center: Point,
    radius: Dist,
    ball_mass: WideFloat,
    atoms: Option<Vec<SpaceAtom>>,
    sampler: Option<AtomSampler>,
    window: Option<IntervalWindow>,
}

/// Conditions `base` on `B̄_radius(center)`. Errors when the ball has no
/// mass (the conditional measure would not exist).
pub fn normalize_to_ball(
    base: Box<dyn MetricMeasureSpace>,
    center: Point,
    radius: Dist,
) -> Result<RestrictedSpace> {
    let masses = base.ball_masses(&center, &radius);
    let z = masses.closed;
    if z.is_zero() {
        return Err(CoreError::ZeroMassBall { radius: radius.to_string() });
    }

    let mut atoms = None;
    let mut sampler = None;
    let mut window = None;

    if let Some(base_atoms) = base.atoms() {
        // Exact renormalization over the surviving atoms when possible.
        let all_exact = base_atoms.iter().all(|a| a.exact_weight.is_some());
        let z_exact: Option<BigRational> = if all_exact {
            let mut sum = BigRational::zero();
            for a in base_atoms {
                if a.weight.is_zero() {
                    continue;
                }
                if base.distance(&center, &a.point) <= radius {
                    sum += a.exact_weight.as_ref().unwrap();
                }
            }
            Some(sum)
        } else {
            None
        };
        let kept: Vec<SpaceAtom> = base_atoms
            .iter()
            .filter(|a| base.distance(&center, &a.point) <= radius)
            .map(|a| {
                let exact_weight = match (&a.exact_weight, &z_exact) {
                    (Some(w), Some(z)) => Some(w / z),
                    _ => None,
                };
                let weight = match &exact_weight {
                    Some(w) => WideFloat::from_big_ratio(w),
                    None => a.weight / z,
                };
                SpaceAtom { label: a.label.clone(), point: a.point.clone(), weight, exact_weight }
            })
            .collect();
        if kept.iter().all(|a| a.weight.is_zero()) {
            return Err(CoreError::ZeroMassBall { radius: radius.to_string() });
        }
        sampler = Some(AtomSampler::new(&kept));
        atoms = Some(kept);
    } else if let Some(w) = base.interval_window() {
        let c = center.coord_exact().expect("interval anchor has a coordinate");
        let r = radius.to_exact();
        let lo = (&c - &r).max(w.lo.clone());
        let hi = (&c + &r).min(w.hi.clone());
        // A uniform window conditioned on a subinterval is uniform with
        // density equal to the reciprocal length.
        let len = &hi - &lo;
        if len <= BigRational::zero() {
            return Err(CoreError::ZeroMassBall { radius: radius.to_string() });
        }
        let density_exact = Some(BigRational::from_integer(1.into()) / &len);
        let density = WideFloat::ONE / WideFloat::from_big_ratio(&len);
        window = Some(IntervalWindow { lo, hi, density, density_exact });
    }

    Ok(RestrictedSpace { base, center, radius, ball_mass: z, atoms, sampler, window })
}

impl RestrictedSpace {
    /// Mass of the conditioning ball in the base space.
    pub fn ball_mass(&self) -> WideFloat {
        self.ball_mass
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> &Dist {
        &self.radius
    }
}

impl MetricMeasureSpace for RestrictedSpace {
    fn name(&self) -> String {
        format!("{} | ball({}, {})", self.base.name(), self.center, self.radius)
    }

    fn distance(&self, a: &Point, b: &Point) -> Dist {
        self.base.distance(a, b)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        if let (Some(sampler), Some(atoms)) = (&self.sampler, &self.atoms) {
            return atoms[sampler.draw(rng)].point.clone();
        }
        // Rejection from the base; acceptance probability is the ball mass.
        loop {
            let p = self.base.sample(rng);
            if self.base.distance(&self.center, &p) <= self.radius {
                return p;
            }
        }
    }

    fn sample_atom_index(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        self.sampler.as_ref().map(|s| s.draw(rng))
    }

    fn atoms(&self) -> Option<&[SpaceAtom]> {
        self.atoms.as_deref()
    }

    fn interval_window(&self) -> Option<IntervalWindow> {
        self.window.clone()
    }
}
