//! Atomic space on `{±1/n : n <= N} ∪ {0}` whose sphere masses shrink like
//! `2^(-2^n)`, splitting each sphere between a heavy negative and a light
//! positive atom.

use num::rational::BigRational;
use num::{BigInt, One, Zero};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::wide::WideFloat;

use super::{line_distance, AtomSampler, Dist, IntervalWindow, MetricMeasureSpace, Point, SpaceAtom};

/// Probability space on the real line with atoms at `±1/n` for `n = 1..=N`
/// plus the accumulation point `0`.
///
/// The sphere `{±1/n}` carries mass `2^(-2^n) / R` with `R = Σ_{n<=N}
/// 2^(-2^n)`, split as `(n-1)/n` on the negative atom and `1/n` on the
/// positive one. The atoms `-1` and `0` get weight zero but stay in the
/// support list; `0` is the canonical anchor, a support point by
/// accumulation.
///
/// `N` truncates an infinite construction. The untruncated tail mass
/// `2^(-2^(N+1)) + ...` is folded into the normalizer `R`; its leading term
/// relative to `R` is reported by
/// [`truncation_discrepancy`](SignedHarmonicSpace::truncation_discrepancy).
#[derive(Clone, Debug)]
pub struct SignedHarmonicSpace {
    n_max: u32,
    atoms: Vec<SpaceAtom>,
    normalizer: WideFloat,
    normalizer_exact: BigRational,
    sampler: AtomSampler,
}

/// `2^(-2^n)` as an exact rational.
fn dyadic_tower(n: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << (1usize << n))
}

impl SignedHarmonicSpace {
    /// Largest supported truncation index. `2^(2^24)` has two megabytes of
    /// bits; beyond that exact-rational bookkeeping stops being practical.
    pub const MAX_INDEX_LIMIT: u32 = 24;

    pub fn new(n_max: u32) -> Result<SignedHarmonicSpace> {
        if !(2..=Self::MAX_INDEX_LIMIT).contains(&n_max) {
            return Err(CoreError::Construction(format!(
                "max index must lie in 2..={}, got {n_max}",
                Self::MAX_INDEX_LIMIT
            )));
        }
        let normalizer_exact: BigRational =
            (1..=n_max).map(dyadic_tower).fold(BigRational::zero(), |a, b| a + b);
        let normalizer = WideFloat::from_big_ratio(&normalizer_exact);

        let mut atoms = Vec::with_capacity(2 * n_max as usize + 1);
        atoms.push(SpaceAtom {
            label: "0".to_string(),
            point: Point::zero(),
            weight: WideFloat::ZERO,
            exact_weight: Some(BigRational::zero()),
        });
        for n in 1..=n_max {
            let sphere_mass = dyadic_tower(n) / &normalizer_exact;
            let n_rat = BigRational::from_integer(BigInt::from(n));
            let pos = &sphere_mass / &n_rat;
            let neg = sphere_mass - &pos;
            for (sign, exact) in [(1i64, pos), (-1i64, neg)] {
                let label = if sign > 0 { format!("+1/{n}") } else { format!("-1/{n}") };
                atoms.push(SpaceAtom {
                    label,
                    point: Point::atom_i64(sign, n as i64),
                    weight: WideFloat::from_big_ratio(&exact),
                    exact_weight: Some(exact),
                });
            }
        }
        let sampler = AtomSampler::new(&atoms);
        Ok(SignedHarmonicSpace { n_max, atoms, normalizer, normalizer_exact, sampler })
    }

    pub fn max_index(&self) -> u32 {
        self.n_max
    }

    pub fn normalizer(&self) -> WideFloat {
        self.normalizer
    }

    pub fn normalizer_exact(&self) -> &BigRational {
        &self.normalizer_exact
    }

    /// Leading neglected sphere mass relative to the normalizer,
    /// `2^(-2^(N+1)) / R` — the resolution limit of the truncation.
    pub fn truncation_discrepancy(&self) -> WideFloat {
        if self.n_max >= 63 {
            return WideFloat::ZERO;
        }
        WideFloat::pow2(-(1i64 << (self.n_max + 1))) / self.normalizer
    }
}

impl MetricMeasureSpace for SignedHarmonicSpace {
    fn name(&self) -> String {
        format!("signed_harmonic(N={})", self.n_max)
    }

    fn distance(&self, a: &Point, b: &Point) -> Dist {
        line_distance(a, b)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        self.atoms[self.sampler.draw(rng)].point.clone()
    }

    fn sample_atom_index(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        Some(self.sampler.draw(rng))
    }

    fn atoms(&self) -> Option<&[SpaceAtom]> {
        Some(&self.atoms)
    }

    fn interval_window(&self) -> Option<IntervalWindow> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SphereTable;
    use num::ToPrimitive;

    #[test]
    fn normalizer_matches_reference_value() {
        let space = SignedHarmonicSpace::new(8).unwrap();
        let want = 0.316_421_509_021_893_14;
        assert!((space.normalizer().to_f64() - want).abs() < 1e-15);
    }

    #[test]
    fn exact_weights_sum_to_exactly_one() {
        for n_max in [2, 3, 8, 12] {
            let space = SignedHarmonicSpace::new(n_max).unwrap();
            let sum: BigRational = space
                .atoms()
                .unwrap()
                .iter()
                .map(|a| a.exact_weight.clone().unwrap())
                .fold(BigRational::zero(), |a, b| a + b);
            assert!(sum.is_one(), "N={n_max}");
        }
    }

    #[test]
    fn weight_split_follows_the_harmonic_rule() {
        let space = SignedHarmonicSpace::new(8).unwrap();
        let atoms = space.atoms().unwrap();
        let find = |label: &str| atoms.iter().find(|a| a.label == label).unwrap();
        // Sphere n=1: all mass on +1, none on -1.
        assert!(find("-1/1").weight.is_zero());
        assert!((find("+1/1").weight.to_f64() - 0.790_085_354_098_676_5).abs() < 1e-15);
        // Sphere n=2: 1/2 : 1/2 split of 2^-4/R.
        let s2 = 0.197_521_338_524_669_12;
        assert!((find("+1/2").weight.to_f64() - s2 / 2.0).abs() < 1e-15);
        assert!((find("-1/2").weight.to_f64() - s2 / 2.0).abs() < 1e-15);
        // Sphere n=3: 2/3 negative, 1/3 positive.
        let s3 = 0.012_345_083_657_791_82;
        assert!((find("-1/3").weight.to_f64() - s3 * 2.0 / 3.0).abs() < 1e-15);
        // The accumulation point carries no mass.
        assert!(find("0").weight.is_zero());
    }

    #[test]
    fn sphere_table_rows_match_reference_masses() {
        let space = SignedHarmonicSpace::new(8).unwrap();
        let table = SphereTable::new(&space, &Point::zero()).unwrap();
        let rows = table.rows();
        assert_eq!(rows.len(), 8);
        // Ascending radii 1/8, 1/7, ..., 1/1; masses decrease with n.
        let s: [f64; 8] = [
            0.790_085_354_098_676_48,
            0.197_521_338_524_669_12,
            0.012_345_083_657_791_82,
            4.822_298_303_824_929_7e-5,
            7.358_243_261_451_613_9e-10,
            1.713_224_514_725_528_2e-19,
            9.287_408_704_104_208_7e-39,
            2.729_324_116_363_059_8e-77,
        ];
        for (k, row) in rows.iter().enumerate() {
            let n = 8 - k; // row k has radius 1/(8-k)
            let want = s[n - 1];
            let got = row.sphere.to_f64();
            assert!(
                (got - want).abs() <= 1e-14 * want,
                "sphere 1/{n}: got {got}, want {want}"
            );
            assert_eq!(row.members.len(), if n == 1 { 1 } else { 2 });
        }
        // Closed ball at 1/2 and exterior suffix values.
        let half = table.ball_masses(&Dist::from_i64(1, 2));
        assert!((half.closed.to_f64() - 0.209_914_645_901_323_52).abs() < 1e-15);
        assert!((half.open.to_f64() - 0.012_393_307_376_654_4).abs() < 1e-15);
        // gt at radius 1/2 = mass strictly beyond = weight of sphere 1.
        let row_half = table.row_at(&BigRational::new(1.into(), 2.into())).unwrap();
        assert!((row_half.gt.to_f64() - s[0]).abs() < 1e-15);
    }

    #[test]
    fn truncation_discrepancy_is_reported_not_silently_lost() {
        let space = SignedHarmonicSpace::new(8).unwrap();
        let disc = space.truncation_discrepancy();
        // 2^-512 / R: log2 = -512 - log2(R)
        let want_log2 = -512.0 - 0.316_421_509_021_893_14_f64.log2();
        assert!((disc.log2() - want_log2).abs() < 1e-9);
        // A real positive number around 4.3e-154.
        assert!(!disc.is_zero());
        assert!(disc.to_f64() > 0.0 && disc.to_f64() < 1e-150);
        // At N=12 the neglected mass is 2^-8192/R — far beyond double range
        // but still tracked.
        let wide = SignedHarmonicSpace::new(12).unwrap().truncation_discrepancy();
        assert!(!wide.is_zero());
        assert_eq!(wide.to_f64(), 0.0);
        assert!((wide.log2() - (-8192.0 - 0.316_421_509_021_893_14_f64.log2())).abs() < 1e-9);
    }

    #[test]
    fn construction_rejects_out_of_range_truncation() {
        assert!(SignedHarmonicSpace::new(1).is_err());
        assert!(SignedHarmonicSpace::new(25).is_err());
        assert!(SignedHarmonicSpace::new(2).is_ok());
    }

    #[test]
    fn sampling_matches_weights_within_five_standard_errors() {
        use rand::SeedableRng;
        let space = SignedHarmonicSpace::new(8).unwrap();
        let atoms = space.atoms().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 1_000_000u32;
        let mut counts = vec![0u32; atoms.len()];
        for _ in 0..trials {
            counts[space.sample_atom_index(&mut rng).unwrap()] += 1;
        }
        for (i, atom) in atoms.iter().enumerate() {
            let w = atom.weight.to_f64();
            if w < 1e-4 {
                continue;
            }
            let freq = counts[i] as f64 / trials as f64;
            let se = (w * (1.0 - w) / trials as f64).sqrt();
            assert!(
                (freq - w).abs() < 5.0 * se,
                "atom {}: freq {freq}, weight {w}",
                atom.label
            );
        }
        let exact_sum: BigRational = atoms
            .iter()
            .map(|a| a.exact_weight.clone().unwrap())
            .fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(exact_sum.to_f64().unwrap(), 1.0);
    }
}
