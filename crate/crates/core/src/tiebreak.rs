//! Tie-breaking rules for nearest-neighbor selection.
//!
//! When several draws sit at the minimal distance, a rule picks the winner.
//! *Index-selector* rules (lexicographic, uniform) look only at the set of
//! tied sample indices and an independent randomness source — never at the
//! points themselves — which is exactly what makes the sphere-conditional
//! law of the chosen neighbor match the measure's own conditional law.
//! The biased rules break that property on purpose: they inspect the tied
//! points and favor a side.

use num::rational::BigRational;
use num::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::space::{Dist, MetricMeasureSpace, Point, SpaceAtom};

/// A draw participating in a tie, as seen by a rule.
#[derive(Clone, Debug)]
pub struct NnCandidate<'a> {
    /// Position of the draw in the sample list (0-based).
    pub sample_index: usize,
    pub point: &'a Point,
    /// The atom hit by the draw, when the space enumerates atoms.
    pub atom: Option<&'a SpaceAtom>,
}

impl NnCandidate<'_> {
    fn is_positive(&self) -> bool {
        match self.point.coord_exact() {
            Some(c) => c.is_positive(),
            None => false,
        }
    }

    fn label(&self) -> Option<&str> {
        self.atom.map(|a| a.label.as_str())
    }
}

/// How equidistant candidates are resolved.
#[derive(Clone, Debug)]
pub enum TieBreakRule {
    /// Smallest sample index wins. Deterministic index selector.
    Lexicographic,
    /// Uniformly random tied draw wins. Randomized index selector.
    UniformRandom,
    /// A positive-coordinate candidate always beats the rest.
    PositivePreference,
    /// On a two-sided tie at radius `1/n`-ish, the positive side wins with
    /// probability `p_n = (C-1)/n` (clamped into `[0,1]`).
    BiasedBernoulli { c: BigRational },
    /// A candidate carrying this atom label always wins; otherwise the
    /// smallest sample index does.
    PreferAtom { label: String },
}

/// Sphere index `n` associated with a radius: `n = ceil(1/r)`, so the radius
/// `1/n` maps to `n` itself.
pub fn sphere_index_from_radius(radius: &Dist) -> u64 {
    match radius {
        Dist::Exact(q) => {
            if q.is_zero() || q.is_negative() {
                return 1;
            }
            let inv = q.recip();
            let n = inv.ceil().to_integer();
            num::ToPrimitive::to_u64(&n).unwrap_or(u64::MAX).max(1)
        }
        Dist::Approx(v) => {
            if *v <= 0.0 {
                1
            } else {
                (1.0 / v).ceil().max(1.0) as u64
            }
        }
    }
}

impl TieBreakRule {
    pub fn lexicographic() -> TieBreakRule {
        TieBreakRule::Lexicographic
    }

    pub fn uniform_random() -> TieBreakRule {
        TieBreakRule::UniformRandom
    }

    pub fn positive_preference() -> TieBreakRule {
        TieBreakRule::PositivePreference
    }

    pub fn biased_bernoulli(c: BigRational) -> Result<TieBreakRule> {
        if c <= BigRational::one() {
            return Err(CoreError::Construction(format!(
                "bias bound must exceed 1, got {c}"
            )));
        }
        Ok(TieBreakRule::BiasedBernoulli { c })
    }

    pub fn prefer_atom(label: impl Into<String>) -> TieBreakRule {
        TieBreakRule::PreferAtom { label: label.into() }
    }

    pub fn name(&self) -> String {
        match self {
            TieBreakRule::Lexicographic => "lex".into(),
            TieBreakRule::UniformRandom => "uniform".into(),
            TieBreakRule::PositivePreference => "positive".into(),
            TieBreakRule::BiasedBernoulli { c } => format!("bernoulli(C={c})"),
            TieBreakRule::PreferAtom { label } => format!("prefer({label})"),
        }
    }

    /// True for rules whose choice depends only on the tied index set and
    /// the rule's own randomness — never on candidate point values.
    pub fn is_index_selector(&self) -> bool {
        matches!(self, TieBreakRule::Lexicographic | TieBreakRule::UniformRandom)
    }

    /// `p_n`: probability that the positive side wins a two-sided tie at
    /// this radius.
    pub fn positive_tie_weight(&self, radius: &Dist) -> Option<BigRational> {
        match self {
            TieBreakRule::PositivePreference => Some(BigRational::one()),
            TieBreakRule::BiasedBernoulli { c } => {
                let n = sphere_index_from_radius(radius);
                let p = (c - BigRational::one()) / BigRational::from_integer(n.into());
                Some(p.min(BigRational::one()).max(BigRational::zero()))
            }
            _ => None,
        }
    }

    /// Picks the winning sample index among tied candidates (non-empty,
    /// listed in increasing sample order).
    pub fn choose(
        &self,
        cands: &[NnCandidate<'_>],
        radius: &Dist,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        debug_assert!(!cands.is_empty());
        debug_assert!(cands.windows(2).all(|w| w[0].sample_index < w[1].sample_index));
        if cands.len() == 1 {
            return cands[0].sample_index;
        }
        match self {
            TieBreakRule::Lexicographic => cands[0].sample_index,
            TieBreakRule::UniformRandom => {
                cands[rng.random_range(0..cands.len())].sample_index
            }
            TieBreakRule::PositivePreference => cands
                .iter()
                .find(|c| c.is_positive())
                .unwrap_or(&cands[0])
                .sample_index,
            TieBreakRule::BiasedBernoulli { .. } => {
                let pos = cands.iter().find(|c| c.is_positive());
                let neg = cands.iter().find(|c| !c.is_positive());
                match (pos, neg) {
                    (Some(p), Some(n)) => {
                        let w = crate::space::ratio_to_f64(
                            &self.positive_tie_weight(radius).unwrap(),
                        );
                        if rng.random::<f64>() < w {
                            p.sample_index
                        } else {
                            n.sample_index
                        }
                    }
                    _ => cands[0].sample_index,
                }
            }
            TieBreakRule::PreferAtom { label } => cands
                .iter()
                .find(|c| c.label() == Some(label))
                .unwrap_or(&cands[0])
                .sample_index,
        }
    }

    /// Exact law of [`choose`](TieBreakRule::choose): probability that each
    /// candidate wins, aligned with `cands`, summing to one. Every built-in
    /// rule admits this closed form.
    pub fn tie_law(
        &self,
        cands: &[NnCandidate<'_>],
        radius: &Dist,
    ) -> Option<Vec<BigRational>> {
        let k = cands.len();
        let mut law = vec![BigRational::zero(); k];
        if k == 1 {
            law[0] = BigRational::one();
            return Some(law);
        }
        match self {
            TieBreakRule::Lexicographic => law[0] = BigRational::one(),
            TieBreakRule::UniformRandom => {
                let share = BigRational::new(1.into(), (k as i64).into());
                law.iter_mut().for_each(|p| *p = share.clone());
            }
            TieBreakRule::PositivePreference => {
                let i = cands.iter().position(|c| c.is_positive()).unwrap_or(0);
                law[i] = BigRational::one();
            }
            TieBreakRule::BiasedBernoulli { .. } => {
                let pos = cands.iter().position(|c| c.is_positive());
                let neg = cands.iter().position(|c| !c.is_positive());
                match (pos, neg) {
                    (Some(p), Some(n)) => {
                        let w = self.positive_tie_weight(radius).unwrap();
                        law[n] = BigRational::one() - &w;
                        law[p] = w;
                    }
                    _ => law[0] = BigRational::one(),
                }
            }
            TieBreakRule::PreferAtom { label } => {
                let i = cands
                    .iter()
                    .position(|c| c.label() == Some(label))
                    .unwrap_or(0);
                law[i] = BigRational::one();
            }
        }
        Some(law)
    }
}

/// Finds the nearest sample to `x`, resolving ties with `rule`.
/// Returns the winning sample's index (0-based) and point.
pub fn select_nn(
    space: &dyn MetricMeasureSpace,
    x: &Point,
    samples: &[Point],
    rule: &TieBreakRule,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, Point)> {
    if samples.is_empty() {
        return Err(CoreError::EmptySample("select_nn needs at least one sample".into()));
    }
    let dists: Vec<Dist> = samples.iter().map(|s| space.distance(x, s)).collect();
    let min = dists.iter().min().unwrap().clone();
    let atoms = space.atoms();
    let cands: Vec<NnCandidate<'_>> = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| dists[*i] == min)
        .map(|(i, p)| NnCandidate {
            sample_index: i,
            point: p,
            atom: atoms.and_then(|list| find_atom(list, p)),
        })
        .collect();
    let winner = rule.choose(&cands, &min, rng);
    Ok((winner, samples[winner].clone()))
}

/// Locates the atom a sampled point refers to.
pub fn find_atom<'a>(atoms: &'a [SpaceAtom], p: &Point) -> Option<&'a SpaceAtom> {
    match p {
        Point::Labeled(i) => atoms.get(*i),
        _ => atoms.iter().find(|a| &a.point == p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::parse_rational;
    use rand::SeedableRng;

    fn pts(coords: &[(i64, i64)]) -> Vec<Point> {
        coords.iter().map(|&(n, d)| Point::atom_i64(n, d)).collect()
    }

    fn cands<'a>(points: &'a [Point], indices: &[usize]) -> Vec<NnCandidate<'a>> {
        indices
            .iter()
            .zip(points.iter())
            .map(|(&sample_index, point)| NnCandidate { sample_index, point, atom: None })
            .collect()
    }

    #[test]
    fn lexicographic_takes_smallest_index_ignoring_rng_and_points() {
        let rule = TieBreakRule::lexicographic();
        let points = pts(&[(1, 2), (-1, 2), (1, 3)]);
        let c = cands(&points, &[1, 3, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(rule.choose(&c, &Dist::from_i64(1, 2), &mut rng), 1);
        }
        let single = cands(&points[..1], &[5]);
        assert_eq!(rule.choose(&single, &Dist::from_i64(1, 2), &mut rng), 5);
        let law = rule.tie_law(&c, &Dist::from_i64(1, 2)).unwrap();
        assert_eq!(law, vec![
            BigRational::one(),
            BigRational::zero(),
            BigRational::zero()
        ]);
    }

    #[test]
    fn uniform_rule_is_uniform_by_chi_squared() {
        let rule = TieBreakRule::uniform_random();
        let points = pts(&[(1, 2), (-1, 2), (1, 3)]);
        let c = cands(&points, &[0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000;
        let mut counts = [0u32; 3];
        for _ in 0..trials {
            counts[rule.choose(&c, &Dist::from_i64(1, 2), &mut rng)] += 1;
        }
        let expected = trials as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        // 2 degrees of freedom, significance 1e-6.
        assert!(chi2 < 27.631_021_115_9, "chi2 = {chi2}, counts {counts:?}");
        // Two-candidate frequency within 5 binomial standard errors.
        let c2 = cands(&points[..2], &[1, 2]);
        let mut hits = 0u32;
        for _ in 0..trials {
            if rule.choose(&c2, &Dist::from_i64(1, 2), &mut rng) == 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        let se = 0.5 / (trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 5.0 * se, "freq {freq}");
    }

    #[test]
    fn index_selectors_ignore_point_values_shuffle_equivariance() {
        // Same index set, permuted point values, paired rng seeds: the
        // chosen index distribution must be identical draw by draw.
        let points_a = pts(&[(1, 2), (-1, 2), (1, 5)]);
        let points_b = pts(&[(1, 5), (1, 2), (-1, 2)]); // permuted values
        for rule in [TieBreakRule::lexicographic(), TieBreakRule::uniform_random()] {
            assert!(rule.is_index_selector());
            for seed in 0..50 {
                let ca = cands(&points_a, &[2, 4, 9]);
                let cb = cands(&points_b, &[2, 4, 9]);
                let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
                let mut rng_b = ChaCha8Rng::seed_from_u64(seed);
                assert_eq!(
                    rule.choose(&ca, &Dist::from_i64(1, 2), &mut rng_a),
                    rule.choose(&cb, &Dist::from_i64(1, 2), &mut rng_b),
                );
            }
        }
        // A biased rule is *not* shuffle-equivariant: the winner follows the
        // positive value around.
        let rule = TieBreakRule::positive_preference();
        assert!(!rule.is_index_selector());
        let two_a = pts(&[(1, 2), (-1, 2)]);
        let two_b = pts(&[(-1, 2), (1, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ca = cands(&two_a, &[0, 1]);
        let cb = cands(&two_b, &[0, 1]);
        assert_eq!(rule.choose(&ca, &Dist::from_i64(1, 2), &mut rng), 0);
        assert_eq!(rule.choose(&cb, &Dist::from_i64(1, 2), &mut rng), 1);
    }

    #[test]
    fn bernoulli_rule_follows_its_schedule() {
        let rule = TieBreakRule::biased_bernoulli(parse_rational("2").unwrap()).unwrap();
        // C=2: p_n = 1/n.
        assert_eq!(
            rule.positive_tie_weight(&Dist::from_i64(1, 2)).unwrap(),
            parse_rational("1/2").unwrap()
        );
        assert_eq!(
            rule.positive_tie_weight(&Dist::from_i64(1, 5)).unwrap(),
            parse_rational("1/5").unwrap()
        );
        // Clamping: C=5 at n=2 gives (5-1)/2 = 2 -> clamped to 1.
        let hot = TieBreakRule::biased_bernoulli(parse_rational("5").unwrap()).unwrap();
        assert_eq!(
            hot.positive_tie_weight(&Dist::from_i64(1, 2)).unwrap(),
            BigRational::one()
        );
        // Empirical frequency at n=5 (p = 1/5).
        let points = pts(&[(1, 5), (-1, 5)]);
        let c = cands(&points, &[0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trials = 100_000;
        let mut pos = 0u32;
        for _ in 0..trials {
            if rule.choose(&c, &Dist::from_i64(1, 5), &mut rng) == 0 {
                pos += 1;
            }
        }
        let freq = pos as f64 / trials as f64;
        let se = (0.2 * 0.8 / trials as f64).sqrt();
        assert!((freq - 0.2).abs() < 5.0 * se, "freq {freq}");
        // The exact law mirrors the schedule.
        let law = rule.tie_law(&c, &Dist::from_i64(1, 5)).unwrap();
        assert_eq!(law[0], parse_rational("1/5").unwrap());
        assert_eq!(law[1], parse_rational("4/5").unwrap());
        // C must exceed 1.
        assert!(TieBreakRule::biased_bernoulli(BigRational::one()).is_err());
    }

    #[test]
    fn sphere_index_mapping() {
        assert_eq!(sphere_index_from_radius(&Dist::from_i64(1, 2)), 2);
        assert_eq!(sphere_index_from_radius(&Dist::from_i64(1, 8)), 8);
        assert_eq!(sphere_index_from_radius(&Dist::from_i64(1, 1)), 1);
        assert_eq!(sphere_index_from_radius(&Dist::from_i64(2, 5)), 3); // 1/(2/5) = 2.5 -> 3
        assert_eq!(sphere_index_from_radius(&Dist::Approx(0.3)), 4);
        assert_eq!(sphere_index_from_radius(&Dist::zero()), 1);
    }

    #[test]
    fn select_nn_matches_documented_cases() {
        use crate::space::SignedHarmonicSpace;
        let space = SignedHarmonicSpace::new(8).unwrap();
        let x = Point::zero();
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        // Unique minimizer.
        let samples = pts(&[(1, 2), (-1, 2), (1, 3)]);
        let (i, p) =
            select_nn(&space, &x, &samples, &TieBreakRule::lexicographic(), &mut rng).unwrap();
        assert_eq!(i, 2);
        assert_eq!(p, Point::atom_i64(1, 3));

        // Tie resolved by index.
        let tied = pts(&[(1, 2), (-1, 2)]);
        let (i, _) =
            select_nn(&space, &x, &tied, &TieBreakRule::lexicographic(), &mut rng).unwrap();
        assert_eq!(i, 0);

        // Positive preference wins regardless of order.
        let (_, p) =
            select_nn(&space, &x, &tied, &TieBreakRule::positive_preference(), &mut rng).unwrap();
        assert_eq!(p, Point::atom_i64(1, 2));
        let reversed = pts(&[(-1, 2), (1, 2)]);
        let (i, p) =
            select_nn(&space, &x, &reversed, &TieBreakRule::positive_preference(), &mut rng)
                .unwrap();
        assert_eq!(i, 1);
        assert_eq!(p, Point::atom_i64(1, 2));

        // Empty sample list is an error.
        assert!(select_nn(&space, &x, &[], &TieBreakRule::lexicographic(), &mut rng).is_err());
    }

    #[test]
    fn select_nn_minimality_over_random_instances() {
        use crate::space::FiniteAtomicSpace;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let space = FiniteAtomicSpace::from_line(vec![
            ("a".into(), parse_rational("-2").unwrap(), parse_rational("1/4").unwrap()),
            ("b".into(), parse_rational("-1/3").unwrap(), parse_rational("1/4").unwrap()),
            ("c".into(), parse_rational("1/3").unwrap(), parse_rational("1/4").unwrap()),
            ("d".into(), parse_rational("5/7").unwrap(), parse_rational("1/4").unwrap()),
        ])
        .unwrap();
        let x = Point::atom_i64(1, 10);
        for _ in 0..2000 {
            let m = 1 + (rand::Rng::random_range(&mut rng, 0..6u32)) as usize;
            let samples: Vec<Point> = (0..m).map(|_| space.sample(&mut rng)).collect();
            let (i, p) =
                select_nn(&space, &x, &samples, &TieBreakRule::uniform_random(), &mut rng)
                    .unwrap();
            let d_chosen = space.distance(&x, &p);
            let d_min = samples.iter().map(|s| space.distance(&x, s)).min().unwrap();
            assert_eq!(d_chosen, d_min);
            assert_eq!(samples[i], p);
        }
    }

    #[test]
    fn prefer_atom_rule_targets_its_label() {
        use crate::space::FiniteAtomicSpace;
        let space = FiniteAtomicSpace::from_table(
            vec!["x".into(), "a".into(), "b".into()],
            vec![
                parse_rational("0").unwrap(),
                parse_rational("1/2").unwrap(),
                parse_rational("1/2").unwrap(),
            ],
            vec![
                vec![parse_rational("0").unwrap(), parse_rational("1").unwrap(), parse_rational("1").unwrap()],
                vec![parse_rational("1").unwrap(), parse_rational("0").unwrap(), parse_rational("1").unwrap()],
                vec![parse_rational("1").unwrap(), parse_rational("1").unwrap(), parse_rational("0").unwrap()],
            ],
        )
        .unwrap();
        let rule = TieBreakRule::prefer_atom("b");
        let samples = vec![Point::Labeled(1), Point::Labeled(2), Point::Labeled(1)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (i, p) = select_nn(&space, &Point::Labeled(0), &samples, &rule, &mut rng).unwrap();
        assert_eq!(i, 1);
        assert_eq!(p, Point::Labeled(2));
        // Without the preferred atom present, smallest index wins.
        let samples = vec![Point::Labeled(1), Point::Labeled(1)];
        let (i, _) = select_nn(&space, &Point::Labeled(0), &samples, &rule, &mut rng).unwrap();
        assert_eq!(i, 0);
    }
}
