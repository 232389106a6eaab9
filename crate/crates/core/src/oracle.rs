//! Exhaustive enumeration over all ordered sample configurations.
//!
//! For a small atomic space and sample size `m`, every one of the
//! `|atoms|^m` ordered configurations is visited, the nearest neighbor is
//! resolved through the rule's exact tie law, and probabilities are
//! accumulated in exact rational arithmetic. The result is a ground truth
//! the fast closed-form engine is checked against.

use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{CoreError, Result};
use crate::space::{Dist, MetricMeasureSpace, Point};
use crate::tiebreak::{NnCandidate, TieBreakRule};

/// Cap on how many ordered configurations an enumeration may visit.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationBudget {
    pub max_configurations: f64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget { max_configurations: 1e7 }
    }
}

struct SupportAtom {
    atom_index: usize,
    weight: BigRational,
    distance: Dist,
}

fn support_atoms(
    space: &dyn MetricMeasureSpace,
    x: &Point,
) -> Result<Vec<SupportAtom>> {
    let atoms = space.atoms().ok_or_else(|| {
        CoreError::AtomicRequired("enumeration needs an atom list".into())
    })?;
    let mut out = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        let w = a.exact_weight.clone().ok_or_else(|| {
            CoreError::AtomicRequired(format!(
                "atom {} lacks an exact weight, enumeration would not be exact",
                a.label
            ))
        })?;
        if w.is_positive() {
            out.push(SupportAtom {
                atom_index: i,
                weight: w,
                distance: space.distance(x, &a.point),
            });
        }
    }
    if out.is_empty() {
        return Err(CoreError::Construction("space has no positive-weight atoms".into()));
    }
    Ok(out)
}

fn check_budget(support: usize, m: u32, anchors: u64, budget: &EnumerationBudget) -> Result<()> {
    let needed = anchors as f64 * (support as f64).powi(m as i32);
    if needed > budget.max_configurations {
        return Err(CoreError::BudgetExceeded { needed, budget: budget.max_configurations });
    }
    Ok(())
}

/// Exact law of the nearest neighbor of `x` under `m` independent draws,
/// as one probability per atom of the space (zero for atoms that never win).
/// Probabilities sum to exactly one.
pub fn brute_force_nn_distribution(
    space: &dyn MetricMeasureSpace,
    x: &Point,
    rule: &TieBreakRule,
    m: u32,
    budget: &EnumerationBudget,
) -> Result<Vec<BigRational>> {
    if m == 0 {
        return Err(CoreError::InvalidParam("sample size must be at least 1".into()));
    }
    let support = support_atoms(space, x)?;
    check_budget(support.len(), m, 1, budget)?;
    let atoms = space.atoms().unwrap();
    let mut law = vec![BigRational::zero(); atoms.len()];

    let k = support.len();
    let m = m as usize;
    let mut config = vec![0usize; m];
    loop {
        // Probability of this ordered configuration.
        let mut prob = BigRational::one();
        for &c in &config {
            prob *= &support[c].weight;
        }
        // Tied draws at the minimal distance, in sample order.
        let min = config.iter().map(|&c| &support[c].distance).min().unwrap().clone();
        let cands: Vec<NnCandidate<'_>> = config
            .iter()
            .enumerate()
            .filter(|(_, &c)| support[c].distance == min)
            .map(|(sample_index, &c)| {
                let a = &atoms[support[c].atom_index];
                NnCandidate { sample_index, point: &a.point, atom: Some(a) }
            })
            .collect();
        let tied: Vec<usize> = config
            .iter()
            .filter(|&&c| support[c].distance == min)
            .map(|&c| support[c].atom_index)
            .collect();
        let shares = rule.tie_law(&cands, &min).ok_or_else(|| {
            CoreError::UnsupportedRule { rule: rule.name(), atoms: tied.len() }
        })?;
        for (share, atom_index) in shares.into_iter().zip(tied) {
            if !share.is_zero() {
                law[atom_index] += &prob * share;
            }
        }
        // Odometer step through all |support|^m configurations.
        let mut pos = 0;
        loop {
            if pos == m {
                let total: BigRational = law.iter().sum();
                debug_assert!(total.is_one());
                return Ok(law);
            }
            config[pos] += 1;
            if config[pos] < k {
                break;
            }
            config[pos] = 0;
            pos += 1;
        }
    }
}

/// Law of the nearest neighbor conditioned on it sitting at distance
/// exactly `radius`, restricted to the atoms of that sphere.
/// Returns `(atom_index, probability)` pairs.
pub fn brute_force_conditional_on_sphere(
    space: &dyn MetricMeasureSpace,
    x: &Point,
    rule: &TieBreakRule,
    m: u32,
    radius: &Dist,
    budget: &EnumerationBudget,
) -> Result<Vec<(usize, BigRational)>> {
    let law = brute_force_nn_distribution(space, x, rule, m, budget)?;
    let atoms = space.atoms().unwrap();
    let on_sphere: Vec<usize> = (0..atoms.len())
        .filter(|&i| {
            atoms[i].exact_weight.as_ref().map(|w| w.is_positive()).unwrap_or(false)
                && space.distance(x, &atoms[i].point) == *radius
        })
        .collect();
    let total: BigRational = on_sphere.iter().map(|&i| &law[i]).sum();
    if total.is_zero() {
        return Err(CoreError::UndefinedRatio(format!(
            "nearest neighbor never lands at distance {radius}"
        )));
    }
    Ok(on_sphere.into_iter().map(|i| (i, &law[i] / &total)).collect())
}

/// Exact expected absolute deviation of the field at the nearest neighbor:
/// `E |eta(NN) - eta(x)|`, enumerated over all configurations.
pub fn brute_force_nn_error(
    space: &dyn MetricMeasureSpace,
    field: &crate::space::ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    m: u32,
    budget: &EnumerationBudget,
) -> Result<BigRational> {
    let law = brute_force_nn_distribution(space, x, rule, m, budget)?;
    let atoms = space.atoms().unwrap();
    let mut total = BigRational::zero();
    for (i, p) in law.iter().enumerate() {
        if !p.is_zero() {
            total += p * field.abs_dev_exact(&atoms[i].point)?;
        }
    }
    Ok(total)
}

/// Exact misclassification risk of the 1-nearest-neighbor predictor when
/// labels are Bernoulli with success probability `eta`:
/// the anchor runs over every positive-weight atom, the label of the anchor
/// and of its nearest neighbor are drawn independently.
pub fn brute_force_risk(
    space: &dyn MetricMeasureSpace,
    eta: &crate::space::ScalarField,
    rule: &TieBreakRule,
    m: u32,
    budget: &EnumerationBudget,
) -> Result<BigRational> {
    let atoms = space.atoms().ok_or_else(|| {
        CoreError::AtomicRequired("risk enumeration needs an atom list".into())
    })?;
    let anchors: Vec<usize> = (0..atoms.len())
        .filter(|&i| atoms[i].exact_weight.as_ref().map(|w| w.is_positive()).unwrap_or(false))
        .collect();
    let support = anchors.len();
    check_budget(support, m, support as u64, budget)?;
    let one = BigRational::one();
    let mut risk = BigRational::zero();
    for &ai in &anchors {
        let x = atoms[ai].point.clone();
        let eta_x = eta.evaluate_exact(&x)?;
        let law = brute_force_nn_distribution(space, &x, rule, m, budget)?;
        for (j, p) in law.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let eta_nn = eta.evaluate_exact(&atoms[j].point)?;
            let mismatch = &eta_x * (&one - &eta_nn) + (&one - &eta_x) * &eta_nn;
            risk += atoms[ai].exact_weight.as_ref().unwrap() * p * mismatch;
        }
    }
    Ok(risk)
}
