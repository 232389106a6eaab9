//! Nearest-neighbor laws: exact closed forms, Monte Carlo, and the
//! inequalities that control the estimation error.
//!
//! The central exact object is the per-atom law of the nearest neighbor,
//! assembled sphere by sphere from the distance table. For index-selector
//! rules the conditional law on each sphere equals the measure's own
//! conditional law; for the biased rules the two-atom closed forms apply.
//! Everything else (error, field mean at the neighbor, distance law) is an
//! integral against that law.

use num::rational::BigRational;
use num::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::space::{Dist, MetricMeasureSpace, Point, ScalarField, SphereRow, SphereTable};
use crate::tiebreak::{NnCandidate, TieBreakRule};
use crate::wide::{exp_neg, pow_diff, power_difference, WideFloat};

// ---------------------------------------------------------------------------
// Exact engine
// ---------------------------------------------------------------------------

/// Exact law of the nearest neighbor over the atoms of the space:
/// `(atom_index, P(NN = atom))`, listed sphere by sphere in increasing
/// distance from `x`. Probabilities sum to (total mass)^m.
///
/// Supported exactly: index-selector rules on any atomic space;
/// `PositivePreference` and `BiasedBernoulli` when every sphere carries at
/// most two atoms, one of each sign; `PreferAtom` on any atomic space.
pub fn exact_nn_atom_distribution(
    space: &dyn MetricMeasureSpace,
    x: &Point,
    rule: &TieBreakRule,
    m: u64,
) -> Result<Vec<(usize, WideFloat)>> {
    if m == 0 {
        return Err(CoreError::InvalidParam("sample size must be at least 1".into()));
    }
    let table = SphereTable::new(space, x)?;
    let atoms = space.atoms().ok_or_else(|| {
        CoreError::AtomicRequired("exact nearest-neighbor law needs an atom list".into())
    })?;
    let unit_total = table.total_exact().map_or(false, One::is_one);
    let mut law: Vec<(usize, WideFloat)> = Vec::new();

    for row in table.rows() {
        let p_row = row_sphere_prob(row, unit_total, m);
        if rule.is_index_selector() {
            // Conditional law on the sphere = measure conditional law.
            for &a in &row.members {
                let share = share_of(atoms[a].exact_weight.as_ref(), &atoms[a].weight, row);
                law.push((a, &p_row * &share));
            }
            continue;
        }
        match rule {
            TieBreakRule::PreferAtom { label } => {
                prefer_atom_row(atoms, row, label, m, unit_total, &p_row, &mut law);
            }
            TieBreakRule::PositivePreference | TieBreakRule::BiasedBernoulli { .. } => {
                biased_row(atoms, row, rule, m, unit_total, &p_row, &mut law)?;
            }
            _ => unreachable!("index selectors handled above"),
        }
    }
    Ok(law)
}

/// `P(min distance of m draws lands on this sphere)`. For a probability
/// measure the prefix mass below the radius is the exact complement of the
/// suffix mass, which keeps bases within a rounding of one at full relative
/// precision; otherwise fall back to direct powering.
fn row_sphere_prob(row: &SphereRow, unit_total: bool, m: u64) -> WideFloat {
    if unit_total {
        power_difference(row.ge, row.open, row.gt, row.sphere, m)
    } else {
        pow_diff(row.ge, row.gt, row.sphere, m)
    }
}

/// `w_a / P(S_r)`, from exact rationals when both sides carry them.
fn share_of(
    exact_weight: Option<&BigRational>,
    weight: &WideFloat,
    row: &SphereRow,
) -> WideFloat {
    match (exact_weight, row.sphere_exact.as_ref()) {
        (Some(w), Some(s)) => WideFloat::from_big_ratio(&(w / s)),
        _ => weight / &row.sphere,
    }
}

fn prefer_atom_row(
    atoms: &[crate::space::SpaceAtom],
    row: &SphereRow,
    label: &str,
    m: u64,
    unit_total: bool,
    p_row: &WideFloat,
    law: &mut Vec<(usize, WideFloat)>,
) {
    let preferred = row.members.iter().copied().find(|&a| atoms[a].label == label);
    match preferred {
        None => {
            // Fallback on this sphere is lexicographic: measure conditional.
            for &a in &row.members {
                let share = share_of(atoms[a].exact_weight.as_ref(), &atoms[a].weight, row);
                law.push((a, p_row * &share));
            }
        }
        Some(pref) => {
            // The preferred atom wins whenever it is drawn at all among the
            // tied configurations: ge^m - (ge - w_pref)^m.
            let w_pref = &atoms[pref].weight;
            let ge_minus = exact_or(
                row.ge_exact.as_ref(),
                atoms[pref].exact_weight.as_ref(),
                |ge, w| ge - w,
                || &row.ge - w_pref,
            );
            let p_pref = if unit_total {
                power_difference(row.ge, row.open, ge_minus, *w_pref, m)
            } else {
                pow_diff(row.ge, ge_minus, *w_pref, m)
            };
            law.push((pref, p_pref));
            // The rest split what is left of the sphere hit probability
            // proportionally to weight: (ge - w_pref)^m - gt^m in total.
            if row.members.len() > 1 {
                let rest_sphere = exact_or(
                    row.sphere_exact.as_ref(),
                    atoms[pref].exact_weight.as_ref(),
                    |s, w| s - w,
                    || &row.sphere - w_pref,
                );
                let p_rest = if unit_total {
                    let open_plus = exact_or(
                        row.open_exact.as_ref(),
                        atoms[pref].exact_weight.as_ref(),
                        |o, w| o + w,
                        || &row.open + w_pref,
                    );
                    power_difference(ge_minus, open_plus, row.gt, rest_sphere, m)
                } else {
                    pow_diff(ge_minus, row.gt, rest_sphere, m)
                };
                for &a in &row.members {
                    if a == pref {
                        continue;
                    }
                    let share = match (
                        atoms[a].exact_weight.as_ref(),
                        row.sphere_exact.as_ref(),
                        atoms[pref].exact_weight.as_ref(),
                    ) {
                        (Some(w), Some(s), Some(wp)) => {
                            WideFloat::from_big_ratio(&(w / (s - wp)))
                        }
                        _ => &atoms[a].weight / &rest_sphere,
                    };
                    law.push((a, &p_rest * &share));
                }
            }
        }
    }
}

fn biased_row(
    atoms: &[crate::space::SpaceAtom],
    row: &SphereRow,
    rule: &TieBreakRule,
    m: u64,
    unit_total: bool,
    p_row: &WideFloat,
    law: &mut Vec<(usize, WideFloat)>,
) -> Result<()> {
    if row.members.len() == 1 {
        law.push((row.members[0], p_row.clone()));
        return Ok(());
    }
    if row.members.len() != 2 {
        return Err(CoreError::UnsupportedRule {
            rule: rule.name(),
            atoms: row.members.len(),
        });
    }
    let is_pos = |a: usize| {
        atoms[a]
            .point
            .coord_exact()
            .map(|c| c.is_positive())
            .unwrap_or(false)
    };
    let (pos, neg) = match (is_pos(row.members[0]), is_pos(row.members[1])) {
        (true, false) => (row.members[0], row.members[1]),
        (false, true) => (row.members[1], row.members[0]),
        _ => {
            return Err(CoreError::UnsupportedRule {
                rule: rule.name(),
                atoms: row.members.len(),
            })
        }
    };
    let radius = Dist::Exact(row.radius.clone());
    let w_plus = rule
        .positive_tie_weight(&radius)
        .expect("biased rules define a positive tie weight");
    let w_minus = BigRational::from_integer(1.into()) - &w_plus;

    // P(only the positive atom shows up at the minimal distance), and
    // symmetrically for the negative one. With two atoms on the sphere,
    // 1 - (gt + w_winner) is the prefix mass plus the other atom's weight.
    let only = |winner: usize, other: usize| -> WideFloat {
        let w = &atoms[winner].weight;
        let ge_w = exact_or(
            row.gt_exact.as_ref(),
            atoms[winner].exact_weight.as_ref(),
            |gt, wx| gt + wx,
            || &row.gt + w,
        );
        if unit_total {
            let comp = exact_or(
                row.open_exact.as_ref(),
                atoms[other].exact_weight.as_ref(),
                |o, wo| o + wo,
                || &row.open + &atoms[other].weight,
            );
            power_difference(ge_w, comp, row.gt, *w, m)
        } else {
            pow_diff(ge_w, row.gt, *w, m)
        }
    };
    let only_pos = only(pos, neg);
    let only_neg = only(neg, pos);
    let both = p_row
        .checked_sub(&only_pos)
        .and_then(|d| d.checked_sub(&only_neg))
        .unwrap_or(WideFloat::ZERO);

    let p_pos = &only_pos + &(&WideFloat::from_big_ratio(&w_plus) * &both);
    let p_neg = &only_neg + &(&WideFloat::from_big_ratio(&w_minus) * &both);
    law.push((pos, p_pos));
    law.push((neg, p_neg));
    Ok(())
}

fn exact_or(
    a: Option<&BigRational>,
    b: Option<&BigRational>,
    f: impl Fn(&BigRational, &BigRational) -> BigRational,
    fallback: impl Fn() -> WideFloat,
) -> WideFloat {
    match (a, b) {
        (Some(a), Some(b)) => WideFloat::from_big_ratio(&f(a, b)),
        _ => fallback(),
    }
}

/// Exact `E |eta(NN) - eta(x)|` for `m` independent draws.
pub fn exact_nn_error(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    m: u64,
) -> Result<WideFloat> {
    let law = exact_nn_atom_distribution(space, x, rule, m)?;
    let atoms = space.atoms().unwrap();
    let mut total = WideFloat::ZERO;
    for (a, p) in &law {
        let dev = field.abs_dev_exact(&atoms[*a].point)?;
        if !dev.is_zero() {
            total = &total + &(p * &WideFloat::from_big_ratio(&dev));
        }
    }
    Ok(total)
}

/// Exact `E[eta(NN)]` for `m` independent draws; the field must be
/// non-negative.
pub fn exact_nn_field_mean(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    m: u64,
) -> Result<WideFloat> {
    let law = exact_nn_atom_distribution(space, x, rule, m)?;
    let atoms = space.atoms().unwrap();
    let mut total = WideFloat::ZERO;
    for (a, p) in &law {
        let v = field.evaluate_exact(&atoms[*a].point)?;
        if v.is_negative() {
            return Err(CoreError::InvalidParam(
                "field mean at the neighbor needs a non-negative field".into(),
            ));
        }
        if !v.is_zero() {
            total = &total + &(p * &WideFloat::from_big_ratio(&v));
        }
    }
    Ok(total)
}

/// Law of the nearest-neighbor *distance*: `(radius, P(min distance = radius))`
/// per sphere of the distance table. The entries sum to (total mass)^m.
pub fn nn_distance_distribution(
    space: &dyn MetricMeasureSpace,
    x: &Point,
    m: u64,
) -> Result<Vec<(Dist, WideFloat)>> {
    if m == 0 {
        return Err(CoreError::InvalidParam("sample size must be at least 1".into()));
    }
    let table = SphereTable::new(space, x)?;
    let unit_total = table.total_exact().map_or(false, One::is_one);
    Ok(table
        .rows()
        .iter()
        .map(|row| {
            (
                Dist::Exact(row.radius.clone()),
                row_sphere_prob(row, unit_total, m),
            )
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Online state
// ---------------------------------------------------------------------------

/// Running nearest-neighbor state over a stream of samples: the current
/// best distance (`None` until the first sample, meaning "infinite") and the
/// field value at the current best sample. Strict improvement only, so tied
/// later samples never replace the incumbent — the stream order is the
/// lexicographic tie-break.
#[derive(Clone, Debug, Default)]
pub struct OnlineNnState {
    pub best_distance: Option<Dist>,
    pub best_value: f64,
    pub seen: u64,
}

impl OnlineNnState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one sample; keeps the incumbent unless strictly closer.
    pub fn observe(&mut self, distance: Dist, value: f64) {
        self.seen += 1;
        let improves = match &self.best_distance {
            None => true,
            Some(best) => distance < *best,
        };
        if improves {
            self.best_distance = Some(distance);
            self.best_value = value;
        }
    }
}

/// Runs the online state over a full stream.
pub fn online_nn_value(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    stream: &[Point],
) -> OnlineNnState {
    let mut state = OnlineNnState::new();
    for s in stream {
        state.observe(space.distance(x, s), field.evaluate(s));
    }
    state
}

// ---------------------------------------------------------------------------
// Deterministic Monte Carlo
// ---------------------------------------------------------------------------

const BATCH: u64 = 1024;

#[derive(Clone, Copy, Debug)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn new() -> Self {
        Kahan { sum: 0.0, carry: 0.0 }
    }
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Mean and standard error of `f(trial_index)` over `trials` evaluations.
///
/// Trials are grouped into fixed batches; each batch is summed with
/// compensated addition and batches are merged in index order, so the result
/// is byte-identical no matter how many worker threads run the batches.
pub(crate) fn deterministic_mean<F>(trials: u64, f: F) -> (f64, f64)
where
    F: Fn(u64) -> f64 + Sync,
{
    assert!(trials > 0);
    let n_batches = trials.div_ceil(BATCH);
    let batch_sums = |b: u64| -> (f64, f64) {
        let lo = b * BATCH;
        let hi = (lo + BATCH).min(trials);
        let mut s = Kahan::new();
        let mut s2 = Kahan::new();
        for t in lo..hi {
            let v = f(t);
            s.add(v);
            s2.add(v * v);
        }
        (s.sum, s2.sum)
    };

    #[cfg(feature = "parallel")]
    let partials: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        (0..n_batches).into_par_iter().map(batch_sums).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<(f64, f64)> = (0..n_batches).map(batch_sums).collect();

    let mut s = Kahan::new();
    let mut s2 = Kahan::new();
    for (a, b) in partials {
        s.add(a);
        s2.add(b);
    }
    let n = trials as f64;
    let mean = s.sum / n;
    let var = ((s2.sum - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Per-trial random streams: trial `t` draws data from stream `2t` and
/// tie-break randomness from stream `2t + 1` of the seeded generator.
pub(crate) fn trial_rngs(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut data = ChaCha8Rng::seed_from_u64(seed);
    data.set_stream(2 * trial);
    let mut tie = ChaCha8Rng::seed_from_u64(seed);
    tie.set_stream(2 * trial + 1);
    (data, tie)
}

/// Monte Carlo estimate of `E |eta(NN) - eta(x)|`: mean and standard error.
///
/// Deterministic for a fixed seed regardless of worker count.
pub fn mc_nn_error(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if m == 0 || trials == 0 {
        return Err(CoreError::InvalidParam("need m >= 1 and trials >= 1".into()));
    }
    if let Some(atoms) = space.atoms() {
        // Atomic fast path: draws are atom indices, distances are row ranks.
        let table = SphereTable::new(space, x)?;
        let mut rank = vec![usize::MAX; atoms.len()];
        for (r, row) in table.rows().iter().enumerate() {
            for &a in &row.members {
                rank[a] = r;
            }
        }
        let radii: Vec<Dist> = table
            .rows()
            .iter()
            .map(|row| Dist::Exact(row.radius.clone()))
            .collect();
        let mut dev = vec![0.0f64; atoms.len()];
        for (i, a) in atoms.iter().enumerate() {
            if a.exact_weight.as_ref().map(|w| w.is_positive()).unwrap_or(true) {
                dev[i] = crate::space::ratio_to_f64(&field.abs_dev_exact(&a.point)?);
            }
        }
        let run = |t: u64| -> f64 {
            let (mut data, mut tie) = trial_rngs(seed, t);
            let mut best = usize::MAX;
            let mut tied: Vec<(usize, usize)> = Vec::new();
            for i in 0..m as usize {
                let a = space
                    .sample_atom_index(&mut data)
                    .expect("atomic space samples atoms");
                let r = rank[a];
                if r < best {
                    best = r;
                    tied.clear();
                    tied.push((i, a));
                } else if r == best {
                    tied.push((i, a));
                }
            }
            let winner = if tied.len() == 1 {
                tied[0].1
            } else {
                let cands: Vec<NnCandidate<'_>> = tied
                    .iter()
                    .map(|&(i, a)| NnCandidate {
                        sample_index: i,
                        point: &atoms[a].point,
                        atom: Some(&atoms[a]),
                    })
                    .collect();
                let pick = rule.choose(&cands, &radii[best], &mut tie);
                tied.iter().find(|&&(i, _)| i == pick).unwrap().1
            };
            dev[winner]
        };
        Ok(deterministic_mean(trials, run))
    } else {
        let anchor = field.anchor_value_f64();
        let run = |t: u64| -> f64 {
            let (mut data, mut tie) = trial_rngs(seed, t);
            let mut best: Option<Dist> = None;
            let mut tied: Vec<(usize, Point)> = Vec::new();
            for i in 0..m as usize {
                let p = space.sample(&mut data);
                let d = space.distance(x, &p);
                match &best {
                    Some(b) if d > *b => {}
                    Some(b) if d == *b => tied.push((i, p)),
                    _ => {
                        best = Some(d);
                        tied.clear();
                        tied.push((i, p));
                    }
                }
            }
            let winner = if tied.len() == 1 {
                &tied[0].1
            } else {
                let cands: Vec<NnCandidate<'_>> = tied
                    .iter()
                    .map(|(i, p)| NnCandidate { sample_index: *i, point: p, atom: None })
                    .collect();
                let pick = rule.choose(&cands, best.as_ref().unwrap(), &mut tie);
                &tied.iter().find(|(i, _)| *i == pick).unwrap().1
            };
            (field.evaluate(winner) - anchor).abs()
        };
        Ok(deterministic_mean(trials, run))
    }
}

// ---------------------------------------------------------------------------
// Convergence curves
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveMethod {
    Exact,
    MonteCarlo,
}

impl std::fmt::Display for CurveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveMethod::Exact => write!(f, "exact"),
            CurveMethod::MonteCarlo => write!(f, "mc"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub m: u64,
    pub value: f64,
    pub stderr: f64,
    pub method: CurveMethod,
}

/// Error-versus-sample-size curve; sample sizes strictly increase.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceCurve {
    points: Vec<CurvePoint>,
}

impl ConvergenceCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: CurvePoint) -> Result<()> {
        if let Some(last) = self.points.last() {
            if point.m <= last.m {
                return Err(CoreError::InvalidParam(format!(
                    "curve sample sizes must strictly increase: {} after {}",
                    point.m, last.m
                )));
            }
        }
        self.points.push(point);
        Ok(())
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }
}

/// How curve values are produced.
#[derive(Clone, Copy, Debug)]
pub enum CurveMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
    /// Exact when the rule/space pair admits it, Monte Carlo otherwise.
    Auto { trials: u64, seed: u64 },
}

/// Computes the nearest-neighbor error curve over a grid of sample sizes.
pub fn nn_error_curve(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    ms: &[u64],
    mode: CurveMode,
) -> Result<ConvergenceCurve> {
    let mut curve = ConvergenceCurve::new();
    for &m in ms {
        let point = match mode {
            CurveMode::Exact => CurvePoint {
                m,
                value: exact_nn_error(space, field, x, rule, m)?.to_f64(),
                stderr: 0.0,
                method: CurveMethod::Exact,
            },
            CurveMode::MonteCarlo { trials, seed } => {
                let (value, stderr) = mc_nn_error(space, field, x, rule, m, trials, seed)?;
                CurvePoint { m, value, stderr, method: CurveMethod::MonteCarlo }
            }
            CurveMode::Auto { trials, seed } => match exact_nn_error(space, field, x, rule, m) {
                Ok(v) => CurvePoint {
                    m,
                    value: v.to_f64(),
                    stderr: 0.0,
                    method: CurveMethod::Exact,
                },
                Err(CoreError::UnsupportedRule { .. }) | Err(CoreError::AtomicRequired(_)) => {
                    let (value, stderr) = mc_nn_error(space, field, x, rule, m, trials, seed)?;
                    CurvePoint { m, value, stderr, method: CurveMethod::MonteCarlo }
                }
                Err(e) => return Err(e),
            },
        };
        curve.push(point)?;
    }
    Ok(curve)
}

// ---------------------------------------------------------------------------
// The envelope function f_m(t) = m t (1-t)^{m-1}
// ---------------------------------------------------------------------------

/// Evaluates `f_m(t) = m t (1-t)^{m-1}`, the probability-weight envelope of
/// a sphere of mass `t` under `m` draws.
pub fn fm_eval(m: u64, t: f64) -> f64 {
    if m == 1 {
        return t;
    }
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return if m == 1 { 1.0 } else { 0.0 };
    }
    m as f64 * t * ((m as f64 - 1.0) * (-t).ln_1p()).exp()
}

#[derive(Clone, Copy, Debug)]
pub struct FmEnvelope {
    pub m: u64,
    /// Argmax of `f_m`: `1/m`.
    pub t_peak: f64,
    /// Maximum value `(1 - 1/m)^{m-1}`, always above `1/e`.
    pub peak: f64,
    /// Left endpoint of `{t : f_m(t) >= 1/e}`.
    pub lower: f64,
    /// Right endpoint of `{t : f_m(t) >= 1/e}`.
    pub upper: f64,
}

/// Peak and `1/e`-level set of `f_m`, endpoints located by bisection to
/// about `1e-14` absolute.
pub fn fm_envelope(m: u64) -> FmEnvelope {
    assert!(m >= 1);
    let t_peak = 1.0 / m as f64;
    let peak = if m == 1 { 1.0 } else { fm_eval(m, t_peak) };
    let target = (-1.0f64).exp();
    // Left endpoint: f_m increases on [0, 1/m] from 0 past the target.
    let mut lo = 0.0;
    let mut hi = t_peak;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if fm_eval(m, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lower = 0.5 * (lo + hi);
    // Right endpoint: f_m decreases on [1/m, 1]; f_1(1) = 1 keeps b_1 = 1.
    let upper = if fm_eval(m, 1.0) >= target {
        1.0
    } else {
        let mut lo = t_peak;
        let mut hi = 1.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if fm_eval(m, mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    FmEnvelope { m, t_peak, peak, lower, upper }
}

// ---------------------------------------------------------------------------
// Inequality checkers
// ---------------------------------------------------------------------------

/// One grid point of the ratio-versus-error comparison.
#[derive(Clone, Debug)]
pub struct VsPoint {
    pub radius: Dist,
    pub m: u64,
    /// log2 of ratio(r) * m * P(closed ball) * (1 - P(closed ball))^{m-1}.
    pub lhs_log2: f64,
    /// log2 of the exact nearest-neighbor error at m.
    pub rhs_log2: f64,
    pub holds: bool,
    /// True when P(closed ball) = 1 makes the bound vacuous.
    pub skipped: bool,
}

/// Checks, at every sphere radius and each sample size, that the local
/// average deviation is controlled by the nearest-neighbor error:
/// `ratio(r) <= error(m) / (m P(Br) (1 - P(Br))^{m-1})`, compared in the
/// division-free form `num(r) * m * (1 - P(Br))^{m-1} <= error(m)` where
/// `num(r)` is the deviation integral over the closed ball.
pub fn vs_inequality_check(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    ms: &[u64],
) -> Result<Vec<VsPoint>> {
    let table = SphereTable::new(space, x)?;
    let atoms = space.atoms().ok_or_else(|| {
        CoreError::AtomicRequired("the ratio-error comparison runs on atomic spaces".into())
    })?;
    // Deviation integral over closed balls, cumulatively per row.
    let mut num_closed: Vec<WideFloat> = Vec::new();
    let mut acc = WideFloat::ZERO;
    for row in table.rows() {
        for &a in &row.members {
            let dev = field.abs_dev_exact(&atoms[a].point)?;
            if !dev.is_zero() {
                acc = &acc + &(&atoms[a].weight * &WideFloat::from_big_ratio(&dev));
            }
        }
        num_closed.push(acc.clone());
    }
    // At m = 1 the comparison is an identity, so a last-bit rounding may land
    // on either side; the slack only absorbs that.
    let slack = WideFloat::from_f64(1.0 + 1e-11);
    let mut out = Vec::new();
    for &m in ms {
        let err = exact_nn_error(space, field, x, rule, m)?;
        for (i, row) in table.rows().iter().enumerate() {
            // 1 - P(closed ball at r) is exactly the strict-exterior mass.
            let exterior = &row.gt;
            if exterior.is_zero() && m > 1 {
                out.push(VsPoint {
                    radius: Dist::Exact(row.radius.clone()),
                    m,
                    lhs_log2: f64::NEG_INFINITY,
                    rhs_log2: err.log2(),
                    holds: true,
                    skipped: true,
                });
                continue;
            }
            let lhs = &(&num_closed[i] * &WideFloat::from_u64(m)) * &exterior.powi(m - 1);
            out.push(VsPoint {
                radius: Dist::Exact(row.radius.clone()),
                m,
                lhs_log2: lhs.log2(),
                rhs_log2: err.log2(),
                holds: lhs <= &err * &slack,
                skipped: false,
            });
        }
    }
    Ok(out)
}

/// One grid point of the three geometric bounds.
#[derive(Clone, Debug)]
pub struct GeomBoundRow {
    pub radius: Dist,
    pub m: u64,
    /// Error mass with the neighbor strictly inside the ball, and its bound
    /// `m * integral of deviation over the open ball`.
    pub inner_term: f64,
    pub inner_bound: f64,
    /// Error mass with the neighbor on the sphere, and its bound
    /// `2B m P(Sr) exp(-(m-1) P(Br))`.
    pub sphere_term: f64,
    pub sphere_bound: f64,
    /// Error mass with the neighbor strictly outside, and its bound
    /// `2B exp(-m P(closed ball))`.
    pub exterior_term: f64,
    pub exterior_bound: f64,
    pub holds: bool,
}

/// Splits the exact nearest-neighbor error at radius `r` into inner, sphere
/// and exterior parts and checks each against its geometric bound.
pub fn geom_bound_check(
    space: &dyn MetricMeasureSpace,
    field: &ScalarField,
    x: &Point,
    rule: &TieBreakRule,
    ms: &[u64],
) -> Result<Vec<GeomBoundRow>> {
    let table = SphereTable::new(space, x)?;
    let atoms = space.atoms().ok_or_else(|| {
        CoreError::AtomicRequired("the geometric bounds run on atomic spaces".into())
    })?;
    let rows = table.rows();
    // Per-row measure-side deviation integrals (for bound (i)).
    let mut row_measure_dev: Vec<WideFloat> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut acc = WideFloat::ZERO;
        for &a in &row.members {
            let dev = field.abs_dev_exact(&atoms[a].point)?;
            if !dev.is_zero() {
                acc = &acc + &(&atoms[a].weight * &WideFloat::from_big_ratio(&dev));
            }
        }
        row_measure_dev.push(acc);
    }
    let two_b = WideFloat::from_f64(2.0 * field.bound());
    // Bound (i) is an identity at m = 1; the slack absorbs last-bit rounding.
    let slack = WideFloat::from_f64(1.0 + 1e-11);
    let mut out = Vec::new();
    for &m in ms {
        let law = exact_nn_atom_distribution(space, x, rule, m)?;
        // Error mass contributed per row, NN-side.
        let mut rank = vec![usize::MAX; atoms.len()];
        for (r, row) in rows.iter().enumerate() {
            for &a in &row.members {
                rank[a] = r;
            }
        }
        let mut row_nn_dev = vec![WideFloat::ZERO; rows.len()];
        for (a, p) in &law {
            let dev = field.abs_dev_exact(&atoms[*a].point)?;
            if !dev.is_zero() {
                let r = rank[*a];
                row_nn_dev[r] = &row_nn_dev[r] + &(p * &WideFloat::from_big_ratio(&dev));
            }
        }
        for (j, row) in rows.iter().enumerate() {
            let mut inner_term = WideFloat::ZERO;
            let mut inner_bound_int = WideFloat::ZERO;
            for i in 0..j {
                inner_term = &inner_term + &row_nn_dev[i];
                inner_bound_int = &inner_bound_int + &row_measure_dev[i];
            }
            let inner_bound = &inner_bound_int * &WideFloat::from_u64(m);
            let sphere_term = row_nn_dev[j].clone();
            let lambda_sphere = (m - 1) as f64 * row.open.to_f64();
            let sphere_bound = &(&(&two_b * &WideFloat::from_u64(m)) * &row.sphere)
                * &exp_neg(WideFloat::from_f64(lambda_sphere));
            let mut exterior_term = WideFloat::ZERO;
            for i in (j + 1)..rows.len() {
                exterior_term = &exterior_term + &row_nn_dev[i];
            }
            let lambda_ext = m as f64 * row.closed.to_f64();
            let exterior_bound = &two_b * &exp_neg(WideFloat::from_f64(lambda_ext));
            let holds = inner_term <= &inner_bound * &slack
                && sphere_term <= &sphere_bound * &slack
                && exterior_term <= &exterior_bound * &slack;
            out.push(GeomBoundRow {
                radius: Dist::Exact(row.radius.clone()),
                m,
                inner_term: inner_term.to_f64(),
                inner_bound: inner_bound.to_f64(),
                sphere_term: sphere_term.to_f64(),
                sphere_bound: sphere_bound.to_f64(),
                exterior_term: exterior_term.to_f64(),
                exterior_bound: exterior_bound.to_f64(),
                holds,
            });
        }
    }
    Ok(out)
}

/// One sphere/sample-size cell of the sandwich
/// `P(Sr)^m <= P(NN on Sr) <= m P(Sr)`.
#[derive(Clone, Debug)]
pub struct SandwichRow {
    pub radius: Dist,
    pub m: u64,
    pub lower_log2: f64,
    pub prob_log2: f64,
    pub upper_log2: f64,
    pub holds: bool,
}

/// Verifies the sandwich on every sphere of the distance table for every
/// sample size up to `m_max`.
pub fn sphere_sandwich_check(
    space: &dyn MetricMeasureSpace,
    x: &Point,
    m_max: u64,
) -> Result<Vec<SandwichRow>> {
    let table = SphereTable::new(space, x)?;
    let unit_total = table.total_exact().map_or(false, One::is_one);
    // The inequalities are strict mathematics; the slack only absorbs the
    // last-bit rounding of the three evaluated sides.
    let slack = WideFloat::from_f64(1.0 + 1e-11);
    let mut out = Vec::new();
    for row in table.rows() {
        for m in 1..=m_max {
            let prob = row_sphere_prob(row, unit_total, m);
            let lower = row.sphere.powi(m);
            let upper = &row.sphere * &WideFloat::from_u64(m);
            out.push(SandwichRow {
                radius: Dist::Exact(row.radius.clone()),
                m,
                lower_log2: lower.log2(),
                prob_log2: prob.log2(),
                upper_log2: upper.log2(),
                holds: lower <= &prob * &slack && prob <= &upper * &slack,
            });
        }
    }
    Ok(out)
}
