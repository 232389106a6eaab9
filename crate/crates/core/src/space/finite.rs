//! User-defined atomic spaces: finitely many labeled atoms with exact
//! rational weights, metrized either by coordinates on the line or by an
//! explicit distance table.

use num::rational::BigRational;
use num::{One, Signed, Zero};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::wide::WideFloat;

use super::{line_distance, AtomSampler, Dist, IntervalWindow, MetricMeasureSpace, Point, SpaceAtom};

/// How a [`FiniteAtomicSpace`] measures distances.
#[derive(Clone, Debug)]
pub enum FiniteMetric {
    /// Atoms sit on the real line at exact coordinates; distance is `|x-y|`.
    /// Distinct atoms may share a coordinate (their mutual distance is then
    /// zero and only tie-breaking separates them).
    Embedding,
    /// Explicit symmetric table over atom indices, validated at
    /// construction: zero diagonal, positive off-diagonal, symmetry, and
    /// the triangle inequality.
    Table(Vec<Vec<BigRational>>),
}

/// Finitely many labeled atoms with exact weights summing to one.
#[derive(Clone, Debug)]
pub struct FiniteAtomicSpace {
    atoms: Vec<SpaceAtom>,
    metric: FiniteMetric,
    sampler: AtomSampler,
}

impl FiniteAtomicSpace {
    /// Atoms on the line: `(label, coordinate, weight)` triples. Weights
    /// must be non-negative and sum to exactly one.
    pub fn from_line(entries: Vec<(String, BigRational, BigRational)>) -> Result<FiniteAtomicSpace> {
        let atoms = entries
            .into_iter()
            .map(|(label, coord, weight)| SpaceAtom {
                label,
                point: Point::Atom(coord),
                weight: WideFloat::ZERO, // filled by `finish`
                exact_weight: Some(weight),
            })
            .collect();
        Self::finish(atoms, FiniteMetric::Embedding)
    }

    /// Abstract atoms metrized by an explicit `(n x n)` distance table.
    /// Atom `i` is addressed as [`Point::Labeled`]`(i)`.
    pub fn from_table(
        labels: Vec<String>,
        weights: Vec<BigRational>,
        table: Vec<Vec<BigRational>>,
    ) -> Result<FiniteAtomicSpace> {
        if labels.len() != weights.len() {
            return Err(CoreError::Construction(format!(
                "{} labels but {} weights",
                labels.len(),
                weights.len()
            )));
        }
        validate_table(&table, labels.len())?;
        let atoms = labels
            .into_iter()
            .zip(weights)
            .enumerate()
            .map(|(i, (label, weight))| SpaceAtom {
                label,
                point: Point::Labeled(i),
                weight: WideFloat::ZERO,
                exact_weight: Some(weight),
            })
            .collect();
        Self::finish(atoms, FiniteMetric::Table(table))
    }

    fn finish(mut atoms: Vec<SpaceAtom>, metric: FiniteMetric) -> Result<FiniteAtomicSpace> {
        if atoms.is_empty() {
            return Err(CoreError::Construction("space needs at least one atom".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut sum = BigRational::zero();
        for atom in &mut atoms {
            let w = atom.exact_weight.as_ref().unwrap();
            if w.is_negative() {
                return Err(CoreError::Construction(format!(
                    "atom `{}` has negative weight {w}",
                    atom.label
                )));
            }
            if !seen.insert(atom.label.clone()) {
                return Err(CoreError::Construction(format!("duplicate atom label `{}`", atom.label)));
            }
            sum += w;
            atom.weight = WideFloat::from_big_ratio(w);
        }
        if !sum.is_one() {
            return Err(CoreError::Construction(format!(
                "atom weights must sum to exactly 1, got {sum}"
            )));
        }
        let sampler = AtomSampler::new(&atoms);
        Ok(FiniteAtomicSpace { atoms, metric, sampler })
    }

    pub fn metric(&self) -> &FiniteMetric {
        &self.metric
    }

    /// Index of the atom carrying this label.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.label == label)
    }
}

fn validate_table(table: &[Vec<BigRational>], n: usize) -> Result<()> {
    if table.len() != n || table.iter().any(|row| row.len() != n) {
        return Err(CoreError::Construction(format!("distance table must be {n} x {n}")));
    }
    for i in 0..n {
        if !table[i][i].is_zero() {
            return Err(CoreError::Construction(format!("distance table diagonal [{i}][{i}] must be 0")));
        }
        for j in 0..n {
            if i != j && !table[i][j].is_positive() {
                return Err(CoreError::Construction(format!(
                    "distance table entry [{i}][{j}] must be positive"
                )));
            }
            if table[i][j] != table[j][i] {
                return Err(CoreError::Construction(format!(
                    "distance table is not symmetric at [{i}][{j}]"
                )));
            }
            for k in 0..n {
                if table[i][j] > &table[i][k] + &table[k][j] {
                    return Err(CoreError::Construction(format!(
                        "triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})"
                    )));
                }
            }
        }
    }
    Ok(())
}

impl MetricMeasureSpace for FiniteAtomicSpace {
    fn name(&self) -> String {
        format!("finite_atomic({} atoms)", self.atoms.len())
    }

    fn distance(&self, a: &Point, b: &Point) -> Dist {
        match &self.metric {
            FiniteMetric::Embedding => line_distance(a, b),
            FiniteMetric::Table(t) => match (a, b) {
                (Point::Labeled(i), Point::Labeled(j)) => Dist::Exact(t[*i][*j].clone()),
                _ => panic!("table-metric space only measures labeled atoms"),
            },
        }
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
