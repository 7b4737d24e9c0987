//! Maximum-expected-utility decisions over rectangular utility matrices.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ClassProbabilityVector;

/// Expected utilities within this many ulps (relative to the utility
/// scale at `p`) of the maximum count as tied.
const TIE_ULPS: f64 = 16.0;

/// Utilities `U[i][c]` of taking decision `i` when the true class is `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    n_decisions: usize,
    n_classes: usize,
    entries: Vec<f64>,
}

impl UtilityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_classes = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_classes) {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: bad.len(),
            });
        }
        Self::from_row_major(rows.len(), n_classes, rows.concat())
    }

    pub fn from_row_major(n_decisions: usize, n_classes: usize, entries: Vec<f64>) -> Result<Self> {
        if n_decisions == 0 || n_classes == 0 {
            return Err(Error::InvalidConfig(
                "utility matrix needs at least one row and column".into(),
            ));
        }
        if entries.len() != n_decisions * n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_decisions * n_classes,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            n_decisions,
            n_classes,
            entries,
        })
    }

    /// The 2×2 matrix `[[u00, u01], [u10, u11]]`.
    pub fn binary(u00: f64, u01: f64, u10: f64, u11: f64) -> Result<Self> {
        Self::from_row_major(2, 2, alloc::vec![u00, u01, u10, u11])
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = alloc::vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            n_decisions: n,
            n_classes: n,
            entries,
        }
    }

    pub fn n_decisions(&self) -> usize {
        self.n_decisions
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, decision: usize, class: usize) -> f64 {
        self.entries[decision * self.n_classes + class]
    }

    pub fn row(&self, decision: usize) -> &[f64] {
        &self.entries[decision * self.n_classes..(decision + 1) * self.n_classes]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_decisions).map(|i| self.row(i).to_vec()).collect()
    }

    /// `scale · U + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::from_row_major(
            self.n_decisions,
            self.n_classes,
            self.entries.iter().map(|&u| scale * u + shift).collect(),
        )
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// How exactly-tied decisions are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// Report every tied decision.
    ReportTie,
    /// Report every tied decision, to be split into half points when
    /// accumulating a binary confusion matrix.
    SplitHalf,
    /// Pick one tied decision uniformly at random from the given seed.
    SeededUniform(u64),
}

/// Result of a maximum-expected-utility choice.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    /// Chosen decisions, ascending. More than one only for reported ties.
    pub chosen: Vec<usize>,
    /// Every decision attaining the maximum, ascending.
    pub tied: Vec<usize>,
    pub expected_utilities: Vec<f64>,
}

impl DecisionOutcome {
    /// The lowest chosen decision index.
    pub fn decision(&self) -> usize {
        self.chosen[0]
    }

    pub fn is_tie(&self) -> bool {
        self.tied.len() > 1
    }
}

/// Ū_i = Σ_c U_ic p_c
pub fn expected_utilities(u: &UtilityMatrix, p: &ClassProbabilityVector) -> Result<Vec<f64>> {
    if p.len() != u.n_classes {
        return Err(Error::DimensionMismatch {
            expected: u.n_classes,
            found: p.len(),
        });
    }
    Ok((0..u.n_decisions)
        .map(|i| u.row(i).iter().zip(p.as_slice()).map(|(a, b)| a * b).sum())
        .collect())
}

/// The decision(s) of largest expected utility.
pub fn choose(u: &UtilityMatrix, p: &ClassProbabilityVector, tie_rule: TieRule) -> Result<DecisionOutcome> {
    let eu = expected_utilities(u, p)?;
    let best = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = (0..u.n_decisions)
        .map(|i| {
            u.row(i)
                .iter()
                .zip(p.as_slice())
                .map(|(a, b)| (a * b).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let tol = TIE_ULPS * f64::EPSILON * scale;
    let tied: Vec<usize> = (0..eu.len()).filter(|&i| best - eu[i] <= tol).collect();
    let chosen = match tie_rule {
        TieRule::ReportTie | TieRule::SplitHalf => tied.clone(),
        TieRule::SeededUniform(seed) => {
            if tied.len() == 1 {
                tied.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                alloc::vec![tied[rng.random_range(0..tied.len())]]
            }
        }
    };
    Ok(DecisionOutcome {
        chosen,
        tied,
        expected_utilities: eu,
    })
}

/// When decision 1 is preferred over decision 0 as a function of
/// p = P(class 1), for a 2×2 utility matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Decision 1 iff p > t; tie at p = t.
    At(f64),
    /// Decision 1 iff p < t; tie at p = t.
    Below(f64),
    /// Decision 1 is never strictly better.
    Never,
    /// Decision 1 is at least as good for every p.
    Always,
    /// Both rows are identical.
    Indifferent,
}

pub fn decision_threshold(u: &UtilityMatrix) -> Result<Threshold> {
    if u.n_decisions != 2 || u.n_classes != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: if u.n_decisions != 2 { u.n_decisions } else { u.n_classes },
        });
    }
    // Ū_1 − Ū_0 = −gain0·(1 − p) + gain1·p
    let gain0 = u.get(0, 0) - u.get(1, 0);
    let gain1 = u.get(1, 1) - u.get(0, 1);
    Ok(match (gain0, gain1) {
        (a, b) if a == 0.0 && b == 0.0 => Threshold::Indifferent,
        (a, b) if a > 0.0 && b > 0.0 => Threshold::At(a / (a + b)),
        (a, b) if a < 0.0 && b < 0.0 => Threshold::Below(a / (a + b)),
        (a, b) if a >= 0.0 && b <= 0.0 => Threshold::Never,
        _ => Threshold::Always,
    })
}

/// The equivalent matrix with minimum entry 0 and maximum entry 1.
pub fn canonical_form(u: &UtilityMatrix) -> Result<UtilityMatrix> {
    let lo = u.min_entry();
    let hi = u.max_entry();
    if !(hi > lo) {
        return Err(Error::NoScale);
    }
    let span = hi - lo;
    UtilityMatrix::from_row_major(
        u.n_decisions,
        u.n_classes,
        u.entries.iter().map(|&v| (v - lo) / span).collect(),
    )
}

/// `n` canonical 2×2 matrices with U₀₀ > U₁₀ and U₁₁ > U₀₁, uniform over
/// the set of such matrices.
///
/// The maximum entry 1 sits on the diagonal and the minimum 0 off it,
/// leaving four two-parameter faces: two triangles (max and min in the
/// same column, remaining pair ordered) and two unit squares. A face is
/// picked in proportion to its area, then a point uniformly within it.
pub fn sample_utility_space(n: usize, seed: u64) -> Vec<UtilityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // open-interval draws keep every constraint strict
        let x = open_unit(&mut rng);
        let y = open_unit(&mut rng);
        let face = rng.random::<f64>() * 3.0;
        let m = if face < 0.5 {
            // U00 = 1, U10 = 0; U11 > U01
            if x == y {
                continue;
            }
            let (hi, lo) = if x > y { (x, y) } else { (y, x) };
            [1.0, lo, 0.0, hi]
        } else if face < 1.5 {
            // U00 = 1, U01 = 0
            [1.0, 0.0, x, y]
        } else if face < 2.5 {
            // U11 = 1, U10 = 0
            [x, y, 0.0, 1.0]
        } else {
            // U11 = 1, U01 = 0; U00 > U10
            if x == y {
                continue;
            }
            let (hi, lo) = if x > y { (x, y) } else { (y, x) };
            [hi, 0.0, lo, 1.0]
        };
        out.push(UtilityMatrix::from_row_major(2, 2, m.to_vec()).expect("finite 2x2"));
    }
    out
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = rng.random::<f64>();
        if v > 0.0 {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(p1: f64) -> ClassProbabilityVector {
        ClassProbabilityVector::new(vec![1.0 - p1, p1]).unwrap()
    }

    fn case_iv() -> UtilityMatrix {
        UtilityMatrix::binary(10.0, 0.0, -10.0, 1.0).unwrap()
    }

    #[test]
    fn identity_expected_utilities() {
        let eu = expected_utilities(&UtilityMatrix::identity(2), &p(0.7)).unwrap();
        assert!((eu[0] - 0.3).abs() < 1e-15 && (eu[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn case_iv_expected_utilities() {
        for p1 in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let eu = expected_utilities(&case_iv(), &p(p1)).unwrap();
            assert!((eu[0] - (10.0 - 10.0 * p1)).abs() < 1e-12);
            assert!((eu[1] - (-10.0 + 11.0 * p1)).abs() < 1e-12);
        }
    }

    #[test]
    fn case_iv_ties_at_twenty_twentyfirsts() {
        let out = choose(&case_iv(), &p(20.0 / 21.0), TieRule::ReportTie).unwrap();
        assert!((out.expected_utilities[0] - 10.0 / 21.0).abs() < 1e-12);
        assert_eq!(out.tied, vec![0, 1]);
        assert_eq!(out.chosen, vec![0, 1]);
    }

    #[test]
    fn case_iv_prefers_zero_below_threshold() {
        for p1 in [0.0, 0.5, 0.93, 0.95] {
            let out = choose(&case_iv(), &p(p1), TieRule::ReportTie).unwrap();
            assert_eq!(out.chosen, vec![0]);
        }
        assert_eq!(
            choose(&case_iv(), &p(0.96), TieRule::ReportTie).unwrap().chosen,
            vec![1]
        );
    }

    #[test]
    fn seeded_uniform_breaks_ties_reproducibly() {
        let u = UtilityMatrix::identity(2);
        let picks: Vec<usize> = (0..64)
            .map(|s| choose(&u, &p(0.5), TieRule::SeededUniform(s)).unwrap().decision())
            .collect();
        assert!(picks.contains(&0) && picks.contains(&1));
        let again: Vec<usize> = (0..64)
            .map(|s| choose(&u, &p(0.5), TieRule::SeededUniform(s)).unwrap().decision())
            .collect();
        assert_eq!(picks, again);
    }

    #[test]
    fn dimension_mismatch() {
        let u = UtilityMatrix::identity(3);
        assert!(matches!(
            expected_utilities(&u, &p(0.5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rectangular_matrices() {
        // three decisions over two classes
        let u = UtilityMatrix::from_rows(&[vec![1.0, -5.0], vec![-1.0, 3.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(choose(&u, &p(0.0), TieRule::ReportTie).unwrap().decision(), 0);
        assert_eq!(choose(&u, &p(1.0), TieRule::ReportTie).unwrap().decision(), 1);
        assert_eq!(choose(&u, &p(0.3), TieRule::ReportTie).unwrap().decision(), 2);
        assert!(UtilityMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(decision_threshold(&case_iv()).unwrap(), Threshold::At(20.0 / 21.0));
        assert_eq!(
            decision_threshold(&UtilityMatrix::identity(2)).unwrap(),
            Threshold::At(0.5)
        );
        let case_ii = UtilityMatrix::binary(1.0, -10.0, 0.0, 10.0).unwrap();
        assert_eq!(decision_threshold(&case_ii).unwrap(), Threshold::At(1.0 / 21.0));
        let same_rows = UtilityMatrix::binary(1.0, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(decision_threshold(&same_rows).unwrap(), Threshold::Indifferent);
        let zero_dominates = UtilityMatrix::binary(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(decision_threshold(&zero_dominates).unwrap(), Threshold::Never);
        let one_dominates = UtilityMatrix::binary(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(decision_threshold(&one_dominates).unwrap(), Threshold::Always);
        let inverted = UtilityMatrix::binary(0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(decision_threshold(&inverted).unwrap(), Threshold::Below(0.5));
        assert!(decision_threshold(&UtilityMatrix::identity(3)).is_err());
    }

    #[test]
    fn case_ii_threshold_agrees_with_grid_argmax() {
        // exhaustive p-grid oracle for the first p where decision 1 wins
        let u = UtilityMatrix::binary(1.0, -10.0, 0.0, 10.0).unwrap();
        let first = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .find(|&q| choose(&u, &p(q), TieRule::ReportTie).unwrap().chosen == vec![1])
            .unwrap();
        assert!((first - 1.0 / 21.0).abs() < 2e-5, "{first}");
    }

    #[test]
    fn canonical_forms() {
        let c = canonical_form(&case_iv()).unwrap();
        let expect = [1.0, 0.5, 0.0, 0.55];
        for (a, b) in c.entries().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let sym = UtilityMatrix::binary(7.0, -2.0, -2.0, 7.0).unwrap();
        assert_eq!(canonical_form(&sym).unwrap(), UtilityMatrix::identity(2));
        assert_eq!(canonical_form(&c).unwrap(), c);
        let flat = UtilityMatrix::binary(3.0, 3.0, 3.0, 3.0).unwrap();
        assert_eq!(canonical_form(&flat), Err(Error::NoScale));
    }

    #[test]
    fn sampled_matrices_are_canonical_and_dominant() {
        let ms = sample_utility_space(10_000, 4);
        assert_eq!(ms.len(), 10_000);
        for m in &ms {
            assert_eq!(&canonical_form(m).unwrap(), m);
            match decision_threshold(m).unwrap() {
                Threshold::At(t) => assert!(t > 0.0 && t < 1.0),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(sample_utility_space(5, 4), ms[..5].to_vec());
        // faces: triangles weigh 1/6 each, squares 1/3 each
        let tri = ms.iter().filter(|m| m.get(0, 0) == 1.0 && m.get(1, 0) == 0.0).count() as f64 / 1e4;
        assert!((tri - 1.0 / 6.0).abs() < 0.02, "{tri}");
    }
}
