use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use super::{BenchError, Difficulty, RunRow};
use crate::pipeline::FailureKind;

/// An exact count ratio. Reported percentages are derived from it, never the
/// other way round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "fraction with zero denominator");
        Self { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn percent(self) -> f64 {
        100.0 * self.value()
    }

    /// Percentage rounded half-to-even at `dp` decimals, computed on integers
    /// so that ties are real ties.
    pub fn percent_rounded(self, dp: u32) -> String {
        let scale = 10u128.pow(dp);
        let n = self.num as u128 * 100 * scale;
        let d = self.den as u128;
        let (mut q, r) = (n / d, n % d);
        if 2 * r > d || (2 * r == d && q % 2 == 1) {
            q += 1;
        }
        if dp == 0 {
            q.to_string()
        } else {
            format!("{}.{:0width$}", q / scale, q % scale, width = dp as usize)
        }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Fraction", 4)?;
        st.serialize_field("num", &self.num)?;
        st.serialize_field("den", &self.den)?;
        st.serialize_field("value", &self.value())?;
        st.serialize_field("percent", &self.percent_rounded(2))?;
        st.end()
    }
}

/// Share of rows solved at or before attempt `k`.
pub fn success_at_k(rows: &[RunRow], k: usize) -> Result<Fraction, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Undefined("success@k over zero rows"));
    }
    let solved = rows
        .iter()
        .filter(|r| r.solved_at.is_some_and(|s| s <= k))
        .count();
    Ok(Fraction::new(solved as u64, rows.len() as u64))
}

/// Solved share per difficulty present in `rows`.
pub fn per_difficulty(rows: &[RunRow]) -> BTreeMap<Difficulty, Fraction> {
    let mut counts: BTreeMap<Difficulty, (u64, u64)> = BTreeMap::new();
    for r in rows {
        let c = counts.entry(r.difficulty).or_default();
        c.1 += 1;
        if r.solved_at.is_some() {
            c.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(d, (s, n))| (d, Fraction::new(s, n)))
        .collect()
}

/// Share of failed rows per failure kind. Empty when nothing failed.
pub fn failure_breakdown(rows: &[RunRow]) -> BTreeMap<FailureKind, Fraction> {
    let failed: Vec<FailureKind> = rows.iter().filter_map(|r| r.failure_kind).collect();
    let mut out = BTreeMap::new();
    for kind in &failed {
        out.entry(*kind)
            .or_insert(Fraction::new(0, failed.len() as u64))
            .num += 1;
    }
    out
}

/// Consecutive differences `y[k+1] - y[k]`.
pub fn deltas(values: &[f64]) -> Result<Vec<f64>, BenchError> {
    if values.len() < 2 {
        return Err(BenchError::Undefined("deltas need at least two values"));
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// `y[K] - y[0]`.
pub fn overall_improvement(values: &[f64]) -> Result<f64, BenchError> {
    if values.len() < 2 {
        return Err(BenchError::Undefined(
            "improvement needs at least two values",
        ));
    }
    Ok(values[values.len() - 1] - values[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub rows: u64,
    pub solved: u64,
    pub failed: u64,
    pub by_difficulty: BTreeMap<Difficulty, u64>,
    pub failures_by_kind: BTreeMap<FailureKind, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// y0 ..= yK.
    pub success_at: Vec<Fraction>,
    pub per_difficulty: BTreeMap<Difficulty, Fraction>,
    pub failure_breakdown: BTreeMap<FailureKind, Fraction>,
    /// Percentage-point differences between consecutive `success_at` values.
    pub deltas: Vec<f64>,
    /// Percentage points, yK - y0.
    pub overall_improvement: f64,
    pub totals: Totals,
}

impl MetricsReport {
    /// Computes every metric for `k = 0 ..= k_max` (raised to the largest
    /// `solved_at` seen).
    pub fn from_rows(rows: &[RunRow], k_max: usize) -> Result<Self, BenchError> {
        for r in rows {
            r.validate()?;
        }
        let k_max = rows
            .iter()
            .filter_map(|r| r.solved_at)
            .max()
            .map_or(k_max, |m| m.max(k_max));
        let success_at = (0..=k_max)
            .map(|k| success_at_k(rows, k))
            .collect::<Result<Vec<_>, _>>()?;
        let percents: Vec<f64> = success_at.iter().map(|f| f.percent()).collect();
        let deltas = if percents.len() >= 2 {
            deltas(&percents)?
        } else {
            Vec::new()
        };
        let overall_improvement = percents[percents.len() - 1] - percents[0];

        let mut by_difficulty = BTreeMap::new();
        let mut failures_by_kind = BTreeMap::new();
        for r in rows {
            *by_difficulty.entry(r.difficulty).or_insert(0) += 1;
            if let Some(k) = r.failure_kind {
                *failures_by_kind.entry(k).or_insert(0) += 1;
            }
        }
        let failed: u64 = failures_by_kind.values().sum();
        Ok(Self {
            success_at,
            per_difficulty: per_difficulty(rows),
            failure_breakdown: failure_breakdown(rows),
            deltas,
            overall_improvement,
            totals: Totals {
                rows: rows.len() as u64,
                solved: rows.len() as u64 - failed,
                failed,
                by_difficulty,
                failures_by_kind,
            },
        })
    }

    pub fn k_max(&self) -> usize {
        self.success_at.len() - 1
    }

    /// Exact per-step gains; all `success_at` entries share a denominator.
    pub fn delta_fractions(&self) -> Vec<Fraction> {
        self.success_at
            .windows(2)
            .map(|w| Fraction::new(w[1].num.saturating_sub(w[0].num), w[0].den))
            .collect()
    }

    pub fn improvement_fraction(&self) -> Fraction {
        let (first, last) = (self.success_at[0], self.success_at[self.k_max()]);
        Fraction::new(last.num.saturating_sub(first.num), first.den)
    }

    /// Checks monotonicity, partition, and the breakdown/tier identities.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (k, w) in self.success_at.windows(2).enumerate() {
            if w[1].num < w[0].num {
                return Err(format!("success_at decreases from y{k} to y{}", k + 1));
            }
        }
        let t = &self.totals;
        let last = self.success_at[self.k_max()];
        if last.num + t.failed != t.rows {
            return Err(format!(
                "solved {} + failed {} != total {}",
                last.num, t.failed, t.rows
            ));
        }
        if t.failed > 0 {
            let sum: u64 = self.failure_breakdown.values().map(|f| f.num).sum();
            if sum != t.failed || self.failure_breakdown.values().any(|f| f.den != t.failed) {
                return Err("failure breakdown does not sum to 1".into());
            }
        } else if !self.failure_breakdown.is_empty() {
            return Err("failure breakdown present without failures".into());
        }
        let tier_solved: u64 = self.per_difficulty.values().map(|f| f.num).sum();
        let tier_rows: u64 = self.per_difficulty.values().map(|f| f.den).sum();
        if tier_solved != last.num || tier_rows != t.rows {
            return Err("per-difficulty totals disagree with the overall rate".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(solved: &[Option<usize>]) -> Vec<RunRow> {
        solved
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Some(k) => RunRow::solved(i.to_string(), Difficulty::Easy, *k),
                None => {
                    RunRow::failed(i.to_string(), Difficulty::Easy, FailureKind::WrongStructure)
                }
            })
            .collect()
    }

    #[test]
    fn success_counts() {
        let r = rows(&[Some(0), Some(0), Some(1), None]);
        assert_eq!(success_at_k(&r, 0).unwrap().value(), 0.5);
        assert_eq!(success_at_k(&r, 1).unwrap().value(), 0.75);
        assert!(success_at_k(&[], 0).is_err());
    }

    #[test]
    fn all_failed() {
        let r = rows(&[None, None]);
        for k in 0..4 {
            assert_eq!(success_at_k(&r, k).unwrap().num, 0);
        }
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(Fraction::new(18, 21).percent_rounded(2), "85.71");
        assert_eq!(Fraction::new(7, 20).percent_rounded(2), "35.00");
        // 1/8 = 12.5%: tie rounds to the even neighbour
        assert_eq!(Fraction::new(1, 8).percent_rounded(0), "12");
        assert_eq!(Fraction::new(3, 8).percent_rounded(0), "38");
        // 0.125% -> 0.12, 0.375% -> 0.38
        assert_eq!(Fraction::new(1, 800).percent_rounded(2), "0.12");
        assert_eq!(Fraction::new(3, 800).percent_rounded(2), "0.38");
        assert_eq!(Fraction::new(1, 1).percent_rounded(2), "100.00");
    }

    #[test]
    fn deltas_need_two() {
        assert!(deltas(&[1.0]).is_err());
        assert_eq!(deltas(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn no_failures_empty_breakdown() {
        let r = rows(&[Some(0)]);
        assert!(failure_breakdown(&r).is_empty());
        let m = MetricsReport::from_rows(&r, 3).unwrap();
        m.check_invariants().unwrap();
        assert_eq!(m.success_at.len(), 4);
    }
}
