//! Rank-based significance tests: Friedman for factor effects over a
//! repeated-measures grid, and the Wilcoxon signed-rank test for paired
//! group-level scores.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::checked_gamma_ur;

use crate::error::{Error, Result};
use crate::metrics::evaluate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    Friedman,
    WilcoxonExact,
    WilcoxonNormal,
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMethod::Friedman => "friedman",
            TestMethod::WilcoxonExact => "wilcoxon-exact",
            TestMethod::WilcoxonNormal => "wilcoxon-normal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub df: Option<u32>,
    pub p_value: f64,
    pub n_effective: usize,
    pub notes: Vec<String>,
}

impl StatTestResult {
    /// Significance mark used in reports: `*` when p < 0.05.
    pub fn mark(&self) -> &'static str {
        significance_mark(self.p_value)
    }
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

pub fn significance_mark(p: f64) -> &'static str {
    if p < SIGNIFICANCE_LEVEL {
        "*"
    } else {
        ""
    }
}

/// Within-row average ranks (1 = smallest) of an n×k matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    pub values: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
    /// Sizes of every tie group with more than one member, over all rows.
    pub tie_groups: Vec<usize>,
}

impl RankMatrix {
    pub fn column_sums(&self) -> Vec<f64> {
        let k = self.ranks.first().map_or(0, Vec::len);
        (0..k).map(|j| self.ranks.iter().map(|r| r[j]).sum()).collect()
    }
}

/// Average ranks of `values`, plus the sizes of tied groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

pub fn rank_rows(values: &[Vec<f64>]) -> Result<RankMatrix> {
    check_matrix(values)?;
    let mut ranks = Vec::with_capacity(values.len());
    let mut tie_groups = Vec::new();
    for row in values {
        let (r, t) = average_ranks(row);
        ranks.push(r);
        tie_groups.extend(t);
    }
    Ok(RankMatrix {
        values: values.to_vec(),
        ranks,
        tie_groups,
    })
}

fn check_matrix(values: &[Vec<f64>]) -> Result<()> {
    let n = values.len();
    let k = values.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::Design(format!(
            "need at least 2 blocks and 2 treatments, got {n}x{k}"
        )));
    }
    let mut missing = Vec::new();
    for (i, row) in values.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Design(format!("row {i} has {} cells, expected {k}", row.len())));
        }
        for (j, v) in row.iter().enumerate() {
            if v.is_nan() {
                missing.push(format!("({i},{j})"));
            } else if !v.is_finite() {
                return Err(Error::Input(format!("non-finite cell ({i},{j})")));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Design(format!("missing cells {}", missing.join(" "))));
    }
    Ok(())
}

/// Friedman test over n blocks (rows) × k treatments (columns), tie-corrected.
pub fn friedman_test(values: &[Vec<f64>]) -> Result<StatTestResult> {
    let ranked = rank_rows(values)?;
    let n = values.len() as f64;
    let k = values[0].len() as f64;
    let sum_sq: f64 = ranked.column_sums().iter().map(|r| r * r).sum();
    let raw = 12.0 / (n * k * (k + 1.0)) * sum_sq - 3.0 * n * (k + 1.0);
    let tie_sum: f64 = ranked
        .tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let correction = 1.0 - tie_sum / (n * (k * k * k - k));
    let df = values[0].len() as u32 - 1;
    let mut notes = Vec::new();
    let (statistic, p_value) = if correction <= 1e-12 {
        notes.push("every block is fully tied; no ranking signal".to_string());
        (0.0, 1.0)
    } else {
        let q = (raw / correction).max(0.0);
        (q, chi_square_sf(q, df)?)
    };
    Ok(StatTestResult {
        method: TestMethod::Friedman,
        statistic,
        df: Some(df),
        p_value,
        n_effective: values.len(),
        notes,
    })
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::Input("chi-square needs df >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Input(format!("chi-square statistic {x} is negative")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    checked_gamma_ur(df as f64 / 2.0, x / 2.0)
        .map(|p| p.clamp(0.0, 1.0))
        .map_err(|e| Error::Input(format!("incomplete gamma: {e}")))
}

/// Splits `n` items into consecutive groups of 3 and 4, using as many 4s as possible.
pub fn partition_groups(n: usize) -> Result<Vec<usize>> {
    let fours = (0..=n / 4)
        .rev()
        .find(|a| (n - 4 * a) % 3 == 0)
        .filter(|_| n >= 3)
        .ok_or_else(|| Error::Design(format!("{n} items cannot be split into groups of 3 and 4")))?;
    let threes = (n - 4 * fours) / 3;
    Ok([4].repeat(fours).into_iter().chain([3].repeat(threes)).collect())
}

/// Weighted F1 of each consecutive group, with within-group supports.
pub fn group_wf1<P, G>(predicted: &[Option<P>], golds: &[G], groups: &[usize], classes: &[String]) -> Result<Vec<f64>>
where
    P: AsRef<str>,
    G: AsRef<str>,
{
    let total: usize = groups.iter().sum();
    if total != predicted.len() || total != golds.len() {
        return Err(Error::Input(format!(
            "groups cover {total} items but there are {} predictions and {} golds",
            predicted.len(),
            golds.len()
        )));
    }
    let mut start = 0;
    groups
        .iter()
        .map(|&size| {
            let range = start..start + size;
            start += size;
            Ok(evaluate(&predicted[range.clone()], &golds[range], classes)?.weighted.f1)
        })
        .collect()
}

pub const EXACT_WILCOXON_MAX_N: usize = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples; zero differences are dropped.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<StatTestResult> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Input("paired samples are empty".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Input("non-finite paired difference".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(StatTestResult {
            method: TestMethod::WilcoxonExact,
            statistic: 0.0,
            df: None,
            p_value: 1.0,
            n_effective: 0,
            notes: vec!["all paired differences are zero".into()],
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&magnitudes);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    if n <= EXACT_WILCOXON_MAX_N {
        Ok(StatTestResult {
            method: TestMethod::WilcoxonExact,
            statistic: w,
            df: None,
            p_value: exact_two_sided(&ranks, w),
            n_effective: n,
            notes: Vec::new(),
        })
    } else {
        let nf = n as f64;
        let tie_term: f64 = ties
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum::<f64>()
            / 48.0;
        let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let mean = total / 2.0;
        let z = ((w - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        Ok(StatTestResult {
            method: TestMethod::WilcoxonNormal,
            statistic: w,
            df: None,
            p_value: erfc(z / std::f64::consts::SQRT_2).min(1.0),
            n_effective: n,
            notes: Vec::new(),
        })
    }
}

/// Fraction of the 2^n sign assignments whose min(W+, W-) is at most `w`.
///
/// Average ranks are multiples of 1/2, so doubled ranks are integers and the
/// count is accumulated over doubled rank sums.
fn exact_two_sided(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w2 = (w * 2.0).round() as usize;
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - s) <= w2)
        .map(|(_, c)| c)
        .sum();
    hits as f64 / (1u64 << ranks.len()) as f64
}
