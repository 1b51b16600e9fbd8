//! Two-sided Mann-Whitney U test and pairwise encoding comparisons.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest per-sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "ns")]
    Ns,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "***")]
    Three,
    #[serde(rename = "****")]
    Four,
}

impl Stars {
    pub fn from_p(p: f64) -> Stars {
        if p < 0.00005 {
            Stars::Four
        } else if p < 0.0005 {
            Stars::Three
        } else if p < 0.005 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::Ns
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::Ns => "ns",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
            Stars::Four => "****",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U statistic of the first sample.
    pub u_statistic: f64,
    pub p_value: f64,
    pub stars: Stars,
    pub method: PMethod,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("both samples need at least one observation")]
    EmptySample,
    #[error("samples contain a non-finite value")]
    NonFinite,
    #[error("all pooled values are identical")]
    Degenerate,
}

/// Midranks (1-based) of the pooled sample, plus tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Null distribution of U for sample sizes `(m, n)` without ties:
/// `counts[u]` is the number of rank assignments giving statistic `u`.
/// Uses `N(m, n, u) = N(m-1, n, u-n) + N(m, n-1, u)`.
pub fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // table[i][j] holds the distribution for sizes (i, j)
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut dist = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1.0;
            } else {
                for (u, slot) in dist.iter_mut().enumerate() {
                    let from_top = if u >= j {
                        table[i - 1][j].get(u - j).copied().unwrap_or(0.0)
                    } else {
                        0.0
                    };
                    let from_left = table[i][j - 1].get(u).copied().unwrap_or(0.0);
                    *slot = from_top + from_left;
                }
            }
            table[i][j] = dist;
        }
    }
    std::mem::take(&mut table[m][n])
}

/// Two-sided exact p-value `min(1, 2 * min(P(U <= u), P(U >= u)))`.
pub fn exact_p_value(u: f64, m: usize, n: usize) -> f64 {
    let dist = u_distribution(m, n);
    let total: f64 = dist.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = dist[..=u].iter().sum::<f64>() / total;
    let upper: f64 = dist[u..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
pub fn normal_p_value(u: f64, m: usize, n: usize, ties: &[usize]) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mean = mf * nf / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (total * (total - 1.0));
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term);
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().all(|&x| x == pooled[0]) {
        return Err(StatsError::Degenerate);
    }
    let (ranks, ties) = midranks(&pooled);
    let (m, n) = (a.len(), b.len());
    let rank_sum: f64 = ranks[..m].iter().sum();
    let u = rank_sum - (m * (m + 1)) as f64 / 2.0;

    let (p_value, method) = if m <= EXACT_LIMIT && n <= EXACT_LIMIT && ties.is_empty() {
        (exact_p_value(u, m, n), PMethod::Exact)
    } else {
        (normal_p_value(u, m, n, &ties), PMethod::Normal)
    };
    Ok(UTestResult {
        u_statistic: u,
        p_value,
        stars: Stars::from_p(p_value),
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub u_statistic: f64,
    pub p_value: f64,
    pub stars: Stars,
}

/// Test every unordered pair of groups on one metric. Pairs whose pooled
/// values are all identical (or that have an empty side) report `p = 1`.
pub fn compare_encodings(metric: &str, groups: &[(String, Vec<f64>)]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let (name_a, a) = &groups[i];
            let (name_b, b) = &groups[j];
            let (u, p) = match mann_whitney_u(a, b) {
                Ok(r) => (r.u_statistic, r.p_value),
                Err(_) => (a.len() as f64 * b.len() as f64 / 2.0, 1.0),
            };
            rows.push(ComparisonRow {
                metric: metric.to_string(),
                group_a: name_a.clone(),
                group_b: name_b.clone(),
                n_a: a.len(),
                n_b: b.len(),
                u_statistic: u,
                p_value: p,
                stars: Stars::from_p(p),
            });
        }
    }
    rows
}
