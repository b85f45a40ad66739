//! Spearman rank correlation with two-sided significance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::special::student_t_two_sided;

pub const ALPHA: f64 = 0.05;
/// Largest sample size for which [`PValueMethod::Auto`] enumerates permutations.
pub const EXACT_MAX_N: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorrelationError {
    #[error("x has {x} values but y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 3 pairs, got {0}")]
    TooFew(usize),
    #[error("{0} is constant; rank correlation is undefined")]
    Constant(&'static str),
    #[error("exact permutation test is limited to n <= {EXACT_MAX_N}, got {0}")]
    TooLargeForExact(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact for n <= [`EXACT_MAX_N`], t approximation above.
    #[default]
    Auto,
    Exact,
    TApprox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub significant: bool,
    pub n: usize,
    pub method: PValueMethod,
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn centered(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, CorrelationError> {
    spearman_with(x, y, PValueMethod::Auto)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: PValueMethod) -> Result<CorrelationResult, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch { x: x.len(), y: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(CorrelationError::TooFew(n));
    }
    let dx = centered(&average_ranks(x));
    let dy = centered(&average_ranks(y));
    let (sxx, syy) = (dot(&dx, &dx), dot(&dy, &dy));
    if sxx == 0.0 {
        return Err(CorrelationError::Constant("x"));
    }
    if syy == 0.0 {
        return Err(CorrelationError::Constant("y"));
    }
    let rho = (dot(&dx, &dy) / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let method = match method {
        PValueMethod::Auto if n <= EXACT_MAX_N => PValueMethod::Exact,
        PValueMethod::Auto => PValueMethod::TApprox,
        m => m,
    };
    let p_value = match method {
        PValueMethod::Exact => {
            if n > EXACT_MAX_N {
                return Err(CorrelationError::TooLargeForExact(n));
            }
            permutation_p_value(&dx, &dy)
        }
        _ => t_approx_p_value(rho, n),
    };
    Ok(CorrelationResult {
        rho,
        p_value,
        significant: p_value < ALPHA,
        n,
        method,
    })
}

/// t = rho * sqrt((n - 2) / (1 - rho^2)) against Student's t with n - 2
/// degrees of freedom.
pub fn t_approx_p_value(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    student_t_two_sided(t, df)
}

/// Share of all orderings of the y ranks whose |correlation| reaches the
/// observed one. Both inputs are centered ranks.
fn permutation_p_value(dx: &[f64], dy: &[f64]) -> f64 {
    const EPS: f64 = 1e-9;
    let observed = dot(dx, dy).abs();
    let mut perm = dy.to_vec();
    let n = perm.len();
    let mut hits = 0u64;
    let mut total = 0u64;
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if dot(dx, p).abs() >= observed - EPS {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Correlation cell text; a dagger marks results that are not significant.
pub fn format_cell(result: &CorrelationResult) -> String {
    let dagger = if result.significant { "" } else { "\u{2020}" };
    format!("{:.2}{dagger}", result.rho)
}
