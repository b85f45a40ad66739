//! Crowd-reliability buckets: expert-sampled rewrites grouped by how many of
//! their three crowd ratings were correct, each bucket fitted with a
//! Laplace-smoothed Beta posterior.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ratings::{is_correct, is_perfect, RatingRecord};
use super::special::{beta_pdf, beta_quantile};

pub const RATINGS_PER_REWRITE: usize = 3;
pub const BUCKETS: usize = RATINGS_PER_REWRITE + 1;
pub const LOWER_LEVEL: f64 = 0.10;
pub const UPPER_LEVEL: f64 = 0.90;
pub const CURVE_STEP: f64 = 0.001;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReliabilityError {
    #[error("rewrite {rewrite_id} has {count} crowd ratings, expected {RATINGS_PER_REWRITE}")]
    GroupSize { rewrite_id: String, count: usize },
    #[error("expert line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Expert judgement for one rewrite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertVerdict {
    pub rewrite_id: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub alpha: f64,
    pub beta: f64,
    pub bucket: usize,
    pub support_count: usize,
    pub success_count: usize,
}

impl BetaFit {
    /// Posterior Beta(k + 1, n - k + 1) under a uniform prior.
    pub fn laplace(bucket: usize, support_count: usize, success_count: usize) -> Self {
        assert!(success_count <= support_count, "k must not exceed n");
        Self {
            alpha: success_count as f64 + 1.0,
            beta: (support_count - success_count) as f64 + 1.0,
            bucket,
            support_count,
            success_count,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        beta_quantile(self.alpha, self.beta, q)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        beta_pdf(self.alpha, self.beta, x)
    }

    /// One-sided 90% bounds: (10th percentile, 90th percentile).
    pub fn bounds(&self) -> (f64, f64) {
        (self.quantile(LOWER_LEVEL), self.quantile(UPPER_LEVEL))
    }

    /// Density sampled on [0, 1] at [`CURVE_STEP`].
    pub fn density_curve(&self) -> Vec<(f64, f64)> {
        let steps = (1.0 / CURVE_STEP).round() as usize;
        (0..=steps)
            .map(|i| {
                let x = i as f64 / steps as f64;
                (x, self.pdf(x))
            })
            .collect()
    }
}

/// Groups crowd ratings by rewrite and checks that each group has exactly
/// three entries.
pub fn crowd_groups(crowd: &[RatingRecord]) -> Result<BTreeMap<&str, Vec<&RatingRecord>>, ReliabilityError> {
    let mut groups: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    for r in crowd {
        groups.entry(r.rewrite_id.as_str()).or_default().push(r);
    }
    for (id, group) in &groups {
        if group.len() != RATINGS_PER_REWRITE {
            return Err(ReliabilityError::GroupSize {
                rewrite_id: id.to_string(),
                count: group.len(),
            });
        }
    }
    Ok(groups)
}

/// Buckets the expert-rated rewrites by their number of correct crowd
/// ratings and fits each bucket. Expert verdicts for rewrites without crowd
/// ratings are ignored.
pub fn bucket_and_fit(
    crowd: &[RatingRecord],
    expert: &BTreeMap<String, bool>,
) -> Result<Vec<BetaFit>, ReliabilityError> {
    let groups = crowd_groups(crowd)?;
    let mut support = [0usize; BUCKETS];
    let mut success = [0usize; BUCKETS];
    for (id, group) in &groups {
        let Some(&expert_correct) = expert.get(*id) else {
            continue;
        };
        let bucket = group.iter().filter(|r| is_correct(r)).count();
        support[bucket] += 1;
        if expert_correct {
            success[bucket] += 1;
        }
    }
    Ok((0..BUCKETS)
        .map(|b| BetaFit::laplace(b, support[b], success[b]))
        .collect())
}

/// Expert verdicts from expert-authored rating records: a rewrite is
/// expert-correct when all its expert ratings are correct.
pub fn expert_verdicts_from_ratings(records: &[RatingRecord]) -> BTreeMap<String, bool> {
    let mut by_rewrite: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    for r in records {
        by_rewrite.entry(r.rewrite_id.as_str()).or_default().push(r);
    }
    by_rewrite
        .into_iter()
        .map(|(id, group)| (id.to_string(), is_perfect(group.into_iter())))
        .collect()
}

/// Reads expert input as JSONL of either [`ExpertVerdict`] or
/// [`RatingRecord`] lines.
pub fn parse_expert(text: &str) -> Result<BTreeMap<String, bool>, ReliabilityError> {
    let mut verdicts = BTreeMap::new();
    let mut ratings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(v) = serde_json::from_str::<ExpertVerdict>(line) {
            verdicts.insert(v.rewrite_id, v.correct);
            continue;
        }
        let record: RatingRecord = serde_json::from_str(line).map_err(|e| ReliabilityError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        ratings.push(record);
    }
    verdicts.extend(expert_verdicts_from_ratings(&ratings));
    Ok(verdicts)
}

/// CSV with columns x, then one pdf column per fit.
pub fn density_csv(fits: &[BetaFit]) -> String {
    let mut out = String::from("x");
    for f in fits {
        out.push_str(&format!(",bucket_{}", f.bucket));
    }
    out.push('\n');
    let curves: Vec<Vec<(f64, f64)>> = fits.iter().map(BetaFit::density_curve).collect();
    let rows = curves.first().map_or(0, Vec::len);
    for i in 0..rows {
        out.push_str(&format!("{:.3}", curves[0][i].0));
        for c in &curves {
            out.push_str(&format!(",{}", c[i].1));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(id: &str, rater: &str, correct: bool) -> RatingRecord {
        RatingRecord {
            rewrite_id: id.into(),
            rater_id: rater.into(),
            sensical: if correct { 5 } else { 2 },
            grammatical: 5,
            miss_fact: false,
            new_fact: false,
            wrong_split: false,
            need_more_split: false,
        }
    }

    #[test]
    fn laplace_parameters() {
        let f = BetaFit::laplace(3, 16, 16);
        assert_eq!((f.alpha, f.beta), (17.0, 1.0));
        let f = BetaFit::laplace(1, 16, 5);
        assert_eq!((f.alpha, f.beta), (6.0, 12.0));
        assert!((f.mean() - 6.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_bounds() {
        let root = 0.1_f64.powf(1.0 / 17.0);
        assert!((BetaFit::laplace(3, 16, 16).bounds().0 - root).abs() < 1e-6);
        assert!((BetaFit::laplace(0, 16, 0).bounds().1 - (1.0 - root)).abs() < 1e-6);
    }

    #[test]
    fn buckets_count_correct_crowd_ratings() {
        let mut crowd = Vec::new();
        for (id, correct) in [("a", 3), ("b", 3), ("c", 1), ("d", 0), ("e", 2)] {
            for r in 0..3 {
                crowd.push(rating(id, &format!("w{r}"), r < correct));
            }
        }
        let expert: BTreeMap<String, bool> = [("a", true), ("b", false), ("c", false), ("d", false)]
            .map(|(k, v)| (k.to_string(), v))
            .into();
        let fits = bucket_and_fit(&crowd, &expert).unwrap();
        let summary: Vec<(usize, usize)> = fits.iter().map(|f| (f.support_count, f.success_count)).collect();
        assert_eq!(summary, [(1, 0), (1, 0), (0, 0), (2, 1)]);
        assert_eq!((fits[2].alpha, fits[2].beta), (1.0, 1.0));
    }

    #[test]
    fn wrong_group_size_names_rewrite() {
        let crowd = vec![rating("x", "w0", true), rating("x", "w1", true)];
        let err = bucket_and_fit(&crowd, &BTreeMap::new()).unwrap_err();
        assert_eq!(
            err,
            ReliabilityError::GroupSize {
                rewrite_id: "x".into(),
                count: 2
            }
        );
        assert!(err.to_string().contains("x"));
    }

    #[test]
    fn curves_integrate_to_one() {
        for fit in [
            BetaFit::laplace(0, 0, 0),
            BetaFit::laplace(3, 16, 16),
            BetaFit::laplace(1, 16, 5),
        ] {
            let curve = fit.density_curve();
            assert_eq!(curve.len(), 1001);
            let area: f64 = curve
                .windows(2)
                .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
                .sum();
            assert!((area - 1.0).abs() < 1e-3, "{area}");
        }
    }

    #[test]
    fn expert_input_formats() {
        let text = "{\"rewrite_id\":\"a\",\"correct\":true}\n\
            {\"rewrite_id\":\"b\",\"rater_id\":\"x\",\"sensical\":5,\"grammatical\":5,\"miss_fact\":false,\"new_fact\":false,\"wrong_split\":false,\"need_more_split\":true}\n";
        let v = parse_expert(text).unwrap();
        assert_eq!(v["a"], true);
        assert_eq!(v["b"], false);
        assert!(matches!(
            parse_expert("{}"),
            Err(ReliabilityError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_shape() {
        let csv = density_csv(&[BetaFit::laplace(0, 0, 0), BetaFit::laplace(1, 2, 1)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,bucket_0,bucket_1");
        assert_eq!(lines.len(), 1002);
        assert!(lines[1].starts_with("0.000,1,"));
    }
}
