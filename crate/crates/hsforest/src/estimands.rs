//! Posterior summaries (credible intervals), evaluation metrics, and
//! Harrell's concordance index.

use crate::error::{Error, Result};
use crate::moves::MoveKind;

/// Attempt/acceptance counters for one move kind.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MoveRates {
    pub attempts: u64,
    pub accepts: u64,
}

impl MoveRates {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepts as f64 / self.attempts as f64
        }
    }
}

/// Per-move acceptance counters of one forest. Auto-rejected proposals count
/// as rejected attempts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcceptanceStats {
    pub grow: MoveRates,
    pub prune: MoveRates,
    pub change: MoveRates,
}

impl AcceptanceStats {
    pub fn record(&mut self, kind: MoveKind, accepted: bool) {
        let slot = match kind {
            MoveKind::Grow => &mut self.grow,
            MoveKind::Prune => &mut self.prune,
            MoveKind::Change => &mut self.change,
        };
        slot.attempts += 1;
        if accepted {
            slot.accepts += 1;
        }
    }
}

/// Acceptance counters for the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcceptanceReport {
    pub prognostic: AcceptanceStats,
    /// Present only for the causal two-forest model.
    pub treatment: Option<AcceptanceStats>,
}

/// Retained post-burn-in posterior samples.
///
/// For the causal model `cate[d][i]` is the treatment effect of observation
/// `i` at draw `d`, in log-time units; for a single-forest fit it is the
/// regression fit of observation `i` instead.
#[derive(Debug, Clone, Default)]
pub struct PosteriorDraws {
    /// Draw-major matrix, `n_draws x n`.
    pub cate: Vec<Vec<f64>>,
    /// Per-draw sample averages of `cate`; `ate[d]` equals the mean over
    /// observations of `cate[d]` exactly.
    pub ate: Vec<f64>,
    /// Error-variance trace in (log of) original outcome units.
    pub sigma2: Vec<f64>,
    pub acceptance: AcceptanceReport,
    /// Average leaf count per tree at each retained draw.
    pub avg_leaves: Vec<f64>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.cate.len()
    }

    pub fn n_obs(&self) -> usize {
        self.cate.first().map_or(0, Vec::len)
    }

    /// Posterior-mean CATE vector.
    pub fn cate_mean(&self) -> Vec<f64> {
        let d = self.n_draws();
        let n = self.n_obs();
        let mut out = vec![0.0; n];
        for draw in &self.cate {
            for (o, v) in out.iter_mut().zip(draw) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= d as f64);
        out
    }
}

/// An equal-tailed credible interval with its posterior mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl IntervalSummary {
    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Per-observation and ATE interval summaries of one run.
#[derive(Debug, Clone)]
pub struct Summary {
    pub ate: IntervalSummary,
    pub cate: Vec<IntervalSummary>,
    pub level: f64,
}

/// Empirical quantile with linear interpolation between order statistics:
/// at probability `p` the value is `v[h0] + (h - h0) * (v[h0+1] - v[h0])`
/// with `h = (n-1) p` (R type-7 definition).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

fn interval(draws: &[f64], level: f64) -> IntervalSummary {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    IntervalSummary {
        mean: draws.iter().sum::<f64>() / draws.len() as f64,
        lower: quantile(&sorted, tail),
        upper: quantile(&sorted, 1.0 - tail),
        level,
    }
}

/// Equal-tailed interval summaries for every observation and for the ATE.
pub fn summarize(draws: &PosteriorDraws, level: f64) -> Result<Summary> {
    if draws.n_draws() < 2 {
        return Err(Error::InvalidInput(format!(
            "summaries need at least 2 draws, got {}",
            draws.n_draws()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interval level must lie in (0,1), got {level}"
        )));
    }
    let n = draws.n_obs();
    let d = draws.n_draws();
    let mut cate = Vec::with_capacity(n);
    let mut buf = vec![0.0; d];
    for i in 0..n {
        for (t, draw) in draws.cate.iter().enumerate() {
            buf[t] = draw[i];
        }
        cate.push(interval(&buf, level));
    }
    Ok(Summary {
        ate: interval(&draws.ate, level),
        cate,
        level,
    })
}

/// Accuracy metrics of a fitted run against simulation ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse_cate: f64,
    pub cover_cate: f64,
    pub len_cate: f64,
    pub rmse_ate: f64,
    pub cover_ate: f64,
    pub len_ate: f64,
}

/// RMSE, coverage, and interval length for the CATE (averaged over
/// observations) and the ATE.
pub fn evaluate(summary: &Summary, truth_cate: &[f64], truth_ate: f64) -> Result<Metrics> {
    if truth_cate.len() != summary.cate.len() {
        return Err(Error::InvalidInput(format!(
            "truth has {} entries, summary has {}",
            truth_cate.len(),
            summary.cate.len()
        )));
    }
    let n = truth_cate.len() as f64;
    let mut sq = 0.0;
    let mut covered = 0.0;
    let mut length = 0.0;
    for (s, &t) in summary.cate.iter().zip(truth_cate) {
        sq += (s.mean - t) * (s.mean - t);
        covered += f64::from(s.covers(t));
        length += s.length();
    }
    Ok(Metrics {
        rmse_cate: (sq / n).sqrt(),
        cover_cate: covered / n,
        len_cate: length / n,
        rmse_ate: (summary.ate.mean - truth_ate).abs(),
        cover_ate: f64::from(summary.ate.covers(truth_ate)),
        len_ate: summary.ate.length(),
    })
}

/// Harrell's concordance index. `scores` are predictions where higher means
/// longer predicted survival. Comparable pairs are `(i, j)` with
/// `y_i < y_j` and an observed event at `i`; pairs tied in `y` are excluded.
/// Score ties count one half.
pub fn c_index(scores: &[f64], y: &[f64], delta: &[u8]) -> Result<f64> {
    let n = y.len();
    if scores.len() != n || delta.len() != n {
        return Err(Error::InvalidInput(
            "c-index inputs must have equal length".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidInput("c-index needs at least 2 subjects".into()));
    }
    let mut comparable = 0u64;
    let mut concordant = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j || delta[i] != 1 || !(y[i] < y[j]) {
                continue;
            }
            comparable += 1;
            if scores[i] < scores[j] {
                concordant += 1.0;
            } else if scores[i] == scores[j] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::Undefined(
            "no comparable pairs for the concordance index".into(),
        ));
    }
    Ok(concordant / comparable as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws_from(cate: Vec<Vec<f64>>) -> PosteriorDraws {
        let ate = cate
            .iter()
            .map(|d| d.iter().sum::<f64>() / d.len() as f64)
            .collect();
        PosteriorDraws {
            cate,
            ate,
            sigma2: Vec::new(),
            acceptance: AcceptanceReport::default(),
            avg_leaves: Vec::new(),
        }
    }

    #[test]
    fn constant_draws_collapse() {
        let d = draws_from(vec![vec![3.0, -1.0]; 10]);
        let s = summarize(&d, 0.95).unwrap();
        assert_eq!(
            (s.cate[0].mean, s.cate[0].lower, s.cate[0].upper),
            (3.0, 3.0, 3.0)
        );
        assert_eq!((s.ate.mean, s.ate.lower, s.ate.upper), (1.0, 1.0, 1.0));
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let d = draws_from((1..=100).map(|v| vec![v as f64]).collect());
        let s = summarize(&d, 0.90).unwrap();
        assert!((s.cate[0].lower - 5.95).abs() < 1e-12);
        assert!((s.cate[0].upper - 95.05).abs() < 1e-12);
    }

    #[test]
    fn symmetric_draws_are_balanced() {
        let vals: Vec<Vec<f64>> = (-500..=500).map(|v| vec![v as f64 / 100.0]).collect();
        let d = draws_from(vals);
        let s = summarize(&d, 0.95).unwrap();
        assert!(s.cate[0].mean.abs() < 1e-12);
        assert!((s.cate[0].lower + s.cate[0].upper).abs() < 1e-9);
    }

    #[test]
    fn too_few_draws_error() {
        let d = draws_from(vec![vec![1.0]]);
        assert!(summarize(&d, 0.95).is_err());
    }

    #[test]
    fn ate_is_mean_of_cate_rows() {
        let d = draws_from(vec![vec![1.0, 3.0], vec![2.0, 0.0]]);
        for (t, draw) in d.cate.iter().enumerate() {
            let m = draw.iter().sum::<f64>() / draw.len() as f64;
            assert_eq!(d.ate[t], m);
        }
    }

    #[test]
    fn evaluate_trivials() {
        let perfect = Summary {
            ate: IntervalSummary {
                mean: 0.5,
                lower: 0.5,
                upper: 0.5,
                level: 0.95,
            },
            cate: vec![
                IntervalSummary {
                    mean: 1.0,
                    lower: 1.0,
                    upper: 1.0,
                    level: 0.95,
                };
                2
            ],
            level: 0.95,
        };
        let m = evaluate(&perfect, &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(m.rmse_cate, 0.0);
        assert_eq!(m.cover_cate, 1.0);
        assert_eq!(m.len_cate, 0.0);

        let off = Summary {
            ate: perfect.ate,
            cate: vec![
                IntervalSummary {
                    mean: 2.0,
                    lower: 0.0,
                    upper: 1.0,
                    level: 0.95,
                };
                2
            ],
            level: 0.95,
        };
        let m = evaluate(&off, &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(m.rmse_cate, 1.0); // estimates = truth + 1 everywhere
        assert_eq!(m.cover_cate, 1.0); // truth 1.0 inside [0, 1]... boundary counts
        assert_eq!(m.len_cate, 1.0);

        assert!(evaluate(&off, &[1.0], 0.5).is_err());

        // truth 0.5, interval [0, 1]: covered with length 1
        let one = Summary {
            ate: IntervalSummary {
                mean: 0.4,
                lower: 0.0,
                upper: 1.0,
                level: 0.95,
            },
            cate: vec![],
            level: 0.95,
        };
        let m = evaluate(&one, &[], 0.5).unwrap();
        assert_eq!(m.cover_ate, 1.0);
        assert_eq!(m.len_ate, 1.0);
    }

    #[test]
    fn c_index_examples() {
        // perfectly ordered, all events
        let y = [1.0, 2.0, 3.0, 4.0];
        let d = [1u8, 1, 1, 1];
        let s = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(c_index(&s, &y, &d).unwrap(), 1.0);

        // all predictions equal
        let s_tied = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(c_index(&s_tied, &y, &d).unwrap(), 0.5);

        // worked example: comparable pairs (1,2) and (1,3), both concordant
        let y3 = [1.0, 2.0, 3.0];
        let d3 = [1u8, 0, 1];
        let s3 = [0.5, 1.5, 2.0];
        assert_eq!(c_index(&s3, &y3, &d3).unwrap(), 1.0);

        // no comparable pairs
        let d_none = [0u8, 0, 0];
        assert!(c_index(&s3, &y3, &d_none).is_err());
        // tied times are excluded
        let y_tied = [2.0, 2.0];
        assert!(c_index(&[1.0, 2.0], &y_tied, &[1, 1]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn c_index_invariant_to_monotone_transform(
                scores in proptest::collection::vec(-10.0f64..10.0, 5..20),
                seed in 0u64..1000,
            ) {
                let n = scores.len();
                let mut rng = crate::dist::RngStream::new(seed, 0);
                let y: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0 + 0.1).collect();
                let delta: Vec<u8> = (0..n).map(|_| u8::from(rng.uniform() < 0.7)).collect();
                let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() + 3.0).collect();
                let a = c_index(&scores, &y, &delta);
                let b = c_index(&transformed, &y, &delta);
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (Err(_), Err(_)) => {},
                    _ => prop_assert!(false, "one side errored"),
                }
            }

            #[test]
            fn interval_length_monotone_in_level(seed in 0u64..1000) {
                let mut rng = crate::dist::RngStream::new(seed, 1);
                let draws: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.standard_normal()]).collect();
                let d = super::draws_from(draws);
                let mut prev = 0.0;
                for level in [0.5, 0.8, 0.9, 0.95, 0.99] {
                    let s = summarize(&d, level).unwrap();
                    prop_assert!(s.cate[0].length() >= prev - 1e-12);
                    prev = s.cate[0].length();
                }
            }

            #[test]
            fn metrics_are_permutation_equivariant(seed in 0u64..500) {
                let mut rng = crate::dist::RngStream::new(seed, 2);
                let n = 8;
                let draws: Vec<Vec<f64>> = (0..40)
                    .map(|_| (0..n).map(|_| rng.standard_normal()).collect())
                    .collect();
                let truth: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
                let d = super::draws_from(draws.clone());
                let s = summarize(&d, 0.9).unwrap();
                let m = evaluate(&s, &truth, 0.0).unwrap();

                // reverse the observation order everywhere
                let rev_draws: Vec<Vec<f64>> = draws
                    .iter()
                    .map(|row| row.iter().rev().copied().collect())
                    .collect();
                let rev_truth: Vec<f64> = truth.iter().rev().copied().collect();
                let dr = super::draws_from(rev_draws);
                let sr = summarize(&dr, 0.9).unwrap();
                let mr = evaluate(&sr, &rev_truth, 0.0).unwrap();
                prop_assert!((m.rmse_cate - mr.rmse_cate).abs() < 1e-12);
                prop_assert!((m.cover_cate - mr.cover_cate).abs() < 1e-12);
                prop_assert!((m.len_cate - mr.len_cate).abs() < 1e-12);
            }
        }
    }
}
