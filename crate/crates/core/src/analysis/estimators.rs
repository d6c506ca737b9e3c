//! Statistical estimators backing the acceptance checks: running means and
//! their stabilization diagnostic, survival functions, the Hill tail-index
//! estimator, Kolmogorov-Smirnov distances, batch-means confidence intervals,
//! and a bootstrap for renewal-reward velocity ratios.

use rand::Rng;

use crate::error::{Result, SimError};

/// Two-sided 97.5% Student-t quantile for small degrees of freedom; the
/// normal quantile beyond the table.
fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}

pub fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = sample_mean(xs);
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Running means `m_k` of the prefix of length `k`, `k = 1..=n`.
pub fn running_mean(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        acc += x;
        out.push(acc / (i + 1) as f64);
    }
    out
}

/// Outcome of the running-mean stabilization diagnostic.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Stabilization {
    /// Mean of the uncensored samples.
    pub mean: f64,
    /// `|m_n - m_{n/2}| / m_n` over the uncensored sequence: how much the
    /// running mean moved over the final half of the samples.
    pub relative_change: f64,
    /// Fraction of samples censored at the horizon. Censored samples are
    /// reported here and never averaged into the mean.
    pub censored_fraction: f64,
}

pub fn stabilization(delays: &[f64], censored: &[bool]) -> Result<Stabilization> {
    if delays.len() != censored.len() {
        return Err(SimError::Parameter("delay and censoring lengths differ".into()));
    }
    let kept: Vec<f64> = delays
        .iter()
        .zip(censored)
        .filter(|(_, &c)| !c)
        .map(|(&d, _)| d)
        .collect();
    if kept.len() < 10 {
        return Err(SimError::Parameter(format!(
            "stabilization needs at least 10 uncensored samples, got {}",
            kept.len()
        )));
    }
    let means = running_mean(&kept);
    let m_half = means[kept.len() / 2 - 1];
    let m_full = means[kept.len() - 1];
    Ok(Stabilization {
        mean: m_full,
        relative_change: (m_full - m_half).abs() / m_full,
        censored_fraction: censored.iter().filter(|&&c| c).count() as f64 / censored.len() as f64,
    })
}

/// Empirical survival function `P(X > t)` on a logarithmic grid of `points`
/// thresholds spanning the positive sample range.
pub fn survival_function(xs: &[f64], points: usize) -> Vec<(f64, f64)> {
    let positive: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.is_empty() || points == 0 {
        return Vec::new();
    }
    let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().cloned().fold(0.0, f64::max);
    let n = xs.len() as f64;
    (0..points)
        .map(|i| {
            let t = if points == 1 {
                lo
            } else {
                lo * (hi / lo).powf(i as f64 / (points - 1) as f64)
            };
            let surv = xs.iter().filter(|&&x| x > t).count() as f64 / n;
            (t, surv)
        })
        .collect()
}

/// Hill estimator of the tail index over the top `top_fraction` order
/// statistics. Small values (at or below 1) are what an infinite-mean tail
/// looks like at finite sample size.
pub fn hill_tail_index(xs: &[f64], top_fraction: f64) -> Result<f64> {
    if xs.len() < 30 {
        return Err(SimError::Parameter(format!(
            "tail estimation needs at least 30 samples, got {}",
            xs.len()
        )));
    }
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(SimError::Parameter(format!("top fraction {top_fraction} out of (0, 1)")));
    }
    let mut sorted: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    if sorted.len() < 30 {
        return Err(SimError::Parameter("too few positive samples for a tail estimate".into()));
    }
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = ((sorted.len() as f64 * top_fraction) as usize).clamp(2, sorted.len() - 1);
    let x_k = sorted[k];
    let mean_log: f64 =
        sorted[..k].iter().map(|&x| (x / x_k).ln()).sum::<f64>() / k as f64;
    if mean_log <= 0.0 {
        return Err(SimError::Parameter("degenerate order statistics in tail estimate".into()));
    }
    Ok(1.0 / mean_log)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `xs`
/// and the reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(SimError::Parameter("KS statistic of an empty sample".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Least-squares slope through the origin of the per-slot distance series
/// `d(t)` against `t = 1..=n`.
pub fn velocity_slope(distances: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &d) in distances.iter().enumerate() {
        let t = (i + 1) as f64;
        num += t * d;
        den += t * t;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    let mx = sample_mean(&xs[..n]);
    let my = sample_mean(&ys[..n]);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        cov += (xs[i] - mx) * (ys[i] - my);
        vx += (xs[i] - mx) * (xs[i] - mx);
        vy += (ys[i] - my) * (ys[i] - my);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Batch-means 95% confidence interval `(mean, half_width)` from `batches`
/// equally sized batches (remainder dropped).
pub fn batch_means_ci(xs: &[f64], batches: usize) -> Result<(f64, f64)> {
    if batches < 2 || xs.len() < 2 * batches {
        return Err(SimError::Parameter(format!(
            "batch means need at least 2 samples per batch, got {} over {batches} batches",
            xs.len()
        )));
    }
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| sample_mean(&xs[b * size..(b + 1) * size]))
        .collect();
    let mean = sample_mean(&means);
    let sd = sample_std(&means);
    let half = t_quantile_975(batches - 1) * sd / (batches as f64).sqrt();
    Ok((mean, half))
}

/// Percentile bootstrap 95% interval for the ratio of sums
/// `sum(numerators) / sum(denominators)`, resampling index pairs.
pub fn bootstrap_ratio_ci(
    numerators: &[f64],
    denominators: &[f64],
    resamples: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let n = numerators.len();
    if n == 0 || n != denominators.len() {
        return Err(SimError::Parameter("bootstrap needs matched non-empty samples".into()));
    }
    let mut ratios = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut num = 0.0;
        let mut den = 0.0;
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            num += numerators[i];
            den += denominators[i];
        }
        ratios.push(if den > 0.0 { num / den } else { 0.0 });
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = ratios[((resamples as f64 * 0.025) as usize).min(resamples - 1)];
    let hi = ratios[((resamples as f64 * 0.975) as usize).min(resamples - 1)];
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngTree;
    use rand::Rng;

    #[test]
    fn constant_samples_are_degenerate() {
        let xs = vec![3.0; 100];
        assert_eq!(sample_std(&xs), 0.0);
        let ks = ks_statistic(&xs, |x| if x < 3.0 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(ks, 0.0);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        // Pareto with tail index 1: X = 1/U
        let mut rng = RngTree::new(41).stream(&[0]);
        let xs: Vec<f64> = (0..100_000).map(|_| 1.0 / rng.gen::<f64>()).collect();
        let hill = hill_tail_index(&xs, 0.1).unwrap();
        assert!((hill - 1.0).abs() < 0.05, "hill {hill}");
        assert!(hill_tail_index(&xs[..10], 0.1).is_err());
    }

    #[test]
    fn running_mean_of_geometric_converges() {
        let q: f64 = 0.2;
        let mut rng = RngTree::new(42).stream(&[0]);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let mut t = 1.0;
                while rng.gen::<f64>() >= q {
                    t += 1.0;
                }
                t
            })
            .collect();
        let (mean, half) = batch_means_ci(&xs, 20).unwrap();
        assert!(
            (mean - 1.0 / q).abs() < 3.0 * half.max(0.05),
            "mean {mean} target {} half {half}",
            1.0 / q
        );
        let stab = stabilization(&xs, &vec![false; xs.len()]).unwrap();
        assert!(stab.relative_change < 0.05, "change {}", stab.relative_change);
        assert_eq!(stab.censored_fraction, 0.0);
    }

    #[test]
    fn stabilization_excludes_censored_samples() {
        let delays = vec![1.0, 2.0, 100.0, 3.0, 2.0, 100.0, 1.0, 2.0, 3.0, 2.0, 1.0, 2.0];
        let censored = vec![
            false, false, true, false, false, true, false, false, false, false, false, false,
        ];
        let stab = stabilization(&delays, &censored).unwrap();
        assert!((stab.censored_fraction - 2.0 / 12.0).abs() < 1e-12);
        assert!(stab.mean < 3.0, "censored values leaked into the mean: {}", stab.mean);
    }

    #[test]
    fn survival_function_is_monotone() {
        let mut rng = RngTree::new(43).stream(&[0]);
        let xs: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.1..50.0)).collect();
        let surv = survival_function(&xs, 20);
        assert_eq!(surv.len(), 20);
        for w in surv.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 >= w[1].1);
        }
    }

    #[test]
    fn ks_detects_mismatched_distribution() {
        let mut rng = RngTree::new(44).stream(&[0]);
        let uniform: Vec<f64> = (0..50_000).map(|_| rng.gen::<f64>()).collect();
        let ks_good = ks_statistic(&uniform, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(ks_good < 0.01, "ks {ks_good}");
        let ks_bad = ks_statistic(&uniform, |x| (x * x).clamp(0.0, 1.0)).unwrap();
        assert!(ks_bad > 0.2, "ks {ks_bad}");
    }

    #[test]
    fn velocity_slope_of_linear_series() {
        let d: Vec<f64> = (1..=100).map(|t| 0.25 * t as f64).collect();
        assert!((velocity_slope(&d) - 0.25).abs() < 1e-12);
        assert_eq!(velocity_slope(&[]), 0.0);
    }

    #[test]
    fn bootstrap_ci_brackets_the_ratio() {
        let mut rng = RngTree::new(45).stream(&[0]);
        let num: Vec<f64> = (0..500).map(|_| rng.gen_range(0.5..1.5)).collect();
        let den: Vec<f64> = (0..500).map(|_| rng.gen_range(3.0..5.0)).collect();
        let ratio = num.iter().sum::<f64>() / den.iter().sum::<f64>();
        let (lo, hi) = bootstrap_ratio_ci(&num, &den, 1000, &mut rng).unwrap();
        assert!(lo <= ratio && ratio <= hi, "({lo}, {hi}) vs {ratio}");
        assert!(lo > 0.0);
    }
}
