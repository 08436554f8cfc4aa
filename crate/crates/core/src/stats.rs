//! Two-sample Kolmogorov-Smirnov test and batch-means confidence intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Smallest sample size accepted by the KS test.
pub const KS_MIN_SAMPLE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErgodicCi {
    pub mean: f64,
    pub halfwidth: f64,
    pub batches: usize,
}

impl ErgodicCi {
    pub fn low(&self) -> f64 {
        self.mean - self.halfwidth
    }

    pub fn high(&self) -> f64 {
        self.mean + self.halfwidth
    }
}

/// Tail `P(K > λ)` of the Kolmogorov distribution.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                (-odd * odd * c).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let kf = k as f64;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * kf * kf * lambda * lambda).exp()
            })
            .sum();
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic p-value at effective size
/// `n1 n2 / (n1 + n2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    ks_two_sample_with_resolution(a, b, 0.0)
}

/// As [`ks_two_sample`], but pooled values within `resolution` of their
/// neighbour are treated as ties, so that samples agreeing up to rounding
/// give statistic zero. Chains of close values form a single tie group.
pub fn ks_two_sample_with_resolution(a: &[f64], b: &[f64], resolution: f64) -> Result<KsResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < KS_MIN_SAMPLE || n2 < KS_MIN_SAMPLE {
        return Err(Error::Usage(format!(
            "KS test needs at least {KS_MIN_SAMPLE} points per sample, got {n1} and {n2}"
        )));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Usage("KS test input contains NaN".into()));
    }
    if !(resolution >= 0.0) {
        return Err(Error::Usage(format!("tie resolution {resolution} must be nonnegative")));
    }
    let mut pooled: Vec<(f64, bool)> =
        a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let (step1, step2) = (1.0 / n1 as f64, 1.0 / n2 as f64);
    let (mut f1, mut f2, mut d) = (0.0f64, 0.0f64, 0.0f64);
    for (i, &(v, from_a)) in pooled.iter().enumerate() {
        if from_a {
            f1 += step1;
        } else {
            f2 += step2;
        }
        let group_ends = pooled.get(i + 1).is_none_or(|&(next, _)| next - v > resolution);
        if group_ends {
            d = d.max((f1 - f2).abs());
        }
    }
    // Accumulated rounding can leave a residue of order 1e-16 when the
    // empirical functions coincide.
    if d < 1e-12 {
        d = 0.0;
    }
    let effective = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    Ok(KsResult {
        statistic: d.min(1.0),
        p_value: kolmogorov_tail(effective.sqrt() * d),
        n1,
        n2,
    })
}

/// Mean of `series` with a 95% Student-t halfwidth from `batches` batch
/// means. A remainder that does not fill the last batch is dropped from the
/// front of the series.
pub fn batch_means_ci(series: &[f64], batches: usize) -> Result<ErgodicCi> {
    if batches < 2 {
        return Err(Error::Usage(format!("batch means need at least 2 batches, got {batches}")));
    }
    if series.len() < 2 * batches {
        return Err(Error::Usage(format!(
            "series of length {} is too short for {batches} batches",
            series.len()
        )));
    }
    let size = series.len() / batches;
    let used = &series[series.len() - size * batches..];
    let means: Vec<f64> = used.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    mean_ci(&means)
}

/// Mean of i.i.d. `samples` with a 95% Student-t halfwidth.
pub fn mean_ci(samples: &[f64]) -> Result<ErgodicCi> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Usage(format!("a confidence interval needs 2 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .map_err(|e| Error::Numeric(format!("Student t quantile: {e}")))?
        .inverse_cdf(0.975);
    Ok(ErgodicCi { mean, halfwidth: t * (var / nf).sqrt(), batches: n })
}
