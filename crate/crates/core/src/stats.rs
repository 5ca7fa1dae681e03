//! Small statistics helpers: batch-means errors, GOF tests, least squares.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean (iid assumption).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 1);
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Batch-means estimate of the standard error for a correlated sequence.
/// Splits into ~sqrt(n) batches of equal length.
pub fn batch_mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 4 {
        return mean_stderr(xs);
    }
    let nb = (n as f64).sqrt().floor() as usize;
    let blen = n / nb;
    let mut batches = Vec::with_capacity(nb);
    for b in 0..nb {
        let chunk = &xs[b * blen..(b + 1) * blen];
        batches.push(chunk.iter().sum::<f64>() / blen as f64);
    }
    mean_stderr(&batches)
}

/// Chi-square goodness-of-fit p-value. Bins with expected < 5 are merged
/// into their neighbor before forming the statistic.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= 5.0 {
            obs.push(acc_o);
            exp.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs.push(acc_o);
            exp.push(acc_e);
        }
    }
    let k = obs.len();
    if k < 2 {
        return 1.0;
    }
    let stat: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Two-sided Kolmogorov–Smirnov test of `samples` against the cdf.
/// Returns (D, asymptotic p-value).
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        d = d.max((c - lo).abs()).max((hi - c).abs());
    }
    let lambda = (n as f64).sqrt() * d;
    (d, ks_pvalue(lambda))
}

fn ks_pvalue(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..101 {
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Ordinary least-squares line fit; returns (slope, intercept).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Poisson pmf, computed in log space to avoid overflow.
pub fn poisson_pmf(k: usize, lambda: f64) -> f64 {
    let kf = k as f64;
    (kf * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(kf + 1.0)).exp()
}
