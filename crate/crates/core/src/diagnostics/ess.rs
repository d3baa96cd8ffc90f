use super::DiagnosticsError;

pub const MIN_SERIES_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    /// Set when the series has zero variance; `ess` is then the length.
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn autocov(centered: &[f64], lag: usize) -> f64 {
    let n = centered.len();
    centered[..n - lag]
        .iter()
        .zip(&centered[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

/// Geyer's initial monotone sequence estimator. Autocovariances are summed in
/// adjacent pairs until a pair turns non-positive, with each pair capped by its
/// predecessor. Lags are computed only as far as the truncation point.
pub fn effective_sample_size(series: &[f64]) -> Result<EssEstimate, DiagnosticsError> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(DiagnosticsError::TooShort { len: n });
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|x| x - m).collect();
    let gamma0 = autocov(&centered, 0);
    let scale = series.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(gamma0 > f64::EPSILON * f64::EPSILON * scale * scale) {
        return Ok(EssEstimate {
            ess: n as f64,
            degenerate: true,
        });
    }
    let mut sum_pairs = 0.0;
    let mut previous = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = if k == 0 {
            gamma0 + autocov(&centered, 1)
        } else {
            autocov(&centered, 2 * k) + autocov(&centered, 2 * k + 1)
        };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        sum_pairs += pair;
        previous = pair;
        k += 1;
    }
    let tau = (2.0 * sum_pairs - gamma0) / gamma0;
    let ess = if tau > 0.0 { n as f64 / tau } else { n as f64 };
    Ok(EssEstimate {
        ess: ess.clamp(f64::MIN_POSITIVE, n as f64),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    /// Monte Carlo standard error of the mean, `sd / sqrt(ess)`.
    pub mcse: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(series: &[f64]) -> Result<Summary, DiagnosticsError> {
    let ess = effective_sample_size(series)?.ess;
    let m = mean(series);
    let var = series.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (series.len() - 1) as f64;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: m,
        sd: var.sqrt(),
        ess,
        mcse: (var / ess).sqrt(),
        q05: quantile_sorted(&sorted, 0.05),
        q50: quantile_sorted(&sorted, 0.5),
        q95: quantile_sorted(&sorted, 0.95),
    })
}

/// Geweke's stationarity z-score comparing the means of the first `first`
/// and last `last` fractions, with ESS-based standard errors.
pub fn geweke_z(series: &[f64], first: f64, last: f64) -> Result<f64, DiagnosticsError> {
    let n = series.len();
    let a = &series[..((n as f64 * first) as usize).min(n)];
    let b = &series[n - ((n as f64 * last) as usize).min(n)..];
    let (sa, sb) = (summarize(a)?, summarize(b)?);
    let se = (sa.mcse.powi(2) + sb.mcse.powi(2)).sqrt();
    Ok(if se > 0.0 { (sa.mean - sb.mean) / se } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_series_is_an_error() {
        assert!(effective_sample_size(&[1.0; 9]).is_err());
    }

    #[test]
    fn constant_series_is_degenerate() {
        let e = effective_sample_size(&[2.5; 50]).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.ess, 50.0);
    }

    #[test]
    fn alternating_series_is_capped_at_length() {
        let s: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = effective_sample_size(&s).unwrap();
        assert!(e.ess <= 100.0 && e.ess > 0.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let s: Vec<f64> = (0..=10).map(f64::from).collect();
        let sm = summarize(&s).unwrap();
        assert!((sm.q50 - 5.0).abs() < 1e-12);
        assert!((sm.q05 - 0.5).abs() < 1e-12);
    }
}
