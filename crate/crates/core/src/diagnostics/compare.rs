use std::fmt::Write as _;
use std::io::Write;

use super::ess::summarize;
use super::{ChainTrace, DiagnosticsError};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerRow {
    pub sampler: String,
    pub approximate: bool,
    pub seconds: f64,
    pub ess: Vec<f64>,
    pub ess_per_sec: Vec<f64>,
    pub median_ess_per_sec: f64,
    pub mean: Vec<f64>,
    pub mcse: Vec<f64>,
}

/// `(mean_a - mean_b) / sqrt(mcse_a² + mcse_b²)` per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseZ {
    pub left: String,
    pub right: String,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub rows: Vec<SamplerRow>,
    pub pairs: Vec<PairwiseZ>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn compare_samplers(traces: &[ChainTrace]) -> Result<Comparison, DiagnosticsError> {
    if traces.len() < 2 {
        return Err(DiagnosticsError::TooFewTraces(traces.len()));
    }
    let labels = traces[0].labels().to_vec();
    let mut rows = Vec::with_capacity(traces.len());
    for t in traces {
        if t.labels() != labels.as_slice() {
            return Err(DiagnosticsError::LabelMismatch {
                left: labels,
                right: t.labels().to_vec(),
            });
        }
        let summaries = (0..labels.len())
            .map(|j| summarize(&t.column(j)))
            .collect::<Result<Vec<_>, _>>()?;
        let seconds = t.total_seconds();
        let ess: Vec<f64> = summaries.iter().map(|s| s.ess).collect();
        let ess_per_sec: Vec<f64> = ess.iter().map(|e| e / seconds).collect();
        rows.push(SamplerRow {
            sampler: t.sampler.clone(),
            approximate: t.approximate,
            seconds,
            median_ess_per_sec: median(&ess_per_sec),
            ess,
            ess_per_sec,
            mean: summaries.iter().map(|s| s.mean).collect(),
            mcse: summaries.iter().map(|s| s.mcse).collect(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (&rows[i], &rows[j]);
            let z = (0..labels.len())
                .map(|k| {
                    let se = (a.mcse[k].powi(2) + b.mcse[k].powi(2)).sqrt();
                    if se > 0.0 {
                        (a.mean[k] - b.mean[k]) / se
                    } else {
                        0.0
                    }
                })
                .collect();
            pairs.push(PairwiseZ {
                left: a.sampler.clone(),
                right: b.sampler.clone(),
                z,
            });
        }
    }
    Ok(Comparison { labels, rows, pairs })
}

impl Comparison {
    /// Long format: one row per (sampler, parameter).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiagnosticsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sampler",
            "approximate",
            "parameter",
            "mean",
            "mcse",
            "ess",
            "ess_per_sec",
            "median_ess_per_sec",
        ])?;
        for r in &self.rows {
            for (k, label) in self.labels.iter().enumerate() {
                w.write_record([
                    r.sampler.clone(),
                    r.approximate.to_string(),
                    label.clone(),
                    r.mean[k].to_string(),
                    r.mcse[k].to_string(),
                    r.ess[k].to_string(),
                    r.ess_per_sec[k].to_string(),
                    r.median_ess_per_sec.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "| sampler | median ESS/s |");
        for l in &self.labels {
            let _ = write!(s, " mean {l} (mcse) |");
        }
        s.push('\n');
        s.push_str(&"|---".repeat(self.labels.len() + 2));
        s.push_str("|\n");
        for r in &self.rows {
            let name = if r.approximate {
                format!("{} (approx)", r.sampler)
            } else {
                r.sampler.clone()
            };
            let _ = write!(s, "| {name} | {:.3} |", r.median_ess_per_sec);
            for k in 0..self.labels.len() {
                let _ = write!(s, " {:.4} ({:.4}) |", r.mean[k], r.mcse[k]);
            }
            s.push('\n');
        }
        if !self.pairs.is_empty() {
            s.push_str("\n| pair | max abs z |\n|---|---|\n");
            for p in &self.pairs {
                let zmax = p.z.iter().fold(0.0f64, |a, z| a.max(z.abs()));
                let _ = writeln!(s, "| {} vs {} | {zmax:.2} |", p.left, p.right);
            }
        }
        s
    }
}
