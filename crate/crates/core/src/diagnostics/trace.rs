use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::DiagnosticsError;

/// Per-iteration bookkeeping. Wall-clock time is kept out of the main trace
/// file so traces stay byte-identical across reruns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMeta {
    pub seconds: f64,
    /// `None` for kernels without an accept/reject step.
    pub accepted: Option<bool>,
    /// Total number of rejected proposals instantiated this iteration.
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    labels: Vec<String>,
    draws: Vec<Vec<f64>>,
    meta: Vec<IterationMeta>,
    pub sampler: String,
    /// Marks chains whose target is only approximately the posterior.
    pub approximate: bool,
}

impl ChainTrace {
    pub fn new(labels: Vec<String>) -> Self {
        Self {
            labels,
            draws: Vec::new(),
            meta: Vec::new(),
            sampler: String::new(),
            approximate: false,
        }
    }

    pub fn with_sampler(mut self, sampler: impl Into<String>, approximate: bool) -> Self {
        self.sampler = sampler.into();
        self.approximate = approximate;
        self
    }

    pub fn push(&mut self, row: Vec<f64>, meta: IterationMeta) {
        assert_eq!(row.len(), self.labels.len(), "trace row width");
        assert!(meta.seconds >= 0.0, "negative iteration time");
        self.draws.push(row);
        self.meta.push(meta);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    pub fn meta(&self) -> &[IterationMeta] {
        &self.meta
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|r| r[index]).collect()
    }

    pub fn column_by_label(&self, label: &str) -> Option<Vec<f64>> {
        self.labels.iter().position(|l| l == label).map(|i| self.column(i))
    }

    pub fn total_seconds(&self) -> f64 {
        self.meta.iter().map(|m| m.seconds).sum()
    }

    /// Fraction of accepted moves among iterations that report one.
    pub fn acceptance_rate(&self) -> Option<f64> {
        let flags: Vec<bool> = self.meta.iter().filter_map(|m| m.accepted).collect();
        (!flags.is_empty()).then(|| flags.iter().filter(|a| **a).count() as f64 / flags.len() as f64)
    }

    pub fn rejected_counts(&self) -> Vec<usize> {
        self.meta.iter().map(|m| m.rejected).collect()
    }

    pub fn mean_rejected(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.meta.iter().map(|m| m.rejected as f64).sum::<f64>() / self.len() as f64
    }

    /// Drops the first `burn_in` iterations.
    pub fn after_burn_in(&self, burn_in: usize) -> ChainTrace {
        let k = burn_in.min(self.len());
        ChainTrace {
            labels: self.labels.clone(),
            draws: self.draws[k..].to_vec(),
            meta: self.meta[k..].to_vec(),
            sampler: self.sampler.clone(),
            approximate: self.approximate,
        }
    }

    /// Path of the wall-clock sidecar for a trace written to `path`.
    pub fn timing_path(path: &Path) -> PathBuf {
        let mut name = path.file_stem().unwrap_or_default().to_os_string();
        name.push(".timing.csv");
        path.with_file_name(name)
    }

    /// Writes the deterministic trace and returns it as bytes-on-disk at `path`;
    /// timings go to [`ChainTrace::timing_path`].
    pub fn write_csv(&self, path: &Path) -> Result<(), DiagnosticsError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        let mut timing = csv::Writer::from_path(Self::timing_path(path))?;
        timing.write_record(["iteration", "seconds"])?;
        for (i, m) in self.meta.iter().enumerate() {
            timing.write_record([i.to_string(), m.seconds.to_string()])?;
        }
        timing.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), DiagnosticsError> {
        writeln!(out, "# sampler={} approximate={}", self.sampler, self.approximate)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string()];
        header.extend(self.labels.iter().cloned());
        header.extend(["accepted".into(), "rejected".into()]);
        w.write_record(&header)?;
        for (i, (row, m)) in self.draws.iter().zip(&self.meta).enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(match m.accepted {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => String::new(),
            });
            rec.push(m.rejected.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`ChainTrace::write_csv`]. Timings are picked
    /// up from the sidecar when present and are zero otherwise.
    pub fn read_csv(path: &Path) -> Result<ChainTrace, DiagnosticsError> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let (sampler, approximate) = parse_comment(&first)?;
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let width = header.len();
        if width < 3 || header[0] != "iteration" || header[width - 2] != "accepted" {
            return Err(DiagnosticsError::Format(format!("unexpected header {header:?}")));
        }
        let labels = header[1..width - 2].to_vec();
        let mut trace = ChainTrace::new(labels).with_sampler(sampler, approximate);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| DiagnosticsError::Format(format!("row {}: bad {what}", line + 1));
            let row = (1..width - 2)
                .map(|j| rec[j].parse::<f64>().map_err(|_| bad(&header[j])))
                .collect::<Result<Vec<_>, _>>()?;
            let accepted = match &rec[width - 2] {
                "" => None,
                "1" => Some(true),
                "0" => Some(false),
                _ => return Err(bad("accepted flag")),
            };
            let rejected = rec[width - 1].parse().map_err(|_| bad("rejected count"))?;
            trace.push(
                row,
                IterationMeta {
                    seconds: 0.0,
                    accepted,
                    rejected,
                },
            );
        }
        let timing = Self::timing_path(path);
        if timing.exists() {
            let mut rdr = csv::Reader::from_path(timing)?;
            for (m, rec) in trace.meta.iter_mut().zip(rdr.records()) {
                m.seconds = rec?[1]
                    .parse()
                    .map_err(|_| DiagnosticsError::Format("bad timing entry".into()))?;
            }
        }
        Ok(trace)
    }
}

fn parse_comment(line: &str) -> Result<(String, bool), DiagnosticsError> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| DiagnosticsError::Format("missing '# sampler=' line".into()))?;
    let mut sampler = String::new();
    let mut approximate = false;
    for field in body.split_whitespace() {
        match field.split_once('=') {
            Some(("sampler", v)) => sampler = v.to_string(),
            Some(("approximate", v)) => approximate = v == "true",
            _ => {}
        }
    }
    Ok((sampler, approximate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> ChainTrace {
        let mut t = ChainTrace::new(vec!["a".into(), "b".into()]).with_sampler("rw", false);
        for i in 0..5 {
            t.push(
                vec![i as f64 * 0.1, -1.0 / 3.0],
                IterationMeta {
                    seconds: 0.25,
                    accepted: Some(i % 2 == 0),
                    rejected: i,
                },
            );
        }
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.csv");
        let t = sample_trace();
        t.write_csv(&path).unwrap();
        assert!(dir.path().join("chain.timing.csv").exists());
        assert_eq!(ChainTrace::read_csv(&path).unwrap(), t);
    }

    #[test]
    fn bookkeeping() {
        let t = sample_trace();
        assert_eq!(t.acceptance_rate(), Some(0.6));
        assert_eq!(t.mean_rejected(), 2.0);
        assert_eq!(t.after_burn_in(3).len(), 2);
        assert_eq!(t.column_by_label("b").unwrap().len(), 5);
        assert!((t.total_seconds() - 1.25).abs() < 1e-12);
    }
}
