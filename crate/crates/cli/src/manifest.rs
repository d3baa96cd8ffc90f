//! Run manifests.
//!
//! A manifest is either TOML (the default) or JSON, chosen by file extension.
//! The copy echoed into every output directory carries the effective seed,
//! output directory, absolute data path and any normalization computed from
//! the data, so rerunning it reproduces the same traces.

use std::fs;
use std::path::{Path, PathBuf};

use rejaug::aug::DEFAULT_MAX_ATTEMPTS;
use rejaug::langevin::HmcParametrization;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Langevin,
    TruncMixture,
    Gpds,
    ToyDiscrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hmc,
    Rw,
    Exchange,
    Approx,
    EllipticalSlice,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Toml,
        }
    }

    pub fn echo_name(self) -> &'static str {
        match self {
            Self::Toml => "manifest.toml",
            Self::Json => "manifest.json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    /// Defaults to hmc (langevin), gibbs (trunc-mixture, toy-discrete) or
    /// elliptical-slice (gpds).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub parametrization: HmcParametrization,
    pub proposal_sd: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub max_attempts: u64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            method: None,
            step_size: 0.3,
            leapfrog_steps: 5,
            parametrization: HmcParametrization::Direct,
            proposal_sd: 1.0,
            iterations: 1000,
            burn_in: 100,
            chains: 1,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Affine map of each coordinate onto `[0, 1]`.
    UnitBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default)]
    pub normalization: Normalization,
    /// Raw-unit bounds mapped onto the unit box. Filled in from the data range
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LangevinSection {
    pub d: usize,
    pub p: usize,
    /// Concentrations for prior simulation.
    pub kappa: Vec<f64>,
    /// Column-major `d × p` mode for prior simulation; identity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    pub draws: usize,
    pub update_h: bool,
    pub update_g: bool,
    pub kappa_prior_shape: f64,
    pub kappa_prior_rate: f64,
}

impl Default for LangevinSection {
    fn default() -> Self {
        Self {
            d: 3,
            p: 2,
            kappa: vec![5.0, 2.0],
            g: None,
            draws: 1000,
            update_h: false,
            update_g: true,
            kappa_prior_shape: 1.0,
            kappa_prior_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureSection {
    pub truncation: usize,
    pub alpha: f64,
    /// Truncation box in model coordinates; the unit box when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Fit without truncation.
    pub whole_space: bool,
    pub init_sweeps: usize,
    pub grid_size: usize,
    pub grid_every: usize,
    /// Dimension for prior simulation.
    pub dim: usize,
    pub draws: usize,
}

impl Default for MixtureSection {
    fn default() -> Self {
        Self {
            truncation: 50,
            alpha: 1.0,
            lower: None,
            upper: None,
            whole_space: false,
            init_sweeps: 5,
            grid_size: 100,
            grid_every: 5,
            dim: 2,
            draws: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpdsSection {
    pub kernel_variance: f64,
    pub length_scale: f64,
    pub gp_mean: f64,
    pub update_kernel: bool,
    pub update_base: bool,
    pub latent_sweeps: usize,
    pub grid_size: usize,
    pub grid_every: usize,
    pub histogram_bin: usize,
    /// Base density for prior simulation.
    pub base_mean: Vec<f64>,
    pub base_variance: f64,
    pub draws: usize,
}

impl Default for GpdsSection {
    fn default() -> Self {
        Self {
            kernel_variance: 1.0,
            length_scale: 1.0,
            gp_mean: 0.0,
            update_kernel: true,
            update_base: true,
            latent_sweeps: 1,
            grid_size: 1024,
            grid_every: 5,
            histogram_bin: 10,
            base_mean: vec![0.0],
            base_variance: 1.0,
            draws: 1000,
        }
    }
}

/// Two-valued parameter selecting `f0` or `f1` over a shared proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySection {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub q: Vec<f64>,
    pub m: f64,
    pub prior: [f64; 2],
    /// Parameter value used for prior simulation.
    pub theta: usize,
    pub draws: usize,
}

impl Default for ToySection {
    fn default() -> Self {
        Self {
            f0: vec![2.0, 1.0],
            f1: vec![1.0, 2.0],
            q: vec![0.5, 0.5],
            m: 4.0,
            prior: [0.5, 0.5],
            theta: 0,
            draws: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub seed: u64,
    pub model: ModelKind,
    pub out: PathBuf,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub langevin: LangevinSection,
    #[serde(default)]
    pub mixture: MixtureSection,
    #[serde(default)]
    pub gpds: GpdsSection,
    #[serde(default)]
    pub toy: ToySection,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunManifest {
    /// Minimal manifest with every section at its default.
    pub fn new(model: ModelKind, seed: u64, out: impl Into<PathBuf>) -> Self {
        Self {
            seed,
            model,
            out: out.into(),
            sampler: SamplerSection::default(),
            data: None,
            langevin: LangevinSection::default(),
            mixture: MixtureSection::default(),
            gpds: GpdsSection::default(),
            toy: ToySection::default(),
        }
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Toml => toml::from_str(text).map_err(|e| CliError::Config(e.to_string())),
            Format::Json => serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    /// Reads and validates a manifest. A relative data path is resolved
    /// against the manifest's directory.
    pub fn load(path: &Path) -> Result<(Self, Format)> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let format = Format::from_path(path);
        let mut manifest = Self::parse(&text, format).map_err(|e| {
            CliError::Config(format!(
                "{}: {}",
                path.display(),
                e.to_string().trim_start_matches("config: ")
            ))
        })?;
        if let Some(data) = &mut manifest.data {
            if data.path.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                data.path = base.join(&data.path);
            }
        }
        manifest.validate()?;
        Ok((manifest, format))
    }

    pub fn to_text(&self, format: Format) -> Result<String> {
        match format {
            Format::Toml => toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string())),
            Format::Json => serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    /// Writes the manifest into its output directory.
    pub fn echo(&self, format: Format) -> Result<PathBuf> {
        let path = self.out.join(format.echo_name());
        fs::write(&path, self.to_text(format)?).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn method(&self) -> Method {
        self.sampler.method.unwrap_or(match self.model {
            ModelKind::Langevin => Method::Hmc,
            ModelKind::Gpds => Method::EllipticalSlice,
            ModelKind::TruncMixture | ModelKind::ToyDiscrete => Method::Gibbs,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sampler;
        let allowed: &[Method] = match self.model {
            ModelKind::Langevin => &[Method::Hmc, Method::Rw, Method::Exchange, Method::Approx],
            ModelKind::Gpds => &[Method::EllipticalSlice, Method::Hmc],
            ModelKind::TruncMixture | ModelKind::ToyDiscrete => &[Method::Gibbs],
        };
        if !allowed.contains(&self.method()) {
            return Err(config_err(
                "sampler.method",
                format!("{:?} is not available for {:?}", self.method(), self.model),
            ));
        }
        if !(s.step_size > 0.0 && s.step_size.is_finite()) {
            return Err(config_err("sampler.step_size", "must be positive"));
        }
        if s.leapfrog_steps == 0 {
            return Err(config_err("sampler.leapfrog_steps", "must be at least 1"));
        }
        if !(s.proposal_sd > 0.0 && s.proposal_sd.is_finite()) {
            return Err(config_err("sampler.proposal_sd", "must be positive"));
        }
        if s.chains == 0 {
            return Err(config_err("sampler.chains", "must be at least 1"));
        }
        if s.iterations == 0 {
            return Err(config_err("sampler.iterations", "must be at least 1"));
        }
        if let Some(data) = &self.data {
            match (&data.lower, &data.upper) {
                (Some(l), Some(u)) if l.len() != u.len() => {
                    return Err(config_err("data.lower", "length differs from data.upper"))
                }
                (Some(_), None) | (None, Some(_)) => {
                    return Err(config_err("data.lower", "data.lower and data.upper go together"))
                }
                _ => {}
            }
            if data.normalization == Normalization::UnitBox && self.model != ModelKind::TruncMixture {
                return Err(config_err(
                    "data.normalization",
                    "unit-box applies to trunc-mixture only",
                ));
            }
        }
        match self.model {
            ModelKind::Langevin => self.validate_langevin(),
            ModelKind::TruncMixture => self.validate_mixture(),
            ModelKind::Gpds => self.validate_gpds(),
            ModelKind::ToyDiscrete => self.validate_toy(),
        }
    }

    fn validate_langevin(&self) -> Result<()> {
        let l = &self.langevin;
        if l.p == 0 || l.p > l.d {
            return Err(config_err(
                "langevin.p",
                format!("need 1 <= p <= d, got d={} p={}", l.d, l.p),
            ));
        }
        if l.kappa.len() != l.p {
            return Err(config_err(
                "langevin.kappa",
                format!("expected {} values, got {}", l.p, l.kappa.len()),
            ));
        }
        if l.kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(config_err(
                "langevin.kappa",
                "concentrations must be finite and non-negative",
            ));
        }
        if let Some(g) = &l.g {
            if g.len() != l.d * l.p {
                return Err(config_err(
                    "langevin.g",
                    format!("expected {} values, got {}", l.d * l.p, g.len()),
                ));
            }
        }
        if !(l.kappa_prior_shape > 0.0 && l.kappa_prior_rate > 0.0) {
            return Err(config_err(
                "langevin.kappa_prior_shape",
                "gamma prior parameters must be positive",
            ));
        }
        Ok(())
    }

    fn validate_mixture(&self) -> Result<()> {
        let m = &self.mixture;
        if m.truncation == 0 {
            return Err(config_err("mixture.truncation", "must be at least 1"));
        }
        if !(m.alpha > 0.0 && m.alpha.is_finite()) {
            return Err(config_err("mixture.alpha", "must be positive"));
        }
        match (&m.lower, &m.upper) {
            (Some(l), Some(u)) if l.len() != u.len() => {
                return Err(config_err("mixture.lower", "length differs from mixture.upper"))
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(config_err(
                    "mixture.lower",
                    "mixture.lower and mixture.upper go together",
                ))
            }
            (Some(_), Some(_)) if m.whole_space => {
                return Err(config_err("mixture.whole_space", "conflicts with mixture.lower/upper"))
            }
            _ => {}
        }
        let unit_box = self
            .data
            .as_ref()
            .is_some_and(|d| d.normalization == Normalization::UnitBox);
        if unit_box && (m.lower.is_some() || m.whole_space) {
            return Err(config_err(
                "mixture.lower",
                "with unit-box normalization the region is the unit box",
            ));
        }
        if m.dim == 0 {
            return Err(config_err("mixture.dim", "must be at least 1"));
        }
        if m.grid_size < 2 {
            return Err(config_err("mixture.grid_size", "must be at least 2"));
        }
        Ok(())
    }

    fn validate_gpds(&self) -> Result<()> {
        let g = &self.gpds;
        if !(g.kernel_variance >= 0.0 && g.kernel_variance.is_finite()) {
            return Err(config_err("gpds.kernel_variance", "must be finite and non-negative"));
        }
        if !(g.length_scale > 0.0 && g.length_scale.is_finite()) {
            return Err(config_err("gpds.length_scale", "must be positive"));
        }
        if g.update_kernel && g.kernel_variance == 0.0 {
            return Err(config_err("gpds.update_kernel", "needs a positive kernel_variance"));
        }
        if !(1..=2).contains(&g.base_mean.len()) {
            return Err(config_err("gpds.base_mean", "dimension must be 1 or 2"));
        }
        if !(g.base_variance > 0.0 && g.base_variance.is_finite()) {
            return Err(config_err("gpds.base_variance", "must be positive"));
        }
        if g.latent_sweeps == 0 {
            return Err(config_err("gpds.latent_sweeps", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_toy(&self) -> Result<()> {
        let t = &self.toy;
        if t.theta > 1 {
            return Err(config_err("toy.theta", "must be 0 or 1"));
        }
        if !(t.f0.len() == t.q.len() && t.f1.len() == t.q.len()) {
            return Err(config_err("toy.q", "f0, f1 and q need the same number of atoms"));
        }
        rejaug::aug::toy::TwoStateToy::new(t.f0.clone(), t.f1.clone(), t.q.clone(), t.m, t.prior)
            .map(|_| ())
            .map_err(|e| config_err("toy", e))
    }
}

/// Identifies the study a `reproduce` output directory came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyManifest {
    pub study: String,
    pub seed: u64,
    pub scale: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_both_formats() {
        let m = RunManifest::new(ModelKind::Langevin, 7, "out");
        for format in [Format::Toml, Format::Json] {
            let text = m.to_text(format).unwrap();
            assert_eq!(RunManifest::parse(&text, format).unwrap(), m);
        }
    }

    #[test]
    fn errors_name_the_field() {
        let text = "seed = 1\nmodel = \"langevin\"\nout = \"x\"\n[langevin]\nkappa = [1.0]\n";
        let m = RunManifest::parse(text, Format::Toml).unwrap();
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("langevin.kappa"), "{err}");

        let err = RunManifest::parse("seed = 1\nmodel = \"langevin\"\nout = \"x\"\nsteps = 3\n", Format::Toml)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4") && err.contains("steps"), "{err}");
    }

    #[test]
    fn method_must_fit_the_model() {
        let mut m = RunManifest::new(ModelKind::Gpds, 1, "x");
        m.sampler.method = Some(Method::Exchange);
        assert!(m.validate().is_err());
        m.sampler.method = Some(Method::Hmc);
        assert!(m.validate().is_ok());
    }
}
