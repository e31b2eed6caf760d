//! Experiment configuration: TOML schema, flag parsers, validation and hashing.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use frontier_core::field::GridSpec;
use frontier_core::levy::TimeTestFunction;
use frontier_core::spectral::{HurstVector, MollifierKind, MollifierSpec};
use frontier_core::wave::ClassETestFunction;

/// A configuration problem located at a field path such as `hurst[1]`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Experiment families, one per subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LevyScan,
    WaveMoment,
    Diverge,
    ThresholdScan,
    Simulate,
    Classify,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::LevyScan => "levy-scan",
            ExperimentKind::WaveMoment => "wave-moment",
            ExperimentKind::Diverge => "diverge",
            ExperimentKind::ThresholdScan => "threshold-scan",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Classify => "classify",
        }
    }
}

/// Quantity computed by `wave-moment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveQuantity {
    /// Moment decomposition of the regular regime.
    #[default]
    Ia,
    /// Wick-renormalized moment.
    Ib,
    /// K_H double integral under truncation doubling.
    Kh,
    /// Decay exponent probe.
    Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestFunctionConfig {
    /// Support of the time bump phi.
    pub phi_support: [f64; 2],
    /// Initial half-width of the spatial bump psi.
    pub psi_width: f64,
}

impl Default for TestFunctionConfig {
    fn default() -> Self {
        Self {
            phi_support: [0.5, 1.0],
            psi_width: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifierConfig {
    /// `gaussian` or `bump`.
    pub kind: String,
    pub scale: f64,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self {
            kind: "gaussian".into(),
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub cells_per_axis: usize,
    pub xi_radius: Option<f64>,
    pub eta_radius: Option<f64>,
    pub inner: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            cells_per_axis: g.cells_per_axis,
            xi_radius: g.xi_radius,
            eta_radius: g.eta_radius,
            inner: g.inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveConfig {
    pub quantity: WaveQuantity,
    /// Evaluation time of the moment functionals.
    pub t: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub eps: f64,
    /// First truncation radius of the K_H sweep.
    pub radius: f64,
    /// Number of radius doublings in the K_H sweep.
    pub doublings: u32,
    /// Time argument of the decay probe.
    pub s: f64,
    pub eta_magnitudes: Vec<f64>,
    /// Spatial weight scale.
    pub weight_scale: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            quantity: WaveQuantity::Ia,
            t: 1.0,
            gamma: 0.1,
            alpha: 0.3,
            kappa: 0.01,
            eps: 0.01,
            radius: 64.0,
            doublings: 12,
            s: 1.0,
            eta_magnitudes: vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            weight_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Counterterm: `standard-wick` or `none`.
    pub mode: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            mode: "standard-wick".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// Full Hurst vectors to scan.
    pub points: Vec<Vec<f64>>,
    /// Values repeated in every coordinate, used when `points` is empty.
    pub uniform: Vec<f64>,
}

/// A Hurst vector given either as a TOML array or as a comma-separated string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HurstInput {
    List(Vec<f64>),
    Text(String),
}

/// Raw configuration as read from a file and overridden by flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub d: Option<usize>,
    pub hurst: Option<HurstInput>,
    /// Inclusive range `A..B`.
    pub n_range: Option<String>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    /// Monte Carlo points per integral.
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub test_function: TestFunctionConfig,
    pub mollifier: MollifierConfig,
    pub grid: GridConfig,
    pub wave: WaveConfig,
    pub scan: ScanConfig,
    pub simulate: SimulateConfig,
}

pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_SAMPLES: usize = 200_000;
pub const DEFAULT_REPLICAS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Largest n accepted anywhere; the decay probe uses n as a plain cutoff radius.
pub const MAX_N: u32 = 1_000_000;
/// Largest n for engines whose mollifier works at scale 2^-n.
pub const MAX_DYADIC_N: u32 = 60;

/// Parses `0.1,0.2` into Hurst values without range checks.
pub fn parse_hurst(text: &str) -> Result<Vec<f64>, ConfigError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ConfigError::new("hurst", "empty Hurst list"));
    }
    text.split(',')
        .enumerate()
        .map(|(i, part)| {
            let p = part.trim();
            let v: f64 = p
                .parse()
                .map_err(|_| ConfigError::new(format!("hurst[{i}]"), format!("`{p}` is not a number")))?;
            if !v.is_finite() {
                return Err(ConfigError::new(format!("hurst[{i}]"), "value must be finite"));
            }
            Ok(v)
        })
        .collect()
}

/// Parses an inclusive range `A..B` (or a single `A`) of nonnegative integers.
pub fn parse_n_range(text: &str) -> Result<(u32, u32), ConfigError> {
    let err = |m: String| ConfigError::new("n_range", m);
    let text = text.trim();
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (text, text),
    };
    let a: u32 = a
        .parse()
        .map_err(|_| err(format!("`{a}` is not a nonnegative integer")))?;
    let b: u32 = b
        .parse()
        .map_err(|_| err(format!("`{b}` is not a nonnegative integer")))?;
    if a > b {
        return Err(err(format!("empty range {a}..{b}")));
    }
    if b > MAX_N {
        return Err(err(format!("n = {b} exceeds the supported maximum {MAX_N}")));
    }
    Ok((a, b))
}

/// Parses a TOML document into a raw configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let field = e
            .span()
            .map(|s| {
                // name the key of the offending line when toml gives a span
                let line_start = text[..s.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
                let line = &text[line_start..];
                line.split(['=', '\n']).next().unwrap_or("").trim().to_string()
            })
            .filter(|f| !f.is_empty())
            .unwrap_or_else(|| "<document>".into());
        ConfigError::new(field, e.message().to_string())
    })
}

/// Fully checked parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    /// Hurst vector (H0, H1, ..., Hd); for `levy-scan` a single index.
    pub hurst: Vec<f64>,
    pub n_range: (u32, u32),
    pub replicas: usize,
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub test_function: TestFunctionConfig,
    pub mollifier: MollifierConfig,
    pub grid: GridConfig,
    pub wave: WaveConfig,
    pub simulate: SimulateConfig,
    pub scan_points: Vec<Vec<f64>>,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("{v} must be positive and finite")))
    }
}

fn check_hurst(field: &str, d: usize, h: &[f64]) -> Result<HurstVector, ConfigError> {
    if h.len() != d + 1 {
        return Err(ConfigError::new(
            field,
            format!(
                "expected {} values (H0 and {d} spatial {}), got {}",
                d + 1,
                if d == 1 { "index" } else { "indices" },
                h.len()
            ),
        ));
    }
    if !(h[0] > 0.0 && h[0] < 1.0) {
        return Err(ConfigError::new(
            format!("{field}[0]"),
            format!("H0 = {} must lie in (0, 1)", h[0]),
        ));
    }
    for (i, &v) in h.iter().enumerate().skip(1) {
        if !(v > 0.0 && v < 0.75) {
            return Err(ConfigError::new(
                format!("{field}[{i}]"),
                format!("H{i} = {v} must lie in (0, 3/4)"),
            ));
        }
    }
    HurstVector::new(h.to_vec()).map_err(|e| ConfigError::new(field, e.to_string()))
}

impl ExperimentConfig {
    /// Checks every field the chosen experiment uses.
    pub fn validate(&self, kind: ExperimentKind) -> Result<ValidatedConfig, ConfigError> {
        let d = self.d.unwrap_or(1);
        if d == 0 {
            return Err(ConfigError::new("d", "dimension must be at least 1"));
        }
        let needs_engine = !matches!(kind, ExperimentKind::Classify | ExperimentKind::LevyScan);
        if needs_engine && d > 2 {
            return Err(ConfigError::new(
                "d",
                format!("{} supports d <= 2, got {d}", kind.as_str()),
            ));
        }
        let hurst = match &self.hurst {
            Some(HurstInput::List(v)) => v.clone(),
            Some(HurstInput::Text(t)) => parse_hurst(t)?,
            None => Vec::new(),
        };
        match kind {
            ExperimentKind::LevyScan => {
                if hurst.len() != 1 {
                    return Err(ConfigError::new("hurst", "levy-scan takes a single Hurst index"));
                }
                if !(hurst[0] > 0.0 && hurst[0] < 1.0) {
                    return Err(ConfigError::new(
                        "hurst[0]",
                        format!("H = {} must lie in (0, 1)", hurst[0]),
                    ));
                }
            }
            ExperimentKind::ThresholdScan => {}
            _ => {
                if hurst.is_empty() {
                    return Err(ConfigError::new("hurst", "a Hurst vector is required"));
                }
                check_hurst("hurst", d, &hurst)?;
            }
        }
        let n_range = match &self.n_range {
            Some(t) => parse_n_range(t)?,
            None => match kind {
                ExperimentKind::LevyScan => (4, 12),
                _ => (4, 8),
            },
        };
        let probe = kind == ExperimentKind::WaveMoment && self.wave.quantity == WaveQuantity::Probe;
        if n_range.1 > MAX_DYADIC_N && !probe {
            return Err(ConfigError::new(
                "n_range",
                format!(
                    "n = {} exceeds the maximum {MAX_DYADIC_N} of {}",
                    n_range.1,
                    kind.as_str()
                ),
            ));
        }
        if n_range.0 == 0 && !matches!(kind, ExperimentKind::Classify) {
            return Err(ConfigError::new("n_range", "n must be at least 1"));
        }
        let replicas = self.replicas.unwrap_or(DEFAULT_REPLICAS);
        if replicas < 2 {
            return Err(ConfigError::new("replicas", "at least two replicas are required"));
        }
        let tol = self.tol.unwrap_or(DEFAULT_TOL);
        positive("tol", tol)?;
        let samples = self.samples.unwrap_or(DEFAULT_SAMPLES);
        if samples < 2 {
            return Err(ConfigError::new("samples", "at least two samples are required"));
        }
        if let Some(0) = self.threads {
            return Err(ConfigError::new("threads", "thread count must be positive"));
        }
        let tf = &self.test_function;
        let [lo, hi] = tf.phi_support;
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(ConfigError::new(
                "test_function.phi_support",
                "support must satisfy 0 <= lo < hi",
            ));
        }
        positive("test_function.psi_width", tf.psi_width)?;
        match self.mollifier.kind.as_str() {
            "gaussian" | "bump" => {}
            other => {
                return Err(ConfigError::new(
                    "mollifier.kind",
                    format!("unknown mollifier `{other}`, expected gaussian or bump"),
                ))
            }
        }
        positive("mollifier.scale", self.mollifier.scale)?;
        let g = &self.grid;
        if g.cells_per_axis < 2 || !g.cells_per_axis.is_multiple_of(2) {
            return Err(ConfigError::new("grid.cells_per_axis", "must be even and at least 2"));
        }
        positive("grid.inner", g.inner)?;
        if let Some(r) = g.xi_radius {
            positive("grid.xi_radius", r)?;
        }
        if let Some(r) = g.eta_radius {
            positive("grid.eta_radius", r)?;
        }
        let w = &self.wave;
        positive("wave.weight_scale", w.weight_scale)?;
        if !(w.t >= 0.0 && w.t.is_finite()) {
            return Err(ConfigError::new("wave.t", "t must be nonnegative"));
        }
        if kind == ExperimentKind::WaveMoment {
            match w.quantity {
                WaveQuantity::Kh => {
                    positive("wave.kappa", w.kappa)?;
                    positive("wave.eps", w.eps)?;
                    if !(w.radius > 1.0 && w.radius.is_finite()) {
                        return Err(ConfigError::new("wave.radius", "truncation radius must exceed 1"));
                    }
                    if w.doublings == 0 || w.doublings > 40 {
                        return Err(ConfigError::new("wave.doublings", "must lie in 1..=40"));
                    }
                }
                WaveQuantity::Probe => {
                    if w.eta_magnitudes.len() < 2 {
                        return Err(ConfigError::new(
                            "wave.eta_magnitudes",
                            "at least two magnitudes are required",
                        ));
                    }
                    for (i, &a) in w.eta_magnitudes.iter().enumerate() {
                        positive(&format!("wave.eta_magnitudes[{i}]"), a)?;
                    }
                    positive("wave.s", w.s)?;
                }
                WaveQuantity::Ia | WaveQuantity::Ib => {}
            }
        }
        match self.simulate.mode.as_str() {
            "standard-wick" | "none" => {}
            other => {
                return Err(ConfigError::new(
                    "simulate.mode",
                    format!("unknown counterterm `{other}`, expected standard-wick or none"),
                ))
            }
        }
        let scan_points = if kind == ExperimentKind::ThresholdScan {
            let pts: Vec<Vec<f64>> = if !self.scan.points.is_empty() {
                self.scan.points.clone()
            } else if !self.scan.uniform.is_empty() {
                self.scan.uniform.iter().map(|&v| vec![v; d + 1]).collect()
            } else if !hurst.is_empty() {
                vec![hurst.clone()]
            } else {
                return Err(ConfigError::new(
                    "scan",
                    "threshold-scan needs scan.points, scan.uniform or hurst",
                ));
            };
            for (i, p) in pts.iter().enumerate() {
                check_hurst(&format!("scan.points[{i}]"), d, p)?;
            }
            pts
        } else {
            Vec::new()
        };
        Ok(ValidatedConfig {
            experiment: kind,
            d,
            hurst,
            n_range,
            replicas,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            tol,
            samples,
            test_function: tf.clone(),
            mollifier: self.mollifier.clone(),
            grid: g.clone(),
            wave: w.clone(),
            simulate: self.simulate.clone(),
            scan_points,
        })
    }
}

impl ValidatedConfig {
    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("validated configs serialize");
        hex::encode(Sha256::digest(&json))
    }

    pub fn hurst_vector(&self) -> frontier_core::Result<HurstVector> {
        HurstVector::new(self.hurst.clone())
    }

    pub fn mollifier_spec(&self) -> frontier_core::Result<MollifierSpec> {
        let kind = match self.mollifier.kind.as_str() {
            "bump" => MollifierKind::CompactBump,
            _ => MollifierKind::GaussianProduct,
        };
        MollifierSpec::new(kind, self.mollifier.scale)
    }

    pub fn time_test_function(&self) -> frontier_core::Result<TimeTestFunction> {
        let [lo, hi] = self.test_function.phi_support;
        TimeTestFunction::bump(lo, hi)
    }

    pub fn class_e(&self) -> frontier_core::Result<ClassETestFunction> {
        ClassETestFunction::new(self.time_test_function()?, self.d, self.test_function.psi_width)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            cells_per_axis: self.grid.cells_per_axis,
            xi_radius: self.grid.xi_radius,
            eta_radius: self.grid.eta_radius,
            inner: self.grid.inner,
        }
    }
}
