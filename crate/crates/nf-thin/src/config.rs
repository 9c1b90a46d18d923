//! Run configuration: JSON file with one flat section per module, plus
//! `section.key=value` overrides from the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nf_thin_core::baselines::{Deployment, Normalization, Scheme};
use nf_thin_core::channel::{pathloss, ScenarioSampler, Validity};
use nf_thin_core::precoder::{
    PowerConfig, PowerNormalization, Regularization, RzfConfig, SnrReference,
};
use nf_thin_core::pso::{GtaConfig, Inertia, SwarmConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("override `{key}`: {message}")]
    Override { key: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub array: ArraySection,
    pub channel: ChannelSection,
    pub power: PowerSection,
    pub precoder: PrecoderSection,
    pub pso: PsoSection,
    pub gta: GtaSection,
    pub pta: PtaSection,
    pub experiment: ExperimentSection,
    pub fig1: Fig1Section,
}

/// Full array and the derived benchmark layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub carrier_hz: f64,
    pub n_elements: usize,
    pub n_active: usize,
    pub sula_spacing_wl: f64,
    pub mula_half_width_wl: f64,
    pub mula_min_spacing_wl: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            carrier_hz: 30e9,
            n_elements: 320,
            n_active: 32,
            sula_spacing_wl: 5.0,
            mula_half_width_wl: 80.0,
            mula_min_spacing_wl: 0.5,
        }
    }
}

/// User drop region. Unset ranges default to `[2D, R_D/7]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub range_min_m: Option<f64>,
    pub range_max_m: Option<f64>,
    /// `strict` rejects users inside `2D`, `lenient` counts them.
    pub validity: String,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            angle_min_deg: -60.0,
            angle_max_deg: 60.0,
            range_min_m: None,
            range_max_m: None,
            validity: "strict".into(),
        }
    }
}

/// Transmit power derived from an SNR figure.
///
/// `convention`:
/// - `per_element_per_user`: one element sending one user's share `P/K`
///   to a user at the reference range sees `snr_db`;
/// - `per_element`: one element sending the full budget sees `snr_db`;
/// - `total`: the full budget with unit beamforming gain sees `snr_db`.
///
/// `reference_range` is `mid` or `edge` of the drop interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub snr_db: f64,
    pub noise_variance: f64,
    pub convention: String,
    pub reference_range: String,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            snr_db: 20.0,
            noise_variance: 1.0,
            convention: "per_element_per_user".into(),
            reference_range: "mid".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecoderSection {
    /// Fixed regularization; unset uses `K·σ²/P`.
    pub alpha: Option<f64>,
    /// `sum_power` or `equal_per_user`.
    pub normalization: String,
}

impl Default for PrecoderSection {
    fn default() -> Self {
        Self {
            alpha: None,
            normalization: "sum_power".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoSection {
    pub particles: usize,
    pub iterations: usize,
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_clamp: f64,
}

impl Default for PsoSection {
    fn default() -> Self {
        let s = SwarmConfig::default();
        let (start, end) = match s.inertia {
            Inertia::Linear { start, end } => (start, end),
            Inertia::Constant(w) => (w, w),
        };
        Self {
            particles: s.n_particles,
            iterations: s.n_iterations,
            inertia_start: start,
            inertia_end: end,
            cognitive: s.cognitive,
            social: s.social,
            velocity_clamp: s.velocity_clamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GtaSection {
    pub coverage_deg: Vec<f64>,
    pub threshold_db: f64,
    pub penalty_weight: f64,
    pub kappa: f64,
    pub angle_points: usize,
}

impl Default for GtaSection {
    fn default() -> Self {
        let g = GtaConfig::default();
        Self {
            coverage_deg: g.coverage.iter().map(|a| a.to_degrees()).collect(),
            threshold_db: g.threshold_db,
            penalty_weight: g.penalty_weight,
            kappa: g.kappa,
            angle_points: g.grid_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PtaSection {
    pub ensemble_size: usize,
}

impl Default for PtaSection {
    fn default() -> Self {
        Self { ensemble_size: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub fig2_trials: usize,
    pub fig2_users: usize,
    pub fig3_trials: usize,
    pub fig3_users: usize,
    pub fig4_trials: usize,
    pub fig4_users: Vec<usize>,
    pub schemes: Vec<String>,
    /// `reference` (common per-element gain) or `own` (per-scheme count).
    pub fig3_normalization: String,
    /// Range bins of the range-only experiment.
    pub fig2_bins: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 1,
            fig2_trials: 200,
            fig2_users: 4,
            fig3_trials: 500,
            fig3_users: 16,
            fig4_trials: 100,
            fig4_users: vec![2, 4, 8, 16, 24, 32],
            schemes: Scheme::ALL.iter().map(|s| s.name().to_string()).collect(),
            fig3_normalization: "reference".into(),
            fig2_bins: 10,
        }
    }
}

/// Beam-pattern experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1Section {
    pub carrier_hz: f64,
    pub n_elements: usize,
    pub spacing_wl: f64,
    pub focus_angle_deg: f64,
    pub focus_range_m: f64,
    pub map_angle_points: usize,
    pub map_range_points: usize,
    pub cut_angle_points: usize,
    pub cut_range_points: usize,
    pub range_min_m: f64,
}

impl Default for Fig1Section {
    fn default() -> Self {
        Self {
            carrier_hz: 15e9,
            n_elements: 256,
            spacing_wl: 2.0,
            focus_angle_deg: 0.0,
            focus_range_m: 346.0,
            map_angle_points: 361,
            map_range_points: 121,
            cut_angle_points: 8192,
            cut_range_points: 4096,
            range_min_m: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrConvention {
    PerElementPerUser,
    PerElement,
    Total,
}

impl Config {
    /// Reads `path` (if any), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_json(&text, p)?
            }
            None => Self::default(),
        };
        let cfg = base.with_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Applies `section.key=value` assignments. Values are parsed as JSON
    /// and fall back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = serde_json::to_value(self).expect("config serializes");
        for item in overrides {
            let err = |message: &str| ConfigError::Override {
                key: item.clone(),
                message: message.into(),
            };
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| err("expected section.key=value"))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| err("expected section.key=value"))?;
            let value = serde_json::from_str::<Value>(raw.trim())
                .unwrap_or_else(|_| Value::String(raw.trim().into()));
            let obj = root
                .get_mut(section)
                .and_then(Value::as_object_mut)
                .ok_or_else(|| err("unknown section"))?;
            obj.insert(field.to_string(), value);
            serde_json::from_value::<Config>(root.clone()).map_err(|e| ConfigError::Override {
                key: item.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(serde_json::from_value(root).expect("checked above"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = &self.array;
        if !(a.carrier_hz > 0.0) {
            return Err(invalid("array.carrier_hz", "must be positive"));
        }
        if a.n_active < 2 || a.n_active > a.n_elements {
            return Err(invalid(
                "array.n_active",
                "must lie in [2, array.n_elements]",
            ));
        }
        self.deployment()
            .map_err(|e| invalid("array", e.to_string()))?;
        self.snr_convention()?;
        self.validity()?;
        self.rzf()?;
        self.swarm(0)
            .validate()
            .map_err(|e| invalid("pso", e.to_string()))?;
        if self.gta.coverage_deg.is_empty()
            || self.gta.coverage_deg.iter().any(|d| !(d.abs() < 90.0))
        {
            return Err(invalid(
                "gta.coverage_deg",
                "needs at least one angle inside (-90, 90)",
            ));
        }
        if self.gta.angle_points < 16 {
            return Err(invalid("gta.angle_points", "must be at least 16"));
        }
        if self.pta.ensemble_size == 0 {
            return Err(invalid("pta.ensemble_size", "must be positive"));
        }
        let e = &self.experiment;
        for (field, n) in [
            ("experiment.fig2_trials", e.fig2_trials),
            ("experiment.fig3_trials", e.fig3_trials),
            ("experiment.fig4_trials", e.fig4_trials),
            ("experiment.fig2_users", e.fig2_users),
            ("experiment.fig3_users", e.fig3_users),
            ("experiment.fig2_bins", e.fig2_bins),
        ] {
            if n == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if e.fig4_users.is_empty() || e.fig4_users.contains(&0) {
            return Err(invalid(
                "experiment.fig4_users",
                "needs positive user counts",
            ));
        }
        self.schemes()?;
        self.fig3_normalization()?;
        self.sampler()?;
        let f = &self.fig1;
        if f.n_elements < 2
            || !(f.spacing_wl > 0.0)
            || !(f.focus_range_m > 0.0)
            || !(f.range_min_m > 0.0)
        {
            return Err(invalid(
                "fig1",
                "array size, spacing and ranges must be positive",
            ));
        }
        if f.map_angle_points < 2
            || f.map_range_points < 2
            || f.cut_angle_points < 2
            || f.cut_range_points < 2
        {
            return Err(invalid("fig1", "grids need at least two points"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        nf_thin_core::wavelength(self.array.carrier_hz)
    }

    pub fn deployment(&self) -> nf_thin_core::Result<Deployment> {
        let lam = self.wavelength();
        let a = &self.array;
        let mut d = Deployment::new(
            a.n_elements,
            a.n_active,
            lam,
            a.sula_spacing_wl * lam,
            a.mula_half_width_wl * lam,
        )?;
        d.mula_min_spacing = a.mula_min_spacing_wl * lam;
        Ok(d)
    }

    pub fn sampler(&self) -> Result<ScenarioSampler, ConfigError> {
        let d = self
            .deployment()
            .map_err(|e| invalid("array", e.to_string()))?;
        let default = ScenarioSampler::default_for(&d.geometry);
        let c = &self.channel;
        let range = (
            c.range_min_m.unwrap_or(default.range.0),
            c.range_max_m.unwrap_or(default.range.1),
        );
        ScenarioSampler::new(
            range,
            (c.angle_min_deg.to_radians(), c.angle_max_deg.to_radians()),
        )
        .map_err(|e| invalid("channel", e.to_string()))
    }

    /// Sampler with every user on the given angle.
    pub fn sampler_at_angle(&self, angle_deg: f64) -> Result<ScenarioSampler, ConfigError> {
        let s = self.sampler()?;
        let a = angle_deg.to_radians();
        ScenarioSampler::new(s.range, (a, a)).map_err(|e| invalid("channel", e.to_string()))
    }

    pub fn validity(&self) -> Result<Validity, ConfigError> {
        match self.channel.validity.as_str() {
            "strict" => Ok(Validity::Strict),
            "lenient" => Ok(Validity::Lenient),
            other => Err(invalid(
                "channel.validity",
                format!("`{other}` is not strict|lenient"),
            )),
        }
    }

    pub fn snr_convention(&self) -> Result<SnrConvention, ConfigError> {
        if !matches!(self.power.reference_range.as_str(), "mid" | "edge") {
            return Err(invalid("power.reference_range", "expected mid|edge"));
        }
        if !(self.power.noise_variance > 0.0) {
            return Err(invalid("power.noise_variance", "must be positive"));
        }
        match self.power.convention.as_str() {
            "per_element_per_user" => Ok(SnrConvention::PerElementPerUser),
            "per_element" => Ok(SnrConvention::PerElement),
            "total" => Ok(SnrConvention::Total),
            other => Err(invalid(
                "power.convention",
                format!("`{other}` is not per_element_per_user|per_element|total"),
            )),
        }
    }

    /// Power budget for `k` users.
    pub fn power(&self, k: usize) -> Result<PowerConfig, ConfigError> {
        let sampler = self.sampler()?;
        let r_ref = match self.power.reference_range.as_str() {
            "edge" => sampler.range.1,
            _ => sampler.reference_range(),
        };
        let n_ref = self.array.n_elements as f64;
        let gain = match self.snr_convention()? {
            SnrConvention::PerElementPerUser => 1.0 / (n_ref * k as f64),
            SnrConvention::PerElement => 1.0 / n_ref,
            SnrConvention::Total => 1.0,
        };
        let beta =
            pathloss(self.wavelength(), r_ref).map_err(|e| invalid("power", e.to_string()))?;
        PowerConfig::from_snr(
            self.power.snr_db,
            self.power.noise_variance,
            SnrReference {
                pathloss: beta,
                beamforming_gain: gain,
            },
        )
        .map_err(|e| invalid("power", e.to_string()))
    }

    pub fn rzf(&self) -> Result<RzfConfig, ConfigError> {
        let regularization = match self.precoder.alpha {
            None => Regularization::Mmse,
            Some(a) if a >= 0.0 => Regularization::Fixed(a),
            Some(_) => return Err(invalid("precoder.alpha", "must be non-negative")),
        };
        let normalization = match self.precoder.normalization.as_str() {
            "sum_power" => PowerNormalization::SumPower,
            "equal_per_user" => PowerNormalization::EqualPerUser,
            other => {
                return Err(invalid(
                    "precoder.normalization",
                    format!("`{other}` is not sum_power|equal_per_user"),
                ))
            }
        };
        Ok(RzfConfig {
            regularization,
            normalization,
        })
    }

    pub fn swarm(&self, seed: u64) -> SwarmConfig {
        let p = &self.pso;
        SwarmConfig {
            n_particles: p.particles,
            n_iterations: p.iterations,
            inertia: Inertia::Linear {
                start: p.inertia_start,
                end: p.inertia_end,
            },
            cognitive: p.cognitive,
            social: p.social,
            velocity_clamp: p.velocity_clamp,
            seed,
        }
    }

    pub fn gta_config(&self) -> GtaConfig {
        let g = &self.gta;
        GtaConfig {
            coverage: g.coverage_deg.iter().map(|d| d.to_radians()).collect(),
            threshold_db: g.threshold_db,
            penalty_weight: g.penalty_weight,
            kappa: g.kappa,
            grid_points: g.angle_points,
        }
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, ConfigError> {
        let mut out = Vec::new();
        for name in &self.experiment.schemes {
            let s: Scheme = name
                .parse()
                .map_err(|_| invalid("experiment.schemes", format!("unknown scheme `{name}`")))?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
        if out.is_empty() {
            return Err(invalid("experiment.schemes", "needs at least one scheme"));
        }
        Ok(out)
    }

    pub fn fig3_normalization(&self) -> Result<Normalization, ConfigError> {
        match self.experiment.fig3_normalization.as_str() {
            "reference" => Ok(Normalization::Reference(self.array.n_elements)),
            "own" => Ok(Normalization::OwnCount),
            other => Err(invalid(
                "experiment.fig3_normalization",
                format!("`{other}` is not reference|own"),
            )),
        }
    }

    /// Reduced budget for quick runs: 50 trials, 20 particles, 40 iterations.
    pub fn ci_profile(mut self) -> Self {
        self.experiment.fig3_trials = 50;
        self.pso.particles = 20;
        self.pso.iterations = 40;
        self
    }
}

/// One line per tunable with its default, for `--help`.
pub fn tunables_help() -> String {
    let v = serde_json::to_value(Config::default()).expect("config serializes");
    let mut s = String::from("Tunables (config file sections, or --set section.key=value):\n");
    if let Value::Object(sections) = v {
        for (name, section) in sections {
            if let Value::Object(fields) = section {
                for (k, val) in fields {
                    let _ = writeln!(s, "  {name}.{k} = {val}");
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn overrides_apply_and_reject_unknown_keys() {
        let c = Config::default()
            .with_overrides(&["pso.particles=20".into(), "power.convention=total".into()])
            .unwrap();
        assert_eq!(c.pso.particles, 20);
        assert_eq!(c.power.convention, "total");
        let e = Config::default()
            .with_overrides(&["pso.particle=20".into()])
            .unwrap_err();
        assert!(e.to_string().contains("unknown field"), "{e}");
        assert!(Config::default()
            .with_overrides(&["nope.x=1".into()])
            .is_err());
        assert!(Config::default().with_overrides(&["pso".into()]).is_err());
    }

    #[test]
    fn parse_errors_carry_position() {
        let e =
            Config::from_json("{\n  \"pso\": {\"bogus\": 1}\n}", Path::new("c.json")).unwrap_err();
        match e {
            ConfigError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn snr_conventions_scale_power() {
        let c = Config::default();
        let p1 = c.power(16).unwrap().total_power;
        let p2 = c.power(32).unwrap().total_power;
        assert!((p2 / p1 - 2.0).abs() < 1e-12);
        let total = c
            .with_overrides(&["power.convention=\"total\"".into()])
            .unwrap();
        let per = c
            .with_overrides(&["power.convention=per_element".into()])
            .unwrap();
        let r = per.power(16).unwrap().total_power / total.power(16).unwrap().total_power;
        assert!((r - 320.0).abs() < 1e-9);
    }

    #[test]
    fn tunables_cover_every_section() {
        let h = tunables_help();
        for key in [
            "array.n_active",
            "power.convention",
            "pso.velocity_clamp",
            "gta.coverage_deg",
            "pta.ensemble_size",
            "experiment.fig4_users",
            "fig1.focus_range_m",
            "precoder.alpha",
        ] {
            assert!(h.contains(key), "{key}");
        }
    }
}
