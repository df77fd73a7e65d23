//! Run configuration: a TOML document with `[model]`, `[scenario]`,
//! `[filter]` and `[noise]` tables. Every key is optional and defaults to the
//! case-study value. A run manifest is accepted as well; its `[config]`
//! table is used.

use std::fmt;
use std::path::Path;

use lpv_fdi::vehicle::{
    BicycleModel, BicycleParams, FaultSpec, MatrixSigns, PdGains, ScenarioConfig, Sinusoid,
};
use lpv_fdi::SynthesisOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelSection,
    pub scenario: ScenarioSection,
    pub filter: FilterSection,
    pub noise: NoiseSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signs {
    Standard,
    AsPrinted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Front cornering stiffness [N/rad].
    pub cornering_front: f64,
    /// Rear cornering stiffness [N/rad].
    pub cornering_rear: f64,
    pub lf: f64,
    pub lr: f64,
    pub mass: f64,
    pub inertia: f64,
    pub gravity: f64,
    /// Sampling time [s].
    pub sample_time: f64,
    pub matrix_signs: Signs,
    /// Scales the fault input column; 0 removes the fault from the model.
    pub fault_scale: f64,
    pub velocity_min: f64,
    pub velocity_max: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = BicycleParams::default();
        let m = BicycleModel::default();
        Self {
            cornering_front: p.cornering_front,
            cornering_rear: p.cornering_rear,
            lf: p.lf,
            lr: p.lr,
            mass: p.mass,
            inertia: p.inertia,
            gravity: p.gravity,
            sample_time: p.sample_time,
            matrix_signs: Signs::Standard,
            fault_scale: m.fault_scale,
            velocity_min: m.velocity_bounds.0,
            velocity_max: m.velocity_bounds.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub n_samples: usize,
    /// `v_x(t) = offset + amplitude · sin(omega · t)` [m/s].
    pub velocity_offset: f64,
    pub velocity_amplitude: f64,
    pub velocity_omega: f64,
    /// Road banking angle φ(t) [rad].
    pub banking_offset: f64,
    pub banking_amplitude: f64,
    pub banking_omega: f64,
    /// Road curvature κ(t) [1/m].
    pub curvature_offset: f64,
    pub curvature_amplitude: f64,
    pub curvature_omega: f64,
    /// White noise on `(sin φ, κ)`.
    pub disturbance_noise_std: [f64; 2],
    /// Constant steering offset [rad] from sample `fault_start`.
    pub fault_magnitude: f64,
    pub fault_start: usize,
    pub initial_state: [f64; 4],
    pub kp: f64,
    pub kd: f64,
    pub k_heading: f64,
    pub steering_limit: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            n_samples: s.n_samples,
            velocity_offset: s.velocity.offset,
            velocity_amplitude: s.velocity.amplitude,
            velocity_omega: s.velocity.omega,
            banking_offset: s.banking.offset,
            banking_amplitude: s.banking.amplitude,
            banking_omega: s.banking.omega,
            curvature_offset: s.curvature.offset,
            curvature_amplitude: s.curvature.amplitude,
            curvature_omega: s.curvature.omega,
            disturbance_noise_std: s.disturbance_noise_std,
            fault_magnitude: s.fault.magnitude,
            fault_start: s.fault.start,
            initial_state: s.initial_state,
            kp: s.gains.kp,
            kd: s.gains.kd,
            k_heading: s.gains.k_heading,
            steering_limit: s.gains.saturation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_tol_factor: Option<f64>,
    /// Real poles of the denominator `a(q)`.
    pub poles: Vec<f64>,
    /// Filter order; defaults to the number of poles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub lti_baseline_velocity: f64,
    /// Reuse syntheses for bit-identical parameter windows.
    pub cache: bool,
    /// Windows sampled by `fdi check`.
    pub check_windows: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        let o = SynthesisOptions::default();
        let s = ScenarioConfig::default();
        Self {
            gamma: o.gamma,
            rank_tol_factor: o.rank_tol_factor,
            poles: s.poles,
            order: s.order,
            lti_baseline_velocity: s.lti_baseline_velocity,
            cache: s.cache,
            check_windows: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub enabled: bool,
    /// Standard deviations for yaw rate [rad/s], lateral deviation [m] and
    /// heading deviation [rad].
    pub std: [f64; 3],
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            enabled: s.noise_enabled,
            std: s.noise_std,
            seed: s.seed,
        }
    }
}

/// A configuration problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.path, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.path, self.message),
            _ => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Manifest layout as far as loading is concerned.
#[derive(Deserialize)]
struct ManifestEnvelope {
    config: Config,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Line of `key = ...` inside `[section]` (or `[config.section]`).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().trim_start_matches("config.").to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: shown.clone(),
            line: None,
            column: None,
            message: format!("cannot read: {e}"),
        })?;
        Self::parse(&text, &shown)
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let is_manifest = text
            .lines()
            .any(|l| matches!(l.trim(), "[config]") || l.trim().starts_with("[config."));
        let parsed = if is_manifest {
            toml::from_str::<ManifestEnvelope>(text).map(|m| m.config)
        } else {
            toml::from_str::<Config>(text)
        };
        let cfg = parsed.map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .map_or((None, None), |(l, c)| (Some(l), Some(c)));
            ConfigError {
                path: path.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|(section, key, message)| ConfigError {
            path: path.to_string(),
            line: locate(text, section, key),
            column: None,
            message: format!("{section}.{key}: {message}"),
        })?;
        Ok(cfg)
    }

    /// Semantic checks; errors name the offending `(section, key)`.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let m = &self.model;
        let positive = [
            ("cornering_front", m.cornering_front),
            ("cornering_rear", m.cornering_rear),
            ("lf", m.lf),
            ("lr", m.lr),
            ("mass", m.mass),
            ("inertia", m.inertia),
            ("gravity", m.gravity),
            ("sample_time", m.sample_time),
            ("velocity_min", m.velocity_min),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(("model", key, format!("must be positive, got {v}")));
            }
        }
        if !(m.velocity_max > m.velocity_min && m.velocity_max.is_finite()) {
            return Err(("model", "velocity_max", "must exceed velocity_min".into()));
        }
        if !m.fault_scale.is_finite() {
            return Err(("model", "fault_scale", "must be finite".into()));
        }

        let s = &self.scenario;
        let (lo, hi) = (
            s.velocity_offset - s.velocity_amplitude.abs(),
            s.velocity_offset + s.velocity_amplitude.abs(),
        );
        if lo < m.velocity_min || hi > m.velocity_max {
            return Err((
                "scenario",
                "velocity_offset",
                format!(
                    "velocity range [{lo}, {hi}] leaves [{}, {}]",
                    m.velocity_min, m.velocity_max
                ),
            ));
        }
        for std in s.disturbance_noise_std {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(("scenario", "disturbance_noise_std", "must be non-negative".into()));
            }
        }
        if !(s.steering_limit > 0.0) {
            return Err(("scenario", "steering_limit", "must be positive".into()));
        }

        let f = &self.filter;
        if !(f.gamma > 0.0 && f.gamma.is_finite()) {
            return Err(("filter", "gamma", format!("must be positive, got {}", f.gamma)));
        }
        if let Some(t) = f.rank_tol_factor {
            if !(t > 0.0 && t.is_finite()) {
                return Err(("filter", "rank_tol_factor", "must be positive".into()));
            }
        }
        if f.poles.is_empty() {
            return Err(("filter", "poles", "at least one pole is required".into()));
        }
        if let Some(p) = f.poles.iter().find(|p| !(p.abs() < 1.0)) {
            return Err(("filter", "poles", format!("pole {p} is not inside the unit circle")));
        }
        if let Some(order) = f.order {
            if order > f.poles.len() {
                return Err((
                    "filter",
                    "order",
                    format!("order {order} exceeds the denominator degree {}", f.poles.len()),
                ));
            }
        }
        if !(f.lti_baseline_velocity >= m.velocity_min && f.lti_baseline_velocity <= m.velocity_max) {
            return Err(("filter", "lti_baseline_velocity", "outside the velocity bounds".into()));
        }
        if f.check_windows == 0 {
            return Err(("filter", "check_windows", "must be at least 1".into()));
        }
        for std in self.noise.std {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(("noise", "std", "must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn plant(&self) -> BicycleModel {
        let m = &self.model;
        BicycleModel {
            params: BicycleParams {
                cornering_front: m.cornering_front,
                cornering_rear: m.cornering_rear,
                lf: m.lf,
                lr: m.lr,
                mass: m.mass,
                inertia: m.inertia,
                gravity: m.gravity,
                sample_time: m.sample_time,
            },
            signs: match m.matrix_signs {
                Signs::Standard => MatrixSigns::Standard,
                Signs::AsPrinted => MatrixSigns::AsPrinted,
            },
            fault_scale: m.fault_scale,
            velocity_bounds: (m.velocity_min, m.velocity_max),
        }
    }

    pub fn scenario(&self) -> ScenarioConfig {
        let s = &self.scenario;
        ScenarioConfig {
            n_samples: s.n_samples,
            velocity: Sinusoid::new(s.velocity_offset, s.velocity_amplitude, s.velocity_omega),
            banking: Sinusoid::new(s.banking_offset, s.banking_amplitude, s.banking_omega),
            curvature: Sinusoid::new(s.curvature_offset, s.curvature_amplitude, s.curvature_omega),
            disturbance_noise_std: s.disturbance_noise_std,
            fault: FaultSpec {
                magnitude: s.fault_magnitude,
                start: s.fault_start,
            },
            noise_std: self.noise.std,
            noise_enabled: self.noise.enabled,
            seed: self.noise.seed,
            poles: self.filter.poles.clone(),
            order: self.filter.order,
            lti_baseline_velocity: self.filter.lti_baseline_velocity,
            gains: PdGains {
                kp: s.kp,
                kd: s.kd,
                k_heading: s.k_heading,
                saturation: s.steering_limit,
            },
            initial_state: s.initial_state,
            cache: self.filter.cache,
        }
    }

    pub fn options(&self) -> SynthesisOptions {
        SynthesisOptions {
            gamma: self.filter.gamma,
            rank_tol_factor: self.filter.rank_tol_factor,
            target_fault: 0,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = Config::parse("", "x.toml").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.scenario(), ScenarioConfig::default());
        assert_eq!(cfg.plant(), BicycleModel::default());
        assert_eq!(cfg.options(), SynthesisOptions::default());
    }

    #[test]
    fn serialized_config_round_trips() {
        let mut cfg = Config::default();
        cfg.filter.order = Some(2);
        cfg.noise.std[1] = 0.1 + 0.2;
        let back = Config::parse(&cfg.to_toml(), "x.toml").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = Config::parse("[model]\nmass = 1500.0\nmas = 3.0\n", "c.toml").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("mas"), "{}", err.message);
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let err = Config::parse("[filter]\n\ngamma = = 3\n", "c.toml").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn semantic_error_reports_its_line() {
        let err = Config::parse("[filter]\npoles = [-0.95]\ngamma = -1.0\n", "c.toml").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().starts_with("c.toml:3: filter.gamma"));
        let err = Config::parse("[filter]\npoles = [1.5]\n", "c.toml").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn manifest_config_table_is_accepted() {
        let mut cfg = Config::default();
        cfg.scenario.n_samples = 7;
        let manifest = format!("command = \"simulate\"\n\n[config]\n{}", indent_tables(&cfg.to_toml()));
        assert_eq!(Config::parse(&manifest, "m.toml").unwrap(), cfg);
    }

    fn indent_tables(body: &str) -> String {
        body.replace("[model]", "[config.model]")
            .replace("[scenario]", "[config.scenario]")
            .replace("[filter]", "[config.filter]")
            .replace("[noise]", "[config.noise]")
    }
}
