//! Experiment configuration: TOML parsing, per-experiment defaults, validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial::{PacketKind, Wavepacket};
use crate::spectral::PotentialFamily;

/// Largest admissible size of the initial data (packet amplitude and `|z₀|`).
pub const MAX_EPSILON: f64 = 0.2;
pub const MIN_HALF_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ScatteringAudit,
    LinearDecay,
    SolitonStability,
    ModelProblem,
    ModifiedScattering,
    BoundstateBranch,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::ScatteringAudit,
        ExperimentKind::LinearDecay,
        ExperimentKind::SolitonStability,
        ExperimentKind::ModelProblem,
        ExperimentKind::ModifiedScattering,
        ExperimentKind::BoundstateBranch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ScatteringAudit => "scattering-audit",
            ExperimentKind::LinearDecay => "linear-decay",
            ExperimentKind::SolitonStability => "soliton-stability",
            ExperimentKind::ModelProblem => "model-problem",
            ExperimentKind::ModifiedScattering => "modified-scattering",
            ExperimentKind::BoundstateBranch => "boundstate-branch",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ExperimentKind::ScatteringAudit => {
                "Jost solutions, scattering identities, genericity, distorted transform, eigenpair"
            }
            ExperimentKind::LinearDecay => "decay and smoothing norms of the linear flow e^{iHt}P_c h",
            ExperimentKind::SolitonStability => "soliton plus radiation: conservation, modulation, radiation decay",
            ExperimentKind::ModelProblem => {
                "model equation on a potential without eigenvalues: decay and modified scattering"
            }
            ExperimentKind::ModifiedScattering => {
                "profile, logarithmic phase correction and cubic resonance of the radiation"
            }
            ExperimentKind::BoundstateBranch => "nonlinear bound-state branch and refined profiles",
        }
    }

    /// Acceptance criteria evaluated by this experiment.
    pub fn criteria(&self) -> &'static [u8] {
        match self {
            ExperimentKind::ScatteringAudit => &[1, 2, 3, 4, 5],
            ExperimentKind::BoundstateBranch => &[6, 12],
            ExperimentKind::SolitonStability => &[7, 9],
            ExperimentKind::LinearDecay => &[8],
            ExperimentKind::ModifiedScattering => &[10, 11],
            ExperimentKind::ModelProblem => &[13],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                path: "experiment".into(),
                message: format!(
                    "unknown experiment `{s}`; expected one of {}",
                    Self::ALL.map(|k| k.name()).join(", ")
                ),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl PotentialConfig {
    pub fn family(&self) -> Result<PotentialFamily> {
        let base = PotentialFamily::preset(&self.preset)?;
        if self.depth.is_none() && self.width.is_none() {
            return Ok(base);
        }
        let (d, w) = match base {
            PotentialFamily::GaussianWell { depth, width }
            | PotentialFamily::Sech2 { depth, width }
            | PotentialFamily::Bump { depth, width } => (depth, width),
            PotentialFamily::Tabulated { .. } => return Ok(base),
        };
        PotentialFamily::with_params(&self.preset, self.depth.unwrap_or(d), self.width.unwrap_or(w))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half width `L` of the box `[-L, L)`.
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    /// Band limit `K`.
    pub band_limit: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub dt: f64,
    pub t_end: f64,
    /// Time between stored snapshots.
    pub stride: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Soliton parameter `z₀` as `[re, im]`.
    pub soliton: [f64; 2],
    pub packet: Wavepacket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Amplitudes of the Gaussian coefficients `c e^{-x²/s²}`.
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub width: f64,
    /// Constant phase rate `E` in `Θ = ∫E`.
    pub phase_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub alpha: f64,
    /// Window of the power-law fits of decay norms.
    pub fit_window: [f64; 2],
    /// Window of the cubic-resonance fit.
    pub resonance_window: [f64; 2],
    /// Dyadic times for Cauchy gaps of the modified profile.
    pub dyadic_times: Vec<f64>,
    /// Dyadic times for gaps of `|z|`.
    pub modulus_times: Vec<f64>,
    /// Window for the phase-drift fit.
    pub drift_window: [f64; 2],
    /// Band `|k| ∈ [a, b]` of the resonance check.
    pub band: [f64; 2],
    /// Probe wavenumber; `0` picks the peak of `|f̃|`.
    pub probe_k: f64,
    /// Cutoff of the time-frequency split.
    pub time_cutoff: f64,
    /// Time at which the linear far field is compared.
    pub far_field_time: f64,
    /// Moving packet used to resolve the far-field convention on the linear flow.
    pub far_field_packet: Wavepacket,
    /// Horizon of the conservation-selection runs.
    pub conservation_t_end: f64,
    /// Soliton moduli for the bound-state branch.
    pub branch_moduli: Vec<f64>,
    /// Largest `|z∞|` for refined profiles; it is halved once.
    pub refined_modulus: f64,
    /// Number of random wavepackets in the transform audit.
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub potential: PotentialConfig,
    pub grid: GridConfig,
    pub frequency: FrequencyConfig,
    pub evolution: EvolutionParams,
    pub initial: InitialConfig,
    pub model: ModelConfig,
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    /// Documented defaults of each experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let packet = Wavepacket {
            amplitude: 0.05,
            center: 0.0,
            velocity: 0.0,
            width: 4.0,
            kind: PacketKind::Physical,
            cutoff: 0.6,
        };
        let mut cfg = ExperimentConfig {
            experiment: kind,
            seed: 0,
            output_dir: PathBuf::from("runs").join(kind.name()),
            potential: PotentialConfig {
                preset: "gaussian_well".into(),
                depth: None,
                width: None,
            },
            grid: GridConfig {
                half_width: 400.0,
                points: 2048,
            },
            frequency: FrequencyConfig {
                band_limit: 8.0,
                points: 2048,
            },
            evolution: EvolutionParams {
                dt: 0.05,
                t_end: 200.0,
                stride: 1.0,
            },
            initial: InitialConfig {
                soliton: [0.08, 0.0],
                packet,
            },
            model: ModelConfig {
                a1: 0.01,
                a2: 0.01,
                b: 0.05,
                width: 1.0,
                phase_rate: -0.25,
            },
            analysis: AnalysisConfig {
                alpha: crate::asymptotics::DEFAULT_ALPHA,
                fit_window: [20.0, 200.0],
                resonance_window: [10.0, 200.0],
                dyadic_times: vec![25.0, 50.0, 100.0],
                modulus_times: vec![25.0, 50.0, 100.0, 200.0],
                drift_window: [25.0, 200.0],
                band: [0.5, 2.0],
                probe_k: 0.0,
                time_cutoff: 0.5,
                far_field_time: 50.0,
                far_field_packet: Wavepacket {
                    velocity: 2.4,
                    cutoff: 0.0,
                    ..packet
                },
                conservation_t_end: 10.0,
                branch_moduli: vec![0.16, 0.08, 0.04, 0.02, 0.01],
                refined_modulus: 0.08,
                probes: 3,
            },
        };
        match kind {
            ExperimentKind::ScatteringAudit => {
                cfg.grid = GridConfig {
                    half_width: 100.0,
                    points: 2048,
                };
            }
            ExperimentKind::BoundstateBranch => {
                cfg.grid = GridConfig {
                    half_width: 100.0,
                    points: 1024,
                };
                cfg.frequency.points = 1024;
                cfg.evolution.t_end = 20.0;
            }
            ExperimentKind::LinearDecay => cfg.initial.soliton = [0.0, 0.0],
            ExperimentKind::ModelProblem => {
                cfg.potential.preset = "bump".into();
                cfg.initial.soliton = [0.0, 0.0];
            }
            ExperimentKind::SolitonStability | ExperimentKind::ModifiedScattering => {}
        }
        cfg
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            path: String::new(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| {
            Err(Error::Config {
                path: path.into(),
                message,
            })
        };
        if let Err(e) = self.potential.family() {
            return bad("potential.preset", e.to_string());
        }
        if !(self.grid.half_width >= MIN_HALF_WIDTH) {
            return bad("grid.half_width", format!("must be at least {MIN_HALF_WIDTH}"));
        }
        if self.grid.points < crate::grid::MIN_GRID_POINTS
            || self.grid.points > crate::spectral::decomposition::MAX_DENSE_POINTS
        {
            return bad(
                "grid.points",
                format!(
                    "must lie in [{}, {}]",
                    crate::grid::MIN_GRID_POINTS,
                    crate::spectral::decomposition::MAX_DENSE_POINTS
                ),
            );
        }
        if !(self.frequency.band_limit > 0.0) || self.frequency.points < 8 {
            return bad("frequency", "band_limit must be positive and points at least 8".into());
        }
        let e = &self.evolution;
        if !(e.dt.is_finite() && e.dt != 0.0) {
            return bad("evolution.dt", "must be finite and nonzero".into());
        }
        if !(e.t_end > 0.0) {
            return bad("evolution.t_end", "must be positive".into());
        }
        let per = e.stride / e.dt.abs();
        if !(e.stride > 0.0) || (per - per.round()).abs() > 1e-9 || per.round() < 1.0 {
            return bad("evolution.stride", "must be a positive multiple of |dt|".into());
        }
        let p = &self.initial.packet;
        if !(p.amplitude >= 0.0 && p.amplitude <= MAX_EPSILON) {
            return bad(
                "initial.packet.amplitude",
                format!("ε = {} violates 0 ≤ ε ≤ {MAX_EPSILON}", p.amplitude),
            );
        }
        if !(p.width > 0.0) {
            return bad("initial.packet.width", "must be positive".into());
        }
        if !(p.cutoff >= 0.0) {
            return bad("initial.packet.cutoff", "must be nonnegative (0 disables it)".into());
        }
        let f = &self.analysis.far_field_packet;
        if !(f.amplitude > 0.0 && f.amplitude <= MAX_EPSILON && f.width > 0.0 && f.cutoff >= 0.0) {
            return bad(
                "analysis.far_field_packet",
                format!("needs 0 < amplitude ≤ {MAX_EPSILON}, width > 0, cutoff ≥ 0"),
            );
        }
        let z = self.initial.soliton;
        if !(z[0].hypot(z[1]) <= MAX_EPSILON) {
            return bad("initial.soliton", format!("|z₀| must not exceed {MAX_EPSILON}"));
        }
        if self.experiment == ExperimentKind::ModelProblem && z != [0.0, 0.0] {
            return bad("initial.soliton", "the model problem has no soliton; use [0, 0]".into());
        }
        let m = &self.model;
        if !(m.width > 0.0) || ![m.a1, m.a2, m.b, m.phase_rate].iter().all(|v| v.is_finite()) {
            return bad("model", "coefficients must be finite and width positive".into());
        }
        let a = &self.analysis;
        if !(a.alpha > 0.0 && a.alpha < 1.0 / 3.0) {
            return bad("analysis.alpha", "must lie in (0, 1/3)".into());
        }
        for (name, w) in [
            ("analysis.fit_window", a.fit_window),
            ("analysis.resonance_window", a.resonance_window),
            ("analysis.drift_window", a.drift_window),
        ] {
            if !(w[0] > 0.0 && w[1] > w[0]) {
                return bad(name, "must be an increasing pair of positive times".into());
            }
        }
        if !(a.band[0] > 0.0 && a.band[1] > a.band[0] && a.band[1] <= self.frequency.band_limit) {
            return bad("analysis.band", "must satisfy 0 < a < b ≤ band_limit".into());
        }
        if a.dyadic_times.iter().chain(&a.modulus_times).any(|t| !(*t > 0.0)) {
            return bad("analysis.dyadic_times", "times must be positive".into());
        }
        if !(a.probe_k >= 0.0) || !(a.time_cutoff > 0.0) || !(a.far_field_time > 0.0) || !(a.conservation_t_end > 0.0) {
            return bad(
                "analysis",
                "probe_k ≥ 0 and positive time_cutoff, far_field_time, conservation_t_end required".into(),
            );
        }
        if a.branch_moduli.len() < 2 || a.branch_moduli.iter().any(|z| !(*z > 0.0 && *z <= MAX_EPSILON)) {
            return bad(
                "analysis.branch_moduli",
                format!("need at least two moduli in (0, {MAX_EPSILON}]"),
            );
        }
        if !(a.refined_modulus > 0.0 && a.refined_modulus <= MAX_EPSILON) || a.probes == 0 {
            return bad(
                "analysis",
                "refined_modulus in (0, ε_max] and probes ≥ 1 required".into(),
            );
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses a TOML document, fills the defaults of the named experiment and
/// validates the result. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
        path: String::new(),
        message: e.message().to_string(),
    })?;
    let kind = match user.get("experiment") {
        Some(toml::Value::String(s)) => s.parse::<ExperimentKind>()?,
        Some(_) => {
            return Err(Error::Config {
                path: "experiment".into(),
                message: "must be a string".into(),
            })
        }
        None => {
            return Err(Error::Config {
                path: "experiment".into(),
                message: "missing; name one of the experiments".into(),
            })
        }
    };
    let mut merged = toml::Table::try_from(ExperimentConfig::defaults(kind)).map_err(|e| Error::Config {
        path: String::new(),
        message: e.to_string(),
    })?;
    merge(&mut merged, user);
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.into_inner().message().to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        for kind in ExperimentKind::ALL {
            let cfg = parse_config(&format!("experiment = \"{kind}\"")).unwrap();
            assert_eq!(cfg, ExperimentConfig::defaults(kind));
        }
    }

    #[test]
    fn rejects_large_data_and_unknown_keys() {
        let e = parse_config("experiment = \"soliton-stability\"\n[initial.packet]\namplitude = 0.5\n").unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path == "initial.packet.amplitude"),
            "{e}"
        );
        let e = parse_config("experiment = \"linear-decay\"\n[grid]\nwidth = 3\n").unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path.starts_with("grid")),
            "{e}"
        );
        let e = parse_config("experiment = \"linear-decay\"\n[evolution]\ndt = \"fast\"\n").unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path == "evolution.dt"),
            "{e}"
        );
        assert!(parse_config("experiment = \"nope\"").is_err());
        assert!(parse_config("seed = 1").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "experiment = \"model-problem\"\nseed = 7\n[initial.packet]\ncutoff = 0.9\nkind = \"distorted\"\n[potential]\ndepth = 0.5\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.initial.packet.cutoff, 0.9);
        let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let mut none = ExperimentConfig::defaults(ExperimentKind::LinearDecay);
        none.initial.packet.cutoff = 0.0;
        assert_eq!(parse_config(&none.to_toml().unwrap()).unwrap(), none);
    }
}
