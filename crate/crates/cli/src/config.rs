//! Experiment configuration.
//!
//! ```toml
//! seed = 7
//! run_count = 4
//! variant = "rectified"
//!
//! [schedule]
//! kind = "scaled-linear"
//! num_steps = 50
//!
//! [ladder]
//! preset = "paper-2048"
//! base = [16, 16]
//!
//! [denoiser.toy]
//! conditional = true
//!
//! [codec.identity]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rhr_core::sampler::Variant;
use rhr_core::schedule::{
    BetaKind, LadderConfig, NoiseSchedule, Preset, RefreshPlan, Resolution, SamplerTimeline,
};
use rhr_core::toy::SyntheticSpec;
use rhr_core::ResizeMethod;

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    run_count: Option<usize>,
    variant: Option<String>,
    output_dir: Option<PathBuf>,
    snapshot_steps: Option<Vec<usize>>,
    channels: Option<usize>,
    resize: Option<String>,
    schedule: Option<RawSchedule>,
    ladder: Option<RawLadder>,
    denoiser: Option<RawDenoiser>,
    codec: Option<RawCodec>,
    energy_curve: Option<RawEnergyCurve>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    kind: Option<String>,
    beta_start: Option<f64>,
    beta_end: Option<f64>,
    train_steps: Option<usize>,
    num_steps: Option<usize>,
    alpha_bar: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLadder {
    preset: Option<String>,
    base: Option<[usize; 2]>,
    t_min: Option<usize>,
    t_max: Option<usize>,
    n_stages: Option<usize>,
    m_t: Option<f64>,
    omega_min: Option<f64>,
    omega_max: Option<f64>,
    m_omega: Option<f64>,
    resolutions: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDenoiser {
    zero: Option<Empty>,
    gaussian: Option<RawGaussian>,
    dataset: Option<RawDataset>,
    toy: Option<RawToy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGaussian {
    mean_value: f64,
    variance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: PathBuf,
    #[serde(default)]
    conditional: bool,
    class: Option<u32>,
    labels: Option<Vec<u32>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToy {
    conditional: Option<bool>,
    class: Option<u32>,
    shape: Option<[usize; 3]>,
    groups: Option<usize>,
    per_group: Option<usize>,
    coarse_factor: Option<usize>,
    coarse_std: Option<f64>,
    detail_std: Option<f64>,
    block_free_detail: Option<bool>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCodec {
    identity: Option<Empty>,
    external: Option<RawExternal>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExternal {
    command: String,
    granularity: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergyCurve {
    variants: Option<Vec<String>>,
    omegas: Option<Vec<f64>>,
    final_omegas: Option<Vec<f64>>,
    sweep_resolution: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserConfig {
    Zero,
    Gaussian {
        mean_value: f64,
        variance: f64,
    },
    Dataset {
        path: PathBuf,
        labels: Option<Vec<u32>>,
        class: Option<u32>,
    },
    Toy {
        spec: SyntheticSpec,
        class: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CodecConfig {
    Identity,
    External { command: String, granularity: usize },
}

impl CodecConfig {
    pub fn granularity(&self) -> usize {
        match self {
            CodecConfig::Identity => 1,
            CodecConfig::External { granularity, .. } => *granularity,
        }
    }
}

/// One labelled curve of `energy-curve`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    /// Baseline at the target resolution from the same seed's upsampled
    /// initial noise.
    NativeBaseline,
    /// Rectified with every stage held at the first stage's scale.
    RectifiedNoRect,
    Variant(Variant),
}

impl CurveKind {
    pub fn label(self) -> &'static str {
        match self {
            CurveKind::NativeBaseline => "native-baseline",
            CurveKind::RectifiedNoRect => "rectified-no-rect",
            CurveKind::Variant(v) => v.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "native-baseline" => Some(CurveKind::NativeBaseline),
            "rectified-no-rect" => Some(CurveKind::RectifiedNoRect),
            other => Variant::from_name(other).map(CurveKind::Variant),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyCurveConfig {
    pub variants: Vec<CurveKind>,
    /// Baseline guidance sweep.
    pub omegas: Vec<f64>,
    /// Rectified runs with the last stage's scale replaced.
    pub final_omegas: Vec<f64>,
    pub sweep_resolution: Option<Resolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub run_count: usize,
    pub variant: Variant,
    pub output_dir: PathBuf,
    pub snapshot_steps: Vec<usize>,
    pub channels: usize,
    pub resize: ResizeMethod,
    /// Unchecked; see [`ExperimentConfig::timeline`].
    pub schedule: NoiseSchedule,
    pub num_steps: usize,
    pub ladder: Option<LadderConfig>,
    pub denoiser: Option<DenoiserConfig>,
    pub codec: CodecConfig,
    pub energy_curve: EnergyCurveConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml("").expect("empty config is valid")
    }
}

fn core_field(prefix: &str, e: rhr_core::Error) -> CliError {
    match e {
        rhr_core::Error::Config { field, reason } => {
            CliError::config(format!("{prefix}.{field}"), reason)
        }
        other => CliError::config(prefix, other.to_string()),
    }
}

fn exactly_one(field: &str, present: &[(&str, bool)]) -> Result<()> {
    let set: Vec<&str> = present.iter().filter(|p| p.1).map(|p| p.0).collect();
    if set.len() != 1 {
        let names: Vec<&str> = present.iter().map(|p| p.0).collect();
        return Err(CliError::config(
            field,
            format!(
                "exactly one of [{}] is required, found {}",
                names.join(", "),
                set.len()
            ),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(DenoiserConfig::Dataset { path: p, .. }) = &mut cfg.denoiser {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("at byte {}", s.start))
                .unwrap_or_else(|| "toml".into());
            CliError::config(field, e.message().to_string())
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let run_count = raw.run_count.unwrap_or(1);
        if run_count == 0 {
            return Err(CliError::config("run_count", "must be at least 1"));
        }
        let variant = match raw.variant.as_deref() {
            None => Variant::Rectified,
            Some(name) => Variant::from_name(name)
                .ok_or_else(|| CliError::config("variant", format!("unknown variant {name:?}")))?,
        };
        let channels = raw.channels.unwrap_or(4);
        if channels == 0 {
            return Err(CliError::config("channels", "must be at least 1"));
        }
        let resize = match raw.resize.as_deref() {
            None => ResizeMethod::Bilinear,
            Some(name) => ResizeMethod::from_name(name)
                .ok_or_else(|| CliError::config("resize", format!("unknown method {name:?}")))?,
        };

        let (schedule, num_steps) = build_schedule(raw.schedule.unwrap_or_default())?;
        let snapshot_steps = raw.snapshot_steps.unwrap_or_default();
        if let Some(&s) = snapshot_steps.iter().find(|&&s| s >= num_steps) {
            return Err(CliError::config(
                "snapshot_steps",
                format!("step {s} outside 0..{num_steps}"),
            ));
        }
        let codec = build_codec(raw.codec)?;
        let ladder = raw
            .ladder
            .map(|l| build_ladder(l, num_steps, codec.granularity()))
            .transpose()?;
        let denoiser = raw
            .denoiser
            .map(|d| build_denoiser(d, channels))
            .transpose()?;
        let energy_curve = build_energy_curve(raw.energy_curve.unwrap_or_default())?;

        Ok(Self {
            seed: raw.seed.unwrap_or(0),
            run_count,
            variant,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            snapshot_steps,
            channels,
            resize,
            schedule,
            num_steps,
            ladder,
            denoiser,
            codec,
            energy_curve,
        })
    }

    /// The sampling timeline; fails if the schedule breaks its invariants.
    pub fn timeline(&self) -> Result<SamplerTimeline> {
        self.schedule
            .check()
            .map_err(|e| core_field("schedule", e))?;
        SamplerTimeline::new(&self.schedule, self.num_steps).map_err(|e| core_field("schedule", e))
    }

    pub fn ladder(&self) -> Result<&LadderConfig> {
        self.ladder
            .as_ref()
            .ok_or_else(|| CliError::config("ladder", "a [ladder] block is required"))
    }

    pub fn plan(&self) -> Result<RefreshPlan> {
        let timeline = self.timeline()?;
        RefreshPlan::build(self.ladder()?, &timeline).map_err(|e| core_field("ladder", e))
    }

    pub fn denoiser(&self) -> Result<&DenoiserConfig> {
        self.denoiser
            .as_ref()
            .ok_or_else(|| CliError::config("denoiser", "a [denoiser] block is required"))
    }
}

fn build_schedule(raw: RawSchedule) -> Result<(NoiseSchedule, usize)> {
    let kind = raw.kind.as_deref().unwrap_or("scaled-linear");
    let schedule = match kind {
        "explicit" => {
            if raw.beta_start.is_some() || raw.beta_end.is_some() || raw.train_steps.is_some() {
                return Err(CliError::config(
                    "schedule.kind",
                    "an explicit schedule takes only alpha_bar and num_steps",
                ));
            }
            let table = raw.alpha_bar.ok_or_else(|| {
                CliError::config("schedule.alpha_bar", "required for kind \"explicit\"")
            })?;
            if table.is_empty() {
                return Err(CliError::config("schedule.alpha_bar", "must not be empty"));
            }
            NoiseSchedule::from_alpha_bar_unchecked(table)
        }
        "linear" | "scaled-linear" => {
            if raw.alpha_bar.is_some() {
                return Err(CliError::config(
                    "schedule.alpha_bar",
                    "only allowed with kind \"explicit\"",
                ));
            }
            let beta_kind = if kind == "linear" {
                BetaKind::Linear
            } else {
                BetaKind::ScaledLinear
            };
            NoiseSchedule::new(
                beta_kind,
                raw.beta_start.unwrap_or(0.00085),
                raw.beta_end.unwrap_or(0.012),
                raw.train_steps.unwrap_or(1000),
            )
            .map_err(|e| core_field("schedule", e))?
        }
        other => {
            return Err(CliError::config(
                "schedule.kind",
                format!("unknown kind {other:?}, expected linear, scaled-linear or explicit"),
            ))
        }
    };
    let num_steps = raw.num_steps.unwrap_or(50);
    if num_steps == 0 || num_steps > schedule.train_steps() {
        return Err(CliError::config(
            "schedule.num_steps",
            format!("must be in 1..={}, got {num_steps}", schedule.train_steps()),
        ));
    }
    Ok((schedule, num_steps))
}

fn to_res(r: [usize; 2]) -> Resolution {
    (r[0], r[1])
}

fn build_ladder(raw: RawLadder, num_steps: usize, granularity: usize) -> Result<LadderConfig> {
    let cfg = match raw.preset.as_deref() {
        Some(name) => {
            let explicit = [
                ("t_min", raw.t_min.is_some()),
                ("t_max", raw.t_max.is_some()),
                ("n_stages", raw.n_stages.is_some()),
                ("m_t", raw.m_t.is_some()),
                ("omega_min", raw.omega_min.is_some()),
                ("omega_max", raw.omega_max.is_some()),
                ("m_omega", raw.m_omega.is_some()),
                ("resolutions", raw.resolutions.is_some()),
            ];
            if let Some((field, _)) = explicit.iter().find(|f| f.1) {
                return Err(CliError::config(
                    format!("ladder.{field}"),
                    "preset and explicit ladder fields are mutually exclusive",
                ));
            }
            let preset = Preset::from_name(name).ok_or_else(|| {
                CliError::config("ladder.preset", format!("unknown preset {name:?}"))
            })?;
            let base = raw
                .base
                .ok_or_else(|| CliError::config("ladder.base", "required with a preset"))?;
            preset.config(to_res(base))
        }
        None => {
            if raw.base.is_some() {
                return Err(CliError::config("ladder.base", "only used with a preset"));
            }
            let n_stages = raw
                .n_stages
                .ok_or_else(|| CliError::config("ladder.n_stages", "required without a preset"))?;
            let omega_min = raw
                .omega_min
                .ok_or_else(|| CliError::config("ladder.omega_min", "required without a preset"))?;
            let resolutions = raw.resolutions.ok_or_else(|| {
                CliError::config("ladder.resolutions", "required without a preset")
            })?;
            let (t_min, t_max) = match (raw.t_min, raw.t_max) {
                (Some(a), Some(b)) => (a, b),
                (None, None) if n_stages == 1 => (0, num_steps),
                (None, _) => {
                    return Err(CliError::config(
                        "ladder.t_min",
                        "required without a preset",
                    ))
                }
                (_, None) => {
                    return Err(CliError::config(
                        "ladder.t_max",
                        "required without a preset",
                    ))
                }
            };
            LadderConfig {
                t_min,
                t_max,
                n_stages,
                m_t: raw.m_t.unwrap_or(1.0),
                omega_min,
                omega_max: raw.omega_max.unwrap_or(omega_min),
                m_omega: raw.m_omega.unwrap_or(1.0),
                resolutions: resolutions.into_iter().map(to_res).collect(),
            }
        }
    };
    cfg.validate(num_steps, granularity)
        .map_err(|e| core_field("ladder", e))?;
    Ok(cfg)
}

fn build_denoiser(raw: RawDenoiser, channels: usize) -> Result<DenoiserConfig> {
    exactly_one(
        "denoiser",
        &[
            ("zero", raw.zero.is_some()),
            ("gaussian", raw.gaussian.is_some()),
            ("dataset", raw.dataset.is_some()),
            ("toy", raw.toy.is_some()),
        ],
    )?;
    if raw.zero.is_some() {
        return Ok(DenoiserConfig::Zero);
    }
    if let Some(g) = raw.gaussian {
        if !g.mean_value.is_finite() {
            return Err(CliError::config(
                "denoiser.gaussian.mean_value",
                "must be finite",
            ));
        }
        if !(g.variance > 0.0 && g.variance.is_finite()) {
            return Err(CliError::config(
                "denoiser.gaussian.variance",
                "must be positive and finite",
            ));
        }
        return Ok(DenoiserConfig::Gaussian {
            mean_value: g.mean_value,
            variance: g.variance,
        });
    }
    if let Some(d) = raw.dataset {
        if !d.conditional && d.class.is_some() {
            return Err(CliError::config(
                "denoiser.dataset.class",
                "requires conditional = true",
            ));
        }
        return Ok(DenoiserConfig::Dataset {
            path: d.path,
            labels: d.labels,
            class: d.conditional.then(|| d.class.unwrap_or(0)),
        });
    }
    let t = raw.toy.expect("one block present");
    let d = SyntheticSpec::default();
    let shape = t.shape.map(|s| (s[0], s[1], s[2])).unwrap_or(d.shape);
    if shape.0 != channels {
        return Err(CliError::config(
            "denoiser.toy.shape",
            format!("{} channels but the run uses {channels}", shape.0),
        ));
    }
    let spec = SyntheticSpec {
        shape,
        groups: t.groups.unwrap_or(d.groups),
        per_group: t.per_group.unwrap_or(d.per_group),
        coarse_factor: t.coarse_factor.unwrap_or(d.coarse_factor),
        coarse_std: t.coarse_std.unwrap_or(d.coarse_std),
        detail_std: t.detail_std.unwrap_or(d.detail_std),
        block_free_detail: t.block_free_detail.unwrap_or(d.block_free_detail),
        seed: t.seed.unwrap_or(d.seed),
    };
    spec.build().map_err(|e| core_field("denoiser.toy", e))?;
    let conditional = t.conditional.unwrap_or(true);
    if !conditional && t.class.is_some() {
        return Err(CliError::config(
            "denoiser.toy.class",
            "requires conditional = true",
        ));
    }
    Ok(DenoiserConfig::Toy {
        spec,
        class: conditional.then(|| t.class.unwrap_or(0)),
    })
}

fn build_codec(raw: Option<RawCodec>) -> Result<CodecConfig> {
    let Some(raw) = raw else {
        return Ok(CodecConfig::Identity);
    };
    exactly_one(
        "codec",
        &[
            ("identity", raw.identity.is_some()),
            ("external", raw.external.is_some()),
        ],
    )?;
    match raw.external {
        None => Ok(CodecConfig::Identity),
        Some(e) => {
            if e.command.trim().is_empty() {
                return Err(CliError::config(
                    "codec.external.command",
                    "must not be empty",
                ));
            }
            let granularity = e.granularity.unwrap_or(1);
            if granularity == 0 {
                return Err(CliError::config(
                    "codec.external.granularity",
                    "must be at least 1",
                ));
            }
            Ok(CodecConfig::External {
                command: e.command,
                granularity,
            })
        }
    }
}

fn build_energy_curve(raw: RawEnergyCurve) -> Result<EnergyCurveConfig> {
    let variants = match raw.variants {
        None => vec![
            CurveKind::NativeBaseline,
            CurveKind::RectifiedNoRect,
            CurveKind::Variant(Variant::Rectified),
        ],
        Some(names) => names
            .iter()
            .map(|n| {
                CurveKind::from_name(n).ok_or_else(|| {
                    CliError::config("energy_curve.variants", format!("unknown curve {n:?}"))
                })
            })
            .collect::<Result<_>>()?,
    };
    let omegas = raw.omegas.unwrap_or_default();
    if omegas.iter().any(|w| !w.is_finite()) {
        return Err(CliError::config("energy_curve.omegas", "must be finite"));
    }
    let final_omegas = raw.final_omegas.unwrap_or_default();
    if final_omegas.iter().any(|w| !w.is_finite()) {
        return Err(CliError::config(
            "energy_curve.final_omegas",
            "must be finite",
        ));
    }
    if let Some([h, w]) = raw.sweep_resolution {
        if h == 0 || w == 0 {
            return Err(CliError::config(
                "energy_curve.sweep_resolution",
                "must be positive",
            ));
        }
    }
    Ok(EnergyCurveConfig {
        variants,
        omegas,
        final_omegas,
        sweep_resolution: raw.sweep_resolution.map(to_res),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_toml(text) {
            Err(CliError::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_has_defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.num_steps, 50);
        assert_eq!(cfg.run_count, 1);
        assert_eq!(cfg.codec, CodecConfig::Identity);
        assert!(cfg.ladder.is_none());
        assert_eq!(cfg.schedule, NoiseSchedule::sdxl());
    }

    #[test]
    fn preset_ladder() {
        let cfg =
            ExperimentConfig::from_toml("[ladder]\npreset = \"paper-2048\"\nbase = [16, 16]\n")
                .unwrap();
        assert_eq!(cfg.ladder.unwrap(), Preset::Paper2048.config((16, 16)));
    }

    #[test]
    fn explicit_single_stage() {
        let cfg = ExperimentConfig::from_toml(
            "[ladder]\nn_stages = 1\nomega_min = 3.0\nresolutions = [[8, 8]]\n",
        )
        .unwrap();
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.stages().len(), 1);
        assert!(plan.refresh_steps().is_empty());
    }

    #[test]
    fn rejections_name_fields() {
        assert_eq!(field_of("run_count = 0"), "run_count");
        assert_eq!(field_of("variant = \"fast\""), "variant");
        assert_eq!(field_of("channels = 0"), "channels");
        assert_eq!(field_of("resize = \"cubic\""), "resize");
        assert_eq!(field_of("snapshot_steps = [50]"), "snapshot_steps");
        assert_eq!(field_of("[schedule]\nkind = \"cosine\""), "schedule.kind");
        assert_eq!(
            field_of("[schedule]\nbeta_start = 0.5\nbeta_end = 0.1"),
            "schedule.beta_start"
        );
        assert_eq!(field_of("[schedule]\nnum_steps = 0"), "schedule.num_steps");
        assert_eq!(
            field_of("[schedule]\nkind = \"explicit\""),
            "schedule.alpha_bar"
        );
        assert_eq!(
            field_of("[schedule]\nalpha_bar = [0.5]"),
            "schedule.alpha_bar"
        );
        assert_eq!(
            field_of("[ladder]\npreset = \"paper-2048\"\nbase = [8, 8]\nt_min = 3"),
            "ladder.t_min"
        );
        assert_eq!(
            field_of("[ladder]\npreset = \"paper-9\"\nbase = [8, 8]"),
            "ladder.preset"
        );
        assert_eq!(field_of("[ladder]\npreset = \"paper-2048\""), "ladder.base");
        assert_eq!(
            field_of("[ladder]\nn_stages = 2\nt_min = 40\nt_max = 50\nomega_min = 5.0\nresolutions = [[8, 8]]"),
            "ladder.resolutions"
        );
        assert_eq!(
            field_of("[ladder]\nn_stages = 2\nt_min = 50\nt_max = 40\nomega_min = 5.0\nresolutions = [[8, 8], [16, 16]]"),
            "ladder.t_min"
        );
        assert_eq!(
            field_of("[ladder]\nn_stages = 2\nt_min = 40\nt_max = 50\nomega_min = 5.0\nm_t = 0.0\nresolutions = [[8, 8], [16, 16]]"),
            "ladder.m_t"
        );
        assert_eq!(field_of("[denoiser]"), "denoiser");
        assert_eq!(
            field_of("[denoiser.zero]\n[denoiser.gaussian]\nmean_value = 0.0\nvariance = 1.0"),
            "denoiser"
        );
        assert_eq!(
            field_of("[denoiser.gaussian]\nmean_value = 0.0\nvariance = -1.0"),
            "denoiser.gaussian.variance"
        );
        assert_eq!(
            field_of("[denoiser.toy]\nshape = [3, 8, 8]"),
            "denoiser.toy.shape"
        );
        assert_eq!(
            field_of("[denoiser.toy]\ncoarse_factor = 3"),
            "denoiser.toy.coarse_factor"
        );
        assert_eq!(field_of("[codec]"), "codec");
        assert_eq!(
            field_of("[codec.external]\ncommand = \" \""),
            "codec.external.command"
        );
        assert_eq!(
            field_of("[codec.external]\ncommand = \"x\"\ngranularity = 0"),
            "codec.external.granularity"
        );
        assert_eq!(
            field_of("[codec.external]\ncommand = \"x\"\ngranularity = 8\n[ladder]\npreset = \"paper-2048\"\nbase = [12, 12]"),
            "ladder.resolutions"
        );
        assert_eq!(
            field_of("[energy_curve]\nvariants = [\"magic\"]"),
            "energy_curve.variants"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("sed = 1").is_err());
        assert!(ExperimentConfig::from_toml("[ladder]\nfoo = 1").is_err());
    }

    #[test]
    fn explicit_schedule_is_checked_lazily() {
        let cfg = ExperimentConfig::from_toml(
            "[schedule]\nkind = \"explicit\"\nalpha_bar = [0.5, 0.9]\nnum_steps = 2",
        )
        .unwrap();
        match cfg.timeline() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "schedule"),
            other => panic!("{other:?}"),
        }
    }
}
