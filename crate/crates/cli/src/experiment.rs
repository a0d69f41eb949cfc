//! Builds models from a config and runs seeds, concurrently when asked.

use rayon::prelude::*;

use rhr_core::analysis::{trace_from_run, EnergyTrace};
use rhr_core::codec::{Codec, IdentityCodec};
use rhr_core::denoiser::{
    Condition, DatasetPrior, Denoiser, GaussianPrior, StepContext, ZeroDenoiser,
};
use rhr_core::latent::{resize_bilinear, Shape};
use rhr_core::noise::{NoisePurpose, SeededRng};
use rhr_core::sampler::{run, RunResult, RunSpec, Variant};
use rhr_core::schedule::{RefreshPlan, Resolution};
use rhr_core::LatentGrid;

use crate::config::{CodecConfig, CurveKind, DenoiserConfig, ExperimentConfig};
use crate::csvfmt::sig9;
use crate::error::{CliError, Result};
use crate::external::ExternalCodec;
use crate::rhrt;

#[derive(Debug, Clone)]
pub enum AnyDenoiser {
    Zero(ZeroDenoiser),
    Gaussian(GaussianPrior),
    Dataset(DatasetPrior),
}

impl Denoiser for AnyDenoiser {
    fn prepare(&mut self, shape: Shape) -> rhr_core::Result<()> {
        match self {
            AnyDenoiser::Zero(d) => d.prepare(shape),
            AnyDenoiser::Gaussian(d) => d.prepare(shape),
            AnyDenoiser::Dataset(d) => d.prepare(shape),
        }
    }

    fn predict_eps(
        &self,
        x_t: &LatentGrid,
        ctx: &StepContext,
        condition: Condition,
    ) -> rhr_core::Result<LatentGrid> {
        match self {
            AnyDenoiser::Zero(d) => d.predict_eps(x_t, ctx, condition),
            AnyDenoiser::Gaussian(d) => d.predict_eps(x_t, ctx, condition),
            AnyDenoiser::Dataset(d) => d.predict_eps(x_t, ctx, condition),
        }
    }
}

#[derive(Debug, Clone)]
pub enum AnyCodec {
    Identity(IdentityCodec),
    External(ExternalCodec),
}

impl Codec for AnyCodec {
    fn granularity(&self) -> usize {
        match self {
            AnyCodec::Identity(c) => c.granularity(),
            AnyCodec::External(c) => c.granularity(),
        }
    }

    fn decode(&mut self, latent: &LatentGrid) -> rhr_core::Result<LatentGrid> {
        match self {
            AnyCodec::Identity(c) => c.decode(latent),
            AnyCodec::External(c) => c.decode(latent),
        }
    }

    fn encode(&mut self, image: &LatentGrid) -> rhr_core::Result<LatentGrid> {
        match self {
            AnyCodec::Identity(c) => c.encode(image),
            AnyCodec::External(c) => c.encode(image),
        }
    }
}

/// Everything needed to launch runs, resolved once from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub plan: RefreshPlan,
    pub base: RunSpec,
    pub denoiser: AnyDenoiser,
    pub codec: AnyCodec,
}

impl Setup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let timeline = cfg.timeline()?;
        let plan = cfg.plan()?;
        let (denoiser, condition) = build_denoiser(cfg)?;
        let codec = match &cfg.codec {
            CodecConfig::Identity => AnyCodec::Identity(IdentityCodec),
            CodecConfig::External {
                command,
                granularity,
            } => AnyCodec::External(ExternalCodec::new(
                command,
                *granularity,
                std::env::temp_dir(),
            )?),
        };
        let mut base = RunSpec::new(cfg.variant, plan.clone(), timeline, cfg.channels);
        base.condition = condition;
        base.resize_method = cfg.resize;
        base.snapshot_steps = cfg.snapshot_steps.clone();
        Ok(Self {
            plan,
            base,
            denoiser,
            codec,
        })
    }

    pub fn run_one(&self, spec: &RunSpec, seed: u64) -> Result<RunResult> {
        let mut denoiser = self.denoiser.clone();
        let mut codec = self.codec.clone();
        Ok(run(spec, &mut denoiser, &mut codec, &SeededRng::new(seed))?)
    }

    /// The run spec for one labelled curve.
    pub fn curve_spec(&self, kind: CurveKind) -> Result<RunSpec> {
        let mut spec = self.base.clone();
        spec.snapshot_steps.clear();
        match kind {
            CurveKind::NativeBaseline => {
                let target = self.plan.target_resolution();
                spec.variant = Variant::Baseline;
                spec.plan = RefreshPlan::single(
                    target,
                    self.plan.stages()[0].omega,
                    spec.timeline.num_steps(),
                );
            }
            CurveKind::RectifiedNoRect => {
                let w0 = self.plan.stages()[0].omega;
                spec.variant = Variant::Rectified;
                spec.plan = self.plan.with_omegas(&vec![w0; self.plan.stages().len()])?;
            }
            CurveKind::Variant(v) => spec.variant = v,
        }
        Ok(spec)
    }

    /// Baseline at `resolution` with a constant `omega`.
    pub fn sweep_spec(&self, resolution: Resolution, omega: f64) -> RunSpec {
        let mut spec = self.base.clone();
        spec.snapshot_steps.clear();
        spec.variant = Variant::Baseline;
        spec.plan = RefreshPlan::single(resolution, omega, spec.timeline.num_steps());
        spec
    }

    /// Rectified with the last stage's scale replaced by `omega`.
    pub fn final_omega_spec(&self, omega: f64) -> Result<RunSpec> {
        let mut spec = self.base.clone();
        spec.snapshot_steps.clear();
        spec.variant = Variant::Rectified;
        let mut omegas = self.plan.omegas();
        *omegas.last_mut().expect("at least one stage") = omega;
        spec.plan = self.plan.with_omegas(&omegas)?;
        Ok(spec)
    }

    /// Mean energy curve over `seeds`. `NativeBaseline` starts every seed
    /// from that seed's base-resolution initial noise, upsampled.
    pub fn mean_curve(
        &self,
        label: &str,
        spec: &RunSpec,
        native: bool,
        seeds: &[u64],
        jobs: usize,
    ) -> Result<EnergyTrace> {
        let base_res = self.plan.base_resolution();
        let traces = par_map(jobs, seeds, |&seed| {
            let mut spec = spec.clone();
            if native {
                let (h, w) = spec.plan.base_resolution();
                let init = SeededRng::new(seed)
                    .stream(NoisePurpose::Initial, 0)
                    .gaussian(spec.channels, base_res.0, base_res.1);
                spec.initial_latent = Some(resize_bilinear(&init, h, w)?);
            }
            Ok(trace_from_run(&self.run_one(&spec, seed)?, label))
        })?;
        Ok(EnergyTrace::mean_of(label, &traces)?)
    }
}

fn build_denoiser(cfg: &ExperimentConfig) -> Result<(AnyDenoiser, Condition)> {
    let class = |c: Option<u32>| c.map(Condition::Class).unwrap_or(Condition::Unconditional);
    Ok(match cfg.denoiser()? {
        DenoiserConfig::Zero => (AnyDenoiser::Zero(ZeroDenoiser), Condition::Unconditional),
        DenoiserConfig::Gaussian {
            mean_value,
            variance,
        } => {
            let mean = LatentGrid::filled(cfg.channels, 1, 1, *mean_value);
            (
                AnyDenoiser::Gaussian(GaussianPrior::new(mean, *variance)?),
                Condition::Unconditional,
            )
        }
        DenoiserConfig::Dataset {
            path,
            labels,
            class: c,
        } => {
            let points = rhrt::read(path)?.into_grids().map_err(|e| e.at(path))?;
            if points[0].channels() != cfg.channels {
                return Err(CliError::config(
                    "denoiser.dataset.path",
                    format!(
                        "points have {} channels, the run uses {}",
                        points[0].channels(),
                        cfg.channels
                    ),
                ));
            }
            let labels = labels.clone().unwrap_or_else(|| vec![0; points.len()]);
            if labels.len() != points.len() {
                return Err(CliError::config(
                    "denoiser.dataset.labels",
                    format!("{} labels for {} points", labels.len(), points.len()),
                ));
            }
            (
                AnyDenoiser::Dataset(DatasetPrior::new(points, labels)?),
                class(*c),
            )
        }
        DenoiserConfig::Toy { spec, class: c } => (AnyDenoiser::Dataset(spec.build()?), class(*c)),
    })
}

/// Maps `f` over `items` on a pool of `jobs` threads, keeping order.
pub fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::config("jobs", e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

pub fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.run_count as u64)
        .map(|i| cfg.seed.wrapping_add(i))
        .collect()
}

/// `label,step,mean_energy` rows.
pub fn curves_csv(curves: &[EnergyTrace]) -> String {
    let mut out = String::from("label,step,mean_energy\n");
    for c in curves {
        for &(step, e) in &c.rows {
            out.push_str(&format!("{},{step},{}\n", c.label, sig9(e)));
        }
    }
    out
}

/// `step,train_t,omega,latent_energy,p_x0_energy,refreshed` rows.
pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::from("step,train_t,omega,latent_energy,p_x0_energy,refreshed\n");
    for r in &result.trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            r.train_t,
            sig9(r.omega),
            sig9(r.latent_energy),
            sig9(r.p_x0_energy),
            r.refreshed
        ));
    }
    out
}
