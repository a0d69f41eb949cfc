//! Deterministic DDIM sampling with optional progressive resolution.
//!
//! A run walks the timeline one step at a time. At every step the guided
//! noise estimate yields a predicted clean latent (`p_x0`) and the next,
//! less noisy latent. Between stages the latent is rebuilt at the next
//! resolution, either by noise refresh (resize `p_x0`, then re-noise) or, for
//! the ablation, by resizing the latent itself.
//!
//! Boundary convention: the refresh that starts stage `i` at step `T_i`
//! consumes the `p_x0` of step `T_i - 1` and replaces that step's output, so
//! the first prediction at the new resolution happens at step `T_i`.

use alloc::format;
use alloc::vec::Vec;

use crate::codec::{refresh_resize, Codec};
use crate::denoiser::{cfg_combine, Condition, Denoiser, StepContext};
use crate::error::{Error, Result};
use crate::latent::{average_energy, resize, LatentGrid, ResizeMethod};
use crate::noise::{NoisePurpose, SeededRng};
use crate::schedule::{snr_corrected_alpha_bar, snr_gamma, RefreshPlan, SamplerTimeline, Stage};

/// Sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Base resolution throughout, guidance fixed at the first stage's scale.
    Baseline,
    /// Noise refresh at every stage boundary with per-stage guidance.
    Rectified,
    /// Like `Rectified`, but the latent is resized directly at boundaries.
    LatentResize,
    /// Target resolution throughout with the SNR-adjusted schedule.
    SnrCorrected,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::Rectified,
        Variant::LatentResize,
        Variant::SnrCorrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Rectified => "rectified",
            Variant::LatentResize => "latent-resize",
            Variant::SnrCorrected => "snr-corrected",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }
}

/// One row of a run's diagnostic trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub train_t: usize,
    pub omega: f64,
    /// Energy of the latent entering this step.
    pub latent_energy: f64,
    /// Energy of the `p_x0` predicted at this step.
    pub p_x0_energy: f64,
    /// The latent entering this step was produced by a stage transition.
    pub refreshed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_p_x0: LatentGrid,
    pub trace: Vec<StepRecord>,
    /// `(step, p_x0)` for every requested snapshot step, in step order.
    pub p_x0_snapshots: Vec<(usize, LatentGrid)>,
}

/// One deterministic DDIM update. Returns `(x_prev, p_x0)`.
pub fn ddim_step(
    x_t: &LatentGrid,
    eps: &LatentGrid,
    alpha_bar_t: f64,
    alpha_bar_prev: f64,
) -> Result<(LatentGrid, LatentGrid)> {
    if alpha_bar_t == 0.0 {
        return Err(Error::Singularity);
    }
    if !(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0)
        || !(alpha_bar_prev > 0.0 && alpha_bar_prev <= 1.0)
    {
        return Err(Error::Domain(format!(
            "alpha_bar pair ({alpha_bar_t}, {alpha_bar_prev}) outside (0, 1]"
        )));
    }
    let noise_t = libm::sqrt(1.0 - alpha_bar_t);
    let inv_signal_t = 1.0 / libm::sqrt(alpha_bar_t);
    let p_x0 = x_t.zip_with(eps, |x, e| (x - noise_t * e) * inv_signal_t)?;
    let x_prev = p_x0.axpby(
        libm::sqrt(alpha_bar_prev),
        eps,
        libm::sqrt(1.0 - alpha_bar_prev),
    )?;
    Ok((x_prev, p_x0))
}

/// Relative error of `sqrt(a) p_x0 + sqrt(1 - a) eps` against `x_t`.
pub fn reconstruction_error(
    x_t: &LatentGrid,
    p_x0: &LatentGrid,
    eps: &LatentGrid,
    alpha_bar_t: f64,
) -> f64 {
    let s = libm::sqrt(alpha_bar_t);
    let n = libm::sqrt(1.0 - alpha_bar_t);
    let mut err = 0.0;
    let mut norm = 0.0;
    for ((x, p), e) in x_t.data().iter().zip(p_x0.data()).zip(eps.data()) {
        let r = s * p + n * e - x;
        err += r * r;
        norm += x * x;
    }
    libm::sqrt(err) / libm::sqrt(norm).max(f64::MIN_POSITIVE)
}

/// Resize `p_x0` through the codec and re-noise it to `alpha_bar_prev`.
pub fn noise_refresh<C: Codec + ?Sized>(
    p_x0: &LatentGrid,
    codec: &mut C,
    target: (usize, usize),
    method: ResizeMethod,
    alpha_bar_prev: f64,
    eps: &LatentGrid,
) -> Result<LatentGrid> {
    if !(0.0..=1.0).contains(&alpha_bar_prev) {
        return Err(Error::Domain(format!(
            "alpha_bar {alpha_bar_prev} not in [0, 1]"
        )));
    }
    let resized = refresh_resize(codec, p_x0, target.0, target.1, method)?;
    resized.axpby(
        libm::sqrt(alpha_bar_prev),
        eps,
        libm::sqrt(1.0 - alpha_bar_prev),
    )
}

/// Everything a run needs besides the models and the seed.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub variant: Variant,
    pub plan: RefreshPlan,
    pub timeline: SamplerTimeline,
    pub channels: usize,
    pub condition: Condition,
    pub resize_method: ResizeMethod,
    /// Steps whose `p_x0` is kept in the result.
    pub snapshot_steps: Vec<usize>,
    /// Replaces the seeded initial noise when set.
    pub initial_latent: Option<LatentGrid>,
    /// Verify the DDIM reconstruction identity at every step.
    pub check_reconstruction: bool,
}

impl RunSpec {
    pub fn new(
        variant: Variant,
        plan: RefreshPlan,
        timeline: SamplerTimeline,
        channels: usize,
    ) -> Self {
        Self {
            variant,
            plan,
            timeline,
            channels,
            condition: Condition::Unconditional,
            resize_method: ResizeMethod::Bilinear,
            snapshot_steps: Vec::new(),
            initial_latent: None,
            check_reconstruction: false,
        }
    }

    /// Snapshot `p_x0` at every step.
    pub fn snapshot_all(mut self) -> Self {
        self.snapshot_steps = (0..self.timeline.num_steps()).collect();
        self
    }

    /// Stages actually executed by this variant.
    pub fn effective_stages(&self) -> Vec<Stage> {
        let n = self.timeline.num_steps();
        let first = self.plan.stages()[0];
        match self.variant {
            Variant::Baseline => alloc::vec![Stage {
                resolution: first.resolution,
                omega: first.omega,
                first_step: 0,
                last_step: n,
            }],
            Variant::SnrCorrected => alloc::vec![Stage {
                resolution: self.plan.target_resolution(),
                omega: first.omega,
                first_step: 0,
                last_step: n,
            }],
            Variant::Rectified | Variant::LatentResize => self.plan.stages().to_vec(),
        }
    }

    /// SNR factor applied by `SnrCorrected`; 1 for every other variant.
    pub fn gamma(&self) -> f64 {
        match self.variant {
            Variant::SnrCorrected => {
                snr_gamma(self.plan.base_resolution(), self.plan.target_resolution())
            }
            _ => 1.0,
        }
    }
}

/// Executes one sampling trajectory.
pub fn run<D, C>(
    spec: &RunSpec,
    denoiser: &mut D,
    codec: &mut C,
    rng: &SeededRng,
) -> Result<RunResult>
where
    D: Denoiser + ?Sized,
    C: Codec + ?Sized,
{
    spec.plan.check_against(&spec.timeline)?;
    if spec.channels == 0 {
        return Err(Error::config("channels", "must be at least 1"));
    }
    let n = spec.timeline.num_steps();
    let stages = spec.effective_stages();
    let gamma = spec.gamma();

    let (h0, w0) = stages[0].resolution;
    let mut x = match &spec.initial_latent {
        Some(init) => {
            init.expect_shape((spec.channels, h0, w0))?;
            init.clone()
        }
        None => rng
            .stream(NoisePurpose::Initial, 0)
            .gaussian(spec.channels, h0, w0),
    };
    denoiser.prepare(x.shape())?;

    let mut trace = Vec::with_capacity(n);
    let mut snapshots = Vec::new();
    let mut stage_idx = 0;
    let mut refreshed = false;
    let mut final_p_x0 = None;

    for step in 0..n {
        while step >= stages[stage_idx].last_step {
            stage_idx += 1;
        }
        let omega = stages[stage_idx].omega;
        let mut alpha_t = spec.timeline.alpha_bar(step);
        let mut alpha_prev = spec.timeline.alpha_bar_prev(step);
        if gamma != 1.0 {
            alpha_t = snr_corrected_alpha_bar(alpha_t, gamma)?;
            alpha_prev = snr_corrected_alpha_bar(alpha_prev, gamma)?;
        }
        let ctx = StepContext {
            step,
            train_t: spec.timeline.train_t(step),
            alpha_bar: alpha_t,
        };

        let (x_prev, p_x0) = guided_step(spec, denoiser, &x, &ctx, omega, alpha_prev)
            .map_err(|e| e.at_step(step))?;

        trace.push(StepRecord {
            step,
            train_t: ctx.train_t,
            omega,
            latent_energy: average_energy(&x),
            p_x0_energy: average_energy(&p_x0),
            refreshed,
        });
        if spec.snapshot_steps.contains(&step) {
            snapshots.push((step, p_x0.clone()));
        }

        let next_stage = stages
            .get(stage_idx + 1)
            .filter(|s| s.first_step == step + 1);
        x = match next_stage {
            Some(next) => {
                let k = (stage_idx + 1) as u32;
                let next_x = match spec.variant {
                    Variant::LatentResize => resize(
                        &x_prev,
                        next.resolution.0,
                        next.resolution.1,
                        spec.resize_method,
                    ),
                    _ => {
                        let eps = rng.stream(NoisePurpose::Refresh, k).gaussian(
                            spec.channels,
                            next.resolution.0,
                            next.resolution.1,
                        );
                        noise_refresh(
                            &p_x0,
                            codec,
                            next.resolution,
                            spec.resize_method,
                            alpha_prev,
                            &eps,
                        )
                    }
                }
                .map_err(|e| e.at_step(step))?;
                denoiser
                    .prepare(next_x.shape())
                    .map_err(|e| e.at_step(step + 1))?;
                refreshed = true;
                next_x
            }
            None => {
                refreshed = false;
                x_prev
            }
        };
        if step + 1 == n {
            final_p_x0 = Some(p_x0);
        }
    }

    Ok(RunResult {
        final_p_x0: final_p_x0.expect("timeline has at least one step"),
        trace,
        p_x0_snapshots: snapshots,
    })
}

fn guided_step<D: Denoiser + ?Sized>(
    spec: &RunSpec,
    denoiser: &D,
    x: &LatentGrid,
    ctx: &StepContext,
    omega: f64,
    alpha_prev: f64,
) -> Result<(LatentGrid, LatentGrid)> {
    let eps_u = denoiser.predict_eps(x, ctx, Condition::Unconditional)?;
    let eps = match spec.condition {
        Condition::Unconditional => cfg_combine(&eps_u, &eps_u, omega)?,
        cond => {
            let eps_c = denoiser.predict_eps(x, ctx, cond)?;
            cfg_combine(&eps_u, &eps_c, omega)?
        }
    };
    let (x_prev, p_x0) = ddim_step(x, &eps, ctx.alpha_bar, alpha_prev)?;
    if spec.check_reconstruction {
        let rel_err = reconstruction_error(x, &p_x0, &eps, ctx.alpha_bar);
        if !(rel_err <= 1e-9) {
            return Err(Error::Reconstruction {
                step: ctx.step,
                rel_err,
            });
        }
    }
    Ok((x_prev, p_x0))
}
