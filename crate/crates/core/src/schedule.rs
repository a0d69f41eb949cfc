//! Noise schedules, the sampling timeline, and the refresh/guidance ladders.
//!
//! Sampling steps are indexed in the sampling direction: step 0 carries the
//! most noise and step `num_steps - 1` the least. A ladder splits the steps
//! into stages, each with its own latent resolution and guidance scale.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// How beta is interpolated between `beta_start` and `beta_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaKind {
    Linear,
    /// Interpolate `sqrt(beta)` linearly, then square.
    ScaledLinear,
}

/// Cumulative products of `1 - beta` over the training timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: BetaKind,
    beta_start: f64,
    beta_end: f64,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(kind: BetaKind, beta_start: f64, beta_end: f64, train_steps: usize) -> Result<Self> {
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::config(
                "beta_start",
                format!("need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"),
            ));
        }
        if train_steps == 0 {
            return Err(Error::config("train_steps", "must be at least 1"));
        }
        let betas: Vec<f64> = match kind {
            BetaKind::Linear => linspace(beta_start, beta_end, train_steps),
            BetaKind::ScaledLinear => {
                linspace(libm::sqrt(beta_start), libm::sqrt(beta_end), train_steps)
                    .into_iter()
                    .map(|b| b * b)
                    .collect()
            }
        };
        let mut alpha_bar = Vec::with_capacity(train_steps);
        let mut acc = 1.0;
        for beta in betas {
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        Ok(Self {
            kind,
            beta_start,
            beta_end,
            alpha_bar,
        })
    }

    /// Scaled-linear, 0.00085 to 0.012 over 1000 steps.
    pub fn sdxl() -> Self {
        Self::new(BetaKind::ScaledLinear, 0.00085, 0.012, 1000).expect("valid defaults")
    }

    /// Wraps an explicit `alpha_bar` table without checking it. Used to
    /// build negative controls for the schedule checks.
    pub fn from_alpha_bar_unchecked(alpha_bar: Vec<f64>) -> Self {
        Self {
            kind: BetaKind::Linear,
            beta_start: f64::NAN,
            beta_end: f64::NAN,
            alpha_bar,
        }
    }

    pub fn kind(&self) -> BetaKind {
        self.kind
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta_start, self.beta_end)
    }

    pub fn train_steps(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Checks the schedule invariants: values inside (0, 1) and strictly
    /// decreasing in training-timestep index.
    pub fn check(&self) -> Result<()> {
        if self.alpha_bar.is_empty() {
            return Err(Error::Domain("empty schedule".into()));
        }
        for (t, &a) in self.alpha_bar.iter().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Domain(format!("alpha_bar[{t}] = {a} not in (0, 1)")));
            }
        }
        for (t, w) in self.alpha_bar.windows(2).enumerate() {
            if w[1] >= w[0] {
                return Err(Error::Domain(format!(
                    "alpha_bar not strictly decreasing at t = {}: {} >= {}",
                    t + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(())
    }
}

fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![start];
    }
    let span = end - start;
    (0..n)
        .map(|i| start + span * (i as f64) / ((n - 1) as f64))
        .collect()
}

/// Maps sampling steps to training timesteps and their `alpha_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerTimeline {
    step_to_train_t: Vec<usize>,
    /// One entry per step plus the post-terminal value 1.0.
    alpha_bar_at_step: Vec<f64>,
}

impl SamplerTimeline {
    /// Endpoint-inclusive uniform spacing: step `s` maps to
    /// `round((n - 1 - s) * (T - 1) / (n - 1))`.
    pub fn new(schedule: &NoiseSchedule, num_steps: usize) -> Result<Self> {
        let train_steps = schedule.train_steps();
        if num_steps == 0 {
            return Err(Error::config("num_steps", "must be at least 1"));
        }
        if num_steps > train_steps {
            return Err(Error::config(
                "num_steps",
                format!("{num_steps} sampling steps exceed {train_steps} training steps"),
            ));
        }
        let step_to_train_t: Vec<usize> = if num_steps == 1 {
            alloc::vec![train_steps - 1]
        } else {
            let den = num_steps - 1;
            (0..num_steps)
                .map(|s| {
                    let num = (num_steps - 1 - s) * (train_steps - 1);
                    // round half up, exact in integers
                    (2 * num + den) / (2 * den)
                })
                .collect()
        };
        let mut alpha_bar_at_step: Vec<f64> = step_to_train_t
            .iter()
            .map(|&t| schedule.alpha_bar()[t])
            .collect();
        alpha_bar_at_step.push(1.0);
        Ok(Self {
            step_to_train_t,
            alpha_bar_at_step,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.step_to_train_t.len()
    }

    pub fn step_to_train_t(&self) -> &[usize] {
        &self.step_to_train_t
    }

    pub fn alpha_bar_at_step(&self) -> &[f64] {
        &self.alpha_bar_at_step
    }

    pub fn train_t(&self, step: usize) -> usize {
        self.step_to_train_t[step]
    }

    /// `alpha_bar` of the latent entering `step`.
    pub fn alpha_bar(&self, step: usize) -> f64 {
        self.alpha_bar_at_step[step]
    }

    /// `alpha_bar` of the latent produced by `step`; 1.0 after the last step.
    pub fn alpha_bar_prev(&self, step: usize) -> f64 {
        self.alpha_bar_at_step[step + 1]
    }
}

/// Latent resolution as `(height, width)`.
pub type Resolution = (usize, usize);

/// Hyperparameters of the refresh-timestep and guidance ladders.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderConfig {
    pub t_min: usize,
    pub t_max: usize,
    pub n_stages: usize,
    pub m_t: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub m_omega: f64,
    /// One resolution per stage, base resolution first.
    pub resolutions: Vec<Resolution>,
}

/// Named ladder presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two stages, 2x per side.
    Paper2048,
    /// Three stages: base, 2x, 4x per side.
    Paper4096,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper2048 => "paper-2048",
            Preset::Paper4096 => "paper-4096",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "paper-2048" => Some(Preset::Paper2048),
            "paper-4096" => Some(Preset::Paper4096),
            _ => None,
        }
    }

    /// The preset ladder scaled from `base` resolution.
    pub fn config(self, base: Resolution) -> LadderConfig {
        let (h, w) = base;
        match self {
            Preset::Paper2048 => LadderConfig {
                t_min: 40,
                t_max: 50,
                n_stages: 2,
                m_t: 1.0,
                omega_min: 5.0,
                omega_max: 30.0,
                m_omega: 1.0,
                resolutions: alloc::vec![(h, w), (2 * h, 2 * w)],
            },
            Preset::Paper4096 => LadderConfig {
                t_min: 40,
                t_max: 50,
                n_stages: 3,
                m_t: 0.5,
                omega_min: 5.0,
                omega_max: 50.0,
                m_omega: 0.5,
                resolutions: alloc::vec![(h, w), (2 * h, 2 * w), (4 * h, 4 * w)],
            },
        }
    }
}

impl LadderConfig {
    /// Single-stage ladder: no refresh, constant `omega`.
    pub fn single(resolution: Resolution, omega: f64, num_steps: usize) -> Self {
        Self {
            t_min: 0,
            t_max: num_steps,
            n_stages: 1,
            m_t: 1.0,
            omega_min: omega,
            omega_max: omega,
            m_omega: 1.0,
            resolutions: alloc::vec![resolution],
        }
    }

    /// Checks the ladder against a timeline length and the codec's spatial
    /// granularity.
    pub fn validate(&self, num_steps: usize, granularity: usize) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::config("n_stages", "must be at least 1"));
        }
        if self.t_min >= self.t_max {
            return Err(Error::config(
                "t_min",
                format!("t_min {} must be below t_max {}", self.t_min, self.t_max),
            ));
        }
        if self.t_max > num_steps {
            return Err(Error::config(
                "t_max",
                format!("t_max {} exceeds {num_steps} sampling steps", self.t_max),
            ));
        }
        if !(self.m_t > 0.0 && self.m_t.is_finite()) {
            return Err(Error::config("m_t", "must be a positive finite exponent"));
        }
        if !(self.m_omega > 0.0 && self.m_omega.is_finite()) {
            return Err(Error::config(
                "m_omega",
                "must be a positive finite exponent",
            ));
        }
        if !(self.omega_min.is_finite() && self.omega_max.is_finite()) {
            return Err(Error::config("omega_min", "guidance scales must be finite"));
        }
        if self.omega_min > self.omega_max {
            return Err(Error::config(
                "omega_max",
                format!(
                    "omega_max {} below omega_min {}",
                    self.omega_max, self.omega_min
                ),
            ));
        }
        if self.resolutions.len() != self.n_stages {
            return Err(Error::config(
                "resolutions",
                format!(
                    "{} resolutions given for {} stages",
                    self.resolutions.len(),
                    self.n_stages
                ),
            ));
        }
        let granularity = granularity.max(1);
        for (i, &(h, w)) in self.resolutions.iter().enumerate() {
            if h == 0 || w == 0 {
                return Err(Error::config(
                    "resolutions",
                    format!("stage {i} has a zero dimension"),
                ));
            }
            if h % granularity != 0 || w % granularity != 0 {
                return Err(Error::config(
                    "resolutions",
                    format!("stage {i} resolution {h}x{w} not divisible by {granularity}"),
                ));
            }
        }
        for (i, pair) in self.resolutions.windows(2).enumerate() {
            if pair[1].0 < pair[0].0 || pair[1].1 < pair[0].1 {
                return Err(Error::config(
                    "resolutions",
                    format!("stage {} resolution shrinks", i + 1),
                ));
            }
        }
        Ok(())
    }
}

/// Refresh timesteps `T_i` for `i` in `[1, N)`.
pub fn select_refresh_steps(config: &LadderConfig) -> Vec<usize> {
    let span = (config.t_max - config.t_min) as f64;
    let n = config.n_stages as f64;
    (1..config.n_stages)
        .map(|i| {
            let frac = (i - 1) as f64 / n;
            libm::floor(span * libm::pow(frac, config.m_t) + config.t_min as f64) as usize
        })
        .collect()
}

/// Guidance scales `omega_i` for `i` in `[0, N)`.
pub fn select_omegas(config: &LadderConfig) -> Vec<f64> {
    if config.n_stages == 1 {
        return alloc::vec![config.omega_min];
    }
    let span = config.omega_max - config.omega_min;
    let last = (config.n_stages - 1) as f64;
    (0..config.n_stages)
        .map(|i| span * libm::pow(i as f64 / last, config.m_omega) + config.omega_min)
        .collect()
}

/// One contiguous range of sampling steps at a fixed resolution and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub resolution: Resolution,
    pub omega: f64,
    pub first_step: usize,
    /// Exclusive.
    pub last_step: usize,
}

/// The per-stage schedule of a progressive run.
#[derive(Debug, Clone, PartialEq)]
pub struct RefreshPlan {
    stages: Vec<Stage>,
}

impl RefreshPlan {
    pub fn build(config: &LadderConfig, timeline: &SamplerTimeline) -> Result<Self> {
        let num_steps = timeline.num_steps();
        config.validate(num_steps, 1)?;
        let refresh = select_refresh_steps(config);
        let omegas = select_omegas(config);

        let mut bounds = Vec::with_capacity(config.n_stages + 1);
        bounds.push(0);
        for (i, &t) in refresh.iter().enumerate() {
            let stage = i + 1;
            let prev = *bounds.last().unwrap();
            if t == prev {
                return Err(Error::Planning {
                    stage,
                    previous: stage - 1,
                    step: t,
                });
            }
            if t >= num_steps {
                return Err(Error::config(
                    "t_max",
                    format!("refresh step {t} of stage {stage} is outside the {num_steps}-step timeline"),
                ));
            }
            bounds.push(t);
        }
        bounds.push(num_steps);

        let stages = (0..config.n_stages)
            .map(|i| Stage {
                resolution: config.resolutions[i],
                omega: omegas[i],
                first_step: bounds[i],
                last_step: bounds[i + 1],
            })
            .collect();
        Ok(Self { stages })
    }

    /// One stage covering the whole timeline.
    pub fn single(resolution: Resolution, omega: f64, num_steps: usize) -> Self {
        Self {
            stages: alloc::vec![Stage {
                resolution,
                omega,
                first_step: 0,
                last_step: num_steps,
            }],
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn num_steps(&self) -> usize {
        self.stages.last().map_or(0, |s| s.last_step)
    }

    /// Index of the stage covering `step`.
    pub fn stage_index(&self, step: usize) -> usize {
        self.stages
            .iter()
            .position(|s| step < s.last_step)
            .unwrap_or(self.stages.len() - 1)
    }

    pub fn stage_at(&self, step: usize) -> &Stage {
        &self.stages[self.stage_index(step)]
    }

    /// First steps of stages 1.. (where the refreshed latent is first used).
    pub fn refresh_steps(&self) -> Vec<usize> {
        self.stages.iter().skip(1).map(|s| s.first_step).collect()
    }

    pub fn base_resolution(&self) -> Resolution {
        self.stages[0].resolution
    }

    pub fn target_resolution(&self) -> Resolution {
        self.stages[self.stages.len() - 1].resolution
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.omega).collect()
    }

    /// Same boundaries and resolutions, guidance scales replaced per stage.
    pub fn with_omegas(&self, omegas: &[f64]) -> Result<Self> {
        if omegas.len() != self.stages.len() {
            return Err(Error::config(
                "omegas",
                format!("{} scales for {} stages", omegas.len(), self.stages.len()),
            ));
        }
        let stages = self
            .stages
            .iter()
            .zip(omegas)
            .map(|(s, &omega)| Stage { omega, ..*s })
            .collect();
        Ok(Self { stages })
    }

    /// Same boundaries and scales, resolutions replaced per stage.
    pub fn with_resolutions(&self, resolutions: &[Resolution]) -> Result<Self> {
        if resolutions.len() != self.stages.len() {
            return Err(Error::config(
                "resolutions",
                format!(
                    "{} resolutions for {} stages",
                    resolutions.len(),
                    self.stages.len()
                ),
            ));
        }
        let stages = self
            .stages
            .iter()
            .zip(resolutions)
            .map(|(s, &resolution)| Stage { resolution, ..*s })
            .collect();
        Ok(Self { stages })
    }

    /// Checks that the plan tiles `[0, num_steps)` of `timeline`.
    pub fn check_against(&self, timeline: &SamplerTimeline) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("plan", "no stages"));
        }
        let mut expected = 0;
        for (i, s) in self.stages.iter().enumerate() {
            if s.first_step != expected || s.last_step <= s.first_step {
                return Err(Error::config(
                    "plan",
                    format!("stage {i} breaks the step tiling"),
                ));
            }
            expected = s.last_step;
        }
        if expected != timeline.num_steps() {
            return Err(Error::config(
                "plan",
                format!(
                    "plan covers {expected} steps but the timeline has {}",
                    timeline.num_steps()
                ),
            ));
        }
        Ok(())
    }
}

/// SNR-preserving adjustment `a / (gamma - (gamma - 1) a)`.
pub fn snr_corrected_alpha_bar(alpha_bar: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!("gamma must be >= 1, got {gamma}")));
    }
    if !(0.0..=1.0).contains(&alpha_bar) {
        return Err(Error::Domain(format!(
            "alpha_bar {alpha_bar} not in [0, 1]"
        )));
    }
    if alpha_bar == 1.0 {
        return Ok(1.0);
    }
    Ok(alpha_bar / (gamma - (gamma - 1.0) * alpha_bar))
}

/// `(H'/H * W'/W)^2` for a move from `base` to `target`.
pub fn snr_gamma(base: Resolution, target: Resolution) -> f64 {
    let ratio = (target.0 as f64 / base.0 as f64) * (target.1 as f64 / base.1 as f64);
    ratio * ratio
}

/// Coefficients of `x_t` and `eps` in the DDIM update from `alpha_bar_t` to
/// `alpha_bar_prev`.
pub fn ddim_coefficients(alpha_bar_t: f64, alpha_bar_prev: f64) -> (f64, f64) {
    let st = libm::sqrt(alpha_bar_t);
    let sp = libm::sqrt(alpha_bar_prev);
    let x = sp / st;
    // sqrt(1 - a_prev) - x sqrt(1 - a_t), rationalised so close steps do not cancel.
    let sum = libm::sqrt(1.0 - alpha_bar_prev) + sp * libm::sqrt(1.0 - alpha_bar_t) / st;
    let eps = if sum == 0.0 {
        0.0
    } else {
        (alpha_bar_t - alpha_bar_prev) / (alpha_bar_t * sum)
    };
    (x, eps)
}

/// The SNR-corrected DDIM update written as the uncorrected one times two
/// factors: `sqrt(ratio)` on the `x_t` coefficient and `sqrt(gain)` on the
/// `eps` coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrFactors {
    pub ratio: f64,
    pub gain: f64,
}

impl SnrFactors {
    pub fn new(alpha_bar_t: f64, alpha_bar_prev: f64, gamma: f64) -> Self {
        let d_t = gamma - (gamma - 1.0) * alpha_bar_t;
        let d_prev = gamma - (gamma - 1.0) * alpha_bar_prev;
        Self {
            ratio: d_t / d_prev,
            gain: gamma / d_prev,
        }
    }

    /// `(x, eps)` coefficients of the corrected update.
    pub fn coefficients(&self, alpha_bar_t: f64, alpha_bar_prev: f64) -> (f64, f64) {
        let (x, eps) = ddim_coefficients(alpha_bar_t, alpha_bar_prev);
        (libm::sqrt(self.ratio) * x, libm::sqrt(self.gain) * eps)
    }
}

/// Largest `|sqrt(ratio) - 1|` over adjacent steps of `timeline`.
pub fn snr_ratio_deviation(timeline: &SamplerTimeline, gamma: f64) -> f64 {
    (0..timeline.num_steps())
        .map(|s| {
            let f = SnrFactors::new(timeline.alpha_bar(s), timeline.alpha_bar_prev(s), gamma);
            libm::fabs(libm::sqrt(f.ratio) - 1.0)
        })
        .fold(0.0, f64::max)
}
