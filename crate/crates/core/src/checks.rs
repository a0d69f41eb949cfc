//! The self-verification suite behind `rhr verify`.
//!
//! Every check runs even when an earlier one fails; an error inside a check
//! is reported as that check's failure.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::analysis::z_test_mean_var;
use crate::codec::IdentityCodec;
use crate::denoiser::GaussianPrior;
use crate::error::Result;
use crate::latent::{
    average_energy, resize_bilinear, LatentGrid, ResizeMethod, BILINEAR_2X_ENERGY_FACTOR,
};
use crate::noise::{NoisePurpose, SeededRng};
use crate::oracle::{affine_trajectory_oracle, snr_substituted_coefficients};
use crate::sampler::{noise_refresh, run, RunSpec, Variant};
use crate::schedule::{
    select_omegas, select_refresh_steps, snr_ratio_deviation, NoiseSchedule, Preset, RefreshPlan,
    SamplerTimeline, SnrFactors,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const SNR_TRIPLES: usize = 1000;
pub const SNR_REL_TOL: f64 = 1e-12;
pub const SNR_NEAR_UNITY: f64 = 0.2;
pub const ORACLE_RUNS: usize = 100;
pub const ORACLE_REL_TOL: f64 = 1e-9;
pub const Z_LIMIT: f64 = 4.0;
pub const VAR_RATIO_RANGE: (f64, f64) = (0.95, 1.05);
pub const SMOOTHING_TOL: f64 = 3e-3;

/// Runs every check against `schedule` with a 50-step timeline.
pub fn run_checks(schedule: &NoiseSchedule, seed: u64) -> Vec<CheckOutcome> {
    let rng = SeededRng::new(seed);
    let entries: [(&'static str, Result<(bool, String)>); 8] = [
        ("schedule", check_schedule(schedule)),
        ("ladder-presets", check_ladder_presets()),
        ("snr-identity", check_snr_identity(&rng)),
        ("snr-near-unity", check_snr_near_unity(schedule)),
        ("affine-oracle", check_affine_oracle(schedule, &rng)),
        ("snr-gamma-one", check_snr_gamma_one(schedule, &rng)),
        (
            "refresh-distribution",
            check_refresh_distribution(schedule, &rng),
        ),
        ("smoothing-factor", check_smoothing_factor(&rng)),
    ];
    entries
        .into_iter()
        .map(|(name, r)| match r {
            Ok((passed, detail)) => CheckOutcome {
                name,
                passed,
                detail,
            },
            Err(e) => CheckOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn timeline(schedule: &NoiseSchedule) -> Result<SamplerTimeline> {
    SamplerTimeline::new(schedule, 50)
}

fn check_schedule(schedule: &NoiseSchedule) -> Result<(bool, String)> {
    schedule.check()?;
    let tl = timeline(schedule)?;
    let (first, last) = (tl.train_t(0), tl.train_t(tl.num_steps() - 1));
    let ok = first == schedule.train_steps() - 1 && last == 0;
    Ok((ok, format!("train_t spans {first}..={last}")))
}

/// Largest absolute deviation between `got` and `want`, or infinity on a
/// length mismatch.
fn max_abs_diff(got: &[f64], want: &[f64]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter()
        .zip(want)
        .map(|(a, b)| libm::fabs(a - b))
        .fold(0.0, f64::max)
}

fn check_ladder_presets() -> Result<(bool, String)> {
    let c2 = Preset::Paper2048.config((1, 1));
    let c4 = Preset::Paper4096.config((1, 1));
    let (steps2, steps4) = (select_refresh_steps(&c2), select_refresh_steps(&c4));
    let (om2, om4) = (select_omegas(&c2), select_omegas(&c4));
    let err = max_abs_diff(&om2, &[5.0, 30.0])
        .max(max_abs_diff(&om4, &[5.0, 36.819_805_153_394_64, 50.0]));
    let ok = steps2 == [40] && steps4 == [40, 45] && err < 1e-9;
    Ok((
        ok,
        format!("steps {steps2:?} {steps4:?}, omega error {err:.1e}"),
    ))
}

fn check_snr_identity(rng: &SeededRng) -> Result<(bool, String)> {
    let mut stream = rng.stream(NoisePurpose::Diagnostic, 10);
    let mut worst = 0.0f64;
    let mut gain_ok = true;
    for _ in 0..SNR_TRIPLES {
        let (u, v) = (stream.next_uniform(), stream.next_uniform());
        let (a_t, a_prev) = (u.min(v), u.max(v));
        let gamma = 1.0 + 15.0 * stream.next_uniform();
        if a_t <= 0.0 {
            continue;
        }
        let Some(direct) = snr_substituted_coefficients(a_t, a_prev, gamma) else {
            continue;
        };
        let f = SnrFactors::new(a_t, a_prev, gamma);
        let factored = f.coefficients(a_t, a_prev);
        worst = worst
            .max(rel_err(direct.0, factored.0))
            .max(rel_err(direct.1, factored.1));
        gain_ok &= f.gain >= 1.0 && f.gain <= gamma;
    }
    Ok((
        worst < SNR_REL_TOL && gain_ok,
        format!("max relative error {worst:.2e} over {SNR_TRIPLES} triples, gain in [1, gamma]: {gain_ok}"),
    ))
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = libm::fabs(a).max(libm::fabs(b));
    if scale == 0.0 {
        0.0
    } else {
        libm::fabs(a - b) / scale
    }
}

fn check_snr_near_unity(schedule: &NoiseSchedule) -> Result<(bool, String)> {
    let tl = timeline(schedule)?;
    let worst = (0..=150)
        .map(|i| snr_ratio_deviation(&tl, 1.0 + 0.1 * i as f64))
        .fold(0.0, f64::max);
    Ok((
        worst < SNR_NEAR_UNITY,
        format!("max |sqrt(ratio) - 1| = {worst:.6}"),
    ))
}

fn oracle_prior() -> Result<GaussianPrior> {
    let mean = LatentGrid::from_fn(4, 8, 8, |c, y, x| {
        0.3 * c as f64 - 0.05 * y as f64 + 0.02 * x as f64
    });
    GaussianPrior::new(mean, 0.8)
}

fn check_affine_oracle(schedule: &NoiseSchedule, rng: &SeededRng) -> Result<(bool, String)> {
    let tl = timeline(schedule)?;
    let prior = oracle_prior()?;
    let plan = RefreshPlan::single((8, 8), 5.0, tl.num_steps());
    let map = affine_trajectory_oracle(&plan, &tl, &prior, 5.0)?;
    let mut worst = 0.0f64;
    for i in 0..ORACLE_RUNS {
        let x_t = rng
            .stream(NoisePurpose::Diagnostic, 100 + i as u32)
            .gaussian(4, 8, 8);
        let mut spec = RunSpec::new(Variant::Baseline, plan.clone(), tl.clone(), 4);
        spec.initial_latent = Some(x_t.clone());
        let got = run(&spec, &mut prior.clone(), &mut IdentityCodec, rng)?.final_p_x0;
        let want = map.apply(&x_t, prior.mean())?;
        worst = worst.max(relative_norm_error(&got, &want)?);
    }
    Ok((
        worst < ORACLE_REL_TOL,
        format!("max relative error {worst:.2e} over {ORACLE_RUNS} noises"),
    ))
}

fn relative_norm_error(got: &LatentGrid, want: &LatentGrid) -> Result<f64> {
    let diff = got.mse(want)?;
    let norm = average_energy(want);
    Ok(if norm == 0.0 {
        libm::sqrt(diff)
    } else {
        libm::sqrt(diff / norm)
    })
}

fn check_snr_gamma_one(schedule: &NoiseSchedule, rng: &SeededRng) -> Result<(bool, String)> {
    let tl = timeline(schedule)?;
    let prior = oracle_prior()?;
    let plan = RefreshPlan::single((8, 8), 3.0, tl.num_steps());
    let base = run(
        &RunSpec::new(Variant::Baseline, plan.clone(), tl.clone(), 4),
        &mut prior.clone(),
        &mut IdentityCodec,
        rng,
    )?;
    let snr = run(
        &RunSpec::new(Variant::SnrCorrected, plan, tl, 4),
        &mut prior.clone(),
        &mut IdentityCodec,
        rng,
    )?;
    let same = base.final_p_x0 == snr.final_p_x0 && base.trace == snr.trace;
    Ok((
        same,
        String::from(if same {
            "bit-identical"
        } else {
            "outputs differ"
        }),
    ))
}

fn check_refresh_distribution(schedule: &NoiseSchedule, rng: &SeededRng) -> Result<(bool, String)> {
    let tl = timeline(schedule)?;
    let alpha_bar = tl.alpha_bar_prev(39);
    let level = 0.7;
    let p_x0 = LatentGrid::filled(4, 160, 160, level);
    let eps = rng.stream(NoisePurpose::Refresh, 0).gaussian(4, 160, 160);
    let x = noise_refresh(
        &p_x0,
        &mut IdentityCodec,
        (160, 160),
        ResizeMethod::Bilinear,
        alpha_bar,
        &eps,
    )?;
    let (z, ratio) = z_test_mean_var(x.data(), libm::sqrt(alpha_bar) * level, 1.0 - alpha_bar)?;
    let ok = libm::fabs(z) < Z_LIMIT && ratio >= VAR_RATIO_RANGE.0 && ratio <= VAR_RATIO_RANGE.1;
    Ok((
        ok,
        format!(
            "z_mean {z:.3}, var_ratio {ratio:.4} over {} elements",
            x.len()
        ),
    ))
}

fn check_smoothing_factor(rng: &SeededRng) -> Result<(bool, String)> {
    let g = rng
        .stream(NoisePurpose::Diagnostic, 20)
        .gaussian(4, 512, 512);
    let up = resize_bilinear(&g, 1024, 1024)?;
    let rho = average_energy(&up) / average_energy(&g);
    Ok((
        libm::fabs(rho - BILINEAR_2X_ENERGY_FACTOR) < SMOOTHING_TOL,
        format!("energy factor {rho:.5} (reference {BILINEAR_2X_ENERGY_FACTOR})"),
    ))
}
