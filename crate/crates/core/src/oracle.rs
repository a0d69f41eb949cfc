//! Closed-form trajectory of the Gaussian-prior sampler.
//!
//! With a Gaussian prior the posterior mean is affine in `x_t`, so every DDIM
//! step is affine and the whole run collapses to
//! `final = a * x_T + b * mu`. The coefficients are built from scalar
//! recurrences only and never touch the grid code in [`crate::sampler`].
//!
//! Also holds an exact-arithmetic evaluation of the SNR-corrected step, used
//! as the reference for the factored form in [`crate::schedule`].

use alloc::format;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::denoiser::GaussianPrior;
use crate::error::{Error, Result};
use crate::latent::LatentGrid;
use crate::schedule::{RefreshPlan, SamplerTimeline};

/// `final_p_x0 = a * x_T + b_mu * mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: f64,
    pub b_mu: f64,
}

impl AffineMap {
    pub fn apply(&self, x_t: &LatentGrid, mu: &LatentGrid) -> Result<LatentGrid> {
        x_t.axpby(self.a, mu, self.b_mu)
    }
}

/// Composes the per-step affine maps of a single-resolution baseline run.
///
/// Both guidance branches see the same prior, so `omega` cancels; it is
/// carried through the recurrence anyway to keep the oracle literal.
pub fn affine_trajectory_oracle(
    plan: &RefreshPlan,
    timeline: &SamplerTimeline,
    prior: &GaussianPrior,
    omega: f64,
) -> Result<AffineMap> {
    if plan.stages().len() != 1 {
        return Err(Error::Oracle(format!(
            "oracle needs a single-resolution plan, got {} stages",
            plan.stages().len()
        )));
    }
    if plan.num_steps() != timeline.num_steps() {
        return Err(Error::Oracle("plan and timeline lengths differ".into()));
    }
    let s2 = prior.variance();
    // x = ax * x_T + bx * mu
    let (mut ax, mut bx) = (1.0, 0.0);
    let mut out = AffineMap { a: 0.0, b_mu: 0.0 };
    for step in 0..timeline.num_steps() {
        let a_t = timeline.alpha_bar(step);
        let a_prev = timeline.alpha_bar_prev(step);
        let sa = libm::sqrt(a_t);
        let sn = libm::sqrt(1.0 - a_t);

        // posterior mean m = k x + (1 - k sqrt(a)) mu
        let k = sa * s2 / (a_t * s2 + 1.0 - a_t);
        let (m_x, m_mu) = (k * ax, k * bx + (1.0 - k * sa));
        // eps = (x - sqrt(a) m) / sqrt(1 - a), identical in both branches
        let e_x = (ax - sa * m_x) / sn;
        let e_mu = (bx - sa * m_mu) / sn;
        let (cond, uncond) = ((e_x, e_mu), (e_x, e_mu));
        let g_x = uncond.0 + omega * (cond.0 - uncond.0);
        let g_mu = uncond.1 + omega * (cond.1 - uncond.1);
        // p = (x - sqrt(1 - a) eps) / sqrt(a)
        let p_x = (ax - sn * g_x) / sa;
        let p_mu = (bx - sn * g_mu) / sa;
        let (sp, np) = (libm::sqrt(a_prev), libm::sqrt(1.0 - a_prev));
        ax = sp * p_x + np * g_x;
        bx = sp * p_mu + np * g_mu;
        out = AffineMap { a: p_x, b_mu: p_mu };
    }
    Ok(out)
}

/// DDIM `(x, eps)` coefficients after substituting the SNR-corrected
/// `alpha_bar` for both ends of the step, with the substitution and the
/// difference `a'_t - a'_prev` carried out in exact rationals.
///
/// Returns `None` when an input is not finite or `alpha_bar_t` is not
/// positive.
pub fn snr_substituted_coefficients(
    alpha_bar_t: f64,
    alpha_bar_prev: f64,
    gamma: f64,
) -> Option<(f64, f64)> {
    if !(alpha_bar_t > 0.0) {
        return None;
    }
    let one = BigRational::one();
    let g = BigRational::from_float(gamma)?;
    let corrected = |a: f64| -> Option<BigRational> {
        let a = BigRational::from_float(a)?;
        let d = &g - (&g - &one) * &a;
        Some(a / d)
    };
    let (ct, cp) = (corrected(alpha_bar_t)?, corrected(alpha_bar_prev)?);
    let f = |q: BigRational| q.to_f64();
    let x = libm::sqrt(f(&cp / &ct)?);
    let sum = libm::sqrt(f(&one - &cp)?) + libm::sqrt(f(&cp * (&one - &ct) / &ct)?);
    let eps = if sum == 0.0 {
        0.0
    } else {
        f(&ct - &cp)? / (f(ct)? * sum)
    };
    Some((x, eps))
}
