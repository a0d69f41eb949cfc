//! Noise predictors and classifier-free guidance.
//!
//! The toy denoisers here are exact: [`GaussianPrior`] has a closed-form
//! posterior, and [`DatasetPrior`] is the Bayes-optimal denoiser of a finite
//! point set. Both accept any spatial resolution so that a run may change
//! shape between stages.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::latent::{resize_bilinear, LatentGrid, Shape};

/// Which branch of the guidance pair is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Condition {
    #[default]
    Unconditional,
    Class(u32),
}

/// Where in the trajectory a prediction is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub step: usize,
    pub train_t: usize,
    /// Noise level of the query latent.
    pub alpha_bar: f64,
}

/// An epsilon-prediction model.
pub trait Denoiser {
    /// Called at the start of every stage, before any prediction at `shape`.
    fn prepare(&mut self, shape: Shape) -> Result<()> {
        let _ = shape;
        Ok(())
    }

    fn predict_eps(
        &self,
        x_t: &LatentGrid,
        ctx: &StepContext,
        condition: Condition,
    ) -> Result<LatentGrid>;
}

impl<D: Denoiser + ?Sized> Denoiser for &mut D {
    fn prepare(&mut self, shape: Shape) -> Result<()> {
        (**self).prepare(shape)
    }

    fn predict_eps(
        &self,
        x_t: &LatentGrid,
        ctx: &StepContext,
        condition: Condition,
    ) -> Result<LatentGrid> {
        (**self).predict_eps(x_t, ctx, condition)
    }
}

/// `eps_u + omega * (eps_c - eps_u)`.
pub fn cfg_combine(
    eps_uncond: &LatentGrid,
    eps_cond: &LatentGrid,
    omega: f64,
) -> Result<LatentGrid> {
    eps_uncond.zip_with(eps_cond, |u, c| u + omega * (c - u))
}

/// Inverts the forward process: the noise that takes `x0` to `x_t`.
pub fn eps_from_x0(x_t: &LatentGrid, x0: &LatentGrid, alpha_bar: f64) -> Result<LatentGrid> {
    if !(0.0..1.0).contains(&alpha_bar) {
        return Err(Error::Denoiser(format!(
            "cannot infer noise at alpha_bar = {alpha_bar}"
        )));
    }
    let a = libm::sqrt(alpha_bar);
    let inv = 1.0 / libm::sqrt(1.0 - alpha_bar);
    x_t.zip_with(x0, |x, p| (x - a * p) * inv)
}

/// Predicts `x0 = 0` everywhere; the sampler then only rescales noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict_eps(&self, x_t: &LatentGrid, ctx: &StepContext, _: Condition) -> Result<LatentGrid> {
        eps_from_x0(
            x_t,
            &LatentGrid::zeros(x_t.channels(), x_t.height(), x_t.width()),
            ctx.alpha_bar,
        )
    }
}

/// Isotropic Gaussian data distribution `N(mean, variance * I)`.
///
/// The posterior mean is affine in `x_t`, which is what makes the whole
/// deterministic trajectory an exactly computable affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: LatentGrid,
    variance: f64,
}

impl GaussianPrior {
    pub fn new(mean: LatentGrid, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Denoiser(format!(
                "variance must be positive, got {variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> &LatentGrid {
        &self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// The gain `k` in `E[x0 | x_t] = mu + k (x_t - sqrt(a) mu)`.
    pub fn posterior_gain(&self, alpha_bar: f64) -> f64 {
        let s2 = self.variance;
        libm::sqrt(alpha_bar) * s2 / (alpha_bar * s2 + 1.0 - alpha_bar)
    }

    /// The mean at `shape`; per-channel averages are broadcast when the
    /// spatial size differs from the stored mean.
    fn mean_at(&self, shape: Shape) -> Result<LatentGrid> {
        if shape == self.mean.shape() {
            return Ok(self.mean.clone());
        }
        if shape.0 != self.mean.channels() {
            return Err(Error::Denoiser(format!(
                "prior has {} channels, query has {}",
                self.mean.channels(),
                shape.0
            )));
        }
        let means = self.mean.channel_means();
        Ok(LatentGrid::from_fn(shape.0, shape.1, shape.2, |c, _, _| {
            means[c]
        }))
    }

    pub fn posterior_mean(&self, x_t: &LatentGrid, alpha_bar: f64) -> Result<LatentGrid> {
        let mu = self.mean_at(x_t.shape())?;
        let k = self.posterior_gain(alpha_bar);
        let a = libm::sqrt(alpha_bar);
        mu.zip_with(x_t, |m, x| m + k * (x - a * m))
    }
}

impl Denoiser for GaussianPrior {
    fn predict_eps(
        &self,
        x_t: &LatentGrid,
        ctx: &StepContext,
        condition: Condition,
    ) -> Result<LatentGrid> {
        if let Condition::Class(label) = condition {
            return Err(Error::Denoiser(format!("unknown class label {label}")));
        }
        let x0 = self.posterior_mean(x_t, ctx.alpha_bar)?;
        eps_from_x0(x_t, &x0, ctx.alpha_bar)
    }
}

/// A finite labelled point set; predictions are exact posterior means.
///
/// The unconditional branch weighs every point, a class condition only the
/// points carrying that label.
#[derive(Debug, Clone)]
pub struct DatasetPrior {
    points: Vec<LatentGrid>,
    labels: Vec<u32>,
    /// Points bilinearly resized to other query shapes.
    resized: BTreeMap<Shape, Vec<LatentGrid>>,
}

impl DatasetPrior {
    pub fn new(points: Vec<LatentGrid>, labels: Vec<u32>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Denoiser("dataset has no points".into()));
        };
        if labels.len() != points.len() {
            return Err(Error::Denoiser(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        let shape = first.shape();
        if let Some(i) = points.iter().position(|p| p.shape() != shape) {
            return Err(Error::Denoiser(format!(
                "point {i} has shape {:?}, expected {shape:?}",
                points[i].shape()
            )));
        }
        Ok(Self {
            points,
            labels,
            resized: BTreeMap::new(),
        })
    }

    pub fn points(&self) -> &[LatentGrid] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn shape(&self) -> Shape {
        self.points[0].shape()
    }

    fn points_at(&self, shape: Shape) -> Result<&[LatentGrid]> {
        if shape == self.shape() {
            return Ok(&self.points);
        }
        self.resized
            .get(&shape)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Denoiser(format!("dataset not prepared for shape {shape:?}")))
    }

    /// Exact `E[x0 | x_t]` under the selected points.
    pub fn posterior_mean(
        &self,
        x_t: &LatentGrid,
        alpha_bar: f64,
        condition: Condition,
    ) -> Result<LatentGrid> {
        if !(alpha_bar > 0.0 && alpha_bar < 1.0) {
            return Err(Error::Denoiser(format!(
                "alpha_bar {alpha_bar} not in (0, 1)"
            )));
        }
        let points = self.points_at(x_t.shape())?;
        let selected: Vec<&LatentGrid> = points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| match condition {
                Condition::Unconditional => true,
                Condition::Class(c) => l == c,
            })
            .map(|(p, _)| p)
            .collect();
        if selected.is_empty() {
            return Err(Error::Denoiser(format!("no points for {condition:?}")));
        }

        let a = libm::sqrt(alpha_bar);
        let scale = 1.0 / (2.0 * (1.0 - alpha_bar));
        let log_w: Vec<f64> = selected
            .iter()
            .map(|p| {
                let d2: f64 = x_t
                    .data()
                    .iter()
                    .zip(p.data())
                    .map(|(x, v)| {
                        let r = x - a * v;
                        r * r
                    })
                    .sum();
                -d2 * scale
            })
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = w.iter().sum();

        let mut mean = alloc::vec![0.0; x_t.len()];
        for (p, wi) in selected.iter().zip(&w) {
            let wi = wi / total;
            if wi == 0.0 {
                continue;
            }
            for (m, v) in mean.iter_mut().zip(p.data()) {
                *m += wi * v;
            }
        }
        let (c, h, w) = x_t.shape();
        LatentGrid::new(c, h, w, mean)
    }
}

/// Free-function form of [`DatasetPrior::posterior_mean`].
pub fn dataset_posterior_mean(
    prior: &DatasetPrior,
    x_t: &LatentGrid,
    alpha_bar: f64,
    condition: Condition,
) -> Result<LatentGrid> {
    prior.posterior_mean(x_t, alpha_bar, condition)
}

impl Denoiser for DatasetPrior {
    fn prepare(&mut self, shape: Shape) -> Result<()> {
        if shape == self.shape() || self.resized.contains_key(&shape) {
            return Ok(());
        }
        if shape.0 != self.shape().0 {
            return Err(Error::Denoiser(format!(
                "dataset has {} channels, query has {}",
                self.shape().0,
                shape.0
            )));
        }
        let resized = self
            .points
            .iter()
            .map(|p| resize_bilinear(p, shape.1, shape.2))
            .collect::<Result<Vec<_>>>()?;
        self.resized.insert(shape, resized);
        Ok(())
    }

    fn predict_eps(
        &self,
        x_t: &LatentGrid,
        ctx: &StepContext,
        condition: Condition,
    ) -> Result<LatentGrid> {
        let x0 = self.posterior_mean(x_t, ctx.alpha_bar, condition)?;
        eps_from_x0(x_t, &x0, ctx.alpha_bar)
    }
}
