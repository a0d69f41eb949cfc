//! Seeded synthetic point sets for [`DatasetPrior`].

use alloc::vec::Vec;

use crate::denoiser::DatasetPrior;
use crate::error::{Error, Result};
use crate::latent::{resize_bilinear, LatentGrid, Shape};
use crate::noise::{NoisePurpose, SeededRng};

/// Recipe for a labelled synthetic dataset.
///
/// Each point is `coarse + detail`: the coarse part is Gaussian noise drawn
/// at `coarse_factor`-times lower resolution and bilinearly upsampled, the
/// detail part is i.i.d. Gaussian at full resolution. Points are grouped;
/// members of a group share the coarse part, and a point's label is its
/// index within the group.
///
/// The default set has 64 points at 4x32x32 whose detail is invisible at
/// 16x16, so class labels only matter at the finer resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub groups: usize,
    pub per_group: usize,
    pub coarse_factor: usize,
    pub coarse_std: f64,
    pub detail_std: f64,
    /// Remove the `coarse_factor`-block mean from each detail field, so that
    /// detail vanishes under block-average downsampling.
    pub block_free_detail: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            shape: (4, 32, 32),
            groups: 8,
            per_group: 8,
            coarse_factor: 2,
            coarse_std: 1.0,
            detail_std: 1.0,
            block_free_detail: true,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn num_points(&self) -> usize {
        self.groups * self.per_group
    }

    pub fn build(&self) -> Result<DatasetPrior> {
        let (c, h, w) = self.shape;
        if self.groups == 0 || self.per_group == 0 {
            return Err(Error::config("points", "dataset needs at least one point"));
        }
        let f = self.coarse_factor.max(1);
        if h % f != 0 || w % f != 0 {
            return Err(Error::config(
                "coarse_factor",
                "must divide the point resolution",
            ));
        }
        let rng = SeededRng::new(self.seed);
        let mut coarse_stream = rng.stream(NoisePurpose::Dataset, 0);
        let mut detail_stream = rng.stream(NoisePurpose::Dataset, 1);
        let mut points = Vec::with_capacity(self.num_points());
        let mut labels = Vec::with_capacity(self.num_points());
        for _ in 0..self.groups {
            let coarse = coarse_stream
                .gaussian(c, h / f, w / f)
                .map(|v| v * self.coarse_std);
            let coarse = resize_bilinear(&coarse, h, w)?;
            for member in 0..self.per_group {
                let mut detail = detail_stream.gaussian(c, h, w);
                if self.block_free_detail {
                    detail = remove_block_means(&detail, f);
                }
                points.push(coarse.axpby(1.0, &detail, self.detail_std)?);
                labels.push(member as u32);
            }
        }
        DatasetPrior::new(points, labels)
    }
}

fn remove_block_means(g: &LatentGrid, f: usize) -> LatentGrid {
    let area = (f * f) as f64;
    let block_mean = |c: usize, y: usize, x: usize| {
        let (by, bx) = (y / f * f, x / f * f);
        let mut s = 0.0;
        for yy in by..by + f {
            for xx in bx..bx + f {
                s += g.get(c, yy, xx);
            }
        }
        s / area
    };
    LatentGrid::from_fn(g.channels(), g.height(), g.width(), |c, y, x| {
        g.get(c, y, x) - block_mean(c, y, x)
    })
}
