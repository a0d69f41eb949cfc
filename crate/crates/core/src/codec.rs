//! The decode, resize, encode pathway used when a refresh raises resolution.

use alloc::format;

use crate::error::{Error, Result};
use crate::latent::{resize, LatentGrid, ResizeMethod};

/// A latent/image codec pair. Images reuse [`LatentGrid`] as a plain
/// `channels x height x width` container.
pub trait Codec {
    /// Latent target sizes must be multiples of this.
    fn granularity(&self) -> usize {
        1
    }

    fn decode(&mut self, latent: &LatentGrid) -> Result<LatentGrid>;

    fn encode(&mut self, image: &LatentGrid) -> Result<LatentGrid>;
}

/// Latent and image space coincide.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl Codec for IdentityCodec {
    fn decode(&mut self, latent: &LatentGrid) -> Result<LatentGrid> {
        Ok(latent.clone())
    }

    fn encode(&mut self, image: &LatentGrid) -> Result<LatentGrid> {
        Ok(image.clone())
    }
}

impl<C: Codec + ?Sized> Codec for &mut C {
    fn granularity(&self) -> usize {
        (**self).granularity()
    }

    fn decode(&mut self, latent: &LatentGrid) -> Result<LatentGrid> {
        (**self).decode(latent)
    }

    fn encode(&mut self, image: &LatentGrid) -> Result<LatentGrid> {
        (**self).encode(image)
    }
}

/// `E(resize(D(p_x0)))` at latent size `height x width`.
///
/// The image/latent scale factor is read off the decoded image and must be
/// the same integer along both axes.
pub fn refresh_resize<C: Codec + ?Sized>(
    codec: &mut C,
    p_x0: &LatentGrid,
    height: usize,
    width: usize,
    method: ResizeMethod,
) -> Result<LatentGrid> {
    let g = codec.granularity().max(1);
    if height == 0 || width == 0 || !height.is_multiple_of(g) || !width.is_multiple_of(g) {
        return Err(Error::Codec(format!(
            "target {height}x{width} is not a positive multiple of granularity {g}"
        )));
    }
    let image = codec.decode(p_x0)?;
    let (ih, iw) = (image.height(), image.width());
    if ih % p_x0.height() != 0 || iw % p_x0.width() != 0 || ih / p_x0.height() != iw / p_x0.width()
    {
        return Err(Error::Codec(format!(
            "decoded image {ih}x{iw} is not a uniform integer upscale of latent {}x{}",
            p_x0.height(),
            p_x0.width()
        )));
    }
    let factor = ih / p_x0.height();
    let resized = resize(&image, height * factor, width * factor, method)?;
    let latent = codec.encode(&resized)?;
    let expected = (p_x0.channels(), height, width);
    if latent.shape() != expected {
        return Err(Error::Codec(format!(
            "encoder returned shape {:?}, expected {expected:?}",
            latent.shape()
        )));
    }
    Ok(latent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{average_energy, resize_bilinear};
    use crate::noise::{NoisePurpose, SeededRng};

    /// Doubles spatial size on decode by pixel repetition, halves on encode by
    /// 2x2 averaging; flips the sign so codec-space work is observable.
    struct TwoXCodec;

    impl Codec for TwoXCodec {
        fn decode(&mut self, latent: &LatentGrid) -> Result<LatentGrid> {
            Ok(LatentGrid::from_fn(
                latent.channels(),
                2 * latent.height(),
                2 * latent.width(),
                |c, y, x| -latent.get(c, y / 2, x / 2),
            ))
        }

        fn encode(&mut self, image: &LatentGrid) -> Result<LatentGrid> {
            Ok(LatentGrid::from_fn(
                image.channels(),
                image.height() / 2,
                image.width() / 2,
                |c, y, x| {
                    -0.25
                        * (image.get(c, 2 * y, 2 * x)
                            + image.get(c, 2 * y + 1, 2 * x)
                            + image.get(c, 2 * y, 2 * x + 1)
                            + image.get(c, 2 * y + 1, 2 * x + 1))
                },
            ))
        }
    }

    #[test]
    fn identity_same_size_is_unchanged() {
        let g = LatentGrid::from_fn(4, 8, 8, |c, y, x| (c * 64 + y * 8 + x) as f64 * 0.01);
        assert_eq!(
            refresh_resize(&mut IdentityCodec, &g, 8, 8, ResizeMethod::Bilinear).unwrap(),
            g
        );
    }

    #[test]
    fn identity_upscale_shape_and_constant() {
        let g = LatentGrid::filled(4, 8, 8, 3.0);
        let out = refresh_resize(&mut IdentityCodec, &g, 16, 16, ResizeMethod::Bilinear).unwrap();
        assert_eq!(out.shape(), (4, 16, 16));
        assert!(out.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn identity_matches_direct_resize() {
        let g = SeededRng::new(5)
            .stream(NoisePurpose::Diagnostic, 0)
            .gaussian(2, 6, 5);
        for method in [ResizeMethod::Bilinear, ResizeMethod::Nearest] {
            let a = refresh_resize(&mut IdentityCodec, &g, 12, 15, method).unwrap();
            assert_eq!(a, resize(&g, 12, 15, method).unwrap());
        }
    }

    #[test]
    fn upsampling_noise_loses_energy() {
        let g = SeededRng::new(9)
            .stream(NoisePurpose::Diagnostic, 0)
            .gaussian(4, 32, 32);
        let up = refresh_resize(&mut IdentityCodec, &g, 64, 64, ResizeMethod::Bilinear).unwrap();
        assert!(average_energy(&up) < average_energy(&g));
    }

    #[test]
    fn scaled_codec_round_trip_shape() {
        let g = SeededRng::new(2)
            .stream(NoisePurpose::Diagnostic, 0)
            .gaussian(3, 4, 4);
        let out = refresh_resize(&mut TwoXCodec, &g, 8, 8, ResizeMethod::Bilinear).unwrap();
        assert_eq!(out.shape(), (3, 8, 8));
        // same size through the codec reproduces the latent
        let same = refresh_resize(&mut TwoXCodec, &g, 4, 4, ResizeMethod::Bilinear).unwrap();
        for (a, b) in same.data().iter().zip(g.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_ne!(out, resize_bilinear(&g, 8, 8).unwrap().map(|v| -v));
    }

    #[test]
    fn granularity_is_enforced() {
        struct Coarse;
        impl Codec for Coarse {
            fn granularity(&self) -> usize {
                4
            }
            fn decode(&mut self, l: &LatentGrid) -> Result<LatentGrid> {
                Ok(l.clone())
            }
            fn encode(&mut self, i: &LatentGrid) -> Result<LatentGrid> {
                Ok(i.clone())
            }
        }
        let g = LatentGrid::zeros(1, 4, 4);
        assert!(matches!(
            refresh_resize(&mut Coarse, &g, 6, 8, ResizeMethod::Bilinear),
            Err(Error::Codec(_))
        ));
        assert!(refresh_resize(&mut Coarse, &g, 8, 8, ResizeMethod::Bilinear).is_ok());
    }

    #[test]
    fn encoder_shape_violation_is_reported() {
        struct Broken;
        impl Codec for Broken {
            fn decode(&mut self, l: &LatentGrid) -> Result<LatentGrid> {
                Ok(l.clone())
            }
            fn encode(&mut self, _: &LatentGrid) -> Result<LatentGrid> {
                Ok(LatentGrid::zeros(1, 1, 1))
            }
        }
        let g = LatentGrid::zeros(2, 4, 4);
        assert!(matches!(
            refresh_resize(&mut Broken, &g, 8, 8, ResizeMethod::Bilinear),
            Err(Error::Codec(_))
        ));
    }
}
