//! Built-in renderer mapping latent coordinates to a small parametric scene.

use rand::Rng;

use crate::error::{Error, Result};
use crate::latent::LatentVector;
use crate::rng::keyed_rng;

pub const IMAGE_SIZE: u32 = 64;
const SHAPES: usize = 3;
const BACKGROUND_ATTRS: usize = 3;
// x, y, radius, r, g, b, kind
const SHAPE_ATTRS: usize = 7;
pub const N_ATTRIBUTES: usize = BACKGROUND_ATTRS + SHAPES * SHAPE_ATTRS;

/// Each attribute reads a fixed random projection of the latent vector,
/// squashed into `[0, 1]` and quantized to 1/255.
#[derive(Debug, Clone, PartialEq)]
pub struct ProceduralRenderer {
    dim: usize,
    projections: Vec<Vec<f64>>,
}

impl ProceduralRenderer {
    pub fn new(dim: usize, version_tag: &str) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("renderer dimension must be positive".into()));
        }
        let seed = crate::rng::derive_seed(0, version_tag);
        let scale = 1.0 / (dim as f64).sqrt();
        let projections = (0..N_ATTRIBUTES)
            .map(|i| {
                let mut rng = keyed_rng(seed, "procedural-attribute", i as u64);
                (0..dim)
                    .map(|_| if rng.random::<bool>() { scale } else { -scale })
                    .collect()
            })
            .collect();
        Ok(ProceduralRenderer { dim, projections })
    }

    pub fn attributes(&self, z: &LatentVector) -> Result<[u8; N_ATTRIBUTES]> {
        crate::error::check_dim(self.dim, z.dim())?;
        if !z.is_finite() {
            return Err(Error::InvalidState("non-finite latent coordinate".into()));
        }
        let mut out = [0u8; N_ATTRIBUTES];
        for (a, w) in out.iter_mut().zip(&self.projections) {
            let s: f64 = w.iter().zip(z.values()).map(|(w, z)| w * z).sum();
            let unit = 0.5 * (1.0 + (1.5 * s).tanh());
            *a = (unit * 255.0).round() as u8;
        }
        Ok(out)
    }

    pub fn render_rgb(&self, z: &LatentVector) -> Result<Vec<u8>> {
        let attrs = self.attributes(z)?;
        let n = IMAGE_SIZE as usize;
        let mut pixels = Vec::with_capacity(n * n * 3);
        for _ in 0..n * n {
            pixels.extend_from_slice(&attrs[..BACKGROUND_ATTRS]);
        }
        for s in 0..SHAPES {
            let a = &attrs[BACKGROUND_ATTRS + s * SHAPE_ATTRS..][..SHAPE_ATTRS];
            let cx = a[0] as f64 / 255.0 * n as f64;
            let cy = a[1] as f64 / 255.0 * n as f64;
            let radius = 4.0 + a[2] as f64 / 255.0 * 16.0;
            let square = a[6] >= 128;
            for y in 0..n {
                for x in 0..n {
                    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                    let inside = if square {
                        dx.abs().max(dy.abs()) <= radius
                    } else {
                        dx * dx + dy * dy <= radius * radius
                    };
                    if inside {
                        pixels[(y * n + x) * 3..][..3].copy_from_slice(&a[3..6]);
                    }
                }
            }
        }
        Ok(pixels)
    }

    pub fn render_png(&self, z: &LatentVector) -> Result<Vec<u8>> {
        let pixels = self.render_rgb(z)?;
        let mut out = Vec::new();
        let mut encoder = png::Encoder::new(&mut out, IMAGE_SIZE, IMAGE_SIZE);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::DecodeFailure(format!("png header: {e}")))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::DecodeFailure(format!("png data: {e}")))?;
        writer
            .finish()
            .map_err(|e| Error::DecodeFailure(format!("png finish: {e}")))?;
        Ok(out)
    }
}
