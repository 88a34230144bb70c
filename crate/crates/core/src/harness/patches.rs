//! Grayscale images to patch matrices.

use std::path::Path;

use image::GrayImage;

use crate::error::{contract, Error, Result};
use crate::linalg::{Dataset, Matrix};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchConfig {
    pub patch_side: usize,
    pub stride: usize,
    pub mean_removal: bool,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            patch_side: 8,
            stride: 8,
            mean_removal: true,
        }
    }
}

impl PatchConfig {
    pub fn with_side(side: usize) -> Self {
        Self {
            patch_side: side,
            stride: side,
            mean_removal: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    fn check(&self) -> Result<()> {
        if self.patch_side < 2 {
            return Err(contract("patch side must be at least 2"));
        }
        if self.stride == 0 {
            return Err(contract("patch stride must be at least 1"));
        }
        Ok(())
    }
}

/// Vectorized patches of one image, column-major within each patch.
///
/// Patches are visited left to right, then top to bottom.
pub fn image_patches(img: &GrayImage, cfg: &PatchConfig) -> Result<Vec<Vec<f64>>> {
    cfg.check()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let side = cfg.patch_side;
    if w < side || h < side {
        return Err(contract(format!("{w}×{h} image is smaller than one {side}×{side} patch")));
    }
    let mut out = Vec::new();
    for top in (0..=h - side).step_by(cfg.stride) {
        for left in (0..=w - side).step_by(cfg.stride) {
            let mut v = Vec::with_capacity(side * side);
            for c in 0..side {
                for r in 0..side {
                    v.push(img.get_pixel((left + c) as u32, (top + r) as u32).0[0] as f64);
                }
            }
            if cfg.mean_removal {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= mean);
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Stacks patches from in-memory images into `Y`, one patch per column.
pub fn patches_to_dataset<T: Real>(images: &[GrayImage], cfg: &PatchConfig) -> Result<Dataset<T>> {
    if images.is_empty() {
        return Err(contract("no images given"));
    }
    let mut cols = Vec::new();
    for img in images {
        cols.extend(image_patches(img, cfg)?);
    }
    let n = cfg.dim();
    let y = Matrix::from_fn(n, cols.len(), |r, c| T::lit(cols[c][r]));
    Dataset::new(y)
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(img.into_luma8())
}

/// Reads 8-bit grayscale files (PGM P2/P5 or PNG) and extracts their patches.
pub fn ingest<T: Real, P: AsRef<Path>>(paths: &[P], cfg: &PatchConfig) -> Result<Dataset<T>> {
    let images = paths
        .iter()
        .map(|p| load_gray(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    patches_to_dataset(&images, cfg)
}
