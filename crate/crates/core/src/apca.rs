//! Annular PCA baseline detector.
//!
//! The field around the star is cut into concentric rings. In each ring the
//! `T x n_pixels` matrix is mean-subtracted over time and its leading
//! principal components are projected out. Residual frames are then
//! derotated to the frame-0 orientation, collapsed over time, and turned into
//! an aperture-photometry S/N map.
//!
//! No protection angle or frame selection is applied when building the PCA
//! basis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{AdiCube, Cube};
use crate::error::{Error, Result};
use crate::image::{rotate_unchecked, sample_bilinear, Image};
use crate::linalg::project_out_top_components;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Collapse {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApcaConfig {
    pub n_components: usize,
    pub annulus_width: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub collapse: Collapse,
}

impl ApcaConfig {
    pub(crate) fn validate(&self, t: usize, h: usize, w: usize) -> Result<()> {
        if self.n_components > t {
            return Err(Error::invalid(format!(
                "{} principal components requested from {t} frames",
                self.n_components
            )));
        }
        if !(self.annulus_width >= 1.0 && self.annulus_width.is_finite()) {
            return Err(Error::invalid("annulus width must be at least 1 pixel"));
        }
        if !(self.r_in >= 0.0 && self.r_in < self.r_out) {
            return Err(Error::invalid(format!(
                "need 0 <= r_in < r_out, got r_in={} r_out={}",
                self.r_in, self.r_out
            )));
        }
        let limit = h.min(w) as f64 / 2.0;
        if self.r_out > limit {
            return Err(Error::invalid(format!("r_out {} exceeds the frame half-size {limit}", self.r_out)));
        }
        Ok(())
    }

    fn n_rings(&self) -> usize {
        ((self.r_out - self.r_in) / self.annulus_width).ceil() as usize
    }

    /// Ring index of a pixel at distance `d`, if it falls in `[r_in, r_out]`.
    fn ring_of(&self, d: f64) -> Option<usize> {
        if d < self.r_in || d > self.r_out {
            return None;
        }
        let i = ((d - self.r_in) / self.annulus_width).floor() as usize;
        Some(i.min(self.n_rings() - 1))
    }

    /// Pixel indices of each ring, row-major within a ring.
    pub fn rings(&self, h: usize, w: usize, center: (f64, f64)) -> Vec<Vec<usize>> {
        let mut rings = vec![Vec::new(); self.n_rings()];
        for r in 0..h {
            for c in 0..w {
                let d = (r as f64 - center.0).hypot(c as f64 - center.1);
                if let Some(i) = self.ring_of(d) {
                    rings[i].push(r * w + c);
                }
            }
        }
        rings
    }
}

/// Per-ring temporal-mean subtraction and removal of the top principal
/// components. Pixels outside `[r_in, r_out]` are zero in the result.
pub fn annular_pca_residual(cube: &AdiCube, cfg: &ApcaConfig) -> Result<Cube> {
    let (t, h, w) = cube.shape();
    cfg.validate(t, h, w)?;
    let y = cube.cube();
    let rings = cfg.rings(h, w, cube.center());

    let residuals: Vec<DMatrix<f64>> = rings
        .par_iter()
        .map(|pix| {
            let mut m = DMatrix::from_fn(t, pix.len(), |i, j| y.frame(i)[pix[j]]);
            for mut col in m.column_iter_mut() {
                let mean = col.sum() / t as f64;
                col.add_scalar_mut(-mean);
            }
            if pix.is_empty() {
                m
            } else {
                project_out_top_components(&m, cfg.n_components)
            }
        })
        .collect();

    let mut out = Cube::zeros(t, h, w);
    for (pix, res) in rings.iter().zip(&residuals) {
        for i in 0..t {
            let frame = out.frame_mut(i);
            for (j, &p) in pix.iter().enumerate() {
                frame[p] = res[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Rotates frame `t` by `-(θ_t − θ_0)` about `center` and collapses over time.
pub fn derotate_collapse(residual: &Cube, angles_deg: &[f64], center: (f64, f64), collapse: Collapse) -> Result<Image> {
    let (t, h, w) = residual.shape();
    if angles_deg.len() != t {
        return Err(Error::invalid(format!("{} angles for {t} frames", angles_deg.len())));
    }
    let theta0 = angles_deg[0];
    let frames: Vec<Image> = (0..t)
        .into_par_iter()
        .map(|i| rotate_unchecked(residual.frame(i), h, w, -(angles_deg[i] - theta0), center))
        .collect();
    Ok(collapse_frames(&frames, h, w, collapse))
}

fn collapse_frames(frames: &[Image], h: usize, w: usize, collapse: Collapse) -> Image {
    let n = frames.len();
    let mut out = vec![0.0; h * w];
    let mut column = vec![0.0; n];
    for (p, o) in out.iter_mut().enumerate() {
        for (c, f) in column.iter_mut().zip(frames) {
            *c = f.data()[p];
        }
        *o = match collapse {
            Collapse::Mean => column.iter().sum::<f64>() / n as f64,
            Collapse::Median => median(&mut column),
        };
    }
    Image::from_raw(h, w, out)
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Relative level below which aperture statistics are treated as numerically flat.
const FLAT_FLOOR: f64 = 1e-12;

/// Integer offsets inside a disk of the given radius.
fn aperture_offsets(radius: f64) -> Vec<(f64, f64)> {
    let reach = radius.floor() as i64;
    let mut offs = Vec::new();
    for di in -reach..=reach {
        for dj in -reach..=reach {
            if ((di * di + dj * dj) as f64) <= radius * radius {
                offs.push((di as f64, dj as f64));
            }
        }
    }
    offs
}

/// Aperture sum at a subpixel position, or `None` if any sample needs a
/// pixel outside the frame.
fn aperture_sum(img: &Image, pos: (f64, f64), offsets: &[(f64, f64)]) -> Option<f64> {
    let (h, w) = img.shape();
    let mut acc = 0.0;
    for &(di, dj) in offsets {
        let r = pos.0 + di;
        let c = pos.1 + dj;
        if r < 0.0 || c < 0.0 || r.ceil() > (h - 1) as f64 || c.ceil() > (w - 1) as f64 {
            return None;
        }
        acc += sample_bilinear(img.data(), h, w, r, c);
    }
    Some(acc)
}

/// Aperture-photometry S/N per pixel.
///
/// For a pixel at separation `ρ`, apertures of radius `fwhm/2` are placed
/// every `fwhm` of arc around the circle of radius `ρ`, starting at the
/// pixel. The pixel's own aperture and its two neighbours are excluded;
/// the rest (those fully inside the frame) are the reference sample. The
/// score is `(F − mean(ref)) / (std(ref) · sqrt(1 + 1/n))` with the
/// unbiased standard deviation. Pixels with fewer than 3 references score 0.
pub fn snr_map(collapsed: &Image, fwhm: f64, center: (f64, f64)) -> Result<Image> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::invalid(format!("fwhm must be positive, got {fwhm}")));
    }
    let (h, w) = collapsed.shape();
    let offsets = aperture_offsets(fwhm / 2.0);
    let scale = (0..h * w)
        .filter_map(|p| aperture_sum(collapsed, ((p / w) as f64, (p % w) as f64), &offsets))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = FLAT_FLOOR * scale;

    let data: Vec<f64> = (0..h * w)
        .into_par_iter()
        .map(|p| {
            let pos = ((p / w) as f64, (p % w) as f64);
            pixel_snr(collapsed, pos, center, fwhm, &offsets, floor).unwrap_or(0.0)
        })
        .collect();
    Ok(Image::from_raw(h, w, data))
}

fn pixel_snr(
    img: &Image,
    pos: (f64, f64),
    center: (f64, f64),
    fwhm: f64,
    offsets: &[(f64, f64)],
    floor: f64,
) -> Option<f64> {
    let dr = pos.0 - center.0;
    let dc = pos.1 - center.1;
    let rho = dr.hypot(dc);
    let n_total = (2.0 * std::f64::consts::PI * rho / fwhm).floor() as usize;
    if n_total < 6 {
        return None;
    }
    let test = aperture_sum(img, pos, offsets)?;
    let phi = dr.atan2(dc);
    let step = 2.0 * std::f64::consts::PI / n_total as f64;
    let refs: Vec<f64> = (2..n_total - 1)
        .filter_map(|k| {
            let a = phi + step * k as f64;
            aperture_sum(img, (center.0 + rho * a.sin(), center.1 + rho * a.cos()), offsets)
        })
        .collect();
    let n = refs.len();
    if n < 3 {
        return None;
    }
    let mean = refs.iter().sum::<f64>() / n as f64;
    let var = refs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let noise = var.sqrt() * (1.0 + 1.0 / n as f64).sqrt();
    let num = test - mean;
    if num.abs() <= floor {
        return Some(0.0);
    }
    Some(num / noise.max(floor))
}
