//! 2-D image primitives: rotation, cross-correlation and stamp placement.
//!
//! Coordinates are `(row, col)` with row 0 at the top of the displayed image.
//! A positive rotation angle turns image content counter-clockwise on screen:
//! content at offset `(0, +d)` from the rotation center (to the right) ends up
//! at `(-d, 0)` (above). The trajectory dictionary uses the same convention.
//!
//! Interpolation is bilinear everywhere and samples outside the frame read as
//! zero.

use crate::error::{Error, Result};
use crate::psf::PsfTemplate;

/// A finite-valued, row-major `height x width` image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image must have at least one pixel"));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "image data has {} values, expected {}x{}={}",
                data.len(),
                height,
                width,
                height * width
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite image value at index {i}")));
        }
        Ok(Image { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image must have at least one pixel");
        Image {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Image { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Bilinear sample at a subpixel position.
    pub fn sample(&self, row: f64, col: f64) -> f64 {
        sample_bilinear(&self.data, self.height, self.width, row, col)
    }
}

/// Bilinear interpolation on a row-major grid; neighbours outside read as 0.
pub(crate) fn sample_bilinear(data: &[f64], h: usize, w: usize, row: f64, col: f64) -> f64 {
    let r0f = row.floor();
    let c0f = col.floor();
    let fr = row - r0f;
    let fc = col - c0f;
    let r0 = r0f as isize;
    let c0 = c0f as isize;
    let at = |r: isize, c: isize| -> f64 {
        if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
            data[r as usize * w + c as usize]
        } else {
            0.0
        }
    };
    let top = if fc == 0.0 {
        at(r0, c0)
    } else {
        (1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1)
    };
    if fr == 0.0 {
        return top;
    }
    let bottom = if fc == 0.0 {
        at(r0 + 1, c0)
    } else {
        (1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1)
    };
    (1.0 - fr) * top + fr * bottom
}

/// Cosine and sine of an angle in degrees, exact at multiples of 90°.
pub(crate) fn trig_deg(angle_deg: f64) -> (f64, f64) {
    let m = angle_deg.rem_euclid(360.0);
    if m == 0.0 {
        (1.0, 0.0)
    } else if m == 90.0 {
        (0.0, 1.0)
    } else if m == 180.0 {
        (-1.0, 0.0)
    } else if m == 270.0 {
        (0.0, -1.0)
    } else {
        let a = angle_deg.to_radians();
        (a.cos(), a.sin())
    }
}

/// Rotates a `(row, col)` offset counter-clockwise (display convention).
pub(crate) fn rotate_offset(dr: f64, dc: f64, cos: f64, sin: f64) -> (f64, f64) {
    (dr * cos - dc * sin, dc * cos + dr * sin)
}

/// Rotates image content by `angle_deg` (counter-clockwise positive) about
/// `center`, by inverse mapping with bilinear interpolation.
pub fn rotate_image(img: &Image, angle_deg: f64, center: (f64, f64)) -> Result<Image> {
    if !angle_deg.is_finite() {
        return Err(Error::invalid("rotation angle must be finite"));
    }
    let (h, w) = img.shape();
    if !(center.0.is_finite() && center.1.is_finite())
        || center.0 < 0.0
        || center.1 < 0.0
        || center.0 > (h - 1) as f64
        || center.1 > (w - 1) as f64
    {
        return Err(Error::invalid(format!(
            "rotation center ({}, {}) outside the {h}x{w} frame",
            center.0, center.1
        )));
    }
    if angle_deg == 0.0 {
        return Ok(img.clone());
    }
    Ok(rotate_unchecked(img.data(), h, w, angle_deg, center))
}

pub(crate) fn rotate_unchecked(data: &[f64], h: usize, w: usize, angle_deg: f64, center: (f64, f64)) -> Image {
    if angle_deg == 0.0 {
        return Image::from_raw(h, w, data.to_vec());
    }
    // Output pixel p reads the input at center + R(-angle)(p - center).
    let (cos, sin) = trig_deg(-angle_deg);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let dr = r as f64 - center.0;
        for c in 0..w {
            let dc = c as f64 - center.1;
            let (sr, sc) = rotate_offset(dr, dc, cos, sin);
            out[r * w + c] = sample_bilinear(data, h, w, center.0 + sr, center.1 + sc);
        }
    }
    Image::from_raw(h, w, out)
}

/// Same-size cross-correlation with zero padding:
/// `out(p) = sum_q img(p + q - c) * kernel(q)` where `c` is the kernel center.
///
/// The kernel is not flipped; for an asymmetric kernel this differs from
/// convolution.
pub fn cross_correlate(img: &Image, kernel: &PsfTemplate) -> Result<Image> {
    let (h, w) = img.shape();
    let k = kernel.size();
    if k > h.min(w) {
        return Err(Error::invalid(format!(
            "kernel of size {k} does not fit a {h}x{w} image"
        )));
    }
    Ok(correlate_unchecked(img.data(), h, w, kernel.data(), k))
}

pub(crate) fn correlate_unchecked(data: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Image {
    let half = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        let i_lo = (half - r).max(0);
        let i_hi = (h as isize - r + half).min(k as isize);
        for c in 0..w as isize {
            let j_lo = (half - c).max(0);
            let j_hi = (w as isize - c + half).min(k as isize);
            let mut acc = 0.0;
            for i in i_lo..i_hi {
                let src = ((r + i - half) as usize) * w;
                let krow = i as usize * k;
                for j in j_lo..j_hi {
                    acc += data[src + (c + j - half) as usize] * kernel[krow + j as usize];
                }
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    Image::from_raw(h, w, out)
}

/// A stamp resampled onto the pixel grid at a subpixel center: a
/// `(k+1) x (k+1)` block whose top-left pixel sits at `(row0, col0)`, which
/// may lie outside any particular frame.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Patch {
    pub row0: isize,
    pub col0: isize,
    pub size: usize,
    pub data: Vec<f64>,
}

impl Patch {
    /// Bilinear splat: the weighted blend of the four integer-center
    /// placements around `center`.
    pub fn splat(stamp: &[f64], k: usize, center: (f64, f64)) -> Patch {
        let r0 = center.0.floor();
        let c0 = center.1.floor();
        let fr = center.0 - r0;
        let fc = center.1 - c0;
        let size = k + 1;
        let mut data = vec![0.0; size * size];
        let weights = [
            (0, 0, (1.0 - fr) * (1.0 - fc)),
            (0, 1, (1.0 - fr) * fc),
            (1, 0, fr * (1.0 - fc)),
            (1, 1, fr * fc),
        ];
        for (dr, dc, wgt) in weights {
            if wgt == 0.0 {
                continue;
            }
            for i in 0..k {
                for j in 0..k {
                    data[(i + dr) * size + j + dc] += wgt * stamp[i * k + j];
                }
            }
        }
        let half = (k / 2) as isize;
        Patch {
            row0: r0 as isize - half,
            col0: c0 as isize - half,
            size,
            data,
        }
    }

    /// Row and column ranges of the patch (in patch coordinates) that fall
    /// inside an `h x w` frame.
    fn visible(&self, h: usize, w: usize) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let i_lo = (-self.row0).max(0) as usize;
        let j_lo = (-self.col0).max(0) as usize;
        let i_hi = (h as isize - self.row0).clamp(0, self.size as isize) as usize;
        let j_hi = (w as isize - self.col0).clamp(0, self.size as isize) as usize;
        if i_lo >= i_hi || j_lo >= j_hi {
            None
        } else {
            Some((i_lo..i_hi, j_lo..j_hi))
        }
    }

    /// Drops the parts outside an `h x w` frame (zeroing them in place).
    pub fn clip(&mut self, h: usize, w: usize) {
        match self.visible(h, w) {
            None => self.data.iter_mut().for_each(|v| *v = 0.0),
            Some((rows, cols)) => {
                for i in 0..self.size {
                    for j in 0..self.size {
                        if !rows.contains(&i) || !cols.contains(&j) {
                            self.data[i * self.size + j] = 0.0;
                        }
                    }
                }
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `frame += scale * patch`, clipped to the frame.
    pub fn add_into(&self, frame: &mut [f64], h: usize, w: usize, scale: f64) {
        if let Some((rows, cols)) = self.visible(h, w) {
            for i in rows {
                let dst = (self.row0 + i as isize) as usize * w;
                for j in cols.clone() {
                    frame[dst + (self.col0 + j as isize) as usize] += scale * self.data[i * self.size + j];
                }
            }
        }
    }

    /// Inner product with a frame, over the visible part.
    pub fn dot_frame(&self, frame: &[f64], h: usize, w: usize) -> f64 {
        let mut acc = 0.0;
        if let Some((rows, cols)) = self.visible(h, w) {
            for i in rows {
                let src = (self.row0 + i as isize) as usize * w;
                for j in cols.clone() {
                    acc += frame[src + (self.col0 + j as isize) as usize] * self.data[i * self.size + j];
                }
            }
        }
        acc
    }

    /// Inner product of two patches placed on the same grid.
    pub fn dot(&self, other: &Patch) -> f64 {
        let r_lo = self.row0.max(other.row0);
        let c_lo = self.col0.max(other.col0);
        let r_hi = (self.row0 + self.size as isize).min(other.row0 + other.size as isize);
        let c_hi = (self.col0 + self.size as isize).min(other.col0 + other.size as isize);
        let mut acc = 0.0;
        for r in r_lo..r_hi {
            let a = (r - self.row0) as usize * self.size;
            let b = (r - other.row0) as usize * other.size;
            for c in c_lo..c_hi {
                acc += self.data[a + (c - self.col0) as usize] * other.data[b + (c - other.col0) as usize];
            }
        }
        acc
    }
}

/// Returns `img + scale * stamp`, with the stamp bilinearly shifted so its
/// center pixel lands on the subpixel `center`. Pixels falling outside the
/// frame are dropped.
pub fn add_stamp(img: &Image, stamp: &PsfTemplate, center: (f64, f64), scale: f64) -> Result<Image> {
    if !(center.0.is_finite() && center.1.is_finite()) {
        return Err(Error::invalid("stamp center must be finite"));
    }
    if !scale.is_finite() {
        return Err(Error::invalid("stamp scale must be finite"));
    }
    let mut out = img.clone();
    let (h, w) = img.shape();
    Patch::splat(stamp.data(), stamp.size(), center).add_into(&mut out.data, h, w, scale);
    Ok(out)
}
