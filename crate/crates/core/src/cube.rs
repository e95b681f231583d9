use crate::error::{Error, Result};
use crate::image::Image;

/// A `t x h x w` stack of frames stored frame-major, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    t: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Cube {
    pub fn new(t: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::invalid(format!("cube dimensions must be positive, got {t}x{h}x{w}")));
        }
        if data.len() != t * h * w {
            return Err(Error::invalid(format!(
                "cube data has {} values, expected {}",
                data.len(),
                t * h * w
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite cube value at index {i}")));
        }
        Ok(Cube { t, h, w, data })
    }

    pub fn zeros(t: usize, h: usize, w: usize) -> Self {
        Cube {
            t,
            h,
            w,
            data: vec![0.0; t * h * w],
        }
    }

    pub(crate) fn from_raw(t: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), t * h * w);
        Cube { t, h, w, data }
    }

    pub fn from_frames(frames: &[Image]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("cube needs at least one frame"))?;
        let (h, w) = first.shape();
        let mut data = Vec::with_capacity(frames.len() * h * w);
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != (h, w) {
                return Err(Error::invalid(format!(
                    "frame {i} is {}x{}, expected {h}x{w}",
                    f.height(),
                    f.width()
                )));
            }
            data.extend_from_slice(f.data());
        }
        Ok(Cube::from_raw(frames.len(), h, w, data))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.t, self.h, self.w)
    }

    pub fn n_frames(&self) -> usize {
        self.t
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn frame_len(&self) -> usize {
        self.h * self.w
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn frame_image(&self, t: usize) -> Image {
        Image::from_raw(self.h, self.w, self.frame(t).to_vec())
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len())
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Cube) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Cube {
        Cube::from_raw(self.t, self.h, self.w, self.data.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &Cube) -> Cube {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Cube) -> Cube {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Cube, f: impl Fn(f64, f64) -> f64) -> Cube {
        assert_eq!(self.shape(), other.shape(), "cube shape mismatch");
        Cube::from_raw(
            self.t,
            self.h,
            self.w,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }
}

/// An angular-differential-imaging observation: registered frames plus the
/// parallactic angle of each frame and the star position.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiCube {
    cube: Cube,
    angles_deg: Vec<f64>,
    center: (f64, f64),
}

impl AdiCube {
    /// Builds a cube centred on the default star position `((H-1)/2, (W-1)/2)`.
    pub fn new(cube: Cube, angles_deg: Vec<f64>) -> Result<Self> {
        let center = default_center(cube.height(), cube.width());
        Self::with_center(cube, angles_deg, center)
    }

    pub fn with_center(cube: Cube, angles_deg: Vec<f64>, center: (f64, f64)) -> Result<Self> {
        if cube.n_frames() < 2 {
            return Err(Error::invalid(format!(
                "an ADI cube needs at least 2 frames, got {}",
                cube.n_frames()
            )));
        }
        if angles_deg.len() != cube.n_frames() {
            return Err(Error::invalid(format!(
                "{} angles for {} frames",
                angles_deg.len(),
                cube.n_frames()
            )));
        }
        if let Some(i) = angles_deg.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid(format!("non-finite angle at index {i}")));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::invalid("star center must be finite"));
        }
        Ok(AdiCube {
            cube,
            angles_deg,
            center,
        })
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn into_cube(self) -> Cube {
        self.cube
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.cube.shape()
    }

    /// Same geometry, different pixels.
    pub fn with_data(&self, cube: Cube) -> Result<Self> {
        if cube.shape() != self.cube.shape() {
            return Err(Error::invalid("replacement cube has a different shape"));
        }
        Ok(AdiCube {
            cube,
            angles_deg: self.angles_deg.clone(),
            center: self.center,
        })
    }
}

pub fn default_center(h: usize, w: usize) -> (f64, f64) {
    ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_invariants() {
        let c = Cube::new(2, 1, 1, vec![1.0, 2.0]).unwrap();
        assert!(AdiCube::new(c.clone(), vec![0.0]).is_err());
        assert!(AdiCube::new(c.clone(), vec![0.0, f64::INFINITY]).is_err());
        let a = AdiCube::new(c, vec![10.0, 5.0]).unwrap();
        assert_eq!(a.center(), (0.0, 0.0));
        assert!(Cube::new(0, 2, 2, vec![]).unwrap_err().is_invalid_argument());
        assert!(Cube::new(1, 1, 2, vec![0.0, f64::NAN]).is_err());
        let single = Cube::new(1, 2, 2, vec![0.0; 4]).unwrap();
        assert!(AdiCube::new(single, vec![0.0]).is_err());
    }

    #[test]
    fn frames_and_arithmetic() {
        let c = Cube::new(2, 2, 2, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(c.frame(1), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(c.frame_image(0).get(1, 0), 2.0);
        let d = c.add(&c).sub(&c);
        assert_eq!(d, c);
        assert_eq!(c.dot(&c), (0..8).map(|v| (v * v) as f64).sum::<f64>());
        let rebuilt = Cube::from_frames(&[c.frame_image(0), c.frame_image(1)]).unwrap();
        assert_eq!(rebuilt, c);
    }
}
