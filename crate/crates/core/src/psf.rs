use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FWHM / sigma for a Gaussian, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    UnitSum,
    UnitL2,
}

impl Normalization {
    fn measure(self, data: &[f64]) -> f64 {
        match self {
            Normalization::UnitSum => data.iter().sum(),
            Normalization::UnitL2 => data.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Odd-sized square point-spread-function stamp with a known normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfTemplate {
    size: usize,
    data: Vec<f64>,
    normalization: Normalization,
}

impl PsfTemplate {
    /// Wraps an already-normalized stamp; the norm must match within 1e-12.
    pub fn new(size: usize, data: Vec<f64>, normalization: Normalization) -> Result<Self> {
        Self::check_shape(size, &data)?;
        let norm = normalization.measure(&data);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "stamp norm {norm} does not match {normalization:?}"
            )));
        }
        Ok(PsfTemplate {
            size,
            data,
            normalization,
        })
    }

    /// Rescales `data` to the requested normalization.
    pub fn normalized(size: usize, mut data: Vec<f64>, normalization: Normalization) -> Result<Self> {
        Self::check_shape(size, &data)?;
        let norm = normalization.measure(&data);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid(format!("cannot normalize stamp with norm {norm}")));
        }
        data.iter_mut().for_each(|v| *v /= norm);
        Ok(PsfTemplate {
            size,
            data,
            normalization,
        })
    }

    fn check_shape(size: usize, data: &[f64]) -> Result<()> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::invalid(format!("stamp size must be odd and positive, got {size}")));
        }
        if data.len() != size * size {
            return Err(Error::invalid(format!(
                "stamp of size {size} needs {} values, got {}",
                size * size,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite stamp value at index {i}")));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Index of the center pixel along each axis.
    pub fn center(&self) -> usize {
        self.size / 2
    }

    pub fn peak(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Isotropic Gaussian stamp peaked on the center pixel, normalized to unit sum.
pub fn make_gaussian_psf(size: usize, fwhm: f64) -> Result<PsfTemplate> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!("PSF size must be odd, got {size}")));
    }
    if !(fwhm.is_finite() && fwhm > 0.0) {
        return Err(Error::invalid(format!("PSF fwhm must be positive, got {fwhm}")));
    }
    let sigma = fwhm / FWHM_PER_SIGMA;
    let half = (size / 2) as f64;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let d2 = (i as f64 - half).powi(2) + (j as f64 - half).powi(2);
            data.push((-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    PsfTemplate::normalized(size, data, Normalization::UnitSum)
}
