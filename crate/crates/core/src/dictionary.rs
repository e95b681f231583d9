//! Dictionary of circular planet trajectories.
//!
//! A planet fixed on the sky appears, in the detector frame, to move along a
//! circular arc about the star as the field rotates. Each atom is the PSF
//! swept along one such arc (one stamp per frame), normalized to unit ℓ2 norm
//! over the whole cube. Atoms are indexed by the planet position in frame 0.
//!
//! Two ways of correlating a residual cube against every atom are provided:
//! the exact inner product with the materialized atoms, and a fast path that
//! cross-correlates each frame with the PSF, derotates the correlation maps
//! into the frame-0 orientation, sums them and reads the sum at each atom's
//! reference position.

use log::warn;
use rayon::prelude::*;

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::image::{correlate_unchecked, rotate_offset, rotate_unchecked, trig_deg, Image, Patch};
use crate::psf::PsfTemplate;

/// Annulus of candidate reference positions, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusGrid {
    pub r_in: f64,
    pub r_out: f64,
    pub step: usize,
}

impl AnnulusGrid {
    /// Integer lattice points `(i*step, j*step)` of an `h x w` frame whose
    /// distance to `center` lies in `[r_in, r_out]`, row-major.
    pub fn lattice(&self, h: usize, w: usize, center: (f64, f64)) -> Vec<(usize, usize)> {
        let mut pts = Vec::new();
        for r in (0..h).step_by(self.step) {
            for c in (0..w).step_by(self.step) {
                let d = (r as f64 - center.0).hypot(c as f64 - center.1);
                if d >= self.r_in && d <= self.r_out {
                    pts.push((r, c));
                }
            }
        }
        pts
    }

    pub fn contains(&self, pos: (f64, f64), center: (f64, f64)) -> bool {
        let d = (pos.0 - center.0).hypot(pos.1 - center.1);
        d >= self.r_in && d <= self.r_out
    }
}

/// Detector positions of a sky-fixed source, one per frame:
/// `center + R(θ_t − θ_0) (ref_pos − center)`, counter-clockwise positive.
/// Frames whose angle equals frame 0's get `ref_pos` exactly.
pub fn planet_track(ref_pos: (f64, f64), center: (f64, f64), angles_deg: &[f64]) -> Vec<(f64, f64)> {
    let Some(&theta0) = angles_deg.first() else {
        return Vec::new();
    };
    let dr = ref_pos.0 - center.0;
    let dc = ref_pos.1 - center.1;
    angles_deg
        .iter()
        .map(|&theta| {
            let delta = theta - theta0;
            if delta == 0.0 {
                return ref_pos;
            }
            let (cos, sin) = trig_deg(delta);
            let (r, c) = rotate_offset(dr, dc, cos, sin);
            (center.0 + r, center.1 + c)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrajectoryAtom {
    pub atom_id: usize,
    pub ref_pos: (f64, f64),
    pub per_frame_pos: Vec<(f64, f64)>,
    /// ℓ2 norm of the swept, clipped PSF cube before normalization.
    pub norm: f64,
    /// Per-frame stamps already divided by `norm` and clipped to the frame.
    patches: Vec<Patch>,
}

impl TrajectoryAtom {
    fn build(
        atom_id: usize,
        ref_pos: (f64, f64),
        center: (f64, f64),
        angles_deg: &[f64],
        psf: &PsfTemplate,
        h: usize,
        w: usize,
    ) -> Result<Self> {
        let per_frame_pos = planet_track(ref_pos, center, angles_deg);
        let mut patches: Vec<Patch> = per_frame_pos
            .iter()
            .map(|&p| {
                let mut patch = Patch::splat(psf.data(), psf.size(), p);
                patch.clip(h, w);
                patch
            })
            .collect();
        let norm = patches.iter().map(Patch::sq_norm).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::DegenerateAtom {
                row: ref_pos.0,
                col: ref_pos.1,
            });
        }
        for p in &mut patches {
            p.data.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(TrajectoryAtom {
            atom_id,
            ref_pos,
            per_frame_pos,
            norm,
            patches,
        })
    }

    /// `⟨cube, atom⟩` over the atom's support.
    pub fn dot_cube(&self, cube: &Cube) -> f64 {
        let (_, h, w) = cube.shape();
        self.patches
            .iter()
            .zip(cube.frames())
            .map(|(p, f)| p.dot_frame(f, h, w))
            .sum()
    }

    pub fn dot_atom(&self, other: &TrajectoryAtom) -> f64 {
        self.patches.iter().zip(&other.patches).map(|(a, b)| a.dot(b)).sum()
    }

    /// `cube += scale * atom`.
    pub fn add_into(&self, cube: &mut Cube, scale: f64) {
        let (_, h, w) = cube.shape();
        for (t, p) in self.patches.iter().enumerate() {
            p.add_into(cube.frame_mut(t), h, w, scale);
        }
    }
}

/// Which route `correlate_all` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationPath {
    /// Inner products with the materialized atoms.
    #[default]
    Exact,
    /// Per-frame PSF cross-correlation, derotation and temporal sum.
    Fast,
}

#[derive(Debug, Clone)]
pub struct TrajectoryDictionary {
    atoms: Vec<TrajectoryAtom>,
    grid: AnnulusGrid,
    psf: PsfTemplate,
    angles_deg: Vec<f64>,
    shape: (usize, usize, usize),
    center: (f64, f64),
    dropped: usize,
}

/// Builds one atom per annulus lattice point. Atoms whose track never
/// touches the frame are dropped and counted in [`TrajectoryDictionary::dropped`].
pub fn build_dictionary(
    shape: (usize, usize, usize),
    center: (f64, f64),
    angles_deg: &[f64],
    psf: &PsfTemplate,
    r_in: f64,
    r_out: f64,
    step: usize,
) -> Result<TrajectoryDictionary> {
    let (t, h, w) = shape;
    if t == 0 || h == 0 || w == 0 {
        return Err(Error::invalid("dictionary shape must be non-empty"));
    }
    if angles_deg.len() != t {
        return Err(Error::invalid(format!("{} angles for {t} frames", angles_deg.len())));
    }
    if angles_deg.iter().any(|a| !a.is_finite()) || !(center.0.is_finite() && center.1.is_finite()) {
        return Err(Error::invalid("angles and center must be finite"));
    }
    let r_max = h.min(w) as f64 / 2.0 - 1.0;
    if !(r_in > 0.0 && r_in <= r_out && r_out <= r_max) {
        return Err(Error::invalid(format!(
            "annulus needs 0 < r_in <= r_out <= {r_max}, got r_in={r_in} r_out={r_out}"
        )));
    }
    if step == 0 {
        return Err(Error::invalid("lattice step must be at least 1"));
    }
    let grid = AnnulusGrid { r_in, r_out, step };
    let lattice = grid.lattice(h, w, center);
    if lattice.is_empty() {
        return Err(Error::invalid(format!(
            "annulus [{r_in}, {r_out}] with step {step} contains no lattice point"
        )));
    }

    let built: Vec<Result<TrajectoryAtom>> = lattice
        .par_iter()
        .map(|&(r, c)| TrajectoryAtom::build(0, (r as f64, c as f64), center, angles_deg, psf, h, w))
        .collect();
    let mut atoms = Vec::with_capacity(built.len());
    let mut dropped = 0;
    for atom in built {
        match atom {
            Ok(mut a) => {
                a.atom_id = atoms.len();
                atoms.push(a);
            }
            Err(Error::DegenerateAtom { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if dropped > 0 {
        warn!("dropped {dropped} degenerate atoms whose tracks leave the frame");
    }
    if atoms.is_empty() {
        return Err(Error::invalid("every candidate trajectory leaves the frame"));
    }
    Ok(TrajectoryDictionary {
        atoms,
        grid,
        psf: psf.clone(),
        angles_deg: angles_deg.to_vec(),
        shape,
        center,
        dropped,
    })
}

impl TrajectoryDictionary {
    pub fn atoms(&self) -> &[TrajectoryAtom] {
        &self.atoms
    }

    pub fn atom(&self, id: usize) -> &TrajectoryAtom {
        &self.atoms[id]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn grid(&self) -> AnnulusGrid {
        self.grid
    }

    pub fn psf(&self) -> &PsfTemplate {
        &self.psf
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// Number of lattice points whose atoms were dropped as degenerate.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Atom id whose reference position is `pos`, if any.
    pub fn find(&self, pos: (usize, usize)) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| a.ref_pos == (pos.0 as f64, pos.1 as f64))
    }

    /// Dense unit-norm `T x H x W` cube for one atom.
    pub fn materialize_atom(&self, id: usize) -> Result<Cube> {
        let atom = self
            .atoms
            .get(id)
            .ok_or_else(|| Error::invalid(format!("atom {id} not in dictionary of {}", self.len())))?;
        let (t, h, w) = self.shape;
        let mut cube = Cube::zeros(t, h, w);
        atom.add_into(&mut cube, 1.0);
        Ok(cube)
    }

    /// `Σ coeffs[i] · atom(support[i])`.
    pub fn synthesize(&self, support: &[usize], coeffs: &[f64]) -> Cube {
        let (t, h, w) = self.shape;
        let mut cube = Cube::zeros(t, h, w);
        for (&id, &c) in support.iter().zip(coeffs) {
            self.atoms[id].add_into(&mut cube, c);
        }
        cube
    }

    fn check_shape(&self, residual: &Cube) -> Result<()> {
        if residual.shape() != self.shape {
            return Err(Error::invalid(format!(
                "residual shape {:?} does not match dictionary shape {:?}",
                residual.shape(),
                self.shape
            )));
        }
        Ok(())
    }

    /// One coefficient per atom, `⟨residual, atom⟩`.
    pub fn correlate_all(&self, residual: &Cube, path: CorrelationPath) -> Result<Vec<f64>> {
        self.check_shape(residual)?;
        Ok(match path {
            CorrelationPath::Exact => self.correlate_exact(residual),
            CorrelationPath::Fast => self.correlate_fast(residual),
        })
    }

    fn correlate_exact(&self, residual: &Cube) -> Vec<f64> {
        self.atoms.par_iter().map(|a| a.dot_cube(residual)).collect()
    }

    fn correlate_fast(&self, residual: &Cube) -> Vec<f64> {
        let summed = self.derotated_correlation_sum(residual);
        self.atoms
            .iter()
            .map(|a| summed.sample(a.ref_pos.0, a.ref_pos.1) / a.norm)
            .collect()
    }

    /// Per-frame PSF cross-correlation maps, derotated into the frame-0
    /// orientation and summed over frames.
    pub fn derotated_correlation_sum(&self, residual: &Cube) -> Image {
        let (_, h, w) = self.shape;
        let theta0 = self.angles_deg[0];
        let k = self.psf.size();
        let maps: Vec<Image> = residual
            .frames()
            .zip(&self.angles_deg)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(frame, &theta)| {
                let corr = correlate_unchecked(frame, h, w, self.psf.data(), k);
                rotate_unchecked(corr.data(), h, w, -(theta - theta0), self.center)
            })
            .collect();
        let mut sum = vec![0.0; h * w];
        for m in &maps {
            for (s, v) in sum.iter_mut().zip(m.data()) {
                *s += v;
            }
        }
        Image::from_raw(h, w, sum)
    }

    /// Writes one value per atom at its (rounded) reference pixel; zero elsewhere.
    pub fn scatter(&self, values: &[f64]) -> Image {
        let (_, h, w) = self.shape;
        let mut img = Image::zeros(h, w);
        for (a, &v) in self.atoms.iter().zip(values) {
            let r = a.ref_pos.0.round() as usize;
            let c = a.ref_pos.1.round() as usize;
            img.set(r, c, v);
        }
        img
    }
}
