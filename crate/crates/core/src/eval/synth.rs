use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cube::{AdiCube, Cube};
use crate::dictionary::planet_track;
use crate::error::{Error, Result};
use crate::image::Patch;
use crate::psf::PsfTemplate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleSpec {
    List(Vec<f64>),
    /// `t` evenly spaced angles from `start_deg` to `end_deg` inclusive.
    Span { start_deg: f64, end_deg: f64 },
}

impl AngleSpec {
    pub fn resolve(&self, t: usize) -> Result<Vec<f64>> {
        let angles = match self {
            AngleSpec::List(v) => {
                if v.len() != t {
                    return Err(Error::invalid(format!("{} angles listed for {t} frames", v.len())));
                }
                v.clone()
            }
            AngleSpec::Span { start_deg, end_deg } => {
                if t == 1 {
                    vec![*start_deg]
                } else {
                    (0..t)
                        .map(|i| start_deg + (end_deg - start_deg) * i as f64 / (t - 1) as f64)
                        .collect()
                }
            }
        };
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("angles must be finite"));
        }
        Ok(angles)
    }
}

/// Recipe for a synthetic cube: a seeded low-rank background plus white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub angles: AngleSpec,
    pub bg_rank: usize,
    pub bg_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// `Y = bg_scale · A Bᵀ + N(0, noise_sigma²)` with `A` (`T x r₀`) and `B`
/// (`H·W x r₀`) drawn from a standard normal. Draw order: `A` row-major,
/// then `B` row-major, then the noise in cube order.
pub fn synth_cube(spec: &SynthSpec) -> Result<AdiCube> {
    let (t, h, w) = (spec.t, spec.h, spec.w);
    if t < 2 || h == 0 || w == 0 {
        return Err(Error::invalid(format!("synthetic cube needs T>=2 and non-empty frames, got {t}x{h}x{w}")));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite() && spec.bg_scale.is_finite()) {
        return Err(Error::invalid("noise sigma must be >= 0 and background scale finite"));
    }
    if spec.bg_rank > t.min(h * w) {
        return Err(Error::invalid(format!("background rank {} exceeds min(T, H·W)", spec.bg_rank)));
    }
    let angles = spec.angles.resolve(t)?;
    let n = h * w;
    let r0 = spec.bg_rank;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a: Vec<f64> = (0..t * r0).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..n * r0).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut data = vec![0.0; t * n];
    for i in 0..t {
        for p in 0..n {
            let mut acc = 0.0;
            for k in 0..r0 {
                acc += a[i * r0 + k] * b[p * r0 + k];
            }
            data[i * n + p] = spec.bg_scale * acc;
        }
    }
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
        for v in &mut data {
            *v += noise.sample(&mut rng);
        }
    }
    AdiCube::new(Cube::from_raw(t, h, w, data), angles)
}

/// A companion to add: position in frame 0 and brightness in units of the
/// PSF peak (the injected stamp's brightest pixel equals `flux` at integer
/// positions).
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSpec {
    pub ref_pos: (f64, f64),
    pub flux: f64,
    pub psf: PsfTemplate,
}

/// Adds `flux / psf_peak · PSF` along the companion's track, one stamp per frame.
pub fn inject(cube: &AdiCube, inj: &InjectionSpec) -> Result<AdiCube> {
    if !(inj.flux >= 0.0 && inj.flux.is_finite()) {
        return Err(Error::invalid(format!("injected flux must be >= 0, got {}", inj.flux)));
    }
    if !(inj.ref_pos.0.is_finite() && inj.ref_pos.1.is_finite()) {
        return Err(Error::invalid("injection position must be finite"));
    }
    let mut out = cube.cube().clone();
    if inj.flux == 0.0 {
        return cube.with_data(out);
    }
    let (_, h, w) = out.shape();
    let scale = inj.flux / inj.psf.peak();
    let track = planet_track(inj.ref_pos, cube.center(), cube.angles_deg());
    for (t, pos) in track.into_iter().enumerate() {
        Patch::splat(inj.psf.data(), inj.psf.size(), pos).add_into(out.frame_mut(t), h, w, scale);
    }
    cube.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{add_stamp, Image};
    use crate::linalg::{matricize, singular_values};
    use crate::psf::make_gaussian_psf;

    fn spec(rank: usize, noise: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            t: 6,
            h: 12,
            w: 12,
            angles: AngleSpec::Span {
                start_deg: 0.0,
                end_deg: 50.0,
            },
            bg_rank: rank,
            bg_scale: 1.5,
            noise_sigma: noise,
            seed,
        }
    }

    #[test]
    fn rank_one_frames_are_proportional() {
        let c = synth_cube(&spec(1, 0.0, 3)).unwrap();
        let f0 = c.cube().frame(0);
        let (k, _) = f0.iter().enumerate().fold((0, 0.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
        for t in 1..6 {
            let ratio = c.cube().frame(t)[k] / f0[k];
            for (a, b) in c.cube().frame(t).iter().zip(f0) {
                assert!((a - ratio * b).abs() < 1e-12);
            }
        }
        assert_eq!(c.angles_deg(), &[0.0, 10.0, 20.0, 30.0, 40.0, 50.0]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = synth_cube(&spec(2, 0.3, 9)).unwrap();
        let b = synth_cube(&spec(2, 0.3, 9)).unwrap();
        let c = synth_cube(&spec(2, 0.3, 10)).unwrap();
        assert_eq!(a.cube().data(), b.cube().data());
        assert_ne!(a.cube().data(), c.cube().data());
    }

    #[test]
    fn rank_two_background_is_numerically_rank_two() {
        let c = synth_cube(&spec(2, 0.0, 4)).unwrap();
        let sv = singular_values(&matricize(c.cube()));
        assert!(sv[2] / sv[0] < 1e-10);
        assert!(sv[1] / sv[0] > 1e-3);
    }

    #[test]
    fn injection_cases() {
        let psf = make_gaussian_psf(5, 2.0).unwrap();
        let base = synth_cube(&spec(2, 0.5, 5)).unwrap();
        let none = inject(&base, &InjectionSpec { ref_pos: (3.0, 8.0), flux: 0.0, psf: psf.clone() }).unwrap();
        assert_eq!(none, base);

        let still = base.with_data(Cube::zeros(6, 12, 12)).unwrap();
        let still = AdiCube::new(still.into_cube(), vec![7.0; 6]).unwrap();
        let one = inject(&still, &InjectionSpec { ref_pos: (4.0, 7.0), flux: 2.0, psf: psf.clone() }).unwrap();
        for t in 1..6 {
            assert_eq!(one.cube().frame(t), one.cube().frame(0));
        }
        assert!((one.cube().frame(0)[4 * 12 + 7] - 2.0).abs() < 1e-12);

        let inj = InjectionSpec { ref_pos: (2.5, 7.25), flux: 1.7, psf: psf.clone() };
        let got = inject(&base, &inj).unwrap();
        let track = planet_track(inj.ref_pos, base.center(), base.angles_deg());
        for (t, &pos) in track.iter().enumerate() {
            let frame = Image::new(12, 12, base.cube().frame(t).to_vec()).unwrap();
            let expect = add_stamp(&frame, &psf, pos, 1.7 / psf.peak()).unwrap();
            for (a, b) in got.cube().frame(t).iter().zip(expect.data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert!(inject(&base, &InjectionSpec { ref_pos: (1.0, 1.0), flux: -1.0, psf }).is_err());
    }

    #[test]
    fn injection_is_additive() {
        let psf = make_gaussian_psf(5, 2.0).unwrap();
        let base = synth_cube(&spec(2, 0.5, 6)).unwrap();
        let at = |f: f64| InjectionSpec { ref_pos: (3.3, 2.9), flux: f, psf: psf.clone() };
        let twice = inject(&inject(&base, &at(0.7)).unwrap(), &at(1.9)).unwrap();
        let once = inject(&base, &at(2.6)).unwrap();
        for (a, b) in twice.cube().data().iter().zip(once.cube().data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
