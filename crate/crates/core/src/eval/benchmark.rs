//! Injection/recovery benchmark comparing detectors by ROC.
//!
//! Protocol:
//! - positive trial `i` draws a fresh cube with seed `mix(seed) ^ i` and a
//!   companion position uniformly among the dictionary lattice points (from
//!   the same seed on a separate stream); the same cube and position are
//!   reused at every flux level;
//! - negative trial `j` is a blank cube with seed `mix(seed) ^ (n_pos + j)`,
//!   shared by all flux levels;
//! - fluxes are multiples of `σ_eff = noise_sigma / sqrt(T)` in PSF-peak
//!   units;
//! - every trial is scored by the maximum of the detector's score surface
//!   over the annulus lattice, for blank and injected cubes alike, so a
//!   detection anywhere in a blank cube is a false positive. The score at
//!   the injected position is recorded alongside.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apca::{annular_pca_residual, derotate_collapse, snr_map, ApcaConfig, Collapse};
use crate::cube::AdiCube;
use crate::dictionary::{build_dictionary, TrajectoryDictionary};
use crate::error::{Error, Result};
use crate::eval::roc::{roc, RocReport};
use crate::eval::synth::{inject, synth_cube, AngleSpec, InjectionSpec, SynthSpec};
use crate::psf::{make_gaussian_psf, PsfTemplate};
use crate::solver::{detection_map, solve, SolverConfig};

/// AUC margin at which the LRSS detector is flagged as ahead of Annular PCA.
pub const ADVANTAGE_MARGIN: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Lrss,
    Apca,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Lrss => "lrss",
            Detector::Apca => "apca",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorParams {
    pub fwhm: f64,
    pub psf_size: usize,
    /// Annulus searched by both detectors.
    pub r_in: f64,
    pub r_out: f64,
    pub step: usize,
    pub solver: SolverConfig,
    pub apca_components: usize,
    pub apca_annulus_width: f64,
    pub apca_collapse: Collapse,
}

impl DetectorParams {
    /// Annular PCA rings cover the search annulus padded by one FWHM so the
    /// photometric apertures at its edges see processed pixels.
    pub fn apca_config(&self, h: usize, w: usize) -> ApcaConfig {
        ApcaConfig {
            n_components: self.apca_components,
            annulus_width: self.apca_annulus_width,
            r_in: (self.r_in - self.fwhm).max(0.0),
            r_out: (self.r_out + self.fwhm).min(h.min(w) as f64 / 2.0),
            collapse: self.apca_collapse,
        }
    }
}

/// Score of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialScore {
    /// Maximum of the score surface over the annulus lattice.
    pub annulus_max: f64,
    /// Surface value at the injected position, when one was given.
    pub at_truth: Option<f64>,
}

/// Everything that depends only on the observing geometry, built once and
/// reused across trials.
#[derive(Debug, Clone)]
pub struct Scorer {
    params: DetectorParams,
    psf: PsfTemplate,
    dict: TrajectoryDictionary,
}

impl Scorer {
    pub fn new(shape: (usize, usize, usize), center: (f64, f64), angles_deg: &[f64], params: &DetectorParams) -> Result<Self> {
        let psf = make_gaussian_psf(params.psf_size, params.fwhm)?;
        let dict = build_dictionary(shape, center, angles_deg, &psf, params.r_in, params.r_out, params.step)?;
        Ok(Scorer {
            params: params.clone(),
            psf,
            dict,
        })
    }

    pub fn dictionary(&self) -> &TrajectoryDictionary {
        &self.dict
    }

    pub fn psf(&self) -> &PsfTemplate {
        &self.psf
    }

    /// Score surface sampled at every annulus lattice point, in atom order.
    pub fn surface(&self, cube: &AdiCube, detector: Detector) -> Result<Vec<f64>> {
        let (_, h, w) = cube.shape();
        match detector {
            Detector::Lrss => {
                let dec = solve(cube, &self.dict, &self.params.solver)?;
                Ok(detection_map(cube, &dec, &self.dict)?.dense_values)
            }
            Detector::Apca => {
                let cfg = self.params.apca_config(h, w);
                let residual = annular_pca_residual(cube, &cfg)?;
                let collapsed = derotate_collapse(&residual, cube.angles_deg(), cube.center(), cfg.collapse)?;
                let snr = snr_map(&collapsed, self.params.fwhm, cube.center())?;
                Ok(self
                    .dict
                    .atoms()
                    .iter()
                    .map(|a| snr.get(a.ref_pos.0 as usize, a.ref_pos.1 as usize))
                    .collect())
            }
        }
    }

    pub fn score_trial(&self, cube: &AdiCube, detector: Detector, truth: Option<(usize, usize)>) -> Result<TrialScore> {
        let surface = self.surface(cube, detector)?;
        let annulus_max = surface.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at_truth = match truth {
            Some(pos) => {
                let id = self
                    .dict
                    .find(pos)
                    .ok_or_else(|| Error::invalid(format!("position {pos:?} is not an annulus lattice point")))?;
                Some(surface[id])
            }
            None => None,
        };
        Ok(TrialScore { annulus_max, at_truth })
    }
}

/// One-off trial scoring; builds the dictionary for the cube's geometry.
pub fn score_trial(cube: &AdiCube, detector: Detector, params: &DetectorParams, truth: Option<(usize, usize)>) -> Result<TrialScore> {
    Scorer::new(cube.shape(), cube.center(), cube.angles_deg(), params)?.score_trial(cube, detector, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSpec {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub angles: AngleSpec,
    pub bg_rank: usize,
    pub bg_scale: f64,
    pub noise_sigma: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Multiples of `σ_eff`.
    pub flux_grid: Vec<f64>,
    pub seed: u64,
    pub detectors: Vec<Detector>,
    pub params: DetectorParams,
}

impl BenchmarkSpec {
    pub fn sigma_eff(&self) -> f64 {
        self.noise_sigma / (self.t as f64).sqrt()
    }

    fn synth(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            t: self.t,
            h: self.h,
            w: self.w,
            angles: self.angles.clone(),
            bg_rank: self.bg_rank,
            bg_scale: self.bg_scale,
            noise_sigma: self.noise_sigma,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(Error::invalid("benchmark needs at least one positive and one negative trial"));
        }
        if self.flux_grid.is_empty() || self.flux_grid.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::invalid("flux grid must be non-empty and non-negative"));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::invalid("benchmark fluxes are relative to the noise; noise_sigma must be > 0"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("no detector selected"));
        }
        if self.detectors.contains(&Detector::Apca) {
            self.params.apca_config(self.h, self.w).validate(self.t, self.h, self.w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub detector: Detector,
    pub trial: usize,
    pub positive: bool,
    /// Flux multiple of `σ_eff`; 0 for blank trials.
    pub flux: f64,
    pub ref_pos: Option<(usize, usize)>,
    pub score: f64,
    pub score_at_truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxRow {
    pub flux: f64,
    pub flux_abs: f64,
    pub auc_lrss: Option<f64>,
    pub auc_apca: Option<f64>,
    /// LRSS AUC exceeds Annular PCA AUC by at least [`ADVANTAGE_MARGIN`].
    pub lrss_ahead: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorRoc {
    pub detector: Detector,
    pub flux: f64,
    pub roc: RocReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub spec: BenchmarkSpec,
    pub sigma_eff: f64,
    pub n_atoms: usize,
    pub records: Vec<TrialRecord>,
    pub rocs: Vec<DetectorRoc>,
    pub table: Vec<FluxRow>,
}

impl BenchmarkReport {
    pub fn auc(&self, detector: Detector, flux: f64) -> Option<f64> {
        self.rocs
            .iter()
            .find(|r| r.detector == detector && r.flux == flux)
            .map(|r| r.roc.auc())
    }

    /// Scores of the trials entering the ROC at `flux`: (positives, negatives).
    pub fn scores(&self, detector: Detector, flux: f64) -> (Vec<f64>, Vec<f64>) {
        let pick = |positive: bool| {
            self.records
                .iter()
                .filter(|r| r.detector == detector && r.positive == positive && (!positive || r.flux == flux))
                .map(|r| r.score)
                .collect()
        };
        (pick(true), pick(false))
    }
}

/// Per-trial seed. The base seed goes through a SplitMix64 finalizer first
/// so that nearby base seeds do not produce permutations of the same set of
/// trial seeds.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) ^ index as u64
}

fn trial_position(seed: u64, n_atoms: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng.random_range(0..n_atoms)
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.validate()?;
    let probe = synth_cube(&spec.synth(spec.seed))?;
    let scorer = Scorer::new(probe.shape(), probe.center(), probe.angles_deg(), &spec.params)?;
    let n_atoms = scorer.dictionary().len();
    let sigma_eff = spec.sigma_eff();

    let n_trials = spec.n_pos + spec.n_neg;
    let per_trial: Vec<Result<Vec<TrialRecord>>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(spec.seed, trial);
            let cube = synth_cube(&spec.synth(seed))?;
            let mut out = Vec::new();
            if trial < spec.n_pos {
                let atom = scorer.dictionary().atom(trial_position(seed, n_atoms));
                let pos = (atom.ref_pos.0 as usize, atom.ref_pos.1 as usize);
                for &flux in &spec.flux_grid {
                    let injected = inject(
                        &cube,
                        &InjectionSpec {
                            ref_pos: atom.ref_pos,
                            flux: flux * sigma_eff,
                            psf: scorer.psf().clone(),
                        },
                    )?;
                    for &detector in &spec.detectors {
                        let s = scorer.score_trial(&injected, detector, Some(pos))?;
                        out.push(TrialRecord {
                            detector,
                            trial,
                            positive: true,
                            flux,
                            ref_pos: Some(pos),
                            score: s.annulus_max,
                            score_at_truth: s.at_truth,
                        });
                    }
                }
            } else {
                for &detector in &spec.detectors {
                    let s = scorer.score_trial(&cube, detector, None)?;
                    out.push(TrialRecord {
                        detector,
                        trial,
                        positive: false,
                        flux: 0.0,
                        ref_pos: None,
                        score: s.annulus_max,
                        score_at_truth: None,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_trial {
        records.extend(r?);
    }

    let mut report = BenchmarkReport {
        spec: spec.clone(),
        sigma_eff,
        n_atoms,
        records,
        rocs: Vec::new(),
        table: Vec::new(),
    };
    for &flux in &spec.flux_grid {
        for &detector in &spec.detectors {
            let (pos, neg) = report.scores(detector, flux);
            report.rocs.push(DetectorRoc {
                detector,
                flux,
                roc: roc(&pos, &neg)?,
            });
        }
    }
    for &flux in &spec.flux_grid {
        let auc_lrss = report.auc(Detector::Lrss, flux);
        let auc_apca = report.auc(Detector::Apca, flux);
        let lrss_ahead = matches!((auc_lrss, auc_apca), (Some(l), Some(a)) if l - a >= ADVANTAGE_MARGIN);
        report.table.push(FluxRow {
            flux,
            flux_abs: flux * sigma_eff,
            auc_lrss,
            auc_apca,
            lrss_ahead,
        });
    }
    Ok(report)
}
