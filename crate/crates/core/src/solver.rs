//! Alternating hard-thresholding for `Y = L + X`.
//!
//! `L` is constrained to rank at most `r` (as a `T x H·W` matrix) and `X` to a
//! combination of at most `s` trajectory atoms. Each iteration projects
//! `Y - X` onto rank-`r` matrices, then projects `Y - L` onto `s`-atom
//! supports: atoms are ranked by correlation, the top `s` kept, and their
//! coefficients refit by least squares on the selected atoms.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cube::{AdiCube, Cube};
use crate::dictionary::{CorrelationPath, TrajectoryDictionary};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::{matricize, rank_project, unmatricize};

/// Objectives at or below this fraction of `‖Y‖_F` count as an exact fit.
const EXACT_FIT_RATIO: f64 = 1e-12;
/// Allowed objective increase (relative to `‖Y‖_F`) before flagging non-monotone progress.
const MONOTONE_SLACK: f64 = 1e-9;
/// Gram matrices with eigenvalue ratio below this are treated as singular.
const GRAM_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub sparsity: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub nonnegative_flux: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank: 1,
            sparsity: 1,
            max_iters: 100,
            rel_tol: 1e-6,
            nonnegative_flux: true,
        }
    }
}

impl SolverConfig {
    pub fn new(rank: usize, sparsity: usize) -> Self {
        SolverConfig {
            rank,
            sparsity,
            ..Default::default()
        }
    }
}

/// Output of the sparse projection step.
#[derive(Debug, Clone)]
pub struct SparseFit {
    pub support: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub foreground: Cube,
    /// Raw `⟨residual, atom⟩` for every atom.
    pub correlations: Vec<f64>,
    /// The Gram system was singular and the thresholded correlations were used.
    pub refit_fallback: bool,
}

/// Selects up to `s` atoms by correlation with `residual` and refits their
/// coefficients by least squares.
///
/// With `nonnegative_flux`, negative correlations are clamped to zero before
/// ranking, atoms with zero score are never selected, and atoms whose refit
/// coefficient comes out negative are removed and the rest refit.
pub fn sparse_project(
    residual: &Cube,
    dict: &TrajectoryDictionary,
    s: usize,
    nonnegative_flux: bool,
) -> Result<SparseFit> {
    let correlations = dict.correlate_all(residual, CorrelationPath::Exact)?;
    let (t, h, w) = dict.shape();
    if s == 0 {
        return Ok(SparseFit {
            support: Vec::new(),
            coeffs: Vec::new(),
            foreground: Cube::zeros(t, h, w),
            correlations,
            refit_fallback: false,
        });
    }

    let score = |c: f64| if nonnegative_flux { c.max(0.0) } else { c };
    let mut order: Vec<usize> = (0..correlations.len())
        .filter(|&i| score(correlations[i]) != 0.0)
        .collect();
    // Largest |score| first, lowest atom id on ties.
    order.sort_by(|&a, &b| {
        score(correlations[b])
            .abs()
            .total_cmp(&score(correlations[a]).abs())
            .then(a.cmp(&b))
    });
    order.truncate(s);
    let mut support = order;

    let mut refit_fallback = false;
    let mut coeffs;
    loop {
        match refit(dict, &support, &correlations) {
            Some(c) => coeffs = c,
            None => {
                refit_fallback = true;
                coeffs = support.iter().map(|&i| score(correlations[i])).collect();
                break;
            }
        }
        if !nonnegative_flux || coeffs.iter().all(|&c| c >= 0.0) {
            break;
        }
        support = support
            .iter()
            .zip(&coeffs)
            .filter(|(_, &c)| c >= 0.0)
            .map(|(&i, _)| i)
            .collect();
    }

    let foreground = dict.synthesize(&support, &coeffs);
    Ok(SparseFit {
        support,
        coeffs,
        foreground,
        correlations,
        refit_fallback,
    })
}

/// Least squares on the selected atoms via their Gram matrix. `None` when
/// the atoms are (numerically) collinear.
fn refit(dict: &TrajectoryDictionary, support: &[usize], correlations: &[f64]) -> Option<Vec<f64>> {
    let n = support.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = dict.atom(support[i]).dot_atom(dict.atom(support[j]));
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if !(min > GRAM_RCOND * max) {
        return None;
    }
    let rhs = DVector::from_iterator(n, support.iter().map(|&i| correlations[i]));
    let chol = gram.cholesky()?;
    Some(chol.solve(&rhs).iter().copied().collect())
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub background: Cube,
    pub foreground: Cube,
    pub support: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
    /// `‖Y − L − X‖_F` after each iteration.
    pub objective_trace: Vec<f64>,
    /// Iterations where the objective rose by more than the monotone slack.
    pub monotone_violations: usize,
    /// Iterations whose refit fell back to raw correlations.
    pub refit_fallbacks: usize,
}

fn validate(cube: &AdiCube, dict: &TrajectoryDictionary, cfg: &SolverConfig) -> Result<()> {
    let (t, h, w) = cube.shape();
    if dict.shape() != (t, h, w) {
        return Err(Error::invalid(format!(
            "dictionary shape {:?} does not match cube shape {:?}",
            dict.shape(),
            (t, h, w)
        )));
    }
    if cfg.rank > t.min(h * w) {
        return Err(Error::invalid(format!("rank {} exceeds min(T, H·W) = {}", cfg.rank, t.min(h * w))));
    }
    if cfg.sparsity > dict.len() {
        return Err(Error::invalid(format!(
            "sparsity {} exceeds the {} dictionary atoms",
            cfg.sparsity,
            dict.len()
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if !(cfg.rel_tol > 0.0 && cfg.rel_tol.is_finite()) {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    Ok(())
}

/// Runs the alternating projections from `X = 0` until the relative change
/// of `‖Y − L − X‖_F` drops below `rel_tol`, the fit is exact to
/// `1e-12·‖Y‖_F`, or `max_iters` is reached.
pub fn solve(cube: &AdiCube, dict: &TrajectoryDictionary, cfg: &SolverConfig) -> Result<Decomposition> {
    validate(cube, dict, cfg)?;
    let y = cube.cube();
    let (t, h, w) = y.shape();
    let y_mat = matricize(y);
    let y_norm = y.frobenius();

    let mut foreground = Cube::zeros(t, h, w);
    let mut background = Cube::zeros(t, h, w);
    let mut support = Vec::new();
    let mut coeffs = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut monotone_violations = 0;
    let mut refit_fallbacks = 0;

    for iter in 1..=cfg.max_iters {
        let l_mat = rank_project(&(&y_mat - matricize(&foreground)), cfg.rank)?;
        background = unmatricize(&l_mat, h, w);
        let fit = sparse_project(&y.sub(&background), dict, cfg.sparsity, cfg.nonnegative_flux)?;
        if fit.refit_fallback {
            refit_fallbacks += 1;
        }
        foreground = fit.foreground;
        support = fit.support;
        coeffs = fit.coeffs;

        let objective = y.sub(&background).sub(&foreground).frobenius();
        if !objective.is_finite() {
            return Err(Error::invalid("solver objective became non-finite"));
        }
        debug!("iteration {iter}: objective {objective:.6e}, support {support:?}");
        let prev = trace.last().copied();
        trace.push(objective);

        if let Some(prev) = prev {
            if objective > prev + MONOTONE_SLACK * y_norm {
                monotone_violations += 1;
                warn!(
                    "objective rose from {prev:.6e} to {objective:.6e} at iteration {iter} (nonnegative_flux={})",
                    cfg.nonnegative_flux
                );
            }
        }
        if objective <= EXACT_FIT_RATIO * y_norm {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if (prev - objective).abs() < cfg.rel_tol * prev {
                converged = true;
                break;
            }
        }
    }

    Ok(Decomposition {
        background,
        foreground,
        support,
        coeffs,
        iters_run: trace.len(),
        converged,
        objective_trace: trace,
        monotone_violations,
        refit_fallbacks,
    })
}

/// Score surfaces derived from a decomposition.
#[derive(Debug, Clone)]
pub struct DetectionMaps {
    /// `|coeff|` at each supported atom's reference pixel, zero elsewhere.
    pub sparse: Image,
    /// `⟨Y − L, atom⟩` at every atom's reference pixel, zero off the lattice.
    pub dense: Image,
    /// The dense values in atom-id order.
    pub dense_values: Vec<f64>,
}

/// Builds the sparse coefficient map and the dense correlation surface.
///
/// The dense surface keeps the sign of the correlation: planets have
/// positive flux, so large positive values are detections.
pub fn detection_map(cube: &AdiCube, dec: &Decomposition, dict: &TrajectoryDictionary) -> Result<DetectionMaps> {
    let (_, h, w) = dict.shape();
    let mut sparse = Image::zeros(h, w);
    for (&id, &c) in dec.support.iter().zip(&dec.coeffs) {
        let pos = dict.atom(id).ref_pos;
        sparse.set(pos.0.round() as usize, pos.1.round() as usize, c.abs());
    }
    let dense_values = dict.correlate_all(&cube.cube().sub(&dec.background), CorrelationPath::Exact)?;
    let dense = dict.scatter(&dense_values);
    Ok(DetectionMaps {
        sparse,
        dense,
        dense_values,
    })
}
