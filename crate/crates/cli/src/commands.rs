use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use lrss_core::apca::{annular_pca_residual, derotate_collapse, snr_map, ApcaConfig, Collapse};
use lrss_core::eval::benchmark::{run_benchmark, trial_seed, BenchmarkReport, BenchmarkSpec, Detector, DetectorParams};
use lrss_core::eval::synth::{inject, synth_cube, AngleSpec, InjectionSpec, SynthSpec};
use lrss_core::io::{container_paths, load_cube, load_psf, save_cube, save_image, save_roc, write_json};
use lrss_core::{build_dictionary, detection_map, make_gaussian_psf, solve, AdiCube, Error, Image, PsfTemplate, Result, SolverConfig};

use crate::manifest::{self, Inputs, ReplayArgs};

#[derive(Debug, Parser)]
#[command(name = "lrss", version, about = "Low-rank plus structured-sparse exoplanet detection in ADI cubes")]
pub struct Cli {
    /// Print a machine-readable JSON summary on stdout
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic cube (low-rank background plus noise), optionally with a companion
    Synth(SynthArgs),
    /// Add a companion to an existing cube
    Inject(InjectArgs),
    /// Low-rank plus sparse decomposition and detection maps
    Detect(DetectArgs),
    /// Annular PCA baseline: collapsed residual and S/N map
    Baseline(BaselineArgs),
    /// Injection/recovery ROC benchmark
    Roc(RocArgs),
    /// Rerun a subcommand from its manifest
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Inject(_) => "inject",
            Command::Detect(_) => "detect",
            Command::Baseline(_) => "baseline",
            Command::Roc(_) => "roc",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Command::Synth(a) => &a.out,
            Command::Inject(a) => &a.out,
            Command::Detect(a) => &a.out,
            Command::Baseline(a) => &a.out,
            Command::Roc(a) => &a.out,
            Command::Replay(a) => &a.manifest,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::Synth(a) => a.out = out,
            Command::Inject(a) => a.out = out,
            Command::Detect(a) => a.out = out,
            Command::Baseline(a) => a.out = out,
            Command::Roc(a) => a.out = out,
            Command::Replay(_) => {}
        }
    }

    /// Where the run manifest goes.
    pub fn manifest_path(&self) -> PathBuf {
        match self {
            Command::Roc(a) => a.out.join("manifest.json"),
            other => with_suffix(other.out(), ".manifest.json"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PsfArgs {
    /// PSF container stem (<stem>.bin + <stem>.json); overrides the Gaussian
    #[arg(long)]
    pub psf: Option<PathBuf>,
    /// Gaussian PSF full width at half maximum, pixels
    #[arg(long, default_value_t = 3.0)]
    pub fwhm: f64,
    /// Gaussian PSF stamp size (odd)
    #[arg(long, default_value_t = 7)]
    pub psf_size: usize,
}

impl PsfArgs {
    fn load(&self, inputs: &mut Inputs) -> Result<PsfTemplate> {
        match &self.psf {
            Some(stem) => {
                let (bin, json) = container_paths(stem);
                inputs.add(&bin)?;
                inputs.add(&json)?;
                load_psf(bin, json)
            }
            None => make_gaussian_psf(self.psf_size, self.fwhm),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Number of frames
    #[arg(long)]
    pub t: usize,
    /// Frame height
    #[arg(long)]
    pub h: usize,
    /// Frame width
    #[arg(long)]
    pub w: usize,
    /// Parallactic angles: `start:end` (degrees, evenly spaced) or `@file.csv` (one value per line)
    #[arg(long)]
    pub angles: String,
    /// Background rank
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// Background factor scale
    #[arg(long, default_value_t = 1.0)]
    pub bg_scale: f64,
    /// White noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Companion row in frame 0
    #[arg(long, requires_all = ["inject_col", "inject_flux"])]
    pub inject_row: Option<f64>,
    /// Companion column in frame 0
    #[arg(long, requires_all = ["inject_row", "inject_flux"])]
    pub inject_col: Option<f64>,
    /// Companion flux, PSF-peak units
    #[arg(long, requires_all = ["inject_row", "inject_col"])]
    pub inject_flux: Option<f64>,
    #[command(flatten)]
    pub psf: PsfArgs,
    /// Output stem
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InjectArgs {
    /// Input cube stem
    #[arg(long)]
    pub cube: PathBuf,
    /// Companion row in frame 0
    #[arg(long)]
    pub row: f64,
    /// Companion column in frame 0
    #[arg(long)]
    pub col: f64,
    /// Companion flux, PSF-peak units
    #[arg(long)]
    pub flux: f64,
    #[command(flatten)]
    pub psf: PsfArgs,
    /// Output stem
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    /// Input cube stem
    #[arg(long)]
    pub cube: PathBuf,
    /// Background rank
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// Number of trajectory atoms kept
    #[arg(long, default_value_t = 1)]
    pub sparsity: usize,
    /// Inner radius of the searched annulus, pixels
    #[arg(long)]
    pub rin: f64,
    /// Outer radius of the searched annulus, pixels
    #[arg(long)]
    pub rout: f64,
    /// Lattice stride, pixels
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Stop when the relative change of the estimate falls below this
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    /// Allow negative companion fluxes
    #[arg(long)]
    pub allow_negative: bool,
    /// Also save the background and foreground cubes
    #[arg(long)]
    pub save_components: bool,
    #[command(flatten)]
    pub psf: PsfArgs,
    /// Output stem
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollapseArg {
    Median,
    Mean,
}

impl From<CollapseArg> for Collapse {
    fn from(c: CollapseArg) -> Self {
        match c {
            CollapseArg::Median => Collapse::Median,
            CollapseArg::Mean => Collapse::Mean,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    /// Input cube stem
    #[arg(long)]
    pub cube: PathBuf,
    /// Principal components removed per annulus
    #[arg(long, default_value_t = 2)]
    pub ncomp: usize,
    /// Annulus width, pixels
    #[arg(long, default_value_t = 6.0)]
    pub annulus_width: f64,
    /// Inner radius of the processed region, pixels
    #[arg(long)]
    pub rin: f64,
    /// Outer radius of the processed region, pixels
    #[arg(long)]
    pub rout: f64,
    #[arg(long, value_enum, default_value_t = CollapseArg::Median)]
    pub collapse: CollapseArg,
    /// Photometric aperture diameter for the S/N map, pixels
    #[arg(long, default_value_t = 3.0)]
    pub fwhm: f64,
    /// Output stem
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorArg {
    Lrss,
    Apca,
    Both,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RocArgs {
    #[arg(long, value_enum, default_value_t = DetectorArg::Both)]
    pub detector: DetectorArg,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub t: usize,
    #[arg(long, default_value_t = 48)]
    pub h: usize,
    #[arg(long, default_value_t = 48)]
    pub w: usize,
    /// Parallactic angles: `start:end` or `@file.csv`
    #[arg(long, default_value = "0:120")]
    pub angles: String,
    /// Background rank of the synthetic cubes
    #[arg(long, default_value_t = 2)]
    pub bg_rank: usize,
    #[arg(long, default_value_t = 2.0)]
    pub bg_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Injected trials per flux level
    #[arg(long, default_value_t = 50)]
    pub n_pos: usize,
    /// Blank trials, shared by all flux levels
    #[arg(long, default_value_t = 50)]
    pub n_neg: usize,
    /// Flux levels as multiples of noise / sqrt(T)
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    pub flux: Vec<f64>,
    /// Inner radius of the searched annulus
    #[arg(long, default_value_t = 6.0)]
    pub rin: f64,
    /// Outer radius of the searched annulus
    #[arg(long, default_value_t = 18.0)]
    pub rout: f64,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, default_value_t = 3.0)]
    pub fwhm: f64,
    #[arg(long, default_value_t = 7)]
    pub psf_size: usize,
    /// LRSS background rank
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// LRSS sparsity
    #[arg(long, default_value_t = 1)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    /// Annular PCA components
    #[arg(long, default_value_t = 2)]
    pub ncomp: usize,
    /// Annular PCA annulus width
    #[arg(long, default_value_t = 6.0)]
    pub annulus_width: f64,
    /// Annular PCA frame combination (the synthetic noise is Gaussian, so mean by default)
    #[arg(long, value_enum, default_value_t = CollapseArg::Mean)]
    pub collapse: CollapseArg,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command reports: human lines and a JSON object.
pub struct Summary {
    pub lines: Vec<String>,
    pub json: Value,
}

pub fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn parse_angles(spec: &str, inputs: &mut Inputs) -> Result<AngleSpec> {
    if let Some(file) = spec.strip_prefix('@') {
        let path = Path::new(file);
        inputs.add(path)?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut angles = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: not a number: {line:?}", i + 1),
            })?;
            angles.push(v);
        }
        return Ok(AngleSpec::List(angles));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b] => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(start_deg), Ok(end_deg)) => Ok(AngleSpec::Span { start_deg, end_deg }),
            _ => Err(Error::invalid(format!("--angles: cannot parse {spec:?} as start:end"))),
        },
        _ => Err(Error::invalid(format!("--angles expects start:end or @file.csv, got {spec:?}"))),
    }
}

fn load_cube_stem(stem: &Path, inputs: &mut Inputs) -> Result<AdiCube> {
    let (bin, json) = container_paths(stem);
    inputs.add(&bin)?;
    inputs.add(&json)?;
    load_cube(bin, json)
}

fn save_cube_stem(cube: &AdiCube, stem: &Path, outputs: &mut Vec<PathBuf>) -> Result<()> {
    let (bin, json) = container_paths(stem);
    save_cube(cube, &bin, &json)?;
    outputs.push(bin);
    outputs.push(json);
    Ok(())
}

fn save_image_stem(img: &Image, center: (f64, f64), stem: &Path, outputs: &mut Vec<PathBuf>) -> Result<()> {
    let (bin, json) = container_paths(stem);
    save_image(img, center, &bin, &json)?;
    outputs.push(bin);
    outputs.push(json);
    Ok(())
}

fn argmax(img: &Image) -> (usize, usize, f64) {
    let (h, w) = img.shape();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for r in 0..h {
        for c in 0..w {
            let v = img.get(r, c);
            if v > best.2 {
                best = (r, c, v);
            }
        }
    }
    best
}

/// Result of running a command, before the manifest is written.
pub struct Outcome {
    pub summary: Summary,
    pub seeds: Vec<u64>,
    pub resolved: Value,
    pub outputs: Vec<PathBuf>,
}

pub fn run(cmd: Command) -> Result<Summary> {
    let start = std::time::Instant::now();
    let mut inputs = Inputs::default();
    let outcome = match &cmd {
        Command::Synth(a) => cmd_synth(a, &mut inputs)?,
        Command::Inject(a) => cmd_inject(a, &mut inputs)?,
        Command::Detect(a) => cmd_detect(a, &mut inputs)?,
        Command::Baseline(a) => cmd_baseline(a, &mut inputs)?,
        Command::Roc(a) => cmd_roc(a, &mut inputs)?,
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    };
    manifest::write(&cmd, inputs, outcome, start.elapsed().as_secs_f64())
}

fn cmd_synth(a: &SynthArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let angles = parse_angles(&a.angles, inputs)?;
    let spec = SynthSpec {
        t: a.t,
        h: a.h,
        w: a.w,
        angles,
        bg_rank: a.rank,
        bg_scale: a.bg_scale,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let mut cube = synth_cube(&spec)?;
    let mut injection = Value::Null;
    if let (Some(row), Some(col), Some(flux)) = (a.inject_row, a.inject_col, a.inject_flux) {
        let psf = a.psf.load(inputs)?;
        cube = inject(&cube, &InjectionSpec { ref_pos: (row, col), flux, psf })?;
        injection = json!({ "ref_pos": [row, col], "flux": flux });
    }
    let mut outputs = Vec::new();
    save_cube_stem(&cube, &a.out, &mut outputs)?;
    let (t, h, w) = cube.shape();
    Ok(Outcome {
        summary: Summary {
            lines: vec![format!("wrote {}x{}x{} cube to {}.bin/.json", t, h, w, a.out.display())],
            json: json!({ "shape": [t, h, w], "frobenius": cube.cube().frobenius(), "injection": injection }),
        },
        seeds: vec![a.seed],
        resolved: json!({ "synth": spec, "angles_deg": cube.angles_deg(), "center": cube.center() }),
        outputs,
    })
}

fn cmd_inject(a: &InjectArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let cube = load_cube_stem(&a.cube, inputs)?;
    let psf = a.psf.load(inputs)?;
    let out = inject(
        &cube,
        &InjectionSpec {
            ref_pos: (a.row, a.col),
            flux: a.flux,
            psf,
        },
    )?;
    let mut outputs = Vec::new();
    save_cube_stem(&out, &a.out, &mut outputs)?;
    Ok(Outcome {
        summary: Summary {
            lines: vec![format!(
                "injected flux {} at ({}, {}) into {}.bin/.json",
                a.flux,
                a.row,
                a.col,
                a.out.display()
            )],
            json: json!({ "ref_pos": [a.row, a.col], "flux": a.flux }),
        },
        seeds: vec![],
        resolved: json!({ "angles_deg": out.angles_deg(), "center": out.center() }),
        outputs,
    })
}

fn cmd_detect(a: &DetectArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let cfg = SolverConfig {
        rank: a.rank,
        sparsity: a.sparsity,
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        nonnegative_flux: !a.allow_negative,
    };
    let cube = load_cube_stem(&a.cube, inputs)?;
    let psf = a.psf.load(inputs)?;
    let dict = build_dictionary(cube.shape(), cube.center(), cube.angles_deg(), &psf, a.rin, a.rout, a.step)?;
    let dec = solve(&cube, &dict, &cfg)?;
    let maps = detection_map(&cube, &dec, &dict)?;

    let mut outputs = Vec::new();
    save_image_stem(&maps.sparse, cube.center(), &with_suffix(&a.out, "_sparse"), &mut outputs)?;
    save_image_stem(&maps.dense, cube.center(), &with_suffix(&a.out, "_dense"), &mut outputs)?;
    if a.save_components {
        save_cube_stem(&cube.with_data(dec.background.clone())?, &with_suffix(&a.out, "_background"), &mut outputs)?;
        save_cube_stem(&cube.with_data(dec.foreground.clone())?, &with_suffix(&a.out, "_foreground"), &mut outputs)?;
    }
    let support: Vec<Value> = dec
        .support
        .iter()
        .zip(&dec.coeffs)
        .map(|(&id, &c)| json!({ "atom_id": id, "ref_pos": dict.atom(id).ref_pos, "coeff": c }))
        .collect();
    let (pr, pc, pv) = argmax(&maps.dense);
    let report = json!({
        "solver": cfg,
        "dictionary": { "r_in": a.rin, "r_out": a.rout, "step": a.step, "n_atoms": dict.len(), "dropped": dict.dropped() },
        "support": support,
        "iters_run": dec.iters_run,
        "converged": dec.converged,
        "objective_trace": dec.objective_trace,
        "monotone_violations": dec.monotone_violations,
        "refit_fallbacks": dec.refit_fallbacks,
        "dense_peak": { "pos": [pr, pc], "value": pv },
    });
    let report_path = with_suffix(&a.out, ".report.json");
    write_json(&report_path, &report)?;
    outputs.push(report_path);

    let mut lines = vec![format!(
        "{} atoms, {} iterations ({})",
        dict.len(),
        dec.iters_run,
        if dec.converged { "converged" } else { "not converged" }
    )];
    for (&id, &c) in dec.support.iter().zip(&dec.coeffs) {
        let (r, col) = dict.atom(id).ref_pos;
        lines.push(format!("atom {id} at ({r}, {col}): coeff {c:.6}"));
    }
    lines.push(format!("dense peak {pv:.6} at ({pr}, {pc})"));
    Ok(Outcome {
        summary: Summary { lines, json: report },
        seeds: vec![],
        resolved: json!({ "solver": cfg, "psf_size": psf.size(), "center": cube.center() }),
        outputs,
    })
}

fn cmd_baseline(a: &BaselineArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let cfg = ApcaConfig {
        n_components: a.ncomp,
        annulus_width: a.annulus_width,
        r_in: a.rin,
        r_out: a.rout,
        collapse: a.collapse.into(),
    };
    let cube = load_cube_stem(&a.cube, inputs)?;
    let residual = annular_pca_residual(&cube, &cfg)?;
    let collapsed = derotate_collapse(&residual, cube.angles_deg(), cube.center(), cfg.collapse)?;
    let snr = snr_map(&collapsed, a.fwhm, cube.center())?;

    let mut outputs = Vec::new();
    save_image_stem(&collapsed, cube.center(), &with_suffix(&a.out, "_collapsed"), &mut outputs)?;
    save_image_stem(&snr, cube.center(), &with_suffix(&a.out, "_snr"), &mut outputs)?;
    let (pr, pc, pv) = argmax(&snr);
    let report = json!({ "apca": cfg, "fwhm": a.fwhm, "snr_peak": { "pos": [pr, pc], "value": pv } });
    let report_path = with_suffix(&a.out, ".report.json");
    write_json(&report_path, &report)?;
    outputs.push(report_path);
    Ok(Outcome {
        summary: Summary {
            lines: vec![format!("S/N peak {pv:.4} at ({pr}, {pc})")],
            json: report,
        },
        seeds: vec![],
        resolved: json!({ "apca": cfg, "center": cube.center() }),
        outputs,
    })
}

fn flux_tag(flux: f64) -> String {
    format!("{flux}")
}

fn cmd_roc(a: &RocArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let angles = parse_angles(&a.angles, inputs)?;
    let detectors = match a.detector {
        DetectorArg::Lrss => vec![Detector::Lrss],
        DetectorArg::Apca => vec![Detector::Apca],
        DetectorArg::Both => vec![Detector::Lrss, Detector::Apca],
    };
    let solver = SolverConfig {
        rank: a.rank,
        sparsity: a.sparsity,
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        nonnegative_flux: true,
    };
    let spec = BenchmarkSpec {
        t: a.t,
        h: a.h,
        w: a.w,
        angles,
        bg_rank: a.bg_rank,
        bg_scale: a.bg_scale,
        noise_sigma: a.noise,
        n_pos: a.n_pos,
        n_neg: a.n_neg,
        flux_grid: a.flux.clone(),
        seed: a.seed,
        detectors,
        params: DetectorParams {
            fwhm: a.fwhm,
            psf_size: a.psf_size,
            r_in: a.rin,
            r_out: a.rout,
            step: a.step,
            solver,
            apca_components: a.ncomp,
            apca_annulus_width: a.annulus_width,
            apca_collapse: a.collapse.into(),
        },
    };
    let report = run_benchmark(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let outputs = write_benchmark(&report, &a.out)?;

    let mut lines = vec![
        format!(
            "{} positives per flux, {} negatives, {} candidate positions, sigma_eff {:.6}",
            spec.n_pos, spec.n_neg, report.n_atoms, report.sigma_eff
        ),
        format!("{:>8}  {:>8}  {:>8}  flag", "flux", "lrss", "apca"),
    ];
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for row in &report.table {
        lines.push(format!(
            "{:>8}  {:>8}  {:>8}  {}",
            row.flux,
            fmt(row.auc_lrss),
            fmt(row.auc_apca),
            if row.lrss_ahead { "lrss>=apca+0.03" } else { "" }
        ));
    }
    Ok(Outcome {
        summary: Summary {
            lines,
            json: json!({ "sigma_eff": report.sigma_eff, "n_atoms": report.n_atoms, "table": report.table }),
        },
        seeds: (0..spec.n_pos + spec.n_neg).map(|i| trial_seed(spec.seed, i)).collect(),
        resolved: json!({ "benchmark": spec }),
        outputs,
    })
}

/// Writes per-(detector, flux) ROC files, the score table, the AUC table and `benchmark.json`.
pub fn write_benchmark(report: &BenchmarkReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    for r in &report.rocs {
        let stem = dir.join(format!("roc_{}_flux{}", r.detector.name(), flux_tag(r.flux)));
        let (csv, json) = (with_suffix(&stem, ".csv"), with_suffix(&stem, ".json"));
        save_roc(&r.roc, &csv, &json)?;
        outputs.push(csv);
        outputs.push(json);
    }

    let mut scores = String::from("detector,trial,positive,flux,ref_row,ref_col,score,score_at_truth\n");
    for rec in &report.records {
        let (rr, rc) = rec.ref_pos.map_or((String::new(), String::new()), |(r, c)| (r.to_string(), c.to_string()));
        let at = rec.score_at_truth.map_or(String::new(), |v| v.to_string());
        scores.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            rec.detector.name(),
            rec.trial,
            rec.positive as u8,
            rec.flux,
            rr,
            rc,
            rec.score,
            at
        ));
    }
    let path = dir.join("scores.csv");
    fs::write(&path, scores).map_err(|e| Error::io(&path, e))?;
    outputs.push(path);

    let mut table = String::from("flux,flux_abs,auc_lrss,auc_apca,lrss_ahead\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in &report.table {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            row.flux,
            row.flux_abs,
            opt(row.auc_lrss),
            opt(row.auc_apca),
            row.lrss_ahead as u8
        ));
    }
    let path = dir.join("auc_table.csv");
    fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
    outputs.push(path);

    let path = dir.join("benchmark.json");
    write_json(&path, report)?;
    outputs.push(path);
    Ok(outputs)
}
