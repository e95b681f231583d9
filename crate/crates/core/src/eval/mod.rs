//! Synthetic data, companion injection and ROC evaluation.

pub mod benchmark;
pub mod roc;
pub mod synth;

pub use benchmark::{run_benchmark, score_trial, BenchmarkReport, BenchmarkSpec, Detector, DetectorParams, Scorer, TrialScore};
pub use roc::{roc, RocPoint, RocReport};
pub use synth::{inject, synth_cube, AngleSpec, InjectionSpec, SynthSpec};
