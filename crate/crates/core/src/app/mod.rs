//! Front-end plumbing: labeled synthetic histories, alarm scoring against
//! labels, and plot-ready CSV output.

pub mod eval;
pub mod plot;
pub mod synth;

pub use eval::{evaluate, EvalMetrics};
pub use plot::{emit_plot_data, report_series};
pub use synth::{read_labels, synth_generate, write_labels, Injection, InjectionKind, Label, SynthConfig};
