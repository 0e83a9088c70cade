//! Detector registry, per-category voting, batch runs and the rolling
//! streaming engine.

pub mod batch;
pub mod config;
pub mod detectors;
pub mod report;
pub mod stream;
pub mod vote;

pub use batch::{fit_batch, run_batch, run_batch_cells};
pub use config::{Config, GammaChoice, Mode, OrderSelection};
pub use detectors::{cells_from_transactions, plan, Bank, Cell, DetectorKind, Input, KindMask, Sample, Timeline, Unit};
pub use report::{read_jsonl, write_jsonl, write_jsonl_to};
pub use stream::{Advance, StreamEngine};
pub use vote::{
    category_vote, category_vote_with, vote_point, AlarmRule, CategoryVote, CategoryVotes, DetectorCategory,
    DetectorVerdict, EnsembleReport, PointReport,
};

use std::collections::BTreeMap;

/// Adds the account and the cell sums of the enabled features.
fn decorate(point: &mut PointReport, sums: &[f64; 3], cfg: &Config, account: &str) {
    point.account = account.to_string();
    point.values = cfg
        .features
        .iter()
        .map(|f| (f.name().to_string(), sums[f.index()]))
        .collect::<BTreeMap<_, _>>();
}

/// Warnings for configured categories left without a voter.
fn missing_categories(cfg: &Config, voters: &[usize; 3]) -> Vec<String> {
    DetectorCategory::ALL
        .into_iter()
        .filter(|c| cfg.detectors.iter().any(|k| k.category() == *c) && voters[c.index()] == 0)
        .map(|c| format!("category {c} has no fitted detector and was skipped"))
        .collect()
}
