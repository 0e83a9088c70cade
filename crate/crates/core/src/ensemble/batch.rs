//! Batch detection over a whole transaction history.

use super::config::Config;
use super::detectors::{cells_from_transactions, Bank, Cell, Timeline};
use super::vote::{category_vote_with, DetectorVerdict, EnsembleReport};
use super::{decorate, missing_categories};
use crate::error::{Error, Result};
use crate::ingest::{infer_account, Transaction};
use crate::series::train_len;

pub fn run_batch(txs: &[Transaction], cfg: &Config) -> Result<EnsembleReport> {
    cfg.validate()?;
    let cells = cells_from_transactions(txs, cfg.grid)?;
    let account = if cfg.account.is_empty() {
        infer_account(txs)
    } else {
        cfg.account.clone()
    };
    run_batch_cells(&cells, cfg, &account)
}

/// Fits the bank on the chronological training prefix of `cells`;
/// returns it with the prefix length.
pub fn fit_batch(cells: &[Cell], cfg: &Config) -> Result<(Bank, usize)> {
    let train = train_len(cells.len(), cfg.train_ratio)?;
    if train == 0 {
        return Err(Error::invalid("too few cells for a training split"));
    }
    Ok((Bank::fit(&Timeline::new(&cells[..train]), cfg)?, train))
}

/// Predictive units score the test region only; the unsupervised banks
/// score every cell.
pub fn run_batch_cells(cells: &[Cell], cfg: &Config, account: &str) -> Result<EnsembleReport> {
    cfg.validate()?;
    let (bank, train) = fit_batch(cells, cfg)?;
    let kinds = bank.voting_kinds();
    if kinds.is_empty() {
        let list: Vec<String> = bank.errors.iter().map(|(id, e)| format!("{id}: {e}")).collect();
        return Err(Error::Fit(format!("no detector could be fitted: {}", list.join("; "))));
    }
    let tl = Timeline::new(cells);
    let mut histories = bank.raw_histories(&tl);
    let masks = bank.score(&tl, train, 0, &mut histories);
    let verdicts: Vec<DetectorVerdict> = kinds
        .iter()
        .map(|k| DetectorVerdict {
            detector_id: k.id().to_string(),
            category: k.category(),
            flags: masks.iter().map(|m| m & k.bit() != 0).collect(),
            scores: None,
        })
        .collect();
    let mut report = category_vote_with(&tl.starts, &verdicts, &cfg.alarm)?;
    for (c, p) in report.points.iter_mut().enumerate() {
        decorate(p, &tl.sums[c], cfg, account);
    }
    report.warnings = missing_categories(cfg, &bank.voters());
    report.detector_errors = bank.errors;
    Ok(report)
}
