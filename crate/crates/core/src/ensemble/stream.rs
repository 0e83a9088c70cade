//! Rolling engine: grid cells arrive in order, are scored against models
//! fitted on the reference database, and the models are refit on a fixed
//! schedule.

use std::collections::VecDeque;

use super::config::Config;
use super::detectors::{Bank, Cell, DetectorKind, Input, KindMask, Timeline};
use super::vote::{vote_point, DetectorCategory, PointReport};
use super::{decorate, missing_categories};
use crate::error::{Error, Result};

/// Outcome of one [`StreamEngine::advance`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Advance {
    /// Cells that raised their first alarm during this step, in time
    /// order.
    pub alarms: Vec<PointReport>,
    /// Gap fills and retrain problems.
    pub notices: Vec<String>,
    pub retrained: bool,
    /// Cells no later window can touch, with their final votes.
    pub finalized: Vec<PointReport>,
}

pub struct StreamEngine {
    cfg: Config,
    account: String,
    db: VecDeque<Cell>,
    masks: VecDeque<KindMask>,
    alarmed: VecDeque<bool>,
    /// Absolute index of `db[0]`.
    base: usize,
    /// Absolute index of the next cell to finalize.
    next_final: usize,
    bank: Option<Bank>,
    /// Per-unit predictive histories aligned with the database samples.
    histories: Vec<Vec<f64>>,
    last_retrain: Option<i64>,
    retrain_count: usize,
    capacity: usize,
}

impl std::fmt::Debug for StreamEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamEngine")
            .field("cells", &self.db.len())
            .field("last_retrain", &self.last_retrain)
            .field("retrain_count", &self.retrain_count)
            .finish()
    }
}

impl StreamEngine {
    /// An engine with an empty database and no models.
    pub fn new(cfg: Config, account: impl Into<String>) -> Result<Self> {
        cfg.validate()?;
        let capacity = (cfg.database / cfg.grid) as usize;
        let widest = cfg.window_cells().max(cfg.reduction.ae_window);
        if capacity < widest {
            return Err(Error::Config(format!(
                "database holds {capacity} cells, fewer than the widest window ({widest})"
            )));
        }
        Ok(Self {
            cfg,
            account: account.into(),
            db: VecDeque::with_capacity(capacity + 1),
            masks: VecDeque::new(),
            alarmed: VecDeque::new(),
            base: 0,
            next_final: 0,
            bank: None,
            histories: Vec::new(),
            last_retrain: None,
            retrain_count: 0,
            capacity,
        })
    }

    /// Loads `cells` as the reference database (keeping the most recent
    /// `database` seconds) and fits the models on it.
    pub fn bootstrap(cfg: Config, account: impl Into<String>, cells: &[Cell]) -> Result<Self> {
        let mut e = Self::new(cfg, account)?;
        e.append(cells)?;
        e.evict(&mut Vec::new());
        e.next_final = e.base + e.db.len();
        e.retrain()?;
        Ok(e)
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn bank(&self) -> Option<&Bank> {
        self.bank.as_ref()
    }

    pub fn database(&self) -> impl Iterator<Item = &Cell> {
        self.db.iter()
    }

    pub fn database_len(&self) -> usize {
        self.db.len()
    }

    pub fn last_retrain(&self) -> Option<i64> {
        self.last_retrain
    }

    pub fn retrain_count(&self) -> usize {
        self.retrain_count
    }

    /// End of the newest cell.
    fn now(&self) -> Option<i64> {
        self.db.back().map(|c| c.start + self.cfg.grid)
    }

    /// Refits every detector on the current database.
    pub fn retrain(&mut self) -> Result<()> {
        let now = self.now().ok_or_else(|| Error::invalid("cannot retrain on an empty database"))?;
        let tl = Timeline::new(self.db.iter());
        let bank = Bank::fit(&tl, &self.cfg)?;
        if bank.units.is_empty() {
            let list: Vec<String> = bank.errors.iter().map(|(id, e)| format!("{id}: {e}")).collect();
            return Err(Error::Fit(format!("no detector could be fitted: {}", list.join("; "))));
        }
        self.histories = bank.raw_histories(&tl);
        self.bank = Some(bank);
        self.last_retrain = Some(now);
        self.retrain_count += 1;
        Ok(())
    }

    /// Appends cells, zero-filling gaps; returns gap notices.
    fn append(&mut self, cells: &[Cell]) -> Result<Vec<String>> {
        let grid = self.cfg.grid;
        let mut notices = Vec::new();
        for cell in cells {
            if cell.start.rem_euclid(grid) != 0 {
                return Err(Error::invalid(format!("cell at {} is not aligned to the {grid}s grid", cell.start)));
            }
            if cell.samples.iter().any(|s| s.ts < cell.start || s.ts >= cell.start + grid) {
                return Err(Error::invalid(format!("cell at {} holds samples outside it", cell.start)));
            }
            if let Some(expected) = self.now() {
                if cell.start < expected {
                    return Err(Error::invalid(format!(
                        "cell at {} is not after the newest cell (expected {expected})",
                        cell.start
                    )));
                }
                if cell.start > expected {
                    let missing = (cell.start - expected) / grid;
                    notices.push(format!("gap of {missing} cells before {} zero-filled", cell.start));
                    for i in 0..missing {
                        self.push(Cell::empty(expected + i * grid));
                    }
                }
            }
            self.push(cell.clone());
        }
        Ok(notices)
    }

    fn push(&mut self, cell: Cell) {
        self.db.push_back(cell);
        self.masks.push_back(0);
        self.alarmed.push_back(false);
    }

    fn point(&self, c: usize) -> PointReport {
        let bank = self.bank.as_ref().expect("models fitted");
        let kinds = bank.voting_kinds();
        let flagged: Vec<(&str, DetectorCategory)> = kinds
            .iter()
            .filter(|k| self.masks[c] & k.bit() != 0)
            .map(|k: &DetectorKind| (k.id(), k.category()))
            .collect();
        let mut p = vote_point(self.db[c].start, &flagged, &bank.voters(), &self.cfg.alarm);
        decorate(&mut p, &self.db[c].sums(), &self.cfg, &self.account);
        p
    }

    fn finalize_through(&mut self, last_abs: usize, out: &mut Vec<PointReport>) {
        while self.next_final <= last_abs && self.next_final < self.base + self.db.len() {
            out.push(self.point(self.next_final - self.base));
            self.next_final += 1;
        }
    }

    fn evict(&mut self, finalized: &mut Vec<PointReport>) {
        let mut dropped = 0;
        while self.db.len() > self.capacity {
            if self.next_final == self.base {
                self.finalize_through(self.base, finalized);
            }
            dropped += self.db.pop_front().map_or(0, |c| c.merged().len());
            self.masks.pop_front();
            self.alarmed.pop_front();
            self.base += 1;
        }
        for h in self.histories.iter_mut().filter(|h| !h.is_empty()) {
            h.drain(..dropped.min(h.len()));
        }
        self.next_final = self.next_final.max(self.base);
    }

    /// Scores new cells with the current models, then retrains when the
    /// schedule is due.
    pub fn advance(&mut self, cells: &[Cell]) -> Result<Advance> {
        let mut out = Advance::default();
        let width = self
            .bank
            .as_ref()
            .map(Bank::max_width)
            .ok_or_else(|| Error::invalid("engine has no fitted models; bootstrap it first"))?;
        if cells.is_empty() {
            return Ok(out);
        }
        let from = self.db.len();
        out.notices = self.append(cells)?;
        let tl = Timeline::new(self.db.iter());
        let bank = self.bank.as_ref().expect("checked above");
        for (u, h) in bank.units.iter().zip(self.histories.iter_mut()) {
            if let Input::Series(f) = u.input {
                h.extend(tl.samples[h.len()..].iter().map(|s| s.features[f.index()]));
            }
        }
        let fresh = bank.score(&tl, from, from, &mut self.histories);
        let lo = from.saturating_sub(width - 1).max(self.next_final - self.base);
        for c in lo..self.db.len() {
            self.masks[c] |= fresh[c];
        }
        for c in lo..self.db.len() {
            if !self.alarmed[c] {
                let p = self.point(c);
                if p.alarm {
                    self.alarmed[c] = true;
                    out.alarms.push(p);
                }
            }
        }
        let newest = self.base + self.db.len() - 1;
        if newest + 1 >= width {
            self.finalize_through(newest + 1 - width, &mut out.finalized);
        }
        self.evict(&mut out.finalized);

        let now = self.now().expect("non-empty");
        if now - self.last_retrain.unwrap_or(now) >= self.cfg.retrain {
            match self.retrain() {
                Ok(()) => {
                    out.retrained = true;
                    let bank = self.bank.as_ref().expect("just fitted");
                    out.notices.extend(missing_categories(&self.cfg, &bank.voters()));
                    out.notices.extend(bank.errors.iter().map(|(id, e)| format!("{id} failed to refit: {e}")));
                }
                Err(e) => out.notices.push(format!("retrain failed, keeping previous models: {e}")),
            }
        }
        Ok(out)
    }

    /// Final votes for every cell not yet finalized.
    pub fn flush(&mut self) -> Vec<PointReport> {
        let mut out = Vec::new();
        if !self.db.is_empty() && self.bank.is_some() {
            self.finalize_through(self.base + self.db.len() - 1, &mut out);
        }
        out
    }
}
