//! Detector registry, grid cells and the fitted detector bank.

use std::fmt;
use std::str::FromStr;

use super::config::{Config, GammaChoice, OrderSelection};
use super::vote::DetectorCategory;
use crate::clustering::{estimate_eps_quantile, kmeans_fit_with, select_k, DbscanModel, DbscanParams, KMeansModel};
use crate::error::{Error, Result};
use crate::ingest::{FeatureKind, Transaction};
use crate::kernels::{default_gamma, one_class_fit, power_grid, select_gamma_cv, KernelSpec, OneClassModel};
use crate::par;
use crate::predictive::{
    cart_forecast, exceeds, grid_search, holdout_rms, select_order_aic, ArimaModel, ArimaScorer, KnnForecaster,
    KrrForecaster, ResidualModel, SeasonalSearch, StlScorer,
};
use crate::reduction::{ae_train, iforest_fit, pca_fit, AutoencoderModel, IsolationForest, PcaModel, ThresholdRule};
use crate::series::{cell_start, estimate_period, rms, PeriodMethod, Standardizer};

/// One transaction's features in analysis units, indexed by
/// [`FeatureKind::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub ts: i64,
    pub features: [f64; 3],
}

impl Sample {
    pub fn from_transaction(tx: &Transaction) -> Self {
        let mut features = [0.0; 3];
        for f in FeatureKind::ALL {
            features[f.index()] = f.extract(tx);
        }
        Self {
            ts: tx.timestamp,
            features,
        }
    }
}

/// Transactions falling in `[start, start + grid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub start: i64,
    pub samples: Vec<Sample>,
}

impl Cell {
    pub fn empty(start: i64) -> Self {
        Self {
            start,
            samples: Vec::new(),
        }
    }

    /// Per-feature sums; zero for an empty cell.
    pub fn sums(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for x in &self.samples {
            for (a, v) in s.iter_mut().zip(x.features) {
                *a += v;
            }
        }
        s
    }

    /// Samples with equal timestamps summed.
    pub fn merged(&self) -> Vec<Sample> {
        let mut out: Vec<Sample> = Vec::with_capacity(self.samples.len());
        for x in &self.samples {
            match out.last_mut() {
                Some(last) if last.ts == x.ts => {
                    for (a, v) in last.features.iter_mut().zip(x.features) {
                        *a += v;
                    }
                }
                _ => out.push(*x),
            }
        }
        out
    }
}

/// Bins transactions onto a `step`-second grid from the first to the last
/// occupied cell; empty cells are kept.
pub fn cells_from_transactions(txs: &[Transaction], step: i64) -> Result<Vec<Cell>> {
    if step <= 0 {
        return Err(Error::invalid("grid step must be positive"));
    }
    if txs.is_empty() {
        return Err(Error::invalid("no transactions"));
    }
    let mut samples: Vec<Sample> = txs.iter().map(Sample::from_transaction).collect();
    samples.sort_by_key(|s| s.ts);
    let t0 = cell_start(samples[0].ts, step);
    let n = ((cell_start(samples[samples.len() - 1].ts, step) - t0) / step) as usize + 1;
    let mut cells: Vec<Cell> = (0..n).map(|i| Cell::empty(t0 + i as i64 * step)).collect();
    for s in samples {
        cells[((s.ts - t0) / step) as usize].samples.push(s);
    }
    Ok(cells)
}

/// Flattened view of consecutive cells: merged samples and cell sums.
#[derive(Debug, Clone, Default)]
pub struct Timeline {
    pub starts: Vec<i64>,
    pub sums: Vec<[f64; 3]>,
    pub samples: Vec<Sample>,
    /// `samples[offsets[c]..offsets[c + 1]]` belong to cell `c`.
    pub offsets: Vec<usize>,
}

impl Timeline {
    pub fn new<'a>(cells: impl IntoIterator<Item = &'a Cell>) -> Self {
        let mut tl = Timeline {
            offsets: vec![0],
            ..Default::default()
        };
        for c in cells {
            tl.starts.push(c.start);
            tl.sums.push(c.sums());
            tl.samples.extend(c.merged());
            tl.offsets.push(tl.samples.len());
        }
        tl
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// Merged sample values of one feature.
    pub fn sample_values(&self, f: FeatureKind) -> Vec<f64> {
        self.samples.iter().map(|s| s.features[f.index()]).collect()
    }

    /// Per-cell sums of one feature.
    pub fn cell_values(&self, f: FeatureKind) -> Vec<f64> {
        self.sums.iter().map(|s| s[f.index()]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Arima,
    Sarima,
    Stl,
    Knn,
    Cart,
    Krr,
    Pca,
    IForest,
    Autoencoder,
    KMeans,
    Dbscan,
    Ocsvm,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 12] = [
        DetectorKind::Arima,
        DetectorKind::Sarima,
        DetectorKind::Stl,
        DetectorKind::Knn,
        DetectorKind::Cart,
        DetectorKind::Krr,
        DetectorKind::Pca,
        DetectorKind::IForest,
        DetectorKind::Autoencoder,
        DetectorKind::KMeans,
        DetectorKind::Dbscan,
        DetectorKind::Ocsvm,
    ];

    pub fn id(self) -> &'static str {
        match self {
            DetectorKind::Arima => "arima",
            DetectorKind::Sarima => "sarima",
            DetectorKind::Stl => "stl",
            DetectorKind::Knn => "knn",
            DetectorKind::Cart => "cart",
            DetectorKind::Krr => "krr",
            DetectorKind::Pca => "pca",
            DetectorKind::IForest => "iforest",
            DetectorKind::Autoencoder => "autoencoder",
            DetectorKind::KMeans => "kmeans",
            DetectorKind::Dbscan => "dbscan",
            DetectorKind::Ocsvm => "ocsvm",
        }
    }

    pub fn category(self) -> DetectorCategory {
        match self {
            DetectorKind::Arima
            | DetectorKind::Sarima
            | DetectorKind::Stl
            | DetectorKind::Knn
            | DetectorKind::Cart
            | DetectorKind::Krr => DetectorCategory::Predictive,
            DetectorKind::Pca | DetectorKind::IForest | DetectorKind::Autoencoder => DetectorCategory::Reduction,
            DetectorKind::KMeans | DetectorKind::Dbscan | DetectorKind::Ocsvm => DetectorCategory::Clustering,
        }
    }

    pub fn bit(self) -> u16 {
        1 << self as u16
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.id() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown detector `{s}`")))
    }
}

/// What a detector unit reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    /// Merged sample values of one feature, scored one step ahead.
    Series(FeatureKind),
    /// Sliding windows of per-cell sums of one feature.
    Window { feature: FeatureKind, width: usize },
    /// Per-cell sums of every enabled feature.
    CellRows,
    /// Merged samples over every enabled feature.
    SampleRows,
}

impl Input {
    fn code(self) -> u64 {
        match self {
            Input::Series(f) => f.index() as u64,
            Input::Window { feature, .. } => 3 + feature.index() as u64,
            Input::CellRows => 6,
            Input::SampleRows => 7,
        }
    }

    fn width(self) -> usize {
        match self {
            Input::Window { width, .. } => width,
            _ => 1,
        }
    }
}

impl fmt::Display for Input {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Input::Series(x) => write!(f, "{x}"),
            Input::Window { feature, width } => write!(f, "window:{feature}:{width}"),
            Input::CellRows => f.write_str("cells"),
            Input::SampleRows => f.write_str("samples"),
        }
    }
}

/// Every `(kind, input)` pair the configuration asks for, in registry
/// order.
pub fn plan(cfg: &Config) -> Vec<(DetectorKind, Input)> {
    let mut out = Vec::new();
    let multi = cfg.mode.multivariate() && cfg.features.len() >= 2;
    for kind in DetectorKind::ALL {
        if !cfg.detectors.contains(&kind) {
            continue;
        }
        match kind.category() {
            DetectorCategory::Predictive => out.extend(cfg.features.iter().map(|&f| (kind, Input::Series(f)))),
            cat => {
                if cfg.mode.univariate() {
                    let width = if kind == DetectorKind::Autoencoder {
                        cfg.reduction.ae_window
                    } else {
                        cfg.window_cells()
                    };
                    out.extend(cfg.features.iter().map(|&feature| (kind, Input::Window { feature, width })));
                }
                if multi {
                    out.push((
                        kind,
                        if cat == DetectorCategory::Reduction {
                            Input::CellRows
                        } else {
                            Input::SampleRows
                        },
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
enum Scorer {
    Pca(PcaModel),
    IForest(IsolationForest),
    Autoencoder(AutoencoderModel),
    KMeans(KMeansModel),
    Dbscan(DbscanModel),
    Ocsvm(OneClassModel),
}

impl Scorer {
    fn score(&self, z: &[f64]) -> f64 {
        match self {
            Scorer::Pca(m) => m.score(z),
            Scorer::IForest(m) => m.score(z),
            Scorer::Autoencoder(m) => m.score(z),
            Scorer::KMeans(m) => m.score(z),
            Scorer::Dbscan(m) => m.score(z),
            Scorer::Ocsvm(m) => -m.decision(z),
        }
    }
}

enum Fitted {
    Residual { model: Box<dyn ResidualModel>, rms: f64 },
    Vector { scaler: Standardizer, scorer: Scorer, cutoff: f64 },
}

/// One fitted detector on one input.
pub struct Unit {
    pub kind: DetectorKind,
    pub input: Input,
    fitted: Fitted,
}

impl fmt::Debug for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Unit")
            .field("id", &self.id())
            .field("threshold", &self.threshold())
            .finish()
    }
}

impl Unit {
    pub fn id(&self) -> String {
        format!("{}/{}", self.kind, self.input)
    }

    /// Training RMS for predictive units, score cutoff otherwise.
    pub fn threshold(&self) -> f64 {
        match &self.fitted {
            Fitted::Residual { rms, .. } => *rms,
            Fitted::Vector { cutoff, .. } => *cutoff,
        }
    }
}

fn unit_seed(cfg: &Config, kind: DetectorKind, input: Input) -> u64 {
    cfg.seed.wrapping_add(((kind as u64) << 8) | input.code())
}

fn period_for(values: &[f64], fixed: usize, fallback: usize) -> usize {
    if fixed > 0 {
        return fixed;
    }
    [PeriodMethod::Acf, PeriodMethod::Periodogram]
        .into_iter()
        .filter_map(|m| estimate_period(values, m).ok())
        .find(|&p| p >= 2)
        .unwrap_or(fallback)
}

fn fit_residual(kind: DetectorKind, values: &[f64], cfg: &Config) -> Result<(Box<dyn ResidualModel>, f64)> {
    let p = &cfg.predictive;
    Ok(match kind {
        DetectorKind::Arima | DetectorKind::Sarima => {
            let order = if kind == DetectorKind::Arima {
                match p.arima_selection {
                    OrderSelection::Cv => grid_search(values, p.arima_max_order, p.arima_folds, None)?.order,
                    OrderSelection::Aic => select_order_aic(values, p.arima_max_order)?,
                }
            } else {
                let period = period_for(values, p.sarima_period, p.sarima_fallback_period);
                let seasonal = SeasonalSearch {
                    period,
                    max_order: p.sarima_seasonal_max_order,
                };
                grid_search(values, p.arima_max_order, p.arima_folds, Some(seasonal))?.order
            };
            let model = ArimaModel::fit(values, order)?;
            let r = model.residual_rms;
            (
                Box::new(ArimaScorer {
                    model,
                    context: p.context,
                }),
                r,
            )
        }
        DetectorKind::Stl => {
            let period = period_for(values, p.stl_period, p.stl_fallback_period);
            let s = StlScorer::new(period, p.stl_clip);
            let r = rms(&s.training_residuals(values)?)?;
            (Box::new(s), r)
        }
        DetectorKind::Knn => {
            let fit = |v: &[f64]| KnnForecaster::fit(v, p.lags, p.knn_k);
            let r = holdout_rms(values, p.holdout, fit)?;
            (Box::new(fit(values)?), r)
        }
        DetectorKind::Cart => {
            let fit = |v: &[f64]| cart_forecast(v, p.lags, p.cart_max_depth, p.cart_min_leaf);
            let r = holdout_rms(values, p.holdout, fit)?;
            (Box::new(fit(values)?), r)
        }
        DetectorKind::Krr => {
            let fit = |v: &[f64]| KrrForecaster::fit(v, p.lags, p.krr_kernel, p.krr_lambda, p.krr_max_train);
            let r = holdout_rms(values, p.holdout, fit)?;
            (Box::new(fit(values)?), r)
        }
        _ => unreachable!("vector detector routed to residual fit"),
    })
}

fn strided(rows: &[Vec<f64>], cap: usize) -> Vec<Vec<f64>> {
    let stride = rows.len().div_ceil(cap.max(1)).max(1);
    rows.iter().step_by(stride).cloned().collect()
}

fn fit_vector(kind: DetectorKind, z: &[Vec<f64>], cfg: &Config, seed: u64) -> Result<(Scorer, f64)> {
    let r = &cfg.reduction;
    let c = &cfg.clustering;
    let by_rule = |scorer: Scorer, rule: ThresholdRule| -> Result<(Scorer, f64)> {
        let scores: Vec<f64> = par::map_slice(z, |x| scorer.score(x));
        let cutoff = rule.cutoff(&scores);
        if !cutoff.is_finite() {
            return Err(Error::numeric(format!("{kind} cutoff is not finite")));
        }
        Ok((scorer, cutoff))
    };
    match kind {
        DetectorKind::Pca => by_rule(Scorer::Pca(pca_fit(z, r.pca_explained)?), r.pca_threshold),
        DetectorKind::IForest => {
            let psi = r.iforest_subsample.min(z.len());
            by_rule(Scorer::IForest(iforest_fit(z, r.iforest_trees, psi, seed)?), r.iforest_threshold)
        }
        DetectorKind::Autoencoder => {
            let dim = z.first().map_or(0, Vec::len);
            if dim < 2 {
                return Err(Error::invalid("autoencoder needs inputs of width >= 2"));
            }
            let hidden = r.ae_hidden.min(dim - 1);
            let m = ae_train(z, hidden, r.ae_epochs, r.ae_learning_rate, seed)?;
            by_rule(Scorer::Autoencoder(m), r.ae_threshold)
        }
        DetectorKind::KMeans => {
            let k = if c.kmeans_k > 0 {
                c.kmeans_k
            } else {
                select_k(z, 2..=c.kmeans_k_max, seed, c.kmeans_restarts, c.kmeans_silhouette_sample)?
            };
            let m = kmeans_fit_with(z, k, seed, c.kmeans_restarts, 0.99)?;
            by_rule(Scorer::KMeans(m), c.kmeans_threshold)
        }
        DetectorKind::Dbscan => {
            let k = c.dbscan_min_pts.saturating_sub(1).max(1);
            let mut eps = c.dbscan_eps;
            if !(eps > 0.0) {
                eps = estimate_eps_quantile(z, k, c.dbscan_eps_quantile)?;
                if !(eps > 0.0) {
                    // duplicate-heavy data: fall back to the widest neighbourhood
                    eps = estimate_eps_quantile(z, k, 1.0)?;
                }
                if !(eps > 0.0) {
                    eps = 1.0;
                }
            }
            let m = DbscanModel::fit(
                z,
                DbscanParams {
                    eps,
                    min_pts: c.dbscan_min_pts,
                },
            )?;
            Ok((Scorer::Dbscan(m), 1.0))
        }
        DetectorKind::Ocsvm => {
            let sub = strided(z, c.ocsvm_max_train);
            let gamma = match c.ocsvm_gamma {
                GammaChoice::Cv => select_gamma_cv(
                    &sub,
                    c.ocsvm_nu,
                    &power_grid(c.ocsvm_gamma_grid.0, c.ocsvm_gamma_grid.1),
                    c.ocsvm_folds,
                )?,
                GammaChoice::Auto => default_gamma(&sub),
                GammaChoice::Value(g) => g,
            };
            let m = one_class_fit(&sub, KernelSpec::Rbf { gamma }, c.ocsvm_nu)?;
            let tol = m.tolerance;
            Ok((Scorer::Ocsvm(m), tol))
        }
        _ => unreachable!("predictive detector routed to vector fit"),
    }
}

/// Window start positions aligned to absolute multiples of `stride`
/// seconds.
fn window_starts(tl: &Timeline, width: usize, stride: i64, last_from: usize) -> impl Iterator<Item = usize> + '_ {
    let n = tl.len();
    let lo = last_from.saturating_sub(width - 1);
    (lo..n.saturating_sub(width - 1)).filter(move |&k| tl.starts[k].rem_euclid(stride) == 0)
}

fn vector_rows(tl: &Timeline, input: Input, cfg: &Config, stride: i64) -> Vec<Vec<f64>> {
    match input {
        Input::Window { feature, width } => {
            let v = tl.cell_values(feature);
            window_starts(tl, width, stride, 0).map(|k| v[k..k + width].to_vec()).collect()
        }
        Input::CellRows => tl
            .sums
            .iter()
            .map(|s| cfg.features.iter().map(|f| s[f.index()]).collect())
            .collect(),
        Input::SampleRows => tl
            .samples
            .iter()
            .map(|s| cfg.features.iter().map(|f| s.features[f.index()]).collect())
            .collect(),
        Input::Series(_) => unreachable!(),
    }
}

fn fit_unit(tl: &Timeline, kind: DetectorKind, input: Input, cfg: &Config) -> Result<Unit> {
    let fitted = match input {
        Input::Series(f) => {
            let values = tl.sample_values(f);
            if values.is_empty() {
                return Err(Error::invalid("no samples to fit"));
            }
            let (model, rms) = fit_residual(kind, &values, cfg)?;
            if !rms.is_finite() {
                return Err(Error::numeric("training RMS is not finite"));
            }
            Fitted::Residual { model, rms }
        }
        _ => {
            let rows = vector_rows(tl, input, cfg, cfg.stride);
            if rows.len() < 2 {
                return Err(Error::invalid(format!("{} training rows; need at least 2", rows.len())));
            }
            let scaler = Standardizer::fit(&rows);
            let z = scaler.apply_all(&rows);
            let (scorer, cutoff) = fit_vector(kind, &z, cfg, unit_seed(cfg, kind, input))?;
            Fitted::Vector { scaler, scorer, cutoff }
        }
    };
    Ok(Unit { kind, input, fitted })
}

/// Index of the largest `|z|`, earliest on ties.
fn peak(z: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in z.iter().enumerate() {
        if v.abs() > z[best].abs() {
            best = j;
        }
    }
    best
}

/// Per-cell bitmask over [`DetectorKind::bit`].
pub type KindMask = u16;

/// Fitted detectors plus the fit failures.
#[derive(Debug)]
pub struct Bank {
    pub units: Vec<Unit>,
    /// `(unit id, message)` for units that failed to fit.
    pub errors: Vec<(String, String)>,
    multiplier: f64,
    stride: i64,
    features: Vec<FeatureKind>,
}

impl Bank {
    /// Fits every planned unit on the whole timeline.
    pub fn fit(tl: &Timeline, cfg: &Config) -> Result<Self> {
        if tl.is_empty() {
            return Err(Error::invalid("cannot fit detectors on an empty database"));
        }
        let planned = plan(cfg);
        if planned.is_empty() {
            return Err(Error::Config("configuration enables no detector".into()));
        }
        let results = par::map_slice(&planned, |&(kind, input)| fit_unit(tl, kind, input, cfg));
        let mut units = Vec::new();
        let mut errors = Vec::new();
        for ((kind, input), r) in planned.into_iter().zip(results) {
            match r {
                Ok(u) => units.push(u),
                Err(e) => errors.push((format!("{kind}/{input}"), e.to_string())),
            }
        }
        Ok(Self {
            units,
            errors,
            multiplier: cfg.predictive.multiplier,
            stride: cfg.stride,
            features: cfg.features.clone(),
        })
    }

    /// Kinds with at least one fitted unit.
    pub fn voting_kinds(&self) -> Vec<DetectorKind> {
        DetectorKind::ALL
            .into_iter()
            .filter(|k| self.units.iter().any(|u| u.kind == *k))
            .collect()
    }

    /// Voting kinds per category.
    pub fn voters(&self) -> [usize; 3] {
        let mut v = [0; 3];
        for k in self.voting_kinds() {
            v[k.category().index()] += 1;
        }
        v
    }

    /// Widest window in cells; 1 without window units.
    pub fn max_width(&self) -> usize {
        self.units.iter().map(|u| u.input.width()).max().unwrap_or(1)
    }

    /// Raw per-unit sample histories for [`Bank::score`]; empty for
    /// vector units.
    pub fn raw_histories(&self, tl: &Timeline) -> Vec<Vec<f64>> {
        self.units
            .iter()
            .map(|u| match u.input {
                Input::Series(f) => tl.sample_values(f),
                _ => Vec::new(),
            })
            .collect()
    }

    /// Flag masks for every cell of `tl`. Predictive units score samples
    /// in cells `predictive_from..` against `histories` (one per unit,
    /// aligned with `tl.samples`), replacing each flagged value there by
    /// its forecast so an outlier does not distort the forecasts after
    /// it. Vector units score windows whose last cell is at or after
    /// `vector_from`, and rows in cells from there on; a flagged window
    /// marks only its cell of largest standardized magnitude.
    pub fn score(
        &self,
        tl: &Timeline,
        predictive_from: usize,
        vector_from: usize,
        histories: &mut [Vec<f64>],
    ) -> Vec<KindMask> {
        let jobs: Vec<(&Unit, &Vec<f64>)> = self.units.iter().zip(histories.iter()).collect();
        let results = par::map_slice(&jobs, |&(u, h)| self.unit_flags(u, tl, h, predictive_from, vector_from));
        let mut masks = vec![0; tl.len()];
        for ((u, (cells, fixes)), h) in self.units.iter().zip(results).zip(histories.iter_mut()) {
            for c in cells {
                masks[c] |= u.kind.bit();
            }
            for (s, v) in fixes {
                h[s] = v;
            }
        }
        masks
    }

    /// Flagged cells, plus history replacements for predictive units.
    fn unit_flags(
        &self,
        u: &Unit,
        tl: &Timeline,
        history: &[f64],
        predictive_from: usize,
        vector_from: usize,
    ) -> (Vec<usize>, Vec<(usize, f64)>) {
        let mut out = Vec::new();
        let mut fixes = Vec::new();
        match (&u.fitted, u.input) {
            (Fitted::Residual { model, rms }, Input::Series(_)) => {
                let start = tl.offsets[predictive_from.min(tl.len())];
                let mut h = history[..start].to_vec();
                for c in predictive_from..tl.len() {
                    let mut hit = false;
                    for s in tl.offsets[c]..tl.offsets[c + 1] {
                        let actual = history[s];
                        let r = if s > 0 { model.residual(&h, actual).ok() } else { None };
                        match r {
                            Some(r) if exceeds(r.abs(), *rms, self.multiplier) => {
                                hit = true;
                                fixes.push((s, actual - r));
                                h.push(actual - r);
                            }
                            _ => h.push(actual),
                        }
                    }
                    if hit {
                        out.push(c);
                    }
                }
            }
            (Fitted::Vector { scaler, scorer, cutoff }, input) => match input {
                Input::Window { feature, width } => {
                    let v = tl.cell_values(feature);
                    for k in window_starts(tl, width, self.stride, vector_from) {
                        let z = scaler.apply(&v[k..k + width]);
                        if scorer.score(&z) > *cutoff {
                            out.push(k + peak(&z));
                        }
                    }
                    out.sort_unstable();
                    out.dedup();
                }
                Input::CellRows => {
                    for c in vector_from..tl.len() {
                        let row: Vec<f64> = self.features.iter().map(|f| tl.sums[c][f.index()]).collect();
                        if scorer.score(&scaler.apply(&row)) > *cutoff {
                            out.push(c);
                        }
                    }
                }
                Input::SampleRows => {
                    for c in vector_from..tl.len() {
                        let hit = tl.samples[tl.offsets[c]..tl.offsets[c + 1]].iter().any(|s| {
                            let row: Vec<f64> = self.features.iter().map(|f| s.features[f.index()]).collect();
                            scorer.score(&scaler.apply(&row)) > *cutoff
                        });
                        if hit {
                            out.push(c);
                        }
                    }
                }
                Input::Series(_) => unreachable!(),
            },
            _ => unreachable!("fitted state matches input"),
        }
        (out, fixes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(ts: i64, value_milli: u128) -> Transaction {
        Transaction {
            hash: format!("0x{ts}"),
            timestamp: ts,
            from: "0xa".into(),
            to: "0xb".into(),
            value: value_milli * 1_000_000_000_000_000,
            gas_price: 30_000_000_000,
            gas_limit: 21_000,
        }
    }

    #[test]
    fn cells_keep_gaps_and_merge() {
        let cells = cells_from_transactions(&[tx(125, 1000), tx(10, 500), tx(10, 250)], 60).unwrap();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells.iter().map(|c| c.start).collect::<Vec<_>>(), vec![0, 60, 120]);
        assert!(cells[1].samples.is_empty());
        assert_eq!(cells[0].sums()[0], 0.75);
        let m = cells[0].merged();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].features[2], 42_000.0);
        let tl = Timeline::new(&cells);
        assert_eq!(tl.offsets, vec![0, 1, 1, 2]);
        assert_eq!(tl.cell_values(FeatureKind::PaymentAmount), vec![0.75, 0.0, 1.0]);
    }

    #[test]
    fn plan_follows_mode() {
        let mut cfg = Config::default();
        assert_eq!(plan(&cfg).len(), 6 * 3 + 6 * 3 + 6);
        cfg.mode = super::super::config::Mode::Univariate;
        assert_eq!(plan(&cfg).len(), 6 * 3 + 6 * 3);
        cfg.features = vec![FeatureKind::GasPrice];
        cfg.mode = super::super::config::Mode::Multivariate;
        assert_eq!(plan(&cfg).len(), 6);
    }

    #[test]
    fn kinds_parse_and_categorize() {
        assert_eq!("iforest".parse::<DetectorKind>().unwrap(), DetectorKind::IForest);
        assert!("forest".parse::<DetectorKind>().is_err());
        let per: Vec<usize> = DetectorCategory::ALL
            .iter()
            .map(|c| DetectorKind::ALL.iter().filter(|k| k.category() == *c).count())
            .collect();
        assert_eq!(per, vec![6, 3, 3]);
    }

    #[test]
    fn peak_prefers_earliest() {
        assert_eq!(peak(&[1.0, -3.0, 3.0]), 1);
        assert_eq!(peak(&[0.0, 0.0]), 0);
    }
}
