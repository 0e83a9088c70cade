use proptest::prelude::*;
use txwatch::app::{synth_generate, Injection, InjectionKind, SynthConfig};
use txwatch::ensemble::*;
use txwatch::ingest::Transaction;

const DAY: i64 = 86_400;

fn verdict(id: &str, category: DetectorCategory, flags: Vec<bool>) -> DetectorVerdict {
    DetectorVerdict {
        detector_id: id.into(),
        category,
        flags,
        scores: None,
    }
}

/// Detectors that fit in well under a second on a day of cells.
fn light() -> Config {
    let mut cfg = Config::default();
    for (k, v) in [
        ("autoencoder.epochs", "40"),
        ("kmeans.k", "3"),
        ("ocsvm.gamma", "auto"),
        ("ocsvm.max_train", "500"),
        ("krr.max_train", "500"),
        ("iforest.trees", "40"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn low_alarm(mut cfg: Config) -> Config {
    for (k, v) in [
        ("pca.threshold", "quantile:1.0"),
        ("iforest.threshold", "quantile:1.0"),
        ("autoencoder.threshold", "quantile:1.0"),
        ("kmeans.threshold", "quantile:1.0"),
        ("dbscan.eps_quantile", "1.0"),
        ("ocsvm.nu", "0.01"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn synth(days: i64, seed: u64, injections: Vec<Injection>) -> (SynthConfig, Vec<Transaction>, Vec<i64>) {
    let sc = SynthConfig {
        duration: days * DAY,
        seed,
        injections,
        ..Default::default()
    };
    let (txs, labels) = synth_generate(&sc).unwrap();
    (sc, txs, labels.iter().map(|l| l.timestamp).collect())
}

#[test]
fn vote_examples() {
    let ts = [0, 60];
    let p = DetectorCategory::Predictive;
    let r = category_vote(&ts, &[
        verdict("arima", p, vec![true, false]),
        verdict("sarima", p, vec![true, false]),
        verdict("stl", p, vec![false, false]),
    ])
    .unwrap();
    assert!(r.points[0].alarm);
    assert_eq!(r.points[0].categories.predictive, Some(CategoryVote::new(2, 3)));

    let r = category_vote(&ts, &[verdict("arima", p, vec![true, true]), verdict("stl", p, vec![false, true])]).unwrap();
    assert!(!r.points[0].categories.predictive.unwrap().decision);
    assert!(r.points[1].alarm);

    let r = category_vote(&ts, &[
        verdict("arima", p, vec![false, false]),
        verdict("kmeans", DetectorCategory::Clustering, vec![true, false]),
        verdict("pca", DetectorCategory::Reduction, vec![false, false]),
    ])
    .unwrap();
    let pt = &r.points[0];
    assert!(pt.alarm);
    assert!(pt.categories.clustering.unwrap().decision);
    assert!(!pt.categories.predictive.unwrap().decision && !pt.categories.reduction.unwrap().decision);
}

#[test]
fn alarm_rule_restricts_categories() {
    let vs = [
        verdict("kmeans", DetectorCategory::Clustering, vec![true]),
        verdict("arima", DetectorCategory::Predictive, vec![false]),
    ];
    let only: AlarmRule = "predictive".parse().unwrap();
    assert!(!category_vote_with(&[0], &vs, &only).unwrap().points[0].alarm);
    assert!(category_vote_with(&[0], &vs, &AlarmRule::Any).unwrap().points[0].alarm);
}

fn arb_verdicts() -> impl Strategy<Value = Vec<DetectorVerdict>> {
    let kinds = DetectorKind::ALL;
    prop::collection::vec((0usize..12, prop::collection::vec(any::<bool>(), 6)), 1..12).prop_map(move |v| {
        let mut seen = std::collections::HashSet::new();
        v.into_iter()
            .filter(|(k, _)| seen.insert(*k))
            .map(|(k, flags)| verdict(kinds[k].id(), kinds[k].category(), flags))
            .collect()
    })
}

const TS: [i64; 6] = [0, 60, 120, 180, 240, 300];

proptest! {
    #[test]
    fn adding_a_flag_never_clears_a_category(vs in arb_verdicts(), extra in 0usize..12) {
        let kind = DetectorKind::ALL[extra];
        prop_assume!(vs.iter().all(|v| v.detector_id != kind.id()));
        let before = category_vote(&TS, &vs).unwrap();
        let mut more = vs.clone();
        more.push(verdict(kind.id(), kind.category(), vec![true; 6]));
        let after = category_vote(&TS, &more).unwrap();
        for (a, b) in before.points.iter().zip(&after.points) {
            if let Some(v) = a.categories.get(kind.category()) {
                prop_assert!(!v.decision || b.categories.get(kind.category()).unwrap().decision);
            }
            prop_assert!(!a.alarm || b.alarm);
        }
    }

    #[test]
    fn removing_a_category_leaves_others(vs in arb_verdicts(), drop in 0usize..3) {
        let gone = DetectorCategory::ALL[drop];
        let kept: Vec<DetectorVerdict> = vs.iter().filter(|v| v.category != gone).cloned().collect();
        prop_assume!(!kept.is_empty());
        let full = category_vote(&TS, &vs).unwrap();
        let part = category_vote(&TS, &kept).unwrap();
        for (a, b) in full.points.iter().zip(&part.points) {
            for c in DetectorCategory::ALL.into_iter().filter(|c| *c != gone) {
                prop_assert_eq!(a.categories.get(c), b.categories.get(c));
            }
        }
    }
}

#[test]
fn vote_input_errors() {
    assert!(category_vote(&[0], &[]).is_err());
    let p = DetectorCategory::Predictive;
    assert!(category_vote(&[0, 60], &[verdict("arima", p, vec![true])]).is_err());
    assert!(category_vote(&[0], &[verdict("arima", p, vec![true]), verdict("arima", p, vec![true])]).is_err());
}

#[test]
fn clean_baseline_alarm_rate() {
    let (_, txs, _) = synth(1, 5, vec![]);
    let r = run_batch(&txs, &light()).unwrap();
    let rate = r.alarms().count() as f64 / r.points.len() as f64;
    assert!(rate < 0.05, "alarm rate {rate}");
}

#[test]
fn value_spike_flagged_by_predictive_majority() {
    let sc = SynthConfig::default();
    let at = sc.start + 20 * 3600 + 17;
    let (_, txs, _) = synth(1, 2, vec![Injection { kind: InjectionKind::Spike, at, magnitude: 10.0 }]);
    let r = run_batch(&txs, &light()).unwrap();
    let cell = r.points.iter().find(|p| p.ts <= at && at < p.ts + 60).unwrap();
    let v = cell.categories.predictive.unwrap();
    assert!(v.decision, "{v:?} {:?}", cell.detectors);
    assert!(cell.alarm);
}

#[test]
fn zero_detectors_is_an_error() {
    let (_, txs, _) = synth(1, 1, vec![]);
    let mut cfg = light();
    cfg.detectors.clear();
    assert!(run_batch(&txs, &cfg).is_err());
}

#[test]
fn batch_is_deterministic() {
    let (_, txs, _) = synth(1, 9, vec![]);
    let a = run_batch(&txs, &light()).unwrap();
    let b = run_batch(&txs, &light()).unwrap();
    assert_eq!(a, b);
}

fn stream_points(engine: &mut StreamEngine, cells: &[Cell], chunk: usize) -> (Vec<PointReport>, Vec<Advance>) {
    let mut pts = Vec::new();
    let mut steps = Vec::new();
    for c in cells.chunks(chunk) {
        let a = engine.advance(c).unwrap();
        pts.extend(a.finalized.iter().cloned());
        steps.push(a);
    }
    pts.extend(engine.flush());
    (pts, steps)
}

#[test]
fn stream_matches_batch_without_retrain() {
    let (_, txs, _) = synth(1, 4, vec![]);
    let mut cfg = light();
    cfg.set("retrain", "10000000").unwrap();
    cfg.set("database", "10000000").unwrap();
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let batch = run_batch_cells(&cells, &cfg, "0xacc").unwrap();
    let (_, train) = fit_batch(&cells, &cfg).unwrap();
    let mut e = StreamEngine::bootstrap(cfg, "0xacc", &cells[..train]).unwrap();
    let (pts, steps) = stream_points(&mut e, &cells[train..], 5);
    assert!(steps.iter().all(|s| !s.retrained));
    let tail: Vec<&PointReport> = batch.points.iter().filter(|p| p.ts >= cells[train].start).collect();
    for (s, b) in pts.iter().zip(&tail) {
        assert_eq!(s.ts, b.ts);
        assert_eq!(s.categories, b.categories, "at {}", s.ts);
        assert_eq!(s.alarm, b.alarm);
    }
    assert_eq!(pts.len(), tail.len());
}

#[test]
fn stream_replay_is_deterministic() {
    let (_, txs, _) = synth(2, 6, vec![]);
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let run = || {
        let mut e = StreamEngine::bootstrap(light(), "a", &cells[..DAY as usize / 60]).unwrap();
        stream_points(&mut e, &cells[DAY as usize / 60..], 5).0
    };
    assert_eq!(run(), run());
}

#[test]
fn replaying_the_baseline_raises_nothing() {
    let (_, txs, _) = synth(1, 8, vec![]);
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let mut e = StreamEngine::bootstrap(low_alarm(light()), "a", &cells).unwrap();
    // the last two hours again, straight after the database
    let n = cells.len();
    let shift = cells[n - 1].start + 60 - cells[n - 120].start;
    let replay: Vec<Cell> = cells[n - 120..]
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.start += shift;
            for s in &mut c.samples {
                s.ts += shift;
            }
            c
        })
        .collect();
    let mut alarms = Vec::new();
    for c in replay.chunks(5) {
        alarms.extend(e.advance(c).unwrap().alarms);
    }
    assert!(alarms.is_empty(), "{:?}", alarms.iter().map(|p| (p.ts, p.detectors.clone())).collect::<Vec<_>>());
}

#[test]
fn dos_burst_raises_clustering_alarm() {
    let sc = SynthConfig::default();
    let boot_end = sc.start + DAY;
    let at = boot_end + 3 * 3600 + 25;
    let (_, txs, _) = synth(2, 3, vec![Injection { kind: InjectionKind::Burst, at, magnitude: 200.0 }]);
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let split = cells.iter().position(|c| c.start >= boot_end).unwrap();
    let mut e = StreamEngine::bootstrap(light(), "a", &cells[..split]).unwrap();
    let window = e.config().window_cells() as i64;
    let mut hit = None;
    for c in cells[split..].chunks(5) {
        let a = e.advance(c).unwrap();
        if let Some(p) = a.alarms.iter().find(|p| p.categories.clustering.is_some_and(|v| v.decision)) {
            if (p.ts - at).abs() < 60 * window && hit.is_none() {
                hit = Some(p.ts);
            }
        }
    }
    assert!(hit.is_some(), "no clustering alarm near the burst");
}

#[test]
fn four_days_trigger_one_retrain() {
    let (_, txs, _) = synth(5, 1, vec![]);
    let mut cfg = light();
    cfg.set("detectors", "knn,kmeans").unwrap();
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let mut e = StreamEngine::bootstrap(cfg, "a", &cells[..60]).unwrap();
    // bootstrap ends at cells[60].start; four days later is cell 60 + 5760
    let (_, steps) = stream_points(&mut e, &cells[60..60 + 5760], 5);
    assert_eq!(steps.iter().filter(|s| s.retrained).count(), 1);
    assert!(steps.last().unwrap().retrained);
    assert_eq!(e.retrain_count(), 2);
}

#[test]
fn retrain_twice_gives_identical_models() {
    let (_, txs, _) = synth(1, 12, vec![]);
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let mut e = StreamEngine::bootstrap(light(), "a", &cells).unwrap();
    let t1: Vec<(String, f64)> = e.bank().unwrap().units.iter().map(|u| (u.id(), u.threshold())).collect();
    e.retrain().unwrap();
    let t2: Vec<(String, f64)> = e.bank().unwrap().units.iter().map(|u| (u.id(), u.threshold())).collect();
    assert_eq!(t1, t2);
}

#[test]
fn retrain_without_data_fails() {
    let mut e = StreamEngine::new(light(), "a").unwrap();
    assert!(e.retrain().is_err());
}

#[test]
fn retrain_adapts_to_a_regime_change() {
    let sc = SynthConfig::default();
    let shift = sc.start + DAY;
    let (_, txs, _) = synth(3, 21, vec![Injection { kind: InjectionKind::TrendBreak, at: shift, magnitude: 2.0 }]);
    let mut cfg = light();
    cfg.set("retrain", &(DAY / 2).to_string()).unwrap();
    cfg.set("database", &(DAY / 2).to_string()).unwrap();
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let boot = cells.iter().position(|c| c.start >= shift - DAY / 2).unwrap();
    let split = cells.iter().position(|c| c.start >= shift).unwrap();
    let mut e = StreamEngine::bootstrap(cfg, "a", &cells[boot..split]).unwrap();
    let mut retrained_at = None;
    let mut pre = (0usize, 0usize);
    let mut post = (0usize, 0usize);
    for c in cells[split..].chunks(5) {
        let a = e.advance(c).unwrap();
        if a.retrained && retrained_at.is_none() {
            retrained_at = Some(c.last().unwrap().start);
        }
        for p in &a.finalized {
            let slot = if retrained_at.is_some_and(|r| p.ts > r) { &mut post } else { &mut pre };
            slot.0 += usize::from(p.alarm);
            slot.1 += 1;
        }
    }
    assert!(retrained_at.is_some());
    let rate = |(a, n): (usize, usize)| a as f64 / n.max(1) as f64;
    assert!(rate(post) < rate(pre), "pre {pre:?} post {post:?}");
}

#[test]
fn gaps_are_filled_with_a_notice() {
    let (_, txs, _) = synth(1, 2, vec![]);
    let cells = cells_from_transactions(&txs, 60).unwrap();
    let mut e = StreamEngine::bootstrap(light(), "a", &cells).unwrap();
    let last = cells.last().unwrap().start;
    let a = e.advance(&[Cell::empty(last + 600)]).unwrap();
    assert!(!a.notices.is_empty());
    assert!(e.advance(&[Cell::empty(last + 300)]).is_err());
    assert!(e.advance(&[Cell::empty(last + 630)]).is_err());
}
