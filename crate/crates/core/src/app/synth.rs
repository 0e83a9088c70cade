//! Seeded synthetic account histories with labeled injected anomalies.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Transaction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    /// One transaction whose value is multiplied by the magnitude.
    Spike,
    /// `magnitude × base_rate` extra transactions within the calendar
    /// minute containing the injection time.
    Burst,
    /// Every later value multiplied by the magnitude.
    TrendBreak,
    /// One transaction whose gas price alone is multiplied.
    GasDecouple,
}

impl InjectionKind {
    pub fn name(self) -> &'static str {
        match self {
            InjectionKind::Spike => "spike",
            InjectionKind::Burst => "burst",
            InjectionKind::TrendBreak => "trendbreak",
            InjectionKind::GasDecouple => "gasdecouple",
        }
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spike" => Ok(InjectionKind::Spike),
            "burst" => Ok(InjectionKind::Burst),
            "trendbreak" => Ok(InjectionKind::TrendBreak),
            "gasdecouple" => Ok(InjectionKind::GasDecouple),
            other => Err(Error::Config(format!("unknown injection kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub kind: InjectionKind,
    /// Unix seconds.
    pub at: i64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub account: String,
    /// Unix seconds of the first possible arrival.
    pub start: i64,
    /// Seconds.
    pub duration: i64,
    /// Expected transactions per minute.
    pub base_rate: f64,
    /// Log-normal parameters of the value in ether.
    pub value_mu: f64,
    pub value_sigma: f64,
    /// Gwei.
    pub gas_price: f64,
    /// Relative half-width of the uniform gas-price noise.
    pub gas_price_noise: f64,
    pub gas_limit: f64,
    pub gas_limit_noise: f64,
    pub injections: Vec<Injection>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            account: "0x00000000000000000000000000000000000000aa".into(),
            start: 1_600_000_000 - 1_600_000_000 % 86_400,
            duration: 86_400,
            base_rate: 0.1,
            value_mu: 0.0,
            value_sigma: 0.1,
            gas_price: 30.0,
            gas_price_noise: 0.1,
            gas_limit: 21_000.0,
            gas_limit_noise: 0.05,
            injections: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.duration <= 0 || !(self.base_rate > 0.0) {
            return bad("duration and base_rate must be positive".into());
        }
        if !(self.value_sigma >= 0.0) || !self.value_mu.is_finite() {
            return bad("value distribution parameters are invalid".into());
        }
        if !(self.gas_price > 0.0) || !(self.gas_limit > 0.0) {
            return bad("gas price and gas limit levels must be positive".into());
        }
        if !(0.0..1.0).contains(&self.gas_price_noise) || !(0.0..0.5).contains(&self.gas_limit_noise) {
            return bad("gas noise must lie in [0, 1) for price and [0, 0.5) for limit".into());
        }
        for inj in &self.injections {
            if !(inj.magnitude > 0.0) || !inj.magnitude.is_finite() {
                return bad(format!("{} at {}: magnitude must be positive", inj.kind, inj.at));
            }
            if inj.at < self.start || inj.at >= self.start + self.duration {
                return bad(format!("{} at {} lies outside the generated span", inj.kind, inj.at));
            }
        }
        Ok(())
    }

    /// Flat `key = value` text. `inject = kind@offset:magnitude` may repeat;
    /// the offset is seconds after `start`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = SynthConfig::default();
        let mut offsets = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::Config(format!("line {}: {m}", i + 1));
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| err(format!("`{k}`: cannot parse `{v}`"))) };
            let int = |v: &str| -> Result<i64> { v.parse().map_err(|_| err(format!("`{k}`: cannot parse `{v}`"))) };
            match k {
                "account" => c.account = v.to_string(),
                "start" => c.start = int(v)?,
                "duration" => c.duration = int(v)?,
                "base_rate" => c.base_rate = num(v)?,
                "value_mu" => c.value_mu = num(v)?,
                "value_sigma" => c.value_sigma = num(v)?,
                "gas_price" => c.gas_price = num(v)?,
                "gas_price_noise" => c.gas_price_noise = num(v)?,
                "gas_limit" => c.gas_limit = num(v)?,
                "gas_limit_noise" => c.gas_limit_noise = num(v)?,
                "seed" => c.seed = v.parse().map_err(|_| err(format!("bad seed `{v}`")))?,
                "inject" => {
                    let (kind, rest) = v.split_once('@').ok_or_else(|| err("inject must be kind@offset:magnitude".into()))?;
                    let (off, mag) = rest.split_once(':').ok_or_else(|| err("inject must be kind@offset:magnitude".into()))?;
                    offsets.push((kind.parse::<InjectionKind>()?, int(off)?, num(mag)?));
                }
                _ => return Err(err(format!("unknown key `{k}`"))),
            }
        }
        c.injections = offsets
            .into_iter()
            .map(|(kind, off, magnitude)| Injection {
                kind,
                at: c.start + off,
                magnitude,
            })
            .collect();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// One injected event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub timestamp: i64,
    pub kind: InjectionKind,
}

struct Draw {
    value: f64,
    /// Shared noise driving both gas fields.
    u: f64,
    u2: f64,
    counterparty: u8,
}

fn draw(rng: &mut ChaCha8Rng, value: &LogNormal<f64>) -> Draw {
    Draw {
        value: value.sample(rng),
        u: rng.random_range(-1.0..=1.0),
        u2: rng.random_range(-1.0..=1.0),
        counterparty: rng.random_range(0..16),
    }
}

fn wei(x: f64, unit: f64) -> u128 {
    (x * unit).round().max(0.0) as u128
}

/// Poisson arrivals at `base_rate` with log-normal values and correlated
/// gas fields, then the configured injections. Labels are the injection
/// times, one per injection.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<Transaction>, Vec<Label>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gaps = Exp::new(cfg.base_rate / 60.0).map_err(|e| Error::Config(e.to_string()))?;
    let value = LogNormal::new(cfg.value_mu, cfg.value_sigma).map_err(|e| Error::Config(e.to_string()))?;

    // (timestamp, draw, value factor, gas-price factor)
    let mut rows: Vec<(i64, Draw, f64, f64)> = Vec::new();
    let mut t = cfg.start as f64;
    loop {
        t += gaps.sample(&mut rng);
        if t >= (cfg.start + cfg.duration) as f64 {
            break;
        }
        rows.push((t.floor() as i64, draw(&mut rng, &value), 1.0, 1.0));
    }
    let mut labels = Vec::with_capacity(cfg.injections.len());
    for inj in &cfg.injections {
        match inj.kind {
            InjectionKind::Spike => rows.push((inj.at, draw(&mut rng, &value), inj.magnitude, 1.0)),
            InjectionKind::GasDecouple => rows.push((inj.at, draw(&mut rng, &value), 1.0, inj.magnitude)),
            InjectionKind::Burst => {
                let count = (inj.magnitude * cfg.base_rate).round().max(1.0) as usize;
                let lo = inj.at.div_euclid(60) * 60;
                for _ in 0..count {
                    let ts = rng.random_range(lo..lo + 60).clamp(cfg.start, cfg.start + cfg.duration - 1);
                    rows.push((ts, draw(&mut rng, &value), 1.0, 1.0));
                }
            }
            InjectionKind::TrendBreak => {
                for r in rows.iter_mut().filter(|r| r.0 >= inj.at) {
                    r.2 *= inj.magnitude;
                }
            }
        }
        labels.push(Label {
            timestamp: inj.at,
            kind: inj.kind,
        });
    }
    rows.sort_by_key(|r| r.0);
    labels.sort_by_key(|l| l.timestamp);

    let txs = rows
        .into_iter()
        .enumerate()
        .map(|(i, (ts, d, vf, gf))| {
            let price = cfg.gas_price * (1.0 + cfg.gas_price_noise * d.u) * gf;
            // correlation 0.9 with the price noise, bounded
            let limit = cfg.gas_limit * (1.0 + cfg.gas_limit_noise * (0.9 * d.u + 0.436 * d.u2));
            Transaction {
                hash: format!("0x{:064x}", i + 1),
                timestamp: ts,
                from: cfg.account.clone(),
                to: format!("0x{:040x}", 0xc0 + u32::from(d.counterparty)),
                value: wei(d.value * vf, 1e18),
                gas_price: wei(price, 1e9),
                gas_limit: limit.round() as u64,
            }
        })
        .collect();
    Ok((txs, labels))
}

pub fn write_labels(labels: &[Label], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    for l in labels {
        w.serialize(l).map_err(|e| Error::Schema(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Row {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
