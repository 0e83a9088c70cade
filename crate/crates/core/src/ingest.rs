//! Transaction ingestion: block-explorer `txlist` JSON, the flat CSV
//! interchange format, and projection onto the three detection features.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::series::{Domain, TimeSeries};

pub const CSV_HEADER: [&str; 7] = [
    "hash",
    "timestamp",
    "from",
    "to",
    "value",
    "gas_price",
    "gas_limit",
];

const WEI_PER_ETHER: u128 = 1_000_000_000_000_000_000;
const WEI_PER_GWEI: u128 = 1_000_000_000;

/// One on-chain transfer. Wei amounts are stored losslessly; total ether
/// supply in wei is below 2^127.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub hash: String,
    /// Unix seconds.
    pub timestamp: i64,
    pub from: String,
    pub to: String,
    pub value: u128,
    pub gas_price: u128,
    pub gas_limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    PaymentAmount,
    GasPrice,
    GasLimit,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [
        FeatureKind::PaymentAmount,
        FeatureKind::GasPrice,
        FeatureKind::GasLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::PaymentAmount => "value",
            FeatureKind::GasPrice => "gasprice",
            FeatureKind::GasLimit => "gaslimit",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Feature value in analysis units: ether, gwei, or raw gas.
    pub fn extract(self, tx: &Transaction) -> f64 {
        match self {
            FeatureKind::PaymentAmount => scaled(tx.value, WEI_PER_ETHER),
            FeatureKind::GasPrice => scaled(tx.gas_price, WEI_PER_GWEI),
            FeatureKind::GasLimit => tx.gas_limit as f64,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "value" | "payment" | "amount" => Ok(FeatureKind::PaymentAmount),
            "gasprice" | "gas_price" => Ok(FeatureKind::GasPrice),
            "gaslimit" | "gas_limit" | "gas" => Ok(FeatureKind::GasLimit),
            other => Err(Error::Config(format!("unknown feature `{other}`"))),
        }
    }
}

// integer division first so large wei amounts keep their low digits
fn scaled(wei: u128, unit: u128) -> f64 {
    (wei / unit) as f64 + (wei % unit) as f64 / unit as f64
}

/// Parses a strictly decimal unsigned integer (no sign, exponent or prefix).
pub fn parse_decimal(s: &str) -> std::result::Result<u128, String> {
    if s.is_empty() {
        return Err("empty numeric string".into());
    }
    let mut acc: u128 = 0;
    for b in s.bytes() {
        if !b.is_ascii_digit() {
            return Err(format!("`{s}` is not a decimal integer"));
        }
        acc = acc
            .checked_mul(10)
            .and_then(|a| a.checked_add(u128::from(b - b'0')))
            .ok_or_else(|| format!("`{s}` overflows 128 bits"))?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Keep transactions the explorer marks `isError = "1"`.
    pub keep_failed: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { keep_failed: true }
    }
}

/// Parses an explorer account `txlist` response.
pub fn parse_explorer_json(raw: &[u8]) -> Result<Vec<Transaction>> {
    parse_explorer_json_with(raw, ParseOptions::default())
}

pub fn parse_explorer_json_with(raw: &[u8], opts: ParseOptions) -> Result<Vec<Transaction>> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| Error::Json {
        offset: byte_offset(raw, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let result = doc
        .get("result")
        .ok_or_else(|| Error::Schema("missing top-level `result`".into()))?;
    let records = result.as_array().ok_or_else(|| {
        Error::Schema(format!("`result` is not a list (got {})", short(result)))
    })?;

    let mut txs = Vec::with_capacity(records.len());
    for (index, rec) in records.iter().enumerate() {
        let obj = rec
            .as_object()
            .ok_or_else(|| Error::Schema(format!("record {index} is not an object")))?;
        let text = |field: &str| -> Result<&str> {
            match obj.get(field) {
                None => Err(Error::Schema(format!(
                    "record {index}: missing required field `{field}`"
                ))),
                Some(Value::String(s)) => Ok(s.as_str()),
                Some(other) => Err(Error::Field {
                    index,
                    field: field.into(),
                    message: format!("expected a string, got {}", short(other)),
                }),
            }
        };
        let number = |field: &str| -> Result<u128> {
            parse_decimal(text(field)?).map_err(|message| Error::Field {
                index,
                field: field.into(),
                message,
            })
        };
        if !opts.keep_failed && matches!(obj.get("isError"), Some(Value::String(s)) if s == "1") {
            continue;
        }
        let timestamp = number("timeStamp")?;
        let gas = number("gas")?;
        txs.push(Transaction {
            hash: text("hash")?.to_ascii_lowercase(),
            timestamp: i64::try_from(timestamp).map_err(|_| Error::Field {
                index,
                field: "timeStamp".into(),
                message: "timestamp out of range".into(),
            })?,
            from: text("from")?.to_ascii_lowercase(),
            to: text("to")?.to_ascii_lowercase(),
            value: number("value")?,
            gas_price: number("gasPrice")?,
            gas_limit: u64::try_from(gas).map_err(|_| Error::Field {
                index,
                field: "gas".into(),
                message: "gas limit out of range".into(),
            })?,
        });
    }
    sort_transactions(&mut txs);
    Ok(txs)
}

fn short(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 40 {
        format!("{}…", &s[..40])
    } else {
        s
    }
}

fn byte_offset(raw: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    let mut current = 1;
    for (i, b) in raw.iter().enumerate() {
        if current == line {
            offset = i;
            break;
        }
        if *b == b'\n' {
            current += 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(raw.len())
}

pub fn sort_transactions(txs: &mut [Transaction]) {
    txs.sort_by(|a, b| (a.timestamp, &a.hash).cmp(&(b.timestamp, &b.hash)));
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<Transaction>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

pub fn read_csv_from(reader: impl std::io::Read) -> Result<Vec<Transaction>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::Schema("empty CSV (no header)".into())),
        Some(r) => r.map_err(csv_err)?,
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Schema(format!(
            "CSV header must be `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut txs = Vec::new();
    for (index, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(index + 2, |p| p.line() as usize);
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Row {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let number = |i: usize| -> Result<u128> {
            parse_decimal(&rec[i]).map_err(|message| Error::Field {
                index,
                field: CSV_HEADER[i].into(),
                message: format!("line {line}: {message}"),
            })
        };
        let narrow = |i: usize, v: u128| -> Result<u64> {
            u64::try_from(v).map_err(|_| Error::Field {
                index,
                field: CSV_HEADER[i].into(),
                message: format!("line {line}: out of range"),
            })
        };
        txs.push(Transaction {
            hash: rec[0].to_string(),
            timestamp: narrow(1, number(1)?)? as i64,
            from: rec[2].to_string(),
            to: rec[3].to_string(),
            value: number(4)?,
            gas_price: number(5)?,
            gas_limit: narrow(6, number(6)?)?,
        });
    }
    sort_transactions(&mut txs);
    Ok(txs)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Row {
        line,
        message: e.to_string(),
    }
}

pub fn write_csv(transactions: &[Transaction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(transactions, std::io::BufWriter::new(file))
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
}

pub fn write_csv_to(transactions: &[Transaction], writer: impl std::io::Write) -> Result<()> {
    let mut sorted: Vec<&Transaction> = transactions.iter().collect();
    sorted.sort_by(|a, b| (a.timestamp, &a.hash).cmp(&(b.timestamp, &b.hash)));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io("<csv>", source),
        other => Error::Schema(format!("{other:?}")),
    };
    w.write_record(CSV_HEADER).map_err(io)?;
    for tx in sorted {
        w.write_record([
            tx.hash.clone(),
            tx.timestamp.to_string(),
            tx.from.clone(),
            tx.to.clone(),
            tx.value.to_string(),
            tx.gas_price.to_string(),
            tx.gas_limit.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads `.json` explorer dumps or `.csv` files, by extension.
pub fn read_transactions(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Vec<Transaction>> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_csv(path)
    } else {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        parse_explorer_json_with(&raw, opts)
    }
}

/// Sample-domain series of one feature, in input order.
pub fn to_feature_series(transactions: &[Transaction], feature: FeatureKind) -> TimeSeries {
    TimeSeries {
        points: transactions
            .iter()
            .map(|tx| (tx.timestamp, feature.extract(tx)))
            .collect(),
        domain: Domain::Sample,
    }
}

/// The address appearing most often on either side of the transfers;
/// for a single account's history this is the account itself.
pub fn infer_account(transactions: &[Transaction]) -> String {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tx in transactions {
        *counts.entry(tx.from.as_str()).or_default() += 1;
        *counts.entry(tx.to.as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(addr, _)| addr.to_string())
        .unwrap_or_default()
}
