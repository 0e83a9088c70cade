//! Per-category strict-majority voting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorCategory {
    Predictive,
    Reduction,
    Clustering,
}

impl DetectorCategory {
    pub const ALL: [DetectorCategory; 3] = [
        DetectorCategory::Predictive,
        DetectorCategory::Reduction,
        DetectorCategory::Clustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorCategory::Predictive => "predictive",
            DetectorCategory::Reduction => "reduction",
            DetectorCategory::Clustering => "clustering",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DetectorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorCategory::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown category `{s}`")))
    }
}

/// One detector's decisions over a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorVerdict {
    pub detector_id: String,
    pub category: DetectorCategory,
    pub flags: Vec<bool>,
    pub scores: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryVote {
    pub flagged: usize,
    pub total: usize,
    pub decision: bool,
}

impl CategoryVote {
    pub fn new(flagged: usize, total: usize) -> Self {
        Self {
            flagged,
            total,
            decision: 2 * flagged > total,
        }
    }
}

/// Votes keyed by category name; absent categories had no voters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryVotes {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predictive: Option<CategoryVote>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reduction: Option<CategoryVote>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clustering: Option<CategoryVote>,
}

impl CategoryVotes {
    pub fn get(&self, c: DetectorCategory) -> Option<CategoryVote> {
        match c {
            DetectorCategory::Predictive => self.predictive,
            DetectorCategory::Reduction => self.reduction,
            DetectorCategory::Clustering => self.clustering,
        }
    }

    pub fn set(&mut self, c: DetectorCategory, v: CategoryVote) {
        match c {
            DetectorCategory::Predictive => self.predictive = Some(v),
            DetectorCategory::Reduction => self.reduction = Some(v),
            DetectorCategory::Clustering => self.clustering = Some(v),
        }
    }
}

/// Which category decisions raise the final alarm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlarmRule {
    Any,
    Only(Vec<DetectorCategory>),
}

impl AlarmRule {
    pub fn admits(&self, c: DetectorCategory) -> bool {
        match self {
            AlarmRule::Any => true,
            AlarmRule::Only(list) => list.contains(&c),
        }
    }
}

impl fmt::Display for AlarmRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlarmRule::Any => f.write_str("any"),
            AlarmRule::Only(list) => {
                let names: Vec<&str> = list.iter().map(|c| c.name()).collect();
                f.write_str(&names.join(","))
            }
        }
    }
}

impl FromStr for AlarmRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "any" || s == "or" {
            return Ok(AlarmRule::Any);
        }
        let list = s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::Config("alarm rule names no category".into()));
        }
        Ok(AlarmRule::Only(list))
    }
}

/// Ensemble outcome for one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub ts: i64,
    #[serde(default)]
    pub account: String,
    pub categories: CategoryVotes,
    pub alarm: bool,
    /// Ids of the detectors that flagged the point.
    pub detectors: Vec<String>,
    /// Cell sums per feature name, for plotting.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleReport {
    pub points: Vec<PointReport>,
    /// Ids of the detectors that voted, in registry order.
    pub detectors: Vec<String>,
    pub warnings: Vec<String>,
    /// `(detector id, message)` for detectors that failed to fit.
    pub detector_errors: Vec<(String, String)>,
}

impl EnsembleReport {
    pub fn alarms(&self) -> impl Iterator<Item = &PointReport> {
        self.points.iter().filter(|p| p.alarm)
    }
}

/// Votes one point given the ids that flagged it and the voters per
/// category.
pub fn vote_point(
    ts: i64,
    flagged: &[(&str, DetectorCategory)],
    voters: &[usize; 3],
    rule: &AlarmRule,
) -> PointReport {
    let mut categories = CategoryVotes::default();
    let mut alarm = false;
    for c in DetectorCategory::ALL {
        if voters[c.index()] == 0 {
            continue;
        }
        let n = flagged.iter().filter(|(_, fc)| *fc == c).count();
        let v = CategoryVote::new(n, voters[c.index()]);
        alarm |= v.decision && rule.admits(c);
        categories.set(c, v);
    }
    PointReport {
        ts,
        account: String::new(),
        categories,
        alarm,
        detectors: flagged.iter().map(|(id, _)| id.to_string()).collect(),
        values: BTreeMap::new(),
    }
}

pub fn category_vote(timestamps: &[i64], verdicts: &[DetectorVerdict]) -> Result<EnsembleReport> {
    category_vote_with(timestamps, verdicts, &AlarmRule::Any)
}

/// Strict majority within each category; final alarm per `rule`.
pub fn category_vote_with(timestamps: &[i64], verdicts: &[DetectorVerdict], rule: &AlarmRule) -> Result<EnsembleReport> {
    if verdicts.is_empty() {
        return Err(Error::invalid("vote needs at least one verdict"));
    }
    for (i, v) in verdicts.iter().enumerate() {
        if v.flags.len() != timestamps.len() {
            return Err(Error::invalid(format!(
                "verdict `{}` covers {} points, expected {}",
                v.detector_id,
                v.flags.len(),
                timestamps.len()
            )));
        }
        if verdicts[..i].iter().any(|o| o.detector_id == v.detector_id) {
            return Err(Error::invalid(format!("duplicate detector id `{}`", v.detector_id)));
        }
    }
    let mut voters = [0usize; 3];
    for v in verdicts {
        voters[v.category.index()] += 1;
    }
    let points = timestamps
        .iter()
        .enumerate()
        .map(|(i, &ts)| {
            let flagged: Vec<(&str, DetectorCategory)> = verdicts
                .iter()
                .filter(|v| v.flags[i])
                .map(|v| (v.detector_id.as_str(), v.category))
                .collect();
            vote_point(ts, &flagged, &voters, rule)
        })
        .collect();
    Ok(EnsembleReport {
        points,
        detectors: verdicts.iter().map(|v| v.detector_id.clone()).collect(),
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use DetectorCategory::*;

    fn v(id: &str, c: DetectorCategory, flag: bool) -> DetectorVerdict {
        DetectorVerdict {
            detector_id: id.into(),
            category: c,
            flags: vec![flag],
            scores: None,
        }
    }

    #[test]
    fn two_of_three() {
        let r = category_vote(&[0], &[v("a", Predictive, true), v("b", Predictive, true), v("c", Predictive, false)]).unwrap();
        assert!(r.points[0].categories.predictive.unwrap().decision);
        assert!(r.points[0].alarm);
    }

    #[test]
    fn tie_is_clear() {
        let r = category_vote(&[0], &[v("a", Reduction, true), v("b", Reduction, false)]).unwrap();
        assert!(!r.points[0].categories.reduction.unwrap().decision);
        assert!(!r.points[0].alarm);
    }

    #[test]
    fn or_over_categories() {
        let r = category_vote(&[0], &[v("a", Clustering, true), v("b", Predictive, false)]).unwrap();
        let p = &r.points[0];
        assert!(p.alarm);
        assert!(p.categories.clustering.unwrap().decision);
        assert!(!p.categories.predictive.unwrap().decision);
        assert_eq!(p.detectors, vec!["a".to_string()]);
        assert!(p.categories.reduction.is_none());
    }

    #[test]
    fn restricted_rule() {
        let rule = AlarmRule::Only(vec![Predictive]);
        let r = category_vote_with(&[0], &[v("a", Clustering, true)], &rule).unwrap();
        assert!(!r.points[0].alarm);
        assert_eq!("predictive,clustering".parse::<AlarmRule>().unwrap(), AlarmRule::Only(vec![Predictive, Clustering]));
    }

    #[test]
    fn mismatched_lengths() {
        let mut bad = v("a", Predictive, true);
        bad.flags.push(false);
        assert!(category_vote(&[0], &[bad]).is_err());
        assert!(category_vote(&[0], &[v("a", Predictive, true), v("a", Reduction, true)]).is_err());
        assert!(category_vote(&[0], &[]).is_err());
    }
}
