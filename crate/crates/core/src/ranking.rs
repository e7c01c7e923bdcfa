//! Method rankings, Spearman rank similarity and Top-K subsetting.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::{LoadError, RankingError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    pub method_id: String,
    pub score: f64,
    pub rank: f64,
}

/// Fractional ranking, rank 1 = lowest error. Entries are kept in rank
/// order, ties in input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank_of(&self, method: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.method_id == method).map(|e| e.rank)
    }

    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.method_id.as_str()).collect()
    }
}

/// Ranks methods by ascending score; tied scores share their average rank.
pub fn rank_methods(scores: &[(String, f64)]) -> Result<Ranking, RankingError> {
    if scores.len() < 2 {
        return Err(RankingError::TooFewMethods(scores.len()));
    }
    let mut seen = HashSet::with_capacity(scores.len());
    for (m, s) in scores {
        if !s.is_finite() {
            return Err(RankingError::NonFiniteScore(m.clone()));
        }
        if !seen.insert(m.as_str()) {
            return Err(RankingError::DuplicateMethod(m.clone()));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1));

    let mut entries = Vec::with_capacity(scores.len());
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]].1;
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].1 == value {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            entries.push(RankEntry {
                method_id: scores[i].0.clone(),
                score: scores[i].1,
                rank,
            });
        }
        start = end;
    }
    Ok(Ranking { entries })
}

/// Outcome of a rank correlation: a value, or `Degenerate` when a ranking
/// has every method tied and the correlation is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Similarity {
    Value(f64),
    Degenerate,
}

impl Similarity {
    pub fn value(self) -> Option<f64> {
        match self {
            Similarity::Value(v) => Some(v),
            Similarity::Degenerate => None,
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Similarity::Value(v) => write!(f, "{v:.6}"),
            Similarity::Degenerate => f.write_str("*"),
        }
    }
}

impl Serialize for Similarity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Similarity::Value(v) => s.serialize_f64(*v),
            Similarity::Degenerate => s.serialize_str("*"),
        }
    }
}

/// Pearson correlation of two fractional-rank vectors over the same methods.
pub fn spearman(r1: &Ranking, r2: &Ranking) -> Result<Similarity, RankingError> {
    if r1.len() != r2.len() {
        return Err(RankingError::MethodSetMismatch);
    }
    if r1.len() < 2 {
        return Err(RankingError::TooFewMethods(r1.len()));
    }
    let other: HashMap<&str, f64> = r2.entries.iter().map(|e| (e.method_id.as_str(), e.rank)).collect();
    let pairs = r1
        .entries
        .iter()
        .map(|e| other.get(e.method_id.as_str()).map(|&b| (e.rank, b)))
        .collect::<Option<Vec<_>>>()
        .ok_or(RankingError::MethodSetMismatch)?;
    Ok(pearson(&pairs))
}

/// Rank vectors can be correlated directly when they are already aligned.
pub fn pearson(pairs: &[(f64, f64)]) -> Similarity {
    let m = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        let (da, db) = (a - mean_a, b - mean_b);
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        return Similarity::Degenerate;
    }
    Similarity::Value((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Method ids in the order that defines the Top-K subsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRanking {
    ids: Vec<String>,
}

impl ReferenceRanking {
    pub fn new(ids: Vec<String>) -> Result<Self, RankingError> {
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(RankingError::DuplicateMethod(id.clone()));
            }
        }
        Ok(ReferenceRanking { ids })
    }

    /// One method id per line; blank lines and `#` comments are skipped. A
    /// CSV file is read by its first column, with an optional header named
    /// `method_id` or `method`.
    pub fn from_file(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut ids = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let first = line.split(',').next().unwrap_or("").trim().trim_matches('"');
            if ids.is_empty() && i == 0 && (first == "method_id" || first == "method") {
                continue;
            }
            ids.push(first.to_string());
        }
        Self::new(ids).map_err(|e| LoadError::Invalid {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn top(&self, k: usize) -> Result<&[String], RankingError> {
        if k > self.ids.len() {
            return Err(RankingError::TopKTooLarge {
                k,
                available: self.ids.len(),
            });
        }
        Ok(&self.ids[..k])
    }
}

/// Scores of the `k` reference-best methods, in reference order. Rankings
/// are then recomputed within the subset.
pub fn top_k_subset(reference: &ReferenceRanking, k: usize, scores: &[(String, f64)]) -> Result<Vec<(String, f64)>, RankingError> {
    let lookup: HashMap<&str, f64> = scores.iter().map(|(m, s)| (m.as_str(), *s)).collect();
    reference
        .top(k)?
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .map(|&s| (id.clone(), s))
                .ok_or_else(|| RankingError::MissingScore(id.clone()))
        })
        .collect()
}
