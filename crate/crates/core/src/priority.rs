//! Per-game tag priorities and their distributions.
//!
//! The priority of tag `T` for game `G` is `count(G, T) / max_count(G)`: the
//! most-assigned tag of every game scores exactly 1, an unassigned tag 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, GameId, TagId};
use crate::exec::{self, Execution};

pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum PriorityError {
    #[error("no positive priorities")]
    Empty,
    #[error("tag {0} does not occur in any game")]
    UnknownTag(TagId),
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("pair analysis needs two distinct tags, got {0} twice")]
    SameTag(TagId),
}

/// One stored entry. `index` is the tag index in a row, the game index in a
/// column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub count: u64,
    pub priority: f64,
}

/// Sparse game × tag priority matrix. Absent entries have priority 0.
#[derive(Clone, Debug)]
pub struct PriorityMatrix {
    games: Vec<GameId>,
    max_counts: Vec<u64>,
    tags: Vec<TagId>,
    tag_index: HashMap<TagId, usize>,
    rows: Vec<Vec<Cell>>,
    columns: Vec<Vec<Cell>>,
}

impl PriorityMatrix {
    pub fn n_games(&self) -> usize {
        self.games.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn games(&self) -> &[GameId] {
        &self.games
    }

    /// Tags in lexicographic order; positions are tag indices.
    pub fn tags(&self) -> &[TagId] {
        &self.tags
    }

    pub fn tag_index(&self, tag: &TagId) -> Option<usize> {
        self.tag_index.get(tag).copied()
    }

    pub fn row(&self, game: usize) -> &[Cell] {
        &self.rows[game]
    }

    pub fn column(&self, tag: usize) -> &[Cell] {
        &self.columns[tag]
    }

    pub fn max_count(&self, game: usize) -> u64 {
        self.max_counts[game]
    }

    /// Games in which the tag has positive priority.
    pub fn occurrence(&self, tag: usize) -> usize {
        self.columns[tag].len()
    }

    pub fn priority(&self, game: usize, tag: usize) -> f64 {
        self.rows[game]
            .binary_search_by_key(&tag, |c| c.index)
            .map(|i| self.rows[game][i].priority)
            .unwrap_or(0.0)
    }

    /// Total number of stored (positive) entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Histogram bin of a cell, computed from integer counts so bin edges are
    /// exact: `floor(bins * count / max)`, with priority 1 folded into the
    /// last bin.
    fn bin_of(&self, game: usize, count: u64, bins: usize) -> usize {
        let b = (count as u128 * bins as u128) / self.max_counts[game] as u128;
        (b as usize).min(bins - 1)
    }
}

/// Builds the matrix; rows follow corpus order, columns lexicographic tag
/// order. Zero counts are not stored.
pub fn priority_matrix(c: &Corpus) -> PriorityMatrix {
    let tags: Vec<TagId> = c.tags().iter().cloned().collect();
    let tag_index: HashMap<TagId, usize> = tags.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let mut rows = Vec::with_capacity(c.len());
    let mut columns = vec![Vec::new(); tags.len()];
    let mut max_counts = Vec::with_capacity(c.len());
    for (g, game) in c.games().iter().enumerate() {
        let max = game.max_count();
        max_counts.push(max);
        let mut row = Vec::with_capacity(game.tag_counts.len());
        // BTreeMap iteration is lexicographic, so rows come out sorted by index.
        for (tag, &count) in &game.tag_counts {
            if count == 0 {
                continue;
            }
            let t = tag_index[tag];
            let priority = count as f64 / max as f64;
            row.push(Cell { index: t, count, priority });
            columns[t].push(Cell { index: g, count, priority });
        }
        rows.push(row);
    }
    PriorityMatrix {
        games: c.games().iter().map(|g| g.game_id.clone()).collect(),
        max_counts,
        tags,
        tag_index,
        rows,
        columns,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of an ascending slice; the mean of the two middle values for
/// even lengths.
pub(crate) fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub(crate) fn population_std(xs: &[f64], mean: f64) -> f64 {
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Mean, median and std over every positive priority, pooled across games
/// and tags.
pub fn positive_priority_stats(m: &PriorityMatrix) -> Result<PriorityStats, PriorityError> {
    let mut all: Vec<f64> = m.rows.iter().flatten().map(|c| c.priority).collect();
    if all.is_empty() {
        return Err(PriorityError::Empty);
    }
    all.sort_by(f64::total_cmp);
    let mean = mean(&all);
    Ok(PriorityStats {
        n: all.len(),
        mean,
        median: median_sorted(&all),
        std: population_std(&all, mean),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub tag: TagId,
    pub n_games: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    /// Counts of equal-width bins over (0, 1].
    pub histogram: Vec<usize>,
    /// Left edge of the fullest bin; ties go to the higher bin.
    pub peak_priority: f64,
}

impl DistributionSummary {
    pub fn bins(&self) -> usize {
        self.histogram.len()
    }

    pub fn bin_left(&self, i: usize) -> f64 {
        i as f64 / self.histogram.len() as f64
    }
}

/// Distribution of a tag's positive priorities over the games it is
/// assigned to.
pub fn tag_distribution(m: &PriorityMatrix, tag: &TagId, bins: usize) -> Result<DistributionSummary, PriorityError> {
    if bins == 0 {
        return Err(PriorityError::ZeroBins);
    }
    let t = m
        .tag_index(tag)
        .filter(|&t| m.occurrence(t) > 0)
        .ok_or_else(|| PriorityError::UnknownTag(tag.clone()))?;
    Ok(distribution_at(m, t, bins))
}

fn distribution_at(m: &PriorityMatrix, t: usize, bins: usize) -> DistributionSummary {
    let col = m.column(t);
    let mut histogram = vec![0usize; bins];
    for c in col {
        histogram[m.bin_of(c.index, c.count, bins)] += 1;
    }
    let mut samples: Vec<f64> = col.iter().map(|c| c.priority).collect();
    samples.sort_by(f64::total_cmp);
    let mean = mean(&samples);
    let peak = histogram
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    DistributionSummary {
        tag: m.tags[t].clone(),
        n_games: samples.len(),
        min: samples[0],
        max: samples[samples.len() - 1],
        median: median_sorted(&samples),
        mean,
        std: population_std(&samples, mean),
        histogram,
        peak_priority: peak as f64 / bins as f64,
    }
}

/// Distributions of every tag that occurs at least once, in tag order.
pub fn tag_distributions(m: &PriorityMatrix, bins: usize, exec: Execution) -> Result<Vec<DistributionSummary>, PriorityError> {
    if bins == 0 {
        return Err(PriorityError::ZeroBins);
    }
    let present: Vec<usize> = (0..m.n_tags()).filter(|&t| m.occurrence(t) > 0).collect();
    Ok(exec::map_slice(exec, &present, |&t| distribution_at(m, t, bins)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub tag_a: TagId,
    pub tag_b: TagId,
    pub n_games: usize,
    /// `count(b) / count(a)` per qualifying game, in game order.
    pub ratios: Vec<f64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

/// Ratios `priority(b) / priority(a)` over games where both tags are
/// assigned and `a` has strictly more assigners than `b`.
pub fn pair_ratio_analysis(m: &PriorityMatrix, a: &TagId, b: &TagId) -> Result<RatioReport, PriorityError> {
    if a == b {
        return Err(PriorityError::SameTag(a.clone()));
    }
    let mut ratios = Vec::new();
    if let (Some(ia), Some(ib)) = (m.tag_index(a), m.tag_index(b)) {
        let (ca, cb) = (m.column(ia), m.column(ib));
        let (mut i, mut j) = (0, 0);
        while i < ca.len() && j < cb.len() {
            match ca[i].index.cmp(&cb[j].index) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if ca[i].count > cb[j].count {
                        ratios.push(cb[j].count as f64 / ca[i].count as f64);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    let (mean_v, median_v) = if ratios.is_empty() {
        (None, None)
    } else {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        (Some(mean(&ratios)), Some(median_sorted(&sorted)))
    };
    Ok(RatioReport {
        tag_a: a.clone(),
        tag_b: b.clone(),
        n_games: ratios.len(),
        ratios,
        mean: mean_v,
        median: median_v,
    })
}
