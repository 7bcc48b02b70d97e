//! High / Medium / Low priority taxa and the sub-taxa of High tags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, TagId};
use crate::exec::Execution;
use crate::priority::{tag_distributions, PriorityError, PriorityMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
    #[error("curated lists overlap on {0}")]
    Overlap(TagId),
    #[error(transparent)]
    Priority(#[from] PriorityError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Taxon {
    Low,
    Medium,
    High,
}

impl fmt::Display for Taxon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Taxon::Low => "Low",
            Taxon::Medium => "Medium",
            Taxon::High => "High",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HighSubtaxon {
    Genre,
    TooFewGames,
    NonGame,
    Misc,
}

impl fmt::Display for HighSubtaxon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HighSubtaxon::Genre => "Genre",
            HighSubtaxon::TooFewGames => "TooFewGames",
            HighSubtaxon::NonGame => "NonGame",
            HighSubtaxon::Misc => "Misc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxaThresholds {
    pub low_median_max: f64,
    pub high_median_min: f64,
    pub high_peak_min: f64,
    pub min_genre_games: usize,
}

impl Default for TaxaThresholds {
    fn default() -> Self {
        TaxaThresholds {
            low_median_max: 0.45,
            high_median_min: 0.574803,
            high_peak_min: 0.765644,
            min_genre_games: 100,
        }
    }
}

impl TaxaThresholds {
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let ok = 0.0 < self.low_median_max
            && self.low_median_max < self.high_median_min
            && self.high_median_min < 1.0
            && 0.0 < self.high_peak_min
            && self.high_peak_min < 1.0
            && self.min_genre_games >= 1;
        if ok {
            Ok(())
        } else {
            Err(TaxonomyError::Thresholds(format!("{self:?}")))
        }
    }

    /// Low is `median <= low_median_max`; High needs both `median >=
    /// high_median_min` and `peak >= high_peak_min`.
    pub fn classify(&self, median: f64, peak: f64) -> Taxon {
        if median <= self.low_median_max {
            Taxon::Low
        } else if median >= self.high_median_min && peak >= self.high_peak_min {
            Taxon::High
        } else {
            Taxon::Medium
        }
    }
}

fn tag_set(names: &[&str]) -> BTreeSet<TagId> {
    names.iter().map(|&n| TagId::from(n)).collect()
}

pub const DEFAULT_NON_GAME_TAGS: &[&str] = &[
    "Utilities",
    "Audio Production",
    "Video Production",
    "Animation & Modeling",
    "Design & Illustration",
    "Photo Editing",
    "Software Training",
    "Web Publishing",
    "Game Development",
    "Programming",
];

pub const DEFAULT_MISC_TAGS: &[&str] = &[
    "Free to Play",
    "Indie",
    "Early Access",
    "Massively Multiplayer",
    "e-sports",
    "Sexual Content",
    "Nudity",
    "LGBTQ+",
    "Dinosaurs",
    "Mechs",
    "Cats",
    "Experimental",
    "Noir",
    "Lovecraftian",
    "Western",
];

/// Medium-taxon tags that are still genres.
pub const DEFAULT_MEDIUM_GENRE_OVERRIDES: &[&str] = &[
    "FPS",
    "Shooter",
    "Fighting",
    "Stealth",
    "Hack and Slash",
    "Survival",
    "Survival Horror",
    "Horror",
    "MOBA",
    "4X",
    "RTS",
    "Grand Strategy",
    "Trading Card Game",
    "Match 3",
    "Hidden Object",
    "MMORPG",
];

/// Hand-curated tag lists. Whether a tag is gameplay-related is a human call,
/// so these are data rather than rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedLists {
    pub non_game_tags: BTreeSet<TagId>,
    pub misc_tags: BTreeSet<TagId>,
    pub medium_genre_overrides: BTreeSet<TagId>,
}

impl Default for CuratedLists {
    fn default() -> Self {
        CuratedLists {
            non_game_tags: tag_set(DEFAULT_NON_GAME_TAGS),
            misc_tags: tag_set(DEFAULT_MISC_TAGS),
            medium_genre_overrides: tag_set(DEFAULT_MEDIUM_GENRE_OVERRIDES),
        }
    }
}

impl CuratedLists {
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let lists = [&self.non_game_tags, &self.misc_tags, &self.medium_genre_overrides];
        for (i, a) in lists.iter().enumerate() {
            for b in &lists[i + 1..] {
                if let Some(t) = a.intersection(b).next() {
                    return Err(TaxonomyError::Overlap(t.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxonEntry {
    pub taxon: Taxon,
    pub subtaxon: Option<HighSubtaxon>,
    pub median: f64,
    pub peak: f64,
    pub n_games: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaxonAssignment {
    entries: BTreeMap<TagId, TaxonEntry>,
    /// Non-fatal issues, e.g. curated tags missing from the corpus.
    pub warnings: Vec<String>,
}

impl TaxonAssignment {
    pub fn entries(&self) -> &BTreeMap<TagId, TaxonEntry> {
        &self.entries
    }

    pub fn get(&self, tag: &TagId) -> Option<&TaxonEntry> {
        self.entries.get(tag)
    }

    pub fn taxon(&self, tag: &TagId) -> Option<Taxon> {
        self.entries.get(tag).map(|e| e.taxon)
    }

    pub fn subtaxon(&self, tag: &TagId) -> Option<HighSubtaxon> {
        self.entries.get(tag).and_then(|e| e.subtaxon)
    }

    pub fn members(&self, taxon: Taxon) -> impl Iterator<Item = &TagId> {
        self.entries.iter().filter(move |(_, e)| e.taxon == taxon).map(|(t, _)| t)
    }

    pub fn count(&self, taxon: Taxon) -> usize {
        self.members(taxon).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn classify_taxa(m: &PriorityMatrix, th: &TaxaThresholds, bins: usize) -> Result<TaxonAssignment, TaxonomyError> {
    classify_taxa_with(m, th, bins, Execution::default())
}

/// Classifies every tag that occurs in the matrix from its priority median
/// and histogram peak. Sub-taxa are left empty.
pub fn classify_taxa_with(
    m: &PriorityMatrix,
    th: &TaxaThresholds,
    bins: usize,
    exec: Execution,
) -> Result<TaxonAssignment, TaxonomyError> {
    th.validate()?;
    let entries = tag_distributions(m, bins, exec)?
        .into_iter()
        .map(|d| {
            let entry = TaxonEntry {
                taxon: th.classify(d.median, d.peak_priority),
                subtaxon: None,
                median: d.median,
                peak: d.peak_priority,
                n_games: d.n_games,
            };
            (d.tag, entry)
        })
        .collect();
    Ok(TaxonAssignment {
        entries,
        warnings: Vec::new(),
    })
}

/// Fills the High sub-taxa. Precedence: NonGame, then TooFewGames, then Misc,
/// then Genre for everything left.
pub fn subdivide_high(ta: &TaxonAssignment, c: &Corpus, cl: &CuratedLists, th: &TaxaThresholds) -> TaxonAssignment {
    let occurrences = c.occurrences();
    let mut out = ta.clone();
    let missing: BTreeSet<&TagId> = [&cl.non_game_tags, &cl.misc_tags, &cl.medium_genre_overrides]
        .into_iter()
        .flatten()
        .filter(|t| !c.tags().contains(*t))
        .collect();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|t| t.as_str()).collect();
        let w = format!("{} curated tags do not occur in the corpus: {}", names.len(), names.join(", "));
        log::warn!("{w}");
        out.warnings.push(w);
    }
    for (tag, entry) in out.entries.iter_mut() {
        entry.subtaxon = (entry.taxon == Taxon::High).then(|| {
            if cl.non_game_tags.contains(tag) {
                HighSubtaxon::NonGame
            } else if occurrences.get(tag).copied().unwrap_or(0) < th.min_genre_games {
                HighSubtaxon::TooFewGames
            } else if cl.misc_tags.contains(tag) {
                HighSubtaxon::Misc
            } else {
                HighSubtaxon::Genre
            }
        });
    }
    out
}

/// High/Genre tags plus the Medium-genre overrides present in the
/// assignment, sorted.
pub fn genre_list(ta: &TaxonAssignment, cl: &CuratedLists) -> Vec<TagId> {
    let mut genres: BTreeSet<TagId> = ta
        .entries
        .iter()
        .filter(|(_, e)| e.subtaxon == Some(HighSubtaxon::Genre))
        .map(|(t, _)| t.clone())
        .collect();
    genres.extend(cl.medium_genre_overrides.iter().filter(|t| ta.entries.contains_key(*t)).cloned());
    genres.into_iter().collect()
}

/// Tags whose High/Medium status differs between two histogram resolutions.
pub fn bin_sensitive_tags(
    m: &PriorityMatrix,
    th: &TaxaThresholds,
    coarse_bins: usize,
    fine_bins: usize,
) -> Result<Vec<TagId>, TaxonomyError> {
    let coarse = classify_taxa(m, th, coarse_bins)?;
    let fine = classify_taxa(m, th, fine_bins)?;
    Ok(coarse
        .entries
        .iter()
        .filter(|(t, e)| fine.entries[*t].taxon != e.taxon)
        .map(|(t, _)| t.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GameRecord;
    use crate::priority::priority_matrix;
    use proptest::prelude::*;

    /// One game per sample: the tag at `count / 1_000_000` next to a filler
    /// max tag (omitted when the sample is exactly 1).
    fn corpus_with_samples(tag: &str, samples: &[u64]) -> Corpus {
        let games = samples
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let g = GameRecord::new(i as u64, "").with_tag(tag, c);
                if c < 1_000_000 {
                    g.with_tag("Filler", 1_000_000)
                } else {
                    g
                }
            })
            .collect();
        Corpus::new(games).unwrap()
    }

    fn classify_one(tag: &str, samples: &[u64]) -> Taxon {
        let m = priority_matrix(&corpus_with_samples(tag, samples));
        classify_taxa(&m, &TaxaThresholds::default(), 100).unwrap().taxon(&tag.into()).unwrap()
    }

    #[test]
    fn all_ones_is_high() {
        assert_eq!(classify_one("T", &[1_000_000; 4]), Taxon::High);
    }

    #[test]
    fn all_point_three_is_low() {
        assert_eq!(classify_one("T", &[300_000; 4]), Taxon::Low);
    }

    #[test]
    fn median_boundaries_are_inclusive() {
        // Median exactly 0.574803, peak bin 0.80.
        assert_eq!(classify_one("T", &[100_000, 200_000, 574_803, 800_000, 800_000]), Taxon::High);
        // Median exactly 0.45.
        assert_eq!(classify_one("T", &[450_000, 450_000, 900_000]), Taxon::Low);
        // High median but the peak bin 0.76 is below 0.765644.
        assert_eq!(classify_one("T", &[760_000, 760_000, 1_000_000]), Taxon::Medium);
        // Peak bin 0.77 passes.
        assert_eq!(classify_one("T", &[770_000, 770_000, 1_000_000]), Taxon::High);
    }

    #[test]
    fn thresholds_are_validated() {
        let bad = TaxaThresholds {
            low_median_max: 0.6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(TaxaThresholds::default().validate().is_ok());
    }

    #[test]
    fn default_lists_are_disjoint_and_sized() {
        let cl = CuratedLists::default();
        cl.validate().unwrap();
        assert_eq!(cl.non_game_tags.len(), 10);
        assert_eq!(cl.misc_tags.len(), 15);
        assert_eq!(cl.medium_genre_overrides.len(), 16);
        let mut overlapping = cl.clone();
        overlapping.misc_tags.insert("Utilities".into());
        assert!(overlapping.validate().is_err());
    }

    fn high_corpus(tags: &[(&str, usize)]) -> Corpus {
        let mut games = Vec::new();
        for (tag, n) in tags {
            for _ in 0..*n {
                games.push(GameRecord::new(games.len() as u64, "").with_tag(*tag, 50));
            }
        }
        Corpus::new(games).unwrap()
    }

    #[test]
    fn subtaxa_follow_precedence() {
        let c = high_corpus(&[("Utilities", 3), ("RPG", 120), ("Indie", 150), ("Indie Rare", 99), ("Programming", 200)]);
        let m = priority_matrix(&c);
        let th = TaxaThresholds::default();
        let ta = classify_taxa(&m, &th, 100).unwrap();
        let cl = CuratedLists::default();
        let ta = subdivide_high(&ta, &c, &cl, &th);
        assert_eq!(ta.subtaxon(&"Utilities".into()), Some(HighSubtaxon::NonGame));
        assert_eq!(ta.subtaxon(&"Indie Rare".into()), Some(HighSubtaxon::TooFewGames));
        assert_eq!(ta.subtaxon(&"RPG".into()), Some(HighSubtaxon::Genre));
        assert_eq!(ta.subtaxon(&"Indie".into()), Some(HighSubtaxon::Misc));
        assert!(!ta.warnings.is_empty());
        let genres = genre_list(&ta, &cl);
        assert_eq!(genres, vec![TagId::from("RPG")]);
        assert!(!genres.contains(&"Programming".into()));
    }

    #[test]
    fn medium_override_enters_genre_list() {
        let mut games = Vec::new();
        for i in 0..4u64 {
            games.push(GameRecord::new(i, "").with_tag("MOBA", 48).with_tag("Multiplayer", 100));
        }
        let c = Corpus::new(games).unwrap();
        let th = TaxaThresholds::default();
        let ta = classify_taxa(&priority_matrix(&c), &th, 100).unwrap();
        assert_eq!(ta.taxon(&"MOBA".into()), Some(Taxon::Medium));
        let cl = CuratedLists::default();
        let ta = subdivide_high(&ta, &c, &cl, &th);
        assert!(genre_list(&ta, &cl).contains(&"MOBA".into()));
    }

    #[test]
    fn parallel_classification_matches_sequential() {
        let c = crate::synth::planted_corpus(&crate::synth::PlantedSpec::default(), 7);
        let m = priority_matrix(&c);
        let th = TaxaThresholds::default();
        let a = classify_taxa_with(&m, &th, 100, Execution::Sequential).unwrap();
        let b = classify_taxa_with(&m, &th, 100, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn partition_and_monotonicity(samples in prop::collection::vec((0u8..6, 1u64..=100), 1..40), bump in 0.0f64..0.1) {
            let games = samples.chunks(3).enumerate().map(|(i, chunk)| {
                chunk.iter().fold(GameRecord::new(i as u64, ""), |g, &(t, n)| g.with_tag(format!("t{t}"), n))
            }).collect();
            let c = Corpus::new(games).unwrap();
            let m = priority_matrix(&c);
            let th = TaxaThresholds::default();
            let ta = classify_taxa(&m, &th, 100).unwrap();
            prop_assert_eq!(ta.count(Taxon::Low) + ta.count(Taxon::Medium) + ta.count(Taxon::High), c.tags().len());

            let wider_low = TaxaThresholds { low_median_max: th.low_median_max + bump * 0.5, ..th };
            let lw = classify_taxa(&m, &wider_low, 100).unwrap();
            prop_assert!(ta.members(Taxon::Low).all(|t| lw.taxon(t) == Some(Taxon::Low)));

            let stricter_high = TaxaThresholds { high_median_min: (th.high_median_min + bump).min(0.99), ..th };
            let sh = classify_taxa(&m, &stricter_high, 100).unwrap();
            prop_assert!(sh.members(Taxon::High).all(|t| ta.taxon(t) == Some(Taxon::High)));

            let cl = CuratedLists::default();
            let sub = subdivide_high(&ta, &c, &cl, &th);
            for e in sub.entries().values() {
                prop_assert_eq!(e.subtaxon.is_some(), e.taxon == Taxon::High);
            }
        }
    }
}
