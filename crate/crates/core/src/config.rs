//! Flat TOML configuration for the whole pipeline.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CleanOptions, TagId, DEFAULT_MIN_PLAYERS, MAX_TAGS_PER_GAME};
use crate::meronomy::{CorrelationMode, DEFAULT_GLOBAL_MIN, DEFAULT_INDEGREE_MIN, DEFAULT_MERONOMY_LOCAL_MIN};
use crate::priority::DEFAULT_BINS;
use crate::synonymy::{SynonymOptions, DEFAULT_CROSS_TAXON_KEEP, DEFAULT_EXACT_BUDGET, DEFAULT_SYNONYM_EXCLUDED, DEFAULT_SYNONYM_LOCAL_MIN};
use crate::taxonomy::{CuratedLists, TaxaThresholds, TaxonomyError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Every key is optional; absent keys take the defaults below. Unknown keys
/// are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub low_median_max: f64,
    pub high_median_min: f64,
    pub high_peak_min: f64,
    pub min_genre_games: usize,
    pub bins: usize,
    pub non_game_tags: BTreeSet<TagId>,
    pub misc_tags: BTreeSet<TagId>,
    pub medium_genre_overrides: BTreeSet<TagId>,
    pub global_min: f64,
    pub meronomy_local_min: f64,
    pub synonym_local_min: f64,
    pub indegree_min: usize,
    /// Tags removed before synonym detection, in addition to capital tags.
    pub synonym_excluded: BTreeSet<TagId>,
    /// `"From -> To"` edges kept although they cross taxa.
    pub cross_taxon_keep: Vec<String>,
    pub exact_budget: usize,
    pub cache_dir: Option<PathBuf>,
    /// `0` disables the assigner floor (zero counts are still dropped).
    pub min_players: u64,
    pub max_tags: usize,
    pub coverage_extend: usize,
    pub correlation_mode: CorrelationMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let th = TaxaThresholds::default();
        let cl = CuratedLists::default();
        PipelineConfig {
            low_median_max: th.low_median_max,
            high_median_min: th.high_median_min,
            high_peak_min: th.high_peak_min,
            min_genre_games: th.min_genre_games,
            bins: DEFAULT_BINS,
            non_game_tags: cl.non_game_tags,
            misc_tags: cl.misc_tags,
            medium_genre_overrides: cl.medium_genre_overrides,
            global_min: DEFAULT_GLOBAL_MIN,
            meronomy_local_min: DEFAULT_MERONOMY_LOCAL_MIN,
            synonym_local_min: DEFAULT_SYNONYM_LOCAL_MIN,
            indegree_min: DEFAULT_INDEGREE_MIN,
            synonym_excluded: DEFAULT_SYNONYM_EXCLUDED.iter().map(|&t| t.into()).collect(),
            cross_taxon_keep: DEFAULT_CROSS_TAXON_KEEP.iter().map(|(a, b)| format!("{a} -> {b}")).collect(),
            exact_budget: DEFAULT_EXACT_BUDGET,
            cache_dir: None,
            min_players: DEFAULT_MIN_PLAYERS,
            max_tags: MAX_TAGS_PER_GAME,
            coverage_extend: 6,
            correlation_mode: CorrelationMode::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Loads `path` when given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.thresholds().validate()?;
        self.curated().validate()?;
        if self.bins == 0 {
            return Err(ConfigError::Invalid("bins must be positive".into()));
        }
        if self.max_tags == 0 {
            return Err(ConfigError::Invalid("max_tags must be positive".into()));
        }
        for r in [self.global_min, self.meronomy_local_min, self.synonym_local_min] {
            if !(-1.0..=1.0).contains(&r) {
                return Err(ConfigError::Invalid(format!("correlation minimum {r} outside [-1, 1]")));
            }
        }
        self.keep_pairs()?;
        Ok(())
    }

    pub fn thresholds(&self) -> TaxaThresholds {
        TaxaThresholds {
            low_median_max: self.low_median_max,
            high_median_min: self.high_median_min,
            high_peak_min: self.high_peak_min,
            min_genre_games: self.min_genre_games,
        }
    }

    pub fn curated(&self) -> CuratedLists {
        CuratedLists {
            non_game_tags: self.non_game_tags.clone(),
            misc_tags: self.misc_tags.clone(),
            medium_genre_overrides: self.medium_genre_overrides.clone(),
        }
    }

    pub fn clean_options(&self) -> CleanOptions {
        CleanOptions {
            min_players: (self.min_players > 0).then_some(self.min_players),
            max_tags: self.max_tags,
        }
    }

    fn keep_pairs(&self) -> Result<BTreeSet<(TagId, TagId)>, ConfigError> {
        self.cross_taxon_keep
            .iter()
            .map(|s| {
                let (a, b) = s
                    .split_once("->")
                    .ok_or_else(|| ConfigError::Invalid(format!("cross_taxon_keep entry {s:?} is not \"A -> B\"")))?;
                Ok((a.trim().into(), b.trim().into()))
            })
            .collect()
    }

    pub fn synonym_options(&self) -> SynonymOptions {
        SynonymOptions {
            exact_budget: self.exact_budget,
            cross_taxon_keep: self.keep_pairs().unwrap_or_default(),
        }
    }
}
