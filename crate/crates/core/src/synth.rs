//! Seeded synthetic corpora for tests, benches and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{parse_snapshot_json, Corpus, GameRecord, MAX_TAGS_PER_GAME};

/// Shape of a corpus with planted broad/narrow structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlantedSpec {
    pub broad: usize,
    pub narrow_per_broad: usize,
    /// Games carrying each broad/narrow pair.
    pub games_per_narrow: usize,
    /// Games carrying a broad tag without any of its narrow tags.
    pub broad_only_games: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            broad: 3,
            narrow_per_broad: 12,
            games_per_narrow: 6,
            broad_only_games: 20,
        }
    }
}

pub fn broad_tag(g: usize) -> String {
    format!("Broad {g}")
}

pub fn narrow_tag(g: usize, j: usize) -> String {
    format!("Narrow {g}.{j:02}")
}

pub fn filler_tag(g: usize) -> String {
    format!("Filler {g}")
}

/// Each narrow tag appears only next to its broad tag, which is the top tag
/// of those games. Broad-only games put the broad tag below a per-group
/// filler tag so broad priorities vary.
pub fn planted_corpus(spec: &PlantedSpec, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut games = Vec::new();
    let mut id = 0u64;
    for g in 0..spec.broad {
        for j in 0..spec.narrow_per_broad {
            for _ in 0..spec.games_per_narrow {
                games.push(
                    GameRecord::new(id, format!("planted {id}"))
                        .with_tag(broad_tag(g), 100)
                        .with_tag(narrow_tag(g, j), rng.gen_range(30..=90)),
                );
                id += 1;
            }
        }
        for _ in 0..spec.broad_only_games {
            games.push(
                GameRecord::new(id, format!("planted {id}"))
                    .with_tag(broad_tag(g), rng.gen_range(30..=90))
                    .with_tag(filler_tag(g), 100),
            );
            id += 1;
        }
    }
    Corpus::new(games).expect("ids are unique")
}

/// `n_games` games drawing up to 20 tags from `n_tags`, with a Zipf-like
/// preference for low tag indices and heavy-tailed counts.
pub fn random_corpus(n_games: usize, n_tags: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tags = n_tags.max(1);
    let weights: Vec<f64> = (1..=n_tags).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let games = (0..n_games)
        .map(|i| {
            let k = rng.gen_range(1..=MAX_TAGS_PER_GAME.min(n_tags));
            let mut g = GameRecord::new(i as u64, format!("game {i}"));
            while g.tag_counts.len() < k {
                let mut x = rng.gen::<f64>() * total;
                let mut t = 0;
                while t + 1 < n_tags && x >= weights[t] {
                    x -= weights[t];
                    t += 1;
                }
                let count = (1000.0 * rng.gen::<f64>().powi(3)) as u64 + 1;
                g = g.with_tag(format!("tag{t:04}"), count);
            }
            g
        })
        .collect();
    Corpus::new(games).expect("ids are unique")
}

pub const TINY_FIXTURE: &str = include_str!("../data/tiny12.json");

/// The bundled 12-game fixture.
pub fn tiny_corpus() -> Corpus {
    Corpus::new(parse_snapshot_json(TINY_FIXTURE.as_bytes()).expect("bundled fixture parses")).expect("bundled fixture is valid")
}
