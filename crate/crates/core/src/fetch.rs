//! Rate-limited, cached download of paged snapshot files.
//!
//! Each page is stored verbatim as `page-NNNNN.json` in the cache directory.
//! A cached page is never requested again; refreshing requires
//! [`purge_cache`].

use std::fs;
use std::io::Read;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

pub const CACHE_ENV: &str = "TAGTAXA_CACHE";
pub const DEFAULT_CACHE_DIR: &str = ".tagtaxa-cache";
pub const DEFAULT_ENDPOINT: &str = "https://steamspy.com/api.php?request=all&page={page}";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("page {page}: request failed after {attempts} attempts: {last}")]
    Http { page: u32, attempts: u32, last: String },
    #[error("endpoint {0:?} has no {{page}} placeholder")]
    Endpoint(String),
    #[error("invalid page range {0:?} (expected A..B)")]
    Range(String),
    #[error("cache i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Minimal blocking GET used by the fetcher.
pub trait HttpClient {
    fn get(&self, url: &str) -> Result<Vec<u8>, String>;
}

/// `ureq`-backed client. Non-2xx statuses are failures.
pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        UreqClient { agent }
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        UreqClient::new(Duration::from_secs(60))
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &str) -> Result<Vec<u8>, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let mut body = Vec::new();
        resp.body_mut()
            .as_reader()
            .read_to_end(&mut body)
            .map_err(|e| e.to_string())?;
        Ok(body)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FetchOptions {
    /// Minimum spacing between two outgoing requests.
    pub delay: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            delay: Duration::from_secs(1),
            retries: 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FetchReport {
    /// Every outgoing request as `(page, attempt)`, in order.
    pub requests: Vec<(u32, u32)>,
    pub cached: Vec<u32>,
    pub written: Vec<PathBuf>,
}

pub fn page_path(cache_dir: &Path, page: u32) -> PathBuf {
    cache_dir.join(format!("page-{page:05}.json"))
}

/// Parses `A..B` (half-open) or `A..=B`.
pub fn parse_page_range(s: &str) -> Result<Range<u32>, FetchError> {
    let bad = || FetchError::Range(s.to_owned());
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(bad());
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    Ok(if inclusive { a..b.saturating_add(1) } else { a..b })
}

/// Explicit directory first, then `TAGTAXA_CACHE`, then the configured one,
/// then [`DEFAULT_CACHE_DIR`].
pub fn resolve_cache_dir(explicit: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(env) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    configured
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

pub fn fetch_snapshot(
    endpoint: &str,
    pages: Range<u32>,
    cache_dir: &Path,
    opts: FetchOptions,
) -> Result<FetchReport, FetchError> {
    fetch_snapshot_with(&UreqClient::default(), endpoint, pages, cache_dir, opts)
}

/// Downloads every uncached page of `pages`, sequentially. On failure the
/// pages written so far stay in the cache.
pub fn fetch_snapshot_with(
    client: &dyn HttpClient,
    endpoint: &str,
    pages: Range<u32>,
    cache_dir: &Path,
    opts: FetchOptions,
) -> Result<FetchReport, FetchError> {
    if !endpoint.contains("{page}") {
        return Err(FetchError::Endpoint(endpoint.to_owned()));
    }
    let mut report = FetchReport::default();
    if pages.is_empty() {
        return Ok(report);
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FetchError::Io { path, source }
    };
    fs::create_dir_all(cache_dir).map_err(io(cache_dir))?;
    let mut last_request: Option<Instant> = None;
    for page in pages {
        let path = page_path(cache_dir, page);
        if path.exists() {
            report.cached.push(page);
            continue;
        }
        let url = endpoint.replace("{page}", &page.to_string());
        let attempts = opts.retries + 1;
        let mut body = None;
        let mut last_err = String::new();
        for attempt in 1..=attempts {
            if let Some(t) = last_request {
                let elapsed = t.elapsed();
                if elapsed < opts.delay {
                    thread::sleep(opts.delay - elapsed);
                }
            }
            last_request = Some(Instant::now());
            report.requests.push((page, attempt));
            match client.get(&url) {
                Ok(b) => {
                    body = Some(b);
                    break;
                }
                Err(e) => {
                    log::warn!("page {page} attempt {attempt}/{attempts}: {e}");
                    last_err = e;
                }
            }
        }
        let Some(body) = body else {
            return Err(FetchError::Http {
                page,
                attempts,
                last: last_err,
            });
        };
        let tmp = path.with_extension("json.partial");
        fs::write(&tmp, &body).map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))?;
        report.written.push(path);
    }
    Ok(report)
}

/// Removes every cached page file. Returns how many were deleted.
pub fn purge_cache(cache_dir: &Path) -> Result<usize, FetchError> {
    let mut removed = 0;
    let Ok(entries) = fs::read_dir(cache_dir) else {
        return Ok(0);
    };
    for entry in entries.flatten() {
        let p = entry.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("page-") && name.ends_with(".json") {
            fs::remove_file(&p).map_err(|source| FetchError::Io { path: p.clone(), source })?;
            removed += 1;
        }
    }
    Ok(removed)
}
