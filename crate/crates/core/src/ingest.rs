//! Corpus acquisition: code-host search and local directory walks.
//!
//! Both paths produce [`SourceUnit`] records with deterministic ids so that
//! every later stage can be re-run and diffed byte-for-byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CompletedPage, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Cobol,
    Java,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    CodeHost,
    Local,
    Synthetic,
}

impl Origin {
    fn tag(self) -> &'static str {
        match self {
            Origin::CodeHost => "code_host",
            Origin::Local => "local",
            Origin::Synthetic => "synthetic",
        }
    }
}

/// Repository-level metadata attached to units that came from a code host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMeta {
    pub repo: String,
    pub archived: bool,
    pub fork: bool,
}

/// One source file moving through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub id: String,
    pub origin: Origin,
    pub repo_meta: Option<RepoMeta>,
    pub path: String,
    pub language: Language,
    pub content: String,
    pub line_count: u64,
    #[serde(default)]
    pub had_decode_errors: bool,
}

impl SourceUnit {
    /// Builds a unit with a content-derived id. The id is a pure function of
    /// (origin, path, content), so re-ingesting identical data yields
    /// identical records.
    pub fn new(
        origin: Origin,
        repo_meta: Option<RepoMeta>,
        path: impl Into<String>,
        language: Language,
        content: impl Into<String>,
        had_decode_errors: bool,
    ) -> Self {
        let path = path.into();
        let content = content.into();
        let id = unit_id(origin, &path, &content);
        let line_count = content.lines().count() as u64;
        SourceUnit {
            id,
            origin,
            repo_meta,
            path,
            language,
            content,
            line_count,
            had_decode_errors,
        }
    }

    /// Convenience constructor for generated code that never touched disk.
    pub fn synthetic(path: impl Into<String>, language: Language, content: impl Into<String>) -> Self {
        SourceUnit::new(Origin::Synthetic, None, path, language, content, false)
    }
}

fn unit_id(origin: Origin, path: &str, content: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(origin.tag().as_bytes());
    hasher.update([0u8]);
    hasher.update(path.as_bytes());
    hasher.update([0u8]);
    hasher.update(content.as_bytes());
    let digest = hasher.finalize();
    hex::encode(&digest[..16])
}

/// Maps a file extension (without dot) to the language tag used downstream.
pub fn language_for_extension(ext: &str) -> Language {
    match ext.to_ascii_lowercase().as_str() {
        "cbl" | "cob" | "cobol" | "cpy" => Language::Cobol,
        "java" => Language::Java,
        _ => Language::Text,
    }
}

// ---------------------------------------------------------------------------
// Code-host search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub keyword: String,
    pub extension: String,
    /// 1-based page number.
    pub page: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub repo: String,
    pub path: String,
    pub content: String,
    pub archived: bool,
    pub fork: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchPage {
    pub hits: Vec<SearchHit>,
    pub has_next: bool,
}

/// A paged code-search backend. Implementations must be safe to call
/// repeatedly with the same query (retries re-issue requests verbatim).
pub trait CodeHost: Send + Sync {
    fn search_page(&self, query: &SearchQuery) -> Result<SearchPage>;
}

/// Retry/backoff policy for search requests.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub max_retries: u32,
    pub backoff_base: Duration,
    /// Hard cap on pages fetched per (keyword, extension) pair.
    pub max_pages: u32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            max_pages: 100,
        }
    }
}

/// Runs the full keyword x extension search matrix and converts hits into
/// source units.
///
/// Transient failures are retried with exponential backoff; once retries are
/// exhausted the error reports every page that had already completed, so a
/// caller can resume rather than start over. Results are ordered by
/// (repo, path) and deduplicated by id.
pub fn search_code_host(
    keywords: &[String],
    extensions: &[String],
    client: &dyn CodeHost,
    options: &SearchOptions,
) -> Result<Vec<SourceUnit>> {
    let mut completed: Vec<CompletedPage> = Vec::new();
    let mut units: BTreeMap<String, SourceUnit> = BTreeMap::new();

    for keyword in keywords {
        for extension in extensions {
            let mut page = 1u32;
            loop {
                let query = SearchQuery {
                    keyword: keyword.clone(),
                    extension: extension.clone(),
                    page,
                };
                let result = fetch_with_retry(client, &query, options);
                let page_data = match result {
                    Ok(p) => p,
                    Err(err) => {
                        return Err(Error::PartialIngest {
                            completed,
                            detail: format!("{query:?} failed: {err}"),
                        });
                    }
                };
                for hit in &page_data.hits {
                    let unit = hit_to_unit(hit);
                    units.entry(unit.id.clone()).or_insert(unit);
                }
                completed.push(CompletedPage {
                    keyword: keyword.clone(),
                    extension: extension.clone(),
                    page,
                });
                if !page_data.has_next || page >= options.max_pages {
                    break;
                }
                page += 1;
            }
        }
    }

    let mut out: Vec<SourceUnit> = units.into_values().collect();
    out.sort_by(|a, b| {
        let ka = (a.repo_meta.as_ref().map(|m| m.repo.as_str()).unwrap_or(""), a.path.as_str());
        let kb = (b.repo_meta.as_ref().map(|m| m.repo.as_str()).unwrap_or(""), b.path.as_str());
        ka.cmp(&kb)
    });
    Ok(out)
}

fn fetch_with_retry(
    client: &dyn CodeHost,
    query: &SearchQuery,
    options: &SearchOptions,
) -> Result<SearchPage> {
    let mut attempt = 0u32;
    loop {
        match client.search_page(query) {
            Ok(page) => return Ok(page),
            Err(err) => {
                if attempt >= options.max_retries {
                    return Err(err);
                }
                let wait = options.backoff_base.saturating_mul(1u32 << attempt.min(16));
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
                attempt += 1;
            }
        }
    }
}

fn hit_to_unit(hit: &SearchHit) -> SourceUnit {
    let ext = Path::new(&hit.path)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("");
    let language = language_for_extension(ext);
    let path = format!("{}/{}", hit.repo, hit.path);
    SourceUnit::new(
        Origin::CodeHost,
        Some(RepoMeta {
            repo: hit.repo.clone(),
            archived: hit.archived,
            fork: hit.fork,
        }),
        path,
        language,
        hit.content.clone(),
        false,
    )
}

/// Drops units whose repository is archived or a fork. Units without
/// repository metadata pass through untouched. Order-preserving and
/// idempotent.
pub fn exclude_repos(units: impl IntoIterator<Item = SourceUnit>) -> Vec<SourceUnit> {
    units
        .into_iter()
        .filter(|u| match &u.repo_meta {
            Some(meta) => !meta.archived && !meta.fork,
            None => true,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// HTTP client, rate limiting, response cache
// ---------------------------------------------------------------------------

/// Simple blocking token bucket. `rate_per_sec` tokens accrue per second up
/// to `burst`; `acquire` sleeps until a token is available.
pub struct RateLimiter {
    state: Mutex<BucketState>,
    rate_per_sec: f64,
    burst: f64,
}

struct BucketState {
    tokens: f64,
    last: Instant,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64, burst: f64) -> Self {
        RateLimiter {
            state: Mutex::new(BucketState {
                tokens: burst,
                last: Instant::now(),
            }),
            rate_per_sec: rate_per_sec.max(0.001),
            burst: burst.max(1.0),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(st.last).as_secs_f64();
                st.tokens = (st.tokens + elapsed * self.rate_per_sec).min(self.burst);
                st.last = now;
                if st.tokens >= 1.0 {
                    st.tokens -= 1.0;
                    None
                } else {
                    Some(Duration::from_secs_f64((1.0 - st.tokens) / self.rate_per_sec))
                }
            };
            match wait {
                None => return,
                Some(d) => std::thread::sleep(d),
            }
        }
    }
}

/// REST-backed code host. Expects a search endpoint at
/// `{base_url}/search/code?q=<keyword>+extension:<ext>&page=<n>` returning a
/// JSON body deserializable as [`SearchPage`]. The bearer token is read from
/// `LEGACYFORGE_HOST_TOKEN`.
pub struct HttpCodeHost {
    base_url: String,
    client: reqwest::blocking::Client,
    limiter: RateLimiter,
}

pub const HOST_TOKEN_ENV: &str = "LEGACYFORGE_HOST_TOKEN";

impl HttpCodeHost {
    pub fn new(base_url: impl Into<String>, rate_per_sec: f64) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()?;
        Ok(HttpCodeHost {
            base_url: base_url.into(),
            client,
            limiter: RateLimiter::new(rate_per_sec, 1.0),
        })
    }
}

impl CodeHost for HttpCodeHost {
    fn search_page(&self, query: &SearchQuery) -> Result<SearchPage> {
        self.limiter.acquire();
        let url = format!(
            "{}/search/code?q={}+extension:{}&page={}",
            self.base_url.trim_end_matches('/'),
            query.keyword,
            query.extension,
            query.page
        );
        let mut req = self.client.get(&url);
        if let Ok(token) = std::env::var(HOST_TOKEN_ENV) {
            req = req.bearer_auth(token);
        }
        let resp = req.send()?;
        if !resp.status().is_success() {
            return Err(Error::Provider {
                provider: "code_host".into(),
                detail: format!("status {} for {url}", resp.status()),
            });
        }
        Ok(resp.json::<SearchPage>()?)
    }
}

/// Content-addressed on-disk cache wrapped around any [`CodeHost`]. The cache
/// key is a hash of the query, so replays hit disk instead of the network.
pub struct CachedCodeHost<H> {
    inner: H,
    dir: PathBuf,
}

impl<H: CodeHost> CachedCodeHost<H> {
    pub fn new(inner: H, dir: impl Into<PathBuf>) -> Self {
        CachedCodeHost {
            inner,
            dir: dir.into(),
        }
    }

    fn cache_path(&self, query: &SearchQuery) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(query.keyword.as_bytes());
        hasher.update([0u8]);
        hasher.update(query.extension.as_bytes());
        hasher.update([0u8]);
        hasher.update(query.page.to_le_bytes());
        self.dir.join(format!("{}.json", hex::encode(hasher.finalize())))
    }
}

impl<H: CodeHost> CodeHost for CachedCodeHost<H> {
    fn search_page(&self, query: &SearchQuery) -> Result<SearchPage> {
        let path = self.cache_path(query);
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            return Ok(serde_json::from_str(&text)?);
        }
        let page = self.inner.search_page(query)?;
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(&path, serde_json::to_string(&page)?)?;
        Ok(page)
    }
}

// ---------------------------------------------------------------------------
// Local walk
// ---------------------------------------------------------------------------

/// Walks a directory tree and ingests files whose extension is in
/// `extensions` (no leading dots). Traversal order is lexicographic on the
/// relative path, independent of filesystem enumeration order. Unreadable
/// files are skipped with a warning; bytes that are not valid UTF-8 are
/// decoded lossily and flagged on the unit.
pub fn walk_local(root: &Path, extensions: &[String]) -> Result<Vec<SourceUnit>> {
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false) {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                log::warn!("skipping unreadable entry under {}: {err}", root.display());
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let ext = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("");
        if extensions.iter().any(|e| e.eq_ignore_ascii_case(ext)) {
            paths.push(entry.path().to_path_buf());
        }
    }
    paths.sort_by_key(|p| {
        p.strip_prefix(root)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    });

    let mut units = Vec::new();
    for path in paths {
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(err) => {
                log::warn!("skipping unreadable file {}: {err}", path.display());
                continue;
            }
        };
        let had_decode_errors = std::str::from_utf8(&bytes).is_err();
        let content = String::from_utf8_lossy(&bytes).into_owned();
        let rel = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        units.push(SourceUnit::new(
            Origin::Local,
            None,
            rel,
            language_for_extension(ext),
            content,
            had_decode_errors,
        ));
    }
    Ok(units)
}
