//! Client for the public archive: content payloads from the object bucket
//! and identifier resolution through the web API.
//!
//! Requests are spaced by a token-interval limiter, retried with exponential
//! backoff on 429 and 503, and optionally cached on disk by URL.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use url::Url;

use crate::model::{
    compute_content_checksums, Content, Directory, DirectoryEntry, EntryKind, Node, ObjectId, ObjectType,
};
use crate::objstore::{gunzip, ArchiveStore, StoreError};
use crate::swhid::{parse_swhid, Swhid, SwhidError};

pub const DEFAULT_API: &str = "https://archive.softwareheritage.org/api/1/";
pub const DEFAULT_BUCKET: &str = "https://softwareheritage.s3.amazonaws.com/";
pub const DEFAULT_REQUESTS_PER_MINUTE: u32 = 60;

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error(transparent)]
    Swhid(#[from] SwhidError),
    #[error("{url}: not found")]
    NotFound { url: String },
    #[error("{url}: HTTP {status}")]
    Http { url: String, status: u16 },
    #[error("{url}: still rate limited after {attempts} attempts")]
    RateLimited { url: String, attempts: u32 },
    #[error("{url}: {source}")]
    Transport { url: String, source: reqwest::Error },
    #[error("integrity check failed: expected {expected}, payload hashes to {computed}")]
    Integrity { expected: ObjectId, computed: ObjectId },
    #[error("{url}: undecodable response: {reason}")]
    Decode { url: String, reason: String },
    #[error("cache {}: {source}", path.display())]
    Cache { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("bad endpoint URL: {0}")]
    Endpoint(#[from] url::ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteEndpoint {
    /// Web API root, with trailing slash.
    pub api: Url,
    /// Bucket root; payloads live under `content/<sha1>`.
    pub bucket: Url,
}

impl RemoteEndpoint {
    pub fn new(api: &str, bucket: &str) -> Result<Self, RemoteError> {
        Ok(RemoteEndpoint {
            api: Url::parse(&with_slash(api))?,
            bucket: Url::parse(&with_slash(bucket))?,
        })
    }

    pub fn content_url(&self, sha1: &ObjectId) -> Url {
        self.bucket.join(&format!("content/{sha1}")).expect("hex path")
    }

    pub fn resolve_url(&self, swhid: &Swhid) -> Url {
        let mut url = self.api.join("resolve/").expect("static path");
        url.path_segments_mut()
            .expect("http url")
            .pop_if_empty()
            .push(&swhid.to_string())
            .push("");
        url
    }

    pub fn content_metadata_url(&self, sha1_git: &ObjectId) -> Url {
        self.api
            .join(&format!("content/sha1_git:{sha1_git}/"))
            .expect("hex path")
    }
}

impl Default for RemoteEndpoint {
    fn default() -> Self {
        RemoteEndpoint::new(DEFAULT_API, DEFAULT_BUCKET).expect("default endpoints parse")
    }
}

fn with_slash(url: &str) -> String {
    if url.ends_with('/') {
        url.to_string()
    } else {
        format!("{url}/")
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: RemoteEndpoint,
    pub requests_per_minute: u32,
    /// Retries after the first attempt on 429 or 503.
    pub max_retries: u32,
    /// First backoff delay; doubled on each retry. `Retry-After` wins when larger.
    pub backoff: Duration,
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
    /// Sent as `Authorization: Bearer` to the API.
    pub token: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: RemoteEndpoint::default(),
            requests_per_minute: DEFAULT_REQUESTS_PER_MINUTE,
            max_retries: 5,
            backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(60),
            cache_dir: None,
            token: None,
        }
    }
}

/// Enforces a minimum interval between requests. Shared by threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let interval = if requests == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs(60) / requests
        };
        RateLimiter {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until this caller's slot comes up.
    pub fn acquire(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

/// What the resolver says about an identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteObject {
    pub swhid: Swhid,
    pub browse_url: Option<String>,
    /// For contents: the API's checksums agreed with the identifier.
    pub verified: bool,
    pub raw: serde_json::Value,
}

#[derive(Deserialize)]
struct ResolveBody {
    object_type: String,
    object_id: String,
    #[serde(default)]
    browse_url: Option<String>,
}

#[derive(Deserialize)]
struct ContentBody {
    checksums: Checksums,
    #[serde(default)]
    length: Option<u64>,
}

#[derive(Deserialize)]
struct ListingEntry {
    name: String,
    perms: u32,
    target: String,
}

#[derive(Deserialize)]
struct Checksums {
    sha1: String,
    sha1_git: String,
}

pub struct RemoteClient {
    http: reqwest::blocking::Client,
    config: RemoteConfig,
    limiter: RateLimiter,
    requests: AtomicU64,
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self, RemoteError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("codevault/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|source| RemoteError::Transport {
                url: String::new(),
                source,
            })?;
        Ok(RemoteClient {
            http,
            limiter: RateLimiter::per_minute(config.requests_per_minute),
            config,
            requests: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Network requests sent so far, cache hits excluded.
    pub fn requests_sent(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn cache_path(&self, url: &Url) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        Some(dir.join(ObjectId::sha1_of(url.as_str().as_bytes()).to_hex()))
    }

    /// GET with limiter, retries and cache. Only 200 bodies are cached.
    pub fn get(&self, url: &Url, authorized: bool) -> Result<Vec<u8>, RemoteError> {
        let cache = self.cache_path(url);
        if let Some(path) = &cache {
            if let Ok(body) = fs::read(path) {
                log::debug!("cache hit {url}");
                return Ok(body);
            }
        }
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        let body = loop {
            attempt += 1;
            self.limiter.acquire();
            self.requests.fetch_add(1, Ordering::Relaxed);
            let mut request = self.http.get(url.clone());
            if let (true, Some(token)) = (authorized, &self.config.token) {
                request = request.bearer_auth(token);
            }
            let transport = |source| RemoteError::Transport {
                url: url.to_string(),
                source,
            };
            let response = request.send().map_err(transport)?;
            let status = response.status().as_u16();
            match status {
                200 => break response.bytes().map_err(transport)?.to_vec(),
                404 => return Err(RemoteError::NotFound { url: url.to_string() }),
                429 | 503 => {
                    if attempt > self.config.max_retries {
                        return Err(RemoteError::RateLimited {
                            url: url.to_string(),
                            attempts: attempt,
                        });
                    }
                    let hinted = response
                        .headers()
                        .get(reqwest::header::RETRY_AFTER)
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(Duration::from_secs)
                        .unwrap_or_default();
                    let wait = delay.max(hinted);
                    log::warn!("{url}: HTTP {status}, retrying in {wait:?}");
                    thread::sleep(wait);
                    delay *= 2;
                }
                _ => {
                    return Err(RemoteError::Http {
                        url: url.to_string(),
                        status,
                    })
                }
            }
        };
        if let Some(path) = cache {
            write_cache(&path, &body)?;
        }
        Ok(body)
    }

    /// Downloads a payload by its SHA1, gunzips it and checks the hash.
    pub fn fetch_content_by_sha1(&self, sha1: &ObjectId) -> Result<Vec<u8>, RemoteError> {
        let url = self.config.endpoint.content_url(sha1);
        let compressed = self.get(&url, false)?;
        let data = gunzip(&compressed).map_err(|e| RemoteError::Decode {
            url: url.to_string(),
            reason: e.to_string(),
        })?;
        let computed = compute_content_checksums(&data).sha1;
        if computed != *sha1 {
            if let Some(path) = self.cache_path(&url) {
                let _ = fs::remove_file(path);
            }
            return Err(RemoteError::Integrity {
                expected: *sha1,
                computed,
            });
        }
        Ok(data)
    }

    /// Fetches a payload and stores it; returns its `sha1_git`.
    pub fn fetch_into_store(&self, store: &mut ArchiveStore, sha1: &ObjectId) -> Result<ObjectId, RemoteError> {
        let data = self.fetch_content_by_sha1(sha1)?;
        Ok(store.put(&Node::Content(Content::new(data)))?)
    }

    /// Validates `text` locally, then asks the resolver. Content identifiers
    /// are cross-checked against the API's checksums.
    pub fn resolve_remote(&self, text: &str) -> Result<RemoteObject, RemoteError> {
        let swhid = parse_swhid(text)?;
        let url = self.config.endpoint.resolve_url(&swhid);
        let raw: serde_json::Value = self.get_json(&url)?;
        let body: ResolveBody = serde_json::from_value(raw.clone()).map_err(|e| decode(&url, e))?;
        let expected_type = swhid.core.object_type.long_name();
        if body.object_type != expected_type || body.object_id != swhid.core.id.to_hex() {
            return Err(RemoteError::Decode {
                url: url.to_string(),
                reason: format!("resolver answered {} {}", body.object_type, body.object_id),
            });
        }
        let mut verified = false;
        if swhid.core.object_type == ObjectType::Content {
            let url = self.config.endpoint.content_metadata_url(&swhid.core.id);
            let content: ContentBody = serde_json::from_value(self.get_json(&url)?).map_err(|e| decode(&url, e))?;
            let sha1_git = ObjectId::from_hex(&content.checksums.sha1_git).map_err(|e| decode(&url, e))?;
            ObjectId::from_hex(&content.checksums.sha1).map_err(|e| decode(&url, e))?;
            if sha1_git != swhid.core.id {
                return Err(RemoteError::Integrity {
                    expected: swhid.core.id,
                    computed: sha1_git,
                });
            }
            log::debug!("content length {:?}", content.length);
            verified = true;
        }
        Ok(RemoteObject {
            swhid,
            browse_url: body.browse_url,
            verified,
            raw,
        })
    }

    /// Entries of a remote directory. The listing is re-hashed and must
    /// reproduce `id`.
    pub fn list_directory(&self, id: &ObjectId) -> Result<Vec<DirectoryEntry>, RemoteError> {
        let url = self
            .config
            .endpoint
            .api
            .join(&format!("directory/{id}/"))
            .expect("hex path");
        let listing: Vec<ListingEntry> = serde_json::from_value(self.get_json(&url)?).map_err(|e| decode(&url, e))?;
        let entries = listing
            .into_iter()
            .map(|e| {
                let kind = EntryKind::from_perms(&format!("{:o}", e.perms))
                    .ok_or_else(|| decode(&url, format!("unknown perms {:o}", e.perms)))?;
                let target = ObjectId::from_hex(&e.target).map_err(|err| decode(&url, err))?;
                Ok(DirectoryEntry::new(e.name.into_bytes(), kind, target))
            })
            .collect::<Result<Vec<_>, RemoteError>>()?;
        let dir = Directory::new(entries).map_err(|e| decode(&url, e))?;
        let computed = Node::Directory(dir.clone())
            .intrinsic_id()
            .map_err(|e| decode(&url, e))?;
        if computed != *id {
            return Err(RemoteError::Integrity {
                expected: *id,
                computed,
            });
        }
        Ok(dir.into_entries())
    }

    /// Raw bytes of a content by `sha1_git`, re-hashed before returning.
    pub fn fetch_content_raw(&self, sha1_git: &ObjectId) -> Result<Vec<u8>, RemoteError> {
        let url = self
            .config
            .endpoint
            .api
            .join(&format!("content/sha1_git:{sha1_git}/raw/"))
            .expect("hex path");
        let data = self.get(&url, true)?;
        let computed = compute_content_checksums(&data).sha1_git;
        if computed != *sha1_git {
            if let Some(path) = self.cache_path(&url) {
                let _ = fs::remove_file(path);
            }
            return Err(RemoteError::Integrity {
                expected: *sha1_git,
                computed,
            });
        }
        Ok(data)
    }

    fn get_json(&self, url: &Url) -> Result<serde_json::Value, RemoteError> {
        let body = self.get(url, true)?;
        serde_json::from_slice(&body).map_err(|e| decode(url, e))
    }
}

fn decode(url: &Url, e: impl std::fmt::Display) -> RemoteError {
    RemoteError::Decode {
        url: url.to_string(),
        reason: e.to_string(),
    }
}

fn write_cache(path: &std::path::Path, body: &[u8]) -> Result<(), RemoteError> {
    let err = |source| RemoteError::Cache {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(err)?;
    }
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(err)?;
    file.write_all(body).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}
