//! Persistent, deduplicated, content-addressable object store.
//!
//! Layout under the store root:
//!
//! ```text
//! FORMAT                       key: value settings, checked on open
//! LOCK                         present while a writer holds the store
//! objects/<tag>/<aa>/<bb>/<id> one file per object
//! index/sha1.idx               sorted (sha1, sha1_git, length, flags) records
//! index/DIRTY                  present while index entries are unflushed
//! holes                        children missing when their parent was stored
//! visits.log                   append-only origin visit log
//! ```
//!
//! Contents are stored gzip-compressed; every other node is stored as its
//! canonical manifest, so re-hashing the file yields its id.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use flate2::read::GzDecoder;
use flate2::{Compression, GzBuilder};

use crate::model::{
    canonical_manifest, compute_content_checksums, parse_manifest, split_manifest, Content, ModelError, Node, ObjectId,
    ObjectType, Origin, Timestamp, Visit,
};
use crate::swhid::SwhidCore;

pub const FORMAT_VERSION: u32 = 1;
pub const GZIP_LEVEL: u32 = 6;

const INDEX_MAGIC: &[u8; 8] = b"CVSHA1\x00\x01";
const INDEX_RECORD_LEN: usize = 49;
const FLAG_PAYLOAD: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{object_type} {id} not found")]
    NotFound { object_type: ObjectType, id: ObjectId },
    #[error("no content with sha1 {0}")]
    Sha1NotFound(ObjectId),
    #[error("{parent} references missing {child}")]
    DanglingChild { parent: SwhidCore, child: SwhidCore },
    #[error("unknown snapshot {0}")]
    UnknownSnapshot(ObjectId),
    #[error("visit of {origin} dated {date} precedes its latest visit")]
    VisitOutOfOrder { origin: String, date: Timestamp },
    #[error("corrupt object {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("store at {0} is locked by another writer (remove LOCK if stale)")]
    Locked(PathBuf),
    #[error("store is open read-only")]
    ReadOnly,
    #[error("{0} is not a store: {1}")]
    NotAStore(PathBuf, String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl StoreError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, StoreError::NotFound { .. } | StoreError::Sha1NotFound(_))
    }
}

trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T, StoreError>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T, StoreError> {
        self.map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StoreOptions {
    /// Accept nodes whose children are not stored; missing children are
    /// recorded as holes.
    pub allow_holes: bool,
}

/// Checksums and length of one content, with or without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContentRecord {
    pub sha1: ObjectId,
    pub sha1_git: ObjectId,
    pub length: u64,
    /// False for metadata-only contents (e.g. imported from a dataset).
    pub has_payload: bool,
}

impl ContentRecord {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.sha1.as_bytes());
        out.extend_from_slice(self.sha1_git.as_bytes());
        out.extend_from_slice(&self.length.to_be_bytes());
        out.push(if self.has_payload { FLAG_PAYLOAD } else { 0 });
    }

    fn decode(raw: &[u8]) -> Self {
        ContentRecord {
            sha1: ObjectId::from_slice(&raw[0..20]).expect("20 bytes"),
            sha1_git: ObjectId::from_slice(&raw[20..40]).expect("20 bytes"),
            length: u64::from_be_bytes(raw[40..48].try_into().expect("8 bytes")),
            has_payload: raw[48] & FLAG_PAYLOAD != 0,
        }
    }
}

/// Result of a `put`: the id and whether anything was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PutOutcome {
    pub id: ObjectId,
    pub new: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub contents: u64,
    pub directories: u64,
    pub revisions: u64,
    pub releases: u64,
    pub snapshots: u64,
    pub origins: u64,
    pub visits: u64,
    /// Indexed contents stored without payload.
    pub metadata_only_contents: u64,
    pub content_bytes_raw: u64,
    pub content_bytes_compressed: u64,
}

impl StoreStats {
    pub fn count(&self, object_type: ObjectType) -> u64 {
        match object_type {
            ObjectType::Content => self.contents,
            ObjectType::Directory => self.directories,
            ObjectType::Revision => self.revisions,
            ObjectType::Release => self.releases,
            ObjectType::Snapshot => self.snapshots,
        }
    }

    fn count_mut(&mut self, object_type: ObjectType) -> &mut u64 {
        match object_type {
            ObjectType::Content => &mut self.contents,
            ObjectType::Directory => &mut self.directories,
            ObjectType::Revision => &mut self.revisions,
            ObjectType::Release => &mut self.releases,
            ObjectType::Snapshot => &mut self.snapshots,
        }
    }
}

struct WriterLock {
    path: PathBuf,
}

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct ArchiveStore {
    root: PathBuf,
    options: StoreOptions,
    lock: Option<WriterLock>,
    /// Flushed index, sorted by sha1.
    index: Vec<ContentRecord>,
    pending: BTreeMap<ObjectId, ContentRecord>,
    metadata_only: HashSet<ObjectId>,
    holes: BTreeSet<SwhidCore>,
    holes_dirty: bool,
    visits: Vec<Visit>,
}

impl std::fmt::Debug for ArchiveStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArchiveStore")
            .field("root", &self.root)
            .field("writable", &self.lock.is_some())
            .finish()
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ArchiveStore {
    /// Opens the store at `root` for writing, creating it if needed.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        ArchiveStore::open_with(root, StoreOptions::default())
    }

    pub fn open_with(root: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).at(&root)?;
        let format_path = root.join("FORMAT");
        if !format_path.exists() {
            for dir in ["objects", "index", "tmp"] {
                fs::create_dir_all(root.join(dir)).at(&root)?;
            }
            let format =
                format!("format_version: {FORMAT_VERSION}\ngzip_level: {GZIP_LEVEL}\ngzip_mtime: 0\nfanout: 2\n");
            write_atomic(&root, &format_path, format.as_bytes())?;
        }
        let lock_path = root.join("LOCK");
        match OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(StoreError::Locked(root)),
            Err(e) => return Err(e).at(&lock_path),
        }
        let lock = WriterLock { path: lock_path };
        let mut store = ArchiveStore::load(root, options, Some(lock))?;
        if store.root.join("index/DIRTY").exists() {
            store.rebuild_index()?;
        }
        Ok(store)
    }

    /// Opens an existing store without taking the writer lock.
    pub fn open_read_only(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let mut store = ArchiveStore::load(root, StoreOptions::default(), None)?;
        if store.root.join("index/DIRTY").exists() {
            let records = store.scan_index()?;
            store.install_index(records);
        }
        Ok(store)
    }

    fn load(root: PathBuf, options: StoreOptions, lock: Option<WriterLock>) -> Result<Self> {
        let format_path = root.join("FORMAT");
        let format =
            fs::read_to_string(&format_path).map_err(|e| StoreError::NotAStore(root.clone(), e.to_string()))?;
        let version = format
            .lines()
            .find_map(|l| l.strip_prefix("format_version: "))
            .and_then(|v| v.trim().parse::<u32>().ok());
        if version != Some(FORMAT_VERSION) {
            return Err(StoreError::NotAStore(
                root,
                format!("unsupported format version {version:?}"),
            ));
        }
        let mut store = ArchiveStore {
            root,
            options,
            lock,
            index: Vec::new(),
            pending: BTreeMap::new(),
            metadata_only: HashSet::new(),
            holes: BTreeSet::new(),
            holes_dirty: false,
            visits: Vec::new(),
        };
        let records = store.read_index_file()?;
        store.install_index(records);
        store.holes = store.read_holes()?;
        store.visits = store.read_visits()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn options(&self) -> StoreOptions {
        self.options
    }

    pub fn is_writable(&self) -> bool {
        self.lock.is_some()
    }

    fn object_path(&self, object_type: ObjectType, id: &ObjectId) -> PathBuf {
        let hex = id.to_hex();
        self.root
            .join("objects")
            .join(object_type.tag())
            .join(&hex[0..2])
            .join(&hex[2..4])
            .join(hex)
    }

    fn ensure_writable(&self) -> Result<()> {
        if self.lock.is_none() {
            return Err(StoreError::ReadOnly);
        }
        Ok(())
    }

    /// True if the node, or metadata for a content, is present.
    pub fn contains(&self, object_type: ObjectType, id: &ObjectId) -> bool {
        (object_type == ObjectType::Content && self.metadata_only.contains(id))
            || self.object_path(object_type, id).exists()
    }

    /// True only if the full node (including content payload) is present.
    pub fn has_object(&self, object_type: ObjectType, id: &ObjectId) -> bool {
        self.object_path(object_type, id).exists()
    }

    pub fn put(&mut self, node: &Node) -> Result<ObjectId> {
        Ok(self.put_with_outcome(node)?.id)
    }

    pub fn put_with_outcome(&mut self, node: &Node) -> Result<PutOutcome> {
        self.ensure_writable()?;
        if let Node::Content(content) = node {
            return self.put_content(content);
        }
        let manifest = canonical_manifest(node)?;
        let id = ObjectId::sha1_of(&manifest);
        let object_type = node.object_type();
        let path = self.object_path(object_type, &id);
        if path.exists() {
            return Ok(PutOutcome { id, new: false });
        }
        let parent = SwhidCore::new(object_type, id);
        for (child_type, child) in node.children() {
            // Revision entries in directories point into other repositories.
            if object_type == ObjectType::Directory && child_type == ObjectType::Revision {
                continue;
            }
            if self.contains(child_type, &child) {
                continue;
            }
            let child = SwhidCore::new(child_type, child);
            if !self.options.allow_holes {
                return Err(StoreError::DanglingChild { parent, child });
            }
            self.holes.insert(child);
            self.holes_dirty = true;
        }
        write_atomic(&self.root, &path, &manifest)?;
        self.fill_hole(object_type, id);
        Ok(PutOutcome { id, new: true })
    }

    fn put_content(&mut self, content: &Content) -> Result<PutOutcome> {
        let sums = compute_content_checksums(&content.data);
        let id = sums.sha1_git;
        let path = self.object_path(ObjectType::Content, &id);
        if path.exists() {
            return Ok(PutOutcome { id, new: false });
        }
        write_atomic(&self.root, &path, &gzip(&content.data))?;
        self.add_index_record(ContentRecord {
            sha1: sums.sha1,
            sha1_git: id,
            length: content.data.len() as u64,
            has_payload: true,
        })?;
        self.metadata_only.remove(&id);
        self.fill_hole(ObjectType::Content, id);
        Ok(PutOutcome { id, new: true })
    }

    /// Records checksums for a content whose bytes are not available.
    pub fn put_content_metadata(&mut self, sha1: ObjectId, sha1_git: ObjectId, length: u64) -> Result<bool> {
        self.ensure_writable()?;
        if self.contains(ObjectType::Content, &sha1_git) {
            return Ok(false);
        }
        self.add_index_record(ContentRecord {
            sha1,
            sha1_git,
            length,
            has_payload: false,
        })?;
        self.metadata_only.insert(sha1_git);
        self.fill_hole(ObjectType::Content, sha1_git);
        Ok(true)
    }

    fn fill_hole(&mut self, object_type: ObjectType, id: ObjectId) {
        if self.holes.remove(&SwhidCore::new(object_type, id)) {
            self.holes_dirty = true;
        }
    }

    fn add_index_record(&mut self, record: ContentRecord) -> Result<()> {
        if self.pending.is_empty() {
            let dirty = self.root.join("index/DIRTY");
            File::create(&dirty).at(&dirty)?;
        }
        self.pending.insert(record.sha1, record);
        Ok(())
    }

    pub fn get(&self, object_type: ObjectType, id: &ObjectId) -> Result<Node> {
        let path = self.object_path(object_type, id);
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound { object_type, id: *id }),
            Err(e) => return Err(e).at(&path),
        };
        let corrupt = |reason: String| StoreError::Corrupt {
            path: path.clone(),
            reason,
        };
        if object_type == ObjectType::Content {
            let data = gunzip(&raw).map_err(|e| corrupt(format!("bad gzip member: {e}")))?;
            if compute_content_checksums(&data).sha1_git != *id {
                return Err(corrupt("content does not hash to its id".into()));
            }
            return Ok(Node::Content(Content::new(data)));
        }
        if ObjectId::sha1_of(&raw) != *id {
            return Err(corrupt("manifest does not hash to its id".into()));
        }
        let (kind, _) = split_manifest(&raw)?;
        if kind != object_type {
            return Err(corrupt(format!("stored {kind} under {object_type}")));
        }
        Ok(parse_manifest(&raw)?)
    }

    pub fn get_content(&self, id: &ObjectId) -> Result<Vec<u8>> {
        match self.get(ObjectType::Content, id)? {
            Node::Content(c) => Ok(c.data),
            _ => unreachable!("content path holds content"),
        }
    }

    /// True for contents recorded by checksum only.
    pub fn is_metadata_only(&self, sha1_git: &ObjectId) -> bool {
        self.metadata_only.contains(sha1_git)
    }

    /// Looks up a content record by plain SHA1 (binary search).
    pub fn lookup_sha1(&self, sha1: &ObjectId) -> Option<ContentRecord> {
        if let Some(record) = self.pending.get(sha1) {
            return Some(*record);
        }
        self.index
            .binary_search_by(|r| r.sha1.cmp(sha1))
            .ok()
            .map(|i| self.index[i])
    }

    pub fn get_content_by_sha1(&self, sha1: &ObjectId) -> Result<Vec<u8>> {
        let record = self.lookup_sha1(sha1).ok_or(StoreError::Sha1NotFound(*sha1))?;
        let data = self.get_content(&record.sha1_git).map_err(|e| match e {
            StoreError::NotFound { .. } => StoreError::Sha1NotFound(*sha1),
            other => other,
        })?;
        if ObjectId::sha1_of(&data) != *sha1 {
            return Err(StoreError::Corrupt {
                path: self.object_path(ObjectType::Content, &record.sha1_git),
                reason: format!("payload does not match sha1 {sha1}"),
            });
        }
        Ok(data)
    }

    /// All content records (with and without payload), sorted by sha1_git.
    pub fn content_records(&self) -> Vec<ContentRecord> {
        let mut by_sha1: BTreeMap<ObjectId, ContentRecord> = self.index.iter().map(|r| (r.sha1, *r)).collect();
        by_sha1.extend(self.pending.iter().map(|(k, v)| (*k, *v)));
        let mut records: Vec<ContentRecord> = by_sha1.into_values().collect();
        records.sort_by_key(|a| a.sha1_git);
        records
    }

    pub fn record_visit(&mut self, origin: &Origin, date: Timestamp, snapshot: ObjectId) -> Result<Visit> {
        self.ensure_writable()?;
        if !self.has_object(ObjectType::Snapshot, &snapshot) {
            return Err(StoreError::UnknownSnapshot(snapshot));
        }
        let previous = self.visits.iter().filter(|v| &v.origin == origin);
        let mut number = 1;
        for visit in previous {
            if visit.date.seconds > date.seconds {
                return Err(StoreError::VisitOutOfOrder {
                    origin: origin.url().to_string(),
                    date,
                });
            }
            number = visit.number + 1;
        }
        let visit = Visit {
            origin: origin.clone(),
            number,
            date,
            snapshot,
        };
        let path = self.root.join("visits.log");
        let mut file = OpenOptions::new().create(true).append(true).open(&path).at(&path)?;
        file.write_all(format_visit(&visit).as_bytes()).at(&path)?;
        file.sync_data().at(&path)?;
        self.visits.push(visit.clone());
        Ok(visit)
    }

    /// Every visit, in log order.
    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }

    pub fn visits_of(&self, origin: &Origin) -> Vec<&Visit> {
        self.visits.iter().filter(|v| &v.origin == origin).collect()
    }

    /// Distinct origins, sorted by URL.
    pub fn origins(&self) -> Vec<Origin> {
        let set: BTreeSet<&Origin> = self.visits.iter().map(|v| &v.origin).collect();
        set.into_iter().cloned().collect()
    }

    /// Children that were missing when their parent was stored and are
    /// still absent.
    pub fn holes(&self) -> Vec<SwhidCore> {
        self.holes
            .iter()
            .filter(|h| !self.contains(h.object_type, &h.id))
            .copied()
            .collect()
    }

    /// Ids of every stored object of a type, ascending.
    pub fn ids(&self, object_type: ObjectType) -> Result<Vec<ObjectId>> {
        let base = self.root.join("objects").join(object_type.tag());
        let mut ids = Vec::new();
        for first in read_dir_sorted(&base)? {
            for second in read_dir_sorted(&first)? {
                for file in read_dir_sorted(&second)? {
                    let name = file.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    let id = ObjectId::from_hex(name).map_err(|_| StoreError::Corrupt {
                        path: file.clone(),
                        reason: "unexpected file in object directory".into(),
                    })?;
                    ids.push(id);
                }
            }
        }
        ids.sort_unstable();
        Ok(ids)
    }

    /// Yields `(id, node)` for each stored object of the type, ascending.
    pub fn iterate(&self, object_type: ObjectType) -> Result<impl Iterator<Item = Result<(ObjectId, Node)>> + '_> {
        let ids = self.ids(object_type)?;
        Ok(ids
            .into_iter()
            .map(move |id| self.get(object_type, &id).map(|node| (id, node))))
    }

    pub fn stats(&self) -> Result<StoreStats> {
        let mut stats = StoreStats::default();
        for object_type in ObjectType::ALL {
            let ids = self.ids(object_type)?;
            *stats.count_mut(object_type) = ids.len() as u64;
            if object_type == ObjectType::Content {
                for id in ids {
                    let path = self.object_path(object_type, &id);
                    let (compressed, raw) = gzip_sizes(&path)?;
                    stats.content_bytes_compressed += compressed;
                    stats.content_bytes_raw += raw;
                }
            }
        }
        stats.metadata_only_contents = self.metadata_only.len() as u64;
        stats.origins = self.origins().len() as u64;
        stats.visits = self.visits.len() as u64;
        Ok(stats)
    }

    /// Writes pending index entries and the hole list.
    pub fn flush(&mut self) -> Result<()> {
        if self.lock.is_none() {
            return Ok(());
        }
        if !self.pending.is_empty() {
            let mut merged: BTreeMap<ObjectId, ContentRecord> = self.index.iter().map(|r| (r.sha1, *r)).collect();
            merged.append(&mut self.pending);
            let records: Vec<ContentRecord> = merged.into_values().collect();
            self.write_index_file(&records)?;
            self.install_index(records);
            let dirty = self.root.join("index/DIRTY");
            fs::remove_file(&dirty).at(&dirty)?;
        }
        if self.holes_dirty {
            let mut text = String::new();
            for hole in &self.holes {
                text.push_str(&format!("{} {}\n", hole.object_type.tag(), hole.id));
            }
            write_atomic(&self.root, &self.root.join("holes"), text.as_bytes())?;
            self.holes_dirty = false;
        }
        Ok(())
    }

    /// Rebuilds the sha1 index from stored contents, keeping metadata-only
    /// records.
    pub fn rebuild_index(&mut self) -> Result<()> {
        self.ensure_writable()?;
        let records = self.scan_index()?;
        self.write_index_file(&records)?;
        self.install_index(records);
        self.pending.clear();
        let dirty = self.root.join("index/DIRTY");
        if dirty.exists() {
            fs::remove_file(&dirty).at(&dirty)?;
        }
        Ok(())
    }

    fn scan_index(&self) -> Result<Vec<ContentRecord>> {
        let mut merged: BTreeMap<ObjectId, ContentRecord> = self
            .read_index_file()?
            .into_iter()
            .filter(|r| !r.has_payload)
            .map(|r| (r.sha1, r))
            .collect();
        for id in self.ids(ObjectType::Content)? {
            let data = self.get_content(&id)?;
            let sums = compute_content_checksums(&data);
            merged.insert(
                sums.sha1,
                ContentRecord {
                    sha1: sums.sha1,
                    sha1_git: id,
                    length: data.len() as u64,
                    has_payload: true,
                },
            );
        }
        Ok(merged
            .into_values()
            .filter(|r| r.has_payload || !self.has_object(ObjectType::Content, &r.sha1_git))
            .collect())
    }

    fn install_index(&mut self, records: Vec<ContentRecord>) {
        self.metadata_only = records.iter().filter(|r| !r.has_payload).map(|r| r.sha1_git).collect();
        self.index = records;
    }

    fn read_index_file(&self) -> Result<Vec<ContentRecord>> {
        let path = self.root.join("index/sha1.idx");
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e).at(&path),
        };
        let body = raw
            .strip_prefix(INDEX_MAGIC.as_slice())
            .filter(|b| b.len() % INDEX_RECORD_LEN == 0)
            .ok_or_else(|| StoreError::Corrupt {
                path: path.clone(),
                reason: "bad index header or length".into(),
            })?;
        let records: Vec<ContentRecord> = body.chunks_exact(INDEX_RECORD_LEN).map(ContentRecord::decode).collect();
        if records.windows(2).any(|w| w[0].sha1 >= w[1].sha1) {
            return Err(StoreError::Corrupt {
                path,
                reason: "index not sorted".into(),
            });
        }
        Ok(records)
    }

    fn write_index_file(&self, records: &[ContentRecord]) -> Result<()> {
        let mut out = Vec::with_capacity(8 + records.len() * INDEX_RECORD_LEN);
        out.extend_from_slice(INDEX_MAGIC);
        for record in records {
            record.encode(&mut out);
        }
        write_atomic(&self.root, &self.root.join("index/sha1.idx"), &out)
    }

    fn read_holes(&self) -> Result<BTreeSet<SwhidCore>> {
        let path = self.root.join("holes");
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(BTreeSet::new()),
            Err(e) => return Err(e).at(&path),
        };
        text.lines()
            .map(|line| {
                let parsed = line.split_once(' ').and_then(|(tag, hex)| {
                    Some(SwhidCore::new(
                        ObjectType::from_tag(tag)?,
                        ObjectId::from_hex(hex).ok()?,
                    ))
                });
                parsed.ok_or_else(|| StoreError::Corrupt {
                    path: path.clone(),
                    reason: format!("bad hole line {line:?}"),
                })
            })
            .collect()
    }

    fn read_visits(&self) -> Result<Vec<Visit>> {
        let path = self.root.join("visits.log");
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e).at(&path),
        };
        let mut visits = Vec::new();
        let mut counters: HashMap<String, u64> = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.at(&path)?;
            let visit = parse_visit(&line).ok_or_else(|| StoreError::Corrupt {
                path: path.clone(),
                reason: format!("bad visit record on line {}", n + 1),
            })?;
            let counter = counters.entry(visit.origin.url().to_string()).or_default();
            *counter += 1;
            if visit.number != *counter {
                return Err(StoreError::Corrupt {
                    path: path.clone(),
                    reason: format!("visit number out of sequence on line {}", n + 1),
                });
            }
            visits.push(visit);
        }
        Ok(visits)
    }
}

impl Drop for ArchiveStore {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            log::warn!("failed to flush store {}: {e}", self.root.display());
        }
    }
}

fn format_visit(visit: &Visit) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\n",
        visit.origin.url(),
        visit.number,
        visit.date.seconds,
        visit.date.offset_string(),
        visit.snapshot
    )
}

fn parse_visit(line: &str) -> Option<Visit> {
    let mut fields = line.split('\t');
    let origin = Origin::new(fields.next()?).ok()?;
    let number = fields.next()?.parse().ok()?;
    let seconds = fields.next()?.parse().ok()?;
    let (offset_minutes, negative_utc) = Timestamp::parse_offset(fields.next()?)?;
    let snapshot = ObjectId::from_hex(fields.next()?).ok()?;
    if fields.next().is_some() {
        return None;
    }
    Some(Visit {
        origin,
        number,
        date: Timestamp {
            seconds,
            offset_minutes,
            negative_utc,
        },
        snapshot,
    })
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e).at(dir),
    };
    let mut paths = Vec::new();
    for entry in entries {
        paths.push(entry.at(dir)?.path());
    }
    paths.sort();
    Ok(paths)
}

/// Writes `data` to a temporary file under `root/tmp` and renames it into
/// place.
fn write_atomic(root: &Path, dest: &Path, data: &[u8]) -> Result<()> {
    let tmp_dir = root.join("tmp");
    fs::create_dir_all(&tmp_dir).at(&tmp_dir)?;
    let tmp = tmp_dir.join(format!(
        "{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    {
        let mut file = File::create(&tmp).at(&tmp)?;
        file.write_all(data).at(&tmp)?;
        file.sync_data().at(&tmp)?;
    }
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    fs::rename(&tmp, dest).at(dest)
}

/// Single gzip member, level 6, mtime 0, no file name.
pub fn gzip(data: &[u8]) -> Vec<u8> {
    let mut encoder = GzBuilder::new()
        .mtime(0)
        .write(Vec::with_capacity(data.len() / 2 + 32), Compression::new(GZIP_LEVEL));
    encoder.write_all(data).expect("writing to a Vec cannot fail");
    encoder.finish().expect("writing to a Vec cannot fail")
}

pub fn gunzip(data: &[u8]) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    GzDecoder::new(data).read_to_end(&mut out)?;
    Ok(out)
}

/// Compressed file size and the uncompressed size from the gzip trailer
/// (ISIZE, modulo 2^32).
fn gzip_sizes(path: &Path) -> Result<(u64, u64)> {
    let mut file = File::open(path).at(path)?;
    let compressed = file.metadata().at(path)?.len();
    if compressed < 18 {
        return Err(StoreError::Corrupt {
            path: path.to_path_buf(),
            reason: "truncated gzip member".into(),
        });
    }
    file.seek(SeekFrom::End(-4)).at(path)?;
    let mut trailer = [0u8; 4];
    file.read_exact(&mut trailer).at(path)?;
    Ok((compressed, u32::from_le_bytes(trailer) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Directory, DirectoryEntry, EntryKind, Snapshot};

    fn temp_store() -> (tempfile::TempDir, ArchiveStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = ArchiveStore::open(dir.path().join("store")).unwrap();
        (dir, store)
    }

    #[test]
    fn put_is_idempotent() {
        let (_tmp, mut store) = temp_store();
        let node = Node::Content(Content::new(b"hello\n".to_vec()));
        let first = store.put_with_outcome(&node).unwrap();
        let second = store.put_with_outcome(&node).unwrap();
        assert_eq!(first.id, second.id);
        assert!(first.new && !second.new);
        assert_eq!(store.stats().unwrap().contents, 1);
    }

    #[test]
    fn strict_mode_rejects_dangling_children() {
        let (_tmp, mut store) = temp_store();
        let missing = compute_content_checksums(b"absent").sha1_git;
        let dir = Directory::new(vec![DirectoryEntry::new("f", EntryKind::File, missing)]).unwrap();
        let err = store.put(&dir.into()).unwrap_err();
        assert!(matches!(err, StoreError::DanglingChild { .. }));
    }

    #[test]
    fn holes_recorded_and_filled() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("s");
        let mut store = ArchiveStore::open_with(&root, StoreOptions { allow_holes: true }).unwrap();
        let content = Content::new(b"late".to_vec());
        let id = content.checksums().sha1_git;
        let dir = Directory::new(vec![DirectoryEntry::new("f", EntryKind::File, id)]).unwrap();
        store.put(&dir.into()).unwrap();
        assert_eq!(store.holes(), vec![SwhidCore::new(ObjectType::Content, id)]);
        drop(store);
        let mut store = ArchiveStore::open(&root).unwrap();
        assert_eq!(store.holes().len(), 1);
        store.put(&content.into()).unwrap();
        assert!(store.holes().is_empty());
    }

    #[test]
    fn submodule_entries_are_not_checked() {
        let (_tmp, mut store) = temp_store();
        let external = ObjectId::sha1_of(b"elsewhere");
        let dir = Directory::new(vec![DirectoryEntry::new("sub", EntryKind::Revision, external)]).unwrap();
        assert!(store.put(&dir.into()).is_ok());
    }

    #[test]
    fn get_missing_is_not_found() {
        let (_tmp, store) = temp_store();
        let err = store.get(ObjectType::Directory, &ObjectId::sha1_of(b"x")).unwrap_err();
        assert!(err.is_not_found());
        let err = store.get_content_by_sha1(&ObjectId::sha1_of(b"x")).unwrap_err();
        assert!(err.is_not_found());
    }

    #[test]
    fn content_is_gzipped_at_rest() {
        let (_tmp, mut store) = temp_store();
        let data = b"aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa".to_vec();
        let id = store.put(&Content::new(data.clone()).into()).unwrap();
        let raw = fs::read(store.object_path(ObjectType::Content, &id)).unwrap();
        assert_eq!(&raw[..2], &[0x1f, 0x8b]);
        assert_eq!(gunzip(&raw).unwrap(), data);
        let stats = store.stats().unwrap();
        assert_eq!(stats.content_bytes_raw, data.len() as u64);
        assert_eq!(stats.content_bytes_compressed, raw.len() as u64);
    }

    #[test]
    fn gzip_output_is_deterministic() {
        assert_eq!(gzip(b"same bytes"), gzip(b"same bytes"));
    }

    #[test]
    fn empty_content_by_sha1() {
        let (_tmp, mut store) = temp_store();
        store.put(&Content::new(Vec::new()).into()).unwrap();
        let sha1 = compute_content_checksums(b"").sha1;
        assert_eq!(store.get_content_by_sha1(&sha1).unwrap(), b"");
    }

    #[test]
    fn visits_are_numbered_and_ordered() {
        let (_tmp, mut store) = temp_store();
        let s1 = store.put(&Snapshot::default().into()).unwrap();
        let origin = Origin::new("https://example.org/a").unwrap();
        let missing = ObjectId::sha1_of(b"nope");
        assert!(matches!(
            store.record_visit(&origin, Timestamp::utc(10), missing),
            Err(StoreError::UnknownSnapshot(_))
        ));
        let v1 = store.record_visit(&origin, Timestamp::utc(10), s1).unwrap();
        let v2 = store.record_visit(&origin, Timestamp::utc(20), s1).unwrap();
        assert_eq!((v1.number, v2.number), (1, 2));
        assert!(matches!(
            store.record_visit(&origin, Timestamp::utc(5), s1),
            Err(StoreError::VisitOutOfOrder { .. })
        ));
        assert_eq!(store.origins().len(), 1);
    }

    #[test]
    fn writer_lock_is_exclusive() {
        let (tmp, store) = temp_store();
        let root = tmp.path().join("store");
        assert!(matches!(ArchiveStore::open(&root), Err(StoreError::Locked(_))));
        assert!(ArchiveStore::open_read_only(&root).is_ok());
        drop(store);
        assert!(ArchiveStore::open(&root).is_ok());
    }

    #[test]
    fn read_only_store_refuses_writes() {
        let (tmp, store) = temp_store();
        drop(store);
        let mut ro = ArchiveStore::open_read_only(tmp.path().join("store")).unwrap();
        assert!(matches!(
            ro.put(&Content::new(b"x".to_vec()).into()),
            Err(StoreError::ReadOnly)
        ));
    }

    #[test]
    fn unflushed_index_is_rebuilt_on_open() {
        let (tmp, mut store) = temp_store();
        let data = b"survives a crash".to_vec();
        store.put(&Content::new(data.clone()).into()).unwrap();
        // Simulate a crash: skip the flush performed by Drop.
        store.pending.clear();
        std::mem::forget(store);
        let root = tmp.path().join("store");
        fs::remove_file(root.join("LOCK")).unwrap();
        assert!(root.join("index/DIRTY").exists());
        let store = ArchiveStore::open(&root).unwrap();
        let sha1 = compute_content_checksums(&data).sha1;
        assert_eq!(store.get_content_by_sha1(&sha1).unwrap(), data);
        assert!(!root.join("index/DIRTY").exists());
    }

    #[test]
    fn corruption_detected_on_read() {
        let (_tmp, mut store) = temp_store();
        let id = store.put(&Directory::empty().into()).unwrap();
        let path = store.object_path(ObjectType::Directory, &id);
        fs::write(&path, b"tree 1\0x").unwrap();
        assert!(matches!(
            store.get(ObjectType::Directory, &id),
            Err(StoreError::Corrupt { .. })
        ));
    }
}
