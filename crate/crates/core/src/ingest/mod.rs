//! Builds Merkle nodes from filesystem trees and git fast-export streams.

pub mod fast_export;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::model::{
    BranchTarget, Content, Directory, DirectoryEntry, EntryKind, ModelError, Node, ObjectId, ObjectType, Origin,
    Person, Release, Revision, Snapshot, SnapshotBranch, Timestamp, Visit,
};
use crate::objstore::{ArchiveStore, PutOutcome, StoreError};
use crate::swhid::SwhidCore;

pub use fast_export::{
    parse_fast_export, Command, CommitRef, DataRef, FastExportParser, FastExportStream, FileChange, ParseError,
};

pub const SYNTHETIC_AUTHOR_NAME: &str = "codevault";
pub const SYNTHETIC_AUTHOR_EMAIL: &str = "ingest@localhost";
pub const SYNTHETIC_MESSAGE: &[u8] = b"Synthetic revision for an ingested directory tree\n";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("mark :{mark} refers to a {found}, expected {expected}")]
    MarkType {
        mark: u64,
        expected: ObjectType,
        found: ObjectType,
    },
    #[error("unknown reference {0:?}")]
    UnknownRef(String),
    #[error("path {0:?} not found")]
    PathNotFound(String),
    #[error("path {0:?} traverses a non-directory")]
    BadPath(String),
    #[error("no refs produced")]
    NoRefs,
}

fn lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypeCounts {
    pub contents: u64,
    pub directories: u64,
    pub revisions: u64,
    pub releases: u64,
    pub snapshots: u64,
}

impl TypeCounts {
    pub fn get(&self, object_type: ObjectType) -> u64 {
        match object_type {
            ObjectType::Content => self.contents,
            ObjectType::Directory => self.directories,
            ObjectType::Revision => self.revisions,
            ObjectType::Release => self.releases,
            ObjectType::Snapshot => self.snapshots,
        }
    }

    fn bump(&mut self, object_type: ObjectType) {
        match object_type {
            ObjectType::Content => self.contents += 1,
            ObjectType::Directory => self.directories += 1,
            ObjectType::Revision => self.revisions += 1,
            ObjectType::Release => self.releases += 1,
            ObjectType::Snapshot => self.snapshots += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.contents + self.directories + self.revisions + self.releases + self.snapshots
    }
}

/// What an ingest wrote. `new + deduplicated` counts every node visited.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub new: TypeCounts,
    pub deduplicated: TypeCounts,
    /// Filesystem entries that are neither files, directories nor symlinks.
    pub skipped: u64,
    pub root: Option<SwhidCore>,
    pub snapshot: Option<ObjectId>,
    pub origin: Option<Origin>,
    pub visit: Option<Visit>,
}

impl IngestReport {
    pub fn visited(&self) -> u64 {
        self.new.total() + self.deduplicated.total()
    }

    fn count(&mut self, object_type: ObjectType, outcome: PutOutcome) {
        if outcome.new {
            self.new.bump(object_type);
        } else {
            self.deduplicated.bump(object_type);
        }
    }
}

/// Destination for nodes produced while walking inputs.
pub trait NodeSink {
    fn accept(&mut self, node: &Node) -> Result<PutOutcome, IngestError>;
}

impl NodeSink for ArchiveStore {
    fn accept(&mut self, node: &Node) -> Result<PutOutcome, IngestError> {
        Ok(self.put_with_outcome(node)?)
    }
}

/// Computes ids without storing anything.
#[derive(Debug, Default)]
pub struct HashOnly;

impl NodeSink for HashOnly {
    fn accept(&mut self, node: &Node) -> Result<PutOutcome, IngestError> {
        Ok(PutOutcome {
            id: node.intrinsic_id()?,
            new: true,
        })
    }
}

struct Walker<'a, S> {
    sink: &'a mut S,
    report: IngestReport,
}

impl<S: NodeSink> Walker<'_, S> {
    fn put(&mut self, node: Node) -> Result<ObjectId, IngestError> {
        let outcome = self.sink.accept(&node)?;
        self.report.count(node.object_type(), outcome);
        Ok(outcome.id)
    }

    fn directory(&mut self, path: &Path) -> Result<ObjectId, IngestError> {
        let io = |source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut entries = Vec::new();
        for entry in fs::read_dir(path).map_err(io)? {
            let entry = entry.map_err(io)?;
            let child = entry.path();
            let child_io = |source| IngestError::Io {
                path: child.clone(),
                source,
            };
            let meta = fs::symlink_metadata(&child).map_err(child_io)?;
            let name = os_name_bytes(&entry.file_name());
            let file_type = meta.file_type();
            let (kind, target) = if file_type.is_symlink() {
                let link = fs::read_link(&child).map_err(child_io)?;
                let data = os_name_bytes(link.as_os_str());
                (EntryKind::Symlink, self.put(Node::Content(Content::new(data)))?)
            } else if file_type.is_dir() {
                (EntryKind::Directory, self.directory(&child)?)
            } else if file_type.is_file() {
                let data = fs::read(&child).map_err(child_io)?;
                let kind = if is_executable(&meta) {
                    EntryKind::Executable
                } else {
                    EntryKind::File
                };
                (kind, self.put(Node::Content(Content::new(data)))?)
            } else {
                self.report.skipped += 1;
                continue;
            };
            entries.push(DirectoryEntry::new(name, kind, target));
        }
        self.put(Node::Directory(Directory::new(entries)?))
    }
}

#[cfg(unix)]
fn os_name_bytes(name: &std::ffi::OsStr) -> Vec<u8> {
    use std::os::unix::ffi::OsStrExt;
    name.as_bytes().to_vec()
}

#[cfg(not(unix))]
fn os_name_bytes(name: &std::ffi::OsStr) -> Vec<u8> {
    name.to_string_lossy().into_owned().into_bytes()
}

#[cfg(unix)]
fn is_executable(meta: &fs::Metadata) -> bool {
    use std::os::unix::fs::PermissionsExt;
    meta.permissions().mode() & 0o100 != 0
}

#[cfg(not(unix))]
fn is_executable(_meta: &fs::Metadata) -> bool {
    false
}

/// Walks a directory tree into `sink`, returning the report with
/// `root` set to the root directory.
pub fn walk_tree<S: NodeSink>(sink: &mut S, path: &Path) -> Result<IngestReport, IngestError> {
    let meta = fs::metadata(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(IngestError::NotADirectory(path.to_path_buf()));
    }
    let mut walker = Walker {
        sink,
        report: IngestReport::default(),
    };
    let root = walker.directory(path)?;
    walker.report.root = Some(SwhidCore::new(ObjectType::Directory, root));
    Ok(walker.report)
}

/// Identifier of a file or directory, computed without storing.
pub fn identify_path(path: &Path) -> Result<SwhidCore, IngestError> {
    let meta = fs::symlink_metadata(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if meta.is_dir() || (meta.file_type().is_symlink() && path.is_dir()) {
        let report = walk_tree(&mut HashOnly, path)?;
        return Ok(report.root.expect("walk sets the root"));
    }
    let data = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(SwhidCore::new(
        ObjectType::Content,
        crate::model::compute_content_checksums(&data).sha1_git,
    ))
}

/// Ingests a directory tree. With an origin, the root directory is wrapped
/// in a parentless synthetic revision, a one-branch (`HEAD`) snapshot is
/// stored and a visit is recorded at `visit_date`.
pub fn ingest_tree(
    store: &mut ArchiveStore,
    path: &Path,
    origin: Option<(&Origin, Timestamp)>,
) -> Result<IngestReport, IngestError> {
    let mut report = walk_tree(store, path)?;
    if let Some((origin, visit_date)) = origin {
        let root = report.root.expect("walk sets the root").id;
        let author = Person::new(SYNTHETIC_AUTHOR_NAME, SYNTHETIC_AUTHOR_EMAIL);
        let revision = Node::Revision(Revision {
            tree: root,
            parents: Vec::new(),
            author: author.clone(),
            author_date: visit_date,
            committer: author,
            committer_date: visit_date,
            message: SYNTHETIC_MESSAGE.to_vec(),
            extra_headers: Vec::new(),
        });
        let outcome = store.put_with_outcome(&revision)?;
        report.count(ObjectType::Revision, outcome);
        let snapshot = Node::Snapshot(Snapshot::new(vec![SnapshotBranch::new(
            "HEAD",
            BranchTarget::Object {
                target_type: ObjectType::Revision,
                id: outcome.id,
            },
        )])?);
        let outcome = store.put_with_outcome(&snapshot)?;
        report.count(ObjectType::Snapshot, outcome);
        report.visit = Some(store.record_visit(origin, visit_date, outcome.id)?);
        report.snapshot = Some(outcome.id);
        report.origin = Some(origin.clone());
    }
    store.flush()?;
    Ok(report)
}

enum MemEntry {
    Leaf { kind: EntryKind, id: ObjectId },
    Tree(MemTree),
}

/// Mutable working tree. Subtrees are loaded from the store on first
/// access; `stored` is the id of the unmodified subtree, if known.
#[derive(Default)]
struct MemTree {
    stored: Option<ObjectId>,
    children: Option<BTreeMap<Vec<u8>, MemEntry>>,
}

impl Clone for MemEntry {
    fn clone(&self) -> Self {
        match self {
            MemEntry::Leaf { kind, id } => MemEntry::Leaf { kind: *kind, id: *id },
            MemEntry::Tree(tree) => MemEntry::Tree(tree.clone()),
        }
    }
}

impl Clone for MemTree {
    fn clone(&self) -> Self {
        MemTree {
            stored: self.stored,
            children: self.children.clone(),
        }
    }
}

impl MemTree {
    fn from_stored(id: ObjectId) -> Self {
        MemTree {
            stored: Some(id),
            children: None,
        }
    }

    fn empty() -> Self {
        MemTree {
            stored: None,
            children: Some(BTreeMap::new()),
        }
    }

    fn children(&mut self, store: &ArchiveStore) -> Result<&mut BTreeMap<Vec<u8>, MemEntry>, IngestError> {
        if self.children.is_none() {
            let id = self.stored.expect("unloaded trees have a stored id");
            let Node::Directory(dir) = store.get(ObjectType::Directory, &id)? else {
                unreachable!("directory path holds a directory");
            };
            let map = dir
                .into_entries()
                .into_iter()
                .map(|e| {
                    let entry = if e.kind == EntryKind::Directory {
                        MemEntry::Tree(MemTree::from_stored(e.target))
                    } else {
                        MemEntry::Leaf {
                            kind: e.kind,
                            id: e.target,
                        }
                    };
                    (e.name, entry)
                })
                .collect();
            self.children = Some(map);
        }
        Ok(self.children.as_mut().expect("just loaded"))
    }

    fn set(&mut self, store: &ArchiveStore, path: &[&[u8]], entry: MemEntry) -> Result<(), IngestError> {
        self.children(store)?;
        self.stored = None;
        let children = self.children.as_mut().expect("loaded above");
        let (first, rest) = path.split_first().expect("non-empty path");
        if rest.is_empty() {
            children.insert(first.to_vec(), entry);
            return Ok(());
        }
        let child = children
            .entry(first.to_vec())
            .or_insert_with(|| MemEntry::Tree(MemTree::empty()));
        if let MemEntry::Leaf { .. } = child {
            *child = MemEntry::Tree(MemTree::empty());
        }
        let MemEntry::Tree(tree) = child else { unreachable!() };
        tree.set(store, rest, entry)
    }

    fn remove(&mut self, store: &ArchiveStore, path: &[&[u8]]) -> Result<Option<MemEntry>, IngestError> {
        let children = self.children(store)?;
        let (first, rest) = path.split_first().expect("non-empty path");
        let removed = if rest.is_empty() {
            children.remove(*first)
        } else {
            match children.get_mut(*first) {
                Some(MemEntry::Tree(tree)) => {
                    let removed = tree.remove(store, rest)?;
                    if removed.is_some() && tree.is_empty(store)? {
                        children.remove(*first);
                    }
                    removed
                }
                _ => None,
            }
        };
        if removed.is_some() {
            self.stored = None;
        }
        Ok(removed)
    }

    fn get(&mut self, store: &ArchiveStore, path: &[&[u8]]) -> Result<Option<MemEntry>, IngestError> {
        let children = self.children(store)?;
        let (first, rest) = path.split_first().expect("non-empty path");
        match children.get_mut(*first) {
            None => Ok(None),
            Some(entry) if rest.is_empty() => Ok(Some(entry.clone())),
            Some(MemEntry::Tree(tree)) => tree.get(store, rest),
            Some(MemEntry::Leaf { .. }) => Ok(None),
        }
    }

    fn is_empty(&mut self, store: &ArchiveStore) -> Result<bool, IngestError> {
        Ok(self.children(store)?.is_empty())
    }

    /// Stores modified subtrees bottom-up and returns this tree's id.
    /// Subtrees emptied by deletions are dropped, as git does.
    fn write(&mut self, store: &mut ArchiveStore, report: &mut IngestReport) -> Result<ObjectId, IngestError> {
        if let Some(id) = self.stored {
            return Ok(id);
        }
        let children = self.children.as_mut().expect("modified trees are loaded");
        let mut entries = Vec::with_capacity(children.len());
        for (name, entry) in children.iter_mut() {
            match entry {
                MemEntry::Leaf { kind, id } => entries.push(DirectoryEntry::new(name.clone(), *kind, *id)),
                MemEntry::Tree(tree) => {
                    if tree.stored.is_none() && tree.children.as_ref().is_some_and(BTreeMap::is_empty) {
                        continue;
                    }
                    let id = tree.write(store, report)?;
                    entries.push(DirectoryEntry::new(name.clone(), EntryKind::Directory, id));
                }
            }
        }
        let node = Node::Directory(Directory::new(entries)?);
        let outcome = store.put_with_outcome(&node)?;
        report.count(ObjectType::Directory, outcome);
        self.stored = Some(outcome.id);
        Ok(outcome.id)
    }
}

fn split_path(path: &[u8]) -> Result<Vec<&[u8]>, IngestError> {
    let parts: Vec<&[u8]> = path.split(|&b| b == b'/').collect();
    if parts.iter().any(|p| p.is_empty() || *p == b"." || *p == b"..") {
        return Err(IngestError::BadPath(lossy(path)));
    }
    Ok(parts)
}

/// Replays fast-export commands into a store.
pub struct FastExportImporter<'a> {
    store: &'a mut ArchiveStore,
    marks: HashMap<u64, (ObjectType, ObjectId)>,
    refs: BTreeMap<Vec<u8>, (ObjectType, ObjectId)>,
    /// Working tree of the most recent commit, reused when the next commit
    /// builds on it.
    last_tree: Option<(ObjectId, MemTree)>,
    report: IngestReport,
}

impl<'a> FastExportImporter<'a> {
    pub fn new(store: &'a mut ArchiveStore) -> Self {
        FastExportImporter {
            store,
            marks: HashMap::new(),
            refs: BTreeMap::new(),
            last_tree: None,
            report: IngestReport::default(),
        }
    }

    /// Mark table built so far.
    pub fn marks(&self) -> &HashMap<u64, (ObjectType, ObjectId)> {
        &self.marks
    }

    /// Current ref → target table.
    pub fn refs(&self) -> &BTreeMap<Vec<u8>, (ObjectType, ObjectId)> {
        &self.refs
    }

    fn put(&mut self, node: Node) -> Result<ObjectId, IngestError> {
        let outcome = self.store.put_with_outcome(&node)?;
        self.report.count(node.object_type(), outcome);
        Ok(outcome.id)
    }

    fn mark(&self, mark: u64) -> Result<(ObjectType, ObjectId), IngestError> {
        // The parser rejects undefined marks; this covers hand-built streams.
        self.marks.get(&mark).copied().ok_or(IngestError::Parse(ParseError {
            line: 0,
            kind: fast_export::ParseErrorKind::UndefinedMark(mark),
        }))
    }

    fn resolve(&self, reference: &CommitRef) -> Result<(ObjectType, ObjectId), IngestError> {
        match reference {
            CommitRef::Mark(mark) => self.mark(*mark),
            CommitRef::Id(id) => [ObjectType::Revision, ObjectType::Release]
                .into_iter()
                .find(|t| self.store.has_object(*t, id))
                .map(|t| (t, *id))
                .ok_or_else(|| IngestError::UnknownRef(id.to_hex())),
            CommitRef::Ref(name) => self
                .refs
                .get(name)
                .or_else(|| self.refs.get(&[b"refs/heads/".as_slice(), name].concat()))
                .copied()
                .ok_or_else(|| IngestError::UnknownRef(lossy(name))),
        }
    }

    fn resolve_commit(&self, reference: &CommitRef) -> Result<ObjectId, IngestError> {
        let (object_type, id) = self.resolve(reference)?;
        if object_type != ObjectType::Revision {
            if let CommitRef::Mark(mark) = reference {
                return Err(IngestError::MarkType {
                    mark: *mark,
                    expected: ObjectType::Revision,
                    found: object_type,
                });
            }
            return Err(IngestError::UnknownRef(id.to_hex()));
        }
        Ok(id)
    }

    fn blob(&mut self, data: &DataRef, kind: EntryKind) -> Result<ObjectId, IngestError> {
        match data {
            DataRef::Id(id) if kind == EntryKind::Revision => Ok(*id),
            DataRef::Id(id) => {
                if self.store.contains(ObjectType::Content, id) {
                    Ok(*id)
                } else {
                    Err(IngestError::UnknownRef(id.to_hex()))
                }
            }
            DataRef::Inline(bytes) => self.put(Node::Content(Content::new(bytes.clone()))),
            DataRef::Mark(mark) => match self.mark(*mark)? {
                (ObjectType::Content, id) => Ok(id),
                (found, _) => Err(IngestError::MarkType {
                    mark: *mark,
                    expected: ObjectType::Content,
                    found,
                }),
            },
        }
    }

    fn working_tree(&mut self, parent: Option<ObjectId>) -> Result<MemTree, IngestError> {
        let Some(parent) = parent else {
            return Ok(MemTree::empty());
        };
        if let Some((id, tree)) = self.last_tree.take() {
            if id == parent {
                return Ok(tree);
            }
        }
        match self.store.get(ObjectType::Revision, &parent)? {
            Node::Revision(rev) => Ok(MemTree::from_stored(rev.tree)),
            _ => unreachable!("revision path holds a revision"),
        }
    }

    pub fn apply(&mut self, command: Command) -> Result<(), IngestError> {
        match command {
            Command::Blob { mark, data } => {
                let id = self.put(Node::Content(Content::new(data)))?;
                if let Some(mark) = mark {
                    self.marks.insert(mark, (ObjectType::Content, id));
                }
            }
            Command::Commit(commit) => self.commit(commit)?,
            Command::Tag(tag) => {
                let (target_type, target) = self.resolve(&tag.from)?;
                let (author, date) = match tag.tagger {
                    Some(sig) => (Some(sig.person), Some(sig.date)),
                    None => (None, None),
                };
                let id = self.put(Node::Release(Release {
                    target,
                    target_type,
                    name: tag.name.clone(),
                    author,
                    date,
                    message: tag.message,
                }))?;
                if let Some(mark) = tag.mark {
                    self.marks.insert(mark, (ObjectType::Release, id));
                }
                let reference = [b"refs/tags/".as_slice(), &tag.name].concat();
                self.refs.insert(reference, (ObjectType::Release, id));
            }
            Command::Reset { reference, from } => match from {
                Some(from) => {
                    let target = self.resolve(&from)?;
                    self.refs.insert(reference, target);
                }
                None => {
                    self.refs.remove(&reference);
                }
            },
            Command::Feature(_) | Command::Option(_) | Command::Progress(_) | Command::Checkpoint | Command::Done => {}
        }
        Ok(())
    }

    fn commit(&mut self, commit: fast_export::CommitCommand) -> Result<(), IngestError> {
        let first_parent = match &commit.from {
            Some(from) => Some(self.resolve_commit(from)?),
            None => match self.refs.get(&commit.reference) {
                Some((ObjectType::Revision, id)) => Some(*id),
                _ => None,
            },
        };
        let mut parents: Vec<ObjectId> = first_parent.into_iter().collect();
        for merge in &commit.merges {
            parents.push(self.resolve_commit(merge)?);
        }
        let mut tree = self.working_tree(first_parent)?;
        for change in &commit.changes {
            match change {
                FileChange::Modify { kind, data, path } => {
                    let id = self.blob(data, *kind)?;
                    let parts = split_path(path)?;
                    tree.set(self.store, &parts, MemEntry::Leaf { kind: *kind, id })?;
                }
                FileChange::Delete { path } => {
                    tree.remove(self.store, &split_path(path)?)?;
                }
                FileChange::Rename { from, to } | FileChange::Copy { from, to } => {
                    let source = split_path(from)?;
                    let entry = tree
                        .get(self.store, &source)?
                        .ok_or_else(|| IngestError::PathNotFound(lossy(from)))?;
                    if matches!(change, FileChange::Rename { .. }) {
                        tree.remove(self.store, &source)?;
                    }
                    tree.set(self.store, &split_path(to)?, entry)?;
                }
                FileChange::DeleteAll => tree = MemTree::empty(),
            }
        }
        let tree_id = tree.write(self.store, &mut self.report)?;
        let committer = commit.committer;
        let author = commit.author.unwrap_or_else(|| committer.clone());
        let extra_headers = commit
            .encoding
            .map(|enc| vec![(b"encoding".to_vec(), enc)])
            .unwrap_or_default();
        let id = self.put(Node::Revision(Revision {
            tree: tree_id,
            parents,
            author: author.person,
            author_date: author.date,
            committer: committer.person,
            committer_date: committer.date,
            message: commit.message,
            extra_headers,
        }))?;
        if let Some(mark) = commit.mark {
            self.marks.insert(mark, (ObjectType::Revision, id));
        }
        self.refs.insert(commit.reference, (ObjectType::Revision, id));
        self.last_tree = Some((id, tree));
        Ok(())
    }

    /// Stores the snapshot of all refs and records the visit.
    pub fn finish(mut self, origin: &Origin, visit_date: Timestamp) -> Result<IngestReport, IngestError> {
        if self.refs.is_empty() {
            return Err(IngestError::NoRefs);
        }
        let branches = self
            .refs
            .iter()
            .map(|(name, (target_type, id))| {
                SnapshotBranch::new(
                    name.clone(),
                    BranchTarget::Object {
                        target_type: *target_type,
                        id: *id,
                    },
                )
            })
            .collect();
        let snapshot = self.put(Node::Snapshot(Snapshot::new(branches)?))?;
        let visit = self.store.record_visit(origin, visit_date, snapshot)?;
        self.store.flush()?;
        self.report.snapshot = Some(snapshot);
        self.report.origin = Some(origin.clone());
        self.report.visit = Some(visit);
        Ok(self.report)
    }
}

pub fn ingest_fast_export(
    store: &mut ArchiveStore,
    stream: FastExportStream,
    origin: &Origin,
    visit_date: Timestamp,
) -> Result<IngestReport, IngestError> {
    let mut importer = FastExportImporter::new(store);
    for command in stream.commands {
        importer.apply(command)?;
    }
    importer.finish(origin, visit_date)
}

/// Parses and replays a stream without holding every command in memory.
pub fn ingest_fast_export_reader<R: BufRead>(
    store: &mut ArchiveStore,
    input: R,
    origin: &Origin,
    visit_date: Timestamp,
) -> Result<IngestReport, IngestError> {
    let mut importer = FastExportImporter::new(store);
    for command in FastExportParser::new(input) {
        importer.apply(command?)?;
    }
    importer.finish(origin, visit_date)
}
