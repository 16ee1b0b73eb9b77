//! Merkle node kinds, their canonical manifests and intrinsic identifiers.
//!
//! Content, Directory, Revision and Release manifests are byte-compatible
//! with git's blob, tree, commit and tag objects, so an identifier computed
//! here equals the git object id of the same artifact. Snapshots use the
//! `snapshot` header and a length-delimited branch record layout.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use sha1::{Digest, Sha1};

/// Errors raised when a node violates one of its invariants or a stored
/// manifest cannot be decoded.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid object id {0:?}: expected 40 lowercase hex characters")]
    InvalidObjectId(String),
    #[error("invalid {field}: {reason}")]
    Invariant { field: &'static str, reason: String },
    #[error("duplicate {field} name {name:?}")]
    DuplicateName { field: &'static str, name: String },
    #[error("malformed {kind} manifest: {reason}")]
    MalformedManifest { kind: &'static str, reason: String },
}

impl ModelError {
    fn invariant(field: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Invariant {
            field,
            reason: reason.into(),
        }
    }

    fn malformed(kind: &'static str, reason: impl Into<String>) -> Self {
        ModelError::MalformedManifest {
            kind,
            reason: reason.into(),
        }
    }
}

/// A 20-byte intrinsic identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObjectId([u8; 20]);

impl ObjectId {
    pub const LEN: usize = 20;

    pub const fn from_bytes(bytes: [u8; 20]) -> Self {
        ObjectId(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, ModelError> {
        let arr: [u8; 20] = bytes
            .try_into()
            .map_err(|_| ModelError::InvalidObjectId(hex::encode(bytes)))?;
        Ok(ObjectId(arr))
    }

    /// Parses the 40-character display form. Uppercase hex is rejected.
    pub fn from_hex(text: &str) -> Result<Self, ModelError> {
        let bytes = text.as_bytes();
        if bytes.len() != 40 || !bytes.iter().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(ModelError::InvalidObjectId(text.to_string()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(text, &mut out).map_err(|_| ModelError::InvalidObjectId(text.to_string()))?;
        Ok(ObjectId(out))
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// SHA1 of arbitrary bytes.
    pub fn sha1_of(data: &[u8]) -> Self {
        ObjectId(Sha1::digest(data).into())
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectId({})", self.to_hex())
    }
}

impl FromStr for ObjectId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectId::from_hex(s)
    }
}

/// The five Merkle node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectType {
    Content,
    Directory,
    Revision,
    Release,
    Snapshot,
}

impl ObjectType {
    pub const ALL: [ObjectType; 5] = [
        ObjectType::Content,
        ObjectType::Directory,
        ObjectType::Revision,
        ObjectType::Release,
        ObjectType::Snapshot,
    ];

    /// Three-letter tag used in SWHIDs.
    pub fn tag(self) -> &'static str {
        match self {
            ObjectType::Content => "cnt",
            ObjectType::Directory => "dir",
            ObjectType::Revision => "rev",
            ObjectType::Release => "rel",
            ObjectType::Snapshot => "snp",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        ObjectType::ALL.into_iter().find(|t| t.tag() == tag)
    }

    /// Type name written in the manifest header.
    pub fn manifest_name(self) -> &'static str {
        match self {
            ObjectType::Content => "blob",
            ObjectType::Directory => "tree",
            ObjectType::Revision => "commit",
            ObjectType::Release => "tag",
            ObjectType::Snapshot => "snapshot",
        }
    }

    pub fn from_manifest_name(name: &[u8]) -> Option<Self> {
        ObjectType::ALL
            .into_iter()
            .find(|t| t.manifest_name().as_bytes() == name)
    }

    /// Long name used in snapshot branch records and dataset tables.
    pub fn long_name(self) -> &'static str {
        match self {
            ObjectType::Content => "content",
            ObjectType::Directory => "directory",
            ObjectType::Revision => "revision",
            ObjectType::Release => "release",
            ObjectType::Snapshot => "snapshot",
        }
    }

    pub fn from_long_name(name: &str) -> Option<Self> {
        ObjectType::ALL.into_iter().find(|t| t.long_name() == name)
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.long_name())
    }
}

/// Raw file bytes. Names live in the parent directory, not here.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Content {
    pub data: Vec<u8>,
}

impl Content {
    pub fn new(data: impl Into<Vec<u8>>) -> Self {
        Content { data: data.into() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn checksums(&self) -> ContentChecksums {
        compute_content_checksums(&self.data)
    }
}

/// Plain SHA1 (the blob access key) and salted git SHA1 (the `cnt` hash).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContentChecksums {
    pub sha1: ObjectId,
    pub sha1_git: ObjectId,
}

pub fn compute_content_checksums(data: &[u8]) -> ContentChecksums {
    let mut git = Sha1::new();
    git.update(format!("blob {}\0", data.len()).as_bytes());
    git.update(data);
    ContentChecksums {
        sha1: ObjectId::sha1_of(data),
        sha1_git: ObjectId(git.finalize().into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntryKind {
    File,
    Executable,
    Symlink,
    Directory,
    /// A pointer to a revision, e.g. a git submodule.
    Revision,
}

impl EntryKind {
    pub fn perms(self) -> &'static str {
        match self {
            EntryKind::File => "100644",
            EntryKind::Executable => "100755",
            EntryKind::Symlink => "120000",
            EntryKind::Directory => "40000",
            EntryKind::Revision => "160000",
        }
    }

    pub fn from_perms(perms: &str) -> Option<Self> {
        Some(match perms {
            "100644" => EntryKind::File,
            "100755" => EntryKind::Executable,
            "120000" => EntryKind::Symlink,
            "40000" => EntryKind::Directory,
            "160000" => EntryKind::Revision,
            _ => return None,
        })
    }

    /// Node type the entry target refers to.
    pub fn target_type(self) -> ObjectType {
        match self {
            EntryKind::File | EntryKind::Executable | EntryKind::Symlink => ObjectType::Content,
            EntryKind::Directory => ObjectType::Directory,
            EntryKind::Revision => ObjectType::Revision,
        }
    }

    /// Short label: `file`, `dir` or `rev`.
    pub fn label(self) -> &'static str {
        match self.target_type() {
            ObjectType::Content => "file",
            ObjectType::Directory => "dir",
            _ => "rev",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirectoryEntry {
    pub name: Vec<u8>,
    pub kind: EntryKind,
    pub target: ObjectId,
}

impl DirectoryEntry {
    pub fn new(name: impl Into<Vec<u8>>, kind: EntryKind, target: ObjectId) -> Self {
        DirectoryEntry {
            name: name.into(),
            kind,
            target,
        }
    }

    pub fn perms(&self) -> &'static str {
        self.kind.perms()
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.name.is_empty() {
            return Err(ModelError::invariant("directory entry name", "empty name"));
        }
        if self.name.iter().any(|&b| b == 0 || b == b'/') {
            return Err(ModelError::invariant(
                "directory entry name",
                format!("{:?} contains NUL or '/'", String::from_utf8_lossy(&self.name)),
            ));
        }
        Ok(())
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        let a = self.name.iter().chain(dir_suffix(self.kind));
        let b = other.name.iter().chain(dir_suffix(other.kind));
        a.cmp(b)
    }
}

fn dir_suffix(kind: EntryKind) -> std::slice::Iter<'static, u8> {
    if kind == EntryKind::Directory {
        b"/".iter()
    } else {
        b"".iter()
    }
}

/// Sorts entries in canonical order: byte order on the name, with directory
/// names compared as if suffixed by `/`.
pub fn sort_directory_entries(mut entries: Vec<DirectoryEntry>) -> Result<Vec<DirectoryEntry>, ModelError> {
    for entry in &entries {
        entry.validate()?;
    }
    entries.sort_by(|a, b| a.sort_key_cmp(b));
    let mut names: Vec<&[u8]> = entries.iter().map(|e| e.name.as_slice()).collect();
    names.sort_unstable();
    if let Some(dup) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(ModelError::DuplicateName {
            field: "directory entry",
            name: String::from_utf8_lossy(dup[0]).into_owned(),
        });
    }
    Ok(entries)
}

/// A named mapping from entry names to child objects. Entries are kept in
/// canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Directory {
    entries: Vec<DirectoryEntry>,
}

impl Directory {
    pub fn new(entries: Vec<DirectoryEntry>) -> Result<Self, ModelError> {
        Ok(Directory {
            entries: sort_directory_entries(entries)?,
        })
    }

    pub fn empty() -> Self {
        Directory::default()
    }

    pub fn entries(&self) -> &[DirectoryEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<DirectoryEntry> {
        self.entries
    }

    pub fn get(&self, name: &[u8]) -> Option<&DirectoryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Person {
    pub name: Vec<u8>,
    pub email: Vec<u8>,
}

impl Person {
    pub fn new(name: impl Into<Vec<u8>>, email: impl Into<Vec<u8>>) -> Self {
        Person {
            name: name.into(),
            email: email.into(),
        }
    }

    fn validate(&self, field: &'static str) -> Result<(), ModelError> {
        let bad = |b: &u8| matches!(b, b'<' | b'>' | b'\n');
        if self.name.iter().any(bad) || self.email.iter().any(bad) {
            return Err(ModelError::invariant(
                field,
                "name and email must not contain '<', '>' or newline",
            ));
        }
        Ok(())
    }

    /// `name <email>`, keeping the separator even for an empty name as git does.
    fn write_ident(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.name);
        out.extend_from_slice(b" <");
        out.extend_from_slice(&self.email);
        out.push(b'>');
    }
}

/// Seconds since the Unix epoch plus the author's UTC offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    pub seconds: i64,
    pub offset_minutes: i16,
    /// Distinguishes git's `-0000` from `+0000`; only meaningful when the
    /// offset is zero.
    pub negative_utc: bool,
}

impl Timestamp {
    pub const MAX_OFFSET: i16 = 1440;

    pub fn new(seconds: i64, offset_minutes: i16) -> Self {
        Timestamp {
            seconds,
            offset_minutes,
            negative_utc: false,
        }
    }

    pub fn utc(seconds: i64) -> Self {
        Timestamp::new(seconds, 0)
    }

    /// `+HHMM` / `-HHMM`.
    pub fn offset_string(&self) -> String {
        let sign = if self.offset_minutes < 0 || (self.offset_minutes == 0 && self.negative_utc) {
            '-'
        } else {
            '+'
        };
        let abs = self.offset_minutes.unsigned_abs();
        format!("{sign}{:02}{:02}", abs / 60, abs % 60)
    }

    pub fn parse_offset(text: &str) -> Option<(i16, bool)> {
        let bytes = text.as_bytes();
        if bytes.len() != 5 || !bytes[1..].iter().all(u8::is_ascii_digit) {
            return None;
        }
        let negative = match bytes[0] {
            b'+' => false,
            b'-' => true,
            _ => return None,
        };
        let hours: i16 = text[1..3].parse().ok()?;
        let minutes: i16 = text[3..5].parse().ok()?;
        let total = hours * 60 + minutes;
        if total > Timestamp::MAX_OFFSET {
            return None;
        }
        let offset = if negative { -total } else { total };
        Some((offset, negative && total == 0))
    }

    /// Parses `<seconds> <±HHMM>`; a missing offset means `+0000`.
    pub fn parse(text: &str) -> Option<Self> {
        let mut parts = text.split(' ');
        let seconds: i64 = parts.next()?.parse().ok()?;
        let (offset_minutes, negative_utc) = match parts.next() {
            Some(tz) => Timestamp::parse_offset(tz)?,
            None => (0, false),
        };
        if parts.next().is_some() {
            return None;
        }
        Some(Timestamp {
            seconds,
            offset_minutes,
            negative_utc,
        })
    }

    fn validate(&self, field: &'static str) -> Result<(), ModelError> {
        if self.offset_minutes.abs() > Timestamp::MAX_OFFSET {
            return Err(ModelError::invariant(
                field,
                format!("timezone offset {} out of range", self.offset_minutes),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.seconds, self.offset_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    pub tree: ObjectId,
    pub parents: Vec<ObjectId>,
    pub author: Person,
    pub author_date: Timestamp,
    pub committer: Person,
    pub committer_date: Timestamp,
    pub message: Vec<u8>,
    /// Headers after `committer`, in order (e.g. `encoding`, `gpgsig`).
    pub extra_headers: Vec<(Vec<u8>, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub target: ObjectId,
    pub target_type: ObjectType,
    pub name: Vec<u8>,
    pub author: Option<Person>,
    pub date: Option<Timestamp>,
    pub message: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BranchTarget {
    Object {
        target_type: ObjectType,
        id: ObjectId,
    },
    /// Name of another branch of the same snapshot.
    Alias(Vec<u8>),
    Dangling,
}

impl BranchTarget {
    pub fn type_name(&self) -> &'static str {
        match self {
            BranchTarget::Object { target_type, .. } => target_type.long_name(),
            BranchTarget::Alias(_) => "alias",
            BranchTarget::Dangling => "dangling",
        }
    }

    fn target_bytes(&self) -> &[u8] {
        match self {
            BranchTarget::Object { id, .. } => id.as_bytes(),
            BranchTarget::Alias(name) => name,
            BranchTarget::Dangling => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SnapshotBranch {
    pub name: Vec<u8>,
    pub target: BranchTarget,
}

impl SnapshotBranch {
    pub fn new(name: impl Into<Vec<u8>>, target: BranchTarget) -> Self {
        SnapshotBranch {
            name: name.into(),
            target,
        }
    }
}

/// Full branch → target map of a repository. Branches are kept sorted by
/// raw name bytes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Snapshot {
    branches: Vec<SnapshotBranch>,
}

impl Snapshot {
    pub fn new(mut branches: Vec<SnapshotBranch>) -> Result<Self, ModelError> {
        branches.sort_by(|a, b| a.name.cmp(&b.name));
        for pair in branches.windows(2) {
            if pair[0].name == pair[1].name {
                return Err(ModelError::DuplicateName {
                    field: "snapshot branch",
                    name: String::from_utf8_lossy(&pair[0].name).into_owned(),
                });
            }
        }
        let snapshot = Snapshot { branches };
        snapshot.validate()?;
        Ok(snapshot)
    }

    pub fn branches(&self) -> &[SnapshotBranch] {
        &self.branches
    }

    pub fn get(&self, name: &[u8]) -> Option<&BranchTarget> {
        self.branches
            .binary_search_by(|b| b.name.as_slice().cmp(name))
            .ok()
            .map(|i| &self.branches[i].target)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for branch in &self.branches {
            if branch.name.is_empty() {
                return Err(ModelError::invariant("snapshot branch name", "empty name"));
            }
            if let BranchTarget::Alias(target) = &branch.target {
                if self.get(target).is_none() {
                    return Err(ModelError::invariant(
                        "snapshot branch target",
                        format!(
                            "alias {:?} points to missing branch {:?}",
                            String::from_utf8_lossy(&branch.name),
                            String::from_utf8_lossy(target)
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A place where artifacts were found, identified by URL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Origin {
    url: String,
}

impl Origin {
    pub fn new(url: impl Into<String>) -> Result<Self, ModelError> {
        let url = url.into();
        if url.is_empty() {
            return Err(ModelError::invariant("origin url", "empty"));
        }
        if url.chars().any(|c| c.is_control()) || url::Url::parse(&url).is_err() {
            return Err(ModelError::invariant("origin url", format!("{url:?} is not a URI")));
        }
        Ok(Origin { url })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.url)
    }
}

/// One timestamped visit of an origin; `number` counts visits of the same
/// origin from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Visit {
    pub origin: Origin,
    pub number: u64,
    pub date: Timestamp,
    pub snapshot: ObjectId,
}

/// One Merkle DAG node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Content(Content),
    Directory(Directory),
    Revision(Revision),
    Release(Release),
    Snapshot(Snapshot),
}

impl Node {
    pub fn object_type(&self) -> ObjectType {
        match self {
            Node::Content(_) => ObjectType::Content,
            Node::Directory(_) => ObjectType::Directory,
            Node::Revision(_) => ObjectType::Revision,
            Node::Release(_) => ObjectType::Release,
            Node::Snapshot(_) => ObjectType::Snapshot,
        }
    }

    /// Outgoing edges as `(type, id)` pairs, in manifest order.
    pub fn children(&self) -> Vec<(ObjectType, ObjectId)> {
        match self {
            Node::Content(_) => Vec::new(),
            Node::Directory(dir) => dir.entries.iter().map(|e| (e.kind.target_type(), e.target)).collect(),
            Node::Revision(rev) => std::iter::once((ObjectType::Directory, rev.tree))
                .chain(rev.parents.iter().map(|p| (ObjectType::Revision, *p)))
                .collect(),
            Node::Release(rel) => vec![(rel.target_type, rel.target)],
            Node::Snapshot(snp) => snp
                .branches
                .iter()
                .filter_map(|b| match b.target {
                    BranchTarget::Object { target_type, id } => Some((target_type, id)),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn intrinsic_id(&self) -> Result<ObjectId, ModelError> {
        intrinsic_id(self)
    }
}

impl From<Content> for Node {
    fn from(v: Content) -> Self {
        Node::Content(v)
    }
}
impl From<Directory> for Node {
    fn from(v: Directory) -> Self {
        Node::Directory(v)
    }
}
impl From<Revision> for Node {
    fn from(v: Revision) -> Self {
        Node::Revision(v)
    }
}
impl From<Release> for Node {
    fn from(v: Release) -> Self {
        Node::Release(v)
    }
}
impl From<Snapshot> for Node {
    fn from(v: Snapshot) -> Self {
        Node::Snapshot(v)
    }
}

fn with_header(kind: ObjectType, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 24);
    out.extend_from_slice(kind.manifest_name().as_bytes());
    out.push(b' ');
    out.extend_from_slice(body.len().to_string().as_bytes());
    out.push(0);
    out.extend_from_slice(body);
    out
}

fn write_signature(out: &mut Vec<u8>, key: &str, person: &Person, date: &Timestamp) {
    out.extend_from_slice(key.as_bytes());
    out.push(b' ');
    person.write_ident(out);
    out.push(b' ');
    out.extend_from_slice(date.to_string().as_bytes());
    out.push(b'\n');
}

fn directory_body(dir: &Directory) -> Result<Vec<u8>, ModelError> {
    let mut body = Vec::with_capacity(dir.entries.len() * 40);
    for (i, entry) in dir.entries.iter().enumerate() {
        entry.validate()?;
        if i > 0 && dir.entries[i - 1].sort_key_cmp(entry) != Ordering::Less {
            return Err(ModelError::invariant(
                "directory entries",
                "not in canonical order or duplicated",
            ));
        }
        body.extend_from_slice(entry.perms().as_bytes());
        body.push(b' ');
        body.extend_from_slice(&entry.name);
        body.push(0);
        body.extend_from_slice(entry.target.as_bytes());
    }
    Ok(body)
}

fn revision_body(rev: &Revision) -> Result<Vec<u8>, ModelError> {
    rev.author.validate("revision author")?;
    rev.committer.validate("revision committer")?;
    rev.author_date.validate("revision author date")?;
    rev.committer_date.validate("revision committer date")?;
    let mut body = Vec::with_capacity(256 + rev.message.len());
    body.extend_from_slice(format!("tree {}\n", rev.tree).as_bytes());
    for parent in &rev.parents {
        body.extend_from_slice(format!("parent {parent}\n").as_bytes());
    }
    write_signature(&mut body, "author", &rev.author, &rev.author_date);
    write_signature(&mut body, "committer", &rev.committer, &rev.committer_date);
    for (key, value) in &rev.extra_headers {
        if key.is_empty() || key.iter().any(|&b| b == b' ' || b == b'\n') {
            return Err(ModelError::invariant(
                "revision extra header",
                format!("bad key {:?}", String::from_utf8_lossy(key)),
            ));
        }
        body.extend_from_slice(key);
        body.push(b' ');
        for (i, line) in value.split(|&b| b == b'\n').enumerate() {
            if i > 0 {
                body.extend_from_slice(b"\n ");
            }
            body.extend_from_slice(line);
        }
        body.push(b'\n');
    }
    body.push(b'\n');
    body.extend_from_slice(&rev.message);
    Ok(body)
}

fn release_body(rel: &Release) -> Result<Vec<u8>, ModelError> {
    if rel.name.is_empty() || rel.name.iter().any(|&b| b == 0 || b == b'\n') {
        return Err(ModelError::invariant(
            "release name",
            "must be non-empty without NUL or newline",
        ));
    }
    let mut body = Vec::with_capacity(128 + rel.message.len());
    body.extend_from_slice(format!("object {}\n", rel.target).as_bytes());
    body.extend_from_slice(format!("type {}\n", rel.target_type.manifest_name()).as_bytes());
    body.extend_from_slice(b"tag ");
    body.extend_from_slice(&rel.name);
    body.push(b'\n');
    match (&rel.author, &rel.date) {
        (Some(person), Some(date)) => {
            person.validate("release author")?;
            date.validate("release date")?;
            write_signature(&mut body, "tagger", person, date);
        }
        (None, None) => {}
        _ => {
            return Err(ModelError::invariant(
                "release author",
                "author and date must be both present or both absent",
            ))
        }
    }
    body.push(b'\n');
    body.extend_from_slice(&rel.message);
    Ok(body)
}

fn snapshot_body(snp: &Snapshot) -> Result<Vec<u8>, ModelError> {
    snp.validate()?;
    let mut body = Vec::new();
    for (i, branch) in snp.branches.iter().enumerate() {
        if i > 0 && snp.branches[i - 1].name >= branch.name {
            return Err(ModelError::invariant("snapshot branches", "not sorted or duplicated"));
        }
        let target = branch.target.target_bytes();
        body.extend_from_slice(branch.target.type_name().as_bytes());
        body.push(b' ');
        body.extend_from_slice(&branch.name);
        body.push(0);
        body.extend_from_slice(format!("{}:", target.len()).as_bytes());
        body.extend_from_slice(target);
    }
    Ok(body)
}

/// Header and body of the node's canonical byte form.
pub fn canonical_manifest(node: &Node) -> Result<Vec<u8>, ModelError> {
    let kind = node.object_type();
    let body = match node {
        Node::Content(c) => return Ok(with_header(kind, &c.data)),
        Node::Directory(d) => directory_body(d)?,
        Node::Revision(r) => revision_body(r)?,
        Node::Release(r) => release_body(r)?,
        Node::Snapshot(s) => snapshot_body(s)?,
    };
    Ok(with_header(kind, &body))
}

/// SHA1 of the canonical manifest.
pub fn intrinsic_id(node: &Node) -> Result<ObjectId, ModelError> {
    if let Node::Content(c) = node {
        return Ok(compute_content_checksums(&c.data).sha1_git);
    }
    Ok(ObjectId::sha1_of(&canonical_manifest(node)?))
}

/// Splits `type SP len NUL body`, checking the declared length.
pub fn split_manifest(manifest: &[u8]) -> Result<(ObjectType, &[u8]), ModelError> {
    let nul = manifest
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| ModelError::malformed("object", "missing header terminator"))?;
    let header = &manifest[..nul];
    let space = header
        .iter()
        .position(|&b| b == b' ')
        .ok_or_else(|| ModelError::malformed("object", "missing header separator"))?;
    let kind = ObjectType::from_manifest_name(&header[..space])
        .ok_or_else(|| ModelError::malformed("object", "unknown type name"))?;
    let declared: usize = std::str::from_utf8(&header[space + 1..])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ModelError::malformed("object", "bad length"))?;
    let body = &manifest[nul + 1..];
    if body.len() != declared {
        return Err(ModelError::malformed(
            "object",
            format!("declared length {declared}, found {}", body.len()),
        ));
    }
    Ok((kind, body))
}

/// Decodes a canonical manifest back into a node.
pub fn parse_manifest(manifest: &[u8]) -> Result<Node, ModelError> {
    let (kind, body) = split_manifest(manifest)?;
    Ok(match kind {
        ObjectType::Content => Node::Content(Content::new(body)),
        ObjectType::Directory => Node::Directory(parse_directory(body)?),
        ObjectType::Revision => Node::Revision(parse_revision(body)?),
        ObjectType::Release => Node::Release(parse_release(body)?),
        ObjectType::Snapshot => Node::Snapshot(parse_snapshot(body)?),
    })
}

fn parse_directory(mut body: &[u8]) -> Result<Directory, ModelError> {
    let bad = |r: &str| ModelError::malformed("tree", r);
    let mut entries = Vec::new();
    while !body.is_empty() {
        let space = body
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| bad("missing mode separator"))?;
        let perms = std::str::from_utf8(&body[..space]).map_err(|_| bad("non-ascii mode"))?;
        let kind = EntryKind::from_perms(perms).ok_or_else(|| bad(&format!("unsupported mode {perms}")))?;
        body = &body[space + 1..];
        let nul = body
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| bad("missing name terminator"))?;
        let name = body[..nul].to_vec();
        body = &body[nul + 1..];
        if body.len() < 20 {
            return Err(bad("truncated target"));
        }
        let target = ObjectId::from_slice(&body[..20])?;
        body = &body[20..];
        entries.push(DirectoryEntry { name, kind, target });
    }
    let dir = Directory { entries };
    // Rejects non-canonical order instead of silently re-sorting.
    directory_body(&dir)?;
    Ok(dir)
}

struct HeaderLines<'a> {
    rest: &'a [u8],
}

/// A header key and its unfolded value.
type Header<'a> = (&'a [u8], Vec<u8>);

impl<'a> HeaderLines<'a> {
    /// Next `key value` header, folding continuation lines. Returns `None`
    /// at the blank line that separates headers from the message.
    fn next_header(&mut self, kind: &'static str) -> Result<Option<Header<'a>>, ModelError> {
        let line = self.take_line(kind)?;
        if line.is_empty() {
            return Ok(None);
        }
        let space = line
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| ModelError::malformed(kind, "header without value"))?;
        let mut value = line[space + 1..].to_vec();
        while self.rest.first() == Some(&b' ') {
            let cont = self.take_line(kind)?;
            value.push(b'\n');
            value.extend_from_slice(&cont[1..]);
        }
        Ok(Some((&line[..space], value)))
    }

    fn take_line(&mut self, kind: &'static str) -> Result<&'a [u8], ModelError> {
        let nl = self
            .rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ModelError::malformed(kind, "unterminated header"))?;
        let line = &self.rest[..nl];
        self.rest = &self.rest[nl + 1..];
        Ok(line)
    }
}

fn parse_hex_value(kind: &'static str, value: &[u8]) -> Result<ObjectId, ModelError> {
    std::str::from_utf8(value)
        .ok()
        .and_then(|s| ObjectId::from_hex(s).ok())
        .ok_or_else(|| ModelError::malformed(kind, "bad object id"))
}

/// Parses `name <email> seconds tz`.
pub fn parse_signature(value: &[u8]) -> Option<(Person, Timestamp)> {
    let lt = value.iter().position(|&b| b == b'<')?;
    let gt = lt + value[lt..].iter().position(|&b| b == b'>')?;
    let name = if lt == 0 {
        Vec::new()
    } else if value[lt - 1] == b' ' {
        value[..lt - 1].to_vec()
    } else {
        return None;
    };
    let email = value[lt + 1..gt].to_vec();
    let rest = value.get(gt + 1..)?;
    let rest = rest.strip_prefix(b" ")?;
    let date = Timestamp::parse(std::str::from_utf8(rest).ok()?)?;
    Some((Person { name, email }, date))
}

fn parse_revision(body: &[u8]) -> Result<Revision, ModelError> {
    const KIND: &str = "commit";
    let mut lines = HeaderLines { rest: body };
    let mut tree = None;
    let mut parents = Vec::new();
    let mut author = None;
    let mut committer = None;
    let mut extra_headers = Vec::new();
    while let Some((key, value)) = lines.next_header(KIND)? {
        match key {
            b"tree" if tree.is_none() && parents.is_empty() => tree = Some(parse_hex_value(KIND, &value)?),
            b"parent" if tree.is_some() && author.is_none() => parents.push(parse_hex_value(KIND, &value)?),
            b"author" if tree.is_some() && author.is_none() => {
                author = Some(parse_signature(&value).ok_or_else(|| ModelError::malformed(KIND, "bad author line"))?)
            }
            b"committer" if author.is_some() && committer.is_none() => {
                committer =
                    Some(parse_signature(&value).ok_or_else(|| ModelError::malformed(KIND, "bad committer line"))?)
            }
            _ if committer.is_some() => extra_headers.push((key.to_vec(), value)),
            _ => {
                return Err(ModelError::malformed(
                    KIND,
                    format!("unexpected header {:?}", String::from_utf8_lossy(key)),
                ))
            }
        }
    }
    let (author, author_date) = author.ok_or_else(|| ModelError::malformed(KIND, "no author"))?;
    let (committer, committer_date) = committer.ok_or_else(|| ModelError::malformed(KIND, "no committer"))?;
    Ok(Revision {
        tree: tree.ok_or_else(|| ModelError::malformed(KIND, "no tree"))?,
        parents,
        author,
        author_date,
        committer,
        committer_date,
        message: lines.rest.to_vec(),
        extra_headers,
    })
}

fn parse_release(body: &[u8]) -> Result<Release, ModelError> {
    const KIND: &str = "tag";
    let mut lines = HeaderLines { rest: body };
    let mut fields: Vec<(&[u8], Vec<u8>)> = Vec::new();
    while let Some(header) = lines.next_header(KIND)? {
        fields.push(header);
    }
    let expect = |i: usize, key: &[u8]| -> Result<&Vec<u8>, ModelError> {
        match fields.get(i) {
            Some((k, v)) if *k == key => Ok(v),
            _ => Err(ModelError::malformed(
                KIND,
                format!("expected {:?} header", String::from_utf8_lossy(key)),
            )),
        }
    };
    let target = parse_hex_value(KIND, expect(0, b"object")?)?;
    let target_type = ObjectType::from_manifest_name(expect(1, b"type")?)
        .ok_or_else(|| ModelError::malformed(KIND, "unknown target type"))?;
    let name = expect(2, b"tag")?.clone();
    let (author, date) = match fields.len() {
        3 => (None, None),
        4 => {
            let (p, d) =
                parse_signature(expect(3, b"tagger")?).ok_or_else(|| ModelError::malformed(KIND, "bad tagger line"))?;
            (Some(p), Some(d))
        }
        _ => return Err(ModelError::malformed(KIND, "unexpected extra headers")),
    };
    Ok(Release {
        target,
        target_type,
        name,
        author,
        date,
        message: lines.rest.to_vec(),
    })
}

fn parse_snapshot(mut body: &[u8]) -> Result<Snapshot, ModelError> {
    const KIND: &str = "snapshot";
    let bad = |r: &str| ModelError::malformed(KIND, r);
    let mut branches = Vec::new();
    while !body.is_empty() {
        let space = body
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| bad("missing type separator"))?;
        let type_name = std::str::from_utf8(&body[..space]).map_err(|_| bad("bad type"))?;
        body = &body[space + 1..];
        let nul = body
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| bad("missing name terminator"))?;
        let name = body[..nul].to_vec();
        body = &body[nul + 1..];
        let colon = body
            .iter()
            .position(|&b| b == b':')
            .ok_or_else(|| bad("missing target length"))?;
        let len: usize = std::str::from_utf8(&body[..colon])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad target length"))?;
        body = &body[colon + 1..];
        if body.len() < len {
            return Err(bad("truncated target"));
        }
        let raw = &body[..len];
        body = &body[len..];
        let target = match type_name {
            "alias" => BranchTarget::Alias(raw.to_vec()),
            "dangling" if raw.is_empty() => BranchTarget::Dangling,
            other => BranchTarget::Object {
                target_type: ObjectType::from_long_name(other)
                    .ok_or_else(|| bad(&format!("unknown target type {other}")))?,
                id: ObjectId::from_slice(raw).map_err(|_| bad("target is not 20 bytes"))?,
            },
        };
        branches.push(SnapshotBranch { name, target });
    }
    let snapshot = Snapshot { branches };
    snapshot_body(&snapshot)?;
    Ok(snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(hex: &str) -> ObjectId {
        ObjectId::from_hex(hex).unwrap()
    }

    fn sample_revision(parents: Vec<ObjectId>) -> Revision {
        Revision {
            tree: id("4b825dc642cb6eb9a060e54bf8d69288fbee4904"),
            parents,
            author: Person::new("Ada", "ada@example.org"),
            author_date: Timestamp::new(1_600_000_000, 120),
            committer: Person::new("Bob", "bob@example.org"),
            committer_date: Timestamp::new(1_600_000_100, -300),
            message: b"Initial import\n".to_vec(),
            extra_headers: vec![],
        }
    }

    #[test]
    fn object_id_hex_round_trip() {
        let hex = "c839dea9e8e6f0528b468214348fee8669b305b2";
        assert_eq!(id(hex).to_string(), hex);
        assert!(ObjectId::from_hex(&hex.to_uppercase()).is_err());
        assert!(ObjectId::from_hex(&hex[..39]).is_err());
        assert!(ObjectId::from_hex("g839dea9e8e6f0528b468214348fee8669b305b2").is_err());
    }

    #[test]
    fn empty_content_checksums() {
        let sums = compute_content_checksums(b"");
        assert_eq!(sums.sha1.to_hex(), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
        assert_eq!(sums.sha1_git.to_hex(), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }

    #[test]
    fn single_byte_content_unfolds_to_salted_sha1() {
        let sums = compute_content_checksums(b"x");
        assert_eq!(sums.sha1_git, ObjectId::sha1_of(b"blob 1\0x"));
    }

    #[test]
    fn directories_sort_after_files_with_dot() {
        let blob = compute_content_checksums(b"").sha1_git;
        let empty = id("4b825dc642cb6eb9a060e54bf8d69288fbee4904");
        let sorted = sort_directory_entries(vec![
            DirectoryEntry::new("a", EntryKind::Directory, empty),
            DirectoryEntry::new("a.txt", EntryKind::File, blob),
        ])
        .unwrap();
        assert_eq!(sorted[0].name, b"a.txt");
        assert_eq!(sorted[1].name, b"a");

        let sorted = sort_directory_entries(vec![
            DirectoryEntry::new("b", EntryKind::File, blob),
            DirectoryEntry::new("a", EntryKind::File, blob),
        ])
        .unwrap();
        assert_eq!(sorted[0].name, b"a");
        assert!(sort_directory_entries(vec![]).unwrap().is_empty());
    }

    #[test]
    fn duplicate_and_bad_names_rejected() {
        let blob = compute_content_checksums(b"").sha1_git;
        let err = Directory::new(vec![
            DirectoryEntry::new("a", EntryKind::File, blob),
            DirectoryEntry::new("a", EntryKind::Directory, blob),
        ])
        .unwrap_err();
        assert!(matches!(err, ModelError::DuplicateName { .. }));
        for name in [&b""[..], b"a/b", b"a\0b"] {
            assert!(Directory::new(vec![DirectoryEntry::new(name, EntryKind::File, blob)]).is_err());
        }
    }

    #[test]
    fn empty_tree_id() {
        let node = Node::Directory(Directory::empty());
        assert_eq!(canonical_manifest(&node).unwrap(), b"tree 0\0");
        assert_eq!(
            intrinsic_id(&node).unwrap().to_hex(),
            "4b825dc642cb6eb9a060e54bf8d69288fbee4904"
        );
    }

    #[test]
    fn empty_snapshot_manifest() {
        let node = Node::Snapshot(Snapshot::new(vec![]).unwrap());
        assert_eq!(canonical_manifest(&node).unwrap(), b"snapshot 0\0");
    }

    #[test]
    fn entry_order_does_not_change_id() {
        let a = compute_content_checksums(b"a").sha1_git;
        let b = compute_content_checksums(b"b").sha1_git;
        let entries = vec![
            DirectoryEntry::new("x", EntryKind::File, a),
            DirectoryEntry::new("y", EntryKind::Executable, b),
            DirectoryEntry::new("z", EntryKind::Symlink, a),
        ];
        let mut reversed = entries.clone();
        reversed.reverse();
        let one = intrinsic_id(&Directory::new(entries).unwrap().into()).unwrap();
        let two = intrinsic_id(&Directory::new(reversed).unwrap().into()).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn revision_manifest_layout() {
        let parent = id("c839dea9e8e6f0528b468214348fee8669b305b2");
        let node = Node::Revision(sample_revision(vec![parent]));
        let manifest = canonical_manifest(&node).unwrap();
        let (_, body) = split_manifest(&manifest).unwrap();
        let text = String::from_utf8(body.to_vec()).unwrap();
        assert!(text.starts_with("tree "));
        assert_eq!(text.matches("\nparent ").count(), 1);
        assert!(text.contains("author Ada <ada@example.org> 1600000000 +0200\n"));
        assert!(text.contains("committer Bob <bob@example.org> 1600000100 -0500\n"));
        assert!(text.ends_with("\n\nInitial import\n"));
    }

    #[test]
    fn parent_order_is_hash_significant() {
        let p1 = id("c839dea9e8e6f0528b468214348fee8669b305b2");
        let p2 = id("1fee702c7e6d14395bbf5ac3598e73bcbf97b030");
        let a = intrinsic_id(&sample_revision(vec![p1, p2]).into()).unwrap();
        let b = intrinsic_id(&sample_revision(vec![p2, p1]).into()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn multiline_extra_header_round_trips() {
        let mut rev = sample_revision(vec![]);
        rev.extra_headers = vec![
            (b"encoding".to_vec(), b"ISO-8859-1".to_vec()),
            (b"gpgsig".to_vec(), b"-----BEGIN-----\nabc\n-----END-----".to_vec()),
        ];
        let node = Node::Revision(rev);
        let manifest = canonical_manifest(&node).unwrap();
        assert!(manifest.windows(6).any(|w| w == b"\n abc\n"));
        assert_eq!(parse_manifest(&manifest).unwrap(), node);
    }

    #[test]
    fn release_without_tagger_omits_line() {
        let rel = Release {
            target: id("c839dea9e8e6f0528b468214348fee8669b305b2"),
            target_type: ObjectType::Revision,
            name: b"v1.0".to_vec(),
            author: None,
            date: None,
            message: b"First\n".to_vec(),
        };
        let node = Node::Release(rel);
        let manifest = canonical_manifest(&node).unwrap();
        let (_, body) = split_manifest(&manifest).unwrap();
        assert_eq!(
            body,
            b"object c839dea9e8e6f0528b468214348fee8669b305b2\ntype commit\ntag v1.0\n\nFirst\n"
        );
        assert_eq!(parse_manifest(&manifest).unwrap(), node);
    }

    #[test]
    fn release_half_tagger_is_invalid() {
        let rel = Release {
            target: id("c839dea9e8e6f0528b468214348fee8669b305b2"),
            target_type: ObjectType::Revision,
            name: b"v1".to_vec(),
            author: Some(Person::new("a", "b")),
            date: None,
            message: vec![],
        };
        assert!(matches!(
            intrinsic_id(&rel.into()),
            Err(ModelError::Invariant {
                field: "release author",
                ..
            })
        ));
    }

    #[test]
    fn snapshot_branch_records_are_length_delimited() {
        let rev = id("c839dea9e8e6f0528b468214348fee8669b305b2");
        let snp = Snapshot::new(vec![
            SnapshotBranch::new(
                "refs/heads/main",
                BranchTarget::Object {
                    target_type: ObjectType::Revision,
                    id: rev,
                },
            ),
            SnapshotBranch::new("HEAD", BranchTarget::Alias(b"refs/heads/main".to_vec())),
            SnapshotBranch::new("refs/heads/gone", BranchTarget::Dangling),
        ])
        .unwrap();
        let manifest = canonical_manifest(&snp.clone().into()).unwrap();
        let (_, body) = split_manifest(&manifest).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"alias HEAD\x0015:refs/heads/main");
        expected.extend_from_slice(b"dangling refs/heads/gone\x000:");
        expected.extend_from_slice(b"revision refs/heads/main\x0020:");
        expected.extend_from_slice(rev.as_bytes());
        assert_eq!(body, expected.as_slice());
        assert_eq!(parse_manifest(&manifest).unwrap(), Node::Snapshot(snp));
    }

    #[test]
    fn snapshot_alias_must_resolve() {
        let err = Snapshot::new(vec![SnapshotBranch::new(
            "HEAD",
            BranchTarget::Alias(b"refs/heads/missing".to_vec()),
        )])
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::Invariant {
                field: "snapshot branch target",
                ..
            }
        ));
    }

    #[test]
    fn person_brackets_rejected() {
        let mut rev = sample_revision(vec![]);
        rev.author = Person::new("A <b>", "x");
        assert!(matches!(
            intrinsic_id(&rev.into()),
            Err(ModelError::Invariant {
                field: "revision author",
                ..
            })
        ));
    }

    #[test]
    fn timestamp_offsets() {
        assert_eq!(Timestamp::new(0, 0).to_string(), "0 +0000");
        assert_eq!(Timestamp::new(5, -90).to_string(), "5 -0130");
        let t = Timestamp::parse("12 -0000").unwrap();
        assert!(t.negative_utc);
        assert_eq!(t.to_string(), "12 -0000");
        assert_eq!(Timestamp::parse("7").unwrap(), Timestamp::utc(7));
        assert!(Timestamp::parse("7 +2500").is_none());
    }

    #[test]
    fn origin_urls_validated() {
        assert!(Origin::new("https://example.org/repo.git").is_ok());
        assert!(Origin::new("").is_err());
        assert!(Origin::new("no scheme here").is_err());
        assert!(Origin::new("https://example.org/a\tb").is_err());
    }

    #[test]
    fn empty_name_person_keeps_space() {
        let mut rev = sample_revision(vec![]);
        rev.author = Person::new("", "nobody@example.org");
        let node = Node::Revision(rev);
        let manifest = canonical_manifest(&node).unwrap();
        assert!(manifest.windows(29).any(|w| w == b"author  <nobody@example.org> "));
        assert_eq!(parse_manifest(&manifest).unwrap(), node);
    }

    #[test]
    fn non_canonical_tree_manifest_rejected() {
        let blob = compute_content_checksums(b"").sha1_git;
        let mut body = Vec::new();
        for name in ["b", "a"] {
            body.extend_from_slice(b"100644 ");
            body.extend_from_slice(name.as_bytes());
            body.push(0);
            body.extend_from_slice(blob.as_bytes());
        }
        let manifest = with_header(ObjectType::Directory, &body);
        assert!(parse_manifest(&manifest).is_err());
    }
}
