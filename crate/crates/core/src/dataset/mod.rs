//! Relational export of the graph as CSV tables, and the reverse import.
//!
//! Binary-unsafe columns (names, messages, emails) hold standard base64.
//! Timestamps are split into epoch seconds and a `±HHMM` offset column.
//! Rows are sorted by primary key so that exports are reproducible.

mod licenses;
mod teaser;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use crate::model::{
    BranchTarget, Directory, DirectoryEntry, EntryKind, ModelError, Node, ObjectId, ObjectType, Origin, Person,
    Release, Revision, Snapshot, SnapshotBranch, Timestamp,
};
use crate::objstore::{ArchiveStore, StoreError, StoreOptions};

pub use licenses::{extract_license_blobs, is_license_name, write_license_csv, LicenseRecord};
pub use teaser::{make_teaser, OriginSelector};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CONTENT_STATUS: &str = "visible";

/// Table names in manifest order.
pub const TABLES: [&str; 10] = [
    "content",
    "directory",
    "directory_entry",
    "revision",
    "revision_parent",
    "release",
    "snapshot",
    "snapshot_branch",
    "origin",
    "origin_visit",
];

/// Column lists, in file order.
pub fn columns(table: &str) -> &'static [&'static str] {
    match table {
        "content" => &["sha1_git", "sha1", "length", "status"],
        "directory" => &["id"],
        "directory_entry" => &["directory_id", "name", "perms", "target"],
        "revision" => &[
            "id",
            "tree",
            "author_name",
            "author_email",
            "author_date",
            "author_offset",
            "committer_name",
            "committer_email",
            "committer_date",
            "committer_offset",
            "message",
            "extra_headers",
        ],
        "revision_parent" => &["id", "parent_id", "parent_rank"],
        "release" => &[
            "id",
            "target",
            "target_type",
            "name",
            "author_name",
            "author_email",
            "date",
            "date_offset",
            "message",
        ],
        "snapshot" => &["id"],
        "snapshot_branch" => &["snapshot_id", "name", "target_type", "target"],
        "origin" => &["id", "url"],
        "origin_visit" => &["origin", "visit", "date", "date_offset", "snapshot"],
        _ => &[],
    }
}

/// Columns holding base64. `snapshot_branch.target` is base64 only for
/// alias branches.
pub const BASE64_COLUMNS: &[&str] = &[
    "directory_entry.name",
    "revision.author_name",
    "revision.author_email",
    "revision.committer_name",
    "revision.committer_email",
    "revision.message",
    "revision.extra_headers",
    "release.name",
    "release.author_name",
    "release.author_email",
    "release.message",
    "snapshot_branch.name",
    "snapshot_branch.target",
];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}:{line}: {reason}", file.display())]
    Malformed { file: PathBuf, line: u64, reason: String },
    #[error("{}:{line}: {reason}", file.display())]
    Referential { file: PathBuf, line: u64, reason: String },
    #[error("{}:{line}: row id {expected} but its fields hash to {computed}", file.display())]
    IdMismatch {
        file: PathBuf,
        line: u64,
        expected: ObjectId,
        computed: ObjectId,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] crate::graphquery::GraphError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What an export wrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetBundle {
    pub dir: PathBuf,
    /// Data rows per table, in [`TABLES`] order.
    pub rows: Vec<(String, u64)>,
    pub exported_at: String,
}

impl DatasetBundle {
    pub fn rows(&self, table: &str) -> u64 {
        self.rows.iter().find(|(t, _)| t == table).map(|(_, n)| *n).unwrap_or(0)
    }
}

fn b64(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

struct TableWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
    rows: u64,
}

impl TableWriter {
    fn create(dir: &Path, table: &str) -> Result<Self, DatasetError> {
        let path = dir.join(format!("{table}.csv"));
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        writer.write_record(columns(table)).map_err(|e| csv_io(&path, e))?;
        Ok(TableWriter { path, writer, rows: 0 })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| csv_io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<u64, DatasetError> {
        self.writer.flush().map_err(io_err(&self.path))?;
        Ok(self.rows)
    }
}

fn csv_io(path: &Path, e: csv::Error) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn extra_headers_field(headers: &[(Vec<u8>, Vec<u8>)]) -> String {
    headers
        .iter()
        .map(|(k, v)| format!("{}:{}", b64(k), b64(v)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes every table of `store` plus the manifest into `out`.
/// `exported_at` is copied verbatim into the manifest.
pub fn export_tables(store: &ArchiveStore, out: &Path, exported_at: &str) -> Result<DatasetBundle, DatasetError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut rows = Vec::new();

    let mut t = TableWriter::create(out, "content")?;
    for record in store.content_records() {
        t.row([
            record.sha1_git.to_hex(),
            record.sha1.to_hex(),
            record.length.to_string(),
            CONTENT_STATUS.to_string(),
        ])?;
    }
    rows.push(("content".to_string(), t.finish()?));

    let mut dirs = TableWriter::create(out, "directory")?;
    let mut entries = TableWriter::create(out, "directory_entry")?;
    for item in store.iterate(ObjectType::Directory)? {
        let (id, node) = item?;
        let Node::Directory(dir) = node else { unreachable!() };
        dirs.row([id.to_hex()])?;
        for e in dir.entries() {
            entries.row([id.to_hex(), b64(&e.name), e.kind.perms().to_string(), e.target.to_hex()])?;
        }
    }
    rows.push(("directory".to_string(), dirs.finish()?));
    rows.push(("directory_entry".to_string(), entries.finish()?));

    let mut revs = TableWriter::create(out, "revision")?;
    let mut parents = TableWriter::create(out, "revision_parent")?;
    for item in store.iterate(ObjectType::Revision)? {
        let (id, node) = item?;
        let Node::Revision(rev) = node else { unreachable!() };
        revs.row([
            id.to_hex(),
            rev.tree.to_hex(),
            b64(&rev.author.name),
            b64(&rev.author.email),
            rev.author_date.seconds.to_string(),
            rev.author_date.offset_string(),
            b64(&rev.committer.name),
            b64(&rev.committer.email),
            rev.committer_date.seconds.to_string(),
            rev.committer_date.offset_string(),
            b64(&rev.message),
            extra_headers_field(&rev.extra_headers),
        ])?;
        for (rank, parent) in rev.parents.iter().enumerate() {
            parents.row([id.to_hex(), parent.to_hex(), rank.to_string()])?;
        }
    }
    rows.push(("revision".to_string(), revs.finish()?));
    rows.push(("revision_parent".to_string(), parents.finish()?));

    let mut t = TableWriter::create(out, "release")?;
    for item in store.iterate(ObjectType::Release)? {
        let (id, node) = item?;
        let Node::Release(rel) = node else { unreachable!() };
        let (name, email) = match &rel.author {
            Some(p) => (b64(&p.name), b64(&p.email)),
            None => (String::new(), String::new()),
        };
        let (date, offset) = match &rel.date {
            Some(d) => (d.seconds.to_string(), d.offset_string()),
            None => (String::new(), String::new()),
        };
        t.row([
            id.to_hex(),
            rel.target.to_hex(),
            rel.target_type.long_name().to_string(),
            b64(&rel.name),
            name,
            email,
            date,
            offset,
            b64(&rel.message),
        ])?;
    }
    rows.push(("release".to_string(), t.finish()?));

    let mut snps = TableWriter::create(out, "snapshot")?;
    let mut branches = TableWriter::create(out, "snapshot_branch")?;
    for item in store.iterate(ObjectType::Snapshot)? {
        let (id, node) = item?;
        let Node::Snapshot(snp) = node else { unreachable!() };
        snps.row([id.to_hex()])?;
        for b in snp.branches() {
            let target = match &b.target {
                BranchTarget::Object { id, .. } => id.to_hex(),
                BranchTarget::Alias(name) => b64(name),
                BranchTarget::Dangling => String::new(),
            };
            branches.row([id.to_hex(), b64(&b.name), b.target.type_name().to_string(), target])?;
        }
    }
    rows.push(("snapshot".to_string(), snps.finish()?));
    rows.push(("snapshot_branch".to_string(), branches.finish()?));

    let mut t = TableWriter::create(out, "origin")?;
    for origin in store.origins() {
        t.row([origin_id(&origin).to_hex(), origin.url().to_string()])?;
    }
    rows.push(("origin".to_string(), t.finish()?));

    let mut visits: Vec<_> = store.visits().to_vec();
    visits.sort_by(|a, b| (a.origin.url(), a.number).cmp(&(b.origin.url(), b.number)));
    let mut t = TableWriter::create(out, "origin_visit")?;
    for v in visits {
        t.row([
            v.origin.url().to_string(),
            v.number.to_string(),
            v.date.seconds.to_string(),
            v.date.offset_string(),
            v.snapshot.to_hex(),
        ])?;
    }
    rows.push(("origin_visit".to_string(), t.finish()?));

    write_manifest(out, &rows, exported_at)?;
    Ok(DatasetBundle {
        dir: out.to_path_buf(),
        rows,
        exported_at: exported_at.to_string(),
    })
}

/// SHA1 of the URL, as an opaque origin key.
pub fn origin_id(origin: &Origin) -> ObjectId {
    ObjectId::sha1_of(origin.url().as_bytes())
}

fn write_manifest(out: &Path, rows: &[(String, u64)], exported_at: &str) -> Result<(), DatasetError> {
    let path = out.join(MANIFEST_FILE);
    let mut text = format!("format_version: {FORMAT_VERSION}\nexported_at: {exported_at}\n");
    text.push_str(&format!("base64_columns: {}\n", BASE64_COLUMNS.join(" ")));
    for (table, n) in rows {
        text.push_str(&format!("rows.{table}: {n}\n"));
    }
    let mut file = File::create(&path).map_err(io_err(&path))?;
    file.write_all(text.as_bytes()).map_err(io_err(&path))?;
    Ok(())
}

/// Parsed `manifest.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub format_version: u32,
    pub exported_at: String,
    pub rows: BTreeMap<String, u64>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut fields = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        let Some((key, value)) = line.split_once(": ") else {
            return Err(DatasetError::Malformed {
                file: path,
                line: n as u64 + 1,
                reason: "expected `key: value`".into(),
            });
        };
        fields.insert(key.to_string(), value.to_string());
    }
    let malformed = |reason: &str| DatasetError::Malformed {
        file: path.clone(),
        line: 0,
        reason: reason.to_string(),
    };
    let format_version = fields
        .get("format_version")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| malformed("missing format_version"))?;
    if format_version != FORMAT_VERSION {
        return Err(malformed("unsupported format_version"));
    }
    let rows = fields
        .iter()
        .filter_map(|(k, v)| Some((k.strip_prefix("rows.")?.to_string(), v.parse().ok()?)))
        .collect();
    Ok(Manifest {
        format_version,
        exported_at: fields.get("exported_at").cloned().unwrap_or_default(),
        rows,
    })
}

/// Row reader with file/line context for errors.
struct TableReader {
    path: PathBuf,
    records: csv::StringRecordsIntoIter<File>,
    width: usize,
    line: u64,
}

impl TableReader {
    fn open(dir: &Path, table: &str) -> Result<Self, DatasetError> {
        let path = dir.join(format!("{table}.csv"));
        let file = File::open(&path).map_err(io_err(&path))?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
        let header = reader.headers().map_err(|e| csv_io(&path, e))?.clone();
        let expected = columns(table);
        if header.iter().ne(expected.iter().copied()) {
            return Err(DatasetError::Malformed {
                file: path,
                line: 1,
                reason: format!("expected columns {}", expected.join(",")),
            });
        }
        Ok(TableReader {
            path,
            records: reader.into_records(),
            width: expected.len(),
            line: 1,
        })
    }

    fn next(&mut self) -> Result<Option<Row>, DatasetError> {
        let Some(record) = self.records.next() else {
            return Ok(None);
        };
        let record = record.map_err(|e| DatasetError::Malformed {
            file: self.path.clone(),
            line: self.line + 1,
            reason: e.to_string(),
        })?;
        self.line = record.position().map(|p| p.line()).unwrap_or(self.line + 1);
        if record.len() != self.width {
            return Err(self.malformed(format!("expected {} fields, found {}", self.width, record.len())));
        }
        Ok(Some(Row {
            fields: record.iter().map(str::to_string).collect(),
        }))
    }

    fn malformed(&self, reason: impl Into<String>) -> DatasetError {
        DatasetError::Malformed {
            file: self.path.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn referential(&self, reason: impl Into<String>) -> DatasetError {
        DatasetError::Referential {
            file: self.path.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn id(&self, row: &Row, i: usize) -> Result<ObjectId, DatasetError> {
        ObjectId::from_hex(&row.fields[i]).map_err(|_| self.malformed(format!("bad id {:?}", row.fields[i])))
    }

    fn bytes(&self, row: &Row, i: usize) -> Result<Vec<u8>, DatasetError> {
        B64.decode(&row.fields[i])
            .map_err(|_| self.malformed(format!("bad base64 in column {}", i + 1)))
    }

    fn number<T: std::str::FromStr>(&self, row: &Row, i: usize) -> Result<T, DatasetError> {
        row.fields[i]
            .parse()
            .map_err(|_| self.malformed(format!("bad number {:?}", row.fields[i])))
    }

    fn timestamp(&self, row: &Row, seconds: usize, offset: usize) -> Result<Timestamp, DatasetError> {
        Timestamp::parse(&format!("{} {}", row.fields[seconds], row.fields[offset]))
            .ok_or_else(|| self.malformed("bad timestamp"))
    }

    fn check(&self, expected: ObjectId, node: &Node) -> Result<(), DatasetError> {
        let computed = node.intrinsic_id()?;
        if computed != expected {
            return Err(DatasetError::IdMismatch {
                file: self.path.clone(),
                line: self.line,
                expected,
                computed,
            });
        }
        Ok(())
    }
}

struct Row {
    fields: Vec<String>,
}

/// Groups rows of a child table by their first (foreign key) column,
/// which must appear in `keys`.
fn grouped<T>(
    reader: &mut TableReader,
    keys: &std::collections::BTreeSet<ObjectId>,
    mut parse: impl FnMut(&TableReader, &Row) -> Result<T, DatasetError>,
) -> Result<BTreeMap<ObjectId, Vec<T>>, DatasetError> {
    let mut map: BTreeMap<ObjectId, Vec<T>> = BTreeMap::new();
    while let Some(row) = reader.next()? {
        let key = reader.id(&row, 0)?;
        if !keys.contains(&key) {
            return Err(reader.referential(format!("{key} is not in the parent table")));
        }
        map.entry(key).or_default().push(parse(reader, &row)?);
    }
    Ok(map)
}

fn id_set(dir: &Path, table: &str) -> Result<std::collections::BTreeSet<ObjectId>, DatasetError> {
    let mut reader = TableReader::open(dir, table)?;
    let mut ids = std::collections::BTreeSet::new();
    while let Some(row) = reader.next()? {
        ids.insert(reader.id(&row, 0)?);
    }
    Ok(ids)
}

/// Rebuilds a graph-only store at `store_root` from a bundle. Contents are
/// recorded without payload; every other node is re-hashed and must match
/// its row id. Manifest row counts are checked when the store starts empty.
pub fn import_tables(bundle: &Path, store_root: &Path) -> Result<ArchiveStore, DatasetError> {
    let manifest = read_manifest(bundle)?;
    let mut store = ArchiveStore::open_with(store_root, StoreOptions { allow_holes: true })?;
    let fresh = store.stats()? == Default::default();

    let mut r = TableReader::open(bundle, "content")?;
    while let Some(row) = r.next()? {
        let sha1_git = r.id(&row, 0)?;
        let sha1 = r.id(&row, 1)?;
        let length: u64 = r.number(&row, 2)?;
        store.put_content_metadata(sha1, sha1_git, length)?;
    }

    let directory_ids = id_set(bundle, "directory")?;
    let mut r = TableReader::open(bundle, "directory_entry")?;
    let mut entries = grouped(&mut r, &directory_ids, |r, row| {
        let kind = EntryKind::from_perms(&row.fields[2]).ok_or_else(|| r.malformed("bad perms"))?;
        Ok(DirectoryEntry::new(r.bytes(row, 1)?, kind, r.id(row, 3)?))
    })?;
    let mut r = TableReader::open(bundle, "directory")?;
    while let Some(row) = r.next()? {
        let id = r.id(&row, 0)?;
        let node = Node::Directory(Directory::new(entries.remove(&id).unwrap_or_default())?);
        r.check(id, &node)?;
        store.put(&node)?;
    }

    let revision_ids = id_set(bundle, "revision")?;
    let mut r = TableReader::open(bundle, "revision_parent")?;
    let mut parents = grouped(&mut r, &revision_ids, |r, row| {
        Ok((r.number::<usize>(row, 2)?, r.id(row, 1)?))
    })?;
    let mut r = TableReader::open(bundle, "revision")?;
    while let Some(row) = r.next()? {
        let id = r.id(&row, 0)?;
        let mut ranked = parents.remove(&id).unwrap_or_default();
        ranked.sort_by_key(|(rank, _)| *rank);
        if ranked.iter().enumerate().any(|(i, (rank, _))| i != *rank) {
            return Err(r.referential(format!("parent ranks of {id} are not 0..n")));
        }
        let extra_headers = if row.fields[11].is_empty() {
            Vec::new()
        } else {
            row.fields[11]
                .split(' ')
                .map(|pair| {
                    let (k, v) = pair.split_once(':').ok_or_else(|| r.malformed("bad extra header"))?;
                    let k = B64.decode(k).map_err(|_| r.malformed("bad extra header"))?;
                    let v = B64.decode(v).map_err(|_| r.malformed("bad extra header"))?;
                    Ok((k, v))
                })
                .collect::<Result<_, DatasetError>>()?
        };
        let node = Node::Revision(Revision {
            tree: r.id(&row, 1)?,
            parents: ranked.into_iter().map(|(_, p)| p).collect(),
            author: Person::new(r.bytes(&row, 2)?, r.bytes(&row, 3)?),
            author_date: r.timestamp(&row, 4, 5)?,
            committer: Person::new(r.bytes(&row, 6)?, r.bytes(&row, 7)?),
            committer_date: r.timestamp(&row, 8, 9)?,
            message: r.bytes(&row, 10)?,
            extra_headers,
        });
        r.check(id, &node)?;
        store.put(&node)?;
    }

    let mut r = TableReader::open(bundle, "release")?;
    while let Some(row) = r.next()? {
        let id = r.id(&row, 0)?;
        let target_type = ObjectType::from_long_name(&row.fields[2]).ok_or_else(|| r.malformed("bad target_type"))?;
        let author = if row.fields[6].is_empty() {
            None
        } else {
            Some(Person::new(r.bytes(&row, 4)?, r.bytes(&row, 5)?))
        };
        let date = if row.fields[6].is_empty() {
            None
        } else {
            Some(r.timestamp(&row, 6, 7)?)
        };
        let node = Node::Release(Release {
            target: r.id(&row, 1)?,
            target_type,
            name: r.bytes(&row, 3)?,
            author,
            date,
            message: r.bytes(&row, 8)?,
        });
        r.check(id, &node)?;
        store.put(&node)?;
    }

    let snapshot_ids = id_set(bundle, "snapshot")?;
    let mut r = TableReader::open(bundle, "snapshot_branch")?;
    let mut branches = grouped(&mut r, &snapshot_ids, |r, row| {
        let name = r.bytes(row, 1)?;
        let target = match row.fields[2].as_str() {
            "alias" => BranchTarget::Alias(r.bytes(row, 3)?),
            "dangling" => BranchTarget::Dangling,
            other => BranchTarget::Object {
                target_type: ObjectType::from_long_name(other).ok_or_else(|| r.malformed("bad target_type"))?,
                id: r.id(row, 3)?,
            },
        };
        Ok(SnapshotBranch::new(name, target))
    })?;
    let mut r = TableReader::open(bundle, "snapshot")?;
    while let Some(row) = r.next()? {
        let id = r.id(&row, 0)?;
        let node = Node::Snapshot(Snapshot::new(branches.remove(&id).unwrap_or_default())?);
        r.check(id, &node)?;
        store.put(&node)?;
    }

    let mut r = TableReader::open(bundle, "origin")?;
    let mut origins = std::collections::BTreeSet::new();
    while let Some(row) = r.next()? {
        let origin = Origin::new(row.fields[1].clone()).map_err(|e| r.malformed(e.to_string()))?;
        if r.id(&row, 0)? != origin_id(&origin) {
            return Err(r.malformed("origin id is not the SHA1 of its URL"));
        }
        origins.insert(origin);
    }
    let mut r = TableReader::open(bundle, "origin_visit")?;
    while let Some(row) = r.next()? {
        let origin = Origin::new(row.fields[0].clone()).map_err(|e| r.malformed(e.to_string()))?;
        if !origins.contains(&origin) {
            return Err(r.referential(format!("origin {origin} is not in origin.csv")));
        }
        let number: u64 = r.number(&row, 1)?;
        let snapshot = r.id(&row, 4)?;
        if !snapshot_ids.contains(&snapshot) {
            return Err(r.referential(format!("snapshot {snapshot} is not in snapshot.csv")));
        }
        let date = r.timestamp(&row, 2, 3)?;
        let existing = store
            .visits_of(&origin)
            .into_iter()
            .find(|v| v.number == number)
            .map(|v| (v.date, v.snapshot));
        if let Some(existing) = existing {
            if existing != (date, snapshot) {
                return Err(r.malformed(format!("visit {number} of {origin} differs from the stored one")));
            }
            continue;
        }
        let visit = store.record_visit(&origin, date, snapshot)?;
        if visit.number != number {
            return Err(r.malformed(format!("visit {number} of {origin} is out of sequence")));
        }
    }

    let stats = store.stats()?;
    for (table, count) in [
        ("content", stats.contents + stats.metadata_only_contents),
        ("directory", stats.directories),
        ("revision", stats.revisions),
        ("release", stats.releases),
        ("snapshot", stats.snapshots),
        ("origin", stats.origins),
        ("origin_visit", stats.visits),
    ] {
        if let Some(&expected) = manifest.rows.get(table) {
            if fresh && expected != count {
                return Err(DatasetError::Malformed {
                    file: bundle.join(MANIFEST_FILE),
                    line: 0,
                    reason: format!("manifest lists {expected} {table} rows, store holds {count}"),
                });
            }
        }
    }
    store.flush()?;
    Ok(store)
}
