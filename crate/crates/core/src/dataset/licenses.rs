//! Blobs stored under license-like file names.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use super::DatasetError;
use crate::graphquery::{ArchiveGraph, GraphError};
use crate::model::{EntryKind, Node, ObjectId, ObjectType, Origin};
use crate::objstore::ArchiveStore;

const STEMS: [&str; 5] = ["license", "licence", "copying", "copyright", "notice"];
const EXTENSIONS: [&str; 3] = [".txt", ".md", ".rst"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicenseRecord {
    pub sha1_git: ObjectId,
    pub sha1: Option<ObjectId>,
    /// Every matching name the blob was found under, sorted.
    pub filenames: Vec<Vec<u8>>,
    pub length: Option<u64>,
    pub example_origin: Option<Origin>,
    pub earliest_commit: Option<ObjectId>,
}

/// `LICENSE`, `copying.txt`, `Notice.md` and the like.
pub fn is_license_name(name: &[u8]) -> bool {
    let lower = name.to_ascii_lowercase();
    let base = EXTENSIONS
        .iter()
        .find_map(|ext| lower.strip_suffix(ext.as_bytes()))
        .unwrap_or(&lower);
    STEMS.iter().any(|s| base == s.as_bytes())
}

/// Scans directory entries of kind file or executable; sorted by id.
pub fn extract_license_blobs(store: &ArchiveStore, graph: &ArchiveGraph) -> Result<Vec<LicenseRecord>, DatasetError> {
    let mut names: BTreeMap<ObjectId, BTreeSet<Vec<u8>>> = BTreeMap::new();
    for item in store.iterate(ObjectType::Directory)? {
        let (_, node) = item?;
        let Node::Directory(dir) = node else { continue };
        for e in dir.entries() {
            if matches!(e.kind, EntryKind::File | EntryKind::Executable) && is_license_name(&e.name) {
                names.entry(e.target).or_default().insert(e.name.clone());
            }
        }
    }
    let records: HashMap<ObjectId, _> = store.content_records().into_iter().map(|r| (r.sha1_git, r)).collect();
    let mut out = Vec::with_capacity(names.len());
    for (id, filenames) in names {
        let record = records.get(&id);
        let example_origin = graph
            .provenance(&id)?
            .into_iter()
            .find(|e| e.earliest)
            .map(|e| e.origin);
        let earliest_commit = match graph.earliest_occurrence(&id) {
            Ok((rev, _)) => Some(rev),
            Err(GraphError::NoRevision(_)) => None,
            Err(e) => return Err(e.into()),
        };
        out.push(LicenseRecord {
            sha1_git: id,
            sha1: record.map(|r| r.sha1),
            filenames: filenames.into_iter().collect(),
            length: record.map(|r| r.length),
            example_origin,
            earliest_commit,
        });
    }
    Ok(out)
}

/// CSV with header `sha1_git,sha1,length,filenames,example_origin,earliest_commit`.
/// File names are base64, space-separated.
pub fn write_license_csv<W: Write>(records: &[LicenseRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "sha1_git",
        "sha1",
        "length",
        "filenames",
        "example_origin",
        "earliest_commit",
    ])?;
    for r in records {
        let filenames: Vec<String> = r.filenames.iter().map(|n| B64.encode(n)).collect();
        w.write_record([
            r.sha1_git.to_hex(),
            r.sha1.map(|s| s.to_hex()).unwrap_or_default(),
            r.length.map(|l| l.to_string()).unwrap_or_default(),
            filenames.join(" "),
            r.example_origin
                .as_ref()
                .map(|o| o.url().to_string())
                .unwrap_or_default(),
            r.earliest_commit.map(|c| c.to_hex()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
