//! Random archives with holes, metadata-only contents, aliases and visits,
//! plus a recursive reference for traversal and provenance.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use codevault::model::{
    compute_content_checksums, BranchTarget, Content, Directory, DirectoryEntry, EntryKind, Person, Release, Revision,
    Snapshot, SnapshotBranch,
};
use codevault::objstore::StoreOptions;
use codevault::{ArchiveStore, Node, ObjectId, ObjectType, Origin, Timestamp};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

const NAMES: &[&[u8]] = &[
    b"a",
    b"b",
    b"src",
    b"README",
    b"LICENSE",
    b"COPYING.md",
    b"a b",
    b"x.c",
    b"\xff\xfe",
    b"tab\t",
    b"semi;colon",
    b"\xc3\xbcber",
    b"back\\slash",
    b"z",
    b"lib",
    b"quo\"te",
];

fn random_id(rng: &mut StdRng) -> ObjectId {
    ObjectId::from_bytes(rng.gen())
}

fn person(rng: &mut StdRng) -> Person {
    let names: &[&[u8]] = &[b"Alice", b"", b"Ren\xc3\xa9", b"b\xff"];
    let emails: &[&[u8]] = &[b"a@example.org", b"", b"x@y"];
    Person::new(
        names.choose(rng).unwrap().to_vec(),
        emails.choose(rng).unwrap().to_vec(),
    )
}

fn timestamp(rng: &mut StdRng) -> Timestamp {
    // Coarse dates so ties are common.
    let seconds = rng.gen_range(0..300) * 1000;
    let mut ts = Timestamp::new(seconds, rng.gen_range(-720..=840));
    if rng.gen_bool(0.05) {
        ts = Timestamp::parse(&format!("{seconds} -0000")).unwrap();
    }
    ts
}

#[derive(Default)]
struct Pools {
    contents: Vec<ObjectId>,
    dirs: Vec<ObjectId>,
    revs: Vec<ObjectId>,
    rels: Vec<ObjectId>,
    snps: Vec<ObjectId>,
}

impl Pools {
    fn pick(&self, rng: &mut StdRng, object_type: ObjectType) -> Option<ObjectId> {
        let pool = match object_type {
            ObjectType::Content => &self.contents,
            ObjectType::Directory => &self.dirs,
            ObjectType::Revision => &self.revs,
            ObjectType::Release => &self.rels,
            ObjectType::Snapshot => &self.snps,
        };
        pool.choose(rng).copied()
    }

    fn total(&self) -> usize {
        self.contents.len() + self.dirs.len() + self.revs.len() + self.rels.len() + self.snps.len()
    }
}

/// Fills a store (opened with holes allowed) with about `size` nodes and
/// a few origins. Every node only references earlier ones.
pub fn random_archive(rng: &mut StdRng, root: &Path, size: usize) -> ArchiveStore {
    let mut store = ArchiveStore::open_with(root, StoreOptions { allow_holes: true }).unwrap();
    let mut p = Pools::default();
    let hole = 0.03;
    while p.total() < size {
        let roll = rng.gen_range(0..100);
        if roll < 35 || p.contents.is_empty() {
            let len = rng.gen_range(0..40);
            let data: Vec<u8> = (0..len).map(|_| rng.gen_range(b'a'..=b'f')).collect();
            let id = if rng.gen_bool(0.15) {
                let sums = compute_content_checksums(&data);
                store
                    .put_content_metadata(sums.sha1, sums.sha1_git, data.len() as u64)
                    .unwrap();
                sums.sha1_git
            } else {
                store.put(&Node::Content(Content::new(data))).unwrap()
            };
            p.contents.push(id);
        } else if roll < 60 {
            let mut names: Vec<&[u8]> = NAMES.to_vec();
            names.shuffle(rng);
            let count = rng.gen_range(0..6);
            let entries = names[..count]
                .iter()
                .map(|name| {
                    let kind = *[
                        EntryKind::File,
                        EntryKind::File,
                        EntryKind::Executable,
                        EntryKind::Symlink,
                        EntryKind::Directory,
                        EntryKind::Directory,
                        EntryKind::Revision,
                    ]
                    .choose(rng)
                    .unwrap();
                    let target = match p.pick(rng, kind.target_type()) {
                        Some(id) if !rng.gen_bool(hole) => id,
                        _ => random_id(rng),
                    };
                    DirectoryEntry::new(name.to_vec(), kind, target)
                })
                .collect();
            p.dirs
                .push(store.put(&Node::Directory(Directory::new(entries).unwrap())).unwrap());
        } else if roll < 80 {
            let tree = match p.pick(rng, ObjectType::Directory) {
                Some(id) if !rng.gen_bool(hole) => id,
                Some(_) => random_id(rng),
                None => store.put(&Node::Directory(Directory::empty())).unwrap(),
            };
            let mut parents = Vec::new();
            for _ in 0..rng.gen_range(0..3) {
                match p.pick(rng, ObjectType::Revision) {
                    Some(id) if !rng.gen_bool(hole) => parents.push(id),
                    _ if rng.gen_bool(0.2) => parents.push(random_id(rng)),
                    _ => {}
                }
            }
            let mut extra_headers = Vec::new();
            if rng.gen_bool(0.1) {
                extra_headers.push((b"encoding".to_vec(), b"ISO-8859-1".to_vec()));
            }
            if rng.gen_bool(0.05) {
                extra_headers.push((b"mergetag".to_vec(), b"object x\ntype commit\n\nsig".to_vec()));
            }
            let messages: &[&[u8]] = &[b"Update docs\n", b"fix", b"", b"Merged\n\nbody", b"\xffbad"];
            let committer_date = timestamp(rng);
            p.revs.push(
                store
                    .put(&Node::Revision(Revision {
                        tree,
                        parents,
                        author: person(rng),
                        author_date: timestamp(rng),
                        committer: person(rng),
                        committer_date,
                        message: messages.choose(rng).unwrap().to_vec(),
                        extra_headers,
                    }))
                    .unwrap(),
            );
        } else if roll < 88 {
            let target_type = *ObjectType::ALL.choose(rng).unwrap();
            let Some(target) = p.pick(rng, target_type) else {
                continue;
            };
            let dated = rng.gen_bool(0.7);
            p.rels.push(
                store
                    .put(&Node::Release(Release {
                        target,
                        target_type,
                        name: format!("v{}", rng.gen_range(0..50)).into_bytes(),
                        author: dated.then(|| person(rng)),
                        date: dated.then(|| timestamp(rng)),
                        message: if rng.gen_bool(0.5) {
                            b"release\n".to_vec()
                        } else {
                            Vec::new()
                        },
                    }))
                    .unwrap(),
            );
        } else {
            p.snps.push(random_snapshot(rng, &mut store, &p));
        }
    }
    if p.snps.is_empty() {
        p.snps.push(random_snapshot(rng, &mut store, &p));
    }
    let origins = rng.gen_range(1..8);
    for o in 0..origins {
        let origin = Origin::new(format!("https://forge{}.example/repo-{o}", o % 3)).unwrap();
        let mut date = rng.gen_range(0..5) * 1000;
        for _ in 0..rng.gen_range(1..5) {
            date += rng.gen_range(0..3) * 1000;
            let snp = *p.snps.choose(rng).unwrap();
            store.record_visit(&origin, Timestamp::utc(date), snp).unwrap();
        }
    }
    store.flush().unwrap();
    store
}

fn random_snapshot(rng: &mut StdRng, store: &mut ArchiveStore, p: &Pools) -> ObjectId {
    let mut branches: Vec<SnapshotBranch> = Vec::new();
    let names: &[&[u8]] = &[
        b"refs/heads/main",
        b"refs/heads/dev",
        b"refs/tags/v1",
        b"HEAD",
        b"refs/\xff",
    ];
    for name in names {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let target_type = *[
            ObjectType::Revision,
            ObjectType::Revision,
            ObjectType::Release,
            ObjectType::Directory,
            ObjectType::Content,
        ]
        .choose(rng)
        .unwrap();
        let target = match (rng.gen_range(0..10), p.pick(rng, target_type)) {
            (0, _) | (_, None) => BranchTarget::Dangling,
            (1, _) if !branches.is_empty() => BranchTarget::Alias(branches[0].name.clone()),
            (2, _) => BranchTarget::Object {
                target_type,
                id: random_id(rng),
            },
            (_, Some(id)) => BranchTarget::Object { target_type, id },
        };
        branches.push(SnapshotBranch::new(name.to_vec(), target));
    }
    store.put(&Node::Snapshot(Snapshot::new(branches).unwrap())).unwrap()
}

/// One provenance entry as the reference computes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedEntry {
    pub origin: String,
    pub visit: u64,
    pub revision: Option<(ObjectId, i64)>,
    pub earliest: bool,
}

/// Adjacency read straight from stored nodes, queried by recursion.
pub struct Reference {
    children: HashMap<ObjectId, Vec<ObjectId>>,
    parents: HashMap<ObjectId, Vec<ObjectId>>,
    types: HashMap<ObjectId, ObjectType>,
    /// Stored revision → (tree, committer seconds).
    revisions: BTreeMap<ObjectId, (ObjectId, i64)>,
    /// Origin URL → visits as (date, number, snapshot).
    origins: BTreeMap<String, Vec<(i64, u64, ObjectId)>>,
    snapshot_reach: HashMap<ObjectId, HashSet<ObjectId>>,
}

impl Reference {
    pub fn load(store: &ArchiveStore) -> Reference {
        let mut r = Reference {
            children: HashMap::new(),
            parents: HashMap::new(),
            types: HashMap::new(),
            revisions: BTreeMap::new(),
            origins: BTreeMap::new(),
            snapshot_reach: HashMap::new(),
        };
        for record in store.content_records() {
            r.types.insert(record.sha1_git, ObjectType::Content);
        }
        for object_type in [
            ObjectType::Directory,
            ObjectType::Revision,
            ObjectType::Release,
            ObjectType::Snapshot,
        ] {
            for id in store.ids(object_type).unwrap() {
                let node = store.get(object_type, &id).unwrap();
                r.types.insert(id, object_type);
                if let Node::Revision(rev) = &node {
                    r.revisions.insert(id, (rev.tree, rev.committer_date.seconds));
                }
                for (child_type, child) in node.children() {
                    r.types.entry(child).or_insert(child_type);
                    let list = r.children.entry(id).or_default();
                    if !list.contains(&child) {
                        list.push(child);
                        r.parents.entry(child).or_default().push(id);
                    }
                }
            }
        }
        for visit in store.visits() {
            r.origins.entry(visit.origin.url().to_string()).or_default().push((
                visit.date.seconds,
                visit.number,
                visit.snapshot,
            ));
            if !r.snapshot_reach.contains_key(&visit.snapshot) {
                let mut seen = HashSet::new();
                r.collect(visit.snapshot, true, &mut seen);
                r.snapshot_reach.insert(visit.snapshot, seen);
            }
        }
        for visits in r.origins.values_mut() {
            visits.sort();
        }
        r
    }

    /// Every node, holes included.
    pub fn ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self.types.keys().copied().collect();
        ids.sort();
        ids
    }

    fn collect(&self, id: ObjectId, forward: bool, seen: &mut HashSet<ObjectId>) {
        if !seen.insert(id) {
            return;
        }
        let next = if forward {
            self.children.get(&id)
        } else {
            self.parents.get(&id)
        };
        for &n in next.into_iter().flatten() {
            self.collect(n, forward, seen);
        }
    }

    pub fn traverse(&self, id: &ObjectId, forward: bool, types: Option<&[ObjectType]>) -> Option<Vec<ObjectId>> {
        self.types.get(id)?;
        let mut seen = HashSet::new();
        self.collect(*id, forward, &mut seen);
        let mut out: Vec<ObjectId> = seen
            .into_iter()
            .filter(|n| types.is_none_or(|t| t.contains(&self.types[n])))
            .collect();
        out.sort();
        Some(out)
    }

    /// Whether the file-system tree rooted at `node` holds `target`.
    fn tree_holds(&self, node: ObjectId, target: ObjectId, memo: &mut HashMap<ObjectId, bool>) -> bool {
        if node == target {
            return true;
        }
        if let Some(&known) = memo.get(&node) {
            return known;
        }
        let mut found = false;
        if self.types[&node] == ObjectType::Directory {
            for &child in self.children.get(&node).into_iter().flatten() {
                if matches!(self.types[&child], ObjectType::Directory | ObjectType::Content)
                    && self.tree_holds(child, target, memo)
                {
                    found = true;
                    break;
                }
            }
        }
        memo.insert(node, found);
        found
    }

    fn contains(&self, revision: ObjectId, target: ObjectId, memo: &mut HashMap<ObjectId, bool>) -> bool {
        match self.types[&target] {
            ObjectType::Revision => revision == target,
            ObjectType::Directory | ObjectType::Content => self.tree_holds(self.revisions[&revision].0, target, memo),
            _ => false,
        }
    }

    pub fn earliest_occurrence(&self, target: &ObjectId) -> Option<(ObjectId, i64)> {
        let mut memo = HashMap::new();
        self.revisions
            .iter()
            .filter(|(r, _)| self.contains(**r, *target, &mut memo))
            .map(|(r, (_, date))| (*date, *r))
            .min()
            .map(|(date, r)| (r, date))
    }

    pub fn provenance(&self, target: &ObjectId) -> Option<Vec<ExpectedEntry>> {
        self.types.get(target)?;
        let mut memo = HashMap::new();
        let containing: Vec<(i64, ObjectId)> = self
            .revisions
            .iter()
            .filter(|(r, _)| self.contains(**r, *target, &mut memo))
            .map(|(r, (_, date))| (*date, *r))
            .collect();
        let mut entries = Vec::new();
        for (url, visits) in &self.origins {
            let reaching: Vec<&(i64, u64, ObjectId)> = visits
                .iter()
                .filter(|(_, _, s)| self.snapshot_reach[s].contains(target))
                .collect();
            let Some(first) = reaching.first() else { continue };
            let revision = containing
                .iter()
                .filter(|(_, r)| reaching.iter().any(|(_, _, s)| self.snapshot_reach[s].contains(r)))
                .min()
                .map(|&(date, r)| (r, date));
            entries.push(ExpectedEntry {
                origin: url.clone(),
                visit: first.1,
                revision,
                earliest: false,
            });
        }
        let visit_date = |e: &ExpectedEntry| self.origins[&e.origin].iter().find(|v| v.1 == e.visit).unwrap().0;
        let best = (0..entries.len()).min_by_key(|&i| {
            let e = &entries[i];
            (
                e.revision.is_none(),
                e.revision.map(|(r, d)| (d, r)),
                visit_date(e),
                e.origin.clone(),
            )
        });
        if let Some(best) = best {
            entries[best].earliest = true;
        }
        Some(entries)
    }
}

/// Runs `f` on a thread with a stack deep enough for the recursive reference.
pub fn with_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(f)
        .unwrap()
        .join()
        .unwrap()
}
