//! In-memory graph over a store: traversal, provenance, forks, growth and
//! commit-message stems.

mod forks;
mod growth;
mod stems;

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::model::{Node, ObjectId, ObjectType, Origin, Timestamp, Visit};
use crate::objstore::{ArchiveStore, StoreError};

pub use forks::{classify_forks, parse_fork_sidecar, ForkGroup, ForkLink, ForkReport, ForkWitness};
pub use growth::{growth_stats, GrowthBucket, GrowthSeries, Month};
pub use stems::{first_token, stem_word, top_commit_stems, MAX_MESSAGE_LEN};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0} is not in the graph")]
    UnknownNode(ObjectId),
    #[error("{0} is not reachable from any revision")]
    NoRevision(ObjectId),
    #[error("growth fit needs at least two monthly buckets, found {0}")]
    UndefinedFit(usize),
    #[error("sidecar line {line}: {reason}")]
    Sidecar { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeInfo {
    pub object_type: ObjectType,
    pub id: ObjectId,
    /// Referenced by a stored node but absent from the store.
    pub hole: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevisionInfo {
    pub tree: ObjectId,
    pub committer_date: Timestamp,
    pub message_len: usize,
    /// First whitespace-delimited word of the message, if any.
    pub first_word: Option<String>,
}

/// A recorded visit with its snapshot resolved to a graph node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitAttachment {
    pub visit: Visit,
    pub snapshot: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceEntry {
    pub origin: Origin,
    /// Earliest visit of the origin whose snapshot reaches the object.
    pub visit: Visit,
    /// Oldest revision reachable from the origin that contains the object.
    pub revision: Option<(ObjectId, Timestamp)>,
    pub earliest: bool,
}

/// Compressed-sparse-row adjacency.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_edges(nodes: usize, edges: &[(u32, u32)]) -> Csr {
        let mut offsets = vec![0u32; nodes + 1];
        for &(from, _) in edges {
            offsets[from as usize + 1] += 1;
        }
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; edges.len()];
        for &(from, to) in edges {
            targets[fill[from as usize] as usize] = to;
            fill[from as usize] += 1;
        }
        for i in 0..nodes {
            targets[offsets[i] as usize..offsets[i + 1] as usize].sort_unstable();
        }
        Csr { offsets, targets }
    }

    fn neighbours(&self, node: u32) -> &[u32] {
        let start = self.offsets[node as usize] as usize;
        let end = self.offsets[node as usize + 1] as usize;
        &self.targets[start..end]
    }
}

/// Immutable graph view. Node indexes are dense; nodes are ordered by
/// (type, id), with holes interleaved.
#[derive(Debug, Clone, Default)]
pub struct ArchiveGraph {
    nodes: Vec<NodeInfo>,
    index: HashMap<ObjectId, u32>,
    forward: Csr,
    backward: Csr,
    revisions: HashMap<u32, RevisionInfo>,
    visits: Vec<VisitAttachment>,
    origins: BTreeMap<Origin, Vec<usize>>,
}

/// Loads every node, child edge and visit of `store`. Missing children
/// become hole nodes rather than errors.
pub fn build_graph(store: &ArchiveStore) -> Result<ArchiveGraph, GraphError> {
    let mut stored: Vec<(ObjectType, ObjectId, Option<Node>)> = Vec::new();
    for record in store.content_records() {
        stored.push((ObjectType::Content, record.sha1_git, None));
    }
    for object_type in [
        ObjectType::Directory,
        ObjectType::Revision,
        ObjectType::Release,
        ObjectType::Snapshot,
    ] {
        for item in store.iterate(object_type)? {
            let (id, node) = item?;
            stored.push((object_type, id, Some(node)));
        }
    }
    let mut nodes: Vec<NodeInfo> = stored
        .iter()
        .map(|(object_type, id, _)| NodeInfo {
            object_type: *object_type,
            id: *id,
            hole: false,
        })
        .collect();
    let mut holes: BTreeMap<ObjectId, ObjectType> = BTreeMap::new();
    {
        let present: std::collections::HashSet<ObjectId> = nodes.iter().map(|n| n.id).collect();
        for (_, _, node) in &stored {
            if let Some(node) = node {
                for (child_type, child) in node.children() {
                    if !present.contains(&child) {
                        holes.entry(child).or_insert(child_type);
                    }
                }
            }
        }
    }
    nodes.extend(holes.into_iter().map(|(id, object_type)| NodeInfo {
        object_type,
        id,
        hole: true,
    }));
    nodes.sort_by_key(|a| (a.object_type, a.id));
    let index: HashMap<ObjectId, u32> = nodes.iter().enumerate().map(|(i, n)| (n.id, i as u32)).collect();

    let mut edges = Vec::new();
    let mut revisions = HashMap::new();
    for (_, id, node) in &stored {
        let Some(node) = node else { continue };
        let from = index[id];
        for (_, child) in node.children() {
            edges.push((from, index[&child]));
        }
        if let Node::Revision(rev) = node {
            revisions.insert(
                from,
                RevisionInfo {
                    tree: rev.tree,
                    committer_date: rev.committer_date,
                    message_len: rev.message.len(),
                    first_word: first_token(&rev.message),
                },
            );
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let forward = Csr::from_edges(nodes.len(), &edges);
    let transposed: Vec<(u32, u32)> = edges.iter().map(|&(a, b)| (b, a)).collect();
    let backward = Csr::from_edges(nodes.len(), &transposed);

    let mut visits = Vec::new();
    let mut origins: BTreeMap<Origin, Vec<usize>> = BTreeMap::new();
    for visit in store.visits() {
        origins.entry(visit.origin.clone()).or_default().push(visits.len());
        visits.push(VisitAttachment {
            snapshot: index.get(&visit.snapshot).copied(),
            visit: visit.clone(),
        });
    }
    for list in origins.values_mut() {
        list.sort_by_key(|&i| (visits[i].visit.date.seconds, visits[i].visit.number));
    }
    Ok(ArchiveGraph {
        nodes,
        index,
        forward,
        backward,
        revisions,
        visits,
        origins,
    })
}

impl ArchiveGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.forward.targets.len()
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node_index(&self, id: &ObjectId) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn node(&self, index: u32) -> &NodeInfo {
        &self.nodes[index as usize]
    }

    pub fn successors(&self, index: u32) -> &[u32] {
        self.forward.neighbours(index)
    }

    pub fn predecessors(&self, index: u32) -> &[u32] {
        self.backward.neighbours(index)
    }

    /// All `(from, to)` edges, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (ObjectId, ObjectId)> + '_ {
        (0..self.nodes.len() as u32).flat_map(move |from| {
            self.successors(from)
                .iter()
                .map(move |&to| (self.nodes[from as usize].id, self.nodes[to as usize].id))
        })
    }

    pub fn holes(&self) -> impl Iterator<Item = &NodeInfo> {
        self.nodes.iter().filter(|n| n.hole)
    }

    pub fn revision(&self, index: u32) -> Option<&RevisionInfo> {
        self.revisions.get(&index)
    }

    pub fn revision_info(&self, id: &ObjectId) -> Option<&RevisionInfo> {
        self.revisions.get(&self.node_index(id)?)
    }

    pub(crate) fn revision_indexes(&self) -> impl Iterator<Item = (u32, &RevisionInfo)> {
        self.revisions.iter().map(|(i, r)| (*i, r))
    }

    pub fn visits(&self) -> &[VisitAttachment] {
        &self.visits
    }

    /// Origins in URL order.
    pub fn origins(&self) -> impl Iterator<Item = &Origin> {
        self.origins.keys()
    }

    /// Visits of one origin by date.
    pub fn visits_of(&self, origin: &Origin) -> impl Iterator<Item = &VisitAttachment> {
        self.origins.get(origin).into_iter().flatten().map(|&i| &self.visits[i])
    }

    fn require(&self, id: &ObjectId) -> Result<u32, GraphError> {
        self.node_index(id).ok_or(GraphError::UnknownNode(*id))
    }

    /// Indexes reachable from `starts` (inclusive), restricted to nodes
    /// accepted by `enter`.
    pub(crate) fn reach(
        &self,
        starts: impl IntoIterator<Item = u32>,
        direction: Direction,
        mut enter: impl FnMut(u32) -> bool,
    ) -> Vec<bool> {
        let adjacency = match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        };
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        for start in starts {
            if !seen[start as usize] && enter(start) {
                seen[start as usize] = true;
                queue.push_back(start);
            }
        }
        while let Some(node) = queue.pop_front() {
            for &next in adjacency.neighbours(node) {
                if !seen[next as usize] && enter(next) {
                    seen[next as usize] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Ids reachable from `start`, itself included, in ascending order.
    /// `types` filters the output, not the walk.
    pub fn traverse(
        &self,
        start: &ObjectId,
        direction: Direction,
        types: Option<&[ObjectType]>,
    ) -> Result<Vec<ObjectId>, GraphError> {
        let start = self.require(start)?;
        let seen = self.reach([start], direction, |_| true);
        let mut out: Vec<ObjectId> = seen
            .iter()
            .enumerate()
            .filter(|(i, &s)| s && types.is_none_or(|t| t.contains(&self.nodes[*i].object_type)))
            .map(|(i, _)| self.nodes[i].id)
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Revisions whose own tree contains `target` (or `target` itself
    /// when it is a revision). Parent links are not followed.
    fn containing_revisions(&self, target: u32) -> Vec<u32> {
        if self.nodes[target as usize].object_type == ObjectType::Revision {
            return self
                .revisions
                .contains_key(&target)
                .then_some(target)
                .into_iter()
                .collect();
        }
        let mut revisions = Vec::new();
        self.reach([target], Direction::Backward, |i| {
            match self.nodes[i as usize].object_type {
                ObjectType::Content | ObjectType::Directory => true,
                ObjectType::Revision => {
                    revisions.push(i);
                    false
                }
                _ => false,
            }
        });
        revisions.sort_unstable();
        revisions.dedup();
        revisions.retain(|r| self.revisions.contains_key(r));
        revisions
    }

    fn revision_key(&self, index: u32) -> (i64, ObjectId) {
        let info = &self.revisions[&index];
        (info.committer_date.seconds, self.nodes[index as usize].id)
    }

    /// Oldest revision (by committer date, then id) whose tree contains `id`.
    pub fn earliest_occurrence(&self, id: &ObjectId) -> Result<(ObjectId, Timestamp), GraphError> {
        let target = self.require(id)?;
        self.containing_revisions(target)
            .into_iter()
            .min_by_key(|&r| self.revision_key(r))
            .map(|r| (self.nodes[r as usize].id, self.revisions[&r].committer_date))
            .ok_or(GraphError::NoRevision(*id))
    }

    /// Every origin whose visited snapshots reach `id`, one entry per
    /// origin in URL order.
    ///
    /// The entry holding the oldest containing revision is flagged
    /// `earliest`; ties go to the earlier visit, then the smaller URL.
    /// Without any containing revision the earliest visit wins.
    pub fn provenance(&self, id: &ObjectId) -> Result<Vec<ProvenanceEntry>, GraphError> {
        let target = self.require(id)?;
        let ancestors = self.reach([target], Direction::Backward, |_| true);
        let containing: std::collections::HashSet<u32> = self.containing_revisions(target).into_iter().collect();
        let mut entries = Vec::new();
        for (origin, visit_indexes) in &self.origins {
            let reaching: Vec<&VisitAttachment> = visit_indexes
                .iter()
                .map(|&i| &self.visits[i])
                .filter(|v| v.snapshot.is_some_and(|s| ancestors[s as usize]))
                .collect();
            let Some(first) = reaching.first() else { continue };
            // Only ancestors of the target can lead to a containing revision.
            let within = self.reach(reaching.iter().filter_map(|v| v.snapshot), Direction::Forward, |i| {
                ancestors[i as usize]
            });
            let revision = containing
                .iter()
                .filter(|&&r| within[r as usize])
                .map(|&r| self.revision_key(r))
                .min();
            entries.push(ProvenanceEntry {
                origin: origin.clone(),
                visit: first.visit.clone(),
                revision: revision.map(|(_, rid)| {
                    let idx = self.index[&rid];
                    (rid, self.revisions[&idx].committer_date)
                }),
                earliest: false,
            });
        }
        let best = entries
            .iter()
            .enumerate()
            .min_by_key(|(_, e)| {
                (
                    e.revision.is_none(),
                    e.revision.map(|(rid, date)| (date.seconds, rid)),
                    e.visit.date.seconds,
                    e.origin.url().to_string(),
                )
            })
            .map(|(i, _)| i);
        if let Some(best) = best {
            entries[best].earliest = true;
        }
        Ok(entries)
    }

    /// Revision indexes reachable from an origin's snapshots, following
    /// releases and parent links but not entering trees.
    pub(crate) fn origin_revisions(&self, origin: &Origin) -> Vec<u32> {
        let starts: Vec<u32> = self.visits_of(origin).filter_map(|v| v.snapshot).collect();
        let seen = self.reach(starts, Direction::Forward, |i| {
            matches!(
                self.nodes[i as usize].object_type,
                ObjectType::Snapshot | ObjectType::Release | ObjectType::Revision
            )
        });
        seen.iter()
            .enumerate()
            .filter(|(i, &s)| {
                s && self.nodes[*i].object_type == ObjectType::Revision && self.revisions.contains_key(&(*i as u32))
            })
            .map(|(i, _)| i as u32)
            .collect()
    }
}
