//! Fork groups: declared links (type 1), shared commits (type 2) and shared
//! root directories (type 3).

use std::collections::{BTreeMap, BTreeSet};

use super::{ArchiveGraph, GraphError};
use crate::model::{ObjectId, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ForkWitness {
    /// A pair listed in the sidecar file.
    Declared,
    /// A revision reachable from both origins.
    Revision(ObjectId),
    /// A root directory of revisions reachable from both origins.
    Directory(ObjectId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkLink {
    pub a: Origin,
    pub b: Origin,
    pub witness: ForkWitness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkGroup {
    pub fork_type: u8,
    /// Sorted by URL; at least two.
    pub origins: Vec<Origin>,
    /// A spanning tree of witnessed pairs connecting the group.
    pub links: Vec<ForkLink>,
    /// Revision (type 2) or root directory (type 3) shared by every member,
    /// when one exists.
    pub common: Option<ObjectId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForkReport {
    pub groups: Vec<ForkGroup>,
}

impl ForkReport {
    pub fn group_of(&self, origin: &Origin) -> Option<&ForkGroup> {
        self.groups.iter().find(|g| g.origins.contains(origin))
    }
}

/// Reads `url SP url` pairs; blank lines and `#` comments are skipped.
pub fn parse_fork_sidecar(text: &str) -> Result<Vec<(Origin, Origin)>, GraphError> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| GraphError::Sidecar { line: n + 1, reason };
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected two origin URLs".into()));
        };
        let a = Origin::new(a).map_err(|e| err(e.to_string()))?;
        let b = Origin::new(b).map_err(|e| err(e.to_string()))?;
        pairs.push((a, b));
    }
    Ok(pairs)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut x = x;
        while self.0[x] != root {
            let next = self.0[x];
            self.0[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Groups origins at their strongest relation. Origins placed in a type-1
/// group are not considered for types 2 and 3, and likewise type-2 members
/// for type 3, so every origin belongs to at most one group.
pub fn classify_forks(graph: &ArchiveGraph, declared: &[(Origin, Origin)]) -> ForkReport {
    let origins: Vec<Origin> = graph.origins().cloned().collect();
    let position: BTreeMap<&Origin, usize> = origins.iter().enumerate().map(|(i, o)| (o, i)).collect();
    let mut assigned = vec![false; origins.len()];
    let mut groups = Vec::new();

    let mut uf = UnionFind::new(origins.len());
    let mut links = Vec::new();
    for (a, b) in declared {
        let (Some(&ia), Some(&ib)) = (position.get(a), position.get(b)) else {
            log::warn!("fork sidecar names an unknown origin: {a} {b}");
            continue;
        };
        if uf.union(ia, ib) {
            links.push((ia, ib, ForkWitness::Declared));
        }
    }
    collect_groups(1, &origins, &mut uf, links, &mut assigned, &mut groups, |_| None);

    let revisions: Vec<BTreeSet<ObjectId>> = origins
        .iter()
        .map(|o| {
            graph
                .origin_revisions(o)
                .into_iter()
                .map(|i| graph.node(i).id)
                .collect()
        })
        .collect();
    let roots: Vec<BTreeSet<ObjectId>> = revisions
        .iter()
        .map(|revs| {
            revs.iter()
                .filter_map(|r| graph.revision_info(r).map(|info| info.tree))
                .collect()
        })
        .collect();

    for (fork_type, sets) in [(2u8, &revisions), (3u8, &roots)] {
        let mut holders: BTreeMap<ObjectId, Vec<usize>> = BTreeMap::new();
        for (i, set) in sets.iter().enumerate() {
            if assigned[i] {
                continue;
            }
            for id in set {
                holders.entry(*id).or_default().push(i);
            }
        }
        let mut uf = UnionFind::new(origins.len());
        let mut links = Vec::new();
        for (id, members) in &holders {
            for pair in members.windows(2) {
                if uf.union(pair[0], pair[1]) {
                    let witness = if fork_type == 2 {
                        ForkWitness::Revision(*id)
                    } else {
                        ForkWitness::Directory(*id)
                    };
                    links.push((pair[0], pair[1], witness));
                }
            }
        }
        collect_groups(
            fork_type,
            &origins,
            &mut uf,
            links,
            &mut assigned,
            &mut groups,
            |members| {
                let mut common = sets[members[0]].clone();
                for &m in &members[1..] {
                    common.retain(|id| sets[m].contains(id));
                }
                common.into_iter().next()
            },
        );
    }
    ForkReport { groups }
}

fn collect_groups(
    fork_type: u8,
    origins: &[Origin],
    uf: &mut UnionFind,
    links: Vec<(usize, usize, ForkWitness)>,
    assigned: &mut [bool],
    groups: &mut Vec<ForkGroup>,
    common: impl Fn(&[usize]) -> Option<ObjectId>,
) {
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in (0..origins.len()).filter(|&i| !assigned[i]) {
        components.entry(uf.find(i)).or_default().push(i);
    }
    for (root, members) in components {
        if members.len() < 2 {
            continue;
        }
        for &m in &members {
            assigned[m] = true;
        }
        let group_links = links
            .iter()
            .filter(|(a, _, _)| uf.find(*a) == root)
            .map(|&(a, b, witness)| ForkLink {
                a: origins[a].clone(),
                b: origins[b].clone(),
                witness,
            })
            .collect();
        groups.push(ForkGroup {
            fork_type,
            origins: members.iter().map(|&m| origins[m].clone()).collect(),
            links: group_links,
            common: common(&members),
        });
    }
}
