//! Self-contained sub-archives for a subset of origins.

use std::collections::HashSet;
use std::path::Path;

use super::DatasetError;
use crate::model::{Node, ObjectId, ObjectType, Origin};
use crate::objstore::{ArchiveStore, StoreError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OriginSelector {
    /// Origins whose URL starts with the prefix.
    Prefix(String),
    List(Vec<Origin>),
}

impl OriginSelector {
    pub fn matches(&self, origin: &Origin) -> bool {
        match self {
            OriginSelector::Prefix(prefix) => origin.url().starts_with(prefix.as_str()),
            OriginSelector::List(list) => list.contains(origin),
        }
    }
}

/// Copies every node reachable from the selected origins' visits into a new
/// store at `out`, children before parents, then replays the visits.
/// Payload-less contents and holes of the source stay that way.
pub fn make_teaser(store: &ArchiveStore, selector: &OriginSelector, out: &Path) -> Result<ArchiveStore, DatasetError> {
    let mut teaser = ArchiveStore::open_with(out, store.options())?;
    let records: std::collections::HashMap<ObjectId, _> =
        store.content_records().into_iter().map(|r| (r.sha1_git, r)).collect();
    let visits: Vec<_> = store
        .visits()
        .iter()
        .filter(|v| selector.matches(&v.origin))
        .cloned()
        .collect();

    let mut done: HashSet<(ObjectType, ObjectId)> = HashSet::new();
    for visit in &visits {
        let mut stack = vec![(ObjectType::Snapshot, visit.snapshot, None::<Node>)];
        while let Some((object_type, id, node)) = stack.pop() {
            if let Some(node) = node {
                teaser.put(&node)?;
                continue;
            }
            if !done.insert((object_type, id)) {
                continue;
            }
            if object_type == ObjectType::Content {
                match records.get(&id) {
                    Some(r) if r.has_payload => {
                        teaser.put(&Node::Content(crate::model::Content::new(store.get_content(&id)?)))?;
                    }
                    Some(r) => {
                        teaser.put_content_metadata(r.sha1, r.sha1_git, r.length)?;
                    }
                    None => {}
                }
                continue;
            }
            let node = match store.get(object_type, &id) {
                Ok(node) => node,
                Err(e) if e.is_not_found() && store.options().allow_holes => continue,
                Err(e) => return Err(e.into()),
            };
            let children = node.children();
            stack.push((object_type, id, Some(node)));
            for (child_type, child) in children {
                if !done.contains(&(child_type, child)) {
                    stack.push((child_type, child, None));
                }
            }
        }
        match teaser.record_visit(&visit.origin, visit.date, visit.snapshot) {
            Ok(_) => {}
            Err(StoreError::VisitOutOfOrder { .. }) => unreachable!("source visits are ordered"),
            Err(e) => return Err(e.into()),
        }
    }
    teaser.flush()?;
    Ok(teaser)
}
