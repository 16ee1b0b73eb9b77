//! Deduplicated Merkle-DAG archive of source code artifacts.
//!
//! Nodes ([`model`]) are identified by intrinsic hashes that double as
//! persistent identifiers ([`swhid`]). The [`objstore`] keeps one copy per
//! node, [`ingest`] builds nodes from directory trees and git fast-export
//! streams, [`graphquery`] answers provenance, fork and growth questions,
//! [`dataset`] exports the graph as relational tables and [`remote`] talks
//! to the public archive.

pub mod dataset;
pub mod graphquery;
pub mod ingest;
pub mod model;
pub mod objstore;
pub mod remote;
pub mod swhid;

pub use model::{Node, ObjectId, ObjectType, Origin, Timestamp, Visit};
pub use objstore::{ArchiveStore, StoreError};
pub use swhid::{Swhid, SwhidCore};
