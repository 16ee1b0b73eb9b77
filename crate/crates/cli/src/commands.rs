use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use codevault::dataset::{self, OriginSelector};
use codevault::graphquery::{self, ArchiveGraph, ForkWitness};
use codevault::ingest::{self, IngestReport};
use codevault::model::{BranchTarget, EntryKind, Node};
use codevault::remote::RemoteClient;
use codevault::swhid::{parse_swhid, SwhidCore};
use codevault::{ArchiveStore, ObjectId, ObjectType, Origin, Timestamp};
use serde_json::{json, Value};

use crate::config::Settings;
use crate::error::{CliError, ExitCode};
use crate::output::{escape_bytes, opt, Table};
use crate::{Command, IngestCommand, StatsCommand};

pub fn dispatch(settings: &Settings, command: Command) -> Result<(), CliError> {
    match command {
        Command::Identify { paths } => identify(settings, &paths),
        Command::Ingest(IngestCommand::Tree { path, origin, date }) => {
            let mut store = open_writable(settings)?;
            let origin = origin.map(|o| parse_origin(&o)).transpose()?;
            let visit = match &origin {
                Some(o) => Some((o, parse_date(date.as_deref())?)),
                None => None,
            };
            let report = ingest::ingest_tree(&mut store, &path, visit)?;
            emit(settings, &report_table(&report))
        }
        Command::Ingest(IngestCommand::FastExport { file, origin, date }) => {
            let mut store = open_writable(settings)?;
            let origin = parse_origin(&origin)?;
            let date = parse_date(date.as_deref())?;
            let report = if file.as_os_str() == "-" {
                ingest::ingest_fast_export_reader(&mut store, io::stdin().lock(), &origin, date)?
            } else {
                let f =
                    File::open(&file).map_err(|e| CliError::usage(format!("cannot read {}: {e}", file.display())))?;
                ingest::ingest_fast_export_reader(&mut store, BufReader::new(f), &origin, date)?
            };
            emit(settings, &report_table(&report))
        }
        Command::Ls { swhid, remote } => ls(settings, &swhid, remote),
        Command::Cat { swhid, remote } => cat(settings, &swhid, remote),
        Command::Provenance { swhid } => provenance(settings, &swhid),
        Command::Forks { sidecar } => forks(settings, sidecar.as_deref()),
        Command::Stats(stats) => match stats {
            StatsCommand::Counts => {
                let store = open_read(settings)?;
                emit(settings, &counts_table(&store)?)
            }
            StatsCommand::Growth { summary } => growth(settings, summary),
            StatsCommand::Stems { k } => {
                let graph = graph(settings)?;
                let mut t = Table::new(&["stem", "count"]);
                for (stem, count) in graphquery::top_commit_stems(&graph, k) {
                    t.push(vec![json!(stem), json!(count)]);
                }
                emit(settings, &t)
            }
        },
        Command::Export { out, exported_at } => {
            let store = open_read(settings)?;
            let exported_at = exported_at.unwrap_or_else(|| chrono::Utc::now().to_rfc3339());
            let bundle = dataset::export_tables(&store, &out, &exported_at)?;
            let mut t = Table::new(&["table", "rows"]);
            for (table, rows) in &bundle.rows {
                t.push(vec![json!(table), json!(rows)]);
            }
            emit(settings, &t)
        }
        Command::Import { bundle } => {
            let store = dataset::import_tables(&bundle, settings.store_path()?)?;
            emit(settings, &counts_table(&store)?)
        }
        Command::Teaser { out, prefix, origin } => {
            let store = open_read(settings)?;
            let selector = match prefix {
                Some(p) => OriginSelector::Prefix(p),
                None => OriginSelector::List(origin.iter().map(|o| parse_origin(o)).collect::<Result<_, _>>()?),
            };
            let teaser = dataset::make_teaser(&store, &selector, &out)?;
            emit(settings, &counts_table(&teaser)?)
        }
        Command::Licenses { out } => licenses(settings, out.as_deref()),
        Command::Fetch { sha1, save, output } => fetch(settings, &sha1, save, output.as_deref()),
        Command::Resolve { swhid } => {
            let client = RemoteClient::new(settings.remote_config()?)?;
            let found = client.resolve_remote(&swhid)?;
            emit(
                settings,
                &Table::record(vec![
                    ("swhid", json!(found.swhid.to_string())),
                    ("object_type", json!(found.swhid.core.object_type.long_name())),
                    ("browse_url", opt(found.browse_url)),
                    ("verified", json!(found.verified)),
                ]),
            )
        }
    }
}

fn emit(settings: &Settings, table: &Table) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    table.write(settings.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn open_writable(settings: &Settings) -> Result<ArchiveStore, CliError> {
    Ok(ArchiveStore::open(settings.store_path()?)?)
}

fn open_read(settings: &Settings) -> Result<ArchiveStore, CliError> {
    Ok(ArchiveStore::open_read_only(settings.store_path()?)?)
}

fn graph(settings: &Settings) -> Result<ArchiveGraph, CliError> {
    Ok(graphquery::build_graph(&open_read(settings)?)?)
}

fn parse_origin(url: &str) -> Result<Origin, CliError> {
    Origin::new(url).map_err(|e| CliError::usage(format!("bad origin {url:?}: {e}")))
}

fn parse_core(text: &str) -> Result<SwhidCore, CliError> {
    Ok(parse_swhid(text)?.core)
}

/// Epoch seconds (optionally followed by `±HHMM`) or RFC 3339.
fn parse_date(text: Option<&str>) -> Result<Timestamp, CliError> {
    let Some(text) = text else {
        return Ok(Timestamp::utc(chrono::Utc::now().timestamp()));
    };
    if let Some(ts) = Timestamp::parse(text) {
        return Ok(ts);
    }
    let date = DateTime::parse_from_rfc3339(text).map_err(|e| CliError::usage(format!("bad date {text:?}: {e}")))?;
    Ok(Timestamp::new(
        date.timestamp(),
        (date.offset().local_minus_utc() / 60) as i16,
    ))
}

fn format_time(ts: &Timestamp) -> String {
    FixedOffset::east_opt(ts.offset_minutes as i32 * 60)
        .and_then(|tz| DateTime::from_timestamp(ts.seconds, 0).map(|d| d.with_timezone(&tz).to_rfc3339()))
        .unwrap_or_else(|| ts.seconds.to_string())
}

fn swhid(object_type: ObjectType, id: ObjectId) -> Value {
    json!(SwhidCore::new(object_type, id).to_string())
}

fn identify(settings: &Settings, paths: &[std::path::PathBuf]) -> Result<(), CliError> {
    let single = paths.len() == 1 && settings.format == crate::output::Format::Text;
    let mut t = if single {
        Table::new(&["swhid"])
    } else {
        Table::new(&["swhid", "path"])
    };
    for path in paths {
        let id = ingest::identify_path(path)?;
        if single {
            t.push(vec![json!(id.to_string())]);
        } else {
            t.push(vec![json!(id.to_string()), json!(path.display().to_string())]);
        }
    }
    emit(settings, &t)
}

fn report_table(r: &IngestReport) -> Table {
    Table::record(vec![
        ("new", json!(r.new.total())),
        ("deduplicated", json!(r.deduplicated.total())),
        ("new_contents", json!(r.new.contents)),
        ("new_directories", json!(r.new.directories)),
        ("new_revisions", json!(r.new.revisions)),
        ("new_releases", json!(r.new.releases)),
        ("new_snapshots", json!(r.new.snapshots)),
        ("skipped", json!(r.skipped)),
        ("root", opt(r.root.map(|c| c.to_string()))),
        (
            "snapshot",
            opt(r.snapshot.map(|s| SwhidCore::new(ObjectType::Snapshot, s).to_string())),
        ),
        ("origin", opt(r.origin.as_ref().map(|o| o.url().to_string()))),
        ("visit", opt(r.visit.as_ref().map(|v| v.number))),
    ])
}

fn counts_table(store: &ArchiveStore) -> Result<Table, CliError> {
    let stats = store.stats()?;
    let mut t = Table::new(&["object", "count"]);
    for (name, n) in [
        ("content", stats.contents),
        ("directory", stats.directories),
        ("revision", stats.revisions),
        ("release", stats.releases),
        ("snapshot", stats.snapshots),
        ("origin", stats.origins),
        ("visit", stats.visits),
        ("metadata_only_content", stats.metadata_only_contents),
        ("hole", store.holes().len() as u64),
    ] {
        t.push(vec![json!(name), json!(n)]);
    }
    Ok(t)
}

fn type_mismatch(command: &str, wanted: &str, got: ObjectType) -> CliError {
    CliError::new(
        ExitCode::TypeMismatch,
        format!("{command} needs a {wanted}, got a {}", got.long_name()),
    )
}

fn entry_type(kind: EntryKind) -> ObjectType {
    kind.target_type()
}

fn ls(settings: &Settings, text: &str, remote: bool) -> Result<(), CliError> {
    let core = parse_core(text)?;
    let mut t = Table::new(&["name", "type", "perms", "target"]);
    if remote {
        if core.object_type != ObjectType::Directory {
            return Err(type_mismatch("ls --remote", "directory", core.object_type));
        }
        let client = RemoteClient::new(settings.remote_config()?)?;
        for e in client.list_directory(&core.id)? {
            t.push(vec![
                json!(escape_bytes(&e.name)),
                json!(e.kind.label()),
                json!(e.kind.perms()),
                swhid(entry_type(e.kind), e.target),
            ]);
        }
        return emit(settings, &t);
    }
    let store = open_read(settings)?;
    match core.object_type {
        ObjectType::Directory => {
            let Node::Directory(dir) = store.get(ObjectType::Directory, &core.id)? else {
                unreachable!()
            };
            for e in dir.entries() {
                t.push(vec![
                    json!(escape_bytes(&e.name)),
                    json!(e.kind.label()),
                    json!(e.kind.perms()),
                    swhid(entry_type(e.kind), e.target),
                ]);
            }
        }
        ObjectType::Snapshot => {
            let Node::Snapshot(snp) = store.get(ObjectType::Snapshot, &core.id)? else {
                unreachable!()
            };
            for b in snp.branches() {
                let target = match &b.target {
                    BranchTarget::Object { target_type, id } => swhid(*target_type, *id),
                    BranchTarget::Alias(name) => json!(escape_bytes(name)),
                    BranchTarget::Dangling => Value::Null,
                };
                t.push(vec![
                    json!(escape_bytes(&b.name)),
                    json!(b.target.type_name()),
                    Value::Null,
                    target,
                ]);
            }
        }
        other => return Err(type_mismatch("ls", "directory or snapshot", other)),
    }
    emit(settings, &t)
}

fn cat(settings: &Settings, text: &str, remote: bool) -> Result<(), CliError> {
    let core = parse_core(text)?;
    if core.object_type != ObjectType::Content {
        return Err(type_mismatch("cat", "content", core.object_type));
    }
    let data = if remote {
        RemoteClient::new(settings.remote_config()?)?.fetch_content_raw(&core.id)?
    } else {
        let store = open_read(settings)?;
        if store.is_metadata_only(&core.id) {
            return Err(CliError::new(
                ExitCode::NotFound,
                format!("{core}: only metadata is archived, no payload"),
            ));
        }
        store.get_content(&core.id)?
    };
    let mut out = io::stdout().lock();
    out.write_all(&data)?;
    out.flush()?;
    Ok(())
}

fn provenance(settings: &Settings, text: &str) -> Result<(), CliError> {
    let core = parse_core(text)?;
    let graph = graph(settings)?;
    match graph.node_index(&core.id) {
        Some(i) if graph.node(i).object_type == core.object_type => {}
        Some(i) => {
            return Err(type_mismatch(
                "provenance",
                core.object_type.long_name(),
                graph.node(i).object_type,
            ))
        }
        None => {
            return Err(CliError::new(
                ExitCode::NotFound,
                format!("{core} is not in the archive"),
            ));
        }
    }
    let mut t = Table::new(&["origin", "visit", "visit_date", "revision", "revision_date", "earliest"]);
    for e in graph.provenance(&core.id)? {
        t.push(vec![
            json!(e.origin.url()),
            json!(e.visit.number),
            json!(format_time(&e.visit.date)),
            opt(e
                .revision
                .map(|(r, _)| SwhidCore::new(ObjectType::Revision, r).to_string())),
            opt(e.revision.map(|(_, d)| format_time(&d))),
            json!(e.earliest),
        ]);
    }
    emit(settings, &t)
}

fn forks(settings: &Settings, sidecar: Option<&Path>) -> Result<(), CliError> {
    let declared = match sidecar {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            graphquery::parse_fork_sidecar(&text)?
        }
        None => Vec::new(),
    };
    let graph = graph(settings)?;
    let report = graphquery::classify_forks(&graph, &declared);
    let mut t = Table::new(&["group", "fork_type", "origin", "common"]);
    for (n, group) in report.groups.iter().enumerate() {
        let common = group.common.map(|id| match group.fork_type {
            2 => swhid(ObjectType::Revision, id),
            _ => swhid(ObjectType::Directory, id),
        });
        for origin in &group.origins {
            t.push(vec![
                json!(n + 1),
                json!(group.fork_type),
                json!(origin.url()),
                common.clone().unwrap_or(Value::Null),
            ]);
        }
        for link in &group.links {
            let witness = match link.witness {
                ForkWitness::Declared => "declared".to_string(),
                ForkWitness::Revision(id) => SwhidCore::new(ObjectType::Revision, id).to_string(),
                ForkWitness::Directory(id) => SwhidCore::new(ObjectType::Directory, id).to_string(),
            };
            log::info!("group {}: {} ~ {} via {witness}", n + 1, link.a, link.b);
        }
    }
    emit(settings, &t)
}

fn growth(settings: &Settings, summary: bool) -> Result<(), CliError> {
    let graph = graph(settings)?;
    let series = graphquery::growth_stats(&graph)?;
    if summary {
        return emit(
            settings,
            &Table::record(vec![
                ("months", json!(series.buckets.len())),
                (
                    "commit_doubling_months",
                    opt(series.commit_doubling_months.filter(|d| d.is_finite())),
                ),
                (
                    "blob_doubling_months",
                    opt(series.blob_doubling_months.filter(|d| d.is_finite())),
                ),
            ]),
        );
    }
    let mut t = Table::new(&["month", "original_commits", "original_blobs"]);
    for b in &series.buckets {
        t.push(vec![
            json!(b.month.to_string()),
            json!(b.original_commits),
            json!(b.original_blobs),
        ]);
    }
    let describe = |d: Option<f64>| match d {
        Some(d) if d.is_finite() => format!("{d:.2} months"),
        Some(_) => "no growth".to_string(),
        None => "undefined".to_string(),
    };
    t.note(format!(
        "commit doubling time: {}",
        describe(series.commit_doubling_months)
    ));
    t.note(format!("blob doubling time: {}", describe(series.blob_doubling_months)));
    emit(settings, &t)
}

fn licenses(settings: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let store = open_read(settings)?;
    let graph = graphquery::build_graph(&store)?;
    let records = dataset::extract_license_blobs(&store, &graph)?;
    if let Some(path) = out {
        let file = File::create(path).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        dataset::write_license_csv(&records, BufWriter::new(file))
            .map_err(|e| CliError::new(ExitCode::Generic, e.to_string()))?;
    }
    let mut t = Table::new(&[
        "swhid",
        "sha1",
        "length",
        "filenames",
        "example_origin",
        "earliest_commit",
    ]);
    for r in &records {
        let names: Vec<String> = r.filenames.iter().map(|n| escape_bytes(n)).collect();
        t.push(vec![
            swhid(ObjectType::Content, r.sha1_git),
            opt(r.sha1.map(|s| s.to_hex())),
            opt(r.length),
            json!(names.join("/")),
            opt(r.example_origin.as_ref().map(|o| o.url().to_string())),
            opt(r
                .earliest_commit
                .map(|c| SwhidCore::new(ObjectType::Revision, c).to_string())),
        ]);
    }
    emit(settings, &t)
}

fn fetch(settings: &Settings, sha1: &str, save: bool, output: Option<&Path>) -> Result<(), CliError> {
    let sha1 = ObjectId::from_hex(sha1).map_err(|e| CliError::new(ExitCode::Parse, e.to_string()))?;
    let client = RemoteClient::new(settings.remote_config()?)?;
    if save {
        let mut store = open_writable(settings)?;
        let id = client.fetch_into_store(&mut store, &sha1)?;
        store.flush()?;
        return emit(
            settings,
            &Table::record(vec![("swhid", swhid(ObjectType::Content, id))]),
        );
    }
    let data = client.fetch_content_by_sha1(&sha1)?;
    match output {
        Some(path) => {
            std::fs::write(path, &data).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&data)?;
            out.flush()?;
        }
    }
    Ok(())
}
