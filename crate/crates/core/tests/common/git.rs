//! Random fast-import streams and a `git` command-line oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use codevault::ObjectId;
use codevault::ObjectType;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn git_available() -> bool {
    Command::new("git")
        .arg("--version")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn git(repo: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C")
        .arg(repo)
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("LC_ALL", "C");
    cmd
}

fn run(mut cmd: Command, stdin: Option<&[u8]>) -> Vec<u8> {
    cmd.stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("spawn git");
    if let Some(input) = stdin {
        let mut pipe = child.stdin.take().unwrap();
        let input = input.to_vec();
        // Feed from a thread so a full stdout pipe cannot deadlock us.
        let feeder = std::thread::spawn(move || {
            let _ = pipe.write_all(&input);
        });
        let out = child.wait_with_output().unwrap();
        feeder.join().unwrap();
        assert!(
            out.status.success(),
            "{:?}: {}",
            cmd,
            String::from_utf8_lossy(&out.stderr)
        );
        return out.stdout;
    }
    let out = child.wait_with_output().unwrap();
    assert!(
        out.status.success(),
        "{:?}: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

/// A scratch bare repository.
pub struct Repo {
    pub path: PathBuf,
}

impl Repo {
    pub fn init(path: PathBuf) -> Repo {
        let out = Command::new("git")
            .args(["init", "-q", "--bare"])
            .arg(&path)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .output()
            .unwrap();
        assert!(out.status.success());
        Repo { path }
    }

    pub fn fast_import(&self, stream: &[u8]) {
        let mut cmd = git(&self.path);
        cmd.args(["fast-import", "--quiet"]);
        run(cmd, Some(stream));
    }

    pub fn fast_export(&self) -> Vec<u8> {
        let mut cmd = git(&self.path);
        cmd.args(["fast-export", "--all", "--signed-tags=strip"]);
        run(cmd, None)
    }

    fn batch_check(&self, args: &[&str], ids: Option<&[u8]>) -> BTreeMap<ObjectType, BTreeSet<ObjectId>> {
        let mut cmd = git(&self.path);
        cmd.arg("cat-file").args(args);
        let out = run(cmd, ids);
        let mut map: BTreeMap<ObjectType, BTreeSet<ObjectId>> = BTreeMap::new();
        for line in String::from_utf8(out).unwrap().lines() {
            let (id, kind) = line.split_once(' ').unwrap();
            let kind = ObjectType::from_manifest_name(kind.as_bytes()).unwrap();
            map.entry(kind).or_default().insert(id.parse().unwrap());
        }
        map
    }

    /// Every object in the repository's database, by type.
    pub fn all_objects(&self) -> BTreeMap<ObjectType, BTreeSet<ObjectId>> {
        self.batch_check(
            &["--batch-all-objects", "--batch-check=%(objectname) %(objecttype)"],
            None,
        )
    }

    /// Objects reachable from any ref, by type.
    pub fn reachable_objects(&self) -> BTreeMap<ObjectType, BTreeSet<ObjectId>> {
        let mut cmd = git(&self.path);
        cmd.args(["rev-list", "--objects", "--all", "--no-object-names"]);
        let ids = run(cmd, None);
        if ids.is_empty() {
            return BTreeMap::new();
        }
        self.batch_check(&["--batch-check=%(objectname) %(objecttype)"], Some(&ids))
    }

    /// `refname → (type, id)` for every ref.
    pub fn refs(&self) -> BTreeMap<Vec<u8>, (ObjectType, ObjectId)> {
        let mut cmd = git(&self.path);
        cmd.args(["for-each-ref", "--format=%(objectname) %(objecttype) %(refname)"]);
        let out = run(cmd, None);
        out.split(|&b| b == b'\n')
            .filter(|l| !l.is_empty())
            .map(|line| {
                let mut parts = line.splitn(3, |&b| b == b' ');
                let id = std::str::from_utf8(parts.next().unwrap()).unwrap().parse().unwrap();
                let kind = ObjectType::from_manifest_name(parts.next().unwrap()).unwrap();
                (parts.next().unwrap().to_vec(), (kind, id))
            })
            .collect()
    }

    pub fn hash_object(&self, kind: &str, data: &[u8]) -> ObjectId {
        let mut cmd = git(&self.path);
        cmd.args(["hash-object", "--stdin", "-t", kind]);
        let out = run(cmd, Some(data));
        String::from_utf8(out).unwrap().trim().parse().unwrap()
    }
}

/// Writes a path as fast-import expects it, quoting when needed.
fn quote_path(path: &str) -> String {
    let needs =
        path.starts_with('"') || path.contains(' ') || path.bytes().any(|b| b < 0x20 || b == b'\\' || b >= 0x80);
    if !needs {
        return path.to_string();
    }
    let mut out = String::from("\"");
    for b in path.bytes() {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            0x20..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\{:03o}", b)),
        }
    }
    out.push('"');
    out
}

const NAMES: &[&str] = &[
    "a",
    "b",
    "src",
    "lib",
    "a.txt",
    "a-b",
    "a0",
    "README",
    "with space",
    "quo\"te",
    "tab\there",
    "\u{fc}ber",
    "x.c",
    "Makefile",
    "back\\slash",
    "zz",
];

const TZ: &[&str] = &["+0000", "-0000", "+0100", "-0800", "+0530", "+1400", "-1200", "+0045"];

const POOL: &[&[u8]] = &[
    b"",
    b"hello\n",
    b"int main(void) { return 0; }\n",
    b"no trailing newline",
    b"\x00\x01\x02binary\xff\xfe",
    b"line\r\nwith crlf\r\n",
    b"GNU GENERAL PUBLIC LICENSE\n",
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    File,
    Exec,
    Link,
    Gitlink,
}

impl Mode {
    fn text(self, rng: &mut StdRng) -> &'static str {
        match self {
            Mode::File if rng.gen_bool(0.1) => "644",
            Mode::File => "100644",
            Mode::Exec if rng.gen_bool(0.1) => "755",
            Mode::Exec => "100755",
            Mode::Link => "120000",
            Mode::Gitlink => "160000",
        }
    }
}

struct Gen<'a> {
    rng: &'a mut StdRng,
    out: Vec<u8>,
    next_mark: u64,
    blob_marks: Vec<u64>,
    commit_marks: Vec<u64>,
    /// Branch name → (tip mark, file paths at tip).
    branches: BTreeMap<String, (u64, BTreeMap<String, Mode>)>,
    clock: i64,
}

impl Gen<'_> {
    fn mark(&mut self) -> u64 {
        self.next_mark += 1;
        self.next_mark
    }

    fn text(&mut self, s: &str) {
        self.out.extend_from_slice(s.as_bytes());
    }

    fn data(&mut self, payload: &[u8]) {
        self.text(&format!("data {}\n", payload.len()));
        self.out.extend_from_slice(payload);
        if self.rng.gen_bool(0.7) {
            self.out.push(b'\n');
        }
    }

    fn payload(&mut self) -> Vec<u8> {
        if self.rng.gen_bool(0.5) {
            POOL.choose(self.rng).unwrap().to_vec()
        } else {
            let len = self.rng.gen_range(0..200);
            (0..len).map(|_| self.rng.gen()).collect()
        }
    }

    fn blob(&mut self) -> u64 {
        let mark = self.mark();
        let payload = self.payload();
        self.text(&format!("blob\nmark :{mark}\n"));
        self.data(&payload);
        self.blob_marks.push(mark);
        mark
    }

    fn ident(&mut self, role: &str) {
        let name = ["Alice Example", "B", "", "Ren\u{e9} K", "dev"]
            .choose(self.rng)
            .unwrap()
            .to_string();
        let email = ["a@example.org", "b@x", "", "r\u{e9}@k.fr"]
            .choose(self.rng)
            .unwrap()
            .to_string();
        self.clock += self.rng.gen_range(-500..5000);
        let tz = TZ.choose(self.rng).unwrap();
        let sep = if name.is_empty() { "" } else { " " };
        let line = format!("{role} {name}{sep}<{email}> {} {tz}\n", self.clock.max(0));
        self.text(&line);
    }

    fn message(&mut self) -> Vec<u8> {
        let words = [
            "Update",
            "fix",
            "merge branch",
            "Add feature",
            "",
            "multi\nline\n\nbody",
        ];
        let mut msg = words.choose(self.rng).unwrap().as_bytes().to_vec();
        if self.rng.gen_bool(0.7) {
            msg.push(b'\n');
        }
        msg
    }

    fn random_path(&mut self) -> String {
        let depth = self.rng.gen_range(1..=3);
        (0..depth)
            .map(|_| *NAMES.choose(self.rng).unwrap())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn commit(&mut self, branch: &str) {
        let existing = self.branches.get(branch).cloned();
        // Blobs referenced by mark are emitted before the commit.
        let mut plan = Vec::new();
        let (mut files, parent) = match existing {
            Some((tip, files)) => (files, Some(tip)),
            None => (BTreeMap::new(), None),
        };
        for _ in 0..self.rng.gen_range(0..5) {
            let choice = self.rng.gen_range(0..10);
            let present: Vec<String> = files.keys().cloned().collect();
            if choice < 6 || present.is_empty() {
                let path = self.random_path();
                let mode = match self.rng.gen_range(0..20) {
                    0..=13 => Mode::File,
                    14..=16 => Mode::Exec,
                    17..=18 => Mode::Link,
                    _ => Mode::Gitlink,
                };
                let source = if mode == Mode::Gitlink {
                    let id: [u8; 20] = self.rng.gen();
                    format!("{}", ObjectId::from_bytes(id))
                } else if self.rng.gen_bool(0.2) {
                    "inline".to_string()
                } else if !self.blob_marks.is_empty() && self.rng.gen_bool(0.4) {
                    format!(":{}", self.blob_marks.choose(self.rng).unwrap())
                } else {
                    format!(":{}", self.blob())
                };
                let inline = if source == "inline" { Some(self.payload()) } else { None };
                remove_conflicts(&mut files, &path);
                files.insert(path.clone(), mode);
                plan.push((
                    format!("M {} {} {}\n", mode.text(self.rng), source, quote_path(&path)),
                    inline,
                ));
            } else if choice < 8 {
                let path = present.choose(self.rng).unwrap().clone();
                let target = if self.rng.gen_bool(0.5) {
                    // Delete a whole directory sometimes.
                    match path.rsplit_once('/') {
                        Some((dir, _)) => dir.to_string(),
                        None => path.clone(),
                    }
                } else {
                    path
                };
                remove_under(&mut files, &target);
                plan.push((format!("D {}\n", quote_path(&target)), None));
            } else {
                let from = present.choose(self.rng).unwrap().clone();
                let to = self.random_path();
                if to == from || to.starts_with(&format!("{from}/")) || from.starts_with(&format!("{to}/")) {
                    continue;
                }
                let mode = files[&from];
                let copy = choice == 9;
                if !copy {
                    files.remove(&from);
                }
                remove_conflicts(&mut files, &to);
                files.insert(to.clone(), mode);
                let op = if copy { 'C' } else { 'R' };
                plan.push((format!("{op} {} {}\n", quote_path(&from), quote_path(&to)), None));
            }
        }
        let deleteall = parent.is_some() && self.rng.gen_bool(0.05);
        if deleteall {
            files.clear();
            plan.clear();
        }
        let mark = self.mark();
        self.text(&format!("commit refs/heads/{branch}\nmark :{mark}\n"));
        if self.rng.gen_bool(0.8) {
            self.ident("author");
        }
        self.ident("committer");
        let msg = self.message();
        self.data(&msg);
        // A commit on an existing branch without `from` continues its tip.
        if let Some(parent) = parent {
            if self.rng.gen_bool(0.5) {
                self.text(&format!("from :{parent}\n"));
            }
        }
        if !self.commit_marks.is_empty() && self.rng.gen_bool(0.2) {
            if parent.is_none() {
                // `merge` needs a `from` to be meaningful on a new branch.
                let from = *self.commit_marks.choose(self.rng).unwrap();
                self.text(&format!("from :{from}\n"));
                files = BTreeMap::new();
                plan.push(("deleteall\n".to_string(), None));
                plan.rotate_right(1);
            }
            let other = *self.commit_marks.choose(self.rng).unwrap();
            self.text(&format!("merge :{other}\n"));
        }
        if deleteall {
            self.text("deleteall\n");
        }
        for (line, inline) in plan {
            self.text(&line);
            if let Some(payload) = inline {
                self.text(&format!("data {}\n", payload.len()));
                self.out.extend_from_slice(&payload);
                self.out.push(b'\n');
            }
        }
        self.text("\n");
        self.commit_marks.push(mark);
        self.branches.insert(branch.to_string(), (mark, files));
    }
}

fn remove_under(files: &mut BTreeMap<String, Mode>, target: &str) {
    let prefix = format!("{target}/");
    files.retain(|p, _| p != target && !p.starts_with(&prefix));
}

/// Drops entries that a new file at `path` replaces: the path itself, any
/// tree under it and any file standing where one of its parents goes.
fn remove_conflicts(files: &mut BTreeMap<String, Mode>, path: &str) {
    remove_under(files, path);
    let mut dir = path;
    while let Some((parent, _)) = dir.rsplit_once('/') {
        files.remove(parent);
        dir = parent;
    }
}

/// A random fast-import stream with branches, merges, tags and renames.
pub fn random_stream(rng: &mut StdRng) -> Vec<u8> {
    let mut g = Gen {
        rng,
        out: Vec::new(),
        next_mark: 0,
        blob_marks: Vec::new(),
        commit_marks: Vec::new(),
        branches: BTreeMap::new(),
        clock: 1_000_000_000,
    };
    g.clock += g.rng.gen_range(0..100_000_000);
    g.text("feature done\n");
    let names = ["main", "dev", "feature/x", "fix-1"];
    let commits = g.rng.gen_range(1..12);
    for _ in 0..commits {
        if g.rng.gen_bool(0.2) {
            g.blob();
        }
        let branch = if g.branches.is_empty() {
            "main"
        } else {
            names.choose(g.rng).unwrap()
        };
        g.commit(branch);
    }
    let tags = g.rng.gen_range(0..3);
    for i in 0..tags {
        let target = *g.commit_marks.choose(g.rng).unwrap();
        if g.rng.gen_bool(0.3) {
            g.text(&format!("reset refs/tags/light{i}\nfrom :{target}\n\n"));
            continue;
        }
        g.text(&format!("tag v{i}.0\nfrom :{target}\n"));
        if g.rng.gen_bool(0.9) {
            g.ident("tagger");
        }
        let msg = g.message();
        g.data(&msg);
    }
    if g.rng.gen_bool(0.2) {
        // A branch reset onto an existing commit.
        let target = *g.commit_marks.choose(g.rng).unwrap();
        g.text(&format!("reset refs/heads/alias\nfrom :{target}\n\n"));
    }
    g.text("done\n");
    g.out
}
