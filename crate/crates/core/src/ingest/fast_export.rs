//! Parser for the `git fast-export` stream format.

use std::collections::HashSet;
use std::io::BufRead;

use crate::model::{parse_signature, EntryKind, ObjectId, Person, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("undefined mark :{0}")]
    UndefinedMark(u64),
    #[error("unsupported command {0:?}")]
    UnsupportedCommand(String),
    #[error("unsupported file mode {0:?}")]
    UnsupportedMode(String),
    #[error("{0}")]
    Syntax(String),
    #[error("unexpected end of stream: {0}")]
    UnexpectedEof(String),
    #[error("read error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

/// A commit-ish reference: a mark, a raw object id or a ref name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommitRef {
    Mark(u64),
    Id(ObjectId),
    Ref(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataRef {
    Mark(u64),
    Id(ObjectId),
    Inline(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileChange {
    Modify {
        kind: EntryKind,
        data: DataRef,
        path: Vec<u8>,
    },
    Delete {
        path: Vec<u8>,
    },
    Rename {
        from: Vec<u8>,
        to: Vec<u8>,
    },
    Copy {
        from: Vec<u8>,
        to: Vec<u8>,
    },
    DeleteAll,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub person: Person,
    pub date: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitCommand {
    pub reference: Vec<u8>,
    pub mark: Option<u64>,
    pub author: Option<Signature>,
    pub committer: Signature,
    pub encoding: Option<Vec<u8>>,
    pub message: Vec<u8>,
    pub from: Option<CommitRef>,
    pub merges: Vec<CommitRef>,
    pub changes: Vec<FileChange>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagCommand {
    pub name: Vec<u8>,
    pub mark: Option<u64>,
    pub from: CommitRef,
    pub tagger: Option<Signature>,
    pub message: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Blob {
        mark: Option<u64>,
        data: Vec<u8>,
    },
    Commit(CommitCommand),
    Tag(TagCommand),
    Reset {
        reference: Vec<u8>,
        from: Option<CommitRef>,
    },
    Feature(String),
    Option(String),
    Progress(String),
    Checkpoint,
    Done,
}

/// A fully parsed stream. Commands keep the stream's order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FastExportStream {
    pub commands: Vec<Command>,
}

impl FastExportStream {
    pub fn blobs(&self) -> usize {
        self.commands
            .iter()
            .filter(|c| matches!(c, Command::Blob { .. }))
            .count()
    }

    pub fn commits(&self) -> usize {
        self.commands.iter().filter(|c| matches!(c, Command::Commit(_))).count()
    }
}

pub fn parse_fast_export<R: BufRead>(input: R) -> Result<FastExportStream, ParseError> {
    let commands = FastExportParser::new(input).collect::<Result<_, _>>()?;
    Ok(FastExportStream { commands })
}

/// Streaming parser yielding one command at a time.
pub struct FastExportParser<R> {
    reader: R,
    /// Number of the last line read.
    line: usize,
    pushback: Option<Vec<u8>>,
    marks: HashSet<u64>,
    finished: bool,
}

impl<R: BufRead> FastExportParser<R> {
    pub fn new(reader: R) -> Self {
        FastExportParser {
            reader,
            line: 0,
            pushback: None,
            marks: HashSet::new(),
            finished: false,
        }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            // A peeked line is the one being complained about.
            line: (self.line + usize::from(self.pushback.is_some())).max(1),
            kind,
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax(message.into()))
    }

    fn next_line(&mut self) -> Result<Option<Vec<u8>>, ParseError> {
        if let Some(line) = self.pushback.take() {
            self.line += 1;
            return Ok(Some(line));
        }
        let mut buf = Vec::new();
        let n = self
            .reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| self.error(ParseErrorKind::Io(e.to_string())))?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        Ok(Some(buf))
    }

    fn push_back(&mut self, line: Vec<u8>) {
        self.line -= 1;
        self.pushback = Some(line);
    }

    fn require_line(&mut self, what: &str) -> Result<Vec<u8>, ParseError> {
        self.next_line()?
            .ok_or_else(|| self.error(ParseErrorKind::UnexpectedEof(format!("expected {what}"))))
    }

    /// Reads the next line if it starts with `prefix`, returning the rest.
    fn optional(&mut self, prefix: &[u8]) -> Result<Option<Vec<u8>>, ParseError> {
        match self.next_line()? {
            Some(line) if line.starts_with(prefix) => Ok(Some(line[prefix.len()..].to_vec())),
            Some(line) => {
                self.push_back(line);
                Ok(None)
            }
            None => Ok(None),
        }
    }

    fn skip_original_oid(&mut self) -> Result<(), ParseError> {
        self.optional(b"original-oid ")?;
        Ok(())
    }

    fn mark_definition(&mut self) -> Result<Option<u64>, ParseError> {
        let Some(rest) = self.optional(b"mark :")? else {
            return Ok(None);
        };
        let mark = parse_number(&rest).ok_or_else(|| self.syntax("bad mark number"))?;
        self.marks.insert(mark);
        Ok(Some(mark))
    }

    fn check_mark(&self, mark: u64) -> Result<u64, ParseError> {
        if self.marks.contains(&mark) {
            Ok(mark)
        } else {
            Err(self.error(ParseErrorKind::UndefinedMark(mark)))
        }
    }

    fn commit_ref(&self, text: &[u8]) -> Result<CommitRef, ParseError> {
        if let Some(rest) = text.strip_prefix(b":") {
            let mark = parse_number(rest).ok_or_else(|| self.syntax("bad mark reference"))?;
            return Ok(CommitRef::Mark(self.check_mark(mark)?));
        }
        if let Some(id) = parse_hex(text) {
            return Ok(CommitRef::Id(id));
        }
        if text.is_empty() {
            return Err(self.syntax("empty commit reference"));
        }
        Ok(CommitRef::Ref(text.to_vec()))
    }

    /// Reads a `data` command body (counted or `<<DELIM` form).
    fn data(&mut self) -> Result<Vec<u8>, ParseError> {
        let line = self.require_line("data command")?;
        let arg = line
            .strip_prefix(b"data ")
            .ok_or_else(|| self.syntax("expected data command"))?;
        if let Some(delim) = arg.strip_prefix(b"<<") {
            let mut out = Vec::new();
            loop {
                let line = self.require_line("data terminator")?;
                if line == delim {
                    break;
                }
                out.extend_from_slice(&line);
                out.push(b'\n');
            }
            return Ok(out);
        }
        let len = parse_number(arg).ok_or_else(|| self.syntax("bad data length"))? as usize;
        let mut out = vec![0u8; len];
        self.reader.read_exact(&mut out).map_err(|_| {
            self.error(ParseErrorKind::UnexpectedEof(format!(
                "data block of {len} bytes is truncated"
            )))
        })?;
        self.line += out.iter().filter(|&&b| b == b'\n').count();
        // A single LF after the payload is optional.
        let next = match self.reader.fill_buf() {
            Ok(buf) => buf.first().copied(),
            Err(e) => return Err(self.error(ParseErrorKind::Io(e.to_string()))),
        };
        if next == Some(b'\n') {
            self.reader.consume(1);
            self.line += 1;
        }
        Ok(out)
    }

    fn signature(&self, value: &[u8]) -> Result<Signature, ParseError> {
        let (person, date) = parse_signature(value).ok_or_else(|| self.syntax("malformed identity line"))?;
        Ok(Signature { person, date })
    }

    fn commit(&mut self, reference: Vec<u8>) -> Result<Command, ParseError> {
        let mark = self.mark_definition()?;
        self.skip_original_oid()?;
        let author = match self.optional(b"author ")? {
            Some(value) => Some(self.signature(&value)?),
            None => None,
        };
        let committer = match self.optional(b"committer ")? {
            Some(value) => self.signature(&value)?,
            None => return Err(self.syntax("commit without committer")),
        };
        let encoding = self.optional(b"encoding ")?;
        let message = self.data()?;
        let from = match self.optional(b"from ")? {
            Some(value) => Some(self.commit_ref(&value)?),
            None => None,
        };
        let mut merges = Vec::new();
        while let Some(value) = self.optional(b"merge ")? {
            merges.push(self.commit_ref(&value)?);
        }
        let mut changes = Vec::new();
        while let Some(line) = self.next_line()? {
            match self.file_change(&line)? {
                Some(change) => changes.push(change),
                None => {
                    if !line.is_empty() {
                        self.push_back(line);
                    }
                    break;
                }
            }
        }
        Ok(Command::Commit(CommitCommand {
            reference,
            mark,
            author,
            committer,
            encoding,
            message,
            from,
            merges,
            changes,
        }))
    }

    fn file_change(&mut self, line: &[u8]) -> Result<Option<FileChange>, ParseError> {
        if line == b"deleteall" {
            return Ok(Some(FileChange::DeleteAll));
        }
        if let Some(rest) = line.strip_prefix(b"M ") {
            let (mode, rest) = split_word(rest).ok_or_else(|| self.syntax("bad M line"))?;
            let (dataref, path) = split_word(rest).ok_or_else(|| self.syntax("bad M line"))?;
            let kind = parse_mode(mode).ok_or_else(|| {
                self.error(ParseErrorKind::UnsupportedMode(
                    String::from_utf8_lossy(mode).into_owned(),
                ))
            })?;
            let path = self.path(path)?;
            let data = if dataref == b"inline" {
                DataRef::Inline(self.data()?)
            } else if let Some(rest) = dataref.strip_prefix(b":") {
                let mark = parse_number(rest).ok_or_else(|| self.syntax("bad mark reference"))?;
                DataRef::Mark(self.check_mark(mark)?)
            } else {
                DataRef::Id(parse_hex(dataref).ok_or_else(|| self.syntax("bad data reference"))?)
            };
            if kind == EntryKind::Revision && !matches!(data, DataRef::Id(_)) {
                return Err(self.syntax("submodule entries must reference a commit id"));
            }
            return Ok(Some(FileChange::Modify { kind, data, path }));
        }
        if let Some(rest) = line.strip_prefix(b"D ") {
            return Ok(Some(FileChange::Delete { path: self.path(rest)? }));
        }
        for (prefix, rename) in [(&b"R "[..], true), (&b"C "[..], false)] {
            if let Some(rest) = line.strip_prefix(prefix) {
                let (from, to) = self.path_pair(rest)?;
                return Ok(Some(if rename {
                    FileChange::Rename { from, to }
                } else {
                    FileChange::Copy { from, to }
                }));
            }
        }
        if line.starts_with(b"N ") {
            return Err(self.error(ParseErrorKind::UnsupportedCommand("N".into())));
        }
        Ok(None)
    }

    fn path(&self, raw: &[u8]) -> Result<Vec<u8>, ParseError> {
        let path = if raw.first() == Some(&b'"') {
            let (path, rest) = unquote(raw).ok_or_else(|| self.syntax("bad quoted path"))?;
            if !rest.is_empty() {
                return Err(self.syntax("trailing bytes after quoted path"));
            }
            path
        } else {
            raw.to_vec()
        };
        if path.is_empty() {
            return Err(self.syntax("empty path"));
        }
        Ok(path)
    }

    fn path_pair(&self, raw: &[u8]) -> Result<(Vec<u8>, Vec<u8>), ParseError> {
        let (from, rest) = if raw.first() == Some(&b'"') {
            let (path, rest) = unquote(raw).ok_or_else(|| self.syntax("bad quoted path"))?;
            let rest = rest
                .strip_prefix(b" ")
                .ok_or_else(|| self.syntax("missing destination path"))?;
            (path, rest)
        } else {
            let (from, rest) = split_word(raw).ok_or_else(|| self.syntax("missing destination path"))?;
            (from.to_vec(), rest)
        };
        Ok((from, self.path(rest)?))
    }

    fn tag(&mut self, name: Vec<u8>) -> Result<Command, ParseError> {
        let mark = self.mark_definition()?;
        let from = match self.optional(b"from ")? {
            Some(value) => self.commit_ref(&value)?,
            None => return Err(self.syntax("tag without from")),
        };
        self.skip_original_oid()?;
        let tagger = match self.optional(b"tagger ")? {
            Some(value) => Some(self.signature(&value)?),
            None => None,
        };
        let message = self.data()?;
        Ok(Command::Tag(TagCommand {
            name,
            mark,
            from,
            tagger,
            message,
        }))
    }

    fn reset(&mut self, reference: Vec<u8>) -> Result<Command, ParseError> {
        let from = match self.optional(b"from ")? {
            Some(value) => Some(self.commit_ref(&value)?),
            None => None,
        };
        Ok(Command::Reset { reference, from })
    }

    fn command(&mut self) -> Result<Option<Command>, ParseError> {
        let line = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some(line) if line.is_empty() || line.starts_with(b"#") => continue,
                Some(line) => break line,
            }
        };
        let text = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
        let command = if line == b"blob" {
            let mark = self.mark_definition()?;
            self.skip_original_oid()?;
            Command::Blob {
                mark,
                data: self.data()?,
            }
        } else if let Some(reference) = line.strip_prefix(b"commit ") {
            self.commit(reference.to_vec())?
        } else if let Some(name) = line.strip_prefix(b"tag ") {
            self.tag(name.to_vec())?
        } else if let Some(reference) = line.strip_prefix(b"reset ") {
            self.reset(reference.to_vec())?
        } else if let Some(rest) = line.strip_prefix(b"feature ") {
            Command::Feature(text(rest))
        } else if let Some(rest) = line.strip_prefix(b"option ") {
            Command::Option(text(rest))
        } else if let Some(rest) = line.strip_prefix(b"progress ") {
            Command::Progress(text(rest))
        } else if line == b"checkpoint" {
            Command::Checkpoint
        } else if line == b"done" {
            self.finished = true;
            Command::Done
        } else {
            let word = line.split(|&b| b == b' ').next().unwrap_or_default();
            return Err(self.error(ParseErrorKind::UnsupportedCommand(text(word))));
        };
        Ok(Some(command))
    }
}

impl<R: BufRead> Iterator for FastExportParser<R> {
    type Item = Result<Command, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.command() {
            Ok(Some(command)) => Some(Ok(command)),
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}

fn parse_number(text: &[u8]) -> Option<u64> {
    if text.is_empty() || !text.iter().all(u8::is_ascii_digit) {
        return None;
    }
    std::str::from_utf8(text).ok()?.parse().ok()
}

fn parse_hex(text: &[u8]) -> Option<ObjectId> {
    ObjectId::from_hex(std::str::from_utf8(text).ok()?).ok()
}

fn split_word(text: &[u8]) -> Option<(&[u8], &[u8])> {
    let space = text.iter().position(|&b| b == b' ')?;
    Some((&text[..space], &text[space + 1..]))
}

fn parse_mode(mode: &[u8]) -> Option<EntryKind> {
    Some(match mode {
        b"100644" | b"644" => EntryKind::File,
        b"100755" | b"755" => EntryKind::Executable,
        b"120000" => EntryKind::Symlink,
        b"160000" => EntryKind::Revision,
        _ => return None,
    })
}

/// Decodes a C-style quoted string starting at `raw[0] == '"'`. Returns
/// the bytes and the remainder after the closing quote.
fn unquote(raw: &[u8]) -> Option<(Vec<u8>, &[u8])> {
    let mut out = Vec::new();
    let mut i = 1;
    while i < raw.len() {
        match raw[i] {
            b'"' => return Some((out, &raw[i + 1..])),
            b'\\' => {
                let c = *raw.get(i + 1)?;
                i += 2;
                match c {
                    b'a' => out.push(0x07),
                    b'b' => out.push(0x08),
                    b'f' => out.push(0x0c),
                    b'n' => out.push(b'\n'),
                    b'r' => out.push(b'\r'),
                    b't' => out.push(b'\t'),
                    b'v' => out.push(0x0b),
                    b'\\' | b'"' => out.push(c),
                    b'0'..=b'3' => {
                        let digits = raw.get(i..i + 2)?;
                        if !digits.iter().all(|d| (b'0'..=b'7').contains(d)) {
                            return None;
                        }
                        out.push((c - b'0') * 64 + (digits[0] - b'0') * 8 + (digits[1] - b'0'));
                        i += 2;
                    }
                    _ => return None,
                }
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    None
}
