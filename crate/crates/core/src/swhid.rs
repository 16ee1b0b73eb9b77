//! Persistent identifiers: `swh:1:<type>:<hex>` plus optional qualifiers.

use std::fmt;
use std::str::FromStr;

use crate::model::{intrinsic_id, ModelError, Node, ObjectId, ObjectType};

pub const SCHEME: &str = "swh";
pub const SCHEME_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SwhidError {
    #[error("bad scheme in {0:?}: expected \"swh\"")]
    BadScheme(String),
    #[error("unsupported scheme version {0:?}")]
    UnsupportedVersion(String),
    #[error("unknown object type {0:?}")]
    UnknownType(String),
    #[error("invalid object id {0:?}")]
    InvalidId(String),
    #[error("malformed core identifier {0:?}")]
    MalformedCore(String),
    #[error("malformed qualifier {0:?}")]
    MalformedQualifier(String),
    #[error("unknown qualifier {0:?}")]
    UnknownQualifier(String),
    #[error("duplicate qualifier {0:?}")]
    DuplicateQualifier(String),
    #[error("invalid value for qualifier {key:?}: {reason}")]
    InvalidQualifierValue { key: &'static str, reason: String },
}

/// Object type plus intrinsic id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwhidCore {
    pub object_type: ObjectType,
    pub id: ObjectId,
}

impl SwhidCore {
    pub fn new(object_type: ObjectType, id: ObjectId) -> Self {
        SwhidCore { object_type, id }
    }
}

impl fmt::Display for SwhidCore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{SCHEME}:{SCHEME_VERSION}:{}:{}", self.object_type.tag(), self.id)
    }
}

impl FromStr for SwhidCore {
    type Err = SwhidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(4, ':');
        let (Some(scheme), Some(version), Some(tag), Some(hex)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(if s.starts_with("swh:") || s == "swh" {
                SwhidError::MalformedCore(s.to_string())
            } else {
                SwhidError::BadScheme(s.to_string())
            });
        };
        if scheme != SCHEME {
            return Err(SwhidError::BadScheme(scheme.to_string()));
        }
        if version != "1" {
            return Err(SwhidError::UnsupportedVersion(version.to_string()));
        }
        let object_type = ObjectType::from_tag(tag).ok_or_else(|| SwhidError::UnknownType(tag.to_string()))?;
        let id = ObjectId::from_hex(hex).map_err(|_| SwhidError::InvalidId(hex.to_string()))?;
        Ok(SwhidCore { object_type, id })
    }
}

/// Inclusive line range; `end == None` designates a single line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LineRange {
    pub start: u64,
    pub end: Option<u64>,
}

impl fmt::Display for LineRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            Some(end) => write!(f, "{}-{}", self.start, end),
            None => write!(f, "{}", self.start),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct Qualifiers {
    pub origin: Option<String>,
    pub visit: Option<SwhidCore>,
    pub anchor: Option<SwhidCore>,
    pub path: Option<Vec<u8>>,
    pub lines: Option<LineRange>,
}

impl Qualifiers {
    pub fn is_empty(&self) -> bool {
        self == &Qualifiers::default()
    }

    pub fn validate(&self) -> Result<(), SwhidError> {
        if let Some(visit) = &self.visit {
            if visit.object_type != ObjectType::Snapshot {
                return Err(SwhidError::InvalidQualifierValue {
                    key: "visit",
                    reason: format!("{visit} is not a snapshot"),
                });
            }
        }
        if let Some(path) = &self.path {
            if path.first() != Some(&b'/') {
                return Err(SwhidError::InvalidQualifierValue {
                    key: "path",
                    reason: "path must be absolute".into(),
                });
            }
        }
        if let Some(lines) = &self.lines {
            if lines.start == 0 || lines.end.is_some_and(|e| e < lines.start) {
                return Err(SwhidError::InvalidQualifierValue {
                    key: "lines",
                    reason: format!("invalid range {lines}"),
                });
            }
        }
        if let Some(origin) = &self.origin {
            if url::Url::parse(origin).is_err() {
                return Err(SwhidError::InvalidQualifierValue {
                    key: "origin",
                    reason: format!("{origin:?} is not a URI"),
                });
            }
        }
        Ok(())
    }
}

/// A core identifier with its (possibly empty) qualifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Swhid {
    pub core: SwhidCore,
    pub qualifiers: Qualifiers,
}

impl Swhid {
    pub fn new(core: SwhidCore) -> Self {
        Swhid {
            core,
            qualifiers: Qualifiers::default(),
        }
    }
}

impl From<SwhidCore> for Swhid {
    fn from(core: SwhidCore) -> Self {
        Swhid::new(core)
    }
}

impl fmt::Display for Swhid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_swhid(self))
    }
}

impl FromStr for Swhid {
    type Err = SwhidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_swhid(s)
    }
}

pub fn parse_swhid(text: &str) -> Result<Swhid, SwhidError> {
    let mut pieces = text.split(';');
    let core: SwhidCore = pieces.next().unwrap_or_default().parse()?;
    let mut qualifiers = Qualifiers::default();
    let mut seen: Vec<&str> = Vec::new();
    for piece in pieces {
        let (key, raw) = piece
            .split_once('=')
            .ok_or_else(|| SwhidError::MalformedQualifier(piece.to_string()))?;
        if seen.contains(&key) {
            return Err(SwhidError::DuplicateQualifier(key.to_string()));
        }
        seen.push(key);
        let value = percent_decode(raw).ok_or_else(|| SwhidError::MalformedQualifier(piece.to_string()))?;
        let as_text = |key: &'static str, value: Vec<u8>| {
            String::from_utf8(value).map_err(|_| SwhidError::InvalidQualifierValue {
                key,
                reason: "not UTF-8".into(),
            })
        };
        match key {
            "origin" => qualifiers.origin = Some(as_text("origin", value)?),
            "visit" => qualifiers.visit = Some(as_text("visit", value)?.parse()?),
            "anchor" => qualifiers.anchor = Some(as_text("anchor", value)?.parse()?),
            "path" => qualifiers.path = Some(value),
            "lines" => qualifiers.lines = Some(parse_lines(&as_text("lines", value)?)?),
            other => return Err(SwhidError::UnknownQualifier(other.to_string())),
        }
    }
    qualifiers.validate()?;
    Ok(Swhid { core, qualifiers })
}

fn parse_lines(text: &str) -> Result<LineRange, SwhidError> {
    let bad = || SwhidError::InvalidQualifierValue {
        key: "lines",
        reason: format!("{text:?} is not N or N-M"),
    };
    let number = |s: &str| -> Result<u64, SwhidError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse().map_err(|_| bad())
    };
    match text.split_once('-') {
        Some((start, end)) => Ok(LineRange {
            start: number(start)?,
            end: Some(number(end)?),
        }),
        None => Ok(LineRange {
            start: number(text)?,
            end: None,
        }),
    }
}

/// Canonical text form; qualifiers in the order origin, visit, anchor, path,
/// lines.
pub fn print_swhid(swhid: &Swhid) -> String {
    let mut out = swhid.core.to_string();
    let q = &swhid.qualifiers;
    let mut push = |key: &str, value: &[u8]| {
        out.push(';');
        out.push_str(key);
        out.push('=');
        percent_encode_into(value, &mut out);
    };
    if let Some(origin) = &q.origin {
        push("origin", origin.as_bytes());
    }
    if let Some(visit) = &q.visit {
        push("visit", visit.to_string().as_bytes());
    }
    if let Some(anchor) = &q.anchor {
        push("anchor", anchor.to_string().as_bytes());
    }
    if let Some(path) = &q.path {
        push("path", path);
    }
    if let Some(lines) = &q.lines {
        push("lines", lines.to_string().as_bytes());
    }
    out
}

/// Escapes `;`, `=`, `%` and control bytes. Invalid UTF-8 sequences are
/// escaped byte by byte so the output stays a valid string.
fn percent_encode_into(value: &[u8], out: &mut String) {
    let escape = |b: u8, out: &mut String| out.push_str(&format!("%{b:02X}"));
    for chunk in value.utf8_chunks() {
        for c in chunk.valid().chars() {
            match c {
                ';' | '=' | '%' => escape(c as u8, out),
                c if (c as u32) < 0x20 => escape(c as u8, out),
                c => out.push(c),
            }
        }
        for &b in chunk.invalid() {
            escape(b, out);
        }
    }
}

fn percent_decode(text: &str) -> Option<Vec<u8>> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = text.get(i + 1..i + 3)?;
            if !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
                return None;
            }
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Some(out)
}

pub fn swhid_for_node(node: &Node) -> Result<SwhidCore, ModelError> {
    Ok(SwhidCore {
        object_type: node.object_type(),
        id: intrinsic_id(node)?,
    })
}
