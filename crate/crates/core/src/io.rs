//! Document loading and canonical saving.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::model::{validate_catalog, validate_query, Catalog, Query, Violation, SPEC_VERSION};

pub const VERSION_KEY: &str = "kepler-spec";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    pub code: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": [{}]", self.code)?;
        if !self.path.is_empty() {
            write!(f, " {}", self.path)?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    /// Syntax, shape or version problems; nothing was loaded.
    #[error("{}", render(.0))]
    Parse(Vec<Diagnostic>),
    /// Documents parsed but failed validation or reference resolution.
    #[error("{}", render(.0))]
    Invalid(Vec<Diagnostic>),
}

impl LoadError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            LoadError::Read { path, source } => vec![Diagnostic {
                file: path.clone(),
                line: None,
                column: None,
                code: "read".into(),
                path: String::new(),
                message: source.to_string(),
            }],
            LoadError::Parse(d) | LoadError::Invalid(d) => d.clone(),
        }
    }
}

fn render(ds: &[Diagnostic]) -> String {
    ds.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// A named source text, usually a file.
#[derive(Clone, Debug)]
pub struct Source {
    pub name: String,
    pub text: String,
}

impl Source {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Source {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Read {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(Source {
            name: path.display().to_string(),
            text,
        })
    }

    fn diag(
        &self,
        code: &str,
        path: &str,
        message: impl Into<String>,
        at: Option<(usize, usize)>,
    ) -> Diagnostic {
        Diagnostic {
            file: self.name.clone(),
            line: at.map(|p| p.0),
            column: at.map(|p| p.1),
            code: code.into(),
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses one document: syntax, version gate, then typed decoding.
pub fn parse<T: DeserializeOwned>(src: &Source) -> Result<T, Vec<Diagnostic>> {
    let raw: Json = serde_json::from_str(&src.text)
        .map_err(|e| vec![src.diag("syntax", "", e.to_string(), Some((e.line(), e.column())))])?;
    let Json::Object(top) = &raw else {
        return Err(vec![src.diag(
            "shape",
            "",
            "document must be a JSON object",
            Some((1, 1)),
        )]);
    };
    if let Some(v) = top.get(VERSION_KEY) {
        let major = v.as_u64().ok_or_else(|| {
            vec![src.diag(
                "version",
                VERSION_KEY,
                "version must be a non-negative integer",
                locate(&src.text, VERSION_KEY),
            )]
        })?;
        if major > SPEC_VERSION as u64 {
            return Err(vec![src.diag(
                "version",
                VERSION_KEY,
                format!("document version {major} is newer than supported version {SPEC_VERSION}"),
                locate(&src.text, VERSION_KEY),
            )]);
        }
    }
    serde_json::from_str(&src.text).map_err(|e| {
        let at = if e.line() > 0 {
            Some((e.line(), e.column()))
        } else {
            None
        };
        vec![src.diag("shape", "", strip_position(&e.to_string()), at)]
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

const CATALOG_ARRAYS: [&str; 5] = ["schemas", "hardware", "objectives", "roles", "systems"];

/// Duplicate ids within a catalog document, reported with both positions.
fn duplicate_ids(src: &Source) -> Vec<Diagnostic> {
    let Some(tree) = Spanned::parse(&src.text) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for kind in CATALOG_ARRAYS {
        let Some(arr) = tree.get(kind) else { continue };
        let SpanKind::Array(items) = &arr.kind else {
            continue;
        };
        let mut seen: BTreeMap<&str, (usize, (usize, usize))> = BTreeMap::new();
        for (i, item) in items.iter().enumerate() {
            let Some(id) = item.get("id").and_then(Spanned::as_str) else {
                continue;
            };
            match seen.get(id) {
                Some(&(j, first)) => out.push(src.diag(
                    "duplicate_id",
                    &format!("{kind}[{i}]"),
                    format!(
                        "{} id \"{id}\" defined twice: {kind}[{j}] at {}:{} and {kind}[{i}] at {}:{}",
                        singular(kind),
                        first.0,
                        first.1,
                        item.pos.0,
                        item.pos.1
                    ),
                    Some(item.pos),
                )),
                None => {
                    seen.insert(id, (i, item.pos));
                }
            }
        }
    }
    out
}

fn singular(kind: &str) -> &str {
    match kind {
        "schemas" => "schema",
        "hardware" => "hardware",
        "objectives" => "objective",
        "roles" => "role",
        _ => "system",
    }
}

fn annotate(sources: &[Source], v: &Violation) -> Diagnostic {
    for s in sources {
        if let Some(at) = locate(&s.text, &v.path) {
            return s.diag(&v.code, &v.path, &v.message, Some(at));
        }
    }
    let name = sources
        .first()
        .map(|s| s.name.as_str())
        .unwrap_or("<input>");
    Diagnostic {
        file: name.into(),
        line: None,
        column: None,
        code: v.code.clone(),
        path: v.path.clone(),
        message: v.message.clone(),
    }
}

/// Parses and validates one or more catalog documents, merged in order.
pub fn load_catalog_sources(sources: &[Source]) -> Result<Catalog, LoadError> {
    let mut parts = Vec::new();
    let mut errors = Vec::new();
    for s in sources {
        match parse::<Catalog>(s) {
            Ok(c) => parts.push(c),
            Err(d) => errors.extend(d),
        }
    }
    if !errors.is_empty() {
        return Err(LoadError::Parse(errors));
    }
    let catalog = Catalog::merge(parts);
    let mut diags: Vec<Diagnostic> = sources.iter().flat_map(duplicate_ids).collect();
    // Per-file positions are more useful; keep merged-index duplicates only
    // when several documents were combined.
    let skip_dupes = !diags.is_empty() && sources.len() == 1;
    for v in validate_catalog(&catalog).violations {
        if skip_dupes && v.code == "duplicate_id" {
            continue;
        }
        diags.push(annotate(sources, &v));
    }
    if diags.is_empty() {
        Ok(catalog)
    } else {
        Err(LoadError::Invalid(diags))
    }
}

pub fn load_query_source(catalog: &Catalog, src: &Source) -> Result<Query, LoadError> {
    let query: Query = parse(src).map_err(LoadError::Parse)?;
    let report = validate_query(catalog, &query);
    if report.is_ok() {
        Ok(query)
    } else {
        let srcs = std::slice::from_ref(src);
        Err(LoadError::Invalid(
            report
                .violations
                .iter()
                .map(|v| annotate(srcs, v))
                .collect(),
        ))
    }
}

pub fn load_catalog(paths: &[PathBuf]) -> Result<Catalog, LoadError> {
    let sources = paths
        .iter()
        .map(|p| Source::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    load_catalog_sources(&sources)
}

/// Loads catalogs and a query, resolving the query against the catalogs.
pub fn load(catalogs: &[PathBuf], query: &Path) -> Result<(Catalog, Query), LoadError> {
    let catalog = load_catalog(catalogs)?;
    let q = load_query_source(&catalog, &Source::read(query)?)?;
    Ok((catalog, q))
}

/// Canonical text: keys sorted, arrays in order, integral numbers written
/// without a fraction, other numbers in shortest round-trip form.
pub fn to_canonical<T: Serialize>(x: &T) -> String {
    let v = serde_json::to_value(x).expect("model types serialize to JSON");
    let mut s = serde_json::to_string_pretty(&canonical_value(v)).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn canonical_value(v: Json) -> Json {
    match v {
        Json::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() && f.fract() == 0.0 && f.abs() < 9.0e15 => {
                if f < 0.0 {
                    Json::from(f as i64)
                } else {
                    Json::from(f as u64)
                }
            }
            _ => Json::Number(n),
        },
        Json::Array(xs) => Json::Array(xs.into_iter().map(canonical_value).collect()),
        // serde_json's map is ordered by key.
        Json::Object(m) => Json::Object(
            m.into_iter()
                .map(|(k, v)| (k, canonical_value(v)))
                .collect(),
        ),
        other => other,
    }
}

pub fn save<T: Serialize>(x: &T, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_canonical(x))
}

// --- position lookup --------------------------------------------------------

#[derive(Debug)]
enum SpanKind {
    Object(Vec<(String, Spanned)>),
    Array(Vec<Spanned>),
    Str(String),
    Other,
}

/// A JSON value with the 1-based line/column where it starts.
#[derive(Debug)]
struct Spanned {
    pos: (usize, usize),
    kind: SpanKind,
}

impl Spanned {
    fn parse(text: &str) -> Option<Spanned> {
        let mut p = Scanner {
            chars: text.chars().collect(),
            i: 0,
            line: 1,
            col: 1,
        };
        p.value()
    }

    fn get(&self, key: &str) -> Option<&Spanned> {
        match &self.kind {
            SpanKind::Object(kv) => kv.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    fn as_str(&self) -> Option<&str> {
        match &self.kind {
            SpanKind::Str(s) => Some(s),
            _ => None,
        }
    }

    /// First object below (or at) this node whose "id" is `id`.
    fn find_id(&self, id: &str) -> Option<&Spanned> {
        if self.get("id").and_then(Spanned::as_str) == Some(id) {
            return Some(self);
        }
        match &self.kind {
            SpanKind::Object(kv) => kv.iter().find_map(|(_, v)| v.find_id(id)),
            SpanKind::Array(xs) => xs.iter().find_map(|v| v.find_id(id)),
            _ => None,
        }
    }
}

struct Scanner {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Scanner {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn string(&mut self) -> Option<String> {
        self.bump(); // opening quote
        let mut out = String::new();
        loop {
            match self.bump()? {
                '"' => return Some(out),
                '\\' => {
                    let e = self.bump()?;
                    match e {
                        'u' => {
                            let hex: String = (0..4).filter_map(|_| self.bump()).collect();
                            out.extend(u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32));
                        }
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        other => out.push(other),
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn value(&mut self) -> Option<Spanned> {
        self.ws();
        let pos = (self.line, self.col);
        let kind = match self.peek()? {
            '{' => {
                self.bump();
                let mut kv = Vec::new();
                loop {
                    self.ws();
                    match self.peek()? {
                        '}' => {
                            self.bump();
                            break;
                        }
                        ',' => {
                            self.bump();
                        }
                        '"' => {
                            let k = self.string()?;
                            self.ws();
                            self.bump(); // ':'
                            let v = self.value()?;
                            kv.push((k, v));
                        }
                        _ => return None,
                    }
                }
                SpanKind::Object(kv)
            }
            '[' => {
                self.bump();
                let mut xs = Vec::new();
                loop {
                    self.ws();
                    match self.peek()? {
                        ']' => {
                            self.bump();
                            break;
                        }
                        ',' => {
                            self.bump();
                        }
                        _ => xs.push(self.value()?),
                    }
                }
                SpanKind::Array(xs)
            }
            '"' => SpanKind::Str(self.string()?),
            _ => {
                while matches!(self.peek(), Some(c) if !(c == ',' || c == '}' || c == ']' || c.is_whitespace()))
                {
                    self.bump();
                }
                SpanKind::Other
            }
        };
        Some(Spanned { pos, kind })
    }
}

/// Position of the node named by a violation path such as
/// `systems.PacketSpray`, `optimize[2]` or `topology.devices.r0-c1`.
/// Segments that do not resolve are skipped; `None` when none resolve.
pub fn locate(text: &str, path: &str) -> Option<(usize, usize)> {
    let tree = Spanned::parse(text)?;
    let mut node = &tree;
    let mut matched = false;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        let (name, index) = match seg.find('[') {
            Some(b) if seg.ends_with(']') => {
                (&seg[..b], seg[b + 1..seg.len() - 1].parse::<usize>().ok())
            }
            _ => (seg, None),
        };
        let next = match (&node.kind, index) {
            (SpanKind::Object(_), Some(i)) => node.get(name).and_then(|a| match &a.kind {
                SpanKind::Array(xs) => xs.get(i),
                _ => None,
            }),
            (SpanKind::Object(_), None) => node.get(name).or_else(|| node.find_id(name)),
            (SpanKind::Array(xs), _) => xs.iter().find_map(|x| x.find_id(name)),
            _ => None,
        };
        match next {
            Some(n) => {
                node = n;
                matched = true;
            }
            // Path segments like `devices` name a view, not a key; skip them.
            None => continue,
        }
    }
    matched.then_some(node.pos)
}
