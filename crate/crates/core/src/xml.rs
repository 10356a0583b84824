//! Attribute-only XML dialect shared by every file and message this crate
//! reads or writes: elements carry attributes and child elements, never text.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

#[derive(Debug, Clone, PartialEq)]
pub struct XmlSyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl std::fmt::Display for XmlSyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub line: usize,
    pub col: usize,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, name: &str) -> Result<&str, String> {
        self.attr(name).ok_or_else(|| {
            format!("{}: <{}> is missing required attribute {name:?}", self.at(), self.name)
        })
    }

    /// Attributes not in `allowed`, as human-readable messages.
    pub fn unknown_attrs(&self, allowed: &[&str]) -> Vec<String> {
        self.attrs
            .iter()
            .filter(|(k, _)| !allowed.contains(&k.as_str()))
            .map(|(k, _)| format!("{}: unknown attribute {k:?} on <{}>", self.at(), self.name))
            .collect()
    }

    pub fn at(&self) -> String {
        format!("line {}, column {}", self.line, self.col)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }
}

/// Byte offsets of every line start, for offset → (line, column) lookups.
struct Lines<'a> {
    text: &'a str,
    starts: Vec<usize>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let starts = std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1)).collect();
        Lines { text, starts }
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let line = self.starts.partition_point(|s| *s <= offset);
        let start = self.starts[line - 1];
        (line, self.text.get(start..offset).map_or(offset - start, |s| s.chars().count()) + 1)
    }

    fn syntax(&self, offset: usize, message: impl Into<String>) -> XmlSyntaxError {
        let (line, col) = self.line_col(offset);
        XmlSyntaxError { line, col, message: message.into() }
    }
}

fn start_element(lines: &Lines, offset: usize, e: &BytesStart) -> Result<Element, XmlSyntaxError> {
    let name = std::str::from_utf8(e.name().as_ref())
        .map_err(|_| lines.syntax(offset, "element name is not UTF-8"))?
        .to_string();
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| lines.syntax(offset, err.to_string()))?;
        let key = std::str::from_utf8(a.key.as_ref())
            .map_err(|_| lines.syntax(offset, "attribute name is not UTF-8"))?
            .to_string();
        let value = a.unescape_value().map_err(|err| lines.syntax(offset, err.to_string()))?;
        attrs.push((key, value.into_owned()));
    }
    let (line, col) = lines.line_col(offset);
    Ok(Element { name, attrs, children: Vec::new(), line, col })
}

/// Parses a document with exactly one root element.
pub fn parse_document(text: &str) -> Result<Element, XmlSyntaxError> {
    let lines = Lines::new(text);
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| lines.syntax(reader.error_position() as usize, e.to_string()))?;
        match event {
            Event::Start(_) | Event::Empty(_) if root.is_some() => {
                return Err(lines.syntax(offset, "content after the root element"));
            }
            Event::Start(e) => stack.push(start_element(&lines, offset, &e)?),
            Event::Empty(e) => {
                let el = start_element(&lines, offset, &e)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let el = stack.pop().ok_or_else(|| lines.syntax(offset, "unexpected closing tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                if !t.iter().all(|b| b.is_ascii_whitespace()) {
                    return Err(lines.syntax(offset, "unexpected text content"));
                }
            }
            Event::CData(_) => return Err(lines.syntax(offset, "unexpected CDATA section")),
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => break,
        }
    }
    if let Some(open) = stack.last() {
        return Err(lines.syntax(text.len(), format!("unclosed element <{}>", open.name)));
    }
    root.ok_or_else(|| lines.syntax(text.len(), "document has no root element"))
}

pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Indenting writer: two spaces per level, LF line endings.
#[derive(Debug, Default)]
pub struct XmlWriter {
    out: String,
    depth: usize,
}

impl XmlWriter {
    pub fn new() -> Self {
        Self::default()
    }

    fn tag(&mut self, name: &str, attrs: &[(&str, String)], empty: bool) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            self.out.push(' ');
            self.out.push_str(k);
            self.out.push_str("=\"");
            self.out.push_str(&escape_attr(v));
            self.out.push('"');
        }
        self.out.push_str(if empty { "/>\n" } else { ">\n" });
    }

    pub fn open(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.tag(name, attrs, false);
        self.depth += 1;
    }

    pub fn empty(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.tag(name, attrs, true);
    }

    pub fn close(&mut self, name: &str) {
        self.depth -= 1;
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    pub fn finish(self) -> String {
        self.out
    }
}
