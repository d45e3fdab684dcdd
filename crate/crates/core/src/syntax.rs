//! Per-file syntactic index over Java sources.
//!
//! Extraction runs on a tree-sitter parse tree. Malformed files still yield
//! whatever the error-recovering parser could identify; `parse_errors` is set
//! when the tree contains error nodes.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser};

/// A zero-based (line, byte column) location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub col: usize,
}

impl Position {
    pub fn new(line: usize, col: usize) -> Self {
        Self { line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl Span {
    pub fn start(&self) -> Position {
        Position::new(self.start_line, self.start_col)
    }

    pub fn end(&self) -> Position {
        Position::new(self.end_line, self.end_col)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start() <= other.start() && other.end() <= self.end()
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    fn of(node: &Node) -> Self {
        let s = node.start_position();
        let e = node.end_position();
        Span { start_line: s.row, start_col: s.column, end_line: e.row, end_col: e.column }
    }
}

/// A source file with a precomputed line-start table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    pub line_table: Vec<usize>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut line_table = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' && i + 1 < text.len() {
                line_table.push(i + 1);
            }
        }
        Self { path: path.into(), text, line_table }
    }

    pub fn line_count(&self) -> usize {
        if self.text.is_empty() {
            0
        } else {
            self.line_table.len()
        }
    }

    /// Line `idx` without its terminator (`\n` or `\r\n`).
    pub fn line(&self, idx: usize) -> &str {
        let start = self.line_table[idx];
        let end = self.line_table.get(idx + 1).copied().unwrap_or(self.text.len());
        let raw = &self.text[start..end];
        let raw = raw.strip_suffix('\n').unwrap_or(raw);
        raw.strip_suffix('\r').unwrap_or(raw)
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> + '_ {
        (0..self.line_count()).map(move |i| self.line(i))
    }

    /// Byte offset of a position; columns past the line end clamp to it.
    pub fn offset(&self, pos: Position) -> usize {
        if pos.line >= self.line_count() {
            return self.text.len();
        }
        let start = self.line_table[pos.line];
        start + pos.col.min(self.line(pos.line).len())
    }

    pub fn slice(&self, span: &Span) -> &str {
        let a = self.offset(span.start());
        let b = self.offset(span.end()).max(a);
        &self.text[a..b]
    }

    /// File name without directory and `.java` extension.
    pub fn stem(&self) -> &str {
        let name = self.path.rsplit('/').next().unwrap_or(&self.path);
        name.strip_suffix(".java").unwrap_or(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Import {
    /// Dotted path as written, `.*` kept for on-demand imports.
    pub path: String,
    pub line: usize,
    pub is_static: bool,
}

impl Import {
    pub fn is_wildcard(&self) -> bool {
        self.path.ends_with(".*")
    }

    /// The name the import makes visible in the file body.
    pub fn simple_name(&self) -> Option<&str> {
        if self.is_wildcard() {
            None
        } else {
            self.path.rsplit('.').next()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub extends: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub signature: String,
    pub name: String,
    pub span: Span,
    pub body: Option<Span>,
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextElement {
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameOccurrence {
    pub name: String,
    pub pos: Position,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSyntaxIndex {
    pub package_name: Option<String>,
    pub imports: Vec<Import>,
    pub classes: Vec<ClassDecl>,
    pub methods: Vec<MethodDecl>,
    pub field_declarations: Vec<TextElement>,
    pub string_literals: Vec<TextElement>,
    pub identifiers: Vec<NameOccurrence>,
    pub type_identifiers: Vec<NameOccurrence>,
    /// The parser reported error nodes or gave up.
    pub parse_errors: bool,
}

impl FileSyntaxIndex {
    /// Name used in the `[ClassName]` prefix of proposal contexts.
    pub fn primary_class(&self) -> Option<&str> {
        self.classes.first().map(|c| c.name.as_str())
    }

    /// Every line on which `name` occurs as an identifier or type identifier.
    pub fn usage_lines(&self, name: &str) -> Vec<usize> {
        let mut lines: Vec<usize> = self
            .identifiers
            .iter()
            .chain(&self.type_identifiers)
            .filter(|o| o.name == name)
            .map(|o| o.pos.line)
            .collect();
        lines.sort_unstable();
        lines.dedup();
        lines
    }
}

/// Kinds of code that [`extract_strings`] can return. Post lines are pure
/// line slicing and live in the proposal engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    MethodNames,
    MethodNamesAndBodies,
    Identifiers,
    TypeIdentifiers,
    StringLiterals,
    FieldDeclarations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    WholeFile,
    /// Elements starting at or after the position.
    After(Position),
    /// Elements starting before the position.
    Before(Position),
}

impl Region {
    fn admits(&self, start: Position) -> bool {
        match *self {
            Region::WholeFile => true,
            Region::After(p) => start >= p,
            Region::Before(p) => start < p,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementKind::MethodNames => "MN",
            ElementKind::MethodNamesAndBodies => "MNB",
            ElementKind::Identifiers => "I",
            ElementKind::TypeIdentifiers => "TI",
            ElementKind::StringLiterals => "SL",
            ElementKind::FieldDeclarations => "FD",
        };
        f.write_str(s)
    }
}

/// An extracted element with the span it was taken from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub text: String,
    pub span: Span,
}

/// Elements of `kind` admitted by `region`, in source order, before dedup.
pub fn extract_elements(
    file: &SourceFile,
    index: &FileSyntaxIndex,
    kind: ElementKind,
    region: Region,
) -> Vec<Extracted> {
    let names = |occ: &[NameOccurrence]| -> Vec<Extracted> {
        occ.iter()
            .filter(|o| region.admits(o.pos))
            .map(|o| Extracted {
                text: o.name.clone(),
                span: Span {
                    start_line: o.pos.line,
                    start_col: o.pos.col,
                    end_line: o.pos.line,
                    end_col: o.pos.col + o.name.len(),
                },
            })
            .collect()
    };
    let texts = |els: &[TextElement]| -> Vec<Extracted> {
        els.iter()
            .filter(|e| region.admits(e.span.start()))
            .map(|e| Extracted { text: e.text.clone(), span: e.span })
            .collect()
    };
    match kind {
        ElementKind::Identifiers => names(&index.identifiers),
        ElementKind::TypeIdentifiers => names(&index.type_identifiers),
        ElementKind::StringLiterals => texts(&index.string_literals),
        ElementKind::FieldDeclarations => texts(&index.field_declarations),
        ElementKind::MethodNames => index
            .methods
            .iter()
            .filter(|m| region.admits(m.span.start()))
            .map(|m| Extracted { text: m.signature.clone(), span: m.span })
            .collect(),
        ElementKind::MethodNamesAndBodies => index
            .methods
            .iter()
            .filter(|m| region.admits(m.span.start()))
            .map(|m| Extracted { text: method_with_body(file, m), span: m.span })
            .collect(),
    }
}

/// Signature followed by the raw body text, when the method has one.
pub fn method_with_body(file: &SourceFile, method: &MethodDecl) -> String {
    match &method.body {
        Some(body) => format!("{} {}", method.signature, file.slice(body)),
        None => method.signature.clone(),
    }
}

/// Keeps the first occurrence of every distinct string.
pub fn dedup_first(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

/// Element strings of `kind` within `region`, deduplicated by first occurrence.
pub fn extract_strings(
    file: &SourceFile,
    index: &FileSyntaxIndex,
    kind: ElementKind,
    region: Region,
) -> Vec<String> {
    dedup_first(extract_elements(file, index, kind, region).into_iter().map(|e| e.text))
}

pub fn parse_file(file: &SourceFile) -> FileSyntaxIndex {
    let mut parser = Parser::new();
    if parser.set_language(&tree_sitter_java::LANGUAGE.into()).is_err() {
        return FileSyntaxIndex { parse_errors: true, ..Default::default() };
    }
    let Some(tree) = parser.parse(&file.text, None) else {
        return FileSyntaxIndex { parse_errors: true, ..Default::default() };
    };
    let root = tree.root_node();
    let mut out = FileSyntaxIndex { parse_errors: root.has_error(), ..Default::default() };
    let mut walker = Walker { src: file.text.as_bytes(), out: &mut out };
    walker.visit(root, &Scope::default());
    out
}

#[derive(Clone, Default)]
struct Scope {
    class: Option<String>,
    in_import: bool,
    in_annotation: bool,
}

struct Walker<'a> {
    src: &'a [u8],
    out: &'a mut FileSyntaxIndex,
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_type_args(s: &str) -> String {
    let base = s.split('<').next().unwrap_or(s).trim();
    base.rsplit('.').next().unwrap_or(base).trim().to_string()
}

impl<'a> Walker<'a> {
    fn text(&self, node: &Node) -> &'a str {
        node.utf8_text(self.src).unwrap_or("")
    }

    fn visit(&mut self, node: Node, scope: &Scope) {
        let mut scope = scope.clone();
        match node.kind() {
            "package_declaration" => {
                let mut c = node.walk();
                for child in node.named_children(&mut c) {
                    if matches!(child.kind(), "scoped_identifier" | "identifier") {
                        self.out.package_name = Some(self.text(&child).to_string());
                    }
                }
                return;
            }
            "import_declaration" => {
                self.record_import(&node);
                scope.in_import = true;
            }
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "record_declaration" | "annotation_type_declaration" => {
                if let Some(name) = node.child_by_field_name("name") {
                    let name = self.text(&name).to_string();
                    let extends = if node.kind() == "class_declaration" {
                        node.child_by_field_name("superclass").and_then(|sc| {
                            let mut c = sc.walk();
                            let ty = sc.named_children(&mut c).next();
                            ty.map(|t| strip_type_args(self.text(&t)))
                        })
                    } else {
                        None
                    };
                    self.out.classes.push(ClassDecl {
                        name: name.clone(),
                        extends,
                        span: Span::of(&node),
                    });
                    scope.class = Some(name);
                }
            }
            "method_declaration" | "constructor_declaration" => self.record_method(&node, &scope),
            "field_declaration" | "constant_declaration" => {
                self.out.field_declarations.push(TextElement {
                    text: collapse_ws(self.text(&node)),
                    span: Span::of(&node),
                });
            }
            "string_literal" => {
                self.out
                    .string_literals
                    .push(TextElement { text: self.text(&node).to_string(), span: Span::of(&node) });
                return;
            }
            "marker_annotation" | "annotation" => scope.in_annotation = true,
            "identifier" => {
                if !scope.in_import && !scope.in_annotation && !is_type_declaration_name(&node) {
                    self.push_name(&node, false);
                }
                return;
            }
            "type_identifier" => {
                if !scope.in_annotation {
                    self.push_name(&node, true);
                }
                return;
            }
            _ => {}
        }
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            self.visit(child, &scope);
        }
    }

    fn push_name(&mut self, node: &Node, is_type: bool) {
        let s = node.start_position();
        let occ = NameOccurrence {
            name: self.text(node).to_string(),
            pos: Position::new(s.row, s.column),
        };
        if is_type {
            self.out.type_identifiers.push(occ);
        } else {
            self.out.identifiers.push(occ);
        }
    }

    fn record_import(&mut self, node: &Node) {
        let mut path = String::new();
        let mut is_static = false;
        let mut c = node.walk();
        for child in node.children(&mut c) {
            match child.kind() {
                "static" => is_static = true,
                "scoped_identifier" | "identifier" => path = self.text(&child).to_string(),
                "asterisk" => path.push_str(".*"),
                _ => {}
            }
        }
        if !path.is_empty() {
            self.out.imports.push(Import {
                path,
                line: node.start_position().row,
                is_static,
            });
        }
    }

    fn record_method(&mut self, node: &Node, scope: &Scope) {
        let Some(name) = node.child_by_field_name("name") else { return };
        let body = node.child_by_field_name("body");
        // The signature starts after any leading annotations.
        let mut sig_start = node.start_byte();
        let mut c = node.walk();
        for child in node.children(&mut c) {
            if child.kind() == "modifiers" {
                let mut mc = child.walk();
                let first = child
                    .children(&mut mc)
                    .find(|m| !matches!(m.kind(), "marker_annotation" | "annotation"));
                sig_start = match first {
                    Some(m) => m.start_byte(),
                    None => child.end_byte(),
                };
            }
            break;
        }
        let sig_end = body.map(|b| b.start_byte()).unwrap_or(node.end_byte());
        let raw = std::str::from_utf8(&self.src[sig_start..sig_end.max(sig_start)]).unwrap_or("");
        let mut signature = collapse_ws(raw);
        if body.is_none() {
            signature = signature.trim_end_matches(';').trim_end().to_string();
        }
        let decl_start = node.start_position();
        let span = Span::of(node);
        // Leading annotations are metadata; the declaration span starts at the signature.
        let sig_pos = if sig_start != node.start_byte() {
            let prefix = &self.src[node.start_byte()..sig_start];
            let newlines = prefix.iter().filter(|b| **b == b'\n').count();
            let col = if newlines == 0 {
                decl_start.column + prefix.len()
            } else {
                prefix.len() - prefix.iter().rposition(|b| *b == b'\n').unwrap() - 1
            };
            Position::new(decl_start.row + newlines, col)
        } else {
            Position::new(decl_start.row, decl_start.column)
        };
        self.out.methods.push(MethodDecl {
            signature,
            name: self.text(&name).to_string(),
            span: Span { start_line: sig_pos.line, start_col: sig_pos.col, ..span },
            body: body.map(|b| Span::of(&b)),
            class: scope.class.clone(),
        });
    }
}

fn is_type_declaration_name(node: &Node) -> bool {
    let Some(parent) = node.parent() else { return false };
    matches!(
        parent.kind(),
        "class_declaration"
            | "interface_declaration"
            | "enum_declaration"
            | "record_declaration"
            | "annotation_type_declaration"
    ) && parent.child_by_field_name("name").map(|n| n.id()) == Some(node.id())
}
