//! Hole mining, duplicate exclusion, capping and split bookkeeping.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::repo::{content_hash, RepoIndex};
use crate::syntax::{Position, SourceFile};

pub const DEFAULT_HOLE_CAP: usize = 10_000;

/// One completion task: the suffix of `line` from `hole_start_col` is hidden.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HoleSpec {
    pub id: String,
    pub repo_id: String,
    pub file: String,
    pub line: usize,
    /// Byte column of the middle character of the line.
    pub hole_start_col: usize,
    pub target: String,
}

impl HoleSpec {
    pub fn new(repo_id: &str, file: &str, line: usize, hole_start_col: usize, target: &str) -> Self {
        Self {
            id: hole_id(repo_id, file, line),
            repo_id: repo_id.to_string(),
            file: file.to_string(),
            line,
            hole_start_col,
            target: target.to_string(),
        }
    }

    pub fn position(&self) -> Position {
        Position::new(self.line, self.hole_start_col)
    }
}

pub fn hole_id(repo_id: &str, file: &str, line: usize) -> String {
    let mut h = Sha256::new();
    h.update(repo_id.as_bytes());
    h.update([0]);
    h.update(file.as_bytes());
    h.update([0]);
    h.update(line.to_le_bytes());
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: Split,
    pub repo_ids: Vec<String>,
}

/// Repository → split mapping, loaded from configuration rather than computed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn splits(&self) -> Vec<DatasetSplit> {
        vec![
            DatasetSplit { name: Split::Train, repo_ids: self.train.clone() },
            DatasetSplit { name: Split::Val, repo_ids: self.val.clone() },
            DatasetSplit { name: Split::Test, repo_ids: self.test.clone() },
        ]
    }

    /// Every repository may appear in at most one split.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, Split> = HashMap::new();
        for split in [Split::Train, Split::Val, Split::Test] {
            let ids = match split {
                Split::Train => &self.train,
                Split::Val => &self.val,
                Split::Test => &self.test,
            };
            for id in ids {
                if let Some(prev) = seen.insert(id, split) {
                    return Err(Error::Config(format!("repo {id} is in both {prev} and {split}")));
                }
            }
        }
        Ok(())
    }

    pub fn split_of(&self, repo_id: &str) -> Option<Split> {
        if self.train.iter().any(|r| r == repo_id) {
            Some(Split::Train)
        } else if self.val.iter().any(|r| r == repo_id) {
            Some(Split::Val)
        } else if self.test.iter().any(|r| r == repo_id) {
            Some(Split::Test)
        } else {
            None
        }
    }

    /// Reads a JSON or TOML file with optional `train`, `val`, `test` arrays.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: SplitAssignment = if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)?
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

/// Groups of byte-identical files, each group sorted, groups ordered by first path.
pub fn duplicate_groups(sources: &BTreeMap<String, SourceFile>) -> Vec<Vec<String>> {
    let mut by_hash: BTreeMap<String, Vec<&SourceFile>> = BTreeMap::new();
    for src in sources.values() {
        by_hash.entry(content_hash(src.text.as_bytes())).or_default().push(src);
    }
    let mut groups = Vec::new();
    for bucket in by_hash.into_values() {
        let mut remaining = bucket;
        // Hash collisions are split apart by exact comparison.
        while let Some(first) = remaining.first().copied() {
            let (same, rest): (Vec<&SourceFile>, Vec<&SourceFile>) =
                remaining.into_iter().partition(|s| s.text.as_bytes() == first.text.as_bytes());
            if same.len() > 1 {
                let mut g: Vec<String> = same.iter().map(|s| s.path.clone()).collect();
                g.sort();
                groups.push(g);
            }
            remaining = rest;
        }
    }
    groups.sort();
    groups
}

pub fn find_duplicate_files(index: &RepoIndex) -> Vec<Vec<String>> {
    duplicate_groups(&index.sources)
}

/// Which lines of a file are comment lines (`//`, `/*` or inside a block comment).
pub fn comment_lines(file: &SourceFile) -> Vec<bool> {
    let mut in_block = false;
    file.lines()
        .map(|line| {
            let trimmed = line.trim_start();
            let starts_in_block = in_block;
            let is_comment = starts_in_block || trimmed.starts_with("//") || trimmed.starts_with("/*");
            in_block = scan_block_state(line, in_block);
            is_comment
        })
        .collect()
}

/// Block-comment state at the end of `line`, skipping string and char literals.
fn scan_block_state(line: &str, mut in_block: bool) -> bool {
    let b = line.as_bytes();
    let mut i = 0;
    let mut quote: Option<u8> = None;
    while i < b.len() {
        if in_block {
            if b[i] == b'*' && b.get(i + 1) == Some(&b'/') {
                in_block = false;
                i += 2;
                continue;
            }
        } else if let Some(q) = quote {
            if b[i] == b'\\' {
                i += 2;
                continue;
            }
            if b[i] == q {
                quote = None;
            }
        } else {
            match b[i] {
                b'"' | b'\'' => quote = Some(b[i]),
                b'/' if b.get(i + 1) == Some(&b'/') => return false,
                b'/' if b.get(i + 1) == Some(&b'*') => {
                    in_block = true;
                    i += 2;
                    continue;
                }
                _ => {}
            }
        }
        i += 1;
    }
    in_block
}

/// The byte column of the middle character of `line` after stripping
/// trailing whitespace, or `None` for blank lines.
pub fn middle_col(line: &str) -> Option<usize> {
    let stripped = line.trim_end();
    if stripped.trim_start().is_empty() {
        return None;
    }
    let n = stripped.chars().count();
    stripped.char_indices().nth(n / 2).map(|(b, _)| b)
}

fn holes_in_file(repo_id: &str, file: &SourceFile) -> Vec<HoleSpec> {
    let comments = comment_lines(file);
    file.lines()
        .enumerate()
        .filter(|(i, _)| !comments[*i])
        .filter_map(|(i, line)| {
            let col = middle_col(line)?;
            let target = &line.trim_end()[col..];
            Some(HoleSpec::new(repo_id, &file.path, i, col, target))
        })
        .collect()
}

/// One hole per non-blank, non-comment line of every non-duplicate file;
/// a uniform sample of `cap` holes when there are more.
pub fn mine_holes(index: &RepoIndex, cap: usize, seed: u64) -> Result<Vec<HoleSpec>> {
    if cap == 0 {
        return Err(Error::invalid("hole cap must be positive"));
    }
    let files: Vec<&SourceFile> =
        index.sources.values().filter(|s| !index.is_duplicate(&s.path)).collect();
    let holes: Vec<HoleSpec> = files
        .par_iter()
        .map(|f| holes_in_file(&index.repo_id, f))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if holes.len() <= cap {
        return Ok(holes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, holes.len(), cap).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| holes[i].clone()).collect())
}

/// Two lines before the hole, the hole line up to the hole, two lines after.
pub fn hole_window(hole: &HoleSpec, index: &RepoIndex) -> String {
    let Some(file) = index.source(&hole.file) else { return String::new() };
    hole_window_in(hole, file)
}

pub fn hole_window_in(hole: &HoleSpec, file: &SourceFile) -> String {
    let n = file.line_count();
    if hole.line >= n {
        return String::new();
    }
    let mut parts: Vec<&str> = Vec::new();
    for l in hole.line.saturating_sub(2)..hole.line {
        parts.push(file.line(l));
    }
    let line = file.line(hole.line);
    parts.push(&line[..hole.hole_start_col.min(line.len())]);
    for l in hole.line + 1..(hole.line + 3).min(n) {
        parts.push(file.line(l));
    }
    parts.join("\n")
}

/// A line of the dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleRecord {
    pub id: String,
    pub repo_id: String,
    pub file: String,
    pub line: usize,
    pub hole_start_col: usize,
    pub target: String,
    pub hole_window: String,
    pub split: Option<Split>,
}

impl HoleRecord {
    pub fn from_hole(hole: &HoleSpec, index: &RepoIndex, split: Option<Split>) -> Self {
        Self {
            id: hole.id.clone(),
            repo_id: hole.repo_id.clone(),
            file: hole.file.clone(),
            line: hole.line,
            hole_start_col: hole.hole_start_col,
            target: hole.target.clone(),
            hole_window: hole_window(hole, index),
            split,
        }
    }

    pub fn hole(&self) -> HoleSpec {
        HoleSpec {
            id: self.id.clone(),
            repo_id: self.repo_id.clone(),
            file: self.file.clone(),
            line: self.line,
            hole_start_col: self.hole_start_col,
            target: self.target.clone(),
        }
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repo(files: &[(&str, &str)]) -> RepoIndex {
        RepoIndex::from_sources(
            "r",
            files.iter().map(|(p, t)| SourceFile::new(*p, *t)).collect(),
        )
    }

    #[test]
    fn middle_character_rule() {
        let line = "int x = compute();";
        assert_eq!(line.len(), 18);
        let col = middle_col(line).unwrap();
        assert_eq!(col, 9);
        assert_eq!(&line[col..], "ompute();");
        assert_eq!(middle_col("   "), None);
        assert_eq!(middle_col("x"), Some(0));
        assert_eq!(middle_col("  ab  "), Some(2));
    }

    #[test]
    fn comment_detection() {
        let f = SourceFile::new(
            "A.java",
            "// a\nint a; /* open\n * inside\n end */ int b;\n/** doc */\nString s = \"/*\";\nint c;\n",
        );
        assert_eq!(comment_lines(&f), [true, false, true, true, true, false, false]);
    }

    #[test]
    fn duplicates() {
        let r = repo(&[("a/X.java", "class X {}"), ("b/X.java", "class X {}"), ("c/Y.java", "class X {} ")]);
        assert_eq!(find_duplicate_files(&r), vec![vec!["a/X.java".to_string(), "b/X.java".to_string()]]);
        assert!(find_duplicate_files(&repo(&[])).is_empty());
    }

    #[test]
    fn no_holes_from_duplicates_blank_or_comments() {
        let r = repo(&[
            ("a/X.java", "class X {\n  int a;\n}\n"),
            ("b/X.java", "class X {\n  int a;\n}\n"),
            ("Y.java", "class Y {\n\n  // note\n  int b;\n}\n"),
        ]);
        let holes = mine_holes(&r, 100, 0).unwrap();
        assert!(holes.iter().all(|h| h.file == "Y.java"));
        assert_eq!(holes.iter().map(|h| h.line).collect::<Vec<_>>(), [0, 3, 4]);
    }

    #[test]
    fn cap_is_enforced_and_deterministic() {
        let body: String = (0..118).map(|i| format!("int v{i} = {i};\n")).collect();
        let files: Vec<(String, String)> =
            (0..100).map(|i| (format!("F{i}.java"), format!("class F{i} {{\n{body}}}\n"))).collect();
        let r = RepoIndex::from_sources(
            "r",
            files.iter().map(|(p, t)| SourceFile::new(p.clone(), t.clone())).collect(),
        );
        let all = mine_holes(&r, usize::MAX, 0).unwrap();
        assert_eq!(all.len(), 12_000);
        let a = mine_holes(&r, 10_000, 7).unwrap();
        let b = mine_holes(&r, 10_000, 7).unwrap();
        assert_eq!(a.len(), 10_000);
        assert_eq!(a, b);
        assert!(matches!(mine_holes(&r, 0, 7), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn windows() {
        let r = repo(&[("A.java", "l0\nl1\nline two\nl3\nl4\n")]);
        let h = HoleSpec::new("r", "A.java", 2, 4, " two");
        assert_eq!(hole_window(&h, &r), "l0\nl1\nline\nl3\nl4");
        let h0 = HoleSpec::new("r", "A.java", 0, 1, "0");
        assert_eq!(hole_window(&h0, &r), "l\nl1\nline two");
        let hz = HoleSpec::new("r", "A.java", 2, 0, "line two");
        assert_eq!(hole_window(&hz, &r), "l0\nl1\n\nl3\nl4");
    }

    #[test]
    fn split_validation() {
        let s = SplitAssignment { train: vec!["a".into()], val: vec!["a".into()], test: vec![] };
        assert!(s.validate().is_err());
        let s = SplitAssignment { train: vec!["a".into()], val: vec!["b".into()], test: vec![] };
        assert_eq!(s.split_of("b"), Some(Split::Val));
        assert_eq!(s.split_of("z"), None);
    }
}
