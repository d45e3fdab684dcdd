//! Repository-wide metadata and per-source file ranking.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::dataset::{duplicate_groups, HoleSpec};
use crate::error::{Error, Result};
use crate::syntax::{parse_file, FileSyntaxIndex, SourceFile};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptSource {
    Current,
    ParentClass,
    Import,
    Sibling,
    SimilarName,
    ChildClass,
    ImportOfSibling,
    ImportOfSimilarName,
    ImportOfParentClass,
    ImportOfChildClass,
}

impl PromptSource {
    pub const ALL: [PromptSource; 10] = [
        PromptSource::Current,
        PromptSource::ParentClass,
        PromptSource::Import,
        PromptSource::Sibling,
        PromptSource::SimilarName,
        PromptSource::ChildClass,
        PromptSource::ImportOfSibling,
        PromptSource::ImportOfSimilarName,
        PromptSource::ImportOfParentClass,
        PromptSource::ImportOfChildClass,
    ];

    /// For the import-of-X sources, the source whose files' imports are ranked.
    pub fn import_base(self) -> Option<PromptSource> {
        match self {
            PromptSource::ImportOfSibling => Some(PromptSource::Sibling),
            PromptSource::ImportOfSimilarName => Some(PromptSource::SimilarName),
            PromptSource::ImportOfParentClass => Some(PromptSource::ParentClass),
            PromptSource::ImportOfChildClass => Some(PromptSource::ChildClass),
            _ => None,
        }
    }
}

impl fmt::Display for PromptSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PromptSource::Current => "current",
            PromptSource::ParentClass => "parent_class",
            PromptSource::Import => "import",
            PromptSource::Sibling => "sibling",
            PromptSource::SimilarName => "similar_name",
            PromptSource::ChildClass => "child_class",
            PromptSource::ImportOfSibling => "import_of_sibling",
            PromptSource::ImportOfSimilarName => "import_of_similar_name",
            PromptSource::ImportOfParentClass => "import_of_parent_class",
            PromptSource::ImportOfChildClass => "import_of_child_class",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportUsage {
    pub import: String,
    pub lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoIndex {
    pub schema_version: u32,
    pub repo_id: String,
    pub sources: BTreeMap<String, SourceFile>,
    pub files: BTreeMap<String, FileSyntaxIndex>,
    pub file_hashes: BTreeMap<String, String>,
    pub class_to_file: BTreeMap<String, String>,
    pub import_to_file: BTreeMap<String, BTreeMap<String, Option<String>>>,
    pub import_usages: BTreeMap<String, Vec<ImportUsage>>,
    pub siblings: BTreeMap<String, Vec<String>>,
    pub similar_names: BTreeMap<String, Vec<String>>,
    pub parent_class_file: BTreeMap<String, BTreeMap<String, Option<String>>>,
    pub child_class_files: BTreeMap<String, Vec<String>>,
    pub duplicate_sets: Vec<Vec<String>>,
    /// Per-file problems met while building (unreadable files, parse errors).
    pub diagnostics: Vec<String>,
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Splits a file stem on underscores and camel-case boundaries, lowercased.
pub fn name_parts(stem: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for chunk in stem.split(|c: char| c == '_' || c == '-' || c == '.' || c == '$') {
        let chars: Vec<char> = chunk.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0 && c.is_uppercase() && {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower)
            };
            if boundary && !cur.is_empty() {
                parts.push(std::mem::take(&mut cur).to_lowercase());
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            parts.push(cur.to_lowercase());
        }
    }
    parts
}

fn parent_dir(path: &str) -> &str {
    path.rsplit_once('/').map(|(d, _)| d).unwrap_or("")
}

/// Whether `path`'s directory layout agrees with the dotted `fqn`.
fn path_matches_fqn(path: &str, fqn: &str) -> bool {
    let dotted = path.strip_suffix(".java").unwrap_or(path).replace('/', ".");
    dotted == fqn || dotted.ends_with(&format!(".{fqn}"))
}

impl RepoIndex {
    pub fn source(&self, path: &str) -> Option<&SourceFile> {
        self.sources.get(path)
    }

    pub fn syntax(&self, path: &str) -> Option<&FileSyntaxIndex> {
        self.files.get(path)
    }

    pub fn is_duplicate(&self, path: &str) -> bool {
        self.duplicate_sets.iter().any(|s| s.iter().any(|p| p == path))
    }

    pub fn resolved_import(&self, path: &str, import: &str) -> Option<&str> {
        self.import_to_file.get(path)?.get(import)?.as_deref()
    }

    pub fn usage_lines(&self, path: &str, import: &str) -> &[usize] {
        self.import_usages
            .get(path)
            .and_then(|u| u.iter().find(|u| u.import == import))
            .map(|u| u.lines.as_slice())
            .unwrap_or(&[])
    }

    /// Builds the index from in-memory sources. Paths use `/` separators.
    pub fn from_sources(repo_id: &str, sources: Vec<SourceFile>) -> RepoIndex {
        let parsed: Vec<(SourceFile, FileSyntaxIndex)> =
            sources.into_par_iter().map(|s| {
                let idx = parse_file(&s);
                (s, idx)
            }).collect();
        let mut index = RepoIndex {
            schema_version: SCHEMA_VERSION,
            repo_id: repo_id.to_string(),
            sources: BTreeMap::new(),
            files: BTreeMap::new(),
            file_hashes: BTreeMap::new(),
            class_to_file: BTreeMap::new(),
            import_to_file: BTreeMap::new(),
            import_usages: BTreeMap::new(),
            siblings: BTreeMap::new(),
            similar_names: BTreeMap::new(),
            parent_class_file: BTreeMap::new(),
            child_class_files: BTreeMap::new(),
            duplicate_sets: Vec::new(),
            diagnostics: Vec::new(),
        };
        for (src, idx) in parsed {
            if idx.parse_errors {
                index.diagnostics.push(format!("{}: parse errors, extraction is best-effort", src.path));
            }
            index.file_hashes.insert(src.path.clone(), content_hash(src.text.as_bytes()));
            index.files.insert(src.path.clone(), idx);
            index.sources.insert(src.path.clone(), src);
        }
        index.link();
        index
    }

    fn link(&mut self) {
        let paths: Vec<String> = self.files.keys().cloned().collect();

        // fully-qualified name -> candidate files, preferring layout-consistent paths
        let mut fqn_files: HashMap<String, Vec<String>> = HashMap::new();
        let mut class_files: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for path in &paths {
            let idx = &self.files[path];
            for class in &idx.classes {
                let fqn = match &idx.package_name {
                    Some(pkg) => format!("{pkg}.{}", class.name),
                    None => class.name.clone(),
                };
                fqn_files.entry(fqn).or_default().push(path.clone());
                class_files.entry(class.name.clone()).or_default().push(path.clone());
            }
        }
        let rank_candidates = |fqn: &str, cands: &mut Vec<String>| {
            cands.sort_by_key(|p| (!path_matches_fqn(p, fqn), p.clone()));
            cands.dedup();
        };
        for (fqn, cands) in fqn_files.iter_mut() {
            rank_candidates(fqn, cands);
        }
        for (name, cands) in class_files.iter_mut() {
            let fqn_like = name.clone();
            rank_candidates(&fqn_like, cands);
            self.class_to_file.insert(name.clone(), cands[0].clone());
        }

        let resolve_fqn = |path: &str, import: &str, is_static: bool| -> Option<String> {
            if import.ends_with(".*") {
                return None;
            }
            let mut segs: Vec<&str> = import.split('.').collect();
            if is_static && segs.len() > 1 {
                segs.pop();
            }
            while !segs.is_empty() {
                let fqn = segs.join(".");
                if let Some(c) = fqn_files.get(&fqn) {
                    if let Some(p) = c.iter().find(|p| p.as_str() != path) {
                        return Some(p.clone());
                    }
                }
                if segs.len() == 1 {
                    break;
                }
                segs.pop();
            }
            let fqn = import.to_string();
            paths.iter().find(|p| p.as_str() != path && path_matches_fqn(p, &fqn)).cloned()
        };

        for path in &paths {
            let idx = &self.files[path];
            let mut resolved = BTreeMap::new();
            let mut usages = Vec::new();
            let import_lines: HashSet<usize> = idx.imports.iter().map(|i| i.line).collect();
            for imp in &idx.imports {
                resolved.insert(imp.path.clone(), resolve_fqn(path, &imp.path, imp.is_static));
                let lines = imp
                    .simple_name()
                    .map(|n| {
                        idx.usage_lines(n).into_iter().filter(|l| !import_lines.contains(l)).collect()
                    })
                    .unwrap_or_default();
                usages.push(ImportUsage { import: imp.path.clone(), lines });
            }
            self.import_to_file.insert(path.clone(), resolved);
            self.import_usages.insert(path.clone(), usages);
        }

        // parent links
        for path in &paths {
            let idx = &self.files[path];
            let mut parents = BTreeMap::new();
            for class in &idx.classes {
                if let Some(ext) = &class.extends {
                    parents.insert(class.name.clone(), self.resolve_class_ref(path, ext, &class_files));
                }
            }
            self.parent_class_file.insert(path.clone(), parents);
        }
        let mut children: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (path, parents) in &self.parent_class_file {
            for parent in parents.values().flatten() {
                if parent != path {
                    children.entry(parent.clone()).or_default().insert(path.clone());
                }
            }
        }
        for path in &paths {
            let kids = children.remove(path).map(|s| s.into_iter().collect()).unwrap_or_default();
            self.child_class_files.insert(path.clone(), kids);
        }

        // siblings and similar names
        let parts: Vec<HashSet<String>> = paths
            .iter()
            .map(|p| name_parts(self.sources[p].stem()).into_iter().collect())
            .collect();
        for (i, path) in paths.iter().enumerate() {
            let dir = parent_dir(path);
            let sibs = paths
                .iter()
                .filter(|q| *q != path && parent_dir(q) == dir)
                .cloned()
                .collect();
            self.siblings.insert(path.clone(), sibs);
            let similar = paths
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i && !parts[i].is_disjoint(&parts[*j]))
                .map(|(_, q)| q.clone())
                .collect();
            self.similar_names.insert(path.clone(), similar);
        }

        self.duplicate_sets = duplicate_groups(&self.sources);
    }

    /// Resolves a class name referenced from `path`: explicit import, then
    /// on-demand import or same package, then any declaring file.
    fn resolve_class_ref(
        &self,
        path: &str,
        name: &str,
        class_files: &BTreeMap<String, Vec<String>>,
    ) -> Option<String> {
        let idx = &self.files[path];
        for imp in &idx.imports {
            if imp.simple_name() == Some(name) {
                if let Some(Some(p)) = self.import_to_file[path].get(&imp.path) {
                    return Some(p.clone());
                }
            }
        }
        let cands = class_files.get(name)?;
        let mut packages: Vec<Option<String>> = vec![idx.package_name.clone()];
        for imp in idx.imports.iter().filter(|i| i.is_wildcard() && !i.is_static) {
            packages.push(Some(imp.path.trim_end_matches(".*").to_string()));
        }
        for pkg in &packages {
            if let Some(p) = cands.iter().find(|c| &self.files[*c].package_name == pkg) {
                return Some(p.clone());
            }
        }
        Some(cands[0].clone())
    }

    fn import_distance(&self, path: &str, import: &str, hole_line: usize) -> Option<usize> {
        self.usage_lines(path, import).iter().map(|&l| l.abs_diff(hole_line)).min()
    }

    /// The parent-class file of the class nearest to the hole, excluding the
    /// hole's own file.
    fn parent_file(&self, hole: &HoleSpec) -> Option<String> {
        let idx = self.files.get(&hole.file)?;
        let parents = self.parent_class_file.get(&hole.file)?;
        idx.classes
            .iter()
            .filter_map(|c| {
                let parent = parents.get(&c.name)?.as_ref()?;
                if parent == &hole.file {
                    return None;
                }
                let dist = if c.span.contains_line(hole.line) {
                    0
                } else {
                    c.span.start_line.abs_diff(hole.line).min(c.span.end_line.abs_diff(hole.line))
                };
                let size = c.span.end_line - c.span.start_line;
                Some(((dist, size, c.span.start()), parent.clone()))
            })
            .min()
            .map(|(_, p)| p)
    }

    fn rank_by_common_imports(&self, hole: &HoleSpec, candidates: &[String]) -> Vec<String> {
        let Some(cur) = self.files.get(&hole.file) else { return Vec::new() };
        let cur_imports: HashSet<&str> = cur.imports.iter().map(|i| i.path.as_str()).collect();
        let mut keyed: Vec<_> = candidates
            .iter()
            .filter(|p| p.as_str() != hole.file && self.files.contains_key(p.as_str()))
            .map(|p| {
                let common: Vec<&str> = self.files[p]
                    .imports
                    .iter()
                    .map(|i| i.path.as_str())
                    .filter(|i| cur_imports.contains(i))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let proximity = common
                    .iter()
                    .filter_map(|i| self.import_distance(&hole.file, i, hole.line))
                    .min()
                    .unwrap_or(usize::MAX);
                ((common.is_empty(), proximity, Reverse(common.len()), p.clone()), p.clone())
            })
            .collect();
        keyed.sort();
        keyed.into_iter().map(|(_, p)| p).collect()
    }

    fn rank_imports_of(&self, hole: &HoleSpec, base_files: &[String]) -> Vec<String> {
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for f in base_files {
            let Some(idx) = self.files.get(f) else { continue };
            for imp in &idx.imports {
                let Some(target) = self.resolved_import(f, &imp.path) else { continue };
                if target == hole.file {
                    continue;
                }
                *freq.entry(target.to_string()).or_default() += self.usage_lines(f, &imp.path).len();
            }
        }
        let mut ranked: Vec<(Reverse<usize>, String)> =
            freq.into_iter().map(|(p, n)| (Reverse(n), p)).collect();
        ranked.sort();
        ranked.into_iter().map(|(_, p)| p).collect()
    }

    /// Files contributing context for `source`, most relevant first.
    pub fn rank_source_files(&self, source: PromptSource, hole: &HoleSpec) -> Vec<String> {
        if !self.files.contains_key(&hole.file) {
            return Vec::new();
        }
        match source {
            PromptSource::Current => vec![hole.file.clone()],
            PromptSource::ParentClass => self.parent_file(hole).into_iter().collect(),
            PromptSource::Import => {
                let mut best: BTreeMap<String, Option<usize>> = BTreeMap::new();
                for imp in &self.files[&hole.file].imports {
                    let Some(target) = self.resolved_import(&hole.file, &imp.path) else { continue };
                    if target == hole.file {
                        continue;
                    }
                    let d = self.import_distance(&hole.file, &imp.path, hole.line);
                    let entry = best.entry(target.to_string()).or_insert(d);
                    *entry = match (*entry, d) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                }
                let mut keyed: Vec<_> = best
                    .into_iter()
                    .map(|(p, d)| ((d.is_none(), d.unwrap_or(usize::MAX), p.clone()), p))
                    .collect();
                keyed.sort();
                keyed.into_iter().map(|(_, p)| p).collect()
            }
            PromptSource::Sibling => {
                let c = self.siblings.get(&hole.file).cloned().unwrap_or_default();
                self.rank_by_common_imports(hole, &c)
            }
            PromptSource::SimilarName => {
                let c = self.similar_names.get(&hole.file).cloned().unwrap_or_default();
                self.rank_by_common_imports(hole, &c)
            }
            PromptSource::ChildClass => {
                let c = self.child_class_files.get(&hole.file).cloned().unwrap_or_default();
                self.rank_by_common_imports(hole, &c)
            }
            PromptSource::ImportOfSibling
            | PromptSource::ImportOfSimilarName
            | PromptSource::ImportOfParentClass
            | PromptSource::ImportOfChildClass => {
                let base = source.import_base().expect("import-of source");
                let base_files = self.rank_source_files(base, hole);
                self.rank_imports_of(hole, &base_files)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<RepoIndex> {
        let idx: RepoIndex = serde_json::from_str(s)?;
        if idx.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "repo index schema {} != supported {}",
                idx.schema_version, SCHEMA_VERSION
            )));
        }
        Ok(idx)
    }
}

/// Repo-relative `/`-separated paths of every `.java` file under `root`,
/// sorted, plus diagnostics for entries that could not be visited.
fn java_files(root: &Path) -> (Vec<(String, std::path::PathBuf)>, Vec<String>) {
    let mut files = Vec::new();
    let mut diags = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                let p = e.path();
                if p.extension().and_then(|x| x.to_str()) == Some("java") {
                    let rel = p.strip_prefix(root).unwrap_or(p);
                    let rel = rel
                        .components()
                        .map(|c| c.as_os_str().to_string_lossy().into_owned())
                        .collect::<Vec<_>>()
                        .join("/");
                    files.push((rel, p.to_path_buf()));
                }
            }
            Ok(_) => {}
            Err(e) => diags.push(format!("walk error: {e}")),
        }
    }
    files.sort();
    (files, diags)
}

fn read_sources(root: &Path) -> Result<(Vec<SourceFile>, Vec<String>)> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "repository root is not a directory"),
        ));
    }
    let (files, mut diags) = java_files(root);
    let mut sources = Vec::new();
    for (rel, abs) in files {
        match std::fs::read(&abs) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => sources.push(SourceFile::new(rel, text)),
                Err(e) => {
                    diags.push(format!("{rel}: not UTF-8, decoded lossily"));
                    sources.push(SourceFile::new(rel, String::from_utf8_lossy(e.as_bytes()).into_owned()));
                }
            },
            Err(e) => diags.push(format!("{rel}: unreadable: {e}")),
        }
    }
    Ok((sources, diags))
}

pub fn repo_id_of(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .or_else(|| root.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "repo".to_string())
}

pub fn build_repo_index(root: &Path) -> Result<RepoIndex> {
    let (sources, diags) = read_sources(root)?;
    let mut idx = RepoIndex::from_sources(&repo_id_of(root), sources);
    let mut all = diags;
    all.append(&mut idx.diagnostics);
    idx.diagnostics = all;
    Ok(idx)
}

/// Loads the cached index when every file hash still matches, otherwise
/// rebuilds and rewrites the cache.
pub fn load_or_build(root: &Path, cache_path: &Path) -> Result<RepoIndex> {
    if let Ok(text) = std::fs::read_to_string(cache_path) {
        if let Ok(cached) = RepoIndex::from_json(&text) {
            let (files, _) = java_files(root);
            let current: Option<BTreeMap<String, String>> = files
                .iter()
                .map(|(rel, abs)| std::fs::read(abs).ok().map(|b| (rel.clone(), content_hash(&b))))
                .collect();
            if current.as_ref() == Some(&cached.file_hashes) {
                return Ok(cached);
            }
        }
    }
    let idx = build_repo_index(root)?;
    if let Some(dir) = cache_path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(cache_path, idx.to_json()?).map_err(|e| Error::io(cache_path, e))?;
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hole(file: &str, line: usize) -> HoleSpec {
        HoleSpec::new("r", file, line, 0, "x")
    }

    #[test]
    fn splits_names() {
        assert_eq!(name_parts("GibbsSampler"), ["gibbs", "sampler"]);
        assert_eq!(name_parts("MaximizingGibbsSampler"), ["maximizing", "gibbs", "sampler"]);
        assert_eq!(name_parts("HTTPServer_util"), ["http", "server", "util"]);
    }

    #[test]
    fn similar_and_siblings() {
        let idx = RepoIndex::from_sources(
            "r",
            vec![
                SourceFile::new("a/GibbsSampler.java", "class GibbsSampler {}"),
                SourceFile::new("b/MaximizingGibbsSampler.java", "class MaximizingGibbsSampler {}"),
                SourceFile::new("a/Other.java", "class Other {}"),
            ],
        );
        assert_eq!(idx.similar_names["a/GibbsSampler.java"], ["b/MaximizingGibbsSampler.java"]);
        assert_eq!(idx.similar_names["b/MaximizingGibbsSampler.java"], ["a/GibbsSampler.java"]);
        assert_eq!(idx.siblings["a/GibbsSampler.java"], ["a/Other.java"]);
        assert_eq!(idx.siblings["a/Other.java"], ["a/GibbsSampler.java"]);
        assert!(idx.siblings["b/MaximizingGibbsSampler.java"].is_empty());
    }

    #[test]
    fn resolves_imports() {
        let idx = RepoIndex::from_sources(
            "r",
            vec![
                SourceFile::new("src/a/b/C.java", "package a.b;\npublic class C {}"),
                SourceFile::new("D.java", "import a.b.C;\nimport java.util.List;\nclass D { C c; }"),
            ],
        );
        assert_eq!(idx.resolved_import("D.java", "a.b.C"), Some("src/a/b/C.java"));
        assert_eq!(idx.resolved_import("D.java", "java.util.List"), None);
        assert_eq!(idx.usage_lines("D.java", "a.b.C"), [2]);
    }

    #[test]
    fn import_ranking_by_usage_distance() {
        let mut body = String::from("import p.A;\nimport p.B;\nclass Cur {\n");
        for line in 3..50 {
            match line {
                10 => body.push_str("  A a;\n"),
                40 => body.push_str("  B b;\n"),
                _ => body.push_str("  int x;\n"),
            }
        }
        body.push_str("}\n");
        let idx = RepoIndex::from_sources(
            "r",
            vec![
                SourceFile::new("p/A.java", "package p; public class A {}"),
                SourceFile::new("p/B.java", "package p; public class B {}"),
                SourceFile::new("Cur.java", body),
            ],
        );
        let ranked = idx.rank_source_files(PromptSource::Import, &hole("Cur.java", 42));
        assert_eq!(ranked, ["p/B.java", "p/A.java"]);
        let ranked = idx.rank_source_files(PromptSource::Import, &hole("Cur.java", 11));
        assert_eq!(ranked, ["p/A.java", "p/B.java"]);
    }

    #[test]
    fn parent_and_current() {
        let idx = RepoIndex::from_sources(
            "r",
            vec![SourceFile::new("A.java", "class A { int x; }")],
        );
        let h = hole("A.java", 0);
        assert!(idx.rank_source_files(PromptSource::ParentClass, &h).is_empty());
        assert_eq!(idx.rank_source_files(PromptSource::Current, &h), ["A.java"]);
    }

    #[test]
    fn cache_roundtrip_is_byte_identical() {
        let idx = RepoIndex::from_sources(
            "r",
            vec![
                SourceFile::new("x/A.java", "package x; class A extends B {}"),
                SourceFile::new("x/B.java", "package x; class B {}"),
            ],
        );
        let json = idx.to_json().unwrap();
        let back = RepoIndex::from_json(&json).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(idx.parent_class_file["x/A.java"]["A"].as_deref(), Some("x/B.java"));
        assert_eq!(idx.child_class_files["x/B.java"], ["x/A.java"]);
    }
}
