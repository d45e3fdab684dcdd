mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use repoprompt::syntax::{extract_elements, extract_strings, parse_file, ElementKind, Position, Region, SourceFile};

const KINDS: [ElementKind; 6] = [
    ElementKind::MethodNames,
    ElementKind::MethodNamesAndBodies,
    ElementKind::Identifiers,
    ElementKind::TypeIdentifiers,
    ElementKind::StringLiterals,
    ElementKind::FieldDeclarations,
];

fn corpus() -> Vec<SourceFile> {
    let mut files: Vec<SourceFile> = mini_index().sources.into_values().collect();
    files.extend(synthetic_index(1, 3, 6).sources.into_values());
    files
}

fn multiset(items: impl IntoIterator<Item = String>) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for s in items {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

#[test]
fn parse_is_pure() {
    for f in corpus() {
        let copy = SourceFile::new(f.path.clone(), f.text.clone());
        assert_eq!(parse_file(&f), parse_file(&copy), "{}", f.path);
    }
}

#[test]
fn identifiers_occur_verbatim() {
    for f in corpus() {
        let idx = parse_file(&f);
        for kind in [ElementKind::Identifiers, ElementKind::TypeIdentifiers] {
            for name in extract_strings(&f, &idx, kind, Region::WholeFile) {
                assert!(f.text.contains(&name), "{}: {name}", f.path);
            }
        }
    }
}

#[test]
fn bodies_extend_signatures() {
    for f in corpus() {
        let idx = parse_file(&f);
        let mn = extract_elements(&f, &idx, ElementKind::MethodNames, Region::WholeFile);
        let mnb = extract_elements(&f, &idx, ElementKind::MethodNamesAndBodies, Region::WholeFile);
        assert_eq!(mn.len(), mnb.len());
        for (a, b) in mn.iter().zip(&mnb) {
            assert!(b.text.starts_with(&a.text), "{}: {:?} vs {:?}", f.path, a.text, b.text);
        }
    }
}

#[test]
fn parse_errors_are_flagged_not_fatal() {
    let f = SourceFile::new("Broken.java", "class Broken { void f( { int x = ; }");
    let idx = parse_file(&f);
    assert!(idx.parse_errors);
    assert_eq!(idx.primary_class(), Some("Broken"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn before_and_after_cover_whole_file(file_ix in 0usize..13, line in 0usize..120, col in 0usize..40, k in 0usize..6) {
        let files = corpus();
        let f = &files[file_ix % files.len()];
        let idx = parse_file(f);
        let kind = KINDS[k];
        let p = Position::new(line % f.line_count().max(1), col);
        let whole = multiset(extract_elements(f, &idx, kind, Region::WholeFile).into_iter().map(|e| e.text));
        let mut parts = multiset(extract_elements(f, &idx, kind, Region::After(p)).into_iter().map(|e| e.text));
        for (s, n) in multiset(extract_elements(f, &idx, kind, Region::Before(p)).into_iter().map(|e| e.text)) {
            *parts.entry(s).or_insert(0) += n;
        }
        for (s, n) in whole {
            prop_assert!(parts.get(&s).copied().unwrap_or(0) >= n, "{} missing {:?}", f.path, s);
        }
    }
}
