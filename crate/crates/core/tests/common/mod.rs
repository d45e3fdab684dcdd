#![allow(dead_code)]

use std::path::PathBuf;

use repoprompt::dataset::{middle_col, HoleSpec};
use repoprompt::repo::{build_repo_index, PromptSource, RepoIndex};

pub const REPO_ID: &str = "minirepo";

pub fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minirepo")
}

pub fn mini_index() -> RepoIndex {
    let idx = build_repo_index(&fixture_root()).expect("fixture index");
    assert_eq!(idx.repo_id, REPO_ID);
    idx
}

pub const APP: &str = "src/org/demo/app/App.java";
pub const APP_CONFIG: &str = "src/org/demo/app/AppConfig.java";
pub const COLORED: &str = "src/org/demo/app/ColoredCircle.java";
pub const LEGACY_MATH: &str = "src/org/demo/legacy/MathUtil.java";
pub const CIRCLE: &str = "src/org/demo/model/Circle.java";
pub const SHAPE: &str = "src/org/demo/model/Shape.java";
pub const FACTORY: &str = "src/org/demo/model/ShapeFactory.java";
pub const SQUARE: &str = "src/org/demo/model/Square.java";
pub const MATH: &str = "src/org/demo/util/MathUtil.java";
pub const STRINGS: &str = "src/org/demo/util/StringUtil.java";

/// The hole the miner would place on `line` of `file`.
pub fn hole_at(index: &RepoIndex, file: &str, line: usize) -> HoleSpec {
    let text = index.source(file).expect("fixture file").line(line);
    let col = middle_col(text).expect("non-blank line");
    HoleSpec::new(&index.repo_id, file, line, col, &text.trim_end()[col..])
}

/// Hand-derived rankings, one entry per source in `PromptSource::ALL` order.
///
/// Worked out from the fixture by reading off import usage lines, e.g. for
/// App.java line 11: Shape is used on line 9, ShapeFactory on 9, MathUtil on
/// 11, so imports rank MathUtil (0) then Shape, ShapeFactory (2, path order).
pub fn golden_rankings() -> Vec<((&'static str, usize), [Vec<&'static str>; 10])> {
    vec![
        (
            (APP, 11),
            [
                vec![APP],
                vec![],
                vec![MATH, SHAPE, FACTORY],
                // AppConfig shares MathUtil (used at 11), ColoredCircle shares Shape (used at 9)
                vec![APP_CONFIG, COLORED],
                vec![APP_CONFIG],
                vec![],
                // StringUtil 2 usages, the rest 1 each in path order
                vec![STRINGS, CIRCLE, SHAPE, MATH],
                vec![MATH, STRINGS],
                vec![],
                vec![],
            ],
        ),
        (
            (APP, 9),
            [
                vec![APP],
                vec![],
                vec![SHAPE, FACTORY, MATH],
                vec![COLORED, APP_CONFIG],
                vec![APP_CONFIG],
                vec![],
                vec![STRINGS, CIRCLE, SHAPE, MATH],
                vec![MATH, STRINGS],
                vec![],
                vec![],
            ],
        ),
        (
            (CIRCLE, 15),
            [
                vec![CIRCLE],
                vec![SHAPE],
                vec![MATH, STRINGS],
                // Square shares two imports, Shape one, both at distance 0
                vec![SQUARE, SHAPE, FACTORY],
                vec![COLORED],
                vec![COLORED],
                // StringUtil: Square 1 + ShapeFactory 2; MathUtil: Square 1 + Shape 1
                vec![STRINGS, MATH],
                // ColoredCircle imports Circle, which is the hole file
                vec![SHAPE, STRINGS],
                vec![MATH],
                vec![SHAPE, STRINGS],
            ],
        ),
        (
            (SHAPE, 10),
            [
                vec![SHAPE],
                vec![],
                vec![MATH],
                vec![CIRCLE, SQUARE, FACTORY],
                vec![FACTORY],
                vec![CIRCLE, SQUARE],
                vec![STRINGS, MATH],
                vec![STRINGS],
                vec![],
                vec![MATH, STRINGS],
            ],
        ),
        (
            (COLORED, 11),
            [
                vec![COLORED],
                vec![CIRCLE],
                vec![STRINGS, SHAPE, CIRCLE],
                vec![APP_CONFIG, APP],
                vec![CIRCLE],
                vec![],
                vec![MATH, SHAPE, FACTORY, STRINGS],
                vec![MATH, STRINGS],
                vec![MATH, STRINGS],
                vec![],
            ],
        ),
        (
            (STRINGS, 4),
            [
                vec![STRINGS],
                vec![],
                vec![],
                vec![MATH],
                // zero shared imports: path order, the duplicate included
                vec![LEGACY_MATH, MATH],
                vec![],
                vec![],
                vec![],
                vec![],
                vec![],
            ],
        ),
    ]
}

pub fn check_rankings(index: &RepoIndex) -> Vec<String> {
    let mut mismatches = Vec::new();
    for ((file, line), expected) in golden_rankings() {
        let hole = hole_at(index, file, line);
        for (source, want) in PromptSource::ALL.iter().zip(expected.iter()) {
            let got = index.rank_source_files(*source, &hole);
            if got != *want {
                mismatches.push(format!("{file}:{line} {source}: got {got:?}, want {want:?}"));
            }
        }
    }
    mismatches
}

/// Hand-listed extraction results for Circle.java and ShapeFactory.java.
pub fn check_parse(index: &RepoIndex) -> Vec<String> {
    let mut bad = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            bad.push(what.to_string());
        }
    };

    let c = index.syntax(CIRCLE).unwrap();
    expect("circle package", c.package_name.as_deref() == Some("org.demo.model"));
    let imports: Vec<(&str, usize)> = c.imports.iter().map(|i| (i.path.as_str(), i.line)).collect();
    expect("circle imports", imports == [("org.demo.util.MathUtil", 2), ("org.demo.util.StringUtil", 3)]);
    expect("circle classes", c.classes.len() == 1 && c.classes[0].name == "Circle");
    expect("circle extends", c.classes[0].extends.as_deref() == Some("Shape"));
    expect(
        "circle class span",
        (c.classes[0].span.start_line, c.classes[0].span.end_line) == (5, 17),
    );
    let sigs: Vec<&str> = c.methods.iter().map(|m| m.signature.as_str()).collect();
    expect("circle methods", sigs == ["public Circle(double radius)", "public double area()"]);
    // annotation is not part of the declaration span
    expect("circle area span", c.methods[1].span.start_line == 14);
    let fields: Vec<&str> = c.field_declarations.iter().map(|f| f.text.as_str()).collect();
    expect("circle fields", fields == ["private final double radius;"]);
    let strings: Vec<&str> = c.string_literals.iter().map(|s| s.text.as_str()).collect();
    expect("circle strings", strings == ["\"circle\""]);
    let types: Vec<(&str, usize)> = c.type_identifiers.iter().map(|o| (o.name.as_str(), o.pos.line)).collect();
    expect("circle type identifiers", types == [("Shape", 5)]);
    let idents: Vec<(&str, usize)> = c.identifiers.iter().map(|o| (o.name.as_str(), o.pos.line)).collect();
    expect(
        "circle identifiers",
        idents
            == [
                ("radius", 6),
                ("Circle", 8),
                ("radius", 8),
                ("radius", 9),
                ("radius", 9),
                ("name", 10),
                ("StringUtil", 10),
                ("label", 10),
                ("area", 14),
                ("MathUtil", 15),
                ("PI", 15),
                ("radius", 15),
                ("radius", 15),
            ],
    );

    let f = index.syntax(FACTORY).unwrap();
    let sigs: Vec<&str> = f.methods.iter().map(|m| m.signature.as_str()).collect();
    expect("factory methods", sigs == ["public static Shape create(String kind, double size)"]);
    expect("factory fields", f.field_declarations.is_empty());
    let strings: Vec<&str> = f.string_literals.iter().map(|s| s.text.as_str()).collect();
    expect("factory strings", strings == ["\"Circle\""]);
    let types: Vec<(&str, usize)> = f.type_identifiers.iter().map(|o| (o.name.as_str(), o.pos.line)).collect();
    expect(
        "factory type identifiers",
        types == [("Shape", 5), ("String", 5), ("String", 6), ("Circle", 8), ("Square", 10)],
    );
    bad
}

/// A generated repository with long files, so that every budget binds.
pub fn synthetic_index(seed: u64, files: usize, methods: usize) -> RepoIndex {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let words = ["alpha", "beta", "gamma", "delta", "count", "total", "buffer", "index", "value", "node"];
    let mut sources = Vec::new();
    for f in 0..files {
        let pkg = if f % 2 == 0 { "gen.core" } else { "gen.extra" };
        let name = format!("Gen{f}Worker");
        let mut text = format!("package {pkg};\n\n");
        for g in 0..files {
            if g != f {
                let p = if g % 2 == 0 { "gen.core" } else { "gen.extra" };
                text.push_str(&format!("import {p}.Gen{g}Worker;\n"));
            }
        }
        let parent = if f > 0 { format!(" extends Gen{}Worker", f - 1) } else { String::new() };
        text.push_str(&format!("\npublic class {name}{parent} {{\n"));
        for k in 0..4 {
            text.push_str(&format!("    private int {}{k} = {};\n", words[k], rng.gen_range(0..100)));
        }
        for m in 0..methods {
            let w = words[rng.gen_range(0..words.len())];
            text.push_str(&format!("\n    public int {w}{m}(int x) {{\n"));
            for _ in 0..rng.gen_range(2..6) {
                let a = words[rng.gen_range(0..words.len())];
                let other = rng.gen_range(0..files);
                text.push_str(&format!(
                    "        x = x + Gen{other}Worker.class.getName().length() + {a}{};\n",
                    rng.gen_range(0..4)
                ));
            }
            text.push_str(&format!("        System.out.println(\"{w} step {m}\");\n"));
            text.push_str("        return x;\n    }\n");
        }
        text.push_str("}\n");
        let dir = pkg.replace('.', "/");
        sources.push(repoprompt::syntax::SourceFile::new(format!("src/{dir}/{name}.java"), text));
    }
    RepoIndex::from_sources("synthetic", sources)
}
