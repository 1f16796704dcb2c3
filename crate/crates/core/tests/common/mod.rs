#![allow(dead_code)]

use std::path::PathBuf;

use guidefuzz::frontend::{parse_files, SourceUnit};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn bench_path(name: &str) -> PathBuf {
    repo_root().join("bench").join(name)
}

pub fn bench_unit(name: &str) -> SourceUnit {
    let text = std::fs::read_to_string(bench_path(name)).unwrap();
    parse_files(&[(name.to_string(), text)]).unwrap()
}

/// Compares `actual` with `tests/golden/<name>`. Set `UPDATE_GOLDEN=1` to
/// rewrite the file instead.
pub fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1 to create it)", path.display()));
    if expected != actual {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
        panic!(
            "{} differs from the golden file at line {}\nexpected: {:?}\nactual:   {:?}",
            name,
            line + 1,
            expected.lines().nth(line),
            actual.lines().nth(line)
        );
    }
}
