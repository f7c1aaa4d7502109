//! Runs every example binary built alongside the tests.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 9] = [
    "simulate",
    "decomposition",
    "compare_models",
    "terminal_event",
    "brier_equivalence",
    "cross_validation",
    "ingest_csv",
    "oracle",
    "estimators",
];

fn examples_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("examples")
}

#[test]
fn all_examples_run() {
    let dir = examples_dir();
    for name in EXAMPLES {
        let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        assert!(path.exists(), "example {name} not built at {}", path.display());
        let out = Command::new(&path).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
