//! Golden-file checks on the stable trace export format.
//!
//! Regenerate with `AGGSIM_BLESS=1 cargo test --test golden` after an
//! intentional format or semantics change, and review the diff.

use std::path::PathBuf;

use aggsim_core::scenarios::builders::fig2_scenario;
use aggsim_core::simkernel::run;
use aggsim_core::StrategyKind;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("AGGSIM_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}; run with AGGSIM_BLESS=1", path.display()));
    assert_eq!(
        actual,
        expected,
        "trace drifted from {}; bless intentionally with AGGSIM_BLESS=1",
        path.display()
    );
}

#[test]
fn fig2_jit_trace_is_stable() {
    let out = run(&fig2_scenario(StrategyKind::Jit)).unwrap();
    check("fig2_jit.trace", &out.trace.export());
}

#[test]
fn fig2_always_on_trace_is_stable() {
    let out = run(&fig2_scenario(StrategyKind::EagerAlwaysOn)).unwrap();
    check("fig2_always_on.trace", &out.trace.export());
}

#[test]
fn trace_times_never_decrease() {
    let out = run(&fig2_scenario(StrategyKind::Jit)).unwrap();
    let mut last = aggsim_core::SimTime::ZERO;
    for r in out.trace.iter() {
        assert!(r.time >= last, "trace time went backwards at {:?}", r.rec);
        last = r.time;
    }
}
