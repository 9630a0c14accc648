//! Pinned-seed reports compared against files in `tests/golden/`.
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p cocycle-cli --test golden`.

use std::path::PathBuf;

use cocycle_cli::{run, Command, Context, Counterexample, ExperimentConfig};

fn dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(sub)
}

fn check(cmd: Command, config: &str, horizon: f64) {
    let text = std::fs::read_to_string(dir("configs").join(config)).unwrap();
    let ctx = Context::new(ExperimentConfig::parse(&text).unwrap(), None, Some(horizon)).unwrap();
    let report = run(cmd, &ctx).unwrap();
    let json = report.to_json(&ctx, 0);
    let path = dir("tests/golden").join(format!("{}.json", cmd.name()));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &json).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1 to create it", path.display()));
    assert!(json == expected, "{} differs from {}", cmd.name(), path.display());
}

#[test]
fn simulate() {
    check(Command::Simulate, "simulate.toml", 20.0);
}

#[test]
fn birkhoff() {
    check(Command::Birkhoff, "birkhoff.toml", 400.0);
}

#[test]
fn dlim() {
    check(Command::Dlim, "dlim.toml", 200.0);
}

#[test]
fn exceptional() {
    check(Command::Exceptional, "exceptional.toml", 200.0);
}

#[test]
fn atkinson() {
    check(Command::Atkinson, "atkinson.toml", 300.0);
}

#[test]
fn kingman() {
    check(Command::Kingman, "kingman.toml", 300.0);
}

#[test]
fn met() {
    check(Command::Met, "met.toml", 300.0);
}

#[test]
fn track() {
    check(Command::Track, "track.toml", 300.0);
}

#[test]
fn counterexample_ex1() {
    check(Command::Counterexample(Counterexample::Ex1), "ex1.toml", 100.0);
}

#[test]
fn counterexample_ex2() {
    check(Command::Counterexample(Counterexample::Ex2), "ex2.toml", 300.0);
}
