//! Writing reports to disk.

use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::commands::{Context, Report};

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes `<command>.json` and every attachment into `dir`, creating it if
/// needed. Returns the written paths.
pub fn write_report(dir: &Path, report: &Report, ctx: &Context, timestamp: u64) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(report.files.len() + 1);
    let json = dir.join(format!("{}.json", report.command));
    std::fs::write(&json, report.to_json(ctx, timestamp))?;
    written.push(json);
    for (name, body) in &report.files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Drops the `timestamp` field so two runs can be compared.
pub fn strip_timestamp(json: &str) -> serde_json::Result<serde_json::Value> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timestamp");
    }
    Ok(v)
}
