// SPDX-License-Identifier: Apache-2.0

//! Output files: atomic writes and the edit run-directory layout.
//!
//! ```text
//! <out>/plan.json
//! <out>/round-<n>/plan.json
//! <out>/round-<n>/trajectory.json
//! <out>/round-<n>/trajectory.csv
//! <out>/events.jsonl
//! <out>/result.json
//! ```

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::instruction_parser::EditPlan;
use crate::uev::EditResult;

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Renders rows under a fixed header. The header is written even when there are no rows.
pub fn csv_table<R: serde::Serialize>(
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("rows are flat records");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn write_plan(out: &Path, plan: &EditPlan) -> Result<()> {
    write_atomic(&out.join("plan.json"), plan.to_json().as_bytes())
}

pub fn write_run_dir(out: &Path, result: &EditResult) -> Result<()> {
    let first = &result.rounds.first().expect("at least one round").plan;
    write_plan(out, first)?;
    for r in &result.rounds {
        let dir = out.join(format!("round-{}", r.round));
        write_atomic(&dir.join("plan.json"), r.plan.to_json().as_bytes())?;
        write_atomic(
            &dir.join("trajectory.json"),
            r.trajectory.to_json().as_bytes(),
        )?;
        write_atomic(
            &dir.join("trajectory.csv"),
            r.trajectory.to_csv().as_bytes(),
        )?;
    }
    let mut events = String::new();
    for e in &result.events {
        events.push_str(&serde_json::to_string(e).map_err(|e| Error::json("event", e))?);
        events.push('\n');
    }
    write_atomic(&out.join("events.jsonl"), events.as_bytes())?;
    write_json(&out.join("result.json"), &result.summary())
}
