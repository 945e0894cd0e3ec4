//! Writing study results to a directory.
//!
//! Every study writes `summary.json`, a `summary.txt` key-value file, one CSV
//! per table, one two-column `.dat` file per table curve, CSV snapshots, and
//! `index.txt` listing all of them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::csvio::{write_density_csv, write_phase_space_csv};
use crate::error::{Error, Result};
use crate::studies::{Bound, RunReport, Snapshot, StudyOutput, Table};

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn table_csv(t: &Table) -> String {
    let mut s = t.columns.join(",");
    s.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn curve_dat(t: &Table, col: usize) -> String {
    let mut s = format!("# {} {}\n", t.columns[0], t.columns[col]);
    for row in &t.rows {
        s.push_str(&format!("{:e} {:e}\n", row[0], row[col]));
    }
    s
}

fn bound_json(b: &Bound) -> Value {
    match *b {
        Bound::AtMost(t) => json!({"at_most": t}),
        Bound::AtLeast(t) => json!({"at_least": t}),
        Bound::Above(t) => json!({"above": t}),
        Bound::Within { target, tolerance } => json!({"target": target, "tolerance": tolerance}),
    }
}

pub fn summary_json(report: &RunReport) -> Value {
    let metrics: Vec<Value> = report
        .metrics
        .iter()
        .map(|m| {
            json!({
                "name": m.name,
                "value": m.value,
                "bound": m.bound.as_ref().map(bound_json),
                "passed": m.passed(),
                "note": m.note,
            })
        })
        .collect();
    json!({
        "study": report.study,
        "scenario_hash": report.scenario_hash,
        "passed": report.passed(),
        "wall_time_s": report.wall_time,
        "metrics": metrics,
        "seeds": report.seeds,
        "warnings": report.warnings,
    })
}

pub fn summary_text(report: &RunReport) -> String {
    let mut s = format!("study = {}\n", report.study);
    if let Some(h) = &report.scenario_hash {
        s.push_str(&format!("scenario_hash = {h}\n"));
    }
    s.push_str(&format!("passed = {}\n", report.passed()));
    s.push_str(&format!("wall_time_s = {:.3}\n", report.wall_time));
    for m in &report.metrics {
        s.push_str(&format!("{} = {:e}\n", m.name, m.value));
        if let Some(b) = &m.bound {
            let verdict = if m.passed() == Some(true) { "pass" } else { "fail" };
            s.push_str(&format!("{}.required = {b}\n{}.verdict = {verdict}\n", m.name, m.name));
        }
    }
    for (k, v) in &report.seeds {
        s.push_str(&format!("seed.{k} = {v}\n"));
    }
    for (i, w) in report.warnings.iter().enumerate() {
        s.push_str(&format!("warning.{i} = {w}\n"));
    }
    s
}

/// Write everything in `out` below `dir`; returns the files written.
pub fn emit_outputs(dir: &Path, out: &StudyOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = Vec::new();
    let mut put = |name: String, text: &str| -> Result<()> {
        write_file(&dir.join(&name), text)?;
        names.push(name);
        Ok(())
    };
    let json = serde_json::to_string_pretty(&summary_json(&out.report)).expect("report serializes");
    put("summary.json".into(), &(json + "\n"))?;
    put("summary.txt".into(), &summary_text(&out.report))?;
    for t in &out.tables {
        put(format!("{}.csv", t.name), &table_csv(t))?;
        for col in 1..t.columns.len() {
            put(format!("{}_{}.dat", t.name, t.columns[col]), &curve_dat(t, col))?;
        }
    }
    for (name, snap) in &out.snapshots {
        let file = format!("snapshot_{name}.csv");
        let path = dir.join(&file);
        match snap {
            Snapshot::Density(f) => write_density_csv(&path, f)?,
            Snapshot::PhaseSpace(f) => write_phase_space_csv(&path, f)?,
        }
        names.push(file);
    }
    names.sort();
    let index = dir.join("index.txt");
    write_file(&index, &(names.join("\n") + "\n"))?;
    let mut files: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    files.push(index);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::studies::{run_segment_check, run_void_study, Metric};
    use crate::causet::SprinkleRegion;

    #[test]
    fn writes_index_and_summaries() {
        let dir = tempfile::tempdir().unwrap();
        let (out, _) = run_void_study(&SprinkleRegion::ball(0.5), 1000, 1).unwrap();
        let files = emit_outputs(dir.path(), &out).unwrap();
        let index = fs::read_to_string(dir.path().join("index.txt")).unwrap();
        for f in &files[..files.len() - 1] {
            assert!(index.contains(f.file_name().unwrap().to_str().unwrap()));
            assert!(f.exists());
        }
        let csv = fs::read_to_string(dir.path().join("void.csv")).unwrap();
        assert!(csv.starts_with("dr,rho,duration,trials,empirical,stderr,exact,bare\n"));
        let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["study"], "void");
        assert_eq!(json["seeds"]["sprinkle"], 1);
        assert!(dir.path().join("void_empirical.dat").exists());
    }

    #[test]
    fn failures_carry_threshold_and_value() {
        let mut out = run_segment_check(2, 10).unwrap();
        out.report.metrics.push(Metric::judged("made_up", 3.0, Bound::AtMost(1.0)));
        let text = summary_text(&out.report);
        assert!(text.contains("made_up = 3e0\nmade_up.required = <= 1e0\nmade_up.verdict = fail\n"));
        assert!(text.contains("passed = false"));
    }

    #[test]
    fn output_is_deterministic() {
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let (out, _) = run_void_study(&SprinkleRegion::ball(0.7), 2000, 9).unwrap();
            emit_outputs(dir.path(), &out).unwrap();
            fs::read(dir.path().join("void.csv")).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let (out, _) = run_void_study(&SprinkleRegion::ball(0.5), 100, 1).unwrap();
        let err = emit_outputs(&blocker.join("sub"), &out).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
