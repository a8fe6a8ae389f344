//! Output bundle: report, flat table, optional plots and a hash manifest.
//!
//! Files are staged in a temporary directory next to the destination and
//! moved into place only after every file has been written.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use capprop::experiments::ExperimentReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::plot;

pub const TABLE_HEADER: [&str; 5] = ["run", "role", "kind", "name", "value"];

/// One table row. `value` is a full-precision decimal except for flag and
/// verdict rows, which carry text.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run: String,
    pub role: String,
    pub kind: &'static str,
    pub name: String,
    pub value: String,
}

fn num(v: f64) -> String {
    // Display for f64 is the shortest string that parses back to `v` and
    // never switches to exponent notation.
    format!("{v}")
}

/// Flattens a report. Sweep outputs add fit and classification rows.
pub fn table_rows(report: &ExperimentReport, with_fits: bool) -> Vec<Row> {
    let mut rows = Vec::new();
    for r in &report.records {
        let role = r.role.name().to_string();
        for (name, v) in &r.params {
            rows.push(Row {
                run: r.key.clone(),
                role: role.clone(),
                kind: "param",
                name: name.clone(),
                value: num(*v),
            });
        }
        for (name, v) in &r.metrics {
            rows.push(Row {
                run: r.key.clone(),
                role: role.clone(),
                kind: "metric",
                name: name.clone(),
                value: num(*v),
            });
        }
        for f in &r.flags {
            rows.push(Row {
                run: r.key.clone(),
                role: role.clone(),
                kind: "flag",
                name: "flag".into(),
                value: f.clone(),
            });
        }
    }
    for (name, v) in &report.summary {
        rows.push(Row {
            run: "summary".into(),
            role: "summary".into(),
            kind: "summary",
            name: name.clone(),
            value: num(*v),
        });
    }
    if with_fits {
        for f in &report.fits {
            let mut push = |name: &str, v: f64| {
                rows.push(Row {
                    run: f.name.clone(),
                    role: "fit".into(),
                    kind: "fit",
                    name: name.into(),
                    value: num(v),
                })
            };
            push("exponent", f.exponent);
            push("prefactor", f.prefactor);
            push("r2", f.r2);
            push("points", f.points as f64);
            if let Some(p) = f.predicted {
                push("predicted_exponent", p);
            }
        }
        for c in &report.classifications {
            rows.push(Row {
                run: format!("classification[p={}]", c.scaling_exponent),
                role: "classification".into(),
                kind: "classification",
                name: "verdict".into(),
                value: c.verdict.name().into(),
            });
        }
    }
    rows
}

pub fn table_csv(rows: &[Row]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record([r.run.as_str(), r.role.as_str(), r.kind, r.name.as_str(), r.value.as_str()])?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn report_json(report: &ExperimentReport) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    files: Vec<ManifestEntry<'a>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Which bundle files to emit.
#[derive(Debug, Clone, Copy)]
pub struct BundleOptions {
    pub report: bool,
    pub table: bool,
    pub plots: bool,
    pub with_fits: bool,
}

/// Renders every bundle file in memory, ending with `manifest.json`.
pub fn render(report: &ExperimentReport, opts: BundleOptions) -> io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    if opts.report {
        files.push(("report.json".to_string(), report_json(report)));
    }
    let rows = table_rows(report, opts.with_fits);
    if opts.table {
        files.push(("table.csv".to_string(), table_csv(&rows)?));
    }
    if opts.plots {
        for (name, svg) in plot::plots(&rows) {
            files.push((name, svg.into_bytes()));
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let manifest = Manifest {
        files: files
            .iter()
            .map(|(path, bytes)| ManifestEntry {
                path,
                bytes: bytes.len(),
                sha256: sha256_hex(bytes),
            })
            .collect(),
    };
    let mut m = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    m.push(b'\n');
    files.push(("manifest.json".to_string(), m));
    Ok(files)
}

/// Writes `files` into `out`, all or nothing.
pub fn write_atomically(out: &Path, files: &[(String, Vec<u8>)]) -> io::Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let stage = tempfile::Builder::new().prefix(".capprop-stage-").tempdir_in(&parent)?;
    for (name, bytes) in files {
        fs::write(stage.path().join(name), bytes)?;
    }
    if !out.exists() {
        fs::rename(stage.path(), out)?;
        return Ok(());
    }
    if !out.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::AlreadyExists,
            format!("{} exists and is not a directory", out.display()),
        ));
    }
    // Manifest last, so a complete manifest implies complete files.
    for (name, _) in files {
        fs::rename(stage.path().join(name), out.join(name))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_without_exponents() {
        for v in [0.1, 1e-20, 123456.789, 1.0 / 3.0, 2.5e17] {
            let s = num(v);
            assert!(!s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_quotes_text() {
        let rows = vec![Row {
            run: "a".into(),
            role: "primary".into(),
            kind: "flag",
            name: "flag".into(),
            value: "x, y".into(),
        }];
        let text = String::from_utf8(table_csv(&rows).unwrap()).unwrap();
        assert_eq!(text, "run,role,kind,name,value\na,primary,flag,flag,\"x, y\"\n");
    }

    #[test]
    fn atomic_write_creates_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested").join("bundle");
        write_atomically(&out, &[("a.txt".into(), b"one".to_vec())]).unwrap();
        assert_eq!(fs::read(out.join("a.txt")).unwrap(), b"one");
        write_atomically(&out, &[("a.txt".into(), b"two".to_vec())]).unwrap();
        assert_eq!(fs::read(out.join("a.txt")).unwrap(), b"two");
        let leftovers = fs::read_dir(out.parent().unwrap())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".capprop"))
            .count();
        assert_eq!(leftovers, 0);
    }
}
