//! CSV and JSON output. Files are written to a temporary sibling and renamed
//! into place, so readers never see a half-written file.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::orchestrator::{AblationRow, Summary};
use crate::report::RoundReport;
use crate::{Error, Result};

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ABLATION_FILE: &str = "ablation.csv";

/// Column order of the per-round CSV.
pub const ROUND_COLUMNS: [&str; 20] = [
    "round",
    "loss",
    "eval_loss",
    "k_a",
    "k_b",
    "participants",
    "upload_bytes",
    "upload_scalars",
    "upload_dense_scalars",
    "download_bytes",
    "download_scalars",
    "download_dense_scalars",
    "broadcast_bytes",
    "broadcast_scalars",
    "round_time_s",
    "max_comm_s",
    "gini_a",
    "gini_b",
    "overhead_ops",
    "assignment",
];

pub const ABLATION_COLUMNS: [&str; 9] = [
    "variant",
    "final_loss",
    "upload_sent",
    "upload_params",
    "upload_bytes",
    "total_bytes",
    "upload_time_s",
    "total_time_s",
    "fixed_k",
];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Renders the per-round CSV, header included.
pub fn rounds_csv(reports: &[RoundReport]) -> Result<Vec<u8>> {
    let path = Path::new(ROUNDS_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROUND_COLUMNS).map_err(|e| csv_error(path, e))?;
    for r in reports {
        let assignment = r
            .assignment()
            .iter()
            .map(|(c, s)| format!("{c}:{s}"))
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([
            r.round.to_string(),
            r.loss.to_string(),
            r.eval_loss.map(|l| l.to_string()).unwrap_or_default(),
            r.k_a.to_string(),
            r.k_b.to_string(),
            r.clients.len().to_string(),
            r.upload_bytes().to_string(),
            r.upload_scalars().to_string(),
            r.upload_dense_scalars().to_string(),
            r.download_bytes().to_string(),
            r.download_scalars().to_string(),
            r.download_dense_scalars().to_string(),
            r.broadcast_bytes.to_string(),
            r.broadcast_scalars.to_string(),
            r.time.round_total_s.to_string(),
            r.time.max_communication_s().to_string(),
            r.gini_a.to_string(),
            r.gini_b.to_string(),
            r.overhead_ops().to_string(),
            assignment,
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.into_inner().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<Vec<u8>> {
    let path = Path::new(ABLATION_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ABLATION_COLUMNS).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.variant.clone(),
            r.final_loss.to_string(),
            r.upload_sent.to_string(),
            r.upload_params.to_string(),
            r.upload_bytes.to_string(),
            r.total_bytes.to_string(),
            r.upload_time_s.to_string(),
            r.total_time_s.to_string(),
            r.fixed_k.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.into_inner().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Replaces `path` with `bytes` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes `rounds.csv` and `summary.json` into `dir`; returns both paths.
pub fn write_metrics(dir: &Path, reports: &[RoundReport], summary: &Summary) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join(ROUNDS_FILE);
    let json_path = dir.join(SUMMARY_FILE);
    write_atomic(&csv_path, &rounds_csv(reports)?)?;
    let mut json = serde_json::to_vec_pretty(summary).map_err(|e| Error::Format {
        path: json_path.clone(),
        message: e.to_string(),
    })?;
    json.push(b'\n');
    write_atomic(&json_path, &json)?;
    Ok((csv_path, json_path))
}

pub fn write_ablation(dir: &Path, rows: &[AblationRow]) -> Result<PathBuf> {
    let path = dir.join(ABLATION_FILE);
    write_atomic(&path, &ablation_csv(rows)?)?;
    Ok(path)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
