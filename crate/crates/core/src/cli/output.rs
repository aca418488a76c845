use std::fs;
use std::io::Write;
use std::path::Path;

use crate::detect::{BifurcationReport, ContinuationRecord};
use crate::error::Result;
use crate::reduction::{format_float, MGrid};

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn report_json(report: &BifurcationReport) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn grid_csv(grid: &MGrid) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)?;
    Ok(buf)
}

/// One row per continuation step: `zero, eps, displacement, distance, converged,
/// iterations, naive_iterations`.
pub fn continuation_csv(records: &[ContinuationRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["zero", "eps", "displacement", "distance", "converged", "iterations", "naive_iterations"])?;
    for (i, rec) in records.iter().enumerate() {
        for s in &rec.steps {
            w.write_record([
                i.to_string(),
                format_float(s.eps),
                format_float(s.residual),
                format_float(s.distance),
                s.converged.to_string(),
                s.iterations.to_string(),
                s.naive_iterations.map(|n| n.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes `report.json`, `m_grid.csv` (when a grid exists) and `continuation.csv` into `dir`.
pub fn write_analysis(dir: &Path, report: &BifurcationReport, grid: Option<&MGrid>) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(grid) = grid {
        write_atomic(&dir.join("m_grid.csv"), &grid_csv(grid)?)?;
    }
    write_atomic(&dir.join("continuation.csv"), &continuation_csv(&report.continuations)?)?;
    write_atomic(&dir.join("report.json"), &report_json(report)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        let entries: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
