//! Dataset directory format.
//!
//! A dataset directory holds `covariates.csv` (d rows of N comma-separated
//! values), `targets.csv` (K rows), an optional `mask.csv` (one row of 0/1,
//! 1 = inlier), and `meta.json`. Floats are written with Rust's shortest
//! round-trip formatting, so a load reproduces the stored values bit for
//! bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{Dataset, DatasetMeta};

const COVARIATES_FILE: &str = "covariates.csv";
const TARGETS_FILE: &str = "targets.csv";
const MASK_FILE: &str = "mask.csv";
const META_FILE: &str = "meta.json";

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix_csv(&ds.covariates, &dir.join(COVARIATES_FILE))?;
    write_matrix_csv(&ds.targets, &dir.join(TARGETS_FILE))?;
    if let Some(mask) = &ds.inlier_mask {
        let row: Vec<String> = mask
            .iter()
            .map(|&inlier| if inlier { "1" } else { "0" }.to_string())
            .collect();
        let path = dir.join(MASK_FILE);
        fs::write(&path, row.join(",") + "\n").map_err(|e| Error::io(&path, e))?;
    }
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(&ds.meta)
        .map_err(|e| Error::parse(&meta_path, e.to_string()))?;
    fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let covariates = read_matrix_csv(&dir.join(COVARIATES_FILE))?;
    let targets = read_matrix_csv(&dir.join(TARGETS_FILE))?;
    let mask_path = dir.join(MASK_FILE);
    let inlier_mask = if mask_path.exists() {
        let text = fs::read_to_string(&mask_path).map_err(|e| Error::io(&mask_path, e))?;
        let mut mask = Vec::new();
        for field in text.trim().split(',') {
            match field.trim() {
                "1" => mask.push(true),
                "0" => mask.push(false),
                other => {
                    return Err(Error::parse(
                        &mask_path,
                        format!("mask entries must be 0 or 1, got {other:?}"),
                    ))
                }
            }
        }
        Some(mask)
    } else {
        None
    };
    let meta_path = dir.join(META_FILE);
    let meta: DatasetMeta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.to_string()))?
    } else {
        DatasetMeta::default()
    };
    if targets.ncols() != covariates.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariates have {} columns, targets have {}",
            covariates.ncols(),
            targets.ncols()
        )));
    }
    if let Some(mask) = &inlier_mask {
        if mask.len() != covariates.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "mask length {} does not match {} samples",
                mask.len(),
                covariates.ncols()
            )));
        }
    }
    Ok(Dataset {
        covariates,
        targets,
        inlier_mask,
        meta,
    })
}

fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let mut first = true;
        for j in 0..m.ncols() {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("{}", m[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(path, format!("bad float {field:?} on line {}", lineno + 1))
            })?;
            row.push(v);
        }
        if let Some(prev) = rows.first() {
            if prev.len() != row.len() {
                return Err(Error::parse(
                    path,
                    format!("ragged row on line {}", lineno + 1),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "empty matrix file"));
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use tempfile::TempDir;

    #[test]
    fn round_trip_is_bit_exact() {
        let ds = Dataset {
            covariates: DMatrix::from_fn(3, 5, |i, j| {
                (i as f64 + 1.0) / (j as f64 + 3.0) * std::f64::consts::PI
            }),
            targets: DMatrix::from_fn(2, 5, |i, j| (i * 5 + j) as f64 * 1e-17 + 0.1),
            inlier_mask: Some(vec![true, false, true, true, true]),
            meta: DatasetMeta {
                seed: 99,
                eps: 0.2,
                nu: 1.5,
                b_bound: 10.0,
                adversary: "additive:1000".to_string(),
                sigma_desc: "identity".to_string(),
                w_true: None,
            },
        };
        let dir = TempDir::new().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        // bit-exact float round trip and exact mask/meta
        assert_eq!(ds, back);
    }

    #[test]
    fn mask_is_optional() {
        let ds = Dataset {
            covariates: DMatrix::identity(2, 2),
            targets: DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            inlier_mask: None,
            meta: DatasetMeta::default(),
        };
        let dir = TempDir::new().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert!(back.inlier_mask.is_none());
    }

    #[test]
    fn mismatched_targets_fail_to_load() {
        let dir = TempDir::new().unwrap();
        std::fs::write(dir.path().join("covariates.csv"), "1,2,3\n4,5,6\n").unwrap();
        std::fs::write(dir.path().join("targets.csv"), "1,2\n").unwrap();
        assert!(load_dataset(dir.path()).is_err());
    }
}
