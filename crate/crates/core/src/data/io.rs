//! Native corpus format and CSV import.
//!
//! Native: `<name>.json` manifest plus `<name>.bin`, the samples' features as
//! consecutive little-endian `f64` (sample-major, then time, then the six
//! columns). Labels, domains and provenance live in the manifest.
//!
//! CSV import: a directory holding `manifest.csv` with columns
//! `file,label[,domain]` and one CSV per sample with a header line and
//! `seq_len` rows of six columns (desired x, y, z, residual x, y, z; residual
//! is desired − realized). Labels use the class names or ids of
//! [`ClassLabel`]; an empty label imports the sample unlabeled. Domain
//! defaults to `target`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassLabel, Dataset, DomainLabel, Provenance, SequenceSample};
use crate::error::{Error, Result};
use crate::NUM_FEATURES;

pub const DEFAULT_CSV_LEN: usize = 1000;
pub const CSV_COLUMNS: [&str; NUM_FEATURES] =
    ["x", "y", "z", "residual_x", "residual_y", "residual_z"];

const FORMAT: &str = "twindann-corpus";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    sample_count: usize,
    seq_len: usize,
    n_features: usize,
    dtype: String,
    byte_order: String,
    data_file: String,
    labels: Vec<Option<ClassLabel>>,
    domains: Vec<DomainLabel>,
    provenance: Provenance,
}

fn data_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `path` (JSON manifest) and its `.bin` sibling.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let seq_len = if ds.is_empty() {
        0
    } else {
        ds.check_uniform()?
    };
    let bin = data_path(path);
    let mut bytes = Vec::with_capacity(ds.len() * seq_len * NUM_FEATURES * 8);
    for s in &ds.samples {
        for v in &s.features {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        sample_count: ds.len(),
        seq_len,
        n_features: NUM_FEATURES,
        dtype: "f64".into(),
        byte_order: "little".into(),
        data_file: bin
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        labels: ds.samples.iter().map(|s| s.class_label).collect(),
        domains: ds.samples.iter().map(|s| s.domain).collect(),
        provenance: ds.provenance.clone(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Loads a native manifest, or imports a CSV directory.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        return import_csv_dir(path, DEFAULT_CSV_LEN);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::load(path, format!("corrupt manifest: {e}")))?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(Error::load(
            path,
            format!("unsupported format {} v{}", m.format, m.version),
        ));
    }
    if m.n_features != NUM_FEATURES || m.dtype != "f64" || m.byte_order != "little" {
        return Err(Error::load(path, "expected six little-endian f64 columns"));
    }
    if m.labels.len() != m.sample_count || m.domains.len() != m.sample_count {
        return Err(Error::load(
            path,
            "label/domain lists disagree with sample_count",
        ));
    }
    let bin = path.with_file_name(&m.data_file);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let per_sample = m.seq_len * NUM_FEATURES;
    if bytes.len() != m.sample_count * per_sample * 8 {
        return Err(Error::load(
            &bin,
            format!(
                "expected {} bytes for {} samples, found {}",
                m.sample_count * per_sample * 8,
                m.sample_count,
                bytes.len()
            ),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let samples = (0..m.sample_count)
        .map(|i| {
            let features = values[i * per_sample..(i + 1) * per_sample].to_vec();
            SequenceSample::new(features, m.seq_len, m.labels[i], m.domains[i])
                .map_err(|e| Error::load(&bin, format!("sample {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        provenance: m.provenance,
    })
}

fn read_sample_csv(path: &Path, seq_len: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, e.to_string()))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::load(path, e.to_string()))?;
    if header.len() != NUM_FEATURES {
        return Err(Error::load(
            path,
            format!(
                "header has {} columns, expected {NUM_FEATURES}",
                header.len()
            ),
        ));
    }
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::load(path, "missing header line"));
    }
    let mut features = Vec::with_capacity(seq_len * NUM_FEATURES);
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(path, format!("row {}: {e}", i + 2)))?;
        if rec.len() != NUM_FEATURES {
            return Err(Error::load(
                path,
                format!("row {} has {} columns", i + 2, rec.len()),
            ));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::load(path, format!("row {}: bad number {field:?}", i + 2)))?;
            features.push(v);
        }
        rows += 1;
    }
    if rows != seq_len {
        return Err(Error::load(
            path,
            format!("{rows} rows, expected {seq_len}"),
        ));
    }
    Ok(features)
}

/// Imports a directory of per-sample CSV files described by `manifest.csv`.
pub fn import_csv_dir(dir: &Path, seq_len: usize) -> Result<Dataset> {
    let manifest = dir.join("manifest.csv");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(&manifest)
        .map_err(|e| Error::load(&manifest, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::load(&manifest, e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(file_col), Some(label_col)) = (col("file"), col("label")) else {
        return Err(Error::load(
            &manifest,
            "header must contain `file` and `label`",
        ));
    };
    let domain_col = col("domain");

    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(&manifest, format!("row {}: {e}", i + 2)))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let file = dir.join(field(file_col));
        let label = match field(label_col) {
            "" => None,
            s => Some(
                s.parse::<ClassLabel>()
                    .map_err(|e| Error::load(&manifest, format!("row {}: {e}", i + 2)))?,
            ),
        };
        let domain = match domain_col.map(field) {
            None | Some("") => DomainLabel::Target,
            Some(s) => s
                .parse()
                .map_err(|e| Error::load(&manifest, format!("row {}: {e}", i + 2)))?,
        };
        let features = read_sample_csv(&file, seq_len)?;
        samples.push(
            SequenceSample::new(features, seq_len, label, domain)
                .map_err(|e| Error::load(&file, e.to_string()))?,
        );
    }
    Ok(Dataset {
        samples,
        provenance: Provenance::Loaded {
            path: dir.display().to_string(),
        },
    })
}
