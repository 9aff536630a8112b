//! Embedding file formats and the 2D SVD projection used for plots.
//!
//! Three formats share one logical layout (ordered rows, one modality):
//!
//! - CSV: header `id,modality,v0,...,v{d-1}`, values with 17 significant digits
//! - JSONL: one `{"id": .., "modality": .., "values": [..]}` object per line
//! - BIN: magic `MGAP`, little-endian `u32` version, `u32` rows, `u32` dim,
//!   then (version 2 only) a `u32` byte length and the UTF-8 modality label,
//!   then row-major little-endian `f32` values

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numcore::{svd, Mat};
use crate::{EmbeddingSet, Error, Result};

pub const BIN_MAGIC: &[u8; 4] = b"MGAP";
/// Version 1 carries no modality label; version 2 appends one after `dim`.
pub const BIN_VERSION_PLAIN: u32 = 1;
pub const BIN_VERSION_LABELLED: u32 = 2;

const DEFAULT_MODALITY: &str = "unknown";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Csv,
    Jsonl,
    Bin,
}

impl EmbeddingFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        ext.parse().map_err(|_| {
            Error::parse(
                path.display().to_string(),
                "cannot infer format from extension (expected .csv, .jsonl or .bin)",
            )
        })
    }
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EmbeddingFormat::Csv),
            "jsonl" | "ndjson" => Ok(EmbeddingFormat::Jsonl),
            "bin" => Ok(EmbeddingFormat::Bin),
            other => Err(Error::parse("format", format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonlRow {
    id: String,
    modality: String,
    values: Vec<f64>,
}

/// Reads an embedding file, inferring the format from its extension.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    read_embeddings_with(path, None, None)
}

/// Reads an embedding file. `modality` overrides whatever label the file carries.
pub fn read_embeddings_with(
    path: impl AsRef<Path>,
    format: Option<EmbeddingFormat>,
    modality: Option<&str>,
) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => EmbeddingFormat::from_path(path)?,
    };
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let (rows, dim, label) = match format {
        EmbeddingFormat::Csv => read_csv(file)?,
        EmbeddingFormat::Jsonl => read_jsonl(file)?,
        EmbeddingFormat::Bin => read_bin(file)?,
    };
    let n = rows.len() / dim.max(1);
    let label = modality
        .map(str::to_string)
        .or(label)
        .unwrap_or_else(|| DEFAULT_MODALITY.to_string());
    EmbeddingSet::new(Mat::new(n, dim, rows)?, label)
}

fn check_modality(current: &mut Option<String>, found: &str, location: &str) -> Result<()> {
    match current {
        None => *current = Some(found.to_string()),
        Some(m) if m == found => {}
        Some(m) => {
            return Err(Error::parse(
                location,
                format!("mixed modalities '{m}' and '{found}' in one file"),
            ))
        }
    }
    Ok(())
}

fn read_csv(file: File) -> Result<(Vec<f64>, usize, Option<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let header = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "modality" {
        return Err(Error::parse("line 1", "header must be id,modality,v0,...,v{d-1}"));
    }
    let dim = header.len() - 2;
    let mut values = Vec::new();
    let mut modality = None;
    for (row, record) in reader.records().enumerate() {
        let location = format!("row {row} (line {})", row + 2);
        let record = record.map_err(|e| Error::parse(&location, e.to_string()))?;
        if record.len() != dim + 2 {
            return Err(Error::parse(
                &location,
                format!("expected {dim} values, found {}", record.len().saturating_sub(2)),
            ));
        }
        check_modality(&mut modality, &record[1], &location)?;
        for field in record.iter().skip(2) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(&location, format!("'{field}' is not a number")))?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::parse("csv", "no data rows"));
    }
    Ok((values, dim, modality))
}

fn read_jsonl(file: File) -> Result<(Vec<f64>, usize, Option<String>)> {
    let mut values = Vec::new();
    let mut dim = None;
    let mut modality = None;
    let mut row = 0;
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("row {row} (line {})", line_no + 1);
        let parsed: JsonlRow =
            serde_json::from_str(&line).map_err(|e| Error::parse(&location, e.to_string()))?;
        let d = *dim.get_or_insert(parsed.values.len());
        if parsed.values.len() != d {
            return Err(Error::RowDimensionMismatch {
                row,
                expected: d,
                found: parsed.values.len(),
            });
        }
        check_modality(&mut modality, &parsed.modality, &location)?;
        values.extend(parsed.values);
        row += 1;
    }
    match dim {
        Some(d) if d > 0 => Ok((values, d, modality)),
        _ => Err(Error::parse("jsonl", "no data rows")),
    }
}

fn read_u32(buf: &[u8], offset: &mut usize) -> Result<u32> {
    let bytes = buf
        .get(*offset..*offset + 4)
        .ok_or_else(|| Error::parse(format!("byte {offset}"), "truncated header"))?;
    *offset += 4;
    Ok(u32::from_le_bytes(bytes.try_into().expect("4 bytes")))
}

fn read_bin(mut file: File) -> Result<(Vec<f64>, usize, Option<String>)> {
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    if buf.len() < 4 || &buf[..4] != BIN_MAGIC {
        return Err(Error::parse("byte 0", "missing MGAP magic"));
    }
    let mut offset = 4;
    let version = read_u32(&buf, &mut offset)?;
    let rows = read_u32(&buf, &mut offset)? as usize;
    let dim = read_u32(&buf, &mut offset)? as usize;
    let modality = match version {
        BIN_VERSION_PLAIN => None,
        BIN_VERSION_LABELLED => {
            let len = read_u32(&buf, &mut offset)? as usize;
            let bytes = buf
                .get(offset..offset + len)
                .ok_or_else(|| Error::parse(format!("byte {offset}"), "truncated modality label"))?;
            offset += len;
            Some(
                String::from_utf8(bytes.to_vec())
                    .map_err(|_| Error::parse(format!("byte {offset}"), "modality is not UTF-8"))?,
            )
        }
        v => return Err(Error::parse("byte 4", format!("unsupported version {v}"))),
    };
    let expected = rows * dim * 4;
    let body = &buf[offset..];
    if body.len() != expected {
        return Err(Error::parse(
            format!("byte {offset}"),
            format!("expected {expected} value bytes, found {}", body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok((values, dim, modality))
}

/// Writes `set` in `format`. BIN files are written as version 2 (labelled).
pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match format {
        EmbeddingFormat::Csv => {
            write!(w, "id,modality")?;
            for j in 0..set.dim() {
                write!(w, ",v{j}")?;
            }
            writeln!(w)?;
            let modality = csv_field(set.modality());
            for (i, row) in set.vectors().row_iter().enumerate() {
                write!(w, "{i},{modality}")?;
                for v in row {
                    write!(w, ",{v:.16e}")?;
                }
                writeln!(w)?;
            }
        }
        EmbeddingFormat::Jsonl => {
            for (i, row) in set.vectors().row_iter().enumerate() {
                let line = JsonlRow {
                    id: i.to_string(),
                    modality: set.modality().to_string(),
                    values: row.to_vec(),
                };
                serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
                writeln!(w)?;
            }
        }
        EmbeddingFormat::Bin => write_bin(set, &mut w, BIN_VERSION_LABELLED)?,
    }
    w.flush()?;
    Ok(())
}

/// BIN writer with an explicit version (1 omits the modality label).
pub fn write_bin(set: &EmbeddingSet, w: &mut impl Write, version: u32) -> Result<()> {
    let to_u32 = |x: usize| {
        u32::try_from(x).map_err(|_| Error::InvalidConfig(format!("{x} does not fit the BIN header")))
    };
    w.write_all(BIN_MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&to_u32(set.len())?.to_le_bytes())?;
    w.write_all(&to_u32(set.dim())?.to_le_bytes())?;
    match version {
        BIN_VERSION_PLAIN => {}
        BIN_VERSION_LABELLED => {
            let label = set.modality().as_bytes();
            w.write_all(&to_u32(label.len())?.to_le_bytes())?;
            w.write_all(label)?;
        }
        v => return Err(Error::InvalidConfig(format!("unsupported BIN version {v}"))),
    }
    for &v in set.vectors().as_slice() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Paths of embedding files plus their formats, for callers that need both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub path: PathBuf,
    pub format: EmbeddingFormat,
    pub dim: usize,
    pub count: usize,
    pub modality: String,
}

impl EmbeddingFile {
    pub fn describe(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let set = read_embeddings(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            format: EmbeddingFormat::from_path(path)?,
            dim: set.dim(),
            count: set.len(),
            modality: set.modality().to_string(),
        })
    }
}

/// Projects the stacked, globally centred sets onto their top two right
/// singular vectors. Returns one `n_i × 2` matrix per input set.
///
/// The singular vectors come from the `d × d` scatter matrix, so the cost is
/// independent of the number of rows beyond one pass to form it.
pub fn project_2d(sets: &[EmbeddingSet]) -> Result<Vec<Mat>> {
    let first = sets.first().ok_or(Error::EmptyBatch)?;
    let d = first.dim();
    for s in sets {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
    }
    let total: usize = sets.iter().map(EmbeddingSet::len).sum();
    let mut mean = vec![0.0; d];
    for s in sets {
        for r in s.vectors().row_iter() {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= total as f64);

    let centred: Vec<Mat> = sets
        .iter()
        .map(|s| {
            let mut c = s.vectors().clone();
            for i in 0..c.rows() {
                c.row_mut(i).iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
            }
            c
        })
        .collect();
    let mut scatter = Mat::zeros(d, d);
    for c in &centred {
        let part = c.t_matmul(c)?;
        scatter
            .as_mut_slice()
            .iter_mut()
            .zip(part.as_slice())
            .for_each(|(a, b)| *a += b);
    }
    let basis = svd(&scatter)?.u;
    let k = d.min(2);
    centred
        .iter()
        .map(|c| {
            let mut out = Mat::zeros(c.rows(), 2);
            for i in 0..c.rows() {
                for a in 0..k {
                    out[(i, a)] = (0..d).map(|j| c[(i, j)] * basis[(j, a)]).sum();
                }
            }
            Ok(out)
        })
        .collect()
}
