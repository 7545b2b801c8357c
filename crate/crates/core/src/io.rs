//! Dataset ingestion and artifact serialization.
//!
//! Tabular outputs are CSV with a header row. Floats are written in Rust's
//! shortest round-trip form, so reading a file back recovers the values
//! bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::FeatureBank;
use crate::lsh::HashCode;
use crate::meanfield::DensityGrid;
use crate::measure::{ParticleEnsemble, SupportInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// `label,x_1,...,x_d` per row; a non-numeric first row is a header.
    Csv,
    /// `label idx:value ...` with 1-based indices; missing entries are 0.
    Libsvm,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" | "svmlight" => Ok(DataFormat::Libsvm),
            other => Err(Error::InvalidParameter {
                name: "format",
                reason: format!("unknown data format `{other}`"),
            }),
        }
    }
}

fn parse_field(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        reason: format!("{what} `{}` is not a number", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            reason: format!("{what} `{}` is not finite", s.trim()),
        });
    }
    Ok(v)
}

/// Map raw labels to {-1, +1}. A {0, 1} column is remapped with a warning;
/// anything else is rejected with the offending line.
fn normalize_labels(raw: Vec<(usize, f64)>) -> Result<Vec<f64>> {
    let binary01 = raw.iter().all(|(_, y)| *y == 0.0 || *y == 1.0);
    let has_zero = raw.iter().any(|(_, y)| *y == 0.0);
    if binary01 && has_zero {
        log::warn!("labels are 0/1; mapping 0 to -1");
        return Ok(raw
            .into_iter()
            .map(|(_, y)| if y == 0.0 { -1.0 } else { 1.0 })
            .collect());
    }
    raw.into_iter()
        .map(|(line, y)| {
            if y == 1.0 || y == -1.0 {
                Ok(y)
            } else {
                Err(Error::Parse {
                    line,
                    reason: format!("label {y} is not -1/+1 (or 0/1)"),
                })
            }
        })
        .collect()
}

fn build_dataset(rows: Vec<(usize, Vec<f64>)>, labels: Vec<(usize, f64)>) -> Result<LabeledDataset> {
    if rows.is_empty() {
        return Err(Error::InvalidDataset("no data rows".into()));
    }
    let dim = rows[0].1.len();
    if let Some((line, r)) = rows.iter().find(|(_, r)| r.len() != dim) {
        return Err(Error::Parse {
            line: *line,
            reason: format!("expected {dim} features, found {}", r.len()),
        });
    }
    let labels = normalize_labels(labels)?;
    LabeledDataset::new(rows.into_iter().map(|(_, r)| r).collect(), labels)
}

pub fn read_csv_dataset<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                reason: "need a label and at least one feature".into(),
            });
        }
        labels.push((line, parse_field(&rec[0], line, "label")?));
        let row = rec
            .iter()
            .skip(1)
            .map(|f| parse_field(f, line, "value"))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, row));
    }
    build_dataset(rows, labels)
}

/// `dim` fixes the feature count; otherwise the largest index seen is used.
pub fn read_libsvm_dataset<R: Read>(reader: R, dim: Option<usize>) -> Result<LabeledDataset> {
    let mut sparse: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_field(tokens.next().unwrap(), lineno, "label")?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("expected index:value, found `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad feature index `{idx}`"),
            })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("feature indices must be 1-based and increasing, found {idx}"),
                });
            }
            last = idx;
            entries.push((idx, parse_field(val, lineno, "value")?));
        }
        max_index = max_index.max(last);
        labels.push((lineno, label));
        sparse.push((lineno, entries));
    }
    let dim = match dim {
        Some(d) if d < max_index => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: max_index,
            })
        }
        Some(d) => d,
        None => max_index,
    };
    let rows = sparse
        .into_iter()
        .map(|(line, entries)| {
            let mut r = vec![0.0; dim];
            for (i, v) in entries {
                r[i - 1] = v;
            }
            (line, r)
        })
        .collect();
    build_dataset(rows, labels)
}

pub fn ingest(path: &Path, format: DataFormat) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match format {
        DataFormat::Csv => read_csv_dataset(file),
        DataFormat::Libsvm => read_libsvm_dataset(file, None),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn write_csv_dataset<W: Write>(mut out: W, data: &LabeledDataset) -> Result<()> {
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..data.dim()).map(|j| format!("x{j}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (x, y) in data.rows().zip(data.labels()) {
        write!(out, "{y}")?;
        for v in x {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Generic numeric table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                got: row.len(),
            });
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_particles(path: &Path, ensemble: &ParticleEnsemble) -> Result<()> {
    write_table(
        path,
        &["index", "value"],
        ensemble
            .particles()
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), v.to_string()]),
    )
}

pub fn read_particles(path: &Path, support: SupportInterval) -> Result<ParticleEnsemble> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v = rec.get(1).ok_or_else(|| Error::Parse {
            line,
            reason: "expected index,value".into(),
        })?;
        values.push(parse_field(v, line, "particle")?);
    }
    ParticleEnsemble::new(values, support)
}

pub fn write_histogram(path: &Path, grid: &DensityGrid) -> Result<()> {
    write_table(
        path,
        &["binLeft", "binRight", "density"],
        (0..grid.bins()).map(|i| {
            let (l, r) = grid.edges(i);
            vec![l.to_string(), r.to_string(), grid.density()[i].to_string()]
        }),
    )
}

/// Two header lines (`D,d,seed` and its values), a column header, then one
/// row `omega_1..omega_d,b,xi` per feature.
pub fn write_feature_bank<W: Write>(mut out: W, bank: &FeatureBank) -> Result<()> {
    writeln!(out, "D,d,seed")?;
    writeln!(out, "{},{},{}", bank.count(), bank.dim(), bank.seed())?;
    let cols: Vec<String> = (0..bank.dim())
        .map(|j| format!("omega{j}"))
        .chain(["b".to_string(), "xi".to_string()])
        .collect();
    writeln!(out, "{}", cols.join(","))?;
    for k in 0..bank.count() {
        for w in bank.frequency(k) {
            write!(out, "{w},")?;
        }
        writeln!(out, "{},{}", bank.phases()[k], bank.source_particles()[k])?;
    }
    Ok(())
}

pub fn read_feature_bank<R: Read>(reader: R) -> Result<FeatureBank> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((k, l)) => Ok((k + 1, l?)),
            None => Err(Error::Parse {
                line: 0,
                reason: format!("missing {expect}"),
            }),
        }
    };
    let (ln, head) = next("header")?;
    if head.trim() != "D,d,seed" {
        return Err(Error::Parse {
            line: ln,
            reason: "expected `D,d,seed`".into(),
        });
    }
    let (ln, vals) = next("header values")?;
    let parts: Vec<&str> = vals.trim().split(',').collect();
    let bad = |reason: &str| Error::Parse {
        line: ln,
        reason: reason.to_string(),
    };
    if parts.len() != 3 {
        return Err(bad("expected three header values"));
    }
    let count: usize = parts[0].parse().map_err(|_| bad("bad D"))?;
    let dim: usize = parts[1].parse().map_err(|_| bad("bad d"))?;
    let seed: u64 = parts[2].parse().map_err(|_| bad("bad seed"))?;
    next("column header")?;
    let mut freqs = Vec::with_capacity(count * dim);
    let mut phases = Vec::with_capacity(count);
    let mut xis = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, row) = next("feature row")?;
        let fields: Vec<&str> = row.trim().split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse {
                line: ln,
                reason: format!("expected {} fields, found {}", dim + 2, fields.len()),
            });
        }
        for f in &fields[..dim] {
            freqs.push(parse_field(f, ln, "frequency")?);
        }
        phases.push(parse_field(fields[dim], ln, "phase")?);
        xis.push(parse_field(fields[dim + 1], ln, "bandwidth")?);
    }
    FeatureBank::from_parts(dim, freqs, phases, xis, seed)
}

pub fn save_feature_bank(path: &Path, bank: &FeatureBank) -> Result<()> {
    let mut out = create(path)?;
    write_feature_bank(&mut out, bank)?;
    out.flush()?;
    Ok(())
}

pub fn load_feature_bank(path: &Path) -> Result<FeatureBank> {
    read_feature_bank(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}

const CODES_MAGIC: &[u8; 4] = b"RKLC";

/// Binary code file: magic `RKLC`, then little-endian `u32 n`, `u32 q`,
/// `u64 seed`, `u32 count`, then `count` rows. Binary codes pack eight
/// symbols per byte (LSB first); alphabets up to 256 use one byte per
/// symbol and larger ones four.
pub fn write_codes<W: Write>(mut out: W, codes: &[HashCode], length: usize, alphabet: u32, seed: u64) -> Result<()> {
    out.write_all(CODES_MAGIC)?;
    out.write_all(&(length as u32).to_le_bytes())?;
    out.write_all(&alphabet.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&(codes.len() as u32).to_le_bytes())?;
    for c in codes {
        if c.len() != length || c.alphabet() != alphabet {
            return Err(Error::DimensionMismatch {
                expected: length,
                got: c.len(),
            });
        }
        match alphabet {
            2 => {
                let mut bytes = vec![0u8; length.div_ceil(8)];
                for (i, s) in c.symbols().iter().enumerate() {
                    bytes[i / 8] |= (*s as u8) << (i % 8);
                }
                out.write_all(&bytes)?;
            }
            3..=256 => out.write_all(&c.symbols().iter().map(|s| *s as u8).collect::<Vec<_>>())?,
            _ => {
                for s in c.symbols() {
                    out.write_all(&s.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeFile {
    pub length: usize,
    pub alphabet: u32,
    pub seed: u64,
    pub codes: Vec<HashCode>,
}

pub fn read_codes<R: Read>(mut reader: R) -> Result<CodeFile> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    let truncated = || Error::Io("code file is truncated".into());
    if buf.len() < 24 || &buf[..4] != CODES_MAGIC {
        return Err(Error::Io("not a code file (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let length = u32_at(4) as usize;
    let alphabet = u32_at(8);
    let seed = u64::from_le_bytes(buf[12..20].try_into().unwrap());
    let count = u32_at(20) as usize;
    let row_bytes = match alphabet {
        2 => length.div_ceil(8),
        3..=256 => length,
        _ => 4 * length,
    };
    let body = &buf[24..];
    if body.len() != count * row_bytes {
        return Err(truncated());
    }
    let codes = body
        .chunks_exact(row_bytes.max(1))
        .take(count)
        .map(|row| {
            let symbols = match alphabet {
                2 => (0..length).map(|i| u32::from((row[i / 8] >> (i % 8)) & 1)).collect(),
                3..=256 => row.iter().map(|b| u32::from(*b)).collect(),
                _ => row
                    .chunks_exact(4)
                    .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            };
            HashCode::new(symbols, alphabet)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CodeFile {
        length,
        alphabet,
        seed,
        codes,
    })
}

pub fn save_codes(path: &Path, codes: &[HashCode], length: usize, alphabet: u32, seed: u64) -> Result<()> {
    let mut out = create(path)?;
    write_codes(&mut out, codes, length, alphabet, seed)?;
    out.flush()?;
    Ok(())
}

pub fn load_codes(path: &Path) -> Result<CodeFile> {
    read_codes(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}
