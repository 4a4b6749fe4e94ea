use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{LabelKind, SparseDataset, SparseVec};
use crate::error::{Error, Result};

/// Reads a libsvm-format file. Blank lines are skipped; a dataset whose labels
/// are all +1/-1 is marked binary, anything else real-valued.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<SparseDataset> {
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file))
}

pub fn parse_libsvm(reader: impl BufRead) -> Result<SparseDataset> {
    let mut examples = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let (y, x) = parse_line(line, lineno)?;
        labels.push(y);
        examples.push(x);
    }
    let binary = labels.iter().all(|&y| y == 1.0 || y == -1.0);
    let kind = if binary { LabelKind::Binary } else { LabelKind::Real };
    SparseDataset::new(examples, labels, kind)
}

fn parse_line(line: &str, lineno: usize) -> Result<(f64, SparseVec)> {
    let perr = |msg: String| Error::Parse { line: lineno, msg };
    if line.contains('#') {
        return Err(perr("comments are not supported".into()));
    }
    let mut tokens = line.split_ascii_whitespace();
    let label_tok = tokens.next().ok_or_else(|| perr("missing label".into()))?;
    let y: f64 = label_tok
        .parse()
        .map_err(|_| perr(format!("bad label {label_tok:?}")))?;
    if !y.is_finite() {
        return Err(perr(format!("label {label_tok:?} is not finite")));
    }

    let mut entries = Vec::new();
    let mut prev = 0u32;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| perr(format!("expected index:value, got {tok:?}")))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| perr(format!("bad feature index {idx:?}")))?;
        let val: f64 = val
            .parse()
            .map_err(|_| perr(format!("bad feature value {val:?}")))?;
        if idx == 0 {
            return Err(perr("feature indices are 1-based".into()));
        }
        if !val.is_finite() {
            return Err(perr(format!("feature {idx} is not finite")));
        }
        if idx <= prev {
            return Err(Error::Format { line: lineno });
        }
        prev = idx;
        entries.push((idx, val));
    }
    Ok((y, SparseVec::from_sorted_unchecked(entries)))
}

pub fn save_libsvm(ds: &SparseDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_libsvm(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `+1`/`-1` labels for binary data, 17 significant digits otherwise.
pub fn write_libsvm(ds: &SparseDataset, mut w: impl Write) -> Result<()> {
    for i in 0..ds.len() {
        let y = ds.y(i);
        match ds.kind() {
            LabelKind::Binary => write!(w, "{}", if y > 0.0 { "+1" } else { "-1" })?,
            LabelKind::Real => write!(w, "{y:.16e}")?,
        }
        for &(idx, val) in ds.x(i).entries() {
            write!(w, " {idx}:{val:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
