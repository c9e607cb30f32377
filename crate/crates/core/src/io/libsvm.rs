//! LIBSVM text format: `<label> <index>:<value> ...` with 1-based indices.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::{DatasetMatrix, SparseVec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reads a dataset. `n` is the largest index seen unless `dim` is given.
pub fn load_libsvm<T: Scalar>(path: impl AsRef<Path>, dim: Option<usize>) -> Result<DatasetMatrix<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, dim).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        other => other,
    })
}

/// Parses LIBSVM text. Parse errors carry an empty path.
pub fn parse_libsvm<T: Scalar>(text: &str, dim: Option<usize>) -> Result<DatasetMatrix<T>> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let bad = |msg: String| Error::Parse {
            path: Default::default(),
            line: line_no,
            msg,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| bad(format!("invalid label `{label_tok}`")))?;
        let mut pairs = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| bad(format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("invalid index `{idx}`")))?;
            if idx == 0 {
                return Err(bad("indices are 1-based; got 0".into()));
            }
            let val: f64 = val.parse().map_err(|_| bad(format!("invalid value `{val}`")))?;
            if !val.is_finite() || !label.is_finite() {
                return Err(bad("non-finite number".into()));
            }
            max_index = max_index.max(idx);
            pairs.push((idx - 1, T::of(val)));
        }
        let row = SparseVec::from_pairs(pairs).map_err(|e| bad(e.to_string()))?;
        rows.push(row);
        labels.push(T::of(label));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = match dim {
        Some(d) if d < max_index => {
            return Err(Error::InvalidData(format!(
                "dimension override {d} is smaller than the largest index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    DatasetMatrix::new(rows, labels, n)
}

/// Writes a dataset with shortest round-trip formatting of every value.
pub fn write_libsvm<T: Scalar>(data: &DatasetMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (row, label) in data.rows().iter().zip(data.labels()) {
        write!(w, "{}", label.to_f64_lossy())?;
        for (c, v) in row.iter() {
            write!(w, " {}:{}", c + 1, v.to_f64_lossy())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
