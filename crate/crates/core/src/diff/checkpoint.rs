//! Parameter checkpoints.
//!
//! A checkpoint is a sequence of sections, one per parameter, in store order.
//! Each section is a text header line `name,rows,cols\n` followed by
//! `rows*cols` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DiffError, Matrix, ParameterStore};
use crate::Scalar;

pub fn write_checkpoint<T: Scalar, W: Write>(
    store: &ParameterStore<T>,
    mut out: W,
) -> Result<(), DiffError> {
    for p in store.iter() {
        if p.name.contains(',') || p.name.contains('\n') {
            return Err(DiffError::MalformedCheckpoint(format!(
                "unsupported name `{}`",
                p.name
            )));
        }
        writeln!(out, "{},{},{}", p.name, p.value.rows(), p.value.cols())?;
        for &x in p.value.data() {
            out.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads all sections into a fresh store (optimizer moments start at zero).
pub fn read_checkpoint<T: Scalar, R: Read>(input: R) -> Result<ParameterStore<T>, DiffError> {
    let mut reader = BufReader::new(input);
    let mut store = ParameterStore::new();
    let mut header = Vec::new();
    loop {
        header.clear();
        if reader.read_until(b'\n', &mut header)? == 0 {
            break;
        }
        if header.last() != Some(&b'\n') {
            return Err(DiffError::MalformedCheckpoint(
                "truncated section header".into(),
            ));
        }
        let line = std::str::from_utf8(&header[..header.len() - 1])
            .map_err(|_| DiffError::MalformedCheckpoint("header is not UTF-8".into()))?;
        let fields: Vec<&str> = line.split(',').collect();
        let [name, rows, cols] = fields[..] else {
            return Err(DiffError::MalformedCheckpoint(format!(
                "bad header `{line}`"
            )));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| DiffError::MalformedCheckpoint(format!("bad dimension in `{line}`")))
        };
        let (rows, cols) = (parse(rows)?, parse(cols)?);
        let mut bytes = vec![0u8; rows * cols * 8];
        reader
            .read_exact(&mut bytes)
            .map_err(|_| DiffError::MalformedCheckpoint(format!("truncated data for `{name}`")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        store.add(name, Matrix::from_vec(rows, cols, data)?)?;
    }
    Ok(store)
}

pub fn save_checkpoint<T: Scalar>(
    store: &ParameterStore<T>,
    path: impl AsRef<Path>,
) -> Result<(), DiffError> {
    write_checkpoint(store, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ParameterStore<T>, DiffError> {
    read_checkpoint(File::open(path)?)
}
