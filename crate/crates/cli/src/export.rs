//! Attention summaries and raw embedding dumps of a trained model.
//!
//! Embedding files start with an ASCII header `rows cols\n` followed by
//! `rows*cols` little-endian `f32` values in row-major order. Row `r` belongs
//! to the user listed on row `r` of `users.tsv` in the same directory.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use dualrec::corpus::{Domain, ProcessedDataset};
use dualrec::diff::Matrix;
use dualrec::model::DomainEmbeddings;
use dualrec::Scalar;

use crate::error::CliError;

/// Mean attention of one domain's users, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionShare {
    pub domain: Domain,
    pub shared: f64,
    pub specific: f64,
}

/// `None` when the model has no attention fusion (GCN or concatenation variants).
pub fn attention_shares<T: Scalar>(emb: &[DomainEmbeddings<T>; 2]) -> Option<[AttentionShare; 2]> {
    let mut out = [Domain::A, Domain::B].map(|domain| AttentionShare {
        domain,
        shared: 0.0,
        specific: 0.0,
    });
    for (d, e) in emb.iter().enumerate() {
        let w = e.user_attention.as_ref()?;
        let n = w.rows() as f64;
        let (c, s) = (0..w.rows()).fold((0.0, 0.0), |(c, s), r| {
            (c + w.get(r, 0).as_f64(), s + w.get(r, 1).as_f64())
        });
        out[d].shared = 100.0 * c / n;
        out[d].specific = 100.0 * s / n;
    }
    Some(out)
}

pub fn write_attention(shares: &[AttentionShare; 2], path: &Path) -> Result<(), CliError> {
    let mut text = String::from("domain\tshared_pct\tspecific_pct\n");
    for s in shares {
        text.push_str(&format!("{}\t{}\t{}\n", s.domain, s.shared, s.specific));
    }
    fs::write(path, text).map_err(CliError::io(path))
}

pub const EMBEDDING_KINDS: [&str; 4] = ["g", "c", "s", "fused"];

fn kind_matrix<'a, T>(e: &'a DomainEmbeddings<T>, kind: &str) -> Option<&'a Matrix<T>> {
    match kind {
        "g" => Some(&e.user_g),
        "c" => e.user_c.as_ref(),
        "s" => e.user_s.as_ref(),
        "fused" => Some(&e.user_fused),
        _ => None,
    }
}

pub fn write_embedding<T: Scalar>(m: &Matrix<T>, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut out = BufWriter::new(file);
    let mut body = Vec::with_capacity(m.len() * 4 + 32);
    body.extend_from_slice(format!("{} {}\n", m.rows(), m.cols()).as_bytes());
    for &x in m.data() {
        body.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
    }
    out.write_all(&body)
        .and_then(|_| out.flush())
        .map_err(CliError::io(path))
}

pub fn read_embedding(path: &Path) -> Result<Matrix<f32>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(CliError::io(path))?;
    let bad = || {
        CliError::Config(format!(
            "{}: malformed embedding header `{}`",
            path.display(),
            header.trim_end()
        ))
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [rows, cols] = dims[..] else {
        return Err(bad());
    };
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(CliError::io(path))?;
    if bytes.len() != rows * cols * 4 {
        return Err(CliError::Config(format!(
            "{}: expected {} values, found {} bytes",
            path.display(),
            rows * cols,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Matrix::from_vec(rows, cols, data).map_err(|e| CliError::Config(e.to_string()))
}

/// Writes `{kind}_{domain}.f32` for every available kind plus `users.tsv`.
/// Returns the written file names.
pub fn write_embeddings<T: Scalar>(
    emb: &[DomainEmbeddings<T>; 2],
    ds: &ProcessedDataset,
    dir: &Path,
) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut written = Vec::new();
    for kind in EMBEDDING_KINDS {
        for d in Domain::BOTH {
            if let Some(m) = kind_matrix(&emb[d.index()], kind) {
                let name = format!("{kind}_{d}.f32");
                write_embedding(m, &dir.join(&name))?;
                written.push(name);
            }
        }
    }
    let mut ids = String::from("row\tuser\n");
    for (r, key) in ds.users.iter().enumerate() {
        ids.push_str(&format!("{r}\t{key}\n"));
    }
    let path = dir.join("users.tsv");
    fs::write(&path, ids).map_err(CliError::io(&path))?;
    Ok(written)
}
