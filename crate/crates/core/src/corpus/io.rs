use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CorpusError, Domain, ProcessedDataset, RawInteraction, Split};

/// Reads a tab-separated interaction file:
/// `user_key<TAB>item_key[<TAB>rating[<TAB>timestamp]]`.
///
/// Every row must carry the same number of fields as the first data row. A
/// first line starting with `user` is a header. Duplicate `(user, item)` pairs
/// collapse onto the first occurrence, keeping the earliest timestamp.
pub fn load_interactions(
    path: impl AsRef<Path>,
    domain: Domain,
) -> Result<Vec<RawInteraction>, CorpusError> {
    parse_interactions(File::open(path)?, domain)
}

pub fn parse_interactions<R: Read>(
    input: R,
    domain: Domain,
) -> Result<Vec<RawInteraction>, CorpusError> {
    let reader = BufReader::new(input);
    let mut rows: Vec<RawInteraction> = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut width: Option<usize> = None;
    let mut first_content = true;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if first_content {
            first_content = false;
            if line.starts_with("user") {
                continue;
            }
        }
        let malformed = |reason: String| CorpusError::MalformedLine {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=4).contains(&fields.len()) {
            return Err(malformed(format!(
                "expected 2 to 4 fields, found {}",
                fields.len()
            )));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(malformed(format!(
                    "expected {w} fields, found {}",
                    fields.len()
                )));
            }
            Some(_) => {}
        }
        let (user, item) = (fields[0].trim(), fields[1].trim());
        if user.is_empty() || item.is_empty() {
            return Err(malformed("empty user or item key".into()));
        }
        let timestamp = match fields.get(3).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => {
                Some(parse_timestamp(s).ok_or_else(|| malformed(format!("bad timestamp `{s}`")))?)
            }
        };

        match seen.get(&(user.to_string(), item.to_string())) {
            Some(&k) => {
                let kept = &mut rows[k];
                kept.timestamp = match (kept.timestamp, timestamp) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            None => {
                seen.insert((user.to_string(), item.to_string()), rows.len());
                rows.push(RawInteraction {
                    user_key: user.to_string(),
                    item_key: item.to_string(),
                    domain,
                    timestamp,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(CorpusError::EmptyFile);
    }
    Ok(rows)
}

fn parse_timestamp(s: &str) -> Option<i64> {
    s.parse::<i64>().ok().or_else(|| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(|x| x as i64)
    })
}

/// Writes interactions in the loader's four-column format with a header.
pub fn write_interactions<W: Write>(
    rows: &[RawInteraction],
    mut out: W,
) -> Result<(), CorpusError> {
    writeln!(out, "user_id\titem_id\trating\ttimestamp")?;
    for r in rows {
        let ts = r.timestamp.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{}\t{}\t1\t{}", r.user_key, r.item_key, ts)?;
    }
    out.flush()?;
    Ok(())
}

/// Exports a processed dataset as `users.tsv`, `items_{A,B}.tsv`,
/// `inter_{A,B}.tsv` and `meta.tsv` under `dir`.
pub fn write_dataset(ds: &ProcessedDataset, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_key_map(&ds.users, dir.join("users.tsv"))?;
    for d in Domain::BOTH {
        write_key_map(&ds.items[d.index()], dir.join(format!("items_{d}.tsv")))?;
        let mut out = BufWriter::new(File::create(dir.join(format!("inter_{d}.tsv")))?);
        writeln!(out, "user_id\titem_id\tsplit")?;
        let splits = &ds.splits[d.index()];
        for (k, &(u, i)) in ds.inter[d.index()].iter().enumerate() {
            let label = splits.get(k).map_or("unsplit", |s| s.as_str());
            writeln!(out, "{u}\t{i}\t{label}")?;
        }
        out.flush()?;
    }
    let mut meta = BufWriter::new(File::create(dir.join("meta.tsv"))?);
    writeln!(meta, "n_core\t{}", ds.n_core)?;
    if let Some(t) = ds.target {
        writeln!(meta, "target\t{t}")?;
    }
    meta.flush()?;
    Ok(())
}

fn write_key_map(keys: &[String], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "key\tid")?;
    for (id, key) in keys.iter().enumerate() {
        writeln!(out, "{key}\t{id}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a directory written by [`write_dataset`].
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<ProcessedDataset, CorpusError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(CorpusError::InvalidInput(format!(
            "dataset directory `{}` does not exist",
            dir.display()
        )));
    }
    let users = read_key_map(&dir.join("users.tsv"))?;
    let mut items: [Vec<String>; 2] = Default::default();
    let mut inter: [Vec<(usize, usize)>; 2] = Default::default();
    let mut splits: [Vec<Split>; 2] = Default::default();
    for d in Domain::BOTH {
        items[d.index()] = read_key_map(&dir.join(format!("items_{d}.tsv")))?;
        let text = fs::read_to_string(dir.join(format!("inter_{d}.tsv")))?;
        let mut labels = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let malformed = |reason: &str| CorpusError::MalformedLine {
                line: idx + 1,
                reason: format!("inter_{d}.tsv: {reason}"),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(malformed("expected 3 fields"));
            }
            let u = f[0]
                .parse::<usize>()
                .map_err(|_| malformed("bad user id"))?;
            let i = f[1]
                .parse::<usize>()
                .map_err(|_| malformed("bad item id"))?;
            if u >= users.len() || i >= items[d.index()].len() {
                return Err(malformed("id out of range"));
            }
            inter[d.index()].push((u, i));
            if f[2] != "unsplit" {
                labels.push(f[2].parse::<Split>()?);
            }
        }
        if !labels.is_empty() && labels.len() != inter[d.index()].len() {
            return Err(CorpusError::InvalidInput(format!(
                "inter_{d}.tsv mixes split and unsplit rows"
            )));
        }
        splits[d.index()] = labels;
    }
    let mut n_core = 1;
    let mut target = None;
    if let Ok(meta) = fs::read_to_string(dir.join("meta.tsv")) {
        for line in meta.lines() {
            match line.split_once('\t') {
                Some(("n_core", v)) => {
                    n_core = v
                        .parse()
                        .map_err(|_| CorpusError::InvalidInput(format!("bad n_core `{v}`")))?
                }
                Some(("target", v)) => target = Some(v.parse()?),
                _ => {}
            }
        }
    }
    Ok(ProcessedDataset {
        users,
        items,
        inter,
        splits,
        n_core,
        target,
    })
}

fn read_key_map(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut keys = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let malformed = || CorpusError::MalformedLine {
            line: idx + 1,
            reason: format!("{}: expected `key<TAB>id`", path.display()),
        };
        let (key, id) = line.rsplit_once('\t').ok_or_else(malformed)?;
        let id: usize = id.parse().map_err(|_| malformed())?;
        if id != keys.len() {
            return Err(malformed());
        }
        keys.push(key.to_string());
    }
    Ok(keys)
}
