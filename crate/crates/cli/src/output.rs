//! Artifact writers and readers: CSV tables, binary state dumps, JSON
//! manifests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const DUMP_MAGIC: &[u8; 4] = b"MMST";
pub const DUMP_VERSION: u32 = 1;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Directory that receives the artifacts of one run.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf, CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let io_err = |e: csv::Error| CliError::io(&path, e.into());
        let mut w = csv::Writer::from_path(&path).map_err(io_err)?;
        w.write_record(header).map_err(io_err)?;
        for row in rows {
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("manifest serializes");
        s.push('\n');
        self.text(name, &s)
    }

    pub fn dump(&self, name: &str, points: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, encode_dump(points)).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// `MMST`, version (u32), point count (u64), dimension (u64), then the
/// coordinates as little-endian `f64`, point by point.
pub fn encode_dump(points: &[Vec<f64>]) -> Vec<u8> {
    let dim = points.first().map_or(0, Vec::len);
    let mut bytes = Vec::with_capacity(24 + 8 * dim * points.len());
    bytes.extend_from_slice(DUMP_MAGIC);
    bytes.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(points.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(dim as u64).to_le_bytes());
    for p in points {
        assert_eq!(p.len(), dim, "ragged ensemble");
        for x in p {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    bytes
}

pub fn decode_dump(bytes: &[u8]) -> io::Result<Vec<Vec<f64>>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    if bytes.len() < 24 || &bytes[..4] != DUMP_MAGIC {
        return Err(bad("not a state dump (missing MMST header)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != DUMP_VERSION {
        return Err(bad(&format!("unsupported dump version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    if count.checked_mul(dim).and_then(|n| n.checked_mul(8)) != Some(body.len()) {
        return Err(bad("dump length does not match its header"));
    }
    if dim == 0 {
        return Ok(vec![Vec::new(); count]);
    }
    Ok(body
        .chunks_exact(8 * dim)
        .map(|chunk| chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect())
}

pub fn read_dump(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_dump(&bytes).map_err(|e| CliError::io(path, e))
}

/// One state per line, comma separated, no header; `#` starts a comment
/// line.
pub fn read_states_csv(path: &Path, field: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut states = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::io(path, e.into()),
            _ => CliError::field(field, format!("{}: {e}", path.display())),
        })?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::field(field, format!("{} record {}: {e}", path.display(), i + 1)))?;
        states.push(row);
    }
    Ok(states)
}
