//! Atomic output files and the run manifest.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};

/// Version of every file layout written by this crate.
pub const FORMAT_VERSION: u32 = 1;

/// Shortest round-trip decimal form, switching to exponent notation for
/// very small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        "NaN".into()
    } else if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// A CSV table held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush().map_err(|e| CliError::io("writing csv", e))?;
        Ok(())
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    /// Relative to the output directory for outputs; as given for inputs.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<FileRecord> {
    let mut f = fs::File::open(path).map_err(|e| CliError::open(path, e))?;
    let mut h = HashingWriter {
        inner: io::sink(),
        hasher: Sha256::new(),
        bytes: 0,
    };
    io::copy(&mut f, &mut h).map_err(|e| CliError::io(format!("hashing {}", path.display()), e))?;
    Ok(FileRecord {
        path: path.display().to_string(),
        bytes: h.bytes,
        sha256: hex(&h.hasher.finalize()),
    })
}

/// Temporary files default to owner-only access; outputs get the usual
/// read permissions.
fn temp_file(dir: &Path) -> io::Result<NamedTempFile> {
    let mut b = tempfile::Builder::new();
    b.prefix(".tmp-");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        b.permissions(fs::Permissions::from_mode(0o644));
    }
    b.tempfile_in(dir)
}

/// Writes files under one directory, each through a temporary file renamed
/// into place, and remembers what was written.
pub struct Outputs {
    root: PathBuf,
    format: Format,
    written: Vec<FileRecord>,
    inputs: Vec<FileRecord>,
}

impl Outputs {
    pub fn new(root: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(format!("creating {}", root.display()), e))?;
        Ok(Outputs {
            root: root.to_path_buf(),
            format,
            written: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[FileRecord] {
        &self.written
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let rec = hash_file(path)?;
        self.inputs.push(rec);
        Ok(())
    }

    /// Streams `body` into `<root>/<rel>` atomically.
    pub fn write_with(&mut self, rel: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let target = self.root.join(rel);
        let dir = target.parent().expect("output path has a parent");
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let tmp = temp_file(dir).map_err(|e| CliError::io(format!("creating temp file in {}", dir.display()), e))?;
        let mut w = HashingWriter {
            inner: BufWriter::new(tmp),
            hasher: Sha256::new(),
            bytes: 0,
        };
        body(&mut w)?;
        w.flush()
            .map_err(|e| CliError::io(format!("writing {}", target.display()), e))?;
        let tmp = w
            .inner
            .into_inner()
            .map_err(|e| CliError::io(format!("writing {}", target.display()), e.into_error()))?;
        tmp.persist(&target)
            .map_err(|e| CliError::io(format!("renaming into {}", target.display()), e.error))?;
        self.written.retain(|r| r.path != rel);
        self.written.push(FileRecord {
            path: rel.to_string(),
            bytes: w.bytes,
            sha256: hex(&w.hasher.finalize()),
        });
        Ok(())
    }

    pub fn csv(&mut self, rel: &str, table: &Table) -> Result<()> {
        self.write_with(rel, |w| table.write_to(w))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.write_with(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n").map_err(|e| CliError::io("writing json", e))
        })
    }

    /// Tabular report in the configured format(s): `<stem>.csv` and/or
    /// `<stem>.json`.
    pub fn report<T: Serialize + ?Sized>(&mut self, stem: &str, table: &Table, value: &T) -> Result<()> {
        if self.format.csv() {
            self.csv(&format!("{stem}.csv"), table)?;
        }
        if self.format.json() {
            self.json(&format!("{stem}.json"), value)?;
        }
        Ok(())
    }

    /// Writes `manifest_<command>.json`, which is not itself listed among
    /// the outputs.
    pub fn finish(mut self, command: &str, cfg: &RunConfig, started: Instant) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.into(),
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            core_version: credit_audit_core::VERSION.into(),
            seed: cfg.seed(),
            config: cfg.clone(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: self.written.clone(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        let name = format!("manifest_{command}.json");
        self.json(&name, &manifest)?;
        Ok(manifest)
    }
}

/// Provenance of one command run. Everything except `wall_time_seconds`
/// is a function of the configuration and inputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub format_version: u32,
    pub tool_version: String,
    pub core_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_time_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn written_files_are_hashed() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path(), Format::Csv).unwrap();
        let mut t = Table::new(["a", "b"]);
        t.push(["1", "x,y"]);
        out.csv("sub/t.csv", &t).unwrap();
        let text = fs::read_to_string(dir.path().join("sub/t.csv")).unwrap();
        assert_eq!(text, "a,b\n1,\"x,y\"\n");
        let rec = &out.written()[0];
        assert_eq!(rec.bytes, text.len() as u64);
        assert_eq!(rec.sha256, hash_file(&dir.path().join("sub/t.csv")).unwrap().sha256);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 4.2e-190, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(4.2e-190), "4.2e-190");
        assert_eq!(num(0.25), "0.25");
    }
}
