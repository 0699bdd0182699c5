//! Output files. Every file carries the configuration hash and the seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    seed: u64,
}

impl OutputDir {
    pub fn create(dir: &Path, hash: String, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            seed,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    /// `# config_hash=... seed=...` line for text formats.
    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}", self.hash, self.seed)
    }

    /// JSON object with `config_hash` and `seed` merged in.
    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let mut value = serde_json::to_value(body)?;
        let stamp = json!({ "config_hash": self.hash, "seed": self.seed });
        match &mut value {
            Value::Object(map) => {
                if let Value::Object(s) = stamp {
                    for (k, v) in s {
                        map.insert(k, v);
                    }
                }
            }
            other => {
                let inner = other.take();
                value = json!({ "config_hash": self.hash, "seed": self.seed, "data": inner });
            }
        }
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, &value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(self.path(name))
    }

    /// CSV with a leading comment line, then `header` and `rows`.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut w = self.open(name)?;
        writeln!(w, "{}", self.comment())?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    /// Text file whose body is produced by `body`, after the comment line.
    pub fn write_text<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let mut w = self.open(name)?;
        writeln!(w, "{}", self.comment())?;
        body(&mut w)?;
        w.flush()?;
        Ok(self.path(name))
    }
}

/// Compact, filename-safe rendering of a parameter value.
pub fn tag(x: f64) -> String {
    format!("{x}").replace('-', "m")
}
