//! Artifact writers. CSV files open with a `# config_hash=` comment line and
//! JSON reports carry a `config_hash` field.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn new(dir: &Path, hash: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        let mut f = BufWriter::new(File::create(self.path(name))?);
        writeln!(f, "# config_hash={}", self.hash)?;
        Ok(csv::Writer::from_writer(f))
    }

    /// Writes `report` with `config_hash` added and returns the stamped value.
    pub fn json(&self, name: &str, mut report: Value) -> Result<Value, CliError> {
        if let Value::Object(map) = &mut report {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let mut f = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut f, &report).map_err(std::io::Error::from)?;
        writeln!(f)?;
        f.flush()?;
        Ok(report)
    }
}
