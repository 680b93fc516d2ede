use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{config_hash, CliError};

/// Output directory that stamps every file with the config hash.
pub struct OutputDir {
    dir: PathBuf,
    hash: String,
}

impl OutputDir {
    pub fn create<T: Serialize>(dir: &Path, cfg: &T) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash: config_hash(cfg) })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Header comment lines for text formats.
    pub fn comment(&self) -> Vec<String> {
        vec![format!("config_hash={}", self.hash), format!("generator=spinsim {}", env!("CARGO_PKG_VERSION"))]
    }

    pub fn write(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    /// Pretty JSON with a `config_hash` key added to the report object.
    pub fn write_json<T: Serialize>(&self, name: &str, report: &T) -> Result<PathBuf, CliError> {
        let body = serde_json::to_value(report).map_err(|e| CliError::Config(e.to_string()))?;
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), Value::String(self.hash.clone()));
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("report".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| CliError::Config(e.to_string()))?;
        self.write(name, |w| writeln!(w, "{text}"))
    }
}
