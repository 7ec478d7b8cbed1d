use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::{CliError, ExperimentConfig, Result};

/// Writes run artifacts under the output directory, stamping each report with
/// the config that produced it.
pub(crate) struct Outputs {
    dir: PathBuf,
    config: Value,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub(crate) fn new(cfg: &ExperimentConfig) -> Result<Outputs> {
        fs::create_dir_all(&cfg.output_dir).map_err(|source| CliError::Io {
            path: cfg.output_dir.clone(),
            source,
        })?;
        Ok(Outputs {
            dir: cfg.output_dir.clone(),
            config: serde_json::to_value(cfg)?,
            files: Vec::new(),
        })
    }

    pub(crate) fn into_files(self) -> Vec<PathBuf> {
        self.files
    }

    /// Config plus values resolved at run time (defaults, derived sizes).
    fn stamped(&self, resolved: Value) -> Value {
        let mut c = self.config.clone();
        if resolved.as_object().is_some_and(|o| !o.is_empty()) {
            c["resolved"] = resolved;
        }
        c
    }

    fn write(&mut self, name: &str, body: &str) -> Result<String> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(name.to_string())
    }

    /// Interchange file written verbatim.
    pub(crate) fn raw(&mut self, name: &str, body: &str) -> Result<String> {
        self.write(name, &format!("{body}\n"))
    }

    pub(crate) fn json<T: Serialize + ?Sized>(&mut self, name: &str, resolved: Value, result: &T) -> Result<String> {
        let doc = json!({ "config": self.stamped(resolved), "result": result });
        self.write(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    pub(crate) fn csv<I>(&mut self, name: &str, resolved: Value, header: &[&str], rows: I) -> Result<String>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut buf = format!("# {}\n", serde_json::to_string(&self.stamped(resolved))?).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush().map_err(|source| CliError::Io {
                path: self.dir.join(name),
                source,
            })?;
        }
        let body = String::from_utf8(buf).expect("csv output is utf-8");
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(name.to_string())
    }
}
