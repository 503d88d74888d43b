use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Writes CSV and JSON-lines files into one directory and remembers them.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// One header row, then `rows`. Floats use Rust's shortest round-trip
    /// formatting so reruns are byte-identical.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), String>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut w =
            csv::Writer::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        w.write_record(header).map_err(|e| e.to_string())?;
        for row in rows {
            w.write_record(row).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn jsonl<T: serde::Serialize>(&mut self, name: &str, items: &[T]) -> Result<(), String> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut w = BufWriter::new(f);
        for item in items {
            serde_json::to_writer(&mut w, item).map_err(|e| e.to_string())?;
            w.write_all(b"\n").map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), String> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        std::fs::write(&path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}
