//! Deterministic artifact emission: CSV text with a header row and a
//! trailing config-hash comment, plus atomic whole-set commits (every file
//! is staged in memory and written via temp + rename, so a failing command
//! leaves no partial outputs behind).

use std::fs;
use std::io::Write;
use std::path::Path;

pub struct CsvBuilder {
    buf: String,
}

impl CsvBuilder {
    pub fn new(columns: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&columns.join(","));
        buf.push('\n');
        CsvBuilder { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(mut self, config_hash: &str) -> Vec<u8> {
        self.buf.push_str(&format!("# config-hash: {config_hash}\n"));
        self.buf.into_bytes()
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        OutputSet { files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json(&mut self, name: &str, value: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes every staged file under `dir` via temp + rename.
    pub fn commit(&self, dir: &str) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let final_path = Path::new(dir).join(name);
            let tmp_path = Path::new(dir).join(format!("{name}.tmp"));
            {
                let mut f = fs::File::create(&tmp_path)?;
                f.write_all(bytes)?;
                f.sync_all()?;
            }
            fs::rename(&tmp_path, &final_path)?;
        }
        Ok(())
    }
}

impl Default for OutputSet {
    fn default() -> Self {
        Self::new()
    }
}
