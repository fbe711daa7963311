//! CSV emission: every file carries a comment line with the config hash and
//! grid size, then a header row. Formatting is fixed so identical inputs
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(
        dir: &Path,
        name: &str,
        config_hash: &str,
        grid_n: usize,
        header: &[&str],
    ) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let file = File::create(dir.join(name))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# config={config_hash} grid={grid_n}")?;
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, values: &[f64]) -> std::io::Result<()> {
        let cells: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        writeln!(self.out, "{}", cells.join(","))
    }

    /// Fixed-precision row (used for the welfare-table files).
    pub fn row_fixed(&mut self, label: &str, values: &[f64], decimals: usize) -> std::io::Result<()> {
        let cells: Vec<String> =
            values.iter().map(|v| format!("{v:.decimals$}")).collect();
        writeln!(self.out, "{label},{}", cells.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

/// First 16 hex chars of the SHA-256 of the raw config text.
pub fn config_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
