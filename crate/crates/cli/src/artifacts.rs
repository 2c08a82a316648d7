//! Output directory bookkeeping: every file written goes through [`Outputs`]
//! so the manifest can list it with its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use hjhom::numerics::{encode_field, ScalarField, MAX_DIM};
use hjhom::Error;
use sha2::{Digest, Sha256};

pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
    plots: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            plots: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Error> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn field(&mut self, name: &str, field: &ScalarField) -> Result<(), Error> {
        self.write(name, &encode_field(field))
    }

    /// Field as `x [y] value` rows, blank line between scan lines, plus a
    /// plot line for the generated script.
    pub fn field_dat(&mut self, name: &str, field: &ScalarField, origin: [f64; MAX_DIM]) -> Result<(), Error> {
        let path = self.dir.join(name);
        hjhom::numerics::write_dat(field, origin, &path)?;
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.files.push((name.to_string(), sha256_hex(&bytes)));
        self.plots.push(if field.grid().dim() == 2 {
            format!("set title '{name}'\nsplot '{name}' using 1:2:3 with pm3d notitle\n")
        } else {
            format!("set title '{name}'\nplot '{name}' using 1:2 with lines notitle\n")
        });
        Ok(())
    }

    /// Whitespace-separated columns; `series` are plotted against column 1.
    pub fn table_dat(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>], series: &[usize]) -> Result<(), Error> {
        let mut text = format!("# {}\n", header.join(" "));
        for r in rows {
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            text.push_str(&cells.join(" "));
            text.push('\n');
        }
        self.write(name, text.as_bytes())?;
        let curves: Vec<String> = series
            .iter()
            .map(|&c| format!("'{name}' using 1:{} with linespoints title '{}'", c + 1, header[c]))
            .collect();
        self.plots
            .push(format!("set title '{name}'\nset xlabel '{}'\nplot {}\n", header[0], curves.join(", ")));
        Ok(())
    }

    /// Writes `plot.gp` (when anything is plottable) and then `manifest.txt`.
    pub fn finish(mut self, command: &str, seed_offset: u64, settings_echo: &str) -> Result<PathBuf, Error> {
        if !self.plots.is_empty() {
            let script = format!("set terminal pngcairo size 900,700\nset output 'plots.png'\n\n{}", self.plots.join("\n"));
            self.write("plot.gp", script.as_bytes())?;
        }
        let mut text = format!("command = {command}\nseed_offset = {seed_offset}\n\n[config]\n{settings_echo}\n[artifacts]\n");
        for (name, sum) in &self.files {
            text.push_str(&format!("{sum}  {name}\n"));
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
