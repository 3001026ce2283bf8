//! CSV trajectories and config sidecars.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::Failure;

/// Column-major table: `t`, then `q`, `v`, `p` blocks of width `n`, then
/// named diagnostic channels.
pub struct Table {
    pub n: usize,
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn header(&self) -> Vec<String> {
        let block = |c: char| (1..=self.n).map(move |i| format!("{c}{i}"));
        std::iter::once("t".to_string())
            .chain(block('q'))
            .chain(block('v'))
            .chain(block('p'))
            .chain(self.channels.iter().map(|(name, _)| name.clone()))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let io = |e: csv::Error| Failure::Validation(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Validation(format!("{}: {e}", dir.display())))?;
        }
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(self.header()).map_err(io)?;
        for k in 0..self.times.len() {
            let row = std::iter::once(self.times[k])
                .chain(self.q[k].iter().copied())
                .chain(self.v[k].iter().copied())
                .chain(self.p[k].iter().copied())
                .chain(self.channels.iter().map(|(_, c)| c[k]))
                .map(fmt17);
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Resolves an output path against `--out`; absolute paths are kept.
pub fn resolve(out: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

/// Writes the effective config next to the main artifact.
pub fn write_sidecar(config: &RunConfig, out: &Path) -> Result<PathBuf, Failure> {
    let path = match &config.outputs.csv {
        Some(csv) => {
            let mut s = resolve(out, csv).into_os_string();
            s.push(".config.json");
            PathBuf::from(s)
        }
        None => out.join(format!("{}.config.json", config.mode.map(|m| m.to_string()).unwrap_or_default())),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Validation(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(&path, config.to_json() + "\n").map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    Ok(path)
}
