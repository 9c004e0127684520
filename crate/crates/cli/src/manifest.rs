use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ArgMatches;
use sha2::{Digest, Sha256};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// `key=value` record of one run: every resolved flag (defaults included),
/// input hashes and the files written.
pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, matches: &ArgMatches) -> Self {
        let mut m = Manifest { lines: Vec::new() };
        m.push("tool", concat!("tsmae ", env!("CARGO_PKG_VERSION")));
        m.push("command", command);
        // argument ids are snake_case field names; groups are named after their struct
        let mut ids: Vec<&str> =
            matches.ids().map(|id| id.as_str()).filter(|id| !id.starts_with(|c: char| c.is_ascii_uppercase())).collect();
        ids.sort_unstable();
        for id in ids {
            if let Ok(Some(raw)) = matches.try_get_raw(id) {
                let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
                m.push(&format!("flag.{}", id.replace('_', "-")), &values.join(","));
            }
        }
        m
    }

    pub fn push(&mut self, key: &str, value: &str) {
        self.lines.push((key.to_string(), value.replace('\n', " ")));
    }

    pub fn hash(&mut self, key: &str, path: &Path) -> Result<()> {
        let h = sha256_file(path)?;
        self.push(&format!("{key}_sha256"), &h);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.push("output", &path.display().to_string());
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text: String = self.lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `<path>.<suffix>` next to an output file.
pub fn sidecar(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    s.into()
}
