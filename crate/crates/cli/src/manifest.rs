//! Run provenance embedded as trailing comments in every output file.

use std::time::Instant;

use sha2::{Digest, Sha256};

pub const LOG_FORMAT: &str = "staticext-log v1";
pub const VERIFY_FORMAT: &str = "staticext-verify v1";

/// Lines starting with this prefix hold wall-clock timings, the only
/// content that differs between otherwise identical runs.
pub const TIMING_PREFIX: &str = "# timing ";

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config: Vec<(String, String)>,
    /// `sha256` of each input file, by role.
    pub inputs: Vec<(String, String)>,
    pub formats: Vec<String>,
    pub timings: Vec<(String, f64)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: Vec::new(),
            inputs: Vec::new(),
            formats: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(&mut self, role: &str, bytes: &[u8]) -> &mut Self {
        self.inputs.push((role.to_string(), sha256_hex(bytes)));
        self
    }

    pub fn format(&mut self, tag: &str) -> &mut Self {
        self.formats.push(tag.to_string());
        self
    }

    /// Run `f` and record its wall-clock time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((phase.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# manifest command {}\n", self.command));
        s.push_str(&format!("# manifest version staticext {}\n", env!("CARGO_PKG_VERSION")));
        for (k, v) in &self.config {
            s.push_str(&format!("# manifest config {k} {v}\n"));
        }
        for (role, digest) in &self.inputs {
            s.push_str(&format!("# manifest input {role} sha256 {digest}\n"));
        }
        for f in &self.formats {
            s.push_str(&format!("# manifest format {f}\n"));
        }
        for (phase, secs) in &self.timings {
            s.push_str(&format!("{TIMING_PREFIX}{phase} {secs:.3}\n"));
        }
        s
    }
}

/// `text` without the timing lines, for reproducibility comparisons.
pub fn strip_timings(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMING_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_comment_lines() {
        let mut m = RunManifest::new("solve");
        m.config("nr", 48).input("boundary", b"abc").format("staticext-sol v1");
        m.time("parse", || ());
        let text = m.render();
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(text.contains("# manifest input boundary sha256 ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        assert_eq!(strip_timings(&text).lines().count(), text.lines().count() - 1);
    }
}
