//! `#`-prefixed provenance header written at the top of every output.

use std::fmt::Write as _;

use jacobi_mimo::mgf::Cutoff;
use jacobi_mimo::montecarlo::{CHUNK, GENERATOR};

use crate::config::RunConfig;

/// Line prefix of the only manifest entry that varies between identical runs.
pub const TIMESTAMP_KEY: &str = "# timestamp: ";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: String,
    pub options: String,
    pub seed: u64,
    pub version: &'static str,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, rc: &RunConfig, timestamp: String) -> Self {
        let config = match &rc.channel {
            Some(c) => c.to_string(),
            None => "none".to_string(),
        };
        let options = format!(
            "samples={} cutoff={} dkappa={} bits={}",
            rc.samples,
            cutoff_label(rc.cutoff),
            rc.dkappa,
            rc.bits
        );
        Self {
            command_line,
            config,
            options,
            seed: rc.seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let cmd: Vec<String> = self.command_line.iter().map(|a| quote(a)).collect();
        // Writing into a String cannot fail.
        let _ = writeln!(s, "# jmimo {}", self.version);
        let _ = writeln!(s, "# command: {}", cmd.join(" "));
        let _ = writeln!(s, "# config: {}", self.config);
        let _ = writeln!(s, "# options: {}", self.options);
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "# generator: {GENERATOR}, chunk={CHUNK}");
        let _ = writeln!(s, "{TIMESTAMP_KEY}{}", self.timestamp);
        s
    }
}

pub fn cutoff_label(c: Cutoff) -> String {
    match c {
        Cutoff::Auto { threshold } => format!("auto(threshold={threshold})"),
        Cutoff::Fixed(l) => l.to_string(),
    }
}

fn quote(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_.,=/:+".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}
