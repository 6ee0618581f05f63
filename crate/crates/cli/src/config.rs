//! Channel configuration from flags and/or a `key = value` file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use jacobi_mimo::mgf::{ChannelConfig, Cutoff};
use jacobi_mimo::analysis::DEFAULT_KAPPA_STEP;

use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 200_000;
pub const DEFAULT_SEED: u64 = 2024;

/// Raw, unvalidated values; flags override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub q: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub cutoff: Option<String>,
    pub dkappa: Option<f64>,
    pub bits: Option<bool>,
}

/// Validated channel plus run options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Absent when no channel key was given at all.
    pub channel: Option<ChannelConfig>,
    pub samples: usize,
    pub seed: u64,
    pub cutoff: Cutoff,
    pub dkappa: f64,
    pub bits: bool,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    pub fn parse_text(text: &str) -> Result<Self, CliError> {
        let mut kv = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut raw = RawConfig::default();
        for (k, v) in kv {
            match k.as_str() {
                "m" => raw.m = Some(parse_num(&k, &v)?),
                "n" => raw.n = Some(parse_num(&k, &v)?),
                "l" => raw.l = Some(parse_num(&k, &v)?),
                "q" => raw.q = Some(parse_list(&v)?),
                "samples" => raw.samples = Some(parse_num(&k, &v)?),
                "seed" => raw.seed = Some(parse_num(&k, &v)?),
                "cutoff" => raw.cutoff = Some(v),
                "dkappa" => raw.dkappa = Some(parse_num(&k, &v)?),
                "bits" => raw.bits = Some(parse_num(&k, &v)?),
                other => return Err(CliError::Config(format!("unknown key `{other}`"))),
            }
        }
        Ok(raw)
    }

    /// Values set in `over` win.
    pub fn merge(self, over: RawConfig) -> RawConfig {
        RawConfig {
            m: over.m.or(self.m),
            n: over.n.or(self.n),
            l: over.l.or(self.l),
            q: over.q.or(self.q),
            samples: over.samples.or(self.samples),
            seed: over.seed.or(self.seed),
            cutoff: over.cutoff.or(self.cutoff),
            dkappa: over.dkappa.or(self.dkappa),
            bits: over.bits.or(self.bits),
        }
    }

    pub fn validate(self) -> Result<RunConfig, CliError> {
        let channel = if self.m.is_none() && self.n.is_none() && self.l.is_none() && self.q.is_none() {
            None
        } else {
            let m = self.m.ok_or_else(|| CliError::Config("m is required".into()))?;
            let n = self.n.ok_or_else(|| CliError::Config("n is required".into()))?;
            let l = self.l.ok_or_else(|| CliError::Config("l is required".into()))?;
            let q = self.q.ok_or_else(|| CliError::Config("q is required".into()))?;
            Some(ChannelConfig::new(m, n, l, q)?)
        };
        let samples = self.samples.unwrap_or(DEFAULT_SAMPLES);
        if samples < 2 {
            return Err(CliError::Config(format!("samples must be >= 2, got {samples}")));
        }
        let dkappa = self.dkappa.unwrap_or(DEFAULT_KAPPA_STEP);
        if !(dkappa > 0.0 && dkappa.is_finite()) {
            return Err(CliError::Config(format!("dkappa must be finite and > 0, got {dkappa}")));
        }
        Ok(RunConfig {
            channel,
            samples,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            cutoff: parse_cutoff(self.cutoff.as_deref().unwrap_or("auto"))?,
            dkappa,
            bits: self.bits.unwrap_or(false),
        })
    }
}

impl RunConfig {
    pub fn channel(&self) -> Result<&ChannelConfig, CliError> {
        self.channel
            .as_ref()
            .ok_or_else(|| CliError::Config("channel required: give --m --n --l --q or --config".into()))
    }
}

pub fn parse_cutoff(s: &str) -> Result<Cutoff, CliError> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Cutoff::auto());
    }
    match s.parse::<f64>() {
        Ok(l) if l > 0.0 && l.is_finite() => Ok(Cutoff::Fixed(l)),
        _ => Err(CliError::Config(format!("cutoff must be `auto` or a positive number, got `{s}`"))),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("`{}` is not a number", t.trim())))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{v}` for key `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(m: usize, n: usize, l: usize, q: &[f64]) -> RawConfig {
        RawConfig {
            m: Some(m),
            n: Some(n),
            l: Some(l),
            q: Some(q.to_vec()),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_applied() {
        let rc = flags(3, 6, 12, &[8.80, 0.11, 0.09]).validate().unwrap();
        assert_eq!(rc.samples, DEFAULT_SAMPLES);
        assert_eq!(rc.dkappa, 0.05);
        assert_eq!(rc.cutoff, Cutoff::auto());
        assert!(!rc.bits);
    }

    #[test]
    fn invariants_are_named() {
        let e = flags(3, 6, 8, &[1.0, 1.0, 1.0]).validate().unwrap_err();
        assert!(e.to_string().contains("l >= m + n"), "{e}");
        let e = flags(3, 6, 12, &[1.0, 2.0]).validate().unwrap_err();
        assert!(e.to_string().contains("q has 2 entries"), "{e}");
        let e = RawConfig { q: None, ..flags(1, 1, 2, &[1.0]) }.validate().unwrap_err();
        assert!(e.to_string().contains("q is required"));
        let rc = RawConfig::default().validate().unwrap();
        assert!(rc.channel().unwrap_err().to_string().contains("channel required"));
    }

    #[test]
    fn file_then_flags() {
        let file = RawConfig::parse_text("# channel\nm = 4\nn=3\nl = 10\nq = 11, 5, 1.5, 0.5\ncutoff = 15\nseed = 9\n").unwrap();
        let rc = file.merge(RawConfig { seed: Some(1), ..Default::default() }).validate().unwrap();
        assert_eq!(rc.channel().unwrap().q(), &[11.0, 5.0, 1.5, 0.5]);
        assert_eq!(rc.cutoff, Cutoff::Fixed(15.0));
        assert_eq!(rc.seed, 1);
        assert!(RawConfig::parse_text("m 3").is_err());
        assert!(RawConfig::parse_text("colour = red").is_err());
        assert!(parse_cutoff("-2").is_err());
    }
}
