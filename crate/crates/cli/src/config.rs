//! Flags, config file and defaults. Every option is optional at parse time;
//! `merge` lets a flag override the file, and the commands fill defaults.

use crate::CliError;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Defines an options struct usable both as clap arguments and as a TOML
/// table, plus a field-wise `merge` where `self` wins.
macro_rules! options {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        pub struct $name {
            $($(#[$fmeta])* pub $field: Option<$ty>,)*
        }

        impl $name {
            pub fn merge(self, other: Self) -> Self {
                Self { $($field: self.$field.or(other.$field),)* }
            }

            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];
        }
    };
}

options!(Global {
    /// Position grid points (power of two)
    #[arg(long, global = true)]
    grid_n: usize,
    /// Position grid half-width
    #[arg(long, global = true)]
    grid_l: f64,
    /// Spectral window half-width
    #[arg(long, global = true)]
    kmax: f64,
    /// Directory for all outputs
    #[arg(long, global = true)]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum)]
    format: Format,
    /// Also write SVG plots
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    svg: bool,
    #[arg(long, global = true)]
    seed: u64,
});

options!(DistArgs {
    /// gaussian | cauchy | uniform | laplace | pareto | stable | test-density
    #[arg(long)]
    dist: String,
    #[arg(long)]
    sigma: f64,
    /// Scale of cauchy and laplace
    #[arg(long)]
    scale: f64,
    #[arg(long, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    hi: f64,
    /// Pareto tail index
    #[arg(long)]
    nu: f64,
    #[arg(long)]
    x0: f64,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Stable A as `re`, `re+imi` or `re,im`
    #[arg(long = "A", id = "A")]
    #[serde(rename = "A")]
    a_coef: String,
    /// |A| when given in polar form
    #[arg(long)]
    modulus: f64,
    /// arg A when given in polar form
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    /// Test-density left weight
    #[arg(long)]
    c1: f64,
    /// Test-density right weight
    #[arg(long)]
    c2: f64,
});

options!(TransformArgs {
    /// Density CSV (x,value) instead of a builtin
    #[arg(long)]
    input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long)]
    steps: usize,
    /// Allow |a| <= 1 for a single application
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    single: bool,
    /// Also write the transformed spectrum
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    spectral: bool,
    /// Output density path
    #[arg(long)]
    out: PathBuf,
});

options!(FlowArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long)]
    steps: usize,
    /// Invert to position space every this many steps (0 = only the end)
    #[arg(long)]
    checkpoint_every: usize,
});

options!(StableArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// A as `re`, `re+imi` or `re,im`
    #[arg(long = "A", id = "A")]
    #[serde(rename = "A")]
    a_coef: String,
    #[arg(long)]
    modulus: f64,
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    /// Output density path
    #[arg(long)]
    density: PathBuf,
    /// Also write the characteristic function
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    cf: bool,
});

options!(SpectrumArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long = "A", id = "A")]
    #[serde(rename = "A")]
    a_coef: String,
    /// Comma-separated exponents s (complex allowed)
    #[arg(long)]
    s: String,
    #[arg(long)]
    b_plus: String,
    #[arg(long)]
    b_minus: String,
    /// Scale a; defaults to 2^(1/alpha)
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// Comma-separated tail probes in units of the base scale
    #[arg(long)]
    probes: String,
    /// Also run the delta-spectrum probes
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    delta: bool,
});

options!(WalkArgs {
    /// gaussian | laplace | uniform | cauchy
    #[arg(long)]
    steps_dist: String,
    /// Comma-separated ascending lambdas
    #[arg(long)]
    lambdas: String,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    tau: f64,
    /// Use the closed-form step law instead of grid samples
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    closed: bool,
});

options!(SelftestArgs {
    /// Comma-separated criterion ids (default all)
    #[arg(long)]
    only: String,
});

/// Parsed config file: global keys at top level, one table per command.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub global: Global,
    pub tables: toml::Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table =
            text.parse().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut tables = toml::Table::new();
        let commands = ["transform", "flow", "stable", "spectrum", "walk", "selftest"];
        for c in commands {
            if let Some(v) = table.remove(c) {
                tables.insert(c.to_string(), v);
            }
        }
        check_keys(table.keys(), Global::KEYS, "top level")?;
        let global = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self { global, tables })
    }

    /// The `[command]` table deserialized as `T`, rejecting unknown keys.
    pub fn section<T: for<'de> Deserialize<'de> + Default>(&self, command: &str, keys: &[&[&str]]) -> Result<T, CliError> {
        let Some(v) = self.tables.get(command) else {
            return Ok(T::default());
        };
        let t = v
            .as_table()
            .ok_or_else(|| CliError::Config(format!("[{command}] must be a table")))?;
        let known: Vec<&str> = keys.iter().flat_map(|k| k.iter().copied()).collect();
        check_keys(t.keys(), &known, &format!("[{command}]"))?;
        v.clone().try_into().map_err(|e| CliError::Config(format!("[{command}]: {e}")))
    }
}

fn check_keys<'a>(found: impl Iterator<Item = &'a String>, known: &[&str], place: &str) -> Result<(), CliError> {
    let known: BTreeSet<String> = known.iter().map(|k| if *k == "a_coef" { "A".into() } else { k.to_string() }).collect();
    for k in found {
        if !known.contains(k) {
            let list: Vec<&str> = known.iter().map(|s| s.as_str()).collect();
            return Err(CliError::Config(format!("unknown key '{k}' at {place}; expected one of {}", list.join(", "))));
        }
    }
    Ok(())
}

/// Global options after defaults.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub grid_n: usize,
    pub grid_l: Option<f64>,
    pub kmax: Option<f64>,
    pub out_dir: PathBuf,
    pub format: Format,
    pub svg: bool,
    pub seed: u64,
}

impl Settings {
    pub fn resolve(g: Global) -> Result<Self, CliError> {
        let s = Self {
            grid_n: g.grid_n.unwrap_or(1 << 14),
            grid_l: g.grid_l,
            kmax: g.kmax,
            out_dir: g.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            format: g.format.unwrap_or(Format::Csv),
            svg: g.svg.unwrap_or(false),
            seed: g.seed.unwrap_or(levy_rg::acceptance::DEFAULT_SEED),
        };
        if !s.grid_n.is_power_of_two() || s.grid_n < 16 {
            return Err(CliError::Config(format!("--grid-n {} must be a power of two >= 16", s.grid_n)));
        }
        if let Some(l) = s.grid_l {
            positive("--grid-l", l)?;
        }
        if let Some(k) = s.kmax {
            positive("--kmax", k)?;
        }
        Ok(s)
    }
}

pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Parses `1`, `-0.5`, `1+0.5i`, `1-2i`, `0.3i` or `1,0.5`.
pub fn parse_complex(text: &str, name: &str) -> Result<levy_rg::C64, CliError> {
    let bad = || CliError::Config(format!("{name}: cannot parse '{text}' as a complex number (use re, re+imi or re,im)"));
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some((re, im)) = t.split_once(',') {
        return Ok(levy_rg::C64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?));
    }
    if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not an exponent sign or the leading sign
        let bytes = body.as_bytes();
        let cut = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
        return match cut {
            Some(i) => {
                let im = &body[i..];
                let im = if im == "+" || im == "-" { format!("{im}1") } else { im.to_string() };
                Ok(levy_rg::C64::new(body[..i].parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?))
            }
            None => {
                let im = if body.is_empty() || body == "+" || body == "-" { format!("{body}1") } else { body.to_string() };
                Ok(levy_rg::C64::new(0.0, im.parse().map_err(|_| bad())?))
            }
        };
    }
    Ok(levy_rg::C64::new(t.parse().map_err(|_| bad())?, 0.0))
}

pub fn parse_list<T, F>(text: &str, name: &str, f: F) -> Result<Vec<T>, CliError>
where
    F: Fn(&str) -> Result<T, CliError>,
{
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Config(format!("{name}: empty list")));
    }
    items.into_iter().map(f).collect()
}

pub fn parse_f64(text: &str, name: &str) -> Result<f64, CliError> {
    text.parse().map_err(|_| CliError::Config(format!("{name}: '{text}' is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let c = |s| parse_complex(s, "x").unwrap();
        assert_eq!(c("1"), levy_rg::C64::new(1.0, 0.0));
        assert_eq!(c("1+0.5i"), levy_rg::C64::new(1.0, 0.5));
        assert_eq!(c("-1-2i"), levy_rg::C64::new(-1.0, -2.0));
        assert_eq!(c("0.3i"), levy_rg::C64::new(0.0, 0.3));
        assert_eq!(c("1e-3+2e-1i"), levy_rg::C64::new(1e-3, 0.2));
        assert_eq!(c("2, -1"), levy_rg::C64::new(2.0, -1.0));
        assert_eq!(c("1-i"), levy_rg::C64::new(1.0, -1.0));
        assert!(parse_complex("one", "x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let flag = FlowArgs { a: Some(3.0), ..Default::default() };
        let file = FlowArgs { a: Some(2.0), steps: Some(10), ..Default::default() };
        let m = flag.merge(file);
        assert_eq!(m.a, Some(3.0));
        assert_eq!(m.steps, Some(10));
    }
}
