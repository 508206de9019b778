//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! object.kind = gaussian          # gaussian | uniform | points | table
//! object.deltas = 0.04, 0.02, 0.01
//! otf.kind = gaussian             # gaussian | flat | custom
//! otf.beta = 1
//! compute.mu = 1, 2, 3
//! compute.q_max = 30
//! output.formats = csv, json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qbound::moments::DEFAULT_TABLE_RESOLUTION;
use qbound::thermal::{DEFAULT_RIDGE, DEFAULT_SPREAD};
use qbound::Precision;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectSpec {
    Gaussian,
    Uniform,
    Points { positions: Vec<String>, weights: Vec<String> },
    Table { path: PathBuf, resolution: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum OtfSpec {
    Gaussian { beta: String },
    Flat { beta: String },
    Custom { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComputeSpec {
    pub mu: Vec<usize>,
    pub q_max: usize,
    pub precision_bits: u32,
    pub w: Option<String>,
    pub rtol: f64,
    pub photons: String,
    pub direct: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalSpec {
    pub seed: u64,
    pub models: usize,
    pub max_dim: usize,
    pub spread: f64,
    pub ridge: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub object: ObjectSpec,
    pub center: String,
    /// Δ values in config order (decimal text, parsed at run precision).
    pub deltas: Vec<String>,
    pub otf: OtfSpec,
    pub compute: ComputeSpec,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
    pub thermal: ThermalSpec,
}

const KEYS: &[&str] = &[
    "object.kind",
    "object.delta",
    "object.deltas",
    "object.center",
    "object.positions",
    "object.weights",
    "object.table",
    "object.resolution",
    "otf.kind",
    "otf.beta",
    "otf.table",
    "compute.mu",
    "compute.q_max",
    "compute.precision",
    "compute.w",
    "compute.rtol",
    "compute.photons",
    "compute.direct",
    "output.dir",
    "output.formats",
    "thermal.seed",
    "thermal.models",
    "thermal.max_dim",
    "thermal.spread",
    "thermal.ridge",
];

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::InvalidConfig(msg.into())
}

fn parse_pairs(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected key = value", i + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(invalid(format!("unknown key {key}")));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(invalid(format!("duplicate key {key}")));
        }
    }
    Ok(map)
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn number(key: &str, s: &str) -> CliResult<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| invalid(format!("{key}: not a number: {s}")))
}

fn parse<T: std::str::FromStr>(key: &str, s: &str) -> CliResult<T> {
    s.parse().map_err(|_| invalid(format!("{key}: cannot parse {s}")))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Relative table paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let mut m = parse_pairs(text)?;
        let mut take = |k: &str| m.remove(k);

        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let kind = take("object.kind").unwrap_or_else(|| "gaussian".into());
        let positions = take("object.positions").map(|v| list(&v));
        let weights = take("object.weights").map(|v| list(&v));
        let table = take("object.table");
        let resolution = match take("object.resolution") {
            Some(v) => parse("object.resolution", &v)?,
            None => DEFAULT_TABLE_RESOLUTION,
        };
        let object = match kind.as_str() {
            "gaussian" => ObjectSpec::Gaussian,
            "uniform" => ObjectSpec::Uniform,
            "points" => {
                let positions = positions.ok_or_else(|| invalid("points object needs object.positions"))?;
                let weights = weights.ok_or_else(|| invalid("points object needs object.weights"))?;
                if positions.len() != weights.len() || positions.is_empty() {
                    return Err(invalid("object.positions and object.weights must have equal nonzero length"));
                }
                for p in positions.iter().chain(&weights) {
                    number("object.positions", p)?;
                }
                ObjectSpec::Points { positions, weights }
            }
            "table" => ObjectSpec::Table {
                path: resolve(table.ok_or_else(|| invalid("table object needs object.table"))?),
                resolution,
            },
            other => return Err(invalid(format!("unknown object kind {other}"))),
        };
        let center = take("object.center").unwrap_or_else(|| "0".into());
        number("object.center", &center)?;

        let deltas = match (take("object.delta"), take("object.deltas")) {
            (Some(_), Some(_)) => return Err(invalid("give object.delta or object.deltas, not both")),
            (Some(d), None) => vec![d],
            (None, Some(d)) => list(&d),
            (None, None) => return Err(invalid("object.delta is required")),
        };
        if deltas.is_empty() {
            return Err(invalid("object.deltas is empty"));
        }
        for d in &deltas {
            if number("object.delta", d)? <= 0.0 {
                return Err(invalid("delta must be positive"));
            }
        }

        let otf_kind = take("otf.kind").unwrap_or_else(|| "gaussian".into());
        let beta = take("otf.beta").unwrap_or_else(|| "1".into());
        let otf_table = take("otf.table");
        let otf = match otf_kind.as_str() {
            "gaussian" | "flat" => {
                if number("otf.beta", &beta)? <= 0.0 {
                    return Err(invalid("beta must be positive"));
                }
                if otf_kind == "gaussian" {
                    OtfSpec::Gaussian { beta }
                } else {
                    OtfSpec::Flat { beta }
                }
            }
            "custom" => OtfSpec::Custom {
                path: resolve(otf_table.ok_or_else(|| invalid("custom OTF needs otf.table"))?),
            },
            other => return Err(invalid(format!("unknown otf kind {other}"))),
        };

        let mu = match take("compute.mu") {
            Some(v) => list(&v)
                .iter()
                .map(|s| parse::<usize>("compute.mu", s))
                .collect::<CliResult<Vec<_>>>()?,
            None => vec![1, 2],
        };
        if mu.is_empty() || mu.contains(&0) {
            return Err(invalid("mu must be >= 1"));
        }
        let q_max = match take("compute.q_max") {
            Some(v) => parse("compute.q_max", &v)?,
            None => qbound::bounds::DEFAULT_Q_MAX,
        };
        if q_max < 2 {
            return Err(invalid("q_max must be >= 2"));
        }
        let precision_bits = match take("compute.precision") {
            Some(v) => parse("compute.precision", &v)?,
            None => Precision::DEFAULT_BITS,
        };
        check_precision(precision_bits)?;
        let w = take("compute.w");
        if let Some(w) = &w {
            if number("compute.w", w)? <= 0.0 {
                return Err(invalid("w must be positive"));
            }
        }
        let rtol = match take("compute.rtol") {
            Some(v) => number("compute.rtol", &v)?,
            None => qbound::bounds::DEFAULT_RTOL,
        };
        if rtol <= 0.0 {
            return Err(invalid("rtol must be positive"));
        }
        let photons = take("compute.photons").unwrap_or_else(|| "1".into());
        if number("compute.photons", &photons)? <= 0.0 {
            return Err(invalid("photons must be positive"));
        }
        let direct = match take("compute.direct") {
            Some(v) => parse("compute.direct", &v)?,
            None => true,
        };

        let output_dir = PathBuf::from(take("output.dir").unwrap_or_else(|| "qbound-out".into()));
        let formats = match take("output.formats") {
            Some(v) => list(&v)
                .iter()
                .map(|f| match f.as_str() {
                    "csv" => Ok(Format::Csv),
                    "json" => Ok(Format::Json),
                    other => Err(invalid(format!("unknown output format {other}"))),
                })
                .collect::<CliResult<Vec<_>>>()?,
            None => vec![Format::Csv, Format::Json],
        };
        if formats.is_empty() {
            return Err(invalid("output.formats must be non-empty"));
        }

        let thermal = ThermalSpec {
            seed: take("thermal.seed").map(|v| parse("thermal.seed", &v)).transpose()?.unwrap_or(1),
            models: take("thermal.models").map(|v| parse("thermal.models", &v)).transpose()?.unwrap_or(50),
            max_dim: take("thermal.max_dim").map(|v| parse("thermal.max_dim", &v)).transpose()?.unwrap_or(4),
            spread: take("thermal.spread")
                .map(|v| number("thermal.spread", &v))
                .transpose()?
                .unwrap_or(DEFAULT_SPREAD),
            ridge: take("thermal.ridge")
                .map(|v| number("thermal.ridge", &v))
                .transpose()?
                .unwrap_or(DEFAULT_RIDGE),
        };
        if thermal.max_dim == 0 {
            return Err(invalid("thermal.max_dim must be >= 1"));
        }

        Ok(RunConfig {
            object,
            center,
            deltas,
            otf,
            compute: ComputeSpec {
                mu,
                q_max,
                precision_bits,
                w,
                rtol,
                photons,
                direct,
            },
            output_dir,
            formats,
            thermal,
        })
    }

    pub fn precision(&self) -> Precision {
        Precision::new(self.compute.precision_bits).expect("validated")
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub fn check_precision(bits: u32) -> CliResult<()> {
    if bits < Precision::MIN_BITS {
        return Err(invalid(format!("precision must be >= {}", Precision::MIN_BITS)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> CliResult<RunConfig> {
        RunConfig::parse(s, Path::new("/cfg"))
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse_str("object.delta = 0.01\n").unwrap();
        assert_eq!(c.object, ObjectSpec::Gaussian);
        assert_eq!(c.deltas, vec!["0.01"]);
        assert_eq!(c.compute.q_max, 30);
        assert_eq!(c.compute.precision_bits, 256);
        assert_eq!(c.formats, vec![Format::Csv, Format::Json]);
        assert_eq!(c.thermal.models, 50);
    }

    #[test]
    fn zero_delta_rejected() {
        let e = parse_str("object.delta = 0\n").unwrap_err();
        assert_eq!(e.to_string(), "invalid_config: delta must be positive");
    }

    #[test]
    fn comments_lists_and_paths() {
        let c = parse_str(
            "# sweep\nobject.kind = table # density\nobject.table = f.csv\nobject.deltas = 0.04, 0.02,0.01\ncompute.mu = 2,3\n",
        )
        .unwrap();
        assert_eq!(c.deltas.len(), 3);
        assert_eq!(c.compute.mu, vec![2, 3]);
        match c.object {
            ObjectSpec::Table { path, .. } => assert_eq!(path, PathBuf::from("/cfg/f.csv")),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "object.delta = 0.1\nbogus.key = 1\n",
            "object.delta = 0.1\nobject.delta = 0.2\n",
            "object.delta = 0.1\ncompute.mu = 0\n",
            "object.delta = 0.1\ncompute.precision = 32\n",
            "object.delta = 0.1\noutput.formats = \n",
            "object.delta = 0.1\nobject.kind = points\nobject.positions = 1\n",
            "compute.mu = 1\n",
            "object.delta = -1\n",
            "object.delta = 0.1\notf.beta = 0\n",
        ] {
            assert!(matches!(parse_str(text), Err(CliError::InvalidConfig(_))), "{text}");
        }
    }
}
