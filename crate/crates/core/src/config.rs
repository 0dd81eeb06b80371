//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! kernel.id = epanechnikov
//! schedule.c1 = 0.38
//! model.beta = 1, 0, 0
//! ```
//!
//! Keys are checked against [`KNOWN_KEYS`]; lists are comma separated.
//! Every builder falls back to the library default for keys that are absent.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::edr::{DimensionRule, DEFAULT_THRESHOLD_FRACTION};
use crate::error::{Error, Result};
use crate::fieldsim::{FieldKind, FieldSpec, Link, MaWeights, SingleIndexSpec};
use crate::kernelest::{BandwidthSchedule, EstimatorConfig, FloorVariant, HScale, Kernel, KernelKind};
use crate::lattice::Site;
use crate::predictor::{NeighborCount, NeighborScanConfig, PredictorConfig, YEval};

pub const KNOWN_KEYS: &[&str] = &[
    "kernel.id",
    "kernel.order",
    "schedule.c1",
    "schedule.c2",
    "schedule.h_scale",
    "schedule.e_scale",
    "floor.variant",
    "dimension.rule",
    "dimension.threshold",
    "scan.delta",
    "scan.dmax",
    "scan.ygrid",
    "scan.central_fraction",
    "scan.y",
    "scan.anchor",
    "scan.terminate_exclusive",
    "scan.h_factor",
    "field.kind",
    "field.dims",
    "field.radius",
    "field.weights",
    "field.range",
    "field.seed",
    "model.d",
    "model.beta",
    "model.link",
    "model.noise_std",
    "model.rho",
    "model.dims",
    "model.seed",
    "bench.sizes",
    "bench.size",
    "bench.replicates",
    "bench.oracle_draws",
    "bench.theta",
    "bench.seeds",
    "bench.d",
    "sweep.links",
    "sweep.noise",
    "sweep.sizes",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if cfg.entries.contains_key(key) {
                return Err(Error::Parse(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Parse(format!("unknown config key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    pub fn estimator(&self) -> Result<EstimatorConfig> {
        let kind: KernelKind = self.get_or("kernel.id", KernelKind::Epanechnikov)?;
        let kernel = match self.get::<u32>("kernel.order")? {
            Some(order) => Kernel::with_order(kind, order)?,
            None => Kernel::new(kind)?,
        };
        let d = BandwidthSchedule::default();
        let schedule = BandwidthSchedule {
            h_scale: self.get_or::<HScale>("schedule.h_scale", d.h_scale)?,
            c1: self.get_or("schedule.c1", d.c1)?,
            e_scale: self.get_or("schedule.e_scale", d.e_scale)?,
            c2: self.get_or("schedule.c2", d.c2)?,
        };
        let floor: FloorVariant = self.get_or("floor.variant", FloorVariant::Max)?;
        EstimatorConfig::new(kernel, schedule, floor)
    }

    /// `dimension.rule` is `auto` (threshold fraction) or a fixed `D`.
    pub fn dimension_rule(&self) -> Result<DimensionRule> {
        let fraction = self.get_or("dimension.threshold", DEFAULT_THRESHOLD_FRACTION)?;
        match self.raw("dimension.rule") {
            None | Some("auto") => Ok(DimensionRule::ThresholdFraction(fraction)),
            Some(v) => v
                .parse()
                .map(DimensionRule::Fixed)
                .map_err(|_| Error::Parse(format!("dimension.rule `{v}` is neither `auto` nor an integer"))),
        }
    }

    pub fn scan(&self) -> Result<NeighborScanConfig> {
        let d = NeighborScanConfig::default();
        let y_eval = match self.get::<f64>("scan.y")? {
            Some(y) => YEval::Single(y),
            None => {
                let (size, fraction) = match d.y_eval {
                    YEval::Grid {
                        size,
                        central_fraction,
                    } => (size, central_fraction),
                    YEval::Single(_) => unreachable!(),
                };
                YEval::Grid {
                    size: self.get_or("scan.ygrid", size)?,
                    central_fraction: self.get_or("scan.central_fraction", fraction)?,
                }
            }
        };
        let anchor = self
            .list::<i64>("scan.anchor")?
            .map(Site::new)
            .transpose()?;
        Ok(NeighborScanConfig {
            delta: self.get_or("scan.delta", d.delta)?,
            d_max: self.get_or("scan.dmax", d.d_max)?,
            y_eval,
            anchor,
            terminate_exclusive: self.get_or("scan.terminate_exclusive", false)?,
            kernel: self.estimator()?.kernel,
            h_factor: self.get_or("scan.h_factor", d.h_factor)?,
        })
    }

    pub fn predictor(&self) -> Result<PredictorConfig> {
        Ok(PredictorConfig {
            estimator: self.estimator()?,
            dimension: self.dimension_rule()?,
            scan: self.scan()?,
        })
    }

    /// Field spec from the `field.*` keys. `kind` overrides `field.kind`.
    pub fn field_spec(&self, kind: Option<&str>, seed: u64) -> Result<FieldSpec> {
        let dims = self.list::<usize>("field.dims")?.unwrap_or_else(|| vec![40, 40]);
        let name = kind.or(self.raw("field.kind")).unwrap_or("white-noise");
        let kind = match name {
            "white-noise" => FieldKind::WhiteNoise,
            "moving-average" => {
                let weights = match self.raw("field.weights").unwrap_or("uniform") {
                    "uniform" => MaWeights::Uniform,
                    "diamond" => MaWeights::Diamond,
                    _ => MaWeights::Explicit(self.list::<f64>("field.weights")?.unwrap_or_default()),
                };
                FieldKind::MovingAverage {
                    radius: self.get_or("field.radius", 1)?,
                    weights,
                }
            }
            "gaussian-decay" => FieldKind::GaussianDecay {
                range: self.get_or("field.range", 1.0)?,
            },
            other => return Err(Error::InvalidSpec(format!("unknown field kind `{other}`"))),
        };
        let spec = FieldSpec {
            kind,
            dims,
            seed: self.get_or("field.seed", seed)?,
        };
        spec.window()?;
        Ok(spec)
    }

    /// Single-index model from the `model.*` keys. Defaults to `d = 3`,
    /// `beta = e1`, identity link, unit noise, `rho = 0`, 50 x 50 lattice.
    pub fn single_index(&self, seed: u64) -> Result<SingleIndexSpec> {
        let beta = match self.list::<f64>("model.beta")? {
            Some(beta) => {
                let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::InvalidSpec("model.beta must be nonzero".into()));
                }
                beta.iter().map(|b| b / norm).collect()
            }
            None => {
                let d: usize = self.get_or("model.d", 3)?;
                let mut beta = vec![0.0; d];
                if let Some(b) = beta.first_mut() {
                    *b = 1.0;
                }
                beta
            }
        };
        let spec = SingleIndexSpec {
            dims: self.list("model.dims")?.unwrap_or_else(|| vec![50, 50]),
            beta,
            link: self.get_or("model.link", Link::Identity)?,
            noise_std: self.get_or("model.noise_std", 1.0)?,
            rho: self.get_or("model.rho", 0.0)?,
            seed: self.get_or("model.seed", seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad list element `{s}` for `{key}`")))
        })
        .collect()
}

/// Resolved estimator settings for report echoes.
pub fn estimator_echo(config: &EstimatorConfig) -> BTreeMap<String, String> {
    let s = &config.schedule;
    [
        ("kernel.id", config.kernel.kind().as_str().to_string()),
        ("kernel.order", config.kernel.order().to_string()),
        ("schedule.c1", s.c1.to_string()),
        ("schedule.c2", s.c2.to_string()),
        ("schedule.h_scale", s.h_scale.to_string()),
        ("schedule.e_scale", s.e_scale.to_string()),
        ("floor.variant", config.floor.as_str().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// `dimension.*` keys reproducing `rule`.
pub fn dimension_echo(rule: DimensionRule) -> BTreeMap<String, String> {
    let mut echo = BTreeMap::new();
    match rule {
        DimensionRule::Fixed(d) => {
            echo.insert("dimension.rule".into(), d.to_string());
        }
        DimensionRule::ThresholdFraction(f) => {
            echo.insert("dimension.rule".into(), "auto".into());
            echo.insert("dimension.threshold".into(), f.to_string());
        }
    }
    echo
}

/// `bench.d` value for a neighbor count.
pub fn neighbor_count_echo(d: NeighborCount) -> String {
    match d {
        NeighborCount::Fixed(d) => d.to_string(),
        NeighborCount::Auto => "auto".into(),
    }
}

/// `scan.*` keys reproducing `scan`, plus the kernel id.
pub fn scan_echo(scan: &NeighborScanConfig) -> BTreeMap<String, String> {
    let mut echo = BTreeMap::new();
    echo.insert("scan.delta".into(), scan.delta.to_string());
    echo.insert("scan.dmax".into(), scan.d_max.to_string());
    match scan.y_eval {
        YEval::Single(y) => {
            echo.insert("scan.y".into(), y.to_string());
        }
        YEval::Grid {
            size,
            central_fraction,
        } => {
            echo.insert("scan.ygrid".into(), size.to_string());
            echo.insert("scan.central_fraction".into(), central_fraction.to_string());
        }
    }
    if let Some(anchor) = &scan.anchor {
        let coords: Vec<String> = anchor.coords().iter().map(i64::to_string).collect();
        echo.insert("scan.anchor".into(), coords.join(","));
    }
    echo.insert("scan.h_factor".into(), scan.h_factor.to_string());
    echo.insert("scan.terminate_exclusive".into(), scan.terminate_exclusive.to_string());
    echo.insert("kernel.id".into(), scan.kernel.kind().as_str().into());
    echo.insert("kernel.order".into(), scan.kernel.order().to_string());
    echo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let cfg = Config::parse(
            "# header\nkernel.id = quartic  # trailing\n\nschedule.c1=0.3\nmodel.beta = 1, 1, 0\n",
        )
        .unwrap();
        let est = cfg.estimator().unwrap();
        assert_eq!(est.kernel.kind(), KernelKind::Quartic);
        assert_eq!(est.schedule.c1, 0.3);
        let spec = cfg.single_index(7).unwrap();
        assert!((spec.beta[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("nope"), Err(Error::Parse(_))));
        assert!(matches!(Config::parse("kernel.idd = x"), Err(Error::Parse(_))));
        assert!(matches!(Config::parse("scan.delta = 1\nscan.delta = 2"), Err(Error::Parse(_))));
        let cfg = Config::parse("schedule.c1 = 0.49").unwrap();
        assert!(matches!(cfg.estimator(), Err(Error::InvalidSchedule(_))));
        let cfg = Config::parse("scan.dmax = many").unwrap();
        assert!(matches!(cfg.scan(), Err(Error::Parse(_))));
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = Config::default();
        assert_eq!(cfg.estimator().unwrap(), EstimatorConfig::default());
        assert_eq!(cfg.dimension_rule().unwrap(), DimensionRule::default());
        assert_eq!(cfg.scan().unwrap(), NeighborScanConfig::default());
        let echo = estimator_echo(&EstimatorConfig::default());
        assert_eq!(echo["schedule.h_scale"], "std");
        assert_eq!(echo["floor.variant"], "max");
    }

    #[test]
    fn field_kinds() {
        let cfg = Config::parse("field.kind = moving-average\nfield.weights = diamond\nfield.dims = 10,12").unwrap();
        let spec = cfg.field_spec(None, 3).unwrap();
        assert_eq!(spec.dims, vec![10, 12]);
        assert!(matches!(
            spec.kind,
            FieldKind::MovingAverage {
                radius: 1,
                weights: MaWeights::Diamond
            }
        ));
        assert!(cfg.field_spec(Some("bogus"), 3).is_err());
        assert_eq!(
            cfg.field_spec(Some("white-noise"), 3).unwrap().kind,
            FieldKind::WhiteNoise
        );
    }
}
