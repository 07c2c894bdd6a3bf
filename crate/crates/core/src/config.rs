//! JSON run configuration.
//!
//! ```json
//! {
//!   "params":    { "a": 0.3, "b": 0.4, "alpha": 0.5, "beta": 0.0, "n0": 1, "m0": 1 },
//!   "run":       { "horizon": 10000, "replications": 1000, "master_seed": 42,
//!                  "checkpoints": [5000, 10000], "stride": { "kind": "geometric", "ratio": 1.05 },
//!                  "mode": "marginal", "threads": 0, "lil_from": 1000, "path_ratio": 1.01 },
//!   "output":    { "directory": "out", "formats": ["csv", "json"] },
//!   "tolerance": { "mean_se": 4.0, "variance_rel": 0.1, "asclt_sup": 0.05 }
//! }
//! ```
//!
//! Every block and every field is optional in the file. Command-line flags are
//! merged on top (flags win) before [`RunConfig::params`] and friends resolve
//! the final values; a value that is still missing is reported by field name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{OdlError, Result};
use crate::harness::Tolerances;
use crate::model::{Mode, StrideSpec};
use crate::params::{validate_params, ModelParams, RawParams};

pub const DEFAULT_HORIZON: u64 = 10_000;
pub const DEFAULT_REPLICATIONS: u64 = 1_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub n0: Option<f64>,
    pub m0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub horizon: Option<u64>,
    pub replications: Option<u64>,
    pub master_seed: Option<u64>,
    pub checkpoints: Option<Vec<u64>>,
    pub stride: Option<StrideSpec>,
    pub mode: Option<Mode>,
    pub threads: Option<usize>,
    /// first step of the LIL envelope grid
    pub lil_from: Option<u64>,
    /// geometric ratio used to subsample the pathwise log-averages
    pub path_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// Per-field overrides of [`Tolerances`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceBlock {
    pub mean_se: Option<f64>,
    pub variance_rel: Option<f64>,
    pub kernel_rel: Option<f64>,
    pub asclt_sup: Option<f64>,
    pub cn_var_rel: Option<f64>,
    pub cn_limit_abs: Option<f64>,
    pub correlation_min: Option<f64>,
    pub lil_upper: Option<f64>,
    pub lil_max_ratio: Option<f64>,
    /// start from [`Tolerances::zero`] instead of the defaults
    pub zero: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub tolerance: ToleranceBlock,
}

fn missing(field: &str, flag: &str) -> OdlError {
    OdlError::Config {
        field: field.to_string(),
        message: format!("missing; set --{flag} or `{field}` in the config file"),
    }
}

fn take<T: Clone>(over: &Option<T>, base: &Option<T>) -> Option<T> {
    over.clone().or_else(|| base.clone())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| OdlError::Config {
            field: json_error_field(&e.to_string()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| OdlError::Config {
            field: "--config".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    /// `other` wins wherever it sets a value.
    pub fn overlay(&self, other: &RunConfig) -> RunConfig {
        let (p, q) = (&self.params, &other.params);
        let (r, s) = (&self.run, &other.run);
        let (t, u) = (&self.tolerance, &other.tolerance);
        RunConfig {
            params: ParamsBlock {
                a: take(&q.a, &p.a),
                b: take(&q.b, &p.b),
                alpha: take(&q.alpha, &p.alpha),
                beta: take(&q.beta, &p.beta),
                n0: take(&q.n0, &p.n0),
                m0: take(&q.m0, &p.m0),
            },
            run: RunBlock {
                horizon: take(&s.horizon, &r.horizon),
                replications: take(&s.replications, &r.replications),
                master_seed: take(&s.master_seed, &r.master_seed),
                checkpoints: take(&s.checkpoints, &r.checkpoints),
                stride: take(&s.stride, &r.stride),
                mode: take(&s.mode, &r.mode),
                threads: take(&s.threads, &r.threads),
                lil_from: take(&s.lil_from, &r.lil_from),
                path_ratio: take(&s.path_ratio, &r.path_ratio),
            },
            output: OutputBlock {
                directory: take(&other.output.directory, &self.output.directory),
                formats: take(&other.output.formats, &self.output.formats),
            },
            tolerance: ToleranceBlock {
                mean_se: take(&u.mean_se, &t.mean_se),
                variance_rel: take(&u.variance_rel, &t.variance_rel),
                kernel_rel: take(&u.kernel_rel, &t.kernel_rel),
                asclt_sup: take(&u.asclt_sup, &t.asclt_sup),
                cn_var_rel: take(&u.cn_var_rel, &t.cn_var_rel),
                cn_limit_abs: take(&u.cn_limit_abs, &t.cn_limit_abs),
                correlation_min: take(&u.correlation_min, &t.correlation_min),
                lil_upper: take(&u.lil_upper, &t.lil_upper),
                lil_max_ratio: take(&u.lil_max_ratio, &t.lil_max_ratio),
                zero: take(&u.zero, &t.zero),
            },
        }
    }

    pub fn raw_params(&self) -> Result<RawParams> {
        let p = &self.params;
        Ok(RawParams {
            a: p.a.ok_or_else(|| missing("params.a", "a"))?,
            b: p.b.ok_or_else(|| missing("params.b", "b"))?,
            alpha: p.alpha.ok_or_else(|| missing("params.alpha", "alpha"))?,
            beta: p.beta.ok_or_else(|| missing("params.beta", "beta"))?,
            n0: p.n0.ok_or_else(|| missing("params.n0", "n0"))?,
            m0: p.m0.ok_or_else(|| missing("params.m0", "m0"))?,
        })
    }

    /// Validated model parameters. Constraint failures keep their own message.
    pub fn params(&self) -> Result<ModelParams> {
        validate_params(self.raw_params()?)
    }

    pub fn horizon(&self) -> Result<u64> {
        match self.run.horizon {
            Some(0) => Err(OdlError::Config {
                field: "run.horizon".into(),
                message: "must be at least 1".into(),
            }),
            Some(h) => Ok(h),
            None => Ok(DEFAULT_HORIZON),
        }
    }

    pub fn replications(&self) -> Result<u64> {
        match self.run.replications {
            Some(r) if r < 2 => Err(OdlError::Config {
                field: "run.replications".into(),
                message: "must be at least 2".into(),
            }),
            Some(r) => Ok(r),
            None => Ok(DEFAULT_REPLICATIONS),
        }
    }

    pub fn seed(&self) -> u64 {
        self.run.master_seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn mode(&self) -> Mode {
        self.run.mode.unwrap_or_default()
    }

    pub fn threads(&self) -> usize {
        self.run.threads.unwrap_or(0)
    }

    pub fn stride(&self) -> Result<StrideSpec> {
        let s = self.run.stride.clone().unwrap_or_default();
        match &s {
            StrideSpec::Geometric { ratio } if !(*ratio > 1.0) => Err(OdlError::Config {
                field: "run.stride.ratio".into(),
                message: format!("must exceed 1, got {ratio}"),
            }),
            StrideSpec::Every { k: 0 } => Err(OdlError::Config {
                field: "run.stride.k".into(),
                message: "must be at least 1".into(),
            }),
            _ => Ok(s),
        }
    }

    pub fn path_ratio(&self) -> Result<f64> {
        match self.run.path_ratio {
            Some(r) if !(r > 1.0) => Err(OdlError::Config {
                field: "run.path_ratio".into(),
                message: format!("must exceed 1, got {r}"),
            }),
            Some(r) => Ok(r),
            None => Ok(crate::harness::PATH_RATIO),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn wants(&self, f: Format) -> bool {
        match &self.output.formats {
            Some(list) => list.contains(&f),
            None => true,
        }
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        let t = &self.tolerance;
        let mut out = if t.zero == Some(true) {
            Tolerances::zero()
        } else {
            Tolerances::default()
        };
        let slots: [(&str, Option<f64>, &mut f64); 9] = [
            ("mean_se", t.mean_se, &mut out.mean_se),
            ("variance_rel", t.variance_rel, &mut out.variance_rel),
            ("kernel_rel", t.kernel_rel, &mut out.kernel_rel),
            ("asclt_sup", t.asclt_sup, &mut out.asclt_sup),
            ("cn_var_rel", t.cn_var_rel, &mut out.cn_var_rel),
            ("cn_limit_abs", t.cn_limit_abs, &mut out.cn_limit_abs),
            ("correlation_min", t.correlation_min, &mut out.correlation_min),
            ("lil_upper", t.lil_upper, &mut out.lil_upper),
            ("lil_max_ratio", t.lil_max_ratio, &mut out.lil_max_ratio),
        ];
        for (name, v, slot) in slots {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(OdlError::Config {
                        field: format!("tolerance.{name}"),
                        message: format!("must be a finite non-negative number, got {v}"),
                    });
                }
                *slot = v;
            }
        }
        Ok(out)
    }
}

// serde_json reports unknown fields as "unknown field `x`, expected ..."
fn json_error_field(msg: &str) -> String {
    for key in ["unknown field `", "missing field `"] {
        if let Some(i) = msg.find(key) {
            let rest = &msg[i + key.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "--config".to_string()
}
