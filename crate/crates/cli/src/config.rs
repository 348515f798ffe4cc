//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! section-dotted (`mesh.n_theta`); unknown and repeated keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;
use weingarten::mesh::Resolution;
use weingarten::monitor::{GammaArg, MonitorParams};
use weingarten::problem::{parse_f, FExpr, Forcing};
use weingarten::symmetric::QuotientOrder;
use weingarten::{Execution, ProblemSpec, SolverOptions, SphereMesh, WarpProfile};

pub const KNOWN_KEYS: &[&str] = &[
    "warp.kind",
    "warp.coeffs",
    "warp.domain",
    "mesh.n_theta",
    "mesh.n_phi",
    "mesh.reduced",
    "problem.k",
    "problem.l",
    "problem.r1",
    "problem.r2",
    "phi.rm",
    "phi.c",
    "f.expr",
    "f.builtin",
    "f.rm",
    "f.alpha",
    "f.manufactured",
    "f.manufactured_expr",
    "f.pin",
    "solver.newton_tol",
    "solver.max_newton",
    "solver.t_step_init",
    "solver.t_step_min",
    "solver.damping",
    "solver.max_halvings",
    "solver.fd_step",
    "solver.exec",
    "monitor.alpha",
    "monitor.A",
    "monitor.gamma_arg",
    "assumptions.samples",
    "verify.r",
    "verify.r_axisym",
    "verify.n_reduced",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("line {line}: config key `{key}` given twice")]
    Duplicate { key: String, line: usize },

    #[error("missing required config key `{0}`")]
    Missing(&'static str),

    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },

    #[error("{0}")]
    Conflict(String),

    #[error("invalid problem: {0}")]
    Problem(#[from] weingarten::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
    /// Directory that relative paths (`f.manufactured`) resolve against.
    base_dir: PathBuf,
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        msg: msg.into(),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.into(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.into(),
                });
            }
            if !KNOWN_KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey {
                    key: k.into(),
                    line: i + 1,
                });
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    key: k.into(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::from("."),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Overrides one key, as done by `sweep` and the monitor flags.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.into(),
                line: 0,
            });
        }
        self.entries.insert(key.into(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// The effective configuration in config-file syntax, with
    /// `f.manufactured` resolved to an absolute path.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut out = self.entries.clone();
        if let Some(p) = out.get_mut("f.manufactured") {
            let resolved = self.resolve(p);
            *p = std::path::absolute(&resolved)
                .unwrap_or(resolved)
                .display()
                .to_string();
        }
        out
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| invalid(key, format!("`{v}`: {e}")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn required(&self, key: &'static str) -> Result<f64, ConfigError> {
        self.parsed(key)?.ok_or(ConfigError::Missing(key))
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| invalid(key, format!("`{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn expr(&self, key: &str, default: &str) -> Result<FExpr, ConfigError> {
        let text = self.get(key).unwrap_or(default);
        parse_f(text).map_err(|e| invalid(key, e.to_string()))
    }

    pub fn warp(&self) -> Result<WarpProfile, ConfigError> {
        let kind = self.get("warp.kind").unwrap_or("euclidean");
        let domain = match self.float_list("warp.domain")? {
            Some(d) if d.len() == 2 => Some((d[0], d[1])),
            Some(_) => return Err(invalid("warp.domain", "expected `lo, hi`")),
            None => None,
        };
        if kind != "custom" && self.get("warp.coeffs").is_some() {
            return Err(invalid("warp.coeffs", "only used with warp.kind = custom"));
        }
        let base = match kind {
            "euclidean" => WarpProfile::euclidean(),
            "spherical" => WarpProfile::spherical(),
            "hyperbolic" => WarpProfile::hyperbolic(),
            "custom" => {
                let coeffs = self
                    .float_list("warp.coeffs")?
                    .ok_or(ConfigError::Missing("warp.coeffs"))?;
                let domain = domain.ok_or(ConfigError::Missing("warp.domain"))?;
                let p = WarpProfile::custom(coeffs, domain)
                    .map_err(|e| invalid("warp.coeffs", e.to_string()))?;
                let report = p.validate();
                if let Some(v) = report.first_violation {
                    return Err(invalid(
                        "warp.coeffs",
                        format!("{} fails at r = {}", v.what, v.r),
                    ));
                }
                return Ok(p);
            }
            other => {
                return Err(invalid(
                    "warp.kind",
                    format!("`{other}` is not euclidean, spherical, hyperbolic or custom"),
                ))
            }
        };
        match domain {
            None => Ok(base),
            Some((lo, hi)) => {
                let (blo, bhi) = base.domain();
                if lo < blo || hi > bhi {
                    return Err(invalid(
                        "warp.domain",
                        format!("must lie inside ({blo}, {bhi})"),
                    ));
                }
                WarpProfile::new(base.kind().clone(), (lo, hi))
                    .map_err(|e| invalid("warp.domain", e.to_string()))
            }
        }
    }

    pub fn resolution(&self) -> Result<Resolution, ConfigError> {
        let reduced: bool = self.or("mesh.reduced", false)?;
        let n_theta: usize = self.or("mesh.n_theta", 32)?;
        let n_phi: usize = self.or("mesh.n_phi", 64)?;
        if n_theta < 16 {
            return Err(invalid("mesh.n_theta", "need at least 16"));
        }
        if reduced {
            return Ok(Resolution::reduced(n_theta));
        }
        if n_phi < 4 || n_phi % 2 != 0 {
            return Err(invalid("mesh.n_phi", "need an even number >= 4"));
        }
        Ok(Resolution::full(n_theta, n_phi))
    }

    pub fn quotient_order(&self) -> Result<QuotientOrder, ConfigError> {
        let k: usize = self.or("problem.k", 2)?;
        let l: usize = self.or("problem.l", 0)?;
        QuotientOrder::new(k, l)
            .and_then(|q| q.check_dim(weingarten::DIM))
            .map_err(|_| {
                invalid(
                    "problem.k",
                    format!("(k, l) = ({k}, {l}) needs 2 <= k <= n = 2 and l <= k - 2"),
                )
            })
    }

    pub fn solver(&self) -> Result<SolverOptions, ConfigError> {
        let d = SolverOptions::default();
        let exec = match self.get("solver.exec").unwrap_or("parallel") {
            "parallel" => Execution::Parallel,
            "serial" => Execution::Serial,
            other => {
                return Err(invalid(
                    "solver.exec",
                    format!("`{other}` is not serial or parallel"),
                ))
            }
        };
        let opts = SolverOptions {
            newton_tol: self.or("solver.newton_tol", d.newton_tol)?,
            max_newton: self.or("solver.max_newton", d.max_newton)?,
            t_step_init: self.or("solver.t_step_init", d.t_step_init)?,
            t_step_min: self.or("solver.t_step_min", d.t_step_min)?,
            damping: self.or("solver.damping", d.damping)?,
            max_halvings: self.or("solver.max_halvings", d.max_halvings)?,
            fd_step: self.or("solver.fd_step", d.fd_step)?,
            easy_iterations: d.easy_iterations,
            exec,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn monitor(&self) -> Result<MonitorParams, ConfigError> {
        let d = MonitorParams::default();
        let gamma_arg = match self.get("monitor.gamma_arg").unwrap_or("Lambda") {
            "Lambda" | "lambda" | "capital_lambda" => GammaArg::CapitalLambda,
            "r" => GammaArg::Radius,
            other => {
                return Err(invalid(
                    "monitor.gamma_arg",
                    format!("`{other}` is not Lambda or r"),
                ))
            }
        };
        let p = MonitorParams {
            alpha: self.or("monitor.alpha", d.alpha)?,
            big_a: self.or("monitor.A", d.big_a)?,
            gamma_arg,
        };
        if !p.alpha.is_finite() {
            return Err(invalid("monitor.alpha", "must be finite"));
        }
        if !p.big_a.is_finite() {
            return Err(invalid("monitor.A", "must be finite"));
        }
        Ok(p)
    }

    pub fn samples(&self) -> Result<usize, ConfigError> {
        let s: usize = self.or("assumptions.samples", 16)?;
        if s < 2 {
            return Err(invalid("assumptions.samples", "need at least 2"));
        }
        Ok(s)
    }

    pub fn verify(&self) -> Result<VerifyConfig, ConfigError> {
        let n_reduced = match self.get("verify.n_reduced") {
            None => vec![64, 128, 256],
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| invalid("verify.n_reduced", format!("`{s}`: {e}")))
                })
                .collect::<Result<_, _>>()?,
        };
        if n_reduced.len() < 2 {
            return Err(invalid("verify.n_reduced", "need at least two resolutions"));
        }
        Ok(VerifyConfig {
            r: self.expr("verify.r", "1 + 0.1*sin(th)*cos(ph)")?,
            r_axisym: self.expr("verify.r_axisym", "1 + 0.05*cos(th)")?,
            n_reduced,
        })
    }

    fn forcing(
        &self,
        profile: &WarpProfile,
        q: QuotientOrder,
        mesh: &SphereMesh,
    ) -> Result<Forcing, ConfigError> {
        let present: Vec<&str> = [
            "f.expr",
            "f.builtin",
            "f.manufactured",
            "f.manufactured_expr",
        ]
        .into_iter()
        .filter(|k| self.get(k).is_some())
        .collect();
        match present.as_slice() {
            [] => return Err(ConfigError::Missing("f.expr")),
            [_] => {}
            many => {
                return Err(ConfigError::Conflict(format!(
                    "give exactly one of {}",
                    many.join(", ")
                )))
            }
        }
        let pin: f64 = self.or("f.pin", 0.0)?;
        if self.get("f.pin").is_some()
            && !matches!(present[0], "f.manufactured" | "f.manufactured_expr")
        {
            return Err(invalid(
                "f.pin",
                "only used with f.manufactured or f.manufactured_expr",
            ));
        }
        if !(pin >= 0.0 && pin.is_finite()) {
            return Err(invalid("f.pin", "must be finite and non-negative"));
        }
        let builtin_only = ["f.rm", "f.alpha"];
        if present[0] != "f.builtin" {
            if let Some(k) = builtin_only.iter().find(|k| self.get(k).is_some()) {
                return Err(invalid(k, "only used with f.builtin"));
            }
        }
        Ok(match present[0] {
            "f.expr" => Forcing::Expr(self.expr("f.expr", "")?),
            "f.builtin" => {
                let name = self.get("f.builtin").unwrap_or_default();
                if name != "round_exponential" {
                    return Err(invalid(
                        "f.builtin",
                        format!("`{name}` is not round_exponential"),
                    ));
                }
                Forcing::RoundExponential {
                    rm: self.required("f.rm")?,
                    alpha: self.required("f.alpha")?,
                }
            }
            "f.manufactured_expr" => {
                let target = self.expr("f.manufactured_expr", "")?;
                Forcing::manufacture_expr(target, profile, q, pin, mesh)
                    .map_err(|e| invalid("f.manufactured_expr", e.to_string()))?
            }
            _ => {
                let path = self.resolve(self.get("f.manufactured").unwrap_or_default());
                let file = std::fs::File::open(&path)
                    .map_err(|e| invalid("f.manufactured", format!("{}: {e}", path.display())))?;
                let target = weingarten::io::read_field(file)
                    .map_err(|e| invalid("f.manufactured", e.to_string()))?;
                Forcing::manufacture_field(target, profile, q, pin)
                    .map_err(|e| invalid("f.manufactured", e.to_string()))?
            }
        })
    }

    /// Everything a solve needs, validated.
    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let profile = self.warp()?;
        let resolution = self.resolution()?;
        let q = self.quotient_order()?;
        let r1 = self.required("problem.r1")?;
        let r2 = self.required("problem.r2")?;
        if !(r1 < r2) {
            return Err(invalid(
                "problem.r1",
                format!("problem.r1 = {r1} must be less than problem.r2 = {r2}"),
            ));
        }
        let phi_rm = self.or("phi.rm", 0.5 * (r1 + r2))?;
        let phi_c = self.or("phi.c", 1.0)?;
        let mesh = resolution.build()?;
        let forcing = self.forcing(&profile, q, &mesh)?;
        let spec = ProblemSpec::with_barrier(q, profile, forcing, r1, r2, phi_rm, phi_c)?;
        Ok(RunConfig {
            spec,
            mesh,
            solver: self.solver()?,
            monitor: self.monitor()?,
            samples: self.samples()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub mesh: Arc<SphereMesh>,
    pub solver: SolverOptions,
    pub monitor: MonitorParams,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub r: FExpr,
    pub r_axisym: FExpr,
    pub n_reduced: Vec<usize>,
}
