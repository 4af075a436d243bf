//! Run configuration: INI-style sections with `key = value` lines.
//!
//! ```text
//! [mesh]
//! refinements = 4
//! slit = 0.0 0.5 0.5 0.5
//! [material]
//! mu = 80.77
//! ...
//! ```
//!
//! Command-line overrides take the form `--section.key=value`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::fem::BcPreset;
use crate::lscheme::{LSchemeConfig, Strategy};
use crate::material::MaterialParams;
use crate::subsolvers::{NewtonConfig, TangentMode};

/// Environment variable that replaces `[output] dir`.
pub const OUTPUT_DIR_ENV: &str = "PFL_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    Type { key: String, value: String, expected: &'static str },
    #[error("key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("override `{0}` must look like --section.key=value")]
    Override(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// unit square after `refinements` uniform refinements of a 2×2 grid,
    /// optionally cut by an axis-aligned slit
    Generated { refinements: u32, slit: Option<([f64; 2], [f64; 2])> },
    File(PathBuf),
}

/// ε either fixed or tied to the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSpec {
    Absolute(f64),
    TimesH(f64),
}

/// γ either fixed or as a multiple of G_c/ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Absolute(f64),
    TimesGcOverEps(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSpec {
    pub mu: f64,
    pub lambda: f64,
    /// kN/mm
    pub gc: f64,
    pub kappa: f64,
    pub eps: EpsSpec,
    pub gamma: GammaSpec,
}

impl MaterialSpec {
    /// Fixes ε and γ once the mesh size is known.
    pub fn resolve(&self, h: f64) -> MaterialParams {
        let eps = match self.eps {
            EpsSpec::Absolute(e) => e,
            EpsSpec::TimesH(k) => k * h,
        };
        let gamma = match self.gamma {
            GammaSpec::Absolute(g) => g,
            GammaSpec::TimesGcOverEps(k) => k * self.gc / eps,
        };
        MaterialParams {
            mu: self.mu,
            lambda: self.lambda,
            gc: self.gc,
            kappa: self.kappa,
            eps,
            gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// VTK snapshot every this many steps; 0 writes only the final state
    pub vtk_every: usize,
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub material: MaterialSpec,
    pub lscheme: LSchemeConfig,
    pub dt: f64,
    pub steps: usize,
    pub bc: BcPreset,
    pub output: OutputSpec,
}

/// Flat `section.key -> value` map with usage tracking.
struct Table {
    entries: BTreeMap<String, String>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Table {
    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::Type {
                    key: key.to_string(),
                    value: v.to_string(),
                    expected,
                })
            })
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse(key, "a number")
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn required_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.parse(key, "true or false")?.unwrap_or(default))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parse(key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn unused(&self) -> Option<String> {
        let used = self.used.borrow();
        self.entries.keys().find(|k| !used.contains(*k)).cloned()
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
}

fn numbers(key: &str, text: &str, count: usize) -> Result<Vec<f64>, ConfigError> {
    let vals: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError::Type { key: key.to_string(), value: text.to_string(), expected: "a list of numbers" })?;
    if vals.len() != count {
        return Err(invalid(key, format!("expected {count} numbers, got {}", vals.len())));
    }
    Ok(vals)
}

/// Splits `--section.key=value` into (`section.key`, `value`).
pub fn parse_override(arg: &str) -> Result<(String, String), ConfigError> {
    let body = arg.strip_prefix("--").unwrap_or(arg);
    let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Override(arg.to_string()))?;
    if !key.contains('.') || key.starts_with('.') || key.ends_with('.') {
        return Err(ConfigError::Override(arg.to_string()));
    }
    Ok((key.trim().to_string(), value.trim().to_string()))
}

pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config_str(&text, overrides, base)
}

/// Parses config text. Relative mesh paths are resolved against `base`.
pub fn parse_config_str(text: &str, overrides: &[(String, String)], base: &Path) -> Result<RunConfig, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut entries = BTreeMap::new();
    for (section, props) in ini.iter() {
        for (k, v) in props.iter() {
            let key = match section {
                Some(s) => format!("{s}.{k}"),
                None => return Err(ConfigError::UnknownKey(k.to_string())),
            };
            entries.insert(key, v.to_string());
        }
    }
    for (k, v) in overrides {
        entries.insert(k.clone(), v.clone());
    }
    let t = Table { entries, used: Default::default() };

    let mesh = match (t.raw("mesh.file"), t.parse::<u32>("mesh.refinements", "a nonnegative integer")?) {
        (Some(_), Some(_)) => return Err(invalid("mesh.file", "give either mesh.file or mesh.refinements, not both")),
        (Some(f), None) => {
            if t.raw("mesh.slit").is_some() {
                return Err(invalid("mesh.slit", "only applies to generated meshes"));
            }
            MeshSource::File(base.join(f))
        }
        (None, Some(refinements)) => {
            let slit = t
                .raw("mesh.slit")
                .map(|s| numbers("mesh.slit", s, 4).map(|v| ([v[0], v[1]], [v[2], v[3]])))
                .transpose()?;
            MeshSource::Generated { refinements, slit }
        }
        (None, None) => return Err(ConfigError::Missing("mesh.refinements".into())),
    };

    let gc = match (t.f64("material.gc")?, t.f64("material.gc_n_per_mm")?) {
        (Some(_), Some(_)) => return Err(invalid("material.gc", "give either gc (kN/mm) or gc_n_per_mm")),
        (Some(g), None) => g,
        (None, Some(g)) => g * 1e-3,
        (None, None) => return Err(ConfigError::Missing("material.gc".into())),
    };
    let eps = match (t.f64("material.eps")?, t.f64("material.eps_over_h")?) {
        (Some(_), Some(_)) => return Err(invalid("material.eps", "give either eps or eps_over_h")),
        (Some(e), None) => EpsSpec::Absolute(e),
        (None, Some(k)) => EpsSpec::TimesH(k),
        (None, None) => EpsSpec::TimesH(2.0),
    };
    let gamma = match (t.f64("material.gamma")?, t.f64("material.gamma_over_gc_eps")?) {
        (Some(_), Some(_)) => return Err(invalid("material.gamma", "give either gamma or gamma_over_gc_eps")),
        (Some(g), None) => GammaSpec::Absolute(g),
        (None, Some(k)) => GammaSpec::TimesGcOverEps(k),
        (None, None) => GammaSpec::TimesGcOverEps(1e3),
    };
    let material = MaterialSpec {
        mu: t.required_f64("material.mu")?,
        lambda: t.required_f64("material.lambda")?,
        gc,
        kappa: t.f64_or("material.kappa", 1e-10)?,
        eps,
        gamma,
    };

    let d = LSchemeConfig::default();
    let strategy = match t.raw("lscheme.strategy") {
        Some(s) => s.parse::<Strategy>().map_err(|e| invalid("lscheme.strategy", e.to_string()))?,
        None => d.strategy,
    };
    let tangent = match t.raw("lscheme.tangent") {
        None | Some("analytic") => TangentMode::Analytic,
        Some("finite_difference") => TangentMode::FiniteDifference,
        Some(other) => return Err(invalid("lscheme.tangent", format!("`{other}` is not analytic or finite_difference"))),
    };
    let lscheme = LSchemeConfig {
        strategy,
        l0: t.f64_or("lscheme.l0", d.l0)?,
        a: t.f64_or("lscheme.a", d.a)?,
        l_max: t.f64_or("lscheme.l_max", d.l_max)?,
        tol: t.f64_or("lscheme.tol", d.tol)?,
        max_outer: t.usize_or("lscheme.max_outer", d.max_outer)?,
        reset_l_each_step: t.bool_or("lscheme.reset_l", d.reset_l_each_step)?,
        reset_xi_each_step: t.bool_or("lscheme.reset_xi", d.reset_xi_each_step)?,
        update_xi: t.bool_or("lscheme.update_xi", d.update_xi)?,
        newton: NewtonConfig {
            tol: t.f64_or("lscheme.newton_tol", d.newton.tol)?,
            max_iter: t.usize_or("lscheme.newton_max_iter", d.newton.max_iter)?,
        },
        tangent,
    };
    lscheme.validate().map_err(|e| invalid("lscheme", e.to_string()))?;

    let dt = t.required_f64("loading.dt")?;
    if !(dt > 0.0) {
        return Err(invalid("loading.dt", "must be positive"));
    }
    let steps = t.parse::<usize>("loading.steps", "a nonnegative integer")?
        .ok_or_else(|| ConfigError::Missing("loading.steps".into()))?;
    let u_bar = t.f64_or("loading.u_bar", 1.0)?;
    let bc = match t.raw("loading.bc").unwrap_or("sen_shear") {
        "sen_shear" => BcPreset::SenShear { u_bar },
        "three_point_bending" => BcPreset::ThreePointBending { u_bar },
        other => return Err(invalid("loading.bc", format!("unknown preset `{other}`"))),
    };

    let file_dir = t.raw("output.dir").map(PathBuf::from);
    let dir = std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .or(file_dir)
        .unwrap_or_else(|| PathBuf::from("output"));
    let output = OutputSpec {
        dir,
        vtk_every: t.usize_or("output.vtk_every", 0)?,
        prefix: t.raw("output.prefix").unwrap_or("run").to_string(),
    };

    if let Some(k) = t.unused() {
        return Err(ConfigError::UnknownKey(k));
    }
    Ok(RunConfig { mesh, material, lscheme, dt, steps, bc, output })
}
