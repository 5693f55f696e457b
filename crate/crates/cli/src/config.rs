//! Flat `section.key = value` run configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Every key must be
//! known and may appear once. Values are validated when the run is built,
//! with the offending line in the diagnostic.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use singeig_core::{
    Coefficients, Drift, DomainSpec, EigConfig, EigMethod, OperatorSpec, Shape, SolveConfig, SymMat2, Zeroth,
};

use crate::io;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path, l, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "domain.shape",
    "domain.length",
    "domain.x0",
    "domain.lx",
    "domain.ly",
    "domain.origin_x",
    "domain.origin_y",
    "domain.radius",
    "domain.center_x",
    "domain.center_y",
    "domain.r_inner",
    "domain.r_outer",
    "domain.mask_file",
    "domain.scale",
    "grid.n",
    "operator.kind",
    "operator.a",
    "operator.A",
    "operator.q",
    "operator.alpha",
    "operator.m11",
    "operator.m12",
    "operator.m22",
    "drift.hx",
    "drift.hy",
    "c.constant",
    "forcing.constant",
    "forcing.lambda",
    "solver.delta_min",
    "solver.damping",
    "solver.tol",
    "solver.max_iter",
    "solver.cap",
    "solver.newton",
    "eigen.method",
    "eigen.sign",
    "eigen.tol",
    "eigen.lambda_lo",
    "eigen.lambda_hi",
    "verify.suite",
    "verify.seeds",
    "verify.resolutions",
    "verify.pairs",
    "verify.inner_scale",
    "verify.scan_factors",
    "verify.tolerance",
    "verify.rel_tol",
    "verify.hopf_min",
    "verify.holder_min",
    "verify.holder_residual",
    "verify.radii",
    "sweep.command",
    "sweep.key",
    "sweep.values",
    "output.dir",
    "output.prefix",
];

/// Raw key-value pairs with their source lines.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub path: String,
    /// Directory of the config file; relative paths resolve against it.
    pub base: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(path: &str, text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig { path: path.to_string(), base: PathBuf::new(), entries: BTreeMap::new() };
        for (k, line) in text.lines().enumerate() {
            let lineno = k + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(raw.err(lineno, format!("expected `section.key = value`, got `{line}`")));
            };
            raw.insert(key.trim(), value.trim(), lineno)?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { path: name.clone(), line: None, message: format!("cannot read: {e}") })?;
        let mut raw = Self::parse(&name, &text)?;
        raw.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(raw)
    }

    fn insert(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(self.err(line, format!("unknown key `{key}`")));
        }
        if let Some((_, first)) = self.entries.get(key) {
            return Err(self.err(line, format!("duplicate key `{key}` (first set on line {first})")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), line));
        Ok(())
    }

    /// Applies a `key=value` override; it replaces any value from the file.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(ConfigError { path: "--set".into(), line: None, message: format!("expected key=value, got `{assignment}`") });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError { path: "--set".into(), line: None, message: format!("unknown key `{key}`") });
        }
        self.entries.insert(key.to_string(), (value.trim().to_string(), 0));
        Ok(())
    }

    fn err(&self, line: usize, message: String) -> ConfigError {
        ConfigError { path: self.path.clone(), line: if line == 0 { None } else { Some(line) }, message }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.1)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.0.as_str())
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(self.line_of(key), format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parse_value::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(self.err(self.line_of(key), format!("`{key}` must be finite")));
        }
        Ok(v)
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_value::<f64>(key)
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            out.push(
                item.parse()
                    .map_err(|_| self.err(self.line_of(key), format!("`{key}`: cannot parse list item `{item}`")))?,
            );
        }
        Ok(Some(out))
    }

    /// Wraps a core validation error with the line of `key`.
    fn invalid(&self, key: &str, e: impl fmt::Display) -> ConfigError {
        self.err(self.line_of(key), format!("{e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSettings {
    pub config: EigConfig,
    pub method: EigMethod,
    pub sign: Sign,
    pub bracket: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub suite: Vec<String>,
    pub seeds: Vec<u64>,
    /// Resolutions for refinement checks; defaults to `grid.n` and its
    /// doubling.
    pub resolutions: Vec<usize>,
    pub pairs: usize,
    pub inner_scale: f64,
    /// Multiples of `lambda_1` scanned by the isolation check.
    pub scan_factors: Vec<f64>,
    /// Sup-norm agreement required between seeded eigenfunctions.
    pub tolerance: f64,
    /// Relative discretization allowance of the monotonicity check.
    pub rel_tol: f64,
    pub hopf_min: f64,
    pub holder_min: f64,
    pub holder_residual: f64,
    /// Radii of the barrier annuli.
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub command: String,
    pub key: String,
    pub values: Vec<String>,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub n: usize,
    pub operator: OperatorSpec,
    pub forcing: f64,
    pub lambda: f64,
    pub solve: SolveConfig,
    pub eigen: EigenSettings,
    pub verify: VerifySettings,
    pub sweep: Option<SweepSettings>,
    pub output_dir: PathBuf,
    pub prefix: String,
}

pub const SUITES: &[&str] =
    &["comparison", "simplicity", "hopf", "distance", "monotonicity", "isolation", "holder", "barrier", "no_positive"];

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let domain = domain(raw)?;
        let n: usize = raw.parse_value("grid.n")?.unwrap_or(64);
        if n < 4 {
            return Err(raw.err(raw.line_of("grid.n"), "grid.n must be at least 4".into()));
        }
        let operator = operator(raw)?;

        let mut solve = SolveConfig::default();
        solve.delta_min = raw.opt_f64("solver.delta_min")?;
        solve.damping = raw.f64_or("solver.damping", solve.damping)?;
        solve.tol = raw.f64_or("solver.tol", solve.tol)?;
        solve.max_outer = raw.parse_value("solver.max_iter")?.unwrap_or(solve.max_outer);
        solve.cap = raw.opt_f64("solver.cap")?;
        solve.newton = raw.parse_value("solver.newton")?.unwrap_or(false);
        solve.validate().map_err(|e| raw.invalid("solver.tol", e))?;

        let mut eig = EigConfig { solve: solve.clone(), ..EigConfig::default() };
        eig.eig_tol = raw.f64_or("eigen.tol", eig.eig_tol)?;
        eig.validate().map_err(|e| raw.invalid("eigen.tol", e))?;
        let method = match raw.get("eigen.method").unwrap_or("power") {
            "power" => EigMethod::Power,
            "bisection" => EigMethod::Bisection,
            other => return Err(raw.err(raw.line_of("eigen.method"), format!("eigen.method `{other}` not in power|bisection"))),
        };
        let sign = match raw.get("eigen.sign").unwrap_or("plus") {
            "plus" => Sign::Plus,
            "minus" => Sign::Minus,
            other => return Err(raw.err(raw.line_of("eigen.sign"), format!("eigen.sign `{other}` not in plus|minus"))),
        };
        let bracket = match (raw.opt_f64("eigen.lambda_lo")?, raw.opt_f64("eigen.lambda_hi")?) {
            (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(raw.err(raw.line_of("eigen.lambda_lo"), "eigen.lambda_lo and eigen.lambda_hi must both be set with lo < hi".into())),
        };

        let suite: Vec<String> = match raw.list::<String>("verify.suite")? {
            None => vec!["comparison".into()],
            Some(v) if v.iter().any(|s| s == "all") => SUITES.iter().map(|s| s.to_string()).collect(),
            Some(v) => v,
        };
        if let Some(bad) = suite.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(raw.err(raw.line_of("verify.suite"), format!("unknown suite `{bad}`; known: {}, all", SUITES.join(", "))));
        }
        let seeds: Vec<u64> = raw.list("verify.seeds")?.unwrap_or_else(|| vec![0, 1, 2]);
        if seeds.is_empty() {
            return Err(raw.err(raw.line_of("verify.seeds"), "verify.seeds must not be empty".into()));
        }
        let resolutions = raw.list("verify.resolutions")?.unwrap_or_else(|| vec![n, 2 * n]);
        if resolutions.iter().any(|&r| r < 4) {
            return Err(raw.err(raw.line_of("verify.resolutions"), "resolutions must be at least 4".into()));
        }
        let verify = VerifySettings {
            suite,
            seeds,
            resolutions,
            pairs: raw.parse_value("verify.pairs")?.unwrap_or(10),
            inner_scale: raw.f64_or("verify.inner_scale", 0.9)?,
            scan_factors: raw.list("verify.scan_factors")?.unwrap_or_else(|| vec![1.02, 1.05, 1.1]),
            tolerance: raw.f64_or("verify.tolerance", 1e-4)?,
            rel_tol: raw.f64_or("verify.rel_tol", 0.03)?,
            hopf_min: raw.f64_or("verify.hopf_min", 1e-3)?,
            holder_min: raw.f64_or("verify.holder_min", 0.5)?,
            holder_residual: raw.f64_or("verify.holder_residual", 0.1)?,
            radii: raw.list("verify.radii")?.unwrap_or_else(|| vec![0.25, 0.5, 1.0]),
        };
        if !(verify.inner_scale > 0.0 && verify.inner_scale < 1.0) {
            return Err(raw.err(raw.line_of("verify.inner_scale"), "verify.inner_scale must lie in (0, 1)".into()));
        }

        let sweep = match raw.get("sweep.key") {
            None => None,
            Some(key) => {
                if !KEYS.contains(&key) || key.starts_with("sweep.") {
                    return Err(raw.err(raw.line_of("sweep.key"), format!("sweep.key `{key}` is not a sweepable key")));
                }
                let command = raw.get("sweep.command").unwrap_or("eig").to_string();
                if !["eig", "solve"].contains(&command.as_str()) {
                    return Err(raw.err(raw.line_of("sweep.command"), format!("sweep.command `{command}` not in eig|solve")));
                }
                let values = raw.list::<String>("sweep.values")?.unwrap_or_default();
                Some(SweepSettings { command, key: key.to_string(), values })
            }
        };

        let dir = raw.get("output.dir").unwrap_or("out");
        Ok(RunConfig {
            domain,
            n,
            operator,
            forcing: raw.f64_or("forcing.constant", -1.0)?,
            lambda: raw.f64_or("forcing.lambda", 0.0)?,
            solve,
            eigen: EigenSettings { config: eig, method, sign, bracket },
            verify,
            sweep,
            output_dir: raw.base.join(dir),
            prefix: raw.get("output.prefix").unwrap_or("run").to_string(),
        })
    }
}

fn domain(raw: &RawConfig) -> Result<DomainSpec, ConfigError> {
    let cx = raw.f64_or("domain.center_x", 0.0)?;
    let cy = raw.f64_or("domain.center_y", 0.0)?;
    let shape = match raw.get("domain.shape").unwrap_or("interval") {
        "interval" => Shape::Interval { x0: raw.f64_or("domain.x0", 0.0)?, length: raw.f64_or("domain.length", 1.0)? },
        "rectangle" => Shape::Rectangle {
            origin: [raw.f64_or("domain.origin_x", 0.0)?, raw.f64_or("domain.origin_y", 0.0)?],
            lx: raw.f64_or("domain.lx", 1.0)?,
            ly: raw.f64_or("domain.ly", 1.0)?,
        },
        "disk" => Shape::Disk { center: [cx, cy], radius: raw.f64_or("domain.radius", 1.0)? },
        "annulus" => Shape::Annulus {
            center: [cx, cy],
            r_inner: raw.f64_or("domain.r_inner", 0.5)?,
            r_outer: raw.f64_or("domain.r_outer", 1.0)?,
        },
        "mask" => {
            let Some(file) = raw.get("domain.mask_file") else {
                return Err(raw.err(raw.line_of("domain.shape"), "domain.shape = mask needs domain.mask_file".into()));
            };
            let path = raw.base.join(file);
            let m = io::read_mask(&path).map_err(|e| raw.invalid("domain.mask_file", e))?;
            Shape::Mask(m)
        }
        other => {
            return Err(raw.err(
                raw.line_of("domain.shape"),
                format!("domain.shape `{other}` not in interval|rectangle|disk|annulus|mask"),
            ))
        }
    };
    let spec = DomainSpec { shape, scale: raw.f64_or("domain.scale", 1.0)? };
    spec.validate().map_err(|e| raw.invalid("domain.shape", e))?;
    Ok(spec)
}

fn operator(raw: &RawConfig) -> Result<OperatorSpec, ConfigError> {
    let a = raw.f64_or("operator.a", 1.0)?;
    let big_a = raw.f64_or("operator.A", a)?;
    let alpha = raw.f64_or("operator.alpha", 0.0)?;
    let kind = raw.get("operator.kind").unwrap_or("laplacian");
    let spec = match kind {
        "pucci_plus" => OperatorSpec::pucci_plus(a, big_a, alpha),
        "pucci_minus" => OperatorSpec::pucci_minus(a, big_a, alpha),
        "laplacian" => OperatorSpec::laplacian(alpha),
        "qtrace" => OperatorSpec::qtrace(raw.f64_or("operator.q", 0.0)?, alpha),
        "linear" => {
            let m = SymMat2::new(
                raw.f64_or("operator.m11", 1.0)?,
                raw.f64_or("operator.m12", 0.0)?,
                raw.f64_or("operator.m22", 1.0)?,
            );
            OperatorSpec::linear(Coefficients::Constant(m), a, big_a, alpha).map_err(|e| raw.invalid("operator.kind", e))?
        }
        other => {
            return Err(raw.err(
                raw.line_of("operator.kind"),
                format!("operator.kind `{other}` not in pucci_plus|pucci_minus|laplacian|linear|qtrace"),
            ))
        }
    };
    let spec = spec
        .with_drift(Drift::Constant([raw.f64_or("drift.hx", 0.0)?, raw.f64_or("drift.hy", 0.0)?]))
        .with_zeroth(Zeroth::Constant(raw.f64_or("c.constant", 0.0)?));
    let key = if raw.get("operator.alpha").is_some() { "operator.alpha" } else { "operator.kind" };
    spec.validate().map_err(|e| raw.invalid(key, e))?;
    Ok(spec)
}
