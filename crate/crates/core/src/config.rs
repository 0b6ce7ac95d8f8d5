//! Run configuration files.
//!
//! The primary encoding is TOML; JSON with the same schema is accepted. Both
//! are decoded into one tree and walked strictly: unknown keys, wrong types and
//! out-of-range values are all collected before reporting.
//!
//! ```toml
//! [model]
//! obstacle = "paper-gauss"
//! initial = "q01"
//! velocity = "lwr"
//! epsilon = 0.0009765625
//!
//! [grid]
//! window = [-3.0, 4.0]
//! n_cells = 3500
//!
//! [solver]
//! t_final = 1.5
//! snapshot_times = [1.5]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::grid::{Grid1D, SampleMode, MIN_CELLS};
use crate::hyperbolic::{ObstacleSampling, SolverConfig, DEFAULT_CFL};
use crate::model::{InitialDatum, KernelSpec, Locality, ModelSpec, ObstacleSpec, Penalization, VelocitySpec};
use crate::nonlocal::Extension;
use crate::viscous::{ViscousConfig, ViscousFlux, DEFAULT_PICARD_MAX, DEFAULT_PICARD_TOL};

pub const DEFAULT_EPSILON: f64 = 1.0 / 1024.0;
pub const DEFAULT_WINDOW: (f64, f64) = (-3.0, 4.0);
pub const DEFAULT_CELLS: usize = 3500;
/// Cell size of the full-resolution runs.
pub const FULL_RESOLUTION_DX: f64 = 1.0 / 5000.0;
pub const DEFAULT_EPS_LIST: [f64; 5] = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0, 1.0 / 1024.0];
pub const DEFAULT_NU_LIST: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// One problem found while reading a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted key path, e.g. `model.epsilon`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{}", format_issues(.0))]
    Semantic(Vec<ConfigIssue>),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    format!("{} configuration error(s):\n  {}", issues.len(), lines.join("\n  "))
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Semantic(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExperimentKind {
    #[default]
    Run,
    EpsSweep,
    NuSweep,
    Compare,
    OslSurface,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::EpsSweep => "eps-sweep",
            Self::NuSweep => "nu-sweep",
            Self::Compare => "compare",
            Self::OslSurface => "osl-surface",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Run, Self::EpsSweep, Self::NuSweep, Self::Compare, Self::OslSurface]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    pub eps_list: Vec<f64>,
    pub nu_list: Vec<f64>,
    /// Number of equally spaced rows of the surface dump.
    pub surface_rows: usize,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Run,
            eps_list: DEFAULT_EPS_LIST.to_vec(),
            nu_list: DEFAULT_NU_LIST.to_vec(),
            surface_rows: 91,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfigFile {
    pub model: ModelSpec,
    pub grid: Grid1D,
    pub solver: SolverConfig,
    pub viscous: ViscousConfig,
    pub experiment: ExperimentBlock,
    pub output: OutputBlock,
    /// Normalized tree of the input, echoed into summaries.
    pub echo: Value,
}

impl RunConfigFile {
    /// Replaces the grid by the closest one with cell size `dx`.
    pub fn with_spacing(mut self, dx: f64) -> crate::Result<Self> {
        self.grid = Grid1D::with_spacing(self.grid.x_left(), self.grid.x_right(), dx)?;
        Ok(self)
    }
}

/// Parses TOML, or JSON when the text starts with `{`. Relative table paths
/// resolve against the working directory.
pub fn parse_config(text: &str) -> Result<RunConfigFile, ConfigError> {
    parse_config_in(text, Path::new("."))
}

/// Reads and parses a configuration file; relative paths inside it resolve
/// against its directory.
pub fn load_config(path: &Path) -> Result<RunConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_in(&text, base)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

fn decode(text: &str) -> Result<Value, ConfigError> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        });
    }
    let table: toml::Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    serde_json::to_value(table).map_err(|e| ConfigError::Syntax {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfigFile, ConfigError> {
    let tree = decode(text)?;
    let mut walk = Walker { issues: Vec::new(), base };
    let root = walk.object(&tree, "");
    let config = walk.config(&root);
    match config {
        Some(mut c) if walk.issues.is_empty() => {
            c.echo = tree;
            Ok(c)
        }
        _ => Err(ConfigError::Semantic(walk.issues)),
    }
}

/// Borrowed object with its path and the keys consumed so far.
struct Node<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
}

impl<'a> Node<'a> {
    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.map.and_then(|m| m.get(k))
    }
}

struct Walker<'p> {
    issues: Vec<ConfigIssue>,
    base: &'p Path,
}

impl<'p> Walker<'p> {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Node<'a> {
        match v {
            Value::Object(m) => Node {
                path: path.to_string(),
                map: Some(m),
            },
            _ => {
                self.fail(if path.is_empty() { "<root>" } else { path }, "expected a table");
                Node {
                    path: path.to_string(),
                    map: None,
                }
            }
        }
    }

    fn section<'a>(&mut self, parent: &Node<'a>, k: &str) -> Node<'a> {
        match parent.get(k) {
            Some(v) => self.object(v, &parent.key(k)),
            None => Node {
                path: parent.key(k),
                map: None,
            },
        }
    }

    fn allow(&mut self, node: &Node<'_>, keys: &[&str]) {
        if let Some(m) = node.map {
            for k in m.keys() {
                if !keys.contains(&k.as_str()) {
                    self.fail(node.key(k), format!("unknown key (expected one of: {})", keys.join(", ")));
                }
            }
        }
    }

    fn number(&mut self, node: &Node<'_>, k: &str) -> Option<f64> {
        let v = node.get(k)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            Some(_) => {
                self.fail(node.key(k), "must be finite");
                None
            }
            None => {
                self.fail(node.key(k), format!("expected a number, found {}", kind(v)));
                None
            }
        }
    }

    fn number_or(&mut self, node: &Node<'_>, k: &str, default: f64) -> f64 {
        self.number(node, k).unwrap_or(default)
    }

    fn positive(&mut self, node: &Node<'_>, k: &str, default: f64) -> f64 {
        let x = self.number_or(node, k, default);
        if !(x > 0.0) {
            self.fail(node.key(k), format!("{k} must be > 0"));
        }
        x
    }

    fn count(&mut self, node: &Node<'_>, k: &str, default: usize) -> usize {
        match node.get(k) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(n) => n as usize,
                None => {
                    self.fail(node.key(k), format!("expected a nonnegative integer, found {}", kind(v)));
                    default
                }
            },
        }
    }

    fn text<'a>(&mut self, node: &Node<'a>, k: &str) -> Option<&'a str> {
        let v = node.get(k)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.fail(node.key(k), format!("expected a string, found {}", kind(v)));
                None
            }
        }
    }

    fn list(&mut self, node: &Node<'_>, k: &str) -> Option<Vec<f64>> {
        let v = node.get(k)?;
        let Some(items) = v.as_array() else {
            self.fail(node.key(k), format!("expected an array of numbers, found {}", kind(v)));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item.as_f64() {
                Some(x) if x.is_finite() => out.push(x),
                _ => self.fail(format!("{}[{i}]", node.key(k)), "expected a finite number"),
            }
        }
        Some(out)
    }

    fn choice<T: Copy>(&mut self, node: &Node<'_>, k: &str, options: &[(&str, T)], default: T) -> T {
        let Some(s) = self.text(node, k) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                self.fail(node.key(k), format!("unknown value \"{s}\" (expected one of: {})", names.join(", ")));
                default
            }
        }
    }

    /// A spec given either as a preset name or as a table with `kind`.
    fn tagged<'a>(&mut self, node: &Node<'a>, k: &str) -> Option<(String, Node<'a>)> {
        let v = node.get(k)?;
        let path = node.key(k);
        match v {
            Value::String(s) => Some((s.clone(), Node { path, map: None })),
            Value::Object(m) => match m.get("kind").and_then(Value::as_str) {
                Some(s) => Some((s.to_string(), Node { path, map: Some(m) })),
                None => {
                    self.fail(format!("{path}.kind"), "missing string \"kind\"");
                    None
                }
            },
            other => {
                self.fail(path, format!("expected a preset name or a table, found {}", kind(other)));
                None
            }
        }
    }

    fn config(&mut self, root: &Node<'_>) -> Option<RunConfigFile> {
        self.allow(root, &["model", "grid", "solver", "viscous", "experiment", "output"]);
        let model_node = self.section(root, "model");
        let model = self.model(&model_node);
        let grid_node = self.section(root, "grid");
        let grid = self.grid(&grid_node);
        let solver_node = self.section(root, "solver");
        let solver = self.solver(&solver_node);
        let viscous_node = self.section(root, "viscous");
        let viscous = self.viscous(&viscous_node, solver.clone());
        let exp_node = self.section(root, "experiment");
        let experiment = self.experiment(&exp_node);
        let out_node = self.section(root, "output");
        let output = self.output(&out_node);
        Some(RunConfigFile {
            model: model?,
            grid: grid?,
            solver,
            viscous,
            experiment,
            output,
            echo: Value::Null,
        })
    }

    fn model(&mut self, node: &Node<'_>) -> Option<ModelSpec> {
        self.allow(
            node,
            &["kernel", "velocity", "obstacle", "epsilon", "penalization", "initial", "locality", "sampling"],
        );
        let kernel = self.kernel(node);
        let velocity = self.velocity(node);
        let obstacle = self.obstacle(node);
        let initial = self.initial(node);
        let penalized = self.choice(node, "penalization", &[("exponential", true), ("none", false)], true);
        let epsilon = self.number_or(node, "epsilon", DEFAULT_EPSILON);
        let penalization = if !(epsilon > 0.0) {
            self.fail(node.key("epsilon"), "epsilon must be > 0");
            None
        } else if penalized {
            Penalization::new(epsilon).ok()
        } else {
            None
        };
        let locality = self.choice(node, "locality", &[("nonlocal", Locality::Nonlocal), ("local", Locality::Local)], Locality::Nonlocal);
        let sampling = self.choice(node, "sampling", &[("midpoint", SampleMode::Midpoint), ("average3", SampleMode::Average3)], SampleMode::Midpoint);
        Some(ModelSpec {
            kernel: kernel?,
            velocity: velocity?,
            obstacle: obstacle?,
            penalization,
            initial: initial?,
            locality,
            sampling,
        })
    }

    fn kernel(&mut self, node: &Node<'_>) -> Option<KernelSpec> {
        let Some((name, spec)) = self.tagged(node, "kernel") else {
            return node.get("kernel").is_none().then(KernelSpec::exponential);
        };
        match name.as_str() {
            "exponential" => {
                self.allow(&spec, &["kind", "rate"]);
                Some(KernelSpec::Exponential { rate: self.positive(&spec, "rate", 1.0) })
            }
            "tabulated" => {
                self.allow(&spec, &["kind", "spacing", "values", "tail_mass"]);
                let spacing = self.positive(&spec, "spacing", 1.0);
                let values = self.list(&spec, "values");
                if values.is_none() {
                    self.fail(spec.key("values"), "required");
                }
                let tail_mass = self.number_or(&spec, "tail_mass", 0.0);
                Some(KernelSpec::Tabulated { spacing, values: values?, tail_mass })
            }
            other => {
                self.fail(spec.path.clone(), format!("unknown kernel \"{other}\" (expected exponential, tabulated)"));
                None
            }
        }
    }

    fn velocity(&mut self, node: &Node<'_>) -> Option<VelocitySpec> {
        let Some((name, spec)) = self.tagged(node, "velocity") else {
            return node.get("velocity").is_none().then(VelocitySpec::lwr);
        };
        match name.as_str() {
            "lwr" => {
                self.allow(&spec, &["kind", "slope", "capacity"]);
                let VelocitySpec::Lwr { slope, capacity } = VelocitySpec::lwr() else { unreachable!() };
                Some(VelocitySpec::Lwr {
                    slope: self.number_or(&spec, "slope", slope),
                    capacity: self.number_or(&spec, "capacity", capacity),
                })
            }
            "unit" => {
                self.allow(&spec, &["kind"]);
                Some(VelocitySpec::unit())
            }
            "constant" => {
                self.allow(&spec, &["kind", "value"]);
                Some(VelocitySpec::Constant(self.number_or(&spec, "value", 1.0)))
            }
            "polynomial" => {
                self.allow(&spec, &["kind", "coefficients"]);
                let c = self.list(&spec, "coefficients");
                if c.is_none() {
                    self.fail(spec.key("coefficients"), "required");
                }
                Some(VelocitySpec::Polynomial(c?))
            }
            other => {
                self.fail(spec.path.clone(), format!("unknown velocity \"{other}\" (expected lwr, unit, constant, polynomial)"));
                None
            }
        }
    }

    fn obstacle(&mut self, node: &Node<'_>) -> Option<ObstacleSpec> {
        let Some((name, spec)) = self.tagged(node, "obstacle") else {
            return node.get("obstacle").is_none().then(ObstacleSpec::gauss_dip);
        };
        match name.as_str() {
            "paper-gauss" | "gaussian" => {
                self.allow(&spec, &["kind", "level", "depth", "center", "width"]);
                let ObstacleSpec::Gaussian { level, depth, center, width } = ObstacleSpec::gauss_dip() else { unreachable!() };
                Some(ObstacleSpec::Gaussian {
                    level: self.number_or(&spec, "level", level),
                    depth: self.number_or(&spec, "depth", depth),
                    center: self.number_or(&spec, "center", center),
                    width: self.positive(&spec, "width", width),
                })
            }
            "constant" => {
                self.allow(&spec, &["kind", "value"]);
                Some(ObstacleSpec::Constant(self.positive(&spec, "value", 1.0)))
            }
            other => {
                self.fail(spec.path.clone(), format!("unknown obstacle \"{other}\" (expected paper-gauss, gaussian, constant)"));
                None
            }
        }
    }

    fn initial(&mut self, node: &Node<'_>) -> Option<InitialDatum> {
        let Some((name, spec)) = self.tagged(node, "initial") else {
            return node.get("initial").is_none().then_some(InitialDatum::Q01);
        };
        match name.as_str() {
            "q01" => Some(InitialDatum::Q01),
            "q02" => Some(InitialDatum::Q02),
            "zero" => Some(InitialDatum::Zero),
            "gaussian" => {
                self.allow(&spec, &["kind", "center", "width", "height"]);
                Some(InitialDatum::Gaussian {
                    center: self.number_or(&spec, "center", 0.0),
                    width: self.positive(&spec, "width", 0.25),
                    height: self.number_or(&spec, "height", 0.5),
                })
            }
            "table" => {
                self.allow(&spec, &["kind", "path", "x", "q"]);
                self.table(&spec)
            }
            other => {
                self.fail(spec.path.clone(), format!("unknown initial datum \"{other}\" (expected q01, q02, zero, gaussian, table)"));
                None
            }
        }
    }

    fn table(&mut self, spec: &Node<'_>) -> Option<InitialDatum> {
        let (x, q) = if let Some(path) = self.text(spec, "path") {
            let full = self.base.join(path);
            match crate::io::read_table(&full) {
                Ok(t) => t,
                Err(e) => {
                    self.fail(spec.key("path"), e.to_string());
                    return None;
                }
            }
        } else {
            match (self.list(spec, "x"), self.list(spec, "q")) {
                (Some(x), Some(q)) => (x, q),
                _ => {
                    self.fail(spec.path.clone(), "a table needs \"path\" or both \"x\" and \"q\"");
                    return None;
                }
            }
        };
        if x.len() != q.len() || x.len() < 2 {
            self.fail(spec.path.clone(), "table needs at least two (x, q) nodes of equal count");
            return None;
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            self.fail(spec.path.clone(), "table x nodes must be strictly increasing");
            return None;
        }
        Some(InitialDatum::Table { x, q })
    }

    fn grid(&mut self, node: &Node<'_>) -> Option<Grid1D> {
        self.allow(node, &["window", "x_left", "x_right", "n_cells", "dx"]);
        let (mut lo, mut hi) = DEFAULT_WINDOW;
        if let Some(w) = self.list(node, "window") {
            if w.len() == 2 {
                (lo, hi) = (w[0], w[1]);
            } else {
                self.fail(node.key("window"), "expected [x_left, x_right]");
            }
        }
        lo = self.number_or(node, "x_left", lo);
        hi = self.number_or(node, "x_right", hi);
        if !(lo < hi) {
            self.fail(node.key("window"), format!("empty window [{lo}, {hi}]"));
            return None;
        }
        let dx = self.number(node, "dx");
        let n_cells = self.count(node, "n_cells", DEFAULT_CELLS);
        if node.get("n_cells").is_some() && dx.is_some() {
            self.fail(node.key("dx"), "give either n_cells or dx, not both");
        }
        let n_cells = match dx {
            Some(dx) if dx > 0.0 => ((hi - lo) / dx).round() as usize,
            Some(_) => {
                self.fail(node.key("dx"), "dx must be > 0");
                return None;
            }
            None => n_cells,
        };
        if n_cells < MIN_CELLS {
            self.fail(node.key("n_cells"), format!("n_cells = {n_cells} is below the minimum of {MIN_CELLS}"));
            return None;
        }
        Grid1D::new(lo, hi, n_cells).ok()
    }

    fn solver(&mut self, node: &Node<'_>) -> SolverConfig {
        self.allow(
            node,
            &["cfl", "t_final", "snapshot_times", "extension", "obstacle_sampling", "series_stride", "flux_tol", "clamp_interval"],
        );
        let mut c = SolverConfig::default();
        c.cfl = self.number_or(node, "cfl", DEFAULT_CFL);
        if !(c.cfl > 0.0 && c.cfl < 1.0) {
            self.fail(node.key("cfl"), "cfl must lie in (0, 1)");
        }
        c.t_final = self.number_or(node, "t_final", 1.5);
        if !(c.t_final >= 0.0) {
            self.fail(node.key("t_final"), "t_final must be >= 0");
        }
        c.snapshot_times = self.list(node, "snapshot_times").unwrap_or_default();
        if c.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            self.fail(node.key("snapshot_times"), "must be sorted");
        }
        if c.snapshot_times.iter().any(|t| !(*t >= 0.0 && *t <= c.t_final)) {
            self.fail(node.key("snapshot_times"), format!("times must lie in [0, t_final = {}]", c.t_final));
        }
        c.extension = self.choice(node, "extension", &[("constant", Extension::Constant), ("zero", Extension::Zero)], Extension::Constant);
        c.obstacle_sampling = self.choice(
            node,
            "obstacle_sampling",
            &[("cell", ObstacleSampling::Cell), ("interface", ObstacleSampling::Interface)],
            ObstacleSampling::Cell,
        );
        c.series_stride = self.count(node, "series_stride", 1);
        if c.series_stride == 0 {
            self.fail(node.key("series_stride"), "series_stride must be >= 1");
        }
        c.flux_opt_tol = self.positive(node, "flux_tol", c.flux_opt_tol);
        if let Some(v) = self.list(node, "clamp_interval") {
            match v[..] {
                [lo, hi] if lo <= hi => c.clamp_interval = Some((lo, hi)),
                _ => self.fail(node.key("clamp_interval"), "expected [lo, hi] with lo <= hi"),
            }
        }
        c
    }

    fn viscous(&mut self, node: &Node<'_>, base: SolverConfig) -> ViscousConfig {
        self.allow(node, &["nu", "mollifier_width", "picard_tol", "picard_max", "flux"]);
        let mut c = ViscousConfig::new(self.number_or(node, "nu", 1e-3), base);
        if !(c.nu > 0.0 && c.nu <= 1.0) {
            self.fail(node.key("nu"), "nu must lie in (0, 1]");
        }
        c.mollifier_width = self.number(node, "mollifier_width");
        if c.mollifier_width.is_some_and(|w| !(w > 0.0)) {
            self.fail(node.key("mollifier_width"), "mollifier_width must be > 0");
        }
        c.picard_tol = self.positive(node, "picard_tol", DEFAULT_PICARD_TOL);
        c.picard_max = self.count(node, "picard_max", DEFAULT_PICARD_MAX);
        if c.picard_max == 0 {
            self.fail(node.key("picard_max"), "picard_max must be >= 1");
        }
        c.flux = self.choice(node, "flux", &[("godunov", ViscousFlux::Godunov), ("upwind", ViscousFlux::Upwind)], ViscousFlux::Godunov);
        c
    }

    fn decreasing(&mut self, node: &Node<'_>, k: &str, default: &[f64], strict: bool) -> Vec<f64> {
        let v = self.list(node, k).unwrap_or_else(|| default.to_vec());
        if v.is_empty() {
            self.fail(node.key(k), "must not be empty");
        }
        if v.iter().any(|x| !(*x > 0.0)) {
            self.fail(node.key(k), "entries must be > 0");
        }
        if v.windows(2).any(|w| if strict { w[1] >= w[0] } else { w[1] > w[0] }) {
            let order = if strict { "strictly decreasing" } else { "nonincreasing" };
            self.fail(node.key(k), format!("must be {order}"));
        }
        v
    }

    fn experiment(&mut self, node: &Node<'_>) -> ExperimentBlock {
        self.allow(node, &["kind", "eps_list", "nu_list", "surface_rows"]);
        let mut e = ExperimentBlock::default();
        if let Some(s) = self.text(node, "kind") {
            match ExperimentKind::parse(s) {
                Some(k) => e.kind = k,
                None => self.fail(node.key("kind"), format!("unknown experiment \"{s}\" (expected run, eps-sweep, nu-sweep, compare, osl-surface)")),
            }
        }
        e.eps_list = self.decreasing(node, "eps_list", &DEFAULT_EPS_LIST, false);
        e.nu_list = self.decreasing(node, "nu_list", &DEFAULT_NU_LIST, true);
        e.surface_rows = self.count(node, "surface_rows", e.surface_rows);
        if e.surface_rows < 2 {
            self.fail(node.key("surface_rows"), "surface_rows must be >= 2");
        }
        e
    }

    fn output(&mut self, node: &Node<'_>) -> OutputBlock {
        self.allow(node, &["directory", "formats"]);
        let mut o = OutputBlock::default();
        if let Some(d) = self.text(node, "directory") {
            o.directory = PathBuf::from(d);
        }
        if let Some(v) = node.get("formats") {
            let Some(items) = v.as_array() else {
                self.fail(node.key("formats"), "expected an array of strings");
                return o;
            };
            o.formats.clear();
            for (i, item) in items.iter().enumerate() {
                match item.as_str() {
                    Some("csv") => o.formats.push(OutputFormat::Csv),
                    Some("json") => o.formats.push(OutputFormat::Json),
                    _ => self.fail(format!("{}[{i}]", node.key("formats")), "expected \"csv\" or \"json\""),
                }
            }
        }
        o
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "a table",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    const MINIMAL: &str = r#"
[model]
obstacle = "paper-gauss"
initial = "q01"
velocity = "lwr"
"#;

    #[test]
    fn minimal_config_fills_the_preset() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.model, ModelSpec::reference_preset(DEFAULT_EPSILON).unwrap());
        assert_eq!(c.grid, Grid1D::new(-3.0, 4.0, 3500).unwrap());
        assert_eq!(c.solver.cfl, DEFAULT_CFL);
        assert_eq!(c.experiment.kind, ExperimentKind::Run);
        assert!(validate(&c.model, &c.grid).passed());
    }

    #[test]
    fn empty_text_is_the_preset() {
        assert_eq!(parse_config("").unwrap().model, parse_config(MINIMAL).unwrap().model);
    }

    #[test]
    fn zero_epsilon_is_a_semantic_error() {
        let err = parse_config("[model]\nepsilon = 0.0\n").unwrap_err();
        assert_eq!(err.issues().len(), 1);
        assert_eq!(err.issues()[0].path, "model.epsilon");
        assert!(err.to_string().contains("epsilon must be > 0"));
    }

    #[test]
    fn too_few_cells_is_rejected() {
        let err = parse_config("[grid]\nn_cells = 4\n").unwrap_err();
        assert_eq!(err.issues()[0].path, "grid.n_cells");
        assert!(err.to_string().contains("minimum of 8"));
    }

    #[test]
    fn all_errors_are_reported_with_paths() {
        let text = r#"
[model]
epsilon = -1.0
colour = "red"
velocity = { kind = "warp" }

[solver]
cfl = 1.5
snapshot_times = [2.0, 1.0]

[experiment]
kind = "dance"
"#;
        let err = parse_config(text).unwrap_err();
        let paths: Vec<&str> = err.issues().iter().map(|i| i.path.as_str()).collect();
        for p in ["model.epsilon", "model.colour", "model.velocity", "solver.cfl", "solver.snapshot_times", "experiment.kind"] {
            assert!(paths.contains(&p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        match parse_config("[model]\nepsilon = = 1\n").unwrap_err() {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
        match parse_config("{\n \"model\": }").unwrap_err() {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn json_encodes_the_same_schema() {
        let toml_text = "[model]\nepsilon = 0.5\ninitial = \"q02\"\n[grid]\nwindow = [-1.0, 1.0]\nn_cells = 64\n[solver]\nt_final = 0.5\nsnapshot_times = [0.25]\n";
        let json_text = r#"{"model": {"epsilon": 0.5, "initial": "q02"}, "grid": {"window": [-1.0, 1.0], "n_cells": 64}, "solver": {"t_final": 0.5, "snapshot_times": [0.25]}}"#;
        let a = parse_config(toml_text).unwrap();
        let b = parse_config(json_text).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.solver, b.solver);
    }

    #[test]
    fn tagged_specs_are_parsed() {
        let text = r#"
[model]
kernel = { kind = "exponential", rate = 2.0 }
velocity = { kind = "polynomial", coefficients = [1.0, -0.5] }
obstacle = { kind = "constant", value = 1.5 }
initial = { kind = "table", x = [-1.0, 0.0, 1.0], q = [0.0, 0.5, 0.0] }
penalization = "none"
locality = "local"

[viscous]
nu = 0.01
flux = "upwind"
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.model.kernel, KernelSpec::Exponential { rate: 2.0 });
        assert_eq!(c.model.velocity, VelocitySpec::Polynomial(vec![1.0, -0.5]));
        assert_eq!(c.model.obstacle, ObstacleSpec::Constant(1.5));
        assert!(c.model.penalization.is_none());
        assert_eq!(c.model.locality, Locality::Local);
        assert_eq!(c.viscous.nu, 0.01);
        assert_eq!(c.viscous.flux, ViscousFlux::Upwind);
    }

    #[test]
    fn dx_sets_the_cell_count() {
        let c = parse_config("[grid]\ndx = 0.01\n").unwrap();
        assert_eq!(c.grid.n_cells(), 700);
        assert!(parse_config("[grid]\ndx = 0.01\nn_cells = 10\n").is_err());
    }

    #[test]
    fn sweep_lists_must_decrease() {
        let err = parse_config("[experiment]\nnu_list = [0.001, 0.01]\neps_list = [0.1, 0.2]\n").unwrap_err();
        assert_eq!(err.issues().len(), 2);
    }
}
