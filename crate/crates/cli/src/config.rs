//! TOML experiment configuration and line-anchored diagnostics.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Counterexample,
    TransportEquality,
    LyapunovCheck,
    IssCheck,
    GronwallCheck,
    UgasFalsify,
    SemiglobalFit,
    PropertySuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Counterexample => "counterexample",
            Experiment::TransportEquality => "transport-equality",
            Experiment::LyapunovCheck => "lyapunov-check",
            Experiment::IssCheck => "iss-check",
            Experiment::GronwallCheck => "gronwall-check",
            Experiment::UgasFalsify => "ugas-falsify",
            Experiment::SemiglobalFit => "semiglobal-fit",
            Experiment::PropertySuite => "property-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Zero,
    PeriodicShift,
    ScalarDiagonal,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackKind {
    Identity,
    Sat,
    DeadzoneLinear,
    Tabulated,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub generator: GeneratorKind,
    pub alpha: Option<f64>,
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub input: f64,
    pub input_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_feedback")]
    pub feedback: FeedbackKind,
    pub delta: Option<f64>,
    pub table_x: Option<Vec<f64>>,
    pub table_y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Random,
    Constant,
    Fourier,
    Counterexample,
    Vector,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub kind: InitialKind,
    pub amplitude: Option<f64>,
    pub value: Option<f64>,
    pub modes: Option<usize>,
    pub n: Option<u64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    #[default]
    Zero,
    Constant,
    RandomPiecewise,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    #[serde(default)]
    pub kind: DisturbanceKind,
    pub value: Option<f64>,
    pub amplitude: Option<f64>,
    pub pieces: Option<usize>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentKind {
    #[default]
    Strict,
    Interpolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    #[default]
    Auto,
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SubstepKind {
    #[default]
    Auto,
    Exact,
    Rk4,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub alignment: AlignmentKind,
    #[serde(default)]
    pub scheme: SchemeKind,
    #[serde(default)]
    pub substep: SubstepKind,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            dt: default_dt(),
            t_end: 1.0,
            seed: 0,
            samples: default_samples(),
            tolerance: None,
            alignment: AlignmentKind::Strict,
            scheme: SchemeKind::Auto,
            substep: SubstepKind::Auto,
        }
    }
}

/// Knobs shared by `counterexample` and `ugas-falsify`.
#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub t_grid: Option<Vec<f64>>,
    pub ladder: Option<Vec<u64>>,
    pub threshold: Option<f64>,
    pub limit_level: Option<f64>,
    pub gas_t_end: Option<f64>,
    pub gas_ns: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub omega: Option<f64>,
    pub horizon: Option<f64>,
    pub s_steps: Option<usize>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IssConfig {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub k_r: Option<f64>,
    pub x0_radius: Option<f64>,
    pub d_max: Option<f64>,
    pub pieces: Option<usize>,
    pub step: Option<f64>,
    pub gain_amplitudes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GronwallConfig {
    pub k_r: Option<f64>,
    pub x0_amplitude: Option<f64>,
    pub perturbation: Option<f64>,
    pub d_max: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[default]
    Fourier,
    RandomVector,
    Counterexample,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub sampler: SamplerKind,
    pub modes: Option<usize>,
    pub ladder: Option<Vec<u64>>,
    pub fit_points: Option<usize>,
    pub mu_floor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PropertyConfig {
    pub amplitude: Option<f64>,
    pub lipschitz_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub iss: IssConfig,
    #[serde(default)]
    pub gronwall: GronwallConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub properties: PropertyConfig,
}

fn one() -> f64 {
    1.0
}

fn default_feedback() -> FeedbackKind {
    FeedbackKind::Sat
}

fn default_cells() -> usize {
    400
}

fn default_dt() -> f64 {
    0.01
}

fn default_samples() -> usize {
    20
}

/// Config problem pinned to a source position (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: error: {}",
            self.path, self.line, self.column, self.message
        )
    }
}

/// Raw config text plus its path, used to anchor diagnostics.
#[derive(Debug, Clone)]
pub struct Source {
    pub path: String,
    pub text: String,
}

impl Source {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
        }
    }

    fn position(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    pub fn at_offset(&self, offset: usize, message: impl Into<String>) -> Diagnostic {
        let (line, column) = self.position(offset);
        Diagnostic {
            path: self.path.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Anchors `message` at `key` inside `[table]` (or the root when `table` is
    /// empty). Falls back to the table header, then to line 1.
    pub fn at_key(&self, table: &str, key: &str, message: impl Into<String>) -> Diagnostic {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim_start();
            let indent = raw.len() - line.len();
            if let Some(rest) = line.strip_prefix('[') {
                current = rest.split(']').next().unwrap_or("").trim().to_string();
                if current == table {
                    header = Some((i + 1, indent + 1));
                }
                continue;
            }
            if current != table {
                continue;
            }
            let name = line.split('=').next().unwrap_or("").trim().trim_matches('"');
            if line.contains('=') && name == key {
                return Diagnostic {
                    path: self.path.clone(),
                    line: i + 1,
                    column: indent + 1,
                    message: message.into(),
                };
            }
        }
        let (line, column) = header.unwrap_or((1, 1));
        Diagnostic {
            path: self.path.clone(),
            line,
            column,
            message: message.into(),
        }
    }
}

pub fn parse(source: &Source) -> Result<Config, Diagnostic> {
    if source.text.trim().is_empty() {
        return Err(source.at_offset(0, "empty config; expected at least `experiment = \"...\"`"));
    }
    let config: Config = toml::from_str(&source.text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        source.at_offset(offset, e.message().trim().to_string())
    })?;
    validate(&config, source)?;
    Ok(config)
}

fn positive(source: &Source, table: &str, key: &str, v: Option<f64>) -> Result<(), Diagnostic> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(source.at_key(table, key, format!("`{key}` must be positive and finite, got {x}")))
        }
        _ => Ok(()),
    }
}

fn nonnegative(source: &Source, table: &str, key: &str, v: Option<f64>) -> Result<(), Diagnostic> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => {
            Err(source.at_key(table, key, format!("`{key}` must be nonnegative and finite, got {x}")))
        }
        _ => Ok(()),
    }
}

fn nonempty_positive(source: &Source, table: &str, key: &str, v: Option<&Vec<f64>>) -> Result<(), Diagnostic> {
    if let Some(list) = v {
        if list.is_empty() {
            return Err(source.at_key(table, key, format!("`{key}` must not be empty")));
        }
        if let Some(x) = list.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(source.at_key(table, key, format!("`{key}` entries must be positive, got {x}")));
        }
    }
    Ok(())
}

fn square(source: &Source, key: &str, m: &[Vec<f64>]) -> Result<usize, Diagnostic> {
    let dim = m.len();
    if dim == 0 || m.iter().any(|row| row.len() != dim) {
        return Err(source.at_key("system", key, format!("`{key}` must be a nonempty square matrix")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(source.at_key("system", key, format!("`{key}` has non-finite entries")));
    }
    Ok(dim)
}

fn validate(c: &Config, s: &Source) -> Result<(), Diagnostic> {
    let n = &c.numerics;
    if n.cells == 0 {
        return Err(s.at_key("numerics", "cells", "`cells` must be at least 1"));
    }
    positive(s, "numerics", "dt", Some(n.dt))?;
    positive(s, "numerics", "t_end", Some(n.t_end))?;
    if n.samples == 0 {
        return Err(s.at_key("numerics", "samples", "`samples` must be at least 1"));
    }
    nonnegative(s, "numerics", "tolerance", n.tolerance)?;

    let needs_system = !matches!(c.experiment, Experiment::Counterexample | Experiment::TransportEquality);
    match &c.system {
        None if needs_system => {
            return Err(s.at_key(
                "",
                "experiment",
                format!("experiment `{}` needs a [system] table", c.experiment.name()),
            ))
        }
        None => {}
        Some(sys) => validate_system(sys, s)?,
    }

    let init = &c.initial;
    positive(s, "initial", "amplitude", init.amplitude)?;
    if let Some(v) = init.value {
        if !v.is_finite() {
            return Err(s.at_key("initial", "value", "`value` must be finite"));
        }
    }
    match init.kind {
        InitialKind::Counterexample => {
            if init.n.is_none_or(|k| k == 0) {
                return Err(s.at_key("initial", "n", "counterexample initial state needs `n >= 1`"));
            }
        }
        InitialKind::Vector => match &init.values {
            Some(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => {}
            _ => {
                return Err(s.at_key(
                    "initial",
                    "values",
                    "vector initial state needs finite nonempty `values`",
                ))
            }
        },
        InitialKind::Constant if init.value.is_none() => {
            return Err(s.at_key("initial", "kind", "constant initial state needs `value`"));
        }
        _ => {}
    }

    let d = &c.disturbance;
    nonnegative(s, "disturbance", "amplitude", d.amplitude)?;
    positive(s, "disturbance", "step", d.step)?;
    if d.kind == DisturbanceKind::Constant && d.value.is_none_or(|v| !v.is_finite()) {
        return Err(s.at_key("disturbance", "value", "constant disturbance needs a finite `value`"));
    }
    if d.pieces == Some(0) {
        return Err(s.at_key("disturbance", "pieces", "`pieces` must be at least 1"));
    }

    let f = &c.family;
    nonempty_positive(s, "family", "t_grid", f.t_grid.as_ref())?;
    if let Some(l) = &f.ladder {
        if l.is_empty() {
            return Err(s.at_key("family", "ladder", "`ladder` must not be empty"));
        }
        if l.contains(&0) {
            return Err(s.at_key("family", "ladder", "`ladder` entries start at 1"));
        }
    }
    for (key, v) in [("threshold", f.threshold), ("limit_level", f.limit_level)] {
        if let Some(x) = v {
            if !(x > 0.0 && x < 1.0) {
                return Err(s.at_key("family", key, format!("`{key}` must lie in (0, 1), got {x}")));
            }
        }
    }
    positive(s, "family", "gas_t_end", f.gas_t_end)?;
    if f.gas_ns.as_ref().is_some_and(|v| v.contains(&0)) {
        return Err(s.at_key("family", "gas_ns", "`gas_ns` entries start at 1"));
    }

    if let Some(times) = &c.transport.times {
        if times.is_empty() || times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(s.at_key(
                "transport",
                "times",
                "`times` must be a nonempty list of nonnegative times",
            ));
        }
    }

    let l = &c.lyapunov;
    positive(s, "lyapunov", "omega", l.omega)?;
    positive(s, "lyapunov", "horizon", l.horizon)?;
    positive(s, "lyapunov", "amplitude", l.amplitude)?;
    if l.s_steps == Some(0) {
        return Err(s.at_key("lyapunov", "s_steps", "`s_steps` must be at least 1"));
    }

    let i = &c.iss;
    positive(s, "iss", "alpha", i.alpha)?;
    positive(s, "iss", "epsilon", i.epsilon)?;
    positive(s, "iss", "k_r", i.k_r)?;
    positive(s, "iss", "x0_radius", i.x0_radius)?;
    nonnegative(s, "iss", "d_max", i.d_max)?;
    positive(s, "iss", "step", i.step)?;
    nonempty_positive(s, "iss", "gain_amplitudes", i.gain_amplitudes.as_ref())?;
    if i.pieces == Some(0) {
        return Err(s.at_key("iss", "pieces", "`pieces` must be at least 1"));
    }
    if let (Some(a), Some(e)) = (i.alpha, i.epsilon) {
        if e >= 2.0 * a {
            return Err(s.at_key(
                "iss",
                "epsilon",
                format!("`epsilon` must be below 2 alpha = {}", 2.0 * a),
            ));
        }
    }

    let g = &c.gronwall;
    positive(s, "gronwall", "k_r", g.k_r)?;
    positive(s, "gronwall", "x0_amplitude", g.x0_amplitude)?;
    positive(s, "gronwall", "perturbation", g.perturbation)?;
    nonnegative(s, "gronwall", "d_max", g.d_max)?;
    positive(s, "gronwall", "step", g.step)?;

    let fit = &c.fit;
    nonempty_positive(s, "fit", "radii", fit.radii.as_ref())?;
    positive(s, "fit", "mu_floor", fit.mu_floor)?;
    if fit.modes == Some(0) {
        return Err(s.at_key("fit", "modes", "`modes` must be at least 1"));
    }
    if fit.fit_points.is_some_and(|p| p < 2) {
        return Err(s.at_key("fit", "fit_points", "`fit_points` must be at least 2"));
    }
    if fit.ladder.as_ref().is_some_and(|l| l.is_empty() || l.contains(&0)) {
        return Err(s.at_key("fit", "ladder", "`ladder` must be nonempty with entries >= 1"));
    }

    positive(s, "properties", "amplitude", c.properties.amplitude)?;
    positive(s, "properties", "lipschitz_radius", c.properties.lipschitz_radius)?;
    Ok(())
}

fn validate_system(sys: &SystemConfig, s: &Source) -> Result<(), Diagnostic> {
    let mut dim = None;
    match sys.generator {
        GeneratorKind::ScalarDiagonal => match sys.alpha {
            None => return Err(s.at_key("system", "generator", "scalar-diagonal generator needs `alpha`")),
            Some(a) if !a.is_finite() => return Err(s.at_key("system", "alpha", "`alpha` must be finite")),
            _ => {}
        },
        GeneratorKind::Matrix => match &sys.matrix {
            None => return Err(s.at_key("system", "generator", "matrix generator needs `matrix`")),
            Some(m) => dim = Some(square(s, "matrix", m)?),
        },
        _ => {}
    }
    if !sys.input.is_finite() {
        return Err(s.at_key("system", "input", "`input` must be finite"));
    }
    if let Some(b) = &sys.input_matrix {
        let Some(m) = dim else {
            return Err(s.at_key("system", "input_matrix", "`input_matrix` needs a matrix generator"));
        };
        if b.len() != m || b.iter().any(|row| row.len() != b[0].len()) || b[0].is_empty() {
            return Err(s.at_key(
                "system",
                "input_matrix",
                format!("`input_matrix` must have {m} rows of equal nonzero length"),
            ));
        }
        if b.iter().flatten().any(|v| !v.is_finite()) {
            return Err(s.at_key("system", "input_matrix", "`input_matrix` has non-finite entries"));
        }
    }
    match sys.feedback {
        FeedbackKind::DeadzoneLinear => match sys.delta {
            Some(d) if d > 0.0 && d.is_finite() => {}
            _ => return Err(s.at_key("system", "delta", "deadzone-linear feedback needs positive `delta`")),
        },
        FeedbackKind::Tabulated => {
            let (Some(xs), Some(ys)) = (&sys.table_x, &sys.table_y) else {
                return Err(s.at_key("system", "feedback", "tabulated feedback needs `table_x` and `table_y`"));
            };
            if xs.len() != ys.len() || xs.len() < 2 {
                return Err(s.at_key("system", "table_y", "`table_x` and `table_y` need equal length >= 2"));
            }
        }
        _ => {}
    }
    Ok(())
}
