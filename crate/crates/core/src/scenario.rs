//! Scenario files: a line-oriented `key = value` format.
//!
//! ```text
//! # comment
//! name = burgers_torus
//! seed = 7
//!
//! [manifold]
//! chart = flat_torus
//! period = 1
//! resolution = 64, 64
//!
//! [flux]
//! family = compatible
//! h = burgers
//! field = constant
//! direction = 0.8, 0.6
//!
//! [initial]          # repeat for every ensemble member
//! profile = sine
//! amplitude = 1
//!
//! [solver]
//! method = fv
//! t_end = 0.5
//!
//! [properties]
//! checks = lp_stability, maximum_principle
//!
//! [output]
//! directory = burgers_torus
//! ```
//!
//! Sections are flat (no nesting). Top-level keys come before the first
//! section. Lists are comma separated. Polynomials are either a name
//! (`linear`, `burgers`, `cubic`) or ascending coefficients `c0, c1, ...`.
//! Every problem in a file is reported, each with its line number.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{ConfigIssue, Error, Result};
use crate::fv::NumericalFlux;
use crate::lorentzian::LorentzianVariant;
use crate::poly::Polynomial;
use crate::viscous::{ViscousForm, MAX_CFL};

/// Smallest admissible cells per axis.
pub const MIN_RESOLUTION: usize = 16;

pub const CHARTS: [&str; 7] = [
    "flat_circle",
    "weighted_circle",
    "flat_torus",
    "wavy_torus",
    "sphere_band",
    "minkowski_1_1",
    "schwarzschild_radial",
];
pub const FLUX_FAMILIES: [&str; 6] = [
    "compatible",
    "weighted",
    "zero",
    "lorentz_uniform",
    "schwarzschild_compatible",
    "schwarzschild_transport",
];
pub const FIELDS: [&str; 4] = ["constant", "zonal", "shear", "coordinate"];
pub const PROFILES: [&str; 4] = ["constant", "sine", "pulse", "riemann"];
pub const METHODS: [&str; 4] = ["fv", "viscous", "lorentzian", "oracle"];
pub const POLYNOMIALS: [&str; 3] = ["linear", "burgers", "cubic"];
pub const CHECKS: [&str; 10] = [
    "lp_stability",
    "maximum_principle",
    "contraction",
    "kruzkov_pair",
    "weak_entropy",
    "tv_envelope",
    "time_lipschitz",
    "foliation_contraction",
    "timelike",
    "oracle_error",
];

const SECTIONS: [&str; 7] = ["", "manifold", "flux", "initial", "solver", "properties", "output"];

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "" => &["name", "seed"],
        "manifold" => &[
            "chart",
            "length",
            "period",
            "lat_max",
            "k_mean",
            "k_sin",
            "k_cos",
            "mass",
            "r_in",
            "r_out",
            "resolution",
        ],
        "flux" => &["family", "h", "field", "direction", "speed", "p0", "p1", "beta", "s"],
        "initial" => &[
            "profile",
            "value",
            "mean",
            "amplitude",
            "wavenumber",
            "phase",
            "axis",
            "low",
            "high",
            "center",
            "width",
            "left",
            "right",
            "position",
        ],
        "solver" => &[
            "method",
            "numerical_flux",
            "epsilon",
            "epsilon_cells",
            "cfl",
            "t_end",
            "snapshots",
            "form",
            "variant",
            "inflow",
            "dt_max",
            "record_every_step",
        ],
        "properties" => &[
            "checks",
            "p",
            "tv_limit",
            "entropy_constant",
            "lipschitz",
            "oracle_constant",
        ],
        "output" => &["directory"],
        _ => &[],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChartSpec {
    FlatCircle { length: f64 },
    WeightedCircle { mean: f64, sin: Vec<f64>, cos: Vec<f64> },
    FlatTorus { period: f64 },
    WavyTorus { period: f64 },
    SphereBand { lat_max: f64 },
    Minkowski { length: f64 },
    SchwarzschildRadial { mass: f64, r_in: f64, r_out: f64 },
}

impl ChartSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ChartSpec::FlatCircle { .. } => "flat_circle",
            ChartSpec::WeightedCircle { .. } => "weighted_circle",
            ChartSpec::FlatTorus { .. } => "flat_torus",
            ChartSpec::WavyTorus { .. } => "wavy_torus",
            ChartSpec::SphereBand { .. } => "sphere_band",
            ChartSpec::Minkowski { .. } => "minkowski_1_1",
            ChartSpec::SchwarzschildRadial { .. } => "schwarzschild_radial",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ChartSpec::FlatTorus { .. } | ChartSpec::WavyTorus { .. } | ChartSpec::SphereBand { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_spacetime(&self) -> bool {
        matches!(
            self,
            ChartSpec::Minkowski { .. } | ChartSpec::SchwarzschildRadial { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldSpec {
    pub chart: ChartSpec,
    pub resolution: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    /// `d/√|g|` with constant `d`.
    Constant([f64; 2]),
    Zonal(f64),
    Shear,
    Coordinate,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FluxSpec {
    Compatible { h: Polynomial, field: FieldSpec },
    Weighted { h: Polynomial },
    Zero,
    LorentzUniform { p0: Polynomial, p1: Polynomial, beta: f64 },
    SchwarzschildCompatible { p0: Polynomial, p1: Polynomial, s: f64 },
    SchwarzschildTransport { s: f64 },
}

impl FluxSpec {
    pub fn family(&self) -> &'static str {
        match self {
            FluxSpec::Compatible { .. } => "compatible",
            FluxSpec::Weighted { .. } => "weighted",
            FluxSpec::Zero => "zero",
            FluxSpec::LorentzUniform { .. } => "lorentz_uniform",
            FluxSpec::SchwarzschildCompatible { .. } => "schwarzschild_compatible",
            FluxSpec::SchwarzschildTransport { .. } => "schwarzschild_transport",
        }
    }

    pub fn is_lorentzian(&self) -> bool {
        matches!(
            self,
            FluxSpec::LorentzUniform { .. }
                | FluxSpec::SchwarzschildCompatible { .. }
                | FluxSpec::SchwarzschildTransport { .. }
        )
    }
}

/// Initial-data profile along coordinate axis `axis`; `s` below is the
/// coordinate scaled to `[0, 1)` over the axis.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · sin(2π wavenumber s + phase)`.
    Sine {
        mean: f64,
        amplitude: f64,
        wavenumber: f64,
        phase: f64,
        axis: usize,
    },
    /// `high` on `|s − center| < width/2` (periodically), `low` elsewhere.
    Pulse {
        low: f64,
        high: f64,
        center: f64,
        width: f64,
        axis: usize,
    },
    /// `left` for `s < position`, `right` otherwise.
    Riemann {
        left: f64,
        right: f64,
        position: f64,
        axis: usize,
    },
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Constant { .. } => "constant",
            Profile::Sine { .. } => "sine",
            Profile::Pulse { .. } => "pulse",
            Profile::Riemann { .. } => "riemann",
        }
    }

    pub fn is_discontinuous(&self) -> bool {
        matches!(self, Profile::Pulse { .. } | Profile::Riemann { .. })
    }

    pub fn axis(&self) -> usize {
        match *self {
            Profile::Constant { .. } => 0,
            Profile::Sine { axis, .. } | Profile::Pulse { axis, .. } | Profile::Riemann { axis, .. } => axis,
        }
    }

    /// Value at scaled coordinate `s ∈ [0, 1)`.
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Sine {
                mean,
                amplitude,
                wavenumber,
                phase,
                ..
            } => mean + amplitude * (2.0 * std::f64::consts::PI * wavenumber * s + phase).sin(),
            Profile::Pulse {
                low,
                high,
                center,
                width,
                ..
            } => {
                let mut d = (s - center).abs();
                d = d.min(1.0 - d);
                if d < 0.5 * width {
                    high
                } else {
                    low
                }
            }
            Profile::Riemann {
                left, right, position, ..
            } => {
                if s < position {
                    left
                } else {
                    right
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Fv,
    Viscous,
    Lorentzian,
    Oracle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fv => "fv",
            Method::Viscous => "viscous",
            Method::Lorentzian => "lorentzian",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Epsilon {
    Absolute(f64),
    /// Multiple of the smallest cell spacing.
    Cells(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub method: Method,
    pub numerical_flux: NumericalFlux,
    pub epsilon: Epsilon,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub form: ViscousForm,
    pub variant: LorentzianVariant,
    pub inflow: Option<f64>,
    pub dt_max: Option<f64>,
    pub record_every_step: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    LpStability,
    MaximumPrinciple,
    Contraction,
    KruzkovPair,
    WeakEntropy,
    TvEnvelope,
    TimeLipschitz,
    FoliationContraction,
    Timelike,
    OracleError,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::LpStability,
        Check::MaximumPrinciple,
        Check::Contraction,
        Check::KruzkovPair,
        Check::WeakEntropy,
        Check::TvEnvelope,
        Check::TimeLipschitz,
        Check::FoliationContraction,
        Check::Timelike,
        Check::OracleError,
    ];

    pub fn name(&self) -> &'static str {
        CHECKS[Self::ALL.iter().position(|c| c == self).expect("listed")]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CHECKS.iter().position(|c| *c == name).map(|i| Self::ALL[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertySpec {
    pub checks: Vec<Check>,
    pub p: Vec<f64>,
    /// Upper bound asserted on the fitted TV constant; `None` only reports it.
    pub tv_limit: Option<f64>,
    /// `C` in the `−C(Δx + Δt)` tolerance of weak entropy residuals.
    pub entropy_constant: f64,
    /// Bound on `|∂_u f|_g`; computed from the flux when absent.
    pub lipschitz: Option<f64>,
    /// `C` in the `C·Δx` tolerance of the oracle L¹ error.
    pub oracle_constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub flux: FluxSpec,
    pub initial: Vec<Profile>,
    pub solver: SolverSpec,
    pub properties: PropertySpec,
    /// Output directory relative to the output root.
    pub output: String,
}

struct Entry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn suggest(word: &str, options: &[&str]) -> String {
    options
        .iter()
        .min_by_key(|o| strsim::levenshtein(word, o))
        .map(|o| format!("; did you mean `{o}`?"))
        .unwrap_or_default()
}

fn lex(text: &str, issues: &mut Vec<ConfigIssue>) -> Vec<Section> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: BTreeMap::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                issues.push(ConfigIssue {
                    line,
                    message: format!("malformed section header `{content}`"),
                });
                continue;
            };
            let name = name.trim();
            if name.contains('.') || name.contains('[') {
                issues.push(ConfigIssue {
                    line,
                    message: format!("nested tables are not allowed: `{name}`"),
                });
                continue;
            }
            if !SECTIONS[1..].contains(&name) {
                issues.push(ConfigIssue {
                    line,
                    message: format!("unknown section `[{name}]`{}", suggest(name, &SECTIONS[1..])),
                });
            } else if name != "initial" && sections.iter().any(|s| s.name == name) {
                issues.push(ConfigIssue {
                    line,
                    message: format!("section `[{name}]` appears twice"),
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(ConfigIssue {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let key = key.trim();
        let section = sections.last_mut().expect("root section");
        let allowed = keys_of(&section.name);
        if !SECTIONS.contains(&section.name.as_str()) {
            continue;
        }
        if !allowed.contains(&key) {
            let place = if section.name.is_empty() {
                "top level".to_string()
            } else {
                format!("[{}]", section.name)
            };
            issues.push(ConfigIssue {
                line,
                message: format!("unknown key `{key}` in {place}{}", suggest(key, allowed)),
            });
            continue;
        }
        if section.entries.contains_key(key) {
            issues.push(ConfigIssue {
                line,
                message: format!("duplicate key `{key}`"),
            });
            continue;
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
                used: std::cell::Cell::new(false),
            },
        );
    }
    sections
}

/// Typed access to one section, recording problems as it goes.
struct Reader<'a> {
    section: Option<&'a Section>,
    issues: &'a mut Vec<ConfigIssue>,
}

impl<'a> Reader<'a> {
    fn line(&self, key: &str) -> usize {
        self.section
            .and_then(|s| s.entries.get(key))
            .map(|e| e.line)
            .or(self.section.map(|s| s.line))
            .unwrap_or(0)
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        let e = self.section?.entries.get(key)?;
        e.used.set(true);
        Some(e.value.as_str())
    }

    fn error(&mut self, key: &str, message: String) {
        let line = self.line(key);
        self.issues.push(ConfigIssue { line, message });
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    fn required(&mut self, key: &str) -> Option<String> {
        let v = self.string(key);
        if v.is_none() {
            let place = match self.section {
                Some(s) if !s.name.is_empty() => format!("[{}]", s.name),
                _ => "top level".into(),
            };
            self.error(key, format!("missing required key `{key}` in {place}"));
        }
        v
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.raw(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(key, format!("`{key}` must be {what}, got `{raw}`"));
                None
            }
        }
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        self.parse::<f64>(key, "a number").unwrap_or(default)
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        self.parse::<f64>(key, "a number")
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<Vec<T>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Some(Vec::new());
        }
        let mut out = Vec::new();
        for item in raw.split(',') {
            match item.trim().parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.error(
                        key,
                        format!("`{key}` must be a list of {what}, bad item `{}`", item.trim()),
                    );
                    return None;
                }
            }
        }
        Some(out)
    }

    fn name_of(&mut self, key: &str, options: &[&'static str], default: &'static str) -> &'static str {
        match self.raw(key) {
            None => default,
            Some(v) => match options.iter().find(|o| **o == v) {
                Some(o) => o,
                None => {
                    let msg = format!("unknown {key} `{v}`{}", suggest(v, options));
                    self.error(key, msg);
                    default
                }
            },
        }
    }

    fn polynomial(&mut self, key: &str, default: Polynomial) -> Polynomial {
        let Some(raw) = self.raw(key) else {
            return default;
        };
        match raw {
            "linear" => Polynomial::linear(),
            "burgers" => Polynomial::burgers(),
            "cubic" => Polynomial::cubic(),
            _ => match raw
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
            {
                Ok(c) if !c.is_empty() && c.iter().all(|x| x.is_finite()) => Polynomial::new(c),
                _ => {
                    let msg = format!(
                        "`{key}` must name a polynomial or list coefficients, got `{raw}`{}",
                        suggest(raw, &POLYNOMIALS)
                    );
                    self.error(key, msg);
                    default
                }
            },
        }
    }

    fn boolean(&mut self, key: &str) -> bool {
        match self.raw(key) {
            None => false,
            Some("true") => true,
            Some("false") => false,
            Some(v) => {
                self.error(key, format!("`{key}` must be true or false, got `{v}`"));
                false
            }
        }
    }

    /// Flags keys present but irrelevant to the chosen variant.
    fn unused(&mut self) {
        let Some(section) = self.section else { return };
        for (k, e) in &section.entries {
            if !e.used.get() {
                self.issues.push(ConfigIssue {
                    line: e.line,
                    message: format!("key `{k}` does not apply here"),
                });
            }
        }
    }
}

fn positive(r: &mut Reader, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        r.error(key, format!("`{key}` must be positive and finite, got {v}"));
    }
}

/// Parses and validates a scenario, reporting every problem found.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut issues = Vec::new();
    let sections = lex(text, &mut issues);
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let root = find("");

    let mut r = Reader {
        section: root,
        issues: &mut issues,
    };
    let name = r.required("name").unwrap_or_default();
    if !name.is_empty() && !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        r.error(
            "name",
            format!("name `{name}` may only use letters, digits, `_` and `-`"),
        );
    }
    let seed = r.parse::<u64>("seed", "a nonnegative integer").unwrap_or(0);
    r.unused();

    for required in ["manifold", "flux", "solver"] {
        if find(required).is_none() {
            issues.push(ConfigIssue {
                line: 0,
                message: format!("missing section `[{required}]`"),
            });
        }
    }

    // [manifold]
    let mut r = Reader {
        section: find("manifold"),
        issues: &mut issues,
    };
    let chart_name = if r.section.is_some() { r.required("chart") } else { None };
    let chart_name = chart_name.map(|c| {
        if CHARTS.contains(&c.as_str()) {
            c
        } else {
            let msg = format!("unknown chart `{c}`{}", suggest(&c, &CHARTS));
            r.error("chart", msg);
            "flat_circle".into()
        }
    });
    let chart = match chart_name.as_deref().unwrap_or("flat_circle") {
        "flat_circle" => ChartSpec::FlatCircle {
            length: r.float("length", 1.0),
        },
        "weighted_circle" => ChartSpec::WeightedCircle {
            mean: r.float("k_mean", 2.0),
            sin: r.list("k_sin", "numbers").unwrap_or_else(|| vec![1.0]),
            cos: r.list("k_cos", "numbers").unwrap_or_default(),
        },
        "flat_torus" => ChartSpec::FlatTorus {
            period: r.float("period", 1.0),
        },
        "wavy_torus" => ChartSpec::WavyTorus {
            period: r.float("period", 1.0),
        },
        "sphere_band" => ChartSpec::SphereBand {
            lat_max: r.float("lat_max", 1.0),
        },
        "minkowski_1_1" => ChartSpec::Minkowski {
            length: r.float("length", 1.0),
        },
        _ => ChartSpec::SchwarzschildRadial {
            mass: r.float("mass", 1.0),
            r_in: r.float("r_in", 2.5),
            r_out: r.float("r_out", 12.0),
        },
    };
    match &chart {
        ChartSpec::FlatCircle { length } | ChartSpec::Minkowski { length } => positive(&mut r, "length", *length),
        ChartSpec::FlatTorus { period } | ChartSpec::WavyTorus { period } => positive(&mut r, "period", *period),
        ChartSpec::SphereBand { lat_max } => {
            if !(*lat_max > 0.0 && *lat_max < std::f64::consts::FRAC_PI_2) {
                r.error("lat_max", format!("`lat_max` must lie in (0, π/2), got {lat_max}"));
            }
        }
        ChartSpec::WeightedCircle { mean, sin, cos } => {
            let k = crate::geometry::Fourier1d::new(*mean, sin.clone(), cos.clone());
            if !(k.sampled_min() > 0.0) {
                r.error("k_mean", "weight k must stay positive".into());
            }
        }
        ChartSpec::SchwarzschildRadial { mass, r_in, r_out } => {
            if !(*mass >= 0.0) {
                r.error("mass", format!("`mass` must be nonnegative, got {mass}"));
            }
            if !(*r_in > 2.0 * mass) {
                r.error(
                    "r_in",
                    format!("`r_in` = {r_in} lies inside the horizon r = {}", 2.0 * mass),
                );
            }
            if !(r_out > r_in) {
                r.error("r_out", format!("`r_out` must exceed `r_in`, got {r_out}"));
            }
        }
    }
    let resolution: Vec<usize> = if r.section.is_some() {
        if r.raw("resolution").is_none() {
            r.required("resolution");
            vec![MIN_RESOLUTION; chart.dim()]
        } else {
            r.list::<usize>("resolution", "cell counts")
                .unwrap_or_else(|| vec![MIN_RESOLUTION; chart.dim()])
        }
    } else {
        vec![MIN_RESOLUTION; chart.dim()]
    };
    if resolution.len() != chart.dim() {
        r.error(
            "resolution",
            format!(
                "chart `{}` needs {} resolution entries, got {}",
                chart.name(),
                chart.dim(),
                resolution.len()
            ),
        );
    }
    if let Some(n) = resolution.iter().find(|n| **n < MIN_RESOLUTION) {
        r.error(
            "resolution",
            format!("resolution must be at least {MIN_RESOLUTION} per axis, got {n}"),
        );
    }
    r.unused();
    let manifold = ManifoldSpec { chart, resolution };

    // [flux]
    let mut r = Reader {
        section: find("flux"),
        issues: &mut issues,
    };
    let family = if r.section.is_some() {
        r.required("family")
    } else {
        None
    };
    let family = match family {
        Some(f) if FLUX_FAMILIES.contains(&f.as_str()) => f,
        Some(f) => {
            let msg = format!("unknown flux family `{f}`{}", suggest(&f, &FLUX_FAMILIES));
            r.error("family", msg);
            "zero".into()
        }
        None => "zero".into(),
    };
    let flux = match family.as_str() {
        "compatible" => {
            let h = r.polynomial("h", Polynomial::burgers());
            let field = match r.name_of("field", &FIELDS, "constant") {
                "constant" => {
                    let d = r.list::<f64>("direction", "numbers").unwrap_or_else(|| vec![1.0, 0.0]);
                    if d.len() != 2 {
                        r.error("direction", format!("`direction` needs 2 components, got {}", d.len()));
                    }
                    FieldSpec::Constant([d.first().copied().unwrap_or(1.0), d.get(1).copied().unwrap_or(0.0)])
                }
                "zonal" => FieldSpec::Zonal(r.float("speed", 1.0)),
                "shear" => FieldSpec::Shear,
                _ => FieldSpec::Coordinate,
            };
            FluxSpec::Compatible { h, field }
        }
        "weighted" => FluxSpec::Weighted {
            h: r.polynomial("h", Polynomial::burgers()),
        },
        "lorentz_uniform" => FluxSpec::LorentzUniform {
            p0: r.polynomial("p0", Polynomial::linear()),
            p1: r.polynomial("p1", Polynomial::linear()),
            beta: r.float("beta", 0.5),
        },
        "schwarzschild_compatible" => FluxSpec::SchwarzschildCompatible {
            p0: r.polynomial("p0", Polynomial::linear()),
            p1: r.polynomial("p1", Polynomial::linear()),
            s: r.float("s", 0.9),
        },
        "schwarzschild_transport" => FluxSpec::SchwarzschildTransport { s: r.float("s", 0.9) },
        _ => FluxSpec::Zero,
    };
    // pairings between chart and flux family
    let chart_name = manifold.chart.name();
    let pairing_ok = match &flux {
        FluxSpec::Compatible { field, .. } => {
            !manifold.chart.is_spacetime()
                && !matches!(manifold.chart, ChartSpec::WeightedCircle { .. })
                && match field {
                    FieldSpec::Zonal(_) => chart_name == "sphere_band",
                    FieldSpec::Shear => chart_name == "flat_torus",
                    FieldSpec::Coordinate => chart_name == "flat_circle" || chart_name == "flat_torus",
                    FieldSpec::Constant(d) => chart_name != "sphere_band" || d[1] == 0.0 && d[0] == 0.0,
                }
        }
        FluxSpec::Weighted { .. } => chart_name == "weighted_circle",
        FluxSpec::Zero => !manifold.chart.is_spacetime(),
        FluxSpec::LorentzUniform { .. } => chart_name == "minkowski_1_1",
        FluxSpec::SchwarzschildCompatible { .. } | FluxSpec::SchwarzschildTransport { .. } => {
            chart_name == "schwarzschild_radial"
        }
    };
    if !pairing_ok && r.section.is_some() {
        r.error(
            "family",
            format!("flux family `{}` cannot be used on chart `{chart_name}`", flux.family()),
        );
    }
    r.unused();

    // [initial], repeated
    let mut initial = Vec::new();
    for section in sections.iter().filter(|s| s.name == "initial") {
        let mut r = Reader {
            section: Some(section),
            issues: &mut issues,
        };
        let profile = match r.required("profile") {
            None => continue,
            Some(p) if !PROFILES.contains(&p.as_str()) => {
                let msg = format!("unknown profile `{p}`{}", suggest(&p, &PROFILES));
                r.error("profile", msg);
                continue;
            }
            Some(p) => p,
        };
        let axis = r.parse::<usize>("axis", "an axis index").unwrap_or(0);
        if axis >= manifold.chart.dim() {
            r.error(
                "axis",
                format!(
                    "axis {axis} does not exist on a {}-dimensional chart",
                    manifold.chart.dim()
                ),
            );
        }
        let p = match profile.as_str() {
            "constant" => Profile::Constant {
                value: r.float("value", 0.0),
            },
            "sine" => Profile::Sine {
                mean: r.float("mean", 0.0),
                amplitude: r.float("amplitude", 1.0),
                wavenumber: r.float("wavenumber", 1.0),
                phase: r.float("phase", 0.0),
                axis,
            },
            "pulse" => Profile::Pulse {
                low: r.float("low", 0.0),
                high: r.float("high", 1.0),
                center: r.float("center", 0.5),
                width: r.float("width", 0.25),
                axis,
            },
            _ => Profile::Riemann {
                left: r.float("left", 1.0),
                right: r.float("right", 0.0),
                position: r.float("position", 0.5),
                axis,
            },
        };
        if let Profile::Constant { .. } = p {
            if r.raw("axis").is_some() {
                r.error("axis", "`axis` does not apply to a constant profile".into());
            }
        }
        r.unused();
        initial.push(p);
    }
    if initial.is_empty() {
        issues.push(ConfigIssue {
            line: 0,
            message: "at least one `[initial]` section is required".into(),
        });
    }

    // [solver]
    let mut r = Reader {
        section: find("solver"),
        issues: &mut issues,
    };
    let method_name = if r.section.is_some() {
        r.required("method")
    } else {
        None
    };
    let method = match method_name.as_deref() {
        Some("fv") | None => Method::Fv,
        Some("viscous") => Method::Viscous,
        Some("lorentzian") => Method::Lorentzian,
        Some("oracle") => Method::Oracle,
        Some(m) => {
            let msg = format!("unknown method `{m}`{}", suggest(m, &METHODS));
            r.error("method", msg);
            Method::Fv
        }
    };
    let uses_nf = matches!(method, Method::Fv | Method::Oracle);
    let numerical_flux = if uses_nf {
        match r.raw("numerical_flux") {
            None => NumericalFlux::Rusanov,
            Some(v) => NumericalFlux::from_name(v).unwrap_or_else(|| {
                let msg = format!("unknown numerical_flux `{v}`{}", suggest(v, &NumericalFlux::NAMES));
                r.error("numerical_flux", msg);
                NumericalFlux::Rusanov
            }),
        }
    } else {
        NumericalFlux::Rusanov
    };
    let uses_eps = matches!(method, Method::Viscous | Method::Lorentzian);
    let epsilon = if uses_eps {
        match (r.opt_float("epsilon"), r.opt_float("epsilon_cells")) {
            (Some(_), Some(_)) => {
                r.error(
                    "epsilon_cells",
                    "give either `epsilon` or `epsilon_cells`, not both".into(),
                );
                Epsilon::Absolute(0.0)
            }
            (Some(e), None) => Epsilon::Absolute(e),
            (None, Some(c)) => Epsilon::Cells(c),
            (None, None) => Epsilon::Absolute(0.0),
        }
    } else {
        Epsilon::Absolute(0.0)
    };
    let eps_value = match epsilon {
        Epsilon::Absolute(e) | Epsilon::Cells(e) => e,
    };
    if !(eps_value >= 0.0 && eps_value.is_finite()) {
        r.error("epsilon", format!("epsilon must be nonnegative, got {eps_value}"));
    }
    if method == Method::Viscous && !(eps_value > 0.0) {
        r.error("epsilon", "viscous runs need a positive epsilon".into());
    }
    let default_cfl = if method == Method::Viscous { MAX_CFL } else { 0.9 };
    let cfl = r.float("cfl", default_cfl);
    let max_cfl = if method == Method::Viscous { MAX_CFL } else { 1.0 };
    if !(cfl > 0.0 && cfl <= max_cfl) {
        r.error(
            "cfl",
            format!(
                "cfl must lie in (0, {max_cfl}] for method `{}`, got {cfl}",
                method.name()
            ),
        );
    }
    let t_end = if r.section.is_some() {
        if r.raw("t_end").is_none() {
            r.required("t_end");
            1.0
        } else {
            r.float("t_end", 1.0)
        }
    } else {
        1.0
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        r.error("t_end", format!("t_end must be positive, got {t_end}"));
    }
    let snapshots: Vec<f64> = r.list("snapshots", "times").unwrap_or_default();
    if let Some(t) = snapshots.iter().find(|t| !(**t >= 0.0 && **t <= t_end)) {
        r.error("snapshots", format!("snapshot time {t} lies outside [0, {t_end}]"));
    }
    let form = if method == Method::Viscous {
        match r.raw("form") {
            None => ViscousForm::Conservative,
            Some(v) => ViscousForm::from_name(v).unwrap_or_else(|| {
                let msg = format!("unknown form `{v}`{}", suggest(v, &["conservative", "advective"]));
                r.error("form", msg);
                ViscousForm::Conservative
            }),
        }
    } else {
        ViscousForm::Conservative
    };
    let (variant, inflow) = if method == Method::Lorentzian {
        let v = match r.raw("variant") {
            None => LorentzianVariant::Conservative,
            Some(v) => LorentzianVariant::from_name(v).unwrap_or_else(|| {
                let msg = format!("unknown variant `{v}`{}", suggest(v, &LorentzianVariant::NAMES));
                r.error("variant", msg);
                LorentzianVariant::Conservative
            }),
        };
        (v, r.opt_float("inflow"))
    } else {
        (LorentzianVariant::Conservative, None)
    };
    let dt_max = if method == Method::Lorentzian {
        None
    } else {
        r.opt_float("dt_max")
    };
    if let Some(d) = dt_max {
        if !(d > 0.0) {
            r.error("dt_max", format!("dt_max must be positive, got {d}"));
        }
    }
    let record_every_step = r.boolean("record_every_step");
    if (method == Method::Lorentzian) != manifold.chart.is_spacetime() && r.section.is_some() {
        r.error(
            "method",
            format!(
                "method `{}` cannot run on chart `{}`",
                method.name(),
                manifold.chart.name()
            ),
        );
    }
    if method == Method::Oracle && !matches!(flux, FluxSpec::Weighted { .. }) {
        r.error("method", "the oracle needs the `weighted` flux family".into());
    }
    r.unused();
    let solver = SolverSpec {
        method,
        numerical_flux,
        epsilon,
        cfl,
        t_end,
        snapshots,
        form,
        variant,
        inflow,
        dt_max,
        record_every_step,
    };

    // [properties]
    let mut r = Reader {
        section: find("properties"),
        issues: &mut issues,
    };
    let checks = match r.list::<String>("checks", "names") {
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                match Check::from_name(&n) {
                    Some(c) if !out.contains(&c) => out.push(c),
                    Some(_) => {}
                    None => {
                        let msg = format!("unknown check `{n}`{}", suggest(&n, &CHECKS));
                        r.error("checks", msg);
                    }
                }
            }
            out
        }
        None => default_checks(method),
    };
    for c in [Check::WeakEntropy, Check::KruzkovPair] {
        if checks.contains(&c) && !solver.record_every_step {
            r.error(
                "checks",
                format!(
                    "check `{}` integrates in time over every step; set `record_every_step = true`",
                    c.name()
                ),
            );
        }
    }
    let p = r
        .list::<f64>("p", "exponents")
        .unwrap_or_else(|| vec![1.0, 2.0, f64::INFINITY]);
    if let Some(bad) = p.iter().find(|p| !(**p >= 1.0)) {
        r.error("p", format!("exponents must be at least 1, got {bad}"));
    }
    let tv_limit = r.opt_float("tv_limit");
    let entropy_constant = r.float("entropy_constant", 1.0);
    let lipschitz = r.opt_float("lipschitz");
    let oracle_constant = r.float("oracle_constant", 1.0);
    r.unused();
    let properties = PropertySpec {
        checks,
        p,
        tv_limit,
        entropy_constant,
        lipschitz,
        oracle_constant,
    };

    // [output]
    let mut r = Reader {
        section: find("output"),
        issues: &mut issues,
    };
    let output = r.string("directory").unwrap_or_else(|| name.clone());
    if output.is_empty() || output.starts_with('/') || output.split('/').any(|c| c == "..") {
        r.error(
            "directory",
            format!("output directory must be a relative path, got `{output}`"),
        );
    }
    r.unused();

    if !issues.is_empty() {
        issues.sort_by_key(|i| i.line);
        return Err(Error::Config(issues));
    }
    Ok(Scenario {
        name,
        seed,
        manifold,
        flux,
        initial,
        solver,
        properties,
        output,
    })
}

/// Checks run when a scenario lists none.
pub fn default_checks(method: Method) -> Vec<Check> {
    match method {
        Method::Fv | Method::Viscous => vec![
            Check::LpStability,
            Check::MaximumPrinciple,
            Check::Contraction,
            Check::TvEnvelope,
            Check::TimeLipschitz,
        ],
        Method::Lorentzian => vec![Check::FoliationContraction, Check::Timelike],
        Method::Oracle => vec![Check::OracleError, Check::MaximumPrinciple],
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn poly(p: &Polynomial) -> String {
    join(p.coeffs())
}

/// Canonical text form; every default is written out.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "name = {}", s.name);
    let _ = writeln!(w, "seed = {}", s.seed);
    let _ = writeln!(w, "\n[manifold]\nchart = {}", s.manifold.chart.name());
    match &s.manifold.chart {
        ChartSpec::FlatCircle { length } | ChartSpec::Minkowski { length } => {
            let _ = writeln!(w, "length = {length}");
        }
        ChartSpec::WeightedCircle { mean, sin, cos } => {
            let _ = writeln!(w, "k_mean = {mean}\nk_sin = {}\nk_cos = {}", join(sin), join(cos));
        }
        ChartSpec::FlatTorus { period } | ChartSpec::WavyTorus { period } => {
            let _ = writeln!(w, "period = {period}");
        }
        ChartSpec::SphereBand { lat_max } => {
            let _ = writeln!(w, "lat_max = {lat_max}");
        }
        ChartSpec::SchwarzschildRadial { mass, r_in, r_out } => {
            let _ = writeln!(w, "mass = {mass}\nr_in = {r_in}\nr_out = {r_out}");
        }
    }
    let res: Vec<String> = s.manifold.resolution.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(w, "resolution = {}", res.join(", "));

    let _ = writeln!(w, "\n[flux]\nfamily = {}", s.flux.family());
    match &s.flux {
        FluxSpec::Compatible { h, field } => {
            let _ = writeln!(w, "h = {}", poly(h));
            match field {
                FieldSpec::Constant(d) => {
                    let _ = writeln!(w, "field = constant\ndirection = {}", join(d));
                }
                FieldSpec::Zonal(speed) => {
                    let _ = writeln!(w, "field = zonal\nspeed = {speed}");
                }
                FieldSpec::Shear => {
                    let _ = writeln!(w, "field = shear");
                }
                FieldSpec::Coordinate => {
                    let _ = writeln!(w, "field = coordinate");
                }
            }
        }
        FluxSpec::Weighted { h } => {
            let _ = writeln!(w, "h = {}", poly(h));
        }
        FluxSpec::Zero => {}
        FluxSpec::LorentzUniform { p0, p1, beta } => {
            let _ = writeln!(w, "p0 = {}\np1 = {}\nbeta = {beta}", poly(p0), poly(p1));
        }
        FluxSpec::SchwarzschildCompatible { p0, p1, s } => {
            let _ = writeln!(w, "p0 = {}\np1 = {}\ns = {s}", poly(p0), poly(p1));
        }
        FluxSpec::SchwarzschildTransport { s } => {
            let _ = writeln!(w, "s = {s}");
        }
    }

    for p in &s.initial {
        let _ = writeln!(w, "\n[initial]\nprofile = {}", p.name());
        match *p {
            Profile::Constant { value } => {
                let _ = writeln!(w, "value = {value}");
            }
            Profile::Sine {
                mean,
                amplitude,
                wavenumber,
                phase,
                axis,
            } => {
                let _ = writeln!(
                    w,
                    "mean = {mean}\namplitude = {amplitude}\nwavenumber = {wavenumber}\nphase = {phase}\naxis = {axis}"
                );
            }
            Profile::Pulse {
                low,
                high,
                center,
                width,
                axis,
            } => {
                let _ = writeln!(
                    w,
                    "low = {low}\nhigh = {high}\ncenter = {center}\nwidth = {width}\naxis = {axis}"
                );
            }
            Profile::Riemann {
                left,
                right,
                position,
                axis,
            } => {
                let _ = writeln!(
                    w,
                    "left = {left}\nright = {right}\nposition = {position}\naxis = {axis}"
                );
            }
        }
    }

    let sv = &s.solver;
    let _ = writeln!(w, "\n[solver]\nmethod = {}", sv.method.name());
    if matches!(sv.method, Method::Fv | Method::Oracle) {
        let _ = writeln!(w, "numerical_flux = {}", sv.numerical_flux.name());
    }
    if matches!(sv.method, Method::Viscous | Method::Lorentzian) {
        match sv.epsilon {
            Epsilon::Absolute(e) => {
                let _ = writeln!(w, "epsilon = {e}");
            }
            Epsilon::Cells(c) => {
                let _ = writeln!(w, "epsilon_cells = {c}");
            }
        }
    }
    let _ = writeln!(
        w,
        "cfl = {}\nt_end = {}\nsnapshots = {}",
        sv.cfl,
        sv.t_end,
        join(&sv.snapshots)
    );
    if sv.method == Method::Viscous {
        let _ = writeln!(w, "form = {}", sv.form.name());
    }
    if sv.method == Method::Lorentzian {
        let _ = writeln!(w, "variant = {}", sv.variant.name());
        if let Some(v) = sv.inflow {
            let _ = writeln!(w, "inflow = {v}");
        }
    }
    if let Some(d) = sv.dt_max {
        let _ = writeln!(w, "dt_max = {d}");
    }
    let _ = writeln!(w, "record_every_step = {}", sv.record_every_step);

    let pr = &s.properties;
    let names: Vec<&str> = pr.checks.iter().map(|c| c.name()).collect();
    let _ = writeln!(w, "\n[properties]\nchecks = {}\np = {}", names.join(", "), join(&pr.p));
    if let Some(t) = pr.tv_limit {
        let _ = writeln!(w, "tv_limit = {t}");
    }
    let _ = writeln!(w, "entropy_constant = {}", pr.entropy_constant);
    if let Some(l) = pr.lipschitz {
        let _ = writeln!(w, "lipschitz = {l}");
    }
    let _ = writeln!(w, "oracle_constant = {}", pr.oracle_constant);
    let _ = writeln!(w, "\n[output]\ndirectory = {}", s.output);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = tiny\n[manifold]\nchart = flat_circle\nresolution = 32\n[flux]\nfamily = compatible\n[initial]\nprofile = sine\n[solver]\nmethod = fv\nt_end = 0.1\n";

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_scenario(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.output, "tiny");
        assert_eq!(s.solver.cfl, 0.9);
        assert_eq!(s.solver.numerical_flux, NumericalFlux::Rusanov);
        assert_eq!(
            s.flux,
            FluxSpec::Compatible {
                h: Polynomial::burgers(),
                field: FieldSpec::Constant([1.0, 0.0])
            }
        );
        assert_eq!(s.properties.checks, default_checks(Method::Fv));
        assert_eq!(
            s.initial,
            vec![Profile::Sine {
                mean: 0.0,
                amplitude: 1.0,
                wavenumber: 1.0,
                phase: 0.0,
                axis: 0
            }]
        );
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(MINIMAL).unwrap();
        let text = serialize_scenario(&s);
        assert_eq!(parse_scenario(&text).unwrap(), s);
        assert_eq!(serialize_scenario(&parse_scenario(&text).unwrap()), text);
    }

    #[test]
    fn misspelled_family_names_nearest() {
        let text = MINIMAL.replace("family = compatible", "family = compatble");
        let v = issues(&text);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].line, 6);
        assert!(v[0].message.contains("`compatible`"), "{}", v[0].message);
    }

    #[test]
    fn all_errors_are_reported() {
        let text = MINIMAL
            .replace("resolution = 32", "resolution = 8\nlenght = 2")
            .replace("t_end = 0.1", "t_end = soon\ncfl = 2")
            .replace("[initial]", "[initial]\nbogus = 1");
        let v = issues(&text);
        let lines: Vec<usize> = v.iter().map(|i| i.line).collect();
        assert!(v.len() >= 5, "{v:?}");
        assert!(v.iter().any(|i| i.message.contains("`length`")));
        assert!(v.iter().any(|i| i.message.contains("at least 16")));
        assert!(v.iter().any(|i| i.message.contains("cfl")));
        assert!(v.iter().any(|i| i.message.contains("`t_end` must be a number")));
        assert!(lines.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nested_tables_and_bad_pairings_are_rejected() {
        let v = issues(&MINIMAL.replace("[flux]", "[flux.inner]"));
        assert!(v.iter().any(|i| i.message.contains("nested")));
        let v = issues(&MINIMAL.replace("family = compatible", "family = weighted"));
        assert!(v.iter().any(|i| i.message.contains("cannot be used")));
    }

    #[test]
    fn oracle_and_lorentzian_sections() {
        let text = "name = o\n[manifold]\nchart = weighted_circle\nk_mean = 2\nk_sin = 1\nresolution = 64\n[flux]\nfamily = weighted\nh = burgers\n[initial]\nprofile = sine\nmean = 1\namplitude = 0.5\nphase = 1.5707963267948966\n[solver]\nmethod = oracle\nt_end = 0.05\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.solver.method, Method::Oracle);
        assert_eq!(parse_scenario(&serialize_scenario(&s)).unwrap(), s);
        let text = "name = l\n[manifold]\nchart = schwarzschild_radial\nmass = 1\nr_in = 1.5\nresolution = 64\n[flux]\nfamily = schwarzschild_compatible\n[initial]\nprofile = constant\nvalue = 1\n[solver]\nmethod = lorentzian\nt_end = 1\n";
        let v = issues(text);
        assert!(v.iter().any(|i| i.message.contains("horizon")), "{v:?}");
    }

    #[test]
    fn coefficient_polynomials_parse() {
        let text = MINIMAL.replace("family = compatible", "family = compatible\nh = 0, 1, 0, 0.1");
        let s = parse_scenario(&text).unwrap();
        let FluxSpec::Compatible { h, .. } = s.flux else {
            panic!()
        };
        assert_eq!(h.coeffs(), &[0.0, 1.0, 0.0, 0.1]);
    }

    #[test]
    fn key_not_applicable_to_method_is_flagged() {
        let v = issues(&MINIMAL.replace("method = fv", "method = fv\nepsilon = 0.1"));
        assert!(v.iter().any(|i| i.message.contains("does not apply")));
    }

    #[test]
    fn weak_form_checks_need_every_step() {
        let text = format!("{MINIMAL}[properties]\nchecks = weak_entropy\n");
        let v = issues(&text);
        assert!(v.iter().any(|i| i.message.contains("record_every_step")));
        let ok = text.replace("t_end = 0.1", "t_end = 0.1\nrecord_every_step = true");
        assert!(parse_scenario(&ok).is_ok());
    }
}
