//! Experiment configuration: one TOML file per experiment, dotted keys
//! allowed (`damping.gamma = 2.0`). Everything is checked and turned into a
//! [`Plan`] before any computation starts.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::damping::{DampingProfile, StripBands};
use crate::error::{Error, Result};
use crate::geometry::GccOptions;
use crate::linalg::SigmaMinOptions;
use crate::resolvent::{log_space, SweepOptions, MIN_FIT_SAMPLES};
use crate::spectral::{make_grid, AxisKind, Grid};

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "resolvent-q0")]
    ResolventQ0,
    #[serde(rename = "resolvent-1d")]
    Resolvent1d,
    #[serde(rename = "gcc")]
    Gcc,
    #[serde(rename = "simulate")]
    Simulate,
    #[serde(rename = "quasimode")]
    Quasimode,
    #[serde(rename = "sharpness")]
    Sharpness,
    #[serde(rename = "regions")]
    Regions,
    #[serde(rename = "reduce-check")]
    ReduceCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::ResolventQ0,
        Self::Resolvent1d,
        Self::Gcc,
        Self::Simulate,
        Self::Quasimode,
        Self::Sharpness,
        Self::Regions,
        Self::ReduceCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ResolventQ0 => "resolvent-q0",
            Self::Resolvent1d => "resolvent-1d",
            Self::Gcc => "gcc",
            Self::Simulate => "simulate",
            Self::Quasimode => "quasimode",
            Self::Sharpness => "sharpness",
            Self::Regions => "regions",
            Self::ReduceCheck => "reduce-check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::ResolventQ0 => "sigma_min(Q0 - mu) on R^d against mu; slope gamma/(2 gamma + 1)",
            Self::Resolvent1d => "worst-over-omega sigma_min(P_{lambda,omega}) on the circle; slope 1/(gamma + 1)",
            Self::Gcc => "ray scan for geometric control, then sigma_min(P_lambda) on the torus",
            Self::Simulate => "damped wave evolution with energy, dissipation identity and decay fit",
            Self::Quasimode => "||P_k u_k|| / k^{1/(gamma + 1)} for concentrating quasimodes",
            Self::Sharpness => "modulated dilated bump witness for Q0 - mu",
            Self::Regions => "phase-space region classification on the characteristic set",
            Self::ReduceCheck => "torus-mode reduction identity on random fields",
        }
    }

    /// Dotted keys read by this kind besides `kind`, `output` and `seed`.
    fn accepted_keys(self) -> &'static [&'static str] {
        match self {
            Self::ResolventQ0 => &[
                "geometry.dims", "damping.gamma", "sweep.values", "sweep.lo", "sweep.hi", "sweep.count",
                "sweep.spacing", "sweep.integer", "sweep.fit_window", "sweep.check_resolution",
                "sweep.stability", "solver.tolerance", "check.tolerance",
            ],
            Self::Resolvent1d => &[
                "damping.kind", "damping.gamma", "damping.center", "damping.floor", "damping.radius",
                "damping.value", "sweep.values", "sweep.lo", "sweep.hi", "sweep.count", "sweep.spacing",
                "sweep.integer", "sweep.fit_window", "sweep.check_resolution", "sweep.stability",
                "solver.tolerance", "check.tolerance", "probe.c0", "probe.omega_points", "probe.diagonal",
            ],
            Self::Gcc => &[
                "geometry.dims", "damping.kind", "damping.gamma", "damping.radius", "damping.floor",
                "damping.center", "damping.axes", "damping.band_center", "damping.half_width",
                "damping.level", "damping.value", "sweep.values", "sweep.lo", "sweep.hi", "sweep.count",
                "sweep.spacing", "sweep.integer", "sweep.fit_window", "sweep.check_resolution",
                "sweep.stability", "solver.tolerance", "check.tolerance", "gcc.directions", "gcc.bases",
                "gcc.threshold", "gcc.horizon",
            ],
            Self::Simulate => &[
                "geometry.dims", "geometry.modes", "geometry.boxes", "damping.kind", "damping.gamma",
                "damping.radius", "damping.floor", "damping.center", "damping.axes", "damping.band_center",
                "damping.half_width", "damping.level", "damping.value", "time.dt", "time.horizon",
                "time.stride", "time.width", "time.center", "time.window", "check.tolerance",
            ],
            Self::Quasimode => &[
                "geometry.dims", "damping.gamma", "damping.radius", "damping.center", "sweep.values",
                "check.tolerance",
            ],
            Self::Sharpness => &[
                "geometry.dims", "damping.gamma", "sweep.values", "sweep.lo", "sweep.hi", "sweep.count",
                "sweep.spacing", "sweep.integer", "check.tolerance",
            ],
            Self::Regions => &["geometry.dims", "damping.gamma", "sampling.count", "sampling.lambda"],
            Self::ReduceCheck => &[
                "geometry.dims", "geometry.modes", "geometry.boxes", "damping.kind", "damping.gamma",
                "damping.radius", "damping.floor", "damping.center", "damping.axes", "damping.band_center",
                "damping.half_width", "damping.level", "damping.value", "sampling.count",
                "sampling.lambda", "check.tolerance",
            ],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingChoice {
    PeriodicPower,
    RadialPower,
    Strip,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Interior and torus dimensions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<DampingChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Radius of the ball carrying the local power bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
    /// Round generated values to integers (duplicates dropped).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integer: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_resolution: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Tolerance of the primary check, replacing the kind's default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_points: Option<usize>,
    /// Also sweep the diagonal `omega = lambda^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GccConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bases: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Steps between rows of the decay table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Width of the initial bump.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Interval for the dissipation identity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcc: Option<GccConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
}

/// A rejected value, with the dotted key used to find its line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalid {
    pub key: String,
    pub message: String,
}

fn invalid(key: &str, message: impl Into<String>) -> Invalid {
    Invalid { key: key.to_string(), message: message.into() }
}

type Checked<T> = std::result::Result<T, Invalid>;

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, output: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            output: output.into(),
            seed: None,
            geometry: None,
            damping: None,
            sweep: None,
            solver: None,
            check: None,
            probe: None,
            gcc: None,
            time: None,
            sampling: None,
        }
    }

    /// Parses `text`; errors carry `origin:line:column`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            Error::Config(format!("{origin}:{line}:{col}: {}", e.message()))
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Plan)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}:1:1: cannot read config: {e}", path.display())))?;
        let origin = path.display().to_string();
        let config = Self::parse(&text, &origin)?;
        let plan = config.plan_anchored(&text, &origin)?;
        Ok((config, plan))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Validates against `source` and anchors any complaint to its line.
    pub fn plan_anchored(&self, source: &str, origin: &str) -> Result<Plan> {
        self.plan().map_err(|bad| {
            let line = locate_key(source, &bad.key).unwrap_or(1);
            Error::Config(format!("{origin}:{line}: {}: {}", bad.key, bad.message))
        })
    }

    /// Checks every parameter and resolves defaults.
    pub fn plan(&self) -> Checked<Plan> {
        self.check_keys()?;
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        if seed > i64::MAX as u64 {
            return Err(invalid("seed", "must fit in a signed 64-bit integer"));
        }
        let spec = match self.kind {
            ExperimentKind::ResolventQ0 => self.plan_q0(seed)?,
            ExperimentKind::Resolvent1d => self.plan_1d(seed)?,
            ExperimentKind::Gcc => self.plan_gcc(seed)?,
            ExperimentKind::Simulate => self.plan_simulate()?,
            ExperimentKind::Quasimode => self.plan_quasimode()?,
            ExperimentKind::Sharpness => self.plan_sharpness()?,
            ExperimentKind::Regions => self.plan_regions()?,
            ExperimentKind::ReduceCheck => self.plan_reduce()?,
        };
        Ok(Plan { kind: self.kind, output: self.output.clone(), seed, spec })
    }

    fn present_keys(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        if let toml::Value::Table(top) = value {
            for (section, v) in top {
                match v {
                    toml::Value::Table(t) => out.extend(t.keys().map(|k| format!("{section}.{k}"))),
                    _ => out.push(section),
                }
            }
        }
        out
    }

    fn check_keys(&self) -> Checked<()> {
        let accepted = self.kind.accepted_keys();
        for key in self.present_keys() {
            if matches!(key.as_str(), "kind" | "output" | "seed") {
                continue;
            }
            if !accepted.contains(&key.as_str()) {
                return Err(invalid(&key, format!("not used by experiment kind {}", self.kind)));
            }
        }
        Ok(())
    }

    fn geometry(&self) -> GeometryConfig {
        self.geometry.clone().unwrap_or_default()
    }

    fn damping_cfg(&self) -> DampingConfig {
        self.damping.clone().unwrap_or_default()
    }

    fn sweep_cfg(&self) -> SweepConfig {
        self.sweep.clone().unwrap_or_default()
    }

    fn dims(&self, default: [usize; 2]) -> Checked<(usize, usize)> {
        let [n1, n2] = self.geometry().dims.unwrap_or(default);
        if n1 == 0 || n1 + n2 > 3 {
            return Err(invalid("geometry.dims", "need 1 <= interior and interior + torus <= 3"));
        }
        Ok((n1, n2))
    }

    fn gamma(&self) -> Checked<f64> {
        let gamma = self.damping_cfg().gamma.unwrap_or(1.0);
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("damping.gamma", "must be positive"));
        }
        Ok(gamma)
    }

    fn check_tolerance(&self, default: f64) -> Checked<f64> {
        let tol = self.check.as_ref().and_then(|c| c.tolerance).unwrap_or(default);
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(invalid("check.tolerance", "must be nonnegative"));
        }
        Ok(tol)
    }

    fn sweep_options(&self, seed: u64) -> Checked<SweepOptions> {
        let s = self.sweep_cfg();
        let tolerance = self.solver.as_ref().and_then(|s| s.tolerance).unwrap_or(1e-6);
        if !(tolerance > 0.0 && tolerance <= 1e-2) {
            return Err(invalid("solver.tolerance", "must lie in (0, 1e-2]"));
        }
        let stability = s.stability.unwrap_or(0.01);
        if !(stability > 0.0 && stability < 1.0) {
            return Err(invalid("sweep.stability", "must lie in (0, 1)"));
        }
        Ok(SweepOptions {
            sigma: SigmaMinOptions { tolerance, seed, ..Default::default() },
            stability,
            check_resolution: s.check_resolution.unwrap_or(true),
        })
    }

    /// Sweep values: explicit `values`, or `count` points from `lo` to `hi`.
    fn sweep_values(&self, default: (f64, f64, usize), positive: bool) -> Checked<Vec<f64>> {
        let s = self.sweep_cfg();
        let mut values = match &s.values {
            Some(v) => {
                if [s.lo.is_some(), s.hi.is_some(), s.count.is_some(), s.spacing.is_some()].iter().any(|b| *b) {
                    return Err(invalid("sweep.values", "give either values or lo/hi/count, not both"));
                }
                v.clone()
            }
            None => {
                let lo = s.lo.unwrap_or(default.0);
                let hi = s.hi.unwrap_or(default.1);
                let count = s.count.unwrap_or(default.2);
                if count == 0 {
                    return Err(invalid("sweep.count", "must be at least 1"));
                }
                if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                    return Err(invalid("sweep.hi", "need finite lo <= hi"));
                }
                match s.spacing.unwrap_or(Spacing::Log) {
                    Spacing::Log => {
                        if lo <= 0.0 {
                            return Err(invalid("sweep.lo", "log spacing needs lo > 0"));
                        }
                        log_space(lo, hi, count)
                    }
                    Spacing::Linear => {
                        if count == 1 {
                            vec![lo]
                        } else {
                            (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
                        }
                    }
                }
            }
        };
        if s.integer.unwrap_or(false) {
            values.iter_mut().for_each(|v| *v = v.round());
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sweep.values", "need at least one finite value"));
        }
        if positive && values.iter().any(|v| *v <= 0.0) {
            return Err(invalid("sweep.values", "all values must be positive"));
        }
        Ok(values)
    }

    fn fit_window(&self, values: &[f64], default: (f64, f64)) -> Checked<(f64, f64)> {
        let window = self.sweep_cfg().fit_window.map(|[a, b]| (a, b)).unwrap_or(default);
        if !(window.0 > 0.0 && window.1 > window.0) {
            return Err(invalid("sweep.fit_window", "need 0 < lo < hi"));
        }
        let inside = values.iter().filter(|v| **v >= window.0 && **v <= window.1).count();
        if inside < MIN_FIT_SAMPLES {
            return Err(invalid(
                "sweep.fit_window",
                format!("holds {inside} sweep values, at least {MIN_FIT_SAMPLES} needed"),
            ));
        }
        Ok(window)
    }

    /// Damping profile on `n1` interior plus `n2` torus axes.
    fn damping_profile(&self, n1: usize, n2: usize, default: DampingChoice) -> Checked<DampingProfile> {
        let d = self.damping_cfg();
        let kind = d.kind.unwrap_or(default);
        let allowed: &[&str] = match kind {
            DampingChoice::PeriodicPower | DampingChoice::RadialPower => {
                &["kind", "gamma", "radius", "floor", "center"]
            }
            DampingChoice::Strip => &["kind", "floor", "axes", "band_center", "half_width", "level"],
            DampingChoice::Constant => &["kind", "value"],
        };
        let present = [
            ("gamma", d.gamma.is_some()),
            ("radius", d.radius.is_some()),
            ("floor", d.floor.is_some()),
            ("center", d.center.is_some()),
            ("axes", d.axes.is_some()),
            ("band_center", d.band_center.is_some()),
            ("half_width", d.half_width.is_some()),
            ("level", d.level.is_some()),
            ("value", d.value.is_some()),
        ];
        if let Some((name, _)) = present.iter().find(|(name, set)| *set && !allowed.contains(name)) {
            return Err(invalid(&format!("damping.{name}"), "does not apply to this damping kind"));
        }
        let floor = d.floor.unwrap_or(0.0);
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(invalid("damping.floor", "must be nonnegative"));
        }
        let profile = match kind {
            DampingChoice::PeriodicPower | DampingChoice::RadialPower => {
                let gamma = self.gamma()?;
                let center = d.center.clone().unwrap_or_else(|| vec![0.0; n1]);
                if center.len() != n1 {
                    return Err(invalid("damping.center", format!("needs {n1} coordinates")));
                }
                let radius = d.radius.unwrap_or(1.0);
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("damping.radius", "must be positive"));
                }
                let p = if kind == DampingChoice::PeriodicPower {
                    DampingProfile::periodic_power(gamma, center)
                } else {
                    DampingProfile::radial_power(gamma, center)
                };
                p.map_err(|e| invalid("damping.gamma", e.to_string()))?.with_radius(radius).with_floor(floor)
            }
            DampingChoice::Strip => {
                let axes = d.axes.clone().unwrap_or_else(|| vec![0]);
                if axes.iter().any(|a| *a >= n1 + n2) {
                    return Err(invalid("damping.axes", format!("axes must be below {}", n1 + n2)));
                }
                let bands = StripBands {
                    axes,
                    center: d.band_center.unwrap_or(PI),
                    half_width: d.half_width.unwrap_or(0.5),
                    level: d.level.unwrap_or(1.0),
                };
                DampingProfile::strip(bands, floor).map_err(|e| invalid("damping.half_width", e.to_string()))?
            }
            DampingChoice::Constant => DampingProfile::constant(d.value.unwrap_or(0.0))
                .map_err(|e| invalid("damping.value", e.to_string()))?,
        };
        Ok(profile)
    }

    fn periodic_grid(&self, n1: usize, n2: usize, default_modes: usize) -> Checked<Grid> {
        let g = self.geometry();
        let dims = n1 + n2;
        let modes = g.modes.clone().unwrap_or_else(|| vec![default_modes; dims]);
        if modes.len() != dims || modes.iter().any(|m| *m < 4 || m % 2 == 1) {
            return Err(invalid("geometry.modes", format!("need {dims} even counts of at least 4")));
        }
        let boxes = g.boxes.clone().unwrap_or_else(|| vec![2.0 * PI; dims]);
        if boxes.len() != dims || boxes.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(invalid("geometry.boxes", format!("need {dims} positive lengths")));
        }
        make_grid((n1, n2), &modes, &boxes, &vec![AxisKind::Periodic; dims])
            .map_err(|e| invalid("geometry.modes", e.to_string()))
    }

    fn plan_q0(&self, seed: u64) -> Checked<PlanSpec> {
        let (dims, torus) = self.dims([1, 0])?;
        if torus != 0 {
            return Err(invalid("geometry.dims", "the model operator lives on R^d; torus must be 0"));
        }
        let gamma = self.gamma()?;
        let mus = self.sweep_values((10.0, 1e3, 20), false)?;
        let positive: Vec<f64> = mus.iter().copied().filter(|m| *m >= 1.0).collect();
        let default = (positive.first().copied().unwrap_or(1.0), positive.last().copied().unwrap_or(1.0));
        let window = self.fit_window(&positive, default)?;
        Ok(PlanSpec::ResolventQ0 {
            gamma,
            dims,
            mus,
            window,
            sweep: self.sweep_options(seed)?,
            tolerance: self.check_tolerance(0.05)?,
        })
    }

    fn plan_1d(&self, seed: u64) -> Checked<PlanSpec> {
        let damping = self.damping_profile(1, 0, DampingChoice::PeriodicPower)?;
        let lambdas = self.sweep_values((20.0, 500.0, 12), true)?;
        let window = self.fit_window(&lambdas, (lambdas[0], lambdas[lambdas.len() - 1]))?;
        let p = self.probe.clone().unwrap_or_default();
        let c0 = p.c0.unwrap_or(2.0);
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(invalid("probe.c0", "must be positive"));
        }
        let omega_points = p.omega_points.unwrap_or(50);
        if omega_points < 2 {
            return Err(invalid("probe.omega_points", "must be at least 2"));
        }
        Ok(PlanSpec::Resolvent1d {
            damping,
            lambdas,
            window,
            c0,
            omega_points,
            diagonal: p.diagonal.unwrap_or(true),
            sweep: self.sweep_options(seed)?,
            tolerance: self.check_tolerance(0.07)?,
        })
    }

    fn plan_gcc(&self, seed: u64) -> Checked<PlanSpec> {
        let (n1, n2) = self.dims([1, 1])?;
        let damping = self.damping_profile(n1, n2, DampingChoice::PeriodicPower)?;
        let g = self.gcc.clone().unwrap_or_default();
        let mut options = GccOptions::new(n1 + n2);
        if let Some(d) = g.directions {
            options.direction_count = d;
        }
        if let Some(b) = g.bases {
            options.base_count = b;
        }
        if options.direction_count < 64 {
            return Err(invalid("gcc.directions", "must be at least 64"));
        }
        if options.base_count < 64 {
            return Err(invalid("gcc.bases", "must be at least 64"));
        }
        options.threshold = g.threshold.unwrap_or(options.threshold);
        if !(options.threshold > 0.0) {
            return Err(invalid("gcc.threshold", "must be positive"));
        }
        if let Some(h) = g.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("gcc.horizon", "must be positive"));
            }
            options.t_max = Some(h);
        }
        let mut s = self.sweep_cfg();
        if s.values.is_none() && s.integer.is_none() {
            s.integer = Some(true);
        }
        let with_integer = Self { sweep: Some(s), ..self.clone() };
        let lambdas = with_integer.sweep_values((10.0, 100.0, 10), true)?;
        let window = self.fit_window(&lambdas, (lambdas[0], lambdas[lambdas.len() - 1]))?;
        Ok(PlanSpec::Gcc {
            damping,
            dims: (n1, n2),
            options,
            lambdas,
            window,
            sweep: self.sweep_options(seed)?,
            tolerance: self.check.as_ref().and_then(|c| c.tolerance).map(|_| self.check_tolerance(0.0)).transpose()?,
        })
    }

    fn plan_simulate(&self) -> Checked<PlanSpec> {
        let (n1, n2) = self.dims([1, 1])?;
        let damping = self.damping_profile(n1, n2, DampingChoice::PeriodicPower)?;
        let grid = self.periodic_grid(n1, n2, 64)?;
        let t = self.time.clone().unwrap_or_default();
        let dt = t.dt.unwrap_or(1e-3);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("time.dt", "must be positive"));
        }
        let horizon = t.horizon.unwrap_or(1.0);
        if !(horizon >= dt && horizon.is_finite()) {
            return Err(invalid("time.horizon", "must be at least one step"));
        }
        let stride = t.stride.unwrap_or(10);
        if stride == 0 {
            return Err(invalid("time.stride", "must be at least 1"));
        }
        let width = t.width.unwrap_or(0.5);
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("time.width", "must be positive"));
        }
        let center = t.center.clone().unwrap_or_else(|| vec![0.0; n1]);
        if center.len() != n1 {
            return Err(invalid("time.center", format!("needs {n1} coordinates")));
        }
        let window = t.window.map(|[a, b]| (a, b)).unwrap_or((0.0, horizon));
        if !(window.0 >= 0.0 && window.1 > window.0 && window.1 <= horizon + 1e-12) {
            return Err(invalid("time.window", "need 0 <= start < end <= horizon"));
        }
        Ok(PlanSpec::Simulate {
            damping,
            grid,
            dt,
            horizon,
            stride,
            width,
            center,
            window,
            tolerance: self.check_tolerance(1e-8)?,
        })
    }

    fn plan_quasimode(&self) -> Checked<PlanSpec> {
        let (n1, n2) = self.dims([1, 1])?;
        if n2 == 0 {
            return Err(invalid("geometry.dims", "quasimodes need a torus factor"));
        }
        let damping = self.damping_profile(n1, n2, DampingChoice::PeriodicPower)?;
        let values = self.sweep_cfg().values.unwrap_or_else(|| vec![64.0, 128.0, 256.0, 512.0]);
        if values.len() < 2 || values.iter().any(|k| !(*k >= 1.0 && k.fract() == 0.0 && *k <= u32::MAX as f64)) {
            return Err(invalid("sweep.values", "need at least two positive integer k"));
        }
        let mut ks: Vec<u32> = values.iter().map(|k| *k as u32).collect();
        ks.sort_unstable();
        ks.dedup();
        Ok(PlanSpec::Quasimode {
            gamma: damping.gamma,
            damping,
            dims: (n1, n2),
            ks,
            tolerance: self.check_tolerance(0.2)?,
        })
    }

    fn plan_sharpness(&self) -> Checked<PlanSpec> {
        let (dims, torus) = self.dims([1, 0])?;
        if torus != 0 {
            return Err(invalid("geometry.dims", "the witness lives on R^d; torus must be 0"));
        }
        let mus = self.sweep_values((1e2, 1e4, 10), true)?;
        if mus.len() < 2 {
            return Err(invalid("sweep.values", "need at least two values"));
        }
        Ok(PlanSpec::Sharpness { gamma: self.gamma()?, dims, mus, tolerance: self.check_tolerance(1.0)? })
    }

    fn plan_regions(&self) -> Checked<PlanSpec> {
        let (n1, n2) = self.dims([1, 1])?;
        if n2 == 0 {
            return Err(invalid("geometry.dims", "regions need a torus factor"));
        }
        let s = self.sampling.clone().unwrap_or_default();
        let count = s.count.unwrap_or(20_000);
        if count == 0 {
            return Err(invalid("sampling.count", "must be at least 1"));
        }
        let lambda = s.lambda.unwrap_or(100.0);
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(invalid("sampling.lambda", "must exceed 1"));
        }
        Ok(PlanSpec::Regions { gamma: self.gamma()?, dims: (n1, n2), count, lambda })
    }

    fn plan_reduce(&self) -> Checked<PlanSpec> {
        let (n1, n2) = self.dims([1, 1])?;
        if n2 == 0 {
            return Err(invalid("geometry.dims", "the reduction needs a torus factor"));
        }
        let damping = self.damping_profile(n1, n2, DampingChoice::PeriodicPower)?;
        if !damping.is_torus_independent(n1) {
            return Err(invalid("damping.kind", "the reduction needs damping independent of the torus"));
        }
        let grid = self.periodic_grid(n1, n2, 32)?;
        let s = self.sampling.clone().unwrap_or_default();
        let count = s.count.unwrap_or(50);
        if count == 0 {
            return Err(invalid("sampling.count", "must be at least 1"));
        }
        let lambda = s.lambda.unwrap_or(5.0);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("sampling.lambda", "must be positive"));
        }
        Ok(PlanSpec::ReduceCheck { damping, grid, count, lambda, tolerance: self.check_tolerance(1e-12)? })
    }
}

/// Fully checked experiment.
#[derive(Debug, Clone)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub output: PathBuf,
    pub seed: u64,
    pub spec: PlanSpec,
}

#[derive(Debug, Clone)]
pub enum PlanSpec {
    ResolventQ0 {
        gamma: f64,
        dims: usize,
        mus: Vec<f64>,
        window: (f64, f64),
        sweep: SweepOptions,
        tolerance: f64,
    },
    Resolvent1d {
        damping: DampingProfile,
        lambdas: Vec<f64>,
        window: (f64, f64),
        c0: f64,
        omega_points: usize,
        diagonal: bool,
        sweep: SweepOptions,
        tolerance: f64,
    },
    Gcc {
        damping: DampingProfile,
        dims: (usize, usize),
        options: GccOptions,
        lambdas: Vec<f64>,
        window: (f64, f64),
        sweep: SweepOptions,
        /// Overrides both regime tolerances when set.
        tolerance: Option<f64>,
    },
    Simulate {
        damping: DampingProfile,
        grid: Grid,
        dt: f64,
        horizon: f64,
        stride: usize,
        width: f64,
        center: Vec<f64>,
        window: (f64, f64),
        tolerance: f64,
    },
    Quasimode {
        damping: DampingProfile,
        gamma: f64,
        dims: (usize, usize),
        ks: Vec<u32>,
        tolerance: f64,
    },
    Sharpness {
        gamma: f64,
        dims: usize,
        mus: Vec<f64>,
        tolerance: f64,
    },
    Regions {
        gamma: f64,
        dims: (usize, usize),
        count: usize,
        lambda: f64,
    },
    ReduceCheck {
        damping: DampingProfile,
        grid: Grid,
        count: usize,
        lambda: f64,
        tolerance: f64,
    },
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// First line defining `key`, either dotted at the top level or as a leaf
/// under its `[section]` header. Falls back to the section header.
pub fn locate_key(source: &str, key: &str) -> Option<usize> {
    let strip = |s: &str| s.split('.').map(|p| p.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
    let mut section = String::new();
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = strip(name);
            if key.starts_with(&format!("{section}.")) && header_line.is_none() {
                header_line = Some(i + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let leaf = strip(lhs);
        let full = if section.is_empty() { leaf } else { format!("{section}.{leaf}") };
        if full == key || key.starts_with(&format!("{full}.")) {
            return Some(i + 1);
        }
    }
    header_line
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, "test.toml")
    }

    #[test]
    fn dotted_and_sectioned_keys_agree() {
        let a = parse("kind = \"resolvent-q0\"\noutput = \"out\"\ndamping.gamma = 2.0\n").unwrap();
        let b = parse("kind = \"resolvent-q0\"\noutput = \"out\"\n[damping]\ngamma = 2.0\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.damping.unwrap().gamma, Some(2.0));
    }

    #[test]
    fn every_kind_plans_with_defaults() {
        for kind in ExperimentKind::ALL {
            let config = ExperimentConfig::new(kind, "out");
            assert!(config.plan().is_ok(), "{kind}: {:?}", config.plan().err());
        }
    }

    #[test]
    fn round_trip_through_text() {
        let text = "kind = \"gcc\"\noutput = \"runs/gcc\"\nseed = 7\n\n[geometry]\ndims = [1, 1]\n\n\
                    [damping]\nkind = \"strip\"\naxes = [0]\nfloor = 0.1\n\n[sweep]\nlo = 10.0\nhi = 100.0\n\
                    count = 8\ninteger = true\n";
        let config = parse(text).unwrap();
        let again = parse(&config.to_toml().unwrap()).unwrap();
        assert_eq!(config, again);
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let err = parse("kind = \"gcc\"\noutput = \"x\"\ndamping.gamma = = 1\n").unwrap_err();
        assert!(err.to_string().contains("test.toml:3:"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_at_their_line() {
        let err = parse("kind = \"gcc\"\noutput = \"x\"\n[damping]\ngama = 1\n").unwrap_err();
        assert!(err.to_string().contains("test.toml:4:"), "{err}");
    }

    #[test]
    fn bad_values_are_anchored() {
        let text = "kind = \"resolvent-q0\"\noutput = \"x\"\n[damping]\ngamma = -1.0\n";
        let config = parse(text).unwrap();
        let err = config.plan_anchored(text, "q0.toml").unwrap_err();
        assert_eq!(err.to_string(), "config error: q0.toml:4: damping.gamma: must be positive");
    }

    #[test]
    fn keys_foreign_to_the_kind_are_rejected() {
        let text = "kind = \"sharpness\"\noutput = \"x\"\ntime.dt = 0.1\n";
        let err = parse(text).unwrap().plan_anchored(text, "s.toml").unwrap_err();
        assert!(err.to_string().contains("s.toml:3: time.dt"), "{err}");
    }

    #[test]
    fn fit_window_needs_enough_points() {
        let mut c = ExperimentConfig::new(ExperimentKind::ResolventQ0, "x");
        c.sweep = Some(SweepConfig { fit_window: Some([500.0, 1000.0]), ..Default::default() });
        assert_eq!(c.plan().unwrap_err().key, "sweep.fit_window");
    }

    #[test]
    fn damping_fields_must_match_the_kind() {
        let mut c = ExperimentConfig::new(ExperimentKind::Gcc, "x");
        c.damping = Some(DampingConfig { axes: Some(vec![0]), ..Default::default() });
        assert_eq!(c.plan().unwrap_err().key, "damping.axes");
        c.damping = Some(DampingConfig { kind: Some(DampingChoice::Strip), axes: Some(vec![2]), ..Default::default() });
        assert_eq!(c.plan().unwrap_err().key, "damping.axes");
    }

    #[test]
    fn integer_sweeps_drop_duplicates() {
        let mut c = ExperimentConfig::new(ExperimentKind::Gcc, "x");
        c.sweep = Some(SweepConfig { lo: Some(1.0), hi: Some(6.0), count: Some(40), ..Default::default() });
        let PlanSpec::Gcc { lambdas, .. } = c.plan().unwrap().spec else { panic!() };
        assert_eq!(lambdas, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn locate_handles_sections_and_dots() {
        let src = "kind = \"x\"\n[sweep]\n# note\ncount = 3\n\n[damping]\ngamma = 1\n";
        assert_eq!(locate_key(src, "sweep.count"), Some(4));
        assert_eq!(locate_key(src, "damping.gamma"), Some(7));
        assert_eq!(locate_key(src, "damping.floor"), Some(6));
        assert_eq!(locate_key("time.dt = 1\n", "time.dt"), Some(1));
        assert_eq!(locate_key("", "seed"), None);
    }
}
