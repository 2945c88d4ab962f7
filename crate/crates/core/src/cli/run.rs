//! Executes a checked [`Plan`]: every experiment returns its tables and
//! summary, which the runner writes once, in a fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentKind, Plan, PlanSpec};
use super::output::{Cell, Check, Comparison, Summary, Table};
use crate::certificates::{
    classify_region, f_scan, mu_weight, quasimode_grid, quasimode_terms, reduction_identity_residual,
    region_memberships, sample_characteristic, sharpness_grid, sharpness_witness, MetricAxes, RegionThresholds,
    F_SLACK,
};
use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::geometry::{scan_rays, GccOptions};
use crate::resolvent::{
    fit_exponent, model_branches, reduced_sweep, stationary_sweep, CircleGridPolicy, ModelGridPolicy,
    OmegaProbes, StationaryGridPolicy, SweepOptions, SweepResult,
};
use crate::spectral::{Grid, SpectralField};
use crate::wave::{dissipation_residual, energy, evolve, gaussian_data, WaveIntegrator};
use crate::Complex64;

/// What an experiment hands back to the runner.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Summary,
    /// Set when a sample the verdict depends on is under-resolved; tables
    /// are still written, the summary is not.
    pub abort: Option<String>,
}

/// Runs `plan`, writes its artifacts and returns the summary. An
/// unresolved grid surfaces as [`Error::Unresolved`] after the tables are
/// on disk.
pub fn run(plan: &Plan) -> Result<Summary> {
    let outcome = execute(plan)?;
    std::fs::create_dir_all(&plan.output)?;
    for table in &outcome.tables {
        table.write(&plan.output)?;
    }
    if let Some(reason) = outcome.abort {
        return Err(Error::Unresolved(reason));
    }
    outcome.summary.write(&plan.output)?;
    Ok(outcome.summary)
}

/// Computes the artifacts without touching the disk.
pub fn execute(plan: &Plan) -> Result<Outcome> {
    match &plan.spec {
        PlanSpec::ResolventQ0 { gamma, dims, mus, window, sweep, tolerance } => {
            resolvent_q0(plan.seed, *gamma, *dims, mus, *window, sweep, *tolerance)
        }
        PlanSpec::Resolvent1d { damping, lambdas, window, c0, omega_points, diagonal, sweep, tolerance } => {
            resolvent_1d(plan.seed, damping, lambdas, *window, *c0, *omega_points, *diagonal, sweep, *tolerance)
        }
        PlanSpec::Gcc { damping, dims, options, lambdas, window, sweep, tolerance } => {
            gcc(plan.seed, damping, *dims, options, lambdas, *window, sweep, *tolerance)
        }
        PlanSpec::Simulate { damping, grid, dt, horizon, stride, width, center, window, tolerance } => {
            simulate(plan.seed, damping, grid, *dt, *horizon, *stride, *width, center, *window, *tolerance)
        }
        PlanSpec::Quasimode { damping, gamma, dims, ks, tolerance } => {
            quasimode(plan.seed, damping, *gamma, *dims, ks, *tolerance)
        }
        PlanSpec::Sharpness { gamma, dims, mus, tolerance } => sharpness(plan.seed, *gamma, *dims, mus, *tolerance),
        PlanSpec::Regions { gamma, dims, count, lambda } => regions(plan.seed, *gamma, *dims, *count, *lambda),
        PlanSpec::ReduceCheck { damping, grid, count, lambda, tolerance } => {
            reduce_check(plan.seed, damping, grid, *count, *lambda, *tolerance)
        }
    }
}

pub fn sweep_table(name: &str, sweep: &SweepResult) -> Table {
    let mut t = Table::new(name, &["parameter", "sigma_min", "iters", "resolved_flag", "refined_sigma", "argmin"]);
    for s in &sweep.samples {
        t.push(vec![
            s.parameter.into(),
            s.sigma_min.into(),
            s.iterations.into(),
            s.resolved.into(),
            s.refined_sigma.into(),
            s.argmin.into(),
        ]);
    }
    t
}

fn unresolved_in(sweep: &SweepResult, keep: impl Fn(f64) -> bool) -> Option<String> {
    let bad: Vec<String> =
        sweep.unresolved().into_iter().filter(|p| keep(*p)).map(|p| format!("{p}")).collect();
    (!bad.is_empty()).then(|| format!("{} not resolution-stable at {}", sweep.parameter_name, bad.join(", ")))
}

fn inside(window: (f64, f64)) -> impl Fn(f64) -> bool {
    move |p| p >= window.0 && p <= window.1
}

fn aborted(tables: Vec<Table>, kind: &str, gamma: Option<f64>, seed: u64, reason: String) -> Outcome {
    Outcome { tables, summary: Summary::new(kind, gamma, seed, Vec::new()), abort: Some(reason) }
}

#[allow(clippy::too_many_arguments)]
fn resolvent_q0(
    seed: u64,
    gamma: f64,
    dims: usize,
    mus: &[f64],
    window: (f64, f64),
    sweep: &SweepOptions,
    tolerance: f64,
) -> Result<Outcome> {
    let kind = ExperimentKind::ResolventQ0.name();
    let policy = ModelGridPolicy { dims, ..ModelGridPolicy::new(gamma) };
    let report = model_branches(gamma, mus, window, &policy, sweep)?;
    let tables = vec![sweep_table("sweep", &report.sweep)];
    let w = inside(window);
    if let Some(reason) = unresolved_in(&report.sweep, |p| w(p) || p <= -1.0) {
        return Ok(aborted(tables, kind, Some(gamma), seed, reason));
    }
    let fit = report.positive_fit.ok_or_else(|| Error::InvalidParameter("no fit in the window".into()))?;
    let mut checks = vec![Check::new("exponent", fit.slope, report.target_exponent, tolerance, Comparison::Within)];
    if let Some(ratio) = report.negative_ratio {
        checks.push(Check::new("negative-branch", ratio, 1.0, 1e-3, Comparison::AtLeast));
    }
    let summary = Summary::new(kind, Some(gamma), seed, checks)
        .detail("fit", fit)
        .detail("middle_min", report.middle_min);
    Ok(Outcome { tables, summary, abort: None })
}

#[allow(clippy::too_many_arguments)]
fn resolvent_1d(
    seed: u64,
    damping: &DampingProfile,
    lambdas: &[f64],
    window: (f64, f64),
    c0: f64,
    omega_points: usize,
    diagonal: bool,
    sweep: &SweepOptions,
    tolerance: f64,
) -> Result<Outcome> {
    let kind = ExperimentKind::Resolvent1d.name();
    let gamma = damping.gamma;
    let policy = CircleGridPolicy::default();
    let worst = reduced_sweep(damping, lambdas, &OmegaProbes::Standard { c0 }, &policy, sweep)?;
    let mut tables = vec![sweep_table("sweep", &worst)];
    let scan = f_scan(lambdas, c0, gamma, omega_points)?;
    let mut f_table = Table::new("f_scan", &["lambda", "omega", "f"]);
    for p in &scan.points {
        f_table.push(vec![p.lambda.into(), p.omega.into(), p.f.into()]);
    }
    tables.push(f_table);
    let diag = if diagonal {
        let d = reduced_sweep(damping, lambdas, &OmegaProbes::Fractions(vec![1.0]), &policy, sweep)?;
        tables.push(sweep_table("diagonal", &d));
        Some(d)
    } else {
        None
    };
    let w = inside(window);
    let reason = unresolved_in(&worst, &w).or_else(|| diag.as_ref().and_then(|d| unresolved_in(d, &w)));
    if let Some(reason) = reason {
        return Ok(aborted(tables, kind, Some(gamma), seed, reason));
    }
    let fit = worst.fit(Some(window))?;
    let mut checks = vec![
        Check::new("exponent", fit.slope, 1.0 / (gamma + 1.0), tolerance, Comparison::Within),
        Check::new("f-lower-bound", scan.min_f, 1.0, F_SLACK, Comparison::AtLeast),
    ];
    let mut summary_fits = vec![("worst", fit)];
    if let Some(d) = &diag {
        let dfit = d.fit(Some(window))?;
        checks.push(Check::new("diagonal-exponent", dfit.slope, 1.0, 0.1, Comparison::AtLeast));
        summary_fits.push(("diagonal", dfit));
    }
    let summary = Summary::new(kind, Some(gamma), seed, checks)
        .detail("fits", summary_fits.into_iter().collect::<std::collections::BTreeMap<_, _>>())
        .detail("c0", c0);
    Ok(Outcome { tables, summary, abort: None })
}

#[allow(clippy::too_many_arguments)]
fn gcc(
    seed: u64,
    damping: &DampingProfile,
    dims: (usize, usize),
    options: &GccOptions,
    lambdas: &[f64],
    window: (f64, f64),
    sweep: &SweepOptions,
    tolerance: Option<f64>,
) -> Result<Outcome> {
    let kind = ExperimentKind::Gcc.name();
    let rays = scan_rays(damping, options)?;
    let n = options.dims;
    let mut header: Vec<String> = (0..n).map(|a| format!("x{a}")).collect();
    header.extend((0..n).map(|a| format!("xi{a}")));
    header.extend(["hit_time".to_string(), "margin".to_string()]);
    let mut ray_table = Table { name: "rays".into(), header, rows: Vec::new() };
    for r in &rays {
        let mut row: Vec<Cell> = r.point.x.iter().chain(&r.point.xi).map(|v| Cell::Real(*v)).collect();
        row.push(r.hit_time.into());
        row.push(r.margin.into());
        ray_table.push(row);
    }
    let missed = rays.iter().filter(|r| r.hit_time.is_none()).count();
    let satisfied = missed == 0;
    let max_hit = rays.iter().filter_map(|r| r.hit_time).fold(0.0, f64::max);
    let policy = StationaryGridPolicy::new(dims.0, dims.1);
    let result = stationary_sweep(damping, lambdas, &policy, sweep)?;
    let tables = vec![ray_table, sweep_table("sweep", &result)];
    if let Some(reason) = unresolved_in(&result, inside(window)) {
        return Ok(aborted(tables, kind, Some(damping.gamma), seed, reason));
    }
    let fit = result.fit(Some(window))?;
    let (target, tol) = if satisfied {
        (1.0, tolerance.unwrap_or(0.1))
    } else {
        (1.0 / (damping.gamma + 1.0), tolerance.unwrap_or(0.07))
    };
    let summary = Summary::new(kind, Some(damping.gamma), seed, vec![Check::new(
        "exponent",
        fit.slope,
        target,
        tol,
        Comparison::Within,
    )])
    .detail("gcc_satisfied", satisfied)
    .detail("rays", rays.len())
    .detail("undamped_rays", missed)
    .detail("max_hit_time", satisfied.then_some(max_hit))
    .detail("fit", fit);
    Ok(Outcome { tables, summary, abort: None })
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    seed: u64,
    damping: &DampingProfile,
    grid: &Grid,
    dt: f64,
    horizon: f64,
    stride: usize,
    width: f64,
    center: &[f64],
    window: (f64, f64),
    tolerance: f64,
) -> Result<Outcome> {
    let kind = ExperimentKind::Simulate.name();
    let gamma = damping.is_power_type().then_some(damping.gamma);
    let mut state = gaussian_data(grid, center, width)?;
    let integrator = WaveIntegrator::new(grid, damping, dt)?;
    let steps = (horizon / dt).round() as usize;
    let start = energy(&state);
    let trajectory = match evolve(&mut state, &integrator, steps, 1) {
        Ok(t) => t,
        Err(Error::EnergyIncrease { before, after, time }) => {
            let growth = (after - before) / before / dt;
            let check = Check::new("energy-growth", growth, 0.0, crate::wave::ENERGY_GROWTH_TOLERANCE, Comparison::AtMost);
            let summary = Summary::new(kind, gamma, seed, vec![check]).detail("aborted_at", time);
            return Ok(Outcome { tables: Vec::new(), summary, abort: None });
        }
        Err(e) => return Err(e),
    };
    let mut energy_table = Table::new("energy", &["t", "E", "dissipation"]);
    let mut decay_table = Table::new("decay", &["t", "E", "sqrtE"]);
    for (i, p) in trajectory.iter().enumerate() {
        energy_table.push(vec![p.t.into(), p.energy.into(), p.dissipation.into()]);
        if i % stride == 0 || i + 1 == trajectory.len() {
            decay_table.push(vec![p.t.into(), p.energy.into(), p.energy.sqrt().into()]);
        }
    }
    let growth = trajectory
        .windows(2)
        .filter(|w| w[0].energy > 0.0)
        .map(|w| (w[1].energy - w[0].energy) / w[0].energy / (w[1].t - w[0].t))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let residual = dissipation_residual(&trajectory, window)? / (window.1 - window.0);
    let mut checks = vec![
        Check::new("dissipation-residual", residual, 0.0, tolerance, Comparison::AtMost),
        Check::new("energy-growth", growth, 0.0, crate::wave::ENERGY_GROWTH_TOLERANCE, Comparison::AtMost),
    ];
    let mut summary_fit = None;
    if let (Some(g), true) = (gamma, start > 0.0) {
        let (t, e): (Vec<f64>, Vec<f64>) = trajectory
            .iter()
            .enumerate()
            .filter(|(i, p)| (i % stride == 0 || i + 1 == trajectory.len()) && p.t > 0.0)
            .map(|(_, p)| (p.t, p.energy.sqrt()))
            .unzip();
        if let Ok(fit) = fit_exponent(&t, &e, Some((0.5 * horizon, horizon))) {
            checks.push(Check::new("decay-exponent", fit.slope, -(1.0 + 1.0 / g), 0.8, Comparison::Within).diagnostic());
            summary_fit = Some(fit);
        }
    }
    let summary = Summary::new(kind, gamma, seed, checks)
        .detail("initial_energy", start)
        .detail("final_energy", trajectory.last().map(|p| p.energy))
        .detail("dt", dt)
        .detail("fit", summary_fit);
    Ok(Outcome { tables: vec![energy_table, decay_table], summary, abort: None })
}

fn quasimode(
    seed: u64,
    damping: &DampingProfile,
    gamma: f64,
    dims: (usize, usize),
    ks: &[u32],
    tolerance: f64,
) -> Result<Outcome> {
    let kind = ExperimentKind::Quasimode.name();
    let terms = ks
        .par_iter()
        .map(|&k| quasimode_terms(k, gamma, damping, &quasimode_grid(k, gamma, dims.0, dims.1)?))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("quasimodes", &["k", "ratio", "laplacian", "damping"]);
    for t in &terms {
        table.push(vec![(t.k as usize).into(), t.ratio.into(), t.laplacian.into(), t.damping.into()]);
    }
    let spread = spread_max_over_min(terms.iter().map(|t| t.ratio));
    let mut checks = vec![Check::new("ratio-spread", spread, 1.0, tolerance, Comparison::AtMost)];
    let (k, norms): (Vec<f64>, Vec<f64>) =
        terms.iter().map(|t| (t.k as f64, t.ratio * (t.k as f64).powf(1.0 / (gamma + 1.0)))).unzip();
    if let Ok(fit) = fit_exponent(&k, &norms, Some((k[0], k[k.len() - 1]))) {
        checks.push(Check::new("exponent", fit.slope, 1.0 / (gamma + 1.0), 0.05, Comparison::Within).diagnostic());
    }
    let summary = Summary::new(kind, Some(gamma), seed, checks);
    Ok(Outcome { tables: vec![table], summary, abort: None })
}

fn spread_max_over_min(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

/// Middle value (mean of the two middle ones for even counts).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sharpness(seed: u64, gamma: f64, dims: usize, mus: &[f64], tolerance: f64) -> Result<Outcome> {
    let kind = ExperimentKind::Sharpness.name();
    let ratios = mus
        .par_iter()
        .map(|&mu| sharpness_witness(mu, gamma, &sharpness_grid(mu, gamma, dims)?))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("sharpness", &["mu", "ratio"]);
    for (mu, r) in mus.iter().zip(&ratios) {
        table.push(vec![(*mu).into(), (*r).into()]);
    }
    let med = median(&ratios);
    let spread = ratios.iter().map(|r| (r / med).max(med / r)).fold(1.0, f64::max);
    let summary = Summary::new(kind, Some(gamma), seed, vec![Check::new(
        "median-spread",
        spread,
        1.0,
        tolerance,
        Comparison::AtMost,
    )])
    .detail("median", med);
    Ok(Outcome { tables: vec![table], summary, abort: None })
}

fn regions(seed: u64, gamma: f64, dims: (usize, usize), count: usize, lambda: f64) -> Result<Outcome> {
    let kind = ExperimentKind::Regions.name();
    let thresholds = RegionThresholds::default();
    let points = sample_characteristic(count, lambda, dims, seed)?;
    let mut table = Table::new(
        "regions",
        &["x_prime", "xi_prime", "xi_second", "mu", "gcc", "elliptic", "core", "propagative", "region"],
    );
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (mut exclusive, mut classified, mut min_mu, mut worst_product) = (0usize, 0usize, f64::INFINITY, 0.0f64);
    let mut counts = std::collections::BTreeMap::new();
    for p in &points {
        let m = region_memberships(&p.x_prime, &p.xi_prime, &p.xi_second, lambda, gamma, &thresholds);
        let tag = classify_region(&p.x_prime, &p.xi_prime, &p.xi_second, lambda, gamma, &thresholds).ok();
        exclusive += usize::from(m.iter().filter(|b| **b).count() == 1);
        classified += usize::from(tag.is_some());
        let mu = mu_weight(&p.xi_prime, &p.xi_second, gamma);
        min_mu = min_mu.min(mu);
        let axes = MetricAxes::at(&p.xi_prime, &p.xi_second, gamma);
        let (a, b) = axes.conjugate_products();
        worst_product = worst_product
            .max((a / (axes.mu * axes.mu) - 1.0).abs())
            .max((b / (axes.lambda * axes.lambda) - 1.0).abs());
        let label = tag.map_or("OFF_CHARACTERISTIC", |t| t.label());
        *counts.entry(label).or_insert(0usize) += 1;
        table.push(vec![
            norm(&p.x_prime).into(),
            norm(&p.xi_prime).into(),
            norm(&p.xi_second).into(),
            mu.into(),
            m[0].into(),
            m[1].into(),
            m[2].into(),
            m[3].into(),
            Cell::Text(label.into()),
        ]);
    }
    let n = points.len() as f64;
    let checks = vec![
        Check::new("exclusive", exclusive as f64 / n, 1.0, 0.0, Comparison::AtLeast),
        Check::new("total", classified as f64 / n, 1.0, 0.0, Comparison::AtLeast),
        Check::new("mu-lower-bound", min_mu, 1.0, 0.0, Comparison::AtLeast),
        Check::new("conjugate-products", worst_product, 0.0, 1e-12, Comparison::AtMost),
    ];
    let summary = Summary::new(kind, Some(gamma), seed, checks).detail("counts", counts).detail("lambda", lambda);
    Ok(Outcome { tables: vec![table], summary, abort: None })
}

fn reduce_check(
    seed: u64,
    damping: &DampingProfile,
    grid: &Grid,
    count: usize,
    lambda: f64,
    tolerance: f64,
) -> Result<Outcome> {
    let kind = ExperimentKind::ReduceCheck.name();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = (0..count)
        .map(|_| {
            let modal = (0..grid.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            SpectralField::from_modal(grid, modal)
        })
        .collect::<Result<Vec<_>>>()?;
    let residuals = fields
        .par_iter()
        .map(|u| reduction_identity_residual(u, lambda, damping))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("reduce", &["sample", "residual"]);
    for (i, r) in residuals.iter().enumerate() {
        table.push(vec![i.into(), (*r).into()]);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let summary = Summary::new(kind, damping.is_power_type().then_some(damping.gamma), seed, vec![Check::new(
        "max-residual",
        worst,
        0.0,
        tolerance,
        Comparison::AtMost,
    )])
    .detail("lambda", lambda);
    Ok(Outcome { tables: vec![table], summary, abort: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn spread_is_max_over_min() {
        assert_eq!(spread_max_over_min([2.0, 1.0, 1.5].into_iter()), 2.0);
    }

    #[test]
    fn json_summary_keeps_details() {
        let s = Summary::new("x", None, 1, vec![]).detail("a", json!({"b": 1}));
        assert_eq!(s.details["a"]["b"], 1);
    }
}
