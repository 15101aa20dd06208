//! Stability statements as quantified checks over trajectories.
//!
//! Every check returns a [`PropertyReport`] whose `margin` is the worst signed
//! slack found; the check passes when `margin ≥ −tolerance`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flux::{sgn, Entropy, EntropyPair, FluxFamily};
use crate::fv::range;
use crate::geometry::{christoffel, MetricChart, Point};
use crate::mesh::{lp_norm_of, total_variation_of, ManifoldMesh};
use crate::trajectory::SolutionTrajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub applicable: bool,
    pub margin: f64,
    pub tolerance: f64,
    /// Where the worst margin was found.
    pub location: String,
    pub pass: bool,
    /// Auxiliary measured quantity (fitted constant, worst residual, ...).
    pub value: Option<f64>,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, margin: f64, tolerance: f64, location: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            applicable: true,
            margin,
            tolerance,
            location: location.into(),
            pass: margin >= -tolerance,
            value: None,
        }
    }

    pub fn not_applicable(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            margin: 0.0,
            tolerance: 0.0,
            location: reason.into(),
            pass: true,
            value: None,
        }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match (self.applicable, self.pass) {
            (false, _) => "n/a ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        write!(
            f,
            "{verdict} {:<28} margin {:>12.4e} tol {:>10.3e}",
            self.name, self.margin, self.tolerance
        )?;
        if let Some(v) = self.value {
            write!(f, " value {v:.6e}")?;
        }
        write!(f, "  [{}]", self.location)
    }
}

/// A scenario passes iff every applicable report passes.
pub fn verdict(reports: &[PropertyReport]) -> bool {
    reports.iter().all(|r| !r.applicable || r.pass)
}

fn default_relative_tolerance(traj: &SolutionTrajectory) -> f64 {
    if traj.metadata.scheme == "fv" {
        1e-10
    } else {
        1e-8
    }
}

/// `min u0 ≤ u ≤ max u0` at every snapshot (compatible fluxes only).
pub fn check_maximum_principle(traj: &SolutionTrajectory) -> PropertyReport {
    let name = "maximum_principle";
    if !traj.metadata.compatible {
        return PropertyReport::not_applicable(name, "flux is not geometry-compatible");
    }
    let (lo, hi) = range(&traj.initial().values);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let mut worst = (f64::INFINITY, String::new());
    for s in &traj.snapshots {
        let (a, b) = range(&s.values);
        let m = (a - lo).min(hi - b) / scale;
        if m < worst.0 {
            worst = (m, format!("t={}", s.time));
        }
    }
    PropertyReport::new(name, worst.0, 1e-12, worst.1)
}

/// Nonincrease of `‖u(t)‖_p` across all snapshot pairs `t' ≤ t`.
pub fn check_lp_stability(traj: &SolutionTrajectory, p_list: &[f64]) -> Result<PropertyReport> {
    let name = "lp_stability";
    if !traj.metadata.compatible {
        return Ok(PropertyReport::not_applicable(
            name,
            "no uniform L^p estimate for non-compatible fluxes",
        ));
    }
    let tol = default_relative_tolerance(traj);
    let mut worst = (f64::INFINITY, String::new());
    for &p in p_list {
        let mut running_min = f64::INFINITY;
        let mut running_at = 0.0;
        for s in &traj.snapshots {
            let n = lp_norm_of(&traj.mesh, &s.values, p)?;
            if running_min.is_finite() {
                let m = (running_min - n) / running_min.max(f64::MIN_POSITIVE);
                if m < worst.0 {
                    worst = (m, format!("p={p} t'={running_at} t={}", s.time));
                }
            }
            if n < running_min {
                running_min = n;
                running_at = s.time;
            }
        }
    }
    if !worst.0.is_finite() {
        worst = (0.0, "single snapshot".into());
    }
    Ok(PropertyReport::new(name, worst.0, tol, worst.1))
}

/// `‖v(t) − u(t)‖₁` at every snapshot of two matched runs.
pub fn l1_distances(a: &SolutionTrajectory, b: &SolutionTrajectory) -> Result<Vec<(f64, f64)>> {
    a.ensure_matched(b)?;
    Ok(a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| (x.time, a.mesh.l1_distance(&x.values, &y.values)))
        .collect())
}

/// `‖v − u‖₁` nonincreasing across snapshots of two runs sharing mesh, flux and steps.
pub fn check_contraction(a: &SolutionTrajectory, b: &SolutionTrajectory) -> Result<PropertyReport> {
    if a.steps != b.steps {
        return Err(Error::Mismatch("runs took different time steps".into()));
    }
    if a.metadata.flux != b.metadata.flux || a.metadata.scheme != b.metadata.scheme {
        return Err(Error::Mismatch("runs used different schemes or fluxes".into()));
    }
    let d = l1_distances(a, b)?;
    let tol = if a.metadata.scheme == "fv" { 1e-12 } else { 1e-8 };
    let scale = d[0].1.max(f64::MIN_POSITIVE);
    let mut worst = (0.0, "identical".to_string());
    let mut prev_min = d[0].1;
    for &(t, x) in &d[1..] {
        let m = (prev_min - x) / scale;
        if m < worst.0 || worst.1 == "identical" {
            worst = (m, format!("t={t}"));
        }
        prev_min = prev_min.min(x);
    }
    if d.len() == 1 {
        worst = (0.0, "single snapshot".into());
    }
    Ok(PropertyReport::new("l1_contraction", worst.0, tol, worst.1).with_value(d.last().unwrap().1))
}

/// Smallest `C₁ ≥ 0` with `TV(u(t)) ≤ e^{C₁ t}(1 + TV(u0))` at every snapshot.
pub fn fit_tv_constant(traj: &SolutionTrajectory) -> f64 {
    let tv0 = total_variation_of(&traj.mesh, &traj.initial().values);
    let mut c1: f64 = 0.0;
    for s in traj.snapshots.iter().filter(|s| s.time > 0.0) {
        let tv = total_variation_of(&traj.mesh, &s.values);
        c1 = c1.max((tv / (1.0 + tv0)).ln() / s.time);
    }
    c1
}

/// Fits `C₁` and, when `limit` is given, asserts `C₁ ≤ limit`.
pub fn check_tv_envelope(traj: &SolutionTrajectory, limit: Option<f64>) -> PropertyReport {
    let c1 = fit_tv_constant(traj);
    match limit {
        Some(l) => PropertyReport::new("tv_envelope", l - c1, 0.0, format!("C1={c1:.3e}")).with_value(c1),
        None => {
            let mut r = PropertyReport::new("tv_envelope", 0.0, 0.0, format!("C1={c1:.3e} (reported)")).with_value(c1);
            r.pass = c1.is_finite();
            r
        }
    }
}

/// `‖u(t) − u(t')‖₁ ≤ 1.1 (L·TV(u0) + ε D₀) |t − t'|` over all snapshot pairs,
/// where `L` bounds `|∂_u f|_g` and `D₀ = ‖Δ_g u0‖₁`.
pub fn check_time_lipschitz(traj: &SolutionTrajectory, lipschitz: f64, laplacian_norm: f64) -> PropertyReport {
    let name = "time_lipschitz";
    if !traj.metadata.compatible {
        return PropertyReport::not_applicable(name, "flux is not geometry-compatible");
    }
    let tv0 = total_variation_of(&traj.mesh, &traj.initial().values);
    let rate = 1.1 * (lipschitz * tv0 + traj.metadata.epsilon * laplacian_norm);
    let snaps = &traj.snapshots;
    let mut worst = (f64::INFINITY, "single snapshot".to_string());
    for i in 0..snaps.len() {
        for j in i + 1..snaps.len() {
            let dt = snaps[j].time - snaps[i].time;
            let d = traj.mesh.l1_distance(&snaps[i].values, &snaps[j].values);
            let bound = rate * dt;
            let m = (bound - d) / bound.max(f64::MIN_POSITIVE);
            if d > 0.0 && m < worst.0 {
                worst = (m, format!("t'={} t={}", snaps[i].time, snaps[j].time));
            }
        }
    }
    if !worst.0.is_finite() {
        worst.0 = 0.0;
    }
    PropertyReport::new(name, worst.0, 0.0, worst.1).with_value(rate)
}

/// Time factor of a test function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `((1 + cos(π(t − c)/r))/2)²` for `|t − c| < r`.
    Window {
        center: f64,
        radius: f64,
    },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Window { center, radius } => bump(((t - center) / radius).clamp(-1.0, 1.0)).0,
        }
    }
}

/// `β(s) = ((1 + cos πs)/2)²` on `|s| ≤ 1` with its first two derivatives.
fn bump(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = 0.5 * (1.0 + (PI * s).cos());
    let dw = -0.5 * PI * (PI * s).sin();
    let ddw = -0.5 * PI * PI * (PI * s).cos();
    (w * w, 2.0 * w * dw, 2.0 * (dw * dw + w * ddw))
}

/// Tensor product of compact cosine bumps along each chart axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceBump {
    pub center: Point,
    pub radius: [f64; 2],
}

impl SpaceBump {
    /// Value, coordinate gradient and coordinate Hessian.
    pub fn jet(&self, chart: &MetricChart, x: &Point) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let axes = chart.axes();
        let dim = chart.dim();
        let mut parts = [(1.0, 0.0, 0.0); 2];
        for a in 0..dim {
            let mut d = x[a] - self.center[a];
            if axes[a].periodic {
                let l = axes[a].length();
                d -= l * (d / l).round();
            }
            let (v, dv, ddv) = bump(d / self.radius[a]);
            parts[a] = (v, dv / self.radius[a], ddv / (self.radius[a] * self.radius[a]));
        }
        let value = parts[0].0 * parts[1].0;
        let grad = [parts[0].1 * parts[1].0, parts[0].0 * parts[1].1];
        let hess = [
            [parts[0].2 * parts[1].0, parts[0].1 * parts[1].1],
            [parts[0].1 * parts[1].1, parts[0].0 * parts[1].2],
        ];
        (value, grad, hess)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub time: TimeProfile,
    pub space: SpaceBump,
}

/// Finite deterministic family of nonnegative test functions.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaBasket {
    pub items: Vec<TestFunction>,
}

/// Bump radii as fractions of the axis length.
pub const BASKET_SCALES: [f64; 3] = [0.4, 0.2, 0.1];

/// Bump centres drawn per scale.
pub const BASKET_CENTERS: usize = 4;

impl ThetaBasket {
    /// Three spatial scales with seeded centres, each paired with a constant
    /// time profile and two windows covering the first and second halves.
    pub fn standard(chart: &MetricChart, t_end: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes = chart.axes();
        let mut spaces = Vec::new();
        for &scale in &BASKET_SCALES {
            for _ in 0..BASKET_CENTERS {
                let mut center = [0.0; 2];
                let mut radius = [1.0; 2];
                for a in 0..chart.dim() {
                    let l = axes[a].length();
                    radius[a] = scale * l;
                    center[a] = if axes[a].periodic {
                        axes[a].lo + rng.random::<f64>() * l
                    } else {
                        // keep the support inside the closed axis
                        let r = radius[a].min(0.5 * l);
                        radius[a] = r;
                        axes[a].lo + r + rng.random::<f64>() * (l - 2.0 * r)
                    };
                }
                spaces.push(SpaceBump { center, radius });
            }
        }
        let times = [
            TimeProfile::Constant,
            TimeProfile::Window {
                center: t_end / 3.0,
                radius: t_end / 3.0,
            },
            TimeProfile::Window {
                center: 2.0 * t_end / 3.0,
                radius: t_end / 3.0,
            },
        ];
        let items = spaces
            .into_iter()
            .flat_map(|space| {
                times.iter().map(move |&time| TestFunction {
                    time,
                    space: space.clone(),
                })
            })
            .collect();
        Self { items }
    }
}

/// Per-cell spatial data of one bump.
struct SpatialTerms {
    value: Vec<f64>,
    /// `V^j ∂_j b`
    transport: Vec<f64>,
    laplacian: Vec<f64>,
}

fn spatial_terms(mesh: &ManifoldMesh, flux: &FluxFamily, bump: &SpaceBump) -> Result<SpatialTerms> {
    let chart = mesh.chart();
    let dim = mesh.dim();
    let n = mesh.len();
    let mut value = Vec::with_capacity(n);
    let mut transport = Vec::with_capacity(n);
    let mut laplacian = Vec::with_capacity(n);
    for cell in mesh.cells() {
        let x = &cell.center;
        let (b, grad, hess) = bump.jet(chart, x);
        let v = flux.field().at(x);
        let t: f64 = (0..dim).map(|j| v[j] * grad[j]).sum();
        let gi = chart.inverse_metric(x);
        let gamma = christoffel(chart, x)?;
        let mut lap = 0.0;
        for a in 0..dim {
            for c in 0..dim {
                let mut h = hess[a][c];
                for k in 0..dim {
                    h -= gamma[k][a][c] * grad[k];
                }
                lap += gi[a][c] * h;
            }
        }
        value.push(b);
        transport.push(t);
        laplacian.push(lap);
    }
    Ok(SpatialTerms {
        value,
        transport,
        laplacian,
    })
}

/// Per-cell densities entering a weak residual at one snapshot.
pub struct WeakDensities {
    /// Density paired with `∂_t θ` and `ε Δ_g θ`.
    pub u: Vec<f64>,
    /// Flux factor `G`, paired with `V·grad θ`.
    pub g: Vec<f64>,
    /// Source paired with `θ`.
    pub source: Vec<f64>,
}

/// Discrete weak-form residuals, one per basket element:
///
/// ```text
/// R(θ) = ∫∫ U ∂_tθ + G V·grad θ + S θ + ε U Δ_g θ  dV dt
///        + ∫ U(u(0)) θ(0) dV − ∫ U(u(T)) θ(T) dV
/// ```
///
/// with `u` piecewise constant in time between snapshots. `density(n, div V)`
/// returns the cell densities at snapshot `n`.
pub fn weak_residuals(
    traj: &SolutionTrajectory,
    flux: &FluxFamily,
    basket: &ThetaBasket,
    epsilon: f64,
    density: impl Fn(usize, &[f64]) -> WeakDensities,
) -> Result<Vec<f64>> {
    let mesh = &traj.mesh;
    let div_v: Vec<f64> = mesh
        .cells()
        .iter()
        .map(|c| flux.field_divergence(&c.center))
        .collect::<Result<_>>()?;
    let vol: Vec<f64> = mesh.cells().iter().map(|c| c.volume).collect();

    // Cache spatial terms per distinct bump.
    let mut bumps: Vec<&SpaceBump> = Vec::new();
    let mut bump_of = Vec::with_capacity(basket.items.len());
    for item in &basket.items {
        let idx = match bumps.iter().position(|b| **b == item.space) {
            Some(i) => i,
            None => {
                bumps.push(&item.space);
                bumps.len() - 1
            }
        };
        bump_of.push(idx);
    }
    let terms: Vec<SpatialTerms> = bumps
        .iter()
        .map(|b| spatial_terms(mesh, flux, b))
        .collect::<Result<_>>()?;

    // Per snapshot and bump: Σ vol U b, Σ vol (G V·∇b + S b), Σ vol U Δb.
    let snaps = &traj.snapshots;
    let mut sums = vec![vec![[0.0f64; 3]; bumps.len()]; snaps.len()];
    for (n, row) in sums.iter_mut().enumerate() {
        let d = density(n, &div_v);
        for (k, t) in terms.iter().enumerate() {
            let mut acc = [0.0; 3];
            for i in 0..vol.len() {
                acc[0] += vol[i] * d.u[i] * t.value[i];
                acc[1] += vol[i] * (d.g[i] * t.transport[i] + d.source[i] * t.value[i]);
                acc[2] += vol[i] * d.u[i] * t.laplacian[i];
            }
            row[k] = acc;
        }
    }

    let last = snaps.len() - 1;
    Ok(basket
        .items
        .iter()
        .zip(&bump_of)
        .map(|(item, &k)| {
            let mut r =
                item.time.value(snaps[0].time) * sums[0][k][0] - item.time.value(snaps[last].time) * sums[last][k][0];
            for n in 0..last {
                let (t0, t1) = (snaps[n].time, snaps[n + 1].time);
                let s = sums[n][k];
                r += (item.time.value(t1) - item.time.value(t0)) * s[0];
                r += (t1 - t0) * item.time.value(0.5 * (t0 + t1)) * (s[1] + epsilon * s[2]);
            }
            r
        })
        .collect())
}

/// Weak entropy residuals of one trajectory for a single pair. The source is
/// `(div F)(u) − U'(u)(div f)(u)`, which vanishes for compatible fluxes.
pub fn entropy_residuals(traj: &SolutionTrajectory, pair: &EntropyPair, basket: &ThetaBasket) -> Result<Vec<f64>> {
    let h = pair.flux.nonlinearity();
    weak_residuals(traj, &pair.flux, basket, traj.metadata.epsilon, |n, div_v| {
        let v = &traj.snapshots[n].values;
        let g: Vec<f64> = v.iter().map(|&u| pair.flux_factor(u)).collect();
        let source = v
            .iter()
            .zip(&g)
            .zip(div_v)
            .map(|((&u, &gu), &d)| {
                if d == 0.0 {
                    0.0
                } else {
                    d * (gu - pair.entropy.derivative(u) * h.value(u))
                }
            })
            .collect();
        WeakDensities {
            u: v.iter().map(|&u| pair.value(u)).collect(),
            g,
            source,
        }
    })
}

/// Weak entropy residual of a viscous (or any) run for one pair and one test function.
pub fn entropy_inequality_residual_viscous(
    traj: &SolutionTrajectory,
    pair: &EntropyPair,
    theta: &TestFunction,
) -> Result<f64> {
    Ok(entropy_residuals(
        traj,
        pair,
        &ThetaBasket {
            items: vec![theta.clone()],
        },
    )?[0])
}

/// Kruzkov pairs at 7 levels spread across the data range, plus `U = u²`.
pub fn kruzkov_basket(flux: &FluxFamily, lo: f64, hi: f64) -> Vec<EntropyPair> {
    let mut pairs: Vec<EntropyPair> = (1..=7)
        .map(|j| crate::flux::kruzkov_pair(flux, lo + (hi - lo) * j as f64 / 8.0))
        .collect();
    pairs.push(
        EntropyPair::new(Entropy::Square, flux.clone(), crate::flux::DEFAULT_QUADRATURE_ORDER).expect("valid order"),
    );
    pairs
}

/// `Δx + Δt` for a run: the largest coordinate spacing plus the largest step.
pub fn resolution_scale(traj: &SolutionTrajectory) -> f64 {
    let dx = traj.mesh.spacing()[..traj.mesh.dim()]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let dt = traj.steps.iter().cloned().fold(0.0, f64::max);
    dx + dt
}

/// Smallest residual over a pair list and basket, with its location.
pub fn worst_entropy_residual(
    traj: &SolutionTrajectory,
    pairs: &[EntropyPair],
    basket: &ThetaBasket,
) -> Result<(f64, String)> {
    let mut worst = (f64::INFINITY, String::new());
    for (p, pair) in pairs.iter().enumerate() {
        for (j, r) in entropy_residuals(traj, pair, basket)?.into_iter().enumerate() {
            if r < worst.0 {
                worst = (r, format!("pair {p} ({:?}) theta {j}", pair.entropy));
            }
        }
    }
    Ok(worst)
}

/// Weak entropy inequality against the Kruzkov basket: every residual must
/// exceed `−c·(Δx + Δt)`.
pub fn check_weak_entropy_solution(
    traj: &SolutionTrajectory,
    pairs: &[EntropyPair],
    basket: &ThetaBasket,
    c: f64,
) -> Result<PropertyReport> {
    let (worst, at) = worst_entropy_residual(traj, pairs, basket)?;
    let tol = c * resolution_scale(traj);
    Ok(PropertyReport::new("weak_entropy", worst, tol, at).with_value(worst))
}

/// Weak form of `∂_t|v−u| + div(sgn(u−v)(f(u)−f(v))) ≤ 0`.
pub fn kruzkov_pair_residuals(
    a: &SolutionTrajectory,
    b: &SolutionTrajectory,
    flux: &FluxFamily,
    basket: &ThetaBasket,
) -> Result<Vec<f64>> {
    a.ensure_matched(b)?;
    let h = flux.nonlinearity();
    weak_residuals(a, flux, basket, a.metadata.epsilon, |n, _| {
        let u = &a.snapshots[n].values;
        let v = &b.snapshots[n].values;
        WeakDensities {
            u: u.iter().zip(v).map(|(x, y)| (x - y).abs()).collect(),
            g: u.iter()
                .zip(v)
                .map(|(&x, &y)| sgn(x - y) * (h.value(x) - h.value(y)))
                .collect(),
            source: vec![0.0; u.len()],
        }
    })
}

pub fn check_kruzkov_inequality(
    a: &SolutionTrajectory,
    b: &SolutionTrajectory,
    flux: &FluxFamily,
    basket: &ThetaBasket,
    c: f64,
) -> Result<PropertyReport> {
    let res = kruzkov_pair_residuals(a, b, flux, basket)?;
    let (j, worst) = res
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, r)| if r < acc.1 { (j, r) } else { acc });
    let worst = if res.is_empty() { 0.0 } else { worst };
    let tol = c * resolution_scale(a);
    Ok(PropertyReport::new("kruzkov_pair", worst, tol, format!("theta {j}")).with_value(worst))
}

/// `d/dt ∫U(u) dV_g` for the semi-discrete central (non-dissipative) scheme.
pub fn semi_discrete_entropy_rate(mesh: &ManifoldMesh, flux: &FluxFamily, entropy: &Entropy, u: &[f64]) -> f64 {
    let h = flux.nonlinearity();
    mesh.faces()
        .iter()
        .map(|face| {
            let c = face.area * flux.normal_coefficient(face);
            let (ul, ur) = (u[face.left], u[face.right]);
            -0.5 * c * (h.value(ul) + h.value(ur)) * (entropy.derivative(ul) - entropy.derivative(ur))
        })
        .sum()
}

/// Largest `|d/dt ∫U dV_g|` along an RK4 run of the central scheme up to `t_end`.
pub fn smooth_entropy_drift(
    mesh: &ManifoldMesh,
    flux: &FluxFamily,
    entropy: &Entropy,
    u0: &[f64],
    t_end: f64,
    steps: usize,
) -> f64 {
    let h = flux.nonlinearity();
    let coeff: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|f| f.area * flux.normal_coefficient(f))
        .collect();
    let rhs = |u: &[f64]| {
        let mut r = vec![0.0; u.len()];
        for (face, c) in mesh.faces().iter().zip(&coeff) {
            let q = 0.5 * c * (h.value(u[face.left]) + h.value(u[face.right]));
            r[face.left] -= q;
            r[face.right] += q;
        }
        for (ri, cell) in r.iter_mut().zip(mesh.cells()) {
            *ri /= cell.volume;
        }
        r
    };
    let axpy = |u: &[f64], k: &[f64], s: f64| -> Vec<f64> { u.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let mut u = u0.to_vec();
    let mut drift = semi_discrete_entropy_rate(mesh, flux, entropy, &u).abs();
    let dt = t_end / steps.max(1) as f64;
    for _ in 0..steps {
        let k1 = rhs(&u);
        let k2 = rhs(&axpy(&u, &k1, 0.5 * dt));
        let k3 = rhs(&axpy(&u, &k2, 0.5 * dt));
        let k4 = rhs(&axpy(&u, &k3, dt));
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        drift = drift.max(semi_discrete_entropy_rate(mesh, flux, entropy, &u).abs());
    }
    drift
}

/// Entropy drift of smooth data before shocks: at most `bound` for the
/// compatible flux and at least `10·bound` for the general one.
#[allow(clippy::too_many_arguments)]
pub fn check_smooth_entropy_dichotomy(
    compatible: (&ManifoldMesh, &FluxFamily, &[f64]),
    general: (&ManifoldMesh, &FluxFamily, &[f64]),
    entropy: &Entropy,
    t_end: f64,
    steps: usize,
    bound: f64,
) -> PropertyReport {
    let dc = smooth_entropy_drift(compatible.0, compatible.1, entropy, compatible.2, t_end, steps);
    let dg = smooth_entropy_drift(general.0, general.1, entropy, general.2, t_end, steps);
    let margin = ((bound - dc) / bound).min((dg - 10.0 * bound) / (10.0 * bound));
    PropertyReport::new(
        "entropy_dichotomy",
        margin,
        0.0,
        format!("compatible {dc:.3e} general {dg:.3e}"),
    )
    .with_value(dg / dc.max(f64::MIN_POSITIVE))
}
