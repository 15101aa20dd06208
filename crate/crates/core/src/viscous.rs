//! Explicit solver for `∂_t u + div f(u) = ε Δ_g u`.
//!
//! Two discretizations:
//!
//! * `Conservative` (default): central face flux minus face diffusion,
//!   `area·q = ½ c_f (h(uL) + h(uR)) − ε D_f (uR − uL)`. Conservative for
//!   every flux, and monotone when `ε D_f ≥ ½ |c_f| max|h'|` on each face.
//! * `Advective`: pointwise `∂_t u = −∂_u f^j(u) ∂_j u + ε g^{ij}(∂_i∂_j u − Γ^k_{ij} ∂_k u)`
//!   with central differences. Only valid for compatible fluxes.
//!
//! Both use forward Euler. The cross-derivative diffusion through faces is
//! omitted in the conservative form; every built-in chart is diagonal.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::{sample_points, FluxFamily};
use crate::fv::{ensemble_range, record, PARALLEL_THRESHOLD};
use crate::geometry::christoffel;
use crate::mesh::{ManifoldMesh, ScalarField};
use crate::trajectory::{check_finite, output_times, Clock, RunMetadata, Snapshot, SolutionTrajectory};

/// Upper bound on the viscous Courant number.
pub const MAX_CFL: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViscousForm {
    Conservative,
    Advective,
}

impl ViscousForm {
    pub fn name(&self) -> &'static str {
        match self {
            ViscousForm::Conservative => "conservative",
            ViscousForm::Advective => "advective",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "conservative" => Some(ViscousForm::Conservative),
            "advective" => Some(ViscousForm::Advective),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViscousConfig {
    pub epsilon: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub form: ViscousForm,
    pub dt_max: Option<f64>,
    pub record_every_step: bool,
}

impl ViscousConfig {
    pub fn new(epsilon: f64, cfl: f64, t_end: f64) -> Self {
        Self {
            epsilon,
            cfl,
            t_end,
            snapshot_times: Vec::new(),
            form: ViscousForm::Conservative,
            dt_max: None,
            record_every_step: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return Err(Error::InvalidParameter(format!(
                "cfl must lie in (0, {MAX_CFL}], got {}",
                self.cfl
            )));
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!("dt_max must be positive, got {d}")));
            }
        }
        output_times(&self.snapshot_times, self.t_end).map(|_| ())
    }
}

/// Per-cell stencil data for the advective form.
#[derive(Clone, Debug)]
struct PointStencil {
    /// Neighbours at ±1 along each axis; the cell itself across a closed edge.
    plus: [usize; 2],
    minus: [usize; 2],
    /// `(++, +−, −+, −−)` diagonal neighbours.
    diagonal: [usize; 4],
    field: [f64; 2],
    inverse_metric: [[f64; 2]; 2],
    /// `g^{ij} Γ^k_{ij}`.
    contracted: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct ViscousSolver {
    mesh: Arc<ManifoldMesh>,
    flux: FluxFamily,
    epsilon: f64,
    form: ViscousForm,
    coeff: Vec<f64>,
    stencils: Vec<PointStencil>,
}

impl ViscousSolver {
    pub fn new(mesh: Arc<ManifoldMesh>, flux: FluxFamily, epsilon: f64, form: ViscousForm) -> Result<Self> {
        if mesh.chart().kind() != flux.chart().kind() {
            return Err(Error::Mismatch(format!(
                "flux lives on {} but mesh on {}",
                flux.chart().name(),
                mesh.chart().name()
            )));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        if form == ViscousForm::Advective && !flux.is_compatible() {
            return Err(Error::InvalidParameter(
                "the advective form needs a geometry-compatible flux".into(),
            ));
        }
        let coeff = mesh
            .faces()
            .iter()
            .map(|f| f.area * flux.normal_coefficient(f))
            .collect();
        let stencils = if form == ViscousForm::Advective {
            build_stencils(&mesh, &flux)?
        } else {
            Vec::new()
        };
        Ok(Self {
            mesh,
            flux,
            epsilon,
            form,
            coeff,
            stencils,
        })
    }

    pub fn mesh(&self) -> &Arc<ManifoldMesh> {
        &self.mesh
    }

    /// True when every face satisfies the cell Péclet condition for states in `[lo, hi]`.
    pub fn peclet_holds(&self, lo: f64, hi: f64) -> bool {
        let m1 = self.flux.nonlinearity().max_abs_derivative(lo, hi);
        self.mesh
            .faces()
            .iter()
            .zip(&self.coeff)
            .all(|(f, c)| self.epsilon * f.diffusion >= 0.5 * c.abs() * m1 * (1.0 - 1e-12))
    }

    /// Largest `dt` keeping the diagonal coefficient of the conservative
    /// update nonnegative for states in `[lo, hi]`.
    pub fn diagonal_limit(&self, lo: f64, hi: f64) -> f64 {
        let m1 = self.flux.nonlinearity().max_abs_derivative(lo, hi);
        let mut limit = f64::INFINITY;
        for (i, cell) in self.mesh.cells().iter().enumerate() {
            let s: f64 = self
                .mesh
                .cell_faces(i)
                .iter()
                .map(|&(f, _)| 0.5 * self.coeff[f].abs() * m1 + self.epsilon * self.mesh.faces()[f].diffusion)
                .sum();
            if s > 0.0 {
                limit = limit.min(cell.volume / s);
            }
        }
        limit
    }

    /// `cfl · min(Δx/λ, Δx²/(2 d ε Λ))`, further capped by the exact
    /// diagonal limit and `dt_max`.
    pub fn stable_dt(&self, lo: f64, hi: f64, cfl: f64, dt_max: Option<f64>) -> f64 {
        let dx = self.mesh.min_spacing();
        let centers: Vec<_> = self.mesh.cells().iter().map(|c| c.center).collect();
        let lambda = self.flux.coordinate_speed_bound(&centers, lo, hi);
        let big_lambda = self.mesh.inverse_metric_bound();
        let dim = self.mesh.dim() as f64;
        let hyperbolic = if lambda > 0.0 { dx / lambda } else { f64::INFINITY };
        let parabolic = if self.epsilon > 0.0 {
            dx * dx / (2.0 * dim * self.epsilon * big_lambda)
        } else {
            f64::INFINITY
        };
        let mut dt = cfl * hyperbolic.min(parabolic);
        if self.form == ViscousForm::Conservative {
            dt = dt.min(self.diagonal_limit(lo, hi));
        }
        if let Some(cap) = dt_max {
            dt = dt.min(cap);
        }
        dt
    }

    pub fn step(&self, u: &[f64], dt: f64) -> Vec<f64> {
        match self.form {
            ViscousForm::Conservative => self.step_conservative(u, dt),
            ViscousForm::Advective => self.step_advective(u, dt),
        }
    }

    fn step_conservative(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let h = self.flux.nonlinearity();
        let faces = self.mesh.faces();
        let face_value = |(f, face): (usize, &crate::mesh::Face)| {
            let (ul, ur) = (u[face.left], u[face.right]);
            0.5 * self.coeff[f] * (h.value(ul) + h.value(ur)) - self.epsilon * face.diffusion * (ur - ul)
        };
        let q: Vec<f64> = if faces.len() >= PARALLEL_THRESHOLD {
            faces.par_iter().enumerate().map(face_value).collect()
        } else {
            faces.iter().enumerate().map(face_value).collect()
        };
        let update = |i: usize| {
            let net: f64 = self.mesh.cell_faces(i).iter().map(|&(f, s)| s * q[f]).sum();
            u[i] - dt / self.mesh.cells()[i].volume * net
        };
        if u.len() >= PARALLEL_THRESHOLD {
            (0..u.len()).into_par_iter().map(update).collect()
        } else {
            (0..u.len()).map(update).collect()
        }
    }

    fn step_advective(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let h = self.flux.nonlinearity();
        let dim = self.mesh.dim();
        let dx = self.mesh.spacing();
        let update = |i: usize| {
            let s = &self.stencils[i];
            let mut grad = [0.0; 2];
            let mut second = [[0.0; 2]; 2];
            for a in 0..dim {
                grad[a] = (u[s.plus[a]] - u[s.minus[a]]) / (2.0 * dx[a]);
                second[a][a] = (u[s.plus[a]] - 2.0 * u[i] + u[s.minus[a]]) / (dx[a] * dx[a]);
            }
            if dim == 2 {
                let [pp, pm, mp, mm] = s.diagonal;
                let mixed = (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * dx[0] * dx[1]);
                second[0][1] = mixed;
                second[1][0] = mixed;
            }
            let speed = h.d1(u[i]);
            let mut rhs = 0.0;
            for a in 0..dim {
                rhs -= speed * s.field[a] * grad[a];
                rhs -= self.epsilon * s.contracted[a] * grad[a];
                for b in 0..dim {
                    rhs += self.epsilon * s.inverse_metric[a][b] * second[a][b];
                }
            }
            u[i] + dt * rhs
        };
        if u.len() >= PARALLEL_THRESHOLD {
            (0..u.len()).into_par_iter().map(update).collect()
        } else {
            (0..u.len()).map(update).collect()
        }
    }
}

fn build_stencils(mesh: &ManifoldMesh, flux: &FluxFamily) -> Result<Vec<PointStencil>> {
    let dim = mesh.dim();
    let chart = mesh.chart();
    let mut out = Vec::with_capacity(mesh.len());
    for (i, cell) in mesh.cells().iter().enumerate() {
        let step = |c: usize, a: usize, o: isize| mesh.neighbor(c, a, o).unwrap_or(c);
        let mut plus = [i; 2];
        let mut minus = [i; 2];
        for a in 0..dim {
            plus[a] = step(i, a, 1);
            minus[a] = step(i, a, -1);
        }
        let diagonal = if dim == 2 {
            [
                step(plus[0], 1, 1),
                step(plus[0], 1, -1),
                step(minus[0], 1, 1),
                step(minus[0], 1, -1),
            ]
        } else {
            [i; 4]
        };
        let gi = chart.inverse_metric(&cell.center);
        let gamma = christoffel(chart, &cell.center)?;
        let mut contracted = [0.0; 2];
        for (k, c) in contracted.iter_mut().enumerate().take(dim) {
            for a in 0..dim {
                for b in 0..dim {
                    *c += gi[a][b] * gamma[k][a][b];
                }
            }
        }
        out.push(PointStencil {
            plus,
            minus,
            diagonal,
            field: flux.field().at(&cell.center),
            inverse_metric: gi,
            contracted,
        });
    }
    Ok(out)
}

/// One forward-Euler step of the regularized equation. Aborts on non-finite output.
pub fn viscous_step(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    u: &ScalarField,
    dt: f64,
    epsilon: f64,
    form: ViscousForm,
) -> Result<ScalarField> {
    let solver = ViscousSolver::new(mesh.clone(), flux.clone(), epsilon, form)?;
    let next = solver.step(u.values(), dt);
    check_finite(&next, 1)?;
    ScalarField::new(mesh.clone(), next)
}

/// See [`ViscousSolver::stable_dt`].
pub fn stable_dt(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    u: &ScalarField,
    epsilon: f64,
    cfl: f64,
    dt_max: Option<f64>,
) -> Result<f64> {
    let solver = ViscousSolver::new(mesh.clone(), flux.clone(), epsilon, ViscousForm::Conservative)?;
    Ok(solver.stable_dt(u.min(), u.max(), cfl, dt_max))
}

pub fn solve_viscous(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    u0: &ScalarField,
    config: &ViscousConfig,
) -> Result<SolutionTrajectory> {
    let mut out = solve_viscous_ensemble(mesh, flux, &[u0.values().to_vec()], config)?;
    Ok(out.remove(0))
}

/// Runs several initial data with a shared step sequence.
pub fn solve_viscous_ensemble(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    initial: &[Vec<f64>],
    config: &ViscousConfig,
) -> Result<Vec<SolutionTrajectory>> {
    config.validate()?;
    let solver = ViscousSolver::new(mesh.clone(), flux.clone(), config.epsilon, config.form)?;
    let times = output_times(&config.snapshot_times, config.t_end)?;
    for u in initial {
        if u.len() != mesh.len() {
            return Err(Error::InvalidParameter(format!(
                "initial data has {} values for {} cells",
                u.len(),
                mesh.len()
            )));
        }
        check_finite(u, 0)?;
    }
    let mut states: Vec<Vec<f64>> = initial.to_vec();
    let mut snapshots: Vec<Vec<Snapshot>> = vec![Vec::new(); initial.len()];
    let mut steps = Vec::new();
    let mut monotone = config.form == ViscousForm::Conservative;
    let mut clock = Clock::new(&times);
    record(&mut snapshots, &states, 0, 0.0);
    while !clock.done() {
        let (lo, hi) = ensemble_range(&states);
        if monotone && !solver.peclet_holds(lo, hi) {
            monotone = false;
        }
        let (dt, landed) = clock.advance(solver.stable_dt(lo, hi, config.cfl, config.dt_max))?;
        for u in states.iter_mut() {
            let next = solver.step(u, dt);
            check_finite(&next, clock.step)?;
            *u = next;
        }
        steps.push(dt);
        if landed || config.record_every_step {
            record(&mut snapshots, &states, clock.step, clock.t);
        }
    }
    let metadata = RunMetadata {
        scheme: "viscous".into(),
        variant: config.form.name().into(),
        flux: flux.name().into(),
        compatible: flux.is_compatible(),
        epsilon: config.epsilon,
        cfl: config.cfl,
        monotone,
    };
    Ok(snapshots
        .into_iter()
        .map(|snaps| SolutionTrajectory {
            mesh: mesh.clone(),
            metadata: metadata.clone(),
            snapshots: snaps,
            steps: steps.clone(),
        })
        .collect())
}

/// Smoothing width, in cells, applied to discontinuous initial data.
pub const INITIAL_MOLLIFIER_CELLS: f64 = 2.0;

/// Separable discrete Gaussian smoothing with standard deviation `width`
/// cells, truncated at four deviations. Closed axes reflect.
pub fn mollify(mesh: &ManifoldMesh, values: &[f64], width: f64) -> Vec<f64> {
    if width <= 0.0 {
        return values.to_vec();
    }
    let reach = (4.0 * width).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|k| (-0.5 * (k as f64 / width).powi(2)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|w| w / total).collect();
    let mut current = values.to_vec();
    for axis in 0..mesh.dim() {
        let n = mesh.shape()[axis] as isize;
        let periodic = mesh.chart().axes()[axis].periodic;
        let mut next = vec![0.0; current.len()];
        for (i, cell) in mesh.cells().iter().enumerate() {
            let idx = cell.index[axis] as isize;
            let mut acc = 0.0;
            for (w, k) in kernel.iter().zip(-reach..=reach) {
                let mut j = idx + k;
                if periodic {
                    j = j.rem_euclid(n);
                } else {
                    while j < 0 || j >= n {
                        j = if j < 0 { -j - 1 } else { 2 * n - j - 1 };
                    }
                }
                let src = mesh.neighbor(i, axis, j - idx).expect("reflected index lies inside");
                acc += w * current[src];
            }
            next[i] = acc;
        }
        current = next;
    }
    current
}

/// `‖Δ_g u‖_{L¹}` for the face-diffusion discretization of the Laplacian.
pub fn discrete_laplacian_norm(mesh: &ManifoldMesh, values: &[f64]) -> f64 {
    let mut lap = vec![0.0; values.len()];
    for face in mesh.faces() {
        let q = face.diffusion * (values[face.right] - values[face.left]);
        lap[face.left] += q;
        lap[face.right] -= q;
    }
    // each entry is already vol · Δu
    lap.iter().map(|l| l.abs()).sum()
}

/// Bound on `|∂_u f|_g` over the data range, sampled on a 32-per-axis grid.
pub fn metric_speed_bound(flux: &FluxFamily, lo: f64, hi: f64) -> f64 {
    flux.speed_bound(&sample_points(flux.chart(), 32), lo, hi)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::flux::{make_compatible_flux, TangentField};
    use crate::geometry::MetricChart;
    use crate::mesh::lp_norm_of;
    use crate::poly::Polynomial;

    fn circle(n: usize) -> (Arc<ManifoldMesh>, MetricChart) {
        let chart = MetricChart::flat_circle(1.0).unwrap();
        (Arc::new(ManifoldMesh::new(chart.clone(), &[n]).unwrap()), chart)
    }

    #[test]
    fn heat_decay_matches_eigenvalue() {
        let (mesh, chart) = circle(256);
        let u0 = mesh.sample(|x| (2.0 * PI * x[0]).sin());
        let eps = 1.0;
        let cfg = ViscousConfig::new(eps, 0.5, 0.01);
        let zero = FluxFamily::zero(chart);
        let traj = solve_viscous(&mesh, &zero, &u0, &cfg).unwrap();
        let ratio = lp_norm_of(&mesh, &traj.last().values, 2.0).unwrap() / lp_norm_of(&mesh, u0.values(), 2.0).unwrap();
        let expected = (-4.0 * PI * PI * eps * 0.01).exp();
        assert!((ratio / expected - 1.0).abs() < 0.02, "{ratio} vs {expected}");
    }

    #[test]
    fn constant_is_steady() {
        let (mesh, _) = circle(32);
        let band = MetricChart::sphere_band(PI / 3.0).unwrap();
        let bmesh = Arc::new(ManifoldMesh::new(band.clone(), &[16, 24]).unwrap());
        let zonal = make_compatible_flux("z", band, TangentField::zonal(1.0), Polynomial::burgers()).unwrap();
        for form in [ViscousForm::Conservative, ViscousForm::Advective] {
            let u = ScalarField::constant(bmesh.clone(), 0.7);
            let next = viscous_step(&bmesh, &zonal, &u, 1e-3, 0.05, form).unwrap();
            assert!(next.values().iter().all(|v| (v - 0.7).abs() < 1e-13));
        }
        let zero = FluxFamily::zero(mesh.chart().clone());
        let u = ScalarField::constant(mesh.clone(), 2.0);
        assert_eq!(
            viscous_step(&mesh, &zero, &u, 0.1, 0.0, ViscousForm::Conservative)
                .unwrap()
                .values(),
            u.values()
        );
    }

    #[test]
    fn stable_dt_examples() {
        let (mesh, chart) = circle(100);
        let v = TangentField::constant_density(&chart, [1.0, 0.0]);
        let burgers = make_compatible_flux("b", chart.clone(), v, Polynomial::burgers()).unwrap();
        let u = mesh.sample(|x| (2.0 * PI * x[0]).sin());
        let dt = stable_dt(&mesh, &burgers, &u, 0.0, 0.5, None).unwrap();
        let umax = u.max().max(-u.min());
        assert!((dt - 0.5 * 0.01 / umax).abs() < 1e-12, "{dt}");
        let big = stable_dt(&mesh, &burgers, &u, 1e4, 0.5, None).unwrap();
        assert!((big / (0.5 * 1e-4 / 2e4) - 1.0).abs() < 1e-9);
        let zero = FluxFamily::zero(chart);
        assert_eq!(stable_dt(&mesh, &zero, &u, 0.0, 0.5, Some(0.125)).unwrap(), 0.125);
    }

    #[test]
    fn transport_advects_the_profile() {
        let errs: Vec<f64> = [128usize, 256]
            .iter()
            .map(|&n| {
                let (mesh, chart) = circle(n);
                let v = TangentField::constant_density(&chart, [1.0, 0.0]);
                let f = make_compatible_flux("t", chart, v, Polynomial::linear()).unwrap();
                let u0 = mesh.sample(|x| (2.0 * PI * x[0]).sin());
                let dx = 1.0 / n as f64;
                let cfg = ViscousConfig::new(0.5 * dx, 0.9, 0.25);
                let traj = solve_viscous(&mesh, &f, &u0, &cfg).unwrap();
                let exact = mesh.sample(|x| (2.0 * PI * (x[0] - 0.25)).sin());
                let diff: Vec<f64> = traj
                    .last()
                    .values
                    .iter()
                    .zip(exact.values())
                    .map(|(a, b)| a - b)
                    .collect();
                lp_norm_of(&mesh, &diff, 2.0).unwrap()
            })
            .collect();
        assert!(errs[1] < 0.6 * errs[0], "{errs:?}");
        assert!(errs[0] < 0.2);
    }

    #[test]
    fn advective_form_needs_compatible_flux() {
        let f = crate::flux::make_weighted_flux_1d(
            crate::geometry::Fourier1d::new(2.0, vec![1.0], vec![]),
            Polynomial::burgers(),
        )
        .unwrap();
        let mesh = Arc::new(ManifoldMesh::new(f.chart().clone(), &[32]).unwrap());
        assert!(ViscousSolver::new(mesh, f, 0.1, ViscousForm::Advective).is_err());
    }

    #[test]
    fn mollify_preserves_constants_and_smooths_jumps() {
        let band = MetricChart::sphere_band(PI / 3.0).unwrap();
        let mesh = ManifoldMesh::new(band, &[16, 32]).unwrap();
        let c = vec![1.5; mesh.len()];
        assert!(mollify(&mesh, &c, 2.0).iter().all(|v| (v - 1.5).abs() < 1e-14));
        let (cm, _) = circle(64);
        let step: Vec<f64> = cm
            .cells()
            .iter()
            .map(|c| if c.center[0] < 0.5 { 1.0 } else { 0.0 })
            .collect();
        let smooth = mollify(&cm, &step, 2.0);
        let max_jump = smooth.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_jump < 0.25);
        assert!((smooth.iter().sum::<f64>() - step.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_values_abort() {
        let (mesh, chart) = circle(16);
        let v = TangentField::constant_density(&chart, [1.0, 0.0]);
        let f = make_compatible_flux("b", chart, v, Polynomial::burgers()).unwrap();
        let u = ScalarField::constant(mesh.clone(), 1e200);
        assert!(matches!(
            viscous_step(&mesh, &f, &u, 1.0, 0.1, ViscousForm::Conservative),
            Err(Error::NonFinite { .. })
        ));
    }
}
