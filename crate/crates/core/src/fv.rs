//! Monotone conservative finite-volume scheme.
//!
//! `u_i' = u_i − (dt/vol_i) Σ_faces ± q_f` with a two-point monotone flux
//! `q_f` on the face-frozen normal flux `area · g(f_face(ū), ν) = c_f h(ū)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::FluxFamily;
use crate::mesh::{ManifoldMesh, ScalarField};
use crate::poly::Polynomial;
use crate::trajectory::{check_finite, output_times, Clock, RunMetadata, Snapshot, SolutionTrajectory};

/// Safety factor on the Rusanov wave-speed bound.
pub const RUSANOV_SAFETY: f64 = 1.1;

/// Cell count above which steps run in parallel.
pub(crate) const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumericalFlux {
    Rusanov,
    EngquistOsher,
}

impl NumericalFlux {
    pub const NAMES: [&'static str; 2] = ["rusanov", "engquist_osher"];

    pub fn name(&self) -> &'static str {
        match self {
            NumericalFlux::Rusanov => "rusanov",
            NumericalFlux::EngquistOsher => "engquist_osher",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rusanov" => Some(NumericalFlux::Rusanov),
            "engquist_osher" => Some(NumericalFlux::EngquistOsher),
            _ => None,
        }
    }
}

/// `½(f(uL)+f(uR)) − ½λ(uR−uL)`.
pub fn interface_flux_rusanov(f: impl Fn(f64) -> f64, lambda: f64, ul: f64, ur: f64) -> f64 {
    0.5 * (f(ul) + f(ur)) - 0.5 * lambda * (ur - ul)
}

/// Engquist–Osher flux for `f = c·h`: `½(f(uL)+f(uR)) − ½∫_{uL}^{uR} |f'|`.
/// The integral is exact: `h` is split at the roots of `h'`.
pub fn interface_flux_engquist_osher(h: &Polynomial, c: f64, ul: f64, ur: f64) -> f64 {
    let (lo, hi) = if ul <= ur { (ul, ur) } else { (ur, ul) };
    let mut total_variation = 0.0;
    let mut a = lo;
    for r in h.derivative().roots_in(lo, hi) {
        total_variation += (h.value(r) - h.value(a)).abs();
        a = r;
    }
    total_variation += (h.value(hi) - h.value(a)).abs();
    let signed = if ur >= ul { total_variation } else { -total_variation };
    0.5 * c * (h.value(ul) + h.value(ur)) - 0.5 * c.abs() * signed
}

#[derive(Clone, Debug, PartialEq)]
pub struct FvConfig {
    pub numerical_flux: NumericalFlux,
    /// Fraction of the monotone step limit, in `(0, 1]`.
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Store every step, not just the requested times.
    pub record_every_step: bool,
    pub dt_max: Option<f64>,
}

impl FvConfig {
    pub fn new(numerical_flux: NumericalFlux, cfl: f64, t_end: f64) -> Self {
        Self {
            numerical_flux,
            cfl,
            t_end,
            snapshot_times: Vec::new(),
            record_every_step: false,
            dt_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl must lie in (0, 1], got {}",
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

/// Precomputed face coefficients for one mesh and flux.
#[derive(Clone, Debug)]
pub struct FvSolver {
    mesh: Arc<ManifoldMesh>,
    flux: FluxFamily,
    numerical_flux: NumericalFlux,
    coeff: Vec<f64>,
}

impl FvSolver {
    pub fn new(mesh: Arc<ManifoldMesh>, flux: FluxFamily, numerical_flux: NumericalFlux) -> Result<Self> {
        if mesh.chart().kind() != flux.chart().kind() {
            return Err(Error::Mismatch(format!(
                "flux lives on {} but mesh on {}",
                flux.chart().name(),
                mesh.chart().name()
            )));
        }
        let coeff = mesh
            .faces()
            .iter()
            .map(|f| f.area * flux.normal_coefficient(f))
            .collect();
        Ok(Self {
            mesh,
            flux,
            numerical_flux,
            coeff,
        })
    }

    pub fn mesh(&self) -> &Arc<ManifoldMesh> {
        &self.mesh
    }

    pub fn flux(&self) -> &FluxFamily {
        &self.flux
    }

    /// `area · g(V, ν)` per face.
    pub fn face_coefficients(&self) -> &[f64] {
        &self.coeff
    }

    /// `area · q(uL, uR)` on face `f`.
    pub fn face_flux(&self, f: usize, ul: f64, ur: f64) -> f64 {
        let h = self.flux.nonlinearity();
        let c = self.coeff[f];
        match self.numerical_flux {
            NumericalFlux::Rusanov => {
                let lambda = RUSANOV_SAFETY * c.abs() * h.max_abs_derivative(ul, ur);
                interface_flux_rusanov(|u| c * h.value(u), lambda, ul, ur)
            }
            NumericalFlux::EngquistOsher => interface_flux_engquist_osher(h, c, ul, ur),
        }
    }

    /// Largest `dt` for which the update is nondecreasing in every input
    /// when all states lie in `[lo, hi]`.
    ///
    /// Rusanov's state-dependent `λ` contributes a `|∂λ/∂u| · |uR − uL|`
    /// term to the diagonal coefficient, bounded here with `max |h''|`.
    pub fn monotone_limit(&self, lo: f64, hi: f64) -> f64 {
        let h = self.flux.nonlinearity();
        let m1 = h.max_abs_derivative(lo, hi);
        let weight = match self.numerical_flux {
            NumericalFlux::Rusanov => {
                let m2 = h.derivative().max_abs_derivative(lo, hi);
                0.5 * m1 + 0.5 * RUSANOV_SAFETY * m1 + 0.5 * RUSANOV_SAFETY * m2 * (hi - lo)
            }
            NumericalFlux::EngquistOsher => m1,
        };
        let mut limit = f64::INFINITY;
        for (i, cell) in self.mesh.cells().iter().enumerate() {
            let s: f64 = self.mesh.cell_faces(i).iter().map(|&(f, _)| self.coeff[f].abs()).sum();
            if s * weight > 0.0 {
                limit = limit.min(cell.volume / (s * weight));
            }
        }
        limit
    }

    /// One forward-Euler step. Refuses `dt` above the monotone limit.
    pub fn step(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let (lo, hi) = range(u);
        let limit = self.monotone_limit(lo, hi);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        Ok(self.step_unchecked(u, dt))
    }

    pub(crate) fn step_unchecked(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let faces = self.mesh.faces();
        let face_value = |(f, face): (usize, &crate::mesh::Face)| self.face_flux(f, u[face.left], u[face.right]);
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
}

pub(crate) fn range(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
}

pub(crate) fn ensemble_range(states: &[Vec<f64>]) -> (f64, f64) {
    states
        .iter()
        .map(|s| range(s))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

pub(crate) fn record(snapshots: &mut [Vec<Snapshot>], states: &[Vec<f64>], step: usize, time: f64) {
    for (k, u) in states.iter().enumerate() {
        snapshots[k].push(Snapshot {
            step,
            time,
            values: u.clone(),
        });
    }
}

/// Monotone-flux update `u_i − (dt/vol_i) Σ area·q`.
pub fn fv_step(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    u: &ScalarField,
    dt: f64,
    numerical_flux: NumericalFlux,
) -> Result<ScalarField> {
    let solver = FvSolver::new(mesh.clone(), flux.clone(), numerical_flux)?;
    ScalarField::new(mesh.clone(), solver.step(u.values(), dt)?)
}

pub fn solve_fv(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    u0: &ScalarField,
    config: &FvConfig,
) -> Result<SolutionTrajectory> {
    let mut out = solve_fv_ensemble(mesh, flux, &[u0.values().to_vec()], config)?;
    Ok(out.remove(0))
}

/// Runs several initial data with one shared step sequence, so that the
/// members can be compared pairwise.
pub fn solve_fv_ensemble(
    mesh: &Arc<ManifoldMesh>,
    flux: &FluxFamily,
    initial: &[Vec<f64>],
    config: &FvConfig,
) -> Result<Vec<SolutionTrajectory>> {
    config.validate()?;
    let solver = FvSolver::new(mesh.clone(), flux.clone(), config.numerical_flux)?;
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

    let dt_cap = config.dt_max.unwrap_or(f64::INFINITY);
    let mut clock = Clock::new(&times);
    record(&mut snapshots, &states, 0, 0.0);
    while !clock.done() {
        let (lo, hi) = ensemble_range(&states);
        let (dt, landed) = clock.advance((config.cfl * solver.monotone_limit(lo, hi)).min(dt_cap))?;
        for u in states.iter_mut() {
            let next = solver.step_unchecked(u, dt);
            check_finite(&next, clock.step)?;
            *u = next;
        }
        steps.push(dt);
        if landed || config.record_every_step {
            record(&mut snapshots, &states, clock.step, clock.t);
        }
    }
    let metadata = RunMetadata {
        scheme: "fv".into(),
        variant: config.numerical_flux.name().into(),
        flux: flux.name().into(),
        compatible: flux.is_compatible(),
        epsilon: 0.0,
        cfl: config.cfl,
        monotone: true,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{make_compatible_flux, make_weighted_flux_1d, TangentField};
    use crate::geometry::{Fourier1d, MetricChart};

    #[test]
    fn rusanov_examples() {
        let b = |u: f64| 0.5 * u * u;
        assert_eq!(interface_flux_rusanov(b, 1.0, 0.7, 0.7), b(0.7));
        assert!((interface_flux_rusanov(b, 1.0, 1.0, -1.0) - 1.5).abs() < 1e-15);
        assert!((interface_flux_rusanov(|u| u, 1.0, 0.3, -2.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn engquist_osher_examples() {
        let h = Polynomial::burgers();
        // transonic rarefaction: flux at the sonic point is 0
        assert!(interface_flux_engquist_osher(&h, 1.0, -1.0, 1.0).abs() < 1e-15);
        // transonic shock: f(uL) + f(uR)
        assert!((interface_flux_engquist_osher(&h, 1.0, 1.0, -1.0) - 1.0).abs() < 1e-15);
        // supersonic to the right: upwind
        assert!((interface_flux_engquist_osher(&h, 1.0, 2.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((interface_flux_engquist_osher(&h, -1.0, 2.0, 1.0) + 0.5).abs() < 1e-15);
        assert!((interface_flux_engquist_osher(&h, 1.0, 0.4, 0.4) - 0.08).abs() < 1e-15);
    }

    fn circle_burgers(n: usize) -> (Arc<ManifoldMesh>, FluxFamily) {
        let chart = MetricChart::flat_circle(1.0).unwrap();
        let v = TangentField::constant_density(&chart, [1.0, 0.0]);
        let flux = make_compatible_flux("burgers", chart.clone(), v, Polynomial::burgers()).unwrap();
        (Arc::new(ManifoldMesh::new(chart, &[n]).unwrap()), flux)
    }

    #[test]
    fn constant_state_is_preserved_on_curved_charts() {
        let band = MetricChart::sphere_band(std::f64::consts::PI / 3.0).unwrap();
        let flux =
            make_compatible_flux("zonal", band.clone(), TangentField::zonal(1.0), Polynomial::burgers()).unwrap();
        let mesh = Arc::new(ManifoldMesh::new(band, &[16, 32]).unwrap());
        let solver = FvSolver::new(mesh.clone(), flux, NumericalFlux::Rusanov).unwrap();
        let u = vec![0.8; mesh.len()];
        let dt = 0.5 * solver.monotone_limit(0.8, 0.8);
        let next = solver.step(&u, dt).unwrap();
        assert!(next.iter().all(|v| (v - 0.8).abs() <= 1e-10 * dt));
    }

    #[test]
    fn refuses_steps_above_the_monotone_limit() {
        let (mesh, flux) = circle_burgers(32);
        let u = mesh.sample(|x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let solver = FvSolver::new(mesh.clone(), flux.clone(), NumericalFlux::Rusanov).unwrap();
        let limit = solver.monotone_limit(u.min(), u.max());
        assert!(matches!(
            fv_step(&mesh, &flux, &u, 2.0 * limit, NumericalFlux::Rusanov),
            Err(Error::CflViolation { .. })
        ));
        assert!(fv_step(&mesh, &flux, &u, limit, NumericalFlux::Rusanov).is_ok());
    }

    #[test]
    fn zero_flux_is_identity() {
        let chart = MetricChart::flat_circle(1.0).unwrap();
        let mesh = Arc::new(ManifoldMesh::new(chart.clone(), &[16]).unwrap());
        let u = mesh.sample(|x| x[0]);
        let next = fv_step(&mesh, &FluxFamily::zero(chart), &u, 0.3, NumericalFlux::EngquistOsher).unwrap();
        assert_eq!(next.values(), u.values());
    }

    #[test]
    fn riemann_shock_moves_at_half_speed() {
        let (mesh, flux) = circle_burgers(400);
        let u0 = mesh.sample(|x| if x[0] >= 0.2 && x[0] < 0.5 { 1.0 } else { 0.0 });
        let cfg = FvConfig::new(NumericalFlux::Rusanov, 0.9, 0.5);
        let traj = solve_fv(&mesh, &flux, &u0, &cfg).unwrap();
        let u = &traj.last().values;
        // the shock started at 0.5; locate the u = 1/2 crossing past the plateau
        let pos = mesh
            .cells()
            .windows(2)
            .zip(u.windows(2))
            .filter(|(c, v)| c[0].center[0] > 0.6 && v[0] >= 0.5 && v[1] < 0.5)
            .map(|(c, _)| c[0].center[0])
            .next()
            .unwrap();
        assert!((pos - 0.75).abs() < 5.0 / 400.0, "shock at {pos}");
        let m0 = mesh.integrate(u0.values());
        assert!((mesh.integrate(u) - m0).abs() < 1e-13);
    }

    #[test]
    fn weighted_flux_runs_are_conservative() {
        let flux = make_weighted_flux_1d(Fourier1d::new(2.0, vec![1.0], vec![]), Polynomial::burgers()).unwrap();
        let mesh = Arc::new(ManifoldMesh::new(flux.chart().clone(), &[64]).unwrap());
        let u0 = mesh.sample(|x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x[0]).cos());
        let mut cfg = FvConfig::new(NumericalFlux::EngquistOsher, 0.9, 0.2);
        cfg.record_every_step = true;
        let traj = solve_fv(&mesh, &flux, &u0, &cfg).unwrap();
        let m0 = mesh.integrate(u0.values());
        for s in &traj.snapshots {
            assert!((mesh.integrate(&s.values) - m0).abs() < 1e-12 * m0);
        }
        assert_eq!(traj.snapshots.len(), traj.steps.len() + 1);
    }
}
