//! Scenario execution and CSV artifacts.
//!
//! A run writes, under `<root>/<output>/`:
//!
//! | file | columns |
//! |---|---|
//! | `scenario.cfg` | canonical scenario text |
//! | `mesh.csv` | `cell,i,j,x0,x1,volume` |
//! | `meta.csv` | `key,value` |
//! | `steps.csv` | `step,dt` |
//! | `index.csv` | `snapshot,step,time` |
//! | `member_<k>/trajectory.csv` | `snapshot,step,time,cell,u` |
//! | `norms.csv` | `member,snapshot,time,l1,l2,linf,tv` |
//! | `distances.csv` | `a,b,kind,time,distance` (ensembles only) |
//! | `oracle.csv` | `x,u_exact,u_fv,abs_diff` (oracle runs only) |
//! | `report.csv`, `report.txt` | property verdicts |
//! | `error.txt` | diagnostic, written only when the run aborts |
//!
//! Floats are written with 17 significant digits, so reloading a run
//! reproduces the stored values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flux::{make_compatible_flux, make_weighted_flux_1d, FluxFamily, TangentField};
use crate::fv::{solve_fv_ensemble, FvConfig};
use crate::geometry::{Fourier1d, MetricChart};
use crate::lorentzian::{
    check_timelike, foliation_contraction_check, foliation_distances, solve_lorentzian_ensemble, FoliatedSpacetime,
    LorentzianConfig, LorentzianSolver, TimelikeFlux,
};
use crate::mesh::ManifoldMesh;
use crate::oracle::{smooth_solve, WeightedProblem};
use crate::properties::{
    check_contraction, check_kruzkov_inequality, check_lp_stability, check_maximum_principle, check_time_lipschitz,
    check_tv_envelope, check_weak_entropy_solution, kruzkov_basket, l1_distances, verdict, PropertyReport, ThetaBasket,
};
use crate::scenario::{
    parse_scenario, serialize_scenario, ChartSpec, Check, Epsilon, FieldSpec, FluxSpec, Method, Scenario,
};
use crate::trajectory::{RunMetadata, Snapshot, SolutionTrajectory};
use crate::viscous::{
    discrete_laplacian_norm, metric_speed_bound, mollify, solve_viscous_ensemble, ViscousConfig,
    INITIAL_MOLLIFIER_CELLS,
};

/// Environment variable naming the output root.
pub const OUTPUT_ROOT_VAR: &str = "CURVLAW_OUT";

/// Output root from [`OUTPUT_ROOT_VAR`], else `./out`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Geometry and flux of a scenario.
#[derive(Clone, Debug)]
pub enum Model {
    Riemannian {
        mesh: Arc<ManifoldMesh>,
        flux: FluxFamily,
    },
    Lorentzian {
        mesh: Arc<ManifoldMesh>,
        spacetime: FoliatedSpacetime,
        flux: TimelikeFlux,
    },
}

impl Model {
    pub fn mesh(&self) -> &Arc<ManifoldMesh> {
        match self {
            Model::Riemannian { mesh, .. } | Model::Lorentzian { mesh, .. } => mesh,
        }
    }
}

fn chart_of(spec: &ChartSpec) -> Result<MetricChart> {
    match spec {
        ChartSpec::FlatCircle { length } => MetricChart::flat_circle(*length),
        ChartSpec::WeightedCircle { mean, sin, cos } => {
            MetricChart::weighted_circle(Fourier1d::new(*mean, sin.clone(), cos.clone()))
        }
        ChartSpec::FlatTorus { period } => MetricChart::flat_torus(*period),
        ChartSpec::WavyTorus { period } => MetricChart::wavy_torus(*period),
        ChartSpec::SphereBand { lat_max } => MetricChart::sphere_band(*lat_max),
        ChartSpec::Minkowski { .. } | ChartSpec::SchwarzschildRadial { .. } => Ok(spacetime_of(spec)?.leaf_chart()),
    }
}

fn spacetime_of(spec: &ChartSpec) -> Result<FoliatedSpacetime> {
    match *spec {
        ChartSpec::Minkowski { length } => FoliatedSpacetime::minkowski(length),
        ChartSpec::SchwarzschildRadial { mass, r_in, r_out } => {
            FoliatedSpacetime::schwarzschild_radial(mass, r_in, r_out)
        }
        _ => Err(Error::InvalidParameter(format!(
            "chart `{}` is not a spacetime",
            spec.name()
        ))),
    }
}

pub fn build_model(s: &Scenario) -> Result<Model> {
    let chart = chart_of(&s.manifold.chart)?;
    let mesh = Arc::new(ManifoldMesh::new(chart.clone(), &s.manifold.resolution)?);
    let flux = match &s.flux {
        FluxSpec::Compatible { h, field } => {
            let field = match field {
                FieldSpec::Constant(d) => TangentField::constant_density(&chart, *d),
                FieldSpec::Zonal(speed) => TangentField::zonal(*speed),
                FieldSpec::Shear => match s.manifold.chart {
                    ChartSpec::FlatTorus { period } => TangentField::shear(period),
                    _ => return Err(Error::InvalidParameter("shear field needs a flat torus".into())),
                },
                FieldSpec::Coordinate => TangentField::coordinate(),
            };
            make_compatible_flux("compatible", chart, field, h.clone())?
        }
        FluxSpec::Weighted { h } => match &s.manifold.chart {
            ChartSpec::WeightedCircle { mean, sin, cos } => {
                make_weighted_flux_1d(Fourier1d::new(*mean, sin.clone(), cos.clone()), h.clone())?
            }
            _ => return Err(Error::InvalidParameter("weighted flux needs a weighted circle".into())),
        },
        FluxSpec::Zero => FluxFamily::zero(chart),
        lorentzian => {
            let spacetime = spacetime_of(&s.manifold.chart)?;
            let flux = match lorentzian {
                FluxSpec::LorentzUniform { p0, p1, beta } => {
                    TimelikeFlux::uniform("lorentz_uniform", p0.clone(), *beta, p1.clone())
                }
                FluxSpec::SchwarzschildCompatible { p0, p1, s } => {
                    TimelikeFlux::schwarzschild_compatible(&spacetime, *s, p0.clone(), p1.clone())?
                }
                FluxSpec::SchwarzschildTransport { s } => match spacetime.kind() {
                    crate::lorentzian::SpacetimeKind::SchwarzschildRadial { m, .. } => {
                        TimelikeFlux::schwarzschild_transport(*m, *s)
                    }
                    _ => {
                        return Err(Error::InvalidParameter(
                            "transport flux needs a Schwarzschild section".into(),
                        ))
                    }
                },
                _ => unreachable!("Riemannian families handled above"),
            };
            return Ok(Model::Lorentzian { mesh, spacetime, flux });
        }
    };
    Ok(Model::Riemannian { mesh, flux })
}

/// Cell values of every `[initial]` profile, in file order.
pub fn initial_values(s: &Scenario, mesh: &ManifoldMesh) -> Vec<Vec<f64>> {
    let axes = mesh.chart().axes();
    s.initial
        .iter()
        .map(|p| {
            let a = p.axis();
            mesh.cells()
                .iter()
                .map(|c| p.eval((c.center[a] - axes[a].lo) / axes[a].length()))
                .collect()
        })
        .collect()
}

fn epsilon_value(s: &Scenario, mesh: &ManifoldMesh) -> f64 {
    match s.solver.epsilon {
        Epsilon::Absolute(e) => e,
        Epsilon::Cells(c) => c * mesh.min_spacing(),
    }
}

/// Marches every ensemble member with one shared step sequence.
pub fn simulate(s: &Scenario, model: &Model) -> Result<Vec<SolutionTrajectory>> {
    let data = initial_values(s, model.mesh());
    let sv = &s.solver;
    let eps = epsilon_value(s, model.mesh());
    match (model, sv.method) {
        (Model::Riemannian { mesh, flux }, Method::Fv | Method::Oracle) => {
            let mut cfg = FvConfig::new(sv.numerical_flux, sv.cfl, sv.t_end);
            cfg.snapshot_times = sv.snapshots.clone();
            cfg.record_every_step = sv.record_every_step;
            cfg.dt_max = sv.dt_max;
            solve_fv_ensemble(mesh, flux, &data, &cfg)
        }
        (Model::Riemannian { mesh, flux }, Method::Viscous) => {
            let mut cfg = ViscousConfig::new(eps, sv.cfl, sv.t_end);
            cfg.snapshot_times = sv.snapshots.clone();
            cfg.record_every_step = sv.record_every_step;
            cfg.dt_max = sv.dt_max;
            cfg.form = sv.form;
            let prepared: Vec<Vec<f64>> = data
                .iter()
                .zip(&s.initial)
                .map(|(u, p)| {
                    if p.is_discontinuous() {
                        mollify(mesh, u, INITIAL_MOLLIFIER_CELLS)
                    } else {
                        u.clone()
                    }
                })
                .collect();
            solve_viscous_ensemble(mesh, flux, &prepared, &cfg)
        }
        (Model::Lorentzian { mesh, spacetime, flux }, Method::Lorentzian) => {
            let mut solver = LorentzianSolver::new(spacetime.clone(), flux.clone(), mesh.len(), eps, sv.variant)?;
            let mut cfg = LorentzianConfig::new(sv.variant, eps, sv.cfl, sv.t_end);
            cfg.snapshot_times = sv.snapshots.clone();
            cfg.record_every_step = sv.record_every_step;
            cfg.inflow = sv.inflow;
            solve_lorentzian_ensemble(&mut solver, &data, &cfg)
        }
        _ => Err(Error::InvalidParameter(format!(
            "method `{}` does not fit this model",
            sv.method.name()
        ))),
    }
}

/// Exact-versus-numerical comparison at the final time.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTable {
    pub time: f64,
    /// `(x, u_exact, u_fv, |diff|)` per cell.
    pub rows: Vec<[f64; 4]>,
    /// `‖u_exact − u_fv‖_{L¹(dV_g)}`.
    pub l1_error: f64,
    pub max_diff: f64,
    pub dx: f64,
}

/// Characteristics solution for the first ensemble member, compared with
/// the last snapshot of `traj`.
pub fn oracle_table(s: &Scenario, traj: &SolutionTrajectory) -> Result<OracleTable> {
    let (ChartSpec::WeightedCircle { mean, sin, cos }, FluxSpec::Weighted { h }) = (&s.manifold.chart, &s.flux) else {
        return Err(Error::InvalidParameter(
            "the oracle needs a weighted circle with the weighted flux".into(),
        ));
    };
    let profile = s.initial[0].clone();
    let k = Fourier1d::new(*mean, sin.clone(), cos.clone());
    let problem = WeightedProblem::new(k, h.clone(), move |y| profile.eval(y.rem_euclid(1.0)))?;
    let last = traj.last();
    let xs: Vec<f64> = traj.mesh.cells().iter().map(|c| c.center[0]).collect();
    let exact = smooth_solve(&problem, last.time, &xs)?;
    let rows: Vec<[f64; 4]> = xs
        .iter()
        .zip(&exact)
        .zip(&last.values)
        .map(|((&x, &e), &u)| [x, e, u, (e - u).abs()])
        .collect();
    Ok(OracleTable {
        time: last.time,
        l1_error: traj.mesh.l1_distance(&exact, &last.values),
        max_diff: rows.iter().map(|r| r[3]).fold(0.0, f64::max),
        rows,
        dx: traj.mesh.spacing()[0],
    })
}

/// Distance time series between two ensemble members.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceSeries {
    pub a: usize,
    pub b: usize,
    /// `l1` or `foliation`.
    pub kind: &'static str,
    pub values: Vec<(f64, f64)>,
}

/// A property verdict and what it was computed on (`m0`, `m0-m1`, `run`).
#[derive(Clone, Debug)]
pub struct SubjectReport {
    pub subject: String,
    pub report: PropertyReport,
}

#[derive(Clone, Debug, Default)]
pub struct Verification {
    pub reports: Vec<SubjectReport>,
    pub distances: Vec<DistanceSeries>,
    pub oracle: Option<OracleTable>,
}

impl Verification {
    pub fn pass(&self) -> bool {
        let reports: Vec<PropertyReport> = self.reports.iter().map(|r| r.report.clone()).collect();
        verdict(&reports)
    }

    fn push(&mut self, subject: impl Into<String>, report: PropertyReport) {
        self.reports.push(SubjectReport {
            subject: subject.into(),
            report,
        });
    }
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn data_range(members: &[SolutionTrajectory]) -> (f64, f64) {
    members
        .iter()
        .flat_map(|t| t.initial().values.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn range_of(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Runs every listed check on the members of one run.
pub fn verify(s: &Scenario, model: &Model, members: &[SolutionTrajectory]) -> Result<Verification> {
    let mut out = Verification::default();
    let mut checks = s.properties.checks.clone();
    checks.sort();
    for check in checks {
        let name = check.name();
        match (model, check) {
            (Model::Riemannian { .. }, Check::LpStability) => {
                for (k, t) in members.iter().enumerate() {
                    out.push(format!("m{k}"), check_lp_stability(t, &s.properties.p)?);
                }
            }
            (Model::Riemannian { .. }, Check::MaximumPrinciple) => {
                for (k, t) in members.iter().enumerate() {
                    out.push(format!("m{k}"), check_maximum_principle(t));
                }
            }
            (Model::Riemannian { .. }, Check::Contraction) => {
                if members.len() < 2 {
                    out.push(
                        "run",
                        PropertyReport::not_applicable("l1_contraction", "needs at least two initial data"),
                    );
                }
                for (i, j) in pairs(members.len()) {
                    out.push(format!("m{i}-m{j}"), check_contraction(&members[i], &members[j])?);
                    let values = l1_distances(&members[i], &members[j])?;
                    out.distances.push(DistanceSeries {
                        a: i,
                        b: j,
                        kind: "l1",
                        values,
                    });
                }
            }
            (Model::Riemannian { flux, mesh }, Check::KruzkovPair) => {
                if members.len() < 2 {
                    out.push(
                        "run",
                        PropertyReport::not_applicable(name, "needs at least two initial data"),
                    );
                }
                let basket = ThetaBasket::standard(mesh.chart(), s.solver.t_end, s.seed);
                for (i, j) in pairs(members.len()) {
                    let r = check_kruzkov_inequality(
                        &members[i],
                        &members[j],
                        flux,
                        &basket,
                        s.properties.entropy_constant,
                    )?;
                    out.push(format!("m{i}-m{j}"), r);
                }
            }
            (Model::Riemannian { flux, mesh }, Check::WeakEntropy) => {
                let basket = ThetaBasket::standard(mesh.chart(), s.solver.t_end, s.seed);
                for (k, t) in members.iter().enumerate() {
                    let (lo, hi) = range_of(&t.initial().values);
                    let entropies = kruzkov_basket(flux, lo, hi);
                    out.push(
                        format!("m{k}"),
                        check_weak_entropy_solution(t, &entropies, &basket, s.properties.entropy_constant)?,
                    );
                }
            }
            (Model::Riemannian { .. }, Check::TvEnvelope) => {
                for (k, t) in members.iter().enumerate() {
                    out.push(format!("m{k}"), check_tv_envelope(t, s.properties.tv_limit));
                }
            }
            (Model::Riemannian { flux, mesh }, Check::TimeLipschitz) => {
                for (k, t) in members.iter().enumerate() {
                    let (lo, hi) = range_of(&t.initial().values);
                    let lipschitz = s
                        .properties
                        .lipschitz
                        .unwrap_or_else(|| metric_speed_bound(flux, lo, hi));
                    let d0 = discrete_laplacian_norm(mesh, &t.initial().values);
                    out.push(format!("m{k}"), check_time_lipschitz(t, lipschitz, d0));
                }
            }
            (Model::Riemannian { .. }, Check::OracleError) => {
                if s.solver.method != Method::Oracle {
                    out.push("run", PropertyReport::not_applicable(name, "method is not `oracle`"));
                    continue;
                }
                let table = oracle_table(s, &members[0])?;
                let bound = s.properties.oracle_constant * table.dx;
                let r = PropertyReport::new(
                    name,
                    (bound - table.l1_error) / bound,
                    0.0,
                    format!("max|diff|={:.3e}", table.max_diff),
                )
                .with_value(table.l1_error);
                out.push("m0", r);
                out.oracle = Some(table);
            }
            (Model::Lorentzian { spacetime, flux, .. }, Check::FoliationContraction) => {
                if members.len() < 2 {
                    out.push(
                        "run",
                        PropertyReport::not_applicable(name, "needs at least two initial data"),
                    );
                }
                for (i, j) in pairs(members.len()) {
                    out.push(
                        format!("m{i}-m{j}"),
                        foliation_contraction_check(&members[i], &members[j], spacetime, flux)?,
                    );
                    let values = foliation_distances(&members[i], &members[j], spacetime, flux)?;
                    out.distances.push(DistanceSeries {
                        a: i,
                        b: j,
                        kind: "foliation",
                        values,
                    });
                }
            }
            (Model::Lorentzian { spacetime, flux, mesh }, Check::Timelike) => {
                let xs: Vec<f64> = mesh.cells().iter().map(|c| c.center[0]).collect();
                let (lo, hi) = data_range(members);
                let us: Vec<f64> = (0..=16).map(|j| lo + (hi - lo) * j as f64 / 16.0).collect();
                let m = check_timelike(flux, spacetime, &xs, &us);
                let mut r =
                    PropertyReport::new(name, -m.worst, 0.0, format!("x={} u={}", m.x, m.u)).with_value(m.worst);
                r.pass = m.is_timelike();
                out.push("run", r);
            }
            (Model::Riemannian { .. }, _) => out.push(
                "run",
                PropertyReport::not_applicable(name, "needs a Lorentzian scenario"),
            ),
            (Model::Lorentzian { .. }, _) => out.push(
                "run",
                PropertyReport::not_applicable(name, "not defined for Lorentzian runs"),
            ),
        }
    }
    Ok(out)
}

/// Everything a completed run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub model: Model,
    pub members: Vec<SolutionTrajectory>,
    pub verification: Verification,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.verification.pass()
    }
}

/// Builds, simulates and verifies a scenario without touching the disk.
pub fn execute(s: &Scenario) -> Result<RunOutcome> {
    let model = build_model(s)?;
    let members = simulate(s, &model)?;
    let mut verification = verify(s, &model, &members)?;
    if s.solver.method == Method::Oracle && verification.oracle.is_none() {
        verification.oracle = Some(oracle_table(s, &members[0])?);
    }
    Ok(RunOutcome {
        scenario: s.clone(),
        model,
        members,
        verification,
    })
}

pub fn mesh_csv(mesh: &ManifoldMesh) -> String {
    let mut out = String::from("cell,i,j,x0,x1,volume\n");
    for (k, c) in mesh.cells().iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{}",
            c.index[0],
            c.index[1],
            num(c.center[0]),
            num(c.center[1]),
            num(c.volume)
        );
    }
    out
}

fn meta_csv(m: &RunMetadata) -> String {
    format!(
        "key,value\nscheme,{}\nvariant,{}\nflux,{}\ncompatible,{}\nepsilon,{}\ncfl,{}\nmonotone,{}\n",
        m.scheme,
        m.variant,
        m.flux,
        m.compatible,
        num(m.epsilon),
        num(m.cfl),
        m.monotone
    )
}

fn trajectory_csv(t: &SolutionTrajectory) -> String {
    let mut out = String::from("snapshot,step,time,cell,u\n");
    for (k, s) in t.snapshots.iter().enumerate() {
        let time = num(s.time);
        for (i, v) in s.values.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{time},{i},{}", s.step, num(*v));
        }
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn report_csv(v: &Verification) -> String {
    let mut out = String::from("subject,check,applicable,pass,margin,tolerance,value,location\n");
    for r in &v.reports {
        let p = &r.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.subject,
            p.name,
            p.applicable,
            p.pass,
            num(p.margin),
            num(p.tolerance),
            p.value.map(num).unwrap_or_default(),
            quote(&p.location)
        );
    }
    out
}

/// Human-readable report with a final verdict line.
pub fn report_text(name: &str, v: &Verification) -> String {
    let mut out = format!("scenario {name}\n");
    for r in &v.reports {
        let _ = writeln!(out, "{:<8} {}", r.subject, r.report);
    }
    if let Some(o) = &v.oracle {
        let _ = writeln!(
            out,
            "oracle   t={} L1 error {:.6e} max|diff| {:.6e} dx {:.6e}",
            o.time, o.l1_error, o.max_diff, o.dx
        );
    }
    let _ = writeln!(out, "verdict  {}", if v.pass() { "PASS" } else { "FAIL" });
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(Error::from)
}

/// Removes artifacts a previous run of the same scenario may have left.
fn clear_previous(dir: &Path) -> Result<()> {
    for f in [
        "error.txt",
        "oracle.csv",
        "distances.csv",
        "report.csv",
        "report.txt",
        "norms.csv",
    ] {
        let p = dir.join(f);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    let mut k = 0;
    while dir.join(format!("member_{k}")).is_dir() {
        fs::remove_dir_all(dir.join(format!("member_{k}")))?;
        k += 1;
    }
    Ok(())
}

pub fn write_outcome(dir: &Path, o: &RunOutcome) -> Result<()> {
    let first = &o.members[0];
    write(&dir.join("meta.csv"), &meta_csv(&first.metadata))?;
    let mut steps = String::from("step,dt\n");
    for (k, dt) in first.steps.iter().enumerate() {
        let _ = writeln!(steps, "{},{}", k + 1, num(*dt));
    }
    write(&dir.join("steps.csv"), &steps)?;
    let mut index = String::from("snapshot,step,time\n");
    for (k, s) in first.snapshots.iter().enumerate() {
        let _ = writeln!(index, "{k},{},{}", s.step, num(s.time));
    }
    write(&dir.join("index.csv"), &index)?;
    let mut norms = String::from("member,snapshot,time,l1,l2,linf,tv\n");
    for (m, t) in o.members.iter().enumerate() {
        let member_dir = dir.join(format!("member_{m}"));
        fs::create_dir_all(&member_dir)?;
        write(&member_dir.join("trajectory.csv"), &trajectory_csv(t))?;
        for (k, row) in t.norm_series().iter().enumerate() {
            let _ = writeln!(
                norms,
                "{m},{k},{},{},{},{},{}",
                num(row[0]),
                num(row[1]),
                num(row[2]),
                num(row[3]),
                num(row[4])
            );
        }
    }
    write(&dir.join("norms.csv"), &norms)?;
    let v = &o.verification;
    if !v.distances.is_empty() {
        let mut d = String::from("a,b,kind,time,distance\n");
        for s in &v.distances {
            for (t, x) in &s.values {
                let _ = writeln!(d, "{},{},{},{},{}", s.a, s.b, s.kind, num(*t), num(*x));
            }
        }
        write(&dir.join("distances.csv"), &d)?;
    }
    if let Some(table) = &v.oracle {
        write(&dir.join("oracle.csv"), &oracle_csv(table))?;
    }
    write(&dir.join("report.csv"), &report_csv(v))?;
    write(&dir.join("report.txt"), &report_text(&o.scenario.name, v))?;
    Ok(())
}

pub fn oracle_csv(table: &OracleTable) -> String {
    let mut out = String::from("x,u_exact,u_fv,abs_diff\n");
    for r in &table.rows {
        let _ = writeln!(out, "{},{},{},{}", num(r[0]), num(r[1]), num(r[2]), num(r[3]));
    }
    out
}

/// Result of [`run_scenario`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub directory: PathBuf,
    pub pass: bool,
    pub report: String,
}

/// Runs a scenario and writes its artifacts under `root`. A solver abort
/// leaves `error.txt` in the run directory and is returned as the error.
pub fn run_scenario(s: &Scenario, root: &Path) -> Result<RunSummary> {
    let model = build_model(s)?;
    let dir = root.join(&s.output);
    fs::create_dir_all(&dir)?;
    clear_previous(&dir)?;
    write(&dir.join("scenario.cfg"), &serialize_scenario(s))?;
    write(&dir.join("mesh.csv"), &mesh_csv(model.mesh()))?;
    let outcome = simulate(s, &model).and_then(|members| {
        let mut verification = verify(s, &model, &members)?;
        if s.solver.method == Method::Oracle && verification.oracle.is_none() {
            verification.oracle = Some(oracle_table(s, &members[0])?);
        }
        Ok(RunOutcome {
            scenario: s.clone(),
            model: model.clone(),
            members,
            verification,
        })
    });
    match outcome {
        Ok(o) => {
            write_outcome(&dir, &o)?;
            Ok(RunSummary {
                directory: dir,
                pass: o.pass(),
                report: report_text(&s.name, &o.verification),
            })
        }
        Err(e) => {
            write(&dir.join("error.txt"), &format!("scenario {}\nerror: {e}\n", s.name))?;
            Err(e)
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&fs::read_to_string(path)?)
}

fn data_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Reads a CSV with a header, returning the rows split on commas.
fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| data_error(path, e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(data_error(path, format!("expected header `{header}`")));
    }
    Ok(lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn field<T: std::str::FromStr>(path: &Path, row: &[String], i: usize) -> Result<T> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| data_error(path, format!("bad column {i} in row `{}`", row.join(","))))
}

fn read_trajectory_values(path: &Path, cells: usize) -> Result<Vec<Snapshot>> {
    let mut snaps: Vec<Snapshot> = Vec::new();
    for row in read_rows(path, "snapshot,step,time,cell,u")? {
        let k: usize = field(path, &row, 0)?;
        let cell: usize = field(path, &row, 3)?;
        if k == snaps.len() {
            snaps.push(Snapshot {
                step: field(path, &row, 1)?,
                time: field(path, &row, 2)?,
                values: Vec::with_capacity(cells),
            });
        }
        if k + 1 != snaps.len() {
            return Err(data_error(path, "snapshots out of order"));
        }
        let snap = snaps.last_mut().expect("pushed above");
        if cell != snap.values.len() {
            return Err(data_error(path, format!("cells out of order at snapshot {k}")));
        }
        snap.values.push(field(path, &row, 4)?);
    }
    if snaps.is_empty() {
        return Err(data_error(path, "no snapshots"));
    }
    if let Some(s) = snaps.iter().find(|s| s.values.len() != cells) {
        return Err(data_error(
            path,
            format!(
                "snapshot at t={} has {} cells, mesh has {cells}",
                s.time,
                s.values.len()
            ),
        ));
    }
    Ok(snaps)
}

/// A run reloaded from its output directory.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub scenario: Scenario,
    pub model: Model,
    pub members: Vec<SolutionTrajectory>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let scenario = load_scenario(&dir.join("scenario.cfg"))?;
    let model = build_model(&scenario)?;
    let mesh = model.mesh().clone();
    let meta_path = dir.join("meta.csv");
    let meta: Vec<Vec<String>> = fs::read_to_string(&meta_path)
        .map_err(|e| data_error(&meta_path, e.to_string()))?
        .lines()
        .skip(1)
        .map(|l| l.splitn(2, ',').map(str::to_string).collect())
        .collect();
    let get = |key: &str| -> Result<String> {
        meta.iter()
            .find(|r| r[0] == key)
            .and_then(|r| r.get(1).cloned())
            .ok_or_else(|| data_error(&meta_path, format!("missing key `{key}`")))
    };
    let parse_f = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| data_error(&meta_path, format!("bad `{key}`")))
    };
    let metadata = RunMetadata {
        scheme: get("scheme")?,
        variant: get("variant")?,
        flux: get("flux")?,
        compatible: get("compatible")? == "true",
        epsilon: parse_f("epsilon")?,
        cfl: parse_f("cfl")?,
        monotone: get("monotone")? == "true",
    };
    let steps_path = dir.join("steps.csv");
    let steps = read_rows(&steps_path, "step,dt")?
        .iter()
        .map(|r| field::<f64>(&steps_path, r, 1))
        .collect::<Result<Vec<f64>>>()?;
    let mut members = Vec::new();
    while dir.join(format!("member_{}", members.len())).is_dir() {
        let path = dir.join(format!("member_{}", members.len())).join("trajectory.csv");
        let snapshots = read_trajectory_values(&path, mesh.len())?;
        members.push(SolutionTrajectory {
            mesh: mesh.clone(),
            metadata: metadata.clone(),
            snapshots,
            steps: steps.clone(),
        });
    }
    if members.is_empty() {
        return Err(data_error(dir, "no member_<k> directories"));
    }
    Ok(LoadedRun {
        scenario,
        model,
        members,
    })
}

/// Reruns the property checks on a stored run.
pub fn verify_run(dir: &Path) -> Result<(LoadedRun, Verification)> {
    let run = load_run(dir)?;
    let v = verify(&run.scenario, &run.model, &run.members)?;
    Ok((run, v))
}

/// Cell centres and volumes from a `mesh.csv`.
fn read_mesh(path: &Path) -> Result<Vec<[f64; 3]>> {
    read_rows(path, "cell,i,j,x0,x1,volume")?
        .iter()
        .map(|r| Ok([field(path, r, 3)?, field(path, r, 4)?, field(path, r, 5)?]))
        .collect()
}

/// Locates `trajectory.csv` and the run's `mesh.csv` from a file, a member
/// directory or a run directory (which selects `member_0`).
fn resolve_trajectory(path: &Path) -> Result<(PathBuf, PathBuf)> {
    let file = if path.is_file() {
        path.to_path_buf()
    } else if path.join("trajectory.csv").is_file() {
        path.join("trajectory.csv")
    } else if path.join("member_0").join("trajectory.csv").is_file() {
        path.join("member_0").join("trajectory.csv")
    } else {
        return Err(data_error(path, "no trajectory.csv found"));
    };
    let mesh = file
        .parent()
        .and_then(Path::parent)
        .map(|d| d.join("mesh.csv"))
        .filter(|m| m.is_file())
        .ok_or_else(|| data_error(&file, "no mesh.csv in the run directory"))?;
    Ok((file, mesh))
}

/// `‖a(t) − b(t)‖_{L^p(dV_g)}` at every snapshot time the two trajectories
/// share. Both must live on the same mesh.
pub fn compare(a: &Path, b: &Path, p: f64) -> Result<Vec<(f64, f64)>> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be at least 1, got {p}")));
    }
    let (fa, ma) = resolve_trajectory(a)?;
    let (fb, mb) = resolve_trajectory(b)?;
    let mesh_a = read_mesh(&ma)?;
    let mesh_b = read_mesh(&mb)?;
    let same = mesh_a.len() == mesh_b.len()
        && mesh_a
            .iter()
            .zip(&mesh_b)
            .all(|(x, y)| x.iter().zip(y).all(|(u, v)| (u - v).abs() <= 1e-12 * u.abs().max(1.0)));
    if !same {
        return Err(Error::Mismatch(format!(
            "meshes differ: {} has {} cells, {} has {}",
            ma.display(),
            mesh_a.len(),
            mb.display(),
            mesh_b.len()
        )));
    }
    let sa = read_trajectory_values(&fa, mesh_a.len())?;
    let sb = read_trajectory_values(&fb, mesh_b.len())?;
    let mut out = Vec::new();
    for x in &sa {
        let Some(y) = sb
            .iter()
            .find(|y| (y.time - x.time).abs() <= 1e-12 * x.time.abs().max(1.0))
        else {
            continue;
        };
        let d = if p.is_infinite() {
            x.values
                .iter()
                .zip(&y.values)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max)
        } else {
            let s: f64 = x
                .values
                .iter()
                .zip(&y.values)
                .zip(&mesh_a)
                .map(|((u, v), c)| c[2] * (u - v).abs().powf(p))
                .sum();
            s.powf(1.0 / p)
        };
        out.push((x.time, d));
    }
    if out.is_empty() {
        return Err(Error::Mismatch("the trajectories share no snapshot times".into()));
    }
    Ok(out)
}
