use std::sync::Arc;

use curvlaw_core::flux::{make_compatible_flux, make_weighted_flux_1d, FluxFamily, TangentField};
use curvlaw_core::fv::{FvSolver, NumericalFlux};
use curvlaw_core::geometry::{christoffel, Fourier1d, MetricChart};
use curvlaw_core::mesh::{lp_norm_of, total_variation_of, ManifoldMesh};
use curvlaw_core::poly::{Branch, Polynomial};
use curvlaw_core::scenario::{parse_scenario, serialize_scenario};
use proptest::prelude::*;

const N1: usize = 48;
const N2: usize = 12;

fn torus_solver(nf: NumericalFlux) -> FvSolver {
    let chart = MetricChart::flat_torus(1.0).unwrap();
    let mesh = Arc::new(ManifoldMesh::new(chart.clone(), &[N2, N2]).unwrap());
    let field = TangentField::constant_density(&chart, [0.8, 0.6]);
    let flux = make_compatible_flux("burgers", chart, field, Polynomial::burgers()).unwrap();
    FvSolver::new(mesh, flux, nf).unwrap()
}

fn weighted_solver(nf: NumericalFlux) -> FvSolver {
    let k = Fourier1d::new(2.0, vec![1.0], vec![]);
    let flux: FluxFamily = make_weighted_flux_1d(k.clone(), Polynomial::burgers()).unwrap();
    let mesh = Arc::new(ManifoldMesh::new(MetricChart::weighted_circle(k).unwrap(), &[N1]).unwrap());
    FvSolver::new(mesh, flux, nf).unwrap()
}

fn extent(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
}

fn stable_dt(s: &FvSolver, a: &[f64], b: &[f64]) -> f64 {
    let (lo, hi) = extent(a, b);
    0.9 * s.monotone_limit(lo, hi)
}

fn numerical_flux() -> impl Strategy<Value = NumericalFlux> {
    prop_oneof![Just(NumericalFlux::Rusanov), Just(NumericalFlux::EngquistOsher)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compatible_step_conserves_and_keeps_bounds(
        nf in numerical_flux(),
        u in prop::collection::vec(-2.0f64..2.0, N2 * N2),
    ) {
        let s = torus_solver(nf);
        let dt = stable_dt(&s, &u, &u);
        let v = s.step(&u, dt).unwrap();
        let mesh = s.mesh();
        let (lo, hi) = extent(&u, &u);
        prop_assert!(v.iter().all(|x| *x >= lo - 1e-12 && *x <= hi + 1e-12));
        prop_assert!((mesh.integrate(&u) - mesh.integrate(&v)).abs() <= 1e-12 * (1.0 + mesh.integrate(&u).abs()));
    }

    #[test]
    fn compatible_step_contracts_and_preserves_order(
        nf in numerical_flux(),
        u in prop::collection::vec(-2.0f64..2.0, N2 * N2),
        d in prop::collection::vec(0.0f64..1.0, N2 * N2),
    ) {
        let s = torus_solver(nf);
        let w: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        let dt = stable_dt(&s, &u, &w);
        let (su, sw) = (s.step(&u, dt).unwrap(), s.step(&w, dt).unwrap());
        prop_assert!(su.iter().zip(&sw).all(|(a, b)| a <= &(b + 1e-12)));
        let mesh = s.mesh();
        prop_assert!(mesh.l1_distance(&su, &sw) <= mesh.l1_distance(&u, &w) * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn weighted_step_is_conservative_and_contractive(
        nf in numerical_flux(),
        u in prop::collection::vec(0.5f64..1.5, N1),
        w in prop::collection::vec(0.5f64..1.5, N1),
    ) {
        let s = weighted_solver(nf);
        let dt = stable_dt(&s, &u, &w);
        let (su, sw) = (s.step(&u, dt).unwrap(), s.step(&w, dt).unwrap());
        let mesh = s.mesh();
        prop_assert!((mesh.integrate(&u) - mesh.integrate(&su)).abs() <= 1e-12 * mesh.integrate(&u).abs());
        prop_assert!(mesh.l1_distance(&su, &sw) <= mesh.l1_distance(&u, &w) * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn flat_circle_step_does_not_increase_variation(
        nf in numerical_flux(),
        u in prop::collection::vec(-2.0f64..2.0, N1),
    ) {
        let chart = MetricChart::flat_circle(1.0).unwrap();
        let mesh = Arc::new(ManifoldMesh::new(chart, &[N1]).unwrap());
        let flux = make_compatible_flux("burgers", mesh.chart().clone(), TangentField::coordinate(), Polynomial::burgers()).unwrap();
        let s = FvSolver::new(mesh.clone(), flux, nf).unwrap();
        let v = s.step(&u, stable_dt(&s, &u, &u)).unwrap();
        prop_assert!(total_variation_of(&mesh, &v) <= total_variation_of(&mesh, &u) * (1.0 + 1e-12));
    }

    #[test]
    fn constant_lp_norm_scales_with_volume(c in -5.0f64..5.0, p in prop_oneof![Just(1.0), Just(2.0), Just(3.5), Just(f64::INFINITY)]) {
        let mesh = ManifoldMesh::new(MetricChart::sphere_band(1.2).unwrap(), &[8, 16]).unwrap();
        let u = vec![c; mesh.len()];
        let expected = if p.is_infinite() { c.abs() } else { c.abs() * mesh.total_volume().powf(1.0 / p) };
        prop_assert!((lp_norm_of(&mesh, &u, p).unwrap() - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    #[test]
    fn christoffel_symbols_are_symmetric(s0 in 0.0f64..1.0, s1 in 0.0f64..1.0) {
        for chart in [MetricChart::wavy_torus(1.0).unwrap(), MetricChart::sphere_band(1.2).unwrap()] {
            let [a, b] = chart.axes();
            let x = [a.lo + s0 * a.length(), b.lo + s1 * b.length()];
            let g = christoffel(&chart, &x).unwrap();
            for row in g {
                prop_assert!((row[0][1] - row[1][0]).abs() <= 1e-12 * (1.0 + row[0][1].abs()));
            }
            prop_assert!(chart.min_eigenvalue(&x) > 0.0);
        }
    }

    #[test]
    fn convex_branch_inverse_solves(c0 in -1.0f64..1.0, a in 0.1f64..2.0, b in -1.0f64..1.0, dc in 0.0f64..4.0) {
        let h = Polynomial::new(vec![c0, b, a]);
        let m = h.minimizer().unwrap();
        let c = h.value(m) + dc;
        for branch in [Branch::Minus, Branch::Plus] {
            let v = h.inverse(c, branch).unwrap();
            prop_assert!((h.value(v) - c).abs() <= 1e-9 * (1.0 + c.abs()));
            prop_assert_eq!(h.branch_of(v) == branch || (v - m).abs() < 1e-9, true);
        }
    }

    #[test]
    fn scenario_text_round_trips(
        n in 16usize..512,
        mean in -2.0f64..2.0,
        amp in 0.0f64..2.0,
        wn in 1u32..6,
        cfl in 0.05f64..1.0,
        t_end in 0.01f64..2.0,
    ) {
        let text = format!(
            "name = prop\n[manifold]\nchart = flat_circle\nresolution = {n}\n[flux]\nfamily = compatible\nh = burgers\nfield = coordinate\n\
             [initial]\nprofile = sine\nmean = {mean}\namplitude = {amp}\nwavenumber = {wn}\n\
             [solver]\nmethod = fv\ncfl = {cfl}\nt_end = {t_end}\n"
        );
        let s = parse_scenario(&text).unwrap();
        let again = parse_scenario(&serialize_scenario(&s)).unwrap();
        prop_assert_eq!(&s, &again);
        prop_assert_eq!(serialize_scenario(&s), serialize_scenario(&again));
    }
}
