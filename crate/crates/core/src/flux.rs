//! Flux families `f_x(ū) = h(ū) V(x)` and their entropy pairs.
//!
//! Every built-in flux has this product form: a polynomial nonlinearity `h`
//! and a tangent field `V`. The flux is geometry-compatible exactly when
//! `div V = 0`. Entropy fluxes inherit the form: `F_x(ū) = G(ū) V(x)` with
//! `G(ū) = ∫_0^ū U'(w) h'(w) dw`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{self, ChartKind, Fourier1d, MetricChart, Point, Vector};
use crate::mesh::{Face, ManifoldMesh};
use crate::poly::Polynomial;
use crate::quadrature::GaussLegendre;

/// Divergence threshold for accepting a field as divergence free.
pub const COMPATIBILITY_THRESHOLD: f64 = 1e-10;

/// Default Gauss–Legendre order for entropy fluxes.
pub const DEFAULT_QUADRATURE_ORDER: usize = 8;

type FieldFn = dyn Fn(&Point) -> Vector + Send + Sync;

/// A named smooth tangent field given by its contravariant components.
#[derive(Clone)]
pub struct TangentField {
    name: String,
    eval: Arc<FieldFn>,
}

impl fmt::Debug for TangentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TangentField").field("name", &self.name).finish()
    }
}

impl TangentField {
    pub fn new(name: impl Into<String>, eval: impl Fn(&Point) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at(&self, x: &Point) -> Vector {
        (self.eval)(x)
    }

    /// `V = d / √|g|`. Divergence free on every chart whose volume density
    /// is independent of the coordinate along which `d` points, which covers
    /// the circles and tori.
    pub fn constant_density(chart: &MetricChart, direction: Vector) -> Self {
        let c = chart.clone();
        Self::new(format!("constant({}, {})", direction[0], direction[1]), move |x| {
            let s = c.sqrt_det(x);
            [direction[0] / s, direction[1] / s]
        })
    }

    /// Rotation about the band axis, `speed · ∂_φ`.
    pub fn zonal(speed: f64) -> Self {
        Self::new(format!("zonal({speed})"), move |_| [0.0, speed])
    }

    /// `(sin(2π x¹/P), sin(2π x⁰/P))` on a flat torus of period `P`.
    pub fn shear(period: f64) -> Self {
        let w = 2.0 * std::f64::consts::PI / period;
        Self::new("shear", move |x| [(w * x[1]).sin(), (w * x[0]).sin()])
    }

    /// Unit coordinate field `∂_0`.
    pub fn coordinate() -> Self {
        Self::new("coordinate", |_| [1.0, 0.0])
    }
}

/// `f_x(ū) = h(ū) V(x)` on a chart.
#[derive(Clone, Debug)]
pub struct FluxFamily {
    name: String,
    chart: MetricChart,
    nonlinearity: Polynomial,
    field: TangentField,
    compatible: bool,
}

impl FluxFamily {
    /// Builds a flux without checking compatibility.
    pub fn new(
        name: impl Into<String>,
        chart: MetricChart,
        nonlinearity: Polynomial,
        field: TangentField,
        compatible: bool,
    ) -> Self {
        Self {
            name: name.into(),
            chart,
            nonlinearity,
            field,
            compatible,
        }
    }

    /// `f ≡ 0`.
    pub fn zero(chart: MetricChart) -> Self {
        Self::new("zero", chart, Polynomial::zero(), TangentField::coordinate(), true)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &MetricChart {
        &self.chart
    }

    pub fn nonlinearity(&self) -> &Polynomial {
        &self.nonlinearity
    }

    pub fn field(&self) -> &TangentField {
        &self.field
    }

    pub fn is_compatible(&self) -> bool {
        self.compatible
    }

    pub fn evaluate(&self, x: &Point, u: f64) -> Vector {
        let h = self.nonlinearity.value(u);
        let v = self.field.at(x);
        [h * v[0], h * v[1]]
    }

    pub fn du_evaluate(&self, x: &Point, u: f64) -> Vector {
        let h = self.nonlinearity.d1(u);
        let v = self.field.at(x);
        [h * v[0], h * v[1]]
    }

    /// `div V` at `x` by central differences.
    pub fn field_divergence(&self, x: &Point) -> Result<f64> {
        geometry::divergence(&self.chart, |y| self.field.at(y), x)
    }

    /// Divergence of `x ↦ f_x(ū)` with `ū` frozen.
    pub fn frozen_divergence(&self, x: &Point, u: f64) -> Result<f64> {
        geometry::divergence(&self.chart, |y| self.evaluate(y, u), x)
    }

    /// `max |f_x(ū)|_g / (1 + |ū|)` over `points` and `u_values`: the
    /// smallest linear-growth constant consistent with the samples.
    pub fn growth_constant(&self, points: &[Point], u_values: &[f64]) -> f64 {
        let mut c0: f64 = 0.0;
        for x in points {
            for &u in u_values {
                let f = self.evaluate(x, u);
                c0 = c0.max(self.chart.norm(x, &f) / (1.0 + u.abs()));
            }
        }
        c0
    }

    /// Bound on `|∂_u f|_g` for states in `[lo, hi]`, over `points`.
    pub fn speed_bound(&self, points: &[Point], lo: f64, hi: f64) -> f64 {
        let dh = self.nonlinearity.max_abs_derivative(lo, hi);
        let vmax = points
            .iter()
            .map(|x| self.chart.norm(x, &self.field.at(x)))
            .fold(0.0, f64::max);
        dh * vmax
    }

    /// Bound on the coordinate speed `max_j |∂_u f^j|` for states in `[lo, hi]`.
    pub fn coordinate_speed_bound(&self, points: &[Point], lo: f64, hi: f64) -> f64 {
        let dh = self.nonlinearity.max_abs_derivative(lo, hi);
        let vmax = points
            .iter()
            .map(|x| {
                let v = self.field.at(x);
                v[0].abs().max(v[1].abs())
            })
            .fold(0.0, f64::max);
        dh * vmax
    }

    /// `g(f_face(ū), ν)` at a face.
    pub fn normal_flux(&self, face: &Face, u: f64) -> f64 {
        self.nonlinearity.value(u) * self.normal_coefficient(face)
    }

    /// `g(V(face), ν)`, so that `f_ν(ū) = h(ū) · coefficient`.
    pub fn normal_coefficient(&self, face: &Face) -> f64 {
        self.chart
            .inner(&face.center, &self.field.at(&face.center), &face.normal)
    }
}

/// Uniform `n`-per-axis sample grid over the chart's coordinate box.
pub fn sample_points(chart: &MetricChart, n: usize) -> Vec<Point> {
    let axes = chart.axes();
    let mut out = Vec::new();
    let n1 = if chart.dim() == 2 { n } else { 1 };
    for j in 0..n1 {
        for i in 0..n {
            let mut x = [0.0; 2];
            x[0] = axes[0].lo + (i as f64 + 0.5) * axes[0].length() / n as f64;
            if chart.dim() == 2 {
                x[1] = axes[1].lo + (j as f64 + 0.5) * axes[1].length() / n as f64;
            }
            out.push(x);
        }
    }
    out
}

/// `f_x(ū) = h(ū) V(x)` after checking `|div V| ≤ 1e-10` on a 32-per-axis grid.
pub fn make_compatible_flux(
    name: impl Into<String>,
    chart: MetricChart,
    field: TangentField,
    h: Polynomial,
) -> Result<FluxFamily> {
    let mut worst = (0.0, [0.0; 2]);
    for x in sample_points(&chart, 32) {
        let d = geometry::divergence(&chart, |y| field.at(y), &x)?.abs();
        if d > worst.0 {
            worst = (d, x);
        }
    }
    if worst.0 > COMPATIBILITY_THRESHOLD {
        return Err(Error::NotDivergenceFree {
            residual: worst.0,
            point: worst.1,
        });
    }
    Ok(FluxFamily::new(name, chart, h, field, true))
}

/// Flux of `∂_t u + (1/k) ∂_x(k f(u)) = 0` on the circle with metric `k² dx²`.
pub fn make_weighted_flux_1d(k: Fourier1d, f: Polynomial) -> Result<FluxFamily> {
    let compatible = k.is_constant();
    let chart = MetricChart::weighted_circle(k)?;
    Ok(FluxFamily::new(
        "weighted_1d",
        chart,
        f,
        TangentField::coordinate(),
        compatible,
    ))
}

/// `max |div_x f_x(ū)|` over cell centres and `u_samples`.
pub fn verify_compatibility(flux: &FluxFamily, mesh: &ManifoldMesh, u_samples: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for cell in mesh.cells() {
        for &u in u_samples {
            worst = worst.max(flux.frozen_divergence(&cell.center, u)?.abs());
        }
    }
    Ok(worst)
}

/// Convex entropies.
#[derive(Clone, Debug, PartialEq)]
pub enum Entropy {
    Zero,
    /// `U = ū`
    Linear,
    /// `U = ū²`
    Square,
    /// `U = |ū − κ|`
    Kruzkov(f64),
    /// Convex polynomial.
    Polynomial(Polynomial),
}

impl Entropy {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Entropy::Zero => 0.0,
            Entropy::Linear => u,
            Entropy::Square => u * u,
            Entropy::Kruzkov(k) => (u - k).abs(),
            Entropy::Polynomial(p) => p.value(u),
        }
    }

    /// `U'`, with `sgn(0) = 0` for the Kruzkov kink.
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Entropy::Zero => 0.0,
            Entropy::Linear => 1.0,
            Entropy::Square => 2.0 * u,
            Entropy::Kruzkov(k) => sgn(u - k),
            Entropy::Polynomial(p) => p.d1(u),
        }
    }

    pub fn kink(&self) -> Option<f64> {
        match self {
            Entropy::Kruzkov(k) => Some(*k),
            _ => None,
        }
    }
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// How the entropy flux is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyFluxForm {
    /// Gauss–Legendre integral from `0`.
    Quadrature,
    /// `sgn(ū−κ)(f(ū)−f(κ))`; Kruzkov entropies only.
    KruzkovClosed,
}

#[derive(Clone, Debug)]
pub struct EntropyPair {
    pub entropy: Entropy,
    pub flux: FluxFamily,
    pub form: EntropyFluxForm,
    quadrature: GaussLegendre,
}

impl EntropyPair {
    pub fn new(entropy: Entropy, flux: FluxFamily, order: usize) -> Result<Self> {
        if order < 5 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be at least 5, got {order}"
            )));
        }
        Ok(Self {
            entropy,
            flux,
            form: EntropyFluxForm::Quadrature,
            quadrature: GaussLegendre::new(order),
        })
    }

    pub fn order(&self) -> usize {
        self.quadrature.order()
    }

    pub fn value(&self, u: f64) -> f64 {
        self.entropy.value(u)
    }

    /// Scalar factor `G(ū)` with `F_x(ū) = G(ū) V(x)`.
    pub fn flux_factor(&self, u: f64) -> f64 {
        let h = self.flux.nonlinearity();
        match (self.form, &self.entropy) {
            (EntropyFluxForm::KruzkovClosed, Entropy::Kruzkov(k)) => sgn(u - k) * (h.value(u) - h.value(*k)),
            _ => {
                let integrand = |w: f64| self.entropy.derivative(w) * h.d1(w);
                match self.entropy.kink() {
                    Some(k) if (k - 0.0) * (k - u) < 0.0 => {
                        self.quadrature.integrate(0.0, k, integrand) + self.quadrature.integrate(k, u, integrand)
                    }
                    _ => self.quadrature.integrate(0.0, u, integrand),
                }
            }
        }
    }

    /// `F_x(ū)`.
    pub fn flux_at(&self, x: &Point, u: f64) -> Vector {
        let g = self.flux_factor(u);
        let v = self.flux.field().at(x);
        [g * v[0], g * v[1]]
    }
}

/// `F_x(ū) = ∫_0^ū U'(w) ∂_w f_x(w) dw` by Gauss–Legendre quadrature of the
/// given order, split at the kink of a Kruzkov entropy.
pub fn entropy_flux(flux: &FluxFamily, entropy: &Entropy, order: usize, x: &Point, u: f64) -> Result<Vector> {
    Ok(EntropyPair::new(entropy.clone(), flux.clone(), order)?.flux_at(x, u))
}

/// Kruzkov pair `(|ū−κ|, sgn(ū−κ)(f_x(ū)−f_x(κ)))` in closed form.
pub fn kruzkov_pair(flux: &FluxFamily, kappa: f64) -> EntropyPair {
    let mut pair = EntropyPair::new(Entropy::Kruzkov(kappa), flux.clone(), DEFAULT_QUADRATURE_ORDER)
        .expect("default order is valid");
    pair.form = EntropyFluxForm::KruzkovClosed;
    pair
}

/// `(F_x(ū), (div F)(ū))`: the entropy flux and its frozen-state divergence,
/// the extra source in the entropy inequality for non-compatible fluxes.
pub fn general_entropy_residual_terms(pair: &EntropyPair, x: &Point, u: f64) -> Result<(Vector, f64)> {
    let g = pair.flux_factor(u);
    let v = pair.flux.field().at(x);
    let div = if g == 0.0 {
        0.0
    } else {
        g * pair.flux.field_divergence(x)?
    };
    Ok(([g * v[0], g * v[1]], div))
}

/// `k'(x)/k(x)` on a weighted circle, else `None`.
pub fn weight_log_derivative(chart: &MetricChart, x: f64) -> Option<f64> {
    match chart.kind() {
        ChartKind::WeightedCircle { k } => Some(k.derivative(x) / k.value(x)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn k_profile() -> Fourier1d {
        Fourier1d::new(2.0, vec![1.0], vec![])
    }

    fn burgers_torus() -> FluxFamily {
        let chart = MetricChart::flat_torus(1.0).unwrap();
        let v = TangentField::constant_density(&chart, [1.0, 0.5]);
        make_compatible_flux("burgers", chart, v, Polynomial::burgers()).unwrap()
    }

    #[test]
    fn compatible_constructions_have_zero_residual() {
        let f = burgers_torus();
        let mesh = ManifoldMesh::new(f.chart().clone(), &[16, 16]).unwrap();
        let us: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        assert!(verify_compatibility(&f, &mesh, &us).unwrap() <= 1e-12);

        let band = MetricChart::sphere_band(PI / 3.0).unwrap();
        assert!(make_compatible_flux("zonal", band, TangentField::zonal(1.0), Polynomial::linear()).is_ok());

        let torus = MetricChart::flat_torus(2.0 * PI).unwrap();
        let shear = make_compatible_flux("shear", torus, TangentField::shear(2.0 * PI), Polynomial::cubic()).unwrap();
        let mesh = ManifoldMesh::new(shear.chart().clone(), &[32, 32]).unwrap();
        assert!(verify_compatibility(&shear, &mesh, &us).unwrap() <= 1e-10);

        let wavy = MetricChart::wavy_torus(2.0 * PI).unwrap();
        let v = TangentField::constant_density(&wavy, [1.0, -1.0]);
        assert!(make_compatible_flux("wavy", wavy, v, Polynomial::burgers()).is_ok());
    }

    #[test]
    fn rejects_divergent_field_with_location() {
        let band = MetricChart::sphere_band(PI / 3.0).unwrap();
        let meridional = TangentField::new("meridional", |_| [1.0, 0.0]);
        match make_compatible_flux("bad", band, meridional, Polynomial::linear()) {
            Err(Error::NotDivergenceFree { residual, point }) => {
                // div(∂_θ) = −tanθ, largest at the outermost sample
                assert!(residual > 1.0);
                assert!(point[0].abs() > 1.0);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn weighted_flux_divergence_closed_form() {
        let f = make_weighted_flux_1d(k_profile(), Polynomial::burgers()).unwrap();
        assert!(!f.is_compatible());
        for i in 0..10 {
            let x = 0.05 + 0.1 * i as f64;
            let u = 1.3;
            let k = 2.0 + (2.0 * PI * x).sin();
            let kp = 2.0 * PI * (2.0 * PI * x).cos();
            let got = f.frozen_divergence(&[x, 0.0], u).unwrap();
            assert!((got - u * u * kp / (2.0 * k)).abs() < 1e-8, "x={x}");
            assert!(f.frozen_divergence(&[x, 0.0], 0.0).unwrap().abs() < 1e-14);
        }
        let mesh = ManifoldMesh::new(f.chart().clone(), &[32]).unwrap();
        assert!(verify_compatibility(&f, &mesh, &[1.0]).unwrap() > 0.1);
        let classical = make_weighted_flux_1d(Fourier1d::constant(1.0), Polynomial::burgers()).unwrap();
        assert!(classical.is_compatible());
        assert_eq!(
            verify_compatibility(&FluxFamily::zero(MetricChart::flat_circle(1.0).unwrap()), &mesh, &[1.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn du_evaluate_matches_finite_differences() {
        let f = burgers_torus();
        for x in sample_points(f.chart(), 4) {
            for u in [-1.5, -0.2, 0.7, 2.0] {
                let h = 1e-6;
                let a = f.evaluate(&x, u + h);
                let b = f.evaluate(&x, u - h);
                let d = f.du_evaluate(&x, u);
                for j in 0..2 {
                    let fd = (a[j] - b[j]) / (2.0 * h);
                    assert!((fd - d[j]).abs() <= 1e-6 * d[j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn entropy_flux_examples() {
        let chart = MetricChart::flat_torus(1.0).unwrap();
        let v = TangentField::constant_density(&chart, [0.3, -0.7]);
        let transport = make_compatible_flux("t", chart, v, Polynomial::linear()).unwrap();
        let x = [0.2, 0.9];
        // U = ū: F = f(ū) − f(0)
        let burgers = burgers_torus();
        let f = entropy_flux(&burgers, &Entropy::Linear, 5, &x, 1.7).unwrap();
        let e = burgers.evaluate(&x, 1.7);
        assert!((f[0] - e[0]).abs() < 1e-14 && (f[1] - e[1]).abs() < 1e-14);
        // U = ū², f = ū V: the integrand is 2w, so F = ū² V
        let u: f64 = 1.3;
        let f = entropy_flux(&transport, &Entropy::Square, 5, &x, u).unwrap();
        assert!((f[0] - u * u * 0.3).abs() < 1e-14);
        // Kruzkov: quadrature = closed(ū) − closed(0)
        for (u, k) in [(1.5, 0.4), (-0.3, 0.4), (0.9, -1.1), (-2.0, -0.5)] {
            let q = entropy_flux(&burgers, &Entropy::Kruzkov(k), 5, &x, u).unwrap();
            let c = kruzkov_pair(&burgers, k);
            let a = c.flux_at(&x, u);
            let b = c.flux_at(&x, 0.0);
            assert!((q[0] - (a[0] - b[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn square_entropy_with_burgers_matches_analytic_integral() {
        // ∫_0^ū 2w · w dw = 2ū³/3
        let f = burgers_torus();
        let pair = EntropyPair::new(Entropy::Square, f, 5).unwrap();
        for u in [-1.2, 0.0, 0.8, 2.5] {
            assert!((pair.flux_factor(u) - 2.0 * u * u * u / 3.0).abs() < 1e-13);
        }
        assert!(EntropyPair::new(Entropy::Square, burgers_torus(), 4).is_err());
    }

    #[test]
    fn kruzkov_pair_examples() {
        let f = burgers_torus();
        let pair = kruzkov_pair(&f, 0.5);
        assert_eq!(pair.value(0.5), 0.0);
        assert_eq!(pair.flux_factor(0.5), 0.0);
        assert!((pair.flux_factor(2.0) - (4.0 - 0.25) / 2.0).abs() < 1e-15);
        assert_eq!(kruzkov_pair(&f, 2.0).value(0.5), pair.value(2.0));
    }

    #[test]
    fn general_terms() {
        let f = burgers_torus();
        let pair = EntropyPair::new(Entropy::Square, f, 6).unwrap();
        let (_, div) = general_entropy_residual_terms(&pair, &[0.3, 0.6], 1.4).unwrap();
        assert!(div.abs() <= 1e-8);

        let w = make_weighted_flux_1d(k_profile(), Polynomial::burgers()).unwrap();
        let kappa = 0.3;
        let pair = kruzkov_pair(&w, kappa);
        for (x, u) in [(0.1, 1.2), (0.6, -0.4), (0.85, 0.0)] {
            let (_, div) = general_entropy_residual_terms(&pair, &[x, 0.0], u).unwrap();
            let k = 2.0 + (2.0 * PI * x).sin();
            let kp = 2.0 * PI * (2.0 * PI * x).cos();
            let closed = sgn(u - kappa) * (u * u / 2.0 - kappa * kappa / 2.0) * kp / k;
            assert!((div - closed).abs() < 1e-8);
        }
        let zero = EntropyPair::new(Entropy::Zero, w, 5).unwrap();
        assert_eq!(
            general_entropy_residual_terms(&zero, &[0.4, 0.0], 0.7).unwrap(),
            ([0.0, 0.0], 0.0)
        );
    }

    #[test]
    fn growth_constant_bounds_samples() {
        let f = burgers_torus();
        let pts = sample_points(f.chart(), 8);
        let us: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
        let c0 = f.growth_constant(&pts, &us);
        for x in &pts {
            for &u in &us {
                assert!(f.chart().norm(x, &f.evaluate(x, u)) <= c0 * (1.0 + u.abs()) + 1e-15);
            }
        }
    }
}
