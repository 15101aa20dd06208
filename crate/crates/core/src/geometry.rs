//! Coordinate-chart differential geometry on one- and two-dimensional
//! manifolds.
//!
//! Every built-in chart carries a diagonal or conformal metric `g_ij(x)`
//! on a box of coordinates; periodic axes close the manifold. Points,
//! vectors and tensors are stored as fixed `[f64; 2]` arrays and one-dimensional
//! charts simply ignore the second slot.
//!
//! ```text
//! Γ^i_{kj} = ½ g^{il} (∂_k g_{lj} + ∂_j g_{kl} − ∂_l g_{kj})
//! div X    = ∂_j X^j + Γ^j_{kj} X^k = |g|^{-1/2} ∂_j (|g|^{1/2} X^j)
//! grad h   = g^{ij} ∂_i h
//! Δ_g h    = g^{ij} (∂_i ∂_j h − Γ^k_{ij} ∂_k h)
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];
pub type Vector = [f64; 2];
pub type Tensor = [[f64; 2]; 2];
/// `symbols[i][k][j]` holds `Γ^i_{kj}`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

/// Relative step used for first derivatives (metric entries, fields).
pub const FIRST_DERIVATIVE_STEP: f64 = 1e-5;
/// Relative step used for second derivatives.
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-4;

/// Periodic profile on `[0, 1)`:
/// `mean + Σ_n sin[n-1]·sin(2πnx) + cos[n-1]·cos(2πnx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fourier1d {
    pub mean: f64,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl Fourier1d {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            sin: Vec::new(),
            cos: Vec::new(),
        }
    }

    pub fn new(mean: f64, sin: Vec<f64>, cos: Vec<f64>) -> Self {
        Self { mean, sin, cos }
    }

    pub fn value(&self, x: f64) -> f64 {
        let mut v = self.mean;
        for (n, a) in self.sin.iter().enumerate() {
            v += a * (2.0 * PI * (n + 1) as f64 * x).sin();
        }
        for (n, b) in self.cos.iter().enumerate() {
            v += b * (2.0 * PI * (n + 1) as f64 * x).cos();
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (n, a) in self.sin.iter().enumerate() {
            let w = 2.0 * PI * (n + 1) as f64;
            v += a * w * (w * x).cos();
        }
        for (n, b) in self.cos.iter().enumerate() {
            let w = 2.0 * PI * (n + 1) as f64;
            v -= b * w * (w * x).sin();
        }
        v
    }

    pub fn is_constant(&self) -> bool {
        self.sin.iter().chain(self.cos.iter()).all(|c| *c == 0.0)
    }

    /// Minimum over 4096 uniform samples.
    pub fn sampled_min(&self) -> f64 {
        (0..4096)
            .map(|i| self.value(i as f64 / 4096.0))
            .fold(f64::INFINITY, f64::min)
    }
}

/// One coordinate axis of a chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChartKind {
    /// Circle of the given length with the flat metric `dx²`.
    FlatCircle { length: f64 },
    /// Unit-length circle with metric `k(x)² dx²`.
    WeightedCircle { k: Fourier1d },
    /// Square torus of side `period` with the flat metric.
    FlatTorus { period: f64 },
    /// Square torus with metric `(1 + ½ sin(2πx¹/P) sin(2πx²/P))² δ_ij`.
    WavyTorus { period: f64 },
    /// Latitude band `θ ∈ [−lat_max, lat_max]`, `φ ∈ [0, 2π)` with metric
    /// `dθ² + cos²θ dφ²`; the band edges are closed by zero normal flux.
    SphereBand { lat_max: f64 },
    /// Closed coordinate interval `[lo, hi]` with the flat metric; used as
    /// the coordinate grid of radial leaves.
    FlatInterval { lo: f64, hi: f64 },
}

/// A coordinate chart with its metric tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricChart {
    kind: ChartKind,
    analytic_derivatives: bool,
}

impl MetricChart {
    pub fn flat_circle(length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "circle length must be positive, got {length}"
            )));
        }
        Ok(Self::from_kind(ChartKind::FlatCircle { length }))
    }

    pub fn weighted_circle(k: Fourier1d) -> Result<Self> {
        let min = k.sampled_min();
        if !(min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight k must be positive, sampled minimum is {min}"
            )));
        }
        Ok(Self::from_kind(ChartKind::WeightedCircle { k }))
    }

    pub fn flat_torus(period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "torus period must be positive, got {period}"
            )));
        }
        Ok(Self::from_kind(ChartKind::FlatTorus { period }))
    }

    pub fn wavy_torus(period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "torus period must be positive, got {period}"
            )));
        }
        Ok(Self::from_kind(ChartKind::WavyTorus { period }))
    }

    pub fn sphere_band(lat_max: f64) -> Result<Self> {
        if !(lat_max > 0.0 && lat_max < PI / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "band half-width must lie in (0, π/2), got {lat_max}"
            )));
        }
        Ok(Self::from_kind(ChartKind::SphereBand { lat_max }))
    }

    pub fn flat_interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "interval needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::from_kind(ChartKind::FlatInterval { lo, hi }))
    }

    fn from_kind(kind: ChartKind) -> Self {
        Self {
            kind,
            analytic_derivatives: true,
        }
    }

    /// Same chart, but metric derivatives are always taken by central
    /// differences.
    pub fn with_numeric_derivatives(mut self) -> Self {
        self.analytic_derivatives = false;
        self
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ChartKind::FlatCircle { .. } => "flat_circle",
            ChartKind::WeightedCircle { .. } => "weighted_circle",
            ChartKind::FlatTorus { .. } => "flat_torus",
            ChartKind::WavyTorus { .. } => "wavy_torus",
            ChartKind::SphereBand { .. } => "sphere_band",
            ChartKind::FlatInterval { .. } => "flat_interval",
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ChartKind::FlatCircle { .. } | ChartKind::WeightedCircle { .. } | ChartKind::FlatInterval { .. } => 1,
            _ => 2,
        }
    }

    /// Coordinate axes. One-dimensional charts report a dummy unit second axis.
    pub fn axes(&self) -> [Axis; 2] {
        let dummy = Axis {
            lo: 0.0,
            hi: 1.0,
            periodic: true,
        };
        match &self.kind {
            ChartKind::FlatCircle { length } => [
                Axis {
                    lo: 0.0,
                    hi: *length,
                    periodic: true,
                },
                dummy,
            ],
            ChartKind::WeightedCircle { .. } => [
                Axis {
                    lo: 0.0,
                    hi: 1.0,
                    periodic: true,
                },
                dummy,
            ],
            ChartKind::FlatInterval { lo, hi } => [
                Axis {
                    lo: *lo,
                    hi: *hi,
                    periodic: false,
                },
                dummy,
            ],
            ChartKind::FlatTorus { period } | ChartKind::WavyTorus { period } => {
                let a = Axis {
                    lo: 0.0,
                    hi: *period,
                    periodic: true,
                };
                [a, a]
            }
            ChartKind::SphereBand { lat_max } => [
                Axis {
                    lo: -lat_max,
                    hi: *lat_max,
                    periodic: false,
                },
                Axis {
                    lo: 0.0,
                    hi: 2.0 * PI,
                    periodic: true,
                },
            ],
        }
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.axes()[..self.dim()].iter().all(|a| a.periodic)
    }

    /// Central-difference step for first derivatives along `axis`.
    pub fn fd_step(&self, axis: usize) -> f64 {
        FIRST_DERIVATIVE_STEP * self.axes()[axis].length()
    }

    fn conformal_factor(period: f64, x: &Point) -> (f64, [f64; 2]) {
        let w = 2.0 * PI / period;
        let (s0, c0) = (w * x[0]).sin_cos();
        let (s1, c1) = (w * x[1]).sin_cos();
        let c = 1.0 + 0.5 * s0 * s1;
        (c, [0.5 * w * c0 * s1, 0.5 * w * s0 * c1])
    }

    pub fn metric(&self, x: &Point) -> Tensor {
        match &self.kind {
            ChartKind::FlatCircle { .. } | ChartKind::FlatTorus { .. } | ChartKind::FlatInterval { .. } => {
                [[1.0, 0.0], [0.0, 1.0]]
            }
            ChartKind::WeightedCircle { k } => {
                let kv = k.value(x[0]);
                [[kv * kv, 0.0], [0.0, 1.0]]
            }
            ChartKind::WavyTorus { period } => {
                let (c, _) = Self::conformal_factor(*period, x);
                [[c * c, 0.0], [0.0, c * c]]
            }
            ChartKind::SphereBand { .. } => {
                let c = x[0].cos();
                [[1.0, 0.0], [0.0, c * c]]
            }
        }
    }

    /// `∂_axis g_ij` from the closed form, when the chart has one and it is enabled.
    pub fn analytic_metric_derivative(&self, x: &Point, axis: usize) -> Option<Tensor> {
        if !self.analytic_derivatives {
            return None;
        }
        let zero = [[0.0; 2]; 2];
        Some(match &self.kind {
            ChartKind::FlatCircle { .. } | ChartKind::FlatTorus { .. } | ChartKind::FlatInterval { .. } => zero,
            ChartKind::WeightedCircle { k } => {
                if axis == 0 {
                    [[2.0 * k.value(x[0]) * k.derivative(x[0]), 0.0], [0.0, 0.0]]
                } else {
                    zero
                }
            }
            ChartKind::WavyTorus { period } => {
                let (c, dc) = Self::conformal_factor(*period, x);
                let d = 2.0 * c * dc[axis];
                [[d, 0.0], [0.0, d]]
            }
            ChartKind::SphereBand { .. } => {
                if axis == 0 {
                    let (s, c) = x[0].sin_cos();
                    [[0.0, 0.0], [0.0, -2.0 * s * c]]
                } else {
                    zero
                }
            }
        })
    }

    /// `∂_axis g_ij`, analytic when available, else central differences with
    /// step `1e-5 · period`.
    pub fn metric_derivative(&self, x: &Point, axis: usize) -> Tensor {
        if let Some(d) = self.analytic_metric_derivative(x, axis) {
            return d;
        }
        let h = self.fd_step(axis);
        let mut xp = *x;
        let mut xm = *x;
        xp[axis] += h;
        xm[axis] -= h;
        let gp = self.metric(&xp);
        let gm = self.metric(&xm);
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
            }
        }
        d
    }

    pub fn min_eigenvalue(&self, x: &Point) -> f64 {
        let g = self.metric(x);
        if self.dim() == 1 {
            return g[0][0];
        }
        symmetric_eigenvalues(&g).0
    }

    pub fn check_positive(&self, x: &Point) -> Result<()> {
        let min_eigenvalue = self.min_eigenvalue(x);
        if min_eigenvalue > 0.0 && min_eigenvalue.is_finite() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite {
                point: *x,
                min_eigenvalue,
            })
        }
    }

    pub fn det(&self, x: &Point) -> f64 {
        let g = self.metric(x);
        if self.dim() == 1 {
            g[0][0]
        } else {
            g[0][0] * g[1][1] - g[0][1] * g[1][0]
        }
    }

    /// Volume density `√|g|`.
    pub fn sqrt_det(&self, x: &Point) -> f64 {
        self.det(x).sqrt()
    }

    pub fn inverse_metric(&self, x: &Point) -> Tensor {
        let g = self.metric(x);
        if self.dim() == 1 {
            return [[1.0 / g[0][0], 0.0], [0.0, 1.0]];
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]]
    }

    /// Largest eigenvalue of `g^{ij}` at `x`.
    pub fn inverse_metric_bound(&self, x: &Point) -> f64 {
        let gi = self.inverse_metric(x);
        if self.dim() == 1 {
            gi[0][0]
        } else {
            symmetric_eigenvalues(&gi).1
        }
    }

    pub fn inner(&self, x: &Point, a: &Vector, b: &Vector) -> f64 {
        let g = self.metric(x);
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g[i][j] * a[i] * b[j];
            }
        }
        s
    }

    pub fn norm(&self, x: &Point, a: &Vector) -> f64 {
        self.inner(x, a, a).max(0.0).sqrt()
    }

    /// Covariant derivative of the metric built from [`christoffel`]; zero up to
    /// finite-difference error for a consistent chart.
    pub fn metric_compatibility_residual(&self, x: &Point) -> Result<f64> {
        let gamma = christoffel(self, x)?;
        let g = self.metric(x);
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let dg = self.metric_derivative(x, k);
            for i in 0..n {
                for j in 0..n {
                    let mut r = dg[i][j];
                    for l in 0..n {
                        r -= gamma[l][k][i] * g[l][j] + gamma[l][k][j] * g[i][l];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn symmetric_eigenvalues(m: &Tensor) -> (f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    let r = (half * half + m[0][1] * m[1][0]).max(0.0).sqrt();
    (mean - r, mean + r)
}

/// Christoffel symbols of the second kind at `x`.
pub fn christoffel(chart: &MetricChart, x: &Point) -> Result<Christoffel> {
    chart.check_positive(x)?;
    let n = chart.dim();
    let gi = chart.inverse_metric(x);
    let mut dg = [[[0.0; 2]; 2]; 2];
    for (axis, slot) in dg.iter_mut().enumerate().take(n) {
        *slot = chart.metric_derivative(x, axis);
    }
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for i in 0..n {
        for k in 0..n {
            for j in k..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += gi[i][l] * (dg[k][l][j] + dg[j][k][l] - dg[l][k][j]);
                }
                gamma[i][k][j] = 0.5 * s;
                gamma[i][j][k] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

fn shifted(x: &Point, axis: usize, h: f64) -> Point {
    let mut y = *x;
    y[axis] += h;
    y
}

fn default_steps(chart: &MetricChart, rel: f64) -> [f64; 2] {
    let axes = chart.axes();
    [rel * axes[0].length(), rel * axes[1].length()]
}

/// `(√|g|)^{-1} ∂_j(√|g| X^j)` by central differences with the default step.
pub fn divergence(chart: &MetricChart, field: impl Fn(&Point) -> Vector, x: &Point) -> Result<f64> {
    divergence_with_step(chart, field, x, default_steps(chart, FIRST_DERIVATIVE_STEP))
}

/// Density form of the divergence with explicit per-axis steps.
pub fn divergence_with_step(
    chart: &MetricChart,
    field: impl Fn(&Point) -> Vector,
    x: &Point,
    steps: [f64; 2],
) -> Result<f64> {
    chart.check_positive(x)?;
    let mut s = 0.0;
    for j in 0..chart.dim() {
        let h = steps[j];
        let xp = shifted(x, j, h);
        let xm = shifted(x, j, -h);
        s += (chart.sqrt_det(&xp) * field(&xp)[j] - chart.sqrt_det(&xm) * field(&xm)[j]) / (2.0 * h);
    }
    Ok(s / chart.sqrt_det(x))
}

/// Connection form of the divergence, `∂_j X^j + Γ^j_{kj} X^k`, with explicit
/// steps for `∂_j X^j`.
pub fn divergence_christoffel_with_step(
    chart: &MetricChart,
    field: impl Fn(&Point) -> Vector,
    x: &Point,
    steps: [f64; 2],
) -> Result<f64> {
    let gamma = christoffel(chart, x)?;
    let n = chart.dim();
    let v = field(x);
    let mut s = 0.0;
    for j in 0..n {
        let h = steps[j];
        s += (field(&shifted(x, j, h))[j] - field(&shifted(x, j, -h))[j]) / (2.0 * h);
        for k in 0..n {
            s += gamma[j][k][j] * v[k];
        }
    }
    Ok(s)
}

pub fn divergence_christoffel(chart: &MetricChart, field: impl Fn(&Point) -> Vector, x: &Point) -> Result<f64> {
    divergence_christoffel_with_step(chart, field, x, default_steps(chart, FIRST_DERIVATIVE_STEP))
}

/// Contravariant gradient `g^{ij} ∂_i h`.
pub fn gradient(chart: &MetricChart, h: impl Fn(&Point) -> f64, x: &Point) -> Result<Vector> {
    gradient_with_step(chart, h, x, default_steps(chart, FIRST_DERIVATIVE_STEP))
}

pub fn gradient_with_step(
    chart: &MetricChart,
    h: impl Fn(&Point) -> f64,
    x: &Point,
    steps: [f64; 2],
) -> Result<Vector> {
    chart.check_positive(x)?;
    let n = chart.dim();
    let mut dh = [0.0; 2];
    for (i, d) in dh.iter_mut().enumerate().take(n) {
        *d = (h(&shifted(x, i, steps[i])) - h(&shifted(x, i, -steps[i]))) / (2.0 * steps[i]);
    }
    Ok(raise_index(chart, x, &dh))
}

/// Turns a covector `(∂_i h)` into the contravariant vector `g^{ij} ∂_i h`.
pub fn raise_index(chart: &MetricChart, x: &Point, covector: &[f64; 2]) -> Vector {
    let gi = chart.inverse_metric(x);
    let n = chart.dim();
    let mut out = [0.0; 2];
    for j in 0..n {
        for i in 0..n {
            out[j] += gi[i][j] * covector[i];
        }
    }
    out
}

/// `g^{ij}(∂_i∂_j h − Γ^k_{ij} ∂_k h)` with 3-point and 4-point cross stencils.
pub fn laplace_beltrami(chart: &MetricChart, h: impl Fn(&Point) -> f64, x: &Point) -> Result<f64> {
    laplace_beltrami_with_step(chart, h, x, default_steps(chart, SECOND_DERIVATIVE_STEP))
}

pub fn laplace_beltrami_with_step(
    chart: &MetricChart,
    h: impl Fn(&Point) -> f64,
    x: &Point,
    steps: [f64; 2],
) -> Result<f64> {
    let gamma = christoffel(chart, x)?;
    let gi = chart.inverse_metric(x);
    let n = chart.dim();
    let h0 = h(x);
    let mut first = [0.0; 2];
    let mut second = [[0.0; 2]; 2];
    for i in 0..n {
        let hp = h(&shifted(x, i, steps[i]));
        let hm = h(&shifted(x, i, -steps[i]));
        first[i] = (hp - hm) / (2.0 * steps[i]);
        second[i][i] = (hp - 2.0 * h0 + hm) / (steps[i] * steps[i]);
    }
    if n == 2 {
        let (a, b) = (steps[0], steps[1]);
        let corner = |sa: f64, sb: f64| h(&[x[0] + sa * a, x[1] + sb * b]);
        let mixed = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * a * b);
        second[0][1] = mixed;
        second[1][0] = mixed;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut t = second[i][j];
            for k in 0..n {
                t -= gamma[k][i][j] * first[k];
            }
            s += gi[i][j] * t;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_profile() -> Fourier1d {
        Fourier1d::new(2.0, vec![1.0], vec![])
    }

    #[test]
    fn flat_metric_has_no_christoffel_symbols() {
        let chart = MetricChart::flat_torus(1.0).unwrap();
        let g = christoffel(&chart, &[0.3, 0.7]).unwrap();
        assert!(g.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn weighted_circle_symbol_matches_log_derivative() {
        // Γ^1_11 = ½ g^{11} ∂_1 g_11 = k'/k for g = k².
        for chart in [
            MetricChart::weighted_circle(k_profile()).unwrap(),
            MetricChart::weighted_circle(k_profile())
                .unwrap()
                .with_numeric_derivatives(),
        ] {
            for i in 0..10 {
                let x = 0.05 + 0.1 * i as f64;
                let k = 2.0 + (2.0 * PI * x).sin();
                let dk = 2.0 * PI * (2.0 * PI * x).cos();
                let g = christoffel(&chart, &[x, 0.0]).unwrap();
                assert!(
                    (g[0][0][0] - dk / k).abs() < 1e-8,
                    "x={x}: {} vs {}",
                    g[0][0][0],
                    dk / k
                );
            }
        }
    }

    #[test]
    fn sphere_band_zonal_symbol() {
        let chart = MetricChart::sphere_band(PI / 3.0).unwrap().with_numeric_derivatives();
        let g = christoffel(&chart, &[PI / 6.0, 1.0]).unwrap();
        // Γ^θ_φφ = sinθ cosθ, Γ^φ_θφ = −tanθ
        assert!((g[0][1][1] - 3f64.sqrt() / 4.0).abs() < 1e-9);
        assert!((g[1][0][1] + (PI / 6.0).tan()).abs() < 1e-9);
        assert_eq!(g[1][0][1], g[1][1][0]);
    }

    #[test]
    fn metric_compatibility_on_all_charts() {
        let charts = [
            MetricChart::weighted_circle(k_profile()).unwrap(),
            MetricChart::wavy_torus(2.0 * PI).unwrap(),
            MetricChart::wavy_torus(2.0 * PI).unwrap().with_numeric_derivatives(),
            MetricChart::sphere_band(PI / 3.0).unwrap().with_numeric_derivatives(),
        ];
        for chart in &charts {
            for i in 0..25 {
                let x = [0.1 + 0.037 * i as f64, 0.2 + 0.051 * i as f64];
                assert!(chart.metric_compatibility_residual(&x).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn zonal_field_is_divergence_free_on_band() {
        let chart = MetricChart::sphere_band(PI / 3.0).unwrap();
        for i in 0..20 {
            let x = [-1.0 + 0.1 * i as f64, 0.3 * i as f64];
            let d = divergence(&chart, |_| [0.0, 1.0], &x).unwrap();
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_on_flat_torus() {
        let chart = MetricChart::flat_torus(1.0).unwrap();
        assert_eq!(divergence(&chart, |_| [0.3, -1.2], &[0.4, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let flat = MetricChart::flat_torus(1.0).unwrap();
        let g = gradient(&flat, |x| x[0], &[0.3, 0.3]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9 && g[1].abs() < 1e-12);

        let chart = MetricChart::weighted_circle(k_profile()).unwrap();
        let x = 0.3;
        let k = 2.0 + (2.0 * PI * x).sin();
        let g = gradient(&chart, |p| p[0], &[x, 0.0]).unwrap();
        assert!((g[0] - 1.0 / (k * k)).abs() < 1e-9);
    }

    #[test]
    fn laplacian_of_linear_and_sine() {
        let flat = MetricChart::flat_torus(1.0).unwrap();
        assert!(
            laplace_beltrami(&flat, |x| 2.0 * x[0] - x[1], &[0.2, 0.9])
                .unwrap()
                .abs()
                < 1e-7
        );
        let circle = MetricChart::flat_circle(1.0).unwrap();
        for i in 0..8 {
            let x = 0.1 * i as f64 + 0.03;
            let lap = laplace_beltrami(&circle, |p| (2.0 * PI * p[0]).sin(), &[x, 0.0]).unwrap();
            let exact = -4.0 * PI * PI * (2.0 * PI * x).sin();
            assert!((lap - exact).abs() < 1e-5, "{lap} vs {exact}");
        }
    }

    #[test]
    fn non_positive_metric_is_rejected() {
        assert!(MetricChart::weighted_circle(Fourier1d::new(0.5, vec![1.0], vec![])).is_err());
        assert!(MetricChart::sphere_band(2.0).is_err());
        assert!(MetricChart::flat_circle(-1.0).is_err());
    }
}
