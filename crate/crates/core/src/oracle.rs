//! Characteristics reference solver for `∂_t u + (1/k) ∂_x(k f(u)) = 0` on
//! the unit circle, valid until characteristics cross.
//!
//! Along `Ẋ = f'(v)`, the weighted flux `k(X) f(v)` stays equal to its foot
//! value `c = k(y) f(u0(y))`, so `v = f^{-1}_±(c / k(X))` on the monotone
//! branch of `f` that contains `u0(y)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Fourier1d;
use crate::poly::{Branch, Polynomial};

/// RK4 step in the characteristic parameter.
pub const CHARACTERISTIC_STEP: f64 = 1e-3;

/// Foot points sampled by [`crossing_time`].
pub const CROSSING_SAMPLES: usize = 512;

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct WeightedProblem {
    k: Fourier1d,
    f: Polynomial,
    u0: Arc<ScalarFn>,
}

impl fmt::Debug for WeightedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightedProblem")
            .field("k", &self.k)
            .field("f", &self.f)
            .finish_non_exhaustive()
    }
}

impl WeightedProblem {
    /// Checks `min k > 0` and convexity of `f` over the sampled range of `u0`.
    pub fn new(k: Fourier1d, f: Polynomial, u0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let kmin = k.sampled_min();
        if !(kmin > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight must be positive, sampled minimum {kmin}"
            )));
        }
        let samples: Vec<f64> = (0..1024).map(|i| u0(i as f64 / 1024.0)).collect();
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidParameter("initial data is not finite".into()));
        }
        if !f.is_convex_on(lo, hi) {
            return Err(Error::InvalidParameter(format!("flux is not convex on [{lo}, {hi}]")));
        }
        Ok(Self { k, f, u0: Arc::new(u0) })
    }

    pub fn k(&self) -> &Fourier1d {
        &self.k
    }

    pub fn flux(&self) -> &Polynomial {
        &self.f
    }

    pub fn u0(&self, y: f64) -> f64 {
        (self.u0)(y)
    }

    fn foot(&self, y: f64) -> (f64, Branch) {
        let u = self.u0(y);
        (self.k.value(y) * self.f.value(u), self.f.branch_of(u))
    }

    /// State on `branch` carrying weighted flux `c` at position `x`.
    fn state(&self, c: f64, branch: Branch, x: f64, foot: f64, s: f64) -> Result<f64> {
        let level = c / self.k.value(x);
        if let Some(m) = self.f.minimizer() {
            let floor = self.f.value(m);
            if level <= floor {
                // within round-off of the minimum the branches meet
                if level >= floor - 1e-14 * floor.abs().max(1.0) {
                    return Ok(m);
                }
                return Err(Error::BranchExit { foot, s });
            }
        }
        self.f.inverse(level, branch).map_err(|_| Error::BranchExit { foot, s })
    }

    fn speed(&self, c: f64, branch: Branch, x: f64, foot: f64, s: f64) -> Result<f64> {
        Ok(self.f.d1(self.state(c, branch, x, foot, s)?))
    }

    fn rk4(&self, c: f64, branch: Branch, x: f64, h: f64, foot: f64, s: f64) -> Result<f64> {
        let k1 = self.speed(c, branch, x, foot, s)?;
        let k2 = self.speed(c, branch, x + 0.5 * h * k1, foot, s)?;
        let k3 = self.speed(c, branch, x + 0.5 * h * k2, foot, s)?;
        let k4 = self.speed(c, branch, x + h * k3, foot, s)?;
        Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Characteristic {
    pub y: f64,
    /// `k(y) f(u0(y))`.
    pub c: f64,
    pub branch: Branch,
    /// `(s, X(s), v(s))` after every step, starting at `s = 0`.
    pub path: Vec<(f64, f64, f64)>,
    /// `max_s |k(X) f(v) − c|`.
    pub drift: f64,
}

impl Characteristic {
    pub fn end(&self) -> (f64, f64, f64) {
        *self.path.last().expect("path starts at the foot point")
    }
}

fn steps_to(t_end: f64) -> (usize, f64) {
    let n = (t_end / CHARACTERISTIC_STEP).ceil().max(1.0) as usize;
    (n, t_end / n as f64)
}

/// Integrates the characteristic from foot point `y` up to `t_end` with RK4.
pub fn trace_characteristic(problem: &WeightedProblem, y: f64, t_end: f64, branch: Branch) -> Result<Characteristic> {
    let (c, _) = problem.foot(y);
    let mut path = vec![(0.0, y, problem.u0(y))];
    let mut drift: f64 = 0.0;
    if t_end > 0.0 {
        let (n, h) = steps_to(t_end);
        let mut x = y;
        for i in 0..n {
            let s = i as f64 * h;
            x = problem.rk4(c, branch, x, h, y, s)?;
            let v = problem.state(c, branch, x, y, s + h)?;
            drift = drift.max((problem.k.value(x) * problem.f.value(v) - c).abs());
            path.push(((i + 1) as f64 * h, x, v));
        }
    }
    Ok(Characteristic {
        y,
        c,
        branch,
        path,
        drift,
    })
}

/// Traces the characteristic with the branch selected by `u0(y)`.
pub fn trace_from_foot(problem: &WeightedProblem, y: f64, t_end: f64) -> Result<Characteristic> {
    let (_, branch) = problem.foot(y);
    trace_characteristic(problem, y, t_end, branch)
}

/// `(X(t; y), v(t; y))` without storing the path.
fn endpoint(problem: &WeightedProblem, y: f64, t: f64) -> Result<(f64, f64)> {
    let (c, branch) = problem.foot(y);
    if t <= 0.0 {
        return Ok((y, problem.u0(y)));
    }
    let (n, h) = steps_to(t);
    let mut x = y;
    for i in 0..n {
        x = problem.rk4(c, branch, x, h, y, i as f64 * h)?;
    }
    Ok((x, problem.state(c, branch, x, y, t)?))
}

/// Exact pre-crossing solution at time `t` on `xs` (points of `[0, 1)`).
pub fn smooth_solve(problem: &WeightedProblem, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
    if t <= 0.0 {
        return Ok(xs.iter().map(|&x| problem.u0(x)).collect());
    }
    let crossing = crossing_time(problem, t)?;
    if crossing <= t {
        return Err(Error::CharacteristicsCross { t, crossing });
    }
    // Sample X(t; ·) on three periods so every x is bracketed.
    let m = 256;
    let ys: Vec<f64> = (0..=3 * m).map(|j| -1.0 + j as f64 / m as f64).collect();
    let ends: Vec<f64> = ys
        .par_iter()
        .map(|&y| endpoint(problem, y, t).map(|e| e.0))
        .collect::<Result<_>>()?;
    if ends.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::CharacteristicsCross { t, crossing: t });
    }
    xs.par_iter()
        .map(|&x| {
            let j = ends.partition_point(|e| *e <= x);
            if j == 0 || j >= ends.len() {
                return Err(Error::InvalidParameter(format!(
                    "point {x} not reached by sampled characteristics"
                )));
            }
            let y = solve_foot(problem, t, x, (ys[j - 1], ends[j - 1]), (ys[j], ends[j]))?;
            Ok(endpoint(problem, y, t)?.1)
        })
        .collect()
}

/// Illinois iteration for `X(t; y) = x` on a bracket.
fn solve_foot(problem: &WeightedProblem, t: f64, x: f64, a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    let (mut ya, mut fa) = (a.0, a.1 - x);
    let (mut yb, mut fb) = (b.0, b.1 - x);
    if fa == 0.0 {
        return Ok(ya);
    }
    let mut side = 0;
    for _ in 0..100 {
        let y = (ya * fb - yb * fa) / (fb - fa);
        let fy = endpoint(problem, y, t)?.0 - x;
        if fy.abs() < 1e-14 || (yb - ya).abs() < 1e-15 {
            return Ok(y);
        }
        if fy.signum() == fb.signum() {
            yb = y;
            fb = fy;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            ya = y;
            fa = fy;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (ya + yb))
}

/// First time at which neighbouring characteristics from
/// [`CROSSING_SAMPLES`] foot points meet, or `+∞` if none before `t_max`.
pub fn crossing_time(problem: &WeightedProblem, t_max: f64) -> Result<f64> {
    let n = CROSSING_SAMPLES;
    let feet: Vec<(f64, f64, Branch)> = (0..n)
        .map(|j| {
            let y = j as f64 / n as f64;
            let (c, b) = problem.foot(y);
            (y, c, b)
        })
        .collect();
    let ordered = |xs: &[f64]| -> bool { xs.windows(2).all(|w| w[1] > w[0]) && xs[0] + 1.0 > xs[n - 1] };
    let advance = |xs: &[f64], s: f64, h: f64| -> Result<Vec<f64>> {
        feet.iter()
            .zip(xs)
            .map(|(&(y, c, b), &x)| problem.rk4(c, b, x, h, y, s))
            .collect()
    };
    let mut xs: Vec<f64> = feet.iter().map(|f| f.0).collect();
    let mut s = 0.0;
    while s < t_max {
        let h = CHARACTERISTIC_STEP.min(t_max - s);
        let next = advance(&xs, s, h)?;
        if !ordered(&next) {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if ordered(&advance(&xs, s, mid)?) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(s + hi);
        }
        xs = next;
        s += h;
    }
    Ok(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn burgers(k: Fourier1d, u0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> WeightedProblem {
        WeightedProblem::new(k, Polynomial::burgers(), u0).unwrap()
    }

    #[test]
    fn classical_characteristics_are_straight() {
        let p = burgers(Fourier1d::constant(1.0), |y| 1.0 + 0.5 * (2.0 * PI * y).sin());
        for y in [0.0, 0.13, 0.5, 0.77] {
            let ch = trace_from_foot(&p, y, 0.1).unwrap();
            let (_, x, _) = ch.end();
            assert!((x - (y + p.u0(y) * 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_data_on_weighted_circle() {
        let k = Fourier1d::new(2.0, vec![1.0], vec![]);
        let a = 0.8;
        let p = burgers(k.clone(), move |_| a);
        let ch = trace_from_foot(&p, 0.3, 0.5).unwrap();
        assert!(ch.drift <= 1e-8);
        let c = k.value(0.3) * a * a / 2.0;
        assert!((ch.c - c).abs() < 1e-15);
        for &(_, x, v) in &ch.path {
            assert!((v - (2.0 * c / k.value(x)).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_at_the_minimizer() {
        let p = burgers(Fourier1d::new(2.0, vec![1.0], vec![]), |_| 0.0);
        let ch = trace_from_foot(&p, 0.4, 0.2).unwrap();
        assert!(ch.path.iter().all(|&(_, x, v)| x == 0.4 && v == 0.0));
    }

    #[test]
    fn branch_exit_is_flagged() {
        // f = u²/2 + 1: the level c/k(X) reaches the minimum 1 once k(X) ≥ 1.005·k(y)
        let f = Polynomial::new(vec![1.0, 0.0, 0.5]);
        let p = WeightedProblem::new(Fourier1d::new(2.0, vec![1.0], vec![]), f, |_| 0.1).unwrap();
        let r = trace_from_foot(&p, 0.0, 1.0);
        assert!(matches!(r, Err(Error::BranchExit { foot, .. }) if foot == 0.0), "{r:?}");
    }

    #[test]
    fn classical_solution_matches_implicit_formula() {
        let p = burgers(Fourier1d::constant(1.0), |y| (2.0 * PI * y).sin());
        let t = 0.05;
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let got = smooth_solve(&p, t, &xs).unwrap();
        for (x, u) in xs.iter().zip(&got) {
            // u = sin(2π(x − u t))
            assert!((u - (2.0 * PI * (x - u * t)).sin()).abs() < 1e-6);
        }
        assert_eq!(
            smooth_solve(&p, 0.0, &xs).unwrap(),
            xs.iter().map(|&x| p.u0(x)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn crossing_times() {
        let p = burgers(Fourier1d::constant(1.0), |y| (2.0 * PI * y).sin());
        let t = crossing_time(&p, 1.0).unwrap();
        assert!((t * 2.0 * PI - 1.0).abs() < 0.02, "{t}");
        assert!(matches!(
            smooth_solve(&p, 0.3, &[0.1]),
            Err(Error::CharacteristicsCross { .. })
        ));

        let c = burgers(Fourier1d::new(2.0, vec![1.0], vec![]), |_| 0.5);
        assert_eq!(crossing_time(&c, 0.5).unwrap(), f64::INFINITY);

        let step = burgers(Fourier1d::constant(1.0), |y| if y < 0.5 { 1.0 } else { 0.0 });
        // below the foot-point resolution
        assert!(crossing_time(&step, 1.0).unwrap() <= 1.0 / CROSSING_SAMPLES as f64);
    }

    #[test]
    fn rejects_invalid_problems() {
        assert!(WeightedProblem::new(Fourier1d::new(0.5, vec![1.0], vec![]), Polynomial::burgers(), |_| 1.0).is_err());
        assert!(WeightedProblem::new(Fourier1d::constant(1.0), Polynomial::cubic(), |y| y - 0.5).is_err());
    }
}
