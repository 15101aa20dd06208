//! Polynomial nonlinearities `h(ū) = Σ c_k ū^k` used by the built-in fluxes.

use crate::error::{Error, Result};

/// Bisection iterations for branch inverses.
pub const BISECTION_ITERATIONS: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

/// Monotone branch of a convex function, split at its minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Minus,
    Plus,
}

impl Polynomial {
    /// Coefficients in increasing degree; trailing zeros are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![0.0])
    }

    /// `ū`
    pub fn linear() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `ū²/2`
    pub fn burgers() -> Self {
        Self::new(vec![0.0, 0.0, 0.5])
    }

    /// `ū³/3`
    pub fn cubic() -> Self {
        Self::new(vec![0.0, 0.0, 0.0, 1.0 / 3.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn value(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn d1(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * u + k as f64 * c;
        }
        acc
    }

    pub fn d2(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * u + (k * (k - 1)) as f64 * c;
        }
        acc
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> Polynomial {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `max |h'|` over `[a, b]`, attained at an endpoint or a root of `h''`.
    pub fn max_abs_derivative(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut best = self.d1(lo).abs().max(self.d1(hi).abs());
        for r in self.derivative().derivative().roots_in(lo, hi) {
            best = best.max(self.d1(r).abs());
        }
        best
    }

    /// Real roots of `h` strictly inside `(a, b)` where `h` changes sign, ascending.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        if self.degree() == 0 || !(b > a) {
            return Vec::new();
        }
        if self.degree() == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r > a && r < b { vec![r] } else { Vec::new() };
        }
        if self.degree() == 2 {
            let (c, b1, a2) = (self.coeffs[0], self.coeffs[1], self.coeffs[2]);
            let disc = b1 * b1 - 4.0 * a2 * c;
            if disc <= 0.0 {
                return Vec::new();
            }
            let sign = if b1 >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (b1 + sign * disc.sqrt());
            let mut r = vec![q / a2, if q != 0.0 { c / q } else { 0.0 }];
            r.sort_by(f64::total_cmp);
            r.dedup();
            return r.into_iter().filter(|x| *x > a && *x < b).collect();
        }
        // Higher degree: split at critical points and bisect on sign changes.
        let mut breaks = vec![a];
        breaks.extend(self.derivative().roots_in(a, b));
        breaks.push(b);
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (self.value(lo), self.value(hi));
            if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.value(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }

    /// True when `h'' ≥ 0` at 257 uniform samples of `[a, b]`.
    pub fn is_convex_on(&self, a: f64, b: f64) -> bool {
        (0..=256).all(|i| self.d2(a + (b - a) * i as f64 / 256.0) >= -1e-14)
    }

    /// Minimizer of a convex polynomial: the point where `h'` turns from
    /// negative to positive. `None` when `h` is monotone.
    pub fn minimizer(&self) -> Option<f64> {
        let d = self.derivative();
        match self.degree() {
            0 => Some(0.0),
            1 => None,
            2 => Some(-self.coeffs[1] / (2.0 * self.coeffs[2])),
            _ => d.roots_in(-1e12, 1e12).into_iter().find(|r| self.d2(*r) > 0.0),
        }
    }

    /// Branch containing `u`: `Plus` at or above the minimizer.
    pub fn branch_of(&self, u: f64) -> Branch {
        match self.minimizer() {
            Some(m) if u < m => Branch::Minus,
            Some(_) => Branch::Plus,
            None => {
                if self.d1(u) >= 0.0 {
                    Branch::Plus
                } else {
                    Branch::Minus
                }
            }
        }
    }

    /// Solves `h(v) = c` on `branch` by bisection with
    /// [`BISECTION_ITERATIONS`] steps. Fails below the minimum value.
    pub fn inverse(&self, c: f64, branch: Branch) -> Result<f64> {
        let no_inverse = || Error::InvalidParameter(format!("no inverse for {c:e} on branch {branch:?}"));
        if self.degree() == 0 {
            return Err(no_inverse());
        }
        if self.degree() == 1 {
            return Ok((c - self.coeffs[0]) / self.coeffs[1]);
        }
        let Some(m) = self.minimizer() else {
            return self.monotone_inverse(c).ok_or_else(no_inverse);
        };
        if c < self.value(m) {
            return Err(no_inverse());
        }
        let dir = match branch {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        };
        // h grows away from m on both branches; bracket [0, w] in distance from m
        let mut w = 1.0;
        while self.value(m + dir * w) < c {
            w *= 2.0;
            if w > 1e150 {
                return Err(no_inverse());
            }
        }
        let (mut lo, mut hi) = (0.0, w);
        for _ in 0..BISECTION_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if self.value(m + dir * mid) < c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(m + dir * 0.5 * (lo + hi))
    }

    fn monotone_inverse(&self, c: f64) -> Option<f64> {
        let rising = self.d1(0.0) >= 0.0;
        let mut w = 1.0;
        while (self.value(-w) - c) * (self.value(w) - c) > 0.0 {
            w *= 2.0;
            if w > 1e150 {
                return None;
            }
        }
        let (mut lo, mut hi) = (-w, w);
        for _ in 0..BISECTION_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if (self.value(mid) < c) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_with_derivatives() {
        let p = Polynomial::new(vec![1.0, -2.0, 0.0, 4.0]);
        assert_eq!(p.value(2.0), 1.0 - 4.0 + 32.0);
        assert_eq!(p.d1(2.0), -2.0 + 48.0);
        assert_eq!(p.d2(2.0), 48.0);
        assert_eq!(Polynomial::new(vec![3.0, 0.0, 0.0]).degree(), 0);
    }

    #[test]
    fn burgers_inverse_branches() {
        let p = Polynomial::burgers();
        assert_eq!(p.minimizer(), Some(0.0));
        let v = p.inverse(2.0, Branch::Plus).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let v = p.inverse(2.0, Branch::Minus).unwrap();
        assert!((v + 2.0).abs() < 1e-14);
        assert!(p.inverse(-0.1, Branch::Plus).is_err());
    }

    #[test]
    fn shifted_quadratic_minimizer() {
        let p = Polynomial::new(vec![0.0, -1.0, 0.5]);
        assert!((p.minimizer().unwrap() - 1.0).abs() < 1e-14);
        let v = p.inverse(p.value(3.0), Branch::Plus).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        let v = p.inverse(p.value(-1.5), Branch::Minus).unwrap();
        assert!((v + 1.5).abs() < 1e-12);
    }

    #[test]
    fn linear_and_cubic_inverses() {
        let l = Polynomial::new(vec![0.0, -2.0]);
        assert!((l.inverse(3.0, Branch::Plus).unwrap() + 1.5).abs() < 1e-14);
        let c = Polynomial::new(vec![0.0, 1.0, 0.0, 0.1]);
        let v = c.inverse(c.value(1.7), Branch::Plus).unwrap();
        assert!((v - 1.7).abs() < 1e-12);
    }

    #[test]
    fn roots_and_derivative_bound() {
        let p = Polynomial::new(vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.roots_in(-2.0, 2.0), vec![-1.0, 1.0]);
        let c = Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]);
        let r = c.roots_in(-2.0, 2.0);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 1.0).abs() < 1e-12 && r[1].abs() < 1e-12 && (r[2] - 1.0).abs() < 1e-12);
        assert_eq!(Polynomial::burgers().max_abs_derivative(-3.0, 1.0), 3.0);
        // h = u³/3 - u: h' = u² - 1 has |h'| = 1 at the interior critical point 0
        let h = Polynomial::new(vec![0.0, -1.0, 0.0, 1.0 / 3.0]);
        assert_eq!(h.max_abs_derivative(-0.5, 0.5), 1.0);
    }

    #[test]
    fn convexity() {
        assert!(Polynomial::burgers().is_convex_on(-5.0, 5.0));
        assert!(!Polynomial::cubic().is_convex_on(-1.0, 1.0));
        assert!(Polynomial::cubic().is_convex_on(0.0, 1.0));
    }
}
