use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{lp_norm_of, total_variation_of, ManifoldMesh};

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

/// Run metadata carried alongside the snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetadata {
    /// `fv`, `viscous` or `lorentzian`.
    pub scheme: String,
    /// Numerical flux or discretization variant.
    pub variant: String,
    pub flux: String,
    pub compatible: bool,
    pub epsilon: f64,
    pub cfl: f64,
    /// False if any step left the monotone regime.
    pub monotone: bool,
}

/// Time-stamped cell averages from one run.
#[derive(Clone, Debug)]
pub struct SolutionTrajectory {
    pub mesh: Arc<ManifoldMesh>,
    pub metadata: RunMetadata,
    pub snapshots: Vec<Snapshot>,
    /// Every time step taken, in order.
    pub steps: Vec<f64>,
}

impl SolutionTrajectory {
    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Snapshot closest to `t`.
    pub fn at_time(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .expect("trajectory has at least one snapshot")
    }

    /// Rows of `(t, L1, L2, Linf, TV)`.
    pub fn norm_series(&self) -> Vec<[f64; 5]> {
        self.snapshots
            .iter()
            .map(|s| {
                let m = &self.mesh;
                [
                    s.time,
                    lp_norm_of(m, &s.values, 1.0).unwrap_or(f64::NAN),
                    lp_norm_of(m, &s.values, 2.0).unwrap_or(f64::NAN),
                    lp_norm_of(m, &s.values, f64::INFINITY).unwrap_or(f64::NAN),
                    total_variation_of(m, &s.values),
                ]
            })
            .collect()
    }

    /// Checks that two runs share mesh shape and snapshot times.
    pub fn ensure_matched(&self, other: &SolutionTrajectory) -> Result<()> {
        if self.mesh.shape() != other.mesh.shape() || self.mesh.chart().name() != other.mesh.chart().name() {
            return Err(Error::Mismatch(format!(
                "meshes differ: {} {:?} vs {} {:?}",
                self.mesh.chart().name(),
                self.mesh.shape(),
                other.mesh.chart().name(),
                other.mesh.shape()
            )));
        }
        if self.snapshots.len() != other.snapshots.len() {
            return Err(Error::Mismatch(format!(
                "{} snapshots vs {}",
                self.snapshots.len(),
                other.snapshots.len()
            )));
        }
        for (a, b) in self.snapshots.iter().zip(&other.snapshots) {
            if (a.time - b.time).abs() > 1e-12 * a.time.abs().max(1.0) {
                return Err(Error::Mismatch(format!("snapshot times {} vs {}", a.time, b.time)));
            }
        }
        Ok(())
    }
}

/// Merges requested output times with `0` and `t_end`, sorted and deduplicated.
pub fn output_times(requested: &[f64], t_end: f64) -> Result<Vec<f64>> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_end must be finite and nonnegative, got {t_end}"
        )));
    }
    let mut times = vec![0.0, t_end];
    for &t in requested {
        if !(0.0..=t_end).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} outside [0, {t_end}]"
            )));
        }
        times.push(t);
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * t_end.max(1.0));
    Ok(times)
}

/// Checks every value is finite; reports the first offending cell.
pub fn check_finite(values: &[f64], step: usize) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(cell) => Err(Error::NonFinite { step, cell }),
        None => Ok(()),
    }
}

/// Step clock that lands exactly on every output time.
#[derive(Clone, Debug)]
pub(crate) struct Clock {
    times: Vec<f64>,
    next: usize,
    pub t: f64,
    pub step: usize,
}

impl Clock {
    pub fn new(times: &[f64]) -> Self {
        let next = times.iter().position(|t| *t > 0.0).unwrap_or(times.len());
        Self {
            times: times.to_vec(),
            next,
            t: 0.0,
            step: 0,
        }
    }

    pub fn done(&self) -> bool {
        self.next >= self.times.len()
    }

    /// Shortens `dt` to land on the next output time when it would overshoot
    /// or leave a sliver. An infinite `dt` (no wave speed) jumps straight to
    /// the next output. Returns the step to take and whether it lands on an
    /// output time.
    pub fn advance(&mut self, dt: f64) -> Result<(f64, bool)> {
        if !(dt > 0.0) || dt.is_nan() {
            return Err(Error::InvalidParameter(format!("time step {dt} at t = {}", self.t)));
        }
        let target = self.times[self.next];
        let landing = self.t + dt >= target || target - (self.t + dt) < 1e-9 * dt;
        let dt = if landing { target - self.t } else { dt };
        self.step += 1;
        if landing {
            self.t = target;
            self.next += 1;
        } else {
            self.t += dt;
        }
        Ok((dt, landing))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_times_are_sorted_and_include_ends() {
        assert_eq!(output_times(&[0.5, 0.25, 0.5], 1.0).unwrap(), vec![0.0, 0.25, 0.5, 1.0]);
        assert!(output_times(&[2.0], 1.0).is_err());
    }

    #[test]
    fn clock_lands_on_outputs() {
        let mut clock = Clock::new(&[0.0, 0.25, 1.0]);
        let mut seen = Vec::new();
        let mut dts = Vec::new();
        while !clock.done() {
            let (dt, out) = clock.advance(0.1).unwrap();
            dts.push(dt);
            if out {
                seen.push(clock.t);
            }
        }
        assert_eq!(seen, vec![0.25, 1.0]);
        assert!((dts.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(dts.iter().all(|d| *d <= 0.1 + 1e-15));
        let mut clock = Clock::new(&[0.0, 0.5]);
        assert_eq!(clock.advance(f64::INFINITY).unwrap(), (0.5, true));
    }
}
