//! Geometric cooling and the Metropolis rule shared by both annealers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T_k = t0 * cooling^k`, running while `T > t_min` and fewer than `max_iter`
/// iterations have elapsed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub t_min: f64,
    pub max_iter: usize,
}

impl Default for CoolingSchedule {
    fn default() -> Self {
        Self {
            t0: 1.0,
            cooling: 0.999,
            t_min: 1e-3,
            max_iter: 500,
        }
    }
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cooling rate {} must lie in (0, 1)",
                self.cooling
            )));
        }
        if !(self.t_min >= 0.0 && self.t_min < self.t0) || !self.t0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= t_min < t0, got t_min = {}, t0 = {}",
                self.t_min, self.t0
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Temperatures seen by each loop iteration, in order.
    pub fn temperatures(&self) -> Temperatures {
        Temperatures {
            schedule: *self,
            t: self.t0,
            iteration: 0,
        }
    }

    /// Number of iterations the loop executes.
    pub fn iterations(&self) -> usize {
        self.temperatures().count()
    }
}

#[derive(Debug, Clone)]
pub struct Temperatures {
    schedule: CoolingSchedule,
    t: f64,
    iteration: usize,
}

impl Temperatures {
    /// Temperature after the updates performed so far.
    pub fn current(&self) -> f64 {
        self.t
    }
}

impl Iterator for Temperatures {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.t > self.schedule.t_min && self.iteration < self.schedule.max_iter {
            let t = self.t;
            self.t *= self.schedule.cooling;
            self.iteration += 1;
            Some(t)
        } else {
            None
        }
    }
}

/// Metropolis acceptance for a maximized score: accept when `delta > 0` or
/// `u < exp(delta / temperature)`.
pub fn metropolis_accept(delta: f64, temperature: f64, u: f64) -> bool {
    delta > 0.0 || u < (delta / temperature).exp()
}
