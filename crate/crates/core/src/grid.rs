use crate::error::{domain, Result};
use serde::{Deserialize, Serialize};

/// Uniform time grid `t_i = i * dt`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        if n == 0 {
            return domain("time grid needs at least one step");
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        Ok(TimeGrid { n, dt })
    }

    /// `n` steps covering `[0, horizon]`.
    pub fn over(horizon: f64, n: usize) -> Result<Self> {
        Self::new(n, horizon / n as f64)
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    /// Number of grid points (`steps + 1`).
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.time(i)).collect()
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Self {
        TimeGrid { n: self.n * factor, dt: self.dt / factor as f64 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_grids_rejected() {
        assert!(TimeGrid::new(0, 0.1).is_err());
        assert!(TimeGrid::new(4, 0.0).is_err());
        assert!(TimeGrid::new(4, -1.0).is_err());
    }

    #[test]
    fn points_increase() {
        let g = TimeGrid::over(2.0, 8).unwrap();
        let t = g.times();
        assert_eq!(t.len(), 9);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((g.horizon() - 2.0).abs() < 1e-15);
    }
}
