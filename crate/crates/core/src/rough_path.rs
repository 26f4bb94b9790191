//! Level-2 rough paths on a uniform grid: canonical, Itô, Stratonovich and
//! area-corrected lifts, Chen's relation, Hölder quantities and the
//! inhomogeneous rough-path metric.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::stats::{self, Estimate, TrendTest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Flavor {
    CanonicalSmooth,
    Ito,
    Stratonovich,
    /// Itô-type level 2 plus `(t-s)A`; `A` is `d×d` row-major.
    Effective(Vec<f64>),
}

/// Anything that can report two-parameter increments on grid indices.
pub trait Increments {
    fn dim(&self) -> usize;
    fn points(&self) -> usize;
    /// `X_{s,t}`.
    fn level1(&self, s: usize, t: usize) -> Vec<f64>;
    /// `𝕏_{s,t}`, row-major.
    fn level2(&self, s: usize, t: usize) -> Vec<f64>;
}

/// A level-2 rough path stored as `X_{0,t}` and `𝕏_{0,t}`; increments come from
/// Chen's relation `𝕏_{u,t} = 𝕏_{0,t} - 𝕏_{0,u} - X_{0,u}⊗X_{u,t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughPathLift {
    pub grid: TimeGrid,
    pub dim: usize,
    /// `(n+1)·d` values of `X_{0,t_i}`.
    pub level1: Vec<f64>,
    /// `(n+1)·d²` values of `𝕏_{0,t_i}` (without any `(t-s)A` term).
    pub level2: Vec<f64>,
    pub flavor: Flavor,
}

fn check_paths(paths: &[Vec<f64>], grid: &TimeGrid) -> Result<usize> {
    if paths.is_empty() {
        return domain("at least one component is required");
    }
    for p in paths {
        if p.len() != grid.len() {
            return Err(Error::GridMismatch(format!("component has {} points, grid has {}", p.len(), grid.len())));
        }
    }
    Ok(paths.len())
}

impl RoughPathLift {
    /// Build from per-step level-1 increments and per-step level-2 increments.
    fn accumulate(grid: TimeGrid, paths: &[Vec<f64>], flavor: Flavor, half_diag: bool) -> Result<Self> {
        let d = check_paths(paths, &grid)?;
        let n = grid.steps();
        let mut level1 = vec![0.0; (n + 1) * d];
        let mut level2 = vec![0.0; (n + 1) * d * d];
        for k in 0..n {
            let dx: Vec<f64> = (0..d).map(|i| paths[i][k + 1] - paths[i][k]).collect();
            for i in 0..d {
                let xi = level1[k * d + i];
                level1[(k + 1) * d + i] = xi + dx[i];
                for j in 0..d {
                    let step = if half_diag { 0.5 * dx[i] * dx[j] } else { 0.0 };
                    level2[(k + 1) * d * d + i * d + j] = level2[k * d * d + i * d + j] + xi * dx[j] + step;
                }
            }
        }
        Ok(RoughPathLift { grid, dim: d, level1, level2, flavor })
    }

    /// Canonical lift of a piecewise-linear path (trapezoidal iterated sums).
    pub fn canonical(grid: TimeGrid, paths: &[Vec<f64>]) -> Result<Self> {
        Self::accumulate(grid, paths, Flavor::CanonicalSmooth, true)
    }

    /// Itô (left-point) or Stratonovich (midpoint) lift of sampled paths.
    pub fn wiener(grid: TimeGrid, paths: &[Vec<f64>], flavor: Flavor) -> Result<Self> {
        match flavor {
            Flavor::Ito => Self::accumulate(grid, paths, Flavor::Ito, false),
            Flavor::Stratonovich => Self::accumulate(grid, paths, Flavor::Stratonovich, true),
            _ => domain("Wiener lifts are Itô or Stratonovich"),
        }
    }

    /// The same stored lift read with `(t-s)A` added to every level-2 increment.
    pub fn with_area(&self, a: Vec<f64>) -> Result<Self> {
        if a.len() != self.dim * self.dim {
            return domain(format!("area correction must have {} entries", self.dim * self.dim));
        }
        Ok(RoughPathLift { flavor: Flavor::Effective(a), ..self.clone() })
    }

    pub fn x0t(&self, i: usize) -> &[f64] {
        &self.level1[i * self.dim..(i + 1) * self.dim]
    }

    fn xx0t(&self, i: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.level2[i * dd..(i + 1) * dd]
    }

    /// Component `i` of the level-1 path as a vector over the grid.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.level1[k * self.dim + i]).collect()
    }

    /// Rows `t, X components, 𝕏_{0,t} components (row-major)`.
    pub fn to_csv(&self) -> String {
        let d = self.dim;
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",x{i}"));
        }
        for i in 0..d {
            for j in 0..d {
                out.push_str(&format!(",xx{i}{j}"));
            }
        }
        out.push('\n');
        for k in 0..self.grid.len() {
            out.push_str(&format!("{:.16e}", self.grid.time(k)));
            for v in self.x0t(k).iter().chain(self.xx0t(k)) {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

impl Increments for RoughPathLift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn points(&self) -> usize {
        self.grid.len()
    }

    fn level1(&self, s: usize, t: usize) -> Vec<f64> {
        self.x0t(t).iter().zip(self.x0t(s)).map(|(a, b)| a - b).collect()
    }

    fn level2(&self, s: usize, t: usize) -> Vec<f64> {
        let d = self.dim;
        let xs = self.x0t(s);
        let xst = self.level1(s, t);
        let (at, as_) = (self.xx0t(t), self.xx0t(s));
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = at[i * d + j] - as_[i * d + j] - xs[i] * xst[j];
            }
        }
        if let Flavor::Effective(a) = &self.flavor {
            let dt = self.grid.time(t) - self.grid.time(s);
            for (o, aij) in out.iter_mut().zip(a) {
                *o += dt * aij;
            }
        }
        out
    }
}

/// Dense table of increments built by direct summation of per-step terms,
/// independent of Chen reconstruction. Small grids only.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    dim: usize,
    points: usize,
    level1: Vec<Vec<f64>>,
    level2: Vec<Vec<f64>>,
}

impl IncrementTable {
    pub const MAX_POINTS: usize = 129;

    /// Direct sums `𝕏_{s,t} = Σ_{s≤k<l<t} ΔX_k⊗ΔX_l + Σ_{s≤k<t} Δ𝕏_k` of a lift.
    pub fn from_lift(lift: &RoughPathLift) -> Result<Self> {
        let n = lift.points();
        if n > Self::MAX_POINTS {
            return Err(Error::CostGuard(format!("dense increment table limited to {} points", Self::MAX_POINTS)));
        }
        let d = lift.dim;
        let dx: Vec<Vec<f64>> = (0..n - 1).map(|k| lift.level1(k, k + 1)).collect();
        let dxx: Vec<Vec<f64>> = (0..n - 1).map(|k| lift.level2(k, k + 1)).collect();
        let mut level1 = vec![vec![0.0; d]; n * n];
        let mut level2 = vec![vec![0.0; d * d]; n * n];
        for s in 0..n {
            let mut x = vec![0.0; d];
            let mut xx = vec![0.0; d * d];
            for t in s + 1..n {
                let k = t - 1;
                for i in 0..d {
                    for j in 0..d {
                        xx[i * d + j] += x[i] * dx[k][j] + dxx[k][i * d + j];
                    }
                }
                for i in 0..d {
                    x[i] += dx[k][i];
                }
                level1[s * n + t] = x.clone();
                level2[s * n + t] = xx.clone();
            }
        }
        Ok(IncrementTable { dim: d, points: n, level1, level2 })
    }

    /// Add `delta` to entry `(i,j)` of `𝕏_{s,t}`.
    pub fn perturb(&mut self, s: usize, t: usize, i: usize, j: usize, delta: f64) {
        let n = self.points;
        self.level2[s * n + t][i * self.dim + j] += delta;
    }
}

impl Increments for IncrementTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn points(&self) -> usize {
        self.points
    }

    fn level1(&self, s: usize, t: usize) -> Vec<f64> {
        self.level1[s * self.points + t].clone()
    }

    fn level2(&self, s: usize, t: usize) -> Vec<f64> {
        self.level2[s * self.points + t].clone()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖𝕏_{s,t} - 𝕏_{s,u} - 𝕏_{u,t} - X_{s,u}⊗X_{u,t}‖_max`.
pub fn chen_defect<L: Increments>(lift: &L, s: usize, u: usize, t: usize) -> f64 {
    let d = lift.dim();
    if s == u || u == t {
        return 0.0;
    }
    let (st, su, ut) = (lift.level2(s, t), lift.level2(s, u), lift.level2(u, t));
    let (xsu, xut) = (lift.level1(s, u), lift.level1(u, t));
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let k = i * d + j;
            worst = worst.max((st[k] - su[k] - ut[k] - xsu[i] * xut[j]).abs());
        }
    }
    worst
}

/// Largest Chen defect over all grid triples `s < u < t`.
pub fn max_chen_defect<L: Increments>(lift: &L) -> f64 {
    let n = lift.points();
    let mut worst: f64 = 0.0;
    for s in 0..n {
        for u in s + 1..n {
            for t in u + 1..n {
                worst = worst.max(chen_defect(lift, s, u, t));
            }
        }
    }
    worst
}

/// `‖Sym(𝕏_{s,t}) - ½X_{s,t}⊗X_{s,t}‖_max`.
pub fn geometric_defect<L: Increments>(lift: &L, s: usize, t: usize) -> f64 {
    let d = lift.dim();
    let (x, xx) = (lift.level1(s, t), lift.level2(s, t));
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let sym = 0.5 * (xx[i * d + j] + xx[j * d + i]);
            worst = worst.max((sym - 0.5 * x[i] * x[j]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughMetricReport {
    pub alpha: f64,
    /// Inhomogeneous distance: level-1 Hölder quotient plus level-2 `2α` quotient.
    pub dist: f64,
    /// `‖𝕏‖_α` of the first argument, level 2 entering with power ½.
    pub norm: f64,
}

pub const MAX_METRIC_POINTS: usize = 513;

/// Hölder quotients `(sup |X_{s,t}|/|t-s|^α, sup |𝕏_{s,t}|/|t-s|^{2α})`.
pub fn holder_quotients<L: Increments>(lift: &L, times: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let n = lift.points();
    if n > MAX_METRIC_POINTS {
        return Err(Error::CostGuard(format!("Hölder sup limited to {MAX_METRIC_POINTS} grid points")));
    }
    let (mut q1, mut q2): (f64, f64) = (0.0, 0.0);
    for s in 0..n {
        for t in s + 1..n {
            let h = times[t] - times[s];
            q1 = q1.max(max_abs(&lift.level1(s, t)) / h.powf(alpha));
            q2 = q2.max(max_abs(&lift.level2(s, t)) / h.powf(2.0 * alpha));
        }
    }
    Ok((q1, q2))
}

/// `ρ_α(A, B)` on a common grid.
pub fn rough_distance(a: &RoughPathLift, b: &RoughPathLift, alpha: f64) -> Result<RoughMetricReport> {
    if a.grid != b.grid || a.dim != b.dim {
        return Err(Error::GridMismatch("lifts live on different grids or dimensions".into()));
    }
    if !(alpha > 1.0 / 3.0 && alpha < 0.5) {
        return domain(format!("α must lie in (1/3, 1/2), got {alpha}"));
    }
    let n = a.grid.len();
    if n > MAX_METRIC_POINTS {
        return Err(Error::CostGuard(format!("Hölder sup limited to {MAX_METRIC_POINTS} grid points")));
    }
    let times = a.grid.times();
    let (mut q1, mut q2): (f64, f64) = (0.0, 0.0);
    for s in 0..n {
        for t in s + 1..n {
            let h = times[t] - times[s];
            let d1: Vec<f64> = a.level1(s, t).iter().zip(b.level1(s, t)).map(|(x, y)| x - y).collect();
            let d2: Vec<f64> = a.level2(s, t).iter().zip(b.level2(s, t)).map(|(x, y)| x - y).collect();
            q1 = q1.max(max_abs(&d1) / h.powf(alpha));
            q2 = q2.max(max_abs(&d2) / h.powf(2.0 * alpha));
        }
    }
    let (n1, n2) = holder_quotients(a, &times, alpha)?;
    Ok(RoughMetricReport { alpha, dist: q1 + q2, norm: n1 + n2.sqrt() })
}

/// `‖𝕏‖_α = sup |X_{s,t}|/|t-s|^α + (sup |𝕏_{s,t}|/|t-s|^{2α})^{1/2}`.
pub fn rough_norm(lift: &RoughPathLift, alpha: f64) -> Result<f64> {
    let (q1, q2) = holder_quotients(lift, &lift.grid.times(), alpha)?;
    Ok(q1 + q2.sqrt())
}

/// The oscillating pair of the lifted-limit counterexample: component `k` is
/// `cos(nt)/√n` when `λ(k) = 1` and `sin(nt)/√n` when `λ(k) = -1`.
pub fn pure_area_example(frequency: f64, lambda: [i8; 2], grid: TimeGrid) -> Result<RoughPathLift> {
    let comp = |l: i8| -> Vec<f64> {
        grid.times()
            .iter()
            .map(|t| if l > 0 { (frequency * t).cos() } else { (frequency * t).sin() } / frequency.sqrt())
            .collect()
    };
    RoughPathLift::canonical(grid, &[comp(lambda[0]), comp(lambda[1])])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessLevel {
    pub eps: f64,
    /// `E ‖𝕏^ε‖_γ^p` over the ensemble.
    pub holder_moment: Estimate,
    pub lags: Vec<f64>,
    /// `(E|𝕏^{i,j}_{s,s+h}|²)^{1/2}`, averaged over `s` and the ensemble.
    pub level2_norms: Vec<f64>,
    pub level2_exponent: f64,
    pub level1_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub p: f64,
    pub gamma: f64,
    pub pair: (usize, usize),
    pub levels: Vec<TightnessLevel>,
    /// Trend of the Hölder moments in the order of decreasing ε.
    pub trend: TrendTest,
    pub bounded: bool,
}

/// Moment and increment-exponent diagnostics of lift ensembles indexed by ε.
pub fn tightness_diagnostic(
    ensembles: &[(f64, Vec<RoughPathLift>)],
    p: f64,
    gamma: f64,
    pair: (usize, usize),
    lag_steps: &[usize],
) -> Result<TightnessReport> {
    if ensembles.is_empty() || ensembles.iter().any(|(_, e)| e.is_empty()) {
        return domain("tightness needs nonempty ensembles");
    }
    let mut levels = Vec::new();
    for (eps, lifts) in ensembles {
        let d = lifts[0].dim;
        if pair.0 >= d || pair.1 >= d {
            return domain("component pair out of range");
        }
        let norms: Vec<f64> =
            crate::par::map_slice(lifts, |l| rough_norm(l, gamma).map(|v| v.powf(p)).unwrap_or(f64::NAN));
        if norms.iter().any(|v| !v.is_finite()) {
            return Err(Error::CostGuard("lift grid too large for the Hölder diagnostic".into()));
        }
        let dt = lifts[0].grid.dt();
        let n = lifts[0].grid.steps();
        let mut l2 = Vec::new();
        let mut l1 = Vec::new();
        let mut lags = Vec::new();
        for &h in lag_steps {
            if h == 0 || h > n {
                return domain("lag steps must lie in 1..=n");
            }
            let (mut a2, mut a1, mut cnt) = (0.0, 0.0, 0usize);
            for lift in lifts {
                for s in 0..=n - h {
                    let v = lift.level2(s, s + h)[pair.0 * d + pair.1];
                    let x = lift.level1(s, s + h)[pair.0];
                    a2 += v * v;
                    a1 += x * x;
                    cnt += 1;
                }
            }
            l2.push((a2 / cnt as f64).sqrt());
            l1.push((a1 / cnt as f64).sqrt());
            lags.push(h as f64 * dt);
        }
        levels.push(TightnessLevel {
            eps: *eps,
            holder_moment: stats::mean_estimate(&norms),
            level2_exponent: stats::log_log_slope(&lags, &l2).slope,
            level1_exponent: stats::log_log_slope(&lags, &l1).slope,
            lags,
            level2_norms: l2,
        });
    }
    let mut ordered: Vec<&TightnessLevel> = levels.iter().collect();
    ordered.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let series: Vec<f64> = ordered.iter().map(|l| l.holder_moment.value).collect();
    let trend = stats::mann_kendall(&series);
    Ok(TightnessReport { p, gamma, pair, bounded: !trend.upward(0.05), levels, trend })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::over(1.0, n).unwrap()
    }

    #[test]
    fn diagonal_line_area() {
        let g = grid(32);
        let t = g.times();
        let lift = RoughPathLift::canonical(g, &[t.clone(), t.clone()]).unwrap();
        for (k, tk) in t.iter().enumerate() {
            assert!((lift.level2(0, k)[1] - tk * tk / 2.0).abs() < 1e-14);
        }
        assert!(max_chen_defect(&lift) < 1e-12);
        for s in 0..32 {
            assert!(geometric_defect(&lift, s, 32) < 1e-12);
        }
    }

    #[test]
    fn corrupted_table_shows_defect() {
        let g = grid(8);
        let lift = RoughPathLift::canonical(g, &[g.times(), g.times().iter().map(|x| x * x).collect()]).unwrap();
        let mut table = IncrementTable::from_lift(&lift).unwrap();
        assert!(max_chen_defect(&table) < 1e-12);
        table.perturb(1, 5, 0, 1, 1.0);
        assert!((chen_defect(&table, 1, 3, 5) - 1.0).abs() < 1e-12);
        assert_eq!(chen_defect(&table, 2, 2, 5), 0.0);
    }

    #[test]
    fn distance_to_zero_lift() {
        let g = grid(64);
        let t = g.times();
        let lift = RoughPathLift::canonical(g, &[t.clone(), t]).unwrap();
        let zero = RoughPathLift::canonical(g, &[vec![0.0; 65], vec![0.0; 65]]).unwrap();
        let r = rough_distance(&zero, &lift, 0.4).unwrap();
        assert!((r.dist - 1.5).abs() < 1e-12, "{}", r.dist);
        assert_eq!(rough_distance(&lift, &lift, 0.4).unwrap().dist, 0.0);
    }

    #[test]
    fn effective_flavor_adds_drift() {
        let g = grid(10);
        let lift = RoughPathLift::canonical(g, &[vec![0.0; 11]]).unwrap();
        let eff = lift.with_area(vec![0.25]).unwrap();
        assert!((eff.level2(2, 6)[0] - 0.4 * 0.25).abs() < 1e-15);
        assert!(max_chen_defect(&eff) < 1e-12);
    }

    #[test]
    fn mismatched_grid_rejected() {
        assert!(RoughPathLift::canonical(grid(4), &[vec![0.0; 3]]).is_err());
    }
}
