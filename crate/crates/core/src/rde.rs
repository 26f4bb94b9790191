//! Solvers for the slow/fast ODE, the effective rough differential equation
//! and the classical Stratonovich/Young form of the limit, plus the
//! homogenisation experiment comparing their endpoint laws.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaos::{validate_assumptions, ChaosExpansion, ScalingRegime};
use crate::error::{domain, Error, Result};
use crate::functional_limits::{drift_matrix, hermite_limit_variance, DriftMatrix};
use crate::gaussian_noise::{sample_wiener_values, FouSampler, FouSpec, GaussianPath, PathLabel};
use crate::grid::TimeGrid;
use crate::hermite_process::{HermiteSampler, HermiteSpec};
use crate::rough_path::{Increments, RoughPathLift};
use crate::stats;
use crate::{par, rng};

type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Named vector fields acting on `R^d` (coordinate-wise unless stated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldPreset {
    Zero,
    /// A constant vector.
    Constant { value: Vec<f64> },
    /// `f(x) = scale · x`.
    Linear { scale: f64 },
    /// `f(x)_i = sin(x_i) + 2`.
    SinPlusTwo,
    /// `f(x)_i = cos(x_i)`.
    Cos,
    /// `f(x) = scale · (-x_2, x_1)`, `d = 2`.
    Rotation { scale: f64 },
}

/// `f_1, …, f_N : R^d → R^d` with optional analytic Jacobians.
#[derive(Clone)]
pub struct VectorFieldFamily {
    pub d: usize,
    fields: Vec<FieldFn>,
    jacobians: Vec<Option<FieldFn>>,
}

impl fmt::Debug for VectorFieldFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldFamily").field("d", &self.d).field("n", &self.fields.len()).finish()
    }
}

impl VectorFieldFamily {
    pub fn new(d: usize) -> Self {
        VectorFieldFamily { d, fields: Vec::new(), jacobians: Vec::new() }
    }

    pub fn push<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.fields.push(Arc::new(f));
        self.jacobians.push(None);
        self
    }

    /// `jac(x, out)` writes `∂f_i/∂x_l` to `out[i·d + l]`.
    pub fn push_with_jacobian<F, J>(mut self, f: F, jac: J) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.fields.push(Arc::new(f));
        self.jacobians.push(Some(Arc::new(jac)));
        self
    }

    pub fn from_presets(d: usize, presets: &[FieldPreset]) -> Result<Self> {
        let mut fam = VectorFieldFamily::new(d);
        for p in presets {
            fam = match p.clone() {
                FieldPreset::Zero => fam.push_with_jacobian(|_, o| o.fill(0.0), |_, j| j.fill(0.0)),
                FieldPreset::Constant { value } => {
                    if value.len() != d {
                        return domain(format!("constant field needs {d} entries"));
                    }
                    fam.push_with_jacobian(move |_, o| o.copy_from_slice(&value), |_, j| j.fill(0.0))
                }
                FieldPreset::Linear { scale } => fam.push_with_jacobian(
                    move |x, o| o.iter_mut().zip(x).for_each(|(o, x)| *o = scale * x),
                    move |x, j| diagonal(j, x.len(), |_| scale),
                ),
                FieldPreset::SinPlusTwo => fam.push_with_jacobian(
                    |x, o| o.iter_mut().zip(x).for_each(|(o, x)| *o = x.sin() + 2.0),
                    |x, j| diagonal(j, x.len(), |i| x[i].cos()),
                ),
                FieldPreset::Cos => fam.push_with_jacobian(
                    |x, o| o.iter_mut().zip(x).for_each(|(o, x)| *o = x.cos()),
                    |x, j| diagonal(j, x.len(), |i| -x[i].sin()),
                ),
                FieldPreset::Rotation { scale } => {
                    if d != 2 {
                        return domain("rotation field needs d = 2");
                    }
                    fam.push_with_jacobian(
                        move |x, o| {
                            o[0] = -scale * x[1];
                            o[1] = scale * x[0];
                        },
                        move |_, j| j.copy_from_slice(&[0.0, -scale, scale, 0.0]),
                    )
                }
            };
        }
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn eval(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        (self.fields[k])(x, &mut out);
        out
    }

    /// `Df_k(x)`, row-major; central differences with `h = 1e-5 (1 + |x|)` unless analytic.
    pub fn jacobian(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        if let Some(j) = &self.jacobians[k] {
            j(x, &mut out);
            return out;
        }
        let h = 1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut xp = x.to_vec();
        let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
        for l in 0..d {
            xp[l] = x[l] + h;
            (self.fields[k])(&xp, &mut fp);
            xp[l] = x[l] - h;
            (self.fields[k])(&xp, &mut fm);
            xp[l] = x[l];
            for i in 0..d {
                out[i * d + l] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        out
    }

    /// `F(x)u = Σ_k u_k f_k(x)`.
    pub fn apply(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        let mut buf = vec![0.0; self.d];
        for (k, uk) in u.iter().enumerate() {
            if *uk != 0.0 {
                (self.fields[k])(x, &mut buf);
                out.iter_mut().zip(&buf).for_each(|(o, b)| *o += uk * b);
            }
        }
        out
    }
}

fn diagonal(j: &mut [f64], d: usize, v: impl Fn(usize) -> f64) {
    j.fill(0.0);
    for i in 0..d {
        j[i * d + i] = v(i);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4Slow,
    DavieRde,
    HeunStratonovich,
    YoungEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub grid: TimeGrid,
    /// States at every grid point.
    pub trajectory: Vec<Vec<f64>>,
    pub scheme: Scheme,
    pub step: f64,
    /// `|x_T - x_T(2h)|` against the solve on every other grid point, when computed.
    pub error_estimate: Option<f64>,
}

impl SolveReport {
    pub fn endpoint(&self) -> &[f64] {
        self.trajectory.last().unwrap()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| x + a * y).collect()
}

fn guard(x: &[f64], t: f64, bound: f64) -> Result<()> {
    let n = norm(x);
    if !(n <= bound) {
        return Err(Error::BlowUp { t, norm: n });
    }
    Ok(())
}

pub const BLOW_UP: f64 = 1e8;

/// RK4 for `ẋ = F(x) u(t)` with `u` known on `grid` and linear in between.
pub fn rk4_forced(family: &VectorFieldFamily, forcing: &[Vec<f64>], grid: TimeGrid, x0: &[f64], stride: usize) -> Result<Vec<Vec<f64>>> {
    let n = grid.steps() / stride;
    let h = grid.dt() * stride as f64;
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(n + 1);
    out.push(x.clone());
    for i in 0..n {
        let (u0, u1) = (&forcing[i * stride], &forcing[(i + 1) * stride]);
        let um: Vec<f64> = u0.iter().zip(u1).map(|(a, b)| 0.5 * (a + b)).collect();
        let k1 = family.apply(&x, u0);
        let k2 = family.apply(&axpy(&x, 0.5 * h, &k1), &um);
        let k3 = family.apply(&axpy(&x, 0.5 * h, &k2), &um);
        let k4 = family.apply(&axpy(&x, h, &k3), u1);
        for l in 0..x.len() {
            x[l] += h / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]);
        }
        guard(&x, (i + 1) as f64 * h, BLOW_UP)?;
        out.push(x.clone());
    }
    Ok(out)
}

fn check_family(family: &VectorFieldFamily, n: usize, x0: &[f64]) -> Result<()> {
    if family.len() != n {
        return domain(format!("{} vector fields for {n} drivers", family.len()));
    }
    if x0.len() != family.d {
        return domain(format!("initial state has {} entries, d = {}", x0.len(), family.d));
    }
    Ok(())
}

/// Forcing values `α_k G_k(y_i)` on the grid of `y`.
pub fn multiscale_forcing(gs: &[ChaosExpansion], y: &[f64], hurst: f64, eps: f64) -> Result<Vec<Vec<f64>>> {
    let alphas = gs
        .iter()
        .map(|g| match g.rank {
            Some(m) if m >= 1 && g.is_centred() => Ok(ScalingRegime::new(m, hurst)?.alpha(eps)),
            _ => domain("observables must be centred with positive rank"),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(y.iter().map(|&v| gs.iter().zip(&alphas).map(|(g, a)| a * g.eval(v)).collect()).collect())
}

/// `ẋ = Σ_k α_k(ε) f_k(x) G_k(y^ε_t)` by RK4 on the grid of `y`.
pub fn solve_multiscale(family: &VectorFieldFamily, gs: &[ChaosExpansion], y: &GaussianPath, x0: &[f64], estimate: bool) -> Result<SolveReport> {
    let (hurst, eps) = match y.label {
        PathLabel::Fou { hurst, eps } => (hurst, eps),
        _ => return domain("the fast process must be an fOU path"),
    };
    check_family(family, gs.len(), x0)?;
    if y.grid.dt() > eps / 20.0 * (1.0 + 1e-9) {
        return Err(Error::StepTooCoarse(format!("dt = {} exceeds ε/20 = {}", y.grid.dt(), eps / 20.0)));
    }
    let forcing = multiscale_forcing(gs, &y.values, hurst, eps)?;
    let trajectory = rk4_forced(family, &forcing, y.grid, x0, 1)?;
    let error_estimate = if estimate && y.grid.steps() % 2 == 0 {
        let coarse = rk4_forced(family, &forcing, y.grid, x0, 2)?;
        Some(norm(&axpy(trajectory.last().unwrap(), -1.0, coarse.last().unwrap())))
    } else {
        None
    };
    Ok(SolveReport { grid: y.grid, trajectory, scheme: Scheme::Rk4Slow, step: y.grid.dt(), error_estimate })
}

fn davie<L: Increments>(lift: &L, grid: TimeGrid, family: &VectorFieldFamily, x0: &[f64], stride: usize) -> Result<Vec<Vec<f64>>> {
    let d = family.d;
    let nd = lift.dim();
    let steps = grid.steps() / stride;
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    for s in 0..steps {
        let (a, b) = (s * stride, (s + 1) * stride);
        let dx = lift.level1(a, b);
        let xx = lift.level2(a, b);
        let mut next = axpy(&x, 1.0, &family.apply(&x, &dx));
        let f: Vec<Vec<f64>> = (0..nd).map(|j| family.eval(j, &x)).collect();
        for k in 0..nd {
            let jac = family.jacobian(k, &x);
            for j in 0..nd {
                let w = xx[j * nd + k];
                if w == 0.0 {
                    continue;
                }
                for i in 0..d {
                    let dfk_fj: f64 = (0..d).map(|l| jac[i * d + l] * f[j][l]).sum();
                    next[i] += dfk_fj * w;
                }
            }
        }
        x = next;
        guard(&x, grid.time(b), BLOW_UP)?;
        out.push(x.clone());
    }
    Ok(out)
}

/// Second-order step `x ← x + F(x)X_{s,t} + Σ_{j,k} Df_k f_j 𝕏^{jk}_{s,t}`, with the lift's
/// `(t-s)A` included when it is of the effective flavour.
pub fn solve_rde(lift: &RoughPathLift, family: &VectorFieldFamily, x0: &[f64], estimate: bool) -> Result<SolveReport> {
    check_family(family, lift.dim, x0)?;
    let trajectory = davie(lift, lift.grid, family, x0, 1)?;
    let error_estimate = if estimate && lift.grid.steps() % 2 == 0 {
        let coarse = davie(lift, lift.grid, family, x0, 2)?;
        Some(norm(&axpy(trajectory.last().unwrap(), -1.0, coarse.last().unwrap())))
    } else {
        None
    };
    Ok(SolveReport { grid: lift.grid, trajectory, scheme: Scheme::DavieRde, step: lift.grid.dt(), error_estimate })
}

/// Step used for the Hermite (Young) block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YoungStep {
    #[default]
    Heun,
    LeftPoint,
}

/// Drivers of the limit equation on a common grid: the first `n` components are
/// `U W` with `UᵀU = 2A`, the rest Hermite paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitDrivers {
    pub grid: TimeGrid,
    pub n: usize,
    pub paths: Vec<Vec<f64>>,
}

/// Heun steps for the Wiener block; Heun or left-point steps for the Hermite block.
pub fn solve_limit_classical(family: &VectorFieldFamily, drivers: &LimitDrivers, x0: &[f64], young: YoungStep) -> Result<SolveReport> {
    let nd = drivers.paths.len();
    check_family(family, nd, x0)?;
    let grid = drivers.grid;
    let mut x = x0.to_vec();
    let mut trajectory = Vec::with_capacity(grid.len());
    trajectory.push(x.clone());
    for s in 0..grid.steps() {
        let dx: Vec<f64> = drivers.paths.iter().map(|p| p[s + 1] - p[s]).collect();
        let f0 = family.apply(&x, &dx);
        let pred = axpy(&x, 1.0, &f0);
        let (heun_dx, left_dx): (Vec<f64>, Vec<f64>) = match young {
            YoungStep::Heun => (dx.clone(), vec![0.0; nd]),
            YoungStep::LeftPoint => (
                dx.iter().enumerate().map(|(k, v)| if k < drivers.n { *v } else { 0.0 }).collect(),
                dx.iter().enumerate().map(|(k, v)| if k < drivers.n { 0.0 } else { *v }).collect(),
            ),
        };
        let a = family.apply(&x, &heun_dx);
        let b = family.apply(&pred, &heun_dx);
        let c = family.apply(&x, &left_dx);
        for i in 0..x.len() {
            x[i] += 0.5 * (a[i] + b[i]) + c[i];
        }
        guard(&x, grid.time(s + 1), BLOW_UP)?;
        trajectory.push(x.clone());
    }
    let scheme = if drivers.n == nd || young == YoungStep::Heun { Scheme::HeunStratonovich } else { Scheme::YoungEuler };
    Ok(SolveReport { grid, trajectory, scheme, step: grid.dt(), error_estimate: None })
}

/// Sampler of [`LimitDrivers`] for a family of observables.
pub struct LimitDriverSampler {
    grid: TimeGrid,
    n: usize,
    /// Symmetric `U` with `U U = 2A` on the Wiener block, row-major.
    u: Vec<f64>,
    hermite: Vec<(HermiteSampler, f64)>,
}

impl LimitDriverSampler {
    /// `order` lists observables with the Wiener block first.
    pub fn new(drift: &DriftMatrix, hermite: Vec<(HermiteSampler, f64)>, grid: TimeGrid) -> Result<Self> {
        let u = if drift.n > 0 { drift.sqrt_2a()? } else { Vec::new() };
        Ok(LimitDriverSampler { grid, n: drift.n, u, hermite })
    }

    /// Independent Wiener and Hermite noise from derived streams of `seed`.
    pub fn sample(&self, seed: u64, replica: u64) -> LimitDrivers {
        let n = self.n;
        let mut paths = Vec::with_capacity(n + self.hermite.len());
        if n > 0 {
            let mut r = rng::substream(rng::derive_seed(seed, 1), replica);
            let w: Vec<Vec<f64>> = (0..n).map(|_| sample_wiener_values(&self.grid, &mut r)).collect();
            for i in 0..n {
                paths.push((0..self.grid.len()).map(|t| (0..n).map(|j| self.u[i * n + j] * w[j][t]).sum()).collect());
            }
        }
        if !self.hermite.is_empty() {
            let mut r = rng::substream(rng::derive_seed(seed, 2), replica);
            let z = rng::normals(&mut r, self.hermite[0].0.noise_len());
            for (s, scale) in &self.hermite {
                paths.push(s.values_from_noise(&z).into_iter().map(|v| v * scale).collect());
            }
        }
        LimitDrivers { grid: self.grid, n, paths }
    }
}

// ---------------------------------------------------------------------------
// homogenisation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenisationParams {
    pub hurst: f64,
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub horizon: f64,
    pub paths: usize,
    pub limit_paths: usize,
    /// Steps of the limit solver grid; `horizon / limit_steps` must be a multiple of the Hermite mesh.
    pub limit_steps: usize,
    /// Points of the unit-time fOU grid per unit time.
    pub resolution: usize,
    pub seed: u64,
    /// Integrability exponent used for the assumption check.
    pub p: f64,
    pub q: u32,
    pub young: YoungStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenisationLevel {
    pub eps: f64,
    /// KS distance to the limit law per coordinate at `T`.
    pub ks: Vec<f64>,
    /// Energy distance of `(x_{T/2}, x_T)` to the limit.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenisationReport {
    pub hurst: f64,
    pub n: usize,
    pub drift: DriftMatrix,
    pub levels: Vec<HomogenisationLevel>,
    /// KS strictly decreasing as `ε` decreases, per coordinate.
    pub decreasing: Vec<bool>,
    pub final_ks: Vec<f64>,
}

fn endpoints(traj: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = traj.len() - 1;
    (traj[n / 2].clone(), traj[n].clone())
}

/// Endpoint laws of `x^ε` (for each `ε`) and of the limit equation.
pub fn homogenisation_experiment(family: &VectorFieldFamily, gs: &[ChaosExpansion], params: &HomogenisationParams) -> Result<HomogenisationReport> {
    let hurst = params.hurst;
    check_family(family, gs.len(), &params.x0)?;
    let specs: Vec<(ChaosExpansion, f64)> = gs.iter().map(|g| (g.clone(), params.p)).collect();
    let check = validate_assumptions(&specs, hurst, params.q)?;
    if !check.passed() {
        return Err(Error::Assumption(check.violations.join("; ")));
    }
    if params.resolution < 20 {
        return Err(Error::StepTooCoarse(format!("resolution {} gives dt > ε/20", params.resolution)));
    }
    if params.paths < 2 || params.limit_paths < 2 || params.limit_steps % 2 != 0 {
        return domain("need at least two paths and an even limit grid");
    }
    let mut steps_per_eps = Vec::new();
    for &e in &params.eps {
        if !(e > 0.0 && e <= 0.5) {
            return domain("ε must lie in (0, 1/2]");
        }
        let s = params.horizon * params.resolution as f64 / e;
        if (s - s.round()).abs() > 1e-6 || s.round() as usize % 2 != 0 {
            return domain("T·resolution/ε must be an even integer");
        }
        steps_per_eps.push(s.round() as usize);
    }
    // observables in block order: Wiener block first
    let order = check.ordering.clone();
    let n = check.n;
    let ordered: Vec<ChaosExpansion> = order.iter().map(|&k| gs[k].clone()).collect();
    let drift = drift_matrix(&ordered, hurst, n)?;

    // x^ε from one unit-time fOU path per replica
    let unit_steps = *steps_per_eps.iter().max().unwrap();
    let delta = 1.0 / params.resolution as f64;
    let unit = FouSampler::new(FouSpec::new(hurst, 1.0)?, TimeGrid::new(unit_steps, delta)?)?;
    let forward = par::map_indexed(params.paths, |r| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let y = unit.sample_values(&mut rng::substream(params.seed, r as u64));
        params
            .eps
            .iter()
            .zip(&steps_per_eps)
            .map(|(&e, &steps)| {
                let forcing = multiscale_forcing(gs, &y[..=steps], hurst, e)?;
                let grid = TimeGrid::over(params.horizon, steps)?;
                Ok(endpoints(&rk4_forced(family, &forcing, grid, &params.x0, 1)?))
            })
            .collect()
    });
    let forward = forward.into_iter().collect::<Result<Vec<_>>>()?;

    // limit: family reordered to match the driver order
    let limit_grid = TimeGrid::over(params.horizon, params.limit_steps)?;
    let mut hermite = Vec::new();
    for g in &ordered[n..] {
        let m = g.rank.unwrap_or(1);
        let spec = HermiteSpec::for_rank(m, hurst)?;
        let scale = g.coeff(m) * hermite_limit_variance(m, hurst)?.sqrt();
        hermite.push((HermiteSampler::new(spec, limit_grid)?, scale));
    }
    let sampler = LimitDriverSampler::new(&drift, hermite, limit_grid)?;
    let mut reordered = VectorFieldFamily::new(family.d);
    for &k in &order {
        reordered.fields.push(family.fields[k].clone());
        reordered.jacobians.push(family.jacobians[k].clone());
    }
    let limit_seed = rng::derive_seed(params.seed, 99);
    let limit = par::map_indexed(params.limit_paths, |r| -> Result<(Vec<f64>, Vec<f64>)> {
        let drivers = sampler.sample(limit_seed, r as u64);
        Ok(endpoints(&solve_limit_classical(&reordered, &drivers, &params.x0, params.young)?.trajectory))
    });
    let limit = limit.into_iter().collect::<Result<Vec<_>>>()?;

    let d = family.d;
    let limit_joint: Vec<Vec<f64>> = limit.iter().map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
    let mut levels = Vec::new();
    for (e_idx, &e) in params.eps.iter().enumerate() {
        let ks = (0..d)
            .map(|i| {
                let a: Vec<f64> = forward.iter().map(|f| f[e_idx].1[i]).collect();
                let b: Vec<f64> = limit.iter().map(|l| l.1[i]).collect();
                stats::ks_two_sample(&a, &b)
            })
            .collect();
        let joint: Vec<Vec<f64>> = forward.iter().map(|f| f[e_idx].0.iter().chain(&f[e_idx].1).copied().collect()).collect();
        let energy = stats::energy_distance(&joint, &limit_joint);
        levels.push(HomogenisationLevel { eps: e, ks, energy });
    }
    let mut by_eps: Vec<&HomogenisationLevel> = levels.iter().collect();
    by_eps.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let decreasing = (0..d).map(|i| by_eps.windows(2).all(|w| w[1].ks[i] < w[0].ks[i])).collect();
    let final_ks = by_eps.last().unwrap().ks.clone();
    Ok(HomogenisationReport { hurst, n, drift, levels, decreasing, final_ks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_noise::sample_fou;

    fn smooth_family() -> VectorFieldFamily {
        VectorFieldFamily::new(2)
            .push(|x, o| {
                o[0] = -0.5 * x[1];
                o[1] = 0.5 * x[0];
            })
            .push(|x, o| {
                o[0] = x[0].sin();
                o[1] = (0.3 * x[1]).cos();
            })
    }

    #[test]
    fn finite_difference_jacobian() {
        let fam = smooth_family();
        let j = fam.jacobian(1, &[0.4, -1.0]);
        assert!((j[0] - 0.4f64.cos()).abs() < 1e-8);
        assert!((j[3] + 0.3 * (-0.3f64).sin()).abs() < 1e-8);
        assert!(j[1].abs() < 1e-10 && j[2].abs() < 1e-10);
    }

    #[test]
    fn zero_field_keeps_state() {
        let fam = VectorFieldFamily::from_presets(1, &[FieldPreset::Zero]).unwrap();
        let spec = FouSpec::new(0.3, 0.05).unwrap();
        let y = sample_fou(spec, TimeGrid::over(1.0, 400).unwrap(), 3).unwrap();
        let r = solve_multiscale(&fam, &[ChaosExpansion::hermite(3)], &y, &[1.5], false).unwrap();
        assert!(r.trajectory.iter().all(|x| x[0] == 1.5));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let fam = VectorFieldFamily::from_presets(1, &[FieldPreset::Cos]).unwrap();
        let y = sample_fou(FouSpec::new(0.3, 0.05).unwrap(), TimeGrid::over(1.0, 100).unwrap(), 3).unwrap();
        assert!(matches!(
            solve_multiscale(&fam, &[ChaosExpansion::hermite(3)], &y, &[0.0], false),
            Err(Error::StepTooCoarse(_))
        ));
    }

    #[test]
    fn constant_field_integrates_the_functional() {
        let fam = VectorFieldFamily::from_presets(1, &[FieldPreset::Constant { value: vec![2.0] }]).unwrap();
        let spec = FouSpec::new(0.3, 0.05).unwrap();
        let y = sample_fou(spec, TimeGrid::over(1.0, 400).unwrap(), 4).unwrap();
        let g = ChaosExpansion::hermite(3);
        let r = solve_multiscale(&fam, &[g.clone()], &y, &[1.0], false).unwrap();
        let x = crate::functional_limits::path_functional(&g, &y, &ScalingRegime::new(3, 0.3).unwrap()).unwrap();
        for (s, xv) in r.trajectory.iter().zip(&x) {
            assert!((s[0] - 1.0 - 2.0 * xv).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_driver_rde_is_constant() {
        let grid = TimeGrid::over(1.0, 16).unwrap();
        let lift = RoughPathLift::canonical(grid, &[vec![0.0; 17], vec![0.0; 17]]).unwrap();
        let r = solve_rde(&lift, &smooth_family(), &[0.3, 0.2], false).unwrap();
        assert!(r.trajectory.iter().all(|x| x == &vec![0.3, 0.2]));
    }

    #[test]
    fn blow_up_is_reported() {
        let fam = VectorFieldFamily::new(1).push(|x, o| o[0] = x[0] * x[0]);
        let grid = TimeGrid::over(2.0, 200).unwrap();
        let lift = RoughPathLift::canonical(grid, &[grid.times()]).unwrap();
        assert!(matches!(solve_rde(&lift, &fam, &[1.0], false), Err(Error::BlowUp { .. })));
    }
}
