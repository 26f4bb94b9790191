//! Locally independent decomposition of the fOU process, conditional Hermite
//! moments and the `Û / M / N` martingale approximation of the area.
//!
//! With the Mandelbrot–Van Ness representation the unit-variance fOU is a
//! moving average of a two-sided Wiener process,
//! `y_t = √K ∫_{-∞}^t g(t-u) dW_u`, `g(v) = v^α - ∫_0^v e^{-(v-w)} w^α dw`,
//! `α = H - ½`, `K = 2 sin(πH)/Γ(H+½)²`. Conditioning on `F_k = σ(W_u, u ≤ k)`
//! keeps the cells before `k`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::chaos::{factorial, hermite_all, hermite_poly, ChaosExpansion, ScalingRegime};
use crate::error::{domain, Error, Result};
use crate::gaussian_noise::{integral_rho_power, FouCorrelation, FouSampler, FouSpec};
use crate::grid::TimeGrid;
use crate::quad::{gauss_kronrod_breaks, tanh_sinh, trapezoid, Integral};
use crate::stats::{self, Estimate};
use crate::{par, rng};

const SERIES_FROM: f64 = 40.0;

/// The Mandelbrot–Van Ness kernel of the fOU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnKernel {
    pub hurst: f64,
    alpha: f64,
    scale: f64,
}

impl MvnKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) || hurst == 0.5 {
            return domain(format!("Hurst parameter must lie in (0,1)\\{{1/2}}, got {hurst}"));
        }
        let scale = 2.0 * (PI * hurst).sin() / gamma(hurst + 0.5).powi(2);
        Ok(MvnKernel { hurst, alpha: hurst - 0.5, scale })
    }

    /// `K` with `K ∫_0^∞ g² = 1`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn series_coeffs(&self) -> [f64; 12] {
        let mut b = [0.0; 12];
        b[0] = self.alpha;
        for j in 1..12 {
            b[j] = -b[j - 1] * (self.alpha - j as f64);
        }
        b
    }

    /// `g(v)` for `v > 0`.
    pub fn g(&self, v: f64) -> f64 {
        let a = self.alpha;
        if v >= SERIES_FROM {
            // g(v) = Σ_{j≥1} (-1)^{j+1} α(α-1)…(α-j+1) v^{α-j}, asymptotic
            let mut term = a * v.powf(a - 1.0);
            let mut sum = term;
            for j in 1..60 {
                let next = -term * (a - j as f64) / v;
                if next.abs() >= term.abs() || next.abs() < 1e-18 * sum.abs() {
                    break;
                }
                sum += next;
                term = next;
            }
            return sum;
        }
        let va = v.powf(a);
        let body = tanh_sinh(|s, _, rest| (-s).exp() * (va - rest.powf(a)), 0.0, v, 1e-15);
        (-v).exp() * va + body.value
    }

    /// `∫_a^b g`, by `g = h'` with `h(v) = v^α - g(v)` and `h(0) = 0`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let al = self.alpha;
        if a == 0.0 {
            return b.powf(al) - self.g(b);
        }
        let pow_diff = a.powf(al) * (al * ((b - a) / a).ln_1p()).exp_m1();
        pow_diff - (self.g(b) - self.g(a))
    }

    /// `∫_v^∞ g²` from the asymptotic series, `v ≥ 40`.
    fn tail_square_series(&self, v: f64) -> f64 {
        let b = self.series_coeffs();
        let two_a = 2.0 * self.alpha;
        let mut sum = 0.0;
        for (i, bi) in b.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                let n = (i + 1 + j + 1) as f64;
                sum += bi * bj * v.powf(two_a - n + 1.0) / (n - 1.0 - two_a);
            }
        }
        sum
    }

    /// `∫_a^b g²` for `0 ≤ a < b ≤ 40`.
    fn square_integral(&self, a: f64, b: f64) -> Integral {
        let mut acc = Integral::zero();
        let mut lo = a;
        if lo < 1.0 {
            let hi = b.min(1.0);
            acc = acc + tanh_sinh(|v, _, _| self.g(v).powi(2), lo, hi, 1e-13);
            lo = hi;
        }
        if b > lo {
            let mut pts = vec![lo];
            let mut x = lo;
            while x * 2.0 < b {
                x *= 2.0;
                pts.push(x);
            }
            pts.push(b);
            acc = acc + gauss_kronrod_breaks(|v| self.g(v).powi(2), &pts, 1e-14, 1e-12);
        }
        acc
    }

    /// `∫_v^∞ g²`.
    pub fn tail_square(&self, v: f64) -> Integral {
        if v >= SERIES_FROM {
            return Integral { value: self.tail_square_series(v), error: 0.0 };
        }
        let head = self.square_integral(v, SERIES_FROM);
        Integral { value: head.value + self.tail_square_series(SERIES_FROM), error: head.error }
    }

    /// `∫_0^v g²`.
    pub fn head_square(&self, v: f64) -> Integral {
        if v <= SERIES_FROM {
            return self.square_integral(0.0, v);
        }
        let head = self.square_integral(0.0, SERIES_FROM);
        let tail = self.tail_square_series(SERIES_FROM) - self.tail_square_series(v);
        Integral { value: head.value + tail, error: head.error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub k: f64,
    pub t: f64,
    /// Standard deviation of the `F_k`-measurable part.
    pub a: f64,
    /// Standard deviation of the part independent of `F_k`.
    pub b: f64,
    pub error: f64,
    /// `a / (1 ∧ (t-k)^{H-1})`.
    pub decay_ratio: f64,
}

pub fn bar_variance(hurst: f64, k: f64, t: f64) -> Result<Decomposition> {
    if t < k - 1.0 {
        return domain("query time must satisfy t ≥ k - 1");
    }
    let kern = MvnKernel::new(hurst)?;
    if t <= k {
        return Ok(Decomposition { k, t, a: 1.0, b: 0.0, error: 0.0, decay_ratio: 1.0 });
    }
    let tau = t - k;
    let a2 = kern.tail_square(tau);
    let b2 = kern.head_square(tau);
    let error = kern.scale * (a2.error + b2.error);
    if error > 1e-8 {
        return Err(Error::Quadrature { achieved: error, target: 1e-8 });
    }
    let a = (kern.scale * a2.value).sqrt();
    Ok(Decomposition {
        k,
        t,
        a,
        b: (kern.scale * b2.value).sqrt(),
        error,
        decay_ratio: a / tau.powf(hurst - 1.0).min(1.0),
    })
}

/// `E[H_m(y_t) | F_k] = a^m H_m(ȳ/a)`.
pub fn conditional_hermite(m: usize, a: f64, xbar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return domain("a must lie in [0, 1]");
    }
    if a == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    Ok(a.powi(m as i32) * hermite_poly(m, xbar / a))
}

/// `Σ_j C(m,j) a^j b^{m-j} H_j(x) H_{m-j}(y)`, equal to `H_m(ax + by)`.
pub fn hermite_addition(m: usize, a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if (a * a + b * b - 1.0).abs() > 1e-12 {
        return domain("a² + b² must equal 1");
    }
    let hx = hermite_all(m, x);
    let hy = hermite_all(m, y);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..=m {
        sum += binom * a.powi(j as i32) * b.powi((m - j) as i32) * hx[j] * hy[m - j];
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// discretised model

/// Model sizes: cell width `δ`, Wiener warm-up `R_w` and the `Û` horizon `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub cells_per_unit: usize,
    pub warmup: usize,
    /// `None` picks the smallest horizon whose power-law tail is below 2%.
    pub horizon: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { cells_per_unit: 20, warmup: 400, horizon: None }
    }
}

struct Convolver {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex<f64>>,
}

impl Convolver {
    fn new(kernel: &[f64], signal_len: usize) -> Self {
        let size = (kernel.len() + signal_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut kernel_hat: Vec<Complex<f64>> = (0..size).map(|i| Complex::new(kernel.get(i).copied().unwrap_or(0.0), 0.0)).collect();
        fwd.process(&mut kernel_hat);
        Convolver { size, fwd, inv, kernel_hat }
    }

    /// First `signal.len()` entries of the linear convolution.
    fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = (0..self.size).map(|i| Complex::new(signal.get(i).copied().unwrap_or(0.0), 0.0)).collect();
        self.fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        let n = self.size as f64;
        buf.iter().take(signal.len()).map(|c| c.re / n).collect()
    }
}

/// Cell-averaged moving-average model of the fOU on a window `[-R_w, k_max + 1 + R]`.
///
/// `y` at grid point `i` is `√(K_d δ) Σ_{j<i} ḡ_{i-j} ξ_j` with `ḡ_l` the average of
/// `g` over `[(l-1)δ, lδ]` and `K_d` chosen so that `Var y = 1`.
pub struct DiscreteModel {
    pub hurst: f64,
    pub cfg: ModelConfig,
    pub horizon: usize,
    pub k_max: usize,
    delta: f64,
    /// `√(K_d δ) ḡ_l`, `l = 1, 2, …`
    weights: Vec<f64>,
    /// `a` at lag `lδ` after the conditioning time.
    a: Vec<f64>,
    full: Convolver,
    local: Convolver,
}

/// One realization: Wiener cell increments and the resulting `y` on the window.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub xi: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UHat {
    pub value: f64,
    /// Estimated `L²` size of the discarded `[k+R, ∞)` part.
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTraces {
    /// `I(k) = ∫_{k-1}^k U(y)`, `J(k)` likewise, for `k = 0..=k_max`.
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    /// `Û(k), V̂(k)` for `k = 0..=k_max + 1`.
    pub u_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// `M_k, N_k` for `k = 0..=k_max + 1`, with `M_0 = N_0 = 0`.
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    /// `∫_0^k ∫_0^s U(y_s) V(y_r) dr ds` for `k = 0..=k_max`.
    pub area: Vec<f64>,
    pub tail: f64,
}

fn power_tail(a: &[f64], m: usize, hurst: f64, delta: f64) -> (f64, f64) {
    let am: Vec<f64> = a.iter().map(|x| x.powi(m as i32)).collect();
    let head = trapezoid(&am, delta);
    let r = (a.len() - 1) as f64 * delta;
    let decay = m as f64 * (1.0 - hurst) - 1.0;
    let tail = if decay > 0.0 { am[am.len() - 1] * r / decay } else { f64::INFINITY };
    (head, tail)
}

impl DiscreteModel {
    /// `rank` sets the automatic horizon; `k_max` is the largest `k` used.
    pub fn new(hurst: f64, cfg: ModelConfig, rank: usize, k_max: usize) -> Result<Self> {
        let kern = MvnKernel::new(hurst)?;
        if cfg.cells_per_unit == 0 || cfg.warmup == 0 || rank == 0 {
            return domain("model sizes must be positive");
        }
        let cpu = cfg.cells_per_unit;
        let delta = 1.0 / cpu as f64;
        let max_horizon = cfg.horizon.unwrap_or(400);
        let n_kernel = (cfg.warmup + k_max + 2 + max_horizon) * cpu;
        let gbar: Vec<f64> = par::map_indexed(n_kernel, |l| kern.integral(l as f64 * delta, (l + 1) as f64 * delta) / delta);
        // tail sums of ḡ² from the end, including the continuous remainder
        let far = kern.tail_square(n_kernel as f64 * delta).value;
        let mut tail_sq = vec![0.0; n_kernel + 1];
        tail_sq[n_kernel] = far;
        for l in (0..n_kernel).rev() {
            tail_sq[l] = tail_sq[l + 1] + delta * gbar[l] * gbar[l];
        }
        let kd = 1.0 / tail_sq[0];
        let a: Vec<f64> = tail_sq.iter().map(|t| (kd * t).sqrt().min(1.0)).collect();
        let horizon = match cfg.horizon {
            Some(r) => r,
            None => {
                let mut r = 10;
                while r < max_horizon {
                    let (head, tail) = power_tail(&a[..=r * cpu], rank, hurst, delta);
                    if tail < 0.02 * head {
                        break;
                    }
                    r += 5;
                }
                r
            }
        };
        let weights: Vec<f64> = gbar.iter().map(|g| (kd * delta).sqrt() * g).collect();
        let window = (cfg.warmup + k_max + 2 + horizon) * cpu;
        let full = Convolver::new(&weights[..window], window);
        let local = Convolver::new(&weights[..horizon * cpu], horizon * cpu);
        Ok(DiscreteModel { hurst, cfg, horizon, k_max, delta, weights, a, full, local })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `a` at lag `l` cells after the conditioning time.
    pub fn a_at(&self, l: usize) -> f64 {
        self.a[l.min(self.a.len() - 1)]
    }

    fn window(&self) -> usize {
        (self.cfg.warmup + self.k_max + 2 + self.horizon) * self.cfg.cells_per_unit
    }

    /// Grid index of time `t` (an integer number of units).
    fn index(&self, t: i64) -> usize {
        ((self.cfg.warmup as i64 + t) * self.cfg.cells_per_unit as i64) as usize
    }

    /// Correlation of `y` at lag `l` cells in the discretised model.
    pub fn correlation(&self, l: usize) -> f64 {
        self.weights.iter().zip(&self.weights[l..]).map(|(a, b)| a * b).sum()
    }

    pub fn realize(&self, seed: u64, replica: u64) -> Realization {
        let xi = rng::normals(&mut rng::substream(seed, replica), self.window());
        let conv = self.full.apply(&xi);
        let mut y = vec![0.0; xi.len()];
        y[1..].copy_from_slice(&conv[..xi.len() - 1]);
        Realization { xi, y }
    }

    /// `ȳ^k` on `k + lδ`, `l = 0..=R/δ`.
    fn bar_path(&self, real: &Realization, k: i64) -> Vec<f64> {
        let i0 = self.index(k);
        let len = self.horizon * self.cfg.cells_per_unit;
        let rough = self.local.apply(&real.xi[i0..i0 + len]);
        let mut out = Vec::with_capacity(len + 1);
        out.push(real.y[i0]);
        for l in 1..=len {
            out.push(real.y[i0 + l] - rough[l - 1]);
        }
        out
    }

    fn integral_over(&self, real: &Realization, g: &ChaosExpansion, from: i64) -> f64 {
        let i0 = self.index(from);
        let cpu = self.cfg.cells_per_unit;
        let vals: Vec<f64> = real.y[i0..=i0 + cpu].iter().map(|&x| g.eval(x)).collect();
        trapezoid(&vals, self.delta)
    }

    /// `Û(k) = ∫_{k-1}^k U(y) + ∫_k^{k+R} Σ_q c_q a^q H_q(ȳ^k/a)`.
    pub fn u_hat(&self, real: &Realization, g: &ChaosExpansion, k: i64, exploratory: bool) -> Result<UHat> {
        let rank = check_regime(g, self.hurst, exploratory)?;
        if k < 0 || k as usize > self.k_max + 1 {
            return domain("k outside the simulated window");
        }
        let head = self.integral_over(real, g, k - 1);
        let bar = self.bar_path(real, k);
        let l_max = g.coeffs.len() - 1;
        let vals: Vec<f64> = bar
            .iter()
            .enumerate()
            .map(|(l, &x)| {
                let a = self.a_at(l);
                if a == 0.0 {
                    return 0.0;
                }
                let h = hermite_all(l_max, x / a);
                let mut pow = 1.0;
                let mut s = 0.0;
                for (q, c) in g.coeffs.iter().enumerate() {
                    if q > 0 {
                        pow *= a;
                    }
                    s += c * pow * h[q];
                }
                s
            })
            .collect();
        let (_, tail) = power_tail(&self.a[..bar.len()], rank, self.hurst, self.delta);
        let norm = g.l2_norm.sqrt();
        Ok(UHat { value: head + trapezoid(&vals, self.delta), tail: norm * tail })
    }

    /// `∫∫_{[k-1, k+R]²} (E ȳ^k_s ȳ^k_r)^m ds dr`.
    pub fn integrable_bound(&self, m: usize) -> f64 {
        let cpu = self.cfg.cells_per_unit;
        let n = (self.horizon + 1) * cpu;
        let w = &self.weights;
        // Points l ∈ [0, n] sit at (k-1) + lδ. Cells before k reach point l through
        // kernel indices q ≥ max(1, l - cpu + 1); a shared cell pairs q with q + d.
        let mut total = 0.0;
        for d in 0..=n {
            let top = w.len() - d;
            let mut tails = vec![0.0; n + 2];
            let mut acc = 0.0;
            for q in (1..=top).rev() {
                acc += w[q - 1] * w[q + d - 1];
                if q <= n + 1 {
                    tails[q] = acc;
                }
            }
            for lo in 0..=n - d {
                let start = if lo + 1 > cpu { lo + 1 - cpu } else { 1 };
                let wt = trap_weight(lo, n) * trap_weight(lo + d, n);
                total += (if d == 0 { 1.0 } else { 2.0 }) * wt * tails[start].powi(m as i32);
            }
        }
        total * self.delta * self.delta
    }

    /// Traces of `I, J, Û, V̂, M, N` and the double integral on one realization.
    pub fn traces(&self, real: &Realization, u: &ChaosExpansion, v: &ChaosExpansion, exploratory: bool) -> Result<MartingaleTraces> {
        let km = self.k_max;
        let mut u_hat = Vec::with_capacity(km + 2);
        let mut v_hat = Vec::with_capacity(km + 2);
        let mut tail: f64 = 0.0;
        for k in 0..=(km as i64 + 1) {
            let a = self.u_hat(real, u, k, exploratory)?;
            let b = self.u_hat(real, v, k, exploratory)?;
            tail = tail.max(a.tail).max(b.tail);
            u_hat.push(a.value);
            v_hat.push(b.value);
        }
        let i: Vec<f64> = (0..=km as i64).map(|k| self.integral_over(real, u, k - 1)).collect();
        let j: Vec<f64> = (0..=km as i64).map(|k| self.integral_over(real, v, k - 1)).collect();
        let mut m = vec![0.0; km + 2];
        let mut n = vec![0.0; km + 2];
        for k in 0..=km {
            m[k + 1] = m[k] + i[k] + u_hat[k + 1] - u_hat[k];
            n[k + 1] = n[k] + j[k] + v_hat[k + 1] - v_hat[k];
        }
        let i0 = self.index(0);
        let cpu = self.cfg.cells_per_unit;
        let uu: Vec<f64> = real.y[i0..=i0 + km * cpu].iter().map(|&x| u.eval(x)).collect();
        let vv: Vec<f64> = real.y[i0..=i0 + km * cpu].iter().map(|&x| v.eval(x)).collect();
        let cv = crate::quad::cumulative_trapezoid(&vv, self.delta);
        let prod: Vec<f64> = uu.iter().zip(&cv).map(|(a, b)| a * b).collect();
        let cum = crate::quad::cumulative_trapezoid(&prod, self.delta);
        let area = (0..=km).map(|k| cum[k * cpu]).collect();
        Ok(MartingaleTraces { i, j, u_hat, v_hat, m, n, area, tail })
    }
}

fn trap_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

fn check_regime(g: &ChaosExpansion, hurst: f64, exploratory: bool) -> Result<usize> {
    let m = match g.rank {
        Some(m) if m >= 1 => m,
        None => return Ok(1),
        _ => return domain("observable must be centred"),
    };
    let r = ScalingRegime::new(m, hurst)?;
    if r.h_star >= 0.0 && !exploratory {
        return Err(Error::Regime(format!("H*({m}) = {} ≥ 0: Û integrability is not established", r.h_star)));
    }
    Ok(m)
}

/// `γ = Σ_q c_{U,q} c_{V,q} q! ∫_0^∞ ρ^q`.
pub fn gamma_constant(u: &ChaosExpansion, v: &ChaosExpansion, hurst: f64) -> Result<f64> {
    let corr = FouCorrelation::new(hurst)?;
    let top = u.coeffs.len().min(v.coeffs.len());
    let mut g = 0.0;
    for q in 1..top {
        let c = u.coeff(q) * v.coeff(q);
        if c != 0.0 {
            g += c * factorial(q) * integral_rho_power(&corr, q as u32, true)?;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaLevel {
    pub eps: f64,
    pub residuals: Vec<f64>,
    pub median_abs: f64,
    /// `median |residual| / (tγ)`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub hurst: f64,
    pub t: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub levels: Vec<AreaLevel>,
    /// Median `|residual|` strictly decreasing as `ε` decreases.
    pub decreasing: bool,
}

/// Residual `ε∫∫UV − εΣ(M_{k+1}−M_k)N_k − tγ` per realization and `ε`.
/// All `ε` share realizations; `t/ε` must be an integer.
pub fn area_decomposition_check(
    u: &ChaosExpansion,
    v: &ChaosExpansion,
    hurst: f64,
    eps: &[f64],
    t: f64,
    realizations: usize,
    seed: u64,
    cfg: ModelConfig,
) -> Result<AreaReport> {
    let mu = check_regime(u, hurst, false)?;
    let mv = check_regime(v, hurst, false)?;
    let mut lengths = Vec::new();
    for &e in eps {
        let l = t / e;
        if !(e > 0.0) || (l - l.round()).abs() > 1e-9 || l.round() < 1.0 {
            return domain("t/ε must be a positive integer");
        }
        lengths.push(l.round() as usize);
    }
    let k_max = *lengths.iter().max().unwrap_or(&1);
    let cost = realizations as f64 * (k_max as f64 + 2.0) * 2.0 * 400.0 * cfg.cells_per_unit as f64;
    if cost > 5e10 {
        return Err(Error::CostGuard(format!("area check would need about {cost:.1e} kernel evaluations")));
    }
    let model = DiscreteModel::new(hurst, cfg, mu.min(mv), k_max)?;
    let gamma = gamma_constant(u, v, hurst)?;
    let traces = par::map_indexed(realizations, |r| model.traces(&model.realize(seed, r as u64), u, v, false));
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let mut levels = Vec::new();
    for (&e, &l) in eps.iter().zip(&lengths) {
        let residuals: Vec<f64> = traces
            .iter()
            .map(|tr| {
                let mart: f64 = (1..=l).map(|k| (tr.m[k + 1] - tr.m[k]) * tr.n[k]).sum();
                e * tr.area[l] - e * mart - t * gamma
            })
            .collect();
        let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        let median_abs = stats::median(&abs);
        levels.push(AreaLevel { eps: e, residuals, median_abs, relative: median_abs / (t * gamma).abs() });
    }
    let mut sorted: Vec<&AreaLevel> = levels.iter().collect();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let decreasing = sorted.windows(2).all(|w| w[1].median_abs < w[0].median_abs);
    Ok(AreaReport { hurst, t, gamma, horizon: model.horizon, levels, decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub hurst: f64,
    /// `∫ s(x) dx`, to be compared with `ρ(0) = 1`.
    pub spectral_mass: f64,
    pub horizon: f64,
    pub mean_y: Estimate,
    pub mean_h2: Estimate,
    pub passed: bool,
}

/// Spectral mass of `s(x) = sin(πH)/π · |x|^{1-2H}/(1+x²)` and ergodic averages of
/// `y` and `H₂(y)` over `[0, T]`.
pub fn ergodicity_spotcheck(hurst: f64, horizon: f64, replicas: usize, seed: u64) -> Result<ErgodicityReport> {
    let spec = FouSpec::new(hurst, 1.0)?;
    let c = (PI * hurst).sin() / PI;
    let p = 1.0 - 2.0 * hurst;
    // ∫_0^1 x^p/(1+x²) + ∫_0^1 u^{-p}/(1+u²) after x = 1/u
    let left = tanh_sinh(|x, _, _| x.powf(p) / (1.0 + x * x), 0.0, 1.0, 1e-14);
    let right = tanh_sinh(|u, _, _| u.powf(-p) / (1.0 + u * u), 0.0, 1.0, 1e-14);
    let spectral_mass = 2.0 * c * (left.value + right.value);
    let steps = (horizon * 10.0).round() as usize;
    let sampler = FouSampler::new(spec, TimeGrid::over(horizon, steps)?)?;
    let avgs = par::map_indexed(replicas, |r| {
        let y = sampler.sample_values(&mut rng::substream(seed, r as u64));
        let h2: Vec<f64> = y.iter().map(|x| x * x - 1.0).collect();
        (trapezoid(&y, horizon / steps as f64) / horizon, trapezoid(&h2, horizon / steps as f64) / horizon)
    });
    let mean_y = stats::mean_estimate(&avgs.iter().map(|a| a.0).collect::<Vec<_>>());
    let mean_h2 = stats::mean_estimate(&avgs.iter().map(|a| a.1).collect::<Vec<_>>());
    let passed = (spectral_mass - 1.0).abs() < 1e-6 && mean_y.within(0.0, 4.0) && mean_h2.within(0.0, 4.0);
    Ok(ErgodicityReport { hurst, spectral_mass, horizon, mean_y, mean_h2, passed })
}
