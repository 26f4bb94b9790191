//! Exact-law samplers for fractional Brownian motion, Wiener paths and the
//! stationary fractional Ornstein–Uhlenbeck process, together with the fOU
//! correlation function.
//!
//! The fOU correlation is available through two independent routes:
//!
//! * a time-domain formula obtained from `y_t = ∫_0^∞ e^{-r}(B_t - B_{t-r}) dr`,
//!   which reduces `E(y_0 y_s)` to the single integral
//!   `¼ ∫_0^∞ e^{-r} [(s+r)^{2H} + |s-r|^{2H} - 2 s^{2H}] dr` (fast, used for sampling);
//! * the spectral representation with density `∝ |x|^{1-2H}/(1+x²)`,
//!   integrated over half periods of the cosine with Euler acceleration of the
//!   alternating tail (used for [`fou_correlation`] tables).
//!
//! Both are normalised numerically so that `ρ(0) = 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::quad::{gauss_kronrod, tanh_sinh, GaussLegendre, Integral};
use crate::rng::{self, StreamRng};
use crate::{par, stats};

fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return domain(format!("Hurst parameter must lie in (0,1), got {h}"));
    }
    Ok(())
}

/// `E(B_s B_t) = ½(t^{2H} + s^{2H} - |t-s|^{2H})` for a normalised fBM.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if s < 0.0 || t < 0.0 {
        return domain("fBM covariance needs nonnegative times");
    }
    let a = 2.0 * hurst;
    Ok(0.5 * (t.powf(a) + s.powf(a) - (t - s).abs().powf(a)))
}

/// What a [`GaussianPath`] is a realisation of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathLabel {
    Fbm { hurst: f64 },
    Wiener,
    Fou { hurst: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub label: PathLabel,
}

/// Parameters of the rescaled stationary fOU process `y^ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FouSpec {
    pub hurst: f64,
    pub eps: f64,
}

impl FouSpec {
    pub fn new(hurst: f64, eps: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if hurst == 0.5 {
            return domain("the fOU experiments exclude H = 1/2");
        }
        if !(eps > 0.0) {
            return domain(format!("time-scale separation must be positive, got {eps}"));
        }
        Ok(FouSpec { hurst, eps })
    }

    /// Volatility making the stationary marginal `N(0,1)`, computed numerically.
    pub fn sigma(&self) -> f64 {
        (1.0 / FouCorrelation::raw_variance(self.hurst)).sqrt()
    }
}

// ---------------------------------------------------------------------------
// correlation function

/// Sum of `(1+x)^a + (1-x)^a - 2` for `|x| ≤ ½` by its even binomial series.
fn symmetric_second_difference(a: f64, x: f64) -> f64 {
    let x2 = x * x;
    let mut sum = 0.0;
    let mut binom = 1.0; // binom(a, j)
    let mut pow = 1.0;
    for j in 1..200 {
        binom *= (a - (j as f64 - 1.0)) / j as f64;
        if j % 2 == 0 {
            pow *= x2;
            let term = binom * pow;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
    }
    2.0 * sum
}

/// Evaluator for the unit-variance fOU correlation `ρ(s) = E(y_0 y_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FouCorrelation {
    hurst: f64,
    raw0: f64,
}

const RHO_TOL: f64 = 1e-13;

impl FouCorrelation {
    pub fn new(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(FouCorrelation { hurst, raw0: Self::raw_variance(hurst) })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Variance of `∫_{-∞}^t e^{-(t-s)} dB_s`, i.e. `1/σ²`.
    pub fn raw_variance(hurst: f64) -> f64 {
        Self::raw(hurst, 0.0)
    }

    /// `σ² H (2H-1)`, the constant of the `s^{2H-2}` tail.
    pub fn tail_constant(&self) -> f64 {
        self.hurst * (2.0 * self.hurst - 1.0) / self.raw0
    }

    fn raw(hurst: f64, s: f64) -> f64 {
        let a = 2.0 * hurst;
        let sa = if s > 0.0 { s.powf(a) } else { 0.0 };
        let mut total = 0.0;
        // r in [0, s/2]: symmetric second difference via its series
        let r1 = (0.5 * s).min(60.0);
        if r1 > 0.0 {
            total += gauss_kronrod(|r| (-r).exp() * sa * symmetric_second_difference(a, r / s), 0.0, r1, RHO_TOL, 1e-14)
                .value;
        }
        if 0.5 * s < 60.0 {
            // r in [s/2, s]: kink of |s-r|^{2H} at the right endpoint
            if s > 0.0 {
                total += tanh_sinh(
                    |r, _, db| (-r).exp() * ((s + r).powf(a) + db.powf(a) - 2.0 * sa),
                    0.5 * s,
                    s,
                    1e-15,
                )
                .value;
            }
            // r = s + u, u >= 0
            let tail = |u: f64| (-u).exp() * ((2.0 * s + u).powf(a) + u.powf(a) - 2.0 * sa);
            let near = gauss_kronrod(tail, 0.0, 1.0, RHO_TOL, 1e-14).value;
            let far = gauss_kronrod(tail, 1.0, 60.0 + s.min(60.0), RHO_TOL, 1e-14).value;
            total += (-s).exp() * (near + far);
        }
        0.25 * total
    }

    /// `ρ(s)`, extended to negative lags by symmetry.
    pub fn rho(&self, s: f64) -> f64 {
        let s = s.abs();
        if s == 0.0 {
            return 1.0;
        }
        Self::raw(self.hurst, s) / self.raw0
    }

    /// `ρ^ε(lag) = ρ(lag/ε)`.
    pub fn rho_eps(&self, lag: f64, eps: f64) -> f64 {
        self.rho(lag / eps)
    }

    /// `ρ(k·step)` for `k = 0..count`.
    pub fn on_lags(&self, step: f64, count: usize) -> Vec<f64> {
        par::map_indexed(count, |k| self.rho(k as f64 * step))
    }

    /// Spectral route: `∫_0^∞ cos(sx) x^{1-2H}/(1+x²) dx`, unnormalised.
    pub fn spectral_raw(hurst: f64, s: f64) -> Integral {
        let b = 1.0 - 2.0 * hurst;
        let s = s.abs();
        if s == 0.0 {
            return tanh_sinh(|x, da, _| (da.powf(b) + da.powf(-b)) / (1.0 + x * x), 0.0, 1.0, 1e-15);
        }
        let f = |x: f64| x.powf(b) / (1.0 + x * x);
        let half = PI / s;
        let x0 = 0.5 * half;
        // up to the first zero of cos(sx)
        let mut head = tanh_sinh(|x, da, _| (s * x).cos() * da.powf(b) / (1.0 + x * x), 0.0, x0.min(1.0), 1e-15);
        if x0 > 1.0 {
            head = head + gauss_kronrod(|x| (s * x).cos() * f(x), 1.0, x0, 1e-15, 1e-15);
        }
        // half periods, alternating in sign
        let gl = GaussLegendre::new(24);
        const J: usize = 90;
        const K: usize = 40;
        let mut partial = Vec::with_capacity(J + 1);
        let mut acc = head.value;
        partial.push(acc);
        for j in 0..J {
            let a = x0 + j as f64 * half;
            acc += gl.integrate(|x| (s * x).cos() * f(x), a, a + half);
            partial.push(acc);
        }
        let accelerate = |window: &[f64]| {
            let mut v = window.to_vec();
            while v.len() > 1 {
                v = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            }
            v[0]
        };
        let best = accelerate(&partial[J - K..=J]);
        let prev = accelerate(&partial[J - K - 1..J]);
        Integral { value: best, error: (best - prev).abs() + head.error }
    }

    /// `ρ(s)` from the spectral representation, with an error estimate.
    pub fn rho_spectral(&self, s: f64) -> Integral {
        let zero = Self::spectral_raw(self.hurst, 0.0);
        if s == 0.0 {
            return Integral { value: 1.0, error: 2.0 * zero.error / zero.value };
        }
        let v = Self::spectral_raw(self.hurst, s);
        Integral {
            value: v.value / zero.value,
            error: (v.error + v.value.abs() * zero.error / zero.value) / zero.value,
        }
    }
}

/// Fast interpolant of `ρ` on a geometric lag grid, with the power-law tail
/// beyond the last node.
#[derive(Debug, Clone)]
pub struct RhoTable {
    hurst: f64,
    log_min: f64,
    log_step: f64,
    values: Vec<f64>,
    s_max: f64,
    tail: f64,
}

impl RhoTable {
    const S_MIN: f64 = 1e-6;

    pub fn new(hurst: f64, s_max: f64, nodes: usize) -> Result<Self> {
        let corr = FouCorrelation::new(hurst)?;
        if !(s_max > 1.0) || nodes < 16 {
            return domain("rho table needs s_max > 1 and at least 16 nodes");
        }
        let log_min = Self::S_MIN.ln();
        let log_step = (s_max.ln() - log_min) / (nodes - 1) as f64;
        let values = par::map_indexed(nodes, |i| corr.rho((log_min + i as f64 * log_step).exp()));
        let tail = values[nodes - 1] / s_max.powf(2.0 * hurst - 2.0);
        Ok(RhoTable { hurst, log_min, log_step, values, s_max, tail })
    }

    /// Default table: lags up to `10^4`, 4000 nodes.
    pub fn standard(hurst: f64) -> Result<Self> {
        Self::new(hurst, 1e4, 4000)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn rho(&self, s: f64) -> f64 {
        let s = s.abs();
        if s == 0.0 {
            return 1.0;
        }
        if s >= self.s_max {
            return self.tail * s.powf(2.0 * self.hurst - 2.0);
        }
        if s <= Self::S_MIN {
            let a = 2.0 * self.hurst;
            return 1.0 - (1.0 - self.values[0]) * (s / Self::S_MIN).powf(a);
        }
        let u = (s.ln() - self.log_min) / self.log_step;
        let n = self.values.len();
        let i = (u.floor() as usize).clamp(1, n - 3);
        let x = u - i as f64;
        let (p0, p1, p2, p3) = (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
        // cubic Lagrange through nodes i-1..i+2
        let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
        let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
        let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
        let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }

    pub fn rho_eps(&self, lag: f64, eps: f64) -> f64 {
        self.rho(lag / eps)
    }
}

/// Tabulated correlation function with its quadrature error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub lags: Vec<f64>,
    pub rho: Vec<f64>,
    pub quadrature_error: Vec<f64>,
}

impl CorrelationTable {
    /// CSV with columns `lag,rho,err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,rho,err\n");
        for ((l, r), e) in self.lags.iter().zip(&self.rho).zip(&self.quadrature_error) {
            out.push_str(&format!("{l:.16e},{r:.16e},{e:.16e}\n"));
        }
        out
    }

    pub fn max_error(&self) -> f64 {
        self.quadrature_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Spectral-quadrature table of `ρ` at the given nonnegative lags.
pub fn fou_correlation(hurst: f64, lags: &[f64]) -> Result<CorrelationTable> {
    let corr = FouCorrelation::new(hurst)?;
    if lags.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return domain("correlation lags must be finite and nonnegative");
    }
    let vals = par::map_slice(lags, |&l| corr.rho_spectral(l));
    let table = CorrelationTable {
        lags: lags.to_vec(),
        rho: vals.iter().map(|v| v.value).collect(),
        quadrature_error: vals.iter().map(|v| v.error).collect(),
    };
    let worst = table.max_error();
    if worst > 1e-8 {
        return Err(Error::Quadrature { achieved: worst, target: 1e-8 });
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// correlation integrals

/// Scaling regime of `∫∫|ρ^ε|^m` on `[0,T]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationIntegral {
    /// `∫_0^T ∫_0^T |ρ^ε(u-r)|^m du dr`.
    pub value: f64,
    /// The regime law the value is compared against (squared form):
    /// `Tε∫_0^∞|ρ|^m`, `Tε|ln ε|` or `T²(T/ε)^{2H*-2}`.
    pub regime_law: f64,
    pub h_star: f64,
    pub error: f64,
}

impl CorrelationIntegral {
    pub fn ratio(&self) -> f64 {
        self.value / self.regime_law
    }
}

/// `∫_0^∞ |ρ(s)|^m ds` (or signed `ρ^m` when `signed`), numerically to s=200
/// plus the analytic power-law tail.
pub fn integral_rho_power(corr: &FouCorrelation, m: u32, signed: bool) -> Result<f64> {
    let h = corr.hurst();
    let h_star = m as f64 * (h - 1.0) + 1.0;
    if h_star >= 0.5 {
        return Err(Error::Regime(format!("∫ρ^{m} diverges for H = {h} (H*(m) = {h_star})")));
    }
    let f = |s: f64| {
        let r = corr.rho(s);
        if signed {
            r.powi(m as i32)
        } else {
            r.abs().powi(m as i32)
        }
    };
    let cut = 200.0;
    let mut body = Integral::zero();
    for w in [0.0, 1.0, 5.0, 20.0, 60.0, cut].windows(2) {
        body = body + gauss_kronrod(f, w[0], w[1], 1e-11, 1e-11);
    }
    let c = corr.tail_constant();
    let p = m as f64 * (2.0 * h - 2.0);
    let cm = if signed { c.powi(m as i32) } else { c.abs().powi(m as i32) };
    let tail = cm * cut.powf(p + 1.0) / (-(p + 1.0));
    Ok(body.value + tail)
}

pub fn correlation_integral(m: u32, horizon: f64, eps: f64, hurst: f64) -> Result<CorrelationIntegral> {
    if m == 0 {
        return domain("rank must be at least 1");
    }
    if !(horizon > 0.0 && eps > 0.0) {
        return domain("horizon and ε must be positive");
    }
    let corr = FouCorrelation::new(hurst)?;
    let h_star = m as f64 * (hurst - 1.0) + 1.0;
    // ∫∫ = 2 ε ∫_0^{T/ε} (T - ε s) |ρ(s)|^m ds
    let upper = horizon / eps;
    let mut breaks = vec![0.0];
    let mut b = 1.0;
    while b < upper {
        breaks.push(b);
        b *= 4.0;
    }
    breaks.push(upper);
    let integrand = |s: f64| (horizon - eps * s) * corr.rho(s).abs().powi(m as i32);
    let mut acc = Integral::zero();
    for w in breaks.windows(2) {
        acc = acc + gauss_kronrod(integrand, w[0], w[1], 1e-12, 1e-10);
    }
    let value = 2.0 * eps * acc.value;
    let regime_law = if h_star < 0.5 {
        horizon * eps * integral_rho_power(&corr, m, false)?
    } else if h_star == 0.5 {
        horizon * eps * eps.ln().abs()
    } else {
        horizon * horizon * (horizon / eps).powf(2.0 * h_star - 2.0)
    };
    Ok(CorrelationIntegral { value, regime_law, h_star, error: 2.0 * eps * acc.error })
}

// ---------------------------------------------------------------------------
// samplers

/// Record of how the circulant embedding was made nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// Size of the circulant matrix that was used.
    pub size: usize,
    /// Most negative normalised eigenvalue that was clipped to zero.
    pub clipped: f64,
    /// True when the Cholesky fallback was used instead.
    pub cholesky: bool,
}

/// Eigenvalue thresholds, relative to the embedding size (the normalised
/// eigenvalues sum to the variance).
const CLIP_TOL: f64 = 1e-10;
const CLIP_FAIL: f64 = 1e-6;
const CHOLESKY_MAX: usize = 2048;

enum Factor {
    Circulant { sqrt_lambda: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky(Vec<Vec<f64>>),
}

/// Exact sampler for a stationary Gaussian sequence with given autocovariance.
pub struct StationarySampler {
    len: usize,
    factor: Factor,
    report: EmbeddingReport,
}

impl std::fmt::Debug for StationarySampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationarySampler").field("len", &self.len).field("report", &self.report).finish()
    }
}

impl StationarySampler {
    /// `cov(k)` is the autocovariance at lag `k`; samples have `len` points.
    pub fn new<C: Fn(usize) -> f64 + Sync>(len: usize, cov: C) -> Result<Self> {
        if len == 0 {
            return domain("sampler needs at least one point");
        }
        if len == 1 {
            let c0 = cov(0);
            return Ok(StationarySampler {
                len,
                factor: Factor::Cholesky(vec![vec![c0.max(0.0).sqrt()]]),
                report: EmbeddingReport { size: 1, clipped: 0.0, cholesky: true },
            });
        }
        let base = len - 1;
        let cached: Vec<f64> = par::map_indexed(8 * base + 1, |k| if k <= 2 * base { cov(k) } else { f64::NAN });
        let mut min_seen = 0.0;
        for mult in [1usize, 2, 4] {
            let half = mult * base;
            let size = 2 * half;
            let lag = |k: usize| if k <= 2 * base { cached[k] } else { cov(k) };
            let mut row: Vec<Complex<f64>> = (0..size)
                .map(|j| {
                    let k = if j <= half { j } else { size - j };
                    Complex::new(lag(k), 0.0)
                })
                .collect();
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(size);
            fft.process(&mut row);
            let lam: Vec<f64> = row.iter().map(|c| c.re / size as f64).collect();
            let min = lam.iter().copied().fold(f64::INFINITY, f64::min);
            min_seen = min;
            if min >= -CLIP_FAIL {
                let clipped = if min < -CLIP_TOL { min } else { 0.0 };
                let sqrt_lambda = lam.iter().map(|l| l.max(0.0).sqrt()).collect();
                return Ok(StationarySampler {
                    len,
                    factor: Factor::Circulant { sqrt_lambda, fft },
                    report: EmbeddingReport { size, clipped, cholesky: false },
                });
            }
        }
        if len <= CHOLESKY_MAX {
            let l = cholesky(len, |i, j| cached[i.abs_diff(j)]).ok_or(Error::Embedding { min_eigenvalue: min_seen })?;
            return Ok(StationarySampler {
                len,
                factor: Factor::Cholesky(l),
                report: EmbeddingReport { size: len, clipped: 0.0, cholesky: true },
            });
        }
        Err(Error::Embedding { min_eigenvalue: min_seen })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn report(&self) -> EmbeddingReport {
        self.report
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        match &self.factor {
            Factor::Circulant { sqrt_lambda, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_lambda
                    .iter()
                    .map(|s| Complex::new(s * rng::normal(rng), s * rng::normal(rng)))
                    .collect();
                fft.process(&mut buf);
                buf.iter().take(self.len).map(|c| c.re).collect()
            }
            Factor::Cholesky(l) => {
                let z = rng::normals(rng, self.len);
                l.iter().map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum()).collect()
            }
        }
    }
}

fn cholesky<F: Fn(usize, usize) -> f64>(n: usize, a: F) -> Option<Vec<Vec<f64>>> {
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a(i, i) - s;
                if d < -1e-10 * a(i, i).abs().max(1.0) {
                    return None;
                }
                l[i][i] = d.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { (a(i, j) - s) / l[j][j] } else { 0.0 };
            }
        }
    }
    Some(l)
}

/// fBM sampler on a grid via circulant embedding of fractional Gaussian noise.
#[derive(Debug)]
pub struct FbmSampler {
    hurst: f64,
    grid: TimeGrid,
    increments: StationarySampler,
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: TimeGrid) -> Result<Self> {
        check_hurst(hurst)?;
        let a = 2.0 * hurst;
        let scale = grid.dt().powf(a);
        let increments = StationarySampler::new(grid.steps(), |k| {
            let k = k as f64;
            0.5 * scale * ((k + 1.0).powf(a) - 2.0 * k.powf(a) + (k - 1.0).abs().powf(a))
        })?;
        Ok(FbmSampler { hurst, grid, increments })
    }

    pub fn sample_values(&self, rng: &mut StreamRng) -> Vec<f64> {
        let inc = self.increments.sample(rng);
        let mut out = Vec::with_capacity(inc.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for d in inc {
            acc += d;
            out.push(acc);
        }
        out
    }

    pub fn sample(&self, rng: &mut StreamRng) -> GaussianPath {
        GaussianPath { grid: self.grid, values: self.sample_values(rng), label: PathLabel::Fbm { hurst: self.hurst } }
    }
}

pub fn sample_fbm(hurst: f64, grid: TimeGrid, seed: u64) -> Result<GaussianPath> {
    let sampler = FbmSampler::new(hurst, grid)?;
    Ok(sampler.sample(&mut rng::substream(seed, 0)))
}

pub fn sample_wiener_values(grid: &TimeGrid, rng: &mut StreamRng) -> Vec<f64> {
    let sd = grid.dt().sqrt();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for _ in 0..grid.steps() {
        acc += sd * rng::normal(rng);
        out.push(acc);
    }
    out
}

pub fn sample_wiener(grid: TimeGrid, seed: u64) -> GaussianPath {
    let values = sample_wiener_values(&grid, &mut rng::substream(seed, 0));
    GaussianPath { grid, values, label: PathLabel::Wiener }
}

/// Exact stationary sampler of `y^ε` on a grid.
#[derive(Debug)]
pub struct FouSampler {
    spec: FouSpec,
    grid: TimeGrid,
    inner: StationarySampler,
}

impl FouSampler {
    pub fn new(spec: FouSpec, grid: TimeGrid) -> Result<Self> {
        let corr = FouCorrelation::new(spec.hurst)?;
        let step = grid.dt() / spec.eps;
        let inner = StationarySampler::new(grid.len(), |k| corr.rho(k as f64 * step))?;
        Ok(FouSampler { spec, grid, inner })
    }

    pub fn embedding(&self) -> EmbeddingReport {
        self.inner.report()
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn spec(&self) -> FouSpec {
        self.spec
    }

    pub fn sample_values(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.inner.sample(rng)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> GaussianPath {
        GaussianPath {
            grid: self.grid,
            values: self.sample_values(rng),
            label: PathLabel::Fou { hurst: self.spec.hurst, eps: self.spec.eps },
        }
    }

    /// `count` independent paths; path `i` uses substream `(seed, i)`.
    pub fn ensemble(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        par::map_indexed(count, |i| self.sample_values(&mut rng::substream(seed, i as u64)))
    }
}

pub fn sample_fou(spec: FouSpec, grid: TimeGrid, seed: u64) -> Result<GaussianPath> {
    let sampler = FouSampler::new(spec, grid)?;
    Ok(sampler.sample(&mut rng::substream(seed, 0)))
}

/// Euler–Maruyama path of `dy = -y/ε dt + σ ε^{-H} dB` after a burn-in,
/// with `substeps` Euler steps per grid step. Cross-validation oracle only.
pub fn sample_fou_euler(spec: FouSpec, grid: TimeGrid, burn_in: f64, substeps: usize, seed: u64) -> Result<GaussianPath> {
    let h = grid.dt() / substeps as f64;
    let burn_steps = (burn_in / h).ceil() as usize;
    let total = burn_steps + grid.steps() * substeps;
    let fbm = FbmSampler::new(spec.hurst, TimeGrid::new(total, h)?)?;
    let b = fbm.sample_values(&mut rng::substream(seed, 0));
    let sigma = spec.sigma();
    let mut y = 0.0;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..total {
        if i >= burn_steps && (i - burn_steps) % substeps == 0 {
            values.push(y);
        }
        y += -y / spec.eps * h + sigma * spec.eps.powf(-spec.hurst) * (b[i + 1] - b[i]);
    }
    values.push(y);
    Ok(GaussianPath { grid, values, label: PathLabel::Fou { hurst: spec.hurst, eps: spec.eps } })
}

/// Empirical covariance matrix (with entrywise standard errors) of an ensemble
/// of equally long paths, restricted to the given indices.
pub fn empirical_covariance(paths: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<stats::Estimate>> {
    let cols: Vec<Vec<f64>> = idx.iter().map(|&i| paths.iter().map(|p| p[i]).collect()).collect();
    cols.iter().map(|a| cols.iter().map(|b| stats::covariance_estimate(a, b)).collect()).collect()
}
