//! Path functionals `X^{k,ε}_t = α_k(ε) ∫_0^t G_k(y^ε_s) ds`, the drift matrix
//! `A`, and statistical checks of the joint functional CLT / non-CLT.
//!
//! Ensembles over several `ε` are coupled: one stationary path `y` of the
//! unscaled fOU on `[0, T/ε_min]` is sampled per replica, and
//! `X^ε_t = α ε ∫_0^{t/ε} G(y_u) du`, since `y^ε` and `y_{·/ε}` share their law.

use serde::{Deserialize, Serialize};

use crate::chaos::{factorial, ChaosExpansion, Regime, ScalingRegime};
use crate::error::{domain, Error, Result};
use crate::gaussian_noise::{integral_rho_power, FouCorrelation, FouSampler, FouSpec, GaussianPath, PathLabel};
use crate::grid::TimeGrid;
use crate::hermite_process::{normalization_closed_form, HermiteSampler, HermiteSpec};
use crate::stats::{self, Estimate, TrendTest};
use crate::{linalg, par, rng};

/// Which limit a component belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Wiener,
    Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalPath {
    pub grid: TimeGrid,
    /// One path per component.
    pub values: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub blocks: Vec<Block>,
}

fn regime_of(g: &ChaosExpansion, hurst: f64) -> Result<ScalingRegime> {
    if !g.is_centred() {
        return domain("observable must be centred (c_0 = 0)");
    }
    let r = match g.rank {
        Some(m) if m >= 1 => ScalingRegime::new(m, hurst)?,
        _ => return domain("observable has no positive Hermite rank"),
    };
    if r.regime == Regime::Critical {
        return Err(Error::Regime(format!("H*(m) = 1/2 at m = {}, H = {hurst}: no limit is simulated", r.m)));
    }
    Ok(r)
}

fn block_of(r: &ScalingRegime) -> Block {
    if r.is_high_rank() {
        Block::Wiener
    } else {
        Block::Hermite
    }
}

/// `α ∫_0^t G(y^ε_s) ds` on the path's own grid, by the trapezoid rule.
pub fn path_functional(g: &ChaosExpansion, y: &GaussianPath, regime: &ScalingRegime) -> Result<Vec<f64>> {
    let eps = match y.label {
        PathLabel::Fou { eps, .. } => eps,
        _ => return domain("path functionals act on fOU paths"),
    };
    if !g.is_centred() {
        return domain("observable must be centred (c_0 = 0)");
    }
    let alpha = regime.alpha(eps);
    let gv: Vec<f64> = y.values.iter().map(|&x| g.eval(x)).collect();
    Ok(crate::quad::cumulative_trapezoid(&gv, y.grid.dt()).into_iter().map(|v| alpha * v).collect())
}

/// `X^ε` on `out` from `G(y_u)` sampled on the unit-time grid of step `delta`.
pub fn functional_from_unit(g_values: &[f64], delta: f64, eps: f64, alpha: f64, out: &TimeGrid) -> Result<Vec<f64>> {
    let cum = crate::quad::cumulative_trapezoid(g_values, delta);
    let last = (cum.len() - 1) as f64 * delta;
    if out.horizon() / eps > last * (1.0 + 1e-12) {
        return domain("unit path too short for this ε");
    }
    Ok(out
        .times()
        .iter()
        .map(|&t| {
            let u = t / eps / delta;
            let i = (u.floor() as usize).min(cum.len() - 2);
            let w = u - i as f64;
            alpha * eps * ((1.0 - w) * cum[i] + w * cum[i + 1])
        })
        .collect())
}

// ---------------------------------------------------------------------------
// drift matrix

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftMatrix {
    pub dim: usize,
    pub n: usize,
    /// Row-major `dim × dim`.
    pub a: Vec<f64>,
    pub truncation_error: f64,
}

impl DriftMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    /// The Wiener block of `2A`, row-major `n × n`.
    pub fn wiener_block_2a(&self) -> Vec<f64> {
        (0..self.n).flat_map(|i| (0..self.n).map(move |j| (i, j))).map(|(i, j)| 2.0 * self.get(i, j)).collect()
    }

    /// Symmetric `U` with `UᵀU = 2A` on the Wiener block.
    pub fn sqrt_2a(&self) -> Result<Vec<f64>> {
        let b = self.wiener_block_2a();
        linalg::sqrt_psd(&b, self.n, 1e-10).ok_or_else(|| {
            let (lam, _) = linalg::sym_eigen(&b, self.n);
            Error::NotPsd(lam.into_iter().fold(f64::INFINITY, f64::min))
        })
    }

    pub fn min_eigenvalue_2a(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        linalg::sym_eigen(&self.wiener_block_2a(), self.n).0.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// `A^{ij} = Σ_q c_{i,q} c_{j,q} q! ∫_0^∞ ρ^q` for `i, j < n`, zero elsewhere.
/// The first `n` expansions form the Wiener block and need `H*(m) < 0`.
pub fn drift_matrix(expansions: &[ChaosExpansion], hurst: f64, n: usize) -> Result<DriftMatrix> {
    let dim = expansions.len();
    if n > dim {
        return domain("Wiener block larger than the family");
    }
    let corr = FouCorrelation::new(hurst)?;
    for g in &expansions[..n] {
        let r = regime_of(g, hurst)?;
        if !(r.h_star < 0.0) {
            return Err(Error::Regime(format!("Wiener-block rank {} has H* = {} ≥ 0", r.m, r.h_star)));
        }
    }
    let top = expansions[..n].iter().map(|g| g.coeffs.len()).max().unwrap_or(0);
    let mut integrals = vec![0.0; top];
    for (q, slot) in integrals.iter_mut().enumerate().skip(1) {
        if expansions[..n].iter().any(|g| g.coeff(q) != 0.0) {
            *slot = integral_rho_power(&corr, q as u32, true)?;
        }
    }
    let mut a = vec![0.0; dim * dim];
    let mut truncation_error: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (gi, gj) = (&expansions[i], &expansions[j]);
            let mut v = 0.0;
            for (q, iq) in integrals.iter().enumerate().skip(1) {
                v += gi.coeff(q) * gj.coeff(q) * factorial(q) * iq;
            }
            a[i * dim + j] = v;
            if !(gi.exact && gj.exact) {
                let l = gi.truncation.min(gj.truncation) + 1;
                // Cauchy–Schwarz over the discarded levels, |ρ| ≤ 1
                let tail = gi.tail_bound * gj.tail_bound;
                if tail > 0.0 {
                    truncation_error = truncation_error.max(tail * integral_rho_power(&corr, l as u32, false)?);
                }
            }
        }
    }
    if truncation_error > 1e-6 {
        return Err(Error::Quadrature { achieved: truncation_error, target: 1e-6 });
    }
    Ok(DriftMatrix { dim, n, a, truncation_error })
}

/// Variance of the Hermite-block limit of `α∫_0^1 H_m(y^ε)`:
/// `m! (σ²H(2H-1))^m / (H*(2H*-1))`.
pub fn hermite_limit_variance(m: usize, hurst: f64) -> Result<f64> {
    let r = ScalingRegime::new(m, hurst)?;
    if r.regime != Regime::Superdiffusive {
        return Err(Error::Regime(format!("H*({m}) = {} is not above 1/2", r.h_star)));
    }
    let c = FouCorrelation::new(hurst)?.tail_constant();
    Ok(factorial(m) * c.powi(m as i32) / (r.h_star * (2.0 * r.h_star - 1.0)))
}

/// Variance of `(m!/K(H*,m)) Z^{H*,m}_1` with the closed-form unit-variance `K`.
pub fn literal_limit_variance(m: usize, hurst: f64) -> f64 {
    let hs = crate::chaos::h_star(m, hurst);
    (factorial(m) / normalization_closed_form(m, hs)).powi(2)
}

// ---------------------------------------------------------------------------
// ensembles

/// Sampling parameters for coupled functional ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub hurst: f64,
    pub eps: Vec<f64>,
    pub horizon: f64,
    pub out_steps: usize,
    pub paths: usize,
    pub seed: u64,
    /// Points of the unit-time fOU grid per unit time (step `ε/resolution` in `y^ε`).
    pub resolution: usize,
}

impl EnsembleConfig {
    pub fn out_grid(&self) -> Result<TimeGrid> {
        TimeGrid::over(self.horizon, self.out_steps)
    }

    fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
            return domain("ε values must lie in (0, 1/2]");
        }
        if self.paths < 2 || self.resolution < 1 || self.out_steps < 1 || !(self.horizon > 0.0) {
            return domain("need at least two paths and positive grid sizes");
        }
        Ok(())
    }
}

/// Coupled ensemble: `paths[e][r][k]` is component `k` of replica `r` at `eps[e]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEnsemble {
    pub eps: Vec<f64>,
    pub grid: TimeGrid,
    pub alphas: Vec<Vec<f64>>,
    pub blocks: Vec<Block>,
    pub paths: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FunctionalEnsemble {
    /// Endpoint samples of component `k` at level `e`.
    pub fn endpoints(&self, e: usize, k: usize) -> Vec<f64> {
        self.paths[e].iter().map(|r| *r[k].last().unwrap()).collect()
    }

    /// Samples of component `k` at grid index `i`.
    pub fn at(&self, e: usize, k: usize, i: usize) -> Vec<f64> {
        self.paths[e].iter().map(|r| r[k][i]).collect()
    }
}

/// Unit-time fOU sampler long enough for every `ε` in the config.
pub fn unit_sampler(cfg: &EnsembleConfig) -> Result<(FouSampler, f64)> {
    let eps_min = cfg.eps.iter().copied().fold(f64::INFINITY, f64::min);
    let delta = 1.0 / cfg.resolution as f64;
    let steps = (cfg.horizon / eps_min / delta).ceil() as usize;
    let spec = FouSpec::new(cfg.hurst, 1.0)?;
    Ok((FouSampler::new(spec, TimeGrid::new(steps, delta)?)?, delta))
}

pub fn simulate_functionals(family: &[ChaosExpansion], cfg: &EnsembleConfig) -> Result<FunctionalEnsemble> {
    cfg.validate()?;
    if family.is_empty() {
        return domain("empty observable family");
    }
    let regimes = family.iter().map(|g| regime_of(g, cfg.hurst)).collect::<Result<Vec<_>>>()?;
    let grid = cfg.out_grid()?;
    let (sampler, delta) = unit_sampler(cfg)?;
    let alphas: Vec<Vec<f64>> = cfg.eps.iter().map(|&e| regimes.iter().map(|r| r.alpha(e)).collect()).collect();
    let per_replica = par::map_indexed(cfg.paths, |r| -> Result<Vec<Vec<Vec<f64>>>> {
        let y = sampler.sample_values(&mut rng::substream(cfg.seed, r as u64));
        let gvals: Vec<Vec<f64>> = family.iter().map(|g| y.iter().map(|&x| g.eval(x)).collect()).collect();
        cfg.eps
            .iter()
            .enumerate()
            .map(|(e, &eps)| {
                let n_unit = ((cfg.horizon / eps / delta).ceil() as usize + 1).min(y.len());
                gvals
                    .iter()
                    .zip(&alphas[e])
                    .map(|(gv, &a)| functional_from_unit(&gv[..n_unit], delta, eps, a, &grid))
                    .collect()
            })
            .collect()
    });
    let mut paths = vec![Vec::with_capacity(cfg.paths); cfg.eps.len()];
    for rep in per_replica {
        for (e, comps) in rep?.into_iter().enumerate() {
            paths[e].push(comps);
        }
    }
    Ok(FunctionalEnsemble { eps: cfg.eps.clone(), grid, alphas, blocks: regimes.iter().map(block_of).collect(), paths })
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub s: f64,
    pub empirical: Estimate,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCheck {
    pub k: usize,
    pub block: Block,
    pub variance: Estimate,
    pub target_variance: f64,
    /// KS distance against the limit law at `t = T`.
    pub ks: f64,
    pub ks_pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltLevel {
    pub eps: f64,
    pub covariances: Vec<CovarianceCheck>,
    pub components: Vec<ComponentCheck>,
    /// `corr(X^i_T, X^j_T)` for `i` in the Wiener and `j` in the Hermite block.
    pub cross_block: Vec<(usize, usize, Estimate)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub hurst: f64,
    pub drift: DriftMatrix,
    pub levels: Vec<CltLevel>,
    /// Hermite-block variance ratio of the literal `(m!/K)Z` normalisation to
    /// the limit variance, per Hermite component.
    pub literal_variance_ratio: Vec<(usize, f64)>,
}

/// Samples of the Hermite-block limits `c_{k,m_k} s_k Z^{H*(m_k), m_k}_T`, all built
/// from one Wiener noise per replica, with `s_k² =` [`hermite_limit_variance`].
pub fn hermite_limit_samples(
    family: &[ChaosExpansion],
    hurst: f64,
    horizon_grid: TimeGrid,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut samplers = Vec::new();
    for g in family {
        let r = regime_of(g, hurst)?;
        if r.is_high_rank() {
            samplers.push(None);
            continue;
        }
        let spec = HermiteSpec::for_rank(r.m, hurst)?;
        let scale = g.coeff(r.m) * hermite_limit_variance(r.m, hurst)?.sqrt();
        samplers.push(Some((HermiteSampler::new(spec, horizon_grid)?, scale)));
    }
    let noise_len = samplers.iter().flatten().map(|s| s.0.noise_len()).next().unwrap_or(0);
    Ok(par::map_indexed(count, |i| {
        let z = rng::normals(&mut rng::substream(seed, i as u64), noise_len);
        samplers
            .iter()
            .map(|s| match s {
                Some((smp, scale)) => smp.values_from_noise(&z).into_iter().map(|v| v * scale).collect(),
                None => Vec::new(),
            })
            .collect()
    }))
}

pub fn clt_experiment(
    family: &[ChaosExpansion],
    cfg: &EnsembleConfig,
    limit_paths: usize,
    check_times: &[usize],
) -> Result<CltReport> {
    let ens = simulate_functionals(family, cfg)?;
    let n = ens.blocks.iter().filter(|b| **b == Block::Wiener).count();
    // Wiener components first
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by_key(|&k| ens.blocks[k] != Block::Wiener);
    let ordered: Vec<ChaosExpansion> = order.iter().map(|&k| family[k].clone()).collect();
    let drift = drift_matrix(&ordered, cfg.hurst, n)?;
    let limits = if ens.blocks.contains(&Block::Hermite) {
        hermite_limit_samples(family, cfg.hurst, TimeGrid::over(cfg.horizon, 1)?, limit_paths, rng::derive_seed(cfg.seed, 7))?
    } else {
        Vec::new()
    };
    let t_end = ens.grid.horizon();
    let mut levels = Vec::new();
    for e in 0..ens.eps.len() {
        let mut covariances = Vec::new();
        for (a, &i) in order[..n].iter().enumerate() {
            for (b, &j) in order[..n].iter().enumerate() {
                for &ti in check_times {
                    for &si in check_times {
                        let est = stats::covariance_estimate(&ens.at(e, i, ti), &ens.at(e, j, si));
                        let (t, s) = (ens.grid.time(ti), ens.grid.time(si));
                        covariances.push(CovarianceCheck {
                            i,
                            j,
                            t,
                            s,
                            empirical: est,
                            target: 2.0 * t.min(s) * drift.get(a, b),
                        });
                    }
                }
            }
        }
        let mut components = Vec::new();
        for (pos, &k) in order.iter().enumerate() {
            let x = ens.endpoints(e, k);
            let variance = stats::variance_estimate(&x);
            let (target_variance, ks, p) = if ens.blocks[k] == Block::Wiener {
                let v = 2.0 * drift.get(pos, pos) * t_end;
                let sd = v.sqrt();
                let d = stats::ks_one_sample(&x, |u| stats::normal_cdf(u / sd));
                (v, d, stats::kolmogorov_tail(d * (x.len() as f64).sqrt()))
            } else {
                let z: Vec<f64> = limits.iter().map(|l| l[k][1]).collect();
                let d = stats::ks_two_sample(&x, &z);
                let m = family[k].rank.unwrap_or(1);
                let hs = crate::chaos::h_star(m, cfg.hurst);
                let v = family[k].coeff(m).powi(2) * hermite_limit_variance(m, cfg.hurst)? * t_end.powf(2.0 * hs);
                (v, d, stats::ks_two_sample_pvalue(d, x.len(), z.len()))
            };
            components.push(ComponentCheck { k, block: ens.blocks[k], variance, target_variance, ks, ks_pvalue: p });
        }
        let mut cross_block = Vec::new();
        for &i in &order[..n] {
            for &j in &order[n..] {
                let (a, b) = (ens.endpoints(e, i), ens.endpoints(e, j));
                let r = stats::correlation(&a, &b);
                cross_block.push((i, j, Estimate { value: r, se: (1.0 - r * r) / ((a.len() - 1) as f64).sqrt() }));
            }
        }
        levels.push(CltLevel { eps: ens.eps[e], covariances, components, cross_block });
    }
    let literal_variance_ratio = (0..family.len())
        .filter(|&k| ens.blocks[k] == Block::Hermite)
        .map(|k| {
            let m = family[k].rank.unwrap_or(1);
            Ok((k, literal_limit_variance(m, cfg.hurst) / hermite_limit_variance(m, cfg.hurst)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CltReport { hurst: cfg.hurst, drift, levels, literal_variance_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentLevel {
    pub eps: f64,
    pub lags: Vec<f64>,
    pub norms: Vec<f64>,
    pub exponent: f64,
    /// `max_h ‖X_{s,s+h}‖_p / h^θ`.
    pub scaled_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub component: usize,
    pub p: f64,
    pub expected_exponent: f64,
    pub levels: Vec<MomentLevel>,
    pub trend: TrendTest,
    pub within: bool,
}

/// Empirical `L^p` increment norms of one component across `ε`; the expected
/// exponent is `½` for high rank and `H*(m)` otherwise (tolerance `±0.1`).
pub fn moment_bound_check(
    ens: &FunctionalEnsemble,
    family: &[ChaosExpansion],
    hurst: f64,
    component: usize,
    p: f64,
    lag_steps: &[usize],
) -> Result<MomentReport> {
    let r = regime_of(&family[component], hurst)?;
    let theta = if r.h_star <= 0.5 { 0.5 } else { r.h_star };
    let n = ens.grid.steps();
    let mut levels = Vec::new();
    for e in 0..ens.eps.len() {
        let mut lags = Vec::new();
        let mut norms = Vec::new();
        for &h in lag_steps {
            if h == 0 || h > n {
                return domain("lag steps must lie in 1..=n");
            }
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for rep in &ens.paths[e] {
                let x = &rep[component];
                for s in 0..=n - h {
                    acc += (x[s + h] - x[s]).abs().powf(p);
                    cnt += 1;
                }
            }
            lags.push(h as f64 * ens.grid.dt());
            norms.push((acc / cnt as f64).powf(1.0 / p));
        }
        let exponent = stats::log_log_slope(&lags, &norms).slope;
        let scaled_sup = lags.iter().zip(&norms).map(|(h, v)| v / h.powf(theta)).fold(0.0, f64::max);
        levels.push(MomentLevel { eps: ens.eps[e], lags, norms, exponent, scaled_sup });
    }
    let mut by_eps: Vec<&MomentLevel> = levels.iter().collect();
    by_eps.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let trend = stats::mann_kendall(&by_eps.iter().map(|l| l.scaled_sup).collect::<Vec<_>>());
    let within = levels.iter().all(|l| (l.exponent - theta).abs() <= 0.1) && !trend.upward(0.05);
    Ok(MomentReport { component, p, expected_exponent: theta, levels, trend, within })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_observable_gives_zero_path() {
        let spec = FouSpec::new(0.3, 0.1).unwrap();
        let grid = TimeGrid::over(1.0, 20).unwrap();
        let y = crate::gaussian_noise::sample_fou(spec, grid, 1).unwrap();
        let zero = ChaosExpansion::from_coeffs(vec![0.0, 0.0], true);
        assert!(path_functional(&zero, &y, &ScalingRegime::new(1, 0.3).unwrap()).unwrap().iter().all(|v| *v == 0.0));
        let sq = ChaosExpansion::from_coeffs(vec![1.0, 0.0, 1.0], true);
        assert!(path_functional(&sq, &y, &ScalingRegime::new(2, 0.3).unwrap()).is_err());
    }

    #[test]
    fn unit_functional_matches_direct_integral() {
        let g: Vec<f64> = (0..=200).map(|i| (i as f64 * 0.05).sin()).collect();
        let out = TimeGrid::over(1.0, 4).unwrap();
        let x = functional_from_unit(&g, 0.05, 0.1, 2.0, &out).unwrap();
        // α ε ∫_0^{10} sin u du with the trapezoid rule at step 0.05
        let exact = 2.0 * 0.1 * crate::quad::trapezoid(&g, 0.05);
        assert!((x[4] - exact).abs() < 1e-12);
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn disjoint_levels_have_zero_drift() {
        let fam = [ChaosExpansion::hermite(3), ChaosExpansion::hermite(4)];
        let d = drift_matrix(&fam, 0.3, 2).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert!(d.get(0, 0) > 0.0 && d.get(1, 1) > 0.0);
        assert!(d.min_eigenvalue_2a() >= -1e-10);
    }

    #[test]
    fn wiener_block_requires_negative_h_star() {
        assert!(drift_matrix(&[ChaosExpansion::hermite(1)], 0.3, 1).is_err());
    }

    #[test]
    fn rank_one_limit_variance_is_sigma_squared_scale() {
        // m = 1: the limit of ε^{H-1}∫ y^ε is σ B^H with Var = σ²
        let v = hermite_limit_variance(1, 0.7).unwrap();
        let sigma2 = FouSpec::new(0.7, 1.0).unwrap().sigma().powi(2);
        assert!((v - sigma2).abs() < 1e-12 * sigma2);
    }
}
