//! Hermite polynomials, chaos expansions of scalar observables, the exponent
//! `H*(m)`, the scaling constants `α(ε, H*)` and the standing assumptions on
//! a family of observables.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{gauss_kronrod_breaks, GaussHermite};

/// Probabilists' Hermite polynomial `H_m(x)`.
pub fn hermite_poly(m: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..m {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x), …, H_l(x)`.
pub fn hermite_all(l: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l + 1);
    out.push(1.0);
    if l >= 1 {
        out.push(x);
    }
    for k in 1..l {
        out.push(x * out[k] - k as f64 * out[k - 1]);
    }
    out
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Hermite coefficients `c_k = E[G H_k]/k!` with rank and truncation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosExpansion {
    pub coeffs: Vec<f64>,
    pub rank: Option<usize>,
    pub truncation: usize,
    /// `Σ c_k² k!` over the retained coefficients.
    pub l2_norm: f64,
    /// Estimated `‖G - Σ_{k≤L} c_k H_k‖_{L²(μ)}`.
    pub tail_bound: f64,
    /// True when the coefficient list is the whole expansion (finite chaos).
    pub exact: bool,
    pub rank_tol: f64,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

fn detect_rank(coeffs: &[f64], tol: f64) -> Option<usize> {
    let norm = coeffs.iter().enumerate().map(|(k, c)| c * c * factorial(k)).sum::<f64>().sqrt();
    coeffs.iter().position(|c| c.abs() > tol * norm.max(f64::MIN_POSITIVE))
}

impl ChaosExpansion {
    /// Expansion from known coefficients. `exact` marks a finite chaos.
    pub fn from_coeffs(coeffs: Vec<f64>, exact: bool) -> Self {
        let l2_norm = coeffs.iter().enumerate().map(|(k, c)| c * c * factorial(k)).sum();
        ChaosExpansion {
            rank: detect_rank(&coeffs, DEFAULT_RANK_TOL),
            truncation: coeffs.len().saturating_sub(1),
            l2_norm,
            tail_bound: 0.0,
            exact,
            rank_tol: DEFAULT_RANK_TOL,
            coeffs,
        }
    }

    /// The single Hermite polynomial `H_m`.
    pub fn hermite(m: usize) -> Self {
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        Self::from_coeffs(c, true)
    }

    /// Drop `c_0`.
    pub fn centred(&self) -> Self {
        let mut out = self.clone();
        if let Some(c0) = out.coeffs.first_mut() {
            out.l2_norm -= *c0 * *c0;
            *c0 = 0.0;
        }
        out.rank = detect_rank(&out.coeffs, out.rank_tol);
        out
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_centred(&self) -> bool {
        self.coeff(0).abs() <= self.rank_tol * self.l2_norm.sqrt().max(1.0)
    }

    /// `Σ c_k H_k(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += c * cur;
            let next = x * cur - k as f64 * prev;
            prev = cur;
            cur = next;
        }
        acc
    }
}

/// Chaos expansion of `G`.
///
/// Coefficients come from adaptive Gauss–Kronrod on `[-R, 0, R]` with
/// `R = 12 + 2√L`, so kinks at the origin cost nothing and kinks elsewhere are
/// resolved by bisection. The tail is estimated on a `max(4L, 64)`-node
/// Gauss–Hermite rule, which is exact for polynomials of the retained degree.
pub fn expand<G: Fn(f64) -> f64>(g: G, truncation: usize, rank_tol: f64) -> Result<ChaosExpansion> {
    if truncation < 1 {
        return domain("truncation level must be at least 1");
    }
    let nodes = (4 * truncation).max(64);
    let rule = GaussHermite::new(nodes);
    let values: Vec<f64> = rule.nodes.iter().map(|&x| g(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("observable is not finite at the quadrature nodes".into()));
    }
    let r = 12.0 + 2.0 * (truncation as f64).sqrt();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let gk = |f: &dyn Fn(f64) -> f64, pts: &[f64]| gauss_kronrod_breaks(f, pts, 1e-15, 1e-13);
    let sq = |x: f64| {
        let v = g(x);
        if v == 0.0 { 0.0 } else { v * v * phi(x) }
    };
    let norm_sq = gk(&sq, &[-r, 0.0, r]).value;
    // square integrability: the mass just outside [-R, R] must be negligible
    let outer = gk(&sq, &[r, r + 10.0]).value + gk(&sq, &[-r - 10.0, -r]).value;
    if !norm_sq.is_finite() || !outer.is_finite() || outer > 1e-3 * norm_sq.max(1.0) {
        return Err(Error::Quadrature { achieved: outer, target: 1e-3 * norm_sq.max(1.0) });
    }
    let mut coeffs: Vec<f64> = (0..=truncation)
        .map(|k| gk(&|x| g(x) * hermite_poly(k, x) * phi(x), &[-r, 0.0, r]).value / factorial(k))
        .collect();
    let mut residual = values.clone();
    for (i, &x) in rule.nodes.iter().enumerate() {
        let h = hermite_all(truncation, x);
        residual[i] -= coeffs.iter().zip(&h).map(|(c, h)| c * h).sum::<f64>();
    }
    let tail: f64 = residual.iter().zip(&rule.weights).map(|(r, w)| w * r * r).sum::<f64>().sqrt();
    let norm = norm_sq.sqrt();
    for c in coeffs.iter_mut() {
        if c.abs() <= 1e-14 * norm {
            *c = 0.0;
        }
    }
    let l2_norm = coeffs.iter().enumerate().map(|(k, c)| c * c * factorial(k)).sum();
    Ok(ChaosExpansion {
        rank: detect_rank(&coeffs, rank_tol),
        truncation,
        l2_norm,
        tail_bound: tail,
        exact: tail <= 1e-10 * norm.max(1.0),
        rank_tol,
        coeffs,
    })
}

/// A named scalar observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Observable {
    /// `H_m`.
    Hermite(usize),
    /// Monomial coefficients `a_0 + a_1 x + …`.
    Poly(Vec<f64>),
    /// Hermite coefficients `c_0, c_1, …`.
    Chaos(Vec<f64>),
    /// `|x| - E|x|`.
    AbsCentred,
}

impl Observable {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable::Hermite(m) => hermite_poly(*m, x),
            Observable::Poly(a) => a.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Observable::Chaos(c) => ChaosExpansion::from_coeffs(c.clone(), true).eval(x),
            Observable::AbsCentred => x.abs() - (2.0 / std::f64::consts::PI).sqrt(),
        }
    }

    /// Hermite expansion; exact for the polynomial variants.
    pub fn expansion(&self, truncation: usize) -> Result<ChaosExpansion> {
        match self {
            Observable::Hermite(m) => Ok(ChaosExpansion::hermite(*m)),
            Observable::Chaos(c) => Ok(ChaosExpansion::from_coeffs(c.clone(), true)),
            Observable::Poly(a) => Ok(ChaosExpansion::from_coeffs(monomials_to_hermite(a), true)),
            Observable::AbsCentred => expand(|x| self.eval(x), truncation, DEFAULT_RANK_TOL),
        }
    }
}

/// `x^n = Σ_k n!/(k!(n-2k)! 2^k) H_{n-2k}(x)`.
pub fn monomials_to_hermite(a: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; a.len().max(1)];
    for (n, an) in a.iter().enumerate() {
        for k in 0..=n / 2 {
            c[n - 2 * k] += an * factorial(n) / (factorial(k) * factorial(n - 2 * k) * 2f64.powi(k as i32));
        }
    }
    c
}

// ---------------------------------------------------------------------------
// scaling

pub fn h_star(m: usize, hurst: f64) -> f64 {
    m as f64 * (hurst - 1.0) + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Diffusive,
    Critical,
    Superdiffusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub hurst: f64,
    pub m: usize,
    pub h_star: f64,
    pub regime: Regime,
    pub negative: bool,
}

const CRITICAL_TOL: f64 = 1e-12;

impl ScalingRegime {
    pub fn new(m: usize, hurst: f64) -> Result<Self> {
        if m == 0 {
            return domain("Hermite rank must be at least 1");
        }
        if !(hurst > 0.0 && hurst < 1.0) {
            return domain(format!("Hurst parameter must lie in (0,1), got {hurst}"));
        }
        let hs = h_star(m, hurst);
        let regime = if (hs - 0.5).abs() < CRITICAL_TOL {
            Regime::Critical
        } else if hs < 0.5 {
            Regime::Diffusive
        } else {
            Regime::Superdiffusive
        };
        Ok(ScalingRegime { hurst, m, h_star: hs, regime, negative: hs < 0.0 })
    }

    /// Exact classification for `H = num/den`.
    pub fn from_rational(m: usize, num: i64, den: i64) -> Result<Self> {
        if den <= 0 || num <= 0 || num >= den {
            return domain("rational Hurst parameter must satisfy 0 < num < den");
        }
        let mut out = Self::new(m, num as f64 / den as f64)?;
        // H* = (m(num - den) + den)/den
        let top = m as i64 * (num - den) + den;
        out.regime = match (2 * top).cmp(&den) {
            std::cmp::Ordering::Less => Regime::Diffusive,
            std::cmp::Ordering::Equal => Regime::Critical,
            std::cmp::Ordering::Greater => Regime::Superdiffusive,
        };
        out.negative = top < 0;
        Ok(out)
    }

    pub fn is_high_rank(&self) -> bool {
        self.regime == Regime::Diffusive
    }

    pub fn alpha(&self, eps: f64) -> f64 {
        match self.regime {
            Regime::Diffusive => eps.powf(-0.5),
            Regime::Critical => (eps * eps.ln().abs()).powf(-0.5),
            Regime::Superdiffusive => eps.powf(self.h_star - 1.0),
        }
    }
}

/// `α(ε, H*)`, with the critical branch selected by exact equality.
pub fn scaling_alpha(eps: f64, h_star: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 0.5) {
        return domain(format!("ε must lie in (0, 1/2], got {eps}"));
    }
    Ok(if h_star < 0.5 {
        eps.powf(-0.5)
    } else if h_star == 0.5 {
        (eps * eps.ln().abs()).powf(-0.5)
    } else {
        eps.powf(h_star - 1.0)
    })
}

// ---------------------------------------------------------------------------
// assumptions

/// `Σ |c_l| √(l!) (2q-1)^{l/2}`, or `None` when the tail does not decay.
pub fn fast_decay_sum(exp: &ChaosExpansion, q: u32) -> Result<Option<f64>> {
    if q < 1 {
        return domain("decay parameter q must be at least 1");
    }
    let base = (2.0 * q as f64 - 1.0).sqrt();
    let terms: Vec<f64> = exp
        .coeffs
        .iter()
        .enumerate()
        .map(|(l, c)| c.abs() * factorial(l).sqrt() * base.powi(l as i32))
        .collect();
    let sum: f64 = terms.iter().sum();
    if exp.exact {
        return Ok(Some(sum));
    }
    let nz: Vec<f64> = terms.iter().copied().filter(|t| *t > 0.0).collect();
    if nz.len() < 3 {
        return Ok(Some(sum));
    }
    let tail = &nz[nz.len().saturating_sub(6)..];
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let r = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    if r >= 0.99 {
        return Ok(None);
    }
    Ok(Some(sum + nz[nz.len() - 1] * r / (1.0 - r)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionCheck {
    pub index: usize,
    pub p: f64,
    pub rank: Option<usize>,
    pub h_star: Option<f64>,
    pub high_rank: bool,
    pub decay_sum: Option<f64>,
    pub integrable: bool,
    pub decay: bool,
    pub regularity: bool,
    pub gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub hurst: f64,
    pub q: u32,
    pub functions: Vec<FunctionCheck>,
    /// Original indices, high-rank functions first.
    pub ordering: Vec<usize>,
    pub n: usize,
    pub clause1: bool,
    pub clause2: bool,
    pub clause3: bool,
    pub clause4: bool,
    pub base: bool,
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.base && self.clause1 && self.clause2 && self.clause3 && self.clause4
    }

    /// The clauses the first-level limit theorem relies on.
    pub fn first_level_ok(&self) -> bool {
        self.base && self.clause4
    }
}

pub fn validate_assumptions(specs: &[(ChaosExpansion, f64)], hurst: f64, q: u32) -> Result<AssumptionReport> {
    if specs.is_empty() {
        return domain("at least one observable is required");
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return domain(format!("Hurst parameter must lie in (0,1), got {hurst}"));
    }
    let mut violations = Vec::new();
    let mut functions = Vec::with_capacity(specs.len());
    for (index, (exp, p)) in specs.iter().enumerate() {
        let rank = exp.rank;
        let hs = rank.filter(|&m| m >= 1).map(|m| h_star(m, hurst));
        let high_rank = hs.is_some_and(|h| h < 0.5);
        let decay_sum = fast_decay_sum(exp, q.max(1))?;
        let integrable = *p > 2.0 && rank.is_some_and(|m| m >= 1);
        if !integrable {
            violations.push(format!("G_{index}: need p > 2 and rank ≥ 1 (p = {p}, rank = {rank:?})"));
        }
        let decay = q >= 4 && decay_sum.is_some();
        if !decay {
            violations.push(format!("G_{index}: fast chaos decay with q = {q} (q ≥ 4 and finite sum) fails"));
        }
        let regularity = match hs {
            Some(h) if h > 0.5 => h - 1.0 / p > 0.5,
            Some(_) => 0.5 - 1.0 / p > 1.0 / 3.0,
            None => false,
        };
        if !regularity {
            if high_rank {
                violations.push(format!("G_{index}: 1/2 - 1/p = {} ≤ 1/3", 0.5 - 1.0 / p));
            } else if let Some(h) = hs {
                violations.push(format!("G_{index}: H* - 1/p = {} ≤ 1/2", h - 1.0 / p));
            }
        }
        let gap = hs.is_some_and(|h| h < 0.0 || h > 0.5);
        if !gap {
            if let Some(h) = hs {
                violations.push(format!("G_{index}: H* = {h} lies in [0, 1/2]"));
            }
        }
        functions.push(FunctionCheck {
            index,
            p: *p,
            rank,
            h_star: hs,
            high_rank,
            decay_sum,
            integrable,
            decay,
            regularity,
            gap,
        });
    }
    let mut ordering: Vec<usize> = (0..specs.len()).collect();
    ordering.sort_by_key(|&i| !functions[i].high_rank);
    let n = functions.iter().filter(|f| f.high_rank).count();
    let wiener_min = functions.iter().filter(|f| f.high_rank).map(|f| 0.5 - 1.0 / f.p).fold(f64::INFINITY, f64::min);
    let young_min = functions
        .iter()
        .filter(|f| !f.high_rank)
        .filter_map(|f| f.h_star.map(|h| h - 1.0 / f.p))
        .fold(f64::INFINITY, f64::min);
    // an empty block leaves the mixed condition vacuous
    let clause2 = !(wiener_min.is_finite() && young_min.is_finite()) || wiener_min + young_min > 1.0;
    if !clause2 {
        violations.push(format!("mixed regularity {wiener_min} + {young_min} ≤ 1"));
    }
    Ok(AssumptionReport {
        hurst,
        q,
        ordering,
        n,
        base: functions.iter().all(|f| f.integrable),
        clause1: functions.iter().all(|f| f.decay),
        clause2,
        clause3: functions.iter().all(|f| f.regularity),
        clause4: functions.iter().all(|f| f.gap),
        functions,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_poly(0, 3.7), 1.0);
        assert_eq!(hermite_poly(1, -0.4), -0.4);
        assert_eq!(hermite_poly(3, 1.0), -2.0);
        let h = hermite_all(5, 0.7);
        for (k, v) in h.iter().enumerate() {
            assert!((v - hermite_poly(k, 0.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn expansion_of_abs_matches_closed_form() {
        // |x| = √(2/π) Σ_k (-1)^{k+1} H_{2k}(x) / (2^k k! (2k-1))
        let e = Observable::AbsCentred.expansion(30).unwrap();
        assert_eq!(e.rank, Some(2));
        for k in 1..=6usize {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let want = sign * (2.0 / std::f64::consts::PI).sqrt() / (2f64.powi(k as i32) * factorial(k) * (2 * k - 1) as f64);
            assert!((e.coeff(2 * k) - want).abs() < 1e-12, "k = {k}");
            assert_eq!(e.coeff(2 * k - 1), 0.0);
        }
        assert!(matches!(expand(|x| (x * x / 4.0).exp(), 10, DEFAULT_RANK_TOL), Err(Error::Quadrature { .. })));
    }

    #[test]
    fn expansion_of_monomials() {
        let e = expand(|x| x.powi(3), 6, DEFAULT_RANK_TOL).unwrap();
        assert!((e.coeff(1) - 3.0).abs() < 1e-12);
        assert!((e.coeff(3) - 1.0).abs() < 1e-12);
        assert!(e.coeff(2).abs() < 1e-12);
        assert!(e.exact);
        let sq = expand(|x| x * x, 4, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sq.rank, Some(0));
        assert_eq!(sq.centred().rank, Some(2));
        assert_eq!(monomials_to_hermite(&[0.0, 0.0, 0.0, 1.0]), vec![0.0, 3.0, 0.0, 1.0]);
    }

    #[test]
    fn h2_expansion() {
        let e = expand(|x| hermite_poly(2, x), 5, DEFAULT_RANK_TOL).unwrap();
        for k in 0..=5 {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((e.coeff(k) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn h_star_and_alpha() {
        assert_eq!(h_star(1, 0.37), 0.37);
        assert!((h_star(2, 0.9) - 0.8).abs() < 1e-15);
        assert!((h_star(4, 0.7) + 0.2).abs() < 1e-15);
        assert!((scaling_alpha(0.01, 0.3).unwrap() - 10.0).abs() < 1e-12);
        assert!((scaling_alpha(0.01, 0.8).unwrap() - 2.51188643150958).abs() < 1e-12);
        let e = (-1f64).exp();
        assert!((scaling_alpha(e, 0.5).unwrap() - 0.5f64.exp()).abs() < 1e-12);
        assert!(scaling_alpha(0.7, 0.3).is_err());
    }

    #[test]
    fn rational_critical_detection() {
        let r = ScalingRegime::from_rational(2, 3, 4).unwrap();
        assert_eq!(r.regime, Regime::Critical);
        let r = ScalingRegime::from_rational(3, 3, 10).unwrap();
        assert_eq!(r.regime, Regime::Diffusive);
        assert!(r.negative);
    }

    #[test]
    fn decay_sums() {
        let poly = ChaosExpansion::from_coeffs(vec![0.0, 3.0, 0.0, 1.0], true);
        assert!(fast_decay_sum(&poly, 4).unwrap().is_some());
        let q = 2;
        let geo: Vec<f64> = (0..60).map(|l| 3f64.powi(-(l as i32)) / factorial(l).sqrt()).collect();
        let s = fast_decay_sum(&ChaosExpansion::from_coeffs(geo, false), q).unwrap().unwrap();
        let r = 3f64.powf(-0.5);
        assert!((s - 1.0 / (1.0 - r)).abs() < 1e-9, "{s}");
        let flat: Vec<f64> = (0..40).map(|l| 1.0 / factorial(l).sqrt()).collect();
        assert_eq!(fast_decay_sum(&ChaosExpansion::from_coeffs(flat, false), 1).unwrap(), None);
    }

    #[test]
    fn assumption_examples() {
        let h2 = ChaosExpansion::hermite(2);
        let r = validate_assumptions(&[(h2.clone(), 100.0)], 0.3, 4).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.n, 1);
        let r = validate_assumptions(&[(h2.clone(), 100.0)], 0.8, 4).unwrap();
        assert!(r.clause4);
        assert_eq!(r.n, 0);
        let r = validate_assumptions(&[(h2.clone(), 100.0)], 0.75, 4).unwrap();
        assert!(!r.clause4);
        let r = validate_assumptions(&[(ChaosExpansion::hermite(1), 100.0), (h2, 100.0)], 0.6, 4).unwrap();
        assert_eq!(r.ordering, vec![1, 0]);
    }
}
