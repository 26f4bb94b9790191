//! Diagram formula for `E ∏ H_{k_l}(ξ_l)` with jointly Gaussian unit-variance
//! `ξ_l`, by enumeration of complete pairings of labelled stubs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chaos::{factorial, h_star, ChaosExpansion};
use crate::error::{domain, Error, Result};
use crate::gaussian_noise::RhoTable;
use crate::quad::GaussLegendre;
use crate::{chaos, stats};

pub const MAX_STUBS: usize = 16;

/// A multigraph on the nodes, stored as the upper triangle of `n(l, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingGraph {
    pub degrees: Vec<usize>,
    /// `(l, q, n(l,q))` with `l < q` and `n > 0`.
    pub edges: Vec<(usize, usize, usize)>,
    /// Number of stub pairings producing this multigraph.
    pub multiplicity: u64,
}

impl PairingGraph {
    pub fn edge_count(&self, l: usize, q: usize) -> usize {
        let (a, b) = if l < q { (l, q) } else { (q, l) };
        self.edges.iter().find(|e| e.0 == a && e.1 == b).map_or(0, |e| e.2)
    }

    /// `∏ cov(l,q)^{n(l,q)}`.
    pub fn weight<C: Fn(usize, usize) -> f64>(&self, cov: C) -> f64 {
        self.edges.iter().map(|&(l, q, n)| cov(l, q).powi(n as i32)).product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingEnumeration {
    pub graphs: Vec<PairingGraph>,
    pub total: u64,
}

fn check_degrees(degrees: &[usize]) -> Result<usize> {
    if degrees.is_empty() || degrees.contains(&0) {
        return domain("degrees must be nonempty and each at least 1");
    }
    let stubs: usize = degrees.iter().sum();
    if stubs > MAX_STUBS {
        return Err(Error::CostGuard(format!("{stubs} stubs exceed the enumeration limit of {MAX_STUBS}")));
    }
    Ok(stubs)
}

/// All complete pairings of stubs with no edge inside a node, grouped by multigraph.
pub fn enumerate_pairings(degrees: &[usize]) -> Result<PairingEnumeration> {
    let stubs = check_degrees(degrees)?;
    if stubs % 2 == 1 {
        return Ok(PairingEnumeration { graphs: Vec::new(), total: 0 });
    }
    let owner: Vec<usize> = degrees.iter().enumerate().flat_map(|(l, &k)| std::iter::repeat_n(l, k)).collect();
    let p = degrees.len();
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut used = vec![false; stubs];
    let mut mult = vec![0usize; p * p];
    fn recurse(
        owner: &[usize],
        used: &mut [bool],
        mult: &mut [usize],
        p: usize,
        counts: &mut BTreeMap<Vec<usize>, u64>,
    ) {
        let Some(first) = used.iter().position(|u| !u) else {
            *counts.entry(mult.to_vec()).or_insert(0) += 1;
            return;
        };
        used[first] = true;
        for j in first + 1..used.len() {
            if used[j] || owner[j] == owner[first] {
                continue;
            }
            used[j] = true;
            let (a, b) = (owner[first], owner[j]);
            mult[a * p + b] += 1;
            recurse(owner, used, mult, p, counts);
            mult[a * p + b] -= 1;
            used[j] = false;
        }
        used[first] = false;
    }
    recurse(&owner, &mut used, &mut mult, p, &mut counts);
    let mut total = 0;
    let graphs = counts
        .into_iter()
        .map(|(m, c)| {
            total += c;
            let edges = (0..p)
                .flat_map(|l| (l + 1..p).map(move |q| (l, q)))
                .map(|(l, q)| (l, q, m[l * p + q] + m[q * p + l]))
                .filter(|e| e.2 > 0)
                .collect();
            PairingGraph { degrees: degrees.to_vec(), edges, multiplicity: c }
        })
        .collect();
    Ok(PairingEnumeration { graphs, total })
}

/// `∏_l (2p-1)^{k_l/2} √(k_l!)` for `2p` nodes, the hypercontractive bound on the
/// number of complete pairings.
pub fn count_bound(degrees: &[usize]) -> Result<f64> {
    check_degrees(degrees)?;
    let nodes = degrees.len() as f64;
    Ok(degrees.iter().map(|&k| (nodes - 1.0).powf(k as f64 / 2.0) * factorial(k).sqrt()).product())
}

/// `E ∏ H_{k_l}(ξ_l)` for unit-variance Gaussians with covariance `cov(l, q)`.
pub fn product_expectation_cov<C: Fn(usize, usize) -> f64>(degrees: &[usize], cov: C) -> Result<f64> {
    let e = enumerate_pairings(degrees)?;
    Ok(e.graphs.iter().map(|g| g.multiplicity as f64 * g.weight(&cov)).sum())
}

/// `E ∏ H_{k_l}(y_{s_l})` for a stationary unit-variance process with correlation `rho`.
pub fn product_expectation<R: Fn(f64) -> f64>(degrees: &[usize], times: &[f64], rho: R) -> Result<f64> {
    if times.len() != degrees.len() {
        return domain("one time per degree is required");
    }
    product_expectation_cov(degrees, |l, q| rho(times[l] - times[q]))
}

// ---------------------------------------------------------------------------
// iterated integrals

/// Pre-aggregated fourth-moment terms for two finite-chaos observables.
struct FourPoint {
    /// `(coefficient product, graph)` over degree tuples `(k1,k2,k3,k4)`.
    terms: Vec<(f64, PairingGraph)>,
}

impl FourPoint {
    fn new(gi: &ChaosExpansion, gj: &ChaosExpansion) -> Result<Self> {
        let idx = |g: &ChaosExpansion| -> Vec<(usize, f64)> {
            g.coeffs.iter().enumerate().filter(|(k, c)| *k > 0 && **c != 0.0).map(|(k, c)| (k, *c)).collect()
        };
        let (a, b) = (idx(gi), idx(gj));
        let mut terms = Vec::new();
        for &(k1, c1) in &a {
            for &(k2, c2) in &b {
                for &(k3, c3) in &a {
                    for &(k4, c4) in &b {
                        let e = enumerate_pairings(&[k1, k2, k3, k4])?;
                        for g in e.graphs {
                            terms.push((c1 * c2 * c3 * c4 * g.multiplicity as f64, g));
                        }
                    }
                }
            }
        }
        Ok(FourPoint { terms })
    }

    fn eval<R: Fn(f64) -> f64>(&self, t: [f64; 4], rho: R) -> f64 {
        let mut r = [[1.0; 4]; 4];
        for l in 0..4 {
            for q in l + 1..4 {
                r[l][q] = rho(t[l] - t[q]);
            }
        }
        self.terms.iter().map(|(c, g)| c * g.weight(|l, q| r[l][q])).sum()
    }
}

/// `E[(𝕏^{i,j,ε}_{0,t})²]` with `𝕏 = α_i α_j ∫_0^t ∫_0^s G_i(y^ε_r) G_j(y^ε_s) dr ds`,
/// by composite Gauss–Legendre on the two triangles (`panels` per axis, 8 points each).
pub fn iterated_second_moment(
    gi: &ChaosExpansion,
    gj: &ChaosExpansion,
    table: &RhoTable,
    eps: f64,
    t: f64,
    panels: usize,
) -> Result<f64> {
    if !gi.exact || !gj.exact {
        return domain("iterated moments need finite-chaos observables");
    }
    let hurst = table.hurst();
    let (mi, mj) = match (gi.rank, gj.rank) {
        (Some(a), Some(b)) if a >= 1 && b >= 1 => (a, b),
        _ => return domain("observables must be centred with rank at least 1"),
    };
    let alpha = chaos::scaling_alpha(eps.min(0.5), h_star(mi, hurst))? * chaos::scaling_alpha(eps.min(0.5), h_star(mj, hurst))?;
    let fp = FourPoint::new(gi, gj)?;
    let gl = GaussLegendre::new(8);
    // nodes on [0,1] for the outer variables, reused for the inner ratio
    let mut unit: Vec<(f64, f64)> = Vec::new();
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        unit.extend(gl.on(a, a + 1.0 / panels as f64));
    }
    let rho = |d: f64| table.rho_eps(d, eps);
    // (r1, s1, r2, s2) = (t u1 v1, t v1, t u2 v2, t v2), Jacobian t⁴ v1 v2
    let rows: Vec<f64> = crate::par::map_slice(&unit, |&(v1, w1)| {
        let mut acc = 0.0;
        for &(u1, x1) in &unit {
            for &(v2, w2) in &unit {
                for &(u2, x2) in &unit {
                    let pts = [t * u1 * v1, t * v1, t * u2 * v2, t * v2];
                    acc += x1 * w2 * x2 * v2 * fp.eval(pts, rho);
                }
            }
        }
        acc * w1 * v1
    });
    Ok(alpha * alpha * t.powi(4) * stats::pairwise_sum(&rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteratedMomentReport {
    pub eps: f64,
    pub times: Vec<f64>,
    /// `‖𝕏_{0,t}‖_{L²}`.
    pub norms: Vec<f64>,
    pub fitted_exponent: f64,
    pub bound_exponent: f64,
    pub within: bool,
}

/// Fitted `t`-exponent of `‖𝕏^{i,j,ε}_{0,t}‖_{L²}` against
/// `H*(m_i)∨½ + H*(m_j)∨½`, tolerance `±0.15`.
pub fn iterated_moment_bound_check(
    gi: &ChaosExpansion,
    gj: &ChaosExpansion,
    hurst: f64,
    eps: f64,
    times: &[f64],
    p: usize,
) -> Result<IteratedMomentReport> {
    if p != 1 {
        return Err(Error::CostGuard("only the second moment (p = 1) is evaluated by quadrature".into()));
    }
    let table = RhoTable::standard(hurst)?;
    let norms = times
        .iter()
        .map(|&t| iterated_second_moment(gi, gj, &table, eps, t, 6).map(|m| m.max(0.0).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let fit = stats::log_log_slope(times, &norms);
    let e = |g: &ChaosExpansion| h_star(g.rank.unwrap_or(1), hurst).max(0.5);
    let bound_exponent = e(gi) + e(gj);
    Ok(IteratedMomentReport {
        eps,
        times: times.to_vec(),
        norms,
        fitted_exponent: fit.slope,
        bound_exponent,
        within: (fit.slope - bound_exponent).abs() <= 0.15,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_enumerations() {
        let e = enumerate_pairings(&[1, 1]).unwrap();
        assert_eq!(e.total, 1);
        let e = enumerate_pairings(&[2, 2]).unwrap();
        assert_eq!(e.total, 2);
        assert_eq!(e.graphs.len(), 1);
        assert_eq!(e.graphs[0].edge_count(0, 1), 2);
        assert_eq!(enumerate_pairings(&[1, 1, 1, 1]).unwrap().total, 3);
        assert_eq!(enumerate_pairings(&[1, 2]).unwrap().total, 0);
        assert_eq!(enumerate_pairings(&[3, 1]).unwrap().total, 0);
        assert!(enumerate_pairings(&[9, 9]).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!((count_bound(&[1, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert!((count_bound(&[2, 2]).unwrap() - 2.0).abs() < 1e-12);
        assert!((count_bound(&[1, 1, 1, 1]).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn two_node_identity() {
        for m in 1..=6 {
            let v = product_expectation(&[m, m], &[0.0, 0.4], |_| 0.3).unwrap();
            assert!((v - factorial(m) * 0.3f64.powi(m as i32)).abs() < 1e-14);
        }
        assert_eq!(product_expectation(&[2, 3], &[0.0, 1.0], |_| 0.5).unwrap(), 0.0);
    }

    #[test]
    fn wick_four_points() {
        let c = [[1.0, 0.2, 0.3, 0.4], [0.2, 1.0, 0.5, 0.6], [0.3, 0.5, 1.0, 0.7], [0.4, 0.6, 0.7, 1.0]];
        let v = product_expectation_cov(&[1, 1, 1, 1], |l, q| c[l][q]).unwrap();
        assert!((v - (0.2 * 0.7 + 0.3 * 0.6 + 0.4 * 0.5)).abs() < 1e-15);
    }
}
