//! Hermite processes `Z^{H,m}` as discretised off-diagonal multiple Wiener–Itô
//! integrals of the kernel `∫_0^t ∏ (s-ξ_j)_+^{-d} ds`, `d = ½ + (1-H)/m`.
//!
//! The noise is cell-averaged on a mesh of `ξ`: uniform cells of width `h` on
//! `[-1, T]` and geometrically growing cells on `[-R, -1]`. Writing
//! `a_c(s) = w_c φ̄_c(s)` with `φ̄_c` the cell average of the kernel, the sum over
//! tuples of distinct cells is the elementary symmetric polynomial `e_m(a(s))`,
//! which excludes every diagonal automatically.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::chaos::factorial;
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::quad::GaussLegendre;
use crate::rng::{self, StreamRng};
use crate::stats::{self, Estimate};
use crate::{par, rng::normals};

/// Parameters of a discretised Hermite process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteSpec {
    pub m: usize,
    /// Self-similarity exponent of the process, in `(½, 1)`.
    pub hurst: f64,
    /// Left truncation of the `ξ` domain.
    pub truncation: f64,
    /// Uniform inner mesh width; `1/h` must be an integer.
    pub mesh: f64,
    /// Growth ratio of the outer cells.
    pub ratio: f64,
    /// Gauss–Legendre points per `s`-cell.
    pub order: usize,
}

impl HermiteSpec {
    pub fn new(m: usize, hurst: f64) -> Result<Self> {
        let spec = HermiteSpec { m, hurst, truncation: 1e10, mesh: 1.0 / 256.0, ratio: 1.08, order: 6 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mesh(self, mesh: f64) -> Result<Self> {
        let s = HermiteSpec { mesh, ..self };
        s.validate()?;
        Ok(s)
    }

    pub fn with_truncation(self, truncation: f64) -> Result<Self> {
        let s = HermiteSpec { truncation, ..self };
        s.validate()?;
        Ok(s)
    }

    /// Process for a fast variable of Hurst parameter `h_fast` and rank `m`:
    /// `Z^{H*(m), m}`.
    pub fn for_rank(m: usize, h_fast: f64) -> Result<Self> {
        Self::new(m, crate::chaos::h_star(m, h_fast))
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.m) {
            return domain(format!("rank {} outside the supported range 1..=3", self.m));
        }
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return domain(format!("Hermite processes need H in (1/2, 1), got {}", self.hurst));
        }
        let inv = 1.0 / self.mesh;
        if !(self.mesh > 0.0 && (inv - inv.round()).abs() < 1e-9) {
            return domain("1/mesh must be an integer");
        }
        if !(self.truncation > 1.0 && self.ratio > 1.0 && self.order >= 1) {
            return domain("truncation must exceed 1 and the cell ratio must exceed 1");
        }
        Ok(())
    }

    /// Kernel exponent `d = ½ + (1-H)/m`.
    pub fn exponent(&self) -> f64 {
        0.5 + (1.0 - self.hurst) / self.m as f64
    }
}

/// `H*` ↦ fast Hurst parameter: `Ĥ(m) = (H-1)/m + 1`.
pub fn hat_h(m: usize, hurst: f64) -> f64 {
    (hurst - 1.0) / m as f64 + 1.0
}

/// `K(H,m)² = m! H(2H-1) / B(1-d, 2d-1)^m`, the unit-variance constant of the
/// continuous definition.
pub fn normalization_closed_form(m: usize, hurst: f64) -> f64 {
    let d = 0.5 + (1.0 - hurst) / m as f64;
    (factorial(m) * hurst * (2.0 * hurst - 1.0) / beta(1.0 - d, 2.0 * d - 1.0).powi(m as i32)).sqrt()
}

/// Cell boundaries of the `ξ` mesh on `[-R, horizon]`.
fn mesh_cells(spec: &HermiteSpec, horizon: f64) -> Vec<(f64, f64)> {
    let mut outer = vec![-1.0];
    let mut b = 1.0;
    while b < spec.truncation {
        b = (b * spec.ratio).min(spec.truncation);
        outer.push(-b);
    }
    let mut cells: Vec<(f64, f64)> = outer.windows(2).rev().map(|w| (w[1], w[0])).collect();
    let k = ((horizon + 1.0) / spec.mesh).round() as usize;
    cells.extend((0..k).map(|i| (-1.0 + i as f64 * spec.mesh, -1.0 + (i + 1) as f64 * spec.mesh)));
    cells
}

/// Cell average of `(s-ξ)_+^{-d}` over `ξ ∈ [a, b]`.
fn cell_average(s: f64, a: f64, b: f64, d: f64) -> f64 {
    let e = 1.0 - d;
    let pa = if s > a { (s - a).powf(e) } else { 0.0 };
    let pb = if s > b { (s - b).powf(e) } else { 0.0 };
    (pa - pb) / (e * (b - a))
}

/// Power sums to `e_m` by Newton's identities.
fn elementary(m: usize, p: &[f64; 3]) -> f64 {
    match m {
        1 => p[0],
        2 => 0.5 * (p[0] * p[0] - p[1]),
        _ => (p[0] * p[0] * p[0] - 3.0 * p[0] * p[1] + 2.0 * p[2]) / 6.0,
    }
}

const TABLE_BUDGET: usize = 60_000_000;

/// Precomputed kernel table for one spec on `[0, horizon]`.
#[derive(Debug, Clone)]
struct Kernel {
    cells: Vec<(f64, f64)>,
    /// `φ̄_c(s_α)·√Δ_c`, node-major.
    table: Vec<f64>,
    /// Quadrature weights of the `s`-nodes.
    weights: Vec<f64>,
    nodes_per_cell: usize,
    s_cells: usize,
    /// Per node, the number of leading cells with `ξ < s`; the rest of the row is zero.
    live: Vec<usize>,
}

impl Kernel {
    fn new(spec: &HermiteSpec, horizon: f64) -> Result<Self> {
        let cells = mesh_cells(spec, horizon);
        let s_cells = (horizon / spec.mesh).round() as usize;
        let gl = GaussLegendre::new(spec.order);
        let nodes: Vec<(f64, f64)> = (0..s_cells)
            .flat_map(|j| gl.on(j as f64 * spec.mesh, (j + 1) as f64 * spec.mesh).collect::<Vec<_>>())
            .collect();
        let size = nodes.len() * cells.len();
        if size > TABLE_BUDGET {
            return Err(Error::CostGuard(format!("kernel table of {size} entries exceeds {TABLE_BUDGET}")));
        }
        let d = spec.exponent();
        let rows = par::map_slice(&nodes, |&(s, _)| {
            cells.iter().map(|&(a, b)| cell_average(s, a, b, d) * (b - a).sqrt()).collect::<Vec<f64>>()
        });
        Ok(Kernel {
            table: rows.concat(),
            live: nodes.iter().map(|&(s, _)| cells.partition_point(|&(a, _)| a < s)).collect(),
            weights: nodes.iter().map(|n| n.1).collect(),
            nodes_per_cell: spec.order,
            s_cells,
            cells,
        })
    }

    fn row(&self, node: usize) -> &[f64] {
        let n = self.cells.len();
        &self.table[node * n..node * n + self.live[node]]
    }

    /// `∫ e_m(a(s)) ds` over each `s`-cell for standard normal noise `z`.
    fn cell_integrals(&self, m: usize, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.s_cells);
        let mut node = 0;
        for _ in 0..self.s_cells {
            let mut acc = 0.0;
            for _ in 0..self.nodes_per_cell {
                let mut p = [0.0; 3];
                for (phi, zc) in self.row(node).iter().zip(z) {
                    let a = phi * zc;
                    p[0] += a;
                    if m >= 2 {
                        let a2 = a * a;
                        p[1] += a2;
                        if m >= 3 {
                            p[2] += a2 * a;
                        }
                    }
                }
                acc += self.weights[node] * elementary(m, &p);
                node += 1;
            }
            out.push(acc);
        }
        out
    }

    /// `E[(∫_0^t e_m(a(s)) ds)²]` at `t = horizon`, exactly for the discretisation.
    fn second_moment(&self, m: usize) -> f64 {
        let nodes = self.weights.len();
        let rows = par::map_indexed(nodes, |al| {
            let ra = self.row(al);
            let mut acc = 0.0;
            for be in 0..=al {
                let rb = self.row(be);
                let mut p = [0.0; 3];
                for (x, y) in ra.iter().zip(rb) {
                    let u = x * y;
                    p[0] += u;
                    if m >= 2 {
                        let u2 = u * u;
                        p[1] += u2;
                        if m >= 3 {
                            p[2] += u2 * u;
                        }
                    }
                }
                let w = if be == al { 1.0 } else { 2.0 };
                acc += w * self.weights[be] * elementary(m, &p);
            }
            acc * self.weights[al]
        });
        stats::pairwise_sum(&rows)
    }
}

/// `K` making the discretised `Var(Z_1) = 1`, from the exact second moment of the
/// discretised chaos (no sampling).
pub fn normalization_k(spec: &HermiteSpec) -> Result<f64> {
    spec.validate()?;
    let kernel = Kernel::new(spec, 1.0)?;
    let v = kernel.second_moment(spec.m);
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Quadrature { achieved: v, target: 0.0 });
    }
    Ok(1.0 / v.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub spec: HermiteSpec,
}

/// Sampler of `Z^{H,m}` on a grid whose step is a multiple of the inner mesh.
#[derive(Debug, Clone)]
pub struct HermiteSampler {
    spec: HermiteSpec,
    grid: TimeGrid,
    kernel: Kernel,
    k: f64,
    stride: usize,
}

impl HermiteSampler {
    pub fn new(spec: HermiteSpec, grid: TimeGrid) -> Result<Self> {
        spec.validate()?;
        let ratio = grid.dt() / spec.mesh;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 0.5 {
            return domain("grid step must be a multiple of the Hermite mesh");
        }
        let k = normalization_k(&spec)?;
        let kernel = Kernel::new(&spec, grid.horizon())?;
        Ok(HermiteSampler { spec, grid, kernel, k, stride: ratio.round() as usize })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn spec(&self) -> HermiteSpec {
        self.spec
    }

    /// Number of standard normals consumed per path.
    pub fn noise_len(&self) -> usize {
        self.kernel.cells.len()
    }

    /// Path values driven by the given standard normal cell noise. Samplers
    /// with the same mesh and horizon share noise layouts.
    pub fn values_from_noise(&self, z: &[f64]) -> Vec<f64> {
        let per_cell = self.kernel.cell_integrals(self.spec.m, z);
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(0.0);
        let mut acc = 0.0;
        for chunk in per_cell.chunks(self.stride) {
            acc += chunk.iter().sum::<f64>();
            out.push(self.k * acc);
        }
        out
    }

    pub fn sample_values(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.values_from_noise(&normals(rng, self.noise_len()))
    }

    pub fn sample(&self, rng: &mut StreamRng) -> HermitePath {
        HermitePath { grid: self.grid, values: self.sample_values(rng), spec: self.spec }
    }

    pub fn ensemble(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        par::map_indexed(count, |i| self.sample_values(&mut rng::substream(seed, i as u64)))
    }
}

pub fn sample_hermite(spec: HermiteSpec, grid: TimeGrid, seed: u64) -> Result<HermitePath> {
    let s = HermiteSampler::new(spec, grid)?;
    Ok(s.sample(&mut rng::substream(seed, 0)))
}

/// Paired ensembles of two Hermite processes built from the same Wiener noise.
pub fn paired_ensemble(a: &HermiteSampler, b: &HermiteSampler, seed: u64, count: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if a.noise_len() != b.noise_len() || a.grid != b.grid || a.spec.mesh != b.spec.mesh {
        return domain("paired Hermite processes need a common mesh and grid");
    }
    Ok(par::map_indexed(count, |i| {
        let z = normals(&mut rng::substream(seed, i as u64), a.noise_len());
        (a.values_from_noise(&z), b.values_from_noise(&z))
    }))
}

/// Empirical `Cov(Z_{t_i}, Z'_{t_j})` for paired paths at the given indices.
pub fn cross_rank_covariance(pairs: &[(Vec<f64>, Vec<f64>)], idx: &[usize]) -> Vec<Vec<Estimate>> {
    idx.iter()
        .map(|&i| {
            let a: Vec<f64> = pairs.iter().map(|p| p.0[i]).collect();
            idx.iter()
                .map(|&j| {
                    let b: Vec<f64> = pairs.iter().map(|p| p.1[j]).collect();
                    stats::covariance_estimate(&a, &b)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_polynomials() {
        let x = [0.3, -1.2, 2.0, 0.5];
        let p = [x.iter().sum(), x.iter().map(|v| v * v).sum(), x.iter().map(|v| v * v * v).sum()];
        let mut e2 = 0.0;
        let mut e3 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                e2 += x[i] * x[j];
                for k in j + 1..4 {
                    e3 += x[i] * x[j] * x[k];
                }
            }
        }
        assert!((elementary(2, &p) - e2).abs() < 1e-12);
        assert!((elementary(3, &p) - e3).abs() < 1e-12);
    }

    #[test]
    fn cell_average_integrates_kernel() {
        let (s, a, b, d): (f64, f64, f64, f64) = (0.7, 0.2, 0.5, 0.6);
        let exact = ((s - a).powf(1.0 - d) - (s - b).powf(1.0 - d)) / (1.0 - d) / (b - a);
        assert!((cell_average(s, a, b, d) - exact).abs() < 1e-15);
        assert_eq!(cell_average(0.1, 0.2, 0.5, d), 0.0);
    }

    #[test]
    fn mesh_covers_domain() {
        let spec = HermiteSpec::new(2, 0.8).unwrap();
        let cells = mesh_cells(&spec, 1.0);
        assert_eq!(cells[0].0, -1e10);
        assert!((cells.last().unwrap().1 - 1.0).abs() < 1e-12);
        for w in cells.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-9 * w[0].1.abs().max(1.0));
        }
    }

    #[test]
    fn rank_one_constant_matches_closed_form() {
        let spec = HermiteSpec::new(1, 0.7).unwrap();
        let k = normalization_k(&spec).unwrap();
        let exact = normalization_closed_form(1, 0.7);
        assert!((k / exact - 1.0).abs() < 5e-3, "{k} vs {exact}");
    }

    #[test]
    fn invalid_specs() {
        assert!(HermiteSpec::new(2, 0.4).is_err());
        assert!(HermiteSpec::new(4, 0.8).is_err());
        assert!(HermiteSpec::new(1, 0.7).unwrap().with_mesh(0.3).is_err());
        assert!((hat_h(2, 0.8) - 0.9).abs() < 1e-15);
    }
}
