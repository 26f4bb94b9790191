//! One-dimensional quadrature rules used throughout the crate.
//!
//! * [`gauss_kronrod`] is a globally adaptive 10/21-point Gauss–Kronrod
//!   integrator for smooth or mildly singular integrands on finite intervals.
//! * [`tanh_sinh`] is a double-exponential rule for integrable endpoint
//!   singularities (`x^{-0.8}` and the like).
//! * [`GaussLegendre`] and [`GaussHermite`] are fixed node sets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Value of a definite integral together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl Integral {
    pub fn zero() -> Self {
        Integral { value: 0.0, error: 0.0 }
    }
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral { value: self.value + rhs.value, error: self.error + rhs.error }
    }
}

// Kronrod 21-point abscissae and weights (QUADPACK qk21), Gauss 10-point weights.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        resk += WGK[j] * s;
        // odd Kronrod indices are the Gauss nodes
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    let value = resk * half;
    let err = ((resk - resg) * half).abs();
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod (G10/K21) quadrature on `[a, b]`.
///
/// Panels with the largest error estimate are bisected until the total
/// estimate drops below `max(abs_tol, rel_tol * |value|)` or the panel
/// budget is exhausted; the returned error is the final estimate either way.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    if a == b {
        return Integral::zero();
    }
    const MAX_PANELS: usize = 4000;
    let (v, e) = qk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_PANELS {
        let p = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = qk21(&mut f, p.a, mid);
        let (v2, e2) = qk21(&mut f, mid, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: p.b, value: v2, error: e2 });
    }
    // recompute from panels to avoid drift in the running sums
    let (mut value, mut error) = (0.0, 0.0);
    for p in heap.iter() {
        value += p.value;
        error += p.error;
    }
    Integral { value, error }
}

/// Gauss–Kronrod over `[a, b]` split at the given interior breakpoints.
pub fn gauss_kronrod_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Integral {
    let mut acc = Integral::zero();
    for w in points.windows(2) {
        if w[1] > w[0] {
            acc = acc + gauss_kronrod(&mut f, w[0], w[1], abs_tol, rel_tol);
        }
    }
    acc
}

/// Tanh–sinh (double exponential) quadrature on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` so that functions with an
/// algebraic singularity at either endpoint can be evaluated without
/// cancellation in the distance to that endpoint.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Integral {
    if a == b {
        return Integral::zero();
    }
    let len = b - a;
    let t_max = 6.0;
    let mut h = 0.5;
    let eval_node = |f: &mut F, t: f64| -> f64 {
        // u = pi/2 sinh t ; x - a = len * e^{-2u}/(1+e^{-2u}) for t >= 0 (mirrored otherwise)
        let u = 0.5 * PI * t.abs().sinh();
        let e = (-2.0 * u).exp();
        let offset = len * e / (1.0 + e);
        let w = 0.5 * len * 0.5 * PI * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if offset <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let (x, da, db) = if t >= 0.0 { (b - offset, len - offset, offset) } else { (a + offset, offset, len - offset) };
        let v = f(x, da, db);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut sum = eval_node(&mut f, 0.0);
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum += eval_node(&mut f, t) + eval_node(&mut f, -t);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut error = f64::INFINITY;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1usize;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            add += eval_node(&mut f, t) + eval_node(&mut f, -t);
            k += 2;
        }
        sum += add;
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        if error <= tol.max(1e-15 * estimate.abs()) {
            break;
        }
    }
    Integral { value: estimate, error }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Hermite rule for the standard normal weight: `E f(ξ) ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Probabilists' rule with `n` nodes; weights sum to one.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        // Roots of the orthonormal physicists' recurrence: bracketed by Sturm
        // bisection on the Jacobi matrix, polished by Newton, then
        // x -> sqrt(2) x and w -> w / sqrt(pi).
        let pim4 = PI.powf(-0.25);
        let mut xs = vec![0.0; n];
        let mut ws = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        // eigenvalues of the Jacobi matrix below x
        let below = |x: f64| {
            let mut d = -x;
            let mut count = (d < 0.0) as usize;
            for k in 1..n {
                if d == 0.0 {
                    d = -f64::MIN_POSITIVE;
                }
                d = -x - (k as f64 / 2.0) / d;
                count += (d < 0.0) as usize;
            }
            count
        };
        let top = (2.0 * nf + 1.0).sqrt() + 1.0;
        for i in 0..m {
            let (mut lo, mut hi) = (-1.0, top);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if below(mid) >= n - i {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut pp = 0.0;
            let mut done = false;
            for it in 0..20 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                // the last pass only refreshes pp at the final z
                if done || it == 19 {
                    break;
                }
                let dz = p1 / pp;
                z -= dz;
                done = dz.abs() <= 1e-15 * z.abs().max(1.0);
            }
            xs[i] = z;
            xs[n - 1 - i] = -z;
            ws[i] = 2.0 / (pp * pp);
            ws[n - 1 - i] = ws[i];
        }
        let sqrt_pi = PI.sqrt();
        let nodes: Vec<f64> = xs.iter().rev().map(|x| x * 2f64.sqrt()).collect();
        let weights: Vec<f64> = ws.iter().rev().map(|w| w / sqrt_pi).collect();
        GaussHermite { nodes, weights }
    }

    /// `E f(ξ)` for `ξ ~ N(0,1)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid integral, `out[0] = 0`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    if let Some(&first) = values.first() {
        out.push(0.0);
        let mut prev = first;
        for &v in &values[1..] {
            acc += 0.5 * dt * (prev + v);
            out.push(acc);
            prev = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_polynomial_and_exp() {
        let r = gauss_kronrod(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 0.0);
        assert!((r.value - 0.0).abs() < 1e-13);
        let r = gauss_kronrod(|x: f64| (-x).exp(), 0.0, 40.0, 1e-14, 0.0);
        assert!((r.value - (1.0 - (-40f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn kronrod_handles_sqrt_endpoint() {
        let r = gauss_kronrod(|x: f64| x.sqrt(), 0.0, 1.0, 1e-13, 0.0);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn tanh_sinh_singular_endpoint() {
        // ∫_0^1 x^{-0.8} dx = 5
        let r = tanh_sinh(|_, da, _| da.powf(-0.8), 0.0, 1.0, 1e-12);
        assert!((r.value - 5.0).abs() < 1e-9, "{r:?}");
        // ∫_0^1 (1-x)^{-0.5} dx = 2, singular at the right end
        let r = tanh_sinh(|_, _, db| db.powf(-0.5), 0.0, 1.0, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(|x| x.powi(15) + x.powi(14), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(40);
        assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((gh.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((gh.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((gh.expect(|x| x.powi(8)) - 105.0).abs() < 1e-9);
    }

    #[test]
    fn hermite_large_rules_keep_distinct_nodes() {
        for n in [161, 200, 320] {
            let gh = GaussHermite::new(n);
            assert!(gh.nodes.windows(2).all(|w| w[1] > w[0]), "n = {n}");
            assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-12, "n = {n}");
            assert!((gh.expect(|x| x.powi(6)) - 15.0).abs() < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn trapezoid_linear_exact() {
        let v: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        assert!((trapezoid(&v, 0.1) - 0.5).abs() < 1e-14);
        let c = cumulative_trapezoid(&v, 0.1);
        assert!((c[10] - 0.5).abs() < 1e-14);
        assert_eq!(c[0], 0.0);
    }
}
