//! One function per experiment kind. Each returns its checks, CSV tables and a
//! JSON detail block; nothing here touches the file system.

use serde_json::json;
use slowfast::chaos::{self, factorial, hermite_poly, ScalingRegime};
use slowfast::diagram::{count_bound, enumerate_pairings, product_expectation, product_expectation_cov};
use slowfast::functional_limits::{clt_experiment, drift_matrix, simulate_functionals, Block, EnsembleConfig};
use slowfast::gaussian_noise::{
    empirical_covariance, fbm_covariance, sample_wiener_values, FbmSampler, FouCorrelation, FouSampler, FouSpec,
};
use slowfast::grid::TimeGrid;
use slowfast::hermite_process::{cross_rank_covariance, paired_ensemble, HermiteSampler, HermiteSpec};
use slowfast::martingale::{area_decomposition_check, bar_variance, conditional_hermite, ModelConfig};
use slowfast::quad::GaussHermite;
use slowfast::rde::{
    homogenisation_experiment, rk4_forced, solve_limit_classical, solve_rde, FieldPreset, HomogenisationParams,
    LimitDriverSampler, VectorFieldFamily, YoungStep,
};
use slowfast::rough_path::{geometric_defect, max_chen_defect, pure_area_example, tightness_diagnostic, Flavor, Increments, RoughPathLift};
use slowfast::stats::{self, Estimate};
use slowfast::{par, rng};

use crate::config::*;
use crate::output::{Check, Outcome, Table};
use crate::{row, CliError};

type Res = Result<Outcome, CliError>;

pub fn run_experiment(cfg: &ExperimentConfig) -> Res {
    let seed = cfg.seed;
    match &cfg.experiment {
        Experiment::Noise(c) => noise(c, seed),
        Experiment::Correlation(c) => correlation(c),
        Experiment::Chaos(c) => chaos_checks(c),
        Experiment::Hermite(c) => hermite(c, seed),
        Experiment::Clt(c) => clt(c, seed),
        Experiment::Lift(c) => lift(c, seed),
        Experiment::Tightness(c) => tightness(c, seed),
        Experiment::Diagram(c) => diagram(c, seed),
        Experiment::Martingale(c) => martingale(c, seed),
        Experiment::Area(c) => area(c, seed),
        Experiment::Rde(c) => rde(c, seed),
        Experiment::Homogenize(c) => homogenize(c, seed),
    }
}

fn max_z(entries: impl IntoIterator<Item = (Estimate, f64)>) -> f64 {
    entries.into_iter().map(|(e, t)| e.z_score(t)).fold(0.0, f64::max)
}

fn noise(c: &NoiseConfig, seed: u64) -> Res {
    let grid = TimeGrid::over(c.horizon, c.steps)?;
    let idx: Vec<usize> = (1..=c.steps).collect();
    let mut checks = Vec::new();
    let mut cov_table = Table::new("fbm_covariance", &["hurst", "t", "s", "empirical", "se", "analytic"]);
    let mut var_table = Table::new("fou_variance", &["hurst", "t", "empirical", "se"]);
    for (hi, &h) in c.hurst.iter().enumerate() {
        let fbm = FbmSampler::new(h, grid)?;
        let sub = rng::derive_seed(seed, hi as u64);
        let paths = par::map_indexed(c.paths, |r| fbm.sample_values(&mut rng::substream(sub, r as u64)));
        let cov = empirical_covariance(&paths, &idx);
        let mut pairs = Vec::new();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().skip(a) {
                let target = fbm_covariance(h, grid.time(i), grid.time(j))?;
                cov_table.push(row![h, grid.time(i), grid.time(j), cov[a][b].value, cov[a][b].se, target]);
                pairs.push((cov[a][b], target));
            }
        }
        checks.push(Check::at_most(&format!("fbm_covariance_max_z_H{h}"), max_z(pairs), c.n_se));

        let fou = FouSampler::new(FouSpec::new(h, c.eps)?, grid)?;
        let paths = fou.ensemble(rng::derive_seed(seed, 100 + hi as u64), c.paths);
        let mut vars = Vec::new();
        for i in 0..grid.len() {
            let col: Vec<f64> = paths.iter().map(|p| p[i]).collect();
            let v = stats::variance_estimate(&col);
            var_table.push(row![h, grid.time(i), v.value, v.se]);
            vars.push((v, 1.0));
        }
        checks.push(Check::at_most(&format!("fou_variance_max_z_H{h}"), max_z(vars), c.n_se));
    }
    Ok(Outcome { checks, tables: vec![cov_table, var_table], details: json!({ "paths": c.paths, "steps": c.steps }) })
}

fn correlation(c: &CorrelationConfig) -> Res {
    let corr = FouCorrelation::new(c.hurst)?;
    let ratio = (c.s_max / c.s_min).powf(1.0 / (c.points - 1) as f64);
    let s: Vec<f64> = (0..c.points).map(|i| c.s_min * ratio.powi(i as i32)).collect();
    let rho: Vec<f64> = s.iter().map(|&v| corr.rho(v)).collect();
    let mut table = Table::new("correlation", &["s", "rho", "rho_spectral", "asymptote"]);
    let tail = corr.tail_constant();
    for (&v, &r) in s.iter().zip(&rho) {
        table.push(row![v, r, corr.rho_spectral(v).value, tail * v.powf(2.0 * c.hurst - 2.0)]);
    }
    let fit = stats::log_log_slope(&s, &rho);
    let target = 2.0 * c.hurst - 2.0;
    Ok(Outcome {
        checks: vec![Check::abs("log_log_slope", fit.slope, target, c.tolerance)],
        tables: vec![table],
        details: json!({ "slope": fit.slope, "slope_se": fit.slope_se, "intercept": fit.intercept }),
    })
}

fn chaos_checks(c: &ChaosConfig) -> Res {
    let mut checks = Vec::new();
    let gh = GaussHermite::new(c.max_degree + 8);
    let mut ortho = Table::new("orthogonality", &["i", "j", "inner_product", "expected"]);
    let mut worst: f64 = 0.0;
    for i in 0..=c.max_degree {
        for j in 0..=c.max_degree {
            let ip = gh.expect(|x| hermite_poly(i, x) * hermite_poly(j, x));
            let expected = if i == j { factorial(i) } else { 0.0 };
            ortho.push(row![i, j, ip, expected]);
            worst = worst.max((ip - expected).abs() / (factorial(i) * factorial(j)).sqrt());
        }
    }
    checks.push(Check::at_most("orthogonality_max_scaled_error", worst, c.orthogonality_tol));

    let named: [(&str, Box<dyn Fn(f64) -> f64>, usize); 4] = [
        ("x", Box::new(|x| x), 1),
        ("x^2-1", Box::new(|x| x * x - 1.0), 2),
        ("x^3", Box::new(|x| x * x * x), 1),
        ("|x|-E|x|", Box::new(|x: f64| x.abs() - (2.0 / std::f64::consts::PI).sqrt()), 2),
    ];
    let mut ranks = Table::new("rank_detection", &["observable", "detected", "expected"]);
    for (label, f, expected) in &named {
        let exp = chaos::expand(f, c.truncation, chaos::DEFAULT_RANK_TOL)?;
        let detected = exp.rank.unwrap_or(0);
        ranks.push(row![*label, detected, *expected]);
        checks.push(Check::flag(&format!("rank_{label}"), detected == *expected));
    }

    // α branches: diffusive, critical (exact rational H), superdiffusive
    let mut alpha = Table::new("alpha_branches", &["m", "hurst", "h_star", "eps", "alpha", "closed_form"]);
    let mut exact = true;
    for (m, num, den) in [(3usize, 3i64, 10i64), (2, 3, 4), (2, 9, 10)] {
        let reg = ScalingRegime::from_rational(m, num, den)?;
        for eps in [0.1, 0.01, 1e-3] {
            let a = reg.alpha(eps);
            let hs = reg.h_star;
            let closed = if 2.0 * hs < 1.0 - 1e-12 {
                1.0 / eps.sqrt()
            } else if 2.0 * hs > 1.0 + 1e-12 {
                eps.powf(hs - 1.0)
            } else {
                1.0 / (eps * (1.0 / eps).ln()).sqrt()
            };
            exact &= (a - closed).abs() <= 4.0 * f64::EPSILON * closed;
            alpha.push(row![m, num as f64 / den as f64, hs, eps, a, closed]);
        }
    }
    checks.push(Check::flag("alpha_branches", exact));

    let mut coeffs = Table::new("expansions", &["observable", "l", "coefficient"]);
    let mut reports = Vec::new();
    for spec in &c.observables {
        let g = parse_observable(spec)?.expansion(c.truncation)?.centred();
        for (l, v) in g.coeffs.iter().enumerate() {
            coeffs.push(row![spec.as_str(), l, *v]);
        }
        reports.push(json!({ "observable": spec, "rank_after_centring": g.rank, "l2_norm": g.l2_norm, "tail_bound": g.tail_bound }));
    }
    Ok(Outcome { checks, tables: vec![ortho, ranks, alpha, coeffs], details: json!({ "observables": reports }) })
}

fn hermite(c: &HermiteConfig, seed: u64) -> Res {
    let lambda = c.lambda.round() as usize;
    if (c.lambda - lambda as f64).abs() > 1e-12 {
        return Err(CliError::Config("lambda must be an integer".into()));
    }
    let grid = TimeGrid::over(c.lambda, c.steps * lambda)?;
    let mut checks = Vec::new();
    let mut cov_table = Table::new("hermite_covariance", &["m", "hurst", "t", "s", "empirical", "se", "analytic"]);
    let mut ss_table = Table::new("self_similarity", &["m", "hurst", "t", "s", "scaled", "rescaled_base", "se"]);
    let mut samplers = Vec::new();
    let mut variances = Vec::new();
    for (ci, (&(m, h), &n)) in c.cases.iter().zip(&c.paths).enumerate() {
        let sampler = HermiteSampler::new(HermiteSpec::new(m, h)?, grid)?;
        let paths = sampler.ensemble(rng::derive_seed(seed, ci as u64), n);
        let idx: Vec<usize> = (1..grid.len()).collect();
        let cov = empirical_covariance(&paths, &idx);
        let unit = c.steps - 1;
        variances.push(json!({ "m": m, "hurst": h, "var_z1": cov[unit][unit], "normalization_k": sampler.k() }));
        checks.push(Check::abs(&format!("var_z1_m{m}_H{h}"), cov[unit][unit].value, 1.0, c.variance_tolerance));
        let mut pairs = Vec::new();
        for a in 0..idx.len() {
            for b in a..idx.len() {
                let (t, s) = (grid.time(idx[a]), grid.time(idx[b]));
                let target = fbm_covariance(h, t, s)?;
                cov_table.push(row![m, h, t, s, cov[a][b].value, cov[a][b].se, target]);
                pairs.push((cov[a][b], target));
            }
        }
        checks.push(Check::at_most(&format!("covariance_max_z_m{m}_H{h}"), max_z(pairs), c.n_se));
        // Cov(Z_{λt}, Z_{λs}) against λ^{2H} Cov(Z_t, Z_s) for t, s in (0, 1]
        let scale = c.lambda.powf(2.0 * h);
        let mut worst: f64 = 0.0;
        for a in 0..c.steps {
            for b in a..c.steps {
                let (big_a, big_b) = ((a + 1) * lambda - 1, (b + 1) * lambda - 1);
                let (hi, lo) = (cov[big_a][big_b], cov[a][b]);
                let se = (hi.se * hi.se + scale * scale * lo.se * lo.se).sqrt();
                let z = (hi.value - scale * lo.value).abs() / se;
                worst = worst.max(z);
                ss_table.push(row![m, h, grid.time(a + 1), grid.time(b + 1), hi.value, scale * lo.value, se]);
            }
        }
        checks.push(Check::at_most(&format!("self_similarity_max_z_m{m}_H{h}"), worst, c.n_se));
        samplers.push(sampler);
    }
    let mut tables = vec![cov_table, ss_table];
    if samplers.len() >= 2 && c.cross_paths > 0 {
        let pairs = paired_ensemble(&samplers[0], &samplers[1], rng::derive_seed(seed, 50), c.cross_paths)?;
        let idx: Vec<usize> = (1..grid.len()).collect();
        let cross = cross_rank_covariance(&pairs, &idx);
        let mut t = Table::new("cross_rank_covariance", &["t", "s", "empirical", "se"]);
        let mut entries = Vec::new();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                t.push(row![grid.time(i), grid.time(j), cross[a][b].value, cross[a][b].se]);
                entries.push((cross[a][b], 0.0));
            }
        }
        checks.push(Check::at_most("cross_rank_max_z", max_z(entries), c.n_se));
        tables.push(t);
    }
    Ok(Outcome { checks, tables, details: json!({ "cases": variances }) })
}

fn clt(c: &CltConfig, seed: u64) -> Res {
    let family = centred_expansions(&c.observables)?;
    let cfg = EnsembleConfig {
        hurst: c.hurst,
        eps: c.eps.clone(),
        horizon: c.horizon,
        out_steps: c.out_steps,
        paths: c.paths,
        seed,
        resolution: c.resolution,
    };
    let check_times: Vec<usize> = (1..=4).map(|k| k * c.out_steps / 4).filter(|&k| k > 0).collect();
    let rep = clt_experiment(&family, &cfg, c.limit_paths, &check_times)?;
    let mut checks = Vec::new();
    let mut comp = Table::new("components", &["eps", "k", "block", "variance", "se", "target_variance", "ks", "ks_pvalue"]);
    let mut cov = Table::new("covariance", &["eps", "i", "j", "t", "s", "empirical", "se", "target"]);
    for level in &rep.levels {
        for k in &level.components {
            let block = if k.block == Block::Wiener { "wiener" } else { "hermite" };
            comp.push(row![level.eps, k.k, block, k.variance.value, k.variance.se, k.target_variance, k.ks, k.ks_pvalue]);
            checks.push(Check::rel(&format!("variance_eps{}_G{}", level.eps, k.k), k.variance.value, k.target_variance, c.variance_tolerance));
            checks.push(Check::at_most(&format!("ks_eps{}_G{}", level.eps, k.k), k.ks, c.ks_tolerance));
        }
        for v in &level.covariances {
            cov.push(row![level.eps, v.i, v.j, v.t, v.s, v.empirical.value, v.empirical.se, v.target]);
        }
    }
    let details = json!({
        "drift": rep.drift,
        "literal_variance_ratio": rep.literal_variance_ratio,
        "cross_block": rep.levels.iter().map(|l| json!({ "eps": l.eps, "correlations": l.cross_block })).collect::<Vec<_>>(),
    });
    Ok(Outcome { checks, tables: vec![comp, cov], details })
}

fn lift(c: &LiftConfig, seed: u64) -> Res {
    let grid = TimeGrid::over(1.0, c.steps)?;
    let mut chen: f64 = 0.0;
    let mut geo: f64 = 0.0;
    for l in 0..c.chen_lifts {
        let paths: Vec<Vec<f64>> = (0..c.dim)
            .map(|i| sample_wiener_values(&grid, &mut rng::substream(seed, (l * c.dim + i) as u64)))
            .collect();
        let ito = RoughPathLift::wiener(grid, &paths, Flavor::Ito)?;
        let strat = RoughPathLift::wiener(grid, &paths, Flavor::Stratonovich)?;
        let canon = RoughPathLift::canonical(grid, &paths)?;
        let area: Vec<f64> = (0..c.dim * c.dim).map(|k| (k as f64 * 0.37).sin()).collect();
        let eff = ito.with_area(area)?;
        for lift in [&ito, &strat, &canon, &eff] {
            chen = chen.max(max_chen_defect(lift));
        }
        for lift in [&strat, &canon] {
            for s in 0..grid.len() {
                for t in s + 1..grid.len() {
                    geo = geo.max(geometric_defect(lift, s, t));
                }
            }
        }
    }
    let mut checks = vec![
        Check::at_most("chen_max_defect", chen, c.chen_tolerance),
        Check::at_most("geometric_max_defect", geo, c.chen_tolerance),
    ];

    let sub = rng::derive_seed(seed, 1);
    let diag = par::map_indexed(c.paths, |r| {
        let w = sample_wiener_values(&grid, &mut rng::substream(sub, r as u64));
        let ito = RoughPathLift::wiener(grid, std::slice::from_ref(&w), Flavor::Ito).expect("one component");
        let strat = RoughPathLift::wiener(grid, &[w], Flavor::Stratonovich).expect("one component");
        (ito.level2(0, c.steps)[0], strat.level2(0, c.steps)[0])
    });
    let ito = stats::mean_estimate(&diag.iter().map(|d| d.0).collect::<Vec<_>>());
    let strat = stats::mean_estimate(&diag.iter().map(|d| d.1).collect::<Vec<_>>());
    checks.push(Check::at_most("ito_diagonal_z", ito.z_score(0.0), c.n_se));
    checks.push(Check::at_most("stratonovich_diagonal_z", strat.z_score(0.5), c.n_se));

    let agrid = TimeGrid::over(1.0, c.area_steps)?;
    let mut area = Table::new("pure_area", &["lambda1", "lambda2", "t", "level2_12", "target"]);
    for (lam, sign) in [([1i8, -1i8], 1.0), ([1, 1], 0.0), ([-1, 1], -1.0)] {
        let lift = pure_area_example(c.frequency, lam, agrid)?;
        let mut worst: f64 = 0.0;
        for k in 1..=4 {
            let i = k * c.area_steps / 4;
            let t = agrid.time(i);
            let v = lift.level2(0, i)[1];
            worst = worst.max((v - sign * t / 2.0).abs());
            area.push(row![lam[0] as f64, lam[1] as f64, t, v, sign * t / 2.0]);
        }
        checks.push(Check::at_most(&format!("pure_area_{}_{}", lam[0], lam[1]), worst, c.area_tolerance));
    }
    Ok(Outcome {
        checks,
        tables: vec![area],
        details: json!({ "ito_diagonal": ito, "stratonovich_diagonal": strat, "chen_max_defect": chen, "geometric_max_defect": geo }),
    })
}

fn tightness(c: &TightnessConfig, seed: u64) -> Res {
    let family = centred_expansions(&c.observables)?;
    let cfg = EnsembleConfig {
        hurst: c.hurst,
        eps: c.eps.clone(),
        horizon: c.horizon,
        out_steps: c.out_steps,
        paths: c.paths,
        seed,
        resolution: c.resolution,
    };
    let ens = simulate_functionals(&family, &cfg)?;
    let sets = ens
        .eps
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let lifts = ens.paths[e].iter().map(|r| RoughPathLift::canonical(ens.grid, r)).collect::<Result<Vec<_>, _>>()?;
            Ok((eps, lifts))
        })
        .collect::<Result<Vec<_>, slowfast::error::Error>>()?;
    let rep = tightness_diagnostic(&sets, c.holder_p, c.holder_gamma, c.pair, &c.lag_steps)?;
    let mut checks = Vec::new();
    let mut norms = Table::new("level2_norms", &["eps", "lag", "norm"]);
    let mut exps = Table::new("exponents", &["eps", "level2_exponent", "level1_exponent", "holder_moment", "holder_moment_se"]);
    let mut ordered: Vec<_> = rep.levels.iter().collect();
    ordered.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    for l in &ordered {
        for (h, v) in l.lags.iter().zip(&l.level2_norms) {
            norms.push(row![l.eps, *h, *v]);
        }
        exps.push(row![l.eps, l.level2_exponent, l.level1_exponent, l.holder_moment.value, l.holder_moment.se]);
        checks.push(Check::abs(&format!("level2_exponent_eps{}", l.eps), l.level2_exponent, c.expected_exponent, c.tolerance));
    }
    let series: Vec<f64> = ordered.iter().map(|l| l.level2_exponent).collect();
    let trend = stats::mann_kendall(&series);
    checks.push(Check::flag("no_exponent_trend", trend.p_value >= c.trend_level));
    Ok(Outcome {
        checks,
        tables: vec![norms, exps],
        details: json!({ "exponent_trend": trend, "holder_trend": rep.trend, "holder_bounded": rep.bounded }),
    })
}

/// All tuples of at least two positive degrees with total at most `max`.
fn degree_tuples(max: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() >= 2 {
            out.push(prefix.clone());
        }
        for k in 1..=left {
            prefix.push(k);
            go(prefix, left - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), max, &mut out);
    out
}

fn diagram(c: &DiagramConfig, seed: u64) -> Res {
    let tuples = degree_tuples(c.max_total_degree);
    let mut table = Table::new("diagram_vs_mc", &["degrees", "config", "formula", "mc", "se", "z", "pairings", "bound"]);
    let rows = par::map_indexed(tuples.len() * c.configurations, |job| -> Result<_, CliError> {
        let (ti, cfg) = (job / c.configurations, job % c.configurations);
        let deg = &tuples[ti];
        let n = deg.len();
        let mut r = rng::substream(rng::derive_seed(seed, ti as u64), cfg as u64);
        // random unit vectors; their Gram matrix is the correlation
        let vecs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v = rng::normals(&mut r, n);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();
        let cov = |l: usize, q: usize| vecs[l].iter().zip(&vecs[q]).map(|(a, b)| a * b).sum::<f64>();
        let formula = product_expectation_cov(deg, cov)?;
        // importance sampling from N(0, σ²I): plain Monte Carlo SEs are
        // unreliable for high-degree products, whose variance sits in the tails
        let (s2, sd) = (c.proposal_variance, c.proposal_variance.sqrt());
        let samples: Vec<f64> = (0..c.samples)
            .map(|_| {
                let z: Vec<f64> = rng::normals(&mut r, n).into_iter().map(|x| x * sd).collect();
                let r2: f64 = z.iter().map(|x| x * x).sum();
                let w = sd.powi(n as i32) * (-0.5 * r2 * (1.0 - 1.0 / s2)).exp();
                w * vecs.iter().zip(deg).map(|(v, &k)| hermite_poly(k, v.iter().zip(&z).map(|(a, b)| a * b).sum())).product::<f64>()
            })
            .collect();
        let mc = stats::mean_estimate(&samples);
        let e = enumerate_pairings(deg)?;
        let bound = count_bound(deg)?;
        Ok((ti, cfg, formula, mc, e.total, bound))
    });
    let mut worst_z: f64 = 0.0;
    let mut bound_ok = true;
    for res in rows {
        let (ti, cfg, formula, mc, total, bound) = res?;
        let z = mc.z_score(formula);
        worst_z = worst_z.max(z);
        // the bound is attained by two equal nodes; allow for rounding in √(k!)²
        bound_ok &= total as f64 <= bound * (1.0 + 1e-12);
        let label = tuples[ti].iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
        table.push(row![label.as_str(), cfg, formula, mc.value, mc.se, z, total as usize, bound]);
    }
    let mut two_node = true;
    for m in 1..=8usize {
        for &rho in &[-0.9, -0.3, 0.2, 0.55, 0.97] {
            let corr = |d: f64| if d == 0.0 { 1.0 } else { rho };
            let v = product_expectation(&[m, m], &[0.0, 1.0], corr)?;
            two_node &= v == factorial(m) * rho.powi(m as i32);
        }
    }
    Ok(Outcome {
        checks: vec![
            Check::at_most("formula_vs_mc_max_z", worst_z, c.n_se),
            Check::flag("pairings_within_bound", bound_ok),
            Check::flag("two_node_exact", two_node),
        ],
        tables: vec![table],
        details: json!({ "tuples": tuples.len(), "configurations": c.configurations, "samples": c.samples }),
    })
}

fn martingale(c: &MartingaleConfig, seed: u64) -> Res {
    let mut checks = Vec::new();
    let mut dec = Table::new("decomposition", &["offset", "a", "b", "a2_plus_b2_minus_1"]);
    let mut a_vals = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in &c.offsets {
        let d = bar_variance(c.hurst, 0.0, t)?;
        let unit = d.a * d.a + d.b * d.b - 1.0;
        worst = worst.max(unit.abs());
        dec.push(row![t, d.a, d.b, unit]);
        a_vals.push((t, d.a, d.b));
    }
    checks.push(Check::at_most("unit_circle_max_defect", worst, c.unit_tolerance));
    let ts: Vec<f64> = a_vals.iter().map(|v| v.0).collect();
    let a_only: Vec<f64> = a_vals.iter().map(|v| v.1).collect();
    let fit = stats::log_log_slope(&ts, &a_only);
    checks.push(Check::abs("a_decay_slope", fit.slope, c.hurst - 1.0, c.slope_tolerance));

    let mut cond = Table::new("conditional_hermite", &["m", "a", "xbar", "closed_form", "mc", "se", "relative_error"]);
    let mc: Vec<(f64, f64)> = c
        .mc_offsets
        .iter()
        .map(|&t| bar_variance(c.hurst, 0.0, t).map(|d| (d.a, d.b)))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize, usize)> = (1..=c.max_rank)
        .flat_map(|m| (0..mc.len()).flat_map(move |ai| (0..c.points.len()).map(move |pi| (m, ai, pi))))
        .collect();
    let results = par::map_indexed(jobs.len(), |j| {
        let (m, ai, pi) = jobs[j];
        let (a, b) = mc[ai];
        let u = c.points[pi];
        let mut r = rng::substream(seed, j as u64);
        let s: Vec<f64> = (0..c.samples).map(|_| hermite_poly(m, a * u + b * rng::normal(&mut r))).collect();
        (m, a, a * u, stats::mean_estimate(&s))
    });
    let mut worst_rel: f64 = 0.0;
    for (m, a, xbar, mc) in results {
        let exact = conditional_hermite(m, a, xbar)?;
        let rel = (mc.value - exact).abs() / exact.abs();
        worst_rel = worst_rel.max(rel);
        cond.push(row![m, a, xbar, exact, mc.value, mc.se, rel]);
    }
    checks.push(Check::at_most("conditional_hermite_max_relative_error", worst_rel, c.relative_tolerance));
    Ok(Outcome { checks, tables: vec![dec, cond], details: json!({ "a_slope": fit.slope, "a_slope_se": fit.slope_se }) })
}

fn area(c: &AreaConfig, seed: u64) -> Res {
    let u = centred_expansions(std::slice::from_ref(&c.u))?.remove(0);
    let v = centred_expansions(std::slice::from_ref(&c.v))?.remove(0);
    let rep = area_decomposition_check(&u, &v, c.hurst, &c.eps, c.t, c.realizations, seed, ModelConfig::default())?;
    let mut levels = Table::new("area_levels", &["eps", "median_abs_residual", "relative_to_t_gamma"]);
    let mut residuals = Table::new("area_residuals", &["eps", "realization", "residual"]);
    let mut ordered: Vec<_> = rep.levels.iter().collect();
    ordered.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    for l in &ordered {
        levels.push(row![l.eps, l.median_abs, l.relative]);
        for (i, r) in l.residuals.iter().enumerate() {
            residuals.push(row![l.eps, i, *r]);
        }
    }
    let last = ordered.last().expect("at least one ε");
    Ok(Outcome {
        checks: vec![Check::flag("median_decreasing", rep.decreasing), Check::at_most("final_relative_residual", last.relative, c.relative_tolerance)],
        tables: vec![levels, residuals],
        details: json!({ "gamma": rep.gamma, "horizon_cells": rep.horizon, "t": rep.t }),
    })
}

/// The two-field test system of the solver checks.
pub fn test_system() -> VectorFieldFamily {
    VectorFieldFamily::new(2)
        .push(|x, o| {
            o[0] = x[1].sin() + 1.0;
            o[1] = 0.5 * x[0];
        })
        .push(|x, o| {
            o[0] = 0.3 * x[1];
            o[1] = x[0].cos();
        })
}

fn rde(c: &RdeConfig, seed: u64) -> Res {
    let mut checks = Vec::new();
    let fam = test_system();
    let x0 = [0.1, -0.2];

    // smooth driver (t, sin t): second-order step against RK4 on a 16x finer grid
    let grid = TimeGrid::over(1.0, c.smooth_steps)?;
    let ts = grid.times();
    let lift = RoughPathLift::canonical(grid, &[ts.clone(), ts.iter().map(|t| t.sin()).collect()])?;
    let davie = solve_rde(&lift, &fam, &x0, true)?;
    let fine = TimeGrid::over(1.0, 16 * c.smooth_steps)?;
    let forcing: Vec<Vec<f64>> = fine.times().iter().map(|t| vec![1.0, t.cos()]).collect();
    let reference = rk4_forced(&fam, &forcing, fine, &x0, 1)?;
    let smooth_err = (0..grid.len())
        .map(|i| davie.trajectory[i].iter().zip(&reference[16 * i]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("smooth_driver_max_error", smooth_err, c.smooth_tolerance));

    // dx = x ∘ dW: x_1 = exp(W_1)
    let lin = VectorFieldFamily::from_presets(1, &[FieldPreset::Linear { scale: 1.0 }])?;
    let lgrid = TimeGrid::over(1.0, c.lognormal_steps)?;
    let sub = rng::derive_seed(seed, 1);
    let ends = par::map_indexed(c.lognormal_paths, |r| -> Result<f64, slowfast::error::Error> {
        let w = sample_wiener_values(&lgrid, &mut rng::substream(sub, r as u64));
        let l = RoughPathLift::wiener(lgrid, &[w], Flavor::Stratonovich)?;
        Ok(solve_rde(&l, &lin, &[1.0], false)?.endpoint()[0])
    });
    let ends = ends.into_iter().collect::<Result<Vec<_>, _>>()?;
    let ks_log = stats::ks_one_sample(&ends, |x| if x <= 0.0 { 0.0 } else { stats::normal_cdf(x.ln()) });
    checks.push(Check::at_most("lognormal_ks", ks_log, c.ks_tolerance));

    // Itô lift plus (t-s)A against the Heun solver on the same Wiener drivers
    let gs = centred_expansions(&c.effective_observables)?;
    let drift = drift_matrix(&gs, c.effective_hurst, gs.len())?;
    if gs.len() != fam.len() {
        return Err(CliError::Config(format!("the solver test system takes {} observables", fam.len())));
    }
    let egrid = TimeGrid::over(1.0, c.effective_steps)?;
    let sampler = LimitDriverSampler::new(&drift, Vec::new(), egrid)?;
    let a = drift.a.clone();
    let sub = rng::derive_seed(seed, 2);
    let runs = par::map_indexed(c.effective_paths, |r| -> Result<_, slowfast::error::Error> {
        let d = sampler.sample(sub, r as u64);
        let ito = RoughPathLift::wiener(egrid, &d.paths, Flavor::Ito)?;
        let eff = solve_rde(&ito.with_area(a.clone())?, &fam, &x0, false)?.endpoint().to_vec();
        let bare = solve_rde(&ito, &fam, &x0, false)?.endpoint().to_vec();
        let classical = solve_limit_classical(&fam, &d, &x0, YoungStep::Heun)?.endpoint().to_vec();
        Ok((eff, bare, classical))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut ks_table = Table::new("effective_vs_classical", &["coordinate", "ks_effective", "ks_without_area"]);
    for i in 0..fam.d {
        let col = |f: &dyn Fn(&(Vec<f64>, Vec<f64>, Vec<f64>)) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
        let (eff, bare, cl) = (col(&|r| r.0[i]), col(&|r| r.1[i]), col(&|r| r.2[i]));
        let ks = stats::ks_two_sample(&eff, &cl);
        ks_table.push(row![i, ks, stats::ks_two_sample(&bare, &cl)]);
        checks.push(Check::at_most(&format!("effective_vs_classical_ks_x{i}"), ks, c.ks_tolerance));
    }
    Ok(Outcome {
        checks,
        tables: vec![ks_table],
        details: json!({ "smooth_error_estimate": davie.error_estimate, "drift": drift }),
    })
}

fn homogenize(c: &HomogenizeConfig, seed: u64) -> Res {
    let gs = centred_expansions(&c.observables)?;
    let presets = c.fields.iter().map(|f| parse_field(f)).collect::<Result<Vec<_>, _>>()?;
    let fam = VectorFieldFamily::from_presets(c.x0.len(), &presets)?;
    let params = HomogenisationParams {
        hurst: c.hurst,
        x0: c.x0.clone(),
        eps: c.eps.clone(),
        horizon: c.horizon,
        paths: c.paths,
        limit_paths: c.limit_paths,
        limit_steps: c.limit_steps,
        resolution: c.resolution,
        seed,
        p: c.p,
        q: c.q,
        young: c.young,
    };
    let rep = homogenisation_experiment(&fam, &gs, &params)?;
    let mut table = Table::new("ks_vs_eps", &["eps", "coordinate", "ks", "energy_distance"]);
    let mut ordered: Vec<_> = rep.levels.iter().collect();
    ordered.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    for l in &ordered {
        for (i, ks) in l.ks.iter().enumerate() {
            table.push(row![l.eps, i, *ks, l.energy]);
        }
    }
    let mut checks = Vec::new();
    for (i, (&dec, &ks)) in rep.decreasing.iter().zip(&rep.final_ks).enumerate() {
        checks.push(Check::flag(&format!("ks_strictly_decreasing_x{i}"), dec));
        checks.push(Check::at_most(&format!("final_ks_x{i}"), ks, c.ks_tolerance));
    }
    let sequences: Vec<Vec<f64>> = (0..rep.final_ks.len()).map(|i| ordered.iter().map(|l| l.ks[i]).collect()).collect();
    let eps: Vec<f64> = ordered.iter().map(|l| l.eps).collect();
    let details = json!({ "eps": eps, "ks": sequences, "monotone": rep.decreasing, "drift": rep.drift, "wiener_block": rep.n });
    Ok(Outcome { checks, tables: vec![table], details })
}
