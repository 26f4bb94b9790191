//! SVG figures drawn from the CSVs listed in a run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::{CliError, RunManifest};

/// A CSV written by [`crate::output::Table`]: header plus string cells.
struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().split(',').map(String::from).collect();
        let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(String::from).collect()).collect();
        Ok(Csv { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize, CliError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| CliError::Io(format!("column {name} missing")))
    }

    fn num(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col].parse().unwrap_or(f64::NAN)
    }

    /// `(key, x, y)` triples grouped by the `key` column.
    fn series(&self, key: &str, x: &str, y: &str) -> Result<BTreeMap<String, Vec<(f64, f64)>>, CliError> {
        let (k, xi, yi) = (self.col(key)?, self.col(x)?, self.col(y)?);
        let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for r in 0..self.rows.len() {
            out.entry(self.rows[r][k].clone()).or_default().push((self.num(r, xi), self.num(r, yi)));
        }
        Ok(out)
    }
}

fn draw_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(format!("plot: {e}"))
}

fn range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && (!log || *v > 0.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return if log { (0.1, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        (lo / 1.5, hi * 1.5)
    } else {
        let pad = 0.05 * (hi - lo).max(1e-12);
        (lo - pad, hi + pad)
    }
}

/// Line plot of several named series, optionally on log-log axes.
fn lines(path: &Path, title: &str, xl: &str, yl: &str, series: &BTreeMap<String, Vec<(f64, f64)>>, log: bool) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let xr = range(series.values().flatten().map(|p| p.0), log);
    let yr = range(series.values().flatten().map(|p| p.1), log);
    let mut b = ChartBuilder::on(&root);
    b.caption(title, ("sans-serif", 20)).margin(12).x_label_area_size(40).y_label_area_size(60);
    macro_rules! body {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc(xl).y_desc(yl).draw().map_err(draw_err)?;
            for (i, (name, pts)) in series.iter().enumerate() {
                let colour = Palette99::pick(i).to_rgba();
                let mut pts = pts.clone();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                chart
                    .draw_series(LineSeries::new(pts.iter().copied(), colour.stroke_width(2)))
                    .map_err(draw_err)?
                    .label(name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], colour));
                chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, colour.filled()))).map_err(draw_err)?;
            }
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(draw_err)?;
        }};
    }
    if log {
        body!(b.build_cartesian_2d((xr.0..xr.1).log_scale(), (yr.0..yr.1).log_scale()).map_err(draw_err)?);
    } else {
        body!(b.build_cartesian_2d(xr.0..xr.1, yr.0..yr.1).map_err(draw_err)?);
    }
    root.present().map_err(draw_err)
}

/// Heatmap of `value` over the `(x, y)` cells of one group.
fn heatmap(path: &Path, title: &str, cells: &[(f64, f64, f64)]) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (560, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut xs: Vec<f64> = cells.iter().map(|c| c.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let n = xs.len().max(1);
    let pos = |v: f64| xs.iter().position(|&x| x == v).unwrap_or(0);
    let (lo, hi) = range(cells.iter().map(|c| c.2), false);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(30)
        .y_label_area_size(30)
        .build_cartesian_2d(0..n, 0..n)
        .map_err(draw_err)?;
    chart.configure_mesh().disable_mesh().draw().map_err(draw_err)?;
    let shade = |v: f64| {
        let u = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        HSLColor(0.66 * (1.0 - u), 0.7, 0.5)
    };
    let mut rects = Vec::new();
    for &(x, y, v) in cells {
        let (i, j) = (pos(x), pos(y));
        rects.push(Rectangle::new([(i, j), (i + 1, j + 1)], shade(v).filled()));
        if i != j {
            rects.push(Rectangle::new([(j, i), (j + 1, i + 1)], shade(v).filled()));
        }
    }
    chart.draw_series(rects).map_err(draw_err)?;
    root.present().map_err(draw_err)
}

/// Each check's value over its bound (or target), so 1 marks the threshold.
fn checks_chart(path: &Path, title: &str, manifest: &RunManifest) -> Result<(), CliError> {
    let summary: crate::output::Summary = serde_json::from_str(&std::fs::read_to_string(path.with_file_name("summary.json"))?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let vals: Vec<f64> = summary
        .checks
        .iter()
        .map(|c| {
            let scale = if c.tolerance > 0.0 { c.tolerance } else { c.target.abs().max(1e-300) };
            let dev = if c.tolerance > 0.0 { (c.value - c.target).abs() } else { c.value.abs() };
            dev / scale
        })
        .collect();
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let top = vals.iter().copied().filter(|v| v.is_finite()).fold(1.2, f64::max) * 1.1;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{title} ({})", manifest.kind), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0..vals.len().max(1), 0.0..top)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("check").y_desc("deviation / threshold").draw().map_err(draw_err)?;
    chart
        .draw_series(vals.iter().zip(&summary.checks).enumerate().map(|(i, (&v, c))| {
            let colour = if c.passed { GREEN } else { RED };
            Rectangle::new([(i, 0.0), (i + 1, v.min(top))], colour.mix(0.6).filled())
        }))
        .map_err(draw_err)?;
    chart.draw_series(LineSeries::new([(0, 1.0), (vals.len().max(1), 1.0)], BLACK)).map_err(draw_err)?;
    root.present().map_err(draw_err)
}

/// Draws the figures for one manifest and returns their paths.
///
/// Fails without writing anything if the manifest is empty or an output it
/// lists is missing.
pub fn report(manifest_path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = RunManifest::load(manifest_path)?;
    if manifest.files.is_empty() {
        return Err(CliError::Io("manifest lists no outputs".into()));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    for f in &manifest.files {
        if !dir.join(&f.path).is_file() {
            return Err(CliError::Io(format!("missing output {}", f.path)));
        }
    }
    let csv = |name: &str| Csv::read(&dir.join(format!("{name}.csv")));
    let mut out = Vec::new();
    let mut emit = |name: String| {
        let p = dir.join(name);
        out.push(p.clone());
        p
    };
    match manifest.kind.as_str() {
        "homogenize" => {
            let t = csv("ks_vs_eps")?;
            let by_coord = t.series("coordinate", "eps", "ks")?;
            for (coord, pts) in by_coord {
                let s = BTreeMap::from([(format!("x{coord}"), pts)]);
                lines(&emit(format!("ks_vs_eps_x{coord}.svg")), &format!("KS distance at T, coordinate {coord}"), "eps", "KS", &s, true)?;
            }
        }
        "clt" => {
            let t = csv("covariance")?;
            let (e, i, j, tt, ss, emp, tgt) =
                (t.col("eps")?, t.col("i")?, t.col("j")?, t.col("t")?, t.col("s")?, t.col("empirical")?, t.col("target")?);
            let mut s: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in 0..t.rows.len() {
                let x = t.num(r, tt).min(t.num(r, ss));
                let key = format!("({},{}) eps={}", t.rows[r][i], t.rows[r][j], t.num(r, e));
                s.entry(format!("{key} empirical")).or_default().push((x, t.num(r, emp)));
                s.entry(format!("({},{}) limit", t.rows[r][i], t.rows[r][j])).or_default().push((x, t.num(r, tgt)));
            }
            for v in s.values_mut() {
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
            }
            lines(&emit("covariance.svg".into()), "Covariance against the limit", "t ∧ s", "covariance", &s, false)?;
        }
        "correlation" => {
            let t = csv("correlation")?;
            let (sc, rc, ac) = (t.col("s")?, t.col("rho")?, t.col("asymptote")?);
            let pts = |c: usize| (0..t.rows.len()).map(|r| (t.num(r, sc), t.num(r, c))).collect::<Vec<_>>();
            let s = BTreeMap::from([("rho".to_string(), pts(rc)), ("power-law tail".to_string(), pts(ac))]);
            lines(&emit("correlation.svg".into()), "Stationary fOU correlation", "s", "rho(s)", &s, true)?;
        }
        "tightness" => {
            let t = csv("level2_norms")?;
            let s = t.series("eps", "lag", "norm")?.into_iter().map(|(k, v)| (format!("eps={k}"), v)).collect();
            lines(&emit("level2_norms.svg".into()), "Second-level increment moments", "lag (steps)", "moment", &s, true)?;
        }
        "area" => {
            let t = csv("area_levels")?;
            let (e, m) = (t.col("eps")?, t.col("relative_to_t_gamma")?);
            let s = BTreeMap::from([("median |residual| / tγ".to_string(), (0..t.rows.len()).map(|r| (t.num(r, e), t.num(r, m))).collect())]);
            lines(&emit("area_residual.svg".into()), "Area decomposition residual", "eps", "relative residual", &s, true)?;
        }
        "noise" | "hermite" => {
            let (table, label) = if manifest.kind == "noise" { ("fbm_covariance", "fBM") } else { ("hermite_covariance", "Hermite") };
            let t = csv(table)?;
            let (h, tc, sc, ec) = (t.col("hurst")?, t.col("t")?, t.col("s")?, t.col("empirical")?);
            let mut groups: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
            for r in 0..t.rows.len() {
                groups.entry(t.rows[r][h].clone()).or_default().push((t.num(r, tc), t.num(r, sc), t.num(r, ec)));
            }
            for (k, (hv, cells)) in groups.iter().enumerate() {
                let hurst: f64 = hv.parse().unwrap_or(f64::NAN);
                heatmap(&emit(format!("covariance_heatmap_{k}.svg")), &format!("{label} empirical covariance, H = {hurst}"), cells)?;
            }
        }
        _ => {}
    }
    checks_chart(&emit("checks.svg".into()), &manifest.name, &manifest)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        std::fs::write(&p, "").unwrap();
        assert!(report(&p).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn ranges_pad_and_survive_empty_input() {
        assert_eq!(range(std::iter::empty(), true), (0.1, 1.0));
        let (lo, hi) = range([1.0, 3.0].into_iter(), false);
        assert!(lo < 1.0 && hi > 3.0);
    }
}
