use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::run::ExperimentOutput;
use crate::error::Result;
use crate::importance::FittedFactors;
use crate::nets::Predictor;
use crate::toy::{GroundTruthFactors, HexagonSpec, Quadrant, SourceSpec};

pub const CURVE_HEADER: &str = "x,mu,lo,hi,true_a,true_b";
pub const STATS_HEADER: &str = "quadrant,count,area,density";
pub const IMPORTANCE_HEADER: &str = "x,y,u,v,w,w_true";
pub const CURVE_POINTS: usize = 201;
pub const GRID_POINTS: usize = 101;

fn lattice(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Predicted band `mu -/+ sqrt(3) sigma` next to the true conditional support.
pub fn curve_csv(model: &dyn Predictor, hexagon: &HexagonSpec) -> Result<String> {
    let (lo, hi) = hexagon.x_range();
    let xs: Vec<f64> = lattice(lo, hi, CURVE_POINTS).collect();
    let half = 3f64.sqrt();
    let mut out = format!("{CURVE_HEADER}\n");
    for (x, p) in xs.iter().zip(model.predict_batch(&xs)) {
        let (a, b) = hexagon.conditional_slice(*x)?;
        let _ = writeln!(out, "{x},{},{},{},{a},{b}", p.mu, p.mu - half * p.sigma, p.mu + half * p.sigma);
    }
    Ok(out)
}

/// Source counts, target-domain areas and source densities per quadrant.
pub fn stats_csv(hexagon: &HexagonSpec, counts: &SourceSpec) -> String {
    let areas = hexagon.quadrant_areas();
    let mut out = format!("{STATS_HEADER}\n");
    for q in Quadrant::ALL {
        let (c, a) = (counts.counts[q.index()], areas[q.index()]);
        let _ = writeln!(out, "{},{c},{a},{}", q.label(), c as f64 / a);
    }
    out
}

/// `U`, `V`, their product and the exact importance on a square lattice over `[-1, 1]^2`.
pub fn importance_csv(factors: &FittedFactors, truth: &GroundTruthFactors) -> Result<String> {
    let axis: Vec<f64> = lattice(-1.0, 1.0, GRID_POINTS).collect();
    let u = factors.u.eval(&axis)?;
    let v = factors.v.eval(&axis)?;
    let mut out = format!("{IMPORTANCE_HEADER}\n");
    for (i, x) in axis.iter().enumerate() {
        for (j, y) in axis.iter().enumerate() {
            let _ = writeln!(out, "{x},{y},{},{},{},{}", u[i], v[j], u[i] * v[j], truth.w(*x, *y));
        }
    }
    Ok(out)
}

/// Writes `report.json`, `stats.csv`, one curve per method (first seed) and
/// one importance grid per fitted `K`. Returns the written paths in order.
pub fn emit_plots(output: &ExperimentOutput, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let truth = crate::toy::ground_truth_importance(&cfg.hexagon, &cfg.source_counts)?;
    let mut files: Vec<(PathBuf, String)> = vec![
        (dir.join("report.json"), output.report.to_json()?),
        (dir.join("stats.csv"), stats_csv(&cfg.hexagon, &cfg.source_counts)),
    ];
    for m in &cfg.methods {
        let label = m.label();
        if let Some(model) = output.first_model(&label) {
            files.push((dir.join(format!("curve_{label}.csv")), curve_csv(model, &cfg.hexagon)?));
        }
    }
    for f in &output.importance_fits {
        files.push((dir.join(format!("importance_{}.csv", f.u.k())), importance_csv(f, &truth)?));
    }
    for (path, body) in &files {
        fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_reproduce_configured_counts() {
        let text = stats_csv(&HexagonSpec::default(), &SourceSpec::default());
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        let counts: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
        assert_eq!(counts, vec![1000, 1000, 125, 500]);
        assert_eq!(text.lines().next(), Some(STATS_HEADER));
    }

    #[test]
    fn optimal_curve_tracks_half_x() {
        let hex = HexagonSpec::default();
        let text = curve_csv(&hex.optimal_predictor(), &hex).unwrap();
        assert_eq!(text.lines().count(), CURVE_POINTS + 1);
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert!((v[1] - v[0] / 2.0).abs() < 1e-12);
            assert!((v[2] - v[4]).abs() < 1e-9 && (v[3] - v[5]).abs() < 1e-9);
        }
    }
}
