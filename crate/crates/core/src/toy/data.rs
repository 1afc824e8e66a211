use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hexagon::{HexagonSpec, Quadrant};
use crate::error::{Error, Result};
use crate::rng::{self, streams, StreamRng};
use crate::theory::{factorize, joint_importance, DiscreteJoint};

/// Number of source points per quadrant, in [`Quadrant::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub counts: [usize; 4],
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            counts: [1000, 1000, 125, 500],
        }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.counts.contains(&0) {
            return Err(Error::Config("every quadrant needs at least one source point".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Source => "source",
            Self::Target => "target",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "source" => Ok(Self::Source),
            "target" => Ok(Self::Target),
            other => Err(format!("unknown domain {other:?}")),
        }
    }
}

/// A (wealth, health) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: f64,
    pub y: f64,
}

impl LabeledSample {
    pub fn quadrant(&self) -> Quadrant {
        Quadrant::of(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub domain: Domain,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn quadrant_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for s in &self.samples {
            c[s.quadrant().index()] += 1;
        }
        c
    }
}

/// Uniform draw from a convex polygon by rejection from its bounding box.
fn draw_uniform(poly: &[[f64; 2]], accept: impl Fn(f64, f64) -> bool, rng: &mut StreamRng) -> LabeledSample {
    let (x0, x1, y0, y1) = HexagonSpec::bounding_box(poly);
    loop {
        let x = rng.random_range(x0..=x1);
        let y = rng.random_range(y0..=y1);
        if accept(x, y) {
            return LabeledSample { x, y };
        }
    }
}

/// `n` i.i.d. uniform points over the hexagon.
pub fn sample_target(spec: &HexagonSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("target sample size must be positive".into()));
    }
    Ok(Dataset {
        samples: sample_uniform(spec, n, &mut rng::stream(seed, streams::TARGET)),
        domain: Domain::Target,
        seed,
    })
}

/// Uniform points over the hexagon from a caller-owned stream.
pub fn sample_uniform(spec: &HexagonSpec, n: usize, rng: &mut StreamRng) -> Vec<LabeledSample> {
    (0..n)
        .map(|_| draw_uniform(&spec.vertices, |x, y| spec.contains(x, y), rng))
        .collect()
}

/// Per-quadrant uniform points, concatenated in quadrant order then shuffled.
pub fn sample_source(spec: &HexagonSpec, counts: &SourceSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    counts.validate()?;
    let mut rng = rng::stream(seed, streams::SOURCE);
    let mut samples = Vec::with_capacity(counts.total());
    for q in Quadrant::ALL {
        let poly = spec.quadrant_polygon(q);
        for _ in 0..counts.counts[q.index()] {
            samples.push(draw_uniform(&poly, |x, y| spec.contains(x, y) && Quadrant::of(x, y) == q, &mut rng));
        }
    }
    samples.shuffle(&mut rng);
    Ok(Dataset {
        samples,
        domain: Domain::Source,
        seed,
    })
}

/// Exact piecewise-constant joint importance of the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFactors {
    pub u_rich: f64,
    pub u_poor: f64,
    pub v_healthy: f64,
    pub v_unhealthy: f64,
    /// In [`Quadrant::ALL`] order.
    pub w_per_quadrant: [f64; 4],
}

impl GroundTruthFactors {
    pub fn u(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.u_rich
        } else {
            self.u_poor
        }
    }

    pub fn v(&self, y: f64) -> f64 {
        if y >= 0.0 {
            self.v_healthy
        } else {
            self.v_unhealthy
        }
    }

    pub fn w(&self, x: f64, y: f64) -> f64 {
        self.w_per_quadrant[Quadrant::of(x, y).index()]
    }
}

/// The 2x2 (wealth x health) source and target quadrant-mass tables.
pub fn quadrant_tables(spec: &HexagonSpec, counts: &SourceSpec) -> Result<(DiscreteJoint, DiscreteJoint)> {
    let source_masses: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    let source = DiscreteJoint::from_masses(2, 2, &source_masses)?;
    let target = DiscreteJoint::from_masses(2, 2, &spec.quadrant_areas())?;
    Ok((source, target))
}

/// Per-quadrant importance `c * area / count`, with `c` fixed by source mass
/// balance, reported in the gauge `u_rich * u_poor = 1`.
pub fn ground_truth_importance(spec: &HexagonSpec, counts: &SourceSpec) -> Result<GroundTruthFactors> {
    spec.validate()?;
    counts.validate()?;
    let (source, target) = quadrant_tables(spec, counts)?;
    let table = joint_importance(&source, &target)?;
    let factors = factorize(&table)?;
    let k = 1.0 / (factors.u[0] * factors.u[1]).sqrt();
    let w_per_quadrant = Quadrant::ALL.map(|q| table.get(q.wealth_row(), q.health_col()).expect("full support"));
    Ok(GroundTruthFactors {
        u_rich: factors.u[0] * k,
        u_poor: factors.u[1] * k,
        v_healthy: factors.v[0] / k,
        v_unhealthy: factors.v[1] / k,
        w_per_quadrant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn default_ground_truth() {
        let g = ground_truth_importance(&HexagonSpec::default(), &SourceSpec::default()).unwrap();
        for (got, want) in g.w_per_quadrant.iter().zip([0.875, 0.4375, 3.5, 1.75]) {
            assert!(close(*got, want, 1e-12));
        }
        assert!(close(g.u_rich, 0.5, 1e-12) && close(g.u_poor, 2.0, 1e-12));
        assert!(close(g.v_healthy, 1.75, 1e-12) && close(g.v_unhealthy, 0.875, 1e-12));
        for q in Quadrant::ALL {
            let u = [g.u_rich, g.u_poor][q.wealth_row()];
            let v = [g.v_healthy, g.v_unhealthy][q.health_col()];
            assert!(close(u * v, g.w_per_quadrant[q.index()], 1e-12));
        }
        // c = 875: source mass balance with areas (1, .5, .5, 1).
        let balance: f64 = SourceSpec::default()
            .counts
            .iter()
            .zip(g.w_per_quadrant)
            .map(|(&n, w)| n as f64 / 2625.0 * w)
            .sum();
        assert!(close(balance, 1.0, 1e-12));
    }

    #[test]
    fn equal_counts_break_factorization() {
        // With equal counts the importance is proportional to area (1, .5, .5, 1), which is not rank 1.
        let r = ground_truth_importance(&HexagonSpec::default(), &SourceSpec { counts: [7; 4] });
        assert!(matches!(r, Err(Error::NotFactorizable)));
    }

    #[test]
    fn source_counts_and_membership() {
        let spec = HexagonSpec::default();
        let ds = sample_source(&spec, &SourceSpec::default(), 3).unwrap();
        assert_eq!(ds.len(), 2625);
        assert_eq!(ds.quadrant_counts(), [1000, 1000, 125, 500]);
        assert!(ds.samples.iter().all(|s| spec.contains(s.x, s.y)));
        let one = sample_source(&spec, &SourceSpec { counts: [1; 4] }, 0).unwrap();
        assert_eq!(one.quadrant_counts(), [1; 4]);
    }

    #[test]
    fn source_is_shuffled() {
        let ds = sample_source(&HexagonSpec::default(), &SourceSpec::default(), 0).unwrap();
        let first: Vec<_> = ds.samples[..50].iter().map(|s| s.quadrant()).collect();
        assert!(first.iter().any(|q| *q != first[0]));
    }

    #[test]
    fn target_quadrant_masses() {
        let spec = HexagonSpec::default();
        let n = 3000;
        let ds = sample_target(&spec, n, 5).unwrap();
        assert!(ds.samples.iter().all(|s| spec.contains(s.x, s.y)));
        for (c, p) in ds.quadrant_counts().iter().zip([1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = HexagonSpec::default();
        assert_eq!(sample_target(&spec, 100, 9).unwrap(), sample_target(&spec, 100, 9).unwrap());
        assert_ne!(sample_target(&spec, 100, 9).unwrap(), sample_target(&spec, 100, 10).unwrap());
        assert_eq!(sample_target(&spec, 1, 0).unwrap().len(), 1);
        assert!(sample_target(&spec, 0, 0).is_err());
    }
}
