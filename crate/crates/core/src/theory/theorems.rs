//! Randomised checks of the determinacy theorems on finite domains.
//!
//! Each trial draws an instance satisfying the premises, then decides the
//! conclusion with the exhaustive partition search. Negative controls drop one
//! premise and count how often the conclusion breaks.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assumptions::{check_assumption, Assumption};
use super::joint::DiscreteJoint;
use crate::error::{Error, Result};
use crate::rng::{self, streams, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub trials: usize,
    /// Instances where the conclusion did not hold.
    pub failures: usize,
    pub seed: u64,
    pub elapsed_ms: u64,
}

/// Size range of random instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSizes {
    pub max_nx: usize,
    pub max_ny: usize,
}

impl Default for TrialSizes {
    fn default() -> Self {
        Self { max_nx: 6, max_ny: 4 }
    }
}

impl TrialSizes {
    pub const POINT: TrialSizes = TrialSizes { max_nx: 1, max_ny: 1 };
}

/// Entries below this are zeroed by sparsifying simplex draws.
pub const SPARSITY_THRESHOLD: f64 = 1e-3;

/// Symmetric Dirichlet draw; with `sparsify`, entries under
/// [`SPARSITY_THRESHOLD`] are zeroed (at least one entry always survives).
pub fn random_simplex(n: usize, concentration: f64, sparsify: bool, rng: &mut StreamRng) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    if sparsify {
        let keep = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        for (i, x) in v.iter_mut().enumerate() {
            if i != keep && *x < SPARSITY_THRESHOLD {
                *x = 0.0;
            }
        }
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

fn positive_factor(n: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5f64..1.5).exp()).collect()
}

/// A source with a deterministic labeling `f`, plus `f` itself.
fn deterministic_source(sizes: TrialSizes, rng: &mut StreamRng) -> (usize, usize, Vec<usize>, Vec<f64>) {
    let nx = rng.random_range(1..=sizes.max_nx);
    let ny = rng.random_range(1..=sizes.max_ny);
    let labels: Vec<usize> = (0..nx).map(|_| rng.random_range(0..ny)).collect();
    let px = random_simplex(nx, 0.5, true, rng);
    (nx, ny, labels, px)
}

fn table_from_labels(nx: usize, ny: usize, labels: &[usize], px: &[f64]) -> Result<DiscreteJoint> {
    let mut m = vec![0.0; nx * ny];
    for x in 0..nx {
        m[x * ny + labels[x]] = px[x];
    }
    DiscreteJoint::from_masses(nx, ny, &m)
}

/// Premises of the first theorem: deterministic labels, covariate shift and
/// matched label marginals. With `matched_labels = false` the target's data
/// marginal is drawn freely on the source support instead.
fn theorem1_instance(
    sizes: TrialSizes,
    matched_labels: bool,
    rng: &mut StreamRng,
) -> Result<(DiscreteJoint, DiscreteJoint)> {
    let (nx, ny, labels, px) = deterministic_source(sizes, rng);
    let source = table_from_labels(nx, ny, &labels, &px)?;
    let support: Vec<usize> = (0..nx).filter(|&x| px[x] > 0.0).collect();
    let mut qx = vec![0.0; nx];
    if matched_labels {
        // Redistribute each label's mass among the x carrying that label.
        for y in 0..ny {
            let members: Vec<usize> = support.iter().copied().filter(|&x| labels[x] == y).collect();
            let mass: f64 = members.iter().map(|&x| px[x]).sum();
            if members.is_empty() {
                continue;
            }
            let split = random_simplex(members.len(), 1.0, false, rng);
            for (&x, s) in members.iter().zip(split) {
                qx[x] = mass * s;
            }
        }
    } else {
        let draw = random_simplex(support.len(), 1.0, false, rng);
        for (&x, s) in support.iter().zip(draw) {
            qx[x] = s;
        }
    }
    let target = table_from_labels(nx, ny, &labels, &qx)?;
    Ok((source, target))
}

/// Premises of the second theorem: deterministic labels and a factorizable
/// joint shift. Without determinism the source joint is a dense random table.
fn theorem2_instance(
    sizes: TrialSizes,
    deterministic: bool,
    rng: &mut StreamRng,
) -> Result<(DiscreteJoint, DiscreteJoint)> {
    let source = if deterministic {
        let (nx, ny, labels, px) = deterministic_source(sizes, rng);
        table_from_labels(nx, ny, &labels, &px)?
    } else {
        let nx = rng.random_range(2..=sizes.max_nx.max(2));
        let ny = rng.random_range(2..=sizes.max_ny.max(2));
        DiscreteJoint::new(nx, ny, random_simplex(nx * ny, 1.0, false, rng))?
    };
    let u = positive_factor(source.nx(), rng);
    let v = positive_factor(source.ny(), rng);
    let target = shift_by_factors(&source, &u, &v)?;
    Ok((source, target))
}

/// Target table `source(x, y) u(x) v(y)`, renormalised.
pub fn shift_by_factors(source: &DiscreteJoint, u: &[f64], v: &[f64]) -> Result<DiscreteJoint> {
    let (nx, ny) = (source.nx(), source.ny());
    let m: Vec<f64> = (0..nx * ny).map(|i| source.probs()[i] * u[i / ny] * v[i % ny]).collect();
    DiscreteJoint::from_masses(nx, ny, &m)
}

type Instance = (DiscreteJoint, DiscreteJoint);

fn run_trials(
    trials: usize,
    seed: u64,
    conclusion: Assumption,
    generate: impl Fn(&mut StreamRng) -> Result<Instance> + Sync,
) -> Result<(TheoremReport, Vec<(usize, Instance)>)> {
    let started = Instant::now();
    let outcomes: Vec<Result<Option<(usize, Instance)>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(rng::derive_seed(seed, streams::TRIAL), t as u64);
            let (s, q) = generate(&mut rng)?;
            Ok((!check_assumption(&s, &q, conclusion)?).then_some((t, (s, q))))
        })
        .collect();
    let mut violations = Vec::new();
    for o in outcomes {
        if let Some(v) = o? {
            violations.push(v);
        }
    }
    let report = TheoremReport {
        trials,
        failures: violations.len(),
        seed,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    Ok((report, violations))
}

fn require_clean(result: (TheoremReport, Vec<(usize, Instance)>)) -> Result<TheoremReport> {
    let (report, violations) = result;
    match violations.into_iter().next() {
        None => Ok(report),
        Some((trial, (source, target))) => Err(Error::CounterexampleFound {
            trial,
            source_table: Box::new(source),
            target_table: Box::new(target),
        }),
    }
}

fn require_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    Ok(())
}

/// Determinacy + matched labels + covariate shift implies domain invariance.
pub fn verify_theorem_1(trials: usize, seed: u64) -> Result<TheoremReport> {
    verify_theorem_1_sized(trials, seed, TrialSizes::default())
}

pub fn verify_theorem_1_sized(trials: usize, seed: u64, sizes: TrialSizes) -> Result<TheoremReport> {
    require_trials(trials)?;
    require_clean(run_trials(trials, seed, Assumption::Di, |rng| {
        theorem1_instance(sizes, true, rng)
    })?)
}

/// Same generator with label marginals left unmatched; `failures` counts
/// instances where domain invariance does not hold.
pub fn negative_control_theorem_1(trials: usize, seed: u64) -> Result<TheoremReport> {
    require_trials(trials)?;
    Ok(run_trials(trials, seed, Assumption::Di, |rng| {
        theorem1_instance(TrialSizes::default(), false, rng)
    })?
    .0)
}

/// Determinacy + factorizable joint shift implies generalized label shift.
pub fn verify_theorem_2(trials: usize, seed: u64) -> Result<TheoremReport> {
    verify_theorem_2_sized(trials, seed, TrialSizes::default())
}

pub fn verify_theorem_2_sized(trials: usize, seed: u64, sizes: TrialSizes) -> Result<TheoremReport> {
    require_trials(trials)?;
    require_clean(run_trials(trials, seed, Assumption::Gls, |rng| {
        theorem2_instance(sizes, true, rng)
    })?)
}

/// Factorizable shift on dense, non-deterministic tables; `failures` counts
/// instances outside generalized label shift.
pub fn negative_control_theorem_2(trials: usize, seed: u64) -> Result<TheoremReport> {
    require_trials(trials)?;
    Ok(run_trials(trials, seed, Assumption::Gls, |rng| {
        theorem2_instance(TrialSizes::default(), false, rng)
    })?
    .0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_draws_are_normalised() {
        let mut rng = rng::seeded(3);
        for sparsify in [false, true] {
            for n in 1..8 {
                let v = random_simplex(n, 0.5, sparsify, &mut rng);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(v.iter().any(|x| *x > 0.0));
            }
        }
    }

    #[test]
    fn degenerate_point_domain_passes() {
        let r = verify_theorem_1_sized(1, 0, TrialSizes::POINT).unwrap();
        assert_eq!((r.trials, r.failures), (1, 0));
        let r = verify_theorem_2_sized(1, 0, TrialSizes::POINT).unwrap();
        assert_eq!((r.trials, r.failures), (1, 0));
    }

    #[test]
    fn unit_factors_leave_source_unchanged() {
        let s = DiscreteJoint::from_rows(&[vec![0.4, 0.0], vec![0.0, 0.6]]).unwrap();
        let t = shift_by_factors(&s, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(s, t);
        assert!(check_assumption(&s, &t, Assumption::Gls).unwrap());
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(verify_theorem_1(0, 0).is_err());
        assert!(negative_control_theorem_2(0, 0).is_err());
    }

    #[test]
    fn small_suites_are_clean() {
        assert_eq!(verify_theorem_1(50, 11).unwrap().failures, 0);
        assert_eq!(verify_theorem_2(50, 11).unwrap().failures, 0);
    }
}
