use serde::{Deserialize, Serialize};

use super::joint::{factorize, joint_importance, DiscreteJoint, FeatureMap, PROB_TOL};
use crate::error::{Error, Result};

/// Largest `|X|` for which feature maps are enumerated (Bell(8) = 4140 partitions).
pub const MAX_PARTITION_NX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Assumption {
    /// Covariate shift.
    Cs,
    /// Label shift.
    Ls,
    /// Domain invariance.
    Di,
    /// Generalized label shift.
    Gls,
    /// Factorizable joint shift.
    Fjs,
}

impl Assumption {
    pub const ALL: [Assumption; 5] = [Self::Cs, Self::Ls, Self::Di, Self::Gls, Self::Fjs];
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Cs => "CS",
            Self::Ls => "LS",
            Self::Di => "DI",
            Self::Gls => "GLS",
            Self::Fjs => "FJS",
        };
        f.write_str(s)
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= PROB_TOL)
}

fn conditionals_match(
    n: usize,
    source: impl Fn(usize) -> Option<Vec<f64>>,
    target: impl Fn(usize) -> Option<Vec<f64>>,
) -> bool {
    (0..n).all(|i| match (source(i), target(i)) {
        (Some(s), Some(t)) => close(&s, &t),
        // Conditioning on a null event is vacuous.
        _ => true,
    })
}

/// Joint table of `(Z, Y)` with `Z = g(X)`, row-major by cell.
fn feature_joint(p: &DiscreteJoint, g: &FeatureMap) -> Vec<f64> {
    let ny = p.ny();
    let mut out = vec![0.0; g.n_cells() * ny];
    for x in 0..p.nx() {
        for y in 0..ny {
            out[g.cell(x) * ny + y] += p.get(x, y);
        }
    }
    out
}

/// `D(Y | g(X)) = D(Y | X)` wherever `D(x) > 0`.
fn preserves_label_information(p: &DiscreteJoint, zy: &[f64], g: &FeatureMap) -> bool {
    let ny = p.ny();
    (0..p.nx()).all(|x| {
        let Some(cond_x) = p.conditional_y(x) else {
            return true;
        };
        let row = &zy[g.cell(x) * ny..(g.cell(x) + 1) * ny];
        let mass: f64 = row.iter().sum();
        let cond_z: Vec<f64> = row.iter().map(|v| v / mass).collect();
        close(&cond_x, &cond_z)
    })
}

fn feature_given_label(zy: &[f64], n_cells: usize, ny: usize, y: usize) -> Option<Vec<f64>> {
    let col: Vec<f64> = (0..n_cells).map(|z| zy[z * ny + y]).collect();
    let mass: f64 = col.iter().sum();
    (mass > 0.0).then(|| col.into_iter().map(|v| v / mass).collect())
}

fn witnesses_map(source: &DiscreteJoint, target: &DiscreteJoint, which: Assumption, g: &FeatureMap) -> bool {
    let zs = feature_joint(source, g);
    let zt = feature_joint(target, g);
    if !preserves_label_information(source, &zs, g) || !preserves_label_information(target, &zt, g) {
        return false;
    }
    let ny = source.ny();
    match which {
        Assumption::Di => close(&zs, &zt),
        Assumption::Gls => conditionals_match(
            ny,
            |y| feature_given_label(&zs, g.n_cells(), ny, y),
            |y| feature_given_label(&zt, g.n_cells(), ny, y),
        ),
        _ => unreachable!("only DI and GLS are witnessed by feature maps"),
    }
}

/// Visits every set partition of `0..n` as a restricted growth string.
fn for_each_partition(n: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    if n == 0 {
        visit(&[]);
        return;
    }
    let mut a = vec![0usize; n];
    let mut max = vec![0usize; n];
    loop {
        if !visit(&a) {
            return;
        }
        // Advance to the next restricted growth string.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if a[i] <= max[i - 1] {
                a[i] += 1;
                break;
            }
            i -= 1;
        }
        for j in i..n {
            if j > i {
                a[j] = 0;
            }
            max[j] = if j == 0 { a[0] } else { max[j - 1].max(a[j]) };
        }
    }
}

fn check_inputs(source: &DiscreteJoint, target: &DiscreteJoint) -> Result<()> {
    // Support condition and shape check.
    joint_importance(source, target).map(|_| ())
}

fn search(
    source: &DiscreteJoint,
    target: &DiscreteJoint,
    which: Assumption,
    stop_at_first: bool,
) -> Result<Vec<FeatureMap>> {
    debug_assert!(matches!(which, Assumption::Di | Assumption::Gls));
    check_inputs(source, target)?;
    if source.nx() > MAX_PARTITION_NX {
        return Err(Error::SizeLimit {
            nx: source.nx(),
            limit: MAX_PARTITION_NX,
        });
    }
    let mut found = Vec::new();
    for_each_partition(source.nx(), |cells| {
        let g = FeatureMap::new(cells.to_vec()).expect("restricted growth strings are surjective");
        if witnesses_map(source, target, which, &g) {
            found.push(g);
            return !stop_at_first;
        }
        true
    });
    Ok(found)
}

/// Every feature map `g` witnessing DI or GLS for the pair.
pub fn witnesses(source: &DiscreteJoint, target: &DiscreteJoint, which: Assumption) -> Result<Vec<FeatureMap>> {
    match which {
        Assumption::Di | Assumption::Gls => search(source, target, which, false),
        other => Err(Error::Config(format!("{other} is not decided by feature maps"))),
    }
}

pub fn check_assumption(source: &DiscreteJoint, target: &DiscreteJoint, which: Assumption) -> Result<bool> {
    match which {
        Assumption::Cs => {
            check_inputs(source, target)?;
            Ok(conditionals_match(
                source.nx(),
                |x| source.conditional_y(x),
                |x| target.conditional_y(x),
            ))
        }
        Assumption::Ls => {
            check_inputs(source, target)?;
            Ok(conditionals_match(
                source.ny(),
                |y| source.conditional_x(y),
                |y| target.conditional_x(y),
            ))
        }
        Assumption::Di | Assumption::Gls => Ok(!search(source, target, which, true)?.is_empty()),
        Assumption::Fjs => match factorize(&joint_importance(source, target)?) {
            // A disconnected support still admits (several) factorizations.
            Ok(_) | Err(Error::AmbiguousSupport { .. }) => Ok(true),
            Err(Error::NotFactorizable) => Ok(false),
            Err(e) => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell(n: usize) -> usize {
        let mut count = 0;
        for_each_partition(n, |_| {
            count += 1;
            true
        });
        count
    }

    #[test]
    fn partition_counts_match_bell_numbers() {
        let expected = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in expected.iter().enumerate() {
            assert_eq!(bell(n), b, "n = {n}");
        }
    }

    #[test]
    fn identical_domains_satisfy_everything() {
        let p = DiscreteJoint::from_rows(&[vec![0.1, 0.3], vec![0.2, 0.0], vec![0.15, 0.25]]).unwrap();
        for a in Assumption::ALL {
            assert!(check_assumption(&p, &p, a).unwrap(), "{a}");
        }
        assert!(witnesses(&p, &p, Assumption::Gls)
            .unwrap()
            .contains(&FeatureMap::identity(3)));
    }

    #[test]
    fn discretized_toy_is_fjs_only() {
        let s = DiscreteJoint::from_rows(&[vec![1000.0, 1000.0], vec![125.0, 500.0]]).unwrap();
        let t = DiscreteJoint::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(check_assumption(&s, &t, Assumption::Fjs).unwrap());
        assert!(!check_assumption(&s, &t, Assumption::Cs).unwrap());
        assert!(!check_assumption(&s, &t, Assumption::Ls).unwrap());
        assert!(!check_assumption(&s, &t, Assumption::Gls).unwrap());
        assert!(!check_assumption(&s, &t, Assumption::Di).unwrap());
        assert!(witnesses(&s, &t, Assumption::Gls).unwrap().is_empty());
    }

    #[test]
    fn shared_class_conditionals_are_label_shift() {
        // D(X|Y) identical, D(Y) differs.
        let cond = [[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]];
        let build = |py: [f64; 2]| {
            let mut m = vec![0.0; 6];
            for x in 0..3 {
                for y in 0..2 {
                    m[x * 2 + y] = cond[y][x] * py[y];
                }
            }
            DiscreteJoint::from_masses(3, 2, &m).unwrap()
        };
        let s = build([0.3, 0.7]);
        let t = build([0.8, 0.2]);
        assert!(check_assumption(&s, &t, Assumption::Ls).unwrap());
        assert!(!check_assumption(&s, &t, Assumption::Cs).unwrap());
        assert!(check_assumption(&s, &t, Assumption::Fjs).unwrap());
    }

    #[test]
    fn partition_search_is_bounded() {
        let p = DiscreteJoint::from_masses(9, 1, &[1.0; 9]).unwrap();
        assert!(matches!(
            check_assumption(&p, &p, Assumption::Di),
            Err(Error::SizeLimit { nx: 9, .. })
        ));
        // CS has no enumeration and no bound.
        assert!(check_assumption(&p, &p, Assumption::Cs).unwrap());
    }

    #[test]
    fn support_violation_propagates() {
        let s = DiscreteJoint::new(1, 2, vec![1.0, 0.0]).unwrap();
        let t = DiscreteJoint::new(1, 2, vec![0.5, 0.5]).unwrap();
        for a in Assumption::ALL {
            assert!(matches!(
                check_assumption(&s, &t, a),
                Err(Error::SupportViolation { .. })
            ));
        }
    }
}
