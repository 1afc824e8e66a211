use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for comparing probabilities and conditionals.
pub const PROB_TOL: f64 = 1e-9;

const SUM_TOL: f64 = 1e-12;

/// Finite joint distribution over `X x Y`, stored row-major by x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    nx: usize,
    ny: usize,
    p: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(nx: usize, ny: usize, p: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidDistribution("empty table".into()));
        }
        if p.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                got: p.len(),
            });
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {bad} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { nx, ny, p })
    }

    /// Builds a table from nonnegative masses, normalising them to sum to one.
    pub fn from_masses(nx: usize, ny: usize, masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if total.is_nan() || total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidDistribution("masses must have positive finite sum".into()));
        }
        Self::new(nx, ny, masses.iter().map(|m| m / total).collect())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ny) {
            return Err(Error::InvalidDistribution("ragged rows".into()));
        }
        Self::from_masses(nx, ny, &rows.concat())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.ny + y]
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn in_support(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > 0.0
    }

    pub fn support(&self) -> Vec<(usize, usize)> {
        (0..self.nx)
            .flat_map(|x| (0..self.ny).map(move |y| (x, y)))
            .filter(|&(x, y)| self.in_support(x, y))
            .collect()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.nx).map(|x| (0..self.ny).map(|y| self.get(x, y)).sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.ny).map(|y| (0..self.nx).map(|x| self.get(x, y)).sum()).collect()
    }

    /// `D(Y | X = x)`, or `None` when `D(x) = 0`.
    pub fn conditional_y(&self, x: usize) -> Option<Vec<f64>> {
        let row: Vec<f64> = (0..self.ny).map(|y| self.get(x, y)).collect();
        let mass: f64 = row.iter().sum();
        (mass > 0.0).then(|| row.into_iter().map(|v| v / mass).collect())
    }

    /// `D(X | Y = y)`, or `None` when `D(y) = 0`.
    pub fn conditional_x(&self, y: usize) -> Option<Vec<f64>> {
        let col: Vec<f64> = (0..self.nx).map(|x| self.get(x, y)).collect();
        let mass: f64 = col.iter().sum();
        (mass > 0.0).then(|| col.into_iter().map(|v| v / mass).collect())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::DimensionMismatch {
                expected: self.nx * self.ny,
                got: other.nx * other.ny,
            });
        }
        Ok(())
    }
}

/// Joint importance `target(x, y) / source(x, y)` on the source support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    nx: usize,
    ny: usize,
    w: Vec<Option<f64>>,
}

impl ImportanceTable {
    pub fn new(nx: usize, ny: usize, w: Vec<Option<f64>>) -> Result<Self> {
        if w.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                got: w.len(),
            });
        }
        if w.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistribution("importance must be finite and nonnegative".into()));
        }
        Ok(Self { nx, ny, w })
    }

    /// Table from a full grid of weights, every cell in the support.
    pub fn from_grid(nx: usize, ny: usize, w: &[f64]) -> Result<Self> {
        Self::new(nx, ny, w.iter().copied().map(Some).collect())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.w[x * self.ny + y]
    }

    /// `E_source[w]`; equals one for a table produced by [`joint_importance`].
    pub fn source_expectation(&self, source: &DiscreteJoint) -> f64 {
        source
            .support()
            .into_iter()
            .map(|(x, y)| source.get(x, y) * self.get(x, y).unwrap_or(0.0))
            .sum()
    }
}

/// Data and label importance factors under the gauge `u[x0] = 1`, where `x0`
/// is the smallest x index carrying positive importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FactorPair {
    pub fn product(&self, x: usize, y: usize) -> f64 {
        self.u[x] * self.v[y]
    }
}

/// Assignment of each x index to a feature cell; a deterministic `Z = g(X)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    cells: Vec<usize>,
    n_cells: usize,
}

impl FeatureMap {
    pub fn new(cells: Vec<usize>) -> Result<Self> {
        let n_cells = cells.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_cells];
        for &c in &cells {
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidDistribution("feature map leaves a cell empty".into()));
        }
        Ok(Self { cells, n_cells })
    }

    pub fn identity(nx: usize) -> Self {
        Self {
            cells: (0..nx).collect(),
            n_cells: nx,
        }
    }

    pub fn cell(&self, x: usize) -> usize {
        self.cells[x]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
}

pub fn joint_importance(source: &DiscreteJoint, target: &DiscreteJoint) -> Result<ImportanceTable> {
    source.check_same_shape(target)?;
    let mut w = Vec::with_capacity(source.nx * source.ny);
    for x in 0..source.nx {
        for y in 0..source.ny {
            let ps = source.get(x, y);
            let pt = target.get(x, y);
            if ps > 0.0 {
                w.push(Some(pt / ps));
            } else if pt > 0.0 {
                return Err(Error::SupportViolation { x, y });
            } else {
                w.push(None);
            }
        }
    }
    ImportanceTable::new(source.nx, source.ny, w)
}

/// Rank-1 factorization `w(x, y) = u(x) v(y)` on the support of `w`.
///
/// Rows (columns) whose importance vanishes on the whole support get
/// `u = 0` (`v = 0`); any other zero entry rules a factorization out.
/// Consistency is checked in the log domain with tolerance [`PROB_TOL`].
pub fn factorize(w: &ImportanceTable) -> Result<FactorPair> {
    let (nx, ny) = (w.nx, w.ny);
    let support: Vec<(usize, usize, f64)> = (0..nx)
        .flat_map(|x| (0..ny).map(move |y| (x, y)))
        .filter_map(|(x, y)| w.get(x, y).map(|v| (x, y, v)))
        .collect();

    let mut row_positive = vec![false; nx];
    let mut col_positive = vec![false; ny];
    for &(x, y, v) in &support {
        if v > 0.0 {
            row_positive[x] = true;
            col_positive[y] = true;
        }
    }
    // A zero on the support must be explained by a vanishing row or column.
    for &(x, y, v) in &support {
        if v == 0.0 && row_positive[x] && col_positive[y] {
            return Err(Error::NotFactorizable);
        }
    }

    // Bipartite graph over positive entries: nodes 0..nx are rows, nx.. are columns.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nx + ny];
    for &(x, y, v) in &support {
        if v > 0.0 {
            let lw = v.ln();
            adj[x].push((nx + y, lw));
            adj[nx + y].push((x, lw));
        }
    }

    let mut log_factor = vec![None::<f64>; nx + ny];
    let mut components = 0;
    for start in 0..nx {
        if !row_positive[start] || log_factor[start].is_some() {
            continue;
        }
        components += 1;
        log_factor[start] = Some(0.0);
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            let here = log_factor[node].expect("visited nodes carry a value");
            for &(next, lw) in &adj[node] {
                if log_factor[next].is_none() {
                    log_factor[next] = Some(lw - here);
                    queue.push_back(next);
                }
            }
        }
    }

    for &(x, y, v) in &support {
        if v > 0.0 {
            let fitted = log_factor[x].unwrap_or(f64::NAN) + log_factor[nx + y].unwrap_or(f64::NAN);
            // A NaN residual marks an unfitted factor and fails the check.
            let residual = (v.ln() - fitted).abs();
            if residual.is_nan() || residual > PROB_TOL {
                return Err(Error::NotFactorizable);
            }
        }
    }
    if components > 1 {
        return Err(Error::AmbiguousSupport { components });
    }

    let u = (0..nx).map(|x| log_factor[x].map_or(0.0, f64::exp)).collect();
    let v = (0..ny).map(|y| log_factor[nx + y].map_or(0.0, f64::exp)).collect();
    Ok(FactorPair { u, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_tables() -> (DiscreteJoint, DiscreteJoint) {
        let source = DiscreteJoint::from_rows(&[vec![1000.0, 1000.0], vec![125.0, 500.0]]).unwrap();
        let target = DiscreteJoint::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        (source, target)
    }

    #[test]
    fn rejects_invalid_tables() {
        assert!(DiscreteJoint::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(DiscreteJoint::new(1, 2, vec![-0.5, 1.5]).is_err());
        assert!(DiscreteJoint::new(2, 2, vec![1.0]).is_err());
        assert!(DiscreteJoint::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn identity_importance_is_one() {
        let p = DiscreteJoint::from_rows(&[vec![0.1, 0.2], vec![0.0, 0.7]]).unwrap();
        let w = joint_importance(&p, &p).unwrap();
        for (x, y) in p.support() {
            assert_eq!(w.get(x, y), Some(1.0));
        }
        assert_eq!(w.get(1, 0), None);
    }

    #[test]
    fn toy_quadrant_importance() {
        let (s, t) = toy_tables();
        let w = joint_importance(&s, &t).unwrap();
        let expected = [0.875, 0.4375, 3.5, 1.75];
        for (i, e) in expected.iter().enumerate() {
            assert!((w.get(i / 2, i % 2).unwrap() - e).abs() < 1e-12);
        }
        assert!((w.source_expectation(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_target_on_uniform_source() {
        let s = DiscreteJoint::new(2, 2, vec![0.25; 4]).unwrap();
        let t = DiscreteJoint::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let w = joint_importance(&s, &t).unwrap();
        let got: Vec<f64> = (0..4).map(|i| w.get(i / 2, i % 2).unwrap()).collect();
        assert_eq!(got, vec![2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn support_violation_is_reported() {
        let s = DiscreteJoint::new(1, 2, vec![1.0, 0.0]).unwrap();
        let t = DiscreteJoint::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            joint_importance(&s, &t),
            Err(Error::SupportViolation { x: 0, y: 1 })
        ));
    }

    #[test]
    fn factorize_unit_table() {
        let w = ImportanceTable::from_grid(3, 2, &[1.0; 6]).unwrap();
        let f = factorize(&w).unwrap();
        assert_eq!(f.u, vec![1.0; 3]);
        assert_eq!(f.v, vec![1.0; 2]);
    }

    #[test]
    fn factorize_toy_in_gauge() {
        let (s, t) = toy_tables();
        let f = factorize(&joint_importance(&s, &t).unwrap()).unwrap();
        assert!((f.u[0] - 1.0).abs() < 1e-12);
        assert!((f.u[1] - 4.0).abs() < 1e-12);
        assert!((f.v[0] - 0.875).abs() < 1e-12);
        assert!((f.v[1] - 0.4375).abs() < 1e-12);
    }

    #[test]
    fn anti_diagonal_is_not_factorizable() {
        let w = ImportanceTable::from_grid(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(factorize(&w), Err(Error::NotFactorizable)));
    }

    #[test]
    fn isolated_zeros_are_not_factorizable() {
        let w = ImportanceTable::from_grid(2, 2, &[2.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(matches!(factorize(&w), Err(Error::NotFactorizable)));
    }

    #[test]
    fn zero_row_gets_zero_factor() {
        let w = ImportanceTable::from_grid(2, 2, &[0.0, 0.0, 2.0, 4.0]).unwrap();
        let f = factorize(&w).unwrap();
        assert_eq!(f.u[0], 0.0);
        assert!((f.u[1] - 1.0).abs() < 1e-15);
        assert_eq!(f.v, vec![2.0, 4.0]);
    }

    #[test]
    fn block_diagonal_support_is_ambiguous() {
        let w = ImportanceTable::new(2, 2, vec![Some(1.0), None, None, Some(3.0)]).unwrap();
        assert!(matches!(
            factorize(&w),
            Err(Error::AmbiguousSupport { components: 2 })
        ));
    }

    #[test]
    fn feature_map_requires_surjectivity() {
        assert!(FeatureMap::new(vec![0, 2]).is_err());
        assert_eq!(FeatureMap::new(vec![1, 0, 1]).unwrap().n_cells(), 2);
    }
}
