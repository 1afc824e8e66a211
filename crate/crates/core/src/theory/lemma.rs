use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimiser and optimal value of the pointwise discriminative objective
/// `E_p log(1 + w) + E_q log(1 + 1/w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Value {
    pub w_star: Vec<f64>,
    /// Objective evaluated at `w_star`.
    pub value: f64,
    /// `2 (ln 2 - JSD(p || q))`, computed from entropies.
    pub jsd_form: f64,
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{name} is empty")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDistribution(format!("{name} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidDistribution(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Jensen-Shannon divergence `H((p+q)/2) - (H(p) + H(q))/2` in nats.
pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    entropy(&mid) - 0.5 * (entropy(p) + entropy(q))
}

/// The objective at an arbitrary `w`; terms with zero weight are skipped.
pub fn plugin_objective(p: &[f64], q: &[f64], w: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .zip(w)
        .map(|((&pi, &qi), &wi)| {
            let a = if pi > 0.0 { pi * wi.ln_1p() } else { 0.0 };
            let b = if qi > 0.0 { qi * (1.0 / wi).ln_1p() } else { 0.0 };
            a + b
        })
        .sum()
}

pub fn lemma1_value(p: &[f64], q: &[f64]) -> Result<Lemma1Value> {
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if let Some(x) = (0..p.len()).find(|&i| q[i] > 0.0 && p[i] == 0.0) {
        return Err(Error::SupportViolation { x, y: 0 });
    }
    let w_star: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| if pi > 0.0 { qi / pi } else { 0.0 })
        .collect();
    let value = plugin_objective(p, q, &w_star);
    let jsd_form = 2.0 * (std::f64::consts::LN_2 - jsd(p, q));
    Ok(Lemma1Value { w_star, value, jsd_form })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn equal_distributions_give_two_log_two() {
        let p = [0.2, 0.3, 0.5];
        let r = lemma1_value(&p, &p).unwrap();
        assert!(r.w_star.iter().all(|w| (w - 1.0).abs() < 1e-15));
        assert!((r.value - 2.0 * LN_2).abs() < 1e-12);
        assert!((r.jsd_form - 2.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_point() {
        let r = lemma1_value(&[1.0], &[1.0]).unwrap();
        assert!((r.value - 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn skewed_pair_agrees_with_entropy_form() {
        let p = [0.75, 0.25];
        let q = [0.25, 0.75];
        let r = lemma1_value(&p, &q).unwrap();
        // Direct evaluation: both points contribute 0.75 ln(4/3) + 0.25 ln 4.
        let direct = 2.0 * (0.75 * (4.0f64 / 3.0).ln() + 0.25 * 4.0f64.ln());
        assert!((r.value - direct).abs() < 1e-12);
        assert!((r.value - r.jsd_form).abs() < 1e-12);
    }

    #[test]
    fn target_outside_support_is_rejected() {
        assert!(matches!(
            lemma1_value(&[1.0, 0.0], &[0.5, 0.5]),
            Err(Error::SupportViolation { x: 1, .. })
        ));
    }

    #[test]
    fn zero_target_mass_gives_zero_weight() {
        let r = lemma1_value(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(r.w_star, vec![2.0, 0.0]);
        assert!((r.value - r.jsd_form).abs() < 1e-12);
    }
}
