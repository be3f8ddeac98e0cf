//! Closed-form regularized best response over the capped simplex
//! `{x >= 0, sum(x) <= 1}`.

use crate::error::{Error, Result};

use super::program::DualVector;

/// Maximizer of `gains·x - (eta/2)|x|^2` over the capped simplex, together
/// with whether the row constraint `sum(x) <= 1` is tight.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedResponse {
    pub x: Vec<f64>,
    /// Water level `mu >= 0` subtracted from every gain; zero when the row
    /// constraint is slack.
    pub level: f64,
    pub saturated: bool,
}

pub fn regularized_argmax(gains: &[f64], eta: f64) -> Result<RegularizedResponse> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::param(format!("regularization eta must be > 0, got {eta}")));
    }
    let unconstrained: Vec<f64> = gains.iter().map(|g| (g / eta).max(0.0)).collect();
    let mass: f64 = unconstrained.iter().sum();
    if mass <= 1.0 {
        return Ok(RegularizedResponse {
            x: unconstrained,
            level: 0.0,
            saturated: false,
        });
    }
    // Water-fill: find tau with sum(max(0, z_j - tau)) = 1 by sorting.
    let mut z: Vec<f64> = gains.iter().map(|g| g / eta).filter(|&z| z > 0.0).collect();
    z.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (idx, &zj) in z.iter().enumerate() {
        prefix += zj;
        let candidate = (prefix - 1.0) / (idx + 1) as f64;
        if zj > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    let mut x: Vec<f64> = gains.iter().map(|g| (g / eta - tau).max(0.0)).collect();
    // For small eta, z and tau are large and their difference keeps only
    // about eps_mach * |z| absolute accuracy; the exact row sums to one.
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        x.iter_mut().for_each(|v| *v /= total);
    }
    Ok(RegularizedResponse {
        x,
        level: tau * eta,
        saturated: true,
    })
}

/// Agent `i`'s decoded row under prices `lambda`: the unique maximizer of
/// `sum_j (v_j - lambda_j) x_j - (eta/2)|x|^2` with `x >= 0`, `sum(x) <= 1`.
pub fn agent_best_response(row: &[bool], lambda: &DualVector, eta: f64) -> Result<Vec<f64>> {
    Ok(agent_response(row, lambda.as_slice(), eta)?.x)
}

pub(crate) fn agent_response(row: &[bool], lambda: &[f64], eta: f64) -> Result<RegularizedResponse> {
    if row.len() != lambda.len() {
        return Err(Error::input(format!(
            "valuation row has {} goods but price vector has {}",
            row.len(),
            lambda.len()
        )));
    }
    let gains: Vec<f64> = row
        .iter()
        .zip(lambda)
        .map(|(&v, &l)| f64::from(u8::from(v)) - l)
        .collect();
    regularized_argmax(&gains, eta)
}

/// `sum_j gains_j x_j - (eta/2)|x|^2`.
pub fn regularized_value(gains: &[f64], x: &[f64], eta: f64) -> f64 {
    let linear: f64 = gains.iter().zip(x).map(|(g, x)| g * x).sum();
    let sq: f64 = x.iter().map(|x| x * x).sum();
    linear - 0.5 * eta * sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn br(v: &[bool], l: &[f64], eta: f64) -> Vec<f64> {
        agent_best_response(v, &DualVector::new(l.to_vec()).unwrap(), eta).unwrap()
    }

    #[test]
    fn single_valued_good() {
        assert_eq!(br(&[true, false], &[0.0, 0.0], 1.0), vec![1.0, 0.0]);
    }

    #[test]
    fn water_fill_two_goods() {
        let r = agent_response(&[true, true], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(r.x, vec![0.5, 0.5]);
        assert_abs_diff_eq!(r.level, 0.5);
        assert!(r.saturated);
    }

    #[test]
    fn prices_above_values_give_zero() {
        assert_eq!(br(&[true, true, false], &[1.0, 2.5, 0.0], 0.3), vec![0.0; 3]);
    }

    #[test]
    fn slack_interior_solution() {
        // (1 - 0.8)/0.5 = 0.4 < 1, so the row constraint is slack.
        let x = br(&[true, false], &[0.8, 0.0], 0.5);
        assert_abs_diff_eq!(x[0], 0.4, epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn rejects_nonpositive_eta() {
        assert!(regularized_argmax(&[1.0], 0.0).is_err());
        assert!(regularized_argmax(&[1.0], -1.0).is_err());
        assert!(regularized_argmax(&[1.0], f64::NAN).is_err());
    }

    proptest! {
        /// The closed form is the exact argmax: 100 random feasible
        /// perturbations never improve the objective.
        #[test]
        fn no_feasible_perturbation_improves(
            row in prop::collection::vec(any::<bool>(), 1..8),
            prices in prop::collection::vec(0.0f64..1.5, 8),
            eta in 0.01f64..2.0,
            seed in any::<u64>(),
        ) {
            let k = row.len();
            let lambda = &prices[..k];
            let r = agent_response(&row, lambda, eta).unwrap();
            let gains: Vec<f64> = row.iter().zip(lambda).map(|(&v, l)| f64::from(u8::from(v)) - l).collect();
            let best = regularized_value(&gains, &r.x, eta);
            prop_assert!(r.x.iter().all(|&x| x >= 0.0));
            prop_assert!(r.x.iter().sum::<f64>() <= 1.0 + 1e-12);
            for j in 0..k {
                if !row[j] {
                    prop_assert_eq!(r.x[j], 0.0);
                }
            }
            let mut rng = crate::rng::seeded(seed);
            for _ in 0..100 {
                let scale: f64 = rng.random_range(1e-6..0.5);
                let mut y: Vec<f64> = r.x.iter().map(|&x| (x + scale * rng.random_range(-1.0..1.0)).max(0.0)).collect();
                let s: f64 = y.iter().sum();
                if s > 1.0 {
                    y.iter_mut().for_each(|v| *v /= s);
                }
                prop_assert!(regularized_value(&gains, &y, eta) <= best + 1e-12);
            }
        }
    }
}
