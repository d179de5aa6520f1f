//! Ground distances between states: label distance, total-variation
//! distance of exponential sojourn laws, and the Kantorovich lifting of a
//! state distance to next-state distributions.

use crate::model::{Ctmc, LabelMetric, ModelError};
use crate::tolerances;
use crate::transport::{solve_tp, TransportError, TransportProblem};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("non-finite or non-positive rate {0}")]
    BadRate(f64),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Total-variation distance between the exponential laws with rates `r1`
/// and `r2`:
///
/// |(r2/r1)^(r1/(r1-r2)) - (r2/r1)^(r2/(r1-r2))|
///
/// evaluated in log space. Rates closer than `tolerances::RATE_EQ_REL`
/// relative to the larger one count as equal and give 0.
pub fn tv_exp(r1: f64, r2: f64) -> Result<f64, MetricsError> {
    for r in [r1, r2] {
        if !r.is_finite() || r <= 0.0 {
            return Err(MetricsError::BadRate(r));
        }
    }
    if (r1 - r2).abs() <= tolerances::RATE_EQ_REL * r1.max(r2) {
        return Ok(0.0);
    }
    // evaluate with the larger rate first so swapped arguments give the
    // same bits
    let (big, small) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
    let ln_q = (small / big).ln();
    let denom = big - small;
    let hi = ((small / denom) * ln_q).exp();
    let lo = ((big / denom) * ln_q).exp();
    Ok((hi - lo).abs())
}

/// Distance between the labels worn by two states.
pub fn label_dist(m: &Ctmc, metric: &LabelMetric, s: usize, t: usize) -> Result<f64, ModelError> {
    metric.dist(m.label(s), m.label(t))
}

/// Kantorovich (optimal transport) lifting: the least expected cost of a
/// coupling of `mu` and `nu`, with `cost` giving the ground distance
/// between support points.
pub fn kantorovich<F>(
    cost: F,
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
) -> Result<f64, MetricsError>
where
    F: FnMut(usize, usize) -> f64,
{
    let tp = TransportProblem::new(mu, nu, cost)?;
    Ok(solve_tp(&tp).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SplitMix64;

    #[test]
    fn matches_worked_rate_pairs() {
        assert!((tv_exp(2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let alpha = (0.6f64).powf(1.5) - (0.6f64).powf(2.5);
        assert!((tv_exp(15.0, 9.0).unwrap() - alpha).abs() < 1e-15);
        assert!((alpha - 0.185903200617956).abs() < 1e-12);
    }

    #[test]
    fn equal_and_near_equal_rates_give_zero() {
        assert_eq!(tv_exp(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(tv_exp(3.0, 3.0 * (1.0 + 1e-13)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(tv_exp(0.0, 1.0).is_err());
        assert!(tv_exp(1.0, -2.0).is_err());
        assert!(tv_exp(f64::NAN, 1.0).is_err());
        assert!(tv_exp(1.0, f64::INFINITY).is_err());
    }

    /// Independent derivation: the two exponential densities cross at
    /// x* = ln(r1/r2)/(r1-r2), and integrating |f-g| piecewise gives
    /// exp(-r2 x*) - exp(-r1 x*) for r1 > r2.
    fn crossing_point_oracle(r1: f64, r2: f64) -> f64 {
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        let x = (hi / lo).ln() / (hi - lo);
        (-lo * x).exp() - (-hi * x).exp()
    }

    #[test]
    fn agrees_with_crossing_point_derivation() {
        let mut rng = SplitMix64::new(0xABCD);
        for _ in 0..500 {
            let r1 = 0.05 + rng.next_f64() * 80.0;
            let r2 = 0.05 + rng.next_f64() * 80.0;
            if (r1 - r2).abs() <= 1e-9 * r1.max(r2) {
                continue;
            }
            let got = tv_exp(r1, r2).unwrap();
            assert!(
                (got - crossing_point_oracle(r1, r2)).abs() < 1e-12,
                "rates {r1},{r2}"
            );
            assert!((0.0..1.0).contains(&got));
            assert_eq!(got, tv_exp(r2, r1).unwrap());
        }
    }

    #[test]
    fn lifts_point_masses_to_the_ground_cost() {
        let cost = |u: usize, v: usize| if u == v { 0.0 } else { 0.7 };
        let d = kantorovich(cost, &[(0, 1.0)], &[(1, 1.0)]).unwrap();
        assert!((d - 0.7).abs() < 1e-15);
        let d = kantorovich(cost, &[(2, 1.0)], &[(2, 1.0)]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn picks_the_cheaper_matching() {
        let table = [[0.0, 0.6], [0.5, 0.2]];
        let cost = |u: usize, v: usize| table[u][v - 2];
        let d = kantorovich(cost, &[(0, 0.5), (1, 0.5)], &[(2, 0.5), (3, 0.5)]).unwrap();
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_marginals() {
        let r = kantorovich(|_, _| 0.0, &[(0, 0.9)], &[(1, 1.0)]);
        assert!(matches!(r, Err(MetricsError::Transport(_))));
    }
}
