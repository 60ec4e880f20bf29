//! Gradient-based one-side sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GbtError, GossAmplification};

/// Rows retained for one boosting round and the weight applied to their
/// gradients and hessians. Indices are ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GossSample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

pub(crate) fn check_rates(a: f64, b: f64) -> Result<(), GbtError> {
    let bad = |m: String| Err(GbtError::InvalidParams(m));
    if !(a > 0.0 && a <= 1.0) {
        return bad(format!("GOSS top rate {a} must be in (0, 1]"));
    }
    if !(b >= 0.0) {
        return bad(format!("GOSS other rate {b} must be >= 0"));
    }
    if a + b > 1.0 + 1e-12 {
        return bad(format!("GOSS rates {a} + {b} exceed 1"));
    }
    if b == 0.0 && a < 1.0 {
        return bad("GOSS other rate 0 cannot represent the remaining rows".into());
    }
    Ok(())
}

fn count(rate: f64, n: usize) -> usize {
    let x = rate * n as f64;
    ((x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize).min(n)
}

/// Keeps the `ceil(a n)` rows of largest |g| with weight 1 and draws
/// `ceil(b n)` of the rest uniformly, weighting them by `(1 - a) / b`.
pub fn goss_sample(g: &[f64], a: f64, b: f64, seed: u64) -> Result<GossSample, GbtError> {
    goss_sample_with(g, a, b, GossAmplification::Unbiased, seed)
}

pub fn goss_sample_with(
    g: &[f64],
    a: f64,
    b: f64,
    amplification: GossAmplification,
    seed: u64,
) -> Result<GossSample, GbtError> {
    check_rates(a, b)?;
    let n = g.len();
    if a * (n as f64) < 1.0 {
        return Err(GbtError::InvalidParams(format!(
            "GOSS top rate {a} selects no rows out of {n}"
        )));
    }
    let n_top = count(a, n);

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal |g| keeps index order
    order.sort_by(|&i, &j| g[j].abs().total_cmp(&g[i].abs()));
    let (top, rest) = order.split_at(n_top);

    let n_other = count(b, n).min(rest.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, rest.len(), n_other);

    let amp = match amplification {
        GossAmplification::Unbiased if b > 0.0 => (1.0 - a) / b,
        GossAmplification::InverseTopComplement if a < 1.0 => 1.0 / (1.0 - a),
        _ => 1.0,
    };
    let mut rows: Vec<(usize, f64)> = top.iter().map(|&i| (i, 1.0)).collect();
    rows.extend(picked.iter().map(|k| (rest[k], amp)));
    rows.sort_unstable_by_key(|r| r.0);
    let (indices, weights) = rows.into_iter().unzip();
    Ok(GossSample { indices, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_top_rate_keeps_everything() {
        let g: Vec<f64> = (0..17).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = goss_sample(&g, 1.0, 0.0, 9).unwrap();
        assert_eq!(s.indices, (0..17).collect::<Vec<_>>());
        assert!(s.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn ten_rows_two_plus_two() {
        let g = [0.1, -5.0, 0.2, 0.3, 4.0, -0.4, 0.5, 0.6, -0.7, 0.8];
        let s = goss_sample(&g, 0.2, 0.2, 1).unwrap();
        assert_eq!(s.indices.len(), 4);
        let top: Vec<usize> = s
            .indices
            .iter()
            .zip(&s.weights)
            .filter(|(_, &w)| w == 1.0)
            .map(|(&i, _)| i)
            .collect();
        assert_eq!(top, vec![1, 4]);
        let amplified: Vec<f64> = s.weights.iter().copied().filter(|&w| w != 1.0).collect();
        assert_eq!(amplified.len(), 2);
        assert!(amplified.iter().all(|&w| (w - 4.0).abs() < 1e-12));
    }

    #[test]
    fn printed_factor_mode() {
        let g: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = goss_sample_with(&g, 0.2, 0.2, GossAmplification::InverseTopComplement, 1).unwrap();
        assert!(s.weights.iter().any(|&w| (w - 1.25).abs() < 1e-12));
    }

    #[test]
    fn deterministic_for_seed() {
        let g: Vec<f64> = (0..100).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        assert_eq!(
            goss_sample(&g, 0.2, 0.2, 5).unwrap(),
            goss_sample(&g, 0.2, 0.2, 5).unwrap()
        );
    }

    #[test]
    fn rate_errors() {
        let g = [1.0; 10];
        assert!(goss_sample(&g, 0.5, 0.0, 0).is_err());
        assert!(goss_sample(&g, 0.05, 0.2, 0).is_err()); // 0.5 rows
        assert!(goss_sample(&g, 0.0, 0.2, 0).is_err());
        assert!(goss_sample(&g, 0.6, 0.6, 0).is_err());
    }
}
