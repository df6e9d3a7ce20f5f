use crate::error::{Result, XaiError};

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-odds `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Softmax with max subtraction.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(XaiError::EmptyInput);
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Sum by a fixed binary tree so the result does not depend on how the
/// caller partitions work.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.5) - 0.817_574).abs() < 1e-6);
        assert!((sigmoid(-3.2) - 0.039_166).abs() < 1e-6);
        assert!((sigmoid(3.2) - 0.960_834).abs() < 1e-6);
        assert!((sigmoid(-3.2) + sigmoid(3.2) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(matches!(softmax(&[]), Err(XaiError::EmptyInput)));
    }

    #[test]
    fn softmax_normalised_and_shift_invariant() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..1000 {
            let n = 1 + rng.next_below(12) as usize;
            let v: Vec<f64> = (0..n).map(|_| rng.uniform(-20.0, 20.0)).collect();
            let p = softmax(&v).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(p.iter().all(|&x| x > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + 100.0).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }
}
