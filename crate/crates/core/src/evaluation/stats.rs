use super::EvaluationError;

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvaluationError> {
    if xs.len() != ys.len() {
        return Err(EvaluationError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(EvaluationError::InsufficientData(format!("{} paired values, need at least 2", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvaluationError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        // means 2.5, 2.5; sxy = 4, sxx = syy = 5
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(EvaluationError::LengthMismatch { .. })));
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(EvaluationError::ZeroVariance)));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(EvaluationError::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn bounded(xs in prop::collection::vec(-1e3f64..1e3, 2..30), seed in 0u64..1000) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * ((i as u64 + seed) % 7) as f64 - i as f64).collect();
            if let Ok(r) = pearson(&xs, &ys) {
                prop_assert!(r.abs() <= 1.0);
            }
        }
    }
}
