use crate::error::{Error, Result};

/// Coefficient of determination `1 - SS_res / SS_tot`; may be negative.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidDataset("r_squared needs at least 2 values".into()));
    }
    if y_true.iter().all(|y| *y == y_true[0]) {
        return Err(Error::ZeroVarianceTarget);
    }
    let mean = crate::numeric::shifted_mean(y_true.iter().copied()).expect("non-empty");
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let y = [1.0, 4.0, 2.0, 9.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[4.0; 4]).unwrap(), 0.0);
        assert_eq!(r_squared(&[0.0, 2.0], &[2.0, 0.0]).unwrap(), -3.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            r_squared(&[3.0, 3.0], &[1.0, 2.0]),
            Err(Error::ZeroVarianceTarget)
        ));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
        assert!(r_squared(&[1.0, 2.0], &[1.0]).is_err());
    }
}
