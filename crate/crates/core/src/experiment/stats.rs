//! Pearson correlation and its two-tailed t-test p-value.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            inputs: x.len(),
            labels: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "correlation needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance in correlation input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-tailed p-value of `t = r·sqrt((n−2)/(1−r²))` under Student's t with
/// `n − 2` degrees of freedom, via the regularized incomplete beta function:
/// `p = I_{ν/(ν+t²)}(ν/2, 1/2)`.
pub fn p_value(r: f64, n_pairs: usize) -> Result<f64> {
    if n_pairs < 3 {
        return Err(Error::InvalidParameter(format!(
            "p-value needs at least 3 pairs, got {n_pairs}"
        )));
    }
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let dof = (n_pairs - 2) as f64;
    // ν/(ν+t²) simplifies to 1 − r² without forming t
    let x = 1.0 - r * r;
    Ok(beta_reg(dof / 2.0, 0.5, x).clamp(0.0, 1.0))
}
