use nalgebra::{DMatrix, DVector};

use super::{check_positive, soft_threshold, RecoveryResult};
use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Dantzig selector for an orthonormal design, where it reduces to soft
/// thresholding `X^T y` at `sigma Gamma3`. `objective` is `||beta_hat||_1`.
pub fn solve_dantzig_orthonormal(
    x: &DesignMatrix,
    y: &DVector<f64>,
    sigma: f64,
    gamma3: f64,
) -> Result<RecoveryResult> {
    x.check_rows(y)?;
    check_positive(sigma, "sigma")?;
    check_positive(gamma3, "Gamma3")?;
    let p = x.ncols();
    let deviation = (x.entries().tr_mul(x.entries()) - DMatrix::<f64>::identity(p, p)).amax();
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal(deviation));
    }
    let t = sigma * gamma3;
    let estimate = x.correlate(y).map(|z| soft_threshold(z, t));
    let l1 = estimate.lp_norm(1);
    Ok(RecoveryResult::new(estimate, l1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn thresholds_correlations() {
        let x = DesignMatrix::with_unit_columns(DMatrix::identity(3, 3)).unwrap();
        let y = DVector::from_vec(vec![3.0, 0.5, -2.0]);
        let r = solve_dantzig_orthonormal(&x, &y, 1.0, 1.0).unwrap();
        assert_eq!(r.estimate.as_slice(), &[2.0, 0.0, -1.0]);
        assert_eq!(r.support.indices(), &[0, 2]);
        assert_eq!(r.objective, 3.0);
        let r = solve_dantzig_orthonormal(&x, &y, 1.0, 3.0).unwrap();
        assert!(r.support.is_empty());
    }

    #[test]
    fn rejects_non_orthonormal_designs() {
        let x = crate::experiment::gen_erc_matrix(4).unwrap();
        let y = DVector::from_element(4, 1.0);
        assert!(matches!(solve_dantzig_orthonormal(&x, &y, 1.0, 1.0), Err(Error::NotOrthonormal(_))));
        let v = 0.8;
        let skew = DesignMatrix::from_row_slice(2, 2, &[1.0, v, 0.0, 0.6]).unwrap();
        assert!(solve_dantzig_orthonormal(&skew, &DVector::from_element(2, 1.0), 1.0, 1.0).is_err());
    }

    /// Per coordinate: the point of `[z_j - t, z_j + t]` nearest zero.
    fn interval_projection(z: f64, t: f64) -> f64 {
        let (lo, hi) = (z - t, z + t);
        if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            hi
        } else {
            0.0
        }
    }

    #[test]
    fn random_orthonormal_matches_interval_oracle_and_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let raw = DMatrix::from_fn(8, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = DesignMatrix::with_unit_columns(raw.qr().q()).unwrap();
            let y = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
            let (sigma, gamma3) = (0.2, 3.0);
            let r = solve_dantzig_orthonormal(&x, &y, sigma, gamma3).unwrap();
            let z = x.correlate(&y);
            for j in 0..8 {
                assert_close!(r.estimate[j], interval_projection(z[j], sigma * gamma3), 1e-12);
            }
            let slack = x.correlate(&(&y - x.entries() * &r.estimate)).amax();
            assert!(slack <= sigma * gamma3 + 1e-12);
        }
    }
}
