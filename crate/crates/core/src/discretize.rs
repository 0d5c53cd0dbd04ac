//! Zero-order-hold and bilinear discretization.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::linsys::{DiscreteStateSpace, StateSpace};

/// Exact discretization for piecewise-constant inputs. `Ad`, `Bd` come from
/// the exponential of the augmented matrix `[[A, B], [0, 0]]·Ts`.
pub fn discretize_zoh(model: &StateSpace, ts: f64) -> Result<DiscreteStateSpace> {
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidParam(format!("sample period must be positive, got {ts}")));
    }
    let (n, m) = (model.order(), model.inputs());
    let mut big = Mat::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(model.a());
    big.view_mut((0, n), (n, m)).copy_from(model.b());
    big *= ts;
    let norm = big.norm();
    if !norm.is_finite() || norm > 700.0 * (n + m).max(1) as f64 {
        return Err(Error::Overflow(format!("‖[A B]·Ts‖_F = {norm:.3e}")));
    }
    let e = big.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("exp of augmented matrix overflowed (‖·‖_F = {norm:.3e})")));
    }
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    Ok(DiscreteStateSpace::new(ad, bd, model.c().clone(), model.d().clone(), ts)?.with_labels_of(model))
}

/// Map `s = k (z − 1)/(z + 1)` applied to a continuous model, in the
/// balanced form with √(2k) split between B and C.
pub fn bilinear_to_discrete(model: &StateSpace, k: f64) -> Result<(Mat, Mat, Mat, Mat)> {
    let n = model.order();
    let lhs = Mat::identity(n, n) * k - model.a();
    let lu = lhs.lu();
    let inv_b = lu.solve(model.b()).ok_or_else(|| Error::InvalidParam("kI - A is singular".into()))?;
    let inv_id = lu.solve(&Mat::identity(n, n)).ok_or_else(|| Error::InvalidParam("kI - A is singular".into()))?;
    let r = (2.0 * k).sqrt();
    let ad = &inv_id * (Mat::identity(n, n) * k + model.a());
    let bd = &inv_b * r;
    let cd = model.c() * &inv_id * r;
    let dd = model.d() + model.c() * &inv_b;
    Ok((ad, bd, cd, dd))
}

/// Inverse of [`bilinear_to_discrete`].
pub fn bilinear_to_continuous(ad: &Mat, bd: &Mat, cd: &Mat, dd: &Mat, k: f64) -> Result<StateSpace> {
    let n = ad.nrows();
    let plus = ad + Mat::identity(n, n);
    let lu = plus.lu();
    let inv = lu
        .solve(&Mat::identity(n, n))
        .ok_or_else(|| Error::InvalidParam("discrete model has a pole at z = -1".into()))?;
    let r = (2.0 * k).sqrt();
    let a = &inv * (ad - Mat::identity(n, n)) * k;
    let b = &inv * bd * r;
    let c = cd * &inv * r;
    let d = dd - cd * &inv * bd;
    StateSpace::new(a, b, c, d)
}

/// Tustin discretization, optionally prewarped so the discrete response
/// matches the continuous one exactly at `prewarp_hz`.
pub fn discretize_tustin(model: &StateSpace, ts: f64, prewarp_hz: Option<f64>) -> Result<DiscreteStateSpace> {
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidParam(format!("sample period must be positive, got {ts}")));
    }
    let k = match prewarp_hz {
        Some(f) => {
            let w = 2.0 * std::f64::consts::PI * f;
            if !(w > 0.0) || w * ts >= std::f64::consts::PI {
                return Err(Error::InvalidParam(format!("prewarp frequency {f} Hz must lie in (0, Nyquist)")));
            }
            w / (w * ts / 2.0).tan()
        }
        None => 2.0 / ts,
    };
    let n = model.order();
    let lhs = Mat::identity(n, n) - model.a() / k;
    if n > 0 {
        let smin = crate::linalg::singular_values(&lhs).last().copied().unwrap_or(0.0);
        if !(smin > 1e-13 * lhs.norm()) {
            return Err(Error::InvalidParam("Tustin map matrix I - A·Ts/2 is singular".into()));
        }
    }
    let (ad, bd, cd, dd) = bilinear_to_discrete(model, k)?;
    Ok(DiscreteStateSpace::new(ad, bd, cd, dd, ts)?.with_labels_of(model))
}
