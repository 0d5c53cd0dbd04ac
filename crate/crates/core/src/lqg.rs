//! Integral LQG synthesis.
//!
//! Controllers are stored as negative-feedback compensators: the control
//! law is `u = −K(s) ỹ` with `K(s) = −F (sI − Ã + KC̃ − B̃F)⁻¹ K`, so the
//! usual loop formulas (`L = K P̃`, `S = (I + P̃K)⁻¹`) apply unchanged.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{augment_integrator, AugmentedPlant};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::linsys::{feedback_path, StateSpace};
use crate::riccati::{solve_care, solve_filter_care, CareSolution};

/// Tuning knobs of the integral LQG design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignParams {
    /// Process-noise standard deviation on w₁.
    pub eps1: f64,
    /// Measurement-noise standard deviation on y₁.
    pub eps2: f64,
    /// Noise standard deviation on the integral channel y₂.
    pub eps3: f64,
    /// Control weight.
    pub r: f64,
    /// Weight on the integral of z.
    pub q_bar: f64,
    /// Weight on z itself.
    pub z_weight: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self { eps1: 5e-2, eps2: 500.0, eps3: 3e-4, r: 1e3, q_bar: 1e6, z_weight: 1.0 }
    }
}

impl DesignParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("r", self.r),
            ("q_bar", self.q_bar),
            ("z_weight", self.z_weight),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("design parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Weights {
    pub q: Mat,
    pub r: Mat,
    pub v1: Mat,
    pub v2: Mat,
}

/// Q̃ = C̃ᵀ diag(z_weight, q̄) C̃, R = r, V₁ = ε₁² B̃B̃ᵀ, V₂ = diag(ε₂², ε₃²).
pub fn build_weights(plant: &AugmentedPlant, dp: &DesignParams) -> Result<Weights> {
    dp.validate()?;
    let c = plant.c();
    let b = plant.b();
    let w = Mat::from_diagonal(&nalgebra::dvector![dp.z_weight, dp.q_bar]);
    Ok(Weights {
        q: linalg::symmetrize(&(c.transpose() * w * c)),
        r: Mat::from_element(1, 1, dp.r),
        v1: &b * b.transpose() * dp.eps1.powi(2),
        v2: Mat::from_diagonal(&nalgebra::dvector![dp.eps2.powi(2), dp.eps3.powi(2)]),
    })
}

/// F = −R⁻¹ B̃ᵀ X.
pub fn lqr_gain(care: &CareSolution, b: &Mat, r: &Mat) -> Result<Mat> {
    let bx = b.transpose() * &care.x;
    let f = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParam("R is not positive definite".into()))?
        .solve(&bx);
    Ok(-f)
}

/// K = P C̃ᵀ V₂⁻¹.
pub fn kalman_gain(care: &CareSolution, c: &Mat, v2: &Mat) -> Result<Mat> {
    let chol = v2.clone().cholesky().ok_or_else(|| Error::InvalidParam("V2 is singular or indefinite".into()))?;
    // K V₂ = P Cᵀ  <=>  V₂ Kᵀ = C P
    let kt = chol.solve(&(c * &care.x));
    Ok(kt.transpose())
}

/// Negative-feedback compensator from the estimator/regulator parts:
/// A = Ã − KC̃ + B̃F, B = K, C = −F, D = 0.
pub fn controller_from_parts(a: &Mat, b: &Mat, c: &Mat, f: &Mat, k: &Mat) -> Result<StateSpace> {
    let ac = a - k * c + b * f;
    StateSpace::new(ac, k.clone(), -f, Mat::zeros(f.nrows(), k.ncols()))?.relabel(&["y1", "y2"], &["u"])
}

#[derive(Debug, Clone)]
pub struct ControllerRealization {
    /// Inputs (y₁, y₂), output u; control law `u = −model(ỹ)`.
    pub model: StateSpace,
    pub f: Mat,
    pub k: Mat,
    pub regulator: CareSolution,
    pub estimator: CareSolution,
    pub plant: AugmentedPlant,
    pub weights: Weights,
}

impl ControllerRealization {
    pub fn order(&self) -> usize {
        self.model.order()
    }

    /// Closed loop of the augmented plant (control input only) with the
    /// controller; input is an additive disturbance at u.
    pub fn closed_loop(&self) -> Result<StateSpace> {
        feedback_path(&self.plant.control_model(), &self.model, -1.0)
    }

    pub fn regulator_spectrum(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&(self.plant.a() + self.plant.b() * &self.f))
    }

    pub fn estimator_spectrum(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&(self.plant.a() - &self.k * self.plant.c()))
    }

    /// Rebuild the controller from (Ã, B̃, C̃, F, K).
    pub fn reconstruct(&self) -> Result<StateSpace> {
        controller_from_parts(self.plant.a(), &self.plant.b(), self.plant.c(), &self.f, &self.k)
    }
}

/// Controller seen from the measured output alone, with the integral
/// channel synthesized by an integrator front end: `y₂ = ∫y₁`.
pub fn with_integrator_front_end(controller: &StateSpace) -> Result<StateSpace> {
    if controller.inputs() != 2 {
        return Err(Error::Dimension("controller must take (y1, y2)".into()));
    }
    let n = controller.order();
    let mut a = Mat::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(controller.a());
    a.view_mut((0, n), (n, 1)).copy_from(&controller.b().column(1));
    let mut b = Mat::zeros(n + 1, 1);
    b.view_mut((0, 0), (n, 1)).copy_from(&controller.b().column(0));
    b[(n, 0)] = 1.0;
    let mut c = Mat::zeros(controller.outputs(), n + 1);
    c.view_mut((0, 0), (controller.outputs(), n)).copy_from(controller.c());
    c.view_mut((0, n), (controller.outputs(), 1)).copy_from(&controller.d().column(1));
    let d = controller.d().columns(0, 1).into_owned();
    StateSpace::new(a, b, c, d)?.relabel(&["y"], &["u"])
}

/// Full integral LQG synthesis for a plant whose input 0 is the control
/// `u` and output 0 is the regulated/measured output.
pub fn design_integral_lqg(plant: &StateSpace, dp: &DesignParams) -> Result<ControllerRealization> {
    dp.validate()?;
    let u_index = plant.input_index("u").unwrap_or(0);
    let z_index = plant.output_index("z").or_else(|| plant.output_index("y")).unwrap_or(0);
    let aug = augment_integrator(plant, u_index, z_index)?;
    let w = build_weights(&aug, dp)?;
    let b = aug.b();
    let regulator = solve_care(aug.a(), &b, &w.q, &w.r)?;
    let estimator = solve_filter_care(aug.a(), aug.c(), &w.v1, &w.v2)?;
    let f = lqr_gain(&regulator, &b, &w.r)?;
    let k = kalman_gain(&estimator, aug.c(), &w.v2)?;
    let model = controller_from_parts(aug.a(), &b, aug.c(), &f, &k)?;
    let real = ControllerRealization { model, f, k, regulator, estimator, plant: aug, weights: w };
    if !real.closed_loop()?.is_stable()? {
        return Err(Error::Unstable("closed loop of the synthesized controller".into()));
    }
    Ok(real)
}
