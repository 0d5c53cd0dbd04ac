//! Linearized optical-cavity quadrature model, detuning, integral
//! augmentation and the anti-aliasing filter.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::linsys::{series, StateSpace};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Coupling rates and linearization point of the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityParams {
    /// Input-coupler rate (rad/s).
    pub kappa0: f64,
    /// Second mirror rate (rad/s).
    pub kappa1: f64,
    /// Loss rate (rad/s).
    pub kappa_l: f64,
    /// Steady-state intracavity amplitude at zero detuning.
    pub alpha: f64,
    /// Homodyne local-oscillator phase (rad).
    pub phi: f64,
    /// Homodyne transimpedance gain.
    pub k2: f64,
    /// Coherent drive amplitude (real).
    pub beta: f64,
}

impl Default for CavityParams {
    /// Demo values with κ/2 = 2π·10⁵ rad/s. Only κ is loosely anchored to
    /// an experiment; the remaining values are free.
    fn default() -> Self {
        let kappa = 4.0 * PI * 1e5;
        Self {
            kappa0: 0.5 * kappa,
            kappa1: 0.3 * kappa,
            kappa_l: 0.2 * kappa,
            alpha: 1.0,
            phi: PI / 2.0,
            k2: 1.0,
            beta: 1.0,
        }
    }
}

impl CavityParams {
    pub fn kappa(&self) -> f64 {
        self.kappa0 + self.kappa1 + self.kappa_l
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa0", self.kappa0), ("kappa1", self.kappa1), ("kappa_l", self.kappa_l)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("phi", self.phi), ("k2", self.k2), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Corner of the Δ→z low-pass, κ/2 in rad/s.
    pub fn corner_rad_s(&self) -> f64 {
        0.5 * self.kappa()
    }

    /// Closed-form Δ→z DC gain `4 α k₂ √κ₀ sin φ / κ`.
    pub fn detuning_dc_gain(&self) -> f64 {
        4.0 * self.alpha * self.k2 * self.kappa0.sqrt() * self.phi.sin() / self.kappa()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningParams {
    /// Longitudinal mode number.
    pub q: u64,
    pub n_index: f64,
    /// Cavity length (m).
    pub length: f64,
    /// Laser angular frequency (rad/s).
    pub omega_l: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

/// Δ = q·2πc/(nL) − ω_L.
pub fn detuning(p: &DetuningParams) -> Result<f64> {
    if p.q < 1 || !(p.length > 0.0) || !(p.n_index > 0.0) {
        return Err(Error::InvalidParam("detuning needs q >= 1, L > 0, n > 0".into()));
    }
    Ok(p.q as f64 * 2.0 * PI * p.c / (p.n_index * p.length) - p.omega_l)
}

pub const CAVITY_INPUTS: [&str; 8] = ["delta", "q0", "p0", "q1", "p1", "qL", "pL", "w2"];
pub const CAVITY_OUTPUTS: [&str; 2] = ["z", "y"];

/// Two-state quadrature model with state (q̃, p̃).
///
/// Inputs: detuning Δ, the six noise quadratures, and the electronic noise
/// w₂. Outputs: noiseless `z` and measured `y = z + k₂ q₀ + w₂`.
pub fn build_cavity_model(p: &CavityParams) -> Result<StateSpace> {
    p.validate()?;
    let half = 0.5 * p.kappa();
    let (s, c) = p.phi.sin_cos();
    let a = Mat::from_row_slice(2, 2, &[-half, 0.0, 0.0, -half]);
    let (r0, r1, rl) = (p.kappa0.sqrt(), p.kappa1.sqrt(), p.kappa_l.sqrt());
    #[rustfmt::skip]
    let b = Mat::from_row_slice(2, 8, &[
        0.0,           -r0 * c,  r0 * s, -r1, 0.0, -rl, 0.0, 0.0,
        2.0 * p.alpha, -r0 * s, -r0 * c, 0.0, -r1, 0.0, -rl, 0.0,
    ]);
    let g = p.k2 * r0;
    let cm = Mat::from_row_slice(2, 2, &[g * c, g * s, g * c, g * s]);
    let mut d = Mat::zeros(2, 8);
    d[(1, 1)] = p.k2;
    d[(1, 7)] = 1.0;
    StateSpace::new(a, b, cm, d)?.relabel(&CAVITY_INPUTS, &CAVITY_OUTPUTS)
}

/// Plant augmented with the integral of its regulated output.
#[derive(Debug, Clone)]
pub struct AugmentedPlant {
    /// State `[x; ∫z]`, inputs `(u, w1)`, outputs `(y1, y2)`.
    pub model: StateSpace,
    pub plant_order: usize,
}

impl AugmentedPlant {
    pub fn a(&self) -> &Mat {
        self.model.a()
    }

    /// Control column B̃ (w₁ enters through the same column).
    pub fn b(&self) -> Mat {
        self.model.b().columns(0, 1).into_owned()
    }

    pub fn c(&self) -> &Mat {
        self.model.c()
    }

    pub fn order(&self) -> usize {
        self.model.order()
    }

    /// Control-input-only view `P̃(s) = C̃ (sI − Ã)⁻¹ B̃`.
    pub fn control_model(&self) -> StateSpace {
        self.model.select_inputs(&[0]).expect("augmented plant has a control input")
    }
}

/// Build Ã = [[A,0],[C_z,0]], B̃ = [B_u;0], C̃ = [[C_z,0],[0,1]].
pub fn augment_integrator(plant: &StateSpace, u_index: usize, z_index: usize) -> Result<AugmentedPlant> {
    if u_index >= plant.inputs() || z_index >= plant.outputs() {
        return Err(Error::Dimension("augment_integrator: channel index out of range".into()));
    }
    let dz = plant.d()[(z_index, u_index)];
    if dz != 0.0 {
        return Err(Error::InvalidParam(format!(
            "integral augmentation needs a strictly proper u->z path (D = {dz:e})"
        )));
    }
    let n = plant.order();
    let cz = plant.c().row(z_index).into_owned();
    let mut a = Mat::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(plant.a());
    a.view_mut((n, 0), (1, n)).copy_from(&cz);
    let mut b = Mat::zeros(n + 1, 2);
    b.view_mut((0, 0), (n, 1)).copy_from(&plant.b().column(u_index));
    b.view_mut((0, 1), (n, 1)).copy_from(&plant.b().column(u_index));
    let mut c = Mat::zeros(2, n + 1);
    c.view_mut((0, 0), (1, n)).copy_from(&cz);
    c[(1, n)] = 1.0;
    let model = StateSpace::new(a, b, c, Mat::zeros(2, 2))?.relabel(&["u", "w1"], &["y1", "y2"])?;
    Ok(AugmentedPlant { model, plant_order: n })
}

/// Butterworth low-pass of the given order and −3 dB corner, realized as a
/// cascade of unity-DC-gain first/second-order sections.
pub fn antialias_filter(order: usize, corner_hz: f64) -> Result<StateSpace> {
    if order == 0 || !(corner_hz > 0.0) || !corner_hz.is_finite() {
        return Err(Error::InvalidParam("filter order must be >= 1 and corner > 0".into()));
    }
    let wc = 2.0 * PI * corner_hz;
    let mut sections = Vec::new();
    for k in 0..order / 2 {
        // Pole angle measured from the negative real axis.
        let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
        let zeta = theta.cos();
        let a = Mat::from_row_slice(2, 2, &[0.0, wc, -wc, -2.0 * zeta * wc]);
        let b = Mat::from_row_slice(2, 1, &[0.0, wc]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        sections.push(StateSpace::siso(a, b, c, 0.0)?);
    }
    if order % 2 == 1 {
        sections.push(StateSpace::siso(
            Mat::from_element(1, 1, -wc),
            Mat::from_element(1, 1, wc),
            Mat::from_element(1, 1, 1.0),
            0.0,
        )?);
    }
    let mut filt = sections[0].clone();
    for s in &sections[1..] {
        filt = series(&filt, s)?;
    }
    filt.relabel(&["in"], &["out"])
}
