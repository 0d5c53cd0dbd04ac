//! Synthetic stand-in for the measured piezo/cavity plant: three lightly
//! damped structural modes near 520, 2100 and 5000 Hz.

use std::f64::consts::PI;

use crate::error::Result;
use crate::linalg::Mat;
use crate::linsys::{logspace, FrequencyResponse, StateSpace};

/// (frequency Hz, damping ratio, modal residue)
pub const MODES: [(f64, f64, f64); 3] = [(520.0, 0.04, 1.0), (2100.0, 0.02, 0.35), (5000.0, 0.015, 0.15)];

/// Grid used for the shipped dataset.
pub const GRID_LO_HZ: f64 = 10.0;
pub const GRID_HI_HZ: f64 = 1.0e4;
pub const GRID_POINTS: usize = 400;

/// Sum-of-modes plant normalized to unit DC gain, input `u`, output `y`.
pub fn piezo_plant() -> StateSpace {
    let total: f64 = MODES.iter().map(|m| m.2).sum();
    let n = 2 * MODES.len();
    let mut a = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, 1);
    let mut c = Mat::zeros(1, n);
    for (i, &(f, zeta, r)) in MODES.iter().enumerate() {
        let w = 2.0 * PI * f;
        let k = 2 * i;
        a[(k, k + 1)] = w;
        a[(k + 1, k)] = -w;
        a[(k + 1, k + 1)] = -2.0 * zeta * w;
        b[(k + 1, 0)] = w;
        c[(0, k)] = r / total;
    }
    StateSpace::new(a, b, c, Mat::zeros(1, 1))
        .and_then(|g| g.relabel(&["u"], &["y"]))
        .expect("synthetic plant dims")
}

pub fn grid() -> Vec<f64> {
    logspace(GRID_LO_HZ, GRID_HI_HZ, GRID_POINTS)
}

/// Noise-free plant response on the shipped grid.
pub fn plant_dataset() -> Result<FrequencyResponse> {
    piezo_plant().frequency_response(&grid())
}
