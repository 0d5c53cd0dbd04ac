//! Browser bindings for three interactive views: the cavity's detuning
//! response, margins of a textbook loop, and an integral LQG step
//! response on the synthetic piezo plant.
//!
//! Every export returns a JSON string; the plain `*_json` functions hold
//! the logic so they can be tested natively.

use std::f64::consts::PI;

use cavlock::analysis::{self, MarginReport};
use cavlock::cavity::{build_cavity_model, CavityParams};
use cavlock::discretize::discretize_zoh;
use cavlock::linsys::logspace;
use cavlock::lqg::{design_integral_lqg, with_integrator_front_end, DesignParams};
use cavlock::sim::{self, Excitation, Injection, NoiseSpec, SampledPlant, SimConfig, StepMetrics};
use cavlock::{synthetic, Error, Result, StateSpace};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const TS: f64 = 2e-5;
const TRACE_POINTS: usize = 500;

#[derive(Debug, Serialize)]
struct Bode {
    freq_hz: Vec<f64>,
    mag_db: Vec<f64>,
    phase_deg: Vec<f64>,
}

impl Bode {
    fn of(model: &StateSpace, freqs: &[f64]) -> Result<Self> {
        let b = analysis::bode(model, freqs)?;
        Ok(Self { freq_hz: freqs.to_vec(), mag_db: b.mag_db, phase_deg: b.phase_deg })
    }
}

#[derive(Debug, Serialize)]
struct CavityView {
    corner_hz: f64,
    dc_gain: f64,
    bode: Bode,
}

#[derive(Debug, Serialize)]
struct LoopView {
    margins: MarginReport,
    bode: Bode,
}

#[derive(Debug, Serialize)]
struct StepView {
    margins: MarginReport,
    metrics: StepMetrics,
    t_s: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Format(e.to_string()))
}

/// Δ→z response of a cavity with total linewidth `kappa_hz` (κ/2π) and
/// homodyne phase `phi_deg`; the coupling split is kept at 5:3:2.
pub fn cavity_json(kappa_hz: f64, phi_deg: f64) -> Result<String> {
    let kappa = 2.0 * PI * kappa_hz;
    let p = CavityParams {
        kappa0: 0.5 * kappa,
        kappa1: 0.3 * kappa,
        kappa_l: 0.2 * kappa,
        phi: phi_deg.to_radians(),
        ..CavityParams::default()
    };
    let model = build_cavity_model(&p)?;
    let detuning = model.select_inputs(&[0])?.select_outputs(&[0])?;
    let corner_hz = p.corner_rad_s() / (2.0 * PI);
    let bode = Bode::of(&detuning, &logspace(corner_hz * 1e-3, corner_hz * 1e3, 300))?;
    to_json(&CavityView { corner_hz, dc_gain: p.detuning_dc_gain(), bode })
}

fn coefficients(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidParam(format!("not a number: {s:?}"))))
        .collect()
}

/// Margins and Bode data of the loop `num(s)/den(s)`, coefficients in
/// descending powers separated by commas or spaces.
pub fn loop_json(num: &str, den: &str) -> Result<String> {
    let l = StateSpace::from_transfer_function(&coefficients(num)?, &coefficients(den)?)?;
    let margins = analysis::margins(&l)?;
    let poles: Vec<f64> = l.poles()?.iter().map(|p| p.norm()).filter(|&w| w > 1e-9).collect();
    let lo = poles.iter().copied().fold(1.0, f64::min) * 1e-2 / (2.0 * PI);
    let hi = poles.iter().copied().fold(1.0, f64::max) * 1e2 / (2.0 * PI);
    to_json(&LoopView { margins, bode: Bode::of(&l, &logspace(lo, hi, 400))? })
}

/// Design with control weight `r` and integral weight `q_bar`, sample the
/// controller (ZOH, 50 kHz) and reject a step disturbance of 0.1 at the
/// plant input.
pub fn step_json(r: f64, q_bar: f64, duration_s: f64) -> Result<String> {
    if !(duration_s > 0.0 && duration_s <= 2.0) {
        return Err(Error::InvalidParam(format!("duration must lie in (0, 2] s, got {duration_s}")));
    }
    let plant = synthetic::piezo_plant();
    let dp = DesignParams { r, q_bar, ..DesignParams::default() };
    let k = design_integral_lqg(&plant, &dp)?.model;
    let margins = analysis::margins(&analysis::loop_gain(&plant, &with_integrator_front_end(&k)?)?)?;
    let kd = discretize_zoh(&k, TS)?;
    let cfg = SimConfig {
        duration_s,
        injection: Injection::PlantInput,
        excitation: Excitation::Step { amplitude: 0.1, t0: 0.0 },
        keep_noise: false,
    };
    let trace = sim::simulate_closed_loop(&SampledPlant::from_continuous(&plant, TS, 4)?, &kd, &NoiseSpec::silent(), &cfg)?;
    let metrics = sim::step_response_metrics(&trace);
    let every = trace.len().div_ceil(TRACE_POINTS).max(1);
    let pick = |v: &[f64]| v.iter().step_by(every).copied().collect::<Vec<_>>();
    to_json(&StepView { margins, metrics, t_s: pick(&trace.t), y: pick(&trace.y), u: pick(&trace.u) })
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn cavity_response(kappa_hz: f64, phi_deg: f64) -> std::result::Result<String, JsError> {
    js(cavity_json(kappa_hz, phi_deg))
}

#[wasm_bindgen]
pub fn loop_margins(num: &str, den: &str) -> std::result::Result<String, JsError> {
    js(loop_json(num, den))
}

#[wasm_bindgen]
pub fn lqg_step(r: f64, q_bar: f64, duration_s: f64) -> std::result::Result<String, JsError> {
    js(step_json(r, q_bar, duration_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn cavity_view_has_half_linewidth_corner() {
        let v = parse(&cavity_json(2e5, 90.0).unwrap());
        assert_relative_eq!(v["corner_hz"].as_f64().unwrap(), 1e5, max_relative = 1e-12);
        let mag: Vec<f64> = v["bode"]["mag_db"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let dc_db = 20.0 * v["dc_gain"].as_f64().unwrap().log10();
        assert_relative_eq!(mag[0], dc_db, epsilon = 1e-4);
        assert!(mag[mag.len() - 1] < dc_db - 55.0);
    }

    #[test]
    fn textbook_loop() {
        let v = parse(&loop_json("1", "1, 2, 1, 0").unwrap());
        assert_relative_eq!(v["margins"]["gain_margin_db"].as_f64().unwrap(), 20.0 * 2f64.log10(), epsilon = 1e-6);
        assert!(loop_json("1", "1 x").is_err());
        assert!(loop_json("1,0,0", "1,1").is_err());
    }

    #[test]
    fn step_is_rejected() {
        let v = parse(&step_json(1e3, 1e6, 0.5).unwrap());
        let y: Vec<f64> = v["y"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!(y.len() <= TRACE_POINTS + 1);
        let peak = y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(y.last().unwrap().abs() < 1e-2 * peak, "{} vs peak {peak}", y.last().unwrap());
        assert!(v["margins"]["phase_margin_deg"].as_f64().unwrap() > 30.0);
        assert!(step_json(1e3, 1e6, 0.0).is_err());
        assert!(step_json(-1.0, 1e6, 0.1).is_err());
    }
}
