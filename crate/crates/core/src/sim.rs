//! Seeded closed-loop simulation of a sampled controller around a
//! continuous plant, and step-response metrics.
//!
//! Random streams: one ChaCha20 generator per noise channel, all keyed by
//! the same seed and separated by stream id (1 = process noise w₁,
//! 2 = sensor noise w₂, 3 = integral-channel noise w₃).

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretize::discretize_zoh;
use crate::error::{Error, Result};
use crate::linsys::{DiscreteStateSpace, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Process noise at the plant input.
    pub eps1: f64,
    /// Sensor noise on the measured output, per controller sample.
    pub eps2: f64,
    /// Noise on the synthesized integral channel, per controller sample.
    pub eps3: f64,
    pub seed: u64,
    /// Treat `eps1` as the intensity of continuous white noise: each plant
    /// sub-step draws with stddev `eps1/√h`. When false `eps1` is used per
    /// sub-step as is.
    pub continuous_process_noise: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { eps1: 0.0, eps2: 0.0, eps3: 0.0, seed: 0, continuous_process_noise: true }
    }
}

impl NoiseSpec {
    pub fn silent() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("eps3", self.eps3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("noise stddev {name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where the excitation enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    /// Added to the control signal at the plant input (a disturbance).
    #[default]
    PlantInput,
    /// Subtracted from the measurement before the controller (a setpoint).
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    Zero,
    Step { amplitude: f64, t0: f64 },
    /// One value per controller sample; held zero past the end.
    Samples(Vec<f64>),
}

impl Excitation {
    fn at(&self, k: usize, t: f64) -> f64 {
        match self {
            Excitation::Zero => 0.0,
            Excitation::Step { amplitude, t0 } => {
                if t + 1e-12 * t.abs().max(1.0) >= *t0 {
                    *amplitude
                } else {
                    0.0
                }
            }
            Excitation::Samples(v) => v.get(k).copied().unwrap_or(0.0),
        }
    }
}

/// Continuous plant pre-discretized at the sub-step `h = Ts / substeps`.
#[derive(Debug, Clone)]
pub struct SampledPlant {
    model: DiscreteStateSpace,
    substeps: usize,
    z_index: usize,
    y_index: usize,
}

impl SampledPlant {
    /// The plant must have a single input. Outputs labelled `z` and `y`
    /// are used as regulated and measured outputs; a single-output plant
    /// uses its output for both.
    pub fn from_continuous(plant: &StateSpace, ts: f64, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::InvalidParam("substeps must be at least 1".into()));
        }
        if !(ts > 0.0) {
            return Err(Error::InvalidParam(format!("sample period must be positive, got {ts}")));
        }
        let model = discretize_zoh(plant, ts / substeps as f64)?;
        Self::build(model, substeps)
    }

    /// Plant already sampled at the controller period.
    pub fn from_discrete(plant: DiscreteStateSpace) -> Result<Self> {
        Self::build(plant, 1)
    }

    fn build(model: DiscreteStateSpace, substeps: usize) -> Result<Self> {
        if model.inputs() != 1 {
            return Err(Error::Dimension(format!("plant must have one input, has {}", model.inputs())));
        }
        let find = |l: &str| model.output_labels().iter().position(|x| x == l);
        let (z_index, y_index) = match model.outputs() {
            1 => (0, 0),
            _ => (find("z").unwrap_or(0), find("y").unwrap_or(model.outputs() - 1)),
        };
        Ok(Self { model, substeps, z_index, y_index })
    }

    pub fn controller_period(&self) -> f64 {
        self.model.ts() * self.substeps as f64
    }

    pub fn substep(&self) -> f64 {
        self.model.ts()
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub duration_s: f64,
    pub injection: Injection,
    pub excitation: Excitation,
    /// Keep the raw noise draws in the trace.
    pub keep_noise: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoiseDraws {
    /// First process-noise draw of each controller period.
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub ts: f64,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// Measured output (includes sensor noise).
    pub y: Vec<f64>,
    /// Regulated plant output.
    pub z: Vec<f64>,
    pub noise: Option<NoiseDraws>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Fixed-step closed loop. Each controller period:
/// 1. sample the plant: `z`, `y₁ = y + w₂`;
/// 2. a two-input controller also receives `y₂ = Σ trapezoid(y₁)·Ts + w₃`;
/// 3. `u = −K(ỹ)` (negative-feedback controller), held over the period;
/// 4. the plant integrates `u + r + w₁` over `substeps` ZOH sub-steps.
pub fn simulate_closed_loop(
    plant: &SampledPlant,
    controller: &DiscreteStateSpace,
    noise: &NoiseSpec,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    noise.validate()?;
    let ts = plant.controller_period();
    if (controller.ts() - ts).abs() > 1e-9 * ts {
        return Err(Error::InvalidParam(format!(
            "controller period {} s differs from plant period {} s",
            controller.ts(),
            ts
        )));
    }
    if controller.outputs() != 1 || !(1..=2).contains(&controller.inputs()) {
        return Err(Error::Dimension(format!(
            "controller must map 1 or 2 measurements to 1 control, is {}x{}",
            controller.outputs(),
            controller.inputs()
        )));
    }
    if !(cfg.duration_s >= 0.0) || !cfg.duration_s.is_finite() {
        return Err(Error::InvalidParam(format!("duration must be nonnegative, got {}", cfg.duration_s)));
    }
    let steps = (cfg.duration_s / ts).round() as usize + 1;
    let h = plant.substep();
    let p = &plant.model;
    let two_channel = controller.inputs() == 2;

    let (mut r1, mut r2, mut r3) = (stream(noise.seed, 1), stream(noise.seed, 2), stream(noise.seed, 3));
    let s1 = if noise.continuous_process_noise { noise.eps1 / h.sqrt() } else { noise.eps1 };
    let draw = |rng: &mut ChaCha20Rng, s: f64| -> f64 {
        if s == 0.0 {
            0.0
        } else {
            let v: f64 = StandardNormal.sample(rng);
            s * v
        }
    };

    let mut x = DVector::zeros(p.order());
    let mut xc = DVector::zeros(controller.order());
    let mut acc = 0.0;
    let mut prev_y1 = 0.0;
    let mut trace = SimTrace { ts, ..Default::default() };
    for v in [&mut trace.t, &mut trace.r, &mut trace.u, &mut trace.y, &mut trace.z] {
        v.reserve(steps);
    }
    let mut draws = cfg.keep_noise.then(NoiseDraws::default);
    let mut u_held = 0.0;
    let (cp, dp) = (p.c(), p.d());

    for k in 0..steps {
        let t = k as f64 * ts;
        let r = cfg.excitation.at(k, t);
        let z = (cp.row(plant.z_index) * &x)[0] + dp[(plant.z_index, 0)] * u_held;
        let y = (cp.row(plant.y_index) * &x)[0] + dp[(plant.y_index, 0)] * u_held;
        let w2 = draw(&mut r2, noise.eps2);
        let w3 = draw(&mut r3, noise.eps3);
        let mut y1 = y + w2;
        if cfg.injection == Injection::Reference {
            y1 -= r;
        }
        if k > 0 {
            acc += 0.5 * ts * (y1 + prev_y1);
        }
        prev_y1 = y1;
        let inputs = if two_channel { DVector::from_vec(vec![y1, acc + w3]) } else { DVector::from_vec(vec![y1]) };
        let (xc_next, out) = controller.step(&xc, &inputs);
        let u = -out[0];
        xc = xc_next;
        let drive = if cfg.injection == Injection::PlantInput { u + r } else { u };
        let mut first_w1 = 0.0;
        for j in 0..plant.substeps {
            let w1 = draw(&mut r1, s1);
            if j == 0 {
                first_w1 = w1;
            }
            x = p.a() * &x + p.b().column(0) * (drive + w1);
        }
        u_held = u;
        if !u.is_finite() || !y1.is_finite() || x.iter().any(|v| !v.is_finite()) || xc.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        trace.t.push(t);
        trace.r.push(r);
        trace.u.push(u);
        trace.y.push(y1);
        trace.z.push(z);
        if let Some(d) = draws.as_mut() {
            d.w1.push(first_w1);
            d.w2.push(w2);
            d.w3.push(w3);
        }
    }
    trace.noise = draws;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub rise_time_s: Option<f64>,
    pub settling_time_2pct_s: Option<f64>,
    pub overshoot_pct: f64,
    pub steady_state_value: f64,
    pub peak_value: f64,
    pub peak_time_s: Option<f64>,
    /// True when the response returns to its initial level (disturbance
    /// rejection); the metrics then refer to the peak excursion.
    pub regulation: bool,
}

/// Step metrics on `trace.y`, timed from the first change of `r` (or the
/// start of the trace).
///
/// For a response that moves to a new level the usual definitions apply
/// with the amplitude `y_ss − y₀`. A response that returns to its initial
/// level (disturbance rejection) uses the peak excursion as the amplitude:
/// rise time runs from 10 % to 90 % of the peak, the 2 % band is 2 % of
/// the peak, and overshoot is the excursion past the final value in the
/// opposite direction.
pub fn step_response_metrics(trace: &SimTrace) -> StepMetrics {
    step_metrics_of(&trace.t, &trace.r, &trace.y)
}

pub fn step_metrics_of(t: &[f64], r: &[f64], y: &[f64]) -> StepMetrics {
    let n = y.len();
    if n == 0 {
        return StepMetrics {
            rise_time_s: None,
            settling_time_2pct_s: None,
            overshoot_pct: 0.0,
            steady_state_value: 0.0,
            peak_value: 0.0,
            peak_time_s: None,
            regulation: true,
        };
    }
    let onset = r.iter().position(|&v| v != r[0]).unwrap_or(0);
    let t0 = t[onset];
    let y0 = y[..=onset].iter().sum::<f64>() / (onset + 1) as f64;
    let tail = (n / 20).max(1);
    let y_ss = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let (peak_idx, peak_dev) = y[onset..]
        .iter()
        .enumerate()
        .map(|(i, v)| (i + onset, v - y0))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    let moved = y_ss - y0;
    let regulation = moved.abs() < 0.01 * peak_dev.abs() || peak_dev == 0.0;
    let amp = if regulation { peak_dev } else { moved };
    let band = 0.02 * amp.abs();

    let crossing = |frac: f64| -> Option<f64> {
        let level = frac * amp;
        y[onset..].iter().position(|v| (v - y0) * amp.signum() >= level.abs()).map(|i| t[i + onset] - t0)
    };
    let rise_time_s = if amp == 0.0 {
        None
    } else {
        match (crossing(0.1), crossing(0.9)) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    };
    let last_out = y[onset..].iter().rposition(|v| (v - y_ss).abs() > band);
    let settling_time_2pct_s = match last_out {
        None => Some(0.0),
        Some(i) if i + onset + 1 < n => Some(t[i + onset + 1] - t0),
        Some(_) => None,
    };
    let overshoot_pct = if amp == 0.0 {
        0.0
    } else if regulation {
        let past = y[peak_idx..].iter().map(|v| (y_ss - v) * amp.signum()).fold(0.0, f64::max);
        100.0 * past / amp.abs()
    } else {
        let beyond = y[onset..].iter().map(|v| (v - y_ss) * amp.signum()).fold(0.0, f64::max);
        100.0 * beyond / amp.abs()
    };
    StepMetrics {
        rise_time_s,
        settling_time_2pct_s,
        overshoot_pct,
        steady_state_value: y_ss,
        peak_value: y[peak_idx],
        peak_time_s: (amp != 0.0).then(|| t[peak_idx] - t0),
        regulation,
    }
}
