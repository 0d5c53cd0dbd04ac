//! File-based pipeline stages: cavity model, identification, design,
//! reduction, discretization, loop analysis and simulation.
//!
//! Every stage reads its inputs from the config's `paths` overrides or from
//! the artifacts of the previous stage in the output directory, and writes
//! deterministic artifacts. Wall-clock information only goes to the
//! `metadata.json` sidecar.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{self, MarginReport};
use crate::cavity::{self, augment_integrator, build_cavity_model};
use crate::config::{Composition, DiscretizeMethod, PipelineConfig};
use crate::discretize::{discretize_tustin, discretize_zoh};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg;
use crate::linsys::{logspace, series, DiscreteStateSpace, FrequencyResponse, StateSpace};
use crate::lqg::{design_integral_lqg, with_integrator_front_end};
use crate::reduction::{verify_reduced, weighted_reduce};
use crate::sim::{self, Excitation, NoiseSpec, SampledPlant, SimConfig, StepMetrics};
use crate::sysid::{fit_error, identify, FitReport};

pub const CAVITY_MODEL: &str = "cavity_model.json";
pub const CAVITY_REPORT: &str = "cavity_report.json";
pub const PLANT_MODEL: &str = "plant_model.json";
pub const FIT_REPORT: &str = "fit_report.json";
pub const CONTROLLER_FULL: &str = "controller_full.json";
pub const DESIGN_REPORT: &str = "design_report.json";
pub const CONTROLLER_REDUCED: &str = "controller_reduced.json";
pub const REDUCTION_REPORT: &str = "reduction_report.json";
pub const CONTROLLER_DISCRETE: &str = "controller_discrete.json";
pub const DISCRETIZE_REPORT: &str = "discretize_report.json";
pub const LOOP_BODE: &str = "loop_bode.csv";
pub const MARGINS: &str = "margins.json";
pub const STEP_TRACE: &str = "step_trace.csv";
pub const NOISE_TRACE: &str = "noise_trace.csv";
pub const STEP_METRICS: &str = "step_metrics.json";
pub const SUMMARY: &str = "pipeline_summary.json";
pub const CONFIG_ECHO: &str = "config_resolved.toml";
/// Sidecar holding timestamps; excluded from determinism checks.
pub const METADATA: &str = "metadata.json";

const SHIPPED_DATASET: &str = include_str!("../data/piezo_plant.csv");

/// The synthetic three-resonance plant dataset shipped with the crate.
pub fn shipped_dataset() -> Result<FrequencyResponse> {
    io::frequency_from_csv(SHIPPED_DATASET, "<shipped piezo_plant.csv>")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.to_string(), pass, detail }
    }
}

/// Outcome of one stage: its verification checks and a short human
/// summary.
#[derive(Debug, Clone, Serialize)]
pub struct StageOutcome {
    pub stage: String,
    pub checks: Vec<Check>,
    pub summary: Vec<String>,
}

impl StageOutcome {
    fn new(stage: &str) -> Self {
        Self { stage: stage.to_string(), checks: Vec::new(), summary: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Resolved stage context: config plus output directory.
#[derive(Debug, Clone)]
pub struct Stages {
    pub cfg: PipelineConfig,
    pub out_dir: PathBuf,
}

fn spectrum_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    let mut v = v.to_vec();
    linalg::sort_spectrum(&mut v);
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CavityReport {
    pub kappa_rad_s: f64,
    pub corner_rad_s: f64,
    pub corner_hz: f64,
    pub detuning_dc_gain: f64,
    /// |G(iκ/2)| / |G(0)| of the Δ→z channel.
    pub corner_gain_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifyReport {
    pub composition: Composition,
    pub data_points: usize,
    pub identified_order: usize,
    pub plant_order: usize,
    pub stable: bool,
    pub poles: Vec<[f64; 2]>,
    /// Fit of the final plant against the composed data.
    pub fit: FitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub controller_order: usize,
    pub regulator_residual: f64,
    pub estimator_residual: f64,
    pub regulator_method: String,
    pub estimator_method: String,
    pub regulator_gain_norm: f64,
    pub estimator_gain_norm: f64,
    pub closed_loop_stable: bool,
    pub separation_error: f64,
    pub closed_loop_spectrum: Vec<[f64; 2]>,
    pub regulator_spectrum: Vec<[f64; 2]>,
    pub estimator_spectrum: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReduceReport {
    pub full_order: usize,
    pub reduced_order: usize,
    pub closed_loop_stable: bool,
    pub weighted_error: f64,
    pub controller_poles: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscretizeReport {
    pub method: DiscretizeMethod,
    pub ts: f64,
    pub stable: bool,
    pub compare_below_hz: f64,
    pub max_magnitude_deviation_db: f64,
    pub max_phase_deviation_deg: f64,
    /// Phase deviation left after removing the half-sample delay `ωTs/2`
    /// inherent to a held output.
    pub max_phase_deviation_without_hold_delay_deg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginsDocument {
    pub full: MarginReport,
    pub reduced: MarginReport,
    /// Sampled controller against the continuous plant, up to Nyquist.
    pub sampled: Option<MarginReport>,
    pub low_frequency_slope_db_per_decade: f64,
    /// Smallest pole magnitude of the equivalent single-input controller
    /// (integral channel synthesized from y).
    pub controller_pole_nearest_origin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub step: StepMetrics,
    pub final_y: f64,
    pub peak_abs_y: f64,
    pub noise_seed: u64,
    pub noise_rms_y: f64,
    pub noise_rms_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub pass: bool,
    pub stages: Vec<StageOutcome>,
}

impl Stages {
    pub fn new(cfg: PipelineConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self { cfg, out_dir: out_dir.into() }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn input(&self, over: &Option<PathBuf>, default_name: &str) -> PathBuf {
        over.clone().unwrap_or_else(|| self.out(default_name))
    }

    fn read_continuous(&self, path: &Path, what: &str) -> Result<StateSpace> {
        if !path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what} not found at {} (run the previous stage first)", path.display()),
            )));
        }
        io::read_model(path)?.into_continuous()
    }

    fn plant(&self) -> Result<StateSpace> {
        let path = self.input(&self.cfg.paths.plant_model, PLANT_MODEL);
        self.read_continuous(&path, "plant model")
    }

    fn full_controller(&self) -> Result<StateSpace> {
        let path = self.input(&self.cfg.paths.controller, CONTROLLER_FULL);
        self.read_continuous(&path, "controller")
    }

    fn reduced_controller(&self) -> Result<StateSpace> {
        let path = self.input(&self.cfg.paths.reduced_controller, CONTROLLER_REDUCED);
        self.read_continuous(&path, "reduced controller")
    }

    fn discrete_controller(&self) -> Result<Option<DiscreteStateSpace>> {
        let path = self.input(&self.cfg.paths.discrete_controller, CONTROLLER_DISCRETE);
        if !path.exists() {
            return Ok(None);
        }
        io::read_model(&path)?.into_discrete().map(Some)
    }

    /// Plant seen by the controller: control input to (y₁, ∫y₁).
    fn design_plant(&self) -> Result<StateSpace> {
        let plant = self.plant()?;
        let u = plant.input_index("u").unwrap_or(0);
        let y = plant.output_index("y").unwrap_or(0);
        Ok(augment_integrator(&plant, u, y)?.control_model())
    }

    pub fn cavity(&self) -> Result<StageOutcome> {
        let p = &self.cfg.cavity;
        let model = build_cavity_model(p)?;
        io::write_model(&self.out(CAVITY_MODEL), &model)?;
        let dz = model.select_inputs(&[0])?.select_outputs(&[0])?;
        let dc = dz.eval_siso(0.0)?.norm();
        let corner = p.corner_rad_s();
        let ratio = if dc > 0.0 { dz.eval_siso(corner)?.norm() / dc } else { f64::NAN };
        let report = CavityReport {
            kappa_rad_s: p.kappa(),
            corner_rad_s: corner,
            corner_hz: corner / (2.0 * PI),
            detuning_dc_gain: p.detuning_dc_gain(),
            corner_gain_ratio: ratio,
        };
        io::write_json(&self.out(CAVITY_REPORT), &report)?;
        let mut o = StageOutcome::new("cavity");
        o.summary.push(format!("corner frequency kappa/2 = {:.6e} rad/s ({:.6e} Hz)", corner, report.corner_hz));
        o.summary.push(format!("delta->z DC gain = {:.9e}", report.detuning_dc_gain));
        if dc > 0.0 {
            o.checks.push(Check::new(
                "cavity corner at kappa/2",
                (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6,
                format!("|G(i kappa/2)|/|G(0)| = {ratio:.12}"),
            ));
        }
        Ok(o)
    }

    fn frequency_data(&self) -> Result<FrequencyResponse> {
        match &self.cfg.paths.frequency_data {
            Some(p) => io::read_frequency_csv(p),
            None => shipped_dataset(),
        }
    }

    pub fn identify(&self) -> Result<StageOutcome> {
        let raw = self.frequency_data()?;
        let aa = &self.cfg.antialias;
        let sc = &self.cfg.sysid;
        let filter = match aa.mode {
            Composition::None => None,
            _ => Some(cavity::antialias_filter(aa.order, aa.corner_hz)?),
        };
        let composed = match &filter {
            Some(f) => raw.product(&f.frequency_response(raw.freqs_hz())?)?,
            None => raw.clone(),
        };
        let plant = match (aa.mode, &filter) {
            (Composition::Series, Some(f)) => {
                let (m, _) = identify(&raw, &sc.to_config(sc.model_order))?;
                series(&m, f)?
            }
            _ => identify(&composed, &sc.to_config(sc.model_order))?.0,
        };
        let plant = plant.relabel(&["u"], &["y"])?;
        let fit = fit_error(&plant, &composed)?;
        io::write_model(&self.out(PLANT_MODEL), &plant)?;
        let stable = plant.is_stable()?;
        let report = IdentifyReport {
            composition: aa.mode,
            data_points: raw.len(),
            identified_order: sc.model_order,
            plant_order: plant.order(),
            stable,
            poles: spectrum_pairs(&plant.poles()?),
            fit,
        };
        io::write_json(&self.out(FIT_REPORT), &report)?;
        let mut o = StageOutcome::new("identify");
        o.summary.push(format!(
            "order {} fit: relative RMS {:.3e}, max error {:.4} dB",
            plant.order(),
            report.fit.relative_rms_error,
            report.fit.max_abs_error_db
        ));
        if let Some(w) = &report.fit.warning {
            o.summary.push(format!("warning: {w}"));
        }
        o.checks.push(Check::new(
            "identified model fits within 1 dB",
            report.fit.max_abs_error_db < 1.0,
            format!("{:.4} dB", report.fit.max_abs_error_db),
        ));
        Ok(o)
    }

    pub fn design(&self) -> Result<StageOutcome> {
        let plant = self.plant()?;
        let real = design_integral_lqg(&plant, &self.cfg.design)?;
        io::write_model(&self.out(CONTROLLER_FULL), &real.model)?;
        let cl = real.closed_loop()?;
        let cl_spec = cl.poles()?;
        let mut sep: Vec<Complex64> = real.regulator_spectrum()?;
        sep.extend(real.estimator_spectrum()?);
        let separation_error = spectrum_distance(&cl_spec, &sep);
        let report = DesignReport {
            controller_order: real.order(),
            regulator_residual: real.regulator.relative_residual,
            estimator_residual: real.estimator.relative_residual,
            regulator_method: format!("{:?}", real.regulator.method),
            estimator_method: format!("{:?}", real.estimator.method),
            regulator_gain_norm: real.f.norm(),
            estimator_gain_norm: real.k.norm(),
            closed_loop_stable: cl.is_stable()?,
            separation_error,
            closed_loop_spectrum: spectrum_pairs(&cl_spec),
            regulator_spectrum: spectrum_pairs(&real.regulator_spectrum()?),
            estimator_spectrum: spectrum_pairs(&real.estimator_spectrum()?),
        };
        io::write_json(&self.out(DESIGN_REPORT), &report)?;
        let mut o = StageOutcome::new("design");
        o.summary.push(format!(
            "controller order {}, Riccati residuals {:.2e} / {:.2e}, |F| = {:.4e}",
            report.controller_order, report.regulator_residual, report.estimator_residual, report.regulator_gain_norm
        ));
        o.checks.push(Check::new(
            "full-order closed loop stable",
            report.closed_loop_stable,
            format!("max Re = {:.4e}", cl_spec.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)),
        ));
        Ok(o)
    }

    pub fn reduce(&self) -> Result<StageOutcome> {
        let plant = self.design_plant()?;
        let full = self.full_controller()?;
        let k = self.cfg.reduction.target_order;
        let reduced = weighted_reduce(&full, &plant, k)?;
        io::write_model(&self.out(CONTROLLER_REDUCED), &reduced)?;
        let v = verify_reduced(&plant, &full, &reduced)?;
        let report = ReduceReport {
            full_order: v.full_order,
            reduced_order: v.reduced_order,
            closed_loop_stable: v.stable,
            weighted_error: v.weighted_error,
            controller_poles: spectrum_pairs(&reduced.poles()?),
        };
        io::write_json(&self.out(REDUCTION_REPORT), &report)?;
        let mut o = StageOutcome::new("reduce");
        o.summary.push(format!(
            "{} -> {} states, weighted error {:.3e}",
            report.full_order, report.reduced_order, report.weighted_error
        ));
        o.checks.push(Check::new(
            "reduced closed loop stable",
            v.stable,
            format!("order {}", report.reduced_order),
        ));
        Ok(o)
    }

    pub fn discretize(&self) -> Result<StageOutcome> {
        let dc = &self.cfg.discretize;
        let ts = self.cfg.ts;
        let reduced = self.reduced_controller()?;
        let kd = match dc.method {
            DiscretizeMethod::Zoh => discretize_zoh(&reduced, ts)?,
            DiscretizeMethod::Tustin => discretize_tustin(&reduced, ts, dc.prewarp_hz)?,
        };
        io::write_discrete_model(&self.out(CONTROLLER_DISCRETE), &kd)?;
        let (mag, phase, phase_nodelay) = compare_sampled(&reduced, &kd, dc.compare_below_hz)?;
        let report = DiscretizeReport {
            method: dc.method,
            ts,
            stable: kd.is_stable()?,
            compare_below_hz: dc.compare_below_hz,
            max_magnitude_deviation_db: mag,
            max_phase_deviation_deg: phase,
            max_phase_deviation_without_hold_delay_deg: phase_nodelay,
        };
        io::write_json(&self.out(DISCRETIZE_REPORT), &report)?;
        let mut o = StageOutcome::new("discretize");
        o.summary.push(format!(
            "{:?} at Ts = {:e} s; below {} Hz: {:.4} dB, {:.3} deg ({:.3} deg without the hold delay)",
            dc.method, ts, dc.compare_below_hz, mag, phase, phase_nodelay
        ));
        Ok(o)
    }

    pub fn analyze(&self) -> Result<StageOutcome> {
        let plant = self.design_plant()?;
        let full = self.full_controller()?;
        let reduced = self.reduced_controller()?;
        let l_full = analysis::loop_gain_at_input(&plant, &full)?;
        let l_red = analysis::loop_gain_at_input(&plant, &reduced)?;
        let m_full = analysis::margins(&l_full)?;
        let m_red = analysis::margins(&l_red)?;
        let nyquist_hz = 0.5 / self.cfg.ts;
        let bode = analysis::bode(&l_red, &logspace(1e-2, nyquist_hz, 800))?;
        io::write_text(&self.out(LOOP_BODE), &io::bode_to_csv(&bode)?)?;
        let sampled = match self.discrete_controller()? {
            Some(kd) => Some(sampled_loop_margins(&plant, &kd)?),
            None => None,
        };
        let slope = analysis::magnitude_slope_db_per_decade(&l_red, 1e-4, 1e-3)?;
        let siso = with_integrator_front_end(&reduced)?;
        let nearest = siso.poles()?.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let doc = MarginsDocument {
            full: m_full,
            reduced: m_red,
            sampled,
            low_frequency_slope_db_per_decade: slope,
            controller_pole_nearest_origin: nearest,
        };
        io::write_json(&self.out(MARGINS), &doc)?;
        let mut o = StageOutcome::new("analyze");
        for (name, m) in [("full", &doc.full), ("reduced", &doc.reduced)].into_iter().chain(doc.sampled.as_ref().map(|m| ("sampled", m))) {
            o.summary.push(format!(
                "{name} loop: GM {} at {}, PM {} at {}",
                fmt_margin(m.gain_margin_db, "dB"),
                fmt_hz(m.phase_crossover_hz),
                fmt_margin(m.phase_margin_deg, "deg"),
                fmt_hz(m.gain_crossover_hz)
            ));
        }
        o.summary.push(format!("low-frequency loop slope {slope:.6} dB/decade"));
        o.checks.push(Check::new(
            "integral action (controller pole at s = 0)",
            nearest < 1e-6,
            format!("nearest pole |s| = {nearest:.3e}"),
        ));
        let m = doc.sampled.as_ref().unwrap_or(&doc.reduced);
        o.checks.push(Check::new(
            "positive stability margins",
            m.gain_margin_db > 0.0 && m.phase_margin_deg > 0.0,
            format!("GM {:.3} dB, PM {:.3} deg", m.gain_margin_db, m.phase_margin_deg),
        ));
        Ok(o)
    }

    pub fn simulate(&self) -> Result<StageOutcome> {
        let s = &self.cfg.simulation;
        let plant = match &self.cfg.paths.sim_plant {
            Some(p) => self.read_continuous(p, "simulation plant")?,
            None => self.plant()?,
        };
        let kd = self.discrete_controller()?.ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("discrete controller not found in {} (run discretize first)", self.out_dir.display()),
            ))
        })?;
        let sampled = SampledPlant::from_continuous(&plant, kd.ts(), s.substeps)?;
        let sim_cfg = SimConfig {
            duration_s: s.duration_s,
            injection: s.injection,
            excitation: Excitation::Step { amplitude: s.step_amplitude, t0: s.step_time_s },
            keep_noise: false,
        };
        let step = sim::simulate_closed_loop(&sampled, &kd, &NoiseSpec::silent(), &sim_cfg)?;
        io::write_text(&self.out(STEP_TRACE), &io::trace_to_csv(&step)?)?;
        let noise = NoiseSpec {
            eps1: s.noise.eps1,
            eps2: s.noise.eps2,
            eps3: s.noise.eps3,
            seed: self.cfg.seed,
            continuous_process_noise: true,
        };
        let noisy = sim::simulate_closed_loop(&sampled, &kd, &noise, &sim_cfg)?;
        io::write_text(&self.out(NOISE_TRACE), &io::trace_to_csv(&noisy)?)?;
        let metrics = sim::step_response_metrics(&step);
        let tail = noisy.len() / 2;
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
        let report = SimulationReport {
            step: metrics,
            final_y: step.y.last().copied().unwrap_or(0.0),
            peak_abs_y: step.y.iter().fold(0.0, |a: f64, b| a.max(b.abs())),
            noise_seed: self.cfg.seed,
            noise_rms_y: rms(&noisy.y[tail..]),
            noise_rms_u: rms(&noisy.u[tail..]),
        };
        io::write_json(&self.out(STEP_METRICS), &report)?;
        let mut o = StageOutcome::new("simulate");
        o.summary.push(format!(
            "step {}: peak |y| {:.4e}, settling (2%) {}, steady state {:.3e}",
            s.step_amplitude,
            report.peak_abs_y,
            metrics.settling_time_2pct_s.map_or("n/a".to_string(), |t| format!("{t:.4} s")),
            metrics.steady_state_value
        ));
        o.summary.push(format!("seeded noise run (seed {}): rms y {:.3e}, rms u {:.3e}", self.cfg.seed, report.noise_rms_y, report.noise_rms_u));
        let bound = s.settle_tolerance * s.step_amplitude.abs();
        let target = if s.injection == sim::Injection::Reference { -s.step_amplitude } else { 0.0 };
        let err = (metrics.steady_state_value - target).abs();
        o.checks.push(Check::new(
            "step disturbance rejected",
            err < bound && metrics.settling_time_2pct_s.is_some(),
            format!("|y_ss - target| = {err:.3e} (bound {bound:.1e})"),
        ));
        Ok(o)
    }

    /// All stages in order, then `pipeline_summary.json`.
    pub fn run_all(&self) -> Result<PipelineSummary> {
        std::fs::create_dir_all(&self.out_dir)?;
        io::write_text(&self.out(CONFIG_ECHO), &self.cfg.to_toml_string()?)?;
        let stages: [fn(&Self) -> Result<StageOutcome>; 7] = [
            Self::cavity,
            Self::identify,
            Self::design,
            Self::reduce,
            Self::discretize,
            Self::analyze,
            Self::simulate,
        ];
        let mut outcomes = Vec::new();
        for stage in stages {
            outcomes.push(stage(self)?);
        }
        let summary = PipelineSummary { pass: outcomes.iter().all(StageOutcome::passed), stages: outcomes };
        io::write_json(&self.out(SUMMARY), &summary)?;
        Ok(summary)
    }

    /// Write the timestamp sidecar for a command.
    pub fn write_metadata(&self, command: &str, started: SystemTime, elapsed: std::time::Duration) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            command: &'a str,
            tool_version: &'a str,
            seed: u64,
            started_unix_s: f64,
            elapsed_s: f64,
        }
        let started_unix_s = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        std::fs::create_dir_all(&self.out_dir)?;
        io::write_json(
            &self.out(METADATA),
            &Meta {
                command,
                tool_version: env!("CARGO_PKG_VERSION"),
                seed: self.cfg.seed,
                started_unix_s,
                elapsed_s: elapsed.as_secs_f64(),
            },
        )
    }
}

/// Run every stage and write the sidecar.
pub fn run(cfg: PipelineConfig, out_dir: impl Into<PathBuf>) -> Result<PipelineSummary> {
    let stages = Stages::new(cfg, out_dir);
    let (started, clock) = (SystemTime::now(), Instant::now());
    let summary = stages.run_all()?;
    stages.write_metadata("pipeline run", started, clock.elapsed())?;
    Ok(summary)
}

/// Largest distance between two spectra after sorting, relative to the
/// spectral radius.
fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    linalg::sort_spectrum(&mut a);
    linalg::sort_spectrum(&mut b);
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// Worst magnitude (dB) and phase (deg) deviation of the sampled controller
/// from the continuous one on 1 Hz – `below_hz`, over all channels, plus the
/// phase deviation after removing the hold delay.
pub fn compare_sampled(cont: &StateSpace, disc: &DiscreteStateSpace, below_hz: f64) -> Result<(f64, f64, f64)> {
    let (mut mag, mut ph, mut ph_nd) = (0.0f64, 0.0f64, 0.0f64);
    for f in logspace(1.0, below_hz, 200) {
        let w = 2.0 * PI * f;
        let a = cont.eval_response(w)?;
        let b = disc.eval_response(w)?;
        for (za, zb) in a.iter().zip(b.iter()) {
            if za.norm() == 0.0 {
                continue;
            }
            let ratio = zb / za;
            mag = mag.max((20.0 * ratio.norm().log10()).abs());
            ph = ph.max(ratio.arg().to_degrees().abs());
            let undelayed = ratio * Complex64::from_polar(1.0, 0.5 * w * disc.ts());
            ph_nd = ph_nd.max(undelayed.arg().to_degrees().abs());
        }
    }
    Ok((mag, ph, ph_nd))
}

/// Margins of the sampled controller against the continuous plant,
/// `L(iω) = K_d(e^{iωTs}) P(iω)`, searched up to Nyquist.
pub fn sampled_loop_margins(plant: &StateSpace, kd: &DiscreteStateSpace) -> Result<MarginReport> {
    let eval = |w: f64| -> Result<Complex64> {
        let l = kd.eval_response(w)? * plant.eval_response(w)?;
        Ok(l[(0, 0)])
    };
    let nyq = PI / kd.ts();
    analysis::margins_fn(&eval, nyq * 1e-7, nyq * (1.0 - 1e-9), 8000)
}

fn fmt_margin(v: f64, unit: &str) -> String {
    if v.is_finite() {
        format!("{v:.3} {unit}")
    } else {
        "inf".to_string()
    }
}

fn fmt_hz(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |f| format!("{f:.4} Hz"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn shipped_dataset_matches_generator() {
        let shipped = shipped_dataset().unwrap();
        let fresh = synthetic::plant_dataset().unwrap();
        assert_eq!(shipped, fresh);
    }

    #[test]
    fn stages_report_missing_inputs_as_input_errors() {
        let dir = std::env::temp_dir().join(format!("cavlock-missing-{}", std::process::id()));
        let st = Stages::new(PipelineConfig::default(), &dir);
        for r in [st.design(), st.reduce(), st.discretize(), st.simulate()] {
            assert_eq!(r.unwrap_err().exit_code(), 2);
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn cavity_stage_reports_corner() {
        let dir = std::env::temp_dir().join(format!("cavlock-cavity-{}", std::process::id()));
        let st = Stages::new(PipelineConfig::default(), &dir);
        let o = st.cavity().unwrap();
        assert!(o.passed());
        let model = io::read_model(&dir.join(CAVITY_MODEL)).unwrap().into_continuous().unwrap();
        assert_eq!((model.order(), model.inputs(), model.outputs()), (2, 8, 2));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
