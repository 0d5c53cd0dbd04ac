//! Bode data, loop gains, stability margins and sensitivity functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::linsys::{feedback, logspace, series, DiscreteStateSpace, FrequencyResponse, StateSpace};

#[derive(Debug, Clone)]
pub struct BodeData {
    pub response: FrequencyResponse,
    pub mag_db: Vec<f64>,
    /// Continuously unwrapped phase in degrees.
    pub phase_deg: Vec<f64>,
}

impl BodeData {
    pub fn freqs_hz(&self) -> &[f64] {
        self.response.freqs_hz()
    }
}

fn wrap_deg(x: f64) -> f64 {
    let mut y = (x + 180.0).rem_euclid(360.0) - 180.0;
    if y == -180.0 {
        y = 180.0;
    }
    y
}

/// Unwrap a sequence of principal-value phases (degrees), placing the first
/// sample on the branch nearest `anchor`.
pub fn unwrap_phase(raw: &[f64], anchor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let Some(&first) = raw.first() else { return out };
    let mut prev = first + 360.0 * ((anchor - first) / 360.0).round();
    out.push(prev);
    for &p in &raw[1..] {
        let next = prev + wrap_deg(p - prev);
        out.push(next);
        prev = next;
    }
    out
}

/// Low-frequency asymptote `c·(iω)^(−ν)` of a SISO response: returns the
/// asymptotic phase `arg c − 90ν` (with `arg c ∈ {0, −180}` for real c).
fn low_frequency_anchor(eval: &dyn Fn(f64) -> Result<Complex64>, w0: f64) -> Result<Option<f64>> {
    let (w1, w2) = (w0 * 1e-2, w0 * 1e-3);
    let (Ok(g1), Ok(g2)) = (eval(w1), eval(w2)) else { return Ok(None) };
    if g1.norm() == 0.0 || g2.norm() == 0.0 {
        return Ok(None);
    }
    let nu = ((g2.norm().ln() - g1.norm().ln()) / (w1.ln() - w2.ln())).round();
    let c = g2 * Complex64::new(0.0, w2).powf(nu);
    let arg_c = if c.re < 0.0 { -180.0 } else { 0.0 };
    Ok(Some(arg_c - 90.0 * nu))
}

fn bode_from(eval: &dyn Fn(f64) -> Result<Complex64>, freqs_hz: &[f64], anchor: bool) -> Result<BodeData> {
    if freqs_hz.is_empty() {
        return Err(Error::InvalidParam("empty frequency grid".into()));
    }
    let values = freqs_hz.iter().map(|f| eval(2.0 * PI * f)).collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = values.iter().map(|z| z.arg().to_degrees()).collect();
    let start = if anchor {
        low_frequency_anchor(eval, 2.0 * PI * freqs_hz[0])?.unwrap_or(raw[0])
    } else {
        raw[0]
    };
    let phase_deg = unwrap_phase(&raw, start);
    let mag_db = values.iter().map(|z| 20.0 * z.norm().log10()).collect();
    Ok(BodeData { response: FrequencyResponse::from_siso(freqs_hz.to_vec(), values)?, mag_db, phase_deg })
}

/// Bode data of a SISO model; phase anchored at the lowest grid frequency to
/// the branch of the low-frequency asymptote.
pub fn bode(model: &StateSpace, freqs_hz: &[f64]) -> Result<BodeData> {
    require_siso(model.inputs(), model.outputs())?;
    bode_from(&|w| model.eval_siso(w), freqs_hz, true)
}

/// Bode data of a discrete SISO model up to Nyquist.
pub fn bode_discrete(model: &DiscreteStateSpace, freqs_hz: &[f64]) -> Result<BodeData> {
    require_siso(model.inputs(), model.outputs())?;
    bode_from(&|w| model.eval_siso(w), freqs_hz, true)
}

fn require_siso(m: usize, p: usize) -> Result<()> {
    if m != 1 || p != 1 {
        return Err(Error::Dimension(format!("SISO model required, got {p}x{m}")));
    }
    Ok(())
}

/// `L = P·C`, loop broken at the measurement point.
pub fn loop_gain(plant: &StateSpace, controller: &StateSpace) -> Result<StateSpace> {
    series(controller, plant)
}

/// `L = C·P`, loop broken at the plant input. Scalar whenever the plant
/// has a single input, even if it has several measured outputs.
pub fn loop_gain_at_input(plant: &StateSpace, controller: &StateSpace) -> Result<StateSpace> {
    series(plant, controller)
}

/// Negative-feedback sensitivity pair `S = (I + PC)⁻¹`, `T = PC (I + PC)⁻¹`.
pub fn sensitivity(plant: &StateSpace, controller: &StateSpace) -> Result<(StateSpace, StateSpace)> {
    let t = feedback(plant, controller, -1.0)?;
    let p = plant.outputs();
    let s = StateSpace::static_gain(Mat::identity(p, p)).sub(&t)?;
    Ok((s, t))
}

fn ser_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else if *v < 0.0 {
        s.serialize_str("-inf")
    } else {
        s.serialize_str("nan")
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Crossing {
    pub freq_hz: f64,
    /// Phase margin (deg) for gain crossings, gain margin (dB) for phase
    /// crossings.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    #[serde(serialize_with = "ser_inf")]
    pub gain_margin_db: f64,
    #[serde(serialize_with = "ser_inf")]
    pub phase_margin_deg: f64,
    pub gain_crossover_hz: Option<f64>,
    pub phase_crossover_hz: Option<f64>,
    /// All |L| = 1 crossings.
    pub gain_crossings: Vec<Crossing>,
    /// All phase = −180° (mod 360°) crossings.
    pub phase_crossings: Vec<Crossing>,
}

/// Bisection for a sign change of `f` on `[a, b]` in log frequency.
fn refine(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        let m = (a * b).sqrt();
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a) <= 1e-15 * b {
            break;
        }
    }
    Ok((a * b).sqrt())
}

/// Margins of a scalar loop given by its frequency response, searched on
/// `n` log-spaced points in `[w_lo, w_hi]` (rad/s) with bisection refinement.
pub fn margins_fn(eval: &dyn Fn(f64) -> Result<Complex64>, w_lo: f64, w_hi: f64, n: usize) -> Result<MarginReport> {
    if !(w_lo > 0.0 && w_hi > w_lo) {
        return Err(Error::InvalidParam(format!("bad margin search band [{w_lo}, {w_hi}]")));
    }
    let grid = logspace(w_lo, w_hi, n.max(2));
    let vals = grid.iter().map(|&w| eval(w)).collect::<Result<Vec<_>>>()?;
    let gain_fn = |w: f64| eval(w).map(|z| z.norm().ln());
    let imag_fn = |w: f64| eval(w).map(|z| z.im);

    let mut gain_crossings = Vec::new();
    let mut phase_crossings = Vec::new();
    for i in 0..grid.len() - 1 {
        let (z0, z1) = (vals[i], vals[i + 1]);
        let (g0, g1) = (z0.norm().ln(), z1.norm().ln());
        if g0 == 0.0 || (g0 > 0.0) != (g1 > 0.0) {
            let w = if g0 == 0.0 { grid[i] } else { refine(&gain_fn, grid[i], grid[i + 1])? };
            let z = eval(w)?;
            let pm = wrap_deg(z.arg().to_degrees() + 180.0);
            gain_crossings.push(Crossing { freq_hz: w / (2.0 * PI), margin: pm });
        }
        if z0.im == 0.0 || (z0.im > 0.0) != (z1.im > 0.0) {
            let w = if z0.im == 0.0 { grid[i] } else { refine(&imag_fn, grid[i], grid[i + 1])? };
            let z = eval(w)?;
            // reject sign changes through a pole or on the positive real axis
            if z.re < 0.0 && z.im.abs() <= 1e-6 * z.norm() {
                phase_crossings.push(Crossing { freq_hz: w / (2.0 * PI), margin: -20.0 * z.norm().log10() });
            }
        }
    }
    let worst_pm = gain_crossings.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)).copied();
    let worst_gm = phase_crossings
        .iter()
        .filter(|c| c.margin > 0.0)
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .or_else(|| phase_crossings.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)))
        .copied();
    Ok(MarginReport {
        gain_margin_db: worst_gm.map_or(f64::INFINITY, |c| c.margin),
        phase_margin_deg: worst_pm.map_or(f64::INFINITY, |c| c.margin),
        gain_crossover_hz: worst_pm.map(|c| c.freq_hz),
        phase_crossover_hz: worst_gm.map(|c| c.freq_hz),
        gain_crossings,
        phase_crossings,
    })
}

/// Search band covering the loop dynamics: two decades beyond the
/// extreme nonzero pole and zero magnitudes.
fn search_band(model: &StateSpace) -> Result<(f64, f64)> {
    let mags: Vec<f64> = model.poles()?.iter().map(|p| p.norm()).filter(|&m| m > 1e-9).collect();
    let (mut lo, mut hi) = (1e-3_f64, 1e3_f64);
    if let (Some(min), Some(max)) = (
        mags.iter().copied().reduce(f64::min),
        mags.iter().copied().reduce(f64::max),
    ) {
        lo = lo.min(min / 100.0);
        hi = hi.max(max * 100.0);
    }
    // make sure the band includes where |L| = 1 for integrator-like loops
    let dc_like = model.eval_siso(lo).map(|z| z.norm()).unwrap_or(1.0);
    if dc_like.is_finite() && dc_like < 1.0 {
        lo *= dc_like.max(1e-12);
    }
    Ok((lo, hi))
}

/// Margins of a continuous SISO loop gain.
pub fn margins(l: &StateSpace) -> Result<MarginReport> {
    require_siso(l.inputs(), l.outputs())?;
    let (lo, hi) = search_band(l)?;
    let points = (400.0 * (hi / lo).log10()).ceil() as usize;
    margins_fn(&|w| l.eval_siso(w), lo, hi, points.max(2000))
}

/// Margins of a discrete SISO loop gain, searched up to Nyquist.
pub fn margins_discrete(l: &DiscreteStateSpace) -> Result<MarginReport> {
    require_siso(l.inputs(), l.outputs())?;
    let nyq = PI / l.ts();
    margins_fn(&|w| l.eval_siso(w), nyq * 1e-7, nyq * (1.0 - 1e-9), 6000)
}

/// Largest |L(iω)| − 1 and phase residual at the reported crossings.
pub fn margin_consistency(eval: &dyn Fn(f64) -> Result<Complex64>, rep: &MarginReport) -> Result<(f64, f64)> {
    let mut gain_res: f64 = 0.0;
    for c in &rep.gain_crossings {
        gain_res = gain_res.max((eval(2.0 * PI * c.freq_hz)?.norm() - 1.0).abs());
    }
    let mut phase_res: f64 = 0.0;
    for c in &rep.phase_crossings {
        let z = eval(2.0 * PI * c.freq_hz)?;
        phase_res = phase_res.max(wrap_deg(z.arg().to_degrees() - 180.0).abs());
    }
    Ok((gain_res, phase_res))
}

/// Slope of |G| in dB/decade between two frequencies (Hz).
pub fn magnitude_slope_db_per_decade(model: &StateSpace, f1: f64, f2: f64) -> Result<f64> {
    let m1 = linalg::sigma_max(&model.eval_response(2.0 * PI * f1)?);
    let m2 = linalg::sigma_max(&model.eval_response(2.0 * PI * f2)?);
    Ok(20.0 * (m2 / m1).log10() / (f2 / f1).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tf_integrator() -> StateSpace {
        StateSpace::siso(Mat::zeros(1, 1), Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 1.0), 0.0).unwrap()
    }

    fn lag() -> StateSpace {
        StateSpace::siso(Mat::from_element(1, 1, -1.0), Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 1.0), 0.0)
            .unwrap()
    }

    /// 1/(s(s+1)²)
    fn textbook() -> StateSpace {
        series(&series(&tf_integrator(), &lag()).unwrap(), &lag()).unwrap()
    }

    #[test]
    fn bode_oracles() {
        let b = bode(&tf_integrator(), &[1.0 / (2.0 * PI)]).unwrap();
        assert_relative_eq!(b.mag_db[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(b.phase_deg[0], -90.0, epsilon = 1e-12);
        let b = bode(&lag(), &[1.0 / (2.0 * PI)]).unwrap();
        assert_relative_eq!(b.mag_db[0], -3.0103, epsilon = 1e-4);
        assert_relative_eq!(b.phase_deg[0], -45.0, epsilon = 1e-12);
        assert!(bode(&lag(), &[]).is_err());
    }

    #[test]
    fn phase_unwraps_continuously() {
        let g = series(&series(&lag(), &lag()).unwrap(), &lag()).unwrap();
        let b = bode(&g, &logspace(1e-3, 1e3, 200)).unwrap();
        assert!(b.phase_deg.windows(2).all(|w| (w[1] - w[0]).abs() < 20.0));
        assert_relative_eq!(*b.phase_deg.last().unwrap(), -270.0, epsilon = 0.5);
        // anchored: triple integrator starts at -270, not +90
        let i3 = series(&series(&tf_integrator(), &tf_integrator()).unwrap(), &tf_integrator()).unwrap();
        let b = bode(&i3, &[0.01, 0.1]).unwrap();
        assert_relative_eq!(b.phase_deg[0], -270.0, epsilon = 1e-9);
    }

    #[test]
    fn loop_gain_composition() {
        let k = StateSpace::static_gain(Mat::from_element(1, 1, 4.0));
        let l = loop_gain(&tf_integrator(), &k).unwrap();
        assert!((l.eval_siso(2.0).unwrap() - Complex64::new(0.0, -2.0)).norm() < 1e-14);
        let l = loop_gain(&textbook(), &lag()).unwrap();
        assert_eq!(l.order(), 4);
    }

    #[test]
    fn textbook_margins() {
        let l = textbook();
        let rep = margins(&l).unwrap();
        assert_relative_eq!(rep.gain_margin_db, 20.0 * 2f64.log10(), epsilon = 1e-6);
        assert_relative_eq!(rep.phase_crossover_hz.unwrap() * 2.0 * PI, 1.0, epsilon = 1e-8);
        // |L| = 1 at ω⁶ + 2ω⁴ + ω² = 1
        let mut lo = 0.5_f64;
        let mut hi = 1.0_f64;
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if m.powi(6) + 2.0 * m.powi(4) + m * m > 1.0 {
                hi = m
            } else {
                lo = m
            }
        }
        let pm = 90.0 - 2.0 * lo.atan().to_degrees();
        assert_relative_eq!(rep.phase_margin_deg, pm, epsilon = 1e-6);
        assert_relative_eq!(rep.gain_crossover_hz.unwrap() * 2.0 * PI, lo, epsilon = 1e-8);
        let (g, p) = margin_consistency(&|w| l.eval_siso(w), &rep).unwrap();
        assert!(g < 1e-6 && p < 1e-4);
    }

    #[test]
    fn integrator_margins() {
        let rep = margins(&tf_integrator()).unwrap();
        assert_relative_eq!(rep.phase_margin_deg, 90.0, epsilon = 1e-9);
        assert!(rep.gain_margin_db.is_infinite());
        assert!(rep.phase_crossings.is_empty());
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"gain_margin_db\":\"inf\""));
    }

    #[test]
    fn sensitivity_identity() {
        let k = StateSpace::siso(Mat::zeros(1, 1), Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 0.5), 0.2).unwrap();
        let (s, t) = sensitivity(&lag(), &k).unwrap();
        for w in logspace(1e-3, 1e3, 100) {
            let sum = s.eval_siso(w).unwrap() + t.eval_siso(w).unwrap();
            assert!((sum - 1.0).norm() < 1e-10);
        }
        assert!(s.is_stable().unwrap() && t.is_stable().unwrap());
        // integral action: |S| rises at ≥ 20 dB/dec at low frequency
        assert!(magnitude_slope_db_per_decade(&s, 1e-5, 1e-4).unwrap() >= 19.9);
        let (s0, t0) = sensitivity(&lag(), &StateSpace::static_gain(Mat::zeros(1, 1))).unwrap();
        assert!((s0.eval_siso(1.0).unwrap() - 1.0).norm() < 1e-15);
        assert!(t0.eval_siso(1.0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn discrete_margins_of_sampled_integrator() {
        // ZOH of k/s at Ts: L(z) = k Ts / (z − 1); phase −90° − ωTs/2
        let ts = 1e-3;
        let k = 10.0;
        let l = DiscreteStateSpace::new(
            Mat::from_element(1, 1, 1.0),
            Mat::from_element(1, 1, k * ts),
            Mat::from_element(1, 1, 1.0),
            Mat::zeros(1, 1),
            ts,
        )
        .unwrap();
        let rep = margins_discrete(&l).unwrap();
        // |L| = kTs / (2 sin(ωTs/2)) = 1
        let w = 2.0 / ts * (k * ts / 2.0).asin();
        assert_relative_eq!(rep.gain_crossover_hz.unwrap() * 2.0 * PI, w, max_relative = 1e-8);
        assert_relative_eq!(rep.phase_margin_deg, 90.0 - (w * ts / 2.0).to_degrees(), epsilon = 1e-6);
        // phase −180° at Nyquist only → no interior crossing
        assert!(rep.gain_margin_db.is_infinite());
    }
}
