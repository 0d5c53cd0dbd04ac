//! Frequency-domain subspace identification.
//!
//! Given samples `G(iω_k)` on an arbitrary grid, the algorithm
//!
//! 1. maps each `iω_k` to a frequency variable `λ_k` (the unit circle via a
//!    bilinear map by default, or `iω_k/ω_max` otherwise),
//! 2. stacks `λ_k^j G_k` and `λ_k^j I` for `j < q` into block data matrices,
//! 3. splits them into real and imaginary parts,
//! 4. projects the input block out of the data block with an LQ
//!    factorization and takes the dominant left singular vectors as the
//!    extended observability range,
//! 5. recovers `A`, `C` from shift invariance of that range,
//! 6. fits `B`, `D` by linear least squares against the raw samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretize::bilinear_to_continuous;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};
use crate::linsys::{resolvent_eval, FrequencyResponse, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SysIdConfig {
    pub model_order: usize,
    /// Block rows `q` of the data matrices; `None` means `2n + 2`.
    pub block_rows: Option<usize>,
    pub use_bilinear_map: bool,
    /// Relative singular-value threshold used for the order-gap warning.
    pub rank_tol: f64,
    /// Force `D = 0`.
    pub strictly_proper: bool,
    pub allow_unstable: bool,
    /// Center of the bilinear map in Hz; defaults to the geometric mean of
    /// the grid end points.
    pub bilinear_center_hz: Option<f64>,
    /// Per-sample weights (default: uniform).
    pub weights: Option<Vec<f64>>,
    /// Additionally weight each sample by `1/σmax(H_k)`, so the fit
    /// minimizes relative rather than absolute error. Useful when the data
    /// spans a large dynamic range (steep roll-off).
    pub relative_weighting: bool,
    /// Reflect identified poles with `Re ≥ 0` into the left half plane
    /// (λ → −λ̄) before fitting B and D, instead of rejecting the model.
    pub enforce_stability: bool,
}

impl Default for SysIdConfig {
    fn default() -> Self {
        Self {
            model_order: 2,
            block_rows: None,
            use_bilinear_map: true,
            rank_tol: 1e-6,
            strictly_proper: false,
            allow_unstable: false,
            bilinear_center_hz: None,
            weights: None,
            relative_weighting: false,
            enforce_stability: false,
        }
    }
}

impl SysIdConfig {
    pub fn with_order(n: usize) -> Self {
        Self { model_order: n, ..Default::default() }
    }

    pub fn q(&self) -> usize {
        self.block_rows.unwrap_or(2 * self.model_order + 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_order < 1 {
            return Err(Error::InvalidParam("model order must be >= 1".into()));
        }
        if self.q() <= self.model_order {
            return Err(Error::InvalidParam(format!(
                "block rows q = {} must exceed model order {}",
                self.q(),
                self.model_order
            )));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidParam("rank_tol must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub relative_rms_error: f64,
    pub max_abs_error_db: f64,
    /// Singular values of the projected data, normalized by the Frobenius
    /// norm of the real data matrix.
    pub singular_values: Vec<f64>,
    /// First discarded normalized singular value (0 when none is discarded).
    pub trailing_sv_ratio: f64,
    pub warning: Option<String>,
}

/// Relative RMS and worst magnitude error (dB) of `model` against `data`.
pub fn fit_error(model: &StateSpace, data: &FrequencyResponse) -> Result<FitReport> {
    if data.shape() != (model.outputs(), model.inputs()) {
        return Err(Error::Dimension(format!(
            "data is {:?}, model is {}x{}",
            data.shape(),
            model.outputs(),
            model.inputs()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut max_db: f64 = 0.0;
    for (f, h) in data.freqs_hz().iter().zip(data.samples()) {
        let g = model.eval_response(2.0 * PI * f)?;
        for (gm, hd) in g.iter().zip(h.iter()) {
            num += (gm - hd).norm_sqr();
            den += hd.norm_sqr();
            let err = 20.0 * (gm.norm() / hd.norm()).log10();
            if err.is_finite() {
                max_db = max_db.max(err.abs());
            } else if gm.norm() != hd.norm() {
                max_db = f64::INFINITY;
            }
        }
    }
    let relative_rms_error = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(FitReport { relative_rms_error, max_abs_error_db: max_db, ..Default::default() })
}

/// Mirror the eigenvalues of `a` with nonnegative real part across the
/// imaginary axis, keeping the stable ones. Works on an ordered real Schur
/// form: the trailing unstable block `T22` is replaced by `−T22`, shifted
/// further left if needed so that on-axis poles end up strictly stable.
fn reflect_unstable(a: &Mat) -> Result<(Mat, usize)> {
    let n = a.nrows();
    let mut schur = linalg::RealSchur::new(a)?;
    let ns = schur.reorder(|z| z.re < 0.0)?;
    if ns == n {
        return Ok((a.clone(), 0));
    }
    let mut t = schur.t.clone();
    let scale = a.norm().max(1.0);
    let mut t22 = -t.view((ns, ns), (n - ns, n - ns)).into_owned();
    let worst = linalg::eigenvalues(&t22)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if worst > -1e-6 * scale {
        let shift = worst + 1e-6 * scale;
        for i in 0..n - ns {
            t22[(i, i)] -= shift;
        }
    }
    t.view_mut((ns, ns), (n - ns, n - ns)).copy_from(&t22);
    Ok((&schur.q * t * schur.q.transpose(), n - ns))
}

/// Fit a state-space model of exactly `cfg.model_order` states.
pub fn identify(data: &FrequencyResponse, cfg: &SysIdConfig) -> Result<(StateSpace, FitReport)> {
    cfg.validate()?;
    let n = cfg.model_order;
    let q = cfg.q();
    let nf = data.len();
    let (p, m) = data.shape();
    if p == 0 || m == 0 {
        return Err(Error::Identification("empty frequency-response data".into()));
    }
    if nf < 2 * q || 2 * nf * m < q * (m + p) {
        return Err(Error::Identification(format!(
            "insufficient samples: {nf} frequencies for q = {q} block rows"
        )));
    }
    let mut weights = match &cfg.weights {
        Some(w) if w.len() != nf => {
            return Err(Error::Dimension(format!("{} weights for {nf} samples", w.len())));
        }
        Some(w) => w.clone(),
        None => vec![1.0; nf],
    };
    if cfg.relative_weighting {
        for (w, h) in weights.iter_mut().zip(data.samples()) {
            let g = linalg::sigma_max(h);
            if !(g > 0.0) {
                return Err(Error::Identification("relative weighting needs nonzero samples".into()));
            }
            *w /= g;
        }
    }
    let omegas: Vec<f64> = data.freqs_hz().iter().map(|f| 2.0 * PI * f).collect();
    let (w_lo, w_hi) = (omegas[0], omegas[nf - 1]);
    let scale = if cfg.use_bilinear_map {
        cfg.bilinear_center_hz.map(|f| 2.0 * PI * f).unwrap_or_else(|| (w_lo * w_hi).sqrt())
    } else {
        w_hi
    };
    let lambdas: Vec<Complex64> = omegas
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            if cfg.use_bilinear_map {
                (scale + s) / (scale - s)
            } else {
                s / scale
            }
        })
        .collect();

    // Block data matrices, real part then imaginary part column blocks.
    let cols = 2 * nf * m;
    let mut wr = Mat::zeros(q * m, cols);
    let mut gr = Mat::zeros(q * p, cols);
    for (k, (h, lam)) in data.samples().iter().zip(&lambdas).enumerate() {
        let wk = weights[k];
        let mut pow = Complex64::new(wk, 0.0);
        for j in 0..q {
            for c in 0..m {
                let col_re = k * m + c;
                let col_im = nf * m + k * m + c;
                wr[(j * m + c, col_re)] = pow.re;
                wr[(j * m + c, col_im)] = pow.im;
                for r in 0..p {
                    let v = pow * h[(r, c)];
                    gr[(j * p + r, col_re)] = v.re;
                    gr[(j * p + r, col_im)] = v.im;
                }
            }
            pow *= lam;
        }
    }
    let data_norm = gr.norm().max(f64::MIN_POSITIVE);

    // LQ of [Wr; Gr]: the trailing diagonal block spans Gr projected onto
    // the orthogonal complement of the row space of Wr.
    let rows_w = q * m;
    let mut stacked = Mat::zeros(rows_w + q * p, cols);
    stacked.view_mut((0, 0), (rows_w, cols)).copy_from(&wr);
    stacked.view_mut((rows_w, 0), (q * p, cols)).copy_from(&gr);
    let r = nalgebra::QR::new(stacked.transpose()).r();
    let l = r.transpose();
    let l22 = l.view((rows_w, rows_w), (q * p, q * p)).into_owned();
    let svd = linalg::svd(&l22);
    let sv: Vec<f64> = svd.s.iter().map(|s| s / data_norm).collect();
    let u = &svd.u;
    let trailing = sv.get(n).copied().unwrap_or(0.0);
    let rank = sv.iter().take_while(|&&s| s > 1e-13).count();

    let mut warning = None;
    if trailing >= cfg.rank_tol {
        warning = Some(format!(
            "singular value {} of {:.3e} (relative) is above rank_tol {:.1e}; the data supports a higher order",
            n + 1,
            trailing,
            cfg.rank_tol
        ));
    }
    if rank < n {
        warning = Some(format!("data has numerical rank {rank} below the requested order {n}; padding with fast stable modes"));
    }

    let r_eff = rank.min(n);
    let mut a_lam = Mat::zeros(n, n);
    let mut c_lam = Mat::zeros(p, n);
    if r_eff > 0 {
        let obs = u.columns(0, r_eff).into_owned();
        let up = obs.rows(0, (q - 1) * p).into_owned();
        let down = obs.rows(p, (q - 1) * p).into_owned();
        let a_r = linalg::svd(&up).solve(&down, 1e-14);
        a_lam.view_mut((0, 0), (r_eff, r_eff)).copy_from(&a_r);
        c_lam.view_mut((0, 0), (p, r_eff)).copy_from(&obs.rows(0, p));
    }

    let (a, c) = if cfg.use_bilinear_map {
        let g = bilinear_to_continuous(&a_lam, &Mat::zeros(n, m), &c_lam, &Mat::zeros(p, m), scale)
            .map_err(|_| Error::Identification("identified discrete-domain pole at z = -1".into()))?;
        (g.a().clone(), g.c().clone())
    } else {
        (a_lam * scale, c_lam)
    };
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Identification("non-finite state matrix".into()));
    }
    let a = if cfg.enforce_stability {
        let (a, flipped) = reflect_unstable(&a)?;
        if flipped > 0 {
            warning = Some(format!("{flipped} unstable pole(s) reflected into the left half plane"));
        }
        a
    } else {
        a
    };
    if !cfg.allow_unstable {
        let worst = linalg::eigenvalues(&a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if worst >= 0.0 {
            return Err(Error::Identification(format!(
                "identified model is unstable (max Re pole = {worst:.3e}); set allow_unstable to keep it"
            )));
        }
    }

    let (b, d) = fit_input_matrices(&a, &c, data, &omegas, &weights, cfg.strictly_proper)?;
    let model = StateSpace::new(a, b, c, d)?;
    let mut report = fit_error(&model, data)?;
    report.singular_values = sv;
    report.trailing_sv_ratio = trailing;
    report.warning = warning;
    Ok((model, report))
}

/// Least-squares `B`, `D` for fixed `A`, `C` against the raw samples.
fn fit_input_matrices(
    a: &Mat,
    c: &Mat,
    data: &FrequencyResponse,
    omegas: &[f64],
    weights: &[f64],
    strictly_proper: bool,
) -> Result<(Mat, Mat)> {
    let n = a.nrows();
    let (p, m) = data.shape();
    let nf = omegas.len();
    let unknowns = n + if strictly_proper { 0 } else { p };
    let mut lhs = Mat::zeros(2 * nf * p, unknowns);
    let mut rhs = Mat::zeros(2 * nf * p, m);
    for (k, (&w, h)) in omegas.iter().zip(data.samples()).enumerate() {
        // Φ_k = C (iω I − A)⁻¹
        let phi_t = resolvent_eval(&a.transpose(), &c.transpose(), &Mat::identity(n, n), &Mat::zeros(n, p), Complex64::new(0.0, w))
            .ok_or_else(|| Error::Identification(format!("identified pole on the grid at {w} rad/s")))?;
        let phi: CMat = phi_t.transpose();
        let wk = weights[k];
        for r in 0..p {
            let (ri, ii) = (k * p + r, nf * p + k * p + r);
            for j in 0..n {
                lhs[(ri, j)] = wk * phi[(r, j)].re;
                lhs[(ii, j)] = wk * phi[(r, j)].im;
            }
            if !strictly_proper {
                lhs[(ri, n + r)] = wk;
            }
            for col in 0..m {
                rhs[(ri, col)] = wk * h[(r, col)].re;
                rhs[(ii, col)] = wk * h[(r, col)].im;
            }
        }
    }
    // Column scaling keeps the SVD solve well conditioned.
    let norms: Vec<f64> = (0..unknowns).map(|j| lhs.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in norms.iter().enumerate() {
        lhs.column_mut(j).scale_mut(1.0 / s);
    }
    let mut sol = linalg::svd(&lhs).solve(&rhs, 1e-13);
    for (j, s) in norms.iter().enumerate() {
        sol.row_mut(j).scale_mut(1.0 / s);
    }
    let b = sol.rows(0, n).into_owned();
    let d = if strictly_proper { Mat::zeros(p, m) } else { sol.rows(n, p).into_owned() };
    Ok((b, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::logspace;

    fn resonator(f0: f64, quality: f64) -> StateSpace {
        let w = 2.0 * PI * f0;
        StateSpace::siso(
            Mat::from_row_slice(2, 2, &[0.0, w, -w, -w / quality]),
            Mat::from_row_slice(2, 1, &[0.0, w]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn recovers_resonator() {
        let truth = resonator(520.0, 20.0);
        let data = truth.frequency_response(&logspace(10.0, 1e4, 200)).unwrap();
        let (model, report) = identify(&data, &SysIdConfig::with_order(2)).unwrap();
        assert_eq!(model.order(), 2);
        assert!(report.relative_rms_error < 1e-6, "{report:?}");
        assert!(report.trailing_sv_ratio < 1e-8);
    }

    #[test]
    fn recovers_static_gain() {
        let freqs = logspace(1.0, 1e3, 50);
        let data = FrequencyResponse::from_siso(freqs.clone(), vec![Complex64::new(3.7, 0.0); 50]).unwrap();
        let cfg = SysIdConfig::with_order(1);
        let (model, report) = identify(&data, &cfg).unwrap();
        for f in freqs {
            let g = model.eval_siso(2.0 * PI * f).unwrap();
            assert!((g - 3.7).norm() < 1e-8, "{g}");
        }
        assert!(report.trailing_sv_ratio < cfg.rank_tol);
    }

    #[test]
    fn direct_map_also_works_on_easy_data() {
        let truth = resonator(5.0, 3.0);
        let data = truth.frequency_response(&logspace(0.5, 50.0, 80)).unwrap();
        let cfg = SysIdConfig { use_bilinear_map: false, ..SysIdConfig::with_order(2) };
        let (_, report) = identify(&data, &cfg).unwrap();
        assert!(report.relative_rms_error < 1e-6, "{report:?}");
    }

    #[test]
    fn rejects_short_data() {
        let data = resonator(5.0, 3.0).frequency_response(&logspace(1.0, 10.0, 5)).unwrap();
        assert!(matches!(identify(&data, &SysIdConfig::with_order(2)), Err(Error::Identification(_))));
    }

    #[test]
    fn fit_error_examples() {
        let g = resonator(50.0, 5.0);
        let data = g.frequency_response(&logspace(1.0, 500.0, 40)).unwrap();
        assert!(fit_error(&g, &data).unwrap().relative_rms_error < 1e-15);
        let doubled = g.scale_output(2.0);
        let r = fit_error(&doubled, &data).unwrap();
        assert!((r.relative_rms_error - 1.0).abs() < 1e-12);
        assert!((r.max_abs_error_db - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn strictly_proper_fit_has_zero_d() {
        let truth = resonator(100.0, 10.0);
        let data = truth.frequency_response(&logspace(5.0, 2000.0, 100)).unwrap();
        let cfg = SysIdConfig { strictly_proper: true, ..SysIdConfig::with_order(2) };
        let (model, report) = identify(&data, &cfg).unwrap();
        assert_eq!(model.d()[(0, 0)], 0.0);
        assert!(report.relative_rms_error < 1e-6);
    }

    fn random_stable(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> StateSpace {
        use rand::Rng;
        let mut a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let shift = linalg::eigenvalues(&a).unwrap().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        for i in 0..n {
            a[(i, i)] -= shift + rng.random_range(0.1..1.0);
        }
        let b = Mat::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let c = Mat::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        StateSpace::new(a, b, c, Mat::from_element(1, 1, rng.random_range(-0.5..0.5))).unwrap()
    }

    #[test]
    fn random_round_trip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for n in 1..=8 {
            let truth = random_stable(&mut rng, n);
            let data = truth.frequency_response(&logspace(1e-3, 20.0, 20 * n)).unwrap();
            let (model, report) = identify(&data, &SysIdConfig::with_order(n)).unwrap();
            assert_eq!(model.order(), n);
            assert!(report.relative_rms_error < 1e-5, "n = {n}: {}", report.relative_rms_error);
        }
    }

    #[test]
    fn noisy_data_with_stability_enforced() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        for n in 2..=8 {
            let truth = random_stable(&mut rng, n);
            let freqs = logspace(1e-3, 20.0, 20 * n);
            let clean = truth.frequency_response(&freqs).unwrap();
            let noisy: Vec<Complex64> = clean
                .siso_values()
                .unwrap()
                .iter()
                .map(|h| {
                    let g: (f64, f64) = (rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal));
                    h + 0.01 * h.norm() * Complex64::new(g.0, g.1) / 2f64.sqrt()
                })
                .collect();
            let noisy = FrequencyResponse::from_siso(freqs, noisy).unwrap();
            let cfg = SysIdConfig { enforce_stability: true, ..SysIdConfig::with_order(n) };
            let (model, _) = identify(&noisy, &cfg).unwrap();
            assert!(model.is_stable().unwrap());
            assert!(fit_error(&model, &clean).unwrap().relative_rms_error < 0.05);
        }
    }

    #[test]
    fn unstable_fit_rejected_unless_allowed() {
        // an unstable resonator identified from its (formal) response
        let w = 2.0 * PI * 50.0;
        let truth = StateSpace::siso(
            Mat::from_row_slice(2, 2, &[0.0, w, -w, 0.1 * w]),
            Mat::from_row_slice(2, 1, &[0.0, w]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            0.0,
        )
        .unwrap();
        let data = truth.frequency_response(&logspace(1.0, 1000.0, 100)).unwrap();
        assert!(matches!(identify(&data, &SysIdConfig::with_order(2)), Err(Error::Identification(_))));
        let cfg = SysIdConfig { allow_unstable: true, ..SysIdConfig::with_order(2) };
        let (model, report) = identify(&data, &cfg).unwrap();
        assert!(!model.is_stable().unwrap());
        assert!(report.relative_rms_error < 1e-6);
    }

    #[test]
    fn scaling_the_data_scales_the_model() {
        let truth = resonator(520.0, 20.0);
        let data = truth.frequency_response(&logspace(10.0, 1e4, 200)).unwrap();
        let cfg = SysIdConfig::with_order(2);
        let (m1, _) = identify(&data, &cfg).unwrap();
        let (m2, _) = identify(&data.scaled(7.5), &cfg).unwrap();
        for f in logspace(10.0, 1e4, 50) {
            let w = 2.0 * PI * f;
            let (a, b) = (m1.eval_siso(w).unwrap(), m2.eval_siso(w).unwrap());
            assert!((b - 7.5 * a).norm() <= 1e-8 * (7.5 * a).norm());
        }
    }

    #[test]
    fn relative_weighting_tracks_steep_rolloff() {
        // 8th-order roll-off on top of a resonance: 100+ dB of dynamic range
        let filt = crate::cavity::antialias_filter(8, 2500.0).unwrap();
        let truth = crate::linsys::series(&resonator(520.0, 12.5), &filt).unwrap();
        let data = truth.frequency_response(&logspace(10.0, 1e4, 400)).unwrap();
        let base = SysIdConfig { block_rows: Some(40), strictly_proper: true, ..SysIdConfig::with_order(10) };
        let rel = SysIdConfig { relative_weighting: true, ..base.clone() };
        let (_, uniform) = identify(&data, &base).unwrap();
        let (_, relative) = identify(&data, &rel).unwrap();
        assert!(relative.max_abs_error_db < 0.01, "{}", relative.max_abs_error_db);
        assert!(relative.max_abs_error_db <= uniform.max_abs_error_db);
    }
}
