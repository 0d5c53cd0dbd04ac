//! Balanced truncation, frequency-weighted controller reduction and the
//! H∞ norm.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, RealSchur};
use crate::linsys::{feedback, feedback_path, logspace, series, StateSpace};
use crate::riccati::solve_lyapunov;

/// Relative threshold below which a Hankel singular value counts as zero
/// when forming balancing transformations.
const SV_FLOOR: f64 = 1e-14;

/// Controllability and observability gramians of a stable model.
pub fn gramians(model: &StateSpace) -> Result<(Mat, Mat)> {
    require_stable(model, "gramians")?;
    let a = model.a();
    let wc = solve_lyapunov(a, &(model.b() * model.b().transpose()))?;
    let wo = solve_lyapunov(&a.transpose(), &(model.c().transpose() * model.c()))?;
    Ok((wc, wo))
}

fn require_stable(model: &StateSpace, what: &str) -> Result<()> {
    if !model.is_stable()? {
        return Err(Error::Unstable(format!("{what} requires a stable model")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BalancedRealization {
    /// Balanced model; states whose Hankel value vanishes to working
    /// precision are dropped, so its order is `effective_order`.
    pub model: StateSpace,
    /// All Hankel singular values of the input model, nonincreasing.
    pub hankel_sv: Vec<f64>,
    pub effective_order: usize,
    pub warning: Option<String>,
}

/// Factor of a symmetric PSD matrix `X = L Lᵀ` via its eigendecomposition,
/// clipping negative eigenvalues to zero. Returns the factor and the most
/// negative eigenvalue relative to the largest one.
fn psd_factor(x: &Mat) -> (Mat, f64) {
    let n = x.nrows();
    if n == 0 {
        return (Mat::zeros(0, 0), 0.0);
    }
    let eig = nalgebra::SymmetricEigen::new(linalg::symmetrize(x));
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let worst = eig.eigenvalues.min().min(0.0) / top;
    let mut l = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    (l, worst)
}

/// Square-root balancing of `model` against a gramian pair. Returns the
/// transformed model truncated to `k` states (or to the numerically
/// nonzero directions if fewer) and all Hankel values.
fn balance_with(model: &StateSpace, p: &Mat, q: &Mat, k: usize) -> Result<(StateSpace, Vec<f64>, usize)> {
    let (lc, _) = psd_factor(p);
    let (lo, _) = psd_factor(q);
    let m = lo.transpose() * &lc;
    let linalg::Svd { u, s: sv, v } = linalg::svd(&m);
    let top = sv.first().copied().unwrap_or(0.0);
    let usable = sv.iter().filter(|&&s| s > SV_FLOOR * top && s > 0.0).count();
    let r = k.min(usable);
    let n = model.order();
    let mut tr = Mat::zeros(n, r);
    let mut tl = Mat::zeros(r, n);
    for col in 0..r {
        let s = sv[col].sqrt();
        tr.set_column(col, &(&lc * v.column(col) / s));
        tl.set_row(col, &(u.column(col).transpose() * lo.transpose() / s));
    }
    let reduced = StateSpace::with_labels(
        &tl * model.a() * &tr,
        &tl * model.b(),
        model.c() * &tr,
        model.d().clone(),
        model.input_labels().to_vec(),
        model.output_labels().to_vec(),
    )?;
    Ok((reduced, sv, usable))
}

/// Balanced realization of a stable model.
pub fn balance(model: &StateSpace) -> Result<BalancedRealization> {
    let (wc, wo) = gramians(model)?;
    let n = model.order();
    let (bal, hankel_sv, effective) = balance_with(model, &wc, &wo, n)?;
    let warning = (effective < n).then(|| {
        format!("model is not minimal to working precision: effective order {effective} of {n}")
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(BalancedRealization { model: bal, hankel_sv, effective_order: effective, warning })
}

/// Unweighted balanced truncation to `k` states.
pub fn balanced_truncation(model: &StateSpace, k: usize) -> Result<StateSpace> {
    if k > model.order() {
        return Err(Error::InvalidParam(format!("target order {k} exceeds model order {}", model.order())));
    }
    let (wc, wo) = gramians(model)?;
    Ok(balance_with(model, &wc, &wo, k)?.0)
}

/// Split `model` additively into a stable part (first) and a part holding
/// the poles with `Re ≥ −margin` (second). D stays with the stable part.
pub fn stable_split(model: &StateSpace, margin: f64) -> Result<(StateSpace, StateSpace)> {
    let n = model.order();
    let mut schur = RealSchur::new(model.a())?;
    let ns = schur.reorder(|z| z.re < -margin)?;
    let t = &schur.t;
    let t11 = t.view((0, 0), (ns, ns)).into_owned();
    let t12 = t.view((0, ns), (ns, n - ns)).into_owned();
    let t22 = t.view((ns, ns), (n - ns, n - ns)).into_owned();
    let mut s = Mat::identity(n, n);
    if ns > 0 && ns < n {
        let x = linalg::solve_sylvester(&t11, &(-&t22), &(-&t12))?;
        s.view_mut((0, ns), (ns, n - ns)).copy_from(&x);
    }
    let decoupled = model.similarity(&(&schur.q * s))?;
    let (a, b, c) = (decoupled.a(), decoupled.b(), decoupled.c());
    let (m, p) = (model.inputs(), model.outputs());
    let stable = StateSpace::with_labels(
        a.view((0, 0), (ns, ns)).into_owned(),
        b.rows(0, ns).into_owned(),
        c.columns(0, ns).into_owned(),
        model.d().clone(),
        model.input_labels().to_vec(),
        model.output_labels().to_vec(),
    )?;
    let rest = StateSpace::with_labels(
        a.view((ns, ns), (n - ns, n - ns)).into_owned(),
        b.rows(ns, n - ns).into_owned(),
        c.columns(ns, n - ns).into_owned(),
        Mat::zeros(p, m),
        model.input_labels().to_vec(),
        model.output_labels().to_vec(),
    )?;
    Ok((stable, rest))
}

/// Weight `W = P̃K (I + P̃K)⁻¹` for a negative-feedback controller `K`
/// acting on the plant `P̃` (controller outputs drive plant inputs).
pub fn closed_loop_weight(plant: &StateSpace, controller: &StateSpace) -> Result<StateSpace> {
    feedback(plant, controller, -1.0)
}

/// Frequency-weighted balanced truncation of a negative-feedback
/// controller to `k` states. The closed-loop weight `W` multiplies the
/// controller error on its input side, `(K − K_r)·W`; the weighted
/// controllability gramian is taken from the cascade `W → K` restricted
/// to the controller states, the observability gramian from `K` itself.
///
/// Controller modes that are not strictly stable are kept exactly and
/// only the stable part is reduced. Directions whose weighted Hankel
/// singular value is below `1e-14` of the largest are always dropped, so
/// a non-minimal controller can come back with fewer than `k` states.
pub fn weighted_reduce(controller: &StateSpace, plant: &StateSpace, k: usize) -> Result<StateSpace> {
    let n = controller.order();
    if k > n {
        return Err(Error::InvalidParam(format!("target order {k} exceeds controller order {n}")));
    }
    if !feedback_path(plant, controller, -1.0)?.is_stable()? {
        return Err(Error::Unstable("closed loop of the full-order controller".into()));
    }
    let w = closed_loop_weight(plant, controller)?;
    let scale = controller.a().norm().max(1.0);
    let (stable, rest) = stable_split(controller, 1e-9 * scale)?;
    if rest.order() > k {
        return Err(Error::InvalidParam(format!(
            "controller has {} non-stable modes; cannot reduce to {k} states",
            rest.order()
        )));
    }
    let cascade = series(&w, &stable)?;
    let nw = w.order();
    let p_all = solve_lyapunov(cascade.a(), &(cascade.b() * cascade.b().transpose()))?;
    let p = p_all.view((nw, nw), (stable.order(), stable.order())).into_owned();
    let q = solve_lyapunov(&stable.a().transpose(), &(stable.c().transpose() * stable.c()))?;
    for (name, g) in [("controllability", &p), ("observability", &q)] {
        let (_, worst) = psd_factor(g);
        if worst < -1e-6 {
            return Err(Error::Numerical(format!("weighted {name} gramian is indefinite (λmin/λmax = {worst:.2e})")));
        }
        if worst < -1e-12 {
            log::warn!("weighted {name} gramian clipped at zero (λmin/λmax = {worst:.2e})");
        }
    }
    let (reduced, _, _) = balance_with(&stable, &p, &q, k - rest.order())?;
    if rest.order() == 0 {
        Ok(reduced)
    } else {
        reduced.add(&rest)
    }
}

/// Frequencies (rad/s) spanning the model dynamics for initial grids.
fn dynamics_grid(model: &StateSpace, n: usize) -> Result<Vec<f64>> {
    let poles = model.poles()?;
    let mags: Vec<f64> = poles.iter().map(|p| p.norm()).filter(|&m| m > 0.0).collect();
    let (lo, hi) = if mags.is_empty() {
        (1e-2, 1e2)
    } else {
        let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mags.iter().copied().fold(0.0, f64::max);
        (lo / 10.0, hi * 10.0)
    };
    let mut grid = logspace(lo, hi.max(lo * 1e3), n);
    grid.push(0.0);
    grid.extend(poles.iter().map(|p| p.im.abs()).filter(|w| *w > 0.0));
    Ok(grid)
}

fn sigma_at(model: &StateSpace, w: f64) -> Result<f64> {
    if w.is_infinite() {
        return Ok(linalg::sigma_max(&linalg::to_complex(model.d())));
    }
    Ok(linalg::sigma_max(&model.eval_response(w)?))
}

/// Imaginary-axis eigenvalue frequencies of the γ-Hamiltonian.
fn hamiltonian_crossings(model: &StateSpace, gamma: f64) -> Result<Vec<f64>> {
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let (n, m, p) = (model.order(), model.inputs(), model.outputs());
    let g2 = gamma * gamma;
    let r = Mat::identity(m, m) * g2 - d.transpose() * d;
    let s = Mat::identity(p, p) * g2 - d * d.transpose();
    let r_inv = r.try_inverse().ok_or_else(|| Error::Numerical("γ²I − DᵀD singular".into()))?;
    let s_inv = s.try_inverse().ok_or_else(|| Error::Numerical("γ²I − DDᵀ singular".into()))?;
    let a_h = a + b * &r_inv * d.transpose() * c;
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&(b * &r_inv * b.transpose() * gamma));
    h.view_mut((n, 0), (n, n)).copy_from(&(-(c.transpose() * &s_inv * c) * gamma));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let mut ws: Vec<f64> = linalg::eigenvalues(&h)?
        .into_iter()
        .filter(|z: &Complex64| z.re.abs() < 1e-7 * scale.max(z.norm()) && z.im >= 0.0)
        .map(|z| z.im)
        .collect();
    ws.sort_by(f64::total_cmp);
    Ok(ws)
}

/// H∞ norm of a stable model to relative accuracy `1e-4`, via a
/// level-set iteration on the Hamiltonian started from a dense grid.
pub fn hinf_norm(model: &StateSpace) -> Result<f64> {
    hinf_norm_with_peak(model).map(|(g, _)| g)
}

/// H∞ norm together with a frequency (rad/s) at which it is attained.
pub fn hinf_norm_with_peak(model: &StateSpace) -> Result<(f64, f64)> {
    const TOL: f64 = 1e-4;
    if model.order() > 0 && !model.is_stable()? {
        return Err(Error::Unstable("H∞ norm is infinite for an unstable model".into()));
    }
    let mut best = (sigma_at(model, f64::INFINITY)?, f64::INFINITY);
    if model.order() == 0 {
        return Ok(best);
    }
    for w in dynamics_grid(model, 400)? {
        let s = sigma_at(model, w)?;
        if s > best.0 {
            best = (s, w);
        }
    }
    if best.0 == 0.0 {
        return Ok(best);
    }
    for _ in 0..60 {
        let gamma = (1.0 + 2.0 * TOL) * best.0;
        let ws = hamiltonian_crossings(model, gamma)?;
        if ws.is_empty() {
            break;
        }
        let mut probes: Vec<f64> = ws.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        probes.extend(ws.iter().copied());
        if ws.len() == 1 {
            probes.push(0.0);
        }
        for w in probes {
            let s = sigma_at(model, w)?;
            if s > best.0 {
                best = (s, w);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReductionReport {
    pub stable: bool,
    pub weighted_error: f64,
    pub full_order: usize,
    pub reduced_order: usize,
}

/// Closed-loop stability of `plant` with the reduced controller and the
/// weighted error `‖(K − K_r)·W‖∞`, `W` built from the full controller.
/// Never fails on an unstable outcome; the report carries it.
pub fn verify_reduced(plant: &StateSpace, full: &StateSpace, reduced: &StateSpace) -> Result<ReductionReport> {
    let stable = feedback_path(plant, reduced, -1.0)?.is_stable()?;
    let w = closed_loop_weight(plant, full)?;
    let diff = full.sub(reduced)?;
    let weighted = series(&w, &diff)?;
    let weighted_error = if weighted.is_stable()? || weighted.order() == 0 {
        hinf_norm(&weighted)?
    } else {
        // the error system may carry unstable controller modes that the
        // weight cannot cancel; drop exactly cancelled ones first
        let scale = weighted.a().norm().max(1.0);
        let (st, rest) = stable_split(&weighted, 1e-9 * scale)?;
        if rest.c().norm() <= 1e-9 * weighted.c().norm().max(1.0) || rest.b().norm() <= 1e-9 * weighted.b().norm().max(1.0) {
            hinf_norm(&st)?
        } else {
            f64::INFINITY
        }
    };
    Ok(ReductionReport { stable, weighted_error, full_order: full.order(), reduced_order: reduced.order() })
}
