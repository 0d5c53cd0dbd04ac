//! Continuous-time Lyapunov and algebraic Riccati solvers.
//!
//! The Riccati solver extracts the stable invariant subspace of the
//! Hamiltonian from an ordered real Schur form and then polishes the result
//! with Newton–Kleinman steps. If the Schur route fails (ordering breakdown,
//! singular basis) the solver falls back to a pure Newton–Kleinman iteration
//! seeded with a stabilizing gain.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, RealSchur};

/// `A P + P Aᵀ + Q = 0`.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!("Lyapunov: A is {}x{}, Q is {}x{}", n, a.ncols(), q.nrows(), q.ncols())));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let p = linalg::solve_sylvester(a, &a.transpose(), &(-q)).map_err(|e| match e {
        Error::SingularSylvester => Error::SingularLyapunov,
        other => other,
    })?;
    Ok(linalg::symmetrize(&p))
}

/// Relative residual of a Lyapunov solution.
pub fn lyapunov_residual(a: &Mat, q: &Mat, p: &Mat) -> f64 {
    let r = a * p + p * a.transpose() + q;
    r.norm() / (2.0 * a.norm() * p.norm() + q.norm()).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CareMethod {
    Schur,
    Newton,
}

#[derive(Debug, Clone, Copy)]
pub struct CareOptions {
    /// Accept a solution only if its relative residual is below this.
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for CareOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_newton: 60 }
    }
}

/// Stabilizing solution of `XA + AᵀX + Q − X B R⁻¹ Bᵀ X = 0`.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub x: Mat,
    pub relative_residual: f64,
    pub closed_loop_spectrum: Vec<Complex64>,
    pub method: CareMethod,
    pub newton_steps: usize,
}

struct Problem<'a> {
    a: &'a Mat,
    q: &'a Mat,
    g: Mat,
}

impl Problem<'_> {
    fn residual_matrix(&self, x: &Mat) -> Mat {
        x * self.a + self.a.transpose() * x + self.q - x * &self.g * x
    }

    fn relative_residual(&self, x: &Mat) -> f64 {
        let denom = self.q.norm() + 2.0 * self.a.norm() * x.norm() + x.norm().powi(2) * self.g.norm();
        self.residual_matrix(x).norm() / denom.max(1.0)
    }

    fn closed_loop(&self, x: &Mat) -> Mat {
        self.a - &self.g * x
    }

    /// One Newton–Kleinman step: solve `AcᵀX⁺ + X⁺Ac + Q + XGX = 0`.
    fn newton_step(&self, x: &Mat) -> Result<Mat> {
        let ac = self.closed_loop(x);
        let rhs = self.q + x * &self.g * x;
        solve_lyapunov(&ac.transpose(), &rhs)
    }
}

fn check_symmetric(name: &str, m: &Mat) -> Result<()> {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).norm() > 1e-10 * scale {
        return Err(Error::InvalidParam(format!("{name} is not symmetric")));
    }
    Ok(())
}

pub fn solve_care(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<CareSolution> {
    solve_care_with(a, b, q, r, CareOptions::default())
}

pub fn solve_care_with(a: &Mat, b: &Mat, q: &Mat, r: &Mat, opts: CareOptions) -> Result<CareSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension("CARE operand shapes are inconsistent".into()));
    }
    check_symmetric("Q", q)?;
    check_symmetric("R", r)?;
    let (qmin, qmax) = linalg::sym_eig_range(q);
    if qmin < -1e-10 * qmax.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParam(format!("Q is indefinite (min eigenvalue {qmin:.3e})")));
    }
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(r))
        .ok_or_else(|| Error::InvalidParam("R is not positive definite".into()))?;
    let g = linalg::symmetrize(&(b * chol.solve(&b.transpose())));
    let q = linalg::symmetrize(q);
    let prob = Problem { a, q: &q, g };
    if n == 0 {
        return Ok(CareSolution {
            x: Mat::zeros(0, 0),
            relative_residual: 0.0,
            closed_loop_spectrum: vec![],
            method: CareMethod::Schur,
            newton_steps: 0,
        });
    }

    let schur = schur_solution(&prob).and_then(|x| refine(&prob, x, opts, 1).map(|(x, k)| (x, k, CareMethod::Schur)));
    let (x, steps, method) = match schur {
        Ok(found) if accept(&prob, &found.0, opts).is_ok() => found,
        first => {
            let seed = stabilizing_seed(&prob)?;
            match refine(&prob, seed, opts, opts.max_newton) {
                Ok((x, k)) => (x, k, CareMethod::Newton),
                Err(e) => return Err(first.err().unwrap_or(e)),
            }
        }
    };
    accept(&prob, &x, opts)?;
    let spectrum = linalg::eigenvalues(&prob.closed_loop(&x))?;
    Ok(CareSolution {
        relative_residual: prob.relative_residual(&x),
        x,
        closed_loop_spectrum: spectrum,
        method,
        newton_steps: steps,
    })
}

fn accept(prob: &Problem, x: &Mat, opts: CareOptions) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Riccati("solution contains non-finite entries".into()));
    }
    let res = prob.relative_residual(x);
    if !(res <= opts.tol) {
        return Err(Error::Riccati(format!("relative residual {res:.3e} exceeds tolerance {:.1e}", opts.tol)));
    }
    let spectrum = linalg::eigenvalues(&prob.closed_loop(x))?;
    let worst = spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(Error::Riccati(format!("solution is not stabilizing (max closed-loop Re = {worst:.3e})")));
    }
    Ok(())
}

/// X = U21 U11⁻¹ from the stable invariant subspace of the Hamiltonian.
fn schur_solution(prob: &Problem) -> Result<Mat> {
    let n = prob.a.nrows();
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(prob.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&prob.g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-prob.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-prob.a.transpose()));
    let mut s = RealSchur::new(&h)?;
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let ev = s.eigenvalues();
    let on_axis = ev.iter().filter(|z| z.re.abs() <= 1e-12 * scale).count();
    if on_axis > 0 {
        return Err(Error::Riccati(format!(
            "Hamiltonian has {on_axis} eigenvalue(s) on the imaginary axis: (A, B) not stabilizable or (Q, A) not detectable"
        )));
    }
    let k = s.reorder(|z| z.re < 0.0)?;
    if k != n {
        return Err(Error::Riccati(format!("stable subspace has dimension {k}, expected {n}")));
    }
    let u11 = s.q.view((0, 0), (n, n)).into_owned();
    let u21 = s.q.view((n, 0), (n, n)).into_owned();
    let smin = linalg::singular_values(&u11).last().copied().unwrap_or(0.0);
    if !(smin > 1e-12) {
        return Err(Error::Riccati(format!(
            "stable subspace basis is singular (sigma_min = {smin:.2e}): (A, B) is not stabilizable"
        )));
    }
    // X U11 = U21  <=>  U11ᵀ Xᵀ = U21ᵀ
    let xt = u11
        .transpose()
        .lu()
        .solve(&u21.transpose())
        .ok_or_else(|| Error::Riccati("singular U11 in subspace extraction".into()))?;
    Ok(linalg::symmetrize(&xt.transpose()))
}

/// Newton–Kleinman polishing; keeps the best iterate seen. At least
/// `min_steps` steps are attempted.
fn refine(prob: &Problem, x0: Mat, opts: CareOptions, max_steps: usize) -> Result<(Mat, usize)> {
    let mut best = linalg::symmetrize(&x0);
    let mut best_res = prob.relative_residual(&best);
    let mut x = best.clone();
    let mut taken = 0;
    for k in 0..opts.max_newton.max(1) {
        if k >= max_steps && best_res <= 1e-3 * opts.tol {
            break;
        }
        if k >= max_steps && k > 0 && best_res <= opts.tol {
            break;
        }
        let next = match prob.newton_step(&x) {
            Ok(nx) => linalg::symmetrize(&nx),
            Err(e) => {
                if k == 0 && max_steps > 1 {
                    return Err(e);
                }
                break;
            }
        };
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let res = prob.relative_residual(&next);
        x = next;
        taken += 1;
        if res < best_res {
            let improved_enough = res < 0.5 * best_res;
            best = x.clone();
            best_res = res;
            if !improved_enough && best_res <= opts.tol {
                break;
            }
        } else if best_res <= opts.tol {
            break;
        }
    }
    Ok((best, taken))
}

/// Initial X with `A − G X` Hurwitz: zero for stable `A`, otherwise the
/// Bass construction from a shifted controllability-type Lyapunov solve.
fn stabilizing_seed(prob: &Problem) -> Result<Mat> {
    let n = prob.a.nrows();
    let ev = linalg::eigenvalues(prob.a)?;
    if ev.iter().all(|z| z.re < 0.0) {
        return Ok(Mat::zeros(n, n));
    }
    let beta = ev.iter().map(|z| z.re).fold(0.0, f64::max) + prob.a.norm().max(1.0);
    let shifted = prob.a + Mat::identity(n, n) * beta;
    // (A + βI) W + W (A + βI)ᵀ = 2 G with −(A + βI) Hurwitz, so W > 0.
    let w = solve_lyapunov(&(-&shifted), &(&prob.g * 2.0))?;
    let x0 = w
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Riccati("(A, B) not stabilizable: Bass seed Gramian is singular".into()))?;
    let x0 = linalg::symmetrize(&x0);
    let worst = linalg::eigenvalues(&prob.closed_loop(&x0))?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(Error::Riccati("(A, B) not stabilizable: no stabilizing seed gain found".into()));
    }
    Ok(x0)
}

/// Stabilizing solution of the filter equation
/// `A P + P Aᵀ + V1 − P Cᵀ V2⁻¹ C P = 0`, by transpose duality.
pub fn solve_filter_care(a: &Mat, c: &Mat, v1: &Mat, v2: &Mat) -> Result<CareSolution> {
    solve_filter_care_with(a, c, v1, v2, CareOptions::default())
}

pub fn solve_filter_care_with(a: &Mat, c: &Mat, v1: &Mat, v2: &Mat, opts: CareOptions) -> Result<CareSolution> {
    let mut sol = solve_care_with(&a.transpose(), &c.transpose(), v1, v2, opts)?;
    // Spectrum of (Aᵀ − CᵀV2⁻¹CP)ᵀ = A − PCᵀV2⁻¹C is the same multiset.
    linalg::sort_spectrum(&mut sol.closed_loop_spectrum);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn lyapunov_examples() {
        assert_relative_eq!(solve_lyapunov(&s(-1.0), &s(2.0)).unwrap()[(0, 0)], 1.0, epsilon = 1e-15);
        let a = Mat::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        assert_eq!(solve_lyapunov(&a, &Mat::zeros(2, 2)).unwrap().norm(), 0.0);
        let p = solve_lyapunov(&Mat::from_diagonal(&nalgebra::dvector![-1.0, -2.0]), &Mat::identity(2, 2)).unwrap();
        assert_relative_eq!(p, Mat::from_diagonal(&nalgebra::dvector![0.5, 0.25]), epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_singular_operator() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(solve_lyapunov(&a, &Mat::identity(2, 2)), Err(Error::SingularLyapunov)));
    }

    #[test]
    fn care_scalar_examples() {
        let x = solve_care(&s(-1.0), &s(1.0), &s(0.0), &s(1.0)).unwrap().x[(0, 0)];
        assert!(x.abs() < 1e-14);
        let sol = solve_care(&s(1.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 1.0 + 2f64.sqrt(), epsilon = 1e-12);
        let sol = solve_care(&s(0.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.closed_loop_spectrum[0].re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn care_rejects_bad_inputs() {
        assert!(matches!(solve_care(&s(1.0), &s(1.0), &s(1.0), &s(-1.0)), Err(Error::InvalidParam(_))));
        assert!(matches!(solve_care(&s(1.0), &s(0.0), &s(1.0), &s(1.0)), Err(Error::Riccati(_))));
        let q = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(solve_care(&Mat::identity(2, 2), &Mat::identity(2, 2), &q, &Mat::identity(2, 2)).is_err());
    }

    #[test]
    fn filter_care_examples() {
        let sol = solve_filter_care(&s(0.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 1.0, epsilon = 1e-12);
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = solve_filter_care(&a, &c, &Mat::zeros(2, 2), &s(1.0)).unwrap();
        assert!(p.x.norm() < 1e-12);
    }

    #[test]
    fn filter_care_is_dual_of_care() {
        let a = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -2.0, 0.5]);
        let c = Mat::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let v1 = Mat::identity(3, 3);
        let v2 = s(0.3);
        let p = solve_filter_care(&a, &c, &v1, &v2).unwrap();
        let x = solve_care(&a.transpose(), &c.transpose(), &v1, &v2).unwrap();
        assert_eq!(p.x, x.x);
    }

    #[test]
    fn newton_fallback_from_unstable_plant() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let prob = Problem { a: &a, q: &Mat::identity(2, 2), g: &b * b.transpose() };
        let seed = stabilizing_seed(&prob).unwrap();
        let (x, _) = refine(&prob, seed, CareOptions::default(), 60).unwrap();
        assert!(prob.relative_residual(&x) < 1e-12);
        let schur = solve_care(&a, &b, &Mat::identity(2, 2), &s(1.0)).unwrap();
        assert_relative_eq!(x, schur.x, epsilon = 1e-9);
    }
}
