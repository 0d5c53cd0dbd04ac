//! State-space containers, frequency-response evaluation and interconnection.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};

/// Continuous-time LTI system `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

fn default_labels(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{}", i + 1)).collect()
}

fn check_dims(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("A is {}x{}, must be square", n, a.ncols())));
    }
    if b.nrows() != n {
        return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
    }
    if c.ncols() != n {
        return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
    }
    if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "D is {}x{}, expected {}x{}",
            d.nrows(),
            d.ncols(),
            c.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        check_dims(&a, &b, &c, &d)?;
        let (m, p) = (b.ncols(), c.nrows());
        Ok(Self { a, b, c, d, input_labels: default_labels("u", m), output_labels: default_labels("y", p) })
    }

    pub fn with_labels(
        a: Mat,
        b: Mat,
        c: Mat,
        d: Mat,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self> {
        check_dims(&a, &b, &c, &d)?;
        if input_labels.len() != b.ncols() || output_labels.len() != c.nrows() {
            return Err(Error::Dimension("label count does not match channel count".into()));
        }
        Ok(Self { a, b, c, d, input_labels, output_labels })
    }

    /// Memoryless system `y = D u`.
    pub fn static_gain(d: Mat) -> Self {
        let (p, m) = d.shape();
        Self::new(Mat::zeros(0, 0), Mat::zeros(0, m), Mat::zeros(p, 0), d).expect("static gain dims")
    }

    pub fn siso(a: Mat, b: Mat, c: Mat, d: f64) -> Result<Self> {
        Self::new(a, b, c, Mat::from_element(1, 1, d))
    }

    /// Controllable canonical realization of `num(s)/den(s)`, coefficients
    /// in descending powers of `s`. Requires `deg num ≤ deg den`.
    pub fn from_transfer_function(num: &[f64], den: &[f64]) -> Result<Self> {
        let den: Vec<f64> = den.iter().copied().skip_while(|&c| c == 0.0).collect();
        let num: Vec<f64> = num.iter().copied().skip_while(|&c| c == 0.0).collect();
        if den.is_empty() {
            return Err(Error::InvalidParam("denominator is identically zero".into()));
        }
        if num.len() > den.len() {
            return Err(Error::InvalidParam("transfer function is improper".into()));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParam("non-finite coefficient".into()));
        }
        let n = den.len() - 1;
        let lead = den[0];
        let a_coef: Vec<f64> = den[1..].iter().map(|c| c / lead).collect();
        let mut b_coef = vec![0.0; n + 1];
        for (k, c) in num.iter().enumerate() {
            b_coef[n + 1 - num.len() + k] = c / lead;
        }
        let d = b_coef[0];
        let mut a = Mat::zeros(n, n);
        let mut c = Mat::zeros(1, n);
        for i in 0..n {
            a[(0, i)] = -a_coef[i];
            if i + 1 < n {
                a[(i + 1, i)] = 1.0;
            }
            c[(0, i)] = b_coef[i + 1] - d * a_coef[i];
        }
        let mut b = Mat::zeros(n, 1);
        if n > 0 {
            b[(0, 0)] = 1.0;
        }
        Self::siso(a, b, c, d)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }
    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn relabel(mut self, inputs: &[&str], outputs: &[&str]) -> Result<Self> {
        if inputs.len() != self.inputs() || outputs.len() != self.outputs() {
            return Err(Error::Dimension("label count does not match channel count".into()));
        }
        self.input_labels = inputs.iter().map(|s| s.to_string()).collect();
        self.output_labels = outputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn input_index(&self, label: &str) -> Option<usize> {
        self.input_labels.iter().position(|l| l == label)
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        self.output_labels.iter().position(|l| l == label)
    }

    /// Transfer matrix at a complex frequency `s`.
    pub fn eval_s(&self, s: Complex64) -> Result<CMat> {
        resolvent_eval(&self.a, &self.b, &self.c, &self.d, s)
            .ok_or(Error::EvaluationAtPole { omega: s.im })
    }

    /// Transfer matrix `C (iωI − A)⁻¹ B + D` at angular frequency `omega`.
    pub fn eval_response(&self, omega: f64) -> Result<CMat> {
        self.eval_s(Complex64::new(0.0, omega))
    }

    /// Scalar response of a SISO model.
    pub fn eval_siso(&self, omega: f64) -> Result<Complex64> {
        if self.inputs() != 1 || self.outputs() != 1 {
            return Err(Error::Dimension("eval_siso on a MIMO model".into()));
        }
        Ok(self.eval_response(omega)?[(0, 0)])
    }

    pub fn dc_gain(&self) -> Result<Mat> {
        Ok(self.eval_response(0.0)?.map(|z| z.re))
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    /// Strict left-half-plane test with an optional guard band.
    pub fn is_stable_with_margin(&self, tol_margin: f64) -> Result<bool> {
        if self.order() == 0 {
            return Ok(true);
        }
        Ok(self.poles()?.iter().all(|p| p.re < -tol_margin))
    }

    pub fn is_stable(&self) -> Result<bool> {
        self.is_stable_with_margin(0.0)
    }

    /// Sample the response on a grid given in Hz.
    pub fn frequency_response(&self, freqs_hz: &[f64]) -> Result<FrequencyResponse> {
        let h = freqs_hz
            .iter()
            .map(|f| self.eval_response(2.0 * PI * f))
            .collect::<Result<Vec<_>>>()?;
        FrequencyResponse::new(freqs_hz.to_vec(), h)
    }

    /// State coordinate change `x = T x̄`.
    pub fn similarity(&self, t: &Mat) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParam("singular similarity transform".into()))?;
        Ok(Self {
            a: &t_inv * &self.a * t,
            b: &t_inv * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
            input_labels: self.input_labels.clone(),
            output_labels: self.output_labels.clone(),
        })
    }

    /// Keep the listed outputs (in the given order).
    pub fn select_outputs(&self, idx: &[usize]) -> Result<Self> {
        if idx.iter().any(|&i| i >= self.outputs()) {
            return Err(Error::Dimension("output index out of range".into()));
        }
        Ok(Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.select_rows(idx),
            d: self.d.select_rows(idx),
            input_labels: self.input_labels.clone(),
            output_labels: idx.iter().map(|&i| self.output_labels[i].clone()).collect(),
        })
    }

    /// Keep the listed inputs (in the given order).
    pub fn select_inputs(&self, idx: &[usize]) -> Result<Self> {
        if idx.iter().any(|&i| i >= self.inputs()) {
            return Err(Error::Dimension("input index out of range".into()));
        }
        Ok(Self {
            a: self.a.clone(),
            b: self.b.select_columns(idx),
            c: self.c.clone(),
            d: self.d.select_columns(idx),
            input_labels: idx.iter().map(|&i| self.input_labels[i].clone()).collect(),
            output_labels: self.output_labels.clone(),
        })
    }

    /// Multiply the output by a scalar.
    pub fn scale_output(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.c *= k;
        out.d *= k;
        out
    }

    pub fn negate(&self) -> Self {
        self.scale_output(-1.0)
    }

    /// `self + other` (same input and output channels).
    pub fn add(&self, other: &StateSpace) -> Result<Self> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::Dimension("parallel connection needs equal channel counts".into()));
        }
        let (n1, n2) = (self.order(), other.order());
        let n = n1 + n2;
        let mut a = Mat::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = Mat::zeros(n, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs())).copy_from(&other.b);
        let mut c = Mat::zeros(self.outputs(), n);
        c.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.outputs(), n2)).copy_from(&other.c);
        Ok(Self {
            a,
            b,
            c,
            d: &self.d + &other.d,
            input_labels: self.input_labels.clone(),
            output_labels: self.output_labels.clone(),
        })
    }

    pub fn sub(&self, other: &StateSpace) -> Result<Self> {
        self.add(&other.negate())
    }

    /// Copy of the model keeping only the leading `k` states.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.order());
        Self {
            a: self.a.view((0, 0), (k, k)).into_owned(),
            b: self.b.rows(0, k).into_owned(),
            c: self.c.columns(0, k).into_owned(),
            d: self.d.clone(),
            input_labels: self.input_labels.clone(),
            output_labels: self.output_labels.clone(),
        }
    }
}

/// Evaluate `C (sI − A)⁻¹ B + D` with one LU factorization; `None` when
/// `s` is (numerically) an eigenvalue of `A`.
pub(crate) fn resolvent_eval(a: &Mat, b: &Mat, c: &Mat, d: &Mat, s: Complex64) -> Option<CMat> {
    let n = a.nrows();
    let mut out = linalg::to_complex(d);
    if n == 0 {
        return Some(out);
    }
    let mut m = a.map(|v| Complex64::new(-v, 0.0));
    for i in 0..n {
        m[(i, i)] += s;
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-14 * scale) {
        return None;
    }
    let x = lu.solve(&linalg::to_complex(b))?;
    out += linalg::to_complex(c) * x;
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(out)
}

/// Unity-feedback loop with `controller` in the forward path:
/// `e = r + sign · y`, `u = controller(e)`, `y = plant(u)`. With
/// `sign = -1` the reference-to-output map is `PC (I + PC)⁻¹`.
/// States are ordered controller first, then plant.
pub fn feedback(plant: &StateSpace, controller: &StateSpace, sign: f64) -> Result<StateSpace> {
    if plant.outputs() != controller.inputs() || plant.inputs() != controller.outputs() {
        return Err(Error::Dimension(format!(
            "plant is {}x{}, controller is {}x{}",
            plant.outputs(),
            plant.inputs(),
            controller.outputs(),
            controller.inputs()
        )));
    }
    let open = series(controller, plant)?;
    let p = plant.outputs();
    feedback_path(&open, &StateSpace::static_gain(Mat::identity(p, p)), sign)
}

/// Interconnection with `controller` in the feedback path:
/// `u = r + sign · controller(y)`. Inputs are the plant inputs, outputs
/// the plant outputs; states are ordered plant first.
pub fn feedback_path(plant: &StateSpace, controller: &StateSpace, sign: f64) -> Result<StateSpace> {
    if plant.outputs() != controller.inputs() || plant.inputs() != controller.outputs() {
        return Err(Error::Dimension(format!(
            "plant is {}x{}, controller is {}x{}",
            plant.outputs(),
            plant.inputs(),
            controller.outputs(),
            controller.inputs()
        )));
    }
    let (n1, n2) = (plant.order(), controller.order());
    let (m, p) = (plant.inputs(), plant.outputs());
    let (a1, b1, c1, d1) = (&plant.a, &plant.b, &plant.c, &plant.d);
    let (a2, b2, c2, d2) = (&controller.a, &controller.b, &controller.c, &controller.d);
    let e = (Mat::identity(p, p) - d1 * d2 * sign).try_inverse().ok_or(Error::AlgebraicLoop)?;
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::AlgebraicLoop);
    }
    // y = E (C1 x1 + s D1 C2 x2 + D1 r),  u = r + s C2 x2 + s D2 y
    let y_x1 = &e * c1;
    let y_x2 = &e * d1 * c2 * sign;
    let y_r = &e * d1;
    let u_x1 = d2 * &y_x1 * sign;
    let u_x2 = c2 * sign + d2 * &y_x2 * sign;
    let u_r = Mat::identity(m, m) + d2 * &y_r * sign;

    let n = n1 + n2;
    let mut a = Mat::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&(a1 + b1 * &u_x1));
    a.view_mut((0, n1), (n1, n2)).copy_from(&(b1 * &u_x2));
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(b2 * &y_x1));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&(a2 + b2 * &y_x2));
    let mut b = Mat::zeros(n, m);
    b.view_mut((0, 0), (n1, m)).copy_from(&(b1 * &u_r));
    b.view_mut((n1, 0), (n2, m)).copy_from(&(b2 * &y_r));
    let mut c = Mat::zeros(p, n);
    c.view_mut((0, 0), (p, n1)).copy_from(&y_x1);
    c.view_mut((0, n1), (p, n2)).copy_from(&y_x2);
    StateSpace::with_labels(a, b, c, y_r, plant.input_labels.clone(), plant.output_labels.clone())
}

/// Cascade: the output of `first` drives the input of `second`.
pub fn series(first: &StateSpace, second: &StateSpace) -> Result<StateSpace> {
    if first.outputs() != second.inputs() {
        return Err(Error::Dimension(format!(
            "series: first has {} outputs, second has {} inputs",
            first.outputs(),
            second.inputs()
        )));
    }
    let (n1, n2) = (first.order(), second.order());
    let n = n1 + n2;
    let (m, p) = (first.inputs(), second.outputs());
    let mut a = Mat::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&first.a);
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(&second.b * &first.c));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&second.a);
    let mut b = Mat::zeros(n, m);
    b.view_mut((0, 0), (n1, m)).copy_from(&first.b);
    b.view_mut((n1, 0), (n2, m)).copy_from(&(&second.b * &first.d));
    let mut c = Mat::zeros(p, n);
    c.view_mut((0, 0), (p, n1)).copy_from(&(&second.d * &first.c));
    c.view_mut((0, n1), (p, n2)).copy_from(&second.c);
    StateSpace::with_labels(
        a,
        b,
        c,
        &second.d * &first.d,
        first.input_labels.clone(),
        second.output_labels.clone(),
    )
}

/// Discrete-time system `x[k+1] = Ad x[k] + Bd u[k]`, `y[k] = Cd x[k] + Dd u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
    ts: f64,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

impl DiscreteStateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, ts: f64) -> Result<Self> {
        check_dims(&a, &b, &c, &d)?;
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Error::InvalidParam(format!("sample period must be positive, got {ts}")));
        }
        let (m, p) = (b.ncols(), c.nrows());
        Ok(Self { a, b, c, d, ts, input_labels: default_labels("u", m), output_labels: default_labels("y", p) })
    }

    pub fn with_labels_of(mut self, model: &StateSpace) -> Self {
        if model.inputs() == self.inputs() && model.outputs() == self.outputs() {
            self.input_labels = model.input_labels.clone();
            self.output_labels = model.output_labels.clone();
        }
        self
    }

    pub fn with_labels(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        if inputs.len() != self.inputs() || outputs.len() != self.outputs() {
            return Err(Error::Dimension("label count does not match channel count".into()));
        }
        self.input_labels = inputs;
        self.output_labels = outputs;
        Ok(self)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn ts(&self) -> f64 {
        self.ts
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }
    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// Response at `z = exp(iωTs)`.
    pub fn eval_response(&self, omega: f64) -> Result<CMat> {
        let z = Complex64::from_polar(1.0, omega * self.ts);
        resolvent_eval(&self.a, &self.b, &self.c, &self.d, z).ok_or(Error::EvaluationAtPole { omega })
    }

    pub fn eval_siso(&self, omega: f64) -> Result<Complex64> {
        if self.inputs() != 1 || self.outputs() != 1 {
            return Err(Error::Dimension("eval_siso on a MIMO model".into()));
        }
        Ok(self.eval_response(omega)?[(0, 0)])
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    pub fn is_stable_with_margin(&self, tol_margin: f64) -> Result<bool> {
        if self.order() == 0 {
            return Ok(true);
        }
        Ok(self.poles()?.iter().all(|p| p.norm() < 1.0 - tol_margin))
    }

    pub fn is_stable(&self) -> Result<bool> {
        self.is_stable_with_margin(0.0)
    }

    /// One update: returns `(x_next, y)`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let y = &self.c * x + &self.d * u;
        let xn = &self.a * x + &self.b * u;
        (xn, y)
    }
}

/// Sampled complex frequency response on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    freqs_hz: Vec<f64>,
    h: Vec<CMat>,
}

impl FrequencyResponse {
    pub fn new(freqs_hz: Vec<f64>, h: Vec<CMat>) -> Result<Self> {
        if freqs_hz.len() != h.len() {
            return Err(Error::Dimension("frequency count differs from sample count".into()));
        }
        if freqs_hz.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidParam("frequencies must be positive and finite".into()));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParam("frequencies must be strictly increasing".into()));
        }
        if let Some(first) = h.first() {
            if h.iter().any(|m| m.shape() != first.shape()) {
                return Err(Error::Dimension("response samples have non-uniform shape".into()));
            }
        }
        Ok(Self { freqs_hz, h })
    }

    /// SISO convenience constructor.
    pub fn from_siso(freqs_hz: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        Self::new(freqs_hz, values.into_iter().map(|v| CMat::from_element(1, 1, v)).collect())
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }
    pub fn samples(&self) -> &[CMat] {
        &self.h
    }
    pub fn len(&self) -> usize {
        self.h.len()
    }
    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
    /// (outputs, inputs) of each sample.
    pub fn shape(&self) -> (usize, usize) {
        self.h.first().map(|m| m.shape()).unwrap_or((0, 0))
    }

    pub fn siso_values(&self) -> Result<Vec<Complex64>> {
        if self.shape() != (1, 1) {
            return Err(Error::Dimension("response is not SISO".into()));
        }
        Ok(self.h.iter().map(|m| m[(0, 0)]).collect())
    }

    /// Sample-wise product `self · other` on the same grid.
    pub fn product(&self, other: &FrequencyResponse) -> Result<Self> {
        if self.freqs_hz != other.freqs_hz {
            return Err(Error::Dimension("product of responses on different grids".into()));
        }
        let h = self.h.iter().zip(&other.h).map(|(a, b)| a * b).collect();
        Self::new(self.freqs_hz.clone(), h)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { freqs_hz: self.freqs_hz.clone(), h: self.h.iter().map(|m| m * Complex64::new(c, 0.0)).collect() }
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    fn lag(p: f64) -> StateSpace {
        StateSpace::siso(m(1, 1, &[-p]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), 0.0).unwrap()
    }

    fn integrator() -> StateSpace {
        StateSpace::siso(m(1, 1, &[0.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), 0.0).unwrap()
    }

    #[test]
    fn integrator_at_unit_frequency() {
        let g = integrator().eval_siso(1.0).unwrap();
        assert_relative_eq!(g.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(g.im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn first_order_lag_at_corner() {
        let g = lag(1.0).eval_siso(1.0).unwrap();
        assert_relative_eq!(g.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g.arg().to_degrees(), -45.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluation_at_pole_is_an_error() {
        assert!(matches!(integrator().eval_response(0.0), Err(Error::EvaluationAtPole { .. })));
    }

    #[test]
    fn conjugate_symmetry() {
        let g = StateSpace::new(
            m(2, 2, &[0.0, 1.0, -2.0, -0.3]),
            m(2, 1, &[0.0, 1.0]),
            m(1, 2, &[1.0, 0.5]),
            m(1, 1, &[0.1]),
        )
        .unwrap();
        for w in [0.1, 1.0, 1.4, 7.0] {
            let a = g.eval_siso(w).unwrap();
            let b = g.eval_siso(-w).unwrap();
            assert_relative_eq!(a.re, b.re, epsilon = 1e-14);
            assert_relative_eq!(a.im, -b.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn pole_examples() {
        let g = StateSpace::new(m(2, 2, &[0.0, 1.0, -2.0, -3.0]), m(2, 1, &[0.0, 1.0]), m(1, 2, &[1.0, 0.0]), m(1, 1, &[0.0]))
            .unwrap();
        let mut p = g.poles().unwrap();
        linalg::sort_spectrum(&mut p);
        assert_relative_eq!(p[0].re, -2.0, epsilon = 1e-12);
        assert_relative_eq!(p[1].re, -1.0, epsilon = 1e-12);
        assert_eq!(integrator().poles().unwrap(), vec![Complex64::new(0.0, 0.0)]);
        let twin = StateSpace::new(m(2, 2, &[-1.0, 0.0, 0.0, -1.0]), Mat::zeros(2, 1), Mat::zeros(1, 2), Mat::zeros(1, 1)).unwrap();
        let p = twin.poles().unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|z| (z - Complex64::new(-1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn stability_examples() {
        assert!(lag(1.0).is_stable().unwrap());
        assert!(!integrator().is_stable().unwrap());
        let d = DiscreteStateSpace::new(m(1, 1, &[0.99]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[0.0]), 0.3).unwrap();
        assert!(d.is_stable().unwrap());
        assert!(!lag(1.0).is_stable_with_margin(1.5).unwrap());
    }

    #[test]
    fn feedback_examples() {
        let cl = feedback(&integrator(), &StateSpace::static_gain(m(1, 1, &[1.0])), -1.0).unwrap();
        let p = cl.poles().unwrap();
        assert_relative_eq!(p[0].re, -1.0, epsilon = 1e-14);

        let cl = feedback(&lag(3.0), &StateSpace::static_gain(m(1, 1, &[0.0])), -1.0).unwrap();
        assert_relative_eq!(cl.poles().unwrap()[0].re, -3.0, epsilon = 1e-14);

        let cl = feedback(&integrator(), &StateSpace::static_gain(m(1, 1, &[2.0])), -1.0).unwrap();
        assert_relative_eq!(cl.eval_siso(0.0).unwrap().re, 1.0, epsilon = 1e-14);
        assert_eq!(cl.order(), 1);
        // feedback-path form: P / (1 + P K)
        let cl = feedback_path(&integrator(), &StateSpace::static_gain(m(1, 1, &[2.0])), -1.0).unwrap();
        assert_relative_eq!(cl.eval_siso(0.0).unwrap().re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn feedback_algebraic_loop() {
        let p = StateSpace::static_gain(m(1, 1, &[1.0]));
        let k = StateSpace::static_gain(m(1, 1, &[1.0]));
        assert!(matches!(feedback(&p, &k, 1.0), Err(Error::AlgebraicLoop)));
    }

    #[test]
    fn series_examples() {
        let s = series(&lag(1.0), &lag(2.0)).unwrap();
        assert_relative_eq!(s.eval_siso(0.0).unwrap().re, 0.5, epsilon = 1e-14);
        let mut p = s.poles().unwrap();
        linalg::sort_spectrum(&mut p);
        assert_relative_eq!(p[0].re, -2.0);
        assert_relative_eq!(p[1].re, -1.0);
        let g = lag(1.0);
        let gi = series(&g, &StateSpace::static_gain(m(1, 1, &[1.0]))).unwrap();
        for w in logspace(0.01, 100.0, 20) {
            assert_relative_eq!(gi.eval_siso(w).unwrap().re, g.eval_siso(w).unwrap().re, epsilon = 1e-15);
        }
        assert!(series(&lag(1.0), &StateSpace::static_gain(Mat::zeros(1, 2))).is_err());
    }

    #[test]
    fn labels_follow_interconnection() {
        let p = lag(1.0).relabel(&["u"], &["y"]).unwrap();
        let k = StateSpace::static_gain(m(1, 1, &[1.0])).relabel(&["e"], &["cmd"]).unwrap();
        let s = series(&k, &p).unwrap();
        assert_eq!(s.input_labels(), ["e"]);
        assert_eq!(s.output_labels(), ["y"]);
    }

    #[test]
    fn response_grid_validation() {
        assert!(FrequencyResponse::from_siso(vec![1.0, 1.0], vec![Complex64::new(1.0, 0.0); 2]).is_err());
        assert!(FrequencyResponse::from_siso(vec![0.0, 1.0], vec![Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn transfer_function_realization() {
        // (s + 3) / (2 s^2 + 6 s + 4) at s = 1j
        let g = StateSpace::from_transfer_function(&[1.0, 3.0], &[2.0, 6.0, 4.0]).unwrap();
        let s = Complex64::new(0.0, 1.0);
        let want = (s + 3.0) / (2.0 * s * s + 6.0 * s + 4.0);
        assert!((g.eval_siso(1.0).unwrap() - want).norm() < 1e-14);
        let biproper = StateSpace::from_transfer_function(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(biproper.d()[(0, 0)], 1.0);
        assert!(StateSpace::from_transfer_function(&[1.0, 0.0, 0.0], &[1.0, 1.0]).is_err());
        assert_eq!(StateSpace::from_transfer_function(&[2.0], &[0.0, 4.0]).unwrap().order(), 0);
    }
}
