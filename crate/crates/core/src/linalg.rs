//! Dense linear-algebra building blocks that nalgebra does not ship:
//! a cleaned-up real Schur form, eigenvalue reordering of that form, and a
//! Bartels–Stewart Sylvester solver.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Real Schur decomposition `M = Q T Qᵀ` with `T` upper quasi-triangular.
///
/// Negligible subdiagonal entries are set to exact zeros and every 2×2
/// diagonal block holds a genuine complex-conjugate pair, so the block
/// structure can be read off the subdiagonal.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: Mat,
    pub t: Mat,
    blocks: Vec<(usize, usize)>,
}

impl RealSchur {
    pub fn new(m: &Mat) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::Dimension(format!("Schur of non-square {}x{} matrix", n, m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen("matrix contains non-finite entries".into()));
        }
        if n == 0 {
            return Ok(Self { q: Mat::zeros(0, 0), t: Mat::zeros(0, 0), blocks: vec![] });
        }
        let max_iter = 100 * n.max(10);
        let (q, t) = match nalgebra::Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
            Some(s) => s.unpack(),
            None => {
                // A random orthogonal similarity usually breaks the cycling.
                let z = crate::linalg::deterministic_orthogonal(n);
                let mz = z.transpose() * m * &z;
                let s = nalgebra::Schur::try_new(mz, f64::EPSILON, 4 * max_iter)
                    .ok_or_else(|| Error::Eigen(format!("real Schur iteration did not converge (n = {n})")))?;
                let (q, t) = s.unpack();
                (z * q, t)
            }
        };
        let mut s = Self { q, t, blocks: vec![] };
        s.clean();
        Ok(s)
    }

    fn clean(&mut self) {
        let n = self.t.nrows();
        let scale = self.t.amax().max(f64::MIN_POSITIVE);
        for j in 0..n {
            for i in (j + 2)..n {
                self.t[(i, j)] = 0.0;
            }
        }
        for i in 0..n.saturating_sub(1) {
            let local = self.t[(i, i)].abs() + self.t[(i + 1, i + 1)].abs();
            let thresh = f64::EPSILON * if local > 0.0 { local } else { scale };
            if self.t[(i + 1, i)].abs() <= thresh {
                self.t[(i + 1, i)] = 0.0;
            }
        }
        // Guard against two adjacent nonzero subdiagonals.
        let mut i = 0;
        while i + 2 < n {
            if self.t[(i + 1, i)] != 0.0 && self.t[(i + 2, i + 1)] != 0.0 {
                if self.t[(i + 1, i)].abs() < self.t[(i + 2, i + 1)].abs() {
                    self.t[(i + 1, i)] = 0.0;
                } else {
                    self.t[(i + 2, i + 1)] = 0.0;
                }
            }
            i += 1;
        }
        let mut i = 0;
        while i + 1 < n {
            if self.t[(i + 1, i)] != 0.0 {
                self.split_real_pair(i);
                i += 2;
            } else {
                i += 1;
            }
        }
        self.rebuild_blocks();
    }

    /// Triangularize a 2×2 block whose eigenvalues are real.
    fn split_real_pair(&mut self, k: usize) {
        let (a, b, c, d) = (
            self.t[(k, k)],
            self.t[(k, k + 1)],
            self.t[(k + 1, k)],
            self.t[(k + 1, k + 1)],
        );
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc < 0.0 {
            return;
        }
        let root = disc.sqrt();
        let mid = 0.5 * (a + d);
        let lambda = if mid >= 0.0 { mid + root } else { mid - root };
        let (v0, v1) = if (lambda - a).abs() + b.abs() >= (lambda - d).abs() + c.abs() {
            (b, lambda - a)
        } else {
            (lambda - d, c)
        };
        let nv = v0.hypot(v1);
        if nv == 0.0 {
            return;
        }
        let (cs, sn) = (v0 / nv, v1 / nv);
        let g = Matrix2::new(cs, -sn, sn, cs);
        self.rotate(k, &g);
        self.t[(k + 1, k)] = 0.0;
    }

    /// Apply the orthogonal 2×2 similarity `G` acting on coordinates k, k+1.
    fn rotate(&mut self, k: usize, g: &Matrix2<f64>) {
        let n = self.t.nrows();
        for j in 0..n {
            let (x, y) = (self.t[(k, j)], self.t[(k + 1, j)]);
            self.t[(k, j)] = g[(0, 0)] * x + g[(1, 0)] * y;
            self.t[(k + 1, j)] = g[(0, 1)] * x + g[(1, 1)] * y;
        }
        for i in 0..n {
            let (x, y) = (self.t[(i, k)], self.t[(i, k + 1)]);
            self.t[(i, k)] = x * g[(0, 0)] + y * g[(1, 0)];
            self.t[(i, k + 1)] = x * g[(0, 1)] + y * g[(1, 1)];
            let (x, y) = (self.q[(i, k)], self.q[(i, k + 1)]);
            self.q[(i, k)] = x * g[(0, 0)] + y * g[(1, 0)];
            self.q[(i, k + 1)] = x * g[(0, 1)] + y * g[(1, 1)];
        }
    }

    fn rebuild_blocks(&mut self) {
        let n = self.t.nrows();
        self.blocks.clear();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                self.blocks.push((i, 2));
                i += 2;
            } else {
                self.blocks.push((i, 1));
                i += 1;
            }
        }
    }

    /// Diagonal blocks as (start, size) pairs.
    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn block_eigenvalues(&self, (k, size): (usize, usize)) -> Vec<Complex64> {
        if size == 1 {
            return vec![Complex64::new(self.t[(k, k)], 0.0)];
        }
        let (a, b, c, d) = (
            self.t[(k, k)],
            self.t[(k, k + 1)],
            self.t[(k + 1, k)],
            self.t[(k + 1, k + 1)],
        );
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        let mid = 0.5 * (a + d);
        if disc >= 0.0 {
            let r = disc.sqrt();
            vec![Complex64::new(mid + r, 0.0), Complex64::new(mid - r, 0.0)]
        } else {
            let im = (-disc).sqrt();
            vec![Complex64::new(mid, im), Complex64::new(mid, -im)]
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|&b| self.block_eigenvalues(b)).collect()
    }

    /// Reorder the form so that every block whose eigenvalues satisfy
    /// `select` comes first. Returns the dimension of the leading invariant
    /// subspace.
    pub fn reorder<F: Fn(Complex64) -> bool>(&mut self, select: F) -> Result<usize> {
        let chosen: Vec<bool> = self
            .blocks
            .iter()
            .map(|&b| select(self.block_eigenvalues(b)[0]))
            .collect();
        let mut sizes: Vec<usize> = self.blocks.iter().map(|b| b.1).collect();
        let mut flags = chosen;
        let mut dest = 0usize;
        for idx in 0..sizes.len() {
            if !flags[idx] {
                continue;
            }
            let mut pos = idx;
            while pos > dest {
                let start: usize = sizes[..pos - 1].iter().sum();
                self.swap_adjacent(start, sizes[pos - 1], sizes[pos])?;
                sizes.swap(pos - 1, pos);
                flags.swap(pos - 1, pos);
                pos -= 1;
            }
            dest += 1;
        }
        self.rebuild_blocks_from(&sizes);
        Ok(sizes.iter().zip(&flags).filter(|(_, &f)| f).map(|(s, _)| *s).sum())
    }

    fn rebuild_blocks_from(&mut self, sizes: &[usize]) {
        self.blocks.clear();
        let mut k = 0;
        for &s in sizes {
            self.blocks.push((k, s));
            k += s;
        }
    }

    /// Swap the adjacent diagonal blocks of sizes `p` and `q` that start at `k`.
    fn swap_adjacent(&mut self, k: usize, p: usize, q: usize) -> Result<()> {
        let n = self.t.nrows();
        let m = p + q;
        let t11 = self.t.view((k, k), (p, p)).into_owned();
        let t12 = self.t.view((k, k + p), (p, q)).into_owned();
        let t22 = self.t.view((k + p, k + p), (q, q)).into_owned();
        // T11 X - X T22 = -T12, then span [X; I] is invariant with spectrum of T22.
        let x = solve_small_sylvester(&t11, &(-&t22), &(-&t12))
            .ok_or_else(|| Error::Eigen("Schur reordering: blocks share eigenvalues".into()))?;
        let mut basis = Mat::zeros(m, q);
        basis.view_mut((0, 0), (p, q)).copy_from(&x);
        for i in 0..q {
            basis[(p + i, i)] = 1.0;
        }
        // Full orthogonal factor of the QR of the basis: first q columns span it.
        let full = {
            let qr = nalgebra::QR::new(basis);
            let mut eye = Mat::identity(m, m);
            qr.q_tr_mul(&mut eye);
            eye.transpose()
        };

        let rows = self.t.view((k, 0), (m, n)).into_owned();
        let new_rows = full.transpose() * rows;
        self.t.view_mut((k, 0), (m, n)).copy_from(&new_rows);
        let cols = self.t.view((0, k), (n, m)).into_owned();
        let new_cols = cols * &full;
        self.t.view_mut((0, k), (n, m)).copy_from(&new_cols);
        let qcols = self.q.view((0, k), (n, m)).into_owned();
        let new_q = qcols * &full;
        self.q.view_mut((0, k), (n, m)).copy_from(&new_q);

        let resid = self.t.view((k + q, k), (p, q)).amax();
        let scale = new_rows.amax().max(f64::MIN_POSITIVE);
        if resid > 1e-8 * scale {
            return Err(Error::Eigen(format!(
                "Schur reordering lost accuracy (residual {resid:.3e})"
            )));
        }
        self.t.view_mut((k + q, k), (p, q)).fill(0.0);
        if q == 2 {
            self.standardize_pair(k);
        }
        if p == 2 {
            self.standardize_pair(k + q);
        }
        Ok(())
    }

    fn standardize_pair(&mut self, k: usize) {
        if self.t[(k + 1, k)] == 0.0 {
            // Collapsed to triangular: only possible for a real pair, which
            // would contradict the block invariant. Leave as two 1x1 blocks.
            return;
        }
        self.split_real_pair(k);
    }
}

/// Eigenvalues of a general real matrix, each listed with multiplicity.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex64>> {
    Ok(RealSchur::new(m)?.eigenvalues())
}

/// Orthogonal matrix built from a fixed sequence of Givens rotations.
/// Used only to perturb the starting point of a stalled iteration.
pub(crate) fn deterministic_orthogonal(n: usize) -> Mat {
    let mut z = Mat::identity(n, n);
    for k in 0..n.saturating_sub(1) {
        let theta = 0.7 + 0.37 * k as f64;
        let (s, c) = theta.sin_cos();
        for i in 0..n {
            let (x, y) = (z[(i, k)], z[(i, k + 1)]);
            z[(i, k)] = c * x - s * y;
            z[(i, k + 1)] = s * x + c * y;
        }
    }
    z
}

/// Solve `A X + X B = C` for blocks of size at most 2 via the Kronecker form.
fn solve_small_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Option<Mat> {
    let (p, q) = (a.nrows(), b.nrows());
    let n = p * q;
    let mut k = Mat::zeros(n, n);
    // vec(AX) = (I ⊗ A) vec X, vec(XB) = (Bᵀ ⊗ I) vec X, column-major.
    for j in 0..q {
        for i in 0..p {
            let row = j * p + i;
            for l in 0..p {
                k[(row, j * p + l)] += a[(i, l)];
            }
            for l in 0..q {
                k[(row, l * p + i)] += b[(l, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n, c.iter().copied());
    let scale = k.amax().max(f64::MIN_POSITIVE);
    let lu = k.full_piv_lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e3 * f64::EPSILON * scale) {
        return None;
    }
    let v = lu.solve(&rhs)?;
    Some(Mat::from_column_slice(p, q, v.as_slice()))
}

/// Solve `T Y + Y S = C` with `T`, `S` upper quasi-triangular in the
/// block structure given.
fn solve_quasi_triangular(
    t: &Mat,
    t_blocks: &[(usize, usize)],
    s: &Mat,
    s_blocks: &[(usize, usize)],
    c: &Mat,
) -> Result<Mat> {
    let (n, m) = (t.nrows(), s.nrows());
    let mut y = Mat::zeros(n, m);
    for &(i0, pi) in t_blocks.iter().rev() {
        for &(j0, qj) in s_blocks {
            let mut rhs = c.view((i0, j0), (pi, qj)).into_owned();
            let below = n - (i0 + pi);
            if below > 0 {
                rhs -= t.view((i0, i0 + pi), (pi, below)) * y.view((i0 + pi, j0), (below, qj));
            }
            if j0 > 0 {
                rhs -= y.view((i0, 0), (pi, j0)) * s.view((0, j0), (j0, qj));
            }
            let tii = t.view((i0, i0), (pi, pi)).into_owned();
            let sjj = s.view((j0, j0), (qj, qj)).into_owned();
            let blk = solve_small_sylvester(&tii, &sjj, &rhs).ok_or(Error::SingularSylvester)?;
            y.view_mut((i0, j0), (pi, qj)).copy_from(&blk);
        }
    }
    Ok(y)
}

/// Bartels–Stewart solve of `A X + X B = C`.
pub fn solve_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::Dimension("Sylvester operand shapes".into()));
    }
    let sa = RealSchur::new(a)?;
    let sb = RealSchur::new(b)?;
    let c_tilde = sa.q.transpose() * c * &sb.q;
    let y = solve_quasi_triangular(&sa.t, sa.blocks(), &sb.t, sb.blocks(), &c_tilde)?;
    Ok(&sa.q * y * sb.q.transpose())
}

pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

/// Frobenius norm.
pub fn fro(x: &Mat) -> f64 {
    x.norm()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_range(x: &Mat) -> (f64, f64) {
    if x.nrows() == 0 {
        return (0.0, 0.0);
    }
    let ev = nalgebra::SymmetricEigen::new(symmetrize(x)).eigenvalues;
    (ev.min(), ev.max())
}

pub fn to_complex(x: &Mat) -> CMat {
    x.map(|v| Complex64::new(v, 0.0))
}

/// Sort eigenvalues by real part, then imaginary part.
pub fn sort_spectrum(v: &mut [Complex64]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Largest singular value of a complex matrix.
pub fn sigma_max(h: &CMat) -> f64 {
    match (h.nrows(), h.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, _) | (_, 1) => h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        (p, m) => {
            // real embedding [[Re, -Im], [Im, Re]] repeats each singular value
            let mut e = Mat::zeros(2 * p, 2 * m);
            for i in 0..p {
                for j in 0..m {
                    let z = h[(i, j)];
                    e[(i, j)] = z.re;
                    e[(i + p, j + m)] = z.re;
                    e[(i, j + m)] = -z.im;
                    e[(i + p, j)] = z.im;
                }
            }
            singular_values(&e).first().copied().unwrap_or(0.0)
        }
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` with `s`
/// nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    /// Minimum-norm least-squares solution of `A X = B`, treating singular
    /// values below `rel_tol · s[0]` as zero.
    pub fn solve(&self, b: &Mat, rel_tol: f64) -> Mat {
        let top = self.s.first().copied().unwrap_or(0.0);
        let utb = self.u.transpose() * b;
        let mut scaled = Mat::zeros(self.s.len(), b.ncols());
        for (i, &si) in self.s.iter().enumerate() {
            if si > rel_tol * top && si > 0.0 {
                scaled.set_row(i, &(utb.row(i) / si));
            }
        }
        &self.v * scaled
    }
}

/// One-sided Jacobi on the columns of a square or tall matrix.
fn jacobi_columns(mut u: Mat) -> (Mat, Vec<f64>, Mat) {
    let n = u.ncols();
    let mut v = Mat::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = u.column(i).norm_squared();
                let beta = u.column(j).norm_squared();
                let gamma = u.column(i).dot(&u.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let m = u.nrows();
    let mut uu = Mat::zeros(m, n);
    let mut vv = Mat::zeros(n, n);
    for (k, &j) in idx.iter().enumerate() {
        vv.set_column(k, &v.column(j));
        if s[j] > 0.0 {
            uu.set_column(k, &(u.column(j) / s[j]));
        }
    }
    s = idx.iter().map(|&j| s[j]).collect();
    // complete left vectors of zero singular values to an orthonormal set
    for k in 0..n {
        if s[k] > 0.0 {
            continue;
        }
        for e in 0..m {
            let mut cand = nalgebra::DVector::<f64>::zeros(m);
            cand[e] = 1.0;
            for _ in 0..2 {
                for other in 0..n {
                    if other != k && (s[other] > 0.0 || other < k) {
                        let proj = uu.column(other).dot(&cand);
                        cand -= uu.column(other) * proj;
                    }
                }
            }
            let nrm = cand.norm();
            if nrm > 0.5 {
                uu.set_column(k, &(cand / nrm));
                break;
            }
        }
    }
    (uu, s, vv)
}

/// Accurate thin SVD (QR preconditioning followed by one-sided Jacobi).
pub fn svd(a: &Mat) -> Svd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Svd { u: Mat::zeros(m, 0), s: vec![], v: Mat::zeros(n, 0) };
    }
    if m < n {
        let t = svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    if m > n {
        let qr = a.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let (ur, s, v) = jacobi_columns(r);
        return Svd { u: q * ur, s, v };
    }
    let (u, s, v) = jacobi_columns(a.clone());
    Svd { u, s, v }
}

pub fn singular_values(a: &Mat) -> Vec<f64> {
    svd(a).s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_svd_clustered_values() {
        // orthonormal columns minus one row: singular values all near one
        let q = nalgebra::QR::new(sample(12, 4)).q();
        let a = q.view((0, 0), (11, 6)).into_owned();
        let d = svd(&a);
        let recon = &d.u * Mat::from_diagonal(&nalgebra::DVector::from_vec(d.s.clone())) * d.v.transpose();
        assert!((recon - &a).norm() < 1e-14);
        assert!(d.s[0] <= 1.0 + 1e-14);
        assert!((d.u.transpose() * &d.u - Mat::identity(6, 6)).norm() < 1e-14);
        let wide = svd(&a.transpose());
        assert_relative_eq!(wide.s[5], d.s[5], max_relative = 1e-13);
    }

    #[test]
    fn svd_rank_deficient_and_solve() {
        let a = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let d = svd(&a);
        assert!(d.s[1] < 1e-15 * d.s[0]);
        assert!((d.u.transpose() * &d.u - Mat::identity(2, 2)).norm() < 1e-14);
        let b = Mat::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let x = d.solve(&b, 1e-12);
        assert!((&a * &x - &b).norm() < 1e-13);
        // minimum norm solution lies along (1, 2)
        assert_relative_eq!(x[(1, 0)], 2.0 * x[(0, 0)], max_relative = 1e-12);
    }

    #[test]
    fn complex_sigma_max() {
        let h = CMat::from_row_slice(2, 2, &[
            Complex64::new(0.0, 3.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0),
        ]);
        assert_relative_eq!(sigma_max(&h), 3.0, max_relative = 1e-14);
    }

    fn sample(n: usize, seed: u64) -> Mat {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Mat::from_fn(n, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn schur_reconstructs() {
        let m = sample(9, 3);
        let s = RealSchur::new(&m).unwrap();
        assert_relative_eq!(&s.q * &s.t * s.q.transpose(), m, epsilon = 1e-11);
        for &(k, size) in s.blocks() {
            if size == 2 {
                assert!(s.block_eigenvalues((k, 2))[0].im != 0.0);
            }
        }
    }

    #[test]
    fn reorder_moves_stable_blocks_first() {
        for seed in 0..20 {
            let m = sample(12, seed);
            let mut s = RealSchur::new(&m).unwrap();
            let before: usize = s.eigenvalues().iter().filter(|z| z.re < 0.0).count();
            let k = s.reorder(|z| z.re < 0.0).unwrap();
            assert_eq!(k, before);
            let ev = s.eigenvalues();
            assert!(ev[..k].iter().all(|z| z.re < 0.0));
            assert!(ev[k..].iter().all(|z| z.re >= 0.0));
            assert_relative_eq!(&s.q * &s.t * s.q.transpose(), m, epsilon = 1e-10);
            for j in 0..12 {
                for i in (j + 2)..12 {
                    assert_eq!(s.t[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn sylvester_residual() {
        let a = sample(7, 11) - Mat::identity(7, 7) * 3.0;
        let b = sample(5, 12) - Mat::identity(5, 5) * 3.0;
        let c = Mat::from_fn(7, 5, |i, j| (i as f64) - 0.5 * j as f64);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert_relative_eq!(&a * &x + &x * &b, c, epsilon = 1e-10);
    }

    #[test]
    fn sylvester_detects_common_eigenvalue() {
        let a = Mat::from_row_slice(1, 1, &[1.0]);
        let b = Mat::from_row_slice(1, 1, &[-1.0]);
        let c = Mat::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(solve_sylvester(&a, &b, &c), Err(Error::SingularSylvester)));
    }
}
