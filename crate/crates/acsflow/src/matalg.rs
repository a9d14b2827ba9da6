//! Pointwise matrix constructions on R^{2n x 2n}: constraint checks, the
//! canonical compatible projection, the Cayley chart, tangent projection and
//! the compatible homotopy path.
//!
//! Matrices carry one upper and one lower tensor index; we store them
//! row-major with row = upper index, so a matrix acts on column vectors in
//! the usual way. Under this convention g-skewness of an endomorphism N
//! reads `g N^t g^{-1} + N = 0`.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dense square matrix of even dimension, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    m: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(m: usize) -> Self {
        Mat { m, a: vec![0.0; m * m] }
    }

    pub fn identity(m: usize) -> Self {
        let mut out = Mat::zeros(m);
        for i in 0..m {
            out.a[i * m + i] = 1.0;
        }
        out
    }

    pub fn from_vec(m: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), m * m);
        Mat { m, a }
    }

    /// Row-major construction from nested arrays, mostly for tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        let mut a = Vec::with_capacity(m * m);
        for r in rows {
            assert_eq!(r.len(), m);
            a.extend_from_slice(r);
        }
        Mat { m, a }
    }

    /// The standard structure J0 on R^{2n}: J0 e_i = e_{n+i}, J0 e_{n+i} = -e_i.
    pub fn std_acs(n: usize) -> Self {
        let m = 2 * n;
        let mut j = Mat::zeros(m);
        for i in 0..n {
            j.a[(n + i) * m + i] = 1.0;
            j.a[i * m + (n + i)] = -1.0;
        }
        j
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.a[row * self.m + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.a[row * self.m + col] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.a
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.m, other.m);
        self.a
            .iter()
            .zip(&other.a)
            .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    pub fn transpose(&self) -> Mat {
        let m = self.m;
        let mut out = Mat::zeros(m);
        for r in 0..m {
            for c in 0..m {
                out.a[c * m + r] = self.a[r * m + c];
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.m, rhs.m);
        let mut out = Mat::zeros(self.m);
        kernels::mat_mul(&self.a, &rhs.a, &mut out.a, self.m);
        out
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.m, rhs.m);
        let mut out = self.clone();
        for (o, r) in out.a.iter_mut().zip(&rhs.a) {
            *o += r;
        }
        out
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.m, rhs.m);
        let mut out = self.clone();
        for (o, r) in out.a.iter_mut().zip(&rhs.a) {
            *o -= r;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for o in out.a.iter_mut() {
            *o *= s;
        }
        out
    }

    /// Inverse by Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        let m = self.m;
        let mut out = Mat::identity(m);
        let mut work = self.a.clone();
        kernels::gauss_inverse(&mut work, &mut out.a, m)
            .map_err(|_| Error::Domain("singular matrix".into()))?;
        Ok(out)
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Mat) -> f64 {
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    /// 2-norm condition number estimate via the eigenvalues of A^t A.
    pub fn cond_2(&self) -> f64 {
        let m = self.m;
        let mut ata = vec![0.0; m * m];
        let t = self.transpose();
        kernels::mat_mul(&t.a, &self.a, &mut ata, m);
        let mut vecs = vec![0.0; m * m];
        kernels::jacobi_eigh(&mut ata, &mut vecs, m);
        let mut lmin = f64::INFINITY;
        let mut lmax: f64 = 0.0;
        for i in 0..m {
            let l = ata[i * m + i].max(0.0);
            lmin = lmin.min(l);
            lmax = lmax.max(l);
        }
        if lmin <= 0.0 {
            f64::INFINITY
        } else {
            (lmax / lmin).sqrt()
        }
    }
}

/// Metric data at a single point: g, its inverse and a factor G with g = G G^t.
#[derive(Debug, Clone)]
pub struct MetricAtPoint {
    pub g: Mat,
    pub g_inv: Mat,
    pub factor: Mat,
    factor_inv: Mat,
    euclidean: bool,
}

impl MetricAtPoint {
    pub fn euclidean(m: usize) -> Self {
        MetricAtPoint {
            g: Mat::identity(m),
            g_inv: Mat::identity(m),
            factor: Mat::identity(m),
            factor_inv: Mat::identity(m),
            euclidean: true,
        }
    }

    /// Build from a symmetric positive-definite g; the factor is the lower
    /// Cholesky triangle.
    pub fn from_g(g: Mat) -> Result<Self> {
        let sym_err = g.max_abs_diff(&g.transpose());
        if sym_err > 1e-12 * g.max_abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "metric not symmetric (residual {sym_err:.3e})"
            )));
        }
        let factor = cholesky_lower(&g)?;
        Self::from_g_with_factor(g, factor)
    }

    /// Build with a caller-supplied factor G satisfying g = G G^t.
    pub fn from_g_with_factor(g: Mat, factor: Mat) -> Result<Self> {
        let g_inv = g.inverse()?;
        let id = Mat::identity(g.dim());
        let inv_res = g.mul(&g_inv).max_abs_diff(&id);
        if inv_res > 1e-12 * g.max_abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "g * g_inv deviates from identity by {inv_res:.3e}"
            )));
        }
        let fac_res = factor.mul(&factor.transpose()).max_abs_diff(&g);
        if fac_res > 1e-12 * g.max_abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "G G^t deviates from g by {fac_res:.3e}"
            )));
        }
        let factor_inv = factor.inverse()?;
        let euclidean = g.max_abs_diff(&id) == 0.0 && factor.max_abs_diff(&id) == 0.0;
        Ok(MetricAtPoint { g, g_inv, factor, factor_inv, euclidean })
    }

    /// Conformal metric e^u * id; factor e^{u/2} * id.
    pub fn conformal(m: usize, u: f64) -> Self {
        let lam = u.exp();
        MetricAtPoint {
            g: Mat::identity(m).scale(lam),
            g_inv: Mat::identity(m).scale(1.0 / lam),
            factor: Mat::identity(m).scale((0.5 * u).exp()),
            factor_inv: Mat::identity(m).scale((-0.5 * u).exp()),
            euclidean: lam == 1.0,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    #[inline]
    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    #[inline]
    pub fn factor_inv(&self) -> &Mat {
        &self.factor_inv
    }
}

fn cholesky_lower(g: &Mat) -> Result<Mat> {
    let m = g.dim();
    let mut l = Mat::zeros(m);
    for i in 0..m {
        for j in 0..=i {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Domain("metric not positive definite".into()));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

fn check_finite(n: &Mat, what: &str) -> Result<()> {
    if !n.is_finite() {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// True iff ||N*N + id||_max <= tol.
pub fn is_acs(n: &Mat, tol: f64) -> Result<bool> {
    check_finite(n, "matrix")?;
    if tol <= 0.0 {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    Ok(acs_residual(n) <= tol)
}

/// ||N*N + id||_max.
pub fn acs_residual(n: &Mat) -> f64 {
    n.mul(n).add(&Mat::identity(n.dim())).max_abs()
}

/// True iff ||g N^t g^{-1} + N||_max <= tol.
pub fn is_g_compatible(n: &Mat, g: &MetricAtPoint, tol: f64) -> Result<bool> {
    check_finite(n, "matrix")?;
    if n.dim() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: matrix {} vs metric {}",
            n.dim(),
            g.dim()
        )));
    }
    Ok(g_skew_residual(n, g) <= tol)
}

/// ||g N^t g^{-1} + N||_max.
pub fn g_skew_residual(n: &Mat, g: &MetricAtPoint) -> f64 {
    g_transpose_unchecked(n, g).add(n).max_abs()
}

/// N_g^t = g N^t g^{-1}; the plain transpose when g = id.
pub fn g_transpose(n: &Mat, g: &MetricAtPoint) -> Result<Mat> {
    check_finite(n, "matrix")?;
    if n.dim() != g.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    Ok(g_transpose_unchecked(n, g))
}

fn g_transpose_unchecked(n: &Mat, g: &MetricAtPoint) -> Mat {
    if g.is_euclidean() {
        n.transpose()
    } else {
        g.g.mul(&n.transpose()).mul(&g.g_inv)
    }
}

/// Symmetric positive-definite square root by Jacobi diagonalization.
pub fn spd_sqrt(p: &Mat) -> Result<Mat> {
    check_finite(p, "matrix")?;
    spd_power(p, 0.5)
}

/// Q^e for symmetric positive-definite Q, spectral construction (e = +-1/2 in
/// practice). As a spectral function of P the result commutes with every
/// matrix commuting with P.
pub fn spd_power(p: &Mat, e: f64) -> Result<Mat> {
    let m = p.dim();
    let scale = p.max_abs().max(1.0);
    if p.max_abs_diff(&p.transpose()) > 1e-12 * scale {
        return Err(Error::Domain("matrix not symmetric".into()));
    }
    let mut work = p.as_slice().to_vec();
    let mut vecs = vec![0.0; m * m];
    kernels::jacobi_eigh(&mut work, &mut vecs, m);
    let mut out = Mat::zeros(m);
    let mut powd = vec![0.0; m];
    for i in 0..m {
        let l = work[i * m + i];
        if l <= 0.0 {
            return Err(Error::Domain(format!(
                "matrix not positive definite (eigenvalue {l:.3e})"
            )));
        }
        powd[i] = l.powf(e);
    }
    // V diag(l^e) V^t
    for r in 0..m {
        for c in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += vecs[r * m + k] * powd[k] * vecs[c * m + k];
            }
            out.a[r * m + c] = s;
        }
    }
    Ok(out)
}

const PROJECTION_TARGET: f64 = 1e-12;
const PROJECTION_MAX_PASSES: usize = 8;

/// Canonical compatible projection: N with N^2 = -id is mapped to the unique
/// J with J^2 = -id that is g-skew, via the symmetric/skew split of G^{-1} N G
/// and the spectral square root of id + S^2.
///
/// Each pass ends with the polar normalization B (-B^2)^{-1/2}, which is the
/// identity on exact input and restores J^2 = -id for perturbed input; passes
/// repeat until the output certifies its constraints at 1e-12.
pub fn compatible_projection(n: &Mat, g: &MetricAtPoint) -> Result<Mat> {
    check_finite(n, "matrix")?;
    if n.dim() != g.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let res = acs_residual(n);
    if res > 1e-8 {
        return Err(Error::Domain(format!(
            "input violates N^2 = -id (residual {res:.3e})"
        )));
    }
    let m = n.dim();
    let mut scratch = ProjectionScratch::new(m);
    let mut out = vec![0.0; m * m];
    scratch
        .project(n.as_slice(), g, &mut out)
        .map(|_| Mat::from_vec(m, out))
}

/// Reusable buffers for the pointwise projection; grid sweeps keep one per
/// worker.
pub struct ProjectionScratch {
    m: usize,
    b0: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    b3: Vec<f64>,
    b4: Vec<f64>,
}

impl ProjectionScratch {
    pub fn new(m: usize) -> Self {
        ProjectionScratch {
            m,
            b0: vec![0.0; m * m],
            b1: vec![0.0; m * m],
            b2: vec![0.0; m * m],
            b3: vec![0.0; m * m],
            b4: vec![0.0; m * m],
        }
    }

    /// Project `n` (m*m row-major) onto the g-compatible structures; writes
    /// the result into `out`. Returns the certified constraint residual.
    pub fn project(&mut self, n: &[f64], g: &MetricAtPoint, out: &mut [f64]) -> Result<f64> {
        let m = self.m;
        let flat = g.is_euclidean();
        out.copy_from_slice(n);
        for _pass in 0..PROJECTION_MAX_PASSES {
            // frame conjugation: M = G^{-1} N G
            if flat {
                self.b0.copy_from_slice(out);
            } else {
                kernels::mat_mul(g.factor_inv().as_slice(), out, &mut self.b1, m);
                kernels::mat_mul(&self.b1, g.factor.as_slice(), &mut self.b0, m);
            }
            // split and Q^{-1/2} application
            kernels::sym_skew_split(&self.b0, &mut self.b1, &mut self.b2, m); // S, A
            kernels::mat_mul(&self.b1, &self.b1, &mut self.b3, m); // S^2
            for i in 0..m {
                self.b3[i * m + i] += 1.0; // id + S^2
            }
            kernels::spd_invsqrt(&mut self.b3, &mut self.b0, &mut self.b4, m).map_err(|_| {
                Error::Internal("id + S^2 not positive definite".into())
            })?; // b4 = (id+S^2)^{-1/2}
            kernels::mat_mul(&self.b4, &self.b2, &mut self.b0, m); // B = Q^{-1} A
            // polar normalization B (-B^2)^{-1/2}: the identity for exact
            // input (B^2 = -id already), restores the ACS constraint for
            // perturbed input; without it the skew residual of B never
            // contracts across passes
            kernels::mat_mul(&self.b0, &self.b0, &mut self.b1, m);
            for v in self.b1.iter_mut() {
                *v = -*v; // -B^2, SPD for invertible skew B
            }
            kernels::spd_invsqrt(&mut self.b1, &mut self.b2, &mut self.b3, m).map_err(|_| {
                Error::Internal("skew part of projection input is singular".into())
            })?;
            kernels::mat_mul(&self.b0, &self.b3, &mut self.b2, m);
            self.b0.copy_from_slice(&self.b2);
            if flat {
                out.copy_from_slice(&self.b0);
            } else {
                kernels::mat_mul(g.factor.as_slice(), &self.b0, &mut self.b1, m);
                kernels::mat_mul(&self.b1, g.factor_inv().as_slice(), out, m);
            }
            let res = self.constraint_residual(out, g);
            if res <= PROJECTION_TARGET {
                return Ok(res);
            }
        }
        let res = self.constraint_residual(out, g);
        if res <= 1e-10 {
            Ok(res)
        } else {
            Err(Error::Internal(format!(
                "projection failed to certify constraints (residual {res:.3e})"
            )))
        }
    }

    /// max of the ACS residual and the g-skewness residual for `j`.
    pub fn constraint_residual(&mut self, j: &[f64], g: &MetricAtPoint) -> f64 {
        let m = self.m;
        kernels::mat_mul(j, j, &mut self.b0, m);
        let mut res: f64 = 0.0;
        for r in 0..m {
            for c in 0..m {
                let idv = if r == c { 1.0 } else { 0.0 };
                res = res.max((self.b0[r * m + c] + idv).abs());
            }
        }
        if g.is_euclidean() {
            for r in 0..m {
                for c in 0..m {
                    res = res.max((j[r * m + c] + j[c * m + r]).abs());
                }
            }
        } else {
            kernels::transpose_into(j, &mut self.b0, m);
            kernels::mat_mul(g.g.as_slice(), &self.b0, &mut self.b1, m);
            kernels::mat_mul(&self.b1, g.g_inv.as_slice(), &mut self.b0, m);
            for i in 0..m * m {
                res = res.max((self.b0[i] + j[i]).abs());
            }
        }
        res
    }
}

const CAYLEY_COND_GUARD: f64 = 1e12;

/// Chart coordinate S = (J + J0)^{-1} (J - J0); anticommutes with J0.
pub fn cayley_chart(j: &Mat, j0: &Mat) -> Result<Mat> {
    check_finite(j, "J")?;
    check_finite(j0, "J0")?;
    for (mat, name) in [(j, "J"), (j0, "J0")] {
        let r = acs_residual(mat);
        if r > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "{name} violates the square constraint (residual {r:.3e})"
            )));
        }
    }
    let sum = j.add(j0);
    if sum.cond_2() > CAYLEY_COND_GUARD {
        return Err(Error::ChartOutOfRange(
            "J + J0 is singular or near-singular".into(),
        ));
    }
    let inv = sum
        .inverse()
        .map_err(|_| Error::ChartOutOfRange("J + J0 is singular".into()))?;
    Ok(inv.mul(&j.sub(j0)))
}

/// Inverse chart: J = J0 (id + S)(id - S)^{-1}.
pub fn cayley_chart_inv(s: &Mat, j0: &Mat) -> Result<Mat> {
    check_finite(s, "S")?;
    check_finite(j0, "J0")?;
    let anti = s.mul(j0).add(&j0.mul(s)).max_abs();
    if anti > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "S does not anticommute with J0 (residual {anti:.3e})"
        )));
    }
    let id = Mat::identity(s.dim());
    let minus = id.sub(s);
    let inv = minus
        .inverse()
        .map_err(|_| Error::ChartOutOfRange("id - S is singular".into()))?;
    Ok(j0.mul(&id.add(s)).mul(&inv))
}

/// Projection of an arbitrary endomorphism T onto the linearized constraint
/// space at J: S = A - A_g^t with A = T + J T J. The output anticommutes
/// with J and is g-skew in the same sense as [`is_g_compatible`]; for
/// Euclidean and conformal metrics this coincides with
/// g(Sx, y) + g(x, Sy) = 0.
pub fn tangent_projection(t: &Mat, j: &Mat, g: &MetricAtPoint) -> Result<Mat> {
    check_finite(t, "T")?;
    check_finite(j, "J")?;
    let a = t.add(&j.mul(t).mul(j));
    Ok(a.sub(&g_transpose_unchecked(&a, g)))
}

/// Pointwise path J(t) with J(0) = J and J(1) the canonical compatible
/// projection, built in the orthonormal frame of G: N(t) = t M + (1-t) Q^{-1}A,
/// J(t) = P(t)^{-1} N(t) with P(t)^2 = id + 2t(1-t)(Q - id).
pub fn homotopy_path(j: &Mat, g: &MetricAtPoint, t: f64) -> Result<Mat> {
    check_finite(j, "J")?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("t = {t} outside [0, 1]")));
    }
    let res = acs_residual(j);
    if res > 1e-8 {
        return Err(Error::Domain(format!(
            "input violates J^2 = -id (residual {res:.3e})"
        )));
    }
    let m = j.dim();
    let frame = if g.is_euclidean() {
        j.clone()
    } else {
        g.factor_inv().mul(j).mul(&g.factor)
    };
    let s = frame.add(&frame.transpose()).scale(0.5);
    let a = frame.sub(&frame.transpose()).scale(0.5);
    let q = spd_sqrt(&Mat::identity(m).add(&s.mul(&s)))?;
    let q_inv_a = spd_power(&Mat::identity(m).add(&s.mul(&s)), -0.5)?.mul(&a);
    let n_t = frame.scale(1.0 - t).add(&q_inv_a.scale(t));
    let p_sq = Mat::identity(m).add(&q.sub(&Mat::identity(m)).scale(2.0 * t * (1.0 - t)));
    let p_inv = spd_power(&p_sq, -0.5)?;
    let out = p_inv.mul(&n_t);
    if g.is_euclidean() {
        Ok(out)
    } else {
        Ok(g.factor.mul(&out).mul(g.factor_inv()))
    }
}

/// Seeded random almost complex structure N = M J0 M^{-1}; M is synthesized
/// from random orthogonal factors and singular values in [1, cond_bound], so
/// the bound holds by construction.
pub fn random_acs(n: usize, seed: u64, cond_bound: f64) -> Result<Mat> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if !(cond_bound >= 1.0) {
        return Err(Error::InvalidInput("cond_bound must be >= 1".into()));
    }
    let m = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(m, &mut rng);
    let v = random_orthogonal(m, &mut rng);
    let mut s = Mat::zeros(m);
    let mut s_inv = Mat::zeros(m);
    for i in 0..m {
        let sv: f64 = 1.0 + (cond_bound - 1.0) * rng.gen::<f64>();
        s.set(i, i, sv);
        s_inv.set(i, i, 1.0 / sv);
    }
    let mmat = u.mul(&s).mul(&v.transpose());
    let m_inv = v.mul(&s_inv).mul(&u.transpose());
    Ok(mmat.mul(&Mat::std_acs(n)).mul(&m_inv))
}

/// Random orthogonal matrix by Gram-Schmidt on a Gaussian sample.
pub fn random_orthogonal<R: Rng>(m: usize, rng: &mut R) -> Mat {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut ok = true;
        for _ in 0..m {
            let mut v: Vec<f64> = (0..m).map(|_| gaussian(rng)).collect();
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(x, y)| x * y).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= d * ci;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            cols.push(v);
        }
        if ok {
            let mut out = Mat::zeros(m);
            for (c, col) in cols.iter().enumerate() {
                for (r, v) in col.iter().enumerate() {
                    out.set(r, c, *v);
                }
            }
            return out;
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
pub fn random_spd<R: Rng>(m: usize, lo: f64, hi: f64, rng: &mut R) -> Mat {
    let r = random_orthogonal(m, rng);
    let mut d = Mat::zeros(m);
    for i in 0..m {
        d.set(i, i, lo + (hi - lo) * rng.gen::<f64>());
    }
    r.mul(&d).mul(&r.transpose())
}

pub(crate) mod kernels {
    //! Allocation-free slice kernels used by grid sweeps.

    #[inline]
    pub fn mat_mul(a: &[f64], b: &[f64], out: &mut [f64], m: usize) {
        for r in 0..m {
            let ar = &a[r * m..(r + 1) * m];
            let or = &mut out[r * m..(r + 1) * m];
            or.fill(0.0);
            for (k, &av) in ar.iter().enumerate() {
                if av != 0.0 {
                    let br = &b[k * m..(k + 1) * m];
                    for (o, &bv) in or.iter_mut().zip(br) {
                        *o += av * bv;
                    }
                }
            }
        }
    }

    #[inline]
    pub fn transpose_into(a: &[f64], out: &mut [f64], m: usize) {
        for r in 0..m {
            for c in 0..m {
                out[c * m + r] = a[r * m + c];
            }
        }
    }

    #[inline]
    pub fn sym_skew_split(a: &[f64], sym: &mut [f64], skew: &mut [f64], m: usize) {
        for r in 0..m {
            for c in 0..m {
                let x = a[r * m + c];
                let y = a[c * m + r];
                sym[r * m + c] = 0.5 * (x + y);
                skew[r * m + c] = 0.5 * (x - y);
            }
        }
    }

    /// Cyclic Jacobi diagonalization of the symmetric matrix in `a`
    /// (overwritten; eigenvalues end up on the diagonal). `vecs` receives the
    /// eigenvector columns. Sweeps until the largest off-diagonal entry is
    /// below 1e-13 * max|a|.
    pub fn jacobi_eigh(a: &mut [f64], vecs: &mut [f64], m: usize) {
        vecs.fill(0.0);
        for i in 0..m {
            vecs[i * m + i] = 1.0;
        }
        let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1e-300);
        let tol = 1e-13 * scale;
        for _sweep in 0..60 {
            let mut off: f64 = 0.0;
            for p in 0..m {
                for q in (p + 1)..m {
                    off = off.max(a[p * m + q].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..m {
                for q in (p + 1)..m {
                    let apq = a[p * m + q];
                    if apq.abs() <= tol * 1e-2 {
                        continue;
                    }
                    let app = a[p * m + p];
                    let aqq = a[q * m + q];
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..m {
                        let akp = a[k * m + p];
                        let akq = a[k * m + q];
                        a[k * m + p] = c * akp - s * akq;
                        a[k * m + q] = s * akp + c * akq;
                    }
                    for k in 0..m {
                        let apk = a[p * m + k];
                        let aqk = a[q * m + k];
                        a[p * m + k] = c * apk - s * aqk;
                        a[q * m + k] = s * apk + c * aqk;
                    }
                    for k in 0..m {
                        let vkp = vecs[k * m + p];
                        let vkq = vecs[k * m + q];
                        vecs[k * m + p] = c * vkp - s * vkq;
                        vecs[k * m + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    /// out = p^{-1/2} for symmetric positive-definite p (p is clobbered,
    /// `work` holds the eigenvectors). Errors if an eigenvalue is <= 0.
    pub fn spd_invsqrt(
        p: &mut [f64],
        work: &mut [f64],
        out: &mut [f64],
        m: usize,
    ) -> Result<(), ()> {
        jacobi_eigh(p, work, m);
        let mut inv_sqrt = [0.0_f64; 16];
        let mut heap;
        let d: &mut [f64] = if m <= 16 {
            &mut inv_sqrt[..m]
        } else {
            heap = vec![0.0; m];
            &mut heap
        };
        for i in 0..m {
            let l = p[i * m + i];
            if l <= 0.0 {
                return Err(());
            }
            d[i] = 1.0 / l.sqrt();
        }
        for r in 0..m {
            for c in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += work[r * m + k] * d[k] * work[c * m + k];
                }
                out[r * m + c] = s;
            }
        }
        Ok(())
    }

    /// Gauss-Jordan inverse; `a` is clobbered, `out` must hold the identity on
    /// entry.
    pub fn gauss_inverse(a: &mut [f64], out: &mut [f64], m: usize) -> Result<(), ()> {
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in (col + 1)..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(());
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    out.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                out[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            out[r * m + k] -= f * out[col * m + k];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
