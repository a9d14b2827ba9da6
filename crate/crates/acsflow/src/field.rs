//! Discrete matrix fields on grids: covariant derivative, energies, rough
//! Laplacian, the flow nonlinearity, residuals, dilation and radial cones.
//!
//! All supported metrics are conformally flat (g = λδ, see [`crate::geometry`]),
//! which the contractions exploit: |J|² = tr(J Jᵗ), |∇J|² = λ⁻¹ Σ_a ‖∇_a J‖²_F,
//! and the inverse metric in the Laplacian and nonlinearity is diagonal. The
//! g-skewness constraint is conformally invariant, so pointwise projection
//! always runs in the Euclidean frame.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{MetricData, MetricField};
use crate::grid::{Grid, ScalarGridField};
use crate::matalg::{kernels, Mat, MetricAtPoint, ProjectionScratch};

/// A grid of m x m matrices in row-major layout, point-major lexicographic
/// order. Carries almost complex structure fields as well as unconstrained
/// matrix fields (derivatives, residuals).
#[derive(Debug, Clone, PartialEq)]
pub struct AcsField {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl AcsField {
    pub fn zeros(grid: Grid) -> Self {
        let m = grid.dim();
        let n = grid.n_points();
        AcsField { grid, m, values: vec![0.0; n * m * m] }
    }

    pub fn constant(grid: Grid, mat: &Mat) -> Result<Self> {
        if mat.dim() != grid.dim() {
            return Err(Error::InvalidInput("matrix dimension must match grid".into()));
        }
        let m = grid.dim();
        let n = grid.n_points();
        let mut values = Vec::with_capacity(n * m * m);
        for _ in 0..n {
            values.extend_from_slice(mat.as_slice());
        }
        Ok(AcsField { grid, m, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Mat) -> Result<Self> {
        let m = grid.dim();
        let n = grid.n_points();
        let mut values = Vec::with_capacity(n * m * m);
        let mut x = vec![0.0; m];
        for flat in 0..n {
            grid.point_of_flat(flat, &mut x);
            let mat = f(&x);
            if mat.dim() != m {
                return Err(Error::InvalidInput("matrix dimension must match grid".into()));
            }
            values.extend_from_slice(mat.as_slice());
        }
        Ok(AcsField { grid, m, values })
    }

    pub fn from_raw(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let m = grid.dim();
        if values.len() != grid.n_points() * m * m {
            return Err(Error::InvalidInput(format!(
                "value buffer length {} does not match grid ({} points of {}x{})",
                values.len(),
                grid.n_points(),
                m,
                m
            )));
        }
        Ok(AcsField { grid, m, values })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    #[inline]
    pub fn mat(&self, flat: usize) -> &[f64] {
        let s = self.m * self.m;
        &self.values[flat * s..(flat + 1) * s]
    }

    #[inline]
    pub fn mat_mut(&mut self, flat: usize) -> &mut [f64] {
        let s = self.m * self.m;
        &mut self.values[flat * s..(flat + 1) * s]
    }

    pub fn to_mat(&self, flat: usize) -> Mat {
        Mat::from_vec(self.m, self.mat(flat).to_vec())
    }

    pub fn set_mat(&mut self, flat: usize, mat: &Mat) {
        self.mat_mut(flat).copy_from_slice(mat.as_slice());
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &AcsField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Max over points of the worse of ‖J²+id‖_max and ‖Jᵗ+J‖_max (the
    /// g-skewness residual for any conformal metric).
    pub fn constraint_residual_max(&self) -> f64 {
        let m = self.m;
        let s = m * m;
        self.values
            .par_chunks(s)
            .map_init(
                || vec![0.0; s],
                |buf, j| {
                    kernels::mat_mul(j, j, buf, m);
                    let mut res: f64 = 0.0;
                    for r in 0..m {
                        for c in 0..m {
                            let idv = if r == c { 1.0 } else { 0.0 };
                            res = res.max((buf[r * m + c] + idv).abs());
                            res = res.max((j[r * m + c] + j[c * m + r]).abs());
                        }
                    }
                    res
                },
            )
            .reduce(|| 0.0, f64::max)
    }

    /// Pointwise canonical compatible projection over the whole grid
    /// (Euclidean frame; valid for every conformal metric). Returns the max
    /// constraint residual before and after.
    pub fn project(&mut self) -> Result<(f64, f64)> {
        let pre = self.constraint_residual_max();
        let m = self.m;
        let s = m * m;
        let g = MetricAtPoint::euclidean(m);
        let results: Vec<Result<()>> = self
            .values
            .par_chunks_mut(s)
            .map_init(
                || (ProjectionScratch::new(m), vec![0.0; s]),
                |(scratch, out), j| {
                    scratch.project(j, &g, out)?;
                    j.copy_from_slice(out);
                    Ok(())
                },
            )
            .collect();
        for (flat, r) in results.into_iter().enumerate() {
            if let Err(e) = r {
                return Err(Error::Domain(format!(
                    "projection failed at grid point {flat}: {e}"
                )));
            }
        }
        Ok((pre, self.constraint_residual_max()))
    }

    /// Max over points of | tr(J Jᵗ) − m | — the pointwise norm identity
    /// |J|² = 2n for compatible fields under conformal metrics.
    pub fn norm_identity_residual(&self) -> f64 {
        let m = self.m;
        let s = m * m;
        self.values
            .par_chunks(s)
            .map(|j| {
                let tr: f64 = j.iter().map(|v| v * v).sum();
                (tr - m as f64).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Coordinate partial derivative ∂_axis of the matrix entries at `idx`:
    /// second-order central, or one-sided second-order at Dirichlet edges.
    pub fn partial_into(&self, idx: &[usize], axis: usize, out: &mut [f64]) {
        let s = self.m * self.m;
        debug_assert_eq!(out.len(), s);
        let h = self.grid.h();
        let minus = self.grid.neighbor(idx, axis, -1);
        let plus = self.grid.neighbor(idx, axis, 1);
        match (minus, plus) {
            (Some(im), Some(ip)) => {
                let a = self.mat(self.grid.flat_index(&ip));
                let b = self.mat(self.grid.flat_index(&im));
                for c in 0..s {
                    out[c] = (a[c] - b[c]) / (2.0 * h);
                }
            }
            (None, Some(ip)) => {
                let ipp = self.grid.neighbor(&ip, axis, 1).expect("extents >= 4");
                let f0 = self.mat(self.grid.flat_index(idx));
                let f1 = self.mat(self.grid.flat_index(&ip));
                let f2 = self.mat(self.grid.flat_index(&ipp));
                for c in 0..s {
                    out[c] = (-3.0 * f0[c] + 4.0 * f1[c] - f2[c]) / (2.0 * h);
                }
            }
            (Some(im), None) => {
                let imm = self.grid.neighbor(&im, axis, -1).expect("extents >= 4");
                let f0 = self.mat(self.grid.flat_index(idx));
                let f1 = self.mat(self.grid.flat_index(&im));
                let f2 = self.mat(self.grid.flat_index(&imm));
                for c in 0..s {
                    out[c] = (3.0 * f0[c] - 4.0 * f1[c] + f2[c]) / (2.0 * h);
                }
            }
            (None, None) => unreachable!("extents >= 4"),
        }
    }

    /// Compact second difference ∂²_axis at `idx`; one-sided second-order at
    /// Dirichlet edges.
    pub fn second_partial_into(&self, idx: &[usize], axis: usize, out: &mut [f64]) {
        let s = self.m * self.m;
        let h2 = self.grid.h() * self.grid.h();
        let minus = self.grid.neighbor(idx, axis, -1);
        let plus = self.grid.neighbor(idx, axis, 1);
        let f0 = self.mat(self.grid.flat_index(idx));
        match (minus, plus) {
            (Some(im), Some(ip)) => {
                let a = self.mat(self.grid.flat_index(&ip));
                let b = self.mat(self.grid.flat_index(&im));
                for c in 0..s {
                    out[c] = (a[c] - 2.0 * f0[c] + b[c]) / h2;
                }
            }
            (None, Some(ip)) => {
                let i2 = self.grid.neighbor(&ip, axis, 1).expect("extents >= 4");
                let i3 = self.grid.neighbor(&i2, axis, 1).expect("extents >= 4");
                let f1 = self.mat(self.grid.flat_index(&ip));
                let f2 = self.mat(self.grid.flat_index(&i2));
                let f3 = self.mat(self.grid.flat_index(&i3));
                for c in 0..s {
                    out[c] = (2.0 * f0[c] - 5.0 * f1[c] + 4.0 * f2[c] - f3[c]) / h2;
                }
            }
            (Some(im), None) => {
                let i2 = self.grid.neighbor(&im, axis, -1).expect("extents >= 4");
                let i3 = self.grid.neighbor(&i2, axis, -1).expect("extents >= 4");
                let f1 = self.mat(self.grid.flat_index(&im));
                let f2 = self.mat(self.grid.flat_index(&i2));
                let f3 = self.mat(self.grid.flat_index(&i3));
                for c in 0..s {
                    out[c] = (2.0 * f0[c] - 5.0 * f1[c] + 4.0 * f2[c] - f3[c]) / h2;
                }
            }
            (None, None) => unreachable!("extents >= 4"),
        }
    }

    /// Multilinear interpolation of the matrix entries at an arbitrary point.
    pub fn sample_mat(&self, x: &[f64], stencil: &mut Vec<(usize, f64)>, out: &mut [f64]) {
        self.grid.interp_stencil(x, stencil);
        out.fill(0.0);
        let s = self.m * self.m;
        for &(flat, w) in stencil.iter() {
            let src = &self.values[flat * s..(flat + 1) * s];
            for c in 0..s {
                out[c] += w * src[c];
            }
        }
    }
}

/// The covariant derivative ∇J: per point, m blocks of m x m matrices
/// (∇_a J)^k_j stored row-major, block index a outermost.
#[derive(Debug, Clone)]
pub struct CovariantDerivField {
    pub grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl CovariantDerivField {
    #[inline]
    pub fn block(&self, flat: usize, axis: usize) -> &[f64] {
        let s = self.m * self.m;
        let base = (flat * self.m + axis) * s;
        &self.values[base..base + s]
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Per-point scratch buffers for grid sweeps.
pub(crate) struct SweepScratch {
    pub idx: Vec<usize>,
    pub x: Vec<f64>,
    pub md: MetricData,
    /// m blocks of m*m: covariant derivative at the current point
    pub k: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub t3: Vec<f64>,
}

impl SweepScratch {
    pub fn new(m: usize) -> Self {
        SweepScratch {
            idx: vec![0; m],
            x: vec![0.0; m],
            md: MetricData::new(m),
            k: vec![0.0; m * m * m],
            t1: vec![0.0; m * m],
            t2: vec![0.0; m * m],
            t3: vec![0.0; m * m],
        }
    }
}

/// Extract the matrix (Γ_a)^k_l = Γ^k_{al} from packed symbols.
#[inline]
fn gamma_axis(md: &MetricData, m: usize, a: usize, out: &mut [f64]) {
    for k in 0..m {
        for l in 0..m {
            out[k * m + l] = md.gamma[(k * m + a) * m + l];
        }
    }
}

/// Fill scratch.k with the m covariant-derivative blocks at `flat`;
/// also fills scratch.idx, scratch.x and scratch.md.
pub(crate) fn covariant_blocks_at(
    j: &AcsField,
    g: &MetricField,
    flat: usize,
    sc: &mut SweepScratch,
) {
    let m = j.m();
    let s = m * m;
    let jm = j.mat(flat);
    let SweepScratch { idx, x, md, k, t1, t2, t3 } = sc;
    j.grid().multi_index(flat, idx);
    j.grid().point_of(idx, x);
    g.eval_into(x, md);
    for (a, block) in k.chunks_mut(s).enumerate() {
        j.partial_into(idx, a, block);
        if !md.flat {
            gamma_axis(md, m, a, t1);
            kernels::mat_mul(t1, jm, t2, m);
            kernels::mat_mul(jm, t1, t3, m);
            for c in 0..s {
                block[c] += t2[c] - t3[c];
            }
        }
    }
}

pub fn covariant_derivative(j: &AcsField, g: &MetricField) -> Result<CovariantDerivField> {
    check_dims(j, g)?;
    let m = j.m();
    let s = m * m;
    let n = j.n_points();
    let mut values = vec![0.0; n * m * s];
    values
        .par_chunks_mut(m * s)
        .enumerate()
        .for_each_init(
            || SweepScratch::new(m),
            |sc, (flat, out)| {
                covariant_blocks_at(j, g, flat, sc);
                out.copy_from_slice(&sc.k);
            },
        );
    Ok(CovariantDerivField { grid: j.grid().clone(), m, values })
}

/// |∇J|²(x) with full metric contraction: λ⁻¹ Σ_a ‖∇_a J‖²_F for g = λδ.
pub fn energy_density(j: &AcsField, g: &MetricField) -> Result<ScalarGridField> {
    check_dims(j, g)?;
    let m = j.m();
    let n = j.n_points();
    let mut values = vec![0.0; n];
    values
        .par_iter_mut()
        .enumerate()
        .for_each_init(
            || SweepScratch::new(m),
            |sc, (flat, out)| {
                covariant_blocks_at(j, g, flat, sc);
                let sum: f64 = sc.k.iter().map(|v| v * v).sum();
                *out = if sc.md.flat { sum } else { sum / sc.md.lambda };
            },
        );
    ScalarGridField::new(j.grid().clone(), values)
}

/// Flat (coordinate) derivative energy density Σ_a ‖∂_a J‖²_F, no metric.
pub fn flat_energy_density(j: &AcsField) -> ScalarGridField {
    let m = j.m();
    let s = m * m;
    let n = j.n_points();
    let mut values = vec![0.0; n];
    values
        .par_iter_mut()
        .enumerate()
        .for_each_init(
            || (vec![0usize; m], vec![0.0; s]),
            |(idx, buf), (flat, out)| {
                j.grid().multi_index(flat, idx);
                let mut sum = 0.0;
                for a in 0..m {
                    j.partial_into(idx, a, buf);
                    sum += buf.iter().map(|v| v * v).sum::<f64>();
                }
                *out = sum;
            },
        );
    ScalarGridField { grid: j.grid().clone(), values }
}

/// Midpoint quadrature of a density with the Riemannian volume weight;
/// Dirichlet grids integrate interior cells only.
pub fn quadrature(density: &ScalarGridField, g: &MetricField, power: f64) -> f64 {
    let grid = &density.grid;
    let m = grid.dim();
    let hm = grid.h().powi(m as i32);
    let flat_metric = g.is_flat();
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let mut sum = 0.0;
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if grid.is_boundary_cell(&idx) {
            continue;
        }
        let d = density.values[flat];
        let v = if power == 1.0 { d } else { d.powf(power) };
        if flat_metric {
            sum += v;
        } else {
            grid.point_of(&idx, &mut x);
            sum += v * g.sqrt_det(&x);
        }
    }
    sum * hm
}

/// E(J) = ∫ |∇J|² dv.
pub fn energy(j: &AcsField, g: &MetricField) -> Result<f64> {
    Ok(quadrature(&energy_density(j, g)?, g, 1.0))
}

/// E_p(J) = ∫ |∇J|^p dv.
pub fn p_energy(j: &AcsField, g: &MetricField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p = {p} must be >= 1")));
    }
    Ok(quadrature(&energy_density(j, g)?, g, p / 2.0))
}

/// Rough Laplacian ΔJ = g^{ab}∇_a∇_b J; compact second differences so the
/// flat case is the standard discrete Laplacian. Dirichlet boundary cells
/// are left zero.
pub fn rough_laplacian(j: &AcsField, g: &MetricField) -> Result<AcsField> {
    check_dims(j, g)?;
    let m = j.m();
    let s = m * m;
    let n = j.n_points();
    let flat_metric = g.is_flat();
    let mut values = vec![0.0; n * s];
    values
        .par_chunks_mut(s)
        .enumerate()
        .for_each_init(
            || (SweepScratch::new(m), vec![0.0; s], vec![0.0; m], MetricData::new(m)),
            |(sc, acc, xn, mdn), (flat, out)| {
                j.grid().multi_index(flat, &mut sc.idx);
                if j.grid().is_boundary_cell(&sc.idx) {
                    out.fill(0.0);
                    return;
                }
                if flat_metric {
                    acc.fill(0.0);
                    for a in 0..m {
                        j.second_partial_into(&sc.idx, a, &mut sc.t1);
                        for c in 0..s {
                            acc[c] += sc.t1[c];
                        }
                    }
                    out.copy_from_slice(acc);
                    return;
                }
                covariant_blocks_at(j, g, flat, sc);
                acc.fill(0.0);
                let h = j.grid().h();
                for a in 0..m {
                    j.second_partial_into(&sc.idx, a, &mut sc.t1);
                    for c in 0..s {
                        acc[c] += sc.t1[c];
                    }
                    // central difference of C_a = Γ_a J − J Γ_a across axis a
                    for (sign, scale) in [(1isize, 1.0), (-1isize, -1.0)] {
                        let ni = j
                            .grid()
                            .neighbor(&sc.idx, a, sign)
                            .expect("interior cell has neighbors");
                        j.grid().point_of(&ni, xn);
                        g.eval_into(xn, mdn);
                        gamma_axis(mdn, m, a, &mut sc.t1);
                        let jn = j.mat(j.grid().flat_index(&ni));
                        kernels::mat_mul(&sc.t1, jn, &mut sc.t2, m);
                        kernels::mat_mul(jn, &sc.t1, &mut sc.t3, m);
                        let w = scale / (2.0 * h);
                        for c in 0..s {
                            acc[c] += w * (sc.t2[c] - sc.t3[c]);
                        }
                    }
                    // Γ_a K_a − K_a Γ_a − Γ^c_{aa} K_c
                    gamma_axis(&sc.md, m, a, &mut sc.t1);
                    let ka = &sc.k[a * s..(a + 1) * s];
                    kernels::mat_mul(&sc.t1, ka, &mut sc.t2, m);
                    kernels::mat_mul(ka, &sc.t1, &mut sc.t3, m);
                    for c in 0..s {
                        acc[c] += sc.t2[c] - sc.t3[c];
                    }
                    for cc in 0..m {
                        let coeff = sc.md.gamma[(cc * m + a) * m + a];
                        if coeff != 0.0 {
                            let kc = &sc.k[cc * s..(cc + 1) * s];
                            for c in 0..s {
                                acc[c] -= coeff * kc[c];
                            }
                        }
                    }
                }
                let inv_lam = 1.0 / sc.md.lambda;
                for c in 0..s {
                    out[c] = acc[c] * inv_lam;
                }
            },
        );
    AcsField::from_raw(j.grid().clone(), values)
}

/// The flow nonlinearity g^{pq} J ∇_p J ∇_q J; conformally λ⁻¹ Σ_p K_p K_p J
/// in the row-as-upper-index matrix convention (output = K_q K_p J summed).
pub fn nonlinearity(j: &AcsField, g: &MetricField) -> Result<AcsField> {
    check_dims(j, g)?;
    let m = j.m();
    let s = m * m;
    let n = j.n_points();
    let mut values = vec![0.0; n * s];
    values
        .par_chunks_mut(s)
        .enumerate()
        .for_each_init(
            || (SweepScratch::new(m), vec![0.0; s]),
            |(sc, acc), (flat, out)| {
                covariant_blocks_at(j, g, flat, sc);
                let jm = j.mat(flat);
                acc.fill(0.0);
                for p in 0..m {
                    let kp = &sc.k[p * s..(p + 1) * s];
                    kernels::mat_mul(kp, kp, &mut sc.t1, m);
                    kernels::mat_mul(&sc.t1, jm, &mut sc.t2, m);
                    for c in 0..s {
                        acc[c] += sc.t2[c];
                    }
                }
                if sc.md.flat {
                    out.copy_from_slice(acc);
                } else {
                    let inv_lam = 1.0 / sc.md.lambda;
                    for c in 0..s {
                        out[c] = acc[c] * inv_lam;
                    }
                }
            },
        );
    AcsField::from_raw(j.grid().clone(), values)
}

pub struct HarmonicResidual {
    /// ΔJ − g^{pq} J∇_pJ∇_qJ per point (zero on Dirichlet boundary cells).
    pub field: AcsField,
    /// Sup-norm of the residual over interior cells.
    pub sup: f64,
    /// Sup-norm of the commutator [ΔJ, J] over interior cells.
    pub commutator_sup: f64,
}

pub fn harmonic_residual(j: &AcsField, g: &MetricField) -> Result<HarmonicResidual> {
    let lap = rough_laplacian(j, g)?;
    let nl = nonlinearity(j, g)?;
    let m = j.m();
    let s = m * m;
    let n = j.n_points();
    let mut values = vec![0.0; n * s];
    let mut sup = 0.0f64;
    let mut comm_sup = 0.0f64;
    let mut t1 = vec![0.0; s];
    let mut t2 = vec![0.0; s];
    let mut idx = vec![0usize; m];
    for flat in 0..n {
        j.grid().multi_index(flat, &mut idx);
        if j.grid().is_boundary_cell(&idx) {
            continue;
        }
        let l = lap.mat(flat);
        let q = nl.mat(flat);
        let out = &mut values[flat * s..(flat + 1) * s];
        for c in 0..s {
            out[c] = l[c] - q[c];
            sup = sup.max(out[c].abs());
        }
        let jm = j.mat(flat);
        kernels::mat_mul(l, jm, &mut t1, m);
        kernels::mat_mul(jm, l, &mut t2, m);
        for c in 0..s {
            comm_sup = comm_sup.max((t1[c] - t2[c]).abs());
        }
    }
    Ok(HarmonicResidual {
        field: AcsField::from_raw(j.grid().clone(), values)?,
        sup,
        commutator_sup: comm_sup,
    })
}

/// Discrete weak form: ∫⟨∇J, ∇T⟩ dv + ∫⟨g^{pq}J∇_pJ∇_qJ, T⟩ dv.
/// On Dirichlet grids T should vanish on the frozen layer.
pub fn weak_residual(j: &AcsField, g: &MetricField, t: &AcsField) -> Result<f64> {
    check_dims(j, g)?;
    if t.grid() != j.grid() {
        return Err(Error::InvalidInput("test field must share the grid".into()));
    }
    let m = j.m();
    let s = m * m;
    let kj = covariant_derivative(j, g)?;
    let kt = covariant_derivative(t, g)?;
    let nl = nonlinearity(j, g)?;
    let grid = j.grid();
    let hm = grid.h().powi(m as i32);
    let flat_metric = g.is_flat();
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let mut sum = 0.0;
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if grid.is_boundary_cell(&idx) {
            continue;
        }
        let mut grad_term = 0.0;
        for a in 0..m {
            let ba = kj.block(flat, a);
            let bb = kt.block(flat, a);
            for c in 0..s {
                grad_term += ba[c] * bb[c];
            }
        }
        let mut nl_term = 0.0;
        let q = nl.mat(flat);
        let tm = t.mat(flat);
        for c in 0..s {
            nl_term += q[c] * tm[c];
        }
        if flat_metric {
            sum += grad_term + nl_term;
        } else {
            grid.point_of(&idx, &mut x);
            let lam = g.lambda(&x);
            let w = g.sqrt_det(&x);
            sum += (grad_term / lam + nl_term) * w;
        }
    }
    Ok(sum * hm)
}

/// T_{p,r} J(z) = J(p + r z), interpolated onto `out_grid` and reprojected
/// pointwise (Euclidean frame).
pub fn dilate(j: &AcsField, p: &[f64], r: f64, out_grid: Grid) -> Result<AcsField> {
    if p.len() != j.m() || out_grid.dim() != j.m() {
        return Err(Error::InvalidInput("dilation dimension mismatch".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidInput("dilation scale must be positive".into()));
    }
    let m = j.m();
    let s = m * m;
    let n = out_grid.n_points();
    let mut values = vec![0.0; n * s];
    let g = MetricAtPoint::euclidean(m);
    let results: Vec<Result<()>> = values
        .par_chunks_mut(s)
        .enumerate()
        .map_init(
            || {
                (
                    vec![0.0; m],
                    vec![0.0; m],
                    Vec::with_capacity(1 << m),
                    vec![0.0; s],
                    ProjectionScratch::new(m),
                )
            },
            |(z, y, stencil, raw, scratch), (flat, out)| {
                out_grid.point_of_flat(flat, z);
                for a in 0..m {
                    y[a] = p[a] + r * z[a];
                }
                if !j.grid().contains_for_interp(y) {
                    return Err(Error::InvalidInput(format!(
                        "dilation target {y:?} outside the source domain"
                    )));
                }
                j.sample_mat(y, stencil, raw);
                scratch.project(raw, &g, out)?;
                Ok(())
            },
        )
        .collect();
    results.into_iter().collect::<Result<Vec<()>>>()?;
    AcsField::from_raw(out_grid, values)
}

/// J_r(x) = J(r x/|x|) inside B_r, unchanged outside; cells within h of the
/// origin are filled by neighbor averaging, everything reprojected.
pub fn radial_cone(j: &AcsField, r: f64) -> Result<AcsField> {
    let grid = j.grid().clone();
    let m = j.m();
    let s = m * m;
    let h = grid.h();
    if !(r >= 3.0 * h) {
        return Err(Error::DegenerateScale(format!(
            "cone radius {r} below 3h = {}",
            3.0 * h
        )));
    }
    let mut out = j.clone();
    let g = MetricAtPoint::euclidean(m);
    let mut x = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut stencil = Vec::with_capacity(1 << m);
    let mut raw = vec![0.0; s];
    let mut proj = vec![0.0; s];
    let mut scratch = ProjectionScratch::new(m);
    let mut near_origin: Vec<usize> = Vec::new();
    for flat in 0..grid.n_points() {
        grid.point_of_flat(flat, &mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= r {
            continue;
        }
        if norm <= h {
            near_origin.push(flat);
            continue;
        }
        let scale = r / norm;
        for a in 0..m {
            y[a] = x[a] * scale;
        }
        if !grid.contains_for_interp(&y) {
            return Err(Error::InvalidInput(format!(
                "cone sphere point {y:?} outside the domain"
            )));
        }
        j.sample_mat(&y, &mut stencil, &mut raw);
        scratch.project(&raw, &g, &mut proj)?;
        out.mat_mut(flat).copy_from_slice(&proj);
    }
    // fill cells near the origin from already-assigned axis neighbors
    let mut idx = vec![0usize; m];
    let filled: Vec<Vec<f64>> = near_origin
        .iter()
        .map(|&flat| {
            grid.multi_index(flat, &mut idx);
            let mut acc = vec![0.0; s];
            let mut count = 0.0;
            for a in 0..m {
                for off in [-1isize, 1] {
                    if let Some(ni) = grid.neighbor(&idx, a, off) {
                        let nf = grid.flat_index(&ni);
                        if !near_origin.contains(&nf) {
                            let src = out.mat(nf);
                            for c in 0..s {
                                acc[c] += src[c];
                            }
                            count += 1.0;
                        }
                    }
                }
            }
            if count == 0.0 {
                acc.copy_from_slice(j.mat(flat));
            } else {
                for v in acc.iter_mut() {
                    *v /= count;
                }
            }
            acc
        })
        .collect();
    for (&flat, raw_fill) in near_origin.iter().zip(&filled) {
        scratch.project(raw_fill, &g, &mut proj)?;
        out.mat_mut(flat).copy_from_slice(&proj);
    }
    Ok(out)
}

fn check_dims(j: &AcsField, g: &MetricField) -> Result<()> {
    if j.m() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "field dimension {} vs metric dimension {}",
            j.m(),
            g.dim()
        )));
    }
    Ok(())
}
