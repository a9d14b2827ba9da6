//! Metric providers on chart domains.
//!
//! All supported metrics are conformally flat, g = e^u δ, which covers the
//! Euclidean case (u = 0), the stereographic chart of the round sphere
//! (u = log 4 − 2 log(1+|x|²)) and general conformal factors supplied as a
//! built-in profile or a grid of samples. The conformal factor and its
//! gradient are analytic wherever possible; nothing differentiates the
//! metric numerically except the sampled-profile gradient and the
//! higher-derivative closeness bounds.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarGridField};
use crate::matalg::MetricAtPoint;

/// Conformal exponent u(x) with g = e^u δ.
#[derive(Debug, Clone)]
pub enum ConformalProfile {
    Constant(f64),
    /// u = log 4 − 2 log(1+|x|²), the stereographic sphere chart.
    Sphere,
    Sampled(ScalarGridField),
}

impl ConformalProfile {
    pub fn u(&self, x: &[f64]) -> f64 {
        match self {
            ConformalProfile::Constant(c) => *c,
            ConformalProfile::Sphere => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (4.0f64).ln() - 2.0 * (1.0 + r2).ln()
            }
            ConformalProfile::Sampled(f) => f.sample(x),
        }
    }

    pub fn grad_u(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ConformalProfile::Constant(_) => out.fill(0.0),
            ConformalProfile::Sphere => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = -4.0 / (1.0 + r2);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            ConformalProfile::Sampled(f) => {
                let h = f.grid.h();
                let mut xp = x.to_vec();
                for a in 0..x.len() {
                    xp[a] = x[a] + h;
                    let up = f.sample(&xp);
                    xp[a] = x[a] - h;
                    let um = f.sample(&xp);
                    xp[a] = x[a];
                    out[a] = (up - um) / (2.0 * h);
                }
            }
        }
    }

    fn is_flat(&self) -> bool {
        matches!(self, ConformalProfile::Constant(c) if *c == 0.0)
    }
}

#[derive(Debug, Clone)]
pub enum MetricKind {
    Euclidean,
    SphereStereographic { n: usize },
    Conformal(ConformalProfile),
}

/// A conformally flat metric on a chart domain of even dimension m.
#[derive(Debug, Clone)]
pub struct MetricField {
    m: usize,
    kind: MetricKind,
}

/// Per-point metric data reusable across grid sweeps.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub lambda: f64,
    pub u: f64,
    pub grad_u: Vec<f64>,
    /// Γ^k_{ij} at index (k·m + i)·m + j.
    pub gamma: Vec<f64>,
    pub flat: bool,
}

impl MetricData {
    pub fn new(m: usize) -> Self {
        MetricData {
            lambda: 1.0,
            u: 0.0,
            grad_u: vec![0.0; m],
            gamma: vec![0.0; m * m * m],
            flat: true,
        }
    }

    #[inline]
    pub fn gamma_at(&self, m: usize, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * m + i) * m + j]
    }
}

/// Closeness to the Euclidean metric in the sense of the three sampled
/// bounds: |g − δ| ≤ δ·|x|² (eigenvalue bound), |∂g| ≤ δ·|x|,
/// |∂²g| + |∂³g| ≤ δ.
#[derive(Debug, Clone, Copy)]
pub struct ClosenessReport {
    pub delta_metric: f64,
    pub delta_dg: f64,
    pub delta_d2g: f64,
    pub satisfied: bool,
}

impl MetricField {
    pub fn euclidean(m: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "metric dimension m = {m} must be even and >= 2"
            )));
        }
        Ok(MetricField { m, kind: MetricKind::Euclidean })
    }

    pub fn sphere_stereographic(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("sphere chart needs n >= 1".into()));
        }
        Ok(MetricField { m: 2 * n, kind: MetricKind::SphereStereographic { n } })
    }

    pub fn conformal(profile: ConformalProfile, m: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "metric dimension m = {m} must be even and >= 2"
            )));
        }
        if let ConformalProfile::Sampled(f) = &profile {
            if f.grid.dim() != m {
                return Err(Error::InvalidInput(
                    "sampled conformal exponent dimension mismatch".into(),
                ));
            }
        }
        Ok(MetricField { m, kind: MetricKind::Conformal(profile) })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    /// True when g ≡ δ, enabling the flat fast paths.
    pub fn is_flat(&self) -> bool {
        match &self.kind {
            MetricKind::Euclidean => true,
            MetricKind::SphereStereographic { .. } => false,
            MetricKind::Conformal(p) => p.is_flat(),
        }
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        match &self.kind {
            MetricKind::Euclidean => 0.0,
            MetricKind::SphereStereographic { .. } => ConformalProfile::Sphere.u(x),
            MetricKind::Conformal(p) => p.u(x),
        }
    }

    pub fn grad_u(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            MetricKind::Euclidean => out.fill(0.0),
            MetricKind::SphereStereographic { .. } => ConformalProfile::Sphere.grad_u(x, out),
            MetricKind::Conformal(p) => p.grad_u(x, out),
        }
    }

    /// Conformal factor λ = e^u.
    pub fn lambda(&self, x: &[f64]) -> f64 {
        self.u(x).exp()
    }

    /// Riemannian volume density √det g = λ^{m/2}.
    pub fn sqrt_det(&self, x: &[f64]) -> f64 {
        self.lambda(x).powi((self.m / 2) as i32)
    }

    pub fn metric_at(&self, x: &[f64]) -> MetricAtPoint {
        if self.is_flat() {
            MetricAtPoint::euclidean(self.m)
        } else {
            MetricAtPoint::conformal(self.m, self.u(x))
        }
    }

    /// ∂_i g_{jk} at index (i·m + j)·m + k.
    pub fn dg(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m * m * m];
        if self.is_flat() {
            return out;
        }
        let lam = self.lambda(x);
        let mut du = vec![0.0; m];
        self.grad_u(x, &mut du);
        for i in 0..m {
            let d = lam * du[i];
            for j in 0..m {
                out[(i * m + j) * m + j] = d;
            }
        }
        out
    }

    /// Christoffel symbols Γ^k_{ij} at index (k·m + i)·m + j, from the
    /// closed conformal formula Γ^k_{ij} = ½(δ_ik ∂_j u + δ_jk ∂_i u − δ_ij ∂_k u).
    pub fn christoffel(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(out.len(), m * m * m);
        out.fill(0.0);
        if self.is_flat() {
            return;
        }
        let mut du = vec![0.0; m];
        self.grad_u(x, &mut du);
        christoffel_conformal(m, &du, out);
    }

    /// Levi-Civita Christoffels assembled from ∂g by the generic formula
    /// Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}).
    pub fn christoffel_generic(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let dg = self.dg(x);
        let ginv = self.metric_at(x).g_inv;
        let mut out = vec![0.0; m * m * m];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += ginv.get(k, l)
                            * (dg[(i * m + j) * m + l] + dg[(j * m + i) * m + l]
                                - dg[(l * m + i) * m + j]);
                    }
                    out[(k * m + i) * m + j] = 0.5 * s;
                }
            }
        }
        out
    }

    /// Fill the reusable per-point buffer used by grid sweeps.
    pub fn eval_into(&self, x: &[f64], data: &mut MetricData) {
        let m = self.m;
        if self.is_flat() {
            data.lambda = 1.0;
            data.u = 0.0;
            data.grad_u.fill(0.0);
            data.gamma.fill(0.0);
            data.flat = true;
            return;
        }
        data.flat = false;
        data.u = self.u(x);
        data.lambda = data.u.exp();
        self.grad_u(x, &mut data.grad_u);
        data.gamma.fill(0.0);
        christoffel_conformal(m, &data.grad_u, &mut data.gamma);
    }

    /// Sample the Euclidean-closeness bounds over the cell centers of `grid`.
    /// Second and third metric derivatives are obtained by central
    /// differencing of the analytic ∂g with step `grid.h()`.
    pub fn closeness_check(&self, grid: &Grid, delta: f64) -> Result<ClosenessReport> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("closeness delta must be positive".into()));
        }
        let m = self.m;
        if grid.dim() != m {
            return Err(Error::InvalidInput("closeness grid dimension mismatch".into()));
        }
        let h = grid.h();
        // the bounds hold only up to an overall scale; normalize so the
        // rescaled metric is Euclidean at the chart origin
        let lam0 = self.lambda(&vec![0.0; m]);
        let mut delta_metric = 0.0f64;
        let mut delta_dg = 0.0f64;
        let mut delta_d2g = 0.0f64;
        let mut x = vec![0.0; m];
        let mut xs = vec![0.0; m];
        for flat in 0..grid.n_points() {
            grid.point_of_flat(flat, &mut x);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let lam = self.lambda(&x) / lam0;
            if r2 > 0.0 {
                delta_metric = delta_metric.max((lam - 1.0).abs() / r2);
            } else if (lam - 1.0).abs() > 0.0 {
                delta_metric = f64::INFINITY;
            }
            if self.is_flat() {
                continue;
            }
            let mut du = vec![0.0; m];
            self.grad_u(&x, &mut du);
            // ∂(λ/λ0) = (λ/λ0)·∂u since λ0 is constant
            let dg_max = du.iter().map(|d| (lam * d).abs()).fold(0.0, f64::max);
            let r = r2.sqrt();
            if r > 0.0 {
                delta_dg = delta_dg.max(dg_max / r);
            } else if dg_max > 0.0 {
                delta_dg = f64::INFINITY;
            }
            // |∂²g| by differencing ∂g; |∂³g| by a second difference of ∂g
            let mut d2_max = 0.0f64;
            let mut d3_max = 0.0f64;
            for a in 0..m {
                xs.copy_from_slice(&x);
                xs[a] = x[a] + h;
                let dgp = self.dg(&xs);
                xs[a] = x[a] - h;
                let dgm = self.dg(&xs);
                let dg0 = self.dg(&x);
                for c in 0..dg0.len() {
                    let d2 = (dgp[c] - dgm[c]) / (2.0 * h * lam0);
                    d2_max = d2_max.max(d2.abs());
                    let d3 = (dgp[c] - 2.0 * dg0[c] + dgm[c]) / (h * h * lam0);
                    d3_max = d3_max.max(d3.abs());
                }
            }
            delta_d2g = delta_d2g.max(d2_max + d3_max);
        }
        Ok(ClosenessReport {
            delta_metric,
            delta_dg,
            delta_d2g,
            satisfied: delta_metric <= delta && delta_dg <= delta && delta_d2g <= delta,
        })
    }
}

fn christoffel_conformal(m: usize, du: &[f64], out: &mut [f64]) {
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let mut v = 0.0;
                if i == k {
                    v += du[j];
                }
                if j == k {
                    v += du[i];
                }
                if i == j {
                    v -= du[k];
                }
                out[(k * m + i) * m + j] = 0.5 * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn euclidean_is_trivial() {
        assert!(MetricField::euclidean(3).is_err());
        let g = MetricField::euclidean(4).unwrap();
        let x = [0.3, -0.7, 1.1, 0.0];
        assert!(g.metric_at(&x).g.max_abs_diff(&crate::matalg::Mat::identity(4)) == 0.0);
        let mut gamma = vec![0.0; 64];
        g.christoffel(&x, &mut gamma);
        assert!(gamma.iter().all(|&v| v == 0.0));
        assert!(g.dg(&x).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sphere_metric_values() {
        let g = MetricField::sphere_stereographic(2).unwrap();
        let origin = [0.0; 4];
        assert!((g.lambda(&origin) - 4.0).abs() < 1e-15);
        let unit = [1.0, 0.0, 0.0, 0.0];
        assert!((g.lambda(&unit) - 1.0).abs() < 1e-15);
        let mut gamma = vec![0.0; 64];
        g.christoffel(&origin, &mut gamma);
        assert!(gamma.iter().all(|&v| v.abs() < 1e-15));
        // exact identity g(x)·(1+|x|²)²/4 = id
        let x = [0.4, -1.3, 0.2, 2.0];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        assert!((g.lambda(&x) * (1.0 + r2).powi(2) / 4.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_christoffel_hand_values() {
        let g = MetricField::sphere_stereographic(2).unwrap();
        let x = [1.0, 0.0, 0.0, 0.0];
        // du = (-2, 0, 0, 0) at this point
        let mut gamma = vec![0.0; 64];
        g.christoffel(&x, &mut gamma);
        let m = 4;
        let at = |k: usize, i: usize, j: usize| gamma[(k * m + i) * m + j];
        assert!((at(0, 0, 0) - (-1.0)).abs() < 1e-14);
        assert!((at(0, 1, 1) - 1.0).abs() < 1e-14);
        assert!((at(1, 0, 1) - (-1.0)).abs() < 1e-14);
        assert!((at(1, 1, 0) - (-1.0)).abs() < 1e-14);
        assert!(at(2, 0, 1).abs() < 1e-14);
        // symmetry in the lower pair
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    assert!((at(k, i, j) - at(k, j, i)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn conformal_sphere_profile_matches_sphere_kind() {
        let gs = MetricField::sphere_stereographic(2).unwrap();
        let gc = MetricField::conformal(ConformalProfile::Sphere, 4).unwrap();
        let x = [0.3, -0.8, 0.15, 0.9];
        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        gs.christoffel(&x, &mut a);
        gc.christoffel(&x, &mut b);
        assert!(max_abs_diff(&a, &b) < 1e-12);
        assert!((gs.lambda(&x) - gc.lambda(&x)).abs() < 1e-14);
    }

    #[test]
    fn generic_christoffel_agrees_with_closed_form() {
        let g = MetricField::sphere_stereographic(2).unwrap();
        let x = [0.5, 0.2, -0.4, 0.1];
        let mut closed = vec![0.0; 64];
        g.christoffel(&x, &mut closed);
        let generic = g.christoffel_generic(&x);
        assert!(max_abs_diff(&closed, &generic) < 1e-12);
    }

    #[test]
    fn finite_difference_christoffel_convergence_order() {
        // difference the metric itself and compare against the analytic Γ
        let g = MetricField::sphere_stereographic(1).unwrap();
        let x = [0.37, -0.21];
        let m = 2;
        let fd_gamma = |h: f64| -> Vec<f64> {
            let mut dg = vec![0.0; m * m * m];
            let mut xs = x;
            for i in 0..m {
                xs[i] = x[i] + h;
                let lp = g.lambda(&xs);
                xs[i] = x[i] - h;
                let lm = g.lambda(&xs);
                xs[i] = x[i];
                let d = (lp - lm) / (2.0 * h);
                for j in 0..m {
                    dg[(i * m + j) * m + j] = d;
                }
            }
            let lam = g.lambda(&x);
            let mut out = vec![0.0; m * m * m];
            for k in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        out[(k * m + i) * m + j] = 0.5 / lam
                            * (dg[(i * m + j) * m + k] + dg[(j * m + i) * m + k]
                                - dg[(k * m + i) * m + j]);
                    }
                }
            }
            out
        };
        let mut exact = vec![0.0; m * m * m];
        g.christoffel(&x, &mut exact);
        let e1 = max_abs_diff(&fd_gamma(0.02), &exact);
        let e2 = max_abs_diff(&fd_gamma(0.01), &exact);
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn metric_data_matches_direct_evaluation() {
        let g = MetricField::sphere_stereographic(2).unwrap();
        let x = [0.2, 0.4, -0.3, 0.7];
        let mut data = MetricData::new(4);
        g.eval_into(&x, &mut data);
        assert!(!data.flat);
        assert!((data.lambda - g.lambda(&x)).abs() < 1e-15);
        let mut gamma = vec![0.0; 64];
        g.christoffel(&x, &mut gamma);
        assert!(max_abs_diff(&data.gamma, &gamma) < 1e-15);
    }

    #[test]
    fn closeness_euclidean_and_sphere() {
        let ge = MetricField::euclidean(4).unwrap();
        let grid = Grid::centered_box(4, 6, 0.5).unwrap();
        let rep = ge.closeness_check(&grid, 0.01).unwrap();
        assert!(rep.satisfied && rep.delta_metric == 0.0);

        let gs = MetricField::sphere_stereographic(2).unwrap();
        let small = Grid::new(vec![4; 4], 0.05, vec![-0.1; 4], Boundary::Dirichlet).unwrap();
        let rep_small = gs.closeness_check(&small, 10.0).unwrap();
        assert!(rep_small.satisfied);
        let big = Grid::new(vec![6; 4], 10.0 / 3.0, vec![-10.0; 4], Boundary::Dirichlet).unwrap();
        let rep_big = gs.closeness_check(&big, 0.01).unwrap();
        assert!(!rep_big.satisfied);
    }
}
