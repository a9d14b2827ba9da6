//! Analytic diagnostics on discrete fields: density and monotonicity,
//! homogeneity gap, regularity scale, epsilon-regularity scan, tubular
//! volumes, the flat Bochner residual, the dim-4 sphere-map reduction and
//! the analytic fixtures.

use crate::error::{Error, Result};
use crate::field::{energy_density, flat_energy_density, AcsField};
use crate::geometry::MetricField;
use crate::grid::{Boundary, Grid, ScalarGridField};
use crate::matalg::Mat;

/// Density profile Θ_J(p, r) over a list of radii, with the perturbed
/// profile Θ̃ at a supplied closeness δ and constant c_n.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    /// Max over consecutive radii of the decrease of theta_tilde (0 when
    /// the profile is nondecreasing).
    pub monotone_violation: f64,
}

/// Regularity scale r^J sampled on a sub-lattice of grid points.
#[derive(Debug, Clone)]
pub struct RegularityMap {
    pub points: Vec<Vec<f64>>,
    pub r_values: Vec<f64>,
}

impl RegularityMap {
    /// Sample points with regularity scale at most `r`.
    pub fn threshold_set(&self, r: f64) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.r_values)
            .filter(|(_, &v)| v <= r)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    Plus,
    Minus,
}

impl Chirality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Chirality::Plus => "+",
            Chirality::Minus => "-",
        }
    }
}

/// A field of 3-vectors (sphere-valued maps in the dim-4 reduction).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    pub grid: Grid,
    /// 3 components per point, point-major.
    pub values: Vec<f64>,
}

impl VectorField3 {
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> [f64; 3]) -> Self {
        let n = grid.n_points();
        let m = grid.dim();
        let mut values = Vec::with_capacity(3 * n);
        let mut x = vec![0.0; m];
        for flat in 0..n {
            grid.point_of_flat(flat, &mut x);
            values.extend_from_slice(&f(&x));
        }
        VectorField3 { grid, values }
    }

    #[inline]
    pub fn at(&self, flat: usize) -> [f64; 3] {
        let b = 3 * flat;
        [self.values[b], self.values[b + 1], self.values[b + 2]]
    }

    pub fn max_unit_deviation(&self) -> f64 {
        (0..self.grid.n_points())
            .map(|f| {
                let [a, b, c] = self.at(f);
                ((a * a + b * b + c * c).sqrt() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Flat Dirichlet energy density Σ_a |∂_a u|², same stencils as the
    /// matrix-field derivatives (central, one-sided at Dirichlet edges).
    pub fn flat_energy_density(&self) -> ScalarGridField {
        let grid = &self.grid;
        let m = grid.dim();
        let h = grid.h();
        let n = grid.n_points();
        let mut out = vec![0.0; n];
        let mut idx = vec![0usize; m];
        for flat in 0..n {
            grid.multi_index(flat, &mut idx);
            let mut sum = 0.0;
            for a in 0..m {
                let d = self.partial(&idx, a, h);
                sum += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            }
            out[flat] = sum;
        }
        ScalarGridField { grid: grid.clone(), values: out }
    }

    fn partial(&self, idx: &[usize], axis: usize, h: f64) -> [f64; 3] {
        let grid = &self.grid;
        let minus = grid.neighbor(idx, axis, -1);
        let plus = grid.neighbor(idx, axis, 1);
        match (minus, plus) {
            (Some(im), Some(ip)) => {
                let a = self.at(grid.flat_index(&ip));
                let b = self.at(grid.flat_index(&im));
                [
                    (a[0] - b[0]) / (2.0 * h),
                    (a[1] - b[1]) / (2.0 * h),
                    (a[2] - b[2]) / (2.0 * h),
                ]
            }
            (None, Some(ip)) => {
                let ipp = grid.neighbor(&ip, axis, 1).expect("extents >= 4");
                let f0 = self.at(grid.flat_index(idx));
                let f1 = self.at(grid.flat_index(&ip));
                let f2 = self.at(grid.flat_index(&ipp));
                [
                    (-3.0 * f0[0] + 4.0 * f1[0] - f2[0]) / (2.0 * h),
                    (-3.0 * f0[1] + 4.0 * f1[1] - f2[1]) / (2.0 * h),
                    (-3.0 * f0[2] + 4.0 * f1[2] - f2[2]) / (2.0 * h),
                ]
            }
            (Some(im), None) => {
                let imm = grid.neighbor(&im, axis, -1).expect("extents >= 4");
                let f0 = self.at(grid.flat_index(idx));
                let f1 = self.at(grid.flat_index(&im));
                let f2 = self.at(grid.flat_index(&imm));
                [
                    (3.0 * f0[0] - 4.0 * f1[0] + f2[0]) / (2.0 * h),
                    (3.0 * f0[1] - 4.0 * f1[1] + f2[1]) / (2.0 * h),
                    (3.0 * f0[2] - 4.0 * f1[2] + f2[2]) / (2.0 * h),
                ]
            }
            (None, None) => unreachable!("extents >= 4"),
        }
    }
}

fn check_ball(grid: &Grid, p: &[f64], r: f64) -> Result<()> {
    let h = grid.h();
    if !(r >= 3.0 * h) {
        return Err(Error::DegenerateScale(format!(
            "radius {r} below 3h = {}",
            3.0 * h
        )));
    }
    match grid.boundary() {
        Boundary::Periodic => {
            let min_period = (0..grid.dim())
                .map(|a| grid.axis_length(a))
                .fold(f64::INFINITY, f64::min);
            if 2.0 * r > min_period {
                return Err(Error::InvalidInput(format!(
                    "ball of radius {r} wraps around the torus (period {min_period})"
                )));
            }
        }
        Boundary::Dirichlet => {
            for a in 0..grid.dim() {
                let lo = grid.origin()[a];
                let hi = grid.origin()[a] + grid.axis_length(a);
                if p[a] - r < lo || p[a] + r > hi {
                    return Err(Error::InvalidInput(format!(
                        "ball of radius {r} at {p:?} exits the domain on axis {a}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Ball quadrature of a density: sharp indicator on cell centers, interior
/// cells only, optional volume weight.
fn ball_integral(
    dens: &ScalarGridField,
    g: Option<&MetricField>,
    p: &[f64],
    r: f64,
) -> f64 {
    let grid = &dens.grid;
    let m = grid.dim();
    let hm = grid.h().powi(m as i32);
    let r2 = r * r;
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let mut sum = 0.0;
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if grid.is_boundary_cell(&idx) {
            continue;
        }
        grid.point_of(&idx, &mut x);
        if grid.dist_sq(&x, p) > r2 {
            continue;
        }
        let w = match g {
            Some(gf) if !gf.is_flat() => gf.sqrt_det(&x),
            _ => 1.0,
        };
        sum += dens.values[flat] * w;
    }
    sum * hm
}

/// Θ_J(p, r) = r^{2−m} ∫_{B_r(p)} |∇J|² dv.
pub fn density(j: &AcsField, g: &MetricField, p: &[f64], r: f64) -> Result<f64> {
    check_ball(j.grid(), p, r)?;
    let dens = energy_density(j, g)?;
    Ok(r.powi(2 - j.m() as i32) * ball_integral(&dens, Some(g), p, r))
}

/// Θ̃_J(p, r) = e^{c_n δ r}(r^{2−m} ∫_{B_r(p)} |DJ|² dx + c_n δ² r²),
/// with flat coordinate derivatives as the formula prescribes.
pub fn density_tilde(
    j: &AcsField,
    p: &[f64],
    r: f64,
    delta: f64,
    c_n: f64,
) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::InvalidInput("delta must be >= 0".into()));
    }
    check_ball(j.grid(), p, r)?;
    let dens = flat_energy_density(j);
    let flat_part = r.powi(2 - j.m() as i32) * ball_integral(&dens, None, p, r);
    Ok((c_n * delta * r).exp() * (flat_part + c_n * delta * delta * r * r))
}

/// Homogeneity gap W(p, s, t) = Θ̃_J(p, t) − Θ̃_J(p, s), 3h ≤ s < t.
pub fn homogeneity_gap(
    j: &AcsField,
    p: &[f64],
    s: f64,
    t: f64,
    delta: f64,
    c_n: f64,
) -> Result<f64> {
    if !(s < t) {
        return Err(Error::InvalidInput(format!("need s < t (got {s}, {t})")));
    }
    Ok(density_tilde(j, p, t, delta, c_n)? - density_tilde(j, p, s, delta, c_n)?)
}

/// Full profile over a strictly increasing radius list. The density field is
/// computed once and shared across radii.
pub fn density_profile(
    j: &AcsField,
    g: &MetricField,
    p: &[f64],
    radii: &[f64],
    delta: f64,
    c_n: f64,
) -> Result<DensityProfile> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("empty radius list".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("radii must be strictly increasing".into()));
    }
    for &r in radii {
        check_ball(j.grid(), p, r)?;
    }
    let m = j.m();
    let dens = energy_density(j, g)?;
    let dens_flat = flat_energy_density(j);
    let mut theta = Vec::with_capacity(radii.len());
    let mut theta_tilde = Vec::with_capacity(radii.len());
    for &r in radii {
        theta.push(r.powi(2 - m as i32) * ball_integral(&dens, Some(g), p, r));
        let flat_part = r.powi(2 - m as i32) * ball_integral(&dens_flat, None, p, r);
        theta_tilde
            .push((c_n * delta * r).exp() * (flat_part + c_n * delta * delta * r * r));
    }
    let monotone_violation = theta_tilde
        .windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0, f64::max);
    Ok(DensityProfile {
        center: p.to_vec(),
        radii: radii.to_vec(),
        theta,
        theta_tilde,
        monotone_violation,
    })
}

/// Pointwise flat derivative magnitudes |∇J| and |∇²J| at a cell
/// (Frobenius norms over all axes; second derivatives by nested stencils).
fn derivative_magnitudes(j: &AcsField, idx: &[usize]) -> (f64, f64) {
    let m = j.m();
    let s = m * m;
    let grid = j.grid();
    let h = grid.h();
    let mut buf = vec![0.0; s];
    let mut buf2 = vec![0.0; s];
    let mut buf3 = vec![0.0; s];
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for a in 0..m {
        j.partial_into(idx, a, &mut buf);
        d1 += buf.iter().map(|v| v * v).sum::<f64>();
        for b in 0..m {
            if b == a {
                j.second_partial_into(idx, a, &mut buf);
                d2 += buf.iter().map(|v| v * v).sum::<f64>();
            } else if b > a {
                // mixed partial: difference the ∂_a stencil along axis b
                let minus = grid.neighbor(idx, b, -1);
                let plus = grid.neighbor(idx, b, 1);
                match (minus, plus) {
                    (Some(im), Some(ip)) => {
                        j.partial_into(&ip, a, &mut buf);
                        j.partial_into(&im, a, &mut buf2);
                        for c in 0..s {
                            buf3[c] = (buf[c] - buf2[c]) / (2.0 * h);
                        }
                    }
                    (None, Some(ip)) => {
                        let ipp = grid.neighbor(&ip, b, 1).expect("extents >= 4");
                        j.partial_into(idx, a, &mut buf);
                        j.partial_into(&ip, a, &mut buf2);
                        let mut bufp = vec![0.0; s];
                        j.partial_into(&ipp, a, &mut bufp);
                        for c in 0..s {
                            buf3[c] =
                                (-3.0 * buf[c] + 4.0 * buf2[c] - bufp[c]) / (2.0 * h);
                        }
                    }
                    (Some(im), None) => {
                        let imm = grid.neighbor(&im, b, -1).expect("extents >= 4");
                        j.partial_into(idx, a, &mut buf);
                        j.partial_into(&im, a, &mut buf2);
                        let mut bufp = vec![0.0; s];
                        j.partial_into(&imm, a, &mut bufp);
                        for c in 0..s {
                            buf3[c] =
                                (3.0 * buf[c] - 4.0 * buf2[c] + bufp[c]) / (2.0 * h);
                        }
                    }
                    (None, None) => unreachable!(),
                }
                // count both (a,b) and (b,a)
                d2 += 2.0 * buf3.iter().map(|v| v * v).sum::<f64>();
            }
        }
    }
    (d1.sqrt(), d2.sqrt())
}

/// r^J(p) = max{ r in `radii` : sup_{B_r(p)} r|∇J| + r²|∇²J| ≤ 1 }, 0 if none.
/// Radii above 1 are ignored (the scale is capped at 1 by definition).
pub fn regularity_scale(j: &AcsField, p: &[f64], radii: &[f64]) -> Result<f64> {
    let grid = j.grid();
    let m = grid.dim();
    let mut sorted: Vec<f64> = radii.iter().copied().filter(|&r| r <= 1.0).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.is_empty() {
        return Err(Error::InvalidInput("no admissible radii".into()));
    }
    let r_max = *sorted.last().unwrap();
    // collect cells of the largest ball with their derivative magnitudes
    let mut cells: Vec<(f64, f64, f64)> = Vec::new(); // (dist², |∇J|, |∇²J|)
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let r_max2 = r_max * r_max;
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        grid.point_of(&idx, &mut x);
        let d2 = grid.dist_sq(&x, p);
        if d2 > r_max2 {
            continue;
        }
        let (g1, g2) = derivative_magnitudes(j, &idx);
        cells.push((d2, g1, g2));
    }
    let mut best = 0.0;
    for &r in &sorted {
        let r2 = r * r;
        let sup = cells
            .iter()
            .filter(|(d2, _, _)| *d2 <= r2)
            .map(|(_, g1, g2)| r * g1 + r * r * g2)
            .fold(0.0, f64::max);
        if sup <= 1.0 {
            best = r;
        }
    }
    Ok(best)
}

/// r^J over a stride sub-lattice of interior cells.
pub fn regularity_map(
    j: &AcsField,
    radii: &[f64],
    stride: usize,
) -> Result<RegularityMap> {
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be >= 1".into()));
    }
    let grid = j.grid();
    let m = grid.dim();
    let mut points = Vec::new();
    let mut r_values = Vec::new();
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if idx.iter().any(|&i| i % stride != 0) || grid.is_boundary_cell(&idx) {
            continue;
        }
        grid.point_of(&idx, &mut x);
        let r = regularity_scale(j, &x, radii)?;
        points.push(x.clone());
        r_values.push(r);
    }
    Ok(RegularityMap { points, r_values })
}

/// Sample points where Θ_J(·, r) ≥ epsilon (singular-candidate set). The
/// scan walks interior cells whose r-ball stays in the domain, on a stride
/// that caps the sample count near 4096 points.
pub fn epsilon_regularity_scan(
    j: &AcsField,
    g: &MetricField,
    epsilon: f64,
    r: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let grid = j.grid();
    let m = grid.dim();
    if !(r >= 3.0 * grid.h()) {
        return Err(Error::DegenerateScale(format!(
            "scan radius {r} below 3h = {}",
            3.0 * grid.h()
        )));
    }
    let dens = energy_density(j, g)?;
    let scale = r.powi(2 - m as i32);
    let mut stride = 1usize;
    while grid.n_points() / stride.pow(m as u32) > 4096 {
        stride += 1;
    }
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let mut out = Vec::new();
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if idx.iter().any(|&i| i % stride != 0) || grid.is_boundary_cell(&idx) {
            continue;
        }
        grid.point_of(&idx, &mut x);
        if check_ball(grid, &x, r).is_err() {
            continue;
        }
        if scale * ball_integral(&dens, Some(g), &x, r) >= epsilon {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Flat volume of the r-tube around a point set: counts grid cells within
/// distance r, times h^m.
pub fn tubular_volume(points: &[Vec<f64>], r: f64, grid: &Grid) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let m = grid.dim();
    let hm = grid.h().powi(m as i32);
    let r2 = r * r;
    let mut x = vec![0.0; m];
    let mut count = 0usize;
    for flat in 0..grid.n_points() {
        grid.point_of_flat(flat, &mut x);
        if points.iter().any(|p| grid.dist_sq(&x, p) <= r2) {
            count += 1;
        }
    }
    count as f64 * hm
}

/// Flat Bochner residual ½Δ|∇J|² − |∇²J|² + |∇_pJ∇_pJ|² per interior cell
/// and its sup-norm. Meaningful for near-harmonic fields.
pub fn bochner_residual(
    j: &AcsField,
    g: &MetricField,
) -> Result<(ScalarGridField, f64)> {
    if !g.is_flat() {
        return Err(Error::UnsupportedMetric(
            "Bochner residual implemented for flat metrics only".into(),
        ));
    }
    let grid = j.grid().clone();
    let m = grid.dim();
    let s = m * m;
    let h = grid.h();
    let u = flat_energy_density(j);
    let n = grid.n_points();
    let mut out = vec![0.0; n];
    let mut sup = 0.0f64;
    let mut idx = vec![0usize; m];
    let mut buf = vec![0.0; s];
    let mut acc = vec![0.0; s];
    // skip a 2-cell margin on Dirichlet grids: the one-sided first-derivative
    // stencil inside u makes Δu first-order there, which would pollute sup
    let margin = match grid.boundary() {
        Boundary::Periodic => 0,
        Boundary::Dirichlet => 2,
    };
    for flat in 0..n {
        grid.multi_index(flat, &mut idx);
        let edge = idx
            .iter()
            .zip(grid.extents())
            .any(|(&i, &e)| i < margin || i + margin >= e);
        if edge && margin > 0 {
            continue;
        }
        // Δu by compact second differences of the scalar density
        let mut lap_u = 0.0;
        for a in 0..m {
            let ip = grid.neighbor(&idx, a, 1);
            let im = grid.neighbor(&idx, a, -1);
            match (im, ip) {
                (Some(im), Some(ip)) => {
                    lap_u += (u.values[grid.flat_index(&ip)] - 2.0 * u.values[flat]
                        + u.values[grid.flat_index(&im)])
                        / (h * h);
                }
                _ => unreachable!("margin guarantees interior"),
            }
        }
        let (_, d2) = derivative_magnitudes(j, &idx);
        // |Σ_p (∂_pJ)(∂_pJ)|²
        acc.fill(0.0);
        let mut kp = vec![0.0; s];
        for a in 0..m {
            j.partial_into(&idx, a, &mut kp);
            crate::matalg::kernels::mat_mul(&kp, &kp, &mut buf, m);
            for c in 0..s {
                acc[c] += buf[c];
            }
        }
        let nl_sq: f64 = acc.iter().map(|v| v * v).sum();
        let res = 0.5 * lap_u - d2 * d2 + nl_sq;
        out[flat] = res;
        sup = sup.max(res.abs());
    }
    Ok((ScalarGridField { grid, values: out }, sup))
}

fn pattern_plus(a: f64, b: f64, c: f64) -> [f64; 16] {
    [
        0.0, a, b, c, //
        -a, 0.0, -c, b, //
        -b, c, 0.0, -a, //
        -c, -b, a, 0.0,
    ]
}

fn pattern_minus(a: f64, b: f64, c: f64) -> [f64; 16] {
    [
        0.0, a, b, c, //
        -a, 0.0, c, -b, //
        -b, -c, 0.0, a, //
        -c, b, -a, 0.0,
    ]
}

/// Read the sphere-valued map (a, b, c) off a dim-4 Euclidean-compatible
/// field and detect which of the two sign patterns (chiralities) it follows.
pub fn dim4_reduce(j: &AcsField) -> Result<(VectorField3, Chirality)> {
    if j.m() != 4 {
        return Err(Error::InvalidInput(format!(
            "dim-4 reduction needs m = 4 (got {})",
            j.m()
        )));
    }
    let n = j.n_points();
    let mut values = Vec::with_capacity(3 * n);
    let mut chir: Option<Chirality> = None;
    for flat in 0..n {
        let mat = j.mat(flat);
        let (a, b, c) = (mat[1], mat[2], mat[3]);
        let norm = (a * a + b * b + c * c).sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NotReducible(format!(
                "point {flat}: |(a,b,c)| = {norm} off the unit sphere"
            )));
        }
        let dev = |pat: &[f64; 16]| -> f64 {
            mat.iter()
                .zip(pat)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let dp = dev(&pattern_plus(a, b, c));
        let dm = dev(&pattern_minus(a, b, c));
        let here = if dp <= 1e-8 {
            Chirality::Plus
        } else if dm <= 1e-8 {
            Chirality::Minus
        } else {
            return Err(Error::NotReducible(format!(
                "point {flat} matches neither pattern (deviations {dp:.3e}, {dm:.3e})"
            )));
        };
        match chir {
            None => chir = Some(here),
            Some(c0) if c0 != here => {
                return Err(Error::Chirality(format!(
                    "point {flat} has chirality {} but earlier points {}",
                    here.as_str(),
                    c0.as_str()
                )));
            }
            _ => {}
        }
        values.extend_from_slice(&[a, b, c]);
    }
    Ok((
        VectorField3 { grid: j.grid().clone(), values },
        chir.expect("grid nonempty"),
    ))
}

/// Lift a unit 3-vector field to the dim-4 matrix pattern.
pub fn dim4_lift(u: &VectorField3, chirality: Chirality) -> Result<AcsField> {
    if u.grid.dim() != 4 {
        return Err(Error::InvalidInput("dim-4 lift needs a 4d grid".into()));
    }
    let dev = u.max_unit_deviation();
    if dev > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "input leaves the unit sphere by {dev:.3e}"
        )));
    }
    let n = u.grid.n_points();
    let mut values = Vec::with_capacity(16 * n);
    for flat in 0..n {
        let [a, b, c] = u.at(flat);
        let pat = match chirality {
            Chirality::Plus => pattern_plus(a, b, c),
            Chirality::Minus => pattern_minus(a, b, c),
        };
        values.extend_from_slice(&pat);
    }
    AcsField::from_raw(u.grid.clone(), values)
}

/// The constant standard structure J₀ on a chart grid (compatible with the
/// stereographic sphere metric).
pub fn sphere_fixture(n: usize, grid: Grid) -> Result<AcsField> {
    if grid.dim() != 2 * n {
        return Err(Error::InvalidInput(format!(
            "grid dimension {} does not match 2n = {}",
            grid.dim(),
            2 * n
        )));
    }
    AcsField::constant(grid, &Mat::std_acs(n))
}

/// Homogeneous degree-zero dim-4 cone: a gentle sphere-valued map of the
/// radial direction, lifted to the plus-chirality pattern.
pub fn dim4_cone_fixture(grid: Grid, eps: f64) -> Result<AcsField> {
    if grid.dim() != 4 {
        return Err(Error::InvalidInput("cone fixture needs a 4d grid".into()));
    }
    if !(eps >= 0.0) || eps > 1.0 {
        return Err(Error::InvalidInput("cone amplitude must be in [0, 1]".into()));
    }
    let u = VectorField3::from_fn(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (p, q) = if r > 0.0 {
            (eps * x[0] / r, eps * x[1] / r)
        } else {
            (0.0, 0.0)
        };
        let norm = (1.0 + p * p + q * q).sqrt();
        [1.0 / norm, p / norm, q / norm]
    });
    dim4_lift(&u, Chirality::Plus)
}

/// Annulus energies of the 2d unit-vector probe u = x/|x|: flat Dirichlet
/// energy over B₁ \ B_ε for each ε, with the fitted slope of energy against
/// log(1/ε). The closed-form value is 2π log(1/ε).
pub fn infinite_energy_probe(
    eps_list: &[f64],
    n_cells: usize,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let grid = Grid::centered_box(2, n_cells, 1.0)?;
    let h = grid.h();
    for &e in eps_list {
        if e < 1.0 && e < 3.0 * h {
            return Err(Error::DegenerateScale(format!(
                "annulus inner radius {e} below 3h = {}",
                3.0 * h
            )));
        }
    }
    // 2-vector field u = x/|x| stored in the first two slots of a Vec3
    let u = VectorField3::from_fn(grid.clone(), |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        [x[0] / r, x[1] / r, 0.0]
    });
    let dens = u.flat_energy_density();
    let mut series = Vec::with_capacity(eps_list.len());
    let mut x = vec![0.0; 2];
    for &eps in eps_list {
        let mut sum = 0.0;
        for flat in 0..grid.n_points() {
            grid.point_of_flat(flat, &mut x);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r >= eps && r <= 1.0 {
                sum += dens.values[flat];
            }
        }
        series.push((eps, sum * h * h));
    }
    // least-squares slope of energy against log(1/ε)
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(e, _)| *e < 1.0)
        .map(|&(e, v)| ((1.0 / e).ln(), v))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        0.0
    };
    Ok((series, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::energy;
    use std::f64::consts::PI;

    #[test]
    fn density_of_constant_field_is_zero() {
        let grid = Grid::unit_torus(4, 8).unwrap();
        let g = MetricField::euclidean(4).unwrap();
        let j = AcsField::constant(grid, &Mat::std_acs(2)).unwrap();
        let p = [0.5; 4];
        assert_eq!(density(&j, &g, &p, 0.4).unwrap(), 0.0);
        assert_eq!(density_tilde(&j, &p, 0.4, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(homogeneity_gap(&j, &p, 0.4, 0.45, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn density_rejects_bad_balls() {
        let grid = Grid::unit_torus(4, 8).unwrap();
        let g = MetricField::euclidean(4).unwrap();
        let j = AcsField::constant(grid, &Mat::std_acs(2)).unwrap();
        let p = [0.5; 4];
        assert!(matches!(
            density(&j, &g, &p, 0.2 * grid_h()),
            Err(Error::DegenerateScale(_))
        ));
        assert!(density(&j, &g, &p, 0.6).is_err()); // wraps the torus

        fn grid_h() -> f64 {
            1.0 / 8.0
        }
        let _ = grid;
    }

    #[test]
    fn cone_fixture_density_scale_free() {
        let grid = Grid::centered_box(4, 24, 1.0).unwrap();
        let g = MetricField::euclidean(4).unwrap();
        let j = dim4_cone_fixture(grid, 0.2).unwrap();
        assert!(j.constraint_residual_max() < 1e-12);
        let p = [0.0; 4];
        let d1 = density(&j, &g, &p, 0.3).unwrap();
        let d2 = density(&j, &g, &p, 0.6).unwrap();
        assert!(d1 > 0.0);
        // the sharp ball indicator is first order in h/r, so agreement is
        // coarse at this resolution
        let rel = (d1 - d2).abs() / d2;
        assert!(rel < 0.2, "densities {d1} vs {d2} (rel {rel})");
    }

    #[test]
    fn dim4_round_trip_and_energy_identity() {
        let grid = Grid::unit_torus(4, 8).unwrap();
        let u = VectorField3::from_fn(grid.clone(), |x| {
            let p = 0.6 * (2.0 * PI * x[0]).sin();
            let q = 0.5 * (2.0 * PI * x[2]).cos();
            let n = (1.0 + p * p + q * q).sqrt();
            [1.0 / n, p / n, q / n]
        });
        for chir in [Chirality::Plus, Chirality::Minus] {
            let j = dim4_lift(&u, chir).unwrap();
            assert!(j.constraint_residual_max() < 1e-12, "{chir:?}");
            let (back, detected) = dim4_reduce(&j).unwrap();
            assert_eq!(detected, chir);
            assert_eq!(back, u);

            // pointwise |∇J|² = 4 |∇u|² with identical stencils
            let dj = flat_energy_density(&j);
            let du = u.flat_energy_density();
            for flat in 0..grid.n_points() {
                let lhs = dj.values[flat];
                let rhs = 4.0 * du.values[flat];
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * rhs.max(1.0),
                    "{lhs} vs {rhs}"
                );
            }
            // total energy identity
            let g = MetricField::euclidean(4).unwrap();
            let e = energy(&j, &g).unwrap();
            let eu = {
                let hm = grid.h().powi(4);
                du.values.iter().sum::<f64>() * hm
            };
            assert!((e - 4.0 * eu).abs() <= 1e-10 * e.max(1.0));
        }
    }

    #[test]
    fn dim4_reduce_rejects_non_pattern_and_mixed() {
        let grid = Grid::unit_torus(4, 4).unwrap();
        // a perturbed entry off the sign pattern (no longer a valid ACS,
        // but still unit (a, b, c)) must be refused
        let mut bad = pattern_plus(0.6, 0.8, 0.0);
        bad[1 * 4 + 2] += 0.5;
        let j = AcsField::from_raw(grid.clone(), bad.repeat(grid.n_points())).unwrap();
        assert!(matches!(dim4_reduce(&j), Err(Error::NotReducible(_))));

        let u = VectorField3::from_fn(grid, |_| [1.0, 0.0, 0.0]);
        let mut j = dim4_lift(&u, Chirality::Plus).unwrap();
        let other = dim4_lift(&u, Chirality::Minus).unwrap();
        let flip = other.to_mat(0);
        j.set_mat(3, &flip);
        assert!(matches!(dim4_reduce(&j), Err(Error::Chirality(_))));
    }

    #[test]
    fn regularity_scale_examples() {
        let grid = Grid::unit_torus(2, 16).unwrap();
        let j = AcsField::constant(grid.clone(), &Mat::std_acs(1)).unwrap();
        let radii: Vec<f64> = (0..6).map(|k| 0.03125 * (1 << k) as f64).collect();
        let r = regularity_scale(&j, &[0.5, 0.5], &radii).unwrap();
        assert_eq!(r, *radii.last().unwrap());

        // synthetic |∇J| = 4: entries grow linearly at rate 4/√2 in two slots
        let rate: f64 = 4.0 / (2.0f64).sqrt();
        let lin = AcsField::from_fn(Grid::centered_box(2, 32, 1.0).unwrap(), |x| {
            Mat::from_vec(2, vec![rate * x[0], 0.0, 0.0, rate * x[0]])
        })
        .unwrap();
        let radii: Vec<f64> = (1..=32).map(|k| k as f64 / 64.0).collect();
        let r = regularity_scale(&lin, &[0.0, 0.0], &radii).unwrap();
        assert!(
            (r - 0.25).abs() <= 1.0 / 64.0 + 1e-12,
            "expected about 1/4, got {r}"
        );
    }

    #[test]
    fn scan_and_tube_basics() {
        let grid = Grid::unit_torus(4, 8).unwrap();
        let g = MetricField::euclidean(4).unwrap();
        let j = AcsField::constant(grid.clone(), &Mat::std_acs(2)).unwrap();
        let pts = epsilon_regularity_scan(&j, &g, 1e-6, 0.4).unwrap();
        assert!(pts.is_empty());

        assert_eq!(tubular_volume(&[], 0.2, &grid), 0.0);
        let one = vec![vec![0.5; 4]];
        let vol = tubular_volume(&one, 0.3, &grid);
        let exact = 0.5 * PI * PI * 0.3f64.powi(4); // ω₄ r⁴ = π²r⁴/2
        assert!((vol - exact).abs() < 0.2 * exact, "{vol} vs {exact}");
    }

    #[test]
    fn bochner_zero_for_constant_and_flat_only() {
        let grid = Grid::unit_torus(4, 6).unwrap();
        let j = AcsField::constant(grid, &Mat::std_acs(2)).unwrap();
        let g = MetricField::euclidean(4).unwrap();
        let (field, sup) = bochner_residual(&j, &g).unwrap();
        assert_eq!(sup, 0.0);
        assert!(field.values.iter().all(|&v| v == 0.0));

        let gs = MetricField::sphere_stereographic(2).unwrap();
        assert!(matches!(
            bochner_residual(&j, &gs),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn probe_matches_log_oracle() {
        let eps: Vec<f64> = (2..=5).map(|k| 0.5f64.powi(k)).collect();
        let (series, slope) = infinite_energy_probe(&eps, 512).unwrap();
        for (e, v) in &series {
            let oracle = 2.0 * PI * (1.0 / e).ln();
            let rel = (v - oracle).abs() / oracle;
            assert!(rel < 0.05, "ε = {e}: {v} vs {oracle}");
        }
        let rel = (slope - 2.0 * PI).abs() / (2.0 * PI);
        assert!(rel < 0.03, "slope {slope}");

        assert!(matches!(
            infinite_energy_probe(&[1e-4], 64),
            Err(Error::DegenerateScale(_))
        ));
        let (series, _) = infinite_energy_probe(&[1.0], 64).unwrap();
        assert_eq!(series[0].1, 0.0);
    }

    #[test]
    fn sphere_fixture_compatibility() {
        let grid = Grid::centered_box(4, 8, 1.0).unwrap();
        let j = sphere_fixture(2, grid).unwrap();
        // skewness residual doubles as conformal compatibility
        assert!(j.constraint_residual_max() < 1e-15);
    }
}
