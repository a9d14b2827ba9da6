//! Uniform Cartesian discretization of chart domains.
//!
//! Grids are cell-centered: the sample attached to multi-index
//! (i_1, ..., i_m) sits at `origin + (i + 0.5) h` per axis. Points are stored
//! in lexicographic order with the last axis fastest.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Dirichlet => "dirichlet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "dirichlet" => Ok(Boundary::Dirichlet),
            other => Err(Error::Parse(format!("unknown boundary policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    m: usize,
    extents: Vec<usize>,
    h: f64,
    origin: Vec<f64>,
    boundary: Boundary,
}

impl Grid {
    pub fn new(
        extents: Vec<usize>,
        h: f64,
        origin: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self> {
        let m = extents.len();
        if m == 0 {
            return Err(Error::InvalidInput("grid needs at least one axis".into()));
        }
        if origin.len() != m {
            return Err(Error::InvalidInput("origin length must match extents".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("spacing h = {h} must be positive")));
        }
        if extents.iter().any(|&e| e < 4) {
            return Err(Error::InvalidInput("extents must be >= 4 per axis".into()));
        }
        Ok(Grid { m, extents, h, origin, boundary })
    }

    /// Periodic unit torus [0,1)^m with `n` cells per axis.
    pub fn unit_torus(m: usize, n: usize) -> Result<Self> {
        Grid::new(vec![n; m], 1.0 / n as f64, vec![0.0; m], Boundary::Periodic)
    }

    /// Dirichlet box [-half, half]^m with `n` cells per axis.
    pub fn centered_box(m: usize, n: usize, half: f64) -> Result<Self> {
        Grid::new(
            vec![n; m],
            2.0 * half / n as f64,
            vec![-half; m],
            Boundary::Dirichlet,
        )
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_points(&self) -> usize {
        self.extents.iter().product()
    }

    /// Strides for the lexicographic layout (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.m];
        for i in (0..self.m.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.extents[i + 1];
        }
        s
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.extents[a]);
            flat = flat * self.extents[a] + i;
        }
        flat
    }

    pub fn multi_index(&self, mut flat: usize, idx: &mut [usize]) {
        for a in (0..self.m).rev() {
            idx[a] = flat % self.extents[a];
            flat /= self.extents[a];
        }
    }

    /// Cell-center coordinate of a multi-index.
    pub fn point_of(&self, idx: &[usize], out: &mut [f64]) {
        for a in 0..self.m {
            out[a] = self.origin[a] + (idx[a] as f64 + 0.5) * self.h;
        }
    }

    pub fn point_of_flat(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0usize; self.m];
        self.multi_index(flat, &mut idx);
        self.point_of(&idx, out);
    }

    /// Neighbor along `axis` with offset `off`; None past a Dirichlet edge.
    pub fn neighbor(&self, idx: &[usize], axis: usize, off: isize) -> Option<Vec<usize>> {
        let e = self.extents[axis] as isize;
        let raw = idx[axis] as isize + off;
        let ni = match self.boundary {
            Boundary::Periodic => raw.rem_euclid(e),
            Boundary::Dirichlet => {
                if raw < 0 || raw >= e {
                    return None;
                }
                raw
            }
        };
        let mut out = idx.to_vec();
        out[axis] = ni as usize;
        Some(out)
    }

    /// True when the cell belongs to the frozen one-cell Dirichlet layer.
    pub fn is_boundary_cell(&self, idx: &[usize]) -> bool {
        match self.boundary {
            Boundary::Periodic => false,
            Boundary::Dirichlet => idx
                .iter()
                .zip(&self.extents)
                .any(|(&i, &e)| i == 0 || i + 1 == e),
        }
    }

    /// Squared distance between points, minimum-image on periodic grids.
    pub fn dist_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ax in 0..self.m {
            let mut d = a[ax] - b[ax];
            if self.boundary == Boundary::Periodic {
                let period = self.extents[ax] as f64 * self.h;
                d -= (d / period).round() * period;
            }
            s += d * d;
        }
        s
    }

    /// Axis length (period) for a given axis.
    pub fn axis_length(&self, axis: usize) -> f64 {
        self.extents[axis] as f64 * self.h
    }

    /// Multilinear interpolation stencil at `x`: up to 2^m pairs of
    /// (flat index, weight) summing to 1. Wraps on periodic grids, clamps to
    /// the hull of cell centers on Dirichlet grids.
    pub fn interp_stencil(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        let m = self.m;
        let mut base = vec![0usize; m];
        let mut frac = vec![0.0; m];
        for a in 0..m {
            let e = self.extents[a];
            // continuous cell coordinate relative to the first cell center
            let t = (x[a] - self.origin[a]) / self.h - 0.5;
            match self.boundary {
                Boundary::Periodic => {
                    let tw = t.rem_euclid(e as f64);
                    base[a] = tw.floor() as usize % e;
                    frac[a] = tw - tw.floor();
                }
                Boundary::Dirichlet => {
                    let tc = t.clamp(0.0, (e - 1) as f64);
                    let i0 = (tc.floor() as usize).min(e - 2);
                    base[a] = i0;
                    frac[a] = tc - i0 as f64;
                }
            }
        }
        out.clear();
        let corners = 1usize << m;
        let mut idx = vec![0usize; m];
        for c in 0..corners {
            let mut w = 1.0;
            for a in 0..m {
                let hi = (c >> a) & 1 == 1;
                let e = self.extents[a];
                idx[a] = if hi {
                    match self.boundary {
                        Boundary::Periodic => (base[a] + 1) % e,
                        Boundary::Dirichlet => (base[a] + 1).min(e - 1),
                    }
                } else {
                    base[a]
                };
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                out.push((self.flat_index(&idx), w));
            }
        }
    }

    /// True when `x` lies in the convex hull of cell centers (so multilinear
    /// interpolation needs no clamping). Periodic grids contain everything.
    pub fn contains_for_interp(&self, x: &[f64]) -> bool {
        match self.boundary {
            Boundary::Periodic => true,
            Boundary::Dirichlet => (0..self.m).all(|a| {
                let lo = self.origin[a] + 0.5 * self.h;
                let hi = self.origin[a] + (self.extents[a] as f64 - 0.5) * self.h;
                x[a] >= lo && x[a] <= hi
            }),
        }
    }
}

/// Scalar samples on a grid, with multilinear interpolation.
#[derive(Debug, Clone)]
pub struct ScalarGridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarGridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidInput(format!(
                "scalar field length {} does not match grid ({} points)",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(ScalarGridField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.n_points();
        let m = grid.dim();
        let mut values = vec![0.0; n];
        let mut x = vec![0.0; m];
        for (flat, v) in values.iter_mut().enumerate() {
            grid.point_of_flat(flat, &mut x);
            *v = f(&x);
        }
        ScalarGridField { grid, values }
    }

    /// Multilinear interpolation; clamps to the sampled box on Dirichlet
    /// grids and wraps on periodic ones.
    pub fn sample(&self, x: &[f64]) -> f64 {
        let mut stencil = Vec::with_capacity(1 << self.grid.dim());
        self.grid.interp_stencil(x, &mut stencil);
        stencil.iter().map(|&(i, w)| w * self.values[i]).sum()
    }
}
