use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kernel::se_factor;
use crate::domain::{KernelParams, LengthScale};
use crate::seeds::rng_from;
use crate::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 101;
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;
const SNAP: f64 = 1e-9;

/// A function on `[-1, 1]^2` stored on a `G x G` lattice and evaluated by
/// bilinear interpolation. `values[i * G + j]` is the value at
/// `(x_i, u_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid_size: usize,
    pub values: Vec<f64>,
    pub params: Option<KernelParams>,
    pub seed: u64,
}

pub fn lattice(grid_size: usize) -> Vec<f64> {
    let step = 2.0 / (grid_size - 1) as f64;
    (0..grid_size).map(|i| -1.0 + step * i as f64).collect()
}

fn locate(t: f64, last: usize) -> (usize, f64) {
    let pos = (t.clamp(-1.0, 1.0) + 1.0) * 0.5 * last as f64;
    let r = pos.round();
    if (pos - r).abs() < SNAP {
        let i = r as usize;
        return if i == last { (last - 1, 1.0) } else { (i, 0.0) };
    }
    let i = (pos.floor() as usize).min(last - 1);
    (i, pos - i as f64)
}

impl GridFunction {
    /// Tabulates `f` on the lattice.
    pub fn from_fn(grid_size: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = lattice(grid_size);
        let mut values = Vec::with_capacity(grid_size * grid_size);
        for &x in &xs {
            for &u in &xs {
                values.push(f(x, u));
            }
        }
        Self { grid_size, values, params: None, seed: 0 }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid_size + j]
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        let last = self.grid_size - 1;
        let (i, wx) = locate(x, last);
        let (j, wu) = locate(u, last);
        let v00 = self.at(i, j);
        if wx == 0.0 && wu == 0.0 {
            return v00;
        }
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - wx) * ((1.0 - wu) * v00 + wu * v01) + wx * ((1.0 - wu) * v10 + wu * v11)
    }

    /// Largest spread of values along the `u` axis over all `x` rows.
    pub fn max_variation_along_u(&self) -> f64 {
        (0..self.grid_size)
            .map(|i| {
                let row = &self.values[i * self.grid_size..(i + 1) * self.grid_size];
                let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Lower Cholesky factor of the 1-D SE Gram matrix on the lattice, with
/// escalating diagonal jitter.
fn se_cholesky(l: f64, pts: &[f64]) -> Result<DMatrix<f64>> {
    let g = pts.len();
    let k = DMatrix::from_fn(g, g, |i, j| se_factor(LengthScale::Active(l), pts[i] - pts[j]));
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut a = k.clone();
        for i in 0..g {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(ch.unpack());
        }
        jitter *= 10.0;
    }
    Err(Error::Generation(format!("Cholesky failed for length-scale {l} after jitter {JITTER_MAX}")))
}

/// Zero-mean GP draw on the lattice.
///
/// The kernel splits into two independent linear terms and a separable SE
/// term, so the draw is `sqrt(a_x) e1 x + sqrt(a_u) e2 u + L_x Z L_u^T` with
/// `L` the per-axis Cholesky factors and `Z` iid standard normal. An
/// inactive axis has a rank-one all-ones factor and the draw is exactly
/// constant along it.
pub fn sample_gp(params: &KernelParams, grid_size: usize, seed: u64) -> Result<GridFunction> {
    if !(21..=301).contains(&grid_size) {
        return Err(Error::invalid(format!("grid size {grid_size} outside [21, 301]")));
    }
    params.validate()?;
    let pts = lattice(grid_size);
    let g = grid_size;
    let mut rng = rng_from(seed);
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);

    let se = match (params.l_x, params.l_u) {
        (LengthScale::Active(lx), LengthScale::Active(lu)) => {
            let z = DMatrix::from_fn(g, g, |_, _| rng.sample::<f64, _>(StandardNormal));
            let lxm = se_cholesky(lx, &pts)?;
            let lum = se_cholesky(lu, &pts)?;
            &lxm * z * lum.transpose()
        }
        (LengthScale::Active(l), LengthScale::Inactive) => {
            let z = DMatrix::from_fn(g, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = se_cholesky(l, &pts)? * z;
            DMatrix::from_fn(g, g, |i, _| v[i])
        }
        (LengthScale::Inactive, LengthScale::Active(l)) => {
            let z = DMatrix::from_fn(g, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = se_cholesky(l, &pts)? * z;
            DMatrix::from_fn(g, g, |_, j| v[j])
        }
        (LengthScale::Inactive, LengthScale::Inactive) => {
            let v: f64 = rng.sample(StandardNormal);
            DMatrix::from_element(g, g, v)
        }
    };

    let (sx, su) = (params.alpha_x.sqrt() * e1, params.alpha_u.sqrt() * e2);
    let mut values = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            values.push(se[(i, j)] + sx * pts[i] + su * pts[j]);
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Generation("non-finite GP draw".into()));
    }
    Ok(GridFunction { grid_size, values, params: Some(*params), seed })
}
