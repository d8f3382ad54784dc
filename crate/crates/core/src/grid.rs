//! Discretization plumbing: periodized tangential grids with FFTs, graded
//! normal grids with log-trapezoidal quadrature, and sampled functions on
//! their product.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Periodic grid on the torus `prod_i [0, L_i)` with `N_i` nodes per axis.
///
/// Frequency-side data are Fourier coefficients `c_k` of
/// `f(x) = sum_k c_k exp(i xi_k . x)` with `xi_k = 2 pi k / L` in FFT order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub modes: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl TorusGrid {
    pub fn new(modes: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if modes.len() != lengths.len() {
            return Err(Error::InvalidArgument("modes and lengths differ in length".into()));
        }
        if let Some(n) = modes.iter().find(|n| !n.is_power_of_two()) {
            return Err(Error::InvalidArgument(format!("{n} modes is not a power of two")));
        }
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidArgument("torus lengths must be positive".into()));
        }
        Ok(Self { modes, lengths })
    }

    /// One-dimensional torus.
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length])
    }

    /// The zero-dimensional grid (a single point), used when `n = 1`.
    pub fn point() -> Self {
        Self { modes: vec![], lengths: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn len(&self) -> usize {
        self.modes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total volume `prod L_i`.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Volume per grid cell.
    pub fn cell(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.modes[a];
            idx /= self.modes[a];
        }
        out
    }

    /// Flat index of the signed integer frequency `k` (per axis).
    pub fn index_of(&self, k: &[i64]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim() {
            let n = self.modes[a] as i64;
            idx = idx * self.modes[a] + k[a].rem_euclid(n) as usize;
        }
        idx
    }

    /// Frequency vector `xi` of the flat index.
    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let n = self.modes[a];
                let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * std::f64::consts::PI * k / self.lengths[a]
            })
            .collect()
    }

    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.frequency(i)).collect()
    }

    /// Spatial node of the flat index.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lengths[a] * i as f64 / self.modes[a] as f64)
            .collect()
    }

    /// Coefficients to samples, in place.
    pub fn inverse_fft(&self, data: &mut [C64]) {
        self.transform(data, true);
    }

    /// Samples to coefficients, in place.
    pub fn forward_fft(&self, data: &mut [C64]) {
        self.transform(data, false);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|x| *x *= scale);
    }

    fn transform(&self, data: &mut [C64], inverse: bool) {
        assert_eq!(data.len(), self.len(), "transform: length mismatch");
        let mut planner = FftPlanner::new();
        let mut stride = 1;
        for a in (0..self.dim()).rev() {
            let n = self.modes[a];
            let fft: Arc<dyn Fft<f64>> = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
            if stride == 1 {
                fft.process(data);
            } else {
                let mut buf = vec![C64::new(0.0, 0.0); n];
                let block = n * stride;
                for start in (0..data.len()).step_by(block) {
                    for off in 0..stride {
                        for i in 0..n {
                            buf[i] = data[start + off + i * stride];
                        }
                        fft.process(&mut buf);
                        for i in 0..n {
                            data[start + off + i * stride] = buf[i];
                        }
                    }
                }
            }
            stride *= n;
        }
    }
}

/// Geometric grid `x_i = x_min * ratio^i` on the half-line, optionally with a
/// node at `x = 0` in front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalGrid {
    pub x_min: f64,
    pub ratio: f64,
    pub count: usize,
    pub include_zero: bool,
}

impl NormalGrid {
    pub fn new(x_min: f64, ratio: f64, count: usize, include_zero: bool) -> Result<Self> {
        if !(x_min > 0.0) || !(ratio > 1.0) || count < 2 {
            return Err(Error::InvalidArgument(format!(
                "normal grid needs x_min > 0, ratio > 1, count >= 2 (got {x_min}, {ratio}, {count})"
            )));
        }
        Ok(Self { x_min, ratio, count, include_zero })
    }

    /// Smallest geometric grid from `x_min` reaching at least `x_max`.
    pub fn covering(x_min: f64, x_max: f64, ratio: f64, include_zero: bool) -> Result<Self> {
        let count = ((x_max / x_min).ln() / ratio.ln()).ceil().max(1.0) as usize + 1;
        Self::new(x_min, ratio, count, include_zero)
    }

    pub fn len(&self) -> usize {
        self.count + usize::from(self.include_zero)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Offset of the first positive node.
    pub fn first_positive(&self) -> usize {
        usize::from(self.include_zero)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        if self.include_zero {
            out.push(0.0);
        }
        out.extend((0..self.count).map(|i| self.x_min * self.ratio.powi(i as i32)));
        out
    }

    pub fn x_max(&self) -> f64 {
        self.x_min * self.ratio.powi(self.count as i32 - 1)
    }

    /// Same grid with all nodes multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { x_min: self.x_min * s, ..self.clone() }
    }

    /// Trapezoidal weights in `log x` for `int f(x) dx` over `[x_min, x_max]`;
    /// a zero node, if present, gets weight 0.
    pub fn log_weights(&self) -> Vec<f64> {
        let h = self.ratio.ln();
        let mut w: Vec<f64> = self.nodes().iter().map(|&x| h * x).collect();
        let off = self.first_positive();
        if self.include_zero {
            w[0] = 0.0;
        }
        w[off] *= 0.5;
        let last = w.len() - 1;
        w[last] *= 0.5;
        w
    }

    /// `int_0^inf v(x) x^r dx` for samples `v >= 0`: log-trapezoid on the grid
    /// plus `v(x_min) x_min^{r+1}/(r+1)` for `[0, x_min]`.
    pub fn integrate_weighted(&self, v: &[f64], r: f64) -> f64 {
        assert_eq!(v.len(), self.len(), "integrate_weighted: length mismatch");
        let nodes = self.nodes();
        let w = self.log_weights();
        let off = self.first_positive();
        let body: f64 = (off..v.len()).map(|i| w[i] * nodes[i].powf(r) * v[i]).sum();
        body + v[off] * self.x_min.powf(r + 1.0) / (r + 1.0)
    }
}

/// Side of the tangential transform a [`GridFunction`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Frequency,
    Space,
}

/// Complex samples over (tangential index) x (normal index), row-major in the
/// tangential index.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<C64>,
    pub n_tangential: usize,
    pub n_normal: usize,
    pub layout: Layout,
}

impl GridFunction {
    pub fn zeros(n_tangential: usize, n_normal: usize, layout: Layout) -> Self {
        Self { values: vec![C64::new(0.0, 0.0); n_tangential * n_normal], n_tangential, n_normal, layout }
    }

    pub fn from_fn(n_tangential: usize, n_normal: usize, layout: Layout, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut g = Self::zeros(n_tangential, n_normal, layout);
        for t in 0..n_tangential {
            for z in 0..n_normal {
                g.values[t * n_normal + z] = f(t, z);
            }
        }
        g
    }

    /// Boundary datum: one value per tangential node, a single normal slot.
    pub fn boundary(values: Vec<C64>, layout: Layout) -> Self {
        let n = values.len();
        Self { values, n_tangential: n, n_normal: 1, layout }
    }

    pub fn get(&self, t: usize, z: usize) -> C64 {
        self.values[t * self.n_normal + z]
    }

    pub fn set(&mut self, t: usize, z: usize, v: C64) {
        self.values[t * self.n_normal + z] = v;
    }

    /// Normal profile at tangential index `t`.
    pub fn profile(&self, t: usize) -> &[C64] {
        &self.values[t * self.n_normal..(t + 1) * self.n_normal]
    }

    pub fn profile_mut(&mut self, t: usize) -> &mut [C64] {
        &mut self.values[t * self.n_normal..(t + 1) * self.n_normal]
    }

    /// Tangential slice at normal index `z`.
    pub fn slice(&self, z: usize) -> Vec<C64> {
        (0..self.n_tangential).map(|t| self.get(t, z)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn convert(&self, grid: &TorusGrid, to: Layout) -> Self {
        assert_eq!(self.n_tangential, grid.len(), "grid function does not match torus grid");
        if self.layout == to {
            return self.clone();
        }
        let mut out = self.clone();
        out.layout = to;
        let mut buf = vec![C64::new(0.0, 0.0); self.n_tangential];
        for z in 0..self.n_normal {
            for t in 0..self.n_tangential {
                buf[t] = self.get(t, z);
            }
            match to {
                Layout::Space => grid.inverse_fft(&mut buf),
                Layout::Frequency => grid.forward_fft(&mut buf),
            }
            for t in 0..self.n_tangential {
                out.set(t, z, buf[t]);
            }
        }
        out
    }

    pub fn to_space(&self, grid: &TorusGrid) -> Self {
        self.convert(grid, Layout::Space)
    }

    pub fn to_frequency(&self, grid: &TorusGrid) -> Self {
        self.convert(grid, Layout::Frequency)
    }

    pub fn scale(&mut self, s: C64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self - other`, entrywise.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_round_trip() {
        let g = TorusGrid::new(vec![8, 4], vec![2.0 * PI, 4.0]).unwrap();
        let k = g.index_of(&[-3, 1]);
        assert_eq!(g.frequency(k), vec![-3.0, 2.0 * PI / 4.0]);
        let mut c = vec![C64::new(0.0, 0.0); g.len()];
        c[k] = C64::new(2.0, -1.0);
        let mut s = c.clone();
        g.inverse_fft(&mut s);
        for i in 0..g.len() {
            let x = g.node(i);
            let xi = g.frequency(k);
            let want = c[k] * C64::new(0.0, xi[0] * x[0] + xi[1] * x[1]).exp();
            assert!((s[i] - want).norm() < 1e-13);
        }
        g.forward_fft(&mut s);
        for i in 0..g.len() {
            assert!((s[i] - c[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(TorusGrid::line(12, 1.0).is_err());
        assert!(NormalGrid::new(0.0, 1.1, 10, false).is_err());
    }

    #[test]
    fn log_trapezoid_is_spectrally_accurate() {
        let g = NormalGrid::covering(1e-8, 60.0, 1.1, true).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| (-x).exp()).collect();
        assert!((g.integrate_weighted(&v, 0.0) - 1.0).abs() < 1e-8);
        // int x^{1/2} e^{-4x} dx = Gamma(3/2) / 4^{3/2}
        let v: Vec<f64> = x.iter().map(|x| (-4.0 * x).exp()).collect();
        let want = 0.5 * PI.sqrt() / 8.0;
        assert!((g.integrate_weighted(&v, 0.5) - want).abs() < 1e-10);
        // singular weight x^{-1/2}: int x^{-1/2} e^{-x} = sqrt(pi)
        let v: Vec<f64> = x.iter().map(|x| (-x).exp()).collect();
        assert!((g.integrate_weighted(&v, -0.5) - PI.sqrt()).abs() < 1e-7);
    }
}
