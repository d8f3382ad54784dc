//! Weighted norms on the tangential torus and the normal half-line,
//! Muckenhoupt characteristics of one-dimensional weights, and the
//! Hilbert-type kernel operator `T f(x) = int_0^inf f(y) / (x + y) dy`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Layout, NormalGrid, TorusGrid};
use crate::C64;

/// Function-space scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Lp,
    /// Integer-order Sobolev.
    W,
    /// Bessel potential.
    H,
    /// Besov.
    B,
    /// Triebel-Lizorkin.
    F,
}

/// Scale tag plus parameters. `r` is the exponent of the half-line weight
/// `x_n^r`; `tangential_weight` optionally tabulates a weight on the torus
/// nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub scale: Scale,
    pub s: f64,
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangential_weight: Option<Vec<f64>>,
}

fn default_q() -> f64 {
    2.0
}

impl SpaceSpec {
    pub fn new(scale: Scale, s: f64, p: f64, q: f64) -> Result<Self> {
        let spec = Self { scale, s, p, q, r: 0.0, tangential_weight: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn lp(p: f64) -> Self {
        Self { scale: Scale::Lp, s: 0.0, p, q: 2.0, r: 0.0, tangential_weight: None }
    }

    pub fn bessel(s: f64, p: f64) -> Self {
        Self { scale: Scale::H, s, p, q: 2.0, r: 0.0, tangential_weight: None }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidArgument(format!("p = {} must lie in [1, inf)", self.p)));
        }
        if !(self.q >= 1.0) {
            return Err(Error::InvalidArgument(format!("q = {} must lie in [1, inf]", self.q)));
        }
        if !(self.r > -1.0) {
            return Err(Error::InvalidArgument(format!("weight exponent r = {} must exceed -1", self.r)));
        }
        if self.scale == Scale::W && (self.s < 0.0 || self.s.fract() != 0.0) {
            return Err(Error::InvalidArgument(format!("W needs a non-negative integer order, got {}", self.s)));
        }
        if let Some(w) = &self.tangential_weight {
            if w.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidArgument("tabulated weight must be positive".into()));
            }
        }
        Ok(())
    }

    /// Whether `r` lies in the Muckenhoupt range `(-1, p - 1)`.
    pub fn is_ap_weight(&self) -> bool {
        self.r > -1.0 && self.r < self.p - 1.0
    }
}

/// `<xi> = (1 + |xi|^2)^{1/2}`.
pub fn japanese(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

fn bump_h(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Radial profile of `phi_0`: equal to 1 on `[0, 1]`, 0 from `3/2` on, smooth.
pub fn psi(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 1.5 {
        0.0
    } else {
        let a = bump_h(1.5 - t);
        a / (a + bump_h(t - 1.0))
    }
}

/// Smooth dyadic resolution of unity sampled on a torus grid. The last band
/// absorbs everything above `2^{K-1}` so the bands sum to one on the grid.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    pub bands: Vec<Vec<f64>>,
}

impl DyadicPartition {
    /// `phi_k(|xi|)` without truncation.
    pub fn phi(k: usize, xi: f64) -> f64 {
        if k == 0 {
            psi(xi)
        } else {
            let s = 0.5f64.powi(k as i32);
            psi(s * xi) - psi(2.0 * s * xi)
        }
    }

    /// Number of bands beyond `phi_0` needed to cover frequencies up to `xi_max`.
    pub fn band_count(xi_max: f64) -> usize {
        if xi_max <= 1.0 {
            1
        } else {
            ((xi_max / 3.0).log2().ceil().max(0.0) as usize + 1).max(1)
        }
    }

    pub fn for_grid(grid: &TorusGrid) -> Self {
        let norms: Vec<f64> = grid.frequencies().iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let xi_max = norms.iter().cloned().fold(0.0, f64::max);
        let kk = Self::band_count(xi_max);
        let bands = (0..=kk)
            .map(|k| {
                norms
                    .iter()
                    .map(|&x| if k < kk { Self::phi(k, x) } else { 1.0 - psi(2.0 * 0.5f64.powi(k as i32) * x) })
                    .collect()
            })
            .collect();
        Self { bands }
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

fn lp_of_samples(values: &[f64], p: f64, cell: f64, weight: Option<&[f64]>) -> f64 {
    let s: f64 = match weight {
        Some(w) => values.iter().zip(w).map(|(v, w)| v.powf(p) * w).sum(),
        None => values.iter().map(|v| v.powf(p)).sum(),
    };
    (s * cell).powf(1.0 / p)
}

fn ell_q(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        values.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn check_len(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec) -> Result<()> {
    if f_hat.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("{} coefficients on a grid of {}", f_hat.len(), grid.len())));
    }
    if let Some(w) = &spec.tangential_weight {
        if w.len() != grid.len() {
            return Err(Error::InvalidArgument("tabulated weight does not match the grid".into()));
        }
    }
    spec.validate()
}

fn multiplied_samples(f_hat: &[C64], grid: &TorusGrid, mult: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut buf: Vec<C64> = f_hat.iter().enumerate().map(|(i, c)| c * mult(&grid.frequency(i))).collect();
    grid.inverse_fft(&mut buf);
    buf.iter().map(|v| v.norm()).collect()
}

/// Weighted `L_p` norm of `F^{-1}[m f_hat]` on the torus.
fn multiplier_lp(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec, mult: impl Fn(&[f64]) -> f64) -> f64 {
    if spec.p == 2.0 && spec.tangential_weight.is_none() {
        let s: f64 = f_hat.iter().enumerate().map(|(i, c)| (c * mult(&grid.frequency(i))).norm_sqr()).sum();
        return (s * grid.volume()).sqrt();
    }
    let v = multiplied_samples(f_hat, grid, mult);
    lp_of_samples(&v, spec.p, grid.cell(), spec.tangential_weight.as_deref())
}

pub fn lp_norm(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec) -> Result<f64> {
    check_len(f_hat, grid, spec)?;
    Ok(multiplier_lp(f_hat, grid, spec, |_| 1.0))
}

/// `||<D>^s f||_{L_p}`.
pub fn bessel_norm(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec) -> Result<f64> {
    check_len(f_hat, grid, spec)?;
    Ok(multiplier_lp(f_hat, grid, spec, |xi| japanese(xi).powf(spec.s)))
}

fn band_samples(f_hat: &[C64], grid: &TorusGrid, part: &DyadicPartition) -> Vec<Vec<f64>> {
    part.bands
        .iter()
        .map(|band| {
            let mut buf: Vec<C64> = f_hat.iter().zip(band).map(|(c, b)| c * b).collect();
            grid.inverse_fft(&mut buf);
            buf.iter().map(|v| v.norm()).collect()
        })
        .collect()
}

pub fn besov_norm(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec, part: &DyadicPartition) -> Result<f64> {
    check_len(f_hat, grid, spec)?;
    let w = spec.tangential_weight.as_deref();
    let bands = band_samples(f_hat, grid, part);
    Ok(ell_q(
        bands.iter().enumerate().map(|(k, b)| 2f64.powf(spec.s * k as f64) * lp_of_samples(b, spec.p, grid.cell(), w)),
        spec.q,
    ))
}

pub fn triebel_norm(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec, part: &DyadicPartition) -> Result<f64> {
    check_len(f_hat, grid, spec)?;
    let bands = band_samples(f_hat, grid, part);
    let pointwise: Vec<f64> = (0..grid.len())
        .map(|i| ell_q(bands.iter().enumerate().map(|(k, b)| 2f64.powf(spec.s * k as f64) * b[i]), spec.q))
        .collect();
    Ok(lp_of_samples(&pointwise, spec.p, grid.cell(), spec.tangential_weight.as_deref()))
}

fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|a: Vec<usize>| {
                let used: usize = a.iter().sum();
                (0..=max_order - used).map(move |k| {
                    let mut b = a.clone();
                    b.push(k);
                    b
                })
            })
            .collect();
    }
    out
}

fn sobolev_w_norm(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec) -> f64 {
    multi_indices(grid.dim(), spec.s as usize)
        .iter()
        .map(|alpha| multiplier_lp(f_hat, grid, spec, |xi| crate::model::monomial(xi, alpha).abs()).powf(spec.p))
        .sum::<f64>()
        .powf(1.0 / spec.p)
}

/// Norm in the scale named by `spec`.
pub fn tangential_norm(f_hat: &[C64], grid: &TorusGrid, spec: &SpaceSpec, part: &DyadicPartition) -> Result<f64> {
    check_len(f_hat, grid, spec)?;
    match spec.scale {
        Scale::Lp => lp_norm(f_hat, grid, spec),
        Scale::H => bessel_norm(f_hat, grid, spec),
        Scale::W => Ok(sobolev_w_norm(f_hat, grid, spec)),
        Scale::B => besov_norm(f_hat, grid, spec, part),
        Scale::F => triebel_norm(f_hat, grid, spec, part),
    }
}

/// Norm of the single mode `exp(i xi . x)` on a torus of the given volume.
/// For one mode every scale is an explicit multiple of the `L_p` norm.
pub fn mode_weight(spec: &SpaceSpec, xi: &[f64], volume: f64) -> f64 {
    let base = volume.powf(1.0 / spec.p);
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let factor = match spec.scale {
        Scale::Lp => 1.0,
        Scale::H => japanese(xi).powf(spec.s),
        Scale::W => multi_indices(xi.len(), spec.s as usize)
            .iter()
            .map(|a| crate::model::monomial(xi, a).abs().powf(spec.p))
            .sum::<f64>()
            .powf(1.0 / spec.p),
        Scale::B | Scale::F => {
            let top = DyadicPartition::band_count(norm) + 1;
            ell_q((0..=top).map(|k| 2f64.powf(spec.s * k as f64) * DyadicPartition::phi(k, norm)), spec.q)
        }
    };
    factor * base
}

/// Parameter-dependent norm: multiplier `(1 + |xi|^2 + |mu|^2)^{(s - s0)/2}`
/// followed by the `base` norm (whose smoothness is `s0`).
pub fn param_norm(
    f_hat: &[C64],
    grid: &TorusGrid,
    s: f64,
    mu: C64,
    base: &SpaceSpec,
    part: &DyadicPartition,
) -> Result<f64> {
    let mu2 = mu.norm_sqr();
    let lifted: Vec<C64> = f_hat
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let xi2: f64 = grid.frequency(i).iter().map(|x| x * x).sum();
            c * (1.0 + xi2 + mu2).powf(0.5 * (s - base.s))
        })
        .collect();
    tangential_norm(&lifted, grid, base, part)
}

/// `param_norm / (||f||_{A^s} + <mu>^{s - s0} ||f||_{A^{s0}})` for `s >= s0`,
/// `param_norm / ||f||_{A^s}` otherwise.
pub fn param_equivalence_ratio(
    f_hat: &[C64],
    grid: &TorusGrid,
    s: f64,
    mu: C64,
    base: &SpaceSpec,
    part: &DyadicPartition,
) -> Result<f64> {
    let lhs = param_norm(f_hat, grid, s, mu, base, part)?;
    let top = tangential_norm(f_hat, grid, &base.with_s(s), part)?;
    if s >= base.s {
        let bottom = tangential_norm(f_hat, grid, base, part)?;
        Ok(lhs / (top + (1.0 + mu.norm_sqr()).powf(0.5 * (s - base.s)) * bottom))
    } else {
        Ok(lhs / top)
    }
}

/// `(int_0^inf |f|^p x^r dx)^{1/p}` by log-trapezoid quadrature.
pub fn weighted_halfline_norm(f: &[C64], p: f64, r: f64, grid: &NormalGrid) -> Result<f64> {
    if !(r > -1.0) {
        return Err(Error::InvalidArgument(format!("weight exponent r = {r} must exceed -1")));
    }
    if f.len() != grid.len() {
        return Err(Error::InvalidArgument("profile does not match the normal grid".into()));
    }
    let v: Vec<f64> = f.iter().map(|z| z.norm().powf(p)).collect();
    Ok(grid.integrate_weighted(&v, r).powf(1.0 / p))
}

/// `(sum_{l <= k} int_0^inf ||D_n^l u(., x)||^p x^r dx)^{1/p}` where
/// `derivs[l]` holds `D_n^l u` (frequency layout) and the tangential norm is
/// taken in `spec`; the weight exponent is `spec.r`.
pub fn sobolev_mixed_norm(
    derivs: &[GridFunction],
    torus: &TorusGrid,
    normal: &NormalGrid,
    spec: &SpaceSpec,
    part: &DyadicPartition,
) -> Result<f64> {
    let mut total = 0.0;
    for d in derivs {
        if d.layout != Layout::Frequency || d.n_normal != normal.len() || d.n_tangential != torus.len() {
            return Err(Error::InvalidArgument("derivative data does not match the grids".into()));
        }
        let mut prof = Vec::with_capacity(normal.len());
        for z in 0..normal.len() {
            prof.push(tangential_norm(&d.slice(z), torus, spec, part)?.powf(spec.p));
        }
        total += normal.integrate_weighted(&prof, spec.r);
    }
    Ok(total.powf(1.0 / spec.p))
}

/// `max{ ||u||_{W^k(A^{s + k~})}, ||u||_{W^{k + k~}(A^s)} }`, with
/// `derivs.len() >= k + k~ + 1`.
pub fn sobolev_max_norm(
    derivs: &[GridFunction],
    k: usize,
    k_tilde: usize,
    torus: &TorusGrid,
    normal: &NormalGrid,
    spec: &SpaceSpec,
    part: &DyadicPartition,
) -> Result<f64> {
    if derivs.len() < k + k_tilde + 1 {
        return Err(Error::InvalidArgument("not enough normal derivatives supplied".into()));
    }
    let a = sobolev_mixed_norm(&derivs[..=k], torus, normal, &spec.with_s(spec.s + k_tilde as f64), part)?;
    let b = sobolev_mixed_norm(&derivs[..=k + k_tilde], torus, normal, spec, part)?;
    Ok(a.max(b))
}

/// Mixed-scale lifting comparison for 2-D data (last axis normal):
/// `||<D>^t f||` against `max(||<D_n>^t f||, ||<D'>^t f||)`, all in `L_p`.
#[derive(Debug, Clone, Serialize)]
pub struct LiftingReport {
    pub full: f64,
    pub normal: f64,
    pub tangential: f64,
    pub ratio: f64,
}

pub fn mixed_lifting_check(f_hat: &[C64], grid: &TorusGrid, t: f64, p: f64) -> Result<LiftingReport> {
    if grid.dim() < 2 {
        return Err(Error::InvalidArgument("mixed lifting needs at least two axes".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument("lifting order must be non-negative".into()));
    }
    let spec = SpaceSpec::lp(p);
    check_len(f_hat, grid, &spec)?;
    let d = grid.dim();
    let full = multiplier_lp(f_hat, grid, &spec, |xi| japanese(xi).powf(t));
    let normal = multiplier_lp(f_hat, grid, &spec, |xi| japanese(&xi[d - 1..]).powf(t));
    let tangential = multiplier_lp(f_hat, grid, &spec, |xi| japanese(&xi[..d - 1]).powf(t));
    Ok(LiftingReport { full, normal, tangential, ratio: full / normal.max(tangential) })
}

/// Tanh-sinh quadrature on `[a, b]` for integrands with at most power-type
/// endpoint singularities. The part of `[a, b]` within `~1e-30 (b - a)` of an
/// endpoint is integrated from a local power-law fit. Returns `None` when the
/// fitted endpoint exponent is `<= -1` (non-integrable).
fn tanh_sinh(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Option<f64> {
    const T: f64 = 3.8;
    let len = b - a;
    let mut prev: Option<f64> = None;
    for level in 2..=9 {
        let h = 0.5f64.powi(level);
        let n = (T / h).round() as i64;
        let node = |i: i64| {
            let t = i as f64 * h;
            let u = 0.5 * PI * t.sinh();
            let dl = len / (1.0 + (-2.0 * u).exp());
            let dr = len / (1.0 + (2.0 * u).exp());
            let x = if t < 0.0 { a + dl } else { b - dr };
            let w = 0.5 * len * 0.5 * PI * t.cosh() / u.cosh().powi(2) * h;
            (x, w, dl, dr)
        };
        let mut sum = 0.0;
        for i in -n..=n {
            let (x, w, _, _) = node(i);
            let fx = f(x);
            sum += if i.abs() == n { 0.5 * w * fx } else { w * fx };
        }
        let tail = |d1: f64, f1: f64, d2: f64, f2: f64| -> Option<f64> {
            if f1 == 0.0 {
                return Some(0.0);
            }
            let e = (f1 / f2).ln() / (d1 / d2).ln();
            if e <= -1.0 + 1e-6 {
                None
            } else {
                Some(f1 * d1 / (e + 1.0))
            }
        };
        let (xl1, _, dl1, _) = node(-n);
        let (xl2, _, dl2, _) = node(-n + 1);
        let (xr1, _, _, dr1) = node(n);
        let (xr2, _, _, dr2) = node(n - 1);
        sum += tail(dl1, f(xl1), dl2, f(xl2))?;
        sum += tail(dr1, f(xr1), dr2, f(xr2))?;
        if let Some(p) = prev {
            if (sum - p).abs() <= 1e-10 * sum.abs() {
                return Some(sum);
            }
        }
        prev = Some(sum);
    }
    prev
}

fn integrate_split(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Option<f64> {
    if a < 0.0 && b > 0.0 {
        Some(tanh_sinh(f, a, 0.0)? + tanh_sinh(f, 0.0, b)?)
    } else {
        tanh_sinh(f, a, b)
    }
}

/// Result of [`ap_characteristic`].
#[derive(Debug, Clone, Serialize)]
pub struct ApReport {
    /// Supremum over the family; infinite when some average diverges.
    pub value: f64,
    pub divergent: bool,
    pub worst_interval: (f64, f64),
}

/// `sup_I (avg_I w) (avg_I w^{-1/(p-1)})^{p-1}` over the given intervals.
pub fn ap_characteristic(weight: &dyn Fn(f64) -> f64, p: f64, intervals: &[(f64, f64)]) -> Result<ApReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("A_p characteristic needs p > 1, got {p}")));
    }
    let mut report = ApReport { value: 0.0, divergent: false, worst_interval: (0.0, 0.0) };
    let bad = std::cell::Cell::new(false);
    for &(a, b) in intervals {
        if !(b > a) {
            return Err(Error::InvalidArgument(format!("empty interval ({a}, {b})")));
        }
        let w = |x: f64| {
            let v = weight(x);
            if !(v > 0.0) && x != 0.0 {
                bad.set(true);
            }
            v
        };
        let dual = |x: f64| w(x).powf(-1.0 / (p - 1.0));
        let iw = integrate_split(&w, a, b);
        let id = integrate_split(&dual, a, b);
        if bad.get() {
            return Err(Error::InvalidArgument("weight must be positive".into()));
        }
        let value = match (iw, id) {
            (Some(iw), Some(id)) => (iw / (b - a)) * (id / (b - a)).powf(p - 1.0),
            _ => f64::INFINITY,
        };
        if value > report.value || value.is_infinite() {
            report.value = value;
            report.worst_interval = (a, b);
        }
        if value.is_infinite() {
            report.divergent = true;
            break;
        }
    }
    Ok(report)
}

/// Intervals `[-h, h]`, `[0, h]`, `[h, 2h]` for `h = 2^{-l}`, `l < levels`.
pub fn shrinking_intervals(levels: usize) -> Vec<(f64, f64)> {
    (0..levels)
        .flat_map(|l| {
            let h = 0.5f64.powi(l as i32);
            [(-h, h), (0.0, h), (h, 2.0 * h)]
        })
        .collect()
}

/// `x -> |x|^r`.
pub fn power_weight(r: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| x.abs().powf(r)
}

/// `T f(x_i) = int_0^inf f(y) / (x_i + y) dy` for samples on `grid`; the part
/// `[0, x_min]` uses `f(x_min)`.
pub fn hardy_apply(f: &[f64], grid: &NormalGrid) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(Error::InvalidArgument("samples do not match the normal grid".into()));
    }
    let x = grid.nodes();
    let w = grid.log_weights();
    let off = grid.first_positive();
    let x0 = grid.x_min;
    Ok(x
        .iter()
        .map(|&xi| {
            let body: f64 = (off..x.len()).map(|j| w[j] * f[j] / (xi + x[j])).sum();
            let head = if xi > 0.0 { f[off] * ((xi + x0) / xi).ln() } else { f64::INFINITY };
            body + head
        })
        .collect())
}

/// Log-uniform Nystrom grid `x = exp(lo + i h)` for the Hilbert-type operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyGrid {
    pub log_lo: f64,
    pub log_hi: f64,
    pub h: f64,
}

impl HardyGrid {
    pub fn symmetric(decades: f64, h: f64) -> Self {
        let l = decades * std::f64::consts::LN_10;
        Self { log_lo: -l, log_hi: l, h }
    }

    fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let n = ((self.log_hi - self.log_lo) / self.h).round() as usize;
        let x: Vec<f64> = (0..=n).map(|i| (self.log_lo + i as f64 * self.h).exp()).collect();
        let mut w: Vec<f64> = x.iter().map(|x| self.h * x).collect();
        w[0] *= 0.5;
        w[n] *= 0.5;
        (x, w)
    }
}

/// Classical value `pi / sin(pi (1 + r) / p)` of the operator norm on
/// `L_p(R_+, x^r)`, finite for `r in (-1, p - 1)`.
pub fn hardy_reference(p: f64, r: f64) -> Option<f64> {
    (r > -1.0 && r < p - 1.0).then(|| PI / (PI * (1.0 + r) / p).sin())
}

/// `l_p -> l_p` norm of a non-negative matrix (row-major, `n x n`) by Boyd's
/// nonlinear power iteration; for `p = 2` this is power iteration on `B^T B`.
fn nonneg_matrix_norm(b: &[f64], n: usize, p: f64, start: Vec<f64>) -> (f64, usize) {
    let pn = |v: &[f64]| v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
    let mul = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| b[i * n + j] * v[j]).sum()).collect() };
    let mul_t = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..n {
            let vi = v[i];
            for j in 0..n {
                out[j] += b[i * n + j] * vi;
            }
        }
        out
    };
    if p == 1.0 {
        let col = (0..n).map(|j| (0..n).map(|i| b[i * n + j]).sum::<f64>()).fold(0.0, f64::max);
        return (col, 0);
    }
    let mut v = start;
    let s = pn(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut est = 0.0;
    for it in 1..=5000 {
        let y = mul(&v);
        let new = pn(&y);
        let z = mul_t(&y.iter().map(|x| x.powf(p - 1.0)).collect::<Vec<_>>());
        v = z.iter().map(|x| x.powf(1.0 / (p - 1.0))).collect();
        let s = pn(&v);
        v.iter_mut().for_each(|x| *x /= s);
        if it > 5 && (new - est).abs() <= 1e-12 * new {
            return (new, it);
        }
        est = new;
    }
    (est, 5000)
}

/// Operator-norm estimate on one Nystrom grid.
pub fn hardy_norm(p: f64, r: f64, grid: &HardyGrid) -> Result<(f64, usize)> {
    if !(p >= 1.0) || !(r > -1.0) {
        return Err(Error::InvalidArgument(format!("hardy_norm needs p >= 1 and r > -1 (got {p}, {r})")));
    }
    let (x, w) = grid.nodes();
    let n = x.len();
    let a: Vec<f64> = (0..n).map(|i| w[i].powf(1.0 / p) * x[i].powf(r / p)).collect();
    let c: Vec<f64> = (0..n).map(|j| w[j].powf(1.0 - 1.0 / p) * x[j].powf(-r / p)).collect();
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = a[i] * c[j] / (x[i] + x[j]);
        }
    }
    let start = (0..n).map(|i| (PI * (i as f64 + 0.5) / n as f64).sin()).collect();
    Ok(nonneg_matrix_norm(&b, n, p, start))
}

/// Norm estimates on nested log-ranges plus an extrapolation in the range
/// length `l` (model `N - C/l^2 - D/l^3`).
#[derive(Debug, Clone, Serialize)]
pub struct HardyEstimate {
    pub p: f64,
    pub r: f64,
    pub decades: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
    pub reference: Option<f64>,
}

pub fn hardy_norm_extrapolated(p: f64, r: f64, h: f64, decades: &[f64]) -> Result<HardyEstimate> {
    if decades.len() < 2 {
        return Err(Error::InvalidArgument("extrapolation needs at least two ranges".into()));
    }
    let values: Vec<f64> =
        decades.iter().map(|&d| hardy_norm(p, r, &HardyGrid::symmetric(d, h)).map(|v| v.0)).collect::<Result<_>>()?;
    let ls: Vec<f64> = decades.iter().map(|d| 2.0 * d * std::f64::consts::LN_10).collect();
    let extrapolated = if values.len() >= 3 {
        let k = values.len();
        let (l1, l2, l3) = (ls[k - 3], ls[k - 2], ls[k - 1]);
        let m = nalgebra::Matrix3::new(
            1.0,
            -l1.powi(-2),
            -l1.powi(-3),
            1.0,
            -l2.powi(-2),
            -l2.powi(-3),
            1.0,
            -l3.powi(-2),
            -l3.powi(-3),
        );
        let rhs = nalgebra::Vector3::new(values[k - 3], values[k - 2], values[k - 1]);
        m.lu().solve(&rhs).map(|s| s[0]).unwrap_or(values[k - 1])
    } else {
        let (l1, l2) = (ls[0], ls[1]);
        (l2 * l2 * values[1] - l1 * l1 * values[0]) / (l2 * l2 - l1 * l1)
    };
    Ok(HardyEstimate { p, r, decades: decades.to_vec(), values, extrapolated, reference: hardy_reference(p, r) })
}

/// Coefficients uniform in `[-1, 1]^2` for `<xi> <= band`, zero above.
pub fn random_band_limited(grid: &TorusGrid, band: f64, seed: u64) -> Vec<C64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..grid.len())
        .map(|i| {
            if japanese(&grid.frequency(i)) <= band {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}
