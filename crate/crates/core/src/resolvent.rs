//! Resolvents of the model problem and the semigroup they generate.
//!
//! The half-space resolvent follows the correction formula
//! `R(lambda) f = r_+ (lambda - A)^{-1} E f - sum_j Poi_j tr B_j (lambda - A)^{-1} E f`.
//! Per tangential mode the whole-line solve is an ODE in `x_n`: the companion
//! system is block-diagonalised into stable and unstable parts, the stable part
//! is integrated forward and the unstable part backward with an exponential
//! integrator, and the boundary correction reuses the Poisson construction.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::companion::{build_companion, CompanionSystem, FrequencyPoint, RootBasis};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Layout, NormalGrid, TorusGrid};
use crate::linalg::TriangularExp;
use crate::model::ModelProblem;
use crate::spaces::{japanese, psi, sobolev_mixed_norm, DyadicPartition, SpaceSpec};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `(lambda - A(xi))^{-1} f_hat` on a full `n`-dimensional torus grid.
pub fn whole_space_resolvent(problem: &ModelProblem, lambda: C64, grid: &TorusGrid, f_hat: &[C64]) -> Result<Vec<C64>> {
    if grid.dim() != problem.n() || f_hat.len() != grid.len() {
        return Err(Error::InvalidArgument("whole-space data must live on an n-dimensional grid".into()));
    }
    let m2 = 2 * problem.m() as i32;
    (0..grid.len())
        .map(|i| {
            let xi = grid.frequency(i);
            let d = lambda - problem.symbol_a(&xi);
            let scale = lambda.norm() + crate::spaces::japanese(&xi).powi(m2);
            if d.norm() < 1e-14 * scale {
                return Err(Error::Conditioning { xi });
            }
            Ok(f_hat[i] / d)
        })
        .collect()
}

/// Reflection `E f(-x) = sum_k c_k f(x / k) chi(x / a)` with
/// `sum_k c_k (-1/k)^l = 1` for `l < K`, so derivatives up to order `K - 1`
/// match across `x = 0`. `chi` equals 1 on `[0, 1]` and vanishes beyond `3/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionOperator {
    pub order: usize,
    pub coeffs: Vec<f64>,
    /// Cutoff length `a`; `None` lets [`ExtensionOperator::extend`] pick half
    /// the grid length.
    pub cutoff: Option<f64>,
}

impl ExtensionOperator {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("extension order must be at least 1".into()));
        }
        let v = DMatrix::from_fn(order, order, |l, k| (-1.0 / (k + 1) as f64).powi(l as i32));
        let coeffs = v
            .lu()
            .solve(&DVector::from_element(order, 1.0))
            .ok_or_else(|| Error::Numerical("singular extension system".into()))?;
        Ok(Self { order, coeffs: coeffs.iter().cloned().collect(), cutoff: None })
    }

    /// Default order `max(4, k_max + 2m + 1)`.
    pub fn for_problem(problem: &ModelProblem) -> Self {
        Self::new((problem.k_max() + 2 * problem.m() + 1).max(4)).expect("order is positive")
    }

    pub fn with_cutoff(mut self, a: f64) -> Self {
        self.cutoff = Some(a);
        self
    }

    fn chi(&self, x: f64, a: f64) -> f64 {
        psi(x / a)
    }

    /// `E f(-x)` for a function given in closed form.
    pub fn extend_fn(&self, f: impl Fn(f64) -> C64, x: f64, a: f64) -> C64 {
        let chi = self.chi(x, a);
        if chi == 0.0 {
            return ZERO;
        }
        self.coeffs.iter().enumerate().map(|(k, c)| *c * f(x / (k + 1) as f64)).sum::<C64>() * chi
    }

    /// `E f(-x_i)` at the grid nodes for samples `f` on increasing nodes `xs`
    /// (cubic interpolation between nodes).
    pub fn extend(&self, xs: &[f64], f: &[C64]) -> Vec<C64> {
        let a = self.cutoff.unwrap_or(0.5 * xs[xs.len() - 1]);
        xs.iter().map(|&x| self.extend_fn(|y| interpolate_cubic(xs, f, y), x, a)).collect()
    }
}

/// Cubic Lagrange interpolation on increasing nodes.
fn interpolate_cubic(xs: &[f64], f: &[C64], x: f64) -> C64 {
    let n = xs.len();
    if n < 4 {
        return f[0];
    }
    let i = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => return f[i],
        Err(i) => i,
    };
    let start = i.saturating_sub(2).min(n - 4);
    let mut out = ZERO;
    for a in start..start + 4 {
        let mut l = 1.0;
        for b in start..start + 4 {
            if a != b {
                l *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        out += f[a] * l;
    }
    out
}

/// Monomial coefficients in `s = x - x0` of the cubic through four points.
fn cubic_coeffs(s: [f64; 4], y: [C64; 4]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for a in 0..4 {
        // expand prod_{b != a} (s - s_b) / (s_a - s_b)
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        let mut deg = 0;
        for b in 0..4 {
            if b == a {
                continue;
            }
            for d in (0..=deg).rev() {
                poly[d + 1] += poly[d];
                poly[d] *= -s[b];
            }
            deg += 1;
            denom *= s[a] - s[b];
        }
        for d in 0..4 {
            out[d] += y[a] * (poly[d] / denom);
        }
    }
    out
}

/// Solves `w' = K w + col sigma(x)` on increasing `nodes` with `w(nodes[0]) = 0`,
/// where `K = z T` for the triangular `T` behind `te`; forcing is cubic per step.
fn integrate(nodes: &[f64], te: &TriangularExp, z: C64, col: &DVector<C64>, sigma: &[C64]) -> Vec<DVector<C64>> {
    let n = nodes.len();
    let mut out = Vec::with_capacity(n);
    let mut w = DVector::from_element(col.len(), ZERO);
    out.push(w.clone());
    const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
    for i in 0..n - 1 {
        let h = nodes[i + 1] - nodes[i];
        let start = i.saturating_sub(1).min(n.saturating_sub(4));
        let (s, y) = if n >= 4 {
            let s = [0, 1, 2, 3].map(|k| nodes[start + k] - nodes[i]);
            let y = [0, 1, 2, 3].map(|k| sigma[start + k]);
            (s, y)
        } else {
            ([0.0, h, 2.0 * h, 3.0 * h], [sigma[i], sigma[i + 1], sigma[i + 1], sigma[i + 1]])
        };
        let a = cubic_coeffs(s, y);
        let phi = te.phi(z * h, 4);
        let mut next = &phi[0] * &w;
        for q in 0..4 {
            let scale = a[q] * FACT[q] * h.powi(q as i32 + 1);
            if scale != ZERO {
                next += (&phi[q + 1] * col) * scale;
            }
        }
        w = next;
        out.push(w.clone());
    }
    out
}

/// State `(u, D u / rho, ..., D^{2m-1} u / rho^{2m-1})` of the half-space
/// resolvent at the nodes of a half-line grid that starts at `x = 0`.
fn resolvent_mode(
    problem: &ModelProblem,
    cs: &CompanionSystem,
    xi: &[f64],
    lambda: C64,
    xs: &[f64],
    f: &[C64],
    ext: &ExtensionOperator,
) -> Vec<DVector<C64>> {
    let m = cs.m();
    let n2 = 2 * m;
    let rho = cs.rho();
    let nh = xs.len();
    let (q1, q2, t11, t22, y) = (cs.q1(), cs.q2(), cs.t11(), cs.t22(), cs.y());
    let z1 = q1.adjoint() - y * q2.adjoint();
    let z2 = q2.adjoint();
    let lead = problem.normal_polynomial(xi, lambda)[n2];
    let src = C64::i() / (lead * rho.powi(n2 as i32 - 1));
    let col1: DVector<C64> = z1.column(n2 - 1).into_owned();
    let col2: DVector<C64> = -z2.column(n2 - 1).into_owned();

    // whole-line grid [-x_N .. -x_1, 0, x_1 .. x_N]
    let left = ext.extend(xs, f);
    let mut nodes = Vec::with_capacity(2 * nh - 1);
    let mut sigma = Vec::with_capacity(2 * nh - 1);
    for i in (1..nh).rev() {
        nodes.push(-xs[i]);
        sigma.push(left[i] * src);
    }
    for i in 0..nh {
        nodes.push(xs[i]);
        sigma.push(f[i] * src);
    }
    let zero_at = nh - 1;

    let te1 = TriangularExp::new(t11);
    let te2 = TriangularExp::new(t22);
    let w1 = integrate(&nodes, &te1, C64::new(0.0, rho), &col1, &sigma);
    let back_nodes: Vec<f64> = nodes.iter().rev().map(|x| -x).collect();
    let back_sigma: Vec<C64> = sigma.iter().rev().cloned().collect();
    let mut w2 = integrate(&back_nodes, &te2, C64::new(0.0, -rho), &col2, &back_sigma);
    w2.reverse();

    let right = q1 * y + q2;
    let v: Vec<DVector<C64>> = (zero_at..nodes.len()).map(|i| q1 * &w1[i] + &right * &w2[i]).collect();
    let corr = cs.l_inv() * (cs.b_tilde() * &v[0]);
    v.into_iter()
        .zip(xs)
        .map(|(vi, &x)| vi - q1 * (cs.stable_exp(x) * &corr))
        .collect()
}

/// Normal derivatives `D_n^l R(lambda) f` for `l = 0..2m`, frequency layout.
/// `normal` must include the node `x = 0`.
pub fn halfspace_resolvent_derivatives(
    problem: &ModelProblem,
    lambda: C64,
    torus: &TorusGrid,
    normal: &NormalGrid,
    f: &GridFunction,
) -> Result<Vec<GridFunction>> {
    if !normal.include_zero {
        return Err(Error::InvalidArgument("the half-space resolvent needs a grid node at x_n = 0".into()));
    }
    if f.layout != Layout::Frequency || f.n_tangential != torus.len() || f.n_normal != normal.len() {
        return Err(Error::InvalidArgument("data do not match the grids (frequency layout expected)".into()));
    }
    if torus.dim() + 1 != problem.n() {
        return Err(Error::InvalidArgument("torus dimension must be n - 1".into()));
    }
    let m2 = 2 * problem.m();
    let xs = normal.nodes();
    let nz = xs.len();
    let ext = ExtensionOperator::for_problem(problem);
    let modes: Vec<Option<Vec<DVector<C64>>>> = (0..torus.len())
        .into_par_iter()
        .map(|t| -> Result<Option<Vec<DVector<C64>>>> {
            let prof = f.profile(t);
            if prof.iter().all(|v| *v == ZERO) {
                return Ok(None);
            }
            let xi = torus.frequency(t);
            let fp = FrequencyPoint::new(&xi, lambda, problem.m())?;
            let cs = build_companion(problem, &fp)?;
            let states = resolvent_mode(problem, &cs, &xi, lambda, &xs, prof, &ext);
            let rho = cs.rho();
            Ok(Some(
                states
                    .into_iter()
                    .map(|s| DVector::from_iterator(m2, s.iter().enumerate().map(|(l, v)| v * rho.powi(l as i32))))
                    .collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![GridFunction::zeros(torus.len(), nz, Layout::Frequency); m2];
    for (t, states) in modes.into_iter().enumerate() {
        if let Some(states) = states {
            for (z, s) in states.iter().enumerate() {
                for (l, g) in out.iter_mut().enumerate() {
                    g.set(t, z, s[l]);
                }
            }
        }
    }
    Ok(out)
}

/// `R(lambda) f` on the half-space, frequency layout.
pub fn halfspace_resolvent(
    problem: &ModelProblem,
    lambda: C64,
    torus: &TorusGrid,
    normal: &NormalGrid,
    f: &GridFunction,
) -> Result<GridFunction> {
    Ok(halfspace_resolvent_derivatives(problem, lambda, torus, normal, f)?.swap_remove(0))
}

/// `D^k u(x)` for the exact half-space solution of `(lambda - A) u = e^{-a x}`
/// (one tangential mode) with homogeneous boundary conditions:
/// `u = e^{-a x} / P(ia) + sum_l c_l e^{i tau_l x}` with `L c = -B(ia) / P(ia)`.
pub fn exponential_forcing_oracle(
    problem: &ModelProblem,
    xi: &[f64],
    lambda: C64,
    a: f64,
    x: f64,
    k: usize,
) -> Result<C64> {
    let fp = FrequencyPoint::new(xi, lambda, problem.m())?;
    let basis = RootBasis::new(problem, &fp)?;
    let ia = C64::new(0.0, a);
    let horner = |c: &[C64]| c.iter().rev().fold(ZERO, |acc, v| acc * ia + v);
    let p = horner(&problem.normal_polynomial(xi, lambda));
    let g: Vec<C64> = (0..problem.m()).map(|j| -horner(&problem.boundary_polynomial(j, xi)) / p).collect();
    Ok(ia.powu(k as u32) * (-a * x).exp() / p + basis.eval(&g, x, k))
}

/// Dirichlet heat flow of `x e^{-a x^2}` on the half-line times the tangential
/// factor `e^{-|xi'|^2 t}`, by odd reflection.
pub fn heat_images_oracle(a: f64, xi2: f64, t: f64, x: f64) -> f64 {
    let d = 1.0 + 4.0 * a * t;
    x * (-a * x * x / d).exp() / d.powf(1.5) * (-xi2 * t).exp()
}

/// Neumann heat flow of `e^{-a x^2}` on the half-line times `e^{-|xi'|^2 t}`,
/// by even reflection.
pub fn heat_images_oracle_even(a: f64, xi2: f64, t: f64, x: f64) -> f64 {
    let d = 1.0 + 4.0 * a * t;
    (-a * x * x / d).exp() / d.sqrt() * (-xi2 * t).exp()
}

/// Mixed `L_2` norm over the half-space grid.
pub fn l2_norm(u: &GridFunction, torus: &TorusGrid, normal: &NormalGrid) -> Result<f64> {
    let part = DyadicPartition { bands: vec![vec![1.0; torus.len()]] };
    sobolev_mixed_norm(std::slice::from_ref(u), torus, normal, &SpaceSpec::lp(2.0), &part)
}

/// `|lambda| ||R(lambda) f|| / ||f||` in the mixed `L_2` norm.
pub fn scaled_resolvent_norm(
    problem: &ModelProblem,
    lambda: C64,
    torus: &TorusGrid,
    normal: &NormalGrid,
    f: &GridFunction,
) -> Result<f64> {
    let u = halfspace_resolvent(problem, lambda, torus, normal, f)?;
    Ok(lambda.norm() * l2_norm(&u, torus, normal)? / l2_norm(f, torus, normal)?)
}

/// `max(||u||, ||<xi'>^{2m} u||, ||D_n^{2m} u||) / ||f||` for `u = R(lambda) f`,
/// all in the mixed `L_2` norm. The top normal derivative comes from the
/// equation `sum_l c_l(xi', lambda) D_n^l u = f`.
pub fn domain_norm_ratio(
    problem: &ModelProblem,
    lambda: C64,
    torus: &TorusGrid,
    normal: &NormalGrid,
    f: &GridFunction,
) -> Result<f64> {
    let der = halfspace_resolvent_derivatives(problem, lambda, torus, normal, f)?;
    let two_m = 2 * problem.m();
    let nz = normal.len();
    let mut tangential = der[0].clone();
    let mut top = GridFunction::zeros(torus.len(), nz, Layout::Frequency);
    for t in 0..torus.len() {
        let xi = torus.frequency(t);
        let c = problem.normal_polynomial(&xi, lambda);
        let w = japanese(&xi).powi(two_m as i32);
        for z in 0..nz {
            let lower: C64 = (0..two_m).map(|l| c[l] * der[l].get(t, z)).sum();
            top.set(t, z, (f.get(t, z) - lower) / c[two_m]);
            tangential.set(t, z, der[0].get(t, z) * w);
        }
    }
    let nf = l2_norm(f, torus, normal)?;
    let parts = [l2_norm(&der[0], torus, normal)?, l2_norm(&tangential, torus, normal)?, l2_norm(&top, torus, normal)?];
    Ok(parts.into_iter().fold(0.0, f64::max) / nf)
}

/// Hyperbolic contour `z(u) = omega + mu (1 + sin(i u - alpha))`, `u = k h`,
/// `|k| <= n`, with `h = 1.0818 / n` and `mu = 4.492 n / t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourParams {
    pub n: usize,
    pub alpha: f64,
    pub omega: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self { n: 24, alpha: 1.1721, omega: 0.0 }
    }
}

impl ContourParams {
    /// Nodes `z_k` and weights `h z'(u_k) / (2 pi i)`; rejects contours that
    /// leave the sector of angle `phi`.
    pub fn nodes(&self, t: f64, phi: f64) -> Result<Vec<(C64, C64)>> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("time t = {t} must be positive")));
        }
        if std::f64::consts::FRAC_PI_2 + self.alpha >= phi {
            return Err(Error::Contour(format!(
                "asymptotic angle pi/2 + {} is not inside the sector of angle {phi}",
                self.alpha
            )));
        }
        let n = self.n as i64;
        let h = 1.0818 / self.n as f64;
        let mu = 4.492 * self.n as f64 / t;
        (-n..=n)
            .map(|k| {
                let u = k as f64 * h;
                let w = C64::new(-self.alpha, u);
                let z = self.omega + mu * (1.0 + w.sin());
                let dz = mu * C64::i() * w.cos();
                if z.arg().abs() >= phi {
                    return Err(Error::Contour(format!("node {z} lies outside the sector")));
                }
                Ok((z, h * dz / (2.0 * std::f64::consts::PI * C64::i())))
            })
            .collect()
    }
}

/// `T(t) u0 = (2 pi i)^{-1} int e^{lambda t} R(lambda) u0 dlambda` by
/// trapezoidal quadrature on the hyperbolic contour.
pub fn semigroup_apply(
    problem: &ModelProblem,
    torus: &TorusGrid,
    normal: &NormalGrid,
    u0: &GridFunction,
    t: f64,
    contour: &ContourParams,
) -> Result<GridFunction> {
    let nodes = contour.nodes(t, problem.phi())?;
    let parts: Vec<GridFunction> = nodes
        .par_iter()
        .map(|&(z, w)| {
            let mut r = halfspace_resolvent(problem, z, torus, normal, u0)?;
            r.scale(w * (z * t).exp());
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let mut out = GridFunction::zeros(u0.n_tangential, u0.n_normal, Layout::Frequency);
    for p in parts {
        out.values.iter_mut().zip(&p.values).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}
