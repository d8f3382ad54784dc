//! First-order reduction of the normal ODE at one frequency point.
//!
//! At `(xi', lambda)` the boundary problem reduces to
//! `P(D_n) u = 0`, `B_j(xi', D_n) u(0) = g_j` with
//! `P(tau) = lambda - A(xi', tau)`. Using `rho = (1 + |xi'|^2 + |lambda|^{1/m})^{1/2}`,
//! `b = xi'/rho`, `sigma = lambda/rho^{2m}`, the state
//! `v = (u, D u / rho, ..., D^{2m-1} u / rho^{2m-1})` satisfies
//! `D v = rho A0(b, sigma) v`, so `v(x) = exp(i rho A0 x) v(0)`.
//!
//! Decaying solutions live in the invariant subspace of `A0` belonging to the
//! eigenvalues with positive imaginary part. That subspace is obtained from an
//! ordered Schur form `A0 = Q T Q^*`; only the stable block `T11` is ever
//! exponentiated.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{complex_schur, poly_roots, reorder_schur, solve_triangular_sylvester, CMatrix, TriangularExp};
use crate::model::{monomial, ModelProblem};
use crate::C64;

/// Eigenvalues closer than this to the real axis (in rescaled units) are
/// treated as an ellipticity failure.
pub const REAL_AXIS_TOL: f64 = 1e-10;

/// Frequency-parameter point with its rescaled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPoint {
    pub xi_prime: Vec<f64>,
    pub lambda: C64,
    pub rho: f64,
    pub b: Vec<f64>,
    pub sigma: C64,
    /// Principal `2m`-th root of `lambda`.
    pub mu: C64,
}

impl FrequencyPoint {
    pub fn new(xi_prime: &[f64], lambda: C64, m: usize) -> Result<Self> {
        let xi2: f64 = xi_prime.iter().map(|x| x * x).sum();
        if xi2 == 0.0 && lambda.norm() == 0.0 {
            return Err(Error::DegenerateFrequency);
        }
        let two_m = (2 * m) as f64;
        let rho = (1.0 + xi2 + lambda.norm().powf(1.0 / m as f64)).sqrt();
        Ok(Self {
            xi_prime: xi_prime.to_vec(),
            lambda,
            rho,
            b: xi_prime.iter().map(|x| x / rho).collect(),
            sigma: lambda / rho.powi(2 * m as i32),
            mu: if lambda.norm() == 0.0 { lambda } else { lambda.powf(1.0 / two_m) },
        })
    }
}

/// Rescaled normal polynomial `sigma - A(b, tau)`, ascending in `tau`.
fn rescaled_polynomial(problem: &ModelProblem, fp: &FrequencyPoint) -> Vec<C64> {
    problem.normal_polynomial(&fp.b, fp.sigma)
}

/// The `m` roots of `lambda - A(xi', tau)` with positive imaginary part,
/// sorted by imaginary part. Computed by a polynomial root finder, independent
/// of the Schur route used in [`build_companion`].
pub fn stable_roots(problem: &ModelProblem, fp: &FrequencyPoint) -> Result<Vec<C64>> {
    let roots = poly_roots(&rescaled_polynomial(problem, fp))?;
    if let Some(r) = roots.iter().find(|r| r.im.abs() < REAL_AXIS_TOL) {
        return Err(Error::RealAxisRoot { root: r * fp.rho, tol: REAL_AXIS_TOL });
    }
    let mut up: Vec<C64> = roots.into_iter().filter(|r| r.im > 0.0).map(|r| r * fp.rho).collect();
    if up.len() != problem.m() {
        return Err(Error::RootCount { found: up.len(), expected: problem.m() });
    }
    up.sort_by(|a, b| a.im.total_cmp(&b.im));
    Ok(up)
}

/// Companion data at one frequency point.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    /// Rescaled companion matrix, `2m x 2m`.
    pub a0: CMatrix,
    /// Spectral projection onto the stable subspace.
    pub p_minus: CMatrix,
    /// Boundary inversion `Q1 (B Q1)^{-1}`, `2m x m`.
    pub m_mat: CMatrix,
    /// Physical stable roots `tau_l` (eigenvalues of `rho A0` above the real line).
    pub stable_roots: Vec<C64>,
    /// `L_{jl} = B_j(xi', tau_l)` when the stable roots are simple.
    pub boundary_map: Option<CMatrix>,
    rho: f64,
    boundary_orders: Vec<usize>,
    /// `Q1`, orthonormal basis of the stable subspace.
    q1: CMatrix,
    /// `Q2`, orthonormal complement.
    q2: CMatrix,
    t11: CMatrix,
    t22: CMatrix,
    /// Solution of `T11 Y - Y T22 = -T12`.
    y: CMatrix,
    /// Rescaled boundary rows, `m x 2m`.
    b_tilde: CMatrix,
    /// `(B Q1)^{-1}`.
    l_inv: CMatrix,
    min_singular: f64,
    condition: f64,
    exp_stable: TriangularExp,
}

/// Builds the companion system and rejects Lopatinskii-Shapiro failures
/// (relative smallest singular value below `1e-8`).
pub fn build_companion(problem: &ModelProblem, fp: &FrequencyPoint) -> Result<CompanionSystem> {
    let cs = build_companion_unchecked(problem, fp)?;
    if cs.min_singular < 1e-8 * problem.boundary_scale() {
        return Err(Error::LopatinskiiShapiro {
            xi_prime: fp.xi_prime.clone(),
            lambda: fp.lambda,
            condition: cs.condition,
        });
    }
    Ok(cs)
}

/// As [`build_companion`] but returns the system even if the boundary map is
/// near singular (used by the LS check, which reports instead of failing).
pub(crate) fn build_companion_unchecked(problem: &ModelProblem, fp: &FrequencyPoint) -> Result<CompanionSystem> {
    let m = problem.m();
    let n2 = 2 * m;
    let p = rescaled_polynomial(problem, fp);
    let lead = p[n2];
    let mut a0 = CMatrix::zeros(n2, n2);
    for i in 0..n2 - 1 {
        a0[(i, i + 1)] = C64::new(1.0, 0.0);
    }
    for k in 0..n2 {
        a0[(n2 - 1, k)] = -p[k] / lead;
    }

    let (mut q, mut t) = complex_schur(&a0)?;
    if let Some(i) = (0..n2).find(|&i| t[(i, i)].im.abs() < REAL_AXIS_TOL) {
        return Err(Error::RealAxisRoot { root: t[(i, i)] * fp.rho, tol: REAL_AXIS_TOL });
    }
    let count = reorder_schur(&mut q, &mut t, |z| z.im > 0.0);
    if count != m {
        return Err(Error::RootCount { found: count, expected: m });
    }
    let q1 = q.columns(0, m).into_owned();
    let q2 = q.columns(m, m).into_owned();
    let t11 = t.view((0, 0), (m, m)).into_owned();
    let t12 = t.view((0, m), (m, m)).into_owned();
    let t22 = t.view((m, m), (m, m)).into_owned();
    let y = solve_triangular_sylvester(&t11, &t22, &(-t12));

    // P_- = Q [[I, -Y], [0, 0]] Q^*
    let mut inner = CMatrix::zeros(n2, n2);
    for i in 0..m {
        inner[(i, i)] = C64::new(1.0, 0.0);
    }
    inner.view_mut((0, m), (m, m)).copy_from(&(-&y));
    let p_minus = &q * inner * q.adjoint();

    let b_tilde = rescaled_boundary_rows(problem, fp);
    let l = &b_tilde * &q1;
    let sv = l.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let l_inv = l.clone().try_inverse().unwrap_or_else(|| CMatrix::from_element(m, m, C64::new(f64::NAN, 0.0)));
    let m_mat = &q1 * &l_inv;

    let stable: Vec<C64> = (0..m).map(|i| t11[(i, i)] * fp.rho).collect();
    let mut sorted = stable.clone();
    sorted.sort_by(|a, b| a.im.total_cmp(&b.im));
    let scale = sorted.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let simple = (0..m).all(|i| (0..i).all(|j| (sorted[i] - sorted[j]).norm() > 1e-6 * scale));
    let boundary_map = simple.then(|| root_boundary_map(problem, &fp.xi_prime, &sorted));

    Ok(CompanionSystem {
        a0,
        p_minus,
        m_mat,
        stable_roots: sorted,
        boundary_map,
        rho: fp.rho,
        boundary_orders: problem.boundary_orders(),
        exp_stable: TriangularExp::new(&t11),
        q1,
        q2,
        t11,
        t22,
        y,
        b_tilde,
        l_inv,
        min_singular: smin,
        condition,
    })
}

/// Rows `B~_j` with `B_j(xi', D) u(0) = rho^{m_j} B~_j . v(0)`.
fn rescaled_boundary_rows(problem: &ModelProblem, fp: &FrequencyPoint) -> CMatrix {
    let m = problem.m();
    let n = problem.n();
    let mut b = CMatrix::zeros(m, 2 * m);
    for (j, op) in problem.boundary().iter().enumerate() {
        for (beta, c) in &op.coeffs {
            b[(j, beta[n - 1])] += c * monomial(&fp.b, &beta[..n - 1]);
        }
    }
    b
}

fn root_boundary_map(problem: &ModelProblem, xi_prime: &[f64], roots: &[C64]) -> CMatrix {
    let m = problem.m();
    CMatrix::from_fn(m, m, |j, l| {
        let poly = problem.boundary_polynomial(j, xi_prime);
        poly.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * roots[l] + c)
    })
}

impl CompanionSystem {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn m(&self) -> usize {
        self.q1.ncols()
    }

    /// Smallest singular value of the stable boundary map `B~ Q1`.
    pub fn min_singular(&self) -> f64 {
        self.min_singular
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Smallest imaginary part of the rescaled stable eigenvalues; the
    /// kernel decays at least like `exp(-decay_rate * rho * x)` up to
    /// polynomial factors.
    pub fn decay_rate(&self) -> f64 {
        (0..self.m()).map(|i| self.t11[(i, i)].im).fold(f64::INFINITY, f64::min)
    }

    /// `(rho A0)^k Q1`, the state-space image of `D^k` on the stable subspace.
    pub fn derivative_basis(&self, k: usize) -> CMatrix {
        let mut out = self.q1.clone();
        let ra = &self.a0 * C64::new(self.rho, 0.0);
        for _ in 0..k {
            out = &ra * out;
        }
        out
    }

    /// `exp(i rho T11 x)`.
    pub fn stable_exp(&self, x: f64) -> CMatrix {
        self.exp_stable.eval(C64::new(0.0, self.rho * x))
    }

    /// Right factor `(B~ Q1)^{-1} diag(rho^{-m_j})`.
    pub fn boundary_inverse(&self) -> CMatrix {
        let mut w = self.l_inv.clone();
        for (j, &mj) in self.boundary_orders.iter().enumerate() {
            let s = self.rho.powi(-(mj as i32));
            w.column_mut(j).scale_mut(s);
        }
        w
    }

    /// `D^k exp(i rho A0 x) M_rho`, a `2m x m` matrix; column `j` maps the
    /// boundary datum `g_j` to the state of the solution at `x`.
    pub fn propagate(&self, x: f64, k: usize) -> Result<CMatrix> {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!("propagate: x_n = {x} must be >= 0")));
        }
        Ok(self.derivative_basis(k) * self.stable_exp(x) * self.boundary_inverse())
    }

    /// Fast evaluator for `pr_1 D^k Poi(x)`; see [`KernelRow`].
    pub fn kernel_row(&self, k: usize) -> KernelRow<'_> {
        let basis = self.derivative_basis(k);
        KernelRow { cs: self, row: basis.row(0).into_owned(), right: self.boundary_inverse() }
    }

    /// Rescaled boundary rows and the stable basis (used by the resolvent).
    pub(crate) fn b_tilde(&self) -> &CMatrix {
        &self.b_tilde
    }

    pub(crate) fn q1(&self) -> &CMatrix {
        &self.q1
    }

    pub(crate) fn q2(&self) -> &CMatrix {
        &self.q2
    }

    pub(crate) fn t11(&self) -> &CMatrix {
        &self.t11
    }

    pub(crate) fn t22(&self) -> &CMatrix {
        &self.t22
    }

    pub(crate) fn y(&self) -> &CMatrix {
        &self.y
    }

    pub(crate) fn l_inv(&self) -> &CMatrix {
        &self.l_inv
    }

    /// JSON dump of the matrices for debugging.
    pub fn debug_json(&self) -> serde_json::Value {
        let mat = |a: &CMatrix| -> Vec<Vec<[f64; 2]>> {
            (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
        };
        serde_json::json!({
            "rho": self.rho,
            "a0": mat(&self.a0),
            "p_minus": mat(&self.p_minus),
            "m": mat(&self.m_mat),
            "stable_roots": self.stable_roots.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "min_singular": self.min_singular,
            "condition": self.condition,
        })
    }
}

/// First row of `D^k exp(i rho A0 x) M_rho`, evaluated cheaply for many `x`.
pub struct KernelRow<'a> {
    cs: &'a CompanionSystem,
    row: nalgebra::RowDVector<C64>,
    right: CMatrix,
}

impl KernelRow<'_> {
    /// Entry `j` is the `j`-th Poisson kernel `pr_1 D^k Poi_j` at `x`.
    pub fn eval(&self, x: f64) -> Vec<C64> {
        let r = &self.row * self.cs.stable_exp(x) * &self.right;
        r.iter().cloned().collect()
    }
}

/// Oracle solution through the explicit root basis:
/// `u = sum_l c_l exp(i tau_l x)` with `L c = g`.
#[derive(Debug, Clone)]
pub struct RootBasis {
    pub roots: Vec<C64>,
    pub l_inv: CMatrix,
}

impl RootBasis {
    pub fn new(problem: &ModelProblem, fp: &FrequencyPoint) -> Result<Self> {
        let roots = stable_roots(problem, fp)?;
        let l = root_boundary_map(problem, &fp.xi_prime, &roots);
        let l_inv = l.try_inverse().ok_or_else(|| Error::LopatinskiiShapiro {
            xi_prime: fp.xi_prime.clone(),
            lambda: fp.lambda,
            condition: f64::INFINITY,
        })?;
        Ok(Self { roots, l_inv })
    }

    /// `D^k u(x)` for boundary data `g`.
    pub fn eval(&self, g: &[C64], x: f64, k: usize) -> C64 {
        let gv = DMatrix::from_column_slice(g.len(), 1, g);
        let c = &self.l_inv * gv;
        self.roots
            .iter()
            .enumerate()
            .map(|(l, &tau)| c[l] * tau.powi(k as i32) * (C64::i() * tau * x).exp())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SectorSample;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_abs(a: &CMatrix) -> f64 {
        a.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn frequency_point_examples() {
        assert!(matches!(FrequencyPoint::new(&[0.0], c(0.0, 0.0), 1), Err(Error::DegenerateFrequency)));
        let fp = FrequencyPoint::new(&[0.0], c(1.0, 0.0), 1).unwrap();
        assert!((fp.rho - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(fp.b, vec![0.0]);
        assert!((fp.sigma - 0.5).norm() < 1e-15);
        let fp = FrequencyPoint::new(&[3.0], c(16.0, 0.0), 1).unwrap();
        assert!((fp.rho - 26f64.sqrt()).abs() < 1e-14);
        assert!((fp.sigma - 16.0 / 26.0).norm() < 1e-15);
    }

    #[test]
    fn stable_root_examples() {
        let lap = ModelProblem::dirichlet_laplacian(2);
        let r = stable_roots(&lap, &FrequencyPoint::new(&[0.0], c(1.0, 0.0), 1).unwrap()).unwrap();
        assert!((r[0] - c(0.0, 1.0)).norm() < 1e-14);
        let r = stable_roots(&lap, &FrequencyPoint::new(&[1.0], c(3.0, 0.0), 1).unwrap()).unwrap();
        assert!((r[0] - c(0.0, 2.0)).norm() < 1e-14);
        let bi = ModelProblem::clamped_bilaplacian(2);
        let r = stable_roots(&bi, &FrequencyPoint::new(&[0.0], c(1.0, 0.0), 2).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(r.iter().any(|z| (z - c(s, s)).norm() < 1e-13));
        assert!(r.iter().any(|z| (z - c(-s, s)).norm() < 1e-13));
    }

    #[test]
    fn dirichlet_and_neumann_kernels() {
        for (lam, xi) in [(c(4.0, 0.0), 0.0), (c(2.0, 3.0), 1.5), (c(-5.0, 1.0), 4.0)] {
            let kappa = (lam + xi * xi).sqrt();
            for (p, scale) in [
                (ModelProblem::dirichlet_laplacian(2), c(1.0, 0.0)),
                (ModelProblem::neumann_laplacian(2), -1.0 / kappa),
            ] {
                let fp = FrequencyPoint::new(&[xi], lam, 1).unwrap();
                let cs = build_companion(&p, &fp).unwrap();
                for x in [0.0, 0.1, 0.7, 2.0] {
                    let got = cs.propagate(x, 0).unwrap()[(0, 0)];
                    let want = scale * (-kappa * x).exp();
                    assert!((got - want).norm() < 1e-12 * want.norm(), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn derivative_convention() {
        let p = ModelProblem::dirichlet_laplacian(2);
        let cs = build_companion(&p, &FrequencyPoint::new(&[0.0], c(4.0, 0.0), 1).unwrap()).unwrap();
        for x in [0.0, 0.3, 1.0] {
            let d = cs.propagate(x, 1).unwrap()[(0, 0)];
            // D = -i d/dx applied to exp(-2x)
            assert!((d - c(0.0, 2.0) * (-2.0 * x).exp()).norm() < 1e-12);
        }
    }

    #[test]
    fn propagate_at_zero_is_m_rho() {
        let p = ModelProblem::clamped_bilaplacian(2);
        let fp = FrequencyPoint::new(&[0.7], c(3.0, 2.0), 2).unwrap();
        let cs = build_companion(&p, &fp).unwrap();
        let mut m_rho = cs.m_mat.clone();
        for (j, mj) in [0usize, 1].iter().enumerate() {
            m_rho.column_mut(j).scale_mut(fp.rho.powi(-(*mj as i32)));
        }
        assert!(max_abs(&(cs.propagate(0.0, 0).unwrap() - m_rho)) < 1e-13);
        assert!(cs.propagate(-1.0, 0).is_err());
    }

    #[test]
    fn delta_identity_for_bilaplacian_with_second_derivative() {
        let bi = ModelProblem::clamped_bilaplacian(2);
        let b2 = crate::model::BoundaryOperator { order: 2, coeffs: [(vec![0, 2], c(1.0, 0.0))].into() };
        let p = ModelProblem::new(2, 2, bi.interior().clone(), vec![bi.boundary()[0].clone(), b2], 3.1, 3.0).unwrap();
        let fp = FrequencyPoint::new(&[1.3], c(-2.0, 5.0), 2).unwrap();
        let cs = build_companion(&p, &fp).unwrap();
        let g = [c(0.3, -1.2), c(2.0, 0.5)];
        let u = |k: usize| -> C64 {
            let prop = cs.propagate(0.0, k).unwrap();
            prop[(0, 0)] * g[0] + prop[(0, 1)] * g[1]
        };
        assert!((u(0) - g[0]).norm() < 1e-12);
        assert!((u(2) - g[1]).norm() < 1e-12 * g[1].norm());
    }

    #[test]
    fn tangential_only_boundary_is_singular_at_origin() {
        let lap = ModelProblem::dirichlet_laplacian(2);
        let b = crate::model::BoundaryOperator { order: 1, coeffs: [(vec![1, 0], c(1.0, 0.0))].into() };
        let p = ModelProblem::new(2, 1, lap.interior().clone(), vec![b], 3.0, 2.0).unwrap();
        let fp = FrequencyPoint::new(&[0.0], c(1.0, 0.0), 1).unwrap();
        assert!(matches!(build_companion(&p, &fp), Err(Error::LopatinskiiShapiro { .. })));
    }

    fn sector_points() -> Vec<(Vec<f64>, C64)> {
        let s = SectorSample::log_spaced(2.8, 5, 1e-2, 1e4, 7).unwrap();
        let mut out = vec![];
        for lam in s.points() {
            for xi in [0.0, 0.3, 2.0, 40.0] {
                out.push((vec![xi], lam));
            }
        }
        out
    }

    #[test]
    fn projection_invariants() {
        for p in [ModelProblem::dirichlet_laplacian(2), ModelProblem::neumann_laplacian(2), ModelProblem::clamped_bilaplacian(2)] {
            for (xi, lam) in sector_points() {
                let fp = FrequencyPoint::new(&xi, lam, p.m()).unwrap();
                let cs = build_companion(&p, &fp).unwrap();
                let pm = &cs.p_minus;
                let norm = max_abs(pm);
                assert!(max_abs(&(pm * pm - pm)) <= 1e-10 * norm, "idempotency at {xi:?}, {lam}");
                assert!(max_abs(&(pm * &cs.m_mat - &cs.m_mat)) <= 1e-10 * max_abs(&cs.m_mat));
                let rank = pm.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-8 * norm).count();
                assert_eq!(rank, p.m());
                let x = 0.37 / fp.rho;
                let e = (cs.a0.clone() * C64::new(0.0, fp.rho * x)).exp();
                let lhs = pm * &e * pm;
                let rhs = &e * pm;
                assert!(max_abs(&(lhs - &rhs)) <= 1e-8 * (1.0 + max_abs(&rhs)));
            }
        }
    }

    #[test]
    fn root_basis_agrees_with_schur_route() {
        for p in [ModelProblem::dirichlet_laplacian(2), ModelProblem::neumann_laplacian(2), ModelProblem::clamped_bilaplacian(2)] {
            for (xi, lam) in sector_points() {
                let fp = FrequencyPoint::new(&xi, lam, p.m()).unwrap();
                let cs = build_companion(&p, &fp).unwrap();
                let rb = RootBasis::new(&p, &fp).unwrap();
                let roots_gap = if p.m() == 2 { (rb.roots[0] - rb.roots[1]).norm() / fp.rho } else { 1.0 };
                if roots_gap < 1e-3 {
                    continue;
                }
                for j in 0..p.m() {
                    let mut g = vec![c(0.0, 0.0); p.m()];
                    g[j] = c(1.0, 0.0);
                    for x in [0.0, 0.5 / fp.rho, 3.0 / fp.rho] {
                        for k in 0..3 {
                            let a = cs.propagate(x, k).unwrap()[(0, j)];
                            let b = rb.eval(&g, x, k);
                            let scale = fp.rho.powi(k as i32 - p.boundary_orders()[j] as i32);
                            assert!((a - b).norm() <= 1e-8 * scale, "{xi:?} {lam} x={x} k={k}: {a} vs {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn exponential_decay_rate_is_uniform() {
        let p = ModelProblem::clamped_bilaplacian(2);
        let mut worst = f64::INFINITY;
        for (xi, lam) in sector_points() {
            let fp = FrequencyPoint::new(&xi, lam, 2).unwrap();
            let cs = build_companion(&p, &fp).unwrap();
            let n0 = cs.propagate(0.0, 0).unwrap().norm();
            let x = 200.0 / fp.rho;
            let n1 = cs.propagate(x, 0).unwrap().norm();
            worst = worst.min(-(n1 / n0).ln() / (fp.rho * x));
        }
        assert!(worst > 0.0);
    }

    proptest! {
        #[test]
        fn companion_is_homogeneous(xi in -10.0f64..10.0, r in 0.05f64..50.0, arg in -2.9f64..2.9, t in 0.2f64..5.0) {
            let p = ModelProblem::clamped_bilaplacian(2);
            let lam = C64::from_polar(r, arg);
            let fp1 = FrequencyPoint::new(&[xi], lam, 2).unwrap();
            let fp2 = FrequencyPoint::new(&[t * xi], lam * t.powi(4), 2).unwrap();
            // (b, sigma) differ only through the "1 +" in rho; compare at equal (b, sigma)
            let cs1 = build_companion(&p, &fp1).unwrap();
            let mut fp3 = fp2.clone();
            fp3.b = fp1.b.clone();
            fp3.sigma = fp1.sigma;
            fp3.rho = fp1.rho * t;
            let cs3 = build_companion(&p, &fp3).unwrap();
            prop_assert!(max_abs(&(&cs1.a0 - &cs3.a0)) < 1e-12);
            prop_assert!(max_abs(&(&cs1.p_minus - &cs3.p_minus)) < 1e-9 * max_abs(&cs1.p_minus));
            prop_assert!(max_abs(&(&cs1.m_mat - &cs3.m_mat)) < 1e-9 * max_abs(&cs1.m_mat));
            let _ = build_companion(&p, &fp2).unwrap();
        }
    }
}
