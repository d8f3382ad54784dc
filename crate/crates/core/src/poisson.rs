//! Poisson operators `Poi_j(lambda)` on grids, boundary and interior
//! consistency checks, and the decay and boundary-singularity sweeps.
//!
//! Per tangential frequency the solution is the first component of
//! `exp(i rho A0 x_n) M_rho g`; tangential directions are handled on a torus
//! so band-limited data carry no periodization error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::companion::{build_companion, CompanionSystem, FrequencyPoint};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Layout, NormalGrid, TorusGrid};
use crate::linalg::{loglog_slope_middle, ols_slope, CMatrix};
use crate::model::{logspace, ModelProblem, SectorSample};
use crate::spaces::{mode_weight, tangential_norm, DyadicPartition, SpaceSpec};
use crate::C64;

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Exponent bookkeeping for the mapping
/// `Poi_j(lambda): A^s_p -> W^k_p(R_+, x^r; A^t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentQuery {
    pub j: usize,
    pub k: usize,
    pub p: f64,
    pub r: f64,
    pub t: f64,
    pub s: f64,
    m: usize,
    m_j: usize,
}

impl ExponentQuery {
    /// Rejects queries with `r - p [t + k - m_j - s]_+ <= -1`.
    pub fn new(problem: &ModelProblem, j: usize, k: usize, p: f64, r: f64, t: f64, s: f64) -> Result<Self> {
        if j >= problem.m() {
            return Err(Error::InvalidArgument(format!("boundary index {j} out of range")));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("p = {p} must lie in [1, inf)")));
        }
        let m_j = problem.boundary_orders()[j];
        let value = r - p * pos(t + k as f64 - m_j as f64 - s);
        if !(value > -1.0) {
            return Err(Error::Inadmissible { value });
        }
        Ok(Self { j, k, p, r, t, s, m: problem.m(), m_j })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m_j(&self) -> usize {
        self.m_j
    }

    /// `theta = (-1 - r + p (k - m_j) + p [t - s]_+) / (2 m p)`.
    pub fn theta(&self) -> f64 {
        let p = self.p;
        (-1.0 - self.r + p * (self.k as f64 - self.m_j as f64) + p * pos(self.t - self.s)) / (2.0 * self.m as f64 * p)
    }

    /// `gamma_1 = r - p [t - s]_+`.
    pub fn gamma1(&self) -> f64 {
        self.r - self.p * pos(self.t - self.s)
    }

    /// `gamma_2 = p zeta - p [-[t - s]_+ - m_j + k + zeta]_+`.
    pub fn gamma2(&self, zeta: f64) -> f64 {
        let p = self.p;
        p * zeta - p * pos(-pos(self.t - self.s) - self.m_j as f64 + self.k as f64 + zeta)
    }
}

pub fn predicted_decay_exponent(q: &ExponentQuery) -> f64 {
    q.theta()
}

/// `-[t - s]_+`.
pub fn predicted_singularity_exponent(t: f64, s: f64) -> f64 {
    -pos(t - s)
}

fn mode_system(problem: &ModelProblem, xi: &[f64], lambda: C64) -> Result<CompanionSystem> {
    let fp = FrequencyPoint::new(xi, lambda, problem.m())?;
    build_companion(problem, &fp)
}

/// `D_n^k pr_1 Poi_j(lambda) g` at the normal positions `xs` for every
/// tangential mode (frequency layout). Modes with zero data are skipped.
pub fn poisson_at(
    problem: &ModelProblem,
    lambda: C64,
    j: usize,
    torus: &TorusGrid,
    g_hat: &[C64],
    xs: &[f64],
    k: usize,
) -> Result<GridFunction> {
    if g_hat.len() != torus.len() {
        return Err(Error::InvalidArgument("boundary data do not match the torus grid".into()));
    }
    if torus.dim() + 1 != problem.n() {
        return Err(Error::InvalidArgument("torus dimension must be n - 1".into()));
    }
    if j >= problem.m() {
        return Err(Error::InvalidArgument(format!("boundary index {j} out of range")));
    }
    let nx = xs.len();
    let mut out = GridFunction::zeros(torus.len(), nx, Layout::Frequency);
    out.values.par_chunks_mut(nx.max(1)).enumerate().try_for_each(|(t, chunk)| -> Result<()> {
        let g = g_hat[t];
        if g == C64::new(0.0, 0.0) {
            return Ok(());
        }
        let cs = mode_system(problem, &torus.frequency(t), lambda)?;
        let row = cs.kernel_row(k);
        for (v, &x) in chunk.iter_mut().zip(xs) {
            *v = g * row.eval(x)[j];
        }
        Ok(())
    })?;
    Ok(out)
}

/// `D_n^k pr_1 Poi_j(lambda) g` on the normal grid, frequency layout.
pub fn poisson_apply(
    problem: &ModelProblem,
    lambda: C64,
    j: usize,
    g_hat: &GridFunction,
    torus: &TorusGrid,
    normal: &NormalGrid,
    k: usize,
) -> Result<GridFunction> {
    if g_hat.layout != Layout::Frequency || g_hat.n_normal != 1 {
        return Err(Error::InvalidArgument("boundary data must be a frequency-side boundary function".into()));
    }
    poisson_at(problem, lambda, j, torus, &g_hat.values, &normal.nodes(), k)
}

/// `[B_k pr_1 Poi_j](x_n = 0)` at one frequency point; the identity when the
/// construction is consistent.
pub fn boundary_trace_matrix(problem: &ModelProblem, cs: &CompanionSystem, xi_prime: &[f64]) -> CMatrix {
    let m = problem.m();
    let top = problem.boundary_orders().into_iter().max().unwrap_or(0);
    let rows: Vec<Vec<C64>> = (0..=top).map(|l| cs.kernel_row(l).eval(0.0)).collect();
    CMatrix::from_fn(m, m, |kk, j| {
        problem.boundary_polynomial(kk, xi_prime).iter().enumerate().map(|(l, b)| b * rows[l][j]).sum()
    })
}

/// `max_{k,j} |[B_k Poi_j](0) - delta_kj| rho^{m_j - m_k}`: the trace error
/// measured in the natural scale of each entry.
pub fn boundary_reproduction_error(problem: &ModelProblem, xi_prime: &[f64], lambda: C64) -> Result<f64> {
    let cs = mode_system(problem, xi_prime, lambda)?;
    let t = boundary_trace_matrix(problem, &cs, xi_prime);
    let orders = problem.boundary_orders();
    let mut worst = 0.0f64;
    for kk in 0..problem.m() {
        for j in 0..problem.m() {
            let delta = if kk == j { 1.0 } else { 0.0 };
            let scale = cs.rho().powi(orders[j] as i32 - orders[kk] as i32);
            worst = worst.max((t[(kk, j)] - delta).norm() * scale);
        }
    }
    Ok(worst)
}

/// Relative residual of `(lambda - A(xi', D)) pr_1 Poi_j` at `x`, maximised
/// over `j`; derivatives come from exact `D^l` propagation.
pub fn interior_residual(problem: &ModelProblem, xi_prime: &[f64], lambda: C64, x: f64) -> Result<f64> {
    let cs = mode_system(problem, xi_prime, lambda)?;
    let poly = problem.normal_polynomial(xi_prime, lambda);
    let rows: Vec<Vec<C64>> = (0..poly.len()).map(|l| cs.kernel_row(l).eval(x)).collect();
    let mut worst = 0.0f64;
    for j in 0..problem.m() {
        let res: C64 = poly.iter().enumerate().map(|(l, c)| c * rows[l][j]).sum();
        let scale: f64 = poly.iter().enumerate().map(|(l, c)| c.norm() * rows[l][j].norm()).sum();
        if scale > 0.0 {
            worst = worst.max(res.norm() / scale);
        }
    }
    Ok(worst)
}

/// Where the boundary data of a decay sweep come from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    /// Supremum over single tangential modes `|xi'|` in
    /// `{0} u [1e-3, 1e3] |lambda|^{1/2m}`: the operator norm restricted to
    /// one-mode data, which is what the decay exponent describes.
    WorstMode { probes: usize },
    /// Fixed data on a torus grid.
    Fixed { torus: TorusGrid, g_hat: Vec<C64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub ray_arg: f64,
    pub lambda_mod: f64,
    pub norm: f64,
    /// Non-finite or zero norm; excluded from the fit.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub theta: f64,
    pub points: Vec<SweepPoint>,
    /// `(ray_arg, fitted slope)` per ray.
    pub ray_slopes: Vec<(f64, f64)>,
    pub max_deviation: f64,
    /// Smallest observed `decay rate / |lambda|^{1/2m}` over the sample.
    pub fitted_c: f64,
}

impl SweepResult {
    /// Rows `(ray_arg, lambda_mod, norm, predicted, fitted_slope)`.
    pub fn rows(&self) -> Vec<[f64; 5]> {
        self.points
            .iter()
            .map(|pt| {
                let slope = self.ray_slopes.iter().find(|(a, _)| *a == pt.ray_arg).map(|s| s.1).unwrap_or(f64::NAN);
                [pt.ray_arg, pt.lambda_mod, pt.norm, self.theta, slope]
            })
            .collect()
    }
}

/// `(sum_{l <= k} int |D^l u|^p x^r dx)^{1/p}` for the single-mode kernel
/// `u = pr_1 Poi_j`, on a grid adapted to the decay length.
fn kernel_profile_norm(cs: &CompanionSystem, j: usize, k: usize, p: f64, r: f64) -> Result<f64> {
    let rate = cs.decay_rate();
    let grid = NormalGrid::covering(1e-6, 40.0 / rate, 1.1, false)?.scaled(1.0 / cs.rho());
    let xs = grid.nodes();
    let mut total = 0.0;
    for l in 0..=k {
        let row = cs.kernel_row(l);
        let v: Vec<f64> = xs.iter().map(|&x| row.eval(x)[j].norm().powf(p)).collect();
        total += grid.integrate_weighted(&v, r);
    }
    Ok(total.powf(1.0 / p))
}

fn check_pair(q: &ExponentQuery, target: &SpaceSpec, source: &SpaceSpec) -> Result<()> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
    if !same(target.s, q.t) || !same(source.s, q.s) || !same(target.p, q.p) || !same(source.p, q.p) {
        return Err(Error::InvalidArgument("space pair does not match the exponent query".into()));
    }
    Ok(())
}

fn operator_norm_at(
    problem: &ModelProblem,
    q: &ExponentQuery,
    lambda: C64,
    source: &SweepSource,
    target: &SpaceSpec,
    source_space: &SpaceSpec,
) -> Result<f64> {
    match source {
        SweepSource::WorstMode { probes } => {
            let d = problem.n() - 1;
            let scale = lambda.norm().powf(1.0 / (2 * q.m) as f64);
            let mut mags = vec![0.0];
            if d > 0 {
                mags.extend(logspace(1e-3 * scale, 1e3 * scale, *probes));
            }
            let norms: Vec<f64> = mags
                .par_iter()
                .map(|&a| -> Result<f64> {
                    let mut xi = vec![0.0; d];
                    if d > 0 {
                        xi[0] = a;
                    }
                    let cs = mode_system(problem, &xi, lambda)?;
                    let ratio = mode_weight(target, &xi, 1.0) / mode_weight(source_space, &xi, 1.0);
                    Ok(kernel_profile_norm(&cs, q.j, q.k, q.p, q.r)? * ratio)
                })
                .collect::<Result<_>>()?;
            Ok(norms.into_iter().fold(0.0, f64::max))
        }
        SweepSource::Fixed { torus, g_hat } => {
            let part = DyadicPartition::for_grid(torus);
            let active: Vec<usize> = (0..torus.len()).filter(|&t| g_hat[t] != C64::new(0.0, 0.0)).collect();
            if active.is_empty() {
                return Err(Error::InvalidArgument("boundary data vanish identically".into()));
            }
            let (mut rho_min, mut rho_max, mut rate) = (f64::INFINITY, 0.0f64, f64::INFINITY);
            for &t in &active {
                let cs = mode_system(problem, &torus.frequency(t), lambda)?;
                rho_min = rho_min.min(cs.rho());
                rho_max = rho_max.max(cs.rho());
                rate = rate.min(cs.decay_rate());
            }
            let normal = NormalGrid::covering(1e-6 / rho_max, 40.0 / (rate * rho_min), 1.1, false)?;
            let xs = normal.nodes();
            let mut total = 0.0;
            for l in 0..=q.k {
                let u = poisson_at(problem, lambda, q.j, torus, g_hat, &xs, l)?;
                let prof: Vec<f64> = (0..xs.len())
                    .into_par_iter()
                    .map(|z| tangential_norm(&u.slice(z), torus, target, &part).map(|v| v.powf(q.p)))
                    .collect::<Result<_>>()?;
                total += normal.integrate_weighted(&prof, q.r);
            }
            Ok(total.powf(1.0 / q.p) / tangential_norm(g_hat, torus, source_space, &part)?)
        }
    }
}

/// Norm of `Poi_j(lambda)` in the weighted mixed norm over the sample, slope
/// fits of `log norm` against `log |lambda|` per ray (middle 80% of the range)
/// and the deviation from the predicted exponent.
pub fn decay_sweep(
    problem: &ModelProblem,
    q: &ExponentQuery,
    sample: &SectorSample,
    source: &SweepSource,
    target: &SpaceSpec,
    source_space: &SpaceSpec,
) -> Result<SweepResult> {
    check_pair(q, target, source_space)?;
    let theta = q.theta();
    let mut points = Vec::new();
    let mut ray_slopes = Vec::new();
    let mut fitted_c = f64::INFINITY;
    for &arg in &sample.rays {
        let mut mods = Vec::new();
        let mut norms = Vec::new();
        for &modulus in &sample.moduli {
            let lambda = C64::from_polar(modulus, arg);
            let norm = operator_norm_at(problem, q, lambda, source, target, source_space)?;
            let d = problem.n() - 1;
            let cs = mode_system(problem, &vec![0.0; d], lambda)?;
            fitted_c = fitted_c.min(cs.decay_rate() * cs.rho() / modulus.powf(1.0 / (2 * q.m) as f64));
            let flagged = !(norm.is_finite() && norm > 0.0);
            points.push(SweepPoint { ray_arg: arg, lambda_mod: modulus, norm, flagged });
            if !flagged {
                mods.push(modulus);
                norms.push(norm);
            }
        }
        let slope = if mods.len() >= 2 { loglog_slope_middle(&mods, &norms, 0.8) } else { f64::NAN };
        ray_slopes.push((arg, slope));
    }
    let max_deviation = ray_slopes.iter().map(|(_, s)| (s - theta).abs()).fold(0.0, f64::max);
    Ok(SweepResult { theta, points, ray_slopes, max_deviation, fitted_c })
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularityResult {
    pub x: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub predicted: f64,
}

/// `x_n -> ||D_n^k Poi_j(lambda) g (., x_n)||` in `target` at the given
/// positions. `s` is the smoothness of the data, so the predicted slope is
/// `-[t + k - m_j - s]_+` with `t = target.s`.
#[allow(clippy::too_many_arguments)]
pub fn singularity_sweep(
    problem: &ModelProblem,
    j: usize,
    lambda: C64,
    torus: &TorusGrid,
    g_hat: &[C64],
    target: &SpaceSpec,
    s: f64,
    k: usize,
    xs: &[f64],
) -> Result<SingularityResult> {
    if xs.len() < 2 || xs.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive normal positions".into()));
    }
    let part = DyadicPartition::for_grid(torus);
    let u = poisson_at(problem, lambda, j, torus, g_hat, xs, k)?;
    let norms: Vec<f64> = (0..xs.len())
        .into_par_iter()
        .map(|z| tangential_norm(&u.slice(z), torus, target, &part))
        .collect::<Result<_>>()?;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let m_j = problem.boundary_orders()[j] as f64;
    Ok(SingularityResult {
        x: xs.to_vec(),
        slope: ols_slope(&lx, &ly),
        predicted: predicted_singularity_exponent(target.s + k as f64 - m_j, s),
        norms,
    })
}

/// Output of [`volevich_apply`].
#[derive(Debug, Clone)]
pub struct VolevichOutput {
    pub u: GridFunction,
    /// Set when the kernel has not decayed below `1e-12` at the end of the
    /// quadrature grid for some mode.
    pub tail_warning: bool,
}

/// `lambda^theta Poi_j(lambda) tr B_j(D) u` through
/// `-int_0^inf d/dy [Poi_j(x + y) (B_j u)(y)] dy`, with the `y`-derivative
/// split over both factors. `derivs[l]` holds `D_n^l u` on `normal`
/// (frequency layout) for `l = 0..=m_j + 1`.
pub fn volevich_apply(
    problem: &ModelProblem,
    lambda: C64,
    j: usize,
    torus: &TorusGrid,
    normal: &NormalGrid,
    derivs: &[GridFunction],
    theta: u32,
) -> Result<VolevichOutput> {
    if theta > 1 {
        return Err(Error::InvalidArgument("theta must be 0 or 1".into()));
    }
    let m_j = problem.boundary_orders().get(j).copied().ok_or_else(|| {
        Error::InvalidArgument(format!("boundary index {j} out of range"))
    })?;
    if derivs.len() < m_j + 2 {
        return Err(Error::InvalidArgument(format!("need D_n^l u for l <= {}", m_j + 1)));
    }
    for d in derivs {
        if d.layout != Layout::Frequency || d.n_tangential != torus.len() || d.n_normal != normal.len() {
            return Err(Error::InvalidArgument("derivative data do not match the grids".into()));
        }
    }
    let ys = normal.nodes();
    let w = normal.log_weights();
    let off = normal.first_positive();
    let factor = lambda.powu(theta);
    let ny = ys.len();
    let mut out = GridFunction::zeros(torus.len(), ny, Layout::Frequency);
    let warn = std::sync::atomic::AtomicBool::new(false);
    out.values.par_chunks_mut(ny).enumerate().try_for_each(|(t, chunk)| -> Result<()> {
        if derivs.iter().all(|d| d.profile(t).iter().all(|v| *v == C64::new(0.0, 0.0))) {
            return Ok(());
        }
        let xi = torus.frequency(t);
        let cs = mode_system(problem, &xi, lambda)?;
        if (-cs.decay_rate() * cs.rho() * normal.x_max()).exp() > 1e-12 {
            warn.store(true, std::sync::atomic::Ordering::Relaxed);
        }
        let b = problem.boundary_polynomial(j, &xi);
        let bu: Vec<C64> =
            (0..ny).map(|i| b.iter().enumerate().map(|(l, c)| c * derivs[l].get(t, i)).sum()).collect();
        // d/dy = i D
        let dbu: Vec<C64> = (0..ny)
            .map(|i| C64::i() * b.iter().enumerate().map(|(l, c)| c * derivs[l + 1].get(t, i)).sum::<C64>())
            .collect();
        let k0 = cs.kernel_row(0);
        let k1 = cs.kernel_row(1);
        let integrand = |x: f64, i: usize| {
            let kv = k0.eval(x)[j];
            let dk = C64::i() * k1.eval(x)[j];
            dk * bu[i] + kv * dbu[i]
        };
        for (a, v) in chunk.iter_mut().enumerate() {
            let x = ys[a];
            let mut acc = integrand(x + ys[off], off) * normal.x_min;
            for i in off..ny {
                acc += integrand(x + ys[i], i) * w[i];
            }
            *v = -factor * acc;
        }
        Ok(())
    })?;
    Ok(VolevichOutput { u: out, tail_warning: warn.into_inner() })
}
