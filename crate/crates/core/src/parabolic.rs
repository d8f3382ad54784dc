//! Time-dependent problems.
//!
//! [`parabolic_boundary_solve`] treats `d_t u + sigma u - A(D) u = 0`,
//! `B_j u = g_j` on the whole time line by a temporal Fourier transform: each
//! temporal frequency `tau` is a Poisson problem at `lambda = sigma + i tau`.
//! [`ibvp_solve`] handles the initial-boundary problem on `(0, T]` by splitting
//! into that solution (for extended, damped data) plus a semigroup part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Layout, NormalGrid, TorusGrid};
use crate::linalg::ols_slope;
use crate::model::ModelProblem;
use crate::poisson::poisson_at;
use crate::resolvent::{semigroup_apply, ContourParams, ExtensionOperator};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Periodic time grid `t_i = i T_per / N_t` with the damping shift `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub samples: usize,
    pub period: f64,
    pub sigma: f64,
}

impl TimeGrid {
    pub fn new(samples: usize, period: f64, sigma: f64) -> Result<Self> {
        if !samples.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("N_t = {samples} is not a power of two")));
        }
        if !(sigma > 0.0) || !(period > 0.0) {
            return Err(Error::InvalidArgument("period and sigma must be positive".into()));
        }
        Ok(Self { samples, period, sigma })
    }

    pub fn step(&self) -> f64 {
        self.period / self.samples as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|i| i as f64 * self.step()).collect()
    }

    fn torus(&self) -> TorusGrid {
        TorusGrid::line(self.samples, self.period).expect("validated time grid")
    }

    /// Temporal frequencies `tau_k` in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.torus();
        (0..self.samples).map(|k| t.frequency(k)[0]).collect()
    }
}

/// Boundary data: `g[j][i][mode]` is the tangential coefficient of `g_j` at
/// time node `i`.
pub type BoundarySeries = Vec<Vec<Vec<C64>>>;

/// `D_n^k u` at every time node for the time-periodic boundary problem.
pub fn parabolic_boundary_solve(
    problem: &ModelProblem,
    g: &BoundarySeries,
    time: &TimeGrid,
    torus: &TorusGrid,
    normal: &NormalGrid,
    k: usize,
) -> Result<Vec<GridFunction>> {
    if problem.phi() <= std::f64::consts::FRAC_PI_2 {
        return Err(Error::InvalidArgument("the sector angle must exceed pi/2 for the time-line problem".into()));
    }
    if g.len() != problem.m() || g.iter().any(|gj| gj.len() != time.samples || gj.iter().any(|s| s.len() != torus.len())) {
        return Err(Error::InvalidArgument("boundary series must be m x N_t x (tangential modes)".into()));
    }
    let nt = time.samples;
    let tt = time.torus();
    // temporal coefficients per j and tangential mode
    let coeffs: Vec<Vec<Vec<C64>>> = g
        .iter()
        .map(|gj| {
            let mut by_time: Vec<Vec<C64>> = (0..torus.len()).map(|t| (0..nt).map(|i| gj[i][t]).collect()).collect();
            by_time.iter_mut().for_each(|s| tt.forward_fft(s));
            (0..nt).map(|kt| by_time.iter().map(|s| s[kt]).collect()).collect()
        })
        .collect();
    let xs = normal.nodes();
    let taus = time.frequencies();
    let spectral: Vec<GridFunction> = taus
        .par_iter()
        .enumerate()
        .map(|(kt, &tau)| {
            let lambda = C64::new(time.sigma, tau);
            let mut acc = GridFunction::zeros(torus.len(), xs.len(), Layout::Frequency);
            for (j, cj) in coeffs.iter().enumerate() {
                let part = poisson_at(problem, lambda, j, torus, &cj[kt], &xs, k)?;
                acc.values.iter_mut().zip(&part.values).for_each(|(a, b)| *a += b);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let nv = spectral[0].values.len();
    let mut out: Vec<GridFunction> = vec![GridFunction::zeros(torus.len(), xs.len(), Layout::Frequency); nt];
    let mut buf = vec![ZERO; nt];
    for e in 0..nv {
        for kt in 0..nt {
            buf[kt] = spectral[kt].values[e];
        }
        tt.inverse_fft(&mut buf);
        for i in 0..nt {
            out[i].values[e] = buf[i];
        }
    }
    Ok(out)
}

/// Decay of the temporal spectrum of a time series: least-squares slope of
/// `log |c(tau)|` against `log <tau>` over `|tau| in [tau_lo, tau_hi]`.
pub fn temporal_decay_slope(series: &[C64], time: &TimeGrid, tau_lo: f64, tau_hi: f64) -> Result<f64> {
    if series.len() != time.samples {
        return Err(Error::InvalidArgument("series length differs from N_t".into()));
    }
    let mut c = series.to_vec();
    time.torus().forward_fft(&mut c);
    let (xs, ys): (Vec<f64>, Vec<f64>) = time
        .frequencies()
        .iter()
        .zip(&c)
        .filter(|(tau, v)| tau.abs() >= tau_lo && tau.abs() <= tau_hi && v.norm() > 0.0)
        .map(|(tau, v)| ((1.0 + tau * tau).sqrt().ln(), v.norm().ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InvalidArgument("too few temporal frequencies in the fit window".into()));
    }
    Ok(ols_slope(&xs, &ys))
}

/// Predicted decay of `|F_t D_n^k u(tau, x_n = 0)|` for boundary data with
/// `|F_t g_j(tau)| ~ <tau>^{-l - 1/2}`.
pub fn predicted_temporal_slope(problem: &ModelProblem, j: usize, k: usize, l: f64) -> f64 {
    let m_j = problem.boundary_orders()[j] as f64;
    -l - 0.5 + (k as f64 - m_j) / (2.0 * problem.m() as f64)
}

/// Time-dependent boundary data `g_j(t)` as tangential coefficients.
pub type BoundaryFn<'a> = dyn Fn(usize, f64) -> Vec<C64> + Sync + 'a;
/// Interior forcing `f(t)` in frequency layout.
pub type ForcingFn<'a> = dyn Fn(f64) -> GridFunction + Sync + 'a;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IbvpSettings {
    pub end_time: f64,
    /// Time grid of the periodic auxiliary problem; its period must be at
    /// least `3 T`. The default `4 T` puts `T` on a node when `N_t >= 4`.
    pub time: TimeGrid,
    pub contour: ContourParams,
    /// Gauss nodes per unit time in the Duhamel integral.
    pub duhamel_density: usize,
}

impl IbvpSettings {
    pub fn new(end_time: f64, samples: usize, sigma: f64) -> Result<Self> {
        Ok(Self {
            end_time,
            time: TimeGrid::new(samples, 4.0 * end_time, sigma)?,
            contour: ContourParams::default(),
            duhamel_density: 16,
        })
    }
}

#[derive(Debug, Clone)]
pub struct IbvpOutput {
    pub times: Vec<f64>,
    pub u: Vec<GridFunction>,
    /// `max_j |B_j u0 - g_j(0)|` over tangential modes.
    pub compatibility_defect: f64,
    /// The periodic part at `t = 0`; choosing `u0` equal to it removes the
    /// semigroup correction.
    pub v1_initial: GridFunction,
}

/// C^2 taper from 1 at `s = 0` to 0 at `s = 1`.
fn taper(s: f64) -> f64 {
    let x = s.clamp(0.0, 1.0);
    1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Extension of `h` from `[0, T]` to the time torus `[0, P)`, `P >= 3T`:
/// three-term reflection across `t = T` and `t = 0`, tapered to zero within `T/2`.
fn extend_in_time(h: &dyn Fn(f64) -> Vec<C64>, t: f64, end: f64, period: f64, ext: &ExtensionOperator) -> Vec<C64> {
    let (s, mirror): (f64, Box<dyn Fn(f64) -> f64>) = if t <= end {
        return h(t);
    } else if t - end <= period - t {
        (t - end, Box::new(move |d| end - d))
    } else {
        (period - t, Box::new(|d| d))
    };
    let w = taper(2.0 * s / end);
    let mut out: Option<Vec<C64>> = None;
    if w == 0.0 {
        return h(0.0).iter().map(|_| ZERO).collect();
    }
    for (k, c) in ext.coeffs.iter().enumerate() {
        let v = h(mirror(s / (k + 1) as f64));
        let acc = out.get_or_insert_with(|| vec![ZERO; v.len()]);
        acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b * (c * w));
    }
    out.unwrap_or_default()
}

/// 4-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Solves `d_t v - A(D) v = f`, `B_j v = g_j` on `(0, T]`, `v(0) = u0`.
///
/// With `v1` the periodic solution for the damped, extended data
/// `e^{-sigma t} g`, the result is
/// `v(t) = e^{sigma t} v1(t) + T(t)[u0 - v1(0)] + int_0^t T(t - s) f(s) ds`,
/// reported at the time nodes in `[0, T]`.
#[allow(clippy::too_many_arguments)]
pub fn ibvp_solve(
    problem: &ModelProblem,
    u0: &GridFunction,
    f: Option<&ForcingFn>,
    g: Option<&BoundaryFn>,
    settings: &IbvpSettings,
    torus: &TorusGrid,
    normal: &NormalGrid,
) -> Result<IbvpOutput> {
    let end = settings.end_time;
    let time = settings.time;
    if !(end > 0.0) || time.period < 3.0 * end * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument("the periodic grid must cover three times the horizon".into()));
    }
    if u0.layout != Layout::Frequency || u0.n_tangential != torus.len() || u0.n_normal != normal.len() {
        return Err(Error::InvalidArgument("u0 does not match the grids".into()));
    }
    let m = problem.m();
    let nz = normal.len();
    let times: Vec<f64> = time.times().into_iter().filter(|t| *t <= end * (1.0 + 1e-12)).collect();

    let (v1, compatibility_defect) = match g {
        Some(g) => {
            let ext = ExtensionOperator::new(3)?;
            let sigma = time.sigma;
            let series: BoundarySeries = (0..m)
                .map(|j| {
                    let damped = move |t: f64| g(j, t).into_iter().map(|v| v * (-sigma * t).exp()).collect::<Vec<_>>();
                    time.times().iter().map(|&t| extend_in_time(&damped, t, end, time.period, &ext)).collect()
                })
                .collect();
            let v1 = parabolic_boundary_solve(problem, &series, &time, torus, normal, 0)?;
            let defect = initial_trace_defect(problem, u0, torus, normal, &(0..m).map(|j| g(j, 0.0)).collect::<Vec<_>>())?;
            (Some(v1), defect)
        }
        None => (None, initial_trace_defect(problem, u0, torus, normal, &vec![vec![ZERO; torus.len()]; m])?),
    };
    let v1_initial = v1.as_ref().map(|v| v[0].clone()).unwrap_or_else(|| GridFunction::zeros(torus.len(), nz, Layout::Frequency));
    let w0 = u0.sub(&v1_initial);
    let homogeneous = w0.max_abs() > 0.0;

    let u = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut out = match &v1 {
                Some(v1) => {
                    let mut a = v1[i].clone();
                    a.scale(C64::new((time.sigma * t).exp(), 0.0));
                    a
                }
                None => GridFunction::zeros(torus.len(), nz, Layout::Frequency),
            };
            if t == 0.0 {
                add(&mut out, &w0);
                return Ok(out);
            }
            if homogeneous {
                add(&mut out, &semigroup_apply(problem, torus, normal, &w0, t, &settings.contour)?);
            }
            if let Some(f) = f {
                add(&mut out, &duhamel(problem, f, t, settings, torus, normal)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IbvpOutput { times, u, compatibility_defect, v1_initial })
}

fn add(a: &mut GridFunction, b: &GridFunction) {
    a.values.iter_mut().zip(&b.values).for_each(|(x, y)| *x += y);
}

/// `int_0^t T(t - s) f(s) ds` by composite 4-point Gauss quadrature.
fn duhamel(
    problem: &ModelProblem,
    f: &ForcingFn,
    t: f64,
    settings: &IbvpSettings,
    torus: &TorusGrid,
    normal: &NormalGrid,
) -> Result<GridFunction> {
    let panels = ((settings.duhamel_density as f64 * t / 4.0).ceil() as usize).max(1);
    let h = t / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| GAUSS4.iter().map(move |(x, w)| (h * (p as f64 + 0.5 * (x + 1.0)), 0.5 * h * w)))
        .collect();
    let parts: Vec<GridFunction> = nodes
        .par_iter()
        .map(|&(s, w)| {
            let mut v = semigroup_apply(problem, torus, normal, &f(s), t - s, &settings.contour)?;
            v.scale(C64::new(w, 0.0));
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut out = GridFunction::zeros(torus.len(), normal.len(), Layout::Frequency);
    parts.iter().for_each(|p| add(&mut out, p));
    Ok(out)
}

/// `max |B_j u0 - g_j(0)|` using one-sided differences at `x_n = 0`.
fn initial_trace_defect(
    problem: &ModelProblem,
    u0: &GridFunction,
    torus: &TorusGrid,
    normal: &NormalGrid,
    g0: &[Vec<C64>],
) -> Result<f64> {
    let xs = normal.nodes();
    let k_max = problem.k_max();
    if xs.len() < k_max + 2 {
        return Err(Error::InvalidArgument("normal grid too short for trace evaluation".into()));
    }
    let mut worst = 0.0f64;
    for t in 0..torus.len() {
        let xi = torus.frequency(t);
        let prof = u0.profile(t);
        // D^l u(0) from the polynomial through the first nodes
        let derivs: Vec<C64> = (0..=k_max)
            .map(|l| polynomial_derivative(&xs[..k_max + 2], &prof[..k_max + 2], l) * C64::new(0.0, -1.0).powu(l as u32))
            .collect();
        for (j, g) in g0.iter().enumerate() {
            let b = problem.boundary_polynomial(j, &xi);
            let val: C64 = b.iter().zip(&derivs).map(|(c, d)| c * d).sum();
            worst = worst.max((val - g[t]).norm());
        }
    }
    Ok(worst)
}

/// `l`-th derivative at `x = 0` of the interpolating polynomial.
fn polynomial_derivative(xs: &[f64], ys: &[C64], l: usize) -> C64 {
    // Newton divided differences, then expand around 0
    let n = xs.len();
    let mut dd = ys.to_vec();
    for lvl in 1..n {
        for i in (lvl..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (xs[i] - xs[i - lvl]);
        }
    }
    let mut poly = vec![ZERO; n];
    for i in (0..n).rev() {
        // poly = poly * (x - xs[i]) + dd[i]
        let mut next = vec![ZERO; n];
        for d in 0..n - 1 {
            next[d + 1] += poly[d];
            next[d] -= poly[d] * xs[i];
        }
        next[0] += dd[i];
        poly = next;
    }
    let fact: f64 = (1..=l).map(|v| v as f64).product();
    poly.get(l).copied().unwrap_or(ZERO) * fact
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::heat_images_oracle;
    use std::f64::consts::PI;

    fn mode_series(torus: &TorusGrid, time: &TimeGrid, mode: usize, tau0: f64) -> BoundarySeries {
        vec![time
            .times()
            .iter()
            .map(|&t| (0..torus.len()).map(|i| if i == mode { C64::new(0.0, tau0 * t).exp() } else { ZERO }).collect())
            .collect()]
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(24, 1.0, 1.0).is_err());
        assert!(TimeGrid::new(32, 1.0, 0.0).is_err());
        let g = TimeGrid::new(8, 4.0, 1.0).unwrap();
        assert_eq!(g.frequencies()[1], 2.0 * PI / 4.0);
    }

    #[test]
    fn zero_data_gives_zero() {
        let d = ModelProblem::dirichlet_laplacian(2);
        let torus = TorusGrid::line(4, 2.0 * PI).unwrap();
        let normal = NormalGrid::covering(1e-4, 10.0, 1.3, true).unwrap();
        let time = TimeGrid::new(8, 2.0 * PI, 1.0).unwrap();
        let g = vec![vec![vec![ZERO; 4]; 8]];
        let u = parabolic_boundary_solve(&d, &g, &time, &torus, &normal, 0).unwrap();
        assert!(u.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn single_mode_closed_form() {
        let d = ModelProblem::dirichlet_laplacian(2);
        let torus = TorusGrid::line(8, 2.0 * PI).unwrap();
        let normal = NormalGrid::covering(1e-4, 10.0, 1.3, true).unwrap();
        let time = TimeGrid::new(16, 2.0 * PI, 0.7).unwrap();
        let mode = torus.index_of(&[2]);
        let tau0 = 3.0;
        let u = parabolic_boundary_solve(&d, &mode_series(&torus, &time, mode, tau0), &time, &torus, &normal, 0).unwrap();
        let kappa = C64::new(0.7 + 4.0, tau0).sqrt();
        let mut worst = 0.0f64;
        for (i, &t) in time.times().iter().enumerate() {
            for (z, &x) in normal.nodes().iter().enumerate() {
                let want = C64::new(0.0, tau0 * t).exp() * (-kappa * x).exp();
                worst = worst.max((u[i].get(mode, z) - want).norm());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn temporal_slope_matches_prediction() {
        let d = ModelProblem::dirichlet_laplacian(2);
        let torus = TorusGrid::line(4, 2.0 * PI).unwrap();
        let normal = NormalGrid::new(1e-3, 2.0, 3, true).unwrap();
        let time = TimeGrid::new(512, 2.0 * PI, 1.0).unwrap();
        let mode = torus.index_of(&[1]);
        let l = 0.75;
        // boundary series with |g_hat(tau)| = <tau>^{-l-1/2}
        let tt = TorusGrid::line(512, 2.0 * PI).unwrap();
        let mut c: Vec<C64> = time.frequencies().iter().map(|tau| C64::new((1.0 + tau * tau).powf(-(l + 0.5) / 2.0), 0.0)).collect();
        tt.inverse_fft(&mut c);
        let g = vec![c.iter().map(|v| (0..4).map(|i| if i == mode { *v } else { ZERO }).collect()).collect()];
        let du = parabolic_boundary_solve(&d, &g, &time, &torus, &normal, 1).unwrap();
        let trace: Vec<C64> = du.iter().map(|s| s.get(mode, 0)).collect();
        let slope = temporal_decay_slope(&trace, &time, 10.0, 200.0).unwrap();
        let want = predicted_temporal_slope(&d, 0, 1, l);
        assert!((slope - want).abs() < 0.05, "{slope} vs {want}");
    }

    #[test]
    fn extension_is_continuous_and_tapered() {
        let ext = ExtensionOperator::new(3).unwrap();
        let h = |t: f64| vec![C64::new(t.sin() + 2.0, t)];
        let end = 2.0;
        let e = |t: f64| extend_in_time(&h, t, end, 3.0 * end, &ext)[0];
        for (a, b) in [(end, end + 1e-7), (3.0 * end - 1e-7, 0.0)] {
            assert!((e(a) - e(b)).norm() < 1e-5);
        }
        assert_eq!(e(1.5 * end).norm(), 0.0);
        // first derivative continuity across T
        let dl = (e(end) - e(end - 1e-5)) / 1e-5;
        let dr = (e(end + 1e-5) - e(end)) / 1e-5;
        assert!((dl - dr).norm() < 1e-3);
    }

    #[test]
    fn polynomial_derivatives() {
        let xs = [0.0, 0.1, 0.3, 0.7];
        let ys = xs.map(|x| C64::new(1.0 + 2.0 * x - x * x * x, 0.0));
        assert!((polynomial_derivative(&xs, &ys, 0) - 1.0).norm() < 1e-12);
        assert!((polynomial_derivative(&xs, &ys, 1) - 2.0).norm() < 1e-10);
        assert!((polynomial_derivative(&xs, &ys, 3) + 6.0).norm() < 1e-8);
    }

    fn heat_grids() -> (ModelProblem, TorusGrid, NormalGrid, usize) {
        let d = ModelProblem::dirichlet_laplacian(2);
        let torus = TorusGrid::line(4, 2.0 * PI).unwrap();
        let normal = NormalGrid::covering(1e-6, 30.0, 1.05, true).unwrap();
        let mode = torus.index_of(&[1]);
        (d, torus, normal, mode)
    }

    fn images(torus: &TorusGrid, normal: &NormalGrid, mode: usize, t: f64) -> GridFunction {
        let xs = normal.nodes();
        GridFunction::from_fn(torus.len(), xs.len(), Layout::Frequency, |i, z| {
            if i == mode {
                C64::new(heat_images_oracle(1.0, 1.0, t, xs[z]), 0.0)
            } else {
                ZERO
            }
        })
    }

    fn rel_err(a: &GridFunction, b: &GridFunction) -> f64 {
        a.sub(b).max_abs() / b.max_abs()
    }

    #[test]
    fn ibvp_pure_semigroup_matches_images() {
        let (d, torus, normal, mode) = heat_grids();
        let u0 = images(&torus, &normal, mode, 0.0);
        let settings = IbvpSettings::new(1.0, 8, 1.0).unwrap();
        let out = ibvp_solve(&d, &u0, None, None, &settings, &torus, &normal).unwrap();
        assert!(out.compatibility_defect < 1e-9);
        for (t, u) in out.times.iter().zip(&out.u) {
            assert!(rel_err(u, &images(&torus, &normal, mode, *t)) < 1e-3, "t = {t}");
        }
    }

    #[test]
    fn ibvp_duhamel_matches_scalar_ode() {
        // f(s) = cos(s) T(s) u0 gives v(t) = sin(t) T(t) u0
        let (d, torus, _, mode) = heat_grids();
        let normal = NormalGrid::covering(1e-6, 30.0, 1.015, true).unwrap();
        let zero = GridFunction::zeros(torus.len(), normal.len(), Layout::Frequency);
        let f = |s: f64| {
            let mut v = images(&torus, &normal, mode, s);
            v.scale(C64::new(s.cos(), 0.0));
            v
        };
        let mut settings = IbvpSettings::new(0.5, 4, 1.0).unwrap();
        settings.duhamel_density = 32;
        let out = ibvp_solve(&d, &zero, Some(&f), None, &settings, &torus, &normal).unwrap();
        for (t, u) in out.times.iter().zip(&out.u).skip(1) {
            let mut want = images(&torus, &normal, mode, *t);
            want.scale(C64::new(t.sin(), 0.0));
            assert!(rel_err(u, &want) < 1e-6, "t = {t}: {}", rel_err(u, &want));
        }
    }

    #[test]
    fn ibvp_boundary_data_matches_time_line_solution() {
        let (d, torus, normal, mode) = heat_grids();
        let zero = GridFunction::zeros(torus.len(), normal.len(), Layout::Frequency);
        let (sigma, tau0, end) = (1.0, 2.0, 4.0);
        let g = move |_j: usize, t: f64| -> Vec<C64> {
            (0..4).map(|i| if i == mode { C64::new(sigma, tau0).scale(t).exp() } else { ZERO }).collect()
        };
        let settings = IbvpSettings::new(end, 64, sigma).unwrap();
        let out = ibvp_solve(&d, &zero, None, Some(&g), &settings, &torus, &normal).unwrap();
        assert!(out.compatibility_defect > 0.5);
        let kappa = C64::new(sigma + 1.0, tau0).sqrt();
        let xs = normal.nodes();
        let (t, u) = out.times.iter().zip(&out.u).last().unwrap();
        assert!((t - end).abs() < 1e-12);
        let want = GridFunction::from_fn(4, xs.len(), Layout::Frequency, |i, z| {
            if i == mode { C64::new(sigma, tau0).scale(*t).exp() * (-kappa * xs[z]).exp() } else { ZERO }
        });
        assert!(rel_err(u, &want) < 1e-3, "{}", rel_err(u, &want));
        // choosing u0 = v1(0) removes the semigroup part exactly
        let again = ibvp_solve(&d, &out.v1_initial, None, Some(&g), &settings, &torus, &normal).unwrap();
        assert!(rel_err(&again.u[0], &out.v1_initial) < 1e-15);
    }
}
