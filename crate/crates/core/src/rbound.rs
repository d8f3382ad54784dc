//! Monte-Carlo lower bounds for R-bounds.
//!
//! For operators `T_1, ..., T_N` and inputs `x_1, ..., x_N` the ratio
//! `(E ||sum eps_l T_l x_l||^2)^{1/2} / (E ||sum eps_l x_l||^2)^{1/2}` over
//! Rademacher signs `eps_l` is a lower bound for the R-bound of the family (up
//! to the Kahane-Khintchine constants of the norms involved).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, NormalGrid, TorusGrid};
use crate::linalg::ols_slope;
use crate::model::ModelProblem;
use crate::poisson::poisson_at;
use crate::spaces::{tangential_norm, weighted_halfline_norm, DyadicPartition, SpaceSpec};
use crate::C64;

pub type Operator<'a> = Box<dyn Fn(&[C64]) -> Vec<C64> + Send + Sync + 'a>;
pub type Norm<'a> = dyn Fn(&[C64]) -> f64 + Sync + 'a;

pub struct RademacherTrial<'a> {
    pub seed: u64,
    pub trials: usize,
    pub operators: Vec<Operator<'a>>,
    pub vectors: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub estimate: f64,
    /// Standard error of `estimate` (delta method).
    pub stderr: f64,
}

/// The Rademacher signs of trial `i`: stream `i` of the generator seeded with
/// `seed`, so trials are independent of scheduling.
pub fn rademacher_signs(seed: u64, trial: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn signed_sum(vs: &[Vec<C64>], eps: &[f64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); vs[0].len()];
    for (v, e) in vs.iter().zip(eps) {
        out.iter_mut().zip(v).for_each(|(a, b)| *a += b * e);
    }
    out
}

pub fn rademacher_ratio(trial: &RademacherTrial, norm_out: &Norm, norm_in: &Norm) -> Result<RademacherEstimate> {
    let n = trial.operators.len();
    if n == 0 || n != trial.vectors.len() {
        return Err(Error::InvalidArgument("need as many operators as input vectors".into()));
    }
    if trial.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if trial.vectors.iter().all(|v| v.iter().all(|z| *z == C64::new(0.0, 0.0))) {
        return Err(Error::InvalidArgument("all input vectors vanish".into()));
    }
    let images: Vec<Vec<C64>> = trial.operators.par_iter().zip(&trial.vectors).map(|(t, x)| t(x)).collect();
    let samples: Vec<(f64, f64)> = (0..trial.trials)
        .into_par_iter()
        .map(|i| {
            let eps = rademacher_signs(trial.seed, i, n);
            (norm_out(&signed_sum(&images, &eps)).powi(2), norm_in(&signed_sum(&trial.vectors, &eps)).powi(2))
        })
        .collect();
    Ok(ratio_of_second_moments(&samples))
}

fn ratio_of_second_moments(samples: &[(f64, f64)]) -> RademacherEstimate {
    let k = samples.len() as f64;
    let a = samples.iter().map(|s| s.0).sum::<f64>() / k;
    let b = samples.iter().map(|s| s.1).sum::<f64>() / k;
    let estimate = (a / b).sqrt();
    if samples.len() < 2 || a == 0.0 {
        return RademacherEstimate { estimate, stderr: 0.0 };
    }
    // d = a_i / a - b_i / b; var(sqrt(A/B)) ~ (R/2)^2 var(d) / k
    let var = samples.iter().map(|s| (s.0 / a - s.1 / b).powi(2)).sum::<f64>() / (k - 1.0);
    RademacherEstimate { estimate, stderr: 0.5 * estimate * (var / k).sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonRboundConfig {
    pub p: f64,
    pub r: f64,
    pub sigma: f64,
    /// Tangential smoothness of the `H^s_2` target.
    pub s: f64,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Normal grid ratio; the grid spans `[1e-3 / kappa_N, 40 / sigma]`.
    pub ratio: f64,
}

impl Default for NonRboundConfig {
    fn default() -> Self {
        Self::new(1.2)
    }
}

impl NonRboundConfig {
    pub fn new(p: f64) -> Self {
        Self { p, r: 0.0, sigma: 1.0, s: 0.0, n_list: vec![4, 8, 16, 32, 64], trials: 512, seed: 7, ratio: 1.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub p: f64,
    pub r: f64,
    pub n: usize,
    pub ratio: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
    /// Least-squares slope of `log ratio` against `log N`.
    pub fitted_exponent: f64,
}

impl GrowthTable {
    /// `ratio(N_last) / ratio(N_first)`.
    pub fn growth(&self) -> f64 {
        self.rows[self.rows.len() - 1].ratio / self.rows[0].ratio
    }

    /// `max ratio / min ratio`.
    pub fn spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let min = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn max_relative_stderr(&self) -> f64 {
        self.rows.iter().map(|r| r.stderr / r.ratio).fold(0.0, f64::max)
    }
}

/// Rademacher ratios for `|lambda_l|^{(1+r)/(2p)} Poi(lambda_l)`, `lambda_l =
/// (sigma 2^l)^2`, of the Dirichlet Laplacian in two dimensions, from `H^s_2`
/// on the boundary to `L_p(R_+, x^r; H^s_2)`.
///
/// The inputs `g_l` are single tangential modes with distinct frequencies in
/// the unit ball, so the inner norm of `sum eps_l g_l` does not depend on the
/// signs.
pub fn dirichlet_nonrbound_experiment(cfg: &NonRboundConfig) -> Result<GrowthTable> {
    if !(1.0..=2.0).contains(&cfg.p) {
        return Err(Error::InvalidArgument(format!("p = {} outside [1, 2]", cfg.p)));
    }
    if !(cfg.r > -1.0) || !(cfg.sigma > 0.0) || cfg.n_list.is_empty() || cfg.n_list.contains(&0) {
        return Err(Error::InvalidArgument("need r > -1, sigma > 0 and positive family sizes".into()));
    }
    let n_max = *cfg.n_list.iter().max().expect("non-empty");
    let modes = n_max.next_power_of_two().max(2);
    let torus = TorusGrid::line(modes, std::f64::consts::PI * modes as f64)?;
    let kappa_max = cfg.sigma * 2f64.powi(n_max as i32);
    let normal = NormalGrid::covering(1e-3 / kappa_max, 40.0 / cfg.sigma, cfg.ratio, false)?;
    let xs = normal.nodes();
    let problem = ModelProblem::dirichlet_laplacian(2);
    let spec = SpaceSpec::bessel(cfg.s, 2.0);
    let part = DyadicPartition { bands: vec![vec![1.0; modes]] };
    let nz = xs.len();

    let norm_in = |v: &[C64]| tangential_norm(v, &torus, &spec, &part).unwrap_or(f64::NAN);
    let norm_out = |v: &[C64]| {
        let prof: Vec<C64> = (0..nz)
            .map(|z| {
                let slice: Vec<C64> = (0..modes).map(|t| v[t * nz + z]).collect();
                C64::new(tangential_norm(&slice, &torus, &spec, &part).unwrap_or(f64::NAN), 0.0)
            })
            .collect();
        weighted_halfline_norm(&prof, cfg.p, cfg.r, &normal).unwrap_or(f64::NAN)
    };

    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let operators: Vec<Operator> = (1..=n)
            .map(|l| {
                let lambda = C64::new((cfg.sigma * 2f64.powi(l as i32)).powi(2), 0.0);
                let scale = lambda.norm().powf((1.0 + cfg.r) / (2.0 * cfg.p));
                let (problem, torus, xs) = (&problem, &torus, &xs);
                Box::new(move |g: &[C64]| {
                    let mut u: GridFunction =
                        poisson_at(problem, lambda, 0, torus, g, xs, 0).expect("sector point on a valid grid");
                    u.scale(C64::new(scale, 0.0));
                    u.values
                }) as Operator
            })
            .collect();
        let vectors: Vec<Vec<C64>> = (0..n)
            .map(|l| {
                let mut g = vec![C64::new(0.0, 0.0); modes];
                g[torus.index_of(&[l as i64])] = C64::new(1.0, 0.0);
                g
            })
            .collect();
        let trial = RademacherTrial { seed: cfg.seed, trials: cfg.trials, operators, vectors };
        let est = rademacher_ratio(&trial, &norm_out, &norm_in)?;
        if !est.estimate.is_finite() {
            return Err(Error::Numerical("non-finite Rademacher ratio".into()));
        }
        rows.push(GrowthRow { p: cfg.p, r: cfg.r, n, ratio: est.estimate, stderr: est.stderr });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let fitted_exponent = if rows.len() >= 2 { ols_slope(&lx, &ly) } else { 0.0 };
    Ok(GrowthTable { rows, fitted_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l2(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn scalar_op<'a>(c: C64) -> Operator<'a> {
        Box::new(move |x: &[C64]| x.iter().map(|v| v * c).collect())
    }

    #[test]
    fn single_operator_is_exact() {
        let trial = RademacherTrial {
            seed: 3,
            trials: 16,
            operators: vec![Box::new(|x: &[C64]| vec![x[0] * 2.0, x[1] * 0.5])],
            vectors: vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)]],
        };
        let e = rademacher_ratio(&trial, &l2, &l2).unwrap();
        assert!((e.estimate - (4.0f64 + 1.0).sqrt() / 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn common_multiplier_factors_out() {
        let op = |x: &[C64]| vec![x[0] * 3.0, x[1]];
        let v = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let trial = RademacherTrial {
            seed: 1,
            trials: 64,
            operators: (0..5).map(|_| Box::new(op) as Operator).collect(),
            vectors: vec![v.clone(); 5],
        };
        // sum eps_l T x = T (sum eps_l) x: ratio is ||T x|| / ||x|| except when the signs cancel
        let e = rademacher_ratio(&trial, &l2, &l2).unwrap();
        assert!((e.estimate - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let t = RademacherTrial { seed: 0, trials: 4, operators: vec![scalar_op(C64::new(1.0, 0.0))], vectors: vec![vec![C64::new(0.0, 0.0)]] };
        assert!(rademacher_ratio(&t, &l2, &l2).is_err());
        let t = RademacherTrial { seed: 0, trials: 0, operators: vec![scalar_op(C64::new(1.0, 0.0))], vectors: vec![vec![C64::new(1.0, 0.0)]] };
        assert!(rademacher_ratio(&t, &l2, &l2).is_err());
    }

    #[test]
    fn signs_are_reproducible_and_balanced() {
        assert_eq!(rademacher_signs(5, 17, 32), rademacher_signs(5, 17, 32));
        assert_ne!(rademacher_signs(5, 17, 32), rademacher_signs(5, 18, 32));
        let total: f64 = (0..200).flat_map(|i| rademacher_signs(9, i, 50)).sum();
        assert!(total.abs() < 4.0 * (200.0f64 * 50.0).sqrt());
    }

    proptest! {
        #[test]
        fn contraction_principle(coeffs in proptest::collection::vec((-1.0f64..1.0, 0.0..6.28f64), 1..8), seed in 0u64..1000) {
            let n = coeffs.len();
            let operators: Vec<Operator> = coeffs.iter().map(|(r, a)| scalar_op(C64::from_polar(*r, *a))).collect();
            let vectors: Vec<Vec<C64>> = (0..n).map(|l| vec![C64::new(1.0 + l as f64, 0.5), C64::new(-0.3, l as f64)]).collect();
            let t = RademacherTrial { seed, trials: 256, operators, vectors };
            let e = rademacher_ratio(&t, &l2, &l2).unwrap();
            prop_assert!(e.estimate <= 1.0 + 3.0 * e.stderr + 1e-12);
        }

        #[test]
        fn global_sign_flip_invariance(seed in 0u64..1000) {
            let eps = rademacher_signs(seed, 0, 6);
            let flipped: Vec<f64> = eps.iter().map(|e| -e).collect();
            let vs: Vec<Vec<C64>> = (0..6).map(|l| vec![C64::new(l as f64, 1.0)]).collect();
            prop_assert!((l2(&signed_sum(&vs, &eps)) - l2(&signed_sum(&vs, &flipped))).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_for_small_p_and_plateau_at_two() {
        let mut cfg = NonRboundConfig::new(1.2);
        cfg.n_list = vec![4, 16, 64];
        cfg.trials = 64;
        let t = dirichlet_nonrbound_experiment(&cfg).unwrap();
        assert!(t.growth() >= 1.5, "{:?}", t.rows);
        cfg.p = 2.0;
        let t = dirichlet_nonrbound_experiment(&cfg).unwrap();
        assert!(t.spread() <= 1.3, "{:?}", t.rows);
    }
}
