//! Boundary value problem data and the sample-based ellipticity and
//! Lopatinskii-Shapiro checks.
//!
//! A [`ModelProblem`] is a homogeneous constant-coefficient system
//! `(lambda - A(D), B_1(D), ..., B_m(D))` on the half-space `x_n > 0` with
//! `D = -i d/dx`. The interior operator has order `2m`, the boundary operator
//! `B_j` has order `m_j`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_free::standard_normal;
use serde::{Deserialize, Serialize};

use crate::companion::{build_companion_unchecked, FrequencyPoint};
use crate::error::{Error, Result};
use crate::C64;

/// Multi-index `alpha` with one entry per space dimension.
pub type MultiIndex = Vec<usize>;

/// One boundary operator `B_j(D) = sum b_beta D^beta` with `|beta| = order`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    pub order: usize,
    pub coeffs: BTreeMap<MultiIndex, C64>,
}

/// The boundary system. Construct with [`ModelProblem::new`] or by parsing JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile", into = "ProblemFile")]
pub struct ModelProblem {
    n: usize,
    m: usize,
    interior: BTreeMap<MultiIndex, C64>,
    boundary: Vec<BoundaryOperator>,
    phi_prime: f64,
    phi: f64,
}

impl ModelProblem {
    pub fn new(
        n: usize,
        m: usize,
        interior: BTreeMap<MultiIndex, C64>,
        boundary: Vec<BoundaryOperator>,
        phi_prime: f64,
        phi: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if n == 0 || m == 0 {
            return bad(format!("need n >= 1 and m >= 1, got n = {n}, m = {m}"));
        }
        for (alpha, _) in &interior {
            if alpha.len() != n {
                return bad(format!("interior index {alpha:?} has length {} != n", alpha.len()));
            }
            if alpha.iter().sum::<usize>() != 2 * m {
                return bad(format!("interior index {alpha:?} is not of order 2m = {}", 2 * m));
            }
        }
        let mut normal = vec![0; n];
        normal[n - 1] = 2 * m;
        match interior.get(&normal) {
            Some(a) if a.norm() > 0.0 => {}
            _ => return bad("pure normal coefficient a_(0,..,0,2m) must be nonzero".into()),
        }
        if boundary.len() != m {
            return bad(format!("expected {m} boundary operators, got {}", boundary.len()));
        }
        for (j, op) in boundary.iter().enumerate() {
            if op.order >= 2 * m {
                return bad(format!("boundary operator {j} has order {} >= 2m", op.order));
            }
            if !op.coeffs.values().any(|c| c.norm() > 0.0) {
                return bad(format!("boundary operator {j} has no nonzero coefficient"));
            }
            for beta in op.coeffs.keys() {
                if beta.len() != n || beta.iter().sum::<usize>() != op.order {
                    return bad(format!("boundary operator {j}: index {beta:?} does not match order {}", op.order));
                }
            }
        }
        if !(phi_prime > 0.0 && phi_prime <= PI) {
            return bad(format!("phi_prime = {phi_prime} must lie in (0, pi]"));
        }
        if !(phi > 0.0 && phi < phi_prime) {
            return bad(format!("phi = {phi} must lie in (0, phi_prime)"));
        }
        Ok(Self { n, m, interior, boundary, phi_prime, phi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn phi_prime(&self) -> f64 {
        self.phi_prime
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn interior(&self) -> &BTreeMap<MultiIndex, C64> {
        &self.interior
    }

    pub fn boundary(&self) -> &[BoundaryOperator] {
        &self.boundary
    }

    /// Orders `m_j` of the boundary operators.
    pub fn boundary_orders(&self) -> Vec<usize> {
        self.boundary.iter().map(|b| b.order).collect()
    }

    /// Same problem with a different working angle.
    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        Self::new(self.n, self.m, self.interior.clone(), self.boundary.clone(), self.phi_prime, phi)
    }

    /// `A(xi) = sum a_alpha xi^alpha`.
    pub fn symbol_a(&self, xi: &[f64]) -> C64 {
        assert_eq!(xi.len(), self.n, "symbol_a: xi must have length n");
        self.interior.iter().map(|(alpha, a)| a * monomial(xi, alpha)).sum()
    }

    /// Coefficients (ascending in `tau`) of `lambda - A(xi', tau)`.
    pub fn normal_polynomial(&self, xi_prime: &[f64], lambda: C64) -> Vec<C64> {
        let mut p = vec![C64::new(0.0, 0.0); 2 * self.m + 1];
        for (alpha, a) in &self.interior {
            let k = alpha[self.n - 1];
            p[k] -= a * monomial(xi_prime, &alpha[..self.n - 1]);
        }
        p[0] += lambda;
        p
    }

    /// Coefficients (ascending in `tau`) of `B_j(xi', tau)`.
    pub fn boundary_polynomial(&self, j: usize, xi_prime: &[f64]) -> Vec<C64> {
        let op = &self.boundary[j];
        let mut p = vec![C64::new(0.0, 0.0); op.order + 1];
        for (beta, b) in &op.coeffs {
            p[beta[self.n - 1]] += b * monomial(xi_prime, &beta[..self.n - 1]);
        }
        p
    }

    /// Minimal normal order present in the boundary operators.
    pub fn k_max(&self) -> usize {
        self.boundary
            .iter()
            .map(|op| {
                op.coeffs
                    .iter()
                    .filter(|(_, b)| b.norm() > 0.0)
                    .map(|(beta, _)| beta[self.n - 1])
                    .min()
                    .expect("boundary operators are nonzero by construction")
            })
            .min()
            .expect("m >= 1")
    }

    /// Samples `|arg A(xi)| - phi'` over unit directions. Passing requires a
    /// positive margin everywhere.
    pub fn check_ellipticity(&self, directions: &[Vec<f64>]) -> Result<EllipticityReport> {
        if directions.is_empty() {
            return Err(Error::InvalidArgument("empty direction sample".into()));
        }
        let mut worst = f64::INFINITY;
        let mut violating = None;
        for xi in directions {
            let norm: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!("direction {xi:?} is not a unit vector")));
            }
            let a = self.symbol_a(xi);
            let margin = if a.norm() == 0.0 { f64::NEG_INFINITY } else { a.arg().abs() - self.phi_prime };
            if margin < worst {
                worst = margin;
                if margin <= 0.0 {
                    violating = Some(xi.clone());
                }
            }
        }
        Ok(EllipticityReport { pass: worst > 0.0, worst_margin: worst, violating })
    }

    /// Builds the companion system at every sampled `(xi', lambda)` and checks
    /// that the boundary map on the stable subspace is invertible.
    pub fn check_lopatinskii_shapiro(
        &self,
        sample: &SectorSample,
        tangential: &[Vec<f64>],
        threshold: f64,
    ) -> Result<LsReport> {
        let scale = self.boundary_scale();
        let mut report = LsReport {
            pass: true,
            min_singular: f64::INFINITY,
            max_condition: 0.0,
            worst_point: None,
            samples: 0,
            failure: None,
        };
        for lambda in sample.points() {
            for xi in tangential {
                let fp = FrequencyPoint::new(xi, lambda, self.m)?;
                report.samples += 1;
                let cs = match build_companion_unchecked(self, &fp) {
                    Ok(cs) => cs,
                    Err(e) => {
                        report.pass = false;
                        report.failure.get_or_insert_with(|| e.to_string());
                        report.min_singular = 0.0;
                        report.worst_point = Some((xi.clone(), lambda));
                        continue;
                    }
                };
                let rel = cs.min_singular() / scale;
                report.max_condition = report.max_condition.max(cs.condition());
                if rel < report.min_singular {
                    report.min_singular = rel;
                    report.worst_point = Some((xi.clone(), lambda));
                }
                if rel < threshold {
                    report.pass = false;
                    report.failure.get_or_insert_with(|| {
                        Error::LopatinskiiShapiro {
                            xi_prime: xi.clone(),
                            lambda,
                            condition: cs.condition(),
                        }
                        .to_string()
                    });
                }
            }
        }
        Ok(report)
    }

    /// Largest coefficient mass over the boundary operators; the LS threshold
    /// is relative to this.
    pub(crate) fn boundary_scale(&self) -> f64 {
        self.boundary
            .iter()
            .map(|op| op.coeffs.values().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dirichlet Laplacian `(Delta, trace)` in dimension `n`.
    pub fn dirichlet_laplacian(n: usize) -> Self {
        let b = BoundaryOperator { order: 0, coeffs: [(vec![0; n], C64::new(1.0, 0.0))].into() };
        Self::new(n, 1, laplacian_coeffs(n), vec![b], PI - 0.01, 3.0).expect("valid")
    }

    /// Neumann Laplacian `(Delta, d/dx_n)`; note `d/dx_n = i D_n`.
    pub fn neumann_laplacian(n: usize) -> Self {
        let b = BoundaryOperator { order: 1, coeffs: [(unit(n, n - 1), C64::new(0.0, 1.0))].into() };
        Self::new(n, 1, laplacian_coeffs(n), vec![b], PI - 0.01, 3.0).expect("valid")
    }

    /// Clamped plate `(-Delta^2, trace, d/dx_n)`.
    pub fn clamped_bilaplacian(n: usize) -> Self {
        let mut interior = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let mut alpha = vec![0; n];
                alpha[i] += 2;
                alpha[j] += 2;
                *interior.entry(alpha).or_insert(C64::new(0.0, 0.0)) -= C64::new(1.0, 0.0);
            }
        }
        let b1 = BoundaryOperator { order: 0, coeffs: [(vec![0; n], C64::new(1.0, 0.0))].into() };
        let b2 = BoundaryOperator { order: 1, coeffs: [(unit(n, n - 1), C64::new(0.0, 1.0))].into() };
        Self::new(n, 2, interior, vec![b1, b2], PI - 0.01, 3.0).expect("valid")
    }
}

fn laplacian_coeffs(n: usize) -> BTreeMap<MultiIndex, C64> {
    (0..n).map(|i| (unit(n, i).iter().map(|k| 2 * k).collect(), C64::new(-1.0, 0.0))).collect()
}

fn unit(n: usize, i: usize) -> MultiIndex {
    let mut e = vec![0; n];
    e[i] = 1;
    e
}

pub(crate) fn monomial(x: &[f64], alpha: &[usize]) -> f64 {
    x.iter().zip(alpha).map(|(xi, &k)| xi.powi(k as i32)).product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub pass: bool,
    /// Minimum of `|arg A(xi)| - phi'` over the sample, in radians.
    pub worst_margin: f64,
    pub violating: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsReport {
    pub pass: bool,
    /// Smallest singular value of the stable boundary map, relative to the
    /// coefficient mass of the boundary operators.
    pub min_singular: f64,
    pub max_condition: f64,
    pub worst_point: Option<(Vec<f64>, C64)>,
    pub samples: usize,
    pub failure: Option<String>,
}

/// Rays and moduli of spectral parameters in the closed sector of angle `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSample {
    pub rays: Vec<f64>,
    pub moduli: Vec<f64>,
    pub sigma_floor: f64,
}

impl SectorSample {
    pub fn new(rays: Vec<f64>, moduli: Vec<f64>, sigma_floor: f64, phi: f64) -> Result<Self> {
        if !(sigma_floor > 0.0) {
            return Err(Error::InvalidArgument("sigma_floor must be positive".into()));
        }
        if let Some(r) = rays.iter().find(|r| r.abs() > phi + 1e-12) {
            return Err(Error::InvalidArgument(format!("ray {r} outside [-phi, phi]")));
        }
        if let Some(m) = moduli.iter().find(|&&m| m < sigma_floor) {
            return Err(Error::InvalidArgument(format!("modulus {m} below sigma_floor")));
        }
        Ok(Self { rays, moduli, sigma_floor })
    }

    /// `n_rays` equally spaced rays in `[-phi, phi]` and `n_moduli` log-spaced
    /// moduli in `[lo, hi]`.
    pub fn log_spaced(phi: f64, n_rays: usize, lo: f64, hi: f64, n_moduli: usize) -> Result<Self> {
        let rays = if n_rays == 1 { vec![0.0] } else { linspace(-phi, phi, n_rays) };
        Self::new(rays, logspace(lo, hi, n_moduli), lo, phi)
    }

    pub fn points(&self) -> impl Iterator<Item = C64> + '_ {
        self.rays
            .iter()
            .flat_map(move |&arg| self.moduli.iter().map(move |&r| C64::from_polar(r, arg)))
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Deterministic sample of unit vectors in `R^n`.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
                    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / s).collect()
                })
                .collect()
        }
    }
}

/// Tangential frequencies for the LS check: the origin plus each direction
/// scaled by each magnitude.
pub fn tangential_sample(d: usize, directions: usize, magnitudes: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; d]];
    if d == 0 {
        return out;
    }
    for dir in sphere_directions(d, directions) {
        for &r in magnitudes {
            out.push(dir.iter().map(|x| x * r).collect());
        }
    }
    out
}

/// Box-Muller normal sampler, kept local so `rand_distr` is not needed.
mod rand_distr_free {
    use rand::Rng;

    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

// JSON representation: multi-indices as "0,2" strings, complex numbers as [re, im].

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    m: usize,
    interior: BTreeMap<String, [f64; 2]>,
    boundary: Vec<BoundaryFile>,
    phi_prime: f64,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
struct BoundaryFile {
    order: usize,
    coeffs: BTreeMap<String, [f64; 2]>,
}

fn parse_index(key: &str) -> Result<MultiIndex> {
    key.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidProblem(format!("bad multi-index {key:?}")))
        })
        .collect()
}

fn index_key(alpha: &[usize]) -> String {
    alpha.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_coeffs(map: BTreeMap<String, [f64; 2]>) -> Result<BTreeMap<MultiIndex, C64>> {
    map.into_iter().map(|(k, [re, im])| Ok((parse_index(&k)?, C64::new(re, im)))).collect()
}

fn write_coeffs(map: &BTreeMap<MultiIndex, C64>) -> BTreeMap<String, [f64; 2]> {
    map.iter().map(|(k, c)| (index_key(k), [c.re, c.im])).collect()
}

impl TryFrom<ProblemFile> for ModelProblem {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Self> {
        let boundary = f
            .boundary
            .into_iter()
            .map(|b| Ok(BoundaryOperator { order: b.order, coeffs: parse_coeffs(b.coeffs)? }))
            .collect::<Result<Vec<_>>>()?;
        ModelProblem::new(f.n, f.m, parse_coeffs(f.interior)?, boundary, f.phi_prime, f.phi)
    }
}

impl From<ModelProblem> for ProblemFile {
    fn from(p: ModelProblem) -> Self {
        ProblemFile {
            n: p.n,
            m: p.m,
            interior: write_coeffs(&p.interior),
            boundary: p
                .boundary
                .iter()
                .map(|b| BoundaryFile { order: b.order, coeffs: write_coeffs(&b.coeffs) })
                .collect(),
            phi_prime: p.phi_prime,
            phi: p.phi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn laplacian_symbol() {
        let p = ModelProblem::dirichlet_laplacian(2);
        assert_eq!(p.symbol_a(&[1.0, 1.0]), c(-2.0));
        assert_eq!(p.symbol_a(&[0.0, 0.0]), c(0.0));
    }

    #[test]
    fn bilaplacian_monomials() {
        let p = ModelProblem::clamped_bilaplacian(2);
        assert_eq!(p.interior()[&vec![4, 0]], c(-1.0));
        assert_eq!(p.interior()[&vec![2, 2]], c(-2.0));
        assert_eq!(p.interior()[&vec![0, 4]], c(-1.0));
        assert_eq!(p.symbol_a(&[0.0, 2.0]), c(-16.0));
        // (xi1^2 + xi2^2)^2 at (1, 2) is 25
        assert_eq!(p.symbol_a(&[1.0, 2.0]), c(-25.0));
    }

    #[test]
    fn ellipticity_examples() {
        let dirs = sphere_directions(2, 64);
        let lap = ModelProblem::dirichlet_laplacian(2);
        assert!(lap.check_ellipticity(&dirs).unwrap().pass);

        let mut pos = lap.interior().clone();
        pos.values_mut().for_each(|a| *a = -*a);
        let anti = ModelProblem::new(2, 1, pos, lap.boundary().to_vec(), PI / 2.0, 1.0).unwrap();
        let r = anti.check_ellipticity(&dirs).unwrap();
        assert!(!r.pass);
        assert!(r.violating.is_some());

        let bi = ModelProblem::clamped_bilaplacian(2);
        let bi = ModelProblem::new(2, 2, bi.interior().clone(), bi.boundary().to_vec(), 3.0 * PI / 4.0, 2.0).unwrap();
        let r = bi.check_ellipticity(&dirs).unwrap();
        assert!(r.pass);
        assert!((r.worst_margin - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn k_max_examples() {
        assert_eq!(ModelProblem::dirichlet_laplacian(2).k_max(), 0);
        assert_eq!(ModelProblem::neumann_laplacian(2).k_max(), 1);
        let bi = ModelProblem::clamped_bilaplacian(2);
        let b2 = BoundaryOperator { order: 3, coeffs: [(vec![0, 3], c(1.0))].into() };
        let mixed = ModelProblem::new(2, 2, bi.interior().clone(), vec![bi.boundary()[0].clone(), b2], 3.0, 2.0).unwrap();
        assert_eq!(mixed.k_max(), 0);
    }

    #[test]
    fn rejects_bad_problems() {
        let lap = ModelProblem::dirichlet_laplacian(2);
        let zero = BoundaryOperator { order: 0, coeffs: [(vec![0, 0], c(0.0))].into() };
        assert!(ModelProblem::new(2, 1, lap.interior().clone(), vec![zero], 3.0, 2.0).is_err());
        let mut no_normal = lap.interior().clone();
        no_normal.remove(&vec![0, 2]);
        assert!(ModelProblem::new(2, 1, no_normal, lap.boundary().to_vec(), 3.0, 2.0).is_err());
        let mut inhom = lap.interior().clone();
        inhom.insert(vec![1, 0], c(1.0));
        assert!(ModelProblem::new(2, 1, inhom, lap.boundary().to_vec(), 3.0, 2.0).is_err());
        assert!(ModelProblem::new(2, 1, lap.interior().clone(), lap.boundary().to_vec(), 2.0, 2.5).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = ModelProblem::clamped_bilaplacian(2);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"0,4\""));
        let q: ModelProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let err = serde_json::from_str::<ModelProblem>(&s.replace("\"0,4\"", "\"0,x\"")).unwrap_err();
        assert!(err.to_string().contains("multi-index"));
    }

    #[test]
    fn ls_examples() {
        let sample = SectorSample::log_spaced(2.5, 5, 1e-2, 1e4, 8).unwrap();
        let tang = tangential_sample(1, 2, &logspace(1e-3, 1e3, 7));
        for p in [ModelProblem::dirichlet_laplacian(2), ModelProblem::neumann_laplacian(2)] {
            let r = p.check_lopatinskii_shapiro(&sample, &tang, 1e-8).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(r.min_singular > 1e-3);
        }
        let lap = ModelProblem::dirichlet_laplacian(2);
        let tangential = BoundaryOperator { order: 1, coeffs: [(vec![1, 0], c(1.0))].into() };
        let bad = ModelProblem::new(2, 1, lap.interior().clone(), vec![tangential], 3.0, 2.5).unwrap();
        let r = bad.check_lopatinskii_shapiro(&sample, &[vec![0.0]], 1e-8).unwrap();
        assert!(!r.pass);
        assert!(r.failure.unwrap().contains("Lopatinskii"));
    }

    proptest! {
        #[test]
        fn symbol_is_homogeneous(x in -3.0f64..3.0, y in -3.0f64..3.0, ti in 0usize..3) {
            let t = [0.5, 2.0, 10.0][ti];
            for p in [ModelProblem::dirichlet_laplacian(2), ModelProblem::clamped_bilaplacian(2)] {
                let a = p.symbol_a(&[x, y]);
                let at = p.symbol_a(&[t * x, t * y]);
                let scale = t.powi(2 * p.m() as i32);
                prop_assert!((at - a * scale).norm() <= 1e-13 * (1.0 + at.norm()));
            }
        }

        #[test]
        fn ls_verdict_is_scale_invariant(xi in -5.0f64..5.0, r in 0.1f64..100.0, arg in -2.5f64..2.5, t in 0.1f64..10.0) {
            let p = ModelProblem::clamped_bilaplacian(2);
            let lam = C64::from_polar(r, arg);
            let s1 = SectorSample::new(vec![arg], vec![r], r, 2.9).unwrap();
            let s2 = SectorSample::new(vec![arg], vec![r * t.powi(4)], r * t.powi(4), 2.9).unwrap();
            let a = p.check_lopatinskii_shapiro(&s1, &[vec![xi]], 1e-8).unwrap();
            let b = p.check_lopatinskii_shapiro(&s2, &[vec![t * xi]], 1e-8).unwrap();
            prop_assert_eq!(a.pass, b.pass, "verdict changed at {}", lam);
        }
    }
}
