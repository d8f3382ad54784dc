//! Small dense complex linear algebra: Schur form with eigenvalue reordering,
//! triangular Sylvester solves, exponentials of triangular blocks, and a
//! polynomial root finder. Matrices here are at most a few dozen rows.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with `G (x, y)^T = (r, 0)^T`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let r = ax.hypot(y.norm());
    if r == 0.0 {
        (1.0, ZERO)
    } else if ax == 0.0 {
        (0.0, ONE)
    } else {
        (ax / r, (x / ax) * y.conj() / r)
    }
}

/// `H <- G H G^*` on rows/columns `(k, k+1)` and `Q <- Q G^*`.
fn rotate(h: &mut CMatrix, q: &mut CMatrix, k: usize, c: f64, s: C64) {
    let n = h.nrows();
    for j in 0..n {
        let (h1, h2) = (h[(k, j)], h[(k + 1, j)]);
        h[(k, j)] = h1 * c + s * h2;
        h[(k + 1, j)] = -s.conj() * h1 + h2 * c;
    }
    for i in 0..n {
        let (a1, a2) = (h[(i, k)], h[(i, k + 1)]);
        h[(i, k)] = a1 * c + a2 * s.conj();
        h[(i, k + 1)] = -a1 * s + a2 * c;
        let (q1, q2) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = q1 * c + q2 * s.conj();
        q[(i, k + 1)] = -q1 * s + q2 * c;
    }
}

/// Complex Schur decomposition `A = Q T Q^*` with `T` upper triangular.
pub fn complex_schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "complex_schur: square matrix expected");
    let mut h = a.clone();
    let mut q = CMatrix::identity(n, n);
    if n <= 1 {
        return Ok((q, h));
    }

    // Householder reduction to Hessenberg form.
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 { ONE } else { x[0] / x[0].norm() };
        let mut v = x.clone();
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|c| *c /= vnorm);
        // H <- (I - 2vv^*) H (I - 2vv^*), Q <- Q (I - 2vv^*)
        for j in 0..n {
            let dot: C64 = (0..v.len()).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..v.len() {
                h[(k + 1 + i, j)] -= v[i] * dot * 2.0;
            }
        }
        for i in 0..n {
            let dot: C64 = (0..v.len()).map(|j| h[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..v.len() {
                h[(i, k + 1 + j)] -= dot * v[j].conj() * 2.0;
            }
            let dotq: C64 = (0..v.len()).map(|j| q[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..v.len() {
                q[(i, k + 1 + j)] -= dotq * v[j].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }

    // Single-shift QR iteration with Wilkinson shifts and deflation.
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 200 * n {
            return Err(Error::Numerical("Schur iteration did not converge".into()));
        }
        let (a, b, c, d) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
        let mut shift = if iter % 11 == 10 {
            // exceptional shift
            d + C64::new(h[(hi, hi - 1)].norm() * 0.75, 0.0)
        } else {
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mu1 = (a + d) * 0.5 + disc;
            let mu2 = (a + d) * 0.5 - disc;
            if (mu1 - d).norm() < (mu2 - d).norm() { mu1 } else { mu2 }
        };
        if !shift.is_finite() {
            shift = d;
        }
        let (cs, sn) = givens(h[(l, l)] - shift, h[(l + 1, l)]);
        rotate(&mut h, &mut q, l, cs, sn);
        for k in l + 1..hi {
            let (cs, sn) = givens(h[(k, k - 1)], h[(k + 1, k - 1)]);
            rotate(&mut h, &mut q, k, cs, sn);
            h[(k + 1, k - 1)] = ZERO;
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok((q, h))
}

/// Reorders a Schur form so that diagonal entries with `select` true come
/// first. Returns the number of selected eigenvalues.
pub fn reorder_schur(q: &mut CMatrix, t: &mut CMatrix, select: impl Fn(C64) -> bool) -> usize {
    let n = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1) {
            if !select(t[(k, k)]) && select(t[(k + 1, k + 1)]) {
                let (a, b, c) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k + 1)]);
                // eigenvector of c in the 2x2 block is (b, c - a)
                let (cs, sn) = givens(b, c - a);
                rotate(t, q, k, cs, sn);
                t[(k + 1, k)] = ZERO;
                t[(k, k)] = c;
                t[(k + 1, k + 1)] = a;
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    (0..n).filter(|&k| select(t[(k, k)])).count()
}

/// Solves `T11 X - X T22 = C` for upper-triangular `T11` (m x m) and `T22`
/// (p x p) with disjoint spectra.
pub fn solve_triangular_sylvester(t11: &CMatrix, t22: &CMatrix, c: &CMatrix) -> CMatrix {
    let (m, p) = (t11.nrows(), t22.nrows());
    let mut x = CMatrix::zeros(m, p);
    for j in 0..p {
        let mut rhs: Vec<C64> = (0..m).map(|i| c[(i, j)]).collect();
        for l in 0..j {
            for i in 0..m {
                rhs[i] += x[(i, l)] * t22[(l, j)];
            }
        }
        let shift = t22[(j, j)];
        for i in (0..m).rev() {
            let mut acc = rhs[i];
            for l in i + 1..m {
                acc -= t11[(i, l)] * x[(l, j)];
            }
            x[(i, j)] = acc / (t11[(i, i)] - shift);
        }
    }
    x
}

/// Inverse of an upper-triangular matrix by back substitution.
pub fn invert_upper(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = ONE / t[(j, j)];
        for i in (0..j).rev() {
            let acc: C64 = (i + 1..=j).map(|l| t[(i, l)] * inv[(l, j)]).sum();
            inv[(i, j)] = -acc / t[(i, i)];
        }
    }
    inv
}

/// Evaluates `exp(z T)` for a fixed upper-triangular `T` and many scalars `z`.
///
/// Uses the eigenbasis when it is well conditioned (distinct, separated
/// eigenvalues) and falls back to Pade scaling-and-squaring otherwise.
#[derive(Debug, Clone)]
pub struct TriangularExp {
    t: CMatrix,
    eig: Option<(Vec<C64>, CMatrix, CMatrix)>,
}

impl TriangularExp {
    pub fn new(t: &CMatrix) -> Self {
        let n = t.nrows();
        let d: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let scale = d.iter().map(|x| x.norm()).fold(1e-300, f64::max);
        let separated = (0..n).all(|i| (0..i).all(|j| (d[i] - d[j]).norm() > 1e-6 * scale));
        let eig = separated.then(|| {
            let mut v = CMatrix::identity(n, n);
            for i in 0..n {
                for j in (0..i).rev() {
                    let acc: C64 = (j + 1..=i).map(|l| t[(j, l)] * v[(l, i)]).sum();
                    v[(j, i)] = -acc / (t[(j, j)] - d[i]);
                }
            }
            let vinv = invert_upper(&v);
            (d.clone(), v, vinv)
        });
        let eig = eig.filter(|(_, v, vi)| inf_norm(v) * inf_norm(vi) < 1e4);
        Self { t: t.clone(), eig }
    }

    pub fn eval(&self, z: C64) -> CMatrix {
        let n = self.t.nrows();
        match &self.eig {
            Some((d, v, vinv)) => {
                let mut out = v.clone();
                for j in 0..n {
                    let e = (z * d[j]).exp();
                    for i in 0..n {
                        out[(i, j)] *= e;
                    }
                }
                out * vinv
            }
            None if n == 2 => {
                let (a, c) = (z * self.t[(0, 0)], z * self.t[(1, 1)]);
                let half = 0.5 * (a - c);
                let mid = (0.5 * (a + c)).exp();
                let mut out = CMatrix::zeros(2, 2);
                out[(0, 0)] = a.exp();
                out[(1, 1)] = c.exp();
                out[(0, 1)] = z * self.t[(0, 1)] * mid * sinhc(half);
                out
            }
            None => (self.t.clone() * z).exp(),
        }
    }

    /// `phi_k(z T)` for `k = 0..=q`.
    pub fn phi(&self, z: C64, q: usize) -> Vec<CMatrix> {
        match &self.eig {
            Some((d, v, vinv)) => {
                let vals: Vec<Vec<C64>> = d.iter().map(|di| phi_scalar(z * di, q)).collect();
                (0..=q)
                    .map(|k| {
                        let mut out = v.clone();
                        for (j, vj) in vals.iter().enumerate() {
                            out.column_mut(j).iter_mut().for_each(|e| *e *= vj[k]);
                        }
                        out * vinv
                    })
                    .collect()
            }
            None => phi_functions(&(self.t.clone() * z), q),
        }
    }
}

/// `sinh(w) / w`, accurate near zero.
fn sinhc(w: C64) -> C64 {
    if w.norm() < 1e-3 {
        let w2 = w * w;
        1.0 + w2 / 6.0 * (1.0 + w2 / 20.0 * (1.0 + w2 / 42.0))
    } else {
        w.sinh() / w
    }
}

fn inf_norm(a: &CMatrix) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `phi_k(X)` for k = 0..=q via the exponential of an augmented block matrix:
/// `exp([[X, I, 0..], [0, 0, I..], ..])` carries `phi_k(X)` in its first block row.
pub fn phi_functions(x: &CMatrix, q: usize) -> Vec<CMatrix> {
    let n = x.nrows();
    let size = n * (q + 1);
    let mut big = CMatrix::zeros(size, size);
    big.view_mut((0, 0), (n, n)).copy_from(x);
    for b in 0..q {
        for i in 0..n {
            big[(b * n + i, (b + 1) * n + i)] = ONE;
        }
    }
    let e = big.exp();
    (0..=q).map(|b| e.view((0, b * n), (n, n)).into_owned()).collect()
}

/// Scalar `phi_k(z)` for k = 0..=q, accurate for small |z|.
pub fn phi_scalar(z: C64, q: usize) -> Vec<C64> {
    let mut out = vec![z.exp()];
    if z.norm() < 0.5 {
        // series: phi_k(z) = sum_j z^j / (j + k)!
        for k in 1..=q {
            let mut term = C64::new(1.0 / factorial(k), 0.0);
            let mut sum = term;
            for j in 1..40 {
                term *= z / (j + k) as f64;
                sum += term;
                if term.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            out.push(sum);
        }
    } else {
        // phi_{k+1}(z) = (phi_k(z) - 1/k!) / z
        for k in 0..q {
            let next = (out[k] - 1.0 / factorial(k)) / z;
            out.push(next);
        }
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// All roots of `sum c_k z^k` (ascending coefficients) by Aberth iteration
/// followed by Newton polishing.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |x| x.norm() == 0.0) {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(vec![]);
    }
    let lead = c[deg];
    c.iter_mut().for_each(|x| *x /= lead);
    let eval = |z: C64| -> (C64, C64) {
        let mut p = ONE;
        let mut dp = ZERO;
        for k in (0..deg).rev() {
            dp = dp * z + p;
            p = p * z + c[k];
        }
        (p, dp)
    };
    let radius = c[0].norm().powf(1.0 / deg as f64).max(1e-3);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let w = p / dp;
            let s: C64 = (0..deg).filter(|&j| j != k).map(|j| ONE / (z[k] - z[j])).sum();
            let step = w / (ONE - w * s);
            if step.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zk in z.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = eval(*zk);
            let step = p / dp;
            if step.is_finite() && step.norm() < 1e-6 * (1.0 + zk.norm()) {
                *zk -= step;
            }
        }
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("root finder produced non-finite roots".into()));
    }
    Ok(z)
}

/// Ordinary least squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// OLS slope of `log y` against `log x` restricted to the middle `frac` of the
/// log-range of `x`. Points with non-finite or non-positive `y` are skipped.
pub fn loglog_slope_middle(x: &[f64], y: &[f64], frac: f64) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let (lo, hi) = lx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let pad = 0.5 * (1.0 - frac) * (hi - lo);
    let (xs, ys): (Vec<f64>, Vec<f64>) = lx
        .iter()
        .zip(y)
        .filter(|(&l, &v)| l >= lo + pad - 1e-12 && l <= hi - pad + 1e-12 && v.is_finite() && v > 0.0)
        .map(|(&l, &v)| (l, v.ln()))
        .unzip();
    ols_slope(&xs, &ys)
}
