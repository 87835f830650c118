//! Krylov tools: preconditioned CG and shift-invert Lanczos for A v = lambda B v.

use crate::error::{GlError, Result};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for an operator self-adjoint and positive in
/// `inner`. Stops when the `inner`-norm of the residual drops below `abs_tol`.
pub fn pcg<A, P, I>(
    apply: A,
    precond: P,
    inner: I,
    b: &[f64],
    x0: Option<Vec<f64>>,
    abs_tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    let mut r: Vec<f64> = if x.iter().all(|v| *v == 0.0) {
        b.to_vec()
    } else {
        let ax = apply(&x);
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    };
    let mut rn = inner(&r, &r).max(0.0).sqrt();
    if rn <= abs_tol {
        return CgOutcome { x, iterations: 0, residual: rn, converged: true };
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = inner(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = inner(&p, &ap);
        if !(pap > 0.0) || !(rz > 0.0) {
            return CgOutcome { x, iterations: it, residual: rn, converged: false };
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        rn = inner(&r, &r).max(0.0).sqrt();
        if rn <= abs_tol {
            return CgOutcome { x, iterations: it, residual: rn, converged: true };
        }
        z = precond(&r);
        let rz_new = inner(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { x, iterations: max_iter, residual: rn, converged: false }
}

/// Preconditioned MINRES for operators self-adjoint in `inner` but possibly indefinite;
/// the preconditioner must be positive. Convergence is judged on the true `inner`-norm
/// residual.
pub fn pminres<A, P, I>(apply: A, precond: P, inner: I, b: &[f64], abs_tol: f64, max_iter: usize) -> CgOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let true_res = |x: &[f64]| {
        let ax = apply(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        inner(&r, &r).max(0.0).sqrt()
    };
    let bn = inner(b, b).max(0.0).sqrt();
    if bn <= abs_tol {
        return CgOutcome { x, iterations: 0, residual: bn, converged: true };
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = precond(&r1);
    let b1 = inner(&r1, &y);
    if !(b1 > 0.0) {
        return CgOutcome { x, iterations: 0, residual: bn, converged: false };
    }
    let mut beta = b1.sqrt();
    let mut oldb = 0.0;
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut residual = bn;
    for it in 1..=max_iter {
        let v: Vec<f64> = y.iter().map(|t| t / beta).collect();
        y = apply(&v);
        if it >= 2 {
            let c = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= c * ri;
            }
        }
        let alfa = inner(&v, &y);
        let c = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= c * ri;
        }
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2);
        oldb = beta;
        let bb = inner(&r2, &y);
        if bb < 0.0 {
            return CgOutcome { x, iterations: it, residual, converged: false };
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w);
        w = (0..n).map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma).collect();
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += phi * wi;
        }
        if it % 5 == 0 || phibar <= abs_tol || beta == 0.0 {
            residual = true_res(&x);
            if residual <= abs_tol {
                return CgOutcome { x, iterations: it, residual, converged: true };
            }
            if beta == 0.0 {
                break;
            }
        }
    }
    residual = true_res(&x);
    CgOutcome { converged: residual <= abs_tol, x, iterations: max_iter, residual }
}

/// Eigen-decomposition of a dense symmetric matrix, ascending.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| GlError::Linalg(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let vals = (0..n).map(|i| s[i]).collect();
    let vecs = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

/// Generalized symmetric problem A v = lambda B v with B positive definite, given
/// through its actions and a solver for (A - sigma B).
pub struct ShiftInvert<'a> {
    pub dim: usize,
    pub sigma: f64,
    pub apply_a: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub apply_b: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub solve_shifted: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
}

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// B-normalized eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// Euclidean norms of A v - lambda B v.
    pub residuals: Vec<f64>,
    pub krylov_dim: usize,
}

fn bdot(bx: &[f64], y: &[f64]) -> f64 {
    bx.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// k eigenvalues closest to sigma from above (the lowest ones when sigma lies below the
/// spectrum), by Lanczos on (A - sigma B)^{-1} B with full reorthogonalization.
pub fn lowest_eigenpairs(p: &ShiftInvert, k: usize, tol: f64, max_dim: usize, seed: u64) -> Result<Eigenpairs> {
    let n = p.dim;
    let k = k.min(n);
    let max_dim = max_dim.min(n).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut bq: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best: Option<Eigenpairs> = None;
    let mut next_check = (2 * k + 10).min(max_dim);
    loop {
        // B-orthonormalize v against the basis
        for _ in 0..2 {
            for (qj, bqj) in q.iter().zip(&bq) {
                let c = bdot(bqj, &v);
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= c * qi;
                }
            }
        }
        let bv = (p.apply_b)(&v);
        let nv = bdot(&bv, &v).max(0.0).sqrt();
        if !(nv > 1e-300) || !nv.is_finite() {
            break;
        }
        if !q.is_empty() {
            beta.push(nv);
        }
        let vn: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let bvn: Vec<f64> = bv.iter().map(|x| x / nv).collect();
        q.push(vn);
        bq.push(bvn);
        let j = q.len() - 1;
        let w = (p.solve_shifted)(&bq[j]);
        alpha.push(bdot(&bq[j], &w));
        v = w;
        let m = q.len();
        if m >= next_check || m >= max_dim {
            let mut t = vec![vec![0.0; m]; m];
            for i in 0..m {
                t[i][i] = alpha[i];
                if i + 1 < m {
                    t[i][i + 1] = beta[i];
                    t[i + 1][i] = beta[i];
                }
            }
            let (theta, s) = symmetric_eigen(&t)?;
            // largest theta give the eigenvalues closest to sigma from above
            let mut order: Vec<usize> = (0..m).filter(|&i| theta[i] > 0.0).collect();
            order.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap());
            let take: Vec<usize> = order.into_iter().take(k).collect();
            let mut res = Eigenpairs { values: vec![], vectors: vec![], residuals: vec![], krylov_dim: m };
            for &i in &take {
                let mut y = vec![0.0; n];
                for (c, qj) in s[i].iter().zip(&q) {
                    for (yi, qi) in y.iter_mut().zip(qj) {
                        *yi += c * qi;
                    }
                }
                let by = (p.apply_b)(&y);
                let ny = bdot(&by, &y).sqrt();
                y.iter_mut().for_each(|x| *x /= ny);
                let by: Vec<f64> = by.iter().map(|x| x / ny).collect();
                let ay = (p.apply_a)(&y);
                let lam = bdot(&ay, &y);
                let r = ay.iter().zip(&by).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
                res.values.push(lam);
                res.vectors.push(y);
                res.residuals.push(r);
            }
            let mut idx: Vec<usize> = (0..res.values.len()).collect();
            idx.sort_by(|&a, &b| res.values[a].partial_cmp(&res.values[b]).unwrap());
            let res = Eigenpairs {
                values: idx.iter().map(|&i| res.values[i]).collect(),
                vectors: idx.iter().map(|&i| res.vectors[i].clone()).collect(),
                residuals: idx.iter().map(|&i| res.residuals[i]).collect(),
                krylov_dim: m,
            };
            let done = res.values.len() == k && res.residuals.iter().all(|r| *r <= tol);
            best = Some(res);
            if done || m >= max_dim {
                break;
            }
            next_check = (m + m / 2).min(max_dim);
        }
    }
    let res = best.ok_or_else(|| GlError::Linalg("Lanczos produced no Ritz pairs".into()))?;
    if res.values.len() < k || res.residuals.iter().any(|r| *r > tol) {
        return Err(GlError::NonConvergence {
            what: "shift-invert Lanczos".into(),
            iterations: res.krylov_dim,
            residual: res.residuals.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{Csr, SparseCholesky};

    fn laplace1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn cg_solves_spd() {
        let a = laplace1d(200);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let out = pcg(|x| a.matvec(x), |r| r.to_vec(), |x, y| crate::sparse::dot(x, y), &b, None, 1e-10, 1000);
        assert!(out.converged);
        let r = a.matvec(&out.x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn lanczos_matches_analytic_spectrum() {
        let n = 300;
        let a = laplace1d(n);
        let sigma = -0.01;
        let chol = SparseCholesky::new(&a.shifted(-sigma)).unwrap();
        let aa = |x: &[f64]| a.matvec(x);
        let bb = |x: &[f64]| x.to_vec();
        let ss = |x: &[f64]| chol.solve(x);
        let p = ShiftInvert { dim: n, sigma, apply_a: &aa, apply_b: &bb, solve_shifted: &ss };
        let e = lowest_eigenpairs(&p, 5, 1e-10, 200, 1).unwrap();
        for (j, l) in e.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((l - exact).abs() < 1e-12, "{l} {exact}");
        }
    }

    #[test]
    fn minres_solves_indefinite() {
        let a = laplace1d(150).shifted(-0.5);
        let b: Vec<f64> = (0..150).map(|i| (i as f64 * 0.3).cos()).collect();
        let out = pminres(|x| a.matvec(x), |r| r.to_vec(), |x, y| crate::sparse::dot(x, y), &b, 1e-10, 2000);
        assert!(out.converged, "{}", out.residual);
        let r = a.matvec(&out.x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn dense_eigen() {
        let (v, _) = symmetric_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }
}
