//! Gauge-orthogonal projection: P w = G_gamma with (G*G) gamma = G* w.

use crate::error::{GlError, Result};
use crate::grid::{FieldState, C64};
use crate::krylov::pcg;
use crate::operator::{gauge_adjoint, gauge_mode_unchecked, Perturbation};
use crate::sparse::Csr;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct GaugeProjector {
    base: FieldState,
    rho: Vec<f64>,
    symbol: Vec<f64>,
    row: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    col: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    pub rel_tol: f64,
}

impl std::fmt::Debug for GaugeProjector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaugeProjector").field("nodes", &self.rho.len()).finish()
    }
}

impl GaugeProjector {
    pub fn new(base: &FieldState) -> Result<Self> {
        let g = base.grid();
        let rho: Vec<f64> = base.psi.iter().map(|p| p.norm_sqr()).collect();
        let c = rho.iter().sum::<f64>() / rho.len() as f64;
        if !(c > 1e-12) {
            return Err(GlError::Singular("gauge normal operator needs psi not identically zero".into()));
        }
        let st = &base.bg.stencil;
        let mut dirs = vec![(1.0, 0.0, st.w[0]), (0.0, 1.0, st.w[1])];
        if st.w[2] > 0.0 {
            dirs.push((st.sigma as f64, 1.0, st.w[2]));
        }
        let tau = 2.0 * std::f64::consts::PI;
        let mut symbol = Vec::with_capacity(g.len());
        for p in 0..g.n1 {
            for q in 0..g.n2 {
                let mut s = c;
                for &(di, dj, w) in &dirs {
                    let ph = tau * (p as f64 * di / g.n1 as f64 + q as f64 * dj / g.n2 as f64);
                    s += 2.0 * w * (1.0 - ph.cos());
                }
                symbol.push(s);
            }
        }
        let mut pl = FftPlanner::new();
        let row = (pl.plan_fft_forward(g.n2), pl.plan_fft_inverse(g.n2));
        let col = (pl.plan_fft_forward(g.n1), pl.plan_fft_inverse(g.n1));
        Ok(GaugeProjector { base: base.clone(), rho, symbol, row, col, rel_tol: 1e-14 })
    }

    /// (G*G) gamma = |psi|^2 gamma - div_w d gamma.
    pub fn normal_apply(&self, gamma: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.rho.iter().zip(gamma).map(|(r, g)| r * g).collect();
        for e in &self.base.bg.edges {
            let d = e.w * (gamma[e.b] - gamma[e.a]);
            out[e.b] += d;
            out[e.a] -= d;
        }
        out
    }

    /// G* as a sparse matrix on real coordinates (Re xi, Im xi, alpha1, alpha2).
    pub fn adjoint_matrix(&self) -> Csr {
        let g = self.base.grid();
        let np = g.len();
        let mut t = Vec::new();
        for (k, p) in self.base.psi.iter().enumerate() {
            // Im(conj(psi) xi) = Re psi Im xi - Im psi Re xi
            t.push((k, 4 * k, -p.im));
            t.push((k, 4 * k + 1, p.re));
        }
        for e in &self.base.bg.edges {
            for &(m, kk, c) in e.terms() {
                for comp in 0..2 {
                    let v = e.w * c * g.e[kk][comp];
                    t.push((e.b, 4 * m + 2 + comp, v));
                    t.push((e.a, 4 * m + 2 + comp, -v));
                }
            }
        }
        Csr::from_triplets(np, 4 * np, t)
    }

    fn fft2(&self, data: &mut [C64], forward: bool) {
        let g = self.base.grid();
        let (n1, n2) = (g.n1, g.n2);
        let (rf, cf) = if forward { (&self.row.0, &self.col.0) } else { (&self.row.1, &self.col.1) };
        for r in data.chunks_exact_mut(n2) {
            rf.process(r);
        }
        let mut colbuf = vec![C64::new(0.0, 0.0); n1];
        for j in 0..n2 {
            for i in 0..n1 {
                colbuf[i] = data[i * n2 + j];
            }
            cf.process(&mut colbuf);
            for i in 0..n1 {
                data[i * n2 + j] = colbuf[i];
            }
        }
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let mut d: Vec<C64> = r.iter().map(|v| C64::new(*v, 0.0)).collect();
        self.fft2(&mut d, true);
        for (x, s) in d.iter_mut().zip(&self.symbol) {
            *x /= *s;
        }
        self.fft2(&mut d, false);
        let scale = 1.0 / r.len() as f64;
        d.iter().map(|v| v.re * scale).collect()
    }

    pub fn solve_normal(&self, rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        let nb = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb == 0.0 {
            return Ok((vec![0.0; rhs.len()], 0));
        }
        let out = pcg(
            |x| self.normal_apply(x),
            |r| self.precondition(r),
            |a, b| a.iter().zip(b).map(|(p, q)| p * q).sum(),
            rhs,
            None,
            self.rel_tol * nb,
            2000,
        );
        if !out.converged {
            return Err(GlError::NonConvergence {
                what: "gauge normal equation".into(),
                iterations: out.iterations,
                residual: out.residual / nb,
            });
        }
        Ok((out.x, out.iterations))
    }

    /// gamma* with P w = G_{gamma*}.
    pub fn gauge_component(&self, w: &Perturbation) -> Result<Vec<f64>> {
        Ok(self.solve_normal(&gauge_adjoint(&self.base, w))?.0)
    }

    /// P-bar w = w - G_{gamma*}.
    pub fn project(&self, w: &Perturbation) -> Result<Perturbation> {
        let gamma = self.gauge_component(w)?;
        let mut out = w.clone();
        out.axpy(-1.0, &gauge_mode_unchecked(&self.base, &gamma));
        Ok(out)
    }

    /// ||P w|| / ||w||: the largest |<G_gamma, w>| / (||G_gamma|| ||w||) over all gamma.
    pub fn pairing(&self, w: &Perturbation) -> Result<f64> {
        let nw = w.norm(&self.base.bg);
        if nw == 0.0 {
            return Ok(0.0);
        }
        let gamma = self.gauge_component(w)?;
        Ok(gauge_mode_unchecked(&self.base, &gamma).norm(&self.base.bg) / nw)
    }
}

/// One-shot P-bar w at the given base.
pub fn project_gauge_orthogonal(base: &FieldState, w: &Perturbation) -> Result<Perturbation> {
    GaugeProjector::new(base)?.project(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticeShape;
    use crate::grid::{build_grid, Background, RadialProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Synthetic;
    impl RadialProfile for Synthetic {
        fn n(&self) -> i32 {
            1
        }
        fn fa(&self, r: f64) -> (f64, f64) {
            (r.tanh(), r.tanh().powi(2))
        }
        fn r_max(&self) -> f64 {
            100.0
        }
    }

    fn random_w(np: usize, rng: &mut ChaCha8Rng) -> Perturbation {
        Perturbation {
            xi: (0..np).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
            alpha: (0..np).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
        }
    }

    #[test]
    fn projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for shape in [LatticeShape::square(8.0), LatticeShape::triangular(8.0)] {
            let g = build_grid(&shape, 24, 24).unwrap();
            let v = FieldState::background(&Background::vortex(Arc::new(Synthetic), &g).unwrap());
            let bg = v.bg.clone();
            let pr = GaugeProjector::new(&v).unwrap();
            let w = random_w(g.len(), &mut rng);
            let pw = pr.project(&w).unwrap();
            // orthogonal to every G_gamma
            let adj = gauge_adjoint(&v, &pw);
            assert!(adj.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-11);
            let ppw = pr.project(&pw).unwrap();
            assert!(ppw.sub(&pw).norm(&bg) < 1e-12 * pw.norm(&bg));
            let gamma: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gm = gauge_mode_unchecked(&v, &gamma);
            assert!(pr.project(&gm).unwrap().norm(&bg) < 1e-11 * gm.norm(&bg));
            assert!((pr.pairing(&gm).unwrap() - 1.0).abs() < 1e-10);
            assert!(pr.pairing(&pw).unwrap() < 1e-11);
            // sparse adjoint agrees with the matrix-free one
            let a = pr.adjoint_matrix().matvec(&w.to_real());
            let b = gauge_adjoint(&v, &w);
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn preconditioner_is_exact_on_uniform_background() {
        let g = build_grid(&LatticeShape::square(8.0), 16, 16).unwrap();
        let v = FieldState::background(&Background::trivial(&g).unwrap());
        let pr = GaugeProjector::new(&v).unwrap();
        let rhs: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let (x, it) = pr.solve_normal(&rhs).unwrap();
        assert!(it <= 2);
        let r = pr.normal_apply(&x);
        assert!(r.iter().zip(&rhs).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}
