//! Discrete GL residual, energy, linearization and nonlinearity on the link model.
//!
//! With D_e = U_e psi(b) - psi(a) the discrete energy is
//! E = dA [1/2 sum_e w_e |D_e|^2 + kappa^2/4 sum_x (1 - |psi|^2)^2] + 1/2 sum_p Phi_p^2 / dA,
//! and the residual F is its gradient in
//! <w, w'> = dA [sum_x Re conj(xi) xi' + sum_e w_e l_e(alpha) l_e(alpha')].
//! The alpha part of that product is Euclidean on square cells; on other cells it keeps
//! the link reflection an isometry. L is the exact Hessian, self-adjoint in <., .>.

use crate::error::{invalid, Result};
use crate::grid::{Background, CellGrid, FieldState, C64};
use crate::sparse::Csr;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// w = (xi, alpha) on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub xi: Vec<C64>,
    pub alpha: Vec<[f64; 2]>,
}

impl Perturbation {
    pub fn zeros(n: usize) -> Self {
        Perturbation { xi: vec![C64::new(0.0, 0.0); n], alpha: vec![[0.0; 2]; n] }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn axpy(&mut self, a: f64, x: &Perturbation) {
        for (p, q) in self.xi.iter_mut().zip(&x.xi) {
            *p += q * a;
        }
        for (p, q) in self.alpha.iter_mut().zip(&x.alpha) {
            p[0] += a * q[0];
            p[1] += a * q[1];
        }
    }

    pub fn scaled(&self, a: f64) -> Perturbation {
        Perturbation {
            xi: self.xi.iter().map(|v| v * a).collect(),
            alpha: self.alpha.iter().map(|v| [a * v[0], a * v[1]]).collect(),
        }
    }

    pub fn add(&self, x: &Perturbation) -> Perturbation {
        let mut r = self.clone();
        r.axpy(1.0, x);
        r
    }

    pub fn sub(&self, x: &Perturbation) -> Perturbation {
        let mut r = self.clone();
        r.axpy(-1.0, x);
        r
    }

    /// Euclidean dot product of the real coordinates (no area factor).
    pub fn raw_dot(&self, x: &Perturbation) -> f64 {
        let a: f64 = self.xi.iter().zip(&x.xi).map(|(p, q)| p.re * q.re + p.im * q.im).sum();
        let b: f64 = self.alpha.iter().zip(&x.alpha).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum();
        a + b
    }

    pub fn dot(&self, x: &Perturbation, bg: &Background) -> f64 {
        let a: f64 = self.xi.iter().zip(&x.xi).map(|(p, q)| p.re * q.re + p.im * q.im).sum();
        bg.grid.da * (a + bg.metric.inner(&self.alpha, &x.alpha))
    }

    pub fn norm(&self, bg: &Background) -> f64 {
        self.dot(self, bg).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let a = self.xi.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let b = self.alpha.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        a.max(b)
    }

    /// Real coordinates (Re xi, Im xi, alpha1, alpha2) per node.
    pub fn to_real(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.len());
        for (x, a) in self.xi.iter().zip(&self.alpha) {
            v.extend_from_slice(&[x.re, x.im, a[0], a[1]]);
        }
        v
    }

    pub fn from_real(v: &[f64]) -> Perturbation {
        let n = v.len() / 4;
        Perturbation {
            xi: (0..n).map(|k| C64::new(v[4 * k], v[4 * k + 1])).collect(),
            alpha: (0..n).map(|k| [v[4 * k + 2], v[4 * k + 3]]).collect(),
        }
    }

    pub fn reflect(&self, g: &CellGrid) -> Perturbation {
        let (xi, alpha) = crate::grid::reflect_fields(g, &self.xi, &self.alpha);
        Perturbation { xi, alpha }
    }

    /// (w - Rw)/2
    pub fn odd_part(&self, g: &CellGrid) -> Perturbation {
        let mut r = self.reflect(g);
        r.axpy(-1.0, self);
        r.scaled(-0.5)
    }

    /// (w + Rw)/2
    pub fn even_part(&self, g: &CellGrid) -> Perturbation {
        let mut r = self.reflect(g);
        r.axpy(1.0, self);
        r.scaled(0.5)
    }

    /// ||w + Rw|| / ||w||, zero for exactly odd w.
    pub fn parity_defect(&self, bg: &Background) -> f64 {
        let n = self.norm(bg);
        if n == 0.0 {
            return 0.0;
        }
        let mut r = self.reflect(&bg.grid);
        r.axpy(1.0, self);
        r.norm(bg) / n
    }
}

impl FieldState {
    pub fn plus(&self, w: &Perturbation) -> FieldState {
        let mut s = self.clone();
        for (p, q) in s.psi.iter_mut().zip(&w.xi) {
            *p += q;
        }
        for (p, q) in s.alpha.iter_mut().zip(&w.alpha) {
            p[0] += q[0];
            p[1] += q[1];
        }
        s
    }

    pub fn minus(&self, other: &FieldState) -> Perturbation {
        Perturbation {
            xi: self.psi.iter().zip(&other.psi).map(|(a, b)| a - b).collect(),
            alpha: self.alpha.iter().zip(&other.alpha).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
        }
    }
}

fn link_values(g: &CellGrid, alpha: &[[f64; 2]]) -> Vec<[f64; 2]> {
    alpha.iter().map(|a| g.links(*a)).collect()
}

fn edge_angle(e: &crate::grid::Edge, links: &[[f64; 2]]) -> f64 {
    e.terms().iter().map(|&(m, k, c)| c * links[m][k]).sum()
}

/// Transport U_e and difference D_e for every edge.
fn edge_data(s: &FieldState) -> (Vec<C64>, Vec<C64>) {
    let links = link_values(s.grid(), &s.alpha);
    let mut u = Vec::with_capacity(s.bg.edges.len());
    let mut d = Vec::with_capacity(s.bg.edges.len());
    for e in &s.bg.edges {
        let ue = e.u0 * C64::from_polar(1.0, -edge_angle(e, &links));
        d.push(ue * s.psi[e.b] - s.psi[e.a]);
        u.push(ue);
    }
    (u, d)
}

fn plaquette_fluxes_from(bg: &Background, links: &[[f64; 2]]) -> Vec<f64> {
    bg.plaquettes.iter().map(|p| p.phi0 + p.links.iter().map(|&(m, k, c)| c * links[m][k]).sum::<f64>()).collect()
}

/// Converts per-link sensitivities dE/dl_k(m) into the alpha part of a gradient.
fn links_to_alpha(g: &CellGrid, dl: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let [e1, e2] = g.e;
    dl.iter().map(|t| [(t[0] * e1[0] + t[1] * e2[0]) / g.da, (t[0] * e1[1] + t[1] * e2[1]) / g.da]).collect()
}

/// GL residual F(u).
pub fn residual_f(s: &FieldState, kappa: f64) -> Perturbation {
    let mut r = energy_gradient(s, kappa);
    r.alpha = s.bg.metric.solve(&r.alpha);
    r
}

/// Euclidean gradient dE / (dA d(real coordinates)); equals F on square cells.
pub fn energy_gradient(s: &FieldState, kappa: f64) -> Perturbation {
    let g = s.grid();
    let np = g.len();
    let k2 = kappa * kappa;
    let (u, d) = edge_data(s);
    let mut xi: Vec<C64> = s.psi.iter().map(|p| -k2 * (1.0 - p.norm_sqr()) * p).collect();
    let mut dl = vec![[0.0; 2]; np];
    for (i, e) in s.bg.edges.iter().enumerate() {
        xi[e.b] += u[i].conj() * d[i] * e.w;
        xi[e.a] -= d[i] * e.w;
        let tau = g.da * e.w * (d[i].conj() * s.psi[e.a]).im;
        for &(m, k, c) in e.terms() {
            dl[m][k] += c * tau;
        }
    }
    let links = link_values(g, &s.alpha);
    for (p, phi) in s.bg.plaquettes.iter().zip(plaquette_fluxes_from(&s.bg, &links)) {
        for &(m, k, c) in &p.links {
            dl[m][k] += c * phi / g.da;
        }
    }
    Perturbation { xi, alpha: links_to_alpha(g, &dl) }
}

pub fn energy(s: &FieldState, kappa: f64) -> f64 {
    let g = s.grid();
    let k2 = kappa * kappa;
    let (_, d) = edge_data(s);
    let kin: f64 = s.bg.edges.iter().zip(&d).map(|(e, d)| 0.5 * e.w * d.norm_sqr()).sum();
    let pot: f64 = s.psi.iter().map(|p| 0.25 * k2 * (1.0 - p.norm_sqr()).powi(2)).sum();
    let links = link_values(g, &s.alpha);
    let mag: f64 = plaquette_fluxes_from(&s.bg, &links).iter().map(|f| 0.5 * f * f / g.da).sum();
    g.da * (kin + pot) + mag
}

pub fn flux(s: &FieldState) -> f64 {
    crate::grid::plaquette_fluxes(s).iter().sum()
}

/// G = E - Phi h.
pub fn gibbs_energy(s: &FieldState, kappa: f64, h: f64) -> f64 {
    energy(s, kappa) - flux(s) * h
}

/// L at a base state, matrix-free.
#[derive(Clone, Debug)]
pub struct OperatorHandle {
    pub base: FieldState,
    pub kappa: f64,
    u: Vec<C64>,
    d: Vec<C64>,
}

impl OperatorHandle {
    pub fn new(base: &FieldState, kappa: f64) -> Self {
        let (u, d) = edge_data(base);
        OperatorHandle { base: base.clone(), kappa, u, d }
    }

    pub fn grid(&self) -> &CellGrid {
        self.base.grid()
    }

    pub fn bg(&self) -> &Arc<Background> {
        &self.base.bg
    }

    fn check(&self, w: &Perturbation) -> Result<()> {
        if w.len() != self.grid().len() || w.alpha.len() != self.grid().len() {
            return invalid(format!("perturbation has {} nodes, grid has {}", w.len(), self.grid().len()));
        }
        Ok(())
    }

    pub fn apply(&self, w: &Perturbation) -> Result<Perturbation> {
        self.check(w)?;
        Ok(self.apply_unchecked(w))
    }

    pub fn apply_unchecked(&self, w: &Perturbation) -> Perturbation {
        let mut r = self.hessian_unchecked(w);
        r.alpha = self.bg().metric.solve(&r.alpha);
        r
    }

    /// Hessian of E / dA in Euclidean coordinates; local and symmetric.
    pub fn hessian_unchecked(&self, w: &Perturbation) -> Perturbation {
        let g = self.grid();
        let np = g.len();
        let k2 = self.kappa * self.kappa;
        let psi = &self.base.psi;
        let mut xi: Vec<C64> =
            psi.iter().zip(&w.xi).map(|(p, x)| k2 * (2.0 * p.norm_sqr() - 1.0) * x + k2 * p * p * x.conj()).collect();
        let mut dl = vec![[0.0; 2]; np];
        let wl = link_values(g, &w.alpha);
        let i1 = C64::new(0.0, 1.0);
        for (i, e) in self.bg().edges.iter().enumerate() {
            let (u, d) = (self.u[i], self.d[i]);
            let dth = edge_angle(e, &wl);
            let dd = u * w.xi[e.b] - i1 * dth * u * psi[e.b] - w.xi[e.a];
            xi[e.b] += (i1 * dth * u.conj() * d + u.conj() * dd) * e.w;
            xi[e.a] -= dd * e.w;
            let dtau = g.da * e.w * (dd.conj() * psi[e.a] + d.conj() * w.xi[e.a]).im;
            for &(m, k, c) in e.terms() {
                dl[m][k] += c * dtau;
            }
        }
        for p in &self.bg().plaquettes {
            let dphi: f64 = p.links.iter().map(|&(m, k, c)| c * wl[m][k]).sum();
            for &(m, k, c) in &p.links {
                dl[m][k] += c * dphi / g.da;
            }
        }
        Perturbation { xi, alpha: links_to_alpha(g, &dl) }
    }

    /// N_v(w) = F(v + w) - F(v) - L w, written out term by term.
    pub fn nonlinearity(&self, w: &Perturbation) -> Perturbation {
        let mut r = self.nonlinearity_raw(w);
        r.alpha = self.bg().metric.solve(&r.alpha);
        r
    }

    fn nonlinearity_raw(&self, w: &Perturbation) -> Perturbation {
        let g = self.grid();
        let np = g.len();
        let k2 = self.kappa * self.kappa;
        let psi = &self.base.psi;
        let mut xi: Vec<C64> = psi
            .iter()
            .zip(&w.xi)
            .map(|(p, x)| {
                let s = 2.0 * (p.conj() * x).re;
                let t = x.norm_sqr();
                k2 * (t * p + s * x + t * x)
            })
            .collect();
        let mut dl = vec![[0.0; 2]; np];
        let wl = link_values(g, &w.alpha);
        let i1 = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        for (i, e) in self.bg().edges.iter().enumerate() {
            let (u, d) = (self.u[i], self.d[i]);
            let dth = edge_angle(e, &wl);
            let ex = C64::from_polar(1.0, -dth);
            let dd = u * w.xi[e.b] - i1 * dth * u * psi[e.b] - w.xi[e.a];
            let d2 = u * ((ex - one + i1 * dth) * psi[e.b] + (ex - one) * w.xi[e.b]);
            let ec = ex.conj();
            xi[e.b] += u.conj() * (d2 + (ec - one - i1 * dth) * d + (ec - one) * (dd + d2)) * e.w;
            xi[e.a] -= d2 * e.w;
            let ntau = g.da * e.w * (d2.conj() * psi[e.a] + (dd + d2).conj() * w.xi[e.a]).im;
            for &(m, k, c) in e.terms() {
                dl[m][k] += c * ntau;
            }
        }
        Perturbation { xi, alpha: links_to_alpha(g, &dl) }
    }

    /// Assembled Hessian H in real coordinates (Re xi, Im xi, alpha1, alpha2) per node.
    /// H is symmetric and L = B^{-1} H with B = metric_matrix.
    pub fn assemble_hessian(&self) -> Csr {
        assemble_stencil_operator(self.grid(), |w| self.hessian_unchecked(w))
    }

    /// |<w', Lw> - <Lw', w>| / (||w|| ||w'|| ||L||_est)
    pub fn symmetry_defect(&self, w: &Perturbation, w2: &Perturbation) -> f64 {
        let bg = self.bg();
        let a = w2.dot(&self.apply_unchecked(w), bg);
        let b = self.apply_unchecked(w2).dot(w, bg);
        (a - b).abs() / (w.norm(bg) * w2.norm(bg) * self.norm_estimate())
    }

    /// Gershgorin-type bound on ||L||: scale of the largest stencil weight.
    pub fn norm_estimate(&self) -> f64 {
        let st = &self.bg().stencil;
        4.0 * (st.w[0] + st.w[1] + st.w[2]) + 2.0 * self.kappa * self.kappa + 8.0 / self.grid().da
    }
}

fn smallest_divisor_at_least(n: usize, k: usize) -> usize {
    (k..=n).find(|d| n % d == 0).unwrap_or(n)
}

/// Assembly of a linear map whose stencil couples only nodes within one lattice step,
/// by probing with colour classes.
pub fn assemble_stencil_operator<F>(g: &CellGrid, apply: F) -> Csr
where
    F: Fn(&Perturbation) -> Perturbation,
{
    let np = g.len();
    let c1 = smallest_divisor_at_least(g.n1, 3);
    let c2 = smallest_divisor_at_least(g.n2, 3);
    let mut t = Vec::new();
    for a in 0..c1 {
        for b in 0..c2 {
            let members: Vec<usize> = (0..np)
                .filter(|&k| {
                    let (i, j) = g.ij(k);
                    i % c1 == a && j % c2 == b
                })
                .collect();
            for comp in 0..4 {
                let mut probe = vec![0.0; 4 * np];
                for &k in &members {
                    probe[4 * k + comp] = 1.0;
                }
                let out = apply(&Perturbation::from_real(&probe)).to_real();
                for row_node in 0..np {
                    let (i, j) = g.ij(row_node);
                    // the unique member of this class within one step
                    let mut col_node = None;
                    for di in -1i64..=1 {
                        for dj in -1i64..=1 {
                            let (m, _, _) = g.wrap(i as i64 + di, j as i64 + dj);
                            let (mi, mj) = g.ij(m);
                            if mi % c1 == a && mj % c2 == b {
                                col_node = Some(m);
                            }
                        }
                    }
                    if let Some(cn) = col_node {
                        for rc in 0..4 {
                            let v = out[4 * row_node + rc];
                            if v != 0.0 {
                                t.push((4 * row_node + rc, 4 * cn + comp, v));
                            }
                        }
                    }
                }
            }
        }
    }
    Csr::from_triplets(4 * np, 4 * np, t)
}

/// G_gamma = (i gamma psi, sum_k (gamma(x + e_k) - gamma(x)) e^k) at the given base.
pub fn gauge_mode(base: &FieldState, gamma: &[f64]) -> Result<Perturbation> {
    let g = base.grid();
    if gamma.len() != g.len() {
        return invalid(format!("gamma has {} values, grid has {} nodes", gamma.len(), g.len()));
    }
    Ok(gauge_mode_unchecked(base, gamma))
}

pub(crate) fn gauge_mode_unchecked(base: &FieldState, gamma: &[f64]) -> Perturbation {
    let g = base.grid();
    let np = g.len();
    let xi = (0..np).map(|k| C64::new(0.0, gamma[k]) * base.psi[k]).collect();
    let alpha = (0..np)
        .map(|k| {
            let (i, j) = g.ij(k);
            let d1 = gamma[g.wrap(i as i64 + 1, j as i64).0] - gamma[k];
            let d2 = gamma[g.wrap(i as i64, j as i64 + 1).0] - gamma[k];
            g.from_links([d1, d2])
        })
        .collect();
    Perturbation { xi, alpha }
}

/// Adjoint of gamma -> G_gamma: Im(conj(psi) xi) - div_w alpha, where
/// div_w alpha(y) = sum_{e from y} w_e l_e(alpha) - sum_{e into y} w_e l_e(alpha).
pub fn gauge_adjoint(base: &FieldState, w: &Perturbation) -> Vec<f64> {
    let g = base.grid();
    let links = link_values(g, &w.alpha);
    let mut out: Vec<f64> = base.psi.iter().zip(&w.xi).map(|(p, x)| (p.conj() * x).im).collect();
    for e in &base.bg.edges {
        let f = e.w * edge_angle(e, &links);
        out[e.b] += f;
        out[e.a] -= f;
    }
    out
}

/// Translation generator T_k = ((grad_a psi)_k, B J e_k), k in {1, 2}, with B taken
/// per link so that T_k is exactly even.
pub fn translation_mode(base: &FieldState, k: usize) -> Result<Perturbation> {
    if k != 1 && k != 2 {
        return invalid(format!("translation index must be 1 or 2, got {k}"));
    }
    let g = base.grid();
    let np = g.len();
    let (u, _) = edge_data(base);
    let per = base.bg.edges.len() / np;
    let links = link_values(g, &base.alpha);
    let phi = plaquette_fluxes_from(&base.bg, &links);
    let mut xi = Vec::with_capacity(np);
    let mut alpha = Vec::with_capacity(np);
    for x in 0..np {
        let (i, j) = g.ij(x);
        let (i, j) = (i as i64, j as i64);
        let mut c = [C64::new(0.0, 0.0); 2];
        for (dir, (di, dj)) in [(1i64, 0i64), (0, 1)].iter().enumerate() {
            let fwd = &base.bg.edges[per * x + dir];
            let prev = g.wrap(i - di, j - dj).0;
            let bwd_idx = per * prev + dir;
            let bwd = &base.bg.edges[bwd_idx];
            c[dir] = 0.5 * (u[per * x + dir] * base.psi[fwd.b] - u[bwd_idx].conj() * base.psi[bwd.a]);
        }
        let d = g.dual;
        let comp = k - 1;
        xi.push(c[0] * d[0][comp] + c[1] * d[1][comp]);
        // field on each link: mean of the two adjacent plaquettes
        let b1 = 0.5 * (phi[x] + phi[g.wrap(i, j - 1).0]) / g.da;
        let b2 = 0.5 * (phi[x] + phi[g.wrap(i - 1, j).0]) / g.da;
        let je = if k == 1 { [0.0, 1.0] } else { [-1.0, 0.0] };
        let l1 = b1 * (je[0] * g.e[0][0] + je[1] * g.e[0][1]);
        let l2 = b2 * (je[0] * g.e[1][0] + je[1] * g.e[1][1]);
        alpha.push(g.from_links([l1, l2]));
    }
    Ok(Perturbation { xi, alpha })
}

/// Plaquette field B at nodes (corner average), for diagnostics and tiling.
pub fn node_field(s: &FieldState) -> Vec<f64> {
    let g = s.grid();
    let phi = crate::grid::plaquette_fluxes(s);
    (0..g.len())
        .map(|x| {
            let (i, j) = g.ij(x);
            let (i, j) = (i as i64, j as i64);
            0.25 * (phi[x] + phi[g.wrap(i - 1, j).0] + phi[g.wrap(i, j - 1).0] + phi[g.wrap(i - 1, j - 1).0]) / g.da
        })
        .collect()
}

/// The inner product as a matrix on real coordinates, without the factor dA.
pub fn metric_matrix(bg: &Background) -> Csr {
    let np = bg.grid.len();
    let mut t = Vec::with_capacity(12 * np);
    for k in 0..np {
        t.push((4 * k, 4 * k, 1.0));
        t.push((4 * k + 1, 4 * k + 1, 1.0));
    }
    for (r, c, v) in bg.metric.m.triplets() {
        t.push((4 * (r / 2) + 2 + r % 2, 4 * (c / 2) + 2 + c % 2, v));
    }
    Csr::from_triplets(4 * np, 4 * np, t)
}

/// Discrete H^1 norm: ||w||^2 plus covariant edge differences of xi and plain
/// differences of alpha.
pub fn h1_norm(base: &FieldState, w: &Perturbation) -> f64 {
    let g = base.grid();
    let (u, _) = edge_data(base);
    let mut s = w.norm(&base.bg).powi(2) / g.da;
    for (i, e) in base.bg.edges.iter().enumerate() {
        let dx = u[i] * w.xi[e.b] - w.xi[e.a];
        let da = [w.alpha[e.b][0] - w.alpha[e.a][0], w.alpha[e.b][1] - w.alpha[e.a][1]];
        s += e.w * (dx.norm_sqr() + da[0] * da[0] + da[1] * da[1]);
    }
    (g.da * s).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearizationCheck {
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

/// ||[F(u + eps w) - F(u)]/eps - Lw|| for a sequence of eps, with observed orders.
pub fn linearization_check(u: &FieldState, w: &Perturbation, kappa: f64, eps: &[f64]) -> LinearizationCheck {
    let f0 = residual_f(u, kappa);
    let lw = OperatorHandle::new(u, kappa).apply_unchecked(w);
    let errors: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let fe = residual_f(&u.plus(&w.scaled(e)), kappa);
            let mut q = fe.sub(&f0).scaled(1.0 / e);
            q.axpy(-1.0, &lw);
            q.norm(&u.bg)
        })
        .collect();
    let orders = errors.windows(2).zip(eps.windows(2)).map(|(r, e)| (r[0] / r[1]).ln() / (e[0] / e[1]).ln()).collect();
    LinearizationCheck { eps: eps.to_vec(), errors, orders }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticeShape;
    use crate::grid::{build_grid, Background, RadialProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Synthetic(i32);
    impl RadialProfile for Synthetic {
        fn n(&self) -> i32 {
            self.0
        }
        fn fa(&self, r: f64) -> (f64, f64) {
            let t = r.tanh();
            (t.powi(self.0.abs()), t * t)
        }
        fn r_max(&self) -> f64 {
            100.0
        }
    }

    fn vortex_state(shape: LatticeShape, nn: usize) -> FieldState {
        let g = build_grid(&shape, nn, nn).unwrap();
        FieldState::background(&Background::vortex(Arc::new(Synthetic(1)), &g).unwrap())
    }

    fn random_w(np: usize, scale: f64, rng: &mut ChaCha8Rng) -> Perturbation {
        Perturbation {
            xi: (0..np).map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))).collect(),
            alpha: (0..np).map(|_| [rng.random_range(-scale..scale), rng.random_range(-scale..scale)]).collect(),
        }
    }

    #[test]
    fn perfect_superconductor_is_a_solution() {
        let g = build_grid(&LatticeShape::square(8.0), 16, 16).unwrap();
        let s = FieldState::background(&Background::trivial(&g).unwrap());
        assert!(residual_f(&s, 1.3).max_abs() < 1e-14);
        assert_eq!(energy(&s, 1.3), 0.0);
        assert_eq!(gibbs_energy(&s, 1.3, 0.7), 0.0);
    }

    #[test]
    fn normal_state_psi_equation() {
        let mut s = vortex_state(LatticeShape::square(8.0), 32);
        s.psi.iter_mut().for_each(|p| *p = C64::new(0.0, 0.0));
        assert!(residual_f(&s, 1.0).xi.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn trivial_base_blocks() {
        // psi = 1, a = 0: the psi block is -Delta + 2 kappa^2 on real parts and
        // -Delta on imaginary parts (before the gauge coupling).
        let g = build_grid(&LatticeShape::square(8.0), 16, 16).unwrap();
        let s = FieldState::background(&Background::trivial(&g).unwrap());
        let k = 0.9;
        let m = OperatorHandle::new(&s, k).assemble_hessian();
        let node = g.idx(5, 7);
        let w = g.bg_stencil_weight();
        assert!((m.get(4 * node, 4 * node) - (4.0 * w + 2.0 * k * k)).abs() < 1e-12);
        assert!((m.get(4 * node, 4 * g.idx(6, 7)) + w).abs() < 1e-12);
        assert!(m.get(4 * node, 4 * node + 1).abs() < 1e-14);
        assert!((m.get(4 * node + 1, 4 * node + 1) - 4.0 * w).abs() < 1e-12);
    }

    impl CellGrid {
        fn bg_stencil_weight(&self) -> f64 {
            self.stencil().unwrap().w[0]
        }
    }

    #[test]
    fn hessian_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for shape in [LatticeShape::square(8.0), LatticeShape::triangular(8.0)] {
            let v = vortex_state(shape, 24);
            let g = v.grid().clone();
            let bg = v.bg.clone();
            let base = v.plus(&random_w(g.len(), 0.05, &mut rng));
            let op = OperatorHandle::new(&base, 1.2);
            for _ in 0..10 {
                let a = random_w(g.len(), 1.0, &mut rng);
                let b = random_w(g.len(), 1.0, &mut rng);
                assert!(op.symmetry_defect(&a, &b) < 1e-14);
            }
            let w = random_w(g.len(), 1e-2, &mut rng);
            let lhs = residual_f(&base.plus(&w), 1.2);
            let mut d = lhs.sub(&residual_f(&base, 1.2));
            d.axpy(-1.0, &op.apply_unchecked(&w));
            d.axpy(-1.0, &op.nonlinearity(&w));
            assert!(d.norm(&bg) < 1e-12 * lhs.norm(&bg), "{}", d.norm(&bg) / lhs.norm(&bg));
            let chk = linearization_check(&base, &random_w(g.len(), 1.0, &mut rng), 1.2, &[1e-3, 1e-4, 1e-5]);
            assert!(chk.orders.iter().all(|o| (o - 1.0).abs() < 0.1), "{chk:?}");
            let m = op.assemble_hessian();
            assert!(m.symmetry_defect() < 1e-13);
            let x = random_w(g.len(), 1.0, &mut rng);
            let y1 = m.matvec(&x.to_real());
            let y2 = op.hessian_unchecked(&x).to_real();
            let y3 = metric_matrix(&bg).matvec(&op.apply_unchecked(&x).to_real());
            assert!(y1.iter().zip(&y3).all(|(p, q)| (p - q).abs() < 1e-9));
            assert!(y1.iter().zip(&y2).all(|(p, q)| (p - q).abs() < 1e-10));
        }
    }

    #[test]
    fn nonlinearity_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = vortex_state(LatticeShape::square(8.0), 24);
        let g = v.grid().clone();
        let bg = v.bg.clone();
        let op = OperatorHandle::new(&v, 1.5);
        let w = random_w(g.len(), 1.0, &mut rng);
        assert_eq!(op.nonlinearity(&Perturbation::zeros(g.len())).max_abs(), 0.0);
        let n1 = op.nonlinearity(&w.scaled(1e-3)).norm(&bg);
        let n2 = op.nonlinearity(&w.scaled(1e-4)).norm(&bg);
        assert!(((n1 / n2).log10() - 2.0).abs() < 0.05);
    }

    #[test]
    fn gauge_covariance_and_exact_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = vortex_state(LatticeShape::triangular(8.0), 24);
        let g = v.grid().clone();
        let bg = v.bg.clone();
        let u = v.plus(&random_w(g.len(), 0.1, &mut rng));
        let chi: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        // finite gauge transformation: psi -> e^{i chi} psi, links shift by d chi
        let mut ut = u.clone();
        for k in 0..g.len() {
            ut.psi[k] *= C64::from_polar(1.0, chi[k]);
        }
        let gm = gauge_mode_unchecked(&u, &chi);
        for k in 0..g.len() {
            ut.alpha[k][0] += gm.alpha[k][0];
            ut.alpha[k][1] += gm.alpha[k][1];
        }
        let (e0, e1) = (energy(&u, 1.1), energy(&ut, 1.1));
        assert!((e0 - e1).abs() < 1e-12 * e0);
        let (b0, b1) = (node_field(&u), node_field(&ut));
        assert!(b0.iter().zip(&b1).all(|(p, q)| (p - q).abs() < 1e-12));
        // <G_gamma, F(u)> vanishes identically
        let f = residual_f(&u, 1.1);
        let gm = gauge_mode_unchecked(&u, &chi);
        assert!(gm.dot(&f, &bg).abs() < 1e-11 * gm.norm(&bg) * f.norm(&bg));
        // adjoint
        let w = random_w(g.len(), 1.0, &mut rng);
        let lhs = gm.dot(&w, &bg);
        let rhs: f64 = g.da * gauge_adjoint(&u, &w).iter().zip(&chi).map(|(p, q)| p * q).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        let c = gauge_mode(&u, &vec![0.7; g.len()]).unwrap();
        assert!(c.alpha.iter().all(|a| a[0].abs() < 1e-15 && a[1].abs() < 1e-15));
        assert!(gauge_mode(&u, &[0.0; 3]).is_err());
    }

    #[test]
    fn translation_modes_are_even_and_orthogonal_to_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = vortex_state(LatticeShape::square(8.0), 32);
        let g = v.grid().clone();
        let bg = v.bg.clone();
        for k in [1, 2] {
            let t = translation_mode(&v, k).unwrap();
            assert!(t.odd_part(&g).norm(&bg) < 1e-12 * t.norm(&bg));
            let w = random_w(g.len(), 1.0, &mut rng).odd_part(&g);
            assert!(t.dot(&w, &bg).abs() < 1e-12 * t.norm(&bg) * w.norm(&bg));
        }
        assert!(translation_mode(&v, 3).is_err());
    }

    #[test]
    fn parity_commutes_with_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = vortex_state(LatticeShape::triangular(8.0), 24);
        let g = v.grid().clone();
        let bg = v.bg.clone();
        let op = OperatorHandle::new(&v, 1.5);
        let w = random_w(g.len(), 1.0, &mut rng);
        let a = op.apply_unchecked(&w.reflect(&g));
        let b = op.apply_unchecked(&w).reflect(&g);
        assert!(a.sub(&b).norm(&bg) < 1e-12 * a.norm(&bg));
        let r = residual_f(&v, 1.5);
        assert!(r.parity_defect(&bg) < 1e-12);
    }
}
