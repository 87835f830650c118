//! Staggered grid on the fundamental cell, cutoffs, link-variable background and
//! field states.
//!
//! Nodes sit at lattice coordinates -1/2 + (k + 1/2)/N, so the origin is the centre of
//! a plaquette. Every edge carries the physical line integral of the background
//! potential between its (possibly out-of-cell) endpoints, and the wrap factor
//! e^{i g_s} that maps the far endpoint back into the cell.

use crate::error::{invalid, GlError, Result};
use crate::geometry::{LatticeShape, LatticeVector};
use crate::profile::{winding_phase, VortexProfile};
use crate::quad::gauss_legendre01;
use crate::sparse::{Csr, SparseCholesky};
use num_complex::Complex64;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct CellGrid {
    pub shape: LatticeShape,
    pub n1: usize,
    pub n2: usize,
    pub stagger: bool,
    /// Edge vectors w1/N1 and w2/N2.
    pub e: [[f64; 2]; 2],
    /// Dual basis: dual[k] . e[j] = delta_kj.
    pub dual: [[f64; 2]; 2],
    /// Area per node.
    pub da: f64,
}

pub fn build_grid(shape: &LatticeShape, n1: usize, n2: usize) -> Result<CellGrid> {
    if n1 % 2 != 0 || n2 % 2 != 0 || n1 < 16 || n2 < 16 {
        return invalid(format!("grid sizes must be even and at least 16, got {n1}x{n2}"));
    }
    let e1 = [shape.omega1[0] / n1 as f64, shape.omega1[1] / n1 as f64];
    let e2 = [shape.omega2[0] / n2 as f64, shape.omega2[1] / n2 as f64];
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let dual = [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]];
    Ok(CellGrid { shape: shape.clone(), n1, n2, stagger: true, e: [e1, e2], dual, da: det.abs() })
}

impl CellGrid {
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index, i outer.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    /// Physical position of integer node (i, j), which may lie outside the cell.
    pub fn lattice_point(&self, i: i64, j: i64) -> [f64; 2] {
        let s1 = -0.5 + (i as f64 + 0.5) / self.n1 as f64;
        let s2 = -0.5 + (j as f64 + 0.5) / self.n2 as f64;
        self.shape.point(s1, s2)
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        self.lattice_point(i as i64, j as i64)
    }

    /// Wrapped node and the lattice shift (m1, m2) with physical = wrapped + m1 w1 + m2 w2.
    pub fn wrap(&self, i: i64, j: i64) -> (usize, i64, i64) {
        let (n1, n2) = (self.n1 as i64, self.n2 as i64);
        let m1 = i.div_euclid(n1);
        let m2 = j.div_euclid(n2);
        (self.idx(i.rem_euclid(n1) as usize, j.rem_euclid(n2) as usize), m1, m2)
    }

    /// Node at -x.
    pub fn reflect_index(&self, k: usize) -> usize {
        let (i, j) = self.ij(k);
        self.idx(self.n1 - 1 - i, self.n2 - 1 - j)
    }

    /// Start node of the reflected k-link: -y - e_k.
    pub fn reflect_link_index(&self, node: usize, k: usize) -> usize {
        let (i, j) = self.ij(node);
        let (i, j) = (i as i64, j as i64);
        let (n1, n2) = (self.n1 as i64, self.n2 as i64);
        let (ri, rj) = if k == 0 { (n1 - 2 - i, n2 - 1 - j) } else { (n1 - 1 - i, n2 - 2 - j) };
        self.wrap(ri, rj).0
    }

    /// Link values l_k = alpha . e_k.
    pub fn links(&self, a: [f64; 2]) -> [f64; 2] {
        [a[0] * self.e[0][0] + a[1] * self.e[0][1], a[0] * self.e[1][0] + a[1] * self.e[1][1]]
    }

    /// Cartesian vector with the given link values.
    pub fn from_links(&self, l: [f64; 2]) -> [f64; 2] {
        [l[0] * self.dual[0][0] + l[1] * self.dual[1][0], l[0] * self.dual[0][1] + l[1] * self.dual[1][1]]
    }

    /// Kinetic stencil: edges e1, e2 and possibly e3 = e2 + sigma e1, with weights
    /// solving sum_k w_k e_k e_k^T = I.
    pub fn stencil(&self) -> Result<Stencil> {
        let [e1, e2] = self.e;
        let try_sigma = |sg: f64| {
            let e3 = [e2[0] + sg * e1[0], e2[1] + sg * e1[1]];
            // rows: xx, xy, yy
            let m = [
                [e1[0] * e1[0], e2[0] * e2[0], e3[0] * e3[0]],
                [e1[0] * e1[1], e2[0] * e2[1], e3[0] * e3[1]],
                [e1[1] * e1[1], e2[1] * e2[1], e3[1] * e3[1]],
            ];
            let w = solve3(m, [1.0, 0.0, 1.0])?;
            let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut w = w;
            if w[2].abs() <= 1e-13 * scale {
                w[2] = 0.0;
            }
            if w.iter().any(|&v| v < -1e-13 * scale) {
                return None;
            }
            Some((sg, e3, w))
        };
        let first = if self.shape.tau.re >= 0.0 { -1.0 } else { 1.0 };
        let (sg, e3, w) = try_sigma(first)
            .or_else(|| try_sigma(-first))
            .ok_or_else(|| GlError::Shape("no nonnegative three-direction stencil".into()))?;
        Ok(Stencil { sigma: sg as i64, e3, w })
    }
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for c in 0..3 {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        x[c] = det(mc) / d;
    }
    Some(x)
}

#[derive(Clone, Debug)]
pub struct Stencil {
    pub sigma: i64,
    pub e3: [f64; 2],
    pub w: [f64; 3],
}

/// Radial cutoff with eta = 1 on |x| <= R/3 and eta = 0 on |x| >= 2R/5, joined by a
/// quintic smoothstep.
#[derive(Clone, Copy, Debug)]
pub struct CutoffPair {
    pub r: f64,
}

pub fn build_cutoffs(shape: &LatticeShape) -> Result<CutoffPair> {
    if shape.r < 5.0 {
        return invalid(format!("cutoffs need R >= 5, got {}", shape.r));
    }
    Ok(CutoffPair { r: shape.r })
}

impl CutoffPair {
    fn t(&self, rho: f64) -> f64 {
        let (r0, r1) = (self.r / 3.0, 0.4 * self.r);
        ((rho - r0) / (r1 - r0)).clamp(0.0, 1.0)
    }

    fn width(&self) -> f64 {
        0.4 * self.r - self.r / 3.0
    }

    pub fn eta_r(&self, rho: f64) -> f64 {
        let t = self.t(rho);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }

    pub fn deta_r(&self, rho: f64) -> f64 {
        let t = self.t(rho);
        -30.0 * t * t * (1.0 - t) * (1.0 - t) / self.width()
    }

    pub fn d2eta_r(&self, rho: f64) -> f64 {
        let t = self.t(rho);
        -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / self.width().powi(2)
    }

    pub fn eta(&self, x: [f64; 2]) -> f64 {
        self.eta_r(x[0].hypot(x[1]))
    }

    pub fn eta_bar(&self, x: [f64; 2]) -> f64 {
        1.0 - self.eta(x)
    }

    pub fn grad_eta(&self, x: [f64; 2]) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = self.deta_r(r);
        [d * x[0] / r, d * x[1] / r]
    }
}

/// Radial data (f, a) of the background.
pub trait RadialProfile: Send + Sync {
    fn n(&self) -> i32;
    fn fa(&self, r: f64) -> (f64, f64);
    fn r_max(&self) -> f64;
}

impl RadialProfile for VortexProfile {
    fn n(&self) -> i32 {
        self.n
    }
    fn fa(&self, r: f64) -> (f64, f64) {
        let e = self.eval(r);
        (e[0], e[2])
    }
    fn r_max(&self) -> f64 {
        VortexProfile::r_max(self)
    }
}

/// Covariant difference along an edge: D = u0 e^{-i l} psi(b) - psi(a) with
/// l = sum_t coef_t * l_{k_t}(node_t).
#[derive(Clone, Debug)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
    pub u0: C64,
    pub terms: [(usize, usize, f64); 4],
    pub nterms: usize,
}

impl Edge {
    pub fn terms(&self) -> &[(usize, usize, f64)] {
        &self.terms[..self.nterms]
    }
}

/// Plaquette at a cell node: background flux plus the oriented periodic links.
#[derive(Clone, Debug)]
pub struct Plaquette {
    pub phi0: f64,
    pub links: [(usize, usize, f64); 4],
}

pub struct Background {
    pub grid: CellGrid,
    pub n: i32,
    pub cutoff: CutoffPair,
    pub profile: Option<Arc<dyn RadialProfile>>,
    pub psi0: Vec<C64>,
    pub a0: Vec<[f64; 2]>,
    pub edges: Vec<Edge>,
    pub plaquettes: Vec<Plaquette>,
    pub stencil: Stencil,
    pub metric: AlphaMetric,
}

/// Inner product on alpha: sum_e w_e l_e(alpha) l_e(alpha'), with l_e the edge angle.
/// On square cells this is the Euclidean product of the node vectors.
pub struct AlphaMetric {
    pub m: Csr,
    chol: Option<SparseCholesky>,
}

impl AlphaMetric {
    fn from_edges(grid: &CellGrid, edges: &[Edge]) -> Result<AlphaMetric> {
        let np = grid.len();
        let mut t = Vec::new();
        for e in edges {
            let mut v: Vec<(usize, f64)> = Vec::with_capacity(8);
            for &(m, k, c) in e.terms() {
                v.push((2 * m, c * grid.e[k][0]));
                v.push((2 * m + 1, c * grid.e[k][1]));
            }
            for &(r, a) in &v {
                for &(q, b) in &v {
                    t.push((r, q, e.w * a * b));
                }
            }
        }
        let m = Csr::from_triplets(2 * np, 2 * np, t);
        let identity = (0..2 * np).all(|i| {
            let (lo, hi) = (m.indptr[i], m.indptr[i + 1]);
            (lo..hi).all(|p| {
                let target = if m.indices[p] == i { 1.0 } else { 0.0 };
                (m.values[p] - target).abs() < 1e-12
            })
        });
        let chol = if identity { None } else { Some(SparseCholesky::new(&m)?) };
        Ok(AlphaMetric { m, chol })
    }

    pub fn is_identity(&self) -> bool {
        self.chol.is_none()
    }

    pub fn inner(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        if self.is_identity() {
            return a.iter().zip(b).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum();
        }
        let mb = self.m.matvec(b.as_flattened());
        a.as_flattened().iter().zip(&mb).map(|(p, q)| p * q).sum()
    }

    pub fn apply(&self, a: &[[f64; 2]]) -> Vec<[f64; 2]> {
        if self.is_identity() {
            return a.to_vec();
        }
        pairs(self.m.matvec(a.as_flattened()))
    }

    pub fn solve(&self, a: &[[f64; 2]]) -> Vec<[f64; 2]> {
        match &self.chol {
            None => a.to_vec(),
            Some(c) => pairs(c.solve(a.as_flattened())),
        }
    }
}

fn pairs(v: Vec<f64>) -> Vec<[f64; 2]> {
    v.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

impl std::fmt::Debug for Background {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Background")
            .field("n", &self.n)
            .field("n1", &self.grid.n1)
            .field("n2", &self.grid.n2)
            .field("r", &self.grid.shape.r)
            .finish()
    }
}

fn seg_dist(p: [f64; 2], e: [f64; 2]) -> f64 {
    let ee = e[0] * e[0] + e[1] * e[1];
    let t = (-(p[0] * e[0] + p[1] * e[1]) / ee).clamp(0.0, 1.0);
    (p[0] + t * e[0]).hypot(p[1] + t * e[1])
}

/// e^{i g_s(x)} = ((x+s)/|x+s|)^n / (x/|x|)^n, evaluated without branch choices.
pub fn wrap_phase(n: i32, x: [f64; 2], s: [f64; 2]) -> C64 {
    if n == 0 || (s[0] == 0.0 && s[1] == 0.0) {
        return C64::new(1.0, 0.0);
    }
    winding_phase(n, [x[0] + s[0], x[1] + s[1]]) * winding_phase(n, x).conj()
}

impl Background {
    /// The n = 0 superconducting background psi0 = 1, a0 = 0.
    pub fn trivial(grid: &CellGrid) -> Result<Arc<Background>> {
        Self::build(grid, 0, None)
    }

    pub fn vortex(profile: Arc<dyn RadialProfile>, grid: &CellGrid) -> Result<Arc<Background>> {
        let need =
            grid.shape.circumradius() + 2.0 * grid.e[0][0].hypot(grid.e[0][1]).max(grid.e[1][0].hypot(grid.e[1][1]));
        if profile.r_max() < need {
            return invalid(format!("profile r_max {} shorter than the cell needs ({need:.3})", profile.r_max()));
        }
        Self::build(grid, profile.n(), Some(profile))
    }

    fn build(grid: &CellGrid, n: i32, profile: Option<Arc<dyn RadialProfile>>) -> Result<Arc<Background>> {
        let cutoff = build_cutoffs(&grid.shape)?;
        let stencil = grid.stencil()?;
        let mut bg = Background {
            grid: grid.clone(),
            n,
            cutoff,
            profile,
            psi0: vec![],
            a0: vec![],
            edges: vec![],
            plaquettes: vec![],
            stencil: stencil.clone(),
            metric: AlphaMetric { m: Csr::from_triplets(0, 0, vec![]), chol: None },
        };
        let (gx, gw) = gauss_legendre01(16);
        let (n1, n2) = (grid.n1 as i64, grid.n2 as i64);
        let inside = |i: i64, j: i64| (0..n1).contains(&i) && (0..n2).contains(&j);
        let leaks = std::cell::Cell::new(false);
        // links leaving the cell must see the pure winding potential, otherwise the
        // closed-form extension is not the gauge-periodic one
        let link = |i: i64, j: i64, dir: usize| {
            let p = grid.lattice_point(i, j);
            let e = grid.e[dir];
            let (di, dj) = if dir == 0 { (1, 0) } else { (0, 1) };
            if n != 0 && !(inside(i, j) && inside(i + di, j + dj)) && seg_dist(p, e) < 0.4 * grid.shape.r {
                leaks.set(true);
            }
            bg.link0(p, e, &gx, &gw)
        };
        let np = grid.len();
        let mut psi0 = Vec::with_capacity(np);
        let mut a0 = Vec::with_capacity(np);
        for k in 0..np {
            let x = grid.node(k);
            let (p, a) = bg.fields_at(x);
            psi0.push(p);
            a0.push(a);
        }
        let mut edges = Vec::with_capacity(3 * np);
        let mut plaquettes = Vec::with_capacity(np);
        for k in 0..np {
            let (i, j) = grid.ij(k);
            let (i, j) = (i as i64, j as i64);
            for dir in 0..2 {
                let (di, dj) = if dir == 0 { (1, 0) } else { (0, 1) };
                let (b, m1, m2) = grid.wrap(i + di, j + dj);
                let s = grid.shape.vector(m1, m2);
                let w_b = wrap_phase(n, grid.node(b), s.value);
                let th = link(i, j, dir);
                edges.push(Edge {
                    a: k,
                    b,
                    w: stencil.w[dir],
                    u0: w_b * C64::from_polar(1.0, -th),
                    terms: [(k, dir, 1.0), (0, 0, 0.0), (0, 0, 0.0), (0, 0, 0.0)],
                    nterms: 1,
                });
            }
            if stencil.w[2] > 0.0 {
                let sg = stencil.sigma;
                let (b, m1, m2) = grid.wrap(i + sg, j + 1);
                let s = grid.shape.vector(m1, m2);
                let w_b = wrap_phase(n, grid.node(b), s.value);
                // path A: e2 then sigma e1; path B: sigma e1 then e2
                let (th_a, t_a) = if sg > 0 {
                    (link(i, j, 1) + link(i, j + 1, 0), (grid.wrap(i, j + 1).0, 0usize, 0.5))
                } else {
                    (link(i, j, 1) - link(i - 1, j + 1, 0), (grid.wrap(i - 1, j + 1).0, 0usize, -0.5))
                };
                let (th_b, t_b) = if sg > 0 {
                    (link(i, j, 0) + link(i + 1, j, 1), (k, 0usize, 0.5))
                } else {
                    (-link(i - 1, j, 0) + link(i - 1, j, 1), (grid.wrap(i - 1, j).0, 0usize, -0.5))
                };
                let t_b2 = (grid.wrap(i + sg, j).0, 1usize, 0.5);
                let th = 0.5 * (th_a + th_b);
                edges.push(Edge {
                    a: k,
                    b,
                    w: stencil.w[2],
                    u0: w_b * C64::from_polar(1.0, -th),
                    terms: [(k, 1, 0.5), t_a, t_b, t_b2],
                    nterms: 4,
                });
            }
            let phi0 = link(i, j, 0) + link(i + 1, j, 1) - link(i, j + 1, 0) - link(i, j, 1);
            plaquettes.push(Plaquette {
                phi0,
                links: [(k, 0, 1.0), (grid.wrap(i + 1, j).0, 1, 1.0), (grid.wrap(i, j + 1).0, 0, -1.0), (k, 1, -1.0)],
            });
        }
        if leaks.get() {
            return Err(GlError::Shape(
                "cutoff support reaches links that cross the cell boundary; refine the grid or use a rounder cell"
                    .into(),
            ));
        }
        bg.psi0 = psi0;
        bg.a0 = a0;
        bg.metric = AlphaMetric::from_edges(grid, &edges)?;
        bg.edges = edges;
        bg.plaquettes = plaquettes;
        Ok(Arc::new(bg))
    }

    /// An m x m block of cells as one periodic torus. Every copy carries the cell field in
    /// the cell frame, so edges and plaquettes are the cell ones re-indexed across copies.
    pub fn tiled(&self, m: usize) -> Result<Arc<Background>> {
        if m == 0 {
            return invalid("tile count must be positive");
        }
        let cg = &self.grid;
        let shape = LatticeShape::new(cg.shape.tau, m as f64 * cg.shape.r)?;
        let sg = build_grid(&shape, m * cg.n1, m * cg.n2)?;
        let per = self.edges.len() / cg.len();
        // super index of the cell node `t`, seen from cell node k sitting at super (si, sj)
        let lift = |k: usize, t: usize, si: i64, sj: i64| -> Result<usize> {
            let (i, j) = cg.ij(k);
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    if cg.wrap(i as i64 + di, j as i64 + dj).0 == t {
                        return Ok(sg.wrap(si + di, sj + dj).0);
                    }
                }
            }
            Err(GlError::Shape(format!("node {t} is not adjacent to node {k}")))
        };
        let np = sg.len();
        let mut psi0 = vec![C64::new(0.0, 0.0); np];
        let mut a0 = vec![[0.0; 2]; np];
        let mut edges = Vec::with_capacity(per * np);
        let mut plaquettes = Vec::with_capacity(np);
        for s in 0..np {
            let (si, sj) = sg.ij(s);
            let k = cg.idx(si % cg.n1, sj % cg.n2);
            let (si, sj) = (si as i64, sj as i64);
            psi0[s] = self.psi0[k];
            a0[s] = self.a0[k];
            for e in &self.edges[per * k..per * (k + 1)] {
                let mut ne = e.clone();
                ne.a = s;
                ne.b = lift(k, e.b, si, sj)?;
                for t in ne.terms.iter_mut().take(e.nterms) {
                    t.0 = lift(k, t.0, si, sj)?;
                }
                edges.push(ne);
            }
            let mut pl = self.plaquettes[k].clone();
            for l in pl.links.iter_mut() {
                l.0 = lift(k, l.0, si, sj)?;
            }
            plaquettes.push(pl);
        }
        Ok(Arc::new(Background {
            metric: AlphaMetric::from_edges(&sg, &edges)?,
            grid: sg,
            n: self.n,
            cutoff: self.cutoff.clone(),
            profile: self.profile.clone(),
            psi0,
            a0,
            edges,
            plaquettes,
            stencil: self.stencil.clone(),
        }))
    }

    /// q(r) = a(r) eta + (1 - eta), so a0 = q n grad(theta).
    fn q(&self, r: f64) -> f64 {
        let eta = self.cutoff.eta_r(r);
        if eta == 0.0 {
            return 1.0;
        }
        let a = self.profile.as_ref().map(|p| p.fa(r).1).unwrap_or(1.0);
        a * eta + (1.0 - eta)
    }

    /// (psi0, a0) at a point from the closed form.
    pub fn fields_at(&self, x: [f64; 2]) -> (C64, [f64; 2]) {
        if self.n == 0 {
            return (C64::new(1.0, 0.0), [0.0, 0.0]);
        }
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return (C64::new(0.0, 0.0), [0.0, 0.0]);
        }
        let eta = self.cutoff.eta_r(r);
        let (f, a) = if eta == 0.0 { (1.0, 1.0) } else { self.profile.as_ref().map(|p| p.fa(r)).unwrap_or((1.0, 1.0)) };
        let modulus = f * eta + 1.0 - eta;
        let q = a * eta + 1.0 - eta;
        crate::profile::vortex_fields_from(self.n, modulus, q, x)
    }

    /// Line integral of a0 from p to p + e.
    fn link0(&self, p: [f64; 2], e: [f64; 2], gx: &[f64], gw: &[f64]) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let nf = self.n as f64;
        let dmin = seg_dist(p, e);
        let cr = p[0] * e[1] - p[1] * e[0];
        if dmin >= 0.4 * self.grid.shape.r {
            let q = [p[0] + e[0], p[1] + e[1]];
            let c = p[0] * q[1] - p[1] * q[0];
            let d = p[0] * q[0] + p[1] * q[1];
            return nf * c.atan2(d);
        }
        let mut s = 0.0;
        for (x, w) in gx.iter().zip(gw) {
            let z = [p[0] + x * e[0], p[1] + x * e[1]];
            let r2 = z[0] * z[0] + z[1] * z[1];
            s += w * self.q(r2.sqrt()) / r2;
        }
        nf * cr * s
    }

    /// Total background plaquette flux over the cell.
    pub fn background_flux(&self) -> f64 {
        self.plaquettes.iter().map(|p| p.phi0).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    Odd,
    Unrestricted,
}

/// Full state: psi per node and the periodic part alpha of the vector potential.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub bg: Arc<Background>,
    pub psi: Vec<C64>,
    pub alpha: Vec<[f64; 2]>,
    pub parity: Parity,
}

pub fn build_approximate_solution(p: Arc<VortexProfile>, grid: &CellGrid) -> Result<FieldState> {
    let bg = Background::vortex(p, grid)?;
    Ok(FieldState::background(&bg))
}

impl FieldState {
    pub fn background(bg: &Arc<Background>) -> Self {
        FieldState {
            bg: bg.clone(),
            psi: bg.psi0.clone(),
            alpha: vec![[0.0; 2]; bg.grid.len()],
            parity: if bg.n % 2 != 0 { Parity::Odd } else { Parity::Unrestricted },
        }
    }

    /// The state copied onto the m x m torus of [`Background::tiled`].
    pub fn tiled(&self, m: usize) -> Result<FieldState> {
        let bg = self.bg.tiled(m)?;
        let (cg, sg) = (self.grid(), &bg.grid);
        let cell = |s: usize| {
            let (i, j) = sg.ij(s);
            cg.idx(i % cg.n1, j % cg.n2)
        };
        Ok(FieldState {
            psi: (0..sg.len()).map(|s| self.psi[cell(s)]).collect(),
            alpha: (0..sg.len()).map(|s| self.alpha[cell(s)]).collect(),
            bg,
            parity: Parity::Unrestricted,
        })
    }

    pub fn grid(&self) -> &CellGrid {
        &self.bg.grid
    }

    /// Full vector potential a0 + alpha at the nodes.
    pub fn full_a(&self, k: usize) -> [f64; 2] {
        let a0 = self.bg.a0[k];
        [a0[0] + self.alpha[k][0], a0[1] + self.alpha[k][1]]
    }

    pub fn reflect(&self) -> FieldState {
        let (psi, alpha) = reflect_fields(self.grid(), &self.psi, &self.alpha);
        FieldState { bg: self.bg.clone(), psi, alpha, parity: self.parity }
    }

    /// Neighbor values across a lattice step (di, dj) in {-1, 0, 1}^2, with psi
    /// multiplied by e^{i g_s} when the step leaves the cell.
    pub fn wrap_neighbor(&self, node: usize, di: i64, dj: i64) -> (C64, [f64; 2]) {
        let g = self.grid();
        let (i, j) = g.ij(node);
        let (b, m1, m2) = g.wrap(i as i64 + di, j as i64 + dj);
        let s: LatticeVector = g.shape.vector(m1, m2);
        let ph = wrap_phase(self.bg.n, g.node(b), s.value);
        (ph * self.psi[b], self.alpha[b])
    }

    /// Plaquette flux of the full state summed over the cell.
    pub fn total_flux(&self) -> f64 {
        plaquette_fluxes(self).iter().sum()
    }

    pub fn write_dump(&self, kappa: f64, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_dump_header(&mut w, self, kappa)?;
        write_dump_rows(&mut w, self, [0.0, 0.0], 0, 0)?;
        Ok(())
    }
}

pub(crate) fn write_dump_header<W: Write>(w: &mut W, s: &FieldState, kappa: f64) -> Result<()> {
    let g = s.grid();
    writeln!(
        w,
        "# {} {} {:.16e} {:.16e} {:.16e} {:.16e} {}",
        g.n1, g.n2, g.shape.r, g.shape.tau.re, g.shape.tau.im, kappa, s.bg.n
    )?;
    writeln!(w, "# flux {:.16e} area {:.16e}", s.total_flux(), g.da * g.len() as f64)?;
    Ok(())
}

/// Parsed field dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub n1: usize,
    pub n2: usize,
    pub r: f64,
    pub tau: C64,
    pub kappa: f64,
    pub n: i32,
    pub flux: f64,
    pub area: f64,
    /// i, j, x, y, Re psi, Im psi, a1, a2
    pub rows: Vec<[f64; 8]>,
}

pub fn read_dump(path: &Path) -> Result<FieldDump> {
    let txt = std::fs::read_to_string(path)?;
    let bad = |m: String| GlError::Validation(vec![format!("{}: {m}", path.display())]);
    let mut lines = txt.lines();
    let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split_whitespace().collect();
    if head.len() != 8 || head[0] != "#" {
        return Err(bad("malformed header".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
    let int = |s: &str| s.parse::<i64>().map_err(|_| bad(format!("bad integer '{s}'")));
    let fl: Vec<&str> = lines.next().ok_or_else(|| bad("missing flux line".into()))?.split_whitespace().collect();
    if fl.len() != 5 || fl[0] != "#" || fl[1] != "flux" || fl[3] != "area" {
        return Err(bad("malformed flux line".into()));
    }
    let mut d = FieldDump {
        n1: int(head[1])? as usize,
        n2: int(head[2])? as usize,
        r: num(head[3])?,
        tau: C64::new(num(head[4])?, num(head[5])?),
        kappa: num(head[6])?,
        n: int(head[7])? as i32,
        flux: num(fl[2])?,
        area: num(fl[4])?,
        rows: vec![],
    };
    for (ln, l) in lines.enumerate() {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 8 {
            return Err(bad(format!("row {} has {} fields", ln + 1, f.len())));
        }
        let mut row = [0.0; 8];
        for (x, s) in row.iter_mut().zip(&f) {
            *x = num(s)?;
        }
        d.rows.push(row);
    }
    if d.rows.len() != d.n1 * d.n2 {
        return Err(bad(format!("{} rows, header promises {}", d.rows.len(), d.n1 * d.n2)));
    }
    Ok(d)
}

pub(crate) fn write_dump_rows<W: Write>(
    w: &mut W,
    s: &FieldState,
    shift: [f64; 2],
    di: usize,
    dj: usize,
) -> Result<()> {
    let g = s.grid();
    for k in 0..g.len() {
        let (i, j) = g.ij(k);
        let x = g.node(k);
        let a = s.full_a(k);
        writeln!(
            w,
            "{} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            i + di,
            j + dj,
            x[0] + shift[0],
            x[1] + shift[1],
            s.psi[k].re,
            s.psi[k].im,
            a[0],
            a[1]
        )?;
    }
    Ok(())
}

/// Plaquette fluxes of the full state (background plus periodic links).
pub fn plaquette_fluxes(s: &FieldState) -> Vec<f64> {
    let g = s.grid();
    let links: Vec<[f64; 2]> = s.alpha.iter().map(|a| g.links(*a)).collect();
    s.bg.plaquettes.iter().map(|p| p.phi0 + p.links.iter().map(|&(m, k, c)| c * links[m][k]).sum::<f64>()).collect()
}

/// (psi o iota, alpha reflected through its links).
pub fn reflect_fields(g: &CellGrid, psi: &[C64], alpha: &[[f64; 2]]) -> (Vec<C64>, Vec<[f64; 2]>) {
    let np = g.len();
    let psi_r = (0..np).map(|k| psi[g.reflect_index(k)]).collect();
    let alpha_r = (0..np)
        .map(|k| {
            let l1 = g.links(alpha[g.reflect_link_index(k, 0)])[0];
            let l2 = g.links(alpha[g.reflect_link_index(k, 1)])[1];
            g.from_links([l1, l2])
        })
        .collect();
    (psi_r, alpha_r)
}
