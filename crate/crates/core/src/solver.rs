//! Corrector w for u = v + w on the odd, gauge-orthogonal subspace, a Newton oracle,
//! the projected-equation check and tiling.

use crate::error::{GlError, Result};
use crate::gauge::GaugeProjector;
use crate::grid::{wrap_phase, write_dump_header, FieldState};
use crate::krylov::{pcg, pminres};
use crate::operator::{gauge_mode_unchecked, h1_norm, metric_matrix, residual_f, OperatorHandle, Perturbation};
use crate::sparse::{Csr, SparseCholesky};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub w_norm: f64,
    pub final_residual: f64,
    pub gauge_pairing: f64,
    pub parity_defect: f64,
    pub residual_v: f64,
    pub contraction_ratio: f64,
    pub inner_iterations: Vec<usize>,
    pub outcome: String,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_max_iter: usize,
    /// Relaxation of the fixed-point step; 1 is the plain iteration.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 30, inner_max_iter: 500, damping: 1.0 }
    }
}

/// P-bar L P-bar on range(P-bar), preconditioned by P-bar (L + s)^{-1} P-bar.
pub struct ProjectedSystem {
    pub op: OperatorHandle,
    pub proj: GaugeProjector,
    metric: Csr,
    chol: SparseCholesky,
    pub shift: f64,
}

impl ProjectedSystem {
    /// Projection and preconditioner built at `v`, operator taken at `at`.
    pub fn new(v: &FieldState, at: &FieldState, kappa: f64) -> Result<Self> {
        let op_v = OperatorHandle::new(v, kappa);
        let h = op_v.assemble_hessian();
        let metric = metric_matrix(&v.bg);
        let mut shift = 0.05;
        let chol = loop {
            match SparseCholesky::new(&h.add(&metric, shift)) {
                Ok(c) => break c,
                Err(_) if shift < 1e3 => shift *= 4.0,
                Err(e) => return Err(e),
            }
        };
        let op = if std::ptr::eq(v, at) { op_v } else { OperatorHandle::new(at, kappa) };
        Ok(ProjectedSystem { op, proj: GaugeProjector::new(v)?, metric, chol, shift })
    }

    pub fn rebase(&mut self, at: &FieldState) {
        self.op = OperatorHandle::new(at, self.op.kappa);
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.metric.matvec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    fn project_real(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.proj.project(&Perturbation::from_real(x))?.to_real())
    }

    /// Solves P-bar L P-bar d = P-bar r for d in range(P-bar).
    pub fn solve(&self, r: &Perturbation, abs_tol: f64, max_iter: usize) -> Result<(Perturbation, usize)> {
        let b = self.proj.project(r)?.to_real();
        let failure = std::cell::RefCell::new(None);
        let apply = |x: &[f64]| {
            let px = self.project_real(x).unwrap_or_else(|e| {
                failure.replace(Some(e));
                x.to_vec()
            });
            let lx = self.op.apply_unchecked(&Perturbation::from_real(&px)).to_real();
            self.project_real(&lx).unwrap_or_else(|e| {
                failure.replace(Some(e));
                lx
            })
        };
        let precond = |x: &[f64]| {
            let px = self.project_real(x).unwrap_or_else(|e| {
                failure.replace(Some(e));
                x.to_vec()
            });
            let z = self.chol.solve(&self.metric.matvec(&px));
            self.project_real(&z).unwrap_or_else(|e| {
                failure.replace(Some(e));
                z
            })
        };
        let mut out = pcg(&apply, &precond, |x, y| self.inner(x, y), &b, None, abs_tol, max_iter);
        if !out.converged && out.iterations < max_iter {
            // CG broke down on negative curvature
            out = pminres(&apply, &precond, |x, y| self.inner(x, y), &b, abs_tol, max_iter);
        }
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        if !out.converged {
            return Err(GlError::NonConvergence {
                what: "projected linear solve".into(),
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        Ok((Perturbation::from_real(&out.x), out.iterations))
    }
}

fn clean(w: &Perturbation, v: &FieldState, proj: &GaugeProjector) -> Result<Perturbation> {
    let w = if v.parity == crate::grid::Parity::Odd { w.odd_part(v.grid()) } else { w.clone() };
    proj.project(&w)
}

/// Fixed point w = -L-bar^{-1} P-bar [F(v) + N_v(w)], written in defect-correction form
/// w_{k+1} = w_k - L-bar^{-1} P-bar [F(v) + L w_k + N_v(w_k)].
pub fn solve_corrector(v: &FieldState, kappa: f64, tol: f64, max_iter: usize) -> Result<(Perturbation, SolveReport)> {
    solve_corrector_with(v, kappa, &SolveOptions { tol, max_iter, ..SolveOptions::default() })
}

pub fn solve_corrector_with(v: &FieldState, kappa: f64, o: &SolveOptions) -> Result<(Perturbation, SolveReport)> {
    if !(o.tol > 0.0) || o.max_iter == 0 {
        return Err(GlError::InvalidInput("tolerance must be positive and max_iter nonzero".into()));
    }
    let bg = &v.bg;
    let fv = residual_f(v, kappa);
    let nfv = fv.norm(bg);
    let sys = ProjectedSystem::new(v, v, kappa)?;
    let mut w = Perturbation::zeros(v.grid().len());
    let mut report = SolveReport {
        converged: false,
        iterations: 0,
        residual_history: vec![],
        w_norm: 0.0,
        final_residual: 0.0,
        gauge_pairing: 0.0,
        parity_defect: 0.0,
        residual_v: nfv,
        contraction_ratio: 0.0,
        inner_iterations: vec![],
        outcome: String::new(),
    };
    let r0 = sys.proj.project(&fv)?.norm(bg);
    let mut prev_step: Option<f64> = None;
    loop {
        let mut r = fv.add(&sys.op.apply_unchecked(&w));
        r.axpy(1.0, &sys.op.nonlinearity(&w));
        let pr = sys.proj.project(&r)?;
        let npr = pr.norm(bg);
        report.residual_history.push(npr);
        report.iterations += 1;
        let full = r.norm(bg);
        if r0 == 0.0 || (npr <= o.tol * r0 && full <= o.tol * nfv.max(f64::MIN_POSITIVE)) {
            report.converged = true;
            report.outcome = "converged".into();
            break;
        }
        if report.iterations > o.max_iter {
            report.outcome = "max_iter".into();
            break;
        }
        let (d, inner) = match sys.solve(&pr, 0.05 * o.tol * r0, o.inner_max_iter) {
            Ok(x) => x,
            Err(GlError::NonConvergence { iterations, residual, .. }) => {
                report.inner_iterations.push(iterations);
                report.outcome = format!("inner_stagnation (residual {residual:.3e})");
                break;
            }
            Err(e) => return Err(e),
        };
        report.inner_iterations.push(inner);
        let step = d.norm(bg) * o.damping;
        if let Some(p) = prev_step {
            let ratio = step / p;
            report.contraction_ratio = report.contraction_ratio.max(ratio);
            if ratio >= 1.0 {
                report.outcome = "non_contraction".into();
                break;
            }
        }
        prev_step = Some(step);
        w.axpy(-o.damping, &d);
        w = clean(&w, v, &sys.proj)?;
    }
    let u = v.plus(&w);
    let fu = residual_f(&u, kappa);
    report.w_norm = h1_norm(v, &w);
    report.final_residual = if nfv > 0.0 { fu.norm(bg) / nfv } else { fu.norm(bg) };
    report.gauge_pairing = verify_projected_equation(&u, v, kappa, &trig_gammas(v, 20))? / nfv.max(f64::MIN_POSITIVE);
    report.parity_defect = if v.parity == crate::grid::Parity::Odd { w.parity_defect(bg) } else { 0.0 };
    if !report.converged {
        return Err(GlError::Corrector { reason: report.outcome.clone(), report: Box::new(report) });
    }
    Ok((w, report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonReport {
    pub converged: bool,
    pub steps: usize,
    pub residual_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
}

/// Damped Newton for P-bar F(u) = 0 with u - v odd and gauge-orthogonal at v.
pub fn newton_solve(v: &FieldState, kappa: f64, tol: f64) -> Result<(FieldState, NewtonReport)> {
    let bg = &v.bg;
    let mut sys = ProjectedSystem::new(v, v, kappa)?;
    let fv = residual_f(v, kappa);
    let nfv = fv.norm(bg);
    let r0 = sys.proj.project(&fv)?.norm(bg);
    let mut u = v.clone();
    let mut rep = NewtonReport { converged: false, steps: 0, residual_history: vec![], step_lengths: vec![] };
    let mut r = sys.proj.project(&fv)?;
    let mut nr = r0;
    for _ in 0..40 {
        rep.residual_history.push(nr);
        let full = residual_f(&u, kappa).norm(bg);
        if r0 == 0.0 || (nr <= tol * r0 && full <= tol * nfv) {
            rep.converged = true;
            return Ok((u, rep));
        }
        sys.rebase(&u);
        let (d, _) = sys.solve(&r, (nr * (nr / r0).min(1e-3)).max(1e-13 * r0), 2000)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut w = u.minus(v);
            w.axpy(-t, &d);
            let w = clean(&w, v, &sys.proj)?;
            let cand = v.plus(&w);
            let rc = sys.proj.project(&residual_f(&cand, kappa))?;
            let nc = rc.norm(bg);
            if nc < nr {
                u = cand;
                r = rc;
                nr = nc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        rep.steps += 1;
        rep.step_lengths.push(t);
    }
    Err(GlError::NonConvergence {
        what: "newton".into(),
        iterations: rep.steps,
        residual: nr / r0.max(f64::MIN_POSITIVE),
    })
}

/// Even periodic trigonometric test functions cos(2 pi (p s1 + q s2)) on low frequencies.
pub fn trig_gammas(v: &FieldState, count: usize) -> Vec<Vec<f64>> {
    let g = v.grid();
    let mut freqs = vec![];
    let r = 3i64;
    for p in 0..=r {
        for q in -r..=r {
            if p == 0 && q < 0 {
                continue;
            }
            freqs.push((p, q));
        }
    }
    freqs.sort_by_key(|&(p, q)| (p * p + q * q, p, q));
    freqs
        .into_iter()
        .take(count)
        .map(|(p, q)| {
            (0..g.len())
                .map(|k| {
                    let (i, j) = g.ij(k);
                    // reflection-invariant lattice phase about the cell centre
                    let s1 = (i as f64 + 0.5) / g.n1 as f64 - 0.5;
                    let s2 = (j as f64 + 0.5) / g.n2 as f64 - 0.5;
                    (2.0 * std::f64::consts::PI * (p as f64 * s1 + q as f64 * s2)).cos()
                })
                .collect()
        })
        .collect()
}

/// max over gamma of |<G_gamma, F(u)>| / ||G_gamma||, with G_gamma taken at the base v of
/// the projection.
pub fn verify_projected_equation(u: &FieldState, v: &FieldState, kappa: f64, gammas: &[Vec<f64>]) -> Result<f64> {
    let f = residual_f(u, kappa);
    let mut m = 0.0f64;
    for gamma in gammas {
        if gamma.len() != v.grid().len() {
            return Err(GlError::InvalidInput("test gamma has the wrong length".into()));
        }
        let gm = gauge_mode_unchecked(v, gamma);
        let n = gm.norm(&v.bg);
        if n > 0.0 {
            m = m.max(gm.dot(&f, &v.bg).abs() / n);
        }
    }
    Ok(m)
}

/// Gauge-periodic lift of u to an m x m block of cells.
#[derive(Clone, Debug)]
pub struct TiledField {
    pub m: usize,
    /// (cell i, cell j, node) -> (x, psi, full a)
    pub x: Vec<[f64; 2]>,
    pub psi: Vec<crate::grid::C64>,
    pub a: Vec<[f64; 2]>,
    pub cell_flux: Vec<f64>,
}

fn grad_theta(y: [f64; 2]) -> [f64; 2] {
    let r2 = y[0] * y[0] + y[1] * y[1];
    [-y[1] / r2, y[0] / r2]
}

pub fn tile_solution(u: &FieldState, m: usize) -> Result<TiledField> {
    if m == 0 {
        return Err(GlError::InvalidInput("tile count must be positive".into()));
    }
    let g = u.grid();
    let n = u.bg.n as f64;
    let flux = u.total_flux();
    let mut t = TiledField { m, x: vec![], psi: vec![], a: vec![], cell_flux: vec![] };
    for ci in 0..m {
        for cj in 0..m {
            let s = g.shape.vector(ci as i64, cj as i64).value;
            for k in 0..g.len() {
                let x = g.node(k);
                let ph = wrap_phase(u.bg.n, x, s);
                let a = u.full_a(k);
                let (gs, g0) = (grad_theta([x[0] + s[0], x[1] + s[1]]), grad_theta(x));
                t.x.push([x[0] + s[0], x[1] + s[1]]);
                t.psi.push(ph * u.psi[k]);
                t.a.push([a[0] + n * (gs[0] - g0[0]), a[1] + n * (gs[1] - g0[1])]);
            }
            t.cell_flux.push(flux);
        }
    }
    Ok(t)
}

/// Dump of the tiled field in the single-cell format with global node indices.
pub fn write_tiled_dump(u: &FieldState, kappa: f64, m: usize, path: &Path) -> Result<()> {
    let t = tile_solution(u, m)?;
    let g = u.grid();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    if m == 1 {
        write_dump_header(&mut w, u, kappa)?;
    } else {
        writeln!(
            w,
            "# {} {} {:.16e} {:.16e} {:.16e} {:.16e} {}",
            m * g.n1,
            m * g.n2,
            g.shape.r,
            g.shape.tau.re,
            g.shape.tau.im,
            kappa,
            u.bg.n
        )?;
        let mm = (m * m) as f64;
        writeln!(w, "# flux {:.16e} area {:.16e}", mm * u.total_flux(), mm * g.da * g.len() as f64)?;
    }
    let np = g.len();
    for c in 0..m * m {
        let (ci, cj) = (c / m, c % m);
        for k in 0..np {
            let (i, j) = g.ij(k);
            let idx = c * np + k;
            writeln!(
                w,
                "{} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                i + ci * g.n1,
                j + cj * g.n2,
                t.x[idx][0],
                t.x[idx][1],
                t.psi[idx].re,
                t.psi[idx].im,
                t.a[idx][0],
                t.a[idx][1]
            )?;
        }
    }
    Ok(())
}
