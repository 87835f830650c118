//! Radial profiles (f, a) of the degree-n vortex.
//!
//! The first-order system y = (f, f', a, a') is discretized by two-stage Gauss
//! collocation on a mesh that is geometrically refined towards r = 0 and solved by
//! damped Newton with a sparse LU factorization.

use crate::error::{invalid, GlError, Result};
use crate::sparse::{Csr, SparseLu};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

const SQ3_6: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
const GC: [f64; 2] = [0.5 - SQ3_6, 0.5 + SQ3_6];
const GA: [[f64; 2]; 2] = [[0.25, 0.25 - SQ3_6], [0.25 + SQ3_6, 0.25]];
const GB: [f64; 2] = [0.5, 0.5];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VortexProfile {
    pub n: i32,
    pub kappa: f64,
    pub mesh: Vec<f64>,
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    pub df: Vec<f64>,
    pub da: Vec<f64>,
    /// Max-norm of the collocation residual at the accepted iterate.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileScalars {
    pub energy: f64,
    pub flux: f64,
    pub decay_rate_f: f64,
    pub decay_rate_a: f64,
    /// Only for n = 1.
    pub h_c1: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileOptions {
    pub r_max: f64,
    pub mesh_size: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { r_max: 25.0, mesh_size: 2000, tol: 1e-10, max_iter: 60 }
    }
}

/// Mesh with spacing h_i proportional to 1 - (1 - eps) exp(-i / k0).
pub fn stretched_mesh(r_max: f64, m: usize) -> Vec<f64> {
    let eps = 0.1;
    let k0 = (m as f64 / 40.0).max(2.0);
    let w: Vec<f64> = (0..m).map(|i| 1.0 - (1.0 - eps) * (-(i as f64) / k0).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut r = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    r.push(0.0);
    for wi in &w {
        acc += wi;
        r.push(r_max * acc / total);
    }
    r[m] = r_max;
    r
}

struct Ode {
    n2: f64,
    k2: f64,
}

impl Ode {
    fn rhs(&self, r: f64, y: &[f64; 4]) -> [f64; 4] {
        let (f, p, a, q) = (y[0], y[1], y[2], y[3]);
        let b = 1.0 - a;
        [p, -p / r + self.n2 * b * b * f / (r * r) - self.k2 * (1.0 - f * f) * f, q, q / r - b * f * f]
    }

    fn jac(&self, r: f64, y: &[f64; 4]) -> [[f64; 4]; 4] {
        let (f, _p, a, _q) = (y[0], y[1], y[2], y[3]);
        let b = 1.0 - a;
        let r2 = r * r;
        [
            [0.0, 1.0, 0.0, 0.0],
            [self.n2 * b * b / r2 - self.k2 * (1.0 - 3.0 * f * f), -1.0 / r, -2.0 * self.n2 * b * f / r2, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-2.0 * b * f, 0.0, f * f, 1.0 / r],
        ]
    }
}

struct Collocation<'a> {
    ode: Ode,
    mesh: &'a [f64],
}

impl Collocation<'_> {
    fn m(&self) -> usize {
        self.mesh.len() - 1
    }

    fn nunk(&self) -> usize {
        12 * self.m() + 4
    }

    fn node(x: &[f64], i: usize) -> [f64; 4] {
        [x[12 * i], x[12 * i + 1], x[12 * i + 2], x[12 * i + 3]]
    }

    fn stage(x: &[f64], i: usize, s: usize) -> [f64; 4] {
        let o = 12 * i + 4 + 4 * s;
        [x[o], x[o + 1], x[o + 2], x[o + 3]]
    }

    /// Residual; all interval equations are divided by the local step.
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut g = vec![0.0; self.nunk()];
        g[0] = x[0];
        g[1] = x[2];
        for i in 0..m {
            let h = self.mesh[i + 1] - self.mesh[i];
            let yi = Self::node(x, i);
            let yn = Self::node(x, i + 1);
            let ys = [Self::stage(x, i, 0), Self::stage(x, i, 1)];
            let fs = [self.ode.rhs(self.mesh[i] + GC[0] * h, &ys[0]), self.ode.rhs(self.mesh[i] + GC[1] * h, &ys[1])];
            for s in 0..2 {
                for c in 0..4 {
                    g[12 * i + 2 + 4 * s + c] = (ys[s][c] - yi[c]) / h - GA[s][0] * fs[0][c] - GA[s][1] * fs[1][c];
                }
            }
            for c in 0..4 {
                g[12 * i + 10 + c] = (yn[c] - yi[c]) / h - GB[0] * fs[0][c] - GB[1] * fs[1][c];
            }
        }
        g[12 * m + 2] = x[12 * m] - 1.0;
        g[12 * m + 3] = x[12 * m + 2] - 1.0;
        g
    }

    fn jacobian(&self, x: &[f64]) -> Csr {
        let m = self.m();
        let mut t = Vec::with_capacity(m * 120 + 8);
        t.push((0, 0, 1.0));
        t.push((1, 2, 1.0));
        for i in 0..m {
            let h = self.mesh[i + 1] - self.mesh[i];
            let js = [
                self.ode.jac(self.mesh[i] + GC[0] * h, &Self::stage(x, i, 0)),
                self.ode.jac(self.mesh[i] + GC[1] * h, &Self::stage(x, i, 1)),
            ];
            let yi = 12 * i;
            let yn = 12 * (i + 1);
            for s in 0..2 {
                let row0 = 12 * i + 2 + 4 * s;
                for c in 0..4 {
                    t.push((row0 + c, 12 * i + 4 + 4 * s + c, 1.0 / h));
                    t.push((row0 + c, yi + c, -1.0 / h));
                    for j in 0..2 {
                        for d in 0..4 {
                            let v = -GA[s][j] * js[j][c][d];
                            if v != 0.0 {
                                t.push((row0 + c, 12 * i + 4 + 4 * j + d, v));
                            }
                        }
                    }
                }
            }
            let row0 = 12 * i + 10;
            for c in 0..4 {
                t.push((row0 + c, yn + c, 1.0 / h));
                t.push((row0 + c, yi + c, -1.0 / h));
                for j in 0..2 {
                    for d in 0..4 {
                        let v = -GB[j] * js[j][c][d];
                        if v != 0.0 {
                            t.push((row0 + c, 12 * i + 4 + 4 * j + d, v));
                        }
                    }
                }
            }
        }
        t.push((12 * m + 2, 12 * m, 1.0));
        t.push((12 * m + 3, 12 * m + 2, 1.0));
        Csr::from_triplets(self.nunk(), self.nunk(), t)
    }

    fn initial(&self, n: i32) -> Vec<f64> {
        let an = n.unsigned_abs() as i32;
        let y = |r: f64| {
            let t = r.tanh();
            let s2 = 1.0 - t * t;
            [t.powi(an), an as f64 * t.powi(an - 1) * s2, t * t, 2.0 * t * s2]
        };
        self.from_fn(y)
    }

    fn from_fn(&self, y: impl Fn(f64) -> [f64; 4]) -> Vec<f64> {
        let m = self.m();
        let mut x = vec![0.0; self.nunk()];
        for i in 0..=m {
            x[12 * i..12 * i + 4].copy_from_slice(&y(self.mesh[i]));
            if i < m {
                let h = self.mesh[i + 1] - self.mesh[i];
                for s in 0..2 {
                    let o = 12 * i + 4 + 4 * s;
                    x[o..o + 4].copy_from_slice(&y(self.mesh[i] + GC[s] * h));
                }
            }
        }
        x[0] = 0.0;
        x[2] = 0.0;
        x[12 * m] = 1.0;
        x[12 * m + 2] = 1.0;
        x
    }

    fn newton(&self, mut x: Vec<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, f64, bool) {
        let inf = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut g = self.residual(&x);
        let mut r = inf(&g);
        for _ in 0..max_iter {
            if r <= tol {
                return (x, r, true);
            }
            let lu = match SparseLu::new(&self.jacobian(&x)) {
                Ok(lu) => lu,
                Err(_) => return (x, r, false),
            };
            let dx = lu.solve(&g);
            let mut lam = 1.0;
            let mut accepted = false;
            while lam > 1e-4 {
                let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a - lam * b).collect();
                let gt = self.residual(&xt);
                let rt = inf(&gt);
                if rt.is_finite() && (rt < r || rt <= tol) {
                    x = xt;
                    g = gt;
                    r = rt;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                return (x, r, false);
            }
        }
        (x, r, r <= tol)
    }
}

fn check_params(n: i32, kappa: f64, opts: &ProfileOptions) -> Result<()> {
    if n == 0 {
        return invalid("winding number must be nonzero");
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return invalid(format!("kappa must be positive, got {kappa}"));
    }
    if !(opts.r_max >= 15.0) {
        return invalid(format!("r_max must be at least 15, got {}", opts.r_max));
    }
    if opts.mesh_size < 500 {
        return invalid(format!("mesh size must be at least 500, got {}", opts.mesh_size));
    }
    if !(opts.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    Ok(())
}

pub fn solve_profile(n: i32, kappa: f64, r_max: f64, mesh_size: usize, tol: f64) -> Result<VortexProfile> {
    solve_profile_with(n, kappa, &ProfileOptions { r_max, mesh_size, tol, ..Default::default() })
}

pub fn solve_profile_with(n: i32, kappa: f64, opts: &ProfileOptions) -> Result<VortexProfile> {
    check_params(n, kappa, opts)?;
    let mesh = stretched_mesh(opts.r_max, opts.mesh_size);
    let col = |k: f64| Collocation { ode: Ode { n2: (n * n) as f64, k2: k * k }, mesh: &mesh };
    let c = col(kappa);
    let (mut x, mut res, mut ok) = c.newton(c.initial(n), opts.tol, opts.max_iter);
    if !ok {
        // continuation in kappa from the self-dual value
        let k0 = std::f64::consts::FRAC_1_SQRT_2;
        let steps = 8;
        let c0 = col(k0);
        let (mut xs, _, ok0) = c0.newton(c0.initial(n), opts.tol, opts.max_iter);
        ok = ok0;
        for s in 1..=steps {
            if !ok {
                break;
            }
            let k = k0 + (kappa - k0) * s as f64 / steps as f64;
            let cs = col(k);
            let out = cs.newton(xs, opts.tol, opts.max_iter);
            xs = out.0;
            res = out.1;
            ok = out.2;
        }
        x = xs;
    }
    if !ok {
        return Err(GlError::NonConvergence {
            what: format!("profile solve (n={n}, kappa={kappa})"),
            iterations: opts.max_iter,
            residual: res,
        });
    }
    let m = opts.mesh_size;
    // boundary rows are linear, so these differ from the iterate only by rounding
    x[0] = 0.0;
    x[2] = 0.0;
    x[12 * m] = 1.0;
    x[12 * m + 2] = 1.0;
    let get = |c: usize| (0..=m).map(|i| x[12 * i + c]).collect::<Vec<f64>>();
    Ok(VortexProfile { n, kappa, f: get(0), df: get(1), a: get(2), da: get(3), mesh, residual: res })
}

impl VortexProfile {
    pub fn r_max(&self) -> f64 {
        *self.mesh.last().unwrap()
    }

    /// Max-norm of the collocation residual of the accepted iterate.
    pub fn ode_residual(&self) -> f64 {
        self.residual
    }

    fn locate(&self, r: f64) -> usize {
        match self.mesh.binary_search_by(|v| v.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(self.mesh.len() - 2),
            Err(i) => (i.max(1) - 1).min(self.mesh.len() - 2),
        }
    }

    fn hermite(&self, v: &[f64], dv: &[f64], r: f64) -> (f64, f64) {
        let i = self.locate(r);
        let (r0, r1) = (self.mesh[i], self.mesh[i + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let val = h00 * v[i] + h10 * h * dv[i] + h01 * v[i + 1] + h11 * h * dv[i + 1];
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let der = (d00 * v[i] + d01 * v[i + 1]) / h + d10 * dv[i] + d11 * dv[i + 1];
        (val, der)
    }

    /// (f, f', a, a') at radius r by cubic Hermite interpolation; constant continuation
    /// f = a = 1 beyond r_max.
    pub fn eval(&self, r: f64) -> [f64; 4] {
        if r >= self.r_max() {
            return [1.0, 0.0, 1.0, 0.0];
        }
        let (f, df) = self.hermite(&self.f, &self.df, r);
        let (a, da) = self.hermite(&self.a, &self.da, r);
        [f, df, a, da]
    }

    pub fn f_at(&self, r: f64) -> f64 {
        self.eval(r)[0]
    }

    pub fn a_at(&self, r: f64) -> f64 {
        self.eval(r)[2]
    }

    fn energy_density(&self, i: usize) -> f64 {
        let r = self.mesh[i];
        if r == 0.0 {
            return 0.0;
        }
        let n = self.n as f64;
        let (f, df, a, da) = (self.f[i], self.df[i], self.a[i], self.da[i]);
        let k2 = self.kappa * self.kappa;
        let e = df * df
            + n * n * (1.0 - a).powi(2) * f * f / (r * r)
            + 0.5 * k2 * (1.0 - f * f).powi(2)
            + (n * da / r).powi(2);
        0.5 * e * 2.0 * PI * r
    }

    pub fn energy_trapezoid(&self) -> f64 {
        let g: Vec<f64> = (0..self.mesh.len()).map(|i| self.energy_density(i)).collect();
        self.mesh.windows(2).zip(g.windows(2)).map(|(r, v)| 0.5 * (r[1] - r[0]) * (v[0] + v[1])).sum()
    }

    /// Composite Simpson rule for nonuniform nodes (trapezoid on a trailing odd interval).
    pub fn energy_simpson(&self) -> f64 {
        let g: Vec<f64> = (0..self.mesh.len()).map(|i| self.energy_density(i)).collect();
        let r = &self.mesh;
        let m = r.len() - 1;
        let mut s = 0.0;
        let mut i = 0;
        while i + 2 <= m {
            let h0 = r[i + 1] - r[i];
            let h1 = r[i + 2] - r[i + 1];
            let hs = h0 + h1;
            s += hs / 6.0 * (g[i] * (2.0 - h1 / h0) + g[i + 1] * hs * hs / (h0 * h1) + g[i + 2] * (2.0 - h0 / h1));
            i += 2;
        }
        if i < m {
            s += 0.5 * (r[m] - r[i]) * (g[i] + g[m]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "r,f,a,df,da")?;
        for i in 0..self.mesh.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.mesh[i], self.f[i], self.a[i], self.df[i], self.da[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path, n: i32, kappa: f64) -> Result<VortexProfile> {
        let mut rd = csv::Reader::from_path(path)?;
        let hdr = rd.headers()?.clone();
        if hdr.iter().collect::<Vec<_>>() != ["r", "f", "a", "df", "da"] {
            return Err(GlError::Validation(vec![format!("bad profile header {hdr:?}")]));
        }
        let mut p =
            VortexProfile { n, kappa, mesh: vec![], f: vec![], a: vec![], df: vec![], da: vec![], residual: f64::NAN };
        for rec in rd.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| GlError::Validation(vec![format!("bad number in profile csv: {e}")]))?;
            if v.len() != 5 {
                return Err(GlError::Validation(vec!["profile row with wrong arity".into()]));
            }
            p.mesh.push(v[0]);
            p.f.push(v[1]);
            p.a.push(v[2]);
            p.df.push(v[3]);
            p.da.push(v[4]);
        }
        if p.mesh.len() < 2 {
            return Err(GlError::Validation(vec!["profile csv has fewer than two rows".into()]));
        }
        Ok(p)
    }
}

pub fn profile_energy(p: &VortexProfile) -> f64 {
    p.energy_simpson()
}

pub fn profile_flux(p: &VortexProfile) -> f64 {
    2.0 * PI * p.n as f64 * p.a[p.a.len() - 1]
}

/// Least-squares slope of log(1 - y) against r over the window 1e-10 < 1 - y < 1e-2,
/// restricted to r <= 0.8 r_max. Returns the positive rate.
pub fn tail_rate(r: &[f64], y: &[f64]) -> Result<f64> {
    let r_cut = 0.8 * r.last().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(y)
        .filter(|&(&ri, &yi)| ri <= r_cut && 1.0 - yi > 1e-10 && 1.0 - yi < 1e-2)
        .map(|(&ri, &yi)| (ri, (1.0 - yi).ln()))
        .collect();
    if pts.len() < 20 {
        return Err(GlError::OutOfRange(format!("decay window holds {} points (need 20); r_max too small", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

pub fn decay_rates(p: &VortexProfile) -> Result<(f64, f64)> {
    Ok((tail_rate(&p.mesh, &p.f)?, tail_rate(&p.mesh, &p.a)?))
}

pub fn first_critical_field(kappa: f64) -> Result<f64> {
    let p = solve_profile_with(1, kappa, &ProfileOptions::default())?;
    Ok(profile_energy(&p) / profile_flux(&p))
}

pub fn scalars(p: &VortexProfile) -> Result<ProfileScalars> {
    let energy = profile_energy(p);
    let flux = profile_flux(p);
    let (rf, ra) = decay_rates(p)?;
    Ok(ProfileScalars { energy, flux, decay_rate_f: rf, decay_rate_a: ra, h_c1: (p.n == 1).then(|| energy / flux) })
}

/// Psi = f(r) e^{i n theta}, A = a(r) n grad(theta). The phase is built as
/// ((x1 + i x2)/r)^n so that it is exactly odd for odd n.
pub fn eval_vortex_fields(p: &VortexProfile, x: [f64; 2]) -> Result<(Complex64, [f64; 2])> {
    let r = x[0].hypot(x[1]);
    if r > p.r_max() {
        return Err(GlError::OutOfRange(format!("|x| = {r} exceeds r_max = {}", p.r_max())));
    }
    if r == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), [0.0, 0.0]));
    }
    let e = p.eval(r);
    Ok(vortex_fields_from(p.n, e[0], e[2], x))
}

pub(crate) fn winding_phase(n: i32, x: [f64; 2]) -> Complex64 {
    let r = x[0].hypot(x[1]);
    let u = Complex64::new(x[0] / r, x[1] / r);
    if n >= 0 {
        u.powi(n)
    } else {
        u.conj().powi(-n)
    }
}

pub(crate) fn vortex_fields_from(n: i32, f: f64, a: f64, x: [f64; 2]) -> (Complex64, [f64; 2]) {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let psi = winding_phase(n, x) * f;
    let c = a * n as f64 / r2;
    (psi, [-c * x[1], c * x[0]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_is_increasing_and_refined_at_origin() {
        let r = stretched_mesh(25.0, 2000);
        assert_eq!(r.len(), 2001);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(r[1] < 0.2 * (r[2000] - r[1999]));
    }

    #[test]
    fn trivial_profile_has_zero_energy() {
        let mesh = stretched_mesh(20.0, 600);
        let m = mesh.len();
        let p = VortexProfile {
            n: 0,
            kappa: 1.0,
            f: vec![1.0; m],
            a: vec![1.0; m],
            df: vec![0.0; m],
            da: vec![0.0; m],
            mesh,
            residual: 0.0,
        };
        assert_eq!(profile_energy(&p), 0.0);
        assert_eq!(p.energy_trapezoid(), 0.0);
    }

    #[test]
    fn exact_exponential_rate() {
        let r: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = r.iter().map(|&x| 1.0 - (-1.3 * x).exp()).collect();
        assert!((tail_rate(&r, &y).unwrap() - 1.3).abs() < 1e-6);
    }

    #[test]
    fn short_tail_is_rejected() {
        let r: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = r.iter().map(|&x| 1.0 - (-1.0 * x).exp()).collect();
        assert!(tail_rate(&r, &y).is_err());
    }

    #[test]
    fn ratio_definition_of_hc1() {
        let e = 2.0 * PI;
        let phi = 2.0 * PI;
        assert_eq!(e / phi, 1.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(solve_profile(0, 1.0, 25.0, 2000, 1e-10).is_err());
        assert!(solve_profile(1, -1.0, 25.0, 2000, 1e-10).is_err());
        assert!(solve_profile(1, 1.0, 10.0, 2000, 1e-10).is_err());
        assert!(solve_profile(1, 1.0, 25.0, 100, 1e-10).is_err());
    }

    #[test]
    fn basic_solve_and_fields() {
        let p = solve_profile(1, 1.0, 25.0, 2000, 1e-10).unwrap();
        assert_eq!(p.f[0], 0.0);
        assert_eq!(p.a[0], 0.0);
        assert!(p.residual <= 1e-10);
        assert!(1.0 - p.f[2000] <= 1e-10 && 1.0 - p.a[2000] <= 1e-10);
        assert!(p.f.iter().all(|&v| (-1e-14..=1.0 + 1e-14).contains(&v)));
        assert!(p.a.iter().all(|&v| (-1e-14..=1.0 + 1e-14).contains(&v)));
        assert!(p.f.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        assert!(p.a.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        let (psi, a) = eval_vortex_fields(&p, [0.0, 0.0]).unwrap();
        assert_eq!(psi.norm(), 0.0);
        assert_eq!(a, [0.0, 0.0]);
        let (psi, a) = eval_vortex_fields(&p, [20.0, 0.0]).unwrap();
        assert!((psi - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        assert!(a[0].abs() < 1e-12 && (a[1] - 1.0 / 20.0).abs() < 1e-6);
        let (q1, _) = eval_vortex_fields(&p, [1.3, 0.4]).unwrap();
        let c = (0.7f64).cos();
        let s = (0.7f64).sin();
        let (q2, _) = eval_vortex_fields(&p, [c * 1.3 - s * 0.4, s * 1.3 + c * 0.4]).unwrap();
        assert!((q1.norm() - q2.norm()).abs() < 1e-14);
        assert!(eval_vortex_fields(&p, [30.0, 0.0]).is_err());
        assert!((profile_flux(&p) - 2.0 * PI).abs() < 1e-9);
        // near the origin f/r^n and a/r^2 settle to positive constants
        let c1: Vec<f64> = (1..=10).map(|i| p.f[i] / p.mesh[i]).collect();
        let c2: Vec<f64> = (1..=10).map(|i| p.a[i] / p.mesh[i].powi(2)).collect();
        assert!(c1.iter().all(|&v| v > 0.0) && (c1[0] / c1[9] - 1.0).abs() < 1e-2);
        assert!(c2.iter().all(|&v| v > 0.0) && (c2[0] / c2[9] - 1.0).abs() < 1e-2);
    }
}
