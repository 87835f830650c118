//! Lattice shapes, the gauge exponent g_s and the cocycle / flux checks.

use crate::error::{invalid, GlError, Result};
use crate::quad::composite01;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const EPS: f64 = 1e-12;

/// Reduce tau to the standard fundamental domain of the modular group.
pub fn normalize_shape(tau_raw: Complex64) -> Result<Complex64> {
    if !(tau_raw.im > 0.0) || !tau_raw.re.is_finite() {
        return invalid(format!("shape parameter needs Im tau > 0, got {tau_raw}"));
    }
    let mut t = tau_raw;
    for _ in 0..10_000 {
        t.re -= t.re.round();
        if t.norm_sqr() < 1.0 - EPS {
            t = -t.inv();
        } else {
            break;
        }
    }
    if t.re < -0.5 + EPS {
        t.re += 1.0;
    }
    if (t.norm() - 1.0).abs() <= EPS && t.re < 0.0 {
        t = -t.inv();
    }
    Ok(t)
}

pub fn is_reduced(t: Complex64) -> bool {
    t.im > 0.0
        && t.norm() >= 1.0 - EPS
        && t.re > -0.5 + EPS
        && t.re <= 0.5 + EPS
        && !((t.norm() - 1.0).abs() <= EPS && t.re < -EPS)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LatticeShape {
    pub tau: Complex64,
    pub r: f64,
    pub omega1: [f64; 2],
    pub omega2: [f64; 2],
    pub cell_area: f64,
}

impl LatticeShape {
    pub fn new(tau: Complex64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return invalid(format!("lattice spacing must be positive, got {r}"));
        }
        if !is_reduced(tau) {
            return invalid(format!("tau = {tau} is not reduced; call normalize_shape first"));
        }
        let omega1 = [r, 0.0];
        let omega2 = [r * tau.re, r * tau.im];
        let cell_area = (omega1[0] * omega2[1] - omega1[1] * omega2[0]).abs();
        Ok(LatticeShape { tau, r, omega1, omega2, cell_area })
    }

    pub fn square(r: f64) -> Self {
        Self::new(Complex64::new(0.0, 1.0), r).unwrap()
    }

    pub fn triangular(r: f64) -> Self {
        let t = Complex64::from_polar(1.0, PI / 3.0);
        Self::new(normalize_shape(t).unwrap(), r).unwrap()
    }

    pub fn vector(&self, m1: i64, m2: i64) -> LatticeVector {
        LatticeVector {
            m1,
            m2,
            value: [
                m1 as f64 * self.omega1[0] + m2 as f64 * self.omega2[0],
                m1 as f64 * self.omega1[1] + m2 as f64 * self.omega2[1],
            ],
        }
    }

    /// Cartesian point of lattice coordinates (s1, s2).
    pub fn point(&self, s1: f64, s2: f64) -> [f64; 2] {
        [s1 * self.omega1[0] + s2 * self.omega2[0], s1 * self.omega1[1] + s2 * self.omega2[1]]
    }

    /// Lattice coordinates of a Cartesian point.
    pub fn coords(&self, x: [f64; 2]) -> [f64; 2] {
        let det = self.omega1[0] * self.omega2[1] - self.omega1[1] * self.omega2[0];
        [(x[0] * self.omega2[1] - x[1] * self.omega2[0]) / det, (self.omega1[0] * x[1] - self.omega1[1] * x[0]) / det]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let c = self.coords(x);
        (-0.5..0.5).contains(&c[0]) && (-0.5..0.5).contains(&c[1])
    }

    /// Largest distance from the centre to a cell corner.
    pub fn circumradius(&self) -> f64 {
        [(0.5, 0.5), (0.5, -0.5)]
            .iter()
            .map(|&(a, b)| {
                let p = self.point(a, b);
                p[0].hypot(p[1])
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LatticeVector {
    pub m1: i64,
    pub m2: i64,
    pub value: [f64; 2],
}

pub fn mean_field(shape: &LatticeShape, n: i32) -> f64 {
    2.0 * PI * n as f64 / shape.cell_area
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// g_s(x) = n (theta(x + s) - theta(x)) along the straight segment, i.e.
/// n (Jx.s_hat)/d [arctan(lambda2) - arctan(lambda1)].
pub fn gauge_exponent(x: [f64; 2], s: &LatticeVector, n: i32) -> Result<f64> {
    gauge_exponent_vec(x, s.value, n)
}

pub fn gauge_exponent_vec(x: [f64; 2], s: [f64; 2], n: i32) -> Result<f64> {
    let ls = s[0].hypot(s[1]);
    if ls == 0.0 {
        return Ok(0.0);
    }
    let sh = [s[0] / ls, s[1] / ls];
    // Jx.s_hat = x x s_hat
    let jxs = cross(x, sh);
    let d = jxs.abs();
    let xn = x[0].hypot(x[1]);
    if d <= 1e-13 * xn.max(ls) {
        return Err(GlError::Singular(format!("x = {x:?} is collinear with s = {s:?}")));
    }
    let xs = x[0] * sh[0] + x[1] * sh[1];
    let l1 = xs / d;
    let l2 = (ls + xs) / d;
    Ok(n as f64 * jxs.signum() * (l2.atan() - l1.atan()))
}

/// Gradient of g_s: n (grad theta(x + s) - grad theta(x)).
pub fn gauge_exponent_grad(x: [f64; 2], s: [f64; 2], n: i32) -> [f64; 2] {
    let gt = |y: [f64; 2]| {
        let r2 = y[0] * y[0] + y[1] * y[1];
        [-y[1] / r2, y[0] / r2]
    };
    let a = gt([x[0] + s[0], x[1] + s[1]]);
    let b = gt(x);
    let nf = n as f64;
    [nf * (a[0] - b[0]), nf * (a[1] - b[1])]
}

/// The linear alternative gauge (b/2) s ^ x.
pub fn linear_gauge_exponent(shape: &LatticeShape, n: i32, x: [f64; 2], s: [f64; 2]) -> f64 {
    0.5 * mean_field(shape, n) * cross(s, x)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CocycleReport {
    pub max_deviation: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

fn dist_2pi(v: f64) -> f64 {
    (v - 2.0 * PI * (v / (2.0 * PI)).round()).abs()
}

/// Max over samples and (s, t) in {w1, w2}^2 of the distance of
/// g_{s+t}(x) - g_s(x+t) - g_t(x) to 2 pi Z.
pub fn verify_cocycle(shape: &LatticeShape, n: i32, samples: &[[f64; 2]]) -> CocycleReport {
    verify_cocycle_with(shape, samples, |x, s| gauge_exponent_vec(x, s, n).ok())
}

pub fn verify_cocycle_with<G>(shape: &LatticeShape, samples: &[[f64; 2]], g: G) -> CocycleReport
where
    G: Fn([f64; 2], [f64; 2]) -> Option<f64>,
{
    let basis = [shape.omega1, shape.omega2];
    let mut rep = CocycleReport { max_deviation: 0.0, evaluated: 0, skipped: 0 };
    for &x in samples {
        for s in basis {
            for t in basis {
                let st = [s[0] + t[0], s[1] + t[1]];
                let xt = [x[0] + t[0], x[1] + t[1]];
                match (g(x, st), g(xt, s), g(x, t)) {
                    (Some(a), Some(b), Some(c)) => {
                        rep.max_deviation = rep.max_deviation.max(dist_2pi(a - b - c));
                        rep.evaluated += 1;
                    }
                    _ => rep.skipped += 1,
                }
            }
        }
    }
    rep
}

/// Random points on the two boundary edges {-w1/2 + t w2} and {t w1 - w2/2}.
pub fn sample_boundary_points<R: Rng>(shape: &LatticeShape, count: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..count)
        .map(|k| {
            let t: f64 = rng.random_range(-0.5..0.5);
            if k % 2 == 0 {
                shape.point(-0.5, t)
            } else {
                shape.point(t, -0.5)
            }
        })
        .collect()
}

fn line_integral<F: Fn([f64; 2]) -> [f64; 2]>(p0: [f64; 2], d: [f64; 2], field: F) -> f64 {
    let (xs, ws) = composite01(64, 10);
    xs.iter()
        .zip(&ws)
        .map(|(&t, &w)| {
            let g = field([p0[0] + t * d[0], p0[1] + t * d[1]]);
            w * (g[0] * d[0] + g[1] * d[1])
        })
        .sum()
}

/// Boundary circulation of n grad(theta) written through the gauge exponents:
/// the integral of grad g_{w1} up the left edge minus that of grad g_{w2} along the
/// bottom edge. Equals 2 pi n.
pub fn verify_flux_condition(shape: &LatticeShape, n: i32) -> f64 {
    let (w1, w2) = (shape.omega1, shape.omega2);
    let left = line_integral(shape.point(-0.5, -0.5), w2, |x| gauge_exponent_grad(x, w1, n));
    let bottom = line_integral(shape.point(-0.5, -0.5), w1, |x| gauge_exponent_grad(x, w2, n));
    left - bottom
}

/// Counter-clockwise circulation of grad(theta) around the cell boundary.
pub fn boundary_winding(shape: &LatticeShape) -> f64 {
    let gt = |y: [f64; 2]| {
        let r2 = y[0] * y[0] + y[1] * y[1];
        [-y[1] / r2, y[0] / r2]
    };
    let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    (0..4)
        .map(|k| {
            let a = shape.point(corners[k].0, corners[k].1);
            let b = shape.point(corners[(k + 1) % 4].0, corners[(k + 1) % 4].1);
            line_integral(a, [b[0] - a[0], b[1] - a[1]], gt)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute force over modular words with small entries.
    fn brute_reduce(t: Complex64) -> Complex64 {
        let mut best: Option<Complex64> = None;
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                for cc in -4i64..=4 {
                    for d in -4i64..=4 {
                        if a * d - b * cc != 1 {
                            continue;
                        }
                        let z = (t * a as f64 + b as f64) / (t * cc as f64 + d as f64);
                        if is_reduced(z) {
                            best = Some(z);
                        }
                    }
                }
            }
        }
        best.expect("no reduced image found")
    }

    #[test]
    fn reduced_shapes_are_fixed() {
        let sq = c(0.0, 1.0);
        assert_eq!(normalize_shape(sq).unwrap(), sq);
        let tri = Complex64::from_polar(1.0, PI / 3.0);
        let t = normalize_shape(tri).unwrap();
        assert!((t - tri).norm() < 1e-12);
        assert!((normalize_shape(c(1.0, 1.0)).unwrap() - sq).norm() < 1e-14);
        assert!(normalize_shape(c(0.3, -1.0)).is_err());
    }

    #[test]
    fn reduction_matches_brute_force_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t = c(rng.random_range(-3.0..3.0), rng.random_range(0.3..2.5));
            let r = normalize_shape(t).unwrap();
            assert!(is_reduced(r), "{t} -> {r}");
            assert!((r - brute_reduce(t)).norm() < 1e-9, "{t}");
            assert!((normalize_shape(r).unwrap() - r).norm() < 1e-14);
            let s = LatticeShape::new(r, 3.0).unwrap();
            assert!((s.cell_area - 9.0 * r.im).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_field_values() {
        let s = LatticeShape::square(10.0);
        assert!((mean_field(&s, 1) - 0.0628318).abs() < 1e-7);
        let t = LatticeShape::triangular(10.0);
        assert!((mean_field(&t, 1) - 2.0 * PI / (100.0 * (PI / 3.0).sin())).abs() < 1e-14);
        assert!((mean_field(&t, 3) * t.cell_area - 6.0 * PI).abs() < 1e-12);
    }

    /// Adaptive Simpson oracle for n int_0^1 (Jx.s)/|x + r s|^2 dr.
    fn oracle(x: [f64; 2], s: [f64; 2], n: i32) -> f64 {
        let g = |r: f64| {
            let y = [x[0] + r * s[0], x[1] + r * s[1]];
            cross(x, s) / (y[0] * y[0] + y[1] * y[1])
        };
        fn simpson<F: Fn(f64) -> f64>(
            g: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = g(lm);
            let frm = g(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + simpson(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fm, fb) = (g(0.0), g(0.5), g(1.0));
        n as f64 * simpson(&g, 0.0, 1.0, fa, fm, fb, (fa + 4.0 * fm + fb) / 6.0, 1e-14, 50)
    }

    #[test]
    fn closed_form_matches_line_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for shape in [LatticeShape::square(8.0), LatticeShape::triangular(12.0)] {
            for n in [1, 3] {
                for x in sample_boundary_points(&shape, 50, &mut rng) {
                    for s in [shape.omega1, shape.omega2] {
                        if let Ok(g) = gauge_exponent_vec(x, s, n) {
                            assert!((g - oracle(x, s, n)).abs() < 1e-10, "{x:?} {s:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn far_perpendicular_vanishes_and_collinear_fails() {
        let s = [1.0, 0.0];
        assert!(gauge_exponent_vec([0.0, 1e8], s, 1).unwrap().abs() < 1e-7);
        assert!(gauge_exponent_vec([2.0, 0.0], s, 1).is_err());
        assert_eq!(gauge_exponent_vec([2.0, 1.0], [0.0, 0.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn reflection_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape = LatticeShape::square(8.0);
        for x in sample_boundary_points(&shape, 100, &mut rng) {
            for s in [shape.omega1, shape.omega2] {
                let g = gauge_exponent_vec(x, s, 1);
                let h = gauge_exponent_vec([-x[0] - s[0], -x[1] - s[1]], s, 1);
                if let (Ok(g), Ok(h)) = (g, h) {
                    assert!(dist_2pi(g + h) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cocycle_and_flux() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sq = LatticeShape::square(8.0);
        let pts = sample_boundary_points(&sq, 200, &mut rng);
        let rep = verify_cocycle(&sq, 1, &pts);
        assert!(rep.max_deviation < 1e-9 && rep.evaluated > 700, "{rep:?}");
        let tri = LatticeShape::triangular(8.0);
        let pts = sample_boundary_points(&tri, 200, &mut rng);
        assert!(verify_cocycle(&tri, 3, &pts).max_deviation < 1e-9);
        let zero = verify_cocycle_with(&sq, &pts, |_, _| Some(0.0));
        assert_eq!(zero.max_deviation, 0.0);
        assert!((verify_flux_condition(&LatticeShape::square(10.0), 1) - 2.0 * PI).abs() < 1e-8);
        assert!((verify_flux_condition(&LatticeShape::square(10.0), 3) - 6.0 * PI).abs() < 1e-8);
        assert!((boundary_winding(&tri) - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn linear_gauge_cocycle_defect_is_pi_n() {
        // (b/2) s^x satisfies the cocycle only up to (b/2) t^s = +-pi n for s != t
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sq = LatticeShape::square(8.0);
        let pts = sample_boundary_points(&sq, 20, &mut rng);
        let odd = verify_cocycle_with(&sq, &pts, |x, s| Some(linear_gauge_exponent(&sq, 1, x, s)));
        assert!((odd.max_deviation - PI).abs() < 1e-9);
        let even = verify_cocycle_with(&sq, &pts, |x, s| Some(linear_gauge_exponent(&sq, 2, x, s)));
        assert!(even.max_deviation < 1e-9);
    }
}
