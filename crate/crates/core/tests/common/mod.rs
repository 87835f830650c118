//! Multiple-shooting oracle for the radial vortex equations.
#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;

pub struct Shooting {
    pub n: i32,
    pub kappa: f64,
    /// Segment end points; nodes[0] is the series start point.
    pub nodes: Vec<f64>,
    /// State (f, f', a, a') at each node.
    pub states: Vec<[f64; 4]>,
    pub residual: f64,
}

fn rhs(n2: f64, k2: f64, r: f64, y: &[f64; 4]) -> [f64; 4] {
    let b = 1.0 - y[2];
    [y[1], -y[1] / r + n2 * b * b * y[0] / (r * r) - k2 * (1.0 - y[0] * y[0]) * y[0], y[3], y[3] / r - b * y[0] * y[0]]
}

fn lin(y: &[f64; 4], k: &[[f64; 4]], c: &[f64]) -> [f64; 4] {
    let mut o = *y;
    for (kk, cc) in k.iter().zip(c) {
        for i in 0..4 {
            o[i] += cc * kk[i];
        }
    }
    o
}

/// Adaptive Dormand-Prince 5(4) from r0 to r1.
pub fn dopri(n2: f64, k2: f64, r0: f64, r1: f64, y0: [f64; 4], tol: f64) -> [f64; 4] {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [&[f64]; 7] = [
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] =
        [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
    let mut r = r0;
    let mut y = y0;
    let mut h = (r1 - r0) / 8.0;
    while r < r1 {
        if r + h > r1 {
            h = r1 - r;
        }
        let mut k = [[0.0; 4]; 7];
        for s in 0..7 {
            let ys: Vec<f64> = A[s].iter().map(|a| a * h).collect();
            k[s] = rhs(n2, k2, r + C[s] * h, &lin(&y, &k[..s], &ys));
        }
        let y5 = lin(&y, &k[..6], &A[6].iter().map(|a| a * h).collect::<Vec<_>>());
        let err = (0..4)
            .map(|i| {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
                (e / (tol * (1.0 + y5[i].abs()))).abs()
            })
            .fold(0.0, f64::max);
        if err <= 1.0 {
            r += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}

/// Small-r series f = c r^n (1 + e r^2), a = d r^2 + g r^(2n+2).
fn series(n: i32, k2: f64, r: f64, c: f64, d: f64) -> [f64; 4] {
    let nf = n as f64;
    let e = -(2.0 * nf * nf * d + k2) / (4.0 * nf + 4.0);
    let g = c * c / (4.0 * nf * (nf + 1.0));
    let rn = r.powi(n);
    let m = 2 * n + 2;
    [
        c * rn * (1.0 + e * r * r),
        c * (nf * rn / r + (nf + 2.0) * e * rn * r),
        d * r * r + g * r.powi(m),
        2.0 * d * r + m as f64 * g * r.powi(m - 1),
    ]
}

impl Shooting {
    /// Solves the two-point problem on [0, r_max] with f = a = 1 at r_max.
    /// `guess` supplies (f, f', a, a') at the interior nodes.
    pub fn solve(n: i32, kappa: f64, r_max: f64, segments: usize, guess: impl Fn(f64) -> [f64; 4]) -> Shooting {
        let n2 = (n * n) as f64;
        let k2 = kappa * kappa;
        let delta = 1e-3;
        let mut nodes = vec![delta];
        nodes.extend((1..=segments).map(|k| r_max * k as f64 / segments as f64));
        let ks = segments;
        let nu = 2 + 4 * (ks - 1);
        // initial unknowns: c, d from the guess, then states at nodes 1..ks-1
        let g0 = guess(delta);
        let mut x = vec![g0[0] / delta.powi(n), g0[2] / (delta * delta)];
        for k in 1..ks {
            x.extend(guess(nodes[k]));
        }
        let tol = 1e-13;
        let start_of = |x: &[f64], k: usize| -> [f64; 4] {
            if k == 0 {
                series(n, k2, delta, x[0], x[1])
            } else {
                let o = 2 + 4 * (k - 1);
                [x[o], x[o + 1], x[o + 2], x[o + 3]]
            }
        };
        let eval = |x: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(nu);
            let start = |k: usize| start_of(x, k);
            for k in 0..ks {
                let y = dopri(n2, k2, nodes[k], nodes[k + 1], start(k), tol);
                if k + 1 < ks {
                    let nx = start(k + 1);
                    out.extend((0..4).map(|i| y[i] - nx[i]));
                } else {
                    out.push(y[0] - 1.0);
                    out.push(y[2] - 1.0);
                }
            }
            out
        };
        let mut res = eval(&x);
        let mut rn = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..40 {
            if rn < 1e-11 {
                break;
            }
            let mut jac = Mat::<f64>::zeros(nu, nu);
            // segment k maps its start unknowns to rows 4k..; the next start enters with -I
            for k in 0..ks {
                let (o, w) = if k == 0 { (0, 2) } else { (2 + 4 * (k - 1), 4) };
                let base = dopri(n2, k2, nodes[k], nodes[k + 1], start_of(&x, k), tol);
                for j in 0..w {
                    let h = 1e-7 * (1.0 + x[o + j].abs());
                    let mut xp = x.clone();
                    xp[o + j] += h;
                    let y = dopri(n2, k2, nodes[k], nodes[k + 1], start_of(&xp, k), tol);
                    if k + 1 < ks {
                        for i in 0..4 {
                            jac[(4 * k + i, o + j)] = (y[i] - base[i]) / h;
                        }
                    } else {
                        jac[(4 * k, o + j)] = (y[0] - base[0]) / h;
                        jac[(4 * k + 1, o + j)] = (y[2] - base[2]) / h;
                    }
                }
                if k + 1 < ks {
                    let o2 = 2 + 4 * k;
                    for i in 0..4 {
                        jac[(4 * k + i, o2 + i)] = -1.0;
                    }
                }
            }
            let b = Mat::<f64>::from_fn(nu, 1, |i, _| -res[i]);
            let dx = jac.partial_piv_lu().solve(&b);
            let mut t = 1.0;
            loop {
                let xt: Vec<f64> = (0..nu).map(|i| x[i] + t * dx[(i, 0)]).collect();
                let rt = eval(&xt);
                let rtn = rt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if rtn < rn || t < 1e-3 {
                    x = xt;
                    res = rt;
                    rn = rtn;
                    break;
                }
                t *= 0.5;
            }
        }
        let mut states = vec![series(n, k2, delta, x[0], x[1])];
        for k in 1..ks {
            let o = 2 + 4 * (k - 1);
            states.push([x[o], x[o + 1], x[o + 2], x[o + 3]]);
        }
        let last = dopri(n2, k2, nodes[ks - 1], nodes[ks], states[ks - 1], tol);
        states.push(last);
        Shooting { n, kappa, nodes, states, residual: rn }
    }
}

/// f = (1 - e^-r)^n, a = 1 - (1 + r) e^-r.
pub fn crude_guess(n: i32) -> impl Fn(f64) -> [f64; 4] {
    move |r: f64| {
        let e = (-r).exp();
        let b = 1.0 - e;
        [b.powi(n), n as f64 * b.powi(n - 1) * e, 1.0 - (1.0 + r) * e, r * e]
    }
}
