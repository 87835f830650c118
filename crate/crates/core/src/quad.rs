//! Gauss-Legendre rules on [0, 1].

/// Nodes and weights of the k-point rule on [0, 1].
pub fn gauss_legendre01(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            if k == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = kf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite rule: `panels` equal panels with a k-point rule each.
pub fn composite01(panels: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre01(k);
    let h = 1.0 / panels as f64;
    let mut xs = Vec::with_capacity(panels * k);
    let mut ws = Vec::with_capacity(panels * k);
    for p in 0..panels {
        for (xi, wi) in x.iter().zip(&w) {
            xs.push((p as f64 + xi) * h);
            ws.push(wi * h);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for k in 1..=16 {
            let (x, w) = gauss_legendre01(k);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let deg = 2 * k - 1;
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert!((s - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn composite_smooth() {
        let (x, w) = composite01(8, 6);
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (3.0 * xi).exp()).sum();
        assert!((s - ((3.0f64).exp() - 1.0) / 3.0).abs() < 1e-13);
    }
}
