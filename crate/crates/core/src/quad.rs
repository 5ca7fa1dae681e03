//! Gauss–Legendre quadrature, plain and tensor-product.

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Newton iteration on P_n with the Chebyshev initial guess; accurate to
/// machine precision for the node counts used here (n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// n-point Gauss–Legendre rule scaled to [lo, hi].
pub fn gauss_legendre_on(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    )
}

/// Integrate f over [lo, hi] with an n-point rule.
pub fn integrate_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre_on(n, lo, hi);
    xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
}

/// Tensor-product quadrature over the cube [lo, hi]^dim.
pub fn integrate_cube(dim: usize, lo: f64, hi: f64, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let (xs, ws) = gauss_legendre_on(n, lo, hi);
    let mut idx = vec![0usize; dim];
    let mut pt = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            pt[k] = xs[idx[k]];
            w *= ws[idx[k]];
        }
        total += w * f(&pt);
        // odometer increment
        let mut k = 0;
        loop {
            if k == dim {
                return total;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Tensor-product quadrature over an axis-aligned box given per-axis bounds.
pub fn integrate_box(bounds: &[(f64, f64)], n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let dim = bounds.len();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = bounds
        .iter()
        .map(|&(lo, hi)| gauss_legendre_on(n, lo, hi))
        .collect();
    let mut idx = vec![0usize; dim];
    let mut pt = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            pt[k] = rules[k].0[idx[k]];
            w *= rules[k].1[idx[k]];
        }
        total += w * f(&pt);
        let mut k = 0;
        loop {
            if k == dim {
                return total;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Surface area of the unit sphere S^{d-1} in R^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0)
}
