//! Smooth cylinder test functions F(gamma) = g(<phi_1,gamma>, ..., <phi_N,gamma>).
//!
//! Inner functions are closed-form bump-based fields so gradients and
//! Hessians are exact; no numerical differentiation enters the generator
//! quadrature.

use crate::space::{dot, Configuration, PeriodicBox, Point};

/// A smooth compactly supported scalar field on the torus.
#[derive(Debug, Clone)]
pub enum ScalarField {
    /// amplitude * P(q) * exp(-q/(1-q)) with q = |x - center|^2 / radius^2,
    /// P a polynomial in q; C-infinity, supported on the ball of `radius`.
    Bump {
        center: Point,
        radius: f64,
        amplitude: f64,
        /// polynomial coefficients in q, constant term first
        poly: Vec<f64>,
    },
    /// |x - center|^2 on the open sup-norm window of half-width `half_width`,
    /// 0 outside. Exactly quadratic where it is nonzero; callers keep
    /// configurations away from the window edge.
    QuadraticWindow { center: Point, half_width: f64 },
}

impl ScalarField {
    pub fn bump(center: Point, radius: f64, amplitude: f64, poly: Vec<f64>) -> Self {
        assert!(radius > 0.0);
        Self::Bump {
            center,
            radius,
            amplitude,
            poly,
        }
    }

    pub fn center(&self) -> &Point {
        match self {
            Self::Bump { center, .. } => center,
            Self::QuadraticWindow { center, .. } => center,
        }
    }

    /// Radius of a ball (around `center`) containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Bump { radius, .. } => *radius,
            Self::QuadraticWindow {
                half_width, center, ..
            } => half_width * (center.len() as f64).sqrt(),
        }
    }

    pub fn value(&self, x: &[f64], bx: &PeriodicBox) -> f64 {
        match self {
            Self::Bump {
                center,
                radius,
                amplitude,
                poly,
            } => {
                let d = bx.min_image_diff(x, center);
                let q = dot(&d, &d) / (radius * radius);
                if q >= 1.0 {
                    return 0.0;
                }
                amplitude * poly_eval(poly, q) * bump_profile(q)
            }
            Self::QuadraticWindow { center, half_width } => {
                let d = bx.min_image_diff(x, center);
                if d.iter().any(|c| c.abs() >= *half_width) {
                    return 0.0;
                }
                dot(&d, &d)
            }
        }
    }

    pub fn grad(&self, x: &[f64], bx: &PeriodicBox) -> Point {
        match self {
            Self::Bump {
                center,
                radius,
                amplitude,
                poly,
            } => {
                let d = bx.min_image_diff(x, center);
                let r2 = radius * radius;
                let q = dot(&d, &d) / r2;
                if q >= 1.0 {
                    return vec![0.0; x.len()];
                }
                let (g1, _) = radial_derivs(poly, *amplitude, q);
                d.iter().map(|c| g1 * 2.0 * c / r2).collect()
            }
            Self::QuadraticWindow { center, half_width } => {
                let d = bx.min_image_diff(x, center);
                if d.iter().any(|c| c.abs() >= *half_width) {
                    return vec![0.0; x.len()];
                }
                d.iter().map(|c| 2.0 * c).collect()
            }
        }
    }

    /// Row-major d x d Hessian.
    pub fn hess(&self, x: &[f64], bx: &PeriodicBox) -> Vec<f64> {
        let dim = x.len();
        match self {
            Self::Bump {
                center,
                radius,
                amplitude,
                poly,
            } => {
                let d = bx.min_image_diff(x, center);
                let r2 = radius * radius;
                let q = dot(&d, &d) / r2;
                if q >= 1.0 {
                    return vec![0.0; dim * dim];
                }
                let (g1, g2) = radial_derivs(poly, *amplitude, q);
                let s = 2.0 / r2;
                let mut h = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        h[i * dim + j] = g2 * s * s * d[i] * d[j];
                        if i == j {
                            h[i * dim + j] += g1 * s;
                        }
                    }
                }
                h
            }
            Self::QuadraticWindow { center, half_width } => {
                let d = bx.min_image_diff(x, center);
                let mut h = vec![0.0; dim * dim];
                if d.iter().any(|c| c.abs() >= *half_width) {
                    return h;
                }
                for i in 0..dim {
                    h[i * dim + i] = 2.0;
                }
                h
            }
        }
    }
}

fn poly_eval(coeffs: &[f64], q: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * q + c)
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// exp(-q/(1-q)) for q in [0,1).
fn bump_profile(q: f64) -> f64 {
    (-q / (1.0 - q)).exp()
}

/// First and second derivative in q of amplitude * P(q) * exp(-q/(1-q)).
fn radial_derivs(poly: &[f64], amplitude: f64, q: f64) -> (f64, f64) {
    let b = bump_profile(q);
    let u = 1.0 - q;
    let w1 = 1.0 / (u * u);
    let w2 = 2.0 / (u * u * u);
    let db = -w1 * b;
    let ddb = (w1 * w1 - w2) * b;
    let p = poly_eval(poly, q);
    let dp_coeffs = poly_deriv(poly);
    let dp = poly_eval(&dp_coeffs, q);
    let ddp = poly_eval(&poly_deriv(&dp_coeffs), q);
    (
        amplitude * (dp * b + p * db),
        amplitude * (ddp * b + 2.0 * dp * db + p * ddb),
    )
}

/// The outer function g: R^N -> R with exact gradient and Hessian.
#[derive(Debug, Clone)]
pub enum OuterFn {
    Linear {
        coeffs: Vec<f64>,
        bias: f64,
    },
    /// g(v) = bias + lin.v + 1/2 v^T quad v, quad symmetric row-major
    Quadratic {
        lin: Vec<f64>,
        quad: Vec<f64>,
        bias: f64,
    },
    /// g(v) = scale * sin(weights.v + phase); bounded with bounded derivatives
    Sine {
        weights: Vec<f64>,
        phase: f64,
        scale: f64,
    },
}

impl OuterFn {
    pub fn arity(&self) -> usize {
        match self {
            Self::Linear { coeffs, .. } => coeffs.len(),
            Self::Quadratic { lin, .. } => lin.len(),
            Self::Sine { weights, .. } => weights.len(),
        }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        match self {
            Self::Linear { coeffs, bias } => bias + dot(coeffs, v),
            Self::Quadratic { lin, quad, bias } => {
                let n = lin.len();
                let mut s = bias + dot(lin, v);
                for i in 0..n {
                    for j in 0..n {
                        s += 0.5 * v[i] * quad[i * n + j] * v[j];
                    }
                }
                s
            }
            Self::Sine {
                weights,
                phase,
                scale,
            } => scale * (dot(weights, v) + phase).sin(),
        }
    }

    pub fn grad(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Linear { coeffs, .. } => coeffs.clone(),
            Self::Quadratic { lin, quad, .. } => {
                let n = lin.len();
                (0..n)
                    .map(|i| lin[i] + (0..n).map(|j| quad[i * n + j] * v[j]).sum::<f64>())
                    .collect()
            }
            Self::Sine {
                weights,
                phase,
                scale,
            } => {
                let c = scale * (dot(weights, v) + phase).cos();
                weights.iter().map(|w| c * w).collect()
            }
        }
    }

    /// Row-major N x N Hessian.
    pub fn hess(&self, v: &[f64]) -> Vec<f64> {
        let n = self.arity();
        match self {
            Self::Linear { .. } => vec![0.0; n * n],
            Self::Quadratic { quad, .. } => quad.clone(),
            Self::Sine {
                weights,
                phase,
                scale,
            } => {
                let s = -scale * (dot(weights, v) + phase).sin();
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] = s * weights[i] * weights[j];
                    }
                }
                h
            }
        }
    }
}

/// F(gamma) = g(<phi_1,gamma>, ..., <phi_N,gamma>).
#[derive(Debug, Clone)]
pub struct CylinderFunction {
    pub outer: OuterFn,
    pub inner: Vec<ScalarField>,
    pub name: String,
}

impl CylinderFunction {
    pub fn new(name: impl Into<String>, outer: OuterFn, inner: Vec<ScalarField>) -> Self {
        assert_eq!(outer.arity(), inner.len());
        Self {
            outer,
            inner,
            name: name.into(),
        }
    }

    /// The vector of linear statistics s_k = sum_{x in gamma} phi_k(x).
    /// Terms are summed in value order so the result is exactly invariant
    /// under reordering the point list.
    pub fn stats(&self, gamma: &Configuration, bx: &PeriodicBox) -> Vec<f64> {
        self.inner
            .iter()
            .map(|f| {
                let mut vals: Vec<f64> = gamma.iter().map(|p| f.value(p, bx)).collect();
                vals.sort_by(f64::total_cmp);
                vals.iter().sum()
            })
            .collect()
    }

    pub fn value_from_stats(&self, s: &[f64]) -> f64 {
        self.outer.value(s)
    }

    pub fn evaluate(&self, gamma: &Configuration, bx: &PeriodicBox) -> f64 {
        self.outer.value(&self.stats(gamma, bx))
    }

    /// Statistics of gamma \ x u y given the statistics of gamma (x in gamma).
    pub fn stats_replace(&self, s: &[f64], x: &[f64], y: &[f64], bx: &PeriodicBox) -> Vec<f64> {
        self.inner
            .iter()
            .zip(s)
            .map(|(f, &sk)| sk - f.value(x, bx) + f.value(y, bx))
            .collect()
    }

    /// Statistics of gamma u x given the statistics of gamma.
    pub fn stats_adjoin(&self, s: &[f64], x: &[f64], bx: &PeriodicBox) -> Vec<f64> {
        self.inner
            .iter()
            .zip(s)
            .map(|(f, &sk)| sk + f.value(x, bx))
            .collect()
    }

    /// Configuration gradient at x: the stats must belong to the
    /// configuration *containing* x (either x in gamma, or gamma + x).
    pub fn grad_at(&self, s: &[f64], x: &[f64], bx: &PeriodicBox) -> Point {
        let dg = self.outer.grad(s);
        let dim = x.len();
        let mut out = vec![0.0; dim];
        for (k, f) in self.inner.iter().enumerate() {
            if dg[k] == 0.0 {
                continue;
            }
            let gf = f.grad(x, bx);
            for i in 0..dim {
                out[i] += dg[k] * gf[i];
            }
        }
        out
    }

    /// Configuration Hessian at x (row-major d x d); stats as in `grad_at`.
    pub fn hess_at(&self, s: &[f64], x: &[f64], bx: &PeriodicBox) -> Vec<f64> {
        let dim = x.len();
        let n = self.inner.len();
        let dg = self.outer.grad(s);
        let ddg = self.outer.hess(s);
        let grads: Vec<Point> = self.inner.iter().map(|f| f.grad(x, bx)).collect();
        let mut out = vec![0.0; dim * dim];
        for k in 0..n {
            if dg[k] != 0.0 {
                let hf = self.inner[k].hess(x, bx);
                for e in 0..dim * dim {
                    out[e] += dg[k] * hf[e];
                }
            }
            for l in 0..n {
                let c = ddg[k * n + l];
                if c == 0.0 {
                    continue;
                }
                for i in 0..dim {
                    for j in 0..dim {
                        out[i * dim + j] += c * grads[k][i] * grads[l][j];
                    }
                }
            }
        }
        out
    }

    pub fn laplacian_at(&self, s: &[f64], x: &[f64], bx: &PeriodicBox) -> f64 {
        let dim = x.len();
        let h = self.hess_at(s, x, bx);
        (0..dim).map(|i| h[i * dim + i]).sum()
    }

    /// Whether x lies within `margin` of the support of any inner field.
    /// Outside, D^{-+} differences and gradients vanish exactly.
    pub fn touches_support(&self, x: &[f64], margin: f64, bx: &PeriodicBox) -> bool {
        self.inner
            .iter()
            .any(|f| bx.distance(x, f.center()) <= f.support_radius() + margin)
    }

    /// Largest support radius among the inner fields.
    pub fn support_radius(&self) -> f64 {
        self.inner
            .iter()
            .map(|f| f.support_radius())
            .fold(0.0, f64::max)
    }
}

/// Catalog of cylinder test functions on the given box, used by the
/// generator-convergence and Dirichlet-form suites.
pub fn catalog(bx: &PeriodicBox) -> Vec<CylinderFunction> {
    let d = bx.dim;
    let l = bx.side;
    let c1: Point = vec![0.5 * l; d];
    let mut c2: Point = vec![0.35 * l; d];
    c2[0] = 0.6 * l;
    let r = 0.3 * l;
    let f1 = ScalarField::bump(c1.clone(), r, 1.0, vec![1.0]);
    let f2 = ScalarField::bump(c2, 0.25 * l, 0.8, vec![1.0, -0.5]);
    vec![
        CylinderFunction::new(
            "linear-bump",
            OuterFn::Linear {
                coeffs: vec![1.0],
                bias: 0.0,
            },
            vec![f1.clone()],
        ),
        CylinderFunction::new(
            "quadratic-pair",
            OuterFn::Quadratic {
                lin: vec![0.7, -0.3],
                quad: vec![0.4, 0.2, 0.2, -0.1],
                bias: 0.1,
            },
            vec![f1.clone(), f2.clone()],
        ),
        CylinderFunction::new(
            "sine-pair",
            OuterFn::Sine {
                weights: vec![0.9, 0.5],
                phase: 0.3,
                scale: 1.0,
            },
            vec![f1, f2],
        ),
    ]
}

/// F(gamma) = sum_{x in gamma} |x - center|^2 restricted to a sup-norm
/// window; on that window the generator integrand is exactly quadratic.
pub fn quadratic_window_probe(center: Point, half_width: f64) -> CylinderFunction {
    CylinderFunction::new(
        "quadratic-window",
        OuterFn::Linear {
            coeffs: vec![1.0],
            bias: 0.0,
        },
        vec![ScalarField::QuadraticWindow { center, half_width }],
    )
}
