//! Exact finite-configuration K-transform calculus.
//!
//! Functions on finite configurations restricted to the subsets of a fixed
//! base pattern are stored as arrays indexed by subset bitmask. On that
//! substrate the K-transform, its inverse, and the star-convolution are
//! exact lattice transforms, so the combinatorial identities behind the
//! generator expansion can be verified by enumeration.

use crate::error::{Error, Result};
use crate::quad::integrate_cube;
use crate::space::PeriodicBox;

/// Memory guard: 2^16 values per function.
pub const MAX_BASE: usize = 16;

/// A function on the subsets of an n-point base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFunction {
    n: usize,
    values: Vec<f64>,
}

impl SubsetFunction {
    pub fn from_fn(n: usize, mut f: impl FnMut(u32) -> f64) -> Self {
        assert!(n <= MAX_BASE, "base size {n} exceeds {MAX_BASE}");
        let values = (0..1u32 << n).map(&mut f).collect();
        Self { n, values }
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Self {
        assert!(n <= MAX_BASE);
        assert_eq!(values.len(), 1 << n);
        Self { n, values }
    }

    /// G(eta) = prod_{i in eta} w_i (product form; G(empty) = 1).
    pub fn product_form(weights: &[f64]) -> Self {
        let n = weights.len();
        Self::from_fn(n, |mask| {
            (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| weights[i])
                .product()
        })
    }

    /// Indicator of the empty configuration: the star-unit, K maps it to 1.
    pub fn indicator_empty(n: usize) -> Self {
        Self::from_fn(n, |mask| if mask == 0 { 1.0 } else { 0.0 })
    }

    /// Supported on singletons, G({x_i}) = f_i.
    pub fn singletons(f: &[f64]) -> Self {
        let n = f.len();
        Self::from_fn(n, |mask| {
            if mask.count_ones() == 1 {
                f[mask.trailing_zeros() as usize]
            } else {
                0.0
            }
        })
    }

    pub fn base_size(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn masks(&self) -> impl Iterator<Item = u32> {
        0..1u32 << self.n
    }
}

/// Iterate all submasks of `mask`, including 0 and `mask` itself.
pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut sub = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let cur = sub;
        if sub == 0 {
            done = true;
        } else {
            sub = (sub - 1) & mask;
        }
        Some(cur)
    })
}

/// (KG)(gamma) = sum over sub-configurations eta of gamma of G(eta),
/// for a single mask, by direct submask enumeration.
pub fn k_transform(g: &SubsetFunction, gamma_mask: u32) -> f64 {
    submasks(gamma_mask).map(|m| g.get(m)).sum()
}

/// K-transform on every mask at once (subset-sum zeta transform, O(n 2^n)).
pub fn k_transform_all(g: &SubsetFunction) -> SubsetFunction {
    let n = g.n;
    let mut v = g.values.clone();
    for bit in 0..n {
        for mask in 0..v.len() {
            if mask >> bit & 1 == 1 {
                v[mask] += v[mask ^ (1 << bit)];
            }
        }
    }
    SubsetFunction::from_values(n, v)
}

/// (K^{-1}F)(eta) = sum_{xi subset eta} (-1)^{|eta \ xi|} F(xi), single mask.
pub fn k_inverse(f: &SubsetFunction, eta_mask: u32) -> f64 {
    submasks(eta_mask)
        .map(|m| {
            let sign = if (eta_mask.count_ones() - m.count_ones()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            sign * f.get(m)
        })
        .sum()
}

/// Inverse K-transform on every mask (signed Moebius transform).
pub fn k_inverse_all(f: &SubsetFunction) -> SubsetFunction {
    let n = f.n;
    let mut v = f.values.clone();
    for bit in 0..n {
        for mask in 0..v.len() {
            if mask >> bit & 1 == 1 {
                v[mask] -= v[mask ^ (1 << bit)];
            }
        }
    }
    SubsetFunction::from_values(n, v)
}

/// (G1 * G2)(eta) = sum over ordered partitions (e1, e2, e3) of eta of
/// G1(e1 u e2) G2(e2 u e3).
pub fn star_convolution(g1: &SubsetFunction, g2: &SubsetFunction) -> SubsetFunction {
    assert_eq!(g1.n, g2.n);
    SubsetFunction::from_fn(g1.n, |eta| {
        let mut total = 0.0;
        for e1 in submasks(eta) {
            let rest = eta & !e1;
            for e2 in submasks(rest) {
                let e3 = rest & !e2;
                total += g1.get(e1 | e2) * g2.get(e2 | e3);
            }
        }
        total
    })
}

/// Lebesgue--Poisson integrand: empty-configuration mass 1 plus a series of
/// n-body terms weighted 1/n!.
pub enum LpIntegrand<'a> {
    /// (e^f - 1)^{tensor n} for all n; the series sums to exp(int (e^f-1)).
    Product { f: &'a dyn Fn(&[f64]) -> f64 },
    /// first-order term f only
    Singleton { f: &'a dyn Fn(&[f64]) -> f64 },
    /// explicit symmetric n-body integrands, order 1 first
    Custom {
        orders: Vec<Box<dyn Fn(&[&[f64]]) -> f64 + 'a>>,
    },
}

/// Integral against the Lebesgue--Poisson measure over the box, truncated at
/// `order_cap`. Product-form integrands use the closed one-body reduction.
pub fn lp_integral(
    g: &LpIntegrand,
    bx: &PeriodicBox,
    order_cap: usize,
    nodes_per_axis: usize,
) -> Result<f64> {
    match g {
        LpIntegrand::Product { f } => {
            let one_body = integrate_cube(bx.dim, 0.0, bx.side, nodes_per_axis, |x| f(x));
            let mut total = 0.0;
            let mut term = 1.0; // I^n / n!
            for k in 0..=order_cap {
                if k > 0 {
                    term *= one_body / k as f64;
                }
                total += term;
            }
            Ok(total)
        }
        LpIntegrand::Singleton { f } => {
            Ok(1.0 + integrate_cube(bx.dim, 0.0, bx.side, nodes_per_axis, |x| f(x)))
        }
        LpIntegrand::Custom { orders } => {
            let mut total = 1.0;
            let mut fact = 1.0;
            for (i, body) in orders.iter().enumerate().take(order_cap) {
                let order = i + 1;
                if order * bx.dim > 12 {
                    return Err(Error::QuadratureInfeasible(format!(
                        "order {order} in dimension {} needs a {}-dimensional grid",
                        bx.dim,
                        order * bx.dim
                    )));
                }
                fact *= order as f64;
                let v = integrate_cube(order * bx.dim, 0.0, bx.side, nodes_per_axis, |flat| {
                    let pts: Vec<&[f64]> = flat.chunks(bx.dim).collect();
                    body(&pts)
                });
                total += v / fact;
            }
            Ok(total)
        }
    }
}

/// The three product-structure functions whose K-transforms have closed
/// forms: e^{<f,.>}, e^{<f,.>}<g,.>, and the off-diagonal double sum.
pub fn exp_preimage(f: &[f64]) -> SubsetFunction {
    let w: Vec<f64> = f.iter().map(|v| v.exp() - 1.0).collect();
    SubsetFunction::product_form(&w)
}

pub fn exp_linear_preimage(f: &[f64], g: &[f64]) -> SubsetFunction {
    let n = f.len();
    SubsetFunction::from_fn(n, |mask| {
        (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| {
                let mut prod = f[i].exp() * g[i];
                for j in 0..n {
                    if j != i && mask >> j & 1 == 1 {
                        prod *= f[j].exp() - 1.0;
                    }
                }
                prod
            })
            .sum()
    })
}

pub fn exp_double_preimage(f: &[f64], g1: &[f64], g2: &[f64]) -> SubsetFunction {
    let n = f.len();
    SubsetFunction::from_fn(n, |mask| {
        let mut total = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 0 {
                continue;
            }
            for j in 0..n {
                if j == i || mask >> j & 1 == 0 {
                    continue;
                }
                let mut prod = f[i].exp() * g1[i] * f[j].exp() * g2[j];
                for k in 0..n {
                    if k != i && k != j && mask >> k & 1 == 1 {
                        prod *= f[k].exp() - 1.0;
                    }
                }
                total += prod;
            }
        }
        total
    })
}

#[derive(Debug, Clone)]
pub struct ClosedFormReport {
    pub max_dev_exp: f64,
    pub max_dev_linear: f64,
    pub max_dev_double: f64,
}

impl ClosedFormReport {
    pub fn max_dev(&self) -> f64 {
        self.max_dev_exp
            .max(self.max_dev_linear)
            .max(self.max_dev_double)
    }
}

/// Verify the three closed-form K-transform identities on every mask over
/// the base, via the fast transform; deviations are absolute.
pub fn closed_form_check(f: &[f64], g: &[f64], g1: &[f64], g2: &[f64]) -> ClosedFormReport {
    let n = f.len();
    assert!(n <= 12);
    let kg1 = k_transform_all(&exp_preimage(f));
    let kg2 = k_transform_all(&exp_linear_preimage(f, g));
    let kg3 = k_transform_all(&exp_double_preimage(f, g1, g2));
    let mut dev = [0.0f64; 3];
    for mask in 0..1u32 << n {
        let sum = |vals: &[f64]| -> f64 {
            (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| vals[i])
                .sum()
        };
        let ef = sum(f).exp();
        dev[0] = dev[0].max((kg1.get(mask) - ef).abs());
        dev[1] = dev[1].max((kg2.get(mask) - ef * sum(g)).abs());
        let prod12: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| g1[i] * g2[i])
            .sum();
        let double = sum(g1) * sum(g2) - prod12;
        dev[2] = dev[2].max((kg3.get(mask) - ef * double).abs());
    }
    ClosedFormReport {
        max_dev_exp: dev[0],
        max_dev_linear: dev[1],
        max_dev_double: dev[2],
    }
}

#[derive(Debug, Clone)]
pub struct KinvBoundReport {
    /// max over eta subset Lambda of |K^{-1}U| / bound; must be <= 1
    pub max_ratio: f64,
    /// max |K^{-1}U(eta)| over eta not contained in Lambda; must vanish
    pub outside_max_abs: f64,
}

/// Test the alternating-sum bound |K^{-1}U| <= chi_Lambda (2 zeta)^{|eta|}
/// exp[tau (1 + sigma sum_r |eta_r|^2)^p] for the local growth function
/// U(gamma) = zeta^{|gamma_Lambda|} exp[tau (1 + sigma sum_r |gamma_r|^2)^p].
///
/// `lambda_mask` marks which base points lie in Lambda; `cube_of` assigns
/// each base point to its unit cube.
pub fn kinv_bound_check(
    zeta: f64,
    tau: f64,
    sigma: f64,
    p: f64,
    lambda_mask: u32,
    cube_of: &[usize],
) -> KinvBoundReport {
    let n = cube_of.len();
    assert!(n <= MAX_BASE);
    // The growth constant can always be enlarged, so zeta >= 1 is a free
    // normalization; below 1 the empty-set term of the alternating sum
    // already exceeds (2 zeta)^{|eta|}.
    assert!(zeta >= 1.0 && tau >= 0.0 && sigma >= 0.0 && (0.0..1.0).contains(&p));
    let ncubes = cube_of.iter().max().map_or(0, |m| m + 1);
    let growth = |mask: u32| -> f64 {
        let mut counts = vec![0usize; ncubes];
        for i in 0..n {
            if mask >> i & 1 == 1 {
                counts[cube_of[i]] += 1;
            }
        }
        let s: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        (tau * (1.0 + sigma * s).powf(p)).exp()
    };
    let u = SubsetFunction::from_fn(n, |mask| {
        let in_l = mask & lambda_mask;
        zeta.powi(in_l.count_ones() as i32) * growth(in_l)
    });
    let kinv = k_inverse_all(&u);
    let mut max_ratio: f64 = 0.0;
    let mut outside: f64 = 0.0;
    for eta in u.masks() {
        let lhs = kinv.get(eta).abs();
        if eta & !lambda_mask != 0 {
            outside = outside.max(lhs);
            continue;
        }
        let bound = (2.0 * zeta).powi(eta.count_ones() as i32) * growth(eta);
        max_ratio = max_ratio.max(lhs / bound);
    }
    KinvBoundReport {
        max_ratio,
        outside_max_abs: outside,
    }
}
