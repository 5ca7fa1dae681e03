//! Pair potentials, relative interaction energy, and desk-scale condition
//! diagnostics.
//!
//! The catalog ships three radial, finite-range potentials:
//!  - P0 `Zero`: ideal gas, phi == 0
//!  - P1 `SmoothBump`: beta * exp(-q/(1-q)), q = |x|^2/R^2; C-infinity,
//!    repulsive, compact support
//!  - P2 `SoftCore`: beta * (1-q)^3 on q <= 1; C^2 soft core
//!
//! Temperature is folded into the potential (beta = 1 convention): only the
//! pair (z, phi) parametrizes the Gibbs state.

use crate::error::{Error, Result};
use crate::quad::{integrate_1d, unit_sphere_area};
use crate::space::{dot, norm, Configuration, PeriodicBox, Point};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// C^3 with bounded derivatives and compact support (condition-(A) shape)
    ConditionA,
    /// only e^{-phi/2} is C^1; phi itself less regular
    ExpHalfC1,
    /// singular at the origin
    SingularCore,
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    Zero,
    SmoothBump { beta: f64, range: f64 },
    SoftCore { beta: f64, range: f64 },
}

#[derive(Debug, Clone)]
pub struct PairPotential {
    pub kind: PotentialKind,
}

impl PairPotential {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
        }
    }

    pub fn smooth_bump(beta: f64, range: f64) -> Self {
        assert!(range > 0.0);
        Self {
            kind: PotentialKind::SmoothBump { beta, range },
        }
    }

    pub fn soft_core(beta: f64, range: f64) -> Self {
        assert!(range > 0.0);
        Self {
            kind: PotentialKind::SoftCore { beta, range },
        }
    }

    pub fn by_name(name: &str, beta: f64, range: f64) -> Result<Self> {
        match name {
            "zero" | "p0" => Ok(Self::zero()),
            "smooth-bump" | "p1" => Ok(Self::smooth_bump(beta, range)),
            "soft-core" | "p2" => Ok(Self::soft_core(beta, range)),
            other => Err(Error::Config(format!("unknown potential {other:?}"))),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Radius beyond which phi vanishes exactly.
    pub fn range(&self) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SmoothBump { range, .. } | PotentialKind::SoftCore { range, .. } => {
                range
            }
        }
    }

    /// B with phi >= -B everywhere.
    pub fn lower_bound(&self) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SmoothBump { beta, .. } | PotentialKind::SoftCore { beta, .. } => {
                if beta >= 0.0 {
                    0.0
                } else {
                    -beta
                }
            }
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self.kind {
            PotentialKind::Zero | PotentialKind::SmoothBump { .. } => Regularity::ConditionA,
            PotentialKind::SoftCore { .. } => Regularity::ExpHalfC1,
        }
    }

    /// phi at radial distance r >= 0.
    pub fn value_radial(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SmoothBump { beta, range } => {
                let q = (r / range).powi(2);
                if q >= 1.0 {
                    0.0
                } else {
                    beta * (-q / (1.0 - q)).exp()
                }
            }
            PotentialKind::SoftCore { beta, range } => {
                let q = (r / range).powi(2);
                if q >= 1.0 {
                    0.0
                } else {
                    beta * (1.0 - q).powi(3)
                }
            }
        }
    }

    /// phi(dx) for a displacement vector (radial).
    pub fn value(&self, dx: &[f64]) -> f64 {
        self.value_radial(norm(dx))
    }

    /// d phi / dq at q = (r/R)^2 (used by grad/hess below).
    fn dphi_dq(&self, q: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SmoothBump { beta, .. } => {
                if q >= 1.0 {
                    0.0
                } else {
                    let u = 1.0 - q;
                    -beta * (-q / u).exp() / (u * u)
                }
            }
            PotentialKind::SoftCore { beta, .. } => {
                if q >= 1.0 {
                    0.0
                } else {
                    -3.0 * beta * (1.0 - q).powi(2)
                }
            }
        }
    }

    fn d2phi_dq2(&self, q: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SmoothBump { beta, .. } => {
                if q >= 1.0 {
                    0.0
                } else {
                    let u = 1.0 - q;
                    let w1 = 1.0 / (u * u);
                    let w2 = 2.0 / (u * u * u);
                    beta * (-q / u).exp() * (w1 * w1 - w2)
                }
            }
            PotentialKind::SoftCore { beta, .. } => {
                if q >= 1.0 {
                    0.0
                } else {
                    6.0 * beta * (1.0 - q)
                }
            }
        }
    }

    /// grad phi(dx); defined everywhere for the catalog potentials.
    pub fn grad(&self, dx: &[f64]) -> Point {
        match self.kind {
            PotentialKind::Zero => vec![0.0; dx.len()],
            PotentialKind::SmoothBump { range, .. } | PotentialKind::SoftCore { range, .. } => {
                let r2 = range * range;
                let q = dot(dx, dx) / r2;
                let g = self.dphi_dq(q) * 2.0 / r2;
                dx.iter().map(|&c| g * c).collect()
            }
        }
    }

    /// Row-major d x d Hessian of phi at dx.
    pub fn hess(&self, dx: &[f64]) -> Vec<f64> {
        let dim = dx.len();
        match self.kind {
            PotentialKind::Zero => vec![0.0; dim * dim],
            PotentialKind::SmoothBump { range, .. } | PotentialKind::SoftCore { range, .. } => {
                let r2 = range * range;
                let q = dot(dx, dx) / r2;
                let g1 = self.dphi_dq(q);
                let g2 = self.d2phi_dq2(q);
                let s = 2.0 / r2;
                let mut h = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        h[i * dim + j] = g2 * s * s * dx[i] * dx[j];
                        if i == j {
                            h[i * dim + j] += g1 * s;
                        }
                    }
                }
                h
            }
        }
    }
}

/// Relative energy E(x, gamma) = sum_{y in gamma} phi(x - y), minimum image.
/// Errors if x coincides exactly with a configuration point.
pub fn relative_energy(
    x: &[f64],
    gamma: &Configuration,
    phi: &PairPotential,
    bx: &PeriodicBox,
) -> Result<f64> {
    if gamma.contains_point(x) {
        return Err(Error::PointInConfiguration);
    }
    Ok(relative_energy_unchecked(x, gamma, phi, bx, None))
}

/// Relative energy with an optional excluded index: E(x, gamma \ exclude).
/// Callers inside the dynamics use this form so no configuration copies are
/// made per quadrature node.
pub fn relative_energy_unchecked(
    x: &[f64],
    gamma: &Configuration,
    phi: &PairPotential,
    bx: &PeriodicBox,
    exclude: Option<usize>,
) -> f64 {
    if phi.is_zero() {
        return 0.0;
    }
    let range = phi.range();
    let mut e = 0.0;
    for (i, p) in gamma.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        let d = bx.min_image_diff(x, p);
        let r = norm(&d);
        if r <= range {
            e += phi.value_radial(r);
        }
    }
    e
}

/// Total energy: sum over unordered pairs.
pub fn total_energy(gamma: &Configuration, phi: &PairPotential, bx: &PeriodicBox) -> f64 {
    if phi.is_zero() {
        return 0.0;
    }
    let n = gamma.len();
    let mut u = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            u += phi.value(&bx.min_image_diff(gamma.point(i), gamma.point(j)));
        }
    }
    u
}

/// Numeric diagnostics for the conditions on phi. Spot checks, never proofs.
#[derive(Debug, Clone)]
pub struct ConditionsReport {
    /// integral of |e^{-phi} - 1| with the quadrature refinement difference
    pub integrability_i: f64,
    pub integrability_err: f64,
    pub quadrature_points: usize,
    /// integral of g_delta(x) = sup over the delta-ball of e^{-phi/2}|grad phi|
    pub gdelta_integral: f64,
    pub delta: f64,
    /// min over sampled configurations of U(gamma) - sum_r (A |g_r|^2 - B |g_r|)
    pub superstability_margin: f64,
    pub ss_a: f64,
    pub ss_b: f64,
    pub n_spot: usize,
    pub e_phi_half_sup: f64,
    pub e_phi_half_grad_sup: f64,
    /// (LR) quantifies over all disjoint cube unions; not checked numerically
    pub lr_checked: bool,
}

/// Compute the (I), g_delta, (SS)-spot-check, and sup-norm diagnostics for a
/// radial finite-range potential in dimension `dim`.
pub fn verify_conditions(
    phi: &PairPotential,
    dim: usize,
    delta: f64,
    n_spot: usize,
    rng: &mut impl Rng,
) -> Result<ConditionsReport> {
    assert!(delta > 0.0);
    let range = phi.range();
    let area = unit_sphere_area(dim);
    let nq = 400;
    let radial = |f: &dyn Fn(f64) -> f64, hi: f64, n: usize| -> f64 {
        if hi <= 0.0 {
            0.0
        } else {
            area * integrate_1d(|r| f(r) * r.powi(dim as i32 - 1), 0.0, hi, n)
        }
    };
    let integrand = |r: f64| ((-phi.value_radial(r)).exp() - 1.0).abs();
    let i_coarse = radial(&integrand, range, nq / 2);
    let i_fine = radial(&integrand, range, nq);

    // g_delta: for a radial potential the sup over the ball B(x, delta)
    // reduces to a sup over the radial interval [r - delta, r + delta].
    let eg = |r: f64| (-phi.value_radial(r) / 2.0).exp() * norm(&phi.grad(&radial_point(dim, r)));
    let gdelta = |r: f64| {
        let lo = (r - delta).max(0.0);
        let hi = r + delta;
        let samples = 64;
        (0..=samples)
            .map(|k| eg(lo + (hi - lo) * k as f64 / samples as f64))
            .fold(0.0, f64::max)
    };
    let gdelta_integral = radial(&gdelta, range + delta, nq);

    // sup norms for conditions b), d) on a radial grid
    let mut e_sup: f64 = 0.0;
    let mut eg_sup: f64 = 0.0;
    for k in 0..=2000 {
        let r = (range + delta) * k as f64 / 2000.0;
        e_sup = e_sup.max((-phi.value_radial(r) / 2.0).exp());
        eg_sup = eg_sup.max(eg(r));
    }

    // (SS) spot check on random and clustered configurations inside a cube
    // of side 4 partitioned into unit cubes. For nonnegative potentials
    // A = B = 0 passes; otherwise A is backed off until the margin clears.
    let side = 4.0;
    let bx = PeriodicBox::new(dim, side)?;
    let mut best = (0.0, 0.0, f64::INFINITY);
    let configs: Vec<Configuration> = (0..n_spot.max(1))
        .map(|k| {
            let n_pts = 2 + (k % 12);
            let clustered = k % 2 == 0;
            let mut pts: Vec<Point> = Vec::new();
            'outer: while pts.len() < n_pts {
                let p: Point = if clustered && !pts.is_empty() {
                    let base = &pts[0];
                    (0..dim)
                        .map(|i| bx.wrap_coord(base[i] + rng.gen_range(-0.6..0.6)))
                        .collect()
                } else {
                    (0..dim).map(|_| rng.gen_range(0.0..side)).collect()
                };
                for q in &pts {
                    if *q == p {
                        continue 'outer;
                    }
                }
                pts.push(p);
            }
            Configuration::new(&bx, pts).unwrap()
        })
        .collect();
    for a_try in [0.05, 0.02, 0.01, 0.0] {
        let mut margin = f64::INFINITY;
        for g in &configs {
            let u = total_energy(g, phi, &bx);
            let mut cubes = std::collections::HashMap::new();
            for p in g.iter() {
                let key: Vec<i64> = p.iter().map(|c| c.floor() as i64).collect();
                *cubes.entry(key).or_insert(0usize) += 1;
            }
            let bound: f64 = cubes
                .values()
                .map(|&m| a_try * (m * m) as f64)
                .sum::<f64>();
            margin = margin.min(u - bound);
        }
        if margin >= 0.0 {
            best = (a_try, 0.0, margin);
            break;
        }
        best = (a_try, 0.0, margin);
    }

    Ok(ConditionsReport {
        integrability_i: i_fine,
        integrability_err: (i_fine - i_coarse).abs(),
        quadrature_points: nq,
        gdelta_integral,
        delta,
        superstability_margin: best.2,
        ss_a: best.0,
        ss_b: best.1,
        n_spot,
        e_phi_half_sup: e_sup,
        e_phi_half_grad_sup: eg_sup,
        lr_checked: false,
    })
}

fn radial_point(dim: usize, r: f64) -> Point {
    let mut p = vec![0.0; dim];
    p[0] = r;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(d: usize, l: f64) -> PeriodicBox {
        PeriodicBox::new(d, l).unwrap()
    }

    #[test]
    fn relative_energy_empty_and_single() {
        let b = bx(2, 10.0);
        let phi = PairPotential::smooth_bump(1.5, 1.0);
        let g = Configuration::empty(&b);
        assert_eq!(relative_energy(&[1.0, 1.0], &g, &phi, &b).unwrap(), 0.0);
        let g = Configuration::new(&b, vec![vec![1.4, 1.0]]).unwrap();
        let e = relative_energy(&[1.0, 1.0], &g, &phi, &b).unwrap();
        assert!((e - phi.value(&[0.4, 0.0])).abs() < 1e-15);
    }

    #[test]
    fn relative_energy_rejects_coincident_point() {
        let b = bx(1, 10.0);
        let phi = PairPotential::smooth_bump(1.0, 1.0);
        let g = Configuration::new(&b, vec![vec![2.0]]).unwrap();
        assert!(relative_energy(&[2.0], &g, &phi, &b).is_err());
    }

    #[test]
    fn relative_energy_matches_direct_sum() {
        let b = bx(2, 10.0);
        let phi = PairPotential::smooth_bump(0.8, 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..20)
            .map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)])
            .collect();
        let g = Configuration::new(&b, pts).unwrap();
        let x = vec![5.0, 5.0];
        let fast = relative_energy(&x, &g, &phi, &b).unwrap();
        let slow: f64 = g
            .iter()
            .map(|p| phi.value(&b.min_image_diff(&x, p)))
            .sum();
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn total_energy_small_cases() {
        let b = bx(1, 10.0);
        let phi = PairPotential::smooth_bump(1.0, 1.0);
        let g0 = Configuration::empty(&b);
        assert_eq!(total_energy(&g0, &phi, &b), 0.0);
        let g1 = Configuration::new(&b, vec![vec![1.0]]).unwrap();
        assert_eq!(total_energy(&g1, &phi, &b), 0.0);
        let g2 = Configuration::new(&b, vec![vec![1.0], vec![1.5]]).unwrap();
        assert!((total_energy(&g2, &phi, &b) - phi.value(&[0.5])).abs() < 1e-15);
    }

    #[test]
    fn energy_additivity() {
        let b = bx(2, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for phi in [
            PairPotential::smooth_bump(1.2, 1.5),
            PairPotential::soft_core(2.0, 1.0),
        ] {
            let pts: Vec<Point> = (0..30)
                .map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)])
                .collect();
            let g = Configuration::new(&b, pts).unwrap();
            let u = total_energy(&g, &phi, &b);
            for i in 0..g.len() {
                let rest = g.without(i);
                let e = relative_energy(g.point(i), &rest, &phi, &b).unwrap();
                let u_rest = total_energy(&rest, &phi, &b);
                assert!(
                    (u - (u_rest + e)).abs() <= 1e-12 * u.abs().max(1.0),
                    "additivity violated at i={i}"
                );
            }
        }
    }

    #[test]
    fn translation_invariance_on_torus() {
        let b = bx(2, 8.0);
        let phi = PairPotential::smooth_bump(1.0, 1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Point> = (0..15)
            .map(|_| vec![rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0)])
            .collect();
        let x = vec![4.0, 4.0];
        let g = Configuration::new(&b, pts.clone()).unwrap();
        let e0 = relative_energy(&x, &g, &phi, &b).unwrap();
        let shift = vec![2.7, 5.1];
        let shifted: Vec<Point> = pts
            .iter()
            .map(|p| vec![b.wrap_coord(p[0] + shift[0]), b.wrap_coord(p[1] + shift[1])])
            .collect();
        let gs = Configuration::new(&b, shifted).unwrap();
        let xs = vec![b.wrap_coord(x[0] + shift[0]), b.wrap_coord(x[1] + shift[1])];
        let e1 = relative_energy(&xs, &gs, &phi, &b).unwrap();
        assert!((e0 - e1).abs() <= 1e-10 * e0.abs().max(1.0));
    }

    #[test]
    fn symmetry_and_range() {
        let phi = PairPotential::soft_core(1.7, 1.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let dx = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let neg: Vec<f64> = dx.iter().map(|c| -c).collect();
            assert_eq!(phi.value(&dx), phi.value(&neg));
            if norm(&dx) > phi.range() {
                assert_eq!(phi.value(&dx), 0.0);
            }
            assert!(phi.value(&dx) >= -phi.lower_bound());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let eps = 1e-6;
        for phi in [
            PairPotential::smooth_bump(1.3, 1.4),
            PairPotential::soft_core(0.9, 1.2),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            for _ in 0..100 {
                let dx = vec![rng.gen_range(-1.3..1.3), rng.gen_range(-1.3..1.3)];
                let g = phi.grad(&dx);
                for a in 0..2 {
                    let mut p = dx.clone();
                    let mut m = dx.clone();
                    p[a] += eps;
                    m[a] -= eps;
                    let fd = (phi.value(&p) - phi.value(&m)) / (2.0 * eps);
                    assert!(
                        (fd - g[a]).abs() <= 1e-5 * fd.abs().max(1.0),
                        "fd={fd} g={}",
                        g[a]
                    );
                }
            }
        }
    }

    #[test]
    fn conditions_zero_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = verify_conditions(&PairPotential::zero(), 2, 0.3, 10, &mut rng).unwrap();
        assert_eq!(rep.integrability_i, 0.0);
        assert_eq!(rep.gdelta_integral, 0.0);
        assert!(rep.superstability_margin >= 0.0);
    }

    #[test]
    fn conditions_nonnegative_bump_superstable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = PairPotential::smooth_bump(2.0, 1.0);
        let rep = verify_conditions(&phi, 2, 0.2, 40, &mut rng).unwrap();
        assert!(rep.superstability_margin >= 0.0, "{rep:?}");
        assert!(rep.e_phi_half_sup <= 1.0 + 1e-12);
        assert!(rep.e_phi_half_grad_sup.is_finite());
    }

    #[test]
    fn integrability_matches_refined_quadrature() {
        // refined-quadrature oracle for (I) on the condition-(A) entry
        let phi = PairPotential::smooth_bump(1.0, 1.0);
        let dim = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rep = verify_conditions(&phi, dim, 0.2, 5, &mut rng).unwrap();
        let fine = 2.0
            * integrate_1d(
                |r| ((-phi.value_radial(r)).exp() - 1.0).abs(),
                0.0,
                phi.range(),
                2000,
            );
        assert!(
            (rep.integrability_i - fine).abs() < 1e-6,
            "{} vs {}",
            rep.integrability_i,
            fine
        );
    }
}
