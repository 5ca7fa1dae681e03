//! Equilibrium Kawasaki jump dynamics: a jump-rate model in which particles
//! hop with a compactly supported displacement profile and an energetic
//! factor, simulated exactly by a thinning kinetic Monte Carlo scheme with
//! adaptive per-particle rate bounds.

use crate::error::{Error, Result};
use crate::potential::{relative_energy_unchecked, total_energy, PairPotential};
use crate::quad::{integrate_1d, unit_sphere_area};
use crate::space::{neighbors_within, norm, Configuration, PeriodicBox, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// indicator of the ball of radius `radius`
    Indicator,
    /// smooth bump exp(-q/(1-q)), q = (r/radius)^2, vanishing at the edge
    Bump,
}

/// Radial jump profile a(x) = abar(|x|). Carries its mass m0 = int a and
/// the diffusion coefficient c = int a(x) (x_1)^2 dx, both fixed by radial
/// quadrature at construction with the refinement gap recorded.
#[derive(Debug, Clone)]
pub struct JumpProfile {
    pub kind: ProfileKind,
    pub radius: f64,
    pub dim: usize,
    pub m0: f64,
    pub c: f64,
    pub quad_err: f64,
}

impl JumpProfile {
    pub fn new(kind: ProfileKind, radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0) || dim == 0 {
            return Err(Error::Config(format!(
                "jump profile needs radius > 0 and dim >= 1, got radius {radius}, dim {dim}"
            )));
        }
        let abar = move |r: f64| radial_profile(kind, radius, r);
        let area = unit_sphere_area(dim);
        let dm = dim as f64;
        let mass = |n: usize| area * integrate_1d(|r| abar(r) * r.powf(dm - 1.0), 0.0, radius, n);
        let second = |n: usize| {
            // int a(x) x1^2 dx = (S_{d-1}/d) int abar(r) r^{d+1} dr
            area / dm * integrate_1d(|r| abar(r) * r.powf(dm + 1.0), 0.0, radius, n)
        };
        let m0 = mass(128);
        let c = second(128);
        let quad_err = (m0 - mass(64)).abs().max((c - second(64)).abs());
        Ok(Self {
            kind,
            radius,
            dim,
            m0,
            c,
            quad_err,
        })
    }

    /// abar(|h|) for an unscaled displacement h.
    pub fn density(&self, r: f64) -> f64 {
        radial_profile(self.kind, self.radius, r)
    }

    /// Value of the scaled profile a_eps(u) = eps^{-d} a(u / eps).
    pub fn scaled_density(&self, u: &[f64], eps: f64) -> f64 {
        eps.powi(-(self.dim as i32)) * self.density(norm(u) / eps)
    }

    /// One displacement h distributed as a(h) / m0; the caller scales by eps.
    /// Radius by inversion (indicator) or rejection against the indicator
    /// envelope (bump), direction uniform on the sphere.
    pub fn sample_displacement(&self, rng: &mut ChaCha8Rng) -> Point {
        let d = self.dim;
        let r = loop {
            // r^d-law radius: density proportional to r^{d-1} on [0, radius]
            let r = self.radius * rng.gen::<f64>().powf(1.0 / d as f64);
            match self.kind {
                ProfileKind::Indicator => break r,
                ProfileKind::Bump => {
                    let q = (r / self.radius).powi(2);
                    if rng.gen::<f64>() < (-q / (1.0 - q)).exp() {
                        break r;
                    }
                }
            }
        };
        if d == 1 {
            return vec![if rng.gen::<bool>() { r } else { -r }];
        }
        loop {
            let v: Point = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm(&v);
            if n > 1e-12 {
                return v.iter().map(|&x| x * r / n).collect();
            }
        }
    }
}

fn radial_profile(kind: ProfileKind, radius: f64, r: f64) -> f64 {
    if r >= radius {
        return 0.0;
    }
    match kind {
        ProfileKind::Indicator => 1.0,
        ProfileKind::Bump => {
            let q = (r / radius).powi(2);
            (-q / (1.0 - q)).exp()
        }
    }
}

#[derive(Debug, Clone)]
pub struct KawasakiParams {
    pub profile: JumpProfile,
    pub potential: PairPotential,
    pub bx: PeriodicBox,
    /// interpolation exponent; 1/2 is the reversible symmetric choice
    pub s: f64,
    /// spatial scale of the jump profile
    pub eps: f64,
    /// multiply all rates by eps^{-2} (diffusive time scale)
    pub diffusive_time: bool,
}

impl KawasakiParams {
    pub fn new(
        profile: JumpProfile,
        potential: PairPotential,
        bx: PeriodicBox,
        s: f64,
        eps: f64,
        diffusive_time: bool,
    ) -> Result<Self> {
        if profile.dim != bx.dim {
            return Err(Error::Config(format!(
                "profile dim {} != box dim {}",
                profile.dim, bx.dim
            )));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Config(format!("s = {s} must lie in [0, 1]")));
        }
        if !(eps > 0.0) || eps * profile.radius > bx.side / 2.0 {
            return Err(Error::RadiusTooLarge {
                r: eps * profile.radius,
                half: bx.side / 2.0,
            });
        }
        if potential.range() > bx.side / 2.0 {
            return Err(Error::RadiusTooLarge {
                r: potential.range(),
                half: bx.side / 2.0,
            });
        }
        Ok(Self {
            profile,
            potential,
            bx,
            s,
            eps,
            diffusive_time,
        })
    }

    pub fn time_scale(&self) -> f64 {
        if self.diffusive_time {
            self.eps.powi(-2)
        } else {
            1.0
        }
    }

    /// every particle whose rate can depend on a given position lies within
    /// this distance of it
    fn influence_radius(&self) -> f64 {
        self.potential.range() + self.eps * self.profile.radius
    }
}

/// Jump-rate density c(gamma, x_i, y) over target positions y, including
/// the time scale and the scaled profile factor.
pub fn jump_rate(
    gamma: &Configuration,
    i: usize,
    y: &[f64],
    p: &KawasakiParams,
) -> Result<f64> {
    let x = gamma.point(i);
    let a = p.profile.scaled_density(&p.bx.min_image_diff(x, y), p.eps);
    if a == 0.0 {
        return Ok(0.0);
    }
    let ex = relative_energy_unchecked(x, gamma, &p.potential, &p.bx, Some(i));
    let ey = relative_energy_unchecked(y, gamma, &p.potential, &p.bx, Some(i));
    let expo = (1.0 - p.s) * ex - p.s * ey;
    if expo == f64::INFINITY {
        return Err(Error::InfiniteRate);
    }
    Ok(p.time_scale() * a * expo.exp())
}

/// Reversibility of the rates with respect to the grand-canonical weight
/// z^{|gamma|} e^{-U}: log of pi(gamma) c(gamma, x, y) minus its reverse.
/// For s = 1/2 this cancels identically; the residual is the numeric error.
pub fn detailed_balance_residual(
    gamma: &Configuration,
    i: usize,
    y: &[f64],
    p: &KawasakiParams,
) -> Result<f64> {
    let fwd = jump_rate(gamma, i, y, p)?;
    let moved = gamma.replace(i, y.to_vec());
    let bwd = jump_rate(&moved, i, gamma.point(i), p)?;
    if fwd == 0.0 && bwd == 0.0 {
        return Ok(0.0);
    }
    let u_fwd = total_energy(gamma, &p.potential, &p.bx);
    let u_bwd = total_energy(&moved, &p.potential, &p.bx);
    Ok(((-u_fwd) + fwd.ln() - (-u_bwd) - bwd.ln()).abs())
}

#[derive(Debug, Clone)]
pub struct JumpEvent {
    pub time: f64,
    pub particle: u64,
    pub from: Point,
    pub to: Point,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub events: Vec<JumpEvent>,
    pub final_config: Configuration,
    /// observable values on the uniform time grid, one row per grid time
    pub obs_times: Vec<f64>,
    pub obs_values: Vec<Vec<f64>>,
    /// cumulative unwrapped displacement per particle id, in input order
    pub displacement: Vec<(u64, Point)>,
    pub n_proposed: u64,
    pub n_accepted: u64,
}

#[derive(Clone, Copy)]
struct HeapEntry {
    t: f64,
    idx: usize,
    version: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.idx == other.idx
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, index as a deterministic tie-break
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Exact thinning simulation. Each particle carries a rate bound
/// R_i = tau m0 exp[(1-s) E(x_i) - s phi_min N_i], with N_i the count of
/// particles close enough to interact with any admissible target; a firing
/// particle proposes a displacement from the profile and accepts with the
/// exact ratio of true rate density to bound, which never exceeds one.
pub fn simulate(
    initial: &Configuration,
    p: &KawasakiParams,
    t_max: f64,
    seed: u64,
    observables: &[crate::cylinder::CylinderFunction],
    obs_interval: f64,
) -> Result<Trajectory> {
    let n = initial.len();
    let mut gamma = initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = &p.bx;
    let tau = p.time_scale();
    let phi_min = p.potential.lower_bound();
    let reach = p.influence_radius();
    if reach > bx.side / 2.0 {
        return Err(Error::RadiusTooLarge {
            r: reach,
            half: bx.side / 2.0,
        });
    }

    let bound_of = |gamma: &Configuration, i: usize| -> Result<f64> {
        let x = gamma.point(i);
        let ex = relative_energy_unchecked(x, gamma, &p.potential, bx, Some(i));
        let n_i = if p.potential.is_zero() {
            0
        } else {
            neighbors_within(gamma, x, reach, bx, Some(i))?.len()
        };
        let expo = (1.0 - p.s) * ex - p.s * phi_min * n_i as f64;
        if expo == f64::INFINITY {
            return Err(Error::InfiniteRate);
        }
        Ok(tau * p.profile.m0 * expo.exp())
    };

    let mut versions = vec![0u64; n];
    let mut bounds = vec![0.0f64; n];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(2 * n);

    let schedule = |heap: &mut BinaryHeap<HeapEntry>,
                        bounds: &mut Vec<f64>,
                        versions: &mut Vec<u64>,
                        gamma: &Configuration,
                        i: usize,
                        now: f64,
                        rng: &mut ChaCha8Rng|
     -> Result<()> {
        let r = bound_of(gamma, i)?;
        bounds[i] = r;
        versions[i] += 1;
        let dt = -rng.gen::<f64>().ln() / r;
        heap.push(HeapEntry {
            t: now + dt,
            idx: i,
            version: versions[i],
        });
        Ok(())
    };

    for i in 0..n {
        schedule(&mut heap, &mut bounds, &mut versions, &gamma, i, 0.0, &mut rng)?;
    }

    let mut events = Vec::new();
    let mut unwrapped: Vec<Point> = vec![vec![0.0; bx.dim]; n];
    let mut obs_times = Vec::new();
    let mut obs_values = Vec::new();
    let mut next_obs = 0.0f64;
    let record_until =
        |until: f64, gamma: &Configuration, next_obs: &mut f64, obs_times: &mut Vec<f64>, obs_values: &mut Vec<Vec<f64>>| {
            while *next_obs <= until + 1e-12 && *next_obs <= t_max + 1e-12 {
                obs_times.push(*next_obs);
                obs_values.push(observables.iter().map(|f| f.evaluate(gamma, bx)).collect());
                *next_obs += obs_interval;
            }
        };

    let mut n_proposed = 0u64;
    let mut n_accepted = 0u64;
    while let Some(e) = heap.pop() {
        if e.version != versions[e.idx] {
            continue; // stale entry
        }
        if e.t > t_max {
            break;
        }
        record_until(e.t, &gamma, &mut next_obs, &mut obs_times, &mut obs_values);
        let t = e.t;
        let i = e.idx;
        n_proposed += 1;
        let h = p.profile.sample_displacement(&mut rng);
        let x = gamma.point(i).clone();
        let y: Point = x
            .iter()
            .zip(&h)
            .map(|(&c, &hc)| bx.wrap_coord(c + p.eps * hc))
            .collect();
        let ey = relative_energy_unchecked(&y, &gamma, &p.potential, bx, Some(i));
        let ex = relative_energy_unchecked(&x, &gamma, &p.potential, bx, Some(i));
        let n_i = if p.potential.is_zero() {
            0
        } else {
            neighbors_within(&gamma, &x, reach, bx, Some(i))?.len()
        };
        // true density / (bound * proposal density) in log form
        let log_acc = -p.s * ey + p.s * phi_min * n_i as f64
            + (1.0 - p.s) * ex
            - (bounds[i] / (tau * p.profile.m0)).ln();
        if log_acc > 1e-9 {
            return Err(Error::BoundViolation(log_acc.exp()));
        }
        let accept = log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc;
        if accept {
            n_accepted += 1;
            events.push(JumpEvent {
                time: t,
                particle: gamma.id(i),
                from: x.clone(),
                to: y.clone(),
            });
            for (u, &hc) in unwrapped[i].iter_mut().zip(&h) {
                *u += p.eps * hc;
            }
            gamma.relocate(i, y.clone());
            // neighbors of either endpoint see a changed environment
            if !p.potential.is_zero() {
                let mut touched: Vec<usize> = neighbors_within(&gamma, &x, reach, bx, Some(i))?
                    .into_iter()
                    .chain(neighbors_within(&gamma, &y, reach, bx, Some(i))?)
                    .map(|(j, _)| j)
                    .collect();
                touched.sort_unstable();
                touched.dedup();
                for j in touched {
                    schedule(&mut heap, &mut bounds, &mut versions, &gamma, j, t, &mut rng)?;
                }
            }
        }
        schedule(&mut heap, &mut bounds, &mut versions, &gamma, i, t, &mut rng)?;
    }
    record_until(t_max, &gamma, &mut next_obs, &mut obs_times, &mut obs_values);

    debug_assert_eq!(gamma.len(), n);
    let displacement = (0..n).map(|i| (gamma.id(i), unwrapped[i].clone())).collect();
    Ok(Trajectory {
        events,
        final_config: gamma,
        obs_times,
        obs_values,
        displacement,
        n_proposed,
        n_accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_cube;
    use crate::stats::ks_test;
    use std::collections::BTreeSet;

    fn free_params(d: usize, l: f64) -> KawasakiParams {
        KawasakiParams::new(
            JumpProfile::new(ProfileKind::Indicator, 1.0, d).unwrap(),
            PairPotential::zero(),
            PeriodicBox::new(d, l).unwrap(),
            0.5,
            1.0,
            false,
        )
        .unwrap()
    }

    #[test]
    fn indicator_profile_constants() {
        let pr = JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap();
        assert!((pr.m0 - 2.0).abs() < 1e-12);
        assert!((pr.c - 2.0 / 3.0).abs() < 1e-12);
        assert!(pr.quad_err < 1e-12);
        let pr3 = JumpProfile::new(ProfileKind::Indicator, 1.0, 3).unwrap();
        // ball volume 4 pi / 3, second moment (4 pi / 3) (3 / 5) / 3
        assert!((pr3.m0 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-10);
        assert!((pr3.c - 4.0 * std::f64::consts::PI / 15.0).abs() < 1e-10);
    }

    #[test]
    fn scaled_profile_mass_and_second_moment() {
        // int a_eps = m0 and int a_eps(u) u1^2 du = eps^2 c, checked by
        // cube quadrature in d = 2
        let pr = JumpProfile::new(ProfileKind::Bump, 1.0, 2).unwrap();
        for &eps in &[1.0, 0.5] {
            let lim = eps * pr.radius;
            let mass = integrate_cube(2, -lim, lim, 160, |u| pr.scaled_density(u, eps));
            let m2 = integrate_cube(2, -lim, lim, 160, |u| pr.scaled_density(u, eps) * u[0] * u[0]);
            assert!((mass - pr.m0).abs() < 2e-3, "eps {eps}: mass {mass} vs {}", pr.m0);
            assert!(
                (m2 - eps * eps * pr.c).abs() < 2e-3,
                "eps {eps}: m2 {m2} vs {}",
                eps * eps * pr.c
            );
        }
    }

    #[test]
    fn displacement_sampler_matches_profile() {
        // d = 1 indicator: |h| uniform on [0,1], sign symmetric, so h is
        // uniform on [-1,1]
        let pr = JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<f64> = (0..20_000).map(|_| pr.sample_displacement(&mut rng)[0]).collect();
        let (_, pval) = ks_test(&mut xs, |x| ((x + 1.0) / 2.0).clamp(0.0, 1.0));
        assert!(pval > 1e-3, "KS p = {pval}");
    }

    #[test]
    fn bump_displacement_radius_law() {
        // d = 2 bump: radius density proportional to r exp(-q/(1-q));
        // KS against the quadrature CDF
        let pr = JumpProfile::new(ProfileKind::Bump, 1.0, 2).unwrap();
        let dens = |r: f64| r * radial_profile(ProfileKind::Bump, 1.0, r);
        let z = integrate_1d(dens, 0.0, 1.0, 128);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rs: Vec<f64> = (0..20_000)
            .map(|_| norm(&pr.sample_displacement(&mut rng)))
            .collect();
        let (_, pval) = ks_test(&mut rs, |r| {
            integrate_1d(dens, 0.0, r.clamp(0.0, 1.0), 64) / z
        });
        assert!(pval > 1e-3, "KS p = {pval}");
    }

    #[test]
    fn free_particle_interjump_times_exponential() {
        // phi == 0: each particle jumps at the constant rate m0
        let p = free_params(1, 10.0);
        let gamma = Configuration::new(&p.bx, vec![vec![5.0]]).unwrap();
        let tr = simulate(&gamma, &p, 2_000.0, 17, &[], f64::INFINITY).unwrap();
        assert_eq!(tr.n_proposed, tr.n_accepted); // free dynamics never rejects
        let mut gaps: Vec<f64> = Vec::with_capacity(tr.events.len());
        let mut prev = 0.0;
        for e in &tr.events {
            gaps.push(e.time - prev);
            prev = e.time;
        }
        let rate = p.profile.m0;
        let (_, pval) = ks_test(&mut gaps, |x| 1.0 - (-rate * x.max(0.0)).exp());
        assert!(pval > 1e-3, "KS p = {pval}, n = {}", gaps.len());
    }

    #[test]
    fn first_jump_time_matches_quadrature_total_rate() {
        // two interacting particles: until the first jump the total rate is
        // frozen, so the first event time is exponential with the
        // quadrature value of sum_i int c_i(y) dy
        let bx = PeriodicBox::new(1, 10.0).unwrap();
        let phi = PairPotential::smooth_bump(1.5, 1.0);
        let p = KawasakiParams::new(
            JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap(),
            phi,
            bx,
            0.5,
            1.0,
            false,
        )
        .unwrap();
        let gamma = Configuration::new(&p.bx, vec![vec![4.8], vec![5.3]]).unwrap();
        let mut total = 0.0;
        for i in 0..2 {
            let x = gamma.point(i)[0];
            total += integrate_1d(
                |y| jump_rate(&gamma, i, &[p.bx.wrap_coord(y)], &p).unwrap(),
                x - 1.0,
                x + 1.0,
                256,
            );
        }
        let mut firsts = Vec::with_capacity(3_000);
        for k in 0..3_000u64 {
            let tr = simulate(&gamma, &p, 50.0, 1_000 + k, &[], f64::INFINITY).unwrap();
            firsts.push(tr.events.first().map_or(50.0, |e| e.time));
        }
        let (_, pval) = ks_test(&mut firsts, |x| 1.0 - (-total * x.max(0.0)).exp());
        assert!(pval > 1e-3, "KS p = {pval}, total rate {total}");
    }

    #[test]
    fn detailed_balance_is_algebraically_exact() {
        let bx = PeriodicBox::new(2, 8.0).unwrap();
        let phi = PairPotential::soft_core(2.0, 1.2);
        let p = KawasakiParams::new(
            JumpProfile::new(ProfileKind::Bump, 1.0, 2).unwrap(),
            phi,
            bx,
            0.5,
            1.0,
            false,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts: Vec<Point> = (0..12)
            .map(|_| vec![rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0)])
            .collect();
        let gamma = Configuration::new(&p.bx, pts).unwrap();
        for _ in 0..50 {
            let i = rng.gen_range(0..gamma.len());
            let h = p.profile.sample_displacement(&mut rng);
            let y: Point = gamma
                .point(i)
                .iter()
                .zip(&h)
                .map(|(&c, &hc)| p.bx.wrap_coord(c + hc))
                .collect();
            let res = detailed_balance_residual(&gamma, i, &y, &p).unwrap();
            assert!(res < 1e-10, "residual {res}");
        }
    }

    #[test]
    fn every_s_is_reversible() {
        // pi(gamma) c(gamma, x, y) = z^n e^{-U(gamma minus x)} a(x - y)
        // exp[-s E(x) - s E(y)] is symmetric under swapping x and y, so the
        // whole one-parameter family satisfies detailed balance
        let bx = PeriodicBox::new(1, 10.0).unwrap();
        for &s in &[0.0, 0.3, 0.9] {
            let p = KawasakiParams::new(
                JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap(),
                PairPotential::smooth_bump(2.0, 1.0),
                bx.clone(),
                s,
                1.0,
                false,
            )
            .unwrap();
            let gamma = Configuration::new(&p.bx, vec![vec![4.9], vec![5.2]]).unwrap();
            let res = detailed_balance_residual(&gamma, 0, &[4.5], &p).unwrap();
            assert!(res < 1e-12, "s = {s}: residual {res}");
        }
    }

    #[test]
    fn particle_count_and_ids_conserved() {
        let bx = PeriodicBox::new(1, 10.0).unwrap();
        let phi = PairPotential::smooth_bump(1.0, 1.0);
        let p = KawasakiParams::new(
            JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap(),
            phi,
            bx,
            0.5,
            0.5,
            true,
        )
        .unwrap();
        let pts: Vec<Point> = (0..8).map(|i| vec![0.3 + 1.2 * i as f64]).collect();
        let gamma = Configuration::new(&p.bx, pts).unwrap();
        let tr = simulate(&gamma, &p, 2.0, 3, &[], f64::INFINITY).unwrap();
        assert_eq!(tr.final_config.len(), gamma.len());
        let before: BTreeSet<u64> = (0..gamma.len()).map(|i| gamma.id(i)).collect();
        let after: BTreeSet<u64> = (0..tr.final_config.len())
            .map(|i| tr.final_config.id(i))
            .collect();
        assert_eq!(before, after);
        assert!(tr.n_accepted <= tr.n_proposed);
        assert!(!tr.events.is_empty());
    }

    #[test]
    fn diffusive_scaling_msd_is_epsilon_free() {
        // free dynamics at diffusive time scale: per-particle MSD over [0,T]
        // approximates c T at every eps
        let t_end = 20.0;
        let mut msds = Vec::new();
        for &eps in &[1.0, 0.5] {
            let p = KawasakiParams::new(
                JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap(),
                PairPotential::zero(),
                PeriodicBox::new(1, 10.0).unwrap(),
                0.5,
                eps,
                true,
            )
            .unwrap();
            let gamma = Configuration::new(&p.bx, vec![vec![5.0]]).unwrap();
            let mut sq = Vec::with_capacity(400);
            for k in 0..400u64 {
                let tr = simulate(&gamma, &p, t_end, 40_000 + k, &[], f64::INFINITY).unwrap();
                sq.push(tr.displacement[0].1[0].powi(2));
            }
            let (m, se) = crate::stats::mean_stderr(&sq);
            let expect = p.profile.c * t_end;
            assert!(
                (m - expect).abs() < 4.0 * se,
                "eps {eps}: msd {m} +- {se} vs {expect}"
            );
            msds.push(m);
        }
        assert!((msds[0] - msds[1]).abs() < 0.15 * msds[0].abs().max(1.0));
    }

    #[test]
    fn observables_recorded_on_grid() {
        let p = free_params(2, 10.0);
        let cat = crate::cylinder::catalog(&p.bx);
        let gamma = Configuration::new(&p.bx, vec![vec![5.0, 5.0], vec![2.0, 2.0]]).unwrap();
        let tr = simulate(&gamma, &p, 1.0, 11, &cat, 0.25).unwrap();
        assert_eq!(tr.obs_times.len(), 5);
        assert_eq!(tr.obs_values[0].len(), cat.len());
        for (k, &t) in tr.obs_times.iter().enumerate() {
            assert!((t - 0.25 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn time_scaling_is_exact_time_change() {
        // multiplying every rate by tau = eps^{-2} only rescales the
        // exponential clocks, so with the same seed the scaled run to
        // horizon T replays the unscaled run to horizon T / eps^2 with
        // every event time multiplied by eps^2
        let bx = PeriodicBox::new(1, 10.0).unwrap();
        let phi = PairPotential::smooth_bump(1.0, 1.0);
        let eps = 0.5;
        let mk = |scaled: bool| {
            KawasakiParams::new(
                JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap(),
                phi.clone(),
                bx.clone(),
                0.5,
                eps,
                scaled,
            )
            .unwrap()
        };
        let gamma =
            Configuration::new(&bx, vec![vec![4.6], vec![5.1], vec![8.0]]).unwrap();
        let t_end = 3.0;
        let fast = simulate(&gamma, &mk(true), t_end, 99, &[], f64::INFINITY).unwrap();
        let slow = simulate(&gamma, &mk(false), t_end / (eps * eps), 99, &[], f64::INFINITY)
            .unwrap();
        assert_eq!(fast.events.len(), slow.events.len());
        for (a, b) in fast.events.iter().zip(&slow.events) {
            assert_eq!(a.particle, b.particle);
            assert_eq!(a.to, b.to);
            assert!((a.time - b.time * eps * eps).abs() < 1e-9 * b.time.max(1.0));
        }
    }

    #[test]
    fn oversized_jump_radius_rejected() {
        let pr = JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap();
        let bx = PeriodicBox::new(1, 4.0).unwrap();
        let r = KawasakiParams::new(pr, PairPotential::zero(), bx, 0.5, 3.0, false);
        assert!(matches!(r, Err(Error::RadiusTooLarge { .. })));
    }
}
