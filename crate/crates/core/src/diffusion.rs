//! The limiting gradient dynamics: interacting Brownian particles
//! dx_i = -(c/2) sum_{j != i} grad phi(x_i - x_j) dt + sqrt(c) dB_i,
//! integrated by Euler--Maruyama, plus the associated Dirichlet form.

use crate::cylinder::CylinderFunction;
use crate::error::{Error, Result};
use crate::gibbs::Ensemble;
use crate::potential::{relative_energy_unchecked, PairPotential};
use crate::space::{dot, norm, Configuration, PeriodicBox, Point};
use crate::stats::batch_mean_stderr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SdeConfig {
    pub c: f64,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl SdeConfig {
    pub fn new(c: f64, dt: f64, t_max: f64, seed: u64) -> Result<Self> {
        if !(c > 0.0) || !(dt > 0.0) || !(t_max >= 0.0) {
            return Err(Error::Config(format!(
                "SDE needs c > 0, dt > 0, t_max >= 0; got c {c}, dt {dt}, t_max {t_max}"
            )));
        }
        Ok(Self { c, dt, t_max, seed })
    }

    /// drift step vs mean interparticle spacing; callers warn above ~1%
    pub fn stability_ratio(&self, phi: &PairPotential, gamma: &Configuration, bx: &PeriodicBox) -> f64 {
        if gamma.is_empty() || phi.is_zero() {
            return 0.0;
        }
        let spacing = bx.side / (gamma.len() as f64).powf(1.0 / bx.dim as f64);
        let sup_grad = (0..200)
            .map(|k| {
                let r = phi.range() * (k as f64 + 0.5) / 200.0;
                let mut v = vec![0.0; bx.dim];
                v[0] = r;
                norm(&phi.grad(&v))
            })
            .fold(0.0f64, f64::max);
        self.dt * (self.c / 2.0) * sup_grad / spacing
    }
}

/// Per-particle drift -(c/2) sum_{j != i} grad phi(x_i - x_j), minimum
/// image. Forces accumulate pairwise with exact antisymmetry, so the total
/// drift is exactly zero for any radial potential.
pub fn drift(
    gamma: &Configuration,
    phi: &PairPotential,
    c: f64,
    bx: &PeriodicBox,
) -> Vec<Point> {
    let n = gamma.len();
    let d = bx.dim;
    let mut out = vec![vec![0.0; d]; n];
    if phi.is_zero() {
        return out;
    }
    let range = phi.range();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = bx.min_image_diff(gamma.point(i), gamma.point(j));
            if norm(&dx) > range {
                continue;
            }
            let g = phi.grad(&dx);
            for k in 0..d {
                let f = -(c / 2.0) * g[k];
                out[i][k] += f;
                out[j][k] -= f;
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SdeTrajectory {
    pub final_config: Configuration,
    pub obs_times: Vec<f64>,
    pub obs_values: Vec<Vec<f64>>,
    /// cumulative unwrapped displacement per particle id, in input order
    pub displacement: Vec<(u64, Point)>,
    pub n_steps: u64,
    pub stability_ratio: f64,
}

/// Euler--Maruyama on the torus. Observables are recorded on the uniform
/// grid k * obs_interval using the most recent state. Aborts if any single
/// step moves a particle further than L/4.
pub fn em_run(
    initial: &Configuration,
    cfg: &SdeConfig,
    phi: &PairPotential,
    bx: &PeriodicBox,
    observables: &[CylinderFunction],
    obs_interval: f64,
) -> Result<SdeTrajectory> {
    if phi.range() > bx.side / 2.0 {
        return Err(Error::RadiusTooLarge {
            r: phi.range(),
            half: bx.side / 2.0,
        });
    }
    let n = initial.len();
    let d = bx.dim;
    let mut gamma = initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut unwrapped: Vec<Point> = vec![vec![0.0; d]; n];
    let sigma = (cfg.c * cfg.dt).sqrt();
    let guard = bx.side / 4.0;
    let stability_ratio = cfg.stability_ratio(phi, &gamma, bx);

    let mut obs_times = Vec::new();
    let mut obs_values = Vec::new();
    let mut next_obs = 0.0f64;
    let record_until = |until: f64,
                            gamma: &Configuration,
                            next_obs: &mut f64,
                            obs_times: &mut Vec<f64>,
                            obs_values: &mut Vec<Vec<f64>>| {
        while *next_obs <= until + 1e-12 && *next_obs <= cfg.t_max + 1e-12 {
            obs_times.push(*next_obs);
            obs_values.push(observables.iter().map(|f| f.evaluate(gamma, bx)).collect());
            *next_obs += obs_interval;
        }
    };

    let n_steps = (cfg.t_max / cfg.dt).ceil() as u64;
    let mut t = 0.0;
    record_until(0.0, &gamma, &mut next_obs, &mut obs_times, &mut obs_values);
    for _ in 0..n_steps {
        let dr = drift(&gamma, phi, cfg.c, bx);
        for i in 0..n {
            let mut step = vec![0.0; d];
            for k in 0..d {
                let xi: f64 = rng.sample(StandardNormal);
                step[k] = dr[i][k] * cfg.dt + sigma * xi;
            }
            let s = norm(&step);
            if s > guard {
                return Err(Error::BlowUp(s));
            }
            let moved: Point = gamma
                .point(i)
                .iter()
                .zip(&step)
                .map(|(&x, &h)| bx.wrap_coord(x + h))
                .collect();
            gamma.relocate(i, moved);
            for (u, &h) in unwrapped[i].iter_mut().zip(&step) {
                *u += h;
            }
        }
        t += cfg.dt;
        record_until(t, &gamma, &mut next_obs, &mut obs_times, &mut obs_values);
    }
    record_until(cfg.t_max, &gamma, &mut next_obs, &mut obs_times, &mut obs_values);

    let displacement = (0..n).map(|i| (gamma.id(i), unwrapped[i].clone())).collect();
    Ok(SdeTrajectory {
        final_config: gamma,
        obs_times,
        obs_values,
        displacement,
        n_steps,
        stability_ratio,
    })
}

#[derive(Debug, Clone)]
pub struct FormEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Dirichlet form of the limiting dynamics in its configuration form:
/// sample mean over gamma of (c/2) sum_{x in gamma} <grad_x F, grad_x G>.
pub fn dirichlet_form_dif(
    f: &CylinderFunction,
    g: &CylinderFunction,
    ensemble: &Ensemble,
    c: f64,
    bx: &PeriodicBox,
) -> FormEstimate {
    let per: Vec<f64> = ensemble
        .samples
        .iter()
        .map(|gamma| {
            let sf = f.stats(gamma, bx);
            let sg = g.stats(gamma, bx);
            let mut acc = 0.0;
            for i in 0..gamma.len() {
                let x = gamma.point(i);
                acc += dot(&f.grad_at(&sf, x, bx), &g.grad_at(&sg, x, bx));
            }
            c / 2.0 * acc
        })
        .collect();
    let (value, stderr) = batch_mean_stderr(&per);
    FormEstimate { value, stderr }
}

/// Same form through the intensity-measure representation
/// (c/2) z int dx E_mu[e^{-E(x, gamma)} <grad_x F, grad_x G>(gamma u x)],
/// with the x-integral by seeded uniform Monte Carlo. Agreement with
/// `dirichlet_form_dif` on a shared ensemble is a GNZ consistency check.
pub fn dirichlet_form_dif_gnz(
    f: &CylinderFunction,
    g: &CylinderFunction,
    ensemble: &Ensemble,
    c: f64,
    z: f64,
    phi: &PairPotential,
    bx: &PeriodicBox,
    n_x: usize,
    seed: u64,
) -> FormEstimate {
    let vol = bx.volume();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per: Vec<f64> = ensemble
        .samples
        .iter()
        .map(|gamma| {
            let mut acc = 0.0;
            for _ in 0..n_x {
                let x: Point = (0..bx.dim).map(|_| rng.gen_range(0.0..bx.side)).collect();
                let e = relative_energy_unchecked(&x, gamma, phi, bx, None);
                let aug = gamma.adjoin(x.clone());
                let sf = f.stats(&aug, bx);
                let sg = g.stats(&aug, bx);
                acc += (-e).exp() * dot(&f.grad_at(&sf, &x, bx), &g.grad_at(&sg, &x, bx));
            }
            c / 2.0 * z * vol * acc / n_x as f64
        })
        .collect();
    let (value, stderr) = batch_mean_stderr(&per);
    FormEstimate { value, stderr }
}
