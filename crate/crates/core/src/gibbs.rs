//! Finite-volume grand-canonical Gibbs sampler and its diagnostics.
//!
//! Birth/death/translate Metropolis--Hastings targeting the unnormalized
//! density z^{|gamma|} e^{-U(gamma)} on the periodic box. The sampler's
//! primary correctness oracle is the Georgii--Nguyen--Zessin identity; the
//! correlation estimators feed the Ruelle-bound diagnostics and the
//! invariance checks of both dynamics.

use crate::error::{Error, Result};
use crate::potential::{relative_energy_unchecked, PairPotential};
use crate::space::{norm, Configuration, PeriodicBox, Point};
use crate::stats::{batch_mean_stderr, mean_stderr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GibbsParams {
    pub z: f64,
    pub potential: PairPotential,
    pub bx: PeriodicBox,
}

impl GibbsParams {
    pub fn new(z: f64, potential: PairPotential, bx: PeriodicBox) -> Result<Self> {
        if !(z > 0.0) {
            return Err(Error::Config(format!("activity z = {z} must be > 0")));
        }
        if potential.range() > bx.side / 2.0 {
            return Err(Error::RadiusTooLarge {
                r: potential.range(),
                half: bx.side / 2.0,
            });
        }
        Ok(Self { z, potential, bx })
    }
}

/// Move mix and step size; defaults are 40% birth, 40% death, 20% translate
/// with step L/20.
#[derive(Debug, Clone)]
pub struct SamplerSettings {
    pub p_birth: f64,
    pub p_death: f64,
    pub translate_step: f64,
}

impl SamplerSettings {
    pub fn defaults(bx: &PeriodicBox) -> Self {
        Self {
            p_birth: 0.4,
            p_death: 0.4,
            translate_step: bx.side / 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Birth,
    Death,
    Translate,
}

#[derive(Debug, Clone, Copy)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct AcceptanceStats {
    pub attempted: [u64; 3],
    pub accepted: [u64; 3],
}

impl AcceptanceStats {
    fn record(&mut self, o: MoveOutcome) {
        let k = o.kind as usize;
        self.attempted[k] += 1;
        if o.accepted {
            self.accepted[k] += 1;
        }
    }

    pub fn rate(&self, kind: MoveKind) -> f64 {
        let k = kind as usize;
        if self.attempted[k] == 0 {
            f64::NAN
        } else {
            self.accepted[k] as f64 / self.attempted[k] as f64
        }
    }
}

/// One Metropolis--Hastings step: exactly one move attempted, in place.
pub fn mcmc_step_in_place(
    gamma: &mut Configuration,
    p: &GibbsParams,
    settings: &SamplerSettings,
    rng: &mut ChaCha8Rng,
) -> MoveOutcome {
    let bx = &p.bx;
    let vol = bx.volume();
    let u: f64 = rng.gen();
    if u < settings.p_birth {
        // birth: accept with min(1, z V e^{-E(x,gamma)} / (n+1))
        let x: Point = (0..bx.dim).map(|_| rng.gen_range(0.0..bx.side)).collect();
        let e = relative_energy_unchecked(&x, gamma, &p.potential, bx, None);
        let log_acc = p.z.ln() + vol.ln() - e - ((gamma.len() + 1) as f64).ln();
        let accepted = log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc;
        if accepted {
            gamma.push(x);
        }
        MoveOutcome {
            kind: MoveKind::Birth,
            accepted,
        }
    } else if u < settings.p_birth + settings.p_death {
        // death: reciprocal form
        if gamma.is_empty() {
            return MoveOutcome {
                kind: MoveKind::Death,
                accepted: false,
            };
        }
        let i = rng.gen_range(0..gamma.len());
        let e = relative_energy_unchecked(gamma.point(i), gamma, &p.potential, bx, Some(i));
        let log_acc = (gamma.len() as f64).ln() + e - p.z.ln() - vol.ln();
        let accepted = log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc;
        if accepted {
            gamma.remove(i);
        }
        MoveOutcome {
            kind: MoveKind::Death,
            accepted,
        }
    } else {
        // translate: symmetric proposal, accept with min(1, e^{-dU})
        if gamma.is_empty() {
            return MoveOutcome {
                kind: MoveKind::Translate,
                accepted: false,
            };
        }
        let i = rng.gen_range(0..gamma.len());
        let step = settings.translate_step;
        let old = gamma.point(i).clone();
        let prop: Point = old
            .iter()
            .map(|&c| bx.wrap_coord(c + rng.gen_range(-step..step)))
            .collect();
        let e_old = relative_energy_unchecked(&old, gamma, &p.potential, bx, Some(i));
        let e_new = relative_energy_unchecked(&prop, gamma, &p.potential, bx, Some(i));
        let log_acc = e_old - e_new;
        let accepted = log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc;
        if accepted {
            gamma.relocate(i, prop);
        }
        MoveOutcome {
            kind: MoveKind::Translate,
            accepted,
        }
    }
}

/// Pure-value step: returns the next configuration and the move outcome.
pub fn mcmc_step(
    gamma: &Configuration,
    p: &GibbsParams,
    settings: &SamplerSettings,
    rng: &mut ChaCha8Rng,
) -> (Configuration, MoveOutcome) {
    let mut next = gamma.clone();
    let outcome = mcmc_step_in_place(&mut next, p, settings, rng);
    (next, outcome)
}

#[derive(Debug, Clone)]
pub struct SamplerMeta {
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance: AcceptanceStats,
    /// move types whose acceptance rate fell below 1%
    pub low_acceptance: Vec<&'static str>,
}

/// An empirical stand-in for the Gibbs measure: thinned equilibrium samples.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub samples: Vec<Configuration>,
    pub meta: SamplerMeta,
}

impl Ensemble {
    pub fn mean_count(&self) -> (f64, f64) {
        let counts: Vec<f64> = self.samples.iter().map(|g| g.len() as f64).collect();
        batch_mean_stderr(&counts)
    }
}

/// Draw n thinned post-burn-in samples from the chain started at the empty
/// configuration.
pub fn sample(
    p: &GibbsParams,
    n: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<Ensemble> {
    assert!(n >= 1);
    let settings = SamplerSettings::defaults(&p.bx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = Configuration::empty(&p.bx);
    let mut stats = AcceptanceStats::default();
    for _ in 0..burn_in {
        stats.record(mcmc_step_in_place(&mut gamma, p, &settings, &mut rng));
    }
    let thin = thin.max(1);
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        for _ in 0..thin {
            stats.record(mcmc_step_in_place(&mut gamma, p, &settings, &mut rng));
        }
        samples.push(gamma.clone());
    }
    let mut low = Vec::new();
    for (kind, name) in [
        (MoveKind::Birth, "birth"),
        (MoveKind::Death, "death"),
        (MoveKind::Translate, "translate"),
    ] {
        let r = stats.rate(kind);
        if r.is_finite() && r < 0.01 {
            low.push(name);
        }
    }
    Ok(Ensemble {
        samples,
        meta: SamplerMeta {
            seed,
            burn_in,
            thin,
            acceptance: stats,
            low_acceptance: low,
        },
    })
}

#[derive(Debug, Clone)]
pub struct GnzResidual {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// z-score of the per-sample lhs - rhs difference
    pub z_score: f64,
}

/// Single GNZ identity residual for a test function F(gamma, x). The
/// right-hand x-integral is estimated by uniform Monte Carlo over the box
/// with `n_x` points per sample.
pub fn gnz_residual(
    ensemble: &Ensemble,
    p: &GibbsParams,
    f: &dyn Fn(&Configuration, &[f64]) -> f64,
    n_x: usize,
    seed: u64,
) -> GnzResidual {
    let bx = &p.bx;
    let vol = bx.volume();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs_terms = Vec::with_capacity(ensemble.samples.len());
    let mut rhs_terms = Vec::with_capacity(ensemble.samples.len());
    for gamma in &ensemble.samples {
        let lhs: f64 = (0..gamma.len()).map(|i| f(gamma, gamma.point(i))).sum();
        let mut rhs = 0.0;
        for _ in 0..n_x {
            let x: Point = (0..bx.dim).map(|_| rng.gen_range(0.0..bx.side)).collect();
            let e = relative_energy_unchecked(&x, gamma, &p.potential, bx, None);
            let aug = gamma.adjoin(x.clone());
            rhs += (-e).exp() * f(&aug, &x);
        }
        rhs *= p.z * vol / n_x as f64;
        lhs_terms.push(lhs);
        rhs_terms.push(rhs);
    }
    finish_residual(&lhs_terms, &rhs_terms)
}

/// Double GNZ identity residual for U(gamma, x1, x2).
pub fn gnz2_residual(
    ensemble: &Ensemble,
    p: &GibbsParams,
    u: &dyn Fn(&Configuration, &[f64], &[f64]) -> f64,
    n_x: usize,
    seed: u64,
) -> GnzResidual {
    let bx = &p.bx;
    let vol = bx.volume();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs_terms = Vec::with_capacity(ensemble.samples.len());
    let mut rhs_terms = Vec::with_capacity(ensemble.samples.len());
    for gamma in &ensemble.samples {
        let mut lhs = 0.0;
        for i in 0..gamma.len() {
            for j in 0..gamma.len() {
                if i != j {
                    lhs += u(gamma, gamma.point(i), gamma.point(j));
                }
            }
        }
        let mut rhs = 0.0;
        for _ in 0..n_x {
            let x1: Point = (0..bx.dim).map(|_| rng.gen_range(0.0..bx.side)).collect();
            let x2: Point = (0..bx.dim).map(|_| rng.gen_range(0.0..bx.side)).collect();
            if x1 == x2 {
                continue;
            }
            let e1 = relative_energy_unchecked(&x1, gamma, &p.potential, bx, None);
            let e2 = relative_energy_unchecked(&x2, gamma, &p.potential, bx, None);
            let phi12 = p.potential.value(&bx.min_image_diff(&x1, &x2));
            let aug = gamma.adjoin(x1.clone()).adjoin(x2.clone());
            rhs += (-e1 - e2 - phi12).exp() * u(&aug, &x1, &x2);
        }
        rhs *= (p.z * vol).powi(2) / n_x as f64;
        lhs_terms.push(lhs);
        rhs_terms.push(rhs);
    }
    finish_residual(&lhs_terms, &rhs_terms)
}

fn finish_residual(lhs_terms: &[f64], rhs_terms: &[f64]) -> GnzResidual {
    let (lhs, lhs_se) = batch_mean_stderr(lhs_terms);
    let (rhs, rhs_se) = batch_mean_stderr(rhs_terms);
    let diffs: Vec<f64> = lhs_terms
        .iter()
        .zip(rhs_terms)
        .map(|(a, b)| a - b)
        .collect();
    let (dmean, dse) = batch_mean_stderr(&diffs);
    let z = if dse > 0.0 { dmean / dse } else { 0.0 };
    GnzResidual {
        lhs,
        lhs_stderr: lhs_se,
        rhs,
        rhs_stderr: rhs_se,
        z_score: z,
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub order: usize,
    /// bin edges for order 2 (radial); single bin for order 1
    pub bin_edges: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// smallest xi with k^(n) <= xi^n across the tested orders
    pub ruelle_xi: f64,
}

/// Order-1 (intensity) or order-2 (pair density vs distance) correlation
/// estimates. Order 2 uses the pair-distance histogram normalized by torus
/// shell volumes; errors by batch means over samples.
pub fn estimate_correlation(
    ensemble: &Ensemble,
    bx: &PeriodicBox,
    order: usize,
    bin_edges: &[f64],
) -> Result<CorrelationEstimate> {
    assert!(order == 1 || order == 2);
    let vol = bx.volume();
    if order == 1 {
        let per: Vec<f64> = ensemble
            .samples
            .iter()
            .map(|g| g.len() as f64 / vol)
            .collect();
        let (m, se) = batch_mean_stderr(&per);
        return Ok(CorrelationEstimate {
            order: 1,
            bin_edges: vec![],
            values: vec![m],
            stderrs: vec![se],
            ruelle_xi: m,
        });
    }
    if bin_edges.len() < 2 {
        return Err(Error::Config("need at least one order-2 bin".into()));
    }
    let rmax = *bin_edges.last().unwrap();
    if rmax > bx.side / 2.0 {
        return Err(Error::RadiusTooLarge {
            r: rmax,
            half: bx.side / 2.0,
        });
    }
    let nb = bin_edges.len() - 1;
    let area = crate::quad::unit_sphere_area(bx.dim);
    let shell: Vec<f64> = (0..nb)
        .map(|b| {
            let (lo, hi) = (bin_edges[b], bin_edges[b + 1]);
            area / bx.dim as f64 * (hi.powi(bx.dim as i32) - lo.powi(bx.dim as i32))
        })
        .collect();
    // per-sample normalized bin values, then batch means per bin
    let mut per_sample: Vec<Vec<f64>> = vec![Vec::with_capacity(ensemble.samples.len()); nb];
    for gamma in &ensemble.samples {
        let mut counts = vec![0.0f64; nb];
        let n = gamma.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = norm(&bx.min_image_diff(gamma.point(i), gamma.point(j)));
                if r < rmax {
                    if let Some(b) = bin_of(bin_edges, r) {
                        counts[b] += 1.0;
                    }
                }
            }
        }
        for b in 0..nb {
            per_sample[b].push(counts[b] / (vol * shell[b]));
        }
    }
    let mut values = Vec::with_capacity(nb);
    let mut stderrs = Vec::with_capacity(nb);
    for b in 0..nb {
        let (m, se) = batch_mean_stderr(&per_sample[b]);
        values.push(m);
        stderrs.push(se);
    }
    let k1 = estimate_correlation(ensemble, bx, 1, &[])?.values[0];
    let xi2 = values.iter().fold(0.0f64, |acc, &v| acc.max(v.max(0.0).sqrt()));
    Ok(CorrelationEstimate {
        order: 2,
        bin_edges: bin_edges.to_vec(),
        values,
        stderrs,
        ruelle_xi: k1.max(xi2),
    })
}

fn bin_of(edges: &[f64], r: f64) -> Option<usize> {
    if r < edges[0] {
        return None;
    }
    for b in 0..edges.len() - 1 {
        if r < edges[b + 1] {
            return Some(b);
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct RuelleReport {
    pub xi: f64,
    pub pass: bool,
    pub inconclusive: bool,
}

/// Smallest xi with the estimated correlations below xi^n; a single-sample
/// ensemble has no error bars and is flagged inconclusive.
pub fn ruelle_check(est: &CorrelationEstimate, n_samples: usize) -> RuelleReport {
    RuelleReport {
        xi: est.ruelle_xi,
        pass: est.ruelle_xi.is_finite(),
        inconclusive: n_samples < 2,
    }
}

/// Detailed-balance residual of a single proposed move, checked in exact
/// log space: forward times backward acceptance-ratio product must be 1.
pub fn birth_death_balance_residual(
    gamma: &Configuration,
    x: &[f64],
    p: &GibbsParams,
) -> f64 {
    let e = relative_energy_unchecked(x, gamma, &p.potential, &p.bx, None);
    let vol = p.bx.volume();
    let n1 = (gamma.len() + 1) as f64;
    // log acceptance ratios, not clipped at 0: birth(gamma -> gamma u x)
    // plus death(gamma u x -> gamma) must cancel exactly
    let log_birth = p.z.ln() + vol.ln() - e - n1.ln();
    let log_death = n1.ln() + e - p.z.ln() - vol.ln();
    (log_birth + log_death).abs()
}

pub fn mean_of(values: &[f64]) -> (f64, f64) {
    mean_stderr(values)
}
