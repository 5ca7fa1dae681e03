//! Subcommand dispatch: deterministic seeding, output writing with a run
//! manifest, and the bundled verification suite.

use crate::config::{parse_config, RunConfig};
use crate::cylinder::catalog;
use crate::diffusion::{em_run, SdeConfig};
use crate::error::{Error, Result};
use crate::gibbs::{estimate_correlation, gnz2_residual, gnz_residual, sample, GibbsParams, MoveKind};
use crate::genlab::{convergence_study, moment_check, GeneratorSpec};
use crate::kawasaki::{detailed_balance_residual, simulate, JumpProfile, KawasakiParams, ProfileKind};
use crate::kcalculus::{
    k_inverse_all, k_transform_all, kinv_bound_check, closed_form_check, star_convolution,
    SubsetFunction,
};
use crate::space::{Configuration, Point};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "kawadiff", version, about = "Equilibrium Kawasaki dynamics in continuum and its diffusive scaling limit")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
    /// JSON config file; defaults apply when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// overrides the seed in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// worker count; execution is sequential so byte-identical reruns are
    /// guaranteed, values above 1 are accepted and noted
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// draw an equilibrium ensemble and report its diagnostics
    GibbsSample,
    /// simulate the jump dynamics from an equilibrium start
    KawasakiRun,
    /// integrate the limiting gradient dynamics from an equilibrium start
    DiffusionRun,
    /// generator convergence study over the scale grid
    GenConverge,
    /// run the bundled exact-identity suites; exit 0 iff all pass
    Verify,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::GibbsSample => "gibbs-sample",
            Cmd::KawasakiRun => "kawasaki-run",
            Cmd::DiffusionRun => "diffusion-run",
            Cmd::GenConverge => "gen-converge",
            Cmd::Verify => "verify",
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

struct RunContext {
    cfg: RunConfig,
    run_id: String,
    out: PathBuf,
}

impl RunContext {
    fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => parse_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        if cli.threads != 1 {
            eprintln!(
                "note: execution is sequential for reproducibility; --threads {} has no effect",
                cli.threads
            );
        }
        let canon = serde_json::to_string(&cfg)?;
        let run_id = format!(
            "{:016x}",
            fnv1a64(format!("{}|{}|{}", cli.cmd.name(), cfg.seed, canon).as_bytes())
        );
        Ok(Self {
            cfg,
            run_id,
            out: cli.out.clone(),
        })
    }

    fn write_manifest(&self, cmd: &Cmd, derived_seeds: &[(&str, u64)]) -> Result<()> {
        let seeds: serde_json::Map<String, serde_json::Value> = derived_seeds
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
            .collect();
        let manifest = serde_json::json!({
            "run_id": self.run_id,
            "subcommand": cmd.name(),
            "crate_version": env!("CARGO_PKG_VERSION"),
            "seed": self.cfg.seed,
            "derived_seeds": seeds,
            "config": self.cfg,
        });
        write_file(
            &self.out,
            "manifest.json",
            &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
        )
    }

    fn csv_header(&self) -> String {
        format!("# run {}\n", self.run_id)
    }
}

fn format_f64(v: f64) -> String {
    // shortest round-trip formatting keeps outputs byte-stable
    format!("{v}")
}

pub fn run(cli: &Cli) -> Result<()> {
    let started = std::time::Instant::now();
    let ctx = RunContext::new(cli)?;
    match cli.cmd {
        Cmd::GibbsSample => run_gibbs(&ctx)?,
        Cmd::KawasakiRun => run_kawasaki(&ctx)?,
        Cmd::DiffusionRun => run_diffusion(&ctx)?,
        Cmd::GenConverge => run_gen_converge(&ctx)?,
        Cmd::Verify => run_verify(&ctx)?,
    }
    ctx.write_manifest(&cli.cmd, &derived_seeds(&cli.cmd, ctx.cfg.seed))?;
    // wall time lives outside the manifest so reruns stay byte-identical
    write_file(
        &ctx.out,
        "timing.txt",
        &format!("wall_time_s {}\n", started.elapsed().as_secs_f64()),
    )?;
    Ok(())
}

fn derived_seeds(cmd: &Cmd, seed: u64) -> Vec<(&'static str, u64)> {
    match cmd {
        Cmd::GibbsSample => vec![("sampler", seed), ("gnz_probes", seed.wrapping_add(1))],
        Cmd::KawasakiRun | Cmd::DiffusionRun => {
            vec![("sampler", seed), ("dynamics", seed.wrapping_add(1))]
        }
        Cmd::GenConverge => vec![("sampler", seed)],
        Cmd::Verify => vec![("suite", seed)],
    }
}

struct SummaryCsv(String);

impl SummaryCsv {
    fn new(ctx: &RunContext) -> Self {
        Self(format!("{}quantity,estimate,stderr,n\n", ctx.csv_header()))
    }
    fn row(&mut self, quantity: &str, estimate: f64, stderr: f64, n: usize) {
        let _ = writeln!(
            self.0,
            "{quantity},{},{},{n}",
            format_f64(estimate),
            format_f64(stderr)
        );
    }
}

fn gibbs_params(cfg: &RunConfig) -> Result<GibbsParams> {
    GibbsParams::new(cfg.z, cfg.pair_potential()?, cfg.boxx()?)
}

fn run_gibbs(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let p = gibbs_params(cfg)?;
    let ens = sample(&p, cfg.n_samples, cfg.burn_in, cfg.thin, cfg.seed)?;
    for mv in &ens.meta.low_acceptance {
        eprintln!("warning: {mv} acceptance below 1%");
    }

    let mut jsonl = format!("{{\"run_id\":\"{}\"}}\n", ctx.run_id);
    for g in &ens.samples {
        let rows: Vec<serde_json::Value> = (0..g.len())
            .map(|i| {
                let mut row = vec![serde_json::json!(g.id(i))];
                row.extend(g.point(i).iter().map(|&x| serde_json::json!(x)));
                serde_json::Value::Array(row)
            })
            .collect();
        jsonl.push_str(&serde_json::to_string(&rows)?);
        jsonl.push('\n');
    }
    write_file(&ctx.out, "ensemble.jsonl", &jsonl)?;

    let mut summary = SummaryCsv::new(ctx);
    let n = ens.samples.len();
    let (mean, se) = ens.mean_count();
    summary.row("mean_count", mean, se, n);
    let bx = &p.bx;
    let k1 = estimate_correlation(&ens, bx, 1, &[])?;
    summary.row("k1", k1.values[0], k1.stderrs[0], n);
    let nb = 8;
    let edges: Vec<f64> = (0..=nb)
        .map(|i| bx.side / 2.0 * i as f64 / nb as f64)
        .collect();
    let k2 = estimate_correlation(&ens, bx, 2, &edges)?;
    for b in 0..nb {
        summary.row(
            &format!("k2_bin{}_r{}", b, format_f64(0.5 * (edges[b] + edges[b + 1]))),
            k2.values[b],
            k2.stderrs[b],
            n,
        );
    }
    for (kind, name) in [
        (MoveKind::Birth, "acc_birth"),
        (MoveKind::Death, "acc_death"),
        (MoveKind::Translate, "acc_translate"),
    ] {
        summary.row(name, ens.meta.acceptance.rate(kind), 0.0, n);
    }
    // GNZ identity z-scores with a window-count test function
    let (lo, hi) = (bx.side / 4.0, 3.0 * bx.side / 4.0);
    let window = move |_: &Configuration, x: &[f64]| (lo..hi).contains(&x[0]) as u8 as f64;
    let probe_seed = cfg.seed.wrapping_add(1);
    let g1 = gnz_residual(&ens, &p, &window, cfg.gnz_probes, probe_seed);
    summary.row("gnz1_z_score", g1.z_score, 0.0, n);
    let pairs = |_: &Configuration, _: &[f64], _: &[f64]| 1.0;
    let g2 = gnz2_residual(&ens, &p, &pairs, cfg.gnz_probes, probe_seed);
    summary.row("gnz2_z_score", g2.z_score, 0.0, n);
    write_file(&ctx.out, "summary.csv", &summary.0)
}

fn equilibrium_start(cfg: &RunConfig) -> Result<Configuration> {
    let p = gibbs_params(cfg)?;
    let ens = sample(&p, 1, cfg.burn_in, 1, cfg.seed)?;
    Ok(ens.samples.into_iter().next().unwrap())
}

fn observables_csv(
    ctx: &RunContext,
    names: &[String],
    times: &[f64],
    values: &[Vec<f64>],
) -> String {
    let mut s = format!("{}time,{}\n", ctx.csv_header(), names.join(","));
    for (t, row) in times.iter().zip(values) {
        let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        let _ = writeln!(s, "{},{}", format_f64(*t), cells.join(","));
    }
    s
}

fn run_kawasaki(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let bx = cfg.boxx()?;
    let init = equilibrium_start(cfg)?;
    let params = KawasakiParams::new(
        cfg.jump_profile()?,
        cfg.pair_potential()?,
        bx.clone(),
        cfg.s,
        cfg.eps,
        cfg.time_scaling,
    )?;
    let obs = catalog(&bx);
    let tr = simulate(
        &init,
        &params,
        cfg.t_max,
        cfg.seed.wrapping_add(1),
        &obs,
        cfg.obs_interval,
    )?;

    let d = bx.dim;
    let from_cols: Vec<String> = (1..=d).map(|k| format!("from_{k}")).collect();
    let to_cols: Vec<String> = (1..=d).map(|k| format!("to_{k}")).collect();
    let mut events = format!(
        "{}time,particle,{},{}\n",
        ctx.csv_header(),
        from_cols.join(","),
        to_cols.join(",")
    );
    for e in &tr.events {
        let from: Vec<String> = e.from.iter().map(|&x| format_f64(x)).collect();
        let to: Vec<String> = e.to.iter().map(|&x| format_f64(x)).collect();
        let _ = writeln!(
            events,
            "{},{},{},{}",
            format_f64(e.time),
            e.particle,
            from.join(","),
            to.join(",")
        );
    }
    write_file(&ctx.out, "events.csv", &events)?;

    let names: Vec<String> = obs.iter().map(|f| f.name.clone()).collect();
    write_file(
        &ctx.out,
        "observables.csv",
        &observables_csv(ctx, &names, &tr.obs_times, &tr.obs_values),
    )?;

    let mut summary = SummaryCsv::new(ctx);
    summary.row("n_particles", init.len() as f64, 0.0, 1);
    summary.row("n_events", tr.events.len() as f64, 0.0, 1);
    summary.row(
        "thinning_acceptance",
        if tr.n_proposed > 0 {
            tr.n_accepted as f64 / tr.n_proposed as f64
        } else {
            f64::NAN
        },
        0.0,
        tr.n_proposed as usize,
    );
    write_file(&ctx.out, "summary.csv", &summary.0)
}

fn run_diffusion(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let bx = cfg.boxx()?;
    let phi = cfg.pair_potential()?;
    let init = equilibrium_start(cfg)?;
    let c = cfg.jump_profile()?.c;
    let sde = SdeConfig::new(c, cfg.dt, cfg.t_max, cfg.seed.wrapping_add(1))?;
    let obs = catalog(&bx);
    let tr = em_run(&init, &sde, &phi, &bx, &obs, cfg.obs_interval)?;
    if tr.stability_ratio > 0.01 {
        eprintln!(
            "warning: drift step is {:.1}% of mean spacing; consider a smaller dt",
            100.0 * tr.stability_ratio
        );
    }
    let names: Vec<String> = obs.iter().map(|f| f.name.clone()).collect();
    write_file(
        &ctx.out,
        "observables.csv",
        &observables_csv(ctx, &names, &tr.obs_times, &tr.obs_values),
    )?;
    let mut summary = SummaryCsv::new(ctx);
    summary.row("n_particles", init.len() as f64, 0.0, 1);
    summary.row("n_steps", tr.n_steps as f64, 0.0, 1);
    summary.row("diffusion_constant", c, 0.0, 1);
    summary.row("stability_ratio", tr.stability_ratio, 0.0, 1);
    write_file(&ctx.out, "summary.csv", &summary.0)
}

fn run_gen_converge(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let bx = cfg.boxx()?;
    let p = gibbs_params(cfg)?;
    let ens = sample(&p, cfg.n_samples, cfg.burn_in, cfg.thin, cfg.seed)?;
    let grid = cfg.effective_eps_grid();
    let base = GeneratorSpec::new(
        cfg.jump_profile()?,
        cfg.pair_potential()?,
        cfg.z,
        cfg.s,
        grid[0],
        cfg.nodes,
    )?;
    let mut slopes = serde_json::Map::new();
    for f in &catalog(&bx) {
        let rep = convergence_study(f, &ens, &base, &grid, &bx)?;
        let mut csv = format!("{}epsilon,l2err,stderr,quad_err\n", ctx.csv_header());
        let mut dat = format!("# run {}\n# log(epsilon) log(l2err) for {}\n", ctx.run_id, f.name);
        for k in 0..grid.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                format_f64(rep.eps_grid[k]),
                format_f64(rep.l2_err[k]),
                format_f64(rep.l2_stderr[k]),
                format_f64(rep.quad_err[k])
            );
            if rep.l2_err[k] > 0.0 {
                let _ = writeln!(
                    dat,
                    "{} {}",
                    format_f64(rep.eps_grid[k].ln()),
                    format_f64(rep.l2_err[k].ln())
                );
            }
        }
        write_file(&ctx.out, &format!("convergence_{}.csv", f.name), &csv)?;
        write_file(&ctx.out, &format!("loglog_{}.dat", f.name), &dat)?;
        slopes.insert(
            f.name.clone(),
            serde_json::json!({
                "slope": rep.slope,
                "intercept": rep.intercept,
                "at_noise_floor": rep.at_noise_floor,
                "second_moment_dif": rep.second_moment_dif,
                "second_moment_eps": rep.second_moment_eps,
            }),
        );
    }
    let summary = serde_json::json!({ "run_id": ctx.run_id, "slopes": slopes });
    write_file(
        &ctx.out,
        "slopes.json",
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )
}

struct VerifyTable {
    rows: Vec<(String, f64, f64, bool)>,
}

impl VerifyTable {
    fn check(&mut self, name: &str, value: f64, threshold: f64) {
        let pass = value.is_finite() && value <= threshold;
        self.rows.push((name.to_string(), value, threshold, pass));
    }
    fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.3)
    }
}

fn run_verify(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = VerifyTable { rows: Vec::new() };

    // subset-lattice transform identities on a random base
    let n = 8;
    let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rep = closed_form_check(&f, &g, &g1, &g2);
    table.check("combinatorial_transform_identities", rep.max_dev(), 1e-10);

    let gg = SubsetFunction::from_fn(n, |_| rng.gen_range(-1.0..1.0));
    let round = k_inverse_all(&k_transform_all(&gg));
    let round_dev = gg
        .masks()
        .map(|m| (round.get(m) - gg.get(m)).abs())
        .fold(0.0f64, f64::max);
    table.check("transform_roundtrip", round_dev, 1e-10);

    let h1 = SubsetFunction::from_fn(n, |_| rng.gen_range(-1.0..1.0));
    let h2 = SubsetFunction::from_fn(n, |_| rng.gen_range(-1.0..1.0));
    let lhs = k_transform_all(&star_convolution(&h1, &h2));
    let (k1, k2) = (k_transform_all(&h1), k_transform_all(&h2));
    let star_dev = lhs
        .masks()
        .map(|m| (lhs.get(m) - k1.get(m) * k2.get(m)).abs())
        .fold(0.0f64, f64::max);
    table.check("star_convolution_homomorphism", star_dev, 1e-10);

    let cube_of: Vec<usize> = (0..10).map(|_| rng.gen_range(0..3)).collect();
    let bound = kinv_bound_check(1.5, 0.5, 1.0, 0.5, rng.gen_range(0..1u32 << 10), &cube_of);
    table.check("inverse_transform_bound_ratio", bound.max_ratio, 1.0 + 1e-12);
    table.check("inverse_transform_outside_support", bound.outside_max_abs, 0.0);

    // reversibility of the jump kernel over random triples
    let bx = cfg.boxx()?;
    let profile = cfg.jump_profile()?;
    let mut max_res = 0.0f64;
    for pot_name in ["smooth-bump", "soft-core"] {
        let phi = crate::potential::PairPotential::by_name(pot_name, cfg.beta, cfg.phi_range)?;
        let params = KawasakiParams::new(
            profile.clone(),
            phi,
            bx.clone(),
            0.5,
            cfg.eps,
            false,
        )?;
        for _ in 0..500 {
            let pts: Vec<Point> = (0..10)
                .map(|_| (0..bx.dim).map(|_| rng.gen_range(0.0..bx.side)).collect())
                .collect();
            let gamma = match Configuration::new(&bx, pts) {
                Ok(g) => g,
                Err(_) => continue,
            };
            let i = rng.gen_range(0..gamma.len());
            let h = params.profile.sample_displacement(&mut rng);
            let y: Point = gamma
                .point(i)
                .iter()
                .zip(&h)
                .map(|(&c, &hc)| bx.wrap_coord(c + cfg.eps * hc))
                .collect();
            max_res = max_res.max(detailed_balance_residual(&gamma, i, &y, &params)?);
        }
    }
    table.check("detailed_balance_residual", max_res, 1e-12);

    // jump-profile moment identities
    for kind in [ProfileKind::Indicator, ProfileKind::Bump] {
        let prof = JumpProfile::new(kind, cfg.jump_radius, cfg.dim)?;
        let m = moment_check(&prof, 64);
        let tag = match kind {
            ProfileKind::Indicator => "indicator",
            ProfileKind::Bump => "bump",
        };
        table.check(&format!("{tag}_first_moments"), m.max_first_abs, 1e-10);
        table.check(&format!("{tag}_mixed_second_moments"), m.mixed_max, 1e-10);
        table.check(&format!("{tag}_diagonal_spread"), m.max_diag_spread, 1e-8);
    }
    let ind1 = JumpProfile::new(ProfileKind::Indicator, 1.0, 1).unwrap();
    table.check(
        "indicator_d1_diffusion_constant_vs_two_thirds",
        (ind1.c - 2.0 / 3.0).abs(),
        1e-8,
    );

    let mut out = format!("{}check,value,threshold,pass\n", ctx.csv_header());
    println!("{:<44} {:>13} {:>10} {:>6}", "check", "value", "threshold", "pass");
    for (name, value, threshold, pass) in &table.rows {
        println!(
            "{name:<44} {value:>13.3e} {threshold:>10.0e} {:>6}",
            if *pass { "pass" } else { "FAIL" }
        );
        let _ = writeln!(
            out,
            "{name},{},{},{}",
            format_f64(*value),
            format_f64(*threshold),
            pass
        );
    }
    write_file(&ctx.out, "verify.csv", &out)?;
    if table.all_pass() {
        Ok(())
    } else {
        Err(Error::Config("verification suite failed".into()))
    }
}
