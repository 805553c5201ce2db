use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rcad::output::{csv_string, sig6, to_json, GridRecord, RunRecorder, SweepRecord};
use rcad::reproduce::{self, Grid, Target};
use rcad::Parallel;
use rcad_core::analytics::{conditional_rates, RateEngine, RatePrediction, SchemeParams};
use rcad_core::channel::{default_excess_noise, distance_to_transmission, ChannelParams, ModulationParams};
use rcad_core::montecarlo::{run_batch, Estimate, TrialConfig, TrialMode, TrialTally};
use rcad_core::optimizer::{distance_sweep, landscape, optimize, NoiseRule, Range};
use rcad_core::reconciliation::{threshold, EmpiricalM};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "rcad",
    version,
    about = "Random-codebook advantage distillation rate calculator and simulator"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV/JSON outputs and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print machine-readable output instead of the human summary.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic rates at one operating point.
    Predict {
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
    },
    /// Monte Carlo protocol trials compared with the analytic rates.
    Mc {
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Condition on a fixed block energy m: a number, or `n` for m = n.
        #[arg(long)]
        fixed_m: Option<String>,
    },
    /// Key ratio over an alpha x gamma grid at fixed sigma_X^2.
    Landscape {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 1024)]
        q: u64,
        #[arg(long = "sigma-x2")]
        sigma_x2: f64,
        /// lo:hi:step
        #[arg(long, default_value = "-1.5:0.5:0.05", allow_hyphen_values = true)]
        alpha_range: String,
        /// lo:hi:step
        #[arg(long, default_value = "0.8:2.2:0.05")]
        gamma_range: String,
    },
    /// Maximize the key ratio over (alpha, gamma, sigma_X^2).
    Optimize {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 1024)]
        q: u64,
        #[arg(long, value_enum, default_value = "standard")]
        grid: GridArg,
    },
    /// Optimize at several distances and compare with PLOB and max DW.
    Sweep {
        #[arg(long, default_value_t = 1024)]
        q: u64,
        /// Comma-separated distances in km.
        #[arg(long, value_delimiter = ',', default_value = "45,136,273,364")]
        distances: Vec<f64>,
        /// Fixed excess noise instead of 0.01 sigma_X^2.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long, value_enum, default_value = "standard")]
        grid: GridArg,
    },
    /// Regenerate a reference table or figure and check it against tolerances.
    Reproduce {
        #[arg(value_enum)]
        target: TargetArg,
        #[arg(long, value_enum, default_value = "standard")]
        grid: GridArg,
    },
}

#[derive(Args, Clone)]
struct LinkArgs {
    /// Channel transmission.
    #[arg(long = "T")]
    transmission: Option<f64>,
    /// Fibre length at 0.22 dB/km, instead of --T.
    #[arg(long, conflicts_with = "transmission")]
    distance_km: Option<f64>,
    /// Fixed excess noise (default 0.01 sigma_X^2).
    #[arg(long)]
    xi: Option<f64>,
}

impl LinkArgs {
    fn transmission(&self) -> anyhow::Result<f64> {
        match (self.transmission, self.distance_km) {
            (Some(t), _) => Ok(t),
            (None, Some(d)) => Ok(distance_to_transmission(d)?),
            (None, None) => Err(Usage("one of --T or --distance-km is required".into()).into()),
        }
    }

    fn noise(&self) -> NoiseRule {
        self.xi.map_or_else(NoiseRule::default, NoiseRule::Fixed)
    }
}

#[derive(Args, Clone)]
struct SchemeArgs {
    #[arg(long, default_value_t = 1024)]
    q: u64,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long = "sigma-x2")]
    sigma_x2: f64,
    /// Pin the blocklength instead of deriving it from gamma.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Standard,
    Coarse,
}

impl From<GridArg> for Grid {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Standard => Grid::Standard,
            GridArg::Coarse => Grid::Coarse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Table1,
    Fig2,
    Fig3,
    Fig5,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Table1 => Target::Table1,
            TargetArg::Fig2 => Target::Fig2,
            TargetArg::Fig3 => Target::Fig3,
            TargetArg::Fig5 => Target::Fig5,
        }
    }
}

/// A flag combination the library never sees.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

/// Reproduction ran but missed a tolerance.
#[derive(Debug, thiserror::Error)]
#[error("reproduction outside tolerance")]
struct ToleranceFailure;

struct Resolved {
    transmission: f64,
    xi: f64,
    channel: ChannelParams,
    modulation: ModulationParams,
    scheme: SchemeParams,
}

fn resolve(link: &LinkArgs, s: &SchemeArgs) -> anyhow::Result<Resolved> {
    let transmission = link.transmission()?;
    let modulation = ModulationParams::new(s.sigma_x2)?;
    let xi = link.xi.unwrap_or_else(|| default_excess_noise(s.sigma_x2));
    let channel = ChannelParams::new(transmission, xi)?;
    let mut scheme = SchemeParams::new(s.q, s.gamma, s.alpha)?;
    if let Some(n) = s.n {
        scheme = scheme.with_n(n)?;
    }
    Ok(Resolved {
        transmission,
        xi,
        channel,
        modulation,
        scheme,
    })
}

fn parse_range(s: &str, field: &str) -> anyhow::Result<Range> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Usage(format!("--{field} expects lo:hi:step, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad().into());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    Ok(Range::stepped(v[0], v[1], v[2])?)
}

fn print_prediction(p: &RatePrediction) {
    let rows = [
        ("n", p.n as f64),
        ("P_TA", p.p_ta_av),
        ("P_FA", p.p_fa_av),
        ("SER", p.ser_av),
        ("SKR", p.skr),
        ("I_XY", p.i_xy),
        ("I_EY", p.i_ey),
        ("DW", p.devetak_winter),
        ("PLOB", p.plob),
    ];
    for (k, v) in rows {
        if k == "n" {
            println!("{k:>5}  {}", p.n);
        } else {
            println!("{k:>5}  {}", sig6(v));
        }
    }
}

fn emit<T: Serialize>(format: Option<Format>, value: &T, csv_rows: Option<String>) -> anyhow::Result<bool> {
    match format {
        Some(Format::Json) => {
            print!("{}", to_json(value)?);
            Ok(true)
        }
        Some(Format::Csv) => {
            let rows = csv_rows.ok_or_else(|| Usage("this command has no CSV form; use --format json".into()))?;
            print!("{rows}");
            Ok(true)
        }
        None => Ok(false),
    }
}

#[derive(Serialize)]
struct McReport {
    config: serde_json::Value,
    counts: [u64; 5],
    accepted: usize,
    p_ta: Estimate,
    p_fa: Estimate,
    ser: Estimate,
    analytic_p_ta: f64,
    analytic_p_fa: f64,
    z_p_ta: f64,
    z_p_fa: f64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let engine = RateEngine::default();
    let pool = Parallel::new(cli.threads).context("building the thread pool")?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Predict { link, scheme } => {
            let r = resolve(link, scheme)?;
            let p = engine.secret_key_ratio(&r.scheme, r.channel, r.modulation)?;
            let params = json!({"T": r.transmission, "xi": r.xi, "sigma_x2": scheme.sigma_x2, "scheme": r.scheme});
            let mut rec = RunRecorder::new(out, "predict", params.clone(), None)?;
            let doc = json!({"config": params, "prediction": p});
            rec.write_json("predict.json", &doc)?;
            rec.finish()?;
            if !emit(cli.format, &doc, Some(csv_string("predict.manifest.json", &[p])?))? {
                println!(
                    "T={} q={} alpha={} gamma={} sigma_x2={} xi={}",
                    sig6(r.transmission),
                    scheme.q,
                    scheme.alpha,
                    scheme.gamma,
                    sig6(scheme.sigma_x2),
                    sig6(r.xi)
                );
                print_prediction(&p);
            }
        }
        Command::Mc {
            link,
            scheme,
            trials,
            seed,
            fixed_m,
        } => {
            let r = resolve(link, scheme)?;
            let n = r.scheme.blocklength(r.channel, r.modulation)?;
            let mode = match fixed_m.as_deref() {
                None => TrialMode::FreeM,
                Some("n") => TrialMode::FixedM(n as f64),
                Some(v) => TrialMode::FixedM(
                    v.parse()
                        .map_err(|_| Usage(format!("--fixed-m expects a number or n, got {v:?}")))?,
                ),
            };
            let typical_m = match mode {
                TrialMode::FixedM(m) => m,
                _ => n as f64,
            };
            let th = threshold(EmpiricalM::new(typical_m)?, n, r.scheme.alpha, r.channel, r.modulation)?;
            if th.is_degenerate() {
                eprintln!(
                    "warning: threshold {} is not positive at m = {}; every block will be rejected",
                    sig6(th.theta),
                    sig6(typical_m)
                );
            }
            let config = TrialConfig::new(*trials, *seed, r.scheme, r.channel, r.modulation, mode.clone())?;
            let tally: TrialTally = run_batch(&config, &pool)?;
            let (a_ta, a_fa) = match mode {
                TrialMode::FixedM(m) => {
                    let c = conditional_rates(EmpiricalM::new(m)?, n, &r.scheme, r.channel, r.modulation)?;
                    (c.p_ta, c.p_fa)
                }
                _ => {
                    let p = engine.secret_key_ratio(&r.scheme, r.channel, r.modulation)?;
                    (p.p_ta_av, p.p_fa_av)
                }
            };
            let params = json!({"T": r.transmission, "xi": r.xi, "sigma_x2": scheme.sigma_x2, "scheme": r.scheme, "n": n, "trials": trials, "seed": seed, "mode": mode});
            let report = McReport {
                config: params.clone(),
                counts: tally.counts,
                accepted: tally.accepted.len(),
                p_ta: tally.p_ta(),
                p_fa: tally.p_fa(),
                ser: tally.ser(),
                analytic_p_ta: a_ta,
                analytic_p_fa: a_fa,
                z_p_ta: tally.p_ta().z_score(a_ta, tally.trials()),
                z_p_fa: tally.p_fa().z_score(a_fa, tally.trials()),
            };
            let mut rec = RunRecorder::new(out, "mc", params, Some(*seed))?;
            rec.write_json("mc.json", &report)?;
            rec.finish()?;
            if tally.accepted.is_empty() {
                eprintln!("warning: no trial was accepted");
            }
            if !emit(cli.format, &report, None)? {
                println!("trials={} seed={} n={} q={}", trials, seed, n, scheme.q);
                println!("cases (TA, FA, crowded, empty, ambiguous) = {:?}", tally.counts);
                for (k, e, a, z) in [
                    ("P_TA", report.p_ta, a_ta, report.z_p_ta),
                    ("P_FA", report.p_fa, a_fa, report.z_p_fa),
                ] {
                    println!(
                        "{k:>5}  {} +/- {}  analytic {}  z {}",
                        sig6(e.value),
                        sig6(e.std_error),
                        sig6(a),
                        sig6(z)
                    );
                }
                println!("  SER  {} +/- {}", sig6(report.ser.value), sig6(report.ser.std_error));
            }
        }
        Command::Landscape {
            link,
            q,
            sigma_x2,
            alpha_range,
            gamma_range,
        } => {
            let t = link.transmission()?;
            let (ar, gr) = (
                parse_range(alpha_range, "alpha-range")?,
                parse_range(gamma_range, "gamma-range")?,
            );
            let l = landscape(&engine, t, *q, *sigma_x2, ar, gr, link.noise(), &pool)?;
            let records: Vec<GridRecord> = l.cells.iter().map(GridRecord::from).collect();
            let params = json!({"T": t, "q": q, "sigma_x2": sigma_x2, "alpha": ar, "gamma": gr, "noise": link.noise()});
            let mut rec = RunRecorder::new(out, "landscape", params, None)?;
            rec.write_csv("landscape.csv", &records)?;
            let b = GridRecord::from(l.best());
            rec.write_json("landscape.json", &json!({"best": b, "cells": records.len()}))?;
            rec.finish()?;
            if !emit(
                cli.format,
                &records,
                Some(csv_string("landscape.manifest.json", &records)?),
            )? {
                println!(
                    "T={} q={} sigma_x2={} cells={}",
                    sig6(t),
                    q,
                    sig6(*sigma_x2),
                    records.len()
                );
                println!(
                    "best alpha={} gamma={} n={} SKR={}",
                    sig6(b.alpha),
                    sig6(b.gamma),
                    b.n,
                    sig6(b.skr)
                );
            }
        }
        Command::Optimize { link, q, grid } => {
            let t = link.transmission()?;
            let mut space = Grid::from(*grid).space(t)?;
            space.noise = link.noise();
            let o = optimize(&engine, t, *q, &space, &pool)?;
            let params = json!({"T": t, "q": q, "space": space});
            let mut rec = RunRecorder::new(out, "optimize", params.clone(), None)?;
            let doc = json!({"config": params, "optimum": o});
            rec.write_json("optimize.json", &doc)?;
            rec.finish()?;
            let best = GridRecord::from(&o.best);
            if !emit(
                cli.format,
                &doc,
                Some(csv_string("optimize.manifest.json", &[best.clone()])?),
            )? {
                println!(
                    "T={} q={} grid points={} polish evaluations={}",
                    sig6(t),
                    q,
                    o.grid_points,
                    o.polish_evaluations
                );
                println!(
                    "alpha={} gamma={} sigma_x2={}",
                    sig6(best.alpha),
                    sig6(best.gamma),
                    sig6(best.sigma_x2)
                );
                print_prediction(&o.best.prediction);
            }
            if o.all_negative {
                eprintln!("warning: no positive key ratio anywhere in the search space");
            }
        }
        Command::Sweep { q, distances, xi, grid } => {
            let grid = Grid::from(*grid);
            let noise = xi.map_or_else(NoiseRule::default, NoiseRule::Fixed);
            let rows = distance_sweep(
                &engine,
                distances,
                *q,
                |t| {
                    let mut s = grid.space(t)?;
                    s.noise = noise;
                    Ok(s)
                },
                &pool,
            )?;
            let records: Vec<SweepRecord> = rows.iter().map(SweepRecord::from).collect();
            let params = json!({"q": q, "distances_km": distances, "grid": grid, "noise": noise});
            let mut rec = RunRecorder::new(out, "sweep", params, None)?;
            rec.write_csv("sweep.csv", &records)?;
            rec.write_json("sweep.json", &records)?;
            rec.finish()?;
            if !emit(cli.format, &records, Some(csv_string("sweep.manifest.json", &records)?))? {
                println!("{:>9} {:>12} {:>12} {:>12} {:>12}", "km", "T", "SKR*", "PLOB", "maxDW");
                for r in &records {
                    println!(
                        "{:>9} {:>12} {:>12} {:>12} {:>12}",
                        sig6(r.distance_km),
                        sig6(r.transmission),
                        sig6(r.skr),
                        sig6(r.plob),
                        sig6(r.max_dw)
                    );
                }
            }
        }
        Command::Reproduce { target, grid } => {
            let target = Target::from(*target);
            let mut rec = RunRecorder::new(
                out,
                "reproduce",
                json!({"target": target, "grid": Grid::from(*grid)}),
                None,
            )?;
            let report = reproduce::run(target, Grid::from(*grid), &engine, &pool, &mut rec)?;
            rec.finish()?;
            if !emit(
                cli.format,
                &report,
                Some(csv_string("reproduce.manifest.json", &report.checks)?),
            )? {
                for c in &report.checks {
                    println!(
                        "{} {}: {} vs {} ({})",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        sig6(c.value),
                        sig6(c.reference),
                        c.tolerance
                    );
                }
                println!(
                    "{}",
                    if report.pass {
                        "all checks passed"
                    } else {
                        "some checks failed"
                    }
                );
            }
            if !report.pass {
                return Err(ToleranceFailure.into());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<ToleranceFailure>() {
        return 3;
    }
    if err.is::<Usage>() {
        return 2;
    }
    match err.downcast_ref::<rcad_core::Error>() {
        Some(rcad_core::Error::InvalidParameter { .. } | rcad_core::Error::Domain { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<ToleranceFailure>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
