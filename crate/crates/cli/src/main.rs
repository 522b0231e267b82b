use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mash::config::{parse_snr_points, SnrSpec, SweepFile};
use mash::harness::{run_sweep_with_threads, threads_from_env, write_csv};
use mash::jammers::{JammerKind, JammerSpec};
use mash::receivers::Receiver;
use mash::theory::{check_prop1, check_thm1, pbar, pbar_complement, Prop1Setup, Thm1Setup};
use mash::MashError;

#[derive(Parser)]
#[command(name = "mash-sim", version, about = "Secret-subspace anti-jamming simulator for massive MU-MIMO uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo BER/MER sweep; writes CSV.
    Sweep(SweepArgs),
    /// Empirical check of the single-antenna residual-interference bound.
    CheckProp1(Prop1Args),
    /// Empirical check of the raised-interference distribution.
    CheckThm1(Thm1Args),
    /// Evaluate the guarantee probability P̄(α).
    Pbar(PbarArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SNR points: `a:b:step`, a comma list, or one value (dB).
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Comma-separated receivers (pos, mash-l, mash-s, mash-m, jl, unmitigated, lmmse, maed).
    #[arg(long, value_delimiter = ',')]
    receivers: Option<Vec<Receiver>>,
    /// Comma-separated jammers (barrage1, data1, pilot1, sparse1, eigenbeam, data_multi, dynamic_beam, repeat or 1-8).
    #[arg(long, value_delimiter = ',')]
    jammers: Option<Vec<JammerKind>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-UE secrets and per-UE detection.
    #[arg(long)]
    reciprocal: bool,
    /// exact, dft or wht.
    #[arg(long)]
    transform: Option<String>,
    /// Comma-separated per-UE frame offsets (reciprocal mode).
    #[arg(long, value_delimiter = ',')]
    offsets: Option<Vec<usize>>,
    /// Worker threads; overrides MASH_SIM_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Prop1Args {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long = "L", default_value_t = 100)]
    frame_len: usize,
    #[arg(long = "R", default_value_t = 16)]
    redundancy: usize,
    #[arg(long = "B", default_value_t = 64)]
    bs_antennas: usize,
    #[arg(long = "I", default_value_t = 1)]
    jammer_antennas: usize,
    #[arg(long, default_value_t = 1.0)]
    n0: f64,
    #[arg(long, default_value_t = 30.0)]
    jammer_gain: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Thm1Args {
    #[arg(long, default_value = "pilot1")]
    jammer: JammerKind,
    #[arg(long = "I", default_value_t = 4)]
    jammer_antennas: usize,
    #[arg(long = "B", default_value_t = 16)]
    bs_antennas: usize,
    #[arg(long = "L", default_value_t = 64)]
    frame_len: usize,
    #[arg(long = "R", default_value_t = 8)]
    redundancy: usize,
    #[arg(long = "T", default_value_t = 8)]
    pilot_len: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    significance: f64,
}

#[derive(Args)]
struct PbarArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long = "L")]
    frame_len: usize,
    #[arg(long = "R")]
    redundancy: usize,
}

enum Failure {
    Config(MashError),
    Io(io::Error),
    CheckFailed,
}

impl From<MashError> for Failure {
    fn from(e: MashError) -> Self {
        Failure::Config(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let base = match &args.config {
        Some(path) => SweepFile::load(path)?,
        None => SweepFile::default(),
    };
    if let Some(s) = &args.snr {
        parse_snr_points(s)?;
    }
    let flags = SweepFile {
        seed: args.seed,
        trials: args.trials,
        snr: args.snr.map(SnrSpec::Text),
        receivers: args.receivers,
        jammers: args.jammers,
        mode: args.reciprocal.then(|| "reciprocal".to_string()),
        transform: args.transform,
        frame_offsets: args.offsets,
        ..SweepFile::default()
    };
    let plan = base.overlay(flags).to_plan()?;
    let rows = run_sweep_with_threads(&plan, args.threads.or_else(threads_from_env))?;
    for row in rows.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: {} of {} trials failed at snr={} receiver={} jammer={}: {}",
            row.failures,
            row.failures + row.trials,
            row.snr_db,
            row.receiver,
            row.jammer,
            row.error.as_deref().unwrap_or("")
        );
    }
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn prop1(a: Prop1Args) -> Result<(), Failure> {
    let setup = Prop1Setup {
        frame_len: a.frame_len,
        redundancy: a.redundancy,
        bs_antennas: a.bs_antennas,
        n0: a.n0,
        alpha: a.alpha,
        jammer_gain: a.jammer_gain,
        jammer_antennas: a.jammer_antennas,
    };
    let rep = check_prop1(&setup, a.trials, a.seed)?;
    println!("alpha={} L={} R={} trials={}", rep.alpha, rep.frame_len, rep.redundancy, rep.trials);
    println!("violations={} rate={:.6e}", rep.violation_count, rep.empirical_violation_rate);
    println!("bound_probability={:.6e} max_ratio={:.6e}", rep.bound_probability, rep.max_ratio);
    let ok = rep.within_guarantee();
    println!("within_guarantee={ok}");
    if ok {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}

fn thm1(a: Thm1Args) -> Result<(), Failure> {
    let spec = JammerSpec::new(a.jammer, a.jammer_antennas);
    let setup = Thm1Setup {
        bs_antennas: a.bs_antennas,
        frame_len: a.frame_len,
        redundancy: a.redundancy,
        pilot_len: a.pilot_len,
    };
    let rep = check_thm1(&spec, &setup, a.trials, a.seed)?;
    println!("jammer={} I={} trials={}", spec.kind, spec.antennas, rep.trials);
    println!("max_scope_angle={:.3e} max_sigma_error={:.3e}", rep.max_scope_angle, rep.max_sigma_error);
    println!("rank_mismatches={} rank_one={}", rep.rank_mismatches, rep.rank_one);
    if let (Some(d), Some(p)) = (rep.ks_statistic, rep.ks_p_value) {
        println!("ks_statistic={d:.5} ks_p_value={p:.5}");
    }
    let ok = rep.scope_ok() && rep.profile_ok() && rep.uniformity_ok(a.significance);
    println!("pass={ok}");
    if ok {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}

fn pbar_cmd(a: PbarArgs) -> Result<(), Failure> {
    let p = pbar(a.alpha, a.frame_len, a.redundancy)?;
    let q = pbar_complement(a.alpha, a.frame_len, a.redundancy)?;
    println!("pbar={p:.12e}");
    println!("one_minus_pbar={q:.12e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::CheckProp1(a) => prop1(a),
        Command::CheckThm1(a) => thm1(a),
        Command::Pbar(a) => pbar_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::CheckFailed) => ExitCode::from(3),
    }
}
