//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_config, to_toml};
use crate::error::{Error, Result};
use crate::experiments::{
    builtin_scenario, run_scenario, run_sweep, EncoderKind, Outcome, ScenarioSpec, SweepConfig,
};
use crate::model::PowerConstraint;
use crate::optimizer::{evaluate, optimize_with_restarts};
use crate::output::{
    constellation_csv, constellation_wide_csv, export_svg, loss_history_csv, mi_csv, mi_rows,
    read_constellation_csv, summary_csv, write_atomic, ResultWriter, SummaryRow,
};
use crate::precoders::{build_linear_constellation, encoder, PrecoderKind};
use crate::rng::SeedStreams;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "JOINTCON_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "jointcon", version, about = "Joint constellation design for the MU-MIMO broadcast channel")]
struct Cli {
    /// Output directory (default: $JOINTCON_OUT_DIR, then ./results)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct Source {
    /// Built-in scenario name (scenario1, scenario2)
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario TOML file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinearArg {
    Matched,
    Zf,
    Mmse,
}

impl From<LinearArg> for PrecoderKind {
    fn from(a: LinearArg) -> Self {
        match a {
            LinearArg::Matched => PrecoderKind::Matched,
            LinearArg::Zf => PrecoderKind::ZeroForcing,
            LinearArg::Mmse => PrecoderKind::Mmse,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every encoder of a scenario and print the MI table
    Scenario {
        /// Built-in name or path to a scenario file
        target: String,
        /// MAX-MIN restarts; the best is kept
        #[arg(long)]
        seeds: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate one linear precoder
    Baseline {
        #[arg(long, value_enum)]
        encoder: LinearArg,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the MAX-MIN optimization
    Optimize {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Random-channel SNR sweep
    Sweep {
        /// start:stop:step in dB, or a comma-separated list
        #[arg(long, default_value = "-5:15:2", allow_hyphen_values = true)]
        snr: String,
        #[arg(long, default_value_t = 20)]
        experiments: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 10)]
        users: usize,
        #[arg(long, default_value_t = 4)]
        antennas: usize,
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[arg(long, default_value_t = 20_000)]
        n_eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a constellation CSV to the wide CSV or an SVG plot
    Export {
        #[arg(long)]
        constellation: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Destination file (default: out dir)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Scenario whose channel directions are drawn
        #[command(flatten)]
        source: Source,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn resolve_target(target: &str) -> Result<ScenarioSpec> {
    match builtin_scenario(target) {
        Ok(spec) => Ok(spec),
        Err(Error::UnknownScenario(_)) if Path::new(target).exists() => load_config(target),
        Err(e) => Err(e),
    }
}

fn resolve_source(source: &Source, default: Option<&str>) -> Result<Option<ScenarioSpec>> {
    match (&source.scenario, &source.config) {
        (Some(name), _) => builtin_scenario(name).map(Some),
        (None, Some(path)) => load_config(path).map(Some),
        (None, None) => default.map(builtin_scenario).transpose(),
    }
}

fn apply(spec: &mut ScenarioSpec, o: &Overrides) -> Result<()> {
    if let Some(s) = o.seed {
        spec.seed = s;
    }
    if let Some(n) = o.n_eval {
        spec.opt.n_eval = n;
    }
    if let Some(n) = o.n_samples {
        spec.opt.n_samples = n;
    }
    if let Some(n) = o.iterations {
        spec.opt.max_iterations = n;
    }
    if let Some(n) = o.restarts {
        spec.opt.restarts = n;
    }
    spec.validate()
}

fn config_json(spec: &ScenarioSpec) -> Result<serde_json::Value> {
    let text = to_toml(spec)?;
    toml::from_str(&text).map_err(|e| Error::validation("config", e.to_string()))
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::validation("snr", format!("cannot parse `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::validation("snr", "need step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn print_table(title: &str, users: usize, rows: &[(EncoderKind, Option<Vec<f64>>)]) {
    println!("{title}");
    let mut header = format!("{:<10}", "encoder");
    for k in 0..users {
        header.push_str(&format!("{:>8}", format!("I_{}", k + 1)));
    }
    header.push_str(&format!("{:>8}{:>8}", "min", "mean"));
    println!("{header}");
    for (enc, mi) in rows {
        let mut line = format!("{:<10}", enc.display_name());
        match mi {
            Some(v) => {
                for x in v {
                    line.push_str(&format!("{x:>8.3}"));
                }
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                line.push_str(&format!("{min:>8.3}{mean:>8.3}"));
            }
            None => {
                for _ in 0..users + 2 {
                    line.push_str(&format!("{:>8}", "-"));
                }
            }
        }
        println!("{line}");
    }
}

fn cmd_scenario(target: &str, seeds: Option<usize>, o: &Overrides, dir: PathBuf) -> Result<()> {
    let mut spec = resolve_target(target)?;
    if let Some(k) = seeds {
        spec.opt.restarts = k;
    }
    apply(&mut spec, o)?;
    let streams = SeedStreams::new(spec.seed);
    let table = run_scenario(&spec, &streams)?;
    let users = table.space.users();

    let mut writer = ResultWriter::new(dir);
    let mut mi = Vec::new();
    let mut summary = Vec::new();
    let mut printed = Vec::new();
    for row in &table.rows {
        let est = row.outcome.available().map(|e| e.mi.as_slice());
        mi.extend(mi_rows(None, None, row.encoder, users, est));
        summary.push(SummaryRow::from_mi(None, row.encoder, est));
        printed.push((row.encoder, est.map(|v| v.iter().map(|m| m.mi).collect())));
        if let Outcome::Available(ev) = &row.outcome {
            writer.add(
                format!("constellation_{}.csv", row.encoder.name()),
                constellation_csv(&ev.constellation, &table.space)?,
            );
        }
    }
    if let Some(run) = &table.run {
        writer.add("loss_history.csv", loss_history_csv(&run.loss_history)?);
    }
    writer.add("mi.csv", mi_csv(&mi)?);
    writer.add("summary.csv", summary_csv(&summary)?);
    print_table(&table.name, users, &printed);
    writer.finish("scenario", config_json(&spec)?, spec.seed, spec.opt.convention.name())?;
    Ok(())
}

fn cmd_baseline(kind: PrecoderKind, source: &Source, o: &Overrides, dir: PathBuf) -> Result<()> {
    let mut spec = resolve_source(source, Some("scenario1"))?.expect("default source");
    apply(&mut spec, o)?;
    let streams = SeedStreams::new(spec.seed);
    let space = spec.message_space()?;
    let chan = spec.realize(&streams)?;
    let enc = encoder(kind, &chan)?;
    let constellation = build_linear_constellation(&enc, &space, &spec.power)?;
    let est = evaluate(&constellation, &chan, &space, spec.opt.n_eval, spec.opt.convention, &streams)?;
    let which = EncoderKind::ALL
        .into_iter()
        .find(|e| e.precoder() == Some(kind))
        .expect("linear encoder");

    let mut writer = ResultWriter::new(dir);
    writer.add("constellation.csv", constellation_csv(&constellation, &space)?);
    writer.add("mi.csv", mi_csv(&mi_rows(None, None, which, space.users(), Some(&est)))?);
    writer.add("summary.csv", summary_csv(&[SummaryRow::from_mi(None, which, Some(&est))])?);
    print_table(&spec.name, space.users(), &[(which, Some(est.iter().map(|m| m.mi).collect()))]);
    writer.finish("baseline", config_json(&spec)?, spec.seed, spec.opt.convention.name())?;
    Ok(())
}

fn cmd_optimize(source: &Source, o: &Overrides, dir: PathBuf) -> Result<()> {
    let mut spec = resolve_source(source, Some("scenario1"))?.expect("default source");
    apply(&mut spec, o)?;
    let streams = SeedStreams::new(spec.seed);
    let space = spec.message_space()?;
    let chan = spec.realize(&streams)?;
    let run = optimize_with_restarts(&chan, &space, &spec.power, &spec.opt, &streams)?;
    let enc = EncoderKind::MaxMin;

    let mut writer = ResultWriter::new(dir);
    writer.add("constellation.csv", constellation_csv(&run.final_constellation, &space)?);
    writer.add("initial_constellation.csv", constellation_csv(&run.initial_constellation, &space)?);
    writer.add("mi.csv", mi_csv(&mi_rows(None, None, enc, space.users(), Some(&run.per_user_mi)))?);
    writer.add("summary.csv", summary_csv(&[SummaryRow::from_mi(None, enc, Some(&run.per_user_mi))])?);
    writer.add("loss_history.csv", loss_history_csv(&run.loss_history)?);
    print_table(
        &spec.name,
        space.users(),
        &[(enc, Some(run.per_user_mi.iter().map(|m| m.mi).collect()))],
    );
    writer.finish("optimize", config_json(&spec)?, spec.seed, spec.opt.convention.name())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    snr: &str,
    experiments: usize,
    restarts: usize,
    users: usize,
    antennas: usize,
    n_samples: usize,
    iterations: usize,
    n_eval: usize,
    seed: u64,
    dir: PathBuf,
) -> Result<()> {
    let mut cfg = SweepConfig::paper_scale();
    cfg.snr_grid = parse_snr_grid(snr)?;
    cfg.experiments = experiments;
    cfg.users = users;
    cfg.antennas = antennas;
    cfg.power = PowerConstraint::default();
    cfg.opt.restarts = restarts;
    cfg.opt.n_samples = n_samples;
    cfg.opt.max_iterations = iterations;
    cfg.opt.n_eval = n_eval;
    let result = run_sweep(&cfg, &SeedStreams::new(seed))?;

    let mut mi = Vec::new();
    for c in &result.cells {
        mi.extend(mi_rows(Some(c.experiment), Some(c.snr_db), c.encoder, users, c.mi.as_deref()));
    }
    let summary: Vec<SummaryRow> = result
        .aggregate
        .iter()
        .map(|a| SummaryRow {
            snr_db: Some(a.snr_db),
            encoder: a.encoder,
            min_mi: a.mean_min_mi,
            mean_mi: a.mean_mean_mi,
        })
        .collect();
    println!("{:>8} {:<10}{:>10}{:>10}", "snr_db", "encoder", "min_mi", "mean_mi");
    for a in &summary {
        println!(
            "{:>8.1} {:<10}{:>10.3}{:>10.3}",
            a.snr_db.unwrap_or(f64::NAN),
            a.encoder.display_name(),
            a.min_mi,
            a.mean_mi
        );
    }
    let mut writer = ResultWriter::new(dir);
    writer.add("mi.csv", mi_csv(&mi)?);
    writer.add("summary.csv", summary_csv(&summary)?);
    let config = serde_json::json!({
        "T": antennas,
        "K": users,
        "snr_grid": cfg.snr_grid,
        "experiments": experiments,
        "jitter_std": cfg.jitter_std,
        "P_m": cfg.power.mean_power,
        "P_c": cfg.power.peak_antenna_power,
        "opt": cfg.opt,
    });
    writer.finish("sweep", config, seed, cfg.opt.convention.name())?;
    Ok(())
}

fn cmd_export(
    path: &Path,
    format: ExportFormat,
    output: Option<PathBuf>,
    source: &Source,
    dir: PathBuf,
) -> Result<()> {
    let (constellation, space) = read_constellation_csv(path)?;
    match format {
        ExportFormat::Csv => {
            let dest = output.unwrap_or_else(|| dir.join("constellation_wide.csv"));
            write_atomic(&dest, constellation_wide_csv(&constellation, &space)?.as_bytes())?;
            println!("{}", dest.display());
        }
        ExportFormat::Svg => {
            let chan = match resolve_source(source, None)? {
                Some(spec) => Some(spec.realize(&SeedStreams::new(spec.seed))?),
                None => None,
            };
            let dest = output.unwrap_or_else(|| dir.join("constellation.svg"));
            export_svg(&constellation, &space, chan.as_ref(), &dest)?;
            println!("{}", dest.display());
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let dir = out_dir(cli.out);
    match cli.command {
        Command::Scenario {
            target,
            seeds,
            overrides,
        } => cmd_scenario(&target, seeds, &overrides, dir),
        Command::Baseline {
            encoder,
            source,
            overrides,
        } => cmd_baseline(encoder.into(), &source, &overrides, dir),
        Command::Optimize { source, overrides } => cmd_optimize(&source, &overrides, dir),
        Command::Sweep {
            snr,
            experiments,
            restarts,
            users,
            antennas,
            n_samples,
            iterations,
            n_eval,
            seed,
        } => cmd_sweep(
            &snr, experiments, restarts, users, antennas, n_samples, iterations, n_eval, seed, dir,
        ),
        Command::Export {
            constellation,
            format,
            output,
            source,
        } => cmd_export(&constellation, format, output, &source, dir),
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 for usage and
/// configuration errors, 2 for numerical failures. Errors go to stderr as
/// `error[Code]: message`.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            eprint!("error[UsageError]: {}", text.trim_start_matches("error: "));
            return 1;
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Error::validation("threads", e.to_string())),
        },
        None => dispatch(cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grids() {
        assert_eq!(parse_snr_grid("-5:15:2").unwrap().len(), 11);
        assert_eq!(parse_snr_grid("-5:15:2").unwrap()[10], 15.0);
        assert_eq!(parse_snr_grid("0,6,10").unwrap(), vec![0.0, 6.0, 10.0]);
        assert!(parse_snr_grid("1:0:1").is_err());
        assert!(parse_snr_grid("a:b").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["jointcon", "frobnicate"]), 1);
        assert_eq!(cli_main(["jointcon", "baseline", "--encoder", "qr"]), 1);
    }

    #[test]
    fn unknown_scenario_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(cli_main(["jointcon", "--out", out, "scenario", "scenario9"]), 1);
    }
}
