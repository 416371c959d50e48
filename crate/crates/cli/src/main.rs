use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use kgroup::experiment::{
    execute, BoundaryCheck, CorruptionSpec, MonitorOptions, RunDescriptor, RunResult, SweepPlan, SweepRow,
    TraceSummary, FAMILIES,
};
use kgroup::oracle::GroupingReport;
use kgroup::runtime::Verdict;

const EXIT_OK: u8 = 0;
const EXIT_VERDICT: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "kgroup", version, about = "Run self-stabilizing k-grouping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON file.
    Run { descriptor: PathBuf },
    /// Run an experiment and corrupt part of the configuration mid-run.
    Inject {
        descriptor: PathBuf,
        /// e.g. `vars=color,mode,rst;count=all;seed=1;at=50`
        #[arg(long)]
        corrupt: String,
    },
    /// Run a grid of instances and write one CSV row per run.
    Sweep {
        /// Comma-separated families: path, cycle, grid, random-gnp.
        #[arg(long)]
        family: String,
        /// Sizes as `lo..hi:step`, `lo..hi` or a comma list.
        #[arg(long)]
        n: String,
        /// Diameter bounds, same syntax as `--n`.
        #[arg(long)]
        k: String,
        /// Seeds `0..seeds` per instance.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Failure that maps to the input-error exit code.
#[derive(Debug)]
struct InputError(anyhow::Error);

fn input<T>(r: Result<T>) -> std::result::Result<T, InputError> {
    r.map_err(InputError)
}

#[derive(Serialize)]
struct RunReport<'a> {
    summary: &'a TraceSummary,
    grouping: &'a GroupingReport,
    iterations: usize,
    corrupted: usize,
    silent_and_terminal: bool,
    violations: &'a [String],
    boundaries: &'a [BoundaryCheck],
}

fn parse_list(text: &str) -> Result<Vec<u32>> {
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let lo: u32 = lo.trim().parse().with_context(|| format!("bad range start in {text:?}"))?;
        let hi: u32 = hi.trim().parse().with_context(|| format!("bad range end in {text:?}"))?;
        let step: usize = step.trim().parse().with_context(|| format!("bad step in {text:?}"))?;
        if step == 0 || lo > hi {
            bail!("empty range {text:?}");
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    text.split(',')
        .map(|x| x.trim().parse().with_context(|| format!("bad number {x:?}")))
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn exit_for(result: &RunResult) -> u8 {
    if result.outcome.verdict == Verdict::BudgetExhausted {
        EXIT_BUDGET
    } else if result.ok() {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}

fn experiment(descriptor: &Path, corruption: Option<&str>) -> std::result::Result<u8, InputError> {
    let (desc, dir) = input(RunDescriptor::load(descriptor).map_err(Into::into))?;
    let instance = input(desc.instance(&dir).map_err(Into::into))?;
    let corruption = match corruption {
        Some(text) => Some(input(text.parse::<CorruptionSpec>().map_err(Into::into))?),
        None => None,
    };
    let opts = MonitorOptions {
        corruption,
        measure_merge: false,
    };
    let mut trace = match &desc.trace {
        Some(p) => Some(input(create(&dir.join(p)))?),
        None => None,
    };
    let result = input(
        execute(&instance, &opts, trace.as_mut().map(|w| w as &mut dyn Write)).context("run failed"),
    )?;
    if let Some(mut w) = trace {
        input(w.flush().context("cannot write trace"))?;
    }
    let report = RunReport {
        summary: &result.summary,
        grouping: &result.report,
        iterations: result.iterations,
        corrupted: result.corrupted,
        silent_and_terminal: result.cfin,
        violations: &result.violations,
        boundaries: &result.boundaries,
    };
    if let Some(p) = &desc.report {
        let mut w = input(create(&dir.join(p)))?;
        input(serde_json::to_writer_pretty(&mut w, &report).context("cannot write report"))?;
        input(w.flush().context("cannot write report"))?;
    }
    for v in &result.violations {
        log::warn!("{v}");
    }
    println!("{}", serde_json::to_string(&result.summary).expect("summary serializes"));
    Ok(exit_for(&result))
}

fn sweep(
    family: &str,
    n: &str,
    k: &str,
    seeds: u64,
    out: Option<&Path>,
    jobs: Option<usize>,
) -> std::result::Result<u8, InputError> {
    let families: Vec<String> = family.split(',').map(|f| f.trim().to_string()).collect();
    for f in &families {
        if !FAMILIES.contains(&f.as_str()) {
            return Err(InputError(anyhow::anyhow!("unknown family {f:?}; expected one of {FAMILIES:?}")));
        }
    }
    let plan = SweepPlan {
        families,
        ns: input(parse_list(n))?,
        ks: input(parse_list(k))?,
        seeds,
    };
    if plan.ks.contains(&0) {
        return Err(InputError(anyhow::anyhow!("k must be at least 1")));
    }
    if seeds == 0 {
        return Err(InputError(anyhow::anyhow!("need at least one seed")));
    }
    let threads = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = plan.run(threads);
    let mut rows: Vec<SweepRow> = Vec::with_capacity(results.len());
    for (job, r) in plan.jobs().into_iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => return Err(InputError(anyhow::anyhow!("{} n={} k={} seed={}: {e}", job.0, job.1, job.2, job.3))),
        }
    }
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(input(create(p))?),
        None => Box::new(io::stdout().lock()),
    };
    let written: io::Result<()> = (|| {
        writeln!(w, "{}", SweepRow::HEADER)?;
        for row in &rows {
            writeln!(w, "{}", row.csv())?;
        }
        w.flush()
    })();
    input(written.context("cannot write CSV"))?;
    let failed = rows.iter().filter(|r| !r.verdict).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", rows.len());
        return Ok(EXIT_VERDICT);
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KGROUP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    let result = match &cli.command {
        Command::Run { descriptor } => experiment(descriptor, None),
        Command::Inject { descriptor, corrupt } => experiment(descriptor, Some(corrupt)),
        Command::Sweep {
            family,
            n,
            k,
            seeds,
            out,
            jobs,
        } => sweep(family, n, k, *seeds, out.as_deref(), *jobs),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
