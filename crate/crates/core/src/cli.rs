//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage, 2 IO or parse failure, 3 learner or
//! protocol failure.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{self, Compressor, Gzip, TaskSet};
use crate::error::Error;
use crate::learner::{ExternalLearner, ExternalLearnerConfig, Learner, LearnerConfig, SyntheticLearner, SyntheticLearnerConfig};
use crate::metrics::{self, ErrorRateResult};
use crate::policy::{PolicyKind, DEFAULT_EXP3_GAMMA, DEFAULT_UCB1_C};
use crate::report;
use crate::reward::{GainKind, DEFAULT_WARMUP};
use crate::scheduler::{self, JsonlTraceWriter, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_LEARNER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "curriculum", version, about = "Bandit curriculum scheduling over compression-ranked tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score manifest payloads by compression ratio and write ranked JSONL.
    Rank {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a ranked JSONL file into K difficulty tasks.
    Partition {
        #[arg(long)]
        ranked: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the curriculum scheduler and write a trace.
    Run(RunArgs),
    /// Mean compression ratio of a synthetic noisy-signal battery per SNR.
    SnrStudy {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0, 15.0], allow_negative_numbers = true)]
        snrs: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "snr_cr.csv")]
        out: PathBuf,
    },
    /// Word and character error rates of line-aligned transcript files.
    Wer {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Curves and summary tables from one or more traces.
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.2, 0.1])]
        thresholds: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Ucb1,
    Exp3,
    Random,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Gain {
    Pg,
    Spg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LearnerKind {
    Synthetic,
    External,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    tasks_file: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, value_enum, default_value = "pg")]
    gain: Gain,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// UCB1 exploration constant [default: 0.5]
    #[arg(long)]
    c: Option<f64>,
    /// EXP3 exploration probability [default: 0.01]
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "synthetic")]
    learner: LearnerKind,
    /// Trainer program for the external learner.
    #[arg(long)]
    learner_cmd: Option<String>,
    /// Argument passed to the trainer program (repeatable).
    #[arg(long = "learner-arg", allow_hyphen_values = true)]
    learner_args: Vec<String>,
    /// Per-request timeout for the external learner, in seconds.
    #[arg(long, default_value_t = 600.0)]
    learner_timeout: f64,
    /// Synthetic learner rate [default: 0.2]
    #[arg(long)]
    eta: Option<f64>,
    /// Synthetic learner initial proficiency [default: 0.05]
    #[arg(long)]
    init_p: Option<f64>,
    /// Synthetic learner loss noise [default: 0]
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    #[arg(long)]
    history_capacity: Option<usize>,
    /// Record validation loss every N steps in addition to epoch ends.
    #[arg(long)]
    eval_interval: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_learner_failure() {
            EXIT_LEARNER
        } else if matches!(e, Error::Config(_)) {
            EXIT_USAGE
        } else {
            EXIT_IO
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(context: String, e: std::io::Error) -> Failure {
    Error::io(context, e).into()
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Rank { manifest, out } => cmd_rank(&manifest, &out),
        Command::Partition { ranked, k, out } => cmd_partition(&ranked, k, &out),
        Command::Run(args) => cmd_run(&args),
        Command::SnrStudy { snrs, seed, out } => cmd_snr_study(&snrs, seed, &out),
        Command::Wer {
            reference,
            hypothesis,
            out,
        } => cmd_wer(&reference, &hypothesis, out.as_deref()),
        Command::Report {
            traces,
            out_dir,
            thresholds,
        } => cmd_report(&traces, &out_dir, &thresholds),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(format!("writing {}", path.display()), e))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(format!("reading {}", path.display()), e))
}

fn cmd_rank(manifest: &Path, out: &Path) -> Result<(), Failure> {
    let entries = corpus::read_manifest(manifest)?;
    let ranked = corpus::rank_manifest(&entries, &Gzip::default())?;
    let mut buf = Vec::new();
    corpus::write_ranked_jsonl(&mut buf, &ranked)?;
    fs::write(out, buf).map_err(|e| io_failure(format!("writing {}", out.display()), e))?;
    match (ranked.first(), ranked.last()) {
        (Some(hi), Some(lo)) => println!("ranked {} examples, cr range [{}, {}]", ranked.len(), lo.cr, hi.cr),
        _ => println!("ranked 0 examples"),
    }
    Ok(())
}

fn cmd_partition(ranked: &Path, k: usize, out: &Path) -> Result<(), Failure> {
    let mut examples = corpus::read_ranked_jsonl(&read_file(ranked)?)?;
    corpus::sort_ranked(&mut examples);
    let set = corpus::partition_tasks(&examples, k, &Gzip::default().descriptor())?;
    write_file(out, &(set.to_json()? + "\n"))?;
    println!("wrote {} tasks with sizes {:?}", set.k, set.task_sizes());
    Ok(())
}

fn policy_from_args(args: &RunArgs) -> Result<PolicyKind, Failure> {
    let kind = match args.algo {
        Algo::Ucb1 => {
            if args.gamma.is_some() {
                return Err(Failure::usage("--gamma only applies to --algo exp3"));
            }
            PolicyKind::Ucb1 {
                c: args.c.unwrap_or(DEFAULT_UCB1_C),
            }
        }
        Algo::Exp3 => {
            if args.c.is_some() {
                return Err(Failure::usage("--c only applies to --algo ucb1"));
            }
            PolicyKind::Exp3 {
                gamma: args.gamma.unwrap_or(DEFAULT_EXP3_GAMMA),
            }
        }
        Algo::Random | Algo::Sequential => {
            if args.c.is_some() || args.gamma.is_some() {
                return Err(Failure::usage("--c and --gamma only apply to bandit policies"));
            }
            if args.algo == Algo::Random {
                PolicyKind::Random
            } else {
                PolicyKind::Sequential
            }
        }
    };
    kind.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(kind)
}

fn learner_from_args(args: &RunArgs) -> Result<LearnerConfig, Failure> {
    match args.learner {
        LearnerKind::Synthetic => {
            if args.learner_cmd.is_some() || !args.learner_args.is_empty() {
                return Err(Failure::usage("--learner-cmd requires --learner external"));
            }
            let defaults = SyntheticLearnerConfig::default();
            Ok(LearnerConfig::Synthetic(SyntheticLearnerConfig {
                eta: args.eta.unwrap_or(defaults.eta),
                init_p: args.init_p.unwrap_or(defaults.init_p),
                noise_sigma: args.noise_sigma.unwrap_or(defaults.noise_sigma),
                seed: args.seed,
            }))
        }
        LearnerKind::External => {
            if args.eta.is_some() || args.init_p.is_some() || args.noise_sigma.is_some() {
                return Err(Failure::usage("--eta, --init-p and --noise-sigma require --learner synthetic"));
            }
            let program = args
                .learner_cmd
                .clone()
                .ok_or_else(|| Failure::usage("--learner external requires --learner-cmd"))?;
            let mut cfg = ExternalLearnerConfig::new(program, args.learner_args.clone());
            cfg.timeout_secs = args.learner_timeout;
            cfg.timeout().map_err(|e| Failure::usage(e.to_string()))?;
            Ok(LearnerConfig::External(cfg))
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let policy = policy_from_args(args)?;
    let learner_config = learner_from_args(args)?;
    let tasks = TaskSet::from_json(&read_file(&args.tasks_file)?)?;
    let config = RunConfig {
        policy,
        gain: match args.gain {
            Gain::Pg => GainKind::Pg,
            Gain::Spg => GainKind::Spg,
        },
        k: tasks.k,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        learner: learner_config.clone(),
        warmup: args.warmup,
        history_capacity: args.history_capacity,
        eval_interval: args.eval_interval,
    };
    config.validate().map_err(|e| Failure::usage(e.to_string()))?;

    let file = fs::File::create(&args.out).map_err(|e| io_failure(format!("creating {}", args.out.display()), e))?;
    let mut writer = JsonlTraceWriter::new(BufWriter::new(file));

    let outcome = match &learner_config {
        LearnerConfig::Synthetic(cfg) => {
            let mut learner = SyntheticLearner::new(tasks.k, cfg)?;
            scheduler::run_curriculum(&config, &tasks, &mut learner, &mut writer)
        }
        LearnerConfig::External(cfg) => {
            let mut learner = ExternalLearner::spawn(cfg, tasks.k)?;
            let outcome = scheduler::run_curriculum(&config, &tasks, &mut learner as &mut dyn Learner, &mut writer);
            match outcome {
                Ok(o) => learner.shutdown().map(|_| o),
                Err(e) => Err(e),
            }
        }
    };
    let flushed = writer.flush();
    let outcome = outcome?;
    flushed?;
    println!(
        "{} steps, final validation loss {}",
        outcome.steps,
        outcome.epoch_validation.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_snr_study(snrs: &[f64], seed: u64, out: &Path) -> Result<(), Failure> {
    let points = corpus::snr_study(snrs, seed)?;
    let mut csv = String::from("snr_db,mean_cr\n");
    for p in &points {
        csv.push_str(&format!("{},{}\n", p.snr_db, p.mean_cr));
    }
    write_file(out, &csv)
}

fn rate_cell(r: &ErrorRateResult) -> String {
    if r.rate.is_infinite() {
        "inf".to_owned()
    } else {
        r.rate.to_string()
    }
}

fn cmd_wer(reference: &Path, hypothesis: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let refs = read_file(reference)?;
    let hyps = read_file(hypothesis)?;
    let refs: Vec<&str> = refs.lines().collect();
    let hyps: Vec<&str> = hyps.lines().collect();
    if refs.len() != hyps.len() {
        return Err(Error::Manifest {
            line: refs.len().min(hyps.len()) + 1,
            reason: format!("reference has {} lines, hypothesis has {}", refs.len(), hyps.len()),
        }
        .into());
    }

    let mut csv = String::from("line,ref_words,word_errors,wer,ref_chars,char_errors,cer\n");
    let mut word_results = Vec::with_capacity(refs.len());
    let mut char_results = Vec::with_capacity(refs.len());
    for (i, (r, h)) in refs.iter().zip(&hyps).enumerate() {
        let w = metrics::wer(r, h);
        let c = metrics::cer(r, h);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i + 1,
            w.reference_length,
            w.errors(),
            rate_cell(&w),
            c.reference_length,
            c.errors(),
            rate_cell(&c)
        ));
        word_results.push(w);
        char_results.push(c);
    }
    let w = ErrorRateResult::aggregate(&word_results);
    let c = ErrorRateResult::aggregate(&char_results);
    csv.push_str(&format!(
        "total,{},{},{},{},{},{}\n",
        w.reference_length,
        w.errors(),
        rate_cell(&w),
        c.reference_length,
        c.errors(),
        rate_cell(&c)
    ));
    match out {
        Some(path) => write_file(path, &csv),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| io_failure("writing stdout".into(), e)),
    }
}

fn cmd_report(traces: &[PathBuf], out_dir: &Path, thresholds: &[f64]) -> Result<(), Failure> {
    let labels = report::dedup_labels(traces.iter().map(|p| report::label_from_path(p)).collect());
    let mut runs = Vec::with_capacity(traces.len());
    for (path, label) in traces.iter().zip(labels) {
        let trace = scheduler::read_trace(&read_file(path)?)?;
        runs.push((label, trace));
    }
    let files = report::build_report(&runs, thresholds)?;
    fs::create_dir_all(out_dir).map_err(|e| io_failure(format!("creating {}", out_dir.display()), e))?;
    for (name, contents) in &files.files {
        write_file(&out_dir.join(name), contents)?;
    }
    println!("wrote {} files to {}", files.files.len(), out_dir.display());
    Ok(())
}
