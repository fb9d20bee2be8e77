//! `medvideval` command-line front end.
//!
//! Exit status: 0 on success, 2 when an input file or flag is malformed
//! (message names the file and line), 1 on any other failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use medvideval::bm25::{self, Bm25Params, IndexOptions, InvertedIndex};
use medvideval::io::{self as mio, LocalizationRun, Qrels, RetrievalRun};
use medvideval::pooling::{self, PoolSpec};
use medvideval::segment::{evaluate_localization, evaluate_vcval, IoUParams};
use medvideval::steps::{align_test_set, AlignmentParams};
use medvideval::{Error, MetricReport, ReportFormat};

#[derive(Parser)]
#[command(
    name = "medvideval",
    version,
    about = "Evaluation toolkit for medical video question answering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MEDVIDEVAL_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// MAP, R@k, P@k and nDCG of a retrieval run.
    EvalRetrieval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10", value_parser = positive)]
        k: Vec<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// R@n,IoU=mu and mIoU of answer spans.
    EvalLocalization {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// JSON-lines answer spans for the judged videos.
        #[arg(long)]
        answers: PathBuf,
        #[command(flatten)]
        iou: IouArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Retrieval and localization scores of a localization run in one pass.
    EvalVcval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10", value_parser = positive)]
        k: Vec<usize>,
        #[command(flatten)]
        iou: IouArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Step alignment precision/recall/F and relaxed IoU.
    EvalSteps {
        #[command(flatten)]
        steps: StepArgs,
        #[arg(long, default_value_t = 3.0)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
        mu: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// BLEU, METEOR and ROUGE-L over aligned step captions.
    EvalCaptions {
        #[command(flatten)]
        steps: StepArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Sample an assessment pool from one or more runs.
    Pool {
        /// Run file; repeat for several runs.
        #[arg(long, required = true)]
        run: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated depth:probability bands.
        #[arg(long, default_value = "10:1,5:0.3,5:0.2,5:0.1")]
        bands: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a BM25 index over a JSON-lines corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Index directory.
        #[arg(long)]
        out: PathBuf,
        /// Index subtitles only.
        #[arg(long)]
        no_title: bool,
    },
    /// Run BM25 queries and write a retrieval run.
    Search {
        /// Index directory written by `index`.
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = positive)]
        k: usize,
        #[arg(long, default_value_t = 0.9)]
        k1: f64,
        #[arg(long, default_value_t = 0.4)]
        b: f64,
        #[arg(long, default_value = bm25::RUN_TAG)]
        tag: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IouArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10", value_parser = positive)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
    mu: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

#[derive(Args)]
struct StepArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    theta: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Structured,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

enum Failure {
    Input(String),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(e: Error) -> Failure {
    Failure::Input(e.to_string())
}

/// Opens `path` and runs `parse`, attaching the file name to any error.
fn read<T>(
    path: &Path,
    parse: impl FnOnce(BufReader<File>) -> medvideval::Result<T>,
) -> Outcome<T> {
    let file = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse(BufReader::new(file)).map_err(|e| match e {
        Error::Format { line, message } if line > 0 => {
            Failure::Input(format!("{}:{line}: {message}", path.display()))
        }
        other => Failure::Input(format!("{}: {other}", path.display())),
    })
}

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(report: &MetricReport, output: &Output) -> Outcome {
    let format = match output.format {
        Format::Tsv => ReportFormat::Tabular,
        Format::Structured => ReportFormat::Structured,
    };
    let mut out = sink(output.out.as_deref())?;
    medvideval::write_report(report, format, &mut out).context("writing report")?;
    out.flush().context("writing report")?;
    Ok(())
}

fn qrels_with_answers(grades: &Path, answers: &Path) -> Outcome<Qrels<f64>> {
    let mut qrels: Qrels<f64> = read(grades, mio::parse_grades)?;
    read(answers, |r| mio::attach_answers(&mut qrels, r))?;
    Ok(qrels)
}

fn iou_params(args: &IouArgs) -> Outcome<IoUParams<f64>> {
    let params = IoUParams {
        n_values: args.n.clone(),
        mu_values: args.mu.clone(),
        lambda: args.lambda,
    };
    params.validate().map_err(usage)?;
    Ok(params)
}

fn align(args: &StepArgs, lambda: f64) -> Outcome<medvideval::steps::StepAlignmentSet<f64>> {
    let params = AlignmentParams {
        theta: args.theta,
        alpha: args.alpha,
        beta: args.beta,
        lambda,
    };
    params.validate().map_err(usage)?;
    let pred = read(&args.pred, mio::parse_steps::<f64, _>)?;
    let gold = read(&args.gold, mio::parse_steps::<f64, _>)?;
    align_test_set(&pred.sequences, &gold.sequences, &params).map_err(usage)
}

fn run(command: Command) -> Outcome {
    match command {
        Command::EvalRetrieval {
            run,
            qrels,
            k,
            output,
        } => {
            let run: RetrievalRun<f64> = read(&run, mio::parse_retrieval_run)?;
            let qrels: Qrels<f64> = read(&qrels, mio::parse_grades)?;
            emit(
                &medvideval::retrieval::evaluate_retrieval(&run, &qrels, &k).to_report(),
                &output,
            )
        }
        Command::EvalLocalization {
            run,
            qrels,
            answers,
            iou,
            output,
        } => {
            let params = iou_params(&iou)?;
            let run: LocalizationRun<f64> = read(&run, mio::parse_localization_run)?;
            let qrels = qrels_with_answers(&qrels, &answers)?;
            let score = evaluate_localization(&run, &qrels, &params).map_err(usage)?;
            emit(&score.to_report(), &output)
        }
        Command::EvalVcval {
            run,
            qrels,
            answers,
            k,
            iou,
            output,
        } => {
            let params = iou_params(&iou)?;
            let run: LocalizationRun<f64> = read(&run, mio::parse_localization_run)?;
            let qrels = qrels_with_answers(&qrels, &answers)?;
            let score = evaluate_vcval(&run, &qrels, &k, &params).map_err(usage)?;
            emit(&score.to_report(), &output)
        }
        Command::EvalSteps {
            steps,
            lambda,
            mu,
            output,
        } => {
            if mu.is_empty() || mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Failure::Input(
                    "invalid mu values: each must lie in [0, 1]".into(),
                ));
            }
            let set = align(&steps, lambda)?;
            emit(&set.to_report(&mu), &output)
        }
        Command::EvalCaptions { steps, output } => {
            let set = align(&steps, 0.0)?;
            emit(&set.caption_report(), &output)
        }
        Command::Pool {
            run,
            seed,
            bands,
            out,
        } => {
            let spec = PoolSpec {
                seed,
                ..bands.parse::<PoolSpec>().map_err(usage)?
            };
            let runs = run
                .iter()
                .map(|path| read(path, mio::parse_retrieval_run::<f64, _>))
                .collect::<Outcome<Vec<_>>>()?;
            let pool = pooling::build_pool(&runs, &spec);
            let mut sink = sink(out.as_deref())?;
            pooling::write_pool(&pool, &mut sink).context("writing pool")?;
            sink.flush().context("writing pool")?;
            Ok(())
        }
        Command::Index {
            corpus,
            out,
            no_title,
        } => {
            let docs = read(&corpus, mio::parse_corpus)?;
            let index = bm25::build_index(
                &docs,
                IndexOptions {
                    include_titles: !no_title,
                },
            )
            .map_err(|e| Failure::Input(format!("{}: {e}", corpus.display())))?;
            index
                .save(&out)
                .with_context(|| format!("writing index to {}", out.display()))?;
            log::info!(
                "indexed {} documents, {} terms",
                index.doc_count(),
                index.terms().count()
            );
            Ok(())
        }
        Command::Search {
            index,
            queries,
            k,
            k1,
            b,
            tag,
            out,
        } => {
            let params = Bm25Params { k1, b };
            params.validate().map_err(usage)?;
            let index = InvertedIndex::load(&index).map_err(|e| {
                Failure::Input(format!("{}: {e}", index.join(bm25::INDEX_FILE).display()))
            })?;
            let queries = read(&queries, mio::parse_queries)?;
            let run = bm25::search_run(&index, &queries, k, &params, &tag).map_err(usage)?;
            let mut sink = sink(out.as_deref())?;
            writeln!(
                sink,
                "# {tag} k1={k1} b={b} k={k} titles={} tokenizer=lowercase-whitespace-strip-punct stopwords=none",
                if index.includes_titles() { "yes" } else { "no" }
            )
            .context("writing run")?;
            mio::write_retrieval_run(&run, &mut sink).context("writing run")?;
            sink.flush().context("writing run")?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("medvideval: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(message)) => {
            eprintln!("medvideval: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("medvideval: {e:#}");
            ExitCode::from(1)
        }
    }
}
