//! `styledit` command-line pipeline.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand};
use styledit::config::Config;
use styledit::corpus::{tokenize, Direction, Style, SyntheticSpec};
use styledit::evaluator::{evaluate, render_svg, tradeoff_sweep, write_csv, EvalItem};
use styledit::inference::transfer_text;
use styledit::pipeline::{
    self, load_eval_classifier, load_lm, load_model_vocab, ModelBundle, PreparedData, TrainOptions,
};
use styledit::Error;

const MODEL_ENV: &str = "STYLEDIT_MODEL_DIR";

#[derive(Parser)]
#[command(name = "styledit", version, about = "Edit-based unsupervised text style transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build splits and vocabulary from a synthetic spec or a corpus directory.
    PrepareData(PrepareArgs),
    /// Train the forward and backward language models of both styles.
    PretrainLm(StageArgs),
    /// Train the pointer, termination and evaluation classifiers.
    PretrainClassifier(StageArgs),
    /// Run the pointer/operator episode loop.
    Train(TrainArgs),
    /// Transfer sentences from one style to the other.
    Transfer(TransferArgs),
    /// Score system outputs.
    Evaluate(EvaluateArgs),
    /// Accuracy and BLEU over a range of termination thresholds.
    Sweep(SweepArgs),
    /// Language-model scores of sentences.
    Score(ScoreArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["synthetic_spec", "corpus_dir"])))]
struct PrepareArgs {
    /// JSON synthetic-data spec.
    #[arg(long)]
    synthetic_spec: Option<PathBuf>,
    /// Directory with s1/ and s2/ holding train.txt, dev.txt and test.txt.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Training sentences per style for synthetic data.
    #[arg(long, default_value_t = 1000)]
    n_per_style: usize,
    #[arg(long, default_value_t = 1)]
    min_freq: usize,
}

#[derive(Args)]
struct StageArgs {
    /// JSON config; the compact desk-scale config when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prepared data directory.
    #[arg(long)]
    data: PathBuf,
    /// Model directory.
    #[arg(long, env = MODEL_ENV)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Continue from the model directory's policy checkpoint.
    #[arg(long)]
    resume: bool,
    /// Write every episode record to train-log.jsonl.
    #[arg(long)]
    log_episodes: bool,
}

#[derive(Args)]
struct InferenceFlags {
    #[arg(long)]
    direction: Option<Direction>,
    #[arg(long)]
    p_stop: Option<f64>,
    #[arg(long)]
    j_max: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long, env = MODEL_ENV)]
    model: PathBuf,
    /// One sentence per line.
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceFlags,
    /// JSON-lines trace of every edit.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, env = MODEL_ENV)]
    model: PathBuf,
    /// System outputs, one per line.
    #[arg(long)]
    outputs: PathBuf,
    /// The inputs the outputs were produced from, line-aligned.
    #[arg(long)]
    test: PathBuf,
    /// Line-aligned reference files; may be repeated.
    #[arg(long)]
    references: Vec<PathBuf>,
    /// Direction of the transfer; sets the target style.
    #[arg(long)]
    direction: Option<Direction>,
    /// Synthetic spec enabling the oracle metrics.
    #[arg(long)]
    synthetic_spec: Option<PathBuf>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, env = MODEL_ENV)]
    model: PathBuf,
    /// Prepared data directory; both styles' test splits are transferred.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    p_stops: Vec<f64>,
    /// Worker threads (0 uses every core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Directory for sweep.csv and sweep.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, env = MODEL_ENV)]
    model: PathBuf,
    #[arg(long)]
    style: Style,
    #[arg(long)]
    input: PathBuf,
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn stage_config(path: Option<&Path>) -> anyhow::Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::compact(),
    })
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn prepare(args: &PrepareArgs) -> anyhow::Result<()> {
    let data = match (&args.synthetic_spec, &args.corpus_dir) {
        (Some(spec), None) => {
            let spec = SyntheticSpec::load(spec)?;
            pipeline::prepare_synthetic(&spec, args.n_per_style, args.min_freq)?
        }
        (None, Some(dir)) => pipeline::prepare_corpus_dir(dir, args.min_freq)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let seed = data.spec.as_ref().map_or(0, |s| s.seed);
    let stage_cfg = serde_json::json!({
        "n_per_style": args.n_per_style,
        "min_freq": args.min_freq,
        "synthetic": data.spec.is_some(),
    });
    data.write(&args.out, stage_cfg, seed)?;
    println!("vocabulary: {} words", data.vocab.len());
    for c in &data.corpora {
        println!(
            "{}: train {}, dev {}, test {}",
            c.style(),
            c.train.len(),
            c.dev.len(),
            c.test.len()
        );
    }
    Ok(())
}

fn transfer(args: &TransferArgs) -> anyhow::Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let mut cfg = bundle.config.inference.clone();
    let f = &args.inference;
    cfg.direction = f.direction.unwrap_or(cfg.direction);
    cfg.p_stop = f.p_stop.unwrap_or(cfg.p_stop);
    cfg.j_max = f.j_max.unwrap_or(cfg.j_max);
    cfg.eta = f.eta.unwrap_or(cfg.eta);
    cfg.validate()?;
    let raw = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let lines: Vec<&str> = raw.lines().collect();
    let mut out = String::new();
    let mut traces = String::new();
    for (k, line) in lines.iter().enumerate() {
        let words = tokenize(line);
        if words.is_empty() {
            out.push_str(line);
            out.push('\n');
            continue;
        }
        let mut t = transfer_text(&words, &bundle.vocab, &cfg, bundle.models())
            .with_context(|| format!("line {}", k + 1))?;
        for s in &mut t.trace.steps {
            s.sentence = k;
        }
        traces.push_str(&t.trace.to_jsonl()?);
        // Untouched lines are echoed verbatim, whitespace included.
        if t.trace.steps.is_empty() {
            out.push_str(line);
        } else {
            out.push_str(&t.surface.join(" "));
        }
        out.push('\n');
    }
    if !raw.ends_with('\n') {
        out.pop();
    }
    write_or_print(args.output.as_deref(), &out)?;
    if let Some(p) = &args.trace_out {
        fs::write(p, traces).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> anyhow::Result<()> {
    let vocab = load_model_vocab(&args.model)?;
    let cnn = load_eval_classifier(&args.model, &vocab)?;
    let outputs = read_lines(&args.outputs)?;
    let sources = read_lines(&args.test)?;
    if outputs.len() != sources.len() {
        return Err(Error::Contract(format!(
            "{} outputs but {} test sentences",
            outputs.len(),
            sources.len()
        ))
        .into());
    }
    let refs: Vec<Vec<String>> = args
        .references
        .iter()
        .map(|p| read_lines(p))
        .collect::<anyhow::Result<_>>()?;
    for (p, r) in args.references.iter().zip(&refs) {
        if r.len() != outputs.len() {
            return Err(Error::Contract(format!(
                "{} has {} lines but there are {} outputs",
                p.display(),
                r.len(),
                outputs.len()
            ))
            .into());
        }
    }
    let direction = match args.direction {
        Some(d) => d,
        None => ModelBundle::load(&args.model).map(|b| b.config.inference.direction).unwrap_or(Direction::S1ToS2),
    };
    let items: Vec<EvalItem> = outputs
        .iter()
        .zip(&sources)
        .enumerate()
        .map(|(k, (o, s))| EvalItem {
            source: tokenize(s),
            output: tokenize(o),
            target: direction.target(),
            edits: None,
            first_position: None,
            references: (!refs.is_empty()).then(|| refs.iter().map(|r| tokenize(&r[k])).collect()),
        })
        .collect();
    if let Some(k) = items.iter().position(|i| i.output.is_empty()) {
        bail!("output line {} is empty", k + 1);
    }
    let spec = args.synthetic_spec.as_deref().map(SyntheticSpec::load).transpose()?;
    let report = evaluate(&items, &cnn, &vocab, spec.as_ref())?;
    write_or_print(args.report.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let cnn = load_eval_classifier(&args.model, &bundle.vocab)?;
    let data = PreparedData::load(&args.data)?;
    let inputs = data.test_inputs();
    let rows = tradeoff_sweep(
        bundle.models(),
        &bundle.vocab,
        &inputs,
        &args.p_stops,
        &bundle.config.inference,
        &cnn,
        data.spec.as_ref(),
        args.jobs,
    )?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("sweep.csv"), write_csv(&rows))?;
    fs::write(args.out.join("sweep.svg"), render_svg(&rows))?;
    print!("{}", write_csv(&rows));
    Ok(())
}

fn score(args: &ScoreArgs) -> anyhow::Result<()> {
    let vocab = load_model_vocab(&args.model)?;
    let lm = load_lm(&args.model, &vocab, args.style)?;
    let mut out = String::new();
    for line in read_lines(&args.input)? {
        let words = tokenize(&line);
        if words.is_empty() {
            continue;
        }
        let s = vocab.encode(&words, args.style)?;
        let probs = lm.word_probs(s.tokens());
        let row = serde_json::json!({
            "sentence": line,
            "score": styledit::lm::sentence_score_from(&probs),
            "word_probs": probs,
        });
        out.push_str(&row.to_string());
        out.push('\n');
    }
    write_or_print(None, &out)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::PrepareData(a) => prepare(&a),
        Command::PretrainLm(a) => {
            let cfg = stage_config(a.config.as_deref())?;
            let m = pipeline::run_pretrain_lm(&a.data, &a.out, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&m.summary)?);
            Ok(())
        }
        Command::PretrainClassifier(a) => {
            let cfg = stage_config(a.config.as_deref())?;
            let m = pipeline::run_pretrain_classifier(&a.data, &a.out, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&m.summary)?);
            Ok(())
        }
        Command::Train(a) => {
            let cfg = stage_config(a.stage.config.as_deref())?;
            let opts = TrainOptions {
                resume: a.resume,
                log_episodes: a.log_episodes,
            };
            let m = pipeline::run_train(&a.stage.data, &a.stage.out, &cfg, &opts)?;
            println!("{}", serde_json::to_string_pretty(&m.summary)?);
            Ok(())
        }
        Command::Transfer(a) => transfer(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Score(a) => score(&a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::Precondition(_)) => 3,
        Some(Error::Divergence { .. }) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::anyhow;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Precondition("x".into()).into()), 3);
        let div = Error::Divergence {
            episode: 1,
            detail: "nan".into(),
        };
        assert_eq!(exit_code(&div.into()), 4);
        assert_eq!(exit_code(&Error::Config("x".into()).into()), 2);
        assert_eq!(exit_code(&anyhow!("other")), 1);
    }
}
