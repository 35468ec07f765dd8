//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! cargo test --release -p styledit-core --test acceptance

mod common;

use std::time::{Duration, Instant};

use styledit::config::{Config, InferenceConfig};
use styledit::corpus::SyntheticSpec;
use styledit::edit::OperatorKind;
use styledit::evaluator::sweep::tradeoff_sweep;
use styledit::evaluator::{evaluate, EvalItem, SyntheticMetrics};
use styledit::inference::{transfer_many, TransferModels};
use styledit::pipeline::{pretrain_all, prepare_synthetic, train_policy, Pretrained, PreparedData};
use styledit::pointer::PointerNet;
use styledit::operator::OperatorAgent;

const EDIT_ALGEBRA_BUDGET: Duration = Duration::from_secs(120);
const GRADIENT_BUDGET: Duration = Duration::from_secs(300);
const TRAIN_BUDGET: Duration = Duration::from_secs(30 * 60);
const MAX_EPISODES: u64 = 200_000;

const FD_TOL: f64 = 1e-4;
const REINFORCE_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-6;
const BLEU_TOL: f64 = 1e-9;
const SWEEP_TOL: f64 = 1e-9;

const MIN_FLIP: f64 = 0.85;
const MIN_CONTENT: f64 = 0.90;
const MIN_POINTER_PRECISION: f64 = 0.70;

const N_PER_STYLE: usize = 1000;
const EPISODES: u64 = 80_000;
const P_STOPS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, name: &str, o: &Outcome) {
    println!("{} criterion {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn edit_algebra() -> Outcome {
    let t = Instant::now();
    let inverse = common::inverse_exhaustive(8, 6);
    let reach = common::reachability_complete(6, 4);
    let el = t.elapsed();
    match (inverse, reach) {
        (Ok(checks), Ok(sentences)) => Outcome {
            pass: el < EDIT_ALGEBRA_BUDGET,
            detail: format!("{checks} inverse checks, {sentences} sentences mutually reachable, {:.1}s", el.as_secs_f64()),
        },
        (a, b) => Outcome {
            pass: false,
            detail: format!("{:?} / {:?}", a.err(), b.err()),
        },
    }
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let fd = [
        common::pointer_fd_error(),
        common::generator_fd_error(),
        common::classifier_fd_error(),
        common::lm_fd_error(),
    ];
    let (pd, pn) = common::pointer_reinforce_diff();
    let (gd, gn) = common::generator_reinforce_diff();
    let el = t.elapsed();
    let worst_fd = fd.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: worst_fd < FD_TOL && pd < REINFORCE_TOL && gd < REINFORCE_TOL && pn > 0.0 && gn > 0.0 && el < GRADIENT_BUDGET,
        detail: format!(
            "finite-difference rel err {worst_fd:.2e}, REINFORCE diff pointer {pd:.2e} generator {gd:.2e}, {:.1}s",
            el.as_secs_f64()
        ),
    }
}

fn normalization() -> Outcome {
    let dev = common::normalization_max_dev(300, 11);
    let bad = common::conf_reward_violations(2000, 5);
    Outcome {
        pass: dev < NORMALIZATION_TOL && bad == 0,
        detail: format!("max softmax deviation {dev:.2e}, {bad} confidence-reward violations"),
    }
}

fn bleu_oracle() -> Outcome {
    let (worst, nonzero) = common::bleu_oracle_max_diff(100, 42);
    Outcome {
        pass: worst < BLEU_TOL,
        detail: format!("max |lib - brute force| {worst:.2e} over 100 corpora ({nonzero} nonzero)"),
    }
}

struct Policy {
    pointer: PointerNet,
    operators: OperatorAgent,
    seconds: f64,
}

fn variant(data: &PreparedData, pre: &Pretrained, cfg: &Config) -> styledit::Result<Policy> {
    let t = Instant::now();
    let (pointer, operators, _) = train_policy(data, &pre.lms, &pre.classifier, cfg)?;
    Ok(Policy {
        pointer,
        operators,
        seconds: t.elapsed().as_secs_f64(),
    })
}

fn models<'a>(pre: &'a Pretrained, p: &'a Policy) -> TransferModels<'a> {
    TransferModels {
        pointer: &p.pointer,
        termination: &pre.termination,
        operators: &p.operators,
        lms: &pre.lms,
    }
}

fn oracle_metrics(data: &PreparedData, pre: &Pretrained, p: &Policy, inf: &InferenceConfig) -> styledit::Result<SyntheticMetrics> {
    let inputs = data.test_inputs();
    let transfers = transfer_many(&inputs, &data.vocab, inf, models(pre, p))?;
    let items: Vec<EvalItem> = inputs
        .iter()
        .zip(&transfers)
        .map(|((src, style), t)| EvalItem {
            source: src.clone(),
            output: t.surface.clone(),
            target: style.opposite(),
            edits: Some(t.trace.len()),
            first_position: t.trace.steps.first().map(|s| s.action.position),
            references: None,
        })
        .collect();
    let r = evaluate(&items, &pre.eval_classifier, &data.vocab, data.spec.as_ref())?;
    Ok(r.synthetic_oracle.expect("synthetic data carries an oracle"))
}

fn main() -> styledit::Result<()> {
    let mut outcomes = Vec::new();
    let mut record = |n: usize, name: &str, o: Outcome| {
        report(n, name, &o);
        outcomes.push(o.pass);
    };

    record(1, "edit algebra", edit_algebra());
    record(2, "gradients", gradients());
    record(3, "normalization", normalization());

    let data = prepare_synthetic(&SyntheticSpec::default(), N_PER_STYLE, 1)?;
    let mut cfg = Config::compact();
    cfg.train.iterations = EPISODES;
    let t = Instant::now();
    let pre = pretrain_all(&data, &cfg)?;
    let pretrain_s = t.elapsed().as_secs_f64();
    let full = variant(&data, &pre, &cfg)?;
    let inputs = data.test_inputs();

    let t = Instant::now();
    let inv = common::inference_invariants(models(&pre, &full), &data.vocab, &inputs, &cfg.inference, &P_STOPS);
    record(
        4,
        "inference invariants",
        match inv {
            Ok(s) => Outcome {
                pass: true,
                detail: format!("{} sentences x {} thresholds, {} steps, {:.1}s", s.sentences, P_STOPS.len(), s.steps, t.elapsed().as_secs_f64()),
            },
            Err(e) => Outcome { pass: false, detail: e },
        },
    );

    let m = oracle_metrics(&data, &pre, &full, &cfg.inference)?;
    let precision = m.pointer_precision.unwrap_or(0.0);
    let train_time = Duration::from_secs_f64(pretrain_s + full.seconds);
    record(
        5,
        "synthetic end-to-end",
        Outcome {
            pass: m.style_flip_rate >= MIN_FLIP
                && m.content_preservation_rate >= MIN_CONTENT
                && precision >= MIN_POINTER_PRECISION
                && train_time <= TRAIN_BUDGET
                && EPISODES <= MAX_EPISODES,
            detail: format!(
                "flip {:.3} (>= {MIN_FLIP}), content {:.3} (>= {MIN_CONTENT}), pointer precision {precision:.3} (>= {MIN_POINTER_PRECISION}), {EPISODES} episodes in {:.0}s",
                m.style_flip_rate,
                m.content_preservation_rate,
                train_time.as_secs_f64()
            ),
        },
    );

    use OperatorKind::*;
    let mut ablations: Vec<(&str, Config)> = Vec::new();
    for (name, ops) in [("insert-only", vec![IF, IB, Skip]), ("replace-only", vec![Rep, Skip]), ("delete-only", vec![DC, DF, DB, Skip])] {
        let mut c = cfg.clone();
        c.train.operators_allowed = ops.clone();
        c.inference.operators_allowed = ops;
        ablations.push((name, c));
    }
    let mut c = cfg.clone();
    c.train.disable_reconstruction = true;
    ablations.push(("no-reconstruction", c));
    let mut beaten = true;
    let mut parts = vec![format!("full {:.3}", m.content_preservation_rate)];
    for (name, c) in &ablations {
        let p = variant(&data, &pre, c)?;
        let am = oracle_metrics(&data, &pre, &p, &c.inference)?;
        beaten &= m.content_preservation_rate > am.content_preservation_rate;
        parts.push(format!("{name} {:.3}", am.content_preservation_rate));
    }
    record(6, "ablation content preservation", Outcome { pass: beaten, detail: parts.join(", ") });

    let p_stops = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let rows = tradeoff_sweep(models(&pre, &full), &data.vocab, &inputs, &p_stops, &cfg.inference, &pre.eval_classifier, data.spec.as_ref(), 0)?;
    let acc_ok = rows.windows(2).all(|w| w[1].accuracy <= w[0].accuracy + SWEEP_TOL);
    let bleu_ok = rows.windows(2).all(|w| w[1].bleu_source + SWEEP_TOL >= w[0].bleu_source);
    let last = rows.last().unwrap();
    record(
        7,
        "trade-off sweep",
        Outcome {
            pass: acc_ok && bleu_ok && last.mean_edits == 0.0,
            detail: format!(
                "accuracy {}, BLEU-vs-source {}, edits at p_stop 1.0: {}",
                rows.iter().map(|r| format!("{:.3}", r.accuracy)).collect::<Vec<_>>().join(" "),
                rows.iter().map(|r| format!("{:.1}", r.bleu_source)).collect::<Vec<_>>().join(" "),
                last.mean_edits
            ),
        },
    );

    record(8, "BLEU oracle", bleu_oracle());

    let passed = outcomes.iter().filter(|&&p| p).count();
    println!("{passed} of {} criteria passed", outcomes.len());
    Ok(())
}
