//! Trains the full system and its restricted variants on the synthetic
//! task and prints the oracle metrics of each.
//!
//! cargo run --release -p styledit-core --example calibrate -- [n_per_style] [iterations]

use std::time::Instant;

use styledit::config::Config;
use styledit::corpus::SyntheticSpec;
use styledit::edit::OperatorKind;
use styledit::evaluator::{evaluate, EvalItem};
use styledit::corpus::Direction;
use styledit::inference::{select_action, transfer_many, MaskState, TransferModels};
use styledit::pipeline::PreparedData;
use styledit::pipeline::{pretrain_all, prepare_synthetic, train_policy};

fn main() -> styledit::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let iters: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(12_000);
    let only_full = args.get(3).is_some_and(|a| a == "full");
    let spec = SyntheticSpec::default();
    let data = prepare_synthetic(&spec, n, 1)?;
    let mut cfg = Config::compact();
    cfg.train.iterations = iters;
    let env = |k: &str| std::env::var(k).ok().and_then(|v| v.parse::<f64>().ok());
    if let Some(v) = env("POINTER_LR") {
        cfg.train.pointer_lr = v;
    }
    if let Some(v) = env("GENERATOR_LR") {
        cfg.train.generator_lr = v;
    }
    if let Some(v) = env("LAMBDA_REC") {
        cfg.train.lambda_rec = v;
    }
    if let Some(v) = env("LAMBDA_LM") {
        cfg.train.lambda_lm = v;
    }
    let t0 = Instant::now();
    let pre = pretrain_all(&data, &cfg)?;
    println!(
        "pretrain {:.1}s  vocab {}  lm dev ppl {:?}  cls {:?}  term {:?}  cnn {:?}",
        t0.elapsed().as_secs_f64(),
        data.vocab.len(),
        pre.lm_reports.iter().map(|r| r.dev_perplexity.last().copied()).collect::<Vec<_>>(),
        pre.classifier_report.final_dev_accuracy(),
        pre.termination_report.final_dev_accuracy(),
        pre.eval_report.final_dev_accuracy(),
    );
    use OperatorKind::*;
    let mut variants: Vec<(&str, Config)> = vec![("full", cfg.clone())];
    if !only_full {
        for (name, ops) in [("insert-only", vec![IF, IB, Skip]), ("replace-only", vec![Rep, Skip]), ("delete-only", vec![DC, DF, DB, Skip])] {
            let mut c = cfg.clone();
            c.train.operators_allowed = ops.clone();
            c.inference.operators_allowed = ops;
            variants.push((name, c));
        }
        let mut c = cfg.clone();
        c.train.disable_reconstruction = true;
        variants.push(("no-rec", c));
    }
    let inputs = data.test_inputs();
    for (name, c) in variants {
        let t = Instant::now();
        let (pointer, operators, log) = train_policy(&data, &pre.lms, &pre.classifier, &c)?;
        let models = TransferModels {
            pointer: &pointer,
            termination: &pre.termination,
            operators: &operators,
            lms: &pre.lms,
        };
        let train_s = t.elapsed().as_secs_f64();
        let transfers = transfer_many(&inputs, &data.vocab, &c.inference, models)?;
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
        let m = r.synthetic_oracle.unwrap();
        let last = log.last().cloned().unwrap_or_default();
        println!(
            "{name:13} train {train_s:.1}s  acc {:.3}  bleu_src {:.2}  flip {:.3}  content {:.3}  ptr {:?}  ref_bleu {:.2}  class_bleu {:.2}  last r_conf {:.4}",
            r.accuracy, r.bleu_source, m.style_flip_rate, m.content_preservation_rate, m.pointer_precision, m.reference_bleu, m.class_reference_bleu, last.mean_r_conf
        );
        println!("{:13} antonym replacement at oracle positions {:.3}", "", antonym_rate(&data, models, &c)?);
        let failures: Vec<_> = r.records.iter().filter(|x| x.oracle_style != Some(x.target_style)).collect();
        for x in failures.iter().take(12) {
            let t = &transfers[x.index];
            println!("    {} => {}", x.source, x.output);
            println!("       {}", t.trace.steps.iter().map(|s| format!("{}@{}:{:?} c={:.2}", s.action.op.as_str(), s.action.position, s.action.word, s.scores.source_confidence)).collect::<Vec<_>>().join(" "));
        }
    }
    Ok(())
}

/// Share of oracle style positions where, with the pointer forced onto the
/// position, the chosen action replaces the word with an antonym.
fn antonym_rate(data: &PreparedData, models: TransferModels, cfg: &Config) -> styledit::Result<f64> {
    let spec = data.spec.as_ref().expect("synthetic data");
    let (mut hits, mut total) = (0usize, 0usize);
    for (words, style) in data.test_inputs() {
        let tokens = data.vocab.encode(&words, style)?.tokens().to_vec();
        for &p in &spec.annotate(&words).style_positions {
            let mut mask = MaskState::new();
            for i in (0..tokens.len()).filter(|&i| i != p) {
                mask.mask_window(i, 0, tokens.len());
            }
            let Some(sel) = select_action(&tokens, &mask, models, &cfg.inference, Direction::from_source(style))? else {
                continue;
            };
            let opposite = if spec.pos_lexicon.contains(&words[p]) { &spec.neg_lexicon } else { &spec.pos_lexicon };
            let a = &sel.chosen.action;
            hits += usize::from(a.op == OperatorKind::Rep && a.word.is_some_and(|w| opposite.iter().any(|o| o == data.vocab.token(w))));
            total += 1;
        }
    }
    Ok(hits as f64 / total.max(1) as f64)
}
