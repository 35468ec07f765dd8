//! Accuracy and BLEU as the termination threshold varies.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalItem, TextCnn};
use crate::config::InferenceConfig;
use crate::corpus::{Style, SyntheticSpec, Vocab};
use crate::error::{Error, Result};
use crate::inference::{transfer_many, TransferModels};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_stop: f64,
    pub accuracy: f64,
    pub bleu_source: f64,
    /// BLEU against the synthetic flip references, when an oracle exists.
    pub bleu_reference: Option<f64>,
    pub mean_edits: f64,
}

/// Transfers every input at each threshold and scores the outputs.
/// `jobs` bounds the worker threads (0 uses the global pool).
pub fn tradeoff_sweep(
    models: TransferModels,
    vocab: &Vocab,
    inputs: &[(Vec<String>, Style)],
    p_stops: &[f64],
    base: &InferenceConfig,
    classifier: &TextCnn,
    oracle: Option<&SyntheticSpec>,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let run = || {
        p_stops
            .iter()
            .map(|&p| {
                let cfg = InferenceConfig {
                    p_stop: p,
                    ..base.clone()
                };
                cfg.validate()?;
                let transfers = transfer_many(inputs, vocab, &cfg, models)?;
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
                let report = evaluate(&items, classifier, vocab, oracle)?;
                let edits: usize = transfers.iter().map(|t| t.trace.len()).sum();
                Ok(SweepRow {
                    p_stop: p,
                    accuracy: report.accuracy,
                    bleu_source: report.bleu_source,
                    bleu_reference: report.synthetic_oracle.map(|m| m.reference_bleu),
                    mean_edits: edits as f64 / inputs.len().max(1) as f64,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    if jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a pool of {jobs} workers: {e}")))?
            .install(run)
    }
}

pub fn write_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p_stop,accuracy,bleu_source,bleu_reference,mean_edits\n");
    for r in rows {
        let bref = r.bleu_reference.map(|b| format!("{b:.4}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:.6},{:.4},{},{:.4}",
            r.p_stop, r.accuracy, r.bleu_source, bref, r.mean_edits
        );
    }
    out
}

/// Two-panel line plot (accuracy and BLEU against p_stop) as SVG.
pub fn render_svg(rows: &[SweepRow]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 300.0;
    const PAD: f64 = 48.0;
    let panel_w = (W - 3.0 * PAD) / 2.0;
    let panel_h = H - 2.0 * PAD;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let panels: [(&str, f64, Box<dyn Fn(&SweepRow) -> f64>); 2] = [
        ("accuracy", 1.0, Box::new(|r: &SweepRow| r.accuracy)),
        ("BLEU vs source", 100.0, Box::new(|r: &SweepRow| r.bleu_source)),
    ];
    for (k, (title, ymax, get)) in panels.iter().enumerate() {
        let x0 = PAD + k as f64 * (panel_w + PAD);
        let y0 = PAD;
        let _ = writeln!(
            svg,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{panel_w}\" height=\"{panel_h}\" fill=\"none\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{title}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">p_stop</text>",
            x0 + panel_w / 2.0,
            y0 - 10.0,
            x0 + panel_w / 2.0,
            y0 + panel_h + 32.0,
        );
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.2}</text>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                x0 + f * panel_w,
                y0 + panel_h + 16.0,
                f,
                x0 - 4.0,
                y0 + panel_h - f * panel_h + 4.0,
                if *ymax > 1.0 { format!("{:.0}", f * ymax) } else { format!("{f:.2}") },
            );
        }
        let points: Vec<String> = rows
            .iter()
            .map(|r| {
                let x = x0 + r.p_stop.clamp(0.0, 1.0) * panel_w;
                let y = y0 + panel_h - (get(r) / ymax).clamp(0.0, 1.0) * panel_h;
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        );
        for p in &points {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(svg, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"#1f77b4\"/>");
        }
    }
    svg.push_str("</svg>\n");
    svg
}
