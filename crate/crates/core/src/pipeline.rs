//! Staged training pipeline over on-disk artifacts, plus in-memory
//! equivalents used by tests and experiments.
//!
//! Data directory: `s1/`, `s2/` split files, `vocab.txt`, optionally
//! `synthetic-spec.json` and `oracle.jsonl`, and `manifest.json`.
//!
//! Model directory: `lm-s1.ckpt`, `lm-s2.ckpt`, `classifier.ckpt`,
//! `termination.ckpt`, `eval-classifier.ckpt`, `policy.ckpt`, one
//! `manifest-<stage>.json` per stage and `train-log.jsonl`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::corpus::{
    build_vocab, generate_synthetic, load_corpora, EncodedCorpus, Sentence, Style, StyleCorpus, SyntheticOracle, SyntheticSpec, Vocab,
};
use crate::error::{Error, Result};
use crate::evaluator::textcnn::{train_eval_classifier, TextCnn};
use crate::inference::TransferModels;
use crate::lm::{train_lm, LmReport, StyleLm};
use crate::operator::OperatorAgent;
use crate::pointer::{train_classifier, ClassifierReport, PointerNet};
use crate::trainer::{load_policy, summarize, Trainer, WindowSummary};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const SPEC_FILE: &str = "synthetic-spec.json";
pub const ORACLE_FILE: &str = "oracle.jsonl";
pub const CLASSIFIER_FILE: &str = "classifier.ckpt";
pub const TERMINATION_FILE: &str = "termination.ckpt";
pub const EVAL_CLASSIFIER_FILE: &str = "eval-classifier.ckpt";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const TRAIN_LOG_FILE: &str = "train-log.jsonl";

pub fn lm_file(style: Style) -> String {
    format!("lm-{style}.ckpt")
}

const SOURCES: &[&str] = &[
    include_str!("lib.rs"),
    include_str!("error.rs"),
    include_str!("config.rs"),
    include_str!("checkpoint.rs"),
    include_str!("corpus/mod.rs"),
    include_str!("corpus/vocab.rs"),
    include_str!("corpus/synthetic.rs"),
    include_str!("edit.rs"),
    include_str!("autograd/mod.rs"),
    include_str!("autograd/nn.rs"),
    include_str!("autograd/optim.rs"),
    include_str!("pointer.rs"),
    include_str!("operator.rs"),
    include_str!("lm.rs"),
    include_str!("trainer.rs"),
    include_str!("inference.rs"),
    include_str!("evaluator/mod.rs"),
    include_str!("evaluator/bleu.rs"),
    include_str!("evaluator/textcnn.rs"),
    include_str!("evaluator/sweep.rs"),
    include_str!("pipeline.rs"),
];

/// Content hash of the library sources this binary was built from.
pub fn code_hash() -> String {
    let mut h = Sha256::new();
    for s in SOURCES {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Provenance of one pipeline stage's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub vocab_hash: String,
    /// Files this stage wrote, relative to its output directory.
    pub outputs: Vec<String>,
    /// Manifests of the stages this one consumed.
    pub inputs: Vec<String>,
    pub code_version: String,
    pub code_hash: String,
    /// Seconds since the epoch from `SOURCE_DATE_EPOCH`; absent otherwise
    /// so that reruns produce identical files.
    pub created: Option<u64>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(stage: &str, config: serde_json::Value, seed: u64, vocab_hash: &str) -> Self {
        RunManifest {
            stage: stage.to_string(),
            config,
            seed,
            vocab_hash: vocab_hash.to_string(),
            outputs: Vec::new(),
            inputs: Vec::new(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            code_hash: code_hash(),
            created: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()),
            summary: serde_json::Value::Null,
        }
    }

    pub fn file_name(stage: &str) -> String {
        format!("manifest-{stage}.json")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ck.to_bytes()?)
}

/// Loaded data directory.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub vocab: Vocab,
    pub corpora: [StyleCorpus; 2],
    pub encoded: [EncodedCorpus; 2],
    pub spec: Option<SyntheticSpec>,
}

impl PreparedData {
    pub fn from_corpora(corpora: [StyleCorpus; 2], min_freq: usize, spec: Option<SyntheticSpec>) -> Result<Self> {
        let vocab = build_vocab(&[&corpora[0], &corpora[1]], min_freq)?;
        Self::with_vocab(corpora, vocab, spec)
    }

    fn with_vocab(corpora: [StyleCorpus; 2], vocab: Vocab, spec: Option<SyntheticSpec>) -> Result<Self> {
        let encoded = [corpora[0].encode(&vocab)?, corpora[1].encode(&vocab)?];
        Ok(PreparedData {
            vocab,
            corpora,
            encoded,
            spec,
        })
    }

    /// Train splits of both styles, indexed by style.
    pub fn train_sets(&self) -> [Vec<Sentence>; 2] {
        [self.encoded[0].train.clone(), self.encoded[1].train.clone()]
    }

    pub fn joint(&self, split: &str) -> Vec<Sentence> {
        let pick = |e: &EncodedCorpus| match split {
            "train" => e.train.clone(),
            "dev" => e.dev.clone(),
            _ => e.test.clone(),
        };
        let mut out = pick(&self.encoded[0]);
        out.extend(pick(&self.encoded[1]));
        out
    }

    /// Test sentences as surface words with their styles.
    pub fn test_inputs(&self) -> Vec<(Vec<String>, Style)> {
        self.corpora
            .iter()
            .flat_map(|c| c.test.iter().map(move |s| (s.clone(), c.style())))
            .collect()
    }

    pub fn split_sizes(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for c in &self.corpora {
            m.insert(
                c.style().to_string(),
                serde_json::json!({"train": c.train.len(), "dev": c.dev.len(), "test": c.test.len()}),
            );
        }
        serde_json::Value::Object(m)
    }

    pub fn write(&self, out: &Path, stage_config: serde_json::Value, seed: u64) -> Result<RunManifest> {
        fs::create_dir_all(out)?;
        let mut manifest = RunManifest::new("prepare-data", stage_config, seed, &self.vocab.hash());
        for c in &self.corpora {
            c.write_dir(&out.join(c.style().as_str()))?;
            for split in ["train", "dev", "test"] {
                manifest.outputs.push(format!("{}/{split}.txt", c.style()));
            }
        }
        self.vocab.save(&out.join(VOCAB_FILE))?;
        manifest.outputs.push(VOCAB_FILE.into());
        if let Some(spec) = &self.spec {
            spec.save(&out.join(SPEC_FILE))?;
            manifest.outputs.push(SPEC_FILE.into());
            annotate_all(spec, &self.corpora).save_jsonl(&out.join(ORACLE_FILE))?;
            manifest.outputs.push(ORACLE_FILE.into());
        }
        manifest.summary = self.split_sizes();
        manifest.save(&out.join("manifest.json"))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let corpora = load_corpora(dir)?;
        let vocab_path = dir.join(VOCAB_FILE);
        if !vocab_path.exists() {
            return Err(Error::Precondition(format!(
                "prepare-data required: {} not found",
                vocab_path.display()
            )));
        }
        let vocab = Vocab::load(&vocab_path)?;
        let spec_path = dir.join(SPEC_FILE);
        let spec = if spec_path.exists() {
            Some(SyntheticSpec::load(&spec_path)?)
        } else {
            None
        };
        Self::with_vocab(corpora, vocab, spec)
    }
}

/// Oracle annotations for every sentence of the corpora.
fn annotate_all(spec: &SyntheticSpec, corpora: &[StyleCorpus; 2]) -> SyntheticOracle {
    let mut oracle = SyntheticOracle::default();
    for c in corpora {
        for (_, split) in c.splits() {
            for s in split {
                oracle.entries.insert(s.join(" "), spec.annotate(s));
            }
        }
    }
    oracle
}

pub fn prepare_synthetic(spec: &SyntheticSpec, n_per_style: usize, min_freq: usize) -> Result<PreparedData> {
    let (s1, s2, _) = generate_synthetic(spec, n_per_style)?;
    PreparedData::from_corpora([s1, s2], min_freq, Some(spec.clone()))
}

pub fn prepare_corpus_dir(dir: &Path, min_freq: usize) -> Result<PreparedData> {
    let corpora = load_corpora(dir)?;
    PreparedData::from_corpora(corpora, min_freq, None)
}

/// Pretrained components consumed by the episode loop and inference.
#[derive(Clone, Debug)]
pub struct Pretrained {
    pub lms: [StyleLm; 2],
    pub lm_reports: [LmReport; 2],
    pub classifier: PointerNet,
    pub classifier_report: ClassifierReport,
    pub termination: PointerNet,
    pub termination_report: ClassifierReport,
    pub eval_classifier: TextCnn,
    pub eval_report: ClassifierReport,
}

pub fn pretrain_lms(data: &PreparedData, cfg: &Config) -> Result<([StyleLm; 2], [LmReport; 2])> {
    let run = |style: Style| {
        let e = &data.encoded[style.index()];
        train_lm(style, &data.vocab, &e.train, &e.dev, &cfg.lm)
    };
    let (a, b) = rayon::join(|| run(Style::S1), || run(Style::S2));
    let (a, b) = (a?, b?);
    Ok(([a.0, b.0], [a.1, b.1]))
}

/// Pointer classifier, termination classifier and evaluation classifier.
pub fn pretrain_classifiers(
    data: &PreparedData,
    cfg: &Config,
) -> Result<(PointerNet, ClassifierReport, PointerNet, ClassifierReport, TextCnn, ClassifierReport)> {
    let train = data.joint("train");
    let dev = data.joint("dev");
    let v = data.vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.classifier.seed);
    let mut classifier = PointerNet::new(v, &cfg.encoder, &mut rng);
    let mut termination = PointerNet::new(v, &cfg.encoder, &mut rng);
    let creport = train_classifier(&mut classifier, &train, &dev, &cfg.classifier, 0.0)?;
    let tcfg = crate::config::ClassifierConfig {
        seed: cfg.classifier.seed.wrapping_add(1),
        ..cfg.classifier.clone()
    };
    let treport = train_classifier(&mut termination, &train, &dev, &tcfg, cfg.classifier.unk_noise_rate)?;
    let (cnn, ereport) = train_eval_classifier(v, &train, &dev, &cfg.eval_classifier)?;
    Ok((classifier, creport, termination, treport, cnn, ereport))
}

pub fn pretrain_all(data: &PreparedData, cfg: &Config) -> Result<Pretrained> {
    cfg.validate()?;
    let (lms, lm_reports) = pretrain_lms(data, cfg)?;
    let (classifier, classifier_report, termination, termination_report, eval_classifier, eval_report) =
        pretrain_classifiers(data, cfg)?;
    Ok(Pretrained {
        lms,
        lm_reports,
        classifier,
        classifier_report,
        termination,
        termination_report,
        eval_classifier,
        eval_report,
    })
}

/// Fresh word generators, seeded from the training seed.
pub fn init_operators(vocab_size: usize, cfg: &Config) -> OperatorAgent {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0x5eed_0f0e);
    OperatorAgent::new(vocab_size, &cfg.encoder, &mut rng)
}

/// Runs the full episode loop in memory.
pub fn train_policy(
    data: &PreparedData,
    lms: &[StyleLm; 2],
    classifier: &PointerNet,
    cfg: &Config,
) -> Result<(PointerNet, OperatorAgent, Vec<WindowSummary>)> {
    let train = data.train_sets();
    let mut trainer = Trainer::new(
        cfg.train.clone(),
        lms,
        &train,
        classifier.clone(),
        init_operators(data.vocab.len(), cfg),
    )?;
    let mut log = Vec::new();
    trainer.train(|_, records| {
        log.push(summarize(records));
        Ok(())
    })?;
    let (p, o) = trainer.into_models();
    Ok((p, o, log))
}

/// Everything inference needs.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub vocab: Vocab,
    pub config: Config,
    pub lms: [StyleLm; 2],
    pub pointer: PointerNet,
    pub termination: PointerNet,
    pub operators: OperatorAgent,
}

impl ModelBundle {
    pub fn models(&self) -> TransferModels<'_> {
        TransferModels {
            pointer: &self.pointer,
            termination: &self.termination,
            operators: &self.operators,
            lms: &self.lms,
        }
    }

    /// Loads a trained model directory.
    pub fn load(model_dir: &Path) -> Result<Self> {
        let vocab = load_model_vocab(model_dir)?;
        let hash = vocab.hash();
        let policy = require(model_dir, POLICY_FILE, "train")?;
        policy.expect("policy", &hash)?;
        let config = config_of(&policy)?;
        let lms = load_lms(model_dir, &vocab)?;
        let termination = load_pointer(model_dir, TERMINATION_FILE, "termination", "pretrain-classifier", &vocab)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pointer = PointerNet::new(vocab.len(), &config.encoder, &mut rng);
        let mut operators = OperatorAgent::new(vocab.len(), &config.encoder, &mut rng);
        load_policy(&policy, &mut pointer, &mut operators)?;
        Ok(ModelBundle {
            vocab,
            config,
            lms,
            pointer,
            termination,
            operators,
        })
    }
}

fn require(dir: &Path, file: &str, stage: &str) -> Result<Checkpoint> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(Error::Precondition(format!(
            "{stage} required: {} not found",
            path.display()
        )));
    }
    Checkpoint::load(&path)
}

fn config_of(ck: &Checkpoint) -> Result<Config> {
    let cfg = ck
        .meta
        .get("config")
        .cloned()
        .ok_or_else(|| Error::Checkpoint(format!("{} checkpoint has no config", ck.kind)))?;
    serde_json::from_value(cfg).map_err(Error::from)
}

/// Loads one style's language model pair on its own.
pub fn load_lm(model_dir: &Path, vocab: &Vocab, style: Style) -> Result<StyleLm> {
    let ck = require(model_dir, &lm_file(style), "pretrain-lm")?;
    ck.expect("lm", &vocab.hash())?;
    let cfg = config_of(&ck)?;
    let mut lm = StyleLm::new(style, vocab, &cfg.lm, &mut ChaCha8Rng::seed_from_u64(0));
    lm.load(&ck.map())?;
    Ok(lm)
}

pub fn load_lms(model_dir: &Path, vocab: &Vocab) -> Result<[StyleLm; 2]> {
    Ok([load_lm(model_dir, vocab, Style::S1)?, load_lm(model_dir, vocab, Style::S2)?])
}

/// Vocabulary stored in a model directory.
pub fn load_model_vocab(model_dir: &Path) -> Result<Vocab> {
    let path = model_dir.join(VOCAB_FILE);
    if !path.exists() {
        return Err(Error::Precondition(format!(
            "pretrain-lm required: {} not found",
            path.display()
        )));
    }
    Vocab::load(&path)
}

fn load_pointer(dir: &Path, file: &str, kind: &str, stage: &str, vocab: &Vocab) -> Result<PointerNet> {
    let ck = require(dir, file, stage)?;
    ck.expect(kind, &vocab.hash())?;
    let cfg = config_of(&ck)?;
    let mut net = PointerNet::new(vocab.len(), &cfg.encoder, &mut ChaCha8Rng::seed_from_u64(0));
    net.load(&ck.map(), "")?;
    Ok(net)
}

pub fn load_eval_classifier(model_dir: &Path, vocab: &Vocab) -> Result<TextCnn> {
    let ck = require(model_dir, EVAL_CLASSIFIER_FILE, "pretrain-classifier")?;
    ck.expect("eval-classifier", &vocab.hash())?;
    let cfg = config_of(&ck)?;
    let mut cnn = TextCnn::new(vocab.len(), &cfg.eval_classifier, &mut ChaCha8Rng::seed_from_u64(0));
    cnn.load(&ck.map())?;
    Ok(cnn)
}

fn meta(cfg: &Config, manifest: &str) -> serde_json::Value {
    serde_json::json!({"config": cfg, "manifest": manifest})
}

fn data_manifest_ref(data_dir: &Path) -> Vec<String> {
    let p = data_dir.join("manifest.json");
    if p.exists() {
        vec![p.display().to_string()]
    } else {
        Vec::new()
    }
}

/// Stage: train both language models and write them to `model_dir`.
pub fn run_pretrain_lm(data_dir: &Path, model_dir: &Path, cfg: &Config) -> Result<RunManifest> {
    cfg.validate()?;
    let data = PreparedData::load(data_dir)?;
    fs::create_dir_all(model_dir)?;
    let (lms, reports) = pretrain_lms(&data, cfg)?;
    let hash = data.vocab.hash();
    let mname = RunManifest::file_name("pretrain-lm");
    let mut manifest = RunManifest::new("pretrain-lm", serde_json::to_value(cfg)?, cfg.lm.seed, &hash);
    manifest.inputs = data_manifest_ref(data_dir);
    data.vocab.save(&model_dir.join(VOCAB_FILE))?;
    manifest.outputs.push(VOCAB_FILE.into());
    for lm in &lms {
        let mut ck = Checkpoint::new("lm", &hash, meta(cfg, &mname));
        ck.extend(lm.export());
        save_checkpoint(&ck, &model_dir.join(lm_file(lm.style)))?;
        manifest.outputs.push(lm_file(lm.style));
    }
    manifest.summary = serde_json::to_value(&reports)?;
    manifest.save(&model_dir.join(mname))?;
    Ok(manifest)
}

/// Stage: pointer classifier, termination classifier and evaluation
/// classifier.
pub fn run_pretrain_classifier(data_dir: &Path, model_dir: &Path, cfg: &Config) -> Result<RunManifest> {
    cfg.validate()?;
    let data = PreparedData::load(data_dir)?;
    fs::create_dir_all(model_dir)?;
    let (c, cr, t, tr, e, er) = pretrain_classifiers(&data, cfg)?;
    let hash = data.vocab.hash();
    let mname = RunManifest::file_name("pretrain-classifier");
    let mut manifest = RunManifest::new("pretrain-classifier", serde_json::to_value(cfg)?, cfg.classifier.seed, &hash);
    manifest.inputs = data_manifest_ref(data_dir);
    let mut ck = Checkpoint::new("classifier", &hash, meta(cfg, &mname));
    ck.extend(c.params().export_named(""));
    save_checkpoint(&ck, &model_dir.join(CLASSIFIER_FILE))?;
    let mut ck = Checkpoint::new("termination", &hash, meta(cfg, &mname));
    ck.extend(t.params().export_named(""));
    save_checkpoint(&ck, &model_dir.join(TERMINATION_FILE))?;
    let mut ck = Checkpoint::new("eval-classifier", &hash, meta(cfg, &mname));
    ck.extend(e.export());
    save_checkpoint(&ck, &model_dir.join(EVAL_CLASSIFIER_FILE))?;
    if !model_dir.join(VOCAB_FILE).exists() {
        data.vocab.save(&model_dir.join(VOCAB_FILE))?;
    }
    manifest.outputs = vec![CLASSIFIER_FILE.into(), TERMINATION_FILE.into(), EVAL_CLASSIFIER_FILE.into()];
    manifest.summary = serde_json::json!({
        "classifier": cr, "termination": tr, "eval_classifier": er,
    });
    manifest.save(&model_dir.join(mname))?;
    Ok(manifest)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Continue from an existing `policy.ckpt` in the model directory.
    pub resume: bool,
    /// Write every episode record to `train-log.jsonl`.
    pub log_episodes: bool,
}

/// Stage: the episode loop. Requires both pretraining stages.
pub fn run_train(data_dir: &Path, model_dir: &Path, cfg: &Config, opts: &TrainOptions) -> Result<RunManifest> {
    cfg.validate()?;
    let vocab_path = model_dir.join(VOCAB_FILE);
    for (file, stage) in [
        (lm_file(Style::S1), "pretrain-lm"),
        (lm_file(Style::S2), "pretrain-lm"),
        (CLASSIFIER_FILE.to_string(), "pretrain-classifier"),
    ] {
        if !model_dir.join(&file).exists() {
            return Err(Error::Precondition(format!(
                "{stage} required: {} not found",
                model_dir.join(file).display()
            )));
        }
    }
    if !vocab_path.exists() {
        return Err(Error::Precondition(format!("pretrain-lm required: {} not found", vocab_path.display())));
    }
    let data = PreparedData::load(data_dir)?;
    let vocab = Vocab::load(&vocab_path)?;
    if vocab != data.vocab {
        return Err(Error::Precondition(
            "model directory was pretrained on a different vocabulary than the data directory".into(),
        ));
    }
    let hash = vocab.hash();
    let lms = load_lms(model_dir, &vocab)?;
    let classifier = load_pointer(model_dir, CLASSIFIER_FILE, "classifier", "pretrain-classifier", &vocab)?;
    let train = data.train_sets();
    let mut trainer = Trainer::new(
        cfg.train.clone(),
        &lms,
        &train,
        classifier,
        init_operators(vocab.len(), cfg),
    )?;
    let policy_path = model_dir.join(POLICY_FILE);
    let log_path = model_dir.join(TRAIN_LOG_FILE);
    if opts.resume && policy_path.exists() {
        let ck = Checkpoint::load(&policy_path)?;
        ck.expect("policy", &hash)?;
        trainer.restore(&ck)?;
        log::info!("resumed at episode {}", trainer.episode());
    } else if log_path.exists() {
        fs::remove_file(&log_path)?;
    }
    let mname = RunManifest::file_name("train");
    let mut log_file = if opts.log_episodes {
        Some(fs::OpenOptions::new().create(true).append(true).open(&log_path)?)
    } else {
        None
    };
    let every = cfg.train.checkpoint_every;
    let mut summaries = Vec::new();
    trainer.train(|t, records| {
        if let Some(f) = log_file.as_mut() {
            for r in records {
                writeln!(f, "{}", serde_json::to_string(r)?)?;
            }
        }
        let s = summarize(records);
        let before = t.episode() - records.len() as u64;
        if every > 0 && before / every != t.episode() / every {
            save_checkpoint(&t.checkpoint(&hash, meta(cfg, &mname)), &policy_path)?;
            log::info!(
                "episode {}: r_conf {:.4}, l_rec {:?} (checkpoint written)",
                t.episode(),
                s.mean_r_conf,
                s.mean_l_rec
            );
        }
        summaries.push(s);
        Ok(())
    })?;
    save_checkpoint(&trainer.checkpoint(&hash, meta(cfg, &mname)), &policy_path)?;
    let mut manifest = RunManifest::new("train", serde_json::to_value(cfg)?, cfg.train.seed, &hash);
    manifest.inputs = data_manifest_ref(data_dir);
    // Sibling manifests are named relative to the model directory.
    for stage in ["pretrain-lm", "pretrain-classifier"] {
        manifest.inputs.push(RunManifest::file_name(stage));
    }
    manifest.outputs.push(POLICY_FILE.into());
    if opts.log_episodes {
        manifest.outputs.push(TRAIN_LOG_FILE.into());
    }
    let tail = summaries.len().saturating_sub(10);
    manifest.summary = serde_json::json!({
        "episodes": trainer.episode(),
        "final_windows": &summaries[tail..],
    });
    manifest.save(&model_dir.join(mname))?;
    Ok(manifest)
}

/// Paths of every artifact a complete model directory holds.
pub fn model_files(model_dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = [
        VOCAB_FILE,
        CLASSIFIER_FILE,
        TERMINATION_FILE,
        EVAL_CLASSIFIER_FILE,
        POLICY_FILE,
    ]
    .iter()
    .map(|f| model_dir.join(f))
    .collect();
    for s in Style::ALL {
        v.push(model_dir.join(lm_file(s)));
    }
    v
}
