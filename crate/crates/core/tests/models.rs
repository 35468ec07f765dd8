//! Pretraining experiments for the language models and classifiers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use styledit::config::{ClassifierConfig, Config, EncoderConfig, EvalClassifierConfig, LmConfig};
use styledit::corpus::{Style, SyntheticSpec, Vocab};
use styledit::evaluator::textcnn::{accuracy as cnn_accuracy, train_labeled};
use styledit::lm::train_lm;
use styledit::pipeline::prepare_synthetic;
use styledit::pointer::{accuracy, train_classifier, unk_noise, PointerNet};
use styledit::trainer::lm_reward;

fn lm_cfg() -> LmConfig {
    LmConfig {
        emb_dim: 16,
        hidden: 24,
        lr: 1e-2,
        max_epochs: 10,
        ..LmConfig::default()
    }
}

#[test]
fn one_sentence_corpus_is_memorized() {
    let words: Vec<String> = "the soup was cold and the bread was stale .".split(' ').map(String::from).collect();
    let unique: std::collections::BTreeSet<&String> = words.iter().collect();
    let vocab = Vocab::from_words(&unique.into_iter().collect::<Vec<_>>()).unwrap();
    let s = vocab.encode(&words, Style::S2).unwrap();
    let train = vec![s.clone(); 64];
    let cfg = LmConfig {
        lr: 2e-2,
        max_epochs: 80,
        patience: 80,
        ..lm_cfg()
    };
    let (lm, report) = train_lm(Style::S2, &vocab, &train, &train, &cfg).unwrap();
    let (pf, pb) = lm.perplexity(&train);
    assert!(pf < 1.05 && pb < 1.05, "perplexity {pf} / {pb}; {report:?}");
    for i in 0..s.len() {
        let p = lm.word_prob(s.tokens(), i).unwrap();
        assert!(p >= 0.99, "word {i}: {p}");
        let r = lm_reward(&lm, s.tokens(), i, 0.5).unwrap();
        assert!((r - 0.5).abs() < 0.005);
    }
}

#[test]
fn synthetic_language_models_learn_the_templates() {
    let data = prepare_synthetic(&SyntheticSpec::default(), 400, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for style in Style::ALL {
        let e = &data.encoded[style.index()];
        let (lm, report) = train_lm(style, &data.vocab, &e.train, &e.dev, &lm_cfg()).unwrap();
        let (pf, pb) = lm.perplexity(&e.dev);
        let uniform = data.vocab.len() as f64;
        assert!(pf < uniform && pb < uniform);
        assert!(pf <= 15.0 && pb <= 15.0, "{style}: dev perplexity {pf} / {pb}");
        assert!(report.dev_perplexity.len() <= 10);
        // In-distribution sentences outscore their shuffles.
        let mut wins = 0;
        for s in e.dev.iter().take(40) {
            let mut shuffled = s.tokens().to_vec();
            while shuffled == s.tokens() {
                shuffled.shuffle(&mut rng);
            }
            if lm.sentence_score(s.tokens()) > lm.sentence_score(&shuffled) {
                wins += 1;
            }
        }
        assert!(wins >= 38, "{style}: only {wins}/40 originals beat their shuffles");
    }
}

#[test]
fn pointer_classifier_separates_the_synthetic_styles() {
    let data = prepare_synthetic(&SyntheticSpec::default(), 400, 1).unwrap();
    let cfg = Config::compact();
    let mut net = PointerNet::new(data.vocab.len(), &cfg.encoder, &mut ChaCha8Rng::seed_from_u64(1));
    let report = train_classifier(&mut net, &data.joint("train"), &data.joint("dev"), &cfg.classifier, 0.0).unwrap();
    assert!(report.final_dev_accuracy() >= 0.95, "{report:?}");
    assert!(accuracy(&net, &data.joint("test")) >= 0.95);
    assert!(report.train_loss[0] > *report.train_loss.last().unwrap() || report.epochs == 1);
    assert!(report.train_loss[0] < std::f64::consts::LN_2 + 0.05);
}

#[test]
fn unk_noised_classifier_tolerates_masked_words() {
    let data = prepare_synthetic(&SyntheticSpec::default(), 400, 1).unwrap();
    let cfg = ClassifierConfig {
        lr: 5e-3,
        ..ClassifierConfig::default()
    };
    let enc = EncoderConfig {
        emb_dim: 16,
        hidden: 16,
        attn_dim: 16,
    };
    let mut plain = PointerNet::new(data.vocab.len(), &enc, &mut ChaCha8Rng::seed_from_u64(2));
    let mut noisy = plain.clone();
    train_classifier(&mut plain, &data.joint("train"), &data.joint("dev"), &cfg, 0.0).unwrap();
    train_classifier(&mut noisy, &data.joint("train"), &data.joint("dev"), &cfg, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let test = data.joint("test");
    let noisy_inputs: Vec<_> = test.iter().map(|s| (unk_noise(s.tokens(), 0.3, &mut rng), s.style())).collect();
    let acc = |net: &PointerNet| {
        noisy_inputs
            .iter()
            .filter(|(t, s)| {
                let p = net.classify(t);
                (p[1] > p[0]) == (*s == Style::S2)
            })
            .count() as f64
            / noisy_inputs.len() as f64
    };
    assert!(acc(&noisy) >= 0.8, "noised accuracy {}", acc(&noisy));
    assert!(acc(&noisy) + 0.02 >= acc(&plain));
    // With nothing left to read, the noised classifier stays uncommitted.
    let all_unk = vec![Vocab::UNK_ID; 8];
    let p = noisy.classify(&all_unk);
    assert!((p[0] - 0.5).abs() < 0.35, "all-unk prediction {p:?}");
}

#[test]
fn eval_classifier_is_accurate_and_label_shuffle_control_is_not() {
    let data = prepare_synthetic(&SyntheticSpec::default(), 400, 1).unwrap();
    let cfg = EvalClassifierConfig {
        emb_dim: 16,
        filters: 12,
        lr: 5e-3,
        max_epochs: 6,
        ..EvalClassifierConfig::default()
    };
    let lab = |split: &str| -> Vec<(Vec<u32>, Style)> {
        data.joint(split).iter().map(|s| (s.tokens().to_vec(), s.style())).collect()
    };
    let (train, dev, test) = (lab("train"), lab("dev"), lab("test"));
    let (cnn, _) = train_labeled(data.vocab.len(), &train, &dev, &cfg).unwrap();
    assert!(cnn_accuracy(&cnn, &test) >= 0.95);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut labels: Vec<Style> = train.iter().map(|x| x.1).collect();
    labels.shuffle(&mut rng);
    let shuffled: Vec<_> = train.iter().zip(labels).map(|((t, _), s)| (t.clone(), s)).collect();
    let control = EvalClassifierConfig {
        target_dev_acc: 1.1,
        max_epochs: 3,
        ..cfg
    };
    let (cnn, _) = train_labeled(data.vocab.len(), &shuffled, &dev, &control).unwrap();
    let a = cnn_accuracy(&cnn, &test);
    assert!((0.3..=0.7).contains(&a), "shuffled-label accuracy {a}");
}
