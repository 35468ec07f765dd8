//! Single-option episode loop: sample a position, sample an operator,
//! edit, reward, reconstruct, and update.
//!
//! Each episode is a pure function of the frozen parameters and an RNG
//! stream derived from its index, so episodes inside one accumulation
//! window can run in parallel. Their gradients are reduced in episode
//! order and applied once per window, which keeps runs bit-reproducible
//! regardless of thread count.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{clip_grad_norm, Adam, AdamConfig, Graph, Grads, Tensor};
use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::corpus::{Direction, Sentence, Style, TokenId};
use crate::edit::{apply_tokens, reconstruction_targets, valid_operators_for_len, EditAction, OperatorKind, ReconstructionTarget};
use crate::error::{Error, Result};
use crate::lm::StyleLm;
use crate::operator::{sample_uniform_operator, OperatorAgent};
use crate::pointer::PointerNet;

pub const POINTER: &str = "pointer";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    pub r_lm: Option<f64>,
    pub r_conf: f64,
    pub r_rec: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub l_cls: Option<f64>,
    pub l_rec: Option<f64>,
}

/// Everything that happened in one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub direction: Direction,
    pub original: Vec<TokenId>,
    pub position: usize,
    pub operator: OperatorKind,
    pub word: Option<TokenId>,
    pub edited: Vec<TokenId>,
    pub rewards: Rewards,
    pub losses: Losses,
    pub reconstruction: Option<ReconstructionTarget>,
    /// Gradient norm per component that received a gradient.
    pub grad_norms: BTreeMap<String, f64>,
}

/// Episode result: the record plus gradients to be reduced.
#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub pointer_grads: Grads,
    pub generator_grads: Vec<(usize, Grads)>,
}

/// Forced choices for instrumented episodes.
#[derive(Clone, Debug, Default)]
pub struct EpisodeOverrides {
    pub sentence: Option<Sentence>,
    pub direction: Option<Direction>,
    pub position: Option<usize>,
    pub operator: Option<OperatorKind>,
}

/// Confidence reward: `lambda * (p(target | edited) - p(target | original))`.
/// Identical inputs give exactly zero.
pub fn conf_reward(pointer: &PointerNet, original: &[TokenId], edited: &[TokenId], target: Style, lambda: f64) -> f64 {
    if original == edited {
        return 0.0;
    }
    let after = pointer.classify(edited)[target.index()];
    let before = pointer.classify(original)[target.index()];
    conf_reward_from(after, before, lambda)
}

pub fn conf_reward_from(p_edited: f64, p_original: f64, lambda: f64) -> f64 {
    lambda * (p_edited - p_original)
}

/// Language-model reward for a generated word at `position` of `edited`.
pub fn lm_reward(lm: &StyleLm, edited: &[TokenId], position: usize, lambda: f64) -> Result<f64> {
    Ok(lambda * lm.word_prob(edited, position)?)
}

/// Reconstruction reward: `-lambda * NLL` of the gold word under the
/// reverse-direction generator.
pub fn rec_reward(
    operators: &OperatorAgent,
    edited: &[TokenId],
    target: &ReconstructionTarget,
    reverse: Direction,
    lambda: f64,
) -> Result<f64> {
    let gen = operators.generator(reverse, target.op_prime)?;
    Ok(-lambda * gen.nll(edited, target.position_prime, target.gold_word))
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Baselines {
    pointer: f64,
    generators: [f64; OperatorAgent::NUM_GENERATORS],
}

pub struct Trainer<'a> {
    cfg: TrainConfig,
    lms: &'a [StyleLm; 2],
    data: &'a [Vec<Sentence>; 2],
    pointer: PointerNet,
    operators: OperatorAgent,
    pointer_opt: Adam,
    generator_opts: Vec<Adam>,
    baselines: Baselines,
    episode: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: TrainConfig,
        lms: &'a [StyleLm; 2],
        data: &'a [Vec<Sentence>; 2],
        pointer: PointerNet,
        operators: OperatorAgent,
    ) -> Result<Self> {
        cfg.validate()?;
        for style in Style::ALL {
            if data[style.index()].is_empty() {
                return Err(Error::Config(format!("no {style} training sentences")));
            }
        }
        let pointer_opt = Adam::new(AdamConfig::with_lr(cfg.pointer_lr), pointer.params());
        let generator_opts = operators
            .generators()
            .iter()
            .map(|g| Adam::new(AdamConfig::with_lr(cfg.generator_lr), g.params()))
            .collect();
        Ok(Trainer {
            cfg,
            lms,
            data,
            pointer,
            operators,
            pointer_opt,
            generator_opts,
            baselines: Baselines::default(),
            episode: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn pointer(&self) -> &PointerNet {
        &self.pointer
    }

    pub fn operators(&self) -> &OperatorAgent {
        &self.operators
    }

    /// Number of episodes already applied.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn is_done(&self) -> bool {
        self.episode >= self.cfg.iterations
    }

    pub fn into_models(self) -> (PointerNet, OperatorAgent) {
        (self.pointer, self.operators)
    }

    /// Directions strictly alternate, starting with s1 to s2.
    pub fn direction_of(episode: u64) -> Direction {
        if episode.is_multiple_of(2) {
            Direction::S1ToS2
        } else {
            Direction::S2ToS1
        }
    }

    fn episode_rng(&self, episode: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(episode);
        rng
    }

    pub fn run_episode(&self, episode: u64) -> Result<EpisodeOutcome> {
        self.run_episode_with(episode, &EpisodeOverrides::default())
    }

    /// Runs one episode on the current (frozen) parameters.
    pub fn run_episode_with(&self, episode: u64, ov: &EpisodeOverrides) -> Result<EpisodeOutcome> {
        let cfg = &self.cfg;
        let mut rng = self.episode_rng(episode);
        let dir = ov
            .direction
            .or_else(|| ov.sentence.as_ref().map(|s| Direction::from_source(s.style())))
            .unwrap_or_else(|| Self::direction_of(episode));
        let (src, tgt) = (dir.source(), dir.target());
        let x: Vec<TokenId> = match &ov.sentence {
            Some(s) => s.tokens().to_vec(),
            None => {
                let pool = &self.data[src.index()];
                pool[rng.gen_range(0..pool.len())].tokens().to_vec()
            }
        };
        let other = {
            let pool = &self.data[tgt.index()];
            pool[rng.gen_range(0..pool.len())].tokens().to_vec()
        };

        // Pointer: position and the classifier's view of the original.
        let mut g = Graph::new(self.pointer.params());
        let fx = self.pointer.forward(&mut g, &x);
        let mu = g.value(fx.mu).to_vec();
        let p_orig: Vec<f64> = g.value(fx.class_logp).iter().map(|v| v.exp()).collect();
        let position = match ov.position {
            Some(p) if p < x.len() => p,
            Some(p) => return Err(Error::IndexOutOfRange { position: p, len: x.len() }),
            None => crate::pointer::PositionDistribution::new(mu)
                .sample(&mut rng)
                .expect("policy has mass"),
        };

        // Operator: uniform over the valid, allowed ones.
        let valid: Vec<OperatorKind> = valid_operators_for_len(x.len(), position)?
            .into_iter()
            .filter(|op| cfg.operators_allowed.contains(op))
            .collect();
        let op = match ov.operator {
            Some(op) if valid.contains(&op) || (valid.is_empty() && op == OperatorKind::Skip) => op,
            Some(op) => {
                return Err(Error::InvalidOperator { op, position, len: x.len() });
            }
            None if valid.is_empty() => OperatorKind::Skip,
            None => sample_uniform_operator(&valid, &mut rng),
        };
        let word = if op.is_parameterized() {
            Some(self.operators.generator(dir, op)?.sample(&x, position, &mut rng))
        } else {
            None
        };
        let action = EditAction::new(op, position, word)?;
        let edited = apply_tokens(&x, op, position, word)?;

        // Rewards.
        let r_conf = if edited == x {
            0.0
        } else {
            let p_edit = self.pointer.classify(&edited)[tgt.index()];
            conf_reward_from(p_edit, p_orig[tgt.index()], cfg.lambda_conf)
        };
        let r_lm = match action.generated_position() {
            Some(p) => Some(lm_reward(&self.lms[tgt.index()], &edited, p, cfg.lambda_lm)?),
            None => None,
        };

        let mut grad_norms = BTreeMap::new();
        let mut losses = Losses::default();

        // Pointer update: classification loss plus REINFORCE on the position.
        let advantage = if cfg.baseline_enabled {
            r_conf - self.baselines.pointer
        } else {
            r_conf
        };
        let mut pointer_grads = Grads::zeros_like(self.pointer.params());
        let lp = g.pick(fx.log_mu, position);
        if cfg.joint_classification {
            let cls = g.pick(fx.class_logp, src.index());
            let pg = g.scale(lp, -advantage);
            let nll = g.scale(cls, -0.5);
            let total = g.add(pg, nll);
            g.backward(total, &mut pointer_grads);
            let mut g2 = Graph::new(self.pointer.params());
            let fy = self.pointer.forward(&mut g2, &other);
            let cls_y = g2.pick(fy.class_logp, tgt.index());
            g2.backward_scaled(cls_y, -0.5, &mut pointer_grads);
            losses.l_cls = Some(-0.5 * (g.scalar(cls) + g2.scalar(cls_y)));
        } else {
            g.backward_scaled(lp, -advantage, &mut pointer_grads);
        }
        grad_norms.insert(POINTER.to_string(), pointer_grads.norm());

        // Reconstruction of the original through the reverse direction.
        let mut generator_grads = Vec::new();
        let mut reconstruction = None;
        let mut r_rec = None;
        if !cfg.disable_reconstruction && matches!(op, OperatorKind::Rep | OperatorKind::DC | OperatorKind::DF | OperatorKind::DB) {
            let original = Sentence::new(x.clone(), src)?;
            let rev = dir.reverse();
            let targets: Vec<ReconstructionTarget> = reconstruction_targets(&action, &original)?
                .into_iter()
                .filter(|t| {
                    self.operators
                        .generator(rev, t.op_prime)
                        .is_ok_and(|g| g.can_generate(t.gold_word))
                })
                .collect();
            if let Some(t) = targets.choose(&mut rng).copied() {
                let k = OperatorAgent::index(rev, t.op_prime)?;
                let (grads, nll) = self.operators.generators()[k].nll_grads(&edited, t.position_prime, t.gold_word);
                grad_norms.insert(OperatorAgent::name(k), grads.norm());
                generator_grads.push((k, grads));
                losses.l_rec = Some(nll);
                if op == OperatorKind::Rep {
                    r_rec = Some(-cfg.lambda_rec * nll);
                }
                reconstruction = Some(t);
            }
        }

        // Word generator update for parameterized operators.
        if let Some(w) = word {
            let k = OperatorAgent::index(dir, op)?;
            let reward = r_lm.unwrap_or(0.0) + r_conf + r_rec.unwrap_or(0.0);
            let adv = if cfg.baseline_enabled {
                reward - self.baselines.generators[k]
            } else {
                reward
            };
            let grads = self.operators.generators()[k].policy_gradient(&x, position, w, adv);
            grad_norms.insert(OperatorAgent::name(k), grads.norm());
            generator_grads.push((k, grads));
        }

        let record = EpisodeRecord {
            episode,
            direction: dir,
            original: x,
            position,
            operator: op,
            word,
            edited,
            rewards: Rewards { r_lm, r_conf, r_rec },
            losses,
            reconstruction,
            grad_norms,
        };
        check_finite(&record)?;
        Ok(EpisodeOutcome {
            record,
            pointer_grads,
            generator_grads,
        })
    }

    /// Reduces episode gradients in order and takes one optimizer step per
    /// component that received any gradient. Untouched components keep
    /// their parameters and optimizer state.
    pub fn apply_outcomes(&mut self, outcomes: &[EpisodeOutcome]) {
        if outcomes.is_empty() {
            return;
        }
        let n = outcomes.len() as f64;
        let mut ptr = Grads::zeros_like(self.pointer.params());
        let mut gens: Vec<Option<Grads>> = vec![None; OperatorAgent::NUM_GENERATORS];
        let decay = self.cfg.baseline_decay;
        for o in outcomes {
            ptr.add_assign(&o.pointer_grads);
            for (k, gr) in &o.generator_grads {
                gens[*k]
                    .get_or_insert_with(|| Grads::zeros_like(self.operators.generators()[*k].params()))
                    .add_assign(gr);
            }
            let r = &o.record.rewards;
            self.baselines.pointer = decay * self.baselines.pointer + (1.0 - decay) * r.r_conf;
            if let (Some(_), Ok(k)) = (o.record.word, OperatorAgent::index(o.record.direction, o.record.operator)) {
                let total = r.r_lm.unwrap_or(0.0) + r.r_conf + r.r_rec.unwrap_or(0.0);
                self.baselines.generators[k] = decay * self.baselines.generators[k] + (1.0 - decay) * total;
            }
        }
        ptr.scale(1.0 / n);
        clip_grad_norm(&mut ptr, self.cfg.clip);
        self.pointer_opt.step(self.pointer.params_mut(), &ptr);
        for (k, gr) in gens.into_iter().enumerate() {
            if let Some(mut gr) = gr {
                gr.scale(1.0 / n);
                clip_grad_norm(&mut gr, self.cfg.clip);
                let params = self.operators.generators_mut()[k].params_mut();
                self.generator_opts[k].step(params, &gr);
            }
        }
        self.episode += outcomes.len() as u64;
    }

    /// Runs the next accumulation window. Returns its records.
    pub fn step_window(&mut self) -> Result<Vec<EpisodeRecord>> {
        use rayon::prelude::*;
        let start = self.episode;
        let end = (start + self.cfg.accumulate as u64).min(self.cfg.iterations);
        if start >= end {
            return Ok(Vec::new());
        }
        let outcomes: Vec<EpisodeOutcome> = (start..end)
            .into_par_iter()
            .map(|k| self.run_episode(k))
            .collect::<Result<_>>()?;
        self.apply_outcomes(&outcomes);
        if !self.pointer.params().all_finite()
            || !self.operators.generators().iter().all(|g| g.params().all_finite())
        {
            return Err(Error::Divergence {
                episode: end,
                detail: "parameters became non-finite".into(),
            });
        }
        Ok(outcomes.into_iter().map(|o| o.record).collect())
    }

    /// Runs all remaining episodes. `on_window` sees each window's records
    /// and may checkpoint; it runs after the window's update.
    pub fn train(&mut self, mut on_window: impl FnMut(&Self, &[EpisodeRecord]) -> Result<()>) -> Result<()> {
        while !self.is_done() {
            let records = self.step_window()?;
            on_window(self, &records)?;
        }
        Ok(())
    }

    /// Full training state: parameters, optimizer moments, baselines and
    /// the episode counter.
    pub fn checkpoint(&self, vocab_hash: &str, meta: serde_json::Value) -> Checkpoint {
        let mut ck = Checkpoint::new("policy", vocab_hash, meta);
        ck.extend(self.pointer.params().export_named("ptr."));
        ck.extend(self.operators.export());
        ck.extend(self.pointer_opt.export("opt.ptr.", self.pointer.params()));
        for (k, (opt, g)) in self.generator_opts.iter().zip(self.operators.generators()).enumerate() {
            ck.extend(opt.export(&format!("opt.gen.{}.", OperatorAgent::name(k)), g.params()));
        }
        let mut b = vec![self.baselines.pointer];
        b.extend(self.baselines.generators);
        ck.extend([
            ("state.baselines".to_string(), Tensor { rows: b.len(), cols: 1, data: b }),
            (
                "state.episode".to_string(),
                Tensor { rows: 1, cols: 1, data: vec![self.episode as f64] },
            ),
        ]);
        ck
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        let map = ck.map();
        self.pointer.load(&map, "ptr.")?;
        self.operators.load(&map)?;
        self.pointer_opt.import("opt.ptr.", self.pointer.params(), &map)?;
        for (k, opt) in self.generator_opts.iter_mut().enumerate() {
            opt.import(
                &format!("opt.gen.{}.", OperatorAgent::name(k)),
                self.operators.generators()[k].params(),
                &map,
            )?;
        }
        let get = |name: &str| {
            map.get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
        };
        let b = &get("state.baselines")?.data;
        if b.len() != 1 + OperatorAgent::NUM_GENERATORS {
            return Err(Error::Checkpoint("baseline array has the wrong length".into()));
        }
        self.baselines.pointer = b[0];
        self.baselines.generators.copy_from_slice(&b[1..]);
        self.episode = get("state.episode")?.data[0] as u64;
        Ok(())
    }
}

/// Policy parameters from a policy checkpoint, without optimizer state.
pub fn load_policy(ck: &Checkpoint, pointer: &mut PointerNet, operators: &mut OperatorAgent) -> Result<()> {
    let map: HashMap<String, Tensor> = ck.map();
    pointer.load(&map, "ptr.")?;
    operators.load(&map)
}

fn check_finite(r: &EpisodeRecord) -> Result<()> {
    let values = [
        Some(r.rewards.r_conf),
        r.rewards.r_lm,
        r.rewards.r_rec,
        r.losses.l_cls,
        r.losses.l_rec,
    ];
    let bad_norm = r.grad_norms.values().any(|v| !v.is_finite());
    if values.iter().flatten().any(|v| !v.is_finite()) || bad_norm {
        return Err(Error::Divergence {
            episode: r.episode,
            detail: serde_json::to_string(r).unwrap_or_else(|_| format!("{r:?}")),
        });
    }
    Ok(())
}

/// Mean rewards and losses over a set of records, for progress logs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub episodes: usize,
    pub mean_r_conf: f64,
    pub mean_r_lm: Option<f64>,
    pub mean_r_rec: Option<f64>,
    pub mean_l_cls: Option<f64>,
    pub mean_l_rec: Option<f64>,
}

pub fn summarize(records: &[EpisodeRecord]) -> WindowSummary {
    fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        (n > 0).then(|| s / n as f64)
    }
    WindowSummary {
        episodes: records.len(),
        mean_r_conf: mean(records.iter().map(|r| r.rewards.r_conf)).unwrap_or(0.0),
        mean_r_lm: mean(records.iter().filter_map(|r| r.rewards.r_lm)),
        mean_r_rec: mean(records.iter().filter_map(|r| r.rewards.r_rec)),
        mean_l_cls: mean(records.iter().filter_map(|r| r.losses.l_cls)),
        mean_l_rec: mean(records.iter().filter_map(|r| r.losses.l_rec)),
    }
}
