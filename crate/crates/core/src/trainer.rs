//! Optimization loop: full-graph forward, minibatched objectives, Adam,
//! early stopping on validation accuracy and best-epoch restoration.
//!
//! An epoch is one shuffled pass over the entities that carry a training
//! label on either side, in batches of `batch_size`. Step `s` of an epoch
//! also takes the `s`-th chunk (cycling) of the shuffled consistency set and
//! of the shuffled node list, which serve as the L2 entities and the L3
//! anchors of that step.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;

use crate::analysis::{metrics, AnalysisError, MetricsReport};
use crate::hin::{EntityId, Hin, RelationKind};
use crate::ingest::{random_hin, ExpertLabel, Part, Side, SplitAssignment};
use crate::model::{
    encode_var, head_logits_var, save_checkpoint, stance_heads, Activation, GraphStructure,
    ModelConfig, ModelError, ModelParams, Variant,
};
use crate::numkit::{
    adam_step, grad_check, AdamState, GradCheckReport, Matrix, NumError, Tape, Var,
};
use crate::objectives::{
    consistency_loss_var, echo_loss_pairs_var, echo_loss_var, expert_loss_var, total_loss_var,
    training_log_row, EchoPairs, LossParts, LossReport, LossWeights, ObjectiveError,
    TRAINING_LOG_HEADER,
};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Config(String),
    #[error("{side} side has no {part} labels")]
    EmptySide { side: Side, part: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub layers: usize,
    pub hidden: usize,
    pub seed: u64,
    pub activation: Activation,
    pub variant: Variant,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Take the consistency set from every split instead of training only.
    pub widen_consistency: bool,
    /// Fraction of each side's training labels kept.
    pub expert_fraction: f64,
    /// Where best-epoch checkpoints go, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            max_epochs: 100,
            batch_size: 64,
            weights: LossWeights::table8(),
            layers: 2,
            hidden: 512,
            seed: 0,
            activation: Activation::default(),
            variant: Variant::Gated,
            patience: 10,
            widen_consistency: false,
            expert_fraction: 1.0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config(
                "max_epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.expert_fraction > 0.0 && self.expert_fraction <= 1.0) {
            return Err(TrainError::Config(format!(
                "expert_fraction must be in (0, 1], got {}",
                self.expert_fraction
            )));
        }
        self.weights.validate()?;
        Ok(())
    }

    pub fn model_config(&self, d_in: usize) -> ModelConfig {
        ModelConfig {
            d_in,
            hidden: self.hidden,
            layers: self.layers,
            activation: self.activation,
            variant: self.variant,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the step reports.
    pub loss: LossReport,
    pub val: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the restored epoch.
    pub best: usize,
    /// `(epoch, step, report)` for every optimizer step.
    pub steps: Vec<(usize, usize, LossReport)>,
}

impl TrainHistory {
    pub fn best_epoch(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best)
    }

    /// `epoch,L1,L2,L3,reg,total,val_acc_liberal,val_acc_conservative,val_acc`
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("epoch,L1,L2,L3,reg,total,val_acc_liberal,val_acc_conservative,val_acc\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                e.epoch,
                e.loss.l1,
                e.loss.l2,
                e.loss.l3,
                e.loss.reg,
                e.loss.total,
                e.val.liberal.accuracy,
                e.val.conservative.accuracy,
                e.val.combined.accuracy
            );
        }
        s
    }

    /// Per-step training log.
    pub fn log_csv(&self) -> String {
        let mut s = format!("{TRAINING_LOG_HEADER}\n");
        for (e, st, r) in &self.steps {
            s.push_str(&training_log_row(*e, *st, r));
            s.push('\n');
        }
        s
    }
}

/// `part,side,accuracy,macro_f1,micro_f1` rows for one report.
pub fn metrics_csv(rows: &[(&str, &MetricsReport)]) -> String {
    let mut s = String::from("part,side,accuracy,macro_f1,micro_f1\n");
    for (part, r) in rows {
        for (side, m) in [
            ("liberal", r.liberal),
            ("conservative", r.conservative),
            ("combined", r.combined),
        ] {
            let _ = writeln!(
                s,
                "{part},{side},{},{},{}",
                m.accuracy, m.macro_f1, m.micro_f1
            );
        }
    }
    s
}

fn part_name(part: Part) -> &'static str {
    match part {
        Part::Train => "train",
        Part::Val => "val",
        Part::Test => "test",
    }
}

/// Labels of one split part, liberal side first.
pub fn part_labels(
    labels: &[ExpertLabel],
    splits: &SplitAssignment,
    part: Part,
) -> Vec<ExpertLabel> {
    Side::BOTH
        .into_iter()
        .flat_map(|side| {
            splits
                .labels(labels, side, part)
                .copied()
                .collect::<Vec<_>>()
        })
        .collect()
}

fn subsample(labels: Vec<ExpertLabel>, fraction: f64, seed: u64) -> Vec<ExpertLabel> {
    if fraction >= 1.0 {
        return labels;
    }
    let mut out = Vec::new();
    for (k, side) in Side::BOTH.into_iter().enumerate() {
        let mut own: Vec<ExpertLabel> = labels.iter().filter(|l| l.side == side).copied().collect();
        own.shuffle(&mut rng::stream(rng::derive(seed, 0xF4AC), k as u64));
        let keep = ((fraction * own.len() as f64).round() as usize)
            .max(1)
            .min(own.len());
        out.extend_from_slice(&own[..keep]);
    }
    out
}

/// Metrics of argmax predictions against `labels` (both sides).
pub fn evaluate_labels(
    params: &ModelParams,
    hin: &Hin,
    labels: &[ExpertLabel],
) -> Result<MetricsReport, TrainError> {
    let x = crate::model::encode(hin, params)?.x_final;
    let (l, c) = stance_heads(&x, params)?;
    score(&l, &c, labels)
}

fn score(l: &Matrix, c: &Matrix, labels: &[ExpertLabel]) -> Result<MetricsReport, TrainError> {
    let mut per_side = Vec::new();
    for (side, probs) in [(Side::Liberal, l), (Side::Conservative, c)] {
        let (preds, golds): (Vec<usize>, Vec<usize>) = labels
            .iter()
            .filter(|lab| lab.side == side)
            .map(|lab| (probs.row_argmax(lab.entity), lab.class))
            .unzip();
        if golds.is_empty() {
            return Err(TrainError::EmptySide {
                side,
                part: "evaluation",
            });
        }
        per_side.push(metrics(&preds, &golds)?);
    }
    Ok(MetricsReport::new(per_side[0], per_side[1]))
}

/// Per-side and combined metrics on one split part.
pub fn evaluate(
    params: &ModelParams,
    hin: &Hin,
    labels: &[ExpertLabel],
    splits: &SplitAssignment,
    part: Part,
) -> Result<MetricsReport, TrainError> {
    for side in Side::BOTH {
        if splits.side(side).part(part).is_empty() {
            return Err(TrainError::EmptySide {
                side,
                part: part_name(part),
            });
        }
    }
    evaluate_labels(params, hin, &part_labels(labels, splits, part))
}

fn chunk<T: Copy>(items: &[T], size: usize, step: usize) -> Vec<T> {
    if items.is_empty() {
        return Vec::new();
    }
    let n_chunks = items.len().div_ceil(size);
    let k = step % n_chunks;
    items[k * size..((k + 1) * size).min(items.len())].to_vec()
}

fn entities_on_both_sides(labels: &[ExpertLabel]) -> Vec<EntityId> {
    let side = |s: Side| {
        labels
            .iter()
            .filter(|l| l.side == s)
            .map(|l| l.entity)
            .collect::<BTreeSet<_>>()
    };
    side(Side::Liberal)
        .intersection(&side(Side::Conservative))
        .copied()
        .collect()
}

fn io_err(path: &Path, e: std::io::Error) -> TrainError {
    TrainError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn write_best(dir: &Path, epoch: usize, params: &ModelParams) -> Result<(), TrainError> {
    let name = format!("epoch-{epoch}");
    save_checkpoint(params, &dir.join(&name))?;
    let marker = dir.join("best");
    fs::write(&marker, format!("{name}\n")).map_err(|e| io_err(&marker, e))
}

/// Trains from a fresh initialization seeded by `config.seed`.
pub fn train(
    hin: &Hin,
    labels: &[ExpertLabel],
    splits: &SplitAssignment,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory), TrainError> {
    let init = ModelParams::init(
        config.model_config(hin.feature_dim()),
        rng::derive(config.seed, 0x1A1),
    )?;
    train_from(init, hin, labels, splits, config)
}

/// Trains starting from `params`.
pub fn train_from(
    mut params: ModelParams,
    hin: &Hin,
    labels: &[ExpertLabel],
    splits: &SplitAssignment,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory), TrainError> {
    config.validate()?;
    if hin.feature_dim() != params.config.d_in {
        return Err(ModelError::FeatureWidth {
            expected: params.config.d_in,
            got: hin.feature_dim(),
        }
        .into());
    }
    for side in Side::BOTH {
        for part in [Part::Train, Part::Val] {
            if splits.side(side).part(part).is_empty() {
                return Err(TrainError::EmptySide {
                    side,
                    part: part_name(part),
                });
            }
        }
    }
    let seed = config.seed;
    let train_labels = subsample(
        part_labels(labels, splits, Part::Train),
        config.expert_fraction,
        seed,
    );
    let val_labels = part_labels(labels, splits, Part::Val);
    let train_entities: Vec<EntityId> = train_labels
        .iter()
        .map(|l| l.entity)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let consistency_set = if config.widen_consistency {
        entities_on_both_sides(labels)
    } else {
        entities_on_both_sides(&train_labels)
    };
    let all_nodes: Vec<EntityId> = (0..hin.node_count()).collect();
    let graph = GraphStructure::new(hin);
    let features = hin.features().clone();
    let w = config.weights;

    let mut adam = AdamState::default();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let order_seed = rng::derive(seed, 0x0DE5);

    for epoch in 1..=config.max_epochs {
        let shuffled = |items: &[EntityId], tag: u64| {
            let mut v = items.to_vec();
            v.shuffle(&mut rng::stream(rng::derive(order_seed, tag), epoch as u64));
            v
        };
        let batch_order = shuffled(&train_entities, 1);
        let l2_order = shuffled(&consistency_set, 2);
        let anchor_order = shuffled(&all_nodes, 3);
        let n_steps = batch_order.len().div_ceil(config.batch_size);
        let mut sum = LossReport::default();

        for step in 0..n_steps {
            let batch: BTreeSet<EntityId> = chunk(&batch_order, config.batch_size, step)
                .into_iter()
                .collect();
            let batch_labels: Vec<ExpertLabel> = train_labels
                .iter()
                .filter(|l| batch.contains(&l.entity))
                .copied()
                .collect();
            let l2_entities = chunk(&l2_order, config.batch_size, step);
            let anchors = chunk(&anchor_order, config.batch_size, step);

            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let f = tape.constant(features.clone());
            let enc = encode_var(&mut tape, &bound, &graph, f)?;
            let (ll, cl) = head_logits_var(&mut tape, &bound, enc.x_final)?;
            let log_l = tape.log_softmax(ll)?;
            let log_c = tape.log_softmax(cl)?;
            let l1 = expert_loss_var(&mut tape, log_l, log_c, &batch_labels)?;
            let l2 = consistency_loss_var(&mut tape, log_l, log_c, &l2_entities)?;
            let l3 = echo_loss_var(
                &mut tape,
                enc.x_final,
                hin,
                &anchors,
                w.q,
                w.negatives,
                epoch,
                seed,
            )?;
            let (total, report) =
                total_loss_var(&mut tape, LossParts { l1, l2, l3 }, &w, &bound.all)?;
            tape.backward(total)?;

            let grads: Vec<Matrix> = bound
                .all
                .iter()
                .zip(params.named_tensors())
                .map(|(&v, (_, m))| {
                    tape.grad(v)
                        .cloned()
                        .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()))
                })
                .collect();
            drop(tape);
            adam_step(&mut params.tensors_mut(), &grads, &mut adam, config.lr)?;

            history.steps.push((epoch, step, report));
            sum.l1 += report.l1;
            sum.l2 += report.l2;
            sum.l3 += report.l3;
            sum.reg += report.reg;
            sum.total += report.total;
        }

        let k = n_steps.max(1) as f64;
        let loss = LossReport {
            l1: sum.l1 / k,
            l2: sum.l2 / k,
            l3: sum.l3 / k,
            reg: sum.reg / k,
            total: sum.total / k,
        };
        let val = evaluate_labels(&params, hin, &val_labels)?;
        info!(
            "epoch {epoch}: total {:.6} val acc {:.4} (liberal {:.4}, conservative {:.4})",
            loss.total, val.combined.accuracy, val.liberal.accuracy, val.conservative.accuracy
        );
        history.epochs.push(EpochRecord { epoch, loss, val });

        let acc = val.combined.accuracy;
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            history.best = history.epochs.len() - 1;
            if let Some(dir) = &config.checkpoint_dir {
                write_best(dir, epoch, &params)?;
            }
            best = Some((acc, params.clone()));
        } else if epoch - history.epochs[history.best].epoch >= config.patience {
            info!(
                "early stop at epoch {epoch}; best epoch {}",
                history.epochs[history.best].epoch
            );
            break;
        }
    }
    let (_, restored) = best.expect("at least one epoch ran");
    Ok((restored, history))
}

/// Shape of the gradient-check problem: a small random graph and model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSetup {
    pub n_nodes: usize,
    /// The first `relations` kinds of `RelationKind::ALL` get edges.
    pub relations: usize,
    pub d_in: usize,
    pub hidden: usize,
    pub layers: usize,
    pub weights: LossWeights,
    pub activation: Activation,
    pub variant: Variant,
    /// Finite-difference step.
    pub h: f64,
}

impl Default for GradCheckSetup {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            relations: 3,
            d_in: 4,
            hidden: 4,
            layers: 2,
            weights: LossWeights::table8(),
            activation: Activation::default(),
            variant: Variant::Gated,
            h: 1e-5,
        }
    }
}

/// Central differences against backward gradients of the full weighted
/// loss (all three objectives plus the penalty) for every model tensor.
/// Every actor gets a random label on each side and serves as a consistency
/// entity; every node is an echo anchor. Negatives are drawn once so the
/// loss is a fixed function of the parameters.
pub fn gradcheck_full_loss(
    setup: &GradCheckSetup,
    seed: u64,
) -> Result<GradCheckReport, TrainError> {
    use rand::Rng;
    let rels = &RelationKind::ALL[..setup.relations.min(RelationKind::ALL.len())];
    let hin = random_hin(setup.n_nodes, rels, setup.d_in, seed);
    let config = ModelConfig {
        d_in: setup.d_in,
        hidden: setup.hidden,
        layers: setup.layers,
        activation: setup.activation,
        variant: setup.variant,
    };
    let params = ModelParams::init(config, rng::derive(seed, 0x6C))?;
    let actors = hin.actor_ids();
    let mut r = rng::stream(rng::derive(seed, 0x6C), 1);
    let labels: Vec<ExpertLabel> = actors
        .iter()
        .flat_map(|&entity| Side::BOTH.map(|side| (entity, side)))
        .map(|(entity, side)| ExpertLabel {
            entity,
            side,
            class: r.random_range(0..crate::ingest::NUM_CLASSES),
        })
        .collect();
    let anchors: Vec<EntityId> = (0..hin.node_count()).collect();
    let pairs = EchoPairs::build(&hin, &anchors, setup.weights.negatives, 0, seed);
    let graph = GraphStructure::new(&hin);
    let w = setup.weights;
    let tensors: Vec<Matrix> = params
        .named_tensors()
        .into_iter()
        .map(|(_, m)| m.clone())
        .collect();
    let loss = |tape: &mut Tape, vars: &[Var]| -> Result<Var, TrainError> {
        let bound = params.bind_to(vars);
        let f = tape.constant(hin.features().clone());
        let enc = encode_var(tape, &bound, &graph, f)?;
        let (ll, cl) = head_logits_var(tape, &bound, enc.x_final)?;
        let log_l = tape.log_softmax(ll)?;
        let log_c = tape.log_softmax(cl)?;
        let l1 = expert_loss_var(tape, log_l, log_c, &labels)?;
        let l2 = consistency_loss_var(tape, log_l, log_c, &actors)?;
        let l3 = echo_loss_pairs_var(tape, enc.x_final, &pairs, w.q)?;
        let (total, _) = total_loss_var(tape, LossParts { l1, l2, l3 }, &w, vars)?;
        Ok(total)
    };
    grad_check(loss, &tensors, setup.h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{
        labels_from_scores, split_scores, synth_hin, SynthConfig, TermMode, DEFAULT_RATIOS,
    };

    fn fixture(seed: u64) -> (Hin, Vec<ExpertLabel>, SplitAssignment) {
        let g = synth_hin(&SynthConfig {
            n_actors: 60,
            d_in: 8,
            seed,
            ..Default::default()
        });
        let labels = labels_from_scores(&g.scores, TermMode::Collapse).unwrap();
        let splits = split_scores(&labels, DEFAULT_RATIOS, seed).unwrap();
        (g.hin, labels, splits)
    }

    fn small(seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: 8,
            max_epochs: 4,
            batch_size: 16,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_history() {
        let (h, l, s) = fixture(1);
        let (pa, a) = train(&h, &l, &s, &small(3)).unwrap();
        let (pb, b) = train(&h, &l, &s, &small(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(a.to_csv(), b.to_csv());
        let union: BTreeSet<usize> = part_labels(&l, &s, Part::Train)
            .iter()
            .map(|x| x.entity)
            .collect();
        assert_eq!(a.steps.len(), a.epochs.len() * union.len().div_ceil(16));
    }

    #[test]
    fn zero_weights_leave_params_unchanged() {
        let (h, l, s) = fixture(2);
        let cfg = TrainConfig {
            weights: LossWeights {
                lambda1: 0.0,
                lambda2: 0.0,
                lambda3: 0.0,
                lambda4: 0.0,
                ..LossWeights::table8()
            },
            ..small(2)
        };
        let init = ModelParams::init(cfg.model_config(8), 5).unwrap();
        let (p, _) = train_from(init.clone(), &h, &l, &s, &cfg).unwrap();
        assert_eq!(p, init);
    }

    #[test]
    fn pure_shrinkage_decreases_norm() {
        let (h, l, s) = fixture(3);
        let cfg = TrainConfig {
            weights: LossWeights {
                lambda1: 0.0,
                lambda2: 0.0,
                lambda3: 0.0,
                lambda4: 1.0,
                ..LossWeights::table8()
            },
            patience: 100,
            max_epochs: 6,
            ..small(3)
        };
        let (_, hist) = train(&h, &l, &s, &cfg).unwrap();
        // the reg column holds the norm before each step
        let norms: Vec<f64> = hist.steps.iter().map(|(_, _, r)| r.reg).collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn best_epoch_is_max_and_checkpointed() {
        let (h, l, s) = fixture(4);
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            max_epochs: 6,
            ..small(4)
        };
        let (p, hist) = train(&h, &l, &s, &cfg).unwrap();
        let best = hist.best_epoch().unwrap();
        assert!(hist
            .epochs
            .iter()
            .all(|e| e.val.combined.accuracy <= best.val.combined.accuracy));
        let marker = std::fs::read_to_string(dir.path().join("best")).unwrap();
        assert_eq!(marker.trim(), format!("epoch-{}", best.epoch));
        let loaded = crate::model::load_checkpoint(&dir.path().join(marker.trim())).unwrap();
        assert_eq!(loaded, p);
        let val = evaluate(&p, &h, &l, &s, Part::Val).unwrap();
        assert_eq!(val, best.val);
    }

    #[test]
    fn patience_stops_early() {
        let (h, l, s) = fixture(5);
        let cfg = TrainConfig {
            lr: 1e-12,
            patience: 2,
            max_epochs: 50,
            ..small(5)
        };
        let (_, hist) = train(&h, &l, &s, &cfg).unwrap();
        assert!(hist.epochs.len() < 50);
        assert_eq!(hist.epochs.len() - 1 - hist.best, 2);
    }

    #[test]
    fn evaluate_examples() {
        let mut l = Matrix::zeros(4, 5);
        let mut c = Matrix::zeros(4, 5);
        for r in 0..4 {
            l.set(r, r % 5, 1.0);
            c.set(r, 0, 1.0);
        }
        let lab = |entity, side, class| ExpertLabel {
            entity,
            side,
            class,
        };
        let labels = vec![
            lab(0, Side::Liberal, 0),
            lab(1, Side::Liberal, 1),
            lab(0, Side::Conservative, 0),
            lab(1, Side::Conservative, 3),
        ];
        let r = score(&l, &c, &labels).unwrap();
        assert_eq!(r.liberal.accuracy, 1.0);
        assert_eq!(r.conservative.accuracy, 0.5);
        assert!((r.combined.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            score(&l, &c, &labels[..2]),
            Err(TrainError::EmptySide {
                side: Side::Conservative,
                ..
            })
        ));
    }

    #[test]
    fn expert_fraction_subsamples_each_side() {
        let (_, l, s) = fixture(6);
        let all = part_labels(&l, &s, Part::Train);
        let half = subsample(all.clone(), 0.5, 1);
        for side in Side::BOTH {
            let n = all.iter().filter(|x| x.side == side).count();
            let m = half.iter().filter(|x| x.side == side).count();
            assert_eq!(m, ((n as f64) * 0.5).round() as usize);
        }
        assert!(TrainConfig {
            expert_fraction: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn chunks_cycle() {
        let v = [1, 2, 3, 4, 5];
        assert_eq!(chunk(&v, 2, 0), vec![1, 2]);
        assert_eq!(chunk(&v, 2, 2), vec![5]);
        assert_eq!(chunk(&v, 2, 3), vec![1, 2]);
        assert!(chunk::<usize>(&[], 2, 0).is_empty());
    }

    #[test]
    fn full_loss_gradients_match_differences() {
        for seed in 0..3 {
            let r = gradcheck_full_loss(&GradCheckSetup::default(), seed).unwrap();
            assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
            assert!(r.coordinates > 100);
        }
    }
}
