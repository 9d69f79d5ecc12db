//! Training objectives: expert-label cross-entropy (L1), stance consistency
//! (L2), echo-chamber contrast (L3) and their weighted sum with an L2
//! penalty on every learnable tensor.
//!
//! Each loss has a tape form used during training (taking log-probabilities
//! or representations as [`Var`]s) and a plain form over matrices used for
//! reporting and tests. Both go through the same tape code.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::index;

use crate::hin::{EntityId, Hin};
use crate::ingest::{ExpertLabel, Side, NUM_CLASSES};
use crate::numkit::{Matrix, NumError, Tape, Var};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum ObjectiveError {
    #[error("loss term {term} is not finite: {detail}")]
    NonFinite { term: &'static str, detail: String },
    #[error("invalid loss weights: {0}")]
    Weights(String),
    #[error("label class {0} outside 0..5")]
    Class(usize),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Loss weights and negative-sampling settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Weight of the negative-pair term of L3.
    pub q: f64,
    pub negatives: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::table8()
    }
}

impl LossWeights {
    pub fn table8() -> Self {
        Self {
            lambda1: 0.01,
            lambda2: 0.2,
            lambda3: 1.0,
            lambda4: 1e-5,
            q: -0.1,
            negatives: 2,
        }
    }

    /// Expert supervision at full weight; the consistency and echo weights
    /// sit at the middle of their recommended ranges (0.2..0.3, 0.01..0.1).
    pub fn appendix_b3() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.25,
            lambda3: 0.055,
            lambda4: 1e-5,
            ..Self::table8()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "table8" => Some(Self::table8()),
            "appendixB3" => Some(Self::appendix_b3()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let l = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ObjectiveError::Weights(format!(
                "lambdas must be finite and >= 0, got {l:?}"
            )));
        }
        if !self.q.is_finite() {
            return Err(ObjectiveError::Weights(format!(
                "q must be finite, got {}",
                self.q
            )));
        }
        Ok(())
    }
}

/// Which of the three objectives contribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossCombination {
    ExpertOnly,
    ExpertConsistency,
    ExpertEcho,
    #[default]
    All,
}

impl LossCombination {
    pub const ALL: [LossCombination; 4] = [
        LossCombination::ExpertOnly,
        LossCombination::ExpertConsistency,
        LossCombination::ExpertEcho,
        LossCombination::All,
    ];

    /// Zeroes the weights of the disabled objectives.
    pub fn apply(self, w: LossWeights) -> LossWeights {
        let (l2, l3) = match self {
            LossCombination::ExpertOnly => (false, false),
            LossCombination::ExpertConsistency => (true, false),
            LossCombination::ExpertEcho => (false, true),
            LossCombination::All => (true, true),
        };
        LossWeights {
            lambda2: if l2 { w.lambda2 } else { 0.0 },
            lambda3: if l3 { w.lambda3 } else { 0.0 },
            ..w
        }
    }
}

impl fmt::Display for LossCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossCombination::ExpertOnly => "L1",
            LossCombination::ExpertConsistency => "L1+L2",
            LossCombination::ExpertEcho => "L1+L3",
            LossCombination::All => "L1+L2+L3",
        })
    }
}

impl FromStr for LossCombination {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| ObjectiveError::Weights(format!("unknown loss combination {s:?}")))
    }
}

/// One step's loss values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Sum of squared entries over every learnable tensor.
    pub reg: f64,
    pub total: f64,
}

impl LossReport {
    pub fn combine(l1: f64, l2: f64, l3: f64, reg: f64, w: &LossWeights) -> Self {
        Self {
            l1,
            l2,
            l3,
            reg,
            total: w.lambda1 * l1 + w.lambda2 * l2 + w.lambda3 * l3 + w.lambda4 * reg,
        }
    }
}

pub const TRAINING_LOG_HEADER: &str = "epoch,step,L1,L2,L3,reg,total";

pub fn training_log_row(epoch: usize, step: usize, r: &LossReport) -> String {
    format!(
        "{epoch},{step},{},{},{},{},{}",
        r.l1, r.l2, r.l3, r.reg, r.total
    )
}

/// Reversal of an ordinal class: `(D - 1) - k`.
pub fn reverse_class(k: usize) -> usize {
    NUM_CLASSES - 1 - k
}

fn zero(tape: &mut Tape) -> Var {
    tape.constant(Matrix::scalar(0.0))
}

fn one_hot(classes: &[usize]) -> Result<Matrix, ObjectiveError> {
    let mut m = Matrix::zeros(classes.len(), NUM_CLASSES);
    for (r, &k) in classes.iter().enumerate() {
        if k >= NUM_CLASSES {
            return Err(ObjectiveError::Class(k));
        }
        m.set(r, k, 1.0);
    }
    Ok(m)
}

// Column of `m[rows[i], classes[i]]`.
fn pick(
    tape: &mut Tape,
    m: Var,
    rows: Vec<usize>,
    classes: &[usize],
) -> Result<Var, ObjectiveError> {
    let g = tape.gather_rows(m, rows)?;
    let h = tape.constant(one_hot(classes)?);
    Ok(tape.row_dot(g, h)?)
}

// -sum_i log_p[rows[i], classes[i]]
fn nll(
    tape: &mut Tape,
    log_p: Var,
    rows: Vec<usize>,
    classes: &[usize],
) -> Result<Var, ObjectiveError> {
    let picked = pick(tape, log_p, rows, classes)?;
    let s = tape.sum(picked)?;
    Ok(tape.neg(s)?)
}

fn split_labels(labels: &[ExpertLabel], side: Side) -> (Vec<usize>, Vec<usize>) {
    labels
        .iter()
        .filter(|l| l.side == side)
        .map(|l| (l.entity, l.class))
        .unzip()
}

/// L1 over log-probabilities of both heads.
pub fn expert_loss_var(
    tape: &mut Tape,
    log_l: Var,
    log_c: Var,
    labels: &[ExpertLabel],
) -> Result<Var, ObjectiveError> {
    if labels.is_empty() {
        warn!("expert loss: empty label set");
        return Ok(zero(tape));
    }
    let mut total = zero(tape);
    for (side, log_p) in [(Side::Liberal, log_l), (Side::Conservative, log_c)] {
        let (rows, classes) = split_labels(labels, side);
        if rows.is_empty() {
            continue;
        }
        let term = nll(tape, log_p, rows, &classes)?;
        total = tape.add(total, term)?;
    }
    Ok(total)
}

/// L1 over probability matrices `l`, `c` (n x 5).
pub fn expert_loss(l: &Matrix, c: &Matrix, labels: &[ExpertLabel]) -> Result<f64, ObjectiveError> {
    if labels.is_empty() {
        warn!("expert loss: empty label set");
        return Ok(0.0);
    }
    let mut tape = Tape::new();
    let mut total = 0.0;
    for (side, p) in [(Side::Liberal, l), (Side::Conservative, c)] {
        let (rows, classes) = split_labels(labels, side);
        if rows.is_empty() {
            continue;
        }
        let pv = tape.constant(p.clone());
        let picked = pick(&mut tape, pv, rows, &classes)?;
        let logs = tape.log(picked).map_err(|e| non_finite("L1", e))?;
        total -= tape.value(logs).sum();
    }
    Ok(total)
}

/// Reversed argmax classes: `(r(argmax c_i), r(argmax l_i))` per row.
pub fn consistency_classes(l: &Matrix, c: &Matrix) -> (Vec<usize>, Vec<usize>) {
    (0..l.rows())
        .map(|i| {
            (
                reverse_class(c.row_argmax(i)),
                reverse_class(l.row_argmax(i)),
            )
        })
        .unzip()
}

/// Derived one-hot targets `(l~, c~)`.
pub fn consistency_labels(l: &Matrix, c: &Matrix) -> (Matrix, Matrix) {
    let (lt, ct) = consistency_classes(l, c);
    (
        one_hot(&lt).expect("reversed classes are in range"),
        one_hot(&ct).expect("reversed classes are in range"),
    )
}

/// L2 over `entities`, targets derived from the current values of the
/// log-probabilities and held constant.
pub fn consistency_loss_var(
    tape: &mut Tape,
    log_l: Var,
    log_c: Var,
    entities: &[EntityId],
) -> Result<Var, ObjectiveError> {
    if entities.is_empty() {
        warn!("consistency loss: empty entity set");
        return Ok(zero(tape));
    }
    let l = tape.value(log_l).select_rows(entities);
    let c = tape.value(log_c).select_rows(entities);
    let (lt, ct) = consistency_classes(&l, &c);
    let a = nll(tape, log_l, entities.to_vec(), &lt)?;
    let b = nll(tape, log_c, entities.to_vec(), &ct)?;
    Ok(tape.add(a, b)?)
}

/// L2 over probability matrices.
pub fn consistency_loss(
    l: &Matrix,
    c: &Matrix,
    entities: &[EntityId],
) -> Result<f64, ObjectiveError> {
    if entities.is_empty() {
        warn!("consistency loss: empty entity set");
        return Ok(0.0);
    }
    let (lt, ct) = consistency_classes(&l.select_rows(entities), &c.select_rows(entities));
    let mut tape = Tape::new();
    let mut total = 0.0;
    for (p, classes) in [(l, lt), (c, ct)] {
        let pv = tape.constant(p.clone());
        let picked = pick(&mut tape, pv, entities.to_vec(), &classes)?;
        let logs = tape.log(picked).map_err(|e| non_finite("L2", e))?;
        total -= tape.value(logs).sum();
    }
    Ok(total)
}

/// Up to `k` distinct non-neighbors of `anchor`, drawn uniformly without
/// replacement from a stream keyed by `(seed, epoch, anchor)`. `None` when
/// the anchor is adjacent to every other node.
pub fn sample_negatives(
    hin: &Hin,
    anchor: EntityId,
    k: usize,
    epoch: usize,
    seed: u64,
) -> Option<Vec<EntityId>> {
    let pool = hin.negative_set(anchor);
    if pool.is_empty() {
        warn!("echo loss: node {anchor} has no non-neighbors; skipped");
        return None;
    }
    if k >= pool.len() {
        return Some(pool);
    }
    let mut r = rng::stream(
        rng::derive(rng::derive(seed, 0xE60), epoch as u64),
        anchor as u64,
    );
    let mut picked: Vec<EntityId> = index::sample(&mut r, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    Some(picked)
}

/// Pair lists for the echo loss over `anchors`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EchoPairs {
    pub positive: (Vec<EntityId>, Vec<EntityId>),
    pub negative: (Vec<EntityId>, Vec<EntityId>),
}

impl EchoPairs {
    pub fn build(hin: &Hin, anchors: &[EntityId], k: usize, epoch: usize, seed: u64) -> Self {
        let mut out = Self::default();
        for &i in anchors {
            for j in hin.positive_set(i) {
                out.positive.0.push(i);
                out.positive.1.push(j);
            }
            if k == 0 {
                continue;
            }
            for j in sample_negatives(hin, i, k, epoch, seed).unwrap_or_default() {
                out.negative.0.push(i);
                out.negative.1.push(j);
            }
        }
        out
    }
}

fn pair_dots(
    tape: &mut Tape,
    x: Var,
    pairs: &(Vec<EntityId>, Vec<EntityId>),
) -> Result<Var, ObjectiveError> {
    let a = tape.gather_rows(x, pairs.0.clone())?;
    let b = tape.gather_rows(x, pairs.1.clone())?;
    Ok(tape.row_dot(a, b)?)
}

/// `-sum_pos log sigmoid(x_i . x_j) + q * sum_neg log sigmoid(-x_i . x_j)`.
pub fn echo_loss_pairs_var(
    tape: &mut Tape,
    x: Var,
    pairs: &EchoPairs,
    q: f64,
) -> Result<Var, ObjectiveError> {
    let mut total = zero(tape);
    if !pairs.positive.0.is_empty() {
        let z = pair_dots(tape, x, &pairs.positive)?;
        let ls = tape.log_sigmoid(z)?;
        let s = tape.sum(ls)?;
        let s = tape.neg(s)?;
        total = tape.add(total, s)?;
    }
    if !pairs.negative.0.is_empty() && q != 0.0 {
        let z = pair_dots(tape, x, &pairs.negative)?;
        let nz = tape.neg(z)?;
        let ls = tape.log_sigmoid(nz)?;
        let s = tape.sum(ls)?;
        let s = tape.scale(s, q)?;
        total = tape.add(total, s)?;
    }
    Ok(total)
}

/// L3 over the given anchors with freshly sampled negatives.
#[allow(clippy::too_many_arguments)]
pub fn echo_loss_var(
    tape: &mut Tape,
    x: Var,
    hin: &Hin,
    anchors: &[EntityId],
    q: f64,
    k: usize,
    epoch: usize,
    seed: u64,
) -> Result<Var, ObjectiveError> {
    let pairs = EchoPairs::build(hin, anchors, k, epoch, seed);
    echo_loss_pairs_var(tape, x, &pairs, q)
}

/// L3 with every node as an anchor (negatives from epoch 0).
pub fn echo_loss(
    x: &Matrix,
    hin: &Hin,
    q: f64,
    k: usize,
    seed: u64,
) -> Result<f64, ObjectiveError> {
    let anchors: Vec<EntityId> = (0..hin.node_count()).collect();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let l = echo_loss_var(&mut tape, xv, hin, &anchors, q, k, 0, seed)?;
    Ok(tape.value(l).item()?)
}

/// Sum of squared entries of every tensor.
pub fn regularizer_var(tape: &mut Tape, params: &[Var]) -> Result<Var, ObjectiveError> {
    let mut total = zero(tape);
    for &p in params {
        let s = tape.squared_norm(p)?;
        total = tape.add(total, s)?;
    }
    Ok(total)
}

fn non_finite(term: &'static str, e: NumError) -> ObjectiveError {
    ObjectiveError::NonFinite {
        term,
        detail: e.to_string(),
    }
}

/// The three objective values on the tape, before weighting.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub l1: Var,
    pub l2: Var,
    pub l3: Var,
}

/// Weighted total on the tape and the matching report.
pub fn total_loss_var(
    tape: &mut Tape,
    parts: LossParts,
    w: &LossWeights,
    params: &[Var],
) -> Result<(Var, LossReport), ObjectiveError> {
    for (name, v) in [("L1", parts.l1), ("L2", parts.l2), ("L3", parts.l3)] {
        let val = tape.value(v).item()?;
        if !val.is_finite() {
            return Err(ObjectiveError::NonFinite {
                term: name,
                detail: val.to_string(),
            });
        }
    }
    let reg = regularizer_var(tape, params).map_err(|e| match e {
        ObjectiveError::Num(n) => non_finite("reg", n),
        other => other,
    })?;
    let mut total = zero(tape);
    for (v, lambda) in [
        (parts.l1, w.lambda1),
        (parts.l2, w.lambda2),
        (parts.l3, w.lambda3),
        (reg, w.lambda4),
    ] {
        let s = tape.scale(v, lambda)?;
        total = tape.add(total, s)?;
    }
    let report = LossReport {
        l1: tape.value(parts.l1).item()?,
        l2: tape.value(parts.l2).item()?,
        l3: tape.value(parts.l3).item()?,
        reg: tape.value(reg).item()?,
        total: tape.value(total).item()?,
    };
    Ok((total, report))
}

/// Weighted total from already computed values.
pub fn total_loss(
    l1: f64,
    l2: f64,
    l3: f64,
    w: &LossWeights,
    params: &[&Matrix],
) -> Result<LossReport, ObjectiveError> {
    for (term, v) in [("L1", l1), ("L2", l2), ("L3", l3)] {
        if !v.is_finite() {
            return Err(ObjectiveError::NonFinite {
                term,
                detail: v.to_string(),
            });
        }
    }
    let reg: f64 = params.iter().map(|m| m.squared_norm()).sum();
    if !reg.is_finite() {
        return Err(ObjectiveError::NonFinite {
            term: "reg",
            detail: reg.to_string(),
        });
    }
    Ok(LossReport::combine(l1, l2, l3, reg, w))
}
