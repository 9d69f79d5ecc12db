//! Roll-call vote prediction on top of learned actor embeddings.
//!
//! votes: `legislator_id,bill_id,congress,label`   label in yea|nay
//! bills: `bill_id,f0,...,f{d-1}`
//!
//! The classifier reads `[x_legislator, bill_vector]`, applies one hidden
//! layer of width `hidden` with the configured activation and a 2-way
//! softmax, index 0 being yea.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hin::{EntityId, Hin};
use crate::ingest::synth_features;
use crate::model::{Activation, Linear};
use crate::numkit::{adam_step, AdamState, Matrix, NumError, Tape, Var};
use crate::rng;

pub const TRAIN_CONGRESS: u32 = 114;
pub const TEST_CONGRESS: u32 = 115;

#[derive(Debug, thiserror::Error)]
pub enum VoteError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("time_based split needs records from congress {0}")]
    MissingCongress(u32),
    #[error(
        "time_based split only handles congresses {TRAIN_CONGRESS} and {TEST_CONGRESS}, found {0}"
    )]
    UnexpectedCongress(u32),
    #[error("unknown legislator {0}")]
    UnknownLegislator(EntityId),
    #[error("unknown bill {0:?}")]
    UnknownBill(String),
    #[error("{0}")]
    Dims(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VoteLabel {
    Yea,
    Nay,
}

impl VoteLabel {
    pub fn index(self) -> usize {
        match self {
            VoteLabel::Yea => 0,
            VoteLabel::Nay => 1,
        }
    }
}

impl fmt::Display for VoteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VoteLabel::Yea => "yea",
            VoteLabel::Nay => "nay",
        })
    }
}

impl FromStr for VoteLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yea" => Ok(VoteLabel::Yea),
            "nay" => Ok(VoteLabel::Nay),
            _ => Err(format!("vote label must be yea or nay, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRecord {
    pub legislator: EntityId,
    pub bill_id: String,
    pub congress: u32,
    pub label: VoteLabel,
}

/// Fixed-width vector per bill.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BillFeatures {
    dim: usize,
    rows: BTreeMap<String, Vec<f64>>,
}

impl BillFeatures {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, bill_id: impl Into<String>, v: Vec<f64>) -> Result<(), VoteError> {
        let id = bill_id.into();
        if v.len() != self.dim {
            return Err(VoteError::Dims(format!(
                "bill {id:?} has {} features, expected {}",
                v.len(),
                self.dim
            )));
        }
        self.rows.insert(id, v);
        Ok(())
    }

    pub fn get(&self, bill_id: &str) -> Option<&[f64]> {
        self.rows.get(bill_id).map(Vec::as_slice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

fn io_err(path: &Path, source: impl Into<std::io::Error>) -> VoteError {
    VoteError::Io {
        path: path.display().to_string(),
        source: source.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> VoteError {
    io_err(path, std::io::Error::other(e))
}

fn parse_err(path: &Path, rec: &csv::StringRecord, message: impl Into<String>) -> VoteError {
    VoteError::Parse {
        path: path.display().to_string(),
        line: rec.position().map_or(0, |p| p.line()),
        message: message.into(),
    }
}

fn open(path: &Path, expected: &[&str]) -> Result<(csv::Reader<File>, usize), VoteError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    let got: Vec<&str> = header.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(VoteError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!(
                "expected header starting {:?}, got {:?}",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    let width = got.len();
    Ok((r, width))
}

fn field<T: FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    i: usize,
    what: &str,
) -> Result<T, VoteError> {
    let raw = rec
        .get(i)
        .ok_or_else(|| parse_err(path, rec, format!("missing {what}")))?;
    raw.parse()
        .map_err(|_| parse_err(path, rec, format!("bad {what} {raw:?}")))
}

pub fn load_votes(path: &Path) -> Result<Vec<VoteRecord>, VoteError> {
    let (mut r, _) = open(path, &["legislator_id", "bill_id", "congress", "label"])?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let label = rec.get(3).unwrap_or("");
        out.push(VoteRecord {
            legislator: field(path, &rec, 0, "legislator id")?,
            bill_id: field(path, &rec, 1, "bill id")?,
            congress: field(path, &rec, 2, "congress")?,
            label: label
                .parse()
                .map_err(|m: String| parse_err(path, &rec, m))?,
        });
    }
    Ok(out)
}

pub fn write_votes(path: &Path, records: &[VoteRecord]) -> Result<(), VoteError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["legislator_id", "bill_id", "congress", "label"])
        .map_err(|e| csv_err(path, e))?;
    for v in records {
        w.write_record([
            v.legislator.to_string(),
            v.bill_id.clone(),
            v.congress.to_string(),
            v.label.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_bills(path: &Path) -> Result<BillFeatures, VoteError> {
    let (mut r, width) = open(path, &["bill_id"])?;
    let mut bills = BillFeatures::new(width - 1);
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != width {
            return Err(parse_err(
                path,
                &rec,
                format!("expected {width} fields, got {}", rec.len()),
            ));
        }
        let id: String = field(path, &rec, 0, "bill id")?;
        if bills.get(&id).is_some() {
            return Err(parse_err(path, &rec, format!("duplicate bill {id:?}")));
        }
        let v = (1..width)
            .map(|i| field(path, &rec, i, "feature"))
            .collect::<Result<Vec<f64>, _>>()?;
        bills.insert(id, v)?;
    }
    Ok(bills)
}

pub fn write_bills(path: &Path, bills: &BillFeatures) -> Result<(), VoteError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["bill_id".to_string()];
    header.extend((0..bills.dim()).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (id, v) in bills.iter() {
        let mut row = vec![id.to_string()];
        row.extend(v.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Every legislator is a node of `hin` and every bill has features.
pub fn check_votes(
    records: &[VoteRecord],
    hin: &Hin,
    bills: &BillFeatures,
) -> Result<(), VoteError> {
    for v in records {
        if hin.node(v.legislator).is_none() {
            return Err(VoteError::UnknownLegislator(v.legislator));
        }
        if bills.get(&v.bill_id).is_none() {
            return Err(VoteError::UnknownBill(v.bill_id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Random,
    TimeBased,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Random => "random",
            SplitMode::TimeBased => "time_based",
        })
    }
}

impl FromStr for SplitMode {
    type Err = VoteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SplitMode::Random),
            "time_based" => Ok(SplitMode::TimeBased),
            _ => Err(VoteError::Config(format!(
                "split mode must be random or time_based, got {s:?}"
            ))),
        }
    }
}

/// Sorted record indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoteSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn cut(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).min(n)
}

/// Random: 6:2:2 over all records. Time-based: the earlier congress is split
/// 8:2 into train and validation, the later one is entirely test.
pub fn split_votes(
    records: &[VoteRecord],
    mode: SplitMode,
    seed: u64,
) -> Result<VoteSplit, VoteError> {
    let mut r = rng::stream(rng::derive(seed, 0x5B17), 0);
    let mut split = VoteSplit::default();
    match mode {
        SplitMode::Random => {
            let mut idx: Vec<usize> = (0..records.len()).collect();
            idx.shuffle(&mut r);
            let n_train = cut(idx.len(), 0.6);
            let n_val = cut(idx.len(), 0.2).min(idx.len() - n_train);
            split.train = idx[..n_train].to_vec();
            split.val = idx[n_train..n_train + n_val].to_vec();
            split.test = idx[n_train + n_val..].to_vec();
        }
        SplitMode::TimeBased => {
            let mut early = Vec::new();
            for (i, v) in records.iter().enumerate() {
                match v.congress {
                    TRAIN_CONGRESS => early.push(i),
                    TEST_CONGRESS => split.test.push(i),
                    other => return Err(VoteError::UnexpectedCongress(other)),
                }
            }
            if early.is_empty() {
                return Err(VoteError::MissingCongress(TRAIN_CONGRESS));
            }
            if split.test.is_empty() {
                return Err(VoteError::MissingCongress(TEST_CONGRESS));
            }
            early.shuffle(&mut r);
            let n_train = cut(early.len(), 0.8);
            split.train = early[..n_train].to_vec();
            split.val = early[n_train..].to_vec();
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            activation: Activation::default(),
            lr: 1e-3,
            max_epochs: 100,
            batch_size: 64,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteModel {
    pub hidden: Linear,
    pub output: Linear,
    pub activation: Activation,
}

impl VoteModel {
    pub fn init(d_in: usize, hidden: usize, activation: Activation, seed: u64) -> Self {
        let base = rng::derive(seed, 0x707E);
        Self {
            hidden: Linear::glorot(d_in, hidden, &mut rng::stream(base, 1)),
            output: Linear::glorot(hidden, 2, &mut rng::stream(base, 2)),
            activation,
        }
    }

    pub fn zeros(d_in: usize, hidden: usize, activation: Activation) -> Self {
        Self {
            hidden: Linear::zeros(d_in, hidden),
            output: Linear::zeros(hidden, 2),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.weight.rows()
    }

    fn tensors(&self) -> [&Matrix; 4] {
        [
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }

    /// Log-probabilities `n x 2` for the rows of `x`.
    fn log_probs_var(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var, NumError> {
        let h = tape.matmul(x, p[0])?;
        let h = tape.add_bias(h, p[1])?;
        let h = self.activation.apply(tape, h)?;
        let o = tape.matmul(h, p[2])?;
        let o = tape.add_bias(o, p[3])?;
        tape.log_softmax(o)
    }

    /// `[p_yea, p_nay]` per row of `x`.
    pub fn probabilities(&self, x: &Matrix) -> Result<Matrix, VoteError> {
        let mut tape = Tape::new();
        let p: Vec<Var> = self
            .tensors()
            .iter()
            .map(|&t| tape.constant(t.clone()))
            .collect();
        let xv = tape.constant(x.clone());
        let lp = self.log_probs_var(&mut tape, &p, xv)?;
        Ok(tape.value(lp).map(f64::exp))
    }
}

/// Concatenated `[embedding, bill]` rows for the listed records.
pub fn vote_inputs(
    embeddings: &Matrix,
    bills: &BillFeatures,
    records: &[VoteRecord],
    idx: &[usize],
) -> Result<Matrix, VoteError> {
    let d_e = embeddings.cols();
    let mut x = Matrix::zeros(idx.len(), d_e + bills.dim());
    for (r, &i) in idx.iter().enumerate() {
        let v = &records[i];
        if v.legislator >= embeddings.rows() {
            return Err(VoteError::UnknownLegislator(v.legislator));
        }
        let b = bills
            .get(&v.bill_id)
            .ok_or_else(|| VoteError::UnknownBill(v.bill_id.clone()))?;
        let row = x.row_mut(r);
        row[..d_e].copy_from_slice(embeddings.row(v.legislator));
        row[d_e..].copy_from_slice(b);
    }
    Ok(x)
}

fn labels_of(records: &[VoteRecord], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| records[i].label.index()).collect()
}

fn accuracy_on(model: &VoteModel, x: &Matrix, gold: &[usize]) -> Result<f64, VoteError> {
    let p = model.probabilities(x)?;
    let correct = gold
        .iter()
        .enumerate()
        .filter(|&(r, &g)| p.row_argmax(r) == g)
        .count();
    Ok(correct as f64 / gold.len() as f64)
}

pub fn vote_accuracy(
    model: &VoteModel,
    embeddings: &Matrix,
    bills: &BillFeatures,
    records: &[VoteRecord],
    idx: &[usize],
) -> Result<f64, VoteError> {
    if idx.is_empty() {
        return Err(VoteError::EmptySplit("evaluation"));
    }
    let x = vote_inputs(embeddings, bills, records, idx)?;
    accuracy_on(model, &x, &labels_of(records, idx))
}

/// Accuracy on `eval` of always predicting the most frequent `train` label
/// (yea on ties).
pub fn majority_accuracy(records: &[VoteRecord], train: &[usize], eval: &[usize]) -> f64 {
    let yeas = train
        .iter()
        .filter(|&&i| records[i].label == VoteLabel::Yea)
        .count();
    let majority = if 2 * yeas >= train.len() {
        VoteLabel::Yea
    } else {
        VoteLabel::Nay
    };
    let hits = eval
        .iter()
        .filter(|&&i| records[i].label == majority)
        .count();
    hits as f64 / eval.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoteHistory {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Mean cross-entropy minibatch training with Adam; the epoch with the best
/// validation accuracy is kept.
pub fn train_vote_model(
    embeddings: &Matrix,
    bills: &BillFeatures,
    records: &[VoteRecord],
    split: &VoteSplit,
    config: &VoteConfig,
) -> Result<(VoteModel, VoteHistory), VoteError> {
    if config.hidden == 0 || config.batch_size == 0 || config.max_epochs == 0 {
        return Err(VoteError::Config(
            "hidden, batch_size and max_epochs must be positive".into(),
        ));
    }
    if !(config.lr.is_finite() && config.lr > 0.0) {
        return Err(VoteError::Config(format!(
            "lr must be positive, got {}",
            config.lr
        )));
    }
    if split.train.is_empty() {
        return Err(VoteError::EmptySplit("train"));
    }
    if split.val.is_empty() {
        return Err(VoteError::EmptySplit("validation"));
    }
    let x_train = vote_inputs(embeddings, bills, records, &split.train)?;
    let y_train = labels_of(records, &split.train);
    let x_val = vote_inputs(embeddings, bills, records, &split.val)?;
    let y_val = labels_of(records, &split.val);

    let mut model = VoteModel::init(
        x_train.cols(),
        config.hidden,
        config.activation,
        config.seed,
    );
    let mut adam = AdamState::default();
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut shuffler = rng::stream(rng::derive(config.seed, 0x5407), 0);
    let mut history = VoteHistory::default();
    let mut best = (f64::NEG_INFINITY, model.clone());
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffler);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = x_train.select_rows(batch);
            let mut onehot = Matrix::zeros(batch.len(), 2);
            for (r, &i) in batch.iter().enumerate() {
                onehot.set(r, y_train[i], 1.0);
            }
            let mut tape = Tape::new();
            let p: Vec<Var> = model
                .tensors()
                .iter()
                .map(|&t| tape.param(t.clone()))
                .collect();
            let xv = tape.constant(x);
            let lp = model.log_probs_var(&mut tape, &p, xv)?;
            let mask = tape.constant(onehot);
            let picked = tape.hadamard(lp, mask)?;
            let s = tape.sum(picked)?;
            let loss = tape.scale(s, -1.0 / batch.len() as f64)?;
            tape.backward(loss)?;
            total += tape.value(loss).item()? * batch.len() as f64;
            let grads: Vec<Matrix> = p
                .iter()
                .map(|&v| tape.grad(v).cloned().expect("param grad"))
                .collect();
            adam_step(&mut model.tensors_mut(), &grads, &mut adam, config.lr)?;
        }
        let acc = accuracy_on(&model, &x_val, &y_val)?;
        history.train_loss.push(total / order.len() as f64);
        history.val_accuracy.push(acc);
        if acc > best.0 {
            best = (acc, model.clone());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                info!(
                    "vote: early stop after epoch {epoch}, best {}",
                    history.best_epoch
                );
                break;
            }
        }
    }
    Ok((best.1, history))
}

/// `(p_yea, p_nay)` for one legislator and bill.
pub fn predict_vote(
    model: &VoteModel,
    embeddings: &Matrix,
    bills: &BillFeatures,
    legislator: EntityId,
    bill_id: &str,
) -> Result<(f64, f64), VoteError> {
    if legislator >= embeddings.rows() {
        return Err(VoteError::UnknownLegislator(legislator));
    }
    let b = bills
        .get(bill_id)
        .ok_or_else(|| VoteError::UnknownBill(bill_id.to_string()))?;
    if embeddings.cols() + b.len() != model.input_dim() {
        return Err(VoteError::Dims(format!(
            "classifier takes {} inputs, got {} + {}",
            model.input_dim(),
            embeddings.cols(),
            b.len()
        )));
    }
    let mut row = embeddings.row(legislator).to_vec();
    row.extend_from_slice(b);
    let p = model.probabilities(&Matrix::row_vector(&row))?;
    Ok((p.get(0, 0), p.get(0, 1)))
}

const MODEL_MAGIC: &str = "actorgraph-vote-model 1";

/// Plain-text model file: a header, the activation, then each tensor as a
/// `name rows cols` line followed by one line of values per row. Values use
/// the shortest round-trip decimal form, so a reload is bit-exact.
pub fn save_vote_model(model: &VoteModel, path: &Path) -> Result<(), VoteError> {
    use std::fmt::Write as _;
    let mut s = format!("{MODEL_MAGIC}\nactivation {}\n", model.activation);
    for (name, m) in [
        "hidden.weight",
        "hidden.bias",
        "output.weight",
        "output.bias",
    ]
    .iter()
    .zip(model.tensors())
    {
        let _ = writeln!(s, "{name} {} {}", m.rows(), m.cols());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn load_vote_model(path: &Path) -> Result<VoteModel, VoteError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let bad = |line: u64, message: String| VoteError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| bad(0, format!("truncated before {what}")))
    };
    let (n, header) = next("header")?;
    if header != MODEL_MAGIC {
        return Err(bad(n, format!("unrecognised header {header:?}")));
    }
    let (n, act) = next("activation")?;
    let activation = act
        .strip_prefix("activation ")
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| bad(n, format!("bad activation line {act:?}")))?;
    let mut tensors = Vec::new();
    for name in [
        "hidden.weight",
        "hidden.bias",
        "output.weight",
        "output.bias",
    ] {
        let (n, head) = next(name)?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let (rows, cols) = match parts.as_slice() {
            [got, r, c] if *got == name => match (r.parse::<usize>(), c.parse::<usize>()) {
                (Ok(r), Ok(c)) => (r, c),
                _ => return Err(bad(n, format!("bad shape in {head:?}"))),
            },
            _ => return Err(bad(n, format!("expected tensor {name}, got {head:?}"))),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, line) = next(name)?;
            let vals = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(n, e.to_string()))?;
            if vals.len() != cols {
                return Err(bad(
                    n,
                    format!("expected {cols} values, got {}", vals.len()),
                ));
            }
            data.extend(vals);
        }
        tensors.push(Matrix::from_vec(rows, cols, data)?);
    }
    let mut it = tensors.into_iter();
    let mut take = || it.next().expect("four tensors");
    let model = VoteModel {
        hidden: Linear {
            weight: take(),
            bias: take(),
        },
        output: Linear {
            weight: take(),
            bias: take(),
        },
        activation,
    };
    let (d_hidden, h2) = (model.hidden.weight.cols(), model.output.weight.rows());
    if model.hidden.bias.shape() != (1, d_hidden)
        || h2 != d_hidden
        || model.output.bias.shape() != (1, 2)
        || model.output.weight.cols() != 2
    {
        return Err(VoteError::Dims(format!(
            "{}: inconsistent tensor shapes",
            path.display()
        )));
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteSynthConfig {
    pub n_bills: usize,
    pub d_bill: usize,
    /// Probability that a planted vote is flipped.
    pub noise: f64,
    pub seed: u64,
}

impl Default for VoteSynthConfig {
    fn default() -> Self {
        Self {
            n_bills: 60,
            d_bill: 16,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Planted votes: every listed legislator votes on every bill, yea iff the
/// signs of its ideology and the bill's polarity agree, then flipped with
/// probability `noise`. Bill polarity sits in feature 0 with magnitude in
/// [0.5, 1.5); the other features are standard normal. The first half of
/// the bills belongs to the earlier congress.
pub fn synth_votes(
    ideology: &[(EntityId, f64)],
    config: &VoteSynthConfig,
) -> (BillFeatures, Vec<VoteRecord>) {
    let base = rng::derive(config.seed, 0xB177);
    let mut bills = BillFeatures::new(config.d_bill.max(1));
    let mut polarity = Vec::with_capacity(config.n_bills);
    for b in 0..config.n_bills {
        let mut r = rng::stream(base, b as u64);
        let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let pol = sign * r.random_range(0.5..1.5);
        let mut v: Vec<f64> = (0..bills.dim())
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        v[0] = pol;
        polarity.push(pol);
        bills.insert(format!("b{b}"), v).expect("width matches");
    }
    let mut flips = rng::stream(base, u64::MAX);
    let mut records = Vec::with_capacity(ideology.len() * config.n_bills);
    for (b, &pol) in polarity.iter().enumerate() {
        let congress = if 2 * b < config.n_bills {
            TRAIN_CONGRESS
        } else {
            TEST_CONGRESS
        };
        for &(leg, ideo) in ideology {
            let agree = (ideo >= 0.0) == (pol >= 0.0);
            let yea = agree != flips.random_bool(config.noise);
            records.push(VoteRecord {
                legislator: leg,
                bill_id: format!("b{b}"),
                congress,
                label: if yea { VoteLabel::Yea } else { VoteLabel::Nay },
            });
        }
    }
    (bills, records)
}

/// Standard-normal embedding table with the planted ideology written into
/// column 0 of the listed rows.
pub fn planted_embeddings(
    n_rows: usize,
    dim: usize,
    ideology: &[(EntityId, f64)],
    seed: u64,
) -> Matrix {
    let mut m = synth_features(n_rows, dim.max(1), rng::derive(seed, 0xE4B));
    for &(e, v) in ideology {
        m.set(e, 0, v);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(legislator: EntityId, bill: &str, congress: u32, label: VoteLabel) -> VoteRecord {
        VoteRecord {
            legislator,
            bill_id: bill.into(),
            congress,
            label,
        }
    }

    fn planted(seed: u64, n_leg: usize) -> (Matrix, BillFeatures, Vec<VoteRecord>) {
        let mut r = rng::stream(seed, 99);
        let ideology: Vec<(EntityId, f64)> = (0..n_leg)
            .map(|i| {
                (
                    i,
                    if i % 2 == 0 { 1.0 } else { -1.0 } * r.random_range(0.5..1.5),
                )
            })
            .collect();
        let (bills, votes) = synth_votes(
            &ideology,
            &VoteSynthConfig {
                seed,
                ..Default::default()
            },
        );
        (planted_embeddings(n_leg, 16, &ideology, seed), bills, votes)
    }

    #[test]
    fn random_split_of_ten_is_six_two_two() {
        let records: Vec<VoteRecord> = (0..10).map(|i| rec(i, "b", 114, VoteLabel::Yea)).collect();
        let s = split_votes(&records, SplitMode::Random, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
        assert_eq!(s, split_votes(&records, SplitMode::Random, 3).unwrap());
        assert_ne!(s, split_votes(&records, SplitMode::Random, 4).unwrap());
    }

    #[test]
    fn time_based_needs_both_congresses() {
        let only_late: Vec<VoteRecord> = (0..4).map(|i| rec(i, "b", 115, VoteLabel::Nay)).collect();
        assert!(matches!(
            split_votes(&only_late, SplitMode::TimeBased, 0),
            Err(VoteError::MissingCongress(114))
        ));
        let mut mixed = only_late.clone();
        mixed.extend((0..10).map(|i| rec(i, "a", 114, VoteLabel::Yea)));
        let s = split_votes(&mixed, SplitMode::TimeBased, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (8, 2));
        assert!(s.test.iter().all(|&i| mixed[i].congress == 115));
        assert_eq!(s.test.len(), 4);
        mixed.push(rec(0, "c", 113, VoteLabel::Yea));
        assert!(matches!(
            split_votes(&mixed, SplitMode::TimeBased, 0),
            Err(VoteError::UnexpectedCongress(113))
        ));
    }

    #[test]
    fn zero_model_is_indifferent() {
        let m = VoteModel::zeros(3, 8, Activation::default());
        let mut bills = BillFeatures::new(1);
        bills.insert("x", vec![2.0]).unwrap();
        let emb = Matrix::from_rows(&[[1.0, -1.0]]).unwrap();
        assert_eq!(predict_vote(&m, &emb, &bills, 0, "x").unwrap(), (0.5, 0.5));
        assert!(matches!(
            predict_vote(&m, &emb, &bills, 1, "x"),
            Err(VoteError::UnknownLegislator(1))
        ));
        assert!(matches!(
            predict_vote(&m, &emb, &bills, 0, "y"),
            Err(VoteError::UnknownBill(_))
        ));
    }

    #[test]
    fn prediction_sums_to_one_and_repeats() {
        let m = VoteModel::init(3, 8, Activation::Relu, 5);
        let mut bills = BillFeatures::new(1);
        bills.insert("x", vec![0.7]).unwrap();
        let emb = Matrix::from_rows(&[[1.0, -3.0]]).unwrap();
        let a = predict_vote(&m, &emb, &bills, 0, "x").unwrap();
        assert!((a.0 + a.1 - 1.0).abs() < 1e-12);
        assert_eq!(a, predict_vote(&m, &emb, &bills, 0, "x").unwrap());
    }

    #[test]
    fn all_yea_training_predicts_yea() {
        let (emb, bills, mut votes) = planted(1, 20);
        let split = split_votes(&votes, SplitMode::Random, 1).unwrap();
        for &i in split.train.iter().chain(&split.val) {
            votes[i].label = VoteLabel::Yea;
        }
        let cfg = VoteConfig {
            max_epochs: 5,
            ..Default::default()
        };
        let (model, _) = train_vote_model(&emb, &bills, &votes, &split, &cfg).unwrap();
        let x = vote_inputs(&emb, &bills, &votes, &split.test).unwrap();
        let p = model.probabilities(&x).unwrap();
        assert!((0..p.rows()).all(|r| p.row_argmax(r) == 0));
        let acc = vote_accuracy(&model, &emb, &bills, &votes, &split.test).unwrap();
        let yea = split
            .test
            .iter()
            .filter(|&&i| votes[i].label == VoteLabel::Yea)
            .count();
        assert_eq!(acc, yea as f64 / split.test.len() as f64);
    }

    #[test]
    fn planted_votes_are_recovered() {
        let (emb, bills, votes) = planted(2, 60);
        let split = split_votes(&votes, SplitMode::Random, 2).unwrap();
        let (model, hist) =
            train_vote_model(&emb, &bills, &votes, &split, &VoteConfig::default()).unwrap();
        let acc = vote_accuracy(&model, &emb, &bills, &votes, &split.test).unwrap();
        assert!(acc >= 0.9, "accuracy {acc}, history {hist:?}");
        assert!(acc >= majority_accuracy(&votes, &split.train, &split.test) + 0.2);
    }

    #[test]
    fn inputs_reject_unknown_ids() {
        let emb = Matrix::zeros(2, 2);
        let mut bills = BillFeatures::new(1);
        bills.insert("a", vec![1.0]).unwrap();
        let votes = vec![
            rec(5, "a", 114, VoteLabel::Yea),
            rec(0, "zz", 114, VoteLabel::Yea),
        ];
        assert!(matches!(
            vote_inputs(&emb, &bills, &votes, &[0]),
            Err(VoteError::UnknownLegislator(5))
        ));
        assert!(matches!(
            vote_inputs(&emb, &bills, &votes, &[1]),
            Err(VoteError::UnknownBill(_))
        ));
        assert!(bills.insert("b", vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (_, bills, votes) = planted(3, 4);
        let (vp, bp) = (dir.path().join("votes.csv"), dir.path().join("bills.csv"));
        write_votes(&vp, &votes).unwrap();
        write_bills(&bp, &bills).unwrap();
        assert_eq!(load_votes(&vp).unwrap(), votes);
        assert_eq!(load_bills(&bp).unwrap(), bills);
        std::fs::write(
            &vp,
            "legislator_id,bill_id,congress,label\n0,b1,114,maybe\n",
        )
        .unwrap();
        assert!(matches!(
            load_votes(&vp),
            Err(VoteError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vote_model.txt");
        let m = VoteModel::init(5, 7, Activation::LeakyRelu(0.2), 11);
        save_vote_model(&m, &path).unwrap();
        assert_eq!(load_vote_model(&path).unwrap(), m);
        let text = std::fs::read_to_string(&path).unwrap().replacen(
            "output.bias 1 2",
            "output.bias 1 3",
            1,
        );
        std::fs::write(&path, text).unwrap();
        assert!(load_vote_model(&path).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_records(n in 0usize..200, seed in any::<u64>(), late in 1usize..50) {
            let records: Vec<VoteRecord> = (0..n + late)
                .map(|i| rec(i, "b", if i < n { 114 } else { 115 }, VoteLabel::Yea))
                .collect();
            let modes: &[SplitMode] = if n > 0 { &[SplitMode::Random, SplitMode::TimeBased] } else { &[SplitMode::Random] };
            for &mode in modes {
                let s = split_votes(&records, mode, seed).unwrap();
                let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..records.len()).collect::<Vec<_>>());
                if mode == SplitMode::TimeBased {
                    prop_assert!(s.test.iter().all(|&i| records[i].congress == 115));
                }
            }
        }
    }
}
