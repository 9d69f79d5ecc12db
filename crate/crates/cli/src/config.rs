//! Run configuration: flat `key = value` files with `#` comments.
//!
//! Keys are applied in file order, so `preset` should come before any
//! `lambda*` overrides. Unknown keys are rejected. [`RunConfig::render`]
//! writes every key back in a form [`RunConfig::parse`] accepts.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use actorgraph_core::hin::RelationKind;
use actorgraph_core::ingest::{SynthConfig, TermMode, DEFAULT_RATIOS};
use actorgraph_core::objectives::{LossCombination, LossWeights};
use actorgraph_core::trainer::TrainConfig;
use actorgraph_core::vote::{SplitMode, VoteConfig, VoteSynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    /// The actor's party hub.
    Party,
    /// Argmax of the liberal head, as a governor label.
    Label,
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Party => "party",
            GroupBy::Label => "label",
        })
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "party" => Ok(GroupBy::Party),
            "label" => Ok(GroupBy::Label),
            _ => Err(format!("group_by must be party or label, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,

    /// Directory with the default file names below.
    pub data: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    /// Path, or `synthetic:<seed>`.
    pub features: Option<String>,
    pub scores: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub votes: Option<PathBuf>,
    pub bills: Option<PathBuf>,
    pub vote_model: Option<PathBuf>,
    /// Width of `synthetic:<seed>` features.
    pub synthetic_dim: usize,

    pub term_mode: TermMode,
    pub split: [f64; 3],
    pub preset: String,
    pub losses: LossCombination,
    pub train: TrainConfig,
    /// Save every new best epoch under `<out>/checkpoints`.
    pub checkpoint: bool,

    pub synth: SynthConfig,
    pub vote_synth: VoteSynthConfig,
    pub vote: VoteConfig,
    pub vote_split: SplitMode,

    pub ablate_relations: Vec<RelationKind>,
    pub group_by: GroupBy,
    pub gradcheck_h: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: None,
            nodes: None,
            edges: None,
            features: None,
            scores: None,
            model: None,
            embeddings: None,
            votes: None,
            bills: None,
            vote_model: None,
            synthetic_dim: 768,
            term_mode: TermMode::default(),
            split: DEFAULT_RATIOS,
            preset: "table8".into(),
            losses: LossCombination::All,
            train: TrainConfig::default(),
            checkpoint: false,
            synth: SynthConfig::default(),
            vote_synth: VoteSynthConfig::default(),
            vote: VoteConfig::default(),
            vote_split: SplitMode::Random,
            ablate_relations: RelationKind::ALL.to_vec(),
            group_by: GroupBy::Party,
            gradcheck_h: 1e-5,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

fn flag(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let t = &mut self.train;
        let w = &mut t.weights;
        match key {
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "data" => self.data = path(v),
            "nodes" => self.nodes = path(v),
            "edges" => self.edges = path(v),
            "features" => self.features = (!v.is_empty()).then(|| v.to_string()),
            "scores" => self.scores = path(v),
            "model" => self.model = path(v),
            "embeddings" => self.embeddings = path(v),
            "votes" => self.votes = path(v),
            "bills" => self.bills = path(v),
            "vote_model" => self.vote_model = path(v),
            "synthetic_dim" => self.synthetic_dim = num(key, v)?,
            "term_mode" => self.term_mode = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "split_train" => self.split[0] = num(key, v)?,
            "split_val" => self.split[1] = num(key, v)?,
            "split_test" => self.split[2] = num(key, v)?,
            "preset" => {
                *w =
                    LossWeights::preset(v).ok_or_else(|| format!("{key}: unknown preset {v:?}"))?;
                self.preset = v.to_string();
            }
            "lambda1" => w.lambda1 = num(key, v)?,
            "lambda2" => w.lambda2 = num(key, v)?,
            "lambda3" => w.lambda3 = num(key, v)?,
            "lambda4" => w.lambda4 = num(key, v)?,
            "q" => w.q = num(key, v)?,
            "negatives" => w.negatives = num(key, v)?,
            "losses" => self.losses = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "lr" => t.lr = num(key, v)?,
            "max_epochs" => t.max_epochs = num(key, v)?,
            "batch_size" => t.batch_size = num(key, v)?,
            "layers" => t.layers = num(key, v)?,
            "hidden" => t.hidden = num(key, v)?,
            "activation" => t.activation = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "variant" => t.variant = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "patience" => t.patience = num(key, v)?,
            "widen_consistency" => t.widen_consistency = flag(key, v)?,
            "expert_fraction" => t.expert_fraction = num(key, v)?,
            "checkpoint" => self.checkpoint = flag(key, v)?,
            "n_actors" => self.synth.n_actors = num(key, v)?,
            "n_context" => self.synth.n_context = num(key, v)?,
            "d_in" => self.synth.d_in = num(key, v)?,
            "n_communities" => self.synth.n_communities = num(key, v)?,
            "flip_prob" => self.synth.flip_prob = num(key, v)?,
            "feature_signal" => self.synth.feature_signal = num(key, v)?,
            "institution_rate" => self.synth.institution_rate = num(key, v)?,
            "governor_every" => self.synth.governor_every = num(key, v)?,
            "n_bills" => self.vote_synth.n_bills = num(key, v)?,
            "d_bill" => self.vote_synth.d_bill = num(key, v)?,
            "vote_noise" => self.vote_synth.noise = num(key, v)?,
            "vote_hidden" => self.vote.hidden = num(key, v)?,
            "vote_lr" => self.vote.lr = num(key, v)?,
            "vote_max_epochs" => self.vote.max_epochs = num(key, v)?,
            "vote_batch_size" => self.vote.batch_size = num(key, v)?,
            "vote_patience" => self.vote.patience = num(key, v)?,
            "vote_split" => self.vote_split = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "ablate_relations" => {
                self.ablate_relations = v
                    .split(',')
                    .map(|r| {
                        r.trim()
                            .parse::<RelationKind>()
                            .map_err(|e| format!("{key}: {e}"))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "group_by" => self.group_by = v.parse()?,
            "gradcheck_h" => self.gradcheck_h = num(key, v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies a config file's text on top of `self`.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                format!("{source}:{}: expected `key = value`, got {line:?}", i + 1)
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| format!("{source}:{}: {e}", i + 1))?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut c = Self::default();
        c.apply_text(text, "<config>")?;
        Ok(c)
    }

    /// Every key with its resolved value.
    pub fn render(&self) -> String {
        let t = &self.train;
        let w = &t.weights;
        let rels: Vec<String> = self
            .ablate_relations
            .iter()
            .map(ToString::to_string)
            .collect();
        let entries: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("data", show_path(&self.data)),
            ("nodes", show_path(&self.nodes)),
            ("edges", show_path(&self.edges)),
            ("features", self.features.clone().unwrap_or_default()),
            ("scores", show_path(&self.scores)),
            ("model", show_path(&self.model)),
            ("embeddings", show_path(&self.embeddings)),
            ("votes", show_path(&self.votes)),
            ("bills", show_path(&self.bills)),
            ("vote_model", show_path(&self.vote_model)),
            ("synthetic_dim", self.synthetic_dim.to_string()),
            ("term_mode", self.term_mode.to_string()),
            ("split_train", self.split[0].to_string()),
            ("split_val", self.split[1].to_string()),
            ("split_test", self.split[2].to_string()),
            ("preset", self.preset.clone()),
            ("lambda1", w.lambda1.to_string()),
            ("lambda2", w.lambda2.to_string()),
            ("lambda3", w.lambda3.to_string()),
            ("lambda4", w.lambda4.to_string()),
            ("q", w.q.to_string()),
            ("negatives", w.negatives.to_string()),
            ("losses", self.losses.to_string()),
            ("lr", t.lr.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("layers", t.layers.to_string()),
            ("hidden", t.hidden.to_string()),
            ("activation", t.activation.to_string()),
            ("variant", t.variant.to_string()),
            ("patience", t.patience.to_string()),
            ("widen_consistency", t.widen_consistency.to_string()),
            ("expert_fraction", t.expert_fraction.to_string()),
            ("checkpoint", self.checkpoint.to_string()),
            ("n_actors", self.synth.n_actors.to_string()),
            ("n_context", self.synth.n_context.to_string()),
            ("d_in", self.synth.d_in.to_string()),
            ("n_communities", self.synth.n_communities.to_string()),
            ("flip_prob", self.synth.flip_prob.to_string()),
            ("feature_signal", self.synth.feature_signal.to_string()),
            ("institution_rate", self.synth.institution_rate.to_string()),
            ("governor_every", self.synth.governor_every.to_string()),
            ("n_bills", self.vote_synth.n_bills.to_string()),
            ("d_bill", self.vote_synth.d_bill.to_string()),
            ("vote_noise", self.vote_synth.noise.to_string()),
            ("vote_hidden", self.vote.hidden.to_string()),
            ("vote_lr", self.vote.lr.to_string()),
            ("vote_max_epochs", self.vote.max_epochs.to_string()),
            ("vote_batch_size", self.vote.batch_size.to_string()),
            ("vote_patience", self.vote.patience.to_string()),
            ("vote_split", self.vote_split.to_string()),
            ("ablate_relations", rels.join(",")),
            ("group_by", self.group_by.to_string()),
            ("gradcheck_h", self.gradcheck_h.to_string()),
        ];
        let mut s = String::from("# resolved run configuration\n");
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// The trainer settings with the run seed and loss combination applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            weights: self.losses.apply(self.train.weights),
            checkpoint_dir: self.checkpoint.then(|| self.out.join("checkpoints")),
            ..self.train.clone()
        }
    }

    pub fn vote_config(&self) -> VoteConfig {
        VoteConfig {
            seed: self.seed,
            activation: self.train.activation,
            ..self.vote.clone()
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    fn data_file(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit
            .clone()
            .or_else(|| self.data.as_ref().map(|d| d.join(name)))
    }

    pub fn nodes_path(&self) -> Option<PathBuf> {
        self.data_file(&self.nodes, "nodes.csv")
    }

    pub fn edges_path(&self) -> Option<PathBuf> {
        self.data_file(&self.edges, "edges.csv")
    }

    pub fn features_spec(&self) -> Option<String> {
        self.features.clone().or_else(|| {
            self.data
                .as_ref()
                .map(|d| d.join("features.csv").display().to_string())
        })
    }

    pub fn scores_path(&self) -> Option<PathBuf> {
        self.data_file(&self.scores, "scores.csv")
    }

    pub fn votes_path(&self) -> Option<PathBuf> {
        self.data_file(&self.votes, "votes.csv")
    }

    pub fn bills_path(&self) -> Option<PathBuf> {
        self.data_file(&self.bills, "bills.csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let c = RunConfig::parse(
            "# header\npreset = appendixB3\nlambda2 = 0.3  # tweak\n\nhidden=16\n",
        )
        .unwrap();
        assert_eq!(c.train.weights.lambda1, 1.0);
        assert_eq!(c.train.weights.lambda2, 0.3);
        assert_eq!(c.train.hidden, 16);
    }

    #[test]
    fn unknown_keys_and_bad_lines_fail() {
        assert!(RunConfig::parse("hiden = 16")
            .unwrap_err()
            .contains("unknown key \"hiden\""));
        assert!(RunConfig::parse("hidden 16").unwrap_err().contains(":1:"));
        assert!(RunConfig::parse("lr = fast").is_err());
        assert!(RunConfig::parse("preset = nope").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("preset = appendixB3\nseed = 9\nactivation = relu\nablate_relations = R1,R3\nmodel = m\n", "t")
            .unwrap();
        let back = RunConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
        assert_eq!(
            RunConfig::parse(&RunConfig::default().render()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn loss_combination_zeroes_weights() {
        let c = RunConfig::parse("losses = L1").unwrap();
        let w = c.train_config().weights;
        assert_eq!((w.lambda2, w.lambda3), (0.0, 0.0));
        assert_eq!(w.lambda1, 0.01);
    }
}
