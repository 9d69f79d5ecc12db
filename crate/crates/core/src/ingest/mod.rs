//! Graph, feature and think-tank score ingestion, label bucketing, splits,
//! and synthetic fixtures.

mod files;
mod synth;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

pub use files::{
    load_features, load_graph, load_scores, write_features, write_graph, write_scores,
    FeatureSource,
};
pub use synth::{community_class, random_hin, synth_features, synth_hin, SynthConfig, SynthGraph};

use crate::hin::{EntityId, HinError};
use crate::rng;

/// Number of ordinal stance classes.
pub const NUM_CLASSES: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Graph(#[from] HinError),
    #[error("score {0} outside [0, 1]")]
    ScoreRange(f64),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    Ratios([f64; 3]),
    #[error("{side} side has {count} labels; at least 3 are needed to split")]
    TooFewLabels { side: Side, count: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// AFL-CIO scores.
    Liberal,
    /// Heritage Action scores.
    Conservative,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Liberal, Side::Conservative];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Liberal => "liberal",
            Side::Conservative => "conservative",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "liberal" => Ok(Side::Liberal),
            "conservative" => Ok(Side::Conservative),
            other => Err(IngestError::Invalid(format!("unknown side {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertScore {
    pub entity: EntityId,
    pub side: Side,
    pub score: f64,
    pub term: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExpertLabel {
    pub entity: EntityId,
    pub side: Side,
    pub class: usize,
}

/// Maps a score in [0, 1] to one of five ordinal classes. Band edges belong
/// to the higher class: [0, .1) [.1, .25) [.25, .75) [.75, .9) [.9, 1].
pub fn bucket_score(s: f64) -> Result<usize, IngestError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(IngestError::ScoreRange(s));
    }
    Ok(match s {
        s if s < 0.1 => 0,
        s if s < 0.25 => 1,
        s if s < 0.75 => 2,
        s if s < 0.9 => 3,
        _ => 4,
    })
}

/// How several term scores for one (entity, side) become labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TermMode {
    /// Keep only the most recent term.
    #[default]
    Collapse,
    /// One labeled example per score row.
    Expand,
}

impl fmt::Display for TermMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermMode::Collapse => "collapse",
            TermMode::Expand => "expand",
        })
    }
}

impl FromStr for TermMode {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "collapse" => Ok(TermMode::Collapse),
            "expand" => Ok(TermMode::Expand),
            other => Err(IngestError::Invalid(format!("unknown term mode {other:?}"))),
        }
    }
}

// Terms sort by their leading integer ("114", "115th") when present, else
// lexically; a missing term is the oldest.
fn term_key(term: &Option<String>) -> (u8, i64, String) {
    match term {
        None => (0, 0, String::new()),
        Some(t) => {
            let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
            match digits.parse::<i64>() {
                Ok(n) => (1, n, t.clone()),
                Err(_) => (2, 0, t.clone()),
            }
        }
    }
}

pub fn labels_from_scores(
    scores: &[ExpertScore],
    mode: TermMode,
) -> Result<Vec<ExpertLabel>, IngestError> {
    let label = |s: &ExpertScore| -> Result<ExpertLabel, IngestError> {
        Ok(ExpertLabel {
            entity: s.entity,
            side: s.side,
            class: bucket_score(s.score)?,
        })
    };
    match mode {
        TermMode::Expand => scores.iter().map(label).collect(),
        TermMode::Collapse => {
            let mut latest: HashMap<(EntityId, Side), usize> = HashMap::new();
            let mut order = Vec::new();
            for (i, s) in scores.iter().enumerate() {
                match latest.get_mut(&(s.entity, s.side)) {
                    None => {
                        latest.insert((s.entity, s.side), i);
                        order.push((s.entity, s.side));
                    }
                    Some(j) => {
                        if term_key(&s.term) >= term_key(&scores[*j].term) {
                            *j = i;
                        }
                    }
                }
            }
            order.iter().map(|k| label(&scores[latest[k]])).collect()
        }
    }
}

/// Train / validation / test positions into a label list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SideSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Val,
    Test,
}

impl SideSplit {
    pub fn part(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }
}

/// Independent split of each side's labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub liberal: SideSplit,
    pub conservative: SideSplit,
}

impl SplitAssignment {
    pub fn side(&self, side: Side) -> &SideSplit {
        match side {
            Side::Liberal => &self.liberal,
            Side::Conservative => &self.conservative,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut SideSplit {
        match side {
            Side::Liberal => &mut self.liberal,
            Side::Conservative => &mut self.conservative,
        }
    }

    /// Labels of one side and part.
    pub fn labels<'a>(
        &'a self,
        labels: &'a [ExpertLabel],
        side: Side,
        part: Part,
    ) -> impl Iterator<Item = &'a ExpertLabel> + 'a {
        self.side(side).part(part).iter().map(move |&i| &labels[i])
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.2, 0.1];

/// Seeded per-side shuffle, then contiguous cuts at `floor(r0 n)` and
/// `floor((r0 + r1) n)`.
pub fn split_scores(
    labels: &[ExpertLabel],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, IngestError> {
    if ratios.iter().any(|&r| r <= 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(IngestError::Ratios(ratios));
    }
    let mut out = SplitAssignment::default();
    for (k, side) in Side::BOTH.into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i].side == side)
            .collect();
        let n = idx.len();
        if n < 3 {
            return Err(IngestError::TooFewLabels { side, count: n });
        }
        idx.shuffle(&mut rng::stream(rng::derive(seed, 0x5911), k as u64));
        // The small epsilon keeps e.g. 0.7 * 10 from landing on 6.999...
        let a = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
        let b = (((ratios[0] + ratios[1]) * n as f64) + 1e-9).floor() as usize;
        let s = out.side_mut(side);
        s.train = idx[..a].to_vec();
        s.val = idx[a..b].to_vec();
        s.test = idx[b..].to_vec();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bucket_examples() {
        assert_eq!(bucket_score(0.95).unwrap(), 4);
        assert_eq!(bucket_score(0.5).unwrap(), 2);
        assert_eq!(bucket_score(0.0).unwrap(), 0);
        assert_eq!(bucket_score(1.0).unwrap(), 4);
        assert!(bucket_score(1.0001).is_err());
        assert!(bucket_score(-0.1).is_err());
        assert!(bucket_score(f64::NAN).is_err());
    }

    fn labels(n_lib: usize, n_con: usize) -> Vec<ExpertLabel> {
        (0..n_lib)
            .map(|i| ExpertLabel {
                entity: i,
                side: Side::Liberal,
                class: i % 5,
            })
            .chain((0..n_con).map(|i| ExpertLabel {
                entity: i,
                side: Side::Conservative,
                class: i % 5,
            }))
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let l = labels(10, 10);
        let s = split_scores(&l, DEFAULT_RATIOS, 1).unwrap();
        for side in Side::BOTH {
            let p = s.side(side);
            assert_eq!((p.train.len(), p.val.len(), p.test.len()), (7, 2, 1));
        }
        assert_eq!(s, split_scores(&l, DEFAULT_RATIOS, 1).unwrap());
        assert!(matches!(
            split_scores(&labels(2, 10), DEFAULT_RATIOS, 1),
            Err(IngestError::TooFewLabels {
                side: Side::Liberal,
                count: 2
            })
        ));
        assert!(split_scores(&l, [0.5, 0.5, 0.1], 1).is_err());
    }

    #[test]
    fn collapse_keeps_latest_term() {
        let s = |score: f64, term: &str| ExpertScore {
            entity: 3,
            side: Side::Liberal,
            score,
            term: Some(term.to_string()),
        };
        let scores = vec![s(0.95, "116"), s(0.05, "114"), s(0.5, "115")];
        let c = labels_from_scores(&scores, TermMode::Collapse).unwrap();
        assert_eq!(
            c,
            vec![ExpertLabel {
                entity: 3,
                side: Side::Liberal,
                class: 4
            }]
        );
        let e = labels_from_scores(&scores, TermMode::Expand).unwrap();
        assert_eq!(e.iter().map(|l| l.class).collect::<Vec<_>>(), vec![4, 0, 2]);
    }

    proptest! {
        #[test]
        fn bucket_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(bucket_score(lo).unwrap() <= bucket_score(hi).unwrap());
        }

        #[test]
        fn split_is_a_partition(n_lib in 3usize..60, n_con in 3usize..60, seed in any::<u64>()) {
            let l = labels(n_lib, n_con);
            let s = split_scores(&l, DEFAULT_RATIOS, seed).unwrap();
            for side in Side::BOTH {
                let p = s.side(side);
                let mut all: Vec<usize> = p.train.iter().chain(&p.val).chain(&p.test).copied().collect();
                all.sort_unstable();
                let expected: Vec<usize> = (0..l.len()).filter(|&i| l[i].side == side).collect();
                prop_assert_eq!(all, expected);
            }
        }
    }
}
