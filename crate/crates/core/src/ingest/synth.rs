//! Planted-partition fixtures.
//!
//! Actors are dealt round-robin into communities. Every actor joins its
//! community's party hub (R1); a fraction also holds office at the
//! community's institution hub (R3). Home states (R2) and office terms (R4)
//! are drawn uniformly and carry no community signal. Every
//! `governor_every`-th actor is a governor who appoints (R5) the previous
//! legislator of the same community.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ExpertScore, Side};
use crate::hin::{EntityId, Hin, NodeKind, RelationKind};
use crate::numkit::Matrix;
use crate::rng;

/// Deterministic standard-normal features; row `i` depends only on
/// `(seed, i)`.
pub fn synth_features(n: usize, d_in: usize, seed: u64) -> Matrix {
    let base = rng::derive(seed, 0xFEA7);
    let mut m = Matrix::zeros(n, d_in);
    for i in 0..n {
        let mut r = rng::stream(base, i as u64);
        for v in m.row_mut(i) {
            *v = StandardNormal.sample(&mut r);
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_actors: usize,
    /// Shared state and office-term nodes.
    pub n_context: usize,
    pub d_in: usize,
    pub n_communities: usize,
    /// Probability that a score is replaced by another community's value.
    pub flip_prob: f64,
    pub seed: u64,
    /// Distance between community feature means.
    pub feature_signal: f64,
    /// Probability that an actor is wired to its community's institution hub.
    pub institution_rate: f64,
    /// Every n-th actor is a governor; 0 disables governors.
    pub governor_every: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_actors: 200,
            n_context: 20,
            d_in: 32,
            n_communities: 2,
            flip_prob: 0.05,
            seed: 0,
            feature_signal: 1.0,
            institution_rate: 0.3,
            governor_every: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthGraph {
    pub hin: Hin,
    /// Scores after label noise.
    pub scores: Vec<ExpertScore>,
    /// The planted scores, before noise. Same order as `scores`.
    pub clean_scores: Vec<ExpertScore>,
    /// Planted community per node; `None` for context nodes.
    pub community: Vec<Option<usize>>,
    /// Community hub (party) node ids.
    pub parties: Vec<EntityId>,
}

const BANDS: [(f64, f64); 5] = [
    (0.0, 0.1),
    (0.1, 0.25),
    (0.25, 0.75),
    (0.75, 0.9),
    (0.9, 1.0),
];

/// Planted liberal class of community `c` of `k`: spread evenly over 0..=4.
pub fn community_class(c: usize, k: usize) -> usize {
    if k <= 1 {
        return 2;
    }
    ((c as f64 * 4.0 / (k - 1) as f64) + 0.5).floor() as usize
}

// A score from the inner 80% of a class band, clear of either edge.
fn score_in_class(class: usize, r: &mut impl Rng) -> f64 {
    let (lo, hi) = BANDS[class];
    let w = hi - lo;
    lo + 0.1 * w + 0.8 * w * r.random::<f64>()
}

/// Builds the planted-partition graph and its think-tank scores.
///
/// # Panics
/// If `n_communities < 2` or `flip_prob` is outside `[0, 0.5)`.
pub fn synth_hin(cfg: &SynthConfig) -> SynthGraph {
    assert!(cfg.n_communities >= 2, "need at least two communities");
    assert!(
        (0.0..0.5).contains(&cfg.flip_prob),
        "flip_prob must be in [0, 0.5)"
    );
    let k = cfg.n_communities;
    let mut wiring = rng::seeded(rng::derive(cfg.seed, 0x3D6E));
    let mut hin = Hin::new();

    let parties: Vec<EntityId> = (0..k)
        .map(|c| {
            hin.add_node(NodeKind::Party, &format!("party-{c}"))
                .unwrap()
        })
        .collect();
    let institutions: Vec<EntityId> = (0..k)
        .map(|c| {
            hin.add_node(NodeKind::Institution, &format!("institution-{c}"))
                .unwrap()
        })
        .collect();
    let n_terms = if cfg.n_context == 0 {
        0
    } else {
        (cfg.n_context / 4).clamp(1, 4)
    };
    let terms: Vec<EntityId> = (0..n_terms)
        .map(|t| {
            hin.add_node(NodeKind::OfficeTerm, &format!("term-{}", 114 + t))
                .unwrap()
        })
        .collect();
    let states: Vec<EntityId> = (0..cfg.n_context - n_terms)
        .map(|s| {
            hin.add_node(NodeKind::State, &format!("state-{s}"))
                .unwrap()
        })
        .collect();

    let mut actors = Vec::with_capacity(cfg.n_actors);
    for i in 0..cfg.n_actors {
        let governor = cfg.governor_every > 0 && i % cfg.governor_every == cfg.governor_every - 1;
        let (kind, name) = if governor {
            (NodeKind::Governor, format!("governor-{i}"))
        } else {
            (NodeKind::Legislator, format!("legislator-{i}"))
        };
        actors.push(hin.add_node(kind, &name).unwrap());
    }

    let mut community = vec![None; hin.node_count()];
    for (i, &a) in actors.iter().enumerate() {
        let c = i % k;
        community[a] = Some(c);
        hin.add_edge(a, parties[c], RelationKind::PartyAffiliation)
            .unwrap();
        if wiring.random::<f64>() < cfg.institution_rate {
            hin.add_edge(a, institutions[c], RelationKind::HoldOffice)
                .unwrap();
        }
        if !states.is_empty() {
            let s = states[wiring.random_range(0..states.len())];
            hin.add_edge(a, s, RelationKind::HomeState).unwrap();
        }
        if !terms.is_empty() {
            let t = terms[wiring.random_range(0..terms.len())];
            hin.add_edge(a, t, RelationKind::TimeInOffice).unwrap();
        }
        if hin.kind(a) == NodeKind::Governor && i >= k {
            let prev = actors[i - k];
            if hin.kind(prev) == NodeKind::Legislator {
                hin.add_edge(a, prev, RelationKind::Appoint).unwrap();
            }
        }
    }

    let mut feats = synth_features(hin.node_count(), cfg.d_in, cfg.seed);
    if cfg.d_in > 0 {
        let shift = cfg.feature_signal / std::f64::consts::SQRT_2;
        for &a in &actors {
            let c = community[a].unwrap();
            let v = feats.get(a, c % cfg.d_in);
            feats.set(a, c % cfg.d_in, v + shift);
        }
    }
    hin.set_features(feats).unwrap();

    let mut draw = rng::seeded(rng::derive(cfg.seed, 0x5C0E));
    let mut scores = Vec::new();
    let mut clean_scores = Vec::new();
    for &a in &actors {
        if hin.kind(a) != NodeKind::Legislator {
            continue;
        }
        let c = community[a].unwrap();
        let lib = score_in_class(community_class(c, k), &mut draw);
        for (side, clean) in [(Side::Liberal, lib), (Side::Conservative, 1.0 - lib)] {
            let mut noisy = clean;
            if draw.random::<f64>() < cfg.flip_prob {
                let other = (c + 1 + draw.random_range(0..k - 1)) % k;
                let class = community_class(other, k);
                let class = if side == Side::Liberal {
                    class
                } else {
                    4 - class
                };
                noisy = score_in_class(class, &mut draw);
            }
            let mk = |score| ExpertScore {
                entity: a,
                side,
                score,
                term: None,
            };
            scores.push(mk(noisy));
            clean_scores.push(mk(clean));
        }
    }

    SynthGraph {
        hin,
        scores,
        clean_scores,
        community,
        parties,
    }
}

/// Small random graph for gradient checks: one hub per context kind, the
/// remaining nodes are legislators (the last one a governor). Each actor is
/// wired to the hub of every relation in `relations` with probability 0.6;
/// the governor appoints a random legislator when `Appoint` is included.
///
/// # Panics
/// If `n_nodes < 6`.
pub fn random_hin(n_nodes: usize, relations: &[RelationKind], d_in: usize, seed: u64) -> Hin {
    assert!(n_nodes >= 6, "need at least 6 nodes");
    let mut r = rng::seeded(rng::derive(seed, 0x7A11));
    let mut hin = Hin::new();
    let hubs = [
        (NodeKind::Party, RelationKind::PartyAffiliation),
        (NodeKind::State, RelationKind::HomeState),
        (NodeKind::Institution, RelationKind::HoldOffice),
        (NodeKind::OfficeTerm, RelationKind::TimeInOffice),
    ]
    .map(|(kind, rel)| (hin.add_node(kind, kind.as_str()).unwrap(), rel));
    let n_actors = n_nodes - hubs.len();
    let actors: Vec<EntityId> = (0..n_actors)
        .map(|i| {
            let kind = if i + 1 == n_actors {
                NodeKind::Governor
            } else {
                NodeKind::Legislator
            };
            hin.add_node(kind, &format!("actor-{i}")).unwrap()
        })
        .collect();
    for &a in &actors {
        for &(hub, rel) in &hubs {
            if relations.contains(&rel) && r.random::<f64>() < 0.6 {
                hin.add_edge(a, hub, rel).unwrap();
            }
        }
    }
    if relations.contains(&RelationKind::Appoint) {
        let gov = actors[n_actors - 1];
        let target = actors[r.random_range(0..n_actors - 1)];
        hin.add_edge(gov, target, RelationKind::Appoint).unwrap();
    }
    hin.set_features(synth_features(n_nodes, d_in, seed))
        .unwrap();
    hin
}
