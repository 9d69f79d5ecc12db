//! Typed heterogeneous information network.
//!
//! Edges are stored in the direction the schema gives them (actor to context)
//! but neighborhoods are undirected: `b` is an `r`-neighbor of `a` exactly
//! when an `r`-edge joins them in either direction.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::numkit::Matrix;
use crate::rng;

pub type EntityId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    OfficeTerm,
    Legislator,
    President,
    Governor,
    State,
    Institution,
    Justice,
    Party,
}

impl NodeKind {
    pub const ALL: [NodeKind; 8] = [
        NodeKind::OfficeTerm,
        NodeKind::Legislator,
        NodeKind::President,
        NodeKind::Governor,
        NodeKind::State,
        NodeKind::Institution,
        NodeKind::Justice,
        NodeKind::Party,
    ];

    /// File-format token.
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::OfficeTerm => "office_term",
            NodeKind::Legislator => "legislator",
            NodeKind::President => "president",
            NodeKind::Governor => "governor",
            NodeKind::State => "state",
            NodeKind::Institution => "institution",
            NodeKind::Justice => "justice",
            NodeKind::Party => "party",
        }
    }

    /// Legislators, presidents, governors and justices.
    pub fn is_actor(self) -> bool {
        matches!(
            self,
            NodeKind::Legislator | NodeKind::President | NodeKind::Governor | NodeKind::Justice
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = HinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HinError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    PartyAffiliation,
    HomeState,
    HoldOffice,
    TimeInOffice,
    Appoint,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        RelationKind::PartyAffiliation,
        RelationKind::HomeState,
        RelationKind::HoldOffice,
        RelationKind::TimeInOffice,
        RelationKind::Appoint,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `R1`..`R5`.
    pub fn code(self) -> &'static str {
        match self {
            RelationKind::PartyAffiliation => "R1",
            RelationKind::HomeState => "R2",
            RelationKind::HoldOffice => "R3",
            RelationKind::TimeInOffice => "R4",
            RelationKind::Appoint => "R5",
        }
    }

    /// Label of the schema equation constraining this relation's endpoints.
    pub fn equation(self) -> &'static str {
        match self {
            RelationKind::PartyAffiliation => "Eq 1",
            RelationKind::HomeState => "Eq 2",
            RelationKind::HoldOffice => "Eq 3",
            RelationKind::TimeInOffice => "Eq 4",
            RelationKind::Appoint => "Eq 5",
        }
    }

    /// Endpoint-kind predicate.
    pub fn admits(self, src: NodeKind, dst: NodeKind) -> bool {
        use NodeKind::*;
        let actor4 = matches!(src, Legislator | President | Governor | Justice);
        match self {
            RelationKind::PartyAffiliation => {
                matches!(src, Legislator | President | Governor) && dst == Party
            }
            RelationKind::HomeState => actor4 && dst == State,
            RelationKind::HoldOffice => actor4 && dst == Institution,
            RelationKind::TimeInOffice => actor4 && dst == OfficeTerm,
            RelationKind::Appoint => {
                matches!((src, dst), (President, Justice) | (Governor, Legislator))
            }
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RelationKind {
    type Err = HinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|r| r.code() == s)
            .ok_or_else(|| HinError::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum HinError {
    #[error("node name must be non-empty")]
    EmptyName,
    #[error("duplicate node ({kind}, {name:?})")]
    DuplicateNode { kind: NodeKind, name: String },
    #[error("unknown entity id {0}")]
    UnknownEntity(EntityId),
    #[error("schema violation ({equation}): {rel} does not admit {src_kind} -> {dst_kind}")]
    Schema {
        equation: &'static str,
        rel: RelationKind,
        src_kind: NodeKind,
        dst_kind: NodeKind,
    },
    #[error("duplicate edge ({src}, {dst}, {rel})")]
    DuplicateEdge {
        src: EntityId,
        dst: EntityId,
        rel: RelationKind,
    },
    #[error("unknown node kind {0:?}")]
    UnknownKind(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("feature matrix has {rows} rows for {nodes} nodes")]
    FeatureRows { rows: usize, nodes: usize },
    #[error("keep fraction {0} outside [0, 1]")]
    KeepFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct Hin {
    nodes: Vec<Node>,
    by_name: HashMap<(NodeKind, String), EntityId>,
    edges: [Vec<(EntityId, EntityId)>; 5],
    edge_set: HashSet<(EntityId, EntityId, RelationKind)>,
    // Sorted undirected adjacency per relation.
    adjacency: [Vec<Vec<EntityId>>; 5],
    features: Matrix,
}

impl Default for Hin {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for Hin {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.features == other.features
    }
}

impl Hin {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            by_name: HashMap::new(),
            edges: Default::default(),
            edge_set: HashSet::new(),
            adjacency: Default::default(),
            features: Matrix::zeros(0, 0),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: EntityId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn kind(&self, id: EntityId) -> NodeKind {
        self.nodes[id].kind
    }

    pub fn find(&self, kind: NodeKind, name: &str) -> Option<EntityId> {
        self.by_name.get(&(kind, name.to_string())).copied()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Ids of legislators, presidents, governors and justices.
    pub fn actor_ids(&self) -> Vec<EntityId> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind.is_actor())
            .collect()
    }

    pub fn add_node(&mut self, kind: NodeKind, name: &str) -> Result<EntityId, HinError> {
        if name.is_empty() {
            return Err(HinError::EmptyName);
        }
        let key = (kind, name.to_string());
        if self.by_name.contains_key(&key) {
            return Err(HinError::DuplicateNode {
                kind,
                name: name.to_string(),
            });
        }
        let id = self.nodes.len();
        self.by_name.insert(key, id);
        self.nodes.push(Node {
            kind,
            name: name.to_string(),
        });
        for adj in &mut self.adjacency {
            adj.push(Vec::new());
        }
        // Keep the row-count invariant; real features arrive via set_features.
        let d = self.features.cols();
        let mut data = std::mem::replace(&mut self.features, Matrix::zeros(0, 0)).into_vec();
        data.extend(std::iter::repeat_n(0.0, d));
        self.features =
            Matrix::from_vec(id + 1, d, data).expect("feature buffer sized to node count");
        Ok(id)
    }

    pub fn add_edge(
        &mut self,
        src: EntityId,
        dst: EntityId,
        rel: RelationKind,
    ) -> Result<(), HinError> {
        let sk = self
            .nodes
            .get(src)
            .ok_or(HinError::UnknownEntity(src))?
            .kind;
        let dk = self
            .nodes
            .get(dst)
            .ok_or(HinError::UnknownEntity(dst))?
            .kind;
        if !rel.admits(sk, dk) {
            return Err(HinError::Schema {
                equation: rel.equation(),
                rel,
                src_kind: sk,
                dst_kind: dk,
            });
        }
        if !self.edge_set.insert((src, dst, rel)) {
            return Err(HinError::DuplicateEdge { src, dst, rel });
        }
        self.edges[rel.index()].push((src, dst));
        let adj = &mut self.adjacency[rel.index()];
        for (a, b) in [(src, dst), (dst, src)] {
            if let Err(pos) = adj[a].binary_search(&b) {
                adj[a].insert(pos, b);
            }
        }
        Ok(())
    }

    pub fn set_features(&mut self, features: Matrix) -> Result<(), HinError> {
        if features.rows() != self.nodes.len() {
            return Err(HinError::FeatureRows {
                rows: features.rows(),
                nodes: self.nodes.len(),
            });
        }
        self.features = features;
        Ok(())
    }

    pub fn edges(&self, rel: RelationKind) -> &[(EntityId, EntityId)] {
        &self.edges[rel.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// `N_r(id)` in ascending order.
    pub fn neighbors(&self, id: EntityId, rel: RelationKind) -> &[EntityId] {
        &self.adjacency[rel.index()][id]
    }

    /// All `r`-neighborhoods, indexed by node.
    pub fn neighborhoods(&self, rel: RelationKind) -> &[Vec<EntityId>] {
        &self.adjacency[rel.index()]
    }

    /// Union of the neighborhoods over every relation, ascending.
    pub fn positive_set(&self, id: EntityId) -> Vec<EntityId> {
        let mut out: Vec<EntityId> = self
            .adjacency
            .iter()
            .flat_map(|adj| adj[id].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every node that is neither `id` nor in its positive set, ascending.
    pub fn negative_set(&self, id: EntityId) -> Vec<EntityId> {
        let pos = self.positive_set(id);
        (0..self.nodes.len())
            .filter(|&j| j != id && pos.binary_search(&j).is_err())
            .collect()
    }

    /// Re-checks every stored edge against the schema; returns the violations.
    pub fn validate(&self) -> Vec<HinError> {
        let mut out = Vec::new();
        for rel in RelationKind::ALL {
            for &(s, d) in self.edges(rel) {
                let (sk, dk) = (self.kind(s), self.kind(d));
                if !rel.admits(sk, dk) {
                    out.push(HinError::Schema {
                        equation: rel.equation(),
                        rel,
                        src_kind: sk,
                        dst_kind: dk,
                    });
                }
            }
        }
        if self.features.rows() != self.nodes.len() {
            out.push(HinError::FeatureRows {
                rows: self.features.rows(),
                nodes: self.nodes.len(),
            });
        }
        out
    }

    /// Copy of the graph keeping `round_half_up(keep * m)` uniformly chosen
    /// `rel` edges. The choice is a prefix of one seeded permutation, so a
    /// larger `keep` with the same seed always retains a superset.
    pub fn drop_relation_fraction(
        &self,
        rel: RelationKind,
        keep: f64,
        seed: u64,
    ) -> Result<Hin, HinError> {
        if !(0.0..=1.0).contains(&keep) {
            return Err(HinError::KeepFraction(keep));
        }
        let edges = self.edges(rel);
        let m = edges.len();
        let n_keep = ((keep * m as f64) + 0.5).floor() as usize;
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng::stream(
            rng::derive(seed, 0xD0),
            rel.index() as u64,
        ));
        let mut kept: Vec<usize> = order[..n_keep.min(m)].to_vec();
        kept.sort_unstable();

        let mut out = Hin::new();
        for n in &self.nodes {
            out.add_node(n.kind, &n.name)?;
        }
        for r in RelationKind::ALL {
            if r == rel {
                for &k in &kept {
                    let (s, d) = edges[k];
                    out.add_edge(s, d, r)?;
                }
            } else {
                for &(s, d) in self.edges(r) {
                    out.add_edge(s, d, r)?;
                }
            }
        }
        out.set_features(self.features.clone())?;
        Ok(out)
    }
}
