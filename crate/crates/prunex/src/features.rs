//! Per-node feature vectors and bipartite subgraph construction.
//!
//! Every node gets a 20-channel vector: an 8-channel root block (fanin
//! complement flags, fanout count, level, circuit depth, node id, window
//! leaf and divisor counts) followed by two 6-channel child blocks (the same
//! structural channels for each fanin, without the window counts). A window
//! becomes a fully connected bipartite graph: one root row `T`, the window's
//! other nodes as rows of `C`, adjacency implicitly all-ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::{GraphView, Node, NodeId};
use crate::resub::Window;

/// Number of feature channels per node.
pub const FEAT_DIM: usize = 20;

/// Channels holding node ids; normalized per circuit at extraction time so
/// they cannot encode absolute circuit identity.
pub const NODE_ID_CHANNELS: [usize; 3] = [5, 13, 19];

/// Channel names in storage order.
pub const CHANNEL_NAMES: [&str; FEAT_DIM] = [
    "inv0",
    "inv1",
    "fanout_count",
    "level",
    "total_level",
    "node_id",
    "leaves_count",
    "divisor_count",
    "c1_inv0",
    "c1_inv1",
    "c1_fanout_count",
    "c1_level",
    "c1_total_level",
    "c1_node_id",
    "c2_inv0",
    "c2_inv1",
    "c2_fanout_count",
    "c2_level",
    "c2_total_level",
    "c2_node_id",
];

/// A 20-channel feature vector.
pub type NodeFeatures = [f64; FEAT_DIM];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("features are defined for AND nodes only, got {0}")]
    NotAnAnd(NodeId),
    #[error("cannot fit normalization stats on an empty dataset")]
    EmptyDataset,
}

fn id_norm(id: NodeId, max_id: usize) -> f64 {
    if max_id == 0 {
        0.0
    } else {
        id.index() as f64 / max_id as f64
    }
}

/// Child block: complement flags of the child's own fanins (zero for PIs),
/// fanout count, level, circuit depth, normalized id.
fn child_block(view: &impl GraphView, id: NodeId, out: &mut [f64]) {
    let max_id = view.view_node_count() - 1;
    let (i0, i1) = match view.view_node(id) {
        Node::And { fanin0, fanin1 } => (fanin0.complemented as u8, fanin1.complemented as u8),
        _ => (0, 0),
    };
    out[0] = i0 as f64;
    out[1] = i1 as f64;
    out[2] = view.view_fanout_count(id) as f64;
    out[3] = view.view_level(id) as f64;
    out[4] = view.view_depth() as f64;
    out[5] = id_norm(id, max_id);
}

fn node_features(
    view: &impl GraphView,
    id: NodeId,
    leaves_count: usize,
    divisor_count: usize,
) -> NodeFeatures {
    let mut f = [0.0; FEAT_DIM];
    let max_id = view.view_node_count() - 1;
    if let Node::And { fanin0, fanin1 } = view.view_node(id) {
        f[0] = fanin0.complemented as u8 as f64;
        f[1] = fanin1.complemented as u8 as f64;
        child_block(view, fanin0.id, &mut f[8..14]);
        child_block(view, fanin1.id, &mut f[14..20]);
    }
    f[2] = view.view_fanout_count(id) as f64;
    f[3] = view.view_level(id) as f64;
    f[4] = view.view_depth() as f64;
    f[5] = id_norm(id, max_id);
    f[6] = leaves_count as f64;
    f[7] = divisor_count as f64;
    f
}

/// Features of a window root. Errors on PI/constant nodes: no transformation
/// is ever attempted there, so no features are defined.
pub fn extract_features(
    view: &impl GraphView,
    node: NodeId,
    window: &Window,
) -> Result<NodeFeatures, FeatureError> {
    if !view.view_node(node).is_and() {
        return Err(FeatureError::NotAnAnd(node));
    }
    Ok(node_features(
        view,
        node,
        window.leaves.len(),
        window.divisors.len(),
    ))
}

/// A window rendered as a fully connected bipartite graph.
///
/// `t` is the root's feature row and `c` the non-root rows; the adjacency is
/// all-ones by construction, so only the row count `m` is materialized.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BipartiteSubgraph {
    pub t: NodeFeatures,
    pub c: Vec<NodeFeatures>,
}

impl BipartiteSubgraph {
    pub fn m(&self) -> usize {
        self.c.len()
    }

    /// The all-ones 1×m adjacency row.
    pub fn adjacency(&self) -> Vec<f64> {
        vec![1.0; self.c.len()]
    }
}

/// Build the bipartite graph for a collected window. Non-root rows cover the
/// window's divisors and leaves in (level, id) order, truncated at `m_max`;
/// their window-count channels are zero (those are root-window quantities).
pub fn build_bipartite(
    view: &impl GraphView,
    window: &Window,
    m_max: usize,
) -> BipartiteSubgraph {
    let t = node_features(view, window.root, window.leaves.len(), window.divisors.len());
    let mut members: Vec<NodeId> = window
        .divisors
        .iter()
        .chain(window.leaves.iter())
        .copied()
        .collect();
    members.sort_by_key(|id| (view.view_level(*id), *id));
    members.dedup();
    members.truncate(m_max);
    let c = members
        .iter()
        .map(|&id| node_features(view, id, 0, 0))
        .collect();
    BipartiteSubgraph { t, c }
}

/// Per-channel min/max statistics fitted on training data.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MinMaxStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxStats {
    /// Fit over every row (root and non-root) of the given subgraphs.
    pub fn fit<'a>(
        samples: impl IntoIterator<Item = &'a BipartiteSubgraph>,
    ) -> Result<Self, FeatureError> {
        let mut mins = vec![f64::INFINITY; FEAT_DIM];
        let mut maxs = vec![f64::NEG_INFINITY; FEAT_DIM];
        let mut seen = false;
        for s in samples {
            for row in std::iter::once(&s.t).chain(s.c.iter()) {
                seen = true;
                for (k, v) in row.iter().enumerate() {
                    mins[k] = mins[k].min(*v);
                    maxs[k] = maxs[k].max(*v);
                }
            }
        }
        if !seen {
            return Err(FeatureError::EmptyDataset);
        }
        Ok(MinMaxStats { mins, maxs })
    }

    /// Scale one channel into [0, 1]: constant channels map to 0, values
    /// outside the training range clamp.
    #[inline]
    pub fn scale(&self, channel: usize, value: f64) -> f64 {
        let (lo, hi) = (self.mins[channel], self.maxs[channel]);
        if hi <= lo {
            0.0
        } else {
            ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn apply_row(&self, row: &NodeFeatures) -> NodeFeatures {
        let mut out = [0.0; FEAT_DIM];
        for (k, v) in row.iter().enumerate() {
            out[k] = self.scale(k, *v);
        }
        out
    }

    pub fn apply(&self, x: &BipartiteSubgraph) -> BipartiteSubgraph {
        BipartiteSubgraph {
            t: self.apply_row(&x.t),
            c: x.c.iter().map(|r| self.apply_row(r)).collect(),
        }
    }
}
