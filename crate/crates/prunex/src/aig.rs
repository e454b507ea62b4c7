//! And-Inverter Graph representation with structural hashing and
//! topological utilities.
//!
//! An [`Aig`] is a dense, topologically ordered array of nodes: node 0 is the
//! constant-false node, primary inputs follow, and every AND node's fanins
//! have strictly smaller ids. POs are complemented references into the node
//! array. Once built, an `Aig` is immutable; the resubstitution operator
//! mutates a working copy and hands back a fresh canonical `Aig`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index of a node inside an [`Aig`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const CONST0: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A possibly complemented reference to a node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Edge {
    pub id: NodeId,
    pub complemented: bool,
}

impl Edge {
    pub fn new(id: NodeId, complemented: bool) -> Self {
        Edge { id, complemented }
    }

    /// Plain (non-complemented) reference.
    pub fn to(id: NodeId) -> Self {
        Edge {
            id,
            complemented: false,
        }
    }

    /// Constant false as an edge.
    pub const FALSE: Edge = Edge {
        id: NodeId::CONST0,
        complemented: false,
    };

    /// Constant true as an edge (complemented constant false).
    pub const TRUE: Edge = Edge {
        id: NodeId::CONST0,
        complemented: true,
    };

    #[inline]
    pub fn negated(self) -> Self {
        Edge {
            id: self.id,
            complemented: !self.complemented,
        }
    }

    #[inline]
    pub fn xor_complement(self, c: bool) -> Self {
        Edge {
            id: self.id,
            complemented: self.complemented ^ c,
        }
    }
}

impl std::ops::Not for Edge {
    type Output = Edge;
    fn not(self) -> Edge {
        self.negated()
    }
}

/// One node of an AIG.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    /// Constant false; always node 0.
    Const0,
    /// Primary input.
    Pi,
    /// Two-input AND. Fanins are kept sorted by `(id, complemented)`.
    And { fanin0: Edge, fanin1: Edge },
}

impl Node {
    pub fn is_and(&self) -> bool {
        matches!(self, Node::And { .. })
    }

    pub fn is_pi(&self) -> bool {
        matches!(self, Node::Pi)
    }

    /// Fanins of an AND node, `None` otherwise.
    pub fn fanins(&self) -> Option<(Edge, Edge)> {
        match self {
            Node::And { fanin0, fanin1 } => Some((*fanin0, *fanin1)),
            _ => None,
        }
    }
}

/// Canonical fanin order: ascending `(id, complemented)`.
pub(crate) fn canon_fanins(a: Edge, b: Edge) -> (Edge, Edge) {
    if (a.id, a.complemented) <= (b.id, b.complemented) {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AigError {
    #[error("node {0} out of range")]
    IdOutOfRange(NodeId),
    #[error("node 0 must be the constant-false node")]
    BadConstNode,
    #[error("PI list does not match node kinds")]
    BadPiList,
    #[error("AND node {0} has fanin with id >= its own id")]
    FaninOrder(NodeId),
    #[error("AND node {0} has fanins out of canonical order")]
    FaninCanon(NodeId),
}

/// An immutable combinational And-Inverter Graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aig {
    nodes: Vec<Node>,
    pis: Vec<NodeId>,
    pos: Vec<Edge>,
    name: String,
}

impl Aig {
    pub(crate) fn from_parts(nodes: Vec<Node>, pis: Vec<NodeId>, pos: Vec<Edge>, name: String) -> Self {
        Aig {
            nodes,
            pis,
            pos,
            name,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn pis(&self) -> &[NodeId] {
        &self.pis
    }

    pub fn pi_count(&self) -> usize {
        self.pis.len()
    }

    pub fn pos(&self) -> &[Edge] {
        &self.pos
    }

    pub fn po_count(&self) -> usize {
        self.pos.len()
    }

    /// Number of AND nodes; the size metric used throughout.
    pub fn and_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_and()).count()
    }

    /// Ids of all AND nodes in ascending order.
    pub fn and_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_and())
            .map(|(i, _)| NodeId(i as u32))
    }

    /// Check the structural invariants: node 0 is the constant, ids are dense
    /// and topologically ordered, PIs have no fanins and AND fanins are in
    /// canonical order.
    pub fn validate(&self) -> Result<(), AigError> {
        if self.nodes.is_empty() || self.nodes[0] != Node::Const0 {
            return Err(AigError::BadConstNode);
        }
        let mut pis_seen = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            match node {
                Node::Const0 => {
                    if i != 0 {
                        return Err(AigError::BadConstNode);
                    }
                }
                Node::Pi => pis_seen.push(id),
                Node::And { fanin0, fanin1 } => {
                    for e in [fanin0, fanin1] {
                        if e.id.index() >= self.nodes.len() {
                            return Err(AigError::IdOutOfRange(e.id));
                        }
                        if e.id >= id {
                            return Err(AigError::FaninOrder(id));
                        }
                    }
                    if (fanin0.id, fanin0.complemented) > (fanin1.id, fanin1.complemented) {
                        return Err(AigError::FaninCanon(id));
                    }
                }
            }
        }
        if pis_seen != self.pis {
            return Err(AigError::BadPiList);
        }
        for po in &self.pos {
            if po.id.index() >= self.nodes.len() {
                return Err(AigError::IdOutOfRange(po.id));
            }
        }
        Ok(())
    }

    /// Level of every node: PIs and the constant are level 0, an AND is one
    /// more than the max of its fanin levels.
    pub fn node_levels(&self) -> Vec<u32> {
        let mut levels = vec![0u32; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::And { fanin0, fanin1 } = node {
                levels[i] = 1 + levels[fanin0.id.index()].max(levels[fanin1.id.index()]);
            }
        }
        levels
    }

    /// Circuit depth: maximum level over PO drivers.
    pub fn depth(&self) -> u32 {
        let levels = self.node_levels();
        self.pos
            .iter()
            .map(|po| levels[po.id.index()])
            .max()
            .unwrap_or(0)
    }

    /// Fanout index: for each node, the AND nodes and POs referencing it.
    pub fn fanout_index(&self) -> FanoutIndex {
        let mut readers = vec![Vec::new(); self.nodes.len()];
        let mut po_readers = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::And { fanin0, fanin1 } = node {
                readers[fanin0.id.index()].push(NodeId(i as u32));
                readers[fanin1.id.index()].push(NodeId(i as u32));
            }
        }
        for (k, po) in self.pos.iter().enumerate() {
            po_readers[po.id.index()].push(k);
        }
        FanoutIndex {
            readers,
            po_readers,
        }
    }

    /// Structural hashing: rebuilds the graph merging structurally identical
    /// AND nodes and propagating constants, then sweeps nodes unreachable
    /// from the POs. Functional equivalence is preserved.
    pub fn strash(&self) -> Aig {
        let mut b = AigBuilder::new(self.name.clone());
        let mut map: Vec<Edge> = Vec::with_capacity(self.nodes.len());
        map.push(Edge::FALSE);
        for node in &self.nodes[1..] {
            let e = match node {
                Node::Const0 => Edge::FALSE,
                Node::Pi => Edge::to(b.add_pi()),
                Node::And { fanin0, fanin1 } => {
                    let a = map[fanin0.id.index()].xor_complement(fanin0.complemented);
                    let c = map[fanin1.id.index()].xor_complement(fanin1.complemented);
                    b.and(a, c)
                }
            };
            map.push(e);
        }
        for po in &self.pos {
            b.add_po(map[po.id.index()].xor_complement(po.complemented));
        }
        b.finish().sweep()
    }

    /// Remove AND nodes not reachable from any PO, renumbering the survivors.
    /// PIs and the constant node are always kept.
    pub fn sweep(&self) -> Aig {
        let mut live = vec![false; self.nodes.len()];
        live[0] = true;
        for &pi in &self.pis {
            live[pi.index()] = true;
        }
        let mut stack: Vec<NodeId> = self.pos.iter().map(|e| e.id).collect();
        while let Some(id) = stack.pop() {
            if live[id.index()] {
                continue;
            }
            live[id.index()] = true;
            if let Node::And { fanin0, fanin1 } = &self.nodes[id.index()] {
                stack.push(fanin0.id);
                stack.push(fanin1.id);
            }
        }
        let mut remap = vec![NodeId::CONST0; self.nodes.len()];
        let mut nodes = Vec::new();
        let mut pis = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if !live[i] {
                continue;
            }
            remap[i] = NodeId(nodes.len() as u32);
            let remapped = match node {
                Node::Const0 => Node::Const0,
                Node::Pi => {
                    pis.push(remap[i]);
                    Node::Pi
                }
                Node::And { fanin0, fanin1 } => {
                    let (f0, f1) = canon_fanins(
                        Edge::new(remap[fanin0.id.index()], fanin0.complemented),
                        Edge::new(remap[fanin1.id.index()], fanin1.complemented),
                    );
                    Node::And {
                        fanin0: f0,
                        fanin1: f1,
                    }
                }
            };
            nodes.push(remapped);
        }
        let pos = self
            .pos
            .iter()
            .map(|po| Edge::new(remap[po.id.index()], po.complemented))
            .collect();
        Aig {
            nodes,
            pis,
            pos,
            name: self.name.clone(),
        }
    }
}

/// Fanout lists per node, split into AND readers and PO references.
#[derive(Clone, Debug)]
pub struct FanoutIndex {
    /// AND nodes referencing each node as a fanin.
    pub readers: Vec<Vec<NodeId>>,
    /// Indices of POs driven by each node.
    pub po_readers: Vec<Vec<usize>>,
}

impl FanoutIndex {
    /// Total fanout count of a node (AND references plus PO references).
    pub fn count(&self, id: NodeId) -> usize {
        self.readers[id.index()].len() + self.po_readers[id.index()].len()
    }

    /// Sum of all fanout list lengths; equals `2 * #AND + #PO`.
    pub fn total(&self) -> usize {
        self.readers.iter().map(Vec::len).sum::<usize>()
            + self.po_readers.iter().map(Vec::len).sum::<usize>()
    }
}

/// Incremental builder producing canonical [`Aig`]s.
///
/// `and` applies one-level structural hashing: constant propagation,
/// `AND(x, x) = x`, `AND(x, !x) = 0`, and merging of identical fanin pairs.
/// `and_raw` appends a node verbatim (used by the benchmark generators so
/// planted redundancy survives).
pub struct AigBuilder {
    nodes: Vec<Node>,
    pis: Vec<NodeId>,
    pos: Vec<Edge>,
    name: String,
    strash: HashMap<(Edge, Edge), NodeId>,
    hashing: bool,
}

impl AigBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        AigBuilder {
            nodes: vec![Node::Const0],
            pis: Vec::new(),
            pos: Vec::new(),
            name: name.into(),
            strash: HashMap::new(),
            hashing: true,
        }
    }

    /// Builder that appends AND nodes verbatim (no hashing, no folding).
    pub fn without_hashing(name: impl Into<String>) -> Self {
        let mut b = Self::new(name);
        b.hashing = false;
        b
    }

    pub fn add_pi(&mut self) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node::Pi);
        self.pis.push(id);
        id
    }

    pub fn and(&mut self, a: Edge, b: Edge) -> Edge {
        let (f0, f1) = canon_fanins(a, b);
        if self.hashing {
            // Constant and trivial-pair folding.
            if f0 == Edge::FALSE || f1 == Edge::FALSE {
                return Edge::FALSE;
            }
            if f0 == Edge::TRUE {
                return f1;
            }
            if f1 == Edge::TRUE {
                return f0;
            }
            if f0 == f1 {
                return f0;
            }
            if f0.id == f1.id {
                // Same node with opposite complements.
                return Edge::FALSE;
            }
            if let Some(&id) = self.strash.get(&(f0, f1)) {
                return Edge::to(id);
            }
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node::And {
            fanin0: f0,
            fanin1: f1,
        });
        if self.hashing {
            self.strash.insert((f0, f1), id);
        }
        Edge::to(id)
    }

    pub fn or(&mut self, a: Edge, b: Edge) -> Edge {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Edge, b: Edge) -> Edge {
        let nand = !self.and(a, b);
        let either = self.or(a, b);
        self.and(nand, either)
    }

    pub fn mux(&mut self, sel: Edge, t: Edge, f: Edge) -> Edge {
        let a = self.and(sel, t);
        let b = self.and(!sel, f);
        self.or(a, b)
    }

    pub fn add_po(&mut self, e: Edge) {
        self.pos.push(e);
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn and_count_so_far(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_and()).count()
    }

    pub fn finish(self) -> Aig {
        Aig {
            nodes: self.nodes,
            pis: self.pis,
            pos: self.pos,
            name: self.name,
        }
    }
}

/// Read access shared by the immutable [`Aig`] and the operator's working
/// graph, so windowing, simulation and feature extraction run on either.
pub trait GraphView {
    fn view_node_count(&self) -> usize;
    fn view_node(&self, id: NodeId) -> Node;
    /// Dead nodes are logically deleted but keep their id slot.
    fn view_is_live(&self, id: NodeId) -> bool;
    fn view_level(&self, id: NodeId) -> u32;
    fn view_fanout_count(&self, id: NodeId) -> usize;
    /// AND nodes (and POs) reading `id`, live only.
    fn view_readers(&self, id: NodeId) -> &[NodeId];
    fn view_depth(&self) -> u32;
    fn view_pos(&self) -> &[Edge];
}

/// An [`Aig`] bundled with its level and fanout indices for O(1) queries.
pub struct IndexedAig<'a> {
    pub aig: &'a Aig,
    pub levels: Vec<u32>,
    pub fanouts: FanoutIndex,
    depth: u32,
}

impl<'a> IndexedAig<'a> {
    pub fn new(aig: &'a Aig) -> Self {
        let levels = aig.node_levels();
        let fanouts = aig.fanout_index();
        let depth = aig
            .pos()
            .iter()
            .map(|po| levels[po.id.index()])
            .max()
            .unwrap_or(0);
        IndexedAig {
            aig,
            levels,
            fanouts,
            depth,
        }
    }
}

impl GraphView for IndexedAig<'_> {
    fn view_node_count(&self) -> usize {
        self.aig.node_count()
    }
    fn view_node(&self, id: NodeId) -> Node {
        *self.aig.node(id)
    }
    fn view_is_live(&self, _id: NodeId) -> bool {
        true
    }
    fn view_level(&self, id: NodeId) -> u32 {
        self.levels[id.index()]
    }
    fn view_fanout_count(&self, id: NodeId) -> usize {
        self.fanouts.count(id)
    }
    fn view_readers(&self, id: NodeId) -> &[NodeId] {
        &self.fanouts.readers[id.index()]
    }
    fn view_depth(&self) -> u32 {
        self.depth
    }
    fn view_pos(&self) -> &[Edge] {
        self.aig.pos()
    }
}
