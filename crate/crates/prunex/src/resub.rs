//! Windowed resubstitution: the node-level transformation operator.
//!
//! The operator visits AND nodes in ascending id order. At each root it
//! collects a window (leaves, divisors, MFFC), then tries to re-express the
//! root over existing divisors — first as a single possibly-complemented
//! divisor (zero-resub), then as one new AND/OR gate over a divisor pair
//! (one-resub). A transformation is effective when it strictly reduces the
//! live AND count; the per-node effective/ineffective labels drive the
//! offline training data and the online pruned runs.
//!
//! Mutation goes through [`WorkGraph`], the single-writer working copy.
//! Node deletion is logical (dead slots keep their ids so labels and
//! predictions stay aligned); `finish` compacts back to a canonical [`Aig`].

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::{canon_fanins, Aig, Edge, GraphView, Node, NodeId};
use crate::sim::{window_truth_tables, TruthTable};

/// Budgets for window collection and the transform search.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct OperatorParams {
    /// Maximum window leaf count (truth-table variables), at most 16.
    pub k_leaves: usize,
    /// Fanin-side hop budget for window collection.
    pub m_distance: usize,
    /// Deterministic cap on the divisor list.
    pub max_divisors: usize,
    /// Accept gain-0 rewrites too (they are still labeled ineffective).
    pub zero_cost: bool,
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams {
            k_leaves: 12,
            m_distance: 3,
            max_divisors: 150,
            zero_cost: false,
        }
    }
}

/// The local subgraph a transformation is evaluated on.
#[derive(Clone, Debug)]
pub struct Window {
    pub root: NodeId,
    /// Cut dominating the root and all divisors; variable order of the
    /// window truth tables. Ascending id.
    pub leaves: Vec<NodeId>,
    /// Candidate replacement inputs, sorted by (level, id) and truncated.
    pub divisors: Vec<NodeId>,
    /// Maximum fanout-free cone of the root (includes the root).
    pub mffc: BTreeSet<NodeId>,
    /// Effective hop budget actually used.
    pub distance: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    None,
    ZeroResub,
    OneResub,
}

/// Result of attempting a transformation at one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransformOutcome {
    pub node: NodeId,
    pub effective: bool,
    /// AND nodes removed net of nodes added; never negative.
    pub gain: usize,
    pub kind: TransformKind,
}

impl TransformOutcome {
    fn ineffective(node: NodeId) -> Self {
        TransformOutcome {
            node,
            effective: false,
            gain: 0,
            kind: TransformKind::None,
        }
    }
}

/// How to rewire the root's fanouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Replacement {
    /// Point fanouts at an existing divisor.
    Existing(Edge),
    /// Add one AND gate over two divisor edges, then point fanouts at it
    /// (complemented for the OR forms).
    NewAnd { a: Edge, b: Edge, complemented: bool },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("root {0} is not a live AND node")]
    BadRoot(NodeId),
    #[error("replacement references dead node {0}; outcome is stale, re-window the root")]
    StaleReplacement(NodeId),
}

/// Single-writer mutable working copy of an [`Aig`].
///
/// Fanin edges may become id-unordered while transforms rewire fanouts (a
/// divisor can sit above its new fanouts); the graph stays acyclic because
/// divisor levels never exceed the root level. [`WorkGraph::finish`] restores
/// dense topological ids.
pub struct WorkGraph {
    nodes: Vec<Node>,
    dead: Vec<bool>,
    pis: Vec<NodeId>,
    pos: Vec<Edge>,
    /// Live AND nodes referencing each node, one entry per fanin edge.
    readers: Vec<Vec<NodeId>>,
    /// Number of POs driven by each node.
    po_refs: Vec<u32>,
    levels: Vec<u32>,
    depth: u32,
    live_ands: usize,
    name: String,
}

impl WorkGraph {
    pub fn new(aig: &Aig) -> Self {
        let n = aig.node_count();
        let mut readers = vec![Vec::new(); n];
        let mut po_refs = vec![0u32; n];
        for (i, node) in aig.nodes().iter().enumerate() {
            if let Node::And { fanin0, fanin1 } = node {
                readers[fanin0.id.index()].push(NodeId(i as u32));
                readers[fanin1.id.index()].push(NodeId(i as u32));
            }
        }
        for po in aig.pos() {
            po_refs[po.id.index()] += 1;
        }
        let levels = aig.node_levels();
        let depth = aig.depth();
        WorkGraph {
            nodes: aig.nodes().to_vec(),
            dead: vec![false; n],
            pis: aig.pis().to_vec(),
            pos: aig.pos().to_vec(),
            readers,
            po_refs,
            levels,
            depth,
            live_ands: aig.and_count(),
            name: aig.name().to_string(),
        }
    }

    pub fn live_and_count(&self) -> usize {
        self.live_ands
    }

    pub fn is_live(&self, id: NodeId) -> bool {
        !self.dead[id.index()]
    }

    /// Live fanout reference count (fanin edges plus PO references).
    fn ref_count(&self, id: NodeId) -> usize {
        self.readers[id.index()].len() + self.po_refs[id.index()] as usize
    }

    /// Maximum fanout-free cone of `root`: the AND nodes (root included)
    /// whose every fanout path runs through `root`; deleting the root deletes
    /// exactly this set.
    pub fn mffc(&self, root: NodeId) -> BTreeSet<NodeId> {
        debug_assert!(self.nodes[root.index()].is_and() && self.is_live(root));
        let mut cone = BTreeSet::from([root]);
        let mut dec: HashMap<NodeId, usize> = HashMap::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let (f0, f1) = self.nodes[id.index()].fanins().unwrap();
            for e in [f0, f1] {
                if !self.nodes[e.id.index()].is_and() {
                    continue;
                }
                let d = dec.entry(e.id).or_insert(0);
                *d += 1;
                if *d == self.ref_count(e.id) && cone.insert(e.id) {
                    stack.push(e.id);
                }
            }
        }
        cone
    }

    fn recompute_levels(&mut self) {
        // Fanin ids may be unordered mid-run, so memoize over an explicit
        // traversal instead of a single id-order pass.
        let n = self.nodes.len();
        let mut levels = vec![u32::MAX; n];
        for i in 0..n {
            if !self.nodes[i].is_and() || self.dead[i] {
                levels[i] = 0;
                continue;
            }
            if levels[i] != u32::MAX {
                continue;
            }
            let mut stack = vec![(NodeId(i as u32), false)];
            while let Some((id, expanded)) = stack.pop() {
                let idx = id.index();
                if levels[idx] != u32::MAX && !expanded {
                    continue;
                }
                match self.nodes[idx] {
                    Node::And { fanin0, fanin1 } => {
                        if expanded {
                            levels[idx] =
                                1 + levels[fanin0.id.index()].max(levels[fanin1.id.index()]);
                        } else {
                            stack.push((id, true));
                            for e in [fanin0, fanin1] {
                                if levels[e.id.index()] == u32::MAX {
                                    stack.push((e.id, false));
                                }
                            }
                        }
                    }
                    _ => levels[idx] = 0,
                }
            }
        }
        self.levels = levels;
        self.depth = self
            .pos
            .iter()
            .map(|po| self.levels[po.id.index()])
            .max()
            .unwrap_or(0);
    }

    /// Rewire the root's fanouts to `replacement`, mark the MFFC dead.
    /// Returns the net AND-count reduction.
    pub fn apply_transform(
        &mut self,
        root: NodeId,
        replacement: &Replacement,
    ) -> Result<usize, ApplyError> {
        if !self.nodes[root.index()].is_and() || self.dead[root.index()] {
            return Err(ApplyError::BadRoot(root));
        }
        let repl_edge = match *replacement {
            Replacement::Existing(e) => {
                if self.dead[e.id.index()] {
                    return Err(ApplyError::StaleReplacement(e.id));
                }
                e
            }
            Replacement::NewAnd { a, b, complemented } => {
                for e in [a, b] {
                    if self.dead[e.id.index()] {
                        return Err(ApplyError::StaleReplacement(e.id));
                    }
                }
                let id = NodeId(self.nodes.len() as u32);
                let (f0, f1) = canon_fanins(a, b);
                self.nodes.push(Node::And {
                    fanin0: f0,
                    fanin1: f1,
                });
                self.dead.push(false);
                self.readers.push(Vec::new());
                self.po_refs.push(0);
                self.levels.push(0);
                self.readers[f0.id.index()].push(id);
                self.readers[f1.id.index()].push(id);
                self.live_ands += 1;
                Edge::new(id, complemented)
            }
        };

        let mffc = self.mffc(root);
        debug_assert!(!mffc.contains(&repl_edge.id));

        // Move every fanout edge of the root onto the replacement.
        let fanouts = std::mem::take(&mut self.readers[root.index()]);
        for f in &fanouts {
            let (f0, f1) = self.nodes[f.index()].fanins().unwrap();
            let sub = |e: Edge| {
                if e.id == root {
                    repl_edge.xor_complement(e.complemented)
                } else {
                    e
                }
            };
            let (n0, n1) = canon_fanins(sub(f0), sub(f1));
            self.nodes[f.index()] = Node::And {
                fanin0: n0,
                fanin1: n1,
            };
            self.readers[repl_edge.id.index()].push(*f);
        }
        for po in &mut self.pos {
            if po.id == root {
                let c = po.complemented;
                *po = repl_edge.xor_complement(c);
                self.po_refs[root.index()] -= 1;
                self.po_refs[repl_edge.id.index()] += 1;
            }
        }

        // Retire the cone.
        for &id in &mffc {
            let (f0, f1) = self.nodes[id.index()].fanins().unwrap();
            for e in [f0, f1] {
                let rs = &mut self.readers[e.id.index()];
                if let Some(pos) = rs.iter().position(|r| *r == id) {
                    rs.swap_remove(pos);
                }
            }
            self.dead[id.index()] = true;
        }
        self.live_ands -= mffc.len();
        self.recompute_levels();

        let added = matches!(replacement, Replacement::NewAnd { .. }) as usize;
        Ok(mffc.len() - added)
    }

    /// Compact back to a canonical [`Aig`]: drop dead nodes and renumber the
    /// survivors topologically. Kahn's algorithm with a min-heap on the old
    /// ids keeps the numbering of an untouched graph byte-identical and makes
    /// the output deterministic after any transform sequence.
    pub fn finish(&self) -> Aig {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let n = self.nodes.len();
        let mut remap: Vec<Option<NodeId>> = vec![None; n];
        let mut nodes = vec![Node::Const0];
        remap[0] = Some(NodeId::CONST0);
        let mut pis = Vec::with_capacity(self.pis.len());
        for &pi in &self.pis {
            let id = NodeId(nodes.len() as u32);
            nodes.push(Node::Pi);
            remap[pi.index()] = Some(id);
            pis.push(id);
        }
        let mut indeg = vec![0u8; n];
        let mut ready = BinaryHeap::new();
        for i in 0..n {
            if self.dead[i] || !self.nodes[i].is_and() {
                continue;
            }
            let (f0, f1) = self.nodes[i].fanins().unwrap();
            let d = [f0, f1]
                .iter()
                .filter(|e| self.nodes[e.id.index()].is_and() && !self.dead[e.id.index()])
                .count() as u8;
            indeg[i] = d;
            if d == 0 {
                ready.push(Reverse(NodeId(i as u32)));
            }
        }
        let mut order: Vec<NodeId> = Vec::new();
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for &r in &self.readers[id.index()] {
                let idx = r.index();
                indeg[idx] -= 1;
                if indeg[idx] == 0 {
                    ready.push(Reverse(r));
                }
            }
        }
        debug_assert_eq!(order.len(), self.live_ands);
        for id in order {
            let (f0, f1) = self.nodes[id.index()].fanins().unwrap();
            let map = |e: Edge| Edge::new(remap[e.id.index()].unwrap(), e.complemented);
            let (n0, n1) = canon_fanins(map(f0), map(f1));
            remap[id.index()] = Some(NodeId(nodes.len() as u32));
            nodes.push(Node::And {
                fanin0: n0,
                fanin1: n1,
            });
        }
        let pos = self
            .pos
            .iter()
            .map(|po| Edge::new(remap[po.id.index()].unwrap(), po.complemented))
            .collect();
        let aig = Aig::from_parts(nodes, pis, pos, self.name.clone());
        debug_assert!(aig.validate().is_ok());
        aig
    }
}

impl GraphView for WorkGraph {
    fn view_node_count(&self) -> usize {
        self.nodes.len()
    }
    fn view_node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }
    fn view_is_live(&self, id: NodeId) -> bool {
        !self.dead[id.index()]
    }
    fn view_level(&self, id: NodeId) -> u32 {
        self.levels[id.index()]
    }
    fn view_fanout_count(&self, id: NodeId) -> usize {
        self.ref_count(id)
    }
    fn view_readers(&self, id: NodeId) -> &[NodeId] {
        &self.readers[id.index()]
    }
    fn view_depth(&self) -> u32 {
        self.depth
    }
    fn view_pos(&self) -> &[Edge] {
        &self.pos
    }
}

/// Collect the window rooted at `root`.
///
/// Leaves are the frontier of the fanin-side region within the hop budget
/// (shrunk until the leaf count fits `k_leaves`). Divisors are the interior
/// cone nodes plus side-output nodes reachable on the fanout direction whose
/// fanins stay inside the window and whose level does not exceed the root's;
/// this keeps every divisor's truth table expressible over the leaves. The
/// root and its MFFC are never divisors. Never fails: worst case the window
/// has the two fanins as leaves and no divisors.
pub fn collect_window(view: &impl GraphView, root: NodeId, params: &OperatorParams) -> Window {
    debug_assert!(view.view_node(root).is_and() && view.view_is_live(root));
    let k_leaves = params.k_leaves.clamp(2, crate::sim::MAX_TT_VARS);
    let m = params.m_distance;
    let mffc = mffc_of_view(view, root);

    if m == 0 {
        let (f0, f1) = view.view_node(root).fanins().unwrap();
        let mut leaves = vec![f0.id, f1.id];
        leaves.sort_unstable();
        leaves.dedup();
        return Window {
            root,
            leaves,
            divisors: Vec::new(),
            mffc,
            distance: 0,
        };
    }

    // Min-distance BFS on the fanin side.
    let mut dist: HashMap<NodeId, usize> = HashMap::from([(root, 0)]);
    let mut frontier = vec![root];
    for d in 1..=m {
        let mut next = Vec::new();
        for &id in &frontier {
            if let Some((f0, f1)) = view.view_node(id).fanins() {
                for e in [f0, f1] {
                    if !dist.contains_key(&e.id) {
                        dist.insert(e.id, d);
                        if view.view_node(e.id).is_and() {
                            next.push(e.id);
                        }
                    }
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }

    // Largest effective hop budget whose frontier fits the leaf limit.
    let mut chosen = None;
    for m_eff in (1..=m).rev() {
        let leaves: BTreeSet<NodeId> = dist
            .iter()
            .filter(|(id, &d)| {
                d > 0 && d <= m_eff && (d == m_eff || !view.view_node(**id).is_and())
            })
            .map(|(id, _)| *id)
            .collect();
        if leaves.len() <= k_leaves {
            chosen = Some((m_eff, leaves));
            break;
        }
    }
    let (m_eff, leaf_set) = match chosen {
        Some(c) => c,
        None => {
            let (f0, f1) = view.view_node(root).fanins().unwrap();
            (1, BTreeSet::from([f0.id, f1.id]))
        }
    };
    let leaves: Vec<NodeId> = leaf_set.iter().copied().collect();

    // Window membership: region nodes within the chosen budget.
    let mut window: BTreeSet<NodeId> = dist
        .iter()
        .filter(|(_, &d)| d <= m_eff)
        .map(|(id, _)| *id)
        .collect();
    window.retain(|id| leaf_set.contains(id) || dist[id] < m_eff);

    let root_level = view.view_level(root);
    let mut divisors: Vec<NodeId> = window
        .iter()
        .copied()
        .filter(|id| {
            *id != root && !leaf_set.contains(id) && !mffc.contains(id) && view.view_node(*id).is_and()
        })
        .collect();

    // Side-output expansion: fanouts of window members whose fanins are both
    // already inside (so their function stays expressible over the leaves).
    let mut base: BTreeSet<NodeId> = window.clone();
    base.remove(&root);
    let scan_cap = params.max_divisors.saturating_mul(4).max(512);
    loop {
        let mut added = Vec::new();
        for &w in &base {
            for &f in view.view_readers(w) {
                if f == root || base.contains(&f) || !view.view_is_live(f) {
                    continue;
                }
                if view.view_level(f) > root_level {
                    continue;
                }
                let (f0, f1) = view.view_node(f).fanins().unwrap();
                if base.contains(&f0.id) && base.contains(&f1.id) {
                    added.push(f);
                }
            }
        }
        added.sort_unstable();
        added.dedup();
        added.retain(|id| !base.contains(id));
        if added.is_empty() {
            break;
        }
        for &f in &added {
            base.insert(f);
            if !mffc.contains(&f) {
                divisors.push(f);
            }
        }
        if divisors.len() >= scan_cap {
            break;
        }
    }

    divisors.sort_by_key(|id| (view.view_level(*id), *id));
    divisors.truncate(params.max_divisors);

    Window {
        root,
        leaves,
        divisors,
        mffc,
        distance: m_eff,
    }
}

fn mffc_of_view(view: &impl GraphView, root: NodeId) -> BTreeSet<NodeId> {
    let mut cone = BTreeSet::from([root]);
    let mut dec: HashMap<NodeId, usize> = HashMap::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        let (f0, f1) = view.view_node(id).fanins().unwrap();
        for e in [f0, f1] {
            if !view.view_node(e.id).is_and() {
                continue;
            }
            let d = dec.entry(e.id).or_insert(0);
            *d += 1;
            if *d == view.view_fanout_count(e.id) && cone.insert(e.id) {
                stack.push(e.id);
            }
        }
    }
    cone
}

/// MFFC of a root in an immutable graph.
pub fn mffc(aig: &Aig, root: NodeId) -> BTreeSet<NodeId> {
    WorkGraph::new(aig).mffc(root)
}

/// Search the window for a functionally equivalent replacement of the root.
/// Pure: inspects the graph, never mutates it. Zero-resub candidates are
/// tried before one-resub; within a tier, divisor list order decides, and the
/// first candidate with positive gain (non-negative under `zero_cost`) wins.
pub fn try_transform(
    view: &impl GraphView,
    window: &Window,
    params: &OperatorParams,
) -> (TransformOutcome, Option<Replacement>) {
    let root = window.root;
    if window.divisors.is_empty() {
        return (TransformOutcome::ineffective(root), None);
    }
    let mut targets = Vec::with_capacity(window.divisors.len() + 1);
    targets.push(root);
    targets.extend_from_slice(&window.divisors);
    let tables = match window_truth_tables(view, &window.leaves, &targets) {
        Ok(t) => t,
        Err(_) => return (TransformOutcome::ineffective(root), None),
    };
    let (root_tt, div_tts) = tables.split_first().unwrap();
    let root_neg = root_tt.not();
    let mffc_size = window.mffc.len();

    // Zero-resub: a divisor equal to the root function or its complement.
    for (i, tt) in div_tts.iter().enumerate() {
        let complemented = if tt == root_tt {
            false
        } else if *tt == root_neg {
            true
        } else {
            continue;
        };
        let gain = mffc_size;
        return (
            TransformOutcome {
                node: root,
                effective: gain > 0,
                gain,
                kind: TransformKind::ZeroResub,
            },
            Some(Replacement::Existing(Edge::new(
                window.divisors[i],
                complemented,
            ))),
        );
    }

    // One-resub: a single AND over two possibly-complemented divisors; the
    // OR forms come out as a complemented replacement edge.
    let gain = mffc_size.saturating_sub(1);
    if gain == 0 && !params.zero_cost {
        return (TransformOutcome::ineffective(root), None);
    }
    let w0_pos = root_tt.words()[0];
    let w0_neg = root_neg.words()[0];
    for i in 0..div_tts.len() {
        let wi = div_tts[i].words()[0];
        for j in (i + 1)..div_tts.len() {
            let wj = div_tts[j].words()[0];
            for (ca, cb) in [(false, false), (false, true), (true, false), (true, true)] {
                let a0 = if ca { !wi } else { wi };
                let b0 = if cb { !wj } else { wj };
                let w0 = a0 & b0 & crate::sim::word_mask(window.leaves.len());
                // Cheap first-word filter before the full table compare.
                let out_compl = if w0 == w0_pos {
                    false
                } else if w0 == w0_neg {
                    true
                } else {
                    continue;
                };
                let ta = maybe_not(&div_tts[i], ca);
                let tb = maybe_not(&div_tts[j], cb);
                let t = ta.and(&tb);
                let matches = if out_compl { t == root_neg } else { t == *root_tt };
                if matches {
                    return (
                        TransformOutcome {
                            node: root,
                            effective: gain > 0,
                            gain,
                            kind: TransformKind::OneResub,
                        },
                        Some(Replacement::NewAnd {
                            a: Edge::new(window.divisors[i], ca),
                            b: Edge::new(window.divisors[j], cb),
                            complemented: out_compl,
                        }),
                    );
                }
            }
        }
    }
    (TransformOutcome::ineffective(root), None)
}

fn maybe_not(t: &TruthTable, c: bool) -> TruthTable {
    if c {
        t.not()
    } else {
        t.clone()
    }
}

/// Result of a full operator pass.
pub struct OperatorRun {
    pub optimized: Aig,
    pub outcomes: Vec<TransformOutcome>,
    pub transform_time: Duration,
}

/// Per-visit context handed to the data-collection hook before the
/// transformation (if any) is applied.
pub struct Visit<'a> {
    pub graph: &'a WorkGraph,
    pub window: &'a Window,
    pub outcome: &'a TransformOutcome,
    pub visit_index: usize,
}

/// Run the operator over every live AND node in ascending id order,
/// restricted to `filter` when provided. Ids predicted before the run stay
/// fixed; a filtered id that died under an earlier transform is skipped.
pub fn run_operator(
    aig: &Aig,
    params: &OperatorParams,
    filter: Option<&BTreeSet<NodeId>>,
) -> OperatorRun {
    run_operator_with(aig, params, filter, |_| {})
}

/// [`run_operator`] with a per-visit hook observing the pre-transformation
/// graph state (used to pair features with labels during data collection).
pub fn run_operator_with(
    aig: &Aig,
    params: &OperatorParams,
    filter: Option<&BTreeSet<NodeId>>,
    mut hook: impl FnMut(Visit<'_>),
) -> OperatorRun {
    let mut work = WorkGraph::new(aig);
    let original_ands: Vec<NodeId> = aig.and_ids().collect();
    let mut outcomes = Vec::new();
    let started = Instant::now();
    let mut visit_index = 0usize;
    for root in original_ands {
        if let Some(f) = filter {
            if !f.contains(&root) {
                continue;
            }
        }
        if !work.is_live(root) {
            continue;
        }
        let window = collect_window(&work, root, params);
        let (outcome, replacement) = try_transform(&work, &window, params);
        hook(Visit {
            graph: &work,
            window: &window,
            outcome: &outcome,
            visit_index,
        });
        if let Some(repl) = replacement {
            work.apply_transform(root, &repl)
                .expect("freshly computed replacement cannot be stale");
        }
        outcomes.push(outcome);
        visit_index += 1;
    }
    let transform_time = started.elapsed();
    OperatorRun {
        optimized: work.finish(),
        outcomes,
        transform_time,
    }
}

/// One line of the operator's outcome log.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct OutcomeRecord {
    pub circuit: String,
    pub node_id: u32,
    pub effective: bool,
    pub gain: usize,
    pub kind: TransformKind,
    pub visit_index: usize,
}

impl OutcomeRecord {
    pub fn from_outcomes(circuit: &str, outcomes: &[TransformOutcome]) -> Vec<Self> {
        outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| OutcomeRecord {
                circuit: circuit.to_string(),
                node_id: o.node.0,
                effective: o.effective,
                gain: o.gain,
                kind: o.kind,
                visit_index: i,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::AigBuilder;
    use crate::sim::{circuits_equivalent, EquivMode};

    /// Two PIs, one AND.
    fn minimal() -> Aig {
        let mut b = AigBuilder::new("min");
        let a = Edge::to(b.add_pi());
        let c = Edge::to(b.add_pi());
        let x = b.and(a, c);
        b.add_po(x);
        b.finish()
    }

    /// A cone and an exact structural twin, both visible from POs.
    fn duplicated_cone() -> Aig {
        let mut b = AigBuilder::without_hashing("dup");
        let a = Edge::to(b.add_pi());
        let c = Edge::to(b.add_pi());
        let d = Edge::to(b.add_pi());
        let ab1 = b.and(a, c);
        let x = b.and(ab1, d);
        let ab2 = b.and(a, c);
        let y = b.and(ab2, d);
        b.add_po(x);
        b.add_po(y);
        b.finish()
    }

    #[test]
    fn minimal_window_has_pi_leaves_no_divisors() {
        let g = minimal();
        let w = collect_window(&WorkGraph::new(&g), NodeId(3), &OperatorParams::default());
        assert_eq!(w.leaves, vec![NodeId(1), NodeId(2)]);
        assert!(w.divisors.is_empty());
        assert_eq!(w.mffc, BTreeSet::from([NodeId(3)]));
    }

    #[test]
    fn zero_hop_budget_gives_no_divisors() {
        let params = OperatorParams {
            m_distance: 0,
            ..OperatorParams::default()
        };
        let g = duplicated_cone();
        let work = WorkGraph::new(&g);
        for root in g.and_ids() {
            let w = collect_window(&work, root, &params);
            assert!(w.divisors.is_empty());
        }
    }

    #[test]
    fn diamond_twin_is_divisor_of_each_root() {
        let g = duplicated_cone();
        let work = WorkGraph::new(&g);
        // Roots x (id 5) and y (id 7) compute the same function; each window
        // must expose the other as a divisor.
        let wx = collect_window(&work, NodeId(5), &OperatorParams::default());
        assert!(wx.divisors.contains(&NodeId(7)), "{:?}", wx.divisors);
        let wy = collect_window(&work, NodeId(7), &OperatorParams::default());
        assert!(wy.divisors.contains(&NodeId(5)), "{:?}", wy.divisors);
    }

    #[test]
    fn divisor_tables_expressible_over_leaves() {
        let g = crate::generators::random_dag(250, 3, "r");
        let work = WorkGraph::new(&g);
        let params = OperatorParams::default();
        for root in g.and_ids() {
            let w = collect_window(&work, root, &params);
            assert!(w.leaves.len() <= params.k_leaves);
            assert!(w.divisors.len() <= params.max_divisors);
            assert!(!w.divisors.contains(&root));
            for d in &w.divisors {
                assert!(!w.mffc.contains(d));
            }
            window_truth_tables(&work, &w.leaves, &w.divisors)
                .expect("divisor escaped the leaf cut");
        }
    }

    #[test]
    fn mffc_chain_of_three() {
        let mut b = AigBuilder::new("chain3");
        let mut e = Edge::to(b.add_pi());
        let mut top = NodeId(0);
        for _ in 0..3 {
            let p = Edge::to(b.add_pi());
            e = b.and(e, p);
            top = e.id;
        }
        b.add_po(e);
        let g = b.finish();
        assert_eq!(mffc(&g, top).len(), 3);
    }

    #[test]
    fn mffc_excludes_fanin_with_external_fanout() {
        let mut b = AigBuilder::new("ext");
        let a = Edge::to(b.add_pi());
        let c = Edge::to(b.add_pi());
        let d = Edge::to(b.add_pi());
        let inner = b.and(a, c);
        let top = b.and(inner, d);
        b.add_po(top);
        b.add_po(inner); // external fanout of the inner node
        let g = b.finish();
        assert_eq!(mffc(&g, top.id), BTreeSet::from([top.id]));
    }

    #[test]
    fn mffc_matches_reachability_oracle() {
        // Independent oracle: the MFFC is exactly the set of live nodes that
        // become unreachable from the POs once the root is cut out.
        let g = crate::generators::random_dag(200, 17, "r");
        for root in g.and_ids() {
            let got = mffc(&g, root);
            let mut reach = vec![false; g.node_count()];
            let mut stack: Vec<NodeId> = g.pos().iter().map(|e| e.id).collect();
            while let Some(id) = stack.pop() {
                if reach[id.index()] || id == root {
                    continue;
                }
                reach[id.index()] = true;
                if let Some((f0, f1)) = g.node(id).fanins() {
                    stack.push(f0.id);
                    stack.push(f1.id);
                }
            }
            let mut expected: BTreeSet<NodeId> = g
                .and_ids()
                .filter(|id| !reach[id.index()] && *id != root)
                .collect();
            expected.insert(root);
            assert_eq!(got, expected, "root {root}");
        }
    }

    #[test]
    fn zero_resub_on_duplicated_cone() {
        let g = duplicated_cone();
        let work = WorkGraph::new(&g);
        let w = collect_window(&work, NodeId(5), &OperatorParams::default());
        let (outcome, repl) = try_transform(&work, &w, &OperatorParams::default());
        assert!(outcome.effective);
        assert_eq!(outcome.kind, TransformKind::ZeroResub);
        // Gain equals the hand-built cone size (x and its private and-gate).
        assert_eq!(outcome.gain, 2);
        assert_eq!(repl, Some(Replacement::Existing(Edge::to(NodeId(7)))));
    }

    #[test]
    fn empty_divisors_ineffective() {
        let g = minimal();
        let work = WorkGraph::new(&g);
        let w = collect_window(&work, NodeId(3), &OperatorParams::default());
        let (outcome, repl) = try_transform(&work, &w, &OperatorParams::default());
        assert!(!outcome.effective);
        assert_eq!(outcome.kind, TransformKind::None);
        assert_eq!(outcome.gain, 0);
        assert!(repl.is_none());
    }

    #[test]
    fn complemented_twin_found() {
        // Divisor computing the complement of the root's function: a nand
        // built via or(!a, !c) next to root and(a, c).
        let mut b = AigBuilder::without_hashing("neg");
        let a = Edge::to(b.add_pi());
        let c = Edge::to(b.add_pi());
        let d = Edge::to(b.add_pi());
        let nand = b.or(!a, !c); // one AND node, complemented output
        let keep = b.and(nand, d);
        let root = b.and(a, c);
        let top = b.and(root, d);
        b.add_po(keep);
        b.add_po(top);
        let g = b.finish();
        let work = WorkGraph::new(&g);
        let w = collect_window(&work, root.id, &OperatorParams::default());
        assert!(w.divisors.contains(&nand.id));
        let (outcome, repl) = try_transform(&work, &w, &OperatorParams::default());
        assert_eq!(outcome.kind, TransformKind::ZeroResub);
        // Truth tables confirm the match is through a complemented edge.
        let expect_compl = !nand.complemented;
        assert_eq!(
            repl,
            Some(Replacement::Existing(Edge::new(nand.id, expect_compl)))
        );
    }

    #[test]
    fn apply_zero_resub_drops_gain_and_stays_equivalent() {
        let g = duplicated_cone();
        let mut work = WorkGraph::new(&g);
        let w = collect_window(&work, NodeId(5), &OperatorParams::default());
        let (outcome, repl) = try_transform(&work, &w, &OperatorParams::default());
        let before = work.live_and_count();
        let gained = work.apply_transform(NodeId(5), &repl.unwrap()).unwrap();
        assert_eq!(gained, outcome.gain);
        assert_eq!(work.live_and_count(), before - outcome.gain);
        let out = work.finish();
        out.validate().unwrap();
        assert_eq!(out.po_count(), g.po_count());
        assert!(circuits_equivalent(&g, &out, EquivMode::Exhaustive)
            .unwrap()
            .is_equivalent());
    }

    #[test]
    fn apply_rejects_stale_replacement() {
        let g = duplicated_cone();
        let mut work = WorkGraph::new(&g);
        let w5 = collect_window(&work, NodeId(5), &OperatorParams::default());
        let (_, repl5) = try_transform(&work, &w5, &OperatorParams::default());
        work.apply_transform(NodeId(5), &repl5.unwrap()).unwrap();
        // Node 5 is now dead; pointing anything at it must fail.
        let err = work
            .apply_transform(NodeId(7), &Replacement::Existing(Edge::to(NodeId(5))))
            .unwrap_err();
        assert_eq!(err, ApplyError::StaleReplacement(NodeId(5)));
    }

    #[test]
    fn run_operator_preserves_function_and_shrinks() {
        for seed in [1u64, 2, 3] {
            let g = crate::generators::random_dag(300, seed, "r");
            let run = run_operator(&g, &OperatorParams::default(), None);
            assert!(run.optimized.and_count() < g.and_count(), "seed {seed}");
            assert_eq!(run.optimized.po_count(), g.po_count());
            assert!(
                circuits_equivalent(&g, &run.optimized, EquivMode::Exhaustive)
                    .unwrap()
                    .is_equivalent(),
                "seed {seed}"
            );
            // Label consistency.
            for o in &run.outcomes {
                assert_eq!(o.effective, o.gain > 0);
                assert_eq!(o.effective, o.kind != TransformKind::None);
            }
        }
    }

    #[test]
    fn empty_filter_is_identity() {
        let g = crate::generators::random_dag(150, 5, "r");
        let run = run_operator(&g, &OperatorParams::default(), Some(&BTreeSet::new()));
        assert_eq!(run.optimized, g);
        assert!(run.outcomes.is_empty());
    }

    #[test]
    fn full_filter_equals_no_filter() {
        let g = crate::generators::random_dag(150, 6, "r");
        let all: BTreeSet<NodeId> = g.and_ids().collect();
        let unfiltered = run_operator(&g, &OperatorParams::default(), None);
        let filtered = run_operator(&g, &OperatorParams::default(), Some(&all));
        assert_eq!(unfiltered.optimized, filtered.optimized);
        assert_eq!(unfiltered.outcomes, filtered.outcomes);
    }

    #[test]
    fn oracle_filter_reproduces_unfiltered_result() {
        for seed in [11u64, 12, 13] {
            let g = crate::generators::random_dag(250, seed, "r");
            let unfiltered = run_operator(&g, &OperatorParams::default(), None);
            let effective: BTreeSet<NodeId> = unfiltered
                .outcomes
                .iter()
                .filter(|o| o.effective)
                .map(|o| o.node)
                .collect();
            assert!(!effective.is_empty(), "seed {seed} produced no positives");
            let oracle = run_operator(&g, &OperatorParams::default(), Some(&effective));
            assert_eq!(oracle.optimized, unfiltered.optimized);
        }
    }

    #[test]
    fn replacement_table_matches_old_root_table() {
        // Local soundness: after applying, the replacement's window table
        // over the same leaves equals the root's pre-transformation table.
        let g = crate::generators::random_dag(200, 21, "r");
        let mut work = WorkGraph::new(&g);
        let params = OperatorParams::default();
        let mut checked = 0;
        for root in g.and_ids() {
            if !work.is_live(root) {
                continue;
            }
            let w = collect_window(&work, root, &params);
            let (outcome, repl) = try_transform(&work, &w, &params);
            if let Some(repl) = repl {
                let before = window_truth_tables(&work, &w.leaves, &[root]).unwrap()[0].clone();
                work.apply_transform(root, &repl).unwrap();
                let (edge, compl) = match repl {
                    Replacement::Existing(e) => (e.id, e.complemented),
                    Replacement::NewAnd { complemented, .. } => {
                        (NodeId((work.view_node_count() - 1) as u32), complemented)
                    }
                };
                let after = window_truth_tables(&work, &w.leaves, &[edge]).unwrap()[0].clone();
                let after = if compl { after.not() } else { after };
                assert_eq!(after, before, "root {root}, outcome {outcome:?}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn monotone_size_during_run() {
        let g = crate::generators::random_dag(300, 8, "r");
        let mut sizes = vec![g.and_count()];
        run_operator_with(&g, &OperatorParams::default(), None, |v| {
            sizes.push(v.graph.live_and_count());
        });
        assert!(sizes.windows(2).all(|w| w[1] <= w[0]));
    }
}
