//! Bit-packed truth-table simulation and combinational equivalence checking.
//!
//! Tables are packed 64 assignments per word; bit `b` of a table is the value
//! under the assignment where variable `i` equals bit `i` of `b` (so the LSB
//! is the all-zeros assignment). This is the equivalence oracle used inside
//! resubstitution validation and by the acceptance tests.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use thiserror::Error;

use crate::aig::{Aig, GraphView, Node, NodeId};

pub const MAX_TT_VARS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("{0} leaves exceed the {MAX_TT_VARS}-variable truth table limit")]
    TooManyLeaves(usize),
    #[error("window cone escapes the leaf set at node {0}")]
    ConeEscapesLeaves(NodeId),
    #[error("PI/PO arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("exhaustive equivalence limited to {MAX_TT_VARS} PIs, circuit has {0}")]
    TooManyPis(usize),
}

/// A truth table over `num_vars <= 16` variables.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TruthTable {
    num_vars: usize,
    words: Vec<u64>,
}

fn word_count(num_vars: usize) -> usize {
    if num_vars >= 6 {
        1 << (num_vars - 6)
    } else {
        1
    }
}

/// Valid-bit mask for the first word of a `num_vars` table.
pub fn word_mask(num_vars: usize) -> u64 {
    tail_mask(num_vars)
}

/// Mask selecting the valid bits of the (single) word for small tables.
fn tail_mask(num_vars: usize) -> u64 {
    if num_vars >= 6 {
        u64::MAX
    } else {
        (1u64 << (1 << num_vars)) - 1
    }
}

impl TruthTable {
    pub fn zeros(num_vars: usize) -> Self {
        assert!(num_vars <= MAX_TT_VARS);
        TruthTable {
            num_vars,
            words: vec![0; word_count(num_vars)],
        }
    }

    pub fn ones(num_vars: usize) -> Self {
        let mut t = Self::zeros(num_vars);
        for w in &mut t.words {
            *w = u64::MAX;
        }
        t.mask_tail();
        t
    }

    /// Projection table of variable `var`.
    pub fn var(num_vars: usize, var: usize) -> Self {
        assert!(var < num_vars);
        let mut t = Self::zeros(num_vars);
        if var < 6 {
            // Repeating pattern within every word: 0101.., 00110011.., ...
            let block = 1u64 << var;
            let mut pattern = 0u64;
            let mut bit = 0;
            while bit < 64 {
                if (bit >> var) & 1 == 1 {
                    pattern |= 1 << bit;
                }
                bit += 1;
            }
            let _ = block;
            for w in &mut t.words {
                *w = pattern;
            }
        } else {
            let stride = 1usize << (var - 6);
            for (i, w) in t.words.iter_mut().enumerate() {
                if (i / stride) & 1 == 1 {
                    *w = u64::MAX;
                }
            }
        }
        t.mask_tail();
        t
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, assignment: usize) -> bool {
        (self.words[assignment >> 6] >> (assignment & 63)) & 1 == 1
    }

    pub fn num_bits(&self) -> usize {
        1 << self.num_vars
    }

    fn mask_tail(&mut self) {
        let m = tail_mask(self.num_vars);
        if let Some(last) = self.words.last_mut() {
            *last &= m;
        }
    }

    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.num_vars, other.num_vars);
        TruthTable {
            num_vars: self.num_vars,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn not(&self) -> Self {
        let mut t = TruthTable {
            num_vars: self.num_vars,
            words: self.words.iter().map(|w| !w).collect(),
        };
        t.mask_tail();
        t
    }

    /// First assignment where the two tables differ.
    pub fn first_difference(&self, other: &Self) -> Option<usize> {
        for (i, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let diff = a ^ b;
            if diff != 0 {
                return Some((i << 6) | diff.trailing_zeros() as usize);
            }
        }
        None
    }
}

/// Apply an edge's complement to a table.
fn edge_table(t: &TruthTable, complemented: bool) -> TruthTable {
    if complemented {
        t.not()
    } else {
        t.clone()
    }
}

/// Truth tables of `targets` as functions of `leaves` (leaf `i` maps to
/// variable `i`). Fails if a target's cone reaches a node outside the leaf
/// set that is not an AND interior node, i.e. the window is ill-formed.
pub fn window_truth_tables(
    view: &impl GraphView,
    leaves: &[NodeId],
    targets: &[NodeId],
) -> Result<Vec<TruthTable>, SimError> {
    if leaves.len() > MAX_TT_VARS {
        return Err(SimError::TooManyLeaves(leaves.len()));
    }
    let nv = leaves.len();
    let mut memo: HashMap<NodeId, TruthTable> = HashMap::new();
    for (i, &leaf) in leaves.iter().enumerate() {
        memo.insert(leaf, TruthTable::var(nv, i));
    }

    let mut result = Vec::with_capacity(targets.len());
    for &target in targets {
        // Iterative post-order evaluation of the cone below `target`.
        let mut stack = vec![(target, false)];
        while let Some((id, expanded)) = stack.pop() {
            if memo.contains_key(&id) {
                continue;
            }
            match view.view_node(id) {
                Node::Const0 => {
                    memo.insert(id, TruthTable::zeros(nv));
                }
                Node::Pi => return Err(SimError::ConeEscapesLeaves(id)),
                Node::And { fanin0, fanin1 } => {
                    if expanded {
                        let t0 = edge_table(&memo[&fanin0.id], fanin0.complemented);
                        let t1 = edge_table(&memo[&fanin1.id], fanin1.complemented);
                        memo.insert(id, t0.and(&t1));
                    } else {
                        stack.push((id, true));
                        stack.push((fanin0.id, false));
                        stack.push((fanin1.id, false));
                    }
                }
            }
        }
        result.push(memo[&target].clone());
    }
    Ok(result)
}

/// Equivalence-check strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquivMode {
    /// Exact check over all `2^n` input assignments; requires ≤ 16 PIs.
    Exhaustive,
    /// Seeded random simulation; an "equivalent" verdict is probabilistic,
    /// "inequivalent" carries a concrete counterexample.
    Random { seed: u64, num_vectors: usize },
}

/// Outcome of an equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquivVerdict {
    Equivalent,
    /// PI assignment (one bool per PI) on which the circuits differ.
    Inequivalent { counterexample: Vec<bool> },
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivVerdict::Equivalent)
    }
}

/// Simulate all POs of a circuit under per-PI input words.
/// `inputs[i]` carries 64 assignments for PI `i` per word.
fn simulate_words(aig: &Aig, inputs: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let words = inputs.first().map_or(1, |v| v.len());
    let mut values: Vec<Vec<u64>> = vec![Vec::new(); aig.node_count()];
    values[0] = vec![0u64; words];
    for (k, &pi) in aig.pis().iter().enumerate() {
        values[pi.index()] = inputs[k].clone();
    }
    for (i, node) in aig.nodes().iter().enumerate() {
        if let Node::And { fanin0, fanin1 } = node {
            let mut out = Vec::with_capacity(words);
            let a = &values[fanin0.id.index()];
            let b = &values[fanin1.id.index()];
            for w in 0..words {
                let x = if fanin0.complemented { !a[w] } else { a[w] };
                let y = if fanin1.complemented { !b[w] } else { b[w] };
                out.push(x & y);
            }
            values[i] = out;
        }
    }
    aig.pos()
        .iter()
        .map(|po| {
            let v = &values[po.id.index()];
            v.iter()
                .map(|&w| if po.complemented { !w } else { w })
                .collect()
        })
        .collect()
}

/// Evaluate all POs under a single input assignment.
pub fn simulate(aig: &Aig, assignment: &[bool]) -> Vec<bool> {
    assert_eq!(assignment.len(), aig.pi_count());
    let inputs: Vec<Vec<u64>> = assignment
        .iter()
        .map(|&b| vec![if b { u64::MAX } else { 0 }])
        .collect();
    simulate_words(aig, &inputs)
        .iter()
        .map(|po| po[0] & 1 == 1)
        .collect()
}

/// Check functional equivalence of two circuits with matching interfaces.
pub fn circuits_equivalent(
    g1: &Aig,
    g2: &Aig,
    mode: EquivMode,
) -> Result<EquivVerdict, SimError> {
    if g1.pi_count() != g2.pi_count() {
        return Err(SimError::ArityMismatch(g1.pi_count(), g2.pi_count()));
    }
    if g1.po_count() != g2.po_count() {
        return Err(SimError::ArityMismatch(g1.po_count(), g2.po_count()));
    }
    let n = g1.pi_count();
    match mode {
        EquivMode::Exhaustive => {
            if n > MAX_TT_VARS {
                return Err(SimError::TooManyPis(n));
            }
            let inputs: Vec<Vec<u64>> = (0..n)
                .map(|i| TruthTable::var(n, i).words.clone())
                .collect();
            let o1 = simulate_words(g1, &inputs);
            let o2 = simulate_words(g2, &inputs);
            let valid = tail_mask(n);
            for (p1, p2) in o1.iter().zip(&o2) {
                for (w, (a, b)) in p1.iter().zip(p2).enumerate() {
                    let mask = if w + 1 == p1.len() { valid } else { u64::MAX };
                    let diff = (a ^ b) & mask;
                    if diff != 0 {
                        let assignment = (w << 6) | diff.trailing_zeros() as usize;
                        let cex = (0..n).map(|i| (assignment >> i) & 1 == 1).collect();
                        return Ok(EquivVerdict::Inequivalent {
                            counterexample: cex,
                        });
                    }
                }
            }
            Ok(EquivVerdict::Equivalent)
        }
        EquivMode::Random { seed, num_vectors } => {
            let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
            let words = num_vectors.div_ceil(64).max(1);
            let inputs: Vec<Vec<u64>> = (0..n)
                .map(|_| (0..words).map(|_| rng.next_u64()).collect())
                .collect();
            let o1 = simulate_words(g1, &inputs);
            let o2 = simulate_words(g2, &inputs);
            for (p1, p2) in o1.iter().zip(&o2) {
                for (w, (a, b)) in p1.iter().zip(p2).enumerate() {
                    let diff = a ^ b;
                    if diff != 0 {
                        let bit = diff.trailing_zeros() as usize;
                        let cex = inputs.iter().map(|v| (v[w] >> bit) & 1 == 1).collect();
                        return Ok(EquivVerdict::Inequivalent {
                            counterexample: cex,
                        });
                    }
                }
            }
            Ok(EquivVerdict::Equivalent)
        }
    }
}

/// Render a counterexample as a hex assignment vector for diagnostics.
pub fn format_counterexample(cex: &[bool]) -> String {
    let mut nibbles = String::new();
    for chunk in cex.chunks(4) {
        let mut v = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            if b {
                v |= 1 << i;
            }
        }
        nibbles.push(char::from_digit(v as u32, 16).unwrap());
    }
    format!("0x{nibbles} (LSB = pi0)")
}
