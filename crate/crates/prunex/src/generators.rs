//! Benchmark circuit generators with functionality tags.
//!
//! Arithmetic families (adder, multiplier, comparator) are correct by
//! construction and validated exhaustively in tests. The random families
//! deliberately plant structural redundancy (duplicate gates, re-associated
//! chains) so resubstitution has realistic work to find.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::aig::{Aig, AigBuilder, Edge};

/// High-level functionality tag used by the domain aggregation policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalityTag {
    Arithmetic,
    Control,
    Random,
    Unknown,
}

impl std::fmt::Display for FunctionalityTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FunctionalityTag::Arithmetic => "arithmetic",
            FunctionalityTag::Control => "control",
            FunctionalityTag::Random => "random",
            FunctionalityTag::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// One family request inside a benchmark suite.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BenchSpec {
    Adder { width: usize },
    Multiplier { width: usize },
    Comparator { width: usize },
    RandomControl { gates: usize, seed: u64 },
    RandomDag { nodes: usize, seed: u64 },
}

impl BenchSpec {
    pub fn tag(&self) -> FunctionalityTag {
        match self {
            BenchSpec::Adder { .. } | BenchSpec::Multiplier { .. } | BenchSpec::Comparator { .. } => {
                FunctionalityTag::Arithmetic
            }
            BenchSpec::RandomControl { .. } => FunctionalityTag::Control,
            BenchSpec::RandomDag { .. } => FunctionalityTag::Random,
        }
    }

    pub fn default_name(&self) -> String {
        match self {
            BenchSpec::Adder { width } => format!("adder{width}"),
            BenchSpec::Multiplier { width } => format!("mult{width}"),
            BenchSpec::Comparator { width } => format!("cmp{width}"),
            BenchSpec::RandomControl { gates, seed } => format!("ctrl{gates}_s{seed}"),
            BenchSpec::RandomDag { nodes, seed } => format!("rdag{nodes}_s{seed}"),
        }
    }

    pub fn build(&self, name: &str) -> Result<Aig, GenError> {
        match *self {
            BenchSpec::Adder { width } => {
                if width < 2 {
                    return Err(GenError::WidthTooSmall(width));
                }
                Ok(adder(width, name))
            }
            BenchSpec::Multiplier { width } => {
                if width < 2 {
                    return Err(GenError::WidthTooSmall(width));
                }
                Ok(multiplier(width, name))
            }
            BenchSpec::Comparator { width } => {
                if width < 2 {
                    return Err(GenError::WidthTooSmall(width));
                }
                Ok(comparator(width, name))
            }
            BenchSpec::RandomControl { gates, seed } => Ok(random_control(gates, seed, name)),
            BenchSpec::RandomDag { nodes, seed } => Ok(random_dag(nodes, seed, name)),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("arithmetic families need width >= 2, got {0}")]
    WidthTooSmall(usize),
}

/// Full-adder cell; returns (sum, carry_out).
fn full_adder(b: &mut AigBuilder, a: Edge, c: Edge, cin: Edge) -> (Edge, Edge) {
    let t = b.xor(a, c);
    let sum = b.xor(t, cin);
    let g = b.and(a, c);
    let p = b.and(t, cin);
    let carry = b.or(g, p);
    (sum, carry)
}

/// Ripple-carry adder over two `width`-bit operands.
/// PIs: a0..a(w-1), b0..b(w-1); POs: sum bits then the carry-out.
pub fn adder(width: usize, name: &str) -> Aig {
    let mut b = AigBuilder::new(name);
    let a: Vec<Edge> = (0..width).map(|_| Edge::to(b.add_pi())).collect();
    let c: Vec<Edge> = (0..width).map(|_| Edge::to(b.add_pi())).collect();
    let mut carry = Edge::FALSE;
    let mut sums = Vec::with_capacity(width + 1);
    for i in 0..width {
        let (s, cout) = full_adder(&mut b, a[i], c[i], carry);
        sums.push(s);
        carry = cout;
    }
    sums.push(carry);
    for s in sums {
        b.add_po(s);
    }
    b.finish()
}

/// Array multiplier over two `width`-bit operands; POs are the 2w product bits.
pub fn multiplier(width: usize, name: &str) -> Aig {
    let mut b = AigBuilder::new(name);
    let a: Vec<Edge> = (0..width).map(|_| Edge::to(b.add_pi())).collect();
    let c: Vec<Edge> = (0..width).map(|_| Edge::to(b.add_pi())).collect();
    // Accumulate shifted partial-product rows with ripple adders.
    let mut acc: Vec<Edge> = vec![Edge::FALSE; 2 * width];
    for (i, &ai) in a.iter().enumerate() {
        let mut carry = Edge::FALSE;
        for (j, &cj) in c.iter().enumerate() {
            let pp = b.and(ai, cj);
            let (s, cout) = full_adder(&mut b, acc[i + j], pp, carry);
            acc[i + j] = s;
            carry = cout;
        }
        acc[i + width] = carry;
    }
    for bit in acc {
        b.add_po(bit);
    }
    b.finish()
}

/// Unsigned comparator; POs: [a == b, a > b].
pub fn comparator(width: usize, name: &str) -> Aig {
    let mut b = AigBuilder::new(name);
    let a: Vec<Edge> = (0..width).map(|_| Edge::to(b.add_pi())).collect();
    let c: Vec<Edge> = (0..width).map(|_| Edge::to(b.add_pi())).collect();
    let mut eq = Edge::TRUE;
    let mut gt = Edge::FALSE;
    // Scan from the most significant bit down.
    for i in (0..width).rev() {
        let bit_eq = !b.xor(a[i], c[i]);
        let bit_gt = b.and(a[i], !c[i]);
        let win_here = b.and(eq, bit_gt);
        gt = b.or(gt, win_here);
        eq = b.and(eq, bit_eq);
    }
    b.add_po(eq);
    b.add_po(gt);
    b.finish()
}

/// Random control-style logic: a sum-of-products pool over a small PI set,
/// with some products rebuilt twice so duplicates survive for resubstitution.
pub fn random_control(gates: usize, seed: u64, name: &str) -> Aig {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xc017);
    let mut b = AigBuilder::without_hashing(name);
    let num_pis = rng.gen_range(8..=12);
    let pis: Vec<Edge> = (0..num_pis).map(|_| Edge::to(b.add_pi())).collect();

    let mut products: Vec<Edge> = Vec::new();
    let mut and_budget = gates.max(8) as isize;
    while and_budget > 0 {
        let arity = rng.gen_range(2..=4usize);
        let mut term = pis[rng.gen_range(0..pis.len())].xor_complement(rng.gen_bool(0.5));
        for _ in 1..arity {
            let l = pis[rng.gen_range(0..pis.len())].xor_complement(rng.gen_bool(0.5));
            term = b.and(term, l);
            and_budget -= 1;
        }
        products.push(term);
        // Occasionally rebuild the same product so an exact twin exists.
        if rng.gen_bool(0.25) && term.id.index() > 0 {
            if let crate::aig::Node::And { fanin0, fanin1 } = *b.node(term.id) {
                let twin = b.and(fanin0, fanin1);
                products.push(twin.xor_complement(term.complemented));
                and_budget -= 1;
            }
        }
    }

    let num_pos = rng.gen_range(2..=4usize);
    for _ in 0..num_pos {
        let picks = rng.gen_range(2..=5usize).min(products.len());
        let mut out = products[rng.gen_range(0..products.len())];
        for _ in 1..picks {
            let p = products[rng.gen_range(0..products.len())];
            out = b.or(out, p);
        }
        b.add_po(out);
    }
    finish_cover_sinks(b)
}

/// Random AND DAG with planted redundancy: duplicate gates and re-associated
/// three-input chains that compute equal functions through different
/// structure.
pub fn random_dag(nodes: usize, seed: u64, name: &str) -> Aig {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 1);
    let mut b = AigBuilder::without_hashing(name);
    let num_pis = (6 + nodes / 40).min(16);
    let mut signals: Vec<Edge> = (0..num_pis).map(|_| Edge::to(b.add_pi())).collect();

    while b.and_count_so_far() < nodes {
        let roll: f64 = rng.gen();
        if roll < 0.10 && signals.len() >= 3 {
            // Plant a re-associated pair: and(and(a,b),c) vs and(a,and(b,c)).
            let a = pick(&signals, &mut rng);
            let c = pick(&signals, &mut rng);
            let d = pick(&signals, &mut rng);
            let ab = b.and(a, c);
            let x = b.and(ab, d);
            let bc = b.and(c, d);
            let y = b.and(a, bc);
            signals.push(x);
            signals.push(y);
        } else if roll < 0.18 && signals.len() >= 2 {
            // Plant an exact duplicate of a random existing gate.
            let a = pick(&signals, &mut rng);
            let c = pick(&signals, &mut rng);
            let x = b.and(a, c);
            let y = b.and(a, c);
            signals.push(x);
            signals.push(y);
        } else {
            let a = pick(&signals, &mut rng).xor_complement(rng.gen_bool(0.5));
            let c = pick(&signals, &mut rng).xor_complement(rng.gen_bool(0.5));
            if a.id == c.id {
                continue;
            }
            signals.push(b.and(a, c));
        }
    }
    let num_pos = (2 + nodes / 60).min(24);
    for _ in 0..num_pos {
        let e = pick(&signals, &mut rng).xor_complement(rng.gen_bool(0.3));
        b.add_po(e);
    }
    finish_cover_sinks(b)
}

fn pick(signals: &[Edge], rng: &mut Xoshiro256StarStar) -> Edge {
    signals[rng.gen_range(0..signals.len())]
}

/// Make every fanout-free AND a PO so the whole graph stays live.
fn finish_cover_sinks(b: AigBuilder) -> Aig {
    let g = b.finish();
    let idx = g.fanout_index();
    let mut pos = g.pos().to_vec();
    for id in g.and_ids() {
        if idx.count(id) == 0 {
            pos.push(Edge::to(id));
        }
    }
    let out = Aig::from_parts(g.nodes().to_vec(), g.pis().to_vec(), pos, g.name().to_string());
    debug_assert!(out.validate().is_ok());
    out
}
