//! AIGER v1 reader and writer, combinational subset.
//!
//! Both the ASCII (`aag`) and binary (`aig`) variants are supported. Latches
//! are rejected: the toolkit only handles combinational circuits. Writing
//! canonical graphs round-trips bit-equivalently.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::aig::{canon_fanins, Aig, Edge, Node, NodeId};

#[derive(Debug, Error)]
pub enum AigerError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("sequential circuit (latch count {0}); only combinational AIGER is supported")]
    Latches(usize),
    #[error("dangling literal {0}")]
    DanglingLiteral(usize),
    #[error("malformed record on line {0}")]
    Record(usize),
    #[error("truncated binary and-gate section")]
    Truncated,
    #[error("binary delta encoding violates ordering at gate {0}")]
    BadDelta(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

struct Header {
    m: usize,
    i: usize,
    l: usize,
    o: usize,
    a: usize,
    binary: bool,
}

fn parse_header(line: &str) -> Result<Header, AigerError> {
    let mut parts = line.split_ascii_whitespace();
    let magic = parts.next().ok_or_else(|| AigerError::Header("empty".into()))?;
    let binary = match magic {
        "aag" => false,
        "aig" => true,
        other => return Err(AigerError::Header(format!("bad magic {other:?}"))),
    };
    let mut next = || -> Result<usize, AigerError> {
        parts
            .next()
            .ok_or_else(|| AigerError::Header("missing field".into()))?
            .parse()
            .map_err(|_| AigerError::Header("non-numeric field".into()))
    };
    let (m, i, l, o, a) = (next()?, next()?, next()?, next()?, next()?);
    if parts.next().is_some() {
        return Err(AigerError::Header("trailing fields".into()));
    }
    if m < i + l + a {
        return Err(AigerError::Header(format!("M={m} < I+L+A={}", i + l + a)));
    }
    Ok(Header {
        m,
        i,
        l,
        o,
        a,
        binary,
    })
}

/// Parse an AIGER file (ASCII or binary) into an [`Aig`].
pub fn parse_aiger(bytes: &[u8]) -> Result<Aig, AigerError> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| AigerError::Header("no newline".into()))?;
    let header_line = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| AigerError::Header("non-utf8 header".into()))?;
    let h = parse_header(header_line)?;
    if h.l > 0 {
        return Err(AigerError::Latches(h.l));
    }
    let body = &bytes[header_end + 1..];
    if h.binary {
        parse_binary(&h, body)
    } else {
        parse_ascii(&h, body)
    }
}

/// Map a literal to an edge, requiring the variable to be defined already.
fn resolve(lit: usize, defined: &[Option<NodeId>]) -> Result<Edge, AigerError> {
    let var = lit >> 1;
    match defined.get(var).copied().flatten() {
        Some(id) => Ok(Edge::new(id, lit & 1 == 1)),
        None => Err(AigerError::DanglingLiteral(lit)),
    }
}

fn parse_ascii(h: &Header, body: &[u8]) -> Result<Aig, AigerError> {
    let text = std::str::from_utf8(body).map_err(|_| AigerError::Header("non-utf8 body".into()))?;
    let mut lines = text.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, &str), AigerError> {
        lines
            .next()
            .ok_or_else(|| AigerError::Header(format!("missing {what} line")))
    };

    // defined[var] = node id once the variable has a definition.
    let mut defined: Vec<Option<NodeId>> = vec![None; h.m + 1];
    defined[0] = Some(NodeId::CONST0);
    let mut nodes = vec![Node::Const0];
    let mut pis = Vec::with_capacity(h.i);

    for _ in 0..h.i {
        let (ln, line) = next_line("input")?;
        let lit: usize = line.trim().parse().map_err(|_| AigerError::Record(ln + 2))?;
        if lit & 1 == 1 || lit == 0 {
            return Err(AigerError::Record(ln + 2));
        }
        let id = NodeId(nodes.len() as u32);
        nodes.push(Node::Pi);
        pis.push(id);
        defined[lit >> 1] = Some(id);
    }

    let mut po_lits = Vec::with_capacity(h.o);
    for _ in 0..h.o {
        let (ln, line) = next_line("output")?;
        let lit: usize = line.trim().parse().map_err(|_| AigerError::Record(ln + 2))?;
        po_lits.push(lit);
    }

    for _ in 0..h.a {
        let (ln, line) = next_line("and")?;
        let mut parts = line.split_ascii_whitespace();
        let mut next_num = || -> Result<usize, AigerError> {
            parts
                .next()
                .ok_or(AigerError::Record(ln + 2))?
                .parse()
                .map_err(|_| AigerError::Record(ln + 2))
        };
        let (lhs, rhs0, rhs1) = (next_num()?, next_num()?, next_num()?);
        if lhs & 1 == 1 || lhs >> 1 > h.m {
            return Err(AigerError::Record(ln + 2));
        }
        let f0 = resolve(rhs0, &defined)?;
        let f1 = resolve(rhs1, &defined)?;
        let (f0, f1) = canon_fanins(f0, f1);
        let id = NodeId(nodes.len() as u32);
        nodes.push(Node::And {
            fanin0: f0,
            fanin1: f1,
        });
        defined[lhs >> 1] = Some(id);
    }

    let mut pos = Vec::with_capacity(h.o);
    for lit in po_lits {
        pos.push(resolve(lit, &defined)?);
    }
    let aig = Aig::from_parts(nodes, pis, pos, String::new());
    debug_assert!(aig.validate().is_ok());
    Ok(aig)
}

fn parse_binary(h: &Header, body: &[u8]) -> Result<Aig, AigerError> {
    // Binary AIGER fixes variable numbering: inputs are variables 1..=I and
    // and-gates I+1..=I+A in order.
    if h.m != h.i + h.a {
        return Err(AigerError::Header(format!(
            "binary AIGER requires M = I + A, got M={} I={} A={}",
            h.m, h.i, h.a
        )));
    }
    let mut pos_lits = Vec::with_capacity(h.o);
    let mut cursor = 0usize;
    for _ in 0..h.o {
        let end = body[cursor..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(AigerError::Truncated)?;
        let line = std::str::from_utf8(&body[cursor..cursor + end])
            .map_err(|_| AigerError::Header("non-utf8 output".into()))?;
        pos_lits.push(
            line.trim()
                .parse::<usize>()
                .map_err(|_| AigerError::Header("bad output literal".into()))?,
        );
        cursor += end + 1;
    }

    let mut nodes = vec![Node::Const0];
    let mut pis = Vec::with_capacity(h.i);
    for _ in 0..h.i {
        let id = NodeId(nodes.len() as u32);
        nodes.push(Node::Pi);
        pis.push(id);
    }

    let read_varint = |cur: &mut usize| -> Result<usize, AigerError> {
        let mut value = 0usize;
        let mut shift = 0u32;
        loop {
            let byte = *body.get(*cur).ok_or(AigerError::Truncated)?;
            *cur += 1;
            value |= ((byte & 0x7f) as usize) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            shift += 7;
        }
    };

    for k in 0..h.a {
        let lhs = 2 * (h.i + 1 + k);
        let delta0 = read_varint(&mut cursor)?;
        let delta1 = read_varint(&mut cursor)?;
        let rhs0 = lhs.checked_sub(delta0).ok_or(AigerError::BadDelta(k))?;
        let rhs1 = rhs0.checked_sub(delta1).ok_or(AigerError::BadDelta(k))?;
        let to_edge = |lit: usize| -> Result<Edge, AigerError> {
            let var = lit >> 1;
            if var > h.i + k {
                return Err(AigerError::DanglingLiteral(lit));
            }
            Ok(Edge::new(NodeId(var as u32), lit & 1 == 1))
        };
        let (f0, f1) = canon_fanins(to_edge(rhs0)?, to_edge(rhs1)?);
        nodes.push(Node::And {
            fanin0: f0,
            fanin1: f1,
        });
    }

    let mut pos = Vec::with_capacity(h.o);
    for lit in pos_lits {
        let var = lit >> 1;
        if var > h.m {
            return Err(AigerError::DanglingLiteral(lit));
        }
        pos.push(Edge::new(NodeId(var as u32), lit & 1 == 1));
    }
    let aig = Aig::from_parts(nodes, pis, pos, String::new());
    debug_assert!(aig.validate().is_ok());
    Ok(aig)
}

/// Serialize to ASCII AIGER (`aag`).
pub fn write_aiger_ascii(aig: &Aig) -> Vec<u8> {
    let i = aig.pi_count();
    let a = aig.and_count();
    let m = aig.node_count() - 1;
    let mut out = format!("aag {m} {i} 0 {} {a}\n", aig.po_count());
    // Node ids map directly to variables: PIs occupy 1..=I, ANDs follow.
    for pi in aig.pis() {
        out.push_str(&format!("{}\n", 2 * pi.index()));
    }
    for po in aig.pos() {
        out.push_str(&format!("{}\n", lit_of(*po)));
    }
    for (idx, node) in aig.nodes().iter().enumerate() {
        if let Node::And { fanin0, fanin1 } = node {
            out.push_str(&format!(
                "{} {} {}\n",
                2 * idx,
                lit_of(*fanin0),
                lit_of(*fanin1)
            ));
        }
    }
    out.into_bytes()
}

fn lit_of(e: Edge) -> usize {
    2 * e.id.index() + e.complemented as usize
}

/// Serialize to binary AIGER (`aig`). The graph must be canonical (dense
/// topological ids), which [`Aig::validate`] guarantees.
pub fn write_aiger_binary(aig: &Aig) -> Vec<u8> {
    let i = aig.pi_count();
    let a = aig.and_count();
    let m = i + a;
    // Binary AIGER needs PIs in variable slots 1..=I followed by the gates;
    // after sweep/compact our node layout matches that directly.
    debug_assert!(aig
        .pis()
        .iter()
        .enumerate()
        .all(|(k, pi)| pi.index() == k + 1));
    let mut out = format!("aig {m} {i} 0 {} {a}\n", aig.po_count()).into_bytes();
    for po in aig.pos() {
        out.extend_from_slice(format!("{}\n", lit_of(*po)).as_bytes());
    }
    let push_varint = |out: &mut Vec<u8>, mut v: usize| {
        while v >= 0x80 {
            out.push((v & 0x7f) as u8 | 0x80);
            v >>= 7;
        }
        out.push(v as u8);
    };
    for (idx, node) in aig.nodes().iter().enumerate() {
        if let Node::And { fanin0, fanin1 } = node {
            let lhs = 2 * idx;
            // Delta encoding requires rhs0 >= rhs1.
            let (lo, hi) = (lit_of(*fanin0), lit_of(*fanin1));
            let (rhs0, rhs1) = if lo >= hi { (lo, hi) } else { (hi, lo) };
            push_varint(&mut out, lhs - rhs0);
            push_varint(&mut out, rhs0 - rhs1);
        }
    }
    out
}

/// Write a file, picking the format from the extension (`.aag` → ASCII,
/// anything else → binary).
pub fn write_aiger_file(aig: &Aig, path: &Path) -> Result<(), AigerError> {
    let bytes = if path.extension().is_some_and(|e| e == "aag") {
        write_aiger_ascii(aig)
    } else {
        write_aiger_binary(aig)
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Read a file and parse it; the name is taken from the file stem.
pub fn read_aiger_file(path: &Path) -> Result<Aig, AigerError> {
    let bytes = fs::read(path)?;
    let mut aig = parse_aiger(&bytes)?;
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        aig.set_name(stem);
    }
    Ok(aig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_circuit() {
        let g = parse_aiger(b"aag 1 1 0 1 0\n2\n2\n").unwrap();
        assert_eq!(g.pi_count(), 1);
        assert_eq!(g.and_count(), 0);
        assert_eq!(g.pos(), &[Edge::to(NodeId(1))]);
    }

    #[test]
    fn single_and_gate() {
        let g = parse_aiger(b"aag 3 2 0 1 1\n2\n4\n6\n6 4 2\n").unwrap();
        assert_eq!(g.pi_count(), 2);
        assert_eq!(g.and_count(), 1);
        let (f0, f1) = g.node(NodeId(3)).fanins().unwrap();
        assert_eq!((f0, f1), (Edge::to(NodeId(1)), Edge::to(NodeId(2))));
        assert_eq!(g.pos(), &[Edge::to(NodeId(3))]);
    }

    #[test]
    fn rejects_latches() {
        let err = parse_aiger(b"aag 2 1 1 0 0\n2\n4 2\n").unwrap_err();
        assert!(matches!(err, AigerError::Latches(1)));
    }

    #[test]
    fn rejects_dangling_literal() {
        let err = parse_aiger(b"aag 3 1 0 1 1\n2\n6\n6 2 4\n").unwrap_err();
        assert!(matches!(err, AigerError::DanglingLiteral(4)));
    }

    #[test]
    fn rejects_malformed_header() {
        assert!(parse_aiger(b"agg 1 1 0 1 0\n").is_err());
        assert!(parse_aiger(b"aag 1 1 0\n").is_err());
        assert!(parse_aiger(b"aag 0 1 0 1 0\n2\n2\n").is_err());
    }

    #[test]
    fn ascii_roundtrip_adder() {
        let g = crate::generators::adder(8, "a8");
        let text = write_aiger_ascii(&g);
        let h = parse_aiger(&text).unwrap();
        assert_eq!(g.nodes(), h.nodes());
        assert_eq!(g.pis(), h.pis());
        assert_eq!(g.pos(), h.pos());
        // Bit-equivalence for canonical input.
        assert_eq!(write_aiger_ascii(&h), text);
    }

    #[test]
    fn binary_roundtrip_multiplier() {
        let g = crate::generators::multiplier(5, "m5");
        let bytes = write_aiger_binary(&g);
        let h = parse_aiger(&bytes).unwrap();
        assert_eq!(g.nodes(), h.nodes());
        assert_eq!(g.pos(), h.pos());
        assert_eq!(write_aiger_binary(&h), bytes);
    }

    #[test]
    fn binary_matches_ascii_parse() {
        let g = crate::generators::random_dag(200, 11, "r200");
        let from_ascii = parse_aiger(&write_aiger_ascii(&g)).unwrap();
        let from_binary = parse_aiger(&write_aiger_binary(&g)).unwrap();
        assert_eq!(from_ascii.nodes(), from_binary.nodes());
        assert_eq!(from_ascii.pos(), from_binary.pos());
    }
}
