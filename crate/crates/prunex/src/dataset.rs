//! Labeled datasets per circuit, aggregation into training domains, class
//! weights, and the data-dependent generalization-bound terms.
//!
//! One unfiltered operator run over a circuit yields one sample per visited
//! AND node: the node's bipartite subgraph (captured on the graph state at
//! visit time) paired with its effectiveness label. Datasets aggregate into
//! domains either by functionality tag or by a size-balanced round-robin
//! deal; each domain trains its own classifier head.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::Aig;
use crate::features::{build_bipartite, BipartiteSubgraph, MinMaxStats, CHANNEL_NAMES};
use crate::generators::FunctionalityTag;
use crate::resub::{run_operator_with, OperatorParams, OperatorRun, OutcomeRecord};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no datasets to aggregate")]
    Empty,
    #[error("{0} domains requested but only {1} circuits available")]
    TooManyDomains(usize, usize),
    #[error("circuit {0} has tag 'unknown'; ByFunctionality needs known tags")]
    UnknownTag(String),
    #[error("degenerate dataset: only one class present")]
    SingleClass,
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One labeled node sample.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sample {
    pub node_id: u32,
    pub label: bool,
    pub x: BipartiteSubgraph,
}

/// All labeled samples from one circuit.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CircuitDataset {
    pub circuit_name: String,
    pub functionality_tag: FunctionalityTag,
    pub samples: Vec<Sample>,
    /// Set when the operator found no effective node at all; such circuits
    /// carry no positive signal and callers may drop them.
    pub zero_effective: bool,
    pub operator_params: OperatorParams,
    pub generator_seed: Option<u64>,
}

impl CircuitDataset {
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label).count()
    }
}

/// Run the operator unfiltered and pair every visited node's bipartite
/// subgraph with its effectiveness label. Returns the run alongside so the
/// optimized circuit and outcome log can be reused.
pub fn collect_dataset(
    aig: &Aig,
    tag: FunctionalityTag,
    params: &OperatorParams,
    m_max: usize,
) -> (CircuitDataset, OperatorRun) {
    let mut samples = Vec::new();
    let run = run_operator_with(aig, params, None, |visit| {
        let x = build_bipartite(visit.graph, visit.window, m_max);
        samples.push(Sample {
            node_id: visit.window.root.0,
            label: visit.outcome.effective,
            x,
        });
    });
    let zero_effective = !samples.iter().any(|s| s.label);
    let dataset = CircuitDataset {
        circuit_name: aig.name().to_string(),
        functionality_tag: tag,
        samples,
        zero_effective,
        operator_params: *params,
        generator_seed: None,
    };
    (dataset, run)
}

/// How circuit datasets merge into training domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AggregatePolicy {
    /// Group circuits sharing a functionality tag.
    ByFunctionality,
    /// Sort by sample count descending, deal round-robin into `m` domains.
    SizeBalancedOddEven { m: usize },
    /// Pool everything into a single mixed domain.
    SingleMixed,
}

/// One training domain: pooled samples from its member circuits.
#[derive(Clone, Debug)]
pub struct Domain {
    pub id: usize,
    pub circuits: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Domain {
    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

/// The aggregated domains; `M = domains.len()`.
#[derive(Clone, Debug)]
pub struct DomainSet {
    pub domains: Vec<Domain>,
    pub policy: AggregatePolicy,
}

impl DomainSet {
    pub fn m(&self) -> usize {
        self.domains.len()
    }

    pub fn sample_counts(&self) -> Vec<usize> {
        self.domains.iter().map(Domain::n).collect()
    }

    pub fn total_samples(&self) -> usize {
        self.domains.iter().map(Domain::n).sum()
    }
}

/// Aggregate circuit datasets into domains under the given policy.
pub fn aggregate(
    datasets: Vec<CircuitDataset>,
    policy: AggregatePolicy,
) -> Result<DomainSet, DatasetError> {
    if datasets.is_empty() {
        return Err(DatasetError::Empty);
    }
    let groups: Vec<Vec<CircuitDataset>> = match policy {
        AggregatePolicy::SingleMixed => vec![datasets],
        AggregatePolicy::ByFunctionality => {
            for d in &datasets {
                if d.functionality_tag == FunctionalityTag::Unknown {
                    return Err(DatasetError::UnknownTag(d.circuit_name.clone()));
                }
            }
            let mut by_tag: BTreeMap<String, Vec<CircuitDataset>> = BTreeMap::new();
            for d in datasets {
                by_tag.entry(d.functionality_tag.to_string()).or_default().push(d);
            }
            by_tag.into_values().collect()
        }
        AggregatePolicy::SizeBalancedOddEven { m } => {
            if m > datasets.len() {
                return Err(DatasetError::TooManyDomains(m, datasets.len()));
            }
            let mut sorted = datasets;
            // Descending sample count, name as the deterministic tie-break.
            sorted.sort_by(|a, b| b.n().cmp(&a.n()).then(a.circuit_name.cmp(&b.circuit_name)));
            let mut groups: Vec<Vec<CircuitDataset>> = (0..m).map(|_| Vec::new()).collect();
            for (i, d) in sorted.into_iter().enumerate() {
                groups[i % m].push(d);
            }
            groups
        }
    };
    let domains = groups
        .into_iter()
        .enumerate()
        .map(|(id, group)| {
            let circuits = group.iter().map(|d| d.circuit_name.clone()).collect();
            let samples = group.into_iter().flat_map(|d| d.samples).collect();
            Domain {
                id,
                circuits,
                samples,
            }
        })
        .collect();
    Ok(DomainSet { domains, policy })
}

/// The data-dependent factor of the generalization bound: `(1/M) Σ_k 1/n_k`.
/// For fixed `M` and total sample count it is minimized by the balanced
/// allocation `n_k = n/M`.
pub fn bound_variable_term(counts: &[usize]) -> f64 {
    let m = counts.len() as f64;
    counts.iter().map(|&n| 1.0 / n as f64).sum::<f64>() / m
}

/// Constants instantiating the full bound expression for numeric checks.
#[derive(Clone, Copy, Debug)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub delta: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c1: 0.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            delta: 0.05,
        }
    }
}

/// Evaluate `c1 + c2·(log 2δ⁻¹/M)·Σ 1/n_k + c3·log δ⁻¹/M + c4/M`.
pub fn generalization_bound(counts: &[usize], c: &BoundConstants) -> f64 {
    let m = counts.len() as f64;
    let sum_inv: f64 = counts.iter().map(|&n| 1.0 / n as f64).sum();
    c.c1 + c.c2 * (2.0 / c.delta).ln() / m * sum_inv + c.c3 * (1.0 / c.delta).ln() / m + c.c4 / m
}

/// Largest domain count for which splitting balanced domains beats pooling:
/// `M ≤ n · (c3·log δ⁻¹ + c4) / (c2·log 2δ⁻¹)`.
pub fn max_beneficial_domains(total_samples: usize, c: &BoundConstants) -> usize {
    let bound =
        total_samples as f64 * (c.c3 * (1.0 / c.delta).ln() + c.c4) / (c.c2 * (2.0 / c.delta).ln());
    bound.floor() as usize
}

/// Inverse-class-frequency weight for the positive class over the whole
/// domain set: `α_pos = n_neg / (n_pos + n_neg)`.
pub fn class_weights(domain_set: &DomainSet) -> Result<f64, DatasetError> {
    let mut pos = 0usize;
    let mut neg = 0usize;
    for d in &domain_set.domains {
        for s in &d.samples {
            if s.label {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(DatasetError::SingleClass);
    }
    Ok(neg as f64 / (pos + neg) as f64)
}

/// Header line of a `dataset.jsonl` file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub circuit: String,
    pub tag: FunctionalityTag,
    pub channels: Vec<String>,
    pub operator_params: OperatorParams,
    pub generator_seed: Option<u64>,
    pub n: usize,
    pub positives: usize,
    pub zero_effective: bool,
    /// Populated when the rows were written normalized; raw dumps carry none.
    pub minmax: Option<MinMaxStats>,
}

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Write a dataset as line-delimited JSON: one header line, one sample line
/// per visited node.
pub fn write_dataset_jsonl(ds: &CircuitDataset, path: &Path) -> Result<(), DatasetError> {
    let header = DatasetHeader {
        schema_version: DATASET_SCHEMA_VERSION,
        circuit: ds.circuit_name.clone(),
        tag: ds.functionality_tag,
        channels: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        operator_params: ds.operator_params,
        generator_seed: ds.generator_seed,
        n: ds.n(),
        positives: ds.positives(),
        zero_effective: ds.zero_effective,
        minmax: None,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for s in &ds.samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset_jsonl(path: &Path) -> Result<CircuitDataset, DatasetError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| DatasetError::Malformed("empty file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)?;
    if header.schema_version != DATASET_SCHEMA_VERSION {
        return Err(DatasetError::Malformed(format!(
            "schema version {} != {DATASET_SCHEMA_VERSION}",
            header.schema_version
        )));
    }
    let mut samples = Vec::with_capacity(header.n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line)?);
    }
    if samples.len() != header.n {
        return Err(DatasetError::Malformed(format!(
            "expected {} samples, found {}",
            header.n,
            samples.len()
        )));
    }
    Ok(CircuitDataset {
        circuit_name: header.circuit,
        functionality_tag: header.tag,
        samples,
        zero_effective: header.zero_effective,
        operator_params: header.operator_params,
        generator_seed: header.generator_seed,
    })
}

/// Write the operator outcome log (one JSON record per visited node).
pub fn write_outcome_log(records: &[OutcomeRecord], path: &Path) -> Result<(), DatasetError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_outcome_log(path: &Path) -> Result<Vec<OutcomeRecord>, DatasetError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// The `domains.json` manifest: circuits per domain id.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainsManifest {
    pub policy: AggregatePolicy,
    pub m: usize,
    pub domains: Vec<DomainEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainEntry {
    pub id: usize,
    pub circuits: Vec<String>,
    pub n: usize,
}

impl DomainsManifest {
    pub fn from_domain_set(set: &DomainSet) -> Self {
        DomainsManifest {
            policy: set.policy,
            m: set.m(),
            domains: set
                .domains
                .iter()
                .map(|d| DomainEntry {
                    id: d.id,
                    circuits: d.circuits.clone(),
                    n: d.n(),
                })
                .collect(),
        }
    }
}
