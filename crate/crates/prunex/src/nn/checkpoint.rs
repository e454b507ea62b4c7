//! Versioned JSON model checkpoints bundling the architecture, parameters
//! and the normalization statistics fitted on the training domains.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gcnn::CogModel;
use super::train::{predict_scores, EnsembleMlp};
use crate::features::{BipartiteSubgraph, MinMaxStats};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint version {0} is not supported (expected {CHECKPOINT_VERSION})")]
    Version(u32),
}

/// Either classifier family behind one scoring interface.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Cog(CogModel),
    EnsembleMlp(EnsembleMlp),
}

/// A trained scorer: model parameters plus the feature normalization that
/// must be applied to raw inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoringModel {
    pub version: u32,
    pub model: ModelKind,
    pub minmax: MinMaxStats,
}

impl ScoringModel {
    pub fn cog(model: CogModel, minmax: MinMaxStats) -> Self {
        ScoringModel {
            version: CHECKPOINT_VERSION,
            model: ModelKind::Cog(model),
            minmax,
        }
    }

    pub fn ensemble(model: EnsembleMlp, minmax: MinMaxStats) -> Self {
        ScoringModel {
            version: CHECKPOINT_VERSION,
            model: ModelKind::EnsembleMlp(model),
            minmax,
        }
    }

    /// Score raw (unnormalized) bipartite graphs.
    pub fn score(&self, graphs: &[&BipartiteSubgraph]) -> Vec<f64> {
        let normalized: Vec<BipartiteSubgraph> =
            graphs.iter().map(|g| self.minmax.apply(g)).collect();
        match &self.model {
            ModelKind::Cog(m) => {
                let refs: Vec<&BipartiteSubgraph> = normalized.iter().collect();
                predict_scores(m, &refs)
            }
            ModelKind::EnsembleMlp(m) => {
                let rows: Vec<crate::features::NodeFeatures> =
                    normalized.iter().map(|g| g.t).collect();
                m.predict(&rows)
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: ScoringModel = serde_json::from_reader(file)?;
        if model.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(model.version));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEAT_DIM;
    use crate::nn::gcnn::GcnnConfig;

    fn unit_minmax() -> MinMaxStats {
        MinMaxStats {
            mins: vec![0.0; FEAT_DIM],
            maxs: vec![1.0; FEAT_DIM],
        }
    }

    #[test]
    fn save_load_roundtrip_preserves_scores() {
        let model = CogModel::new(GcnnConfig::tiny(2), 9);
        let sm = ScoringModel::cog(model, unit_minmax());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        sm.save(&path).unwrap();
        let back = ScoringModel::load(&path).unwrap();
        let x = BipartiteSubgraph {
            t: [0.3; FEAT_DIM],
            c: vec![[0.6; FEAT_DIM]; 3],
        };
        assert_eq!(sm.score(&[&x]), back.score(&[&x]));
    }

    #[test]
    fn checkpoint_bytes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mk = || {
            let model = CogModel::new(GcnnConfig::tiny(1), 4);
            ScoringModel::cog(model, unit_minmax())
        };
        let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
        mk().save(&p1).unwrap();
        mk().save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
