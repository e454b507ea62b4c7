//! Training loops: the multi-head domain-aware classifier and the flat
//! ensemble baseline.
//!
//! Each optimization step draws one minibatch from one domain and routes it
//! through that domain's head; the step objective is scaled by 1/(M·n_k) so
//! an epoch's summed loss is exactly the per-domain-averaged empirical risk.
//! Training is single-threaded and fully determined by the seed.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{scheduled_lr, Adam};
use super::gcnn::{Batch, CogModel};
use super::loss::focal_from_logit;
use super::mlp::{grad_slices, sigmoid, Mlp};
use crate::features::BipartiteSubgraph;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// Multiply the learning rate by `decay_rate` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Focal focusing parameter.
    pub gamma: f64,
    /// Positive-class weight; `None` resolves to inverse class frequency.
    pub alpha: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults; `paper_scale` carries the full-size settings.
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            decay_every: 100,
            decay_rate: 0.96,
            batch_size: 1024,
            epochs: 300,
            gamma: 2.0,
            alpha: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-scale settings: batch 10240, 3000 epochs.
    pub fn paper_scale() -> Self {
        TrainConfig {
            batch_size: 10240,
            epochs: 3000,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss diverged to {loss} at epoch {epoch}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("model has {model} heads but the domain set has {domains}")]
    HeadMismatch { model: usize, domains: usize },
    #[error("empty training data")]
    Empty,
    #[error("feature width {got} does not match the model's {expected}")]
    FeatureWidth { got: usize, expected: usize },
}

/// One labeled, already-normalized training sample.
pub type LabeledGraph = (BipartiteSubgraph, bool);

fn resolve_alpha(domains: &[Vec<LabeledGraph>], cfg: &TrainConfig) -> f64 {
    if let Some(a) = cfg.alpha {
        return a;
    }
    let (mut pos, mut total) = (0usize, 0usize);
    for d in domains {
        for (_, y) in d {
            pos += *y as usize;
            total += 1;
        }
    }
    if pos == 0 || pos == total {
        0.5
    } else {
        1.0 - pos as f64 / total as f64
    }
}

/// Train the multi-head model on per-domain sample lists. Returns the
/// per-epoch loss curve (the empirical risk of Eq-style per-domain
/// averaging, summed over the epoch's steps).
pub fn multihead_train(
    model: &mut CogModel,
    domains: &[Vec<LabeledGraph>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    if domains.len() != model.heads.len() {
        return Err(TrainError::HeadMismatch {
            model: model.heads.len(),
            domains: domains.len(),
        });
    }
    if domains.iter().all(|d| d.is_empty()) {
        return Err(TrainError::Empty);
    }
    let m = domains.len();
    let alpha = resolve_alpha(domains, cfg);
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let mut opt = Adam::new();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = scheduled_lr(cfg.lr, epoch, cfg.decay_every, cfg.decay_rate);
        // Per-domain shuffled batch queues, then a round-robin step order.
        let mut queues: Vec<Vec<Vec<usize>>> = Vec::with_capacity(m);
        for d in domains {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.shuffle(&mut rng);
            queues.push(idx.chunks(cfg.batch_size.max(1)).map(|c| c.to_vec()).collect());
        }
        let mut steps: Vec<(usize, Vec<usize>)> = Vec::new();
        let rounds = queues.iter().map(Vec::len).max().unwrap_or(0);
        for round in 0..rounds {
            for (k, q) in queues.iter().enumerate() {
                if round < q.len() {
                    steps.push((k, q[round].clone()));
                }
            }
        }

        let mut epoch_loss = 0.0;
        for (k, batch_idx) in steps {
            let n_k = domains[k].len();
            let scale = 1.0 / (m as f64 * n_k as f64);
            let graphs: Vec<&BipartiteSubgraph> =
                batch_idx.iter().map(|&i| &domains[k][i].0).collect();
            let labels: Vec<bool> = batch_idx.iter().map(|&i| domains[k][i].1).collect();
            let batch = Batch::from_graphs(graphs.iter().copied());
            let cache = model.forward(&batch);
            let logits = model.head_logits(&cache, k);
            let mut dlogits = Array2::zeros(logits.raw_dim());
            let mut step_loss = 0.0;
            for (j, &y) in labels.iter().enumerate() {
                let (l, dz) = focal_from_logit(logits[(j, 0)], y, alpha, cfg.gamma);
                step_loss += scale * l;
                dlogits[(j, 0)] = scale * dz;
            }
            if !step_loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    loss: step_loss,
                });
            }
            let grads = model.backward(&batch, &cache, k, &dlogits);
            let grad_slices = grads.grad_slices();
            let mut params = model.param_slices_mut();
            opt.step(lr, &mut params, &grad_slices);
            epoch_loss += step_loss;
        }
        if !epoch_loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                loss: epoch_loss,
            });
        }
        curve.push(epoch_loss);
    }
    Ok(curve)
}

/// The empirical risk of the current model (no updates): the per-domain
/// average of mean focal losses, `(1/M) Σ_k (1/n_k) Σ_j l_jk`.
pub fn empirical_risk(
    model: &CogModel,
    domains: &[Vec<LabeledGraph>],
    alpha: f64,
    gamma: f64,
) -> f64 {
    let m = domains.len() as f64;
    let mut total = 0.0;
    for (k, d) in domains.iter().enumerate() {
        if d.is_empty() {
            continue;
        }
        let graphs: Vec<&BipartiteSubgraph> = d.iter().map(|(x, _)| x).collect();
        let batch = Batch::from_graphs(graphs.iter().copied());
        let cache = model.forward(&batch);
        let logits = model.head_logits(&cache, k);
        let mut sum = 0.0;
        for (j, (_, y)) in d.iter().enumerate() {
            sum += focal_from_logit(logits[(j, 0)], *y, alpha, gamma).0;
        }
        total += sum / (m * d.len() as f64);
    }
    total
}

/// Mean of the head sigmoids: the test-time score in [0, 1].
pub fn predict_scores(model: &CogModel, graphs: &[&BipartiteSubgraph]) -> Vec<f64> {
    if graphs.is_empty() {
        return Vec::new();
    }
    let batch = Batch::from_graphs(graphs.iter().copied());
    let cache = model.forward(&batch);
    let logits = model.all_head_logits(&cache);
    let m = model.heads.len() as f64;
    logits
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|z| sigmoid(*z)).sum::<f64>() / m)
        .collect()
}

/// Flat-feature MLP ensemble baseline: independently initialized members
/// trained on the root feature vector alone, prediction is the mean member
/// probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleMlp {
    pub members: Vec<Mlp>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
}

impl Default for EnsembleConfig {
    /// Desk default: 5 members (full scale uses 15), three 1024-unit layers.
    fn default() -> Self {
        EnsembleConfig {
            members: 5,
            hidden: 1024,
            hidden_layers: 3,
        }
    }
}

impl EnsembleMlp {
    pub fn new(cfg: &EnsembleConfig, seeds: Vec<u64>) -> Self {
        assert_eq!(seeds.len(), cfg.members);
        let members = seeds
            .iter()
            .map(|&s| {
                let mut rng = Xoshiro256StarStar::seed_from_u64(s);
                let mut dims = vec![crate::features::FEAT_DIM];
                dims.extend(std::iter::repeat(cfg.hidden).take(cfg.hidden_layers));
                dims.push(1);
                Mlp::new(&dims, false, &mut rng)
            })
            .collect();
        EnsembleMlp { members, seeds }
    }

    /// Train every member on the pooled flat features with focal loss.
    pub fn train(
        &mut self,
        samples: &[(crate::features::NodeFeatures, bool)],
        cfg: &TrainConfig,
    ) -> Result<Vec<Vec<f64>>, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::Empty);
        }
        let pos = samples.iter().filter(|(_, y)| *y).count();
        let alpha = cfg.alpha.unwrap_or_else(|| {
            if pos == 0 || pos == samples.len() {
                0.5
            } else {
                1.0 - pos as f64 / samples.len() as f64
            }
        });
        let x_all: Vec<&crate::features::NodeFeatures> = samples.iter().map(|(x, _)| x).collect();
        let mut curves = Vec::with_capacity(self.members.len());
        for (member, &seed) in self.members.iter_mut().zip(&self.seeds) {
            let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x7a21);
            let mut opt = Adam::new();
            let mut curve = Vec::with_capacity(cfg.epochs);
            for epoch in 0..cfg.epochs {
                let lr = scheduled_lr(cfg.lr, epoch, cfg.decay_every, cfg.decay_rate);
                let mut idx: Vec<usize> = (0..samples.len()).collect();
                idx.shuffle(&mut rng);
                let mut epoch_loss = 0.0;
                for chunk in idx.chunks(cfg.batch_size.max(1)) {
                    let mut x = Array2::zeros((chunk.len(), crate::features::FEAT_DIM));
                    for (r, &i) in chunk.iter().enumerate() {
                        x.row_mut(r).assign(&ndarray::ArrayView::from(x_all[i]));
                    }
                    let (logits, cache) = member.forward(&x);
                    let scale = 1.0 / samples.len() as f64;
                    let mut dlogits = Array2::zeros(logits.raw_dim());
                    for (r, &i) in chunk.iter().enumerate() {
                        let (l, dz) =
                            focal_from_logit(logits[(r, 0)], samples[i].1, alpha, cfg.gamma);
                        epoch_loss += scale * l;
                        dlogits[(r, 0)] = scale * dz;
                    }
                    let (_, grads) = member.backward(&cache, &dlogits);
                    let gs = grad_slices(&grads);
                    let mut ps = member.param_slices_mut();
                    opt.step(lr, &mut ps, &gs);
                }
                if !epoch_loss.is_finite() {
                    return Err(TrainError::Diverged {
                        epoch,
                        loss: epoch_loss,
                    });
                }
                curve.push(epoch_loss);
            }
            curves.push(curve);
        }
        Ok(curves)
    }

    /// Mean member probability for each flat feature row.
    pub fn predict(&self, rows: &[crate::features::NodeFeatures]) -> Vec<f64> {
        if rows.is_empty() {
            return Vec::new();
        }
        let mut x = Array2::zeros((rows.len(), crate::features::FEAT_DIM));
        for (r, row) in rows.iter().enumerate() {
            x.row_mut(r).assign(&ndarray::ArrayView::from(row));
        }
        let mut acc = vec![0.0; rows.len()];
        for member in &self.members {
            let logits = member.infer(&x);
            for (r, a) in acc.iter_mut().enumerate() {
                *a += sigmoid(logits[(r, 0)]);
            }
        }
        acc.iter().map(|a| a / self.members.len() as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gcnn::GcnnConfig;
    use rand::Rng;

    /// Synthetic separable task: label = (t[3] > threshold); domains shift
    /// the other channels.
    pub fn synthetic_domain(
        seed: u64,
        n: usize,
        shift: f64,
        m_rows: usize,
    ) -> Vec<LabeledGraph> {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut t = [0.0; crate::features::FEAT_DIM];
                for (k, v) in t.iter_mut().enumerate() {
                    *v = (rng.gen_range(0.0..1.0) + if k % 3 == 0 { shift } else { 0.0 })
                        .clamp(0.0, 1.0);
                }
                let y = t[3] > 0.5;
                let c = (0..m_rows)
                    .map(|_| {
                        let mut row = [0.0; crate::features::FEAT_DIM];
                        for v in row.iter_mut() {
                            *v = (rng.gen_range(0.0..1.0) + shift * 0.5).clamp(0.0, 1.0);
                        }
                        row
                    })
                    .collect();
                (BipartiteSubgraph { t, c }, y)
            })
            .collect()
    }

    #[test]
    fn head_count_mismatch_errors() {
        let mut model = CogModel::new(GcnnConfig::tiny(2), 0);
        let domains = vec![synthetic_domain(1, 8, 0.0, 2)];
        assert!(matches!(
            multihead_train(&mut model, &domains, &TrainConfig::default()),
            Err(TrainError::HeadMismatch { .. })
        ));
    }

    #[test]
    fn single_domain_risk_equals_pooled_focal_mean() {
        // M = 1 degenerates to the plain focal empirical risk.
        let model = CogModel::new(GcnnConfig::tiny(1), 3);
        let d = synthetic_domain(2, 16, 0.1, 3);
        let risk = empirical_risk(&model, std::slice::from_ref(&d), 0.8, 2.0);
        let graphs: Vec<&BipartiteSubgraph> = d.iter().map(|(x, _)| x).collect();
        let batch = Batch::from_graphs(graphs.iter().copied());
        let cache = model.forward(&batch);
        let logits = model.head_logits(&cache, 0);
        let mean: f64 = d
            .iter()
            .enumerate()
            .map(|(j, (_, y))| focal_from_logit(logits[(j, 0)], *y, 0.8, 2.0).0)
            .sum::<f64>()
            / d.len() as f64;
        assert!((risk - mean).abs() < 1e-12);
    }

    #[test]
    fn separable_toy_trains_to_low_loss() {
        let mut model = CogModel::new(GcnnConfig::tiny(2), 11);
        let domains = vec![
            synthetic_domain(5, 60, 0.0, 2),
            synthetic_domain(6, 60, 0.2, 2),
        ];
        let cfg = TrainConfig {
            batch_size: 32,
            epochs: 300,
            lr: 3e-3,
            seed: 7,
            ..TrainConfig::default()
        };
        let curve = multihead_train(&mut model, &domains, &cfg).unwrap();
        let last = *curve.last().unwrap();
        assert!(last < 0.05, "final loss {last}");
        assert!(curve[0] > last);
    }

    #[test]
    fn training_is_deterministic() {
        let domains = vec![synthetic_domain(9, 24, 0.0, 2)];
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 5,
            seed: 42,
            ..TrainConfig::default()
        };
        let mut m1 = CogModel::new(GcnnConfig::tiny(1), 10);
        let c1 = multihead_train(&mut m1, &domains, &cfg).unwrap();
        let mut m2 = CogModel::new(GcnnConfig::tiny(1), 10);
        let c2 = multihead_train(&mut m2, &domains, &cfg).unwrap();
        assert_eq!(c1, c2); // bit-identical loss curves
        let g: Vec<&BipartiteSubgraph> = domains[0].iter().map(|(x, _)| x).take(4).collect();
        assert_eq!(predict_scores(&m1, &g), predict_scores(&m2, &g));
    }

    #[test]
    fn scores_lie_in_unit_interval() {
        let model = CogModel::new(GcnnConfig::tiny(3), 12);
        let d = synthetic_domain(13, 32, 0.3, 4);
        let graphs: Vec<&BipartiteSubgraph> = d.iter().map(|(x, _)| x).collect();
        for s in predict_scores(&model, &graphs) {
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn mean_head_score_matches_stacked_path() {
        // Two routes: per-head loop with scalar sigmoids vs one stacked
        // matrix of head weights applied in a single product.
        let model = CogModel::new(GcnnConfig::tiny(4), 14);
        let d = synthetic_domain(15, 10, 0.0, 3);
        let graphs: Vec<&BipartiteSubgraph> = d.iter().map(|(x, _)| x).collect();
        let loop_scores = predict_scores(&model, &graphs);
        let batch = Batch::from_graphs(graphs.iter().copied());
        let cache = model.forward(&batch);
        let w = model.cfg.trunk_width;
        let mut stacked = Array2::zeros((model.heads.len(), w));
        let mut bias = Vec::new();
        for (k, h) in model.heads.iter().enumerate() {
            stacked.row_mut(k).assign(&h.w.row(0));
            bias.push(h.b[0]);
        }
        let logits = cache.trunk_out.dot(&stacked.t());
        for (i, s) in loop_scores.iter().enumerate() {
            let mean: f64 = (0..model.heads.len())
                .map(|k| sigmoid(logits[(i, k)] + bias[k]))
                .sum::<f64>()
                / model.heads.len() as f64;
            assert!((s - mean).abs() < 1e-7);
        }
    }

    #[test]
    fn ensemble_single_member_is_plain_mlp() {
        let cfg = EnsembleConfig {
            members: 1,
            hidden: 16,
            hidden_layers: 2,
        };
        let ens = EnsembleMlp::new(&cfg, vec![3]);
        let rows: Vec<crate::features::NodeFeatures> = vec![[0.25; 20], [0.75; 20]];
        let pred = ens.predict(&rows);
        let mut x = Array2::zeros((2, 20));
        for (r, row) in rows.iter().enumerate() {
            x.row_mut(r).assign(&ndarray::ArrayView::from(row));
        }
        let logits = ens.members[0].infer(&x);
        for (p, z) in pred.iter().zip(logits.column(0)) {
            assert_eq!(*p, sigmoid(*z));
        }
    }

    #[test]
    fn ensemble_identical_seeds_collapse_to_single_member() {
        let cfg = EnsembleConfig {
            members: 3,
            hidden: 16,
            hidden_layers: 2,
        };
        let ens = EnsembleMlp::new(&cfg, vec![7, 7, 7]);
        let single = EnsembleMlp::new(
            &EnsembleConfig {
                members: 1,
                ..cfg
            },
            vec![7],
        );
        let rows: Vec<crate::features::NodeFeatures> = vec![[0.4; 20]];
        assert_eq!(ens.predict(&rows), single.predict(&rows));
    }

    #[test]
    fn ensemble_variance_shrinks_with_members() {
        // Spread of predictions across seeds narrows as members average out.
        let eval_rows: Vec<crate::features::NodeFeatures> =
            (0..8).map(|i| [(i as f64) / 8.0; 20]).collect();
        let spread = |members: usize| {
            let preds: Vec<Vec<f64>> = (0..6)
                .map(|trial| {
                    let cfg = EnsembleConfig {
                        members,
                        hidden: 16,
                        hidden_layers: 2,
                    };
                    let seeds = (0..members).map(|i| (trial * 100 + i) as u64).collect();
                    EnsembleMlp::new(&cfg, seeds).predict(&eval_rows)
                })
                .collect();
            // Mean per-row variance across trials.
            let mut total = 0.0;
            for r in 0..eval_rows.len() {
                let vals: Vec<f64> = preds.iter().map(|p| p[r]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            }
            total / eval_rows.len() as f64
        };
        assert!(spread(8) < spread(1));
    }
}
