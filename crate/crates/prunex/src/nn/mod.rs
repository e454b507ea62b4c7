//! From-scratch dense neural stack: layers, focal loss, Adam, the
//! bipartite-graph encoder with its multi-head classifier, and the flat
//! ensemble baseline. Everything is f64, single-threaded and deterministic
//! under a fixed seed; gradients are hand-derived and checked against
//! finite differences.

pub mod adam;
pub mod checkpoint;
pub mod gcnn;
pub mod loss;
pub mod mlp;
pub mod train;

pub use adam::{scheduled_lr, Adam};
pub use checkpoint::{ModelKind, ScoringModel};
pub use gcnn::{Batch, CogModel, GcnnConfig};
pub use loss::{focal_from_logit, focal_loss};
pub use mlp::{sigmoid, Dense, Mlp};
pub use train::{
    empirical_risk, multihead_train, predict_scores, EnsembleConfig, EnsembleMlp, TrainConfig,
    TrainError,
};

#[cfg(test)]
mod grad_check {
    //! Whole-model gradient verification against central finite differences.

    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256StarStar;

    use super::gcnn::{Batch, CogModel, GcnnConfig};
    use super::loss::focal_from_logit;
    use crate::features::BipartiteSubgraph;

    fn random_batch(rng: &mut Xoshiro256StarStar, b: usize) -> (Vec<BipartiteSubgraph>, Vec<bool>) {
        let graphs: Vec<BipartiteSubgraph> = (0..b)
            .map(|i| {
                let m = i % 4; // include an empty window
                let mut t = [0.0; crate::features::FEAT_DIM];
                for v in t.iter_mut() {
                    *v = rng.gen_range(0.0..1.0);
                }
                let c = (0..m)
                    .map(|_| {
                        let mut row = [0.0; crate::features::FEAT_DIM];
                        for v in row.iter_mut() {
                            *v = rng.gen_range(0.0..1.0);
                        }
                        row
                    })
                    .collect();
                BipartiteSubgraph { t, c }
            })
            .collect();
        let labels = (0..b).map(|i| i % 2 == 0).collect();
        (graphs, labels)
    }

    fn batch_loss(model: &CogModel, batch: &Batch, labels: &[bool], head: usize) -> f64 {
        let cache = model.forward(batch);
        let logits = model.head_logits(&cache, head);
        labels
            .iter()
            .enumerate()
            .map(|(j, &y)| focal_from_logit(logits[(j, 0)], y, 0.9, 2.0).0)
            .sum()
    }

    /// Analytic gradients of the full stack (focal loss, heads, trunk, all
    /// four convolution perceptrons) match central finite differences on
    /// hundreds of randomly probed parameters.
    #[test]
    fn full_stack_gradients_match_finite_differences() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(2024);
        let mut model = CogModel::new(GcnnConfig::tiny(2), 31);
        let (graphs, labels) = random_batch(&mut rng, 3);
        let refs: Vec<&BipartiteSubgraph> = graphs.iter().collect();
        let batch = Batch::from_graphs(refs.iter().copied());
        let head = 1;

        let cache = model.forward(&batch);
        let logits = model.head_logits(&cache, head);
        let mut dlogits = Array2::zeros(logits.raw_dim());
        for (j, &y) in labels.iter().enumerate() {
            dlogits[(j, 0)] = focal_from_logit(logits[(j, 0)], y, 0.9, 2.0).1;
        }
        let grads = model.backward(&batch, &cache, head, &dlogits);
        let grad_flat: Vec<Vec<f64>> = grads
            .grad_slices()
            .iter()
            .map(|s| s.to_vec())
            .collect();

        let tensor_count = grad_flat.len();
        let h = 1e-6;
        let mut probes = 0;
        let mut max_rel: f64 = 0.0;
        for tensor_idx in 0..tensor_count {
            let len = grad_flat[tensor_idx].len();
            // Several probes per tensor, deterministic positions.
            for probe in 0..9usize.min(len) {
                let pos = (probe * 37 + tensor_idx * 11) % len;
                let analytic = grad_flat[tensor_idx][pos];
                let base = {
                    let params = model.param_slices_mut();
                    params[tensor_idx][pos]
                };
                {
                    let mut params = model.param_slices_mut();
                    params[tensor_idx][pos] = base + h;
                }
                let lp = batch_loss(&model, &batch, &labels, head);
                {
                    let mut params = model.param_slices_mut();
                    params[tensor_idx][pos] = base - h;
                }
                let lm = batch_loss(&model, &batch, &labels, head);
                {
                    let mut params = model.param_slices_mut();
                    params[tensor_idx][pos] = base;
                }
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - analytic).abs() / (1.0 + fd.abs().max(analytic.abs()));
                max_rel = max_rel.max(rel);
                assert!(
                    rel < 1e-4,
                    "tensor {tensor_idx} pos {pos}: fd {fd} vs analytic {analytic} (rel {rel})"
                );
                probes += 1;
            }
        }
        assert!(probes >= 200, "only {probes} probes");
        assert!(max_rel < 1e-4);
    }
}
