//! Bipartite-graph encoder and the multi-head domain-aware classifier.
//!
//! The encoder performs one graph convolution as two interleaved half
//! convolutions: every non-root row is updated from the root,
//! `h(c_i) = f_C(c_i ‖ g_C(c_i ‖ t))`, then the root gathers the mean of the
//! transformed rows, `h(t) = f_T(t ‖ (1/m)·Σ g_T(h(c_i) ‖ t))`. The four
//! perceptrons are two-layer with relu. A shared trunk follows, with one
//! linear head per training domain; head outputs are logits and the sigmoid
//! is applied by the loss or the score path. Mean aggregation uses Neumaier
//! compensated summation so the root embedding is invariant to row order
//! and duplication to tight tolerance.

use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use super::mlp::{grad_slices, Dense, DenseGrads, Mlp};
use crate::features::BipartiteSubgraph;

/// Architecture of the encoder + classifier stack.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GcnnConfig {
    pub feat_dim: usize,
    pub embed_dim: usize,
    pub trunk_width: usize,
    pub trunk_layers: usize,
    pub heads: usize,
}

impl GcnnConfig {
    /// Production sizes: 128-wide embeddings, three 1024-unit trunk layers.
    pub fn standard(heads: usize) -> Self {
        GcnnConfig {
            feat_dim: crate::features::FEAT_DIM,
            embed_dim: 128,
            trunk_width: 1024,
            trunk_layers: 3,
            heads,
        }
    }

    /// Small sizes for gradient checks and fast tests.
    pub fn tiny(heads: usize) -> Self {
        GcnnConfig {
            feat_dim: crate::features::FEAT_DIM,
            embed_dim: 8,
            trunk_width: 16,
            trunk_layers: 3,
            heads,
        }
    }
}

/// The full classification model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CogModel {
    pub cfg: GcnnConfig,
    pub g_c: Mlp,
    pub f_c: Mlp,
    pub g_t: Mlp,
    pub f_t: Mlp,
    pub trunk: Mlp,
    pub heads: Vec<Dense>,
}

/// Gradients mirroring [`CogModel`]'s tensor layout.
pub struct CogGrads {
    pub g_c: Vec<DenseGrads>,
    pub f_c: Vec<DenseGrads>,
    pub g_t: Vec<DenseGrads>,
    pub f_t: Vec<DenseGrads>,
    pub trunk: Vec<DenseGrads>,
    pub heads: Vec<DenseGrads>,
}

impl CogModel {
    pub fn new(cfg: GcnnConfig, seed: u64) -> Self {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let (f, e, w) = (cfg.feat_dim, cfg.embed_dim, cfg.trunk_width);
        let g_c = Mlp::new(&[2 * f, e, e], true, &mut rng);
        let f_c = Mlp::new(&[f + e, e, e], true, &mut rng);
        let g_t = Mlp::new(&[e + f, e, e], true, &mut rng);
        let f_t = Mlp::new(&[f + e, e, e], true, &mut rng);
        let mut trunk_dims = vec![e];
        trunk_dims.extend(std::iter::repeat(w).take(cfg.trunk_layers));
        let trunk = Mlp::new(&trunk_dims, true, &mut rng);
        let heads = (0..cfg.heads).map(|_| Dense::new(w, 1, &mut rng)).collect();
        CogModel {
            cfg,
            g_c,
            f_c,
            g_t,
            f_t,
            trunk,
            heads,
        }
    }

    pub fn param_count(&self) -> usize {
        self.g_c.param_count()
            + self.f_c.param_count()
            + self.g_t.param_count()
            + self.f_t.param_count()
            + self.trunk.param_count()
            + self.heads.iter().map(|h| h.w.len() + h.b.len()).sum::<usize>()
    }

    /// All parameter tensors in a fixed order; the optimizer and the
    /// checkpoint rely on this ordering, and each tensor appears exactly once.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        out.extend(self.g_c.param_slices_mut());
        out.extend(self.f_c.param_slices_mut());
        out.extend(self.g_t.param_slices_mut());
        out.extend(self.f_t.param_slices_mut());
        out.extend(self.trunk.param_slices_mut());
        for h in &mut self.heads {
            out.push(h.w.as_slice_mut().unwrap());
            out.push(h.b.as_slice_mut().unwrap());
        }
        out
    }

    pub fn zero_grads(&self) -> CogGrads {
        CogGrads {
            g_c: self.g_c.zero_grads(),
            f_c: self.f_c.zero_grads(),
            g_t: self.g_t.zero_grads(),
            f_t: self.f_t.zero_grads(),
            trunk: self.trunk.zero_grads(),
            heads: self.heads.iter().map(Dense::zero_grads).collect(),
        }
    }
}

impl CogGrads {
    pub fn grad_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        out.extend(grad_slices(&self.g_c));
        out.extend(grad_slices(&self.f_c));
        out.extend(grad_slices(&self.g_t));
        out.extend(grad_slices(&self.f_t));
        out.extend(grad_slices(&self.trunk));
        out.extend(grad_slices(&self.heads));
        out
    }
}

/// A batch of bipartite graphs flattened into dense matrices.
pub struct Batch {
    /// Root rows, (B, f).
    pub t: Array2<f64>,
    /// All non-root rows concatenated, (R, f).
    pub c: Array2<f64>,
    /// Row ranges per sample: sample i owns rows offsets[i]..offsets[i+1].
    pub offsets: Vec<usize>,
}

impl Batch {
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a BipartiteSubgraph>) -> Self {
        let graphs: Vec<&BipartiteSubgraph> = graphs.into_iter().collect();
        let f = crate::features::FEAT_DIM;
        let b = graphs.len();
        let total_rows: usize = graphs.iter().map(|g| g.m()).sum();
        let mut t = Array2::zeros((b, f));
        let mut c = Array2::zeros((total_rows, f));
        let mut offsets = Vec::with_capacity(b + 1);
        offsets.push(0);
        let mut r = 0;
        for (i, g) in graphs.iter().enumerate() {
            t.row_mut(i).assign(&ndarray::ArrayView::from(&g.t));
            for row in &g.c {
                c.row_mut(r).assign(&ndarray::ArrayView::from(row));
                r += 1;
            }
            offsets.push(r);
        }
        Batch { t, c, offsets }
    }

    pub fn len(&self) -> usize {
        self.t.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.t.nrows() == 0
    }
}

/// Intermediates of one encoder + trunk forward pass.
pub struct ForwardCache {
    gc_cache: super::mlp::MlpCache,
    fc_cache: super::mlp::MlpCache,
    gt_cache: super::mlp::MlpCache,
    ft_cache: super::mlp::MlpCache,
    trunk_cache: super::mlp::MlpCache,
    ft_in: Array2<f64>,
    pub trunk_out: Array2<f64>,
}

fn hcat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).unwrap()
}

/// Neumaier-compensated column sums over a row range, divided by the count.
fn compensated_mean(rows: &Array2<f64>, lo: usize, hi: usize, out: &mut ndarray::ArrayViewMut1<f64>) {
    let m = hi - lo;
    if m == 0 {
        out.fill(0.0);
        return;
    }
    let dim = rows.ncols();
    for d in 0..dim {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for r in lo..hi {
            let v = rows[(r, d)];
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        out[d] = (sum + comp) / m as f64;
    }
}

impl CogModel {
    /// Root embeddings and trunk features for a batch; returns the cache for
    /// the backward pass.
    pub fn forward(&self, batch: &Batch) -> ForwardCache {
        let f = self.cfg.feat_dim;
        let e = self.cfg.embed_dim;
        let total_rows = batch.c.nrows();
        // Root features replicated onto their sample's rows.
        let mut t_rep = Array2::zeros((total_rows, f));
        for i in 0..batch.len() {
            for r in batch.offsets[i]..batch.offsets[i + 1] {
                t_rep.row_mut(r).assign(&batch.t.row(i));
            }
        }
        let gc_in = hcat(&batch.c, &t_rep);
        let (gc_out, gc_cache) = self.g_c.forward(&gc_in);
        let fc_in = hcat(&batch.c, &gc_out);
        let (h_c, fc_cache) = self.f_c.forward(&fc_in);
        let gt_in = hcat(&h_c, &t_rep);
        let (gt_out, gt_cache) = self.g_t.forward(&gt_in);
        let mut agg = Array2::zeros((batch.len(), e));
        for i in 0..batch.len() {
            let mut row = agg.row_mut(i);
            compensated_mean(&gt_out, batch.offsets[i], batch.offsets[i + 1], &mut row);
        }
        let ft_in = hcat(&batch.t, &agg);
        let (h_t, ft_cache) = self.f_t.forward(&ft_in);
        let (trunk_out, trunk_cache) = self.trunk.forward(&h_t);
        ForwardCache {
            gc_cache,
            fc_cache,
            gt_cache,
            ft_cache,
            trunk_cache,
            ft_in,
            trunk_out,
        }
    }

    /// Root embedding h(t) for a single graph (used by symmetry tests).
    pub fn root_embedding(&self, x: &BipartiteSubgraph) -> Vec<f64> {
        let batch = Batch::from_graphs([x]);
        let cache = self.forward(&batch);
        let h_t = self.f_t.infer(&cache.ft_in);
        h_t.row(0).to_vec()
    }

    /// Logits of one head, (B, 1).
    pub fn head_logits(&self, cache: &ForwardCache, head: usize) -> Array2<f64> {
        self.heads[head].forward(&cache.trunk_out)
    }

    /// Logits of every head, (B, M).
    pub fn all_head_logits(&self, cache: &ForwardCache) -> Array2<f64> {
        let b = cache.trunk_out.nrows();
        let mut out = Array2::zeros((b, self.heads.len()));
        for (k, head) in self.heads.iter().enumerate() {
            let l = head.forward(&cache.trunk_out);
            out.column_mut(k).assign(&l.column(0));
        }
        out
    }

    /// Backpropagate a gradient on one head's logits through the whole stack.
    pub fn backward(
        &self,
        batch: &Batch,
        cache: &ForwardCache,
        head: usize,
        dlogits: &Array2<f64>,
    ) -> CogGrads {
        let f = self.cfg.feat_dim;
        let e = self.cfg.embed_dim;
        let mut grads = self.zero_grads();

        let (d_trunk_out, head_g) = self.heads[head].backward(&cache.trunk_out, dlogits);
        grads.heads[head] = head_g;
        let (d_h_t, trunk_g) = self.trunk.backward(&cache.trunk_cache, &d_trunk_out);
        grads.trunk = trunk_g;
        let (d_ft_in, ft_g) = self.f_t.backward(&cache.ft_cache, &d_h_t);
        grads.f_t = ft_g;
        // Split [t ‖ agg]; the t part ends at the features (no grad needed).
        let d_agg = d_ft_in.slice(s![.., f..f + e]).to_owned();

        // Spread each sample's aggregate gradient uniformly over its rows.
        let total_rows = batch.c.nrows();
        let mut d_gt_out = Array2::zeros((total_rows, e));
        for i in 0..batch.len() {
            let (lo, hi) = (batch.offsets[i], batch.offsets[i + 1]);
            if hi == lo {
                continue;
            }
            let scale = 1.0 / (hi - lo) as f64;
            for r in lo..hi {
                let mut row = d_gt_out.row_mut(r);
                row.assign(&d_agg.row(i));
                row.mapv_inplace(|v| v * scale);
            }
        }

        let (d_gt_in, gt_g) = self.g_t.backward(&cache.gt_cache, &d_gt_out);
        grads.g_t = gt_g;
        let d_h_c = d_gt_in.slice(s![.., 0..e]).to_owned();
        let (d_fc_in, fc_g) = self.f_c.backward(&cache.fc_cache, &d_h_c);
        grads.f_c = fc_g;
        let d_gc_out = d_fc_in.slice(s![.., f..f + e]).to_owned();
        let (_d_gc_in, gc_g) = self.g_c.backward(&cache.gc_cache, &d_gc_out);
        grads.g_c = gc_g;
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_graph(rng: &mut Xoshiro256StarStar, m: usize) -> BipartiteSubgraph {
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
    }

    #[test]
    fn zero_params_zero_embedding() {
        let mut model = CogModel::new(GcnnConfig::tiny(1), 0);
        for s in model.param_slices_mut() {
            s.fill(0.0);
        }
        let mut rng = Xoshiro256StarStar::seed_from_u64(5);
        let x = random_graph(&mut rng, 4);
        let h = model.root_embedding(&x);
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn permutation_invariance() {
        let model = CogModel::new(GcnnConfig::tiny(1), 1);
        let mut rng = Xoshiro256StarStar::seed_from_u64(6);
        let x = random_graph(&mut rng, 7);
        let mut perm = x.clone();
        perm.c.reverse();
        let h1 = model.root_embedding(&x);
        let h2 = model.root_embedding(&perm);
        for (a, b) in h1.iter().zip(&h2) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn duplication_invariance() {
        let model = CogModel::new(GcnnConfig::tiny(1), 2);
        let mut rng = Xoshiro256StarStar::seed_from_u64(7);
        let x = random_graph(&mut rng, 5);
        let mut doubled = x.clone();
        doubled.c.extend(x.c.iter().cloned());
        let h1 = model.root_embedding(&x);
        let h2 = model.root_embedding(&doubled);
        for (a, b) in h1.iter().zip(&h2) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn empty_window_uses_zero_aggregate() {
        let model = CogModel::new(GcnnConfig::tiny(1), 3);
        let mut rng = Xoshiro256StarStar::seed_from_u64(8);
        let x = BipartiteSubgraph {
            t: random_graph(&mut rng, 0).t,
            c: vec![],
        };
        // Must not panic, and must equal the hand-computed path with a zero
        // aggregate.
        let h = model.root_embedding(&x);
        let t = ndarray::Array2::from_shape_vec((1, 20), x.t.to_vec()).unwrap();
        let agg = ndarray::Array2::zeros((1, model.cfg.embed_dim));
        let ft_in = hcat(&t, &agg);
        let expected = model.f_t.infer(&ft_in);
        for (a, b) in h.iter().zip(expected.row(0).iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parameter_count_matches_slices() {
        let mut model = CogModel::new(GcnnConfig::tiny(3), 4);
        let total = model.param_count();
        let by_slices: usize = model.param_slices_mut().iter().map(|s| s.len()).sum();
        assert_eq!(total, by_slices);
        let grads = model.zero_grads();
        let by_grads: usize = grads.grad_slices().iter().map(|s| s.len()).sum();
        assert_eq!(total, by_grads);
    }
}
