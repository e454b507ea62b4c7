//! Focal loss for the heavily imbalanced effective-node classification.
//!
//! `l(p, y) = -α·y·(1-p)^γ·log p - (1-α)·(1-y)·p^γ·log(1-p)` with the
//! probability clamped away from 0 and 1 before the logarithms. At γ = 0 and
//! α = 0.5 this is half the standard binary cross-entropy.

use super::mlp::sigmoid;

pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Loss for one prediction given as a probability.
pub fn focal_loss(p: f64, y: bool, alpha: f64, gamma: f64) -> f64 {
    let p = clamp_prob(p);
    if y {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// d loss / d p at a clamped probability.
fn focal_dp(p: f64, y: bool, alpha: f64, gamma: f64) -> f64 {
    if y {
        let omp = 1.0 - p;
        let deriv = if gamma == 0.0 {
            1.0 / p
        } else {
            -gamma * omp.powf(gamma - 1.0) * p.ln() + omp.powf(gamma) / p
        };
        -alpha * deriv
    } else {
        let deriv = if gamma == 0.0 {
            -1.0 / (1.0 - p)
        } else {
            gamma * p.powf(gamma - 1.0) * (1.0 - p).ln() - p.powf(gamma) / (1.0 - p)
        };
        -(1.0 - alpha) * deriv
    }
}

/// Loss and its gradient with respect to the logit `z` (so the sigmoid and
/// clamp are part of the differentiated function).
pub fn focal_from_logit(z: f64, y: bool, alpha: f64, gamma: f64) -> (f64, f64) {
    let s = sigmoid(z);
    let p = clamp_prob(s);
    let loss = focal_loss(p, y, alpha, gamma);
    let dz = if s == p {
        focal_dp(p, y, alpha, gamma) * s * (1.0 - s)
    } else {
        0.0 // saturated into the clamp region
    };
    (loss, dz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_half_cross_entropy() {
        // p = 0.5, y = 1, alpha = 0.5, gamma = 0 -> 0.5 * ln 2.
        let l = focal_loss(0.5, true, 0.5, 0.0);
        assert!((l - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 0.3466).abs() < 1e-4);
    }

    #[test]
    fn confident_correct_loss_vanishes() {
        for gamma in [0.5, 1.0, 2.0] {
            let l = focal_loss(1.0 - 1e-6, true, 0.25, gamma);
            assert!(l < 1e-5, "gamma {gamma}: {l}");
        }
    }

    #[test]
    fn matches_direct_formula_evaluation() {
        // Independent re-evaluation of the formula, term by term.
        let (p, alpha, gamma) = (0.3f64, 0.95f64, 2.0f64);
        let expected_pos = -alpha * (1.0 - p).powi(2) * p.ln();
        assert!((focal_loss(p, true, alpha, gamma) - expected_pos).abs() < 1e-12);
        let expected_neg = -(1.0 - alpha) * p.powi(2) * (1.0 - p).ln();
        assert!((focal_loss(p, false, alpha, gamma) - expected_neg).abs() < 1e-12);
    }

    #[test]
    fn loss_nonnegative() {
        for &p in &[1e-9, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-9] {
            for &y in &[false, true] {
                assert!(focal_loss(p, y, 0.9, 2.0) >= 0.0);
            }
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let h = 1e-6;
        let mut probes = 0;
        for &z in &[-3.0, -1.2, -0.3, 0.0, 0.4, 1.7, 2.9] {
            for &y in &[false, true] {
                for &(alpha, gamma) in &[(0.5, 0.0), (0.95, 2.0), (0.25, 1.0)] {
                    let (_, dz) = focal_from_logit(z, y, alpha, gamma);
                    let (lp, _) = focal_from_logit(z + h, y, alpha, gamma);
                    let (lm, _) = focal_from_logit(z - h, y, alpha, gamma);
                    let fd = (lp - lm) / (2.0 * h);
                    let rel = (fd - dz).abs() / (1.0 + fd.abs().max(dz.abs()));
                    assert!(rel < 1e-7, "z={z} y={y} a={alpha} g={gamma}: {fd} vs {dz}");
                    probes += 1;
                }
            }
        }
        assert!(probes >= 42);
    }
}
