//! Hard thresholding over per-sample losses.
//!
//! `hard_threshold` keeps the indices of the k smallest losses, breaking
//! ties in favor of the lower index. Because the comparison key is the pair
//! (loss, index) there are no true ties, so the full-sort path and the
//! selection path used for large N produce identical results.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::activations::act_value;
use crate::error::{Error, Result};
use crate::types::{ActivationSpec, Dataset, ModelParams};

/// Above this length, selection replaces the full sort.
const SELECT_THRESHOLD: usize = 100_000;

/// The retained ("sub-quantile") set after thresholding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedSet {
    /// Strictly increasing sample indices, length k.
    pub indices: Vec<usize>,
    /// Losses at selection time, aligned with `indices`.
    pub losses_at_selection: Vec<f64>,
}

impl RetainedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total_loss(&self) -> f64 {
        self.losses_at_selection.iter().sum()
    }

    /// (true positives, false positives) against a ground-truth inlier mask.
    pub fn classify(&self, inlier_mask: &[bool]) -> (usize, usize) {
        let tp = self.indices.iter().filter(|&&i| inlier_mask[i]).count();
        (tp, self.len() - tp)
    }
}

/// Per-sample squared losses zeta_i = ||sigma(W x_i) - y_i||^2 (for K > 1
/// the squared l2 norm of the residual column; sigma applied entrywise).
pub fn per_sample_losses(
    params: &ModelParams,
    act: &ActivationSpec,
    ds: &Dataset,
) -> Result<Vec<f64>> {
    let (k, d) = (params.weights.nrows(), params.weights.ncols());
    if d != ds.dim() || k != ds.n_targets() {
        return Err(Error::DimensionMismatch(format!(
            "params are {k}x{d} but dataset has d = {}, K = {}",
            ds.dim(),
            ds.n_targets()
        )));
    }
    let z: DMatrix<f64> = &params.weights * &ds.covariates;
    let n = ds.n_samples();
    let mut losses = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for r in 0..k {
            let diff = act_value(act, z[(r, i)]) - ds.targets[(r, i)];
            acc += diff * diff;
        }
        if !acc.is_finite() {
            return Err(Error::Divergence {
                iter: 0,
                detail: format!("non-finite loss at sample {i}"),
            });
        }
        losses.push(acc);
    }
    Ok(losses)
}

/// HT(zeta; k): the indices of the k smallest losses, sorted ascending.
pub fn hard_threshold(zeta: &[f64], k: usize) -> Result<RetainedSet> {
    let n = zeta.len();
    if k == 0 || k > n {
        return Err(Error::ParamRange(format!(
            "retention size k = {k} out of range [1, {n}]"
        )));
    }
    if let Some(i) = zeta.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iter: 0,
            detail: format!("non-finite loss at sample {i}"),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let key = |&i: &usize| (zeta[i], i);
    if n <= SELECT_THRESHOLD {
        order.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    } else {
        order.select_nth_unstable_by(k - 1, |a, b| key(a).partial_cmp(&key(b)).unwrap());
    }
    let mut indices: Vec<usize> = order[..k].to_vec();
    indices.sort_unstable();
    let losses_at_selection = indices.iter().map(|&i| zeta[i]).collect();
    Ok(RetainedSet {
        indices,
        losses_at_selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use nalgebra::DMatrix;

    #[test]
    fn hand_expanded_losses() {
        // K=1 linear: w=1, x=2, y=1 -> (2-1)^2 = 1
        let ds = Dataset {
            covariates: DMatrix::from_row_slice(1, 1, &[2.0]),
            targets: DMatrix::from_row_slice(1, 1, &[1.0]),
            inlier_mask: None,
            meta: Default::default(),
        };
        let w = ModelParams::from_vector(&[1.0]);
        let z = per_sample_losses(&w, &ActivationSpec::linear(), &ds).unwrap();
        assert_eq!(z, vec![1.0]);

        // sigmoid at w.x = 0 with y = 1 -> (0.5 - 1)^2 = 0.25
        let ds2 = Dataset {
            covariates: DMatrix::from_row_slice(1, 1, &[0.0]),
            targets: DMatrix::from_row_slice(1, 1, &[1.0]),
            inlier_mask: None,
            meta: Default::default(),
        };
        let z2 = per_sample_losses(&w, &ActivationSpec::sigmoid(), &ds2).unwrap();
        assert_eq!(z2, vec![0.25]);
    }

    #[test]
    fn zero_loss_at_truth_on_clean_data() {
        let x = DMatrix::from_fn(3, 10, |i, j| ((i + 1) * (j + 2)) as f64 / 7.0);
        let w_true = ModelParams {
            weights: DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 2.0, 0.0, 1.0, 1.0]),
        };
        let y = &w_true.weights * &x;
        let ds = Dataset {
            covariates: x,
            targets: y,
            inlier_mask: None,
            meta: Default::default(),
        };
        let z = per_sample_losses(&w_true, &ActivationSpec::linear(), &ds).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn threshold_picks_smallest_and_sorts() {
        let r = hard_threshold(&[0.5, 3.0, 1.2, 0.1], 2).unwrap();
        assert_eq!(r.indices, vec![0, 3]);
        assert_eq!(r.losses_at_selection, vec![0.5, 0.1]);
    }

    #[test]
    fn threshold_k_equals_n_keeps_all() {
        let r = hard_threshold(&[5.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2]);
    }

    #[test]
    fn ties_break_toward_lower_index() {
        let r = hard_threshold(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(r.indices, vec![0, 1]);
    }

    #[test]
    fn k_out_of_range_errors() {
        assert!(hard_threshold(&[1.0], 0).is_err());
        assert!(hard_threshold(&[1.0], 2).is_err());
        assert!(hard_threshold(&[f64::NAN], 1).is_err());
    }

    /// Exhaustive oracle: the retained sum must match the minimum over all
    /// C(n, k) subsets.
    fn brute_force_min_subset_sum(zeta: &[f64], k: usize) -> f64 {
        let n = zeta.len();
        let mut best = f64::INFINITY;
        for bits in 0u32..(1 << n) {
            if bits.count_ones() as usize != k {
                continue;
            }
            let s: f64 = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| zeta[i]).sum();
            best = best.min(s);
        }
        best
    }

    #[test]
    fn selection_is_optimal_against_brute_force() {
        let mut rng = CounterRng::from_seed(23);
        for n in [4usize, 7, 10, 12] {
            for _ in 0..20 {
                let zeta: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 10.0)).collect();
                for k in 1..=n {
                    let kept = hard_threshold(&zeta, k).unwrap();
                    let oracle = brute_force_min_subset_sum(&zeta, k);
                    assert!(
                        (kept.total_loss() - oracle).abs() <= 1e-9,
                        "n={n} k={k}: {} vs oracle {}",
                        kept.total_loss(),
                        oracle
                    );
                }
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = CounterRng::from_seed(29);
        // distinct losses so tie rules cannot interfere
        let zeta: Vec<f64> = (0..20).map(|i| i as f64 + rng.uniform_in(0.0, 0.5)).collect();
        let k = 7;
        let base = hard_threshold(&zeta, k).unwrap();
        // reversal permutation
        let perm: Vec<usize> = (0..20).rev().collect();
        let permuted: Vec<f64> = perm.iter().map(|&p| zeta[p]).collect();
        let moved = hard_threshold(&permuted, k).unwrap();
        let mut mapped: Vec<usize> = moved.indices.iter().map(|&i| perm[i]).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, base.indices);
    }

    #[test]
    fn key_step_inequality_on_random_instances() {
        // For any mask with |S cap Q| = |P \ S|, the retained corrupted mass
        // is at most the discarded inlier mass.
        let mut rng = CounterRng::from_seed(31);
        for _ in 0..200 {
            let n = 12;
            let zeta: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 5.0)).collect();
            let n_corrupt = 3;
            let corrupted = rng.choose_indices(n, n_corrupt);
            let mask: Vec<bool> = (0..n).map(|i| !corrupted.contains(&i)).collect();
            let k = n - n_corrupt;
            let kept = hard_threshold(&zeta, k).unwrap();
            let s_cap_q: f64 = kept
                .indices
                .iter()
                .filter(|&&i| !mask[i])
                .map(|&i| zeta[i])
                .sum();
            let p_minus_s: f64 = (0..n)
                .filter(|i| mask[*i] && !kept.indices.contains(i))
                .map(|i| zeta[i])
                .sum();
            let fp = kept.indices.iter().filter(|&&i| !mask[i]).count();
            let fn_ = (0..n)
                .filter(|i| mask[*i] && !kept.indices.contains(i))
                .count();
            assert_eq!(fp, fn_);
            assert!(
                s_cap_q <= p_minus_s + 1e-12,
                "retained corrupted mass {s_cap_q} > discarded inlier mass {p_minus_s}"
            );
        }
    }
}
