//! Finite-difference validation of reverse-mode gradients.
//!
//! All checks run in f64: central differences with a fixed step, compared
//! against the tape's analytic gradients under a relative-error criterion
//! robust near zero. Used by the verification suite for every network block
//! and loss.

use crate::autograd::{Graph, NodeId};
use crate::tensor::Tensor;

/// Central-difference step used throughout the verification suite.
pub const FD_STEP: f64 = 1e-3;
/// Relative-error bound the analytic gradients must meet.
pub const FD_TOL: f64 = 1e-4;

/// Worst observed mismatch over all checked elements.
#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub worst_rel: f64,
    pub checked: usize,
}

impl FdReport {
    pub fn passes(&self) -> bool {
        self.worst_rel <= FD_TOL
    }
}

/// Deterministic, irregular leaf values in roughly [-0.7, 0.7].
pub fn fd_leaf(shape: &[usize], salt: usize) -> Tensor<f64> {
    Tensor::from_fn(shape, |i| {
        let v = ((i.wrapping_mul(2654435761).wrapping_add(salt * 977)) % 1000) as f64 / 1000.0;
        v * 1.4 - 0.7
    })
}

/// Check d(loss)/d(leaf) for every leaf against central differences.
///
/// `build` must construct the same scalar graph each call from the given
/// leaves. `max_per_tensor` limits how many elements of each leaf are
/// perturbed (0 = all), sampling on a fixed stride so runs are deterministic.
pub fn check_gradients(
    leaves: &mut [Tensor<f64>],
    build: impl Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
    max_per_tensor: usize,
) -> FdReport {
    let eval = |leaves: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = leaves.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let loss = build(&mut g, &ids);
        assert_eq!(g.value(loss).numel(), 1, "loss must be scalar");
        g.value(loss).data()[0]
    };

    let grads: Vec<Tensor<f64>> = {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = leaves.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let loss = build(&mut g, &ids);
        g.backward(loss);
        ids.iter()
            .map(|&id| g.grad(id).cloned().expect("leaf gradient missing"))
            .collect()
    };

    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for li in 0..leaves.len() {
        let n = leaves[li].numel();
        let stride = if max_per_tensor == 0 || n <= max_per_tensor {
            1
        } else {
            n.div_ceil(max_per_tensor)
        };
        let mut j = li % stride.max(1);
        while j < n {
            let orig = leaves[li].data()[j];
            leaves[li].data_mut()[j] = orig + FD_STEP;
            let fp = eval(leaves);
            leaves[li].data_mut()[j] = orig - FD_STEP;
            let fm = eval(leaves);
            leaves[li].data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let analytic = grads[li].data()[j];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
            checked += 1;
            j += stride;
        }
    }
    FdReport {
        worst_rel: worst,
        checked,
    }
}
