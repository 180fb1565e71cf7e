//! Training losses: per-view reconstruction (mean absolute error), whole-field
//! reconstruction, and the EPI-gradient loss that penalizes parallax
//! structure differences.
//!
//! Each loss exists in two forms: a graph builder used inside training
//! graphs, and an eager wrapper returning a [`LossValue`] with its component
//! breakdown.

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::tensor::{Real, Tensor};
use serde::{Deserialize, Serialize};

/// One named term of a composite loss; the composite's value is
/// Σ weight·raw over its components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossComponent {
    pub name: String,
    pub raw: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub components: Vec<LossComponent>,
}

impl LossValue {
    pub fn from_components(components: Vec<LossComponent>) -> Self {
        let value = components.iter().map(|c| c.weight * c.raw).sum();
        LossValue { value, components }
    }

    fn single(name: &str, raw: f64) -> Self {
        LossValue::from_components(vec![LossComponent {
            name: name.into(),
            raw,
            weight: 1.0,
        }])
    }
}

fn check_same_shape<T: Real>(context: &str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: context.into(),
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean absolute error between a predicted view and its ground truth.
pub fn loss_view<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<LossValue> {
    check_same_shape("view loss", pred, gt)?;
    Ok(LossValue::single("l_v", eager_l1(pred, gt)))
}

/// Mean absolute error over every sample of two light fields.
pub fn loss_reg<T: Real>(pred: &LightField<T>, gt: &LightField<T>) -> Result<LossValue> {
    check_same_shape("field loss", pred.data(), gt.data())?;
    Ok(LossValue::single("l_r", eager_l1(pred.data(), gt.data())))
}

fn eager_l1<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> f64 {
    let mut g = Graph::new();
    let a = g.leaf(pred.clone(), false);
    let b = g.leaf(gt.clone(), false);
    let l = g.l1_loss(a, b);
    g.value(l).data()[0].as_f64()
}

/// EPI-gradient loss: forward differences of all horizontal EPIs along the
/// spatial x and angular n axes, and of all vertical EPIs along y and m;
/// the four mean-absolute-difference terms are summed with equal weight.
/// Zero exactly when the two fields agree up to a per-axis additive constant.
pub fn loss_epi_gradient<T: Real>(pred: &LightField<T>, gt: &LightField<T>) -> Result<LossValue> {
    check_same_shape("EPI gradient loss", pred.data(), gt.data())?;
    let (m, n) = pred.angular_res();
    let (h, w) = pred.spatial_res();
    if m < 2 || n < 2 || h < 2 || w < 2 {
        return Err(Error::ShapeMismatch {
            context: "EPI gradient loss needs at least 2 samples per axis".into(),
            expected: vec![2, 2, 2, 2],
            got: vec![m, n, h, w],
        });
    }
    let mut g = Graph::new();
    let p = g.leaf(pred.data().clone(), false);
    let t = g.leaf(gt.data().clone(), false);
    let (total, terms) = graph_epi_gradient_loss(&mut g, p, t, (m, n, h, w));
    let names = ["grad_x", "grad_n", "grad_y", "grad_m"];
    let components = names
        .iter()
        .zip(terms.iter())
        .map(|(name, &id)| LossComponent {
            name: (*name).into(),
            raw: g.value(id).data()[0].as_f64(),
            weight: 1.0,
        })
        .collect();
    let value = g.value(total).data()[0].as_f64();
    let built = LossValue { value, components };
    Ok(built)
}

/// Graph form of the EPI-gradient loss on two nodes holding (M·N, 1, H, W)
/// or (M, N, H, W) data — any layout whose flat order matches (M, N, H, W).
/// Returns the summed scalar plus the four per-axis terms
/// (x, n, y, m order).
pub fn graph_epi_gradient_loss<T: Real>(
    g: &mut Graph<T>,
    pred: NodeId,
    gt: NodeId,
    (m, n, h, w): (usize, usize, usize, usize),
) -> (NodeId, [NodeId; 4]) {
    let view = [m, n, h, w];
    // Horizontal EPIs vary (n, x); vertical EPIs vary (m, y).
    let axes = [3usize, 1, 2, 0];
    let terms: Vec<NodeId> = axes
        .iter()
        .map(|&axis| {
            let dp = g.axis_diff(pred, &view, axis);
            let dt = g.axis_diff(gt, &view, axis);
            g.l1_loss(dp, dt)
        })
        .collect();
    let xu = g.add(terms[0], terms[1]);
    let yv = g.add(terms[2], terms[3]);
    (g.add(xu, yv), [terms[0], terms[1], terms[2], terms[3]])
}

/// Stage-2 graph objective: whole-field mean absolute error plus
/// `lambda` times the EPI-gradient loss. Returns (total, l_r, l_e).
pub fn graph_stage2_loss<T: Real>(
    g: &mut Graph<T>,
    pred: NodeId,
    gt: NodeId,
    dims: (usize, usize, usize, usize),
    lambda: f64,
) -> (NodeId, NodeId, NodeId) {
    let l_r = g.l1_loss(pred, gt);
    let (l_e, _) = graph_epi_gradient_loss(g, pred, gt, dims);
    let total = g.add_weighted(l_r, l_e, 1.0, lambda);
    (total, l_r, l_e)
}

/// Eager stage-2 objective with component breakdown.
pub fn stage2_loss<T: Real>(
    pred: &LightField<T>,
    gt: &LightField<T>,
    lambda: f64,
) -> Result<LossValue> {
    let l_r = loss_reg(pred, gt)?;
    let l_e = loss_epi_gradient(pred, gt)?;
    Ok(LossValue::from_components(vec![
        LossComponent {
            name: "l_r".into(),
            raw: l_r.value,
            weight: 1.0,
        },
        LossComponent {
            name: "l_e".into(),
            raw: l_e.value,
            weight: lambda,
        },
    ]))
}
