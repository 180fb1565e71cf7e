//! Tape-based reverse-mode autodiff over dense tensors.
//!
//! A `Graph` owns every intermediate value of one forward pass; `backward`
//! walks the tape in reverse. The op set is exactly what the two networks
//! need: batched same-size convolution (1x1 or 3x3, optionally fused with
//! ReLU), elementwise adds, index permutations (which also cover pixel
//! shuffle and the spatial/angular reshape), reference/auxiliary pair
//! stacking, forward differences along an axis, and mean-absolute-error
//! reduction.
//!
//! Determinism: all reductions accumulate sequentially in a fixed order and
//! the GEMM backend runs single-threaded, so identical inputs produce
//! bit-identical values and gradients.

use crate::tensor::{Real, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    /// Batched convolution, zero padding ks/2, stride 1 (same spatial size).
    /// x: (B, Cin, H, W), w: (Cout, Cin, ks, ks), b: (Cout) → (B, Cout, H, W).
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        relu: bool,
    },
    /// Elementwise a + b (same shape).
    Add { a: NodeId, b: NodeId },
    /// alpha·a + beta·b (same shape).
    AddWeighted {
        a: NodeId,
        b: NodeId,
        alpha: f64,
        beta: f64,
    },
    /// Reinterpret flat data under a new shape (no movement).
    Reshape { x: NodeId },
    /// Permute the axes of a virtual view of the flat data.
    /// out[idx] = x[inverse-permuted idx]; a pure bijection.
    Permute {
        x: NodeId,
        view: Vec<usize>,
        perm: Vec<usize>,
    },
    /// Stack (ref, aux) channel pairs from a batch of per-view features.
    /// f: (V, C, H, W) → (A, 2C, H, W) with out[a] = concat(f[r], f[aux[a]]).
    PairStack {
        f: NodeId,
        reference: usize,
        aux: Vec<usize>,
    },
    /// Forward difference along `axis` of a virtual view of the data.
    AxisDiff {
        x: NodeId,
        view: Vec<usize>,
        axis: usize,
    },
    /// Scalar mean of |a - b|.
    L1Loss { a: NodeId, b: NodeId },
}

struct Node<T: Real> {
    op: Op,
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    needs_grad: bool,
}

/// One forward pass's tape of values plus reusable scratch buffers.
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
    cols: Vec<T>,
    dcols: Vec<T>,
    masked: Vec<T>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            cols: Vec::new(),
            dcols: Vec::new(),
            masked: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target w.r.t. this node.
    /// None when the node did not require gradients or was unreachable.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            grad: None,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Insert a constant or trainable tensor.
    pub fn leaf(&mut self, value: Tensor<T>, needs_grad: bool) -> NodeId {
        self.push(Op::Leaf, value, needs_grad)
    }

    /// Batched same-size conv (kernel 1x1 or 3x3); optionally fused ReLU.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, relu: bool) -> NodeId {
        let (xs, ws, bs) = (
            self.nodes[x.0].value.shape().to_vec(),
            self.nodes[w.0].value.shape().to_vec(),
            self.nodes[b.0].value.shape().to_vec(),
        );
        assert_eq!(xs.len(), 4, "conv2d input must be (B, Cin, H, W)");
        assert_eq!(ws.len(), 4, "conv2d weight must be (Cout, Cin, ks, ks)");
        assert_eq!(ws[2], ws[3], "kernel must be square");
        assert!(ws[2] == 1 || ws[2] == 3, "kernel size must be 1 or 3");
        assert_eq!(
            xs[1], ws[1],
            "conv2d channel mismatch: input {} vs weight {}",
            xs[1], ws[1]
        );
        assert_eq!(bs, vec![ws[0]], "bias must be (Cout)");

        let (batch, cin, h, w_sp) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, ks) = (ws[0], ws[2]);
        let hw = h * w_sp;
        let k = cin * ks * ks;

        self.cols.resize(k * hw, T::zero());
        let mut out = Tensor::zeros(&[batch, cout, h, w_sp]);
        {
            let xv = self.nodes[x.0].value.data();
            let wv = self.nodes[w.0].value.data();
            let bv = self.nodes[b.0].value.data();
            for bi in 0..batch {
                im2col(
                    &xv[bi * cin * hw..(bi + 1) * cin * hw],
                    cin,
                    h,
                    w_sp,
                    ks,
                    &mut self.cols,
                );
                let out_b = &mut out.data_mut()[bi * cout * hw..(bi + 1) * cout * hw];
                T::gemm(cout, k, hw, T::one(), wv, &self.cols, T::zero(), out_b);
                for c in 0..cout {
                    let bias = bv[c];
                    let row = &mut out_b[c * hw..(c + 1) * hw];
                    if relu {
                        for v in row.iter_mut() {
                            *v = (*v + bias).max(T::zero());
                        }
                    } else {
                        for v in row.iter_mut() {
                            *v += bias;
                        }
                    }
                }
            }
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Conv2d { x, w, b, relu }, out, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "add shape mismatch"
        );
        let value = {
            let (av, bv) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
            Tensor::from_vec(
                self.nodes[a.0].value.shape(),
                av.iter().zip(bv).map(|(&x, &y)| x + y).collect(),
            )
        };
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::Add { a, b }, value, needs)
    }

    pub fn add_weighted(&mut self, a: NodeId, b: NodeId, alpha: f64, beta: f64) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "add_weighted shape mismatch"
        );
        let (ca, cb) = (T::from_f64(alpha), T::from_f64(beta));
        let value = {
            let (av, bv) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
            Tensor::from_vec(
                self.nodes[a.0].value.shape(),
                av.iter().zip(bv).map(|(&x, &y)| ca * x + cb * y).collect(),
            )
        };
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::AddWeighted { a, b, alpha, beta }, value, needs)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> NodeId {
        let value = self.nodes[x.0].value.clone().reshaped(shape);
        let needs = self.needs(x);
        self.push(Op::Reshape { x }, value, needs)
    }

    /// Permute axes of a virtual `view` of x's flat data. The node's value
    /// has shape `view[perm[0]], view[perm[1]], ...`.
    pub fn permute(&mut self, x: NodeId, view: &[usize], perm: &[usize]) -> NodeId {
        let numel = self.nodes[x.0].value.numel();
        assert_eq!(
            view.iter().product::<usize>(),
            numel,
            "permute view must cover the tensor"
        );
        assert_eq!(view.len(), perm.len());
        let out_shape: Vec<usize> = perm.iter().map(|&p| view[p]).collect();
        let mut out = Tensor::zeros(&out_shape);
        permute_apply(
            self.nodes[x.0].value.data(),
            out.data_mut(),
            view,
            perm,
            false,
        );
        let needs = self.needs(x);
        self.push(
            Op::Permute {
                x,
                view: view.to_vec(),
                perm: perm.to_vec(),
            },
            out,
            needs,
        )
    }

    /// Sub-pixel rearrangement: (B, c·α², H, W) → (B, c, αH, αW).
    pub fn pixel_shuffle(&mut self, x: NodeId, alpha: usize) -> NodeId {
        let xs = self.nodes[x.0].value.shape().to_vec();
        assert_eq!(xs.len(), 4, "pixel_shuffle input must be 4D");
        let (batch, ch, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        assert_eq!(
            ch % (alpha * alpha),
            0,
            "pixel_shuffle channels {ch} not divisible by {}",
            alpha * alpha
        );
        let c = ch / (alpha * alpha);
        let id = self.permute(
            x,
            &[batch, c, alpha, alpha, h, w],
            &[0, 1, 4, 2, 5, 3],
        );
        self.reshape(id, &[batch, c, alpha * h, alpha * w])
    }

    /// out[a] = concat_channels(f[reference], f[aux[a]]) over all aux rows.
    pub fn pair_stack(&mut self, f: NodeId, reference: usize, aux: &[usize]) -> NodeId {
        let fs = self.nodes[f.0].value.shape().to_vec();
        assert_eq!(fs.len(), 4, "pair_stack input must be (V, C, H, W)");
        let (v, c, h, w) = (fs[0], fs[1], fs[2], fs[3]);
        assert!(reference < v, "reference index out of range");
        assert!(aux.iter().all(|&a| a < v), "aux index out of range");
        let plane = c * h * w;
        let mut out = Tensor::zeros(&[aux.len(), 2 * c, h, w]);
        {
            let fv = self.nodes[f.0].value.data();
            let ov = out.data_mut();
            let rslice = &fv[reference * plane..(reference + 1) * plane];
            for (a, &ai) in aux.iter().enumerate() {
                let dst = &mut ov[a * 2 * plane..(a + 1) * 2 * plane];
                dst[..plane].copy_from_slice(rslice);
                dst[plane..].copy_from_slice(&fv[ai * plane..(ai + 1) * plane]);
            }
        }
        let needs = self.needs(f);
        self.push(
            Op::PairStack {
                f,
                reference,
                aux: aux.to_vec(),
            },
            out,
            needs,
        )
    }

    /// Forward difference along `axis` of a virtual `view` of x's data.
    pub fn axis_diff(&mut self, x: NodeId, view: &[usize], axis: usize) -> NodeId {
        let numel = self.nodes[x.0].value.numel();
        assert_eq!(
            view.iter().product::<usize>(),
            numel,
            "axis_diff view must cover the tensor"
        );
        assert!(axis < view.len());
        assert!(view[axis] >= 2, "axis_diff needs at least two entries");
        let mut out_shape = view.to_vec();
        out_shape[axis] -= 1;
        let mut out = Tensor::zeros(&out_shape);
        {
            let xv = self.nodes[x.0].value.data();
            let ov = out.data_mut();
            let inner: usize = view[axis + 1..].iter().product();
            let outer: usize = view[..axis].iter().product();
            let len = view[axis];
            for o in 0..outer {
                let base_in = o * len * inner;
                let base_out = o * (len - 1) * inner;
                for i in 0..len - 1 {
                    for j in 0..inner {
                        ov[base_out + i * inner + j] = xv[base_in + (i + 1) * inner + j]
                            - xv[base_in + i * inner + j];
                    }
                }
            }
        }
        let needs = self.needs(x);
        self.push(
            Op::AxisDiff {
                x,
                view: view.to_vec(),
                axis,
            },
            out,
            needs,
        )
    }

    /// Scalar node: mean absolute difference between a and b.
    pub fn l1_loss(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "l1_loss shape mismatch"
        );
        let value = {
            let (av, bv) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
            let mut acc = T::zero();
            for (&x, &y) in av.iter().zip(bv) {
                acc += (x - y).abs();
            }
            acc / T::from_f64(av.len() as f64)
        };
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::L1Loss { a, b }, Tensor::from_vec(&[1], vec![value]), needs)
    }

    fn grad_buf(&mut self, id: NodeId) -> &mut Tensor<T> {
        let shape = self.nodes[id.0].value.shape().to_vec();
        self.nodes[id.0]
            .grad
            .get_or_insert_with(|| Tensor::zeros(&shape))
    }

    fn op_inputs(op: &Op) -> Vec<NodeId> {
        match op {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } => vec![*x, *w, *b],
            Op::Add { a, b } | Op::AddWeighted { a, b, .. } | Op::L1Loss { a, b } => {
                vec![*a, *b]
            }
            Op::Reshape { x } | Op::Permute { x, .. } | Op::AxisDiff { x, .. } => vec![*x],
            Op::PairStack { f, .. } => vec![*f],
        }
    }

    /// Reverse pass from a scalar node. Gradients land on every node with
    /// `needs_grad`; leaves keep them until the graph is dropped.
    ///
    /// Inputs always precede outputs on the tape, so `split_at_mut(i)`
    /// separates node i (read) from its inputs (written) without copies.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(
            self.nodes[loss.0].value.numel(),
            1,
            "backward target must be scalar"
        );
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(Tensor::from_vec(&[1], vec![T::one()]));

        for i in (0..self.nodes.len()).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            // Allocate input gradient buffers before splitting the borrow.
            for id in Self::op_inputs(&self.nodes[i].op) {
                if self.needs(id) {
                    self.grad_buf(id);
                }
            }

            let Graph {
                ref mut nodes,
                ref mut cols,
                ref mut dcols,
                ref mut masked,
            } = *self;
            let (left, right) = nodes.split_at_mut(i);
            let node = &right[0];
            let g = node.grad.as_ref().unwrap();

            match &node.op {
                Op::Leaf => {}
                Op::Conv2d { x, w, b, relu } => {
                    backward_conv2d(
                        left, *x, *w, *b, *relu, g, &node.value, cols, dcols, masked,
                    );
                }
                Op::Add { a, b } => {
                    for id in [*a, *b] {
                        if left[id.0].needs_grad {
                            accumulate(left[id.0].grad.as_mut().unwrap(), g.data(), 1.0);
                        }
                    }
                }
                Op::AddWeighted { a, b, alpha, beta } => {
                    for (id, coef) in [(*a, *alpha), (*b, *beta)] {
                        if left[id.0].needs_grad {
                            accumulate(left[id.0].grad.as_mut().unwrap(), g.data(), coef);
                        }
                    }
                }
                Op::Reshape { x } => {
                    if left[x.0].needs_grad {
                        accumulate(left[x.0].grad.as_mut().unwrap(), g.data(), 1.0);
                    }
                }
                Op::Permute { x, view, perm } => {
                    if left[x.0].needs_grad {
                        let gx = left[x.0].grad.as_mut().unwrap();
                        permute_apply(g.data(), gx.data_mut(), view, perm, true);
                    }
                }
                Op::PairStack { f, reference, aux } => {
                    if left[f.0].needs_grad {
                        let shape = left[f.0].value.shape().to_vec();
                        let plane = shape[1] * shape[2] * shape[3];
                        let gfv = left[f.0].grad.as_mut().unwrap().data_mut();
                        let gv = g.data();
                        for (a, &ai) in aux.iter().enumerate() {
                            let src = &gv[a * 2 * plane..(a + 1) * 2 * plane];
                            for j in 0..plane {
                                gfv[reference * plane + j] += src[j];
                            }
                            for j in 0..plane {
                                gfv[ai * plane + j] += src[plane + j];
                            }
                        }
                    }
                }
                Op::AxisDiff { x, view, axis } => {
                    if left[x.0].needs_grad {
                        let gxv = left[x.0].grad.as_mut().unwrap().data_mut();
                        let gv = g.data();
                        let inner: usize = view[axis + 1..].iter().product();
                        let outer: usize = view[..*axis].iter().product();
                        let len = view[*axis];
                        for o in 0..outer {
                            let base_in = o * len * inner;
                            let base_out = o * (len - 1) * inner;
                            for ii in 0..len - 1 {
                                for j in 0..inner {
                                    let gval = gv[base_out + ii * inner + j];
                                    gxv[base_in + (ii + 1) * inner + j] += gval;
                                    gxv[base_in + ii * inner + j] -= gval;
                                }
                            }
                        }
                    }
                }
                Op::L1Loss { a, b } => {
                    let g0 = g.data()[0];
                    let n = left[a.0].value.numel();
                    let scale = g0 / T::from_f64(n as f64);
                    let signs: Vec<T> = {
                        let (av, bv) = (left[a.0].value.data(), left[b.0].value.data());
                        av.iter()
                            .zip(bv)
                            .map(|(&x, &y)| {
                                if x > y {
                                    scale
                                } else if x < y {
                                    -scale
                                } else {
                                    T::zero()
                                }
                            })
                            .collect()
                    };
                    if left[a.0].needs_grad {
                        accumulate(left[a.0].grad.as_mut().unwrap(), &signs, 1.0);
                    }
                    if left[b.0].needs_grad {
                        accumulate(left[b.0].grad.as_mut().unwrap(), &signs, -1.0);
                    }
                }
            }
        }
    }
}

/// Disjoint mutable access to two tape positions.
fn two_mut<T: Real>(nodes: &mut [Node<T>], i: usize, j: usize) -> (&mut Node<T>, &mut Node<T>) {
    assert_ne!(i, j);
    if i < j {
        let (a, b) = nodes.split_at_mut(j);
        (&mut a[i], &mut b[0])
    } else {
        let (a, b) = nodes.split_at_mut(i);
        (&mut b[0], &mut a[j])
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_conv2d<T: Real>(
    left: &mut [Node<T>],
    x: NodeId,
    w: NodeId,
    b: NodeId,
    relu: bool,
    g: &Tensor<T>,
    out_val: &Tensor<T>,
    cols: &mut Vec<T>,
    dcols: &mut Vec<T>,
    masked: &mut Vec<T>,
) {
    let xs = left[x.0].value.shape().to_vec();
    let ws = left[w.0].value.shape().to_vec();
    let (batch, cin, h, w_sp) = (xs[0], xs[1], xs[2], xs[3]);
    let (cout, ks) = (ws[0], ws[2]);
    let hw = h * w_sp;
    let k = cin * ks * ks;

    cols.resize(k * hw, T::zero());
    dcols.resize(k * hw, T::zero());
    masked.resize(cout * hw, T::zero());

    let (need_x, need_w, need_b) = (
        left[x.0].needs_grad,
        left[w.0].needs_grad,
        left[b.0].needs_grad,
    );

    for bi in 0..batch {
        // ReLU gate: zero the gradient where the output was clamped.
        {
            let gv = &g.data()[bi * cout * hw..(bi + 1) * cout * hw];
            let ov = &out_val.data()[bi * cout * hw..(bi + 1) * cout * hw];
            for j in 0..cout * hw {
                masked[j] = if relu && ov[j] <= T::zero() {
                    T::zero()
                } else {
                    gv[j]
                };
            }
        }

        if need_b {
            let gb = left[b.0].grad.as_mut().unwrap().data_mut();
            for c in 0..cout {
                let mut acc = T::zero();
                for j in 0..hw {
                    acc += masked[c * hw + j];
                }
                gb[c] += acc;
            }
        }

        if need_w || need_x {
            let (nx, nw) = two_mut(left, x.0, w.0);
            im2col(
                &nx.value.data()[bi * cin * hw..(bi + 1) * cin * hw],
                cin,
                h,
                w_sp,
                ks,
                cols,
            );

            if need_w {
                // dW += dY · colsᵀ  (Cout×HW · HW×K)
                let gw = nw.grad.as_mut().unwrap().data_mut();
                T::gemm_strided(
                    cout, hw, k, T::one(),
                    masked, hw as isize, 1,
                    cols, 1, hw as isize,
                    T::one(),
                    gw, k as isize, 1,
                );
            }

            if need_x {
                // dcols = Wᵀ · dY  (K×Cout · Cout×HW), then col2im-add.
                T::gemm_strided(
                    k, cout, hw, T::one(),
                    nw.value.data(), 1, k as isize,
                    masked, hw as isize, 1,
                    T::zero(),
                    dcols, hw as isize, 1,
                );
                let gx = nx.grad.as_mut().unwrap();
                col2im_add(
                    dcols,
                    cin,
                    h,
                    w_sp,
                    ks,
                    &mut gx.data_mut()[bi * cin * hw..(bi + 1) * cin * hw],
                );
            }
        }
    }
}

/// Scatter x (C, H, W) into ks·ks-patch columns: cols[(c·ks² + t), y·W + x].
/// Zero padding of ks/2 pixels on each side.
fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, ks: usize, cols: &mut [T]) {
    let hw = h * w;
    let taps = ks * ks;
    let pad = (ks / 2) as isize;
    debug_assert_eq!(cols.len(), c * taps * hw);
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for t in 0..taps {
            let (dy, dx) = ((t / ks) as isize - pad, (t % ks) as isize - pad);
            let row = &mut cols[(ci * taps + t) * hw..(ci * taps + t + 1) * hw];
            for y in 0..h as isize {
                let sy = y + dy;
                let dst = &mut row[(y as usize) * w..(y as usize + 1) * w];
                if sy < 0 || sy >= h as isize {
                    dst.fill(T::zero());
                    continue;
                }
                let src = &plane[(sy as usize) * w..(sy as usize + 1) * w];
                if dx == 0 {
                    dst.copy_from_slice(src);
                } else if dx < 0 {
                    let s = (-dx) as usize;
                    dst[..s].fill(T::zero());
                    dst[s..].copy_from_slice(&src[..w - s]);
                } else {
                    let s = dx as usize;
                    dst[..w - s].copy_from_slice(&src[s..]);
                    dst[w - s..].fill(T::zero());
                }
            }
        }
    }
}

/// Inverse scatter of [`im2col`]: accumulate columns back into the image.
fn col2im_add<T: Real>(cols: &[T], c: usize, h: usize, w: usize, ks: usize, x: &mut [T]) {
    let hw = h * w;
    let taps = ks * ks;
    let pad = (ks / 2) as isize;
    debug_assert_eq!(cols.len(), c * taps * hw);
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for t in 0..taps {
            let (dy, dx) = ((t / ks) as isize - pad, (t % ks) as isize - pad);
            let row = &cols[(ci * taps + t) * hw..(ci * taps + t + 1) * hw];
            for y in 0..h as isize {
                let sy = y + dy;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let src = &row[(y as usize) * w..(y as usize + 1) * w];
                let dst = &mut plane[(sy as usize) * w..(sy as usize + 1) * w];
                if dx == 0 {
                    for i in 0..w {
                        dst[i] += src[i];
                    }
                } else if dx < 0 {
                    let s = (-dx) as usize;
                    for i in s..w {
                        dst[i - s] += src[i];
                    }
                } else {
                    let s = dx as usize;
                    for i in 0..w - s {
                        dst[i + s] += src[i];
                    }
                }
            }
        }
    }
}

/// Apply an axis permutation of a virtual view. Forward (`transpose_back`
/// false): out[p(idx)] = in[idx] elementwise, writing `out` densely in its
/// own layout. Backward (true): out[idx] += in[p(idx)] — the exact adjoint.
fn permute_apply<T: Real>(
    input: &[T],
    output: &mut [T],
    view: &[usize],
    perm: &[usize],
    transpose_back: bool,
) {
    let rank = view.len();
    let numel: usize = view.iter().product();
    debug_assert_eq!(input.len(), numel);
    debug_assert_eq!(output.len(), numel);

    // Strides of the source view and of the permuted (destination) layout.
    let mut src_stride = vec![1usize; rank];
    for i in (0..rank - 1).rev() {
        src_stride[i] = src_stride[i + 1] * view[i + 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| view[p]).collect();
    let mut out_stride_own = vec![1usize; rank];
    for i in (0..rank - 1).rev() {
        out_stride_own[i] = out_stride_own[i + 1] * out_dims[i + 1];
    }
    // For each source axis, its stride in the destination layout.
    let mut dst_stride_for_src = vec![0usize; rank];
    for (dst_axis, &src_axis) in perm.iter().enumerate() {
        dst_stride_for_src[src_axis] = out_stride_own[dst_axis];
    }

    let mut idx = vec![0usize; rank];
    let mut dst = 0usize;
    for src in 0..numel {
        if transpose_back {
            output[src] += input[dst];
        } else {
            output[dst] = input[src];
        }
        // Odometer increment over the source view.
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            dst += dst_stride_for_src[ax];
            if idx[ax] < view[ax] {
                break;
            }
            dst -= idx[ax] * dst_stride_for_src[ax];
            idx[ax] = 0;
        }
    }
}

fn accumulate<T: Real>(buf: &mut Tensor<T>, values: &[T], scale: f64) {
    let s = T::from_f64(scale);
    for (dst, &v) in buf.data_mut().iter_mut().zip(values) {
        *dst += s * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(shape: &[usize], f: impl Fn(usize) -> f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |i| f(i))
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(tensor(&[1, 1, 4, 5], |i| (i as f64) * 0.05 - 0.3), false);
        let mut wt = Tensor::<f64>::zeros(&[1, 1, 3, 3]);
        wt.set(&[0, 0, 1, 1], 1.0);
        let w = g.leaf(wt, false);
        let b = g.leaf(Tensor::zeros(&[1]), false);
        let y = g.conv2d(x, w, b, false);
        assert_eq!(g.value(y).data(), g.value(x).data());
    }

    #[test]
    fn conv_matches_direct_nine_term_sum() {
        let mut g = Graph::<f64>::new();
        let xt = tensor(&[1, 1, 3, 3], |i| [0.3, -0.1, 0.5, 0.2, 0.9, -0.4, 0.0, 0.7, 0.6][i]);
        let wt = tensor(&[1, 1, 3, 3], |i| {
            [0.11, -0.2, 0.31, 0.07, -0.5, 0.23, -0.13, 0.41, 0.17][i]
        });
        let x = g.leaf(xt.clone(), false);
        let w = g.leaf(wt.clone(), false);
        let b = g.leaf(Tensor::from_vec(&[1], vec![0.05]), false);
        let y = g.conv2d(x, w, b, false);

        for oy in 0..3i64 {
            for ox in 0..3i64 {
                let mut want = 0.05;
                for ky in 0..3i64 {
                    for kx in 0..3i64 {
                        let (sy, sx) = (oy + ky - 1, ox + kx - 1);
                        if (0..3).contains(&sy) && (0..3).contains(&sx) {
                            want += xt.get(&[0, 0, sy as usize, sx as usize])
                                * wt.get(&[0, 0, ky as usize, kx as usize]);
                        }
                    }
                }
                let got = g.value(y).get(&[0, 0, oy as usize, ox as usize]);
                assert!((got - want).abs() < 1e-12, "({oy},{ox}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn pointwise_conv_mixes_channels_per_pixel() {
        let mut g = Graph::<f64>::new();
        let xt = tensor(&[1, 2, 2, 2], |i| (i as f64) * 0.1);
        let x = g.leaf(xt.clone(), false);
        // One output channel: 2·ch0 - 0.5·ch1 + 0.25.
        let w = g.leaf(Tensor::from_vec(&[1, 2, 1, 1], vec![2.0, -0.5]), false);
        let b = g.leaf(Tensor::from_vec(&[1], vec![0.25]), false);
        let y = g.conv2d(x, w, b, false);
        assert_eq!(g.value(y).shape(), &[1, 1, 2, 2]);
        for p in 0..4 {
            let want = 2.0 * xt.data()[p] - 0.5 * xt.data()[4 + p] + 0.25;
            assert!((g.value(y).data()[p] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_conv_gradients_match_finite_differences() {
        check_grads(
            &[&[2, 3, 3, 3], &[2, 3, 1, 1], &[2], &[2, 2, 3, 3]],
            |g, ids| {
                let y = g.conv2d(ids[0], ids[1], ids[2], true);
                g.l1_loss(y, ids[3])
            },
            1e-3,
            1e-4,
        );
    }

    #[test]
    fn conv_zero_weights_zero_bias_gives_zero() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(tensor(&[2, 3, 4, 4], |i| i as f64), false);
        let w = g.leaf(Tensor::zeros(&[5, 3, 3, 3]), false);
        let b = g.leaf(Tensor::zeros(&[5]), false);
        let y = g.conv2d(x, w, b, false);
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
        assert_eq!(g.value(y).shape(), &[2, 5, 4, 4]);
    }

    #[test]
    fn pixel_shuffle_formula_on_enumerated_input() {
        let mut g = Graph::<f64>::new();
        // (4, 1, 1) with values [a, b, c, d] → [[a, b], [c, d]].
        let x = g.leaf(tensor(&[1, 4, 1, 1], |i| [1.0, 2.0, 3.0, 4.0][i]), false);
        let y = g.pixel_shuffle(x, 2);
        assert_eq!(g.value(y).shape(), &[1, 1, 2, 2]);
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);

        // General formula check on a random-ish 2-channel case.
        let xt = tensor(&[1, 8, 2, 3], |i| (i as f64) * 1.7 - 3.0);
        let x = g.leaf(xt.clone(), false);
        let y = g.pixel_shuffle(x, 2);
        for k in 0..2 {
            for yy in 0..2 {
                for xx in 0..3 {
                    for p in 0..2 {
                        for q in 0..2 {
                            assert_eq!(
                                g.value(y).get(&[0, k, 2 * yy + p, 2 * xx + q]),
                                xt.get(&[0, k * 4 + p * 2 + q, yy, xx]),
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pixel_shuffle_round_trips_through_inverse_permute() {
        let mut g = Graph::<f64>::new();
        let xt = tensor(&[2, 8, 3, 4], |i| (i * 37 % 101) as f64);
        let x = g.leaf(xt.clone(), false);
        let y = g.pixel_shuffle(x, 2);
        // Inverse: (B, c, αH, αW) → (B, c·α², H, W) by the reverse view/perm.
        let z = g.permute(y, &[2, 2, 3, 2, 4, 2], &[0, 1, 3, 5, 2, 4]);
        let z = g.reshape(z, &[2, 8, 3, 4]);
        assert_eq!(g.value(z).data(), xt.data());
    }

    #[test]
    fn l1_constant_offset() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(tensor(&[3, 5], |i| i as f64 * 0.01), false);
        let b = g.leaf(tensor(&[3, 5], |i| i as f64 * 0.01 + 0.1), false);
        let l = g.l1_loss(a, b);
        assert!((g.value(l).data()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn axis_diff_matches_manual_differences() {
        let mut g = Graph::<f64>::new();
        let xt = tensor(&[2, 3, 4], |i| ((i * i + 3) % 17) as f64);
        let x = g.leaf(xt.clone(), false);
        let d = g.axis_diff(x, &[2, 3, 4], 1);
        assert_eq!(g.value(d).shape(), &[2, 2, 4]);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..4 {
                    assert_eq!(
                        g.value(d).get(&[a, b, c]),
                        xt.get(&[a, b + 1, c]) - xt.get(&[a, b, c]),
                    );
                }
            }
        }
    }

    #[test]
    fn pair_stack_lays_out_reference_then_aux() {
        let mut g = Graph::<f64>::new();
        let f = g.leaf(tensor(&[3, 2, 1, 2], |i| i as f64), false);
        let s = g.pair_stack(f, 1, &[0, 2]);
        assert_eq!(g.value(s).shape(), &[2, 4, 1, 2]);
        // Row 0: ref view 1 channels then aux view 0 channels.
        assert_eq!(g.value(s).get(&[0, 0, 0, 0]), 4.0);
        assert_eq!(g.value(s).get(&[0, 2, 0, 0]), 0.0);
        // Row 1: ref then view 2.
        assert_eq!(g.value(s).get(&[1, 1, 0, 1]), 7.0);
        assert_eq!(g.value(s).get(&[1, 3, 0, 1]), 11.0);
    }

    /// Central-difference check of one scalar-valued graph builder.
    fn check_grads(
        shapes: &[&[usize]],
        build: impl Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
        h: f64,
        tol: f64,
    ) {
        let mut leaves: Vec<Tensor<f64>> = shapes
            .iter()
            .enumerate()
            .map(|(si, s)| {
                Tensor::from_fn(s, |i| {
                    // Deterministic, irregular, zero-mean-ish values.
                    let v = ((i * 2654435761 + si * 97) % 1000) as f64 / 1000.0;
                    v * 1.4 - 0.7
                })
            })
            .collect();

        let eval = |leaves: &[Tensor<f64>]| -> f64 {
            let mut g = Graph::<f64>::new();
            let ids: Vec<NodeId> = leaves.iter().map(|t| g.leaf(t.clone(), true)).collect();
            let loss = build(&mut g, &ids);
            g.value(loss).data()[0]
        };

        let mut g = Graph::<f64>::new();
        let ids: Vec<NodeId> = leaves.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let loss = build(&mut g, &ids);
        g.backward(loss);
        let grads: Vec<Tensor<f64>> = ids
            .iter()
            .map(|&id| g.grad(id).cloned().unwrap())
            .collect();

        for li in 0..leaves.len() {
            for j in 0..leaves[li].numel() {
                let orig = leaves[li].data()[j];
                leaves[li].data_mut()[j] = orig + h;
                let fp = eval(&leaves);
                leaves[li].data_mut()[j] = orig - h;
                let fm = eval(&leaves);
                leaves[li].data_mut()[j] = orig;
                let numeric = (fp - fm) / (2.0 * h);
                let analytic = grads[li].data()[j];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                let rel = (analytic - numeric).abs() / denom;
                assert!(
                    rel <= tol,
                    "leaf {li} elem {j}: analytic {analytic} vs numeric {numeric} (rel {rel})"
                );
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        check_grads(
            &[&[2, 2, 4, 4], &[3, 2, 3, 3], &[3], &[2, 3, 4, 4]],
            |g, ids| {
                let y = g.conv2d(ids[0], ids[1], ids[2], true);
                g.l1_loss(y, ids[3])
            },
            1e-3,
            1e-4,
        );
    }

    #[test]
    fn composite_graph_gradients_match_finite_differences() {
        // conv → pixel_shuffle → add → axis_diff → l1: touches every op kind.
        check_grads(
            &[&[1, 2, 3, 3], &[4, 2, 3, 3], &[4], &[1, 1, 6, 6], &[1, 1, 6, 6]],
            |g, ids| {
                let y = g.conv2d(ids[0], ids[1], ids[2], false);
                let up = g.pixel_shuffle(y, 2);
                let summed = g.add(up, ids[3]);
                let d = g.axis_diff(summed, &[1, 1, 6, 6], 2);
                let t = g.axis_diff(ids[4], &[1, 1, 6, 6], 2);
                g.l1_loss(d, t)
            },
            1e-3,
            1e-4,
        );
    }

    #[test]
    fn pair_stack_gradients_match_finite_differences() {
        check_grads(
            &[&[3, 2, 2, 2], &[2, 4, 2, 2]],
            |g, ids| {
                let s = g.pair_stack(ids[0], 1, &[0, 2]);
                g.l1_loss(s, ids[1])
            },
            1e-3,
            1e-4,
        );
    }

    #[test]
    fn permute_gradients_match_finite_differences() {
        check_grads(
            &[&[2, 3, 4], &[4, 3, 2]],
            |g, ids| {
                let p = g.permute(ids[0], &[2, 3, 4], &[2, 1, 0]);
                g.l1_loss(p, ids[1])
            },
            1e-3,
            1e-4,
        );
    }

    #[test]
    fn relu_gate_blocks_gradient_where_output_clamped() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]), true);
        let mut wt = Tensor::<f64>::zeros(&[1, 1, 3, 3]);
        wt.set(&[0, 0, 1, 1], -2.0);
        let w = g.leaf(wt, false);
        let b = g.leaf(Tensor::zeros(&[1]), false);
        let y = g.conv2d(x, w, b, true); // output = relu(-2) = 0
        let t = g.leaf(Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]), false);
        let l = g.l1_loss(y, t);
        g.backward(l);
        assert_eq!(g.grad(x).unwrap().data()[0], 0.0);
    }
}
