//! Canned network shapes: series stacks, ResNet modules, fusion modules and
//! stacks of them, a branching example with distinct levels, and LeNet-5.

use crate::basis::{Activation, BasisElement, PoolBlocks};
use crate::error::{Error, Result};
use crate::graph::random::{gaussian_affine, gaussian_matrix, gaussian_vec, rng};
use crate::graph::{ArcId, Dag, DagBuilder, NodeId, NodeRole};
use crate::matrix::{Affine, Matrix};
use crate::scalar::Scalar;

fn shape_error(what: &str, expected: usize, found: usize) -> Error {
    Error::Construction(format!("{what}: expected dimension {expected}, found {found}"))
}

/// `ρ∘M_L ∘ … ∘ ρ∘M_1`
pub fn build_series_stack<T: Scalar>(
    input_dim: usize,
    layers: &[Affine<T>],
    activation: Activation<T>,
) -> Result<Dag<T>> {
    let mut b = DagBuilder::new(input_dim);
    let mut prev = NodeId(0);
    for m in layers {
        let n = b.add_node(NodeRole::Relay);
        b.add_arc(prev, n, BasisElement::ActivationAffine(activation.clone(), m.clone()))?;
        prev = n;
    }
    b.set_output(prev);
    b.build()
}

/// `x ↦ ρ(x − M₂ ρ(M₁ x))`: a duplication node feeding a direct link and a
/// two-arc residual branch into an addition node, then ReLU.
pub fn build_resnet_module<T: Scalar>(m1: Affine<T>, m2: Affine<T>) -> Result<Dag<T>> {
    let n = m1.in_dim();
    if m2.in_dim() != m1.out_dim() {
        return Err(shape_error("resnet M₂ input", m1.out_dim(), m2.in_dim()));
    }
    if m2.out_dim() != n {
        return Err(shape_error("resnet M₂ output", n, m2.out_dim()));
    }
    let mut b = DagBuilder::new(n);
    let hidden = b.add_node(NodeRole::Relay);
    let sum = b.add_node(NodeRole::Add);
    let out = b.add_node(NodeRole::Relay);
    b.add_arc(NodeId(0), hidden, BasisElement::relu_affine(m1))?;
    b.add_arc(NodeId(0), sum, BasisElement::Identity)?;
    let neg = Affine {
        weight: m2.weight.scaled(-T::one()),
        bias: m2.bias.iter().map(|&v| -v).collect(),
    };
    b.add_arc(hidden, sum, BasisElement::Affine(neg))?;
    b.add_arc(sum, out, BasisElement::Activation(Activation::relu()))?;
    b.set_output(out);
    b.build()
}

/// `x ↦ x − W₂ ReLU(W₁ x)`, the module without the trailing ReLU. The
/// addition node is the output.
pub fn build_resnet_block<T: Scalar>(w1: Matrix<T>, w2: Matrix<T>) -> Result<Dag<T>> {
    let n = w1.cols();
    if w2.cols() != w1.rows() {
        return Err(shape_error("resnet W₂ input", w1.rows(), w2.cols()));
    }
    if w2.rows() != n {
        return Err(shape_error("resnet W₂ output", n, w2.rows()));
    }
    let mut b = DagBuilder::new(n);
    let hidden = b.add_node(NodeRole::Relay);
    let sum = b.add_node(NodeRole::Add);
    b.add_arc(NodeId(0), hidden, BasisElement::relu_affine(Affine::linear(w1)))?;
    b.add_arc(NodeId(0), sum, BasisElement::Identity)?;
    b.add_arc(hidden, sum, BasisElement::Linear(w2.scaled(-T::one())))?;
    b.set_output(sum);
    b.build()
}

/// Top and bottom channel maps of one fusion layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionLayer<T> {
    pub top: Affine<T>,
    pub bottom: Affine<T>,
}

/// Fusion layers in series: `f_j = ReLU(M_top f_{j−1}) + ReLU(M_bot f_{j−1})`,
/// i.e. `L = [I I]` applied to the concatenated channels.
#[derive(Clone, Debug)]
pub struct FusionStack<T> {
    pub dag: Dag<T>,
    /// Fusion node of each layer; layer `j` sits at level `j`.
    pub fusion_nodes: Vec<NodeId>,
    /// `ReLU∘M_top` arc of each layer.
    pub top_arcs: Vec<ArcId>,
    pub bottom_arcs: Vec<ArcId>,
}

pub fn build_fusion_stack<T: Scalar>(dim: usize, layers: Vec<FusionLayer<T>>) -> Result<FusionStack<T>> {
    if layers.is_empty() {
        return Err(Error::Construction("fusion stack needs at least one layer".into()));
    }
    let mut b = DagBuilder::new(dim);
    let mut prev = NodeId(0);
    let (mut fusion_nodes, mut top_arcs, mut bottom_arcs) = (Vec::new(), Vec::new(), Vec::new());
    for layer in layers {
        for m in [&layer.top, &layer.bottom] {
            if m.in_dim() != dim || m.out_dim() != dim {
                return Err(Error::Construction(format!(
                    "fusion layer maps must be {dim}x{dim}, found {}x{}",
                    m.out_dim(),
                    m.in_dim()
                )));
            }
        }
        let f = b.add_node(NodeRole::Add);
        top_arcs.push(b.add_arc(prev, f, BasisElement::relu_affine(layer.top))?);
        bottom_arcs.push(b.add_arc(prev, f, BasisElement::relu_affine(layer.bottom))?);
        fusion_nodes.push(f);
        prev = f;
    }
    b.set_output(prev);
    Ok(FusionStack {
        dag: b.build()?,
        fusion_nodes,
        top_arcs,
        bottom_arcs,
    })
}

/// Stack with every weight and bias entry i.i.d. standard normal, drawn layer
/// by layer (top weight, top bias, bottom weight, bottom bias).
pub fn random_fusion_stack<T: Scalar>(dim: usize, layer_count: usize, seed: u64) -> Result<FusionStack<T>> {
    let mut r = rng(seed);
    let layers = (0..layer_count)
        .map(|_| FusionLayer {
            top: gaussian_affine(&mut r, dim, dim, 1.0, 1.0),
            bottom: gaussian_affine(&mut r, dim, dim, 1.0, 1.0),
        })
        .collect();
    build_fusion_stack(dim, layers)
}

/// One fusion layer `[I I]·[ρM_top; ρM_bot]` as its own network.
pub fn build_fusion_module<T: Scalar>(top: Affine<T>, bottom: Affine<T>) -> Result<Dag<T>> {
    let dim = top.in_dim();
    Ok(build_fusion_stack(dim, vec![FusionLayer { top, bottom }])?.dag)
}

/// Branching network with twelve nodes spread over levels 0 to 6.
///
/// `c` relays into a residual pair ending at `b`, then `a`; three more
/// channels leave the input and merge through a concatenation `u` and the
/// fusion nodes `s` and `t`, which the output concatenates.
#[derive(Clone, Debug)]
pub struct BranchingExample<T> {
    pub dag: Dag<T>,
    pub a: NodeId,
    pub b: NodeId,
    pub c: NodeId,
    pub u: NodeId,
    pub s: NodeId,
    pub t: NodeId,
}

pub fn build_branching_example<T: Scalar>(dim: usize, seed: u64) -> Result<BranchingExample<T>> {
    let mut r = rng(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let relu_m = |r: &mut rand_chacha::ChaCha8Rng, cols: usize| {
        BasisElement::relu_affine(gaussian_affine(r, dim, cols, scale, 0.5))
    };
    let mut g = DagBuilder::<T>::new(dim);
    let input = NodeId(0);
    let c = g.add_node(NodeRole::Duplicate);
    let n2 = g.add_node(NodeRole::Relay);
    let b = g.add_node(NodeRole::Add);
    let a = g.add_node(NodeRole::Relay);
    let n5 = g.add_node(NodeRole::Relay);
    let n6 = g.add_node(NodeRole::Relay);
    let n7 = g.add_node(NodeRole::Relay);
    let u = g.add_node(NodeRole::Concat);
    let s = g.add_node(NodeRole::Add);
    let t = g.add_node(NodeRole::Add);
    let out = g.add_node(NodeRole::Concat);
    for n in [c, n5, n6, n7] {
        g.add_arc(input, n, relu_m(&mut r, dim))?;
    }
    g.add_arc(c, n2, relu_m(&mut r, dim))?;
    g.add_arc(n2, b, BasisElement::Linear(gaussian_matrix(&mut r, dim, dim, scale)))?;
    g.add_arc(c, b, BasisElement::Identity)?;
    g.add_arc(b, a, relu_m(&mut r, dim))?;
    g.add_arc(b, u, BasisElement::Identity)?;
    g.add_arc(n5, u, BasisElement::Identity)?;
    g.add_arc(a, s, BasisElement::Identity)?;
    g.add_arc(n6, s, BasisElement::Identity)?;
    g.add_arc(u, t, BasisElement::Linear(gaussian_matrix(&mut r, dim, 2 * dim, scale)))?;
    g.add_arc(n7, t, BasisElement::Identity)?;
    g.add_arc(s, out, BasisElement::Identity)?;
    g.add_arc(t, out, BasisElement::Identity)?;
    g.set_output(out);
    Ok(BranchingExample {
        dag: g.build()?,
        a,
        b,
        c,
        u,
        s,
        t,
    })
}

/// Unrolls a 2-D convolution producing one output channel into a matrix over
/// channel-major, row-major images. `kernels[c]` is the `k × k` filter (row
/// major) applied to input channel `c`.
pub fn conv2d_matrix<T: Scalar>(
    in_channels: usize,
    height: usize,
    width: usize,
    kernels: &[Vec<T>],
    k: usize,
    pad: usize,
) -> Result<Matrix<T>> {
    if kernels.len() != in_channels || kernels.iter().any(|f| f.len() != k * k) {
        return Err(Error::Construction(format!(
            "expected {in_channels} filters of {k}x{k} taps"
        )));
    }
    if height + 2 * pad < k || width + 2 * pad < k {
        return Err(Error::Construction("filter larger than padded image".into()));
    }
    let oh = height + 2 * pad - k + 1;
    let ow = width + 2 * pad - k + 1;
    let cols = in_channels * height * width;
    let mut data = vec![T::zero(); oh * ow * cols];
    for i in 0..oh {
        for j in 0..ow {
            let row = &mut data[(i * ow + j) * cols..(i * ow + j + 1) * cols];
            for (c, filter) in kernels.iter().enumerate() {
                for di in 0..k {
                    let y = i + di;
                    if y < pad || y - pad >= height {
                        continue;
                    }
                    for dj in 0..k {
                        let x = j + dj;
                        if x < pad || x - pad >= width {
                            continue;
                        }
                        row[c * height * width + (y - pad) * width + (x - pad)] = filter[di * k + dj];
                    }
                }
            }
        }
    }
    Matrix::new(oh * ow, cols, data)
}

/// Nodes of the LeNet-5 graph grouped by role in the architecture.
#[derive(Clone, Debug)]
pub struct Lenet5<T> {
    pub dag: Dag<T>,
    /// Six pooled first-stage channels (level 3).
    pub pool1: Vec<NodeId>,
    /// Their concatenation (level 4).
    pub concat1: NodeId,
    /// Sixteen pooled second-stage channels (level 7).
    pub pool2: Vec<NodeId>,
    pub concat2: NodeId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LenetParams {
    pub seed: u64,
    /// Bias entries are `N(0, bias_scale²)`; weights are `N(0, 1/fan_in)`.
    pub bias_scale: f64,
}

impl Default for LenetParams {
    fn default() -> Self {
        LenetParams {
            seed: 5,
            bias_scale: 0.1,
        }
    }
}

/// LeNet-5 on 28×28 inputs with seeded random weights.
///
/// Levels: 1 conv1 (six 28×28 channels, padding 2), 2 ReLU, 3 2×2 max-pool,
/// 4 concatenation, 5 conv2 (sixteen 10×10 channels), 6 ReLU, 7 max-pool,
/// 8 concatenation (400), 9 ReLU∘fc 120, 10 ReLU∘fc 84, 11 fc 10.
pub fn build_lenet5<T: Scalar>(params: LenetParams) -> Result<Lenet5<T>> {
    let mut r = rng(params.seed);
    let mut b = DagBuilder::<T>::new(28 * 28);
    let conv_layer = |r: &mut rand_chacha::ChaCha8Rng, in_c: usize, hw: usize, pad: usize| -> Result<Affine<T>> {
        let fan_in = (in_c * 25) as f64;
        let kernels: Vec<Vec<T>> = (0..in_c)
            .map(|_| gaussian_vec(r, 25, 1.0 / fan_in.sqrt()))
            .collect();
        let weight = conv2d_matrix(in_c, hw, hw, &kernels, 5, pad)?;
        let bias_value: T = gaussian_vec(r, 1, params.bias_scale)[0];
        let bias = vec![bias_value; weight.rows()];
        Affine::new(weight, bias)
    };

    let concat1 = {
        let mut pools = Vec::new();
        for _ in 0..6 {
            let conv = b.add_node(NodeRole::Relay);
            b.add_arc(NodeId(0), conv, BasisElement::Affine(conv_layer(&mut r, 1, 28, 2)?))?;
            let act = b.add_node(NodeRole::Relay);
            b.add_arc(conv, act, BasisElement::Activation(Activation::relu()))?;
            let pool = b.add_node(NodeRole::Relay);
            b.add_arc(
                act,
                pool,
                BasisElement::Activation(Activation::MaxPool(PoolBlocks::grid(1, 28, 28, 2)?)),
            )?;
            pools.push(pool);
        }
        let cat = b.add_node(NodeRole::Concat);
        for &p in &pools {
            b.add_arc(p, cat, BasisElement::Identity)?;
        }
        (pools, cat)
    };
    let concat2 = {
        let mut pools = Vec::new();
        for _ in 0..16 {
            let conv = b.add_node(NodeRole::Relay);
            b.add_arc(concat1.1, conv, BasisElement::Affine(conv_layer(&mut r, 6, 14, 0)?))?;
            let act = b.add_node(NodeRole::Relay);
            b.add_arc(conv, act, BasisElement::Activation(Activation::relu()))?;
            let pool = b.add_node(NodeRole::Relay);
            b.add_arc(
                act,
                pool,
                BasisElement::Activation(Activation::MaxPool(PoolBlocks::grid(1, 10, 10, 2)?)),
            )?;
            pools.push(pool);
        }
        let cat = b.add_node(NodeRole::Concat);
        for &p in &pools {
            b.add_arc(p, cat, BasisElement::Identity)?;
        }
        (pools, cat)
    };
    let mut prev = concat2.1;
    for (out, act) in [(120, true), (84, true), (10, false)] {
        let in_dim = b.node_dim(prev).expect("dimension known");
        let m = gaussian_affine(&mut r, out, in_dim, 1.0 / (in_dim as f64).sqrt(), params.bias_scale);
        let n = b.add_node(NodeRole::Relay);
        let elem = if act {
            BasisElement::relu_affine(m)
        } else {
            BasisElement::Affine(m)
        };
        b.add_arc(prev, n, elem)?;
        prev = n;
    }
    b.set_output(prev);
    Ok(Lenet5 {
        dag: b.build()?,
        pool1: concat1.0,
        concat1: concat1.1,
        pool2: concat2.0,
        concat2: concat2.1,
    })
}

fn planar_activation<T: Scalar>(act: Activation<T>) -> Result<Dag<T>> {
    let mut b = DagBuilder::new(2);
    let n = b.add_node(NodeRole::Relay);
    b.add_arc(NodeId(0), n, BasisElement::Activation(act))?;
    b.set_output(n);
    b.build()
}

/// ReLU on the plane; four regions (the quadrants).
pub fn planar_relu<T: Scalar>() -> Result<Dag<T>> {
    planar_activation(Activation::relu())
}

/// `max(x₁, x₂)`; two regions split by the diagonal.
pub fn planar_max2<T: Scalar>() -> Result<Dag<T>> {
    planar_activation(Activation::MaxPool(PoolBlocks::single(2)))
}

/// `ReLU(max(x₁, x₂))`; three regions.
pub fn planar_maxlu2<T: Scalar>() -> Result<Dag<T>> {
    planar_activation(Activation::MaxLu(PoolBlocks::single(2)))
}

/// Two ReLU channels on the plane fused by `[I I]`. Each channel's two lines
/// cut the plane into four regions; the four lines meet three times inside
/// `[−5, 5]²`, giving eight regions in that box.
pub fn planar_fusion_example<T: Scalar>() -> Result<FusionStack<T>> {
    let top = Affine::new(
        Matrix::from_f64_rows(&[vec![1.0, 0.1], vec![-0.1, 1.0]])?,
        vec![T::lit(3.0), T::lit(-1.0)],
    )?;
    let bottom = Affine::new(
        Matrix::from_f64_rows(&[vec![1.0, -0.15], vec![1.0, -1.0]])?,
        vec![T::lit(-3.0), T::lit(-6.0)],
    )?;
    build_fusion_stack(2, vec![FusionLayer { top, bottom }])
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resnet_module_closed_form() {
        let m1 = Affine::new(
            Matrix::from_f64_rows(&[vec![1.0, -0.5], vec![0.3, 0.8]]).unwrap(),
            vec![0.1, -0.2],
        )
        .unwrap();
        let m2 = Affine::new(
            Matrix::from_f64_rows(&[vec![0.4, 0.2], vec![-0.7, 0.5]]).unwrap(),
            vec![0.05, 0.0],
        )
        .unwrap();
        let net = build_resnet_module(m1.clone(), m2.clone()).unwrap();
        let relu = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
        for x in [[0.5, -1.0], [2.0, 3.0], [-1.5, 0.25]] {
            let h = relu(m1.apply(&x));
            let inner: Vec<f64> = x.iter().zip(m2.apply(&h)).map(|(a, b)| a - b).collect();
            assert_eq!(net.eval(&x).unwrap(), relu(inner));
        }
    }

    #[test]
    fn resnet_zero_weights_is_relu() {
        let z = Affine::new(Matrix::<f64>::zeros(2, 2), vec![0.0; 2]).unwrap();
        let net = build_resnet_module(z.clone(), z).unwrap();
        assert_eq!(net.eval(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn fusion_stack_levels() {
        let s = random_fusion_stack::<f64>(4, 3, 1).unwrap();
        let levels: Vec<usize> = s.fusion_nodes.iter().map(|&n| s.dag.level(n)).collect();
        assert_eq!(levels, vec![1, 2, 3]);
    }

    #[test]
    fn branching_example_levels() {
        let ex = build_branching_example::<f64>(3, 0).unwrap();
        let d = &ex.dag;
        assert_eq!(d.node_count(), 12);
        assert_eq!(d.level(ex.a), 4);
        assert_eq!(d.level(ex.c), 1);
        assert_eq!(d.max_level(), 6);
        assert_eq!(d.nodes_at_level(1).len(), 4);
        assert_eq!(d.nodes_at_level(2).len(), 1);
        assert_eq!(d.ancestors(ex.a).unwrap().len(), 5);
    }

    #[test]
    fn conv_matrix_matches_direct_convolution() {
        let img: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let k = vec![vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]];
        let m = conv2d_matrix(1, 4, 4, &k, 3, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (16, 16));
        let y = m.mul_vec(&img);
        // centre pixel (1,1): x(0,0) + x(1,1) − x(2,2)
        assert_eq!(y[5], 0.0 + 5.0 - 10.0);
        // corner (0,0): only x(0,0) − x(1,1) are inside
        assert_eq!(y[0], 0.0 - 5.0);
    }

    #[test]
    fn planar_examples_evaluate() {
        assert_eq!(planar_relu::<f64>().unwrap().eval(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
        assert_eq!(planar_max2::<f64>().unwrap().eval(&[-1.0, -2.0]).unwrap(), vec![-1.0]);
        assert_eq!(planar_maxlu2::<f64>().unwrap().eval(&[-1.0, -2.0]).unwrap(), vec![0.0]);
        assert_eq!(planar_fusion_example::<f64>().unwrap().dag.output_dim(), 2);
    }

    #[test]
    fn lenet_dimensions() {
        let net = build_lenet5::<f64>(LenetParams::default()).unwrap();
        let d = &net.dag;
        assert_eq!(d.dim(net.pool1[0]), 196);
        assert_eq!(d.dim(net.concat1), 1176);
        assert_eq!(d.dim(net.pool2[0]), 25);
        assert_eq!(d.dim(net.concat2), 400);
        assert_eq!(d.output_dim(), 10);
        assert_eq!(d.level(net.pool1[0]), 3);
        assert_eq!(d.level(net.concat1), 4);
        assert_eq!(d.level(net.pool2[3]), 7);
        assert_eq!(d.level(net.concat2), 8);
        assert_eq!(d.eval(&vec![0.5; 784]).unwrap().len(), 10);
    }
}
