//! Seeded random weights and random valid networks.
//!
//! All randomness goes through `ChaCha8Rng`, whose output stream is fixed
//! across platforms for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{Activation, BasisElement, CpwlSpec, TransformSpec};
use crate::error::Result;
use crate::graph::{Dag, DagBuilder, NodeId, NodeRole};
use crate::matrix::{Affine, Matrix};
use crate::scalar::Scalar;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec<T: Scalar>(rng: &mut impl Rng, len: usize, scale: f64) -> Vec<T> {
    (0..len)
        .map(|_| T::lit(scale * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Entries i.i.d. `N(0, scale²)`, drawn in row-major order.
pub fn gaussian_matrix<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix<T> {
    Matrix::new(rows, cols, gaussian_vec(rng, rows * cols, scale)).expect("shape matches data")
}

pub fn gaussian_affine<T: Scalar>(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    weight_scale: f64,
    bias_scale: f64,
) -> Affine<T> {
    let weight = gaussian_matrix(rng, rows, cols, weight_scale);
    let bias = gaussian_vec(rng, rows, bias_scale);
    Affine { weight, bias }
}

/// `count` standard-normal vectors of length `dim`.
pub fn gaussian_samples<T: Scalar>(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<Vec<T>> {
    (0..count).map(|_| gaussian_vec(rng, dim, 1.0)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomDagConfig {
    pub input_dim: usize,
    /// Nodes besides the input and the collecting output node.
    pub inner_nodes: usize,
    pub max_dim: usize,
    /// Most incoming arcs per inner node.
    pub max_fan_in: usize,
    /// Weights are `N(0, (weight_scale)²/fan_in)`.
    pub weight_scale: f64,
    /// Allow identity and bare activation arcs, which carry no weight matrix.
    pub unweighted_arcs: bool,
    pub transforms: bool,
}

impl Default for RandomDagConfig {
    fn default() -> Self {
        RandomDagConfig {
            input_dim: 3,
            inner_nodes: 8,
            max_dim: 5,
            max_fan_in: 3,
            weight_scale: 1.0,
            unweighted_arcs: true,
            transforms: false,
        }
    }
}

fn random_activation<T: Scalar>(rng: &mut impl Rng) -> Activation<T> {
    let spec = match rng.random_range(0..4) {
        0 => CpwlSpec::relu(),
        1 => CpwlSpec::leaky_relu(T::lit(0.1)),
        2 => CpwlSpec::abs(),
        _ => CpwlSpec::hard_tanh(),
    };
    Activation::Pointwise(spec)
}

fn random_transform<T: Scalar>(rng: &mut impl Rng) -> TransformSpec<T> {
    match rng.random_range(0..3) {
        0 => TransformSpec::Sigmoid,
        1 => TransformSpec::Tanh,
        _ => TransformSpec::Softmax { lambda: T::one() },
    }
}

fn random_element<T: Scalar>(
    rng: &mut impl Rng,
    cfg: &RandomDagConfig,
    in_dim: usize,
    out_dim: usize,
) -> BasisElement<T> {
    if cfg.unweighted_arcs && in_dim == out_dim && rng.random_bool(0.25) {
        return if rng.random_bool(0.5) {
            BasisElement::Identity
        } else {
            BasisElement::Activation(random_activation(rng))
        };
    }
    let scale = cfg.weight_scale / (in_dim as f64).sqrt();
    let m = gaussian_affine(rng, out_dim, in_dim, scale, 0.5);
    let choice = rng.random_range(0..if cfg.transforms { 5 } else { 4 });
    match choice {
        0 => BasisElement::Linear(m.weight),
        1 => BasisElement::Affine(m),
        4 => BasisElement::TransformAffine(random_transform(rng), m),
        _ => BasisElement::ActivationAffine(random_activation(rng), m),
    }
}

/// A random valid network. Every inner node reads from one to
/// `max_fan_in` earlier nodes; nodes without successors feed the output
/// node through linear arcs, so every node lies on an input-output path.
pub fn random_dag<T: Scalar>(cfg: &RandomDagConfig, seed: u64) -> Result<Dag<T>> {
    let mut rng = rng(seed);
    let mut b = DagBuilder::<T>::new(cfg.input_dim);
    let mut dims = vec![cfg.input_dim];
    let mut has_succ = vec![false];
    for v in 1..=cfg.inner_nodes {
        let role = match rng.random_range(0..3) {
            0 => NodeRole::Relay,
            1 => NodeRole::Add,
            _ => NodeRole::Concat,
        };
        let fan_in = if role == NodeRole::Relay {
            1
        } else {
            rng.random_range(1..=cfg.max_fan_in.max(1))
        };
        let node = b.add_node(role);
        let dim = rng.random_range(1..=cfg.max_dim);
        for _ in 0..fan_in {
            let src = rng.random_range(0..v);
            let out_dim = if role == NodeRole::Concat {
                rng.random_range(1..=cfg.max_dim)
            } else {
                dim
            };
            let elem = random_element(&mut rng, cfg, dims[src], out_dim);
            b.add_arc(NodeId(src), node, elem)?;
            has_succ[src] = true;
        }
        dims.push(b.node_dim(node).expect("node has incoming arcs"));
        has_succ.push(false);
    }
    let out = b.add_node(NodeRole::Add);
    let out_dim = rng.random_range(1..=cfg.max_dim);
    for v in 0..dims.len() {
        if !has_succ[v] {
            let scale = cfg.weight_scale / (dims[v] as f64).sqrt();
            let w = gaussian_matrix(&mut rng, out_dim, dims[v], scale);
            b.add_arc(NodeId(v), out, BasisElement::Linear(w))?;
        }
    }
    b.set_output(out);
    b.build()
}
