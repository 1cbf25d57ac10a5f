//! Max-pooling and MaxLU (max-pooling composed with ReLU) over index blocks.

use serde::{Deserialize, Serialize};

use crate::basis::{Activation, BasisElement, CpwlSpec};
use crate::error::{Error, Result};
use crate::graph::{Dag, DagBuilder, NodeId, NodeRole};
use crate::matrix::{Affine, Matrix};
use crate::scalar::Scalar;

/// Groups of input coordinates; output coordinate `k` pools block `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolBlocks {
    pub blocks: Vec<Vec<usize>>,
}

impl PoolBlocks {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(Vec::is_empty) {
            return Err(Error::InvalidActivation(
                "pooling needs at least one block and no empty blocks".into(),
            ));
        }
        Ok(PoolBlocks { blocks })
    }

    /// One block spanning `0..n`.
    pub fn single(n: usize) -> Self {
        PoolBlocks {
            blocks: vec![(0..n).collect()],
        }
    }

    /// Non-overlapping `window × window` blocks over `channels` stacked
    /// `height × width` images (channel-major, row-major pixels). Output keeps
    /// the same layout with pooled images of `height/window × width/window`.
    pub fn grid(channels: usize, height: usize, width: usize, window: usize) -> Result<Self> {
        if window == 0 || !height.is_multiple_of(window) || !width.is_multiple_of(window) {
            return Err(Error::InvalidActivation(format!(
                "window {window} does not tile a {height}x{width} image"
            )));
        }
        let (oh, ow) = (height / window, width / window);
        let mut blocks = Vec::with_capacity(channels * oh * ow);
        for c in 0..channels {
            for i in 0..oh {
                for j in 0..ow {
                    let mut block = Vec::with_capacity(window * window);
                    for di in 0..window {
                        for dj in 0..window {
                            block.push(c * height * width + (i * window + di) * width + j * window + dj);
                        }
                    }
                    blocks.push(block);
                }
            }
        }
        Self::new(blocks)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.blocks.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Largest number of blocks reading one coordinate.
    pub fn multiplicity(&self) -> usize {
        let mut counts = vec![0usize; self.max_index() + 1];
        for &i in self.blocks.iter().flatten() {
            counts[i] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }
}

/// Position of the first maximum.
#[inline]
pub(crate) fn argmax<T: Scalar>(x: &[T], block: &[usize]) -> usize {
    let mut best = 0;
    for (p, &i) in block.iter().enumerate().skip(1) {
        if x[i] > x[block[best]] {
            best = p;
        }
    }
    best
}

/// Position selected by MaxLU, or `None` when no entry is positive.
#[inline]
pub(crate) fn maxlu_select<T: Scalar>(x: &[T], block: &[usize]) -> Option<usize> {
    let p = argmax(x, block);
    (x[block[p]] > T::zero()).then_some(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaxLu2Pattern {
    SelLeft,
    SelRight,
    Dead,
}

impl MaxLu2Pattern {
    /// Diagonal of the un-rectifying matrix.
    pub fn diagonal(self) -> [u8; 2] {
        match self {
            MaxLu2Pattern::SelLeft => [1, 0],
            MaxLu2Pattern::SelRight => [0, 1],
            MaxLu2Pattern::Dead => [0, 0],
        }
    }
}

/// `MaxLU₂(x) = [1 1]·D_x·x`
pub fn maxlu2<T: Scalar>(x: [T; 2]) -> (T, MaxLu2Pattern) {
    let pattern = if x[0] >= x[1] && x[0] > T::zero() {
        MaxLu2Pattern::SelLeft
    } else if x[1] > T::zero() && x[1] > x[0] {
        MaxLu2Pattern::SelRight
    } else {
        MaxLu2Pattern::Dead
    };
    let [d0, d1] = pattern.diagonal();
    let value = T::lit(d0 as f64) * x[0] + T::lit(d1 as f64) * x[1];
    (value, pattern)
}

/// Max over a block as a network of affine maps and ReLUs.
///
/// Size two uses `max₂(x) = (x₁+x₂)/2 + |x₁−x₂|/2`, split into a linear channel
/// and a ReLU channel that meet at an addition node. Even blocks pair their
/// halves, odd blocks append the last coordinate: `max₄ = max₂(max₂, max₂)`,
/// `max₅ = max₂(max₄, x₅)`.
pub fn maxpool_as_relu_network<T: Scalar>(block: usize) -> Result<Dag<T>> {
    if block < 2 {
        return Err(Error::InvalidArgument(format!(
            "max-pool network needs a block of at least 2, got {block}"
        )));
    }
    let mut b = DagBuilder::new(block);
    let indices: Vec<usize> = (0..block).collect();
    let out = max_subnet(&mut b, NodeId(0), block, &indices)?;
    b.set_output(out);
    b.build()
}

fn select_rows<T: Scalar>(in_dim: usize, rows: &[usize]) -> Matrix<T> {
    Matrix::from_fn(rows.len(), in_dim, |r, c| {
        if rows[r] == c {
            T::one()
        } else {
            T::zero()
        }
    })
}

// Returns a node holding max(x[idx]) where x is the value (of dimension `dim`) at `src`.
fn max_subnet<T: Scalar>(
    b: &mut DagBuilder<T>,
    src: NodeId,
    dim: usize,
    idx: &[usize],
) -> Result<NodeId> {
    match idx.len() {
        1 => {
            let n = b.add_node(NodeRole::Relay);
            b.add_arc(src, n, BasisElement::Linear(select_rows(dim, idx)))?;
            Ok(n)
        }
        2 => {
            let pair = if dim == 2 && idx == [0, 1] {
                src
            } else {
                let n = b.add_node(NodeRole::Relay);
                b.add_arc(src, n, BasisElement::Linear(select_rows(dim, idx)))?;
                n
            };
            max2_on_pair(b, pair)
        }
        n => {
            let (lhs, rhs) = if n % 2 == 0 {
                idx.split_at(n / 2)
            } else {
                idx.split_at(n - 1)
            };
            let l = max_subnet(b, src, dim, lhs)?;
            let r = max_subnet(b, src, dim, rhs)?;
            let joined = b.add_node(NodeRole::Concat);
            b.add_arc(l, joined, BasisElement::Identity)?;
            b.add_arc(r, joined, BasisElement::Identity)?;
            max2_on_pair(b, joined)
        }
    }
}

fn max2_on_pair<T: Scalar>(b: &mut DagBuilder<T>, pair: NodeId) -> Result<NodeId> {
    let half = T::lit(0.5);
    let sum = b.add_node(NodeRole::Add);
    b.add_arc(
        pair,
        sum,
        BasisElement::Linear(Matrix::new(1, 2, vec![half, half])?),
    )?;
    let diff = b.add_node(NodeRole::Relay);
    let one = T::one();
    let m = Matrix::new(2, 2, vec![one, -one, -one, one])?;
    b.add_arc(
        pair,
        diff,
        BasisElement::ActivationAffine(Activation::Pointwise(CpwlSpec::relu()), Affine::linear(m)),
    )?;
    b.add_arc(
        diff,
        sum,
        BasisElement::Linear(Matrix::new(1, 2, vec![half, half])?),
    )?;
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxlu2_cases() {
        assert_eq!(maxlu2([3.0, 1.0]), (3.0, MaxLu2Pattern::SelLeft));
        assert_eq!(maxlu2([-1.0, -2.0]), (0.0, MaxLu2Pattern::Dead));
        assert_eq!(maxlu2([1.0, 1.0]), (1.0, MaxLu2Pattern::SelLeft));
        assert_eq!(maxlu2([-1.0, 2.0]), (2.0, MaxLu2Pattern::SelRight));
        assert_eq!(maxlu2([0.0, 0.0]), (0.0, MaxLu2Pattern::Dead));
    }

    #[test]
    fn grid_blocks_tile_image() {
        let p = PoolBlocks::grid(2, 4, 4, 2).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p.blocks[0], vec![0, 1, 4, 5]);
        assert_eq!(p.blocks[4], vec![16, 17, 20, 21]);
        assert_eq!(p.multiplicity(), 1);
        assert!(PoolBlocks::grid(1, 5, 4, 2).is_err());
    }

    #[test]
    fn max_network_small_cases() {
        let net = maxpool_as_relu_network::<f64>(2).unwrap();
        assert_eq!(net.eval(&[1.0, 2.0]).unwrap(), vec![2.0]);
        let net3 = maxpool_as_relu_network::<f64>(3).unwrap();
        assert_eq!(net3.eval(&[1.0, 7.0, -2.0]).unwrap(), vec![7.0]);
        assert!(maxpool_as_relu_network::<f64>(1).is_err());
    }
}
