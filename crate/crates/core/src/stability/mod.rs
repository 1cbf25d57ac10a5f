//! Lipschitz certificates from per-level weight-norm sums.
//!
//! For each level `n ≥ 1` the level sum is `d·Σ ‖W_ab‖₂` over arcs `b → a`
//! into level-`n` nodes, where `W_ab` is the arc's weight matrix (bias
//! excluded) and arcs without one count as `‖I‖₂ = 1`. The recursion
//!
//! ```text
//! C(0) = 1,   C(n) = d · Σ_{a: l(a)=n} Σ_{b→a} ‖W_ab‖₂ · C(l(b))
//! ```
//!
//! bounds the Lipschitz constant of the stacked level-`n` map. If every level
//! from some `m` on has sum at most 1, the bound stops growing past level
//! `m − 1` and the network is certified stable.

mod gain;
mod spectral;

pub use gain::{empirical_gain, soundness_check, GainCurve, GainPoint, SoundnessReport, SoundnessViolation};
pub use spectral::{spectral_norm, POWER_MAX_ITERATIONS, POWER_TOLERANCE};

use crate::basis::BasisElement;
use crate::error::Result;
use crate::graph::{Arc, ArcId, Dag, NodeId, NodeRole};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Slack on the `sum ≤ 1` test absorbing rounding in the norms.
pub const LEVEL_SUM_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSum {
    pub level: usize,
    pub sum: f64,
    pub frob_sum: f64,
    pub arc_count: usize,
}

/// `‖I + W₂W₁‖₂` for an addition node fed by a direct link from `input` and
/// the branch `input → hidden → add` carrying `ρ∘W₁` then `W₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualFlag {
    pub add: NodeId,
    pub input: NodeId,
    pub hidden: NodeId,
    pub norm: f64,
}

impl ResidualFlag {
    pub fn satisfied(&self) -> bool {
        self.norm <= 1.0 + LEVEL_SUM_SLACK
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// Uniform bound used in the sums, at least 1.
    pub d: f64,
    /// Levels `1..=L`.
    pub level_sums: Vec<LevelSum>,
    pub stable_from: Option<usize>,
    /// `C(n)` for levels `0..=L`.
    pub certified_c: Vec<f64>,
    /// Informational residual-module checks; they do not affect the verdict.
    pub residual_flags: Vec<ResidualFlag>,
}

impl StabilityReport {
    pub fn certified(&self) -> bool {
        self.stable_from.is_some()
    }

    /// `max_{k ≤ n} C(k)`, a Lipschitz bound for the level-`n` map.
    pub fn bound_at(&self, level: usize) -> f64 {
        self.certified_c[..=level.min(self.certified_c.len() - 1)]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn max_level(&self) -> usize {
        self.certified_c.len() - 1
    }
}

/// Spectral and Frobenius norms an arc contributes to its level sum.
pub fn arc_norms<T: Scalar>(arc: &Arc<T>) -> Result<(f64, f64)> {
    match arc.elem.linear_part() {
        Some(w) => Ok((spectral_norm(w)?.as_f64(), w.frobenius_norm().as_f64())),
        None => Ok((1.0, (arc.out_dim as f64).sqrt())),
    }
}

/// `d` as used by the certificate: the uniform activation bound, raised to 1
/// so that arcs without a non-linearity are covered too.
pub fn certificate_bound<T: Scalar>(dag: &Dag<T>) -> f64 {
    dag.uniform_bound().as_f64().max(1.0)
}

fn norms_of<T: Scalar>(dag: &Dag<T>) -> Result<Vec<(f64, f64)>> {
    dag.arcs().iter().map(arc_norms).collect()
}

fn sums_from_norms<T: Scalar>(dag: &Dag<T>, norms: &[(f64, f64)], d: f64) -> Vec<LevelSum> {
    let mut sums: Vec<LevelSum> = (1..=dag.max_level())
        .map(|level| LevelSum {
            level,
            sum: 0.0,
            frob_sum: 0.0,
            arc_count: 0,
        })
        .collect();
    for (arc, &(s, f)) in dag.arcs().iter().zip(norms) {
        let entry = &mut sums[dag.level(arc.dst) - 1];
        entry.sum += d * s;
        entry.frob_sum += d * f;
        entry.arc_count += 1;
    }
    sums
}

pub fn level_sums<T: Scalar>(dag: &Dag<T>) -> Result<Vec<LevelSum>> {
    Ok(sums_from_norms(dag, &norms_of(dag)?, certificate_bound(dag)))
}

/// Smallest `m ≥ 1` with every level sum from `m` on at most 1.
pub fn stable_from(sums: &[LevelSum]) -> Option<usize> {
    if sums.is_empty() {
        return Some(1);
    }
    let mut m = None;
    for s in sums.iter().rev() {
        if s.sum > 1.0 + LEVEL_SUM_SLACK {
            break;
        }
        m = Some(s.level);
    }
    m
}

/// `‖I + M‖₂` for square `M`, accurate relative to `‖M‖` rather than to 1.
///
/// `(I+M)ᵀ(I+M) = I + S` with `S = M + Mᵀ + MᵀM`, so the norm is
/// `√(1 + λ_max(S))`. Power iteration on the positive semi-definite
/// `S + ‖S‖·I` finds `λ_max(S)` without the clustering near 1 that defeats a
/// direct iteration on `I + M` when `M` is small.
pub fn identity_plus_norm(m: &Matrix<f64>) -> Result<f64> {
    let n = m.rows();
    let mt = m.transpose();
    let s = m.add(&mt)?.add(&mt.matmul(m)?)?;
    let shift = spectral_norm(&s)?;
    if shift == 0.0 {
        return Ok(1.0);
    }
    let top = spectral_norm(&s.add(&Matrix::identity(n).scaled(shift))?)? - shift;
    Ok((1.0 + top).max(0.0).sqrt())
}

fn residual_flags<T: Scalar>(dag: &Dag<T>) -> Result<Vec<ResidualFlag>> {
    let mut flags = Vec::new();
    for (v, node) in dag.nodes().iter().enumerate() {
        let add = NodeId(v);
        let ins = dag.incoming(add);
        if node.role != NodeRole::Add || ins.len() != 2 {
            continue;
        }
        for (direct, branch) in [(ins[0], ins[1]), (ins[1], ins[0])] {
            let (direct, branch) = (&dag.arcs()[direct.0], &dag.arcs()[branch.0]);
            if direct.elem != BasisElement::Identity {
                continue;
            }
            let hidden = branch.src;
            let feed = dag.incoming(hidden);
            let (Some(w2), [first]) = (branch.elem.linear_part(), feed) else {
                continue;
            };
            let first = &dag.arcs()[first.0];
            let (BasisElement::ActivationAffine(_, m1), true) = (&first.elem, first.src == direct.src) else {
                continue;
            };
            let n = w2.rows();
            if n != m1.weight.cols() {
                continue;
            }
            let norm = identity_plus_norm(&w2.matmul(&m1.weight)?.cast::<f64>())?;
            flags.push(ResidualFlag {
                add,
                input: direct.src,
                hidden,
                norm,
            });
            break;
        }
    }
    Ok(flags)
}

pub fn certify<T: Scalar>(dag: &Dag<T>) -> Result<StabilityReport> {
    let norms = norms_of(dag)?;
    let d = certificate_bound(dag);
    let level_sums = sums_from_norms(dag, &norms, d);
    let mut c = vec![0.0; dag.max_level() + 1];
    c[0] = 1.0;
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); dag.max_level() + 1];
    for (i, arc) in dag.arcs().iter().enumerate() {
        by_level[dag.level(arc.dst)].push(i);
    }
    for n in 1..c.len() {
        c[n] = by_level[n]
            .iter()
            .map(|&i| d * norms[i].0 * c[dag.level(dag.arcs()[i].src)])
            .sum();
    }
    Ok(StabilityReport {
        d,
        stable_from: stable_from(&level_sums),
        level_sums,
        certified_c: c,
        residual_flags: residual_flags(dag)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelScale {
    pub level: usize,
    pub factor: f64,
}

#[derive(Clone, Debug)]
pub struct RescaleOutcome<T> {
    pub dag: Dag<T>,
    pub scaled: Vec<LevelScale>,
    /// Levels whose weight-free arcs alone already exceed 1.
    pub unresolved: Vec<usize>,
}

/// Scales the weight matrices on arcs into every level whose sum exceeds 1
/// so that the sum becomes 1, leaving biases alone. With `use_frobenius`
/// the Frobenius sums decide the factor, which also bounds the spectral sums.
///
/// A level whose arcs all carry weights is scaled by `1/s_n`. Arcs without
/// weights cannot be scaled; the remaining arcs then absorb the excess.
pub fn rescale_with_report<T: Scalar>(dag: &Dag<T>, use_frobenius: bool) -> Result<RescaleOutcome<T>> {
    let norms = norms_of(dag)?;
    let d = certificate_bound(dag);
    let mut factors = vec![1.0; dag.max_level() + 1];
    let (mut scaled, mut unresolved) = (Vec::new(), Vec::new());
    for n in 1..=dag.max_level() {
        let (mut fixed, mut free) = (0.0, 0.0);
        for (arc, &(s, f)) in dag.arcs().iter().zip(&norms) {
            if dag.level(arc.dst) != n {
                continue;
            }
            let v = d * if use_frobenius { f } else { s };
            if arc.elem.linear_part().is_some() {
                free += v;
            } else {
                fixed += v;
            }
        }
        if fixed + free <= 1.0 + LEVEL_SUM_SLACK {
            continue;
        }
        if fixed >= 1.0 || free == 0.0 {
            unresolved.push(n);
            continue;
        }
        let factor = (1.0 - fixed) / free;
        factors[n] = factor;
        scaled.push(LevelScale { level: n, factor });
    }
    if !unresolved.is_empty() {
        log::warn!("levels {unresolved:?} exceed 1 through weight-free arcs alone and cannot be rescaled");
    }
    let out = dag.map_elements(|a, elem| {
        let mut e = elem.clone();
        let f = factors[dag.level(dag.arcs()[a.0].dst)];
        if f != 1.0 {
            e.scale_linear(T::lit(f));
        }
        e
    })?;
    Ok(RescaleOutcome {
        dag: out,
        scaled,
        unresolved,
    })
}

pub fn rescale_to_stability<T: Scalar>(dag: &Dag<T>, use_frobenius: bool) -> Result<Dag<T>> {
    Ok(rescale_with_report(dag, use_frobenius)?.dag)
}

/// Arc ids grouped by the level of their head, for reporting.
pub fn arcs_by_level<T: Scalar>(dag: &Dag<T>) -> Vec<Vec<ArcId>> {
    let mut out = vec![Vec::new(); dag.max_level() + 1];
    for (i, arc) in dag.arcs().iter().enumerate() {
        out[dag.level(arc.dst)].push(ArcId(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Activation;
    use crate::graph::modules::{build_resnet_block, build_series_stack};
    use crate::matrix::Affine;

    #[test]
    fn chain_recursion_closes() {
        let w = Matrix::diag(&[0.9, 0.3]);
        let layers = vec![Affine::new(w, vec![0.1, -0.2]).unwrap(); 5];
        let dag = build_series_stack(2, &layers, Activation::relu()).unwrap();
        let r = certify(&dag).unwrap();
        assert_eq!(r.stable_from, Some(1));
        for n in 0..=5 {
            assert!((r.certified_c[n] - 0.9f64.powi(n as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn resnet_block_needs_zero_w2() {
        let w1 = Matrix::diag(&[0.5, 0.5]);
        let r = certify(&build_resnet_block(w1.clone(), Matrix::diag(&[0.1, 0.1])).unwrap()).unwrap();
        assert!(!r.certified());
        assert_eq!(r.level_sums.last().unwrap().sum, 1.1);
        assert_eq!(r.residual_flags.len(), 1);
        assert!(r.residual_flags[0].satisfied());
        let r0 = certify(&build_resnet_block(w1, Matrix::zeros(2, 2)).unwrap()).unwrap();
        assert!(r0.certified());
    }

    #[test]
    fn near_identity_norm() {
        let m = Matrix::diag(&[-1e-6, 2e-7, 0.0]);
        assert!((identity_plus_norm(&m).unwrap() - (1.0 + 2e-7)).abs() < 1e-15);
        let flip = Matrix::identity(2).scaled(-2.0);
        assert!((identity_plus_norm(&flip).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_two_arcs() {
        let mut b = crate::graph::DagBuilder::<f64>::new(2);
        let s = b.add_node(NodeRole::Add);
        b.add_arc(NodeId(0), s, BasisElement::Linear(Matrix::diag(&[2.0, 1.0]))).unwrap();
        b.add_arc(NodeId(0), s, BasisElement::Linear(Matrix::diag(&[-2.0, 0.5]))).unwrap();
        let dag = b.build().unwrap();
        let out = rescale_with_report(&dag, false).unwrap();
        assert_eq!(out.scaled, vec![LevelScale { level: 1, factor: 0.25 }]);
        let sums = level_sums(&out.dag).unwrap();
        assert!((sums[0].sum - 1.0).abs() < 1e-12);
    }
}
