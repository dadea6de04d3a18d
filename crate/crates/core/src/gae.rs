//! Graph autoencoder: GraphSAGE mean-aggregator encoder, inner-product
//! decoder, and the reconstruction loss.

use crate::autodiff::{Csr, Tape, Var};
use crate::tensor::Tensor;
use std::rc::Rc;

/// Tape handles for one encoder layer: weight of shape D_out x (2 D_in) and
/// a 1 x D_out bias.
#[derive(Clone, Copy)]
pub struct SageLayerVars<'t> {
    pub w: Var<'t>,
    pub b: Var<'t>,
}

/// One GraphSAGE layer with the mean aggregator: each node concatenates its
/// own state with the (weighted) mean of its neighbors' states and projects
/// through tanh. Isolated nodes aggregate zero.
pub fn sage_layer<'t>(
    h_in: Var<'t>,
    neighbor_mean: &Rc<Csr>,
    layer: SageLayerVars<'t>,
    l2norm: bool,
) -> Var<'t> {
    let m = h_in.spmm(neighbor_mean.clone());
    let combined = h_in.concat_cols(m);
    let out = combined.matmul_nt(layer.w).add_row(layer.b).tanh();
    if l2norm {
        out.l2_normalize_rows()
    } else {
        out
    }
}

/// Stack of encoder layers from the initial node features.
pub fn encode<'t>(
    features: Var<'t>,
    neighbor_mean: &Rc<Csr>,
    layers: &[SageLayerVars<'t>],
    l2norm: bool,
) -> Var<'t> {
    *encode_with_states(features, neighbor_mean, layers, l2norm)
        .last()
        .unwrap()
}

/// Like [`encode`] but returning every layer state H^0..H^NL. Inductive
/// attachment of unseen posts aggregates against the intermediate states.
pub fn encode_with_states<'t>(
    features: Var<'t>,
    neighbor_mean: &Rc<Csr>,
    layers: &[SageLayerVars<'t>],
    l2norm: bool,
) -> Vec<Var<'t>> {
    assert!(!layers.is_empty(), "encoder needs at least one layer");
    let mut states = vec![features];
    for layer in layers {
        let h = sage_layer(*states.last().unwrap(), neighbor_mean, *layer, l2norm);
        states.push(h);
    }
    states
}

/// Inner-product decoder: sigmoid(Z . Z^T).
pub fn decode<'t>(z: Var<'t>) -> Var<'t> {
    z.matmul_nt(z).sigmoid()
}

/// Reconstruction loss against the target adjacency (edge weights
/// off-diagonal, ones on the diagonal). Mean per entry by default, summed
/// with `sum`.
pub fn gae_loss<'t>(target: Rc<Tensor>, a_hat: Var<'t>, sum: bool) -> Var<'t> {
    a_hat.sq_err(target, !sum)
}

/// Dense value-level reference for the encoder, written independently of the
/// tape ops: explicit per-node loops over neighbor lists. Used by tests.
pub fn encode_reference(
    features: &Tensor,
    adjacency: &[Vec<(usize, f64)>],
    weights: &[(Tensor, Tensor)],
    unweighted: bool,
    l2norm: bool,
) -> Tensor {
    let n = features.rows();
    let mut h = features.clone();
    for (w, b) in weights {
        let d_in = h.cols();
        let d_out = b.cols();
        let mut next = Tensor::zeros(n, d_out);
        for v in 0..n {
            let mut mean = vec![0.0; d_in];
            let nbrs = &adjacency[v];
            if !nbrs.is_empty() {
                let denom: f64 = if unweighted {
                    nbrs.len() as f64
                } else {
                    nbrs.iter().map(|&(_, w)| w).sum()
                };
                if denom != 0.0 {
                    for &(u, wt) in nbrs {
                        let coeff = if unweighted { 1.0 } else { wt };
                        for c in 0..d_in {
                            mean[c] += coeff * h.get(u, c) / denom;
                        }
                    }
                }
            }
            for o in 0..d_out {
                let mut acc = b.get(0, o);
                for c in 0..d_in {
                    acc += w.get(o, c) * h.get(v, c);
                    acc += w.get(o, d_in + c) * mean[c];
                }
                next.set(v, o, acc.tanh());
            }
            if l2norm {
                let nrm = crate::tensor::norm(next.row(v));
                if nrm > 0.0 {
                    for x in next.row_mut(v) {
                        *x /= nrm;
                    }
                }
            }
        }
        h = next;
    }
    h
}

/// Leaf-wrap layer parameters stored in a [`crate::params::ParamStore`].
pub fn layer_vars<'t>(
    tape: &'t Tape,
    store: &crate::params::ParamStore,
    n_layers: usize,
) -> Vec<SageLayerVars<'t>> {
    (1..=n_layers)
        .map(|k| SageLayerVars {
            w: tape.leaf(store.get(&format!("gae.W{k}")).clone()),
            b: tape.leaf(store.get(&format!("gae.b{k}")).clone()),
        })
        .collect()
}
