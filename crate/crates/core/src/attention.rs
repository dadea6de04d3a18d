//! Feature refinement: language-guided attention, user-guided attention, and
//! the word-level attention pooling that initializes tweet graph nodes.
//!
//! Each mechanism projects the token matrix through its own tanh layer
//! (separate parameter sets: W_l/b_l, W_u/b_u, W_w/b_w with context c_w),
//! scores rows against a guide vector, masks PAD positions out of the
//! softmax, and pools the projected rows by the resulting weights.

use crate::autodiff::Var;
use std::rc::Rc;

/// Attention weights (1 x S, zero on masked positions, summing to one over
/// the rest) and the pooled representation (1 x D).
#[derive(Clone, Copy)]
pub struct AttnOutput<'t> {
    pub weights: Var<'t>,
    pub pooled: Var<'t>,
}

/// Shared core: hidden = tanh(T_f W + b), weights = masked softmax of
/// hidden . guide, pooled = weights . rows, where rows defaults to hidden.
fn guided<'t>(
    tf: Var<'t>,
    guide: Var<'t>,
    w: Var<'t>,
    b: Var<'t>,
    mask: &Rc<Vec<bool>>,
    pool_rows: Option<Var<'t>>,
) -> AttnOutput<'t> {
    let (s, _) = tf.shape();
    assert_eq!(mask.len(), s, "mask length must match token count");
    assert!(mask.iter().any(|&m| m), "attention over fully masked input");
    let hidden = tf.matmul(w).add_row(b).tanh();
    // guide (1 x D) . hidden^T (D x S) -> logits (1 x S)
    let logits = guide.matmul_nt(hidden);
    let weights = logits.masked_softmax(mask.clone());
    let pooled = weights.matmul(pool_rows.unwrap_or(hidden));
    AttnOutput { weights, pooled }
}

/// Language-guided attention over the token matrix.
pub fn lga<'t>(
    tf: Var<'t>,
    l_f: Var<'t>,
    w_l: Var<'t>,
    b_l: Var<'t>,
    mask: &Rc<Vec<bool>>,
) -> AttnOutput<'t> {
    guided(tf, l_f, w_l, b_l, mask, None)
}

/// User-guided attention over the token matrix.
///
/// `pool_hl` carries the language projection (W_l, b_l) to pool
/// language-projected rows under the user-guided weights; the default pools
/// the user-projected rows.
pub fn uga<'t>(
    tf: Var<'t>,
    u_f: Var<'t>,
    w_u: Var<'t>,
    b_u: Var<'t>,
    pool_hl: Option<(Var<'t>, Var<'t>)>,
    mask: &Rc<Vec<bool>>,
) -> AttnOutput<'t> {
    let pool_rows = pool_hl.map(|(w_l, b_l)| tf.matmul(w_l).add_row(b_l).tanh());
    guided(tf, u_f, w_u, b_u, mask, pool_rows)
}

/// Word-level attention pooling with the learned context vector as guide.
pub fn word_attention_pool<'t>(
    tf: Var<'t>,
    w_w: Var<'t>,
    b_w: Var<'t>,
    c_w: Var<'t>,
    mask: &Rc<Vec<bool>>,
) -> Var<'t> {
    guided(tf, c_w, w_w, b_w, mask, None).pooled
}

/// Masked mean of the raw token rows; the no-attention stand-in.
pub fn masked_mean<'t>(tf: Var<'t>, mask: &Rc<Vec<bool>>) -> Var<'t> {
    let (s, _) = tf.shape();
    assert_eq!(mask.len(), s);
    let n = mask.iter().filter(|&&m| m).count();
    assert!(n > 0, "mean over fully masked input");
    let weights: Vec<f64> = mask
        .iter()
        .map(|&m| if m { 1.0 / n as f64 } else { 0.0 })
        .collect();
    let tape = tf.tape();
    let w = tape.constant(crate::tensor::Tensor::row_vector(weights));
    w.matmul(tf)
}
