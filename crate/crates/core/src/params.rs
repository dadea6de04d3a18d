//! Named trainable tensors with gradient slots, deterministic
//! initialization, and the optimizers.

use crate::error::{Error, Result};
use crate::rng::{fnv1a64, SplitMix64};
use crate::tensor::Tensor;
use std::collections::BTreeMap;

/// Ordered map of parameter name to tensor plus a gradient slot of the same
/// shape. Iteration order is lexicographic and stable across runs.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, tensor: Tensor) {
        assert!(
            !self.entries.contains_key(name),
            "duplicate parameter {name}"
        );
        let (r, c) = tensor.shape();
        self.grads.insert(name.to_string(), Tensor::zeros(r, c));
        self.entries.insert(name.to_string(), tensor);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn grad(&self, name: &str) -> &Tensor {
        self.grads
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    /// Copy of every parameter tensor, keyed by name.
    pub fn snapshot(&self) -> BTreeMap<String, Tensor> {
        self.entries.clone()
    }

    /// Overwrite every gradient slot. Unnamed slots are zeroed; NaN or Inf in
    /// any incoming gradient is a fatal numeric error naming the parameter.
    pub fn set_grads(&mut self, mut incoming: BTreeMap<String, Tensor>) -> Result<()> {
        for (name, slot) in self.grads.iter_mut() {
            let g = match incoming.remove(name) {
                Some(g) => g,
                None => {
                    let (r, c) = slot.shape();
                    Tensor::zeros(r, c)
                }
            };
            if !g.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite gradient for parameter {name}"
                )));
            }
            assert_eq!(g.shape(), slot.shape(), "gradient shape for {name}");
            *slot = g;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for slot in self.grads.values_mut() {
            for v in slot.data_mut() {
                *v = 0.0;
            }
        }
    }
}

/// Deterministic weight initialization: a splitmix64 stream keyed by the
/// parameter name and run seed, entries in [-1, 1) scaled by 1/sqrt(fan_in).
pub fn init_weight(name: &str, rows: usize, cols: usize, fan_in: usize, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(fnv1a64(name.as_bytes()) ^ seed);
    let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.next_unit() * scale).collect(),
    )
}

/// Adaptive-moment state for one parameter set.
#[derive(Clone, Debug)]
struct AdamSlot {
    m: Tensor,
    v: Tensor,
}

#[derive(Clone, Debug)]
enum OptState {
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: u64,
        slots: BTreeMap<String, AdamSlot>,
    },
    Sgd,
}

/// Optimizer with deterministic updates.
#[derive(Clone, Debug)]
pub struct Optimizer {
    state: OptState,
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer {
            state: OptState::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                slots: BTreeMap::new(),
            },
        }
    }

    pub fn sgd() -> Self {
        Optimizer { state: OptState::Sgd }
    }

    pub fn from_kind(kind: crate::config::OptimizerKind) -> Self {
        match kind {
            crate::config::OptimizerKind::Adam => Optimizer::adam(),
            crate::config::OptimizerKind::Sgd => Optimizer::sgd(),
        }
    }

    /// Apply one update from the gradients currently held in the store.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        match &mut self.state {
            OptState::Sgd => {
                let names = store.names();
                for name in names {
                    let g = store.grad(&name).clone();
                    store.get_mut(&name).add_assign_scaled(&g, -lr);
                }
            }
            OptState::Adam {
                beta1,
                beta2,
                eps,
                t,
                slots,
            } => {
                *t += 1;
                let (b1, b2, eps) = (*beta1, *beta2, *eps);
                let bc1 = 1.0 - b1.powi(*t as i32);
                let bc2 = 1.0 - b2.powi(*t as i32);
                for name in store.names() {
                    let g = store.grad(&name).clone();
                    let (r, c) = g.shape();
                    let slot = slots.entry(name.clone()).or_insert_with(|| AdamSlot {
                        m: Tensor::zeros(r, c),
                        v: Tensor::zeros(r, c),
                    });
                    let param = store.get_mut(&name);
                    for i in 0..r * c {
                        let gi = g.data()[i];
                        let m = b1 * slot.m.data()[i] + (1.0 - b1) * gi;
                        let v = b2 * slot.v.data()[i] + (1.0 - b2) * gi * gi;
                        slot.m.data_mut()[i] = m;
                        slot.v.data_mut()[i] = v;
                        let mhat = m / bc1;
                        let vhat = v / bc2;
                        param.data_mut()[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
