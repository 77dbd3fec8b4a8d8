//! Named parameter store with deterministic initialization.
//!
//! Parameters live in an insertion-ordered map so that initialization,
//! checkpoint layout and optimizer traversal all share one fixed order.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retro3d_tensor::{watch, Tensor};

use crate::config::ModelConfig;
use crate::embedding::{lift_dim, ATOM_TYPE_COUNT};
use crate::{ModelError, Result};

#[derive(Debug, Clone)]
pub struct ParamStore {
    params: IndexMap<String, Tensor>,
}

impl ParamStore {
    /// Build every parameter of the model in a fixed order from one seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<ParamStore> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore { params: IndexMap::new() };
        let d = config.dim;
        let k = config.kernels;

        store.add_matrix(&mut rng, "embed.token", config.vocab_size, d);
        store.add_matrix(&mut rng, "atom_embed", ATOM_TYPE_COUNT, d);

        let lift = lift_dim(config);
        for l in 0..config.comenet_layers {
            store.add_matrix(&mut rng, &format!("comenet.{l}.msg.w1"), d + lift, d);
            store.add_zeros(&format!("comenet.{l}.msg.b1"), vec![d]);
            store.add_matrix(&mut rng, &format!("comenet.{l}.msg.w2"), d, d);
            store.add_zeros(&format!("comenet.{l}.msg.b2"), vec![d]);
            store.add_matrix(&mut rng, &format!("comenet.{l}.upd.w1"), 2 * d, d);
            store.add_zeros(&format!("comenet.{l}.upd.b1"), vec![d]);
            store.add_matrix(&mut rng, &format!("comenet.{l}.upd.w2"), d, d);
            store.add_zeros(&format!("comenet.{l}.upd.b2"), vec![d]);
        }

        store.add_value("fuse.lambda1", vec![1], vec![1.0]);
        store.add_value("fuse.lambda2", vec![1], vec![1.0]);

        // Gaussian kernel bank: centers evenly spaced over [0, 10] angstroms,
        // unit widths, identity affine per bond type (5th row = non-bonded).
        let mu: Vec<f64> = (0..k)
            .map(|i| if k == 1 { 5.0 } else { 10.0 * i as f64 / (k - 1) as f64 })
            .collect();
        store.add_value("gauss.mu", vec![k], mu);
        store.add_value("gauss.sigma", vec![k], vec![1.0; k]);
        store.add_value("gauss.gamma", vec![5], vec![1.0; 5]);
        store.add_value("gauss.beta", vec![5], vec![0.0; 5]);
        store.add_matrix(&mut rng, "gauss.w1", k, k);
        store.add_zeros("gauss.b1", vec![k]);
        store.add_matrix(&mut rng, "gauss.w2", k, k);
        store.add_zeros("gauss.b2", vec![k]);

        for l in 0..config.layers_enc {
            store.add_attention(&mut rng, &format!("enc.{l}.attn"), d);
            store.add_layernorm(&format!("enc.{l}.ln1"), d);
            store.add_ffn(&mut rng, &format!("enc.{l}.ffn"), d, config.ffn_dim);
            store.add_layernorm(&format!("enc.{l}.ln2"), d);
            if l + 1 < config.layers_enc {
                store.add_matrix(&mut rng, &format!("enc.{l}.refine.w"), 2 * d, k);
                store.add_zeros(&format!("enc.{l}.refine.b"), vec![k]);
            }
        }

        for l in 0..config.layers_dec {
            store.add_attention(&mut rng, &format!("dec.{l}.self"), d);
            store.add_layernorm(&format!("dec.{l}.ln1"), d);
            store.add_attention(&mut rng, &format!("dec.{l}.cross"), d);
            store.add_layernorm(&format!("dec.{l}.ln2"), d);
            store.add_ffn(&mut rng, &format!("dec.{l}.ffn"), d, config.ffn_dim);
            store.add_layernorm(&format!("dec.{l}.ln3"), d);
        }

        store.add_matrix(&mut rng, "out.w", d, config.vocab_size);
        store.add_zeros("out.b", vec![config.vocab_size]);
        Ok(store)
    }

    pub fn from_map(params: IndexMap<String, Tensor>) -> ParamStore {
        ParamStore { params }
    }

    fn add_matrix(&mut self, rng: &mut ChaCha8Rng, name: &str, rows: usize, cols: usize) {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.params.insert(name.to_string(), Tensor::from_vec(vec![rows, cols], data).unwrap());
    }

    fn add_zeros(&mut self, name: &str, shape: Vec<usize>) {
        self.params.insert(name.to_string(), Tensor::zeros(shape));
    }

    fn add_value(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        self.params.insert(name.to_string(), Tensor::from_vec(shape, data).unwrap());
    }

    fn add_attention(&mut self, rng: &mut ChaCha8Rng, prefix: &str, d: usize) {
        for p in ["wq", "wk", "wv", "wo"] {
            self.add_matrix(rng, &format!("{prefix}.{p}"), d, d);
        }
        for p in ["bq", "bk", "bv", "bo"] {
            self.add_zeros(&format!("{prefix}.{p}"), vec![d]);
        }
    }

    fn add_layernorm(&mut self, prefix: &str, d: usize) {
        self.add_value(&format!("{prefix}.gamma"), vec![d], vec![1.0; d]);
        self.add_zeros(&format!("{prefix}.beta"), vec![d]);
    }

    fn add_ffn(&mut self, rng: &mut ChaCha8Rng, prefix: &str, d: usize, f: usize) {
        self.add_matrix(rng, &format!("{prefix}.w1"), d, f);
        self.add_zeros(&format!("{prefix}.b1"), vec![f]);
        self.add_matrix(rng, &format!("{prefix}.w2"), f, d);
        self.add_zeros(&format!("{prefix}.b2"), vec![d]);
    }

    pub fn get(&self, name: &str) -> Result<Tensor> {
        self.params
            .get(name)
            .cloned()
            .ok_or_else(|| ModelError::Param(format!("missing parameter {name:?}")))
    }

    pub fn set(&mut self, name: &str, value: Tensor) {
        self.params.insert(name.to_string(), value);
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.keys().cloned().collect()
    }

    /// Register every parameter on the open tape (start of a training step).
    pub fn watch_all(&mut self) {
        for (_, t) in self.params.iter_mut() {
            *t = watch(t);
        }
    }

    /// Drop tape handles (end of a training step).
    pub fn detach_all(&mut self) {
        for (_, t) in self.params.iter_mut() {
            *t = t.detached();
        }
    }

    /// Collect per-parameter gradients from a backward pass, zeros for
    /// parameters the loss did not reach.
    pub fn collect_gradients(&self, grads: &retro3d_tensor::GradMap) -> IndexMap<String, Vec<f64>> {
        self.params
            .iter()
            .map(|(name, t)| {
                let g = grads.get(t).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()]);
                (name.clone(), g)
            })
            .collect()
    }

    /// Total scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }
}
