use crate::error::{Error, Result};
use rand::Rng;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
        }
    }

    // Subgradient at the kink is taken as 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Fully-connected network parameters.
///
/// `weights[l]` is row-major with shape `(layer_dims[l+1], layer_dims[l])`;
/// `biases[l]` has length `layer_dims[l+1]`. The last layer dimension must
/// be 1: the forward pass produces a single scalar logit per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Parameter gradients, same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(model: &ModelParams) -> Self {
        GradientSet {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::config(format!(
            "layer_dims needs at least input and output, got {:?}",
            layer_dims
        )));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::config(format!(
            "layer_dims must all be positive, got {:?}",
            layer_dims
        )));
    }
    if *layer_dims.last().unwrap() != 1 {
        return Err(Error::config(format!(
            "output layer must be scalar, got {:?}",
            layer_dims
        )));
    }
    Ok(())
}

impl ModelParams {
    /// Seeded init: each layer's weights and biases are drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` in a fixed order.
    pub fn init<R: Rng>(layer_dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l];
            let fan_out = layer_dims[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.gen_range(-bound..=bound)).collect();
            weights.push(w);
            biases.push(b);
        }
        Ok(ModelParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    /// All-zero parameters; useful as a deterministic placeholder.
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_dims.len() - 1 {
            weights.push(vec![0.0; layer_dims[l] * layer_dims[l + 1]]);
            biases.push(vec![0.0; layer_dims[l + 1]]);
        }
        Ok(ModelParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn check_batch<S: AsRef<[f64]>>(&self, batch: &[S]) -> Result<()> {
        for (i, x) in batch.iter().enumerate() {
            let got = x.as_ref().len();
            if got != self.input_dim() {
                return Err(Error::shape(
                    format!("input sample {i}"),
                    self.input_dim(),
                    got,
                ));
            }
        }
        Ok(())
    }

    /// Pre-activations per layer for one sample. `zs[l]` holds layer `l+1`'s
    /// pre-activation vector; the final entry is the scalar logit.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs = Vec::with_capacity(self.num_layers());
        let mut a: Vec<f64> = x.to_vec();
        for l in 0..self.num_layers() {
            let out_dim = self.layer_dims[l + 1];
            let in_dim = self.layer_dims[l];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for j in 0..out_dim {
                let row = &w[j * in_dim..(j + 1) * in_dim];
                let mut acc = 0.0;
                for k in 0..in_dim {
                    acc += row[k] * a[k];
                }
                z[j] += acc;
            }
            if l + 1 < self.num_layers() {
                a = z.iter().map(|&v| self.activation.apply(v)).collect();
            }
            zs.push(z);
        }
        zs
    }

    /// One logit per sample.
    pub fn forward<S: AsRef<[f64]>>(&self, batch: &[S]) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        Ok(batch
            .iter()
            .map(|x| {
                let zs = self.forward_trace(x.as_ref());
                zs.last().unwrap()[0]
            })
            .collect())
    }

    /// Gradient of `sum_i upstream[i] * logit_i` with respect to every
    /// parameter. Intermediate activations are recomputed here; callers pass
    /// per-sample `d loss / d logit` as `upstream`.
    pub fn backward<S: AsRef<[f64]>>(&self, batch: &[S], upstream: &[f64]) -> Result<GradientSet> {
        self.check_batch(batch)?;
        if upstream.len() != batch.len() {
            return Err(Error::shape("upstream", batch.len(), upstream.len()));
        }
        let mut grads = GradientSet::zeros_like(self);
        let n_layers = self.num_layers();
        for (x, &u) in batch.iter().zip(upstream) {
            let x = x.as_ref();
            let zs = self.forward_trace(x);
            // Activations feeding each layer: a[0] = x, a[l] = act(zs[l-1]).
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            acts.push(x.to_vec());
            for l in 0..n_layers - 1 {
                acts.push(zs[l].iter().map(|&v| self.activation.apply(v)).collect());
            }
            // Output layer is linear, so its delta is just the upstream value.
            let mut delta = vec![u];
            for l in (0..n_layers).rev() {
                let in_dim = self.layer_dims[l];
                let out_dim = self.layer_dims[l + 1];
                let a = &acts[l];
                for j in 0..out_dim {
                    let gw = &mut grads.weights[l][j * in_dim..(j + 1) * in_dim];
                    for k in 0..in_dim {
                        gw[k] += delta[j] * a[k];
                    }
                    grads.biases[l][j] += delta[j];
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let mut prev = vec![0.0; in_dim];
                    for j in 0..out_dim {
                        let row = &w[j * in_dim..(j + 1) * in_dim];
                        for k in 0..in_dim {
                            prev[k] += row[k] * delta[j];
                        }
                    }
                    for (k, p) in prev.iter_mut().enumerate() {
                        *p *= self.activation.derivative(zs[l - 1][k]);
                    }
                    delta = prev;
                }
            }
        }
        Ok(grads)
    }
}
