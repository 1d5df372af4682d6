//! Mixture density network over localization-parameter space.
//!
//! A small tanh MLP maps a descriptor to the parameters of a Gaussian
//! mixture over (dx, dy, a): m mixing logits, m spherical means in R^3, and
//! m log standard deviations, an output head of width 5m. Training minimizes
//! the mixture negative log-likelihood with plain seeded minibatch SGD, and
//! every analytic gradient is checkable against central finite differences.
//! The point prediction is the mean of the component with the highest prior,
//! projected back to a square pixel box.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{denormalize_to_box, BoundingBox, LocalizationParams, PersonInstance};

/// Dimensionality of the regression target (dx, dy, a).
pub const TARGET_DIM: usize = 3;

/// Mixture parameters produced by the network for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    /// Mixing proportions; non-negative, summing to one.
    pub weights: Vec<f64>,
    /// Component means in localization-parameter space.
    pub means: Vec<[f64; TARGET_DIM]>,
    /// Spherical standard deviation per component; strictly positive.
    pub sigmas: Vec<f64>,
}

impl GmmParams {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }
}

/// One dense layer, row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    fn apply(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            output.push(acc);
        }
    }
}

/// The network: tanh hidden layers and a linear 5m output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdnNetwork {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub m: usize,
    pub sigma_floor: f64,
    layers: Vec<Layer>,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub sigma_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            learning_rate: 0.001,
            batch_size: 32,
            seed: 0,
            sigma_floor: 1e-3,
        }
    }
}

/// Builds a seeded network with Glorot-uniform weights and zero biases
/// (sigma head starts at sigma = 1, mixing starts uniform).
pub fn mdn_init(input_dim: usize, hidden_dims: &[usize], m: usize, seed: u64) -> MdnNetwork {
    assert!(input_dim >= 1 && m >= 1);
    assert!(hidden_dims.iter().all(|&d| d >= 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden_dims);
    dims.push(5 * m);

    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights: (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect(),
                biases: vec![0.0; fan_out],
            }
        })
        .collect();

    MdnNetwork {
        input_dim,
        hidden_dims: hidden_dims.to_vec(),
        m,
        sigma_floor: 1e-3,
        layers,
    }
}

impl MdnNetwork {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Rebuilds a network from serialized parts, checking head consistency.
    pub fn from_parts(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        m: usize,
        sigma_floor: f64,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&hidden_dims);
        dims.push(5 * m);
        if layers.len() + 1 != dims.len()
            || layers
                .iter()
                .zip(dims.windows(2))
                .any(|(l, d)| l.in_dim != d[0] || l.out_dim != d[1])
        {
            return Err(Error::DimensionMismatch {
                expected: 5 * m,
                got: layers.last().map(|l| l.out_dim).unwrap_or(0),
            });
        }
        Ok(Self {
            input_dim,
            hidden_dims,
            m,
            sigma_floor,
            layers,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn params_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.biases.iter().all(|b| b.is_finite())
        })
    }

    /// Forward pass keeping every post-activation for backprop.
    /// `trace[0]` is the input; the last entry is the raw linear head.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.to_vec());
        let mut buf = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(trace.last().unwrap(), &mut buf);
            if i + 1 < self.layers.len() {
                for v in buf.iter_mut() {
                    *v = v.tanh();
                }
            }
            trace.push(buf.clone());
        }
        trace
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Interprets a raw 5m head as mixture parameters.
fn head_to_gmm(raw: &[f64], m: usize, sigma_floor: f64) -> GmmParams {
    let logits = &raw[..m];
    let lse = log_sum_exp(logits);
    let weights: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    let means: Vec<[f64; TARGET_DIM]> = (0..m)
        .map(|i| {
            [
                raw[m + TARGET_DIM * i],
                raw[m + TARGET_DIM * i + 1],
                raw[m + TARGET_DIM * i + 2],
            ]
        })
        .collect();
    let sigmas: Vec<f64> = (0..m)
        .map(|i| raw[m + TARGET_DIM * m + i].exp().max(sigma_floor))
        .collect();
    GmmParams {
        weights,
        means,
        sigmas,
    }
}

/// Maps an input through the network to mixture parameters.
pub fn mdn_forward(net: &MdnNetwork, x: &[f64]) -> Result<GmmParams> {
    if x.len() != net.input_dim {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim,
            got: x.len(),
        });
    }
    let trace = net.forward_trace(x);
    Ok(head_to_gmm(trace.last().unwrap(), net.m, net.sigma_floor))
}

/// Negative log-likelihood of `y` under the mixture, via log-sum-exp.
pub fn nll(gmm: &GmmParams, y: &LocalizationParams) -> f64 {
    let target = y.as_array();
    let terms: Vec<f64> = gmm
        .weights
        .iter()
        .zip(&gmm.means)
        .zip(&gmm.sigmas)
        .map(|((&w, mu), &sigma)| {
            if w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let r: f64 = mu
                .iter()
                .zip(&target)
                .map(|(m, t)| (m - t) * (m - t))
                .sum();
            w.ln()
                - (TARGET_DIM as f64 / 2.0) * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
                - r / (2.0 * sigma * sigma)
        })
        .collect();
    -log_sum_exp(&terms)
}

/// Per-head pieces reused by loss and gradient computations.
struct HeadEval {
    loss: f64,
    /// d loss / d raw head (length 5m).
    head_grad: Vec<f64>,
}

/// Loss and head gradient for one example, sharing one numerical path.
fn head_loss_and_grad(raw: &[f64], m: usize, sigma_floor: f64, target: &[f64; 3]) -> HeadEval {
    let logits = &raw[..m];
    let lse_logits = log_sum_exp(logits);
    let log_alpha: Vec<f64> = logits.iter().map(|l| l - lse_logits).collect();

    let mut log_terms = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let mut sigmas = Vec::with_capacity(m);
    let mut clamped = Vec::with_capacity(m);
    for i in 0..m {
        let raw_sigma = raw[m + TARGET_DIM * m + i].exp();
        let sigma = raw_sigma.max(sigma_floor);
        clamped.push(raw_sigma < sigma_floor);
        sigmas.push(sigma);
        let mu = &raw[m + TARGET_DIM * i..m + TARGET_DIM * i + TARGET_DIM];
        let r: f64 = mu.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        residuals.push(r);
        log_terms.push(
            log_alpha[i]
                - (TARGET_DIM as f64 / 2.0)
                    * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
                - r / (2.0 * sigma * sigma),
        );
    }
    let lse_terms = log_sum_exp(&log_terms);
    let loss = -lse_terms;
    // Posterior responsibility of each component for the target.
    let posterior: Vec<f64> = log_terms.iter().map(|t| (t - lse_terms).exp()).collect();

    let mut head_grad = vec![0.0; 5 * m];
    for i in 0..m {
        let alpha = log_alpha[i].exp();
        head_grad[i] = alpha - posterior[i];
        let mu = &raw[m + TARGET_DIM * i..m + TARGET_DIM * i + TARGET_DIM];
        for d in 0..TARGET_DIM {
            head_grad[m + TARGET_DIM * i + d] =
                posterior[i] * (mu[d] - target[d]) / (sigmas[i] * sigmas[i]);
        }
        head_grad[m + TARGET_DIM * m + i] = if clamped[i] {
            0.0
        } else {
            posterior[i] * (TARGET_DIM as f64 - residuals[i] / (sigmas[i] * sigmas[i]))
        };
    }
    HeadEval { loss, head_grad }
}

/// Accumulates d loss / d parameters for one example into `grads`.
/// Returns the example's loss.
fn backward_example(
    net: &MdnNetwork,
    x: &[f64],
    y: &LocalizationParams,
    grads: &mut [Layer],
) -> f64 {
    let trace = net.forward_trace(x);
    let eval = head_loss_and_grad(trace.last().unwrap(), net.m, net.sigma_floor, &y.as_array());

    let mut delta = eval.head_grad;
    for idx in (0..net.layers.len()).rev() {
        let layer = &net.layers[idx];
        let input = &trace[idx];
        let grad = &mut grads[idx];
        for o in 0..layer.out_dim {
            grad.biases[o] += delta[o];
            let row = &mut grad.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (g, xin) in row.iter_mut().zip(input) {
                *g += delta[o] * xin;
            }
        }
        if idx > 0 {
            let mut prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * delta[o];
                }
            }
            // Input to this layer is the tanh output of the previous one.
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
    eval.loss
}

/// Minibatch SGD on the mean mixture NLL.
///
/// Example order reshuffles each epoch from `cfg.seed`; the returned history
/// holds the mean batch loss per iteration. Aborts with `NonFiniteLoss` the
/// moment a batch loss stops being finite.
pub fn train(
    net: &mut MdnNetwork,
    examples: &[(Vec<f64>, LocalizationParams)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("MDN training set"));
    }
    for (x, _) in examples {
        if x.len() != net.input_dim {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim,
                got: x.len(),
            });
        }
    }
    net.sigma_floor = cfg.sigma_floor;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut history = Vec::with_capacity(cfg.iterations);
    let mut grads: Vec<Layer> = net.layers.iter().map(Layer::zeros_like).collect();

    for iteration in 0..cfg.iterations {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let batch = &order[cursor..end];
        cursor = end;

        for g in grads.iter_mut() {
            g.weights.iter_mut().for_each(|v| *v = 0.0);
            g.biases.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut loss_sum = 0.0;
        for &i in batch {
            let (x, y) = &examples[i];
            loss_sum += backward_example(net, x, y, &mut grads);
        }
        let scale = 1.0 / batch.len() as f64;
        let mean_loss = loss_sum * scale;
        if !mean_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration,
                batch: batch.to_vec(),
            });
        }
        for (layer, grad) in net.layers.iter_mut().zip(&grads) {
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                *w -= cfg.learning_rate * g * scale;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grad.biases) {
                *b -= cfg.learning_rate * g * scale;
            }
        }
        history.push(mean_loss);
    }

    if !net.params_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: cfg.iterations,
            batch: Vec::new(),
        });
    }
    Ok(history)
}

/// Central finite differences over every parameter of the single-example
/// loss; returns the maximum relative error against the analytic gradient.
pub fn gradient_check(
    net: &MdnNetwork,
    example: &(Vec<f64>, LocalizationParams),
    epsilon: f64,
) -> f64 {
    let (x, y) = example;
    let mut grads: Vec<Layer> = net.layers.iter().map(Layer::zeros_like).collect();
    backward_example(net, x, y, &mut grads);

    let loss_of = |n: &MdnNetwork| -> f64 {
        let trace = n.forward_trace(x);
        head_loss_and_grad(trace.last().unwrap(), n.m, n.sigma_floor, &y.as_array()).loss
    };

    let mut max_rel = 0.0f64;
    let mut probe = net.clone();
    for li in 0..net.layers.len() {
        for wi in 0..net.layers[li].weights.len() + net.layers[li].biases.len() {
            let (analytic, original) = {
                let (g, l) = (&grads[li], &net.layers[li]);
                if wi < l.weights.len() {
                    (g.weights[wi], l.weights[wi])
                } else {
                    (g.biases[wi - l.weights.len()], l.biases[wi - l.weights.len()])
                }
            };
            let set = |n: &mut MdnNetwork, v: f64| {
                let l = &mut n.layers[li];
                if wi < l.weights.len() {
                    l.weights[wi] = v;
                } else {
                    let k = wi - l.weights.len();
                    l.biases[k] = v;
                }
            };
            set(&mut probe, original + epsilon);
            let plus = loss_of(&probe);
            set(&mut probe, original - epsilon);
            let minus = loss_of(&probe);
            set(&mut probe, original);
            let numeric = (plus - minus) / (2.0 * epsilon);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    max_rel
}

/// Point prediction: the mean of the highest-prior component (ties to the
/// lowest index), projected to a square pixel box on the person. A
/// non-positive predicted area is clamped to 1e-4 before projection.
pub fn mdn_predict(
    net: &MdnNetwork,
    x: &[f64],
    person: &PersonInstance,
) -> Result<(LocalizationParams, BoundingBox)> {
    let gmm = mdn_forward(net, x)?;
    let mut best = 0;
    for i in 1..gmm.num_components() {
        if gmm.weights[i] > gmm.weights[best] {
            best = i;
        }
    }
    let mu = gmm.means[best];
    let params = LocalizationParams::new(mu[0], mu[1], if mu[2] <= 0.0 { 1e-4 } else { mu[2] });
    let bbox = denormalize_to_box(&params, &person.person_box);
    Ok((params, bbox))
}

/// Draws seeded samples from a mixture: component by prior, then an
/// isotropic Gaussian draw.
pub fn mdn_sample(gmm: &GmmParams, n: usize, seed: u64) -> Vec<LocalizationParams> {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut comp = gmm.num_components() - 1;
            for (i, &w) in gmm.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = i;
                    break;
                }
            }
            let mu = gmm.means[comp];
            let sigma = gmm.sigmas[comp];
            let z: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            LocalizationParams::new(
                mu[0] + sigma * z[0],
                mu[1] + sigma * z[1],
                mu[2] + sigma * z[2],
            )
        })
        .collect()
}
