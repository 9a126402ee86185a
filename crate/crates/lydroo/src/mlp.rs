//! The actor's policy network: a fully-connected 3N -> 120 -> 80 -> N
//! perceptron with ReLU hidden layers and a sigmoid output, trained by
//! cross-entropy on selected actions. Backpropagation and the Adam
//! optimizer are implemented directly; the network is small enough that
//! plain loops beat any heavier machinery.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const HIDDEN1: usize = 120;
pub const HIDDEN2: usize = 80;

/// Floor inside the cross-entropy logs; sigmoid outputs cannot reach 0 or 1
/// exactly, but saturated activations can round there in floating point.
const LOG_FLOOR: f64 = 1e-12;

/// Weight initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// Standard normal scaled by 1/sqrt(fan-in), biases zero. Raw unit
    /// normals saturate the early layers at realistic input widths.
    #[default]
    ScaledNormal,
    /// Every parameter drawn from the standard normal, as stated for
    /// fidelity runs.
    UnitNormal,
}

#[derive(Debug, Clone)]
pub struct PolicyNetwork<R> {
    /// Layer widths: input, two hidden, output.
    sizes: [usize; 4],
    /// Row-major weight matrices (out x in), one per layer.
    weights: [Vec<R>; 3],
    biases: [Vec<R>; 3],
}

/// Cached activations of one forward pass.
pub struct ForwardCache<R> {
    /// Pre-activations per layer.
    z: [Vec<R>; 3],
    /// Post-activations: ReLU, ReLU, sigmoid.
    a: [Vec<R>; 3],
}

impl<R: Real> ForwardCache<R> {
    pub fn output(&self) -> &[R] {
        &self.a[2]
    }

    /// Which hidden units were active (pre-activation > 0), both layers
    /// concatenated. Finite-difference gradient checks use this to detect
    /// steps that cross a ReLU boundary.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.z[0]
            .iter()
            .chain(self.z[1].iter())
            .map(|&z| z > R::zero())
            .collect()
    }
}

fn sigmoid<R: Real>(z: R) -> R {
    R::one() / (R::one() + (-z).exp())
}

impl<R: Real> PolicyNetwork<R> {
    /// Network for `n_wd` devices: input 3N (channel, data queue, energy
    /// queue per WD), output N relaxed offloading probabilities.
    pub fn new<G: Rng + ?Sized>(n_wd: usize, init: InitScheme, rng: &mut G) -> Self {
        let sizes = [3 * n_wd, HIDDEN1, HIDDEN2, n_wd];
        let mut weights: [Vec<R>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut biases: [Vec<R>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for l in 0..3 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = match init {
                InitScheme::ScaledNormal => R::one() / R::of(fan_in as f64).sqrt(),
                InitScheme::UnitNormal => R::one(),
            };
            weights[l] = (0..fan_in * fan_out)
                .map(|_| R::std_normal(rng) * scale)
                .collect();
            biases[l] = match init {
                InitScheme::ScaledNormal => vec![R::zero(); fan_out],
                InitScheme::UnitNormal => (0..fan_out).map(|_| R::std_normal(rng)).collect(),
            };
        }
        PolicyNetwork {
            sizes,
            weights,
            biases,
        }
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        self.sizes[3]
    }

    pub fn param_count(&self) -> usize {
        (0..3).map(|l| self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1]).sum()
    }

    fn affine(&self, layer: usize, input: &[R]) -> Vec<R> {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let w = &self.weights[layer];
        let mut out = self.biases[layer].clone();
        for (o, out_o) in out.iter_mut().enumerate().take(n_out) {
            let row = &w[o * n_in..(o + 1) * n_in];
            // four independent accumulator lanes so the dot product
            // pipelines; forward latency sits on the per-frame path
            let mut acc = [R::zero(); 4];
            let chunks = n_in / 4;
            for c in 0..chunks {
                let k = 4 * c;
                acc[0] = acc[0] + row[k] * input[k];
                acc[1] = acc[1] + row[k + 1] * input[k + 1];
                acc[2] = acc[2] + row[k + 2] * input[k + 2];
                acc[3] = acc[3] + row[k + 3] * input[k + 3];
            }
            let mut tail = R::zero();
            for k in 4 * chunks..n_in {
                tail += row[k] * input[k];
            }
            *out_o += ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
        }
        out
    }

    /// Relaxed offloading decision in (0,1)^N.
    pub fn forward(&self, features: &[R]) -> Vec<R> {
        self.forward_cached(features).a[2].clone()
    }

    pub fn forward_cached(&self, features: &[R]) -> ForwardCache<R> {
        assert_eq!(features.len(), self.sizes[0], "feature length mismatch");
        let z1 = self.affine(0, features);
        let a1: Vec<R> = z1.iter().map(|&z| z.max(R::zero())).collect();
        let z2 = self.affine(1, &a1);
        let a2: Vec<R> = z2.iter().map(|&z| z.max(R::zero())).collect();
        let z3 = self.affine(2, &a2);
        let a3: Vec<R> = z3.iter().map(|&z| sigmoid(z)).collect();
        ForwardCache {
            z: [z1, z2, z3],
            a: [a1, a2, a3],
        }
    }

    /// Average cross-entropy of the batch:
    /// `-(1/|S|) sum_s sum_i [y ln p + (1-y) ln(1-p)]`.
    pub fn loss(&self, batch: &[(&[R], &[R])]) -> R {
        let floor = R::of(LOG_FLOOR);
        let one = R::one();
        let mut total = R::zero();
        for (features, labels) in batch {
            let out = self.forward(features);
            for (p, &y) in out.iter().zip(*labels) {
                let p = p.max(floor).min(one - floor);
                total -= y * p.ln() + (one - y) * (one - p).ln();
            }
        }
        total / R::of(batch.len() as f64)
    }

    /// Loss and its gradient with respect to every parameter, flat in the
    /// canonical order (see [`PolicyNetwork::params`]).
    pub fn loss_and_gradient(&self, batch: &[(&[R], &[R])]) -> (R, Vec<R>) {
        let inv_batch = R::one() / R::of(batch.len() as f64);
        let mut gw: [Vec<R>; 3] = [
            vec![R::zero(); self.weights[0].len()],
            vec![R::zero(); self.weights[1].len()],
            vec![R::zero(); self.weights[2].len()],
        ];
        let mut gb: [Vec<R>; 3] = [
            vec![R::zero(); self.biases[0].len()],
            vec![R::zero(); self.biases[1].len()],
            vec![R::zero(); self.biases[2].len()],
        ];
        let floor = R::of(LOG_FLOOR);
        let one = R::one();
        let mut loss = R::zero();

        for (features, labels) in batch {
            let cache = self.forward_cached(features);
            for (p, &y) in cache.a[2].iter().zip(*labels) {
                let p = p.max(floor).min(one - floor);
                loss -= y * p.ln() + (one - y) * (one - p).ln();
            }
            // d loss / d z3 for the sigmoid + cross-entropy pair
            let mut delta: Vec<R> = cache.a[2]
                .iter()
                .zip(*labels)
                .map(|(&p, &y)| (p - y) * inv_batch)
                .collect();
            for layer in (0..3).rev() {
                let input: &[R] = if layer == 0 { features } else { &cache.a[layer - 1] };
                let n_in = self.sizes[layer];
                for (o, &d) in delta.iter().enumerate() {
                    gb[layer][o] += d;
                    let row = &mut gw[layer][o * n_in..(o + 1) * n_in];
                    for (g, &xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
                if layer == 0 {
                    break;
                }
                // propagate through W^T and the ReLU mask
                let n_prev = self.sizes[layer];
                let mut prev = vec![R::zero(); n_prev];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &self.weights[layer][o * n_prev..(o + 1) * n_prev];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&cache.z[layer - 1]) {
                    if z <= R::zero() {
                        *p = R::zero();
                    }
                }
                delta = prev;
            }
        }

        let mut flat = Vec::with_capacity(self.param_count());
        for l in 0..3 {
            flat.extend_from_slice(&gw[l]);
            flat.extend_from_slice(&gb[l]);
        }
        (loss * inv_batch, flat)
    }

    /// All parameters, flat: layer 1 weights row-major, layer 1 biases,
    /// layer 2 weights, ... Matches the checkpoint format.
    pub fn params(&self) -> Vec<R> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in 0..3 {
            flat.extend_from_slice(&self.weights[l]);
            flat.extend_from_slice(&self.biases[l]);
        }
        flat
    }

    pub fn set_params(&mut self, flat: &[R]) {
        assert_eq!(flat.len(), self.param_count(), "parameter count mismatch");
        let mut k = 0;
        for l in 0..3 {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    /// Text checkpoint: a header line, then one parameter per line in the
    /// canonical flat order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "policy-net v1 {} {} {} {}",
            self.sizes[0], self.sizes[1], self.sizes[2], self.sizes[3]
        )?;
        for p in self.params() {
            writeln!(out, "{:e}", p)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty checkpoint".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "policy-net" || fields[1] != "v1" {
            return Err(Error::InvalidInput(format!("bad checkpoint header: {header}")));
        }
        let sizes: Vec<usize> = fields[2..]
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("bad checkpoint sizes: {e}")))?;
        if sizes[1] != HIDDEN1 || sizes[2] != HIDDEN2 || sizes[0] != 3 * sizes[3] {
            return Err(Error::InvalidInput("checkpoint layer sizes mismatch".into()));
        }
        let mut net = PolicyNetwork {
            sizes: [sizes[0], sizes[1], sizes[2], sizes[3]],
            weights: [
                vec![R::zero(); sizes[0] * sizes[1]],
                vec![R::zero(); sizes[1] * sizes[2]],
                vec![R::zero(); sizes[2] * sizes[3]],
            ],
            biases: [
                vec![R::zero(); sizes[1]],
                vec![R::zero(); sizes[2]],
                vec![R::zero(); sizes[3]],
            ],
        };
        let mut flat = Vec::with_capacity(net.param_count());
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad checkpoint value: {e}")))?;
            flat.push(R::of(v));
        }
        if flat.len() != net.param_count() {
            return Err(Error::InvalidInput(format!(
                "checkpoint holds {} parameters, expected {}",
                flat.len(),
                net.param_count()
            )));
        }
        net.set_params(&flat);
        Ok(net)
    }
}

/// Adam optimizer state over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam<R> {
    pub learning_rate: R,
    pub beta1: R,
    pub beta2: R,
    pub epsilon: R,
    m: Vec<R>,
    v: Vec<R>,
    t: u32,
}

impl<R: Real> Adam<R> {
    pub fn new(param_count: usize, learning_rate: R, beta1: R, beta2: R, epsilon: R) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: vec![R::zero(); param_count],
            v: vec![R::zero(); param_count],
            t: 0,
        }
    }

    /// One update step in place on the network's flat parameters.
    pub fn step(&mut self, net: &mut PolicyNetwork<R>, gradient: &[R]) {
        let mut params = net.params();
        assert_eq!(params.len(), gradient.len());
        self.t += 1;
        let one = R::one();
        let bc1 = one - self.beta1.powi(self.t as i32);
        let bc2 = one - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = gradient[k];
            self.m[k] = self.beta1 * self.m[k] + (one - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (one - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        net.set_params(&params);
    }
}
