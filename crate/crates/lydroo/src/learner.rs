//! Policy update: replay memory of (features, selected action) pairs and
//! periodic cross-entropy training of the policy network.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::OffloadAction;
use crate::mlp::{Adam, PolicyNetwork};
use crate::scalar::Real;

/// Ring buffer holding the most recent labeled samples.
#[derive(Debug, Clone)]
pub struct ReplayMemory<R> {
    capacity: usize,
    entries: Vec<(Vec<R>, Vec<bool>)>,
    cursor: usize,
}

impl<R: Real> ReplayMemory<R> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            entries: Vec::with_capacity(capacity),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a sample, evicting the oldest once full.
    pub fn store(&mut self, features: Vec<R>, action: &OffloadAction) {
        let labels = action.bits.clone();
        if self.entries.len() < self.capacity {
            self.entries.push((features, labels));
        } else {
            self.entries[self.cursor] = (features, labels);
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> &(Vec<R>, Vec<bool>) {
        &self.entries[index]
    }

    /// `count` distinct uniform indices (partial Fisher-Yates).
    pub fn sample_indices<G: Rng + ?Sized>(&self, count: usize, rng: &mut G) -> Vec<usize> {
        let n = self.entries.len();
        let count = count.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for k in 0..count {
            let pick = rng.random_range(k..n);
            pool.swap(k, pick);
        }
        pool.truncate(count);
        pool
    }
}

/// Training schedule and optimizer hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainerConfig<R> {
    /// Train once every this many frames.
    pub train_interval: u64,
    pub batch_size: usize,
    /// Optimizer steps per training event, each on a fresh batch. The
    /// per-event sample throughput is `steps_per_event * batch_size`.
    pub steps_per_event: usize,
    pub learning_rate: R,
    pub beta1: R,
    pub beta2: R,
    pub epsilon: R,
    /// Optional global-norm gradient clip.
    pub clip_norm: Option<R>,
    /// L2 weight decay folded into the gradient. The replay is revisited
    /// many times between refreshes; without decay the output layer
    /// saturates and the quantizer loses candidate diversity.
    pub weight_decay: R,
    /// Training only starts once the memory holds more than this many
    /// samples (half the capacity by default).
    pub min_samples: usize,
}

impl<R: Real> TrainerConfig<R> {
    pub fn for_capacity(capacity: usize) -> Self {
        TrainerConfig {
            train_interval: 10,
            batch_size: 32,
            steps_per_event: 48,
            learning_rate: R::of(0.005),
            beta1: R::of(0.9),
            beta2: R::of(0.999),
            epsilon: R::of(1e-8),
            clip_norm: None,
            weight_decay: R::zero(),
            min_samples: capacity / 2,
        }
    }
}

/// Owns the optimizer state and the batch-sampling RNG.
#[derive(Debug, Clone)]
pub struct Trainer<R> {
    pub config: TrainerConfig<R>,
    adam: Adam<R>,
    rng: ChaCha8Rng,
}

impl<R: Real> Trainer<R> {
    pub fn new(config: TrainerConfig<R>, net: &PolicyNetwork<R>, rng: ChaCha8Rng) -> Self {
        let adam = Adam::new(
            net.param_count(),
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.epsilon,
        );
        Trainer { config, adam, rng }
    }

    /// One optimizer step on an explicit batch; returns the pre-step loss.
    pub fn train_on_batch(
        &mut self,
        net: &mut PolicyNetwork<R>,
        batch: &[(&[R], &[R])],
    ) -> R {
        let (loss, mut grad) = net.loss_and_gradient(batch);
        if self.config.weight_decay > R::zero() {
            let wd = self.config.weight_decay;
            for (g, p) in grad.iter_mut().zip(net.params()) {
                *g += wd * p;
            }
        }
        if let Some(cap) = self.config.clip_norm {
            let norm = grad.iter().map(|&g| g * g).sum::<R>().sqrt();
            if norm > cap {
                let scale = cap / norm;
                for g in &mut grad {
                    *g *= scale;
                }
            }
        }
        self.adam.step(net, &grad);
        loss
    }

    /// Runs the scheduled training steps when the schedule fires and the
    /// memory is warm enough; otherwise leaves the network untouched.
    /// Returns the first step's pre-update loss.
    pub fn maybe_train(
        &mut self,
        memory: &ReplayMemory<R>,
        net: &mut PolicyNetwork<R>,
        t: u64,
    ) -> Option<R> {
        if !t.is_multiple_of(self.config.train_interval) || memory.len() <= self.config.min_samples {
            return None;
        }
        let mut first_loss = None;
        for _ in 0..self.config.steps_per_event.max(1) {
            let indices = self.sample_batch_indices(memory);
            let samples: Vec<(&[R], Vec<R>)> = indices
                .iter()
                .map(|&k| {
                    let (features, labels) = memory.get(k);
                    let y: Vec<R> = labels
                        .iter()
                        .map(|&b| if b { R::one() } else { R::zero() })
                        .collect();
                    (features.as_slice(), y)
                })
                .collect();
            let batch: Vec<(&[R], &[R])> = samples
                .iter()
                .map(|(f, y)| (*f, y.as_slice()))
                .collect();
            let loss = self.train_on_batch(net, &batch);
            first_loss.get_or_insert(loss);
        }
        first_loss
    }

    fn sample_batch_indices(&mut self, memory: &ReplayMemory<R>) -> Vec<usize> {
        memory.sample_indices(self.config.batch_size, &mut self.rng)
    }
}
