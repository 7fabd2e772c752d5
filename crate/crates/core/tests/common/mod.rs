//! Helpers shared by the integration tests: random networks and NAPs, and
//! reference implementations that do not go through the library.
#![allow(dead_code)]

use napkit::{ActivationState, Layer, Nap, Network, Signature, SyntheticOracle};
use rand::Rng;

/// Fixture weights, copied by hand from the committed model file.
const W1: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];
const B1: [f64; 2] = [0.0, -1.0];
const W2: [[f64; 2]; 2] = [[2.0, -1.0], [-1.0, 2.0]];
const B2: [f64; 2] = [-0.2, 0.3];
const B3: [f64; 2] = [0.1, 0.0];

pub struct FixturePoint {
    pub x: [f64; 2],
    /// Hidden post-activations in global order.
    pub hidden: [f64; 4],
    pub output: [f64; 2],
}

impl FixturePoint {
    pub fn new(x: [f64; 2]) -> Self {
        let affine = |w: &[[f64; 2]; 2], b: &[f64; 2], v: &[f64; 2]| {
            [
                w[0][0] * v[0] + w[0][1] * v[1] + b[0],
                w[1][0] * v[0] + w[1][1] * v[1] + b[1],
            ]
        };
        let relu = |v: [f64; 2]| [v[0].max(0.0), v[1].max(0.0)];
        let h1 = relu(affine(&W1, &B1, &x));
        let h2 = relu(affine(&W2, &B2, &h1));
        Self {
            x,
            hidden: [h1[0], h1[1], h2[0], h2[1]],
            output: [h2[0] + B3[0], h2[1] + B3[1]],
        }
    }

    pub fn margin(&self, class: usize) -> f64 {
        self.output[class] - self.output[1 - class]
    }

    /// Strict exhibition: `1` needs a positive post-activation.
    pub fn exhibits(&self, nap: &Nap) -> bool {
        nap.states().iter().zip(&self.hidden).all(|(s, h)| match s {
            ActivationState::Zero => *h == 0.0,
            ActivationState::One => *h > 0.0,
            ActivationState::Star => true,
        })
    }
}

/// The `n × n` grid over `[0, 1]^2`, endpoints included.
pub fn fixture_grid(n: usize) -> Vec<FixturePoint> {
    let step = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(FixturePoint::new([i as f64 * step, j as f64 * step]));
        }
    }
    out
}

pub fn random_network<R: Rng>(rng: &mut R, input_dim: usize, hidden: &[usize], outputs: usize) -> Network {
    let mut layers = Vec::new();
    let mut fan_in = input_dim;
    for &width in hidden.iter().chain(std::iter::once(&outputs)) {
        let weights = (0..width)
            .map(|_| (0..fan_in).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bias = (0..width).map(|_| rng.gen_range(-0.5..0.5)).collect();
        layers.push(Layer::new(weights, bias));
        fan_in = width;
    }
    Network::new(input_dim, layers).unwrap()
}

pub fn random_state<R: Rng>(rng: &mut R, p_star: f64) -> ActivationState {
    if rng.gen::<f64>() < p_star {
        ActivationState::Star
    } else if rng.gen() {
        ActivationState::One
    } else {
        ActivationState::Zero
    }
}

pub fn random_nap<R: Rng>(rng: &mut R, sig: &Signature, p_star: f64) -> Nap {
    let states = (0..sig.num_neurons()).map(|_| random_state(rng, p_star)).collect();
    Nap::new(sig.clone(), states).unwrap()
}

/// Each refined neuron is coarsened to `*` with probability `p`.
pub fn random_coarsening<R: Rng>(rng: &mut R, nap: &Nap, p: f64) -> Nap {
    let states = nap
        .states()
        .iter()
        .map(|s| {
            if rng.gen::<f64>() < p {
                ActivationState::Star
            } else {
                *s
            }
        })
        .collect();
    Nap::new(nap.signature().clone(), states).unwrap()
}

/// Fully refined NAP of the given binary states.
pub fn all_refined(sig: &Signature, pattern: &[bool]) -> Nap {
    let states = pattern
        .iter()
        .map(|&b| if b { ActivationState::One } else { ActivationState::Zero })
        .collect();
    Nap::new(sig.clone(), states).unwrap()
}

pub fn random_clauses<R: Rng>(rng: &mut R, n: usize, count: usize, max_len: usize) -> Vec<Vec<usize>> {
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=max_len.min(n));
            rand::seq::index::sample(rng, n, len).into_vec()
        })
        .collect()
}

pub fn random_oracle<R: Rng>(rng: &mut R, n: usize, count: usize, max_len: usize) -> SyntheticOracle {
    SyntheticOracle::new(Signature::flat(n), random_clauses(rng, n, count, max_len)).unwrap()
}

/// Pass iff some clause has all its neurons in `kept` (a bit mask).
pub fn dnf_passes(clauses: &[Vec<usize>], kept: u64) -> bool {
    clauses.iter().any(|c| c.iter().all(|&i| kept >> i & 1 == 1))
}

/// Smallest passing subset size, by enumerating every subset.
pub fn brute_force_min(clauses: &[Vec<usize>], n: usize) -> usize {
    (0u64..1 << n)
        .filter(|&m| dnf_passes(clauses, m))
        .map(|m| m.count_ones() as usize)
        .min()
        .unwrap()
}

pub fn mask_of(nap: &Nap) -> u64 {
    nap.refined().iter().fold(0, |m, &i| m | 1 << i)
}
