//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use commlab::gridworld::{GridWorld, MoveAction};
use commlab::neural::{adam_step, AdamState, Mlp, MlpParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;

fn scalar_loss(net: &Mlp, input: &[f64], weights: &[f64]) -> f64 {
    let out = net.predict(input).unwrap();
    out.iter().zip(weights).map(|(o, w)| o * w).sum()
}

/// Central differences on every parameter of `L = <output_grad, f(x)>`.
fn numeric_gradient(params: &MlpParams, input: &[f64], output_grad: &[f64]) -> Vec<f64> {
    let n = params.len();
    let mut grads = Vec::with_capacity(n);
    for k in 0..n {
        let eval = |delta: f64| {
            let mut p = params.clone();
            let mut idx = k;
            for s in p.slices_mut() {
                if idx < s.len() {
                    s[idx] += delta;
                    break;
                }
                idx -= s.len();
            }
            scalar_loss(&Mlp::from_params(p).unwrap(), input, output_grad)
        };
        grads.push((eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP));
    }
    grads
}

/// Draws a random case whose hidden pre-activations stay clear of the ReLU
/// kink, where finite differences are not meaningful.
fn random_case(rng: &mut ChaCha8Rng) -> (Mlp, Vec<f64>, Vec<f64>) {
    loop {
        let in_dim = rng.gen_range(1..=8);
        let hidden = rng.gen_range(1..=12);
        let out_dim = rng.gen_range(1..=5);
        let mut net = Mlp::init(in_dim, hidden, out_dim, rng).unwrap();
        let mut params = net.params().clone();
        for b in params.b1.iter_mut().chain(params.b2.iter_mut()) {
            *b = rng.gen_range(-0.5..0.5);
        }
        net = Mlp::from_params(params).unwrap();
        let input: Vec<f64> = (0..in_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let output_grad: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, cache) = net.forward(&input).unwrap();
        if cache.pre_activation().iter().all(|z| z.abs() > 1e-3) {
            return (net, input, output_grad);
        }
    }
}

pub fn gradient_check_max_relative_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (net, input, output_grad) = random_case(&mut rng);
        let (_, cache) = net.forward(&input).unwrap();
        let analytic: Vec<f64> = net.backward(&cache, &output_grad).unwrap().iter().collect();
        let numeric = numeric_gradient(net.params(), &input, &output_grad);
        for (a, n) in analytic.iter().zip(&numeric) {
            let scale = a.abs().max(n.abs()).max(1e-6);
            worst = worst.max((a - n).abs() / scale);
        }
    }
    worst
}

/// Reference Adam on a scalar, written out independently.
pub fn scalar_adam_oracle(
    start: f64,
    lr: f64,
    steps: usize,
    grad: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut w, mut m, mut v) = (start, 0.0, 0.0);
    let mut path = Vec::with_capacity(steps);
    for t in 1..=steps {
        let g = grad(w);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t as i32));
        let v_hat = v / (1.0 - b2.powi(t as i32));
        w -= lr * m_hat / (v_hat.sqrt() + eps);
        path.push(w);
    }
    path
}

/// Runs the crate's Adam on `f(w) = (w - 3)^2` with `w` held in the output
/// bias of a 1-1-1 network.
pub fn quadratic_adam_trajectory(steps: usize) -> Vec<f64> {
    let mut net = Mlp::from_params(MlpParams::zeros(1, 1, 1)).unwrap();
    let mut adam = AdamState::new(&net);
    let mut path = Vec::with_capacity(steps);
    for _ in 0..steps {
        let w = net.params().b2[0];
        let mut g = MlpParams::zeros(1, 1, 1);
        g.b2[0] = 2.0 * (w - 3.0);
        adam_step(&mut net, &g, &mut adam, 1e-3).unwrap();
        path.push(net.params().b2[0]);
    }
    path
}

/// Mean episode length with both agents moving uniformly at random.
pub fn random_policy_baseline(episodes: usize, seed: u64) -> f64 {
    let env = GridWorld::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0usize;
    for _ in 0..episodes {
        let mut state = env.reset(&mut rng);
        loop {
            let m1 = MoveAction::ALL[rng.gen_range(0..5)];
            let m2 = MoveAction::ALL[rng.gen_range(0..5)];
            let out = env.step(&state, m1, m2).unwrap();
            state = out.state;
            if out.done {
                total += state.step_count;
                break;
            }
        }
    }
    total as f64 / episodes as f64
}
