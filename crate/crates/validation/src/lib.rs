//! Independent oracles for the acceptance gate. They share no estimator or
//! solver code with the implementations they check; only the seeded RNG.

use std::f64::consts::PI;

use circfuse_core::rng::{derive_seed, seeded_rng};
use rand::Rng;

/// Exhaustive minimum of `Σ(c − gate)` over all partial one-to-one matchings
/// whose pairs satisfy `c ≤ gate`. Returns the matched cost sum of the
/// optimum, accumulated in row order.
pub fn brute_force_gnn(costs: &[Vec<f64>], gate: f64) -> f64 {
    fn go(i: usize, costs: &[Vec<f64>], gate: f64, used: &mut [bool], pairs: &mut Vec<(usize, usize)>, best: &mut (f64, f64)) {
        if i == costs.len() {
            let obj: f64 = pairs.iter().map(|&(r, c)| costs[r][c] - gate).sum();
            if obj < best.0 {
                *best = (obj, pairs.iter().map(|&(r, c)| costs[r][c]).sum());
            }
            return;
        }
        go(i + 1, costs, gate, used, pairs, best);
        for j in 0..used.len() {
            if !used[j] && costs[i][j] <= gate {
                used[j] = true;
                pairs.push((i, j));
                go(i + 1, costs, gate, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let Some(first) = costs.first() else { return 0.0 };
    let mut best = (f64::INFINITY, 0.0);
    go(0, costs, gate, &mut vec![false; first.len()], &mut Vec::new(), &mut best);
    best.1
}

/// Plain (linear) sample variance of `n` uniform headings on (−π, π) and its
/// standard error, `sd(x²)/√n` with `sd(x²) = π²·√(4/45)`.
pub fn uniform_plateau(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = seeded_rng(derive_seed(seed, 0));
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = PI * PI * (4.0f64 / 45.0).sqrt() / (n as f64).sqrt();
    (var, se)
}
