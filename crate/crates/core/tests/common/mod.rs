#![allow(dead_code)]

use rand::Rng;
use unisoft_lab::mdp::{DeterministicPolicy, NoiseModel, TabularMdp};
use unisoft_lab::repr::FeatureMap;

fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // Sparse-ish rows keep some states unreachable.
    let raw: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut v = vec![0.0; n];
        v[rng.random_range(0..n)] = 1.0;
        return v;
    }
    raw.iter().map(|x| x / total).collect()
}

pub fn random_mdp<R: Rng>(rng: &mut R, s_n: usize, a_n: usize, h_n: usize) -> TabularMdp {
    let reward = (0..h_n)
        .map(|_| (0..s_n).map(|_| (0..a_n).map(|_| (rng.random_range(0..9) as f64) / 8.0).collect()).collect())
        .collect();
    let transition = (0..h_n.saturating_sub(1))
        .map(|_| (0..s_n).map(|_| (0..a_n).map(|_| simplex(rng, s_n)).collect()).collect())
        .collect();
    let init = simplex(rng, s_n);
    TabularMdp::new(reward, transition, init, NoiseModel::Bernoulli).expect("generated MDP is valid")
}

pub fn random_policy<R: Rng>(rng: &mut R, mdp: &TabularMdp) -> DeterministicPolicy {
    DeterministicPolicy {
        action: (0..mdp.horizon)
            .map(|_| (0..mdp.num_states).map(|_| rng.random_range(0..mdp.num_actions)).collect())
            .collect(),
    }
}

/// Features in the unit ball, dimension `d` at every stage.
pub fn random_features<R: Rng>(rng: &mut R, mdp: &TabularMdp, d: usize) -> FeatureMap {
    let phi = (0..mdp.horizon)
        .map(|_| {
            (0..mdp.num_states)
                .map(|_| {
                    (0..mdp.num_actions)
                        .map(|_| {
                            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
                            v.iter().map(|x| x / n).collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    FeatureMap::new(phi).expect("generated features are valid")
}

/// One-hot features over `(s, a)`: always realizable.
pub fn tabular_features(mdp: &TabularMdp) -> FeatureMap {
    let d = mdp.num_states * mdp.num_actions;
    let phi = (0..mdp.horizon)
        .map(|_| {
            (0..mdp.num_states)
                .map(|s| {
                    (0..mdp.num_actions)
                        .map(|a| {
                            let mut v = vec![0.0; d];
                            v[s * mdp.num_actions + a] = 1.0;
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    FeatureMap::new(phi).expect("one-hot features are valid")
}
