//! The two-stage, two-state, two-action example MDP and its representation
//! suite `φ⁽¹⁾..φ⁽⁴⁾`.

use crate::error::{Error, Result};
use crate::mdp::{NoiseModel, TabularMdp};

use super::{make_non_unisoft, FeatureMap, LowRankModel};

pub const APPENDIX_F: &str = "appendix-f";

#[derive(Debug, Clone)]
pub struct BuiltinExample {
    pub mdp: TabularMdp,
    /// `φ⁽¹⁾, φ⁽²⁾, φ⁽³⁾, φ⁽⁴⁾`.
    pub reps: Vec<FeatureMap>,
    /// Certified model for each entry of `reps`.
    pub models: Vec<LowRankModel>,
}

impl BuiltinExample {
    /// The model shared by `φ⁽¹⁾` and `φ⁽²⁾`.
    pub fn model(&self) -> &LowRankModel {
        &self.models[0]
    }
}

pub fn builtin_example(name: &str) -> Result<BuiltinExample> {
    match name {
        APPENDIX_F => appendix_f(),
        other => Err(Error::UnknownExample(other.to_string())),
    }
}

pub fn appendix_f_mdp() -> TabularMdp {
    let reward = vec![
        vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        vec![vec![1.0, 7.0 / 8.0], vec![1.0 / 2.0, 5.0 / 8.0]],
    ];
    let p = |x: f64| vec![x, 1.0 - x];
    let transition = vec![vec![vec![p(1.0), p(1.0 / 2.0)], vec![p(1.0 / 2.0), p(3.0 / 4.0)]]];
    TabularMdp::new(reward, transition, vec![0.5, 0.5], NoiseModel::Bernoulli).expect("builtin MDP is valid")
}

fn stage1_simplex() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        vec![vec![0.5, 0.5], vec![0.75, 0.25]],
    ]
}

pub fn phi1() -> FeatureMap {
    let stage2 = vec![
        vec![vec![0.0, 1.0], vec![0.25, 0.75]],
        vec![vec![1.0, 0.0], vec![0.75, 0.25]],
    ];
    FeatureMap::new(vec![stage1_simplex(), stage2]).expect("builtin features are valid")
}

pub fn phi2() -> FeatureMap {
    let stage2 = vec![
        vec![vec![30.0 / 89.0, 74.0 / 89.0], vec![0.25, 0.75]],
        vec![vec![1.0, 0.0], vec![75.0 / 356.0, 185.0 / 356.0]],
    ];
    FeatureMap::new(vec![stage1_simplex(), stage2]).expect("builtin features are valid")
}

pub fn appendix_f_model() -> LowRankModel {
    LowRankModel {
        theta: vec![vec![1.0, 1.0], vec![0.5, 1.0]],
        mu_vecs: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
    }
}

fn appendix_f() -> Result<BuiltinExample> {
    let mdp = appendix_f_mdp();
    let model = appendix_f_model();
    let (p1, p2) = (phi1(), phi2());
    let (p3, m3) = make_non_unisoft(&p2, &model, &mdp, 0)?;
    let (p4, m4) = make_non_unisoft(&p1, &model, &mdp, 0)?;
    Ok(BuiltinExample {
        mdp,
        reps: vec![p1, p2, p3, p4],
        models: vec![model.clone(), model, m3, m4],
    })
}
