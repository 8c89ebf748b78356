//! Reference predictors scored with the same fitness as GP trees.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::embedding::cosine;
use crate::evolution::Problem;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Random,
    FirstWord,
    LastWord,
    Gp,
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictorKind::Random => "random",
            PredictorKind::FirstWord => "first_word",
            PredictorKind::LastWord => "last_word",
            PredictorKind::Gp => "gp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorScore {
    pub kind: PredictorKind,
    pub fitness: f64,
}

/// Draws a point uniformly on the unit sphere in `dim` dimensions.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Fitness of each of `pool_size` sets of random unit vectors used in place of
/// tree outputs, one vector per case. Sets are drawn in order from `rng`.
pub fn random_pool_scores<T: Scalar, R: Rng + ?Sized>(problem: &Problem<'_, T>, pool_size: usize, rng: &mut R) -> Vec<f64> {
    let table = problem.table();
    let dim = table.dim();
    let n = problem.cases().len() as f64;
    (0..pool_size)
        .map(|_| {
            let total: f64 = problem
                .cases()
                .iter()
                .map(|c| {
                    let v: Vec<T> = random_unit_vector(dim, rng).into_iter().map(T::of).collect();
                    cosine(&v, table.vector(c.target)).as_f64()
                })
                .sum();
            total / n
        })
        .collect()
}

/// Best of `pool_size` random predictors.
pub fn best_random_predictor<T: Scalar, R: Rng + ?Sized>(problem: &Problem<'_, T>, pool_size: usize, rng: &mut R) -> PredictorScore {
    assert!(pool_size > 0, "pool must hold at least one predictor");
    let fitness = random_pool_scores(problem, pool_size, rng).into_iter().fold(f64::NEG_INFINITY, f64::max);
    PredictorScore { kind: PredictorKind::Random, fitness }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Position {
    First,
    Last,
}

/// Always predicts the first (or last) input word.
pub fn positional_predictor<T: Scalar>(which: Position, problem: &Problem<'_, T>) -> PredictorScore {
    let table = problem.table();
    let total: f64 = problem
        .cases()
        .iter()
        .map(|c| {
            let slot = match which {
                Position::First => c.inputs[0],
                Position::Last => *c.inputs.last().unwrap(),
            };
            cosine(table.vector(slot), table.vector(c.target)).as_f64()
        })
        .sum();
    let kind = match which {
        Position::First => PredictorKind::FirstWord,
        Position::Last => PredictorKind::LastWord,
    };
    PredictorScore { kind, fitness: total / problem.cases().len() as f64 }
}
