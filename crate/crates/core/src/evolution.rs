//! Steady-state GP: tournament of `t` distinct members, the two fittest are
//! crossed, the child is mutated with probability `p` and replaces the
//! tournament's worst member.
//!
//! Fitness is the mean cosine similarity between a tree's output vector (before
//! decoding to a word) and the target word's vector.

use std::cmp::Ordering;

use rand::Rng;

use crate::dataset::FitnessCase;
use crate::embedding::{cosine, EmbeddingTable, Vocabulary};
use crate::gp::{random_tree, Evaluator, GpTree, InitMethod};
use crate::variation::{crossover, mutate, CrossoverKind, Limits};
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionParams {
    pub population_size: usize,
    pub tournament_size: usize,
    pub mutation_probability: f64,
    /// Total fitness evaluations, initial population included.
    pub max_evaluations: usize,
    pub max_depth: usize,
    /// Number of input words per case.
    pub k: usize,
    pub seed: u64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            population_size: 500,
            tournament_size: 3,
            mutation_probability: 0.3,
            max_evaluations: 100_000,
            max_depth: 5,
            k: 5,
            seed: 0,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.tournament_size < 2 {
            return bad(format!("tournament size {} < 2", self.tournament_size));
        }
        if self.population_size < self.tournament_size {
            return bad(format!(
                "population {} smaller than tournament {}",
                self.population_size, self.tournament_size
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return bad(format!("mutation probability {} not in [0, 1]", self.mutation_probability));
        }
        if self.max_evaluations < self.population_size {
            return bad(format!(
                "budget {} cannot cover the initial population of {}",
                self.max_evaluations, self.population_size
            ));
        }
        if self.k == 0 || self.k > 256 {
            return bad(format!("k = {} must be in 1..=256", self.k));
        }
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        Limits { max_depth: self.max_depth, terminals: self.k }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual<T> {
    pub tree: GpTree,
    pub fitness: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub best_initial_fitness: f64,
    pub best_final_fitness: f64,
    pub best_tree: GpTree,
    pub best_tree_expression: String,
    pub evaluations_used: usize,
    /// `(evaluations so far, best fitness so far)`, non-decreasing in both.
    pub fitness_trace: Vec<(usize, f64)>,
}

/// A case with its words resolved to table rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedCase {
    pub inputs: Vec<usize>,
    pub target: usize,
}

impl EncodedCase {
    pub fn encode(case: &FitnessCase, vocab: &Vocabulary) -> Result<Self> {
        Ok(Self {
            inputs: case.inputs.iter().map(|w| vocab.require(w)).collect::<Result<_>>()?,
            target: vocab.require(&case.target)?,
        })
    }
}

/// Training cases bound to an embedding, with an evaluation counter.
#[derive(Clone, Debug)]
pub struct Problem<'a, T> {
    cases: Vec<EncodedCase>,
    table: &'a EmbeddingTable<T>,
    evaluator: Evaluator<T>,
    evaluations: usize,
}

impl<'a, T: Scalar> Problem<'a, T> {
    pub fn new(cases: &[FitnessCase], vocab: &Vocabulary, table: &'a EmbeddingTable<T>) -> Result<Self> {
        let encoded = cases.iter().map(|c| EncodedCase::encode(c, vocab)).collect::<Result<Vec<_>>>()?;
        Self::from_encoded(encoded, table)
    }

    pub fn from_encoded(cases: Vec<EncodedCase>, table: &'a EmbeddingTable<T>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::EmptyInput("fitness cases"));
        }
        if let Some(c) = cases.iter().find(|c| c.target >= table.len() || c.inputs.iter().any(|&i| i >= table.len())) {
            return Err(Error::InvalidParameter(format!("case {c:?} refers past the embedding table")));
        }
        let k = cases[0].inputs.len();
        if cases.iter().any(|c| c.inputs.len() != k) {
            return Err(Error::InvalidParameter("cases have differing input counts".into()));
        }
        Ok(Self { cases, table, evaluator: Evaluator::new(), evaluations: 0 })
    }

    pub fn cases(&self) -> &[EncodedCase] {
        &self.cases
    }

    pub fn table(&self) -> &'a EmbeddingTable<T> {
        self.table
    }

    /// Inputs per case.
    pub fn k(&self) -> usize {
        self.cases[0].inputs.len()
    }

    /// Fitness evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Mean cosine similarity of the tree output to each case target, summed in
    /// case order. Counts as one evaluation.
    pub fn fitness(&mut self, tree: &GpTree) -> T {
        assert!(tree.max_slot().is_none_or(|s| (s as usize) < self.k()), "tree reads past the inputs");
        self.evaluations += 1;
        let table = self.table;
        let mut inputs: Vec<&[T]> = Vec::with_capacity(self.k());
        let mut total = T::zero();
        for case in &self.cases {
            inputs.clear();
            inputs.extend(case.inputs.iter().map(|&i| table.vector(i)));
            let out = self.evaluator.evaluate(tree, &inputs);
            total = total + cosine(out, table.vector(case.target));
        }
        total / T::of(self.cases.len() as f64)
    }
}

/// Fitness of `tree` on `cases`, rejecting words missing from `vocab`.
pub fn compute_fitness<T: Scalar>(tree: &GpTree, cases: &[FitnessCase], vocab: &Vocabulary, table: &EmbeddingTable<T>) -> Result<T> {
    let mut problem = Problem::new(cases, vocab, table)?;
    if let Some(s) = tree.max_slot() {
        if s as usize >= problem.k() {
            return Err(Error::InvalidParameter(format!("tree reads w{s} but cases have {} inputs", problem.k())));
        }
    }
    Ok(problem.fitness(tree))
}

/// Ramped half-and-half: depths cycle through `2..=max_depth` and methods
/// alternate between grow and full.
pub fn init_population<T: Scalar, R: Rng + ?Sized>(params: &EvolutionParams, problem: &mut Problem<'_, T>, rng: &mut R) -> Vec<Individual<T>> {
    let low = params.max_depth.min(2);
    let ramp = params.max_depth - low + 1;
    (0..params.population_size)
        .map(|i| {
            let depth = low + (i / 2) % ramp;
            let method = if i % 2 == 0 { InitMethod::Grow } else { InitMethod::Full };
            let tree = random_tree(depth, method, params.k, rng);
            let fitness = problem.fitness(&tree);
            Individual { tree, fitness }
        })
        .collect()
}

fn by_fitness_desc<T: Scalar>(a: &T, b: &T) -> Ordering {
    b.partial_cmp(a).unwrap_or(Ordering::Equal)
}

/// What one breeding event did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step<T> {
    pub kind: CrossoverKind,
    pub mutated: bool,
    pub replaced: usize,
    pub child_fitness: T,
}

/// One breeding event; performs exactly one fitness evaluation.
pub fn steady_state_step<T: Scalar, R: Rng + ?Sized>(
    population: &mut [Individual<T>],
    params: &EvolutionParams,
    problem: &mut Problem<'_, T>,
    rng: &mut R,
) -> Step<T> {
    let mut tournament = rand::seq::index::sample(rng, population.len(), params.tournament_size).into_vec();
    tournament.sort_unstable();
    // stable: equal fitness keeps slot order
    tournament.sort_by(|&a, &b| by_fitness_desc(&population[a].fitness, &population[b].fitness));

    let limits = params.limits();
    let kind = CrossoverKind::random(rng);
    let (first, second) = (&population[tournament[0]].tree, &population[tournament[1]].tree);
    let mut child = crossover(kind, first, second, &limits, rng);
    let mutated = rng.random_bool(params.mutation_probability);
    if mutated {
        child = mutate(&child, &limits, rng);
    }
    let child_fitness = problem.fitness(&child);
    let replaced = *tournament.last().unwrap();
    population[replaced] = Individual { tree: child, fitness: child_fitness };
    Step { kind, mutated, replaced, child_fitness }
}

fn best_of<T: Scalar>(population: &[Individual<T>]) -> &Individual<T> {
    population
        .iter()
        .reduce(|best, x| if x.fitness > best.fitness { x } else { best })
        .expect("population is non-empty")
}

/// Runs a full evolution until `max_evaluations` fitness evaluations were spent.
pub fn evolve<T: Scalar, R: Rng + ?Sized>(params: &EvolutionParams, problem: &mut Problem<'_, T>, rng: &mut R) -> Result<RunResult> {
    params.validate()?;
    if problem.k() != params.k {
        return Err(Error::InvalidParameter(format!("cases have {} inputs, params expect {}", problem.k(), params.k)));
    }
    let start = problem.evaluations();
    let mut population = init_population(params, problem, rng);
    let mut best = best_of(&population).clone();
    let best_initial = best.fitness;
    let mut trace = vec![(problem.evaluations() - start, best.fitness.as_f64())];

    while problem.evaluations() - start < params.max_evaluations {
        let step = steady_state_step(&mut population, params, problem, rng);
        if step.child_fitness > best.fitness {
            best = population[step.replaced].clone();
            trace.push((problem.evaluations() - start, best.fitness.as_f64()));
        }
    }
    let used = problem.evaluations() - start;
    if trace.last().is_some_and(|&(e, _)| e != used) {
        trace.push((used, best.fitness.as_f64()));
    }

    Ok(RunResult {
        best_initial_fitness: best_initial.as_f64(),
        best_final_fitness: best.fitness.as_f64(),
        best_tree_expression: best.tree.to_expression(),
        best_tree: best.tree,
        evaluations_used: used,
        fitness_trace: trace,
    })
}

/// [`evolve`] on string cases, seeding the generator from `params.seed`.
pub fn evolve_cases<T: Scalar>(params: &EvolutionParams, cases: &[FitnessCase], vocab: &Vocabulary, table: &EmbeddingTable<T>) -> Result<RunResult> {
    use rand::SeedableRng;
    let mut problem = Problem::new(cases, vocab, table)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
    evolve(params, &mut problem, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::parse_expression;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Five orthogonal basis words plus a word halfway between e0 and e1.
    fn toy() -> (Vocabulary, EmbeddingTable<f64>) {
        let vocab = Vocabulary::from_words(["a", "b", "c", "d", "e", "ab"]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let rows = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
            [h, h, 0.0, 0.0, 0.0],
        ];
        (vocab, EmbeddingTable::from_rows(5, &rows).unwrap())
    }

    fn case(inputs: &str, target: &str) -> FitnessCase {
        FitnessCase { inputs: inputs.split(' ').map(String::from).collect(), target: target.into() }
    }

    fn small_params() -> EvolutionParams {
        EvolutionParams { population_size: 20, max_evaluations: 200, ..Default::default() }
    }

    #[test]
    fn identity_and_orthogonal_fitness() {
        let (vocab, table) = toy();
        let w0 = parse_expression("w0", 5).unwrap();
        assert_eq!(compute_fitness(&w0, &[case("a b c d e", "a")], &vocab, &table).unwrap(), 1.0);
        assert_eq!(compute_fitness(&w0, &[case("a b c d e", "b")], &vocab, &table).unwrap(), 0.0);
        let sum = parse_expression("(w0+w1)", 5).unwrap();
        let f = compute_fitness(&sum, &[case("a b c d e", "ab"), case("a b c d e", "a")], &vocab, &table).unwrap();
        assert!((f - (1.0 + 0.5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_output_contributes_zero() {
        let (vocab, table) = toy();
        let t = parse_expression("(w0-w0)", 5).unwrap();
        assert_eq!(compute_fitness(&t, &[case("a b c d e", "a")], &vocab, &table).unwrap(), 0.0);
    }

    #[test]
    fn oov_word_is_named() {
        let (vocab, table) = toy();
        let w0 = parse_expression("w0", 5).unwrap();
        match compute_fitness(&w0, &[case("a b zzz d e", "a")], &vocab, &table) {
            Err(Error::OutOfVocabulary(w)) => assert_eq!(w, "zzz"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(compute_fitness(&w0, &[], &vocab, &table), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn params_validation() {
        assert!(EvolutionParams::default().validate().is_ok());
        for p in [
            EvolutionParams { tournament_size: 1, ..Default::default() },
            EvolutionParams { mutation_probability: 1.5, ..Default::default() },
            EvolutionParams { max_evaluations: 10, ..Default::default() },
            EvolutionParams { population_size: 2, ..Default::default() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn population_init_is_deterministic_and_cached() {
        let (vocab, table) = toy();
        let cases = [case("a b c d e", "ab"), case("e d c b a", "c")];
        let params = EvolutionParams { population_size: 10, ..Default::default() };
        let mut p1 = Problem::new(&cases, &vocab, &table).unwrap();
        let pop1 = init_population(&params, &mut p1, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(pop1.len(), 10);
        assert_eq!(p1.evaluations(), 10);
        assert!(pop1.iter().all(|i| i.tree.depth() <= 5));
        let mut p2 = Problem::new(&cases, &vocab, &table).unwrap();
        let pop2 = init_population(&params, &mut p2, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(pop1, pop2);
        for ind in &pop1 {
            assert_eq!(ind.fitness, compute_fitness(&ind.tree, &cases, &vocab, &table).unwrap());
        }
    }

    #[test]
    fn ramp_covers_both_methods_and_depths() {
        let (vocab, table) = toy();
        let cases = [case("a b c d e", "ab")];
        let params = EvolutionParams { population_size: 40, ..Default::default() };
        let mut p = Problem::new(&cases, &vocab, &table).unwrap();
        let pop = init_population(&params, &mut p, &mut ChaCha8Rng::seed_from_u64(1));
        // full trees at odd slots have exactly the ramp depth
        for (i, ind) in pop.iter().enumerate().filter(|(i, _)| i % 2 == 1) {
            assert_eq!(ind.tree.depth(), 2 + (i / 2) % 4);
        }
    }

    #[test]
    fn replacement_hits_one_non_best_slot() {
        let (vocab, table) = toy();
        let cases = [case("a b c d e", "ab")];
        let params = EvolutionParams { population_size: 3, tournament_size: 3, ..Default::default() };
        let mut problem = Problem::new(&cases, &vocab, &table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        let same = Individual { tree: parse_expression("w2", 5).unwrap(), fitness: 0.0 };
        let mut pop = vec![same.clone(), same.clone(), same.clone()];
        steady_state_step(&mut pop, &params, &mut problem, &mut rng);
        assert!(pop.iter().filter(|i| **i != same).count() <= 1);

        for _ in 0..100 {
            let mut pop: Vec<Individual<f64>> = ["w0", "(w0+w1)", "w3"]
                .iter()
                .map(|e| {
                    let tree = parse_expression(e, 5).unwrap();
                    let fitness = problem.fitness(&tree);
                    Individual { tree, fitness }
                })
                .collect();
            let step = steady_state_step(&mut pop, &params, &mut problem, &mut rng);
            // fitnesses are 1/sqrt2, 1 and 0: the worst is slot 2
            assert_eq!(step.replaced, 2);
        }
    }

    #[test]
    fn accounting_over_many_steps() {
        let (vocab, table) = toy();
        let cases = [case("a b c d e", "ab"), case("b c d e a", "d")];
        let params = EvolutionParams { population_size: 30, ..Default::default() };
        let mut problem = Problem::new(&cases, &vocab, &table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut pop = init_population(&params, &mut problem, &mut rng);
        for i in 0..10_000 {
            let before = problem.evaluations();
            steady_state_step(&mut pop, &params, &mut problem, &mut rng);
            assert_eq!(problem.evaluations(), before + 1);
            assert_eq!(pop.len(), 30);
            if i % 2500 == 0 {
                for ind in &pop {
                    assert!((ind.fitness - compute_fitness(&ind.tree, &cases, &vocab, &table).unwrap()).abs() <= 1e-12);
                    assert!((-1.0..=1.0).contains(&ind.fitness));
                    assert!(ind.tree.depth() <= 5);
                }
            }
        }
    }

    #[test]
    fn budget_equal_to_population_returns_initial_best() {
        let (vocab, table) = toy();
        let cases = [case("a b c d e", "ab")];
        let params = EvolutionParams { population_size: 20, max_evaluations: 20, ..Default::default() };
        let r = evolve_cases(&params, &cases, &vocab, &table).unwrap();
        assert_eq!(r.best_initial_fitness, r.best_final_fitness);
        assert_eq!(r.evaluations_used, 20);
        assert_eq!(r.fitness_trace, vec![(20, r.best_final_fitness)]);
    }

    #[test]
    fn evolve_is_reproducible_and_monotone() {
        let (vocab, table) = toy();
        let cases = [case("a b c d e", "ab"), case("c d a b e", "ab"), case("a a a a e", "e")];
        let params = small_params();
        let r1 = evolve_cases(&params, &cases, &vocab, &table).unwrap();
        let r2 = evolve_cases(&params, &cases, &vocab, &table).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.evaluations_used, 200);
        assert!(r1.best_final_fitness >= r1.best_initial_fitness);
        assert!(r1.fitness_trace.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(r1.fitness_trace.last().unwrap().0, 200);
        let refit = compute_fitness(&r1.best_tree, &cases, &vocab, &table).unwrap();
        assert_eq!(refit, r1.best_final_fitness);
    }

    #[test]
    fn evolve_rejects_k_mismatch() {
        let (vocab, table) = toy();
        let cases = [case("a b c", "ab")];
        assert!(evolve_cases(&small_params(), &cases, &vocab, &table).is_err());
    }
}
