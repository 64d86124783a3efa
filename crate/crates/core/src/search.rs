//! Simulated annealing over ansatz topologies.
//!
//! A topology's fitness is the mean, over independent VQE runs, of the
//! fraction of shots that land on an optimal-cost tour after Powell refinement.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{metropolis_accept, CoolingSchedule};
use crate::ansatz::{perturb_with, random_ansatz_with, AnsatzSpec, ParamVector};
use crate::energy::{multistart_select, CostTable, Evaluator, ObjectiveMode};
use crate::error::{Error, Result};
use crate::powell::{powell_minimize, PowellOptions};
use crate::seed;
use crate::tsp::TspInstance;

/// Annealing and fitness-evaluation knobs. Defaults are the reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaConfig {
    pub t0: f64,
    pub cooling: f64,
    pub t_min: f64,
    pub max_iter: usize,
    /// Independent VQE runs averaged per fitness call.
    pub fitness_runs: usize,
    /// Powell runs per VQE run, one per kept start in energy order.
    pub restarts: usize,
    /// Random parameter vectors scored before selection.
    pub n_samples: usize,
    /// Lowest-energy vectors kept as Powell starts.
    pub n_keep: usize,
    pub shots: u32,
    pub powell_ftol: f64,
    pub powell_max_iter: usize,
    pub line_tol: f64,
    pub objective: ObjectiveMode,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        let s = CoolingSchedule::default();
        let p = PowellOptions::default();
        Self {
            t0: s.t0,
            cooling: s.cooling,
            t_min: s.t_min,
            max_iter: s.max_iter,
            fitness_runs: 1,
            restarts: 10,
            n_samples: 100,
            n_keep: 10,
            shots: 1024,
            powell_ftol: p.ftol,
            powell_max_iter: p.max_iter,
            line_tol: p.line_tol,
            objective: ObjectiveMode::Sampled,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn schedule(&self) -> CoolingSchedule {
        CoolingSchedule {
            t0: self.t0,
            cooling: self.cooling,
            t_min: self.t_min,
            max_iter: self.max_iter,
        }
    }

    pub fn powell(&self) -> PowellOptions {
        PowellOptions {
            ftol: self.powell_ftol,
            max_iter: self.powell_max_iter,
            line_tol: self.line_tol,
            ..PowellOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule().validate()?;
        self.powell().validate()?;
        let positive = [
            ("fitness_runs", self.fitness_runs),
            ("restarts", self.restarts),
            ("n_samples", self.n_samples),
            ("n_keep", self.n_keep),
            ("shots", self.shots as usize),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.n_keep > self.n_samples {
            return Err(Error::InvalidConfig(format!(
                "n_keep ({}) exceeds n_samples ({})",
                self.n_keep, self.n_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    /// Mean of `per_run_p_opt`.
    pub fitness: f64,
    /// Parameters of the run with the highest `p_opt` (first on ties).
    pub best_params: ParamVector,
    pub per_run_p_opt: Vec<f64>,
    /// Objective calls across sampling, Powell and final evaluations.
    pub evaluations: usize,
}

/// Result of one Powell refinement followed by a final shot evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub params: ParamVector,
    pub energy: f64,
    pub evaluations: usize,
}

/// Powell from `start` on `eval`'s energy. Evaluation `k` of the run is seeded
/// with `derive(seed, [k])`, so the sequence of seeds is fixed by `seed`.
pub fn refine(eval: &Evaluator<'_>, start: &[f64], cfg: &SaConfig, seed: u64) -> Result<Refined> {
    let mut counter = 0u64;
    let mut failure = None;
    let objective = |x: &[f64]| {
        let s = seed::derive(seed, &[counter]);
        counter += 1;
        match eval.energy(x, cfg.objective, cfg.shots, s) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let result = powell_minimize(objective, start, &cfg.powell());
    if let Some(e) = failure {
        return Err(e);
    }
    let result = result?;
    Ok(Refined {
        params: ParamVector::new(result.x),
        energy: result.fx,
        evaluations: result.evaluations,
    })
}

/// Score a topology on the training instance behind `table`.
///
/// Run `t` uses the seed `derive(cfg.seed, ["fitness", spec.code(), t])`, so a
/// topology's fitness is a pure function of the topology and the config.
pub fn fitness_with(spec: &AnsatzSpec, table: &CostTable, cfg: &SaConfig) -> Result<FitnessReport> {
    cfg.validate()?;
    let eval = Evaluator::new(*spec, table)?;
    let mut per_run = Vec::new();
    let mut best: Option<(f64, ParamVector)> = None;
    let mut evaluations = 0;
    for t in 0..cfg.fitness_runs {
        let run_seed = seed::derive(cfg.seed, &[seed::label("fitness"), spec.code(), t as u64]);
        let starts = multistart_select(&eval, cfg.n_samples, cfg.n_keep, cfg.objective, cfg.shots, run_seed)?;
        evaluations += cfg.n_samples;
        let runs = (0..cfg.restarts)
            .into_par_iter()
            .map(|r| {
                let start = &starts[r % starts.len()].params;
                let refined = refine(
                    &eval,
                    start.as_slice(),
                    cfg,
                    seed::derive(run_seed, &[seed::label("powell"), r as u64]),
                )?;
                let check = eval.estimate(
                    refined.params.as_slice(),
                    cfg.shots,
                    seed::derive(run_seed, &[seed::label("final"), r as u64]),
                )?;
                Ok((check.p_opt, refined))
            })
            .collect::<Result<Vec<_>>>()?;
        for (p_opt, refined) in runs {
            evaluations += refined.evaluations + 1;
            if best.as_ref().is_none_or(|(b, _)| p_opt > *b) {
                best = Some((p_opt, refined.params));
            }
            per_run.push(p_opt);
        }
    }
    let fitness = per_run.iter().sum::<f64>() / per_run.len() as f64;
    Ok(FitnessReport {
        fitness,
        best_params: best.expect("at least one run").1,
        per_run_p_opt: per_run,
        evaluations,
    })
}

/// Convenience wrapper that solves `inst` exhaustively first.
pub fn fitness(spec: &AnsatzSpec, inst: &TspInstance, cfg: &SaConfig) -> Result<FitnessReport> {
    fitness_with(spec, &CostTable::solved(inst)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaStep {
    pub step: usize,
    pub best_fitness: f64,
    pub current_fitness: f64,
    pub temperature: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaTrace {
    pub steps: Vec<SaStep>,
}

impl SaTrace {
    /// `step,value` rows with the best fitness after each step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,value\n");
        for s in &self.steps {
            writeln!(out, "{},{}", s.step, s.best_fitness).unwrap();
        }
        out
    }

    pub fn best(&self) -> Option<f64> {
        self.steps.iter().map(|s| s.best_fitness).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub spec: AnsatzSpec,
    pub params: ParamVector,
    pub fitness: f64,
    pub initial_fitness: f64,
    pub trace: SaTrace,
    /// Distinct topologies whose fitness was computed.
    pub evaluated: usize,
}

pub fn anneal_structure(inst: &TspInstance, cfg: &SaConfig) -> Result<AnnealOutcome> {
    anneal_structure_with(&CostTable::solved(inst)?, cfg, |_| {})
}

/// Anneal over topologies, calling `on_step` after every iteration.
///
/// Fitness values are memoized per topology; since each topology's fitness
/// seed is derived from its code this only saves work.
pub fn anneal_structure_with(
    table: &CostTable,
    cfg: &SaConfig,
    mut on_step: impl FnMut(&SaStep),
) -> Result<AnnealOutcome> {
    cfg.validate()?;
    let qubits = table.qubits();
    let mut rng = seed::rng_for(cfg.seed, &[seed::label("structure-anneal")]);
    let mut memo: HashMap<AnsatzSpec, FitnessReport> = HashMap::new();
    let mut score = |spec: &AnsatzSpec| -> Result<f64> {
        if let Some(r) = memo.get(spec) {
            return Ok(r.fitness);
        }
        let r = fitness_with(spec, table, cfg)?;
        let f = r.fitness;
        memo.insert(*spec, r);
        Ok(f)
    };

    let initial = random_ansatz_with(qubits, &mut rng);
    let initial_fitness = score(&initial)?;
    let mut current = initial;
    let mut current_fitness = initial_fitness;
    let mut best = initial;
    let mut best_fitness = initial_fitness;
    let mut trace = SaTrace::default();

    for (step, temperature) in cfg.schedule().temperatures().enumerate() {
        let neighbor = perturb_with(&current, &mut rng);
        let neighbor_fitness = score(&neighbor)?;
        let delta = neighbor_fitness - current_fitness;
        let u: f64 = rng.gen();
        let accepted = metropolis_accept(delta, temperature, u);
        if accepted {
            current = neighbor;
            current_fitness = neighbor_fitness;
            if current_fitness > best_fitness {
                best = current;
                best_fitness = current_fitness;
            }
        }
        let row = SaStep {
            step,
            best_fitness,
            current_fitness,
            temperature,
            accepted,
        };
        on_step(&row);
        trace.steps.push(row);
    }

    let evaluated = memo.len();
    let params = memo[&best].best_params.clone();
    Ok(AnnealOutcome {
        spec: best,
        params,
        fitness: best_fitness,
        initial_fitness,
        trace,
        evaluated,
    })
}
