//! Sampling-based energy estimation and the random multi-start stage.
//!
//! The energy of a parameter vector is the mean tour cost over measured
//! outcomes, each outcome decoded to a tour through the permutation codec.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{compile_angles, qubits_for, AnsatzSpec, ParamVector};
use crate::error::{Error, Result};
use crate::perm::outcome_to_tour;
use crate::seed;
use crate::sim::{run_circuit, SampleHistogram, StateVector};
use crate::tsp::{cycle_cost, solve_exact, Tour, TspInstance};

/// How the optimizer scores a parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Mean cost over a finite number of shots.
    #[default]
    Sampled,
    /// Exact expectation over the full output distribution.
    Exact,
}

/// Tour cost of every measurement outcome of a register, plus the optimum.
#[derive(Debug, Clone)]
pub struct CostTable {
    n: usize,
    qubits: usize,
    costs: Vec<u64>,
    opt_cost: u64,
}

impl CostTable {
    pub fn new(inst: &TspInstance, opt_cost: u64) -> Self {
        let n = inst.n();
        let qubits = qubits_for(n);
        let costs = (0..1u64 << qubits)
            .map(|k| cycle_cost(inst, &outcome_to_tour(k, n)))
            .collect();
        Self {
            n,
            qubits,
            costs,
            opt_cost,
        }
    }

    /// Build the table after solving the instance exhaustively.
    pub fn solved(inst: &TspInstance) -> Result<Self> {
        Ok(Self::new(inst, solve_exact(inst)?.cost))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn opt_cost(&self) -> u64 {
        self.opt_cost
    }

    pub fn cost(&self, outcome: u64) -> u64 {
        self.costs[outcome as usize]
    }

    pub fn max_cost(&self) -> u64 {
        self.costs.iter().copied().max().unwrap_or(0)
    }
}

/// Shot-based estimate of a circuit's energy on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub mean_cost: f64,
    /// Sample standard deviation of the per-shot cost.
    pub cost_std: f64,
    pub histogram: SampleHistogram,
    /// Fraction of shots whose tour cost equals the optimum.
    pub p_opt: f64,
    pub best_tour: Tour,
}

impl EnergyEstimate {
    pub fn optimal_shots(&self) -> u32 {
        (self.p_opt * self.histogram.shots as f64).round() as u32
    }
}

/// Evaluates one topology against one instance's cost table.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    spec: AnsatzSpec,
    table: &'a CostTable,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: AnsatzSpec, table: &'a CostTable) -> Result<Self> {
        if spec.qubits != table.qubits {
            return Err(Error::QubitMismatch {
                ansatz: spec.qubits,
                instance: table.qubits,
            });
        }
        Ok(Self { spec, table })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn table(&self) -> &CostTable {
        self.table
    }

    pub fn state(&self, angles: &[f64]) -> Result<StateVector> {
        run_circuit(&compile_angles(&self.spec, angles)?, self.spec.qubits)
    }

    pub fn estimate(&self, angles: &[f64], shots: u32, seed: u64) -> Result<EnergyEstimate> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shot count must be at least 1".into()));
        }
        let histogram = self.state(angles)?.sample(shots, seed);
        Ok(self.summarize(histogram))
    }

    fn summarize(&self, histogram: SampleHistogram) -> EnergyEstimate {
        let shots = histogram.shots as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut optimal = 0u64;
        let mut best: Option<(u64, u64)> = None;
        for (&outcome, &count) in &histogram.counts {
            let c = self.table.cost(outcome);
            let w = count as f64;
            sum += w * c as f64;
            sum_sq += w * (c as f64).powi(2);
            if c == self.table.opt_cost {
                optimal += count as u64;
            }
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, outcome));
            }
        }
        let mean = sum / shots;
        let var = if histogram.shots > 1 {
            ((sum_sq - shots * mean * mean) / (shots - 1.0)).max(0.0)
        } else {
            0.0
        };
        let (cost, outcome) = best.expect("at least one shot");
        EnergyEstimate {
            mean_cost: mean,
            cost_std: var.sqrt(),
            p_opt: optimal as f64 / shots,
            best_tour: Tour {
                order: outcome_to_tour(outcome, self.table.n),
                cost,
            },
            histogram,
        }
    }

    /// `Σ_k p_k · cost(k)` over every outcome.
    pub fn exact(&self, angles: &[f64]) -> Result<f64> {
        let probs = self.state(angles)?.probabilities();
        Ok(probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.table.cost(k as u64) as f64)
            .sum())
    }

    /// Objective value under `mode`; `seed` is ignored in exact mode.
    pub fn energy(&self, angles: &[f64], mode: ObjectiveMode, shots: u32, seed: u64) -> Result<f64> {
        match mode {
            ObjectiveMode::Sampled => Ok(self.estimate(angles, shots, seed)?.mean_cost),
            ObjectiveMode::Exact => self.exact(angles),
        }
    }
}

/// Compile, simulate and sample `spec` with `params` on `inst`.
pub fn estimate_energy(
    spec: &AnsatzSpec,
    params: &ParamVector,
    inst: &TspInstance,
    shots: u32,
    seed: u64,
    opt_cost: u64,
) -> Result<EnergyEstimate> {
    let table = CostTable::new(inst, opt_cost);
    Evaluator::new(*spec, &table)?.estimate(params.as_slice(), shots, seed)
}

/// Deterministic expected cost of `spec` with `params` on `inst`.
pub fn exact_energy(spec: &AnsatzSpec, params: &ParamVector, inst: &TspInstance) -> Result<f64> {
    let table = CostTable::new(inst, 0);
    Evaluator::new(*spec, &table)?.exact(params.as_slice())
}

/// A candidate start with the energy that ranked it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredParams {
    pub params: ParamVector,
    pub energy: f64,
}

/// Draw `n_samples` uniform vectors in `[0, 2π)^{3q}`, score each, and keep the
/// `n_keep` lowest in ascending order. Sample `i` draws its angles from
/// `derive(seed, ["start", i])` and its shots from `derive(seed, ["start-eval", i])`,
/// so the result does not depend on thread scheduling.
pub fn multistart_select(
    eval: &Evaluator<'_>,
    n_samples: usize,
    n_keep: usize,
    mode: ObjectiveMode,
    shots: u32,
    seed: u64,
) -> Result<Vec<ScoredParams>> {
    if n_keep > n_samples || n_keep == 0 {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= n_keep <= n_samples, got n_keep = {n_keep}, n_samples = {n_samples}"
        )));
    }
    let len = eval.spec().param_count();
    let mut scored = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_for(seed, &[seed::label("start"), i as u64]);
            let params = ParamVector::random(len, &mut rng);
            let eval_seed = seed::derive(seed, &[seed::label("start-eval"), i as u64]);
            let energy = eval.energy(params.as_slice(), mode, shots, eval_seed)?;
            Ok((i, ScoredParams { params, energy }))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|(i, a), (j, b)| a.energy.total_cmp(&b.energy).then(i.cmp(j)));
    Ok(scored.into_iter().take(n_keep).map(|(_, s)| s).collect())
}
