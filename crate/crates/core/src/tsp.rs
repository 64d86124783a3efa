//! Symmetric TSP instances, tour costs, the exhaustive solver and the
//! classical annealing baseline.

use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::anneal::{metropolis_accept, CoolingSchedule};
use crate::error::{Error, Result};
use crate::perm::{validate_permutation, MAX_CITIES};
use crate::seed;

pub const MIN_CITIES: usize = 3;
/// Exhaustive search refuses anything larger.
pub const MAX_EXACT_CITIES: usize = 10;
pub const DEFAULT_DISTANCES: RangeInclusive<u32> = 1..=100;

/// Symmetric integer distance matrix plus the (seed, index) that generated it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct TspInstance {
    n: usize,
    dist: Vec<u32>,
    seed: u64,
    index: u32,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    seed: u64,
    index: u32,
    dist: Vec<Vec<u32>>,
}

impl TryFrom<InstanceFile> for TspInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        TspInstance::from_rows(f.dist, f.seed, f.index).and_then(|inst| {
            if inst.n != f.n {
                Err(Error::InvariantViolation(format!(
                    "declared n = {} but matrix has {} rows",
                    f.n, inst.n
                )))
            } else {
                Ok(inst)
            }
        })
    }
}

impl From<TspInstance> for InstanceFile {
    fn from(inst: TspInstance) -> Self {
        InstanceFile {
            n: inst.n,
            seed: inst.seed,
            index: inst.index,
            dist: inst.rows(),
        }
    }
}

impl TspInstance {
    /// Build an instance from explicit rows, checking shape, zero diagonal,
    /// symmetry and positive off-diagonal entries.
    pub fn from_rows(rows: Vec<Vec<u32>>, seed: u64, index: u32) -> Result<Self> {
        let n = rows.len();
        check_size(n)?;
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvariantViolation(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        for i in 0..n {
            if dist[i * n + i] != 0 {
                return Err(Error::InvariantViolation(format!("dist[{i}][{i}] is not zero")));
            }
            for j in 0..i {
                if dist[i * n + j] != dist[j * n + i] {
                    return Err(Error::InvariantViolation(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
                if dist[i * n + j] == 0 {
                    return Err(Error::InvariantViolation(format!(
                        "dist[{i}][{j}] must be positive"
                    )));
                }
            }
        }
        Ok(Self { n, dist, seed, index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// Distance between 0-based cities `i` and `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> u32 {
        self.dist[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.dist.chunks(self.n).map(<[u32]>::to_vec).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }
}

fn check_size(n: usize) -> Result<()> {
    if !(MIN_CITIES..=MAX_CITIES).contains(&n) {
        return Err(Error::InvalidSize(format!(
            "city count {n} outside {MIN_CITIES}..={MAX_CITIES}"
        )));
    }
    Ok(())
}

/// A closed tour over labels `1..=n` with its cost.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub cost: u64,
}

impl Tour {
    pub fn new(inst: &TspInstance, order: Vec<usize>) -> Result<Self> {
        let cost = tour_cost(inst, &order)?;
        Ok(Self { order, cost })
    }
}

/// Generate an instance with distances uniform on `[1, 100]`.
///
/// The matrix stream is ChaCha8 seeded with `derive(seed, [n, index])`; the
/// upper triangle is filled row by row and mirrored.
pub fn generate_instance(n: usize, seed: u64, index: u32) -> Result<TspInstance> {
    generate_instance_with(n, seed, index, DEFAULT_DISTANCES)
}

pub fn generate_instance_with(
    n: usize,
    seed: u64,
    index: u32,
    range: RangeInclusive<u32>,
) -> Result<TspInstance> {
    check_size(n)?;
    if *range.start() == 0 || range.start() > range.end() {
        return Err(Error::InvalidConfig(format!(
            "distance range {range:?} must be non-empty and positive"
        )));
    }
    let mut rng = seed::rng_for(seed, &[n as u64, index as u64]);
    let mut dist = vec![0u32; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rng.gen_range(range.clone());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok(TspInstance { n, dist, seed, index })
}

/// Closed-cycle cost of `order` (labels `1..=n`), including the return edge.
pub fn tour_cost(inst: &TspInstance, order: &[usize]) -> Result<u64> {
    if order.len() != inst.n {
        return Err(Error::InvalidTour(format!(
            "tour has {} cities, instance has {}",
            order.len(),
            inst.n
        )));
    }
    validate_permutation(order)?;
    Ok(cycle_cost(inst, order))
}

/// Unchecked cost for an order already known to be a valid permutation.
#[inline]
pub(crate) fn cycle_cost(inst: &TspInstance, order: &[usize]) -> u64 {
    let n = order.len();
    (0..n)
        .map(|k| inst.dist(order[k] - 1, order[(k + 1) % n] - 1) as u64)
        .sum()
}

/// Exhaustive minimum-cost tour. City 1 is fixed first and the remaining
/// cities are enumerated depth-first with partial-cost pruning.
pub fn solve_exact(inst: &TspInstance) -> Result<Tour> {
    if inst.n > MAX_EXACT_CITIES {
        return Err(Error::InvalidSize(format!(
            "exhaustive search is limited to {MAX_EXACT_CITIES} cities, got {}",
            inst.n
        )));
    }
    struct Search<'a> {
        inst: &'a TspInstance,
        path: Vec<usize>,
        used: Vec<bool>,
        best_cost: u64,
        best: Vec<usize>,
    }
    impl Search<'_> {
        fn visit(&mut self, partial: u64) {
            let n = self.inst.n;
            if partial >= self.best_cost {
                return;
            }
            let last = *self.path.last().unwrap();
            if self.path.len() == n {
                let total = partial + self.inst.dist(last, 0) as u64;
                if total < self.best_cost {
                    self.best_cost = total;
                    self.best.clone_from(&self.path);
                }
                return;
            }
            for c in 1..n {
                if !self.used[c] {
                    self.used[c] = true;
                    self.path.push(c);
                    self.visit(partial + self.inst.dist(last, c) as u64);
                    self.path.pop();
                    self.used[c] = false;
                }
            }
        }
    }
    let mut search = Search {
        inst,
        path: vec![0],
        used: vec![false; inst.n],
        best_cost: u64::MAX,
        best: Vec::new(),
    };
    search.used[0] = true;
    search.visit(0);
    Ok(Tour {
        order: search.best.iter().map(|c| c + 1).collect(),
        cost: search.best_cost,
    })
}

/// Outcome of a classical annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub best: Tour,
    pub iterations: usize,
    pub final_temperature: f64,
}

/// Classical SA baseline with the default schedule (T0 = 1, ×0.999, floor
/// 1e-3, 500 iterations).
pub fn classical_sa_baseline(inst: &TspInstance, seed: u64) -> Tour {
    classical_sa_run(inst, &CoolingSchedule::default(), seed).best
}

/// Annealing over tours: each iteration swaps two random positions and applies
/// Metropolis acceptance to the cost change. Every loop iteration counts
/// against the cap, accepted or not.
pub fn classical_sa_run(inst: &TspInstance, schedule: &CoolingSchedule, seed: u64) -> BaselineRun {
    let n = inst.n;
    let mut rng = seed::rng_for(seed, &[seed::label("classical-sa")]);
    let mut current: Vec<usize> = (1..=n).collect();
    // Fisher-Yates start.
    for i in (1..n).rev() {
        current.swap(i, rng.gen_range(0..=i));
    }
    let mut current_cost = cycle_cost(inst, &current);
    let mut best = Tour {
        order: current.clone(),
        cost: current_cost,
    };
    let mut temps = schedule.temperatures();
    let mut iterations = 0;
    for t in temps.by_ref() {
        iterations += 1;
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        current.swap(a, b);
        let candidate = cycle_cost(inst, &current);
        let u: f64 = rng.gen();
        let delta = current_cost as f64 - candidate as f64;
        if metropolis_accept(delta, t, u) {
            current_cost = candidate;
            if candidate < best.cost {
                best = Tour {
                    order: current.clone(),
                    cost: candidate,
                };
            }
        } else {
            current.swap(a, b);
        }
    }
    BaselineRun {
        best,
        iterations,
        final_temperature: temps.current(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TspInstance {
        TspInstance::from_rows(vec![vec![0, 5, 7], vec![5, 0, 3], vec![7, 3, 0]], 0, 0).unwrap()
    }

    /// Heap's algorithm over all permutations of `1..=n`, independent of the
    /// solver's depth-first search.
    fn brute_force_min(inst: &TspInstance) -> u64 {
        let n = inst.n();
        let mut a: Vec<usize> = (1..=n).collect();
        let mut c = vec![0usize; n];
        let mut best = tour_cost(inst, &a).unwrap();
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    a.swap(0, i);
                } else {
                    a.swap(c[i], i);
                }
                best = best.min(tour_cost(inst, &a).unwrap());
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    #[test]
    fn hand_summed_cost() {
        assert_eq!(tour_cost(&small(), &[1, 2, 3]).unwrap(), 15);
    }

    #[test]
    fn cost_rejects_bad_tours() {
        let inst = small();
        assert!(matches!(tour_cost(&inst, &[1, 1, 3]), Err(Error::InvalidTour(_))));
        assert!(matches!(tour_cost(&inst, &[1, 2, 4]), Err(Error::InvalidTour(_))));
        assert!(matches!(tour_cost(&inst, &[1, 2]), Err(Error::InvalidTour(_))));
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let a = generate_instance(4, 99, 0).unwrap();
        assert_eq!(a, generate_instance(4, 99, 0).unwrap());
        for n in 3..=9 {
            for index in 0..11 {
                let inst = generate_instance(n, 1234, index).unwrap();
                for i in 0..n {
                    assert_eq!(inst.dist(i, i), 0);
                    for j in 0..n {
                        assert_eq!(inst.dist(i, j), inst.dist(j, i));
                        if i != j {
                            assert!((1..=100).contains(&inst.dist(i, j)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn index_perturbs_the_stream() {
        let a = generate_instance(5, 17, 0).unwrap();
        let b = generate_instance(5, 17, 1).unwrap();
        assert_ne!(a.rows(), b.rows());
    }

    #[test]
    fn generation_rejects_tiny_sizes() {
        assert!(matches!(generate_instance(2, 0, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn custom_range_is_respected() {
        let inst = generate_instance_with(6, 3, 0, 40..=42).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!((40..=42).contains(&inst.dist(i, j)));
                }
            }
        }
        assert!(generate_instance_with(6, 3, 0, 0..=5).is_err());
    }

    #[test]
    fn three_city_tours_all_cost_the_same() {
        for seed in 0..10 {
            let inst = generate_instance(3, seed, 0).unwrap();
            assert_eq!(solve_exact(&inst).unwrap().cost, tour_cost(&inst, &[1, 2, 3]).unwrap());
        }
    }

    #[test]
    fn exact_agrees_with_enumeration_oracle() {
        for n in 3..=7 {
            for index in 0..6 {
                let inst = generate_instance(n, 555, index).unwrap();
                let tour = solve_exact(&inst).unwrap();
                assert_eq!(tour.cost, brute_force_min(&inst), "n={n} index={index}");
                assert_eq!(tour.cost, tour_cost(&inst, &tour.order).unwrap());
            }
        }
    }

    #[test]
    fn exact_refuses_large_instances() {
        let inst = generate_instance(11, 0, 0).unwrap();
        assert!(matches!(solve_exact(&inst), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn exact_beats_random_tours() {
        let inst = generate_instance(8, 4, 0).unwrap();
        let opt = solve_exact(&inst).unwrap().cost;
        let mut rng = seed::rng(1);
        for _ in 0..1000 {
            let mut order: Vec<usize> = (1..=8).collect();
            for i in (1..8).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            assert!(opt <= tour_cost(&inst, &order).unwrap());
        }
    }

    #[test]
    fn baseline_runs_full_schedule() {
        let inst = generate_instance(6, 8, 0).unwrap();
        let run = classical_sa_run(&inst, &CoolingSchedule::default(), 3);
        assert_eq!(run.iterations, 500);
        assert!((run.final_temperature - 0.999f64.powi(500)).abs() < 1e-12);
        assert!(run.best.cost >= solve_exact(&inst).unwrap().cost);
        assert_eq!(run.best.cost, tour_cost(&inst, &run.best.order).unwrap());
    }

    #[test]
    fn baseline_is_deterministic_per_seed() {
        let inst = generate_instance(7, 2, 3).unwrap();
        assert_eq!(classical_sa_baseline(&inst, 11), classical_sa_baseline(&inst, 11));
    }

    #[test]
    fn baseline_usually_solves_four_cities() {
        let inst = generate_instance(4, 21, 0).unwrap();
        let opt = solve_exact(&inst).unwrap().cost;
        let hits = (0..20)
            .filter(|&s| classical_sa_baseline(&inst, s).cost == opt)
            .count();
        assert!(hits > 10, "only {hits}/20 runs found the optimum");
    }

    #[test]
    fn json_field_names_are_fixed() {
        let inst = small();
        let v: serde_json::Value = serde_json::from_str(&inst.to_json()).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["seed"], 0);
        assert_eq!(v["index"], 0);
        assert_eq!(v["dist"][0][1], 5);
        let back: TspInstance = serde_json::from_value(v).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_rejects_asymmetric_matrix() {
        let bad = r#"{"n":3,"seed":0,"index":0,"dist":[[0,1,2],[1,0,3],[2,4,0]]}"#;
        assert!(serde_json::from_str::<TspInstance>(bad).is_err());
        let wrong_n = r#"{"n":4,"seed":0,"index":0,"dist":[[0,1,2],[1,0,3],[2,3,0]]}"#;
        assert!(serde_json::from_str::<TspInstance>(wrong_n).is_err());
    }
}
