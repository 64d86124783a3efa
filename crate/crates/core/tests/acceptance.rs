//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 9 and 10 are long statistical runs; they execute only when
//! `ACCEPTANCE_LONG=1` is set and are reported as SKIP otherwise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use frozen_ansatz::anneal::metropolis_accept;
use frozen_ansatz::ansatz::{
    compile, param_count_for, qubits_for, random_ansatz_with, ParamVector, RotationKind,
};
use frozen_ansatz::energy::{CostTable, Evaluator};
use frozen_ansatz::perm::{decode, encode, factorial, PermIndex};
use frozen_ansatz::pipeline::{
    reuse, run_experiment, train, ExperimentOptions, RepeatMode, REFERENCE_SIZES,
};
use frozen_ansatz::powell::{powell_minimize, PowellOptions};
use frozen_ansatz::search::{anneal_structure_with, SaConfig};
use frozen_ansatz::seed;
use frozen_ansatz::sim::{run_circuit, GateOp};
use frozen_ansatz::tsp::{classical_sa_baseline, generate_instance, solve_exact};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn codec_bijectivity() -> Outcome {
    for n in 3..=8 {
        let limit = factorial(n);
        let mut seen = vec![false; limit as usize];
        for p in 0..limit {
            let idx = PermIndex::new(p, n).unwrap();
            let perm = decode(idx);
            let back = encode(&perm).map_err(|e| format!("n={n} P={p}: {e}"))?;
            if back != idx {
                return Err(format!("n={n}: encode(decode({p})) = {}", back.value()));
            }
            if std::mem::replace(&mut seen[p as usize], true) {
                return Err(format!("n={n}: rank {p} reached twice"));
            }
        }
    }
    Ok("n = 3..8, all P in [0, n!)".into())
}

fn table_one() -> Outcome {
    let expected = [(4, 5, 15), (5, 7, 21), (6, 10, 30), (7, 13, 39)];
    let got: Vec<_> = expected
        .iter()
        .map(|&(n, _, _)| (n, qubits_for(n), param_count_for(n)))
        .collect();
    check(got == expected, format!("{got:?}"))
}

fn simulator_correctness() -> Outcome {
    let mut rng = seed::rng(3);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let q = [5, 7, 10, 13][k % 4];
        let spec = random_ansatz_with(q, &mut rng);
        let params = ParamVector::random(3 * q, &mut rng);
        let state = run_circuit(&compile(&spec, &params).unwrap(), q).unwrap();
        worst = worst.max((state.norm_sqr() - 1.0).abs());
    }
    if worst >= 1e-10 {
        return Err(format!("norm deviation {worst:e}"));
    }
    for q in [5, 7, 10, 13] {
        let mut spec = random_ansatz_with(q, &mut rng);
        spec.rotations = [RotationKind::Rz; 3];
        let params = ParamVector::random(3 * q, &mut rng);
        let p = run_circuit(&compile(&spec, &params).unwrap(), q)
            .unwrap()
            .probabilities();
        if (p[0] - 1.0).abs() > 1e-10 {
            return Err(format!("RZ-only circuit on {q} qubits: p0 = {}", p[0]));
        }
        for target in 0..q {
            let p = run_circuit(&[GateOp::Rx { target, angle: PI }], q)
                .unwrap()
                .probabilities();
            if (p[1 << target] - 1.0).abs() > 1e-12 {
                return Err(format!("RX(pi) on qubit {target} of {q}"));
            }
        }
    }
    Ok(format!("max norm deviation {worst:.1e} over 1000 circuits"))
}

fn estimator_consistency() -> Outcome {
    let mut rng = seed::rng(44);
    let mut within = 0;
    for k in 0..20 {
        let inst = generate_instance(4, 900, k).unwrap();
        let table = CostTable::solved(&inst).unwrap();
        let eval = Evaluator::new(random_ansatz_with(5, &mut rng), &table).unwrap();
        let params = ParamVector::random(15, &mut rng);
        let est = eval.estimate(params.as_slice(), 4096, rng.gen()).unwrap();
        let exact = eval.exact(params.as_slice()).unwrap();
        let sigma = est.cost_std / 4096f64.sqrt();
        if (est.mean_cost - exact).abs() <= 4.0 * sigma + 1e-9 {
            within += 1;
        }
    }
    check(within >= 18, format!("{within}/20 within 4 sigma"))
}

/// `(x - c)^T A (x - c)` with `A = I + M^T M / d`, `M` uniform on [-1, 1].
fn random_quadratic(d: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = seed::rng(seed);
    let m: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let a = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mtm: f64 = (0..d).map(|k| m[k][i] * m[k][j]).sum();
                    mtm / d as f64 + if i == j { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let c = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    (c, a)
}

fn powell_quality() -> Outcome {
    let opts = PowellOptions::default();
    let mut notes = Vec::new();
    for d in [15, 21, 39] {
        let (c, a) = random_quadratic(d, d as u64);
        let f = |x: &[f64]| {
            let y: Vec<f64> = x.iter().zip(&c).map(|(x, c)| x - c).collect();
            (0..d).map(|i| y[i] * (0..d).map(|j| a[i][j] * y[j]).sum::<f64>()).sum::<f64>()
        };
        let r = powell_minimize(f, &vec![0.0; d], &opts).map_err(|e| e.to_string())?;
        let err = r.x.iter().zip(&c).map(|(x, c)| (x - c).abs()).fold(0.0, f64::max);
        if err > 1e-3 || r.iterations > 50 {
            return Err(format!("d={d}: max error {err:.2e} after {} iterations", r.iterations));
        }
        notes.push(format!("d={d}: {err:.1e} in {} it", r.iterations));
    }
    let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let r = powell_minimize(rosen, &[-1.2, 1.0], &opts).map_err(|e| e.to_string())?;
    let err = (r.x[0] - 1.0).abs().max((r.x[1] - 1.0).abs());
    if err > 1e-2 || r.iterations > 50 {
        return Err(format!("rosenbrock: error {err:.2e} after {} iterations", r.iterations));
    }
    notes.push(format!("rosenbrock: {err:.1e} in {} it", r.iterations));
    Ok(notes.join("; "))
}

fn metropolis_statistics() -> Outcome {
    let mut rng = seed::rng(6);
    let trials = 10_000;
    let accepted = (0..trials)
        .filter(|_| metropolis_accept(-0.1, 1.0, rng.gen()))
        .count();
    let rate = accepted as f64 / trials as f64;
    let improving = (0..trials)
        .filter(|_| metropolis_accept(rng.gen_range(1e-9..1.0), rng.gen_range(1e-3..1.0), rng.gen()))
        .count();
    check(
        (rate - (-0.1f64).exp()).abs() <= 0.01 && improving == trials,
        format!("rate {rate:.4} vs {:.4}; improving accepted {improving}/{trials}", (-0.1f64).exp()),
    )
}

fn sa_loop_shape() -> Outcome {
    // Reference schedule, minimal optimizer budget per fitness call.
    let cfg = SaConfig {
        n_samples: 2,
        n_keep: 1,
        restarts: 1,
        shots: 16,
        powell_max_iter: 1,
        seed: 7,
        ..SaConfig::default()
    };
    let inst = generate_instance(4, 7, 0).unwrap();
    let table = CostTable::solved(&inst).unwrap();
    let out = anneal_structure_with(&table, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let csv = out.trace.to_csv();
    let rows: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let monotone = rows.windows(2).all(|w| w[0] <= w[1]);
    check(
        out.trace.steps.len() == 500 && rows.len() == 500 && monotone,
        format!("{} iterations, {} trace rows, monotone = {monotone}", out.trace.steps.len(), rows.len()),
    )
}

fn transfer(n: usize, family_seed: u64, cfg: &SaConfig, tau: f64, need: usize) -> Outcome {
    let started = Instant::now();
    let trained = train(n, family_seed, cfg).map_err(|e| e.to_string())?;
    let tests: Vec<_> = (1..=10).map(|i| generate_instance(n, family_seed, i).unwrap()).collect();
    let records = reuse(&trained.model, &tests, cfg).map_err(|e| e.to_string())?;
    let hits = records.iter().filter(|r| r.p_opt >= tau).count();
    let p: Vec<String> = records.iter().map(|r| format!("{:.3}", r.p_opt)).collect();
    check(
        hits >= need,
        format!(
            "{hits}/10 with p_opt >= {tau} (need {need}); training fitness {:.3}, ansatz {}; p_opt [{}]; {:.0}s",
            trained.model.training().fitness,
            trained.model.spec(),
            p.join(", "),
            started.elapsed().as_secs_f64()
        ),
    )
}

fn four_city_transfer() -> Outcome {
    let cfg = SaConfig {
        max_iter: 100,
        restarts: 5,
        seed: 1,
        ..SaConfig::default()
    };
    transfer(4, 2024, &cfg, 0.9, 8)
}

fn five_city_transfer() -> Outcome {
    let cfg = SaConfig {
        seed: 1,
        ..SaConfig::default()
    };
    transfer(5, 2024, &cfg, 0.8, 7)
}

fn seven_city_degradation() -> Outcome {
    // Reduced budget: the full reference schedule is several hours at 13 qubits.
    let cfg = SaConfig {
        max_iter: 30,
        restarts: 3,
        seed: 1,
        ..SaConfig::default()
    };
    let trained = train(7, 2024, &cfg).map_err(|e| e.to_string())?;
    let tests: Vec<_> = (1..=10).map(|i| generate_instance(7, 2024, i).unwrap()).collect();
    let records = reuse(&trained.model, &tests, &cfg).map_err(|e| e.to_string())?;
    let mut p: Vec<f64> = records.iter().map(|r| r.p_opt).collect();
    p.sort_by(f64::total_cmp);
    let median = (p[4] + p[5]) / 2.0;
    check(
        median < 0.5,
        format!("median p_opt {median:.3}; training fitness {:.3}", trained.model.training().fitness),
    )
}

fn determinism() -> Outcome {
    let cfg = SaConfig {
        max_iter: 2,
        n_samples: 4,
        n_keep: 2,
        restarts: 1,
        shots: 64,
        powell_max_iter: 1,
        line_tol: 1e-2,
        seed: 99,
        ..SaConfig::default()
    };
    let opts = ExperimentOptions {
        family_seed: 5,
        repeats: 2,
        repeat_mode: RepeatMode::Evaluations,
        ..ExperimentOptions::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&opts, &cfg, a.path(), |_, _| {}).map_err(|e| e.to_string())?;
    run_experiment(&opts, &cfg, b.path(), |_, _| {}).map_err(|e| e.to_string())?;
    let fa = collect_files(a.path());
    let fb = collect_files(b.path());
    let names: Vec<_> = fa.keys().collect();
    if names != fb.keys().collect::<Vec<_>>() {
        return Err("file sets differ".into());
    }
    let compared = fa
        .keys()
        .filter(|k| k.ends_with(".csv") || k.starts_with("model_"))
        .count();
    let differing: Vec<_> = fa.iter().filter(|(k, v)| fb[*k] != **v).map(|(k, _)| k.clone()).collect();
    check(
        differing.is_empty() && compared >= 11,
        format!("{} files ({compared} CSV/model) identical; differing: {differing:?}", fa.len()),
    )
}

fn collect_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn baseline_sanity() -> Outcome {
    let mut equal = 0;
    let mut total = 0;
    for n in REFERENCE_SIZES {
        for index in 0..11 {
            let inst = generate_instance(n, 2024, index).unwrap();
            let exact = solve_exact(&inst).unwrap().cost;
            let cost = classical_sa_baseline(&inst, index as u64).cost;
            if cost < exact {
                return Err(format!("n={n} index={index}: baseline {cost} < exact {exact}"));
            }
            equal += usize::from(cost == exact);
            total += 1;
        }
    }
    Ok(format!("{total} instances, baseline optimal on {equal}/{total}"))
}

type Criterion = (&'static str, fn() -> Outcome, bool);

fn main() -> ExitCode {
    let long = std::env::var("ACCEPTANCE_LONG").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 12] = [
        ("1 codec bijectivity", codec_bijectivity, false),
        ("2 qubit/parameter table", table_one, false),
        ("3 simulator correctness", simulator_correctness, false),
        ("4 estimator consistency", estimator_consistency, false),
        ("5 powell quality", powell_quality, false),
        ("6 metropolis statistics", metropolis_statistics, false),
        ("7 annealing loop shape", sa_loop_shape, false),
        ("8 four-city transfer", four_city_transfer, false),
        ("9 five-city transfer", five_city_transfer, true),
        ("10 seven-city degradation", seven_city_degradation, true),
        ("11 determinism", determinism, false),
        ("12 baseline sanity", baseline_sanity, false),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, is_long) in criteria {
        let number = name.split(' ').next().unwrap();
        if !filter.is_empty() && !filter.iter().any(|f| f == number) {
            continue;
        }
        if is_long && !long {
            println!("SKIP criterion {name} (set ACCEPTANCE_LONG=1)");
            continue;
        }
        let started = Instant::now();
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{:.1}s]", started.elapsed().as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{:.1}s]", started.elapsed().as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
