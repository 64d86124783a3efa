//! Dense statevector simulation of rotation/CX circuits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cx { control: usize, target: usize },
}

impl GateOp {
    fn check(&self, qubits: usize) -> Result<()> {
        let in_range = |index: usize| {
            if index < qubits {
                Ok(())
            } else {
                Err(Error::QubitOutOfRange { index, qubits })
            }
        };
        match *self {
            GateOp::Rx { target, .. } | GateOp::Ry { target, .. } | GateOp::Rz { target, .. } => {
                in_range(target)
            }
            GateOp::Cx { control, target } => {
                in_range(control)?;
                in_range(target)?;
                if control == target {
                    return Err(Error::InvalidGate(format!(
                        "CX control and target are both qubit {target}"
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    qubits: usize,
}

impl StateVector {
    /// `|0...0>` on `qubits` qubits.
    pub fn zero(qubits: usize) -> Result<Self> {
        if qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                qubits,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, qubits })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.check(self.qubits)?;
        match *gate {
            GateOp::Rx { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                // [[c, -is], [-is, c]]; -is·z = s·(z.im, -z.re)
                self.apply_pairs(target, |x, y| {
                    (
                        Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re),
                        Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re),
                    )
                });
            }
            GateOp::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                self.apply_pairs(target, |x, y| (x * c - y * s, x * s + y * c));
            }
            GateOp::Rz { target, angle } => {
                let phase = Complex64::from_polar(1.0, angle / 2.0);
                let (lo, hi) = (phase.conj(), phase);
                let bit = 1usize << target;
                for (k, a) in self.amps.iter_mut().enumerate() {
                    *a *= if k & bit == 0 { lo } else { hi };
                }
            }
            GateOp::Cx { control, target } => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for k in 0..self.amps.len() {
                    if k & cbit != 0 && k & tbit == 0 {
                        self.amps.swap(k, k | tbit);
                    }
                }
            }
        }
        Ok(())
    }

    /// Visit every amplitude pair differing only in bit `target` as `(bit 0, bit 1)`.
    #[inline]
    fn apply_pairs(&mut self, target: usize, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) {
        let stride = 1usize << target;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                (*a0, *a1) = f(*a0, *a1);
            }
        }
    }

    /// `p_k = |a_k|^2` for every basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// Draw `shots` outcomes by inverse-CDF lookup on the cumulative
    /// probabilities, with uniforms from a ChaCha8 stream seeded by `seed`.
    pub fn sample(&self, shots: u32, seed: u64) -> SampleHistogram {
        sample_probabilities(&self.probabilities(), shots, seed)
    }
}

/// Apply `gate` to `state` in place; see [`StateVector::apply`].
pub fn apply_gate(state: &mut StateVector, gate: &GateOp) -> Result<()> {
    state.apply(gate)
}

/// Run `gates` in order on `|0...0>`.
pub fn run_circuit(gates: &[GateOp], qubits: usize) -> Result<StateVector> {
    let mut state = StateVector::zero(qubits)?;
    for g in gates {
        state.apply(g)?;
    }
    Ok(state)
}

pub fn probabilities(state: &StateVector) -> Vec<f64> {
    state.probabilities()
}

pub fn sample(state: &StateVector, shots: u32, seed: u64) -> SampleHistogram {
    state.sample(shots, seed)
}

/// Measurement counts keyed by outcome (qubit 0 = least-significant bit).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleHistogram {
    pub counts: BTreeMap<u64, u32>,
    pub shots: u32,
}

impl SampleHistogram {
    pub fn frequency(&self, outcome: u64) -> f64 {
        self.counts.get(&outcome).copied().unwrap_or(0) as f64 / self.shots as f64
    }
}

pub(crate) fn sample_probabilities(probs: &[f64], shots: u32, seed: u64) -> SampleHistogram {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let last = probs.len() - 1;
    let mut rng = seed::rng(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(last);
        *counts.entry(k as u64).or_insert(0) += 1;
    }
    SampleHistogram { counts, shots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn rx_pi_flips() {
        let s = run_circuit(&[GateOp::Rx { target: 0, angle: PI }], 1).unwrap();
        assert!((s.probabilities()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rz_leaves_probabilities_alone() {
        let s = run_circuit(&[GateOp::Rz { target: 0, angle: 1.3 }], 1).unwrap();
        assert!((s.probabilities()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cx_truth_table() {
        // qubit 0 = 1 is basis index 0b01
        let s = run_circuit(
            &[
                GateOp::Rx { target: 0, angle: PI },
                GateOp::Cx { control: 0, target: 1 },
            ],
            2,
        )
        .unwrap();
        assert!((s.probabilities()[0b11] - 1.0).abs() < 1e-12);
        // control 0 off: no flip
        let s = run_circuit(&[GateOp::Cx { control: 0, target: 1 }], 2).unwrap();
        assert!((s.probabilities()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrices_match_declared_conventions() {
        let t = 0.7f64;
        let (s, c) = (t / 2.0).sin_cos();
        let ry = run_circuit(&[GateOp::Ry { target: 0, angle: t }], 1).unwrap();
        assert!((ry.amplitudes()[0] - Complex64::new(c, 0.0)).norm() < 1e-15);
        assert!((ry.amplitudes()[1] - Complex64::new(s, 0.0)).norm() < 1e-15);
        let rx = run_circuit(&[GateOp::Rx { target: 0, angle: t }], 1).unwrap();
        assert!((rx.amplitudes()[1] - Complex64::new(0.0, -s)).norm() < 1e-15);
        let rz = run_circuit(&[GateOp::Rz { target: 0, angle: t }], 1).unwrap();
        assert!((rz.amplitudes()[0] - Complex64::from_polar(1.0, -t / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn empty_circuit_is_zero_state() {
        let s = run_circuit(&[], 4).unwrap();
        assert_eq!(s.probabilities()[0], 1.0);
    }

    #[test]
    fn ry_half_pi_is_even_split() {
        let p = run_circuit(&[GateOp::Ry { target: 0, angle: FRAC_PI_2 }], 1)
            .unwrap()
            .probabilities();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn marginal_after_rx_half_pi() {
        let p = run_circuit(&[GateOp::Rx { target: 1, angle: FRAC_PI_2 }], 3)
            .unwrap()
            .probabilities();
        let on: f64 = p.iter().enumerate().filter(|(k, _)| k & 2 != 0).map(|(_, p)| p).sum();
        assert!((on - 0.5).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rx_round_trip_restores_amplitudes() {
        let mut s = run_circuit(
            &[
                GateOp::Ry { target: 0, angle: 0.4 },
                GateOp::Ry { target: 2, angle: 2.1 },
                GateOp::Cx { control: 0, target: 1 },
            ],
            3,
        )
        .unwrap();
        let before = s.clone();
        s.apply(&GateOp::Rx { target: 1, angle: 0.9 }).unwrap();
        s.apply(&GateOp::Rx { target: 1, angle: -0.9 }).unwrap();
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bad_indices_are_rejected() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(
            s.apply(&GateOp::Rx { target: 2, angle: 0.0 }),
            Err(Error::QubitOutOfRange { index: 2, qubits: 2 })
        ));
        assert!(s.apply(&GateOp::Cx { control: 1, target: 1 }).is_err());
        assert!(s.apply(&GateOp::Cx { control: 5, target: 1 }).is_err());
        assert!(matches!(
            StateVector::zero(MAX_QUBITS + 1),
            Err(Error::TooManyQubits { .. })
        ));
    }

    #[test]
    fn deterministic_state_samples_one_outcome() {
        let s = run_circuit(&[GateOp::Rx { target: 2, angle: PI }], 3).unwrap();
        let h = s.sample(500, 9);
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.counts[&4], 500);
    }

    #[test]
    fn uniform_two_qubit_frequencies() {
        let s = run_circuit(
            &[
                GateOp::Ry { target: 0, angle: FRAC_PI_2 },
                GateOp::Ry { target: 1, angle: FRAC_PI_2 },
            ],
            2,
        )
        .unwrap();
        let h = s.sample(40_000, 123);
        assert_eq!(h.counts.values().sum::<u32>(), 40_000);
        for k in 0..4 {
            assert!((h.frequency(k) - 0.25).abs() < 0.01, "outcome {k}: {}", h.frequency(k));
        }
        assert_eq!(h, s.sample(40_000, 123));
    }

    #[test]
    fn golden_histogram_is_stable() {
        let s = run_circuit(
            &[
                GateOp::Ry { target: 0, angle: 1.0 },
                GateOp::Ry { target: 1, angle: 2.0 },
                GateOp::Cx { control: 1, target: 0 },
            ],
            2,
        )
        .unwrap();
        let h = s.sample(64, 2024);
        let counts: Vec<(u64, u32)> = h.counts.into_iter().collect();
        assert_eq!(counts, GOLDEN);
    }

    // Expected shares ≈ 0.225, 0.067, 0.163, 0.545 of 64 shots.
    const GOLDEN: [(u64, u32); 4] = [(0, 10), (1, 5), (2, 8), (3, 41)];
}
