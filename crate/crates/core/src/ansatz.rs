//! The five-block circuit grammar: rotation, entanglement, rotation,
//! entanglement, rotation.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::perm::factorial;
use crate::seed;
use crate::sim::GateOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RotationKind {
    Rx,
    Ry,
    Rz,
}

impl RotationKind {
    pub const ALL: [RotationKind; 3] = [RotationKind::Rx, RotationKind::Ry, RotationKind::Rz];

    pub fn name(self) -> &'static str {
        match self {
            RotationKind::Rx => "rx",
            RotationKind::Ry => "ry",
            RotationKind::Rz => "rz",
        }
    }

    fn gate(self, target: usize, angle: f64) -> GateOp {
        match self {
            RotationKind::Rx => GateOp::Rx { target, angle },
            RotationKind::Ry => GateOp::Ry { target, angle },
            RotationKind::Rz => GateOp::Rz { target, angle },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntanglementKind {
    Linear,
    ReverseLinear,
    Full,
    Circular,
    /// Shifted-circular-alternating.
    Sca,
}

impl EntanglementKind {
    pub const ALL: [EntanglementKind; 5] = [
        EntanglementKind::Linear,
        EntanglementKind::ReverseLinear,
        EntanglementKind::Full,
        EntanglementKind::Circular,
        EntanglementKind::Sca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntanglementKind::Linear => "linear",
            EntanglementKind::ReverseLinear => "reverse_linear",
            EntanglementKind::Full => "full",
            EntanglementKind::Circular => "circular",
            EntanglementKind::Sca => "sca",
        }
    }

    /// Ordered `(control, target)` pairs for this pattern on `qubits` qubits.
    /// `slot` is the entanglement block ordinal (0 or 1); only SCA uses it.
    pub fn pairs(self, qubits: usize, slot: usize) -> Vec<(usize, usize)> {
        let linear = || (0..qubits.saturating_sub(1)).map(|i| (i, i + 1));
        match self {
            EntanglementKind::Linear => linear().collect(),
            EntanglementKind::ReverseLinear => linear().rev().collect(),
            EntanglementKind::Full => (0..qubits)
                .flat_map(|i| (i + 1..qubits).map(move |j| (i, j)))
                .collect(),
            EntanglementKind::Circular => circular(qubits),
            EntanglementKind::Sca => {
                let mut pairs = circular(qubits);
                if !pairs.is_empty() {
                    let shift = slot % pairs.len();
                    pairs.rotate_left(shift);
                }
                if slot % 2 == 1 {
                    for p in &mut pairs {
                        *p = (p.1, p.0);
                    }
                }
                pairs
            }
        }
    }
}

fn circular(qubits: usize) -> Vec<(usize, usize)> {
    if qubits < 2 {
        return Vec::new();
    }
    std::iter::once((qubits - 1, 0))
        .chain((0..qubits - 1).map(|i| (i, i + 1)))
        .collect()
}

/// One slot of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Rotation(RotationKind),
    Entanglement(EntanglementKind),
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Rotation(r) => r.name(),
            Block::Entanglement(e) => e.name(),
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RotationKind::ALL
            .iter()
            .map(|&r| Block::Rotation(r))
            .chain(EntanglementKind::ALL.iter().map(|&e| Block::Entanglement(e)))
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown block kind {s:?}")))
    }
}

pub const BLOCKS: usize = 5;
const ROTATION_SLOTS: [usize; 3] = [0, 2, 4];

/// A typed five-block topology on a fixed number of qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnsatzSpec {
    pub rotations: [RotationKind; 3],
    pub entanglers: [EntanglementKind; 2],
    pub qubits: usize,
}

impl AnsatzSpec {
    pub fn new(blocks: [Block; BLOCKS], qubits: usize) -> Result<Self> {
        let rot = |i: usize| match blocks[i] {
            Block::Rotation(r) => Ok(r),
            b => Err(Error::InvariantViolation(format!(
                "slot {i} must be a rotation block, found {b}"
            ))),
        };
        let ent = |i: usize| match blocks[i] {
            Block::Entanglement(e) => Ok(e),
            b => Err(Error::InvariantViolation(format!(
                "slot {i} must be an entanglement block, found {b}"
            ))),
        };
        if qubits < 2 {
            return Err(Error::InvalidSize(format!("ansatz needs at least 2 qubits, got {qubits}")));
        }
        Ok(Self {
            rotations: [rot(0)?, rot(2)?, rot(4)?],
            entanglers: [ent(1)?, ent(3)?],
            qubits,
        })
    }

    pub fn blocks(&self) -> [Block; BLOCKS] {
        [
            Block::Rotation(self.rotations[0]),
            Block::Entanglement(self.entanglers[0]),
            Block::Rotation(self.rotations[1]),
            Block::Entanglement(self.entanglers[1]),
            Block::Rotation(self.rotations[2]),
        ]
    }

    pub fn param_count(&self) -> usize {
        3 * self.qubits
    }

    /// Mixed-radix code in `[0, 675)`; stable across releases.
    pub fn code(&self) -> u64 {
        let r = |k: RotationKind| k as u64;
        let e = |k: EntanglementKind| k as u64;
        (((r(self.rotations[0]) * 5 + e(self.entanglers[0])) * 3 + r(self.rotations[1])) * 5
            + e(self.entanglers[1]))
            * 3
            + r(self.rotations[2])
    }

    /// Number of CX gates contributed by both entanglement blocks.
    pub fn cx_count(&self) -> usize {
        self.entanglers
            .iter()
            .enumerate()
            .map(|(slot, e)| e.pairs(self.qubits, slot).len())
            .sum()
    }

    /// Block-wise Hamming distance.
    pub fn distance(&self, other: &AnsatzSpec) -> usize {
        self.blocks()
            .iter()
            .zip(other.blocks().iter())
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl fmt::Display for AnsatzSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.blocks().iter().map(|b| b.name()).collect();
        write!(f, "<{}>", names.join(", "))
    }
}

/// Rotation angles, block-major: angle `i * q + j` drives qubit `j` of
/// rotation block `i`. Stored canonically in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(angles: impl IntoIterator<Item = f64>) -> Self {
        Self(angles.into_iter().map(canonical_angle).collect())
    }

    /// Wrap already-canonical angles without touching their bits. Returns an
    /// error if any angle is outside `[0, 2π)` or non-finite.
    pub fn from_canonical(angles: Vec<f64>) -> Result<Self> {
        if let Some(bad) = angles.iter().find(|a| !(0.0..TAU).contains(*a)) {
            return Err(Error::InvariantViolation(format!("angle {bad} outside [0, 2π)")));
        }
        Ok(Self(angles))
    }

    pub fn random(len: usize, rng: &mut seed::Rng) -> Self {
        Self((0..len).map(|_| rng.gen_range(0.0..TAU)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn canonical_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// `ceil(log2(n!))`: qubits needed to index every tour of `n` cities.
pub fn qubits_for(n: usize) -> usize {
    let f = factorial(n);
    (u64::BITS - (f - 1).leading_zeros()) as usize
}

pub fn param_count_for(n: usize) -> usize {
    3 * qubits_for(n)
}

/// Uniform draw: each rotation slot over 3 kinds, each entanglement slot over 5.
pub fn random_ansatz(qubits: usize, seed: u64) -> AnsatzSpec {
    random_ansatz_with(qubits, &mut seed::rng(seed))
}

pub fn random_ansatz_with(qubits: usize, rng: &mut seed::Rng) -> AnsatzSpec {
    let mut rot = || RotationKind::ALL[rng.gen_range(0..3)];
    let rotations = [rot(), rot(), rot()];
    let mut ent = || EntanglementKind::ALL[rng.gen_range(0..5)];
    let entanglers = [ent(), ent()];
    AnsatzSpec {
        rotations,
        entanglers,
        qubits,
    }
}

/// Replace one uniformly chosen block with a different kind valid for its slot.
pub fn perturb(spec: &AnsatzSpec, seed: u64) -> AnsatzSpec {
    perturb_with(spec, &mut seed::rng(seed))
}

pub fn perturb_with(spec: &AnsatzSpec, rng: &mut seed::Rng) -> AnsatzSpec {
    let mut out = *spec;
    let slot = rng.gen_range(0..BLOCKS);
    if let Some(i) = ROTATION_SLOTS.iter().position(|&s| s == slot) {
        out.rotations[i] = pick_other(&RotationKind::ALL, spec.rotations[i], rng);
    } else {
        let i = slot / 2;
        out.entanglers[i] = pick_other(&EntanglementKind::ALL, spec.entanglers[i], rng);
    }
    out
}

fn pick_other<T: Copy + PartialEq>(all: &[T], current: T, rng: &mut seed::Rng) -> T {
    let others: Vec<T> = all.iter().copied().filter(|&k| k != current).collect();
    others[rng.gen_range(0..others.len())]
}

/// Lower a spec and its angles to a gate list: each rotation block is one gate
/// per qubit in ascending order, each entanglement block its CX pair list.
pub fn compile(spec: &AnsatzSpec, params: &ParamVector) -> Result<Vec<GateOp>> {
    compile_angles(spec, params.as_slice())
}

/// As [`compile`], for raw (possibly non-canonical) angles.
pub fn compile_angles(spec: &AnsatzSpec, angles: &[f64]) -> Result<Vec<GateOp>> {
    let q = spec.qubits;
    if angles.len() != spec.param_count() {
        return Err(Error::ParamLength {
            got: angles.len(),
            expected: spec.param_count(),
        });
    }
    let mut gates = Vec::with_capacity(3 * q + spec.cx_count());
    for (block, rot) in spec.rotations.iter().enumerate() {
        let layer = &angles[block * q..(block + 1) * q];
        gates.extend(layer.iter().enumerate().map(|(j, &a)| rot.gate(j, a)));
        if let Some(ent) = spec.entanglers.get(block) {
            gates.extend(
                ent.pairs(q, block)
                    .into_iter()
                    .map(|(control, target)| GateOp::Cx { control, target }),
            );
        }
    }
    Ok(gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_circuit;
    use std::collections::HashSet;

    fn spec(blocks: [&str; 5], q: usize) -> AnsatzSpec {
        AnsatzSpec::new(blocks.map(|b| b.parse().unwrap()), q).unwrap()
    }

    #[test]
    fn table_one_counts() {
        for (n, q, p) in [(4, 5, 15), (5, 7, 21), (6, 10, 30), (7, 13, 39)] {
            assert_eq!(qubits_for(n), q);
            assert_eq!(param_count_for(n), p);
        }
        assert_eq!(qubits_for(3), 3);
        assert_eq!(qubits_for(8), 16);
    }

    #[test]
    fn example_circuit_layout() {
        let a = spec(["rz", "linear", "rz", "reverse_linear", "ry"], 3);
        let angles: Vec<f64> = (0..9).map(|k| 0.1 * (k + 1) as f64).collect();
        let gates = compile(&a, &ParamVector::new(angles)).unwrap();
        use GateOp::*;
        let expected = vec![
            Rz { target: 0, angle: 0.1 },
            Rz { target: 1, angle: 0.2 },
            Rz { target: 2, angle: 0.30000000000000004 },
            Cx { control: 0, target: 1 },
            Cx { control: 1, target: 2 },
            Rz { target: 0, angle: 0.4 },
            Rz { target: 1, angle: 0.5 },
            Rz { target: 2, angle: 0.6000000000000001 },
            Cx { control: 1, target: 2 },
            Cx { control: 0, target: 1 },
            Ry { target: 0, angle: 0.7000000000000001 },
            Ry { target: 1, angle: 0.8 },
            Ry { target: 2, angle: 0.9 },
        ];
        assert_eq!(gates, expected);
    }

    #[test]
    fn pattern_pair_lists() {
        use EntanglementKind::*;
        assert_eq!(Full.pairs(4, 0).len(), 6);
        assert_eq!(Circular.pairs(4, 0), vec![(3, 0), (0, 1), (1, 2), (2, 3)]);
        assert_eq!(Sca.pairs(4, 0), Circular.pairs(4, 0));
        assert_eq!(Sca.pairs(4, 1), vec![(1, 0), (2, 1), (3, 2), (0, 3)]);
        assert_eq!(ReverseLinear.pairs(4, 0), vec![(2, 3), (1, 2), (0, 1)]);
    }

    #[test]
    fn gate_count_formula() {
        for q in 2..=13 {
            for &e1 in &EntanglementKind::ALL {
                for &e2 in &EntanglementKind::ALL {
                    let a = AnsatzSpec {
                        rotations: [RotationKind::Rx; 3],
                        entanglers: [e1, e2],
                        qubits: q,
                    };
                    let gates = compile(&a, &ParamVector::zeros(3 * q)).unwrap();
                    assert_eq!(
                        gates.len(),
                        3 * q + e1.pairs(q, 0).len() + e2.pairs(q, 1).len()
                    );
                }
            }
        }
    }

    #[test]
    fn rz_only_zero_params_stay_at_outcome_zero() {
        let a = spec(["rz", "full", "rz", "sca", "rz"], 5);
        let s = run_circuit(&compile(&a, &ParamVector::zeros(15)).unwrap(), 5).unwrap();
        assert!((s.probabilities()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = random_ansatz(4, 1);
        assert!(matches!(
            compile(&a, &ParamVector::zeros(11)),
            Err(Error::ParamLength { got: 11, expected: 12 })
        ));
    }

    #[test]
    fn slot_typing_enforced() {
        let blocks = ["linear", "rz", "rz", "full", "rx"].map(|b| b.parse::<Block>().unwrap());
        assert!(AnsatzSpec::new(blocks, 3).is_err());
        assert!("hadamard".parse::<Block>().is_err());
    }

    #[test]
    fn random_is_deterministic_and_uniform() {
        assert_eq!(random_ansatz(7, 3), random_ansatz(7, 3));
        let mut counts = [0usize; 3];
        let mut rng = seed::rng(77);
        for _ in 0..10_000 {
            counts[random_ansatz_with(5, &mut rng).rotations[0] as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn perturbation_changes_exactly_one_block() {
        let base = spec(["rx", "linear", "ry", "full", "rz"], 5);
        let mut rng = seed::rng(5);
        let mut seen: HashSet<(usize, Block)> = HashSet::new();
        for _ in 0..5000 {
            let p = perturb_with(&base, &mut rng);
            assert_eq!(base.distance(&p), 1);
            for (slot, (a, b)) in base.blocks().iter().zip(p.blocks()).enumerate() {
                if *a != b {
                    assert_eq!(
                        matches!(b, Block::Rotation(_)),
                        slot % 2 == 0,
                        "slot {slot} got {b}"
                    );
                    seen.insert((slot, b));
                }
            }
        }
        // 3 slots × 2 alternatives + 2 slots × 4 alternatives
        assert_eq!(seen.len(), 14);
    }

    #[test]
    fn codes_are_unique() {
        let mut codes = HashSet::new();
        let mut rng = seed::rng(0);
        for _ in 0..20_000 {
            let a = random_ansatz_with(4, &mut rng);
            assert!(a.code() < 675);
            codes.insert((a.code(), a));
        }
        let by_code: HashSet<u64> = codes.iter().map(|(c, _)| *c).collect();
        assert_eq!(by_code.len(), codes.len());
    }

    #[test]
    fn angles_are_canonicalised() {
        let p = ParamVector::new([-0.5, TAU, 7.0, 0.0]);
        for &a in p.as_slice() {
            assert!((0.0..TAU).contains(&a));
        }
        assert!((p.as_slice()[0] - (TAU - 0.5)).abs() < 1e-12);
        assert!(ParamVector::from_canonical(vec![TAU]).is_err());
    }
}
