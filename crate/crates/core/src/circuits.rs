//! Basis embedding and the 19 single-layer benchmark circuits on 4 qubits.
//!
//! Circuits are described by a declarative block table; slots are assigned in
//! gate order, so `theta[k]` is the k-th parametrized gate of the listing
//! produced by [`CircuitTemplate::dump`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Angle, GateKind, GateOp};

pub const NUM_QUBITS: usize = 4;
pub const NUM_STATES: usize = 1 << NUM_QUBITS;
pub const NUM_CIRCUITS: usize = 19;

/// Trainable scalars outside the two circuits: a 4x4+4 policy head and a
/// 4x1+1 value head.
pub const HEAD_PARAMS: usize = 4 * 4 + 4 + 4 + 1;

/// Published total weight counts `W = 2P + 25` for circuits 1..=19.
pub const PUBLISHED_WEIGHTS: [usize; NUM_CIRCUITS] = [
    41, 41, 47, 47, 81, 81, 63, 63, 33, 41, 49, 49, 57, 57, 41, 47, 47, 49, 49,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateId {
    Benchmark(usize),
    Embedding(usize),
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateId::Benchmark(id) => write!(f, "{id}"),
            TemplateId::Embedding(s) => write!(f, "embedding[{s}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntanglerKind {
    None,
    Cnot,
    Cz,
    Crx,
    Crz,
    Mixed,
}

impl EntanglerKind {
    pub fn label(self) -> &'static str {
        match self {
            EntanglerKind::None => "none",
            EntanglerKind::Cnot => "CNOT",
            EntanglerKind::Cz => "CZ",
            EntanglerKind::Crx => "CRX",
            EntanglerKind::Crz => "CRZ",
            EntanglerKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    None,
    Linear,
    AllToAll,
    Pairwise,
    Circular,
    ShiftedCircularAlternating,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::None => "none",
            Topology::Linear => "linear",
            Topology::AllToAll => "all-to-all",
            Topology::Pairwise => "pairwise",
            Topology::Circular => "circular",
            Topology::ShiftedCircularAlternating => "shifted-circular-alternating",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    pub id: TemplateId,
    pub num_qubits: usize,
    pub gates: Vec<GateOp>,
    pub param_count: usize,
    pub entangler: EntanglerKind,
    pub topology: Topology,
}

impl CircuitTemplate {
    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.wires.len() == 2).count()
    }

    /// Plain-text gate table, one gate per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# circuit {} | qubits {} | params {} | W {} | entangler {} | topology {}",
            self.id,
            self.num_qubits,
            self.param_count,
            2 * self.param_count + HEAD_PARAMS,
            self.entangler.label(),
            self.topology.label()
        );
        let _ = writeln!(out, "# qubit 0 is the most significant bit of the basis index");
        for (i, g) in self.gates.iter().enumerate() {
            let wires = match g.wires.as_slice() {
                [w] => format!("q{w}"),
                [c, t] => format!("q{c} -> q{t}"),
                other => format!("{other:?}"),
            };
            let angle = match g.angle {
                Some(Angle::Slot(s)) => format!("theta[{s}]"),
                Some(Angle::Fixed(a)) => format!("{a:.6}"),
                None => "-".to_string(),
            };
            let _ = writeln!(out, "{i:>3}  {:<4}  {wires:<9}  {angle}", g.kind.name());
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Block {
    /// One trainable rotation per listed wire.
    Rot(GateKind, &'static [usize]),
    /// Unparametrized single-qubit gate per listed wire.
    Fixed(GateKind, &'static [usize]),
    /// Two-qubit gates on (control, target) pairs; trainable if the kind is.
    Ent(GateKind, &'static [(usize, usize)]),
}

struct Layout {
    blocks: &'static [Block],
    entangler: EntanglerKind,
    topology: Topology,
}

use Block::{Ent, Fixed, Rot};
use GateKind::{Cnot, Crx, Crz, Cz, Ry, Rx, Rz, H};

const ALL: &[usize] = &[0, 1, 2, 3];
const MIDDLE: &[usize] = &[1, 2];
const LINEAR: &[(usize, usize)] = &[(3, 2), (2, 1), (1, 0)];
const ALL_TO_ALL: &[(usize, usize)] = &[
    (3, 2),
    (3, 1),
    (3, 0),
    (2, 3),
    (2, 1),
    (2, 0),
    (1, 3),
    (1, 2),
    (1, 0),
    (0, 3),
    (0, 2),
    (0, 1),
];
const PAIRS_OUTER: &[(usize, usize)] = &[(1, 0), (3, 2)];
const PAIR_INNER: &[(usize, usize)] = &[(2, 1)];
const CIRCULAR: &[(usize, usize)] = &[(3, 0), (2, 3), (1, 2), (0, 1)];
const SHIFTED: &[(usize, usize)] = &[(3, 2), (0, 3), (1, 0), (2, 1)];
/// Pairwise order: the last two gates of the linear chain swapped relative to
/// the chain of circuits 3 and 4.
const PAIRWISE: &[(usize, usize)] = &[(1, 0), (3, 2), (2, 1)];

const fn layout(
    blocks: &'static [Block],
    entangler: EntanglerKind,
    topology: Topology,
) -> Layout {
    Layout {
        blocks,
        entangler,
        topology,
    }
}

static LAYOUTS: [Layout; NUM_CIRCUITS] = [
    // 1
    layout(&[Rot(Rx, ALL), Rot(Rz, ALL)], EntanglerKind::None, Topology::None),
    // 2
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Cnot, LINEAR)],
        EntanglerKind::Cnot,
        Topology::Linear,
    ),
    // 3
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Crz, LINEAR)],
        EntanglerKind::Crz,
        Topology::Linear,
    ),
    // 4
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Crx, LINEAR)],
        EntanglerKind::Crx,
        Topology::Linear,
    ),
    // 5
    layout(
        &[
            Rot(Rx, ALL),
            Rot(Rz, ALL),
            Ent(Crz, ALL_TO_ALL),
            Rot(Rx, ALL),
            Rot(Rz, ALL),
        ],
        EntanglerKind::Crz,
        Topology::AllToAll,
    ),
    // 6
    layout(
        &[
            Rot(Rx, ALL),
            Rot(Rz, ALL),
            Ent(Crx, ALL_TO_ALL),
            Rot(Rx, ALL),
            Rot(Rz, ALL),
        ],
        EntanglerKind::Crx,
        Topology::AllToAll,
    ),
    // 7
    layout(
        &[
            Rot(Rx, ALL),
            Rot(Rz, ALL),
            Ent(Crz, PAIRS_OUTER),
            Rot(Rx, ALL),
            Rot(Rz, ALL),
            Ent(Crz, PAIR_INNER),
        ],
        EntanglerKind::Crz,
        Topology::Pairwise,
    ),
    // 8
    layout(
        &[
            Rot(Rx, ALL),
            Rot(Rz, ALL),
            Ent(Crx, PAIRS_OUTER),
            Rot(Rx, ALL),
            Rot(Rz, ALL),
            Ent(Crx, PAIR_INNER),
        ],
        EntanglerKind::Crx,
        Topology::Pairwise,
    ),
    // 9
    layout(
        &[Fixed(H, ALL), Ent(Cz, LINEAR), Rot(Rx, ALL)],
        EntanglerKind::Cz,
        Topology::Linear,
    ),
    // 10
    layout(
        &[Rot(Ry, ALL), Ent(Cz, CIRCULAR), Rot(Ry, ALL)],
        EntanglerKind::Cz,
        Topology::Circular,
    ),
    // 11
    layout(
        &[
            Rot(Ry, ALL),
            Rot(Rz, ALL),
            Ent(Cnot, PAIRS_OUTER),
            Rot(Ry, MIDDLE),
            Rot(Rz, MIDDLE),
            Ent(Cnot, PAIR_INNER),
        ],
        EntanglerKind::Cnot,
        Topology::Pairwise,
    ),
    // 12
    layout(
        &[
            Rot(Ry, ALL),
            Rot(Rz, ALL),
            Ent(Cz, PAIRS_OUTER),
            Rot(Ry, MIDDLE),
            Rot(Rz, MIDDLE),
            Ent(Cz, PAIR_INNER),
        ],
        EntanglerKind::Cz,
        Topology::Pairwise,
    ),
    // 13
    layout(
        &[
            Rot(Ry, ALL),
            Ent(Crz, CIRCULAR),
            Rot(Ry, ALL),
            Ent(Crz, SHIFTED),
        ],
        EntanglerKind::Crz,
        Topology::ShiftedCircularAlternating,
    ),
    // 14
    layout(
        &[
            Rot(Ry, ALL),
            Ent(Crx, CIRCULAR),
            Rot(Ry, ALL),
            Ent(Crx, SHIFTED),
        ],
        EntanglerKind::Crx,
        Topology::ShiftedCircularAlternating,
    ),
    // 15
    layout(
        &[
            Rot(Ry, ALL),
            Ent(Cnot, CIRCULAR),
            Rot(Ry, ALL),
            Ent(Cnot, SHIFTED),
        ],
        EntanglerKind::Cnot,
        Topology::ShiftedCircularAlternating,
    ),
    // 16
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Crz, PAIRWISE)],
        EntanglerKind::Crz,
        Topology::Pairwise,
    ),
    // 17
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Crx, PAIRWISE)],
        EntanglerKind::Crx,
        Topology::Pairwise,
    ),
    // 18
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Crz, CIRCULAR)],
        EntanglerKind::Crz,
        Topology::Circular,
    ),
    // 19
    layout(
        &[Rot(Rx, ALL), Rot(Rz, ALL), Ent(Crx, CIRCULAR)],
        EntanglerKind::Crx,
        Topology::Circular,
    ),
];

fn check_id(id: usize) -> Result<()> {
    if (1..=NUM_CIRCUITS).contains(&id) {
        Ok(())
    } else {
        Err(Error::UnknownCircuit(id))
    }
}

/// Single-layer template for benchmark circuit `id` (1..=19).
pub fn benchmark_circuit(id: usize) -> Result<CircuitTemplate> {
    check_id(id)?;
    let layout = &LAYOUTS[id - 1];
    let mut gates = Vec::new();
    let mut slot = 0;
    let mut next_slot = || {
        slot += 1;
        Some(Angle::Slot(slot - 1))
    };
    for block in layout.blocks {
        match *block {
            Rot(kind, wires) => {
                for &w in wires {
                    gates.push(GateOp::single(kind, w, next_slot()));
                }
            }
            Fixed(kind, wires) => {
                for &w in wires {
                    gates.push(GateOp::single(kind, w, None));
                }
            }
            Ent(kind, pairs) => {
                for &(c, t) in pairs {
                    let angle = if kind.is_parametrized() {
                        next_slot()
                    } else {
                        None
                    };
                    gates.push(GateOp::pair(kind, c, t, angle));
                }
            }
        }
    }
    Ok(CircuitTemplate {
        id: TemplateId::Benchmark(id),
        num_qubits: NUM_QUBITS,
        param_count: slot,
        gates,
        entangler: layout.entangler,
        topology: layout.topology,
    })
}

/// All 19 benchmark templates in id order.
pub fn all_benchmark_circuits() -> Vec<CircuitTemplate> {
    (1..=NUM_CIRCUITS)
        .map(|id| benchmark_circuit(id).expect("ids in range"))
        .collect()
}

/// Parameter-free basis embedding of lake state `state_index`: on qubit `i`,
/// `RX(pi*b_i)` then `RZ(pi*b_i)`, with `b_0` the most significant bit.
pub fn embedding_circuit(state_index: usize) -> Result<CircuitTemplate> {
    if state_index >= NUM_STATES {
        return Err(Error::StateOutOfRange(state_index));
    }
    let mut gates = Vec::with_capacity(2 * NUM_QUBITS);
    for q in 0..NUM_QUBITS {
        let bit = (state_index >> (NUM_QUBITS - 1 - q)) & 1;
        let angle = PI * bit as f64;
        gates.push(GateOp::single(Rx, q, Some(Angle::Fixed(angle))));
        gates.push(GateOp::single(Rz, q, Some(Angle::Fixed(angle))));
    }
    Ok(CircuitTemplate {
        id: TemplateId::Embedding(state_index),
        num_qubits: NUM_QUBITS,
        gates,
        param_count: 0,
        entangler: EntanglerKind::None,
        topology: Topology::None,
    })
}

/// Circuit id -> (circuit parameters `P`, hybrid-model weights `W = 2P + 25`).
pub fn param_count_table() -> BTreeMap<usize, (usize, usize)> {
    all_benchmark_circuits()
        .into_iter()
        .map(|c| {
            let id = match c.id {
                TemplateId::Benchmark(id) => id,
                TemplateId::Embedding(_) => unreachable!(),
            };
            (id, (c.param_count, 2 * c.param_count + HEAD_PARAMS))
        })
        .collect()
}
