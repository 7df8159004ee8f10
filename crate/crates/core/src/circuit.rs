//! Gates, circuits, two-qubit metrics and the QASM-lite text format.
//!
//! The text format is line oriented:
//!
//! ```text
//! qubits 3
//! # comment
//! h 0
//! cx 0 1
//! swap 1 2
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    S,
    Cx,
    Swap,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::Cx => "cx",
            GateKind::Swap => "swap",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::S => 1,
            GateKind::Cx | GateKind::Swap => 2,
        }
    }
}

/// A gate on physical qubit indices. `Cx(control, target)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Cx(usize, usize),
    Swap(usize, usize),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::S(_) => GateKind::S,
            Gate::Cx(..) => GateKind::Cx,
            Gate::Swap(..) => GateKind::Swap,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cx(..) | Gate::Swap(..))
    }

    /// Qubits touched, in gate order.
    pub fn qubits(&self) -> Qubits {
        match *self {
            Gate::H(q) | Gate::S(q) => Qubits::One(q),
            Gate::Cx(a, b) | Gate::Swap(a, b) => Qubits::Two(a, b),
        }
    }

    pub fn acts_on(&self, q: usize) -> bool {
        match *self {
            Gate::H(a) | Gate::S(a) => a == q,
            Gate::Cx(a, b) | Gate::Swap(a, b) => a == q || b == q,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
            }
        }
        if let Qubits::Two(a, b) = self.qubits() {
            if a == b {
                return Err(Error::DuplicateQubit(self.to_string()));
            }
        }
        Ok(())
    }

    /// Relabel qubits through `map` (old index -> new index).
    pub fn map_qubits(&self, map: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(map(q)),
            Gate::S(q) => Gate::S(map(q)),
            Gate::Cx(a, b) => Gate::Cx(map(a), map(b)),
            Gate::Swap(a, b) => Gate::Swap(map(a), map(b)),
        }
    }

    /// Gate sequence implementing the inverse. S^-1 = S^3; the rest are involutions.
    pub fn inverse(&self) -> Vec<Gate> {
        match *self {
            Gate::S(q) => vec![Gate::S(q); 3],
            g => vec![g],
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H(q) => write!(f, "h {q}"),
            Gate::S(q) => write!(f, "s {q}"),
            Gate::Cx(a, b) => write!(f, "cx {a} {b}"),
            Gate::Swap(a, b) => write!(f, "swap {a} {b}"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Qubits {
    One(usize),
    Two(usize, usize),
}

impl IntoIterator for Qubits {
    type Item = usize;
    type IntoIter = std::iter::Flatten<std::array::IntoIter<Option<usize>, 2>>;

    fn into_iter(self) -> Self::IntoIter {
        match self {
            Qubits::One(a) => [Some(a), None].into_iter().flatten(),
            Qubits::Two(a, b) => [Some(a), Some(b)].into_iter().flatten(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit { n_qubits, gates: Vec::new() }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Circuit { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn count2q(&self) -> usize {
        count2q(&self.gates)
    }

    pub fn depth2q(&self) -> usize {
        depth2q(self.n_qubits, &self.gates)
    }

    /// The inverse circuit: reversed order, each gate inverted.
    pub fn inverse(&self) -> Circuit {
        let gates = self.gates.iter().rev().flat_map(|g| g.inverse()).collect();
        Circuit { n_qubits: self.n_qubits, gates }
    }

    pub fn into_gates(self) -> Vec<Gate> {
        self.gates
    }

    /// Render in QASM-lite.
    pub fn emit(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }

    /// Parse QASM-lite. Errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Circuit> {
        let mut n_qubits: Option<usize> = None;
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap_or_default().to_ascii_lowercase();
            let args = toks
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(line_no, format!("bad qubit index `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let Some(n) = n_qubits else {
                if head != "qubits" || args.len() != 1 {
                    return Err(Error::parse(line_no, "expected `qubits N` header"));
                }
                n_qubits = Some(args[0]);
                continue;
            };
            let gate = match (head.as_str(), args.as_slice()) {
                ("h", [q]) => Gate::H(*q),
                ("s", [q]) => Gate::S(*q),
                ("cx", [a, b]) => Gate::Cx(*a, *b),
                ("swap", [a, b]) => Gate::Swap(*a, *b),
                ("h" | "s" | "cx" | "swap", _) => {
                    return Err(Error::parse(line_no, format!("wrong number of qubits for `{head}`")))
                }
                ("qubits", _) => return Err(Error::parse(line_no, "duplicate `qubits` header")),
                _ => return Err(Error::parse(line_no, format!("unknown gate `{head}`"))),
            };
            gate.validate(n).map_err(|e| Error::parse(line_no, e.to_string()))?;
            gates.push(gate);
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::parse(1, "missing `qubits N` header"))?;
        Ok(Circuit { n_qubits, gates })
    }
}

pub fn count2q(gates: &[Gate]) -> usize {
    gates.iter().filter(|g| g.is_two_qubit()).count()
}

/// As-soon-as-possible layering over two-qubit gates. Single-qubit gates carry
/// weight zero: they never open a layer of their own.
pub fn depth2q(n_qubits: usize, gates: &[Gate]) -> usize {
    let mut tracker = DepthTracker::new(n_qubits);
    for g in gates {
        tracker.push(g);
    }
    tracker.depth()
}

/// Incremental `depth2q`.
#[derive(Clone, Debug)]
pub struct DepthTracker {
    level: Vec<usize>,
    depth: usize,
}

impl DepthTracker {
    pub fn new(n_qubits: usize) -> Self {
        DepthTracker { level: vec![0; n_qubits], depth: 0 }
    }

    /// Returns the new depth.
    pub fn push(&mut self, gate: &Gate) -> usize {
        if let Qubits::Two(a, b) = gate.qubits() {
            let l = self.level[a].max(self.level[b]) + 1;
            self.level[a] = l;
            self.level[b] = l;
            self.depth = self.depth.max(l);
        }
        self.depth
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}
