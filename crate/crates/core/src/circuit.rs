//! Gate lists, the circuit builders used by the search, and depth accounting.
//!
//! A wire is a qubit index of the underlying [`StateVector`], so the top wire
//! of a diagram is the highest index. Registers are laid out bottom-up:
//! input qubits `0..n`, the label qubit `n`, then (when present) the
//! Hadamard-test ancilla `n + 1` and finally the work ancillas of a
//! decomposed multi-controlled X.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::statevec::{StateError, StateVector, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("wire {wire} out of range for a {num_qubits}-qubit circuit")]
    WireOutOfRange { wire: usize, num_qubits: usize },
    #[error("wire {0} used more than once in one gate")]
    DuplicateWire(usize),
    #[error("parameter slot {slot} out of range ({num_params} parameters)")]
    ParamOutOfRange { slot: usize, num_params: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("an ansatz needs at least 2 wires, got {0}")]
    TooFewWires(usize),
    #[error("an ansatz needs at least one layer")]
    NoLayers,
    #[error("builder for {expected:?} called with a {got:?} ansatz")]
    FamilyMismatch { expected: AnsatzFamily, got: AnsatzFamily },
    #[error("oracle needs at least one good element")]
    EmptyOracle,
    #[error("good index {index} out of range for {n} input qubits")]
    GoodIndexOutOfRange { index: usize, n: usize },
    #[error("every element is good; at least one bad element is required")]
    AllGood,
    #[error("input register of {0} qubits is not supported")]
    InvalidInputSize(usize),
    #[error("multi-controlled X decomposition needs at least 2 controls, got {0}")]
    TooFewControls(usize),
    #[error("ansatz spans {ansatz} wires but the oracle register has {register}")]
    WireCountMismatch { ansatz: usize, register: usize },
    #[error("label qubit is not |0⟩ before the oracle")]
    LabelNotZero,
    #[error("gate {0} has no controlled form")]
    NotControllable(&'static str),
    #[error("unknown depth kind `{0}`")]
    UnknownDepthKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Param(usize),
    Fixed(f64),
}

impl Angle {
    #[inline]
    fn resolve(self, params: &[f64]) -> f64 {
        match self {
            Angle::Param(slot) => params[slot],
            Angle::Fixed(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: Angle },
    Cry { control: usize, target: usize, angle: Angle },
    H(usize),
    X(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
    Cz { control: usize, target: usize },
    Toffoli { c1: usize, c2: usize, target: usize },
    Mcx { controls: Vec<usize>, target: usize },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::Ry { .. } => "ry",
            Gate::Cry { .. } => "cry",
            Gate::H(_) => "h",
            Gate::X(_) => "x",
            Gate::Z(_) => "z",
            Gate::Cnot { .. } => "cnot",
            Gate::Cz { .. } => "cz",
            Gate::Toffoli { .. } => "toffoli",
            Gate::Mcx { .. } => "mcx",
        }
    }

    /// Wires in the order controls first, target last.
    pub fn wires(&self) -> Vec<usize> {
        match self {
            Gate::Ry { qubit, .. } | Gate::H(qubit) | Gate::X(qubit) | Gate::Z(qubit) => vec![*qubit],
            Gate::Cry { control, target, .. }
            | Gate::Cnot { control, target }
            | Gate::Cz { control, target } => vec![*control, *target],
            Gate::Toffoli { c1, c2, target } => vec![*c1, *c2, *target],
            Gate::Mcx { controls, target } => {
                let mut w = controls.clone();
                w.push(*target);
                w
            }
        }
    }

    pub fn angle(&self) -> Option<Angle> {
        match self {
            Gate::Ry { angle, .. } | Gate::Cry { angle, .. } => Some(*angle),
            _ => None,
        }
    }

    pub fn param_slot(&self) -> Option<usize> {
        match self.angle() {
            Some(Angle::Param(slot)) => Some(slot),
            _ => None,
        }
    }

    /// The same gate with one more control wire.
    pub fn controlled(&self, control: usize) -> Result<Gate, CircuitError> {
        Ok(match self {
            Gate::Ry { qubit, angle } => Gate::Cry { control, target: *qubit, angle: *angle },
            Gate::X(target) => Gate::Cnot { control, target: *target },
            Gate::Z(target) => Gate::Cz { control, target: *target },
            Gate::Cnot { control: c, target } => Gate::Toffoli { c1: control, c2: *c, target: *target },
            Gate::Toffoli { c1, c2, target } => Gate::Mcx { controls: vec![control, *c1, *c2], target: *target },
            Gate::Mcx { controls, target } => {
                let mut cs = Vec::with_capacity(controls.len() + 1);
                cs.push(control);
                cs.extend_from_slice(controls);
                Gate::Mcx { controls: cs, target: *target }
            }
            other => return Err(CircuitError::NotControllable(other.name())),
        })
    }

    fn apply_signed(&self, state: &mut StateVector, params: &[f64], sign: f64) -> Result<(), StateError> {
        match self {
            Gate::Ry { qubit, angle } => state.apply_ry(*qubit, sign * angle.resolve(params)),
            Gate::Cry { control, target, angle } => state.apply_cry(*control, *target, sign * angle.resolve(params)),
            Gate::H(q) => state.apply_h(*q),
            Gate::X(q) => state.apply_x(*q),
            Gate::Z(q) => state.apply_z(*q),
            Gate::Cnot { control, target } => state.apply_cnot(*control, *target),
            Gate::Cz { control, target } => state.apply_cz(*control, *target),
            Gate::Toffoli { c1, c2, target } => state.apply_toffoli(*c1, *c2, *target),
            Gate::Mcx { controls, target } => state.apply_mcx(controls, *target),
        }
    }

    pub fn apply(&self, state: &mut StateVector, params: &[f64]) -> Result<(), StateError> {
        self.apply_signed(state, params, 1.0)
    }

    /// Applies the inverse gate. Only rotations differ from their inverse.
    pub fn apply_inverse(&self, state: &mut StateVector, params: &[f64]) -> Result<(), StateError> {
        self.apply_signed(state, params, -1.0)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        for w in self.wires() {
            write!(f, " {w}")?;
        }
        match self.angle() {
            Some(Angle::Param(slot)) => write!(f, " [{slot}]"),
            Some(Angle::Fixed(a)) => write!(f, " ({a})"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    num_params: usize,
    gates: Vec<Gate>,
    stages: Vec<(String, usize)>,
    // Gate positions that no later gate may be scheduled before.
    barriers: Vec<usize>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self::with_params(num_qubits, 0)
    }

    pub fn with_params(num_qubits: usize, num_params: usize) -> Self {
        Self { num_qubits, num_params, gates: Vec::new(), stages: Vec::new(), barriers: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_params(&self) -> usize {
        self.num_params
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

    /// Number of gates with the given [`Gate::name`].
    pub fn count(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.name() == name).count()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self, CircuitError> {
        let wires = gate.wires();
        for (i, &w) in wires.iter().enumerate() {
            if w >= self.num_qubits {
                return Err(CircuitError::WireOutOfRange { wire: w, num_qubits: self.num_qubits });
            }
            if wires[..i].contains(&w) {
                return Err(CircuitError::DuplicateWire(w));
            }
        }
        if let Some(slot) = gate.param_slot() {
            if slot >= self.num_params {
                return Err(CircuitError::ParamOutOfRange { slot, num_params: self.num_params });
            }
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Appends every gate of `other`, whose wires map onto the same indices.
    /// Barriers of `other` are carried over.
    pub fn extend_from(&mut self, other: &Circuit) -> Result<&mut Self, CircuitError> {
        let offset = self.gates.len();
        for g in &other.gates {
            self.push(g.clone())?;
        }
        self.barriers.extend(other.barriers.iter().map(|b| b + offset));
        Ok(self)
    }

    /// Depth-only fence: gates pushed after it are scheduled after every
    /// gate before it. Simulation ignores it.
    pub fn barrier(&mut self) {
        if self.barriers.last() != Some(&self.gates.len()) {
            self.barriers.push(self.gates.len());
        }
    }

    /// Records that a named stage starts at the current gate position.
    pub fn mark_stage(&mut self, name: &str) {
        self.stages.push((name.to_string(), self.gates.len()));
    }

    /// Gate ranges of the recorded stages.
    pub fn stages(&self) -> Vec<(&str, Range<usize>)> {
        self.stages
            .iter()
            .enumerate()
            .map(|(i, (name, start))| {
                let end = self.stages.get(i + 1).map_or(self.gates.len(), |s| s.1);
                (name.as_str(), *start..end)
            })
            .collect()
    }

    fn check_apply(&self, state: &StateVector, params: &[f64]) -> Result<(), CircuitError> {
        if params.len() != self.num_params {
            return Err(CircuitError::ParamCount { expected: self.num_params, got: params.len() });
        }
        if state.num_qubits() != self.num_qubits {
            return Err(StateError::DimensionMismatch { left: state.num_qubits(), right: self.num_qubits }.into());
        }
        Ok(())
    }

    pub fn apply(&self, state: &mut StateVector, params: &[f64]) -> Result<(), CircuitError> {
        self.apply_range(state, params, 0..self.gates.len())
    }

    /// Applies gates `range` only; used for staged execution.
    pub fn apply_range(&self, state: &mut StateVector, params: &[f64], range: Range<usize>) -> Result<(), CircuitError> {
        self.check_apply(state, params)?;
        for g in &self.gates[range] {
            g.apply(state, params)?;
        }
        Ok(())
    }

    pub fn apply_inverse(&self, state: &mut StateVector, params: &[f64]) -> Result<(), CircuitError> {
        self.check_apply(state, params)?;
        for g in self.gates.iter().rev() {
            g.apply_inverse(state, params)?;
        }
        Ok(())
    }

    /// Layer count under greedy as-soon-as-possible scheduling: each gate
    /// starts one layer after the latest gate on any of its wires, and no
    /// earlier than the deepest gate before a barrier.
    pub fn structural_depth(&self) -> usize {
        let mut finish = vec![0usize; self.num_qubits];
        let mut depth = 0;
        let mut fences = self.barriers.iter().peekable();
        for (i, g) in self.gates.iter().enumerate() {
            while fences.next_if(|&&b| b <= i).is_some() {
                finish.fill(depth);
            }
            let wires = g.wires();
            let layer = 1 + wires.iter().map(|&w| finish[w]).max().unwrap_or(0);
            for w in wires {
                finish[w] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    /// Text listing, one gate per line, followed by a depth report line.
    pub fn dump(&self, formula: Option<usize>) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let _ = writeln!(out, "{g}");
        }
        let formula = formula.map_or_else(|| "n/a".to_string(), |d| d.to_string());
        let _ = writeln!(out, "structural={} formula={}", self.structural_depth(), formula);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnsatzFamily {
    /// Ry column followed by a CNOT ladder down adjacent wires.
    TypeI,
    /// Brick pattern: Ry, even-pair CNOTs, Ry, odd-pair CNOTs, Ry.
    TypeII,
}

impl FromStr for AnsatzFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "type-i" | "typei" | "i" | "1" => Ok(AnsatzFamily::TypeI),
            "type2" | "type-ii" | "typeii" | "ii" | "2" => Ok(AnsatzFamily::TypeII),
            _ => Err(format!("unknown ansatz family `{s}` (expected type1 or type2)")),
        }
    }
}

impl fmt::Display for AnsatzFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnsatzFamily::TypeI => "type1",
            AnsatzFamily::TypeII => "type2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnsatzSpec {
    family: AnsatzFamily,
    layers: usize,
    wires: usize,
}

impl AnsatzSpec {
    pub fn new(family: AnsatzFamily, layers: usize, wires: usize) -> Result<Self, CircuitError> {
        if wires < 2 {
            return Err(CircuitError::TooFewWires(wires));
        }
        if layers == 0 {
            return Err(CircuitError::NoLayers);
        }
        Ok(Self { family, layers, wires })
    }

    pub fn family(&self) -> AnsatzFamily {
        self.family
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn wires(&self) -> usize {
        self.wires
    }

    pub fn params_per_layer(&self) -> usize {
        match self.family {
            AnsatzFamily::TypeI => self.wires,
            AnsatzFamily::TypeII => 3 * self.wires,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers * self.params_per_layer()
    }

    // Qubit index of the i-th wire counted from the top.
    fn wire(&self, i: usize) -> usize {
        self.wires - 1 - i
    }

    fn push_ry_column(&self, c: &mut Circuit, first_slot: usize) -> Result<(), CircuitError> {
        for i in 0..self.wires {
            c.push(Gate::Ry { qubit: self.wire(i), angle: Angle::Param(first_slot + i) })?;
        }
        Ok(())
    }

    fn push_pairs(&self, c: &mut Circuit, first: usize, step: usize) -> Result<(), CircuitError> {
        let mut i = first;
        while i + 1 < self.wires {
            c.push(Gate::Cnot { control: self.wire(i), target: self.wire(i + 1) })?;
            i += step;
        }
        Ok(())
    }
}

pub fn build_type1_ansatz(spec: &AnsatzSpec) -> Result<Circuit, CircuitError> {
    if spec.family != AnsatzFamily::TypeI {
        return Err(CircuitError::FamilyMismatch { expected: AnsatzFamily::TypeI, got: spec.family });
    }
    let mut c = Circuit::with_params(spec.wires, spec.num_params());
    for layer in 0..spec.layers {
        c.barrier();
        spec.push_ry_column(&mut c, layer * spec.wires)?;
        spec.push_pairs(&mut c, 0, 1)?;
    }
    Ok(c)
}

pub fn build_type2_ansatz(spec: &AnsatzSpec) -> Result<Circuit, CircuitError> {
    if spec.family != AnsatzFamily::TypeII {
        return Err(CircuitError::FamilyMismatch { expected: AnsatzFamily::TypeII, got: spec.family });
    }
    let mut c = Circuit::with_params(spec.wires, spec.num_params());
    for layer in 0..spec.layers {
        let base = layer * 3 * spec.wires;
        c.barrier();
        spec.push_ry_column(&mut c, base)?;
        spec.push_pairs(&mut c, 0, 2)?;
        spec.push_ry_column(&mut c, base + spec.wires)?;
        spec.push_pairs(&mut c, 1, 2)?;
        spec.push_ry_column(&mut c, base + 2 * spec.wires)?;
    }
    Ok(c)
}

pub fn build_ansatz(spec: &AnsatzSpec) -> Result<Circuit, CircuitError> {
    match spec.family {
        AnsatzFamily::TypeI => build_type1_ansatz(spec),
        AnsatzFamily::TypeII => build_type2_ansatz(spec),
    }
}

/// The ansatz with every gate controlled by an extra most-significant wire
/// (qubit `spec.wires()`): Ry becomes CRy and CNOT becomes Toffoli.
pub fn build_controlled_ansatz(spec: &AnsatzSpec) -> Result<Circuit, CircuitError> {
    let plain = build_ansatz(spec)?;
    let control = spec.wires;
    let mut c = Circuit::with_params(spec.wires + 1, plain.num_params());
    for g in plain.gates() {
        c.push(g.controlled(control)?)?;
    }
    c.barriers = plain.barriers;
    Ok(c)
}

/// The set of good elements over `n` input qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSpec {
    n: usize,
    good: Vec<usize>,
}

impl OracleSpec {
    pub fn new(n: usize, good: impl IntoIterator<Item = usize>) -> Result<Self, CircuitError> {
        if n == 0 || n >= MAX_QUBITS {
            return Err(CircuitError::InvalidInputSize(n));
        }
        let mut good: Vec<usize> = good.into_iter().collect();
        good.sort_unstable();
        good.dedup();
        if good.is_empty() {
            return Err(CircuitError::EmptyOracle);
        }
        let size = 1usize << n;
        if let Some(&bad) = good.iter().find(|&&g| g >= size) {
            return Err(CircuitError::GoodIndexOutOfRange { index: bad, n });
        }
        if good.len() == size {
            return Err(CircuitError::AllGood);
        }
        Ok(Self { n, good })
    }

    /// The `k` highest indices.
    pub fn last_k(n: usize, k: usize) -> Result<Self, CircuitError> {
        if n == 0 || n >= MAX_QUBITS {
            return Err(CircuitError::InvalidInputSize(n));
        }
        let size = 1usize << n;
        Self::new(n, size.saturating_sub(k)..size)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted good indices.
    pub fn good(&self) -> &[usize] {
        &self.good
    }

    pub fn is_good(&self, x: usize) -> bool {
        self.good.binary_search(&x).is_ok()
    }

    pub fn label_qubit(&self) -> usize {
        self.n
    }

    /// Basis indices of the good elements once the label is set.
    pub fn labelled_indices(&self) -> Vec<usize> {
        self.good.iter().map(|g| (1usize << self.n) + g).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleRealization {
    /// One multi-controlled X gate per good element.
    #[default]
    Mcx,
    /// Toffoli ladder with `n - 1` work ancillas.
    Decomposed,
}

impl FromStr for OracleRealization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mcx" => Ok(Self::Mcx),
            "decomposed" | "toffoli" => Ok(Self::Decomposed),
            _ => Err(format!("unknown oracle realization `{s}` (expected mcx or decomposed)")),
        }
    }
}

fn work_ancillas(n: usize, realization: OracleRealization) -> usize {
    match realization {
        OracleRealization::Decomposed if n >= 2 => n - 1,
        _ => 0,
    }
}

/// Appends the V-shaped ladder computing the AND of `controls` into `target`:
/// `n - 1` Toffolis accumulate partial products into `ancillas`, one CNOT
/// copies the last one onto `target`, and the Toffolis are undone in reverse.
fn push_decomposed_mcx(c: &mut Circuit, controls: &[usize], target: usize, ancillas: &[usize]) -> Result<(), CircuitError> {
    let n = controls.len();
    if n < 2 {
        return Err(CircuitError::TooFewControls(n));
    }
    let mut ladder = Vec::with_capacity(n - 1);
    ladder.push(Gate::Toffoli { c1: controls[0], c2: controls[1], target: ancillas[0] });
    for i in 2..n {
        ladder.push(Gate::Toffoli { c1: controls[i], c2: ancillas[i - 2], target: ancillas[i - 1] });
    }
    for g in &ladder {
        c.push(g.clone())?;
    }
    c.push(Gate::Cnot { control: ancillas[n - 2], target })?;
    for g in ladder.into_iter().rev() {
        c.push(g)?;
    }
    Ok(())
}

/// `C^n(X)` on `n` controls (qubits `0..n`), target `n` and work ancillas
/// `n + 1 .. 2n`, which start and end in |0⟩.
pub fn decompose_mcx(n: usize) -> Result<Circuit, CircuitError> {
    if n < 2 {
        return Err(CircuitError::TooFewControls(n));
    }
    let mut c = Circuit::new(2 * n);
    let controls: Vec<usize> = (0..n).collect();
    let ancillas: Vec<usize> = (n + 1..2 * n).collect();
    push_decomposed_mcx(&mut c, &controls, n, &ancillas)?;
    Ok(c)
}

fn push_oracle(c: &mut Circuit, spec: &OracleSpec, realization: OracleRealization, ancilla_base: usize) -> Result<(), CircuitError> {
    let n = spec.n;
    let controls: Vec<usize> = (0..n).collect();
    let ancillas: Vec<usize> = (ancilla_base..ancilla_base + work_ancillas(n, realization)).collect();
    for &g in &spec.good {
        let flips: Vec<usize> = (0..n).filter(|b| g >> b & 1 == 0).collect();
        for &b in &flips {
            c.push(Gate::X(b))?;
        }
        if ancillas.is_empty() {
            c.push(Gate::Mcx { controls: controls.clone(), target: spec.label_qubit() })?;
        } else {
            push_decomposed_mcx(c, &controls, spec.label_qubit(), &ancillas)?;
        }
        for &b in &flips {
            c.push(Gate::X(b))?;
        }
    }
    Ok(())
}

/// Oracle on `n + 1` wires using one multi-controlled X per good element.
pub fn build_oracle(spec: &OracleSpec) -> Result<Circuit, CircuitError> {
    build_oracle_with(spec, OracleRealization::Mcx)
}

/// Oracle with the chosen realization. A decomposed oracle adds `n - 1` work
/// ancillas above the label qubit.
pub fn build_oracle_with(spec: &OracleSpec, realization: OracleRealization) -> Result<Circuit, CircuitError> {
    let mut c = Circuit::new(spec.n + 1 + work_ancillas(spec.n, realization));
    push_oracle(&mut c, spec, realization, spec.n + 1)?;
    Ok(c)
}

/// Oracle action as an index permutation: swaps amplitudes `g` and `2^n + g`
/// for every good `g`. The label qubit must be |0⟩.
pub fn apply_oracle_semantic(state: &mut StateVector, spec: &OracleSpec) -> Result<(), CircuitError> {
    if state.num_qubits() != spec.n + 1 {
        return Err(StateError::DimensionMismatch { left: state.num_qubits(), right: spec.n + 1 }.into());
    }
    let half = 1usize << spec.n;
    if state.amplitudes()[half..].iter().any(|a| a.abs() > 1e-12) {
        return Err(CircuitError::LabelNotZero);
    }
    for &g in &spec.good {
        state.swap_amplitudes(g, half + g);
    }
    Ok(())
}

/// Options shared by the three top-level search circuits.
#[derive(Debug, Clone, Copy, Default)]
pub struct CircuitOptions {
    pub oracle: OracleRealization,
    /// Prepend `H^⊗n` on the inputs. Off by default: the simulator injects
    /// the initial state directly.
    pub uniform_prep: bool,
}

fn check_register(oracle: &OracleSpec, ansatz: &AnsatzSpec) -> Result<(), CircuitError> {
    if ansatz.wires != oracle.n + 1 {
        return Err(CircuitError::WireCountMismatch { ansatz: ansatz.wires, register: oracle.n + 1 });
    }
    Ok(())
}

fn build_hadamard_test(oracle: &OracleSpec, ansatz: &AnsatzSpec, opts: CircuitOptions, with_z: bool) -> Result<Circuit, CircuitError> {
    check_register(oracle, ansatz)?;
    let n = oracle.n;
    let anc = n + 1;
    let mut c = Circuit::with_params(n + 2 + work_ancillas(n, opts.oracle), ansatz.num_params());
    if opts.uniform_prep {
        c.mark_stage("prep");
        for q in 0..n {
            c.push(Gate::H(q))?;
        }
    }
    c.mark_stage("oracle");
    push_oracle(&mut c, oracle, opts.oracle, n + 2)?;
    c.mark_stage("hadamard-test");
    c.push(Gate::H(anc))?;
    c.extend_from(&build_controlled_ansatz(ansatz)?)?;
    if with_z {
        c.push(Gate::Cz { control: anc, target: oracle.label_qubit() })?;
    }
    c.push(Gate::H(anc))?;
    Ok(c)
}

/// Hadamard test whose ancilla (qubit `n + 1`) has `⟨Z⟩ = ⟨ψ1|U(θ)|ψ1⟩`.
pub fn build_overlap_test(oracle: &OracleSpec, ansatz: &AnsatzSpec, opts: CircuitOptions) -> Result<Circuit, CircuitError> {
    build_hadamard_test(oracle, ansatz, opts, false)
}

/// As [`build_overlap_test`] with a controlled Z on the label after the controlled
/// ansatz, so the ancilla measures `⟨ψ1|(Z ⊗ I)U(θ)|ψ1⟩`.
pub fn build_label_test(oracle: &OracleSpec, ansatz: &AnsatzSpec, opts: CircuitOptions) -> Result<Circuit, CircuitError> {
    build_hadamard_test(oracle, ansatz, opts, true)
}

/// Oracle followed by the ansatz; the circuit run once with the final parameters.
pub fn build_search_circuit(oracle: &OracleSpec, ansatz: &AnsatzSpec, opts: CircuitOptions) -> Result<Circuit, CircuitError> {
    check_register(oracle, ansatz)?;
    let n = oracle.n;
    let mut c = Circuit::with_params(n + 1 + work_ancillas(n, opts.oracle), ansatz.num_params());
    if opts.uniform_prep {
        c.mark_stage("prep");
        for q in 0..n {
            c.push(Gate::H(q))?;
        }
    }
    c.mark_stage("oracle");
    push_oracle(&mut c, oracle, opts.oracle, n + 1)?;
    c.mark_stage("ansatz");
    c.extend_from(&build_ansatz(ansatz)?)?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    Ansatz,
    ControlledAnsatz,
    Oracle,
    OverlapTest,
    LabelTest,
    Search,
    GroverIteration,
}

impl FromStr for DepthKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ansatz" => DepthKind::Ansatz,
            "controlled-ansatz" | "controlled" => DepthKind::ControlledAnsatz,
            "oracle" => DepthKind::Oracle,
            "overlap-test" => DepthKind::OverlapTest,
            "label-test" => DepthKind::LabelTest,
            "search" => DepthKind::Search,
            "grover-iteration" | "grover" => DepthKind::GroverIteration,
            _ => return Err(CircuitError::UnknownDepthKind(s.to_string())),
        })
    }
}

/// Depth of one ansatz layer, as counted by hand.
fn layer_depth(family: AnsatzFamily, n: usize) -> usize {
    match family {
        AnsatzFamily::TypeI => n + 1,
        AnsatzFamily::TypeII => 5,
    }
}

/// Depth of one controlled ansatz layer. Type-I gates all share the control
/// and serialize (`2n + 1`). Type-II reports the quoted `3n + 3`; the brick
/// layout built here serializes to `4n + 3` under ASAP layering.
fn controlled_layer_depth(family: AnsatzFamily, n: usize) -> usize {
    match family {
        AnsatzFamily::TypeI => 2 * n + 1,
        AnsatzFamily::TypeII => 3 * n + 3,
    }
}

/// Depth of one Grover iteration. The Hadamards beside `C^{n-1}(X)` share a
/// layer with the neighbouring Toffolis except for `n = 2, 3`, where there
/// is no Toffoli to share with.
pub fn grover_iteration_depth(n: usize) -> usize {
    match n {
        2 | 3 => 2 * n + 3,
        _ => 2 * n + 1,
    }
}

/// Closed-form depth of the named circuit for `n` input qubits. The oracle is
/// counted as the decomposed `C^n(X)` (depth `2n - 1`); the Hadamard-test
/// circuits add one layer for the closing ancilla Hadamard (the opening one
/// runs beside the oracle) and the label test one more for the controlled Z.
pub fn formula_depth(kind: DepthKind, n: usize, family: AnsatzFamily, layers: usize) -> Result<usize, CircuitError> {
    if n == 0 {
        return Err(CircuitError::InvalidInputSize(n));
    }
    if layers == 0 {
        return Err(CircuitError::NoLayers);
    }
    let oracle = 2 * n - 1;
    let ansatz = layers * layer_depth(family, n);
    let controlled = layers * controlled_layer_depth(family, n);
    Ok(match kind {
        DepthKind::Ansatz => ansatz,
        DepthKind::ControlledAnsatz => controlled,
        DepthKind::Oracle => oracle,
        DepthKind::OverlapTest => oracle + controlled + 1,
        DepthKind::LabelTest => oracle + controlled + 2,
        DepthKind::Search => oracle + ansatz,
        DepthKind::GroverIteration => {
            if n < 2 {
                return Err(CircuitError::InvalidInputSize(n));
            }
            grover_iteration_depth(n)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: AnsatzFamily, layers: usize, wires: usize) -> AnsatzSpec {
        AnsatzSpec::new(family, layers, wires).unwrap()
    }

    #[test]
    fn type1_examples() {
        let c = build_type1_ansatz(&spec(AnsatzFamily::TypeI, 1, 3)).unwrap();
        assert_eq!(c.structural_depth(), 3);
        assert_eq!((c.count("ry"), c.count("cnot"), c.num_params()), (3, 2, 3));

        let c = build_type1_ansatz(&spec(AnsatzFamily::TypeI, 3, 3)).unwrap();
        assert_eq!((c.structural_depth(), c.num_params()), (9, 9));

        let c = build_type1_ansatz(&spec(AnsatzFamily::TypeI, 1, 2)).unwrap();
        assert_eq!((c.structural_depth(), c.count("ry"), c.count("cnot")), (2, 2, 1));
    }

    #[test]
    fn type1_ladder_runs_top_down() {
        let c = build_type1_ansatz(&spec(AnsatzFamily::TypeI, 1, 3)).unwrap();
        let cnots: Vec<_> = c.gates().iter().filter(|g| g.name() == "cnot").cloned().collect();
        assert_eq!(cnots, vec![Gate::Cnot { control: 2, target: 1 }, Gate::Cnot { control: 1, target: 0 }]);
    }

    #[test]
    fn type2_examples() {
        let c = build_type2_ansatz(&spec(AnsatzFamily::TypeII, 2, 3)).unwrap();
        assert_eq!(c.structural_depth(), 10);
        let c = build_type2_ansatz(&spec(AnsatzFamily::TypeII, 1, 3)).unwrap();
        assert_eq!(c.structural_depth(), 5);
        assert_eq!(c.num_params(), 9);
        let c = build_type2_ansatz(&spec(AnsatzFamily::TypeII, 1, 2)).unwrap();
        assert_eq!((c.count("ry"), c.count("cnot")), (6, 1));
    }

    #[test]
    fn builder_errors() {
        assert_eq!(AnsatzSpec::new(AnsatzFamily::TypeI, 1, 1), Err(CircuitError::TooFewWires(1)));
        assert_eq!(AnsatzSpec::new(AnsatzFamily::TypeI, 0, 3), Err(CircuitError::NoLayers));
        assert!(matches!(
            build_type1_ansatz(&spec(AnsatzFamily::TypeII, 1, 3)),
            Err(CircuitError::FamilyMismatch { .. })
        ));
        assert!(matches!(
            build_type2_ansatz(&spec(AnsatzFamily::TypeI, 1, 3)),
            Err(CircuitError::FamilyMismatch { .. })
        ));
    }

    #[test]
    fn controlled_depths() {
        let c = build_controlled_ansatz(&spec(AnsatzFamily::TypeI, 1, 3)).unwrap();
        assert_eq!(c.structural_depth(), 5);
        assert_eq!(c.num_qubits(), 4);
        let c = build_controlled_ansatz(&spec(AnsatzFamily::TypeI, 3, 9)).unwrap();
        assert_eq!(c.structural_depth(), 51);
        // Brick layout: 3(n+1) CRy + n Toffoli per layer, all on the control.
        let c = build_controlled_ansatz(&spec(AnsatzFamily::TypeII, 2, 9)).unwrap();
        assert_eq!(c.structural_depth(), 2 * (4 * 8 + 3));
        assert_eq!(formula_depth(DepthKind::ControlledAnsatz, 8, AnsatzFamily::TypeII, 2).unwrap(), 54);
    }

    #[test]
    fn oracle_specs() {
        assert_eq!(OracleSpec::new(2, []), Err(CircuitError::EmptyOracle));
        assert_eq!(OracleSpec::new(2, [4]), Err(CircuitError::GoodIndexOutOfRange { index: 4, n: 2 }));
        assert_eq!(OracleSpec::new(1, [0, 1]), Err(CircuitError::AllGood));
        let o = OracleSpec::new(3, [6, 5, 6]).unwrap();
        assert_eq!(o.good(), &[5, 6]);
        assert!(o.is_good(5) && !o.is_good(4));
        assert_eq!(OracleSpec::last_k(2, 3).unwrap().good(), &[1, 2, 3]);
    }

    #[test]
    fn oracle_circuits() {
        let c = build_oracle(&OracleSpec::new(2, [3]).unwrap()).unwrap();
        assert_eq!(c.gates(), &[Gate::Mcx { controls: vec![0, 1], target: 2 }]);
        let mut s = StateVector::new_basis(3, 0b011).unwrap();
        c.apply(&mut s, &[]).unwrap();
        assert_eq!(s.amplitudes()[0b111], 1.0);

        let c = build_oracle(&OracleSpec::new(2, [0]).unwrap()).unwrap();
        assert_eq!((c.count("x"), c.count("mcx")), (4, 1));
        let mut s = StateVector::new_basis(3, 0b000).unwrap();
        c.apply(&mut s, &[]).unwrap();
        assert_eq!(s.amplitudes()[0b100], 1.0);
    }

    #[test]
    fn oracle_moves_goods_to_upper_half() {
        let o = OracleSpec::new(3, [5, 6]).unwrap();
        let mut amps = StateVector::uniform(3).unwrap().into_amplitudes();
        amps.resize(16, 0.0);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        build_oracle(&o).unwrap().apply(&mut s, &[]).unwrap();
        let a = 8f64.sqrt().recip();
        for x in 0..8 {
            let (lo, hi) = (s.amplitudes()[x], s.amplitudes()[8 + x]);
            if o.is_good(x) {
                assert_eq!((lo, hi), (0.0, a));
            } else {
                assert_eq!((lo, hi), (a, 0.0));
            }
        }
    }

    #[test]
    fn semantic_oracle() {
        let o = OracleSpec::new(2, [3]).unwrap();
        let mut amps = vec![0.5; 4];
        amps.resize(8, 0.0);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        apply_oracle_semantic(&mut s, &o).unwrap();
        assert_eq!(s.amplitudes(), &[0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5]);
        // Label already set.
        assert_eq!(apply_oracle_semantic(&mut s, &o), Err(CircuitError::LabelNotZero));

        let o = OracleSpec::new(2, [0, 1, 2]).unwrap();
        let mut amps = vec![0.5; 4];
        amps.resize(8, 0.0);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        apply_oracle_semantic(&mut s, &o).unwrap();
        assert_eq!(s.amplitudes()[..4].iter().filter(|a| **a != 0.0).count(), 1);
    }

    #[test]
    fn decomposition_shape() {
        let c = decompose_mcx(5).unwrap();
        assert_eq!((c.count("toffoli"), c.count("cnot"), c.structural_depth()), (8, 1, 9));
        let c = decompose_mcx(2).unwrap();
        assert_eq!((c.count("toffoli"), c.count("cnot"), c.structural_depth()), (2, 1, 3));
        assert_eq!(decompose_mcx(1), Err(CircuitError::TooFewControls(1)));
    }

    #[test]
    fn decomposition_matches_mcx_n2() {
        let c = decompose_mcx(2).unwrap();
        for x in 0..8usize {
            let mut s = StateVector::new_basis(4, x).unwrap();
            c.apply(&mut s, &[]).unwrap();
            let mut want = StateVector::new_basis(4, x).unwrap();
            want.apply_mcx(&[0, 1], 2).unwrap();
            assert_eq!(s, want, "basis {x}");
        }
    }

    #[test]
    fn formula_depths() {
        let d = |k, n| formula_depth(k, n, AnsatzFamily::TypeI, 3).unwrap();
        assert_eq!(d(DepthKind::LabelTest, 26), 212);
        assert_eq!(d(DepthKind::LabelTest, 8), 68);
        assert_eq!(d(DepthKind::OverlapTest, 8), 67);
        assert_eq!(d(DepthKind::Search, 8), 42);
        assert_eq!(d(DepthKind::ControlledAnsatz, 8), 51);
        assert_eq!(formula_depth(DepthKind::Search, 26, AnsatzFamily::TypeII, 1).unwrap(), 56);
        assert_eq!(d(DepthKind::GroverIteration, 2), 7);
        assert_eq!(d(DepthKind::GroverIteration, 26), 53);
        assert!(formula_depth(DepthKind::Oracle, 0, AnsatzFamily::TypeI, 1).is_err());
        assert_eq!(
            "fig9".parse::<DepthKind>(),
            Err(CircuitError::UnknownDepthKind("fig9".into()))
        );
    }

    #[test]
    fn empty_circuit_depth() {
        assert_eq!(Circuit::new(3).structural_depth(), 0);
    }

    #[test]
    fn push_validation() {
        let mut c = Circuit::with_params(2, 1);
        assert!(matches!(c.push(Gate::H(2)), Err(CircuitError::WireOutOfRange { wire: 2, .. })));
        assert_eq!(c.push(Gate::Cnot { control: 1, target: 1 }).err(), Some(CircuitError::DuplicateWire(1)));
        assert!(matches!(
            c.push(Gate::Ry { qubit: 0, angle: Angle::Param(1) }),
            Err(CircuitError::ParamOutOfRange { slot: 1, .. })
        ));
        assert_eq!(Gate::H(0).controlled(1), Err(CircuitError::NotControllable("h")));
    }

    #[test]
    fn dump_format() {
        let c = build_type1_ansatz(&spec(AnsatzFamily::TypeI, 1, 2)).unwrap();
        let d = formula_depth(DepthKind::Ansatz, 1, AnsatzFamily::TypeI, 1).ok();
        assert_eq!(c.dump(d), "ry 1 [0]\nry 0 [1]\ncnot 1 0\nstructural=2 formula=2\n");
        assert!(Circuit::new(1).dump(None).ends_with("formula=n/a\n"));
    }

    #[test]
    fn search_circuit_stages_and_depth() {
        let o = OracleSpec::new(26, [(1 << 26) - 1]).unwrap();
        let a = spec(AnsatzFamily::TypeII, 1, 27);
        let c = build_search_circuit(&o, &a, CircuitOptions { oracle: OracleRealization::Decomposed, uniform_prep: false }).unwrap();
        assert_eq!(c.count("toffoli"), 50);
        assert_eq!(c.structural_depth(), 56);
        let names: Vec<_> = c.stages().into_iter().map(|s| s.0.to_string()).collect();
        assert_eq!(names, ["oracle", "ansatz"]);
    }
}
