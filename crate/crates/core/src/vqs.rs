//! The variational search loop.
//!
//! The input register holds `ψ0` over `n` qubits. The oracle moves every good
//! amplitude into the upper half of an `n + 1` qubit register, giving `ψ1`.
//! An ansatz `U(θ)` is trained so that `ψ2 = U(θ)ψ1` overlaps the upper half
//! of `ψ1` as much as possible: the objective is
//! `f(θ) = −Σ_{i ≥ 2^n} ψ1[i]·ψ2[i]`, which equals `−½(⟨Z1⟩ − ⟨Z2⟩)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    apply_oracle_semantic, build_ansatz, build_overlap_test, build_label_test, build_search_circuit, AnsatzSpec, Angle, Circuit, CircuitError,
    CircuitOptions, Gate, OracleSpec,
};
use crate::statevec::{dot, inner, probability_over, ry_overlap, StateError, StateVector};

/// Parameter shift of the gradient rule.
pub const SHIFT: f64 = PI;

/// Guard on the denominator of the relative-change test.
pub const RELATIVE_CHANGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VqsError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("parameter {0} is not finite")]
    NonFiniteTheta(usize),
    #[error("gradient component {0} is not finite")]
    NonFiniteGradient(usize),
    #[error("state has {state} qubits but the oracle expects {expected}")]
    StateSize { state: usize, expected: usize },
    #[error("every good element has zero amplitude")]
    NoGoodAmplitude,
    #[error("invalid optimizer setting: {0}")]
    InvalidAdam(&'static str),
    #[error("invalid termination setting: {0}")]
    InvalidTermination(&'static str),
    #[error("unknown expectation method `{0}`")]
    UnknownMethod(String),
}

/// Ansatz parameters in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>, spec: &AnsatzSpec) -> Result<Self, VqsError> {
        check_theta(&values, spec)?;
        Ok(Self(values))
    }

    /// Independent draws from `U(0, 2π)`.
    pub fn random(spec: &AnsatzSpec, rng: &mut impl Rng) -> Self {
        Self((0..spec.num_params()).map(|_| rng.gen_range(0.0..TAU)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

fn check_theta(theta: &[f64], spec: &AnsatzSpec) -> Result<(), VqsError> {
    if theta.len() != spec.num_params() {
        return Err(VqsError::ParamCount { expected: spec.num_params(), got: theta.len() });
    }
    match theta.iter().position(|t| !t.is_finite()) {
        Some(i) => Err(VqsError::NonFiniteTheta(i)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), VqsError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(VqsError::InvalidAdam("learning rate must be positive"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(VqsError::InvalidAdam("betas must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(VqsError::InvalidAdam("epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminationConfig {
    pub max_iterations: usize,
    pub small_change_threshold: f64,
    pub patience: usize,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self { max_iterations: 300, small_change_threshold: 1e-4, patience: 5 }
    }
}

impl TerminationConfig {
    pub fn validate(&self) -> Result<(), VqsError> {
        if self.max_iterations == 0 {
            return Err(VqsError::InvalidTermination("max_iterations must be positive"));
        }
        if self.small_change_threshold.is_nan() || self.small_change_threshold <= 0.0 {
            return Err(VqsError::InvalidTermination("small_change_threshold must be positive"));
        }
        if self.patience == 0 {
            return Err(VqsError::InvalidTermination("patience must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates of ADAM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self { config, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// One bias-corrected update of `theta` against `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<(), VqsError> {
        if grad.len() != self.m.len() || theta.len() != self.m.len() {
            return Err(VqsError::ParamCount { expected: self.m.len(), got: grad.len().min(theta.len()) });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(VqsError::NonFiniteGradient(i));
        }
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((th, m), v), &g) in theta.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grad) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *th -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpectationMethod {
    /// Exact inner products on the `n + 1` qubit register.
    #[default]
    Direct,
    /// Simulates the Hadamard-test circuit and reads the ancilla.
    HadamardTest,
}

impl FromStr for ExpectationMethod {
    type Err = VqsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "hadamard" | "hadamard-test" | "hadamard_test" => Ok(Self::HadamardTest),
            _ => Err(VqsError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    MaxIters,
    SmallChange,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MaxIters => "max_iters",
            Self::SmallChange => "small_change",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqsRun {
    pub seed: u64,
    /// Objective evaluated at the start of each iteration.
    pub objective_trace: Vec<f64>,
    pub final_theta: Theta,
    pub iterations_used: usize,
    /// Total probability of the good elements in the output.
    pub final_good_probability: f64,
    /// Output probability of each good element, in oracle order.
    pub good_probabilities: Vec<f64>,
    pub termination_reason: TerminationReason,
}

impl VqsRun {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// `|0, ψ0⟩` with the oracle applied: bad amplitudes stay at `x`, good ones
/// move to `2^n + x`.
pub fn prepare_psi1(psi0: &StateVector, oracle: &OracleSpec) -> Result<StateVector, VqsError> {
    let mut state = embed(psi0, oracle)?;
    apply_oracle_semantic(&mut state, oracle)?;
    Ok(state)
}

// |0, ψ0⟩ on n + 1 qubits.
fn embed(psi0: &StateVector, oracle: &OracleSpec) -> Result<StateVector, VqsError> {
    if psi0.num_qubits() != oracle.n() {
        return Err(VqsError::StateSize { state: psi0.num_qubits(), expected: oracle.n() });
    }
    Ok(pad(psi0, 1))
}

// Appends `extra` high qubits in |0⟩.
fn pad(state: &StateVector, extra: usize) -> StateVector {
    let mut amps = state.amplitudes().to_vec();
    amps.resize(state.dim() << extra, 0.0);
    StateVector::from_raw(state.num_qubits() + extra, amps)
}

fn check_psi1(psi1: &StateVector, spec: &AnsatzSpec) -> Result<(), VqsError> {
    if psi1.num_qubits() != spec.wires() {
        return Err(VqsError::StateSize { state: psi1.num_qubits(), expected: spec.wires() });
    }
    Ok(())
}

/// A search instance with its circuits built once.
#[derive(Debug, Clone)]
pub struct VqsProblem {
    oracle: OracleSpec,
    spec: AnsatzSpec,
    ansatz: Circuit,
    psi0: StateVector,
    psi1: StateVector,
}

impl VqsProblem {
    pub fn new(psi0: StateVector, oracle: OracleSpec, spec: AnsatzSpec) -> Result<Self, VqsError> {
        if spec.wires() != oracle.n() + 1 {
            return Err(CircuitError::WireCountMismatch { ansatz: spec.wires(), register: oracle.n() + 1 }.into());
        }
        let psi1 = prepare_psi1(&psi0, &oracle)?;
        let ansatz = build_ansatz(&spec)?;
        Ok(Self { oracle, spec, ansatz, psi0, psi1 })
    }

    pub fn oracle(&self) -> &OracleSpec {
        &self.oracle
    }

    pub fn ansatz_spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn psi0(&self) -> &StateVector {
        &self.psi0
    }

    pub fn psi1(&self) -> &StateVector {
        &self.psi1
    }

    /// `ψ2 = U(θ)ψ1`.
    pub fn output_state(&self, theta: &[f64]) -> Result<StateVector, VqsError> {
        check_theta(theta, &self.spec)?;
        let mut state = self.psi1.clone();
        self.ansatz.apply(&mut state, theta)?;
        Ok(state)
    }

    pub fn objective(&self, theta: &[f64]) -> Result<f64, VqsError> {
        let psi2 = self.output_state(theta)?;
        Ok(-upper_overlap(&self.psi1, &psi2))
    }

    /// Objective and parameter-shift gradient from one forward pass and one
    /// reverse sweep.
    ///
    /// With `φ` the upper half of `ψ1`, `f = −⟨φ|G_L⋯G_1|ψ1⟩`. The objective
    /// is an overlap rather than an expectation value, so it is linear in each
    /// `Ry(θ)` and varies as `cos(θ/2)`, `sin(θ/2)`. The exact shift rule for
    /// that frequency is `∂f/∂θ = [f(θ + π) − f(θ − π)] / 4`.
    ///
    /// Walking the gates backwards keeps `ket = G_{j−1}⋯G_1ψ1` and
    /// `bra = G_{j+1}ᵀ⋯G_Lᵀφ`, so each shifted objective is a single
    /// rotated overlap instead of a fresh simulation.
    pub fn objective_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>), VqsError> {
        let mut ket = self.output_state(theta)?;
        let mut bra = upper_half(&self.psi1);
        let f = -inner(&bra, &ket)?;
        let mut grad = vec![0.0; theta.len()];
        for gate in self.ansatz.gates().iter().rev() {
            gate.apply_inverse(&mut ket, theta)?;
            if let Gate::Ry { qubit, angle } = *gate {
                let base = match angle {
                    Angle::Param(slot) => Some((slot, theta[slot])),
                    Angle::Fixed(_) => None,
                };
                if let Some((slot, value)) = base {
                    let plus = -ry_overlap(&bra, &ket, qubit, value + SHIFT)?;
                    let minus = -ry_overlap(&bra, &ket, qubit, value - SHIFT)?;
                    grad[slot] += 0.25 * (plus - minus);
                }
            }
            gate.apply_inverse(&mut bra, theta)?;
        }
        Ok((f, grad))
    }

    pub fn expectation_z1(&self, theta: &[f64], method: ExpectationMethod) -> Result<f64, VqsError> {
        match method {
            ExpectationMethod::Direct => Ok(inner(&self.psi1, &self.output_state(theta)?)?),
            ExpectationMethod::HadamardTest => self.hadamard_test(theta, false),
        }
    }

    pub fn expectation_z2(&self, theta: &[f64], method: ExpectationMethod) -> Result<f64, VqsError> {
        match method {
            ExpectationMethod::Direct => {
                let mut psi2 = self.output_state(theta)?;
                let half = psi2.dim() / 2;
                for a in &mut psi2.amplitudes_mut()[half..] {
                    *a = -*a;
                }
                Ok(inner(&self.psi1, &psi2)?)
            }
            ExpectationMethod::HadamardTest => self.hadamard_test(theta, true),
        }
    }

    fn hadamard_test(&self, theta: &[f64], with_z: bool) -> Result<f64, VqsError> {
        check_theta(theta, &self.spec)?;
        let build = if with_z { build_label_test } else { build_overlap_test };
        let circuit = build(&self.oracle, &self.spec, CircuitOptions::default())?;
        let range = stage(&circuit, "hadamard-test");
        let mut state = pad(&self.psi1, 1);
        circuit.apply_range(&mut state, theta, range)?;
        // P(ancilla = 0) − P(ancilla = 1), the ancilla being the top qubit.
        let half = state.dim() / 2;
        let amps = state.amplitudes();
        Ok(dot(&amps[..half], &amps[..half]) - dot(&amps[half..], &amps[half..]))
    }

    /// Runs the full oracle-plus-ansatz circuit on `|0, ψ0⟩` and returns the
    /// output probability of each good element.
    pub fn good_probabilities(&self, theta: &[f64]) -> Result<Vec<f64>, VqsError> {
        check_theta(theta, &self.spec)?;
        let circuit = build_search_circuit(&self.oracle, &self.spec, CircuitOptions::default())?;
        let mut state = embed(&self.psi0, &self.oracle)?;
        circuit.apply(&mut state, theta)?;
        let half = 1usize << self.oracle.n();
        self.oracle
            .good()
            .iter()
            .map(|&g| Ok(probability_over(&state, &[half + g])?))
            .collect()
    }
}

fn stage(circuit: &Circuit, name: &str) -> std::ops::Range<usize> {
    circuit
        .stages()
        .into_iter()
        .find(|(s, _)| *s == name)
        .map(|(_, r)| r)
        .expect("search circuits always carry their stages")
}

fn upper_half(state: &StateVector) -> StateVector {
    let mut out = state.clone();
    let half = out.dim() / 2;
    out.amplitudes_mut()[..half].fill(0.0);
    out
}

fn upper_overlap(a: &StateVector, b: &StateVector) -> f64 {
    let half = a.dim() / 2;
    dot(&a.amplitudes()[half..], &b.amplitudes()[half..])
}

fn problem_for(psi1: &StateVector, spec: &AnsatzSpec) -> Result<(Circuit, StateVector), VqsError> {
    check_psi1(psi1, spec)?;
    Ok((build_ansatz(spec)?, psi1.clone()))
}

/// `⟨ψ1|U(θ)|ψ1⟩`.
pub fn expectation_z1(theta: &[f64], psi1: &StateVector, spec: &AnsatzSpec, method: ExpectationMethod) -> Result<f64, VqsError> {
    with_raw_problem(psi1, spec, |p| p.expectation_z1(theta, method))
}

/// `⟨ψ1|(Z ⊗ I)U(θ)|ψ1⟩`, Z acting on the label qubit.
pub fn expectation_z2(theta: &[f64], psi1: &StateVector, spec: &AnsatzSpec, method: ExpectationMethod) -> Result<f64, VqsError> {
    with_raw_problem(psi1, spec, |p| p.expectation_z2(theta, method))
}

pub fn objective(theta: &[f64], psi1: &StateVector, spec: &AnsatzSpec) -> Result<f64, VqsError> {
    with_raw_problem(psi1, spec, |p| p.objective(theta))
}

/// Parameter-shift gradient of [`objective`].
pub fn gradient(theta: &[f64], psi1: &StateVector, spec: &AnsatzSpec) -> Result<Vec<f64>, VqsError> {
    with_raw_problem(psi1, spec, |p| Ok(p.objective_and_gradient(theta)?.1))
}

// A problem around an externally prepared ψ1. Only the paths that never look
// at ψ0 or the oracle are reachable through it, apart from the Hadamard test,
// which only needs the register layout.
fn with_raw_problem<T>(
    psi1: &StateVector,
    spec: &AnsatzSpec,
    f: impl FnOnce(&VqsProblem) -> Result<T, VqsError>,
) -> Result<T, VqsError> {
    let (ansatz, psi1) = problem_for(psi1, spec)?;
    let n = spec.wires() - 1;
    // Any valid oracle works: the Hadamard test starts after the oracle stage.
    let oracle = OracleSpec::new(n, [0])?;
    let psi0 = StateVector::new_basis(n, 0)?;
    f(&VqsProblem { oracle, spec: *spec, ansatz, psi0, psi1 })
}

/// Global minimum of the objective and the output state reaching it.
/// `f_min = −√(Σ_g α_g²)`, attained when the upper half of `ψ2` is the good
/// part of `ψ0` normalised.
pub fn analytic_minimum(psi0: &StateVector, oracle: &OracleSpec) -> Result<(f64, Vec<f64>), VqsError> {
    if psi0.num_qubits() != oracle.n() {
        return Err(VqsError::StateSize { state: psi0.num_qubits(), expected: oracle.n() });
    }
    let amps = psi0.amplitudes();
    let weight: f64 = oracle.good().iter().map(|&g| amps[g] * amps[g]).sum();
    if weight == 0.0 {
        return Err(VqsError::NoGoodAmplitude);
    }
    let norm = weight.sqrt();
    let half = psi0.dim();
    let mut beta = vec![0.0; 2 * half];
    for &g in oracle.good() {
        beta[half + g] = amps[g] / norm;
    }
    Ok((-norm, beta))
}

/// Trains the ansatz from a seeded random start.
///
/// Each iteration evaluates the objective and its gradient, then takes an
/// ADAM step. A small-change event is a relative objective change below the
/// threshold; `patience` consecutive events, or `max_iterations`
/// evaluations, end the run. The returned parameters are the last ones
/// evaluated.
pub fn run_vqs(
    problem: &VqsProblem,
    adam: &AdamConfig,
    term: &TerminationConfig,
    seed: u64,
) -> Result<VqsRun, VqsError> {
    run_vqs_with(problem, adam, term, seed, ExpectationMethod::Direct)
}

/// As [`run_vqs`], with the traced objective taken from `method`. Gradients
/// always come from the exact sweep.
pub fn run_vqs_with(
    problem: &VqsProblem,
    adam: &AdamConfig,
    term: &TerminationConfig,
    seed: u64,
    method: ExpectationMethod,
) -> Result<VqsRun, VqsError> {
    adam.validate()?;
    term.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Theta::random(problem.ansatz_spec(), &mut rng).into_values();
    let mut optimizer = AdamState::new(*adam, theta.len());
    let mut trace: Vec<f64> = Vec::with_capacity(term.max_iterations);
    let mut streak = 0;
    let mut reason = TerminationReason::MaxIters;
    for it in 1..=term.max_iterations {
        let (mut f, grad) = problem.objective_and_gradient(&theta)?;
        if method == ExpectationMethod::HadamardTest {
            f = -0.5 * (problem.expectation_z1(&theta, method)? - problem.expectation_z2(&theta, method)?);
        }
        if let Some(&prev) = trace.last() {
            let change = (f - prev).abs() / prev.abs().max(RELATIVE_CHANGE_FLOOR);
            streak = if change < term.small_change_threshold { streak + 1 } else { 0 };
        }
        trace.push(f);
        if streak >= term.patience {
            reason = TerminationReason::SmallChange;
            break;
        }
        if it < term.max_iterations {
            optimizer.step(&mut theta, &grad)?;
        }
    }
    let good_probabilities = problem.good_probabilities(&theta)?;
    Ok(VqsRun {
        seed,
        iterations_used: trace.len(),
        objective_trace: trace,
        final_good_probability: good_probabilities.iter().sum::<f64>().clamp(0.0, 1.0),
        good_probabilities,
        final_theta: Theta(theta),
        termination_reason: reason,
    })
}
