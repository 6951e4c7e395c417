//! Grover comparator: iteration counts, depth accounting and a small-`n`
//! circuit simulation.
//!
//! Under a uniform start every good element shares one amplitude and every
//! bad element another, so the inversion-about-the-mean loop only has to
//! track two scalars. Two arithmetics are offered:
//!
//! * [`Arithmetic::Double`] (default): the recurrence in `f64`, which follows
//!   the exact amplitude-amplification rotation to ~1e-15.
//! * [`Arithmetic::Single`]: replays, bit for bit, the loop run on a dense
//!   `float32` numpy array, whose mean is a pairwise sum inside 8192-element
//!   buffers with the buffers accumulated in order. Rounding makes the bad
//!   amplitudes decay too slowly once `n` gets large, so the counts drift
//!   below the exact ones (one iteration at `n = 20`, hundreds at `n = 26`).

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{formula_depth, grover_iteration_depth, AnsatzFamily, Circuit, CircuitError, DepthKind, Gate, OracleSpec};
use crate::statevec::{StateError, StateVector};

/// Iteration cap of the counting loop.
pub const MAX_ITERATIONS: u64 = 100_000_000;

/// Largest input register for [`simulate_grover`].
pub const MAX_SIMULATED_QUBITS: usize = 12;

/// Largest register for the counting loop.
pub const MAX_COUNT_QUBITS: usize = 40;

/// Success thresholds of the comparison table.
pub const TABLE_THRESHOLDS: [f64; 2] = [0.5, 0.9];

/// Input sizes of the comparison table.
pub const TABLE_SIZES: [usize; 5] = [2, 8, 14, 20, 26];

// Elements per reduction buffer in the replayed float32 loop.
const REDUCE_BUFFER: usize = 8192;
// Leaf size of the pairwise summation.
const PAIRWISE_BLOCK: usize = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroverError {
    #[error("input size n = {0} is not supported")]
    InvalidSize(usize),
    #[error("good count {k} must be in [1, 2^{n})")]
    InvalidGoodCount { n: usize, k: u64 },
    #[error("success probability {0} must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error("success probability {p_s} not reached within {cap} iterations")]
    Unreachable { p_s: f64, cap: u64 },
    #[error("{0} input qubits is too large for full-state simulation (max {MAX_SIMULATED_QUBITS})")]
    TooLargeToSimulate(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    Single,
    #[default]
    Double,
}

impl std::str::FromStr for Arithmetic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "f32" => Ok(Self::Single),
            "double" | "f64" => Ok(Self::Double),
            _ => Err(format!("unknown arithmetic `{s}` (expected single or double)")),
        }
    }
}

/// What the counting loop compares against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SuccessCriterion {
    /// Squared amplitude of one good element.
    #[default]
    PerGood,
    /// Total probability of all good elements.
    TotalGood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountOptions {
    pub arithmetic: Arithmetic,
    pub criterion: SuccessCriterion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroverCount {
    pub n: usize,
    pub k_good: u64,
    pub p_s: f64,
    /// First iteration at which the threshold is met.
    pub iterations: u64,
    /// `iterations` times the depth of one Grover iteration.
    pub total_depth: u64,
}

/// Good and bad amplitudes of the symmetric `f64` recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricAmplitudes {
    pub bad: f64,
    pub good: f64,
    size: f64,
    k: f64,
}

impl SymmetricAmplitudes {
    /// Uniform start over `2^n` elements with `k` of them good.
    pub fn uniform(n: usize, k: u64) -> Self {
        let size = (n as f64).exp2();
        let a = size.sqrt().recip();
        Self { bad: a, good: a, size, k: k as f64 }
    }

    /// Sign flip of the goods, then `α ← 2m − α` with `m` the mean amplitude.
    pub fn step(&mut self) {
        let good = -self.good;
        let mean = ((self.size - self.k) * self.bad + self.k * good) / self.size;
        self.bad = 2.0 * mean - self.bad;
        self.good = 2.0 * mean - good;
    }
}

/// Replay of the dense float32 loop, tracking one bad and one good value.
/// Goods sit at the highest indices.
struct SingleLoop {
    size: usize,
    first_good: usize,
    bad: f32,
    good: f32,
}

impl SingleLoop {
    fn uniform(n: usize, k: u64) -> Self {
        let size = 1usize << n;
        let a = (1.0 / (size as f64).sqrt()) as f32;
        Self { size, first_good: size - k as usize, bad: a, good: a }
    }

    #[inline]
    fn value(&self, i: usize) -> f32 {
        if i >= self.first_good {
            self.good
        } else {
            self.bad
        }
    }

    fn is_uniform(&self, start: usize, len: usize) -> Option<f32> {
        if start + len <= self.first_good {
            Some(self.bad)
        } else if start >= self.first_good {
            Some(self.good)
        } else {
            None
        }
    }

    // numpy's pairwise summation over `len` values starting at `start`.
    fn pairwise(&self, start: usize, len: usize, memo: &mut HashMap<(usize, u32), f32>) -> f32 {
        let key = self.is_uniform(start, len).map(|v| (len, v.to_bits()));
        if let Some(k) = key {
            if let Some(&s) = memo.get(&k) {
                return s;
            }
        }
        let sum = if len < 8 {
            (start..start + len).fold(0.0f32, |acc, i| acc + self.value(i))
        } else if len <= PAIRWISE_BLOCK {
            let mut r = [0.0f32; 8];
            for (j, rj) in r.iter_mut().enumerate() {
                *rj = self.value(start + j);
            }
            let whole = len - len % 8;
            let mut i = 8;
            while i < whole {
                for (j, rj) in r.iter_mut().enumerate() {
                    *rj += self.value(start + i + j);
                }
                i += 8;
            }
            let mut res = ((r[0] + r[1]) + (r[2] + r[3])) + ((r[4] + r[5]) + (r[6] + r[7]));
            for i in whole..len {
                res += self.value(start + i);
            }
            res
        } else {
            let mut half = len / 2;
            half -= half % 8;
            self.pairwise(start, half, memo) + self.pairwise(start + half, len - half, memo)
        };
        if let Some(k) = key {
            memo.insert(k, sum);
        }
        sum
    }

    fn sum(&self) -> f32 {
        let mut memo = HashMap::new();
        let mut acc = 0.0f32;
        let mut start = 0;
        while start < self.size {
            let len = REDUCE_BUFFER.min(self.size - start);
            acc += self.pairwise(start, len, &mut memo);
            start += len;
        }
        acc
    }

    fn step(&mut self) {
        self.good = -self.good;
        let mean = self.sum() / self.size as f32;
        self.bad = 2.0 * mean - self.bad;
        self.good = 2.0 * mean - self.good;
    }
}

fn validate(n: usize, k: u64, p_s: f64) -> Result<(), GroverError> {
    if n == 0 || n > MAX_COUNT_QUBITS {
        return Err(GroverError::InvalidSize(n));
    }
    if k == 0 || k >= 1u64 << n {
        return Err(GroverError::InvalidGoodCount { n, k });
    }
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(GroverError::InvalidThreshold(p_s));
    }
    Ok(())
}

/// Iteration count of the default loop (`f64`, per-good criterion).
pub fn count_iterations(n: usize, k_good: u64, p_s: f64) -> Result<GroverCount, GroverError> {
    count_iterations_with(n, k_good, p_s, CountOptions::default())
}

/// Runs the counting loop from a uniform start until the success criterion
/// first reaches `p_s`.
pub fn count_iterations_with(n: usize, k_good: u64, p_s: f64, opts: CountOptions) -> Result<GroverCount, GroverError> {
    validate(n, k_good, p_s)?;
    let weight = match opts.criterion {
        SuccessCriterion::PerGood => 1.0,
        SuccessCriterion::TotalGood => k_good as f64,
    };
    let iterations = match opts.arithmetic {
        Arithmetic::Double => {
            let mut amps = SymmetricAmplitudes::uniform(n, k_good);
            first_crossing(|| {
                amps.step();
                weight * amps.good * amps.good >= p_s
            })
        }
        Arithmetic::Single => {
            if n > crate::statevec::MAX_QUBITS {
                return Err(GroverError::InvalidSize(n));
            }
            let mut amps = SingleLoop::uniform(n, k_good);
            let threshold = p_s as f32;
            let weight = weight as f32;
            first_crossing(|| {
                amps.step();
                weight * (amps.good * amps.good) >= threshold
            })
        }
    }
    .ok_or(GroverError::Unreachable { p_s, cap: MAX_ITERATIONS })?;
    Ok(GroverCount {
        n,
        k_good,
        p_s,
        iterations,
        total_depth: iterations * grover_iteration_depth(n.max(2)) as u64,
    })
}

fn first_crossing(mut step: impl FnMut() -> bool) -> Option<u64> {
    (1..=MAX_ITERATIONS).find(|_| step())
}

/// Total depth of Grover's algorithm for a single good element.
pub fn grover_depth(n: usize, p_s: f64) -> Result<u64, GroverError> {
    if n < 2 {
        return Err(GroverError::InvalidSize(n));
    }
    Ok(count_iterations(n, 1, p_s)?.total_depth)
}

/// The counting loop applied literally to all `2^n` amplitudes in `f64`.
/// Returns the amplitude vector after `iterations` steps.
pub fn amplitude_recurrence_full(oracle: &OracleSpec, iterations: usize) -> Result<Vec<f64>, GroverError> {
    let n = oracle.n();
    if n > MAX_SIMULATED_QUBITS {
        return Err(GroverError::TooLargeToSimulate(n));
    }
    let size = 1usize << n;
    let mut amps = vec![(size as f64).sqrt().recip(); size];
    for _ in 0..iterations {
        for &g in oracle.good() {
            amps[g] = -amps[g];
        }
        let mean = amps.iter().sum::<f64>() / size as f64;
        for a in amps.iter_mut() {
            *a = 2.0 * mean - *a;
        }
    }
    Ok(amps)
}

// Z on `target` conditioned on `controls`, as H · C(X) · H.
fn push_controlled_z(c: &mut Circuit, controls: &[usize], target: usize) -> Result<(), CircuitError> {
    if controls.is_empty() {
        c.push(Gate::Z(target))?;
        return Ok(());
    }
    c.push(Gate::H(target))?;
    c.push(Gate::Mcx { controls: controls.to_vec(), target })?;
    c.push(Gate::H(target))?;
    Ok(())
}

/// One Grover iteration on `n` qubits: phase flip of each good element,
/// then `H^⊗n`, a phase flip of |0…0⟩ built from X conjugation around
/// `H · C^{n-1}(X) · H`, and `H^⊗n`.
pub fn grover_iteration_circuit(oracle: &OracleSpec) -> Result<Circuit, GroverError> {
    let n = oracle.n();
    let mut c = Circuit::new(n);
    let controls: Vec<usize> = (1..n).collect();
    for &g in oracle.good() {
        let flips: Vec<usize> = (0..n).filter(|b| g >> b & 1 == 0).collect();
        for &b in &flips {
            c.push(Gate::X(b))?;
        }
        push_controlled_z(&mut c, &controls, 0)?;
        for &b in &flips {
            c.push(Gate::X(b))?;
        }
    }
    for q in 0..n {
        c.push(Gate::H(q))?;
    }
    for q in 0..n {
        c.push(Gate::X(q))?;
    }
    push_controlled_z(&mut c, &controls, 0)?;
    for q in 0..n {
        c.push(Gate::X(q))?;
    }
    for q in 0..n {
        c.push(Gate::H(q))?;
    }
    Ok(c)
}

/// `H^⊗n|0⟩` followed by `iterations` Grover iterations, simulated gate by
/// gate. Each iteration carries a global sign of −1 relative to the
/// inversion-about-the-mean loop.
pub fn simulate_grover(oracle: &OracleSpec, iterations: usize) -> Result<StateVector, GroverError> {
    let n = oracle.n();
    if n > MAX_SIMULATED_QUBITS {
        return Err(GroverError::TooLargeToSimulate(n));
    }
    let mut state = StateVector::new_basis(n, 0)?;
    for q in 0..n {
        state.apply_h(q)?;
    }
    let step = grover_iteration_circuit(oracle)?;
    for _ in 0..iterations {
        step.apply(&mut state, &[])?;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub n: usize,
    pub vqs_depth: u64,
    pub ng_p50: u64,
    pub grover_depth_p50: u64,
    pub ng_p90: u64,
    pub grover_depth_p90: u64,
}

pub const TABLE_HEADER: &str = "n,vqs_depth,ng_p50,grover_depth_p50,ng_p90,grover_depth_p90";

/// Depth comparison between the search circuits (3-layer type-I) and
/// Grover's algorithm for a single good element.
pub fn depth_table(arithmetic: Arithmetic) -> Result<Vec<TableRow>, GroverError> {
    let opts = CountOptions { arithmetic, ..Default::default() };
    TABLE_SIZES
        .iter()
        .map(|&n| {
            let [lo, hi] = TABLE_THRESHOLDS.map(|p| count_iterations_with(n, 1, p, opts));
            let (lo, hi) = (lo?, hi?);
            Ok(TableRow {
                n,
                vqs_depth: formula_depth(DepthKind::LabelTest, n, AnsatzFamily::TypeI, 3)? as u64,
                ng_p50: lo.iterations,
                grover_depth_p50: lo.total_depth,
                ng_p90: hi.iterations,
                grover_depth_p90: hi.total_depth,
            })
        })
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n, r.vqs_depth, r.ng_p50, r.grover_depth_p50, r.ng_p90, r.grover_depth_p90
        );
    }
    out
}

/// Probability of a good element after `t` iterations in closed form,
/// `sin²((2t + 1)·asin(√(k/N)))`.
pub fn closed_form_probability(n: usize, k: u64, t: u64) -> f64 {
    let theta = (k as f64 / (n as f64).exp2()).sqrt().asin();
    ((2 * t + 1) as f64 * theta).sin().powi(2)
}
