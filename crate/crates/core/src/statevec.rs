//! Real-amplitude statevector with in-place gate kernels.
//!
//! Every gate used by the search circuits (Ry, H, X, Z, CNOT, CZ, Toffoli,
//! CRy and multi-controlled X) has a real matrix, so a state is stored as one
//! `f64` per basis state. Qubit `q - 1` is the most significant bit of the
//! basis index and corresponds to the top wire of a circuit diagram.
//!
//! Kernels walk amplitude pairs with a stride instead of materialising gate
//! matrices. States of at least [`PAR_THRESHOLD`] amplitudes are split into
//! fixed-size chunks and processed with rayon; the partitioning depends only
//! on the state size, so results are bit-identical for any worker count.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use thiserror::Error;

/// Accepted deviation of the squared norm when importing amplitudes.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Largest register the engine will allocate (8 GiB of amplitudes).
pub const MAX_QUBITS: usize = 30;

/// States with at least this many amplitudes use the parallel kernels.
pub const PAR_THRESHOLD: usize = 1 << 15;

// Work unit of the parallel kernels, in amplitudes.
const CHUNK: usize = 1 << 13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("basis index {index} out of range for {num_qubits} qubits")]
    BasisIndexOutOfRange { index: usize, num_qubits: usize },
    #[error("amplitude count {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("amplitudes are not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("qubit {qubit} out of range for {num_qubits} qubits")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {0} appears more than once in one gate")]
    DuplicateQubit(usize),
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<f64>,
}

impl StateVector {
    /// Computational basis state `|basis_index⟩`.
    pub fn new_basis(num_qubits: usize, basis_index: usize) -> Result<Self, StateError> {
        let mut amps = zeros(num_qubits)?;
        if basis_index >= amps.len() {
            return Err(StateError::BasisIndexOutOfRange { index: basis_index, num_qubits });
        }
        amps[basis_index] = 1.0;
        Ok(Self { num_qubits, amps })
    }

    /// Equal superposition, i.e. `H^⊗q |0…0⟩`.
    pub fn uniform(num_qubits: usize) -> Result<Self, StateError> {
        let mut amps = zeros(num_qubits)?;
        let a = (amps.len() as f64).sqrt().recip();
        amps.fill(a);
        Ok(Self { num_qubits, amps })
    }

    pub fn from_amplitudes(values: Vec<f64>) -> Result<Self, StateError> {
        let len = values.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(StateError::NotPowerOfTwo(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(StateError::TooManyQubits(num_qubits));
        }
        let norm: f64 = values.iter().map(|v| v * v).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self { num_qubits, amps: values })
    }

    /// Wraps amplitudes without the normalization check. Used for intermediate
    /// vectors such as projections, which are not states.
    pub(crate) fn from_raw(num_qubits: usize, amps: Vec<f64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << num_qubits);
        Self { num_qubits, amps }
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of basis states, `2^q`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<f64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        reduce(&self.amps, |c| c.iter().map(|a| a * a).sum())
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), StateError> {
        if qubit >= self.num_qubits {
            Err(StateError::QubitOutOfRange { qubit, num_qubits: self.num_qubits })
        } else {
            Ok(())
        }
    }

    /// Validates a gate's wires and returns the bit mask of `controls`.
    fn check_wires(&self, controls: &[usize], target: usize) -> Result<usize, StateError> {
        self.check_qubit(target)?;
        let mut mask = 1usize << target;
        for &c in controls {
            self.check_qubit(c)?;
            let bit = 1usize << c;
            if mask & bit != 0 {
                return Err(StateError::DuplicateQubit(c));
            }
            mask |= bit;
        }
        Ok(mask & !(1usize << target))
    }

    /// `Ry(angle) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]` on `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<(), StateError> {
        self.check_qubit(qubit)?;
        let (s, c) = (angle * 0.5).sin_cos();
        for_each_pair(&mut self.amps, qubit, move |_, a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = c * x - s * y;
            *a1 = s * x + c * y;
        });
        Ok(())
    }

    pub fn apply_h(&mut self, qubit: usize) -> Result<(), StateError> {
        self.check_qubit(qubit)?;
        for_each_pair(&mut self.amps, qubit, |_, a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = FRAC_1_SQRT_2 * (x + y);
            *a1 = FRAC_1_SQRT_2 * (x - y);
        });
        Ok(())
    }

    pub fn apply_x(&mut self, qubit: usize) -> Result<(), StateError> {
        self.apply_mcx(&[], qubit)
    }

    pub fn apply_z(&mut self, qubit: usize) -> Result<(), StateError> {
        self.check_qubit(qubit)?;
        for_each_pair(&mut self.amps, qubit, |_, _, a1| *a1 = -*a1);
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), StateError> {
        self.apply_mcx(&[control], target)
    }

    pub fn apply_toffoli(&mut self, c1: usize, c2: usize, target: usize) -> Result<(), StateError> {
        self.apply_mcx(&[c1, c2], target)
    }

    /// Flips `target` on every basis state whose `controls` are all 1.
    pub fn apply_mcx(&mut self, controls: &[usize], target: usize) -> Result<(), StateError> {
        let mask = self.check_wires(controls, target)?;
        for_each_pair(&mut self.amps, target, move |idx, a0, a1| {
            if idx & mask == mask {
                std::mem::swap(a0, a1);
            }
        });
        Ok(())
    }

    pub fn apply_cz(&mut self, control: usize, target: usize) -> Result<(), StateError> {
        let mask = self.check_wires(&[control], target)?;
        for_each_pair(&mut self.amps, target, move |idx, _, a1| {
            if idx & mask == mask {
                *a1 = -*a1;
            }
        });
        Ok(())
    }

    pub fn apply_cry(&mut self, control: usize, target: usize, angle: f64) -> Result<(), StateError> {
        let mask = self.check_wires(&[control], target)?;
        let (s, c) = (angle * 0.5).sin_cos();
        for_each_pair(&mut self.amps, target, move |idx, a0, a1| {
            if idx & mask == mask {
                let (x, y) = (*a0, *a1);
                *a0 = c * x - s * y;
                *a1 = s * x + c * y;
            }
        });
        Ok(())
    }

    /// Swaps the amplitudes at two basis indices.
    pub(crate) fn swap_amplitudes(&mut self, i: usize, j: usize) {
        self.amps.swap(i, j);
    }
}

fn zeros(num_qubits: usize) -> Result<Vec<f64>, StateError> {
    if num_qubits > MAX_QUBITS {
        return Err(StateError::TooManyQubits(num_qubits));
    }
    Ok(vec![0.0; 1 << num_qubits])
}

/// Real inner product `Σ a_i b_i`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<f64, StateError> {
    if a.num_qubits != b.num_qubits {
        return Err(StateError::DimensionMismatch { left: a.num_qubits, right: b.num_qubits });
    }
    Ok(dot(&a.amps, &b.amps))
}

/// Total probability of the basis states in `indices`.
pub fn probability_over(state: &StateVector, indices: &[usize]) -> Result<f64, StateError> {
    indices.iter().try_fold(0.0, |acc, &i| match state.amps.get(i) {
        Some(a) => Ok(acc + a * a),
        None => Err(StateError::BasisIndexOutOfRange { index: i, num_qubits: state.num_qubits }),
    })
}

/// `⟨bra| Ry(angle)_qubit |ket⟩` evaluated in one pass, leaving `ket` untouched.
pub fn ry_overlap(bra: &StateVector, ket: &StateVector, qubit: usize, angle: f64) -> Result<f64, StateError> {
    if bra.num_qubits != ket.num_qubits {
        return Err(StateError::DimensionMismatch { left: bra.num_qubits, right: ket.num_qubits });
    }
    ket.check_qubit(qubit)?;
    let (s, c) = (angle * 0.5).sin_cos();
    Ok(pair_reduce(&bra.amps, &ket.amps, qubit, move |b0, b1, k0, k1| {
        b0 * (c * k0 - s * k1) + b1 * (s * k0 + c * k1)
    }))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < PAR_THRESHOLD {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

fn reduce<F>(amps: &[f64], f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if amps.len() < PAR_THRESHOLD {
        return f(amps);
    }
    let partial: Vec<f64> = amps.par_chunks(CHUNK).map(&f).collect();
    partial.iter().sum()
}

/// Calls `f(idx0, a0, a1)` for every amplitude pair that differs only in bit
/// `target`; `idx0` is the index of the member whose target bit is 0.
fn for_each_pair<F>(amps: &mut [f64], target: usize, f: F)
where
    F: Fn(usize, &mut f64, &mut f64) + Sync + Send,
{
    let stride = 1usize << target;
    let block = stride << 1;
    let visit_blocks = |chunk: &mut [f64], offset: usize| {
        for (b, blk) in chunk.chunks_mut(block).enumerate() {
            let base = offset + b * block;
            let (lo, hi) = blk.split_at_mut(stride);
            for (i, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(base + i, a0, a1);
            }
        }
    };
    if amps.len() < PAR_THRESHOLD {
        visit_blocks(amps, 0);
    } else if block <= CHUNK {
        amps.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| visit_blocks(chunk, c * CHUNK));
    } else {
        let half = CHUNK / 2;
        for (b, blk) in amps.chunks_mut(block).enumerate() {
            let base = b * block;
            let (lo, hi) = blk.split_at_mut(stride);
            lo.par_chunks_mut(half)
                .zip(hi.par_chunks_mut(half))
                .enumerate()
                .for_each(|(c, (l, h))| {
                    let start = base + c * half;
                    for (i, (a0, a1)) in l.iter_mut().zip(h.iter_mut()).enumerate() {
                        f(start + i, a0, a1);
                    }
                });
        }
    }
}

/// Sums `f(b0, b1, k0, k1)` over the amplitude pairs of `target`, with a fixed
/// summation tree for a given length.
fn pair_reduce<F>(bra: &[f64], ket: &[f64], target: usize, f: F) -> f64
where
    F: Fn(f64, f64, f64, f64) -> f64 + Sync,
{
    let stride = 1usize << target;
    let block = stride << 1;
    let sum_blocks = |b: &[f64], k: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (bb, kb) in b.chunks(block).zip(k.chunks(block)) {
            let (b0, b1) = bb.split_at(stride);
            let (k0, k1) = kb.split_at(stride);
            for i in 0..stride {
                acc += f(b0[i], b1[i], k0[i], k1[i]);
            }
        }
        acc
    };
    if bra.len() < PAR_THRESHOLD {
        return sum_blocks(bra, ket);
    }
    let partial: Vec<f64> = if block <= CHUNK {
        bra.par_chunks(CHUNK)
            .zip(ket.par_chunks(CHUNK))
            .map(|(b, k)| sum_blocks(b, k))
            .collect()
    } else {
        let half = CHUNK / 2;
        bra.chunks(block)
            .zip(ket.chunks(block))
            .flat_map(|(bb, kb)| {
                let (b0, b1) = bb.split_at(stride);
                let (k0, k1) = kb.split_at(stride);
                b0.par_chunks(half)
                    .zip(b1.par_chunks(half))
                    .zip(k0.par_chunks(half).zip(k1.par_chunks(half)))
                    .map(|((b0, b1), (k0, k1))| {
                        let mut acc = 0.0;
                        for i in 0..b0.len() {
                            acc += f(b0[i], b1[i], k0[i], k1[i]);
                        }
                        acc
                    })
                    .collect::<Vec<f64>>()
            })
            .collect()
    };
    partial.iter().sum()
}
