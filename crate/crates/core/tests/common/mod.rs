//! Reference kernels written independently of the library's statevector.
#![allow(dead_code)]

use vqs::circuit::{Angle, Gate};

pub fn ry(amps: &mut [f64], q: usize, theta: f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    for i in 0..amps.len() {
        if i >> q & 1 == 0 {
            let j = i | 1 << q;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = c * a - s * b;
            amps[j] = s * a + c * b;
        }
    }
}

pub fn mcx(amps: &mut [f64], controls: &[usize], t: usize) {
    for i in 0..amps.len() {
        if i >> t & 1 == 0 && controls.iter().all(|&c| i >> c & 1 == 1) {
            amps.swap(i, i | 1 << t);
        }
    }
}

/// Applies a gate list built from Ry and CNOT gates only.
pub fn run_ry_cnot(amps: &mut [f64], gates: &[Gate], theta: &[f64]) {
    for g in gates {
        match g {
            Gate::Ry { qubit, angle } => {
                let a = match angle {
                    Angle::Param(s) => theta[*s],
                    Angle::Fixed(a) => *a,
                };
                ry(amps, *qubit, a);
            }
            Gate::Cnot { control, target } => mcx(amps, &[*control], *target),
            other => panic!("unexpected gate {other:?}"),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|0, ψ0⟩` with each good amplitude moved to the labelled half.
pub fn labelled(psi0: &[f64], good: &[usize]) -> Vec<f64> {
    let n = psi0.len();
    let mut out = vec![0.0; 2 * n];
    out[..n].copy_from_slice(psi0);
    for &g in good {
        out[n + g] = out[g];
        out[g] = 0.0;
    }
    out
}

/// Grover iterations on the full vector: phase flip then inversion about
/// the mean.
pub fn grover_full(n: usize, good: &[usize], t: usize) -> Vec<f64> {
    let size = 1usize << n;
    let mut a = vec![1.0 / (size as f64).sqrt(); size];
    for _ in 0..t {
        for &g in good {
            a[g] = -a[g];
        }
        let mean = a.iter().sum::<f64>() / size as f64;
        a.iter_mut().for_each(|x| *x = 2.0 * mean - *x);
    }
    a
}

pub fn closed_form(n: usize, k: usize, t: usize) -> f64 {
    let w = ((k as f64) / (1u64 << n) as f64).sqrt().asin();
    ((2 * t + 1) as f64 * w).sin().powi(2)
}

/// Linear-interpolation percentile with inclusive endpoints.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}
