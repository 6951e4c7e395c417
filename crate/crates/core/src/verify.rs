//! Built-in cross-checks behind `vqs verify`.
//!
//! Each check compares two independent routes to the same quantity on small
//! registers and reports the worst deviation it saw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{
    apply_oracle_semantic, build_ansatz, build_oracle, build_search_circuit, decompose_mcx, formula_depth, AnsatzFamily,
    AnsatzSpec, CircuitOptions, DepthKind, OracleRealization, OracleSpec,
};
use crate::grover::{amplitude_recurrence_full, closed_form_probability, simulate_grover, SymmetricAmplitudes};
use crate::statevec::StateVector;
use crate::vqs::{analytic_minimum, ExpectationMethod, VqsProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: worst <= tolerance, detail: format!("max deviation {worst:.3e} (tolerance {tolerance:.0e})") }
}

fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
    let mut amps: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps).expect("normalized")
}

fn random_theta(spec: &AnsatzSpec, rng: &mut impl Rng) -> Vec<f64> {
    (0..spec.num_params()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs every check. Takes a few seconds in release builds.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        ansatz_norm(),
        mcx_decomposition(),
        oracle_equivalence(),
        expectation_methods(),
        objective_identity(),
        gradient_vs_differences(),
        objective_lower_bound(),
        grover_closed_form(),
        grover_recurrences(),
        depth_formulas(),
    ]
}

fn ansatz_norm() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for family in [AnsatzFamily::TypeI, AnsatzFamily::TypeII] {
        let spec = AnsatzSpec::new(family, 2, 6).unwrap();
        let c = build_ansatz(&spec).unwrap();
        for _ in 0..10 {
            let mut s = random_state(6, &mut rng);
            c.apply(&mut s, &random_theta(&spec, &mut rng)).unwrap();
            worst = worst.max((s.norm_sqr() - 1.0).abs());
        }
    }
    check("ansatz preserves the norm", worst, 1e-12)
}

fn mcx_decomposition() -> CheckResult {
    let mut worst = 0.0f64;
    for n in 2..=6 {
        let c = decompose_mcx(n).unwrap();
        let controls: Vec<usize> = (0..n).collect();
        for basis in 0..1usize << (n + 1) {
            let mut a = StateVector::new_basis(2 * n, basis).unwrap();
            let mut b = a.clone();
            c.apply(&mut a, &[]).unwrap();
            b.apply_mcx(&controls, n).unwrap();
            worst = worst.max(max_diff(a.amplitudes(), b.amplitudes()));
        }
    }
    check("decomposed C^n(X) matches the direct gate", worst, 0.0)
}

fn oracle_equivalence() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for n in 1..=6 {
        for _ in 0..20 {
            let k = rng.gen_range(1..(1usize << n));
            let mut good: Vec<usize> = (0..1usize << n).collect();
            for i in (1..good.len()).rev() {
                good.swap(i, rng.gen_range(0..=i));
            }
            let spec = OracleSpec::new(n, good[..k].iter().copied()).unwrap();
            let psi0 = random_state(n, &mut rng);
            let mut amps = psi0.into_amplitudes();
            amps.resize(2 << n, 0.0);
            let mut a = StateVector::from_amplitudes(amps).unwrap();
            let mut b = a.clone();
            build_oracle(&spec).unwrap().apply(&mut a, &[]).unwrap();
            apply_oracle_semantic(&mut b, &spec).unwrap();
            worst = worst.max(max_diff(a.amplitudes(), b.amplitudes()));
        }
    }
    check("oracle circuit matches the index swap", worst, 1e-12)
}

fn problems(rng: &mut impl Rng) -> Vec<(VqsProblem, Vec<f64>)> {
    let mut out = Vec::new();
    for n in [2, 4, 6] {
        for family in [AnsatzFamily::TypeI, AnsatzFamily::TypeII] {
            let spec = AnsatzSpec::new(family, 2, n + 1).unwrap();
            let good = rng.gen_range(0..1usize << n);
            let p = VqsProblem::new(random_state(n, rng), OracleSpec::new(n, [good]).unwrap(), spec).unwrap();
            let theta = random_theta(&spec, rng);
            out.push((p, theta));
        }
    }
    out
}

fn expectation_methods() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for (p, theta) in problems(&mut rng) {
        for z2 in [false, true] {
            let eval = |m| if z2 { p.expectation_z2(&theta, m) } else { p.expectation_z1(&theta, m) };
            let d = eval(ExpectationMethod::Direct).unwrap();
            let h = eval(ExpectationMethod::HadamardTest).unwrap();
            worst = worst.max((d - h).abs());
        }
    }
    check("Hadamard test matches direct expectations", worst, 1e-10)
}

fn objective_identity() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for (p, theta) in problems(&mut rng) {
        let f = p.objective(&theta).unwrap();
        let z1 = p.expectation_z1(&theta, ExpectationMethod::Direct).unwrap();
        let z2 = p.expectation_z2(&theta, ExpectationMethod::Direct).unwrap();
        worst = worst.max((f + 0.5 * (z1 - z2)).abs());
    }
    check("objective equals -(Z1 - Z2)/2", worst, 1e-10)
}

fn gradient_vs_differences() -> CheckResult {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for (p, theta) in problems(&mut rng) {
        let (_, grad) = p.objective_and_gradient(&theta).unwrap();
        for (j, g) in grad.iter().enumerate() {
            let mut t = theta.clone();
            t[j] += H;
            let up = p.objective(&t).unwrap();
            t[j] -= 2.0 * H;
            let down = p.objective(&t).unwrap();
            worst = worst.max((g - (up - down) / (2.0 * H)).abs());
        }
    }
    check("gradient matches central differences", worst, 1e-6)
}

fn objective_lower_bound() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for (p, _) in problems(&mut rng) {
        let (f_min, _) = analytic_minimum(p.psi0(), p.oracle()).unwrap();
        for _ in 0..20 {
            let theta = random_theta(p.ansatz_spec(), &mut rng);
            worst = worst.max(f_min - p.objective(&theta).unwrap());
        }
    }
    check("objective never drops below the analytic minimum", worst, 1e-10)
}

fn grover_closed_form() -> CheckResult {
    let mut worst = 0.0f64;
    for n in 2..=8 {
        for k in 1..=3usize.min((1 << n) - 1) {
            let spec = OracleSpec::last_k(n, k).unwrap();
            for t in [0, 1, 2, 5, 13] {
                let s = simulate_grover(&spec, t).unwrap();
                let p: f64 = spec.good().iter().map(|&g| s.amplitudes()[g].powi(2)).sum();
                worst = worst.max((p - closed_form_probability(n, k as u64, t as u64)).abs());
            }
        }
    }
    check("simulated Grover matches the closed form", worst, 1e-10)
}

fn grover_recurrences() -> CheckResult {
    let mut worst = 0.0f64;
    for n in 2..=10 {
        for k in [1usize, 3] {
            if k >= 1 << n {
                continue;
            }
            let spec = OracleSpec::last_k(n, k).unwrap();
            let mut two = SymmetricAmplitudes::uniform(n, k as u64);
            for t in 1..=30 {
                two.step();
                let full = amplitude_recurrence_full(&spec, t).unwrap();
                for (i, a) in full.iter().enumerate() {
                    let want = if spec.is_good(i) { two.good } else { two.bad };
                    worst = worst.max((a - want).abs());
                }
            }
        }
    }
    check("two-amplitude recurrence matches the full vector", worst, 1e-12)
}

fn depth_formulas() -> CheckResult {
    let mut bad = Vec::new();
    for n in [2usize, 8, 14, 20, 26] {
        let d = |kind| formula_depth(kind, n, AnsatzFamily::TypeI, 3).unwrap();
        for (kind, want) in [
            (DepthKind::OverlapTest, 8 * n + 3),
            (DepthKind::LabelTest, 8 * n + 4),
            (DepthKind::Search, 5 * n + 2),
            (DepthKind::ControlledAnsatz, 6 * n + 3),
        ] {
            if d(kind) != want {
                bad.push(format!("{kind:?} n={n}"));
            }
        }
        if n <= 14 {
            let spec = AnsatzSpec::new(AnsatzFamily::TypeI, 3, n + 1).unwrap();
            if build_ansatz(&spec).unwrap().structural_depth() != 3 * (n + 1) {
                bad.push(format!("type-I structural n={n}"));
            }
            if decompose_mcx(n).unwrap().structural_depth() != 2 * n - 1 {
                bad.push(format!("decomposition n={n}"));
            }
        }
    }
    let spec = AnsatzSpec::new(AnsatzFamily::TypeII, 1, 27).unwrap();
    let opts = CircuitOptions { oracle: OracleRealization::Decomposed, uniform_prep: false };
    let search = build_search_circuit(&OracleSpec::last_k(26, 1).unwrap(), &spec, opts).unwrap();
    if search.structural_depth() != 56 {
        bad.push(format!("search circuit n=26 depth {}", search.structural_depth()));
    }
    CheckResult {
        name: "depth formulas",
        passed: bad.is_empty(),
        detail: if bad.is_empty() { "all match".into() } else { bad.join(", ") },
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
