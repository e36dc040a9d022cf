use pfnn::special_functions::{bessel_k0, bessel_k1};
use proptest::prelude::*;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// K_n(z) = ∫_0^∞ exp(−z cosh t) cosh(n t) dt by the trapezoid rule, which is
// spectrally accurate for this analytic, even, doubly-exponentially decaying
// integrand.
fn oracle(n: i32, z: f64) -> f64 {
    let h = 0.02;
    let mut sum = 0.5 * (-z).exp();
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let e = z * t.cosh();
        if e > 745.0 {
            break;
        }
        sum += (-e).exp() * (n as f64 * t).cosh();
        k += 1;
    }
    sum * h
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[test]
fn k0_k1_match_integral_oracle() {
    let mut worst: f64 = 0.0;
    for z in log_grid(1e-8, 50.0, 600) {
        for (n, v) in [(0, bessel_k0(z).unwrap()), (1, bessel_k1(z).unwrap())] {
            let o = oracle(n, z);
            let rel = ((v - o) / o).abs();
            worst = worst.max(rel);
            assert!(rel <= 1e-10, "K{n}({z}) = {v}, oracle {o}, rel {rel}");
        }
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn oracle_agrees_with_small_argument_series() {
    // K0(z) = −(ln(z/2) + γ) I0(z) + Σ (z²/4)^k/(k!)² H_k
    for z in [1e-6, 1e-3, 0.1, 0.5] {
        let q = 0.25 * z * z;
        let (mut i0, mut s, mut term, mut hk) = (1.0, 0.0, 1.0, 0.0);
        for k in 1..40 {
            term *= q / (k * k) as f64;
            hk += 1.0 / k as f64;
            i0 += term;
            s += term * hk;
        }
        let series = -((0.5 * z).ln() + EULER_GAMMA) * i0 + s;
        assert!(((oracle(0, z) - series) / series).abs() < 1e-12);
    }
}

#[test]
fn k1_is_minus_k0_derivative() {
    for z in log_grid(0.1, 20.0, 200) {
        let h = 1e-5 * z;
        let d = (bessel_k0(z + h).unwrap() - bessel_k0(z - h).unwrap()) / (2.0 * h);
        let k1 = bessel_k1(z).unwrap();
        assert!(((k1 + d) / k1).abs() <= 1e-6, "z = {z}");
    }
}

#[test]
fn small_argument_law() {
    let z = 1e-6;
    assert!((bessel_k0(z).unwrap() + (0.5 * z).ln() + EULER_GAMMA).abs() < 1e-4);
    assert!((bessel_k0(1e-3).unwrap() - 7.0237).abs() < 1e-4);
    assert!((bessel_k1(1e-3).unwrap() - 1000.0).abs() < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn strictly_decreasing(a in 1e-6f64..40.0, step in 1e-6f64..5.0) {
        let b = a + step;
        prop_assert!(bessel_k0(b).unwrap() < bessel_k0(a).unwrap());
        prop_assert!(bessel_k1(b).unwrap() < bessel_k1(a).unwrap());
        prop_assert!(bessel_k0(b).unwrap() > 0.0);
    }
}
