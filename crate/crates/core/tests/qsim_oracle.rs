mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;
use uavq_core::qsim::{ring_entangler, run_circuit, Gate, Statevector};

fn max_diff(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn z0(gates: &[Gate]) -> f64 {
    run_circuit(5, gates).unwrap().expect_z(0).unwrap()
}

#[test]
fn ring_entangler_matches_dense_product() {
    let ring = ring_entangler(5).unwrap();
    let u = circuit_dense(&ring, 5);
    // |10000> lists qubit 0 first, so it is basis index 1; |01111> is 30
    let out = apply_dense(&u, &basis_state(5, 1));
    assert_eq!(out, basis_state(5, 30));
    let mut sv = Statevector::basis(5, 1).unwrap();
    sv.apply_ring_entangler().unwrap();
    assert!(max_diff(sv.amplitudes(), &out) < 1e-15);
    for idx in 0..32 {
        let mut sv = Statevector::basis(5, idx).unwrap();
        sv.apply_all(&ring).unwrap();
        assert!(max_diff(sv.amplitudes(), &apply_dense(&u, &basis_state(5, idx))) < 1e-15);
    }
}

#[test]
fn random_circuits_match_dense_unitaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=5 {
        for _ in 0..10 {
            let gates = if n == 1 {
                (0..20)
                    .map(|i| [Gate::Rx { target: 0, angle: 0.3 * i as f64 }, Gate::Ry { target: 0, angle: -0.7 }, Gate::Rz { target: 0, angle: 1.1 }][i % 3])
                    .collect()
            } else {
                random_circuit(&mut rng, n, 40)
            };
            let sv = run_circuit(n, &gates).unwrap();
            let dense = apply_dense(&circuit_dense(&gates, n), &basis_state(n, 0));
            assert!(max_diff(sv.amplitudes(), &dense) < 1e-12);
            for q in 0..n {
                assert!((sv.expect_z(q).unwrap() - expect_z_dense(&dense, q, n)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn parameter_shift_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 50 {
        let gates = random_circuit(&mut rng, 5, 30);
        let Some(k) = gates.iter().position(|g| g.angle().is_some()) else {
            continue;
        };
        let theta = gates[k].angle().unwrap();
        let with = |a: f64| {
            let mut g = gates.clone();
            g[k] = g[k].with_angle(a);
            g
        };
        let shift = (z0(&with(theta + FRAC_PI_2)) - z0(&with(theta - FRAC_PI_2))) / 2.0;
        let h = 1e-5;
        let dense_z0 = |a: f64| expect_z_dense(&apply_dense(&circuit_dense(&with(a), 5), &basis_state(5, 0)), 0, 5);
        let fd = (dense_z0(theta + h) - dense_z0(theta - h)) / (2.0 * h);
        assert!((shift - fd).abs() < 1e-6, "shift {shift} vs fd {fd}");
        checked += 1;
    }
}

fn gate_strategy() -> impl Strategy<Value = Gate> {
    (0usize..5, 0usize..4, 0usize..4, -10.0f64..10.0).prop_map(|(t, kind, off, angle)| match kind {
        0 => Gate::Rx { target: t, angle },
        1 => Gate::Ry { target: t, angle },
        2 => Gate::Rz { target: t, angle },
        _ => Gate::Cnot {
            control: (t + 1 + off) % 5,
            target: t,
        },
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn norm_is_preserved(gates in prop::collection::vec(gate_strategy(), 100)) {
        let sv = run_circuit(5, &gates).unwrap();
        prop_assert!((sv.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotations_compose(a in -7.0f64..7.0, b in -7.0f64..7.0, q in 0usize..3, prep in prop::collection::vec(gate_strategy().prop_filter("3 qubits", |g| g.target() < 3 && g.control().is_none_or(|c| c < 3)), 0..10)) {
        for make in [|q, a| Gate::Rx { target: q, angle: a }, |q, a| Gate::Ry { target: q, angle: a }, |q, a| Gate::Rz { target: q, angle: a }] {
            let mut two = prep.clone();
            two.extend([make(q, a), make(q, b)]);
            let mut one = prep.clone();
            one.push(make(q, a + b));
            let (s2, s1) = (run_circuit(3, &two).unwrap(), run_circuit(3, &one).unwrap());
            prop_assert!(max_diff(s2.amplitudes(), s1.amplitudes()) < 1e-10);
        }
    }

    #[test]
    fn cnot_is_an_involution(prep in prop::collection::vec(gate_strategy(), 0..30), c in 0usize..5, off in 1usize..5) {
        let t = (c + off) % 5;
        let before = run_circuit(5, &prep).unwrap();
        let mut after = before.clone();
        let g = Gate::Cnot { control: c, target: t };
        after.apply(&g).unwrap();
        after.apply(&g).unwrap();
        prop_assert!(max_diff(before.amplitudes(), after.amplitudes()) < 1e-12);
    }

    #[test]
    fn expectations_lie_in_unit_interval(gates in prop::collection::vec(gate_strategy(), 0..50)) {
        let sv = run_circuit(5, &gates).unwrap();
        for z in sv.expect_z_all() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
        }
    }
}
