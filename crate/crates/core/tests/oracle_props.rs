use matfun::datagen::{sample_matrix, Sampling};
use matfun::oracles::*;
use matfun::{Matrix, MatrixFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gaussian(n: usize, seed: u64) -> Matrix {
    sample_matrix(n, &mut ChaCha8Rng::seed_from_u64(seed), Sampling::default())
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    a.distance(b) / b.frobenius_norm().max(1.0)
}

/// Well-conditioned similarity: I + 0.3·G.
fn similarity(n: usize, seed: u64) -> Option<(Matrix, Matrix)> {
    let s = gaussian(n, seed ^ 0x5eed).scale(0.3).add_identity(1.0);
    let inv = s.inverse().ok()?;
    (s.frobenius_norm() * inv.frobenius_norm() < 50.0).then_some((s, inv))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn functions_commute_with_their_argument(n in 1usize..=4, seed in any::<u64>()) {
        let a = gaussian(n, seed);
        for f in MatrixFunction::ALL {
            if !f.in_domain(&a).unwrap() {
                continue;
            }
            let fa = f.apply(&a).unwrap();
            let scale = fa.frobenius_norm().max(1.0) * a.frobenius_norm().max(1.0);
            prop_assert!((&fa * &a).distance(&(&a * &fa)) <= 1e-8 * scale, "{f}");
        }
    }

    #[test]
    fn similarity_covariance(n in 2usize..=4, seed in any::<u64>()) {
        let a = gaussian(n, seed).scale(0.5);
        let Some((s, inv)) = similarity(n, seed) else { return Ok(()) };
        let b = &(&s * &a) * &inv;
        for f in MatrixFunction::ALL {
            if !f.in_domain(&a).unwrap() || !f.in_domain(&b).unwrap() {
                continue;
            }
            let lhs = f.apply(&b).unwrap();
            let rhs = &(&s * &f.apply(&a).unwrap()) * &inv;
            prop_assert!(rel(&lhs, &rhs) <= 1e-7, "{f}: {}", rel(&lhs, &rhs));
        }
    }

    #[test]
    fn exp_of_sum_of_commuting(n in 1usize..=4, seed in any::<u64>(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let a = gaussian(n, seed).scale(0.5);
        let lhs = mat_exp(&a.scale(s + t)).unwrap();
        let rhs = &mat_exp(&a.scale(s)).unwrap() * &mat_exp(&a.scale(t)).unwrap();
        prop_assert!(rel(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn sign_is_idempotent(n in 1usize..=4, seed in any::<u64>()) {
        let a = gaussian(n, seed);
        if MatrixFunction::Sign.in_domain(&a).unwrap() {
            let s = mat_sign(&a).unwrap();
            prop_assert!(mat_sign(&s).unwrap().distance(&s) <= 1e-8 * s.frobenius_norm());
        }
    }
}

#[test]
fn identity_suite_small() {
    let mut checked = [0usize; 4];
    for n in [1usize, 2, 3, 5] {
        for seed in 0..100u64 {
            let a = gaussian(n, seed * 7 + n as u64);
            let id = Matrix::identity(n);
            let e = mat_exp(&a).unwrap();
            let en = mat_exp(&a.scale(-1.0)).unwrap();
            assert!((&e * &en).distance(&id) <= 1e-7);
            if MatrixFunction::Log.in_domain(&a).unwrap() {
                assert!(rel(&mat_exp(&mat_log(&a).unwrap()).unwrap(), &a) <= 1e-7);
                checked[1] += 1;
            }
            if MatrixFunction::Sign.in_domain(&a).unwrap() {
                let s = mat_sign(&a).unwrap();
                assert!((&s * &s).distance(&id) <= 1e-6);
                checked[2] += 1;
            }
            let (sn, cs) = mat_sin_cos(&a).unwrap();
            assert!((&(&sn * &sn) + &(&cs * &cs)).distance(&id) <= 1e-8);
            checked[0] += 1;
            checked[3] += 1;
        }
    }
    assert!(checked.iter().all(|&c| c > 100), "{checked:?}");
}
