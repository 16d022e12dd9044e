use matfun::relu::*;
use matfun::{oracles::mat_exp, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
}

#[test]
fn square_net_endpoint_and_grid() {
    let net = build_square_net(1e-2, 1.0).unwrap();
    assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.0]);
    assert!((net.forward(&[1.0]).unwrap()[0] - 1.0).abs() <= 1e-2);
    let worst = grid(-1.0, 1.0, 100_000).map(|x| (net.forward(&[x]).unwrap()[0] - x * x).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-2);
}

#[test]
fn square_net_depth_is_logarithmic() {
    let d = |delta: f64| build_square_net(delta, 1.0).unwrap().depth();
    // Each factor 4 in M²/delta adds one level.
    assert_eq!(d(1e-4) - d(4e-4), 1);
    assert!(d(1e-8) <= 14);
}

#[test]
fn binary_product_random_pairs() {
    let net = build_binary_product(1e-3, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        let (x, y): (f64, f64) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        assert!((net.forward(&[x, y]).unwrap()[0] - x * y).abs() <= 1e-3);
    }
    let net = build_binary_product(1e-2, 3.0, 1.5).unwrap();
    for _ in 0..10_000 {
        let (x, y): (f64, f64) = (rng.random_range(-3.0..=3.0), rng.random_range(-1.5..=1.5));
        assert!((net.forward(&[x, y]).unwrap()[0] - x * y).abs() <= 1e-2);
    }
}

#[test]
fn triple_product_random_triples() {
    let net = build_lary_product(3, 1e-2, &[1.0; 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        worst = worst.max((net.forward(&x).unwrap()[0] - x[0] * x[1] * x[2]).abs());
    }
    assert!(worst <= 1e-2, "{worst}");
    let r = certify(&net, Oracle::Product, SampleBox { dim: 3, bound: 1.0 }, 10_000).unwrap();
    assert!(r.max_error <= 1e-2);
}

#[test]
fn lary_product_with_unequal_bounds() {
    let bounds = [2.0, 1.0, 3.0, 1.5, 1.0];
    let net = build_lary_product(5, 5e-2, &bounds).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5_000 {
        let x: Vec<f64> = bounds.iter().map(|&m| rng.random_range(-m..=m)).collect();
        let exact: f64 = x.iter().product();
        assert!((net.forward(&x).unwrap()[0] - exact).abs() <= 5e-2);
    }
}

#[test]
fn lary_width_is_linear_in_l() {
    let ratios: Vec<f64> =
        (2..=8).map(|l| build_lary_product(l, 1e-2, &vec![1.0; l]).unwrap().width() as f64 / l as f64).collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    // Three squarers of five units per factor at the widest layer.
    assert!(max <= 15.0, "{ratios:?}");
    assert!(max / min <= 2.0, "{ratios:?}");
}

#[test]
fn matrix_square_net_random_samples() {
    let net = build_matrix_power_net(2, 2, 1e-2, 1.0, DEFAULT_BUDGET).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let m = Matrix::from_vec(2, a.clone()).unwrap();
        let exact = &m * &m;
        let got = net.forward(&a).unwrap();
        for (g, e) in got.iter().zip(exact.as_slice()) {
            assert!((g - e).abs() <= 1e-2);
        }
    }
}

#[test]
fn matrix_cube_uses_n_squared_paths_per_entry() {
    // Every entry of A³ for 2×2 sums 2² products of three factors.
    assert_eq!(paths_per_entry(2, 3), 4);
    let template = build_lary_product(3, 1e-2 / 4.0, &[1.0; 3]).unwrap();
    let net = build_matrix_power_net(2, 3, 1e-2, 1.0, DEFAULT_BUDGET).unwrap();
    let products = 4 * paths_per_entry(2, 3);
    assert_eq!(net.width(), products * template.width());
    let r = certify(&net, Oracle::MatrixPower { n: 2, k: 3 }, SampleBox { dim: 4, bound: 1.0 }, 2_000).unwrap();
    // Entrywise ≤ delta implies Frobenius ≤ n·delta.
    assert!(r.max_error <= 2e-2);
}

#[test]
fn exp_net_scalar_grid_certification() {
    for eps in [0.1, 0.01] {
        let spec = ExpNetSpec::new(1, 1.0, eps).unwrap();
        let net = build_exp_net(&spec, DEFAULT_BUDGET).unwrap();
        let r = certify_exp(&net, &spec, 100_000).unwrap();
        assert_eq!(r.points, 100_000);
        assert!(r.max_error <= eps, "eps={eps}: {}", r.max_error);
        let worst =
            grid(-1.0, 1.0, 100_000).map(|a| (net.forward(&[a]).unwrap()[0] - a.exp()).abs()).fold(0.0, f64::max);
        assert!(worst <= eps);
        let b = r.bounds.unwrap();
        assert!(r.width as f64 <= b.c1 * b.width_shape + 1e-9);
        assert!(r.depth as f64 <= b.c2 * b.depth_shape + 1e-9);
    }
}

#[test]
fn exp_net_two_by_two_certification() {
    let spec = ExpNetSpec::new(2, 1.0, 0.5).unwrap();
    assert_eq!(spec.k, 6);
    let net = build_exp_net(&spec, DEFAULT_BUDGET).unwrap();
    let r = certify_exp(&net, &spec, 10_000).unwrap();
    assert!(r.max_error <= 0.5, "{}", r.max_error);
    let zero = net.forward(&[0.0; 4]).unwrap();
    let id = Matrix::identity(2);
    assert!(Matrix::from_vec(2, zero).unwrap().distance(&id) <= 0.5);
}

#[test]
fn exp_depth_over_k_log_k_is_bounded() {
    let ratios: Vec<f64> = [0.5, 0.1, 0.05, 0.01]
        .iter()
        .map(|&eps| {
            let spec = ExpNetSpec::new(1, 1.0, eps).unwrap();
            let net = build_exp_net(&spec, DEFAULT_BUDGET).unwrap();
            let k = spec.k as f64;
            net.depth() as f64 / (k * k.ln())
        })
        .collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min <= 3.0, "{ratios:?}");
}

#[test]
fn taylor_remainder_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for n in [1usize, 2] {
        let nm = n as f64;
        let k0 = (2.0 * std::f64::consts::E * nm).ceil() as usize - 1;
        for k in k0..=k0 + 5 {
            let bound = 0.5f64.powi(k as i32 + 1) * nm.exp() / (2.0 * std::f64::consts::PI).sqrt();
            for _ in 0..2_000 {
                let a = Matrix::from_vec(n, (0..n * n).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap();
                let mut term = Matrix::identity(n);
                let mut sum = Matrix::identity(n);
                for j in 1..=k {
                    term = (&term * &a).scale(1.0 / j as f64);
                    sum = &sum + &term;
                }
                let tail = mat_exp(&a).unwrap().distance(&sum);
                assert!(tail <= bound, "n={n} K={k}: {tail} > {bound}");
            }
        }
    }
}

#[test]
fn scaling_is_consistent_on_linear_pieces() {
    let net = build_lary_product(3, 1e-2, &[1.0; 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut checked = 0;
    for _ in 0..500 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.9..0.9)).collect();
        let alpha = 1.0 + rng.random_range(-1e-6..1e-6);
        let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let pattern = net.activation_pattern(&x).unwrap();
        if net.activation_pattern(&ax).unwrap() != pattern {
            continue;
        }
        checked += 1;
        let c = net.forward_with_pattern(&[0.0; 3], &pattern).unwrap()[0];
        let fx = net.forward(&x).unwrap()[0];
        assert_eq!(net.forward_with_pattern(&x, &pattern).unwrap()[0], fx);
        let fax = net.forward(&ax).unwrap()[0];
        assert!(((fax - c) - alpha * (fx - c)).abs() <= 1e-9, "{fax} vs {}", c + alpha * (fx - c));
    }
    assert!(checked > 100);
}

#[test]
fn weight_file_round_trip_preserves_outputs() {
    let spec = ExpNetSpec::new(1, 1.0, 0.1).unwrap();
    let net = build_exp_net(&spec, DEFAULT_BUDGET).unwrap();
    let report = certify_exp(&net, &spec, 1_000).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.relu");
    write_network(std::fs::File::create(&path).unwrap(), &net, Some(&spec), Some(&report)).unwrap();
    let (header, back) = read_network(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(header.certification.unwrap().max_error, report.max_error);
    for a in grid(-1.0, 1.0, 101) {
        assert_eq!(back.forward(&[a]).unwrap(), net.forward(&[a]).unwrap());
    }
}
