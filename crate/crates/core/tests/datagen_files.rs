use std::io::BufReader;

use matfun::datagen::*;
use matfun::rng::stream_rng;
use matfun::{Matrix, MatrixFunction};

#[test]
fn same_seed_same_matrix() {
    let a = sample_matrix(3, &mut stream_rng(7, "exp/n3", 0), Sampling::default());
    let b = sample_matrix(3, &mut stream_rng(7, "exp/n3", 0), Sampling::default());
    assert_eq!(a.as_slice(), b.as_slice());
    // Frozen from this generator to detect silent PRNG or derivation changes.
    let frozen = sample_matrix(1, &mut stream_rng(0, "probe", 0), Sampling::default()).as_slice()[0];
    assert_eq!(frozen.to_bits(), FROZEN_PROBE.to_bits(), "{frozen:e}");
}

const FROZEN_PROBE: f64 = f64::from_bits(13826810009996490035); // -0.5842830215694107

#[test]
fn gaussian_mean_within_three_standard_errors() {
    let mut rng = stream_rng(3, "mean", 0);
    let draws = 100_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let v = sample_matrix(1, &mut rng, Sampling::default()).as_slice()[0];
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = sum_sq / draws as f64 - mean * mean;
    assert!(mean.abs() <= 3.0 * (var / draws as f64).sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 0.02);
}

#[test]
fn log_rejection_rate_is_stable_across_seeds() {
    let rate = |seed| {
        let (m, _) = generate(MatrixFunction::Log, 3, 5_000, seed, Sampling::default()).unwrap();
        m.rejections.domain as f64 / m.draws as f64
    };
    let (r1, r2) = (rate(1), rate(2));
    assert!(r1 > 0.0 && (r1 - r2).abs() <= 0.02, "{r1} vs {r2}");
}

#[test]
fn persisted_samples_satisfy_postconditions() {
    for f in [MatrixFunction::Sign, MatrixFunction::Log] {
        let (m, samples) = generate(f, 3, 300, 5, Sampling::default()).unwrap();
        assert_eq!(m.draws, 300 + m.rejections.total());
        for s in &samples {
            assert!(f.in_domain(&s.input).unwrap());
            assert!(s.input.as_slice().iter().all(|v| v.abs() <= 5.0));
            if f == MatrixFunction::Sign {
                let r = (&s.target * &s.target).add_identity(-1.0).frobenius_norm();
                assert!(r <= 1e-6);
            }
        }
    }
}

#[test]
fn write_read_is_bitwise_and_deterministic() {
    let (m, samples) = generate(MatrixFunction::Sin, 2, 1000, 42, Sampling::default()).unwrap();
    let mut a = Vec::new();
    write_dataset(&mut a, &m, &samples).unwrap();
    let (m2, back) = read_dataset(BufReader::new(a.as_slice())).unwrap();
    assert_eq!(m2, m);
    for (x, y) in samples.iter().zip(&back) {
        assert!(x.input.as_slice().iter().zip(y.input.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(x.target.as_slice().iter().zip(y.target.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let (m3, samples3) = generate(MatrixFunction::Sin, 2, 1000, 42, Sampling::default()).unwrap();
    let mut b = Vec::new();
    write_dataset(&mut b, &m3, &samples3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manifest_mismatch_and_corruption() {
    let (mut m, samples) = generate(MatrixFunction::Exp, 1, 10, 1, Sampling::default()).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &m, &samples).unwrap();
    let mut text = String::from_utf8(buf).unwrap();
    text = text.lines().take(5).collect::<Vec<_>>().join("\n");
    assert!(matches!(read_dataset(text.as_bytes()), Err(matfun::Error::Manifest(_))));
    m.count = 11;
    assert!(write_dataset(Vec::new(), &m, &samples).is_err());
    let bad = format!(
        "{}\n{{\"index\":0,\"input\":[1.0,2.0],\"target\":[1.0]}}\n",
        String::from_utf8({
            let mut v = Vec::new();
            m.count = 1;
            write_dataset(&mut v, &m, &samples[..1]).unwrap();
            v
        })
        .unwrap()
        .lines()
        .next()
        .unwrap()
    );
    assert!(matches!(read_dataset(bad.as_bytes()), Err(matfun::Error::Corrupt(_))));
}

#[test]
fn injected_diagonal_sign() {
    let t = target_for(MatrixFunction::Sign, &Matrix::from_diag(&[2.0, -3.0])).unwrap();
    assert!(t.distance(&Matrix::from_diag(&[1.0, -1.0])) <= 1e-12);
}
