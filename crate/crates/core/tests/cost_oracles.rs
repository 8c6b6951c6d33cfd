//! Closed-form kernel costs checked against instrumented reference kernels.

use std::collections::HashSet;

use ndft_sim::workload::{kernel_cost, FamilyCoefs, KernelShape};

/// Naive triple loop over `(m x k) * (k x n)`; counts flops and distinct
/// elements touched.
fn naive_gemm(m: usize, n: usize, k: usize) -> (u64, usize, usize) {
    let a: Vec<f64> = (0..m * k).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..k * n).map(|i| 1.0 / (1 + i) as f64).collect();
    let mut c = vec![0.0; m * n];
    let mut flops = 0;
    let mut read = HashSet::new();
    let mut written = HashSet::new();
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                c[i * n + j] += a[i * k + p] * b[p * n + j];
                flops += 2;
                read.insert(("a", i * k + p));
                read.insert(("b", p * n + j));
            }
            written.insert(i * n + j);
        }
    }
    assert!(c.iter().all(|x| x.is_finite()));
    (flops, read.len(), written.len())
}

#[derive(Clone, Copy, Debug)]
struct C(f64, f64);

/// Recursive radix-2 decimation-in-time FFT counting real operations.
fn fft(x: &[C], ops: &mut u64) -> Vec<C> {
    let n = x.len();
    if n == 1 {
        return vec![x[0]];
    }
    let even: Vec<C> = x.iter().step_by(2).copied().collect();
    let odd: Vec<C> = x.iter().skip(1).step_by(2).copied().collect();
    let (e, o) = (fft(&even, ops), fft(&odd, ops));
    let mut out = vec![C(0.0, 0.0); n];
    for k in 0..n / 2 {
        let ang = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        // complex multiply: 4 mul + 2 add
        let t = C(wr * o[k].0 - wi * o[k].1, wr * o[k].1 + wi * o[k].0);
        // two complex adds: 4 add
        out[k] = C(e[k].0 + t.0, e[k].1 + t.1);
        out[k + n / 2] = C(e[k].0 - t.0, e[k].1 - t.1);
        *ops += 10;
    }
    out
}

fn dft(x: &[C]) -> Vec<C> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold(C(0.0, 0.0), |acc, (j, v)| {
                let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
                C(acc.0 + v.0 * ang.cos() - v.1 * ang.sin(), acc.1 + v.0 * ang.sin() + v.1 * ang.cos())
            })
        })
        .collect()
}

#[test]
fn gemm_4x4x4_matches_triple_loop() {
    let (flops, read, written) = naive_gemm(4, 4, 4);
    assert_eq!(flops, 128);
    let c = kernel_cost(KernelShape::Gemm { m: 4.0, n: 4.0, k: 4.0 }, FamilyCoefs::UNIT).unwrap();
    assert_eq!(c.flops, flops as f64);
    assert_eq!(c.bytes_read, 8.0 * read as f64);
    assert_eq!(c.bytes_written, 8.0 * written as f64);
}

#[test]
fn gemm_rectangular_matches_triple_loop() {
    for (m, n, k) in [(3, 5, 7), (1, 9, 2), (6, 1, 4)] {
        let (flops, read, written) = naive_gemm(m, n, k);
        let c = kernel_cost(
            KernelShape::Gemm {
                m: m as f64,
                n: n as f64,
                k: k as f64,
            },
            FamilyCoefs::UNIT,
        )
        .unwrap();
        assert_eq!(c.flops, flops as f64);
        assert_eq!(c.bytes(), 8.0 * (read + written) as f64);
    }
}

#[test]
fn fft_8_matches_instrumented_radix2() {
    let x: Vec<C> = (0..8).map(|i| C(i as f64, (i * i) as f64 * 0.5)).collect();
    let mut ops = 0;
    let y = fft(&x, &mut ops);
    for (a, b) in y.iter().zip(dft(&x)) {
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }
    assert_eq!(ops, 120);
    let c = kernel_cost(KernelShape::Fft { n: 8 }, FamilyCoefs::UNIT).unwrap();
    assert_eq!(c.flops, ops as f64);
    assert_eq!(c.bytes(), 32.0 * 8.0);
}

#[test]
fn fft_larger_powers_match_instrumented_radix2() {
    for log in 1..=10 {
        let n = 1usize << log;
        let x: Vec<C> = (0..n).map(|i| C(i as f64, 0.0)).collect();
        let mut ops = 0;
        fft(&x, &mut ops);
        let c = kernel_cost(KernelShape::Fft { n: n as u64 }, FamilyCoefs::UNIT).unwrap();
        assert_eq!(c.flops, ops as f64, "n = {n}");
    }
}

#[test]
fn fft_non_power_of_two_rounds_log_up() {
    let c = kernel_cost(KernelShape::Fft { n: 12 }, FamilyCoefs::UNIT).unwrap();
    assert_eq!(c.flops, 5.0 * 12.0 * 4.0);
}

#[test]
fn face_split_matches_elementwise_reference() {
    let n = 1000;
    let a: Vec<C> = (0..n).map(|i| C(i as f64, 1.0)).collect();
    let b: Vec<C> = (0..n).map(|i| C(1.0, -(i as f64))).collect();
    let mut flops = 0u64;
    let mut bytes = 0u64;
    let out: Vec<C> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            flops += 6;
            bytes += 16 + 16 + 16;
            C(x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0)
        })
        .collect();
    assert_eq!(out.len(), n);
    assert_eq!(flops, 6000);
    let c = kernel_cost(KernelShape::FaceSplit { n: n as f64 }, FamilyCoefs::UNIT).unwrap();
    assert_eq!(c.flops, flops as f64);
    assert_eq!(c.bytes(), bytes as f64);
}

#[test]
fn alltoall_and_syevd_closed_forms() {
    let a = kernel_cost(KernelShape::Alltoall { bytes: 1e6 }, FamilyCoefs::UNIT).unwrap();
    assert_eq!((a.flops, a.bytes()), (0.0, 2e6));
    let s = kernel_cost(KernelShape::Syevd { n: 1024 }, FamilyCoefs::new(9.0, 3.0)).unwrap();
    assert_eq!(s.flops, 9.0 * 1024f64.powi(3));
    assert_eq!(s.bytes(), 3.0 * 1024.0 * 1024.0 * 10.0);
}

#[test]
fn non_positive_sizes_are_rejected() {
    assert!(kernel_cost(KernelShape::Gemm { m: 0.0, n: 1.0, k: 1.0 }, FamilyCoefs::UNIT).is_err());
    assert!(kernel_cost(KernelShape::Fft { n: 0 }, FamilyCoefs::UNIT).is_err());
    assert!(kernel_cost(KernelShape::Syevd { n: 0 }, FamilyCoefs::UNIT).is_err());
}
