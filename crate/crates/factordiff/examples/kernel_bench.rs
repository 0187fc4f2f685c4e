//! Rough single-core throughput probes for the hot kernels.
//!
//!     cargo run -p factordiff --example kernel_bench

use std::time::Instant;

fn main() {
    // erf throughput via the GELU-bearing graph path.
    let n = 5_000_000usize;
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64) * 6.0 - 3.0).collect();
    let t0 = Instant::now();
    let mut acc = 0.0;
    for &x in &xs {
        acc += statrs::function::erf::erf(x);
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("statrs erf: {:.1} ns/call (acc {acc:.3})", dt / n as f64 * 1e9);

    let t0 = Instant::now();
    let mut acc = 0.0;
    for &x in &xs {
        acc += x.tanh();
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("std tanh:   {:.1} ns/call (acc {acc:.3})", dt / n as f64 * 1e9);

    let t0 = Instant::now();
    let mut acc = 0.0;
    for &x in &xs {
        acc += (-0.5 * x * x).exp();
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("std exp:    {:.1} ns/call (acc {acc:.3})", dt / n as f64 * 1e9);

    // Matmul throughput at the batched-sampling shape.
    let (m, k, nn) = (1024usize, 32usize, 128usize);
    let a = vec![0.5f64; m * k];
    let b = vec![0.25f64; k * nn];
    let mut c = vec![0.0f64; m * nn];
    let reps = 200;
    let t0 = Instant::now();
    for _ in 0..reps {
        c.fill(0.0);
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            let crow = &mut c[i * nn..(i + 1) * nn];
            for (kk, &aik) in arow.iter().enumerate() {
                let brow = &b[kk * nn..(kk + 1) * nn];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += aik * bv;
                }
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let flops = 2.0 * (m * k * nn * reps) as f64;
    println!("matmul {}x{}x{}: {:.2} Gflop/s (c[0] {})", m, k, nn, flops / dt / 1e9, c[0]);
}
