//! Rough kernel throughput check.

use std::time::Instant;

use microfuse::matrix::Matrix;
use microfuse::rng::Stream;

fn main() {
    let mut rng = Stream::new(1, &["bench"]);
    for (m, k, n, reps) in [
        (512usize, 96usize, 64usize, 400usize),
        (512, 64, 64, 600),
        (512, 64, 512, 80),
        (512, 256, 64, 200),
    ] {
        let a = Matrix::from_fn(m, k, |_, _| rng.next_range(-1.0, 1.0));
        let b = Matrix::from_fn(n, k, |_, _| rng.next_range(-1.0, 1.0));
        let start = Instant::now();
        let mut sink = 0.0;
        for _ in 0..reps {
            let c = a.matmul_nt(&b).unwrap();
            sink += c.get(0, 0);
        }
        let secs = start.elapsed().as_secs_f64();
        let gflops = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / secs / 1e9;
        println!("nt {m}x{k} * ({n}x{k})^T: {gflops:.2} GFLOP/s (sink {sink:.3})");

        let bt = Matrix::from_fn(k, n, |_, _| rng.next_range(-1.0, 1.0));
        let start = Instant::now();
        let mut sink = 0.0;
        for _ in 0..reps {
            let c = a.matmul_nn(&bt).unwrap();
            sink += c.get(0, 0);
        }
        let secs = start.elapsed().as_secs_f64();
        let gflops = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / secs / 1e9;
        println!("nn {m}x{k} * {k}x{n}:     {gflops:.2} GFLOP/s (sink {sink:.3})");
    }
}
