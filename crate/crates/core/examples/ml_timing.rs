//! Per-call cost of the cached Mittag-Leffler evaluator across regimes.
//!
//! cargo run --release --example ml_timing

use fracsource::mlf::{MittagLeffler, MlParams};
use std::time::Instant;

fn main() {
    let calls = 2000;
    for alpha in [0.1, 0.5, 0.9] {
        let f = MittagLeffler::new(MlParams::new(alpha, alpha).unwrap());
        let start = Instant::now();
        f.eval(-1.0).unwrap();
        println!("alpha = {alpha}: first call {:.1} us", start.elapsed().as_secs_f64() * 1e6);
        for s in [0.5, 8.0, 20.0, 33.0, 40.0, 1e3] {
            let z = -f64::powf(s, alpha);
            let start = Instant::now();
            let mut v = 0.0;
            for _ in 0..calls {
                v = f.eval(std::hint::black_box(z)).unwrap();
            }
            let us = start.elapsed().as_secs_f64() * 1e6 / calls as f64;
            println!("  z = {z:>12.4}: {us:6.2} us/call  E = {v:.6e}");
        }
    }
}
