//! Mittag-Leffler values against a 25-digit reference table.

use fracsource::mlf::{ml_eval, MlParams};

struct Row {
    alpha: f64,
    beta: f64,
    x: f64,
    value: f64,
}

fn rows() -> Vec<Row> {
    let text = include_str!("data/ml_oracle.csv");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.trim().parse().unwrap()).collect();
            Row {
                alpha: f[0],
                beta: f[1],
                x: f[2],
                value: f[3],
            }
        })
        .collect()
}

#[test]
fn matches_reference_table() {
    let mut worst_near = 0.0f64;
    let mut worst_far = 0.0f64;
    for r in rows() {
        let p = MlParams::new(r.alpha, r.beta).unwrap();
        let got = ml_eval(&p, -r.x).unwrap();
        let rel = ((got - r.value) / r.value).abs();
        let tol = if r.x <= 100.0 { 1e-10 } else { 1e-8 };
        if r.x <= 100.0 {
            worst_near = worst_near.max(rel);
        } else {
            worst_far = worst_far.max(rel);
        }
        assert!(
            rel <= tol,
            "alpha={} beta={} x={}: got {got:e}, want {:e}, rel {rel:e}",
            r.alpha,
            r.beta,
            r.x,
            r.value
        );
    }
    println!("worst relative error: |z|<=100 {worst_near:e}, |z|>100 {worst_far:e}");
}
