//! Reverse-mode gradients through a tiny convolution + matmul graph, checked
//! against central finite differences.

use crosslinear::ndgrad::{finite_diff_check, Graph, Tensor};

fn main() -> crosslinear::Result<()> {
    let x = Tensor::new(&[2, 6], vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.5, 1.0, 1.0, -2.0, 0.5, 0.0, 3.0])?;
    let kernel = Tensor::new(&[1, 2, 3], vec![0.2, -0.1, 0.4, 0.3, 0.0, -0.2])?.with_requires_grad(true);
    let bias = Tensor::new(&[1], vec![0.1])?.with_requires_grad(true);
    let w = Tensor::new(&[6, 2], (0..12).map(|i| (i as f64 - 6.0) / 10.0).collect())?.with_requires_grad(true);
    let target = Tensor::new(&[1, 2], vec![1.0, -1.0])?;

    let mut g = Graph::new();
    let xv = g.constant(&x);
    let (k, b, wv) = (g.leaf(&kernel), g.leaf(&bias), g.leaf(&w));
    let h = g.conv1d(xv, k, b, 1)?;
    let y = g.matmul(h, wv)?;
    let t = g.constant(&target);
    let loss = g.mse(y, t)?;
    g.backward(loss)?;
    println!("loss = {:.6}", g.value(loss)[0]);
    println!("dL/dkernel = {:?}", g.grad(k).unwrap());

    let params = vec![
        ("kernel".to_string(), kernel),
        ("bias".to_string(), bias),
        ("w".to_string(), w),
    ];
    let report = finite_diff_check(
        |g, v| {
            let xv = g.constant(&x);
            let h = g.conv1d(xv, v[0], v[1], 1)?;
            let y = g.matmul(h, v[2])?;
            let t = g.constant(&target);
            g.mse(y, t)
        },
        &params,
        1e-6,
    )?;
    for group in &report.groups {
        println!("{:<7} max relative error {:.2e}", group.name, group.max_error);
    }
    println!("passes at 1e-4: {}", report.passes(1e-4));
    Ok(())
}
