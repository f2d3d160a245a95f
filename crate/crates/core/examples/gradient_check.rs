// Compares backpropagation against central finite differences on a small
// dropout network with fixed masks.

use mcfdd::math::{Matrix, RngStream};
use mcfdd::network::{sample_masks, NetworkConfig, NetworkParams};

pub fn run_example() -> mcfdd::Result<f64> {
    let cfg = NetworkConfig::new(4).with_hidden(&[8, 6]).with_classes(3).with_dropout(0.2).with_seed(11);
    let mut net = NetworkParams::init(&cfg)?;
    let mut rng = RngStream::new(5);
    // nonzero biases keep the check away from ReLU kinks
    for layer in &mut net.layers {
        if let Some(b) = &mut layer.bias {
            b.iter_mut().for_each(|v| *v = 0.1 * rng.standard_normal());
        }
    }
    let xs = Matrix::new(5, 4, (0..20).map(|_| rng.standard_normal()).collect())?;
    let labels = [0, 1, 2, 1, 0];
    let masks: Vec<_> = (0..5).map(|_| sample_masks(&cfg, &mut rng)).collect();

    let (grads, loss) = net.backward(&xs, &labels, Some(&masks))?;
    let analytic: Vec<f64> = grads.values().copied().collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for l in 0..net.layers.len() {
        for j in 0..net.layers[l].num_params() {
            let mut probe = net.clone();
            *probe.layers[l].values_mut().nth(j).unwrap() += h;
            let up = probe.backward(&xs, &labels, Some(&masks))?.1;
            *probe.layers[l].values_mut().nth(j).unwrap() -= 2.0 * h;
            let down = probe.backward(&xs, &labels, Some(&masks))?.1;
            let numeric = (up - down) / (2.0 * h);
            let err = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            k += 1;
        }
    }
    println!("{k} parameters, batch loss {loss:.4}, worst relative error {worst:.2e}");
    Ok(worst)
}

fn main() -> mcfdd::Result<()> {
    run_example().map(drop)
}
