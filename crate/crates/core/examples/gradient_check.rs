//! Central finite differences against the analytic mesh convolution backward pass.

use medmesh::ops::{mesh_conv_backward, mesh_conv_forward, mesh_conv_forward_cached, ConvKernel};
use medmesh::synth::random_surface;
use medmesh::FeatureMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> medmesh::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mesh = random_surface(4, 300);
    let e = mesh.edge_count();
    let mut rand_map = |c: usize| {
        let v = (0..c * e).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMap::from_vec(c, e, v)
    };
    let x = rand_map(3)?;
    let w = rand_map(4)?;
    let k = ConvKernel::normal(3, 4, 0.5, &mut ChaCha8Rng::seed_from_u64(2));

    let loss = |x: &FeatureMap| -> f64 {
        (&mesh_conv_forward(x, &mesh, &k).unwrap().values() * &w.values()).sum()
    };
    let (_, cache) = mesh_conv_forward_cached(&x, &mesh, &k)?;
    let (dx, _) = mesh_conv_backward(&w, &cache, &k)?;

    let h = 1e-6;
    let mut worst = 0.0f64;
    for (c, i) in [(0, 0), (1, e / 2), (2, e - 1)] {
        let mut up = x.clone();
        up.values_mut()[[c, i]] += h;
        let mut down = x.clone();
        down.values_mut()[[c, i]] -= h;
        let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
        let analytic = dx.values()[[c, i]];
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-7);
        println!("x[{c},{i}]: analytic {analytic:.8} numeric {numeric:.8} rel {rel:.1e}");
        worst = worst.max(rel);
    }
    println!("worst relative error {worst:.1e}");
    Ok(())
}
