//! Trains a small MeshUNet on generated vessels and scores it on held-out ones.
//!
//! `cargo run --release --example train_synthetic -- [epochs]`

use medmesh::metrics::MetricsReport;
use medmesh::net::{MeshUNet, NetworkConfig};
use medmesh::ops::NormMode;
use medmesh::synth::{class, generate, SynthSpec};
use medmesh::train::{
    evaluate, median_frequency_weights, train_loop, LabeledSample, Prepared, TrainConfig,
    TrainOptions,
};

fn split(base: u64, n: u64) -> medmesh::Result<Vec<LabeledSample>> {
    (0..n)
        .map(|i| generate(&SynthSpec::sample(base + i, 700, i % 2 == 0)))
        .collect()
}

fn main() -> medmesh::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let (train, val, test) = (split(0, 12)?, split(100, 4)?, split(200, 4)?);
    let weights = median_frequency_weights(&train, class::COUNT)?;
    println!("class weights {weights:.3?}");

    let net = MeshUNet::new(
        &NetworkConfig {
            ncf: vec![8, 16],
            pool_res: vec![450],
            ninput_edges: 720,
            res_blocks: 1,
            ..NetworkConfig::table1()
        },
        0,
    )?;
    let cfg = TrainConfig {
        lr: 0.003,
        num_aug: 2,
        weighted_loss: weights,
        epochs: epochs / 2,
        decay_epochs: epochs - epochs / 2,
        ..TrainConfig::default()
    };
    let mut stdout = std::io::stdout();
    let out = train_loop(
        &train,
        &val,
        net,
        &cfg,
        TrainOptions {
            log: Some(&mut stdout),
            ..Default::default()
        },
    )?;

    let test: Vec<Prepared> = test
        .iter()
        .map(Prepared::new)
        .collect::<medmesh::Result<_>>()?;
    let report = MetricsReport::from_confusion(&evaluate(&out.best, &test, NormMode::Running)?)?;
    println!("best epoch {}\n{report}", out.best_epoch);
    Ok(())
}
