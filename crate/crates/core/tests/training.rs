use medmesh::net::{MeshUNet, NetworkConfig};
use medmesh::synth::{generate, SynthSpec};
use medmesh::train::{train_loop, LabeledSample, TrainConfig, TrainOptions};
use medmesh::Error;

fn tiny_net() -> NetworkConfig {
    NetworkConfig {
        ncf: vec![8, 16],
        pool_res: vec![300],
        ninput_edges: 420,
        res_blocks: 1,
        ..NetworkConfig::table1()
    }
}

fn sample(seed: u64) -> LabeledSample {
    generate(&SynthSpec::sample(seed, 400, true)).unwrap()
}

fn losses(log: &[u8]) -> Vec<f64> {
    String::from_utf8_lossy(log)
        .lines()
        .map(|l| {
            l.split_whitespace()
                .find_map(|t| t.strip_prefix("loss="))
                .unwrap()
                .parse()
                .unwrap()
        })
        .collect()
}

#[test]
fn single_sample_overfits() {
    let s = sample(1);
    let cfg = TrainConfig {
        lr: 0.01,
        lr_policy: "fixed".into(),
        num_aug: 0,
        epochs: 50,
        decay_epochs: 0,
        weighted_loss: vec![0.25; 4],
        ..TrainConfig::default()
    };
    let mut log = Vec::new();
    train_loop(
        std::slice::from_ref(&s),
        std::slice::from_ref(&s),
        MeshUNet::new(&tiny_net(), 3).unwrap(),
        &cfg,
        TrainOptions {
            log: Some(&mut log),
            ..Default::default()
        },
    )
    .unwrap();
    let l = losses(&log);
    assert_eq!(l.len(), 50);
    assert!(l[49] < l[0], "final {} vs initial {}", l[49], l[0]);
    let windows: Vec<f64> = l.chunks(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    assert!(
        windows.windows(2).all(|w| w[1] < w[0]),
        "window means {windows:?}"
    );
}

#[test]
fn seeded_runs_are_identical() {
    let train: Vec<_> = (0..4).map(sample).collect();
    let val = vec![sample(10)];
    let cfg = TrainConfig {
        num_aug: 2,
        flip_edges: 0.1,
        epochs: 2,
        decay_epochs: 1,
        ..TrainConfig::default()
    };
    let run = || {
        let mut log = Vec::new();
        let out = train_loop(
            &train,
            &val,
            MeshUNet::new(&tiny_net(), 5).unwrap(),
            &cfg,
            TrainOptions {
                log: Some(&mut log),
                ..Default::default()
            },
        )
        .unwrap();
        (log, out.last)
    };
    let (a, na) = run();
    let (b, nb) = run();
    assert_eq!(a, b);
    assert_eq!(na, nb);
}

#[test]
fn best_model_callback_tracks_improvements() {
    let train: Vec<_> = (0..3).map(sample).collect();
    let val = vec![sample(20)];
    let cfg = TrainConfig {
        num_aug: 0,
        epochs: 4,
        decay_epochs: 0,
        ..TrainConfig::default()
    };
    let mut saved = Vec::new();
    let mut on_best = |m: &MeshUNet| {
        saved.push(m.clone());
        Ok(())
    };
    let out = train_loop(
        &train,
        &val,
        MeshUNet::new(&tiny_net(), 1).unwrap(),
        &cfg,
        TrainOptions {
            on_best: Some(&mut on_best),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.history.len(), 4);
    assert_eq!(saved.last().unwrap(), &out.best);
    let best = out.history[out.best_epoch - 1].val.iou.mean;
    assert!(out.history.iter().all(|r| r.val.iou.mean <= best));
}

#[test]
fn invalid_inputs_are_rejected() {
    let s = sample(0);
    let net = MeshUNet::new(&tiny_net(), 0).unwrap();
    let r = train_loop(
        std::slice::from_ref(&s),
        &[],
        net.clone(),
        &TrainConfig::default(),
        TrainOptions::default(),
    );
    assert!(matches!(r, Err(Error::InvalidConfig(_))));
    let cfg = TrainConfig {
        weighted_loss: vec![1.0; 3],
        ..TrainConfig::default()
    };
    let r = train_loop(
        std::slice::from_ref(&s),
        std::slice::from_ref(&s),
        net,
        &cfg,
        TrainOptions::default(),
    );
    assert!(matches!(r, Err(Error::InvalidConfig(_))));
}
