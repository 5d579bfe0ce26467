use trajgan::models::{
    DecoderConfig, DiscriminatorConfig, EncoderConfig, NetConfig, PoolConfig, SceneBatch,
};
use trajgan::synth::{generate_synthetic_dataset, SynthConfig};
use trajgan::training::{augment_scenes, Mode, TrainConfig, TrainData, Trainer};

fn config(mode: Mode) -> TrainConfig {
    let enc = EncoderConfig {
        embed_dim: 8,
        hidden_dim: 12,
    };
    TrainConfig {
        batch_size: 4,
        mode,
        seed: 21,
        lr_d: 1e-3,
        lr_g: 1e-3,
        lr_a: 1e-3,
        net: NetConfig {
            encoder: enc,
            pooling: PoolConfig {
                embed_dim: 8,
                out_dim: 8,
            },
            decoder: DecoderConfig {
                embed_dim: 8,
                hidden_dim: 12,
                noise_dim: 4,
                pool_dim: 8,
            },
        },
        discriminator: DiscriminatorConfig {
            encoder: enc,
            mlp_dim: 12,
        },
        ..TrainConfig::default()
    }
}

fn data(n: usize, seed: u64) -> TrainData {
    let real = SynthConfig {
        n_scenes: n,
        jitter_std: 0.05,
        seed,
        ..SynthConfig::default()
    };
    let synth = SynthConfig {
        n_scenes: n,
        seed: seed + 1,
        ..SynthConfig::default()
    };
    TrainData {
        real: generate_synthetic_dataset(&real, 20).unwrap(),
        synth: generate_synthetic_dataset(&synth, 20).unwrap(),
    }
}

#[test]
fn baselines_never_touch_the_augmenter() {
    let d = data(12, 1);
    for mode in [Mode::SganReal, Mode::SganSynthetic, Mode::SganHybrid] {
        let mut t = Trainer::new(config(mode)).unwrap();
        let a0 = t.models.augmenter.params().clone();
        let g0 = t.models.generator.params().clone();
        t.train(&d, 3, |_, _| Ok(())).unwrap();
        assert!(t.models.augmenter.params().bit_eq(&a0), "{mode}");
        assert!(!t.models.generator.params().bit_eq(&g0), "{mode}");
    }
}

#[test]
fn hybrid_batches_follow_the_ratio() {
    let d = data(12, 2);
    for (ratio, expect) in [((1, 1), 4), ((1, 10), 40), ((2, 1), 2)] {
        let mut cfg = config(Mode::SganHybrid);
        cfg.real_synth_ratio = ratio;
        let t = Trainer::new(cfg).unwrap();
        let (real, synth) = t.next_batches(&d).unwrap();
        assert_eq!((real.len(), synth.len()), (4, expect));
    }
}

#[test]
fn baseline_null_update() {
    let d = data(8, 3);
    let mut cfg = config(Mode::SganReal);
    cfg.lr_d = 0.0;
    cfg.lr_g = 0.0;
    let mut t = Trainer::new(cfg).unwrap();
    let (g0, d0) = (
        t.models.generator.params().clone(),
        t.models.discriminator.params().clone(),
    );
    t.run_step(&d).unwrap();
    assert!(t.models.generator.params().bit_eq(&g0));
    assert!(t.models.discriminator.params().bit_eq(&d0));
}

#[test]
fn standalone_discriminator_separates_real_from_augmented() {
    let d = data(40, 4);
    let mut t = Trainer::new(config(Mode::IndependentAugmenter)).unwrap();
    t.train(&d, 60, |_, _| Ok(())).unwrap();

    let held = data(20, 99);
    let aug = augment_scenes(&t.models.augmenter, &held.synth, 5).unwrap();
    let disc = &t.models.discriminator;
    let real_scores = disc
        .discriminate(&SceneBatch::from_scenes(&held.real).unwrap())
        .unwrap();
    let aug_scores = disc
        .discriminate(&SceneBatch::from_scenes(&aug).unwrap())
        .unwrap();
    let correct = real_scores.iter().filter(|&&s| s > 0.5).count()
        + aug_scores.iter().filter(|&&s| s < 0.5).count();
    let acc = correct as f64 / (real_scores.len() + aug_scores.len()) as f64;
    assert!(acc > 0.5, "held-out accuracy {acc}");
}
