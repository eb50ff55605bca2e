use lingen_core::corpus::Split;
use lingen_core::synth::{generate, SynthConfig};
use lingen_core::train::{evaluate, train, TrainConfig};

/// Enough sentences that the epoch limit does not cut the default step budget.
fn one_variety(seed: u64) -> SynthConfig {
    SynthConfig {
        sentences_per_variety: 6400,
        ..SynthConfig::pair(0.0, 1.0, seed)
    }
}

#[test]
fn one_variety_reaches_high_uas_in_the_default_budget() {
    let data = generate(&one_variety(1)).unwrap();
    let x = &data.varieties[0];
    let config = TrainConfig::default();
    assert_eq!(config.total_steps(x.train.len()), config.max_steps);
    let out = train(&[x.train.clone()], &[x.split(Split::Dev).clone()], &config).unwrap();
    let uas = evaluate(&out.model, x.split(Split::Test)).unwrap().primary;
    assert!(uas >= 0.95, "held-out UAS {uas}");
}
