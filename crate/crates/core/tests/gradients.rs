mod common;

use common::{loss_variants, random_instance, relative_error};
use qrl_core::nn::{ForwardCache, PolicyArch, PolicyParams};
use qrl_core::ppo::{ppo_loss, ppo_update, Adam, LossSample, PpoConfig, RolloutBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (name, cfg) in loss_variants() {
        for trial in 0..12 {
            let inst = random_instance(trial % 2 == 0, trial % 3 == 0, &mut rng);
            let err = relative_error(&inst.analytic(&cfg), &inst.numeric(&cfg, 1e-5));
            assert!(err < 1e-4, "{name} trial {trial}: relative error {err}");
        }
    }
}

#[test]
fn clipped_branch_has_zero_policy_gradient() {
    let cfg = PpoConfig { vf_coef: 0.0, ent_coef: 0.0, ..Default::default() };
    let logits = [0.3f64, -0.2, 1.1];
    let mut p = [0.0; 3];
    qrl_core::nn::masked_softmax(&logits, None, &mut p);
    // ratio = p / old = 2 > 1 + clip with positive advantage
    let old = (p[2] / 2.0).ln();
    let sample = LossSample { action: 2, mask: None, old_log_prob: old, advantage: 1.0, ret: 0.0 };
    let mut dl = [0.0; 3];
    let mut dv = [0.0; 1];
    let parts = ppo_loss(&logits, &[0.0], &[sample], &cfg, &mut dl, &mut dv);
    assert!(dl.iter().all(|&g| g == 0.0));
    assert!(parts.clip_fraction > 0.0);
    // finite differences agree: the loss is flat in the logits there
    for j in 0..3 {
        let mut up = logits;
        up[j] += 1e-5;
        let mut down = logits;
        down[j] -= 1e-5;
        let f = |z: &[f64]| ppo_loss(z, &[0.0], &[sample], &cfg, &mut [0.0; 3], &mut [0.0]).total;
        assert!(((f(&up) - f(&down)) / 2e-5).abs() < 1e-9);
    }
}

fn bandit_batch(params: &PolicyParams<f64>, rng: &mut impl Rng) -> RolloutBatch {
    let mut cache = ForwardCache::default();
    params.forward(&[1.0], 1, &mut cache).unwrap();
    let mut p = [0.0; 2];
    qrl_core::nn::masked_softmax(&cache.logits, None, &mut p);
    let mut batch = RolloutBatch { obs_len: 1, n_actions: 2, ..Default::default() };
    for _ in 0..64 {
        let a = if rng.gen::<f64>() < p[0] { 0 } else { 1 };
        let r = if a == 0 { 1.0 } else { 0.0 };
        batch.obs.push(1.0);
        batch.actions.push(a);
        batch.log_probs.push(p[a].ln());
        batch.values.push(cache.values[0]);
        batch.advantages.push(r - cache.values[0]);
        batch.returns.push(r);
    }
    batch.normalize_advantages();
    batch
}

#[test]
fn unchanged_policy_has_unit_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let arch = PolicyArch { input: [1, 1, 1], conv_filters: 0, kernel: 3, hidden: vec![4], n_actions: 2 };
    let mut params = PolicyParams::<f64>::init(arch, &mut rng).unwrap();
    let batch = bandit_batch(&params, &mut rng);
    let cfg = PpoConfig { epochs: 1, minibatch: 64, learning_rate: 0.0, ..Default::default() };
    let mut adam = Adam::new(params.as_slice().len(), 0.0);
    let m = ppo_update(&mut params, &mut adam, &batch, &cfg, &mut rng).unwrap();
    assert!((m.mean_ratio - 1.0).abs() < 1e-9);
    assert_eq!(m.clip_fraction, 0.0);
}

#[test]
fn bandit_update_prefers_rewarded_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let arch = PolicyArch { input: [1, 1, 1], conv_filters: 0, kernel: 3, hidden: vec![4], n_actions: 2 };
    let mut params = PolicyParams::<f64>::init(arch, &mut rng).unwrap();
    let prob0 = |p: &PolicyParams<f64>| {
        let mut cache = ForwardCache::default();
        p.forward(&[1.0], 1, &mut cache).unwrap();
        let mut out = [0.0; 2];
        qrl_core::nn::masked_softmax(&cache.logits, None, &mut out);
        out[0]
    };
    let before = prob0(&params);
    let batch = bandit_batch(&params, &mut rng);
    let cfg = PpoConfig { epochs: 1, minibatch: 64, learning_rate: 1e-2, ..Default::default() };
    let mut adam = Adam::new(params.as_slice().len(), cfg.learning_rate);
    ppo_update(&mut params, &mut adam, &batch, &cfg, &mut rng).unwrap();
    assert!(prob0(&params) > before);
}

#[test]
fn non_finite_loss_restores_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let arch = PolicyArch { input: [1, 1, 1], conv_filters: 0, kernel: 3, hidden: vec![4], n_actions: 2 };
    let mut params = PolicyParams::<f64>::init(arch, &mut rng).unwrap();
    let mut batch = bandit_batch(&params, &mut rng);
    batch.returns[3] = f64::NAN;
    let before = params.clone();
    let cfg = PpoConfig { epochs: 2, minibatch: 16, ..Default::default() };
    let mut adam = Adam::new(params.as_slice().len(), cfg.learning_rate);
    let adam_before = adam.clone();
    assert!(ppo_update(&mut params, &mut adam, &batch, &cfg, &mut rng).is_err());
    assert_eq!(params, before);
    assert_eq!(adam, adam_before);
}
