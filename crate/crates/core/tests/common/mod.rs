#![allow(dead_code)]

use qrl_core::nn::{ForwardCache, PolicyArch, PolicyParams};
use qrl_core::ppo::{ppo_loss, LossSample, PpoConfig};
use rand::Rng;

/// `||a - b|| / max(||a||, ||b||)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub struct Instance {
    pub params: PolicyParams<f64>,
    pub obs: Vec<f64>,
    pub batch: usize,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub masks: Option<Vec<bool>>,
}

pub fn random_instance(conv: bool, masked: bool, rng: &mut impl Rng) -> Instance {
    let rows = rng.gen_range(2..5);
    let cols = rng.gen_range(2..5);
    let ch = rng.gen_range(1..4);
    let n_actions = rng.gen_range(2..7);
    let hidden = (0..rng.gen_range(1..3)).map(|_| rng.gen_range(3..9)).collect();
    let arch = PolicyArch {
        input: [rows, cols, ch],
        conv_filters: if conv { rng.gen_range(2..5) } else { 0 },
        kernel: 3,
        hidden,
        n_actions,
    };
    let mut params = PolicyParams::<f64>::init(arch, rng).unwrap();
    // nonzero biases so every block is exercised
    for x in params.as_mut_slice() {
        *x += rng.gen_range(-0.1..0.1);
    }
    let batch = rng.gen_range(1..5);
    let obs = (0..batch * rows * cols * ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let masks = masked.then(|| {
        let mut m: Vec<bool> = (0..batch * n_actions).map(|_| rng.gen_bool(0.7)).collect();
        for b in 0..batch {
            m[b * n_actions] = true;
        }
        m
    });
    let actions = (0..batch)
        .map(|b| loop {
            let a = rng.gen_range(0..n_actions);
            if masks.as_ref().is_none_or(|m| m[b * n_actions + a]) {
                break a;
            }
        })
        .collect();
    Instance {
        params,
        obs,
        batch,
        actions,
        old_log_probs: (0..batch).map(|_| rng.gen_range(-2.5..-0.2)).collect(),
        advantages: (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        returns: (0..batch).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        masks,
    }
}

impl Instance {
    fn samples(&self) -> Vec<LossSample<'_>> {
        let a = self.params.arch().n_actions;
        (0..self.batch)
            .map(|i| LossSample {
                action: self.actions[i],
                mask: self.masks.as_ref().map(|m| &m[i * a..(i + 1) * a]),
                old_log_prob: self.old_log_probs[i],
                advantage: self.advantages[i],
                ret: self.returns[i],
            })
            .collect()
    }

    pub fn loss(&self, params: &PolicyParams<f64>, cfg: &PpoConfig) -> f64 {
        let mut cache = ForwardCache::default();
        params.forward(&self.obs, self.batch, &mut cache).unwrap();
        let a = params.arch().n_actions;
        let mut dl = vec![0.0; self.batch * a];
        let mut dv = vec![0.0; self.batch];
        ppo_loss(&cache.logits, &cache.values, &self.samples(), cfg, &mut dl, &mut dv).total
    }

    pub fn analytic(&self, cfg: &PpoConfig) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        self.params.forward(&self.obs, self.batch, &mut cache).unwrap();
        let a = self.params.arch().n_actions;
        let mut dl = vec![0.0; self.batch * a];
        let mut dv = vec![0.0; self.batch];
        ppo_loss(&cache.logits, &cache.values, &self.samples(), cfg, &mut dl, &mut dv);
        let mut grad = vec![0.0; self.params.as_slice().len()];
        self.params.backward(&cache, &dl, &dv, &mut grad);
        grad
    }

    pub fn numeric(&self, cfg: &PpoConfig, h: f64) -> Vec<f64> {
        let mut p = self.params.clone();
        (0..p.as_slice().len())
            .map(|i| {
                let x = p.as_slice()[i];
                p.as_mut_slice()[i] = x + h;
                let up = self.loss(&p, cfg);
                p.as_mut_slice()[i] = x - h;
                let down = self.loss(&p, cfg);
                p.as_mut_slice()[i] = x;
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

/// Loss weightings isolating each term.
pub fn loss_variants() -> Vec<(&'static str, PpoConfig)> {
    let base = PpoConfig { clip: 10.0, ..Default::default() };
    vec![
        ("policy", PpoConfig { vf_coef: 0.0, ent_coef: 0.0, ..base }),
        ("value", PpoConfig { vf_coef: 1.0, ent_coef: 0.0, ..base }),
        ("entropy", PpoConfig { vf_coef: 0.0, ent_coef: 1.0, ..base }),
        ("combined", PpoConfig::default()),
    ]
}
