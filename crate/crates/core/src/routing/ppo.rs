//! Clipped-surrogate policy optimization on one-step routing episodes.
//!
//! The actor is a two-hidden-layer tanh network with two 15-way categorical
//! heads; the critic is a separate network of the same shape with a scalar
//! output. Everything is plain `f64` arithmetic so results are bit-exact for
//! a given seed.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::RoutingPolicy;
use super::reward::{RewardModel, RewardParams};
use super::state::{DegradationState, RoutingAction};
use crate::agents::{ModalityCombo, PerfTable};
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream, SimRng};

const N_IN: usize = 4;
const N_OUT: usize = ModalityCombo::COUNT;
pub const POLICY_FILE_MAGIC: &str = "enwarsim-policy";
pub const POLICY_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Rollout steps per update.
    pub batch: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Kept for completeness; one-step episodes make it irrelevant.
    pub gamma: f64,
    pub entropy_coef: f64,
    pub clip: f64,
    /// Number of rollout-and-update iterations.
    pub episodes: usize,
    /// Passes over each rollout batch.
    pub epochs: usize,
    /// Share of training states drawn from the degraded distribution.
    pub degraded_fraction: f64,
    /// Per-modality degradation probability within that share.
    pub p_modality: f64,
    pub hidden: usize,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch: 1024,
            minibatch: 64,
            learning_rate: 3e-4,
            gamma: 0.95,
            entropy_coef: 0.01,
            clip: 0.2,
            episodes: 1000,
            epochs: 4,
            degraded_fraction: 0.3,
            p_modality: 0.5,
            hidden: 64,
            max_grad_norm: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.batch > 0
            && self.minibatch > 0
            && self.episodes > 0
            && self.epochs > 0
            && self.hidden > 0
            && self.learning_rate >= 0.0
            && self.clip > 0.0
            && self.entropy_coef >= 0.0
            && self.gamma > 0.0
            && self.max_grad_norm > 0.0;
        if !positive {
            return Err(Error::InvalidConfig("training parameters must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.degraded_fraction) || !(0.0..=1.0).contains(&self.p_modality) {
            return Err(Error::InvalidConfig("fractions must lie in [0,1]".into()));
        }
        Ok(())
    }
}

/// Offsets into a flat parameter vector for a 4 -> h -> h -> heads network.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    out_w: usize,
    out_b: usize,
    len: usize,
    n_out: usize,
}

impl Layout {
    fn new(h: usize, n_out: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + h * N_IN;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let out_w = b2 + h;
        let out_b = out_w + n_out * h;
        Self {
            h,
            w1,
            b1,
            w2,
            b2,
            out_w,
            out_b,
            len: out_b + n_out,
            n_out,
        }
    }
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
}

fn forward(l: &Layout, p: &[f64], x: &[f64; N_IN]) -> Activations {
    let h = l.h;
    let mut h1 = vec![0.0; h];
    for (i, v) in h1.iter_mut().enumerate() {
        let row = &p[l.w1 + i * N_IN..l.w1 + (i + 1) * N_IN];
        let z = p[l.b1 + i] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        *v = z.tanh();
    }
    let mut h2 = vec![0.0; h];
    for (i, v) in h2.iter_mut().enumerate() {
        let row = &p[l.w2 + i * h..l.w2 + (i + 1) * h];
        let z = p[l.b2 + i] + row.iter().zip(&h1).map(|(w, a)| w * a).sum::<f64>();
        *v = z.tanh();
    }
    let mut out = vec![0.0; l.n_out];
    for (j, v) in out.iter_mut().enumerate() {
        let row = &p[l.out_w + j * h..l.out_w + (j + 1) * h];
        *v = p[l.out_b + j] + row.iter().zip(&h2).map(|(w, a)| w * a).sum::<f64>();
    }
    Activations { h1, h2, out }
}

/// Accumulates `d loss / d params` into `g` given `d loss / d out`.
fn backward(l: &Layout, p: &[f64], x: &[f64; N_IN], act: &Activations, dout: &[f64], g: &mut [f64]) {
    let h = l.h;
    let mut dh2 = vec![0.0; h];
    for (j, d) in dout.iter().enumerate() {
        if *d == 0.0 {
            continue;
        }
        g[l.out_b + j] += d;
        let row = l.out_w + j * h;
        for i in 0..h {
            g[row + i] += d * act.h2[i];
            dh2[i] += d * p[row + i];
        }
    }
    let mut dh1 = vec![0.0; h];
    for i in 0..h {
        let dz = dh2[i] * (1.0 - act.h2[i] * act.h2[i]);
        g[l.b2 + i] += dz;
        let row = l.w2 + i * h;
        for k in 0..h {
            g[row + k] += dz * act.h1[k];
            dh1[k] += dz * p[row + k];
        }
    }
    for i in 0..h {
        let dz = dh1[i] * (1.0 - act.h1[i] * act.h1[i]);
        g[l.b1 + i] += dz;
        for (k, xk) in x.iter().enumerate() {
            g[l.w1 + i * N_IN + k] += dz * xk;
        }
    }
}

fn init_params<R: Rng>(l: &Layout, rng: &mut R, out_gain: f64) -> Vec<f64> {
    let mut p = vec![0.0; l.len];
    let mut fill = |range: std::ops::Range<usize>, fan_in: usize, gain: f64| {
        let bound = gain / (fan_in as f64).sqrt();
        for v in &mut p[range] {
            *v = rng.random_range(-bound..bound);
        }
    };
    fill(l.w1..l.b1, N_IN, 1.0);
    fill(l.w2..l.b2, l.h, 1.0);
    fill(l.out_w..l.out_b, l.h, out_gain);
    p
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Trained actor: maps a degradation state to two categorical distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    hidden: usize,
    params: Vec<f64>,
}

impl PolicyNet {
    pub fn new_random(hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be >= 1".into()));
        }
        let l = Layout::new(hidden, 2 * N_OUT);
        let mut rng = rng_for(seed, stream::PPO, u64::MAX);
        Ok(Self {
            hidden,
            params: init_params(&l, &mut rng, 0.01),
        })
    }

    fn layout(&self) -> Layout {
        Layout::new(self.hidden, 2 * N_OUT)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Logits of the beam and blockage heads.
    pub fn logits(&self, s: DegradationState) -> ([f64; N_OUT], [f64; N_OUT]) {
        let a = forward(&self.layout(), &self.params, &s.features());
        let mut b = [0.0; N_OUT];
        let mut k = [0.0; N_OUT];
        b.copy_from_slice(&a.out[..N_OUT]);
        k.copy_from_slice(&a.out[N_OUT..]);
        (b, k)
    }

    pub fn probabilities(&self, s: DegradationState) -> ([f64; N_OUT], [f64; N_OUT]) {
        let (b, k) = self.logits(s);
        let sm = |z: &[f64; N_OUT]| {
            let ls = log_softmax(z);
            std::array::from_fn(|i| ls[i].exp())
        };
        (sm(&b), sm(&k))
    }

    pub fn greedy(&self, s: DegradationState) -> RoutingAction {
        let (b, k) = self.logits(s);
        RoutingAction::from_indices(argmax(&b), argmax(&k)).expect("head width is 15")
    }

    pub fn sample<R: Rng>(&self, s: DegradationState, rng: &mut R) -> RoutingAction {
        let (pb, pk) = self.probabilities(s);
        RoutingAction::from_indices(sample_index(&pb, rng), sample_index(&pk, rng)).expect("head width is 15")
    }

    /// Versioned flat text: a header line, a shape line, then one parameter per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{POLICY_FILE_MAGIC} v{POLICY_FILE_VERSION}\nshape {} {} {} {}\nparams {}\n",
            N_IN,
            self.hidden,
            N_OUT,
            N_OUT,
            self.params.len()
        );
        for p in &self.params {
            writeln!(s, "{p}").expect("string write");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::Data(format!("policy file: {m}"));
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        if header != format!("{POLICY_FILE_MAGIC} v{POLICY_FILE_VERSION}") {
            return Err(bad(&format!("unsupported header `{header}`")));
        }
        let shape: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("shape "))
            .ok_or_else(|| bad("missing shape"))?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("bad shape")))
            .collect::<Result<_>>()?;
        if shape.len() != 4 || shape[0] != N_IN || shape[2] != N_OUT || shape[3] != N_OUT || shape[1] == 0 {
            return Err(bad(&format!("unexpected shape {shape:?}")));
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("params "))
            .ok_or_else(|| bad("missing params"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad params count"))?;
        let params: Vec<f64> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| bad(&format!("bad value `{l}`"))))
            .collect::<Result<_>>()?;
        let net = Self {
            hidden: shape[1],
            params,
        };
        if net.params.len() != n || n != net.layout().len {
            return Err(bad("parameter count mismatch"));
        }
        if net.params.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(net)
    }
}

fn sample_index<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Greedy evaluation wrapper.
pub struct DrlPolicy {
    pub net: PolicyNet,
}

impl RoutingPolicy for DrlPolicy {
    fn name(&self) -> &str {
        "DRL Agent"
    }

    fn act(&self, state: DegradationState, _rng: &mut SimRng) -> RoutingAction {
        self.net.greedy(state)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}

fn clip_grad(g: &mut [f64], max_norm: f64) {
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > max_norm {
        let s = max_norm / n;
        g.iter_mut().for_each(|v| *v *= s);
    }
}

/// Draws a training state: clean with probability `1 - degraded_fraction`,
/// otherwise each modality degraded independently with `p_modality`.
pub fn sample_training_state<R: Rng>(rng: &mut R, degraded_fraction: f64, p_modality: f64) -> DegradationState {
    if !rng.random_bool(degraded_fraction) {
        return DegradationState::CLEAN;
    }
    let mut mask = 0u8;
    for bit in 0..4 {
        if rng.random_bool(p_modality) {
            mask |= 1 << bit;
        }
    }
    DegradationState::from_mask(mask).expect("4-bit mask")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean sampled reward of each rollout batch.
    pub batch_mean_reward: Vec<f64>,
}

impl TrainLog {
    /// Share of consecutive non-overlapping `block`-batch means that do not
    /// fall by more than `eps`.
    pub fn non_decreasing_share(&self, block: usize, eps: f64) -> f64 {
        let means: Vec<f64> = self
            .batch_mean_reward
            .chunks_exact(block)
            .map(|c| c.iter().sum::<f64>() / block as f64)
            .collect();
        if means.len() < 2 {
            return 1.0;
        }
        let ok = means.windows(2).filter(|w| w[1] >= w[0] - eps).count();
        ok as f64 / (means.len() - 1) as f64
    }
}

struct Sample {
    state: DegradationState,
    beam: usize,
    block: usize,
    old_logp: f64,
    adv: f64,
    ret: f64,
}

pub fn ppo_train(table: &PerfTable, params: &RewardParams, cfg: &TrainConfig) -> Result<(PolicyNet, TrainLog)> {
    cfg.validate()?;
    let model = RewardModel::new(table, params)?;
    let mut policy = PolicyNet::new_random(cfg.hidden, cfg.seed)?;
    let pl = policy.layout();
    let vl = Layout::new(cfg.hidden, 1);
    let mut value = init_params(&vl, &mut rng_for(cfg.seed, stream::PPO, u64::MAX - 1), 1.0);
    let mut p_opt = Adam::new(pl.len);
    let mut v_opt = Adam::new(vl.len);
    let mut log = TrainLog {
        batch_mean_reward: Vec::with_capacity(cfg.episodes),
    };

    for iter in 0..cfg.episodes {
        let mut rng = rng_for(cfg.seed, stream::PPO, iter as u64);
        // Per-state forward passes are shared by every sample in that state.
        let mut cache: [Option<(Vec<f64>, Vec<f64>, f64)>; 16] = Default::default();
        let mut batch = Vec::with_capacity(cfg.batch);
        let mut total = 0.0;
        for _ in 0..cfg.batch {
            let s = sample_training_state(&mut rng, cfg.degraded_fraction, cfg.p_modality);
            let (lb, lk, v) = cache[s.mask() as usize].get_or_insert_with(|| {
                let a = forward(&pl, &policy.params, &s.features());
                let v = forward(&vl, &value, &s.features()).out[0];
                (log_softmax(&a.out[..N_OUT]), log_softmax(&a.out[N_OUT..]), v)
            });
            let pb: Vec<f64> = lb.iter().map(|x| x.exp()).collect();
            let pk: Vec<f64> = lk.iter().map(|x| x.exp()).collect();
            let b = sample_index(&pb, &mut rng);
            let k = sample_index(&pk, &mut rng);
            let r = model.reward(s, RoutingAction::from_indices(b, k)?);
            total += r;
            batch.push(Sample {
                state: s,
                beam: b,
                block: k,
                old_logp: lb[b] + lk[k],
                adv: r - *v,
                ret: r,
            });
        }
        log.batch_mean_reward.push(total / cfg.batch as f64);

        let n = batch.len() as f64;
        let mean = batch.iter().map(|s| s.adv).sum::<f64>() / n;
        let sd = (batch.iter().map(|s| (s.adv - mean).powi(2)).sum::<f64>() / n).sqrt();
        for s in &mut batch {
            s.adv = (s.adv - mean) / (sd + 1e-8);
        }

        let mut order: Vec<usize> = (0..batch.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for mb in order.chunks(cfg.minibatch) {
                let m = mb.len() as f64;
                let mut gp = vec![0.0; pl.len];
                let mut gv = vec![0.0; vl.len];
                let mut groups: [Vec<usize>; 16] = Default::default();
                for &i in mb {
                    groups[batch[i].state.mask() as usize].push(i);
                }
                for (mask, members) in groups.iter().enumerate() {
                    if members.is_empty() {
                        continue;
                    }
                    let x = DegradationState::from_mask(mask as u8)?.features();
                    let act = forward(&pl, &policy.params, &x);
                    let lb = log_softmax(&act.out[..N_OUT]);
                    let lk = log_softmax(&act.out[N_OUT..]);
                    let mut dout = vec![0.0; 2 * N_OUT];
                    // Entropy bonus gradient, identical for every member.
                    for (head, ls) in [(0, &lb), (N_OUT, &lk)] {
                        let ent: f64 = -ls.iter().map(|l| l.exp() * l).sum::<f64>();
                        for j in 0..N_OUT {
                            let pj = ls[j].exp();
                            dout[head + j] += members.len() as f64 * cfg.entropy_coef * pj * (ls[j] + ent) / m;
                        }
                    }
                    let vact = forward(&vl, &value, &x);
                    let mut dv = 0.0;
                    for &i in members {
                        let s = &batch[i];
                        let logp = lb[s.beam] + lk[s.block];
                        let ratio = (logp - s.old_logp).exp();
                        let clipped = (s.adv > 0.0 && ratio > 1.0 + cfg.clip) || (s.adv < 0.0 && ratio < 1.0 - cfg.clip);
                        if !clipped {
                            // d(-ratio * adv) / d logp
                            let dlogp = -ratio * s.adv / m;
                            for j in 0..N_OUT {
                                let oh_b = if j == s.beam { 1.0 } else { 0.0 };
                                let oh_k = if j == s.block { 1.0 } else { 0.0 };
                                dout[j] += dlogp * (oh_b - lb[j].exp());
                                dout[N_OUT + j] += dlogp * (oh_k - lk[j].exp());
                            }
                        }
                        dv += (vact.out[0] - s.ret) / m;
                    }
                    backward(&pl, &policy.params, &x, &act, &dout, &mut gp);
                    backward(&vl, &value, &x, &vact, &[dv], &mut gv);
                }
                if gp.iter().chain(&gv).any(|v| !v.is_finite()) {
                    return Err(Error::Training(format!(
                        "non-finite gradient at iteration {iter}; last batch mean reward {:.6}",
                        log.batch_mean_reward.last().copied().unwrap_or(f64::NAN)
                    )));
                }
                clip_grad(&mut gp, cfg.max_grad_norm);
                clip_grad(&mut gv, cfg.max_grad_norm);
                p_opt.step(&mut policy.params, &gp, cfg.learning_rate);
                v_opt.step(&mut value, &gv, cfg.learning_rate);
            }
        }
        if policy.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!("policy parameters diverged at iteration {iter}")));
        }
    }
    Ok((policy, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrainConfig {
        TrainConfig {
            episodes: 3,
            batch: 128,
            hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let t = PerfTable::bundled().unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..small()
        };
        let (net, _) = ppo_train(&t, &RewardParams::default(), &cfg).unwrap();
        assert_eq!(net, PolicyNet::new_random(cfg.hidden, cfg.seed).unwrap());
    }

    #[test]
    fn same_seed_same_parameters() {
        let t = PerfTable::bundled().unwrap();
        let a = ppo_train(&t, &RewardParams::default(), &small()).unwrap();
        let b = ppo_train(&t, &RewardParams::default(), &small()).unwrap();
        assert_eq!(a, b);
        let c = ppo_train(&t, &RewardParams::default(), &TrainConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn text_format_round_trips() {
        let net = PolicyNet::new_random(5, 3).unwrap();
        let back = PolicyNet::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);
        assert!(PolicyNet::from_text("enwarsim-policy v9\n").is_err());
        let truncated: String = net.to_text().lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(PolicyNet::from_text(&truncated).is_err());
    }

    /// Central-difference check of the hand-written backward pass.
    #[test]
    fn backward_matches_finite_differences() {
        let l = Layout::new(3, 2);
        let mut rng = rng_for(1, 2, 3);
        let p = init_params(&l, &mut rng, 1.0);
        let x = [1.0, 0.0, 1.0, 1.0];
        let w = [0.7, -1.3];
        let loss = |p: &[f64]| {
            let a = forward(&l, p, &x);
            a.out[0] * w[0] + a.out[1] * w[1]
        };
        let act = forward(&l, &p, &x);
        let mut g = vec![0.0; l.len];
        backward(&l, &p, &x, &act, &w, &mut g);
        for i in 0..l.len {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let fd = (loss(&hi) - loss(&lo)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn training_state_mix() {
        let mut rng = rng_for(0, 0, 0);
        let n = 20_000;
        let clean = (0..n)
            .filter(|_| sample_training_state(&mut rng, 0.3, 0.5) == DegradationState::CLEAN)
            .count();
        // 0.7 + 0.3 / 16
        let expect = 0.7 + 0.3 / 16.0;
        assert!((clean as f64 / n as f64 - expect).abs() < 0.01);
    }
}
