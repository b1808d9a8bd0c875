//! Multi-output random forest. Each tree is grown jointly for all four
//! modality heads: split quality is the Gini impurity averaged over heads.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::degradation::DegradationFlags;
use super::features::{FeatureVector, LabeledSample, N_FEATURES};
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

pub const N_OUTPUTS: usize = 4;
pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; 0 means `floor(sqrt(d))`.
    pub max_features: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 50,
            min_samples_split: 2,
            max_features: 0,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Majority class per head.
        votes: [bool; N_OUTPUTS],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64; N_FEATURES]) -> [bool; N_OUTPUTS] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { votes } => return *votes,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub version: u32,
    pub config: ForestConfig,
    trees: Vec<Tree>,
}

struct Grower<'a, R> {
    x: &'a [[f64; N_FEATURES]],
    y: &'a [[bool; N_OUTPUTS]],
    cfg: &'a ForestConfig,
    mtry: usize,
    rng: R,
    nodes: Vec<Node>,
}

fn gini_avg(pos: &[usize; N_OUTPUTS], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    pos.iter()
        .map(|c| {
            let p = *c as f64 / nf;
            2.0 * p * (1.0 - p)
        })
        .sum::<f64>()
        / N_OUTPUTS as f64
}

impl<R: Rng> Grower<'_, R> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let mut pos = [0usize; N_OUTPUTS];
        for &i in idx {
            for (k, p) in pos.iter_mut().enumerate() {
                *p += self.y[i][k] as usize;
            }
        }
        Node::Leaf {
            votes: pos.map(|c| 2 * c > idx.len()),
        }
    }

    /// Best `(feature, threshold, weighted child impurity)` over `features`.
    fn best_split(&self, idx: &mut [usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let mut total = [0usize; N_OUTPUTS];
        for &i in idx.iter() {
            for (k, t) in total.iter_mut().enumerate() {
                *t += self.y[i][k] as usize;
            }
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for &f in features {
            idx.sort_by(|a, b| self.x[*a][f].total_cmp(&self.x[*b][f]).then(a.cmp(b)));
            let mut left = [0usize; N_OUTPUTS];
            for s in 1..n {
                let prev = idx[s - 1];
                for (k, l) in left.iter_mut().enumerate() {
                    *l += self.y[prev][k] as usize;
                }
                let (a, b) = (self.x[prev][f], self.x[idx[s]][f]);
                if a == b {
                    continue;
                }
                let right = std::array::from_fn(|k| total[k] - left[k]);
                let score = (s as f64 * gini_avg(&left, s)
                    + (n - s) as f64 * gini_avg(&right, n - s))
                    / n as f64;
                if best.is_none_or(|(_, _, b)| score < b) {
                    let mid = a + (b - a) / 2.0;
                    // Guard against the midpoint rounding up onto `b`.
                    let thr = if mid < b { mid } else { a };
                    best = Some((f, thr, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            votes: [false; N_OUTPUTS],
        });
        let n = idx.len();
        let mut pos = [0usize; N_OUTPUTS];
        for &i in idx.iter() {
            for (k, p) in pos.iter_mut().enumerate() {
                *p += self.y[i][k] as usize;
            }
        }
        let parent = gini_avg(&pos, n);
        if depth >= self.cfg.max_depth || n < self.cfg.min_samples_split || parent == 0.0 {
            self.nodes[id] = self.leaf(idx);
            return id;
        }
        let order: Vec<usize> = sample(&mut self.rng, N_FEATURES, N_FEATURES).into_vec();
        let (first, rest) = order.split_at(self.mtry);
        // When the sampled features cannot split the node the rest are tried,
        // so a node is only a leaf if it is inseparable on every feature.
        let found = self
            .best_split(idx, first)
            .filter(|(_, _, s)| *s < parent)
            .or_else(|| self.best_split(idx, rest).filter(|(_, _, s)| *s < parent));
        let Some((feature, threshold, _)) = found else {
            self.nodes[id] = self.leaf(idx);
            return id;
        };
        let x = self.x;
        idx.sort_by(|a, b| {
            (x[*a][feature] > threshold)
                .cmp(&(x[*b][feature] > threshold))
                .then(a.cmp(b))
        });
        let cut = idx.partition_point(|i| x[*i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

pub fn train_classifier(corpus: &[LabeledSample], cfg: &ForestConfig) -> Result<Classifier> {
    if cfg.trees == 0 || cfg.max_depth == 0 {
        return Err(Error::InvalidConfig("forest needs trees >= 1 and max_depth >= 1".into()));
    }
    if cfg.max_features > N_FEATURES {
        return Err(Error::InvalidConfig(format!("max_features exceeds {N_FEATURES}")));
    }
    let x: Vec<[f64; N_FEATURES]> = corpus.iter().map(|s| s.features.to_array()).collect();
    let y: Vec<[bool; N_OUTPUTS]> = corpus.iter().map(|s| s.flags.0).collect();
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("corpus contains non-finite features".into()));
    }
    for k in 0..N_OUTPUTS {
        let pos = y.iter().filter(|r| r[k]).count();
        if pos == 0 || pos == y.len() {
            return Err(Error::Training(format!(
                "head {k} has a single class in a corpus of {}",
                y.len()
            )));
        }
    }
    let mtry = if cfg.max_features == 0 {
        (N_FEATURES as f64).sqrt().floor() as usize
    } else {
        cfg.max_features
    };
    let n = x.len();
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(cfg.seed, stream::FOREST_TREE, t as u64);
            let mut idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut g = Grower {
                x: &x,
                y: &y,
                cfg,
                mtry,
                rng,
                nodes: Vec::new(),
            };
            g.grow(&mut idx, 0);
            Tree { nodes: g.nodes }
        })
        .collect();
    Ok(Classifier {
        version: FOREST_FORMAT_VERSION,
        config: *cfg,
        trees,
    })
}

impl Classifier {
    /// Majority vote across trees per head; ties count as clean.
    pub fn classify(&self, features: &FeatureVector) -> DegradationFlags {
        let x = features.to_array();
        let mut votes = [0usize; N_OUTPUTS];
        for t in &self.trees {
            for (v, p) in votes.iter_mut().zip(t.predict(&x)) {
                *v += p as usize;
            }
        }
        DegradationFlags(votes.map(|v| 2 * v > self.trees.len()))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.version != FOREST_FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported classifier version {}", c.version)));
        }
        if c.trees.is_empty() {
            return Err(Error::Data("classifier has no trees".into()));
        }
        Ok(c)
    }
}

pub fn classify(model: &Classifier, features: &FeatureVector) -> DegradationFlags {
    model.classify(features)
}

/// Per-head F1 of `model` on `samples`. A head with no positives and no
/// predicted positives scores 1.
pub fn per_head_f1(model: &Classifier, samples: &[LabeledSample]) -> [f64; N_OUTPUTS] {
    let mut tp = [0usize; N_OUTPUTS];
    let mut fp = [0usize; N_OUTPUTS];
    let mut fneg = [0usize; N_OUTPUTS];
    let preds: Vec<DegradationFlags> = samples.par_iter().map(|s| model.classify(&s.features)).collect();
    for (s, p) in samples.iter().zip(preds) {
        for k in 0..N_OUTPUTS {
            match (p.0[k], s.flags.0[k]) {
                (true, true) => tp[k] += 1,
                (true, false) => fp[k] += 1,
                (false, true) => fneg[k] += 1,
                _ => {}
            }
        }
    }
    std::array::from_fn(|k| {
        let denom = 2 * tp[k] + fp[k] + fneg[k];
        if denom == 0 {
            1.0
        } else {
            2.0 * tp[k] as f64 / denom as f64
        }
    })
}
