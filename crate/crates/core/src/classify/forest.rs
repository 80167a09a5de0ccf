//! Random forest of class-weighted Gini trees.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    /// `⌊√p⌋`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => p,
            MaxFeatures::Count(c) => c.clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassWeight {
    /// `w_c = n / (C · n_c)` from the training labels.
    Balanced,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub class_weight: ClassWeight,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 200,
            max_features: MaxFeatures::Sqrt,
            class_weight: ClassWeight::Balanced,
            bootstrap: true,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Summed class weights of the training samples that reached the leaf.
    Leaf { histogram: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { histogram } => return histogram,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

/// Per-class weights `n / (C · n_c)` over the labels in `y_idx`.
pub fn balanced_weights(y_idx: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &c in y_idx {
        counts[c] += 1;
    }
    let n = y_idx.len() as f64;
    counts
        .iter()
        .map(|&nc| {
            if nc == 0 {
                0.0
            } else {
                n / (n_classes as f64 * nc as f64)
            }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Lower weighted impurity wins; ties go to the smaller feature index,
    /// then the smaller threshold.
    fn better_than(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => (self.score, self.feature, self.threshold)
                .partial_cmp(&(o.score, o.feature, o.threshold))
                .is_some_and(|c| c.is_lt()),
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    max_features: usize,
    max_depth: Option<usize>,
    min_samples_split: usize,
}

impl Builder<'_> {
    fn histogram(&self, samples: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.n_classes];
        for &s in samples {
            h[self.y[s]] += self.weights[self.y[s]];
        }
        h
    }

    /// Best split of `samples` on `feature`, or `None` if the feature is
    /// constant there. Also reports whether it was constant.
    fn best_on_feature(
        &self,
        samples: &[usize],
        feature: usize,
        total: &[f64],
        buf: &mut Vec<(f64, usize)>,
    ) -> (bool, Option<Candidate>) {
        buf.clear();
        buf.extend(samples.iter().map(|&s| (self.x.get(s, feature), self.y[s])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if buf[0].0 == buf[buf.len() - 1].0 {
            return (true, None);
        }
        let w_total: f64 = total.iter().sum();
        let mut left = vec![0.0; self.n_classes];
        let mut w_left = 0.0;
        let mut best: Option<Candidate> = None;
        for i in 0..buf.len() - 1 {
            let (v, c) = buf[i];
            left[c] += self.weights[c];
            w_left += self.weights[c];
            let next = buf[i + 1].0;
            if next == v {
                continue;
            }
            let w_right = w_total - w_left;
            if w_left <= 0.0 || w_right <= 0.0 {
                continue;
            }
            let (mut sl, mut sr) = (0.0, 0.0);
            for k in 0..self.n_classes {
                sl += left[k] * left[k];
                let r = total[k] - left[k];
                sr += r * r;
            }
            let score = w_total - sl / w_left - sr / w_right;
            let mut threshold = 0.5 * (v + next);
            if threshold >= next {
                threshold = v;
            }
            let cand = Candidate {
                score,
                feature,
                threshold,
            };
            if cand.better_than(&best) {
                best = Some(cand);
            }
        }
        (false, best)
    }

    fn build<R: rand::Rng>(&self, samples: Vec<usize>, rng: &mut R) -> DecisionTree {
        let p = self.x.cols();
        let mut nodes = vec![Node::Leaf {
            histogram: Vec::new(),
        }];
        let mut stack = vec![(0usize, samples, 0usize)];
        let mut features: Vec<usize> = (0..p).collect();
        let mut buf = Vec::new();

        while let Some((id, samples, depth)) = stack.pop() {
            let hist = self.histogram(&samples);
            let pure = hist.iter().filter(|&&h| h > 0.0).count() <= 1;
            let too_deep = self.max_depth.is_some_and(|d| depth >= d);
            if pure || too_deep || samples.len() < self.min_samples_split {
                nodes[id] = Node::Leaf { histogram: hist };
                continue;
            }
            let w: f64 = hist.iter().sum();
            let parent = w - hist.iter().map(|h| h * h).sum::<f64>() / w;

            // visit features in random order until `max_features` non-constant
            // ones have been evaluated
            features.shuffle(rng);
            let mut best: Option<Candidate> = None;
            let mut evaluated = 0;
            for &f in &features {
                if evaluated == self.max_features {
                    break;
                }
                let (constant, cand) = self.best_on_feature(&samples, f, &hist, &mut buf);
                if constant {
                    continue;
                }
                evaluated += 1;
                if let Some(c) = cand {
                    if c.better_than(&best) {
                        best = Some(c);
                    }
                }
            }
            let split = best.filter(|c| parent - c.score > 1e-12 * w);
            let Some(c) = split else {
                nodes[id] = Node::Leaf { histogram: hist };
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = samples
                .into_iter()
                .partition(|&s| self.x.get(s, c.feature) <= c.threshold);
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf {
                histogram: Vec::new(),
            });
            nodes.push(Node::Leaf {
                histogram: Vec::new(),
            });
            nodes[id] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: l,
                right: r,
            };
            stack.push((r, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        DecisionTree { nodes }
    }
}

/// A fitted forest; class codes are sorted ascending and indexed 0..C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub classes: Vec<u32>,
    pub class_weights: Vec<f64>,
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub params: ForestParams,
    pub seed: u64,
}

impl RfModel {
    /// Tree `t` draws its bootstrap and feature order from `seed + t`.
    pub fn fit(x: &Matrix, y: &[u32], params: &ForestParams, seed: u64) -> Result<Self> {
        let n = x.rows();
        if y.len() != n {
            return Err(Error::arg(format!("{} labels for {n} rows", y.len())));
        }
        if n < 2 {
            return Err(Error::arg("random forest needs at least two rows"));
        }
        if params.n_estimators == 0 {
            return Err(Error::arg("n_estimators must be positive"));
        }
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::arg("random forest needs at least two classes"));
        }
        let y_idx: Vec<usize> = y
            .iter()
            .map(|l| classes.binary_search(l).unwrap())
            .collect();
        let class_weights = match params.class_weight {
            ClassWeight::Balanced => balanced_weights(&y_idx, classes.len()),
            ClassWeight::Uniform => vec![1.0; classes.len()],
        };
        let builder = Builder {
            x,
            y: &y_idx,
            weights: &class_weights,
            n_classes: classes.len(),
            max_features: params.max_features.resolve(x.cols()),
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split.max(2),
        };
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::seeded(seed.wrapping_add(t as u64));
                let samples = if params.bootstrap {
                    (0..n).map(|_| r.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                builder.build(samples, &mut r)
            })
            .collect();
        Ok(RfModel {
            classes,
            class_weights,
            trees,
            n_features: x.cols(),
            params: params.clone(),
            seed,
        })
    }

    /// Summed leaf histograms of all trees for one row.
    pub fn votes(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.classes.len()];
        for t in &self.trees {
            for (a, h) in acc.iter_mut().zip(t.leaf(row)) {
                *a += h;
            }
        }
        acc
    }

    pub fn predict(&self, q: &Matrix) -> Result<Vec<u32>> {
        q.check_cols(self.n_features, "random forest query")?;
        Ok((0..q.rows())
            .into_par_iter()
            .map(|i| {
                let v = self.votes(q.row(i));
                let mut best = 0;
                for (c, &s) in v.iter().enumerate() {
                    if s > v[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}
