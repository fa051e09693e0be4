//! Randomized regression-tree ensembles on quantile-binned features.
//!
//! Each tree is grown on a bootstrap sample; at every node a random subset
//! of features is scanned for the split with the largest reduction of the
//! squared error. A feature's importance is its share of that reduction.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Smallest number of samples allowed in a leaf.
    pub min_leaf: usize,
    /// Features tried per split; `None` means `⌈√p⌉`.
    pub max_features: Option<usize>,
    /// Quantile bins per feature (at most 256).
    pub n_bins: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 8, min_leaf: 5, max_features: None, n_bins: 256, seed: 0 }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::invalid("n_trees, max_depth and min_leaf must be positive"));
        }
        if !(2..=256).contains(&self.n_bins) {
            return Err(Error::invalid("n_bins must lie in 2..=256"));
        }
        if self.max_features == Some(0) {
            return Err(Error::invalid("max_features must be positive"));
        }
        Ok(())
    }
}

/// Features discretized into quantile bins; bin `b` of feature `f` holds
/// the values in `(upper[f][b-1], upper[f][b]]`.
#[derive(Clone, Debug)]
pub struct BinnedFeatures {
    bins: Vec<Vec<u8>>,
    n_bins: Vec<usize>,
}

impl BinnedFeatures {
    pub fn new(columns: &[&[f64]], max_bins: usize) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("feature columns have different lengths"));
        }
        let mut bins = Vec::with_capacity(columns.len());
        let mut counts = Vec::with_capacity(columns.len());
        for col in columns {
            let (b, k) = bin_column(col, max_bins);
            bins.push(b);
            counts.push(k);
        }
        Ok(Self { bins, n_bins: counts })
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn n_rows(&self) -> usize {
        self.bins.first().map_or(0, Vec::len)
    }

    /// A view restricted to the given features, in that order.
    pub fn select(&self, features: &[usize]) -> Self {
        Self {
            bins: features.iter().map(|&f| self.bins[f].clone()).collect(),
            n_bins: features.iter().map(|&f| self.n_bins[f]).collect(),
        }
    }
}

fn bin_column(col: &[f64], max_bins: usize) -> (Vec<u8>, usize) {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut uppers: Vec<f64> = Vec::with_capacity(max_bins);
    for k in 1..=max_bins {
        let idx = (k * sorted.len()).div_ceil(max_bins).saturating_sub(1).min(sorted.len().saturating_sub(1));
        let v = sorted.get(idx).copied().unwrap_or(0.0);
        if uppers.last().is_none_or(|&u| v > u) {
            uppers.push(v);
        }
    }
    let bins = col.iter().map(|v| uppers.partition_point(|u| u < v).min(uppers.len() - 1) as u8).collect();
    (bins, uppers.len().max(1))
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split { feature: usize, bin: u8, left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &BinnedFeatures, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, bin, left, right } => {
                    i = if x.bins[feature][row] <= bin { left } else { right };
                }
            }
        }
    }
}

/// Fitted ensemble with its importance profile and out-of-bag fit quality.
#[derive(Clone, Debug)]
pub struct Forest {
    trees: Vec<Tree>,
    /// Normalized importances (sum 1), or all zero for a constant target.
    pub importances: Vec<f64>,
    /// Out-of-bag predictions; rows never left out fall back to the mean.
    pub oob_predictions: Vec<f64>,
    /// Out-of-bag coefficient of determination.
    pub oob_r2: f64,
    pub degenerate: bool,
}

impl Forest {
    pub fn predict(&self, x: &BinnedFeatures, row: usize) -> f64 {
        self.trees.iter().map(|t| t.predict(x, row)).sum::<f64>() / self.trees.len() as f64
    }
}

struct Grower<'a> {
    x: &'a BinnedFeatures,
    y: &'a [f64],
    cfg: &'a ForestConfig,
    m_try: usize,
    gains: Vec<f64>,
    nodes: Vec<Node>,
    // Scratch histograms.
    count: Vec<f64>,
    sum: Vec<f64>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [u32], depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&r| self.y[r as usize]).sum();
        self.nodes.push(Node::Leaf(total / n));
        if depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf {
            return id;
        }
        let p = self.x.n_features();
        let mut features: Vec<usize> = (0..p).collect();
        for k in 0..self.m_try {
            let j = k + rng.below(p - k);
            features.swap(k, j);
        }
        let base = total * total / n;
        let mut best: Option<(f64, usize, u8)> = None;
        for &f in &features[..self.m_try] {
            let nb = self.x.n_bins[f];
            self.count[..nb].iter_mut().for_each(|c| *c = 0.0);
            self.sum[..nb].iter_mut().for_each(|s| *s = 0.0);
            let col = &self.x.bins[f];
            for &r in rows.iter() {
                let b = col[r as usize] as usize;
                self.count[b] += 1.0;
                self.sum[b] += self.y[r as usize];
            }
            let (mut nl, mut sl) = (0.0, 0.0);
            for b in 0..nb.saturating_sub(1) {
                nl += self.count[b];
                sl += self.sum[b];
                let nr = n - nl;
                if nl < self.cfg.min_leaf as f64 || nr < self.cfg.min_leaf as f64 {
                    continue;
                }
                let sr = total - sl;
                let gain = sl * sl / nl + sr * sr / nr - base;
                if gain > best.map_or(1e-12 * base.abs().max(1e-300), |b| b.0) {
                    best = Some((gain, f, b as u8));
                }
            }
        }
        let Some((gain, feature, bin)) = best else { return id };
        self.gains[feature] += gain;
        let col = &self.x.bins[feature];
        let mut split = 0;
        for i in 0..rows.len() {
            if col[rows[i] as usize] <= bin {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l_rows, r_rows) = rows.split_at_mut(split);
        let left = self.grow(l_rows, depth + 1, rng);
        let right = self.grow(r_rows, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, bin, left, right };
        id
    }
}

/// Fits `cfg.n_trees` bootstrap trees of `y` on the binned features.
pub fn fit_forest(x: &BinnedFeatures, y: &[f64], cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    let n = y.len();
    let p = x.n_features();
    if x.n_rows() != n || n == 0 {
        return Err(Error::invalid("feature rows must match the target and be nonempty"));
    }
    if p == 0 {
        return Err(Error::invalid("need at least one candidate feature"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("target contains non-finite values"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst <= 1e-24 * n as f64 * mean.abs().max(1.0).powi(2) {
        return Ok(Forest {
            trees: vec![Tree { nodes: vec![Node::Leaf(mean)] }],
            importances: vec![0.0; p],
            oob_predictions: vec![mean; n],
            oob_r2: 0.0,
            degenerate: true,
        });
    }

    let m_try = cfg.max_features.unwrap_or_else(|| libm::ceil(libm::sqrt(p as f64)) as usize).min(p);
    let max_bins = x.n_bins.iter().copied().max().unwrap_or(1);
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut importances = vec![0.0; p];
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0u32; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut in_bag = vec![false; n];
    for _ in 0..cfg.n_trees {
        let mut tree_rng = rng.fork();
        in_bag.iter_mut().for_each(|b| *b = false);
        let mut rows: Vec<u32> = (0..n)
            .map(|_| {
                let r = tree_rng.below(n);
                in_bag[r] = true;
                r as u32
            })
            .collect();
        let mut g = Grower {
            x,
            y,
            cfg,
            m_try,
            gains: vec![0.0; p],
            nodes: Vec::new(),
            count: vec![0.0; max_bins],
            sum: vec![0.0; max_bins],
        };
        g.grow(&mut rows, 0, &mut tree_rng);
        let total: f64 = g.gains.iter().sum();
        if total > 0.0 {
            importances.iter_mut().zip(&g.gains).for_each(|(i, gn)| *i += gn / total);
        }
        let tree = Tree { nodes: g.nodes };
        for r in (0..n).filter(|&r| !in_bag[r]) {
            oob_sum[r] += tree.predict(x, r);
            oob_count[r] += 1;
        }
        trees.push(tree);
    }
    let s: f64 = importances.iter().sum();
    if s > 0.0 {
        importances.iter_mut().for_each(|i| *i /= s);
    }
    let oob_predictions: Vec<f64> =
        oob_sum.iter().zip(&oob_count).map(|(s, &c)| if c > 0 { s / c as f64 } else { mean }).collect();
    let sse: f64 = oob_predictions.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum();
    Ok(Forest { trees, importances, oob_predictions, oob_r2: 1.0 - sse / sst, degenerate: false })
}
