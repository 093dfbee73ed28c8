//! CART classification trees with Gini splits over binned features.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Feature matrix with every value replaced by its bin index.
///
/// A value `v` of feature `f` falls in bin `#{e in edges[f] : e < v}`, so
/// "bin <= b" is the same test as "v <= edges[f][b]".
#[derive(Debug, Clone)]
pub struct Binned {
    pub features: usize,
    pub edges: Vec<Vec<f64>>,
    /// Row-major bin indices.
    pub bins: Vec<u8>,
    /// Per row, weight of class 0 and class 1.
    pub weights: Vec<[f64; 2]>,
}

impl Binned {
    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_of(edges: &[f64], v: f64) -> u8 {
        edges.partition_point(|&e| e < v) as u8
    }

    /// Midpoints between sorted distinct values; at most 255 of them,
    /// spread by rank when there are more.
    pub fn edges_from_values(values: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.len() <= 1 {
            return Vec::new();
        }
        let mids: Vec<f64> = v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
        if mids.len() <= 255 {
            return mids;
        }
        let mut out: Vec<f64> = (1..=255).map(|k| mids[(k * mids.len()) / 256]).collect();
        out.dedup();
        out
    }

    /// Bins a dense real matrix with one weight of 1 per row.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[bool]) -> Self {
        let features = rows.first().map_or(0, |r| r.len());
        let edges: Vec<Vec<f64>> =
            (0..features).map(|f| Self::edges_from_values(&rows.iter().map(|r| r[f]).collect::<Vec<_>>())).collect();
        let mut bins = Vec::with_capacity(rows.len() * features);
        for r in rows {
            for f in 0..features {
                bins.push(Self::bin_of(&edges[f], r[f]));
            }
        }
        let weights = labels.iter().map(|&y| if y { [0.0, 1.0] } else { [1.0, 0.0] }).collect();
        Self { features, edges, bins, weights }
    }

    fn bin(&self, row: usize, f: usize) -> u8 {
        self.bins[row * self.features + f]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { class: bool, counts: [f64; 2] },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub features: usize,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    /// Nodes holding less total weight than this become leaves.
    pub min_samples_split: f64,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { min_samples_split: 5.0, max_features: None, max_depth: 64 }
    }
}

fn gini(w: [f64; 2]) -> f64 {
    let n = w[0] + w[1];
    if n <= 0.0 {
        return 0.0;
    }
    let p = w[1] / n;
    2.0 * p * (1.0 - p)
}

fn majority(w: [f64; 2]) -> bool {
    w[1] > w[0]
}

struct Best {
    feature: usize,
    bin: u8,
    gain: f64,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Grows a tree on rows with non-zero weight. `rng` only matters when
    /// `max_features` restricts the candidates.
    pub fn fit(data: &Binned, weights: &[[f64; 2]], params: &TreeParams, rng: &mut impl Rng) -> Tree {
        let mut idx: Vec<u32> = (0..data.rows() as u32).filter(|&r| weights[r as usize][0] + weights[r as usize][1] > 0.0).collect();
        let mut nodes = vec![Node::Leaf { class: false, counts: [0.0; 2] }];
        // (node slot, row range, depth)
        let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
        let mut order: Vec<usize> = (0..data.features).collect();
        let mut hist = vec![[0.0f64; 2]; 256];
        while let Some((slot, lo, hi, depth)) = stack.pop() {
            let rows = &mut idx[lo..hi];
            let mut tot = [0.0; 2];
            for &r in rows.iter() {
                let w = weights[r as usize];
                tot[0] += w[0];
                tot[1] += w[1];
            }
            let n = tot[0] + tot[1];
            let leaf = Node::Leaf { class: majority(tot), counts: tot };
            if n < params.min_samples_split || tot[0] == 0.0 || tot[1] == 0.0 || depth >= params.max_depth {
                nodes[slot] = leaf;
                continue;
            }
            let parent = n * gini(tot);
            let want = params.max_features.unwrap_or(data.features).clamp(1, data.features.max(1));
            if want < data.features {
                order.shuffle(rng);
            }
            let mut best: Option<Best> = None;
            for (tried, &f) in order.iter().enumerate() {
                if tried >= want && best.is_some() {
                    break;
                }
                hist.iter_mut().for_each(|h| *h = [0.0; 2]);
                let mut top = 0usize;
                for &r in rows.iter() {
                    let b = data.bin(r as usize, f) as usize;
                    let w = weights[r as usize];
                    hist[b][0] += w[0];
                    hist[b][1] += w[1];
                    top = top.max(b);
                }
                let mut left = [0.0; 2];
                for (b, h) in hist.iter().enumerate().take(top) {
                    left[0] += h[0];
                    left[1] += h[1];
                    let nl = left[0] + left[1];
                    if nl <= 0.0 {
                        continue;
                    }
                    let right = [tot[0] - left[0], tot[1] - left[1]];
                    let nr = right[0] + right[1];
                    if nr <= 0.0 {
                        break;
                    }
                    let gain = parent - nl * gini(left) - nr * gini(right);
                    if gain > 1e-12 * n && best.as_ref().is_none_or(|x| gain > x.gain) {
                        best = Some(Best { feature: f, bin: b as u8, gain });
                    }
                }
            }
            let Some(best) = best else {
                nodes[slot] = leaf;
                continue;
            };
            // Partition rows: bin <= best.bin to the front.
            let mut i = 0;
            for j in 0..rows.len() {
                if data.bin(rows[j] as usize, best.feature) <= best.bin {
                    rows.swap(i, j);
                    i += 1;
                }
            }
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { class: false, counts: [0.0; 2] });
            nodes.push(Node::Leaf { class: false, counts: [0.0; 2] });
            let threshold = data.edges[best.feature][best.bin as usize];
            nodes[slot] = Node::Split { feature: best.feature, threshold, left: l, right: r };
            stack.push((r, lo + i, hi, depth + 1));
            stack.push((l, lo, lo + i, depth + 1));
        }
        Tree { features: data.features, nodes }
    }
}

/// Single decision tree over all features with unit row weights.
pub fn fit_tree(rows: &[Vec<f64>], labels: &[bool], params: &TreeParams) -> Result<(Tree, Vec<String>)> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
    }
    let mut warnings = Vec::new();
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        warnings.push("training labels hold a single class; the tree is constant".to_string());
    }
    let data = Binned::from_dense(rows, labels);
    let w = data.weights.clone();
    let mut rng = crate::rng::substream(0, crate::rng::Stream::Tree, 0);
    Ok((Tree::fit(&data, &w, params, &mut rng), warnings))
}
