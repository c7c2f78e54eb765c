//! Regression random forest over small dense feature vectors.
//!
//! CART trees with squared-error splits: every midpoint between consecutive
//! distinct feature values is a candidate threshold, rows with
//! `x[f] <= threshold` go left. Each tree sees a bootstrap resample and draws
//! `max_features` candidate features per node.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::binio::{BinReader, BinWriter};
use crate::error::Result;

pub const N_FEATURES: usize = 3;

pub type Features = [f64; N_FEATURES];

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    /// 100 trees of depth 10, `ceil(sqrt(3)) = 2` features per split.
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 10,
            min_leaf: 1,
            max_features: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: u8,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Sum of squared errors of the two children.
    pub sse: f64,
}

/// Best squared-error split of `rows` over `features`, or `None` if no split
/// leaves `min_leaf` rows on both sides.
pub fn best_split(
    x: &[Features],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| y[r] * y[r]).sum();
    let mut order = rows.to_vec();
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += y[order[k]];
            let nl = k + 1;
            let nr = n - nl;
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            if lo == hi || nl < min_leaf || nr < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let sse =
                total_sq - left_sum * left_sum / nl as f64 - right_sum * right_sum / nr as f64;
            if best.is_none_or(|b| sse < b.sse) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    sse,
                });
            }
        }
    }
    best
}

struct Builder<'a, R> {
    x: &'a [Features],
    y: &'a [f64],
    params: &'a ForestParams,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, rows: &[usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if depth >= self.params.max_depth || pure {
            return id;
        }
        let mut feats: Vec<usize> = (0..N_FEATURES).collect();
        let m = self.params.max_features.clamp(1, N_FEATURES);
        let (chosen, _) = feats.partial_shuffle(&mut self.rng, m);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        let Some(split) = best_split(self.x, self.y, rows, &chosen, self.params.min_leaf) else {
            return id;
        };
        let parent_sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        if !(split.sse < parent_sse) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&row| self.x[row][split.feature] <= split.threshold);
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: split.feature as u8,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    pub fn fit<R: Rng>(
        x: &[Features],
        y: &[f64],
        rows: &[usize],
        params: &ForestParams,
        rng: R,
    ) -> Tree {
        let mut b = Builder {
            x,
            y,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.build(rows, 0);
        Tree { nodes: b.nodes }
    }

    pub fn predict(&self, x: &Features) -> f64 {
        let mut k = 0usize;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    }
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    pub(crate) fn write(&self, w: &mut BinWriter) {
        w.u32(self.nodes.len() as u32);
        for n in &self.nodes {
            match *n {
                Node::Leaf(v) => {
                    w.u8(0);
                    w.f64(v);
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.u8(1);
                    w.u8(feature);
                    w.f64(threshold);
                    w.u32(left);
                    w.u32(right);
                }
            }
        }
    }

    pub(crate) fn read(r: &mut BinReader<'_>) -> Result<Tree> {
        let n = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n.min(1 << 20));
        for k in 0..n {
            let node = match r.u8()? {
                0 => Node::Leaf(r.f64()?),
                1 => {
                    let feature = r.u8()?;
                    let threshold = r.f64()?;
                    let (left, right) = (r.u32()?, r.u32()?);
                    if feature as usize >= N_FEATURES
                        || left as usize >= n
                        || right as usize >= n
                        || (left as usize) <= k
                        || (right as usize) <= k
                    {
                        return Err(r.fail("invalid tree node"));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                t => return Err(r.fail(format!("bad node tag {t}"))),
            };
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(r.fail("empty tree"));
        }
        Ok(Tree { nodes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    /// Trees are fitted in parallel; tree `t` draws from stream `t` of `seed`,
    /// so the result does not depend on thread scheduling.
    pub fn fit(x: &[Features], y: &[f64], params: &ForestParams, seed: u64) -> RandomForest {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty(), "cannot fit a forest on no rows");
        let n = x.len();
        let trees = (0..params.n_trees.max(1))
            .into_par_iter()
            .map(|t| {
                let mut rng = crate::rng::stream(seed, t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                Tree::fit(x, y, &rows, params, rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn predict(&self, x: &Features) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub(crate) fn write(&self, w: &mut BinWriter) {
        w.u32(self.trees.len() as u32);
        for t in &self.trees {
            t.write(w);
        }
    }

    pub(crate) fn read(r: &mut BinReader<'_>) -> Result<RandomForest> {
        let n = r.u32()? as usize;
        if n == 0 {
            return Err(r.fail("forest without trees"));
        }
        let trees = (0..n).map(|_| Tree::read(r)).collect::<Result<_>>()?;
        Ok(RandomForest { trees })
    }
}
