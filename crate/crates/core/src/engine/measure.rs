use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cantor::CantorTree;
use crate::dimfun::DimensionFunction;
use crate::estimator::{block_rng, MeasureOracle};
use crate::geometry::{Ball, Norm};
use crate::Result;

/// The tree's measure, queried through its deepest level.
pub struct TreeMeasure<'a> {
    tree: &'a CantorTree,
    norm: Norm,
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> TreeMeasure<'a> {
    pub fn new(tree: &'a CantorTree) -> Self {
        let norm = tree.norm;
        let leaves = tree.levels.last().cloned().unwrap_or_default();
        let rmax = leaves
            .iter()
            .map(|&i| tree.nodes[i].ball.radius)
            .fold(0.0, f64::max);
        let cell = (2.0 * rmax * norm.sup_factor().max(1.0)).max(1e-300);
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for &i in &leaves {
            let key = key_of(&tree.nodes[i].ball.center, cell);
            buckets.entry(key).or_default().push(i);
        }
        TreeMeasure {
            tree,
            norm,
            cell,
            buckets,
        }
    }

    /// Sum of deepest-level weights over nodes meeting `d`.
    pub fn mu(&self, d: &Ball) -> f64 {
        let reach = d.radius * self.norm.sup_factor().max(1.0);
        let lo = key_of(&d.center.iter().map(|c| c - reach - self.cell).collect::<Vec<_>>(), self.cell);
        let hi = key_of(&d.center.iter().map(|c| c + reach + self.cell).collect::<Vec<_>>(), self.cell);
        let span: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as f64).product();
        let mut total = 0.0;
        if span > self.buckets.len() as f64 {
            for list in self.buckets.values() {
                total += self.sum_list(list, d);
            }
            return total;
        }
        let mut key = lo.clone();
        loop {
            if let Some(list) = self.buckets.get(&key) {
                total += self.sum_list(list, d);
            }
            let mut dim = 0;
            while dim < key.len() {
                key[dim] += 1;
                if key[dim] <= hi[dim] {
                    break;
                }
                key[dim] = lo[dim];
                dim += 1;
            }
            if dim == key.len() {
                break;
            }
        }
        total
    }

    fn sum_list(&self, list: &[usize], d: &Ball) -> f64 {
        list.iter()
            .map(|&i| &self.tree.nodes[i])
            .filter(|n| n.ball.intersects(d, self.norm))
            .map(|n| n.weight)
            .sum()
    }
}

fn key_of(x: &[f64], cell: f64) -> Vec<i64> {
    x.iter().map(|v| (v / cell).floor() as i64).collect()
}

impl MeasureOracle for TreeMeasure<'_> {
    fn measure(&self, ball: &Ball) -> f64 {
        self.mu(ball)
    }

    fn total(&self) -> f64 {
        1.0
    }
}

/// Upper bound for `mu(d)` from the deepest built level.
pub fn mu_of_set(tree: &CantorTree, d: &Ball) -> f64 {
    TreeMeasure::new(tree).mu(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRatio {
    pub id: usize,
    pub level: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRatio {
    pub center: Vec<f64>,
    pub radius: f64,
    pub mass: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorVerifyReport {
    pub eta: f64,
    pub seed: u64,
    /// Smallest radius in `K(2)`; sample radii lie in `[r0/100, r0)`.
    pub r0: f64,
    pub node_max_ratio: f64,
    pub sample_max_ratio: f64,
    /// 50%, 90% and 99% quantiles of the sample ratios.
    pub sample_quantiles: [f64; 3],
    /// Samples with positive mass.
    pub hits: usize,
    pub nodes: Vec<NodeRatio>,
    pub samples: Vec<SampleRatio>,
    pub finite: bool,
}

/// `mu(L) eta / f(r(L))` over construction balls at levels >= 2, and
/// `mu(D) eta / f(r(D))` over random balls `D` centred in `B0`.
pub fn verify_cantor_measure_bound(
    tree: &CantorTree,
    f: &DimensionFunction,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<CantorVerifyReport> {
    let mut nodes = Vec::new();
    for n in tree.nodes.iter().filter(|n| n.level >= 2) {
        nodes.push(NodeRatio {
            id: n.id,
            level: n.level,
            ratio: n.weight * eta / f.eval_saturating(n.ball.radius),
        });
    }
    let node_max_ratio = nodes.iter().map(|r| r.ratio).fold(0.0, f64::max);
    if tree.depth() < 2 {
        return Ok(CantorVerifyReport {
            eta,
            seed,
            r0: 0.0,
            node_max_ratio,
            sample_max_ratio: 0.0,
            sample_quantiles: [0.0; 3],
            hits: 0,
            nodes,
            samples: Vec::new(),
            finite: true,
        });
    }
    let r0 = tree.levels[1]
        .iter()
        .map(|&i| tree.nodes[i].ball.radius)
        .fold(f64::INFINITY, f64::min);
    let norm = tree.norm;
    let oracle = TreeMeasure::new(tree);
    let b0 = &tree.root().ball;
    let mut rng = block_rng(seed, 0);
    let half = b0.radius * norm.sup_factor();
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let center: Vec<f64> = b0
            .center
            .iter()
            .map(|c| c + rng.gen_range(-half..half))
            .collect();
        if !b0.contains(&center, norm) {
            continue;
        }
        let u: f64 = rng.gen();
        let radius = r0 * (u * 100f64.ln()).exp() / 100.0;
        let d = Ball { center, radius };
        let mass = oracle.mu(&d);
        let ratio = mass * eta / f.eval_saturating(radius);
        out.push(SampleRatio {
            center: d.center,
            radius,
            mass,
            ratio,
        });
    }
    let mut sorted: Vec<f64> = out.iter().map(|s| s.ratio).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        if sorted.is_empty() {
            0.0
        } else {
            sorted[((sorted.len() - 1) as f64 * p).round() as usize]
        }
    };
    let sample_max_ratio = sorted.last().copied().unwrap_or(0.0);
    Ok(CantorVerifyReport {
        eta,
        seed,
        r0,
        node_max_ratio,
        sample_max_ratio,
        sample_quantiles: [q(0.5), q(0.9), q(0.99)],
        hits: out.iter().filter(|s| s.mass > 0.0).count(),
        finite: node_max_ratio.is_finite() && sample_max_ratio.is_finite(),
        nodes,
        samples: out,
    })
}

/// For balls `A`, `M` with `A ∩ M ≠ ∅` and `A ⊄ cM`, `c >= 3`: whether
/// `r_M <= r_A` and `cM ⊂ 5A`. `None` when the hypotheses fail.
pub fn separation_check(a: &Ball, m: &Ball, c: f64, norm: Norm) -> Option<bool> {
    if !(c >= 3.0) || !a.intersects(m, norm) {
        return None;
    }
    let cm = m.scaled(c);
    if cm.contains_ball(a, norm) {
        return None;
    }
    let d = norm.dist(&a.center, &m.center);
    let tol = 1e-12 * (a.radius + c * m.radius + d);
    Some(m.radius <= a.radius + tol && d + cm.radius <= 5.0 * a.radius + tol)
}
