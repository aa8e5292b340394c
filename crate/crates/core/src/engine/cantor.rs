use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kgb::{build_kgb, build_packing, IndexedBall};
use super::{EngineConstants, MtpScene};
use crate::dimfun::{DimensionFunction, TransferPair};
use crate::geometry::{five_r_cover, Ball};
use crate::raster::Grid;
use crate::{Error, Result};

pub const TREE_FORMAT_VERSION: u32 = 1;
const TREE_FORMAT: &str = "mtp-cantor-tree";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub eta: f64,
    /// Number of levels, counting `K(1) = {B0}`.
    pub max_depth: usize,
    /// Generations scanned by one K_{G,B} search before giving up.
    pub gen_window: usize,
    pub d1: f64,
    pub d2: f64,
    /// Largest sub-level count `l_B` the engine will attempt.
    pub max_sublevels: usize,
    /// Largest number of construction balls in one level.
    pub max_nodes: usize,
    /// Largest leftover-space lattice for one sub-level.
    pub max_lattice: usize,
}

impl EngineConfig {
    pub fn new(eta: f64, max_depth: usize, d1: f64, d2: f64) -> Self {
        EngineConfig {
            eta,
            max_depth,
            gen_window: 4,
            d1,
            d2,
            max_sublevels: 16,
            max_nodes: 2_000_000,
            max_lattice: 4_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorNode {
    pub id: usize,
    pub ball: Ball,
    pub level: usize,
    /// Sub-level of the parent's construction this node came from (0 for the root).
    pub sublevel: usize,
    /// `(A; j)` the node was packed into.
    pub source: Option<IndexedBall>,
    pub parent: Option<usize>,
    pub weight: f64,
    pub children: Vec<usize>,
}

/// Audit record for one sub-level of one parent ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubLevel {
    pub parent: usize,
    pub index: usize,
    pub g: usize,
    pub hosts: usize,
    pub kgb: usize,
    pub balls: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// `sum V^k(A) / V^k(B)`.
    pub coverage: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Lattice fraction of `B/2` left after removing the closed `4L`.
    pub leftover_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorTree {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub norm: crate::geometry::Norm,
    pub f: DimensionFunction,
    pub constants: EngineConstants,
    pub config: EngineConfig,
    pub nodes: Vec<CantorNode>,
    pub levels: Vec<Vec<usize>>,
    pub sublevels: Vec<SubLevel>,
    /// Sub-level counts `l_B` per node id of non-leaf levels, and the leaves' values.
    pub l_b: Vec<u64>,
}

impl CantorTree {
    pub fn root(&self) -> &CantorNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: CantorTree = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if t.format != TREE_FORMAT || t.version != TREE_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported tree format {} v{}",
                t.format, t.version
            )));
        }
        Ok(t)
    }

    /// Hex SHA-256 of the compact serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("tree serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `|sum of weights - 1|` per level.
    pub fn level_defects(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|ids| (ids.iter().map(|&i| self.nodes[i].weight).sum::<f64>() - 1.0).abs())
            .collect()
    }
}

struct Ctx<'a> {
    scene: &'a MtpScene,
    pair: &'a TransferPair,
    f: &'a DimensionFunction,
    c: &'a EngineConstants,
    cfg: &'a EngineConfig,
    r0: f64,
}

struct Child {
    ball: Ball,
    source: IndexedBall,
    sublevel: usize,
    weight: f64,
}

struct Built {
    children: Vec<Child>,
    sublevels: Vec<SubLevel>,
    l_b: u64,
}

/// Nested levels `K(1) ⊃ K(2) ⊃ ...` with the measure `mu`; every structural
/// property is checked as it is built.
pub fn build_cantor(
    scene: &MtpScene,
    f: &DimensionFunction,
    cfg: &EngineConfig,
    b0: &Ball,
) -> Result<CantorTree> {
    if cfg.max_depth == 0 {
        return Err(Error::Invalid("depth must be at least 1".into()));
    }
    if b0.dim() != scene.k {
        return Err(Error::DimensionMismatch {
            expected: scene.k,
            got: b0.dim(),
        });
    }
    if !scene.omega.contains_ball(b0, scene.norm) {
        return Err(Error::Invalid("B0 must lie inside the ambient ball".into()));
    }
    let pair = TransferPair::derive(f, scene.l, scene.k)?;
    let c = EngineConstants::new(scene.k, scene.norm, cfg.eta, cfg.d1, cfg.d2)?;
    let ctx = Ctx {
        scene,
        pair: &pair,
        f,
        c: &c,
        cfg,
        r0: b0.radius,
    };
    let mut nodes = vec![CantorNode {
        id: 0,
        ball: b0.clone(),
        level: 1,
        sublevel: 0,
        source: None,
        parent: None,
        weight: 1.0,
        children: Vec::new(),
    }];
    let mut levels = vec![vec![0usize]];
    let mut sublevels = Vec::new();
    let mut l_b = Vec::new();
    for level in 1..cfg.max_depth {
        let current = levels[level - 1].clone();
        let built: Vec<Result<Built>> = current
            .par_iter()
            .map(|&id| expand(&ctx, &nodes[id].ball, level, id))
            .collect();
        let mut next = Vec::new();
        for (&id, b) in current.iter().zip(built) {
            let b = b?;
            l_b.push(b.l_b);
            sublevels.extend(b.sublevels);
            let parent_w = nodes[id].weight;
            for ch in b.children {
                let nid = nodes.len();
                nodes.push(CantorNode {
                    id: nid,
                    ball: ch.ball,
                    level: level + 1,
                    sublevel: ch.sublevel,
                    source: Some(ch.source),
                    parent: Some(id),
                    weight: parent_w * ch.weight,
                    children: Vec::new(),
                });
                nodes[id].children.push(nid);
                next.push(nid);
            }
            if next.len() > cfg.max_nodes {
                return Err(Error::Infeasible {
                    property: "P5".into(),
                    detail: format!("level {} exceeds {} balls", level + 1, cfg.max_nodes),
                });
            }
        }
        if next.is_empty() {
            return Err(Error::property("P2", format!("level {} is empty", level + 1)));
        }
        levels.push(next);
    }
    // (P5) at the deepest level: every leaf would admit at least two sub-levels
    if cfg.max_depth >= 2 {
        for &id in levels.last().unwrap() {
            let lb = c.sublevels(f, nodes[id].ball.radius);
            if lb < 2.0 {
                return Err(Error::property(
                    "P5",
                    format!("leaf {id}: l_B = {lb} < 2 (card)"),
                ));
            }
        }
    }
    let tree = CantorTree {
        format: TREE_FORMAT.into(),
        version: TREE_FORMAT_VERSION,
        k: scene.k,
        l: scene.l,
        m: scene.m,
        norm: scene.norm,
        f: f.clone(),
        constants: c,
        config: cfg.clone(),
        nodes,
        levels,
        sublevels,
        l_b,
    };
    check_weights(&tree)?;
    Ok(tree)
}

fn check_weights(t: &CantorTree) -> Result<()> {
    if t.levels[0] != [0] || t.nodes[0].weight != 1.0 {
        return Err(Error::property("P0", "K(1) must be {B0} with mass 1"));
    }
    for (lvl, d) in t.level_defects().iter().enumerate() {
        if *d > 1e-9 {
            return Err(Error::property(
                "mu additivity",
                format!("level {} sums to 1 {:+.3e}", lvl + 1, d),
            ));
        }
    }
    for n in &t.nodes {
        if n.children.is_empty() {
            continue;
        }
        let s: f64 = n.children.iter().map(|&c| t.nodes[c].weight).sum();
        if (s - n.weight).abs() > 1e-9 * n.weight.max(1e-300) {
            return Err(Error::property(
                "mu additivity",
                format!("node {} has weight {} but children sum to {s}", n.id, n.weight),
            ));
        }
    }
    Ok(())
}

/// Gate evaluated at the envelope value `u` for a candidate first index.
fn first_failing_gate(ctx: &Ctx, u: f64, host_r: f64, eps_rhs: f64, prev: Option<(f64, f64)>) -> Option<&'static str> {
    let k = ctx.scene.k as i32;
    let rt = ctx.pair.g_root(u);
    let fu = ctx.f.eval_saturating(u);
    if !(6.0 * u < rt) {
        return Some("radii comparison");
    }
    if !(u.powi(k) / fu < eps_rhs) {
        return Some("epsilon relation");
    }
    if !(fu / (ctx.c.c3 * u.powi(k)) >= 1.0) {
        return Some("card");
    }
    if !(rt < host_r / 10.0) {
        return Some("kgb radius");
    }
    if let Some((fmin, gmin)) = prev {
        if !(fu <= 0.5 * fmin && ctx.pair.g.eval_saturating(u) <= 0.5 * gmin) {
            return Some("f and g relations");
        }
    }
    None
}

/// Smallest index `>= from` whose tail satisfies every gate.
fn select_g(ctx: &Ctx, from: usize, host_r: f64, eps_rhs: f64, prev: Option<(f64, f64)>) -> Result<usize> {
    let n = ctx.scene.len();
    if from >= n {
        return Err(Error::gate("scene exhausted", format!("no plane at index >= {from}")));
    }
    let ok = |j: usize| first_failing_gate(ctx, ctx.scene.envelope(j), host_r, eps_rhs, prev).is_none();
    if !ok(n - 1) {
        let gate = first_failing_gate(ctx, ctx.scene.envelope(n - 1), host_r, eps_rhs, prev).unwrap();
        return Err(Error::gate(
            gate,
            format!("fails even at the last index {} (Y = {:.3e})", n - 1, ctx.scene.envelope(n - 1)),
        ));
    }
    let (mut lo, mut hi) = (from, n - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

fn expand(ctx: &Ctx, b: &Ball, level: usize, id: usize) -> Result<Built> {
    let scene = ctx.scene;
    let k = scene.k as i32;
    let c = ctx.c;
    let is_root = level == 1;
    let lb = if is_root {
        c.root_sublevels(b.radius)
    } else {
        c.sublevels(ctx.f, b.radius)
    };
    if !is_root && lb < 2.0 {
        return Err(Error::property("P5", format!("ball {id}: l_B = {lb} < 2 (card)")));
    }
    if lb > ctx.cfg.max_sublevels as f64 {
        return Err(Error::Infeasible {
            property: "P5".into(),
            detail: format!(
                "ball {id} at level {level} (r = {:.3e}) needs l_B = {lb:.3e} sub-levels, budget {}",
                b.radius, ctx.cfg.max_sublevels
            ),
        });
    }
    let lb = lb as usize;
    let eps = if is_root {
        c.eps_b0(ctx.f, ctx.r0)
    } else {
        c.eps_b()
    };
    let eps_rhs = eps * b.radius.powi(k) / ctx.f.eval_saturating(b.radius);

    // (A; j) groups per sub-level, each with its packing
    let mut groups: Vec<Vec<(IndexedBall, Vec<Ball>)>> = Vec::new();
    let mut audits = Vec::new();
    let mut used_max = 0usize;
    let mut all_l: Vec<Ball> = Vec::new();
    for i in 1..=lb {
        let (hosts, prev, from, leftover) = if i == 1 {
            (vec![b.clone()], None, 0, None)
        } else {
            let last = groups.last().unwrap();
            let d_min = last
                .iter()
                .flat_map(|(_, ls)| ls.iter().map(|l| l.radius))
                .fold(f64::INFINITY, f64::min);
            let fmin = ctx.f.eval_saturating(d_min);
            let gmin = ctx.pair.g.eval_saturating(d_min);
            let (hosts, frac) = leftover_hosts(ctx, b, &all_l, d_min, id)?;
            (hosts, Some((fmin, gmin)), used_max + 1, Some(frac))
        };
        let host_r = hosts.iter().map(|h| h.radius).fold(f64::INFINITY, f64::min);
        let g = select_g(ctx, from, host_r, eps_rhs, prev)?;
        let mut group = Vec::new();
        let mut kgb_count = 0;
        for h in &hosts {
            let kgb = build_kgb(scene, h, g, ctx.pair, ctx.cfg.gen_window)?;
            kgb_count += kgb.len();
            for a in kgb {
                let p = build_packing(scene, &a, ctx.pair)?;
                if p.ratio < c.d1 || p.ratio > c.d2 {
                    return Err(Error::property(
                        "packing (v)",
                        format!("#C ratio {:.4} outside [{:.4}, {:.4}]", p.ratio, c.d1, c.d2),
                    ));
                }
                used_max = used_max.max(a.j);
                group.push((a, p.balls));
            }
        }
        let balls: usize = group.iter().map(|(_, ls)| ls.len()).sum();
        let (rmin, rmax) = group
            .iter()
            .flat_map(|(_, ls)| ls.iter().map(|l| l.radius))
            .fold((f64::INFINITY, 0.0f64), |(a, z), r| (a.min(r), z.max(r)));
        let coverage = group.iter().map(|(a, _)| a.ball.radius.powi(k)).sum::<f64>() / b.radius.powi(k);
        let ratios = group.iter().map(|(a, ls)| {
            ls.len() as f64 / (a.ball.radius / scene.planes[a.j].upsilon).powi(scene.l as i32)
        });
        let (qmin, qmax) = ratios.fold((f64::INFINITY, 0.0f64), |(a, z), r| (a.min(r), z.max(r)));
        audits.push(SubLevel {
            parent: id,
            index: i,
            g,
            hosts: hosts.len(),
            kgb: kgb_count,
            balls,
            min_radius: rmin,
            max_radius: rmax,
            coverage,
            min_ratio: qmin,
            max_ratio: qmax,
            leftover_fraction: leftover,
        });
        for (_, ls) in &group {
            all_l.extend(ls.iter().cloned());
        }
        if all_l.len() > ctx.cfg.max_nodes {
            return Err(Error::Infeasible {
                property: "P5".into(),
                detail: format!("ball {id} exceeds {} children", ctx.cfg.max_nodes),
            });
        }
        groups.push(group);
    }
    check_properties(ctx, b, id, &groups, &audits, lb)?;

    // mu(L) = mu(B) g(Y_j)^(k/m) / (#C(A;j) * S)
    let s: f64 = groups
        .iter()
        .flatten()
        .map(|(a, _)| a.ball.radius.powi(k))
        .sum();
    let mut children = Vec::new();
    for (i, group) in groups.into_iter().enumerate() {
        for (a, ls) in group {
            let w = a.ball.radius.powi(k) / (ls.len() as f64 * s);
            for l in ls {
                children.push(Child {
                    ball: l,
                    source: a.clone(),
                    sublevel: i + 1,
                    weight: w,
                });
            }
        }
    }
    Ok(Built {
        children,
        sublevels: audits,
        l_b: lb as u64,
    })
}

fn check_properties(
    ctx: &Ctx,
    b: &Ball,
    id: usize,
    groups: &[Vec<(IndexedBall, Vec<Ball>)>],
    audits: &[SubLevel],
    lb: usize,
) -> Result<()> {
    let norm = ctx.scene.norm;
    if groups.len() != lb {
        return Err(Error::property(
            "P5",
            format!("ball {id}: built {} sub-levels, formula gives {lb}", groups.len()),
        ));
    }
    // (P1) all 3L disjoint and inside B
    let triples: Vec<Ball> = groups
        .iter()
        .flatten()
        .flat_map(|(_, ls)| ls.iter().map(|l| l.scaled(3.0)))
        .collect();
    if triples.is_empty() {
        return Err(Error::property("P1", format!("ball {id} has no children")));
    }
    if let Some(t) = triples.iter().position(|t| !b.contains_ball(t, norm)) {
        return Err(Error::property("P1", format!("ball {id}: 3L #{t} leaves B")));
    }
    if five_r_cover(&triples, norm).len() != triples.len() {
        return Err(Error::property("P1", format!("ball {id}: two triples 3L intersect")));
    }
    for (i, group) in groups.iter().enumerate() {
        // (P2) the 3A of one sub-level are disjoint and inside B
        let ta: Vec<Ball> = group.iter().map(|(a, _)| a.ball.scaled(3.0)).collect();
        if ta.iter().any(|t| !b.contains_ball(t, norm)) || five_r_cover(&ta, norm).len() != ta.len() {
            return Err(Error::property(
                "P2",
                format!("ball {id}, sub-level {}: triples 3A overlap or leave B", i + 1),
            ));
        }
        // (P3)
        if audits[i].coverage < ctx.c.c3 {
            return Err(Error::property(
                "P3",
                format!(
                    "ball {id}, sub-level {}: sum V^k(A) / V^k(B) = {:.3e} < c3 = {:.3e}",
                    i + 1,
                    audits[i].coverage,
                    ctx.c.c3
                ),
            ));
        }
        // (P4)
        if i > 0 {
            let prev = &audits[i - 1];
            let cur = &audits[i];
            let f = ctx.f;
            let g = &ctx.pair.g;
            let halves = f.eval_saturating(cur.max_radius) <= 0.5 * f.eval_saturating(prev.min_radius)
                && g.eval_saturating(cur.max_radius) <= 0.5 * g.eval_saturating(prev.min_radius);
            if !halves {
                return Err(Error::property(
                    "P4",
                    format!("ball {id}: f or g fails to halve at sub-level {}", i + 1),
                ));
            }
        }
    }
    Ok(())
}

/// Hosts `B'` for the next sub-level: lattice points of `B/2` outside every
/// closed `4L`, balls of radius `d_min / 2` around them, thinned to a disjoint family.
fn leftover_hosts(ctx: &Ctx, b: &Ball, ls: &[Ball], d_min: f64, id: usize) -> Result<(Vec<Ball>, f64)> {
    let norm = ctx.scene.norm;
    let half = b.scaled(0.5);
    let step = d_min / 2.0;
    let cells = (2.0 * half.radius * norm.sup_factor() / step).ceil();
    let total = cells.powi(ctx.scene.k as i32);
    if !(total <= ctx.cfg.max_lattice as f64) {
        return Err(Error::Infeasible {
            property: "P5".into(),
            detail: format!("ball {id}: leftover lattice of {total:.3e} points exceeds budget"),
        });
    }
    let grid = Grid::over_ball(&half, norm, cells as usize);
    let inside = grid.ball_mask(&half, norm);
    let n_in = inside.iter().filter(|v| **v).count();
    // bucket the 4L by a coarse grid for the exclusion test
    let reach = 4.0 * ls.iter().map(|l| l.radius).fold(0.0, f64::max) * norm.sup_factor().max(1.0);
    let cell = reach.max(step);
    let mut buckets: std::collections::HashMap<Vec<i64>, Vec<usize>> = Default::default();
    for (i, l) in ls.iter().enumerate() {
        let key: Vec<i64> = l.center.iter().map(|v| (v / cell).floor() as i64).collect();
        buckets.entry(key).or_default().push(i);
    }
    let kdim = ctx.scene.k;
    let mut cands = Vec::new();
    for (idx, ins) in inside.iter().enumerate() {
        if !*ins {
            continue;
        }
        let x = grid.point(idx);
        let key: Vec<i64> = x.iter().map(|v| (v / cell).floor() as i64).collect();
        let mut blocked = false;
        let mut offs = vec![-1i64; kdim];
        'scan: loop {
            let kk: Vec<i64> = key.iter().zip(&offs).map(|(a, o)| a + o).collect();
            if let Some(list) = buckets.get(&kk) {
                for &i in list {
                    if ls[i].scaled(4.0).contains(&x, norm) {
                        blocked = true;
                        break 'scan;
                    }
                }
            }
            let mut d = 0;
            while d < kdim {
                offs[d] += 1;
                if offs[d] <= 1 {
                    break;
                }
                offs[d] = -1;
                d += 1;
            }
            if d == kdim {
                break;
            }
        }
        if !blocked {
            cands.push(Ball {
                center: x,
                radius: step,
            });
        }
    }
    let frac = if n_in == 0 { 0.0 } else { cands.len() as f64 / n_in as f64 };
    if frac < 0.5 {
        return Err(Error::property(
            "A measure inequality",
            format!("ball {id}: leftover lattice fraction {frac:.4} < 1/2"),
        ));
    }
    let kept = five_r_cover(&cands, norm);
    let mut hosts: Vec<Ball> = kept.into_iter().map(|i| cands[i].clone()).collect();
    hosts.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    Ok((hosts, frac))
}
