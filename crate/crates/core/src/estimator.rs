//! Dimension prediction and empirical estimators for truncated limsup sets.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; sample
//! block `b` (of [`BLOCK`] points) uses stream `b`, so results do not depend
//! on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimfun::DimensionFunction;
use crate::diophantine::{invert, shell, Psi, SceneConfig, WitnessSearch};
use crate::geometry::{euclid, AffinePlane, Ball};
use crate::{Error, Result};

pub const BLOCK: usize = 256;
const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Supercritical,
    Saturated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimPrediction {
    pub s0: f64,
    pub regime: Regime,
    pub n: usize,
    pub m: usize,
    pub tau: f64,
}

/// `m(n-1) + (m+n)/(tau+1)` for `tau > n/m`, else `nm`.
pub fn predict_dimension(n: usize, m: usize, tau: f64) -> Result<DimPrediction> {
    if n == 0 || m == 0 {
        return Err(Error::Invalid("n and m must be positive".into()));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            domain: "tau > 0".into(),
        });
    }
    let (nf, mf) = (n as f64, m as f64);
    let (s0, regime) = if tau > nf / mf {
        (mf * (nf - 1.0) + (mf + nf) / (tau + 1.0), Regime::Supercritical)
    } else {
        (nf * mf, Regime::Saturated)
    };
    Ok(DimPrediction {
        s0,
        regime,
        n,
        m,
        tau,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub fraction: f64,
    pub hits: u64,
    pub samples: u64,
    pub seed: u64,
    pub q_max: u64,
    pub g_min: u64,
    pub half_width: f64,
}

/// Fraction of uniform points of `I^{nm}` with a witness `G <= |q| <= Q`.
pub fn mc_measure(
    cfg: &SceneConfig,
    q_max: u64,
    g_min: u64,
    samples: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    cfg.validate()?;
    if g_min == 0 || g_min > q_max {
        return Err(Error::Invalid(format!("need 1 <= G <= Q, got G = {g_min}, Q = {q_max}")));
    }
    let k = cfg.k();
    let search = WitnessSearch::new(cfg);
    let fast = match &cfg.psi {
        Psi::Single(a) if cfg.phi_is_identity() && cfg.partition.is_none() => Some(a),
        _ => None,
    };
    // flat q list per shell with the shell's psi
    let shells: Vec<(f64, Vec<i64>)> = (g_min..=q_max)
        .map(|s| {
            let w = fast.map_or(f64::NAN, |a| a.eval(s));
            (w, shell(cfg.n, s).concat())
        })
        .filter(|(w, _)| !(*w <= 0.0))
        .collect();
    let n = cfg.n;
    let m = cfg.m;
    let hit = |x: &[f64]| -> bool {
        for (w, qs) in &shells {
            if fast.is_some() && *w > 0.5 {
                return true;
            }
            for q in qs.chunks(n) {
                let ok = if fast.is_some() {
                    (0..m).all(|l| {
                        let v: f64 = x[l * n..(l + 1) * n]
                            .iter()
                            .zip(q)
                            .map(|(a, b)| a * *b as f64)
                            .sum::<f64>()
                            - cfg.y[l];
                        (v - v.round()).abs() < *w
                    })
                } else {
                    search.has_witness(x, q)
                };
                if ok {
                    return true;
                }
            }
        }
        false
    };
    let blocks = samples.div_ceil(BLOCK as u64);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let count = (samples - b * BLOCK as u64).min(BLOCK as u64);
            let mut x = vec![0.0; k];
            let mut h = 0u64;
            for _ in 0..count {
                x.iter_mut().for_each(|v| *v = rng.gen::<f64>());
                if hit(&x) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let fraction = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
    Ok(MeasureEstimate {
        fraction,
        hits,
        samples,
        seed,
        q_max,
        g_min,
        half_width: Z95 * (fraction * (1.0 - fraction) / samples.max(1) as f64).sqrt(),
    })
}

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// One box-counting scale: pairs with `q_lo < |q| <= q_hi`, cells of side `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStep {
    pub q_lo: u64,
    pub q_hi: u64,
    pub delta: f64,
}

impl ScaleStep {
    /// Union over all `|q| <= q`.
    pub fn union(q: u64, delta: f64) -> Self {
        ScaleStep {
            q_lo: 0,
            q_hi: q,
            delta,
        }
    }

    /// Dyadic shell `q/2 < |q| <= q`.
    pub fn shell(q: u64, delta: f64) -> Self {
        ScaleStep {
            q_lo: q / 2,
            q_hi: q,
            delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPoint {
    pub step: ScaleStep,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountSeries {
    pub points: Vec<BoxPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Least-squares line through `(x, y)`: slope, intercept, RMS residual.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Grid cells of side `delta` meeting `{ x in I^{nm} : |q x + p Phi - y| < psi(|q|) }`
/// for some pair in each step, counted exactly; slope of `log N` on `log 1/delta`.
pub fn box_count(cfg: &SceneConfig, schedule: &[ScaleStep]) -> Result<BoxCountSeries> {
    cfg.validate()?;
    if schedule.len() < 3 {
        return Err(Error::Invalid("box counting needs at least 3 scales".into()));
    }
    if cfg.k() > 3 {
        return Err(Error::Invalid(
            "exact slab rasterization supports n*m <= 3".into(),
        ));
    }
    for w in schedule.windows(2) {
        if !(w[1].delta < w[0].delta) {
            return Err(Error::Invalid("scales must strictly decrease".into()));
        }
    }
    let mut points = Vec::new();
    for step in schedule {
        let count = count_cells(cfg, step)?;
        points.push(BoxPoint { step: *step, count });
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.step.delta).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.count.max(1) as f64).ln()).collect();
    let (slope, intercept, residual) = fit_line(&xs, &ys);
    Ok(BoxCountSeries {
        points,
        slope,
        intercept,
        residual,
    })
}

fn grid_size(delta: f64) -> Result<u64> {
    let cells = (1.0 / delta).round();
    if !(delta > 0.0) || (cells * delta - 1.0).abs() > 1e-9 || cells < 1.0 {
        return Err(Error::Invalid(format!(
            "delta = {delta} does not divide the unit cube evenly"
        )));
    }
    Ok(cells as u64)
}

/// Per-component integer windows for `p` so that the slab can meet `I^{nm}`.
fn p_windows(cfg: &SceneConfig, q: &[i64], w: f64) -> Result<Vec<(i64, i64)>> {
    let lo: f64 = q.iter().map(|v| (*v).min(0) as f64).sum();
    let hi: f64 = q.iter().map(|v| (*v).max(0) as f64).sum();
    // need (p Phi)_l in (y_l - hi - w, y_l - lo + w)
    let inv = invert(&cfg.phi)
        .ok_or_else(|| Error::Invalid("box counting needs an invertible Phi".into()))?;
    let m = cfg.m;
    Ok((0..m)
        .map(|i| {
            let mut a = 0.0;
            let mut b = 0.0;
            for l in 0..m {
                let (u0, u1) = (cfg.y[l] - hi - w, cfg.y[l] - lo + w);
                let c = inv[l][i];
                a += (u0 * c).min(u1 * c);
                b += (u0 * c).max(u1 * c);
            }
            (a.floor() as i64, b.ceil() as i64)
        })
        .collect())
}

fn count_cells(cfg: &SceneConfig, step: &ScaleStep) -> Result<u64> {
    let cells = grid_size(step.delta)?;
    let n = cfg.n;
    let m = cfg.m;
    let qs: Vec<Vec<i64>> = (step.q_lo + 1..=step.q_hi)
        .flat_map(|s| shell(n, s))
        .collect();
    if n * m == 1 {
        let mut ranges: Vec<(u64, u64)> = Vec::new();
        for q in &qs {
            collect_1d(cfg, q, cells, step.delta, &mut ranges)?;
        }
        return Ok(merged_length(ranges));
    }
    let total = cells.pow((n * m) as u32);
    if total > (1u64 << 36) {
        return Err(Error::Invalid(format!(
            "grid of {total} cells is too large for exact counting"
        )));
    }
    let bits = qs
        .par_iter()
        .try_fold(
            || BitSet::new(total as usize),
            |mut acc, q| -> Result<BitSet> {
                mark_pairs(cfg, q, cells as usize, &mut acc)?;
                Ok(acc)
            },
        )
        .try_reduce(
            || BitSet::new(total as usize),
            |mut a, b| {
                a.or_with(&b);
                Ok(a)
            },
        )?;
    Ok(bits.count())
}

fn collect_1d(
    cfg: &SceneConfig,
    q: &[i64],
    cells: u64,
    delta: f64,
    out: &mut Vec<(u64, u64)>,
) -> Result<()> {
    let qv = q[0] as f64;
    let win = p_windows(cfg, q, cfg.psi.bound(q))?;
    let phi = cfg.phi[0][0];
    for p in win[0].0..=win[0].1 {
        let w = cfg.psi.value(&[p], q);
        if !(w > 0.0) || !cfg_accepts(cfg, &[p], q) {
            continue;
        }
        // |q x + p phi - y| < w
        let c = p as f64 * phi - cfg.y[0];
        let (x1, x2) = ((-w - c) / qv, (w - c) / qv);
        let (a, b) = (x1.min(x2).max(0.0), x1.max(x2).min(1.0));
        if let Some(r) = closed_cell_range(a, b, delta, cells) {
            out.push(r);
        }
    }
    Ok(())
}

fn cfg_accepts(cfg: &SceneConfig, p: &[i64], q: &[i64]) -> bool {
    match &cfg.partition {
        None => true,
        Some(part) => {
            let v: Vec<i64> = q.iter().chain(p).copied().collect();
            part.accepts(&v)
        }
    }
}

/// Cells `[j delta, (j+1) delta]` meeting the open interval `(a, b)`.
fn closed_cell_range(a: f64, b: f64, delta: f64, cells: u64) -> Option<(u64, u64)> {
    if !(a < b) {
        return None;
    }
    let lo = (a / delta).floor().max(0.0);
    let hi = ((b / delta).ceil() - 1.0).min(cells as f64 - 1.0);
    if lo > hi {
        return None;
    }
    Some((lo as u64, hi as u64))
}

fn merged_length(mut ranges: Vec<(u64, u64)>) -> u64 {
    ranges.sort_unstable();
    let mut total = 0;
    let mut cur: Option<(u64, u64)> = None;
    for (a, b) in ranges {
        match cur {
            Some((ca, cb)) if a <= cb + 1 => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca + 1;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((a, b)) = cur {
        total += b - a + 1;
    }
    total
}

/// Block-cell ranges (per column of the block grid) meeting `|a.z + c| < w`
/// over `z in [0,1]^n`, as `(column, lo, hi)` with cells along the last axis.
fn block_cells(a: &[i64], c: f64, w: f64, cells: usize) -> Vec<(usize, usize, usize)> {
    let n = a.len();
    let delta = 1.0 / cells as f64;
    let last = n - 1;
    let ncols = cells.pow(last as u32);
    let mut out = Vec::new();
    // restrict the first axis when n >= 2
    let (c0_lo, c0_hi) = if n >= 2 && a[0] != 0 {
        let rest_lo: f64 = a[1..].iter().map(|v| (*v).min(0) as f64).sum();
        let rest_hi: f64 = a[1..].iter().map(|v| (*v).max(0) as f64).sum();
        let a0 = a[0] as f64;
        let (x1, x2) = ((-c - w - rest_hi) / a0, (-c + w - rest_lo) / a0);
        match closed_cell_range(x1.min(x2).max(0.0), x1.max(x2).min(1.0), delta, cells as u64) {
            Some((l, h)) => (l as usize, h as usize),
            None => return out,
        }
    } else {
        (0, cells - 1)
    };
    let stride0 = if n >= 2 { cells.pow((last - 1) as u32) } else { 1 };
    let col_range = if n >= 2 {
        c0_lo * stride0..(c0_hi + 1) * stride0
    } else {
        0..ncols
    };
    let mut idx = vec![0usize; last];
    for col in col_range {
        let mut t = col;
        for d in (0..last).rev() {
            idx[d] = t % cells;
            t /= cells;
        }
        // range of a_rest . z_rest over the column box
        let mut rmin = c;
        let mut rmax = c;
        for d in 0..last {
            let lo = idx[d] as f64 * delta;
            let hi = lo + delta;
            let ad = a[d] as f64;
            rmin += (ad * lo).min(ad * hi);
            rmax += (ad * lo).max(ad * hi);
        }
        let al = a[last] as f64;
        if al == 0.0 {
            if rmin < w && rmax > -w {
                out.push((col, 0, cells - 1));
            }
            continue;
        }
        // exists z_rest with |al z + r| < w  <=>  z in ((-w - rmax)/al, (w - rmin)/al) for al > 0
        let (x1, x2) = if al > 0.0 {
            ((-w - rmax) / al, (w - rmin) / al)
        } else {
            ((w - rmin) / al, (-w - rmax) / al)
        };
        if let Some((l, h)) = closed_cell_range(x1.max(0.0), x2.min(1.0), delta, cells as u64) {
            out.push((col, l as usize, h as usize));
        }
    }
    out
}

fn mark_pairs(cfg: &SceneConfig, q: &[i64], cells: usize, bits: &mut BitSet) -> Result<()> {
    let n = cfg.n;
    let m = cfg.m;
    let bound = cfg.psi.bound(q);
    if !(bound > 0.0) {
        return Ok(());
    }
    let win = p_windows(cfg, q, bound)?;
    let block_len = cells.pow(n as u32);
    let mut p: Vec<i64> = win.iter().map(|w| w.0).collect();
    loop {
        let w = cfg.psi.value(&p, q);
        if w > 0.0 && cfg_accepts(cfg, &p, q) {
            let per_block: Vec<Vec<(usize, usize, usize)>> = (0..m)
                .map(|l| {
                    let c: f64 = (0..m).map(|i| p[i] as f64 * cfg.phi[i][l]).sum::<f64>() - cfg.y[l];
                    block_cells(q, c, w, cells)
                })
                .collect();
            if per_block.iter().all(|b| !b.is_empty()) {
                mark_product(&per_block, cells, block_len, bits);
            }
        }
        let mut d = m;
        let mut done = true;
        while d > 0 {
            d -= 1;
            p[d] += 1;
            if p[d] <= win[d].1 {
                done = false;
                break;
            }
            p[d] = win[d].0;
        }
        if done {
            return Ok(());
        }
    }
}

/// Mark the product of per-block cell sets; block 0 is the most significant.
fn mark_product(
    per_block: &[Vec<(usize, usize, usize)>],
    cells: usize,
    block_len: usize,
    bits: &mut BitSet,
) {
    let m = per_block.len();
    if m == 1 {
        for &(col, lo, hi) in &per_block[0] {
            bits.set_range(col * cells + lo, col * cells + hi);
        }
        return;
    }
    // expand leading blocks to flat indices, keep the last as ranges
    let mut prefixes: Vec<usize> = vec![0];
    for blk in &per_block[..m - 1] {
        let mut next = Vec::new();
        for &pre in &prefixes {
            for &(col, lo, hi) in blk {
                for i in lo..=hi {
                    next.push(pre * block_len + col * cells + i);
                }
            }
        }
        prefixes = next;
    }
    for pre in prefixes {
        for &(col, lo, hi) in &per_block[m - 1] {
            let base = pre * block_len + col * cells;
            bits.set_range(base + lo, base + hi);
        }
    }
}

struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Inclusive range.
    fn set_range(&mut self, a: usize, b: usize) {
        let (wa, wb) = (a / 64, b / 64);
        let lo_mask = !0u64 << (a % 64);
        let hi_mask = !0u64 >> (63 - b % 64);
        if wa == wb {
            self.words[wa] |= lo_mask & hi_mask;
            return;
        }
        self.words[wa] |= lo_mask;
        for w in &mut self.words[wa + 1..wb] {
            *w = !0;
        }
        self.words[wb] |= hi_mask;
    }

    fn or_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Sets whose f-measure is bounded by explicit covers (Euclidean norm).
#[derive(Clone, Debug, PartialEq)]
pub enum CoverTarget {
    Ball(Ball),
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// Points within `half_width` of `plane` inside `container`.
    Slab {
        plane: AffinePlane,
        half_width: f64,
        container: Ball,
    },
}

/// Number of radius-`rho` balls in the explicit cover of `target`, or a
/// single smaller ball `(1, r)` when the target already fits.
pub fn cover_count(target: &CoverTarget, rho: f64) -> (u64, f64) {
    match target {
        CoverTarget::Ball(b) => {
            if b.radius <= rho {
                return (1, b.radius);
            }
            let k = b.dim() as f64;
            let side = 2.0 * rho / k.sqrt();
            ((2.0 * b.radius / side).ceil().powf(k) as u64, rho)
        }
        CoverTarget::Segment { a, b } => {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let len = euclid(&d);
            if len / 2.0 <= rho {
                return (1, (len / 2.0).max(f64::MIN_POSITIVE));
            }
            ((len / (2.0 * rho)).ceil() as u64, rho)
        }
        CoverTarget::Slab {
            plane,
            half_width,
            container,
        } => {
            let k = plane.k as f64;
            let l = plane.l as i32;
            let m = plane.m() as i32;
            let d = plane
                .distance(&container.center, crate::geometry::Norm::Euclidean)
                .unwrap_or(f64::INFINITY);
            // radius of the section plus the tube thickness
            let reach = container.radius + half_width;
            if d >= reach {
                return (0, rho);
            }
            let a = (reach * reach - d * d).sqrt();
            let w = half_width.min(container.radius);
            let side = 2.0 * rho / k.sqrt();
            let cubes = (2.0 * a / side).ceil().powi(l) * (2.0 * w / side).ceil().max(1.0).powi(m);
            let thin = if w < rho {
                if l == 0 {
                    1.0
                } else {
                    let s = 2.0 * (rho * rho - w * w).sqrt() / (l as f64).sqrt();
                    (2.0 * a / s).ceil().powi(l)
                }
            } else {
                f64::INFINITY
            };
            (cubes.min(thin) as u64, rho)
        }
    }
}

/// `sum f(r_i)` over explicit `rho`-covers of each target.
pub fn hausdorff_f_upper(targets: &[CoverTarget], f: &DimensionFunction, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain {
            what: "rho",
            value: rho,
            domain: "rho > 0".into(),
        });
    }
    let mut total = 0.0;
    for t in targets {
        let (count, r) = cover_count(t, rho);
        total += count as f64 * f.eval(r)?;
    }
    Ok(total)
}

/// Closed-form or tree-backed measure of closed balls.
pub trait MeasureOracle {
    fn measure(&self, ball: &Ball) -> f64;
    fn total(&self) -> f64;
}

/// Lebesgue measure restricted to `[0, 1]`.
pub struct UniformInterval;

impl MeasureOracle for UniformInterval {
    fn measure(&self, b: &Ball) -> f64 {
        let lo = (b.center[0] - b.radius).max(0.0);
        let hi = (b.center[0] + b.radius).min(1.0);
        (hi - lo).max(0.0)
    }

    fn total(&self) -> f64 {
        1.0
    }
}

pub struct PointMass(pub Vec<f64>);

impl MeasureOracle for PointMass {
    fn measure(&self, b: &Ball) -> f64 {
        if euclid(
            &b.center
                .iter()
                .zip(&self.0)
                .map(|(a, c)| a - c)
                .collect::<Vec<_>>(),
        ) <= b.radius
        {
            1.0
        } else {
            0.0
        }
    }

    fn total(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    pub c: f64,
    pub passes: bool,
    pub lower_bound: f64,
}

/// Check `mu(B) <= c f(r(B))` on the sample balls with `r <= r0`.
pub fn verify_mdp_bound(
    mu: &dyn MeasureOracle,
    f: &DimensionFunction,
    c: f64,
    r0: f64,
    samples: &[Ball],
) -> Result<MdpReport> {
    let mut max_ratio: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for b in samples {
        if b.radius > r0 {
            skipped += 1;
            continue;
        }
        checked += 1;
        let v = f.eval(b.radius)?;
        let mass = mu.measure(b);
        let ratio = if mass == 0.0 { 0.0 } else { mass / v };
        max_ratio = max_ratio.max(ratio);
    }
    Ok(MdpReport {
        checked,
        skipped,
        max_ratio,
        c,
        passes: max_ratio <= c * (1.0 + 1e-12),
        lower_bound: mu.total() / c,
    })
}
