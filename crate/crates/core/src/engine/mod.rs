//! Executable Cantor construction for limsup sets of plane neighbourhoods.
//!
//! A scene is an ordered list of planes `R_j` with radii `Y_j`. From it the
//! engine builds covering collections `K_{G,B}` of balls `A = B(x, g(Y_j)^(1/m))`
//! centred on `R_j`, packs each `A` with balls of radius `Y_j` along `R_j`,
//! nests these into levels `K(1) ⊃ K(2) ⊃ ...` and spreads a probability
//! measure over them. Every structural property is checked as it is built;
//! a failure names the property.

mod cantor;
mod kgb;
mod measure;

pub use cantor::{build_cantor, CantorNode, CantorTree, EngineConfig, SubLevel, TREE_FORMAT_VERSION};
pub use kgb::{
    build_kgb, build_packing, calibrate_packing, check_full_measure, Calibration, Coverage, IndexedBall,
    Packing,
};
pub use measure::{
    mu_of_set, separation_check, verify_cantor_measure_bound, CantorVerifyReport, NodeRatio,
    SampleRatio, TreeMeasure,
};

use serde::{Deserialize, Serialize};

use crate::dimfun::{DimensionFunction, MultiApproxFunction, TransferPair};
use crate::diophantine::{compute_m, compute_m_multi, enumerate_pairs, Psi, SceneConfig};
use crate::geometry::{AffinePlane, Ball, Norm};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenePlane {
    pub plane: AffinePlane,
    pub upsilon: f64,
    /// Planes of one generation share a scale and are stored contiguously.
    pub generation: u64,
}

/// Sorted keys for one generation of mutually parallel planes.
#[derive(Clone, Debug)]
struct GenIndex {
    start: usize,
    end: usize,
    /// `(u . base, j)` sorted, with `u` the shared unit normal (or `e_1` for points).
    keyed: Option<(Vec<f64>, Vec<(f64, usize)>)>,
}

#[derive(Clone, Debug)]
pub struct MtpScene {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub norm: Norm,
    pub omega: Ball,
    pub planes: Vec<ScenePlane>,
    envelope: Vec<f64>,
    gens: Vec<GenIndex>,
}

impl MtpScene {
    pub fn new(k: usize, l: usize, norm: Norm, omega: Ball, planes: Vec<ScenePlane>) -> Result<Self> {
        if l >= k {
            return Err(Error::Invalid(format!("need l < k, got l = {l}, k = {k}")));
        }
        norm.check_dim(k)?;
        if omega.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: omega.dim(),
            });
        }
        for (j, sp) in planes.iter().enumerate() {
            if sp.plane.k != k || sp.plane.l != l {
                return Err(Error::Invalid(format!(
                    "plane {j} has shape ({}, {}), expected ({k}, {l})",
                    sp.plane.k, sp.plane.l
                )));
            }
            if !(sp.upsilon.is_finite() && sp.upsilon > 0.0) {
                return Err(Error::Invalid(format!("plane {j} has radius {}", sp.upsilon)));
            }
            if let Norm::Block { .. } = norm {
                if sp.plane.resonant.is_none() {
                    return Err(Error::Invalid(
                        "the block norm needs resonant planes".into(),
                    ));
                }
            }
            if j > 0 && sp.generation < planes[j - 1].generation {
                return Err(Error::Invalid("generations must be non-decreasing".into()));
            }
        }
        let mut envelope = vec![0.0; planes.len()];
        let mut run: f64 = 0.0;
        for j in (0..planes.len()).rev() {
            run = run.max(planes[j].upsilon);
            envelope[j] = run;
        }
        let mut gens = Vec::new();
        let mut start = 0;
        while start < planes.len() {
            let g = planes[start].generation;
            let mut end = start;
            while end < planes.len() && planes[end].generation == g {
                end += 1;
            }
            gens.push(GenIndex {
                start,
                end,
                keyed: parallel_keys(&planes[start..end], start, k, l),
            });
            start = end;
        }
        Ok(MtpScene {
            k,
            l,
            m: k - l,
            norm,
            omega,
            planes,
            envelope,
            gens,
        })
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    /// `max_{j' >= j} Y_j'`.
    pub fn envelope(&self, j: usize) -> f64 {
        self.envelope.get(j).copied().unwrap_or(0.0)
    }

    /// Indices `j >= from` whose plane meets the closed ball `b`, visiting at
    /// most `max_gens` generations; returns the groups per generation.
    pub fn planes_meeting(&self, b: &Ball, from: usize, max_gens: usize) -> Vec<Vec<usize>> {
        let reach = b.radius * self.norm.euclid_factor();
        let mut out = Vec::new();
        for g in self.gens.iter().filter(|g| g.end > from).take(max_gens) {
            let lo = g.start.max(from);
            let mut hits = Vec::new();
            match &g.keyed {
                Some((u, keys)) => {
                    let c: f64 = u.iter().zip(&b.center).map(|(a, x)| a * x).sum();
                    let first = keys.partition_point(|(key, _)| *key < c - reach);
                    for &(key, j) in &keys[first..] {
                        if key > c + reach {
                            break;
                        }
                        if j >= lo && self.meets(j, b) {
                            hits.push(j);
                        }
                    }
                    hits.sort_unstable();
                }
                None => {
                    for j in lo..g.end {
                        if self.meets(j, b) {
                            hits.push(j);
                        }
                    }
                }
            }
            out.push(hits);
        }
        out
    }

    fn meets(&self, j: usize, b: &Ball) -> bool {
        let p = &self.planes[j].plane;
        match p.distance(&b.center, self.norm) {
            Ok(d) => d <= b.radius,
            Err(_) => false,
        }
    }

    /// Points `lo + i * span / 2^t` on the line, for `t` in `levels`, with
    /// radius `upsilon(t)`; generation `t`.
    pub fn dyadic_points(
        lo: f64,
        hi: f64,
        levels: impl IntoIterator<Item = u32>,
        upsilon: impl Fn(u32) -> f64,
        omega: Ball,
    ) -> Result<Self> {
        let mut planes = Vec::new();
        for t in levels {
            let count = 1u64 << t;
            let step = (hi - lo) / count as f64;
            for i in 0..=count {
                planes.push(ScenePlane {
                    plane: AffinePlane::point(vec![lo + i as f64 * step])?,
                    upsilon: upsilon(t),
                    generation: t as u64,
                });
            }
        }
        MtpScene::new(1, 0, Norm::Euclidean, omega, planes)
    }

    /// Vertical lines `x_1 = lo + (i + 1/2) span / 2^t` in the plane.
    pub fn vertical_lines(
        lo: f64,
        hi: f64,
        levels: impl IntoIterator<Item = u32>,
        upsilon: impl Fn(u32) -> f64,
        omega: Ball,
    ) -> Result<Self> {
        let mut planes = Vec::new();
        for t in levels {
            let count = 1u64 << t;
            let step = (hi - lo) / count as f64;
            for i in 0..count {
                planes.push(ScenePlane {
                    plane: AffinePlane::from_equations(&[vec![1.0, 0.0]], &[lo + (i as f64 + 0.5) * step])?,
                    upsilon: upsilon(t),
                    generation: t as u64,
                });
            }
        }
        MtpScene::new(2, 1, Norm::Euclidean, omega, planes)
    }

    /// Resonant planes `R_{p,q}` with `Y = Psi(p,q)/|q|`, generation `|q|`,
    /// restricted to the set `|p Phi| <= M |q|`. Pairs with `Psi = 0` are dropped.
    pub fn from_diophantine(
        cfg: &SceneConfig,
        pair: &TransferPair,
        q_max: u64,
        omega: Ball,
    ) -> Result<Self> {
        cfg.validate()?;
        let big_m = match &cfg.psi {
            Psi::Single(a) => compute_m(&a.clone().clamped(1.0), pair, cfg.n)?,
            Psi::Multi(mm) => {
                let clamped = MultiApproxFunction {
                    base: mm.base.clone().clamped(1.0),
                    ..mm.clone()
                };
                compute_m_multi(&clamped, pair, cfg.n)?
            }
        };
        let mut planes = Vec::new();
        for (p, q) in enumerate_pairs(cfg, q_max, big_m)? {
            let v = cfg.psi.value(&p, &q).min(1.0);
            if !(v > 0.0) {
                continue;
            }
            let qn = crate::diophantine::sup_norm(&q);
            planes.push(ScenePlane {
                plane: cfg.plane(&p, &q)?.to_affine(),
                upsilon: v / qn as f64,
                generation: qn,
            });
        }
        MtpScene::new(cfg.k(), cfg.k() - cfg.m, cfg.norm, omega, planes)
    }
}

fn parallel_keys(
    planes: &[ScenePlane],
    start: usize,
    k: usize,
    l: usize,
) -> Option<(Vec<f64>, Vec<(f64, usize)>)> {
    let first = planes.first()?;
    let u: Vec<f64> = if l == 0 {
        let mut e = vec![0.0; k];
        e[0] = 1.0;
        e
    } else if first.plane.m() == 1 {
        first.plane.normals[0].clone()
    } else {
        return None;
    };
    if l > 0 {
        let same = planes.iter().all(|p| {
            p.plane.normals[0]
                .iter()
                .zip(&u)
                .all(|(a, b)| (a - b).abs() < 1e-12)
        });
        if !same {
            return None;
        }
    }
    let mut keys: Vec<(f64, usize)> = planes
        .iter()
        .enumerate()
        .map(|(i, p)| (u.iter().zip(&p.plane.base).map(|(a, b)| a * b).sum(), start + i))
        .collect();
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some((u, keys))
}

/// Comparability, packing and selection constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConstants {
    pub k: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub d1: f64,
    pub d2: f64,
    pub eta: f64,
    /// Lebesgue volume of the unit ball in the scene norm.
    pub unit_volume: f64,
}

impl EngineConstants {
    /// `c1 = min(1/2, vol)`, `c2 = max(2, vol)`, `c3 = (c1/c2)^2 / (2^{k+3} 5^k 15^k)`.
    pub fn new(k: usize, norm: Norm, eta: f64, d1: f64, d2: f64) -> Result<Self> {
        if !(eta > 1.0) {
            return Err(Error::Invalid(format!("eta must exceed 1, got {eta}")));
        }
        if !(d1 > 0.0 && d1 <= d2) {
            return Err(Error::Invalid(format!("need 0 < d1 <= d2, got {d1}, {d2}")));
        }
        let vol = norm.unit_ball_volume(k);
        let c1 = vol.min(0.5);
        let c2 = vol.max(2.0);
        let kk = k as i32;
        let c3 = (c1 / c2).powi(2) / (2f64.powi(kk + 3) * 5f64.powi(kk) * 15f64.powi(kk));
        Ok(EngineConstants {
            k,
            c1,
            c2,
            c3,
            d1,
            d2,
            eta,
            unit_volume: vol,
        })
    }

    /// `H^k(B) = vol * r^k`.
    pub fn hk(&self, r: f64) -> f64 {
        self.unit_volume * r.powi(self.k as i32)
    }

    /// `V^k(B) = r^k`.
    pub fn vk(&self, r: f64) -> f64 {
        r.powi(self.k as i32)
    }

    fn eps_common(&self) -> f64 {
        let kk = self.k as i32;
        (1.0 / (2.0 * self.d2)) * (self.c1 / self.c2).powi(2) * self.c3
            / (2f64.powi(kk) * 4f64.powi(kk))
    }

    /// `eps(B0)`.
    pub fn eps_b0(&self, f: &DimensionFunction, r0: f64) -> f64 {
        self.eps_common() * f.eval_saturating(r0) / self.eta
    }

    /// `eps(B)` for `B` below the root.
    pub fn eps_b(&self) -> f64 {
        self.eps_common()
    }

    /// Sub-level count for the root: `[c2 eta / (c3 H^k(B0))] + 1`.
    pub fn root_sublevels(&self, r0: f64) -> f64 {
        (self.c2 * self.eta / (self.c3 * self.hk(r0))).floor() + 1.0
    }

    /// Sub-level count below the root: `[f(r) / (c3 r^k)] + 1`.
    pub fn sublevels(&self, f: &DimensionFunction, r: f64) -> f64 {
        (f.eval_saturating(r) / (self.c3 * self.vk(r))).floor() + 1.0
    }
}

/// `Y` with `g(Y)^(1/m) = target`, if `target` lies in the range of `g^(1/m)`.
pub fn matched_upsilon(pair: &TransferPair, target: f64) -> Option<f64> {
    pair.g.inverse(target.powi(pair.m as i32))
}

/// Synthetic scene families centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Points `-r + i 2r / 2^t` on the line.
    DyadicPoints,
    /// Lines `x_1 = -r + (i + 1/2) 2r / 2^t` in the plane.
    VerticalLines,
}

/// A synthetic scene on `[-r, r]` whose radii satisfy
/// `g(Y_t)^(1/m) = fraction * spacing_t`; the ambient ball is `B(0, 2r)`.
pub fn matched_scene(
    kind: SyntheticKind,
    r: f64,
    levels: &[u32],
    pair: &TransferPair,
    fraction: f64,
) -> Result<MtpScene> {
    if !(r > 0.0 && fraction > 0.0) {
        return Err(Error::Invalid(format!(
            "need positive radius and fraction, got {r}, {fraction}"
        )));
    }
    let mut ups = Vec::with_capacity(levels.len());
    for &t in levels {
        let spacing = 2.0 * r / 2f64.powi(t as i32);
        let u = matched_upsilon(pair, fraction * spacing).ok_or_else(|| {
            Error::Invalid(format!("level {t}: radius {} is outside the range of g", fraction * spacing))
        })?;
        ups.push((t, u));
    }
    let lookup = |t: u32| ups.iter().find(|(s, _)| *s == t).map(|p| p.1).unwrap();
    match kind {
        SyntheticKind::DyadicPoints => {
            let omega = Ball::new(vec![0.0], 2.0 * r)?;
            MtpScene::dyadic_points(-r, r, levels.iter().copied(), lookup, omega)
        }
        SyntheticKind::VerticalLines => {
            let omega = Ball::new(vec![0.0, 0.0], 2.0 * r)?;
            MtpScene::vertical_lines(-r, r, levels.iter().copied(), lookup, omega)
        }
    }
}
