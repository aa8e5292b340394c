//! Integer pairs `(p, q)`, primitivity, the scene constant `M` and witness
//! search for `|q x + p Phi - y| < psi(|q|)`.
//!
//! `|q|` is the sup norm. A point `x` of `R^{nm}` is an `n x m` matrix stored
//! column-major, so `(q x)_l = q . x[l*n .. (l+1)*n]`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dimfun::{ApproxFunction, MultiApproxFunction, TransferPair};
use crate::geometry::{identity, Norm, ResonantPlane};
use crate::{Error, Result};

/// Disjoint blocks of `{1, ..., d}`, each of size at least two. Indices
/// `1..=n` address `q`, `n+1..=n+m` address `p`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    pub d: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(d: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; d + 1];
        for b in &blocks {
            if b.len() < 2 {
                return Err(Error::Invalid(format!("partition block {b:?} has fewer than 2 elements")));
            }
            for &i in b {
                if i == 0 || i > d {
                    return Err(Error::Invalid(format!("partition index {i} outside 1..={d}")));
                }
                if seen[i] {
                    return Err(Error::Invalid(format!("partition index {i} repeated")));
                }
                seen[i] = true;
            }
        }
        Ok(Partition { d, blocks })
    }

    /// The single block `{1, ..., d}`.
    pub fn whole(d: usize) -> Result<Self> {
        Self::new(d, vec![(1..=d).collect()])
    }

    /// Every block has at least `m + 1` elements.
    pub fn strong_enough(&self, m: usize) -> bool {
        self.blocks.iter().all(|b| b.len() > m)
    }

    pub fn accepts(&self, v: &[i64]) -> bool {
        v.len() == self.d
            && self
                .blocks
                .iter()
                .all(|b| b.iter().fold(0u64, |g, &i| gcd(g, v[i - 1].unsigned_abs())) == 1)
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Blockwise gcd equals 1; an all-zero block is not primitive.
pub fn is_primitive(v: &[i64], pi: &Partition) -> Result<bool> {
    if v.len() != pi.d {
        return Err(Error::DimensionMismatch {
            expected: pi.d,
            got: v.len(),
        });
    }
    Ok(pi.accepts(v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Psi {
    Single(ApproxFunction),
    Multi(MultiApproxFunction),
}

impl Psi {
    pub fn base(&self) -> &ApproxFunction {
        match self {
            Psi::Single(a) => a,
            Psi::Multi(m) => &m.base,
        }
    }

    /// Value at `(p, q)`.
    pub fn value(&self, p: &[i64], q: &[i64]) -> f64 {
        match self {
            Psi::Single(a) => a.eval(sup_norm(q)),
            Psi::Multi(mm) => mm.eval(p, q),
        }
    }

    /// Upper bound for `sup_p` of the value at `q`.
    pub fn bound(&self, q: &[i64]) -> f64 {
        match self {
            Psi::Single(a) => a.eval(sup_norm(q)),
            Psi::Multi(mm) => {
                let top = mm
                    .overrides
                    .iter()
                    .filter(|(key, _)| key.1 == q)
                    .map(|(_, v)| *v)
                    .fold(0.0, f64::max);
                mm.base.eval(sup_norm(q)).max(top)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub n: usize,
    pub m: usize,
    pub psi: Psi,
    pub y: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub partition: Option<Partition>,
    pub norm: Norm,
}

impl SceneConfig {
    /// Homogeneous, `Phi = I`, block norm, no partition.
    pub fn homogeneous(n: usize, m: usize, psi: ApproxFunction) -> Self {
        SceneConfig {
            n,
            m,
            psi: Psi::Single(psi),
            y: vec![0.0; m],
            phi: identity(m),
            partition: None,
            norm: Norm::Block { n, m },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Invalid("n and m must be positive".into()));
        }
        if self.y.len() != self.m {
            return Err(Error::Invalid(format!("y must have {} entries", self.m)));
        }
        if self.phi.len() != self.m || self.phi.iter().any(|r| r.len() != self.m) {
            return Err(Error::Invalid(format!("Phi must be {} x {}", self.m, self.m)));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.y.iter().all(|v| unit(*v)) || !self.phi.iter().flatten().all(|v| unit(*v)) {
            return Err(Error::Invalid("y and Phi entries must lie in [0, 1]".into()));
        }
        if let Some(p) = &self.partition {
            if p.d != self.n + self.m {
                return Err(Error::Invalid(format!(
                    "partition covers {} indices, expected n + m = {}",
                    p.d,
                    self.n + self.m
                )));
            }
        }
        self.norm.check_dim(self.n * self.m)
    }

    pub fn k(&self) -> usize {
        self.n * self.m
    }

    pub fn phi_is_identity(&self) -> bool {
        self.phi == identity(self.m)
    }

    fn accepts(&self, p: &[i64], q: &[i64]) -> bool {
        match &self.partition {
            None => true,
            Some(part) => {
                let v: Vec<i64> = q.iter().chain(p).copied().collect();
                part.accepts(&v)
            }
        }
    }

    /// `|p Phi|_inf`.
    pub fn p_phi_sup(&self, p: &[i64]) -> f64 {
        (0..self.m)
            .map(|l| {
                (0..self.m)
                    .map(|i| p[i] as f64 * self.phi[i][l])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn plane(&self, p: &[i64], q: &[i64]) -> Result<ResonantPlane> {
        ResonantPlane::new(p.to_vec(), q.to_vec(), self.y.clone(), self.phi.clone())
    }

    /// Column sums `sum_l |Phi^-1_{l i}|` when `Phi` is invertible.
    fn inverse_column_sums(&self) -> Option<Vec<f64>> {
        let inv = invert(&self.phi)?;
        Some(
            (0..self.m)
                .map(|i| (0..self.m).map(|l| inv[l][i].abs()).sum())
                .collect(),
        )
    }
}

pub fn sup_norm(q: &[i64]) -> u64 {
    q.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut w: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..m {
        let piv = (c..m).max_by(|&x, &y| w[x][c].abs().partial_cmp(&w[y][c].abs()).unwrap())?;
        if w[piv][c].abs() < 1e-12 {
            return None;
        }
        w.swap(c, piv);
        let d = w[c][c];
        w[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..m {
            if r != c {
                let f = w[r][c];
                if f != 0.0 {
                    let pivot_row = w[c].clone();
                    for (x, y) in w[r].iter_mut().zip(pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
    }
    Some(w.into_iter().map(|r| r[m..].to_vec()).collect())
}

const M_SCAN_LIMIT: u64 = 10_000_000;

/// `M = max{2n, sup_r (2/sqrt n) g(psi(r)/r)^(1/m)}` with `psi` clamped to 1.
pub fn compute_m(psi: &ApproxFunction, pair: &TransferPair, n: usize) -> Result<f64> {
    let s = sup_transfer_ratio(psi, pair)?;
    Ok((2.0 * n as f64).max(2.0 / (n as f64).sqrt() * s))
}

/// Variant for `Psi(p, q)`: `max{3n, sup 3 Theta(p,q) / (sqrt n |q|)}`.
/// The mask is ignored, which can only enlarge the bound.
pub fn compute_m_multi(psi: &MultiApproxFunction, pair: &TransferPair, n: usize) -> Result<f64> {
    let mut s = sup_transfer_ratio(&psi.base, pair)?;
    for ((_, q), v) in &psi.overrides {
        let r = sup_norm(q) as f64;
        if r > 0.0 {
            s = s.max(pair.g_root(v.min(1.0) / r));
        }
    }
    Ok((3.0 * n as f64).max(3.0 / (n as f64).sqrt() * s))
}

/// `sup_r g(min(psi(r), 1) / r)^(1/m)`.
fn sup_transfer_ratio(psi: &ApproxFunction, pair: &TransferPair) -> Result<f64> {
    let term = |r: u64| pair.g_root(psi.eval(r).min(1.0) / r as f64);
    if psi.is_zero() {
        return Ok(0.0);
    }
    match psi {
        ApproxFunction::Zero => Ok(0.0),
        ApproxFunction::PowerLaw { tau, .. } if *tau >= -1.0 => Ok(term(1)),
        ApproxFunction::Table(t) => Ok(t.keys().map(|&q| term(q)).fold(0.0, f64::max)),
        _ => {
            // psi <= 1 bounds the tail by g(1/r)^(1/m), which decreases in r
            let mut best: f64 = 0.0;
            let mut r = 1u64;
            loop {
                best = best.max(term(r));
                if pair.g_root(1.0 / r as f64) <= best {
                    return Ok(best);
                }
                r += 1;
                if r > M_SCAN_LIMIT {
                    return Err(Error::UnboundedSup(format!(
                        "no tail bound below {best} by r = {M_SCAN_LIMIT}"
                    )));
                }
            }
        }
    }
}

/// All `q` with `|q|_inf = s`, lexicographic.
pub fn shell(n: usize, s: u64) -> Vec<Vec<i64>> {
    let s = s as i64;
    let mut out = Vec::new();
    let mut v = vec![-s; n];
    loop {
        if v.iter().any(|x| x.abs() == s) {
            out.push(v.clone());
        }
        let mut d = n;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            v[d] += 1;
            if v[d] <= s {
                break;
            }
            v[d] = -s;
        }
    }
}

/// Lazy stream of `(p, q)` ordered by `|q|`, then `q`, then `p`.
pub struct PairIter<'a> {
    cfg: &'a SceneConfig,
    q_max: u64,
    big_m: f64,
    next_shell: u64,
    col_sums: Option<Vec<f64>>,
    buffer: VecDeque<(Vec<i64>, Vec<i64>)>,
}

impl Iterator for PairIter<'_> {
    type Item = (Vec<i64>, Vec<i64>);

    fn next(&mut self) -> Option<Self::Item> {
        while self.buffer.is_empty() {
            if self.next_shell > self.q_max {
                return None;
            }
            let s = self.next_shell;
            self.next_shell += 1;
            let bound = self.big_m * s as f64;
            let cfg = self.cfg;
            let half: Vec<i64> = match &self.col_sums {
                Some(cs) => cs.iter().map(|c| (bound * c + 1e-9).floor() as i64).collect(),
                None => vec![(bound + 1e-9).floor() as i64; cfg.m],
            };
            for q in shell(cfg.n, s) {
                let mut p: Vec<i64> = half.iter().map(|h| -h).collect();
                loop {
                    if cfg.p_phi_sup(&p) <= bound && cfg.accepts(&p, &q) {
                        self.buffer.push_back((p.clone(), q.clone()));
                    }
                    let mut d = cfg.m;
                    let mut done = true;
                    while d > 0 {
                        d -= 1;
                        p[d] += 1;
                        if p[d] <= half[d] {
                            done = false;
                            break;
                        }
                        p[d] = -half[d];
                    }
                    if done {
                        break;
                    }
                }
            }
        }
        self.buffer.pop_front()
    }
}

/// Pairs with `1 <= |q| <= Q`, `|p Phi| <= M |q|` and the partition filter.
pub fn enumerate_pairs(cfg: &SceneConfig, q_max: u64, big_m: f64) -> Result<PairIter<'_>> {
    if q_max == 0 {
        return Err(Error::Domain {
            what: "Q",
            value: 0.0,
            domain: "Q >= 1".into(),
        });
    }
    if !(big_m.is_finite() && big_m > 0.0) {
        return Err(Error::Domain {
            what: "M",
            value: big_m,
            domain: "M > 0".into(),
        });
    }
    Ok(PairIter {
        cfg,
        q_max,
        big_m,
        next_shell: 1,
        col_sums: cfg.inverse_column_sums(),
        buffer: VecDeque::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
    pub error: f64,
}

/// Precomputed search data for witness queries against one config.
pub struct WitnessSearch<'a> {
    cfg: &'a SceneConfig,
    inv: Option<Vec<Vec<f64>>>,
    identity: bool,
}

impl<'a> WitnessSearch<'a> {
    pub fn new(cfg: &'a SceneConfig) -> Self {
        WitnessSearch {
            cfg,
            inv: invert(&cfg.phi),
            identity: cfg.phi_is_identity(),
        }
    }

    /// `u = q x - y`.
    fn offsets(&self, x: &[f64], q: &[i64]) -> Vec<f64> {
        let n = self.cfg.n;
        (0..self.cfg.m)
            .map(|l| {
                x[l * n..(l + 1) * n]
                    .iter()
                    .zip(q)
                    .map(|(a, b)| a * *b as f64)
                    .sum::<f64>()
                    - self.cfg.y[l]
            })
            .collect()
    }

    fn error(&self, u: &[f64], p: &[i64]) -> f64 {
        let m = self.cfg.m;
        (0..m)
            .map(|l| {
                let pphi: f64 = (0..m).map(|i| p[i] as f64 * self.cfg.phi[i][l]).sum();
                (u[l] + pphi).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Integer box containing every `p` with `|u + p Phi|_inf < width`.
    fn p_box(&self, u: &[f64], q: &[i64], width: f64) -> Vec<(i64, i64)> {
        let m = self.cfg.m;
        if self.identity {
            return u
                .iter()
                .map(|ul| ((-ul - width).floor() as i64, (-ul + width).ceil() as i64))
                .collect();
        }
        match &self.inv {
            Some(inv) => (0..m)
                .map(|i| {
                    let c: f64 = (0..m).map(|l| -u[l] * inv[l][i]).sum();
                    let r: f64 = width * (0..m).map(|l| inv[l][i].abs()).sum::<f64>();
                    ((c - r).floor() as i64, (c + r).ceil() as i64)
                })
                .collect(),
            None => {
                let w = (width + (self.cfg.n as u64 * sup_norm(q)) as f64 + 1.0).ceil() as i64;
                vec![(-w, w); m]
            }
        }
    }

    /// All `p` satisfying the strict inequality for this `q`.
    pub fn witnesses_for(&self, x: &[f64], q: &[i64]) -> Vec<Witness> {
        let bound = self.cfg.psi.bound(q);
        if !(bound > 0.0) {
            return Vec::new();
        }
        let u = self.offsets(x, q);
        let bx = self.p_box(&u, q, bound);
        let mut out = Vec::new();
        let mut p: Vec<i64> = bx.iter().map(|b| b.0).collect();
        loop {
            let err = self.error(&u, &p);
            if err < bound && self.cfg.accepts(&p, q) && err < self.cfg.psi.value(&p, q) {
                out.push(Witness {
                    p: p.clone(),
                    q: q.to_vec(),
                    error: err,
                });
            }
            let mut d = p.len();
            let mut done = true;
            while d > 0 {
                d -= 1;
                p[d] += 1;
                if p[d] <= bx[d].1 {
                    done = false;
                    break;
                }
                p[d] = bx[d].0;
            }
            if done {
                return out;
            }
        }
    }

    /// Whether some `p` works for this `q`.
    pub fn has_witness(&self, x: &[f64], q: &[i64]) -> bool {
        if self.identity && self.cfg.partition.is_none() {
            if let Psi::Single(a) = &self.cfg.psi {
                let w = a.eval(sup_norm(q));
                if !(w > 0.0) {
                    return false;
                }
                let n = self.cfg.n;
                return (0..self.cfg.m).all(|l| {
                    let v: f64 = x[l * n..(l + 1) * n]
                        .iter()
                        .zip(q)
                        .map(|(a, b)| a * *b as f64)
                        .sum::<f64>()
                        - self.cfg.y[l];
                    (v - v.round()).abs() < w
                });
            }
        }
        !self.witnesses_for(x, q).is_empty()
    }
}

/// Every `(p, q)` with `1 <= |q| <= Q` and `|q x + p Phi - y| < psi`.
pub fn approx_witnesses(x: &[f64], cfg: &SceneConfig, q_max: u64) -> Result<Vec<Witness>> {
    cfg.validate()?;
    if x.len() != cfg.k() {
        return Err(Error::DimensionMismatch {
            expected: cfg.k(),
            got: x.len(),
        });
    }
    if !x.iter().all(|v| (0.0..=1.0).contains(v)) {
        return Err(Error::Invalid("x must lie in the unit cube".into()));
    }
    let search = WitnessSearch::new(cfg);
    let mut out = Vec::new();
    for s in 1..=q_max {
        for q in shell(cfg.n, s) {
            out.extend(search.witnesses_for(x, &q));
        }
    }
    Ok(out)
}
