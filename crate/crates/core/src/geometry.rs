//! Balls, affine planes, the block norm and covering/packing primitives.
//!
//! Points of `R^{nm}` are stored column-major: block `l` (the `l`-th column
//! of an `n x m` matrix) occupies `x[l*n .. (l+1)*n]`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dimfun::DimensionFunction;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    /// `sqrt(n) max_l |x_l|_2` over the `m` column blocks of `R^{nm}`.
    Block { n: usize, m: usize },
}

impl Norm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Norm::Euclidean => euclid(x),
            Norm::Block { n, .. } => {
                let top = x.chunks(n).map(euclid).fold(0.0, f64::max);
                (n as f64).sqrt() * top
            }
        }
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Norm::Euclidean => {
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                s.sqrt()
            }
            Norm::Block { n, .. } => {
                let mut top: f64 = 0.0;
                for (ca, cb) in a.chunks(n).zip(b.chunks(n)) {
                    let s: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum();
                    top = top.max(s);
                }
                (n as f64 * top).sqrt()
            }
        }
    }

    /// Lebesgue volume of the unit ball in `R^k`.
    pub fn unit_ball_volume(&self, k: usize) -> f64 {
        match *self {
            Norm::Euclidean => euclid_ball_volume(k),
            Norm::Block { n, m } => {
                let block = euclid_ball_volume(n) * (n as f64).powf(-(n as f64) / 2.0);
                block.powi(m as i32)
            }
        }
    }

    /// Constant `C` with `|v|_2 <= C ||v||`.
    pub fn euclid_factor(&self) -> f64 {
        match *self {
            Norm::Euclidean => 1.0,
            Norm::Block { n, m } => (m as f64 / n as f64).sqrt(),
        }
    }

    /// Constant `C` with `|v|_inf <= C ||v||`.
    pub fn sup_factor(&self) -> f64 {
        match *self {
            Norm::Euclidean => 1.0,
            Norm::Block { n, .. } => 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn check_dim(&self, k: usize) -> Result<()> {
        match *self {
            Norm::Block { n, m } if n * m != k => Err(Error::DimensionMismatch {
                expected: n * m,
                got: k,
            }),
            _ => Ok(()),
        }
    }
}

pub fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn euclid_ball_volume(k: usize) -> f64 {
    // V_k = pi^(k/2) / Gamma(k/2 + 1) via the recursion V_k = 2 pi V_{k-2} / k.
    let mut v = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        v *= 2.0 * std::f64::consts::PI / j as f64;
        j += 2;
    }
    v
}

/// `sqrt(n) max_l |x_l|_2`.
pub fn block_norm(x: &[f64], n: usize, m: usize) -> Result<f64> {
    if n == 0 || m == 0 || x.len() != n * m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            got: x.len(),
        });
    }
    Ok(Norm::Block { n, m }.eval(x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Invalid(format!("ball radius must be positive, got {radius}")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("ball center must be a finite point".into()));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `lambda B`: same center, radius scaled.
    pub fn scaled(&self, lambda: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * lambda,
        }
    }

    /// Closed-ball membership.
    pub fn contains(&self, x: &[f64], norm: Norm) -> bool {
        norm.dist(&self.center, x) <= self.radius
    }

    /// Closed balls meet.
    pub fn intersects(&self, other: &Ball, norm: Norm) -> bool {
        norm.dist(&self.center, &other.center) <= self.radius + other.radius
    }

    pub fn disjoint(&self, other: &Ball, norm: Norm) -> bool {
        !self.intersects(other, norm)
    }

    /// `other` is inside `self`.
    pub fn contains_ball(&self, other: &Ball, norm: Norm) -> bool {
        norm.dist(&self.center, &other.center) + other.radius <= self.radius
    }

    pub fn volume(&self, norm: Norm) -> f64 {
        norm.unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }
}

/// `B^f = B(x, f(r)^(1/k))`.
pub fn f_scaled_ball(b: &Ball, f: &DimensionFunction) -> Result<Ball> {
    let v = f.eval(b.radius)?;
    let k = b.dim() as f64;
    Ball::new(b.center.clone(), v.powf(1.0 / k))
}

/// Exact integer data of a resonant plane `q x + p Phi - y = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantPlane {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
    pub y: Vec<f64>,
    /// `m x m`, row `i` multiplies `p_i`.
    pub phi: Vec<Vec<f64>>,
}

impl ResonantPlane {
    pub fn new(p: Vec<i64>, q: Vec<i64>, y: Vec<f64>, phi: Vec<Vec<f64>>) -> Result<Self> {
        let m = p.len();
        if q.is_empty() || m == 0 {
            return Err(Error::Invalid("p and q must be non-empty".into()));
        }
        if q.iter().all(|v| *v == 0) {
            return Err(Error::Invalid("q must be non-zero".into()));
        }
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y.len(),
            });
        }
        if phi.len() != m || phi.iter().any(|r| r.len() != m) {
            return Err(Error::Invalid(format!("Phi must be {m} x {m}")));
        }
        Ok(ResonantPlane { p, q, y, phi })
    }

    /// Homogeneous plane with `Phi = I`, `y = 0`.
    pub fn homogeneous(p: Vec<i64>, q: Vec<i64>) -> Result<Self> {
        let m = p.len();
        Self::new(p, q, vec![0.0; m], identity(m))
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    /// `(p Phi - y)_l` for each column.
    pub fn shift(&self) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|l| {
                let pphi: f64 = (0..m).map(|i| self.p[i] as f64 * self.phi[i][l]).sum();
                pphi - self.y[l]
            })
            .collect()
    }

    pub fn q_norm(&self) -> f64 {
        self.q.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt()
    }

    /// Components of `q x + p Phi - y`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        self.shift()
            .iter()
            .enumerate()
            .map(|(l, s)| {
                let block = &x[l * n..(l + 1) * n];
                block
                    .iter()
                    .zip(&self.q)
                    .map(|(a, b)| a * *b as f64)
                    .sum::<f64>()
                    + s
            })
            .collect()
    }

    /// `sqrt(n) |q x + p Phi - y|_sup / |q|_2`.
    pub fn dist(&self, x: &[f64]) -> Result<f64> {
        let k = self.n() * self.m();
        if x.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: x.len(),
            });
        }
        let sup = self.residual(x).iter().fold(0.0_f64, |a, r| a.max(r.abs()));
        Ok((self.n() as f64).sqrt() * sup / self.q_norm())
    }

    pub fn to_affine(&self) -> AffinePlane {
        let n = self.n();
        let m = self.m();
        let k = n * m;
        let qn = self.q_norm();
        let shift = self.shift();
        let normals: Vec<Vec<f64>> = (0..m)
            .map(|l| {
                let mut row = vec![0.0; k];
                for i in 0..n {
                    row[l * n + i] = self.q[i] as f64 / qn;
                }
                row
            })
            .collect();
        let mut base = vec![0.0; k];
        for (l, row) in normals.iter().enumerate() {
            let beta = -shift[l] / qn;
            for (b, r) in base.iter_mut().zip(row) {
                *b += beta * r;
            }
        }
        let directions = complement(&normals, k);
        AffinePlane {
            k,
            l: k - m,
            base,
            normals,
            directions,
            resonant: Some(self.clone()),
        }
    }
}

pub fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Affine `l`-plane in `R^k` with orthonormal normal and direction bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    pub k: usize,
    pub l: usize,
    pub base: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub resonant: Option<ResonantPlane>,
}

impl AffinePlane {
    /// Solutions of `rows[i] . x = offsets[i]`.
    pub fn from_equations(rows: &[Vec<f64>], offsets: &[f64]) -> Result<Self> {
        let k = rows.first().map(|r| r.len()).unwrap_or(0);
        if k == 0 || rows.iter().any(|r| r.len() != k) || offsets.len() != rows.len() {
            return Err(Error::Invalid("equation rows must share one length".into()));
        }
        if rows.len() > k {
            return Err(Error::Invalid("more equations than coordinates".into()));
        }
        let mut normals: Vec<Vec<f64>> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for (row, off) in rows.iter().zip(offsets) {
            let mut u = row.clone();
            let mut b = *off;
            for (prev, pb) in normals.iter().zip(&betas) {
                let c = dot(&u, prev);
                for (x, y) in u.iter_mut().zip(prev) {
                    *x -= c * y;
                }
                b -= c * pb;
            }
            let nu = euclid(&u);
            let scale = euclid(row).max(1e-300);
            if nu <= 1e-12 * scale {
                return Err(Error::Invalid("equation rows are not independent".into()));
            }
            u.iter_mut().for_each(|x| *x /= nu);
            normals.push(u);
            betas.push(b / nu);
        }
        let mut base = vec![0.0; k];
        for (u, b) in normals.iter().zip(&betas) {
            for (x, y) in base.iter_mut().zip(u) {
                *x += b * y;
            }
        }
        let directions = complement(&normals, k);
        Ok(AffinePlane {
            k,
            l: k - normals.len(),
            base,
            normals,
            directions,
            resonant: None,
        })
    }

    /// Plane through `base` spanned by `dirs` (need not be orthonormal).
    pub fn from_point_and_directions(base: Vec<f64>, dirs: &[Vec<f64>]) -> Result<Self> {
        let k = base.len();
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for d in dirs {
            if d.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: d.len(),
                });
            }
            let mut u = d.clone();
            for prev in &directions {
                let c = dot(&u, prev);
                for (x, y) in u.iter_mut().zip(prev) {
                    *x -= c * y;
                }
            }
            let nu = euclid(&u);
            if nu <= 1e-12 * euclid(d).max(1e-300) {
                return Err(Error::Invalid("direction vectors are not independent".into()));
            }
            u.iter_mut().for_each(|x| *x /= nu);
            directions.push(u);
        }
        if directions.len() >= k {
            return Err(Error::Invalid("plane must have dimension < k".into()));
        }
        let normals = complement(&directions, k);
        Ok(AffinePlane {
            k,
            l: directions.len(),
            base,
            normals,
            directions,
            resonant: None,
        })
    }

    /// A single point, as a 0-dimensional plane.
    pub fn point(p: Vec<f64>) -> Result<Self> {
        Self::from_point_and_directions(p, &[])
    }

    pub fn m(&self) -> usize {
        self.k - self.l
    }

    /// Euclidean orthogonal projection onto the plane.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.base.clone();
        let diff: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        for d in &self.directions {
            let c = dot(&diff, d);
            for (o, v) in out.iter_mut().zip(d) {
                *o += c * v;
            }
        }
        out
    }

    pub fn point_at(&self, origin: &[f64], t: &[f64]) -> Vec<f64> {
        let mut out = origin.to_vec();
        for (d, ti) in self.directions.iter().zip(t) {
            for (o, v) in out.iter_mut().zip(d) {
                *o += ti * v;
            }
        }
        out
    }

    /// Distance from `x` to the plane in the given norm.
    pub fn distance(&self, x: &[f64], norm: Norm) -> Result<f64> {
        if x.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: x.len(),
            });
        }
        match norm {
            Norm::Euclidean => {
                let diff: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
                Ok(self
                    .normals
                    .iter()
                    .map(|u| dot(&diff, u).powi(2))
                    .sum::<f64>()
                    .sqrt())
            }
            Norm::Block { n, m } => match &self.resonant {
                Some(r) if r.n() == n && r.m() == m => r.dist(x),
                _ => Err(Error::Invalid(
                    "the block norm is only supported for resonant planes of matching shape".into(),
                )),
            },
        }
    }

    /// Max violation of the defining equations at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        self.normals
            .iter()
            .map(|u| dot(&diff, u).abs())
            .fold(0.0, f64::max)
    }

    /// Membership in `Delta(R, delta)` (strict).
    pub fn in_neighborhood(&self, x: &[f64], delta: f64, norm: Norm) -> Result<bool> {
        Ok(self.distance(x, norm)? < delta)
    }

    /// `Delta(R, w) = { x : |a_i . x + b_i| < w s_i for all i }` when the
    /// neighbourhood is an intersection of slabs.
    pub fn slab_form(&self, norm: Norm) -> Option<Vec<Slab>> {
        match (norm, &self.resonant) {
            (Norm::Block { n, m }, Some(r)) if r.n() == n && r.m() == m => {
                let qn = r.q_norm();
                let shift = r.shift();
                Some(
                    (0..m)
                        .map(|l| {
                            let mut a = vec![0.0; n * m];
                            for i in 0..n {
                                a[l * n + i] = r.q[i] as f64;
                            }
                            Slab {
                                a,
                                b: shift[l],
                                scale: qn / (n as f64).sqrt(),
                            }
                        })
                        .collect(),
                )
            }
            (Norm::Euclidean, _) if self.m() == 1 => {
                let u = &self.normals[0];
                Some(vec![Slab {
                    a: u.clone(),
                    b: -dot(u, &self.base),
                    scale: 1.0,
                }])
            }
            _ => None,
        }
    }
}

/// `{ x : |a . x + b| < w * scale }` for a width `w` supplied later.
#[derive(Clone, Debug, PartialEq)]
pub struct Slab {
    pub a: Vec<f64>,
    pub b: f64,
    pub scale: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the orthogonal complement of orthonormal `basis`.
fn complement(basis: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::new();
    for i in 0..k {
        if all.len() == k {
            break;
        }
        let mut u = vec![0.0; k];
        u[i] = 1.0;
        for _ in 0..2 {
            for prev in &all {
                let c = dot(&u, prev);
                for (x, y) in u.iter_mut().zip(prev) {
                    *x -= c * y;
                }
            }
        }
        let nu = euclid(&u);
        if nu > 1e-8 {
            u.iter_mut().for_each(|x| *x /= nu);
            all.push(u.clone());
            out.push(u);
        }
    }
    out
}

/// Uniform-grid bucket index over ball centers. Radius classes are
/// powers of two so a query only touches neighbouring cells.
struct BallIndex {
    norm: Norm,
    k: usize,
    cells: HashMap<(i32, Vec<i64>), Vec<usize>>,
    classes: Vec<i32>,
}

impl BallIndex {
    fn new(norm: Norm, k: usize) -> Self {
        BallIndex {
            norm,
            k,
            cells: HashMap::new(),
            classes: Vec::new(),
        }
    }

    fn class_of(r: f64) -> i32 {
        r.log2().floor() as i32
    }

    fn cell_size(class: i32) -> f64 {
        // covers r_query + r_stored with r_query <= r_stored < 2^(class+1)
        2f64.powi(class + 2)
    }

    fn key(&self, x: &[f64], size: f64) -> Vec<i64> {
        x.iter().take(self.k).map(|v| (v / size).floor() as i64).collect()
    }

    fn insert(&mut self, idx: usize, b: &Ball) {
        let c = Self::class_of(b.radius);
        if !self.classes.contains(&c) {
            self.classes.push(c);
        }
        let key = self.key(&b.center, Self::cell_size(c));
        self.cells.entry((c, key)).or_default().push(idx);
    }

    /// Any stored ball meeting `b`; stored balls must have radius >= `b`'s.
    fn any_meeting(&self, b: &Ball, stored: &[Ball]) -> bool {
        let reach = self.norm.sup_factor().max(1.0);
        for &c in &self.classes {
            let size = Self::cell_size(c);
            let span = ((b.radius + 2f64.powi(c + 1)) * reach / size).ceil() as i64;
            let base = self.key(&b.center, size);
            let mut offs = vec![-span; self.k];
            loop {
                let key: Vec<i64> = base.iter().zip(&offs).map(|(a, o)| a + o).collect();
                if let Some(list) = self.cells.get(&(c, key)) {
                    if list.iter().any(|&i| stored[i].intersects(b, self.norm)) {
                        return true;
                    }
                }
                let mut d = 0;
                loop {
                    if d == self.k {
                        break;
                    }
                    offs[d] += 1;
                    if offs[d] <= span {
                        break;
                    }
                    offs[d] = -span;
                    d += 1;
                }
                if d == self.k {
                    break;
                }
            }
        }
        false
    }
}

/// Greedy Vitali selection: sort by radius (desc, ties by index) and keep a
/// ball iff it is disjoint from everything kept so far. Returns input indices.
pub fn five_r_cover(balls: &[Ball], norm: Norm) -> Vec<usize> {
    if balls.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        balls[b]
            .radius
            .partial_cmp(&balls[a].radius)
            .unwrap()
            .then(a.cmp(&b))
    });
    let k = balls[0].dim();
    let mut index = BallIndex::new(norm, k);
    let mut kept_balls: Vec<Ball> = Vec::new();
    let mut kept = Vec::new();
    for i in order {
        if !index.any_meeting(&balls[i], &kept_balls) {
            index.insert(kept_balls.len(), &balls[i]);
            kept_balls.push(balls[i].clone());
            kept.push(i);
        }
    }
    kept
}

/// Parameter-space lattice of `plane ∩ container` at `step`, plus boundary
/// points for `l <= 2`, in lexicographic order of the parameters.
pub fn plane_candidates(
    plane: &AffinePlane,
    container: &Ball,
    step: f64,
    norm: Norm,
) -> Vec<Vec<f64>> {
    let origin = plane.project(&container.center);
    if plane.l == 0 {
        return if container.contains(&origin, norm) {
            vec![origin]
        } else {
            Vec::new()
        };
    }
    let reach = container.radius * norm.euclid_factor();
    let inside = |t: &[f64]| container.contains(&plane.point_at(&origin, t), norm);
    let mut params: Vec<Vec<f64>> = Vec::new();
    // boundary points along rays from the origin
    let mut rays: Vec<Vec<f64>> = Vec::new();
    if inside(&vec![0.0; plane.l]) {
        match plane.l {
            1 => rays.extend([vec![-1.0], vec![1.0]]),
            2 => {
                let count = ((2.0 * std::f64::consts::PI * reach / step).ceil() as usize).max(8);
                for i in 0..count {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                    rays.push(vec![a.cos(), a.sin()]);
                }
            }
            _ => {}
        }
    }
    for dir in &rays {
        let (mut lo, mut hi) = (0.0, reach * 1.000001 + 1e-300);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let t: Vec<f64> = dir.iter().map(|d| d * mid).collect();
            if inside(&t) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        params.push(dir.iter().map(|d| d * lo).collect());
    }
    let steps = (reach / step).floor() as i64;
    let mut idx = vec![-steps; plane.l];
    loop {
        let t: Vec<f64> = idx.iter().map(|i| *i as f64 * step).collect();
        if euclid(&t) <= reach * 1.000001 && inside(&t) {
            params.push(t);
        }
        let mut d = plane.l;
        loop {
            if d == 0 {
                break;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] <= steps {
                d = usize::MAX;
                break;
            }
            idx[d] = -steps;
        }
        if d != usize::MAX {
            break;
        }
    }
    params.sort_by(|a, b| a.partial_cmp(b).unwrap());
    params
        .into_iter()
        .map(|t| plane.point_at(&origin, &t))
        .collect()
}

/// Maximal `separation`-separated set of centers on `plane ∩ container`,
/// scanned on a lattice of step `separation / 4` and accepted greedily.
pub fn separated_pack(
    plane: &AffinePlane,
    container: &Ball,
    separation: f64,
    point_radius: f64,
    norm: Norm,
) -> Vec<Ball> {
    let cands = plane_candidates(plane, container, separation / 4.0, norm);
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let cell = separation * norm.sup_factor().max(1.0);
    for c in cands {
        let key: Vec<i64> = c.iter().map(|v| (v / cell).floor() as i64).collect();
        let mut ok = true;
        let mut offs = vec![-1i64; c.len()];
        'scan: loop {
            let kk: Vec<i64> = key.iter().zip(&offs).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&kk) {
                for &i in list {
                    if norm.dist(&centers[i], &c) <= separation {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            let mut d = 0;
            while d < offs.len() {
                offs[d] += 1;
                if offs[d] <= 1 {
                    break;
                }
                offs[d] = -1;
                d += 1;
            }
            if d == offs.len() {
                break;
            }
        }
        if ok {
            grid.entry(key).or_default().push(centers.len());
            centers.push(c);
        }
    }
    centers
        .into_iter()
        .map(|c| Ball {
            center: c,
            radius: point_radius,
        })
        .collect()
}
