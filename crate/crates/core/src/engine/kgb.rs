use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MtpScene;
use crate::dimfun::TransferPair;
use crate::estimator::block_rng;
use crate::geometry::{euclid, five_r_cover, separated_pack, AffinePlane, Ball, Norm, ResonantPlane};
use crate::raster::{passes_through, plane_ball_volume, Grid};
use crate::{Error, Result};

/// A ball together with the index of the plane it is centred on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedBall {
    pub ball: Ball,
    pub j: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Grid cells whose centre lies in `B`.
    pub cells: usize,
    /// `(G, fraction of B covered by neighbourhoods of generation >= G)`.
    pub per_g: Vec<(u64, f64)>,
}

/// Rasterized fraction of `b` covered by `U_{gen >= G} Delta(R_j, g(Y_j)^(1/m))`.
pub fn check_full_measure(
    scene: &MtpScene,
    b: &Ball,
    pair: &TransferPair,
    cells: usize,
    thresholds: &[u64],
) -> Result<Coverage> {
    if b.dim() != scene.k {
        return Err(Error::DimensionMismatch {
            expected: scene.k,
            got: b.dim(),
        });
    }
    if cells == 0 {
        return Err(Error::Invalid("grid needs at least one cell per axis".into()));
    }
    let grid = Grid::over_ball(b, scene.norm, cells);
    let inside = grid.ball_mask(b, scene.norm);
    let n_in = inside.iter().filter(|v| **v).count();
    // highest generation + 1 covering each cell (0 = uncovered)
    let mut best = vec![0u64; grid.len()];
    for sp in &scene.planes {
        let w = pair.g_root(sp.upsilon);
        let d0 = sp.plane.distance(&b.center, scene.norm)?;
        if d0 >= b.radius + w {
            continue;
        }
        let tag = sp.generation + 1;
        grid.for_each_near_plane(&sp.plane, w, scene.norm, |i| {
            if best[i] < tag {
                best[i] = tag;
            }
        });
    }
    let per_g = thresholds
        .iter()
        .map(|&g| {
            let hit = best
                .iter()
                .zip(&inside)
                .filter(|(t, ins)| **ins && **t > g)
                .count();
            let frac = if n_in == 0 { 0.0 } else { hit as f64 / n_in as f64 };
            (g, frac)
        })
        .collect();
    Ok(Coverage { cells: n_in, per_g })
}

/// Candidate budget for one call of [`build_kgb`].
pub(crate) const MAX_CANDIDATES: usize = 4_000_000;

/// A finite family `(A; j)`, `A = B(x, g(Y_j)^(1/m))` with `x` on `R_j` and
/// `j >= G`, whose triples are disjoint and inside `b` and whose union has
/// measure at least `H^k(b) / (4 * 15^k)`.
pub fn build_kgb(
    scene: &MtpScene,
    b: &Ball,
    g: usize,
    pair: &TransferPair,
    gen_window: usize,
) -> Result<Vec<IndexedBall>> {
    let k = scene.k;
    let norm = scene.norm;
    let target = b.volume(norm) / (4.0 * 15f64.powi(k as i32));
    let groups = scene.planes_meeting(b, g, gen_window.max(1));
    let mut cands: Vec<IndexedBall> = Vec::new();
    let mut achieved = 0.0;
    for group in groups {
        for j in group {
            let rt = pair.g_root(scene.planes[j].upsilon);
            let inner = (b.radius - 3.0 * rt) * (1.0 - 1e-12);
            if !(inner > 0.0) {
                continue;
            }
            let container = Ball {
                center: b.center.clone(),
                radius: inner,
            };
            for x in crate::geometry::plane_candidates(&scene.planes[j].plane, &container, rt, norm) {
                cands.push(IndexedBall {
                    ball: Ball {
                        center: x,
                        radius: 3.0 * rt,
                    },
                    j,
                });
            }
            if cands.len() > MAX_CANDIDATES {
                return Err(Error::Infeasible {
                    property: "covering".into(),
                    detail: format!("more than {MAX_CANDIDATES} candidate balls"),
                });
            }
        }
        let family: Vec<Ball> = cands.iter().map(|c| c.ball.clone()).collect();
        let mut kept = five_r_cover(&family, norm);
        kept.sort_by_key(|&i| (cands[i].j, i));
        let shrunk: Vec<IndexedBall> = kept
            .iter()
            .map(|&i| IndexedBall {
                ball: cands[i].ball.scaled(1.0 / 3.0),
                j: cands[i].j,
            })
            .collect();
        achieved = shrunk.iter().map(|a| a.ball.volume(norm)).sum::<f64>();
        if achieved >= target {
            // smallest prefix in index order that keeps the bound
            let mut acc = 0.0;
            let mut cut = shrunk.len();
            for (i, a) in shrunk.iter().enumerate() {
                acc += a.ball.volume(norm);
                if acc >= target {
                    cut = i + 1;
                    break;
                }
            }
            let out: Vec<IndexedBall> = shrunk.into_iter().take(cut).collect();
            check_kgb(&out, b, norm, target)?;
            return Ok(out);
        }
    }
    Err(Error::property(
        "covering (iii)",
        format!(
            "achieved measure {achieved:.6e} < required {target:.6e} within {gen_window} generations from index {g}"
        ),
    ))
}

fn check_kgb(out: &[IndexedBall], b: &Ball, norm: Norm, target: f64) -> Result<()> {
    let triples: Vec<Ball> = out.iter().map(|a| a.ball.scaled(3.0)).collect();
    if let Some(t) = triples.iter().position(|t| !b.contains_ball(t, norm)) {
        return Err(Error::property(
            "covering (i)",
            format!("3A #{t} is not contained in B"),
        ));
    }
    if five_r_cover(&triples, norm).len() != triples.len() {
        return Err(Error::property("covering (ii)", "two triples 3A intersect"));
    }
    let total: f64 = out.iter().map(|a| a.ball.volume(norm)).sum();
    if total < target {
        return Err(Error::property(
            "covering (iii)",
            format!("measure {total:.6e} < {target:.6e}"),
        ));
    }
    Ok(())
}

/// `C(A; j)`: balls of radius `Y_j` centred on `R_j ∩ A/2` with centres more
/// than `6 Y_j` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub balls: Vec<Ball>,
    /// `#C / (g(Y_j)^(1/m) / Y_j)^l`.
    pub ratio: f64,
    /// The plane misses `A/2`, so nothing could be placed.
    pub empty: bool,
    /// Measure of `Delta(R_j, Y_j) ∩ A/2`.
    pub inner_measure: f64,
    /// Measure of `Delta(R_j, Y_j) ∩ A`.
    pub outer_measure: f64,
}

pub fn build_packing(scene: &MtpScene, a: &IndexedBall, pair: &TransferPair) -> Result<Packing> {
    let sp = scene
        .planes
        .get(a.j)
        .ok_or_else(|| Error::Invalid(format!("plane index {} out of range", a.j)))?;
    let ups = sp.upsilon;
    let rt = a.ball.radius;
    let expected = pair.g_root(ups);
    if (rt - expected).abs() > 1e-9 * expected.max(rt) {
        return Err(Error::Invalid(format!(
            "A has radius {rt}, expected g(Y)^(1/m) = {expected}"
        )));
    }
    pack_along(&sp.plane, &a.ball, ups, scene.l, scene.m, scene.norm)
}

fn pack_along(
    plane: &AffinePlane,
    a: &Ball,
    ups: f64,
    l: usize,
    m: usize,
    norm: Norm,
) -> Result<Packing> {
    let rt = a.radius;
    if !(6.0 * ups < rt) {
        return Err(Error::gate(
            "radii comparison",
            format!("6 Y = {} is not below g(Y)^(1/m) = {rt}", 6.0 * ups),
        ));
    }
    let half = a.scaled(0.5);
    let balls = separated_pack(plane, &half, 6.0 * ups, ups, norm);
    let k = l + m;
    let through = passes_through(plane, &a.center, a.radius);
    let (inner, outer) = if through {
        (
            plane_ball_volume(l, m, norm, half.radius, ups),
            plane_ball_volume(l, m, norm, a.radius, ups),
        )
    } else {
        (
            raster_slab_measure(plane, &half, ups, norm),
            raster_slab_measure(plane, a, ups, norm),
        )
    };
    let packing = Packing {
        ratio: balls.len() as f64 / (rt / ups).powi(l as i32),
        empty: balls.is_empty(),
        inner_measure: inner,
        outer_measure: outer,
        balls,
    };
    check_packing(&packing, plane, a, ups, k, norm)?;
    Ok(packing)
}

fn check_packing(p: &Packing, plane: &AffinePlane, a: &Ball, ups: f64, k: usize, norm: Norm) -> Result<()> {
    for (i, l) in p.balls.iter().enumerate() {
        if l.radius != ups {
            return Err(Error::property("packing (i)", format!("ball {i} has radius {}", l.radius)));
        }
        if plane.distance(&l.center, norm)? > 1e-9 * a.radius {
            return Err(Error::property("packing (i)", format!("ball {i} is off the plane")));
        }
        if !a.contains_ball(&l.scaled(3.0), norm) {
            return Err(Error::property("packing (ii)", format!("3L #{i} leaves A")));
        }
    }
    let triples: Vec<Ball> = p.balls.iter().map(|l| l.scaled(3.0)).collect();
    if five_r_cover(&triples, norm).len() != triples.len() {
        return Err(Error::property("packing (iii)", "two triples 3L intersect"));
    }
    if p.empty {
        return Ok(());
    }
    let union = p.balls.len() as f64 * norm.unit_ball_volume(k) * ups.powi(k as i32);
    let lower = p.inner_measure / 6f64.powi(k as i32);
    // separated balls fill far less than either bound, so raster error is harmless
    let slack = 1.0 + 1e-9;
    if union * slack < lower || union > p.outer_measure * slack {
        return Err(Error::property(
            "packing (iv)",
            format!(
                "union measure {union:.6e} outside [{lower:.6e}, {:.6e}]",
                p.outer_measure
            ),
        ));
    }
    Ok(())
}

fn raster_slab_measure(plane: &AffinePlane, ball: &Ball, w: f64, norm: Norm) -> f64 {
    let k = ball.dim();
    let cells = match k {
        1 => 1 << 16,
        2 => 1 << 9,
        3 => 1 << 6,
        _ => 1 << 4,
    };
    let grid = Grid::over_ball(ball, norm, cells);
    let mut hit = 0usize;
    grid.for_each_near_plane(plane, w, norm, |i| {
        if ball.contains(&grid.point(i), norm) {
            hit += 1;
        }
    });
    hit as f64 * grid.cell_volume()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub d1: f64,
    pub d2: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub instances: usize,
}

/// Freeze `d1 = 0.9 min`, `d2 = 1.1 max` of the packing ratio over random
/// planes through the centre of a unit ball, with `g(Y)^(1/m)/Y` log-uniform.
pub fn calibrate_packing(
    l: usize,
    m: usize,
    norm: Norm,
    instances: usize,
    seed: u64,
) -> Result<Calibration> {
    let k = l + m;
    norm.check_dim(k)?;
    if instances == 0 {
        return Err(Error::Invalid("need at least one calibration instance".into()));
    }
    let mut rng = block_rng(seed, 0);
    let hi_ratio: f64 = if l >= 2 { 200.0 } else { 1e4 };
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..instances {
        let rho = (6.5f64.ln() + rng.gen::<f64>() * (hi_ratio.ln() - 6.5f64.ln())).exp();
        let (plane, center) = random_plane(l, m, norm, &mut rng)?;
        let a = Ball {
            center,
            radius: 1.0,
        };
        let p = pack_along(&plane, &a, 1.0 / rho, l, m, norm)?;
        lo = lo.min(p.ratio);
        hi = hi.max(p.ratio);
    }
    Ok(Calibration {
        d1: 0.9 * lo,
        d2: 1.1 * hi,
        min_ratio: lo,
        max_ratio: hi,
        instances,
    })
}

fn random_plane(l: usize, m: usize, norm: Norm, rng: &mut impl Rng) -> Result<(AffinePlane, Vec<f64>)> {
    let k = l + m;
    match norm {
        Norm::Euclidean => {
            let center: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            while dirs.len() < l {
                let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if euclid(&v) > 1e-3 {
                    dirs.push(v);
                }
            }
            let p = AffinePlane::from_point_and_directions(center.clone(), &dirs)?;
            Ok((p, center))
        }
        Norm::Block { n, m: mm } => loop {
            let q: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
            if q.iter().all(|v| *v == 0) {
                continue;
            }
            let p: Vec<i64> = (0..mm).map(|_| rng.gen_range(-3..=3)).collect();
            let y: Vec<f64> = (0..mm).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let r = ResonantPlane::new(p, q, y, crate::geometry::identity(mm))?;
            let plane = r.to_affine();
            let c = plane.base.clone();
            return Ok((plane, c));
        },
    }
}
