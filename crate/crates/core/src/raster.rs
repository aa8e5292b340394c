//! Regular grids of cell centers and exact slab rasterization.

use crate::geometry::{dot, euclid_ball_volume, AffinePlane, Ball, Norm, Slab};

/// Cell centers `lo + (i + 1/2) h` on an axis-aligned box.
#[derive(Clone, Debug)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub h: f64,
    pub dims: Vec<usize>,
}

impl Grid {
    /// Box `[lo, lo + cells*h)^k`.
    pub fn new(lo: Vec<f64>, h: f64, cells: usize) -> Grid {
        let k = lo.len();
        Grid {
            lo,
            h,
            dims: vec![cells; k],
        }
    }

    /// Bounding box of `ball` split into `cells` per axis.
    pub fn over_ball(ball: &Ball, norm: Norm, cells: usize) -> Grid {
        let half = ball.radius * norm.sup_factor();
        let lo = ball.center.iter().map(|c| c - half).collect();
        Grid::new(lo, 2.0 * half / cells as f64, cells)
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.k() as i32)
    }

    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let k = self.k();
        let mut out = vec![0.0; k];
        for d in (0..k).rev() {
            let i = flat % self.dims[d];
            flat /= self.dims[d];
            out[d] = self.lo[d] + (i as f64 + 0.5) * self.h;
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Cell-center indices along `axis` whose coordinate lies in the open interval `(a, b)`.
    pub fn open_range(&self, axis: usize, a: f64, b: f64) -> Option<(usize, usize)> {
        let n = self.dims[axis] as f64;
        // center_i = lo + (i + 1/2) h  in (a, b)
        let lo_f = ((a - self.lo[axis]) / self.h - 0.5).floor() + 1.0;
        let hi_f = ((b - self.lo[axis]) / self.h - 0.5).ceil() - 1.0;
        let lo_i = lo_f.max(0.0);
        let hi_i = hi_f.min(n - 1.0);
        if !(lo_i <= hi_i) {
            return None;
        }
        Some((lo_i as usize, hi_i as usize))
    }

    /// Visit every cell whose center lies in the intersection of the open
    /// slabs `|a.x + b| < width * scale`.
    pub fn for_each_in_slabs(&self, slabs: &[Slab], width: f64, mut visit: impl FnMut(usize)) {
        let k = self.k();
        let last = k - 1;
        let ncols: usize = self.dims[..last].iter().product();
        let mut col_idx = vec![0usize; last];
        for col in 0..ncols {
            // decode column multi-index
            let mut c = col;
            for d in (0..last).rev() {
                col_idx[d] = c % self.dims[d];
                c /= self.dims[d];
            }
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            let mut empty = false;
            for s in slabs {
                let mut rest = s.b;
                for d in 0..last {
                    rest += s.a[d] * (self.lo[d] + (col_idx[d] as f64 + 0.5) * self.h);
                }
                let w = width * s.scale;
                let al = s.a[last];
                if al == 0.0 {
                    if rest.abs() >= w {
                        empty = true;
                        break;
                    }
                } else {
                    let (x1, x2) = ((-w - rest) / al, (w - rest) / al);
                    let (a, b) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
                    lo = lo.max(a);
                    hi = hi.min(b);
                }
            }
            if empty || !(lo < hi) {
                continue;
            }
            if let Some((i0, i1)) = self.open_range(last, lo, hi) {
                let base = col * self.dims[last];
                for i in i0..=i1 {
                    visit(base + i);
                }
            }
        }
    }

    /// Visit cells whose center is within distance `< width` of `plane`.
    pub fn for_each_near_plane(
        &self,
        plane: &AffinePlane,
        width: f64,
        norm: Norm,
        mut visit: impl FnMut(usize),
    ) {
        if let Some(slabs) = plane.slab_form(norm) {
            self.for_each_in_slabs(&slabs, width, visit);
            return;
        }
        for i in 0..self.len() {
            let p = self.point(i);
            if plane.distance(&p, norm).map_or(false, |d| d < width) {
                visit(i);
            }
        }
    }

    pub fn ball_mask(&self, ball: &Ball, norm: Norm) -> Vec<bool> {
        (0..self.len())
            .map(|i| ball.contains(&self.point(i), norm))
            .collect()
    }
}

/// Volume of `{ x in B(c, rho) : dist(x, R) < w }` for a plane `R` of
/// dimension `l` through the center `c`, in `R^{l+m}`.
pub fn plane_ball_volume(l: usize, m: usize, norm: Norm, rho: f64, w: f64) -> f64 {
    match norm {
        Norm::Euclidean => euclid_plane_ball_volume(l, m, rho, w),
        Norm::Block { n, m: mm } => {
            // product over blocks of an n-ball of radius rho/sqrt(n) cut by a
            // slab of half-width w/sqrt(n) through its center
            let s = (n as f64).sqrt();
            euclid_plane_ball_volume(n - 1, 1, rho / s, w / s).powi(mm as i32)
        }
    }
}

fn euclid_plane_ball_volume(l: usize, m: usize, rho: f64, w: f64) -> f64 {
    let k = l + m;
    if w >= rho {
        return euclid_ball_volume(k) * rho.powi(k as i32);
    }
    if l == 0 {
        return euclid_ball_volume(m) * w.powi(m as i32);
    }
    // m * V_m * int_0^w u^(m-1) V_l (rho^2 - u^2)^(l/2) du by Simpson
    let steps = 2000;
    let hstep = w / steps as f64;
    let f = |u: f64| u.powi(m as i32 - 1) * (rho * rho - u * u).max(0.0).powf(l as f64 / 2.0);
    let mut acc = f(0.0) + f(w);
    for i in 1..steps {
        let u = i as f64 * hstep;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
    }
    m as f64 * euclid_ball_volume(m) * euclid_ball_volume(l) * acc * hstep / 3.0
}

/// Whether `plane` passes through `x` up to relative tolerance.
pub fn passes_through(plane: &AffinePlane, x: &[f64], scale: f64) -> bool {
    let diff: Vec<f64> = x.iter().zip(&plane.base).map(|(a, b)| a - b).collect();
    plane
        .normals
        .iter()
        .all(|u| dot(&diff, u).abs() <= 1e-9 * scale.max(1e-300))
}
