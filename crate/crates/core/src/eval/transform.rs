//! Sparsifying transforms for the compressed-sensing baseline.

use alloc::vec::Vec;

use crate::prelude::*;
use crate::tensor::{ComplexVolume, Dims};

/// Which axes are split at each level, with the region extents before the split.
fn haar_plan(d: Dims, levels: usize) -> Vec<([usize; 3], [bool; 3])> {
    let mut ext = d.as_array();
    let mut plan = Vec::new();
    for _ in 0..levels {
        let axes = ext.map(|n| n >= 2 && n % 2 == 0);
        if !axes.iter().any(|&a| a) {
            break;
        }
        plan.push((ext, axes));
        for a in 0..3 {
            if axes[a] {
                ext[a] /= 2;
            }
        }
    }
    plan
}

/// Run `f` on every line along `axis` inside the region `[0, ext)`.
fn for_each_line(d: Dims, ext: [usize; 3], axis: usize, buf: &mut Vec<Cplx>, data: &mut [Cplx], f: impl Fn(&[Cplx], &mut [Cplx])) {
    let stride = d.stride(axis);
    let n = ext[axis];
    let (o1, o2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    buf.resize(2 * n, Cplx::new(0.0, 0.0));
    for i in 0..ext[o1] {
        for j in 0..ext[o2] {
            let mut c = [0usize; 3];
            c[o1] = i;
            c[o2] = j;
            let start = d.index(c[0], c[1], c[2]);
            let (src, dst) = buf.split_at_mut(n);
            for k in 0..n {
                src[k] = data[start + k * stride];
            }
            f(src, dst);
            for k in 0..n {
                data[start + k * stride] = dst[k];
            }
        }
    }
}

fn haar_step(src: &[Cplx], dst: &mut [Cplx]) {
    let h = src.len() / 2;
    for k in 0..h {
        let (a, b) = (src[2 * k], src[2 * k + 1]);
        dst[k] = (a + b) * FRAC_1_SQRT_2;
        dst[h + k] = (a - b) * FRAC_1_SQRT_2;
    }
}

fn haar_unstep(src: &[Cplx], dst: &mut [Cplx]) {
    let h = src.len() / 2;
    for k in 0..h {
        let (lo, hi) = (src[k], src[h + k]);
        dst[2 * k] = (lo + hi) * FRAC_1_SQRT_2;
        dst[2 * k + 1] = (lo - hi) * FRAC_1_SQRT_2;
    }
}

const FRAC_1_SQRT_2: Real = core::f64::consts::FRAC_1_SQRT_2 as Real;

/// Orthonormal separable 3D Haar transform over up to `levels` levels.
/// An axis stops splitting once its remaining extent is odd.
pub fn haar3d(x: &ComplexVolume, levels: usize) -> ComplexVolume {
    let d = x.dims();
    let mut out = x.clone();
    let mut buf = Vec::new();
    for (ext, axes) in haar_plan(d, levels) {
        for axis in (0..3).filter(|&a| axes[a]) {
            for_each_line(d, ext, axis, &mut buf, out.data_mut(), haar_step);
        }
    }
    out
}

/// Inverse (and adjoint) of [`haar3d`].
pub fn ihaar3d(c: &ComplexVolume, levels: usize) -> ComplexVolume {
    let d = c.dims();
    let mut out = c.clone();
    let mut buf = Vec::new();
    for (ext, axes) in haar_plan(d, levels).into_iter().rev() {
        for axis in (0..3).rev().filter(|&a| axes[a]) {
            for_each_line(d, ext, axis, &mut buf, out.data_mut(), haar_unstep);
        }
    }
    out
}

/// Forward differences along each axis, zero in the last plane.
pub fn gradient3d(x: &ComplexVolume) -> [ComplexVolume; 3] {
    let d = x.dims();
    let ext = d.as_array();
    core::array::from_fn(|a| {
        let s = d.stride(a);
        ComplexVolume::from_fn(d, |i, j, k| {
            if [i, j, k][a] + 1 < ext[a] {
                let p = d.index(i, j, k);
                x.data()[p + s] - x.data()[p]
            } else {
                Cplx::new(0.0, 0.0)
            }
        })
    })
}

/// Adjoint of [`gradient3d`] (negative divergence).
pub fn gradient3d_adjoint(q: &[ComplexVolume; 3]) -> ComplexVolume {
    let d = q[0].dims();
    let ext = d.as_array();
    let mut out = ComplexVolume::zeros(d);
    for (a, qa) in q.iter().enumerate() {
        let s = d.stride(a);
        for p in 0..d.len() {
            let (i, j, k) = d.coords(p);
            let pos = [i, j, k][a];
            let mut v = Cplx::new(0.0, 0.0);
            if pos + 1 < ext[a] {
                v -= qa.data()[p];
            }
            if pos > 0 {
                v += qa.data()[p - s];
            }
            out.data_mut()[p] += v;
        }
    }
    out
}

/// Anisotropic total variation `Σ_axes Σ |D_a x|`.
pub fn total_variation(x: &ComplexVolume) -> Real {
    gradient3d(x).iter().map(|g| g.data().iter().map(|c| c.norm()).sum::<Real>()).sum()
}

/// Dual variable of [`tv_prox_warm`], one field per axis.
pub type TvDual = [ComplexVolume; 3];

pub fn tv_dual_zeros(d: Dims) -> TvDual {
    core::array::from_fn(|_| ComplexVolume::zeros(d))
}

/// `argmin_x ½‖x − v‖² + τ·TV(x)` by projected gradient on the dual.
pub fn tv_prox(v: &ComplexVolume, tau: Real, iters: usize) -> ComplexVolume {
    tv_prox_warm(v, tau, iters, &mut tv_dual_zeros(v.dims()))
}

/// [`tv_prox`] starting from, and updating, the dual `p`.
pub fn tv_prox_warm(v: &ComplexVolume, tau: Real, iters: usize, p: &mut TvDual) -> ComplexVolume {
    if tau <= 0.0 {
        return v.clone();
    }
    // ‖D‖² ≤ 4 per axis
    let gamma = 1.0 / (12.0 * tau);
    let mut x = v.sub(&gradient3d_adjoint(p).scale(tau));
    for _ in 0..iters {
        let g = gradient3d(&x);
        for (pa, ga) in p.iter_mut().zip(&g) {
            for (q, &gv) in pa.data_mut().iter_mut().zip(ga.data()) {
                let t = *q + gv * gamma;
                let m = t.norm();
                *q = if m > 1.0 { t / m } else { t };
            }
        }
        x = v.sub(&gradient3d_adjoint(p).scale(tau));
    }
    x
}

/// Complex soft threshold `c · max(0, 1 − t/|c|)`.
pub fn soft_threshold(x: &ComplexVolume, t: Real) -> ComplexVolume {
    x.map(|c| {
        let m = c.norm();
        if m <= t {
            Cplx::new(0.0, 0.0)
        } else {
            c * ((m - t) / m)
        }
    })
}

pub fn l1(x: &ComplexVolume) -> Real {
    x.data().iter().map(|c| c.norm()).sum()
}
