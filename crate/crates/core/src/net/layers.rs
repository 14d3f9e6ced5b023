//! Layer kernels and their exact backward passes.
//!
//! Convolution activations are laid out channel-major as `[C, B·P]`: one
//! row per channel, columns running over samples then grid pixels
//! (`b · P + p`, `p = r · cols + c`). Dense activations are `[B, D]`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::Real;

fn add_row_bias<T: Real>(y: &mut Array2<T>, b: ArrayView1<T>) {
    for (mut row, &bi) in y.axis_iter_mut(Axis(0)).zip(b.iter()) {
        row.mapv_inplace(|v| v + bi);
    }
}

/// `a · b` for a small `a` (`m × k`), as `m · k` row updates; much faster
/// than a packed gemm when `m` and `k` are tiny and `b` is wide.
fn small_left_dot<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    let mut y = Array2::zeros((a.nrows(), b.ncols()));
    for (mut out, arow) in y.rows_mut().into_iter().zip(a.rows()) {
        for (&w, brow) in arow.iter().zip(b.rows()) {
            out.scaled_add(w, &brow);
        }
    }
    y
}

/// `a · bᵀ` as pairwise row dot products, for long shared rows.
fn row_gram<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    let mut y = Array2::zeros((a.nrows(), b.nrows()));
    for (mut out, arow) in y.rows_mut().into_iter().zip(a.rows()) {
        for (o, brow) in out.iter_mut().zip(b.rows()) {
            *o = arow.dot(&brow);
        }
    }
    y
}

/// Grouped 1×1 convolution. `w` is `[out, in / groups]`; output channel `o`
/// reads input group `o / (out / groups)`.
pub fn pointwise_forward<T: Real>(
    w: ArrayView2<T>,
    b: ArrayView1<T>,
    x: ArrayView2<T>,
    groups: usize,
) -> Array2<T> {
    let (out, in_g) = w.dim();
    let out_g = out / groups;
    let cols = x.ncols();
    let mut y = Array2::zeros((out, cols));
    for g in 0..groups {
        let wg = w.slice(s![g * out_g..(g + 1) * out_g, ..]);
        let xg = x.slice(s![g * in_g..(g + 1) * in_g, ..]);
        let yg = if groups == 1 { wg.dot(&xg) } else { small_left_dot(wg, xg) };
        y.slice_mut(s![g * out_g..(g + 1) * out_g, ..]).assign(&yg);
    }
    add_row_bias(&mut y, b);
    y
}

/// Returns `(dw, db, dx)`; `dx` is skipped when `need_dx` is false.
pub fn pointwise_backward<T: Real>(
    w: ArrayView2<T>,
    x: ArrayView2<T>,
    dy: ArrayView2<T>,
    groups: usize,
    need_dx: bool,
) -> (Array2<T>, Array1<T>, Option<Array2<T>>) {
    let (out, in_g) = w.dim();
    let out_g = out / groups;
    let mut dw = Array2::zeros(w.dim());
    let mut dx = need_dx.then(|| Array2::zeros(x.dim()));
    for g in 0..groups {
        let dyg = dy.slice(s![g * out_g..(g + 1) * out_g, ..]);
        let xg = x.slice(s![g * in_g..(g + 1) * in_g, ..]);
        dw.slice_mut(s![g * out_g..(g + 1) * out_g, ..]).assign(&row_gram(dyg, xg));
        if let Some(dx) = dx.as_mut() {
            let wg = w.slice(s![g * out_g..(g + 1) * out_g, ..]);
            dx.slice_mut(s![g * in_g..(g + 1) * in_g, ..]).assign(&small_left_dot(wg.t(), dyg));
        }
    }
    (dw, dy.sum_axis(Axis(1)), dx)
}

/// Grid geometry shared by the 3×3 kernels.
#[derive(Debug, Clone, Copy)]
pub struct Grid2 {
    pub rows: usize,
    pub cols: usize,
}

impl Grid2 {
    fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// For every pixel, the source pixel of each of the 9 taps, or `None`
    /// when the tap falls in the zero padding.
    fn taps(&self) -> Vec<[Option<usize>; 9]> {
        (0..self.pixels())
            .map(|p| {
                let (r, c) = ((p / self.cols) as isize, (p % self.cols) as isize);
                std::array::from_fn(|k| {
                    let (rr, cc) = (r + (k / 3) as isize - 1, c + (k % 3) as isize - 1);
                    let inside = rr >= 0 && cc >= 0 && rr < self.rows as isize && cc < self.cols as isize;
                    inside.then(|| rr as usize * self.cols + cc as usize)
                })
            })
            .collect()
    }
}

/// Unfolds `[cg, B·P]` into `[cg · 9, B·P]` patches, zero padded.
pub fn im2col3x3<T: Real>(x: ArrayView2<T>, grid: Grid2) -> Array2<T> {
    let x = x.as_standard_layout();
    let (cg, n) = x.dim();
    let p = grid.pixels();
    let taps = grid.taps();
    let mut cols = Array2::zeros((cg * 9, n));
    for ci in 0..cg {
        let src = x.row(ci);
        let src = src.as_slice().expect("standard layout");
        for k in 0..9 {
            let mut dst = cols.row_mut(ci * 9 + k);
            let dst = dst.as_slice_mut().expect("standard layout");
            for (d, s) in dst.chunks_exact_mut(p).zip(src.chunks_exact(p)) {
                for (pix, t) in taps.iter().enumerate() {
                    if let Some(from) = t[k] {
                        d[pix] = s[from];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col3x3`].
pub fn col2im3x3<T: Real>(dcols: ArrayView2<T>, grid: Grid2) -> Array2<T> {
    let dcols = dcols.as_standard_layout();
    let (rows9, n) = dcols.dim();
    let cg = rows9 / 9;
    let p = grid.pixels();
    let taps = grid.taps();
    let mut dx = Array2::zeros((cg, n));
    for ci in 0..cg {
        let mut dst = dx.row_mut(ci);
        let dst = dst.as_slice_mut().expect("standard layout");
        for k in 0..9 {
            let src = dcols.row(ci * 9 + k);
            let src = src.as_slice().expect("standard layout");
            for (d, s) in dst.chunks_exact_mut(p).zip(src.chunks_exact(p)) {
                for (pix, t) in taps.iter().enumerate() {
                    if let Some(to) = t[k] {
                        d[to] += s[pix];
                    }
                }
            }
        }
    }
    dx
}

/// Grouped 3×3 convolution, stride 1, zero padding 1. `w` is
/// `[C, (C / groups) · 9]` with column `ci · 9 + k`, `k = 3 · (dr + 1) + (dc + 1)`.
pub fn conv3x3_forward<T: Real>(
    w: ArrayView2<T>,
    b: ArrayView1<T>,
    x: ArrayView2<T>,
    groups: usize,
    grid: Grid2,
) -> Array2<T> {
    let c = w.nrows();
    let cg = c / groups;
    let mut y = Array2::zeros((c, x.ncols()));
    for g in 0..groups {
        let cols = im2col3x3(x.slice(s![g * cg..(g + 1) * cg, ..]), grid);
        let wg = w.slice(s![g * cg..(g + 1) * cg, ..]);
        y.slice_mut(s![g * cg..(g + 1) * cg, ..]).assign(&small_left_dot(wg, cols.view()));
    }
    add_row_bias(&mut y, b);
    y
}

/// Returns `(dw, db, dx)`.
pub fn conv3x3_backward<T: Real>(
    w: ArrayView2<T>,
    x: ArrayView2<T>,
    dy: ArrayView2<T>,
    groups: usize,
    grid: Grid2,
) -> (Array2<T>, Array1<T>, Array2<T>) {
    let c = w.nrows();
    let cg = c / groups;
    let mut dw = Array2::zeros(w.dim());
    let mut dx = Array2::zeros(x.dim());
    for g in 0..groups {
        let rows = s![g * cg..(g + 1) * cg, ..];
        let cols = im2col3x3(x.slice(rows), grid);
        let dyg = dy.slice(rows);
        dw.slice_mut(rows).assign(&row_gram(dyg, cols.view()));
        let dcols = small_left_dot(w.slice(rows).t(), dyg);
        dx.slice_mut(rows).assign(&col2im3x3(dcols.view(), grid));
    }
    (dw, dy.sum_axis(Axis(1)), dx)
}

/// `x · w + b` with `w` stored `[in, out]`.
pub fn linear_forward<T: Real>(x: ArrayView2<T>, w: ArrayView2<T>, b: ArrayView1<T>) -> Array2<T> {
    let mut y = x.dot(&w);
    for mut row in y.axis_iter_mut(Axis(0)) {
        row += &b;
    }
    y
}

/// Returns `(dw, db, dx)`.
pub fn linear_backward<T: Real>(
    x: ArrayView2<T>,
    w: ArrayView2<T>,
    dy: ArrayView2<T>,
) -> (Array2<T>, Array1<T>, Array2<T>) {
    (x.t().dot(&dy), dy.sum_axis(Axis(0)), dy.dot(&w.t()))
}

pub struct LayerNormOut<T> {
    pub y: Array2<T>,
    pub xhat: Array2<T>,
    pub inv_std: Array1<T>,
}

/// Row-wise layer normalization with affine `gamma`, `beta`.
pub fn layer_norm_forward<T: Real>(
    x: ArrayView2<T>,
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
    eps: T,
) -> LayerNormOut<T> {
    let d = T::from(x.ncols()).unwrap();
    let mut xhat = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, is) in xhat.axis_iter_mut(Axis(0)).zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        let var = row.fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / d;
        *is = T::one() / (var + eps).sqrt();
        let k = *is;
        row.mapv_inplace(|v| (v - mean) * k);
    }
    let mut y = xhat.clone();
    Zip::from(y.rows_mut()).for_each(|mut row| {
        Zip::from(&mut row).and(&gamma).and(&beta).for_each(|v, &g, &b| *v = *v * g + b);
    });
    LayerNormOut { y, xhat, inv_std }
}

/// Returns `(dgamma, dbeta, dx)`.
pub fn layer_norm_backward<T: Real>(
    xhat: ArrayView2<T>,
    inv_std: ArrayView1<T>,
    gamma: ArrayView1<T>,
    dy: ArrayView2<T>,
) -> (Array1<T>, Array1<T>, Array2<T>) {
    let dgamma = (&dy * &xhat).sum_axis(Axis(0));
    let dbeta = dy.sum_axis(Axis(0));
    let d = T::from(xhat.ncols()).unwrap();
    let mut dx = Array2::zeros(dy.dim());
    for (((mut out, dyr), xr), &is) in
        dx.axis_iter_mut(Axis(0)).zip(dy.rows()).zip(xhat.rows()).zip(inv_std.iter())
    {
        let dxhat = &dyr * &gamma;
        let m1 = dxhat.sum() / d;
        let m2 = (&dxhat * &xr).sum() / d;
        Zip::from(&mut out).and(&dxhat).and(&xr).for_each(|o, &dh, &xh| *o = is * (dh - m1 - xh * m2));
    }
    (dgamma, dbeta, dx)
}

pub fn relu<T: Real>(x: &Array2<T>) -> Array2<T> {
    x.mapv(|v| v.max(T::zero()))
}

/// Zeroes `grad` wherever the pre-activation was not positive.
pub fn relu_backward<T: Real>(pre: &Array2<T>, grad: &mut Array2<T>) {
    Zip::from(grad).and(pre).for_each(|g, &p| {
        if p <= T::zero() {
            *g = T::zero();
        }
    });
}

/// `Q = V + (A - mean(A))` row-wise.
pub fn dueling_combine<T: Real>(value: ArrayView1<T>, adv: ArrayView2<T>) -> Array2<T> {
    let n = T::from(adv.ncols()).unwrap();
    let mut q = adv.to_owned();
    for (mut row, &v) in q.axis_iter_mut(Axis(0)).zip(value.iter()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|a| v + a - mean);
    }
    q
}

/// Gradient of [`dueling_combine`]: returns `(dV contribution, dA)`.
pub fn dueling_backward<T: Real>(dq: ArrayView2<T>) -> (Array1<T>, Array2<T>) {
    let n = T::from(dq.ncols()).unwrap();
    let dv = dq.sum_axis(Axis(1));
    let mut da = dq.to_owned();
    for (mut row, &s) in da.axis_iter_mut(Axis(0)).zip(dv.iter()) {
        let mean = s / n;
        row.mapv_inplace(|g| g - mean);
    }
    (dv, da)
}
