//! Axis-wise kernels on row-major amplitude vectors.

use nalgebra::{DMatrix, DVector};

use super::{for_each_index, Layout, C64};

/// Splits `layout` around `axis` into (outer, dim, inner) extents.
fn extents(layout: &Layout, axis: usize) -> (usize, usize, usize) {
    let dims = layout.dims();
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

/// Applies a local `dim × dim` matrix along one axis.
pub(crate) fn apply_axis(
    layout: &Layout,
    amps: &DVector<C64>,
    axis: usize,
    m: &DMatrix<C64>,
) -> DVector<C64> {
    let (outer, dim, inner) = extents(layout, axis);
    debug_assert_eq!(m.nrows(), dim);
    let mut out = DVector::zeros(amps.len());
    for o in 0..outer {
        for i in 0..inner {
            let base = o * dim * inner + i;
            for r in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..dim {
                    acc += m[(r, c)] * amps[base + c * inner];
                }
                out[base + r * inner] = acc;
            }
        }
    }
    out
}

/// Contracts one axis with the row vector `row` (coefficients used as given,
/// no conjugation). The result lives on `layout` with that axis removed.
pub(crate) fn contract_axis(
    layout: &Layout,
    amps: &DVector<C64>,
    axis: usize,
    row: &[C64],
) -> DVector<C64> {
    let (outer, dim, inner) = extents(layout, axis);
    let mut out = DVector::zeros(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * dim * inner + i;
            let mut acc = C64::new(0.0, 0.0);
            for (c, w) in row.iter().enumerate() {
                acc += w * amps[base + c * inner];
            }
            out[o * inner + i] = acc;
        }
    }
    out
}

/// Tensors `ket` into position `axis` of `target` (the layout after insertion).
pub(crate) fn insert_axis(
    target: &Layout,
    amps: &DVector<C64>,
    axis: usize,
    ket: &[C64],
) -> DVector<C64> {
    let (outer, dim, inner) = extents(target, axis);
    let mut out = DVector::zeros(outer * dim * inner);
    for o in 0..outer {
        for i in 0..inner {
            let a = amps[o * inner + i];
            let base = o * dim * inner + i;
            for (r, k) in ket.iter().enumerate() {
                out[base + r * inner] = k * a;
            }
        }
    }
    out
}

/// Monomial map between layouts: every input configuration is sent to one
/// output configuration with a phase. `f` writes the output multi-index.
pub(crate) fn remap(
    input: &Layout,
    output: &Layout,
    amps: &DVector<C64>,
    mut f: impl FnMut(&[usize], &mut [usize]) -> C64,
) -> DVector<C64> {
    let mut out = DVector::zeros(output.dim());
    let mut target = vec![0usize; output.rank()];
    for_each_index(input.dims(), |flat, multi| {
        let a = amps[flat];
        let w = f(multi, &mut target);
        if a != C64::new(0.0, 0.0) {
            out[output.flat_index(&target)] += w * a;
        }
    });
    out
}

/// Scalar multiple of the entries for which `keep` holds, zero elsewhere.
pub(crate) fn mask(
    layout: &Layout,
    amps: &DVector<C64>,
    mut keep: impl FnMut(&[usize]) -> bool,
) -> DVector<C64> {
    let mut out = amps.clone();
    for_each_index(layout.dims(), |flat, multi| {
        if !keep(multi) {
            out[flat] = C64::new(0.0, 0.0);
        }
    });
    out
}
