//! Dense brute-force twins of the structured operators and pipelines.
//!
//! Everything here is built from Kronecker products of small matrices and
//! full-space Fourier transforms. Nothing reuses the structured index
//! arithmetic, so agreement between the two is meaningful.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Factor, LatticeSpec, Layout, LinearOperator, StateKind, StateVector, C64};
use crate::measurement::Pointer;

/// A full matrix plus a note naming what it is a twin of.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
    pub note: String,
}

/// Dense realization of a structured operator, built column by column.
pub fn densify(op: &LinearOperator, cap: usize) -> Result<DenseOperator> {
    Ok(DenseOperator {
        matrix: op.to_dense(cap)?,
        note: format!("dense twin of `{}`", op.name()),
    })
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::Resource { dim, cap });
    }
    Ok(())
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    DMatrix::from_fn(ar * br, ac * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// `⊗_f m(f)` over the modes of `layout`, first mode slowest.
fn kron_over(layout: &Layout, m: impl Fn(Factor, usize) -> DMatrix<C64>) -> DMatrix<C64> {
    layout.factors().iter().zip(layout.dims()).fold(
        DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
        |acc, (f, d)| kron(&acc, &m(*f, *d)),
    )
}

/// `F[q][k] = exp(2πi qk/L)/√L`, momentum amplitudes to position amplitudes.
fn fourier(l: usize) -> DMatrix<C64> {
    DMatrix::from_fn(l, l, |q, k| {
        C64::from_polar(
            1.0 / (l as f64).sqrt(),
            2.0 * PI * ((q * k) % l) as f64 / l as f64,
        )
    })
}

/// `|q⟩ ↦ |q + s⟩`.
fn shift(l: usize, s: usize) -> DMatrix<C64> {
    DMatrix::from_fn(l, l, |r, c| {
        if r == (c + s) % l {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Fourier transform of every external mode of `layout`.
pub fn position_transform(layout: &Layout) -> DMatrix<C64> {
    kron_over(layout, |f, d| {
        if f.is_external() {
            fourier(d)
        } else {
            DMatrix::identity(d, d)
        }
    })
}

/// Global translation by `s` sites, in the momentum basis.
pub fn translation(spec: &LatticeSpec, layout: &Layout, s: usize) -> DMatrix<C64> {
    let f = position_transform(layout);
    let t = kron_over(layout, |fac, d| {
        if fac.is_external() {
            shift(spec.sites(), s)
        } else {
            DMatrix::identity(d, d)
        }
    });
    f.adjoint() * t * f
}

/// Group average `(1/L) Σ_s T(s)` over all global translations.
pub fn constraint_projector(
    spec: &LatticeSpec,
    layout: &Layout,
    cap: usize,
) -> Result<DMatrix<C64>> {
    check_cap(layout.dim(), cap)?;
    let l = spec.sites();
    let mut acc = DMatrix::zeros(layout.dim(), layout.dim());
    for s in 0..l {
        acc += translation(spec, layout, s);
    }
    Ok(acc / C64::new(l as f64, 0.0))
}

/// Reduction to `reference` as a dense map from the full kinematical space:
/// constrain, go to positions, read the slice `q_reference = 0`, scale by
/// `√L` and return to momenta.
pub fn reduction_map(spec: &LatticeSpec, reference: &str, cap: usize) -> Result<DMatrix<C64>> {
    let r = spec.particle_index(reference)?;
    let full = spec.kinematical_layout();
    let red = spec.reduced_layout(reference)?;
    let delta = constraint_projector(spec, &full, cap)?;
    let slice = kron_over(&full, |f, d| {
        if f == Factor::external(r) {
            let mut row = DMatrix::zeros(1, d);
            row[(0, 0)] = C64::new(1.0, 0.0);
            row
        } else {
            DMatrix::identity(d, d)
        }
    });
    let scale = C64::new((spec.sites() as f64).sqrt(), 0.0);
    Ok(position_transform(&red).adjoint() * slice * position_transform(&full) * delta * scale)
}

/// `R_to R_from†` between the two reduced spaces.
pub fn switch_matrix(spec: &LatticeSpec, from: &str, to: &str, cap: usize) -> Result<DMatrix<C64>> {
    let r_from = reduction_map(spec, from, cap)?;
    let r_to = reduction_map(spec, to, cap)?;
    Ok(r_to * r_from.adjoint())
}

/// One outcome of [`oracle_measurement`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub outcome: usize,
    pub probability: f64,
    /// Unnormalized post state on the reduced layout, momentum basis, as
    /// `(re, im)` pairs.
    pub raw: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTable {
    pub reference: String,
    pub pointer: Pointer,
    pub physical_norm_sqr: f64,
    pub outcomes: Vec<OracleOutcome>,
}

impl OracleTable {
    pub fn probabilities(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.probability).collect()
    }

    pub fn raw_vector(&self, outcome: usize) -> DVector<C64> {
        let raw = &self.outcomes[outcome].raw;
        DVector::from_iterator(raw.len(), raw.iter().map(|&(re, im)| C64::new(re, im)))
    }
}

/// Born probabilities `⟨ψ|U† δ (I ⊗ P_m) δ U|ψ⟩ / ⟨ψ|U† δ U|ψ⟩` and post
/// states `R (I ⊗ P_m) U|ψ⟩`, all from full dense matrices. With
/// `keep_pointer` false the pointer mode is contracted with `⟨m|`.
pub fn oracle_measurement(
    state: &StateVector,
    u: &LinearOperator,
    reference: &str,
    pointer: &Pointer,
    keep_pointer: bool,
    cap: usize,
) -> Result<OracleTable> {
    let spec = state.spec();
    let full = spec.kinematical_layout();
    if state.kind() != &StateKind::Kinematical || state.layout() != &full {
        return Err(Error::contract(
            "oracle needs a kinematical state on the full layout",
        ));
    }
    state.require_momentum()?;
    check_cap(full.dim(), cap)?;
    let pf = pointer.factor(spec)?;
    let r = spec.particle_index(reference)?;
    if pf == Factor::external(r) {
        return Err(Error::contract("pointer is removed by the reduction"));
    }
    let red = spec.reduced_layout(reference)?;
    let u = densify(u, cap)?.matrix;
    let delta = constraint_projector(spec, &full, cap)?;
    let reduce = reduction_map(spec, reference, cap)?;
    let evolved = &u * state.amplitudes();
    let norm = evolved.dotc(&(&delta * &evolved)).re;
    let n = spec.factor_dim(pf);
    let mut outcomes = Vec::with_capacity(n);
    for m in 0..n {
        let proj = kron_over(&full, |f, d| {
            if f == pf {
                let mut p = DMatrix::zeros(d, d);
                p[(m, m)] = C64::new(1.0, 0.0);
                p
            } else {
                DMatrix::identity(d, d)
            }
        });
        let projected = &proj * &evolved;
        let p = projected.dotc(&(&delta * &projected)).re / norm;
        let mut raw = &reduce * &projected;
        if !keep_pointer {
            let row = kron_over(&red, |f, d| {
                if f == pf {
                    let mut e = DMatrix::zeros(1, d);
                    e[(0, m)] = C64::new(1.0, 0.0);
                    e
                } else {
                    DMatrix::identity(d, d)
                }
            });
            raw = row * raw;
        }
        outcomes.push(OracleOutcome {
            outcome: m,
            probability: p,
            raw: raw.iter().map(|z| (z.re, z.im)).collect(),
        });
    }
    Ok(OracleTable {
        reference: reference.into(),
        pointer: pointer.clone(),
        physical_norm_sqr: norm,
        outcomes,
    })
}
