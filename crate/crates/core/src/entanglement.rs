//! Partial traces, von Neumann entropy and Schmidt rank across a cut.
//!
//! Cuts are given by mode names as understood by [`LatticeSpec::select`]:
//! `"B"` keeps every mode of B, `"C:int"` only C's internal mode, so one
//! particle may be split across the cut.
//!
//! [`LatticeSpec::select`]: crate::lattice::LatticeSpec::select

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{for_each_index, Factor, Layout, StateVector, C64};
use crate::tolerance;

/// Reduced density matrix of the kept modes.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub kept: Vec<String>,
    pub layout: Layout,
    pub matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::lattice::max_abs((&self.matrix - self.matrix.adjoint()).iter())
    }

    /// `−Σ λ ln λ` over eigenvalues above the clipping threshold. Rounding
    /// can push a pure state's value a few ulps below zero; that is clamped.
    pub fn entropy(&self) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .into_iter()
            .filter(|&l| l > tolerance::EIGEN_CLIP)
            .map(|l| -l * l.ln())
            .sum();
        s.max(0.0)
    }
}

fn resolve(state: &StateVector, keep: &[&str]) -> Result<Vec<Factor>> {
    if keep.is_empty() {
        return Err(Error::contract("empty set of kept modes"));
    }
    let factors = state.spec().select(state.layout(), keep)?;
    if factors.len() == state.layout().rank() {
        return Err(Error::contract("kept modes cover the whole state"));
    }
    Ok(factors)
}

/// `Ψ[i_keep][i_rest]`, the amplitude tensor reshaped across the cut.
fn cut_matrix(state: &StateVector, keep: &[Factor]) -> (Layout, DMatrix<C64>) {
    let layout = state.layout();
    let spec = state.spec();
    let kept = Layout::new(spec, keep.to_vec());
    let rest_factors: Vec<Factor> = layout
        .factors()
        .iter()
        .copied()
        .filter(|f| !keep.contains(f))
        .collect();
    let rest = Layout::new(spec, rest_factors);
    let ka: Vec<usize> = kept
        .factors()
        .iter()
        .map(|f| layout.axis(*f).unwrap())
        .collect();
    let ra: Vec<usize> = rest
        .factors()
        .iter()
        .map(|f| layout.axis(*f).unwrap())
        .collect();
    let mut m = DMatrix::zeros(kept.dim(), rest.dim());
    let mut ki = vec![0; ka.len()];
    let mut ri = vec![0; ra.len()];
    for_each_index(layout.dims(), |flat, multi| {
        for (j, &a) in ka.iter().enumerate() {
            ki[j] = multi[a];
        }
        for (j, &a) in ra.iter().enumerate() {
            ri[j] = multi[a];
        }
        m[(kept.flat_index(&ki), rest.flat_index(&ri))] = state.amplitudes()[flat];
    });
    (kept, m)
}

pub fn partial_trace(state: &StateVector, keep: &[&str]) -> Result<DensityMatrix> {
    let factors = resolve(state, keep)?;
    let (layout, psi) = cut_matrix(state, &factors);
    let kept = factors
        .iter()
        .map(|f| state.spec().factor_name(*f))
        .collect();
    Ok(DensityMatrix {
        kept,
        layout,
        matrix: &psi * psi.adjoint(),
    })
}

/// Von Neumann entropy (nats) of the kept side of a normalized state.
pub fn entanglement_entropy(state: &StateVector, keep: &[&str]) -> Result<f64> {
    if (state.norm_sqr() - 1.0).abs() > tolerance::PIPELINE {
        return Err(Error::contract(format!(
            "entropy needs a normalized state (norm² = {})",
            state.norm_sqr()
        )));
    }
    Ok(partial_trace(state, keep)?.entropy())
}

/// Number of singular values above `tol` across the cut, after normalizing.
pub fn schmidt_rank(state: &StateVector, keep: &[&str], tol: f64) -> Result<usize> {
    let factors = resolve(state, keep)?;
    let s = state.normalized();
    let (_, psi) = cut_matrix(&s, &factors);
    Ok(psi.singular_values().iter().filter(|&&v| v > tol).count())
}
