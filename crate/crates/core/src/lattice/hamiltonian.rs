use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{
    for_each_index, Basis, LatticeSpec, LinearOperator, MomentumConvention, OperatorClass,
    OperatorKind, StateKind, C64,
};
use crate::error::{Error, Result};

/// Interaction potential as a function of the non-reference positions
/// (roster order), which in the reduced description are positions relative
/// to the reference.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Potential {
    #[default]
    Zero,
    Table(BTreeMap<Vec<usize>, f64>),
}

/// Reduced Hamiltonian `Σ_i p_i² + Σ_{i<j} p_i p_j + V(q)` over the particles
/// other than `reference`, as a dense operator on the reduced layout.
///
/// This is `½ Σ_all p²` with the reference momentum eliminated through
/// `p_R = −Σ_{i≠R} p_i`.
pub fn reduced_hamiltonian(
    spec: &LatticeSpec,
    reference: &str,
    potential: &Potential,
    convention: MomentumConvention,
) -> Result<LinearOperator> {
    let layout = spec.reduced_layout(reference)?;
    let l = spec.sites();
    let ext_axes: Vec<usize> = layout
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_external())
        .map(|(a, _)| a)
        .collect();

    let mut kinetic = DVector::zeros(layout.dim());
    for_each_index(layout.dims(), |flat, multi| {
        let p: Vec<f64> = ext_axes
            .iter()
            .map(|&a| convention.value(multi[a], l))
            .collect();
        let mut e: f64 = p.iter().map(|x| x * x).sum();
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                e += p[i] * p[j];
            }
        }
        kinetic[flat] = C64::new(e, 0.0);
    });
    let mut h = DMatrix::from_diagonal(&kinetic);

    if let Potential::Table(table) = potential {
        let mut missing = Vec::new();
        let mut entries = DVector::zeros(layout.dim());
        for_each_index(layout.dims(), |flat, multi| {
            let key: Vec<usize> = ext_axes.iter().map(|&a| multi[a]).collect();
            match table.get(&key) {
                Some(v) => entries[flat] = C64::new(*v, 0.0),
                None => missing.push(key),
            }
        });
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            let shown: Vec<String> = missing.iter().take(8).map(|k| format!("{k:?}")).collect();
            return Err(Error::Config(vec![format!(
                "potential undefined at {} relative-position tuples, e.g. {}",
                missing.len(),
                shown.join(", ")
            )]));
        }
        let v = LinearOperator::on(
            spec,
            layout.clone(),
            OperatorKind::Diagonal {
                basis: Basis::Position,
                entries,
            },
            OperatorClass::HERMITIAN,
            "V",
        )?;
        h += v.to_dense(usize::MAX)?;
    }

    Ok(LinearOperator::on(
        spec,
        layout,
        OperatorKind::Dense(h),
        OperatorClass::HERMITIAN,
        format!("H|{reference}"),
    )?
    .with_output_kind(StateKind::Reduced(reference.to_string())))
}
