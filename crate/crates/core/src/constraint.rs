//! The translation constraint: group-averaging projector onto zero total
//! momentum, the induced inner product, and physicality checks.

use crate::error::{Error, Result};
use crate::lattice::{
    for_each_index, inner_product, to_basis, Basis, LatticeSpec, LinearOperator, OperatorClass,
    OperatorKind, ProjectorKind, StateKind, StateVector, C64,
};

/// `δ(P̂) = (1/L) Σ_s T_s`, the average over the `L` global translations.
///
/// In the momentum basis this is the indicator of `Σ k ≡ 0 (mod L)`; internal
/// modes are untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintProjector {
    spec: LatticeSpec,
    op: LinearOperator,
}

impl ConstraintProjector {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// Structured operator on the kinematical layout.
    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.op.apply(state)
    }
}

pub fn build_projector(spec: &LatticeSpec) -> ConstraintProjector {
    let op = LinearOperator::on(
        spec,
        spec.kinematical_layout(),
        OperatorKind::Projector(ProjectorKind::Physical),
        OperatorClass::PROJECTOR,
        "δ(P)",
    )
    .expect("physical projector is always well formed")
    .with_output_kind(StateKind::Physical);
    ConstraintProjector {
        spec: spec.clone(),
        op,
    }
}

fn require_kinematical(state: &StateVector) -> Result<()> {
    if state.kind() != &StateKind::Kinematical
        || state.layout() != &state.spec().kinematical_layout()
    {
        return Err(Error::contract(
            "expected a kinematical state on the full layout",
        ));
    }
    Ok(())
}

/// Projects a kinematical momentum-basis state onto the constraint surface.
/// A vanishing result is returned flagged degenerate.
pub fn apply_constraint(state: &StateVector) -> Result<StateVector> {
    require_kinematical(state)?;
    state.require_momentum()?;
    Ok(build_projector(state.spec()).apply(state)?.flag_if_zero())
}

/// `⟨a|δ(P̂)|b⟩` for kinematical states carrying the same basis tags.
pub fn physical_inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    require_kinematical(a)?;
    require_kinematical(b)?;
    if a.bases() != b.bases() {
        return Err(Error::contract(
            "basis tags differ; convert one state first",
        ));
    }
    let a = to_basis(a, Basis::Momentum)?;
    let b = to_basis(b, Basis::Momentum)?;
    let pb = build_projector(a.spec())
        .apply(&b)?
        .with_kind(StateKind::Kinematical);
    inner_product(&a, &pb)
}

/// True iff every amplitude off the constraint surface is at most `tol` in
/// modulus. Position-tagged modes are converted first.
pub fn is_physical(state: &StateVector, tol: f64) -> bool {
    let s = to_basis(state, Basis::Momentum).expect("labels come from the state's own spec");
    let layout = s.layout();
    let l = s.spec().sites();
    let mut ok = true;
    for_each_index(layout.dims(), |flat, multi| {
        if layout.total_momentum(multi, l) != 0 && s.amplitudes()[flat].norm() > tol {
            ok = false;
        }
    });
    ok
}
