//! Reduction to a reference particle's perspective and the inverse embedding.
//!
//! Reduction runs in three steps: the trivialization `T_R` moves the total
//! momentum onto the reference, the constraint pins it to `k_R = 0`, and the
//! reference's external mode is contracted with `√L ⟨q_R = 0|`. With the
//! `√L` prefactor the reduced norm equals the physical inner product.

use nalgebra::DVector;

use crate::constraint::apply_constraint;
use crate::error::{Error, Result};
use crate::lattice::tensor::{contract_axis, insert_axis, mask};
use crate::lattice::{
    Factor, LatticeSpec, Layout, LinearOperator, OperatorClass, OperatorKind, StateKind,
    StateVector, C64,
};

/// A choice of reference particle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Perspective {
    pub reference: String,
    pub remaining: Vec<String>,
    pub layout: Layout,
}

impl Perspective {
    pub fn new(spec: &LatticeSpec, reference: &str) -> Result<Self> {
        let layout = spec.reduced_layout(reference)?;
        let remaining = spec
            .particles()
            .iter()
            .filter(|p| p.label != reference)
            .map(|p| p.label.clone())
            .collect();
        Ok(Perspective {
            reference: reference.to_string(),
            remaining,
            layout,
        })
    }

    pub fn kind(&self) -> StateKind {
        StateKind::Reduced(self.reference.clone())
    }
}

fn trivialization_on(
    spec: &LatticeSpec,
    layout: &Layout,
    reference: usize,
    sign: i64,
) -> Result<LinearOperator> {
    let sources = layout
        .external_particles()
        .filter(|&p| p != reference)
        .collect();
    LinearOperator::on(
        spec,
        layout.clone(),
        OperatorKind::ConditionalTranslation {
            target: reference,
            sources,
            sign,
            offset: 0,
        },
        OperatorClass::UNITARY,
        if sign > 0 {
            format!("T_{}", spec.label(reference))
        } else {
            format!("T_{}†", spec.label(reference))
        },
    )
}

/// `T_R = exp(i q̂_R Σ_{i≠R} p̂_i)`: `k_R ↦ k_R + Σ_{i≠R} k_i` on the
/// kinematical layout.
pub fn trivialization_unitary(spec: &LatticeSpec, reference: &str) -> Result<LinearOperator> {
    let r = spec.particle_index(reference)?;
    trivialization_on(spec, &spec.kinematical_layout(), r, 1)
}

/// Constraint, trivialization and contraction on raw amplitudes over any
/// layout that contains the reference's external mode. Returns the layout
/// without that mode.
pub(crate) fn reduce_amplitudes(
    spec: &LatticeSpec,
    layout: &Layout,
    amps: &DVector<C64>,
    reference: usize,
) -> (Layout, DVector<C64>) {
    let l = spec.sites();
    let phys = mask(layout, amps, |m| layout.total_momentum(m, l) == 0);
    let t = trivialization_on(spec, layout, reference, 1).expect("layout holds the reference");
    let shifted = t.apply_vec(&phys);
    let axis = layout
        .axis(Factor::external(reference))
        .expect("checked by caller");
    // √L ⟨q=0|k⟩ = 1 for every k.
    let row = vec![C64::new(1.0, 0.0); l];
    (
        layout.without(Factor::external(reference)),
        contract_axis(layout, &shifted, axis, &row),
    )
}

/// Inverse of [`reduce_amplitudes`] on the reduced layout `reduced`.
pub(crate) fn embed_amplitudes(
    spec: &LatticeSpec,
    reduced: &Layout,
    amps: &DVector<C64>,
    reference: usize,
) -> (Layout, DVector<C64>) {
    let full = reduced.with(spec, Factor::external(reference));
    let axis = full
        .axis(Factor::external(reference))
        .expect("just inserted");
    let mut ket = vec![C64::new(0.0, 0.0); spec.sites()];
    ket[0] = C64::new(1.0, 0.0);
    let lifted = insert_axis(&full, amps, axis, &ket);
    let t_inv = trivialization_on(spec, &full, reference, -1).expect("layout holds the reference");
    let out = t_inv.apply_vec(&lifted);
    (full, out)
}

/// Reduces a physical state (or a kinematical one, constrained first) to the
/// perspective of `reference`. Degeneracy is propagated.
pub fn reduce_to_perspective(state: &StateVector, reference: &str) -> Result<StateVector> {
    let spec = state.spec();
    let r = spec.particle_index(reference)?;
    let phys = match state.kind() {
        StateKind::Kinematical => apply_constraint(state)?,
        StateKind::Physical => state.clone(),
        StateKind::Reduced(other) => {
            return Err(Error::contract(format!(
                "state is already reduced to `{other}`; embed it first"
            )))
        }
    };
    if phys.layout() != &spec.kinematical_layout() {
        return Err(Error::shape("reduction needs a state on the full layout"));
    }
    phys.require_momentum()?;
    let (layout, amps) = reduce_amplitudes(spec, phys.layout(), phys.amplitudes(), r);
    Ok(phys
        .rebuilt(layout, StateKind::Reduced(reference.to_string()), amps)
        .flag_if_zero())
}

/// Embeds a reduced state back into the physical subspace.
pub fn embed_from_perspective(reduced: &StateVector, reference: &str) -> Result<StateVector> {
    let spec = reduced.spec();
    let r = spec.particle_index(reference)?;
    if reduced.kind() != &StateKind::Reduced(reference.to_string()) {
        return Err(Error::contract(format!(
            "expected a state reduced to `{reference}`, got {:?}",
            reduced.kind()
        )));
    }
    if reduced.layout() != &spec.reduced_layout(reference)? {
        return Err(Error::shape(format!(
            "reduced state lives on {}, expected {}",
            reduced.layout().describe(spec),
            spec.reduced_layout(reference)?.describe(spec)
        )));
    }
    reduced.require_momentum()?;
    let (layout, amps) = embed_amplitudes(spec, reduced.layout(), reduced.amplitudes(), r);
    Ok(reduced.rebuilt(layout, StateKind::Physical, amps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{momentum_eigenstate, tensor_state, ParticleSpec};
    use crate::tolerance::{DEFAULT_MAX_DIMENSION as CAP, EXACT};

    fn abc(l: usize) -> LatticeSpec {
        LatticeSpec::external_only(l, &["A", "B", "C"]).unwrap()
    }

    fn ket(spec: &LatticeSpec, ks: &[usize]) -> StateVector {
        tensor_state(
            &["A", "B", "C"]
                .iter()
                .zip(ks)
                .map(|(l, &k)| momentum_eigenstate(spec, l, k).unwrap())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn trivialization_collects_total_momentum() {
        let spec = abc(3);
        let t = trivialization_unitary(&spec, "A").unwrap();
        let out = t.apply(&ket(&spec, &[2, 2, 2])).unwrap();
        assert_eq!(out.amplitude(&[0, 2, 2]), C64::new(1.0, 0.0));
        let spec2 = abc(2);
        let t2 = trivialization_unitary(&spec2, "A").unwrap();
        let z = ket(&spec2, &[0, 0, 0]);
        assert_eq!(t2.apply(&z).unwrap(), z);
        assert!(t.unitarity_defect(CAP).unwrap() < EXACT);
    }

    #[test]
    fn basis_state_read_off() {
        let spec = abc(2);
        let s = ket(&spec, &[1, 1, 0]);
        let a = reduce_to_perspective(&s, "A").unwrap();
        assert_eq!(a.kind(), &StateKind::Reduced("A".into()));
        assert_eq!(a.amplitude(&[1, 0]), C64::new(1.0, 0.0));
        let c = reduce_to_perspective(&s, "C").unwrap();
        assert_eq!(c.amplitude(&[1, 1]), C64::new(1.0, 0.0));
    }

    #[test]
    fn embedding_a_reduced_basis_state() {
        let spec = abc(2);
        let red = StateVector::momentum(
            &spec,
            spec.reduced_layout("A").unwrap(),
            StateKind::Reduced("A".into()),
            DVector::from_vec(vec![
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ]),
        )
        .unwrap();
        let e = embed_from_perspective(&red, "A").unwrap();
        assert_eq!(e.kind(), &StateKind::Physical);
        assert_eq!(e.amplitude(&[1, 1, 0]), C64::new(1.0, 0.0));
        assert!((e.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_input_stays_flagged() {
        let spec = abc(2);
        let r = reduce_to_perspective(&ket(&spec, &[1, 0, 0]), "B").unwrap();
        assert!(r.is_degenerate());
        let e = embed_from_perspective(&r, "B").unwrap();
        assert!(e.is_degenerate());
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn reference_internal_mode_is_kept() {
        let spec = LatticeSpec::new(
            2,
            vec![
                ParticleSpec::external("A"),
                ParticleSpec::external("B"),
                ParticleSpec::new("C", 3),
            ],
        )
        .unwrap();
        let p = Perspective::new(&spec, "C").unwrap();
        assert_eq!(p.layout.describe(&spec), "(A, B, C:int)");
        assert_eq!(p.remaining, vec!["A", "B"]);
    }

    #[test]
    fn wrong_kind_or_layout_is_rejected() {
        let spec = abc(2);
        let a = reduce_to_perspective(&ket(&spec, &[1, 1, 0]), "A").unwrap();
        assert!(matches!(
            reduce_to_perspective(&a, "B"),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            embed_from_perspective(&a, "B"),
            Err(Error::Contract(_))
        ));
    }
}
