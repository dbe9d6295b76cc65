use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{require, Split};
use crate::error::Result;
use crate::lattice::{
    max_abs, tensor_state, to_basis, Basis, Factor, LatticeSpec, Layout, LinearOperator,
    OperatorClass, StateVector, C64,
};
use crate::tolerance::{EXACT, PIPELINE};

/// Level at which a Kraus family acts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KrausSpace {
    /// `Λ_m = ⟨m|U|φ₀⟩` on the unconstrained non-pointer modes.
    Kinematical,
    /// `Γ_m`, read off the constraint surface for a product frame state.
    KinematicalPair,
    /// `M_m` on the reduced space of the named reference.
    Reduced(String),
}

/// Outcome-indexed operators on a common system layout.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    pub spec: LatticeSpec,
    pub space: KrausSpace,
    /// Modes traced out by the outcome (pointer, or pointer plus frame).
    pub pointer: Vec<Factor>,
    pub system: Layout,
    pub outcomes: Vec<usize>,
    /// Pointer states `|m⟩` the outcomes refer to, when not the computational basis.
    pub outcome_states: Option<Vec<DVector<C64>>>,
    pub operators: Vec<DMatrix<C64>>,
    pub normalization: Option<f64>,
}

impl KrausSet {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `Σ_m K_m† K_m`.
    pub fn gram(&self) -> DMatrix<C64> {
        let n = self.system.dim();
        self.operators
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * k)
    }

    /// `‖Σ_m K_m† K_m − I‖_max`.
    pub fn completeness_defect(&self) -> f64 {
        let g = self.gram();
        let n = g.nrows();
        max_abs((g - DMatrix::identity(n, n)).iter())
    }

    fn pointer_basis(&self, dim: usize) -> Vec<DVector<C64>> {
        match &self.outcome_states {
            Some(v) => v.clone(),
            None => (0..dim).map(|m| unit(dim, m)).collect(),
        }
    }
}

fn unit(dim: usize, i: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[i] = C64::new(1.0, 0.0);
    v
}

/// `‖δU − Uδ‖_max` for a square operator, column by column.
pub fn check_translation_invariance(u: &LinearOperator) -> Result<f64> {
    require(u.domain() == u.codomain(), || {
        format!("`{}` is not square", u.name())
    })?;
    let layout = u.domain();
    let l = u.spec().sites();
    let sector: Vec<usize> = (0..layout.dim())
        .map(|i| layout.total_momentum(&layout.multi_index(i), l))
        .collect();
    let mut defect: f64 = 0.0;
    let mut e = DVector::zeros(layout.dim());
    for c in 0..layout.dim() {
        e[c] = C64::new(1.0, 0.0);
        let col = u.apply_vec(&e);
        e[c] = C64::new(0.0, 0.0);
        // (δU − Uδ)[r, c] = U[r, c] (1[r phys] − 1[c phys]).
        let cp = sector[c] == 0;
        for (r, x) in col.iter().enumerate() {
            if (sector[r] == 0) != cp {
                defect = defect.max(x.norm());
            }
        }
    }
    Ok(defect)
}

/// `U (system ⊗ apparatus)` for a translation-invariant `U`.
pub fn process2_apply(
    u: &LinearOperator,
    system: &StateVector,
    apparatus: &StateVector,
) -> Result<StateVector> {
    require((apparatus.norm_sqr() - 1.0).abs() < PIPELINE, || {
        format!("apparatus state has norm² {}", apparatus.norm_sqr())
    })?;
    let joint = to_basis(
        &tensor_state(&[system.clone(), apparatus.clone()])?,
        Basis::Momentum,
    )?;
    require(joint.layout() == u.domain(), || {
        format!(
            "system ⊗ apparatus lives on {}, `{}` acts on {}",
            joint.layout().describe(u.spec()),
            u.name(),
            u.domain().describe(u.spec())
        )
    })?;
    let defect = check_translation_invariance(u)?;
    require(defect < EXACT, || {
        format!(
            "`{}` is not translation invariant (defect {defect:.3e})",
            u.name()
        )
    })?;
    u.apply(&joint)
}

fn check_orthonormal(states: &[DVector<C64>], dim: usize) -> Result<()> {
    require(states.len() == dim, || {
        format!(
            "{} pointer states for a {dim}-dimensional pointer",
            states.len()
        )
    })?;
    for (i, a) in states.iter().enumerate() {
        require(a.len() == dim, || {
            format!("pointer state #{i} has length {}", a.len())
        })?;
        for (j, b) in states.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = a.dotc(b);
            require((got - C64::new(want, 0.0)).norm() < PIPELINE, || {
                format!("pointer basis not orthonormal: ⟨{i}|{j}⟩ = {got}")
            })?;
        }
    }
    Ok(())
}

/// `Λ_m = ⟨m|U|φ₀⟩` on the non-pointer modes of `U`'s layout.
///
/// `outcome_states` defaults to the computational basis of the pointer modes.
pub fn kraus_from_unitary(
    u: &LinearOperator,
    pointer: &[Factor],
    phi0: &DVector<C64>,
    outcome_states: Option<&[DVector<C64>]>,
) -> Result<KrausSet> {
    let spec = u.spec();
    require(u.domain() == u.codomain(), || {
        "unitary must be square".into()
    })?;
    let split = Split::new(spec, u.domain(), pointer)?;
    let (ns, np) = (split.sys.dim(), split.ptr.dim());
    require(phi0.len() == np, || {
        format!("φ₀ has length {}, pointer needs {np}", phi0.len())
    })?;
    require((phi0.norm_squared() - 1.0).abs() < PIPELINE, || {
        format!("φ₀ has norm² {}", phi0.norm_squared())
    })?;
    let basis: Vec<DVector<C64>> = match outcome_states {
        Some(v) => v.to_vec(),
        None => (0..np).map(|m| unit(np, m)).collect(),
    };
    check_orthonormal(&basis, np)?;

    let mut ops = vec![DMatrix::zeros(ns, ns); np];
    let mut v = DVector::zeros(split.full.dim());
    for s_in in 0..ns {
        v.fill(C64::new(0.0, 0.0));
        for p in 0..np {
            v[split.join(s_in, p)] = phi0[p];
        }
        let w = u.apply_vec(&v);
        for (m, b) in basis.iter().enumerate() {
            for s_out in 0..ns {
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..np {
                    acc += b[p].conj() * w[split.join(s_out, p)];
                }
                ops[m][(s_out, s_in)] = acc;
            }
        }
    }
    Ok(KrausSet {
        spec: spec.clone(),
        space: super::KrausSpace::Kinematical,
        pointer: split.ptr.factors().to_vec(),
        system: split.sys,
        outcomes: (0..np).collect(),
        outcome_states: outcome_states.map(|v| v.to_vec()),
        operators: ops,
        normalization: None,
    })
}

/// Total-momentum sector of a vector, or `None` if it spans several.
fn sector_of(layout: &Layout, sites: usize, v: &DVector<C64>) -> Option<usize> {
    let mut found = None;
    for (i, x) in v.iter().enumerate() {
        if x.norm() > PIPELINE {
            let k = layout.total_momentum(&layout.multi_index(i), sites);
            match found {
                None => found = Some(k),
                Some(f) if f != k => return None,
                _ => {}
            }
        }
    }
    Some(found.unwrap_or(0))
}

/// Orthogonalizes `v` against `basis` (two passes); returns the normalized
/// residual if it is not negligible.
fn gram_schmidt_step(basis: &[DVector<C64>], mut v: DVector<C64>) -> Option<DVector<C64>> {
    for _ in 0..2 {
        for b in basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
    }
    let n = v.norm();
    (n > 1e-8).then(|| v / C64::new(n, 0.0))
}

/// Builds a translation-invariant unitary `U` with `⟨m|U|φ₀⟩ = Λ_m`.
///
/// The isometry `V|s⟩ = Σ_m Λ_m|s⟩ ⊗ |m⟩` fixes `U` on `system ⊗ φ₀`. The
/// pointer basis is completed from `φ₀` by Gram–Schmidt over the standard
/// basis, and the remaining columns of `U` are filled, one momentum sector
/// at a time, by Gram–Schmidt over standard basis vectors of the output,
/// paired with inputs in flat-index order. The result is deterministic.
pub fn unitary_from_kraus(k: &KrausSet, phi0: &DVector<C64>) -> Result<LinearOperator> {
    let spec = &k.spec;
    let l = spec.sites();
    let defect = k.completeness_defect();
    require(defect < PIPELINE, || {
        format!("Kraus family is incomplete (defect {defect:.3e})")
    })?;
    let full = k.system.union(spec, &Layout::new(spec, k.pointer.clone()));
    let split = Split::new(spec, &full, &k.pointer)?;
    let (ns, np) = (split.sys.dim(), split.ptr.dim());
    require(phi0.len() == np, || {
        format!("φ₀ has length {}, pointer needs {np}", phi0.len())
    })?;
    require((phi0.norm_squared() - 1.0).abs() < PIPELINE, || {
        format!("φ₀ has norm² {}", phi0.norm_squared())
    })?;
    let outs = k.pointer_basis(np);
    check_orthonormal(&outs, np)?;

    // Input pointer basis b_0 = φ₀, b_1, … .
    let mut pb = vec![phi0.clone()];
    for i in 0..np {
        if pb.len() == np {
            break;
        }
        if let Some(b) = gram_schmidt_step(&pb, unit(np, i)) {
            pb.push(b);
        }
    }
    let psec: Vec<usize> = pb
        .iter()
        .map(|b| sector_of(&split.ptr, l, b))
        .collect::<Option<_>>()
        .ok_or_else(|| crate::Error::contract("φ₀ is not a total-momentum eigenstate"))?;
    let ssec: Vec<usize> = (0..ns)
        .map(|s| split.sys.total_momentum(&split.sys.multi_index(s), l))
        .collect();

    let embed = |s: usize, p: &DVector<C64>| {
        let mut v = DVector::zeros(full.dim());
        for (j, x) in p.iter().enumerate() {
            v[split.join(s, j)] = *x;
        }
        v
    };

    let mut inputs: Vec<DVector<C64>> = Vec::with_capacity(full.dim());
    let mut outputs: Vec<DVector<C64>> = Vec::with_capacity(full.dim());
    let mut by_sector: BTreeMap<usize, Vec<DVector<C64>>> = BTreeMap::new();
    for (s, &sec) in ssec.iter().enumerate().take(ns) {
        let mut out = DVector::zeros(full.dim());
        for (m, op) in k.operators.iter().enumerate() {
            let col = op.column(s).clone_owned();
            for (s_out, a) in col.iter().enumerate() {
                if *a != C64::new(0.0, 0.0) {
                    out += embed(s_out, &outs[m]) * *a;
                }
            }
        }
        let want = (sec + psec[0]) % l;
        require(sector_of(&full, l, &out) == Some(want), || {
            "Kraus operators do not conserve total momentum".into()
        })?;
        inputs.push(embed(s, &pb[0]));
        by_sector.entry(want).or_default().push(out.clone());
        outputs.push(out);
    }

    // Remaining inputs e_s ⊗ b_j (j ≥ 1), grouped by sector in (s, j) order.
    let mut pending: BTreeMap<usize, Vec<DVector<C64>>> = BTreeMap::new();
    for (s, &sec) in ssec.iter().enumerate().take(ns) {
        for (j, b) in pb.iter().enumerate().skip(1) {
            pending
                .entry((sec + psec[j]) % l)
                .or_default()
                .push(embed(s, b));
        }
    }
    for (sector, ins) in pending {
        let mut span = by_sector.remove(&sector).unwrap_or_default();
        let mut fresh = Vec::new();
        for x in 0..full.dim() {
            if fresh.len() == ins.len() {
                break;
            }
            if full.total_momentum(&full.multi_index(x), l) != sector {
                continue;
            }
            if let Some(v) = gram_schmidt_step(&span, unit(full.dim(), x)) {
                span.push(v.clone());
                fresh.push(v);
            }
        }
        require(fresh.len() == ins.len(), || {
            format!("cannot complete sector {sector} to a unitary")
        })?;
        inputs.extend(ins);
        outputs.extend(fresh);
    }

    let x = DMatrix::from_columns(&inputs);
    let w = DMatrix::from_columns(&outputs);
    LinearOperator::dense(
        spec,
        full.clone(),
        full,
        w * x.adjoint(),
        OperatorClass::UNITARY,
        "U(Λ)",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{internal_eigenstate, position_eigenstate, OperatorKind, ParticleSpec};
    use crate::tolerance::DEFAULT_MAX_DIMENSION as CAP;

    fn abc(l: usize, d: usize) -> LatticeSpec {
        LatticeSpec::new(
            l,
            vec![
                ParticleSpec::external("A"),
                ParticleSpec::external("B"),
                ParticleSpec::new("C", d),
            ],
        )
        .unwrap()
    }

    /// σ_C ↦ σ_C + (q_A − q_B) on the (A, B, C:int) layout.
    fn shift(spec: &LatticeSpec) -> LinearOperator {
        let layout = Layout::new(
            spec,
            vec![
                Factor::external(0),
                Factor::external(1),
                Factor::internal(2),
            ],
        );
        LinearOperator::on(
            spec,
            layout,
            OperatorKind::ControlledShift {
                controls: (0, 1),
                target: Factor::internal(2),
                multiplier: 1,
            },
            OperatorClass::UNITARY,
            "shift",
        )
        .unwrap()
    }

    #[test]
    fn translation_invariance_examples() {
        let spec = abc(3, 2);
        let full = spec.kinematical_layout();
        assert_eq!(
            check_translation_invariance(&LinearOperator::identity(&spec, full.clone())).unwrap(),
            0.0
        );
        let t = LinearOperator::global_translation(&spec, full.clone(), 1);
        assert!(check_translation_invariance(&t).unwrap() < EXACT);
        let kick = LinearOperator::on(
            &spec,
            full,
            OperatorKind::ConditionalTranslation {
                target: 0,
                sources: vec![],
                sign: 1,
                offset: 1,
            },
            OperatorClass::UNITARY,
            "kick A",
        )
        .unwrap();
        assert!(check_translation_invariance(&kick).unwrap() > 0.1);
    }

    #[test]
    fn process2_on_equal_positions_leaves_pointer() {
        let spec = abc(3, 3);
        let u = shift(&spec);
        let sys = tensor_state(&[
            position_eigenstate(&spec, "A", 1).unwrap(),
            position_eigenstate(&spec, "B", 1).unwrap(),
        ])
        .unwrap();
        let app = internal_eigenstate(&spec, "C", 0).unwrap();
        let out = process2_apply(&u, &sys, &app).unwrap();
        let expected = to_basis(&tensor_state(&[sys, app]).unwrap(), Basis::Momentum).unwrap();
        assert!(out.max_deviation(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn process2_rejects_non_invariant_unitary() {
        let spec = abc(2, 2);
        let layout = u_layout(&spec);
        let kick = LinearOperator::on(
            &spec,
            layout,
            OperatorKind::ConditionalTranslation {
                target: 0,
                sources: vec![],
                sign: 1,
                offset: 1,
            },
            OperatorClass::UNITARY,
            "kick",
        )
        .unwrap();
        let sys = tensor_state(&[
            position_eigenstate(&spec, "A", 0).unwrap(),
            position_eigenstate(&spec, "B", 0).unwrap(),
        ])
        .unwrap();
        let app = internal_eigenstate(&spec, "C", 0).unwrap();
        assert!(matches!(
            process2_apply(&kick, &sys, &app),
            Err(crate::Error::Contract(_))
        ));
    }

    fn u_layout(spec: &LatticeSpec) -> Layout {
        Layout::new(
            spec,
            vec![
                Factor::external(0),
                Factor::external(1),
                Factor::internal(2),
            ],
        )
    }

    fn phi0(d: usize) -> DVector<C64> {
        unit(d, 0)
    }

    #[test]
    fn identity_gives_single_nonzero_kraus_operator() {
        let spec = abc(2, 2);
        let u = LinearOperator::identity(&spec, u_layout(&spec));
        let k = kraus_from_unitary(&u, &[Factor::internal(2)], &phi0(2), None).unwrap();
        assert_eq!(k.operators[0], DMatrix::identity(4, 4));
        assert_eq!(k.operators[1], DMatrix::zeros(4, 4));
    }

    /// Position-diagonal projector onto `(q_A − q_B) mod L ≡ m (mod d)`,
    /// written in the momentum basis from its Fourier series.
    fn relative_position_projector(l: usize, d: usize, m: usize) -> DMatrix<C64> {
        let f = crate::lattice::dft_matrix(l);
        let f2 = f.kronecker(&f);
        let diag = DMatrix::from_fn(l * l, l * l, |r, c| {
            let (qa, qb) = (r / l, r % l);
            let rel = (qa + l - qb) % l;
            if r == c && rel % d == m {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        f2.adjoint() * diag * f2
    }

    #[test]
    fn controlled_shift_kraus_are_relative_position_projectors() {
        for (l, d) in [(2, 2), (3, 3), (4, 2)] {
            let spec = abc(l, d);
            let k =
                kraus_from_unitary(&shift(&spec), &[Factor::internal(2)], &phi0(d), None).unwrap();
            for m in 0..d {
                let want = relative_position_projector(l, d, m);
                assert!(
                    max_abs((&k.operators[m] - want).iter()) < 1e-12,
                    "l={l} d={d} m={m}"
                );
            }
            assert!(k.completeness_defect() < EXACT);
        }
    }

    #[test]
    fn non_orthonormal_pointer_basis_is_rejected() {
        let spec = abc(2, 2);
        let u = shift(&spec);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bad = vec![
            unit(2, 0),
            DVector::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0)]),
        ];
        assert!(matches!(
            kraus_from_unitary(&u, &[Factor::internal(2)], &phi0(2), Some(&bad)),
            Err(crate::Error::Contract(_))
        ));
    }

    #[test]
    fn kraus_round_trip_through_unitary() {
        let spec = abc(2, 2);
        let k = KrausSet {
            spec: spec.clone(),
            space: KrausSpace::Kinematical,
            pointer: vec![Factor::internal(2)],
            system: spec
                .kinematical_layout()
                .without(Factor::internal(2))
                .without(Factor::external(2)),
            outcomes: vec![0, 1],
            outcome_states: None,
            operators: vec![
                relative_position_projector(2, 2, 0),
                relative_position_projector(2, 2, 1),
            ],
            normalization: None,
        };
        let u = unitary_from_kraus(&k, &phi0(2)).unwrap();
        assert!(u.unitarity_defect(CAP).unwrap() < 1e-12);
        assert!(check_translation_invariance(&u).unwrap() < EXACT);
        let back = kraus_from_unitary(&u, &[Factor::internal(2)], &phi0(2), None).unwrap();
        for m in 0..2 {
            assert!(max_abs((&back.operators[m] - &k.operators[m]).iter()) < 1e-10);
        }
        // On the φ₀ block the construction agrees with the controlled shift.
        let cs = shift(&spec);
        for s in 0..4 {
            let v = DVector::from_fn(8, |i, _| {
                if i == 2 * s {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            assert!(max_abs((u.apply_vec(&v) - cs.apply_vec(&v)).iter()) < 1e-12);
        }
    }

    #[test]
    fn single_outcome_family_gives_identity() {
        let spec = abc(3, 2);
        let sys = spec
            .kinematical_layout()
            .without(Factor::internal(2))
            .without(Factor::external(2));
        let k = KrausSet {
            spec: spec.clone(),
            space: KrausSpace::Kinematical,
            pointer: vec![Factor::internal(2)],
            system: sys,
            outcomes: vec![0, 1],
            outcome_states: None,
            operators: vec![DMatrix::identity(9, 9), DMatrix::zeros(9, 9)],
            normalization: None,
        };
        let u = unitary_from_kraus(&k, &phi0(2)).unwrap();
        assert!(max_abs((u.to_dense(CAP).unwrap() - DMatrix::identity(18, 18)).iter()) < 1e-12);
    }

    #[test]
    fn incomplete_family_is_rejected() {
        let spec = abc(2, 2);
        let sys = spec
            .kinematical_layout()
            .without(Factor::internal(2))
            .without(Factor::external(2));
        let mut p0 = relative_position_projector(2, 2, 0);
        p0[(0, 0)] += C64::new(1e-3, 0.0);
        let k = KrausSet {
            spec: spec.clone(),
            space: KrausSpace::Kinematical,
            pointer: vec![Factor::internal(2)],
            system: sys,
            outcomes: vec![0, 1],
            outcome_states: None,
            operators: vec![p0, relative_position_projector(2, 2, 1)],
            normalization: None,
        };
        assert!(matches!(
            unitary_from_kraus(&k, &phi0(2)),
            Err(crate::Error::Contract(_))
        ));
    }

    #[test]
    fn momentum_pointer_needs_definite_phi0() {
        // Pointer = external momentum of C; φ₀ mixing two momenta is refused.
        let spec = LatticeSpec::external_only(2, &["A", "C"]).unwrap();
        let sys = Layout::new(&spec, vec![Factor::external(0)]);
        let k = KrausSet {
            spec: spec.clone(),
            space: KrausSpace::Kinematical,
            pointer: vec![Factor::external(1)],
            system: sys,
            outcomes: vec![0, 1],
            outcome_states: None,
            operators: vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)],
            normalization: None,
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = DVector::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0)]);
        assert!(unitary_from_kraus(&k, &mixed).is_err());
        let u = unitary_from_kraus(&k, &unit(2, 0)).unwrap();
        assert!(check_translation_invariance(&u).unwrap() < EXACT);
    }
}
