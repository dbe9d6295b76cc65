//! The built-in invariant suite run by `qrframe verify`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::presets::{preset, PRESETS};
use super::report::CheckResult;
use super::runner::run_scenario;
use super::scenario::Overrides;
use crate::constraint::build_projector;
use crate::entanglement::entanglement_entropy;
use crate::error::Result;
use crate::lattice::{
    dft_basis_change, max_abs, reduced_hamiltonian, to_basis, weyl_commutation_check, Basis,
    Factor, LatticeSpec, LinearOperator, MomentumConvention, ParticleSpec, Potential, StateKind,
    StateVector, C64,
};
use crate::measurement::{check_translation_invariance, kraus_from_unitary, unitary_from_kraus};
use crate::oracle::constraint_projector;
use crate::recipes::{controlled_internal_shift, random_invariant};
use crate::reduction::{embed_from_perspective, reduce_to_perspective, trivialization_unitary};
use crate::switching::switch_map;
use crate::tolerance::{EXACT, PIPELINE};

/// One line of the verification table.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyEntry {
    /// `structural` or the preset name.
    pub suite: String,
    pub check: CheckResult,
}

fn entry(suite: &str, check: Result<CheckResult>, name: &str) -> VerifyEntry {
    VerifyEntry {
        suite: suite.into(),
        check: check.unwrap_or_else(|e| CheckResult::failed(name, EXACT, e.to_string())),
    }
}

fn spec3() -> LatticeSpec {
    LatticeSpec::new(
        3,
        vec![
            ParticleSpec::external("A"),
            ParticleSpec::external("B"),
            ParticleSpec::new("C", 2),
        ],
    )
    .expect("static spec")
}

fn random_states(spec: &LatticeSpec, n: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            StateVector::random(
                spec,
                spec.kinematical_layout(),
                StateKind::Kinematical,
                &mut rng,
            )
        })
        .collect()
}

type Structural = (&'static str, fn() -> Result<CheckResult>);

const STRUCTURAL: &[Structural] = &[
    ("weyl-relation", weyl),
    ("dft-round-trip", dft_round_trip),
    ("constraint-projector", constraint_projector_check),
    ("trivialization-unitary", trivialization),
    ("norm-bridge", norm_bridge),
    ("reduction-slice", reduction_slice),
    ("embed-reduce", embed_reduce),
    ("switch-round-trip", switch_round_trip),
    ("switch-cycle", switch_cycle),
    ("reduced-hamiltonian-hermitian", hamiltonian),
    ("kinematical-kraus-completeness", kraus_completeness),
    ("kraus-round-trip", kraus_round_trip),
    ("entropy-symmetry", entropy_symmetry),
];

/// Identities that do not depend on a scenario.
pub fn structural_suite() -> Vec<VerifyEntry> {
    STRUCTURAL
        .iter()
        .map(|(name, f)| entry("structural", f(), name))
        .collect()
}

/// Structural suite followed by every preset with all its checks. Presets
/// run on separate threads; the output order is fixed.
pub fn verify_all(overrides: &Overrides) -> Vec<VerifyEntry> {
    let mut out = structural_suite();
    let reports: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = PRESETS
            .iter()
            .map(|(name, _)| {
                s.spawn(move || {
                    preset(name).and_then(|mut cfg| {
                        cfg.apply(overrides);
                        run_scenario(&cfg)
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("preset thread panicked"))
            .collect()
    });
    for ((name, _), report) in PRESETS.iter().zip(reports) {
        match report {
            Ok(r) => {
                if r.degenerate {
                    let c = CheckResult::failed("degenerate", PIPELINE, "no physical component");
                    out.push(entry(name, Ok(c), "degenerate"));
                }
                out.extend(r.checks.into_iter().map(|c| VerifyEntry {
                    suite: name.to_string(),
                    check: c,
                }));
            }
            Err(e) => out.push(entry(name, Err(e), "run")),
        }
    }
    out
}

fn weyl() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for l in 2..=8usize {
        let spec = LatticeSpec::external_only(l, &["A"])?;
        let li = l as i64;
        for a in -li..=li {
            for b in -li..=li {
                worst = worst.max(weyl_commutation_check(&spec, "A", a, b)?);
            }
        }
    }
    Ok(CheckResult::below(
        "weyl-relation",
        worst,
        EXACT,
        "L = 2..8, |a|, |b| ≤ L",
    ))
}

fn dft_round_trip() -> Result<CheckResult> {
    let spec = LatticeSpec::external_only(4, &["A", "B"])?;
    let mut worst: f64 = 0.0;
    for psi in random_states(&spec, 10, 1) {
        let there = dft_basis_change(&psi, "A", Basis::Position)?;
        let back = dft_basis_change(&there, "A", Basis::Momentum)?;
        worst = worst
            .max(back.max_deviation(&psi)?)
            .max((there.norm() - psi.norm()).abs());
    }
    Ok(CheckResult::below(
        "dft-round-trip",
        worst,
        EXACT,
        "L = 4, random states",
    ))
}

fn constraint_projector_check() -> Result<CheckResult> {
    let spec = spec3();
    let op = build_projector(&spec);
    let d = op.operator().projector_defect(4096)?;
    let dense = constraint_projector(&spec, &spec.kinematical_layout(), 4096)?;
    let gap = max_abs((dense - op.operator().to_dense(4096)?).iter());
    Ok(CheckResult::below(
        "constraint-projector",
        d.max(gap),
        EXACT,
        "idempotent, Hermitian, equal to the group average",
    ))
}

fn trivialization() -> Result<CheckResult> {
    let spec = spec3();
    let mut worst: f64 = 0.0;
    for r in ["A", "B", "C"] {
        worst = worst.max(trivialization_unitary(&spec, r)?.unitarity_defect(4096)?);
    }
    Ok(CheckResult::below(
        "trivialization-unitary",
        worst,
        EXACT,
        "‖T†T − I‖",
    ))
}

fn norm_bridge() -> Result<CheckResult> {
    let spec = LatticeSpec::external_only(4, &["A", "B", "C"])?;
    let delta = constraint_projector(&spec, &spec.kinematical_layout(), 4096)?;
    let mut worst: f64 = 0.0;
    for psi in random_states(&spec, 100, 2) {
        let lhs = reduce_to_perspective(&psi, "A")?.norm_sqr();
        let rhs = psi.amplitudes().dotc(&(&delta * psi.amplitudes())).re;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(CheckResult::below(
        "norm-bridge",
        worst,
        PIPELINE,
        "100 random states, L = 4",
    ))
}

fn reduction_slice() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for l in 2..=4usize {
        let spec = LatticeSpec::external_only(l, &["A", "B", "C"])?;
        let full = spec.kinematical_layout();
        for flat in 0..full.dim() {
            let mut v = DVector::zeros(full.dim());
            v[flat] = C64::new(1.0, 0.0);
            let psi = StateVector::kinematical(&spec, v.clone())?;
            let red = reduce_to_perspective(&psi, "A")?;
            for (i, amp) in red.amplitudes().iter().enumerate() {
                let multi = red.layout().multi_index(i);
                let (kb, kc) = (multi[0], multi[1]);
                let ka = (2 * l - kb - kc) % l;
                let expected = v[full.flat_index(&[ka, kb, kc])];
                worst = worst.max((amp - expected).norm());
            }
        }
    }
    Ok(CheckResult::below(
        "reduction-slice",
        worst,
        EXACT,
        "every basis state, L ≤ 4: ψ_red(k_B, k_C) = ψ(−k_B − k_C, k_B, k_C)",
    ))
}

fn embed_reduce() -> Result<CheckResult> {
    let spec = spec3();
    let delta = build_projector(&spec);
    let mut worst: f64 = 0.0;
    for psi in random_states(&spec, 10, 3) {
        let phys = delta.apply(&psi)?;
        for r in ["A", "B", "C"] {
            let back = embed_from_perspective(&reduce_to_perspective(&phys, r)?, r)?;
            worst = worst.max(back.max_deviation(&phys)?);
        }
    }
    Ok(CheckResult::below(
        "embed-reduce",
        worst,
        PIPELINE,
        "embed ∘ reduce = δ",
    ))
}

fn switch_round_trip() -> Result<CheckResult> {
    let spec = spec3();
    let there = switch_map(&spec, "A", "C")?;
    let back = switch_map(&spec, "C", "A")?;
    let id = there.operator().then(back.operator())?.to_dense(4096)?;
    let n = id.nrows();
    let d = max_abs((id - nalgebra::DMatrix::identity(n, n)).iter());
    Ok(CheckResult::below(
        "switch-round-trip",
        d,
        PIPELINE,
        "Ŝ_{C→A} Ŝ_{A→C} = I",
    ))
}

fn switch_cycle() -> Result<CheckResult> {
    let spec = spec3();
    let cycle = switch_map(&spec, "C", "A")?
        .operator()
        .then(switch_map(&spec, "A", "B")?.operator())?
        .then(switch_map(&spec, "B", "C")?.operator())?
        .to_dense(4096)?;
    let n = cycle.nrows();
    let d = max_abs((cycle - nalgebra::DMatrix::identity(n, n)).iter());
    Ok(CheckResult::below(
        "switch-cycle",
        d,
        PIPELINE,
        "C → A → B → C",
    ))
}

fn hamiltonian() -> Result<CheckResult> {
    let spec = LatticeSpec::external_only(3, &["A", "B", "C"])?;
    let mut table = std::collections::BTreeMap::new();
    for qb in 0..3 {
        for qc in 0..3 {
            table.insert(vec![qb, qc], (qb * 3 + qc) as f64 * 0.37 - 1.0);
        }
    }
    let mut worst: f64 = 0.0;
    for conv in [MomentumConvention::Naive, MomentumConvention::Folded] {
        for pot in [Potential::Zero, Potential::Table(table.clone())] {
            worst =
                worst.max(reduced_hamiltonian(&spec, "A", &pot, conv)?.hermiticity_defect(4096)?);
        }
    }
    Ok(CheckResult::below(
        "reduced-hamiltonian-hermitian",
        worst,
        EXACT,
        "both conventions",
    ))
}

fn pointer_ready(spec: &LatticeSpec) -> DVector<C64> {
    let mut phi0 = DVector::zeros(spec.internal_dim(2));
    phi0[0] = C64::new(1.0, 0.0);
    phi0
}

fn kraus_completeness() -> Result<CheckResult> {
    let spec = spec3();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let u = random_invariant(&spec, seed, 1.0, 4096)?;
        let k = kraus_from_unitary(&u, &[Factor::internal(2)], &pointer_ready(&spec), None)?;
        worst = worst
            .max(k.completeness_defect())
            .max(check_translation_invariance(&u)?);
    }
    Ok(CheckResult::below(
        "kinematical-kraus-completeness",
        worst,
        EXACT,
        "Σ Λ†Λ = I and translation invariance, 5 random unitaries",
    ))
}

fn kraus_round_trip() -> Result<CheckResult> {
    let spec = spec3();
    let phi0 = pointer_ready(&spec);
    let u: LinearOperator = controlled_internal_shift(&spec, ("A", "B"), "C", 1)?;
    let k = kraus_from_unitary(&u, &[Factor::internal(2)], &phi0, None)?;
    let rebuilt = unitary_from_kraus(&k, &phi0)?;
    let again = kraus_from_unitary(&rebuilt, &[Factor::internal(2)], &phi0, None)?;
    let mut worst = rebuilt.unitarity_defect(4096)?;
    for (a, b) in k.operators.iter().zip(&again.operators) {
        worst = worst.max(max_abs((a - b).iter()));
    }
    Ok(CheckResult::below(
        "kraus-round-trip",
        worst,
        PIPELINE,
        "controlled shift",
    ))
}

fn entropy_symmetry() -> Result<CheckResult> {
    let spec = spec3();
    let mut worst: f64 = 0.0;
    for psi in random_states(&spec, 10, 4) {
        let psi = to_basis(&psi.normalized(), Basis::Momentum)?;
        let a = entanglement_entropy(&psi, &["A"])?;
        let b = entanglement_entropy(&psi, &["B", "C"])?;
        worst = worst.max((a - b).abs());
    }
    Ok(CheckResult::below(
        "entropy-symmetry",
        worst,
        PIPELINE,
        "S(A) = S(BC)",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_passes() {
        let entries = verify_all(&Overrides::default());
        let failed: Vec<_> = entries.iter().filter(|e| !e.check.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
