//! Process-2 unitaries built from relational generators only: functions of
//! relative positions `q_i − q_j`, momenta `p_i`, and internal operators.
//! Every recipe commutes with the total-momentum projector by construction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::{
    for_each_index, Basis, Factor, LatticeSpec, Layout, LinearOperator, MomentumConvention,
    OperatorClass, OperatorKind, C64,
};

pub fn identity(spec: &LatticeSpec) -> LinearOperator {
    LinearOperator::identity(spec, spec.kinematical_layout())
}

/// `σ_target ↦ σ_target + multiplier·(q_i − q_j) (mod d)`.
pub fn controlled_internal_shift(
    spec: &LatticeSpec,
    controls: (&str, &str),
    target: &str,
    multiplier: i64,
) -> Result<LinearOperator> {
    let i = spec.particle_index(controls.0)?;
    let j = spec.particle_index(controls.1)?;
    distinct(spec, &[i, j])?;
    LinearOperator::on(
        spec,
        spec.kinematical_layout(),
        OperatorKind::ControlledShift {
            controls: (i, j),
            target: spec.internal(target)?,
            multiplier,
        },
        OperatorClass::UNITARY,
        format!(
            "controlled-shift({}-{} -> {target}:int)",
            controls.0, controls.1
        ),
    )
}

/// Moves `k_control` units of momentum from `recoil` to `pointer`:
/// `k_pointer += k_control`, `k_recoil −= k_control`.
pub fn momentum_transfer(
    spec: &LatticeSpec,
    control: &str,
    pointer: &str,
    recoil: &str,
) -> Result<LinearOperator> {
    let c = spec.particle_index(control)?;
    let p = spec.particle_index(pointer)?;
    let r = spec.particle_index(recoil)?;
    distinct(spec, &[c, p, r])?;
    let full = spec.kinematical_layout();
    let kick = |target, sign| {
        LinearOperator::on(
            spec,
            full.clone(),
            OperatorKind::ConditionalTranslation {
                target,
                sources: vec![c],
                sign,
                offset: 0,
            },
            OperatorClass::UNITARY,
            "kick",
        )
    };
    LinearOperator::on(
        spec,
        full.clone(),
        OperatorKind::Composed(vec![kick(p, 1)?, kick(r, -1)?]),
        OperatorClass::UNITARY,
        format!("momentum-transfer({control}: {recoil} -> {pointer})"),
    )
}

/// `exp(iθ p_i p_j)` with folded lattice momenta.
pub fn relative_momentum_phase(
    spec: &LatticeSpec,
    pair: (&str, &str),
    theta: f64,
) -> Result<LinearOperator> {
    let i = spec.particle_index(pair.0)?;
    let j = spec.particle_index(pair.1)?;
    distinct(spec, &[i, j])?;
    let full = spec.kinematical_layout();
    let (ai, aj) = (
        full.axis(Factor::external(i)).unwrap(),
        full.axis(Factor::external(j)).unwrap(),
    );
    let l = spec.sites();
    let mut entries = DVector::zeros(full.dim());
    for_each_index(full.dims(), |flat, multi| {
        let pi = MomentumConvention::Folded.value(multi[ai], l);
        let pj = MomentumConvention::Folded.value(multi[aj], l);
        entries[flat] = C64::from_polar(1.0, theta * pi * pj);
    });
    LinearOperator::on(
        spec,
        full,
        OperatorKind::Diagonal {
            basis: Basis::Momentum,
            entries,
        },
        OperatorClass::UNITARY,
        format!("momentum-phase({}, {}; {theta})", pair.0, pair.1),
    )
}

/// `exp(−iH)` for a seeded random Hermitian `H` assembled from relational
/// generators:
///
/// - `Σ a_i p_i + Σ b_ij p_i p_j` (folded momenta),
/// - `Σ V_ij(q_i − q_j)` for every pair,
/// - a random Hermitian term on every internal mode,
/// - `W(q_i − q_j) ⊗ Y` couplings between every pair and every internal mode.
///
/// Every coefficient is standard normal times `strength`. `H` preserves total
/// momentum, so it is exponentiated sector by sector.
pub fn random_invariant(
    spec: &LatticeSpec,
    seed: u64,
    strength: f64,
    max_dimension: usize,
) -> Result<LinearOperator> {
    let full = spec.kinematical_layout();
    let dim = full.dim();
    if dim > max_dimension {
        return Err(Error::Resource {
            dim,
            cap: max_dimension,
        });
    }
    let l = spec.sites();
    let n = spec.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample::<f64, _>(StandardNormal) * strength };

    let p: Vec<usize> = (0..n)
        .map(|i| full.axis(Factor::external(i)).unwrap())
        .collect();
    let a: Vec<f64> = (0..n).map(|_| normal()).collect();
    let mut b = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            b.insert((i, j), normal());
        }
    }
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for_each_index(full.dims(), |flat, multi| {
        let mom: Vec<f64> = p
            .iter()
            .map(|&ax| MomentumConvention::Folded.value(multi[ax], l))
            .collect();
        let mut e: f64 = a.iter().zip(&mom).map(|(x, y)| x * y).sum();
        for (&(i, j), c) in &b {
            e += c * mom[i] * mom[j];
        }
        h[(flat, flat)] = C64::new(e, 0.0);
    });

    for i in 0..n {
        for j in i + 1..n {
            let v: Vec<f64> = (0..l).map(|_| normal()).collect();
            h += relational_potential(spec, &full, (i, j), &v)?;
        }
    }
    let internals: Vec<usize> = (0..n).filter(|&i| spec.internal_dim(i) > 1).collect();
    for &k in &internals {
        let f = Factor::internal(k);
        let axis = full.axis(f).unwrap();
        let x = random_hermitian(spec.internal_dim(k), &mut normal);
        h += embed_local(&full, axis, &x);
        for i in 0..n {
            for j in i + 1..n {
                let w: Vec<f64> = (0..l).map(|_| normal()).collect();
                let y = random_hermitian(spec.internal_dim(k), &mut normal);
                h += relational_potential(spec, &full, (i, j), &w)? * embed_local(&full, axis, &y);
            }
        }
    }
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);

    let mut sectors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for_each_index(full.dims(), |flat, multi| {
        sectors
            .entry(full.total_momentum(multi, l))
            .or_default()
            .push(flat);
    });
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    for idx in sectors.values() {
        let m = idx.len();
        let block = DMatrix::from_fn(m, m, |r, c| h[(idx[r], idx[c])]);
        let eig = block.symmetric_eigen();
        let phases = DMatrix::from_diagonal(&DVector::from_iterator(
            m,
            eig.eigenvalues
                .iter()
                .map(|&lam| C64::from_polar(1.0, -lam)),
        ));
        let ub = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        for r in 0..m {
            for c in 0..m {
                u[(idx[r], idx[c])] = ub[(r, c)];
            }
        }
    }
    LinearOperator::dense(
        spec,
        full.clone(),
        full,
        u,
        OperatorClass::UNITARY,
        format!("random-invariant(seed {seed})"),
    )
}

/// Dense momentum-basis matrix of the position-diagonal `V(q_i − q_j)`.
fn relational_potential(
    spec: &LatticeSpec,
    layout: &Layout,
    (i, j): (usize, usize),
    v: &[f64],
) -> Result<DMatrix<C64>> {
    let l = spec.sites();
    let (ai, aj) = (
        layout.axis(Factor::external(i)).unwrap(),
        layout.axis(Factor::external(j)).unwrap(),
    );
    let mut entries = DVector::zeros(layout.dim());
    for_each_index(layout.dims(), |flat, multi| {
        let r = (multi[ai] + l - multi[aj]) % l;
        entries[flat] = C64::new(v[r], 0.0);
    });
    LinearOperator::on(
        spec,
        layout.clone(),
        OperatorKind::Diagonal {
            basis: Basis::Position,
            entries,
        },
        OperatorClass::HERMITIAN,
        "relational-potential",
    )?
    .to_dense(usize::MAX)
}

fn random_hermitian(d: usize, normal: &mut impl FnMut() -> f64) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(normal(), normal()));
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// `I ⊗ … ⊗ m ⊗ … ⊗ I` with `m` on `axis`.
fn embed_local(layout: &Layout, axis: usize, m: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = layout.dim();
    let stride = layout.strides()[axis];
    let d = layout.dims()[axis];
    let mut out = DMatrix::zeros(dim, dim);
    for_each_index(layout.dims(), |col, multi| {
        let base = col - multi[axis] * stride;
        for r in 0..d {
            out[(base + r * stride, col)] = m[(r, multi[axis])];
        }
    });
    out
}

fn distinct(spec: &LatticeSpec, particles: &[usize]) -> Result<()> {
    for (n, a) in particles.iter().enumerate() {
        if particles[..n].contains(a) {
            return Err(Error::contract(format!(
                "particle `{}` used twice in one recipe",
                spec.label(*a)
            )));
        }
    }
    Ok(())
}
