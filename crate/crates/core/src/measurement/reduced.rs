use nalgebra::{DMatrix, DVector};

use super::{require, KrausSet, KrausSpace, Pointer, Split};
use crate::error::{Error, Result};
use crate::lattice::tensor::{contract_axis, mask};
use crate::lattice::{max_abs, Factor, LinearOperator, StateKind, StateVector, C64};
use crate::reduction::reduce_amplitudes;
use crate::tolerance::PIPELINE;

/// Reduced-space Kraus operators for a product initial state `φ ⊗ c`, where
/// `c` lives on the frame modes (reference external mode and pointer).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedKraus {
    /// `Γ_m`, read directly off the constraint surface of `U`.
    pub gamma: KrausSet,
    /// `M_m = Γ_m / √N`.
    pub m: KrausSet,
    /// `N`, with `Σ_m Γ_m† Γ_m = N·I`.
    pub normalization: f64,
    /// Largest entrywise gap between `Γ_m` and the same operators obtained by
    /// running basis states through evolution, constraint and reduction.
    pub route_defect: f64,
}

/// Builds `Γ_m` and `M_m` for measuring `pointer` relative to `reference`,
/// when the initial state is `φ ⊗ frame` with `frame` on exactly the
/// reference's external mode and the pointer mode.
///
/// `Σ_m Γ_m†Γ_m` is diagonal in total momentum with entries given by the
/// frame's total-momentum distribution, so the family is only proportional
/// to the identity when that distribution is flat. Otherwise
/// [`Error::Incomplete`] is returned.
pub fn reduced_operator_from_kin(
    u: &LinearOperator,
    frame: &StateVector,
    reference: &str,
    pointer: &Pointer,
) -> Result<ReducedKraus> {
    let spec = u.spec();
    let full = spec.kinematical_layout();
    let l = spec.sites();
    require(u.domain() == &full && u.codomain() == &full, || {
        format!("`{}` must act on the full kinematical layout", u.name())
    })?;
    let r = spec.particle_index(reference)?;
    let pf = pointer.factor(spec)?;
    let rf = Factor::external(r);
    require(pf != rf, || {
        "pointer cannot be the reference's external mode".into()
    })?;
    let frame_layout = crate::lattice::Layout::new(spec, vec![rf, pf]);
    require(frame.layout() == &frame_layout, || {
        format!(
            "frame state must live on exactly {}, got {}",
            frame_layout.describe(spec),
            frame.layout().describe(spec)
        )
    })?;
    frame.require_momentum()?;
    let split = Split::new(spec, &full, &[rf, pf])?;
    let (ns, nf) = (split.sys.dim(), split.ptr.dim());
    let outcomes = spec.factor_dim(pf);
    let c = frame.amplitudes();

    // Γ route: entries of the dense unitary on the constraint slice.
    let dense = u.to_dense(usize::MAX)?;
    let rax = split.ptr.axis(rf).expect("frame holds reference");
    let pax = split.ptr.axis(pf).expect("frame holds pointer");
    let sys_k: Vec<usize> = (0..ns)
        .map(|s| split.sys.total_momentum(&split.sys.multi_index(s), l))
        .collect();
    let mut gamma = vec![DMatrix::zeros(ns, ns); outcomes];
    let mut fmulti = vec![0usize; 2];
    for (m, g) in gamma.iter_mut().enumerate() {
        for s_out in 0..ns {
            fmulti[pax] = m;
            fmulti[rax] = (2 * l - sys_k[s_out] - pointer.momentum_of(m)) % l;
            let row = split.join(s_out, split.ptr.flat_index(&fmulti));
            for s_in in 0..ns {
                let mut acc = C64::new(0.0, 0.0);
                for f_in in 0..nf {
                    acc += dense[(row, split.join(s_in, f_in))] * c[f_in];
                }
                g[(s_out, s_in)] = acc;
            }
        }
    }

    // Λ route: structured evolution, pointer projection, constraint and
    // reduction of every system basis state, one outcome at a time.
    let red = full.without(rf);
    let red_ptr_axis = red.axis(pf).expect("pointer survives reduction");
    let full_ptr_axis = full.axis(pf).expect("pointer in full layout");
    let mut route_defect: f64 = 0.0;
    let mut input = DVector::zeros(full.dim());
    for s_in in 0..ns {
        input.fill(C64::new(0.0, 0.0));
        for f_in in 0..nf {
            input[split.join(s_in, f_in)] = c[f_in];
        }
        let evolved = u.apply_vec(&input);
        for (m, g) in gamma.iter().enumerate() {
            let projected = mask(&full, &evolved, |multi| multi[full_ptr_axis] == m);
            let (_, reduced) = reduce_amplitudes(spec, &full, &projected, r);
            let mut row = vec![C64::new(0.0, 0.0); outcomes];
            row[m] = C64::new(1.0, 0.0);
            let col = contract_axis(&red, &reduced, red_ptr_axis, &row);
            route_defect = route_defect.max(max_abs((col - g.column(s_in)).iter()));
        }
    }

    let gram = gamma
        .iter()
        .fold(DMatrix::zeros(ns, ns), |acc: DMatrix<C64>, g| {
            acc + g.adjoint() * g
        });
    let n = (0..ns).map(|i| gram[(i, i)].re).sum::<f64>() / ns as f64;
    let defect = max_abs((&gram - DMatrix::identity(ns, ns) * C64::new(n, 0.0)).iter());
    if n <= 0.0 || defect > PIPELINE {
        return Err(Error::Incomplete { defect });
    }
    let scale = C64::new(1.0 / n.sqrt(), 0.0);
    let ms: Vec<DMatrix<C64>> = gamma.iter().map(|g| g * scale).collect();
    let make = |space, ops, norm| KrausSet {
        spec: spec.clone(),
        space,
        pointer: vec![rf, pf],
        system: split.sys.clone(),
        outcomes: (0..outcomes).collect(),
        outcome_states: None,
        operators: ops,
        normalization: norm,
    };
    Ok(ReducedKraus {
        gamma: make(KrausSpace::KinematicalPair, gamma, None),
        m: make(KrausSpace::Reduced(reference.to_string()), ms, Some(n)),
        normalization: n,
        route_defect,
    })
}

impl ReducedKraus {
    /// `M_m φ` as a state reduced to the set's reference.
    pub fn apply(&self, m: usize, phi: &StateVector) -> Result<StateVector> {
        let KrausSpace::Reduced(reference) = &self.m.space else {
            unreachable!("m is always reduced")
        };
        require(phi.layout() == &self.m.system, || {
            format!(
                "state lives on {}, Kraus operators on {}",
                phi.layout().describe(phi.spec()),
                self.m.system.describe(phi.spec())
            )
        })?;
        phi.require_momentum()?;
        let amps = &self.m.operators[m] * phi.amplitudes();
        Ok(phi.rebuilt(
            phi.layout().clone(),
            StateKind::Reduced(reference.clone()),
            amps,
        ))
    }
}
