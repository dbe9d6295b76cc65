use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{apparatus_as_qrf_pipeline, apparatus_view, measure, require, Pointer};
use crate::entanglement::schmidt_rank;
use crate::error::Result;
use crate::lattice::tensor::{contract_axis, mask};
use crate::lattice::{Factor, Layout, LinearOperator, StateKind, StateVector, C64};
use crate::reduction::reduce_amplitudes;
use crate::tolerance::{DEGENERATE, PIPELINE};

/// Projection-then-reduction against reduction-then-projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSwapReport {
    pub reference: String,
    pub pointer: String,
    /// Per outcome; `None` where both orders give a zero state.
    pub fidelities: Vec<Option<f64>>,
    pub min_fidelity: f64,
    pub max_probability_gap: f64,
    pub passed: bool,
}

/// Compares the two orders of pointer projection and reduction. The pointer
/// projector acts on a single mode, so it is untouched by the reduction as
/// long as that mode is not the reference's external one.
pub fn order_swap_check(
    state: &StateVector,
    u: &LinearOperator,
    reference: &str,
    pointer: &Pointer,
    keep_pointer: bool,
) -> Result<OrderSwapReport> {
    let spec = state.spec();
    let reduced_first = measure(state, u, reference, pointer, keep_pointer, false)?;
    let full = spec.kinematical_layout();
    let r = spec.particle_index(reference)?;
    let pf = pointer.factor(spec)?;
    let n = spec.factor_dim(pf);
    let evolved = u.apply_vec(state.amplitudes());
    let full_axis = full.axis(pf).expect("pointer in full layout");

    let mut projected_first = Vec::with_capacity(n);
    for m in 0..n {
        let p = mask(&full, &evolved, |multi| multi[full_axis] == m);
        let (red, amps) = reduce_amplitudes(spec, &full, &p, r);
        let amps = if keep_pointer {
            amps
        } else {
            let mut row = vec![C64::new(0.0, 0.0); n];
            row[m] = C64::new(1.0, 0.0);
            contract_axis(&red, &amps, red.axis(pf).unwrap(), &row)
        };
        projected_first.push(amps);
    }
    let total: f64 = projected_first.iter().map(|a| a.norm_squared()).sum();

    let mut fidelities = Vec::with_capacity(n);
    let mut gap: f64 = 0.0;
    let mut min_fid: f64 = 1.0;
    for (m, a) in projected_first.iter().enumerate() {
        let p_first = if total > 0.0 {
            a.norm_squared() / total
        } else {
            0.0
        };
        let b = reduced_first
            .record(m)
            .map(|r| r.raw_state.amplitudes().clone())
            .unwrap_or_else(|| DVector::zeros(a.len()));
        let p_second = reduced_first.record(m).map_or(0.0, |r| r.probability);
        gap = gap.max((p_first - p_second).abs());
        let (na, nb) = (a.norm(), b.norm());
        if na < DEGENERATE && nb < DEGENERATE {
            fidelities.push(None);
            continue;
        }
        let f = if na < DEGENERATE || nb < DEGENERATE {
            0.0
        } else {
            a.dotc(&b).norm_sqr() / (na * na * nb * nb)
        };
        min_fid = min_fid.min(f);
        fidelities.push(Some(f));
    }
    Ok(OrderSwapReport {
        reference: reference.to_string(),
        pointer: pointer.to_string(),
        fidelities,
        min_fidelity: min_fid,
        max_probability_gap: gap,
        passed: min_fid >= 1.0 - PIPELINE && gap < PIPELINE,
    })
}

/// One outcome row of [`WrongProjectorReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrongProjectorRow {
    pub outcome: usize,
    /// Probability relative to the apparatus.
    pub rho_apparatus: f64,
    /// Observer's probability with the pointer projector `|σ_n⟩⟨σ_n|`.
    pub rho_observer: f64,
    /// Observer's probability with the projector onto the full apparatus
    /// state `|σ_n⟩ ⊗ |profile⟩`.
    pub rho_observer_wrong: f64,
    /// Schmidt rank of the wrong-projector post state across apparatus | rest.
    pub wrong_schmidt_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrongProjectorReport {
    pub apparatus: String,
    pub observer: String,
    pub rows: Vec<WrongProjectorRow>,
    /// Outcome at which the mismatch is assessed.
    pub outcome: usize,
    /// `|ρ'_n(observer) − ρ_n(apparatus)|` at `outcome`.
    pub mismatch: f64,
    /// `max_n |ρ_n(observer) − ρ_n(apparatus)|` with the correct projector.
    pub correct_gap: f64,
}

/// Projects the observer's reduced state with the wrong projector
/// `|φ_n⟩⟨φ_n|`, `φ_n = |σ_n⟩ ⊗ profile` on both apparatus modes, next to the
/// correct pointer projector and the apparatus's own probabilities.
///
/// `profile` is the apparatus external wave function in the momentum basis.
pub fn wrong_projector_demo(
    state: &StateVector,
    u: &LinearOperator,
    apparatus: &str,
    observer: &str,
    profile: &DVector<C64>,
    outcome: usize,
) -> Result<WrongProjectorReport> {
    let spec = state.spec();
    let a = spec.particle_index(apparatus)?;
    let o = spec.particle_index(observer)?;
    let d = spec.internal_dim(a);
    let l = spec.sites();
    require(profile.len() == l, || {
        format!("profile has length {}, need {l}", profile.len())
    })?;
    require(profile.norm() > DEGENERATE, || "profile vanishes".into())?;
    require(outcome < d, || {
        format!("outcome {outcome} out of range for dimension {d}")
    })?;
    let profile = profile / C64::new(profile.norm(), 0.0);

    let own = apparatus_as_qrf_pipeline(state, u, apparatus)?;
    let view = apparatus_view(state, u, apparatus, observer)?;
    require(!own.degenerate && !view.degenerate, || {
        "degenerate scenario".into()
    })?;

    let full = spec.kinematical_layout();
    let evolved = u.apply_vec(state.amplitudes());
    let (red, amps) = reduce_amplitudes(spec, &full, &evolved, o);
    let total = amps.norm_squared();
    let app_layout = Layout::new(spec, vec![Factor::internal(a), Factor::external(a)]);
    let ia = red
        .axis(Factor::internal(a))
        .expect("apparatus internal mode");
    let rest = red.without(Factor::internal(a));
    let ea = rest
        .axis(Factor::external(a))
        .expect("apparatus external mode");
    let rest = rest.without(Factor::external(a));

    let mut rows = Vec::with_capacity(d);
    for n in 0..d {
        // ⟨φ_n| on (σ, k) is ⟨σ_n| ⊗ ⟨profile|.
        let mut row_sigma = vec![C64::new(0.0, 0.0); d];
        row_sigma[n] = C64::new(1.0, 0.0);
        let row_k: Vec<C64> = profile.iter().map(|x| x.conj()).collect();
        let chi = contract_axis(&red, &amps, ia, &row_sigma);
        let chi = contract_axis(&red.without(Factor::internal(a)), &chi, ea, &row_k);
        let rho_wrong = chi.norm_squared() / total;

        // Post state χ' ⊗ φ_n on the observer's reduced layout.
        let mut phi_n = DVector::zeros(app_layout.dim());
        for k in 0..l {
            phi_n[n * l + k] = profile[k];
        }
        let mut post = DVector::zeros(red.dim());
        let rest_axes: Vec<usize> = rest
            .factors()
            .iter()
            .map(|f| red.axis(*f).unwrap())
            .collect();
        let ka = red.axis(Factor::external(a)).unwrap();
        crate::lattice::for_each_index(red.dims(), |flat, multi| {
            let ri: Vec<usize> = rest_axes.iter().map(|&x| multi[x]).collect();
            let ai = multi[ia] * l + multi[ka];
            post[flat] = chi[rest.flat_index(&ri)] * phi_n[ai];
        });
        let post_state = state.rebuilt(red.clone(), StateKind::Reduced(observer.into()), post);
        let rank = if rho_wrong > DEGENERATE {
            schmidt_rank(&post_state, &[apparatus], PIPELINE)?
        } else {
            0
        };
        rows.push(WrongProjectorRow {
            outcome: n,
            rho_apparatus: own.records[n].probability,
            rho_observer: view.records[n].probability,
            rho_observer_wrong: rho_wrong,
            wrong_schmidt_rank: rank,
        });
    }
    let correct_gap = rows
        .iter()
        .map(|r| (r.rho_observer - r.rho_apparatus).abs())
        .fold(0.0, f64::max);
    let mismatch = (rows[outcome].rho_observer_wrong - rows[outcome].rho_apparatus).abs();
    Ok(WrongProjectorReport {
        apparatus: apparatus.into(),
        observer: observer.into(),
        rows,
        outcome,
        mismatch,
        correct_gap,
    })
}

/// Kraus-level switch identity for an apparatus that is its own frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausSwitchReport {
    pub apparatus: String,
    pub observer: String,
    pub normalization: f64,
    pub completeness_defect: f64,
    /// Largest entrywise gap, over outcomes, between the normalized
    /// `Ŝ_n M_n φ` and the observer's post state.
    pub max_deviation: f64,
}

/// Runs `φ` through `M_n` (relative to the apparatus), carries the result to
/// `observer` with the internal-label switch `Ŝ_n`, and compares entrywise
/// with the observer's own post state for the initial state `φ ⊗ frame`.
///
/// `frame` lives on the apparatus's external and internal modes, `system` on
/// every other mode.
pub fn kraus_switch_check(
    system: &StateVector,
    frame: &StateVector,
    u: &LinearOperator,
    apparatus: &str,
    observer: &str,
) -> Result<KrausSwitchReport> {
    let spec = system.spec();
    let pointer = Pointer::Internal(apparatus.into());
    let rk = super::reduced_operator_from_kin(u, frame, apparatus, &pointer)?;
    let state = crate::lattice::tensor_state(&[system.clone(), frame.clone()])?;
    let view = apparatus_view(&state, u, apparatus, observer)?;
    require(!view.degenerate, || "degenerate scenario".into())?;
    let phi = system.rebuilt(
        system.layout().clone(),
        StateKind::Reduced(apparatus.into()),
        system.amplitudes().clone(),
    );
    let mut worst: f64 = 0.0;
    for rec in &view.records {
        let switch = crate::switching::internal_switch_map(spec, apparatus, observer, rec.outcome)?;
        let image = switch.apply(&rk.apply(rec.outcome, &phi)?)?;
        match &rec.post_state {
            Some(post) => worst = worst.max(image.normalized().max_deviation(post)?),
            None => worst = worst.max(image.norm()),
        }
    }
    Ok(KrausSwitchReport {
        apparatus: apparatus.into(),
        observer: observer.into(),
        normalization: rk.normalization,
        completeness_defect: rk.m.completeness_defect(),
        max_deviation: worst,
    })
}
