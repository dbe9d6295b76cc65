use nalgebra::DVector;

use super::{check_translation_invariance, require, Pointer};
use crate::error::Result;
use crate::lattice::tensor::{contract_axis, mask};
use crate::lattice::{Factor, LinearOperator, StateKind, StateVector, C64};
use crate::reduction::reduce_amplitudes;
use crate::switching::{conditioned_switch_map, internal_switch_map, switch_map_on};
use crate::tolerance::{DEGENERATE, EXACT};

/// One outcome as seen from one perspective.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub outcome: usize,
    pub probability: f64,
    /// Normalized post-measurement state; `None` for zero-probability outcomes.
    pub post_state: Option<StateVector>,
    /// Unnormalized post-measurement state, kept for phase-exact comparisons.
    pub raw_state: StateVector,
    pub perspective: String,
    pub degenerate: bool,
}

/// All outcomes of one measurement relative to one reference.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRun {
    pub reference: String,
    pub pointer: Pointer,
    /// Whether post states still carry the pointer mode.
    pub pointer_kept: bool,
    pub records: Vec<MeasurementRecord>,
    /// The whole state has no physical component.
    pub degenerate: bool,
    /// `⟨ψ|U† δ U|ψ⟩`, the normalization of the probabilities.
    pub physical_norm_sqr: f64,
}

impl MeasurementRun {
    pub fn probabilities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.probability).collect()
    }

    pub fn record(&self, outcome: usize) -> Option<&MeasurementRecord> {
        self.records.iter().find(|r| r.outcome == outcome)
    }
}

/// General engine: evolve with `u`, constrain, reduce to `reference` keeping
/// every other mode, then condition on each pointer value.
///
/// With `keep_pointer` the pointer mode stays in the post states; otherwise
/// it is contracted away. `parallel` evaluates outcomes on scoped threads.
pub fn measure(
    state: &StateVector,
    u: &LinearOperator,
    reference: &str,
    pointer: &Pointer,
    keep_pointer: bool,
    parallel: bool,
) -> Result<MeasurementRun> {
    let spec = state.spec();
    let full = spec.kinematical_layout();
    require(
        state.kind() == &StateKind::Kinematical && state.layout() == &full,
        || "measurement needs a kinematical state on the full layout".into(),
    )?;
    state.require_momentum()?;
    require(u.domain() == &full && u.codomain() == &full, || {
        format!("`{}` must act on the full kinematical layout", u.name())
    })?;
    let defect = check_translation_invariance(u)?;
    require(defect < EXACT, || {
        format!(
            "`{}` is not translation invariant (defect {defect:.3e})",
            u.name()
        )
    })?;
    let r = spec.particle_index(reference)?;
    let pf = pointer.factor(spec)?;
    require(pf != Factor::external(r), || {
        format!("pointer {pointer} is removed by reduction to `{reference}`")
    })?;

    let evolved = u.apply_vec(state.amplitudes());
    let (red, amps) = reduce_amplitudes(spec, &full, &evolved, r);
    let total = amps.norm_squared();
    let template = state.rebuilt(
        full.clone(),
        StateKind::Kinematical,
        DVector::zeros(full.dim()),
    );
    let perspective = StateKind::Reduced(reference.to_string());
    if total.sqrt() < DEGENERATE {
        return Ok(MeasurementRun {
            reference: reference.into(),
            pointer: pointer.clone(),
            pointer_kept: keep_pointer,
            records: Vec::new(),
            degenerate: true,
            physical_norm_sqr: total,
        });
    }

    let axis = red.axis(pf).expect("pointer survives reduction");
    let out_layout = if keep_pointer {
        red.clone()
    } else {
        red.without(pf)
    };
    let record = |m: usize| -> MeasurementRecord {
        let projected = mask(&red, &amps, |multi| multi[axis] == m);
        let post: DVector<C64> = if keep_pointer {
            projected
        } else {
            let mut row = vec![C64::new(0.0, 0.0); spec.factor_dim(pf)];
            row[m] = C64::new(1.0, 0.0);
            contract_axis(&red, &projected, axis, &row)
        };
        let p = post.norm_squared() / total;
        let raw = template.rebuilt(out_layout.clone(), perspective.clone(), post);
        let degenerate = p < DEGENERATE;
        MeasurementRecord {
            outcome: m,
            probability: p,
            post_state: (!degenerate).then(|| raw.normalized()),
            raw_state: raw,
            perspective: reference.to_string(),
            degenerate,
        }
    };
    let n = spec.factor_dim(pf);
    let records = if parallel {
        std::thread::scope(|scope| {
            let record = &record;
            let handles: Vec<_> = (0..n).map(|m| scope.spawn(move || record(m))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("outcome worker panicked"))
                .collect()
        })
    } else {
        (0..n).map(record).collect()
    };
    Ok(MeasurementRun {
        reference: reference.into(),
        pointer: pointer.clone(),
        pointer_kept: keep_pointer,
        records,
        degenerate: false,
        physical_norm_sqr: total,
    })
}

/// Measurement read by an observer distinct from the apparatus: the pointer
/// mode is dropped from the post states.
pub fn measurement_pipeline(
    state: &StateVector,
    u: &LinearOperator,
    reference: &str,
    pointer: &Pointer,
) -> Result<MeasurementRun> {
    require(pointer.particle() != reference, || {
        format!("reference `{reference}` carries the pointer; use the apparatus pipeline")
    })?;
    measure(state, u, reference, pointer, false, false)
}

/// The apparatus itself is the reference and its internal mode the pointer.
pub fn apparatus_as_qrf_pipeline(
    state: &StateVector,
    u: &LinearOperator,
    apparatus: &str,
) -> Result<MeasurementRun> {
    let spec = state.spec();
    let a = spec.particle_index(apparatus)?;
    require(spec.internal_dim(a) > 1, || {
        format!("apparatus `{apparatus}` has no internal pointer")
    })?;
    measure(
        state,
        u,
        apparatus,
        &Pointer::Internal(apparatus.into()),
        false,
        false,
    )
}

/// The same measurement seen from `observer`, with the apparatus's internal
/// pointer kept in the post states.
pub fn apparatus_view(
    state: &StateVector,
    u: &LinearOperator,
    apparatus: &str,
    observer: &str,
) -> Result<MeasurementRun> {
    require(apparatus != observer, || {
        "observer must differ from the apparatus".into()
    })?;
    measure(
        state,
        u,
        observer,
        &Pointer::Internal(apparatus.into()),
        true,
        false,
    )
}

/// Carries post states to another reference with the outcome-appropriate
/// switch map; probabilities are copied unchanged.
pub fn switch_measurement_perspective(run: &MeasurementRun, to: &str) -> Result<MeasurementRun> {
    require(!run.degenerate, || "cannot switch a degenerate run".into())?;
    require(to != run.reference, || {
        "target perspective equals source".into()
    })?;
    require(to != run.pointer.particle(), || {
        format!("`{to}` carries the pointer {}", run.pointer)
    })?;
    let mut records = Vec::with_capacity(run.records.len());
    for rec in &run.records {
        require(rec.perspective == run.reference, || {
            format!(
                "record relative to `{}` inside a run relative to `{}`",
                rec.perspective, run.reference
            )
        })?;
        let raw = &rec.raw_state;
        let spec = raw.spec();
        let from = run.reference.as_str();
        let op = match (&run.pointer, run.pointer_kept) {
            (Pointer::Momentum(e), false) => {
                conditioned_switch_map(spec, from, to, e, rec.outcome)?
                    .operator()
                    .clone()
            }
            (Pointer::Internal(a), false) if a == from => {
                internal_switch_map(spec, from, to, rec.outcome)?
                    .operator()
                    .clone()
            }
            _ => switch_map_on(spec, raw.layout(), from, to, 0, None)?,
        };
        let switched = op.apply(raw)?;
        records.push(MeasurementRecord {
            outcome: rec.outcome,
            probability: rec.probability,
            post_state: rec.post_state.as_ref().map(|_| switched.normalized()),
            raw_state: switched,
            perspective: to.to_string(),
            degenerate: rec.degenerate,
        });
    }
    Ok(MeasurementRun {
        reference: to.to_string(),
        pointer: run.pointer.clone(),
        pointer_kept: run.pointer_kept
            || matches!(&run.pointer, Pointer::Internal(a) if a == &run.reference),
        records,
        degenerate: false,
        physical_norm_sqr: run.physical_norm_sqr,
    })
}
