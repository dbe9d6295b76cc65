use crate::entanglement::entanglement_entropy;
use crate::error::{Error, Result};
use crate::lattice::tensor::contract_axis;
use crate::lattice::{max_abs, tensor_state, Factor, FactorKind, LatticeSpec, StateVector, C64};
use crate::measurement::{
    kraus_switch_check, measure, order_swap_check, reduced_operator_from_kin,
    switch_measurement_perspective, wrong_projector_demo, MeasurementRun, Pointer,
};
use crate::oracle::{oracle_measurement, reduction_map, switch_matrix};
use crate::reduction::reduce_to_perspective;
use crate::switching::switch_map;

use super::report::{
    CheckResult, Criterion, EntropyRow, Normalization, PerspectiveTable, Provenance, RunReport,
    REPORT_FORMAT,
};
use super::scenario::{Check, Scenario, ScenarioConfig};

/// Validates `config` and runs it. Deterministic for a fixed config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    run(&config.validate()?)
}

/// Whether post states seen from `reference` keep the pointer mode: only
/// for an internal pointer read by someone other than its owner.
fn keeps_pointer(pointer: &Pointer, reference: &str) -> bool {
    matches!(pointer, Pointer::Internal(a) if a != reference)
}

fn explicit_name(spec: &LatticeSpec, f: Factor) -> String {
    match f.kind {
        FactorKind::External => format!("{}:ext", spec.label(f.particle)),
        FactorKind::Internal => format!("{}:int", spec.label(f.particle)),
    }
}

pub fn run(sc: &Scenario) -> Result<RunReport> {
    let cfg = &sc.config;
    let spec = &sc.spec;
    let perspectives = &cfg.measurement.perspectives;
    let runs: Vec<MeasurementRun> = perspectives
        .iter()
        .map(|r| {
            measure(
                &sc.state,
                &sc.unitary,
                r,
                &sc.pointer,
                keeps_pointer(&sc.pointer, r),
                cfg.parallel_outcomes,
            )
        })
        .collect::<Result<_>>()?;
    let degenerate = runs.iter().any(|r| r.degenerate);

    let mut report = RunReport {
        scenario: cfg.name.clone(),
        provenance: Provenance {
            config_sha256: cfg.digest(),
            seed: cfg.seed,
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            report_format: REPORT_FORMAT,
        },
        sites: spec.sites(),
        particles: spec
            .particles()
            .iter()
            .map(|p| match p.internal_dim {
                1 => p.label.clone(),
                d => format!("{}(d={d})", p.label),
            })
            .collect(),
        pointer: sc.pointer.to_string(),
        unitary: sc.unitary.name().to_string(),
        degenerate,
        perspectives: runs
            .iter()
            .map(|run| PerspectiveTable {
                reference: run.reference.clone(),
                probabilities: run.probabilities(),
                degenerate: run.records.iter().map(|r| r.degenerate).collect(),
                probability_sum: run.probabilities().iter().sum(),
            })
            .collect(),
        entropy: Vec::new(),
        normalization: Vec::new(),
        wrong_projector: None,
        checks: Vec::new(),
    };
    if degenerate {
        report.checks = cfg
            .checks
            .iter()
            .map(|c| {
                CheckResult::failed(
                    c.name(),
                    cfg.tolerances.pipeline,
                    "not evaluated: the evolved state has no physical component",
                )
            })
            .collect();
        return Ok(report);
    }
    report.entropy = entropy_table(sc, &runs);
    for &check in &cfg.checks {
        let result = evaluate(check, sc, &runs, &mut report).unwrap_or_else(|e| {
            CheckResult::failed(check.name(), cfg.tolerances.pipeline, e.to_string())
        });
        report.checks.push(result);
    }
    Ok(report)
}

fn entropy_table(sc: &Scenario, runs: &[MeasurementRun]) -> Vec<EntropyRow> {
    let mut rows = Vec::new();
    for run in runs {
        for rec in &run.records {
            for cut in &sc.config.entanglement {
                let keep: Vec<&str> = cut.keep.iter().map(String::as_str).collect();
                let entropy = rec.post_state.as_ref().and_then(|s| {
                    proper_cut(s, &keep).then(|| entanglement_entropy(s, &keep).ok())?
                });
                rows.push(EntropyRow {
                    perspective: run.reference.clone(),
                    outcome: rec.outcome,
                    keep: cut.keep.clone(),
                    entropy,
                });
            }
        }
    }
    rows
}

/// The named modes exist in `state` and leave something on the other side.
fn proper_cut(state: &StateVector, keep: &[&str]) -> bool {
    state
        .spec()
        .select(state.layout(), keep)
        .is_ok_and(|f| !f.is_empty() && f.len() < state.layout().rank())
}

/// Modes of the product initial state, split into (system, frame).
fn split_modes(sc: &Scenario, frame: &[Factor]) -> Result<(StateVector, StateVector)> {
    let modes = sc
        .modes
        .as_ref()
        .ok_or_else(|| Error::contract("needs a product initial state"))?;
    let (f, s): (Vec<StateVector>, Vec<StateVector>) = modes
        .iter()
        .cloned()
        .partition(|m| frame.contains(&m.layout().factors()[0]));
    Ok((tensor_state(&s)?, tensor_state(&f)?))
}

fn evaluate(
    check: Check,
    sc: &Scenario,
    runs: &[MeasurementRun],
    report: &mut RunReport,
) -> Result<CheckResult> {
    let cfg = &sc.config;
    let spec = &sc.spec;
    let tol = cfg.tolerances.pipeline;
    let name = check.name();
    let first = &runs[0];
    let r0 = first.reference.as_str();
    let pf = sc.pointer.factor(spec)?;
    match check {
        Check::ProbabilityPreservation => {
            let mut gap: f64 = 0.0;
            let mut sum_defect: f64 = 0.0;
            for run in runs {
                sum_defect = sum_defect.max((run.probabilities().iter().sum::<f64>() - 1.0).abs());
                for (a, b) in run.probabilities().iter().zip(first.probabilities()) {
                    gap = gap.max((a - b).abs());
                }
            }
            Ok(CheckResult::below(
                name,
                gap.max(sum_defect),
                tol,
                format!("max |Δρ| {gap:.3e}, max |Σρ − 1| {sum_defect:.3e}"),
            ))
        }
        Check::SwitchConsistency => {
            let mut worst: f64 = 0.0;
            for run in &runs[1..] {
                let switched = switch_measurement_perspective(first, &run.reference)?;
                for (a, b) in switched.records.iter().zip(&run.records) {
                    if a.degenerate != b.degenerate {
                        worst = 1.0;
                        continue;
                    }
                    if a.degenerate {
                        continue;
                    }
                    let mut image = a.raw_state.clone();
                    let target = &b.raw_state;
                    if image.layout() != target.layout() && image.layout().contains(pf) {
                        let lay = image.layout().clone();
                        let mut row = vec![C64::new(0.0, 0.0); spec.factor_dim(pf)];
                        row[a.outcome] = C64::new(1.0, 0.0);
                        let amps =
                            contract_axis(&lay, image.amplitudes(), lay.axis(pf).unwrap(), &row);
                        image = image.rebuilt(lay.without(pf), image.kind().clone(), amps);
                    }
                    worst = worst.max(1.0 - image.fidelity(target)?);
                }
            }
            Ok(CheckResult::below(
                name,
                worst,
                tol,
                format!("switched from `{r0}`; defect is 1 − fidelity"),
            ))
        }
        Check::Completeness => {
            let frame_modes = [Factor::external(spec.particle_index(r0)?), pf];
            let (_, frame) = split_modes(sc, &frame_modes)?;
            match reduced_operator_from_kin(&sc.unitary, &frame, r0, &sc.pointer) {
                Ok(rk) => {
                    report.normalization.push(Normalization {
                        reference: r0.into(),
                        n: rk.normalization,
                        physical_norm_sqr: first.physical_norm_sqr,
                    });
                    let c = rk.m.completeness_defect();
                    Ok(CheckResult::below(
                        name,
                        c.max(rk.route_defect),
                        tol,
                        format!(
                            "‖Σ M†M − I‖ {c:.3e}, Γ vs evolved basis states {:.3e}, N = {}",
                            rk.route_defect, rk.normalization
                        ),
                    ))
                }
                Err(Error::Incomplete { defect }) => Ok(CheckResult::below(
                    name,
                    defect,
                    tol,
                    "frame total-momentum distribution is not flat",
                )),
                Err(e) => Err(e),
            }
        }
        Check::KrausSwitch => {
            let a = spec.particle_index(r0)?;
            let (system, frame) = split_modes(sc, &[Factor::external(a), Factor::internal(a)])?;
            let mut worst: f64 = 0.0;
            for run in &runs[1..] {
                let rep = kraus_switch_check(&system, &frame, &sc.unitary, r0, &run.reference)?;
                worst = worst.max(rep.max_deviation);
            }
            Ok(CheckResult::below(
                name,
                worst,
                tol,
                "entrywise, normalized post states",
            ))
        }
        Check::OrderSwap => {
            let mut worst: f64 = 0.0;
            for run in runs {
                let keep = keeps_pointer(&sc.pointer, &run.reference);
                let rep =
                    order_swap_check(&sc.state, &sc.unitary, &run.reference, &sc.pointer, keep)?;
                worst = worst
                    .max(1.0 - rep.min_fidelity)
                    .max(rep.max_probability_gap);
            }
            Ok(CheckResult::below(
                name,
                worst,
                tol,
                "max of 1 − fidelity and probability gap",
            ))
        }
        Check::WrongProjector => {
            let a = spec.particle_index(r0)?;
            let (_, ext) = split_modes(sc, &[Factor::external(a)])?;
            let observer = &runs[1].reference;
            let outcome = cfg.measurement.outcome;
            let rep = wrong_projector_demo(
                &sc.state,
                &sc.unitary,
                r0,
                observer,
                ext.amplitudes(),
                outcome,
            )?;
            let rank = rep.rows[outcome].wrong_schmidt_rank;
            let gap = cfg.tolerances.wrong_projector_gap;
            let passed = rep.mismatch > gap && rep.correct_gap < tol && rank == 1;
            let result = CheckResult {
                name: name.into(),
                defect: rep.mismatch,
                tolerance: gap,
                criterion: Criterion::Above,
                passed,
                detail: format!(
                    "outcome {outcome}: correct-projector gap {:.3e}, wrong-projector Schmidt rank {rank}",
                    rep.correct_gap
                ),
            };
            report.wrong_projector = Some(rep);
            Ok(result)
        }
        Check::Entanglement => {
            let mut worst: f64 = 0.0;
            for run in runs {
                for rec in &run.records {
                    let Some(post) = &rec.post_state else {
                        continue;
                    };
                    for cut in &cfg.entanglement {
                        let keep: Vec<&str> = cut.keep.iter().map(String::as_str).collect();
                        if !proper_cut(post, &keep) {
                            continue;
                        }
                        let kept = spec.select(post.layout(), &keep)?;
                        let rest: Vec<String> = post
                            .layout()
                            .factors()
                            .iter()
                            .filter(|f| !kept.contains(f))
                            .map(|f| explicit_name(spec, *f))
                            .collect();
                        let rest: Vec<&str> = rest.iter().map(String::as_str).collect();
                        let s = entanglement_entropy(post, &keep)?;
                        let t = entanglement_entropy(post, &rest)?;
                        worst = worst.max((s - t).abs());
                    }
                }
            }
            Ok(CheckResult::below(
                name,
                worst,
                tol,
                "entropy asymmetry across each cut",
            ))
        }
        Check::Oracle => {
            let cap = cfg.tolerances.max_dimension;
            let mut worst: f64 = 0.0;
            for run in runs {
                let r = run.reference.as_str();
                let keep = keeps_pointer(&sc.pointer, r);
                let table = oracle_measurement(&sc.state, &sc.unitary, r, &sc.pointer, keep, cap)?;
                for rec in &run.records {
                    let o = &table.outcomes[rec.outcome];
                    worst = worst.max((rec.probability - o.probability).abs());
                    worst = worst.max(max_abs(
                        (rec.raw_state.amplitudes() - table.raw_vector(rec.outcome)).iter(),
                    ));
                }
                let dense = reduction_map(spec, r, cap)? * sc.state.amplitudes();
                let structured = reduce_to_perspective(&sc.state, r)?;
                worst = worst.max(max_abs((dense - structured.amplitudes()).iter()));
                if r != r0 {
                    let dense = switch_matrix(spec, r0, r, cap)?;
                    let structured = switch_map(spec, r0, r)?.operator().to_dense(cap)?;
                    worst = worst.max(max_abs((dense - structured).iter()));
                }
            }
            Ok(CheckResult::below(
                name,
                worst,
                tol,
                "probabilities, post states, reductions and switch maps against dense twins",
            ))
        }
    }
}
