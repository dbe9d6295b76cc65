//! One PASS/FAIL line per acceptance criterion. Every criterion is evaluated
//! even when an earlier one fails; the process exits non-zero if any did.
//! Runs without the libtest harness so the lines are always printed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DVector;
use qrframe::cli::{preset, run_scenario, Check, PRESETS};
use qrframe::lattice::{
    internal_eigenstate, mode_state, momentum_eigenstate, position_eigenstate, tensor_state,
    to_basis,
};
use qrframe::measurement::{
    kraus_switch_check, measure, order_swap_check, reduced_operator_from_kin, Pointer,
};
use qrframe::oracle::constraint_projector;
use qrframe::recipes::{controlled_internal_shift, momentum_transfer, random_invariant};
use qrframe::reduction::reduce_to_perspective;
use qrframe::switching::switch_map;
use qrframe::{
    Basis, Factor, LatticeSpec, LinearOperator, ParticleSpec, StateKind, StateVector, C64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn momentum(s: StateVector) -> StateVector {
    to_basis(&s, Basis::Momentum).expect("basis change")
}

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

fn random_mode(spec: &LatticeSpec, factor: Factor, rng: &mut ChaCha8Rng) -> StateVector {
    use rand_distr::{Distribution, StandardNormal};
    let n = spec.factor_dim(factor);
    let v = DVector::from_fn(n, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let norm = v.norm();
    mode_state(spec, factor, v / C64::new(norm, 0.0)).unwrap()
}

fn c1_probability_preservation() -> Outcome {
    let spec = LatticeSpec::external_only(4, &["A", "B", "C", "E"]).map_err(fail)?;
    let pointer = Pointer::Momentum("E".into());
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = StateVector::random(
            &spec,
            spec.kinematical_layout(),
            StateKind::Kinematical,
            &mut rng,
        );
        let u = random_invariant(&spec, 1000 + seed, 1.0, 4096).map_err(fail)?;
        let a = measure(&state, &u, "A", &pointer, false, false).map_err(fail)?;
        let c = measure(&state, &u, "C", &pointer, false, false).map_err(fail)?;
        for (x, y) in a.probabilities().iter().zip(c.probabilities()) {
            worst = worst.max((x - y).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max |ρ_A − ρ_C| = {worst:.3e} over 100 scenarios in {secs:.1} s");
    if worst < 1e-10 && secs < 30.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c2_completeness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for l in 2..=4 {
        // Internal pointer on C, frame = C's external and internal modes.
        let spec = abc(l, 2);
        let frame = tensor_state(&[
            momentum(position_eigenstate(&spec, "C", 0).map_err(fail)?),
            internal_eigenstate(&spec, "C", 0).map_err(fail)?,
        ])
        .map_err(fail)?;
        let pointer = Pointer::Internal("C".into());
        let mut us: Vec<LinearOperator> =
            vec![controlled_internal_shift(&spec, ("A", "B"), "C", 1).map_err(fail)?];
        for seed in 0..3 {
            us.push(random_invariant(&spec, seed, 1.0, 4096).map_err(fail)?);
        }
        for u in &us {
            let rk = reduced_operator_from_kin(u, &frame, "C", &pointer).map_err(fail)?;
            worst = worst.max(rk.m.completeness_defect()).max(rk.route_defect);
            count += 1;
        }

        // Momentum pointer on E, frame = C's external mode and E.
        let spec = LatticeSpec::external_only(l, &["A", "B", "C", "E"]).map_err(fail)?;
        let frame = tensor_state(&[
            momentum(position_eigenstate(&spec, "C", 0).map_err(fail)?),
            momentum_eigenstate(&spec, "E", 0).map_err(fail)?,
        ])
        .map_err(fail)?;
        let pointer = Pointer::Momentum("E".into());
        let mut us: Vec<LinearOperator> =
            vec![momentum_transfer(&spec, "B", "E", "A").map_err(fail)?];
        for seed in 0..3 {
            us.push(random_invariant(&spec, 10 + seed, 1.0, 4096).map_err(fail)?);
        }
        for u in &us {
            let rk = reduced_operator_from_kin(u, &frame, "C", &pointer).map_err(fail)?;
            worst = worst.max(rk.m.completeness_defect()).max(rk.route_defect);
            count += 1;
        }
    }
    for (name, _) in PRESETS {
        let report = run_scenario(&preset(name).map_err(fail)?).map_err(fail)?;
        if let Some(c) = report
            .checks
            .iter()
            .find(|c| c.name == Check::Completeness.name())
        {
            worst = worst.max(c.defect);
            count += 1;
        }
    }
    let msg = format!("max ‖Σ M†M − I‖ = {worst:.3e} over {count} pipelines at L ≤ 4");
    if worst < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3_switch_consistency() -> Outcome {
    let spec = abc(3, 2);
    let s_ac = switch_map(&spec, "A", "C").map_err(fail)?;
    let s_ca = switch_map(&spec, "C", "A").map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_fid: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    for _ in 0..100 {
        let psi = StateVector::random_physical(&spec, &mut rng);
        let a = reduce_to_perspective(&psi, "A").map_err(fail)?;
        let c = reduce_to_perspective(&psi, "C").map_err(fail)?;
        let switched = s_ac.apply(&a).map_err(fail)?;
        worst_fid = worst_fid.max(1.0 - switched.fidelity(&c).map_err(fail)?);
        let back = s_ca.apply(&switched).map_err(fail)?;
        worst_round = worst_round.max(back.max_deviation(&a).map_err(fail)?);
    }
    let msg = format!("max 1 − F = {worst_fid:.3e}, round trip {worst_round:.3e} over 100 states");
    if worst_fid <= 1e-10 && worst_round < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c4_kraus_switch() -> Outcome {
    let mut worst: f64 = 0.0;
    let cfg = preset("apparatus-frame").map_err(fail)?;
    let sc = cfg.validate().map_err(fail)?;
    let modes = sc.modes.clone().ok_or("preset is not a product state")?;
    let c = sc.spec.particle_index("C").map_err(fail)?;
    let is_frame = |m: &StateVector| m.layout().factors()[0].particle == c;
    let frame = tensor_state(
        &modes
            .iter()
            .filter(|m| is_frame(m))
            .cloned()
            .collect::<Vec<_>>(),
    )
    .map_err(fail)?;
    let system = tensor_state(
        &modes
            .iter()
            .filter(|m| !is_frame(m))
            .cloned()
            .collect::<Vec<_>>(),
    )
    .map_err(fail)?;
    worst = worst.max(
        kraus_switch_check(&system, &frame, &sc.unitary, "C", "A")
            .map_err(fail)?
            .max_deviation,
    );

    let spec = sc.spec.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for variant in 0..20u64 {
        let system = tensor_state(&[
            random_mode(&spec, Factor::external(0), &mut rng),
            random_mode(&spec, Factor::external(1), &mut rng),
        ])
        .map_err(fail)?;
        let u = if variant % 2 == 0 {
            random_invariant(&spec, variant, 1.0, 4096).map_err(fail)?
        } else {
            sc.unitary.clone()
        };
        let rep = kraus_switch_check(&system, &frame, &u, "C", "A").map_err(fail)?;
        worst = worst.max(rep.max_deviation);
    }
    let msg = format!(
        "max entrywise deviation {worst:.3e} on the apparatus-frame preset and 20 variants"
    );
    if worst < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c5_slice_formula() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut states = 0;
    for l in 2..=4usize {
        for names in [&["A", "B", "C"][..], &["A", "B", "C", "D"][..]] {
            if names.len() == 4 && l == 4 {
                continue;
            }
            let spec = LatticeSpec::external_only(l, names).map_err(fail)?;
            let dim = l.pow(names.len() as u32);
            for flat in 0..dim {
                let mut v = DVector::zeros(dim);
                v[flat] = C64::new(1.0, 0.0);
                let psi = StateVector::kinematical(&spec, v.clone()).map_err(fail)?;
                let red = reduce_to_perspective(&psi, "A").map_err(fail)?;
                for (i, amp) in red.amplitudes().iter().enumerate() {
                    // Row-major digits of the reduced index are (k_B, k_C, ...).
                    let mut rest = Vec::new();
                    let mut x = i;
                    for _ in 1..names.len() {
                        rest.push(x % l);
                        x /= l;
                    }
                    rest.reverse();
                    let sum: usize = rest.iter().sum();
                    let ka = (l * names.len() - sum) % l;
                    let full = rest.iter().fold(ka, |acc, k| acc * l + k);
                    worst = worst.max((amp - v[full]).norm());
                }
                states += 1;
            }
        }
    }
    let msg = format!("max |ψ_red − ψ(−Σk, …)| = {worst:.3e} over {states} basis states");
    if worst < 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c6_norm_bridge() -> Outcome {
    let spec = abc(4, 2);
    let layout = spec.kinematical_layout();
    let delta = constraint_projector(&spec, &layout, 4096).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let psi = StateVector::random(&spec, layout.clone(), StateKind::Kinematical, &mut rng);
        let lhs = reduce_to_perspective(&psi, "B").map_err(fail)?.norm_sqr();
        let rhs = psi.amplitudes().dotc(&(&delta * psi.amplitudes())).re;
        worst = worst.max((lhs - rhs).abs());
    }
    let msg = format!("max |‖reduce ψ‖² − ⟨ψ|δ|ψ⟩| = {worst:.3e} over 100 states");
    if worst < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7_entanglement() -> Outcome {
    let report = run_scenario(&preset("frame-entanglement").map_err(fail)?).map_err(fail)?;
    let keep = vec!["B".to_string()];
    let column = |r: &str| -> Vec<Option<f64>> {
        report
            .entropy
            .iter()
            .filter(|e| e.perspective == r && e.keep == keep)
            .map(|e| e.entropy)
            .collect()
    };
    let (c, a) = (column("C"), column("A"));
    if c.is_empty() || a.is_empty() {
        return Err("entropy table lacks the B cut".into());
    }
    let c_max = c.iter().flatten().fold(0.0f64, |m, x| m.max(*x));
    let a_min = a.iter().flatten().fold(f64::INFINITY, |m, x| m.min(*x));
    let msg = format!("S_C(B) ≤ {c_max:.3e}, S_A(B) ≥ {a_min:.4} nats");
    if c_max < 1e-10 && a_min > 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_wrong_projector() -> Outcome {
    let report = run_scenario(&preset("wrong-projector").map_err(fail)?).map_err(fail)?;
    let w = report
        .wrong_projector
        .ok_or("no wrong-projector section in the report")?;
    let max_rank = w
        .rows
        .iter()
        .map(|r| r.wrong_schmidt_rank)
        .max()
        .unwrap_or(0);
    let msg = format!(
        "|ρ' − ρ_C| = {:.3e}, |ρ_A − ρ_C| = {:.3e}, Schmidt rank {max_rank}",
        w.mismatch, w.correct_gap
    );
    if w.mismatch > 1e-3 && w.correct_gap < 1e-10 && max_rank == 1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_order_swap() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (name, _) in PRESETS {
        let sc = preset(name).and_then(|c| c.validate()).map_err(fail)?;
        for r in &sc.config.measurement.perspectives {
            let keep = matches!(&sc.pointer, Pointer::Internal(p) if p != r);
            let rep =
                order_swap_check(&sc.state, &sc.unitary, r, &sc.pointer, keep).map_err(fail)?;
            worst = worst
                .max(1.0 - rep.min_fidelity)
                .max(rep.max_probability_gap);
            runs += 1;
        }
    }
    let msg = format!("max defect {worst:.3e} over {runs} preset perspectives");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c10_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut seen = Vec::new();
    for (name, _) in PRESETS.iter().filter(|(n, _)| n.starts_with("small-")) {
        let report = run_scenario(&preset(name).map_err(fail)?).map_err(fail)?;
        let c = report
            .checks
            .iter()
            .find(|c| c.name == Check::Oracle.name())
            .ok_or_else(|| format!("{name} does not request the oracle check"))?;
        worst = worst.max(c.defect);
        seen.push((report.sites, report.particles.len()));
    }
    seen.sort();
    let expected = vec![(2, 3), (2, 4), (3, 3), (3, 4)];
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max oracle gap {worst:.3e} on (L, N) = {seen:?} in {secs:.1} s");
    if worst < 1e-10 && seen == expected {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qrframe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn c11_cli_determinism() -> Outcome {
    let verify = run_bin(&["verify"]);
    let code = verify.status.code();
    if code != Some(0) {
        return Err(format!(
            "verify exited with {code:?}:\n{}",
            String::from_utf8_lossy(&verify.stdout)
        ));
    }
    let tmp = tempfile::tempdir().map_err(fail)?;
    let mut compared = 0;
    for (name, _) in PRESETS {
        for format in ["json", "csv"] {
            let mut outputs = Vec::new();
            for round in ["one", "two"] {
                let dir = tmp.path().join(format!("{name}-{format}-{round}"));
                let out = run_bin(&[
                    "run",
                    &format!("preset:{name}"),
                    "--seed",
                    "7",
                    "--format",
                    format,
                    "--output",
                    dir.to_str().unwrap(),
                ]);
                if out.status.code() != Some(0) {
                    return Err(format!("{name} exited with {:?}", out.status.code()));
                }
                outputs.push(read_dir_bytes(&dir)?);
            }
            if outputs[0] != outputs[1] {
                return Err(format!("{name} ({format}) differs between runs"));
            }
            compared += 1;
        }
    }
    Ok(format!(
        "verify exit 0; {compared} preset/format pairs byte-identical"
    ))
}

fn read_dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(fail)?
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn main() {
    let start = Instant::now();
    let criteria: [Criterion; 11] = [
        ("1 probability preservation", c1_probability_preservation),
        ("2 completeness", c2_completeness),
        ("3 switch-map consistency", c3_switch_consistency),
        ("4 Kraus operator switch", c4_kraus_switch),
        ("5 reduction slice formula", c5_slice_formula),
        ("6 norm bridge", c6_norm_bridge),
        ("7 perspective-dependent entanglement", c7_entanglement),
        ("8 wrong projector", c8_wrong_projector),
        ("9 order swap", c9_order_swap),
        ("10 oracle equivalence", c10_oracle),
        ("11 CLI determinism", c11_cli_determinism),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        match f() {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                println!("FAIL  {name}: {msg}");
                failed.push(name);
            }
        }
    }
    println!(
        "acceptance suite finished in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
