//! Momentum/position bases of the external modes and the Weyl relation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::tensor::apply_axis;
use super::{Basis, Factor, LatticeSpec, Layout, StateKind, StateVector, C64};
use crate::error::{Error, Result};

/// `F[q][k] = ⟨q|k⟩ = exp(2πi qk/L) / √L`.
pub fn dft_matrix(sites: usize) -> DMatrix<C64> {
    let norm = 1.0 / (sites as f64).sqrt();
    DMatrix::from_fn(sites, sites, |q, k| {
        C64::from_polar(norm, 2.0 * PI * ((q * k) % sites) as f64 / sites as f64)
    })
}

/// Signed representative of `k` in `(-L/2, L/2]`.
pub fn folded_momentum(k: usize, sites: usize) -> i64 {
    let k = k % sites;
    if 2 * k <= sites {
        k as i64
    } else {
        k as i64 - sites as i64
    }
}

fn single_mode(
    spec: &LatticeSpec,
    factor: Factor,
    basis: Basis,
    index: usize,
    what: &'static str,
) -> Result<StateVector> {
    let dim = spec.factor_dim(factor);
    if index >= dim {
        return Err(Error::Range {
            what,
            value: index as i64,
            bound: dim,
        });
    }
    let mut amps = DVector::zeros(dim);
    amps[index] = C64::new(1.0, 0.0);
    let mut bases = vec![Basis::Momentum; spec.len()];
    bases[factor.particle] = basis;
    StateVector::new(
        spec,
        Layout::new(spec, vec![factor]),
        bases,
        StateKind::Kinematical,
        amps,
    )
}

/// `|k⟩` on the external mode of `particle`.
pub fn momentum_eigenstate(spec: &LatticeSpec, particle: &str, k: usize) -> Result<StateVector> {
    single_mode(
        spec,
        spec.external(particle)?,
        Basis::Momentum,
        k,
        "momentum index",
    )
}

/// `|q⟩` on the external mode of `particle`, tagged with the position basis.
pub fn position_eigenstate(spec: &LatticeSpec, particle: &str, q: usize) -> Result<StateVector> {
    single_mode(
        spec,
        spec.external(particle)?,
        Basis::Position,
        q,
        "position index",
    )
}

/// `|σ⟩` on the internal mode of `particle`.
pub fn internal_eigenstate(
    spec: &LatticeSpec,
    particle: &str,
    sigma: usize,
) -> Result<StateVector> {
    single_mode(
        spec,
        spec.internal(particle)?,
        Basis::Momentum,
        sigma,
        "internal label",
    )
}

/// Single-mode state with the given amplitudes (momentum basis for external modes).
pub fn mode_state(
    spec: &LatticeSpec,
    factor: Factor,
    amplitudes: DVector<C64>,
) -> Result<StateVector> {
    StateVector::momentum(
        spec,
        Layout::new(spec, vec![factor]),
        StateKind::Kinematical,
        amplitudes,
    )
}

/// Changes the representation of one particle's external mode.
pub fn dft_basis_change(state: &StateVector, particle: &str, to: Basis) -> Result<StateVector> {
    let spec = state.spec();
    let p = spec.particle_index(particle)?;
    let axis = state
        .layout()
        .axis(Factor::external(p))
        .ok_or_else(|| Error::contract(format!("state has no external mode for `{particle}`")))?;
    if state.basis(p) == to {
        return Err(Error::contract(format!(
            "particle `{particle}` is already in the {to} basis"
        )));
    }
    let f = dft_matrix(spec.sites());
    let m = match to {
        Basis::Position => f,
        Basis::Momentum => f.adjoint(),
    };
    let amps = apply_axis(state.layout(), state.amplitudes(), axis, &m);
    let mut out = state.with_amplitudes(amps);
    out.set_basis(p, to);
    Ok(out)
}

/// Converts every external mode of `state` to `to`, skipping those already there.
pub fn to_basis(state: &StateVector, to: Basis) -> Result<StateVector> {
    let mut out = state.clone();
    let particles: Vec<usize> = state.layout().external_particles().collect();
    for p in particles {
        if out.basis(p) != to {
            out = dft_basis_change(&out, state.spec().label(p), to)?;
        }
    }
    Ok(out)
}

/// Operator-norm defect of the exponentiated canonical commutation relation
/// `V(a) U(b) = exp(-2πi ab/L) U(b) V(a)` on one external mode, where
/// `V(a) = exp(i q̂ 2πa/L)` and `U(b) = exp(i p̂ b)`. Both sides are built
/// as dense matrices in the position basis.
pub fn weyl_commutation_check(spec: &LatticeSpec, particle: &str, a: i64, b: i64) -> Result<f64> {
    spec.particle_index(particle)?;
    let l = spec.sites();
    let li = l as i64;
    let f = dft_matrix(l);
    let clock = DMatrix::from_fn(l, l, |r, c| {
        if r == c {
            C64::from_polar(
                1.0,
                2.0 * PI * (a * r as i64).rem_euclid(li) as f64 / l as f64,
            )
        } else {
            C64::new(0.0, 0.0)
        }
    });
    // exp(i p̂ b) is diagonal in momentum; rotate it into the position basis.
    let phases = DMatrix::from_fn(l, l, |r, c| {
        if r == c {
            C64::from_polar(
                1.0,
                2.0 * PI * (b * r as i64).rem_euclid(li) as f64 / l as f64,
            )
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let shift = &f * phases * f.adjoint();
    let lhs = &clock * &shift;
    let phase = C64::from_polar(1.0, -2.0 * PI * (a * b).rem_euclid(li) as f64 / l as f64);
    let rhs = (&shift * &clock) * phase;
    Ok((lhs - rhs).singular_values().max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{inner_product, tensor_state, ParticleSpec};

    fn amp(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn eigenstates_and_range_check() {
        let spec = LatticeSpec::external_only(2, &["A"]).unwrap();
        let s = momentum_eigenstate(&spec, "A", 1).unwrap();
        assert_eq!(s.amplitudes()[1], amp(1.0));
        assert_eq!(s.amplitudes()[0], amp(0.0));
        let spec3 = LatticeSpec::external_only(3, &["A"]).unwrap();
        assert!(matches!(
            momentum_eigenstate(&spec3, "A", 3),
            Err(Error::Range {
                value: 3,
                bound: 3,
                ..
            })
        ));
        assert!(matches!(
            momentum_eigenstate(&spec3, "Z", 0),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn two_point_transform_rows_are_uniform() {
        let spec = LatticeSpec::external_only(2, &["A"]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q0 = position_eigenstate(&spec, "A", 0).unwrap();
        let k = dft_basis_change(&q0, "A", Basis::Momentum).unwrap();
        assert!((k.amplitudes()[0] - amp(h)).norm() < 1e-15);
        assert!((k.amplitudes()[1] - amp(h)).norm() < 1e-15);
        let k0 = momentum_eigenstate(&spec, "A", 0).unwrap();
        let q = dft_basis_change(&k0, "A", Basis::Position).unwrap();
        assert_eq!(q.basis(0), Basis::Position);
        assert!((q.amplitudes()[1] - amp(h)).norm() < 1e-15);
        assert!(dft_basis_change(&k0, "A", Basis::Momentum).is_err());
    }

    #[test]
    fn position_eigenstate_has_plane_wave_momentum_profile() {
        // ⟨k|q⟩ = exp(-2πi qk/L)/√L, written out for L = 4, q = 1.
        let spec = LatticeSpec::external_only(4, &["A"]).unwrap();
        let s = dft_basis_change(
            &position_eigenstate(&spec, "A", 1).unwrap(),
            "A",
            Basis::Momentum,
        )
        .unwrap();
        let expected = [amp(0.5), C64::new(0.0, -0.5), amp(-0.5), C64::new(0.0, 0.5)];
        for (k, e) in expected.iter().enumerate() {
            assert!((s.amplitudes()[k] - e).norm() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn basis_change_acts_on_the_right_axis() {
        let spec = LatticeSpec::new(
            2,
            vec![ParticleSpec::new("A", 2), ParticleSpec::external("B")],
        )
        .unwrap();
        let s = tensor_state(&[
            internal_eigenstate(&spec, "A", 1).unwrap(),
            momentum_eigenstate(&spec, "A", 0).unwrap(),
            momentum_eigenstate(&spec, "B", 1).unwrap(),
        ])
        .unwrap();
        let t = dft_basis_change(&s, "B", Basis::Position).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // (σ=1, q_A... k_A=0, q_B) with q_B = 0, 1 → ±1/√2.
        assert!((t.amplitude(&[1, 0, 0]) - amp(h)).norm() < 1e-15);
        assert!((t.amplitude(&[1, 0, 1]) - amp(-h)).norm() < 1e-15);
        assert!(inner_product(&s, &t).is_err());
    }

    #[test]
    fn folded_momentum_range() {
        assert_eq!(folded_momentum(2, 4), 2);
        assert_eq!(folded_momentum(3, 4), -1);
        assert_eq!(folded_momentum(2, 5), 2);
        assert_eq!(folded_momentum(3, 5), -2);
    }

    #[test]
    fn weyl_defects() {
        let s2 = LatticeSpec::external_only(2, &["A"]).unwrap();
        assert!(weyl_commutation_check(&s2, "A", 1, 1).unwrap() < 1e-12);
        let s3 = LatticeSpec::external_only(3, &["A"]).unwrap();
        assert!(weyl_commutation_check(&s3, "A", 0, 5).unwrap() < 1e-12);
        let s4 = LatticeSpec::external_only(4, &["A"]).unwrap();
        assert!(weyl_commutation_check(&s4, "A", 2, 3).unwrap() < 1e-12);
    }
}
