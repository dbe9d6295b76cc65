//! Maps between the reduced descriptions of two reference particles.
//!
//! Going from `from`'s perspective to `to`'s: the momentum of `to` first
//! absorbs the other momenta present (plus an optional fixed offset for a
//! known measured momentum), then its mode is handed to `from` with the sign
//! flipped. The result is `k_from = −(k_to + Σ others + offset)`, which is
//! exactly the constraint-surface relation, so every switch is a
//! permutation of basis states.

use crate::error::{Error, Result};
use crate::lattice::{
    Factor, LatticeSpec, Layout, LinearOperator, OperatorClass, OperatorKind, StateKind,
    StateVector,
};

/// What a switch is conditioned on, if anything.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    /// A measured momentum index that no longer appears in the domain.
    Momentum(usize),
    /// An internal label attached to `from` on the way out.
    Internal(usize),
}

/// A switch map together with the perspectives it connects.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchOperator {
    pub from: String,
    pub to: String,
    pub conditioning: Option<Conditioning>,
    op: LinearOperator,
}

impl SwitchOperator {
    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn domain(&self) -> &Layout {
        self.op.domain()
    }

    pub fn codomain(&self) -> &Layout {
        self.op.codomain()
    }

    /// Switches a state reduced to `from`; anything else is a contract error.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.kind() != &StateKind::Reduced(self.from.clone()) {
            return Err(Error::contract(format!(
                "switch from `{}` applied to a {:?} state",
                self.from,
                state.kind()
            )));
        }
        self.op.apply(state)
    }
}

/// `P_{from→to}`: removes the external mode of `from`, creates that of `to`
/// with `k ↦ −k`. Acts on `to`'s reduced layout.
pub fn parity_swap(spec: &LatticeSpec, from: &str, to: &str) -> Result<LinearOperator> {
    let (f, t) = (spec.particle_index(from)?, spec.particle_index(to)?);
    if f == t {
        return Err(Error::contract(format!(
            "parity swap of `{from}` onto itself"
        )));
    }
    parity_swap_on(spec, &spec.reduced_layout(to)?, f, t, None)
}

pub(crate) fn parity_swap_on(
    spec: &LatticeSpec,
    domain: &Layout,
    source: usize,
    target: usize,
    attach: Option<usize>,
) -> Result<LinearOperator> {
    let mut codomain = domain
        .without(Factor::external(source))
        .with(spec, Factor::external(target));
    if attach.is_some() {
        codomain = codomain.with(spec, Factor::internal(target));
    }
    LinearOperator::new(
        spec,
        domain.clone(),
        codomain,
        OperatorKind::ParitySwap {
            source,
            target,
            attach,
        },
        OperatorClass::UNITARY,
        format!("P_{}{}", spec.label(source), spec.label(target)),
    )
}

/// Switch from `from`'s to `to`'s perspective on an explicit domain, which
/// must contain `to`'s external mode and lack `from`'s. `offset` is added
/// to the absorbed momentum; `attach` creates `from`'s internal mode.
pub fn switch_map_on(
    spec: &LatticeSpec,
    domain: &Layout,
    from: &str,
    to: &str,
    offset: usize,
    attach: Option<usize>,
) -> Result<LinearOperator> {
    let (f, t) = (spec.particle_index(from)?, spec.particle_index(to)?);
    if f == t {
        return Err(Error::contract(format!("switch from `{from}` to itself")));
    }
    if domain.contains(Factor::external(f)) || !domain.contains(Factor::external(t)) {
        return Err(Error::contract(format!(
            "domain {} is not a `{from}` perspective containing `{to}`",
            domain.describe(spec)
        )));
    }
    let sources = domain.external_particles().filter(|&p| p != t).collect();
    let shift = LinearOperator::on(
        spec,
        domain.clone(),
        OperatorKind::ConditionalTranslation {
            target: t,
            sources,
            sign: 1,
            offset: offset as i64,
        },
        OperatorClass::UNITARY,
        format!("exp(i q_{to} p)"),
    )?;
    let swap = parity_swap_on(spec, domain, t, f, attach)?;
    Ok(shift
        .then(&swap)?
        .with_output_kind(StateKind::Reduced(to.to_string())))
}

/// `S_{from→to}` between the two full reduced spaces.
pub fn switch_map(spec: &LatticeSpec, from: &str, to: &str) -> Result<SwitchOperator> {
    let domain = spec.reduced_layout(from)?;
    Ok(SwitchOperator {
        from: from.into(),
        to: to.into(),
        conditioning: None,
        op: switch_map_on(spec, &domain, from, to, 0, None)?,
    })
}

/// `S_m`: switch after the external momentum of `pointer` was measured to
/// be `outcome` and dropped from the description.
pub fn conditioned_switch_map(
    spec: &LatticeSpec,
    from: &str,
    to: &str,
    pointer: &str,
    outcome: usize,
) -> Result<SwitchOperator> {
    if outcome >= spec.sites() {
        return Err(Error::Range {
            what: "momentum outcome",
            value: outcome as i64,
            bound: spec.sites(),
        });
    }
    let e = spec.external(pointer)?;
    let domain = spec.reduced_layout(from)?;
    if !domain.contains(e) {
        return Err(Error::contract(format!(
            "pointer `{pointer}` has no external mode in `{from}`'s perspective"
        )));
    }
    Ok(SwitchOperator {
        from: from.into(),
        to: to.into(),
        conditioning: Some(Conditioning::Momentum(outcome)),
        op: switch_map_on(spec, &domain.without(e), from, to, outcome, None)?,
    })
}

/// `S_n`: switch out of the perspective of `from`, whose internal pointer
/// was found in `sigma` and dropped; the label is re-attached to `from`.
/// The image is the `sigma` sector of `to`'s reduced space.
pub fn internal_switch_map(
    spec: &LatticeSpec,
    from: &str,
    to: &str,
    sigma: usize,
) -> Result<SwitchOperator> {
    let f = spec.particle_index(from)?;
    let d = spec.internal_dim(f);
    if sigma >= d {
        return Err(Error::Range {
            what: "internal label",
            value: sigma as i64,
            bound: d,
        });
    }
    let domain = spec.reduced_layout(from)?.without(Factor::internal(f));
    let attach = (d > 1).then_some(sigma);
    Ok(SwitchOperator {
        from: from.into(),
        to: to.into(),
        conditioning: Some(Conditioning::Internal(sigma)),
        op: switch_map_on(spec, &domain, from, to, 0, attach)?,
    })
}
