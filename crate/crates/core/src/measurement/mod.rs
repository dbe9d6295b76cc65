//! Von Neumann measurement embedded in the constrained theory.
//!
//! A translation-invariant unitary couples system and apparatus; the
//! outcome is read from a pointer, which is either the external momentum
//! of an apparatus particle or its internal mode. Outcome probabilities and
//! post-measurement states are computed relative to a chosen reference, and
//! the Kraus families behind them are exposed at the kinematical and
//! reduced levels.

mod experiments;
mod kraus;
mod pipeline;
mod reduced;

pub use experiments::{
    kraus_switch_check, order_swap_check, wrong_projector_demo, KrausSwitchReport, OrderSwapReport,
    WrongProjectorReport, WrongProjectorRow,
};
pub use kraus::{
    check_translation_invariance, kraus_from_unitary, process2_apply, unitary_from_kraus, KrausSet,
    KrausSpace,
};
pub use pipeline::{
    apparatus_as_qrf_pipeline, apparatus_view, measure, measurement_pipeline,
    switch_measurement_perspective, MeasurementRecord, MeasurementRun,
};
pub use reduced::{reduced_operator_from_kin, ReducedKraus};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{for_each_index, Factor, LatticeSpec, Layout};

/// Where the outcome is read.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "particle", rename_all = "kebab-case")]
pub enum Pointer {
    /// External momentum of the named particle.
    Momentum(String),
    /// Internal mode of the named particle.
    Internal(String),
}

impl Pointer {
    pub fn particle(&self) -> &str {
        match self {
            Pointer::Momentum(p) | Pointer::Internal(p) => p,
        }
    }

    pub fn factor(&self, spec: &LatticeSpec) -> Result<Factor> {
        match self {
            Pointer::Momentum(p) => spec.external(p),
            Pointer::Internal(p) => spec.internal(p),
        }
    }

    /// Number of possible outcomes.
    pub fn outcomes(&self, spec: &LatticeSpec) -> Result<usize> {
        Ok(spec.factor_dim(self.factor(spec)?))
    }

    /// Momentum carried by outcome `m` (zero for internal pointers).
    pub(crate) fn momentum_of(&self, m: usize) -> usize {
        match self {
            Pointer::Momentum(_) => m,
            Pointer::Internal(_) => 0,
        }
    }
}

impl std::str::FromStr for Pointer {
    type Err = Error;

    /// `"E"` or `"E:ext"` selects a momentum pointer, `"C:int"` an internal one.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => Ok(Pointer::Momentum(s.to_string())),
            Some((p, "ext")) => Ok(Pointer::Momentum(p.to_string())),
            Some((p, "int")) => Ok(Pointer::Internal(p.to_string())),
            Some(_) => Err(Error::Lookup(s.to_string())),
        }
    }
}

impl std::fmt::Display for Pointer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pointer::Momentum(p) => write!(f, "{p}:ext"),
            Pointer::Internal(p) => write!(f, "{p}:int"),
        }
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}

/// A full layout split into system modes and pointer (or frame) modes, with
/// the flat index of every (system, pointer) pair.
#[derive(Clone, Debug)]
pub(crate) struct Split {
    pub full: Layout,
    pub sys: Layout,
    pub ptr: Layout,
    join: Vec<usize>,
}

impl Split {
    pub fn new(spec: &LatticeSpec, full: &Layout, ptr_factors: &[Factor]) -> Result<Split> {
        for f in ptr_factors {
            require(full.contains(*f), || {
                format!(
                    "mode {} not in {}",
                    spec.factor_name(*f),
                    full.describe(spec)
                )
            })?;
        }
        let ptr = Layout::new(spec, ptr_factors.to_vec());
        let sys = Layout::new(
            spec,
            full.factors()
                .iter()
                .copied()
                .filter(|f| !ptr_factors.contains(f))
                .collect(),
        );
        let sa: Vec<usize> = sys
            .factors()
            .iter()
            .map(|f| full.axis(*f).unwrap())
            .collect();
        let pa: Vec<usize> = ptr
            .factors()
            .iter()
            .map(|f| full.axis(*f).unwrap())
            .collect();
        let mut join = vec![0; full.dim()];
        let (mut si, mut pi) = (vec![0; sa.len()], vec![0; pa.len()]);
        for_each_index(full.dims(), |flat, multi| {
            for (j, &a) in sa.iter().enumerate() {
                si[j] = multi[a];
            }
            for (j, &a) in pa.iter().enumerate() {
                pi[j] = multi[a];
            }
            join[sys.flat_index(&si) * ptr.dim() + ptr.flat_index(&pi)] = flat;
        });
        Ok(Split {
            full: full.clone(),
            sys,
            ptr,
            join,
        })
    }

    pub fn join(&self, s: usize, p: usize) -> usize {
        self.join[s * self.ptr.dim() + p]
    }
}
