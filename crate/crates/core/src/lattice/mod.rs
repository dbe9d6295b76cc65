//! Finite periodic lattice: model definition, tensor layouts, states and
//! structured operators.
//!
//! Every particle carries an external lattice mode with `L` basis states
//! (momentum `k ∈ Z_L` with `p_k = 2πk/L`, or position `q ∈ Z_L`) and an
//! optional internal mode of dimension `d > 1`. A [`Layout`] is the ordered
//! list of modes a state lives on: particles in roster order, and within a
//! particle the internal mode before the external one, so that with
//! row-major indexing the external index varies fastest.

mod basis;
mod hamiltonian;
mod operator;
mod state;
pub(crate) mod tensor;

pub use basis::{
    dft_basis_change, dft_matrix, folded_momentum, internal_eigenstate, mode_state,
    momentum_eigenstate, position_eigenstate, to_basis, weyl_commutation_check,
};
pub use hamiltonian::{reduced_hamiltonian, Potential};
pub use operator::{LinearOperator, OperatorClass, OperatorKind, ProjectorKind};
pub(crate) use state::random_vector;
pub use state::{inner_product, tensor_state, StateKind, StateVector};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// One particle of the roster.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub label: String,
    #[serde(default = "one")]
    pub internal_dim: usize,
}

fn one() -> usize {
    1
}

impl ParticleSpec {
    pub fn new(label: impl Into<String>, internal_dim: usize) -> Self {
        ParticleSpec {
            label: label.into(),
            internal_dim,
        }
    }

    pub fn external(label: impl Into<String>) -> Self {
        Self::new(label, 1)
    }
}

/// The model definition: number of lattice sites and the particle roster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    sites: usize,
    particles: Vec<ParticleSpec>,
}

impl LatticeSpec {
    pub fn new(sites: usize, particles: Vec<ParticleSpec>) -> Result<Self> {
        let mut problems = Vec::new();
        if sites < 2 {
            problems.push(format!("lattice size must be at least 2, got {sites}"));
        }
        if particles.is_empty() {
            problems.push("particle roster is empty".to_string());
        }
        for (i, p) in particles.iter().enumerate() {
            if p.internal_dim == 0 {
                problems.push(format!("particle `{}` has internal_dim 0", p.label));
            }
            if p.label.is_empty() {
                problems.push(format!("particle #{i} has an empty label"));
            }
            if particles[..i].iter().any(|q| q.label == p.label) {
                problems.push(format!("duplicate particle label `{}`", p.label));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(LatticeSpec { sites, particles })
    }

    /// Roster of particles without internal structure.
    pub fn external_only(sites: usize, labels: &[&str]) -> Result<Self> {
        Self::new(
            sites,
            labels.iter().map(|l| ParticleSpec::external(*l)).collect(),
        )
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> &[ParticleSpec] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particle_index(&self, label: &str) -> Result<usize> {
        self.particles
            .iter()
            .position(|p| p.label == label)
            .ok_or_else(|| Error::Lookup(label.to_string()))
    }

    pub fn label(&self, particle: usize) -> &str {
        &self.particles[particle].label
    }

    pub fn internal_dim(&self, particle: usize) -> usize {
        self.particles[particle].internal_dim
    }

    pub fn external(&self, label: &str) -> Result<Factor> {
        Ok(Factor::external(self.particle_index(label)?))
    }

    pub fn internal(&self, label: &str) -> Result<Factor> {
        let p = self.particle_index(label)?;
        if self.internal_dim(p) < 2 {
            return Err(Error::contract(format!(
                "particle `{label}` has no internal degree of freedom"
            )));
        }
        Ok(Factor::internal(p))
    }

    pub fn factor_dim(&self, factor: Factor) -> usize {
        match factor.kind {
            FactorKind::External => self.sites,
            FactorKind::Internal => self.internal_dim(factor.particle),
        }
    }

    /// All modes of one particle.
    pub fn particle_factors(&self, particle: usize) -> Vec<Factor> {
        let mut out = Vec::with_capacity(2);
        if self.internal_dim(particle) > 1 {
            out.push(Factor::internal(particle));
        }
        out.push(Factor::external(particle));
        out
    }

    /// Layout of the unconstrained tensor-product space.
    pub fn kinematical_layout(&self) -> Layout {
        let factors = (0..self.len())
            .flat_map(|p| self.particle_factors(p))
            .collect();
        Layout::new(self, factors)
    }

    /// Layout seen from `reference`: its external mode removed, its internal
    /// mode (if any) retained.
    pub fn reduced_layout(&self, reference: &str) -> Result<Layout> {
        let r = self.particle_index(reference)?;
        Ok(self.kinematical_layout().without(Factor::external(r)))
    }

    pub fn factor_name(&self, factor: Factor) -> String {
        match factor.kind {
            FactorKind::External => self.label(factor.particle).to_string(),
            FactorKind::Internal => format!("{}:int", self.label(factor.particle)),
        }
    }

    /// Resolves `"B"` to every mode of B present in `layout`, and `"B:ext"` /
    /// `"B:int"` to a single mode.
    pub fn select(&self, layout: &Layout, names: &[&str]) -> Result<Vec<Factor>> {
        let mut out = Vec::new();
        for name in names {
            let (label, which) = match name.split_once(':') {
                Some((l, w)) => (l, Some(w)),
                None => (*name, None),
            };
            let p = self.particle_index(label)?;
            let candidates: Vec<Factor> = match which {
                None => self.particle_factors(p),
                Some("ext") => vec![Factor::external(p)],
                Some("int") => vec![Factor::internal(p)],
                Some(other) => return Err(Error::Lookup(format!("{label}:{other}"))),
            };
            let present: Vec<Factor> = candidates
                .into_iter()
                .filter(|f| layout.contains(*f))
                .collect();
            if present.is_empty() {
                return Err(Error::Lookup(name.to_string()));
            }
            out.extend(present);
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

/// Internal modes sort before external ones so that, within a particle, the
/// external index varies fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorKind {
    Internal,
    External,
}

/// A single tensor mode: one particle's internal or external degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub particle: usize,
    pub kind: FactorKind,
}

impl Factor {
    pub fn external(particle: usize) -> Self {
        Factor {
            particle,
            kind: FactorKind::External,
        }
    }

    pub fn internal(particle: usize) -> Self {
        Factor {
            particle,
            kind: FactorKind::Internal,
        }
    }

    pub fn is_external(self) -> bool {
        self.kind == FactorKind::External
    }
}

/// Representation used for the external modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Momentum,
    Position,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Momentum => f.write_str("momentum"),
            Basis::Position => f.write_str("position"),
        }
    }
}

/// Convention for the numerical momentum value attached to index `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumConvention {
    /// `p = 2πk/L` with `k ∈ {0, …, L-1}`.
    Naive,
    /// `p = 2πk̃/L` with `k̃ = k` for `k ≤ L/2` and `k - L` otherwise.
    #[default]
    Folded,
}

impl MomentumConvention {
    pub fn value(self, k: usize, sites: usize) -> f64 {
        let kk = match self {
            MomentumConvention::Naive => k as f64,
            MomentumConvention::Folded => folded_momentum(k, sites) as f64,
        };
        2.0 * std::f64::consts::PI * kk / sites as f64
    }
}

/// Ordered list of modes with their dimensions; row-major, first mode slowest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Layout {
    factors: Vec<Factor>,
    dims: Vec<usize>,
}

impl Layout {
    pub fn new(spec: &LatticeSpec, mut factors: Vec<Factor>) -> Self {
        factors.sort();
        factors.dedup();
        let dims = factors.iter().map(|f| spec.factor_dim(*f)).collect();
        Layout { factors, dims }
    }

    pub fn empty() -> Self {
        Layout {
            factors: Vec::new(),
            dims: Vec::new(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    pub fn axis(&self, factor: Factor) -> Option<usize> {
        self.factors.binary_search(&factor).ok()
    }

    pub fn contains(&self, factor: Factor) -> bool {
        self.axis(factor).is_some()
    }

    pub fn without(&self, factor: Factor) -> Layout {
        match self.axis(factor) {
            Some(a) => {
                let mut out = self.clone();
                out.factors.remove(a);
                out.dims.remove(a);
                out
            }
            None => self.clone(),
        }
    }

    pub fn with(&self, spec: &LatticeSpec, factor: Factor) -> Layout {
        let mut factors = self.factors.clone();
        factors.push(factor);
        Layout::new(spec, factors)
    }

    pub fn union(&self, spec: &LatticeSpec, other: &Layout) -> Layout {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Layout::new(spec, factors)
    }

    /// Particles whose external mode is present.
    pub fn external_particles(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors
            .iter()
            .filter(|f| f.is_external())
            .map(|f| f.particle)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (i, d) in self.dims.iter().enumerate().rev() {
            out[i] = flat % d;
            flat /= d;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&m, &d)| acc * d + m)
    }

    /// Total momentum index `Σ k mod L` of a momentum-basis configuration.
    pub fn total_momentum(&self, multi: &[usize], sites: usize) -> usize {
        self.factors
            .iter()
            .zip(multi)
            .filter(|(f, _)| f.is_external())
            .map(|(_, &k)| k)
            .sum::<usize>()
            % sites
    }

    pub fn describe(&self, spec: &LatticeSpec) -> String {
        let names: Vec<String> = self.factors.iter().map(|f| spec.factor_name(*f)).collect();
        format!("({})", names.join(", "))
    }
}

/// Largest modulus among `values` (0 for an empty sequence).
pub fn max_abs<'a>(values: impl IntoIterator<Item = &'a C64>) -> f64 {
    values.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Calls `f(flat, multi)` for every multi-index of `dims` in row-major order.
pub(crate) fn for_each_index(dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = dims.iter().product();
    if total == 0 {
        return;
    }
    let mut multi = vec![0usize; dims.len()];
    for flat in 0..total {
        f(flat, &multi);
        for axis in (0..dims.len()).rev() {
            multi[axis] += 1;
            if multi[axis] < dims[axis] {
                break;
            }
            multi[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> LatticeSpec {
        LatticeSpec::new(
            3,
            vec![
                ParticleSpec::external("A"),
                ParticleSpec::external("B"),
                ParticleSpec::new("C", 2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn spec_validation_collects_every_problem() {
        let err = LatticeSpec::new(
            1,
            vec![ParticleSpec::external("A"), ParticleSpec::new("A", 0)],
        )
        .unwrap_err();
        match err {
            Error::Config(problems) => assert_eq!(problems.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kinematical_layout_orders_internal_before_external() {
        let spec = abc();
        let layout = spec.kinematical_layout();
        assert_eq!(layout.dims(), &[3, 3, 2, 3]);
        assert_eq!(layout.factors()[2], Factor::internal(2));
        assert_eq!(layout.dim(), 54);
        assert_eq!(layout.strides(), vec![18, 6, 3, 1]);
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let layout = abc().kinematical_layout();
        for_each_index(layout.dims(), |flat, multi| {
            assert_eq!(layout.flat_index(multi), flat);
            assert_eq!(layout.multi_index(flat), multi);
        });
    }

    #[test]
    fn reduced_layout_keeps_reference_internal_mode() {
        let spec = abc();
        let red = spec.reduced_layout("C").unwrap();
        assert_eq!(red.describe(&spec), "(A, B, C:int)");
        assert!(spec.reduced_layout("Z").is_err());
    }

    #[test]
    fn select_resolves_particle_and_mode_names() {
        let spec = abc();
        let layout = spec.kinematical_layout();
        assert_eq!(spec.select(&layout, &["C"]).unwrap().len(), 2);
        assert_eq!(
            spec.select(&layout, &["C:int"]).unwrap(),
            vec![Factor::internal(2)]
        );
        assert!(spec.select(&layout, &["A:int"]).is_err());
    }

    #[test]
    fn folded_convention_is_parity_symmetric() {
        let l = 4;
        let p1 = MomentumConvention::Folded.value(1, l);
        let p3 = MomentumConvention::Folded.value(3, l);
        assert!((p1 + p3).abs() < 1e-15);
        assert!((MomentumConvention::Naive.value(3, l) - 1.5 * std::f64::consts::PI).abs() < 1e-15);
    }
}
