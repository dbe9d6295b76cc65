use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{for_each_index, Basis, Factor, LatticeSpec, Layout, C64};
use crate::error::{Error, Result};
use crate::tolerance;

/// Which space a state vector lives in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StateKind {
    /// Unconstrained tensor product (also used for single-particle factors).
    Kinematical,
    /// Image of the constraint projector.
    Physical,
    /// Reduced description relative to the named reference particle.
    Reduced(String),
}

/// Amplitude tensor over a [`Layout`], with per-particle basis tags.
///
/// Amplitudes are stored row-major in layout order. A zero state produced by
/// a projection is kept and flagged degenerate instead of being rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    spec: LatticeSpec,
    layout: Layout,
    bases: Vec<Basis>,
    kind: StateKind,
    degenerate: bool,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(
        spec: &LatticeSpec,
        layout: Layout,
        bases: Vec<Basis>,
        kind: StateKind,
        amplitudes: DVector<C64>,
    ) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::shape(format!(
                "{} amplitudes for layout {} of dimension {}",
                amplitudes.len(),
                layout.describe(spec),
                layout.dim()
            )));
        }
        if bases.len() != spec.len() {
            return Err(Error::shape(format!(
                "{} basis tags for {} particles",
                bases.len(),
                spec.len()
            )));
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::contract("non-finite amplitude"));
        }
        Ok(StateVector {
            spec: spec.clone(),
            layout,
            bases,
            kind,
            degenerate: false,
            amplitudes,
        })
    }

    /// Momentum-basis state on an arbitrary layout.
    pub fn momentum(
        spec: &LatticeSpec,
        layout: Layout,
        kind: StateKind,
        amplitudes: DVector<C64>,
    ) -> Result<Self> {
        Self::new(
            spec,
            layout,
            vec![Basis::Momentum; spec.len()],
            kind,
            amplitudes,
        )
    }

    /// Momentum-basis kinematical state on the full layout.
    pub fn kinematical(spec: &LatticeSpec, amplitudes: DVector<C64>) -> Result<Self> {
        Self::momentum(
            spec,
            spec.kinematical_layout(),
            StateKind::Kinematical,
            amplitudes,
        )
    }

    /// Normalized Gaussian-random momentum-basis state on `layout`.
    pub fn random<R: Rng + ?Sized>(
        spec: &LatticeSpec,
        layout: Layout,
        kind: StateKind,
        rng: &mut R,
    ) -> Self {
        let amps = random_vector(layout.dim(), rng);
        let mut s = Self::momentum(spec, layout, kind, amps).expect("dimension matches layout");
        s.normalize_in_place();
        s
    }

    /// Random state restricted to the constraint surface.
    pub fn random_physical<R: Rng + ?Sized>(spec: &LatticeSpec, rng: &mut R) -> Self {
        let layout = spec.kinematical_layout();
        let mut amps = random_vector(layout.dim(), rng);
        let l = spec.sites();
        for_each_index(layout.dims(), |flat, multi| {
            if layout.total_momentum(multi, l) != 0 {
                amps[flat] = C64::new(0.0, 0.0);
            }
        });
        let mut s = Self::momentum(spec, layout, StateKind::Physical, amps).expect("full layout");
        s.normalize_in_place();
        s
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn basis(&self, particle: usize) -> Basis {
        self.bases[particle]
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    /// Amplitude at a multi-index of the layout.
    pub fn amplitude(&self, multi: &[usize]) -> C64 {
        self.amplitudes[self.layout.flat_index(multi)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Same metadata, new amplitudes (must have the same length).
    pub fn with_amplitudes(&self, amplitudes: DVector<C64>) -> Self {
        assert_eq!(amplitudes.len(), self.amplitudes.len());
        StateVector {
            amplitudes,
            ..self.clone()
        }
    }

    /// Same spec and bases; new layout, kind and amplitudes.
    pub(crate) fn rebuilt(
        &self,
        layout: Layout,
        kind: StateKind,
        amplitudes: DVector<C64>,
    ) -> Self {
        debug_assert_eq!(layout.dim(), amplitudes.len());
        StateVector {
            spec: self.spec.clone(),
            layout,
            bases: self.bases.clone(),
            kind,
            degenerate: self.degenerate,
            amplitudes,
        }
    }

    pub(crate) fn set_basis(&mut self, particle: usize, basis: Basis) {
        self.bases[particle] = basis;
    }

    pub fn with_kind(mut self, kind: StateKind) -> Self {
        self.kind = kind;
        self
    }

    /// Marks the state degenerate when its norm is below the degeneracy
    /// threshold; the flag is sticky.
    pub fn flag_if_zero(mut self) -> Self {
        if self.norm() < tolerance::DEGENERATE {
            self.degenerate = true;
        }
        self
    }

    fn normalize_in_place(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes /= C64::new(n, 0.0);
        }
    }

    /// Unit-norm copy; a zero state comes back unchanged and flagged.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        if out.norm() < tolerance::DEGENERATE {
            out.degenerate = true;
        } else {
            out.normalize_in_place();
        }
        out
    }

    /// Errors unless every external mode present is in the momentum basis.
    pub fn require_momentum(&self) -> Result<()> {
        for p in self.layout.external_particles() {
            if self.bases[p] != Basis::Momentum {
                return Err(Error::contract(format!(
                    "particle `{}` is in the position basis; convert to momentum first",
                    self.spec.label(p)
                )));
            }
        }
        Ok(())
    }

    /// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`; zero when either side vanishes.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        let ip = inner_product(self, other)?;
        let d = self.norm_sqr() * other.norm_sqr();
        Ok(if d == 0.0 { 0.0 } else { ip.norm_sqr() / d })
    }

    /// Largest entrywise deviation, for phase-sensitive comparisons.
    pub fn max_deviation(&self, other: &StateVector) -> Result<f64> {
        check_compatible(self, other)?;
        Ok(super::max_abs(
            (&self.amplitudes - &other.amplitudes).iter(),
        ))
    }
}

pub(crate) fn random_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<C64> {
    DVector::from_iterator(
        dim,
        (0..dim).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
    )
}

fn check_compatible(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.spec != b.spec || a.layout != b.layout {
        return Err(Error::shape(format!(
            "states live on different layouts {} and {}",
            a.layout.describe(&a.spec),
            b.layout.describe(&b.spec)
        )));
    }
    for p in a.layout.external_particles() {
        if a.bases[p] != b.bases[p] {
            return Err(Error::contract(format!(
                "basis mismatch on particle `{}` ({} vs {})",
                a.spec.label(p),
                a.bases[p],
                b.bases[p]
            )));
        }
    }
    Ok(())
}

/// Kinematical inner product `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    check_compatible(a, b)?;
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

/// Product of states on disjoint sets of modes.
///
/// The result's layout is the union of the factor layouts; it is tagged
/// kinematical. Overlapping factors are a shape error.
pub fn tensor_state(factors: &[StateVector]) -> Result<StateVector> {
    let first = factors
        .first()
        .ok_or_else(|| Error::shape("empty factor list"))?;
    let spec = first.spec.clone();
    let mut layout = Layout::empty();
    let mut bases = vec![super::Basis::Momentum; spec.len()];
    for f in factors {
        if f.spec != spec {
            return Err(Error::shape("factors built from different lattice specs"));
        }
        for &factor in f.layout.factors() {
            if layout.contains(factor) {
                return Err(Error::shape(format!(
                    "mode {} supplied more than once",
                    spec.factor_name(factor)
                )));
            }
            layout = layout.with(&spec, factor);
        }
        for p in f.layout.external_particles() {
            bases[p] = f.bases[p];
        }
    }

    // Position of every factor's modes inside the combined layout.
    let maps: Vec<Vec<usize>> = factors
        .iter()
        .map(|f| {
            f.layout
                .factors()
                .iter()
                .map(|x: &Factor| layout.axis(*x).expect("union contains factor"))
                .collect()
        })
        .collect();
    let mut amps = DVector::zeros(layout.dim());
    let mut sub: Vec<Vec<usize>> = factors.iter().map(|f| vec![0; f.layout.rank()]).collect();
    for_each_index(layout.dims(), |flat, multi| {
        let mut a = C64::new(1.0, 0.0);
        for (i, f) in factors.iter().enumerate() {
            for (j, &ax) in maps[i].iter().enumerate() {
                sub[i][j] = multi[ax];
            }
            a *= f.amplitudes[f.layout.flat_index(&sub[i])];
        }
        amps[flat] = a;
    });
    StateVector::new(&spec, layout, bases, StateKind::Kinematical, amps)
}
