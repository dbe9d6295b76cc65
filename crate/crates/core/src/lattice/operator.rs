use nalgebra::{DMatrix, DVector};

use super::basis::dft_matrix;
use super::tensor::{apply_axis, mask, remap};
use super::{Factor, LatticeSpec, Layout, StateKind, StateVector, C64};
use crate::error::{Error, Result};

/// Property tags asserted at construction and checkable on the dense form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OperatorClass {
    pub unitary: bool,
    pub hermitian: bool,
    pub projector: bool,
}

impl OperatorClass {
    pub const GENERAL: OperatorClass = OperatorClass {
        unitary: false,
        hermitian: false,
        projector: false,
    };
    pub const UNITARY: OperatorClass = OperatorClass {
        unitary: true,
        hermitian: false,
        projector: false,
    };
    pub const HERMITIAN: OperatorClass = OperatorClass {
        unitary: false,
        hermitian: true,
        projector: false,
    };
    pub const PROJECTOR: OperatorClass = OperatorClass {
        unitary: false,
        hermitian: true,
        projector: true,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProjectorKind {
    /// Indicator of zero total momentum over the external modes present.
    Physical,
    /// `|value⟩⟨value|` on one mode (momentum index or internal label).
    Outcome { factor: Factor, value: usize },
}

/// Structured realizations. All act on momentum-basis amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    Dense(DMatrix<C64>),
    /// `k_target ↦ k_target + sign·Σ k_sources + offset (mod L)`.
    ConditionalTranslation {
        target: usize,
        sources: Vec<usize>,
        sign: i64,
        offset: i64,
    },
    /// Removes the external mode of `source` and creates that of `target`
    /// carrying the opposite momentum; optionally also creates `target`'s
    /// internal mode in the given label.
    ParitySwap {
        source: usize,
        target: usize,
        attach: Option<usize>,
    },
    Projector(ProjectorKind),
    /// Diagonal in the momentum basis, or in the position basis of every
    /// external mode (internal modes untouched by the basis change).
    Diagonal {
        basis: super::Basis,
        entries: DVector<C64>,
    },
    /// `σ ↦ σ + multiplier·((q_i − q_j) mod L) (mod d)` on an internal mode.
    ControlledShift {
        controls: (usize, usize),
        target: Factor,
        multiplier: i64,
    },
    /// Applied left to right: `ops[0]` acts first.
    Composed(Vec<LinearOperator>),
}

/// A linear map between two layouts of the same lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    spec: LatticeSpec,
    domain: Layout,
    codomain: Layout,
    kind: OperatorKind,
    class: OperatorClass,
    output_kind: Option<StateKind>,
    name: String,
}

impl LinearOperator {
    pub fn new(
        spec: &LatticeSpec,
        domain: Layout,
        codomain: Layout,
        kind: OperatorKind,
        class: OperatorClass,
        name: impl Into<String>,
    ) -> Result<Self> {
        let op = LinearOperator {
            spec: spec.clone(),
            domain,
            codomain,
            kind,
            class,
            output_kind: None,
            name: name.into(),
        };
        op.validate()?;
        Ok(op)
    }

    /// Square operator on `layout`.
    pub fn on(
        spec: &LatticeSpec,
        layout: Layout,
        kind: OperatorKind,
        class: OperatorClass,
        name: impl Into<String>,
    ) -> Result<Self> {
        Self::new(spec, layout.clone(), layout, kind, class, name)
    }

    pub fn dense(
        spec: &LatticeSpec,
        domain: Layout,
        codomain: Layout,
        matrix: DMatrix<C64>,
        class: OperatorClass,
        name: impl Into<String>,
    ) -> Result<Self> {
        Self::new(
            spec,
            domain,
            codomain,
            OperatorKind::Dense(matrix),
            class,
            name,
        )
    }

    pub fn identity(spec: &LatticeSpec, layout: Layout) -> Self {
        LinearOperator {
            spec: spec.clone(),
            domain: layout.clone(),
            codomain: layout,
            kind: OperatorKind::Composed(Vec::new()),
            class: OperatorClass {
                unitary: true,
                hermitian: true,
                projector: true,
            },
            output_kind: None,
            name: "identity".into(),
        }
    }

    /// Global translation by `s` sites: phase `exp(-2πi s Σk / L)`.
    pub fn global_translation(spec: &LatticeSpec, layout: Layout, s: i64) -> Self {
        let l = spec.sites();
        let mut entries = DVector::zeros(layout.dim());
        super::for_each_index(layout.dims(), |flat, multi| {
            let k = layout.total_momentum(multi, l) as i64;
            let e = (s * k).rem_euclid(l as i64) as f64;
            entries[flat] = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * e / l as f64);
        });
        LinearOperator {
            spec: spec.clone(),
            domain: layout.clone(),
            codomain: layout,
            kind: OperatorKind::Diagonal {
                basis: super::Basis::Momentum,
                entries,
            },
            class: OperatorClass::UNITARY,
            output_kind: None,
            name: format!("translation({s})"),
        }
    }

    /// Tags every output state with `kind`.
    pub fn with_output_kind(mut self, kind: StateKind) -> Self {
        self.output_kind = Some(kind);
        self
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Layout {
        &self.domain
    }

    pub fn codomain(&self) -> &Layout {
        &self.codomain
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn class(&self) -> OperatorClass {
        self.class
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn output_kind(&self) -> Option<&StateKind> {
        self.output_kind.as_ref()
    }

    fn validate(&self) -> Result<()> {
        let spec = &self.spec;
        let square = || -> Result<()> {
            if self.domain != self.codomain {
                return Err(Error::shape(format!("`{}` must be square", self.name)));
            }
            Ok(())
        };
        let has_ext = |layout: &Layout, p: usize| -> Result<()> {
            if p >= spec.len() || !layout.contains(Factor::external(p)) {
                return Err(Error::shape(format!(
                    "`{}`: layout {} lacks external mode #{p}",
                    self.name,
                    layout.describe(spec)
                )));
            }
            Ok(())
        };
        match &self.kind {
            OperatorKind::Dense(m) => {
                if m.nrows() != self.codomain.dim() || m.ncols() != self.domain.dim() {
                    return Err(Error::shape(format!(
                        "`{}`: matrix is {}x{}, layouts need {}x{}",
                        self.name,
                        m.nrows(),
                        m.ncols(),
                        self.codomain.dim(),
                        self.domain.dim()
                    )));
                }
            }
            OperatorKind::ConditionalTranslation {
                target, sources, ..
            } => {
                square()?;
                has_ext(&self.domain, *target)?;
                for s in sources {
                    has_ext(&self.domain, *s)?;
                    if s == target {
                        return Err(Error::contract("translation target among its sources"));
                    }
                }
            }
            OperatorKind::ParitySwap {
                source,
                target,
                attach,
            } => {
                if source == target {
                    return Err(Error::contract(format!(
                        "parity swap from `{}` onto itself",
                        spec.label(*source)
                    )));
                }
                has_ext(&self.domain, *source)?;
                if self.domain.contains(Factor::external(*target)) {
                    return Err(Error::contract(format!(
                        "parity swap target `{}` already present",
                        spec.label(*target)
                    )));
                }
                let mut expected = self.domain.without(Factor::external(*source));
                expected = expected.with(spec, Factor::external(*target));
                if let Some(sigma) = attach {
                    let f = Factor::internal(*target);
                    if spec.internal_dim(*target) < 2 || self.domain.contains(f) {
                        return Err(Error::contract("cannot attach internal label here"));
                    }
                    if *sigma >= spec.internal_dim(*target) {
                        return Err(Error::Range {
                            what: "internal label",
                            value: *sigma as i64,
                            bound: spec.internal_dim(*target),
                        });
                    }
                    expected = expected.with(spec, f);
                }
                if expected != self.codomain {
                    return Err(Error::shape(format!(
                        "`{}`: codomain should be {}",
                        self.name,
                        expected.describe(spec)
                    )));
                }
            }
            OperatorKind::Projector(p) => {
                square()?;
                if let ProjectorKind::Outcome { factor, value } = p {
                    if !self.domain.contains(*factor) {
                        return Err(Error::shape("projector mode not in layout"));
                    }
                    if *value >= spec.factor_dim(*factor) {
                        return Err(Error::Range {
                            what: "outcome",
                            value: *value as i64,
                            bound: spec.factor_dim(*factor),
                        });
                    }
                }
            }
            OperatorKind::Diagonal { entries, .. } => {
                square()?;
                if entries.len() != self.domain.dim() {
                    return Err(Error::shape(
                        "diagonal length differs from layout dimension",
                    ));
                }
            }
            OperatorKind::ControlledShift {
                controls, target, ..
            } => {
                square()?;
                has_ext(&self.domain, controls.0)?;
                has_ext(&self.domain, controls.1)?;
                if target.is_external() || !self.domain.contains(*target) {
                    return Err(Error::shape(
                        "controlled shift needs an internal target mode",
                    ));
                }
            }
            OperatorKind::Composed(ops) => {
                let mut current = &self.domain;
                for op in ops {
                    if op.domain() != current {
                        return Err(Error::contract(format!(
                            "composition mismatch before `{}`: {} vs {}",
                            op.name,
                            current.describe(spec),
                            op.domain().describe(spec)
                        )));
                    }
                    current = op.codomain();
                }
                if current != &self.codomain {
                    return Err(Error::contract("composition ends on the wrong layout"));
                }
            }
        }
        Ok(())
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &LinearOperator) -> Result<LinearOperator> {
        let mut ops = match &self.kind {
            OperatorKind::Composed(v) => v.clone(),
            _ => vec![self.clone()],
        };
        match &then.kind {
            OperatorKind::Composed(v) => ops.extend(v.iter().cloned()),
            _ => ops.push(then.clone()),
        }
        let class = OperatorClass {
            unitary: self.class.unitary && then.class.unitary,
            hermitian: false,
            projector: false,
        };
        let mut out = LinearOperator::new(
            &self.spec,
            self.domain.clone(),
            then.codomain.clone(),
            OperatorKind::Composed(ops),
            class,
            format!("{}·{}", then.name, self.name),
        )?;
        out.output_kind = then
            .output_kind
            .clone()
            .or_else(|| self.output_kind.clone());
        Ok(out)
    }

    /// Applies the operator to a state on its domain.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.layout() != &self.domain {
            return Err(Error::contract(format!(
                "`{}` acts on {}, state lives on {}",
                self.name,
                self.domain.describe(&self.spec),
                state.layout().describe(&self.spec)
            )));
        }
        if state.spec() != &self.spec {
            return Err(Error::shape(
                "operator and state built from different specs",
            ));
        }
        state.require_momentum()?;
        let amps = self.apply_vec(state.amplitudes());
        let kind = self
            .output_kind
            .clone()
            .unwrap_or_else(|| state.kind().clone());
        Ok(state.rebuilt(self.codomain.clone(), kind, amps))
    }

    /// Applies the operator to raw momentum-basis amplitudes on the domain.
    pub fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let l = self.spec.sites();
        let li = l as i64;
        let dom = &self.domain;
        match &self.kind {
            OperatorKind::Dense(m) => m * v,
            OperatorKind::ConditionalTranslation {
                target,
                sources,
                sign,
                offset,
            } => {
                let t = dom.axis(Factor::external(*target)).expect("validated");
                let src: Vec<usize> = sources
                    .iter()
                    .map(|s| dom.axis(Factor::external(*s)).expect("validated"))
                    .collect();
                remap(dom, dom, v, |multi, out| {
                    out.copy_from_slice(multi);
                    let shift: i64 = src.iter().map(|&a| multi[a] as i64).sum();
                    out[t] = (multi[t] as i64 + sign * shift + offset).rem_euclid(li) as usize;
                    C64::new(1.0, 0.0)
                })
            }
            OperatorKind::ParitySwap {
                source,
                target,
                attach,
            } => {
                let cod = &self.codomain;
                let src_axis = dom.axis(Factor::external(*source)).expect("validated");
                // For every output axis: where its value comes from.
                let plan: Vec<Option<usize>> = cod
                    .factors()
                    .iter()
                    .map(|f| {
                        if *f == Factor::external(*target)
                            || (attach.is_some() && *f == Factor::internal(*target))
                        {
                            None
                        } else {
                            Some(dom.axis(*f).expect("shared mode"))
                        }
                    })
                    .collect();
                let tgt_axis = cod.axis(Factor::external(*target)).expect("validated");
                remap(dom, cod, v, |multi, out| {
                    for (o, p) in plan.iter().enumerate() {
                        out[o] = match p {
                            Some(a) => multi[*a],
                            None if o == tgt_axis => (l - multi[src_axis]) % l,
                            None => attach.expect("internal attach"),
                        };
                    }
                    C64::new(1.0, 0.0)
                })
            }
            OperatorKind::Projector(ProjectorKind::Physical) => {
                mask(dom, v, |multi| dom.total_momentum(multi, l) == 0)
            }
            OperatorKind::Projector(ProjectorKind::Outcome { factor, value }) => {
                let a = dom.axis(*factor).expect("validated");
                mask(dom, v, |multi| multi[a] == *value)
            }
            OperatorKind::Diagonal { basis, entries } => match basis {
                super::Basis::Momentum => v.component_mul(entries),
                super::Basis::Position => {
                    let axes: Vec<usize> = dom
                        .external_particles()
                        .map(|p| dom.axis(Factor::external(p)).unwrap())
                        .collect();
                    let w = to_position(dom, v, &axes, l);
                    from_position(dom, &w.component_mul(entries), &axes, l)
                }
            },
            OperatorKind::ControlledShift {
                controls,
                target,
                multiplier,
            } => {
                let ai = dom.axis(Factor::external(controls.0)).unwrap();
                let aj = dom.axis(Factor::external(controls.1)).unwrap();
                let at = dom.axis(*target).unwrap();
                let d = self.spec.factor_dim(*target) as i64;
                let w = to_position(dom, v, &[ai, aj], l);
                let w = remap(dom, dom, &w, |multi, out| {
                    out.copy_from_slice(multi);
                    let r = (multi[ai] as i64 - multi[aj] as i64).rem_euclid(li);
                    out[at] = (multi[at] as i64 + multiplier * r).rem_euclid(d) as usize;
                    C64::new(1.0, 0.0)
                });
                from_position(dom, &w, &[ai, aj], l)
            }
            OperatorKind::Composed(ops) => {
                let mut cur = v.clone();
                for op in ops {
                    cur = op.apply_vec(&cur);
                }
                cur
            }
        }
    }

    /// Dense momentum-basis matrix, built column by column from basis states.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<C64>> {
        let (n, m) = (self.codomain.dim(), self.domain.dim());
        if n.max(m) > cap {
            return Err(Error::Resource { dim: n.max(m), cap });
        }
        if let OperatorKind::Dense(mat) = &self.kind {
            return Ok(mat.clone());
        }
        let mut out = DMatrix::zeros(n, m);
        let mut e = DVector::zeros(m);
        for c in 0..m {
            e[c] = C64::new(1.0, 0.0);
            out.set_column(c, &self.apply_vec(&e));
            e[c] = C64::new(0.0, 0.0);
        }
        Ok(out)
    }

    /// Dense adjoint, mapping the codomain back to the domain.
    pub fn adjoint(&self, cap: usize) -> Result<LinearOperator> {
        let m = self.to_dense(cap)?.adjoint();
        LinearOperator::dense(
            &self.spec,
            self.codomain.clone(),
            self.domain.clone(),
            m,
            self.class,
            format!("{}†", self.name),
        )
    }

    /// `‖O†O − I‖_max` on the domain.
    pub fn unitarity_defect(&self, cap: usize) -> Result<f64> {
        let m = self.to_dense(cap)?;
        let g = m.adjoint() * &m;
        Ok(super::max_abs(
            (g - DMatrix::identity(m.ncols(), m.ncols())).iter(),
        ))
    }

    /// `max(‖O² − O‖_max, ‖O − O†‖_max)`.
    pub fn projector_defect(&self, cap: usize) -> Result<f64> {
        if self.domain != self.codomain {
            return Err(Error::shape("projector must be square"));
        }
        let m = self.to_dense(cap)?;
        let idem = super::max_abs((&m * &m - &m).iter());
        let herm = super::max_abs((&m - m.adjoint()).iter());
        Ok(idem.max(herm))
    }

    /// `‖O − O†‖_max`.
    pub fn hermiticity_defect(&self, cap: usize) -> Result<f64> {
        let m = self.to_dense(cap)?;
        Ok(super::max_abs((&m - m.adjoint()).iter()))
    }
}

fn to_position(layout: &Layout, v: &DVector<C64>, axes: &[usize], sites: usize) -> DVector<C64> {
    let f = dft_matrix(sites);
    axes.iter()
        .fold(v.clone(), |acc, &a| apply_axis(layout, &acc, a, &f))
}

fn from_position(layout: &Layout, v: &DVector<C64>, axes: &[usize], sites: usize) -> DVector<C64> {
    let fd = dft_matrix(sites).adjoint();
    axes.iter()
        .fold(v.clone(), |acc, &a| apply_axis(layout, &acc, a, &fd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Basis, ParticleSpec};
    use crate::tolerance::{DEFAULT_MAX_DIMENSION as CAP, EXACT};

    fn spec3() -> LatticeSpec {
        LatticeSpec::external_only(3, &["A", "B", "C"]).unwrap()
    }

    #[test]
    fn conditional_translation_is_a_permutation() {
        let spec = spec3();
        let layout = spec.kinematical_layout();
        let t = LinearOperator::on(
            &spec,
            layout,
            OperatorKind::ConditionalTranslation {
                target: 0,
                sources: vec![1, 2],
                sign: 1,
                offset: 0,
            },
            OperatorClass::UNITARY,
            "T",
        )
        .unwrap();
        let m = t.to_dense(CAP).unwrap();
        for c in 0..27 {
            let col = m.column(c);
            assert_eq!(col.iter().filter(|x| x.norm() > 0.5).count(), 1);
        }
        assert!(t.unitarity_defect(CAP).unwrap() < EXACT);
    }

    #[test]
    fn parity_swap_relabels_and_negates() {
        let spec = LatticeSpec::external_only(4, &["A", "B", "C"]).unwrap();
        let dom = spec.reduced_layout("A").unwrap();
        let cod = spec.reduced_layout("C").unwrap();
        let p = LinearOperator::new(
            &spec,
            dom.clone(),
            cod.clone(),
            OperatorKind::ParitySwap {
                source: 2,
                target: 0,
                attach: None,
            },
            OperatorClass::UNITARY,
            "P",
        )
        .unwrap();
        let mut v = DVector::zeros(16);
        v[dom.flat_index(&[2, 1])] = C64::new(1.0, 0.0);
        let w = p.apply_vec(&v);
        assert_eq!(w[cod.flat_index(&[3, 2])], C64::new(1.0, 0.0));
        assert!(p.unitarity_defect(CAP).unwrap() < EXACT);
    }

    #[test]
    fn parity_swap_onto_present_mode_is_rejected() {
        let spec = spec3();
        let layout = spec.kinematical_layout();
        let r = LinearOperator::new(
            &spec,
            layout.clone(),
            layout,
            OperatorKind::ParitySwap {
                source: 2,
                target: 0,
                attach: None,
            },
            OperatorClass::UNITARY,
            "P",
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn controlled_shift_matches_position_permutation() {
        // σ ↦ σ + (q_A − q_B) mod 2 on L = 2: position-basis CNOT-like action.
        let spec = LatticeSpec::new(
            2,
            vec![
                ParticleSpec::external("A"),
                ParticleSpec::external("B"),
                ParticleSpec::new("C", 2),
            ],
        )
        .unwrap();
        let layout = spec.kinematical_layout();
        let op = LinearOperator::on(
            &spec,
            layout.clone(),
            OperatorKind::ControlledShift {
                controls: (0, 1),
                target: Factor::internal(2),
                multiplier: 1,
            },
            OperatorClass::UNITARY,
            "shift",
        )
        .unwrap();
        assert!(op.unitarity_defect(CAP).unwrap() < EXACT);
        // Momentum basis: |k_A,k_B,σ,k_C⟩. The shift depends on q_A − q_B
        // only, so it commutes with total momentum and preserves k_A + k_B.
        let m = op.to_dense(CAP).unwrap();
        for r in 0..layout.dim() {
            for c in 0..layout.dim() {
                if m[(r, c)].norm() > 1e-12 {
                    let a = layout.multi_index(r);
                    let b = layout.multi_index(c);
                    assert_eq!((a[0] + a[1]) % 2, (b[0] + b[1]) % 2);
                }
            }
        }
    }

    #[test]
    fn position_diagonal_is_unitary_for_phases() {
        let spec = spec3();
        let layout = spec.kinematical_layout();
        let entries =
            DVector::from_iterator(27, (0..27).map(|i| C64::from_polar(1.0, 0.37 * i as f64)));
        let op = LinearOperator::on(
            &spec,
            layout,
            OperatorKind::Diagonal {
                basis: Basis::Position,
                entries,
            },
            OperatorClass::UNITARY,
            "phase",
        )
        .unwrap();
        assert!(op.unitarity_defect(CAP).unwrap() < EXACT);
    }

    #[test]
    fn composition_checks_layouts() {
        let spec = spec3();
        let full = spec.kinematical_layout();
        let red = spec.reduced_layout("A").unwrap();
        let a = LinearOperator::identity(&spec, full);
        let b = LinearOperator::identity(&spec, red);
        assert!(matches!(a.then(&b), Err(Error::Contract(_))));
    }

    #[test]
    fn densify_respects_cap() {
        let spec = spec3();
        let op = LinearOperator::identity(&spec, spec.kinematical_layout());
        assert!(matches!(
            op.to_dense(10),
            Err(Error::Resource { dim: 27, cap: 10 })
        ));
    }
}
