//! Declarative scenario files (TOML).
//!
//! ```toml
//! version = 1
//! name = "apparatus-frame"
//! sites = 3
//! checks = ["probability-preservation", "order-swap"]
//!
//! [[particles]]
//! label = "C"
//! internal_dim = 3
//!
//! [state]
//! kind = "product"
//! modes = [{ mode = "C:ext", basis = "position", index = 0 }, { mode = "C:int", index = 0 }]
//!
//! [[unitary]]
//! recipe = "controlled-internal-shift"
//! controls = ["B", "C"]
//! target = "C"
//!
//! [measurement]
//! pointer = "C:int"
//! perspectives = ["C", "A"]
//! ```

use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{
    mode_state, random_vector, tensor_state, to_basis, Basis, Factor, LatticeSpec, LinearOperator,
    ParticleSpec, StateKind, StateVector, C64,
};
use crate::measurement::Pointer;
use crate::recipes;
use crate::tolerance::{DEFAULT_MAX_DIMENSION, EXACT, PIPELINE};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Outcome probabilities agree across perspectives and sum to one.
    ProbabilityPreservation,
    /// Switched post states match the target perspective's own post states.
    SwitchConsistency,
    /// Reduced Kraus family of the first perspective is complete.
    Completeness,
    /// `Ŝ_n M_n φ` equals the observer's post state entrywise.
    KrausSwitch,
    /// Projection and reduction commute.
    OrderSwap,
    /// Projector onto the full apparatus state gives the wrong probability.
    WrongProjector,
    /// Entropy table over the configured cuts; defect is the asymmetry.
    Entanglement,
    /// Structured pipelines against dense brute-force twins.
    Oracle,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::ProbabilityPreservation => "probability-preservation",
            Check::SwitchConsistency => "switch-consistency",
            Check::Completeness => "completeness",
            Check::KrausSwitch => "kraus-switch",
            Check::OrderSwap => "order-swap",
            Check::WrongProjector => "wrong-projector",
            Check::Entanglement => "entanglement",
            Check::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub sites: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Evaluate outcomes on scoped threads.
    #[serde(default)]
    pub parallel_outcomes: bool,
    #[serde(default)]
    pub checks: Vec<Check>,
    pub particles: Vec<ParticleSpec>,
    pub state: StateConfig,
    /// Applied in order; empty means the identity.
    #[serde(default)]
    pub unitary: Vec<RecipeConfig>,
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub entanglement: Vec<CutConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    /// One entry per mode; every mode appears exactly once.
    Product { modes: Vec<ModeConfig> },
    /// Full kinematical amplitudes in the momentum basis, `[re, im]` pairs.
    Amplitudes { amplitudes: Vec<[f64; 2]> },
    /// Seeded random kinematical state.
    Random,
}

/// Exactly one of `amplitudes`, `index` or `random` must be given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    /// `"B:ext"` / `"B:int"`; a bare `"B"` only when B has no internal mode.
    pub mode: String,
    #[serde(default = "momentum")]
    pub basis: Basis,
    #[serde(default)]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub index: Option<usize>,
    #[serde(default)]
    pub random: bool,
}

fn momentum() -> Basis {
    Basis::Momentum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RecipeConfig {
    Identity,
    ControlledInternalShift {
        controls: [String; 2],
        target: String,
        #[serde(default = "one")]
        multiplier: i64,
    },
    MomentumTransfer {
        control: String,
        pointer: String,
        recoil: String,
    },
    RelativeMomentumPhase {
        particles: [String; 2],
        theta: f64,
    },
    /// Uses `seed` if given, otherwise the scenario seed offset by the
    /// recipe's position in the list.
    RandomInvariant {
        #[serde(default = "unit")]
        strength: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn one() -> i64 {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// `"E"` for the external momentum of E, `"C:int"` for C's internal mode.
    pub pointer: String,
    /// The first entry is the perspective every other one is compared with.
    pub perspectives: Vec<String>,
    /// Outcome examined by the wrong-projector check.
    #[serde(default)]
    pub outcome: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutConfig {
    pub keep: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub exact: f64,
    pub pipeline: f64,
    /// Minimum probability gap the wrong projector must produce.
    pub wrong_projector_gap: f64,
    pub max_dimension: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: EXACT,
            pipeline: PIPELINE,
            wrong_projector_gap: 1e-3,
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub max_dimension: Option<usize>,
}

/// A validated scenario, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub spec: LatticeSpec,
    /// Kinematical, momentum basis, normalized.
    pub state: StateVector,
    /// Per-mode factors (momentum basis) when the state is a product.
    pub modes: Option<Vec<StateVector>>,
    pub unitary: LinearOperator,
    pub pointer: Pointer,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(t) = o.tolerance {
            self.tolerances.pipeline = t;
        }
        if let Some(m) = o.max_dimension {
            self.tolerances.max_dimension = m;
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn uses_randomness(&self) -> bool {
        matches!(self.state, StateConfig::Random)
            || matches!(&self.state, StateConfig::Product { modes } if modes.iter().any(|m| m.random))
            || self
                .unitary
                .iter()
                .any(|r| matches!(r, RecipeConfig::RandomInvariant { seed: None, .. }))
    }

    /// Checks every field and builds the scenario. All problems found are
    /// reported together.
    pub fn validate(&self) -> Result<Scenario> {
        let mut problems = Vec::new();
        if self.version != FORMAT_VERSION {
            problems.push(format!(
                "version: expected {FORMAT_VERSION}, got {}",
                self.version
            ));
        }
        if self.name.is_empty() {
            problems.push("name: must not be empty".into());
        }
        if self.uses_randomness() && self.seed.is_none() {
            problems.push("seed: required because the scenario uses a random preset".into());
        }
        let tol = &self.tolerances;
        if !(tol.pipeline > 0.0 && tol.exact > 0.0 && tol.wrong_projector_gap > 0.0) {
            problems.push("tolerances: must be positive".into());
        }
        for (i, c) in self.checks.iter().enumerate() {
            if self.checks[..i].contains(c) {
                problems.push(format!("checks: `{}` requested twice", c.name()));
            }
        }
        let spec = match LatticeSpec::new(self.sites, self.particles.clone()) {
            Ok(s) => Some(s),
            Err(Error::Config(p)) => {
                problems.extend(p.into_iter().map(|m| format!("particles: {m}")));
                None
            }
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        let Some(spec) = spec else {
            return Err(Error::Config(problems));
        };
        let dim = spec.kinematical_layout().dim();
        if dim > tol.max_dimension {
            problems.push(format!(
                "dimension {dim} exceeds max_dimension {}",
                tol.max_dimension
            ));
            return Err(Error::Config(problems));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
        let (state, modes) = match self.build_state(&spec, &mut rng, &mut problems) {
            Some((s, m)) => (Some(s), m),
            None => (None, None),
        };
        let unitary = self.build_unitary(&spec, &mut problems);
        let pointer = self.check_measurement(&spec, modes.is_some(), &mut problems);
        for (i, cut) in self.entanglement.iter().enumerate() {
            if cut.keep.is_empty() {
                problems.push(format!("entanglement[{i}].keep: must not be empty"));
            }
            let names: Vec<&str> = cut.keep.iter().map(String::as_str).collect();
            if let Err(e) = spec.select(&spec.kinematical_layout(), &names) {
                problems.push(format!("entanglement[{i}].keep: {e}"));
            }
        }
        if self.checks.contains(&Check::Entanglement) && self.entanglement.is_empty() {
            problems.push("entanglement: the entanglement check needs at least one cut".into());
        }
        match (problems.is_empty(), state, unitary, pointer) {
            (true, Some(state), Some(unitary), Some(pointer)) => Ok(Scenario {
                config: self.clone(),
                spec,
                state,
                modes,
                unitary,
                pointer,
            }),
            _ => Err(Error::Config(problems)),
        }
    }

    fn build_state(
        &self,
        spec: &LatticeSpec,
        rng: &mut ChaCha8Rng,
        problems: &mut Vec<String>,
    ) -> Option<(StateVector, Option<Vec<StateVector>>)> {
        let full = spec.kinematical_layout();
        let tol = self.tolerances.pipeline;
        match &self.state {
            StateConfig::Random => {
                let s = StateVector::random(spec, full, StateKind::Kinematical, rng).normalized();
                Some((s, None))
            }
            StateConfig::Amplitudes { amplitudes } => {
                let v = complex(amplitudes);
                if v.len() != full.dim() {
                    problems.push(format!(
                        "state.amplitudes: {} entries, layout {} needs {}",
                        v.len(),
                        full.describe(spec),
                        full.dim()
                    ));
                    return None;
                }
                if (v.norm_squared() - 1.0).abs() > tol {
                    problems.push(format!(
                        "state.amplitudes: norm² {} is not 1",
                        v.norm_squared()
                    ));
                    return None;
                }
                StateVector::kinematical(spec, v).ok().map(|s| (s, None))
            }
            StateConfig::Product { modes } => {
                let mut factors: Vec<StateVector> = Vec::new();
                let mut seen: Vec<Factor> = Vec::new();
                let mut ok = true;
                for (i, m) in modes.iter().enumerate() {
                    match build_mode(spec, m, rng, tol) {
                        Ok(s) => {
                            let f = s.layout().factors()[0];
                            if seen.contains(&f) {
                                problems.push(format!(
                                    "state.modes[{i}]: mode {} given twice",
                                    spec.factor_name(f)
                                ));
                                ok = false;
                            }
                            seen.push(f);
                            factors.push(s);
                        }
                        Err(e) => {
                            problems.push(format!("state.modes[{i}] ({}): {e}", m.mode));
                            ok = false;
                        }
                    }
                }
                for f in full.factors() {
                    if !seen.contains(f) {
                        problems.push(format!(
                            "state.modes: mode {} missing",
                            spec.factor_name(*f)
                        ));
                        ok = false;
                    }
                }
                if !ok {
                    return None;
                }
                factors.sort_by_key(|s| s.layout().factors()[0]);
                let state = tensor_state(&factors).ok()?;
                Some((state, Some(factors)))
            }
        }
    }

    fn build_unitary(
        &self,
        spec: &LatticeSpec,
        problems: &mut Vec<String>,
    ) -> Option<LinearOperator> {
        let mut ops = Vec::new();
        for (i, r) in self.unitary.iter().enumerate() {
            let op = match r {
                RecipeConfig::Identity => Ok(recipes::identity(spec)),
                RecipeConfig::ControlledInternalShift {
                    controls,
                    target,
                    multiplier,
                } => recipes::controlled_internal_shift(
                    spec,
                    (&controls[0], &controls[1]),
                    target,
                    *multiplier,
                ),
                RecipeConfig::MomentumTransfer {
                    control,
                    pointer,
                    recoil,
                } => recipes::momentum_transfer(spec, control, pointer, recoil),
                RecipeConfig::RelativeMomentumPhase { particles, theta } => {
                    recipes::relative_momentum_phase(spec, (&particles[0], &particles[1]), *theta)
                }
                RecipeConfig::RandomInvariant { strength, seed } => {
                    let seed =
                        seed.unwrap_or_else(|| self.seed.unwrap_or(0).wrapping_add(i as u64 + 1));
                    recipes::random_invariant(spec, seed, *strength, self.tolerances.max_dimension)
                }
            };
            match op {
                Ok(op) => ops.push(op),
                Err(e) => problems.push(format!("unitary[{i}]: {e}")),
            }
        }
        if ops.len() < self.unitary.len() {
            return None;
        }
        let mut it = ops.into_iter();
        let Some(first) = it.next() else {
            return Some(recipes::identity(spec));
        };
        let mut u = first;
        for op in it {
            u = u.then(&op).ok()?;
        }
        Some(u)
    }

    fn check_measurement(
        &self,
        spec: &LatticeSpec,
        product: bool,
        problems: &mut Vec<String>,
    ) -> Option<Pointer> {
        let m = &self.measurement;
        let pointer: Pointer = match m.pointer.parse() {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("measurement.pointer: {e}"));
                return None;
            }
        };
        let pf = match pointer.factor(spec) {
            Ok(f) => f,
            Err(e) => {
                problems.push(format!("measurement.pointer: {e}"));
                return None;
            }
        };
        if m.perspectives.is_empty() {
            problems.push("measurement.perspectives: must not be empty".into());
        }
        for (i, r) in m.perspectives.iter().enumerate() {
            if spec.particle_index(r).is_err() {
                problems.push(format!(
                    "measurement.perspectives[{i}]: unknown label `{r}`"
                ));
            } else if m.perspectives[..i].contains(r) {
                problems.push(format!("measurement.perspectives[{i}]: `{r}` listed twice"));
            } else if pf.is_external() && r == pointer.particle() {
                problems.push(format!(
                    "measurement.perspectives[{i}]: `{r}` carries the momentum pointer"
                ));
            }
        }
        let outcomes = spec.factor_dim(pf);
        if m.outcome >= outcomes {
            problems.push(format!(
                "measurement.outcome: {} out of range for {outcomes} outcomes",
                m.outcome
            ));
        }
        let apparatus_first = !pf.is_external()
            && m.perspectives.first().map(String::as_str) == Some(pointer.particle())
            && m.perspectives.len() > 1;
        for c in [Check::WrongProjector, Check::KrausSwitch] {
            if self.checks.contains(&c) && !apparatus_first {
                problems.push(format!(
                    "checks: `{}` needs an internal pointer whose owner is the first of at least two perspectives",
                    c.name()
                ));
            }
        }
        for c in [
            Check::WrongProjector,
            Check::KrausSwitch,
            Check::Completeness,
        ] {
            if self.checks.contains(&c) && !product {
                problems.push(format!(
                    "checks: `{}` needs a product initial state",
                    c.name()
                ));
            }
        }
        Some(pointer)
    }
}

fn complex(v: &[[f64; 2]]) -> DVector<C64> {
    DVector::from_iterator(v.len(), v.iter().map(|[re, im]| C64::new(*re, *im)))
}

fn build_mode(
    spec: &LatticeSpec,
    m: &ModeConfig,
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Result<StateVector> {
    let factors = spec.select(&spec.kinematical_layout(), &[&m.mode])?;
    let [f] = factors[..] else {
        return Err(Error::config(format!(
            "`{}` names {} modes; use `:ext` or `:int`",
            m.mode,
            factors.len()
        )));
    };
    let d = spec.factor_dim(f);
    let given = [m.amplitudes.is_some(), m.index.is_some(), m.random]
        .iter()
        .filter(|x| **x)
        .count();
    if given != 1 {
        return Err(Error::config(
            "give exactly one of `amplitudes`, `index`, `random`",
        ));
    }
    if !f.is_external() && m.basis == Basis::Position {
        return Err(Error::config("internal modes have no position basis"));
    }
    let amps = if let Some(a) = &m.amplitudes {
        let v = complex(a);
        if v.len() != d {
            return Err(Error::config(format!(
                "{} amplitudes, mode needs {d}",
                v.len()
            )));
        }
        if (v.norm_squared() - 1.0).abs() > tol {
            return Err(Error::config(format!(
                "norm² {} is not 1",
                v.norm_squared()
            )));
        }
        v
    } else if let Some(i) = m.index {
        if i >= d {
            return Err(Error::Range {
                what: "index",
                value: i as i64,
                bound: d,
            });
        }
        let mut v = DVector::zeros(d);
        v[i] = C64::new(1.0, 0.0);
        v
    } else {
        let v = random_vector(d, rng);
        let n = v.norm();
        v / C64::new(n, 0.0)
    };
    let mut s = mode_state(spec, f, amps)?;
    if f.is_external() && m.basis == Basis::Position {
        s.set_basis(f.particle, Basis::Position);
        s = to_basis(&s, Basis::Momentum)?;
    }
    Ok(s)
}
