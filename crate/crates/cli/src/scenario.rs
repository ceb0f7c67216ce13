//! Scenario files: JSON descriptions of one experiment.

use std::path::Path;
use std::sync::Arc;

use cnp_core::coeffmodel::{PolyElement, WeightFamily};
use cnp_core::kernels::{KernelSpec, Point, SampleSet};
use cnp_core::linalg::CMat;
use cnp_core::samplespace::{PointConstraint, PointwiseConstraintSpec, RkhsElement, SampleSpace, Subspace};
use cnp_core::sampling::{radial_grid, uniform_ball};
use cnp_core::{cjson, Complex64, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    KernelCheck,
    Synthesize,
    Leech,
    Pipeline,
    Rootfn,
    Counterexample,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::KernelCheck => "kernel-check",
            Task::Synthesize => "synthesize",
            Task::Leech => "leech",
            Task::Pipeline => "pipeline",
            Task::Rootfn => "rootfn",
            Task::Counterexample => "counterexample",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub kernels: Option<Kernels>,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
    #[serde(default = "one")]
    pub fiber_dim: usize,
    #[serde(default)]
    pub subspaces: Subspaces,
    #[serde(default)]
    pub rootfn: Option<RootFnSpec>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Tolerance for the built-in verification checks.
    #[serde(default = "default_check_tol")]
    pub check_tol: f64,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

fn one() -> usize {
    1
}

fn default_check_tol() -> f64 {
    1e-7
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernels {
    pub k: KernelSpec,
    #[serde(default)]
    pub s: Option<KernelSpec>,
    /// Kernel of the smaller space in a three-kernel request.
    #[serde(default)]
    pub l: Option<KernelSpec>,
}

/// A disc point `[re, im]` or a ball point `[[re, im], …]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointJson {
    Disc([f64; 2]),
    Ball(Vec<[f64; 2]>),
}

impl PointJson {
    pub fn to_point(&self) -> Point {
        match self {
            PointJson::Disc(p) => Point::disc(cjson::from_pair(*p)),
            PointJson::Ball(ps) => Point::new(ps.iter().map(|p| cjson::from_pair(*p)).collect()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSpec {
    Explicit {
        points: Vec<PointJson>,
    },
    RadialGrid {
        radii: Vec<f64>,
        thetas: Vec<f64>,
    },
    /// Uniform in the ball of radius `radius` in `ℂ^dim` (the disc when `dim = 1`),
    /// followed by the `append` points.
    Uniform {
        n: usize,
        #[serde(default = "one")]
        dim: usize,
        radius: f64,
        seed: u64,
        #[serde(default)]
        append: Vec<PointJson>,
    },
}

impl SampleSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            SampleSpec::Uniform { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn with_seed(&mut self, new_seed: u64) {
        if let SampleSpec::Uniform { seed, .. } = self {
            *seed = new_seed;
        }
    }

    pub fn build(&self) -> Result<Arc<SampleSet>, CliError> {
        let points = match self {
            SampleSpec::Explicit { points } => points.iter().map(PointJson::to_point).collect(),
            SampleSpec::RadialGrid { radii, thetas } => radial_grid(radii, thetas),
            SampleSpec::Uniform {
                n,
                dim,
                radius,
                seed,
                append,
            } => {
                let mut pts = uniform_ball(*n, *dim, *radius, *seed);
                pts.extend(append.iter().map(PointJson::to_point));
                pts
            }
        };
        Ok(Arc::new(SampleSet::new(points, None)?))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subspaces {
    #[serde(default)]
    pub m: Option<SubspaceSpec>,
    #[serde(default)]
    pub n: Option<SubspaceSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintJson {
    pub at: PointJson,
    /// Allowed directions as columns, given as rows of `[re, im]` pairs (`p` rows).
    /// Empty means the value must vanish.
    #[serde(default)]
    pub allowed: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionJson {
    pub at: PointJson,
    /// Fiber vector `ξ` of the section `K(·, x) ξ`; defaults to `e_1`.
    #[serde(default)]
    pub vector: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubspaceSpec {
    Whole,
    Constraints {
        #[serde(default)]
        zeros: Vec<PointJson>,
        #[serde(default)]
        constraints: Vec<ConstraintJson>,
    },
    Spanning {
        sections: Vec<SectionJson>,
    },
}

fn locate(sample: &SampleSet, p: &PointJson) -> Result<usize, CliError> {
    let point = p.to_point();
    sample
        .index_of(&point)
        .ok_or_else(|| CliError::Invalid(format!("point {point} is not in the sample")))
}

impl SubspaceSpec {
    pub fn build(&self, space: &Arc<SampleSpace>, tol_rank: f64) -> Result<Subspace, CliError> {
        let sample = space.sample();
        let p = space.block_dim();
        match self {
            SubspaceSpec::Whole => Ok(space.whole()),
            SubspaceSpec::Constraints { zeros, constraints } => {
                let mut list = Vec::new();
                for z in zeros {
                    list.push(PointConstraint::zero(locate(sample, z)?, p));
                }
                for con in constraints {
                    let i = locate(sample, &con.at)?;
                    let allowed = if con.allowed.is_empty() {
                        CMat::zeros(p, 0)
                    } else {
                        cjson::matrix_from_rows(&con.allowed).map_err(CliError::Invalid)?
                    };
                    list.push(PointConstraint::new(i, allowed)?);
                }
                Ok(space.subspace_from_constraints(&PointwiseConstraintSpec::new(list), tol_rank)?)
            }
            SubspaceSpec::Spanning { sections } => {
                let elements = sections
                    .iter()
                    .map(|sec| {
                        let i = locate(sample, &sec.at)?;
                        let xi = match &sec.vector {
                            Some(v) => {
                                cnp_core::CVec::from_iterator(v.len(), v.iter().map(|z| cjson::from_pair(*z)))
                            }
                            None => cnp_core::linalg::unit(p, 0),
                        };
                        Ok(space.kernel_section(i, &xi)?)
                    })
                    .collect::<Result<Vec<RkhsElement>, CliError>>()?;
                Ok(space.subspace_from_spanning(&elements, tol_rank)?)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `Π (z − a_j)`.
    Roots { roots: Vec<[f64; 2]> },
    /// `Σ a_m z^m`.
    Coeffs { coeffs: Vec<[f64; 2]> },
}

impl GeneratorSpec {
    pub fn polynomial(&self) -> PolyElement {
        match self {
            GeneratorSpec::Coeffs { coeffs } => {
                PolyElement::new(coeffs.iter().map(|z| cjson::from_pair(*z)).collect())
            }
            GeneratorSpec::Roots { roots } => {
                let mut acc = vec![Complex64::new(1.0, 0.0)];
                for r in roots {
                    let factor = PolyElement::root_power(cjson::from_pair(*r), 1);
                    let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
                    for (i, x) in acc.iter().enumerate() {
                        for (j, y) in factor.coeffs().iter().enumerate() {
                            next[i + j] += x * y;
                        }
                    }
                    acc = next;
                }
                PolyElement::new(acc)
            }
        }
    }

    /// Short human-readable form, e.g. `(z-0.5)(z-0.5)`.
    pub fn label(&self) -> String {
        let num = |z: Complex64| {
            if z.im == 0.0 {
                format!("{}", z.re)
            } else {
                format!("({}{:+}i)", z.re, z.im)
            }
        };
        match self {
            GeneratorSpec::Roots { roots } if roots.is_empty() => "1".into(),
            GeneratorSpec::Roots { roots } => roots
                .iter()
                .map(|r| {
                    let a = cjson::from_pair(*r);
                    if a == Complex64::new(0.0, 0.0) {
                        "z".to_string()
                    } else {
                        format!("(z-{})", num(a))
                    }
                })
                .collect(),
            GeneratorSpec::Coeffs { coeffs } => {
                let terms: Vec<String> = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, z)| z[0] != 0.0 || z[1] != 0.0)
                    .map(|(m, z)| format!("{}z^{m}", num(cjson::from_pair(*z))))
                    .collect();
                if terms.is_empty() {
                    "0".into()
                } else {
                    terms.join("+")
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootFnSpec {
    pub weights: WeightFamily,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub generators: Vec<GeneratorSpec>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Repeat the sweep at twice the degree and flag large changes.
    #[serde(default = "yes")]
    pub check_stability: bool,
}

fn default_degree() -> usize {
    cnp_core::coeffmodel::DEFAULT_DEGREE
}

fn default_radii() -> Vec<f64> {
    cnp_core::coeffmodel::DEFAULT_RADII.to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "hardy")]
    pub numerator: WeightFamily,
    #[serde(default = "bergman")]
    pub denominator: WeightFamily,
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        Self {
            degrees: default_degrees(),
            numerator: hardy(),
            denominator: bergman(),
        }
    }
}

fn default_degrees() -> Vec<usize> {
    vec![0, 99, 399]
}

fn hardy() -> WeightFamily {
    WeightFamily::Hardy
}

fn bergman() -> WeightFamily {
    WeightFamily::Bergman
}

/// A condition on a report value, addressed by a JSON pointer into `result`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub path: String,
    #[serde(default)]
    pub equals: Option<serde_json::Value>,
    /// Absolute tolerance for numeric `equals`.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// Command-line overrides applied on top of a scenario.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub tol_psd: Option<f64>,
    pub tol_rank: Option<f64>,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.tol_psd {
            self.tolerances.psd = t;
        }
        if let Some(t) = o.tol_rank {
            self.tolerances.rank = t;
        }
        if let (Some(seed), Some(sample)) = (o.seed, self.sample.as_mut()) {
            sample.with_seed(seed);
        }
    }

    pub fn kernels(&self) -> Result<&Kernels, CliError> {
        self.kernels
            .as_ref()
            .ok_or_else(|| CliError::Invalid(format!("task needs a \"kernels\" section ({})", self.name)))
    }

    pub fn sample_spec(&self) -> Result<&SampleSpec, CliError> {
        self.sample
            .as_ref()
            .ok_or_else(|| CliError::Invalid("task needs a \"sample\" section".into()))
    }
}
