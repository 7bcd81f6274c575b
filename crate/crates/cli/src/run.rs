//! Command execution: everything is computed in memory, then written once.

use std::path::Path;

use cocycle_lab::classify::{
    self, BunchingResult, Direction, DominationResult, TrivialOrDominated, UniformBunching,
};
use cocycle_lab::flatten::{self, FlatteningInput};
use cocycle_lab::gallery;
use cocycle_lab::katok;
use cocycle_lab::linalg::{self, Matrix};
use cocycle_lab::spectral;
use cocycle_lab::{cocycle, Cocycle, Error, Tolerances};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{self, ExpectationCheck, Outcome, Provenance, Report, Status, Table};
use crate::scenario::{self, Analysis, LyapunovChoice, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: Option<usize>,
    pub tol_scale: f64,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Format,
    pub expect_strict: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: None,
            tol_scale: 1.0,
            seed: None,
            threads: None,
            format: Format::Json,
            expect_strict: false,
        }
    }
}

/// Default step count for Lyapunov estimates on infinite cocycles.
pub const DEFAULT_LYAPUNOV_STEPS: usize = 2000;
/// Largest sample grid accepted by the assembly diagnostics.
pub const MAX_GRID_POINTS: usize = 1_000_000;

struct Context<'a> {
    scenario: &'a Scenario,
    cocycle: Cocycle,
    tol: Tolerances,
    horizon: Option<usize>,
}

fn needs(what: &str) -> Error {
    Error::InvalidInput(format!("{what} is required for an infinite cocycle"))
}

fn period_factors(c: &Cocycle) -> cocycle_lab::Result<Vec<Matrix>> {
    let p = c.period().ok_or(Error::NotPeriodic)?;
    (0..p).map(|i| c.factor(i)).collect()
}

impl Context<'_> {
    fn horizon_or(&self, given: Option<usize>, what: &str) -> cocycle_lab::Result<usize> {
        self.horizon
            .or(given)
            .or(self.cocycle.horizon())
            .ok_or_else(|| needs(what))
    }

    fn lyapunov(
        &self,
        method: LyapunovChoice,
        n: Option<usize>,
    ) -> cocycle_lab::Result<spectral::LyapunovReport> {
        let n = self
            .horizon
            .or(n)
            .or(self.cocycle.horizon())
            .unwrap_or(DEFAULT_LYAPUNOV_STEPS);
        match method {
            LyapunovChoice::Qr => spectral::lyapunov_qr(&self.cocycle, n),
            LyapunovChoice::Exterior => spectral::lyapunov_exterior(&self.cocycle, n),
            LyapunovChoice::Eigen => spectral::lyapunov_eigen(&self.cocycle),
        }
    }

    fn analyse(&self, a: &Analysis) -> cocycle_lab::Result<Outcome> {
        let c = &self.cocycle;
        Ok(match a {
            Analysis::ThetaSeries { start, max_len } => {
                let len = match self.horizon.or(*max_len) {
                    Some(l) => l,
                    None => c
                        .horizon()
                        .ok_or_else(|| needs("max_len"))?
                        .checked_sub(*start)
                        .ok_or(Error::InvalidInput("start exceeds the horizon".into()))?,
                };
                let log_theta = cocycle::theta_series(c, *start, len)?;
                Outcome::ThetaSeries {
                    start: *start,
                    slope: report::slope(&log_theta),
                    log_theta,
                }
            }
            Analysis::Witness {
                tau,
                horizon,
                direction,
            } => {
                let h = self.horizon_or(*horizon, "witness horizon")?;
                Outcome::Witness(classify::witness_build_with(
                    c,
                    *tau,
                    h,
                    *direction,
                    self.tol.ratio,
                )?)
            }
            Analysis::Ph { k, variant } => {
                let s = c
                    .splitting()
                    .ok_or(Error::MissingSplitting("unstable/center/stable"))?;
                Outcome::Ph(classify::ph_check(c, s, *k, *variant)?)
            }
            Analysis::Lyapunov { method, n } => Outcome::Lyapunov(self.lyapunov(*method, *n)?),
            Analysis::SpectrumBunching { n } => {
                let s = c.splitting().ok_or(Error::MissingSplitting("center"))?;
                let method = if c.period().is_some() {
                    LyapunovChoice::Eigen
                } else {
                    LyapunovChoice::Qr
                };
                let exponents = self.lyapunov(method, *n)?.exponents;
                let verdict = classify::spectrum_bunching_test(&exponents, s, c.is_symplectic())?;
                Outcome::SpectrumBunching { exponents, verdict }
            }
            Analysis::UniformBunching { theta, m_max } => {
                Outcome::UniformBunching(classify::uniform_bunching_check(c, *theta, *m_max)?)
            }
            Analysis::Domination { dim_e, m_max } => {
                Outcome::Domination(classify::domination_search(c, *dim_e, *m_max)?)
            }
            Analysis::TrivialOrDominated { m_max, n } => {
                let r = self.lyapunov(LyapunovChoice::Eigen, *n)?;
                Outcome::TrivialOrDominated(classify::trivial_or_dominated_check(
                    &r,
                    c,
                    *m_max,
                    self.tol.gap,
                )?)
            }
            Analysis::Ellipticity { eps } => {
                let factors = period_factors(c)?;
                let product = factors
                    .iter()
                    .fold(Matrix::identity(c.dim(), c.dim()), |acc, m| m * acc);
                Outcome::Ellipticity(classify::ellipticity_check(&product, factors.len(), *eps)?)
            }
            Analysis::Flatten { eps } => {
                let input = FlatteningInput {
                    factors: period_factors(c)?,
                    eps: *eps,
                };
                let result = flatten::flatten_with(&input, &self.tol)?;
                let certificate = flatten::verify_flattening(&input, &result)?;
                Outcome::Flatten {
                    result,
                    certificate,
                }
            }
            Analysis::Remark { m_list } => {
                let h = self.horizon_or(None, "remark horizon")?;
                Outcome::Remark(gallery::verify_remark(h, m_list)?)
            }
            Analysis::ProductModel { model } => {
                let spec = match (model, self.scenario.gallery_id()) {
                    (Some(m), _) => m.clone(),
                    (None, Some("product-basic")) => gallery::product_basic(),
                    (None, Some("product-obstructed")) => gallery::product_obstructed(),
                    _ => {
                        return Err(Error::InvalidInput(
                            "product_model needs a model or a product gallery source".into(),
                        ))
                    }
                };
                Outcome::ProductModel(gallery::product_model_check(&spec)?)
            }
            Analysis::Katok {
                blocks,
                epsilon,
                grid,
            } => {
                let (default_blocks, default_eps) = gallery::katok_linear();
                let blocks = blocks.clone().unwrap_or(default_blocks);
                let eps = epsilon.unwrap_or(default_eps);
                let dim = 2 * blocks.len();
                let points = (grid.per_axis.max(1) as f64).powi(dim as i32);
                if points > MAX_GRID_POINTS as f64 {
                    return Err(Error::InvalidInput(format!(
                        "grid of {points} points exceeds {MAX_GRID_POINTS}"
                    )));
                }
                let samples = katok::sample_grid(dim, grid.per_axis, grid.radius);
                Outcome::Katok(katok::katok_assemble(blocks, eps, &samples)?.1)
            }
        })
    }
}

fn decisions(outcome: &Outcome) -> Vec<(&'static str, Option<bool>)> {
    let witness = |r: BunchingResult| match r {
        BunchingResult::Holds => Some(true),
        BunchingResult::Fails => Some(false),
        BunchingResult::UndecidedAtHorizon => None,
    };
    match outcome {
        Outcome::Witness(v) => {
            let key = match v.direction {
                Direction::Forward => "forward_bunched",
                Direction::Backward => "backward_bunched",
            };
            vec![(key, witness(v.result))]
        }
        Outcome::SpectrumBunching { verdict, .. } => vec![
            ("forward_bunched", verdict.forward),
            ("backward_bunched", verdict.backward),
        ],
        Outcome::Ph(r) => vec![("partially_hyperbolic", Some(r.holds))],
        Outcome::UniformBunching(u) => vec![(
            "uniformly_bunched",
            matches!(u, UniformBunching::Uniform { .. }).then_some(true),
        )],
        Outcome::Domination(d) => vec![(
            "dominated",
            (d.result == DominationResult::Dominated).then_some(true),
        )],
        Outcome::TrivialOrDominated(t) => vec![(
            "dominated",
            matches!(t, TrivialOrDominated::Dominated { .. }).then_some(true),
        )],
        Outcome::Ellipticity(e) => vec![("elliptic", Some(e.elliptic))],
        Outcome::Flatten { certificate, .. } => {
            vec![("flattening_certified", Some(certificate.passed))]
        }
        Outcome::Remark(r) => vec![("remark_verified", Some(r.passed))],
        Outcome::ProductModel(p) => vec![
            ("product_conditions_hold", Some(p.all_hold)),
            (
                "obstruction_triggered",
                p.obstruction.as_ref().map(|o| o.triggered),
            ),
        ],
        _ => Vec::new(),
    }
}

/// Compare asserted verdicts with the first analysis that decides each key.
/// Undecided keys pass unless `strict`.
pub fn check_expectations(
    scenario: &Scenario,
    outcomes: &[Outcome],
    strict: bool,
) -> Vec<ExpectationCheck> {
    let Some(expect) = scenario.expect else {
        return Vec::new();
    };
    expect
        .entries()
        .into_iter()
        .map(|(key, expected)| {
            let actual = outcomes
                .iter()
                .flat_map(decisions)
                .find(|(k, v)| *k == key && v.is_some())
                .and_then(|(_, v)| v);
            let ok = match actual {
                Some(a) => a == expected,
                None => !strict,
            };
            ExpectationCheck {
                key: key.to_string(),
                expected,
                actual,
                ok,
            }
        })
        .collect()
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluate a scenario into a report plus series tables.
pub fn evaluate(scenario: &Scenario, opts: &RunOptions) -> Result<(Report, Vec<Table>), CliError> {
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(CliError::Input(format!(
            "--tol-scale must be positive, got {}",
            opts.tol_scale
        )));
    }
    let base = Tolerances::default().scaled(opts.tol_scale);
    let tol = scenario.tolerances.unwrap_or_default().apply(base);
    let seed = opts.seed.or(scenario.seed).unwrap_or(0);
    let cocycle = scenario.build_cocycle(opts.horizon, seed)?;
    let ctx = Context {
        scenario,
        cocycle,
        tol,
        horizon: opts.horizon,
    };
    let results: Vec<cocycle_lab::Result<Outcome>> = in_pool(opts.threads, || {
        scenario
            .analyses
            .par_iter()
            .map(|a| ctx.analyse(a))
            .collect()
    })?;
    let mut outcomes = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        outcomes.push(r.map_err(|e| {
            CliError::from(e).context(&format!("analyses[{i}] ({})", scenario.analyses[i].kind()))
        })?);
    }
    let expectations = check_expectations(scenario, &outcomes, opts.expect_strict);
    let status = if expectations.iter().all(|e| e.ok) {
        Status::Ok
    } else {
        Status::Mismatch
    };
    let tables = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| report::series(i, o))
        .collect();
    let report = Report {
        provenance: Provenance {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: scenario.schema_version,
            scenario: scenario.name.clone(),
            seed,
            horizon_override: opts.horizon,
            tol_scale: opts.tol_scale,
            tolerances: tol,
        },
        analyses: outcomes,
        expectations,
        status,
    };
    Ok((report, tables))
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn write_all(out_dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn run(scenario_path: &Path, out_dir: &Path, opts: &RunOptions) -> Result<Status, CliError> {
    let scenario = scenario::load(scenario_path)?;
    let (report, tables) = evaluate(&scenario, opts)?;
    let mut files: Vec<(String, String)> = match opts.format {
        Format::Json => vec![("report.json".into(), report_json(&report))],
        Format::Csv => vec![("report.csv".into(), report::report_table(&report).to_csv())],
    };
    files.extend(tables.iter().map(|t| (t.name.clone(), t.to_csv())));
    write_all(out_dir, &files)?;
    for e in report.expectations.iter().filter(|e| !e.ok) {
        eprintln!(
            "expectation `{}` = {} not met (actual: {})",
            e.key,
            e.expected,
            e.actual.map_or("undecided".to_string(), |a| a.to_string())
        );
    }
    Ok(report.status)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlattenFile {
    #[serde(with = "linalg::serde_matrices")]
    pub factors: Vec<Matrix>,
    pub eps: f64,
    /// Perturbations to certify with `--verify-only`.
    #[serde(default, with = "opt_matrices")]
    pub perturbations: Option<Vec<Matrix>>,
}

mod opt_matrices {
    use cocycle_lab::linalg::{self, Matrix};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "linalg::serde_matrices")] Vec<Matrix>);

    pub fn serialize<S: Serializer>(v: &Option<Vec<Matrix>>, s: S) -> Result<S::Ok, S::Error> {
        v.clone().map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Matrix>>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenReport {
    pub eps: f64,
    pub verify_only: bool,
    pub result: Option<flatten::FlatteningResult>,
    pub certificate: flatten::FlatteningCertificate,
}

pub fn flatten_cmd(
    input_path: &Path,
    out_dir: &Path,
    verify_only: bool,
    format: Format,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", input_path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: FlattenFile = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Input(format!("{}: {}", e.path(), e.inner())))?;
    let input = FlatteningInput {
        factors: file.factors,
        eps: file.eps,
    };
    let (result, certificate, bs) = if verify_only {
        let bs = file
            .perturbations
            .ok_or_else(|| CliError::Input("perturbations: required with --verify-only".into()))?;
        let cert = flatten::verify_perturbations(&input, &bs)?;
        (None, cert, bs)
    } else {
        let result = flatten::flatten(&input)?;
        let cert = flatten::verify_flattening(&input, &result)?;
        let bs = result.perturbations.clone();
        (Some(result), cert, bs)
    };
    let rep = FlattenReport {
        eps: input.eps,
        verify_only,
        result,
        certificate,
    };
    let mut files = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rep).expect("report serializes");
            s.push('\n');
            vec![("flatten.json".to_string(), s)]
        }
        Format::Csv => {
            let t = Table {
                name: "flatten.csv".into(),
                header: vec!["check".into(), "value".into(), "bound".into(), "ok".into()],
                rows: rep
                    .certificate
                    .checks
                    .iter()
                    .map(|c| {
                        vec![
                            c.name.clone(),
                            c.value.to_string(),
                            c.bound.to_string(),
                            c.ok.to_string(),
                        ]
                    })
                    .collect(),
            };
            vec![(t.name.clone(), t.to_csv())]
        }
    };
    let mut rows = Vec::new();
    for (k, b) in bs.iter().enumerate() {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                rows.push(vec![
                    k.to_string(),
                    i.to_string(),
                    j.to_string(),
                    b[(i, j)].to_string(),
                ]);
            }
        }
    }
    let t = Table {
        name: "perturbations.csv".into(),
        header: vec!["k".into(), "row".into(), "col".into(), "value".into()],
        rows,
    };
    files.push((t.name.clone(), t.to_csv()));
    write_all(out_dir, &files)
}

pub fn gallery_listing() -> String {
    let width = gallery::GALLERY
        .iter()
        .map(|(id, _)| id.len())
        .max()
        .unwrap_or(0);
    gallery::GALLERY
        .iter()
        .map(|(id, d)| format!("{id:width$}  {d}\n"))
        .collect()
}
