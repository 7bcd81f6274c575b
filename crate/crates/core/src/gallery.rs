//! Named constructions: the doubling-schedule counterexample to forward
//! center bunching, constant-derivative product models and their
//! spectral-radius obstruction, and the linear block-assembly example.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::classify::{self, BunchingResult, BunchingVerdict, Direction};
use crate::cocycle::{self, Cocycle, ScheduleRule};
use crate::error::{Error, Result};
use crate::katok::{KatokBlock, Perturbation};
use crate::linalg::{self, diag, Matrix};

/// Gallery ids with one-line descriptions, in listing order.
pub const GALLERY: [(&str, &str); 4] = [
    (
        "remark",
        "doubling A/B schedule on the stable block with constant center: log Θ(0,n) = n/4 yet not forward center bunched",
    ),
    (
        "product-basic",
        "product model with DF ±2, DG ±1 and a rotation on the center factor; conditions (2)-(5) hold",
    ),
    (
        "product-obstructed",
        "product model whose stable rate at a fixed point beats the squared center rate; non-bunching obstruction triggered",
    ),
    (
        "katok-linear",
        "block assembly of rigid rotations with planar aligners; exactly the linear map L",
    ),
];

pub fn lookup(id: &str) -> Result<&'static str> {
    GALLERY
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::InvalidInput(format!("unknown gallery id `{id}`")))
}

pub fn remark_a() -> Matrix {
    diag(&[E.powi(-2), E.recip()])
}

pub fn remark_b() -> Matrix {
    diag(&[(-0.5f64).exp(), E.recip()])
}

pub fn remark_c() -> Matrix {
    diag(&[1.0, 0.75f64.exp()])
}

/// Stable block driven by `A, B, A, A, B, B, A×4, B×4, …`, constant center
/// block `C`, no unstable block: splitting `(0, 2, 2)`.
pub fn remark_cocycle(horizon: usize) -> Result<Cocycle> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let stable = Cocycle::schedule(
        vec![("A".into(), remark_a()), ("B".into(), remark_b())],
        ScheduleRule::DoublingPairs,
    )?;
    let center = Cocycle::constant(remark_c())?;
    Cocycle::block_diagonal(None, Some(center), Some(stable))?.with_horizon(horizon)
}

/// `j_m = 2^{m+1} + 2^m − 2`: start of the `m`-th long `B` run.
pub fn remark_window(m: u32) -> (usize, usize) {
    ((1usize << (m + 1)) + (1usize << m) - 2, 1usize << m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkWindow {
    pub m: u32,
    pub j: usize,
    pub n: usize,
    pub log_theta: f64,
    pub error: f64,
    /// `n_m > j_m / 10`.
    pub long_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkReport {
    pub horizon: usize,
    /// `max_n |log Θ(0, n) − n/4|`.
    pub origin_theta_error: f64,
    /// `max_n |log‖A(0,n)|E^s‖ + n|`.
    pub stable_norm_error: f64,
    /// `max_n |log m(A(0,n)|E^c)|` and `max_n |log‖A(0,n)|E^c‖ − 3n/4|`.
    pub center_error: f64,
    pub windows: Vec<RemarkWindow>,
    /// `min_m log Θ(j_m, n_m) / n_m`.
    pub liminf_estimate: f64,
    pub witness: BunchingVerdict,
    pub passed: bool,
}

/// Absolute tolerance on the closed-form log quantities.
pub const REMARK_TOL: f64 = 1e-12;

pub fn verify_remark(horizon: usize, m_list: &[u32]) -> Result<RemarkReport> {
    if let Some(&m) = m_list.iter().max() {
        let needed = (1usize << (m + 2)) - 2;
        if needed > horizon {
            return Err(Error::HorizonTooShort {
                needed,
                available: horizon,
            });
        }
    }
    let c = remark_cocycle(horizon)?;
    let split = c.splitting().expect("remark cocycle is split");
    let mut sweep = c.sweep(0, &split.dims())?;
    let (mut origin_theta_error, mut stable_norm_error, mut center_error) =
        (0.0f64, 0.0f64, 0.0f64);
    for n in 1..=horizon {
        sweep.advance()?;
        let logs = sweep.logs()?;
        let nf = n as f64;
        origin_theta_error =
            origin_theta_error.max((cocycle::log_theta_from_blocks(&logs) - nf / 4.0).abs());
        stable_norm_error = stable_norm_error.max((logs[2].log_norm + nf).abs());
        center_error = center_error
            .max(logs[1].log_conorm.abs())
            .max((logs[1].log_norm - 0.75 * nf).abs());
    }
    let mut windows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let (j, n) = remark_window(m);
        let log_theta = cocycle::theta(&c, j, n)?;
        windows.push(RemarkWindow {
            m,
            j,
            n,
            log_theta,
            error: (log_theta + n as f64 / 4.0).abs(),
            long_window: n as f64 > j as f64 / 10.0,
        });
    }
    let liminf_estimate = windows
        .iter()
        .map(|w| w.log_theta / w.n as f64)
        .fold(f64::INFINITY, f64::min);
    let witness = classify::witness_build(&c, 0.25, horizon, Direction::Forward)?;
    let passed = origin_theta_error <= REMARK_TOL
        && stable_norm_error <= REMARK_TOL
        && center_error <= REMARK_TOL
        && windows
            .iter()
            .all(|w| w.error <= REMARK_TOL && w.long_window)
        && witness.result != BunchingResult::Holds;
    Ok(RemarkReport {
        horizon,
        origin_theta_error,
        stable_norm_error,
        center_error,
        windows,
        liminf_estimate,
        witness,
        passed,
    })
}

/// Derivative data of `F × G × H` with `F`, `G` Anosov and `H` carrying the
/// center. Each list holds the derivative along one periodic orbit (a single
/// entry for constant derivatives); sup/inf run over the entries and the
/// integral in condition 4 is the average over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductModelSpec {
    #[serde(with = "linalg::serde_matrices")]
    pub df_unstable: Vec<Matrix>,
    #[serde(with = "linalg::serde_matrices")]
    pub df_stable: Vec<Matrix>,
    #[serde(with = "linalg::serde_matrices")]
    pub dg_unstable: Vec<Matrix>,
    #[serde(with = "linalg::serde_matrices")]
    pub dg_stable: Vec<Matrix>,
    #[serde(with = "linalg::serde_matrices")]
    pub dh: Vec<Matrix>,
    /// Orbit of the periodic point `p` of condition 5; its length is the period `k`.
    pub periodic_point: PeriodicOrbit,
    /// Hyperbolic periodic points `p'` of `F` and `q` of `H` for the obstruction.
    #[serde(default)]
    pub obstruction: Option<ObstructionData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicOrbit {
    #[serde(with = "linalg::serde_matrices")]
    pub stable: Vec<Matrix>,
    #[serde(with = "linalg::serde_matrices")]
    pub unstable: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionData {
    /// `D F|E^s` along the orbit of `p'` (length `ℓ`).
    #[serde(with = "linalg::serde_matrices")]
    pub f_stable_orbit: Vec<Matrix>,
    /// `D H` along the orbit of `q` (length `m`).
    #[serde(with = "linalg::serde_matrices")]
    pub h_orbit: Vec<Matrix>,
}

/// A chain `a < b ≤ c < d` in log scale, reported by its three slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: u8,
    pub holds: bool,
    /// `[b − a, c − b, d − c]`.
    pub slacks: [f64; 3],
    /// Whether each slot is strict.
    pub strict: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    /// `(1/ℓ) log ρ(D_{p'} F^ℓ|E^s)`.
    pub stable_rate: f64,
    /// `−(2/m) log ρ(D_q H^m)`.
    pub center_rate: f64,
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductModelReport {
    /// Condition (1) is an input assumption and is not verified.
    pub anosov_assumed: bool,
    pub conditions: Vec<ConditionReport>,
    pub all_hold: bool,
    pub obstruction: Option<ObstructionReport>,
}

/// Slack tolerance for the non-strict slot, which holds identically.
const NON_STRICT_TOL: f64 = 1e-12;

fn chain(condition: u8, a: f64, b: f64, c: f64, d: f64, strict: [bool; 3]) -> ConditionReport {
    let slacks = [b - a, c - b, d - c];
    let holds = slacks
        .iter()
        .zip(strict)
        .all(|(&s, st)| if st { s > 0.0 } else { s >= -NON_STRICT_TOL });
    ConditionReport {
        condition,
        holds,
        slacks,
        strict,
    }
}

fn log_norms(ms: &[Matrix]) -> Result<Vec<f64>> {
    ms.iter().map(|m| Ok(linalg::norm2(m)?.ln())).collect()
}

fn log_conorms(ms: &[Matrix]) -> Result<Vec<f64>> {
    ms.iter().map(|m| Ok(linalg::conorm(m)?.ln())).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn inf(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn orbit_product(ms: &[Matrix]) -> Result<Matrix> {
    let first = ms
        .first()
        .ok_or_else(|| Error::InvalidInput("empty periodic orbit".into()))?;
    let d = first.nrows();
    Ok(ms.iter().fold(Matrix::identity(d, d), |acc, m| m * acc))
}

fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(linalg::eigen_moduli(m)?[0])
}

impl ProductModelSpec {
    fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("df_unstable", &self.df_unstable),
            ("df_stable", &self.df_stable),
            ("dg_unstable", &self.dg_unstable),
            ("dg_stable", &self.dg_stable),
            ("dh", &self.dh),
            ("periodic_point.stable", &self.periodic_point.stable),
            ("periodic_point.unstable", &self.periodic_point.unstable),
        ] {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("{name} is empty")));
            }
            for m in list.iter() {
                linalg::check_square(m, name)?;
            }
        }
        if self.periodic_point.stable.len() != self.periodic_point.unstable.len() {
            return Err(Error::InvalidInput(
                "periodic point stable and unstable orbits differ in length".into(),
            ));
        }
        Ok(())
    }
}

/// Conditions 2 to 5 as log-slack chains, plus the obstruction when supplied.
/// Condition 1 (`F`, `G` Anosov) is assumed.
///
/// 2. `sup log‖DG_s‖ < 2 inf log m(DH) ≤ 2 sup log‖DH‖ < inf log m(DG_u)`
/// 3. `sup log‖DF_s‖ < inf log m(DH) ≤ sup log‖DH‖ < inf log m(DF_u)`
/// 4. `mean log‖DF_s‖ < 2 inf log m(DH) ≤ 2 sup log‖DH‖ < mean log m(DF_u)`
/// 5. `log‖DF_s^k(p)‖ < k inf log m(DG_s) < k sup log‖DG_u‖ < log m(DF_u^k(p))`
pub fn product_model_check(spec: &ProductModelSpec) -> Result<ProductModelReport> {
    spec.validate()?;
    let fs = log_norms(&spec.df_stable)?;
    let fu = log_conorms(&spec.df_unstable)?;
    let gs = log_norms(&spec.dg_stable)?;
    let gu_conorm = log_conorms(&spec.dg_unstable)?;
    let gu_norm = log_norms(&spec.dg_unstable)?;
    let gs_conorm = log_conorms(&spec.dg_stable)?;
    let h_conorm = log_conorms(&spec.dh)?;
    let h_norm = log_norms(&spec.dh)?;
    let mixed = [true, false, true];
    let mut conditions = vec![
        chain(
            2,
            sup(&gs),
            2.0 * inf(&h_conorm),
            2.0 * sup(&h_norm),
            inf(&gu_conorm),
            mixed,
        ),
        chain(3, sup(&fs), inf(&h_conorm), sup(&h_norm), inf(&fu), mixed),
        chain(
            4,
            mean(&fs),
            2.0 * inf(&h_conorm),
            2.0 * sup(&h_norm),
            mean(&fu),
            mixed,
        ),
    ];
    let k = spec.periodic_point.stable.len() as f64;
    let pf_s = linalg::norm2(&orbit_product(&spec.periodic_point.stable)?)?.ln();
    let pf_u = linalg::conorm(&orbit_product(&spec.periodic_point.unstable)?)?.ln();
    conditions.push(chain(
        5,
        pf_s,
        k * inf(&gs_conorm),
        k * sup(&gu_norm),
        pf_u,
        [true, true, true],
    ));
    let obstruction = match &spec.obstruction {
        None => None,
        Some(ob) => {
            let l = ob.f_stable_orbit.len() as f64;
            let m = ob.h_orbit.len() as f64;
            let stable_rate = spectral_radius(&orbit_product(&ob.f_stable_orbit)?)?.ln() / l;
            let center_rate = -2.0 * spectral_radius(&orbit_product(&ob.h_orbit)?)?.ln() / m;
            Some(ObstructionReport {
                stable_rate,
                center_rate,
                triggered: stable_rate > center_rate,
            })
        }
    };
    Ok(ProductModelReport {
        anosov_assumed: true,
        all_hold: conditions.iter().all(|c| c.holds),
        conditions,
        obstruction,
    })
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// The derivative cocycle of `F × G × H` along the sampled orbits, split as
/// `E^u = E^u_F ⊕ E^u_G`, `E^c = TS`, `E^s = E^s_F ⊕ E^s_G`.
pub fn product_cocycle(spec: &ProductModelSpec) -> Result<Cocycle> {
    spec.validate()?;
    let pair = |f: &[Matrix], g: &[Matrix]| -> Result<Cocycle> {
        let p = lcm(f.len(), g.len());
        Cocycle::periodic(
            (0..p)
                .map(|i| linalg::block_diagonal(&[&f[i % f.len()], &g[i % g.len()]]))
                .collect(),
        )
    };
    Cocycle::block_diagonal(
        Some(pair(&spec.df_unstable, &spec.dg_unstable)?),
        Some(Cocycle::periodic(spec.dh.clone())?),
        Some(pair(&spec.df_stable, &spec.dg_stable)?),
    )
}

fn scalar(x: f64) -> Matrix {
    diag(&[x.exp()])
}

pub fn product_basic() -> ProductModelSpec {
    ProductModelSpec {
        df_unstable: vec![scalar(2.0)],
        df_stable: vec![scalar(-2.0)],
        dg_unstable: vec![scalar(1.0)],
        dg_stable: vec![scalar(-1.0)],
        dh: vec![linalg::rotation(0.7)],
        periodic_point: PeriodicOrbit {
            stable: vec![scalar(-2.0)],
            unstable: vec![scalar(2.0)],
        },
        obstruction: None,
    }
}

/// `F` expands by `e^{2.5}` at three of four sampled points and by `e^{0.5}`
/// at a fixed point `p'`; `H` is hyperbolic with rates `±0.4`.
pub fn product_obstructed() -> ProductModelSpec {
    let fu = vec![scalar(2.5), scalar(2.5), scalar(2.5), scalar(0.5)];
    let fs = vec![scalar(-2.5), scalar(-2.5), scalar(-2.5), scalar(-0.5)];
    let dh = diag(&[0.4f64.exp(), (-0.4f64).exp()]);
    ProductModelSpec {
        df_unstable: fu,
        df_stable: fs,
        dg_unstable: vec![scalar(1.0)],
        dg_stable: vec![scalar(-1.0)],
        dh: vec![dh.clone()],
        periodic_point: PeriodicOrbit {
            stable: vec![scalar(-2.5)],
            unstable: vec![scalar(2.5)],
        },
        obstruction: Some(ObstructionData {
            f_stable_orbit: vec![scalar(-0.5)],
            h_orbit: vec![dh],
        }),
    }
}

/// Two rigid rotations with non-orthogonal aligners and no perturbation.
pub fn katok_linear() -> (Vec<KatokBlock>, f64) {
    let blocks = vec![
        KatokBlock {
            angle: 0.9,
            aligner: Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 0.5]),
            perturbation: Perturbation::None,
        },
        KatokBlock {
            angle: 2.1,
            aligner: Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 1.0]),
            perturbation: Perturbation::None,
        },
    ];
    (blocks, 0.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ph_check, PhVariant};
    use crate::cocycle::SplittingSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_prefix_and_stable_norms() {
        let c = remark_cocycle(30).unwrap();
        assert_eq!(c.symbols(6).unwrap(), vec!["A", "B", "A", "A", "B", "B"]);
        let w = c.window_product(0, 30).unwrap();
        assert_abs_diff_eq!(w.blocks[2].log_norm, -30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.blocks[1].log_conorm, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.blocks[1].log_norm, 22.5, epsilon = 1e-12);
        assert_eq!(c.splitting(), Some(SplittingSpec::new(0, 2, 2)));
    }

    #[test]
    fn remark_theta_windows() {
        let c = remark_cocycle(130).unwrap();
        assert_eq!(remark_window(5), (94, 32));
        assert_abs_diff_eq!(cocycle::theta(&c, 94, 32).unwrap(), -8.0, epsilon = 1e-12);
        for n in [1, 7, 64, 130] {
            assert_abs_diff_eq!(
                cocycle::theta(&c, 0, n).unwrap(),
                n as f64 / 4.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn remark_dyadic_supermultiplicativity() {
        let c = remark_cocycle(130).unwrap();
        let chk =
            cocycle::theta_supermultiplicativity_check(&c, &[0, 2, 6, 14, 30, 62, 126]).unwrap();
        assert!(chk.slack >= 0.0, "{}", chk.slack);
    }

    #[test]
    fn verify_remark_example() {
        let r = verify_remark(130, &[3, 4, 5]).unwrap();
        assert!(r.passed, "{r:?}");
        let w5 = r.windows.iter().find(|w| w.m == 5).unwrap();
        assert_eq!((w5.j, w5.n), (94, 32));
        assert!(w5.long_window);
        assert!(matches!(
            verify_remark(100, &[5]),
            Err(Error::HorizonTooShort { needed: 126, .. })
        ));
    }

    #[test]
    fn remark_is_bit_deterministic() {
        let a = remark_cocycle(64).unwrap();
        let b = remark_cocycle(64).unwrap();
        assert_eq!(a, b);
        for i in 0..64 {
            assert_eq!(a.factor(i).unwrap(), b.factor(i).unwrap());
        }
    }

    #[test]
    fn product_basic_conditions() {
        let r = product_model_check(&product_basic()).unwrap();
        assert!(r.all_hold);
        // Oracle: the four norms of each chain evaluated directly.
        let expect = [
            [1.0, 0.0, 1.0],
            [2.0, 0.0, 2.0],
            [2.0, 0.0, 2.0],
            [1.0, 2.0, 1.0],
        ];
        for (c, e) in r.conditions.iter().zip(expect) {
            for (s, x) in c.slacks.iter().zip(e) {
                assert_abs_diff_eq!(*s, x, epsilon = 1e-12);
            }
        }
        assert!(r.obstruction.is_none());
    }

    #[test]
    fn hyperbolic_center_condition_three() {
        let mut spec = product_basic();
        spec.dh = vec![diag(&[0.4f64.exp(), (-0.4f64).exp()])];
        let r = product_model_check(&spec).unwrap();
        let c3 = &r.conditions[1];
        assert!(c3.holds);
        assert_abs_diff_eq!(c3.slacks[0], -0.4 + 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c3.slacks[2], 2.0 - 0.4, epsilon = 1e-12);
    }

    #[test]
    fn obstructed_model() {
        let r = product_model_check(&product_obstructed()).unwrap();
        let ob = r.obstruction.unwrap();
        assert!(ob.triggered);
        assert_abs_diff_eq!(ob.stable_rate, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ob.center_rate, -0.8, epsilon = 1e-12);
        assert!(r.all_hold);
    }

    #[test]
    fn product_cocycle_is_partially_hyperbolic() {
        let c = product_cocycle(&product_basic()).unwrap();
        let r = ph_check(&c, c.splitting().unwrap(), 1, PhVariant::Relative).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn slacks_invariant_under_orthogonal_conjugation() {
        let mut g = linalg::rng(17);
        let base = product_model_check(&product_obstructed()).unwrap();
        let mut spec = product_obstructed();
        let q = linalg::random_orthogonal(2, &mut g);
        spec.dh = spec.dh.iter().map(|m| &q * m * q.transpose()).collect();
        let r = product_model_check(&spec).unwrap();
        for (a, b) in base.conditions.iter().zip(&r.conditions) {
            for (x, y) in a.slacks.iter().zip(&b.slacks) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gallery_lookup() {
        assert!(lookup("remark").is_ok());
        assert!(lookup("product-basic").is_ok());
        assert!(lookup("nope").is_err());
    }
}
