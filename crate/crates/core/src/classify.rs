//! Decision procedures on cocycles: partial hyperbolicity, center bunching
//! (spectral and by greedy witness sequences), uniform bunching, ellipticity
//! of periodic products and domination.

use serde::{Deserialize, Serialize};

use crate::cocycle::{log_theta_from_blocks, Cocycle, SplittingSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, RATIO_TOL, TOL_EIG};
use crate::spectral::{self, LyapunovReport, TOL_SYM_EXP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhVariant {
    Relative,
    Absolute,
}

/// Minimum log-slacks of the strict partial hyperbolicity inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhMargins {
    /// `log m(A|E^u) − 0` (absolute: against `max(1, ‖A|E^c‖)` instead).
    pub unstable_expansion: f64,
    /// `0 − log‖A|E^s‖` (absolute: against `min(1, m(A|E^c))` instead).
    pub stable_contraction: f64,
    /// `log m(A|E^u) − log‖A|E^c‖`.
    pub unstable_over_center: f64,
    /// `log m(A|E^c) − log‖A|E^s‖`.
    pub center_over_stable: f64,
}

impl PhMargins {
    pub fn min(&self) -> f64 {
        self.unstable_expansion
            .min(self.stable_contraction)
            .min(self.unstable_over_center)
            .min(self.center_over_stable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhReport {
    pub variant: PhVariant,
    pub steps: usize,
    pub holds: bool,
    pub margins: PhMargins,
    /// Start indices that were sampled.
    pub starts: usize,
}

struct BlockRow {
    log_conorm_u: f64,
    log_norm_c: f64,
    log_conorm_c: f64,
    log_norm_s: f64,
}

fn ph_rows(c: &Cocycle, s: SplittingSpec, k: usize) -> Result<Vec<BlockRow>> {
    c.quantifier_starts(k)?
        .into_iter()
        .map(|x| {
            let mut sweep = c.sweep(x, &s.dims())?;
            for _ in 0..k {
                sweep.advance()?;
            }
            let logs = sweep.logs()?;
            Ok(BlockRow {
                log_conorm_u: logs[0].log_conorm,
                log_norm_c: logs[1].log_norm,
                log_conorm_c: logs[1].log_conorm,
                log_norm_s: logs[2].log_norm,
            })
        })
        .collect()
}

/// Partial hyperbolicity of `c` for the splitting `s` after `k` steps, at every
/// start index of one period (or every admissible start of a finite cocycle).
pub fn ph_check(c: &Cocycle, s: SplittingSpec, k: usize, variant: PhVariant) -> Result<PhReport> {
    s.require_nonzero()?;
    if s.dim() != c.dim() {
        return Err(Error::InvalidInput(
            "splitting does not match the cocycle dimension".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidInput(
            "step count k must be at least 1".into(),
        ));
    }
    let rows = ph_rows(c, s, k)?;
    let min_of = |f: &dyn Fn(&BlockRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let max_of =
        |f: &dyn Fn(&BlockRow) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let margins = match variant {
        PhVariant::Relative => PhMargins {
            unstable_expansion: min_of(&|r| r.log_conorm_u),
            stable_contraction: min_of(&|r| -r.log_norm_s),
            unstable_over_center: min_of(&|r| r.log_conorm_u - r.log_norm_c),
            center_over_stable: min_of(&|r| r.log_conorm_c - r.log_norm_s),
        },
        PhVariant::Absolute => {
            let inf_u = min_of(&|r| r.log_conorm_u);
            let sup_c = max_of(&|r| r.log_norm_c);
            let inf_c = min_of(&|r| r.log_conorm_c);
            let sup_s = max_of(&|r| r.log_norm_s);
            PhMargins {
                unstable_expansion: inf_u - sup_c.max(0.0),
                stable_contraction: inf_c.min(0.0) - sup_s,
                unstable_over_center: inf_u - sup_c,
                center_over_stable: inf_c - sup_s,
            }
        }
    };
    Ok(PhReport {
        variant,
        steps: k,
        holds: margins.min() > 0.0,
        margins,
        starts: rows.len(),
    })
}

/// Spectral center bunching verdicts; `None` when the direction lacks a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBunching {
    pub forward: Option<bool>,
    pub backward: Option<bool>,
    /// `−λ_{ℓ+1} − (λ_{k+1} − λ_ℓ)`.
    pub forward_slack: Option<f64>,
    /// `λ_k − (λ_{k+1} − λ_ℓ)`.
    pub backward_slack: Option<f64>,
    /// `λ_k − 2λ_{k+1}`, for symplectic spectra.
    pub symplectic_slack: Option<f64>,
}

/// Center bunching read off a descending exponent list with `k = d_u` and
/// `ℓ = d_u + d_c`: forward iff `λ_{k+1} − λ_ℓ < −λ_{ℓ+1}`, backward iff
/// `λ_{k+1} − λ_ℓ < λ_k`.
pub fn spectrum_bunching_test(
    exponents: &[f64],
    s: SplittingSpec,
    symplectic: bool,
) -> Result<SpectrumBunching> {
    if exponents.len() != s.dim() {
        return Err(Error::InvalidInput(format!(
            "{} exponents for a splitting of dimension {}",
            exponents.len(),
            s.dim()
        )));
    }
    if s.center == 0 {
        return Err(Error::MissingSplitting("center"));
    }
    if exponents.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput("exponents must be descending".into()));
    }
    let (k, l) = (s.unstable, s.unstable + s.center);
    // 1-based λ_i is exponents[i − 1].
    let lam = |i: usize| exponents[i - 1];
    if k > 0 && lam(k) <= lam(k + 1) {
        return Err(Error::SplittingGapViolation(format!(
            "λ_{k} = {} does not exceed λ_{} = {}",
            lam(k),
            k + 1,
            lam(k + 1)
        )));
    }
    if s.stable > 0 && lam(l) <= lam(l + 1) {
        return Err(Error::SplittingGapViolation(format!(
            "λ_{l} = {} does not exceed λ_{} = {}",
            lam(l),
            l + 1,
            lam(l + 1)
        )));
    }
    let spread = lam(k + 1) - lam(l);
    let forward_slack = (s.stable > 0).then(|| -lam(l + 1) - spread);
    let backward_slack = (k > 0).then(|| lam(k) - spread);
    let mut symplectic_slack = None;
    if symplectic {
        if s.unstable != s.stable || k == 0 {
            return Err(Error::SymplecticShortcutMismatch(format!(
                "symplectic splitting needs d_u = d_s > 0, got ({}, {}, {})",
                s.unstable, s.center, s.stable
            )));
        }
        let short = lam(k) - 2.0 * lam(k + 1);
        let tol = 2.0 * TOL_SYM_EXP;
        for (name, slack) in [("forward", forward_slack), ("backward", backward_slack)] {
            let slack = slack.expect("both bundles present");
            if (slack - short).abs() > tol {
                return Err(Error::SymplecticShortcutMismatch(format!(
                    "{name} slack {slack} vs shortcut slack {short}"
                )));
            }
        }
        symplectic_slack = Some(short);
    }
    Ok(SpectrumBunching {
        forward: forward_slack.map(|x| x > 0.0),
        backward: backward_slack.map(|x| x > 0.0),
        forward_slack,
        backward_slack,
        symplectic_slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMode {
    Spectrum,
    Witness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BunchingResult {
    Holds,
    Fails,
    UndecidedAtHorizon,
}

/// Greedy indices `0 = i_0 < i_1 < …` with `log Θ(i_k, i_{k+1} − i_k) > (τ/2)(i_{k+1} − i_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// `log θ = τ/2`.
    pub log_theta_base: f64,
    pub indices: Vec<usize>,
    /// `log Θ(i_k, i_{k+1} − i_k)` for each consecutive pair.
    pub window_log_theta: Vec<f64>,
    /// Largest `i_{k+1}/i_k` over pairs with `i_k` in the last quarter of the horizon.
    pub max_tail_ratio: f64,
}

/// A window whose Θ-rate contradicts the requested bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refutation {
    pub start: usize,
    pub len: usize,
    pub log_theta: f64,
    /// `log Θ / len`; the requested bound was `> τ/2`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BunchingVerdict {
    pub direction: Direction,
    pub mode: VerdictMode,
    pub result: BunchingResult,
    pub tau: f64,
    pub horizon: usize,
    pub witness: Option<Witness>,
    /// Index from which no window up to the horizon extends the sequence.
    pub stall_index: Option<usize>,
    pub refutation: Option<Refutation>,
}

/// Tail condition: for pairs with `i_k ≥ 3/4 · last`, the step
/// `i_{k+1} − i_k` is at most `max(1, ratio_tol · i_k)`.
fn tail_ok(indices: &[usize], ratio_tol: f64) -> (bool, f64) {
    let last = *indices.last().expect("i_0 present");
    let from = 3 * last / 4;
    let mut ok = true;
    let mut worst: f64 = 1.0;
    for w in indices.windows(2) {
        if w[0] == 0 || w[0] < from {
            continue;
        }
        worst = worst.max(w[1] as f64 / w[0] as f64);
        let step = (w[1] - w[0]) as f64;
        if step > (ratio_tol * w[0] as f64).max(1.0) {
            ok = false;
        }
    }
    (ok, worst)
}

/// Greedy witness for forward center bunching at rate `τ`, up to `horizon`.
/// The backward direction runs the same construction on the reversed
/// inverse cocycle.
pub fn witness_build(
    c: &Cocycle,
    tau: f64,
    horizon: usize,
    direction: Direction,
) -> Result<BunchingVerdict> {
    witness_build_with(c, tau, horizon, direction, RATIO_TOL)
}

pub fn witness_build_with(
    c: &Cocycle,
    tau: f64,
    horizon: usize,
    direction: Direction,
    ratio_tol: f64,
) -> Result<BunchingVerdict> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tau must be positive, got {tau}"
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let owned;
    let c = match direction {
        Direction::Forward => c,
        Direction::Backward => {
            owned = c.reversed_inverse()?;
            &owned
        }
    };
    let split = c
        .splitting()
        .ok_or(Error::MissingSplitting("center/stable"))?;
    if split.center == 0 {
        return Err(Error::MissingSplitting("center"));
    }
    if split.stable == 0 {
        return Err(Error::MissingSplitting("stable"));
    }
    if let Some(h) = c.horizon() {
        if h < horizon {
            return Err(Error::HorizonTooShort {
                needed: horizon,
                available: h,
            });
        }
    }
    let rate = tau / 2.0;
    let mut indices = vec![0usize];
    let mut window_log_theta = Vec::new();
    let mut current = 0usize;
    while current < horizon {
        let mut sweep = c.sweep(current, &split.dims())?;
        let mut found = None;
        let mut worst: Option<Refutation> = None;
        for len in 1..=horizon - current {
            sweep.advance()?;
            let lt = log_theta_from_blocks(&sweep.logs()?);
            if lt > rate * len as f64 {
                found = Some((len, lt));
                break;
            }
            let r = lt / len as f64;
            if worst.is_none_or(|w| r < w.rate) {
                worst = Some(Refutation {
                    start: current,
                    len,
                    log_theta: lt,
                    rate: r,
                });
            }
        }
        match found {
            Some((len, lt)) => {
                current += len;
                indices.push(current);
                window_log_theta.push(lt);
            }
            None => {
                let (_, max_tail_ratio) = tail_ok(&indices, ratio_tol);
                return Ok(BunchingVerdict {
                    direction,
                    mode: VerdictMode::Witness,
                    result: BunchingResult::Fails,
                    tau,
                    horizon,
                    witness: Some(Witness {
                        log_theta_base: rate,
                        indices,
                        window_log_theta,
                        max_tail_ratio,
                    }),
                    stall_index: Some(current),
                    refutation: worst,
                });
            }
        }
    }
    let (ok, max_tail_ratio) = tail_ok(&indices, ratio_tol);
    Ok(BunchingVerdict {
        direction,
        mode: VerdictMode::Witness,
        result: if ok {
            BunchingResult::Holds
        } else {
            BunchingResult::UndecidedAtHorizon
        },
        tau,
        horizon,
        witness: Some(Witness {
            log_theta_base: rate,
            indices,
            window_log_theta,
            max_tail_ratio,
        }),
        stall_index: None,
        refutation: None,
    })
}

/// Re-verify a witness against freshly computed window products.
pub fn reverify_witness(c: &Cocycle, w: &Witness, tol: f64) -> Result<bool> {
    for pair in w.indices.windows(2) {
        let len = pair[1] - pair[0];
        let lt = crate::cocycle::theta(c, pair[0], len)?;
        if lt < len as f64 * w.log_theta_base - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum UniformBunching {
    /// Every start index reaches `log Θ(p, i) > log θ` for some `i ≤ m`; the
    /// bound `log Θ(p, n) ≥ log c + (n/m) log θ` holds with this `log c` on the
    /// tested horizon.
    Uniform {
        m: usize,
        log_c: f64,
        tested_horizon: usize,
    },
    NotUniformUpTo {
        m_max: usize,
    },
}

/// Uniform bunching over one period of start indices.
pub fn uniform_bunching_check(c: &Cocycle, theta: f64, m_max: usize) -> Result<UniformBunching> {
    if !(theta > 1.0 && theta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "theta must exceed 1, got {theta}"
        )));
    }
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    let period = c.period().ok_or(Error::NotPeriodic)?;
    let split = c
        .splitting()
        .ok_or(Error::MissingSplitting("center/stable"))?;
    if split.center == 0 || split.stable == 0 {
        return Err(Error::MissingSplitting("center/stable"));
    }
    let log_theta = theta.ln();
    let tested_horizon_for = |m: usize| 8 * m + period;
    // Series long enough for both the search and the constant.
    let longest = tested_horizon_for(m_max);
    let mut series = Vec::with_capacity(period);
    for p in 0..period {
        series.push(crate::cocycle::theta_series(c, p, longest)?);
    }
    let mut m = 0;
    for s in &series {
        match (1..=m_max).find(|&i| s[i - 1] > log_theta) {
            Some(i) => m = m.max(i),
            None => return Ok(UniformBunching::NotUniformUpTo { m_max }),
        }
    }
    let tested_horizon = tested_horizon_for(m);
    let log_c = series
        .iter()
        .flat_map(|s| (1..=tested_horizon).map(move |n| s[n - 1] - n as f64 / m as f64 * log_theta))
        .fold(f64::INFINITY, f64::min);
    Ok(UniformBunching::Uniform {
        m,
        log_c,
        tested_horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    pub elliptic: bool,
    /// `max |log ρ| / p` over eigenvalue moduli of the period product.
    pub max_log_modulus: f64,
}

/// Whether every eigenvalue modulus `ρ` of a period product satisfies `|log ρ| ≤ ε·p`.
pub fn ellipticity_check(period_product: &Matrix, p: usize, eps: f64) -> Result<Ellipticity> {
    if p == 0 {
        return Err(Error::InvalidInput("period must be at least 1".into()));
    }
    let moduli = linalg::spectrum_moduli(period_product)?;
    let worst = moduli.iter().map(|r| r.ln().abs()).fold(0.0, f64::max);
    Ok(Ellipticity {
        elliptic: worst <= eps * p as f64 + TOL_EIG,
        max_log_modulus: worst / p as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominationResult {
    Dominated,
    NotDominatedUpTo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// Dimension of the dominating block `E` (the leading coordinates).
    pub index: usize,
    pub result: DominationResult,
    /// Least verified step count.
    pub m: Option<usize>,
    /// `max_x log‖A^m|F‖ − log m(A^m|E)` at the returned `m` (at `m_max` otherwise).
    pub margin: f64,
    /// The same maximum for every `m = 1..=m_max`.
    pub margins: Vec<f64>,
    pub m_max: usize,
}

/// Domination threshold `log(1/2)` with the tolerance of the criterion.
pub fn domination_bound() -> f64 {
    -std::f64::consts::LN_2 + 1e-10
}

/// Least `m ≤ m_max` with `‖A^m|F‖ / m(A^m|E) ≤ 1/2` at every start index,
/// where `E` is spanned by the first `dim_e` coordinates and `F` by the rest.
pub fn domination_search(c: &Cocycle, dim_e: usize, m_max: usize) -> Result<DominationReport> {
    if dim_e == 0 || dim_e >= c.dim() {
        return Err(Error::InvalidInput(format!(
            "dominating block dimension {dim_e} must lie in 1..{}",
            c.dim()
        )));
    }
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    c.quantifier_starts(m_max)?;
    let partition = [dim_e, c.dim() - dim_e];
    let starts: Vec<usize> = match c.period() {
        Some(p) => (0..p).collect(),
        None => c.quantifier_starts(1)?,
    };
    let horizon = c.horizon();
    let mut margins = vec![f64::NEG_INFINITY; m_max];
    for x in starts {
        let reach = horizon.map_or(m_max, |h| m_max.min(h - x));
        let mut sweep = c.sweep(x, &partition)?;
        for m in 1..=reach {
            sweep.advance()?;
            let logs = sweep.logs()?;
            let gap = logs[1].log_norm - logs[0].log_conorm;
            margins[m - 1] = margins[m - 1].max(gap);
        }
    }
    let bound = domination_bound();
    let m = (1..=m_max).find(|&m| margins[m - 1] <= bound);
    Ok(DominationReport {
        index: dim_e,
        result: if m.is_some() {
            DominationResult::Dominated
        } else {
            DominationResult::NotDominatedUpTo
        },
        m,
        margin: margins[m.unwrap_or(m_max) - 1],
        margins,
        m_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TrivialOrDominated {
    /// All exponents agree within the clustering tolerance.
    Trivial,
    /// Every Oseledets gap is dominated; one report per gap.
    Dominated { gaps: Vec<DominationReport> },
    /// Some gap is not dominated up to `m_max`: a discontinuity candidate.
    Neither {
        failing_index: usize,
        gaps: Vec<DominationReport>,
    },
}

/// Numerical check of the trivial-or-dominated dichotomy for a constant or
/// periodic cocycle, in the basis of its Oseledets splitting.
pub fn trivial_or_dominated_check(
    report: &LyapunovReport,
    c: &Cocycle,
    m_max: usize,
    gap_tol: f64,
) -> Result<TrivialOrDominated> {
    if report.dim() != c.dim() {
        return Err(Error::InvalidInput(
            "report and cocycle dimensions differ".into(),
        ));
    }
    let clusters = spectral::cluster_exponents(&report.exponents, gap_tol)?;
    if clusters.len() == 1 {
        return Ok(TrivialOrDominated::Trivial);
    }
    let period = c.period().ok_or(Error::NotPeriodic)?;
    let factors: Vec<Matrix> = (0..period).map(|i| c.factor(i)).collect::<Result<_>>()?;
    let product = factors
        .iter()
        .fold(Matrix::identity(c.dim(), c.dim()), |acc, a| a * acc);
    if product.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("period product overflows".into()));
    }
    let top = spectral::filtration_estimate(&product, period, gap_tol)?;
    let bottom = spectral::filtration_estimate(&linalg::inverse(&product)?, period, gap_tol)?;
    if top.len() != clusters.len() || bottom.len() != clusters.len() {
        return Err(Error::NumericalFailure(format!(
            "report has {} exponent clusters but the period product has {}",
            clusters.len(),
            top.len()
        )));
    }
    let t = clusters.len();
    let mut gaps = Vec::with_capacity(t - 1);
    let mut failing = None;
    for level in 1..t {
        let e = top.subspace(level);
        let f = bottom.subspace(t - level);
        let conj = oseledets_conjugate(&factors, &e, &f)?;
        let rep = domination_search(&conj, e.ncols(), m_max)?;
        if rep.result != DominationResult::Dominated && failing.is_none() {
            failing = Some(e.ncols());
        }
        gaps.push(rep);
    }
    Ok(match failing {
        None => TrivialOrDominated::Dominated { gaps },
        Some(failing_index) => TrivialOrDominated::Neither {
            failing_index,
            gaps,
        },
    })
}

/// Periodic two-block cocycle `S_{x+1}⁻¹ A_x S_x` with
/// `S_x = [orth(A(0,x)E) | orth(A(0,x)F)]`.
fn oseledets_conjugate(factors: &[Matrix], e: &Matrix, f: &Matrix) -> Result<Cocycle> {
    let d = e.nrows();
    let de = e.ncols();
    let frame = |e: &Matrix, f: &Matrix| -> Result<Matrix> {
        let qe = linalg::orthonormalize_columns(e, 1e-12)
            .ok_or_else(|| Error::NumericalFailure("degenerate Oseledets block".into()))?;
        let qf = linalg::orthonormalize_columns(f, 1e-12)
            .ok_or_else(|| Error::NumericalFailure("degenerate Oseledets block".into()))?;
        let mut s = Matrix::zeros(d, d);
        s.columns_mut(0, de).copy_from(&qe);
        s.columns_mut(de, d - de).copy_from(&qf);
        Ok(s)
    };
    let mut frames = vec![frame(e, f)?];
    let (mut ex, mut fx) = (e.clone(), f.clone());
    for a in &factors[..factors.len() - 1] {
        ex = a * &ex;
        fx = a * &fx;
        frames.push(frame(&ex, &fx)?);
    }
    frames.push(frames[0].clone());
    let mut out = Vec::with_capacity(factors.len());
    for (x, a) in factors.iter().enumerate() {
        let mut b = linalg::inverse(&frames[x + 1])? * a * &frames[x];
        let defect = b.view((0, de), (de, d - de)).norm() + b.view((de, 0), (d - de, de)).norm();
        if defect > 1e-6 * b.norm() {
            return Err(Error::NumericalFailure(format!(
                "Oseledets blocks are not invariant (defect {defect:e})"
            )));
        }
        b.view_mut((0, de), (de, d - de)).fill(0.0);
        b.view_mut((de, 0), (d - de, de)).fill(0.0);
        out.push(b);
    }
    Cocycle::periodic(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, rotation};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn diag_block(u: f64, c: &[f64], s: f64) -> Cocycle {
        Cocycle::block_diagonal(
            Some(Cocycle::constant(diag(&[u.exp()])).unwrap()),
            Some(Cocycle::constant(diag(&c.iter().map(|x| x.exp()).collect::<Vec<_>>())).unwrap()),
            Some(Cocycle::constant(diag(&[s.exp()])).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn ph_relative_diagonal() {
        let c = diag_block(1.0, &[0.0], -1.0);
        let r = ph_check(&c, SplittingSpec::new(1, 1, 1), 1, PhVariant::Relative).unwrap();
        assert!(r.holds);
        for m in [
            r.margins.unstable_expansion,
            r.margins.stable_contraction,
            r.margins.unstable_over_center,
            r.margins.center_over_stable,
        ] {
            assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ph_relative_vs_absolute_with_varying_center() {
        // Center log-rates 1.2, 0.5, 0.5, 0.5 over a period of four.
        let centers: [f64; 4] = [1.2, 0.5, 0.5, 0.5];
        let c = Cocycle::periodic(
            centers
                .iter()
                .map(|&cx| diag(&[E, cx.exp(), 1.0 / E]))
                .collect(),
        )
        .unwrap()
        .with_splitting(SplittingSpec::new(1, 1, 1))
        .unwrap();
        let s = SplittingSpec::new(1, 1, 1);
        let rel1 = ph_check(&c, s, 1, PhVariant::Relative).unwrap();
        let rel4 = ph_check(&c, s, 4, PhVariant::Relative).unwrap();
        let abs1 = ph_check(&c, s, 1, PhVariant::Absolute).unwrap();
        // Oracle: direct inequality evaluation per index.
        let direct_rel1 = centers
            .iter()
            .map(|&cx| 1.0 - cx)
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(
            rel1.margins.unstable_over_center,
            direct_rel1,
            epsilon = 1e-12
        );
        assert!(!rel1.holds);
        assert!(rel4.holds);
        assert_abs_diff_eq!(
            rel4.margins.unstable_over_center,
            4.0 - 2.7,
            epsilon = 1e-12
        );
        assert!(!abs1.holds);
        assert_abs_diff_eq!(abs1.margins.unstable_expansion, 1.0 - 1.2, epsilon = 1e-12);
    }

    #[test]
    fn ph_requires_three_bundles() {
        let c = diag_block(1.0, &[0.0], -1.0);
        assert!(ph_check(&c, SplittingSpec::new(0, 2, 1), 1, PhVariant::Relative).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let s = SplittingSpec::new(1, 2, 1);
        let r = spectrum_bunching_test(&[1.0, 0.1, -0.1, -1.0], s, false).unwrap();
        assert_eq!((r.forward, r.backward), (Some(true), Some(true)));
        let r = spectrum_bunching_test(&[1.0, 0.6, -0.6, -1.0], s, false).unwrap();
        assert_eq!(r.forward, Some(false));
        let r = spectrum_bunching_test(&[0.3, 0.0, 0.0, -2.0], s, false).unwrap();
        assert_eq!((r.forward, r.backward), (Some(true), Some(true)));
        let r = spectrum_bunching_test(&[1.0, 0.6, -0.6, -1.0], s, true).unwrap();
        assert_abs_diff_eq!(r.symplectic_slack.unwrap(), -0.2, epsilon = 1e-15);
    }

    #[test]
    fn spectrum_gap_violation_and_shortcut_mismatch() {
        let s = SplittingSpec::new(1, 2, 1);
        assert!(matches!(
            spectrum_bunching_test(&[1.0, 1.0, 0.0, -1.0], s, false),
            Err(Error::SplittingGapViolation(_))
        ));
        assert!(matches!(
            spectrum_bunching_test(&[1.0, 0.5, 0.0, -0.2], s, true),
            Err(Error::SymplecticShortcutMismatch(_))
        ));
    }

    #[test]
    fn witness_every_step_qualifies() {
        // s = e⁻¹, c = Id: log Θ(j, n) = n.
        let c = Cocycle::block_diagonal(
            None,
            Some(Cocycle::constant(Matrix::identity(1, 1)).unwrap()),
            Some(Cocycle::constant(diag(&[1.0 / E])).unwrap()),
        )
        .unwrap();
        let v = witness_build(&c, 1.0, 40, Direction::Forward).unwrap();
        assert_eq!(v.result, BunchingResult::Holds);
        let w = v.witness.unwrap();
        assert_eq!(w.indices, (0..=40).collect::<Vec<_>>());
        assert_abs_diff_eq!(w.max_tail_ratio, 31.0 / 30.0, epsilon = 1e-15);
        assert!(reverify_witness(&c, &w, 1e-9).unwrap());
    }

    #[test]
    fn witness_spectrum_one_zero_minus_one() {
        let c = diag_block(1.0, &[0.0], -1.0);
        let v = witness_build(&c, 0.5, 50, Direction::Forward).unwrap();
        assert_eq!(v.result, BunchingResult::Holds);
        let w = v.witness.unwrap();
        assert_eq!(w.indices.len(), 51);
        // Closed form by block arithmetic: log Θ(j, 1) = 1 − 0 + 0 = 1.
        assert!(w.window_log_theta.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let back = witness_build(&c, 0.5, 50, Direction::Backward).unwrap();
        assert_eq!(back.result, BunchingResult::Holds);
    }

    #[test]
    fn witness_stall_is_a_refutation() {
        let c = diag_block(1.0, &[0.6, -0.6], -1.0);
        let v = witness_build(&c, 0.2, 30, Direction::Forward).unwrap();
        assert_eq!(v.result, BunchingResult::Fails);
        assert_eq!(v.stall_index, Some(0));
        let r = v.refutation.unwrap();
        assert_abs_diff_eq!(r.rate, 1.0 - 1.2, epsilon = 1e-12);
    }

    #[test]
    fn uniform_examples() {
        // log Θ(0, 1) = 0.5 with θ = e^{0.25}.
        let c = diag_block(1.0, &[0.0], -0.5);
        let u = uniform_bunching_check(&c, 0.25f64.exp(), 5).unwrap();
        assert!(matches!(u, UniformBunching::Uniform { m: 1, .. }));
        let id = Cocycle::constant(Matrix::identity(3, 3))
            .unwrap()
            .with_splitting(SplittingSpec::new(1, 1, 1))
            .unwrap();
        assert_eq!(
            uniform_bunching_check(&id, 1.1, 6).unwrap(),
            UniformBunching::NotUniformUpTo { m_max: 6 }
        );
    }

    #[test]
    fn ellipticity_examples() {
        let r = ellipticity_check(&rotation(0.4), 1, 0.01).unwrap();
        assert!(r.elliptic);
        assert!(r.max_log_modulus < 1e-12);
        let r = ellipticity_check(&diag(&[E.powi(3), E.powi(-3)]), 2, 1.0).unwrap();
        assert!(!r.elliptic);
        assert_abs_diff_eq!(r.max_log_modulus, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn domination_examples() {
        let c = Cocycle::constant(diag(&[4.0, 1.0])).unwrap();
        let r = domination_search(&c, 1, 5).unwrap();
        assert_eq!(r.m, Some(1));
        assert_abs_diff_eq!(r.margin, -(4f64.ln()), epsilon = 1e-12);
        let c = Cocycle::constant(diag(&[0.1f64.exp(), 1.0])).unwrap();
        let r = domination_search(&c, 1, 20).unwrap();
        let brute = (1..=20).find(|&m| -(0.1 * m as f64) <= domination_bound());
        assert_eq!(r.m, brute);
        assert_eq!(r.m, Some(7));
        let rot = Cocycle::constant(rotation(0.5)).unwrap();
        assert!(domination_search(&rot, 1, 4).is_err());
    }

    #[test]
    fn trivial_or_dominated_examples() {
        let conformal = Cocycle::constant(rotation(0.4) * 2.0).unwrap();
        let rep = spectral::lyapunov_qr(&conformal, 200).unwrap();
        assert_eq!(
            trivial_or_dominated_check(&rep, &conformal, 10, 1e-3).unwrap(),
            TrivialOrDominated::Trivial
        );
        let d = Cocycle::constant(diag(&[4.0, 1.0])).unwrap();
        let rep = spectral::lyapunov_eigen(&d).unwrap();
        match trivial_or_dominated_check(&rep, &d, 10, 1e-3).unwrap() {
            TrivialOrDominated::Dominated { gaps } => assert_eq!(gaps[0].m, Some(1)),
            other => panic!("{other:?}"),
        }
        // A sheared diagonal matrix is still dominated in its eigenbasis.
        let sheared =
            Cocycle::constant(Matrix::from_row_slice(2, 2, &[3.0, 5.0, 0.0, 0.5])).unwrap();
        let rep = spectral::lyapunov_eigen(&sheared).unwrap();
        assert!(matches!(
            trivial_or_dominated_check(&rep, &sheared, 10, 1e-3).unwrap(),
            TrivialOrDominated::Dominated { .. }
        ));
    }
}
