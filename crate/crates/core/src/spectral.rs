//! Finite-horizon Lyapunov exponents, partial sums `L_i` through exterior
//! powers, and exact Lyapunov filtrations of finite products.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::{Cocycle, Source};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, ScaledMatrix};

/// Symplectic symmetry tolerance for finite-horizon exponents.
pub const TOL_SYM_EXP: f64 = 1e-4;
/// Largest exterior power dimension `C(d, i)` accepted.
pub const MAX_COMPOUND_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMethod {
    Qr,
    Exterior,
    EigenConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Per-step exponents, descending.
    pub exponents: Vec<f64>,
    /// `L_i = λ_1 + … + λ_i`.
    pub partial_sums: Vec<f64>,
    pub horizon: usize,
    pub method: LyapunovMethod,
    /// Oscillation of each running estimate over the last quarter of the horizon.
    pub convergence: Vec<f64>,
    /// `max |λ_i + λ_{d+1−i}|`, present for cocycles flagged symplectic.
    pub symmetry_defect: Option<f64>,
}

impl LyapunovReport {
    fn new(
        mut exponents: Vec<f64>,
        mut convergence: Vec<f64>,
        horizon: usize,
        method: LyapunovMethod,
        symplectic: bool,
    ) -> Self {
        let mut order: Vec<usize> = (0..exponents.len()).collect();
        order.sort_by(|&a, &b| exponents[b].total_cmp(&exponents[a]));
        exponents = order.iter().map(|&i| exponents[i]).collect();
        convergence = order.iter().map(|&i| convergence[i]).collect();
        let partial_sums = exponents
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let symmetry_defect = symplectic.then(|| symmetry_defect(&exponents));
        LyapunovReport {
            exponents,
            partial_sums,
            horizon,
            method,
            convergence,
            symmetry_defect,
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_symmetric(&self) -> Option<bool> {
        self.symmetry_defect.map(|d| d <= TOL_SYM_EXP)
    }
}

/// `max_i |λ_i + λ_{d+1−i}|` for a descending list.
pub fn symmetry_defect(exponents: &[f64]) -> f64 {
    let d = exponents.len();
    (0..d)
        .map(|i| (exponents[i] + exponents[d - 1 - i]).abs())
        .fold(0.0, f64::max)
}

fn check_horizon(c: &Cocycle, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    match c.horizon() {
        Some(h) if h < n => Err(Error::HorizonTooShort {
            needed: n,
            available: h,
        }),
        _ => Ok(()),
    }
}

/// Factors of one period, when the cocycle repeats; used to cache per-factor work.
fn period_factors(c: &Cocycle, n: usize) -> Result<Option<Vec<Matrix>>> {
    match c.period() {
        Some(p) if p < n => Ok(Some((0..p).map(|i| c.factor(i)).collect::<Result<_>>()?)),
        _ => Ok(None),
    }
}

fn factor_at(c: &Cocycle, cache: &Option<Vec<Matrix>>, i: usize) -> Result<Matrix> {
    match cache {
        Some(v) => Ok(v[i % v.len()].clone()),
        None => c.factor(i),
    }
}

/// Oscillation (max − min) of running means over the last quarter.
fn running_oscillation(logs: &[Vec<f64>], burn: usize, dim: usize) -> Vec<f64> {
    let n = logs.len();
    let from = (3 * n).div_ceil(4).max(burn + 1);
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut sums = vec![0.0; dim];
    for (t, row) in logs.iter().enumerate().skip(burn) {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
        if t + 1 >= from {
            let count = (t + 1 - burn) as f64;
            for k in 0..dim {
                let est = sums[k] / count;
                lo[k] = lo[k].min(est);
                hi[k] = hi[k].max(est);
            }
        }
    }
    lo.iter()
        .zip(&hi)
        .map(|(l, h)| if h.is_finite() { h - l } else { 0.0 })
        .collect()
}

/// Lyapunov exponents by QR re-orthonormalization over `n` steps.
///
/// The first `⌊n/4⌋` steps only rotate the frame into place; exponents are the
/// mean log-diagonals of `R` over the remaining steps.
pub fn lyapunov_qr(c: &Cocycle, n: usize) -> Result<LyapunovReport> {
    check_horizon(c, n)?;
    let d = c.dim();
    let cache = period_factors(c, n)?;
    let mut q = Matrix::identity(d, d);
    let mut logs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let qr = (factor_at(c, &cache, i)? * &q).qr();
        let r = qr.r();
        let row: Vec<f64> = (0..d).map(|k| r[(k, k)].abs().ln()).collect();
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "degenerate R diagonal at step {i}"
            )));
        }
        logs.push(row);
        q = qr.q();
    }
    let burn = n / 4;
    let count = (n - burn) as f64;
    let exponents: Vec<f64> = (0..d)
        .map(|k| logs[burn..].iter().map(|row| row[k]).sum::<f64>() / count)
        .collect();
    let convergence = running_oscillation(&logs, burn, d);
    Ok(LyapunovReport::new(
        exponents,
        convergence,
        n,
        LyapunovMethod::Qr,
        c.is_symplectic(),
    ))
}

/// Exponents of a constant or periodic cocycle read from the eigenvalue moduli
/// of one period.
pub fn lyapunov_eigen(c: &Cocycle) -> Result<LyapunovReport> {
    let p = c.period().ok_or(Error::NotPeriodic)?;
    let product = match c.source() {
        Source::Constant(m) => m.clone(),
        _ => c
            .window_product(0, p)?
            .value
            .ok_or_else(|| Error::NumericalFailure("period product overflows".into()))?,
    };
    let moduli = linalg::spectrum_moduli(&product)?;
    let exponents = moduli.iter().map(|r| r.ln() / p as f64).collect::<Vec<_>>();
    let d = exponents.len();
    Ok(LyapunovReport::new(
        exponents,
        vec![0.0; d],
        p,
        LyapunovMethod::EigenConstant,
        c.is_symplectic(),
    ))
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, j| acc.saturating_mul(n - j) / (j + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..k).rev().find(|&p| cur[p] < n - k + p) else {
            return out;
        };
        cur[pos] += 1;
        for p in pos + 1..k {
            cur[p] = cur[p - 1] + 1;
        }
    }
}

/// The `k`-th compound matrix: minors `det A[I, J]` over lexicographic `k`-subsets.
pub fn compound(a: &Matrix, k: usize) -> Result<Matrix> {
    linalg::check_square(a, "compound")?;
    let d = a.nrows();
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!(
            "exterior power {k} out of range for dimension {d}"
        )));
    }
    let size = binomial(d, k);
    if size > MAX_COMPOUND_DIM {
        return Err(Error::InvalidInput(format!(
            "exterior power C({d}, {k}) = {size} exceeds {MAX_COMPOUND_DIM}"
        )));
    }
    let subsets = combinations(d, k);
    Ok(Matrix::from_fn(size, size, |r, s| {
        Matrix::from_fn(k, k, |i, j| a[(subsets[r][i], subsets[s][j])]).determinant()
    }))
}

/// `(1/n) log‖∧^i A(0, n)‖` from the rescaled product of compound matrices.
pub fn partial_sums_exterior(c: &Cocycle, i: usize, n: usize) -> Result<f64> {
    Ok(exterior_log_norms(c, i, n, &[n])?[0] / n as f64)
}

/// `log‖∧^i A(0, t)‖` at each requested `t` (ascending, all ≤ n).
fn exterior_log_norms(c: &Cocycle, i: usize, n: usize, at: &[usize]) -> Result<Vec<f64>> {
    check_horizon(c, n)?;
    let d = c.dim();
    if i == 0 || i > d {
        return Err(Error::InvalidInput(format!(
            "partial sum index {i} out of range 1..={d}"
        )));
    }
    let cache: Option<Vec<Matrix>> = match c.period() {
        Some(p) if p < n => Some(
            (0..p)
                .map(|k| compound(&c.factor(k)?, i))
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let mut acc = ScaledMatrix::identity(binomial(d, i));
    let mut out = Vec::with_capacity(at.len());
    let mut next = at.iter().peekable();
    for t in 0..n {
        let step = match &cache {
            Some(v) => v[t % v.len()].clone(),
            None => compound(&c.factor(t)?, i)?,
        };
        acc.left_mul(&step);
        acc.renormalize();
        while next.peek().is_some_and(|&&s| s == t + 1) {
            out.push(acc.log_norm()?);
            next.next();
        }
    }
    Ok(out)
}

/// Full report from exterior norms: `L_i` for every `i`, exponents as differences.
pub fn lyapunov_exterior(c: &Cocycle, n: usize) -> Result<LyapunovReport> {
    check_horizon(c, n)?;
    let d = c.dim();
    let samples: Vec<usize> = {
        let from = (3 * n).div_ceil(4).max(1);
        let mut v: Vec<usize> = (0..=8).map(|k| from + (n - from) * k / 8).collect();
        v.dedup();
        v
    };
    let mut sums = Vec::with_capacity(d);
    let mut running = Vec::with_capacity(d);
    for i in 1..=d {
        let logs = exterior_log_norms(c, i, n, &samples)?;
        let ests: Vec<f64> = logs
            .iter()
            .zip(&samples)
            .map(|(l, &t)| l / t as f64)
            .collect();
        sums.push(*ests.last().expect("samples end at n"));
        running.push(ests);
    }
    let exponents: Vec<f64> = (0..d)
        .map(|k| sums[k] - if k == 0 { 0.0 } else { sums[k - 1] })
        .collect();
    let convergence = (0..d)
        .map(|k| {
            let series: Vec<f64> = (0..samples.len())
                .map(|s| running[k][s] - if k == 0 { 0.0 } else { running[k - 1][s] })
                .collect();
            let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let mut report = LyapunovReport::new(
        exponents,
        convergence,
        n,
        LyapunovMethod::Exterior,
        c.is_symplectic(),
    );
    // Keep the directly measured partial sums rather than re-summed differences.
    report.partial_sums = sums;
    Ok(report)
}

/// A group of exponents within the clustering tolerance of each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCluster {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Indices into the input list.
    pub members: Vec<usize>,
}

/// Group exponents (any order) by chained gaps `≤ gap_tol`; clusters come out
/// in descending order. A gap in `(gap_tol, 2·gap_tol)` is ambiguous.
pub fn cluster_exponents(exponents: &[f64], gap_tol: f64) -> Result<Vec<ExponentCluster>> {
    if exponents.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite exponent".into()));
    }
    let mut order: Vec<usize> = (0..exponents.len()).collect();
    order.sort_by(|&a, &b| exponents[b].total_cmp(&exponents[a]));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 {
            let gap = exponents[order[pos - 1]] - exponents[i];
            if gap > gap_tol && gap < 2.0 * gap_tol {
                return Err(Error::ClusterAmbiguity { gap, gap_tol });
            }
            if gap <= gap_tol {
                clusters.last_mut().expect("nonempty").push(i);
                continue;
            }
        }
        clusters.push(vec![i]);
    }
    Ok(clusters
        .into_iter()
        .map(|members| {
            let vals: Vec<f64> = members.iter().map(|&i| exponents[i]).collect();
            ExponentCluster {
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                members,
            }
        })
        .collect())
}

/// Exact Lyapunov filtration `F_1 ⊊ … ⊊ F_t` of a finite product, where `F_i`
/// is the sum of generalized eigenspaces with per-step exponent `≥ λ̂_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiltrationEstimate {
    /// Per-step exponents `(1/n) log|μ|` of every eigenvalue.
    pub exponents: Vec<f64>,
    /// Cluster means `λ̂_1 > … > λ̂_t`.
    pub thresholds: Vec<f64>,
    pub clusters: Vec<ExponentCluster>,
    /// `r(i) = dim F_i`.
    pub r: Vec<usize>,
    /// Orthonormal columns; `F_i` is spanned by the first `r(i)`.
    #[serde(with = "crate::linalg::serde_matrix")]
    pub basis: Matrix,
    pub steps: usize,
    /// Max over basis vectors `v ∈ F_i` of `‖(P v)_⊥F_i‖ / ‖P v‖`.
    pub invariance_residual: f64,
}

impl FiltrationEstimate {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Orthonormal basis of `F_level` (1-based).
    pub fn subspace(&self, level: usize) -> Matrix {
        self.basis.columns(0, self.r[level - 1]).into_owned()
    }
}

/// Orthonormal basis of the kernel of a square matrix of known nullity.
fn kernel(m: &Matrix, nullity: usize) -> Result<Matrix> {
    let d = m.nrows();
    let svd = m
        .clone()
        .try_svd(false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    Ok(Matrix::from_fn(d, nullity, |i, k| v_t[(idx[k], i)]))
}

/// Generalized eigenspace of `m` for the listed eigenvalues (with multiplicity,
/// closed under conjugation), as the kernel of the real annihilating polynomial.
fn generalized_eigenspace(m: &Matrix, eigs: &[Complex64]) -> Result<Matrix> {
    let d = m.nrows();
    let scale = linalg::norm2(m)?.max(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let a = m / scale;
    let id = Matrix::identity(d, d);
    let mut poly = id.clone();
    let mut reals: Vec<f64> = Vec::new();
    let mut uppers: Vec<Complex64> = Vec::new();
    for z in eigs {
        let z = z / scale;
        if z.im.abs() <= 1e-12 * z.norm().max(1e-300) {
            reals.push(z.re);
        } else if z.im > 0.0 {
            uppers.push(z);
        }
    }
    for re in reals {
        poly = (&a - &id * re) * poly;
    }
    for z in &uppers {
        poly = (&a * &a - &a * (2.0 * z.re) + &id * z.norm_sqr()) * poly;
    }
    kernel(&poly, eigs.len())
}

/// Filtration of `product = A_n ⋯ A_1` with per-step exponents `(1/n) log|μ|`.
pub fn filtration_estimate(product: &Matrix, n: usize, gap_tol: f64) -> Result<FiltrationEstimate> {
    linalg::check_square(product, "filtration")?;
    if n == 0 {
        return Err(Error::InvalidInput("step count must be at least 1".into()));
    }
    let d = product.nrows();
    let symplectic = d.is_multiple_of(2) && linalg::is_symplectic(product, linalg::TOL_SYMP);
    let inv = if symplectic {
        linalg::symplectic_inverse(product)
    } else {
        linalg::inverse(product)?
    };
    let eigs = linalg::accurate_eigenvalues(product, Some(&inv))?;
    let exps: Vec<f64> = eigs.iter().map(|z| z.norm().ln() / n as f64).collect();
    let clusters = cluster_exponents(&exps, gap_tol)?;
    let mut columns: Vec<Matrix> = Vec::with_capacity(clusters.len());
    for cl in &clusters {
        let members: Vec<Complex64> = cl.members.iter().map(|&i| eigs[i]).collect();
        let space = if cl.mean >= 0.0 {
            generalized_eigenspace(product, &members)?
        } else {
            let recip: Vec<Complex64> = members.iter().map(|z| z.inv()).collect();
            generalized_eigenspace(&inv, &recip)?
        };
        columns.push(space);
    }
    let stacked = Matrix::from_columns(
        &columns
            .iter()
            .flat_map(|m| m.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    );
    let basis = linalg::orthonormalize_columns(&stacked, 1e-10).ok_or_else(|| {
        Error::NumericalFailure("generalized eigenspaces are numerically dependent".into())
    })?;
    let r: Vec<usize> = columns
        .iter()
        .scan(0, |acc, m| {
            *acc += m.ncols();
            Some(*acc)
        })
        .collect();
    let mut est = FiltrationEstimate {
        exponents: exps,
        thresholds: clusters.iter().map(|c| c.mean).collect(),
        clusters,
        r,
        basis,
        steps: n,
        invariance_residual: 0.0,
    };
    debug_assert_eq!(est.r.last().copied(), Some(d));
    est.invariance_residual = invariance_residual(&est, product);
    Ok(est)
}

/// `max ‖(P v)_⊥F_i‖ / ‖P v‖` over basis vectors of each proper level.
pub fn invariance_residual(f: &FiltrationEstimate, product: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for level in 1..=f.len() {
        let q = f.subspace(level);
        for k in 0..q.ncols() {
            let pv = product * q.column(k);
            let residual = &pv - &q * (q.transpose() * &pv);
            worst = worst.max(residual.norm() / pv.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, random_matrix, rng, rotation};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    #[test]
    fn qr_diagonal_and_rotation() {
        let c = Cocycle::constant(diag(&[E * E, 1.0 / (E * E)])).unwrap();
        let r = lyapunov_qr(&c, 100).unwrap();
        assert_abs_diff_eq!(r.exponents[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.exponents[1], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.partial_sums[1], 0.0, epsilon = 1e-12);
        let rot = Cocycle::constant(rotation(0.7)).unwrap();
        let r = lyapunov_qr(&rot, 50).unwrap();
        assert!(r.exponents.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn qr_matches_eigen_moduli_of_generic_matrix() {
        let mut g = rng(11);
        let s = random_matrix(4, 4, &mut g) + Matrix::identity(4, 4) * 2.0;
        let m = &s * diag(&[3.0, -1.5, 0.8, 0.2]) * s.clone().try_inverse().unwrap();
        let c = Cocycle::constant(m.clone()).unwrap();
        let r = lyapunov_qr(&c, 2000).unwrap();
        let oracle: Vec<f64> = linalg::eigen_moduli(&m)
            .unwrap()
            .iter()
            .map(|x| x.ln())
            .collect();
        for (a, b) in r.exponents.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(r.convergence.iter().all(|&o| o < 1e-6));
    }

    #[test]
    fn exterior_partial_sum_example() {
        let c = Cocycle::constant(diag(&[E * E, E, 1.0 / E, 1.0 / (E * E)])).unwrap();
        assert_abs_diff_eq!(
            partial_sums_exterior(&c, 2, 50).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            partial_sums_exterior(&c, 4, 50).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exterior_top_power_is_log_det() {
        let mut g = rng(3);
        let m = random_matrix(3, 3, &mut g) + Matrix::identity(3, 3) * 2.0;
        let det = m.determinant();
        let c = Cocycle::constant(m).unwrap();
        assert!((partial_sums_exterior(&c, 3, 40).unwrap() - det.abs().ln()).abs() < 1e-10);
        let s = Cocycle::constant(linalg::random_symplectic(2, 0.8, 5).unwrap())
            .unwrap()
            .with_symplectic(true);
        assert!(partial_sums_exterior(&s, 4, 300).unwrap().abs() < 1e-8);
    }

    #[test]
    fn exterior_bias_of_non_normal_symplectic_is_bounded() {
        // ρ^n ≤ ‖A^n‖ ≤ κ(V)·ρ^n, so 0 ≤ (1/n) log‖A^n‖ − λ_1 ≤ log κ(V) / n.
        let m = linalg::random_symplectic(2, 1.0, 42).unwrap();
        let c = Cocycle::constant(m.clone()).unwrap().with_symplectic(true);
        let eigs = linalg::eigenvalues(&m).unwrap();
        let lambda = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).ln();
        let mc = m.map(|x| Complex64::new(x, 0.0));
        let cols: Vec<_> = eigs
            .iter()
            .map(|&mu| {
                let shifted = &mc - linalg::CMatrix::identity(4, 4) * mu;
                let svd = shifted.svd(false, true);
                let k = (0..4)
                    .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
                    .unwrap();
                svd.v_t.unwrap().row(k).adjoint()
            })
            .collect();
        let v = linalg::CMatrix::from_columns(&cols);
        let sv = v.singular_values();
        let log_kappa = (sv.max() / sv.min()).ln();
        for n in [500, 2000] {
            let err = partial_sums_exterior(&c, 1, n).unwrap() - lambda;
            assert!(err >= -1e-12, "{err}");
            assert!(err <= log_kappa / n as f64 + 1e-12, "{err} {log_kappa}");
        }
    }

    #[test]
    fn exterior_matches_qr_on_normal_symplectic() {
        let mut g = rng(9);
        let q = linalg::random_orthogonal_symplectic(2, &mut g);
        let d = diag(&[1.5f64.exp(), 0.4f64.exp(), (-1.5f64).exp(), (-0.4f64).exp()]);
        let m = &q * d * q.transpose();
        let c = Cocycle::constant(m).unwrap().with_symplectic(true);
        let qr = lyapunov_qr(&c, 2000).unwrap();
        let l1 = partial_sums_exterior(&c, 1, 2000).unwrap();
        assert!((l1 - qr.exponents[0]).abs() < 1e-5);
        assert!(qr.is_symmetric().unwrap());
    }

    #[test]
    fn compound_of_diagonal() {
        let c = compound(&diag(&[2.0, 3.0, 5.0]), 2).unwrap();
        assert_eq!(c, diag(&[6.0, 10.0, 15.0]));
        assert_eq!(combinations(4, 2).len(), 6);
        assert!(compound(&Matrix::identity(12, 12), 6).is_ok());
        assert!(matches!(
            compound(&Matrix::identity(14, 14), 7),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn eigen_constant_report() {
        let c = Cocycle::periodic(vec![diag(&[2.0, 0.5]), diag(&[3.0, 1.0 / 3.0])]).unwrap();
        let r = lyapunov_eigen(&c).unwrap();
        assert_abs_diff_eq!(r.exponents[0], 6f64.ln() / 2.0, epsilon = 1e-12);
        assert_eq!(r.method, LyapunovMethod::EigenConstant);
    }

    #[test]
    fn clustering_and_ambiguity() {
        let cl = cluster_exponents(&[0.0, 1.0, 1.0005, -1.0], 1e-3).unwrap();
        assert_eq!(cl.len(), 3);
        assert_eq!(cl[0].members.len(), 2);
        assert!(matches!(
            cluster_exponents(&[0.0, 0.0015], 1e-3),
            Err(Error::ClusterAmbiguity { .. })
        ));
    }

    #[test]
    fn filtration_diagonal_and_rotation() {
        let f = filtration_estimate(&diag(&[E * E, 1.0 / (E * E)]), 1, 1e-3).unwrap();
        assert_eq!(f.r, vec![1, 2]);
        assert_abs_diff_eq!(f.basis[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        let f = filtration_estimate(&rotation(0.3), 1, 1e-3).unwrap();
        assert_eq!(f.r, vec![2]);
        assert_eq!(f.thresholds.len(), 1);
    }

    #[test]
    fn filtration_of_upper_triangular() {
        let mut g = rng(21);
        let mut m = random_matrix(5, 5, &mut g).upper_triangle();
        for (k, v) in [4.0, -2.0, 1.0, 0.5, -0.1].iter().enumerate() {
            m[(k, k)] = *v;
        }
        let f = filtration_estimate(&m, 1, 1e-3).unwrap();
        assert_eq!(f.r, vec![1, 2, 3, 4, 5]);
        assert!(f.invariance_residual <= 1e-8, "{}", f.invariance_residual);
        // Oracle: invariance A·F_i ⊆ F_i measured afresh.
        for level in 1..=5 {
            let q = f.subspace(level);
            let img = &m * &q;
            let resid = &img - &q * (q.transpose() * &img);
            assert!(resid.norm() <= 1e-8 * img.norm());
        }
        // Top level of an upper-triangular matrix with dominant first entry is e₁.
        assert_abs_diff_eq!(f.subspace(1)[(0, 0)].abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn filtration_of_long_symplectic_product() {
        let factors: Vec<Matrix> = (0..10)
            .map(|s| linalg::random_symplectic(2, 1.0, 100 + s).unwrap())
            .collect();
        let p = factors
            .iter()
            .fold(Matrix::identity(4, 4), |acc, a| a * acc);
        let f = filtration_estimate(&p, 10, 1e-3).unwrap();
        assert_eq!(*f.r.last().unwrap(), 4);
        assert!(f.invariance_residual <= 1e-8, "{}", f.invariance_residual);
    }
}
