//! Eigenvalue flattening for products of symplectic matrices.
//!
//! Given `A_1, …, A_n` and `ε`, build symplectic `B_k = C_{k−1}ᵀ Λ C_{k−1}`
//! with `‖B_k − Id‖₂ ≤ e^ε − 1` such that `T = A_n B_n ⋯ A_1 B_1` has every
//! eigenvalue whose per-step exponent lies in `[−ε, ε]` on the unit circle,
//! while the out-of-band spectrum is untouched. `C_k` is symplectic
//! orthogonal and carries the pushed-forward flag `A^k F_i` onto
//! `span(p_1, …, p_{r(i)})`; `Λ` rescales the in-band positive levels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Tolerances};
use crate::spectral::{self, FiltrationEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatteningInput {
    #[serde(with = "linalg::serde_matrices")]
    pub factors: Vec<Matrix>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatteningResult {
    /// `B_1, …, B_n`.
    #[serde(with = "linalg::serde_matrices")]
    pub perturbations: Vec<Matrix>,
    /// Half the number of in-band eigenvalues of the original product.
    pub d: usize,
    pub max_deviation: f64,
    /// Eigenvalues of the perturbed product with `|log ρ|/n ≤ gap_tol`.
    pub circle_count: usize,
    pub filtration: FiltrationEstimate,
    /// `C_0, …, C_{n−1}`.
    #[serde(with = "linalg::serde_matrices")]
    pub aligners: Vec<Matrix>,
    #[serde(with = "linalg::serde_matrix")]
    pub scaler: Matrix,
    /// Number of positive exponent clusters.
    pub m: usize,
    /// Number of clusters with exponent `≥ ε`.
    pub u: usize,
    pub constant_shortcut: bool,
}

fn validate(input: &FlatteningInput, tol: &Tolerances) -> Result<usize> {
    if !(input.eps > 0.0 && input.eps.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {}",
            input.eps
        )));
    }
    let first = input
        .factors
        .first()
        .ok_or_else(|| Error::InvalidInput("no factors".into()))?;
    let dim = first.nrows();
    for (i, a) in input.factors.iter().enumerate() {
        linalg::check_square(a, &format!("factor {}", i + 1))?;
        if a.nrows() != dim || dim % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "factor {} has dimension {}, expected even dimension {dim}",
                i + 1,
                a.nrows()
            )));
        }
        if !linalg::is_symplectic(a, tol.symp) {
            return Err(Error::InvalidInput(format!(
                "factor {} is not symplectic (residual {:e})",
                i + 1,
                linalg::symplectic_residual(a)?
            )));
        }
    }
    Ok(dim)
}

/// `Y_n ⋯ Y_1` for a list `Y_1, …, Y_n`.
fn ordered_product<'a>(dim: usize, factors: impl Iterator<Item = &'a Matrix>) -> Result<Matrix> {
    let p = factors.fold(Matrix::identity(dim, dim), |acc, a| a * acc);
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("product overflows".into()));
    }
    Ok(p)
}

fn per_step_exponents(product: &Matrix, n: usize) -> Result<Vec<f64>> {
    Ok(linalg::spectrum_moduli(product)?
        .iter()
        .map(|r| r.ln() / n as f64)
        .collect())
}

/// Number of eigenvalue moduli `ρ` of `product` with `|log ρ|/n ≤ eps`.
pub fn count_in_band(product: &Matrix, n: usize, eps: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidInput("step count must be at least 1".into()));
    }
    let count = per_step_exponents(product, n)?
        .iter()
        .filter(|e| e.abs() <= eps)
        .count();
    let symplectic = product.nrows().is_multiple_of(2) && linalg::is_symplectic(product, linalg::TOL_SYMP);
    if symplectic && count % 2 == 1 {
        return Err(Error::ParityViolation { count });
    }
    Ok(count)
}

/// Reject exponents within `gap_tol` of the band edges `±eps`.
pub fn check_band_edges(exponents: &[f64], eps: f64, gap_tol: f64) -> Result<()> {
    match exponents.iter().find(|e| (e.abs() - eps).abs() < gap_tol) {
        Some(&exponent) => Err(Error::BandEdgeAmbiguity {
            exponent,
            eps,
            gap_tol,
        }),
        None => Ok(()),
    }
}

pub fn flatten(input: &FlatteningInput) -> Result<FlatteningResult> {
    flatten_with(input, &Tolerances::default())
}

pub fn flatten_with(input: &FlatteningInput, tol: &Tolerances) -> Result<FlatteningResult> {
    let dim = validate(input, tol)?;
    let half = dim / 2;
    let n = input.factors.len();
    let product = ordered_product(dim, input.factors.iter())?;
    let filtration = spectral::filtration_estimate(&product, n, tol.gap)?;
    check_band_edges(&filtration.exponents, input.eps, tol.gap)?;
    let in_band = count_in_band(&product, n, input.eps)?;

    let m = filtration
        .thresholds
        .iter()
        .filter(|&&l| l > tol.gap)
        .count();
    let u = filtration
        .thresholds
        .iter()
        .filter(|&&l| l >= input.eps)
        .count();
    let levels: Vec<usize> = filtration.r[..m].to_vec();
    let isotropic_dim = levels.last().copied().unwrap_or(0);
    if isotropic_dim > half {
        return Err(Error::FlagAlignment {
            level: m,
            defect: (isotropic_dim - half) as f64,
        });
    }

    let mut scaler = Matrix::identity(dim, dim);
    for i in u..m {
        let lam = filtration.thresholds[i];
        let lo = if i == 0 { 0 } else { levels[i - 1] };
        for k in lo..levels[i] {
            scaler[(k, k)] = (-lam).exp();
            scaler[(half + k, half + k)] = lam.exp();
        }
    }

    let flag = filtration.basis.columns(0, isotropic_dim).into_owned();
    let constant = input.factors.windows(2).all(|w| w[0] == w[1]);
    let aligners = if m == 0 {
        vec![Matrix::identity(dim, dim); n]
    } else if constant {
        let c = linalg::symplectic_orthogonal_adapt(&flag, &levels)?;
        let general = propagated_aligners(&input.factors, &flag, &levels)?;
        cross_check_shortcut(&c, &general, &scaler)?;
        vec![c; n]
    } else {
        propagated_aligners(&input.factors, &flag, &levels)?
    };
    let perturbations: Vec<Matrix> = aligners
        .iter()
        .map(|c| c.transpose() * &scaler * c)
        .collect();

    let max_deviation = perturbations
        .iter()
        .map(linalg::deviation_from_identity)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let perturbed = perturbed_product(&input.factors, &perturbations)?;
    let circle_count = per_step_exponents(&perturbed, n)?
        .iter()
        .filter(|e| e.abs() <= tol.gap)
        .count();
    Ok(FlatteningResult {
        perturbations,
        d: in_band / 2,
        max_deviation,
        circle_count,
        filtration,
        aligners,
        scaler,
        m,
        u,
        constant_shortcut: constant && m > 0,
    })
}

/// `C_k` aligning `F^k = A_k ⋯ A_1 F`, for `k = 0, …, n−1`.
fn propagated_aligners(factors: &[Matrix], flag: &Matrix, levels: &[usize]) -> Result<Vec<Matrix>> {
    let mut current = flag.clone();
    let mut out = Vec::with_capacity(factors.len());
    for (k, a) in factors.iter().enumerate() {
        out.push(linalg::symplectic_orthogonal_adapt(&current, levels)?);
        if k + 1 < factors.len() {
            current = linalg::orthonormalize_columns(&(a * &current), 1e-12).ok_or(
                Error::FlagAlignment {
                    level: levels.len(),
                    defect: f64::INFINITY,
                },
            )?;
        }
    }
    Ok(out)
}

fn cross_check_shortcut(c: &Matrix, general: &[Matrix], scaler: &Matrix) -> Result<()> {
    let b = c.transpose() * scaler * c;
    for (k, g) in general.iter().enumerate() {
        let bg = g.transpose() * scaler * g;
        let diff = (&b - &bg).norm();
        if diff > 1e-8 * b.norm() {
            return Err(Error::NumericalFailure(format!(
                "constant aligner shortcut differs from the propagated flag at step {k} ({diff:e})"
            )));
        }
    }
    Ok(())
}

/// `T = A_n B_n ⋯ A_1 B_1`.
pub fn perturbed_product(factors: &[Matrix], perturbations: &[Matrix]) -> Result<Matrix> {
    if factors.len() != perturbations.len() {
        return Err(Error::InvalidInput(format!(
            "{} factors but {} perturbations",
            factors.len(),
            perturbations.len()
        )));
    }
    let dim = factors[0].nrows();
    if perturbations
        .iter()
        .any(|b| b.nrows() != dim || b.ncols() != dim)
    {
        return Err(Error::InvalidInput(
            "perturbation dimension mismatch".into(),
        ));
    }
    let steps: Vec<Matrix> = factors
        .iter()
        .zip(perturbations)
        .map(|(a, b)| a * b)
        .collect();
    ordered_product(dim, steps.iter())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatteningCertificate {
    pub passed: bool,
    pub in_band_count: usize,
    pub circle_count: usize,
    pub max_deviation: f64,
    pub checks: Vec<CertificateCheck>,
}

impl FlatteningCertificate {
    fn push(&mut self, name: &str, value: f64, bound: f64, ok: bool) {
        self.passed &= ok;
        self.checks.push(CertificateCheck {
            name: name.to_string(),
            value,
            bound,
            ok,
        });
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| format!("{}: {} (bound {})", c.name, c.value, c.bound))
            .collect()
    }

    fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::CertificationFailure(self.failures()))
        }
    }
}

/// Certify perturbations from scratch: symplectic, within the deviation bound,
/// flattening exactly the in-band eigenvalues and preserving the others.
pub fn verify_perturbations(
    input: &FlatteningInput,
    perturbations: &[Matrix],
) -> Result<FlatteningCertificate> {
    certify(input, perturbations, &Tolerances::default())?.into_result()
}

fn certify(
    input: &FlatteningInput,
    perturbations: &[Matrix],
    tol: &Tolerances,
) -> Result<FlatteningCertificate> {
    let dim = validate(input, tol)?;
    let n = input.factors.len();
    let original = ordered_product(dim, input.factors.iter())?;
    let perturbed = perturbed_product(&input.factors, perturbations)?;
    let in_band_count = count_in_band(&original, n, input.eps)?;
    let perturbed_exps = per_step_exponents(&perturbed, n)?;
    let circle_count = perturbed_exps.iter().filter(|e| e.abs() <= tol.gap).count();
    let mut worst_residual: f64 = 0.0;
    let mut max_deviation: f64 = 0.0;
    for b in perturbations {
        worst_residual = worst_residual.max(linalg::symplectic_residual(b)?);
        max_deviation = max_deviation.max(linalg::deviation_from_identity(b)?);
    }
    let mut cert = FlatteningCertificate {
        passed: true,
        in_band_count,
        circle_count,
        max_deviation,
        checks: Vec::new(),
    };
    cert.push(
        "symplectic_residual",
        worst_residual,
        tol.symp,
        worst_residual <= tol.symp,
    );
    let bound = input.eps.exp() - 1.0 + 1e-9;
    cert.push(
        "max_deviation",
        max_deviation,
        bound,
        max_deviation <= bound,
    );
    cert.push(
        "circle_count",
        circle_count as f64,
        in_band_count as f64,
        circle_count == in_band_count,
    );
    let outside = |exps: &[f64]| {
        let mut v: Vec<f64> = exps
            .iter()
            .copied()
            .filter(|e| e.abs() > input.eps)
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let before = outside(&per_step_exponents(&original, n)?);
    let after = outside(&perturbed_exps);
    let defect = if before.len() == after.len() {
        before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    cert.push("out_of_band_exponents", defect, 1e-5, defect <= 1e-5);
    Ok(cert)
}

/// Certify a full construction result, including the aligner structure.
pub fn verify_flattening(
    input: &FlatteningInput,
    result: &FlatteningResult,
) -> Result<FlatteningCertificate> {
    let tol = Tolerances::default();
    let mut cert = certify(input, &result.perturbations, &tol)?;
    cert.push(
        "claimed_circle_count",
        result.circle_count as f64,
        cert.circle_count as f64,
        result.circle_count == cert.circle_count && 2 * result.d == cert.in_band_count,
    );
    cert.push(
        "claimed_max_deviation",
        (result.max_deviation - cert.max_deviation).abs(),
        1e-12,
        (result.max_deviation - cert.max_deviation).abs() <= 1e-12,
    );
    let dim = result.scaler.nrows();
    let scaler_residual = linalg::symplectic_residual(&result.scaler)?;
    let off_diagonal = (&result.scaler - Matrix::from_diagonal(&result.scaler.diagonal())).norm();
    cert.push(
        "scaler_symplectic_diagonal",
        scaler_residual + off_diagonal,
        tol.symp,
        scaler_residual + off_diagonal <= tol.symp,
    );
    let mut aligner_defect: f64 = 0.0;
    let mut reconstruction: f64 = 0.0;
    if result.aligners.len() != result.perturbations.len() {
        aligner_defect = f64::INFINITY;
    } else {
        for (c, b) in result.aligners.iter().zip(&result.perturbations) {
            let orth = (c.transpose() * c - Matrix::identity(dim, dim)).norm();
            aligner_defect = aligner_defect
                .max(orth)
                .max(linalg::symplectic_residual(c)?);
            let rebuilt = c.transpose() * &result.scaler * c;
            reconstruction = reconstruction.max((&rebuilt - b).norm());
        }
    }
    cert.push(
        "aligners_orthogonal_symplectic",
        aligner_defect,
        tol.symp,
        aligner_defect <= tol.symp,
    );
    cert.push(
        "perturbation_reconstruction",
        reconstruction,
        1e-12,
        reconstruction <= 1e-12,
    );
    cert.into_result()
}

/// Seeded random instance with `n ≤ 12`, half-dimension `≤ 3` and
/// `eps ∈ {0.2, 0.5, 1.0}`, resampled until every exponent clears the band
/// edges and the clustering is unambiguous.
pub fn random_instance(seed: u64, gap_tol: f64) -> FlatteningInput {
    let mut rng = linalg::rng(seed);
    loop {
        let n = rng.gen_range(1..=12usize);
        let half = rng.gen_range(1..=3usize);
        let eps = [0.2, 0.5, 1.0][rng.gen_range(0..3usize)];
        let spread = rng.gen_range(0.1..1.2);
        let factors: Vec<Matrix> = (0..n)
            .map(|_| linalg::random_symplectic(half, spread, rng.gen()).expect("valid parameters"))
            .collect();
        let input = FlatteningInput { factors, eps };
        let Ok(product) = ordered_product(2 * half, input.factors.iter()) else {
            continue;
        };
        let Ok(filtration) = spectral::filtration_estimate(&product, n, gap_tol) else {
            continue;
        };
        if check_band_edges(&filtration.exponents, eps, gap_tol).is_ok() {
            return input;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, rotation, symplectic_sum};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn single(a: Matrix, eps: f64) -> FlatteningInput {
        FlatteningInput {
            factors: vec![a],
            eps,
        }
    }

    #[test]
    fn count_examples() {
        let a = diag(&[0.5f64.exp(), (-0.5f64).exp()]);
        assert_eq!(count_in_band(&a, 1, 0.6).unwrap(), 2);
        let b = diag(&[E * E, 1.0 / (E * E)]);
        assert_eq!(count_in_band(&(&b * &b), 2, 0.5).unwrap(), 0);
    }

    #[test]
    fn single_factor_example() {
        let input = single(diag(&[0.5f64.exp(), (-0.5f64).exp()]), 0.6);
        let r = flatten(&input).unwrap();
        let b = &r.perturbations[0];
        assert!((b - diag(&[(-0.5f64).exp(), 0.5f64.exp()])).norm() < 1e-12);
        assert_abs_diff_eq!(r.max_deviation, 0.5f64.exp() - 1.0, epsilon = 1e-12);
        assert!(r.max_deviation < 0.6f64.exp() - 1.0);
        assert_eq!(r.circle_count, 2);
        assert_eq!(r.d, 1);
        let t = perturbed_product(&input.factors, &r.perturbations).unwrap();
        let moduli = linalg::eigen_moduli(&t).unwrap();
        assert!(moduli.iter().all(|x| (x - 1.0).abs() < 1e-12));
        verify_flattening(&input, &r).unwrap();
    }

    #[test]
    fn no_in_band_exponents() {
        let a = diag(&[E, 1.0 / E]);
        let input = FlatteningInput {
            factors: vec![a.clone(), a],
            eps: 0.5,
        };
        let r = flatten(&input).unwrap();
        assert!(r.perturbations.iter().all(|b| *b == Matrix::identity(2, 2)));
        assert_eq!(r.circle_count, 0);
        let cert = verify_perturbations(&input, &r.perturbations).unwrap();
        assert_eq!(cert.circle_count, 0);
    }

    #[test]
    fn rotation_block_is_left_alone() {
        let a = symplectic_sum(&[&diag(&[E, 1.0 / E]), &rotation(0.7)]).unwrap();
        assert!(linalg::is_symplectic(&a, 1e-12));
        let input = FlatteningInput {
            factors: vec![a; 3],
            eps: 0.5,
        };
        let r = flatten(&input).unwrap();
        assert_eq!(r.d, 1);
        assert_eq!((r.m, r.u), (1, 1));
        for b in &r.perturbations {
            assert!((b - Matrix::identity(4, 4)).norm() < 1e-12);
        }
        assert_eq!(r.circle_count, 2);
        verify_flattening(&input, &r).unwrap();
    }

    #[test]
    fn tampered_perturbation_fails() {
        let input = single(diag(&[0.5f64.exp(), (-0.5f64).exp()]), 0.6);
        let mut r = flatten(&input).unwrap();
        r.perturbations[0] *= 2.0;
        match verify_flattening(&input, &r) {
            Err(Error::CertificationFailure(msgs)) => {
                assert!(msgs.iter().any(|m| m.starts_with("symplectic_residual")));
                assert!(msgs.iter().any(|m| m.starts_with("max_deviation")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn band_edge_is_reported() {
        let input = single(diag(&[0.5f64.exp(), (-0.5f64).exp()]), 0.5005);
        assert!(matches!(
            flatten(&input),
            Err(Error::BandEdgeAmbiguity { .. })
        ));
    }

    #[test]
    fn constant_shortcut_with_nontrivial_scaling() {
        let q = linalg::random_orthogonal_symplectic(2, &mut linalg::rng(4));
        let core = symplectic_sum(&[
            &diag(&[0.3f64.exp(), (-0.3f64).exp()]),
            &diag(&[E, 1.0 / E]),
        ])
        .unwrap();
        let a = &q * core * q.transpose();
        let input = FlatteningInput {
            factors: vec![a; 4],
            eps: 0.5,
        };
        let r = flatten(&input).unwrap();
        assert!(r.constant_shortcut);
        assert_eq!((r.m, r.u, r.d), (2, 1, 1));
        assert_abs_diff_eq!(r.max_deviation, 0.3f64.exp() - 1.0, epsilon = 1e-10);
        verify_flattening(&input, &r).unwrap();
    }

    #[test]
    fn varying_factors_flatten() {
        for seed in 0..10 {
            let input = random_instance(seed, 1e-3);
            let r = flatten(&input).unwrap();
            let cert = verify_flattening(&input, &r).unwrap();
            assert_eq!(cert.circle_count, 2 * r.d);
        }
    }
}
