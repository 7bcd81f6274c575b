//! Dense linear-algebra primitives: norms and conorms, the standard symplectic
//! form, eigenvalue moduli, symplectic-orthogonal flag alignment and seeded
//! random generation of test matrices.
//!
//! Matrices are small (dimension well below 64), so everything is dense and
//! backed by `nalgebra`.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Symplectic group membership: `‖MᵀJM − J‖_F`.
pub const TOL_SYMP: f64 = 1e-9;
/// Relative tolerance on eigenvalue modulus pairing.
pub const TOL_EIG: f64 = 1e-6;
/// Subspace alignment tolerance.
pub const TOL_ANGLE: f64 = 1e-8;
/// Default clustering gap for per-step exponents.
pub const GAP_TOL: f64 = 1e-3;
/// Default tail-ratio slack for witness sequences.
pub const RATIO_TOL: f64 = 0.05;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 100_000;

/// Numerical tolerances used across the crate, overridable as a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub symp: f64,
    pub eig: f64,
    pub angle: f64,
    pub gap: f64,
    pub ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symp: TOL_SYMP,
            eig: TOL_EIG,
            angle: TOL_ANGLE,
            gap: GAP_TOL,
            ratio: RATIO_TOL,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            symp: self.symp * factor,
            eig: self.eig * factor,
            angle: self.angle * factor,
            gap: self.gap * factor,
            ratio: self.ratio * factor,
        }
    }
}

pub fn check_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "{what}: expected a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Build a matrix from row-major rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn diag(entries: &[f64]) -> Matrix {
    Matrix::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn rotation(angle: f64) -> Matrix {
    let (s, c) = angle.sin_cos();
    Matrix::from_row_slice(2, 2, &[c, -s, s, c])
}

pub fn block_diagonal(blocks: &[&Matrix]) -> Matrix {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(dim, dim);
    let mut offset = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((offset, offset), (k, k)).copy_from(b);
        offset += k;
    }
    out
}

pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Operator 2-norm.
pub fn norm2(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Conorm `m(M) = min_{‖v‖=1} ‖Mv‖`, the smallest singular value.
pub fn conorm(m: &Matrix) -> Result<f64> {
    check_square(m, "conorm")?;
    Ok(singular_values(m)?.last().copied().unwrap_or(0.0))
}

/// Standard symplectic form `J = [[0, I], [−I, 0]]` of size `2n`.
pub fn standard_j(n: usize) -> Matrix {
    let mut j = Matrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// `‖MᵀJM − J‖_F`.
pub fn symplectic_residual(m: &Matrix) -> Result<f64> {
    check_square(m, "symplectic_residual")?;
    if !m.nrows().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "symplectic_residual: odd dimension {}",
            m.nrows()
        )));
    }
    let j = standard_j(m.nrows() / 2);
    Ok((m.transpose() * &j * m - j).norm())
}

/// Whether `m` is symplectic relative to its own scale (`‖M‖²·tol`).
pub fn is_symplectic(m: &Matrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) {
        return false;
    }
    let scale = m.norm().powi(2).max(1.0);
    symplectic_residual(m).is_ok_and(|r| r <= tol * scale)
}

/// Exact inverse of a symplectic matrix, `M⁻¹ = −J Mᵀ J`.
pub fn symplectic_inverse(m: &Matrix) -> Matrix {
    let j = standard_j(m.nrows() / 2);
    -(&j * m.transpose() * &j)
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    check_square(m, "inverse")?;
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("matrix is singular".into()))
}

/// Eigenvalues via a real Schur reduction; complex pairs come from 2×2 blocks.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    check_square(m, "eigenvalues")?;
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues with the contracting part recomputed from the inverse when one
/// is supplied. Large eigenvalues of a product dominate the absolute error of
/// a Schur reduction, so small ones are read off as reciprocals of the
/// inverse's large ones.
pub fn accurate_eigenvalues(m: &Matrix, inverse: Option<&Matrix>) -> Result<Vec<Complex64>> {
    let direct = eigenvalues(m)?;
    let Some(inv) = inverse else {
        return Ok(direct);
    };
    let cut = 1e-6;
    let mut out: Vec<Complex64> = direct
        .iter()
        .copied()
        .filter(|z| z.norm().ln() >= -cut)
        .collect();
    out.extend(
        eigenvalues(inv)?
            .into_iter()
            .filter(|z| z.norm().ln() > cut)
            .map(|z| Complex64::new(1.0, 0.0) / z),
    );
    if out.len() == m.nrows() {
        Ok(out)
    } else {
        Ok(direct)
    }
}

/// Eigenvalue moduli with algebraic multiplicity, descending.
pub fn eigen_moduli(m: &Matrix) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = eigenvalues(m)?.iter().map(|z| z.norm()).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Eigenvalues of `m`, using the exact symplectic inverse for the contracting
/// half when `m` is symplectic.
pub fn spectrum(m: &Matrix) -> Result<Vec<Complex64>> {
    if is_symplectic(m, TOL_SYMP) {
        accurate_eigenvalues(m, Some(&symplectic_inverse(m)))
    } else {
        eigenvalues(m)
    }
}

/// Like [`eigen_moduli`] but accurate for the small moduli of long symplectic products.
pub fn spectrum_moduli(m: &Matrix) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = spectrum(m)?.iter().map(|z| z.norm()).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Orthonormalize columns in order (modified Gram-Schmidt, two passes).
/// Returns `None` when a column is numerically dependent on its predecessors.
pub fn orthonormalize_columns(m: &Matrix, drop_tol: f64) -> Option<Matrix> {
    let mut q = m.clone();
    for k in 0..q.ncols() {
        let original = q.column(k).norm();
        for _ in 0..2 {
            for p in 0..k {
                let proj = q.column(p).dot(&q.column(k));
                let col_p = q.column(p).clone_owned();
                q.column_mut(k).axpy(-proj, &col_p, 1.0);
            }
        }
        let norm = q.column(k).norm();
        if norm <= drop_tol * original.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return None;
        }
        q.column_mut(k).scale_mut(1.0 / norm);
    }
    Some(q)
}

/// Orthonormal basis for the dominant `rank`-dimensional column space of `m`.
pub fn dominant_columns(m: &Matrix, rank: usize) -> Result<Matrix> {
    if rank == 0 {
        return Ok(Matrix::zeros(m.nrows(), 0));
    }
    let svd = m
        .clone()
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if rank > idx.len() {
        return Err(Error::NumericalFailure(format!(
            "requested rank {rank} exceeds available {}",
            idx.len()
        )));
    }
    Ok(Matrix::from_fn(m.nrows(), rank, |i, k| u[(i, idx[k])]))
}

/// Symplectic form `ω(v, w) = vᵀJw`.
fn omega(v: &[f64], w: &[f64]) -> f64 {
    let n = v.len() / 2;
    (0..n).map(|k| v[k] * w[n + k] - v[n + k] * w[k]).sum()
}

/// Real `2n × 2n` form of a complex `n × n` matrix acting on `p + i q`.
pub fn realify(u: &CMatrix) -> Matrix {
    let n = u.nrows();
    let mut r = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = u[(i, j)];
            r[(i, j)] = z.re;
            r[(i, n + j)] = -z.im;
            r[(n + i, j)] = z.im;
            r[(n + i, n + j)] = z.re;
        }
    }
    r
}

fn complex_gram_schmidt_extend(mut cols: Vec<DVector<Complex64>>, n: usize) -> CMatrix {
    let project_out = |v: &mut DVector<Complex64>, basis: &[DVector<Complex64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = b.dotc(v);
                *v -= b * c;
            }
        }
    };
    while cols.len() < n {
        // Pick the standard basis vector with the largest residual.
        let mut best: Option<(f64, DVector<Complex64>)> = None;
        for k in 0..n {
            let mut e = DVector::from_element(n, Complex64::new(0.0, 0.0));
            e[k] = Complex64::new(1.0, 0.0);
            project_out(&mut e, &cols);
            let nrm = e.norm();
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, e));
            }
        }
        let (nrm, v) = best.expect("n > 0");
        cols.push(v / Complex64::new(nrm, 0.0));
    }
    CMatrix::from_columns(&cols)
}

/// Build a symplectic orthogonal `C` with `C·F_i = span(p_1, …, p_{r(i)})` for
/// the isotropic flag whose level `i` is spanned by the first `levels[i]`
/// columns of `basis`.
///
/// Real orthonormal isotropic vectors are Hermitian-orthonormal once read as
/// complex vectors `p + i q`; extending them to a unitary basis and taking the
/// real form gives an element of `Sp(2n) ∩ O(2n)`.
pub fn symplectic_orthogonal_adapt(basis: &Matrix, levels: &[usize]) -> Result<Matrix> {
    let dim = basis.nrows();
    if !dim.is_multiple_of(2) || dim == 0 {
        return Err(Error::InvalidInput(format!(
            "flag alignment needs even dimension, got {dim}"
        )));
    }
    let n = dim / 2;
    let r = basis.ncols();
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels.last().is_some_and(|&l| l != r) {
        return Err(Error::InvalidInput(
            "flag levels must increase strictly and end at the basis size".into(),
        ));
    }
    let level_of = |col: usize| levels.iter().position(|&l| col < l).unwrap_or(0) + 1;
    if r > n {
        return Err(Error::FlagAlignment {
            level: levels.len(),
            defect: (r - n) as f64,
        });
    }
    let q = orthonormalize_columns(basis, 1e-10).ok_or(Error::FlagAlignment {
        level: 1,
        defect: f64::INFINITY,
    })?;
    let cols: Vec<Vec<f64>> = (0..r)
        .map(|k| q.column(k).iter().copied().collect())
        .collect();
    for a in 0..r {
        for b in (a + 1)..r {
            let w = omega(&cols[a], &cols[b]).abs();
            if w > TOL_ANGLE.max(1e-8) {
                return Err(Error::FlagAlignment {
                    level: level_of(b),
                    defect: w,
                });
            }
        }
    }
    let zs: Vec<DVector<Complex64>> = cols
        .iter()
        .map(|v| DVector::from_fn(n, |k, _| Complex64::new(v[k], v[n + k])))
        .collect();
    let u = complex_gram_schmidt_extend(zs, n);
    Ok(realify(&u).transpose())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> Matrix {
    loop {
        let a = random_matrix(dim, dim, rng);
        if let Some(q) = orthonormalize_columns(&a, 1e-6) {
            return q;
        }
    }
}

/// Random element of `Sp(2n) ∩ O(2n)` (the real form of a random unitary).
pub fn random_orthogonal_symplectic(n: usize, rng: &mut impl Rng) -> Matrix {
    let seed_cols: Vec<DVector<Complex64>> = (0..n)
        .map(|_| {
            DVector::from_fn(n, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        })
        .collect();
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    for mut v in seed_cols {
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-6 {
            basis.push(v / Complex64::new(nrm, 0.0));
        }
    }
    realify(&complex_gram_schmidt_extend(basis, n))
}

/// Seeded random symplectic matrix `exp(J S)` with `S` symmetric and
/// `‖S‖₂ = spread`, so `‖M‖₂ ≤ e^spread`.
pub fn random_symplectic(n: usize, spread: f64, seed: u64) -> Result<Matrix> {
    if n == 0 || !spread.is_finite() || spread < 0.0 {
        return Err(Error::InvalidInput(format!(
            "random_symplectic: need n >= 1 and finite spread >= 0 (n={n}, spread={spread})"
        )));
    }
    let dim = 2 * n;
    if spread == 0.0 {
        return Ok(Matrix::identity(dim, dim));
    }
    let mut rng = rng(seed);
    let a = random_matrix(dim, dim, &mut rng);
    let s = (&a + a.transpose()) * 0.5;
    let s = &s * (spread / norm2(&s)?);
    Ok((standard_j(n) * s).exp())
}

/// `‖B − Id‖₂`.
pub fn deviation_from_identity(b: &Matrix) -> Result<f64> {
    norm2(&(b - Matrix::identity(b.nrows(), b.ncols())))
}

/// A matrix stored as `mantissa · 2^exp2`, renormalized by exact powers of two
/// so that long products neither overflow nor lose relative precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    pub mantissa: Matrix,
    pub exp2: i64,
}

impl ScaledMatrix {
    pub fn identity(dim: usize) -> Self {
        ScaledMatrix {
            mantissa: Matrix::identity(dim, dim),
            exp2: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mantissa.nrows()
    }

    /// `self ← a · self`.
    pub fn left_mul(&mut self, a: &Matrix) {
        self.mantissa = a * &self.mantissa;
    }

    /// `self ← self · a`.
    pub fn right_mul(&mut self, a: &Matrix) {
        self.mantissa = &self.mantissa * a;
    }

    /// `later · earlier`.
    pub fn compose(later: &ScaledMatrix, earlier: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            mantissa: &later.mantissa * &earlier.mantissa,
            exp2: later.exp2 + earlier.exp2,
        };
        out.renormalize();
        out
    }

    pub fn renormalize(&mut self) {
        let max = self.mantissa.amax();
        if max == 0.0 || !max.is_finite() {
            return;
        }
        let e = max.log2().floor() as i64;
        if e != 0 {
            self.mantissa *= 2f64.powi(-e as i32);
            self.exp2 += e;
        }
    }

    pub fn log_scale(&self) -> f64 {
        self.exp2 as f64 * std::f64::consts::LN_2
    }

    /// `log ‖·‖₂` of the represented matrix.
    pub fn log_norm(&self) -> Result<f64> {
        Ok(norm2(&self.mantissa)?.ln() + self.log_scale())
    }

    /// The represented matrix, or `None` if it is outside double range.
    pub fn value(&self) -> Option<Matrix> {
        let shift = self.exp2;
        if shift.abs() > 1000 {
            return None;
        }
        let v = &self.mantissa * 2f64.powi(shift as i32);
        v.iter().all(|x| x.is_finite()).then_some(v)
    }
}

/// Symplectic direct sum: block `i` acts on the pairs `(p_k, q_k)` of its own
/// half-coordinates, placed consecutively in the global `p` and `q` ranges.
pub fn symplectic_sum(blocks: &[&Matrix]) -> Result<Matrix> {
    let halves: Vec<usize> = blocks.iter().map(|b| b.nrows() / 2).collect();
    for b in blocks {
        check_square(b, "symplectic block")?;
        if b.nrows() % 2 != 0 {
            return Err(Error::InvalidInput(
                "symplectic block of odd dimension".into(),
            ));
        }
    }
    let n: usize = halves.iter().sum();
    let mut out = Matrix::zeros(2 * n, 2 * n);
    let mut offset = 0;
    for (b, &h) in blocks.iter().zip(&halves) {
        let global = |local: usize| {
            if local < h {
                offset + local
            } else {
                n + offset + local - h
            }
        };
        for i in 0..2 * h {
            for j in 0..2 * h {
                out[(global(i), global(j))] = b[(i, j)];
            }
        }
        offset += h;
    }
    Ok(out)
}

/// Serde adapter storing a matrix as a list of rows.
pub mod serde_matrix {
    use super::{from_rows, to_rows, Matrix};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, 0));
        }
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for lists of matrices.
pub mod serde_matrices {
    use super::{from_rows, to_rows, Matrix};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
        Vec::<Vec<Vec<f64>>>::deserialize(d)?
            .iter()
            .map(|rows| from_rows(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}
