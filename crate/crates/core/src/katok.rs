//! Block assembly `g(x) = Σ ε A_i⁻¹ g_i(ε⁻¹ A_i x_i)` of planar maps near the
//! origin of `R^{2N}`, with symplecticity and closeness diagnostics.
//!
//! Block `i` acts on the pair `(p_i, q_i)`, i.e. on coordinates `i` and `N + i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Area-preserving planar map `s` applied before the rotation: `g_i = R_i ∘ s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// `s(x, y) = (x + delta, y)`.
    Translation {
        delta: f64,
    },
    /// `s(x, y) = (x, y + amplitude · sin(frequency · x))`.
    SinShear {
        amplitude: f64,
        frequency: f64,
    },
}

impl Perturbation {
    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Perturbation::None => (x, y),
            Perturbation::Translation { delta } => (x + delta, y),
            Perturbation::SinShear {
                amplitude,
                frequency,
            } => (x, y + amplitude * (frequency * x).sin()),
        }
    }

    fn jacobian(&self, x: f64) -> Matrix {
        match *self {
            Perturbation::None | Perturbation::Translation { .. } => Matrix::identity(2, 2),
            Perturbation::SinShear {
                amplitude,
                frequency,
            } => Matrix::from_row_slice(
                2,
                2,
                &[1.0, 0.0, amplitude * frequency * (frequency * x).cos(), 1.0],
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatokBlock {
    /// Rotation angle of `R_i`.
    pub angle: f64,
    #[serde(with = "linalg::serde_matrix")]
    pub aligner: Matrix,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatokAssembly {
    blocks: Vec<KatokBlock>,
    inverses: Vec<Matrix>,
    epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatokDiagnostics {
    pub samples: usize,
    /// Max symplectic residual of the central-difference Jacobian.
    pub max_symplectic_residual: f64,
    /// `max |g(x) − L x|` over the grid.
    pub c0_distance: f64,
    /// Max deviation of the central-difference Jacobian from the analytic one.
    pub max_jacobian_error: f64,
}

/// Central-difference step.
pub const JACOBIAN_STEP: f64 = 1e-5;

impl KatokAssembly {
    pub fn new(blocks: Vec<KatokBlock>, epsilon: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("no blocks".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let inverses = blocks
            .iter()
            .map(|b| {
                if b.aligner.shape() != (2, 2) {
                    return Err(Error::InvalidInput("aligners must be 2x2".into()));
                }
                linalg::inverse(&b.aligner)
            })
            .collect::<Result<_>>()?;
        Ok(KatokAssembly {
            blocks,
            inverses,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.blocks.len()
    }

    fn block_coords(&self, x: &[f64], i: usize) -> (f64, f64) {
        (x[i], x[self.blocks.len() + i])
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.blocks.len();
        let mut out = vec![0.0; 2 * n];
        for (i, (b, inv)) in self.blocks.iter().zip(&self.inverses).enumerate() {
            let (p, q) = self.block_coords(x, i);
            let a = &b.aligner;
            let u = (a[(0, 0)] * p + a[(0, 1)] * q) / self.epsilon;
            let v = (a[(1, 0)] * p + a[(1, 1)] * q) / self.epsilon;
            let (su, sv) = b.perturbation.apply(u, v);
            let (s, c) = b.angle.sin_cos();
            let (ru, rv) = (c * su - s * sv, s * su + c * sv);
            out[i] = self.epsilon * (inv[(0, 0)] * ru + inv[(0, 1)] * rv);
            out[n + i] = self.epsilon * (inv[(1, 0)] * ru + inv[(1, 1)] * rv);
        }
        out
    }

    /// `L = ⊕ A_i⁻¹ R_i A_i`.
    pub fn linear_part(&self) -> Matrix {
        let blocks: Vec<Matrix> = self
            .blocks
            .iter()
            .zip(&self.inverses)
            .map(|(b, inv)| inv * linalg::rotation(b.angle) * &b.aligner)
            .collect();
        linalg::symplectic_sum(&blocks.iter().collect::<Vec<_>>()).expect("2x2 blocks")
    }

    pub fn jacobian_fd(&self, x: &[f64], h: f64) -> Matrix {
        let d = self.dim();
        let mut jac = Matrix::zeros(d, d);
        let mut xp = x.to_vec();
        for j in 0..d {
            xp[j] = x[j] + h;
            let fp = self.eval(&xp);
            xp[j] = x[j] - h;
            let fm = self.eval(&xp);
            xp[j] = x[j];
            for i in 0..d {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    /// `Dg = ⊕ A_i⁻¹ R_i Ds(ε⁻¹ A_i x_i) A_i`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let blocks: Vec<Matrix> = self
            .blocks
            .iter()
            .zip(&self.inverses)
            .enumerate()
            .map(|(i, (b, inv))| {
                let (p, q) = self.block_coords(x, i);
                let u = (b.aligner[(0, 0)] * p + b.aligner[(0, 1)] * q) / self.epsilon;
                inv * linalg::rotation(b.angle) * b.perturbation.jacobian(u) * &b.aligner
            })
            .collect();
        linalg::symplectic_sum(&blocks.iter().collect::<Vec<_>>()).expect("2x2 blocks")
    }
}

/// Lattice of `per_axis` points per coordinate in `[−radius, radius]^dim`.
pub fn sample_grid(dim: usize, per_axis: usize, radius: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if per_axis <= 1 {
        vec![0.0]
    } else {
        (0..per_axis)
            .map(|k| -radius + 2.0 * radius * k as f64 / (per_axis - 1) as f64)
            .collect()
    };
    let total = axis.len().pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let v = axis[idx % axis.len()];
                    idx /= axis.len();
                    v
                })
                .collect()
        })
        .collect()
}

/// Assemble the map and evaluate its diagnostics on the given sample points.
pub fn katok_assemble(
    blocks: Vec<KatokBlock>,
    epsilon: f64,
    samples: &[Vec<f64>],
) -> Result<(KatokAssembly, KatokDiagnostics)> {
    let g = KatokAssembly::new(blocks, epsilon)?;
    let l = g.linear_part();
    let mut diag = KatokDiagnostics {
        samples: samples.len(),
        max_symplectic_residual: 0.0,
        c0_distance: 0.0,
        max_jacobian_error: 0.0,
    };
    for x in samples {
        if x.len() != g.dim() {
            return Err(Error::InvalidInput(format!(
                "sample of length {} for a map on R^{}",
                x.len(),
                g.dim()
            )));
        }
        let fd = g.jacobian_fd(x, JACOBIAN_STEP);
        diag.max_symplectic_residual = diag
            .max_symplectic_residual
            .max(linalg::symplectic_residual(&fd)?);
        diag.max_jacobian_error = diag.max_jacobian_error.max((&fd - g.jacobian(x)).amax());
        let gx = g.eval(x);
        let lx = &l * nalgebra::DVector::from_column_slice(x);
        let dist = gx
            .iter()
            .zip(lx.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        diag.c0_distance = diag.c0_distance.max(dist);
    }
    Ok((g, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::katok_linear;

    #[test]
    fn rotations_give_the_linear_map() {
        let (blocks, eps) = katok_linear();
        let grid = sample_grid(4, 4, 0.5);
        let (g, d) = katok_assemble(blocks, eps, &grid).unwrap();
        assert!(d.c0_distance < 1e-14, "{}", d.c0_distance);
        assert!(d.max_symplectic_residual <= 1e-6);
        assert!(linalg::is_symplectic(&g.linear_part(), 1e-12));
    }

    #[test]
    fn translation_distance_is_eps_delta() {
        let block = |delta| KatokBlock {
            angle: 0.4,
            aligner: Matrix::identity(2, 2),
            perturbation: Perturbation::Translation { delta },
        };
        let grid = sample_grid(2, 5, 1.0);
        let (_, d1) = katok_assemble(vec![block(0.3)], 0.1, &grid).unwrap();
        let (_, d2) = katok_assemble(vec![block(0.3)], 0.01, &grid).unwrap();
        assert!((d1.c0_distance - 0.03).abs() < 1e-14);
        assert!((d1.c0_distance / d2.c0_distance - 10.0).abs() < 1e-9);
        assert!(d1.max_symplectic_residual <= 1e-6);
    }

    #[test]
    fn sin_shear_matches_analytic_jacobian() {
        let blocks = vec![
            KatokBlock {
                angle: 1.1,
                aligner: Matrix::from_row_slice(2, 2, &[1.5, 0.2, 0.0, 1.0 / 1.5]),
                perturbation: Perturbation::SinShear {
                    amplitude: 0.1,
                    frequency: 1.0,
                },
            },
            KatokBlock {
                angle: -0.3,
                aligner: Matrix::identity(2, 2),
                perturbation: Perturbation::None,
            },
        ];
        let grid = sample_grid(4, 3, 0.2);
        let (g, d) = katok_assemble(blocks, 0.1, &grid).unwrap();
        assert!(
            d.max_symplectic_residual <= 1e-6,
            "{}",
            d.max_symplectic_residual
        );
        assert!(d.max_jacobian_error <= 1e-6, "{}", d.max_jacobian_error);
        for x in &grid {
            assert!(linalg::symplectic_residual(&g.jacobian(x)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn grid_shape() {
        let g = sample_grid(2, 3, 1.0);
        assert_eq!(g.len(), 9);
        assert!(g.contains(&vec![-1.0, 1.0]));
    }
}
