//! Matrix cocycles over a one-sided orbit and their window products
//! `A(j, n) = A_{j+n−1} ⋯ A_j`.
//!
//! Window products are accumulated per invariant block. Norms come from the
//! forward product and conorms from the product of inverses
//! (`m(P) = ‖P⁻¹‖⁻¹`), both rescaled by exact powers of two, so only the
//! dominant direction of each accumulation matters and neither overflows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_square, Matrix, ScaledMatrix};

/// Steps between renormalizations of the accumulated products.
pub const RENORMALIZE_EVERY: usize = 16;
/// Beyond this absolute log-size a product is reported through its logs only.
pub const OVERFLOW_LOG: f64 = 700.0;
/// Smallest singular value accepted for a cocycle factor.
pub const MIN_SINGULAR: f64 = 1e-12;
/// Relative off-diagonal mass tolerated when reading block restrictions.
pub const BLOCK_TOL: f64 = 1e-12;

/// Constant coordinate splitting into unstable, center and stable blocks, in
/// that coordinate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplittingSpec {
    pub unstable: usize,
    pub center: usize,
    pub stable: usize,
}

impl SplittingSpec {
    pub fn new(unstable: usize, center: usize, stable: usize) -> Self {
        SplittingSpec {
            unstable,
            center,
            stable,
        }
    }

    pub fn dim(&self) -> usize {
        self.unstable + self.center + self.stable
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.unstable, self.center, self.stable]
    }

    /// Partially hyperbolic predicates need three nonzero bundles.
    pub fn require_nonzero(&self) -> Result<()> {
        if self.unstable == 0 || self.center == 0 || self.stable == 0 {
            return Err(Error::InvalidInput(format!(
                "splitting ({}, {}, {}) must have three nonzero bundles",
                self.unstable, self.center, self.stable
            )));
        }
        Ok(())
    }

    /// Splitting seen by the inverse dynamics: unstable and stable exchange roles.
    pub fn swapped(&self) -> Self {
        SplittingSpec::new(self.stable, self.center, self.unstable)
    }
}

/// Deterministic index → symbol rule for scheduled cocycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleRule {
    /// Repeat the word forever.
    Periodic { word: Vec<usize> },
    /// Blocks of lengths 1, 1, 2, 2, 4, 4, … alternating symbols 0 and 1:
    /// block `k` has length `2^⌊k/2⌋` and symbol `k mod 2`.
    DoublingPairs,
}

impl ScheduleRule {
    pub fn symbol(&self, index: usize) -> usize {
        match self {
            ScheduleRule::Periodic { word } => word[index % word.len()],
            ScheduleRule::DoublingPairs => {
                // Pair p covers [2^{p+1} − 2, 2^{p+2} − 2).
                let p = (index + 2).ilog2() as usize - 1;
                let start = (1usize << (p + 1)) - 2;
                usize::from(index - start >= (1usize << p))
            }
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            ScheduleRule::Periodic { word } => Some(word.len()),
            ScheduleRule::DoublingPairs => None,
        }
    }

    fn max_symbol(&self) -> usize {
        match self {
            ScheduleRule::Periodic { word } => word.iter().copied().max().unwrap_or(0),
            ScheduleRule::DoublingPairs => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alphabet: Vec<(String, Matrix)>,
    pub rule: ScheduleRule,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Finite list; the horizon is its length.
    Explicit(Vec<Matrix>),
    /// Finite list repeated forever.
    Periodic(Vec<Matrix>),
    Constant(Matrix),
    Schedule(Schedule),
    /// Independent unstable, center and stable sub-cocycles (absent blocks have dimension 0).
    BlockDiagonal(Box<[Option<Cocycle>; 3]>),
}

/// A sequence of invertible matrices along an orbit, optionally split into
/// invariant coordinate blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    dim: usize,
    splitting: Option<SplittingSpec>,
    source: Source,
    horizon: Option<usize>,
    symplectic: bool,
}

fn validate_factor(m: &Matrix, dim: usize, what: &str) -> Result<()> {
    check_square(m, what)?;
    if m.nrows() != dim {
        return Err(Error::InvalidInput(format!(
            "{what}: dimension {} differs from cocycle dimension {dim}",
            m.nrows()
        )));
    }
    let smallest = linalg::conorm(m)?;
    if smallest <= MIN_SINGULAR {
        return Err(Error::InvalidInput(format!(
            "{what}: not invertible (smallest singular value {smallest:e})"
        )));
    }
    Ok(())
}

/// Off-diagonal mass of `m` relative to its Frobenius norm for the partition.
fn off_block_defect(m: &Matrix, partition: &[usize]) -> f64 {
    let mut off = 0.0;
    let mut row0 = 0;
    for &rb in partition {
        let mut col0 = 0;
        for &cb in partition {
            if row0 != col0 {
                off += m.view((row0, col0), (rb, cb)).norm_squared();
            }
            col0 += cb;
        }
        row0 += rb;
    }
    off.sqrt() / m.norm().max(f64::MIN_POSITIVE)
}

fn extract_blocks(m: &Matrix, partition: &[usize]) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(partition.len());
    let mut offset = 0;
    for &b in partition {
        out.push(m.view((offset, offset), (b, b)).into_owned());
        offset += b;
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Cocycle {
    pub fn constant(m: Matrix) -> Result<Self> {
        let dim = m.nrows();
        validate_factor(&m, dim, "constant factor")?;
        Ok(Cocycle {
            dim,
            splitting: None,
            source: Source::Constant(m),
            horizon: None,
            symplectic: false,
        })
    }

    pub fn explicit(factors: Vec<Matrix>) -> Result<Self> {
        let dim = Self::validate_list(&factors)?;
        Ok(Cocycle {
            dim,
            splitting: None,
            horizon: Some(factors.len()),
            source: Source::Explicit(factors),
            symplectic: false,
        })
    }

    pub fn periodic(factors: Vec<Matrix>) -> Result<Self> {
        let dim = Self::validate_list(&factors)?;
        Ok(Cocycle {
            dim,
            splitting: None,
            horizon: None,
            source: Source::Periodic(factors),
            symplectic: false,
        })
    }

    pub fn schedule(alphabet: Vec<(String, Matrix)>, rule: ScheduleRule) -> Result<Self> {
        let mats: Vec<Matrix> = alphabet.iter().map(|(_, m)| m.clone()).collect();
        let dim = Self::validate_list(&mats)?;
        if let ScheduleRule::Periodic { word } = &rule {
            if word.is_empty() {
                return Err(Error::InvalidInput("empty schedule word".into()));
            }
        }
        if rule.max_symbol() >= alphabet.len() {
            return Err(Error::InvalidInput(format!(
                "schedule refers to symbol {} but the alphabet has {} entries",
                rule.max_symbol(),
                alphabet.len()
            )));
        }
        Ok(Cocycle {
            dim,
            splitting: None,
            horizon: None,
            source: Source::Schedule(Schedule { alphabet, rule }),
            symplectic: false,
        })
    }

    /// Assemble unstable, center and stable sub-cocycles into one split cocycle.
    pub fn block_diagonal(
        unstable: Option<Cocycle>,
        center: Option<Cocycle>,
        stable: Option<Cocycle>,
    ) -> Result<Self> {
        let dims = [&unstable, &center, &stable].map(|c| c.as_ref().map_or(0, |c| c.dim));
        let dim: usize = dims.iter().sum();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "block-diagonal cocycle with no blocks".into(),
            ));
        }
        let horizon = [&unstable, &center, &stable]
            .iter()
            .filter_map(|c| c.as_ref().and_then(|c| c.horizon))
            .min();
        let symplectic = [&unstable, &center, &stable]
            .iter()
            .all(|c| c.as_ref().is_none_or(|c| c.symplectic));
        Ok(Cocycle {
            dim,
            splitting: Some(SplittingSpec::new(dims[0], dims[1], dims[2])),
            source: Source::BlockDiagonal(Box::new([unstable, center, stable])),
            horizon,
            symplectic,
        })
    }

    fn validate_list(factors: &[Matrix]) -> Result<usize> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidInput("empty factor list".into()))?;
        let dim = first.nrows();
        for (i, m) in factors.iter().enumerate() {
            validate_factor(m, dim, &format!("factor {i}"))?;
        }
        Ok(dim)
    }

    /// Attach a coordinate splitting; every stored factor must respect it.
    pub fn with_splitting(mut self, splitting: SplittingSpec) -> Result<Self> {
        if splitting.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "splitting sums to {} but the cocycle has dimension {}",
                splitting.dim(),
                self.dim
            )));
        }
        if let Source::BlockDiagonal(_) = self.source {
            if self.splitting != Some(splitting) {
                return Err(Error::InvalidInput(
                    "block-diagonal cocycle already fixes its splitting".into(),
                ));
            }
        }
        self.check_block_respecting(&splitting.dims())?;
        self.splitting = Some(splitting);
        Ok(self)
    }

    /// Restrict (or set) the finite horizon.
    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if let Some(h) = self.horizon {
            if horizon > h {
                return Err(Error::HorizonTooShort {
                    needed: horizon,
                    available: h,
                });
            }
        }
        self.horizon = Some(horizon);
        Ok(self)
    }

    pub fn with_symplectic(mut self, symplectic: bool) -> Self {
        self.symplectic = symplectic;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn splitting(&self) -> Option<SplittingSpec> {
        self.splitting
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn is_symplectic(&self) -> bool {
        self.symplectic
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Period of the factor sequence, when it has one.
    pub fn period(&self) -> Option<usize> {
        match &self.source {
            Source::Constant(_) => Some(1),
            Source::Periodic(v) => Some(v.len()),
            Source::Explicit(_) => None,
            Source::Schedule(s) => s.rule.period(),
            Source::BlockDiagonal(parts) => parts
                .iter()
                .flatten()
                .map(Cocycle::period)
                .try_fold(1usize, |acc, p| p.map(|p| acc / gcd(acc, p) * p)),
        }
    }

    fn stored_matrices(&self) -> Vec<&Matrix> {
        match &self.source {
            Source::Explicit(v) | Source::Periodic(v) => v.iter().collect(),
            Source::Constant(m) => vec![m],
            Source::Schedule(s) => s.alphabet.iter().map(|(_, m)| m).collect(),
            Source::BlockDiagonal(_) => Vec::new(),
        }
    }

    fn check_block_respecting(&self, partition: &[usize]) -> Result<()> {
        for (index, m) in self.stored_matrices().into_iter().enumerate() {
            let defect = off_block_defect(m, partition);
            if defect > BLOCK_TOL {
                return Err(Error::NotBlockRespecting { index, defect });
            }
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        match self.horizon {
            Some(h) if index >= h => Err(Error::OutOfHorizon {
                start: index,
                end: index + 1,
                horizon: h,
            }),
            _ => Ok(()),
        }
    }

    /// The factor `A_index`.
    pub fn factor(&self, index: usize) -> Result<Matrix> {
        self.check_index(index)?;
        Ok(match &self.source {
            Source::Explicit(v) => v[index].clone(),
            Source::Periodic(v) => v[index % v.len()].clone(),
            Source::Constant(m) => m.clone(),
            Source::Schedule(s) => s.alphabet[s.rule.symbol(index)].1.clone(),
            Source::BlockDiagonal(parts) => {
                let blocks: Vec<Matrix> = parts
                    .iter()
                    .flatten()
                    .map(|c| c.factor(index))
                    .collect::<Result<_>>()?;
                linalg::block_diagonal(&blocks.iter().collect::<Vec<_>>())
            }
        })
    }

    /// Schedule symbol names for the first `count` factors (schedules only).
    pub fn symbols(&self, count: usize) -> Option<Vec<String>> {
        match &self.source {
            Source::Schedule(s) => Some(
                (0..count)
                    .map(|i| s.alphabet[s.rule.symbol(i)].0.clone())
                    .collect(),
            ),
            Source::BlockDiagonal(parts) => parts.iter().flatten().find_map(|c| c.symbols(count)),
            _ => None,
        }
    }

    /// Diagonal blocks of `A_index` for a coordinate partition.
    pub fn factor_blocks(&self, index: usize, partition: &[usize]) -> Result<Vec<Matrix>> {
        if partition.iter().sum::<usize>() != self.dim {
            return Err(Error::InvalidInput(format!(
                "partition {partition:?} does not sum to dimension {}",
                self.dim
            )));
        }
        if let (Source::BlockDiagonal(parts), Some(split)) = (&self.source, self.splitting) {
            if partition == split.dims() {
                return parts
                    .iter()
                    .zip(split.dims())
                    .map(|(c, d)| match c {
                        Some(c) => c.factor(index),
                        None => {
                            self.check_index(index)?;
                            Ok(Matrix::zeros(d, d))
                        }
                    })
                    .collect();
            }
        }
        let m = self.factor(index)?;
        let defect = off_block_defect(&m, partition);
        if defect > BLOCK_TOL {
            return Err(Error::NotBlockRespecting { index, defect });
        }
        Ok(extract_blocks(&m, partition))
    }

    /// Start indices over which a universal quantifier on windows of length
    /// `len` is evaluated: one period for periodic cocycles, every admissible
    /// start for finite ones.
    pub fn quantifier_starts(&self, len: usize) -> Result<Vec<usize>> {
        if let Some(p) = self.period() {
            if let Some(h) = self.horizon {
                if h < p - 1 + len {
                    return Err(Error::HorizonTooShort {
                        needed: p - 1 + len,
                        available: h,
                    });
                }
            }
            return Ok((0..p).collect());
        }
        match self.horizon {
            Some(h) if h >= len => Ok((0..=h - len).collect()),
            Some(h) => Err(Error::HorizonTooShort {
                needed: len,
                available: h,
            }),
            None => Err(Error::NotPeriodic),
        }
    }

    /// The cocycle of the inverse dynamics, `A'_j = A_{−1−j}⁻¹` read along the
    /// backward orbit, with unstable and stable blocks exchanged.
    pub fn reversed_inverse(&self) -> Result<Cocycle> {
        let perm = self.splitting.map(|s| {
            let [u, c, st] = s.dims();
            // New coordinate order: stable, center, unstable.
            let mut order: Vec<usize> = (u + c..u + c + st).collect();
            order.extend(u..u + c);
            order.extend(0..u);
            order
        });
        let conj = |m: Matrix| -> Result<Matrix> {
            let inv = linalg::inverse(&m)?;
            Ok(match &perm {
                Some(order) => {
                    Matrix::from_fn(self.dim, self.dim, |i, j| inv[(order[i], order[j])])
                }
                None => inv,
            })
        };
        let mut out = if let Some(p) = self.period() {
            let list = (0..p)
                .map(|j| conj(self.factor(p - 1 - j)?))
                .collect::<Result<Vec<_>>>()?;
            Cocycle::periodic(list)?
        } else if let Some(h) = self.horizon {
            let list = (0..h)
                .map(|j| conj(self.factor(h - 1 - j)?))
                .collect::<Result<Vec<_>>>()?;
            Cocycle::explicit(list)?
        } else {
            return Err(Error::NotPeriodic);
        };
        if let Some(h) = self.horizon {
            out.horizon = Some(h);
        }
        out.symplectic = self.symplectic;
        if let Some(s) = self.splitting {
            out = out.with_splitting(s.swapped())?;
        }
        Ok(out)
    }

    fn check_window(&self, start: usize, len: usize) -> Result<()> {
        match self.horizon {
            Some(h) if start + len > h => Err(Error::OutOfHorizon {
                start,
                end: start + len,
                horizon: h,
            }),
            _ => Ok(()),
        }
    }

    /// Incremental accumulation of `A(start, n)` for `n = 0, 1, 2, …`.
    pub fn sweep(&self, start: usize, partition: &[usize]) -> Result<WindowSweep<'_>> {
        self.check_window(start, 0)?;
        if partition.iter().sum::<usize>() != self.dim {
            return Err(Error::InvalidInput(format!(
                "partition {partition:?} does not sum to dimension {}",
                self.dim
            )));
        }
        let partition: Vec<usize> = partition.to_vec();
        let forward = partition
            .iter()
            .map(|&d| ScaledMatrix::identity(d))
            .collect();
        let inverse = partition
            .iter()
            .map(|&d| ScaledMatrix::identity(d))
            .collect();
        Ok(WindowSweep {
            cocycle: self,
            start,
            len: 0,
            partition,
            forward,
            inverse,
        })
    }

    /// Default partition: the splitting blocks (zeros included) or the whole space.
    pub fn default_partition(&self) -> Vec<usize> {
        match self.splitting {
            Some(s) => s.dims().to_vec(),
            None => vec![self.dim],
        }
    }

    /// `A(j, n)` with per-block logs for the cocycle's splitting.
    pub fn window_product(&self, start: usize, len: usize) -> Result<WindowProduct> {
        self.check_window(start, len)?;
        let mut sweep = self.sweep(start, &self.default_partition())?;
        for _ in 0..len {
            sweep.advance()?;
        }
        sweep.snapshot()
    }
}

/// Log-norm and log-conorm of one diagonal block of a window product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockLogs {
    pub dim: usize,
    pub log_norm: f64,
    pub log_conorm: f64,
}

/// A window product `A(start, len)` stored blockwise with exact power-of-two
/// scale factors.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowProduct {
    pub start: usize,
    pub len: usize,
    pub partition: Vec<usize>,
    pub blocks: Vec<BlockLogs>,
    pub log_norm: f64,
    pub log_conorm: f64,
    /// `None` when some block log exceeds the overflow guard.
    pub value: Option<Matrix>,
    forward: Vec<ScaledMatrix>,
    inverse: Vec<ScaledMatrix>,
}

fn block_logs(forward: &ScaledMatrix, inverse: &ScaledMatrix) -> Result<BlockLogs> {
    let dim = forward.dim();
    if dim == 0 {
        return Ok(BlockLogs {
            dim,
            log_norm: 0.0,
            log_conorm: 0.0,
        });
    }
    Ok(BlockLogs {
        dim,
        log_norm: forward.log_norm()?,
        log_conorm: -inverse.log_norm()?,
    })
}

impl WindowProduct {
    fn assemble(
        start: usize,
        len: usize,
        partition: Vec<usize>,
        forward: Vec<ScaledMatrix>,
        inverse: Vec<ScaledMatrix>,
    ) -> Result<Self> {
        let blocks: Vec<BlockLogs> = forward
            .iter()
            .zip(&inverse)
            .map(|(f, i)| block_logs(f, i))
            .collect::<Result<_>>()?;
        let live = blocks.iter().filter(|b| b.dim > 0);
        let log_norm = live
            .clone()
            .map(|b| b.log_norm)
            .fold(f64::NEG_INFINITY, f64::max);
        let log_conorm = live.map(|b| b.log_conorm).fold(f64::INFINITY, f64::min);
        let overflow = blocks
            .iter()
            .any(|b| b.log_norm.abs() > OVERFLOW_LOG || b.log_conorm.abs() > OVERFLOW_LOG);
        let value = if overflow {
            None
        } else {
            forward
                .iter()
                .map(ScaledMatrix::value)
                .collect::<Option<Vec<_>>>()
                .map(|bs| linalg::block_diagonal(&bs.iter().collect::<Vec<_>>()))
        };
        Ok(WindowProduct {
            start,
            len,
            partition,
            blocks,
            log_norm,
            log_conorm,
            value,
            forward,
            inverse,
        })
    }

    pub fn overflow(&self) -> bool {
        self.value.is_none()
    }

    /// `later · earlier`, where `later` starts where `earlier` ends.
    pub fn compose(later: &WindowProduct, earlier: &WindowProduct) -> Result<WindowProduct> {
        if later.partition != earlier.partition || later.start != earlier.start + earlier.len {
            return Err(Error::InvalidInput("windows are not adjacent".into()));
        }
        let forward = later
            .forward
            .iter()
            .zip(&earlier.forward)
            .map(|(l, e)| ScaledMatrix::compose(l, e))
            .collect();
        let inverse = earlier
            .inverse
            .iter()
            .zip(&later.inverse)
            .map(|(e, l)| ScaledMatrix::compose(e, l))
            .collect();
        Self::assemble(
            earlier.start,
            earlier.len + later.len,
            later.partition.clone(),
            forward,
            inverse,
        )
    }
}

/// Incrementally extended window `A(start, len)`.
pub struct WindowSweep<'a> {
    cocycle: &'a Cocycle,
    start: usize,
    len: usize,
    partition: Vec<usize>,
    forward: Vec<ScaledMatrix>,
    inverse: Vec<ScaledMatrix>,
}

impl WindowSweep<'_> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Extend the window by one factor on the left.
    pub fn advance(&mut self) -> Result<()> {
        let index = self.start + self.len;
        let blocks = self.cocycle.factor_blocks(index, &self.partition)?;
        for ((f, inv), b) in self.forward.iter_mut().zip(&mut self.inverse).zip(&blocks) {
            if b.nrows() == 0 {
                continue;
            }
            let b_inv = linalg::inverse(b)?;
            f.left_mul(b);
            inv.right_mul(&b_inv);
        }
        self.len += 1;
        let out_of_range = |s: &ScaledMatrix| {
            let a = s.mantissa.amax();
            !(1e-150..=1e150).contains(&a)
        };
        if self.len.is_multiple_of(RENORMALIZE_EVERY)
            || self.forward.iter().chain(&self.inverse).any(out_of_range)
        {
            self.forward.iter_mut().for_each(ScaledMatrix::renormalize);
            self.inverse.iter_mut().for_each(ScaledMatrix::renormalize);
        }
        Ok(())
    }

    pub fn logs(&self) -> Result<Vec<BlockLogs>> {
        self.forward
            .iter()
            .zip(&self.inverse)
            .map(|(f, i)| block_logs(f, i))
            .collect()
    }

    pub fn snapshot(&self) -> Result<WindowProduct> {
        WindowProduct::assemble(
            self.start,
            self.len,
            self.partition.clone(),
            self.forward.clone(),
            self.inverse.clone(),
        )
    }
}

fn theta_split(c: &Cocycle) -> Result<SplittingSpec> {
    let s = c
        .splitting()
        .ok_or(Error::MissingSplitting("center/stable"))?;
    if s.center == 0 {
        return Err(Error::MissingSplitting("center"));
    }
    if s.stable == 0 {
        return Err(Error::MissingSplitting("stable"));
    }
    Ok(s)
}

/// `log Θ = −log‖P|E^s‖ + log m(P|E^c) − log‖P|E^c‖` from `[u, c, s]` block logs.
pub fn log_theta_from_blocks(blocks: &[BlockLogs]) -> f64 {
    let center = &blocks[1];
    let stable = &blocks[2];
    -stable.log_norm + center.log_conorm - center.log_norm
}

/// Bunching functional `log Θ(j, n)`.
pub fn theta(c: &Cocycle, start: usize, len: usize) -> Result<f64> {
    theta_split(c)?;
    Ok(log_theta_from_blocks(&c.window_product(start, len)?.blocks))
}

/// `log Θ(start, n)` for `n = 1..=max_len`, from a single sweep.
pub fn theta_series(c: &Cocycle, start: usize, max_len: usize) -> Result<Vec<f64>> {
    let s = theta_split(c)?;
    c.check_window(start, max_len)?;
    let mut sweep = c.sweep(start, &s.dims())?;
    let mut out = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        sweep.advance()?;
        out.push(log_theta_from_blocks(&sweep.logs()?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupermultiplicativityCheck {
    pub holds: bool,
    /// `log Θ(0, i_k) − Σ log Θ(i_{j−1}, i_j − i_{j−1})`.
    pub slack: f64,
}

/// Check `Θ(0, i_k) ≥ Θ(0, i_1)·Θ(i_1, i_2 − i_1)⋯` in log scale within 1e−8.
pub fn theta_supermultiplicativity_check(
    c: &Cocycle,
    partition: &[usize],
) -> Result<SupermultiplicativityCheck> {
    if partition.first() != Some(&0) || partition.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "partition must start at 0 and increase strictly".into(),
        ));
    }
    let last = *partition.last().expect("nonempty");
    let whole = theta(c, 0, last)?;
    let pieces: f64 = partition
        .windows(2)
        .map(|w| theta(c, w[0], w[1] - w[0]))
        .sum::<Result<f64>>()?;
    let slack = whole - pieces;
    Ok(SupermultiplicativityCheck {
        holds: slack >= -1e-8,
        slack,
    })
}
