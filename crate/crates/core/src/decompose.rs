//! Recovering an odeco decomposition from a dense tensor.
//!
//! The workhorse is the simultaneous normalized gradient map `G`, whose
//! attracting fixed points on an odeco tensor are exactly the essential
//! tuples and which converges to one of them from almost every start.
//! [`decompose_odeco`] runs it repeatedly with deflation. [`hosvd`] is the
//! matricization-based comparator, which can only identify singular subspaces
//! when values are tied.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::norm::max_mode_sin;
use crate::odeco::{OdecoTensor, SingularTuple};
use crate::tensor::{random_unit, DenseTensor, Rank1Point};

pub use crate::linalg::dense_svd;

/// Two converged tuples closer than this in every mode are the same tuple.
const DUPLICATE_SIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Deflation {
    /// Restrict later starting points to the orthogonal complement of the
    /// vectors already found, mode by mode.
    #[default]
    OrthogonalComplement,
    /// Subtract each accepted rank-one term from the working tensor.
    Subtract,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationConfig {
    /// Stop once the largest per-mode sine between successive iterates drops
    /// below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Random starts allowed per sought tuple.
    pub restarts: usize,
    pub deflation: Deflation,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1000,
            restarts: 50,
            deflation: Deflation::OrthogonalComplement,
        }
    }
}

impl IterationConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter(format!(
                "need tol > 0, max_iter >= 1, restarts >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// `G(x)`: every factor replaced by the normalized contraction of `t` with the
/// other factors of `x`.
pub fn gradient_step(t: &DenseTensor, x: &Rank1Point) -> Result<Rank1Point> {
    t.gradient_map(x).map(|(y, _)| y)
}

/// Outcome of [`find_tuple`]. The tuple's active set and signs are left empty
/// since a numerically found tuple carries no closed-form provenance.
#[derive(Clone, Debug)]
pub struct FoundTuple {
    pub tuple: SingularTuple,
    pub converged: bool,
    pub iterations: usize,
}

/// Iterates [`gradient_step`] from `init` until the per-mode change drops
/// below `cfg.tol` or `cfg.max_iter` steps have run. The limit is sign
/// normalized so that `<t, v^(1) ⊗ … ⊗ v^(p)> = λ ≥ 0`.
pub fn find_tuple(t: &DenseTensor, init: &Rank1Point, cfg: &IterationConfig) -> Result<FoundTuple> {
    cfg.check()?;
    if init.dims() != t.dims() {
        return Err(Error::DimensionMismatch(format!(
            "start point dims {:?} vs tensor dims {:?}",
            init.dims(),
            t.dims()
        )));
    }
    let mut x = init.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let y = gradient_step(t, &x)?;
        iterations += 1;
        let change = max_mode_sin(&x, &y);
        x = y;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    let value = t.rank1_value(&x)?;
    let mut vectors = x.into_factors();
    if value < 0.0 {
        vectors[0].iter_mut().for_each(|v| *v = -*v);
    }
    Ok(FoundTuple {
        tuple: SingularTuple {
            value: value.abs(),
            vectors,
            active_set: Vec::new(),
            signs: Vec::new(),
        },
        converged,
        iterations,
    })
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub odeco: OdecoTensor,
    /// Distinct tuples accepted, at most the requested count.
    pub found: usize,
    /// Attempts that failed to converge or hit a degenerate point.
    pub failed_attempts: usize,
    /// Converged attempts discarded as repeats of an accepted tuple.
    pub duplicates: usize,
}

impl Decomposition {
    pub fn is_partial(&self, requested: usize) -> bool {
        self.found < requested
    }
}

fn is_duplicate(found: &[SingularTuple], v: &[Vec<f64>]) -> bool {
    found.iter().any(|f| {
        f.vectors
            .iter()
            .zip(v)
            .all(|(a, b)| linalg::sin_angle(a, b).unwrap_or(1.0) < DUPLICATE_SIN)
    })
}

fn start_point<R: Rng + ?Sized>(
    dims: &[usize],
    found: &[SingularTuple],
    project: bool,
    rng: &mut R,
) -> Option<Rank1Point> {
    let mut factors = Vec::with_capacity(dims.len());
    for (q, &d) in dims.iter().enumerate() {
        let mut v = random_unit(d, rng);
        if project {
            let basis: Vec<Vec<f64>> = found.iter().map(|f| f.vectors[q].clone()).collect();
            linalg::project_out(&mut v, &basis);
            if linalg::normalize(&mut v) < 1e-8 {
                return None;
            }
        }
        factors.push(v);
    }
    Some(Rank1Point::normalized(factors).expect("unit factors"))
}

/// Sequentially extracts `r` tuples with random restarts and deflation.
///
/// Each sought tuple gets `cfg.restarts` attempts; failed and duplicate
/// attempts use up that budget. When it runs out the result is partial and
/// [`Decomposition::found`] says how many tuples were accepted. The output is
/// sorted by value (stable) and each factor matrix is passed through
/// Gram–Schmidt in that order.
pub fn decompose_odeco(
    t: &DenseTensor,
    r: usize,
    cfg: &IterationConfig,
    seed: u64,
) -> Result<Decomposition> {
    cfg.check()?;
    let d_min = *t.dims().iter().min().expect("order >= 2");
    if r > d_min {
        return Err(Error::InvalidParameter(format!(
            "r = {r} exceeds d_min = {d_min}"
        )));
    }
    let mut rng = crate::rng_from_seed(seed);
    let project = cfg.deflation == Deflation::OrthogonalComplement;
    let mut work = t.clone();
    let mut found: Vec<SingularTuple> = Vec::with_capacity(r);
    let (mut failed_attempts, mut duplicates) = (0, 0);

    'slots: for _ in 0..r {
        for _ in 0..cfg.restarts {
            let Some(init) = start_point(t.dims(), &found, project, &mut rng) else {
                failed_attempts += 1;
                continue;
            };
            let attempt = match find_tuple(&work, &init, cfg) {
                Ok(a) if a.converged => a,
                _ => {
                    failed_attempts += 1;
                    continue;
                }
            };
            if is_duplicate(&found, &attempt.tuple.vectors) {
                duplicates += 1;
                continue;
            }
            if !project {
                work.add_rank_one(-attempt.tuple.value, &attempt.tuple.vectors)?;
            }
            found.push(attempt.tuple);
            continue 'slots;
        }
        break;
    }

    Ok(Decomposition {
        found: found.len(),
        odeco: assemble(t.dims(), found)?,
        failed_attempts,
        duplicates,
    })
}

/// Sorts tuples by value (stable), orthonormalizes each mode's columns in that
/// order and pads to `d_min`.
fn assemble(dims: &[usize], mut tuples: Vec<SingularTuple>) -> Result<OdecoTensor> {
    tuples.sort_by(|a, b| b.value.total_cmp(&a.value));
    let lambdas: Vec<f64> = tuples.iter().map(|t| t.value).collect();
    let factors = (0..dims.len())
        .map(|q| {
            if tuples.is_empty() {
                return Ok(Matrix::zeros(dims[q], 0));
            }
            let cols: Vec<Vec<f64>> = tuples.iter().map(|t| t.vectors[q].clone()).collect();
            Ok(linalg::gram_schmidt(&Matrix::from_columns(&cols)?))
        })
        .collect::<Result<Vec<_>>>()?;
    OdecoTensor::new(lambdas, factors)
}

/// Re-runs [`find_tuple`] on `t` from each of the first `r` components of
/// `start`, then reassembles. Used to polish a deflation result against the
/// original (undeflated) tensor. Components whose refinement fails to
/// converge keep their starting vectors.
pub fn refine_odeco(
    t: &DenseTensor,
    start: &OdecoTensor,
    r: usize,
    cfg: &IterationConfig,
) -> Result<OdecoTensor> {
    let r = r.min(start.d_min());
    let mut tuples = Vec::with_capacity(r);
    for k in 0..r {
        let init = start.component_point(k);
        let tuple = match find_tuple(t, &init, cfg) {
            Ok(a) if a.converged => a.tuple,
            _ => SingularTuple {
                value: start.lambdas()[k],
                vectors: start.component(k),
                active_set: Vec::new(),
                signs: Vec::new(),
            },
        };
        tuples.push(tuple);
    }
    assemble(t.dims(), tuples)
}

/// Higher-order SVD: the factor of mode `q` holds the leading left singular
/// vectors of `Mat_q(t)` and the values are the mode-1 singular values. Each
/// first-mode vector is flipped so that `<t, u_k^(1) ⊗ … ⊗ u_k^(p)> ≥ 0`.
///
/// Within a block of tied singular values the basis returned is arbitrary, so
/// individual vectors are recovered only when values are distinct.
pub fn hosvd(t: &DenseTensor) -> Result<OdecoTensor> {
    let d_min = *t.dims().iter().min().expect("order >= 2");
    let keep: Vec<usize> = (0..d_min).collect();
    let mut lambdas = Vec::new();
    let mut factors = Vec::with_capacity(t.order());
    for q in 0..t.order() {
        let svd = dense_svd(&t.matricize(q)?);
        if q == 0 {
            lambdas = svd.sigma[..d_min].to_vec();
        }
        factors.push(svd.u.select_columns(&keep));
    }
    for k in 0..d_min {
        let comp: Vec<Vec<f64>> = factors.iter().map(|f| f.column(k)).collect();
        if t.inner_rank_one(&comp)? < 0.0 {
            let flipped: Vec<f64> = comp[0].iter().map(|v| -v).collect();
            factors[0].set_column(k, &flipped);
        }
    }
    OdecoTensor::new(lambdas, factors)
}

/// Largest principal-angle sine between the column spans of two matrices
/// with orthonormal columns and equal column count.
pub fn subspace_sin(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch("subspace shapes differ".into()));
    }
    // The residual (I − AAᵀ)B has the principal-angle sines as its singular
    // values; going through cosines would lose half the digits.
    let resid = b.sub(&a.matmul(&a.transpose().matmul(b)?)?)?;
    Ok(resid.spectral_norm().min(1.0))
}
