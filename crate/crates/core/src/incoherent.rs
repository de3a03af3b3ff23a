//! Near-orthogonal CP tensors and their odeco projections.
//!
//! A CP tensor `X = Σ_k η_k a_k^(1) ⊗ … ⊗ a_k^(p)` with unit but not
//! necessarily orthogonal columns is measured by its isometry defect `δ`, the
//! largest deviation of any factor matrix's singular values from 1. Replacing
//! every factor by its polar factor gives an odeco tensor within
//! `(p + 1)δη₁` of `X`, which lets the odeco perturbation bounds transfer to
//! CP components.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, dense_svd, Matrix};
use crate::norm::{spectral_norm, NormConfig};
use crate::odeco::{random_orthonormal, read_factor_text, write_factor_text, OdecoTensor};
use crate::perturb::{match_tuples, Matching, GENERAL_CONSTANT};
use crate::tensor::{random_unit, DenseTensor};

const UNIT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct IncoherentCP {
    dims: Vec<usize>,
    etas: Vec<f64>,
    factors: Vec<Matrix>,
}

impl IncoherentCP {
    /// Requires positive weights and unit columns. Components are sorted by
    /// weight (stable, columns move with their weight).
    pub fn new(etas: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::InvalidParameter("order must be at least 2".into()));
        }
        let r = etas.len();
        if r == 0 {
            return Err(Error::InvalidParameter("no components".into()));
        }
        if let Some(bad) = etas.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight {bad} is not positive"
            )));
        }
        for (q, f) in factors.iter().enumerate() {
            if f.cols() != r {
                return Err(Error::DimensionMismatch(format!(
                    "factor {q} has {} columns for {r} weights",
                    f.cols()
                )));
            }
            if f.cols() > f.rows() {
                return Err(Error::InvalidParameter(format!(
                    "factor {q} has more columns than rows"
                )));
            }
            for c in f.columns() {
                let n = linalg::norm(&c);
                if (n - 1.0).abs() > UNIT_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "factor {q} has a column of norm {n}"
                    )));
                }
            }
        }
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| etas[b].total_cmp(&etas[a]));
        Ok(Self {
            dims: factors.iter().map(Matrix::rows).collect(),
            etas: order.iter().map(|&k| etas[k]).collect(),
            factors: factors.iter().map(|f| f.select_columns(&order)).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn rank(&self) -> usize {
        self.etas.len()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// Isometry defect, recomputed from the singular values every time.
    pub fn delta(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| isometry_delta(f).expect("shape checked at construction"))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(&self.dims).expect("valid dims");
        for k in 0..self.rank() {
            let comp: Vec<Vec<f64>> = self.factors.iter().map(|f| f.column(k)).collect();
            t.add_rank_one(self.etas[k], &comp).expect("shapes checked");
        }
        t
    }

    /// Same layout as the odeco format, with the weights `η` in place of the
    /// singular values.
    pub fn to_text(&self) -> String {
        write_factor_text(&self.dims, &self.etas, &self.factors)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (etas, factors) = read_factor_text(text)?;
        Self::new(etas, factors)
    }
}

/// `max(|σ_max − 1|, |1 − σ_min|)` over the singular values of `a`.
pub fn isometry_delta(a: &Matrix) -> Result<f64> {
    if a.cols() > a.rows() {
        return Err(Error::InvalidParameter(format!(
            "{} columns exceed dimension {}",
            a.cols(),
            a.rows()
        )));
    }
    let sigma = dense_svd(a).sigma;
    Ok(sigma.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max))
}

/// Orthonormal factor of the polar decomposition `A = U P`, i.e. the
/// orthonormal matrix nearest to `A`. Computed as `U = W Vᵀ` from the thin
/// SVD `A = W Σ Vᵀ`.
pub fn polar_factor(a: &Matrix) -> Result<Matrix> {
    if a.cols() > a.rows() {
        return Err(Error::InvalidParameter(
            "polar factor needs cols <= rows".into(),
        ));
    }
    let svd = dense_svd(a);
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    let bottom = svd.sigma.last().copied().unwrap_or(0.0);
    if !(bottom > 1e-12 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient(bottom));
    }
    svd.u.matmul(&svd.v.transpose())
}

/// Replaces each factor by its polar factor, keeping `η` as the singular
/// values (stable re-sort, padding to `d_min`).
pub fn odeco_projection(x: &IncoherentCP) -> Result<OdecoTensor> {
    let factors = x
        .factors
        .iter()
        .map(polar_factor)
        .collect::<Result<Vec<_>>>()?;
    OdecoTensor::new(x.etas.clone(), factors)
}

/// Columns drawn independently and uniformly from the unit sphere.
pub fn random_uniform_cp<R: Rng + ?Sized>(
    dims: &[usize],
    etas: &[f64],
    rng: &mut R,
) -> Result<IncoherentCP> {
    let factors = dims
        .iter()
        .map(|&d| {
            let cols: Vec<Vec<f64>> = etas.iter().map(|_| random_unit(d, rng)).collect();
            Matrix::from_columns(&cols)
        })
        .collect::<Result<Vec<_>>>()?;
    IncoherentCP::new(etas.to_vec(), factors)
}

/// Orthonormal columns perturbed by independent Gaussian vectors of scale
/// `spread` and renormalized, so `δ` grows roughly linearly with `spread`.
pub fn random_near_orthogonal_cp<R: Rng + ?Sized>(
    dims: &[usize],
    etas: &[f64],
    spread: f64,
    rng: &mut R,
) -> Result<IncoherentCP> {
    let r = etas.len();
    let factors = dims
        .iter()
        .map(|&d| {
            let base = random_orthonormal(d, r, rng);
            let cols: Vec<Vec<f64>> = (0..r)
                .map(|k| {
                    let mut c = base.column(k);
                    let noise: Vec<f64> = (0..d)
                        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    linalg::axpy(spread / (d as f64).sqrt(), &noise, &mut c);
                    linalg::normalize(&mut c);
                    c
                })
                .collect();
            Matrix::from_columns(&cols)
        })
        .collect::<Result<Vec<_>>>()?;
    IncoherentCP::new(etas.to_vec(), factors)
}

/// The quantities bounded by the projection theorem for one CP tensor.
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    pub delta: f64,
    /// Spectral-norm estimate of `‖T − X‖` (a lower bound on the true value).
    pub distance: f64,
    /// `‖T − X‖_F`, a certified upper bound on the spectral distance.
    pub distance_frobenius: f64,
    /// `(p + 1) δ η₁`
    pub distance_bound: f64,
    /// `max_{k,q} sin∠(a_k^(q), u_k^(q))`
    pub max_column_sin: f64,
    /// `δ/√2`, the bound as stated.
    pub angle_bound: f64,
    /// `δ √(1 − δ²/4)`, what `‖a_k − u_k‖ ≤ δ` yields for unit vectors.
    pub angle_bound_corrected: f64,
}

impl ProjectionReport {
    pub fn distance_ok(&self) -> bool {
        self.distance <= self.distance_bound + 1e-6
    }

    pub fn angle_ok(&self) -> bool {
        self.max_column_sin <= self.angle_bound + 1e-9
    }

    pub fn corrected_angle_ok(&self) -> bool {
        self.max_column_sin <= self.angle_bound_corrected + 1e-9
    }
}

pub fn projection_report(
    x: &IncoherentCP,
    norm: &NormConfig,
    seed: u64,
) -> Result<ProjectionReport> {
    let delta = x.delta();
    let t = odeco_projection(x)?;
    let diff = t.to_dense().sub(&x.to_dense())?;
    let distance = spectral_norm(&diff, norm, seed)?.value;
    let mut max_column_sin: f64 = 0.0;
    for (q, f) in x.factors.iter().enumerate() {
        for k in 0..x.rank() {
            let s = linalg::sin_angle(&f.column(k), &t.vector(q, k)).unwrap_or(1.0);
            max_column_sin = max_column_sin.max(s);
        }
    }
    Ok(ProjectionReport {
        delta,
        distance,
        distance_frobenius: diff.frobenius_norm(),
        distance_bound: (x.order() as f64 + 1.0) * delta * x.etas[0],
        max_column_sin,
        angle_bound: delta / 2f64.sqrt(),
        angle_bound_corrected: delta * (1.0 - delta * delta / 4.0).max(0.0).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncoherentRow {
    pub k: usize,
    pub eta: f64,
    /// Matched weight of the second tensor (0 past its rank).
    pub eta_tilde: f64,
    pub gap: f64,
    /// `max_q sin∠(a_k^(q), ã_{π(k)}^(q))`, using the projection's
    /// completion vector when `π(k)` is past the second tensor's rank.
    pub max_sin: f64,
    /// `C[(p+1)δ(η₁+η̃₁) + ‖X − X̃‖]`
    pub value_bound: f64,
    /// `C{(p+1)δ(η₁+η̃₁) + ‖X − X̃‖ + δ}/η_k`
    pub angle_bound: f64,
    /// `gap` over the value bound without `C`.
    pub value_ratio: f64,
    /// `max_sin` over the angle bound without `C`.
    pub angle_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct IncoherentReport {
    /// Larger of the two isometry defects.
    pub delta: f64,
    /// Spectral-norm estimate of `‖X − X̃‖`.
    pub cp_distance: f64,
    pub matching: Matching,
    pub rows: Vec<IncoherentRow>,
}

impl IncoherentReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Robust perturbation check for two CP tensors: both are projected, the
/// projections are matched with [`match_tuples`], and for each component of
/// `x` the weight gap and the largest CP-column sine are compared with the
/// bounds at `C = 17`. Raw ratios (bound without `C`) are reported as well.
pub fn verify_incoherent(
    x: &IncoherentCP,
    y: &IncoherentCP,
    norm: &NormConfig,
    seed: u64,
) -> Result<IncoherentReport> {
    if x.dims() != y.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            x.dims(),
            y.dims()
        )));
    }
    let delta = x.delta().max(y.delta());
    let tx = odeco_projection(x)?;
    let ty = odeco_projection(y)?;
    let matching = match_tuples(&tx, &ty)?;
    let diff = y.to_dense().sub(&x.to_dense())?;
    let cp_distance = spectral_norm(&diff, norm, seed)?.value;
    let p = x.order() as f64;
    let core = (p + 1.0) * delta * (x.etas[0] + y.etas[0]) + cp_distance;
    let mut rows = Vec::with_capacity(x.rank());
    for k in 0..x.rank() {
        let j = matching.pi[k];
        let eta_tilde = y.etas.get(j).copied().unwrap_or(0.0);
        let gap = (x.etas[k] - eta_tilde).abs();
        let max_sin = (0..x.order())
            .map(|q| {
                let other = if j < y.rank() {
                    y.factors[q].column(j)
                } else {
                    ty.vector(q, j)
                };
                linalg::sin_angle(&x.factors[q].column(k), &other).unwrap_or(1.0)
            })
            .fold(0.0, f64::max);
        let angle_core = (core + delta) / x.etas[k];
        let value_bound = GENERAL_CONSTANT * core;
        let angle_bound = GENERAL_CONSTANT * angle_core;
        rows.push(IncoherentRow {
            k,
            eta: x.etas[k],
            eta_tilde,
            gap,
            max_sin,
            value_bound,
            angle_bound,
            value_ratio: gap / core,
            angle_ratio: max_sin / angle_core,
            pass: gap <= value_bound + 1e-8 && max_sin <= angle_bound + 1e-8,
        });
    }
    Ok(IncoherentReport {
        delta,
        cp_distance,
        matching,
        rows,
    })
}
