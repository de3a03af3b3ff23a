//! The odeco tensor type and its singular tuples.
//!
//! An [`OdecoTensor`] stores `λ_1 ≥ … ≥ λ_{d_min} ≥ 0` and one factor matrix
//! per mode with orthonormal columns. Components with `λ_k = 0` keep an
//! arbitrary orthonormal completion; their vectors are not identifiable.
//!
//! Besides the essential tuples `(λ_k; u_k^(1), …, u_k^(p))`, every nonempty
//! subset `S` of positive components combined with a sign pattern yields a
//! further (nonessential) singular tuple in closed form, see
//! [`enumerate_tuples`].

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::tensor::{parse_finite, parse_usizes, DenseTensor, Rank1Point};

/// Orthonormality tolerance accepted by the canonical constructor.
const ORTHO_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OdecoTensor {
    dims: Vec<usize>,
    lambdas: Vec<f64>,
    factors: Vec<Matrix>,
}

fn check_shapes(lambdas: &[f64], factors: &[Matrix]) -> Result<Vec<usize>> {
    if factors.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "order must be at least 2, got {}",
            factors.len()
        )));
    }
    let r = lambdas.len();
    let dims: Vec<usize> = factors.iter().map(Matrix::rows).collect();
    let d_min = *dims.iter().min().expect("nonempty");
    if r > d_min {
        return Err(Error::InvalidParameter(format!(
            "{r} components exceed d_min = {d_min}"
        )));
    }
    for (q, f) in factors.iter().enumerate() {
        if f.cols() != r {
            return Err(Error::DimensionMismatch(format!(
                "factor {q} has {} columns for {r} values",
                f.cols()
            )));
        }
        if let Some(pos) = f.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
    }
    if let Some(pos) = lambdas.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    Ok(dims)
}

impl OdecoTensor {
    /// Canonical constructor. Negative values are made nonnegative by flipping
    /// the first-mode vector, components are sorted by value (stable, so ties
    /// keep their input order), and fewer than `d_min` components are padded
    /// with zero values and orthonormal completion columns.
    pub fn new(lambdas: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        let dims = check_shapes(&lambdas, &factors)?;
        for (q, f) in factors.iter().enumerate() {
            let defect = f.orthonormality_defect();
            if defect > ORTHO_TOL {
                return Err(Error::InvalidParameter(format!(
                    "factor {q} is not orthonormal (defect {defect:e})"
                )));
            }
        }
        let d_min = *dims.iter().min().expect("nonempty");
        let r = lambdas.len();

        let mut cols: Vec<Vec<Vec<f64>>> = factors.iter().map(Matrix::columns).collect();
        let mut lambdas = lambdas;
        for k in 0..r {
            if lambdas[k] < 0.0 {
                lambdas[k] = -lambdas[k];
                cols[0][k].iter_mut().for_each(|x| *x = -*x);
            }
        }
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));

        let mut sorted_lambdas: Vec<f64> = order.iter().map(|&k| lambdas[k]).collect();
        sorted_lambdas.resize(d_min, 0.0);
        let factors = cols
            .into_iter()
            .zip(&dims)
            .map(|(c, &d)| {
                let mut basis: Vec<Vec<f64>> = order.iter().map(|&k| c[k].clone()).collect();
                linalg::complete_basis(&mut basis, d, d_min);
                Matrix::from_columns(&basis).expect("equal lengths")
            })
            .collect();
        Ok(Self {
            dims,
            lambdas: sorted_lambdas,
            factors,
        })
    }

    /// Stores the parts as given: no sign flips, sorting, padding or
    /// orthonormality check. Use [`validate`](Self::validate) to inspect.
    pub fn new_unchecked(lambdas: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        let dims = check_shapes(&lambdas, &factors)?;
        Ok(Self {
            dims,
            lambdas,
            factors,
        })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d_min(&self) -> usize {
        *self.dims.iter().min().expect("nonempty")
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Number of strictly positive values.
    pub fn rank(&self) -> usize {
        self.lambdas.iter().filter(|l| **l > 0.0).count()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, q: usize) -> &Matrix {
        &self.factors[q]
    }

    pub fn vector(&self, q: usize, k: usize) -> Vec<f64> {
        self.factors[q].column(k)
    }

    /// `(u_k^(1), …, u_k^(p))`
    pub fn component(&self, k: usize) -> Vec<Vec<f64>> {
        self.factors.iter().map(|f| f.column(k)).collect()
    }

    pub fn component_point(&self, k: usize) -> Rank1Point {
        Rank1Point::normalized(self.component(k)).expect("orthonormal columns are nonzero")
    }

    pub fn validate(&self) -> Diagnostics {
        let orthonormality = self
            .factors
            .iter()
            .map(Matrix::orthonormality_defect)
            .collect();
        let ordering = self
            .lambdas
            .windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .fold(0.0, f64::max);
        let negativity = self
            .lambdas
            .iter()
            .map(|l| (-l).max(0.0))
            .fold(0.0, f64::max);
        Diagnostics {
            orthonormality,
            ordering,
            negativity,
        }
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(&self.dims).expect("valid dims");
        for (k, &lam) in self.lambdas.iter().enumerate() {
            if lam != 0.0 {
                t.add_rank_one(lam, &self.component(k))
                    .expect("shapes checked at construction");
            }
        }
        t
    }

    pub fn to_text(&self) -> String {
        write_factor_text(&self.dims, &self.lambdas, &self.factors)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (lambdas, factors) = read_factor_text(text)?;
        Self::new(lambdas, factors)
    }
}

/// Violations found by [`OdecoTensor::validate`]; all zero for an exact
/// odeco tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// `max |UᵀU − I|` per mode.
    pub orthonormality: Vec<f64>,
    /// Largest increase `λ_{k+1} − λ_k` (0 when sorted).
    pub ordering: f64,
    /// Largest `−λ_k` (0 when all nonnegative).
    pub negativity: f64,
}

impl Diagnostics {
    pub fn max_orthonormality(&self) -> f64 {
        self.orthonormality.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_orthonormality() <= tol && self.ordering == 0.0 && self.negativity == 0.0
    }
}

/// Random odeco tensor: each factor is the Gram–Schmidt orthonormalization of
/// a standard-normal `d_q × d_min` matrix, and values beyond the `r` supplied
/// ones are zero.
pub fn random_odeco(dims: &[usize], lambdas: &[f64], seed: u64) -> Result<OdecoTensor> {
    let mut rng = crate::rng_from_seed(seed);
    random_odeco_with(dims, lambdas, &mut rng)
}

pub fn random_odeco_with<R: Rng + ?Sized>(
    dims: &[usize],
    lambdas: &[f64],
    rng: &mut R,
) -> Result<OdecoTensor> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("bad dims {dims:?}")));
    }
    let d_min = *dims.iter().min().expect("nonempty");
    if lambdas.len() > d_min {
        return Err(Error::InvalidParameter(format!(
            "r = {} exceeds d_min = {d_min}",
            lambdas.len()
        )));
    }
    let factors = dims
        .iter()
        .map(|&d| random_orthonormal(d, d_min, rng))
        .collect();
    let mut l = lambdas.to_vec();
    l.resize(d_min, 0.0);
    OdecoTensor::new(l, factors)
}

/// `d × r` matrix with orthonormal columns drawn from a Gaussian matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> Matrix {
    let data = (0..d * r).map(|_| rng.sample(StandardNormal)).collect();
    linalg::gram_schmidt(&Matrix::from_row_major(d, r, data).expect("sized"))
}

/// One solution `(λ; v^(1), …, v^(p))` of `T ×_{s≠q} v^(s) = λ v^(q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularTuple {
    pub value: f64,
    pub vectors: Vec<Vec<f64>>,
    /// Indices of the components combined (empty for zero tuples).
    pub active_set: Vec<usize>,
    /// `signs[i][q]` is the mode-`q` sign of component `active_set[i]`; the
    /// product over all modes is `+1`.
    pub signs: Vec<Vec<i8>>,
}

impl SingularTuple {
    pub fn point(&self) -> Result<Rank1Point> {
        Rank1Point::new(self.vectors.clone())
    }

    /// `max_q |T ×_{s≠q} v^(s) − λ v^(q)|`
    pub fn residual(&self, t: &DenseTensor) -> Result<f64> {
        singular_residual(t, self.value, &self.vectors)
    }
}

pub fn singular_residual(t: &DenseTensor, value: f64, vectors: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in 0..t.order() {
        let mut c = t.contract_except(q, vectors)?;
        linalg::axpy(-value, &vectors[q], &mut c);
        worst = worst.max(linalg::norm(&c));
    }
    Ok(worst)
}

/// Closed-form singular tuple supported on the components in `active`
/// (0-based, distinct, all with positive value).
///
/// `signs[i]` belongs to `active[i]`. It either lists `p − 1` signs for modes
/// `2..=p`, in which case the first-mode sign is derived so the product over
/// all modes is `+1`, or all `p` signs, which must then multiply to `+1`.
///
/// The value is `(Σ_{k∈S} λ_k^{−2/(p−2)})^{−(p−2)/2}` and the mode-`q` vector
/// is `Σ_{k∈S} χ_k^(q) (λ/λ_k)^{1/(p−2)} u_k^(q)`.
pub fn enumerate_tuples(
    t: &OdecoTensor,
    active: &[usize],
    signs: &[Vec<i8>],
) -> Result<SingularTuple> {
    let p = t.order();
    if p < 3 {
        return Err(Error::InvalidParameter(
            "nonessential tuples need order at least 3".into(),
        ));
    }
    if active.is_empty() {
        return Err(Error::InvalidParameter("active set is empty".into()));
    }
    if signs.len() != active.len() {
        return Err(Error::MalformedSigns(format!(
            "{} sign vectors for {} active components",
            signs.len(),
            active.len()
        )));
    }
    let mut seen = vec![false; t.d_min()];
    for &k in active {
        if k >= t.d_min() {
            return Err(Error::InvalidParameter(format!(
                "component {k} out of range"
            )));
        }
        if seen[k] {
            return Err(Error::InvalidParameter(format!("component {k} repeated")));
        }
        seen[k] = true;
        if !(t.lambdas()[k] > 0.0) {
            return Err(Error::ZeroSingularValue(k));
        }
    }
    let mut full_signs = Vec::with_capacity(active.len());
    for s in signs {
        if s.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::MalformedSigns(format!("entries must be ±1: {s:?}")));
        }
        let full = match s.len() {
            n if n == p - 1 => {
                let first: i8 = s.iter().product();
                std::iter::once(first).chain(s.iter().copied()).collect()
            }
            n if n == p => {
                if s.iter().product::<i8>() != 1 {
                    return Err(Error::MalformedSigns(format!(
                        "mode signs {s:?} do not multiply to +1"
                    )));
                }
                s.clone()
            }
            n => {
                return Err(Error::MalformedSigns(format!(
                    "{n} signs for an order-{p} tensor"
                )))
            }
        };
        full_signs.push(full);
    }

    let e = 2.0 / (p as f64 - 2.0);
    let sum: f64 = active.iter().map(|&k| t.lambdas()[k].powf(-e)).sum();
    let value = sum.powf(-1.0 / e);
    let mut vectors: Vec<Vec<f64>> = t.dims().iter().map(|&d| vec![0.0; d]).collect();
    for (&k, chi) in active.iter().zip(&full_signs) {
        let w = (value / t.lambdas()[k]).powf(1.0 / (p as f64 - 2.0));
        for q in 0..p {
            linalg::axpy(f64::from(chi[q]) * w, &t.vector(q, k), &mut vectors[q]);
        }
    }
    // Unit length holds analytically; renormalize away rounding.
    for v in &mut vectors {
        linalg::normalize(v);
    }
    Ok(SingularTuple {
        value,
        vectors,
        active_set: active.to_vec(),
        signs: full_signs,
    })
}

/// Every tuple supported on `active`: all `2^{(p−1)|S|}` free sign patterns.
pub fn all_tuples_on(t: &OdecoTensor, active: &[usize]) -> Result<Vec<SingularTuple>> {
    let p = t.order();
    let free = (p - 1) * active.len();
    if free >= 24 {
        return Err(Error::InvalidParameter("too many sign patterns".into()));
    }
    (0..1u32 << free)
        .map(|mask| {
            let signs: Vec<Vec<i8>> = (0..active.len())
                .map(|i| {
                    (0..p - 1)
                        .map(|j| {
                            if mask >> (i * (p - 1) + j) & 1 == 1 {
                                -1
                            } else {
                                1
                            }
                        })
                        .collect()
                })
                .collect();
            enumerate_tuples(t, active, &signs)
        })
        .collect()
}

/// Whether `x` is a zero-value singular tuple: for every component at least
/// two modes have `|<v^(q), u_k^(q)>| ≤ 1e-10`. For rectangular tensors with
/// padded components this is relative to the stored completion.
pub fn zero_tuple_check(t: &OdecoTensor, x: &Rank1Point) -> bool {
    if x.dims() != t.dims() {
        return false;
    }
    (0..t.d_min()).all(|k| {
        (0..t.order())
            .filter(|&q| linalg::dot(&x.factors()[q], &t.vector(q, k)).abs() <= 1e-10)
            .count()
            >= 2
    })
}

pub(crate) fn write_factor_text(dims: &[usize], weights: &[f64], factors: &[Matrix]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}", dims.len());
    for d in dims {
        let _ = write!(s, " {d}");
    }
    let _ = writeln!(s, " {}", weights.len());
    let w: Vec<String> = weights.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(s, "{}", w.join(" "));
    for f in factors {
        for i in 0..f.rows() {
            let row: Vec<String> = f.row(i).iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s
}

/// Parses `p d_1 … d_p r`, then `r` weights, then `p` row-major `d_q × r`
/// blocks (any whitespace layout after the header line).
pub(crate) fn read_factor_text(text: &str) -> Result<(Vec<f64>, Vec<Matrix>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let nums = parse_usizes(header, ln)?;
    if nums.len() < 2 || nums.len() != nums[0] + 2 {
        return Err(Error::Parse {
            line: ln,
            msg: "header must be `p d_1 … d_p r`".into(),
        });
    }
    let p = nums[0];
    let dims = &nums[1..=p];
    let r = nums[p + 1];
    if p < 2 || dims.contains(&0) {
        return Err(Error::Parse {
            line: ln,
            msg: format!("bad order or dims {dims:?}"),
        });
    }
    let mut tokens = lines.flat_map(|(ln, l)| l.split_whitespace().map(move |t| (ln, t)));
    let mut next = |what: &str| -> Result<f64> {
        let (ln, tok) = tokens.next().ok_or(Error::Parse {
            line: ln,
            msg: format!("unexpected end of input reading {what}"),
        })?;
        parse_finite(tok, ln)
    };
    let weights = (0..r)
        .map(|_| next("weights"))
        .collect::<Result<Vec<_>>>()?;
    let mut factors = Vec::with_capacity(p);
    for &d in dims {
        let data = (0..d * r)
            .map(|_| next("factor"))
            .collect::<Result<Vec<_>>>()?;
        factors.push(Matrix::from_row_major(d, r, data)?);
    }
    if let Some((ln, tok)) = tokens.next() {
        return Err(Error::Parse {
            line: ln,
            msg: format!("trailing token {tok:?}"),
        });
    }
    Ok((weights, factors))
}
