//! Dense order-p tensors and the multilinear primitives built on them.
//!
//! Storage is row-major with the last index varying fastest. The mode-`q`
//! matricization keeps mode `q` as rows; its columns enumerate the remaining
//! modes lexicographically in ascending mode order (again last index fastest).
//! With that convention, for an odeco tensor
//! `Mat_q(T) = U_q diag(lambda) V_qᵀ` where `V_q` is the Khatri–Rao product of
//! the other factor matrices taken in ascending mode order (see [`khatri_rao`]).

use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            values: vec![0.0; dims.iter().product()],
        })
    }

    pub fn from_values(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {dims:?} ({n} expected)",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self {
            dims: dims.to_vec(),
            values,
        })
    }

    /// Fills entries from a function of the multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0; dims.len()];
        for v in t.values.iter_mut() {
            *v = f(&idx);
            increment(&mut idx, dims);
        }
        Ok(t)
    }

    /// `weight * a_1 ⊗ … ⊗ a_p`
    pub fn rank_one(weight: f64, factors: &[Vec<f64>]) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(Vec::len).collect();
        let mut t = Self::zeros(&dims)?;
        t.add_rank_one(weight, factors)?;
        Ok(t)
    }

    /// Standard-normal entries.
    pub fn random_normal<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let n = dims.iter().product();
        let values = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        Self::from_values(dims, values)
    }

    /// In-place `self += weight * a_1 ⊗ … ⊗ a_p`.
    pub fn add_rank_one(&mut self, weight: f64, factors: &[Vec<f64>]) -> Result<()> {
        self.check_factor_dims(factors)?;
        // Build the outer product incrementally: start from the first factor and
        // expand by one mode at a time.
        let mut acc: Vec<f64> = factors[0].iter().map(|x| weight * x).collect();
        for f in &factors[1..] {
            let mut next = Vec::with_capacity(acc.len() * f.len());
            for a in &acc {
                next.extend(f.iter().map(|x| a * x));
            }
            acc = next;
        }
        for (v, a) in self.values.iter_mut().zip(acc) {
            *v += a;
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.values[o] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::norm(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    fn check_factor_dims(&self, factors: &[Vec<f64>]) -> Result<()> {
        if factors.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for an order-{} tensor",
                factors.len(),
                self.order()
            )));
        }
        for (q, (f, d)) in factors.iter().zip(&self.dims).enumerate() {
            if f.len() != *d {
                return Err(Error::DimensionMismatch(format!(
                    "factor {q} has length {} but mode dimension is {d}",
                    f.len()
                )));
            }
        }
        Ok(())
    }

    /// Contracts every mode whose slot holds a vector; returns the remaining
    /// dims and values (row-major over the surviving modes).
    fn contract_modes(&self, vectors: &[Option<&[f64]>]) -> (Vec<usize>, Vec<f64>) {
        let mut dims = self.dims.clone();
        let mut data = self.values.clone();
        for mode in (0..self.order()).rev() {
            let Some(v) = vectors[mode] else { continue };
            let dm = dims[mode];
            let inner: usize = dims[mode + 1..].iter().product();
            let outer: usize = dims[..mode].iter().product();
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (j, &w) in v.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src = &data[(o * dm + j) * inner..(o * dm + j + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
            dims.remove(mode);
            data = out;
        }
        (dims, data)
    }

    /// `T ×_{s≠mode} v_s` for the `p−1` vectors of the other modes, given in
    /// ascending mode order.
    pub fn contract_all_but(&self, mode: usize, vectors: &[&[f64]]) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        if vectors.len() + 1 != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} vectors, got {}",
                self.order() - 1,
                vectors.len()
            )));
        }
        let mut slots: Vec<Option<&[f64]>> = Vec::with_capacity(self.order());
        let mut it = vectors.iter();
        for q in 0..self.order() {
            if q == mode {
                slots.push(None);
            } else {
                let v = it.next().expect("length checked");
                if v.len() != self.dims[q] {
                    return Err(Error::DimensionMismatch(format!(
                        "vector for mode {q} has length {} but dimension is {}",
                        v.len(),
                        self.dims[q]
                    )));
                }
                slots.push(Some(v));
            }
        }
        Ok(self.contract_modes(&slots).1)
    }

    /// Same as [`contract_all_but`](Self::contract_all_but) but takes a full
    /// set of `p` factors and ignores the one at `mode`.
    pub fn contract_except(&self, mode: usize, factors: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        self.check_factor_dims(factors)?;
        let slots: Vec<Option<&[f64]>> = factors
            .iter()
            .enumerate()
            .map(|(q, f)| if q == mode { None } else { Some(f.as_slice()) })
            .collect();
        Ok(self.contract_modes(&slots).1)
    }

    /// Contracts only `mode` with `v`, leaving an order-(p−1) array.
    pub fn contract_mode(&self, mode: usize, v: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
        self.check_mode(mode)?;
        if v.len() != self.dims[mode] {
            return Err(Error::DimensionMismatch("contraction vector".into()));
        }
        let mut slots = vec![None; self.order()];
        slots[mode] = Some(v);
        Ok(self.contract_modes(&slots))
    }

    /// Signed `<T, a_1 ⊗ … ⊗ a_p>`.
    pub fn inner_rank_one(&self, factors: &[Vec<f64>]) -> Result<f64> {
        self.check_factor_dims(factors)?;
        let slots: Vec<Option<&[f64]>> = factors.iter().map(|f| Some(f.as_slice())).collect();
        Ok(self.contract_modes(&slots).1[0])
    }

    pub fn rank1_value(&self, x: &Rank1Point) -> Result<f64> {
        self.inner_rank_one(x.factors())
    }

    /// One simultaneous step of the normalized gradient map: every factor is
    /// replaced by the normalized contraction of the tensor with the other
    /// factors of `x` (all taken from the input point). Also returns the signed
    /// value `<T, x>` at the input point, which falls out of the first
    /// contraction for free.
    pub fn gradient_map(&self, x: &Rank1Point) -> Result<(Rank1Point, f64)> {
        let mut next = Vec::with_capacity(self.order());
        let mut value = 0.0;
        for q in 0..self.order() {
            let mut c = self.contract_except(q, x.factors())?;
            if q == 0 {
                value = linalg::dot(&c, &x.factors()[0]);
            }
            let n = linalg::normalize(&mut c);
            if !(n > 1e-300) {
                return Err(Error::Degenerate { mode: q, norm: n });
            }
            next.push(c);
        }
        Ok((Rank1Point { factors: next }, value))
    }

    /// Mode-`mode` unfolding, `d_mode x prod_{s≠mode} d_s`.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let dm = self.dims[mode];
        let inner: usize = self.dims[mode + 1..].iter().product();
        let outer: usize = self.dims[..mode].iter().product();
        let ncols = outer * inner;
        let mut m = Matrix::zeros(dm, ncols);
        for o in 0..outer {
            for j in 0..dm {
                let src = &self.values[(o * dm + j) * inner..(o * dm + j + 1) * inner];
                for (i, s) in src.iter().enumerate() {
                    m[(j, o * inner + i)] = *s;
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`matricize`](Self::matricize).
    pub fn dematricize(m: &Matrix, dims: &[usize], mode: usize) -> Result<Self> {
        check_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let dm = dims[mode];
        let inner: usize = dims[mode + 1..].iter().product();
        let outer: usize = dims[..mode].iter().product();
        if m.rows() != dm || m.cols() != outer * inner {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for mode {mode} of {dims:?}",
                m.rows(),
                m.cols()
            )));
        }
        let mut values = vec![0.0; dims.iter().product()];
        for o in 0..outer {
            for j in 0..dm {
                for i in 0..inner {
                    values[(o * dm + j) * inner + i] = m[(j, o * inner + i)];
                }
            }
        }
        Self::from_values(dims, values)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Text form: a header line `p d_1 … d_p`, then one value per line in
    /// row-major order.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 24);
        let header: Vec<String> = std::iter::once(self.order().to_string())
            .chain(self.dims.iter().map(|d| d.to_string()))
            .collect();
        s.push_str(&header.join(" "));
        s.push('\n');
        for v in &self.values {
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(text.as_bytes())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let header = header?;
        let nums = parse_usizes(&header, ln)?;
        let (&p, dims) = nums.split_first().ok_or(Error::Parse {
            line: ln,
            msg: "missing order".into(),
        })?;
        if dims.len() != p {
            return Err(Error::Parse {
                line: ln,
                msg: format!("order {p} but {} dimensions", dims.len()),
            });
        }
        check_dims(dims).map_err(|e| Error::Parse {
            line: ln,
            msg: e.to_string(),
        })?;
        let n: usize = dims.iter().product();
        let mut values = Vec::with_capacity(n);
        for (ln, line) in lines {
            let line = line?;
            values.push(parse_finite(line.trim(), ln)?);
        }
        if values.len() != n {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {n} values, found {}", values.len()),
            });
        }
        Self::from_values(dims, values)
    }
}

pub(crate) fn parse_usizes(line: &str, ln: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("expected a non-negative integer, got {tok:?}"),
            })
        })
        .collect()
}

pub(crate) fn parse_finite(tok: &str, ln: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line: ln,
        msg: format!("expected a number, got {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line: ln,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "tensor order must be at least 2, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "zero dimension in {dims:?}"
        )));
    }
    Ok(())
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for q in (0..idx.len()).rev() {
        idx[q] += 1;
        if idx[q] < dims[q] {
            return;
        }
        idx[q] = 0;
    }
}

/// A point on the product of unit spheres: one unit vector per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Point {
    factors: Vec<Vec<f64>>,
}

impl Rank1Point {
    /// Requires every factor to be a unit vector within `1e-12`.
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        for (q, f) in factors.iter().enumerate() {
            let n = linalg::norm(f);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "factor {q} has norm {n}, expected 1"
                )));
            }
        }
        Ok(Self { factors })
    }

    /// Normalizes each factor; fails on a zero factor.
    pub fn normalized(mut factors: Vec<Vec<f64>>) -> Result<Self> {
        for (q, f) in factors.iter_mut().enumerate() {
            if linalg::normalize(f) == 0.0 {
                return Err(Error::InvalidParameter(format!("factor {q} is zero")));
            }
        }
        Ok(Self { factors })
    }

    /// Each factor uniform on its sphere (normalized standard normals).
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let factors = dims.iter().map(|&d| random_unit(d, rng)).collect();
        Self { factors }
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<Vec<f64>> {
        self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }
}

pub fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if linalg::normalize(&mut v) > 1e-300 {
            return v;
        }
    }
}

/// Columnwise Kronecker product. Column `j` of the result is
/// `m_1[:, j] ⊗ m_2[:, j] ⊗ …`, with the first matrix's row index varying
/// slowest.
pub fn khatri_rao(mats: &[&Matrix]) -> Result<Matrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidParameter("khatri_rao needs at least one matrix".into()))?;
    let r = first.cols();
    if let Some(bad) = mats.iter().find(|m| m.cols() != r) {
        return Err(Error::DimensionMismatch(format!(
            "column counts {r} and {}",
            bad.cols()
        )));
    }
    let rows: usize = mats.iter().map(|m| m.rows()).product();
    let mut out = Matrix::zeros(rows, r);
    for j in 0..r {
        let mut col = first.column(j);
        for m in &mats[1..] {
            let c = m.column(j);
            let mut next = Vec::with_capacity(col.len() * c.len());
            for a in &col {
                next.extend(c.iter().map(|b| a * b));
            }
            col = next;
        }
        out.set_column(j, &col);
    }
    Ok(out)
}
