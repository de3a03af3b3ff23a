//! Perturbation of odeco decompositions.
//!
//! Given odeco tensors `T` and `T̃ = T + (T̃ − T)` with `Δ = ‖T̃ − T‖`, the
//! components of `T̃` can be paired with those of `T` so that
//!
//! * in general, `|λ_k − λ̃_{π(k)}| ≤ CΔ` and `sin∠(u_k^(q), ũ_{π(k)}^(q)) ≤ CΔ/λ_k`
//!   with `C = 17`;
//! * when `Δ ≤ c_ε λ_k`, the sharp forms `|λ_k − λ̃_{π(k)}| ≤ Δ` and
//!   `sin∠ ≤ (1 + ε)Δ/λ_k` hold, and the first-order expansion
//!   `ũ ≈ u + λ_k⁻¹ (T̃ − T) ×_{s≠q} u^(s)` is accurate to
//!   `(2 + Δ/λ_k)((1 + ε)Δ/λ_k)^{p−1}`.
//!
//! None of these involve gaps between singular values. This module builds the
//! pairing ([`match_tuples`]), computes `c_ε` ([`constants`]), and checks the
//! inequalities on concrete pairs ([`verify_bounds`], [`verify_nonessential`]).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::norm::{spectral_norm, NormConfig};
use crate::odeco::{enumerate_tuples, OdecoTensor, SingularTuple};
use crate::tensor::DenseTensor;

/// Constant in the general-regime bounds.
pub const GENERAL_CONSTANT: f64 = 17.0;

/// Additive slack on every inequality check, for rounding in the computed
/// quantities.
pub const CHECK_SLACK: f64 = 1e-8;

/// Relative tolerance under which two matching scores count as tied.
const SCORE_TIE: f64 = 1e-12;

/// Sine of the angle between two nonzero vectors.
pub fn sin_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    linalg::sin_angle(u, v).ok_or_else(|| Error::InvalidParameter("zero vector".into()))
}

/// Pairing of the components of two odeco tensors: `pi[k]` is the component
/// of the second tensor matched to component `k` of the first, and
/// `gamma[q][k]` is the sign that aligns `ũ_{π(k)}^(q)` with `u_k^(q)`.
/// The signs of each component multiply to `+1` over the modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub pi: Vec<usize>,
    pub gamma: Vec<Vec<i8>>,
    /// Sum of the matching functional over the chosen pairs.
    pub score: f64,
}

impl Matching {
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.pi.len()];
        for (k, &j) in self.pi.iter().enumerate() {
            inv[j] = k;
        }
        inv
    }
}

fn same_shape(a: &OdecoTensor, b: &OdecoTensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Greedy matching in order of decreasing `λ_k`: component `k` takes the
/// unused `j` maximizing `λ̃_j ∏_q |<u_k^(q), ũ_j^(q)>|^{(p−2)/p}`.
///
/// When that functional vanishes for every unused `j`, or its maximum is
/// shared by several `j`, the choice falls back to the smallest largest-mode
/// sine among the candidates, ties going to the smallest index. Signs make
/// each matched inner product nonnegative; if that leaves a component with
/// sign product `−1`, the mode with the weakest alignment is flipped.
pub fn match_tuples(a: &OdecoTensor, b: &OdecoTensor) -> Result<Matching> {
    same_shape(a, b)?;
    let n = a.d_min();
    let p = a.order();
    let expo = (p as f64 - 2.0) / p as f64;
    let cross: Vec<Matrix> = a
        .factors()
        .iter()
        .zip(b.factors())
        .map(|(u, v)| u.transpose().matmul(v))
        .collect::<Result<_>>()?;
    let functional = |k: usize, j: usize| -> f64 {
        if p == 2 {
            return b.lambdas()[j];
        }
        b.lambdas()[j]
            * cross
                .iter()
                .map(|c| c[(k, j)].abs().powf(expo))
                .product::<f64>()
    };
    let max_sin = |k: usize, j: usize| -> f64 {
        cross
            .iter()
            .map(|c| {
                let x = c[(k, j)].abs().min(1.0);
                (1.0 - x * x).sqrt()
            })
            .fold(0.0, f64::max)
    };

    let mut used = vec![false; n];
    let mut pi = vec![0; n];
    let mut score = 0.0;
    for k in 0..n {
        let cand: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
        let scores: Vec<f64> = cand.iter().map(|&j| functional(k, j)).collect();
        let best = scores.iter().copied().fold(0.0, f64::max);
        let top: Vec<usize> = cand
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| best > 0.0 && s >= best * (1.0 - SCORE_TIE))
            .map(|(&j, _)| j)
            .collect();
        let pool = if top.len() == 1 {
            &top
        } else if top.is_empty() {
            &cand
        } else {
            &top
        };
        let mut choice = pool[0];
        let mut choice_sin = max_sin(k, choice);
        for &j in &pool[1..] {
            let s = max_sin(k, j);
            if s < choice_sin {
                choice = j;
                choice_sin = s;
            }
        }
        used[choice] = true;
        pi[k] = choice;
        score += functional(k, choice);
    }

    let mut gamma = vec![vec![1i8; n]; p];
    for k in 0..n {
        let mut weakest = 0;
        let mut product = 1i8;
        for q in 0..p {
            let c = cross[q][(k, pi[k])];
            if c < 0.0 {
                gamma[q][k] = -1;
                product = -product;
            }
            if c.abs() < cross[weakest][(k, pi[k])].abs() {
                weakest = q;
            }
        }
        if product < 0 {
            gamma[weakest][k] = -gamma[weakest][k];
        }
    }
    Ok(Matching { pi, gamma, score })
}

/// `max_q sin∠(u_k^(q), ũ_{π(k)}^(q))`
pub fn matched_sin(a: &OdecoTensor, b: &OdecoTensor, m: &Matching, k: usize) -> f64 {
    (0..a.order())
        .map(|q| linalg::sin_angle(&a.vector(q, k), &b.vector(q, m.pi[k])).unwrap_or(1.0))
        .fold(0.0, f64::max)
}

/// Largest matched sine over the first `r` components of `a`.
pub fn max_sin_after_matching(a: &OdecoTensor, b: &OdecoTensor, m: &Matching, r: usize) -> f64 {
    (0..r.min(a.d_min()))
        .map(|k| matched_sin(a, b, m, k))
        .fold(0.0, f64::max)
}

/// Estimated `‖to_dense(a) − to_dense(b)‖` (a lower bound, see [`crate::norm`]).
pub fn delta_norm(a: &OdecoTensor, b: &OdecoTensor, cfg: &NormConfig, seed: u64) -> Result<f64> {
    same_shape(a, b)?;
    let diff = b.to_dense().sub(&a.to_dense())?;
    Ok(spectral_norm(&diff, cfg, seed)?.value)
}

/// `c_ε` and the pieces it is the minimum of.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbConstants {
    pub epsilon: f64,
    pub order: usize,
    pub c_epsilon: f64,
    /// `max{1 + ε, 1/c_ε}`, the constant the general bounds inherit.
    pub objective: f64,
    /// `h₁⁻¹(1 + ε)`
    pub h1_inv: f64,
    /// `h₂⁻¹(1 + ε)`
    pub h2_inv: f64,
    /// `h₃⁻¹(1)`
    pub h3_inv: f64,
    /// `h₄⁻¹(ε/(1 + ε))`
    pub h4_inv: f64,
}

/// The four auxiliary functions at order `p`. Each is increasing on its
/// relevant branch in `(0, 1)`; points past a pole evaluate to `+∞`.
#[derive(Clone, Copy, Debug)]
pub struct HFunctions {
    pub order: usize,
    pub epsilon: f64,
}

impl HFunctions {
    fn exponents(&self) -> (f64, f64) {
        let p = self.order as f64;
        (2.0 / (p - 2.0), (p - 2.0) / 2.0)
    }

    fn reciprocal(den: f64) -> f64 {
        if den > 0.0 {
            1.0 / den
        } else {
            f64::INFINITY
        }
    }

    /// `(1 − [1 − (1 − x)^{2/(p−2)}]^{(p−2)/2})⁻¹`
    pub fn h1(&self, x: f64) -> f64 {
        let (a, b) = self.exponents();
        Self::reciprocal(1.0 - (1.0 - (1.0 - x).powf(a)).max(0.0).powf(b))
    }

    fn bracket(&self, x: f64) -> f64 {
        let (a, b) = self.exponents();
        (1.0 - ((1.0 - x) / (1.0 + x)).powf(a)).max(0.0).powf(b)
    }

    /// `[1 − (1 + x)[1 − ((1 − x)/(1 + x))^{2/(p−2)}]^{(p−2)/2}]⁻¹`
    pub fn h2(&self, x: f64) -> f64 {
        Self::reciprocal(1.0 - (1.0 + x) * self.bracket(x))
    }

    /// `x[1 + (1 + ε)(1 + x)]`
    pub fn h3(&self, x: f64) -> f64 {
        x * (1.0 + (1.0 + self.epsilon) * (1.0 + x))
    }

    /// `(1 + x)[1 − ((1 − x)/(1 + x))^{2/(p−2)}]^{(p−2)/2} + (1 + ε)x(1 + x)`
    pub fn h4(&self, x: f64) -> f64 {
        (1.0 + x) * self.bracket(x) + (1.0 + self.epsilon) * x * (1.0 + x)
    }
}

const BISECT_LO: f64 = 0.0;
const BISECT_HI: f64 = 1.0 - 1e-12;

/// Solves `h(x) = target` for increasing `h` on `(0, 1 − 1e-12)`, refusing
/// targets the endpoint values do not bracket.
pub fn invert_increasing(h: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (BISECT_LO, BISECT_HI);
    if !(h(lo) <= target && h(hi) >= target) {
        return Err(Error::NotBracketed { target, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The upper end is never past a pole, so it gives a finite value.
    Ok(if h(hi).is_finite() { hi } else { lo })
}

/// `c_ε = min{(1+ε)⁻¹, h₁⁻¹(1+ε), h₂⁻¹(1+ε), h₃⁻¹(1), h₄⁻¹(ε/(1+ε))}` at
/// order `p`. Using `p = 3` gives a constant valid for every order.
pub fn constants(epsilon: f64, p: usize) -> Result<PerturbConstants> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if p < 3 {
        return Err(Error::InvalidParameter(format!(
            "order must be >= 3, got {p}"
        )));
    }
    let h = HFunctions { order: p, epsilon };
    let h1_inv = invert_increasing(|x| h.h1(x), 1.0 + epsilon)?;
    let h2_inv = invert_increasing(|x| h.h2(x), 1.0 + epsilon)?;
    let h3_inv = invert_increasing(|x| h.h3(x), 1.0)?;
    let h4_inv = invert_increasing(|x| h.h4(x), epsilon / (1.0 + epsilon))?;
    let c_epsilon = [1.0 / (1.0 + epsilon), h1_inv, h2_inv, h3_inv, h4_inv]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(PerturbConstants {
        epsilon,
        order: p,
        c_epsilon,
        objective: (1.0 + epsilon).max(1.0 / c_epsilon),
        h1_inv,
        h2_inv,
        h3_inv,
        h4_inv,
    })
}

/// Minimizes `max{1 + ε, 1/c_ε}` over a grid of `ε` values.
pub fn minimize_objective(grid: &[f64], p: usize) -> Result<PerturbConstants> {
    let mut best: Option<PerturbConstants> = None;
    for &eps in grid {
        let c = constants(eps, p)?;
        if best.is_none_or(|b| c.objective < b.objective) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty epsilon grid".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyConfig {
    pub norm: NormConfig,
    pub seed: u64,
    /// Order at which `c_ε` is computed.
    pub constants_order: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            norm: NormConfig::with_restarts(200),
            seed: 0,
            constants_order: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub k: usize,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub gap: f64,
    pub max_sin: f64,
    /// `Δ ≤ c_ε λ_k`
    pub sharp: bool,
    /// Bound on `gap`: `Δ` when sharp, `17Δ` otherwise.
    pub bound_value: f64,
    /// Bound on `max_sin`: `(1+ε)Δ/λ` when sharp, `17Δ/λ` otherwise, with
    /// `+∞` when the denominator is zero.
    pub bound_davis: f64,
    /// Largest sine between `ũ_{π(k)}^(q)` and the first-order prediction;
    /// NaN when `λ_k = 0`.
    pub second_order_resid: f64,
    pub second_order_bound: f64,
    /// Value and angle checks, plus the second-order check in the sharp regime.
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct PerturbationReport {
    pub epsilon: f64,
    pub c_epsilon: f64,
    /// The single `‖T̃ − T‖` estimate all bounds use.
    pub delta: f64,
    /// Whether a violation triggered re-estimation of `delta` with ten times
    /// the restarts. Because the estimate is a lower bound, a violation that
    /// survives re-estimation could still in principle stem from it.
    pub reestimated: bool,
    pub matching: Matching,
    pub rows: Vec<ReportRow>,
}

impl PerturbationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub const CSV_HEADER: &'static str = "k,lambda,lambda_tilde,gap,max_sin,sharp_flag,bound_value,bound_davis,second_order_resid,second_order_bound,pass";

    /// CSV with the report-level quantities on leading `#` lines. Indices are
    /// 1-based in the output.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# delta={:e} epsilon={} c_epsilon={:e} reestimated={}",
            self.delta, self.epsilon, self.c_epsilon, self.reestimated
        );
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{}",
                r.k + 1,
                r.lambda,
                r.lambda_tilde,
                r.gap,
                r.max_sin,
                r.sharp,
                r.bound_value,
                r.bound_davis,
                r.second_order_resid,
                r.second_order_bound,
                r.pass
            );
        }
        s
    }
}

/// Checks the perturbation bounds for `b` viewed as a perturbation of `a`.
///
/// `Δ` is estimated once with `cfg.norm`; if any row fails, it is re-estimated
/// with ten times the restarts (keeping the larger, since both are lower
/// bounds) and the rows are recomputed.
pub fn verify_bounds(
    a: &OdecoTensor,
    b: &OdecoTensor,
    epsilon: f64,
    cfg: &VerifyConfig,
) -> Result<PerturbationReport> {
    same_shape(a, b)?;
    let consts = constants(epsilon, cfg.constants_order)?;
    let matching = match_tuples(a, b)?;
    let diff = b.to_dense().sub(&a.to_dense())?;
    let delta = spectral_norm(&diff, &cfg.norm, cfg.seed)?.value;
    let rows = report_rows(a, b, &matching, &diff, delta, &consts)?;
    let mut report = PerturbationReport {
        epsilon,
        c_epsilon: consts.c_epsilon,
        delta,
        reestimated: false,
        matching,
        rows,
    };
    if !report.all_pass() {
        let more = NormConfig {
            restarts: cfg.norm.restarts * 10,
            ..cfg.norm
        };
        let again = spectral_norm(&diff, &more, crate::sub_seed(cfg.seed, 1))?.value;
        report.delta = report.delta.max(again);
        report.reestimated = true;
        report.rows = report_rows(a, b, &report.matching, &diff, report.delta, &consts)?;
    }
    Ok(report)
}

fn report_rows(
    a: &OdecoTensor,
    b: &OdecoTensor,
    m: &Matching,
    diff: &DenseTensor,
    delta: f64,
    consts: &PerturbConstants,
) -> Result<Vec<ReportRow>> {
    let n = a.d_min();
    let p = a.order();
    let eps = consts.epsilon;
    let lambdas = a.lambdas();
    // A single trailing zero value borrows the previous one as denominator.
    let simple_last_zero = n >= 2 && lambdas[n - 1] == 0.0 && lambdas[n - 2] > 0.0;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = lambdas[k];
        let lambda_tilde = b.lambdas()[m.pi[k]];
        let gap = (lambda - lambda_tilde).abs();
        let max_sin = matched_sin(a, b, m, k);
        let denom = if lambda > 0.0 {
            lambda
        } else if simple_last_zero && k == n - 1 {
            lambdas[n - 2]
        } else {
            0.0
        };
        let ratio = |c: f64| {
            if denom > 0.0 {
                c * delta / denom
            } else {
                f64::INFINITY
            }
        };
        let sharp = lambda > 0.0 && delta <= consts.c_epsilon * lambda;
        let (bound_value, bound_davis) = if sharp {
            (delta, ratio(1.0 + eps))
        } else {
            (GENERAL_CONSTANT * delta, ratio(GENERAL_CONSTANT))
        };
        let (second_order_resid, second_order_bound) = if lambda > 0.0 {
            let comp = a.component(k);
            let mut worst: f64 = 0.0;
            for q in 0..p {
                let mut w = diff.contract_except(q, &comp)?;
                w.iter_mut().for_each(|x| *x /= lambda);
                linalg::axpy(1.0, &comp[q], &mut w);
                let s = linalg::sin_angle(&b.vector(q, m.pi[k]), &w).unwrap_or(1.0);
                worst = worst.max(s);
            }
            let r = delta / lambda;
            (worst, (2.0 + r) * ((1.0 + eps) * r).powi(p as i32 - 1))
        } else {
            (f64::NAN, f64::INFINITY)
        };
        let pass = gap <= bound_value + CHECK_SLACK
            && max_sin <= bound_davis + CHECK_SLACK
            && (!sharp || second_order_resid <= second_order_bound + CHECK_SLACK);
        rows.push(ReportRow {
            k,
            lambda,
            lambda_tilde,
            gap,
            max_sin,
            sharp,
            bound_value,
            bound_davis,
            second_order_resid,
            second_order_bound,
            pass,
        });
    }
    Ok(rows)
}

/// `M^(q)`: column `k` is `(T̃ − T) ×_{s≠q} u_k^(s)` for each of the `r`
/// positive components of `a`.
pub fn m_matrix(a: &OdecoTensor, delta_dense: &DenseTensor, q: usize) -> Result<Matrix> {
    if q >= a.order() {
        return Err(Error::ModeOutOfRange {
            mode: q,
            order: a.order(),
        });
    }
    if delta_dense.dims() != a.dims() {
        return Err(Error::DimensionMismatch("perturbation dims".into()));
    }
    let r = a.rank();
    let cols = (0..r)
        .map(|k| delta_dense.contract_except(q, &a.component(k)))
        .collect::<Result<Vec<_>>>()?;
    if cols.is_empty() {
        return Ok(Matrix::zeros(a.dims()[q], 0));
    }
    Matrix::from_columns(&cols)
}

#[derive(Clone, Debug)]
pub struct NonessentialReport {
    pub delta: f64,
    /// `max_q ‖M^(q)‖ / Δ` (NaN when `Δ = 0`).
    pub c1: f64,
    /// `Δ / (λ_r r^{−1/(2(p−2))})`
    pub c2: f64,
    /// `min{λ_k : k ∈ S}`, `+∞` for an empty active set.
    pub lambda_star_min: f64,
    /// The matched tuple of the perturbed tensor, when the active set could
    /// be transported (every matched value positive).
    pub matched: Option<SingularTuple>,
    /// `max_q ‖v^(q) − ṽ^(q)‖`
    pub vector_distance: f64,
    pub value_gap: f64,
    /// `Δ / λ*_min`
    pub vector_reference: f64,
    /// `λ Δ / λ*_min`
    pub value_reference: f64,
}

impl NonessentialReport {
    pub fn vector_ratio(&self) -> f64 {
        self.vector_distance / self.vector_reference
    }

    pub fn value_ratio(&self) -> f64 {
        self.value_gap / self.value_reference
    }
}

/// Transports a closed-form tuple of `a` to `b` through the matching: the
/// active set becomes `π(S)` and the signs are multiplied by `γ`. Reports the
/// distances and the reference quantities they should be proportional to.
pub fn verify_nonessential(
    a: &OdecoTensor,
    b: &OdecoTensor,
    tuple_a: &SingularTuple,
    cfg: &VerifyConfig,
) -> Result<NonessentialReport> {
    same_shape(a, b)?;
    let p = a.order();
    let diff = b.to_dense().sub(&a.to_dense())?;
    let delta = spectral_norm(&diff, &cfg.norm, cfg.seed)?.value;
    let mut m_norm: f64 = 0.0;
    for q in 0..p {
        let m = m_matrix(a, &diff, q)?;
        if m.cols() > 0 {
            m_norm = m_norm.max(m.spectral_norm());
        }
    }
    let r = a.rank();
    let c1 = m_norm / delta;
    let c2 = if r > 0 {
        delta / (a.lambdas()[r - 1] * (r as f64).powf(-1.0 / (2.0 * (p as f64 - 2.0))))
    } else {
        f64::INFINITY
    };
    let lambda_star_min = tuple_a
        .active_set
        .iter()
        .map(|&k| a.lambdas()[k])
        .fold(f64::INFINITY, f64::min);

    let matching = match_tuples(a, b)?;
    let transported: Vec<usize> = tuple_a.active_set.iter().map(|&k| matching.pi[k]).collect();
    let transportable =
        !transported.is_empty() && transported.iter().all(|&j| b.lambdas()[j] > 0.0);
    let matched = if transportable {
        let signs: Vec<Vec<i8>> = tuple_a
            .active_set
            .iter()
            .zip(&tuple_a.signs)
            .map(|(&k, chi)| (0..p).map(|q| chi[q] * matching.gamma[q][k]).collect())
            .collect();
        Some(enumerate_tuples(b, &transported, &signs)?)
    } else {
        None
    };
    let (vector_distance, value_gap) = match &matched {
        Some(t) => (
            tuple_a
                .vectors
                .iter()
                .zip(&t.vectors)
                .map(|(v, w)| {
                    let mut d = v.clone();
                    linalg::axpy(-1.0, w, &mut d);
                    linalg::norm(&d)
                })
                .fold(0.0, f64::max),
            (tuple_a.value - t.value).abs(),
        ),
        None => (f64::NAN, f64::NAN),
    };
    Ok(NonessentialReport {
        delta,
        c1,
        c2,
        lambda_star_min,
        matched,
        vector_distance,
        value_gap,
        vector_reference: delta / lambda_star_min,
        value_reference: tuple_a.value * delta / lambda_star_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odeco::{random_odeco, random_orthonormal};
    use crate::tensor::random_unit;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn diag_odeco(lambdas: &[f64], d: usize) -> OdecoTensor {
        let idx: Vec<usize> = (0..lambdas.len()).collect();
        let f = Matrix::identity(d).select_columns(&idx);
        OdecoTensor::new(lambdas.to_vec(), vec![f; 3]).unwrap()
    }

    /// Perturbs every factor of `a` by a random near-identity rotation and
    /// every value by a relative `scale` amount.
    fn perturbed(a: &OdecoTensor, scale: f64, rng: &mut ChaCha8Rng) -> OdecoTensor {
        let d = a.d_min();
        let factors = a
            .factors()
            .iter()
            .map(|u| {
                let noise = random_orthonormal(u.rows(), d, rng);
                let mixed = Matrix::from_columns(
                    &(0..d)
                        .map(|k| {
                            let mut c = u.column(k);
                            linalg::axpy(scale, &noise.column(k), &mut c);
                            c
                        })
                        .collect::<Vec<_>>(),
                )
                .unwrap();
                crate::incoherent::polar_factor(&mixed).unwrap()
            })
            .collect();
        let lambdas = a
            .lambdas()
            .iter()
            .map(|l| l * (1.0 + scale * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        OdecoTensor::new(lambdas, factors).unwrap()
    }

    use rand::Rng as _;

    #[test]
    fn sin_angle_examples() {
        assert!(sin_angle(&[1.0, 2.0], &[1.0, 2.0]).unwrap() < 1e-15);
        assert_eq!(sin_angle(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sin_angle(&[1.0, 0.0], &[s, s]).unwrap() - s).abs() < 1e-15);
        assert!(sin_angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn sin_angle_symmetric_and_sign_invariant(
            u in proptest::collection::vec(-10.0f64..10.0, 4),
            v in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            prop_assume!(linalg::norm(&u) > 1e-6 && linalg::norm(&v) > 1e-6);
            let s = sin_angle(&u, &v).unwrap();
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            prop_assert_eq!(s, sin_angle(&v, &u).unwrap());
            prop_assert_eq!(s, sin_angle(&neg, &v).unwrap());
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn identical_tensors_match_trivially() {
        let a = random_odeco(&[4, 4, 4], &[3.0, 2.0, 1.0, 0.5], 1).unwrap();
        let m = match_tuples(&a, &a).unwrap();
        assert_eq!(m.pi, vec![0, 1, 2, 3]);
        assert!(m.gamma.iter().flatten().all(|&g| g == 1));
        assert!(max_sin_after_matching(&a, &a, &m, 4) < 1e-12);
        let rep = verify_bounds(&a, &a, 0.05, &VerifyConfig::default()).unwrap();
        assert_eq!(rep.delta, 0.0);
        assert!(rep.all_pass());
        assert!(rep.rows.iter().all(|r| r.gap == 0.0 && r.max_sin < 1e-12));
    }

    #[test]
    fn swapped_values_pair_by_vectors() {
        let delta = 0.1;
        let a = diag_odeco(&[1.0 + delta, 1.0 - delta], 2);
        let b =
            OdecoTensor::new(vec![1.0 - delta, 1.0 + delta], vec![Matrix::identity(2); 3]).unwrap();
        let m = match_tuples(&a, &b).unwrap();
        // b is stored sorted, so its e₁ component sits at index 1.
        assert_eq!(b.vector(0, 1), e(2, 0));
        assert_eq!(m.pi, vec![1, 0]);
    }

    #[test]
    fn signs_align_flipped_vectors() {
        let a = random_odeco(&[3, 3, 3], &[2.0, 1.0, 0.5], 3).unwrap();
        let mut f = a.factors().to_vec();
        for q in [1, 2] {
            let c: Vec<f64> = f[q].column(0).iter().map(|x| -x).collect();
            f[q].set_column(0, &c);
        }
        let b = OdecoTensor::new(a.lambdas().to_vec(), f).unwrap();
        let m = match_tuples(&a, &b).unwrap();
        assert_eq!(m.pi, vec![0, 1, 2]);
        assert_eq!((m.gamma[0][0], m.gamma[1][0], m.gamma[2][0]), (1, -1, -1));
    }

    #[test]
    fn weyl_pair() {
        let a = OdecoTensor::new(
            vec![2.0],
            vec![Matrix::from_columns(&[e(2, 0)]).unwrap(); 3],
        )
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = Matrix::from_columns(&[vec![s, s], vec![s, -s]]).unwrap();
        let l = 2.0 * 2f64.sqrt();
        let b = OdecoTensor::new(vec![l, l], vec![u; 3]).unwrap();
        let cfg = VerifyConfig::default();
        let delta = delta_norm(&a, &b, &cfg.norm, 0).unwrap();
        assert!((delta - 4.0 / 3f64.sqrt()).abs() < 1e-6);
        let rep = verify_bounds(&a, &b, 0.05, &cfg).unwrap();
        let max_gap = rep.rows.iter().map(|r| r.gap).fold(0.0, f64::max);
        assert!((max_gap - l).abs() < 1e-12);
        assert!(max_gap > rep.delta);
        // The zero value is simple, so its angle bound borrows λ₁ = 2.
        assert!(rep.rows[1].bound_davis.is_finite());
    }

    /// Smallest achievable largest matched sine over all permutations.
    fn bottleneck_oracle(a: &OdecoTensor, b: &OdecoTensor) -> (f64, Vec<usize>) {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for i in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(i, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let n = a.d_min();
        perms(n)
            .into_iter()
            .map(|pi| {
                let m = Matching {
                    pi: pi.clone(),
                    gamma: vec![vec![1; n]; 3],
                    score: 0.0,
                };
                (max_sin_after_matching(a, b, &m, n), pi)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap()
    }

    #[test]
    fn greedy_agrees_with_exhaustive_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in 2..=6 {
            let lambdas: Vec<f64> = (0..d).map(|k| 3.0 - 0.4 * k as f64).collect();
            let a = random_odeco(&[d, d, d], &lambdas, rng.random()).unwrap();
            let b = perturbed(&a, 0.02, &mut rng);
            let m = match_tuples(&a, &b).unwrap();
            let (best, pi) = bottleneck_oracle(&a, &b);
            assert_eq!(m.pi, pi);
            assert!((max_sin_after_matching(&a, &b, &m, d) - best).abs() < 1e-14);
        }
    }

    #[test]
    fn matching_back_and_forth_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let a = random_odeco(&[5, 5, 5], &[3.0, 2.5, 2.0, 1.0, 0.5], rng.random()).unwrap();
            let b = perturbed(&a, 0.05, &mut rng);
            let ab = match_tuples(&a, &b).unwrap();
            let ba = match_tuples(&b, &a).unwrap();
            for k in 0..5 {
                assert_eq!(ba.pi[ab.pi[k]], k);
            }
        }
    }

    #[test]
    fn constants_reproduce_targets() {
        let c = constants(0.05, 3).unwrap();
        let h = HFunctions {
            order: 3,
            epsilon: 0.05,
        };
        assert!((h.h1(c.h1_inv) - 1.05).abs() < 1e-9);
        assert!((h.h2(c.h2_inv) - 1.05).abs() < 1e-9);
        assert!((h.h3(c.h3_inv) - 1.0).abs() < 1e-9);
        assert!((h.h4(c.h4_inv) - 0.05 / 1.05).abs() < 1e-9);
        assert!(c.c_epsilon > 0.0 && c.c_epsilon < 1.0);
        assert_eq!(h.h1(0.0), 1.0);
        assert_eq!(h.h3(0.0), 0.0);
        // h₃(x) = 1 is the quadratic (1+ε)x² + (2+ε)x − 1 = 0.
        let (a2, b1): (f64, f64) = (1.05, 2.05);
        let root = (-b1 + (b1 * b1 + 4.0 * a2).sqrt()) / (2.0 * a2);
        assert!((c.h3_inv - root).abs() < 1e-10);
    }

    #[test]
    fn constants_hold_for_higher_orders_and_reject_bad_input() {
        for p in 3..7 {
            let c = constants(0.5, p).unwrap();
            assert!(c.c_epsilon > 0.0 && c.c_epsilon < 1.0, "p={p}");
        }
        assert!(constants(0.0, 3).is_err());
        assert!(constants(-1.0, 3).is_err());
        assert!(constants(1.0, 2).is_err());
        assert!(matches!(
            invert_increasing(|x| x, 2.0),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn objective_minimum() {
        let grid: Vec<f64> = (1..=600).map(|i| i as f64 * 0.01).collect();
        let best = minimize_objective(&grid, 3).unwrap();
        assert!((best.objective - 16.48).abs() < 0.5, "{}", best.objective);
        assert!((best.epsilon - 2.94).abs() < 0.2, "{}", best.epsilon);
    }

    #[test]
    fn m_matrix_examples() {
        let a = random_odeco(&[3, 3, 3], &[2.0, 1.0], 4).unwrap();
        let zero = DenseTensor::zeros(&[3, 3, 3]).unwrap();
        let m = m_matrix(&a, &zero, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m.frobenius_norm(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w: Vec<Vec<f64>> = (0..3).map(|_| random_unit(3, &mut rng)).collect();
        let mu = 0.3;
        let r1 = DenseTensor::rank_one(mu, &w).unwrap();
        for q in 0..3 {
            let m = m_matrix(&a, &r1, q).unwrap();
            for k in 0..2 {
                let coef: f64 = mu
                    * (0..3)
                        .filter(|&s| s != q)
                        .map(|s| linalg::dot(&w[s], &a.vector(s, k)))
                        .product::<f64>();
                for i in 0..3 {
                    assert!((m[(i, k)] - coef * w[q][i]).abs() < 1e-14);
                }
            }
        }

        let noise = DenseTensor::random_normal(&[3, 3, 3], &mut rng).unwrap();
        let m = m_matrix(&a, &noise, 2).unwrap();
        for k in 0..2 {
            let c = noise.contract_except(2, &a.component(k)).unwrap();
            assert_eq!(m.column(k), c);
        }
        assert!(m_matrix(&a, &noise, 3).is_err());
    }

    #[test]
    fn nonessential_distance_is_linear_in_delta() {
        let a = diag_odeco(&[2.0, 1.0], 2);
        let tuple = enumerate_tuples(&a, &[0, 1], &[vec![1, 1], vec![1, 1]]).unwrap();
        let cfg = VerifyConfig::default();
        let mut ratios = Vec::new();
        for theta in [1e-2, 1e-3, 1e-4] {
            let (c, s) = (f64::cos(theta), f64::sin(theta));
            let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
            let b = OdecoTensor::new(vec![2.0, 1.0], vec![rot; 3]).unwrap();
            let rep = verify_nonessential(&a, &b, &tuple, &cfg).unwrap();
            assert!(rep.matched.is_some());
            ratios.push(rep.vector_ratio());
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        let spread = ratios.iter().copied().fold(0.0, f64::max)
            / ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.1, "{ratios:?}");

        let same = verify_nonessential(&a, &a, &tuple, &cfg).unwrap();
        assert_eq!(same.vector_distance, 0.0);
        assert_eq!(same.value_gap, 0.0);
    }

    #[test]
    fn singleton_nonessential_matches_essential_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_odeco(&[3, 3, 3], &[2.0, 1.0, 0.5], 5).unwrap();
        let b = perturbed(&a, 0.01, &mut rng);
        let tuple = enumerate_tuples(&a, &[1], &[vec![1, 1]]).unwrap();
        let rep = verify_nonessential(&a, &b, &tuple, &VerifyConfig::default()).unwrap();
        let m = match_tuples(&a, &b).unwrap();
        assert!((rep.value_gap - (a.lambdas()[1] - b.lambdas()[m.pi[1]]).abs()).abs() < 1e-12);
        let v = rep.matched.unwrap();
        for q in 0..3 {
            let s = sin_angle(&v.vectors[q], &b.vector(q, m.pi[1])).unwrap();
            assert!(s < 1e-12);
        }
    }

    #[test]
    fn non_transportable_active_set() {
        let a = diag_odeco(&[2.0, 1.0], 2);
        let b = diag_odeco(&[2.0], 2);
        let tuple = enumerate_tuples(&a, &[0, 1], &[vec![1, 1], vec![1, 1]]).unwrap();
        let rep = verify_nonessential(&a, &b, &tuple, &VerifyConfig::default()).unwrap();
        assert!(rep.matched.is_none());
    }

    #[test]
    fn csv_has_declared_columns() {
        let a = random_odeco(&[3, 3, 3], &[2.0, 1.0, 0.5], 5).unwrap();
        let rep = verify_bounds(&a, &a, 0.05, &VerifyConfig::default()).unwrap();
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], PerturbationReport::CSV_HEADER);
        assert_eq!(lines.len(), 2 + 3);
        assert!(lines[2..].iter().all(|l| l.split(',').count() == 11));
    }
}
