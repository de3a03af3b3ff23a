//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls the library's iteration or matching code; the
//! oracles work directly from tensor entries.

#![allow(dead_code, clippy::needless_range_loop)]

use odeco::linalg::sin_angle;
use odeco::odeco::{random_orthonormal, OdecoTensor};
use odeco::{rng_from_seed, DenseTensor, Matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A singular tuple found by an oracle, normalized to a nonnegative value.
#[derive(Clone, Debug)]
pub struct OracleTuple {
    pub value: f64,
    pub vectors: [Vec<f64>; 3],
}

fn entry(t: &DenseTensor, i: usize, j: usize, k: usize) -> f64 {
    t.get(&[i, j, k])
}

/// Residual of the singular-value equations plus unit-norm constraints for an
/// order-3 tensor, stacked as one vector: `T(·,y,z) − λx`, `T(x,·,z) − λy`,
/// `T(x,y,·) − λz`, `(‖x‖² − 1)/2`, `(‖y‖² − 1)/2`, `(‖z‖² − 1)/2`.
fn equations(t: &DenseTensor, u: &[f64]) -> Vec<f64> {
    let d = t.dims();
    let (x, rest) = u.split_at(d[0]);
    let (y, rest) = rest.split_at(d[1]);
    let (z, rest) = rest.split_at(d[2]);
    let lam = rest[0];
    let mut f = Vec::with_capacity(d[0] + d[1] + d[2] + 3);
    for i in 0..d[0] {
        let mut s = 0.0;
        for j in 0..d[1] {
            for k in 0..d[2] {
                s += entry(t, i, j, k) * y[j] * z[k];
            }
        }
        f.push(s - lam * x[i]);
    }
    for j in 0..d[1] {
        let mut s = 0.0;
        for i in 0..d[0] {
            for k in 0..d[2] {
                s += entry(t, i, j, k) * x[i] * z[k];
            }
        }
        f.push(s - lam * y[j]);
    }
    for k in 0..d[2] {
        let mut s = 0.0;
        for i in 0..d[0] {
            for j in 0..d[1] {
                s += entry(t, i, j, k) * x[i] * y[j];
            }
        }
        f.push(s - lam * z[k]);
    }
    for v in [x, y, z] {
        f.push(0.5 * (v.iter().map(|a| a * a).sum::<f64>() - 1.0));
    }
    f
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `n×n`.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[p * n + c].abs() < 1e-300 {
            return None;
        }
        for k in 0..n {
            a.swap(c * n + k, p * n + k);
        }
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= m * a[c * n + k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

/// Levenberg–Marquardt on [`equations`] with a central-difference Jacobian.
/// Returns the refined tuple when the residual falls below `1e-10`.
pub fn refine(t: &DenseTensor, start: [Vec<f64>; 3]) -> Option<OracleTuple> {
    let d = t.dims().to_vec();
    let value = {
        let mut s = 0.0;
        for i in 0..d[0] {
            for j in 0..d[1] {
                for k in 0..d[2] {
                    s += entry(t, i, j, k) * start[0][i] * start[1][j] * start[2][k];
                }
            }
        }
        s
    };
    let mut u: Vec<f64> = start.concat();
    u.push(value);
    let n = u.len();
    let mut mu = 1e-6;
    let mut f = equations(t, &u);
    for _ in 0..200 {
        let fn0 = norm(&f);
        if fn0 < 1e-14 {
            break;
        }
        let h = 1e-7;
        let m = f.len();
        let mut jac = vec![0.0; m * n];
        for c in 0..n {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[c] += h;
            dn[c] -= h;
            let fu = equations(t, &up);
            let fd = equations(t, &dn);
            for r in 0..m {
                jac[r * n + c] = (fu[r] - fd[r]) / (2.0 * h);
            }
        }
        let mut jtj = vec![0.0; n * n];
        let mut jtf = vec![0.0; n];
        for r in 0..m {
            for a in 0..n {
                jtf[a] -= jac[r * n + a] * f[r];
                for b in 0..n {
                    jtj[a * n + b] += jac[r * n + a] * jac[r * n + b];
                }
            }
        }
        loop {
            let mut damped = jtj.clone();
            for a in 0..n {
                damped[a * n + a] += mu;
            }
            let step = solve(damped, jtf.clone())?;
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + b).collect();
            let ft = equations(t, &trial);
            if norm(&ft) < fn0 {
                u = trial;
                f = ft;
                mu = (mu * 0.3).max(1e-15);
                break;
            }
            mu *= 10.0;
            if mu > 1e10 {
                return None;
            }
        }
    }
    if norm(&f) > 1e-10 {
        return None;
    }
    let mut x = u[..d[0]].to_vec();
    let y = u[d[0]..d[0] + d[1]].to_vec();
    let z = u[d[0] + d[1]..d[0] + d[1] + d[2]].to_vec();
    let mut lam = u[n - 1];
    if lam < 0.0 {
        lam = -lam;
        x.iter_mut().for_each(|a| *a = -*a);
    }
    Some(OracleTuple {
        value: lam,
        vectors: [x, y, z],
    })
}

fn unit_circle(theta: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin()]
}

/// Grid search over `[0, π)³` for `2×2×2` tensors: the squared angular
/// gradient of `f(θ) = <T, x(θ₁) ⊗ y(θ₂) ⊗ z(θ₃)>` is evaluated on an `n³`
/// grid, every grid-local minimum (with wrap-around) is refined, and the
/// distinct positive-value tuples are returned.
pub fn grid_oracle_2x2x2(t: &DenseTensor, n: usize) -> Vec<OracleTuple> {
    assert_eq!(t.dims(), &[2, 2, 2]);
    let step = std::f64::consts::PI / n as f64;
    let c = |k: usize| unit_circle(k as f64 * step);
    let dc = |k: usize| {
        let th = k as f64 * step;
        vec![-th.sin(), th.cos()]
    };
    let f3 = |a: &[f64], b: &[f64], cc: &[f64]| {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    s += entry(t, i, j, k) * a[i] * b[j] * cc[k];
                }
            }
        }
        s
    };
    let idx = |a: usize, b: usize, cc: usize| (a * n + b) * n + cc;
    let mut g = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                let (x, y, z) = (c(a), c(b), c(k));
                let g1 = f3(&dc(a), &y, &z);
                let g2 = f3(&x, &dc(b), &z);
                let g3 = f3(&x, &y, &dc(k));
                g[idx(a, b, k)] = g1 * g1 + g2 * g2 + g3 * g3;
            }
        }
    }
    let wrap = |v: usize, o: isize| ((v as isize + o).rem_euclid(n as isize)) as usize;
    let mut found: Vec<OracleTuple> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                let here = g[idx(a, b, k)];
                let mut is_min = true;
                'nb: for oa in -1..=1 {
                    for ob in -1..=1 {
                        for ok in -1..=1 {
                            if (oa, ob, ok) == (0, 0, 0) {
                                continue;
                            }
                            if g[idx(wrap(a, oa), wrap(b, ob), wrap(k, ok))] < here {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_min {
                    if let Some(tu) = refine(t, [c(a), c(b), c(k)]) {
                        push_distinct(&mut found, tu);
                    }
                }
            }
        }
    }
    found.retain(|t| t.value > 1e-6);
    found
}

/// Random multistart refinement for general order-3 tensors.
pub fn multistart_oracle(t: &DenseTensor, starts: usize, seed: u64) -> Vec<OracleTuple> {
    let mut rng = rng_from_seed(seed);
    let mut found = Vec::new();
    for _ in 0..starts {
        let start = [0, 1, 2].map(|q| random_unit(t.dims()[q], &mut rng));
        if let Some(tu) = refine(t, start) {
            if tu.value > 1e-6 {
                push_distinct(&mut found, tu);
            }
        }
    }
    found
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = norm(&v);
        if n > 0.1 && n <= 1.0 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Same tuple up to the sign symmetries that keep the value: per-mode sines
/// and the value agree within `tol`.
pub fn same_tuple(a_value: f64, a: &[Vec<f64>], b_value: f64, b: &[Vec<f64>], tol: f64) -> bool {
    (a_value - b_value).abs() <= tol
        && a.iter()
            .zip(b)
            .all(|(u, v)| sin_angle(u, v).unwrap_or(1.0) <= tol)
}

fn push_distinct(found: &mut Vec<OracleTuple>, t: OracleTuple) {
    if !found
        .iter()
        .any(|f| same_tuple(f.value, &f.vectors, t.value, &t.vectors, 1e-6))
    {
        found.push(t);
    }
}

/// Perturbs every factor by a random orthonormal frame scaled by `scale` and
/// re-orthonormalizes through the polar factor; each value moves by a
/// relative amount up to `scale`.
pub fn perturb_odeco(a: &OdecoTensor, scale: f64, rng: &mut ChaCha8Rng) -> OdecoTensor {
    let d = a.d_min();
    let factors = a
        .factors()
        .iter()
        .map(|u| {
            let noise = random_orthonormal(u.rows(), d, rng);
            let data: Vec<f64> = u
                .as_slice()
                .iter()
                .zip(noise.as_slice())
                .map(|(x, e)| x + scale * e)
                .collect();
            let mixed = Matrix::from_row_major(u.rows(), d, data).unwrap();
            odeco::incoherent::polar_factor(&mixed).unwrap()
        })
        .collect();
    let lambdas = a
        .lambdas()
        .iter()
        .map(|l| l * (1.0 + scale * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    OdecoTensor::new(lambdas, factors).unwrap()
}
