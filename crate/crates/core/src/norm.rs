//! Spectral-norm estimation, `max |<T, a_1 ⊗ … ⊗ a_p>|` over unit vectors.
//!
//! Global maximization is intractable for general tensors, so the value
//! returned here is the best value seen across many randomly started runs of
//! the normalized gradient map. It is always attained by an explicit unit
//! rank-one point and is therefore a certified lower bound on the true norm.
//!
//! Each run updates the factors one mode at a time, always using the freshest
//! values of the other modes. The simultaneous update (every mode computed
//! from the same input point) has the odeco tuples as attracting fixed points
//! but can fall into period-two cycles on general tensors, e.g. the symmetric
//! `e₂⊗e₂⊗e₁ + e₂⊗e₁⊗e₂ + e₁⊗e₂⊗e₂`. The sequential update never decreases
//! `|<T, x>|`, since every step maximizes it over one factor.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{DenseTensor, Rank1Point};
use crate::{rng_from_seed, sub_seed};

/// A trial whose contractions keep vanishing is abandoned after this many
/// fresh draws.
const MAX_REDRAWS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormConfig {
    pub restarts: usize,
    /// Threshold on the largest per-mode sine between successive iterates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            restarts: 1000,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

impl NormConfig {
    pub fn with_restarts(restarts: usize) -> Self {
        Self {
            restarts,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "restarts must be at least 1".into(),
            ));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tol must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NormEstimate {
    pub value: f64,
    pub argmax: Rank1Point,
    /// Trials that met the tolerance before `max_iter`.
    pub converged: usize,
}

struct Trial {
    value: f64,
    point: Rank1Point,
    converged: bool,
}

fn run_trial(t: &DenseTensor, cfg: &NormConfig, seed: u64) -> Trial {
    let mut rng = rng_from_seed(seed);
    let mut x = Rank1Point::random(t.dims(), &mut rng);
    let mut best = Trial {
        value: 0.0,
        point: x.clone(),
        converged: false,
    };
    let mut redraws = 0;
    let mut iter = 0;
    while iter < cfg.max_iter {
        match sweep(t, &x) {
            Ok((y, value)) => {
                if value > best.value {
                    best.value = value;
                    best.point = y.clone();
                }
                let change = max_mode_sin(&x, &y);
                x = y;
                iter += 1;
                if change < cfg.tol {
                    best.converged = true;
                    break;
                }
            }
            Err(_) if redraws < MAX_REDRAWS => {
                redraws += 1;
                iter = 0;
                x = Rank1Point::random(t.dims(), &mut rng);
            }
            Err(_) => return best,
        }
    }
    best
}

/// One mode-by-mode pass. Returns the new point and `|<T, y>|` at it, which
/// equals the norm of the last contraction.
fn sweep(t: &DenseTensor, x: &Rank1Point) -> Result<(Rank1Point, f64)> {
    let mut f = x.factors().to_vec();
    let mut value = 0.0;
    for q in 0..t.order() {
        let mut c = t.contract_except(q, &f)?;
        let n = linalg::normalize(&mut c);
        if !(n > 1e-300) {
            return Err(Error::Degenerate { mode: q, norm: n });
        }
        f[q] = c;
        value = n;
    }
    Ok((Rank1Point::normalized(f)?, value))
}

pub(crate) fn max_mode_sin(x: &Rank1Point, y: &Rank1Point) -> f64 {
    x.factors()
        .iter()
        .zip(y.factors())
        .map(|(a, b)| linalg::sin_angle(a, b).unwrap_or(1.0))
        .fold(0.0, f64::max)
}

/// Multi-start estimate of the spectral norm. Trials run in parallel; trial
/// `i` draws from its own stream derived from `(seed, i)`, so the result does
/// not depend on thread count.
pub fn spectral_norm(t: &DenseTensor, cfg: &NormConfig, seed: u64) -> Result<NormEstimate> {
    cfg.check()?;
    let trials: Vec<Trial> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run_trial(t, cfg, sub_seed(seed, i as u64)))
        .collect();
    let converged = trials.iter().filter(|t| t.converged).count();
    let best = trials
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("restarts >= 1");
    Ok(NormEstimate {
        value: best.value,
        argmax: best.point,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::tensor::random_unit;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn cfg(restarts: usize) -> NormConfig {
        NormConfig::with_restarts(restarts)
    }

    fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..d).map(|_| random_unit(d, rng)).collect();
        linalg::gram_schmidt(&Matrix::from_columns(&cols).unwrap())
    }

    fn odeco321(rng: &mut ChaCha8Rng) -> DenseTensor {
        let u: Vec<Matrix> = (0..3).map(|_| random_orthogonal(3, rng)).collect();
        let mut t = DenseTensor::zeros(&[3, 3, 3]).unwrap();
        for (k, lam) in [3.0, 2.0, 1.0].into_iter().enumerate() {
            let f: Vec<Vec<f64>> = u.iter().map(|m| m.column(k)).collect();
            t.add_rank_one(lam, &f).unwrap();
        }
        t
    }

    #[test]
    fn rank_one_norm_is_its_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f: Vec<Vec<f64>> = (0..3).map(|_| random_unit(4, &mut rng)).collect();
        let t = DenseTensor::rank_one(5.0, &f).unwrap();
        let est = spectral_norm(&t, &cfg(20), 1).unwrap();
        assert!((est.value - 5.0).abs() < 1e-8);
    }

    #[test]
    fn weyl_pair_difference_norm() {
        let mut t = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        t.add_rank_one(2.0, &[e(2, 1), e(2, 1), e(2, 0)]).unwrap();
        t.add_rank_one(2.0, &[e(2, 1), e(2, 0), e(2, 1)]).unwrap();
        t.add_rank_one(2.0, &[e(2, 0), e(2, 1), e(2, 1)]).unwrap();
        let est = spectral_norm(&t, &cfg(200), 7).unwrap();
        assert!(
            (est.value - 4.0 / 3f64.sqrt()).abs() < 1e-6,
            "{}",
            est.value
        );
    }

    #[test]
    fn odeco_norm_is_top_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = odeco321(&mut rng);
        let est = spectral_norm(&t, &cfg(50), 3).unwrap();
        assert!((est.value - 3.0).abs() < 1e-8);
        let top = linalg::dense_svd(&t.matricize(1).unwrap()).sigma[0];
        assert!((top - 3.0).abs() < 1e-8);
        // The argmax really attains the estimate.
        let v = t.rank1_value(&est.argmax).unwrap().abs();
        assert!((v - est.value).abs() < 1e-12);
    }

    #[test]
    fn zero_tensor_and_bad_config() {
        let t = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        assert_eq!(spectral_norm(&t, &cfg(3), 0).unwrap().value, 0.0);
        assert!(spectral_norm(&t, &cfg(0), 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = DenseTensor::random_normal(&[3, 4, 2], &mut rng).unwrap();
        let a = spectral_norm(&t, &cfg(30), 99).unwrap();
        let b = spectral_norm(&t, &cfg(30), 99).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.argmax, b.argmax);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn estimate_dominates_random_probes(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = DenseTensor::random_normal(&[3, 3, 3], &mut rng).unwrap();
            let est = spectral_norm(&t, &cfg(60), seed).unwrap().value;
            for _ in 0..100 {
                let x = Rank1Point::random(&[3, 3, 3], &mut rng);
                prop_assert!(est >= t.rank1_value(&x).unwrap().abs());
            }
        }

        #[test]
        fn invariant_under_single_mode_rotation(seed in any::<u64>(), mode in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = DenseTensor::random_normal(&[3, 3, 3], &mut rng).unwrap();
            let q = random_orthogonal(3, &mut rng);
            let m = q.matmul(&t.matricize(mode).unwrap()).unwrap();
            let rotated = DenseTensor::dematricize(&m, t.dims(), mode).unwrap();
            let a = spectral_norm(&t, &cfg(200), seed).unwrap().value;
            let b = spectral_norm(&rotated, &cfg(200), seed ^ 1).unwrap().value;
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }
}
