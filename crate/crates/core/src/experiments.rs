//! Seeded simulation studies.
//!
//! Every study is a pure function of its configuration: grid points run in
//! parallel, each on its own sub-seed, and rows come back in grid order. The
//! CSV renderers put the complete configuration in `#` comment lines ahead of
//! the column header so a file can be regenerated from itself.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::decompose::{decompose_odeco, refine_odeco, Deflation, IterationConfig};
use crate::error::{Error, Result};
use crate::incoherent::polar_factor;
use crate::linalg::{dense_svd, Matrix};
use crate::norm::{spectral_norm, NormConfig};
use crate::odeco::{random_orthonormal, OdecoTensor};
use crate::perturb::{self, match_tuples, max_sin_after_matching, PerturbConstants};
use crate::tensor::{random_unit, DenseTensor};
use crate::{rng_from_seed, sub_seed};

/// Shortest round-trip form, switching to exponent notation for very small or
/// very large magnitudes so CSV cells stay short.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Restarts used for spectral norms at desk scale and under `--full`.
pub const DESK_RESTARTS: usize = 200;
pub const FULL_RESTARTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// Correlated odeco pairs: angle error against `‖T̃ − T‖/λ`.
    Figure1,
    /// Diagonal odeco signal plus Gaussian noise, recovered by deflation.
    Figure2,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Figure1 => "figure1",
            Experiment::Figure2 => "figure2",
        }
    }
}

/// Parameters of the two figure studies. Signal strength at grid value `ω`
/// is `λ = ω · d^{3/4}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    pub rank: usize,
    pub order: usize,
    pub omegas: Vec<f64>,
    /// `figure1` mixes in the independent frame with weight `ρ = rho_scale/λ`.
    pub rho_scale: f64,
    /// Standard deviation of the Gaussian noise entries (`figure2`).
    pub noise_sd: f64,
    /// Append a row with the noise switched off (`figure2`).
    pub noise_free_row: bool,
    pub seed: u64,
    pub norm: NormConfig,
    pub iteration: IterationConfig,
    /// Whether the 200-point grid and 1000 norm restarts are in use.
    pub full: bool,
}

/// `{1000/k : k = 1..199} ∪ {5}` in that order.
pub fn full_omega_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (1..200).map(|k| 1000.0 / k as f64).collect();
    g.push(5.0);
    g
}

/// Twenty points of the full grid: `1000/k` for 19 values of `k` spread
/// evenly over `1..=199`, followed by `5`.
pub fn desk_omega_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..19)
        .map(|i| {
            let k = 1 + (i * 198 + 9) / 18;
            1000.0 / k as f64
        })
        .collect();
    g.push(5.0);
    g
}

impl ExperimentConfig {
    pub fn figure1(full: bool, seed: u64) -> Self {
        Self {
            experiment: Experiment::Figure1,
            dim: 20,
            rank: 10,
            order: 3,
            omegas: if full {
                full_omega_grid()
            } else {
                desk_omega_grid()
            },
            rho_scale: 15.0,
            noise_sd: 0.0,
            noise_free_row: false,
            seed,
            norm: NormConfig::with_restarts(if full { FULL_RESTARTS } else { DESK_RESTARTS }),
            iteration: IterationConfig::default(),
            full,
        }
    }

    pub fn figure2(full: bool, seed: u64) -> Self {
        Self {
            experiment: Experiment::Figure2,
            noise_sd: 1.0,
            noise_free_row: true,
            iteration: IterationConfig {
                deflation: Deflation::Subtract,
                ..IterationConfig::default()
            },
            ..Self::figure1(full, seed)
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.omegas.is_empty() {
            return Err(Error::InvalidParameter("omega grid is empty".into()));
        }
        if let Some(w) = self.omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "grid value {w} is not positive"
            )));
        }
        if self.order < 2 || self.rank == 0 || self.rank > self.dim {
            return Err(Error::InvalidParameter(format!(
                "need order >= 2 and 1 <= rank <= dim (order {}, rank {}, dim {})",
                self.order, self.rank, self.dim
            )));
        }
        if !(self.rho_scale >= 0.0) || !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidParameter(
                "rho_scale and noise_sd must be >= 0".into(),
            ));
        }
        self.iteration.check()
    }

    pub fn lambda(&self, omega: f64) -> f64 {
        omega * (self.dim as f64).powf(0.75)
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.dim; self.order]
    }

    fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# experiment={} d={} r={} p={} seed={} full={} grid_points={}",
            self.experiment.name(),
            self.dim,
            self.rank,
            self.order,
            self.seed,
            self.full,
            self.omegas.len()
        );
        let _ = writeln!(
            s,
            "# lambda=omega*d^0.75 rho={}/lambda noise_sd={} norm_restarts={} norm_tol={} norm_max_iter={}",
            num(self.rho_scale), num(self.noise_sd), self.norm.restarts, num(self.norm.tol), self.norm.max_iter
        );
        let _ = writeln!(
            s,
            "# iteration_tol={} iteration_max_iter={} iteration_restarts={} deflation={:?}",
            num(self.iteration.tol),
            self.iteration.max_iter,
            self.iteration.restarts,
            self.iteration.deflation
        );
        s
    }
}

/// Spectral norm of `t`, re-estimated with ten times the restarts when
/// `needs_more` rejects the first value. Returns the larger estimate and
/// whether a second pass ran.
fn norm_with_retry(
    t: &DenseTensor,
    cfg: &NormConfig,
    seed: u64,
    needs_more: impl Fn(f64) -> bool,
) -> Result<(f64, bool)> {
    let first = spectral_norm(t, cfg, seed)?.value;
    if !needs_more(first) {
        return Ok((first, false));
    }
    let more = NormConfig {
        restarts: cfg.restarts * 10,
        ..*cfg
    };
    let second = spectral_norm(t, &more, sub_seed(seed, u64::MAX))?.value;
    Ok((first.max(second), true))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure1Row {
    pub omega: f64,
    pub lambda: f64,
    pub rho: f64,
    pub delta_over_lambda: f64,
    pub max_sin_angle: f64,
    /// `max_sin_angle / delta_over_lambda`
    pub ratio: f64,
    pub reestimated: bool,
}

impl Figure1Row {
    pub fn pass(&self) -> bool {
        self.max_sin_angle <= self.delta_over_lambda
    }
}

fn figure1_point(cfg: &ExperimentConfig, omega: f64, seed: u64) -> Result<Figure1Row> {
    let lambda = cfg.lambda(omega);
    let rho = cfg.rho_scale / lambda;
    if rho >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "omega {omega} gives mixing weight {rho} >= 1"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let keep = (1.0 - rho * rho).sqrt();
    let mut base = Vec::with_capacity(cfg.order);
    let mut moved = Vec::with_capacity(cfg.order);
    for _ in 0..cfg.order {
        let u = random_orthonormal(cfg.dim, cfg.rank, &mut rng);
        let other = random_orthonormal(cfg.dim, cfg.rank, &mut rng);
        let mixed = Matrix::from_row_major(
            cfg.dim,
            cfg.rank,
            u.as_slice()
                .iter()
                .zip(other.as_slice())
                .map(|(a, b)| keep * a + rho * b)
                .collect(),
        )?;
        moved.push(polar_factor(&mixed)?);
        base.push(u);
    }
    let a = OdecoTensor::new(vec![lambda; cfg.rank], base)?;
    let b = OdecoTensor::new(vec![lambda; cfg.rank], moved)?;
    let matching = match_tuples(&a, &b)?;
    let max_sin = max_sin_after_matching(&a, &b, &matching, cfg.rank);
    let diff = b.to_dense().sub(&a.to_dense())?;
    let (delta, reestimated) = norm_with_retry(&diff, &cfg.norm, sub_seed(seed, 1), |d| {
        max_sin > d / lambda
    })?;
    let x = delta / lambda;
    Ok(Figure1Row {
        omega,
        lambda,
        rho,
        delta_over_lambda: x,
        max_sin_angle: max_sin,
        ratio: max_sin / x,
        reestimated,
    })
}

pub fn figure1(cfg: &ExperimentConfig) -> Result<Vec<Figure1Row>> {
    cfg.check()?;
    cfg.omegas
        .par_iter()
        .enumerate()
        .map(|(i, &w)| figure1_point(cfg, w, sub_seed(cfg.seed, i as u64)))
        .collect()
}

pub fn figure1_csv(cfg: &ExperimentConfig, rows: &[Figure1Row]) -> String {
    let mut s = cfg.header();
    s.push_str("omega,lambda,rho,delta_over_lambda,max_sin_angle,ratio,reestimated,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(r.omega),
            num(r.lambda),
            num(r.rho),
            num(r.delta_over_lambda),
            num(r.max_sin_angle),
            num(r.ratio),
            r.reestimated as u8,
            r.pass() as u8
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure2Row {
    pub omega: f64,
    pub lambda: f64,
    /// Whether noise was added (the final row of a default run has none).
    pub noisy: bool,
    /// Tuples accepted by the deflation stage.
    pub found: usize,
    pub max_sin_angle: f64,
    /// Estimated `‖T̂ − T‖/λ`.
    pub tensor_error: f64,
    /// Estimated `‖E‖/λ`.
    pub noise_over_lambda: f64,
    /// `max_sin_angle / noise_over_lambda`, NaN without noise.
    pub angle_over_noise: f64,
}

fn figure2_point(
    cfg: &ExperimentConfig,
    omega: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Figure2Row> {
    let lambda = cfg.lambda(omega);
    let dims = cfg.dims();
    let keep: Vec<usize> = (0..cfg.rank).collect();
    let frame = Matrix::identity(cfg.dim).select_columns(&keep);
    let truth = OdecoTensor::new(vec![lambda; cfg.rank], vec![frame; cfg.order])?;
    let mut rng = rng_from_seed(seed);
    let noise = DenseTensor::random_normal(&dims, &mut rng)?.scale(noise_sd);
    let x = truth.to_dense().add(&noise)?;

    let iteration = IterationConfig {
        deflation: Deflation::Subtract,
        ..cfg.iteration
    };
    let rough = decompose_odeco(&x, cfg.rank, &iteration, sub_seed(seed, 1))?;
    let estimate = refine_odeco(&x, &rough.odeco, cfg.rank, &iteration)?;

    let r = cfg.rank.min(estimate.d_min());
    let matching = match_tuples(&truth, &estimate)?;
    let max_sin = max_sin_after_matching(&truth, &estimate, &matching, r);
    let err = estimate.to_dense().sub(&truth.to_dense())?;
    let tensor_error = spectral_norm(&err, &cfg.norm, sub_seed(seed, 2))?.value / lambda;
    let noise_norm = spectral_norm(&noise, &cfg.norm, sub_seed(seed, 3))?.value;
    let noise_over_lambda = noise_norm / lambda;
    Ok(Figure2Row {
        omega,
        lambda,
        noisy: noise_sd > 0.0,
        found: rough.found,
        max_sin_angle: max_sin,
        tensor_error,
        noise_over_lambda,
        angle_over_noise: if noise_norm > 0.0 {
            max_sin / noise_over_lambda
        } else {
            f64::NAN
        },
    })
}

/// Runs the grid, then (if configured) one noise-free point at the largest
/// grid value.
pub fn figure2(cfg: &ExperimentConfig) -> Result<Vec<Figure2Row>> {
    cfg.check()?;
    let mut points: Vec<(f64, f64)> = cfg.omegas.iter().map(|&w| (w, cfg.noise_sd)).collect();
    if cfg.noise_free_row {
        let top = cfg.omegas.iter().copied().fold(f64::MIN, f64::max);
        points.push((top, 0.0));
    }
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(w, sd))| figure2_point(cfg, w, sd, sub_seed(cfg.seed, i as u64)))
        .collect()
}

pub fn figure2_csv(cfg: &ExperimentConfig, rows: &[Figure2Row]) -> String {
    let mut s = cfg.header();
    s.push_str(
        "# pipeline: subtract-mode deflation, then every tuple re-refined on the observed tensor\n",
    );
    s.push_str(
        "# accuracy metric is ambiguous: both max_sin_angle and tensor_error=|T_hat-T|/lambda are given\n",
    );
    s.push_str(
        "omega,lambda,noisy,found,max_sin_angle,tensor_error,noise_over_lambda,angle_over_noise\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(r.omega),
            num(r.lambda),
            r.noisy as u8,
            r.found,
            num(r.max_sin_angle),
            num(r.tensor_error),
            num(r.noise_over_lambda),
            num(r.angle_over_noise)
        );
    }
    s
}

/// Settings for the dimension sweep under the model `X = T + E`, where `T`
/// has `rank` equal values `λ = snr · √(p·d)` and `E` is standard Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct RatesConfig {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub order: usize,
    pub snr: f64,
    pub draws: usize,
    pub seed: u64,
    pub norm: NormConfig,
    pub iteration: IterationConfig,
}

impl RatesConfig {
    pub fn new(full: bool, seed: u64) -> Self {
        Self {
            dims: vec![8, 12, 16, 20],
            rank: 3,
            order: 3,
            snr: 8.0,
            draws: 20,
            seed,
            norm: NormConfig::with_restarts(if full { FULL_RESTARTS } else { DESK_RESTARTS }),
            iteration: IterationConfig {
                deflation: Deflation::Subtract,
                ..IterationConfig::default()
            },
        }
    }

    fn check(&self) -> Result<()> {
        if self.dims.is_empty() || self.draws == 0 || !(self.snr > 0.0) {
            return Err(Error::InvalidParameter(
                "need at least one dimension, one draw and positive snr".into(),
            ));
        }
        if self.dims.iter().any(|&d| d < self.rank) || self.order < 2 {
            return Err(Error::InvalidParameter("rank exceeds a dimension".into()));
        }
        self.iteration.check()
    }
}

/// Envelope multiple and halving window the rates study is judged by.
pub const RATES_ENVELOPE: f64 = 3.0;
pub const HALVING_WINDOW: (f64, f64) = (0.375, 0.625);
pub const NOISE_RATIO_WINDOW: (f64, f64) = (0.5, 2.0);

#[derive(Clone, Debug, PartialEq)]
pub struct RatesRow {
    pub dim: usize,
    pub d_total: usize,
    pub lambda: f64,
    /// `√(Σd)/λ`
    pub bound: f64,
    pub mean_max_sin: f64,
    /// Same draws with the signal doubled.
    pub mean_max_sin_double: f64,
    /// Mean of `‖E‖/√(Σd)` over the draws.
    pub noise_ratio: f64,
}

impl RatesRow {
    pub fn envelope_ratio(&self) -> f64 {
        self.mean_max_sin / self.bound
    }

    /// Error at `2λ` over error at `λ`; ideally one half.
    pub fn halving_ratio(&self) -> f64 {
        self.mean_max_sin_double / self.mean_max_sin
    }

    pub fn pass(&self) -> bool {
        let h = self.halving_ratio();
        self.envelope_ratio() <= RATES_ENVELOPE
            && (HALVING_WINDOW.0..=HALVING_WINDOW.1).contains(&h)
            && (NOISE_RATIO_WINDOW.0..=NOISE_RATIO_WINDOW.1).contains(&self.noise_ratio)
    }
}

fn recover_max_sin(
    truth: &OdecoTensor,
    x: &DenseTensor,
    r: usize,
    cfg: &IterationConfig,
    seed: u64,
) -> Result<f64> {
    let rough = decompose_odeco(x, r, cfg, seed)?;
    let est = refine_odeco(x, &rough.odeco, r, cfg)?;
    let m = match_tuples(truth, &est)?;
    Ok(max_sin_after_matching(truth, &est, &m, r))
}

/// One draw: `(max sin at λ, max sin at 2λ, ‖E‖)`, sharing factors and noise.
fn rates_draw(cfg: &RatesConfig, d: usize, lambda: f64, seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = rng_from_seed(seed);
    let dims = vec![d; cfg.order];
    let factors: Vec<Matrix> = (0..cfg.order)
        .map(|_| random_orthonormal(d, cfg.rank, &mut rng))
        .collect();
    let noise = DenseTensor::random_normal(&dims, &mut rng)?;
    let t1 = OdecoTensor::new(vec![lambda; cfg.rank], factors.clone())?;
    let t2 = OdecoTensor::new(vec![2.0 * lambda; cfg.rank], factors)?;
    let s1 = recover_max_sin(
        &t1,
        &t1.to_dense().add(&noise)?,
        cfg.rank,
        &cfg.iteration,
        sub_seed(seed, 1),
    )?;
    let s2 = recover_max_sin(
        &t2,
        &t2.to_dense().add(&noise)?,
        cfg.rank,
        &cfg.iteration,
        sub_seed(seed, 1),
    )?;
    let e = spectral_norm(&noise, &cfg.norm, sub_seed(seed, 2))?.value;
    Ok((s1, s2, e))
}

pub fn svd_rates(cfg: &RatesConfig) -> Result<Vec<RatesRow>> {
    cfg.check()?;
    cfg.dims
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let d_total = d * cfg.order;
            let root = (d_total as f64).sqrt();
            let lambda = cfg.snr * root;
            let point_seed = sub_seed(cfg.seed, i as u64);
            let draws = (0..cfg.draws)
                .into_par_iter()
                .map(|j| rates_draw(cfg, d, lambda, sub_seed(point_seed, j as u64)))
                .collect::<Result<Vec<_>>>()?;
            let n = cfg.draws as f64;
            Ok(RatesRow {
                dim: d,
                d_total,
                lambda,
                bound: root / lambda,
                mean_max_sin: draws.iter().map(|x| x.0).sum::<f64>() / n,
                mean_max_sin_double: draws.iter().map(|x| x.1).sum::<f64>() / n,
                noise_ratio: draws.iter().map(|x| x.2 / root).sum::<f64>() / n,
            })
        })
        .collect()
}

pub fn svd_rates_csv(cfg: &RatesConfig, rows: &[RatesRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# experiment=svd-rates r={} p={} lambda=snr*sqrt(d_total) snr={} draws={} seed={}",
        cfg.rank,
        cfg.order,
        num(cfg.snr),
        cfg.draws,
        cfg.seed
    );
    let _ = writeln!(
        s,
        "# norm_restarts={} iteration_tol={} iteration_max_iter={} iteration_restarts={}",
        cfg.norm.restarts,
        num(cfg.iteration.tol),
        cfg.iteration.max_iter,
        cfg.iteration.restarts
    );
    let _ = writeln!(
        s,
        "# pass: envelope_ratio<={} halving_ratio in [{},{}] noise_ratio in [{},{}]",
        RATES_ENVELOPE,
        HALVING_WINDOW.0,
        HALVING_WINDOW.1,
        NOISE_RATIO_WINDOW.0,
        NOISE_RATIO_WINDOW.1
    );
    s.push_str("d,d_total,lambda,bound,mean_max_sin,envelope_ratio,mean_max_sin_double,halving_ratio,noise_ratio,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.dim,
            r.d_total,
            num(r.lambda),
            num(r.bound),
            num(r.mean_max_sin),
            num(r.envelope_ratio()),
            num(r.mean_max_sin_double),
            num(r.halving_ratio()),
            num(r.noise_ratio),
            r.pass() as u8
        );
    }
    s
}

/// A named comparison of a computed quantity with its closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl GoldenCheck {
    pub fn pass(&self) -> bool {
        (self.computed - self.expected).abs() <= self.tolerance
    }
}

fn e(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

/// `λ = 2` on `e₁⊗e₁⊗e₁` against `2√2` on both `(e₁ ± e₂)/√2` frames.
pub fn weyl_pair() -> Result<(OdecoTensor, OdecoTensor)> {
    let a = OdecoTensor::new(vec![2.0], vec![Matrix::from_columns(&[e(2, 0)])?; 3])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = Matrix::from_columns(&[vec![s, s], vec![s, -s]])?;
    let l = 2.0 * 2f64.sqrt();
    let b = OdecoTensor::new(vec![l, l], vec![u; 3])?;
    Ok((a, b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylReport {
    pub delta: GoldenCheck,
    pub gap: GoldenCheck,
}

impl WeylReport {
    /// Both constants reproduced and the value gap really exceeds `Δ`.
    pub fn pass(&self) -> bool {
        self.delta.pass() && self.gap.pass() && self.gap.computed > self.delta.computed
    }
}

/// The largest matched value gap exceeds the norm of the perturbation.
pub fn weyl_counterexample(norm: &NormConfig, seed: u64) -> Result<WeylReport> {
    let (a, b) = weyl_pair()?;
    let delta = perturb::delta_norm(&a, &b, norm, seed)?;
    let m = match_tuples(&a, &b)?;
    let gap = (0..a.d_min())
        .map(|k| (a.lambdas()[k] - b.lambdas()[m.pi[k]]).abs())
        .fold(0.0, f64::max);
    Ok(WeylReport {
        delta: GoldenCheck {
            name: "weyl_delta",
            computed: delta,
            expected: 4.0 / 3f64.sqrt(),
            tolerance: 1e-6,
        },
        gap: GoldenCheck {
            name: "weyl_gap",
            computed: gap,
            expected: 2.0 * 2f64.sqrt(),
            tolerance: 1e-12,
        },
    })
}

/// The pair `λ Σ_{i<d} e_i^{⊗3}` and `λ Σ_{i<d} (e_i + v) ⊗ e_i ⊗ e_i` with
/// `v = e_d/√(d−1) − (e₁ + … + e_{d−1})/(d−1)`. Both are odeco.
pub fn matricization_pair(d: usize, lambda: f64) -> Result<(OdecoTensor, OdecoTensor)> {
    if d < 2 {
        return Err(Error::InvalidParameter("need d >= 2".into()));
    }
    let m = (d - 1) as f64;
    let mut v = vec![-1.0 / m; d];
    v[d - 1] = 1.0 / m.sqrt();
    let plain: Vec<Vec<f64>> = (0..d - 1).map(|i| e(d, i)).collect();
    let shifted: Vec<Vec<f64>> = plain
        .iter()
        .map(|c| c.iter().zip(&v).map(|(a, b)| a + b).collect())
        .collect();
    let basis = Matrix::from_columns(&plain)?;
    let a = OdecoTensor::new(vec![lambda; d - 1], vec![basis.clone(); 3])?;
    let b = OdecoTensor::new(
        vec![lambda; d - 1],
        vec![Matrix::from_columns(&shifted)?, basis.clone(), basis],
    )?;
    Ok((a, b))
}

/// `‖Mat₁(T − T̃)‖ / ‖T − T̃‖` for [`matricization_pair`]; equals `√(d−1)`.
pub fn matricization_gap(d: usize, norm: &NormConfig, seed: u64) -> Result<GoldenCheck> {
    let (a, b) = matricization_pair(d, 1.0)?;
    let diff = a.to_dense().sub(&b.to_dense())?;
    let flat = dense_svd(&diff.matricize(0)?).sigma[0];
    let tensor = spectral_norm(&diff, norm, seed)?.value;
    Ok(GoldenCheck {
        name: "matricization_ratio",
        computed: flat / tensor,
        expected: ((d - 1) as f64).sqrt(),
        tolerance: 1e-6,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxReport {
    pub dim: usize,
    pub lambda: f64,
    pub expected: f64,
    /// Inner maximum at the symmetric first-mode vector.
    pub symmetric_value: f64,
    /// Smallest inner maximum over the random probes.
    pub probe_min: f64,
    pub probes: usize,
}

impl MinMaxReport {
    pub fn pass(&self) -> bool {
        (self.symmetric_value - self.expected).abs() <= 1e-9
            && self.probe_min >= self.expected - 1e-9
    }
}

/// `max_{y,z} <T, x ⊗ y ⊗ z>` for an order-3 tensor: the top singular value
/// of the slice `T ×₁ x`.
pub fn inner_max(t: &DenseTensor, x: &[f64]) -> Result<f64> {
    if t.order() != 3 {
        return Err(Error::InvalidParameter(
            "inner_max needs an order-3 tensor".into(),
        ));
    }
    let (dims, values) = t.contract_mode(0, x)?;
    let slice = Matrix::from_row_major(dims[0], dims[1], values)?;
    Ok(dense_svd(&slice).sigma.first().copied().unwrap_or(0.0))
}

/// For a `d×d×d` odeco tensor whose `d` values all equal `λ`, the min over
/// unit `x` of [`inner_max`] is `λ/√d`, attained where `x` has equal weight on
/// every first-mode vector.
pub fn min_max_value(d: usize, lambda: f64, probes: usize, seed: u64) -> Result<MinMaxReport> {
    let mut rng = rng_from_seed(seed);
    let factors: Vec<Matrix> = (0..3).map(|_| random_orthonormal(d, d, &mut rng)).collect();
    let t = OdecoTensor::new(vec![lambda; d], factors)?;
    let dense = t.to_dense();
    let c = vec![1.0 / (d as f64).sqrt(); d];
    let symmetric = t.factor(0).matvec(&c);
    let symmetric_value = inner_max(&dense, &symmetric)?;
    let mut probe_min = f64::INFINITY;
    for _ in 0..probes {
        let x = random_unit(d, &mut rng);
        probe_min = probe_min.min(inner_max(&dense, &x)?);
    }
    Ok(MinMaxReport {
        dim: d,
        lambda,
        expected: lambda / (d as f64).sqrt(),
        symmetric_value,
        probe_min,
        probes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexamples {
    pub weyl: WeylReport,
    pub matricization: GoldenCheck,
    pub min_max: MinMaxReport,
}

impl Counterexamples {
    pub fn pass(&self) -> bool {
        self.weyl.pass() && self.matricization.pass() && self.min_max.pass()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let flag = |b: bool| if b { "ok" } else { "FAILED" };
        for g in [&self.weyl.delta, &self.weyl.gap, &self.matricization] {
            let _ = writeln!(
                s,
                "{}: computed={} expected={} tol={} {}",
                g.name,
                num(g.computed),
                num(g.expected),
                num(g.tolerance),
                flag(g.pass())
            );
        }
        let _ = writeln!(
            s,
            "weyl_gap_exceeds_delta: {} > {} {}",
            num(self.weyl.gap.computed),
            num(self.weyl.delta.computed),
            flag(self.weyl.gap.computed > self.weyl.delta.computed)
        );
        let m = &self.min_max;
        let _ = writeln!(
            s,
            "min_max d={} lambda={}: expected={} symmetric={} probe_min={} probes={} {}",
            m.dim,
            num(m.lambda),
            num(m.expected),
            num(m.symmetric_value),
            num(m.probe_min),
            m.probes,
            flag(m.pass())
        );
        s
    }
}

pub fn counterexamples(norm: &NormConfig, seed: u64) -> Result<Counterexamples> {
    Ok(Counterexamples {
        weyl: weyl_counterexample(norm, sub_seed(seed, 0))?,
        matricization: matricization_gap(20, norm, sub_seed(seed, 1))?,
        min_max: min_max_value(4, 1.0, 10_000, sub_seed(seed, 2))?,
    })
}

/// `ε = step, 2·step, …, upper`.
pub fn epsilon_grid(step: f64, upper: f64) -> Vec<f64> {
    let n = (upper / step).round() as usize;
    (1..=n).map(|i| i as f64 * step).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsTable {
    pub order: usize,
    pub rows: Vec<PerturbConstants>,
    pub best: PerturbConstants,
    /// Smallest grid `ε` from which `c_ε` never increases to the end of the
    /// grid.
    pub decreasing_from: Option<f64>,
}

pub fn constants_table(grid: &[f64], p: usize) -> Result<ConstantsTable> {
    let rows = grid
        .iter()
        .map(|&eps| perturb::constants(eps, p))
        .collect::<Result<Vec<_>>>()?;
    let best = perturb::minimize_objective(grid, p)?;
    let mut start = rows.len();
    while start > 1 && rows[start - 1].c_epsilon <= rows[start - 2].c_epsilon {
        start -= 1;
    }
    let decreasing_from = (rows.len() > 1 && start < rows.len()).then(|| rows[start - 1].epsilon);
    Ok(ConstantsTable {
        order: p,
        rows,
        best,
        decreasing_from,
    })
}

impl ConstantsTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# p={} argmin_epsilon={} min_objective={} c_epsilon_nonincreasing_from={}",
            self.order,
            num(self.best.epsilon),
            num(self.best.objective),
            self.decreasing_from
                .map_or("none".to_string(), |e| e.to_string())
        );
        s.push_str("epsilon,c_epsilon,objective,h1_inv,h2_inv,h3_inv,h4_inv\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                num(r.epsilon),
                num(r.c_epsilon),
                num(r.objective),
                num(r.h1_inv),
                num(r.h2_inv),
                num(r.h3_inv),
                num(r.h4_inv)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_norm() -> NormConfig {
        NormConfig::with_restarts(40)
    }

    #[test]
    fn grids() {
        let full = full_omega_grid();
        assert_eq!(full.len(), 200);
        assert_eq!(full[0], 1000.0);
        assert_eq!(full[198], 1000.0 / 199.0);
        assert_eq!(full[199], 5.0);
        let desk = desk_omega_grid();
        assert_eq!(desk.len(), 20);
        assert_eq!(desk[0], 1000.0);
        assert_eq!(desk[18], 1000.0 / 199.0);
        assert!(desk.iter().all(|w| full.contains(w)));
        assert!(desk.windows(2).take(18).all(|p| p[0] > p[1]));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::figure1(false, 1);
        assert!(cfg.check().is_ok());
        cfg.omegas.clear();
        assert!(cfg.check().is_err());
        let mut cfg = ExperimentConfig::figure2(false, 1);
        cfg.omegas = vec![-1.0];
        assert!(cfg.check().is_err());
    }

    #[test]
    fn figure1_small_grid_is_deterministic_and_bounded() {
        let mut cfg = ExperimentConfig::figure1(false, 5);
        cfg.omegas = vec![1000.0, 50.0];
        cfg.norm = fast_norm();
        let a = figure1(&cfg).unwrap();
        let b = figure1(&cfg).unwrap();
        assert_eq!(figure1_csv(&cfg, &a), figure1_csv(&cfg, &b));
        for r in &a {
            assert!(r.pass(), "{r:?}");
            assert!(r.ratio > 0.5);
        }
    }

    #[test]
    fn figure2_noise_free_row_is_exact() {
        let mut cfg = ExperimentConfig::figure2(false, 3);
        cfg.dim = 6;
        cfg.rank = 3;
        cfg.omegas = vec![100.0];
        cfg.norm = fast_norm();
        let rows = figure2(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        let clean = &rows[1];
        assert!(!clean.noisy);
        assert!(clean.max_sin_angle < 1e-8, "{clean:?}");
        assert!(clean.tensor_error < 1e-8);
        assert!(clean.angle_over_noise.is_nan());
        assert!(rows[0].max_sin_angle <= 2.0 * rows[0].noise_over_lambda);
    }

    #[test]
    fn golden_counterexamples() {
        let w = weyl_counterexample(&NormConfig::with_restarts(200), 0).unwrap();
        assert!(w.pass(), "{w:?}");
        let m = matricization_gap(5, &fast_norm(), 0).unwrap();
        assert!(m.pass(), "{m:?}");
        let mm = min_max_value(4, 1.0, 2000, 1).unwrap();
        assert!(mm.pass(), "{mm:?}");
        assert!((mm.expected - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matricization_pair_is_odeco() {
        let (a, b) = matricization_pair(7, 2.0).unwrap();
        assert!(a.validate().is_valid(1e-12));
        assert!(b.validate().is_valid(1e-12));
    }

    #[test]
    fn constants_table_minimum() {
        let table = constants_table(&epsilon_grid(0.01, 6.0), 3).unwrap();
        assert!((16.0..=17.0).contains(&table.best.objective));
        assert!((2.7..=3.2).contains(&table.best.epsilon));
        assert!(table.rows.iter().all(|r| r.objective >= 1.0 + r.epsilon));
        assert!(table.decreasing_from.is_some());
        assert!(table.to_csv().lines().count() == table.rows.len() + 2);
    }
}
