//! Non-spiking LASSO and dictionary-learning solvers used as ground truth.
//!
//! The LASSO objective is `1/2 ||phi c - s||^2 + lambda1 ||c||_1`. ISTA takes
//! proximal-gradient steps of size `eta1` (threshold `eta1*lambda1`), so its
//! fixed point is the LASSO minimiser for any admissible step.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::exec::Exec;
use crate::{Error, Result};

pub const ISTA_MAX_ITERS: usize = 10_000;
pub const CD_MAX_SWEEPS: usize = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    pub phi: DMatrix<f64>,
    pub s: DVector<f64>,
    pub lambda1: f64,
    pub eta1: f64,
}

impl LassoProblem {
    pub fn new(phi: DMatrix<f64>, s: DVector<f64>, lambda1: f64, eta1: f64) -> Result<Self> {
        if phi.nrows() != s.len() {
            return Err(Error::dims(format!(
                "phi is {}x{} but s has {} entries",
                phi.nrows(),
                phi.ncols(),
                s.len()
            )));
        }
        if !(lambda1 >= 0.0) || !(eta1 > 0.0) {
            return Err(Error::param(format!(
                "need lambda1 >= 0 and eta1 > 0, got {lambda1}, {eta1}"
            )));
        }
        Ok(LassoProblem {
            phi,
            s,
            lambda1,
            eta1,
        })
    }

    /// Problem with the largest monotone step `1/rho(phi^T phi)`.
    pub fn with_max_step(phi: DMatrix<f64>, s: DVector<f64>, lambda1: f64) -> Result<Self> {
        let rho = gram_spectral_radius(&phi);
        if !(rho > 0.0) {
            return Err(Error::param("phi^T phi is zero"));
        }
        Self::new(phi, s, lambda1, 1.0 / rho)
    }

    pub fn step_is_monotone(&self) -> bool {
        self.eta1 <= 1.0 / gram_spectral_radius(&self.phi) * (1.0 + 1e-12)
    }
}

/// Largest eigenvalue of `phi^T phi`.
pub fn gram_spectral_radius(phi: &DMatrix<f64>) -> f64 {
    let gram = phi.transpose() * phi;
    gram.symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn soft_threshold(x: &DVector<f64>, lambda1: f64) -> DVector<f64> {
    x.map(|v| soft_scalar(v, lambda1))
}

#[inline]
pub fn soft_scalar(v: f64, lambda1: f64) -> f64 {
    if v > lambda1 {
        v - lambda1
    } else if v < -lambda1 {
        v + lambda1
    } else {
        0.0
    }
}

pub fn lasso_objective(phi: &DMatrix<f64>, c: &DVector<f64>, s: &DVector<f64>, lambda1: f64) -> f64 {
    let r = phi * c - s;
    0.5 * r.norm_squared() + lambda1 * c.lp_norm(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IstaResult {
    pub code: DVector<f64>,
    /// Objective after each iteration.
    pub objective: Vec<f64>,
}

/// `iters` ISTA iterations from `c = 0`.
pub fn ista_solve(p: &LassoProblem, iters: usize) -> Result<IstaResult> {
    ista_run(p, iters, None)
}

/// ISTA until the largest coordinate change drops below `tol` or
/// `max_iters` is reached.
pub fn ista_solve_tol(p: &LassoProblem, max_iters: usize, tol: f64) -> Result<IstaResult> {
    ista_run(p, max_iters, Some(tol))
}

fn ista_run(p: &LassoProblem, iters: usize, tol: Option<f64>) -> Result<IstaResult> {
    if iters == 0 {
        return Err(Error::param("ista needs at least one iteration"));
    }
    if !p.step_is_monotone() {
        log::warn!("ISTA step {} exceeds 1/rho(phi^T phi); objective may increase", p.eta1);
    }
    let gram = p.phi.transpose() * &p.phi;
    let b = p.phi.transpose() * &p.s;
    let thr = p.eta1 * p.lambda1;
    let mut c: DVector<f64> = DVector::zeros(p.phi.ncols());
    let mut objective = Vec::with_capacity(iters.min(ISTA_MAX_ITERS));
    for k in 0..iters {
        let grad = &gram * &c - &b;
        let next = soft_threshold(&(&c - p.eta1 * grad), thr);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: k,
                what: "non-finite ISTA iterate".into(),
            });
        }
        let change = (&next - &c).amax();
        c = next;
        objective.push(lasso_objective(&p.phi, &c, &p.s, p.lambda1));
        if tol.is_some_and(|t| change < t) {
            break;
        }
    }
    Ok(IstaResult { code: c, objective })
}

/// Cyclic coordinate descent until the largest coordinate change in a sweep
/// is below `tol`.
pub fn lasso_cd(p: &LassoProblem, tol: f64, max_sweeps: usize) -> Result<DVector<f64>> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tol must be > 0, got {tol}")));
    }
    let m = p.phi.ncols();
    let norms: Vec<f64> = (0..m).map(|j| p.phi.column(j).norm_squared()).collect();
    let mut c: DVector<f64> = DVector::zeros(m);
    let mut resid = p.s.clone(); // s - phi c
    for _ in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..m {
            if norms[j] == 0.0 {
                continue;
            }
            let col = p.phi.column(j);
            let rho = col.dot(&resid) + norms[j] * c[j];
            let new: f64 = soft_scalar(rho, p.lambda1) / norms[j];
            let d = new - c[j];
            if d != 0.0 {
                resid.axpy(-d, &col, 1.0);
                c[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        if max_change < tol {
            return Ok(c);
        }
    }
    Err(Error::NotConverged { iterations: max_sweeps })
}

/// Largest violation of the LASSO optimality conditions at `c`.
pub fn kkt_violation(phi: &DMatrix<f64>, s: &DVector<f64>, c: &DVector<f64>, lambda1: f64) -> f64 {
    let g = phi.transpose() * (s - phi * c);
    g.iter()
        .zip(c.iter())
        .map(|(&gi, &ci)| {
            if ci != 0.0 {
                (gi - lambda1 * ci.signum()).abs()
            } else {
                (gi.abs() - lambda1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `phi - eta2 (phi c - s) c^T - eta2 lambda2 phi`.
pub fn dict_grad_step(phi: &DMatrix<f64>, c: &DVector<f64>, s: &DVector<f64>, eta2: f64, lambda2: f64) -> DMatrix<f64> {
    let e = phi * c - s;
    phi - eta2 * &e * c.transpose() - eta2 * lambda2 * phi
}

/// `w_tilde - (w_tilde - phi^T phi) c c^T`.
pub fn lateral_target_step(w_tilde: &DMatrix<f64>, phi: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let f = (w_tilde - phi.transpose() * phi) * c;
    w_tilde - f * c.transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub seed: u64,
    pub ista_objective: f64,
    pub cd_objective: f64,
    pub gap: f64,
    pub monotone: bool,
    pub same_support: bool,
    pub kkt: f64,
}

/// Random instance: `phi` entries `N(0, 1/n)`, `s` entries `N(0, 1)`.
pub fn random_instance(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("finite sigma");
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let phi = DMatrix::from_fn(n, m, |_, _| a.sample(&mut rng));
    let s = DVector::from_fn(n, |_, _| z.sample(&mut rng));
    (phi, s)
}

/// Cross-check ISTA against coordinate descent on random instances.
pub fn oracle_check(n: usize, m: usize, lambda1: f64, seeds: &[u64], exec: Exec) -> Result<Vec<CheckRow>> {
    exec.map(seeds, |&seed| {
        let (phi, s) = random_instance(n, m, seed);
        let p = LassoProblem::with_max_step(phi, s, lambda1)?;
        let ista = ista_solve(&p, ISTA_MAX_ITERS)?;
        let cd = lasso_cd(&p, 1e-13, 100 * CD_MAX_SWEEPS)?;
        let ista_objective = *ista.objective.last().expect("at least one iteration");
        let cd_objective = lasso_objective(&p.phi, &cd, &p.s, lambda1);
        let monotone = ista.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        let support = |c: &DVector<f64>| c.iter().map(|v| v.abs() > 1e-6).collect::<Vec<_>>();
        Ok(CheckRow {
            seed,
            ista_objective,
            cd_objective,
            gap: (ista_objective - cd_objective).abs(),
            monotone,
            same_support: support(&ista.code) == support(&cd),
            kkt: kkt_violation(&p.phi, &p.s, &ista.code, lambda1),
        })
    })
    .into_iter()
    .collect()
}
