//! Spectral Newton solver for `Δ_{S²}u = C − h·eᵘ`.
//!
//! The residual R(u) = Δu − C + h·eᵘ is driven to zero by damped Newton
//! steps. Each step solves the linearization
//!
//! ```text
//! Δδ + h·eᵘ·δ = −R(u)
//! ```
//!
//! as a Galerkin system in spherical-harmonic coefficients (matrix-free
//! GMRES with an inverse-Laplacian-type preconditioner). The l = 0 row of
//! that system is the linearized integral constraint ∫h·eᵘ dΩ = 4πC, so
//! the mean component of the update is determined by the constraint
//! rather than by a separate Lagrange-multiplier loop.
//!
//! Non-convergence is a recorded outcome, never an exception and never
//! interpreted as a proof of non-existence.
//!
//! ```
//! use kwgyre::grid::{build_grid, ScalarField};
//! use kwgyre::solver::{solve, SolverConfig};
//!
//! // h ≡ C: u = 0 is the exact solution, found without iterating
//! let grid = build_grid(16, 32)?;
//! let h = ScalarField::constant(&grid, 1.5);
//! let cfg = SolverConfig { lmax: 15, ..Default::default() };
//! let sol = solve(&h, 1.5, &cfg)?;
//! assert!(sol.converged);
//! assert!(sol.u.max_abs() < 1e-10);
//! assert!(sol.residual_maxnorm <= cfg.tol);
//! # Ok::<(), kwgyre::Error>(())
//! ```

use crate::grid::{build_grid, grad_dot, integrate, ScalarField};
use crate::gyre::GyreParams;
use crate::harmonics::{analyze, laplacian, synthesize, SpectralCoeffs};
use crate::{Error, Result};
use serde::Serialize;

/// Iterates leaving this band are treated as blow-up and the step is
/// rejected.
const U_CLAMP: f64 = 40.0;

#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// Constraint-consistent constant ln(4πC/∫h dΩ) when C > 0 and the
    /// integral is positive, zero otherwise.
    Default,
    Zero,
    Constant(f64),
    Field(ScalarField),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Spectral degree of the Newton linearization.
    pub lmax: usize,
    pub max_iters: usize,
    /// Absolute tolerance on max|Δu − C + h·eᵘ|.
    pub tol: f64,
    /// Initial Newton step fraction in (0, 1].
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lmax: 63,
            max_iters: 30,
            tol: 1e-10,
            damping: 1.0,
            initial_guess: InitialGuess::Default,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument("damping must be in (0, 1]".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one solve. `converged` implies the residual is at
/// tolerance and the integral constraint holds to 1e−6 relative.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub residual_maxnorm: f64,
    pub kw_residuals: [f64; 3],
    /// ∫h·eᵘ dΩ − 4πC.
    pub constraint_residual: f64,
    pub j_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// max-norm of the Newton residual after each accepted step.
    pub residual_history: Vec<f64>,
    pub message: String,
}

/// Metadata block exported alongside the solution field.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionMeta {
    pub c_value: f64,
    pub residual_maxnorm: f64,
    pub kw_residuals: [f64; 3],
    pub constraint_residual: f64,
    pub j_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl Solution {
    pub fn meta(&self, c: f64) -> SolutionMeta {
        SolutionMeta {
            c_value: c,
            residual_maxnorm: self.residual_maxnorm,
            kw_residuals: self.kw_residuals,
            constraint_residual: self.constraint_residual,
            j_value: self.j_value,
            iterations: self.iterations,
            converged: self.converged,
            message: self.message.clone(),
        }
    }
}

/// The variational functional J[u] = ∫(½|∇u|² + C·u) dΩ.
pub fn functional_j(u: &ScalarField, c: f64) -> Result<f64> {
    let gd = grad_dot(u, u)?;
    let integrand = gd.zip_with(u, |g, uu| 0.5 * g + c * uu)?;
    Ok(integrate(&integrand))
}

/// Constant solution ψ_const = d⁻¹·ln(−g/c) of the rotation-free model,
/// present exactly when g/c < 0.
pub fn constant_solution(p: &GyreParams) -> Option<f64> {
    if p.g / p.c < 0.0 {
        Some((-p.g / p.c).ln() / p.d)
    } else {
        None
    }
}

fn newton_residual(u: &ScalarField, h: &ScalarField, c: f64) -> Result<ScalarField> {
    let lap = laplacian(u)?;
    let heu = h.zip_with(u, |hh, uu| hh * uu.exp())?;
    lap.zip_with(&heu, |l, s| l - c + s)
}

/// Solve `Δu = C − h·eᵘ` by damped spectral Newton iteration.
///
/// On failure the returned `Solution` has `converged = false` and a
/// diagnostic message; errors are reserved for invalid inputs.
pub fn solve(h: &ScalarField, c: f64, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if h.max_abs() == 0.0 {
        return Err(Error::InvalidArgument(
            "h is identically zero (trivial case excluded)".into(),
        ));
    }
    let grid = h.grid();
    if cfg.lmax + 1 > grid.nlat() {
        return Err(Error::DegreeTooLarge {
            lmax: cfg.lmax,
            nlat: grid.nlat(),
        });
    }

    let mut u = match &cfg.initial_guess {
        InitialGuess::Zero => ScalarField::constant(grid, 0.0),
        InitialGuess::Constant(v) => ScalarField::constant(grid, *v),
        InitialGuess::Field(f) => {
            if !f.grid().same_grid(grid) {
                return Err(Error::GridMismatch);
            }
            f.clone()
        }
        InitialGuess::Default => {
            let hint = integrate(h);
            let four_pi_c = 4.0 * std::f64::consts::PI * c;
            if c > 0.0 && hint > 0.0 && four_pi_c / hint > 0.0 {
                ScalarField::constant(grid, (four_pi_c / hint).ln())
            } else {
                ScalarField::constant(grid, 0.0)
            }
        }
    };

    let mut history = Vec::new();
    let mut message = String::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut rmax = newton_residual(&u, h, c)?.max_abs();
    history.push(rmax);

    for iter in 0..cfg.max_iters {
        if rmax <= cfg.tol {
            converged = true;
            break;
        }
        iterations = iter + 1;

        let residual = newton_residual(&u, h, c)?;
        let w = h.zip_with(&u, |hh, uu| hh * uu.exp())?;
        let rhs = analyze(&residual.scale(-1.0), cfg.lmax)?;
        let delta_coeffs = match solve_linearized(&w, &rhs, cfg.lmax) {
            Ok(d) => d,
            Err(e) => {
                message = format!("linear solve failed at iteration {iterations}: {e}");
                break;
            }
        };
        let delta = synthesize(&delta_coeffs, grid)?;

        // backtracking on the residual max-norm
        let mut step = cfg.damping;
        let mut accepted = false;
        for _ in 0..9 {
            let trial = u.zip_with(&delta, |a, b| a + step * b)?;
            let (tmax, _) = trial.max_node();
            let (tmin, _) = trial.min_node();
            if tmax.abs() > U_CLAMP || tmin.abs() > U_CLAMP {
                step *= 0.5;
                continue;
            }
            let tr = newton_residual(&trial, h, c)?.max_abs();
            if tr.is_finite() && tr < rmax * (1.0 - 0.25 * step) {
                u = trial;
                rmax = tr;
                history.push(rmax);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            message = format!(
                "Newton stalled at iteration {iterations} (residual {rmax:.3e}); \
                 blow-up guard |u| <= {U_CLAMP} or no descent step"
            );
            break;
        }
    }

    if rmax <= cfg.tol {
        converged = true;
    }
    if !converged && message.is_empty() {
        message = format!(
            "no convergence within {} iterations (residual {rmax:.3e})",
            cfg.max_iters
        );
    }

    let kw = crate::criteria::kw_residuals(&u, h, c)?;
    let heu = h.zip_with(&u, |hh, uu| hh * uu.exp())?;
    let constraint_residual = integrate(&heu) - 4.0 * std::f64::consts::PI * c;
    let constraint_ok = constraint_residual.abs()
        <= 1e-6 * (4.0 * std::f64::consts::PI * c.abs()).max(1.0);
    if converged && !constraint_ok {
        converged = false;
        message = format!(
            "residual at tolerance but integral constraint violated ({constraint_residual:.3e})"
        );
    }
    let j_value = functional_j(&u, c)?;

    Ok(Solution {
        u,
        residual_maxnorm: rmax,
        kw_residuals: kw,
        constraint_residual,
        j_value,
        iterations,
        converged,
        residual_history: history,
        message: if converged { "converged".into() } else { message },
    })
}

/// Solve Δδ + w·δ = rhs (coefficients) by left-preconditioned GMRES.
fn solve_linearized(w: &ScalarField, rhs: &SpectralCoeffs, lmax: usize) -> Result<SpectralCoeffs> {
    let grid = w.grid();
    let n = (lmax + 1) * (lmax + 1);

    let eig: Vec<f64> = (0..=lmax)
        .flat_map(|l| std::iter::repeat(-(l as f64) * (l as f64 + 1.0)).take(2 * l + 1))
        .collect();
    // preconditioner shift keeps every diagonal entry away from zero
    let shift = crate::grid::mean(w).max(0.5);

    let apply_a = |x: &[f64]| -> Result<Vec<f64>> {
        let mut cx = SpectralCoeffs::zeros(lmax);
        copy_into(&mut cx, x);
        let dx = synthesize(&cx, grid)?;
        let wdx = w.zip_with(&dx, |a, b| a * b)?;
        let cw = analyze(&wdx, lmax)?;
        Ok((0..n).map(|i| eig[i] * x[i] + cw.coeffs()[i]).collect())
    };
    let precond = |x: &[f64]| -> Vec<f64> {
        (0..n).map(|i| x[i] / (eig[i] - shift)).collect()
    };

    let b: Vec<f64> = rhs.coeffs().to_vec();
    let x = gmres(apply_a, precond, &b, 120, 3, 1e-12)?;
    let mut out = SpectralCoeffs::zeros(lmax);
    copy_into(&mut out, &x);
    Ok(out)
}

fn copy_into(c: &mut SpectralCoeffs, x: &[f64]) {
    let mut k = 0;
    for l in 0..=c.lmax() {
        for m in -(l as i64)..=l as i64 {
            c.set(l, m, x[k]);
            k += 1;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations,
/// left-preconditioned.
fn gmres(
    apply_a: impl Fn(&[f64]) -> Result<Vec<f64>>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    cycles: usize,
    rtol: f64,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b0 = precond(b);
    let bnorm = norm(&b0);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let tol = rtol * bnorm;

    for _ in 0..cycles {
        let ax = apply_a(&x)?;
        let r: Vec<f64> = precond(&(0..n).map(|i| b[i] - ax[i]).collect::<Vec<_>>());
        let beta = norm(&r);
        if beta <= tol {
            return Ok(x);
        }
        let m = restart;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_done = 0;

        for k in 0..m {
            let av = apply_a(&basis[k])?;
            let mut wv = precond(&av);
            for i in 0..=k {
                let hik: f64 = wv.iter().zip(basis[i].iter()).map(|(a, b)| a * b).sum();
                hess[i][k] = hik;
                for (wj, bj) in wv.iter_mut().zip(basis[i].iter()) {
                    *wj -= hik * bj;
                }
            }
            let hkk = norm(&wv);
            hess[k + 1][k] = hkk;
            if hkk > 0.0 {
                basis.push(wv.iter().map(|v| v / hkk).collect());
            } else {
                basis.push(vec![0.0; n]);
            }
            // apply previous Givens rotations to the new column
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = (hess[k][k] * hess[k][k] + hess[k + 1][k] * hess[k + 1][k]).sqrt();
            if denom == 0.0 {
                k_done = k + 1;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_done = k + 1;
            if g[k + 1].abs() <= tol {
                break;
            }
        }

        // back substitution
        let kk = k_done;
        let mut y = vec![0.0; kk];
        for i in (0..kk).rev() {
            let mut s = g[i];
            for j in (i + 1)..kk {
                s -= hess[i][j] * y[j];
            }
            if hess[i][i] == 0.0 {
                return Err(Error::NonFinite("singular GMRES Hessenberg".into()));
            }
            y[i] = s / hess[i][i];
        }
        for i in 0..kk {
            for j in 0..n {
                x[j] += y[i] * basis[i][j];
            }
        }
        if g[kk].abs() <= tol {
            return Ok(x);
        }
    }
    // return best effort; the Newton line search decides acceptability
    Ok(x)
}

/// Gyre solve in ψ-variables: reduce, solve, substitute back.
#[derive(Debug, Clone)]
pub struct GyreSolution {
    pub psi: ScalarField,
    /// max-norm of Δψ − 2ω cosθ − c·e^{dψ} − g.
    pub psi_residual_maxnorm: f64,
    pub c_value: f64,
    pub elliptic: Solution,
}

pub fn gyre_solve(p: &GyreParams, cfg: &SolverConfig) -> Result<GyreSolution> {
    let nlat = cfg.lmax + 1;
    let grid = build_grid(nlat.max(4), 2 * nlat.max(4))?;
    let (c, h) = crate::gyre::to_elliptic(p, &grid);
    let sol = solve(&h, c, cfg)?;
    // ψ = u/d − ω cosθ
    let psi = ScalarField::from_values(
        &grid,
        (0..grid.nnodes())
            .map(|i| sol.u.value(i) / p.d - p.omega * grid.node_angles(i).0.cos())
            .collect(),
    )?;
    let lap_psi = laplacian(&psi)?;
    let mut res = 0.0_f64;
    for i in 0..grid.nnodes() {
        let (t, _) = grid.node_angles(i);
        let r = lap_psi.value(i) - 2.0 * p.omega * t.cos() - p.c * (p.d * psi.value(i)).exp() - p.g;
        res = res.max(r.abs());
    }
    Ok(GyreSolution {
        psi,
        psi_residual_maxnorm: res,
        c_value: c,
        elliptic: sol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    North,
    South,
}

/// Shift the constant by an integrable point singularity:
/// C' = C − C₀ and h' = h/(1 ± cosθ)^{C₀} (+ for a south-pole
/// singularity, − for north).
#[derive(Debug, Clone)]
pub struct SingularShift {
    pub c_shifted: f64,
    pub h_shifted: ScalarField,
    pub h_max_abs: f64,
    /// Set when the shifted curvature exceeds 1e12 near the pole.
    pub warning: Option<String>,
}

pub fn singular_shift(h: &ScalarField, c: f64, c0: f64, pole: Pole) -> Result<SingularShift> {
    let grid = h.grid();
    let sign = match pole {
        Pole::South => 1.0,
        Pole::North => -1.0,
    };
    let h_shifted = ScalarField::from_values(
        grid,
        (0..grid.nnodes())
            .map(|i| {
                let (t, _) = grid.node_angles(i);
                h.value(i) / (1.0 + sign * t.cos()).powf(c0)
            })
            .collect(),
    )?;
    if !h_shifted.is_finite() {
        return Err(Error::NonFinite(
            "shifted curvature is non-finite at a grid node".into(),
        ));
    }
    let h_max_abs = h_shifted.max_abs();
    let warning = (h_max_abs > 1e12)
        .then(|| format!("shifted curvature reaches {h_max_abs:.3e} near the pole"));
    Ok(SingularShift {
        c_shifted: c - c0,
        h_shifted,
        h_max_abs,
        warning,
    })
}

/// The singular term u_sing^(±)(θ) = −C₀·ln(1 ± cosθ); its Laplacian is
/// the constant C₀.
pub fn u_singular(theta: f64, c0: f64, pole: Pole) -> f64 {
    let sign = match pole {
        Pole::South => 1.0,
        Pole::North => -1.0,
    };
    -c0 * (1.0 + sign * theta.cos()).ln()
}
