//! The ocean-gyre specialization of the existence machinery.
//!
//! The stream-function model `Δ_{S²}ψ − 2ω cosθ = c·e^{dψ} + g` reduces,
//! via ψ = u/d − ω cosθ, to `Δ_{S²}u = C − h_ω·eᵘ` with C = g·d and
//! candidate curvature
//!
//! ```text
//! h_ω(θ) = −c·d·e^{−ωd·cosθ}.
//! ```
//!
//! With ϖ = ω·d the Kazdan–Warner kernels take closed form,
//!
//! ```text
//! f₁   = h_ω·[(C−2)·cosθ − ϖ·sin²θ]
//! f₂ᐟ₃ = h_ω·(C−2+ϖ·cosθ)·F₂ᐟ₃
//! ```
//!
//! the gap is α = |cd|·|C−2|·e^{−|ϖ|}, and the eigenvalues of W+Wᵀ are
//! λ₀ = 2h_ω(C−2+ϖ cosθ), λ± = h_ω(Θ ± √(2Δ))/4 with the Θ, Δ
//! polynomials implemented in [`eigen_closed`]. The compiled existence
//! classification over (C, ϖ, sign of cd) is [`classify`].
//!
//! ```
//! use kwgyre::gyre::{classify, corollary7_bound, GyreParams, RegionKind};
//!
//! // C = gd = −1 with cd > 0: solutions exist
//! let p = GyreParams::new(1.0, 1.0, -1.0, 1.0)?;
//! assert_eq!(classify(&p)?.verdict, RegionKind::Exists);
//!
//! // 2 < C < 4 with cd < 0: sufficient condition holds below the bound
//! assert!((corollary7_bound(13.0 / 6.0)? - 1.0 / 6.0).abs() < 1e-15);
//! let p = GyreParams::new(-1.0, 1.0, 2.5, 0.25)?;
//! assert_eq!(classify(&p)?.verdict, RegionKind::ExistsSufficient);
//! # Ok::<(), kwgyre::Error>(())
//! ```

use serde::Serialize;

use crate::criteria::KernelTriple;
use crate::grid::{ScalarField, SphericalGrid};
use crate::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// Model constants of the gyre equation. `d` must be nonzero (the
/// reduction divides by it). Derived quantities are always recomputed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GyreParams {
    pub c: f64,
    pub d: f64,
    pub g: f64,
    pub omega: f64,
}

impl GyreParams {
    pub fn new(c: f64, d: f64, g: f64, omega: f64) -> Result<GyreParams> {
        if d == 0.0 || !d.is_finite() {
            return Err(Error::InvalidArgument("d must be finite and nonzero".into()));
        }
        if ![c, g, omega].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("gyre parameters must be finite".into()));
        }
        Ok(GyreParams { c, d, g, omega })
    }

    /// C = g·d.
    pub fn cap_c(&self) -> f64 {
        self.g * self.d
    }

    /// ϖ = ω·d.
    pub fn varpi(&self) -> f64 {
        self.omega * self.d
    }

    /// κ = ϖ/(C−2), a diagnostic used in the gap discussion; undefined at
    /// C = 2.
    pub fn kappa(&self) -> Option<f64> {
        let c = self.cap_c();
        if c == 2.0 {
            None
        } else {
            Some(self.varpi() / (c - 2.0))
        }
    }

    /// Candidate curvature h_ω(θ) = −cd·e^{−ϖ cosθ}.
    pub fn h_at(&self, theta: f64) -> f64 {
        -self.c * self.d * (-self.varpi() * theta.cos()).exp()
    }
}

/// Reduce the gyre model to elliptic form: returns (C, h_ω on the grid).
pub fn to_elliptic(p: &GyreParams, grid: &Arc<SphericalGrid>) -> (f64, ScalarField) {
    let h = ScalarField::from_fn(grid, |t, _| p.h_at(t));
    (p.cap_c(), h)
}

/// Closed-form Kazdan–Warner kernels for the gyre curvature, with exact
/// pole values attached for the gap computation.
pub fn kernels_closed(p: &GyreParams, grid: &Arc<SphericalGrid>) -> KernelTriple {
    let c = p.cap_c();
    let vp = p.varpi();
    let f1 = ScalarField::from_fn(grid, |t, _| {
        p.h_at(t) * ((c - 2.0) * t.cos() - vp * t.sin().powi(2))
    });
    let radial = move |t: f64| c - 2.0 + vp * t.cos();
    let f2 = ScalarField::from_fn(grid, |t, phi| p.h_at(t) * radial(t) * t.sin() * phi.cos());
    let f3 = ScalarField::from_fn(grid, |t, phi| p.h_at(t) * radial(t) * t.sin() * phi.sin());
    // at the poles f₂ = f₃ = 0 and |f₁| = |h_ω(pole)|·|C−2|
    let north = (p.h_at(0.0) * (c - 2.0)).abs();
    let south = (p.h_at(std::f64::consts::PI) * (c - 2.0)).abs();
    KernelTriple {
        f1,
        f2,
        f3,
        c_param: c,
        pole_abs_sums: Some([north, south]),
    }
}

/// The gap in closed form: α = |cd|·|C−2|·e^{−|ωd|}.
pub fn gap_closed(p: &GyreParams) -> f64 {
    (p.c * p.d).abs() * (p.cap_c() - 2.0).abs() * (-p.varpi().abs()).exp()
}

/// Closed-form eigenvalues (λ₀, λ₊, λ₋) of W+Wᵀ at colatitude θ.
///
/// Reports an error if 2Δ is negative beyond round-off, which would
/// signal a transcription error (W+Wᵀ is real symmetric, so the pair
/// λ± must be real).
pub fn eigen_closed(theta: f64, p: &GyreParams) -> Result<[f64; 3]> {
    let c = p.cap_c();
    let vp = p.varpi();
    let h = p.h_at(theta);
    let x1 = theta.cos();
    let lam0 = 2.0 * h * (c - 2.0 + vp * x1);
    let theta_poly = 8.0 + 4.0 * c * (c - 3.0)
        + 2.0 * vp * vp
        + 2.0 * vp * (2.0 * theta.cos() - vp * (2.0 * theta).cos());
    let delta = 8.0 * (6.0 - 5.0 * c + c * c).powi(2)
        + 8.0 * (7.0 + c * (c - 5.0)) * vp * vp
        + vp * (4.0 * (vp * vp - 4.0 * (c - 3.0) * (c - 2.0)) * theta.cos()
            - vp * (4.0 * (vp * vp + 12.0 + 2.0 * c * (c - 5.0)) * (2.0 * theta).cos()
                + vp * (4.0 * (3.0 * theta).cos() - vp * (4.0 * theta).cos())))
        + 3.0 * vp.powi(4);
    let two_delta = 2.0 * delta;
    let scale = 1.0 + theta_poly.abs() + two_delta.abs();
    if two_delta < -1e-9 * scale {
        return Err(Error::NonFinite(format!(
            "2*Delta = {two_delta} < 0: eigenvalue pair would be complex"
        )));
    }
    let root = two_delta.max(0.0).sqrt();
    let lam_plus = 0.25 * h * (theta_poly + root);
    let lam_minus = 0.25 * h * (theta_poly - root);
    Ok([lam0, lam_plus, lam_minus])
}

/// The |ϖ| bound of the sufficient-existence region for 2 < C < 4:
///
/// ```text
/// bound(C) = 2(C−2)^{3/2}·√(11−5C)/(9−4C)   for 2 < C ≤ 13/6
/// bound(C) = C−2                            for 13/6 ≤ C < 4
/// ```
///
/// Both branches equal 1/6 at C = 13/6.
pub fn corollary7_bound(c: f64) -> Result<f64> {
    if !(c > 2.0 && c < 4.0) {
        return Err(Error::InvalidArgument(format!(
            "bound is defined for 2 < C < 4, got C = {c}"
        )));
    }
    if c <= 13.0 / 6.0 {
        Ok(2.0 * (c - 2.0).powf(1.5) * (11.0 - 5.0 * c).sqrt() / (9.0 - 4.0 * c))
    } else {
        Ok(c - 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionKind {
    Exists,
    NoSolution,
    ExistsSufficient,
    Unknown,
}

impl RegionKind {
    /// Fixed CSV string for the verdict.
    pub fn as_csv(&self) -> &'static str {
        match self {
            RegionKind::Exists => "EXISTS",
            RegionKind::NoSolution => "NO_SOLUTION",
            RegionKind::ExistsSufficient => "EXISTS_SUFFICIENT",
            RegionKind::Unknown => "UNKNOWN",
        }
    }
}

/// Outcome of the compiled parameter-space classification.
#[derive(Debug, Clone, Serialize)]
pub struct RegionVerdict {
    pub verdict: RegionKind,
    /// Identifier of the rule that fired.
    pub rule: String,
    /// The |ϖ| bound, when the 2 < C < 4 sufficient region applies.
    pub bound_value: Option<f64>,
    /// Distance from (C, |ϖ|) to the nearest region boundary.
    pub margin: f64,
    pub c_value: f64,
    pub varpi: f64,
}

impl RegionVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialization cannot fail")
    }
}

/// The compiled existence classification in (C = gd, ϖ = ωd, sign of cd).
///
/// The ω = 0 special cases (uniformization at C = 2, constant-only
/// solutions for 0 < C < 2) are reported with their own rules; everything
/// else follows the ϖ ≠ 0 bullets. Invariant under ω → −ω.
pub fn classify(p: &GyreParams) -> Result<RegionVerdict> {
    if p.c == 0.0 {
        return Err(Error::InvalidArgument(
            "c = 0 makes the curvature identically zero".into(),
        ));
    }
    let c = p.cap_c();
    let vp = p.varpi();
    let cd = p.c * p.d;
    let mut bound_value = None;

    let c_margin = [0.0, 2.0, 4.0]
        .iter()
        .map(|b| (c - b).abs())
        .fold(f64::INFINITY, f64::min);

    let (verdict, rule, margin) = if p.omega == 0.0 && c == 2.0 {
        // g = 2/d with no rotation: the uniformization case, solvable in
        // closed form (and constant solutions exist when g/c < 0).
        (
            RegionKind::Exists,
            "C=2, omega=0: uniformization case (closed-form solvable)".to_string(),
            c_margin,
        )
    } else if p.omega == 0.0 && c > 0.0 && c < 2.0 {
        // no rotation, 0 < C < 2: smooth solutions are constants, which
        // exist exactly when g/c < 0
        if p.g / p.c < 0.0 {
            (
                RegionKind::Exists,
                "0<C<2, omega=0: constant solution only".to_string(),
                c_margin,
            )
        } else {
            (
                RegionKind::NoSolution,
                "0<C<2, omega=0: only constants admissible and g/c >= 0".to_string(),
                c_margin,
            )
        }
    } else if c < 0.0 {
        if cd > 0.0 {
            (RegionKind::Exists, "C<0, cd>0".to_string(), c_margin)
        } else {
            (RegionKind::NoSolution, "C<0, cd<0".to_string(), c_margin)
        }
    } else if c == 0.0 {
        (RegionKind::NoSolution, "C=0".to_string(), c_margin)
    } else if c < 2.0 {
        if cd < 0.0 {
            (RegionKind::Exists, "0<C<2, cd<0".to_string(), c_margin)
        } else {
            (RegionKind::NoSolution, "0<C<2, cd>0".to_string(), c_margin)
        }
    } else if c == 2.0 {
        (
            RegionKind::NoSolution,
            "C=2, omega!=0: Kazdan-Warner obstruction".to_string(),
            c_margin,
        )
    } else if c < 4.0 {
        let bound = corollary7_bound(c)?;
        bound_value = Some(bound);
        let margin = c_margin.min((bound - vp.abs()).abs());
        if cd < 0.0 && vp.abs() < bound {
            (
                RegionKind::ExistsSufficient,
                "2<C<4, cd<0, |varpi| < bound".to_string(),
                margin,
            )
        } else if cd >= 0.0 {
            (RegionKind::Unknown, "2<C<4, cd>0".to_string(), margin)
        } else {
            (
                RegionKind::Unknown,
                "2<C<4, |varpi| >= bound".to_string(),
                margin,
            )
        }
    } else {
        (RegionKind::Unknown, "C>=4".to_string(), c_margin)
    };

    Ok(RegionVerdict {
        verdict,
        rule,
        bound_value,
        margin,
        c_value: c,
        varpi: vp,
    })
}

/// One cell of a parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub c_value: f64,
    pub varpi: f64,
    pub verdict: RegionKind,
    pub rule: String,
    pub bound: Option<f64>,
    pub margin: f64,
}

/// Tabulate [`classify`] on a (C, ϖ) grid with fixed c and d (ω = ϖ/d,
/// g = C/d). Cells are emitted row-major with C outer, both axes
/// ascending.
pub fn sweep(
    c_sign: f64,
    d: f64,
    c_range: (f64, f64),
    varpi_range: (f64, f64),
    steps: usize,
) -> Result<Vec<SweepCell>> {
    if steps < 2 {
        return Err(Error::InvalidArgument("sweep needs >= 2 steps per axis".into()));
    }
    if !(c_range.0.is_finite() && c_range.1.is_finite() && varpi_range.0.is_finite() && varpi_range.1.is_finite()) {
        return Err(Error::InvalidArgument("sweep ranges must be finite".into()));
    }
    let mut cells = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        let cap_c = c_range.0 + (c_range.1 - c_range.0) * i as f64 / (steps - 1) as f64;
        for j in 0..steps {
            let vp = varpi_range.0 + (varpi_range.1 - varpi_range.0) * j as f64 / (steps - 1) as f64;
            let p = GyreParams::new(c_sign, d, cap_c / d, vp / d)?;
            let v = classify(&p)?;
            cells.push(SweepCell {
                c_value: cap_c,
                varpi: vp,
                verdict: v.verdict,
                rule: v.rule,
                bound: v.bound_value,
                margin: v.margin,
            });
        }
    }
    Ok(cells)
}

/// CSV serialization: `C,varpi,verdict,rule,bound,margin`.
pub fn sweep_to_csv<W: Write>(out: &mut W, cells: &[SweepCell]) -> Result<()> {
    writeln!(out, "C,varpi,verdict,rule,bound,margin")?;
    for cell in cells {
        let bound = cell
            .bound
            .map(|b| format!("{b:.16e}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{:.16e},{:.16e},{},{:?},{},{:.16e}",
            cell.c_value,
            cell.varpi,
            cell.verdict.as_csv(),
            cell.rule,
            bound,
            cell.margin
        )?;
    }
    Ok(())
}

/// Minimal SVG region map: one rect per cell, three fixed fill classes
/// keyed to the verdict strings.
pub fn sweep_to_svg<W: Write>(out: &mut W, cells: &[SweepCell], steps: usize) -> Result<()> {
    let cell_px = 6usize;
    let size = steps * cell_px;
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    )?;
    writeln!(
        out,
        "<style>.EXISTS{{fill:#2b8a3e}}.NO_SOLUTION{{fill:#c92a2a}}.EXISTS_SUFFICIENT{{fill:#74b816}}.UNKNOWN{{fill:#adb5bd}}</style>"
    )?;
    for (k, cell) in cells.iter().enumerate() {
        let i = k / steps;
        let j = k % steps;
        // C increases to the right, ϖ upward
        let x = i * cell_px;
        let y = size - (j + 1) * cell_px;
        writeln!(
            out,
            "<rect class=\"{}\" x=\"{x}\" y=\"{y}\" width=\"{cell_px}\" height=\"{cell_px}\"/>",
            cell.verdict.as_csv()
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
