//! Existence machinery for `Δ_{S²}u = C − h·eᵘ` with general smooth `h`.
//!
//! For a solution to exist, the three weighted integrals ∫eᵘ·f_i dΩ must
//! vanish, where the kernels are
//!
//! ```text
//! f_i = ∇h·∇F_i + (C−2)·h·F_i,          i = 1, 2, 3,
//! ```
//!
//! and F_i are the degree-1 harmonics. The pointwise 3×3 matrix
//!
//! ```text
//! W_ij = ∇F_i·∇f_j + (C−2)·F_i·f_j
//! ```
//!
//! is the i-th kernel construction applied to h = f_j. Uniform positive
//! or negative definiteness of W+Wᵀ, together with sign changes of every
//! kernel and a positive gap min |f₁|+|f₂|+|f₃|, is a sufficient
//! condition for existence in the range 2 ≤ C < 4. For C < 2 the
//! classical necessary-and-sufficient results apply instead.
//!
//! ```
//! use kwgyre::criteria::{classify, CriteriaVerdict};
//! use kwgyre::grid::{build_grid, ScalarField};
//!
//! let grid = build_grid(16, 32)?;
//! // C < 0 with h ≤ 0 (and somewhere negative): solvable
//! let h = ScalarField::constant(&grid, -1.0);
//! let report = classify(&h, -3.0)?;
//! assert_eq!(report.verdict, CriteriaVerdict::ExistsByLemma2);
//!
//! // 0 < C < 2 with h nowhere positive: the integral constraint fails
//! let report = classify(&h, 1.0)?;
//! assert_eq!(report.verdict, CriteriaVerdict::NoSolution);
//! # Ok::<(), kwgyre::Error>(())
//! ```

use serde::Serialize;

use crate::grid::{grad_dot, integrate, mean, ScalarField};
use crate::harmonics::degree1_basis;
use crate::sym3::eigvalsh3;
use crate::{Error, Result};

/// Default relative margin (w.r.t. a field's max absolute value) at which
/// strict-sign verdicts are certified.
pub const DEFAULT_MARGIN_REL: f64 = 1e-8;

/// The three Kazdan–Warner kernels, tied to the `C` they were built with.
#[derive(Debug, Clone)]
pub struct KernelTriple {
    pub f1: ScalarField,
    pub f2: ScalarField,
    pub f3: ScalarField,
    /// The constant the kernels were built with (they depend on it).
    pub c_param: f64,
    /// Closed-form values of |f₁|+|f₂|+|f₃| at the north and south poles,
    /// when available (the gyre family provides them; poles are not grid
    /// nodes).
    pub pole_abs_sums: Option<[f64; 2]>,
}

impl KernelTriple {
    pub fn fields(&self) -> [&ScalarField; 3] {
        [&self.f1, &self.f2, &self.f3]
    }
}

/// The nine entries of the pointwise matrix `W`, row-major (i outer).
#[derive(Debug, Clone)]
pub struct WField {
    entries: Vec<ScalarField>,
    pub c_param: f64,
}

impl WField {
    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[3 * i + j]
    }
}

/// Kernels f_i = ∇h·∇F_i + (C−2)·h·F_i of the degree-1 obstruction.
pub fn kw_kernels(h: &ScalarField, c: f64) -> Result<KernelTriple> {
    let grid = h.grid();
    let (f1b, f2b, f3b) = degree1_basis(grid);
    let mut out = Vec::with_capacity(3);
    for fb in [&f1b, &f2b, &f3b] {
        let gd = grad_dot(h, fb)?;
        let prod = h.zip_with(fb, |a, b| (c - 2.0) * a * b)?;
        out.push(gd.zip_with(&prod, |a, b| a + b)?);
    }
    let f3 = out.pop().unwrap();
    let f2 = out.pop().unwrap();
    let f1 = out.pop().unwrap();
    Ok(KernelTriple {
        f1,
        f2,
        f3,
        c_param: c,
        pole_abs_sums: None,
    })
}

/// Residuals r_i = ∫ eᵘ f_i dΩ. A genuine solution must have r = 0.
///
/// Rejects `u` with max value above ~700 (eᵘ would overflow).
pub fn kw_residuals(u: &ScalarField, h: &ScalarField, c: f64) -> Result<[f64; 3]> {
    if !u.grid().same_grid(h.grid()) {
        return Err(Error::GridMismatch);
    }
    let (umax, _) = u.max_node();
    if umax > 700.0 {
        return Err(Error::Overflow(format!(
            "max(u) = {umax} would overflow exp(u)"
        )));
    }
    let eu = u.map(|v| v.exp())?;
    let k = kw_kernels(h, c)?;
    let mut r = [0.0; 3];
    for (i, f) in k.fields().iter().enumerate() {
        r[i] = integrate(&eu.zip_with(f, |a, b| a * b)?);
    }
    Ok(r)
}

/// The pointwise matrix W_ij = ∇F_i·∇f_j + (C−2)·F_i·f_j.
pub fn w_matrix(h: &ScalarField, c: f64) -> Result<WField> {
    let grid = h.grid();
    let (f1b, f2b, f3b) = degree1_basis(grid);
    let basis = [&f1b, &f2b, &f3b];
    let kernels = kw_kernels(h, c)?;
    let mut entries = Vec::with_capacity(9);
    for fb in basis {
        for fj in kernels.fields() {
            let gd = grad_dot(fb, fj)?;
            let prod = fb.zip_with(fj, |a, b| (c - 2.0) * a * b)?;
            entries.push(gd.zip_with(&prod, |a, b| a + b)?);
        }
    }
    Ok(WField { entries, c_param: c })
}

/// Strict sign change of a field at the given absolute margin.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignInfo {
    pub changes: bool,
    pub min: f64,
    pub max: f64,
}

pub fn sign_change(f: &ScalarField, margin: f64) -> SignInfo {
    let (min, _) = f.min_node();
    let (max, _) = f.max_node();
    SignInfo {
        changes: min < -margin && max > margin,
        min,
        max,
    }
}

/// Where the gap minimum was attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GapNode {
    Node(usize),
    NorthPole,
    SouthPole,
}

/// Minimum over the sphere of |f₁|+|f₂|+|f₃|, including closed-form pole
/// values when the triple carries them.
pub fn gap(k: &KernelTriple) -> (f64, GapNode) {
    let mut best = (f64::INFINITY, GapNode::Node(0));
    for i in 0..k.f1.values().len() {
        let s = k.f1.value(i).abs() + k.f2.value(i).abs() + k.f3.value(i).abs();
        if s < best.0 {
            best = (s, GapNode::Node(i));
        }
    }
    if let Some([north, south]) = k.pole_abs_sums {
        if north < best.0 {
            best = (north, GapNode::NorthPole);
        }
        if south < best.0 {
            best = (south, GapNode::SouthPole);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite,
}

/// Pointwise definiteness scan of W+Wᵀ.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DefinitenessReport {
    pub verdict: Definiteness,
    /// Smallest eigenvalue of W+Wᵀ over all nodes and the node attaining it.
    pub min_eigenvalue: f64,
    pub min_node: usize,
    /// Largest eigenvalue over all nodes and the node attaining it.
    pub max_eigenvalue: f64,
    pub max_node: usize,
}

/// Classify W+Wᵀ as positive definite (smallest eigenvalue > margin at
/// every node), negative definite (largest < −margin everywhere), or
/// indefinite.
pub fn definiteness(w: &WField, margin: f64) -> DefinitenessReport {
    let n = w.entry(0, 0).values().len();
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut min_node = 0;
    let mut max_node = 0;
    for idx in 0..n {
        let s = |i: usize, j: usize| w.entry(i, j).value(idx) + w.entry(j, i).value(idx);
        let eig = eigvalsh3(s(0, 0), s(0, 1), s(0, 2), s(1, 1), s(1, 2), s(2, 2));
        if eig[0] < min_eig {
            min_eig = eig[0];
            min_node = idx;
        }
        if eig[2] > max_eig {
            max_eig = eig[2];
            max_node = idx;
        }
    }
    let verdict = if min_eig > margin {
        Definiteness::PositiveDefinite
    } else if max_eig < -margin {
        Definiteness::NegativeDefinite
    } else {
        Definiteness::Indefinite
    };
    DefinitenessReport {
        verdict,
        min_eigenvalue: min_eig,
        min_node,
        max_eigenvalue: max_eig,
        max_node,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriteriaVerdict {
    ExistsByLemma2,
    ExistsByLemma3,
    ExistsByLemma45,
    NoSolution,
    NoSolutionKW,
    SufficientByThm1,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NodeInfo {
    pub index: Option<usize>,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapInfo {
    pub alpha: f64,
    pub node: NodeInfo,
}

/// Structured outcome of the existence analysis for one (h, C) pair.
#[derive(Debug, Clone, Serialize)]
pub struct CriteriaReport {
    pub c_value: f64,
    pub c_regime: String,
    pub h_max: f64,
    pub h_min: f64,
    pub h_mean: f64,
    pub h_positive_somewhere: bool,
    pub sign_change: [SignInfo; 3],
    pub gap_numeric: GapInfo,
    pub definiteness: DefinitenessReport,
    pub verdict: CriteriaVerdict,
    pub detail: String,
}

impl CriteriaReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn gap_node_info(k: &KernelTriple, node: GapNode) -> NodeInfo {
    match node {
        GapNode::Node(i) => {
            let (theta, phi) = k.f1.grid().node_angles(i);
            NodeInfo {
                index: Some(i),
                theta,
                phi,
            }
        }
        GapNode::NorthPole => NodeInfo {
            index: None,
            theta: 0.0,
            phi: 0.0,
        },
        GapNode::SouthPole => NodeInfo {
            index: None,
            theta: std::f64::consts::PI,
            phi: 0.0,
        },
    }
}

/// Apply the classification for arbitrary smooth candidate curvature `h`
/// at the given `C`, dispatching on the C-regime.
///
/// The trivial case h ≡ 0 is rejected.
pub fn classify(h: &ScalarField, c: f64) -> Result<CriteriaReport> {
    classify_with_kernels(h, c, kw_kernels(h, c)?)
}

/// Same as [`classify`] but with externally supplied kernels (the gyre
/// family passes closed-form kernels that carry pole values).
pub fn classify_with_kernels(h: &ScalarField, c: f64, kernels: KernelTriple) -> Result<CriteriaReport> {
    if h.max_abs() == 0.0 {
        return Err(Error::InvalidArgument(
            "h is identically zero (trivial case excluded)".into(),
        ));
    }
    let (h_min, _) = h.min_node();
    let (h_max, _) = h.max_node();
    let h_mean = mean(h);
    let h_positive_somewhere = h_max > 0.0;

    let sign_margins: Vec<f64> = kernels
        .fields()
        .iter()
        .map(|f| DEFAULT_MARGIN_REL * f.max_abs())
        .collect();
    let signs = [
        sign_change(&kernels.f1, sign_margins[0]),
        sign_change(&kernels.f2, sign_margins[1]),
        sign_change(&kernels.f3, sign_margins[2]),
    ];
    let (alpha, gnode) = gap(&kernels);
    let gap_info = GapInfo {
        alpha,
        node: gap_node_info(&kernels, gnode),
    };
    let w = w_matrix(h, c)?;
    let w_scale = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| w.entry(i, j).max_abs())
        .fold(0.0_f64, f64::max);
    let def_margin = DEFAULT_MARGIN_REL * w_scale;
    let def = definiteness(&w, def_margin);

    let (c_regime, verdict, detail) = if c < 0.0 {
        if h_max <= 0.0 && h_min < 0.0 {
            (
                "C<0".to_string(),
                CriteriaVerdict::ExistsByLemma2,
                "h <= 0 everywhere and negative somewhere".to_string(),
            )
        } else {
            let note = if h_mean < 0.0 {
                "necessary condition mean(h) < 0 holds, but h is positive somewhere"
            } else {
                "necessary condition mean(h) < 0 fails"
            };
            ("C<0".to_string(), CriteriaVerdict::Inconclusive, note.to_string())
        }
    } else if c == 0.0 {
        // certify strict negativity of the mean at the standard margin;
        // a mean at round-off scale counts as zero
        let mean_margin = DEFAULT_MARGIN_REL * h_max.abs().max(h_min.abs());
        if h_mean < -mean_margin && h_max > 0.0 {
            (
                "C=0".to_string(),
                CriteriaVerdict::ExistsByLemma3,
                "mean(h) < 0 and h positive somewhere".to_string(),
            )
        } else {
            (
                "C=0".to_string(),
                CriteriaVerdict::NoSolution,
                "C=0 requires mean(h) < 0 and max(h) > 0".to_string(),
            )
        }
    } else if c < 2.0 {
        if h_max > 0.0 {
            (
                "0<C<2".to_string(),
                CriteriaVerdict::ExistsByLemma45,
                "0 < C < 2 and h positive somewhere".to_string(),
            )
        } else {
            (
                "0<C<2".to_string(),
                CriteriaVerdict::NoSolution,
                "the integral constraint needs h positive somewhere when C > 0".to_string(),
            )
        }
    } else if c < 4.0 {
        // C = 2 obstruction shortcut: a kernel of strictly fixed sign
        // makes the weighted-integral conditions unsatisfiable.
        let fixed_sign = kernels
            .fields()
            .iter()
            .zip(sign_margins.iter())
            .position(|(f, &m)| {
                let (fmin, _) = f.min_node();
                let (fmax, _) = f.max_node();
                fmin > m || fmax < -m
            });
        if c == 2.0 {
            if let Some(i) = fixed_sign {
                (
                    "C=2".to_string(),
                    CriteriaVerdict::NoSolutionKW,
                    format!("kernel f{} has a fixed sign: obstruction", i + 1),
                )
            } else {
                thm1_dispatch("C=2", h_positive_somewhere, &signs, alpha, def_margin, &def)
            }
        } else {
            thm1_dispatch("2<C<4", h_positive_somewhere, &signs, alpha, def_margin, &def)
        }
    } else {
        (
            "C>=4".to_string(),
            CriteriaVerdict::Inconclusive,
            "C >= 4 is outside the treated range".to_string(),
        )
    };

    Ok(CriteriaReport {
        c_value: c,
        c_regime,
        h_max,
        h_min,
        h_mean,
        h_positive_somewhere,
        sign_change: signs,
        gap_numeric: gap_info,
        definiteness: def,
        verdict,
        detail,
    })
}

fn thm1_dispatch(
    regime: &str,
    h_positive_somewhere: bool,
    signs: &[SignInfo; 3],
    alpha: f64,
    def_margin: f64,
    def: &DefinitenessReport,
) -> (String, CriteriaVerdict, String) {
    let all_change = signs.iter().all(|s| s.changes);
    let definite = def.verdict != Definiteness::Indefinite;
    if h_positive_somewhere && all_change && alpha > def_margin && definite {
        (
            regime.to_string(),
            CriteriaVerdict::SufficientByThm1,
            "all kernels change sign, positive gap, W+Wt uniformly definite".to_string(),
        )
    } else {
        let mut why = Vec::new();
        if !h_positive_somewhere {
            why.push("h is nowhere positive");
        }
        if !all_change {
            why.push("a kernel does not change sign at margin");
        }
        if alpha <= def_margin {
            why.push("gap not positive at margin");
        }
        if !definite {
            why.push("W+Wt is not uniformly definite");
        }
        (
            regime.to_string(),
            CriteriaVerdict::Inconclusive,
            format!("sufficient conditions not certified: {}", why.join("; ")),
        )
    }
}
