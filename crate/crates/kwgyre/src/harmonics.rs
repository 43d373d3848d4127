//! Real spherical-harmonic transforms and the spectral Laplacian.
//!
//! Basis convention: orthonormal real harmonics
//!
//! ```text
//! Y_{l,0}  = q_{l0}(cosθ)
//! Y_{l,m}  = √2 · q_{lm}(cosθ) · cos(mφ)   (m > 0)
//! Y_{l,-m} = √2 · q_{lm}(cosθ) · sin(mφ)   (m > 0)
//! ```
//!
//! where `q_{lm}` are the fully normalized associated Legendre functions
//! (no Condon–Shortley phase), evaluated with the stable normalized
//! three-term recurrence:
//!
//! ```text
//! q_{00} = 1/√(4π)
//! q_{mm} = sinθ · √((2m+1)/(2m)) · q_{m-1,m-1}
//! q_{lm} = α_{lm} ( cosθ · q_{l-1,m} − q_{l-2,m}/α_{l-1,m} ),
//!          α_{lm} = √((4l²−1)/(l²−m²))
//! ```
//!
//! so that ∫_{S²} Y_{lm} Y_{l'm'} dΩ = δ_{ll'} δ_{mm'}. Every harmonic is
//! an eigenfunction of the spherical Laplacian with eigenvalue −l(l+1).
//! θ-derivatives come from
//! `dq_{lm}/dθ = ( l·cosθ·q_{lm} − √((2l+1)(l²−m²)/(2l−1))·q_{l-1,m} ) / sinθ`.
//!
//! ```
//! use kwgyre::grid::{build_grid, ScalarField};
//! use kwgyre::harmonics::{analyze, laplacian};
//!
//! let grid = build_grid(16, 32)?;
//! // cosθ is √(4π/3)·Y₁₀, an eigenfunction of Δ with eigenvalue −2
//! let f = ScalarField::from_fn(&grid, |theta, _| theta.cos());
//! let coeffs = analyze(&f, 8)?;
//! assert!((coeffs.get(1, 0) - (4.0 * std::f64::consts::PI / 3.0).sqrt()).abs() < 1e-12);
//!
//! let lap = laplacian(&f)?;
//! let err = lap.zip_with(&f, |l, v| l + 2.0 * v)?.max_abs();
//! assert!(err < 1e-11);
//! # Ok::<(), kwgyre::Error>(())
//! ```

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::grid::{ScalarField, SphericalGrid};
use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Spherical-harmonic coefficient table up to degree `L`, real orthonormal
/// convention. Index (l, m) with m > 0 cosine terms and m < 0 sine terms.
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    lmax: usize,
    coeffs: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn zeros(lmax: usize) -> Self {
        SpectralCoeffs {
            lmax,
            coeffs: vec![0.0; (lmax + 1) * (lmax + 1)],
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn idx(&self, l: usize, m: i64) -> usize {
        debug_assert!(l <= self.lmax && m.unsigned_abs() as usize <= l);
        l * l + (l as i64 + m) as usize
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.coeffs[self.idx(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        let i = self.idx(l, m);
        self.coeffs[i] = v;
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    /// Iterate (l, m, value) over all entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        (0..=self.lmax).flat_map(move |l| {
            (-(l as i64)..=l as i64).map(move |m| (l, m, self.get(l, m)))
        })
    }
}

/// Precomputed Legendre and azimuth tables for one (grid, lmax) pair.
struct Plan {
    lmax: usize,
    nlat: usize,
    nlon: usize,
    npairs: usize,
    /// q_{lm}(cosθ_i), layout [i][pair(l,m)] with pair(l,m) = l(l+1)/2 + m.
    plm: Vec<f64>,
    /// dq_{lm}/dθ at θ_i, same layout.
    dplm: Vec<f64>,
    /// cos(mφ_j), layout [m][j].
    cosm: Vec<f64>,
    /// sin(mφ_j), layout [m][j].
    sinm: Vec<f64>,
}

fn pair(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl Plan {
    fn new(grid: &SphericalGrid, lmax: usize) -> Result<Plan> {
        if lmax + 1 > grid.nlat() {
            return Err(Error::DegreeTooLarge {
                lmax,
                nlat: grid.nlat(),
            });
        }
        let nlat = grid.nlat();
        let nlon = grid.nlon();
        let npairs = (lmax + 1) * (lmax + 2) / 2;
        let mut plm = vec![0.0; nlat * npairs];
        let mut dplm = vec![0.0; nlat * npairs];
        for (i, &theta) in grid.thetas().iter().enumerate() {
            let x = theta.cos();
            let s = theta.sin();
            let q = &mut plm[i * npairs..(i + 1) * npairs];
            // diagonal
            q[pair(0, 0)] = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
            for m in 1..=lmax {
                q[pair(m, m)] =
                    q[pair(m - 1, m - 1)] * s * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            }
            // upward recurrence in l
            for m in 0..=lmax {
                for l in (m + 1)..=lmax {
                    let alpha =
                        ((4 * l * l - 1) as f64 / (l * l - m * m) as f64).sqrt();
                    let prev2 = if l >= m + 2 {
                        let alpha_prev = ((4 * (l - 1) * (l - 1) - 1) as f64
                            / ((l - 1) * (l - 1) - m * m) as f64)
                            .sqrt();
                        q[pair(l - 2, m)] / alpha_prev
                    } else {
                        0.0
                    };
                    q[pair(l, m)] = alpha * (x * q[pair(l - 1, m)] - prev2);
                }
            }
            let dq = &mut dplm[i * npairs..(i + 1) * npairs];
            for m in 0..=lmax {
                for l in m..=lmax {
                    let below = if l > m {
                        (((2 * l + 1) * (l * l - m * m)) as f64 / (2 * l - 1) as f64).sqrt()
                            * q[pair(l - 1, m)]
                    } else {
                        0.0
                    };
                    dq[pair(l, m)] = (l as f64 * x * q[pair(l, m)] - below) / s;
                }
            }
        }
        let mut cosm = vec![0.0; (lmax + 1) * nlon];
        let mut sinm = vec![0.0; (lmax + 1) * nlon];
        for m in 0..=lmax {
            for (j, &phi) in grid.phis().iter().enumerate() {
                cosm[m * nlon + j] = (m as f64 * phi).cos();
                sinm[m * nlon + j] = (m as f64 * phi).sin();
            }
        }
        Ok(Plan {
            lmax,
            nlat,
            nlon,
            npairs,
            plm,
            dplm,
            cosm,
            sinm,
        })
    }

    /// Per-ring Fourier moments a_m[i] = Σ_j v cos(mφ_j), b_m likewise.
    fn fourier_moments(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; (self.lmax + 1) * self.nlat];
        let mut b = vec![0.0; (self.lmax + 1) * self.nlat];
        for i in 0..self.nlat {
            let row = &values[i * self.nlon..(i + 1) * self.nlon];
            for m in 0..=self.lmax {
                let cm = &self.cosm[m * self.nlon..(m + 1) * self.nlon];
                let sm = &self.sinm[m * self.nlon..(m + 1) * self.nlon];
                let mut sa = 0.0;
                let mut sb = 0.0;
                for j in 0..self.nlon {
                    sa += row[j] * cm[j];
                    sb += row[j] * sm[j];
                }
                a[m * self.nlat + i] = sa;
                b[m * self.nlat + i] = sb;
            }
        }
        (a, b)
    }
}

/// Expand `f` in orthonormal real harmonics up to degree `lmax` via grid
/// quadrature. Exact for band-limited fields.
pub fn analyze(f: &ScalarField, lmax: usize) -> Result<SpectralCoeffs> {
    let grid = f.grid();
    let plan = Plan::new(grid, lmax)?;
    let (a, b) = plan.fourier_moments(f.values());
    let mut c = SpectralCoeffs::zeros(lmax);
    for m in 0..=lmax {
        let scale = if m == 0 { 1.0 } else { SQRT2 };
        for l in m..=lmax {
            let mut sc = 0.0;
            let mut ss = 0.0;
            for i in 0..plan.nlat {
                let q = plan.plm[i * plan.npairs + pair(l, m)] * grid.ring_weight(i);
                sc += q * a[m * plan.nlat + i];
                if m > 0 {
                    ss += q * b[m * plan.nlat + i];
                }
            }
            c.set(l, m as i64, scale * sc);
            if m > 0 {
                c.set(l, -(m as i64), scale * ss);
            }
        }
    }
    Ok(c)
}

/// Evaluate the harmonic expansion on a grid. Inverse of [`analyze`] on
/// band-limited fields.
pub fn synthesize(c: &SpectralCoeffs, grid: &Arc<SphericalGrid>) -> Result<ScalarField> {
    let plan = Plan::new(grid, c.lmax())?;
    synth_with_tables(c, grid, &plan, false)
}

fn synth_with_tables(
    c: &SpectralCoeffs,
    grid: &Arc<SphericalGrid>,
    plan: &Plan,
    use_dtheta: bool,
) -> Result<ScalarField> {
    let table = if use_dtheta { &plan.dplm } else { &plan.plm };
    let lmax = plan.lmax;
    let mut values = vec![0.0; plan.nlat * plan.nlon];
    let mut gc = vec![0.0; lmax + 1];
    let mut gs = vec![0.0; lmax + 1];
    for i in 0..plan.nlat {
        let q = &table[i * plan.npairs..(i + 1) * plan.npairs];
        for m in 0..=lmax {
            let mut sc = 0.0;
            let mut ss = 0.0;
            for l in m..=lmax {
                sc += q[pair(l, m)] * c.get(l, m as i64);
                if m > 0 {
                    ss += q[pair(l, m)] * c.get(l, -(m as i64));
                }
            }
            gc[m] = sc;
            gs[m] = ss;
        }
        let row = &mut values[i * plan.nlon..(i + 1) * plan.nlon];
        for j in 0..plan.nlon {
            let mut v = gc[0];
            for m in 1..=lmax {
                v += SQRT2
                    * (gc[m] * plan.cosm[m * plan.nlon + j]
                        + gs[m] * plan.sinm[m * plan.nlon + j]);
            }
            row[j] = v;
        }
    }
    ScalarField::from_values(grid, values)
}

/// Spectral gradient components of `f`: (∂θf, (1/sinθ)∂φf) at grid
/// bandwidth L = nlat−1.
pub fn gradient(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let grid = f.grid();
    let lmax = grid.nlat() - 1;
    let plan = Plan::new(grid, lmax)?;
    let c = analyze(f, lmax)?;

    let dtheta = synth_with_tables(&c, grid, &plan, true)?;

    // (1/sinθ)∂φ: multiply by m, swap cos/sin buckets.
    let mut values = vec![0.0; plan.nlat * plan.nlon];
    let mut gc = vec![0.0; lmax + 1];
    let mut gs = vec![0.0; lmax + 1];
    for i in 0..plan.nlat {
        let s = grid.thetas()[i].sin();
        let q = &plan.plm[i * plan.npairs..(i + 1) * plan.npairs];
        for m in 1..=lmax {
            let mut sc = 0.0;
            let mut ss = 0.0;
            for l in m..=lmax {
                sc += q[pair(l, m)] * c.get(l, m as i64);
                ss += q[pair(l, m)] * c.get(l, -(m as i64));
            }
            gc[m] = sc;
            gs[m] = ss;
        }
        let row = &mut values[i * plan.nlon..(i + 1) * plan.nlon];
        for j in 0..plan.nlon {
            let mut v = 0.0;
            for m in 1..=lmax {
                v += SQRT2 * m as f64
                    * (-gc[m] * plan.sinm[m * plan.nlon + j]
                        + gs[m] * plan.cosm[m * plan.nlon + j]);
            }
            row[j] = v / s;
        }
    }
    let dphi = ScalarField::from_values(grid, values)?;
    Ok((dtheta, dphi))
}

/// Spectral Laplacian: multiply each (l, m) coefficient by −l(l+1).
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    let lmax = f.grid().nlat() - 1;
    let mut c = analyze(f, lmax)?;
    for l in 0..=lmax {
        let eig = -(l as f64) * (l as f64 + 1.0);
        for m in -(l as i64)..=l as i64 {
            c.set(l, m, eig * c.get(l, m));
        }
    }
    synthesize(&c, f.grid())
}

/// Unique zero-mean `g` with `Δg = f` at grid bandwidth. The input must
/// have zero mean (|mean| ≤ 1e−10).
pub fn inv_laplacian(f: &ScalarField) -> Result<ScalarField> {
    let m = crate::grid::mean(f);
    if m.abs() > 1e-10 {
        return Err(Error::NonZeroMean(m));
    }
    let lmax = f.grid().nlat() - 1;
    let mut c = analyze(f, lmax)?;
    c.set(0, 0, 0.0);
    for l in 1..=lmax {
        let eig = -(l as f64) * (l as f64 + 1.0);
        for mm in -(l as i64)..=l as i64 {
            c.set(l, mm, c.get(l, mm) / eig);
        }
    }
    synthesize(&c, f.grid())
}

/// The degree-1 basis F₁ = cosθ, F₂ = sinθ·cosφ, F₃ = sinθ·sinφ,
/// eigenfunctions of the Laplacian with eigenvalue −2.
pub fn degree1_basis(grid: &Arc<SphericalGrid>) -> (ScalarField, ScalarField, ScalarField) {
    (
        ScalarField::from_fn(grid, |t, _| t.cos()),
        ScalarField::from_fn(grid, |t, p| t.sin() * p.cos()),
        ScalarField::from_fn(grid, |t, p| t.sin() * p.sin()),
    )
}

// --- coefficient file format -------------------------------------------
//
// Header `sphcoef v1 L=<L>`, lines `<l> <m> <value>`; omitted entries are
// zero.

pub fn write_coeffs<W: Write>(out: &mut W, c: &SpectralCoeffs) -> Result<()> {
    writeln!(out, "sphcoef v1 L={}", c.lmax())?;
    for (l, m, v) in c.iter() {
        if v != 0.0 {
            writeln!(out, "{l} {m} {v:.16e}")?;
        }
    }
    Ok(())
}

pub fn write_coeffs_to_path(path: &Path, c: &SpectralCoeffs) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        write_coeffs(&mut w, c)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_coeffs<R: BufRead>(input: R) -> Result<SpectralCoeffs> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty coefficient file".into()))??;
    let lmax = header
        .split_whitespace()
        .nth(2)
        .and_then(|t| t.strip_prefix("L="))
        .and_then(|t| t.parse::<usize>().ok())
        .filter(|_| header.starts_with("sphcoef v1 "))
        .ok_or_else(|| Error::Parse(format!("bad coefficient header: {header:?}")))?;
    let mut c = SpectralCoeffs::zeros(lmax);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = || Error::Parse(format!("bad coefficient line: {line:?}"));
        let l: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let m: i64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let v: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        if l > lmax || m.unsigned_abs() as usize > l {
            return Err(bad());
        }
        c.set(l, m, v);
    }
    Ok(c)
}
