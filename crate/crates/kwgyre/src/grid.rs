//! Spherical grids and pointwise field algebra.
//!
//! The grid is Gauss–Legendre in cosθ crossed with uniformly spaced
//! longitudes, so that quadrature is exact for spherical polynomials of
//! degree ≤ 2·nlat−1 in cosθ and the poles are never sampled (the metric
//! factor 1/sin²θ stays finite on every node).
//!
//! The volume element is dΩ = sinθ dθ dφ and the total solid angle is 4π.
//!
//! ```
//! use kwgyre::grid::{build_grid, integrate, ScalarField};
//!
//! let grid = build_grid(16, 32)?;
//! let one = ScalarField::constant(&grid, 1.0);
//! let total = integrate(&one);
//! assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-13);
//!
//! // sin²θ is a degree-2 polynomial in cosθ: integrated exactly
//! let f = ScalarField::from_fn(&grid, |theta, _phi| theta.sin().powi(2));
//! assert!((integrate(&f) - 8.0 * std::f64::consts::PI / 3.0).abs() < 1e-13);
//! # Ok::<(), kwgyre::Error>(())
//! ```

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::{Error, Result};

/// Quadrature nodes and weights on S².
///
/// Colatitudes are strictly increasing in (0, π); longitudes are
/// `φ_j = 2πj/nlon`. Per-cell weights are the Gauss–Legendre weight of the
/// ring times `2π/nlon`, and sum to 4π.
#[derive(Debug)]
pub struct SphericalGrid {
    nlat: usize,
    nlon: usize,
    thetas: Vec<f64>,
    phis: Vec<f64>,
    /// Per-ring solid-angle weight (already includes the 2π/nlon factor).
    ring_weights: Vec<f64>,
}

impl SphericalGrid {
    pub fn nlat(&self) -> usize {
        self.nlat
    }

    pub fn nlon(&self) -> usize {
        self.nlon
    }

    pub fn nnodes(&self) -> usize {
        self.nlat * self.nlon
    }

    /// Colatitudes, strictly increasing, all interior to (0, π).
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    /// Solid-angle weight of every cell in ring `i` (θ = thetas[i]).
    pub fn ring_weight(&self, i: usize) -> f64 {
        self.ring_weights[i]
    }

    /// Weight of the cell with flat node index `idx` (row-major, θ outer).
    pub fn weight(&self, idx: usize) -> f64 {
        self.ring_weights[idx / self.nlon]
    }

    /// (θ, φ) of the flat node index.
    pub fn node_angles(&self, idx: usize) -> (f64, f64) {
        (self.thetas[idx / self.nlon], self.phis[idx % self.nlon])
    }

    pub fn same_grid(&self, other: &SphericalGrid) -> bool {
        self.nlat == other.nlat && self.nlon == other.nlon && self.thetas == other.thetas
    }
}

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Build a Gauss–Legendre × uniform grid.
///
/// Requires `nlat >= 4` and `nlon >= 2*nlat` (enough longitudes for
/// degree-(nlat−1) transforms without aliasing).
pub fn build_grid(nlat: usize, nlon: usize) -> Result<Arc<SphericalGrid>> {
    if nlat < 4 {
        return Err(Error::InvalidArgument(format!("nlat = {nlat} < 4")));
    }
    if nlon < 2 * nlat {
        return Err(Error::InvalidArgument(format!(
            "nlon = {nlon} < 2*nlat = {}",
            2 * nlat
        )));
    }
    let (x, w) = gauss_legendre(nlat);
    // x ascending  =>  θ = arccos(x) descending; reverse for increasing θ.
    let thetas: Vec<f64> = x.iter().rev().map(|&xi| xi.acos()).collect();
    let ring_weights: Vec<f64> = w
        .iter()
        .rev()
        .map(|&wi| wi * 2.0 * std::f64::consts::PI / nlon as f64)
        .collect();
    let phis: Vec<f64> = (0..nlon)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / nlon as f64)
        .collect();
    Ok(Arc::new(SphericalGrid {
        nlat,
        nlon,
        thetas,
        phis,
        ring_weights,
    }))
}

/// A real-valued function sampled on a [`SphericalGrid`], row-major
/// (θ outer, φ inner). All values are finite.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<SphericalGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Sample `f(θ, φ)` on every node.
    pub fn from_fn(grid: &Arc<SphericalGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nnodes());
        for &theta in grid.thetas() {
            for &phi in grid.phis() {
                values.push(f(theta, phi));
            }
        }
        ScalarField {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<SphericalGrid>, v: f64) -> Self {
        ScalarField {
            grid: Arc::clone(grid),
            values: vec![v; grid.nnodes()],
        }
    }

    /// Wrap raw row-major values; length must match the grid.
    pub fn from_values(grid: &Arc<SphericalGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nnodes() {
            return Err(Error::InvalidArgument(format!(
                "values length {} != nlat*nlon = {}",
                values.len(),
                grid.nnodes()
            )));
        }
        Ok(ScalarField {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise application; rejects non-finite results.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field_map produced a non-finite value".into()));
        }
        Ok(ScalarField {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    /// Pointwise binary combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !self.grid.same_grid(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "field_combine produced a non-finite value".into(),
            ));
        }
        Ok(ScalarField {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    /// Minimal value and the flat node index where it is attained
    /// (first occurrence in row-major order).
    pub fn min_node(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn max_node(&self) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Compensated (Kahan) sum in fixed row-major order.
fn kahan_sum(it: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in it {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Quadrature approximation of ∫_{S²} f dΩ, exact for band-limited fields.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid();
    kahan_sum(
        f.values()
            .iter()
            .enumerate()
            .map(|(i, &v)| g.ring_weight(i / g.nlon()) * v),
    )
}

/// Average value of `f` over the sphere: ∫f dΩ / 4π.
pub fn mean(f: &ScalarField) -> f64 {
    integrate(f) / (4.0 * std::f64::consts::PI)
}

/// Pointwise gradient inner product ∇a·∇b = ∂θa·∂θb + (1/sin²θ)·∂φa·∂φb,
/// with derivatives evaluated spectrally.
///
/// Same arithmetic order for (a,b) and (b,a) makes the result exactly
/// symmetric.
pub fn grad_dot(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    if !a.grid().same_grid(b.grid()) {
        return Err(Error::GridMismatch);
    }
    let (at, ap) = crate::harmonics::gradient(a)?;
    let (bt, bp) = crate::harmonics::gradient(b)?;
    let mut values = Vec::with_capacity(a.values().len());
    for i in 0..a.values().len() {
        values.push(at.value(i) * bt.value(i) + ap.value(i) * bp.value(i));
    }
    ScalarField::from_values(a.grid(), values)
}

// --- field file format ------------------------------------------------
//
// Header `sphfield v1 nlat=<n> nlon=<m>` followed by nlat*nlon lines
// `<theta> <phi> <value>` in row-major order. Values are printed with 17
// significant digits so doubles round-trip exactly.

pub fn write_field<W: Write>(out: &mut W, f: &ScalarField) -> Result<()> {
    let g = f.grid();
    writeln!(out, "sphfield v1 nlat={} nlon={}", g.nlat(), g.nlon())?;
    for (i, &v) in f.values().iter().enumerate() {
        let (theta, phi) = g.node_angles(i);
        writeln!(out, "{theta:.16e} {phi:.16e} {v:.16e}")?;
    }
    Ok(())
}

pub fn write_field_to_path(path: &Path, f: &ScalarField) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        write_field(&mut w, f)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_field<R: BufRead>(input: R) -> Result<ScalarField> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))??;
    let (nlat, nlon) = parse_field_header(&header)?;
    let grid = build_grid(nlat, nlon)?;
    let mut values = Vec::with_capacity(nlat * nlon);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let _theta: f64 = next_f64(&mut parts, &line)?;
        let _phi: f64 = next_f64(&mut parts, &line)?;
        values.push(next_f64(&mut parts, &line)?);
    }
    if values.len() != nlat * nlon {
        return Err(Error::Parse(format!(
            "expected {} value lines, got {}",
            nlat * nlon,
            values.len()
        )));
    }
    let f = ScalarField::from_values(&grid, values)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("field file contains non-finite values".into()));
    }
    Ok(f)
}

pub fn read_field_from_path(path: &Path) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

fn parse_field_header(header: &str) -> Result<(usize, usize)> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some("sphfield") || parts.next() != Some("v1") {
        return Err(Error::Parse(format!("bad field header: {header:?}")));
    }
    let mut nlat = None;
    let mut nlon = None;
    for p in parts {
        if let Some(v) = p.strip_prefix("nlat=") {
            nlat = v.parse().ok();
        } else if let Some(v) = p.strip_prefix("nlon=") {
            nlon = v.parse().ok();
        }
    }
    match (nlat, nlon) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Parse(format!("bad field header: {header:?}"))),
    }
}

fn next_f64<'a>(parts: &mut impl Iterator<Item = &'a str>, line: &str) -> Result<f64> {
    parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad field line: {line:?}")))
}
