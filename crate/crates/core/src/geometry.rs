//! Domains, their Lebesgue measures, and uniform Monte Carlo sampling of interiors and
//! boundaries.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Lower corner of the subregion `ω = [0.25, 0.75]²` of the unit square.
pub const SUBREGION_LO: f64 = 0.25;
pub const SUBREGION_HI: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    /// `{ r_inner ≤ |x| ≤ r_outer }` in the plane.
    Annulus { r_inner: f64, r_outer: f64 },
    /// `(0, 1)^dim`.
    Hypercube { dim: usize },
    /// `(0, 1)²` with the marked subregion `ω = [0.25, 0.75]²`.
    UnitSquareWithSubregion,
}

impl Domain {
    pub fn annulus(r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner > 0.0 && r_inner < r_outer) {
            return Err(Error::Config(format!(
                "annulus radii must satisfy 0 < r_inner < r_outer, got ({r_inner}, {r_outer})"
            )));
        }
        Ok(Domain::Annulus { r_inner, r_outer })
    }

    pub fn hypercube(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("hypercube dimension must be at least 1".into()));
        }
        Ok(Domain::Hypercube { dim })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Annulus { r_inner, r_outer } => Self::annulus(r_inner, r_outer).map(|_| ()),
            Domain::Hypercube { dim } => Self::hypercube(dim).map(|_| ()),
            Domain::UnitSquareWithSubregion => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Domain::Annulus { .. } | Domain::UnitSquareWithSubregion => 2,
            Domain::Hypercube { dim } => dim,
        }
    }

    /// `(|Ω|, |∂Ω|)`.
    pub fn measures(&self) -> (f64, f64) {
        match *self {
            Domain::Annulus { r_inner, r_outer } => (
                PI * (r_outer * r_outer - r_inner * r_inner),
                2.0 * PI * (r_inner + r_outer),
            ),
            Domain::Hypercube { dim } => (1.0, 2.0 * dim as f64),
            Domain::UnitSquareWithSubregion => (1.0, 4.0),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Domain::Annulus { r_outer, .. } => (vec![-r_outer; 2], vec![r_outer; 2]),
            _ => (vec![0.0; self.dim()], vec![1.0; self.dim()]),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match *self {
            Domain::Annulus { r_inner, r_outer } => {
                let r = x[0].hypot(x[1]);
                r >= r_inner - tol && r <= r_outer + tol
            }
            _ => x.iter().all(|&v| v >= -tol && v <= 1.0 + tol),
        }
    }

    pub fn on_boundary(&self, x: &[f64], tol: f64) -> bool {
        match *self {
            Domain::Annulus { r_inner, r_outer } => {
                let r = x[0].hypot(x[1]);
                (r - r_inner).abs() <= tol || (r - r_outer).abs() <= tol
            }
            _ => {
                self.contains(x, tol) && x.iter().any(|&v| v.abs() <= tol || (v - 1.0).abs() <= tol)
            }
        }
    }
}

/// Membership in `ω = [0.25, 0.75]²`; the boundary of `ω` belongs to `ω`.
pub fn in_subregion(x: &[f64]) -> bool {
    x[..2]
        .iter()
        .all(|&v| (SUBREGION_LO..=SUBREGION_HI).contains(&v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Interior,
    Boundary,
}

/// Collocation points together with the measure of the set they are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// `n x d`, one point per row.
    pub points: Array2<f64>,
    pub support_measure: f64,
    pub kind: SampleKind,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let dim = self.dim().max(1);
        self.points
            .as_slice()
            .expect("standard layout")
            .chunks_exact(dim)
    }

    /// Monte Carlo estimate `(|D|/n) Σ g(X_i)` of `∫_D g`.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let values: Vec<f64> = self.iter().map(g).collect();
        self.support_measure * crate::scalar::pairwise_sum(&values) / self.len() as f64
    }

    /// Writes one whitespace-separated point per line.
    pub fn write_point_cloud(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for p in self.iter() {
            let line: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// `n` i.i.d. points uniform on `Ω`.
pub fn sample_interior(domain: &Domain, n: usize, seed: u64) -> SampleSet {
    let dim = domain.dim();
    let mut rng = rng::stream(seed, rng::streams::INTERIOR);
    let mut points = Array2::zeros((n, dim));
    for mut row in points.outer_iter_mut() {
        match *domain {
            Domain::Annulus { r_inner, r_outer } => {
                let u: f64 = rng.random();
                let r = (r_inner * r_inner + u * (r_outer * r_outer - r_inner * r_inner)).sqrt();
                let angle = 2.0 * PI * rng.random::<f64>();
                row[0] = r * angle.cos();
                row[1] = r * angle.sin();
            }
            _ => row.iter_mut().for_each(|v| *v = rng.random()),
        }
    }
    SampleSet {
        points,
        support_measure: domain.measures().0,
        kind: SampleKind::Interior,
        seed,
    }
}

/// `n` i.i.d. points uniform on `∂Ω`.
pub fn sample_boundary(domain: &Domain, n: usize, seed: u64) -> SampleSet {
    let dim = domain.dim();
    let mut rng = rng::stream(seed, rng::streams::BOUNDARY);
    let mut points = Array2::zeros((n, dim));
    for mut row in points.outer_iter_mut() {
        match *domain {
            Domain::Annulus { r_inner, r_outer } => {
                // Circle chosen with probability proportional to its circumference.
                let p_inner = r_inner / (r_inner + r_outer);
                let r = if rng.random::<f64>() < p_inner {
                    r_inner
                } else {
                    r_outer
                };
                let angle = 2.0 * PI * rng.random::<f64>();
                row[0] = r * angle.cos();
                row[1] = r * angle.sin();
            }
            _ => {
                // All 2d facets have unit measure.
                let facet = rng.random_range(0..2 * dim);
                row.iter_mut().for_each(|v| *v = rng.random());
                row[facet / 2] = (facet % 2) as f64;
            }
        }
    }
    SampleSet {
        points,
        support_measure: domain.measures().1,
        kind: SampleKind::Boundary,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within_three_se(samples: &[f64], expected: f64) -> bool {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean - expected).abs() <= 3.0 * (var / n).sqrt()
    }

    #[test]
    fn measures() {
        let (a, b) = Domain::annulus(1.0, 3.0).unwrap().measures();
        assert!((a - 8.0 * PI).abs() < 1e-12 && (b - 8.0 * PI).abs() < 1e-12);
        assert!((a - 25.13274).abs() < 1e-5);
        assert_eq!(Domain::hypercube(4).unwrap().measures(), (1.0, 8.0));
        assert_eq!(Domain::UnitSquareWithSubregion.measures(), (1.0, 4.0));
    }

    #[test]
    fn invalid_domains() {
        assert!(Domain::annulus(3.0, 1.0).is_err());
        assert!(Domain::annulus(0.0, 1.0).is_err());
        assert!(Domain::hypercube(0).is_err());
    }

    #[test]
    fn empty_sets_keep_measure() {
        let d = Domain::annulus(1.0, 3.0).unwrap();
        let s = sample_interior(&d, 0, 1);
        assert!(s.is_empty());
        assert_eq!(s.support_measure, d.measures().0);
        assert_eq!(sample_boundary(&d, 0, 1).support_measure, d.measures().1);
    }

    #[test]
    fn annulus_radius_moment() {
        let d = Domain::annulus(1.0, 3.0).unwrap();
        let s = sample_interior(&d, 100_000, 42);
        let r2: Vec<f64> = s.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
        assert!(within_three_se(&r2, 5.0));
        assert!(s.iter().all(|p| d.contains(p, 1e-12)));
    }

    #[test]
    fn annulus_boundary_split() {
        let d = Domain::annulus(1.0, 3.0).unwrap();
        let s = sample_boundary(&d, 100_000, 9);
        let outer: Vec<f64> = s
            .iter()
            .map(|p| if p[0].hypot(p[1]) > 2.0 { 1.0 } else { 0.0 })
            .collect();
        assert!(within_three_se(&outer, 0.75));
        for p in s.iter() {
            let r = p[0].hypot(p[1]);
            assert!((r - 1.0).abs() <= 1e-12 || (r - 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn hypercube_moments_and_facets() {
        let d = Domain::hypercube(4).unwrap();
        let s = sample_interior(&d, 100_000, 3);
        for c in 0..4 {
            let col: Vec<f64> = s.points.column(c).to_vec();
            assert!(within_three_se(&col, 0.5));
        }
        let n = 80_000;
        let b = sample_boundary(&d, n, 5);
        let mut counts = [0usize; 8];
        for p in b.iter() {
            assert!(d.on_boundary(p, 1e-12));
            let facet = (0..4)
                .find_map(|c| match p[c] {
                    v if v == 0.0 => Some(2 * c),
                    v if v == 1.0 => Some(2 * c + 1),
                    _ => None,
                })
                .unwrap();
            counts[facet] += 1;
        }
        let q = 1.0 / 8.0;
        let se = (n as f64 * q * (1.0 - q)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * q).abs() <= 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = Domain::annulus(1.0, 3.0).unwrap();
        assert_eq!(sample_interior(&d, 50, 7), sample_interior(&d, 50, 7));
        assert_eq!(sample_boundary(&d, 50, 7), sample_boundary(&d, 50, 7));
        assert_ne!(sample_interior(&d, 50, 7).points, sample_interior(&d, 50, 8).points);
    }

    #[test]
    fn subregion_membership_is_closed() {
        assert!(in_subregion(&[0.25, 0.75]));
        assert!(in_subregion(&[0.5, 0.5]));
        assert!(!in_subregion(&[0.2, 0.5]));
    }

    #[test]
    fn monte_carlo_error_decays() {
        // ∫_{(0,1)^2} x0 x1 = 1/4; the error band shrinks like n^{-1/2}.
        let d = Domain::UnitSquareWithSubregion;
        let g = |p: &[f64]| p[0] * p[1];
        let sd = (1.0f64 / 9.0 - 1.0 / 16.0).sqrt();
        for n in [1_000usize, 10_000, 100_000] {
            let mut inside = 0;
            for seed in 0..20 {
                let s = sample_interior(&d, n, seed);
                if (s.integrate(g) - 0.25).abs() <= 3.0 * sd / (n as f64).sqrt() {
                    inside += 1;
                }
            }
            assert!(inside >= 18, "n={n}: {inside}/20 within 3 SE");
        }
    }
}
