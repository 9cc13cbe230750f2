//! Binary PPM heatmaps of fields over the `(x1, x2)` plane.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{Domain, SampleKind, SampleSet};

/// Value of the coordinates beyond the second in the cross-section.
pub const CROSS_SECTION: f64 = 0.5;

const BACKGROUND: [u8; 3] = [255, 255, 255];

/// Anchor colors of the colormap, from low to high.
const COLORMAP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Pixel centers of an `n x n` grid over the bounding box of the first two coordinates.
/// Row 0 is the top edge (largest `x2`). Returns the in-domain pixel indices and points.
pub fn grid_points(domain: &Domain, n: usize) -> (Vec<usize>, SampleSet) {
    let (lo, hi) = domain.bounding_box();
    let dim = domain.dim();
    let mut index = Vec::new();
    let mut rows = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let mut x = vec![CROSS_SECTION; dim];
            x[0] = lo[0] + (i as f64 + 0.5) / n as f64 * (hi[0] - lo[0]);
            x[1] = hi[1] - (j as f64 + 0.5) / n as f64 * (hi[1] - lo[1]);
            if domain.contains(&x, 0.0) {
                index.push(j * n + i);
                rows.extend(x);
            }
        }
    }
    let points = Array2::from_shape_vec((index.len(), dim), rows).expect("row-major grid");
    let set = SampleSet {
        points,
        support_measure: 0.0,
        kind: SampleKind::Interior,
        seed: 0,
    };
    (index, set)
}

pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * (COLORMAP.len() - 1) as f64;
    let k = (s.floor() as usize).min(COLORMAP.len() - 2);
    let f = s - k as f64;
    let mut c = [0u8; 3];
    for (ch, out) in c.iter_mut().enumerate() {
        let v = COLORMAP[k][ch] + f * (COLORMAP[k + 1][ch] - COLORMAP[k][ch]);
        *out = v.round() as u8;
    }
    c
}

/// Writes the values at the pixels `index` of an `n x n` image, scaled linearly from the
/// smallest to the largest finite value. Returns that range.
pub fn write_heatmap(path: &Path, n: usize, index: &[usize], values: &[f64]) -> Result<(f64, f64)> {
    assert_eq!(index.len(), values.len());
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut pixels = vec![BACKGROUND; n * n];
    for (&k, &v) in index.iter().zip(values) {
        let t = if span > 0.0 { (v - lo) / span } else { 0.5 };
        pixels[k] = colormap(t);
    }
    let mut bytes = format!("P6\n{n} {n}\n255\n").into_bytes();
    bytes.extend(pixels.iter().flatten());
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok((lo, hi))
}
