use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    /// Joint extent of the points padded by `pad` of each span. A
    /// degenerate span is widened to one unit around its value.
    pub fn padded_extent(points: impl IntoIterator<Item = (f64, f64)>, pad: f64) -> Result<Self> {
        let mut it = points.into_iter().peekable();
        if it.peek().is_none() {
            return Err(Error::Empty("no points for grid bounds".into()));
        }
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in it {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let widen = |lo: f64, hi: f64| {
            let span = hi - lo;
            if span > 0.0 {
                (lo - pad * span, hi + pad * span)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (xmin, xmax) = widen(xmin, xmax);
        let (ymin, ymax) = widen(ymin, ymax);
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite())
            && self.xmax > self.xmin
            && self.ymax > self.ymin;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("grid bounds have zero area: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub bins_x: usize,
    pub bins_y: usize,
    /// Gaussian smoothing width in bins; 0 disables smoothing.
    pub sigma: f64,
    /// Added to every cell before normalizing.
    pub epsilon: f64,
    /// `None` uses the padded extent of the points.
    pub bounds: Option<Bounds>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            bins_x: 50,
            bins_y: 50,
            sigma: 2.0,
            epsilon: 1e-10,
            bounds: None,
        }
    }
}

pub const BOUNDS_PADDING: f64 = 0.05;

/// Normalized cell masses, row-major with `y` bins outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub bounds: Bounds,
    pub bins_x: usize,
    pub bins_y: usize,
    pub sigma: f64,
    values: Vec<f64>,
}

impl DensityGrid {
    /// Wrap explicit cell values; they must be nonnegative and sum to 1.
    pub fn from_values(bounds: Bounds, bins_x: usize, bins_y: usize, values: Vec<f64>) -> Result<Self> {
        bounds.validate()?;
        if values.len() != bins_x * bins_y || values.is_empty() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {bins_x} x {bins_y} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("cell values must be finite and >= 0".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("cell values sum to {total}, not 1")));
        }
        Ok(Self {
            bounds,
            bins_x,
            bins_y,
            sigma: 0.0,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.bins_x + ix]
    }

    pub fn same_geometry(&self, other: &DensityGrid) -> bool {
        self.bounds == other.bounds && self.bins_x == other.bins_x && self.bins_y == other.bins_y
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Mirror an out-of-range index about the edges (edge cell repeated).
fn reflect(mut i: isize, n: isize) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn convolve_1d(line: &[f64], kernel: &[f64], out: &mut [f64]) {
    let n = line.len() as isize;
    let r = (kernel.len() / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (t, w) in kernel.iter().enumerate() {
            s += w * line[reflect(i as isize + t as isize - r, n)];
        }
        *o = s;
    }
}

/// Histogram on the grid, separable Gaussian smoothing (truncated at 4
/// sigma, reflecting edges), epsilon floor, then normalization.
pub fn density_estimate(points: &DMatrix<f64>, spec: &GridSpec) -> Result<DensityGrid> {
    if points.nrows() == 0 {
        return Err(Error::Empty("density needs at least one point".into()));
    }
    if points.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: points.ncols(),
        });
    }
    if spec.bins_x == 0 || spec.bins_y == 0 || !(spec.sigma >= 0.0) || !(spec.epsilon >= 0.0) {
        return Err(Error::InvalidArgument("grid needs positive bins, sigma >= 0, epsilon >= 0".into()));
    }
    let bounds = match spec.bounds {
        Some(b) => b,
        None => Bounds::padded_extent(points.row_iter().map(|r| (r[0], r[1])), BOUNDS_PADDING)?,
    };
    bounds.validate()?;
    let (bx, by) = (spec.bins_x, spec.bins_y);
    let mut counts = vec![0.0; bx * by];
    let bin = |v: f64, lo: f64, hi: f64, n: usize| -> Option<usize> {
        if !(v >= lo && v <= hi) {
            return None;
        }
        Some((((v - lo) / (hi - lo) * n as f64).floor() as usize).min(n - 1))
    };
    for r in points.row_iter() {
        match (bin(r[0], bounds.xmin, bounds.xmax, bx), bin(r[1], bounds.ymin, bounds.ymax, by)) {
            (Some(ix), Some(iy)) => counts[iy * bx + ix] += 1.0,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "point ({}, {}) outside grid bounds",
                    r[0], r[1]
                )))
            }
        }
    }
    if spec.sigma > 0.0 {
        let kernel = gaussian_kernel(spec.sigma);
        let mut tmp = vec![0.0; bx.max(by)];
        for row in counts.chunks_mut(bx) {
            convolve_1d(row, &kernel, &mut tmp[..bx]);
            row.copy_from_slice(&tmp[..bx]);
        }
        let mut col = vec![0.0; by];
        for ix in 0..bx {
            for iy in 0..by {
                col[iy] = counts[iy * bx + ix];
            }
            convolve_1d(&col, &kernel, &mut tmp[..by]);
            for iy in 0..by {
                counts[iy * bx + ix] = tmp[iy];
            }
        }
    }
    counts.iter_mut().for_each(|v| *v += spec.epsilon);
    let total: f64 = counts.iter().sum();
    counts.iter_mut().for_each(|v| *v /= total);
    Ok(DensityGrid {
        bounds,
        bins_x: bx,
        bins_y: by,
        sigma: spec.sigma,
        values: counts,
    })
}

/// Σ P ln(P / Q) over cells; cells with P = 0 contribute nothing.
pub fn kl_divergence(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    if !p.same_geometry(q) {
        return Err(Error::GridMismatch(format!(
            "{} x {} over {:?} vs {} x {} over {:?}",
            p.bins_x, p.bins_y, p.bounds, q.bins_x, q.bins_y, q.bounds
        )));
    }
    let mut kl = 0.0;
    for (&a, &b) in p.values.iter().zip(&q.values) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += a * (a / b).ln();
        }
    }
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Bounds = Bounds { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 };

    #[test]
    fn two_cell_fixture() {
        let p = DensityGrid::from_values(UNIT, 2, 1, vec![0.5, 0.5]).unwrap();
        let q = DensityGrid::from_values(UNIT, 2, 1, vec![0.25, 0.75]).unwrap();
        assert!((kl_divergence(&p, &q).unwrap() - 0.143841).abs() < 1e-6);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let other = DensityGrid::from_values(UNIT, 1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl_divergence(&p, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn single_point_is_unimodal() {
        let pts = DMatrix::from_row_slice(1, 2, &[0.31, 0.71]);
        let spec = GridSpec { bounds: Some(UNIT), ..Default::default() };
        let g = density_estimate(&pts, &spec).unwrap();
        assert!((g.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (ix, iy) = (15, 35);
        let peak = g.at(ix, iy);
        assert!(g.values().iter().all(|&v| v <= peak));
        // decreasing away from the peak along the row
        for x in ix..49 {
            assert!(g.at(x + 1, iy) <= g.at(x, iy));
        }
    }

    #[test]
    fn unsmoothed_point_occupies_one_cell() {
        let pts = DMatrix::from_row_slice(1, 2, &[0.31, 0.71]);
        let spec = GridSpec { sigma: 0.0, bounds: Some(UNIT), ..Default::default() };
        let g = density_estimate(&pts, &spec).unwrap();
        assert!((g.at(15, 35) - 1.0).abs() < 1e-6);
        assert_eq!(g.values().iter().filter(|&&v| v > 1e-6).count(), 1);
    }

    #[test]
    fn concentrated_against_floored_is_large_and_finite() {
        let spec = GridSpec { sigma: 0.0, bounds: Some(UNIT), ..Default::default() };
        let p = density_estimate(&DMatrix::from_row_slice(1, 2, &[0.1, 0.1]), &spec).unwrap();
        let q = density_estimate(&DMatrix::from_row_slice(1, 2, &[0.9, 0.9]), &spec).unwrap();
        let kl = kl_divergence(&p, &q).unwrap();
        assert!(kl.is_finite() && kl > 20.0);
        assert_ne!(kl_divergence(&q, &p).unwrap(), 0.0);
    }

    #[test]
    fn lattice_with_wide_kernel_is_flat() {
        let pts = DMatrix::from_fn(400, 2, |i, c| if c == 0 { (i % 20) as f64 } else { (i / 20) as f64 });
        let spec = GridSpec { sigma: 6.0, ..Default::default() };
        let g = density_estimate(&pts, &spec).unwrap();
        let max = g.values().iter().cloned().fold(0.0, f64::max);
        let min = g.values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.5, "{}", max / min);
    }

    #[test]
    fn errors() {
        let pts = DMatrix::from_row_slice(1, 2, &[2.0, 0.5]);
        assert!(density_estimate(&pts, &GridSpec { bounds: Some(UNIT), ..Default::default() }).is_err());
        let flat = Bounds { xmin: 0.0, xmax: 0.0, ymin: 0.0, ymax: 1.0 };
        assert!(density_estimate(&pts, &GridSpec { bounds: Some(flat), ..Default::default() }).is_err());
        assert!(density_estimate(&DMatrix::zeros(0, 2), &GridSpec::default()).is_err());
    }
}
