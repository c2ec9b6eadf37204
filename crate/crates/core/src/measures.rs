//! Equal-weight empirical measures over anchor states.
//!
//! An [`EmpiricalMeasure`] is the uniform discrete measure on the anchor
//! states collected so far: every point carries weight `1/n`. First and
//! second raw moments are cached with compensated summation so that
//! moment-driven coefficients can read them in O(1) and incremental
//! anchor pushes stay O(d).

use crate::error::{CoreError, Result};
use crate::numeric::KahanSum;
use std::io::Write;

/// Uniform discrete measure on a nonempty list of d-dimensional points.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    dim: usize,
    /// Flat point storage, `dim` coordinates per point.
    points: Vec<f64>,
    moments: MomentAccumulator,
    cached_mean: Vec<f64>,
}

/// Running compensated sums of coordinates and squared norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentAccumulator {
    count: usize,
    coord_sums: Vec<KahanSum>,
    sq_norm_sum: KahanSum,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            coord_sums: vec![KahanSum::new(); dim],
            sq_norm_sum: KahanSum::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.coord_sums.len());
        let mut sq = KahanSum::new();
        for (sum, &x) in self.coord_sums.iter_mut().zip(point) {
            sum.add(x);
            sq.add(x * x);
        }
        self.sq_norm_sum.add(sq.value());
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Mean of coordinate `i`.
    #[inline]
    pub fn mean_coord(&self, i: usize) -> f64 {
        self.coord_sums[i].value() / self.count as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.coord_sums.len())
            .map(|i| self.mean_coord(i))
            .collect()
    }

    /// Raw second moment, the measure of |.|^2.
    #[inline]
    pub fn second_raw_moment(&self) -> f64 {
        self.sq_norm_sum.value() / self.count as f64
    }

    pub(crate) fn coord_sum(&self, i: usize) -> f64 {
        self.coord_sums[i].value()
    }

    pub(crate) fn sq_norm_total(&self) -> f64 {
        self.sq_norm_sum.value()
    }
}

impl EmpiricalMeasure {
    /// Builds the uniform measure on `points`.
    ///
    /// Errors on an empty list or mixed dimensions.
    pub fn from_anchors<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(CoreError::EmptyMeasure)?;
        let dim = first.as_ref().len();
        if dim == 0 {
            return Err(CoreError::InvalidParameter {
                name: "points",
                reason: "zero-dimensional point".into(),
            });
        }
        let mut flat = Vec::with_capacity(dim * points.len());
        let mut moments = MomentAccumulator::new(dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            flat.extend_from_slice(p);
            moments.push(p);
        }
        let cached_mean = moments.mean();
        Ok(Self {
            dim,
            points: flat,
            moments,
            cached_mean,
        })
    }

    /// 1-d convenience constructor.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let pts: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        Self::from_anchors(&pts)
    }

    /// Internal constructor from pre-filled flat storage and accumulator.
    pub(crate) fn from_parts(dim: usize, points: Vec<f64>, moments: MomentAccumulator) -> Self {
        debug_assert_eq!(points.len(), dim * moments.count());
        let cached_mean = moments.mean();
        Self {
            dim,
            points,
            moments,
            cached_mean,
        }
    }

    /// Returns a new measure with `point` appended; moment caches are
    /// updated incrementally in O(d).
    pub fn push_anchor(&self, point: &[f64]) -> Result<Self> {
        if point.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        let mut points = self.points.clone();
        points.extend_from_slice(point);
        let mut moments = self.moments.clone();
        moments.push(point);
        let cached_mean = moments.mean();
        Ok(Self {
            dim: self.dim,
            points,
            moments,
            cached_mean,
        })
    }

    /// Uniform measure on the concatenation of equally sized component
    /// measures: the average measure of eq-(5.1)-style pooling.
    pub fn pooled(measures: &[EmpiricalMeasure]) -> Result<Self> {
        let first = measures.first().ok_or(CoreError::EmptyMeasure)?;
        let (dim, len) = (first.dim, first.len());
        for m in measures {
            if m.dim != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: m.dim,
                });
            }
            if m.len() != len {
                return Err(CoreError::PointCountMismatch {
                    left: len,
                    right: m.len(),
                });
            }
        }
        let mut flat = Vec::with_capacity(dim * len * measures.len());
        let mut moments = MomentAccumulator::new(dim);
        for m in measures {
            for p in m.iter_points() {
                flat.extend_from_slice(p);
                moments.push(p);
            }
        }
        Ok(Self::from_parts(dim, flat, moments))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.moments.count()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    /// Cached mean vector.
    pub fn mean(&self) -> &[f64] {
        &self.cached_mean
    }

    /// Cached raw second moment, the value of the measure applied to |.|^2.
    pub fn second_raw_moment(&self) -> f64 {
        self.moments.second_raw_moment()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.points.chunks_exact(self.dim)
    }

    /// 1-d points as a plain slice view.
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(CoreError::NotOneDimensional(self.dim));
        }
        Ok(&self.points)
    }

    /// Writes the points as CSV, one per row: `index,x_1,..,x_d`.
    pub fn write_points_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "index")?;
        for j in 1..=self.dim {
            write!(out, ",x_{j}")?;
        }
        writeln!(out)?;
        for (i, p) in self.iter_points().enumerate() {
            write!(out, "{i}")?;
            for x in p {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A 1-d Gaussian reference law, used as the known invariant measure in
/// oracle comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTarget {
    mean: f64,
    variance: f64,
}

impl GaussianTarget {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "variance",
                reason: format!("must be positive, got {variance}"),
            });
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Raw second moment: variance + mean^2.
    pub fn second_raw_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn from_anchors_two_points() {
        let m = EmpiricalMeasure::from_scalars(&[0.0, 2.0]).unwrap();
        assert_eq!(m.len(), 2);
        assert_relative_eq!(m.mean()[0], 1.0);
        assert_relative_eq!(m.second_raw_moment(), 2.0);
    }

    #[test]
    fn from_anchors_origin_and_point_mass() {
        let m = EmpiricalMeasure::from_anchors(&[[0.0, 0.0]]).unwrap();
        assert_eq!(m.mean(), &[0.0, 0.0]);
        assert_eq!(m.second_raw_moment(), 0.0);

        let m = EmpiricalMeasure::from_scalars(&[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(m.mean()[0], 1.0);
        assert_relative_eq!(m.second_raw_moment(), 1.0);
    }

    #[test]
    fn construction_errors() {
        let empty: &[[f64; 1]] = &[];
        assert!(matches!(
            EmpiricalMeasure::from_anchors(empty),
            Err(CoreError::EmptyMeasure)
        ));
        let mixed: &[&[f64]] = &[&[0.0], &[1.0, 2.0]];
        assert!(matches!(
            EmpiricalMeasure::from_anchors(mixed),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn push_anchor_matches_from_scratch() {
        let m = EmpiricalMeasure::from_scalars(&[0.0]).unwrap();
        let m = m.push_anchor(&[2.0]).unwrap();
        assert_relative_eq!(m.second_raw_moment(), 2.0);

        let pm = EmpiricalMeasure::from_scalars(&[1.0, 1.0])
            .unwrap()
            .push_anchor(&[1.0])
            .unwrap();
        assert_relative_eq!(pm.mean()[0], 1.0);
        assert_relative_eq!(pm.second_raw_moment(), 1.0);

        let m = EmpiricalMeasure::from_scalars(&[0.0, 2.0])
            .unwrap()
            .push_anchor(&[4.0])
            .unwrap();
        let scratch = EmpiricalMeasure::from_scalars(&[0.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(m.mean()[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(m.second_raw_moment(), 20.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(m.mean()[0], scratch.mean()[0], max_relative = 1e-12);
        assert_relative_eq!(
            m.second_raw_moment(),
            scratch.second_raw_moment(),
            max_relative = 1e-12
        );

        let mismatch = m.push_anchor(&[0.0, 1.0]);
        assert!(matches!(mismatch, Err(CoreError::DimensionMismatch { .. })));
    }

    #[test]
    fn pooled_examples() {
        let a = EmpiricalMeasure::from_scalars(&[0.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[2.0]).unwrap();
        let p = EmpiricalMeasure::pooled(&[a.clone(), b]).unwrap();
        assert_eq!(p.len(), 2);
        assert_relative_eq!(p.mean()[0], 1.0);

        let single = EmpiricalMeasure::pooled(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.len(), a.len());
        assert_eq!(single.mean()[0], a.mean()[0]);

        let c = EmpiricalMeasure::from_scalars(&[0.0, 2.0]).unwrap();
        let d = EmpiricalMeasure::from_scalars(&[1.0, 3.0]).unwrap();
        let p = EmpiricalMeasure::pooled(&[c, d]).unwrap();
        assert_eq!(p.len(), 4);
        assert_relative_eq!(p.mean()[0], 1.5, max_relative = 1e-12);
        let scratch = EmpiricalMeasure::from_scalars(&[0.0, 2.0, 1.0, 3.0]).unwrap();
        assert_relative_eq!(
            p.second_raw_moment(),
            scratch.second_raw_moment(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn pooled_rejects_unequal_counts() {
        let a = EmpiricalMeasure::from_scalars(&[0.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            EmpiricalMeasure::pooled(&[a, b]),
            Err(CoreError::PointCountMismatch { .. })
        ));
    }

    #[test]
    fn jensen_gap_is_nonnegative() {
        let m = EmpiricalMeasure::from_scalars(&[-3.0, 1.0, 2.5, 0.25]).unwrap();
        let mean_sq: f64 = m.mean().iter().map(|x| x * x).sum();
        assert!(m.second_raw_moment() - mean_sq >= -1e-12);
    }

    #[test]
    fn csv_roundtrip_shape() {
        let m = EmpiricalMeasure::from_anchors(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_points_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,x_1,x_2\n0,0,1\n1,2,3\n");
    }

    #[test]
    fn gaussian_target_validation() {
        assert!(GaussianTarget::new(0.0, 0.0).is_err());
        let g = GaussianTarget::new(1.0, 4.0).unwrap();
        assert_relative_eq!(g.second_raw_moment(), 5.0);
        assert_relative_eq!(g.std_dev(), 2.0);
    }
}
