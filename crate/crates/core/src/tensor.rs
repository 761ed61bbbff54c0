//! Order-2 samples, order-3 batches and the elementary multilinear
//! projection primitives.
//!
//! A multi-channel dataset is a C x K x M array: C sensor channels, K points
//! per channel, M samples. One sample is the C x K slice. An elementary
//! multilinear projection (EMP) is one unit vector per mode and maps a sample
//! to a scalar; a tensor-to-vector projection (TVP) is an ordered list of L
//! EMPs and maps a sample to an L-vector.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unit-norm invariant on projection vectors.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Which tensor mode a partial projection keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Mode 1: the channel axis (length C).
    Channel,
    /// Mode 2: the within-channel point axis (length K).
    Point,
}

/// One C x K multi-channel sample, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Array2<f64>,
}

impl Sample {
    /// Wrap a C x K matrix. Rejects empty shapes and non-finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::shape(
                "at least 1x1",
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "sample values" });
        }
        Ok(Sample { values })
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn points(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.values.nrows(), self.values.ncols())
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Flatten channel-major: channel c, point k lands at index c*K + k.
    pub fn to_flat(&self) -> Array1<f64> {
        Array1::from_iter(self.values.iter().copied())
    }

    /// Elementwise difference, used for centering.
    pub fn minus(&self, other: &Sample) -> Result<Sample> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{}x{}", other.channels(), other.points()),
                format!("{}x{}", self.channels(), self.points()),
            ));
        }
        Ok(Sample {
            values: &self.values - &other.values,
        })
    }
}

/// An ordered batch of samples sharing one (C, K) shape, with optional
/// contiguous class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBatch {
    samples: Vec<Sample>,
    labels: Option<Vec<usize>>,
}

impl TensorBatch {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let shape = samples[0].shape();
        for (i, s) in samples.iter().enumerate() {
            if s.shape() != shape {
                return Err(Error::shape(
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{} (sample {})", s.channels(), s.points(), i),
                ));
            }
        }
        Ok(TensorBatch { samples, labels: None })
    }

    /// Attach class labels; they must cover 0..n_classes-1 contiguously.
    pub fn with_labels(samples: Vec<Sample>, labels: Vec<usize>) -> Result<Self> {
        let mut batch = TensorBatch::new(samples)?;
        if labels.len() != batch.samples.len() {
            return Err(Error::InvalidLabels(format!(
                "{} labels for {} samples",
                labels.len(),
                batch.samples.len()
            )));
        }
        let max = *labels.iter().max().unwrap();
        let mut seen = vec![false; max + 1];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidLabels(format!(
                "class ids must be contiguous 0..{}",
                max
            )));
        }
        batch.labels = Some(labels);
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.samples[0].channels()
    }

    pub fn points(&self) -> usize {
        self.samples[0].points()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct classes, when labels are present.
    pub fn class_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Elementwise mean sample.
    pub fn mean_sample(&self) -> Sample {
        let mut acc = Array2::<f64>::zeros(self.samples[0].values.raw_dim());
        for s in &self.samples {
            acc += &s.values;
        }
        acc /= self.samples.len() as f64;
        Sample { values: acc }
    }
}

/// One elementary multilinear projection: a unit vector per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emp {
    v1: Array1<f64>,
    v2: Array1<f64>,
}

impl Emp {
    /// Build an EMP, renormalizing each vector to unit Euclidean norm.
    /// Eigen-solvers only normalize to machine precision, so construction
    /// renormalizes rather than rejecting near-unit input.
    pub fn new(v1: Array1<f64>, v2: Array1<f64>) -> Result<Self> {
        Ok(Emp {
            v1: normalize(v1)?,
            v2: normalize(v2)?,
        })
    }

    /// Channel-mode unit vector, length C.
    pub fn v1(&self) -> &Array1<f64> {
        &self.v1
    }

    /// Point-mode unit vector, length K.
    pub fn v2(&self) -> &Array1<f64> {
        &self.v2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.v1.len(), self.v2.len())
    }
}

fn normalize(mut v: Array1<f64>) -> Result<Array1<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { context: "projection vector" });
    }
    let norm = v.dot(&v).sqrt();
    if norm < 1e-300 {
        return Err(Error::ZeroVector);
    }
    if (norm - 1.0).abs() > 0.0 {
        v.mapv_inplace(|x| x / norm);
    }
    Ok(v)
}

/// A tensor-to-vector projection: L EMPs sharing one (C, K) shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tvp {
    emps: Vec<Emp>,
}

impl Tvp {
    pub fn new(emps: Vec<Emp>) -> Result<Self> {
        if emps.is_empty() {
            return Err(Error::InvalidArgument(
                "a TVP needs at least one EMP".into(),
            ));
        }
        let shape = emps[0].shape();
        for (i, e) in emps.iter().enumerate() {
            if e.shape() != shape {
                return Err(Error::shape(
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{} (EMP {})", e.shape().0, e.shape().1, i),
                ));
            }
        }
        Ok(Tvp { emps })
    }

    pub fn len(&self) -> usize {
        self.emps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emps.is_empty()
    }

    pub fn emps(&self) -> &[Emp] {
        &self.emps
    }

    pub fn shape(&self) -> (usize, usize) {
        self.emps[0].shape()
    }
}

/// Project all modes except `mode` against `v`.
///
/// `mode = Channel` contracts the point axis (`v` has length K, the result
/// length C); `mode = Point` contracts the channel axis.
pub fn partial_project(sample: &Sample, v: &Array1<f64>, mode: Mode) -> Result<Array1<f64>> {
    let (c, k) = sample.shape();
    match mode {
        Mode::Channel => {
            if v.len() != k {
                return Err(Error::shape(
                    format!("vector of length {} for a {}x{} sample", k, c, k),
                    format!("length {}", v.len()),
                ));
            }
            Ok(sample.values.dot(v))
        }
        Mode::Point => {
            if v.len() != c {
                return Err(Error::shape(
                    format!("vector of length {} for a {}x{} sample", c, c, k),
                    format!("length {}", v.len()),
                ));
            }
            Ok(sample.values.t().dot(v))
        }
    }
}

/// Project a sample to a scalar through one EMP: y = v1' X v2.
pub fn emp_project(sample: &Sample, emp: &Emp) -> Result<f64> {
    let (c, k) = sample.shape();
    if emp.shape() != (c, k) {
        return Err(Error::shape(
            format!("{}x{}", c, k),
            format!("EMP for {}x{}", emp.shape().0, emp.shape().1),
        ));
    }
    Ok(emp.v1.dot(&sample.values.dot(&emp.v2)))
}

/// Project a sample to an L-vector: entry l comes from the l-th EMP.
pub fn tvp_project(sample: &Sample, tvp: &Tvp) -> Result<Array1<f64>> {
    let mut out = Array1::<f64>::zeros(tvp.len());
    for (l, emp) in tvp.emps().iter().enumerate() {
        out[l] = emp_project(sample, emp)?;
    }
    Ok(out)
}

/// Unfold a batch into an M x (C*K) matrix; row m is sample m flattened
/// channel-major.
pub fn unfold(batch: &TensorBatch) -> Array2<f64> {
    let (c, k) = (batch.channels(), batch.points());
    let mut out = Array2::<f64>::zeros((batch.len(), c * k));
    for (m, s) in batch.samples().iter().enumerate() {
        for (dst, src) in out.row_mut(m).iter_mut().zip(s.values.iter()) {
            *dst = *src;
        }
    }
    out
}

/// Rebuild a batch from an unfolded matrix. Inverse of [`unfold`] for the
/// channel-major layout.
pub fn refold(matrix: &Array2<f64>, channels: usize, points: usize) -> Result<TensorBatch> {
    if matrix.ncols() != channels * points {
        return Err(Error::shape(
            format!("{} columns ({}x{})", channels * points, channels, points),
            format!("{} columns", matrix.ncols()),
        ));
    }
    let samples = matrix
        .rows()
        .into_iter()
        .map(|row| {
            let values =
                Array2::from_shape_vec((channels, points), row.iter().copied().collect())
                    .expect("row length checked above");
            Sample::new(values)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorBatch::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn sample_2x2() -> Sample {
        Sample::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap()
    }

    #[test]
    fn partial_project_basis_vectors() {
        let s = sample_2x2();
        let r = partial_project(&s, &array![1.0, 0.0], Mode::Channel).unwrap();
        assert_eq!(r, array![1.0, 3.0]);
        let r = partial_project(&s, &array![0.0, 1.0], Mode::Point).unwrap();
        assert_eq!(r, array![3.0, 4.0]);
    }

    #[test]
    fn partial_project_uniform_sample() {
        let s = Sample::new(Array2::from_elem((4, 128), 1.0)).unwrap();
        let v = Array1::from_elem(128, 1.0 / 128.0_f64.sqrt());
        let r = partial_project(&s, &v, Mode::Channel).unwrap();
        assert_eq!(r.len(), 4);
        for x in r.iter() {
            assert_abs_diff_eq!(*x, 128.0_f64.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn partial_project_rejects_wrong_length() {
        let s = sample_2x2();
        let err = partial_project(&s, &array![1.0, 0.0, 0.0], Mode::Channel).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("length 3") && msg.contains("2x2"), "{msg}");
    }

    #[test]
    fn emp_project_uniform_closed_form() {
        // All-ones 4x128 against uniform unit vectors gives sqrt(C*K).
        let s = Sample::new(Array2::from_elem((4, 128), 1.0)).unwrap();
        let emp = Emp::new(
            Array1::from_elem(4, 0.5),
            Array1::from_elem(128, 1.0 / 128.0_f64.sqrt()),
        )
        .unwrap();
        assert_abs_diff_eq!(
            emp_project(&s, &emp).unwrap(),
            512.0_f64.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn emp_project_basis_selects_entry() {
        let s = sample_2x2();
        let emp = Emp::new(array![0.0, 1.0], array![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(emp_project(&s, &emp).unwrap(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn emp_project_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let values = Array2::from_shape_fn((3, 5), |_| rng.random_range(-2.0..2.0));
        let s = Sample::new(values.clone()).unwrap();
        let v1 = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
        let v2 = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
        let emp = Emp::new(v1, v2).unwrap();
        // Brute-force double sum over the normalized vectors.
        let mut want = 0.0;
        for c in 0..3 {
            for k in 0..5 {
                want += values[[c, k]] * emp.v1()[c] * emp.v2()[k];
            }
        }
        assert_abs_diff_eq!(emp_project(&s, &emp).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn tvp_project_per_emp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let s = Sample::new(Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0)))
            .unwrap();
        let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
            Emp::new(
                Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0)),
                Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0)),
            )
            .unwrap()
        };
        let emps = vec![mk(&mut rng), mk(&mut rng), mk(&mut rng)];
        let tvp = Tvp::new(emps.clone()).unwrap();
        let y = tvp_project(&s, &tvp).unwrap();
        for l in 0..3 {
            assert_abs_diff_eq!(y[l], emp_project(&s, &emps[l]).unwrap(), epsilon = 1e-14);
        }
        // Duplicated EMP produces equal entries.
        let dup = Tvp::new(vec![emps[0].clone(), emps[0].clone()]).unwrap();
        let y = tvp_project(&s, &dup).unwrap();
        assert_eq!(y[0], y[1]);
    }

    #[test]
    fn emp_renormalizes_on_construction() {
        let emp = Emp::new(array![3.0, 4.0], array![2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(emp.v1().dot(emp.v1()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(emp.v2().dot(emp.v2()), 1.0, epsilon = 1e-15);
        assert!(Emp::new(array![0.0, 0.0], array![1.0, 0.0]).is_err());
    }

    #[test]
    fn unfold_layout() {
        let b = TensorBatch::new(vec![sample_2x2()]).unwrap();
        let u = unfold(&b);
        assert_eq!(u.row(0).to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        let b2 = TensorBatch::new(vec![sample_2x2(), sample_2x2()]).unwrap();
        let u2 = unfold(&b2);
        assert_eq!(u2.row(0), u2.row(1));
    }

    #[test]
    fn labels_must_be_contiguous() {
        let samples = vec![sample_2x2(), sample_2x2(), sample_2x2()];
        assert!(TensorBatch::with_labels(samples.clone(), vec![0, 2, 2]).is_err());
        let b = TensorBatch::with_labels(samples, vec![0, 1, 1]).unwrap();
        assert_eq!(b.class_count(), Some(2));
    }

    #[test]
    fn sample_rejects_non_finite() {
        assert!(Sample::new(array![[1.0, f64::NAN]]).is_err());
        assert!(Sample::new(array![[1.0, f64::INFINITY]]).is_err());
    }

    proptest! {
        #[test]
        fn emp_project_is_bilinear(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
            let y = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let emp = Emp::new(
                Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0) + 0.1),
                Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0) + 0.1),
            ).unwrap();
            let lhs = emp_project(
                &Sample::new(a * &x + b * &y).unwrap(), &emp).unwrap();
            let rhs = a * emp_project(&Sample::new(x).unwrap(), &emp).unwrap()
                + b * emp_project(&Sample::new(y).unwrap(), &emp).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn emp_project_agrees_with_partials(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let s = Sample::new(
                Array2::from_shape_fn((4, 6), |_| rng.random_range(-1.0..1.0))).unwrap();
            let emp = Emp::new(
                Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0) + 0.05),
                Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0) + 0.05),
            ).unwrap();
            let direct = emp_project(&s, &emp).unwrap();
            let via_mode1 = partial_project(&s, emp.v2(), Mode::Channel)
                .unwrap()
                .dot(emp.v1());
            let via_mode2 = partial_project(&s, emp.v1(), Mode::Point)
                .unwrap()
                .dot(emp.v2());
            prop_assert!((direct - via_mode1).abs() <= 1e-12);
            prop_assert!((direct - via_mode2).abs() <= 1e-12);
        }

        #[test]
        fn unfold_refold_round_trip(m in 1usize..6, c in 1usize..4, k in 1usize..6, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let samples: Vec<Sample> = (0..m)
                .map(|_| Sample::new(
                    Array2::from_shape_fn((c, k), |_| rng.random_range(-5.0..5.0))).unwrap())
                .collect();
            let batch = TensorBatch::new(samples).unwrap();
            let back = refold(&unfold(&batch), c, k).unwrap();
            prop_assert_eq!(batch.samples(), back.samples());
        }
    }
}
