//! Feature extractors: UMLDA plus the VPCA / MPCA / UMPCA baselines.
//!
//! All four map a C x K sample to a J-vector of monitoring features and are
//! linear once the training mean has been subtracted. UMLDA and UMPCA share
//! the sequential tensor-to-vector construction: EMPs are extracted one at a
//! time, each constrained so its coordinate vector (the per-sample projected
//! values across the training set) is uncorrelated with all earlier ones.

mod mpca;
mod scatter;
mod umlda;
mod umpca;
mod vpca;

pub use mpca::{mpca_train, MpcaModel};
pub use scatter::{mode_scatters, scatter_scalars, total_scatter, ScatterPair};
pub use umlda::{umlda_train, UmldaModel};
pub use umpca::{umpca_train, UmpcaModel};
pub use vpca::{vpca_train, VpcaModel};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{tvp_project, Mode, Sample, TensorBatch};

/// Extractor family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Vpca,
    Umpca,
    Mpca,
    Umlda,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vpca, Method::Umpca, Method::Mpca, Method::Umlda];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Vpca => "vpca",
            Method::Umpca => "umpca",
            Method::Mpca => "mpca",
            Method::Umlda => "umlda",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vpca" => Ok(Method::Vpca),
            "umpca" => Ok(Method::Umpca),
            "mpca" => Ok(Method::Mpca),
            "umlda" => Ok(Method::Umlda),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{}', expected one of vpca, umpca, mpca, umlda",
                other
            ))),
        }
    }
}

/// Starting point for the alternating EMP solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Normalized all-ones vectors. Deterministic default.
    Ones,
    /// Unit vectors drawn from the given seed.
    Seeded(u64),
}

/// Parameters for the sequential EMP trainers (UMLDA, UMPCA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// Within-class scatter regularization weight (UMLDA only): the ridge
    /// added is `gamma` times the largest within-scatter eigenvalue.
    pub gamma: f64,
    /// Maximum alternating passes per EMP.
    pub max_iters: usize,
    /// Stop when the objective improves by less than this.
    pub tol: f64,
    /// Initialization of the per-mode vectors.
    pub init: Init,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            gamma: 1e-3,
            max_iters: 20,
            tol: 1e-6,
            init: Init::Ones,
        }
    }
}

/// A trained extractor of any family, with its input shape and feature
/// dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ExtractorModel {
    Umlda(UmldaModel),
    Umpca(UmpcaModel),
    Mpca(MpcaModel),
    Vpca(VpcaModel),
}

impl ExtractorModel {
    pub fn method(&self) -> Method {
        match self {
            ExtractorModel::Umlda(_) => Method::Umlda,
            ExtractorModel::Umpca(_) => Method::Umpca,
            ExtractorModel::Mpca(_) => Method::Mpca,
            ExtractorModel::Vpca(_) => Method::Vpca,
        }
    }

    /// Feature dimension J.
    pub fn feature_dim(&self) -> usize {
        match self {
            ExtractorModel::Umlda(m) => m.tvp.len(),
            ExtractorModel::Umpca(m) => m.tvp.len(),
            ExtractorModel::Mpca(m) => m.feature_index.len(),
            ExtractorModel::Vpca(m) => m.loadings.ncols(),
        }
    }

    /// Expected sample shape (C, K).
    pub fn input_shape(&self) -> (usize, usize) {
        match self {
            ExtractorModel::Umlda(m) => m.mean.shape(),
            ExtractorModel::Umpca(m) => m.mean.shape(),
            ExtractorModel::Mpca(m) => m.mean.shape(),
            ExtractorModel::Vpca(m) => (m.channels, m.points),
        }
    }

    /// Extract the J monitoring features from one sample.
    pub fn extract(&self, sample: &Sample) -> Result<Array1<f64>> {
        let (c, k) = self.input_shape();
        if sample.shape() != (c, k) {
            return Err(Error::shape(
                format!("{}x{}", c, k),
                format!("{}x{}", sample.channels(), sample.points()),
            ));
        }
        match self {
            ExtractorModel::Umlda(m) => tvp_project(&sample.minus(&m.mean)?, &m.tvp),
            ExtractorModel::Umpca(m) => tvp_project(&sample.minus(&m.mean)?, &m.tvp),
            ExtractorModel::Mpca(m) => m.project(sample),
            ExtractorModel::Vpca(m) => m.project(sample),
        }
    }

    /// Extract features for every sample of a batch, one row per sample.
    pub fn extract_batch(&self, batch: &TensorBatch) -> Result<Array2<f64>> {
        let mut out = Array2::<f64>::zeros((batch.len(), self.feature_dim()));
        for (m, s) in batch.samples().iter().enumerate() {
            out.row_mut(m).assign(&self.extract(s)?);
        }
        Ok(out)
    }

    /// The extractor as an explicit linear map: features = W (vec(X) - vec(center)).
    ///
    /// Every family reduces to this form after centering; the matrix is
    /// J x (C*K) with vec() in channel-major order. Useful for diagnostics
    /// and for computing exact feature moments of known input distributions.
    pub fn linear_operator(&self) -> (Array2<f64>, Sample) {
        let (c, k) = self.input_shape();
        let j = self.feature_dim();
        let mut w = Array2::<f64>::zeros((j, c * k));
        match self {
            ExtractorModel::Umlda(m) => {
                fill_tvp_operator(&mut w, &m.tvp);
                (w, m.mean.clone())
            }
            ExtractorModel::Umpca(m) => {
                fill_tvp_operator(&mut w, &m.tvp);
                (w, m.mean.clone())
            }
            ExtractorModel::Mpca(m) => {
                for (row, &(p, q)) in m.feature_index.iter().enumerate() {
                    for ci in 0..c {
                        for ki in 0..k {
                            w[[row, ci * k + ki]] = m.u1[[ci, p]] * m.u2[[ki, q]];
                        }
                    }
                }
                (w, m.mean.clone())
            }
            ExtractorModel::Vpca(m) => {
                w.assign(&m.loadings.t());
                let center = Array2::from_shape_vec((c, k), m.mean.to_vec())
                    .expect("loadings row count is C*K");
                (w, Sample::new(center).expect("stored mean is finite"))
            }
        }
    }

    /// Re-check structural invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let (c, k) = self.input_shape();
        if c == 0 || k == 0 || self.feature_dim() == 0 {
            return Err(Error::InvalidArgument(
                "model has an empty shape or zero features".into(),
            ));
        }
        match self {
            ExtractorModel::Umlda(m) => validate_tvp(&m.tvp, c, k),
            ExtractorModel::Umpca(m) => validate_tvp(&m.tvp, c, k),
            ExtractorModel::Mpca(m) => {
                if m.u1.nrows() != c || m.u2.nrows() != k {
                    return Err(Error::shape(
                        format!("U1 {}xP1, U2 {}xP2", c, k),
                        format!("U1 {}x{}, U2 {}x{}", m.u1.nrows(), m.u1.ncols(), m.u2.nrows(), m.u2.ncols()),
                    ));
                }
                for &(p, q) in &m.feature_index {
                    if p >= m.u1.ncols() || q >= m.u2.ncols() {
                        return Err(Error::InvalidArgument(format!(
                            "feature index ({}, {}) outside the {}x{} core",
                            p, q, m.u1.ncols(), m.u2.ncols()
                        )));
                    }
                }
                Ok(())
            }
            ExtractorModel::Vpca(m) => {
                if m.loadings.nrows() != c * k || m.mean.len() != c * k {
                    return Err(Error::shape(
                        format!("loadings {}xJ and mean of length {}", c * k, c * k),
                        format!("loadings {}x{} and mean of length {}", m.loadings.nrows(), m.loadings.ncols(), m.mean.len()),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn validate_tvp(tvp: &crate::tensor::Tvp, c: usize, k: usize) -> Result<()> {
    if tvp.shape() != (c, k) {
        return Err(Error::shape(
            format!("EMPs of shape {}x{}", c, k),
            format!("{}x{}", tvp.shape().0, tvp.shape().1),
        ));
    }
    for emp in tvp.emps() {
        let n1 = emp.v1().dot(emp.v1()).sqrt();
        let n2 = emp.v2().dot(emp.v2()).sqrt();
        if (n1 - 1.0).abs() > crate::tensor::UNIT_NORM_TOL
            || (n2 - 1.0).abs() > crate::tensor::UNIT_NORM_TOL
        {
            return Err(Error::InvalidArgument(
                "EMP vectors are not unit norm".into(),
            ));
        }
    }
    Ok(())
}

fn fill_tvp_operator(w: &mut Array2<f64>, tvp: &crate::tensor::Tvp) {
    let (_, k) = tvp.shape();
    for (row, emp) in tvp.emps().iter().enumerate() {
        for (ci, &a) in emp.v1().iter().enumerate() {
            for (ki, &b) in emp.v2().iter().enumerate() {
                w[[row, ci * k + ki]] = a * b;
            }
        }
    }
}

/// Extract the monitoring features of `sample` under `model`.
pub fn extract_features(model: &ExtractorModel, sample: &Sample) -> Result<Array1<f64>> {
    model.extract(sample)
}

// ---------------------------------------------------------------------------
// Shared internals for the sequential EMP solvers
// ---------------------------------------------------------------------------

/// Centered copies of the batch samples plus the mean sample.
pub(crate) fn center_batch(batch: &TensorBatch) -> (Vec<Array2<f64>>, Sample) {
    let mean = batch.mean_sample();
    let centered = batch
        .samples()
        .iter()
        .map(|s| s.values() - mean.values())
        .collect();
    (centered, mean)
}

/// Partial projections of every centered sample against the other mode's
/// vector; one row per sample.
pub(crate) fn mode_partials(
    centered: &[Array2<f64>],
    v_other: &Array1<f64>,
    mode: Mode,
) -> Array2<f64> {
    let d = match mode {
        Mode::Channel => centered[0].nrows(),
        Mode::Point => centered[0].ncols(),
    };
    let mut out = Array2::<f64>::zeros((centered.len(), d));
    for (m, x) in centered.iter().enumerate() {
        let row = match mode {
            Mode::Channel => x.dot(v_other),
            Mode::Point => x.t().dot(v_other),
        };
        out.row_mut(m).assign(&row);
    }
    out
}

/// Coordinate vector of the (v1, v2) EMP over the centered samples.
pub(crate) fn coords(centered: &[Array2<f64>], v1: &Array1<f64>, v2: &Array1<f64>) -> Array1<f64> {
    Array1::from_iter(centered.iter().map(|x| v1.dot(&x.dot(v2))))
}

/// Initial per-mode unit vectors.
pub(crate) fn init_vectors(c: usize, k: usize, init: Init) -> (Array1<f64>, Array1<f64>) {
    match init {
        Init::Ones => (
            Array1::from_elem(c, 1.0 / (c as f64).sqrt()),
            Array1::from_elem(k, 1.0 / (k as f64).sqrt()),
        ),
        Init::Seeded(seed) => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut v1 = Array1::from_shape_fn(c, |_| rng.random_range(-1.0..1.0));
            let mut v2 = Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0));
            let n1 = v1.dot(&v1).sqrt().max(1e-12);
            let n2 = v2.dot(&v2).sqrt().max(1e-12);
            v1.mapv_inplace(|x| x / n1);
            v2.mapv_inplace(|x| x / n2);
            (v1, v2)
        }
    }
}

/// Matrix of previously extracted coordinate vectors, one column per EMP
/// (M x l). `None` for the first EMP.
pub(crate) fn coord_matrix(coords: &[Array1<f64>]) -> Option<Array2<f64>> {
    if coords.is_empty() {
        return None;
    }
    let m = coords[0].len();
    let mut g = Array2::<f64>::zeros((m, coords.len()));
    for (j, h) in coords.iter().enumerate() {
        g.column_mut(j).assign(h);
    }
    Some(g)
}

/// Pearson correlation of two coordinate vectors.
pub(crate) fn correlation(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let ma = a.mean().unwrap();
    let mb = b.mean().unwrap();
    let ca = a.mapv(|x| x - ma);
    let cb = b.mapv(|x| x - mb);
    let na = ca.dot(&ca).sqrt();
    let nb = cb.dot(&cb).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    ca.dot(&cb) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{self, SignalSet, SimConfig};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn random_labeled_batch(
        m: usize,
        c: usize,
        k: usize,
        classes: usize,
        seed: u64,
    ) -> TensorBatch {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let samples: Vec<Sample> = (0..m)
            .map(|i| {
                let shift = (i % classes) as f64;
                Sample::new(Array2::from_shape_fn((c, k), |_| {
                    rng.random_range(-1.0..1.0) + shift
                }))
                .unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..m).map(|i| i % classes).collect();
        TensorBatch::with_labels(samples, labels).unwrap()
    }

    #[test]
    fn method_round_trips_from_str() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("pca".parse::<Method>().is_err());
    }

    #[test]
    fn extracting_training_mean_gives_zero_for_every_method() {
        let batch = random_labeled_batch(40, 3, 8, 2, 5);
        let mean = batch.mean_sample();
        let models = [
            ExtractorModel::Umlda(
                umlda_train(&batch, 2, &TrainParams::default()).unwrap(),
            ),
            ExtractorModel::Umpca(
                umpca_train(&batch, 2, &TrainParams::default()).unwrap(),
            ),
            ExtractorModel::Mpca(mpca_train(&batch, 3, 4, 5).unwrap()),
            ExtractorModel::Vpca(vpca_train(&batch, 3).unwrap()),
        ];
        for model in &models {
            let f = model.extract(&mean).unwrap();
            for x in f.iter() {
                assert_abs_diff_eq!(*x, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn extract_rejects_wrong_shape() {
        let batch = random_labeled_batch(30, 3, 8, 2, 6);
        let model = ExtractorModel::Vpca(vpca_train(&batch, 2).unwrap());
        let bad = Sample::new(Array2::zeros((3, 9))).unwrap();
        assert!(model.extract(&bad).is_err());
    }

    #[test]
    fn linear_operator_reproduces_extraction() {
        let batch = random_labeled_batch(30, 3, 8, 2, 7);
        let probe = Sample::new(Array2::from_shape_fn((3, 8), |(i, j)| {
            (i as f64) - 0.3 * (j as f64)
        }))
        .unwrap();
        let models = [
            ExtractorModel::Umlda(
                umlda_train(&batch, 2, &TrainParams::default()).unwrap(),
            ),
            ExtractorModel::Umpca(
                umpca_train(&batch, 2, &TrainParams::default()).unwrap(),
            ),
            ExtractorModel::Mpca(mpca_train(&batch, 2, 4, 4).unwrap()),
            ExtractorModel::Vpca(vpca_train(&batch, 3).unwrap()),
        ];
        for model in &models {
            let (w, center) = model.linear_operator();
            let direct = model.extract(&probe).unwrap();
            let via = w.dot(&(probe.to_flat() - center.to_flat()));
            for (a, b) in direct.iter().zip(via.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn features_scale_linearly_with_the_batch() {
        // Scaling the whole batch by s scales every extracted feature by s.
        let batch = random_labeled_batch(36, 3, 6, 2, 11);
        let s = 3.25;
        let scaled = TensorBatch::with_labels(
            batch
                .samples()
                .iter()
                .map(|x| Sample::new(x.values() * s).unwrap())
                .collect(),
            batch.labels().unwrap().to_vec(),
        )
        .unwrap();
        let probe = batch.samples()[7].clone();
        let probe_scaled = Sample::new(probe.values() * s).unwrap();

        let pairs: Vec<(ExtractorModel, ExtractorModel)> = vec![
            (
                ExtractorModel::Umlda(umlda_train(&batch, 2, &TrainParams::default()).unwrap()),
                ExtractorModel::Umlda(umlda_train(&scaled, 2, &TrainParams::default()).unwrap()),
            ),
            (
                ExtractorModel::Umpca(umpca_train(&batch, 2, &TrainParams::default()).unwrap()),
                ExtractorModel::Umpca(umpca_train(&scaled, 2, &TrainParams::default()).unwrap()),
            ),
            (
                ExtractorModel::Mpca(mpca_train(&batch, 2, 3, 4).unwrap()),
                ExtractorModel::Mpca(mpca_train(&scaled, 2, 3, 4).unwrap()),
            ),
            (
                ExtractorModel::Vpca(vpca_train(&batch, 2).unwrap()),
                ExtractorModel::Vpca(vpca_train(&scaled, 2).unwrap()),
            ),
        ];
        for (base, big) in &pairs {
            let f0 = base.extract(&probe).unwrap();
            let f1 = big.extract(&probe_scaled).unwrap();
            for (a, b) in f0.iter().zip(f1.iter()) {
                let want = a * s;
                let tol = 1e-10 * want.abs().max(1e-6);
                assert!(
                    (b - want).abs() <= tol,
                    "{:?}: {} vs {}",
                    base.method(),
                    b,
                    want
                );
            }
        }
    }

    #[test]
    fn permuting_samples_leaves_features_fixed_up_to_sign() {
        let batch = random_labeled_batch(40, 3, 6, 2, 13);
        let mut order: Vec<usize> = (0..40).collect();
        order.reverse();
        order.swap(3, 17);
        let permuted = TensorBatch::with_labels(
            order.iter().map(|&i| batch.samples()[i].clone()).collect(),
            order.iter().map(|&i| batch.labels().unwrap()[i]).collect(),
        )
        .unwrap();
        let probe = Sample::new(Array2::from_shape_fn((3, 6), |(i, j)| {
            0.7 * (i as f64) + 0.1 * (j as f64) * (j as f64)
        }))
        .unwrap();
        let builders: Vec<(&str, Box<dyn Fn(&TensorBatch) -> ExtractorModel>)> = vec![
            (
                "umlda",
                Box::new(|b| {
                    ExtractorModel::Umlda(umlda_train(b, 2, &TrainParams::default()).unwrap())
                }),
            ),
            (
                "umpca",
                Box::new(|b| {
                    ExtractorModel::Umpca(umpca_train(b, 2, &TrainParams::default()).unwrap())
                }),
            ),
            (
                "mpca",
                Box::new(|b| ExtractorModel::Mpca(mpca_train(b, 2, 3, 4).unwrap())),
            ),
            (
                "vpca",
                Box::new(|b| ExtractorModel::Vpca(vpca_train(b, 3).unwrap())),
            ),
        ];
        for (name, build) in &builders {
            let f0 = build(&batch).extract(&probe).unwrap();
            let f1 = build(&permuted).extract(&probe).unwrap();
            for (a, b) in f0.iter().zip(f1.iter()) {
                assert!(
                    (a - b).abs() <= 1e-8 || (a + b).abs() <= 1e-8,
                    "{}: {} vs {}",
                    name,
                    a,
                    b
                );
            }
        }
    }

    #[test]
    fn vpca_and_umlda_are_linear_interpolants() {
        // f(a*X + (1-a)*mean) = a*f(X) for the centered linear extractors.
        let batch = random_labeled_batch(30, 3, 6, 2, 17);
        let mean = batch.mean_sample();
        let probe = batch.samples()[4].clone();
        let a = 0.37;
        let blend = Sample::new(probe.values() * a + mean.values() * (1.0 - a)).unwrap();
        let models = [
            ExtractorModel::Umlda(umlda_train(&batch, 2, &TrainParams::default()).unwrap()),
            ExtractorModel::Vpca(vpca_train(&batch, 3).unwrap()),
        ];
        for model in &models {
            let f_blend = model.extract(&blend).unwrap();
            let f_probe = model.extract(&probe).unwrap();
            for (x, y) in f_blend.iter().zip(f_probe.iter()) {
                assert_abs_diff_eq!(*x, a * y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn simulated_training_features_are_uncorrelated() {
        // Run the two TVP extractors on realistic generator output.
        let config = SimConfig::paper_default();
        let signals = SignalSet::benchmark(32).unwrap();
        let batch = simgen::generate_labeled_dataset(&config, &signals, 30, 99).unwrap();
        let umlda = umlda_train(&batch, 4, &TrainParams::default()).unwrap();
        let umpca = umpca_train(&batch, 4, &TrainParams::default()).unwrap();
        for coords in [&umlda.training_coords, &umpca.training_coords] {
            for i in 0..coords.len() {
                for j in 0..i {
                    let r = correlation(&coords[i], &coords[j]).abs();
                    assert!(r <= 1e-6, "|corr(h_{}, h_{})| = {}", i, j, r);
                }
            }
        }
    }

    #[test]
    fn correlation_of_orthogonal_centered_vectors_is_zero() {
        let a = array![1.0, -1.0, 1.0, -1.0];
        let b = array![1.0, 1.0, -1.0, -1.0];
        assert_abs_diff_eq!(correlation(&a, &b), 0.0, epsilon = 1e-15);
    }
}
