//! Between- and within-class scatter, scalar and per-mode matrix forms.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Between- and within-class scatter matrices for one mode.
#[derive(Debug, Clone)]
pub struct ScatterPair {
    /// S_B: sum over classes of N_c (mean_c - mean)(mean_c - mean)'.
    pub between: Array2<f64>,
    /// S_W: sum over samples of (u_m - mean_{c_m})(u_m - mean_{c_m})'.
    pub within: Array2<f64>,
}

impl ScatterPair {
    pub fn dim(&self) -> usize {
        self.between.nrows()
    }
}

fn check_labels(n: usize, labels: &[usize]) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} values",
            labels.len(),
            n
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(Error::SingleClass);
    }
    let mut seen = vec![false; classes];
    for &l in labels {
        seen[l] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::InvalidLabels(format!(
            "class ids must be contiguous 0..{}",
            classes - 1
        )));
    }
    Ok(classes)
}

/// Scalar between-class scatter, within-class scatter and their Fisher ratio
/// for projected features `y` with class `labels`.
///
/// Errors with [`Error::SingleClass`] when only one class is present and with
/// [`Error::InfiniteSeparation`] when the within-class scatter is exactly
/// zero (the ratio is unbounded and the caller must regularize).
pub fn scatter_scalars(y: &[f64], labels: &[usize]) -> Result<(f64, f64, f64)> {
    let m = y.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "scatter needs at least two samples".into(),
        ));
    }
    let classes = check_labels(m, labels)?;

    let grand = y.iter().sum::<f64>() / m as f64;
    let mut counts = vec![0usize; classes];
    let mut sums = vec![0.0f64; classes];
    for (&v, &l) in y.iter().zip(labels) {
        counts[l] += 1;
        sums[l] += v;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| s / n as f64)
        .collect();

    let s_b: f64 = means
        .iter()
        .zip(&counts)
        .map(|(&mc, &n)| n as f64 * (mc - grand) * (mc - grand))
        .sum();
    let s_w: f64 = y
        .iter()
        .zip(labels)
        .map(|(&v, &l)| (v - means[l]) * (v - means[l]))
        .sum();

    if s_w == 0.0 {
        return Err(Error::InfiniteSeparation);
    }
    Ok((s_b, s_w, s_b / s_w))
}

/// Per-mode scatter matrices from partial projections (one row per sample).
pub fn mode_scatters(partials: ArrayView2<'_, f64>, labels: &[usize]) -> Result<ScatterPair> {
    let m = partials.nrows();
    let d = partials.ncols();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "scatter needs at least two samples".into(),
        ));
    }
    let classes = check_labels(m, labels)?;

    let grand = partials.mean_axis(ndarray::Axis(0)).unwrap();
    let mut counts = vec![0usize; classes];
    let mut class_sums = Array2::<f64>::zeros((classes, d));
    for (row, &l) in partials.rows().into_iter().zip(labels) {
        counts[l] += 1;
        let mut acc = class_sums.row_mut(l);
        acc += &row;
    }

    let mut between = Array2::<f64>::zeros((d, d));
    let mut class_means = Array2::<f64>::zeros((classes, d));
    for c in 0..classes {
        let n = counts[c] as f64;
        let mean_c = class_sums.row(c).mapv(|x| x / n);
        let dev = &mean_c - &grand;
        for i in 0..d {
            for j in 0..d {
                between[[i, j]] += n * dev[i] * dev[j];
            }
        }
        class_means.row_mut(c).assign(&mean_c);
    }

    // Within-class scatter accumulated as one Gram product of the
    // class-centered rows.
    let mut centered = partials.to_owned();
    for (mut row, &l) in centered.rows_mut().into_iter().zip(labels) {
        row -= &class_means.row(l);
    }
    let within = centered.t().dot(&centered);

    Ok(ScatterPair { between, within })
}

/// Total-scatter matrix of the rows around their mean: sum of outer products
/// of centered rows. Used by the variance-maximizing extractors.
pub fn total_scatter(partials: ArrayView2<'_, f64>) -> Array2<f64> {
    let grand = partials.mean_axis(ndarray::Axis(0)).unwrap();
    let mut centered = partials.to_owned();
    for mut row in centered.rows_mut() {
        row -= &grand;
    }
    centered.t().dot(&centered)
}
