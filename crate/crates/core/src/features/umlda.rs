//! Uncorrelated multilinear discriminant analysis.
//!
//! EMPs are extracted sequentially. For each one, an alternating scheme
//! maximizes the Fisher ratio of the projected scalars: fix one mode's
//! vector, compute per-mode partial projections, form between- and
//! within-class scatter matrices, regularize the within scatter, and take
//! the dominant eigenvector of the resulting discriminant operator. EMPs
//! after the first carry a constraint operator that keeps the new coordinate
//! vector exactly uncorrelated with every earlier one.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    center_batch, coord_matrix, coords, init_vectors, mode_partials, scatter_scalars, TrainParams,
};
use crate::linalg;
use crate::tensor::{Emp, Mode, Sample, TensorBatch, Tvp};

/// A trained UMLDA extractor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UmldaModel {
    /// The L extracted EMPs, in extraction order.
    pub tvp: Tvp,
    /// Training mean sample; probes are centered against it.
    pub mean: Sample,
    /// Regularization weight used during training.
    pub gamma: f64,
    /// Number of classes in the training data.
    pub class_count: usize,
    /// Coordinate vectors h_l over the training set, retained for audit.
    pub training_coords: Vec<Array1<f64>>,
    /// Fisher ratio achieved by each EMP.
    pub fisher_ratios: Vec<f64>,
    /// Fisher ratio after each alternating pass, per EMP.
    pub fisher_history: Vec<Vec<f64>>,
    /// Whether each EMP's alternation stopped by tolerance (vs. hitting the
    /// iteration cap). A `false` entry means the best iterate was kept.
    pub converged: Vec<bool>,
}

/// Train a UMLDA extractor with `l` features on a labeled batch.
pub fn umlda_train(batch: &TensorBatch, l: usize, params: &TrainParams) -> Result<UmldaModel> {
    let labels = batch
        .labels()
        .ok_or_else(|| Error::InvalidLabels("UMLDA requires class labels".into()))?
        .to_vec();
    let class_count = batch.class_count().unwrap_or(0);
    if class_count < 2 {
        return Err(Error::SingleClass);
    }
    let (c, k, m) = (batch.channels(), batch.points(), batch.len());
    // Each uncorrelatedness constraint consumes one degree of freedom.
    let cap = c.min(k).min(m.saturating_sub(class_count));
    if l == 0 || l > cap {
        return Err(Error::InfeasibleFeatureCount {
            requested: l,
            cap,
            constraint: format!("min(C={}, K={}, M-classes={})", c, k, m - class_count),
        });
    }

    let (centered, mean) = center_batch(batch);
    let mut emps = Vec::with_capacity(l);
    let mut hs: Vec<Array1<f64>> = Vec::with_capacity(l);
    let mut ratios = Vec::with_capacity(l);
    let mut histories = Vec::with_capacity(l);
    let mut converged_flags = Vec::with_capacity(l);

    for _ in 0..l {
        let g = coord_matrix(&hs);
        let (mut v1, mut v2) = init_vectors(c, k, params.init);
        let mut history: Vec<f64> = Vec::new();
        let mut best: Option<(f64, Array1<f64>, Array1<f64>, Array1<f64>)> = None;
        let mut prev = f64::NEG_INFINITY;
        let mut converged = false;

        for _ in 0..params.max_iters {
            for mode in [Mode::Channel, Mode::Point] {
                let v_other = match mode {
                    Mode::Channel => &v2,
                    Mode::Point => &v1,
                };
                let partials = mode_partials(&centered, v_other, mode);
                let v = discriminant_direction(&partials, &labels, g.as_ref(), params.gamma)?;
                match mode {
                    Mode::Channel => v1 = v,
                    Mode::Point => v2 = v,
                }
            }
            let h = coords(&centered, &v1, &v2);
            let fisher = fisher_of(&h, &labels);
            history.push(fisher);
            if best.as_ref().map_or(true, |(b, ..)| fisher > *b) {
                best = Some((fisher, v1.clone(), v2.clone(), h));
            }
            if fisher - prev < params.tol {
                converged = true;
                break;
            }
            prev = fisher;
        }

        let (fisher, bv1, bv2, h) = best.expect("at least one alternating pass ran");
        emps.push(Emp::new(bv1, bv2)?);
        hs.push(h);
        ratios.push(fisher);
        histories.push(history);
        converged_flags.push(converged);
    }

    Ok(UmldaModel {
        tvp: Tvp::new(emps)?,
        mean,
        gamma: params.gamma,
        class_count,
        training_coords: hs,
        fisher_ratios: ratios,
        fisher_history: histories,
        converged: converged_flags,
    })
}

/// Fisher ratio of a coordinate vector; zero within-class scatter maps to
/// +inf (already maximal, no regularization needed at the scalar stage).
fn fisher_of(h: &Array1<f64>, labels: &[usize]) -> f64 {
    match scatter_scalars(h.as_slice().unwrap(), labels) {
        Ok((_, _, f)) => f,
        Err(Error::InfiniteSeparation) => f64::INFINITY,
        Err(_) => 0.0,
    }
}

/// One constrained mode update: the dominant eigenvector of
/// `SW_reg^-1 Psi S_B` where `Psi` removes the directions that would
/// correlate the new coordinate vector with the earlier ones.
fn discriminant_direction(
    partials: &Array2<f64>,
    labels: &[usize],
    g: Option<&Array2<f64>>,
    gamma: f64,
) -> Result<Array1<f64>> {
    let d = partials.ncols();
    let pair = crate::features::mode_scatters(partials.view(), labels)?;

    // Ridge scaled by the dominant within-scatter eigenvalue keeps the
    // conditioning bounded by ~1/gamma. A zero within scatter degenerates
    // to the identity (every direction is equally admissible).
    let lam_max = linalg::sym_eig_max(&pair.within);
    let mut sw = pair.within.clone();
    if lam_max > 0.0 {
        let ridge = gamma * lam_max;
        for i in 0..d {
            sw[[i, i]] += ridge;
        }
    } else {
        sw = Array2::<f64>::eye(d);
    }
    let sw_inv = linalg::psd_pinv(&sw, 1e-14);

    // Constraint pieces: Y is d x M (partials transposed), G holds earlier
    // coordinate vectors as columns.
    let op: Box<dyn Fn(&Array1<f64>) -> Array1<f64>> = match g {
        None => {
            let sb = pair.between;
            let sw_inv = sw_inv.clone();
            Box::new(move |x: &Array1<f64>| sw_inv.dot(&sb.dot(x)))
        }
        Some(g) => {
            let y = partials.t().to_owned(); // d x M
            let yg = y.dot(g); // d x (l-1)
            let w = yg.t().dot(&sw_inv); // (l-1) x d
            let inner = w.dot(&yg); // (l-1) x (l-1)
            let inner_inv = linalg::psd_pinv(&inner, 1e-12);
            let sb = pair.between;
            let sw_inv_c = sw_inv.clone();
            Box::new(move |x: &Array1<f64>| {
                let t = sb.dot(x);
                let t = &t - &yg.dot(&inner_inv.dot(&w.dot(&t)));
                sw_inv_c.dot(&t)
            })
        }
    };

    match linalg::power_iteration(d, |x| op(x), 1e-10, 1000) {
        Some(r) => Ok(r.vector),
        None => {
            // The discriminant operator vanished on the feasible subspace
            // (between-class scatter exhausted). Fall back to any feasible
            // unit vector so the uncorrelatedness constraint still holds.
            let v = match g {
                Some(g) => {
                    let y = partials.t().to_owned();
                    let p = linalg::complement_projector(&y.dot(g));
                    let mut v = p.dot(&Array1::from_elem(d, 1.0));
                    let mut idx = 0;
                    while v.dot(&v).sqrt() < 1e-12 && idx < d {
                        v = p.column(idx).to_owned();
                        idx += 1;
                    }
                    v
                }
                None => Array1::from_elem(d, 1.0),
            };
            let norm = v.dot(&v).sqrt();
            if norm < 1e-12 {
                return Err(Error::InfeasibleFeatureCount {
                    requested: g.map_or(1, |g| g.ncols() + 1),
                    cap: g.map_or(0, |g| g.ncols()),
                    constraint: "no feasible direction remains".into(),
                });
            }
            Ok(v.mapv(|x| x / norm))
        }
    }
}
