//! Null-space linear discriminant analysis: discriminants are sought
//! inside the null space of the within-class scatter, ordered by the
//! between-class scatter they capture. Classification is nearest neighbor
//! in the projected space.

use nalgebra::{DMatrix, DVector};

use super::EvalError;
use crate::tensor::eig_sym;

const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NldaModel {
    /// d x p projection with orthonormal columns, ordered by decreasing
    /// between-class scatter.
    pub projection: DMatrix<f64>,
    pub num_classes: usize,
}

#[derive(Debug, Clone)]
pub struct RecognitionCurve {
    pub dims: Vec<usize>,
    pub accuracy: Vec<f64>,
}

impl NldaModel {
    /// Projects a feature vector onto the first `dims` discriminants
    /// (all of them if `dims` exceeds the available count).
    pub fn project(&self, x: &[f64], dims: usize) -> DVector<f64> {
        let p = dims.min(self.projection.ncols());
        let v = DVector::from_column_slice(x);
        self.projection.columns(0, p).transpose() * v
    }

    pub fn dims(&self) -> usize {
        self.projection.ncols()
    }
}

fn validate(samples: &[Vec<f64>], labels: &[usize]) -> Result<usize, EvalError> {
    if samples.len() != labels.len() {
        return Err(EvalError::LabelMismatch {
            got: samples.len(),
            labels: labels.len(),
        });
    }
    let d = samples.first().map(|s| s.len()).unwrap_or(0);
    for (i, s) in samples.iter().enumerate() {
        if s.len() != d {
            return Err(EvalError::DimMismatch {
                index: i,
                got: s.len(),
                expected: d,
            });
        }
    }
    let classes = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if classes < 2 {
        return Err(EvalError::TooFewClasses(classes));
    }
    Ok(d)
}

/// Fits the NLDA projection from labeled gallery vectors.
pub fn nlda_fit(samples: &[Vec<f64>], labels: &[usize]) -> Result<NldaModel, EvalError> {
    let d = validate(samples, labels)?;
    let n = samples.len();
    let x = DMatrix::from_fn(d, n, |r, c| samples[c][r]);
    let global_mean = x.column_mean();

    // When d exceeds the sample count, work in the span of the centered
    // data (range of the total scatter) via the Gram matrix.
    let (basis, xr) = if d > n {
        let centered = {
            let mut m = x.clone();
            for mut col in m.column_iter_mut() {
                col -= &global_mean;
            }
            m
        };
        let gram = centered.transpose() * &centered;
        let eig = eig_sym(&gram)?;
        let max_l = eig.eigenvalues.first().copied().unwrap_or(0.0).max(1.0);
        let rank = eig
            .eigenvalues
            .iter()
            .take_while(|&&l| l > NULL_TOL * max_l)
            .count();
        let mut basis = DMatrix::zeros(d, rank);
        for i in 0..rank {
            let v = &centered * eig.eigenvectors.column(i);
            let norm = v.norm();
            basis.set_column(i, &(v / norm));
        }
        let xr = basis.transpose() * &x;
        (Some(basis), xr)
    } else {
        (None, x)
    };

    let dr = xr.nrows();
    // class means and scatters in the working space
    let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mean_r = xr.column_mean();
    let mut s_w = DMatrix::<f64>::zeros(dr, dr);
    let mut s_b = DMatrix::<f64>::zeros(dr, dr);
    for members in by_class.values() {
        let mut mu = DVector::<f64>::zeros(dr);
        for &i in members {
            mu += xr.column(i);
        }
        mu /= members.len() as f64;
        for &i in members {
            let diff = xr.column(i) - &mu;
            s_w += &diff * diff.transpose();
        }
        let between = &mu - &mean_r;
        s_b += (&between * between.transpose()) * members.len() as f64;
    }

    // null space of S_w
    let eig_w = eig_sym(&s_w)?;
    let max_l = eig_w.eigenvalues.first().copied().unwrap_or(0.0).max(1.0);
    let rank = eig_w
        .eigenvalues
        .iter()
        .take_while(|&&l| l > NULL_TOL * max_l)
        .count();
    if rank == dr {
        return Err(EvalError::EmptyNullSpace { rank, dim: dr });
    }
    let null_dim = dr - rank;
    let mut null_basis = DMatrix::zeros(dr, null_dim);
    for i in 0..null_dim {
        null_basis.set_column(i, &eig_w.eigenvectors.column(rank + i));
    }

    // maximize between-class scatter inside the null space
    let projected_sb = null_basis.transpose() * &s_b * &null_basis;
    let eig_b = eig_sym(&projected_sb)?;
    let w = &null_basis * eig_b.eigenvectors;

    let projection = match basis {
        Some(b) => b * w,
        None => w,
    };
    Ok(NldaModel {
        projection,
        num_classes: by_class.len(),
    })
}

/// Accuracy of nearest-neighbor matching in the discriminant space, at each
/// requested dimensionality.
pub fn recognition_curve(
    probes: &[Vec<f64>],
    probe_labels: &[usize],
    gallery: &[Vec<f64>],
    gallery_labels: &[usize],
    dims: &[usize],
) -> Result<RecognitionCurve, EvalError> {
    if probes.len() != probe_labels.len() {
        return Err(EvalError::LabelMismatch {
            got: probes.len(),
            labels: probe_labels.len(),
        });
    }
    let model = nlda_fit(gallery, gallery_labels)?;
    let mut accuracy = Vec::with_capacity(dims.len());
    for &d in dims {
        let gal: Vec<DVector<f64>> = gallery.iter().map(|g| model.project(g, d)).collect();
        let mut correct = 0usize;
        for (probe, &label) in probes.iter().zip(probe_labels) {
            let p = model.project(probe, d);
            let mut best = (f64::INFINITY, 0usize);
            for (g, &gl) in gal.iter().zip(gallery_labels) {
                let dist = (&p - g).norm_squared();
                if dist < best.0 {
                    best = (dist, gl);
                }
            }
            if best.1 == label {
                correct += 1;
            }
        }
        accuracy.push(correct as f64 / probes.len().max(1) as f64);
    }
    Ok(RecognitionCurve {
        dims: dims.to_vec(),
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand::SeedableRng as _;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_classes(
        rng: &mut ChaCha8Rng,
        classes: usize,
        per_class: usize,
        dim: usize,
        spread: f64,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                samples.push(
                    center
                        .iter()
                        .map(|&m| m + rng.gen_range(-spread..spread))
                        .collect(),
                );
                labels.push(c);
            }
        }
        (samples, labels)
    }

    #[test]
    fn identical_samples_per_class_project_to_centroids() {
        // S_w = 0: the whole space is its null space
        let samples = vec![
            vec![1.0, 0.0, 2.0],
            vec![1.0, 0.0, 2.0],
            vec![-1.0, 3.0, 0.5],
            vec![-1.0, 3.0, 0.5],
        ];
        let labels = vec![0, 0, 1, 1];
        let model = nlda_fit(&samples, &labels).unwrap();
        let a = model.project(&samples[0], model.dims());
        let b = model.project(&samples[1], model.dims());
        assert!((a - b).amax() <= 1e-10);
        let curve =
            recognition_curve(&samples, &labels, &samples, &labels, &[1, model.dims()]).unwrap();
        assert!(curve.accuracy.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn separable_gaussian_fixture_perfect_recognition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (gallery, labels) = gaussian_classes(&mut rng, 3, 5, 50, 0.05);
        let (probes, probe_labels) = {
            // held-out points near the same centers
            let mut p = Vec::new();
            let mut pl = Vec::new();
            for (s, &l) in gallery.iter().zip(&labels).step_by(5) {
                p.push(s.iter().map(|&v| v + rng.gen_range(-0.02..0.02)).collect());
                pl.push(l);
            }
            (p, pl)
        };
        let curve = recognition_curve(&probes, &probe_labels, &gallery, &labels, &[1, 2]).unwrap();
        assert_eq!(curve.accuracy, vec![1.0, 1.0]);
    }

    #[test]
    fn projected_within_class_scatter_is_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (gallery, labels) = gaussian_classes(&mut rng, 3, 5, 50, 0.5);
        let model = nlda_fit(&gallery, &labels).unwrap();
        // recompute projected within-class scatter
        let p = model.dims();
        let proj: Vec<DVector<f64>> = gallery.iter().map(|g| model.project(g, p)).collect();
        let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let mut sw = DMatrix::<f64>::zeros(p, p);
        for members in by_class.values() {
            let mut mu = DVector::<f64>::zeros(p);
            for &i in members {
                mu += &proj[i];
            }
            mu /= members.len() as f64;
            for &i in members {
                let d = &proj[i] - &mu;
                sw += &d * d.transpose();
            }
        }
        let scale: f64 = gallery
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            .powi(2);
        assert!(sw.amax() <= 1e-8 * scale.max(1.0), "scatter {}", sw.amax());
    }

    #[test]
    fn projection_columns_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (gallery, labels) = gaussian_classes(&mut rng, 4, 4, 30, 0.3);
        let model = nlda_fit(&gallery, &labels).unwrap();
        let gram = model.projection.transpose() * &model.projection;
        let p = model.dims();
        assert!((gram - DMatrix::identity(p, p)).amax() <= 1e-8);
    }

    #[test]
    fn random_labels_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let classes = 4;
        let (gallery, labels) = gaussian_classes(&mut rng, classes, 6, 40, 0.1);
        // probes drawn near centers but with shuffled labels
        let mut shuffled = labels.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        let curve = recognition_curve(&gallery, &shuffled, &gallery, &labels, &[2]).unwrap();
        let acc = curve.accuracy[0];
        // binomial CI around 1/classes for n=24
        let p = 1.0 / classes as f64;
        let sigma = (p * (1.0 - p) / 24.0).sqrt();
        assert!(
            (acc - p).abs() <= 4.0 * sigma + 1e-9,
            "accuracy {acc} not near chance {p}"
        );
    }

    #[test]
    fn rejects_full_rank_scatter_and_bad_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // 2 classes, 20 samples each in 3-D: S_w full rank
        let (samples, labels) = gaussian_classes(&mut rng, 2, 20, 3, 1.0);
        assert!(matches!(
            nlda_fit(&samples, &labels),
            Err(EvalError::EmptyNullSpace { .. })
        ));
        assert!(matches!(
            nlda_fit(&samples, &labels[..5]),
            Err(EvalError::LabelMismatch { .. })
        ));
        assert!(matches!(
            nlda_fit(&samples[..3], &[0, 0, 0]),
            Err(EvalError::TooFewClasses(1))
        ));
    }
}
