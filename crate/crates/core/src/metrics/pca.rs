use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Relative eigenvalue threshold below which a direction counts as absent.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `n × k` projected coordinates.
    pub coords: Tensor,
    /// `k` unit-length principal axes of dimension `d`; zero vectors past the
    /// numerical rank.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
    /// Numerical rank of the centred data (capped at `k`).
    pub rank: usize,
}

/// Projects the rows of `x` (`n × d`) onto their top-`k` principal axes.
///
/// Axes are eigenvectors of the sample covariance, ordered by eigenvalue;
/// each axis is signed so that its largest-magnitude entry is positive. When
/// the data has rank below `k` the missing axes and coordinates are zero and
/// `rank` reports the shortfall.
pub fn pca_project(x: &Tensor, k: usize) -> Result<Pca> {
    if x.ndim() != 2 {
        return Err(Error::Shape(format!("PCA input {:?} must be n × d", x.shape())));
    }
    let (n, d) = (x.dim(0), x.dim(1));
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={d}")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot give {k} components"
        )));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }
    let m = DMatrix::from_row_slice(n, d, x.data());
    let mean: Vec<f64> = (0..d).map(|j| m.column(j).mean()).collect();
    let mut centred = m;
    for (j, mu) in mean.iter().enumerate() {
        centred.column_mut(j).add_scalar_mut(-mu);
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (centred.transpose() * &centred) / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    let mut rank = 0;
    for &j in order.iter().take(k) {
        let lambda = eig.eigenvalues[j];
        if top > 0.0 && lambda > RANK_TOL * top {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if pivot < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            components.push(v);
            explained_variance.push(lambda);
            rank += 1;
        } else {
            components.push(vec![0.0; d]);
            explained_variance.push(0.0);
        }
    }
    let mut coords = vec![0.0; n * k];
    for i in 0..n {
        let row = centred.row(i);
        for (c, comp) in components.iter().enumerate() {
            coords[i * k + c] = row.iter().zip(comp).map(|(a, b)| a * b).sum();
        }
    }
    Ok(Pca {
        coords: Tensor::new([n, k], coords)?,
        components,
        explained_variance,
        mean,
        rank,
    })
}

/// Mean silhouette coefficient of `labels` for the rows of `points` under
/// Euclidean distance. Points in singleton clusters score 0.
pub fn silhouette_score(points: &Tensor, labels: &[usize]) -> Result<f64> {
    if points.ndim() != 2 || points.dim(0) != labels.len() {
        return Err(Error::Shape(format!(
            "{:?} points for {} labels",
            points.shape(),
            labels.len()
        )));
    }
    let n = labels.len();
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_labels];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two distinct labels".into(),
        ));
    }
    let d = points.dim(1);
    let p = points.data();
    let mut total = 0.0;
    let mut sums = vec![0.0; n_labels];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let a_row = &p[i * d..(i + 1) * d];
        for j in 0..n {
            if j == i {
                continue;
            }
            let b_row = &p[j * d..(j + 1) * d];
            let dist: f64 = a_row
                .iter()
                .zip(b_row)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sums[labels[j]] += dist;
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_labels)
            .filter(|&l| l != own && sizes[l] > 0)
            .map(|l| sums[l] / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        total += s;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random(n: usize, d: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn([n, d], |_| rng.sample(StandardNormal))
    }

    #[test]
    fn axis_aligned_data_recovers_axes() {
        // x has variance 9, y variance 1
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<f64> = (0..500)
            .flat_map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                [3.0 * a, b]
            })
            .collect();
        let p = pca_project(&Tensor::new([500, 2], pts).unwrap(), 2).unwrap();
        assert!(p.components[0][0].abs() > 0.99);
        assert!(p.components[1][1].abs() > 0.99);
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
        assert_eq!(p.rank, 2);
    }

    #[test]
    fn rank_two_data_reconstructs_exactly() {
        let basis = random(2, 6, 3);
        let coef = random(40, 2, 4);
        let mut x = vec![0.0; 40 * 6];
        for i in 0..40 {
            for j in 0..6 {
                x[i * 6 + j] =
                    5.0 + coef.data()[i * 2] * basis.data()[j] + coef.data()[i * 2 + 1] * basis.data()[6 + j];
            }
        }
        let t = Tensor::new([40, 6], x.clone()).unwrap();
        let p = pca_project(&t, 2).unwrap();
        for i in 0..40 {
            for j in 0..6 {
                let r = p.mean[j]
                    + (0..2)
                        .map(|c| p.coords.data()[i * 2 + c] * p.components[c][j])
                        .sum::<f64>();
                assert!((r - x[i * 6 + j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rank_deficient_input_is_padded() {
        let x = Tensor::from_fn([10, 3], |i| if i % 3 == 0 { (i / 3) as f64 } else { 1.0 });
        let p = pca_project(&x, 2).unwrap();
        assert_eq!(p.rank, 1);
        assert_eq!(p.components[1], vec![0.0; 3]);
        assert_eq!(p.explained_variance[1], 0.0);
        assert!(p.coords.data().chunks(2).all(|r| r[1] == 0.0));
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(pca_project(&random(1, 4, 0), 2).is_err());
    }

    #[test]
    fn silhouette_of_separated_clusters() {
        let pts = Tensor::new([4, 1], vec![0.0, 1.0, 10.0, 11.0]).unwrap();
        // outer points: a = 1, b = 10.5; inner points: a = 1, b = 9.5
        let s = silhouette_score(&pts, &[0, 0, 1, 1]).unwrap();
        assert!((s - (9.5 / 10.5 + 8.5 / 9.5) / 2.0).abs() < 1e-12);
        let mixed = silhouette_score(&pts, &[0, 1, 0, 1]).unwrap();
        assert!(mixed < 0.0);
        assert!(silhouette_score(&pts, &[0, 0, 0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn components_orthonormal_and_translation_invariant(seed in 0u64..500, shift in -50.0f64..50.0) {
            let x = random(30, 5, seed);
            let p = pca_project(&x, 2).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    let dot: f64 = p.components[a].iter().zip(&p.components[b]).map(|(u, v)| u * v).sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - expected).abs() < 1e-9);
                }
            }
            prop_assert!(p.explained_variance[0] >= p.explained_variance[1]);
            let shifted = Tensor::from_fn([30, 5], |i| x.data()[i] + shift);
            let q = pca_project(&shifted, 2).unwrap();
            for (u, v) in p.coords.data().iter().zip(q.coords.data()) {
                prop_assert!((u.abs() - v.abs()).abs() < 1e-8);
            }
        }
    }
}
