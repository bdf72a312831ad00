//! Principal-component projection by deflated power iteration.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Mean-centered projection onto the leading principal components.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// One row per input state, one column per extracted component.
    pub points: Array2<f64>,
    /// Extracted components, one per row, unit length.
    pub components: Array2<f64>,
    /// Sample-covariance eigenvalue of each component, descending.
    pub eigenvalues: Vec<f64>,
    /// True when the input's rank stopped extraction before `dims`
    /// components.
    pub rank_deficient: bool,
}

/// Residual target for the power iteration, relative to the dominant
/// eigenvalue (absolute for unit-scale data).
const RESIDUAL_TOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the total variance count as zero;
/// kept two orders above the residual target so deflation noise can never
/// masquerade as a real component.
const RANK_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 100_000;

fn covariance(states: &[Vec<f64>]) -> (Array2<f64>, Array2<f64>) {
    let n = states.len();
    let d = states[0].len();
    let mut mean = vec![0.0; d];
    for s in states {
        assert_eq!(s.len(), d, "inconsistent state dimensions");
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = Array2::zeros((n, d));
    for (i, s) in states.iter().enumerate() {
        for j in 0..d {
            centered[[i, j]] = s[j] - mean[j];
        }
    }
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    (centered, cov)
}

/// Largest eigenpair of the symmetric matrix `c` by power iteration. The
/// start vector mixes all axes with a mild ramp so it cannot be orthogonal
/// to an axis-aligned eigenvector.
fn dominant_eigenpair(c: &Array2<f64>, scale: f64) -> (f64, Array1<f64>) {
    let d = c.nrows();
    let mut v = Array1::from_shape_fn(d, |i| 1.0 + 0.1 * i as f64);
    v /= v.dot(&v).sqrt();
    let tol = RESIDUAL_TOL * scale.max(1.0);
    for _ in 0..MAX_ITERS {
        let cv = c.dot(&v);
        let lambda = v.dot(&cv);
        let residual = (&cv - &(&v * lambda)).mapv(|x| x * x).sum().sqrt();
        if residual <= tol {
            return (lambda, v);
        }
        let norm = cv.dot(&cv).sqrt();
        if norm == 0.0 {
            // v is in the null space; the remaining spectrum is zero.
            return (0.0, v);
        }
        v = cv / norm;
    }
    let lambda = v.dot(&c.dot(&v));
    (lambda, v)
}

/// Project mean-centered `states` onto their top `dims` principal
/// components. Extraction stops early (flagged) when the residual spectrum
/// vanishes, so rank-deficient inputs yield fewer components.
pub fn pca_project(states: &[Vec<f64>], dims: usize) -> Result<PcaProjection> {
    assert!(dims > 0);
    let distinct = {
        let mut seen: Vec<&Vec<f64>> = Vec::new();
        for s in states {
            if !seen.iter().any(|t| t.as_slice() == s.as_slice()) {
                seen.push(s);
            }
            if seen.len() > dims {
                break;
            }
        }
        seen.len()
    };
    if distinct < dims + 1 {
        return Err(Error::InvalidConfig(format!(
            "PCA needs at least {} distinct states, got {distinct}",
            dims + 1
        )));
    }
    let (centered, mut cov) = covariance(states);
    let d = cov.nrows();
    let scale = (0..d).map(|i| cov[[i, i]]).sum::<f64>();
    let want = dims.min(d);

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    for _ in 0..want {
        let (lambda, mut v) = dominant_eigenpair(&cov, scale);
        if lambda <= RANK_TOL * scale.max(1.0) {
            break;
        }
        // Canonical sign: the largest-magnitude coordinate points up.
        let lead = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        if v[lead] < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        // Deflate: remove the found component from the spectrum.
        let outer = Array2::from_shape_fn((d, d), |(i, j)| v[i] * v[j]);
        cov = &cov - &(outer * lambda);
        components.push(v);
        eigenvalues.push(lambda);
    }
    let rank_deficient = components.len() < dims;
    let k = components.len();
    let mut comp = Array2::zeros((k, d));
    for (r, v) in components.iter().enumerate() {
        comp.row_mut(r).assign(v);
    }
    let points = centered.dot(&comp.t());
    Ok(PcaProjection {
        points,
        components: comp,
        eigenvalues,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    use crate::rng::{derive, Stream};

    #[test]
    fn collinear_points_put_all_variance_on_one_component() {
        // Points on a line in 4-D: rank one, so asking for two components
        // returns one and flags the deficiency.
        let dir = [0.5, -1.0, 2.0, 0.25];
        let states: Vec<Vec<f64>> = (0..12)
            .map(|i| dir.iter().map(|&d| d * i as f64).collect())
            .collect();
        let p = pca_project(&states, 2).unwrap();
        assert!(p.rank_deficient);
        assert_eq!(p.components.nrows(), 1);
        assert_eq!(p.eigenvalues.len(), 1);
        // The component is the line direction, normalized and
        // sign-canonicalized (largest coordinate positive).
        let norm = (dir.iter().map(|d| d * d).sum::<f64>()).sqrt();
        for (a, b) in p.components.row(0).iter().zip(&dir) {
            assert!((a - b / norm).abs() < 1e-7);
        }
    }

    #[test]
    fn eigenpairs_match_a_direct_diagonalization() {
        // Independent oracle: nalgebra's symmetric eigendecomposition of
        // the same sample covariance.
        let mut rng = derive(11, Stream::Custom(31));
        let states: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                vec![3.0 * x + 0.2 * y, 1.5 * y, 0.4 * z + 0.1 * x]
            })
            .collect();
        let p = pca_project(&states, 3).unwrap();
        assert!(!p.rank_deficient);

        let (_, cov) = covariance(&states);
        let m = DMatrix::from_fn(3, 3, |i, j| cov[[i, j]]);
        let eig = m.symmetric_eigen();
        let mut oracle: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (mine, theirs) in p.eigenvalues.iter().zip(&oracle) {
            assert!(
                (mine - theirs).abs() < 1e-7 * theirs.max(1.0),
                "{mine} vs {theirs}"
            );
        }
        // Eigenvectors agree up to sign (eigenvalues are distinct here).
        for (r, &lambda) in p.eigenvalues.iter().enumerate() {
            let idx = (0..3)
                .min_by(|&a, &b| {
                    (eig.eigenvalues[a] - lambda)
                        .abs()
                        .total_cmp(&(eig.eigenvalues[b] - lambda).abs())
                })
                .unwrap();
            let dot: f64 = (0..3)
                .map(|i| p.components[[r, i]] * eig.eigenvectors[(i, idx)])
                .sum();
            assert!(dot.abs() > 1.0 - 1e-6, "component {r}: |dot| = {}", dot.abs());
        }
    }

    #[test]
    fn isotropic_samples_spread_variance_evenly() {
        let mut rng = derive(12, Stream::Custom(31));
        let states: Vec<Vec<f64>> = (0..4000)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let p = pca_project(&states, 3).unwrap();
        let total: f64 = p.eigenvalues.iter().sum();
        for lambda in &p.eigenvalues {
            let ratio = lambda / total;
            assert!((ratio - 1.0 / 3.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn components_are_orthonormal() {
        let mut rng = derive(13, Stream::Custom(31));
        let states: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let p = pca_project(&states, 3).unwrap();
        let gram = p.components.dot(&p.components.t());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn permuting_the_input_changes_nothing() {
        let mut rng = derive(14, Stream::Custom(31));
        let states: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                vec![2.0 * x, x + y, y * 0.3]
            })
            .collect();
        let mut shuffled = states.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let a = pca_project(&states, 2).unwrap();
        let b = pca_project(&shuffled, 2).unwrap();
        // Same covariance, same sign canonicalization: components match
        // exactly up to iteration noise.
        for (x, y) in a.components.iter().zip(b.components.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_distinct_states_error_out() {
        let states = vec![vec![1.0, 2.0]; 10];
        assert!(pca_project(&states, 2).is_err());
        let two = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        assert!(pca_project(&two, 2).is_err());
    }
}
