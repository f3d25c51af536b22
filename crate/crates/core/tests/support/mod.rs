//! Random fixtures, independent oracles and the fixed-count checks shared by
//! the property suite and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rmmsl::affinity::{self_tuning_matrix, similarity_matrix, SimilarityMatrix};
use rmmsl::local_tangent::{fit_frame, local_structure_matrix, taylor_weights};
use rmmsl::outlier::stationary_scores;
use rmmsl::spectral::{generalized_eigvecs, laplacian};
use rmmsl::{build_knn_graph, estimate_tangent, principal_angles, Alpha, DimMode, PointCloud, WeightConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Q factor of `m` (orthonormal columns).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Haar-ish random orthogonal matrix.
pub fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    orthonormalize(&gaussian_matrix(rng, dim, dim))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// A point on a curved `d`-dimensional patch in `R^ambient` and `m` neighbors
/// around it: tangent coordinates in `[-1, 1]^d`, a quadratic bend into the
/// normal directions and a little isotropic noise.
pub struct Neighborhood {
    pub center: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub d: usize,
}

pub fn curved_neighborhood(rng: &mut ChaCha8Rng, ambient: usize, d: usize, m: usize) -> Neighborhood {
    assert!(d < ambient);
    let frame = random_rotation(rng, ambient);
    let offset: Vec<f64> = (0..ambient).map(|_| rng.random_range(-5.0..5.0)).collect();
    let bend: Vec<f64> = (d..ambient).map(|_| rng.random_range(-0.3..0.3)).collect();
    let embed = |tau: &[f64], normal_noise: &[f64]| -> Vec<f64> {
        let q: f64 = tau.iter().map(|t| t * t).sum();
        let mut local = vec![0.0; ambient];
        local[..d].copy_from_slice(tau);
        for (a, b) in bend.iter().enumerate() {
            local[d + a] = b * q;
        }
        (0..ambient)
            .map(|r| offset[r] + (0..ambient).map(|c| frame[(r, c)] * local[c]).sum::<f64>() + normal_noise[r])
            .collect()
    };
    let center = embed(&vec![0.0; d], &vec![0.0; ambient]);
    let points = (0..m)
        .map(|_| {
            let tau: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let noise: Vec<f64> = (0..ambient).map(|_| 1e-3 * rng.sample::<f64, _>(StandardNormal)).collect();
            embed(&tau, &noise)
        })
        .collect();
    Neighborhood { center, points, d }
}

pub fn random_neighborhood(rng: &mut ChaCha8Rng) -> Neighborhood {
    let ambient = rng.random_range(2..=6);
    let d = rng.random_range(1..ambient);
    let m = rng.random_range(d + 3..=20);
    curved_neighborhood(rng, ambient, d, m)
}

/// Top-`d` left singular vectors of the neighborhood minus its center point.
pub fn svd_subspace(center: &[f64], points: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    let x = DMatrix::from_fn(center.len(), points.len(), |r, c| points[c][r] - center[r]);
    let svd = SVD::new(x, true, false);
    let u = svd.u.expect("left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(center.len(), d, |r, c| u[(r, order[c])])
}

/// `Σ_j s_j² (x_j − x_i)(x_j − x_i)ᵀ`, entry by entry.
pub fn structure_matrix_by_sum(center: &[f64], points: &[Vec<f64>], weights: &[f64]) -> DMatrix<f64> {
    let dim = center.len();
    let mut t = DMatrix::zeros(dim, dim);
    for (p, s) in points.iter().zip(weights) {
        for r in 0..dim {
            for c in 0..dim {
                t[(r, c)] += s * s * (p[r] - center[r]) * (p[c] - center[c]);
            }
        }
    }
    t
}

/// Random symmetric weights with a ring added so the graph is connected.
pub fn random_connected_weights(rng: &mut ChaCha8Rng, n: usize, density: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let ring = j == i + 1 || (i == 0 && j == n - 1);
            if ring || rng.random::<f64>() < density {
                let v = rng.random_range(0.01..1.0);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    w
}

/// Stationary distribution of the lazy walk `(I + D⁻¹W)/2`, by iteration.
pub fn power_iteration_stationary(w: &DMatrix<f64>) -> Vec<f64> {
    let n = w.nrows();
    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            next[i] += 0.5 * pi[i];
            for j in 0..n {
                next[j] += 0.5 * pi[i] * w[(i, j)] / degrees[i];
            }
        }
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < 1e-15 {
            break;
        }
    }
    pi
}

/// First `n_c` generalized eigenpairs of `L e = λ D e` from a dense
/// symmetric eigendecomposition.
pub fn dense_generalized(w: &DMatrix<f64>, n_c: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = w.nrows();
    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let l = if i == j { degrees[i] - w[(i, i)] } else { -w[(i, j)] };
        l / (degrees[i] * degrees[j]).sqrt()
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().take(n_c + 1).map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n_c, |r, c| eig.eigenvectors[(r, order[c])] / degrees[r].sqrt());
    (values, vectors)
}

pub fn brute_force_neighbors(cloud: &PointCloud, i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..cloud.len())
        .filter(|&j| j != i)
        .map(|j| {
            let d2: f64 = cloud.point(i).iter().zip(cloud.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (j, d2.sqrt())
        })
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Noisy samples of a curved 2-surface in R³ (a paraboloid cap).
pub fn surface_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(-2.0..2.0);
            let v: f64 = rng.random_range(-2.0..2.0);
            let e: f64 = 0.02 * rng.sample::<f64, _>(StandardNormal);
            vec![u, v, 0.3 * (u * u - v * v) + e]
        })
        .collect();
    PointCloud::from_rows(&rows).unwrap()
}

fn kernels() -> [Alpha; 3] {
    [Alpha::Constant, Alpha::Quadratic, Alpha::Quartic]
}

pub fn random_weights(rng: &mut ChaCha8Rng) -> WeightConfig {
    WeightConfig {
        sigma_n: rng.random_range(0.2..3.0),
        sigma_e: rng.random_range(0.2..3.0),
        alpha: kernels()[rng.random_range(0..3)],
    }
}

// Fixed-count checks. Each returns a one-line summary or the first violation.

pub type Check = Result<String, String>;

pub fn check_tangent_orthonormality(count: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0_f64;
    for case in 0..count {
        let nb = random_neighborhood(&mut rng);
        let cfg = random_weights(&mut rng);
        let frame = fit_frame(0, &nb.center, &nb.points, &cfg, DimMode::Fixed(nb.d)).map_err(|e| format!("case {case}: {e}"))?;
        let err = rmmsl::geometry::orthonormality_error(&frame.basis);
        worst = worst.max(err);
        if err > 1e-10 {
            return Err(format!("case {case}: |JᵀJ − I| = {err:e}"));
        }
    }
    Ok(format!("{count} neighborhoods, max |JᵀJ − I| = {worst:.1e}"))
}

pub fn check_constant_alpha_is_svd(count: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0_f64;
    for case in 0..count {
        let nb = random_neighborhood(&mut rng);
        let cfg = WeightConfig {
            sigma_n: rng.random_range(0.2..3.0),
            sigma_e: rng.random_range(0.2..3.0),
            alpha: Alpha::Constant,
        };
        let frame = fit_frame(0, &nb.center, &nb.points, &cfg, DimMode::Fixed(nb.d)).map_err(|e| format!("case {case}: {e}"))?;
        let oracle = svd_subspace(&nb.center, &nb.points, nb.d);
        let angle = principal_angles(&frame.basis, &oracle).map_err(|e| e.to_string())?;
        worst = worst.max(angle);
        if angle >= 1e-8 {
            return Err(format!("case {case}: angle to SVD subspace {angle:e}"));
        }
    }
    Ok(format!("{count} neighborhoods, max angle to SVD subspace = {worst:.1e}"))
}

/// Rotation equivariance (`< 1e-6`) and translation invariance (`< 1e-10`)
/// of whole-cloud tangent frames.
pub fn check_rigid_motions(clouds: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let cfg = WeightConfig::default();
    let (mut worst_rot, mut worst_shift) = (0.0_f64, 0.0_f64);
    let mut frames_checked = 0;
    for case in 0..clouds {
        let cloud = surface_cloud(&mut rng, 80);
        let graph = build_knn_graph(&cloud, 10, 7).map_err(|e| e.to_string())?;
        let base = estimate_tangent(&cloud, &graph, &cfg, DimMode::Fixed(2)).map_err(|e| e.to_string())?;

        let rot = random_rotation(&mut rng, 3);
        let rotated_rows: Vec<Vec<f64>> = cloud
            .points()
            .map(|p| (0..3).map(|r| (0..3).map(|c| rot[(r, c)] * p[c]).sum()).collect())
            .collect();
        let rotated = PointCloud::from_rows(&rotated_rows).unwrap();
        let g = build_knn_graph(&rotated, 10, 7).map_err(|e| e.to_string())?;
        if g.neighbors != graph.neighbors {
            return Err(format!("cloud {case}: rotation changed the kNN lists"));
        }
        let frames = estimate_tangent(&rotated, &g, &cfg, DimMode::Fixed(2)).map_err(|e| e.to_string())?;
        for (a, b) in base.iter().zip(&frames) {
            let angle = principal_angles(&(&rot * &a.basis), &b.basis).map_err(|e| e.to_string())?;
            worst_rot = worst_rot.max(angle);
        }

        let shift: Vec<f64> = (0..3).map(|_| rng.random_range(-50.0..50.0)).collect();
        let shifted_rows: Vec<Vec<f64>> = cloud.points().map(|p| p.iter().zip(&shift).map(|(x, s)| x + s).collect()).collect();
        let shifted = PointCloud::from_rows(&shifted_rows).unwrap();
        let g = build_knn_graph(&shifted, 10, 7).map_err(|e| e.to_string())?;
        let frames = estimate_tangent(&shifted, &g, &cfg, DimMode::Fixed(2)).map_err(|e| e.to_string())?;
        for (i, (a, b)) in base.iter().zip(&frames).enumerate() {
            worst_shift = worst_shift.max(max_abs_diff(&a.basis, &b.basis));
            let nb_a: Vec<&[f64]> = graph.neighbors[i].iter().map(|&j| cloud.point(j)).collect();
            let nb_b: Vec<&[f64]> = g.neighbors[i].iter().map(|&j| shifted.point(j)).collect();
            let t_a = local_structure_matrix(cloud.point(i), &nb_a, &taylor_weights(cloud.point(i), &nb_a, &cfg).unwrap()).unwrap();
            let t_b = local_structure_matrix(shifted.point(i), &nb_b, &taylor_weights(shifted.point(i), &nb_b, &cfg).unwrap()).unwrap();
            worst_shift = worst_shift.max(max_abs_diff(&t_a, &t_b));
        }
        frames_checked += base.len();
    }
    if worst_rot >= 1e-6 {
        return Err(format!("rotation: max angle {worst_rot:e}"));
    }
    if worst_shift >= 1e-10 {
        return Err(format!("translation: max change {worst_shift:e}"));
    }
    Ok(format!(
        "{frames_checked} frames, rotation angle ≤ {worst_rot:.1e}, translation change ≤ {worst_shift:.1e}"
    ))
}

/// Symmetry, range, zero diagonal, and `σ_c = 10⁶` against the distance-only kernel.
pub fn check_similarity_properties(clouds: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst_degenerate = 0.0_f64;
    for case in 0..clouds {
        let cloud = surface_cloud(&mut rng, 120);
        let k = rng.random_range(4..15);
        let graph = build_knn_graph(&cloud, k, k.min(7)).map_err(|e| e.to_string())?;
        let frames = estimate_tangent(&cloud, &graph, &WeightConfig::default(), DimMode::Fixed(2)).map_err(|e| e.to_string())?;
        let sigma_c = rng.random_range(0.1..3.0);
        let w = similarity_matrix(&cloud, &graph, &frames, sigma_c).map_err(|e| e.to_string())?.to_dense();
        if w != w.transpose() {
            return Err(format!("cloud {case}: W is not exactly symmetric"));
        }
        if w.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(format!("cloud {case}: entry outside [0, 1]"));
        }
        if (0..w.nrows()).any(|i| w[(i, i)] != 0.0) {
            return Err(format!("cloud {case}: nonzero diagonal"));
        }
        let wide = similarity_matrix(&cloud, &graph, &frames, 1e6).map_err(|e| e.to_string())?;
        let diff = wide.max_abs_diff(&self_tuning_matrix(&graph));
        worst_degenerate = worst_degenerate.max(diff);
        if diff >= 1e-6 {
            return Err(format!("cloud {case}: σ_c = 1e6 differs from w1 by {diff:e}"));
        }
    }
    Ok(format!("{clouds} clouds, max |W(1e6) − w1| = {worst_degenerate:.1e}"))
}

pub fn check_stationary_scores(count: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0_f64;
    for case in 0..count {
        let n = 50;
        let density = rng.random_range(0.05..0.5);
        let w = random_connected_weights(&mut rng, n, density);
        let pi = stationary_scores(&SimilarityMatrix::from_dense(&w).unwrap()).map_err(|e| e.to_string())?;
        let oracle = power_iteration_stationary(&w);
        let diff = pi.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
        if diff >= 1e-8 {
            return Err(format!("graph {case}: |π − power iteration| = {diff:e}"));
        }
    }
    Ok(format!("{count} graphs, max |π − power iteration| = {worst:.1e}"))
}

/// Subspace angle and eigenvalue error against the dense oracle, n ≤ 40.
pub fn check_dense_eigen(count: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mut worst_angle, mut worst_value) = (0.0_f64, 0.0_f64);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < count {
        attempts += 1;
        if attempts > 10 * count {
            return Err("too few random graphs with a usable eigengap".into());
        }
        let n = rng.random_range(6..=40);
        let n_c = rng.random_range(1..=4.min(n - 1));
        let density = rng.random_range(0.1..0.6);
        let w = random_connected_weights(&mut rng, n, density);
        let (values, vectors) = dense_generalized(&w, n_c);
        // The compared subspace is only defined when it is separated from the rest.
        if values[n_c] - values[n_c - 1] < 1e-3 {
            continue;
        }
        let l = laplacian(&SimilarityMatrix::from_dense(&w).unwrap()).map_err(|e| e.to_string())?;
        let emb = generalized_eigvecs(&l, n_c).map_err(|e| e.to_string())?;
        let angle = principal_angles(&orthonormalize(&emb.vectors), &orthonormalize(&vectors)).map_err(|e| e.to_string())?;
        let value = emb.eigenvalues.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_angle = worst_angle.max(angle);
        worst_value = worst_value.max(value);
        if angle >= 1e-8 || value >= 1e-8 {
            return Err(format!("n = {n}, n_c = {n_c}: subspace angle {angle:e}, eigenvalue error {value:e}"));
        }
        checked += 1;
    }
    Ok(format!(
        "{count} graphs (n ≤ 40), max subspace angle {worst_angle:.1e}, max eigenvalue error {worst_value:.1e}"
    ))
}

pub fn check_rand_units() -> Check {
    let labels = [3, 1, 4, 1, 5, 9, 2, 6];
    let same = rmmsl::evaluation::rand_index(&labels, &labels).map_err(|e| e.to_string())?;
    let four = rmmsl::evaluation::rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).map_err(|e| e.to_string())?;
    // Enumerate the six pairs directly.
    let (a, b) = ([0, 0, 1, 1], [0, 1, 0, 1]);
    let mut agree = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    let enumerated = agree as f64 / 6.0;
    if same != 1.0 || (four - enumerated).abs() > 1e-15 || (four - 1.0 / 3.0).abs() > 1e-15 {
        return Err(format!("identity {same}, four-point {four}, enumerated {enumerated}"));
    }
    Ok(format!("identity {same}, four-point case {four:.6}"))
}
