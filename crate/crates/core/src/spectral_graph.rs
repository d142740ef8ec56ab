//! Per-block graphs, Laplacians and their eigendecomposition.
//!
//! A block's points form a complete weighted graph with
//! `w_ij = exp(−α · d_ij)`, where `d_ij` is the Euclidean distance between
//! the two points' YUV colors (default) or local voxel coordinates. The
//! combinatorial Laplacian `L = D − A` is diagonalized with cyclic Jacobi
//! rotations; the eigenvalues play the role of graph frequencies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pc_io::Yuv;
use crate::voxel_grid::VoxelBlock;

/// Floor on the mean pairwise distance used by [`Alpha::Auto`].
pub const MIN_MEAN_DISTANCE: f64 = 1e-6;
/// Jacobi stops once the off-diagonal Frobenius norm falls below this,
/// relative to `max(1, ‖L‖_F)`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Components below this magnitude are skipped by the sign rule.
const SIGN_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DistanceMode {
    /// Distance between YUV triples.
    #[default]
    Color,
    /// Distance between voxel positions inside the block.
    Geometry,
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::Color => "color",
            DistanceMode::Geometry => "geometry",
        })
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "color" => Ok(DistanceMode::Color),
            "geometry" => Ok(DistanceMode::Geometry),
            other => Err(Error::Config(format!("unknown distance mode `{other}`"))),
        }
    }
}

/// Edge-weight decay rate.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Alpha {
    /// `1 / max(mean pairwise distance, 1e−6)`, computed per block.
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Auto => f.write_str("auto"),
            Alpha::Fixed(a) => write!(f, "{a}"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Alpha::Auto);
        }
        match s.parse::<f64>() {
            Ok(a) if a > 0.0 && a.is_finite() => Ok(Alpha::Fixed(a)),
            _ => Err(Error::Config(format!("alpha must be `auto` or a positive number, got `{s}`"))),
        }
    }
}

/// Weighted adjacency of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGraph {
    weights: Matrix,
    alpha: f64,
    mode: DistanceMode,
}

impl BlockGraph {
    /// Wraps an explicit adjacency matrix after checking it is square,
    /// symmetric, non-negative and zero on the diagonal.
    pub fn from_weights(weights: Matrix, alpha: f64, mode: DistanceMode) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::Shape(format!("adjacency is {}x{}", weights.rows(), weights.cols())));
        }
        let n = weights.rows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::Numeric(format!("self-loop weight at node {i}")));
            }
            for j in 0..i {
                let w = weights[(i, j)];
                if !(w.is_finite() && w >= 0.0) || w != weights[(j, i)] {
                    return Err(Error::Numeric(format!("bad or asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(Self { weights, alpha, mode })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Complete graph over the block's points.
///
/// `attrs` holds the block members' YUV values, parallel to
/// `block.point_indices`.
pub fn build_graph(block: &VoxelBlock, attrs: &[Yuv], alpha: Alpha, mode: DistanceMode) -> BlockGraph {
    let features: Vec<[f64; 3]> = match mode {
        DistanceMode::Color => {
            assert_eq!(attrs.len(), block.len(), "one YUV triple per block member");
            attrs.to_vec()
        }
        DistanceMode::Geometry => block.local_coords.iter().map(|c| c.map(f64::from)).collect(),
    };
    graph_from_features(&features, alpha, mode)
}

/// Complete graph with `w_ij = exp(−α·‖f_i − f_j‖)`.
pub fn graph_from_features(features: &[[f64; 3]], alpha: Alpha, mode: DistanceMode) -> BlockGraph {
    let n = features.len();
    let mut dist = Matrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..i {
            let d = distance(features[i], features[j]);
            dist[(i, j)] = d;
            dist[(j, i)] = d;
            total += d;
        }
    }
    let alpha = match alpha {
        Alpha::Fixed(a) => a,
        Alpha::Auto => {
            let pairs = n * n.saturating_sub(1) / 2;
            let mean = if pairs == 0 { 0.0 } else { total / pairs as f64 };
            1.0 / mean.max(MIN_MEAN_DISTANCE)
        }
    };
    let weights = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (-alpha * dist[(i, j)]).exp() });
    BlockGraph { weights, alpha, mode }
}

/// Row sums of the adjacency, `D_i = Σ_j w_ij`.
pub fn degree_matrix(g: &BlockGraph) -> Vec<f64> {
    (0..g.n()).map(|i| g.weights.row(i).iter().sum()).collect()
}

/// Combinatorial Laplacian `L = D − A`.
pub fn laplacian(g: &BlockGraph) -> Matrix {
    let degree = degree_matrix(g);
    let mut l = g.weights.scale(-1.0);
    for (i, d) in degree.into_iter().enumerate() {
        l[(i, i)] = d;
    }
    l
}

/// Eigenpairs of a symmetric matrix.
///
/// Eigenvalues ascend; column `k` of `eigenvectors` pairs with eigenvalue
/// `k`. Each column's first component with magnitude above 1e−12 is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
    sweeps: usize,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    /// Jacobi sweeps used.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// `V · diag(λ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        let v = &self.eigenvectors;
        let scaled = Matrix::from_fn(n, n, |r, c| v[(r, c)] * self.eigenvalues[c]);
        scaled.matmul(&v.transpose())
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn eigendecompose(l: &Matrix) -> Result<Spectrum> {
    if !l.is_square() {
        return Err(Error::Shape(format!("eigendecompose: {}x{} is not square", l.rows(), l.cols())));
    }
    if !l.is_finite() {
        return Err(Error::Numeric("eigendecompose: non-finite entry".into()));
    }
    let n = l.rows();
    let norm = l.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = norm.max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (l[(i, j)] - l[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Numeric(format!("eigendecompose: asymmetric at ({i}, {j})")));
            }
        }
    }

    let mut a = l.clone();
    let mut v = Matrix::identity(n);
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= JACOBI_TOLERANCE * scale {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal norm {off:e})"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q, sweeps);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&k| a[(k, k)]).collect();
    let mut eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    for c in 0..n {
        let flip = (0..n).map(|r| eigenvectors[(r, c)]).find(|x| x.abs() > SIGN_EPS).is_some_and(|x| x < 0.0);
        if flip {
            for r in 0..n {
                eigenvectors[(r, c)] = -eigenvectors[(r, c)];
            }
        }
    }
    Ok(Spectrum { eigenvalues, eigenvectors, sweeps })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            s += a[(p, q)] * a[(p, q)];
        }
    }
    (2.0 * s).sqrt()
}

/// Annihilates `a[p][q]` with one plane rotation and accumulates it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, sweep: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let (app, aqq) = (a[(p, p)], a[(q, q)]);
    // Once negligible against both diagonal entries, just drop the element.
    let g = 100.0 * apq.abs();
    if sweep > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return;
    }
    let h = aqq - app;
    let t = if h.abs() + g == h.abs() {
        apq / h
    } else {
        let theta = 0.5 * h / apq;
        let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
        if theta < 0.0 {
            -t
        } else {
            t
        }
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let n = a.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_grid::BlockSize;
    use proptest::prelude::*;

    fn block(n: usize) -> VoxelBlock {
        let local: Vec<[u32; 3]> = (0..n as u32).map(|i| [i & 1, (i >> 1) & 1, i >> 2]).collect();
        VoxelBlock { origin: [0; 3], size: BlockSize::Two, point_indices: (0..n).collect(), local_coords: local }
    }

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_node_graph() {
        let g = build_graph(&block(1), &[[1.0, 2.0, 3.0]], Alpha::Auto, DistanceMode::Color);
        assert_eq!(g.weights(), &Matrix::zeros(1, 1));
        assert_eq!(degree_matrix(&g), vec![0.0]);
        assert_eq!(laplacian(&g), Matrix::zeros(1, 1));
        let s = eigendecompose(&laplacian(&g)).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0]);
        assert_eq!(s.eigenvector(0), vec![1.0]);
    }

    #[test]
    fn identical_colors_give_unit_weight() {
        let g = build_graph(&block(2), &[[9.0; 3], [9.0; 3]], Alpha::Fixed(3.0), DistanceMode::Color);
        assert_eq!(g.weights()[(0, 1)], 1.0);
        assert_eq!(degree_matrix(&g), vec![1.0, 1.0]);
    }

    #[test]
    fn three_four_five_distance() {
        let g = build_graph(&block(2), &[[0.0; 3], [3.0, 4.0, 0.0]], Alpha::Fixed(1.0), DistanceMode::Color);
        assert!(approx(g.weights()[(0, 1)], (-5.0f64).exp(), 1e-15));
    }

    #[test]
    fn geometry_mode_uses_local_coords() {
        // local (0,0,0) and (1,1,0): distance √2; colors ignored.
        let b = VoxelBlock {
            origin: [8, 8, 8],
            size: BlockSize::Two,
            point_indices: vec![3, 7],
            local_coords: vec![[0, 0, 0], [1, 1, 0]],
        };
        let g = build_graph(&b, &[], Alpha::Fixed(2.0), DistanceMode::Geometry);
        assert!(approx(g.weights()[(0, 1)], (-2.0 * 2f64.sqrt()).exp(), 1e-15));
    }

    #[test]
    fn auto_alpha_is_inverse_mean_distance() {
        let g =
            build_graph(&block(3), &[[0.0; 3], [3.0, 4.0, 0.0], [0.0, 0.0, 10.0]], Alpha::Auto, DistanceMode::Color);
        let mean = (5.0 + 10.0 + (9.0f64 + 16.0 + 100.0).sqrt()) / 3.0;
        assert!(approx(g.alpha(), 1.0 / mean, 1e-15));
        let flat = build_graph(&block(2), &[[1.0; 3]; 2], Alpha::Auto, DistanceMode::Color);
        assert_eq!(flat.alpha(), 1.0 / MIN_MEAN_DISTANCE);
    }

    #[test]
    fn equal_weight_triangle() {
        let w = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 0.5 });
        let g = BlockGraph::from_weights(w, 1.0, DistanceMode::Color).unwrap();
        assert_eq!(degree_matrix(&g), vec![1.0, 1.0, 1.0]);
        let w1 = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let l = laplacian(&BlockGraph::from_weights(w1, 1.0, DistanceMode::Color).unwrap());
        assert_eq!(l, Matrix::from_rows(&[[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]).unwrap());
    }

    #[test]
    fn rejects_bad_adjacency() {
        let asym = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.0]]).unwrap();
        assert!(BlockGraph::from_weights(asym, 1.0, DistanceMode::Color).is_err());
        let looped = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(BlockGraph::from_weights(looped, 1.0, DistanceMode::Color).is_err());
        assert!(eigendecompose(&Matrix::zeros(2, 3)).is_err());
        assert!(eigendecompose(&Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap()).is_err());
    }

    #[test]
    fn two_node_closed_form() {
        let w = 0.37;
        let l = Matrix::from_rows(&[[w, -w], [-w, w]]).unwrap();
        let s = eigendecompose(&l).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(approx(s.eigenvalues()[0], 0.0, 1e-15));
        assert!(approx(s.eigenvalues()[1], 2.0 * w, 1e-15));
        assert!(approx(s.eigenvector(0)[0], h, 1e-15) && approx(s.eigenvector(0)[1], h, 1e-15));
        assert!(approx(s.eigenvector(1)[0], h, 1e-15) && approx(s.eigenvector(1)[1], -h, 1e-15));
    }

    #[test]
    fn zero_matrix_spectrum() {
        let s = eigendecompose(&Matrix::zeros(5, 5)).unwrap();
        assert!(s.eigenvalues().iter().all(|&l| l == 0.0));
        assert_eq!(s.eigenvectors(), &Matrix::identity(5));
    }

    #[test]
    fn non_laplacian_symmetric_input() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let s = eigendecompose(&Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        assert!(approx(s.eigenvalues()[0], 1.0, 1e-14) && approx(s.eigenvalues()[1], 3.0, 1e-14));
        let d = eigendecompose(&Matrix::from_rows(&[[5.0, 0.0], [0.0, -1.0]]).unwrap()).unwrap();
        assert_eq!(d.eigenvalues(), &[-1.0, 5.0]);
        assert_eq!(d.eigenvector(0), vec![0.0, 1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn laplacian_spectrum_invariants(
            colors in proptest::collection::vec((0.0f64..255.0, 0.0f64..255.0, 0.0f64..255.0), 1..=24),
        ) {
            let feats: Vec<[f64; 3]> = colors.into_iter().map(|(a, b, c)| [a, b, c]).collect();
            let g = graph_from_features(&feats, Alpha::Auto, DistanceMode::Color);
            let l = laplacian(&g);
            for i in 0..g.n() {
                prop_assert!(l.row(i).iter().sum::<f64>().abs() <= 1e-12);
            }
            let s = eigendecompose(&l).unwrap();
            let n = s.n();
            let vtv = s.eigenvectors().t_matmul(s.eigenvectors());
            prop_assert!(vtv.sub(&Matrix::identity(n)).max_abs() <= 1e-9);
            prop_assert!(s.eigenvalues()[0] >= -1e-9);
            prop_assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
            let lmax = s.eigenvalues()[n - 1];
            prop_assert!(s.reconstruct().sub(&l).max_abs() <= 1e-8 * lmax.max(1.0));
            if n > 1 {
                prop_assert!(s.eigenvalues()[1] > 0.0);
            }
            let dc = s.eigenvector(0);
            let expect = 1.0 / (n as f64).sqrt();
            prop_assert!(dc.iter().all(|x| (x - expect).abs() <= 1e-9));
            prop_assert_eq!(eigendecompose(&l).unwrap(), s);
        }
    }
}
