//! Classical (Torgerson) multidimensional scaling.
//!
//! Distances are squared elementwise and double-centred,
//! `B = −½·J·D⁽²⁾·J` with `J = I − 11ᵀ/n`; the embedding is the two leading
//! eigenvectors of `B` scaled by `√max(λ, 0)`.

use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::forest::ProximityMatrix;
use crate::Scalar;

/// Jacobi stops once the off-diagonal Frobenius norm is at most this times
/// `max(1, ‖A‖_F)`.
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;

/// Symmetric, zero-diagonal, non-negative `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<F> {
    n: usize,
    values: Vec<F>,
}

impl<F: Scalar> DistanceMatrix<F> {
    /// Validates a row-major `n × n` matrix. Symmetry is checked to within
    /// `1e−9` relative to the largest entry.
    pub fn new(n: usize, values: Vec<F>) -> Result<Self> {
        check_dim(n * n, values.len())?;
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.wide().abs()));
        for i in 0..n {
            if values[i * n + i] != F::zero() {
                return Err(Error::validation(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < F::zero() {
                    return Err(Error::validation(format!("entry ({i}, {j}) is negative or not finite")));
                }
                if (v.wide() - values[j * n + i].wide()).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::validation("distance matrix is not symmetric"));
                }
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    /// `Dis = 1 − Prox`.
    pub fn from_proximity(p: &ProximityMatrix<F>) -> Result<Self> {
        DistanceMatrix::new(p.size(), p.dissimilarities())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }
}

/// Pairwise (non-squared) Euclidean distances.
pub fn euclidean_distance_matrix<'a, F: Scalar, I>(rows: I) -> Result<DistanceMatrix<F>>
where
    I: IntoIterator<Item = &'a [F]>,
{
    let rows: Vec<&[F]> = rows.into_iter().collect();
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation("distance matrix of zero rows"));
    }
    let m = rows[0].len();
    for r in &rows {
        check_dim(m, r.len())?;
    }
    let mut values = vec![F::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = crate::som::sq_dist(rows[i], rows[j]).sqrt();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(n, values)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub n: usize,
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[k·n..(k+1)·n]` is the unit eigenvector of `values[k]`, signed
    /// so that its largest-magnitude entry is positive.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Cyclic Jacobi eigensolver for a row-major symmetric `n × n` matrix.
pub fn symmetric_eigen<F: Scalar>(n: usize, a: &[F]) -> Result<SymmetricEigen> {
    check_dim(n * n, a.len())?;
    if n == 0 {
        return Err(Error::validation("empty matrix"));
    }
    let mut a: Vec<f64> = a.iter().map(|v| v.wide()).collect();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for i in 0..n {
        for j in i + 1..n {
            if (a[i * n + j] - a[j * n + i]).abs() > SYMMETRY_TOL * norm.max(1.0) {
                return Err(Error::validation("matrix is not symmetric"));
            }
            let mean = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = mean;
            a[j * n + i] = mean;
        }
    }
    let tol = OFF_DIAGONAL_TOL * norm.max(1.0);
    // rows of `v` are the eigenvectors
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        let row = &v[k * n..(k + 1) * n];
        let mut lead = 0;
        for (i, x) in row.iter().enumerate() {
            if x.abs() > row[lead].abs() {
                lead = i;
            }
        }
        let sign = if row[lead] < 0.0 { -1.0 } else { 1.0 };
        vectors.extend(row.iter().map(|x| sign * x));
    }
    Ok(SymmetricEigen {
        n,
        values,
        vectors,
        sweeps,
    })
}

/// Zeroes `a[p][q]` with one Jacobi rotation, accumulating it into `v`.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[p * n + k];
        let akq = a[q * n + k];
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        a[p * n + k] = np;
        a[k * n + p] = np;
        a[q * n + k] = nq;
        a[k * n + q] = nq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    let (head, tail) = v.split_at_mut(q * n);
    let vp = &mut head[p * n..(p + 1) * n];
    let vq = &mut tail[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// `B = −½·J·D⁽²⁾·J`, row-major.
pub fn double_center<F: Scalar>(d: &DistanceMatrix<F>) -> Vec<f64> {
    let n = d.n;
    let sq: Vec<f64> = d.values.iter().map(|v| v.wide() * v.wide()).collect();
    let row_mean: Vec<f64> = sq.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // D⁽²⁾ is symmetric, so column means equal row means
            b[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    b
}

/// Two-dimensional embedding of `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D<F> {
    pub coordinates: Vec<[F; 2]>,
    /// The two leading eigenvalues of `B`, before clamping.
    pub eigenvalues_used: [f64; 2],
    /// `Σ|λ⁻| / Σ|λ|` over all eigenvalues of `B`; zero for Euclidean input.
    pub negative_mass: f64,
}

impl<F: Scalar> Embedding2D<F> {
    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    /// Writes `x,y,class` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W, labels: &[usize]) -> Result<()> {
        check_dim(self.len(), labels.len())?;
        let io = |e| Error::io("<embedding csv>", e);
        writeln!(out, "x,y,class").map_err(io)?;
        for (p, c) in self.coordinates.iter().zip(labels) {
            writeln!(out, "{},{},{}", p[0], p[1], c).map_err(io)?;
        }
        Ok(())
    }
}

/// Classical MDS to two dimensions.
pub fn classical_mds<F: Scalar>(d: &DistanceMatrix<F>) -> Result<Embedding2D<F>> {
    let n = d.n;
    if n < 3 {
        return Err(Error::validation(format!("classical MDS needs n ≥ 3, got {n}")));
    }
    let b = double_center(d);
    let eig = symmetric_eigen(n, &b)?;
    let total: f64 = eig.values.iter().map(|l| l.abs()).sum();
    let negative: f64 = eig.values.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let scale = [eig.values[0].max(0.0).sqrt(), eig.values[1].max(0.0).sqrt()];
    let (v0, v1) = (eig.vector(0), eig.vector(1));
    let coordinates = (0..n)
        .map(|i| [F::lit(v0[i] * scale[0]), F::lit(v1[i] * scale[1])])
        .collect();
    Ok(Embedding2D {
        coordinates,
        eigenvalues_used: [eig.values[0], eig.values[1]],
        negative_mass: if total > 0.0 { negative / total } else { 0.0 },
    })
}
