//! Small dense linear algebra: products, spectral norm, determinants and
//! planar convex-hull area.

use crate::error::{check_finite, check_len, Error, Result};
use crate::game::PayoffMatrix;

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 10_000;

/// Largest matrix handled by [`det`].
pub const MAX_SQUARE_DIM: usize = 64;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `A v`.
pub fn mat_vec(a: &PayoffMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_len("mat_vec operand", a.cols(), v.len())?;
    Ok((0..a.rows()).map(|i| dot(a.row(i), v)).collect())
}

/// `Aᵀ v`.
pub fn mat_tvec(a: &PayoffMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_len("mat_tvec operand", a.rows(), v.len())?;
    let mut out = vec![0.0; a.cols()];
    for (i, &vi) in v.iter().enumerate() {
        for (o, &aij) in out.iter_mut().zip(a.row(i)) {
            *o += aij * vi;
        }
    }
    Ok(out)
}

/// `AᵀA v`.
fn gram_apply(a: &PayoffMatrix, v: &[f64]) -> Vec<f64> {
    let av = mat_vec(a, v).expect("dimensions fixed by caller");
    mat_tvec(a, &av).expect("dimensions fixed by caller")
}

fn power_iteration(a: &PayoffMatrix, start: Vec<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let mut v = start;
    let n = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);

    let mut estimate = f64::NAN;
    for _ in 0..max_iter {
        let w = gram_apply(a, &v);
        // Rayleigh quotient of AᵀA at the unit vector v.
        let next = dot(&v, &w);
        let w_norm = norm_sq(&w).sqrt();
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        if (next - estimate).abs() < tol * next.abs() {
            return Ok(next);
        }
        estimate = next;
        v = w.into_iter().map(|x| x / w_norm).collect();
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        last_estimate: estimate.max(0.0).sqrt(),
    })
}

/// Largest singular value of `a` by power iteration on `AᵀA`.
///
/// Starts from the normalized all-ones vector. If the converged eigenvalue is
/// below `‖A‖_F² / min(k1, k2)`, which every top eigenvalue of `AᵀA` exceeds,
/// the start vector missed the top singular space; the first coordinate is
/// nudged by `1e-3` and the iteration restarts once.
pub fn spectral_norm(a: &PayoffMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Invalid {
            what: "tolerance",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let frob = a.frobenius_norm_sq();
    if frob == 0.0 {
        return Ok(0.0);
    }
    let floor = frob / a.rows().min(a.cols()) as f64;

    let ones = vec![1.0; a.cols()];
    let lambda = power_iteration(a, ones.clone(), tol, max_iter)?;
    if lambda >= floor * (1.0 - 1e-9) {
        return Ok(lambda.sqrt());
    }
    let mut nudged = ones;
    nudged[0] += 1e-3;
    power_iteration(a, nudged, tol, max_iter).map(f64::sqrt)
}

pub fn spectral_norm_default(a: &PayoffMatrix) -> Result<f64> {
    spectral_norm(a, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER)
}

/// Dense `n × n` matrix, row-major, `1 ≤ n ≤ 64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_SQUARE_DIM {
            return Err(Error::Invalid {
                what: "square matrix",
                reason: format!("dimension must be in 1..={MAX_SQUARE_DIM}, got {n}"),
            });
        }
        check_len("square matrix entries", n * n, entries.len())?;
        check_finite("square matrix entries", &entries)?;
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            check_len("square matrix row", n, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(n, entries)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.n + j] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn matmul(&self, other: &SquareMatrix) -> Result<SquareMatrix> {
        check_len("matmul operand", self.n, other.n)?;
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                for j in 0..n {
                    out[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        SquareMatrix::new(n, out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("square matrix operand", self.n, v.len())?;
        Ok(self.entries.chunks(self.n).map(|row| dot(row, v)).collect())
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &SquareMatrix) -> f64 {
    let n = m.n;
    let mut a = m.entries.clone();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            sign = -sign;
        }
        let p = a[col * n + col];
        for i in col + 1..n {
            let factor = a[i * n + col] / p;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[i * n + j] -= factor * a[col * n + j];
            }
        }
    }
    sign * (0..n).map(|i| a[i * n + i]).product::<f64>()
}

pub type Point2 = [f64; 2];

/// Convex hull area together with a flag for degenerate inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullArea {
    pub area: f64,
    pub degenerate: bool,
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain), without
/// collinear boundary points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }

    // Lower chain left to right, then upper chain right to left.
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a simple polygon given in order.
pub fn polygon_area(polygon: &[Point2]) -> f64 {
    let n = polygon.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let p = polygon[i];
            let q = polygon[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    twice.abs() / 2.0
}

/// Area of the convex hull of `points`. Fewer than three distinct points, or
/// collinear input, gives area 0 with `degenerate` set.
pub fn hull_area_2d(points: &[Point2]) -> HullArea {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return HullArea {
            area: 0.0,
            degenerate: true,
        };
    }
    HullArea {
        area: polygon_area(&hull),
        degenerate: false,
    }
}
