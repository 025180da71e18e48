//! Dense exact linear algebra over the Gaussian rationals: row reduction,
//! kernels, solving, and subspace arithmetic (membership, intersection,
//! sum, annihilators). Everything here is small and desk-scale; no attempt
//! is made at asymptotic cleverness.

use crate::scalar::QQi;

/// A matrix as a list of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: Vec<Vec<QQi>>,
    pub ncols: usize,
}

impl Mat {
    pub fn new(rows: Vec<Vec<QQi>>, ncols: usize) -> Self {
        for r in &rows {
            assert_eq!(r.len(), ncols, "ragged matrix");
        }
        Mat { rows, ncols }
    }

    pub fn zero(nrows: usize, ncols: usize) -> Self {
        Mat { rows: vec![vec![QQi::zero(); ncols]; nrows], ncols }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m.rows[i][i] = QQi::one();
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[QQi]) -> Vec<QQi> {
        assert_eq!(v.len(), self.ncols);
        self.rows
            .iter()
            .map(|row| {
                let mut acc = QQi::zero();
                for (a, b) in row.iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += &(a * b);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zero(self.ncols, self.nrows());
        for (i, row) in self.rows.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                t.rows[j][i] = a.clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.ncols, other.nrows());
        let mut out = Mat::zero(self.nrows(), other.ncols);
        for i in 0..self.nrows() {
            for k in 0..self.ncols {
                let a = &self.rows[i][k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.ncols {
                    let b = &other.rows[k][j];
                    if !b.is_zero() {
                        out.rows[i][j] += &(a * b);
                    }
                }
            }
        }
        out
    }
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(m: &mut Mat) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m.ncols {
        let Some(pr) = (row..m.nrows()).find(|&r| !m.rows[r][col].is_zero()) else {
            continue;
        };
        m.rows.swap(row, pr);
        let inv = m.rows[row][col].inv().unwrap();
        for j in col..m.ncols {
            let v = &m.rows[row][j] * &inv;
            m.rows[row][j] = v;
        }
        for r in 0..m.nrows() {
            if r != row && !m.rows[r][col].is_zero() {
                let f = m.rows[r][col].clone();
                for j in col..m.ncols {
                    let delta = &f * &m.rows[row][j];
                    m.rows[r][j] -= &delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.nrows() {
            break;
        }
    }
    pivots
}

pub fn rank(m: &Mat) -> usize {
    let mut c = m.clone();
    rref(&mut c).len()
}

/// Basis of the right kernel {x : Mx = 0}.
pub fn kernel_basis(m: &Mat) -> Vec<Vec<QQi>> {
    let mut c = m.clone();
    let pivots = rref(&mut c);
    let mut is_pivot = vec![false; m.ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in 0..m.ncols {
        if is_pivot[free] {
            continue;
        }
        let mut v = vec![QQi::zero(); m.ncols];
        v[free] = QQi::one();
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -c.rows[r][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// One solution of Mx = b, if any.
pub fn solve(m: &Mat, b: &[QQi]) -> Option<Vec<QQi>> {
    assert_eq!(b.len(), m.nrows());
    let mut aug = Mat::zero(m.nrows(), m.ncols + 1);
    for (i, row) in m.rows.iter().enumerate() {
        aug.rows[i][..m.ncols].clone_from_slice(row);
        aug.rows[i][m.ncols] = b[i].clone();
    }
    let pivots = rref(&mut aug);
    if pivots.contains(&m.ncols) {
        return None;
    }
    let mut x = vec![QQi::zero(); m.ncols];
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = aug.rows[r][m.ncols].clone();
    }
    Some(x)
}

/// The lexicographically minimal solution of Mx = b in the following
/// sense: free coordinates are set to zero, scanning columns left to
/// right. Deterministic for a fixed column order.
pub fn solve_lex_min(m: &Mat, b: &[QQi]) -> Option<Vec<QQi>> {
    solve(m, b)
}

/// A linear subspace of QQi^n kept as an RREF basis, so equality of
/// subspaces is equality of the representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    /// RREF basis rows.
    pub basis: Vec<Vec<QQi>>,
    pub dim_ambient: usize,
}

impl Subspace {
    pub fn from_span(vectors: &[Vec<QQi>], dim_ambient: usize) -> Self {
        let mut m = Mat::new(vectors.to_vec(), dim_ambient);
        rref(&mut m);
        let basis = m.rows.into_iter().filter(|r| r.iter().any(|c| !c.is_zero())).collect();
        Subspace { basis, dim_ambient }
    }

    pub fn zero(dim_ambient: usize) -> Self {
        Subspace { basis: Vec::new(), dim_ambient }
    }

    pub fn full(dim_ambient: usize) -> Self {
        Subspace::from_span(&Mat::identity(dim_ambient).rows, dim_ambient)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn contains(&self, v: &[QQi]) -> bool {
        assert_eq!(v.len(), self.dim_ambient);
        // Reduce v against the RREF basis.
        let mut v = v.to_vec();
        for row in &self.basis {
            let pivot = row.iter().position(|c| !c.is_zero()).unwrap();
            if !v[pivot].is_zero() {
                let f = v[pivot].clone();
                for j in 0..self.dim_ambient {
                    let delta = &f * &row[j];
                    v[j] -= &delta;
                }
            }
        }
        v.iter().all(|c| c.is_zero())
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|v| self.contains(v))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.dim_ambient, other.dim_ambient);
        let mut all = self.basis.clone();
        all.extend(other.basis.iter().cloned());
        Subspace::from_span(&all, self.dim_ambient)
    }

    /// Intersection via the kernel of the stacked system.
    pub fn intersect(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.dim_ambient, other.dim_ambient);
        if self.basis.is_empty() || other.basis.is_empty() {
            return Subspace::zero(self.dim_ambient);
        }
        // x = A^T a = B^T b; solve [A^T | -B^T] (a,b)^T = 0.
        let na = self.basis.len();
        let nb = other.basis.len();
        let mut m = Mat::zero(self.dim_ambient, na + nb);
        for (k, v) in self.basis.iter().enumerate() {
            for i in 0..self.dim_ambient {
                m.rows[i][k] = v[i].clone();
            }
        }
        for (k, v) in other.basis.iter().enumerate() {
            for i in 0..self.dim_ambient {
                m.rows[i][na + k] = -v[i].clone();
            }
        }
        let ker = kernel_basis(&m);
        let vectors: Vec<Vec<QQi>> = ker
            .iter()
            .map(|coeffs| {
                let mut x = vec![QQi::zero(); self.dim_ambient];
                for (k, v) in self.basis.iter().enumerate() {
                    if coeffs[k].is_zero() {
                        continue;
                    }
                    for i in 0..self.dim_ambient {
                        if !v[i].is_zero() {
                            x[i] += &(&coeffs[k] * &v[i]);
                        }
                    }
                }
                x
            })
            .collect();
        Subspace::from_span(&vectors, self.dim_ambient)
    }

    /// {x in self : f(x) = 0 for each functional f}, functionals given as
    /// coefficient rows of length dim_ambient.
    pub fn annihilator_in(&self, functionals: &[Vec<QQi>]) -> Subspace {
        if self.basis.is_empty() {
            return self.clone();
        }
        // Coefficients c with sum c_k f(v_k) = 0 for all f.
        let mut m = Mat::zero(functionals.len(), self.basis.len());
        for (i, f) in functionals.iter().enumerate() {
            for (k, v) in self.basis.iter().enumerate() {
                let mut acc = QQi::zero();
                for j in 0..self.dim_ambient {
                    if !f[j].is_zero() && !v[j].is_zero() {
                        acc += &(&f[j] * &v[j]);
                    }
                }
                m.rows[i][k] = acc;
            }
        }
        let ker = kernel_basis(&m);
        let vectors: Vec<Vec<QQi>> = ker
            .iter()
            .map(|coeffs| {
                let mut x = vec![QQi::zero(); self.dim_ambient];
                for (k, v) in self.basis.iter().enumerate() {
                    if coeffs[k].is_zero() {
                        continue;
                    }
                    for j in 0..self.dim_ambient {
                        if !v[j].is_zero() {
                            x[j] += &(&coeffs[k] * &v[j]);
                        }
                    }
                }
                x
            })
            .collect();
        Subspace::from_span(&vectors, self.dim_ambient)
    }

    /// Image of the subspace under a linear map given by its matrix.
    pub fn map(&self, m: &Mat) -> Subspace {
        let vectors: Vec<Vec<QQi>> = self.basis.iter().map(|v| m.apply(v)).collect();
        Subspace::from_span(&vectors, m.nrows())
    }

    /// Preimage {x : Mx in self}.
    pub fn preimage(&self, m: &Mat) -> Subspace {
        // Mx = sum c_k b_k; unknowns (x, c); kernel of [M | -B^T].
        let nb = self.basis.len();
        let mut sys = Mat::zero(m.nrows(), m.ncols + nb);
        for (i, row) in m.rows.iter().enumerate() {
            sys.rows[i][..m.ncols].clone_from_slice(row);
        }
        for (k, v) in self.basis.iter().enumerate() {
            for i in 0..m.nrows() {
                sys.rows[i][m.ncols + k] = -v[i].clone();
            }
        }
        let ker = kernel_basis(&sys);
        let vectors: Vec<Vec<QQi>> = ker.iter().map(|w| w[..m.ncols].to_vec()).collect();
        Subspace::from_span(&vectors, m.ncols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat_int;

    fn qi(n: i64) -> QQi {
        QQi::from_int(n)
    }

    #[test]
    fn rref_rank_kernel() {
        let m = Mat::new(
            vec![
                vec![qi(1), qi(2), qi(3)],
                vec![qi(2), qi(4), qi(6)],
                vec![qi(1), qi(0), qi(1)],
            ],
            3,
        );
        assert_eq!(rank(&m), 2);
        let ker = kernel_basis(&m);
        assert_eq!(ker.len(), 1);
        for v in &ker {
            assert!(m.apply(v).iter().all(|c| c.is_zero()));
        }
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let m = Mat::new(vec![vec![qi(1), qi(1)], vec![qi(1), qi(-1)]], 2);
        let b = vec![qi(3), qi(1)];
        let x = solve(&m, &b).unwrap();
        assert_eq!(m.apply(&x), b);
        let sing = Mat::new(vec![vec![qi(1), qi(1)], vec![qi(2), qi(2)]], 2);
        assert!(solve(&sing, &[qi(0), qi(1)]).is_none());
    }

    #[test]
    fn subspace_inclusion_and_intersection() {
        let a = Subspace::from_span(&[vec![qi(1), qi(0), qi(0)], vec![qi(0), qi(1), qi(0)]], 3);
        let b = Subspace::from_span(&[vec![qi(0), qi(1), qi(1)], vec![qi(0), qi(0), qi(1)]], 3);
        let cap = a.intersect(&b);
        assert_eq!(cap.dim(), 1);
        assert!(cap.contains(&[qi(0), qi(1), qi(0)]));
        assert!(a.contains(&[qi(2), qi(-5), qi(0)]));
        assert!(!a.contains(&[qi(0), qi(0), qi(1)]));
        let s = a.sum(&b);
        assert_eq!(s.dim(), 3);
    }

    #[test]
    fn subspace_rank_nullity() {
        // rank + nullity = ncols on a few fixed matrices.
        let mats = [
            Mat::new(vec![vec![qi(1), qi(2), qi(3), qi(4)]], 4),
            Mat::new(vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)], vec![qi(1), qi(1)]], 2),
            Mat::zero(3, 5),
        ];
        for m in &mats {
            assert_eq!(rank(m) + kernel_basis(m).len(), m.ncols);
        }
    }

    #[test]
    fn gaussian_entries() {
        let i = QQi::i();
        let m = Mat::new(vec![vec![QQi::one(), i.clone()], vec![i.clone(), -QQi::one()]], 2);
        // Second row is i times the first: rank 1.
        assert_eq!(rank(&m), 1);
        let ker = kernel_basis(&m);
        assert_eq!(ker.len(), 1);
        assert!(m.apply(&ker[0]).iter().all(|c| c.is_zero()));
    }

    #[test]
    fn annihilator_in_subspace() {
        let a = Subspace::full(3);
        let f = vec![vec![qi(1), qi(1), qi(1)]];
        let ann = a.annihilator_in(&f);
        assert_eq!(ann.dim(), 2);
        for v in &ann.basis {
            let s = v.iter().fold(QQi::zero(), |mut acc, c| {
                acc += c;
                acc
            });
            assert!(s.is_zero());
        }
    }

    #[test]
    fn preimage_and_map() {
        let m = Mat::new(vec![vec![qi(1), qi(0), qi(1)], vec![qi(0), qi(1), qi(1)]], 3);
        let target = Subspace::from_span(&[vec![qi(1), qi(1)]], 2);
        let pre = target.preimage(&m);
        assert_eq!(pre.dim(), 2); // one dim of kernel + one of actual preimage
        for v in &pre.basis {
            assert!(target.contains(&m.apply(v)));
        }
        let img = pre.map(&m);
        assert_eq!(img, target.intersect(&Subspace::full(2)).intersect(&img.sum(&img)).sum(&img));
        assert!(target.contains_subspace(&img));
    }

    #[test]
    fn rat_int_sanity() {
        assert_eq!(rat_int(2) + rat_int(3), rat_int(5));
    }
}
