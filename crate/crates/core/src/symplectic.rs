//! Linear symplectic algebra on `R²ⁿ = Rⁿ_x × Rⁿ_p`.
//!
//! Coordinates are ordered `z = (x, p)` and the symplectic form is
//! `σ(z, z′) = p·x′ − p′·x`. With `J = (0 I; −I 0)` Hamilton's equations
//! read `ż = J∇H`, and a matrix `S` is symplectic iff `SᵀJS = J`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::tolerances::{TOL_DET, TOL_SYMP};

/// A point `z = (x, p)` of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    /// Builds a point, checking that `x` and `p` have equal nonzero length
    /// and finite entries.
    pub fn try_new(x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidInput("phase point of dimension 0".into()));
        }
        check_dim(x.len(), p.len())?;
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite phase point entry".into()));
        }
        Ok(Self {
            x: DVector::from_vec(x),
            p: DVector::from_vec(p),
        })
    }

    /// Like [`PhasePoint::try_new`] but panics on invalid input.
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        Self::try_new(x, p).expect("invalid phase point")
    }

    /// One degree of freedom.
    pub fn scalar(x: f64, p: f64) -> Self {
        Self::new(vec![x], vec![p])
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            p: DVector::zeros(n),
        }
    }

    pub fn from_parts(x: DVector<f64>, p: DVector<f64>) -> Self {
        debug_assert_eq!(x.len(), p.len());
        Self { x, p }
    }

    /// Splits a `2n` vector ordered `(x, p)`.
    pub fn from_vector(z: &DVector<f64>) -> Self {
        let n = z.len() / 2;
        Self {
            x: z.rows(0, n).into_owned(),
            p: z.rows(n, n).into_owned(),
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.x[i] } else { self.p[i - n] })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `p·x`
    pub fn px(&self) -> f64 {
        self.p.dot(&self.x)
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.p.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }
}

impl Add for &PhasePoint {
    type Output = PhasePoint;
    fn add(self, rhs: &PhasePoint) -> PhasePoint {
        PhasePoint::from_parts(&self.x + &rhs.x, &self.p + &rhs.p)
    }
}

impl Sub for &PhasePoint {
    type Output = PhasePoint;
    fn sub(self, rhs: &PhasePoint) -> PhasePoint {
        PhasePoint::from_parts(&self.x - &rhs.x, &self.p - &rhs.p)
    }
}

impl Mul<f64> for &PhasePoint {
    type Output = PhasePoint;
    fn mul(self, s: f64) -> PhasePoint {
        PhasePoint::from_parts(&self.x * s, &self.p * s)
    }
}

impl Neg for &PhasePoint {
    type Output = PhasePoint;
    fn neg(self) -> PhasePoint {
        PhasePoint::from_parts(-&self.x, -&self.p)
    }
}

/// `σ(z, z′) = Σⱼ pⱼx′ⱼ − p′ⱼxⱼ`.
pub fn symplectic_form(z: &PhasePoint, z2: &PhasePoint) -> Result<f64> {
    check_dim(z.dim(), z2.dim())?;
    Ok(sigma(z, z2))
}

#[inline]
pub(crate) fn sigma(z: &PhasePoint, z2: &PhasePoint) -> f64 {
    z.p.dot(&z2.x) - z2.p.dot(&z.x)
}

/// The standard symplectic matrix `J = (0 I; −I 0)` of size `2n`.
pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

fn check_even_square(s: &DMatrix<f64>) -> Result<usize> {
    let (r, c) = s.shape();
    if r != c || r % 2 != 0 || r == 0 {
        return Err(Error::OddDimension { rows: r, cols: c });
    }
    Ok(r / 2)
}

/// `‖SᵀJS − J‖_max`.
pub fn symplectic_defect(s: &DMatrix<f64>) -> Result<f64> {
    let n = check_even_square(s)?;
    let j = j_matrix(n);
    Ok((s.transpose() * &j * s - j).amax())
}

/// True iff `‖SᵀJS − J‖_max ≤ tol`.
pub fn is_symplectic(s: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(symplectic_defect(s)? <= tol)
}

/// A linear symplectic map `S = (A B; C D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap {
    n: usize,
    m: DMatrix<f64>,
}

impl SymplecticMap {
    /// Validates `m` against [`TOL_SYMP`] relative to `max(1, ‖m‖²_max)`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, TOL_SYMP)
    }

    pub fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = check_even_square(&m)?;
        let defect = symplectic_defect(&m)?;
        let scale = m.amax().powi(2).max(1.0);
        if defect > tol * scale {
            return Err(Error::NotSymplectic { defect });
        }
        Ok(Self { n, m })
    }

    pub fn from_blocks(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
        d: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        for blk in [a, b, c, d] {
            if blk.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!(
                    "block of shape {:?}, expected ({n}, {n})",
                    blk.shape()
                )));
            }
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(a);
        m.view_mut((0, n), (n, n)).copy_from(b);
        m.view_mut((n, 0), (n, n)).copy_from(c);
        m.view_mut((n, n), (n, n)).copy_from(d);
        Self::new(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            m: DMatrix::identity(2 * n, 2 * n),
        }
    }

    /// The map `z ↦ Jz`, i.e. `(x, p) ↦ (p, −x)`.
    pub fn standard_j(n: usize) -> Self {
        Self { n, m: j_matrix(n) }
    }

    /// Time-`t` flow `exp(tJQ)` of the quadratic Hamiltonian `H = ½ zᵀQz`.
    pub fn quadratic_flow(q: &DMatrix<f64>, t: f64) -> Result<Self> {
        let n = check_even_square(q)?;
        if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidInput("quadratic form must be symmetric".into()));
        }
        let generator = j_matrix(n) * q * t;
        Self::new(generator.exp())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.m.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn b(&self) -> DMatrix<f64> {
        self.m.view((0, self.n), (self.n, self.n)).into_owned()
    }

    pub fn c(&self) -> DMatrix<f64> {
        self.m.view((self.n, 0), (self.n, self.n)).into_owned()
    }

    pub fn d(&self) -> DMatrix<f64> {
        self.m.view((self.n, self.n), (self.n, self.n)).into_owned()
    }

    pub fn apply(&self, z: &PhasePoint) -> PhasePoint {
        debug_assert_eq!(z.dim(), self.n);
        PhasePoint::from_vector(&(&self.m * z.to_vector()))
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &SymplecticMap) -> SymplecticMap {
        SymplecticMap {
            n: self.n,
            m: &self.m * &other.m,
        }
    }

    /// `S⁻¹ = −J Sᵀ J`.
    pub fn inverse(&self) -> SymplecticMap {
        let j = j_matrix(self.n);
        SymplecticMap {
            n: self.n,
            m: -(&j * self.m.transpose() * &j),
        }
    }

    /// `det B`; the map is free when it is nonzero.
    pub fn det_b(&self) -> f64 {
        self.b().determinant()
    }

    pub fn is_free(&self) -> bool {
        self.det_b().abs() > TOL_DET
    }
}

/// A Lagrangian plane `{ z : Ax + Bp = 0 }`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPlane {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LagrangianPlane {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !is_lagrangian_plane(&a, &b, TOL_SYMP)? {
            return Err(Error::InvalidInput(
                "equations do not define a Lagrangian plane".into(),
            ));
        }
        Ok(Self { a, b })
    }

    /// The graph `p = Mx`, i.e. `A = M`, `B = −I`. `M` must be symmetric.
    pub fn graph(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::new(m, -DMatrix::identity(n, n))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Point of the plane with coordinates `u`: `(−Bᵀu, Aᵀu)`.
    pub fn point(&self, u: &DVector<f64>) -> PhasePoint {
        PhasePoint::from_parts(-(self.b.transpose() * u), self.a.transpose() * u)
    }

    pub fn contains(&self, z: &PhasePoint, tol: f64) -> bool {
        (&self.a * &z.x + &self.b * &z.p).amax() <= tol * z.norm().max(1.0)
    }
}

fn stacked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!(
            "A is {:?}, B is {:?}; both must be square of equal size",
            a.shape(),
            b.shape()
        )));
    }
    let mut ab = DMatrix::zeros(n, 2 * n);
    ab.view_mut((0, 0), (n, n)).copy_from(a);
    ab.view_mut((0, n), (n, n)).copy_from(b);
    Ok(ab)
}

/// Numeric rank with singular values thresholded at `tol · σ_max`.
fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// True iff `rank[A B] = n` and `ABᵀ = BAᵀ` within `tol`.
pub fn is_lagrangian_plane(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let ab = stacked(a, b)?;
    let n = a.nrows();
    if numeric_rank(&ab, tol) != n {
        return Ok(false);
    }
    let abt = a * b.transpose();
    Ok((&abt - abt.transpose()).amax() <= tol * ab.amax().powi(2).max(1.0))
}

/// Orthonormal basis (as columns of a `2n×n` matrix) of the kernel of `[A B]`.
pub fn plane_kernel_basis(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ab = stacked(a, b)?;
    let n = a.nrows();
    // pad to a square matrix so the SVD returns a full right basis
    let mut sq = DMatrix::zeros(2 * n, 2 * n);
    sq.view_mut((0, 0), (n, 2 * n)).copy_from(&ab);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..2 * n).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut basis = DMatrix::zeros(2 * n, n);
    for (col, &i) in idx.iter().take(n).enumerate() {
        basis.set_column(col, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Largest `|σ(kᵢ, kⱼ)|` over an orthonormal kernel basis of `[A B]`.
pub fn kernel_sigma_defect(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let basis = plane_kernel_basis(a, b)?;
    let n = a.nrows();
    let cols: Vec<PhasePoint> = (0..n)
        .map(|i| PhasePoint::from_vector(&basis.column(i).into_owned()))
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max(sigma(&cols[i], &cols[j]).abs());
        }
    }
    Ok(worst)
}

/// Free generating function `W(x_S, x)` of a free symplectic map.
///
/// `W(x_S, x) = ½ DB⁻¹x_S·x_S − B⁻¹x_S·x + ½ B⁻¹Ax·x`, so that
/// `(x_S, p_S) = S(x, p)` iff `p_S = ∂W/∂x_S` and `p = −∂W/∂x`.
pub fn free_generating_function(
    s: &SymplecticMap,
    xs: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    check_dim(s.dim(), xs.len())?;
    check_dim(s.dim(), x.len())?;
    let det = s.det_b();
    if det.abs() <= TOL_DET {
        return Err(Error::FreeConditionViolated { det });
    }
    let b_inv = s
        .b()
        .try_inverse()
        .ok_or(Error::FreeConditionViolated { det })?;
    let d_binv = s.d() * &b_inv;
    let binv_a = &b_inv * s.a();
    Ok(0.5 * (d_binv * xs).dot(xs) - (&b_inv * xs).dot(x) + 0.5 * (binv_a * x).dot(x))
}

/// Phase increment `½(p_S·x_S − p·x)` picked up under the frame change `S`.
pub fn frame_phase_shift(s: &SymplecticMap, z: &PhasePoint) -> Result<f64> {
    check_dim(s.dim(), z.dim())?;
    let zs = s.apply(z);
    Ok(0.5 * (zs.px() - z.px()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn sigma_examples() {
        let e_x = PhasePoint::scalar(1.0, 0.0);
        let e_p = PhasePoint::scalar(0.0, 1.0);
        assert_eq!(symplectic_form(&e_x, &e_p).unwrap(), -1.0);
        assert_eq!(symplectic_form(&e_x, &e_x).unwrap(), 0.0);

        let z = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 2.0]);
        let z2 = PhasePoint::new(vec![0.0, 1.0], vec![3.0, 0.0]);
        // brute-force double sum
        let mut brute = 0.0;
        for j in 0..2 {
            brute += z.p[j] * z2.x[j] - z2.p[j] * z.x[j];
        }
        assert_eq!(brute, -1.0);
        assert_eq!(symplectic_form(&z, &z2).unwrap(), brute);
    }

    #[test]
    fn sigma_dimension_mismatch() {
        let z = PhasePoint::scalar(1.0, 0.0);
        let z2 = PhasePoint::zeros(2);
        assert!(matches!(
            symplectic_form(&z, &z2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn phase_point_validation() {
        assert!(PhasePoint::try_new(vec![], vec![]).is_err());
        assert!(PhasePoint::try_new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PhasePoint::try_new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn symplectic_examples() {
        assert!(is_symplectic(&DMatrix::identity(2, 2), 1e-12).unwrap());
        assert!(is_symplectic(&j_matrix(1), 1e-12).unwrap());
        assert!(!is_symplectic(&m2(2.0, 0.0, 0.0, 1.0), 1e-9).unwrap());
        assert!(is_symplectic(&m2(2.0, 0.0, 0.0, 0.5), 1e-12).unwrap());
        assert!(matches!(
            is_symplectic(&DMatrix::identity(3, 3), 1e-9),
            Err(Error::OddDimension { .. })
        ));
        assert!(is_symplectic(&DMatrix::zeros(2, 3), 1e-9).is_err());
    }

    #[test]
    fn map_blocks_and_inverse() {
        let s = SymplecticMap::new(m2(2.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(s.a()[(0, 0)], 2.0);
        assert_eq!(s.b()[(0, 0)], 1.0);
        assert_eq!(s.c()[(0, 0)], 1.0);
        assert_eq!(s.d()[(0, 0)], 1.0);
        let id = s.compose(&s.inverse());
        assert!((id.matrix() - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!(SymplecticMap::new(m2(2.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn quadratic_flow_of_oscillator_is_rotation() {
        let q = DMatrix::identity(2, 2);
        let t = 0.7;
        let s = SymplecticMap::quadratic_flow(&q, t).unwrap();
        // x_t = x cos t + p sin t, p_t = −x sin t + p cos t
        let expected = m2(t.cos(), t.sin(), -t.sin(), t.cos());
        assert!((s.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn lagrangian_plane_examples() {
        let m = m2(1.0, 2.0, 2.0, -3.0);
        let minus_i = -DMatrix::<f64>::identity(2, 2);
        assert!(is_lagrangian_plane(&m, &minus_i, 1e-12).unwrap());
        assert!(is_lagrangian_plane(&DMatrix::identity(2, 2), &DMatrix::zeros(2, 2), 1e-12).unwrap());

        let a = m2(0.0, 1.0, 0.0, 0.0);
        assert!(!is_lagrangian_plane(&a, &minus_i, 1e-12).unwrap());
        // the direct test agrees: σ does not vanish on the kernel
        assert!(kernel_sigma_defect(&a, &minus_i).unwrap() > 0.1);
        assert!(kernel_sigma_defect(&m, &minus_i).unwrap() < 1e-12);
        // this pair satisfies AᵀB = BAᵀ, yet it is not Lagrangian
        let atb = a.transpose() * &minus_i;
        let bat = &minus_i * a.transpose();
        assert_eq!(atb, bat);
    }

    #[test]
    fn rank_deficient_equations_are_rejected() {
        let a = m2(1.0, 0.0, 1.0, 0.0);
        let b = DMatrix::zeros(2, 2);
        assert!(!is_lagrangian_plane(&a, &b, 1e-12).unwrap());
        assert!(is_lagrangian_plane(&a, &DMatrix::zeros(3, 3), 1e-12).is_err());
    }

    #[test]
    fn plane_point_lies_on_plane() {
        let plane = LagrangianPlane::graph(m2(1.0, 0.5, 0.5, 2.0)).unwrap();
        let z = plane.point(&DVector::from_vec(vec![0.3, -1.2]));
        assert!(plane.contains(&z, 1e-14));
        assert!(LagrangianPlane::graph(m2(1.0, 0.5, 0.0, 2.0)).is_err());
    }

    #[test]
    fn generating_function_examples() {
        let xs = DVector::from_vec(vec![0.7]);
        let x = DVector::from_vec(vec![-1.3]);
        let j = SymplecticMap::standard_j(1);
        assert_abs_diff_eq!(
            free_generating_function(&j, &xs, &x).unwrap(),
            -0.7 * -1.3,
            epsilon = 1e-15
        );

        let shear = SymplecticMap::new(m2(1.0, 1.0, 0.0, 1.0)).unwrap();
        let w = free_generating_function(&shear, &xs, &x).unwrap();
        assert_abs_diff_eq!(w, 0.5 * 0.49 - 0.7 * -1.3 + 0.5 * 1.69, epsilon = 1e-15);

        // homogeneity of degree two
        let w2 = free_generating_function(&shear, &(&xs * 2.0), &(&x * 2.0)).unwrap();
        assert_abs_diff_eq!(w2, 4.0 * w, epsilon = 1e-14);

        let id = SymplecticMap::identity(1);
        assert!(matches!(
            free_generating_function(&id, &xs, &x),
            Err(Error::FreeConditionViolated { .. })
        ));
    }

    #[test]
    fn generating_function_gradients_for_unequal_diagonal_blocks() {
        // A ≠ D distinguishes the placement of B⁻¹A and DB⁻¹
        let s = SymplecticMap::new(m2(2.0, 1.0, 1.0, 1.0)).unwrap();
        let z = PhasePoint::scalar(0.4, -0.9);
        let zs = s.apply(&z);
        let h = 1e-5;
        let w = |a: f64, b: f64| {
            free_generating_function(&s, &DVector::from_vec(vec![a]), &DVector::from_vec(vec![b]))
                .unwrap()
        };
        let dws = (w(zs.x[0] + h, z.x[0]) - w(zs.x[0] - h, z.x[0])) / (2.0 * h);
        let dwx = (w(zs.x[0], z.x[0] + h) - w(zs.x[0], z.x[0] - h)) / (2.0 * h);
        assert_abs_diff_eq!(dws, zs.p[0], epsilon = 1e-8);
        assert_abs_diff_eq!(dwx, -z.p[0], epsilon = 1e-8);
    }

    #[test]
    fn frame_shift_examples() {
        let z = PhasePoint::scalar(0.3, 0.8);
        assert_eq!(frame_phase_shift(&SymplecticMap::identity(1), &z).unwrap(), 0.0);

        let j = SymplecticMap::standard_j(1);
        let e_x = PhasePoint::scalar(1.0, 0.0);
        let js = j.apply(&e_x);
        assert_eq!((js.x[0], js.p[0]), (0.0, -1.0));
        assert_eq!(frame_phase_shift(&j, &e_x).unwrap(), 0.0);
        let w = free_generating_function(&j, &js.x, &e_x.x).unwrap();
        assert_eq!(w, 0.0);

        let shear = SymplecticMap::new(m2(1.0, 1.0, 0.0, 1.0)).unwrap();
        let e_p = PhasePoint::scalar(0.0, 1.0);
        assert_eq!(frame_phase_shift(&shear, &e_p).unwrap(), 0.5);
        let w = free_generating_function(&shear, &DVector::from_vec(vec![1.0]), &e_p.x).unwrap();
        assert_eq!(w, 0.5);
    }
}
