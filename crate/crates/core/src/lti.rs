//! Dense linear time-invariant systems.
//!
//! [`StateSpace`] is the carrier for every linear block in a reset loop:
//! the pre-filter `K`, the base-linear reset element, the linear controller
//! `C`, the plant `P` and all derived interconnections. Everything here is
//! a pure function of its inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest 1-norm condition estimate accepted before a matrix is treated
/// as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Real state-space realization `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, expected square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, A has {}", b.nrows(), n)));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, A has {}", c.ncols(), n)));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Static SISO gain without states.
    pub fn gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, k),
        }
    }

    /// Identity map of width `m`.
    pub fn identity(m: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(m, 0),
            d: DMatrix::identity(m, m),
        }
    }

    /// Controllable canonical realization of `num(s)/den(s)`.
    ///
    /// Coefficients are listed highest power first. The transfer function
    /// must be proper.
    pub fn from_tf(num: &[f64], den: &[f64]) -> Result<Self> {
        let den = strip_leading_zeros(den);
        let num = strip_leading_zeros(num);
        if den.is_empty() {
            return Err(Error::InvalidParameter("denominator is identically zero".into()));
        }
        if num.iter().chain(den.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transfer function coefficients"));
        }
        let n = den.len() - 1;
        if num.len() > den.len() {
            return Err(Error::InvalidParameter(format!(
                "improper transfer function: numerator degree {} exceeds denominator degree {}",
                num.len().saturating_sub(1),
                n
            )));
        }
        let lead = den[0];
        let a_coef: Vec<f64> = den.iter().map(|v| v / lead).collect();
        let mut b_coef = vec![0.0; n + 1 - num.len()];
        b_coef.extend(num.iter().map(|v| v / lead));

        let d0 = b_coef[0];
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        if n > 0 {
            for j in 0..n {
                a[(n - 1, j)] = -a_coef[n - j];
            }
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(n - 1, 0)] = 1.0;
        }
        let mut c = DMatrix::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = b_coef[n - j] - d0 * a_coef[n - j];
        }
        let d = DMatrix::from_element(1, 1, d0);
        Self::new(a, b, c, d)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.inputs() == 1 && self.outputs() == 1
    }

    /// Feedthrough of a SISO system.
    pub fn feedthrough(&self) -> f64 {
        self.d[(0, 0)]
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|v| *v == 0.0)
    }

    /// Same dynamics with the output (and feedthrough) multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * k,
            d: &self.d * k,
        }
    }

    /// Complex frequency response `C (jωI - A)⁻¹ B + D`.
    pub fn freq_response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.order();
        let d = self.d.map(|v| Complex64::new(v, 0.0));
        if n == 0 {
            return Ok(d);
        }
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let c = self.c.map(|v| Complex64::new(v, 0.0));
        let x = resolvent_solve(&self.a, omega, &b, "resolvent jωI - A")?;
        Ok(c * x + d)
    }

    /// Scalar frequency response of a SISO system.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        if !self.is_siso() {
            return Err(Error::Dimension(format!(
                "eval needs a SISO system, got {}x{}",
                self.outputs(),
                self.inputs()
            )));
        }
        Ok(self.freq_response(omega)?[(0, 0)])
    }

    pub fn poles(&self) -> Vec<Complex64> {
        if self.order() == 0 {
            return Vec::new();
        }
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    /// All poles strictly in the open left half plane.
    pub fn is_hurwitz(&self) -> bool {
        is_hurwitz(&self.a)
    }

    /// Impulse-response kernel `C e^{At} B` (excludes the Dirac part from `D`).
    pub fn impulse_kernel(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(&self.c * expm(&self.a, t)? * &self.b)
    }
}

fn strip_leading_zeros(p: &[f64]) -> Vec<f64> {
    let first = p.iter().position(|v| *v != 0.0).unwrap_or(p.len());
    p[first..].to_vec()
}

pub(crate) fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    a.clone().complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

/// Spectral abscissa (largest real part among eigenvalues).
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral radius.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Matrix exponential `e^{A t}` (scaling and squaring with Padé approximants).
pub fn expm(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("expm needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("expm argument"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    Ok((a * t).exp())
}

fn norm1<T: nalgebra::ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Row and column scalings `(r, c)` that bring every row and column of
/// `diag(r) m diag(c)` to unit max-magnitude. `None` if a row or column is zero.
fn equilibrate<T: nalgebra::ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Option<(Vec<f64>, Vec<f64>)> {
    let (nr, nc) = m.shape();
    let mut r = vec![0.0; nr];
    for i in 0..nr {
        let big = (0..nc).map(|j| m[(i, j)].clone().abs()).fold(0.0, f64::max);
        if !(big > 0.0) || !big.is_finite() {
            return None;
        }
        r[i] = 1.0 / big;
    }
    let mut c = vec![0.0; nc];
    for j in 0..nc {
        let big = (0..nr).map(|i| m[(i, j)].clone().abs() * r[i]).fold(0.0, f64::max);
        if !(big > 0.0) {
            return None;
        }
        c[j] = 1.0 / big;
    }
    Some((r, c))
}

/// Inverse of a square matrix, rejecting it when the 1-norm condition
/// estimate of the equilibrated matrix exceeds [`CONDITION_LIMIT`].
fn guarded_inverse<T: nalgebra::ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    what: &'static str,
    omega: f64,
) -> Result<DMatrix<T>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!("{what}: {}x{} is not square", n, m.ncols())));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let singular = Error::Singular {
        what,
        omega,
        condition: f64::INFINITY,
    };
    let (r, c) = equilibrate(m).ok_or(singular)?;
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)].clone() * T::from_real(r[i] * c[j]));
    let inv = scaled.clone().lu().try_inverse().ok_or(Error::Singular {
        what,
        omega,
        condition: f64::INFINITY,
    })?;
    let condition = norm1(&scaled) * norm1(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::Singular { what, omega, condition });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| inv[(i, j)].clone() * T::from_real(c[i] * r[j])))
}

/// Inverse of a real matrix, rejecting it when the 1-norm condition
/// estimate (after row and column equilibration) exceeds [`CONDITION_LIMIT`].
pub fn checked_inverse(m: &DMatrix<f64>, what: &'static str, omega: f64) -> Result<DMatrix<f64>> {
    guarded_inverse(m, what, omega)
}

/// Complex counterpart of [`checked_inverse`].
pub fn checked_inverse_c(m: &DMatrix<Complex64>, what: &'static str, omega: f64) -> Result<DMatrix<Complex64>> {
    guarded_inverse(m, what, omega)
}

pub(crate) fn resolvent_solve(
    a: &DMatrix<f64>,
    omega: f64,
    rhs: &DMatrix<Complex64>,
    what: &'static str,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut m = a.map(|v| Complex64::new(-v, 0.0));
    for i in 0..n {
        m[(i, i)] += Complex64::new(0.0, omega);
    }
    Ok(checked_inverse_c(&m, what, omega)? * rhs)
}

/// Realization of `b ∘ a`: the output of `a` drives the input of `b`.
pub fn series(a: &StateSpace, b: &StateSpace) -> Result<StateSpace> {
    if a.outputs() != b.inputs() {
        return Err(Error::Dimension(format!(
            "series: first block has {} outputs, second block has {} inputs",
            a.outputs(),
            b.inputs()
        )));
    }
    let (na, nb) = (a.order(), b.order());
    let n = na + nb;
    let mut am = DMatrix::zeros(n, n);
    am.view_mut((0, 0), (na, na)).copy_from(&a.a);
    am.view_mut((na, na), (nb, nb)).copy_from(&b.a);
    am.view_mut((na, 0), (nb, na)).copy_from(&(&b.b * &a.c));

    let mut bm = DMatrix::zeros(n, a.inputs());
    bm.view_mut((0, 0), (na, a.inputs())).copy_from(&a.b);
    bm.view_mut((na, 0), (nb, a.inputs())).copy_from(&(&b.b * &a.d));

    let mut cm = DMatrix::zeros(b.outputs(), n);
    cm.view_mut((0, 0), (b.outputs(), na)).copy_from(&(&b.d * &a.c));
    cm.view_mut((0, na), (b.outputs(), nb)).copy_from(&b.c);

    let dm = &b.d * &a.d;
    StateSpace::new(am, bm, cm, dm)
}

/// Sensitivity pair of the base-linear loop.
#[derive(Debug, Clone)]
pub struct Sensitivity {
    /// `S_L = (1 + G R_L K)⁻¹`
    pub s: StateSpace,
    /// `T_L = 1 - S_L`
    pub t: StateSpace,
}

/// Sensitivity and complementary sensitivity of the loop `G R_L K` closed
/// with unity negative feedback.
pub fn linear_sensitivity(k: &StateSpace, r_l: &StateSpace, g: &StateSpace) -> Result<Sensitivity> {
    for (sys, name) in [(k, "K"), (r_l, "R_L"), (g, "G")] {
        if !sys.is_siso() {
            return Err(Error::Dimension(format!("{name} must be SISO")));
        }
    }
    let l = series(&series(k, r_l)?, g)?;
    let den = 1.0 + l.feedthrough();
    if den.abs() < 1e-12 {
        return Err(Error::AlgebraicLoop(format!(
            "1 + D_G D_R D_K = {den:e} is not invertible"
        )));
    }
    let a = &l.a - &l.b * &l.c / den;
    let b = &l.b / den;
    let cs = -&l.c / den;
    let s = StateSpace::new(a.clone(), b.clone(), cs.clone(), DMatrix::from_element(1, 1, 1.0 / den))?;
    let t = StateSpace::new(a, b, -cs, DMatrix::from_element(1, 1, 1.0 - 1.0 / den))?;
    Ok(Sensitivity { s, t })
}

/// Real parts of the resolvent products used by the reset-state formulas:
/// `Re{(jωI - A)⁻¹ j} = (ω²I + A²)⁻¹ ω` and `Re{(jωI - A)⁻¹} = -(ω²I + A²)⁻¹ A`.
pub fn real_resolvent_parts(a: &DMatrix<f64>, omega: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("real_resolvent_parts needs a square matrix".into()));
    }
    let lambda = DMatrix::identity(n, n) * (omega * omega) + a * a;
    let inv = checked_inverse(&lambda, "ω²I + A²", omega)?;
    let with_j = &inv * omega;
    let plain = -(&inv * a);
    Ok((with_j, plain))
}

/// `Σ_{k≥1} (-1)^k e^{A k h}`, the alternating exponential series that
/// collects the tails of a periodic train of sign-alternating impulses.
///
/// Terms are accumulated until the increment norm drops below `1e-12`
/// of the accumulated norm; at most `max_terms` pairs are added.
pub fn alternating_exp_sum(a: &DMatrix<f64>, h: f64, max_terms: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let e = expm(a, h)?;
    let mut acc = DMatrix::zeros(n, n);
    // pair k: e^{2kAh} - e^{(2k-1)Ah} = E^{2k-1} (E - I)
    let step = &e * &e;
    let mut odd_power = e.clone();
    let e_minus_i = &e - DMatrix::identity(n, n);
    let mut prev_norm = f64::INFINITY;
    let mut growing = 0usize;
    for _ in 0..max_terms {
        let term = &odd_power * &e_minus_i;
        let tn = term.norm();
        acc += &term;
        let an = acc.norm();
        if tn <= 1e-12 * an || tn == 0.0 {
            return Ok(acc);
        }
        if tn >= prev_norm {
            growing += 1;
            if growing > 50 {
                return Err(Error::Convergence(format!(
                    "alternating exponential series does not decay (term norm {tn:.3e})"
                )));
            }
        } else {
            growing = 0;
        }
        prev_norm = tn;
        odd_power = &odd_power * &step;
    }
    Err(Error::Convergence(format!(
        "alternating exponential series not converged after {max_terms} terms"
    )))
}

/// Closed form of [`alternating_exp_sum`]: `-E (I + E)⁻¹` with `E = e^{Ah}`.
pub fn alternating_exp_sum_closed(a: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let e = expm(a, h)?;
    let inv = checked_inverse(&(DMatrix::identity(n, n) + &e), "I + e^{Ah}", std::f64::consts::PI / h)?;
    Ok(-(e * inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn expm_zero_is_identity() {
        let a = DMatrix::zeros(2, 2);
        assert_eq!(expm(&a, 5.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn expm_diagonal() {
        let a = dmatrix![-1.0, 0.0; 0.0, -2.0];
        let e = expm(&a, 1.0).unwrap();
        assert_relative_eq!(e[(0, 0)], (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], (-2.0f64).exp(), max_relative = 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_nilpotent() {
        let a = dmatrix![0.0, 1.0; 0.0, 0.0];
        let e = expm(&a, 3.0).unwrap();
        assert_relative_eq!(e, dmatrix![1.0, 3.0; 0.0, 1.0], epsilon = 1e-14);
    }

    #[test]
    fn expm_rejects_non_square() {
        let a = DMatrix::zeros(2, 3);
        assert!(matches!(expm(&a, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn integrator_response() {
        let sys = StateSpace::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let h = sys.eval(1.0).unwrap();
        assert!(rel(h, Complex64::new(0.0, -1.0)) < 1e-15);
        assert!(matches!(sys.eval(0.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn from_tf_matches_rational_evaluation() {
        let num = [2.0, 3.0, 5.0];
        let den = [1.0, 4.0, 7.0, 11.0];
        let sys = StateSpace::from_tf(&num, &den).unwrap();
        for &w in &[0.1, 1.0, 3.3, 40.0] {
            let s = Complex64::new(0.0, w);
            let direct = (2.0 * s * s + 3.0 * s + 5.0) / (s * s * s + 4.0 * s * s + 7.0 * s + 11.0);
            assert!(rel(sys.eval(w).unwrap(), direct) < 1e-13);
        }
        // biproper with a non-monic denominator
        let sys = StateSpace::from_tf(&[3.0, 1.0], &[2.0, 4.0]).unwrap();
        let s = Complex64::new(0.0, 2.0);
        assert!(rel(sys.eval(2.0).unwrap(), (3.0 * s + 1.0) / (2.0 * s + 4.0)) < 1e-14);
        assert!(StateSpace::from_tf(&[1.0, 0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn series_of_gains() {
        let s = series(&StateSpace::gain(2.0), &StateSpace::gain(3.0)).unwrap();
        assert_eq!(s.order(), 0);
        assert_eq!(s.feedthrough(), 6.0);
        let x = StateSpace::from_tf(&[1.0], &[1.0, 2.0]).unwrap();
        let s = series(&StateSpace::identity(1), &x).unwrap();
        assert!(rel(s.eval(3.0).unwrap(), x.eval(3.0).unwrap()) < 1e-15);
    }

    #[test]
    fn series_dimension_mismatch() {
        let two = StateSpace::identity(2);
        assert!(matches!(series(&two, &StateSpace::gain(1.0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn sensitivity_special_cases() {
        let zero = StateSpace::gain(0.0);
        let one = StateSpace::gain(1.0);
        let s = linear_sensitivity(&one, &one, &zero).unwrap();
        assert!(rel(s.s.eval(2.0).unwrap(), Complex64::new(1.0, 0.0)) < 1e-15);
        let s = linear_sensitivity(&one, &one, &one).unwrap();
        assert!(rel(s.s.eval(2.0).unwrap(), Complex64::new(0.5, 0.0)) < 1e-15);
        let minus = StateSpace::gain(-1.0);
        assert!(matches!(
            linear_sensitivity(&one, &one, &minus),
            Err(Error::AlgebraicLoop(_))
        ));
    }

    #[test]
    fn resolvent_parts_scalar() {
        let (pj, p) = real_resolvent_parts(&DMatrix::from_element(1, 1, -1.0), 1.0).unwrap();
        assert_relative_eq!(pj[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-15);
        let (pj, p) = real_resolvent_parts(&DMatrix::zeros(2, 2), 2.0).unwrap();
        assert_relative_eq!(pj, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-15);
        assert_eq!(p, DMatrix::zeros(2, 2));
        // ω²I + A² singular: A = [[0, 1], [-1, 0]] at ω = 1
        let rot = dmatrix![0.0, 1.0; -1.0, 0.0];
        assert!(matches!(real_resolvent_parts(&rot, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn alternating_series_matches_closed_form() {
        let a = dmatrix![-3.0, 1.0; 0.5, -2.0];
        let h = 0.2;
        let s = alternating_exp_sum(&a, h, 100_000).unwrap();
        let c = alternating_exp_sum_closed(&a, h).unwrap();
        assert_relative_eq!(s, c, max_relative = 1e-10, epsilon = 1e-13);
        let unstable = dmatrix![0.5];
        assert!(matches!(
            alternating_exp_sum(&unstable, 1.0, 100_000),
            Err(Error::Convergence(_))
        ));
    }
}
