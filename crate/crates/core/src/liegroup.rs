//! Dense matrix kernel for `K = SL(d)` with the factorization `K = K+ K-`:
//! `K+` lower triangular with positive diagonal, `K-` unit upper triangular.
//! Algebra duals are identified with matrices through `<x, y> = tr(xy)`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{lit, Real};

/// Which subalgebra an element is tagged with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// All of `sl(d)`.
    Full,
    /// Traceless lower triangular matrices, the algebra of `K+`.
    Plus,
    /// Strictly upper triangular matrices, the algebra of `K-`.
    Minus,
}

impl Part {
    pub fn admits<T: Real>(self, x: &Matrix<T>) -> bool {
        let d = x.rows();
        (0..d).all(|i| {
            (0..d).all(|j| match self {
                Part::Full => true,
                Part::Plus => j <= i || x[(i, j)] == T::zero(),
                Part::Minus => j > i || x[(i, j)] == T::zero(),
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement<T> {
    matrix: Matrix<T>,
    part: Part,
}

impl<T: Real> AlgebraElement<T> {
    pub fn new(matrix: Matrix<T>, part: Part) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("algebra elements are square matrices".into()));
        }
        if !part.admits(&matrix) {
            return Err(Error::Precondition(format!("matrix does not have the {part:?} pattern")));
        }
        Ok(Self { matrix, part })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn part(&self) -> Part {
        self.part
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupPart {
    Full,
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T> {
    matrix: Matrix<T>,
    part: GroupPart,
}

impl<T: Real> GroupElement<T> {
    pub fn new(matrix: Matrix<T>, part: GroupPart) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("group elements are square matrices".into()));
        }
        let d = matrix.rows();
        let ok = match part {
            GroupPart::Full => (matrix.determinant() - T::one()).abs() <= lit(1e-10),
            GroupPart::Plus => Part::Plus.admits(&matrix) && (0..d).all(|i| matrix[(i, i)] > T::zero()),
            GroupPart::Minus => Part::Minus.admits(&strict(&matrix)) && (0..d).all(|i| matrix[(i, i)] == T::one()),
        };
        if !ok {
            return Err(Error::Precondition(format!("matrix is not in the {part:?} group")));
        }
        Ok(Self { matrix, part })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn part(&self) -> GroupPart {
        self.part
    }
}

fn strict<T: Real>(g: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(g.rows(), g.cols(), |i, j| if i == j { T::zero() } else { g[(i, j)] })
}

/// Lower triangular part including the diagonal.
pub fn project_plus<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| if j <= i { x[(i, j)] } else { T::zero() })
}

/// Strictly upper triangular part.
pub fn project_minus<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| if j > i { x[(i, j)] } else { T::zero() })
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn mat_exp<T: Real>(x: &Matrix<T>) -> Result<Matrix<T>> {
    if !x.is_finite() {
        return Err(Error::non_finite("mat_exp argument"));
    }
    let n = x.rows();
    let norm = x.norm1();
    let s = if norm > T::zero() { (norm.log2().ceil() + lit(3.0)).max(T::zero()).to_i32().unwrap_or(0) } else { 0 };
    let a = x.scale(lit::<T>(2.0).powi(-s));
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = (&term * &a).scale(T::one() / lit(k as f64));
        sum = &sum + &term;
        if term.max_abs() <= T::epsilon() * lit(1e-3) * sum.max_abs() {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(Error::non_finite(format!("mat_exp overflow (norm {norm})")))
    }
}

pub fn bracket<T: Real>(x: &Matrix<T>, y: &Matrix<T>) -> Matrix<T> {
    &(x * y) - &(y * x)
}

/// `Ad_g x = g x g^{-1}`.
pub fn adjoint<T: Real>(g: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    let gi = g.inverse()?;
    Ok(&(g * x) * &gi)
}

/// `Ad_{g^{-1}} x = g^{-1} x g`.
pub fn adjoint_inv<T: Real>(g: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    let gi = g.inverse()?;
    Ok(&(&gi * x) * g)
}

/// `Ad*_g lambda`, the matrix `lambda'` with `<lambda', y> = <lambda, Ad_g y>`.
pub fn coadjoint<T: Real>(g: &Matrix<T>, lambda: &Matrix<T>) -> Result<Matrix<T>> {
    adjoint_inv(g, lambda)
}

/// Trace form `<x, y> = tr(xy)`.
pub fn pairing<T: Real>(x: &Matrix<T>, y: &Matrix<T>) -> T {
    let n = x.rows();
    let mut s = T::zero();
    for i in 0..n {
        s += x[(i, i)] * y[(i, i)];
        for k in i + 1..n {
            // Both orders give the same terms, so the form is exactly symmetric.
            s += x[(i, k)] * y[(k, i)] + x[(k, i)] * y[(i, k)];
        }
    }
    s
}

/// `g = g+ g-` with `g+` lower triangular (positive diagonal) and `g-` unit
/// upper triangular, by Crout elimination without pivoting.
pub fn factorize<T: Real>(g: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    if !g.is_square() {
        return Err(Error::Dimension("factorize needs a square matrix".into()));
    }
    let n = g.rows();
    let mut lo = Matrix::zeros(n, n);
    let mut up = Matrix::identity(n);
    for j in 0..n {
        for i in j..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= lo[(i, k)] * up[(k, j)];
            }
            lo[(i, j)] = s;
        }
        let pivot = lo[(j, j)];
        if !(pivot > T::zero()) {
            return Err(Error::FactorizationOutsideBigCell { index: j, value: pivot.to_f64().unwrap_or(f64::NAN) });
        }
        for i in j + 1..n {
            let mut s = g[(j, i)];
            for k in 0..j {
                s -= lo[(j, k)] * up[(k, i)];
            }
            up[(j, i)] = s / pivot;
        }
    }
    Ok((lo, up))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Generator {
    /// Elementary matrix `E_ij`, `i != j`.
    Root(usize, usize),
    /// `H_k = E_kk - E_{k+1,k+1}`.
    Cartan(usize),
}

/// Basis of `sl(d)` or one of its triangular subalgebras. The full basis
/// lists the `Plus` elements first, then the `Minus` ones.
#[derive(Debug, Clone)]
pub struct AlgebraBasis<T> {
    d: usize,
    part: Part,
    generators: Vec<Generator>,
    elements: Vec<Matrix<T>>,
}

impl<T: Real> AlgebraBasis<T> {
    pub fn new(d: usize, part: Part) -> Self {
        let mut generators = Vec::new();
        if part != Part::Minus {
            for i in 0..d {
                for j in 0..i {
                    generators.push(Generator::Root(i, j));
                }
            }
            for k in 0..d.saturating_sub(1) {
                generators.push(Generator::Cartan(k));
            }
        }
        if part != Part::Plus {
            for i in 0..d {
                for j in i + 1..d {
                    generators.push(Generator::Root(i, j));
                }
            }
        }
        let elements = generators
            .iter()
            .map(|g| {
                let mut m = Matrix::zeros(d, d);
                match *g {
                    Generator::Root(i, j) => m[(i, j)] = T::one(),
                    Generator::Cartan(k) => {
                        m[(k, k)] = T::one();
                        m[(k + 1, k + 1)] = -T::one();
                    }
                }
                m
            })
            .collect();
        Self { d, part, generators, elements }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn part(&self) -> Part {
        self.part
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, a: usize) -> &Matrix<T> {
        &self.elements[a]
    }

    pub fn elements(&self) -> &[Matrix<T>] {
        &self.elements
    }

    pub fn combine(&self, c: &[T]) -> Matrix<T> {
        let mut m = Matrix::zeros(self.d, self.d);
        for (g, ci) in self.generators.iter().zip(c) {
            match *g {
                Generator::Root(i, j) => m[(i, j)] += *ci,
                Generator::Cartan(k) => {
                    m[(k, k)] += *ci;
                    m[(k + 1, k + 1)] -= *ci;
                }
            }
        }
        m
    }

    /// Coordinates of `x`; entries outside the subalgebra and the trace are
    /// ignored.
    pub fn coords(&self, x: &Matrix<T>) -> Vec<T> {
        self.generators
            .iter()
            .map(|g| match *g {
                Generator::Root(i, j) => x[(i, j)],
                Generator::Cartan(k) => (0..=k).fold(T::zero(), |s, i| s + x[(i, i)]),
            })
            .collect()
    }

    /// Values `lambda(E_a) = <lambda, E_a>` of a dual element on the basis.
    pub fn dual_coords(&self, lambda: &Matrix<T>) -> Vec<T> {
        self.elements.iter().map(|e| pairing(lambda, e)).collect()
    }

    /// Gram matrix of the trace form on the basis.
    pub fn gram(&self) -> Matrix<T> {
        let n = self.dim();
        Matrix::from_fn(n, n, |a, b| pairing(&self.elements[a], &self.elements[b]))
    }
}

/// Right-trivialized differential of `exp`:
/// `d/ds exp(X + sY) exp(-X) = sum_k ad_X^k Y / (k+1)!`.
pub fn dexp<T: Real>(x: &Matrix<T>, y: &Matrix<T>) -> Matrix<T> {
    let mut term = y.clone();
    let mut sum = y.clone();
    for k in 1..=40 {
        term = bracket(x, &term).scale(T::one() / lit((k + 1) as f64));
        sum = &sum + &term;
        if term.max_abs() <= T::epsilon() * lit(1e-3) * (sum.max_abs() + T::min_positive_value()) {
            break;
        }
    }
    sum
}

/// `d/de dexp_{X + e dX}(Y)` at `e = 0`, summed with the product rule.
pub fn dexp_derivative<T: Real>(x: &Matrix<T>, dx: &Matrix<T>, y: &Matrix<T>) -> Matrix<T> {
    // term_k = ad_X^k Y / (k+1)!, dterm_k its derivative in the X direction dX.
    let mut term = y.clone();
    let mut dterm = Matrix::zeros(y.rows(), y.cols());
    let mut sum = Matrix::zeros(y.rows(), y.cols());
    for k in 1..=40 {
        let c = T::one() / lit((k + 1) as f64);
        dterm = (&bracket(dx, &term) + &bracket(x, &dterm)).scale(c);
        term = bracket(x, &term).scale(c);
        sum = &sum + &dterm;
        let small = |m: &Matrix<T>| m.max_abs() <= T::epsilon() * lit(1e-3) * (sum.max_abs() + T::min_positive_value());
        if small(&dterm) && small(&term) {
            break;
        }
    }
    sum
}

/// Matrix of `ad_X` in the coordinates of `basis`.
pub fn ad_matrix<T: Real>(basis: &AlgebraBasis<T>, x: &Matrix<T>) -> Matrix<T> {
    let cols: Vec<Vec<T>> = basis.elements().iter().map(|e| basis.coords(&bracket(x, e))).collect();
    Matrix::from_columns(&cols)
}

/// Matrix of `dexp_X` in the coordinates of `basis`, `X = combine(x)`.
pub fn dexp_matrix<T: Real>(basis: &AlgebraBasis<T>, x: &[T]) -> Matrix<T> {
    let ad = ad_matrix(basis, &basis.combine(x));
    let n = basis.dim();
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..=40 {
        term = (&ad * &term).scale(T::one() / lit((k + 1) as f64));
        sum = &sum + &term;
        if term.max_abs() <= T::epsilon() * lit(1e-3) * (sum.max_abs() + T::min_positive_value()) {
            break;
        }
    }
    sum
}
