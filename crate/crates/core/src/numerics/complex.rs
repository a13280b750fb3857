pub use num_complex::Complex64 as Complex;

/// `e^{iθ}`.
#[inline]
pub fn unit_complex(theta: f64) -> Complex {
    Complex::new(theta.cos(), theta.sin())
}

/// Integer power of a complex number, negative exponents included.
///
/// Unit-modulus inputs take the conjugate for negative powers instead of a
/// division, which keeps `λ^{-k} λ^{k}` within a few ulps of one.
pub fn cpow(z: Complex, k: i64) -> Complex {
    let base = if k < 0 {
        if (z.norm_sqr() - 1.0).abs() < 1e-12 {
            z.conj()
        } else {
            z.inv()
        }
    } else {
        z
    };
    let mut e = k.unsigned_abs();
    let mut acc = Complex::new(1.0, 0.0);
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

/// Hermitian product `⟨a|b⟩ = Σ a_i conj(b_i)`.
#[inline]
pub fn hdot(a: &[Complex], b: &[Complex]) -> Complex {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(Complex::new(0.0, 0.0), |acc, (x, y)| acc + x * y.conj())
}
