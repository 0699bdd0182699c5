//! Numerically stable scalar kernels shared by the tree and cavity code.

/// `log cosh x` without overflow.
#[inline]
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Cavity message `atanh(tanh(beta) tanh(h))`.
///
/// Uses `atanh(tanh a tanh b) = (log cosh(a+b) - log cosh(a-b)) / 2`, which is
/// exact for all magnitudes; `h = +inf` (a pinned spin) yields `beta`.
#[inline]
pub fn edge_message(beta: f64, h: f64) -> f64 {
    if h == f64::INFINITY {
        return beta;
    }
    if h == f64::NEG_INFINITY {
        return -beta;
    }
    0.5 * (ln_cosh(beta + h) - ln_cosh(beta - h))
}

/// `log(1 + tanh(a) tanh(b))`, stable when the product is close to -1.
#[inline]
pub fn ln_one_plus_tanh_product(a: f64, b: f64) -> f64 {
    // 1 + tanh a tanh b = cosh(a+b) / (cosh a cosh b)
    ln_cosh(a + b) - ln_cosh(a) - ln_cosh(b)
}

/// `log(e^x + e^y)`.
#[inline]
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// `<σ1 σ2>` for two spins with coupling `beta` and fields `h1`, `h2`.
#[inline]
pub fn two_spin_correlation(beta: f64, h1: f64, h2: f64) -> f64 {
    let (tb, t1, t2) = (beta.tanh(), h1.tanh(), h2.tanh());
    (tb + t1 * t2) / (1.0 + tb * t1 * t2)
}
