use crate::domain::{KernelParams, LengthScale};

/// `exp(-d^2 / (2 l^2))`, identically one for an inactive length-scale.
pub fn se_factor(l: LengthScale, d: f64) -> f64 {
    match l {
        LengthScale::Active(l) => (-d * d / (2.0 * l * l)).exp(),
        LengthScale::Inactive => 1.0,
    }
}

/// Linear plus squared-exponential kernel on `(x, u)`.
pub fn kernel_eval(params: &KernelParams, p: (f64, f64), q: (f64, f64)) -> f64 {
    let exponent = |l: LengthScale, d: f64| match l {
        LengthScale::Active(l) => -d * d / (2.0 * l * l),
        LengthScale::Inactive => 0.0,
    };
    params.alpha_x * p.0 * q.0
        + params.alpha_u * p.1 * q.1
        + (exponent(params.l_x, p.0 - q.0) + exponent(params.l_u, p.1 - q.1)).exp()
}
