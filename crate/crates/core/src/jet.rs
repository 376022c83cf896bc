//! Truncated power series in one variable.
//!
//! A `Jet` of length `t` stores `c_k = g^(k)(xi) / k!` for `k < t`, so the
//! elementary operations below yield exact Taylor coefficients (up to
//! rounding) of compositions such as `exp(-sqrt(u))` at any centre.

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    /// The identity `u -> xi + delta` truncated to `len` terms.
    pub fn variable(xi: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        if len > 0 {
            c[0] = xi;
        }
        if len > 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn constant(v: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        if len > 0 {
            c[0] = v;
        }
        Jet { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        Jet { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.c
    }

    pub fn scale(mut self, a: f64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= a);
        self
    }

    pub fn add(&self, other: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&other.c).map(|(a, b)| a + b).collect() }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let n = self.len().min(other.len());
        let mut c = vec![0.0; n];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = (0..=k).map(|j| self.c[j] * other.c[k - j]).sum();
        }
        Jet { c }
    }

    pub fn exp(&self) -> Jet {
        let n = self.len();
        let mut b = vec![0.0; n];
        if n == 0 {
            return Jet { c: b };
        }
        b[0] = self.c[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * self.c[j] * b[k - j]).sum();
            b[k] = s / k as f64;
        }
        Jet { c: b }
    }

    /// Square root; the constant term must be positive when `len > 1`.
    pub fn sqrt(&self) -> Jet {
        let n = self.len();
        let mut b = vec![0.0; n];
        if n == 0 {
            return Jet { c: b };
        }
        b[0] = self.c[0].sqrt();
        for k in 1..n {
            let s: f64 = (1..k).map(|j| b[j] * b[k - j]).sum();
            b[k] = (self.c[k] - s) / (2.0 * b[0]);
        }
        Jet { c: b }
    }

    /// `(sinh, cosh)` of the series.
    pub fn sinh_cosh(&self) -> (Jet, Jet) {
        let e = self.exp();
        let em = self.clone().scale(-1.0).exp();
        let sinh = Jet { c: e.c.iter().zip(&em.c).map(|(a, b)| 0.5 * (a - b)).collect() };
        let cosh = Jet { c: e.c.iter().zip(&em.c).map(|(a, b)| 0.5 * (a + b)).collect() };
        (sinh, cosh)
    }

    /// `k`-th derivative at the centre, `k! c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }

    /// Evaluate the truncated polynomial at offset `delta`.
    pub fn eval(&self, delta: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &v| acc * delta + v)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn exp_of_affine_matches_closed_form() {
        // exp(2u - 2) at u = 0.3.
        let j = Jet::variable(0.3, 6).scale(2.0).add(&Jet::constant(-2.0, 6)).exp();
        for k in 0..6 {
            let expect = 2f64.powi(k as i32) * (2.0 * 0.3 - 2.0f64).exp();
            assert!(close(j.derivative(k), expect, 1e-13));
        }
    }

    #[test]
    fn exp_neg_sqrt_matches_finite_differences() {
        let f = |u: f64| (-u.sqrt()).exp();
        let xi = 0.7;
        let j = Jet::variable(xi, 4).sqrt().scale(-1.0).exp();
        let h = 1e-3;
        let d1 = (f(xi + h) - f(xi - h)) / (2.0 * h);
        let d2 = (f(xi + h) - 2.0 * f(xi) + f(xi - h)) / (h * h);
        assert!(close(j.derivative(0), f(xi), 1e-14));
        assert!(close(j.derivative(1), d1, 1e-6));
        assert!(close(j.derivative(2), d2, 1e-5));
    }

    #[test]
    fn sinh_has_alternating_derivatives() {
        let (s, c) = Jet::variable(0.0, 6).sinh_cosh();
        for k in 0..6 {
            let sk = if k % 2 == 0 { 0.0 } else { 1.0 };
            assert!(close(s.derivative(k), sk, 1e-15));
            assert!(close(c.derivative(k), 1.0 - sk, 1e-15));
        }
    }

    #[test]
    fn mul_and_eval() {
        let a = Jet::from_coeffs(vec![1.0, 2.0, 0.0]);
        let b = Jet::from_coeffs(vec![3.0, 0.0, 1.0]);
        let p = a.mul(&b);
        assert_eq!(p.coeffs(), &[3.0, 6.0, 1.0]);
        assert_eq!(p.eval(2.0), 3.0 + 12.0 + 4.0);
    }
}
