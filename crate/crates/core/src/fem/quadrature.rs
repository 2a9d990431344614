//! Quadrature on the reference triangle (barycentric points, weights summing
//! to one) and on the unit interval.

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Radon's 7-point rule, exact to degree 5.
    pub fn radon7() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        let points = vec![
            [third, third, third],
            [b1, a1, a1],
            [a1, b1, a1],
            [a1, a1, b1],
            [b2, a2, a2],
            [a2, b2, a2],
            [a2, a2, b2],
        ];
        let weights = vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2];
        Self { points, weights, degree: 5 }
    }

    /// Gauss-Legendre squared and collapsed onto the triangle; exact to degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = x[i];
                let v = x[j] * (1.0 - u);
                points.push([1.0 - u - v, u, v]);
                weights.push(2.0 * w[i] * w[j] * (1.0 - u));
            }
        }
        Self { points, weights, degree: 2 * n - 2 }
    }

    /// The cheapest built-in rule exact to at least `degree`.
    pub fn of_degree(degree: usize) -> Self {
        if degree <= 5 {
            Self::radon7()
        } else {
            Self::collapsed_gauss((degree + 3) / 2)
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = 0.5 * (1.0 - z);
        ws[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (xs, ws)
}
