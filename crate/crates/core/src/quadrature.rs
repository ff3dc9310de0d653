//! Gauss-Hermite quadrature against the Gaussian weight.

use std::f64::consts::PI;

/// Nodes and weights for `∫ f(x) e^{-x²} dx`, computed by Newton iteration on
/// the physicists' Hermite polynomials.
pub fn gauss_hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal recursion for H_j / sqrt(2^j j! sqrt(pi))
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Nodes and probability weights for expectations under N(0, variance).
pub fn gaussian_expectation_rule(n: usize, variance: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_hermite_physicists(n);
    let scale = (2.0 * variance).sqrt();
    let norm = PI.sqrt();
    (
        x.iter().map(|v| v * scale).collect(),
        w.iter().map(|v| v / norm).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let var = 0.01;
        let (x, w) = gaussian_expectation_rule(12, var);
        let moment = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-13);
        assert!(moment(1).abs() < 1e-15);
        assert!((moment(2) - var).abs() < 1e-15);
        assert!((moment(4) - 3.0 * var * var).abs() < 1e-16);
        assert!((moment(8) - 105.0 * var.powi(4)).abs() < 1e-20);
    }

    #[test]
    fn odd_and_even_node_counts() {
        for n in [1, 2, 5, 20, 41] {
            let (x, w) = gauss_hermite_physicists(n);
            let total: f64 = w.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "n = {n}");
            assert!(x.windows(2).all(|p| p[0] > p[1]));
        }
    }
}
