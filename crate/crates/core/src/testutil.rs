//! Helpers shared by the unit tests: random instances and independent
//! reference computations.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::loss::{self, loss_grad, Dataset, Family};
use crate::penalty::PenaltySpec;

pub fn random_data(family: Family, n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.7..1.7));
    let y = Array1::from_shape_fn(n, |i| {
        let signal = 1.2 * x[[i, 0]] - 0.8 * x[[i, 1 % p]];
        match family {
            Family::Gaussian => signal + rng.random_range(-0.5..0.5),
            Family::Binomial => (rng.random::<f64>() < loss::logistic(signal)) as u8 as f64,
        }
    });
    Dataset::new(x, y).unwrap()
}

pub fn soft_threshold(x: f64, c: f64) -> f64 {
    x.signum() * (x.abs() - c).max(0.0)
}

/// Distance of zero from the subdifferential of `Q_λ`, maximized over
/// coordinates, computed directly from the loss gradient.
pub fn kkt_residual(family: Family, pen: &PenaltySpec, data: &Dataset, alpha: f64, beta: &Array1<f64>) -> f64 {
    let g = loss_grad(family, data, beta);
    let w = data.pen_weights();
    (0..beta.len())
        .map(|j| {
            let b = beta[j];
            if b != 0.0 {
                (g[j] + alpha * w[j] * b.signum() * pen.grad(b.abs()) + 2.0 * (1.0 - alpha) * pen.lambda() * w[j] * b)
                    .abs()
            } else {
                (g[j].abs() - alpha * w[j] * pen.kappa()).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let k = rhs.len();
    for c in 0..k {
        let piv = (c..k)
            .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap())
            .unwrap();
        m.swap(c, piv);
        rhs.swap(c, piv);
        for r in c + 1..k {
            let f = m[r][c] / m[c][c];
            for cc in c..k {
                m[r][cc] -= f * m[c][cc];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut out = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|cc| m[r][cc] * out[cc]).sum();
        out[r] = (rhs[r] - s) / m[r][r];
    }
    out
}

/// Proximal gradient with fixed step `1/Lipschitz` for
/// `L(β) + λ Σ w_j |β_j|`, run to a tight fixed point.
pub fn prox_grad_lasso(family: Family, data: &Dataset, lambda: f64) -> Array1<f64> {
    let p = data.p();
    let n = data.n() as f64;
    let d = data.obs_weights();
    let frob: f64 = data
        .x()
        .rows()
        .into_iter()
        .zip(d)
        .map(|(r, d)| d * r.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / n;
    let lip = match family {
        Family::Gaussian => frob,
        Family::Binomial => 0.25 * frob,
    };
    let step = 1.0 / lip;
    let w = data.pen_weights().clone();
    let mut beta = Array1::zeros(p);
    for _ in 0..500_000 {
        let g = loss_grad(family, data, &beta);
        let next = Array1::from_shape_fn(p, |j| soft_threshold(beta[j] - step * g[j], step * lambda * w[j]));
        let diff = (&next - &beta).iter().map(|d| d.abs()).fold(0.0, f64::max);
        beta = next;
        if diff < 1e-14 {
            break;
        }
    }
    beta
}
