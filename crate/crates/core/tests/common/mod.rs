#![allow(dead_code)]

use mumimo::capacity::{LinkBudget, MuUser};
use mumimo::linalg::CMatrix;
use mumimo::precoding::{fed_back_steering, SteeringMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    })
}

/// Haar-like random `rows x cols` matrix with orthonormal columns, from the
/// QR factorization of a Gaussian matrix.
pub fn semi_unitary<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let q = gaussian_matrix(rng, rows, cols).qr().q();
    q.columns(0, cols).into_owned()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub struct Instance {
    pub channels: Vec<Vec<CMatrix>>,
    pub steering: Vec<SteeringMatrix>,
    pub pathloss: Vec<f64>,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, k_users: usize, n_ss: usize) -> Self {
        let mut channels = Vec::new();
        let mut steering = Vec::new();
        let mut pathloss = Vec::new();
        for _ in 0..k_users {
            let n_rx = rng.random_range(n_ss..=2);
            let h = vec![gaussian_matrix(rng, n_rx, 8)];
            steering.push(fed_back_steering(&h, n_ss, Some((7, 5))).unwrap());
            channels.push(h);
            pathloss.push(rng.random_range(91.0..121.0));
        }
        Self { channels, steering, pathloss }
    }

    pub fn users(&self) -> Vec<MuUser<'_>> {
        (0..self.channels.len())
            .map(|k| MuUser {
                channel: &self.channels[k],
                steering: &self.steering[k],
                pathloss_db: self.pathloss[k],
            })
            .collect()
    }
}

/// Capacity from the explicit MMSE filter `u = Q^-1 g` and its output SINR.
pub fn mmse_capacity(inst: &Instance, k: usize, budget: &LinkBudget) -> f64 {
    let k_users = inst.channels.len() as f64;
    let rho = budget.snr(inst.pathloss[k]) / k_users;
    let h = &inst.channels[k][0];
    let n_rx = h.nrows();
    let mut q = CMatrix::identity(n_rx, n_rx);
    for (j, v) in inst.steering.iter().enumerate() {
        if j != k {
            let g = h * &v.tones[0];
            q += &g * g.adjoint() * Complex64::new(rho, 0.0);
        }
    }
    let g = h * inst.steering[k].tones[0].column(0);
    let u = q.clone().lu().solve(&g).expect("noise keeps Q invertible");
    let sinr = rho * g.dotc(&u).re;
    budget.bandwidth_hz * (1.0 + sinr).log2()
}
