use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::fft::{inverse_real, NdFft};
use crate::fields::{lp_norm, Grid, ScalarField, VectorField};

/// Random trigonometric polynomial with modes |k_a| <= kmax and amplitudes
/// decaying like (1 + |k|^2)^(-decay/2). Defined in physical coordinates with the
/// box length of each axis as period, so refinements sample the same function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub decay: f64,
    pub kmax: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(decay: f64, seed: u64) -> SynthSpec {
        SynthSpec { decay, kmax: 4, seed }
    }

    /// Unit-L2 sample on `grid`.
    pub fn sample(&self, grid: &Grid) -> ScalarField {
        let n = grid.ndim();
        let shape = grid.shape();
        let kmax = shape.iter().map(|&s| s / 2 - 1).fold(self.kmax, usize::min) as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        let strides = grid.strides();
        let side = 2 * kmax + 1;
        let total = (side as usize).pow(n as u32);
        for m in 0..total {
            let mut k = [0i64; 3];
            let mut rem = m;
            for a in (0..n).rev() {
                k[a] = (rem % side as usize) as i64 - kmax;
                rem /= side as usize;
            }
            match k[..n].iter().find(|&&v| v != 0) {
                Some(&v) if v > 0 => {}
                _ => continue,
            }
            let k2: f64 = k[..n].iter().map(|&v| (v * v) as f64).sum();
            let amp = (1.0 + k2).powf(-0.5 * self.decay) * rng.gen::<f64>();
            let phase = 2.0 * PI * rng.gen::<f64>();
            let shift: f64 = (0..n).map(|a| 2.0 * PI * k[a] as f64 * grid.origin()[a] / grid.period(a)).sum();
            let c = Complex64::from_polar(amp, phase + shift);
            let (mut pos, mut neg) = (0usize, 0usize);
            for a in 0..n {
                let s = shape[a] as i64;
                pos += k[a].rem_euclid(s) as usize * strides[a];
                neg += (-k[a]).rem_euclid(s) as usize * strides[a];
            }
            spec[pos] += c;
            spec[neg] += c.conj();
        }
        let fft = NdFft::new(shape);
        let values = inverse_real(&fft, &spec);
        let u = ScalarField::new(grid.clone(), values).expect("finite synthesis");
        let norm = lp_norm(&u, 2.0, None).expect("p = 2");
        u.scaled(1.0 / norm)
    }
}

/// Deterministic band-limited unit-L2 field.
pub fn synth_field(grid: &Grid, decay: f64, seed: u64) -> ScalarField {
    SynthSpec::new(decay, seed).sample(grid)
}

/// Vector field whose components are independent synthetic fields; unit L2 overall.
pub fn synth_vector_field(grid: &Grid, decay: f64, seed: u64) -> VectorField {
    let comps: Vec<ScalarField> = (0..grid.ndim())
        .map(|c| synth_field(grid, decay, seed.wrapping_mul(0x9E37_79B9).wrapping_add(c as u64 + 1)))
        .collect();
    let f = VectorField::from_components(comps).expect("shared grid");
    let norm = lp_norm(&f, 2.0, None).expect("p = 2");
    f.scaled(1.0 / norm)
}
