//! Multi-dimensional FFT built from rustfft line transforms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

pub struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(shape: &[usize]) -> NdFft {
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        NdFft { shape: shape.to_vec(), forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        for a in 0..self.shape.len() {
            self.axis(data, a, &self.forward[a]);
        }
    }

    /// Inverse transform including the 1/N normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for a in 0..self.shape.len() {
            self.axis(data, a, &self.inverse[a]);
        }
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn forward_axis(&self, data: &mut [Complex64], a: usize) {
        self.axis(data, a, &self.forward[a]);
    }

    pub fn inverse_axis(&self, data: &mut [Complex64], a: usize) {
        self.axis(data, a, &self.inverse[a]);
        let s = 1.0 / self.shape[a] as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn axis(&self, data: &mut [Complex64], a: usize, plan: &Arc<dyn Fft<f64>>) {
        let n = self.shape[a];
        let inner: usize = self.shape[a + 1..].iter().product();
        let outer: usize = self.shape[..a].iter().product();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        if inner == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n * inner];
        for o in 0..outer {
            let base = o * n * inner;
            for k in 0..n {
                let row = &data[base + k * inner..base + (k + 1) * inner];
                for (j, v) in row.iter().enumerate() {
                    buf[j * n + k] = *v;
                }
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n {
                let row = &mut data[base + k * inner..base + (k + 1) * inner];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = buf[j * n + k];
                }
            }
        }
    }
}

/// Real transform: half spectrum (`m / 2 + 1` bins) along the last axis, full along the others.
pub struct RealNdFft {
    shape: Vec<usize>,
    half: Vec<usize>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    rest: NdFft,
}

impl RealNdFft {
    pub fn new(shape: &[usize]) -> RealNdFft {
        let last = *shape.last().expect("at least one axis");
        let mut planner = RealFftPlanner::new();
        let mut half = shape.to_vec();
        *half.last_mut().expect("axis") = last / 2 + 1;
        RealNdFft {
            shape: shape.to_vec(),
            r2c: planner.plan_fft_forward(last),
            c2r: planner.plan_fft_inverse(last),
            rest: NdFft::new(&half),
            half,
        }
    }

    pub fn half_shape(&self) -> &[usize] {
        &self.half
    }

    pub fn forward(&self, v: &[f64]) -> Vec<Complex64> {
        let m = *self.shape.last().expect("axis");
        let mh = m / 2 + 1;
        let rows = v.len() / m;
        let mut out = vec![Complex64::new(0.0, 0.0); rows * mh];
        let mut row = vec![0.0; m];
        let mut scratch = self.r2c.make_scratch_vec();
        for (r, dst) in out.chunks_mut(mh).enumerate() {
            row.copy_from_slice(&v[r * m..(r + 1) * m]);
            self.r2c.process_with_scratch(&mut row, dst, &mut scratch).expect("matching lengths");
        }
        for a in 0..self.shape.len() - 1 {
            self.rest.forward_axis(&mut out, a);
        }
        out
    }

    /// Inverse including the normalisation; consumes the spectrum as scratch.
    pub fn inverse(&self, spec: &mut [Complex64]) -> Vec<f64> {
        let m = *self.shape.last().expect("axis");
        let mh = m / 2 + 1;
        for a in 0..self.shape.len() - 1 {
            self.rest.axis(spec, a, &self.rest.inverse[a]);
        }
        let mut out = vec![0.0; spec.len() / mh * m];
        let mut scratch = self.c2r.make_scratch_vec();
        let s = 1.0 / self.shape.iter().product::<usize>() as f64;
        for (src, dst) in spec.chunks_mut(mh).zip(out.chunks_mut(m)) {
            src[0].im = 0.0;
            if m % 2 == 0 {
                src[mh - 1].im = 0.0;
            }
            self.c2r.process_with_scratch(src, dst, &mut scratch).expect("matching lengths");
            for v in dst.iter_mut() {
                *v *= s;
            }
        }
        out
    }
}

/// Signed integer frequency of DFT index `m` on `n` samples.
pub fn frequency(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Angular wavenumber of index `m` for an axis of length `period`.
pub fn wavenumber(m: usize, n: usize, period: f64) -> f64 {
    2.0 * PI * frequency(m, n) as f64 / period
}

pub fn is_nyquist(m: usize, n: usize) -> bool {
    n % 2 == 0 && m == n / 2
}

pub fn to_complex(re: &[f64], im: Option<&[f64]>) -> Vec<Complex64> {
    match im {
        Some(im) => re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        None => re.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
    }
}

/// Index of the mirrored frequency `-k` for a flat index on the given shape.
pub fn mirror_index(shape: &[usize], flat: usize) -> usize {
    let mut rem = flat;
    let mut out = 0;
    let mut stride = 1;
    for &m in shape.iter().rev() {
        let i = rem % m;
        rem /= m;
        out += (m - i) % m * stride;
        stride *= m;
    }
    out
}

/// `mirror_index` for every flat index.
pub fn mirror_table(shape: &[usize]) -> Vec<usize> {
    let mut table = vec![0usize];
    let mut stride = 1;
    for &m in shape.iter().rev() {
        let prev = table;
        table = Vec::with_capacity(prev.len() * m);
        for i in 0..m {
            let off = (m - i) % m * stride;
            table.extend(prev.iter().map(|&t| t + off));
        }
        stride *= m;
    }
    table
}

/// Transforms two real arrays with a single complex FFT and separates the spectra.
pub fn forward_real_pair(fft: &NdFft, shape: &[usize], a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut z = to_complex(a, Some(b));
    fft.forward(&mut z);
    let n = z.len();
    let mirror = mirror_table(shape);
    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let zm = z[mirror[k]].conj();
        fa[k] = (z[k] + zm) * 0.5;
        fb[k] = (z[k] - zm) * Complex64::new(0.0, -0.5);
    }
    (fa, fb)
}

/// Inverse of two Hermitian spectra with a single complex FFT.
pub fn inverse_real_pair(fft: &NdFft, fa: &[Complex64], fb: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut z: Vec<Complex64> = fa.iter().zip(fb).map(|(&x, &y)| x + Complex64::new(0.0, 1.0) * y).collect();
    fft.inverse(&mut z);
    (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
}

pub fn forward_real(fft: &NdFft, a: &[f64]) -> Vec<Complex64> {
    let mut z = to_complex(a, None);
    fft.forward(&mut z);
    z
}

pub fn inverse_real(fft: &NdFft, fa: &[Complex64]) -> Vec<f64> {
    let mut z = fa.to_vec();
    fft.inverse(&mut z);
    z.iter().map(|c| c.re).collect()
}
