use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

/// Incremental SHA-256 over the exact bit patterns of numeric inputs.
#[derive(Clone)]
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new(tag: &str) -> Self {
        let mut f = Fingerprint(Sha256::new());
        f.str(tag);
        f
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.0.update(s.as_bytes());
        self
    }

    pub fn u64(&mut self, x: u64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub fn f64(&mut self, x: f64) -> &mut Self {
        self.0.update(x.to_bits().to_le_bytes());
        self
    }

    pub fn f64s(&mut self, xs: &[f64]) -> &mut Self {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.f64(x);
        }
        self
    }

    pub fn matrix(&mut self, m: &DMatrix<Complex64>) -> &mut Self {
        self.u64(m.nrows() as u64).u64(m.ncols() as u64);
        for z in m.iter() {
            self.f64(z.re).f64(z.im);
        }
        self
    }

    pub fn finish(&self) -> String {
        hex::encode(self.0.clone().finalize())
    }
}
