use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on `sum |a_i|^2 - 1`.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Dense amplitudes over the basis `0..N` (action-sequence ranks).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Uniform superposition `|u>`.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "empty state space");
        let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        Self { amps: vec![a; n] }
    }

    pub fn basis(n: usize, index: usize) -> Self {
        assert!(index < n, "basis index out of range");
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let s = Self { amps };
        let norm = s.norm_sqr();
        if s.amps.is_empty() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// Total probability on indices where `marked` is true.
    pub fn mass_where(&self, marked: impl Fn(usize) -> bool) -> f64 {
        self.amps.iter().enumerate().filter(|(i, _)| marked(*i)).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Multiplies each amplitude by `phase(i)`.
    pub fn apply_diagonal(&mut self, phase: impl Fn(usize) -> f64) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= phase(i);
        }
    }

    /// Reflection about the uniform state: `2|u><u|psi> - |psi>`.
    pub fn reflect_about_uniform(&mut self) {
        let n = self.amps.len() as f64;
        let mean = self.amps.iter().sum::<Complex64>() / n;
        for a in self.amps.iter_mut() {
            *a = 2.0 * mean - *a;
        }
    }

    /// Computational-basis measurement (non-destructive sampling).
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x = rng.gen::<f64>() * self.norm_sqr();
        let mut acc = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr();
            if x < acc {
                return i;
            }
        }
        // x landed in the rounding slack at the top; take the last
        // index with support
        self.amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_is_fixed_by_reflection() {
        let u = StateVector::uniform(16);
        let mut v = u.clone();
        v.reflect_about_uniform();
        assert!(u.distance(&v) < 1e-12);
    }

    #[test]
    fn reflection_is_an_involution() {
        let amps: Vec<_> = (0..8).map(|i| Complex64::new(i as f64, (i * i) as f64 - 3.0)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap();
        let mut t = s.clone();
        t.reflect_about_uniform();
        assert!(t.is_normalized());
        t.reflect_about_uniform();
        assert!(s.distance(&t) < 1e-12);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(StateVector::from_amplitudes(vec![Complex64::new(1.0, 1.0)]).is_err());
        assert!(StateVector::from_amplitudes(vec![]).is_err());
    }

    #[test]
    fn measuring_basis_state_is_certain() {
        let s = StateVector::basis(8, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| s.measure(&mut rng) == 5));
    }
}
