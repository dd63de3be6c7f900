use crate::hashgrid::SparseGrad;
use crate::numeric::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one dense parameter block.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    /// Per-step constants: `(beta1, beta2, lr / (1 - beta1^t), 1 / (1 - beta2^t), eps)`.
    fn coefficients(hp: &AdamParams, lr: f64, step: u64) -> [T; 5] {
        let c1 = 1.0 - hp.beta1.powi(step as i32);
        let c2 = 1.0 - hp.beta2.powi(step as i32);
        [
            T::of(hp.beta1),
            T::of(hp.beta2),
            T::of(lr / c1),
            T::of(1.0 / c2),
            T::of(hp.eps),
        ]
    }

    #[inline]
    fn update_one(&mut self, i: usize, p: &mut T, g: T, k: &[T; 5]) {
        let [b1, b2, lr_c1, inv_c2, eps] = *k;
        self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
        self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
        *p = *p - lr_c1 * self.m[i] / ((self.v[i] * inv_c2).sqrt() + eps);
    }

    /// One Adam step; `step` counts from 1.
    pub fn step(&mut self, params: &mut [T], grads: &[T], hp: &AdamParams, lr: f64, step: u64) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        let k = Self::coefficients(hp, lr, step);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            self.update_one(i, p, g, &k);
        }
    }

    /// Lazy Adam over table rows: only rows present in `grad` have their
    /// moments and values updated.
    pub fn step_sparse(
        &mut self,
        tables: &mut [T],
        grad: &SparseGrad<T>,
        hp: &AdamParams,
        lr: f64,
        step: u64,
    ) {
        let f = grad.features;
        let k = Self::coefficients(hp, lr, step);
        for (r, &row) in grad.rows.iter().enumerate() {
            let base = row as usize * f;
            for j in 0..f {
                let g = grad.values[r * f + j];
                self.update_one(base + j, &mut tables[base + j], g, &k);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::<f64>::new(2);
        let mut p = vec![1.0, -1.0];
        s.step(&mut p, &[0.5, -2.0], &AdamParams::default(), 0.1, 1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut s = AdamState::<f64>::new(1);
        let mut p = vec![3.0];
        for t in 1..=2000 {
            let g = [2.0 * (p[0] - 1.0)];
            s.step(&mut p, &g, &AdamParams::default(), 0.05, t);
        }
        assert!((p[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn sparse_step_leaves_untouched_rows() {
        let mut s = AdamState::<f32>::new(6);
        let mut t = vec![0.0f32; 6];
        let g = SparseGrad {
            features: 2,
            rows: vec![1],
            values: vec![1.0, -1.0],
        };
        s.step_sparse(&mut t, &g, &AdamParams::default(), 0.01, 1);
        assert_eq!(&t[0..2], &[0.0, 0.0]);
        assert_eq!(&t[4..6], &[0.0, 0.0]);
        assert!(t[2] < 0.0 && t[3] > 0.0);
    }
}
