use super::{ParamStore, Real};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: ParamStore<T>,
    v: ParamStore<T>,
    t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ParamStore<T>, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>) {
        debug_assert!(params.same_layout(grads));
        self.t += 1;
        let b1 = T::from(self.beta1).unwrap();
        let b2 = T::from(self.beta2).unwrap();
        let one = T::one();
        let c1 = one / (one - T::from(self.beta1.powi(self.t as i32)).unwrap());
        let c2 = one / (one - T::from(self.beta2.powi(self.t as i32)).unwrap());
        let lr = T::from(self.lr).unwrap();
        let eps = T::from(self.eps).unwrap();
        for (((p, g), m), v) in params
            .data_mut()
            .iter_mut()
            .zip(grads.data())
            .zip(self.m.data_mut())
            .zip(self.v.data_mut())
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *p = *p - lr * (*m * c1) / ((*v * c2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = ParamStore::<f64>::empty();
        let id = p.push("w", vec![3]);
        p.tensor_mut(id).assign(&ndarray::array![1.0, -2.0, 0.5]);
        let mut g = p.zeros_like();
        g.tensor_mut(id).assign(&ndarray::array![0.3, -4.0, 0.0]);
        let mut opt = Adam::new(&p, 0.1);
        opt.step(&mut p, &g);
        let w = p.tensor(id);
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] + 1.9).abs() < 1e-6);
        assert_eq!(w[2], 0.5);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = ParamStore::<f64>::empty();
        let id = p.push("w", vec![2]);
        p.tensor_mut(id).assign(&ndarray::array![3.0, -5.0]);
        let mut opt = Adam::new(&p, 0.05);
        for _ in 0..2000 {
            let mut g = p.zeros_like();
            let w = p.tensor(id).to_owned();
            g.tensor_mut(id).assign(&(&w * 2.0));
            opt.step(&mut p, &g);
        }
        assert!(p.tensor(id).iter().all(|v| v.abs() < 1e-2));
    }
}
