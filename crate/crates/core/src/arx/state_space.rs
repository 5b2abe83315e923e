use nalgebra::{DMatrix, DVector};

use super::ArxModel;

/// Discrete realization `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Observable companion form. The first state is the output; row `j` of
/// `A` carries `-a_{j+1}` in its first column and a shifted identity.
pub fn to_state_space(model: &ArxModel) -> StateSpace {
    let n = model.order;
    let m = model.input_count();
    let a = DMatrix::from_fn(n, n, |r, c| {
        if c == 0 {
            -model.a[r]
        } else if c == r + 1 {
            1.0
        } else {
            0.0
        }
    });
    let b = DMatrix::from_fn(n, m, |r, c| model.b[c][r]);
    let mut cm = DMatrix::zeros(1, n);
    cm[(0, 0)] = 1.0;
    StateSpace {
        a,
        b,
        c: cm,
        d: DMatrix::zeros(1, m),
    }
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Response from a zero initial state; `inputs[i][t]` is input `i` at step `t`.
    pub fn simulate(&self, inputs: &[&[f64]], steps: usize) -> Vec<f64> {
        let mut x = DVector::zeros(self.order());
        let mut u = DVector::zeros(self.b.ncols());
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            for (i, s) in inputs.iter().enumerate() {
                u[i] = s[t];
            }
            out.push((&self.c * &x + &self.d * &u)[0]);
            x = &self.a * &x + &self.b * &u;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::simulate_free_run;
    use super::*;

    #[test]
    fn first_order_single_input() {
        let mut m = ArxModel::zeros(1, vec!["u".into()], "y", 60.0);
        m.a[0] = -0.8;
        m.b[0][0] = 0.5;
        let ss = to_state_space(&m);
        assert_eq!(ss.a[(0, 0)], 0.8);
        let u = vec![1.0; 20];
        let a = ss.simulate(&[&u], 20);
        // free run seeded with y_0 = 0, inputs aligned from t = 0
        let b = simulate_free_run(&m, &[0.0], &[&u], 19).unwrap();
        for (x, y) in a[1..].iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_model_has_zero_response() {
        let m = ArxModel::zeros(3, vec!["u".into(), "v".into()], "y", 60.0);
        let ss = to_state_space(&m);
        let u = vec![1.0; 30];
        assert!(ss.simulate(&[&u, &u], 30).iter().all(|v| *v == 0.0));
    }
}
