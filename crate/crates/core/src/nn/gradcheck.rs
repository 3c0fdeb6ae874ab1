//! Central finite-difference gradient checking.
//!
//! Callers run one analytic forward/backward to fill the gradient buffers,
//! then hand the model and a pure scalar-loss closure to `grad_check`. Every
//! parameter coordinate is perturbed by +-step and the analytic gradient is
//! compared against (L+ - L-) / 2h. Inputs participate by wrapping them as
//! pseudo-parameters via [`WithInputs`].

use crate::scalar::Real;

use super::{Param, Parameterized};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst: String,
    pub coords_checked: usize,
}

fn nudge<T: Real, M: Parameterized<T>>(model: &mut M, target: &str, idx: usize, delta: T) {
    model.visit_params(&mut |name, p| {
        if name == target {
            let v = p.value.data_mut();
            v[idx] = v[idx] + delta;
        }
    });
}

/// Relative error with a small-magnitude guard: coordinates where both the
/// analytic and numeric gradients are below 1e-7 count as exact.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub fn grad_check<T: Real, M: Parameterized<T>>(
    model: &mut M,
    mut loss: impl FnMut(&mut M) -> T,
    step: T,
) -> GradCheckReport {
    let mut entries: Vec<(String, Vec<T>)> = Vec::new();
    model.visit_params(&mut |name, p| {
        entries.push((name.to_string(), p.grad.data().to_vec()));
    });
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: String::new(),
        coords_checked: 0,
    };
    let two = T::of(2.0);
    for (name, analytic) in &entries {
        for (idx, &a) in analytic.iter().enumerate() {
            nudge(model, name, idx, step);
            let lp = loss(model);
            nudge(model, name, idx, -(two * step));
            let lm = loss(model);
            nudge(model, name, idx, step);
            let fd = (lp - lm) / (two * step);
            let err = rel_err(a.as_f64(), fd.as_f64());
            report.coords_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = format!("{name}[{idx}]");
            }
        }
    }
    report
}

/// Wraps a model together with named input buffers so `grad_check` covers
/// input gradients uniformly. The caller stores the analytic input gradient
/// into the wrapped `Param` before checking.
pub struct WithInputs<T, M> {
    pub inner: M,
    pub inputs: Vec<(String, Param<T>)>,
}

impl<T: Real, M: Parameterized<T>> WithInputs<T, M> {
    pub fn new(inner: M, inputs: Vec<(String, Param<T>)>) -> Self {
        WithInputs { inner, inputs }
    }

    pub fn input(&self, i: usize) -> &crate::matrix::Matrix<T> {
        &self.inputs[i].1.value
    }
}

impl<T: Real, M: Parameterized<T>> Parameterized<T> for WithInputs<T, M> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (name, p) in &mut self.inputs {
            f(name, p);
        }
        self.inner.visit_params(f);
    }
}
