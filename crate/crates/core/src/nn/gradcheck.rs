//! Central finite-difference gradient checking for code built on [`Tape`].

use crate::error::Result;
use crate::nn::{ParamStore, Tape, Var};

/// Worst disagreement between analytic and numeric gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Entries whose analytic and numeric gradients are both below this magnitude
/// are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the tape gradient of `loss_fn` against central differences with
/// step `h` for every entry of every parameter in `store`.
pub fn check_gradients<F>(store: &mut ParamStore<f64>, h: f64, loss_fn: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    store.clear_grads();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    tape.backward(loss, store)?;

    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let analytic = store.get(&name).and_then(|t| t.grad()).unwrap_or_default().to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let orig = store.get(&name).expect("listed").values()[i];
            store.get_mut(&name).expect("listed").values_mut()[i] = orig + h;
            let plus = eval(store)?;
            store.get_mut(&name).expect("listed").values_mut()[i] = orig - h;
            let minus = eval(store)?;
            store.get_mut(&name).expect("listed").values_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report = GradCheckReport {
                    max_rel_error: err.max(report.max_rel_error),
                    worst_param: name.clone(),
                    worst_index: i,
                    analytic: a,
                    numeric,
                    checked: report.checked,
                };
            }
        }
    }
    Ok(report)
}
