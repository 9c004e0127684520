use super::{Graph, ParamStore, TensorError, Var};

/// Outcome of comparing reverse-mode gradients to central differences.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// max over all parameter entries of `|analytic - numeric| / max(1, |numeric|)`
    pub max_rel_error: f64,
    /// parameter name and flat index where the maximum occurred
    pub worst: Option<(String, usize)>,
    pub entries: usize,
}

/// Checks the gradient of the scalar built by `f` against central finite
/// differences with step `h`, entry by entry over every parameter.
pub fn grad_check<F>(f: F, params: &ParamStore, h: f64) -> Result<GradCheck, TensorError>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var, TensorError>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(TensorError::Shape { op: "grad_check", detail: format!("step must be positive, got {h}") });
    }
    let eval = |store: &ParamStore| -> Result<f64, TensorError> {
        let mut g = Graph::new();
        let out = f(&mut g, store)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    let analytic = g.backward(loss, params)?;
    drop(g);

    let mut probe = params.clone();
    let mut report = GradCheck { max_rel_error: 0.0, worst: None, entries: 0 };
    for (name, value) in params.iter() {
        let grad = analytic.get(name).expect("gradient for every parameter");
        for i in 0..value.len() {
            let orig = value.data()[i];
            let at = |probe: &mut ParamStore, x: f64| -> Result<f64, TensorError> {
                probe.get_mut(name).expect("cloned store").data_mut()[i] = x;
                eval(probe).map_err(|e| TensorError::GradCheck {
                    param: name.to_string(),
                    index: i,
                    source: Box::new(e),
                })
            };
            let plus = at(&mut probe, orig + h)?;
            let minus = at(&mut probe, orig - h)?;
            probe.get_mut(name).expect("cloned store").data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = (grad.data()[i] - numeric).abs() / numeric.abs().max(1.0);
            report.entries += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.to_string(), i));
            }
        }
    }
    Ok(report)
}
