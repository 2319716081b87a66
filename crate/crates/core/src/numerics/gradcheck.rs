use super::{NumericsError, Tape, Tensor, Var};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences.
///
/// `f` rebuilds the computation on a fresh tape from leaf handles bound to
/// `params`. For each parameter tensor at most `max_coords` coordinates are
/// probed (all of them when the tensor is small enough, otherwise an evenly
/// strided subset). Returns the maximum of
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// `f` must be deterministic; a stochastic `f` gives meaningless results and
/// is not detected.
pub fn finite_diff_check<F, E>(
    mut f: F,
    params: &[Tensor],
    h: f64,
    max_coords: usize,
) -> Result<f64, E>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<NumericsError>,
{
    if !(h > 0.0) {
        return Err(NumericsError::Config(format!("step h must be positive, got {h}")).into());
    }
    let analytic = {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, params, true)?;
        let loss = f(&mut tape, &vars)?;
        tape.backward(loss)?;
        vars.iter()
            .zip(params)
            .map(|(&v, p)| {
                tape.grad(v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; p.len()])
            })
            .collect::<Vec<_>>()
    };

    let mut eval = |perturbed: &[Tensor]| -> Result<f64, E> {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, perturbed, false)?;
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut worst: f64 = 0.0;
    for pi in 0..params.len() {
        for idx in probe_indices(params[pi].len(), max_coords) {
            let orig = params[pi].values()[idx];
            work[pi].values_mut()[idx] = orig + h;
            let up = eval(&work)?;
            work[pi].values_mut()[idx] = orig - h;
            let down = eval(&work)?;
            work[pi].values_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn bind(tape: &mut Tape, params: &[Tensor], grad: bool) -> Result<Vec<Var>, NumericsError> {
    params
        .iter()
        .map(|p| {
            let mut t = p.clone();
            t.zero_grad();
            t.set_requires_grad(grad);
            tape.leaf(t)
        })
        .collect()
}

fn probe_indices(len: usize, max_coords: usize) -> Vec<usize> {
    if len <= max_coords {
        return (0..len).collect();
    }
    let stride = len as f64 / max_coords as f64;
    (0..max_coords)
        .map(|i| ((i as f64 + 0.5) * stride) as usize)
        .collect()
}
