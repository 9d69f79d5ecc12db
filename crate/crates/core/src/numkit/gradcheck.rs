//! Central finite differences against tape gradients.

use super::{Matrix, NumError, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter index, flat coordinate) of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

/// Loss value and gradients for every parameter, via one backward pass.
pub fn analytic_gradient<F, E>(f: &F, params: &[Matrix]) -> Result<(f64, Vec<Matrix>), E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<NumError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let value = tape.value(loss).item()?;
    tape.backward(loss)?;
    let grads = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))
        })
        .collect();
    Ok((value, grads))
}

fn eval<F, E>(f: &F, params: &[Matrix]) -> Result<f64, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<NumError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    Ok(tape.value(loss).item()?)
}

/// `(f(p + h e_k) - f(p - h e_k)) / 2h` for every coordinate.
pub fn numeric_gradient<F, E>(f: &F, params: &[Matrix], h: f64) -> Result<Vec<Matrix>, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<NumError>,
{
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut g = Matrix::zeros(params[i].rows(), params[i].cols());
        for k in 0..params[i].len() {
            let orig = params[i].as_slice()[k];
            work[i].as_mut_slice()[k] = orig + h;
            let plus = eval(f, &work)?;
            work[i].as_mut_slice()[k] = orig - h;
            let minus = eval(f, &work)?;
            work[i].as_mut_slice()[k] = orig;
            g.as_mut_slice()[k] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Largest `|a - n| / max(1, |a|, |n|)` over all coordinates.
pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        for (k, (&x, &y)) in a.as_slice().iter().zip(n.as_slice()).enumerate() {
            let rel = (x - y).abs() / 1f64.max(x.abs()).max(y.abs());
            report.coordinates += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((i, k));
            }
        }
    }
    report
}

/// Compares backward gradients of `f` with central differences of step `h`.
pub fn grad_check<F, E>(f: F, params: &[Matrix], h: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<NumError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, analytic) = analytic_gradient(&f, params)?;
    let numeric = numeric_gradient(&f, params, h)?;
    Ok(max_relative_error(&analytic, &numeric))
}
