use super::{ParamSet, Tape, Tensor, TensorError, Var};

/// Outcome of comparing tape gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// max over coordinates of `|analytic - numeric| / max(1, |analytic|)`
    pub max_rel_error: f64,
    /// Coordinate where the maximum was attained.
    pub worst_index: Option<usize>,
    /// First coordinate whose analytic or numeric value was not finite.
    pub non_finite: Option<usize>,
    pub coords_checked: usize,
}

impl GradCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.non_finite.is_none() && self.max_rel_error < tolerance
    }

    fn fold(&mut self, index: usize, analytic: f64, numeric: f64) {
        self.coords_checked += 1;
        if !analytic.is_finite() || !numeric.is_finite() {
            self.non_finite.get_or_insert(index);
            return;
        }
        let err = (analytic - numeric).abs() / analytic.abs().max(1.0);
        if err > self.max_rel_error || self.worst_index.is_none() {
            self.max_rel_error = self.max_rel_error.max(err);
            self.worst_index = Some(index);
        }
    }

    fn empty() -> Self {
        GradCheck {
            max_rel_error: 0.0,
            worst_index: None,
            non_finite: None,
            coords_checked: 0,
        }
    }
}

/// Checks the gradient of a scalar function of one tensor.
///
/// `f` must be deterministic; it is evaluated once on a recording tape and
/// twice per coordinate on value-only tapes.
pub fn grad_check<F>(f: F, theta: &Tensor, h: f64) -> Result<GradCheck, TensorError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(theta.clone());
    let loss = f(&mut tape, x)?;
    let analytic = tape.backward(loss)?.wrt(x);

    let eval = |t: Tensor| -> Result<f64, TensorError> {
        let mut tape = Tape::inference();
        let x = tape.leaf(t);
        let y = f(&mut tape, x)?;
        Ok(tape.scalar(y))
    };
    let mut report = GradCheck::empty();
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = theta.clone();
        plus.data_mut()[i] += h;
        let mut minus = theta.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        report.fold(i, a, numeric);
    }
    Ok(report)
}

/// Per-parameter-block result of [`grad_check_params`].
#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub name: String,
    pub check: GradCheck,
}

/// Gradient check across every tensor of a parameter set.
///
/// `f` receives the bound parameter handles (aligned with `params`) and
/// returns the scalar loss. With `max_coords = Some(n)`, at most `n` evenly
/// spaced coordinates are checked in each block.
pub fn grad_check_params<F>(
    params: &ParamSet,
    f: F,
    h: f64,
    max_coords: Option<usize>,
) -> Result<Vec<BlockCheck>, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars = tape.bind(params);
    let loss = f(&mut tape, &vars)?;
    let analytic = tape.backward(loss)?.for_params(params);

    let eval = |p: &ParamSet| -> Result<f64, TensorError> {
        let mut tape = Tape::inference();
        let vars = tape.bind(p);
        let y = f(&mut tape, &vars)?;
        Ok(tape.scalar(y))
    };

    let mut out = Vec::with_capacity(params.len());
    let mut work = params.clone();
    for b in 0..params.len() {
        let len = params.get(b).len();
        let coords: Vec<usize> = match max_coords {
            Some(n) if n < len => (0..n).map(|i| i * len / n).collect(),
            _ => (0..len).collect(),
        };
        let mut report = GradCheck::empty();
        for i in coords {
            let original = work.get(b).data()[i];
            work.get_mut(b).data_mut()[i] = original + h;
            let up = eval(&work)?;
            work.get_mut(b).data_mut()[i] = original - h;
            let down = eval(&work)?;
            work.get_mut(b).data_mut()[i] = original;
            report.fold(i, analytic.get(b)[i], (up - down) / (2.0 * h));
        }
        out.push(BlockCheck {
            name: params.name(b).to_string(),
            check: report,
        });
    }
    Ok(out)
}
