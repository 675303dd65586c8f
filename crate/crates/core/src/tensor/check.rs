use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamStore, Scalar, TensorError, Var};

/// Below this magnitude the relative error is measured against the floor
/// instead, so that round-off on near-zero gradients is not amplified.
/// With a loss of order one and `eps = 1e-4`, central differences carry
/// about 1e-10 of absolute noise.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name, flat coordinate, analytic and numeric values at the
    /// worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub coordinates_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn eval<T: Scalar, E: From<TensorError>>(
    params: &ParamStore<T>,
    f: &mut impl FnMut(&mut Graph<T>) -> Result<Var, E>,
) -> Result<f64, E> {
    let mut g = Graph::new(params);
    let out = f(&mut g)?;
    let v = g.scalar(out).to_f64().unwrap_or(f64::NAN);
    if !v.is_finite() {
        return Err(TensorError::NonFinite("grad_check objective".into()).into());
    }
    Ok(v)
}

/// Compares reverse-mode gradients of `f` with central differences
/// `(f(θ+eps) - f(θ-eps)) / 2eps`.
///
/// At most `coords_per_param` coordinates of each parameter are checked,
/// sampled with `seed`; smaller parameters are checked exhaustively.
pub fn grad_check<T: Scalar, E: From<TensorError>>(
    params: &ParamStore<T>,
    mut f: impl FnMut(&mut Graph<T>) -> Result<Var, E>,
    eps: f64,
    coords_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport, E> {
    let analytic = {
        let mut g = Graph::new(params);
        let out = f(&mut g)?;
        let grads = g.backward(out)?;
        if !grads.is_finite() || !g.scalar(out).is_finite() {
            return Err(TensorError::NonFinite("grad_check gradient".into()).into());
        }
        grads
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates_checked: 0,
    };
    for id in params.ids() {
        let len = params.get(id).len();
        let coords: Vec<usize> = if len <= coords_per_param {
            (0..len).collect()
        } else {
            let mut c = sample(&mut rng, len, coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let grad = analytic.dense(id, len);
        for k in coords {
            let original = work.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = original + T::of(eps);
            let plus = eval(&work, &mut f)?;
            work.get_mut(id).data_mut()[k] = original - T::of(eps);
            let minus = eval(&work, &mut f)?;
            work.get_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad[k].to_f64().unwrap_or(f64::NAN);
            let err = relative_error(a, numeric);
            report.coordinates_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((params.name(id).to_string(), k, a, numeric));
            }
        }
    }
    Ok(report)
}
