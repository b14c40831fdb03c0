//! Newton solvers for the cross-section MLE and for the fixed-effects panel
//! MLE with the unit effects profiled out.

use crate::data::{Dataset, PanelDataset};
use crate::error::{Error, Result};
use crate::models::{Bound, PanelModel, ParamDomain, ScalarModel};
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOpts {
    pub score_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            score_tol: 1e-10,
            step_tol: 1e-12,
            max_iter: 100,
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta_hat: f64,
    /// Observed-information standard error; NaN when the maximum is on the
    /// boundary of the parameter domain.
    pub se: f64,
    pub loglik_at_max: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The maximum sits on a closed endpoint of the domain and the score
    /// points out of the domain there.
    pub at_boundary: bool,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelEstimate {
    pub theta_hat: f64,
    /// One entry per unit; NaN for dropped units.
    pub alpha_hat: Vec<f64>,
    /// θθ element of the inverse observed information of `(θ, α_1..α_n)`.
    pub se: f64,
    /// Units with no interior fixed-effect estimate (probit stayers).
    pub dropped_units: Vec<usize>,
    pub loglik_at_max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_units: usize,
    pub periods: usize,
}

impl PanelEstimate {
    pub fn retained_units(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_units).filter(move |i| self.alpha_hat[*i].is_finite())
    }
}

/// Objective value, mean score and mean Hessian at one parameter value,
/// plus whatever the caller needs to carry forward (e.g. profiled effects).
struct Point<S> {
    theta: f64,
    obj: f64,
    score: f64,
    hess: f64,
    state: S,
}

struct Solution<S> {
    point: Point<S>,
    iterations: usize,
    at_boundary: bool,
}

fn step_floor(theta: f64, opts: &SolverOpts) -> f64 {
    opts.step_tol.max(4.0 * f64::EPSILON * theta.abs())
}

/// Safeguarded Newton ascent on a one-dimensional objective.
///
/// A Newton step is taken where the objective is locally concave and a unit
/// gradient step otherwise; steps are halved until they stay in the domain
/// and do not lower the objective.
fn maximize<S>(
    mut eval: impl FnMut(f64, &S) -> Option<Point<S>>,
    domain: ParamDomain,
    init: f64,
    init_state: S,
    opts: &SolverOpts,
) -> Result<Solution<S>> {
    if !domain.contains(init) {
        return Err(Error::DomainExit { theta: init });
    }
    let mut init = init;
    if let Some(inward) = closed_edge(&domain, init) {
        // Derivatives may blow up on the edge itself; probe just inside.
        let h = 1e-10 * (1.0 + init.abs());
        if let Some(inside) = eval(init + inward * h, &init_state) {
            if inside.score * inward <= 0.0 {
                if let Some(p) = eval(init, &init_state) {
                    return Ok(Solution {
                        point: p,
                        iterations: 0,
                        at_boundary: true,
                    });
                }
            }
        }
        init += inward * 1e-6 * (1.0 + init.abs());
    }
    let mut current = eval(init, &init_state).ok_or(Error::NonConvergence {
        iterations: 0,
        theta: init,
    })?;
    for iteration in 0..opts.max_iter {
        if current.score.abs() <= opts.score_tol {
            return Ok(Solution {
                point: polish(&mut eval, &domain, current),
                iterations: iteration,
                at_boundary: false,
            });
        }
        let direction = if current.hess < 0.0 {
            -current.score / current.hess
        } else {
            current.score.signum() * (1.0 + current.theta.abs())
        };
        let slack = 1e-12 * (1.0 + current.obj.abs());
        let mut step = direction;
        let mut left_domain = false;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let candidate = current.theta + step;
            if !domain.contains(candidate) || closed_edge(&domain, candidate).is_some() {
                left_domain = true;
                if let Some(p) = boundary_maximum(&mut eval, &domain, &current, candidate, slack) {
                    return Ok(Solution {
                        point: p,
                        iterations: iteration + 1,
                        at_boundary: true,
                    });
                }
                step *= 0.5;
                continue;
            }
            match eval(candidate, &current.state) {
                Some(p) if p.obj.is_finite() && p.obj >= current.obj - slack => {
                    accepted = Some(p);
                    break;
                }
                _ => step *= 0.5,
            }
        }
        let Some(next) = accepted else {
            return Err(if left_domain {
                Error::DomainExit {
                    theta: current.theta,
                }
            } else {
                Error::NonConvergence {
                    iterations: iteration,
                    theta: current.theta,
                }
            });
        };
        let moved = (next.theta - current.theta).abs();
        current = next;
        if moved <= step_floor(current.theta, opts) {
            if left_domain {
                // Pinned against an open end of the domain.
                return Err(Error::DomainExit {
                    theta: current.theta,
                });
            }
            return Ok(Solution {
                point: polish(&mut eval, &domain, current),
                iterations: iteration + 1,
                at_boundary: false,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        theta: current.theta,
    })
}

/// One last Newton step from a converged point, kept only if it improves
/// the score without lowering the objective. Subsample refits are combined
/// with weights of order n, so the extra digits matter.
fn polish<S>(
    eval: &mut impl FnMut(f64, &S) -> Option<Point<S>>,
    domain: &ParamDomain,
    current: Point<S>,
) -> Point<S> {
    if !(current.hess < 0.0) || current.score == 0.0 {
        return current;
    }
    let candidate = current.theta - current.score / current.hess;
    if !domain.contains(candidate) || closed_edge(domain, candidate).is_some() {
        return current;
    }
    match eval(candidate, &current.state) {
        Some(p)
            if p.score.abs() < current.score.abs()
                && p.obj >= current.obj - 1e-12 * (1.0 + current.obj.abs()) =>
        {
            p
        }
        _ => current,
    }
}

fn closed_edge(domain: &ParamDomain, theta: f64) -> Option<f64> {
    match (domain.lower, domain.upper) {
        (Bound::Closed(a), _) if theta == a => Some(1.0),
        (_, Bound::Closed(b)) if theta == b => Some(-1.0),
        _ => None,
    }
}

/// If a step overshoots a closed endpoint, checks whether the endpoint
/// itself is the maximum: no worse than the current point, with the score
/// just inside the domain pointing outward.
fn boundary_maximum<S>(
    eval: &mut impl FnMut(f64, &S) -> Option<Point<S>>,
    domain: &ParamDomain,
    current: &Point<S>,
    candidate: f64,
    slack: f64,
) -> Option<Point<S>> {
    let (edge, inward) = match (domain.lower, domain.upper) {
        (Bound::Closed(a), _) if candidate <= a => (a, 1.0),
        (_, Bound::Closed(b)) if candidate >= b => (b, -1.0),
        _ => return None,
    };
    let at_edge = eval(edge, &current.state)?;
    if !(at_edge.obj >= current.obj - slack) {
        return None;
    }
    let h = 1e-10 * (1.0 + edge.abs());
    let inside = eval(edge + inward * h, &current.state)?;
    (inside.score * inward <= 0.0).then_some(at_edge)
}

fn scalar_point(data: &Dataset, model: &dyn ScalarModel, theta: f64) -> Option<Point<()>> {
    let mut obj = NeumaierSum::new();
    let mut score = NeumaierSum::new();
    let mut hess = NeumaierSum::new();
    for z in data.rows() {
        let (l, s, h) = model.newton_terms(z, theta);
        obj.add(l);
        score.add(s);
        hess.add(h);
    }
    let n = data.len() as f64;
    let p = Point {
        theta,
        obj: obj.value() / n,
        score: score.value() / n,
        hess: hess.value() / n,
        state: (),
    };
    p.obj.is_finite().then_some(p)
}

/// Maximum likelihood for an i.i.d. sample under a scalar model.
pub fn fit_mle(
    data: &Dataset,
    model: &dyn ScalarModel,
    init: f64,
    opts: &SolverOpts,
) -> Result<Estimate> {
    let sol = maximize(
        |theta, _: &()| scalar_point(data, model, theta),
        model.domain(),
        init,
        (),
        opts,
    )?;
    let n = data.len();
    let p = sol.point;
    let se = if sol.at_boundary || !(p.hess < 0.0) {
        f64::NAN
    } else {
        (-(n as f64) * p.hess).sqrt().recip()
    };
    Ok(Estimate {
        theta_hat: p.theta,
        se,
        loglik_at_max: p.obj * n as f64,
        iterations: sol.iterations,
        converged: true,
        at_boundary: sol.at_boundary,
        n_obs: n,
    })
}

/// [`fit_mle`] from the model's method-of-moments start.
pub fn fit_mle_default(
    data: &Dataset,
    model: &dyn ScalarModel,
    opts: &SolverOpts,
) -> Result<Estimate> {
    fit_mle(data, model, model.default_init(data), opts)
}

/// Profiled effects and the pieces of the profile Hessian at one θ.
struct Profile {
    alpha: Vec<f64>,
}

fn solve_alpha(
    panel: &PanelDataset,
    model: &dyn PanelModel,
    unit: usize,
    theta: f64,
    warm: f64,
    opts: &SolverOpts,
) -> Option<f64> {
    let eval = |alpha: f64, _: &()| {
        let mut obj = NeumaierSum::new();
        let mut score = NeumaierSum::new();
        let mut hess = NeumaierSum::new();
        for z in panel.unit(unit) {
            let t = model.terms(z, theta, alpha);
            obj.add(t.loglik);
            score.add(t.v);
            hess.add(t.v_alpha);
        }
        let periods = panel.periods() as f64;
        let p = Point {
            theta: alpha,
            obj: obj.value() / periods,
            score: score.value() / periods,
            hess: hess.value() / periods,
            state: (),
        };
        p.obj.is_finite().then_some(p)
    };
    maximize(eval, ParamDomain::REAL_LINE, warm, (), opts)
        .ok()
        .map(|s| s.point.theta)
}

fn profile_point(
    panel: &PanelDataset,
    model: &dyn PanelModel,
    retained: &[usize],
    theta: f64,
    warm: &Profile,
    opts: &SolverOpts,
) -> Option<Point<Profile>> {
    let mut alpha = warm.alpha.clone();
    let mut obj = NeumaierSum::new();
    let mut score = NeumaierSum::new();
    let mut hess = NeumaierSum::new();
    for &i in retained {
        let a = solve_alpha(panel, model, i, theta, warm.alpha[i], opts)?;
        alpha[i] = a;
        let (mut h_theta_alpha, mut h_alpha_alpha) = (0.0, 0.0);
        for z in panel.unit(i) {
            let t = model.terms(z, theta, a);
            obj.add(t.loglik);
            score.add(t.u);
            hess.add(t.u_theta);
            h_theta_alpha += t.u_alpha;
            h_alpha_alpha += t.v_alpha;
        }
        // Schur complement of the unit's effect in the full Hessian.
        hess.add(-h_theta_alpha * h_theta_alpha / h_alpha_alpha);
    }
    let cells = (retained.len() * panel.periods()) as f64;
    let p = Point {
        theta,
        obj: obj.value() / cells,
        score: score.value() / cells,
        hess: hess.value() / cells,
        state: Profile { alpha },
    };
    p.obj.is_finite().then_some(p)
}

/// Fixed-effects MLE of the common parameter, profiling one effect per unit.
///
/// `alpha_init` warm-starts the unit effects (NaN entries fall back to the
/// model's default); units flagged by [`PanelModel::is_stayer`] are dropped.
pub fn fit_panel_mle_warm(
    panel: &PanelDataset,
    model: &dyn PanelModel,
    init: f64,
    alpha_init: Option<&[f64]>,
    opts: &SolverOpts,
) -> Result<PanelEstimate> {
    let n = panel.n();
    let mut dropped = Vec::new();
    let mut retained = Vec::new();
    for i in 0..n {
        if model.is_stayer(&mut panel.unit(i)) {
            dropped.push(i);
        } else {
            retained.push(i);
        }
    }
    if retained.is_empty() {
        return Err(Error::InvalidData(
            "every unit is a stayer; nothing identifies theta".into(),
        ));
    }
    let mut alpha = vec![f64::NAN; n];
    for &i in &retained {
        alpha[i] = alpha_init
            .map(|a| a[i])
            .filter(|a| a.is_finite())
            .unwrap_or_else(|| model.default_alpha(&mut panel.unit(i)));
    }
    let sol = maximize(
        |theta, warm: &Profile| profile_point(panel, model, &retained, theta, warm, opts),
        model.domain(),
        init,
        Profile { alpha },
        opts,
    )?;
    let p = sol.point;
    let cells = (retained.len() * panel.periods()) as f64;
    let se = if sol.at_boundary || !(p.hess < 0.0) {
        f64::NAN
    } else {
        (-cells * p.hess).sqrt().recip()
    };
    Ok(PanelEstimate {
        theta_hat: p.theta,
        alpha_hat: p.state.alpha,
        se,
        dropped_units: dropped,
        loglik_at_max: p.obj * cells,
        iterations: sol.iterations,
        converged: true,
        n_units: n,
        periods: panel.periods(),
    })
}

pub fn fit_panel_mle(
    panel: &PanelDataset,
    model: &dyn PanelModel,
    init: f64,
    opts: &SolverOpts,
) -> Result<PanelEstimate> {
    fit_panel_mle_warm(panel, model, init, None, opts)
}

pub fn fit_panel_mle_default(
    panel: &PanelDataset,
    model: &dyn PanelModel,
    opts: &SolverOpts,
) -> Result<PanelEstimate> {
    fit_panel_mle(panel, model, model.default_init(panel), opts)
}
