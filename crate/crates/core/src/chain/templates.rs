//! Recognisers for the textbook chains with known closed-form optima, used by
//! the `analytic` command to cross-check the solvers.

use nalgebra::DVector;

use super::{solve_l2, solve_traj_reg, ChainSpec, SolverParams};

const MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    /// Both rows equal `(1 − α, α)`, uniform start.
    TwoState { alpha: f64 },
    /// Deterministic path visiting every state once, last state absorbing,
    /// started at the first state of the path.
    Path { order: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct TemplateCheck {
    pub name: String,
    pub expected: Vec<f64>,
    pub got: Vec<f64>,
    pub max_abs_err: f64,
    pub passed: bool,
}

fn approx(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_TOL
}

pub fn detect(chain: &ChainSpec) -> Option<Template> {
    let t = chain.transition();
    let p0 = chain.initial();
    let n = chain.n();
    if n == 2 && p0.iter().all(|&p| approx(p, 0.5)) && (0..2).all(|j| approx(t[(0, j)], t[(1, j)])) {
        return Some(Template::TwoState { alpha: t[(0, 1)] });
    }
    // a path must start at a point mass
    let start = p0.iter().position(|&p| approx(p, 1.0))?;
    let mut order = vec![start];
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut cur = start;
    loop {
        let next = (0..n).find(|&j| approx(t[(cur, j)], 1.0))?;
        if next == cur {
            break;
        }
        if seen[next] {
            return None;
        }
        seen[next] = true;
        order.push(next);
        cur = next;
    }
    (order.len() == n && n >= 2).then_some(Template::Path { order })
}

fn check(name: String, expected: Vec<f64>, got: &DVector<f64>) -> TemplateCheck {
    let max_abs_err = expected
        .iter()
        .zip(got.iter())
        .map(|(e, g)| (e - g).abs())
        .fold(0.0, f64::max);
    TemplateCheck {
        name,
        got: got.iter().copied().collect(),
        passed: max_abs_err < 1e-10,
        expected,
        max_abs_err,
    }
}

/// Compare the solvers against the closed forms for a recognised template.
pub fn verify(chain: &ChainSpec, params: SolverParams) -> Vec<TemplateCheck> {
    let lambda = params.lambda;
    let omega = params.omega;
    let mut out = Vec::new();
    match detect(chain) {
        Some(Template::TwoState { alpha }) => {
            let gamma = alpha - 0.5;
            out.push(check(
                format!("two-state L2 (alpha = {alpha})"),
                vec![-gamma / lambda, gamma / lambda],
                &solve_l2(chain, params),
            ));
            let denom = lambda * (4.0 * alpha * alpha - 4.0 * alpha + 2.0 * omega + 1.0);
            if denom > 0.0 {
                let g = (2.0 * alpha - 1.0) / denom;
                out.push(check(
                    format!("two-state trajectory (alpha = {alpha}, omega = {omega})"),
                    vec![-g, g],
                    &solve_traj_reg(chain, params),
                ));
            }
        }
        Some(Template::Path { order }) => {
            let n = order.len();
            if chain.horizon() + 1 >= n {
                let mut l2 = vec![0.0; n];
                l2[order[0]] = -1.0 / lambda;
                l2[order[n - 1]] = 1.0 / lambda;
                out.push(check("path L2".into(), l2, &solve_l2(chain, params)));
                if omega == 0.0 {
                    let mid = (n as f64 - 1.0) / 2.0;
                    let mut tr = vec![0.0; n];
                    for (i, &s) in order.iter().enumerate() {
                        tr[s] = (i as f64 - mid) / lambda;
                    }
                    out.push(check(
                        "path trajectory (omega = 0, min-norm)".into(),
                        tr,
                        &solve_traj_reg(chain, params),
                    ));
                }
            }
        }
        None => {}
    }
    out
}
