//! Frank–Wolfe on R(π) = πᵀGπ − 2πᵀb over the probability simplex.

use serde::Serialize;

use super::{quadratic_risk, SymMatrix};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    pub risk: f64,
    /// Frank–Wolfe duality gap at the returned iterate; bounds R(π) − min R.
    pub gap: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// gap ≤ ε at termination.
    pub certified: bool,
    /// R at every iterate, starting from the uniform point.
    pub risk_history: Vec<f64>,
}

/// Starts from uniform weights; each step moves toward the vertex with the
/// smallest gradient coordinate (lowest index on ties) with exact line
/// search, and stops once the duality gap is at most `epsilon`. Hitting
/// `max_iters` first returns the iterate with `certified = false`.
pub fn fit_weights_frank_wolfe(g: &SymMatrix, b: &[f64], epsilon: f64, max_iters: usize) -> Result<WeightFit> {
    let m = g.size();
    if m == 0 || b.len() != m {
        return Err(invalid("b", "need one linear coefficient per atom"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let mut pi = vec![1.0 / m as f64; m];
    let mut history = vec![quadratic_risk(g, b, &pi)];
    let mut iterations = 0;
    loop {
        let gpi = g.mul_vec(&pi);
        let grad: Vec<f64> = gpi.iter().zip(b).map(|(a, c)| 2.0 * (a - c)).collect();
        let j = grad
            .iter()
            .enumerate()
            .fold(0usize, |best, (i, v)| if *v < grad[best] { i } else { best });
        let gap = (grad.iter().zip(&pi).map(|(a, c)| a * c).sum::<f64>() - grad[j]).max(0.0);
        let risk = *history.last().expect("nonempty");
        if gap <= epsilon || iterations >= max_iters {
            return Ok(WeightFit {
                weights: pi,
                risk,
                gap,
                epsilon,
                iterations,
                certified: gap <= epsilon,
                risk_history: history,
            });
        }
        // d = e_j − π, dᵀGd = G_jj − 2(Gπ)_j + πᵀGπ
        let pgp: f64 = gpi.iter().zip(&pi).map(|(a, c)| a * c).sum();
        let curvature = g.get(j, j) - 2.0 * gpi[j] + pgp;
        let gamma = if curvature > 0.0 {
            (gap / (2.0 * curvature)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let mut next: Vec<f64> = pi.iter().map(|w| (1.0 - gamma) * w).collect();
        next[j] += gamma;
        let new_risk = quadratic_risk(g, b, &next);
        iterations += 1;
        if new_risk <= risk {
            pi = next;
            history.push(new_risk);
        } else {
            // rounding can make an exact line-search step a hair uphill
            history.push(risk);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, v: &[f64]) -> SymMatrix {
        SymMatrix::from_row_major(n, v.to_vec()).unwrap()
    }

    #[test]
    fn vertex_optimum_for_orthogonal_atoms() {
        let g = sym(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = [0.1, 2.0, 0.3];
        let fit = fit_weights_frank_wolfe(&g, &b, 1e-9, 10_000).unwrap();
        assert!(fit.certified);
        assert!((fit.weights[1] - 1.0).abs() < 1e-6, "{:?}", fit.weights);
        // brute force over vertices
        let best = (0..3)
            .map(|j| {
                let mut e = [0.0; 3];
                e[j] = 1.0;
                quadratic_risk(&g, &b, &e)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(fit.risk <= best + 1e-9);
    }

    #[test]
    fn symmetric_problem_stays_uniform() {
        let g = sym(2, &[1.0, 0.2, 0.2, 1.0]);
        let fit = fit_weights_frank_wolfe(&g, &[0.0, 0.0], 1e-12, 100).unwrap();
        assert_eq!(fit.iterations, 0);
        assert!((fit.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn huge_epsilon_returns_start() {
        let g = sym(2, &[2.0, 0.0, 0.0, 1.0]);
        let fit = fit_weights_frank_wolfe(&g, &[1.0, 0.0], 1e6, 100).unwrap();
        assert_eq!(fit.iterations, 0);
        assert_eq!(fit.weights, vec![0.5, 0.5]);
        assert!(fit.certified);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let g = sym(3, &[1.0, 0.9, 0.8, 0.9, 1.0, 0.9, 0.8, 0.9, 1.0]);
        let fit = fit_weights_frank_wolfe(&g, &[0.5, 0.45, 0.52], 1e-14, 1).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(!fit.certified);
        assert!(fit_weights_frank_wolfe(&g, &[0.0; 3], 0.0, 1).is_err());
    }
}
