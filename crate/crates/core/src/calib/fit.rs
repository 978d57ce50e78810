use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{log_sum_exp, PriorVector};
use crate::metrics::h_mc;
use crate::pooling::PhoneTrial;

use super::CalibrationTransform;

const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Steepest descent with Armijo backtracking.
    GradientDescent,
    /// Damped Newton steps with the same backtracking rule; falls back to
    /// the negative gradient when the Hessian system cannot be solved.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop once the gradient max-norm drops below this.
    pub tol: f64,
    /// Weight of an optional `ridge·‖β‖²` penalty; 0 disables it.
    pub ridge: f64,
    pub optimizer: Optimizer,
    /// Starting point; `None` starts at the identity transform.
    pub start: Option<CalibrationTransform>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-7,
            ridge: 0.0,
            optimizer: Optimizer::Newton,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Fitted transform with zero-mean offsets.
    pub transform: CalibrationTransform,
    pub h_mc_before: f64,
    pub h_mc_after: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_max_norm: f64,
    /// Set when the fitted scale is not positive, which inverts the ranking.
    pub alpha_nonpositive: bool,
}

/// Class-balanced cross entropy of `softmax(α·λ + β + ln π)` as a function of
/// the packed parameters `[α, β_0, …, β_{N-1}]`.
struct Objective<'a> {
    trials: &'a [PhoneTrial],
    weights: Vec<f64>,
    log_prior: Vec<f64>,
    ridge: f64,
}

struct Evaluation {
    value: f64,
    gradient: Vec<f64>,
    hessian: Option<DMatrix<f64>>,
}

impl<'a> Objective<'a> {
    fn new(trials: &'a [PhoneTrial], eval_prior: &PriorVector, ridge: f64) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::NoTrials);
        }
        let n = eval_prior.len();
        let mut counts = vec![0usize; n];
        for t in trials {
            if t.llk.len() != n {
                return Err(Error::dimension(
                    "trial log-likelihood vector",
                    n,
                    t.llk.len(),
                ));
            }
            if t.true_phone >= n {
                return Err(Error::dimension("true phone index", n, t.true_phone));
            }
            counts[t.true_phone] += 1;
        }
        let active = counts.iter().filter(|&&c| c > 0).count();
        let weights = trials
            .iter()
            .map(|t| 1.0 / (active as f64 * counts[t.true_phone] as f64))
            .collect();
        Ok(Self {
            trials,
            weights,
            log_prior: eval_prior.log_values(),
            ridge,
        })
    }

    fn active_classes(&self) -> usize {
        let mut seen = vec![false; self.log_prior.len()];
        self.trials.iter().for_each(|t| seen[t.true_phone] = true);
        seen.into_iter().filter(|&s| s).count()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (alpha, beta) = (x[0], &x[1..]);
        let mut logits = vec![0.0; beta.len()];
        let mut total = 0.0;
        for (trial, w) in self.trials.iter().zip(&self.weights) {
            for (i, z) in logits.iter_mut().enumerate() {
                *z = alpha * trial.llk.as_slice()[i] + beta[i] + self.log_prior[i];
            }
            total += w * (log_sum_exp(&logits) - logits[trial.true_phone]);
        }
        total + self.ridge * beta.iter().map(|b| b * b).sum::<f64>()
    }

    fn evaluate(&self, x: &[f64], with_hessian: bool) -> Evaluation {
        let n = self.log_prior.len();
        let (alpha, beta) = (x[0], &x[1..]);
        let mut value = 0.0;
        let mut grad = vec![0.0; n + 1];
        let mut hess = with_hessian.then(|| DMatrix::<f64>::zeros(n + 1, n + 1));
        let mut logits = vec![0.0; n];
        let mut post = vec![0.0; n];
        for (trial, &w) in self.trials.iter().zip(&self.weights) {
            let llk = trial.llk.as_slice();
            for i in 0..n {
                logits[i] = alpha * llk[i] + beta[i] + self.log_prior[i];
            }
            let lse = log_sum_exp(&logits);
            for i in 0..n {
                post[i] = (logits[i] - lse).exp();
            }
            let y = trial.true_phone;
            value += w * (lse - logits[y]);

            // E_p[λ]
            let mean_llk: f64 = post.iter().zip(llk).map(|(p, l)| p * l).sum();
            grad[0] += w * (mean_llk - llk[y]);
            for i in 0..n {
                grad[i + 1] += w * post[i];
            }
            grad[y + 1] -= w;

            if let Some(h) = hess.as_mut() {
                let second: f64 = post.iter().zip(llk).map(|(p, l)| p * l * l).sum();
                h[(0, 0)] += w * (second - mean_llk * mean_llk);
                for i in 0..n {
                    let cross = w * post[i] * (llk[i] - mean_llk);
                    h[(0, i + 1)] += cross;
                    h[(i + 1, 0)] += cross;
                    h[(i + 1, i + 1)] += w * post[i];
                    for j in 0..n {
                        h[(i + 1, j + 1)] -= w * post[i] * post[j];
                    }
                }
            }
        }
        if self.ridge > 0.0 {
            for i in 0..n {
                value += self.ridge * beta[i] * beta[i];
                grad[i + 1] += 2.0 * self.ridge * beta[i];
                if let Some(h) = hess.as_mut() {
                    h[(i + 1, i + 1)] += 2.0 * self.ridge;
                }
            }
        }
        Evaluation {
            value,
            gradient: grad,
            hessian: hess,
        }
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, g| m.max(g.abs()))
}

/// Newton direction for a Hessian that is singular along the common-offset
/// direction `(0, 1, …, 1)`: that direction is lifted to full curvature,
/// which leaves its (zero) gradient component untouched.
fn newton_direction(hessian: DMatrix<f64>, gradient: &[f64]) -> Option<Vec<f64>> {
    let dim = gradient.len();
    let n = dim - 1;
    let scale = (0..dim).map(|i| hessian[(i, i)]).fold(1.0f64, f64::max);
    let mut system = hessian;
    for i in 1..dim {
        for j in 1..dim {
            system[(i, j)] += scale / n as f64;
        }
    }
    for i in 0..dim {
        system[(i, i)] += 1e-12 * scale;
    }
    let chol = system.cholesky()?;
    let mut g = DVector::from_column_slice(gradient);
    let mean_beta = g.rows(1, n).sum() / n as f64;
    g.rows_mut(1, n).add_scalar_mut(-mean_beta);
    let d = chol.solve(&(-g));
    d.iter()
        .all(|v| v.is_finite())
        .then(|| d.iter().copied().collect())
}

fn pack(t: &CalibrationTransform) -> Vec<f64> {
    std::iter::once(t.alpha)
        .chain(t.beta.iter().copied())
        .collect()
}

/// Class-balanced cross entropy (nats) of the trials after `transform`.
///
/// Same quantity as [`h_mc`] but accumulated trial by trial in one weighted
/// sum, which is the form the optimizer differentiates.
pub fn objective(
    transform: &CalibrationTransform,
    trials: &[PhoneTrial],
    eval_prior: &PriorVector,
) -> Result<f64> {
    let obj = Objective::new(trials, eval_prior, 0.0)?;
    if transform.len() != eval_prior.len() {
        return Err(Error::dimension(
            "calibration offsets",
            eval_prior.len(),
            transform.len(),
        ));
    }
    Ok(obj.value(&pack(transform)))
}

/// Analytic gradient of [`objective`] with respect to `[α, β_0, …, β_{N-1}]`.
pub fn gradient(
    transform: &CalibrationTransform,
    trials: &[PhoneTrial],
    eval_prior: &PriorVector,
) -> Result<Vec<f64>> {
    let obj = Objective::new(trials, eval_prior, 0.0)?;
    if transform.len() != eval_prior.len() {
        return Err(Error::dimension(
            "calibration offsets",
            eval_prior.len(),
            transform.len(),
        ));
    }
    Ok(obj.evaluate(&pack(transform), false).gradient)
}

/// Fits `α` and `β` to minimise the class-balanced cross entropy of `trials`.
///
/// The objective is convex in the parameters. Non-convergence within the
/// iteration budget is reported through [`FitResult::converged`], not as an
/// error.
pub fn fit(
    trials: &[PhoneTrial],
    eval_prior: &PriorVector,
    options: &FitOptions,
) -> Result<FitResult> {
    let obj = Objective::new(trials, eval_prior, options.ridge)?;
    let active = obj.active_classes();
    if active < 2 {
        return Err(Error::TooFewClasses(active));
    }
    let n = eval_prior.len();
    let start = options
        .start
        .clone()
        .unwrap_or_else(|| CalibrationTransform::identity(n));
    if start.len() != n {
        return Err(Error::dimension("starting offsets", n, start.len()));
    }

    let mut x = pack(&start);
    let mut iterations = 0;
    let mut converged = false;
    let mut step: f64 = 1.0;
    let mut eval = obj.evaluate(&x, options.optimizer == Optimizer::Newton);
    loop {
        if max_norm(&eval.gradient) < options.tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        let steepest: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
        let direction = match (options.optimizer, eval.hessian.take()) {
            (Optimizer::Newton, Some(h)) => newton_direction(h, &eval.gradient)
                .filter(|d| {
                    d.iter()
                        .zip(&eval.gradient)
                        .map(|(d, g)| d * g)
                        .sum::<f64>()
                        < 0.0
                })
                .unwrap_or(steepest),
            _ => steepest,
        };
        let slope: f64 = direction
            .iter()
            .zip(&eval.gradient)
            .map(|(d, g)| d * g)
            .sum();

        let mut t = match options.optimizer {
            Optimizer::Newton => 1.0,
            Optimizer::GradientDescent => (2.0 * step).min(1e6),
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> = x.iter().zip(&direction).map(|(x, d)| x + t * d).collect();
            let value = obj.value(&candidate);
            if value <= eval.value + ARMIJO_C * t * slope {
                accepted = Some(candidate);
                break;
            }
            t *= ARMIJO_SHRINK;
        }
        let Some(next) = accepted else {
            break;
        };
        step = t;
        x = next;
        iterations += 1;
        eval = obj.evaluate(&x, options.optimizer == Optimizer::Newton);
    }

    let gradient_max_norm = max_norm(&eval.gradient);
    let transform = CalibrationTransform::new(x[0], x[1..].to_vec())?.canonical();
    let h_mc_before = h_mc(trials, eval_prior, None)?.h_mc;
    let h_mc_after = h_mc(trials, eval_prior, Some(&transform))?.h_mc;
    Ok(FitResult {
        alpha_nonpositive: transform.alpha <= 0.0,
        transform,
        h_mc_before,
        h_mc_after,
        iterations,
        converged,
        gradient_max_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::LogLikVector;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trial(true_phone: usize, llk: Vec<f64>) -> PhoneTrial {
        PhoneTrial {
            true_phone,
            llk: LogLikVector::new(llk).unwrap(),
            duration: 1,
            stress: None,
        }
    }

    /// 12 overlapping 3-class trials with a finite optimum.
    fn toy_trials() -> Vec<PhoneTrial> {
        vec![
            trial(0, vec![2.0, 0.5, -1.0]),
            trial(0, vec![1.0, 1.5, 0.0]),
            trial(0, vec![0.5, -0.5, 0.8]),
            trial(0, vec![3.0, 1.0, 1.0]),
            trial(1, vec![0.2, 1.8, -0.4]),
            trial(1, vec![1.1, 0.9, 0.3]),
            trial(1, vec![-0.5, 2.5, 0.5]),
            trial(1, vec![0.0, -0.2, 0.6]),
            trial(2, vec![0.3, 0.1, 1.2]),
            trial(2, vec![-1.0, 0.4, 2.2]),
            trial(2, vec![1.4, -0.3, 0.9]),
            trial(2, vec![0.6, 0.8, 0.2]),
        ]
    }

    fn random_trials(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<PhoneTrial> {
        (0..count)
            .map(|k| {
                let y = k % n;
                let llk = (0..n)
                    .map(|i| rng.random_range(-3.0..3.0) + if i == y { 1.5 } else { 0.0 })
                    .collect();
                trial(y, llk)
            })
            .collect()
    }

    #[test]
    fn objective_matches_h_mc() {
        let trials = toy_trials();
        let prior = PriorVector::flat(3);
        let t = CalibrationTransform::new(0.7, vec![0.2, -0.1, 0.4]).unwrap();
        let a = objective(&t, &trials, &prior).unwrap();
        let b = h_mc(&trials, &prior, Some(&t)).unwrap().h_mc;
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = random_trials(&mut rng, 3, 30);
        let prior = PriorVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let t = CalibrationTransform::new(0.8, vec![0.3, -0.2, 0.1]).unwrap();
        let g = gradient(&t, &trials, &prior).unwrap();
        let h = 1e-5;
        let x = pack(&t);
        for k in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += h;
            minus[k] -= h;
            let f = |v: &[f64]| {
                let t = CalibrationTransform::new(v[0], v[1..].to_vec()).unwrap();
                objective(&t, &trials, &prior).unwrap()
            };
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert_abs_diff_eq!(g[k], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn zero_llk_gives_zero_alpha_gradient() {
        let trials = vec![
            trial(0, vec![0.0; 3]),
            trial(1, vec![0.0; 3]),
            trial(2, vec![0.0; 3]),
        ];
        let t = CalibrationTransform::new(1.3, vec![0.5, 0.0, -0.5]).unwrap();
        let g = gradient(&t, &trials, &PriorVector::flat(3)).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn fit_reaches_first_order_optimum() {
        let trials = toy_trials();
        let prior = PriorVector::flat(3);
        let r = fit(&trials, &prior, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.h_mc_after <= r.h_mc_before + 1e-9);
        let g = gradient(&r.transform, &trials, &prior).unwrap();
        assert!(max_norm(&g) < 1e-6, "{g:?}");
        assert_abs_diff_eq!(r.transform.beta.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_matches_grid_search() {
        let trials = toy_trials();
        let prior = PriorVector::flat(3);
        let r = fit(&trials, &prior, &FitOptions::default()).unwrap();

        // Coarse-to-fine exhaustive grid over α ∈ [0, 3], β = (0, b1, b2), b ∈ [-2, 2].
        let f = |a: f64, b1: f64, b2: f64| {
            let t = CalibrationTransform::new(a, vec![0.0, b1, b2]).unwrap();
            h_mc(&trials, &prior, Some(&t)).unwrap().h_mc
        };
        let grid = |lo: f64, hi: f64, step: f64| {
            let k = ((hi - lo) / step).round() as usize;
            (0..=k).map(move |i| lo + i as f64 * step)
        };
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for a in grid(0.0, 3.0, 0.05) {
            for b1 in grid(-2.0, 2.0, 0.1) {
                for b2 in grid(-2.0, 2.0, 0.1) {
                    let v = f(a, b1, b2);
                    if v < best.0 {
                        best = (v, a, b1, b2);
                    }
                }
            }
        }
        let (_, a0, b10, b20) = best;
        for a in grid((a0 - 0.1).max(0.0), (a0 + 0.1).min(3.0), 1e-3) {
            for b1 in grid((b10 - 0.2).max(-2.0), (b10 + 0.2).min(2.0), 1e-2) {
                for b2 in grid((b20 - 0.2).max(-2.0), (b20 + 0.2).min(2.0), 1e-2) {
                    let v = f(a, b1, b2);
                    if v < best.0 {
                        best = (v, a, b1, b2);
                    }
                }
            }
        }
        let (grid_value, ga, gb1, gb2) = best;
        let beta = &r.transform.beta;
        assert!(
            (r.transform.alpha - ga).abs() <= 2e-3,
            "alpha {} vs grid {ga}",
            r.transform.alpha
        );
        assert!(((beta[1] - beta[0]) - gb1).abs() <= 2e-2);
        assert!(((beta[2] - beta[0]) - gb2).abs() <= 2e-2);
        assert!(r.h_mc_after <= grid_value + 1e-12);
        assert!(grid_value - r.h_mc_after < 1e-4);
    }

    #[test]
    fn scaled_inputs_rescale_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = random_trials(&mut rng, 4, 200);
        let scaled: Vec<PhoneTrial> = trials
            .iter()
            .map(|t| {
                trial(
                    t.true_phone,
                    t.llk.as_slice().iter().map(|v| v * 10.0).collect(),
                )
            })
            .collect();
        let prior = PriorVector::flat(4);
        let a = fit(&trials, &prior, &FitOptions::default()).unwrap();
        let b = fit(&scaled, &prior, &FitOptions::default()).unwrap();
        assert!((b.transform.alpha / (a.transform.alpha / 10.0) - 1.0).abs() < 0.05);
        assert_abs_diff_eq!(a.h_mc_after, b.h_mc_after, epsilon = 1e-6);
    }

    #[test]
    fn gradient_descent_agrees_with_newton() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let trials = random_trials(&mut rng, 3, 90);
        let prior = PriorVector::flat(3);
        let newton = fit(&trials, &prior, &FitOptions::default()).unwrap();
        let gd = fit(
            &trials,
            &prior,
            &FitOptions {
                optimizer: Optimizer::GradientDescent,
                max_iter: 20_000,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(newton.converged && gd.converged);
        assert_abs_diff_eq!(newton.h_mc_after, gd.h_mc_after, epsilon = 1e-6);
        assert_abs_diff_eq!(newton.transform.alpha, gd.transform.alpha, epsilon = 1e-4);
    }

    #[test]
    fn iteration_budget_exhaustion_is_not_fatal() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let trials = random_trials(&mut rng, 3, 60);
        let r = fit(
            &trials,
            &PriorVector::flat(3),
            &FitOptions {
                optimizer: Optimizer::GradientDescent,
                max_iter: 2,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.h_mc_after <= r.h_mc_before + 1e-9);
    }

    #[test]
    fn single_class_is_rejected() {
        let trials = vec![trial(1, vec![0.0, 1.0]), trial(1, vec![0.5, 0.2])];
        assert!(matches!(
            fit(&trials, &PriorVector::flat(2), &FitOptions::default()),
            Err(Error::TooFewClasses(1))
        ));
    }

    #[test]
    fn ridge_shrinks_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let trials = random_trials(&mut rng, 3, 60);
        let prior = PriorVector::new(vec![0.6, 0.3, 0.1]).unwrap();
        let plain = fit(&trials, &prior, &FitOptions::default()).unwrap();
        let ridged = fit(
            &trials,
            &prior,
            &FitOptions {
                ridge: 1.0,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let norm = |t: &CalibrationTransform| t.beta.iter().map(|b| b * b).sum::<f64>();
        assert!(ridged.converged);
        assert!(norm(&ridged.transform) < norm(&plain.transform));
        assert!(ridged.h_mc_after >= plain.h_mc_after - 1e-12);
    }
}
