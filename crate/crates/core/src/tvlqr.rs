//! Time-varying LQR tracking: finite-difference linearization of a step map
//! along a nominal trajectory and the Riccati backward pass that turns the
//! linearization into feedback gains.
//!
//! On the biped this controller serves as a demonstrative model-based
//! baseline; its correctness tests live on smooth, low-dimensional systems
//! where the optimum is independently computable.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TvlqrError {
    #[error("perturbation step must be positive, got {0}")]
    BadDelta(f64),
    #[error("dynamics returned a non-finite value while perturbing {which} column {column}")]
    DivergentDynamics { which: &'static str, column: usize },
    #[error("A and B sequences must have equal length and consistent shapes: {0}")]
    Inconsistent(String),
    #[error("cost matrix {which} has wrong shape: expected {expected}×{expected}")]
    BadCostShape { which: &'static str, expected: usize },
    #[error("R + BᵀPB is singular at step {step}")]
    Singular { step: usize },
    #[error("time index {t} outside horizon {horizon}")]
    OutOfHorizon { t: usize, horizon: usize },
}

/// Per-step linearization x_{t+1} ≈ A_t δx_t + B_t δu_t about a nominal
/// trajectory.
#[derive(Debug, Clone)]
pub struct LinearizedDynamics {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
}

impl LinearizedDynamics {
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DMatrix<f64>>) -> Result<Self, TvlqrError> {
        if a.len() != b.len() || a.is_empty() {
            return Err(TvlqrError::Inconsistent(format!("{} A vs {} B", a.len(), b.len())));
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        for (t, (at, bt)) in a.iter().zip(&b).enumerate() {
            if at.nrows() != n || at.ncols() != n || bt.nrows() != n || bt.ncols() != m {
                return Err(TvlqrError::Inconsistent(format!("shape mismatch at step {t}")));
            }
            if at.iter().chain(bt.iter()).any(|v| !v.is_finite()) {
                return Err(TvlqrError::Inconsistent(format!("non-finite entry at step {t}")));
            }
        }
        Ok(Self { a, b })
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b[0].ncols()
    }
}

/// Feedback gains K_t and cost-to-go matrices P_t from the Riccati pass.
/// `p` has one more entry than `k` (the terminal cost-to-go).
#[derive(Debug, Clone)]
pub struct TrackingGains {
    pub k: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
}

/// Central-difference linearization of `dynamics` about (x̂, û):
/// A[:,j] = (f(x̂+δe_j, û) − f(x̂−δe_j, û)) / 2δ, and likewise B over inputs.
pub fn linearize<F>(
    dynamics: F,
    x_nom: &DVector<f64>,
    u_nom: &DVector<f64>,
    delta: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), TvlqrError>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    if !(delta > 0.0) {
        return Err(TvlqrError::BadDelta(delta));
    }
    let n = x_nom.len();
    let m = u_nom.len();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x_nom.clone();
        let mut xm = x_nom.clone();
        xp[j] += delta;
        xm[j] -= delta;
        let col = (dynamics(&xp, u_nom) - dynamics(&xm, u_nom)) / (2.0 * delta);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(TvlqrError::DivergentDynamics { which: "state", column: j });
        }
        a.set_column(j, &col);
    }
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut up = u_nom.clone();
        let mut um = u_nom.clone();
        up[j] += delta;
        um[j] -= delta;
        let col = (dynamics(x_nom, &up) - dynamics(x_nom, &um)) / (2.0 * delta);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(TvlqrError::DivergentDynamics { which: "input", column: j });
        }
        b.set_column(j, &col);
    }
    Ok((a, b))
}

/// Backward Riccati recursion with quadratic stage costs Q (state) and R
/// (input) and terminal cost Q_terminal:
///
/// P_T = Q_terminal,
/// K_t = (R + B_tᵀ P_{t+1} B_t)⁻¹ B_tᵀ P_{t+1} A_t,
/// P_t = Q + A_tᵀ P_{t+1} (A_t − B_t K_t).
///
/// Each P_t is re-symmetrized to suppress asymmetric round-off.
pub fn riccati_backward(
    lin: &LinearizedDynamics,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q_terminal: &DMatrix<f64>,
) -> Result<TrackingGains, TvlqrError> {
    let n = lin.state_dim();
    let m = lin.input_dim();
    if q.nrows() != n || q.ncols() != n {
        return Err(TvlqrError::BadCostShape { which: "Q", expected: n });
    }
    if q_terminal.nrows() != n || q_terminal.ncols() != n {
        return Err(TvlqrError::BadCostShape { which: "Q_terminal", expected: n });
    }
    if r.nrows() != m || r.ncols() != m {
        return Err(TvlqrError::BadCostShape { which: "R", expected: m });
    }
    let horizon = lin.horizon();
    let mut p = vec![DMatrix::zeros(n, n); horizon + 1];
    let mut k = vec![DMatrix::zeros(m, n); horizon];
    p[horizon] = q_terminal.clone();
    for t in (0..horizon).rev() {
        let (at, bt) = (&lin.a[t], &lin.b[t]);
        let pb = &p[t + 1] * bt;
        let gram = r + bt.transpose() * &pb;
        let rhs = bt.transpose() * &p[t + 1] * at;
        let kt = gram
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|sol| sol.iter().all(|v| v.is_finite()))
            .ok_or(TvlqrError::Singular { step: t })?;
        let closed = at - bt * &kt;
        let mut pt = q + at.transpose() * &p[t + 1] * &closed;
        pt = (&pt + pt.transpose()) * 0.5;
        p[t] = pt;
        k[t] = kt;
    }
    Ok(TrackingGains { k, p })
}

/// Tracking feedback at step t: u = û_t − K_t (x − x̂_t).
pub fn tvlqr_control(
    gains: &TrackingGains,
    x: &DVector<f64>,
    x_nom: &DVector<f64>,
    u_nom: &DVector<f64>,
    t: usize,
) -> Result<DVector<f64>, TvlqrError> {
    if t >= gains.k.len() {
        return Err(TvlqrError::OutOfHorizon { t, horizon: gains.k.len() });
    }
    Ok(u_nom - &gains.k[t] * (x - x_nom))
}
