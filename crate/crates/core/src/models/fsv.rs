//! Factor stochastic volatility state-space model.
//!
//! K latent log-volatilities follow independent AR(1) dynamics with coupled
//! innovations; M observed series load on K latent factors whose variances
//! are the exponentiated log-volatilities. The factors are analytically
//! marginalized, so the observation density given the state is a dense
//! M-variate Gaussian with covariance `B diag(exp(x)) B' + diag(psi)`.

use crate::error::{Error, Result};
use crate::prng::Stream;
use crate::scalar::Scalar;

use super::linalg::{cholesky_in_place, forward_solve_in_place};
use super::StateSpaceModel;

/// Dimension cap keeping observation-density buffers on the stack.
pub const MAX_DIM: usize = 16;

#[derive(Clone, Debug)]
pub struct FsvParams<T> {
    /// M x K factor loading matrix, zero above the diagonal.
    loading: Vec<Vec<T>>,
    /// Diagonal observation noise variances (length M), strictly positive.
    obs_var: Vec<T>,
    /// Diagonal AR(1) coefficients of the log-volatilities (length K).
    ar_coeff: Vec<T>,
    /// Innovation covariance of the log-volatilities (K x K, symmetric PSD).
    innovation_cov: Vec<Vec<T>>,
    /// Initial log-volatility vector (length K).
    initial_state: Vec<T>,
    /// Cached lower Cholesky factor of the innovation covariance.
    innovation_chol: Vec<Vec<T>>,
}

impl<T: Scalar> FsvParams<T> {
    pub fn new(
        loading: Vec<Vec<T>>,
        obs_var: Vec<T>,
        ar_coeff: Vec<T>,
        innovation_cov: Vec<Vec<T>>,
        initial_state: Vec<T>,
    ) -> Result<Self> {
        let m = loading.len();
        if m == 0 || m > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "series count {m} outside 1..={MAX_DIM}"
            )));
        }
        let k = loading[0].len();
        if k == 0 || k > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "factor count {k} outside 1..={MAX_DIM}"
            )));
        }
        if loading.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidModel("ragged loading matrix".into()));
        }
        for (i, row) in loading.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if j > i && v != T::zero() {
                    return Err(Error::InvalidModel(
                        "loading matrix must be zero above the diagonal".into(),
                    ));
                }
            }
        }
        if obs_var.len() != m || obs_var.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::InvalidModel(
                "observation variances must be positive, one per series".into(),
            ));
        }
        if ar_coeff.len() != k {
            return Err(Error::InvalidModel("need one AR coefficient per factor".into()));
        }
        if innovation_cov.len() != k || innovation_cov.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidModel("innovation covariance must be K x K".into()));
        }
        for i in 0..k {
            for j in 0..k {
                if innovation_cov[i][j] != innovation_cov[j][i] {
                    return Err(Error::InvalidModel(
                        "innovation covariance must be symmetric".into(),
                    ));
                }
            }
        }
        if initial_state.len() != k {
            return Err(Error::InvalidModel("initial state must have length K".into()));
        }
        let mut flat = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                flat[i * k + j] = innovation_cov[i][j];
            }
        }
        if !cholesky_in_place(&mut flat, k) {
            return Err(Error::InvalidModel(
                "innovation covariance is not positive semidefinite".into(),
            ));
        }
        let mut innovation_chol = vec![vec![T::zero(); k]; k];
        for i in 0..k {
            for j in 0..=i {
                innovation_chol[i][j] = flat[i * k + j];
            }
        }
        Ok(FsvParams {
            loading,
            obs_var,
            ar_coeff,
            innovation_cov,
            initial_state,
            innovation_chol,
        })
    }

    /// The bundled 5-series, 3-factor parameterization used by the demo
    /// experiments: psi_i = 0.5, phi_i = 0.9, x0 = 0 and fixed loading and
    /// innovation matrices.
    pub fn default_model() -> Self {
        let f = T::from_f64_lossy;
        let loading = vec![
            vec![f(1.0), f(0.0), f(0.0)],
            vec![f(0.5), f(1.0), f(0.0)],
            vec![f(0.5), f(0.5), f(1.0)],
            vec![f(0.2), f(0.6), f(0.3)],
            vec![f(0.8), f(0.7), f(0.5)],
        ];
        let innovation = vec![
            vec![f(0.5), f(0.2), f(0.1)],
            vec![f(0.2), f(0.5), f(0.2)],
            vec![f(0.1), f(0.2), f(0.5)],
        ];
        FsvParams::new(
            loading,
            vec![f(0.5); 5],
            vec![f(0.9); 3],
            innovation,
            vec![T::zero(); 3],
        )
        .expect("bundled parameterization is valid")
    }

    pub fn series_count(&self) -> usize {
        self.loading.len()
    }

    pub fn factor_count(&self) -> usize {
        self.ar_coeff.len()
    }

    pub fn innovation_cov(&self) -> &[Vec<T>] {
        &self.innovation_cov
    }

    pub fn initial_state(&self) -> &[T] {
        &self.initial_state
    }

    /// Simulates `steps` transitions and observations from the model,
    /// returning the latent paths and the observations. Consumes a fixed
    /// 2K + M normals per step.
    pub fn simulate(&self, steps: usize, stream: &mut Stream<T>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let m = self.series_count();
        let k = self.factor_count();
        let mut x = self.initial_state.clone();
        let mut states = Vec::with_capacity(steps);
        let mut observations = Vec::with_capacity(steps);
        let mut next = vec![T::zero(); k];
        for _ in 0..steps {
            self.sample_transition_into(&x, &mut next, stream);
            x.copy_from_slice(&next);
            let factors: Vec<T> = x
                .iter()
                .map(|&xi| (xi * T::half()).exp() * stream.next_gaussian())
                .collect();
            let mut y = vec![T::zero(); m];
            for (a, ya) in y.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (j, &fj) in factors.iter().enumerate() {
                    acc = acc + self.loading[a][j] * fj;
                }
                *ya = acc + self.obs_var[a].sqrt() * stream.next_gaussian();
            }
            states.push(x.clone());
            observations.push(y);
        }
        (states, observations)
    }

    fn sample_transition_into(&self, prev: &[T], next: &mut [T], stream: &mut Stream<T>) {
        let k = self.factor_count();
        let mut z = [T::zero(); MAX_DIM];
        for zi in z.iter_mut().take(k) {
            *zi = stream.next_gaussian();
        }
        for i in 0..k {
            let mut acc = self.ar_coeff[i] * prev[i];
            for j in 0..=i {
                acc = acc + self.innovation_chol[i][j] * z[j];
            }
            next[i] = acc;
        }
    }
}

impl<T: Scalar> StateSpaceModel<T> for FsvParams<T> {
    fn state_dim(&self) -> usize {
        self.factor_count()
    }

    fn obs_dim(&self) -> usize {
        self.series_count()
    }

    /// The initial log-volatility is a known constant, so the filter starts
    /// from a point mass; no randomness is consumed.
    fn sample_initial(&self, _stream: &mut Stream<T>) -> Vec<T> {
        self.initial_state.clone()
    }

    fn sample_transition(&self, prev: &[T], next: &mut [T], stream: &mut Stream<T>) {
        self.sample_transition_into(prev, next, stream);
    }

    /// `log N(y; 0, B diag(exp(x)) B' + diag(psi))` through a Cholesky of the
    /// M x M covariance; the latent factors are marginalized analytically and
    /// never sampled.
    fn log_obs_density(&self, state: &[T], obs: &[T]) -> T {
        let m = self.series_count();
        let k = self.factor_count();
        debug_assert_eq!(state.len(), k);
        debug_assert_eq!(obs.len(), m);
        let mut h = [T::zero(); MAX_DIM];
        for (hk, &xk) in h.iter_mut().zip(state) {
            *hk = xk.exp();
        }
        let mut cov = [T::zero(); MAX_DIM * MAX_DIM];
        for a in 0..m {
            for b in 0..=a {
                let mut acc = T::zero();
                for j in 0..k {
                    acc = acc + self.loading[a][j] * self.loading[b][j] * h[j];
                }
                if a == b {
                    acc = acc + self.obs_var[a];
                }
                cov[a * m + b] = acc;
            }
        }
        // Positive observation variances make the covariance strictly
        // positive definite; failure here means the state blew up.
        assert!(
            cholesky_in_place(&mut cov[..m * m], m),
            "observation covariance lost positive definiteness"
        );
        let mut v = [T::zero(); MAX_DIM];
        v[..m].copy_from_slice(obs);
        forward_solve_in_place(&cov[..m * m], m, &mut v[..m]);
        let mut log_det_half = T::zero();
        let mut quad = T::zero();
        for i in 0..m {
            log_det_half = log_det_half + cov[i * m + i].ln();
            quad = quad + v[i] * v[i];
        }
        let mf = T::from_usize(m).expect("dimension fits scalar");
        -(mf * (T::two() * T::PI()).ln() + quad) * T::half() - log_det_half
    }
}
