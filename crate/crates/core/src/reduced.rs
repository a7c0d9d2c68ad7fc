//! Closed-form angles and the exact three-dimensional reduced model.
//!
//! With a single marked item, every state reachable from the uniform
//! superposition by oracle, global diffusion and local diffusion lives in
//! the span of three unit vectors: the target `|t>`, the uniform
//! superposition `|ntt>` of the other items in the target's block, and the
//! uniform superposition `|u>` over all other blocks. In that ordered basis
//! the global Grover step is a 3x3 orthogonal matrix of determinant -1 and
//! the local step is a rotation by `2*theta_m` about the `|u>` axis, so a
//! whole sequence reduces to a fold of 3x3 products regardless of `n`.
//!
//! All angles are computed as `asin` of exact powers of `2^(-1/2)`; nothing
//! is accumulated iteratively.

use crate::error::{Error, Result};
use crate::sequence::{OperatorSequence, Step};

/// A half-angle `theta_k = asin(2^(-k/2))` for a `k`-qubit scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    radians: f64,
}

impl Angle {
    pub fn radians(self) -> f64 {
        self.radians
    }
}

/// `2^(-k/2)` with one rounding: exact power of two for even `k`, exact
/// power of two times `sqrt(2)` for odd `k`.
fn amplitude(k: u32) -> f64 {
    if k % 2 == 0 {
        2f64.powi(-((k / 2) as i32))
    } else {
        2f64.powi(-((k / 2 + 1) as i32)) * std::f64::consts::SQRT_2
    }
}

/// The rotation half-angle `theta_k = asin(2^(-k/2))` of a `k`-qubit scope.
pub fn angle(qubits: u32) -> Result<Angle> {
    if qubits < 1 {
        return Err(Error::invalid("qubit count must be at least 1"));
    }
    Ok(Angle {
        radians: amplitude(qubits).asin(),
    })
}

/// Iteration count maximizing the plain search success probability:
/// the integer nearest to `pi/(4*theta_n) - 1/2`.
pub fn k_opt(n: u32) -> Result<u32> {
    let theta = angle(n)?.radians();
    Ok((std::f64::consts::FRAC_PI_4 / theta - 0.5).round() as u32)
}

/// Success probability of `k` plain Grover iterations on `n` qubits:
/// `sin^2((2k+1) * theta_n)`.
pub fn grover_success(n: u32, iterations: u32) -> Result<f64> {
    let theta = angle(n)?.radians();
    Ok(((2 * iterations + 1) as f64 * theta).sin().powi(2))
}

/// Real amplitudes on the ordered basis `(|t>, |ntt>, |u>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    /// Amplitude on the target item.
    pub a_t: f64,
    /// Amplitude on the uniform non-target remainder of the target block.
    pub a_ntt: f64,
    /// Amplitude on the uniform superposition over all other blocks.
    pub a_u: f64,
}

impl ReducedState {
    pub fn new(a_t: f64, a_ntt: f64, a_u: f64) -> Self {
        Self { a_t, a_ntt, a_u }
    }

    pub fn norm(&self) -> f64 {
        (self.a_t * self.a_t + self.a_ntt * self.a_ntt + self.a_u * self.a_u).sqrt()
    }

    /// Probability of measuring the target item.
    pub fn success(&self) -> f64 {
        self.a_t * self.a_t
    }

    /// Probability of measuring any item of the target block.
    pub fn partial_success(&self) -> f64 {
        1.0 - self.a_u * self.a_u
    }
}

/// A 3x3 real matrix acting on [`ReducedState`] vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedOperator {
    mat: [[f64; 3]; 3],
}

impl ReducedOperator {
    pub fn from_rows(mat: [[f64; 3]; 3]) -> Self {
        Self { mat }
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.mat[row][col]
    }

    pub fn apply(&self, s: ReducedState) -> ReducedState {
        let v = [s.a_t, s.a_ntt, s.a_u];
        let mut out = [0.0; 3];
        for (r, row) in self.mat.iter().enumerate() {
            out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
        ReducedState::new(out[0], out[1], out[2])
    }

    /// Matrix product `self * first`; `first` acts on the state first.
    pub fn compose(&self, first: &Self) -> Self {
        let mut mat = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                mat[r][c] = (0..3).map(|k| self.mat[r][k] * first.mat[k][c]).sum();
            }
        }
        Self { mat }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.mat;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of `M^T M - I`; zero for an exactly orthogonal matrix.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                let dot: f64 = (0..3).map(|k| self.mat[k][r] * self.mat[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((self.mat[r][c] - other.mat[r][c]).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// The global Grover step `-D_n O_t` on the reduced basis. Requires
/// `m < n`: at `m = n` the `|u>` direction has no support and the basis
/// degenerates (use [`grover_success`] instead).
pub fn reduced_global(n: u32, m: u32) -> Result<ReducedOperator> {
    check_scopes(n, m)?;
    let (s, c) = sin_cos(n - m)?;
    let (sm, cm) = sin_cos(m)?;
    Ok(ReducedOperator::from_rows([
        [
            1.0 - 2.0 * s * s * sm * sm,
            2.0 * s * s * sm * cm,
            2.0 * s * c * sm,
        ],
        [
            -2.0 * s * s * sm * cm,
            2.0 * s * s * cm * cm - 1.0,
            2.0 * s * c * cm,
        ],
        [-2.0 * s * c * sm, 2.0 * s * c * cm, 2.0 * c * c - 1.0],
    ]))
}

/// The local Grover step `-D_{n,m} O_t` on the reduced basis: a rotation by
/// `2*theta_m` in the `|t>`-`|ntt>` plane that fixes `|u>` exactly.
pub fn reduced_local(m: u32) -> Result<ReducedOperator> {
    let theta = angle(m)?.radians();
    let (s2, c2) = (2.0 * theta).sin_cos();
    Ok(ReducedOperator::from_rows([
        [c2, s2, 0.0],
        [-s2, c2, 0.0],
        [0.0, 0.0, 1.0],
    ]))
}

/// The uniform superposition expressed on the reduced basis.
pub fn initial_reduced_state(n: u32, m: u32) -> Result<ReducedState> {
    check_scopes(n, m)?;
    let (s, c) = sin_cos(n - m)?;
    let (sm, cm) = sin_cos(m)?;
    Ok(ReducedState::new(s * sm, s * cm, c))
}

/// Apply a sequence to a state, first step first.
pub fn apply_sequence(seq: &OperatorSequence, state: ReducedState) -> Result<ReducedState> {
    let global = reduced_global(seq.n(), seq.m())?;
    let local = reduced_local(seq.m())?;
    Ok(seq.steps().iter().fold(state, |s, step| match step {
        Step::Global => global.apply(s),
        Step::Local => local.apply(s),
    }))
}

/// States after each step of a sequence, starting from the uniform
/// superposition; entry 0 is the initial state.
pub fn trajectory(seq: &OperatorSequence) -> Result<Vec<ReducedState>> {
    let global = reduced_global(seq.n(), seq.m())?;
    let local = reduced_local(seq.m())?;
    let mut states = Vec::with_capacity(seq.steps().len() + 1);
    let mut s = initial_reduced_state(seq.n(), seq.m())?;
    states.push(s);
    for step in seq.steps() {
        s = match step {
            Step::Global => global.apply(s),
            Step::Local => local.apply(s),
        };
        states.push(s);
    }
    Ok(states)
}

/// Probability that the sequence, run from the uniform superposition,
/// measures the target item.
pub fn success_full(seq: &OperatorSequence) -> Result<f64> {
    let state = apply_sequence(seq, initial_reduced_state(seq.n(), seq.m())?)?;
    Ok(state.success())
}

/// Probability that the sequence measures any item of the target block,
/// i.e. finds the block label.
pub fn success_partial(seq: &OperatorSequence) -> Result<f64> {
    let state = apply_sequence(seq, initial_reduced_state(seq.n(), seq.m())?)?;
    Ok(state.partial_success())
}

fn check_scopes(n: u32, m: u32) -> Result<()> {
    if m < 1 || m >= n {
        Err(Error::invalid(format!(
            "reduced model needs 1 <= m < n, got n = {n}, m = {m}"
        )))
    } else {
        Ok(())
    }
}

fn sin_cos(k: u32) -> Result<(f64, f64)> {
    let theta = angle(k)?.radians();
    Ok((theta.sin(), theta.cos()))
}
