//! Mid-circuit-measurement protocols and their closed-form analytics.
//!
//! A two-stage run first applies an interleaved sequence with local scope
//! `m` and measures the top `n-m` qubits, obtaining a block label. The low
//! qubits are then re-prepared in the uniform state `|s_m>` and a fixed
//! deterministic search finishes the job: one local Grover step for `m = 2`,
//! or the rescaled deterministic 4-qubit sequence (scopes 2,2,4,2) for
//! `m = 4`. Because the second stage is exact whenever the measured label is
//! right, the overall success probability equals the first stage's
//! block-finding probability.
//!
//! The wrong-label branch is modeled exactly rather than as an abstract
//! failure: with no target in the prepared block the oracle never fires and
//! the second stage returns the block to `|a> (x) |s_m>`, so the suffix
//! measurement is uniform and classical verification fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SearchParams;
use crate::reduced::{angle, k_opt, success_partial};
use crate::sequence::OperatorSequence;
use crate::statevector::{run_sequence, StateVector};

/// Shots per random-stream chunk. Serial and parallel runs iterate the same
/// chunks with the same per-chunk streams, so they agree bit for bit.
pub const SHOT_CHUNK: u64 = 4096;

/// The fixed deterministic second stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecondStage {
    /// One local Grover step on the low two qubits.
    #[serde(rename = "G2")]
    Grover2,
    /// The deterministic 4-qubit sequence rescaled onto the low four
    /// qubits: local scopes 2,2,4,2 in application order.
    #[serde(rename = "S(4,2;1,1,2)")]
    Rescaled4,
}

impl SecondStage {
    pub fn for_scope(m: u32) -> Result<Self> {
        match m {
            2 => Ok(SecondStage::Grover2),
            4 => Ok(SecondStage::Rescaled4),
            other => Err(Error::invalid(format!(
                "no deterministic second stage for scope m = {other} (supported: 2, 4)"
            ))),
        }
    }

    pub fn scope(self) -> u32 {
        match self {
            SecondStage::Grover2 => 2,
            SecondStage::Rescaled4 => 4,
        }
    }

    /// Oracle queries the stage spends.
    pub fn oracle_cost(self) -> u32 {
        match self {
            SecondStage::Grover2 => 1,
            SecondStage::Rescaled4 => 4,
        }
    }

    /// Diffusion scopes of the stage's steps, in application order.
    pub fn scopes(self) -> &'static [u32] {
        match self {
            SecondStage::Grover2 => &[2],
            SecondStage::Rescaled4 => &[2, 2, 4, 2],
        }
    }
}

/// A first-stage sequence plus the matching deterministic second stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStagePlan {
    n: u32,
    m: u32,
    first_stage: OperatorSequence,
    second_stage: SecondStage,
    total_oracles: u32,
}

/// Pair a first stage with the deterministic second stage for its scope.
pub fn compose(first_stage: OperatorSequence, m: u32) -> Result<TwoStagePlan> {
    let second_stage = SecondStage::for_scope(m)?;
    if first_stage.m() != m {
        return Err(Error::invalid(format!(
            "first stage has local scope {}, second stage needs {m}",
            first_stage.m()
        )));
    }
    if first_stage.n() <= m {
        return Err(Error::invalid(format!(
            "two-stage search needs n > m, got n = {}, m = {m}",
            first_stage.n()
        )));
    }
    let total_oracles = first_stage.oracle_count() + second_stage.oracle_cost();
    Ok(TwoStagePlan {
        n: first_stage.n(),
        m,
        first_stage,
        second_stage,
        total_oracles,
    })
}

impl TwoStagePlan {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn first_stage(&self) -> &OperatorSequence {
        &self.first_stage
    }

    pub fn second_stage(&self) -> SecondStage {
        self.second_stage
    }

    pub fn total_oracles(&self) -> u32 {
        self.total_oracles
    }
}

impl Serialize for TwoStagePlan {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct FirstStage<'a> {
            tuple_form: &'a str,
            step_string: &'a str,
        }
        let tuple_form = self.first_stage.tuple_form();
        let step_string = self.first_stage.step_string();
        let mut st = serializer.serialize_struct("TwoStagePlan", 5)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field(
            "first_stage",
            &FirstStage {
                tuple_form: &tuple_form,
                step_string: &step_string,
            },
        )?;
        st.serialize_field("second_stage", &self.second_stage)?;
        st.serialize_field("total_oracles", &self.total_oracles)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for TwoStagePlan {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct FirstStageDoc {
            tuple_form: Option<String>,
            step_string: Option<String>,
        }
        #[derive(Deserialize)]
        struct PlanDoc {
            n: u32,
            m: u32,
            first_stage: FirstStageDoc,
            second_stage: SecondStage,
            total_oracles: Option<u32>,
        }
        let doc = PlanDoc::deserialize(deserializer)?;
        plan_from_doc(doc.n, doc.m, doc.first_stage.tuple_form, doc.first_stage.step_string, doc.second_stage, doc.total_oracles)
            .map_err(serde::de::Error::custom)
    }
}

fn plan_from_doc(
    n: u32,
    m: u32,
    tuple_form: Option<String>,
    step_string: Option<String>,
    second_stage: SecondStage,
    total_oracles: Option<u32>,
) -> Result<TwoStagePlan> {
    let first_stage = match (tuple_form, step_string) {
        (Some(tuple), _) => {
            let seq = OperatorSequence::parse_tuple(&tuple)?;
            if seq.n() != n || seq.m() != m {
                return Err(Error::invalid(format!(
                    "first stage {tuple} disagrees with plan scopes (n = {n}, m = {m})"
                )));
            }
            seq
        }
        (None, Some(steps)) => OperatorSequence::parse_steps(&steps, n, m)?,
        (None, None) => {
            return Err(Error::invalid(
                "plan first_stage needs a tuple_form or a step_string",
            ))
        }
    };
    if second_stage.scope() != m {
        return Err(Error::invalid(format!(
            "second stage {second_stage:?} does not act on m = {m} qubits"
        )));
    }
    let plan = compose(first_stage, m)?;
    if let Some(total) = total_oracles {
        if total != plan.total_oracles {
            return Err(Error::invalid(format!(
                "plan claims {total} oracles, stages sum to {}",
                plan.total_oracles
            )));
        }
    }
    Ok(plan)
}

/// Overall success probability of a plan: the second stage is
/// deterministic, so this is the first stage's block-finding probability.
pub fn two_stage_success(plan: &TwoStagePlan) -> Result<f64> {
    success_partial(&plan.first_stage)
}

/// Closed-form failure probability of a two-stage run whose first stage is
/// the plain search `S(n,m;k_opt,0)`:
/// `cos^2((2 k_opt + 1) theta_n) * cos^2(theta_{n-m}) / cos^2(theta_n)`.
pub fn grover_first_stage_failure(n: u32, m: u32) -> Result<f64> {
    if m < 1 || m >= n {
        return Err(Error::invalid(format!(
            "failure formula needs 1 <= m < n, got n = {n}, m = {m}"
        )));
    }
    let theta_n = angle(n)?.radians();
    let theta_rest = angle(n - m)?.radians();
    let iterations = k_opt(n)?;
    let overshoot = ((2 * iterations + 1) as f64 * theta_n).cos().powi(2);
    Ok(overshoot * theta_rest.cos().powi(2) / theta_n.cos().powi(2))
}

/// Success-probability gain of the universal strategy (plain search as a
/// partial search, deterministic second stage): `(2^m - 1)/(2^n - 1)`.
pub fn universal_delta(n: u32, m: u32) -> Result<f64> {
    if !(m == 2 || m == 4) || m >= n {
        return Err(Error::invalid(format!(
            "universal strategy needs m in {{2, 4}} and m < n, got n = {n}, m = {m}"
        )));
    }
    Ok(((1u64 << m) - 1) as f64 / ((1u64 << n) - 1) as f64)
}

/// Run the second stage from a freshly prepared `|prefix> (x) |s_m>`.
pub fn second_stage_state(plan: &TwoStagePlan, prefix: u64, target: u64) -> Result<StateVector> {
    let mut state = StateVector::block_uniform(plan.n, plan.m, prefix)?;
    for &scope in plan.second_stage.scopes() {
        state.grover_step(target, scope)?;
    }
    Ok(state)
}

/// Outcome of one guess-and-verify protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunOutcome {
    pub measured_bits: u64,
    pub verified: bool,
    pub quantum_oracle_calls: u32,
    pub classical_oracle_calls: u32,
}

/// The 3-qubit guess-and-verify protocol: prepare the top qubit in a
/// guessed basis state, run one local Grover step on the low pair, verify
/// the full measurement classically, and retry once with the flipped guess
/// on failure. Finds the target with certainty in at most two quantum
/// oracle queries; classical verifications are counted separately.
pub fn multiprogram_n3(target: u64, first_guess: u64, rng: &mut impl Rng) -> Result<RunOutcome> {
    if target >= 8 {
        return Err(Error::invalid("multiprogramming instance is 3 qubits".to_string()));
    }
    if first_guess > 1 {
        return Err(Error::invalid("guess must be a single bit".to_string()));
    }
    let mut quantum_oracle_calls = 0;
    let mut classical_oracle_calls = 0;
    let mut measured_bits = 0;
    for attempt in 0..2u64 {
        let guess = first_guess ^ attempt;
        let mut state = StateVector::block_uniform(3, 2, guess)?;
        state.grover_step(target, 2)?;
        quantum_oracle_calls += 1;
        measured_bits = state.sample(rng);
        classical_oracle_calls += 1;
        if measured_bits == target {
            return Ok(RunOutcome {
                measured_bits,
                verified: true,
                quantum_oracle_calls,
                classical_oracle_calls,
            });
        }
    }
    // Unreachable for a correct simulator: the second guess is the block.
    Ok(RunOutcome {
        measured_bits,
        verified: false,
        quantum_oracle_calls,
        classical_oracle_calls,
    })
}

/// Monte-Carlo shot report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotReport {
    pub shots: u64,
    pub seed: u64,
    pub verified: u64,
    pub verified_fraction: f64,
    /// Analytic overall success probability of the plan.
    pub expected: f64,
    /// Binomial standard deviation of the fraction, `sqrt(p(1-p)/shots)`.
    pub sigma: f64,
    /// Shots per random-stream chunk (see [`SHOT_CHUNK`]).
    pub chunk_size: u64,
}

impl ShotReport {
    pub fn within_sigmas(&self, sigmas: f64) -> bool {
        (self.verified_fraction - self.expected).abs() <= sigmas * self.sigma
    }
}

/// Sample a full two-stage run `shots` times and report the fraction of
/// classically verified outcomes.
pub fn simulate_end_to_end(
    plan: &TwoStagePlan,
    target: u64,
    shots: u64,
    seed: u64,
) -> Result<ShotReport> {
    simulate_with(plan, target, shots, seed, cfg!(feature = "parallel"))
}

/// Serial reference implementation of [`simulate_end_to_end`].
pub fn simulate_end_to_end_serial(
    plan: &TwoStagePlan,
    target: u64,
    shots: u64,
    seed: u64,
) -> Result<ShotReport> {
    simulate_with(plan, target, shots, seed, false)
}

fn simulate_with(
    plan: &TwoStagePlan,
    target: u64,
    shots: u64,
    seed: u64,
    parallel: bool,
) -> Result<ShotReport> {
    if shots < 1 {
        return Err(Error::invalid("shot count must be at least 1"));
    }
    let sampler = ShotSampler::build(plan, target)?;
    let expected = two_stage_success(plan)?;

    let chunks: Vec<(u64, u64)> = (0..shots.div_ceil(SHOT_CHUNK))
        .map(|c| (c, SHOT_CHUNK.min(shots - c * SHOT_CHUNK)))
        .collect();

    #[cfg(feature = "parallel")]
    let verified: u64 = if parallel {
        use rayon::prelude::*;
        chunks
            .par_iter()
            .map(|&(index, count)| sampler.run_chunk(seed, index, count))
            .sum()
    } else {
        chunks
            .iter()
            .map(|&(index, count)| sampler.run_chunk(seed, index, count))
            .sum()
    };
    #[cfg(not(feature = "parallel"))]
    let verified: u64 = {
        let _ = parallel;
        chunks
            .iter()
            .map(|&(index, count)| sampler.run_chunk(seed, index, count))
            .sum()
    };

    let fraction = verified as f64 / shots as f64;
    Ok(ShotReport {
        shots,
        seed,
        verified,
        verified_fraction: fraction,
        expected,
        sigma: (expected * (1.0 - expected) / shots as f64).sqrt(),
        chunk_size: SHOT_CHUNK,
    })
}

/// Precomputed measurement distributions for fast shot sampling. The
/// first-stage prefix distribution comes from the state-vector run; the
/// second-stage suffix distributions are simulated once for the correct
/// block and once for a representative wrong block (all wrong blocks are
/// equivalent: the oracle never fires in them).
struct ShotSampler {
    m: u32,
    target: u64,
    target_prefix: u64,
    prefix_cdf: Vec<f64>,
    right_suffix_cdf: Vec<f64>,
    wrong_suffix_cdf: Vec<f64>,
}

impl ShotSampler {
    fn build(plan: &TwoStagePlan, target: u64) -> Result<Self> {
        let params = SearchParams::new(plan.n, plan.m, target)?;
        let prefix_bits = plan.n - plan.m;
        let after_first = run_sequence(&params, &plan.first_stage)?;
        let prefix_cdf = cumulative(after_first.measure_prefix(prefix_bits)?.probabilities());

        let target_prefix = params.target_prefix();
        let wrong_prefix = if target_prefix == 0 { 1 } else { 0 };
        let right_suffix_cdf = cumulative(&suffix_probabilities(
            &second_stage_state(plan, target_prefix, target)?,
            plan.m,
            target_prefix,
        ));
        let wrong_suffix_cdf = cumulative(&suffix_probabilities(
            &second_stage_state(plan, wrong_prefix, target)?,
            plan.m,
            wrong_prefix,
        ));
        Ok(Self {
            m: plan.m,
            target,
            target_prefix,
            prefix_cdf,
            right_suffix_cdf,
            wrong_suffix_cdf,
        })
    }

    fn run_chunk(&self, seed: u64, chunk_index: u64, count: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk_index);
        let mut verified = 0;
        for _ in 0..count {
            let prefix = draw(&self.prefix_cdf, &mut rng) as u64;
            let suffix_cdf = if prefix == self.target_prefix {
                &self.right_suffix_cdf
            } else {
                &self.wrong_suffix_cdf
            };
            let suffix = draw(suffix_cdf, &mut rng) as u64;
            let measured = prefix << self.m | suffix;
            verified += u64::from(measured == self.target);
        }
        verified
    }
}

fn suffix_probabilities(state: &StateVector, m: u32, prefix: u64) -> Vec<f64> {
    let block = 1usize << m;
    let start = (prefix as usize) << m;
    state.amplitudes()[start..start + block]
        .iter()
        .map(|a| a * a)
        .collect()
}

fn cumulative(probabilities: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probabilities
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let r: f64 = rng.random();
    cdf.partition_point(|&c| c <= r).min(cdf.len() - 1)
}
