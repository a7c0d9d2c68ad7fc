//! Brute-force 2^n amplitude simulator.
//!
//! Every operator in scope (oracle, global diffusion, partial diffusion and
//! the overall sign of a Grover step) is a real reflection, so amplitudes
//! stay real. This backend is the independent oracle for the reduced model:
//! the two are cross-checked entry-for-entry, with signs.
//!
//! Index convention: basis state `j` spells the item's bits with qubit 0 as
//! the most significant bit, so the high `n-m` bits of `j` are the block
//! label and each block occupies a contiguous run of `2^m` amplitudes. The
//! local diffusion acts on the low `m` bits, matching circuits that put the
//! partial diffusion on the bottom wires.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{SearchParams, DEFAULT_N_CAP};
use crate::reduced::ReducedState;
use crate::sequence::{OperatorSequence, Step};

const DUMP_MAGIC: [u8; 4] = *b"GSVD";

/// Real amplitudes over all 2^n items.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: u32,
    amp: Vec<f64>,
}

impl StateVector {
    /// The uniform superposition, capped at [`DEFAULT_N_CAP`] qubits.
    pub fn uniform(n: u32) -> Result<Self> {
        Self::uniform_with_cap(n, DEFAULT_N_CAP)
    }

    /// The uniform superposition under an explicit qubit cap.
    pub fn uniform_with_cap(n: u32, cap: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("qubit count must be at least 1"));
        }
        if n > cap {
            return Err(Error::ResourceLimit(format!(
                "n = {n} exceeds the state-vector cap of {cap} qubits"
            )));
        }
        Ok(Self::uniform_unchecked(n))
    }

    fn uniform_unchecked(n: u32) -> Self {
        let len = 1usize << n;
        let amp = vec![(len as f64).sqrt().recip(); len];
        Self { n, amp }
    }

    /// `|prefix> (x) |s_m>`: uniform over one block, zero elsewhere.
    pub fn block_uniform(n: u32, m: u32, prefix: u64) -> Result<Self> {
        if n < 1 || m < 1 || m > n {
            return Err(Error::invalid(format!(
                "block_uniform needs 1 <= m <= n, got n = {n}, m = {m}"
            )));
        }
        if prefix >> (n - m) != 0 {
            return Err(Error::invalid(format!(
                "block prefix {prefix} does not fit in {} bits",
                n - m
            )));
        }
        let len = 1usize << n;
        let block = 1usize << m;
        let mut amp = vec![0.0; len];
        let value = (block as f64).sqrt().recip();
        let start = (prefix as usize) << m;
        amp[start..start + block].fill(value);
        Ok(Self { n, amp })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.amp.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amp
    }

    pub fn probability(&self, index: u64) -> f64 {
        let a = self.amp[index as usize];
        a * a
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a * a).sum()
    }

    /// Flip the sign of the target amplitude: the oracle reflection.
    pub fn apply_oracle(&mut self, target: u64) -> Result<()> {
        if target >> self.n != 0 {
            return Err(Error::invalid(format!(
                "target {target} out of range for {} qubits",
                self.n
            )));
        }
        self.amp[target as usize] = -self.amp[target as usize];
        Ok(())
    }

    /// Reflect about the per-block mean over the low `scope_m` qubits;
    /// `scope_m = n` is the global diffusion.
    pub fn apply_diffusion(&mut self, scope_m: u32) -> Result<()> {
        if scope_m < 1 || scope_m > self.n {
            return Err(Error::invalid(format!(
                "diffusion scope {scope_m} out of range for {} qubits",
                self.n
            )));
        }
        let block = 1usize << scope_m;
        for chunk in self.amp.chunks_exact_mut(block) {
            let mean: f64 = chunk.iter().sum::<f64>() / block as f64;
            let shift = 2.0 * mean;
            for a in chunk.iter_mut() {
                *a -= shift;
            }
        }
        Ok(())
    }

    /// Negate every amplitude (the minus sign of `G = -D O`). Keeping the
    /// sign makes the trajectories match the reduced model entry-for-entry,
    /// not only in squared magnitude.
    pub fn negate(&mut self) {
        for a in self.amp.iter_mut() {
            *a = -*a;
        }
    }

    /// One Grover step: oracle, diffusion over `scope_m` qubits, sign flip.
    pub fn grover_step(&mut self, target: u64, scope_m: u32) -> Result<()> {
        self.apply_oracle(target)?;
        self.apply_diffusion(scope_m)?;
        self.negate();
        Ok(())
    }

    /// Measurement statistics of the top `prefix_bits` qubits.
    pub fn measure_prefix(&self, prefix_bits: u32) -> Result<PrefixMeasurement> {
        if prefix_bits == 0 || prefix_bits >= self.n {
            return Err(Error::invalid(format!(
                "prefix width {prefix_bits} must satisfy 0 < width < n = {}",
                self.n
            )));
        }
        let block = 1usize << (self.n - prefix_bits);
        let probabilities = self
            .amp
            .chunks_exact(block)
            .map(|c| c.iter().map(|a| a * a).sum())
            .collect();
        Ok(PrefixMeasurement {
            prefix_bits,
            probabilities,
        })
    }

    /// The state after observing `outcome` on the top `prefix_bits` qubits,
    /// renormalized inside the surviving block.
    pub fn collapse_prefix(&self, prefix_bits: u32, outcome: u64) -> Result<StateVector> {
        let measurement = self.measure_prefix(prefix_bits)?;
        if outcome as usize >= measurement.probabilities.len() {
            return Err(Error::invalid(format!(
                "prefix outcome {outcome} does not fit in {prefix_bits} bits"
            )));
        }
        let p = measurement.probabilities[outcome as usize];
        if p == 0.0 {
            return Err(Error::ZeroProbabilityPrefix { prefix: outcome });
        }
        let block = 1usize << (self.n - prefix_bits);
        let start = outcome as usize * block;
        let scale = p.sqrt().recip();
        let mut amp = vec![0.0; self.amp.len()];
        for (dst, src) in amp[start..start + block].iter_mut().zip(&self.amp[start..]) {
            *dst = src * scale;
        }
        Ok(StateVector { n: self.n, amp })
    }

    /// Draw one full measurement outcome from the Born distribution.
    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for (i, a) in self.amp.iter().enumerate() {
            acc += a * a;
            if r < acc {
                return i as u64;
            }
        }
        self.amp.len() as u64 - 1
    }

    /// Signed projections onto the reduced basis for the target's instance.
    /// Requires `m < n` (otherwise `|u>` has no support).
    pub fn reduced_projection(&self, m: u32, target: u64) -> Result<ReducedState> {
        if m < 1 || m >= self.n {
            return Err(Error::invalid(format!(
                "projection needs 1 <= m < n, got n = {}, m = {m}",
                self.n
            )));
        }
        if target >> self.n != 0 {
            return Err(Error::invalid("target out of range".to_string()));
        }
        let block = 1usize << m;
        let start = (target as usize >> m) << m;
        let a_t = self.amp[target as usize];
        let block_sum: f64 = self.amp[start..start + block].iter().sum();
        let rest_sum: f64 = self.amp.iter().sum::<f64>() - block_sum;
        let a_ntt = if block > 1 {
            (block_sum - a_t) / ((block - 1) as f64).sqrt()
        } else {
            0.0
        };
        let a_u = rest_sum / ((self.amp.len() - block) as f64).sqrt();
        Ok(ReducedState::new(a_t, a_ntt, a_u))
    }

    /// Binary dump: magic `GSVD`, little-endian u32 qubit count, then the
    /// amplitudes as little-endian f64.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&DUMP_MAGIC)?;
        w.write_all(&self.n.to_le_bytes())?;
        for a in &self.amp {
            w.write_all(&a.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<StateVector> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != DUMP_MAGIC {
            return Err(Error::invalid("bad state-vector dump magic".to_string()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word);
        if n < 1 || n > DEFAULT_N_CAP {
            return Err(Error::invalid(format!("dump qubit count {n} out of range")));
        }
        let mut amp = Vec::with_capacity(1usize << n);
        let mut buf = [0u8; 8];
        for _ in 0..1usize << n {
            r.read_exact(&mut buf)?;
            amp.push(f64::from_le_bytes(buf));
        }
        Ok(StateVector { n, amp })
    }
}

/// Measurement statistics of a prefix register: one probability per block.
#[derive(Debug, Clone)]
pub struct PrefixMeasurement {
    prefix_bits: u32,
    probabilities: Vec<f64>,
}

impl PrefixMeasurement {
    pub fn prefix_bits(&self) -> u32 {
        self.prefix_bits
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, prefix: u64) -> f64 {
        self.probabilities[prefix as usize]
    }
}

/// Run a sequence from the uniform superposition: per step, oracle then
/// diffusion (scope `m` for local steps, `n` for global) then sign flip.
pub fn run_sequence(params: &SearchParams, seq: &OperatorSequence) -> Result<StateVector> {
    if params.n() != seq.n() || params.m() != seq.m() {
        return Err(Error::invalid(format!(
            "sequence is for (n,m) = ({},{}), instance is ({},{})",
            seq.n(),
            seq.m(),
            params.n(),
            params.m()
        )));
    }
    let mut state = StateVector::uniform_unchecked(params.n());
    for step in seq.steps() {
        let scope = match step {
            Step::Global => params.n(),
            Step::Local => params.m(),
        };
        state.grover_step(params.target(), scope)?;
    }
    Ok(state)
}

/// Run both backends and return the largest deviation between them: the
/// three signed basis amplitudes plus the block probability against
/// `1 - a_u^2`.
pub fn crosscheck(params: &SearchParams, seq: &OperatorSequence) -> Result<f64> {
    if params.m() >= params.n() {
        return Err(Error::invalid("crosscheck needs m < n".to_string()));
    }
    let reduced = crate::reduced::apply_sequence(
        seq,
        crate::reduced::initial_reduced_state(params.n(), params.m())?,
    )?;
    let state = run_sequence(params, seq)?;
    let projected = state.reduced_projection(params.m(), params.target())?;
    let block_prob = state
        .measure_prefix(params.n() - params.m())?
        .probability(params.target_prefix());
    let deviations = [
        (projected.a_t - reduced.a_t).abs(),
        (projected.a_ntt - reduced.a_ntt).abs(),
        (projected.a_u - reduced.a_u).abs(),
        (block_prob - reduced.partial_success()).abs(),
    ];
    Ok(deviations.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn seq(text: &str) -> OperatorSequence {
        text.parse().unwrap()
    }

    #[test]
    fn uniform_amplitudes() {
        let s = StateVector::uniform(1).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        let s = StateVector::uniform(2).unwrap();
        assert!(s.amplitudes().iter().all(|&a| a == 0.5));
        let s = StateVector::uniform(10).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0], 0.03125, epsilon = 1e-15);
        assert!(StateVector::uniform(25).is_err());
        assert!(StateVector::uniform_with_cap(25, 25).is_ok());
    }

    #[test]
    fn oracle_definition_and_involution() {
        let mut s = StateVector::uniform(2).unwrap();
        s.apply_oracle(3).unwrap();
        assert_eq!(s.amplitudes(), &[0.5, 0.5, 0.5, -0.5]);
        s.apply_oracle(3).unwrap();
        assert_eq!(s.amplitudes(), StateVector::uniform(2).unwrap().amplitudes());
        assert!(s.apply_oracle(4).is_err());
    }

    #[test]
    fn oracle_expectation_on_uniform() {
        // <s|O_t|s> = 1 - 2^(1-n).
        for n in 3..=8u32 {
            let uniform = StateVector::uniform(n).unwrap();
            let mut reflected = uniform.clone();
            reflected.apply_oracle(1).unwrap();
            let dot: f64 = uniform
                .amplitudes()
                .iter()
                .zip(reflected.amplitudes())
                .map(|(a, b)| a * b)
                .sum();
            assert_abs_diff_eq!(dot, 1.0 - 2f64.powi(1 - n as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn diffusion_reflects_uniform_states() {
        let mut s = StateVector::uniform(4).unwrap();
        s.apply_diffusion(4).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(*a, -0.25, epsilon = 1e-15);
        }
        // Each block of |s_4> is locally uniform, so D_{4,2} also negates it.
        let mut s = StateVector::uniform(4).unwrap();
        s.apply_diffusion(2).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(*a, -0.25, epsilon = 1e-15);
        }
        assert!(s.apply_diffusion(0).is_err());
        assert!(s.apply_diffusion(5).is_err());
    }

    #[test]
    fn diffusion_involution() {
        let mut s = StateVector::uniform(5).unwrap();
        // Scramble with a few steps first.
        s.grover_step(7, 5).unwrap();
        s.grover_step(7, 2).unwrap();
        let before = s.clone();
        s.apply_diffusion(3).unwrap();
        s.apply_diffusion(3).unwrap();
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_step_exact_for_two_qubits() {
        for target in 0..4 {
            let params = SearchParams::new(2, 2, target).unwrap();
            let out = run_sequence(&params, &seq("S(2,2;1)")).unwrap();
            assert_abs_diff_eq!(out.probability(target), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn four_qubit_deterministic_sequence() {
        for target in [0u64, 5, 15] {
            let params = SearchParams::new(4, 2, target).unwrap();
            let out = run_sequence(&params, &seq("S(4,2;1,1,2)")).unwrap();
            assert_abs_diff_eq!(out.probability(target), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_probability_matches_published_two_stage_cell() {
        let params = SearchParams::new(6, 2, 0b010111).unwrap();
        let out = run_sequence(&params, &seq("S(6,2;1,1,3,1)")).unwrap();
        let block = out.measure_prefix(4).unwrap().probability(params.target_prefix());
        assert_abs_diff_eq!(block, 0.9999949, epsilon = 1e-7);
    }

    #[test]
    fn prefix_measurement_uniform() {
        let m = StateVector::uniform(4).unwrap().measure_prefix(2).unwrap();
        for p in m.probabilities() {
            assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn disassembled_first_stage_finds_block_deterministically() {
        // G4 G2 G2 (steps LLG) leaves the block register exactly on t1.
        for target in 0..16u64 {
            let params = SearchParams::new(4, 2, target).unwrap();
            let out = run_sequence(&params, &seq("S(4,2;1,2)")).unwrap();
            let m = out.measure_prefix(2).unwrap();
            assert_abs_diff_eq!(m.probability(params.target_prefix()), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn prefix_probability_equals_partial_success() {
        for text in ["S(5,2;1,1,1,1)", "S(6,3;1,1,2,1,2)", "S(7,2;1,1,6,0)"] {
            let s = seq(text);
            let params = SearchParams::new(s.n(), s.m(), 3).unwrap();
            let out = run_sequence(&params, &s).unwrap();
            let block = out
                .measure_prefix(s.n() - s.m())
                .unwrap()
                .probability(params.target_prefix());
            let partial = crate::reduced::success_partial(&s).unwrap();
            assert_abs_diff_eq!(block, partial, epsilon = 1e-10);
        }
    }

    #[test]
    fn collapse_rejects_zero_probability_prefix() {
        let s = StateVector::block_uniform(4, 2, 1).unwrap();
        let collapsed = s.collapse_prefix(2, 1).unwrap();
        assert_abs_diff_eq!(collapsed.norm_sqr(), 1.0, epsilon = 1e-12);
        match s.collapse_prefix(2, 2) {
            Err(Error::ZeroProbabilityPrefix { prefix }) => assert_eq!(prefix, 2),
            other => panic!("expected zero-probability error, got {other:?}"),
        }
    }

    #[test]
    fn local_diffusion_preserves_block_mass() {
        let params = SearchParams::new(6, 2, 9).unwrap();
        let mut state = run_sequence(&params, &seq("S(6,2;1,1,1)")).unwrap();
        let before = state.measure_prefix(4).unwrap();
        // Oracle-free local step: block masses must not move.
        state.apply_diffusion(2).unwrap();
        state.negate();
        let after = state.measure_prefix(4).unwrap();
        for (b, a) in before.probabilities().iter().zip(after.probabilities()) {
            assert_abs_diff_eq!(b, a, epsilon = 1e-12);
        }
    }

    #[test]
    fn success_independent_of_target() {
        for n in [4u32, 5] {
            let s = OperatorSequence::parse_steps("LGLG", n, 2).unwrap();
            let reference = {
                let params = SearchParams::new(n, 2, 0).unwrap();
                run_sequence(&params, &s).unwrap().probability(0)
            };
            for target in 0..1u64 << n {
                let params = SearchParams::new(n, 2, target).unwrap();
                let p = run_sequence(&params, &s).unwrap().probability(target);
                assert!(
                    (p - reference).abs() < 1e-12,
                    "n={n} target={target}: {p} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn crosscheck_small_deviation() {
        let params = SearchParams::new(6, 3, 12).unwrap();
        assert!(crosscheck(&params, &seq("S(6,3;0)")).unwrap() < 1e-12);
        for n in 3..=10u32 {
            let params = SearchParams::new(n, 1, 1).unwrap();
            let k = crate::reduced::k_opt(n).unwrap();
            let s = OperatorSequence::from_tuple(n, 1, &[k, 0]).unwrap();
            assert!(crosscheck(&params, &s).unwrap() <= 1e-10, "n={n}");
        }
    }

    #[test]
    fn unitarity_over_random_steps() {
        let mut rng = StdRng::seed_from_u64(2024);
        let mut state = StateVector::uniform(7).unwrap();
        for _ in 0..200 {
            let scope = rng.random_range(1..=7);
            let target = rng.random_range(0..128);
            state.grover_step(target, scope).unwrap();
            assert_abs_diff_eq!(state.norm_sqr(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn dump_round_trip() {
        let params = SearchParams::new(5, 2, 17).unwrap();
        let state = run_sequence(&params, &seq("S(5,2;1,1,1,1)")).unwrap();
        let mut buf = Vec::new();
        state.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GSVD");
        assert_eq!(buf.len(), 8 + 32 * 8);
        let loaded = StateVector::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, state);

        buf[0] = b'X';
        assert!(StateVector::read_from(&mut buf.as_slice()).is_err());
    }
}
