//! Exact dense simulation: amplitudes, probabilities, multi-shot sampling,
//! and peakedness reports.
//!
//! Basis convention is little-endian: qubit 0 is the least-significant bit of
//! an amplitude index and the leftmost character of a printed bitstring.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use crate::bits::BitString;
use crate::circuit::{apply_single_qubit, apply_two_qubit, Circuit, GateList, GateOp};
use crate::error::{Error, Result};
use crate::linalg::u3_entries;

/// Default cap on dense qubit counts (16 MiB of amplitudes).
pub const DEFAULT_DENSE_CAP: usize = 20;

/// Peakedness ratio above which a circuit counts as peaked.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 10.0;

/// A dense 2^n_q statevector.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub n_q: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// |0…0⟩ on n_q qubits.
    pub fn zero_state(n_q: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_q];
        amps[0] = C64::new(1.0, 0.0);
        Self { n_q, amps }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, x: &BitString) -> C64 {
        self.amps[x.to_index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_block(&mut self, b: &crate::circuit::Block) -> Result<()> {
        let m = crate::circuit::block_matrix(b)?;
        let m4: &[C64; 16] = m.entries().try_into().unwrap();
        apply_two_qubit(&mut self.amps, b.pair.0, b.pair.1, m4);
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &GateOp) -> Result<()> {
        match g {
            GateOp::U3 { q, p } => {
                apply_single_qubit(&mut self.amps, *q, &u3_entries(*p));
            }
            GateOp::Cz { a, b } => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            GateOp::X { q } => {
                let mask = 1usize << q;
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            GateOp::GlobalPhase(phi) => {
                let s = C64::from_polar(1.0, *phi);
                for amp in self.amps.iter_mut() {
                    *amp *= s;
                }
            }
        }
        Ok(())
    }
}

/// Runs a block circuit from |0…0⟩ through the in-place 4×4 kernel.
pub fn run(c: &Circuit) -> Result<StateVector> {
    run_with_cap(c, DEFAULT_DENSE_CAP)
}

pub fn run_with_cap(c: &Circuit, cap: usize) -> Result<StateVector> {
    if c.n_q > cap {
        return Err(Error::ResourceLimit(format!(
            "dense backend capped at {cap} qubits, got {}",
            c.n_q
        )));
    }
    let mut s = StateVector::zero_state(c.n_q);
    for b in c.blocks_in_order() {
        s.apply_block(b)?;
    }
    Ok(s)
}

/// Runs a flat gate list from |0…0⟩.
pub fn run_gates(g: &GateList) -> Result<StateVector> {
    run_gates_with_cap(g, DEFAULT_DENSE_CAP)
}

pub fn run_gates_with_cap(g: &GateList, cap: usize) -> Result<StateVector> {
    if g.n_q > cap {
        return Err(Error::ResourceLimit(format!(
            "dense backend capped at {cap} qubits, got {}",
            g.n_q
        )));
    }
    let mut s = StateVector::zero_state(g.n_q);
    for gate in &g.gates {
        s.apply_gate(gate)?;
    }
    Ok(s)
}

/// |amplitude|² per basis index.
pub fn probabilities(s: &StateVector) -> Vec<f64> {
    s.amps.iter().map(|a| a.norm_sqr()).collect()
}

/// Multi-shot sampling via inverse CDF over the cumulative distribution.
/// Deterministic given the RNG state; total counts equal `shots`.
pub fn sample<R: Rng>(s: &StateVector, shots: u64, rng: &mut R) -> BTreeMap<String, u64> {
    let probs = probabilities(s);
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for _ in 0..shots {
        let r: f64 = rng.gen_range(0.0..total);
        let idx = cdf.partition_point(|&c| c <= r).min(probs.len() - 1);
        *counts
            .entry(BitString::from_index(idx, s.n_q).to_string())
            .or_insert(0) += 1;
    }
    counts
}

/// Which backend produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Direct,
    Mps,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Direct => write!(f, "direct"),
            Backend::Mps => write!(f, "mps"),
        }
    }
}

/// Shot count of a report, or "exact" for probability-based reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Count(u64),
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Count(n) => s.serialize_u64(*n),
        }
    }
}

fn serialize_ratio<S: serde::Serializer>(r: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if r.is_finite() {
        s.serialize_f64(*r)
    } else {
        s.serialize_str("inf")
    }
}

/// Peak statistics of a distribution: the top and second probabilities, their
/// ratio, and the peak verdict.
#[derive(Debug, Clone, Serialize)]
pub struct PeakednessReport {
    pub p_peak: f64,
    pub p_second: f64,
    /// p_peak / p_second; +∞ when the distribution has a single outcome
    /// (serialized as the string "inf").
    #[serde(serialize_with = "serialize_ratio")]
    pub ratio: f64,
    pub peak_string: String,
    pub shots: Shots,
    pub backend: Backend,
    pub is_peaked: bool,
}

/// Report from an exact probability array (index = basis state). Ties are
/// broken toward the lexicographically smaller bitstring.
pub fn peak_report_exact(
    probs: &[f64],
    n_q: usize,
    threshold: f64,
    backend: Backend,
) -> Result<PeakednessReport> {
    if probs.is_empty() {
        return Err(Error::invalid("peak report needs a nonempty distribution"));
    }
    let key = |i: usize| BitString::from_index(i, n_q).to_string();
    let mut peak = 0usize;
    for i in 1..probs.len() {
        if probs[i] > probs[peak] + f64::EPSILON
            || ((probs[i] - probs[peak]).abs() <= f64::EPSILON && key(i) < key(peak))
        {
            peak = i;
        }
    }
    let p_peak = probs[peak];
    let mut p_second = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if i != peak && p > p_second {
            p_second = p;
        }
    }
    Ok(finish_report(p_peak, p_second, key(peak), Shots::Exact, backend, threshold))
}

/// Report from a counts map (bitstring → occurrences).
pub fn peak_report_counts(
    counts: &BTreeMap<String, u64>,
    threshold: f64,
    backend: Backend,
) -> Result<PeakednessReport> {
    if counts.is_empty() {
        return Err(Error::invalid("peak report needs a nonempty counts map"));
    }
    let shots: u64 = counts.values().sum();
    // BTreeMap iterates keys in lexicographic order, so strict > implements
    // the smaller-string tie-break.
    let (mut peak_s, mut peak_c) = ("", 0u64);
    for (s, &c) in counts {
        if c > peak_c {
            peak_s = s;
            peak_c = c;
        }
    }
    let mut second_c = 0u64;
    for (s, &c) in counts {
        if s != peak_s && c > second_c {
            second_c = c;
        }
    }
    let tot = shots as f64;
    Ok(finish_report(
        peak_c as f64 / tot,
        second_c as f64 / tot,
        peak_s.to_string(),
        Shots::Count(shots),
        backend,
        threshold,
    ))
}

fn finish_report(
    p_peak: f64,
    p_second: f64,
    peak_string: String,
    shots: Shots,
    backend: Backend,
    threshold: f64,
) -> PeakednessReport {
    let ratio = if p_second > 0.0 { p_peak / p_second } else { f64::INFINITY };
    PeakednessReport {
        p_peak,
        p_second,
        ratio,
        peak_string,
        shots,
        backend,
        is_peaked: ratio >= threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_mirror, circuit_unitary, generate_random_half, Block};
    use crate::linalg::U3Params;
    use crate::testutil;
    use std::f64::consts::PI;

    #[test]
    fn empty_circuit_leaves_zero_state() {
        let c = Circuit { n_q: 3.max(2), half_depth: 0, layers: vec![], metadata: None };
        let s = run(&c).unwrap();
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn zero_angle_block_is_identity_on_state() {
        let c = Circuit {
            n_q: 4,
            half_depth: 1,
            layers: vec![vec![Block::identity((0, 1)), Block::identity((2, 3))]],
            metadata: None,
        };
        let s = run(&c).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn run_matches_dense_matrix_oracle() {
        let mut rng = testutil::rng(31);
        for n_q in [4usize, 6] {
            let c = build_mirror(&generate_random_half(n_q, 2, &mut rng).unwrap()).unwrap();
            let s = run(&c).unwrap();
            let u = circuit_unitary(&c).unwrap();
            for (i, amp) in s.amplitudes().iter().enumerate() {
                assert!((amp - u.at(i, 0)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn norm_is_preserved() {
        let mut rng = testutil::rng(37);
        let c = build_mirror(&generate_random_half(8, 4, &mut rng).unwrap()).unwrap();
        let s = run(&c).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() <= 1e-12 * c.total_blocks() as f64);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let c = Circuit { n_q: 22, half_depth: 0, layers: vec![], metadata: None };
        assert!(matches!(run(&c), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn probabilities_of_uniform_h_layer() {
        // three H gates on three qubits: all eight probabilities 1/8
        let h = U3Params::new(PI / 2.0, 0.0, PI);
        let g = GateList {
            n_q: 3,
            gates: (0..3).map(|q| GateOp::U3 { q, p: h }).collect(),
        };
        let s = run_gates(&g).unwrap();
        let probs = probabilities(&s);
        assert_eq!(probs.len(), 8);
        for p in &probs {
            assert!((p - 0.125).abs() <= 1e-12);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn probabilities_match_modulus_squared_oracle() {
        let mut rng = testutil::rng(41);
        let c = build_mirror(&generate_random_half(4, 2, &mut rng).unwrap()).unwrap();
        let s = run(&c).unwrap();
        let probs = probabilities(&s);
        for (p, a) in probs.iter().zip(s.amplitudes()) {
            let want = a.re * a.re + a.im * a.im;
            assert!((p - want).abs() <= 1e-16);
        }
    }

    #[test]
    fn sampling_deterministic_state() {
        let s = StateVector::zero_state(4);
        let mut rng = testutil::rng(43);
        let counts = sample(&s, 1000, &mut rng);
        assert_eq!(counts.len(), 1);
        assert_eq!(counts["0000"], 1000);
    }

    #[test]
    fn sampling_uniform_two_qubits_within_binomial_bound() {
        let h = U3Params::new(PI / 2.0, 0.0, PI);
        let g = GateList {
            n_q: 2,
            gates: vec![GateOp::U3 { q: 0, p: h }, GateOp::U3 { q: 1, p: h }],
        };
        let s = run_gates(&g).unwrap();
        let mut rng = testutil::rng(47);
        let counts = sample(&s, 100_000, &mut rng);
        let total: u64 = counts.values().sum();
        assert_eq!(total, 100_000);
        for c in counts.values() {
            let dev = (*c as f64 - 25_000.0).abs();
            assert!(dev <= 700.0, "count deviated by {dev}");
        }
    }

    #[test]
    fn peak_report_arithmetic() {
        let mut counts = BTreeMap::new();
        counts.insert("00".to_string(), 900u64);
        counts.insert("01".to_string(), 90);
        counts.insert("10".to_string(), 10);
        let r = peak_report_counts(&counts, DEFAULT_PEAK_THRESHOLD, Backend::Direct).unwrap();
        assert_eq!(r.peak_string, "00");
        assert!((r.ratio - 10.0).abs() <= 1e-12);
        assert!(r.is_peaked);
        assert_eq!(r.shots, Shots::Count(1000));
    }

    #[test]
    fn peak_report_single_outcome_is_inf() {
        let probs = vec![0.0, 1.0, 0.0, 0.0];
        let r = peak_report_exact(&probs, 2, DEFAULT_PEAK_THRESHOLD, Backend::Direct).unwrap();
        assert_eq!(r.peak_string, "10"); // index 1 = qubit 0 set
        assert!(r.ratio.is_infinite());
        assert!(r.is_peaked);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"ratio\": \"inf\"") || json.contains("\"ratio\":\"inf\""));
    }

    #[test]
    fn peak_report_uniform_is_not_peaked() {
        let probs = vec![0.25; 4];
        let r = peak_report_exact(&probs, 2, DEFAULT_PEAK_THRESHOLD, Backend::Direct).unwrap();
        assert_eq!(r.peak_string, "00"); // lexicographic tie-break
        assert!((r.ratio - 1.0).abs() <= 1e-12);
        assert!(!r.is_peaked);
    }

    #[test]
    fn global_phase_gate_keeps_probabilities() {
        let g = GateList {
            n_q: 2,
            gates: vec![
                GateOp::U3 { q: 0, p: U3Params::new(0.7, 0.1, -0.4) },
                GateOp::GlobalPhase(1.234),
            ],
        };
        let s = run_gates(&g).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}
