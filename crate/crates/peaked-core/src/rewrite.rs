//! Gate-level rewriting: NOT-gate propagation for hidden-string embedding,
//! merging of adjacent U3 pairs, and the double-peak entangler.
//!
//! Every angle-transforming rule here is an exact matrix identity under the
//! fixed U3 convention. The registry re-verifies all of them numerically the
//! first time a rewrite runs, so a convention drift cannot slip through
//! silently.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::bits::BitString;
use crate::circuit::{Block, Circuit, Layout};
use crate::error::{Error, Result};
use crate::linalg::{u3_matrix, zyz_decompose, U3Params, UnitaryMatrix};

/// Which side of a U3 (as a matrix product) a Pauli sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Which leg of a two-qubit gate carries a propagating Pauli.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    First,
    Second,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::First => Leg::Second,
            Leg::Second => Leg::First,
        }
    }
}

/// A NOT or Z gate in flight during propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingGate {
    pub kind: PendingKind,
    pub qubit: usize,
    /// (layer, intra-block slot) cursor of the gate's current position.
    pub position: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendingKind {
    X,
    Z,
}

/// X·U3(θ,φ,λ) = e^{i(φ+λ)} · U3(θ, π−φ, π−λ) · X.
///
/// Equivalently U3·X = X·U3′·e^{i(φ+λ)}: pushing a pending X forward through
/// a U3 replaces the angles and leaves the X on the far side.
pub fn rule_x_left_of_u3(p: U3Params) -> (U3Params, f64) {
    (
        U3Params::new(p.theta, PI - p.phi, PI - p.lambda),
        p.phi + p.lambda,
    )
}

/// U3(θ,φ,λ)·X = e^{i(λ+π)} · U3(π−θ, φ−π, −λ): absorbs a pending X into the
/// following U3, leaving no X behind.
///
/// This is the oracle-derived replacement for the right-commutation relation;
/// the printed form does not hold under the fixed U3 convention.
pub fn rule_x_right_of_u3(p: U3Params) -> (U3Params, f64) {
    (
        U3Params::new(PI - p.theta, p.phi - PI, -p.lambda),
        p.lambda + PI,
    )
}

/// CZ·X_t = X_t·Z_o·CZ (exact integer identity): a pending X crossing a CZ
/// stays on its leg and spawns a Z on the other leg, both now after the CZ.
pub fn rule_x_through_cz(target: Leg) -> (Leg, Leg) {
    (target, target.other())
}

/// Z absorption: Z·U3(θ,φ,λ) = U3(θ, φ+π, λ) and U3(θ,φ,λ)·Z = U3(θ, φ, λ+π).
pub fn absorb_z_into_u3(p: U3Params, side: Side) -> U3Params {
    match side {
        Side::Left => U3Params::new(p.theta, p.phi + PI, p.lambda),
        Side::Right => U3Params::new(p.theta, p.phi, p.lambda + PI),
    }
}

// ---------------------------------------------------------------------------
// Rule registry with numerical self-verification.
// ---------------------------------------------------------------------------

/// A named rewrite rule with a residual check: the producer's matrix must
/// equal the matcher's matrix (including the tracked phase) on random inputs.
pub struct RewriteRule {
    pub name: &'static str,
    /// Worst Frobenius residual over a batch of random samples.
    residual: fn(&mut ChaCha12Rng) -> f64,
}

impl RewriteRule {
    pub fn name(&self) -> &'static str {
        self.name
    }
}

fn x2() -> UnitaryMatrix {
    u3_matrix(U3Params::new(PI, 0.0, PI)).unwrap()
}

fn z2() -> UnitaryMatrix {
    u3_matrix(U3Params::new(0.0, PI, 0.0)).unwrap()
}

fn phase(alpha: f64) -> num_complex::Complex64 {
    num_complex::Complex64::from_polar(1.0, alpha)
}

fn residual_x_left(rng: &mut ChaCha12Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = crate::testutil::random_u3(rng);
        let (p2, a) = rule_x_left_of_u3(p);
        let lhs = x2().matmul(&u3_matrix(p).unwrap());
        let rhs = u3_matrix(p2).unwrap().matmul(&x2()).scale(phase(a));
        worst = worst.max(lhs.frobenius_distance(&rhs));
    }
    worst
}

fn residual_x_right(rng: &mut ChaCha12Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = crate::testutil::random_u3(rng);
        let (p2, a) = rule_x_right_of_u3(p);
        let lhs = u3_matrix(p).unwrap().matmul(&x2());
        let rhs = u3_matrix(p2).unwrap().scale(phase(a));
        worst = worst.max(lhs.frobenius_distance(&rhs));
    }
    worst
}

fn residual_x_through_cz(_rng: &mut ChaCha12Rng) -> f64 {
    // exact ±1 matrices: the identity holds with zero residual
    let c = |v: f64| num_complex::Complex64::new(v, 0.0);
    let x = UnitaryMatrix::from_raw(2, vec![c(0.0), c(1.0), c(1.0), c(0.0)]);
    let z = UnitaryMatrix::from_raw(2, vec![c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let cz = crate::linalg::cz_matrix();
    let i2 = UnitaryMatrix::identity(2);
    let mut worst: f64 = 0.0;
    for leg in [Leg::First, Leg::Second] {
        // first leg of the pair indexes the low bit
        let on = |l: Leg, g: &UnitaryMatrix| match l {
            Leg::First => i2.kron(g),
            Leg::Second => g.kron(&i2),
        };
        let (x_leg, z_leg) = rule_x_through_cz(leg);
        let lhs = cz.matmul(&on(leg, &x));
        let rhs = on(x_leg, &x).matmul(&on(z_leg, &z)).matmul(&cz);
        worst = worst.max(lhs.frobenius_distance(&rhs));
    }
    worst
}

fn residual_z_absorb(rng: &mut ChaCha12Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = crate::testutil::random_u3(rng);
        let left = u3_matrix(absorb_z_into_u3(p, Side::Left)).unwrap();
        let right = u3_matrix(absorb_z_into_u3(p, Side::Right)).unwrap();
        let u = u3_matrix(p).unwrap();
        worst = worst.max(z2().matmul(&u).frobenius_distance(&left));
        worst = worst.max(u.matmul(&z2()).frobenius_distance(&right));
    }
    worst
}

/// The rule registry. [`verify_registry`] is run once before any rewrite
/// executes; a failing rule aborts with an error rather than silently
/// corrupting circuits.
pub fn registry() -> &'static [RewriteRule] {
    &[
        RewriteRule { name: "x-left-of-u3", residual: residual_x_left },
        RewriteRule { name: "x-right-of-u3", residual: residual_x_right },
        RewriteRule { name: "x-through-cz", residual: residual_x_through_cz },
        RewriteRule { name: "z-absorb", residual: residual_z_absorb },
    ]
}

const RULE_TOL: f64 = 1e-12;

/// Verifies every registered rule numerically (cached after the first call).
pub fn verify_registry() -> Result<()> {
    static CHECKED: OnceLock<std::result::Result<(), String>> = OnceLock::new();
    CHECKED
        .get_or_init(|| {
            let mut rng = ChaCha12Rng::seed_from_u64(0x7ea5_ed00);
            for rule in registry() {
                let r = (rule.residual)(&mut rng);
                if !(r <= RULE_TOL) {
                    return Err(format!(
                        "rewrite rule '{}' failed self-verification: residual {r:.3e}",
                        rule.name
                    ));
                }
            }
            Ok(())
        })
        .clone()
        .map_err(Error::InvalidArgument)
}

// ---------------------------------------------------------------------------
// Hidden-string embedding.
// ---------------------------------------------------------------------------

/// Embeds `x_hid` by inserting an X at the circuit start for every set bit
/// and pushing it forward to a uniformly random stopping gate within the
/// first half, where it is absorbed into a U3. Z gates spawned at CZ
/// crossings are absorbed into the next U3 on their wire. The output contains
/// only U3/CZ gates in the original brick-wall shape, and its unitary equals
/// (input unitary)·(X layer for x_hid) exactly, with phases tracked per
/// block.
pub fn embed_hidden_string<R: Rng>(c: &Circuit, x_hid: &BitString, rng: &mut R) -> Result<Circuit> {
    if x_hid.len() != c.n_q {
        return Err(Error::invalid(format!(
            "hidden string length {} does not match n_q = {}",
            x_hid.len(),
            c.n_q
        )));
    }
    if !c.is_full_mirror_shape() {
        return Err(Error::invalid(
            "embed_hidden_string expects the full mirrored circuit from build_mirror",
        ));
    }
    verify_registry()?;
    let mut out = c.clone();
    let half = c.half_depth;
    for q in 0..c.n_q {
        if !x_hid.bit(q) {
            continue;
        }
        // wire slots in the first half: per block, alternating u3/cz columns
        let mut slots_per_layer = Vec::with_capacity(half);
        for layer in 0..half {
            let bi = out.block_on_wire(layer, q).ok_or_else(|| {
                Error::invalid(format!("layer {layer} has no block on wire {q}"))
            })?;
            slots_per_layer.push((bi, 2 * out.layers[layer][bi].layout.columns() - 1));
        }
        let total: usize = slots_per_layer.iter().map(|&(_, s)| s).sum();
        let stop = rng.gen_range(0..total);

        let mut pos = 0usize;
        let mut absorbed = false;
        'walk: for layer in 0..half {
            let (bi, n_slots) = slots_per_layer[layer];
            for slot in 0..n_slots {
                let block = &mut out.layers[layer][bi];
                if slot % 2 == 0 {
                    let idx = block.slot(slot / 2, q);
                    if pos >= stop {
                        let (p2, ph) = rule_x_right_of_u3(block.angles[idx]);
                        block.angles[idx] = p2;
                        block.phase += ph;
                        absorbed = true;
                        break 'walk;
                    }
                    let (p2, ph) = rule_x_left_of_u3(block.angles[idx]);
                    block.angles[idx] = p2;
                    block.phase += ph;
                } else {
                    // CZ crossing: Z spawns on the partner wire, absorbed into
                    // the partner's U3 in the next column
                    let partner = block.partner(q);
                    let zidx = block.slot(slot / 2 + 1, partner);
                    block.angles[zidx] = absorb_z_into_u3(block.angles[zidx], Side::Right);
                }
                pos += 1;
            }
        }
        debug_assert!(absorbed, "X must be absorbed within the first half");
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Adjacent-U3 merging.
// ---------------------------------------------------------------------------

/// Merges every pair of U3s that meet at a layer boundary on the same wire:
/// the product is assigned to the later block's leading U3 (ZYZ phase folded
/// into that block's phase) and the earlier block's trailing U3 becomes the
/// identity. The circuit unitary is preserved exactly.
pub fn merge_adjacent_u3(c: &Circuit) -> Result<Circuit> {
    let mut out = c.clone();
    for layer in 1..out.layers.len() {
        for bi in 0..out.layers[layer].len() {
            let pair = out.layers[layer][bi].pair;
            for wire in [pair.0, pair.1] {
                let Some(pi) = out.block_on_wire(layer - 1, wire) else {
                    continue;
                };
                let earlier = &out.layers[layer - 1][pi];
                let trail_idx = earlier.slot(earlier.trailing_column(), wire);
                let trail = earlier.angles[trail_idx];
                let later = &out.layers[layer][bi];
                let lead_idx = later.slot(0, wire);
                let lead = later.angles[lead_idx];

                let prod = u3_matrix(lead)?.matmul(&u3_matrix(trail)?);
                let (merged, gamma) = zyz_decompose(&prod)?;

                out.layers[layer][bi].angles[lead_idx] = merged;
                out.layers[layer][bi].phase += gamma;
                out.layers[layer - 1][pi].angles[trail_idx] = U3Params::ZERO;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Double-peak entangler.
// ---------------------------------------------------------------------------

/// Prepends the Bell-forming entangler on a first-layer pair and absorbs it
/// into that block, upgrading it to the extended-3cz layout.
///
/// The entangler applies H to both wires, a CZ, then H to the pair's second
/// wire; it maps |00⟩ to (|00⟩ + |11⟩)/√2, so the output distribution has two
/// peaks: x_hid and x_hid with the pair's bits flipped.
pub fn insert_entangler(c: &Circuit, pair: (usize, usize)) -> Result<Circuit> {
    verify_registry()?;
    let Some(bi) = c.layers.first().and_then(|layer| {
        layer.iter().position(|b| {
            (b.pair.0 == pair.0 && b.pair.1 == pair.1) || (b.pair.0 == pair.1 && b.pair.1 == pair.0)
        })
    }) else {
        return Err(Error::invalid(format!(
            "({}, {}) is not a first-layer block pair",
            pair.0, pair.1
        )));
    };
    let mut out = c.clone();
    let block = &mut out.layers[0][bi];
    if block.layout != Layout::Standard2Cz {
        return Err(Error::UnsupportedLayout(format!(
            "entangler absorption requires a standard first-layer block, got {:?}",
            block.layout
        )));
    }
    let h = U3Params::new(PI / 2.0, 0.0, PI);
    // merge the trailing H (on the pair's second wire, after the new CZ) into
    // the block's old leading U3 on that wire
    let prod = u3_matrix(block.angles[1])?.matmul(&u3_matrix(h)?);
    let (merged, gamma) = zyz_decompose(&prod)?;
    let old = block.angles.clone();
    block.angles = vec![h, h, old[0], merged, old[2], old[3], old[4], old[5]];
    block.layout = Layout::Extended3Cz;
    block.phase += gamma;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_mirror, circuit_unitary, generate_random_half};
    use crate::linalg::distance_up_to_phase;
    use crate::testutil;
    use num_complex::Complex64 as C64;

    #[test]
    fn registry_passes_self_verification() {
        verify_registry().unwrap();
        assert_eq!(registry().len(), 4);
    }

    #[test]
    fn x_left_identity_case() {
        let (p, a) = rule_x_left_of_u3(U3Params::ZERO);
        assert_eq!((p.theta, p.phi, p.lambda), (0.0, PI, PI));
        assert_eq!(a, 0.0);
        // both sides equal X
        let rhs = u3_matrix(p).unwrap().matmul(&x2()).scale(phase(a));
        assert!(rhs.frobenius_distance(&x2()) <= 1e-15);
    }

    #[test]
    fn x_left_worked_example() {
        let (p, a) = rule_x_left_of_u3(U3Params::new(PI / 2.0, 0.3, -0.7));
        assert!((p.theta - PI / 2.0).abs() < 1e-15);
        assert!((p.phi - (PI - 0.3)).abs() < 1e-15);
        assert!((p.lambda - (PI + 0.7)).abs() < 1e-15);
        assert!((a - (-0.4)).abs() < 1e-15);
        let lhs = x2().matmul(&u3_matrix(U3Params::new(PI / 2.0, 0.3, -0.7)).unwrap());
        let rhs = u3_matrix(p).unwrap().matmul(&x2()).scale(phase(a));
        assert!(lhs.frobenius_distance(&rhs) <= 1e-15);
    }

    #[test]
    fn x_left_applied_twice_restores_up_to_phase() {
        let mut rng = testutil::rng(61);
        for _ in 0..100 {
            let p = testutil::random_u3(&mut rng);
            let (p1, _) = rule_x_left_of_u3(p);
            let (p2, _) = rule_x_left_of_u3(p1);
            let d = distance_up_to_phase(&u3_matrix(p2).unwrap(), &u3_matrix(p).unwrap()).unwrap();
            assert!(d <= 1e-12);
        }
    }

    #[test]
    fn x_right_self_inverse_and_identity_cases() {
        // (π,0,π) is X itself: X·X must come out proportional to the identity
        let (p, a) = rule_x_right_of_u3(U3Params::new(PI, 0.0, PI));
        let m = u3_matrix(p).unwrap().scale(phase(a));
        assert!(m.frobenius_distance(&UnitaryMatrix::identity(2)) <= 1e-15);

        // identity U3: the result must be proportional to X
        let (p, a) = rule_x_right_of_u3(U3Params::ZERO);
        let m = u3_matrix(p).unwrap().scale(phase(a));
        assert!(m.frobenius_distance(&x2()) <= 1e-15);
    }

    #[test]
    fn x_right_random_residuals() {
        let mut rng = testutil::rng(67);
        for _ in 0..1000 {
            let p = testutil::random_u3(&mut rng);
            let (p2, a) = rule_x_right_of_u3(p);
            let lhs = u3_matrix(p).unwrap().matmul(&x2());
            let rhs = u3_matrix(p2).unwrap().scale(phase(a));
            assert!(lhs.frobenius_distance(&rhs) <= 1e-12);
        }
    }

    #[test]
    fn x_through_cz_exact_and_statevector() {
        assert!(residual_x_through_cz(&mut testutil::rng(0)) == 0.0);

        // random product state, both orderings agree
        let mut rng = testutil::rng(71);
        let cz = crate::linalg::cz_matrix();
        let i2 = UnitaryMatrix::identity(2);
        let x_low = i2.kron(&x2());
        let z_high = z2().kron(&i2);
        for _ in 0..50 {
            let amp: Vec<C64> = (0..4)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let apply = |m: &UnitaryMatrix, v: &[C64]| -> Vec<C64> {
                (0..4)
                    .map(|i| (0..4).map(|j| m.at(i, j) * v[j]).sum())
                    .collect()
            };
            let lhs = apply(&x_low, &apply(&cz, &amp));
            let rhs = apply(&cz, &apply(&z_high, &apply(&x_low, &amp)));
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn z_absorption_examples() {
        let p = absorb_z_into_u3(U3Params::ZERO, Side::Left);
        assert!(u3_matrix(p).unwrap().frobenius_distance(&z2()) <= 1e-15);

        // right absorption on X: X·Z via 2×2 oracle
        let p = absorb_z_into_u3(U3Params::new(PI, 0.0, PI), Side::Right);
        let want = u3_matrix(U3Params::new(PI, 0.0, PI)).unwrap().matmul(&z2());
        assert!(u3_matrix(p).unwrap().frobenius_distance(&want) <= 1e-15);
        assert!((p.lambda - 2.0 * PI).abs() < 1e-15);

        // left twice is the identity transformation up to phase
        let mut rng = testutil::rng(73);
        let q = testutil::random_u3(&mut rng);
        let twice = absorb_z_into_u3(absorb_z_into_u3(q, Side::Left), Side::Left);
        let d =
            distance_up_to_phase(&u3_matrix(twice).unwrap(), &u3_matrix(q).unwrap()).unwrap();
        assert!(d <= 1e-12);
    }

    /// Dense oracle: embedding must multiply the circuit unitary by the X
    /// layer of the hidden string (exactly, since phases are tracked).
    #[test]
    fn embed_matches_unitary_times_x_layer() {
        let mut rng = testutil::rng(83);
        for (n_q, n_l) in [(4usize, 2usize), (6, 2), (6, 3)] {
            let full = build_mirror(&generate_random_half(n_q, n_l, &mut rng).unwrap()).unwrap();
            let x_hid = BitString::from_index(rng.gen_range(0..(1usize << n_q)), n_q);
            let embedded = embed_hidden_string(&full, &x_hid, &mut rng).unwrap();

            let u_in = circuit_unitary(&full).unwrap();
            let u_out = circuit_unitary(&embedded).unwrap();
            // X layer for x_hid
            let dim = 1usize << n_q;
            let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
            for j in 0..dim {
                amps[(j ^ x_hid.to_index()) * dim + j] = C64::new(1.0, 0.0);
            }
            let x_layer = UnitaryMatrix::from_raw(dim, amps);
            let want = u_in.matmul(&x_layer);
            assert!(
                u_out.frobenius_distance(&want) <= 1e-8,
                "embedding defect at ({n_q}, {n_l})"
            );
        }
    }

    #[test]
    fn embed_zero_string_is_identity_transform() {
        let mut rng = testutil::rng(89);
        let full = build_mirror(&generate_random_half(4, 2, &mut rng).unwrap()).unwrap();
        let out = embed_hidden_string(&full, &BitString::zeros(4), &mut rng).unwrap();
        assert_eq!(out, full);
    }

    #[test]
    fn embed_rejects_length_mismatch() {
        let mut rng = testutil::rng(89);
        let full = build_mirror(&generate_random_half(4, 2, &mut rng).unwrap()).unwrap();
        assert!(embed_hidden_string(&full, &BitString::zeros(6), &mut rng).is_err());
    }

    #[test]
    fn embed_keeps_brick_wall_shape() {
        let mut rng = testutil::rng(97);
        let full = build_mirror(&generate_random_half(6, 4, &mut rng).unwrap()).unwrap();
        let x_hid: BitString = "101101".parse().unwrap();
        let out = embed_hidden_string(&full, &x_hid, &mut rng).unwrap();
        out.validate().unwrap();
        assert_eq!(out.layers.len(), full.layers.len());
        for (a, b) in full.blocks_in_order().zip(out.blocks_in_order()) {
            assert_eq!(a.pair, b.pair);
            assert_eq!(a.layout, b.layout);
        }
    }

    #[test]
    fn merge_identity_pair_gives_identity() {
        let mut rng = testutil::rng(101);
        let full = build_mirror(&generate_random_half(4, 1, &mut rng).unwrap()).unwrap();
        // zero out everything: merging two identity U3s must stay identity
        let mut c = full.clone();
        for layer in &mut c.layers {
            for b in layer {
                b.angles = vec![U3Params::ZERO; 6];
            }
        }
        let merged = merge_adjacent_u3(&c).unwrap();
        for b in merged.blocks_in_order() {
            for p in &b.angles {
                assert!(p.theta.abs() < 1e-12 && p.phi.abs() < 1e-12 && p.lambda.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_same_axis_rotations_add() {
        // U3(a,0,0)·U3(b,0,0) = U3(a+b,0,0)
        let (a, b) = (0.4, 0.9);
        let prod = u3_matrix(U3Params::new(a, 0.0, 0.0))
            .unwrap()
            .matmul(&u3_matrix(U3Params::new(b, 0.0, 0.0)).unwrap());
        let (m, gamma) = zyz_decompose(&prod).unwrap();
        assert!(gamma.abs() < 1e-12);
        assert!((m.theta - (a + b)).abs() < 1e-12);
        assert!(m.phi.abs() < 1e-12 && m.lambda.abs() < 1e-12);
    }

    #[test]
    fn merge_preserves_circuit_unitary() {
        let mut rng = testutil::rng(103);
        for (n_q, n_l) in [(4usize, 2usize), (6, 3)] {
            let full = build_mirror(&generate_random_half(n_q, n_l, &mut rng).unwrap()).unwrap();
            let x_hid = BitString::from_index(rng.gen_range(0..(1usize << n_q)), n_q);
            let embedded = embed_hidden_string(&full, &x_hid, &mut rng).unwrap();
            let merged = merge_adjacent_u3(&embedded).unwrap();
            let d = distance_up_to_phase(
                &circuit_unitary(&merged).unwrap(),
                &circuit_unitary(&embedded).unwrap(),
            )
            .unwrap();
            assert!(d <= 1e-9, "merge changed the unitary by {d:.3e}");

            // trailing U3s of non-final layers are identities afterwards
            for (l, layer) in merged.layers.iter().enumerate() {
                if l + 1 == merged.layers.len() {
                    continue;
                }
                for blk in layer {
                    for wire in [blk.pair.0, blk.pair.1] {
                        if merged.block_on_wire(l + 1, wire).is_some() {
                            let idx = blk.slot(blk.trailing_column(), wire);
                            assert_eq!(blk.angles[idx], U3Params::ZERO);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn entangler_bell_toy() {
        // 2-qubit toy circuit: a single identity block, x_hid = 00
        let c = Circuit {
            n_q: 2,
            half_depth: 1,
            layers: vec![vec![Block::identity((0, 1))]],
            metadata: None,
        };
        let out = insert_entangler(&c, (0, 1)).unwrap();
        assert_eq!(out.layers[0][0].layout, Layout::Extended3Cz);
        let u = circuit_unitary(&out).unwrap();
        // E|00⟩ = (|00⟩ + |11⟩)/√2
        let a0 = u.at(0, 0).norm_sqr();
        let a3 = u.at(3, 0).norm_sqr();
        assert!((a0 - 0.5).abs() <= 1e-9);
        assert!((a3 - 0.5).abs() <= 1e-9);
        assert!(u.at(1, 0).norm() <= 1e-12 && u.at(2, 0).norm() <= 1e-12);
    }

    #[test]
    fn entangler_rejects_non_first_layer_pair() {
        let mut rng = testutil::rng(107);
        let full = build_mirror(&generate_random_half(6, 2, &mut rng).unwrap()).unwrap();
        assert!(insert_entangler(&full, (1, 2)).is_err());
        assert!(insert_entangler(&full, (0, 1)).is_ok());
    }
}
