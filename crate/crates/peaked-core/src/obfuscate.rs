//! Mirror-half obfuscation: derivative-free re-synthesis of blocks to a
//! target deviation δ (breaking the mirror symmetry), plus tail-group
//! reduction for shrinking the mirror half by a layer.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::circuit::{apply_two_qubit, Block, Circuit, Layout};
use crate::error::{Error, Result};
use crate::linalg::{
    deviation16, kron2, mat4_cz_left, mat4_mul, normalize_angle, u3_entries, Deviation, Mat4,
    U3Params, UnitaryMatrix, MAT4_ID,
};
use crate::optimize::{minimize, OptimizerConfig};

/// Per-block deviations of an obfuscated mirror half plus their aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationStats {
    /// δ̃_i for every mirror block, in application order.
    pub per_block: Vec<f64>,
    /// δ: arithmetic mean of `per_block`.
    pub mean: f64,
    pub max: f64,
}

impl DeviationStats {
    pub fn from_per_block(per_block: Vec<f64>) -> Self {
        let mean = if per_block.is_empty() {
            0.0
        } else {
            per_block.iter().sum::<f64>() / per_block.len() as f64
        };
        let max = per_block.iter().fold(0.0f64, |a, &b| a.max(b));
        Self { per_block, mean, max }
    }
}

/// Result of a single block re-synthesis.
#[derive(Debug, Clone)]
pub struct Resynthesis {
    /// Standard-layout block (phase 0) approximating the target matrix.
    pub block: Block,
    /// Exactly deviation(block_matrix(block), target).
    pub achieved: Deviation,
    /// Largest circular angle distance to the provided original set, if any.
    pub param_distance: Option<f64>,
    pub evaluations: usize,
}

#[inline]
fn block4_from_angles(x: &[f64]) -> Mat4 {
    debug_assert_eq!(x.len() % 6, 0);
    let mut m = MAT4_ID;
    for col in 0..x.len() / 6 {
        if col > 0 {
            mat4_cz_left(&mut m);
        }
        let low = u3_entries(U3Params::new(x[6 * col], x[6 * col + 1], x[6 * col + 2]));
        let high = u3_entries(U3Params::new(x[6 * col + 3], x[6 * col + 4], x[6 * col + 5]));
        m = mat4_mul(&kron2(&high, &low), &m);
    }
    m
}

fn angles_to_block(pair: (usize, usize), x: &[f64]) -> Block {
    let angles = x
        .chunks(3)
        .map(|t| U3Params::new(t[0], t[1], t[2]))
        .collect::<Vec<_>>();
    // flat order is (low-wire, high-wire) per column; block slots interleave
    let mut slots = vec![U3Params::ZERO; 6];
    for col in 0..3 {
        slots[2 * col] = angles[2 * col];
        slots[2 * col + 1] = angles[2 * col + 1];
    }
    Block { pair, layout: Layout::Standard2Cz, angles: slots, phase: 0.0 }
}

fn uniform_angles<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..n).map(|_| -rng.gen_range(-PI..PI)).collect()
}

/// Circular distance |a − b| mod 2π, in [0, π].
fn angle_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// Floor below which a δ = 0 re-synthesis is accepted without further
/// restarts.
const EXACT_FLOOR: f64 = 1e-8;

/// Re-synthesizes a standard block against `target` from a fresh uniform
/// random start.
///
/// For `delta_target` = 0 the optimization runs to the convergence tolerance
/// and reports the floor achieved (best over restarts). For positive targets
/// the angles are first optimized below the target, then perturbed by
/// bisected uniform noise until the achieved deviation lands in
/// [0.8, 1.2]·delta_target.
pub fn resynthesize_block<R: Rng>(
    target: &UnitaryMatrix,
    delta_target: f64,
    original: Option<&[U3Params]>,
    rng: &mut R,
    cfg: &OptimizerConfig,
) -> Result<Resynthesis> {
    if target.dim() != 4 {
        return Err(Error::invalid("re-synthesis target must be 4×4"));
    }
    if !(delta_target >= 0.0) {
        return Err(Error::invalid("delta_target must be nonnegative"));
    }
    cfg.validate()?;
    let t4: &Mat4 = target.entries().try_into().unwrap();
    let objective = |x: &[f64]| deviation16(&block4_from_angles(x), t4);

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0usize;
    for _ in 0..cfg.restarts {
        let x0 = uniform_angles(18, rng);
        let res = minimize(objective, &x0, cfg)?;
        evaluations += res.evaluations;
        let better = best.as_ref().map_or(true, |(_, f)| res.f < *f);
        if better {
            best = Some((res.x, res.f));
        }
        let good_enough = if delta_target == 0.0 {
            res.f <= EXACT_FLOOR
        } else {
            res.f <= delta_target
        };
        if good_enough {
            break;
        }
    }
    let (mut x, mut achieved) = best.expect("restarts >= 1");

    if delta_target > 0.0 {
        if achieved > 1.5 * delta_target {
            return Err(Error::SynthesisFailure {
                block_index: None,
                detail: format!(
                    "best deviation {achieved:.3e} exceeds 1.5×target ({delta_target:.3e}) after {} restarts",
                    cfg.restarts
                ),
            });
        }
        let lo = 0.8 * delta_target;
        let hi = 1.2 * delta_target;
        if achieved < lo {
            (x, achieved) = perturb_into_band(&objective, &x, lo, hi, rng).ok_or_else(|| {
                Error::SynthesisFailure {
                    block_index: None,
                    detail: "perturbation pass could not reach the deviation band".into(),
                }
            })?;
        }
    }

    let block = angles_to_block((0, 1), &x);
    let param_distance = original.map(|orig| {
        block
            .angles
            .iter()
            .zip(orig)
            .flat_map(|(a, b)| {
                [
                    angle_distance(a.theta, b.theta),
                    angle_distance(a.phi, b.phi),
                    angle_distance(a.lambda, b.lambda),
                ]
            })
            .fold(0.0f64, f64::max)
    });
    Ok(Resynthesis {
        block,
        achieved: crate::linalg::deviation(
            &crate::circuit::block_matrix(&block.clone())?,
            target,
        )?,
        param_distance,
        evaluations,
    })
}

/// Adds uniform noise of bisected amplitude until the objective lands in
/// [lo, hi]. Tries several directions before giving up.
fn perturb_into_band<F: Fn(&[f64]) -> f64, R: Rng>(
    objective: &F,
    x: &[f64],
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    'directions: for _ in 0..16 {
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at = |t: f64| -> (Vec<f64>, f64) {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(v, d)| v + t * d).collect();
            let f = objective(&xt);
            (xt, f)
        };
        // grow t until the deviation clears the lower edge
        let mut t_lo = 0.0;
        let mut t_hi = 1e-4;
        let mut f_hi;
        loop {
            let (xt, f) = at(t_hi);
            f_hi = f;
            if f_hi >= lo {
                if f_hi <= hi {
                    return Some((xt, f));
                }
                break;
            }
            t_lo = t_hi;
            t_hi *= 2.0;
            if t_hi > 16.0 {
                continue 'directions;
            }
        }
        // bisect into the band
        for _ in 0..200 {
            let mid = 0.5 * (t_lo + t_hi);
            let (xt, f) = at(mid);
            if f < lo {
                t_lo = mid;
            } else if f > hi {
                t_hi = mid;
            } else {
                return Some((xt, f));
            }
        }
    }
    None
}

/// Replaces every mirror-half block with a re-synthesized equivalent at the
/// target deviation. The first half is untouched; block phases carry over so
/// the circuit matrix is preserved up to the achieved deviations. Blocks are
/// processed on independent RNG streams keyed by block index, so results are
/// reproducible regardless of scheduling.
pub fn obfuscate_mirror<R: Rng>(
    c: &Circuit,
    delta_target: f64,
    rng: &mut R,
    cfg: &OptimizerConfig,
) -> Result<(Circuit, DeviationStats)> {
    if !c.is_full_mirror_shape() {
        return Err(Error::invalid(
            "obfuscate_mirror expects the full mirrored circuit (2·half_depth layers)",
        ));
    }
    cfg.validate()?;
    let half = c.half_depth;
    let n_front: usize = c.layers[..half].iter().map(|l| l.len()).sum();

    // (global block index, layer, position) for every mirror block
    let mut jobs = Vec::new();
    let mut global = n_front;
    for (l, layer) in c.layers.iter().enumerate().skip(half) {
        for (pos, b) in layer.iter().enumerate() {
            if b.layout != Layout::Standard2Cz {
                return Err(Error::UnsupportedLayout(format!(
                    "mirror block at layer {l} position {pos} is not standard layout"
                )));
            }
            jobs.push((global, l, pos));
            global += 1;
        }
    }

    let base_seed: u64 = rng.gen();
    let results: Vec<Result<(usize, usize, Block, f64)>> = jobs
        .par_iter()
        .map(|&(idx, l, pos)| {
            let mut stream = ChaCha12Rng::seed_from_u64(base_seed);
            stream.set_stream(idx as u64);
            let old = &c.layers[l][pos];
            // target is the pure 18-angle matrix; the old phase carries over
            // unchanged, so deviations are identical with or without it
            let unphased = Block { phase: 0.0, ..old.clone() };
            let target = crate::circuit::block_matrix(&unphased)?;
            let syn = resynthesize_block(&target, delta_target, Some(&old.angles), &mut stream, cfg)
                .map_err(|e| match e {
                    Error::SynthesisFailure { detail, .. } => Error::SynthesisFailure {
                        block_index: Some(idx),
                        detail,
                    },
                    other => other,
                })?;
            let mut block = syn.block;
            block.pair = old.pair;
            block.phase = old.phase;
            Ok((l, pos, block, syn.achieved.value()))
        })
        .collect();

    let mut out = c.clone();
    let mut per_block = vec![0.0; jobs.len()];
    for (k, r) in results.into_iter().enumerate() {
        let (l, pos, block, achieved) = r?;
        out.layers[l][pos] = block;
        per_block[k] = achieved;
    }
    Ok((out, DeviationStats::from_per_block(per_block)))
}

// ---------------------------------------------------------------------------
// Tail-group reduction.
// ---------------------------------------------------------------------------

/// Window width of a tail group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupWidth {
    /// 4-qubit window: two second-to-last-layer blocks plus one last-layer
    /// block; reduction drops the last-layer block.
    Four,
    /// 6-qubit window: two second-to-last-layer blocks plus three last-layer
    /// blocks; reduction drops the selected (middle) last-layer block and
    /// re-optimizes the remaining four.
    Six,
}

/// Selects the trailing group anchored on one last-layer block.
#[derive(Debug, Clone, Copy)]
pub struct GroupSelector {
    /// Position of the anchor block within the last layer.
    pub last_layer_block: usize,
    pub width: GroupWidth,
}

/// Derives the constrained row indices for a group window from the hidden
/// string: the single row selected by x_hid restricted to the window qubits.
pub fn rows_for_hidden(x_hid: &BitString, window: &[usize]) -> Vec<usize> {
    let mut r = 0usize;
    for (j, &q) in window.iter().enumerate() {
        if x_hid.bit(q) {
            r |= 1 << j;
        }
    }
    vec![r]
}

struct GroupLayout {
    /// Window qubits in ring order; local index = position in this list.
    window: Vec<usize>,
    /// (layer, position, local pair) of the kept constituent blocks.
    kept: Vec<(usize, usize, (usize, usize))>,
    /// (layer, position, local pair) of every constituent including the
    /// dropped block, in application order.
    all: Vec<(usize, usize, (usize, usize))>,
}

fn locate_group(c: &Circuit, sel: GroupSelector) -> Result<GroupLayout> {
    let n = c.n_q;
    let last = c
        .layers
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::invalid("circuit has no layers to reduce"))?;
    if last == 0 {
        return Err(Error::invalid("need at least two layers to form a tail group"));
    }
    let anchor = c.layers[last].get(sel.last_layer_block).ok_or_else(|| {
        Error::invalid(format!(
            "last layer has no block at position {}",
            sel.last_layer_block
        ))
    })?;
    let (a, b) = anchor.pair;
    if (a + 1) % n != b {
        return Err(Error::UnsupportedLayout(
            "tail group anchor must sit on ring-consecutive qubits".into(),
        ));
    }
    let span = match sel.width {
        GroupWidth::Four => 4usize,
        GroupWidth::Six => 6,
    };
    if n < span {
        return Err(Error::invalid(format!(
            "group width {span} exceeds n_q = {n}"
        )));
    }
    let offset = match sel.width {
        GroupWidth::Four => 1usize,
        GroupWidth::Six => 2,
    };
    let window: Vec<usize> = (0..span).map(|j| (a + n - offset + j) % n).collect();
    let local = |q: usize| window.iter().position(|&w| w == q);

    let mut all = Vec::new();
    let mut kept = Vec::new();
    // second-to-last layer blocks fully inside the window, application order
    for (pos, blk) in c.layers[last - 1].iter().enumerate() {
        if let (Some(l0), Some(l1)) = (local(blk.pair.0), local(blk.pair.1)) {
            all.push((last - 1, pos, (l0, l1)));
            kept.push((last - 1, pos, (l0, l1)));
        }
    }
    if kept.len() != 2 {
        return Err(Error::ReductionFailure(format!(
            "expected 2 second-to-last-layer blocks inside the window, found {}",
            kept.len()
        )));
    }
    // last-layer blocks inside the window; the anchor is dropped
    for (pos, blk) in c.layers[last].iter().enumerate() {
        if let (Some(l0), Some(l1)) = (local(blk.pair.0), local(blk.pair.1)) {
            all.push((last, pos, (l0, l1)));
            if pos != sel.last_layer_block {
                kept.push((last, pos, (l0, l1)));
            }
        }
    }
    let expected_all = match sel.width {
        GroupWidth::Four => 3,
        GroupWidth::Six => 5,
    };
    if all.len() != expected_all {
        return Err(Error::ReductionFailure(format!(
            "expected {expected_all} constituent blocks, found {}",
            all.len()
        )));
    }
    Ok(GroupLayout { window, kept, all })
}

/// Selected rows of the local window operator, computed by applying daggered
/// block matrices to basis vectors: row_r(M) = (M† e_r)†.
fn group_rows(
    blocks: &[(&Block, (usize, usize))],
    span: usize,
    rows: &[usize],
) -> Vec<Vec<C64>> {
    let dim = 1usize << span;
    rows.iter()
        .map(|&r| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[r] = C64::new(1.0, 0.0);
            // apply daggers in reverse application order
            for (blk, local_pair) in blocks.iter().rev() {
                let m = blk.matrix4().expect("validated block");
                let mut md = [C64::new(0.0, 0.0); 16];
                for i in 0..4 {
                    for j in 0..4 {
                        md[j * 4 + i] = m[i * 4 + j].conj();
                    }
                }
                apply_two_qubit(&mut v, local_pair.0, local_pair.1, &md);
            }
            v.iter().map(|z| z.conj()).collect()
        })
        .collect()
}

/// Phase-minimized stacked-row distance: min over α of
/// sqrt( Σ_r ‖g_r − e^{iα} t_r‖² / (16·R) ) … the RMS row error.
fn row_rms_distance(target: &[Vec<C64>], cand: &[Vec<C64>], span: usize) -> (f64, f64) {
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    let mut overlap = C64::new(0.0, 0.0);
    for (g, t) in target.iter().zip(cand) {
        for (a, b) in g.iter().zip(t) {
            n1 += a.norm_sqr();
            n2 += b.norm_sqr();
            overlap += b.conj() * a;
        }
    }
    let d2 = (n1 + n2 - 2.0 * overlap.norm()).max(0.0);
    let denom = ((1usize << span) * target.len()) as f64;
    ((d2 / denom).sqrt(), overlap.arg())
}

/// Replaces the selected tail group by its shorter template: the anchor
/// last-layer block is removed and the remaining constituents re-optimized so
/// the group matrix matches on the given rows. Returns the reduced circuit
/// and the achieved RMS row error. The group is left unchanged on failure.
pub fn reduce_tail_group<R: Rng>(
    c: &Circuit,
    sel: GroupSelector,
    rows: &[usize],
    tolerance: f64,
    rng: &mut R,
    cfg: &OptimizerConfig,
) -> Result<(Circuit, f64)> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::invalid("need at least one constrained row"));
    }
    let layout = locate_group(c, sel)?;
    let span = layout.window.len();
    for &r in rows {
        if r >= (1 << span) {
            return Err(Error::invalid(format!("row index {r} out of range for the window")));
        }
    }

    // target rows of the full group, from current angles
    let all_blocks: Vec<(&Block, (usize, usize))> = layout
        .all
        .iter()
        .map(|&(l, p, lp)| (&c.layers[l][p], lp))
        .collect();
    let target_rows = group_rows(&all_blocks, span, rows);

    // template: kept blocks with free angles (phase handled analytically)
    let kept_meta: Vec<(usize, usize, (usize, usize))> = layout.kept.clone();
    let n_angles = kept_meta.len() * 18;
    let objective = |x: &[f64]| -> f64 {
        let blocks: Vec<Block> = kept_meta
            .iter()
            .zip(x.chunks(18))
            .map(|(_, chunk)| angles_to_block((0, 1), chunk))
            .collect();
        let with_pairs: Vec<(&Block, (usize, usize))> = blocks
            .iter()
            .zip(kept_meta.iter())
            .map(|(b, &(_, _, lp))| (b, lp))
            .collect();
        let cand = group_rows(&with_pairs, span, rows);
        row_rms_distance(&target_rows, &cand, span).0
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..cfg.restarts {
        let x0 = uniform_angles(n_angles, rng);
        let res = minimize(objective, &x0, cfg)?;
        if best.as_ref().map_or(true, |(_, f)| res.f < *f) {
            best = Some((res.x, res.f));
        }
        if best.as_ref().unwrap().1 <= tolerance * 0.5 {
            break;
        }
    }
    let (x, err) = best.expect("restarts >= 1");
    if err > tolerance {
        return Err(Error::ReductionFailure(format!(
            "row RMS error {err:.3e} exceeds tolerance {tolerance:.3e}; group left unchanged"
        )));
    }

    // recover the alignment phase and write the template back
    let blocks: Vec<Block> = x.chunks(18).map(|chunk| angles_to_block((0, 1), chunk)).collect();
    let with_pairs: Vec<(&Block, (usize, usize))> = blocks
        .iter()
        .zip(kept_meta.iter())
        .map(|(b, &(_, _, lp))| (b, lp))
        .collect();
    let cand = group_rows(&with_pairs, span, rows);
    let (_, alpha) = row_rms_distance(&target_rows, &cand, span);

    let mut out = c.clone();
    for (k, ((l, p, _), new_block)) in kept_meta.iter().zip(blocks).enumerate() {
        let pair = out.layers[*l][*p].pair;
        out.layers[*l][*p] = Block {
            pair,
            phase: if k == 0 { alpha } else { 0.0 },
            ..new_block
        };
    }
    let last = out.layers.len() - 1;
    out.layers[last].remove(sel.last_layer_block);
    Ok((out, err))
}

/// One full reduction pass: every last-layer block is replaced by its
/// 4-qubit-group template (in descending position order so selector indices
/// stay valid), then the emptied layer is dropped. Returns the reduced
/// circuit and the per-group row errors.
pub fn reduce_last_layer<R: Rng>(
    c: &Circuit,
    x_hid: &BitString,
    tolerance: f64,
    rng: &mut R,
    cfg: &OptimizerConfig,
) -> Result<(Circuit, Vec<f64>)> {
    if x_hid.len() != c.n_q {
        return Err(Error::invalid("hidden string length must match n_q"));
    }
    let mut out = c.clone();
    let mut errors = Vec::new();
    let last = out.layers.len() - 1;
    for pos in (0..out.layers[last].len()).rev() {
        let sel = GroupSelector { last_layer_block: pos, width: GroupWidth::Four };
        let layout = locate_group(&out, sel)?;
        let rows = rows_for_hidden(x_hid, &layout.window);
        let (reduced, err) = reduce_tail_group(&out, sel, &rows, tolerance, rng, cfg)?;
        out = reduced;
        errors.push(err);
    }
    let last = out.layers.len() - 1;
    if out.layers[last].is_empty() {
        out.layers.pop();
    }
    errors.reverse();
    Ok((out, errors))
}
