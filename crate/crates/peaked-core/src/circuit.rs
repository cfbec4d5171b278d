//! The circuit data model: two-qubit bricks, brick-wall layering, exact
//! mirror inversion, the dense oracle, and JSON serialization.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::linalg::{
    self, cz_matrix, deviation, kron2, mat4_cz_left, mat4_mul, mat4_scale, normalize_angle,
    u3_entries, Deviation, Mat4, U3Params, UnitaryMatrix, MAT4_ID,
};

/// Hard cap for the dense oracle; 2^14 × 2^14 complex entries is the most the
/// test machines are expected to hold.
pub const DENSE_ORACLE_MAX_QUBITS: usize = 14;

/// Gate arrangement of a two-qubit brick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// (U3⊗U3) CZ (U3⊗U3) CZ (U3⊗U3) — six U3s, 18 angles.
    #[serde(rename = "cz2")]
    Standard2Cz,
    /// Four U3 columns with three CZs — eight U3s, 24 angles.
    #[serde(rename = "cz3")]
    Extended3Cz,
    /// (U3⊗U3) CZ (U3⊗U3) — four U3s, 12 angles.
    #[serde(rename = "red")]
    Reduced,
}

impl Layout {
    /// Number of (U3 ⊗ U3) columns; CZs sit between consecutive columns.
    pub fn columns(&self) -> usize {
        match self {
            Layout::Standard2Cz => 3,
            Layout::Extended3Cz => 4,
            Layout::Reduced => 2,
        }
    }

    pub fn u3_count(&self) -> usize {
        2 * self.columns()
    }

    pub fn cz_count(&self) -> usize {
        self.columns() - 1
    }
}

/// One two-qubit brick: an ordered qubit pair, a gate layout, the U3 angle
/// list, and an accumulated global phase.
///
/// Angle slots are column-major over the layout: slot `2k` is the U3 on the
/// first qubit of the pair in column `k`, slot `2k + 1` the one on the second
/// qubit. In the 4×4 block matrix the first qubit of the pair indexes the
/// least-significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub pair: (usize, usize),
    pub layout: Layout,
    pub angles: Vec<U3Params>,
    pub phase: f64,
}

impl Block {
    pub fn new(pair: (usize, usize), layout: Layout, angles: Vec<U3Params>, phase: f64) -> Result<Self> {
        if pair.0 == pair.1 {
            return Err(Error::MalformedBlock(format!(
                "block pair ({}, {}) must be distinct",
                pair.0, pair.1
            )));
        }
        if angles.len() != layout.u3_count() {
            return Err(Error::MalformedBlock(format!(
                "layout {:?} needs {} U3 gates, got {}",
                layout,
                layout.u3_count(),
                angles.len()
            )));
        }
        Ok(Block { pair, layout, angles, phase })
    }

    /// All-identity standard block on a pair.
    pub fn identity(pair: (usize, usize)) -> Self {
        Block {
            pair,
            layout: Layout::Standard2Cz,
            angles: vec![U3Params::ZERO; 6],
            phase: 0.0,
        }
    }

    /// Angle slot of the U3 in `column` acting on `wire` (which must be one of
    /// the pair's qubits).
    pub fn slot(&self, column: usize, wire: usize) -> usize {
        debug_assert!(wire == self.pair.0 || wire == self.pair.1);
        2 * column + usize::from(wire == self.pair.1)
    }

    /// Column index of the block's first / last U3 on a wire.
    pub fn leading_column(&self) -> usize {
        0
    }

    pub fn trailing_column(&self) -> usize {
        self.layout.columns() - 1
    }

    pub fn contains(&self, wire: usize) -> bool {
        self.pair.0 == wire || self.pair.1 == wire
    }

    pub fn partner(&self, wire: usize) -> usize {
        if wire == self.pair.0 {
            self.pair.1
        } else {
            self.pair.0
        }
    }

    pub(crate) fn matrix4(&self) -> Result<Mat4> {
        if self.angles.len() != self.layout.u3_count() {
            return Err(Error::MalformedBlock(format!(
                "layout {:?} needs {} U3 gates, got {}",
                self.layout,
                self.layout.u3_count(),
                self.angles.len()
            )));
        }
        let mut m = MAT4_ID;
        for col in 0..self.layout.columns() {
            if col > 0 {
                mat4_cz_left(&mut m);
            }
            let low = u3_entries(self.angles[2 * col]);
            let high = u3_entries(self.angles[2 * col + 1]);
            m = mat4_mul(&kron2(&high, &low), &m);
        }
        mat4_scale(&mut m, C64::from_polar(1.0, self.phase));
        Ok(m)
    }
}

/// The 4×4 matrix of a block: the ordered product of its gate matrices (later
/// gates left-multiply) times e^{i·phase}.
pub fn block_matrix(b: &Block) -> Result<UnitaryMatrix> {
    Ok(UnitaryMatrix::from_raw(4, b.matrix4()?.to_vec()))
}

/// Inverts a standard-layout block: reversed gate order with each U3 inverted
/// via (θ, φ, λ) → (−θ, −λ, −φ). The standard layout is palindromic, so the
/// result is again a standard block.
pub fn invert_block(b: &Block) -> Result<Block> {
    if b.layout != Layout::Standard2Cz {
        return Err(Error::UnsupportedLayout(format!(
            "invert_block requires the standard layout, got {:?}",
            b.layout
        )));
    }
    let a = &b.angles;
    let angles = vec![
        a[4].inverse(),
        a[5].inverse(),
        a[2].inverse(),
        a[3].inverse(),
        a[0].inverse(),
        a[1].inverse(),
    ];
    Ok(Block { pair: b.pair, layout: b.layout, angles, phase: -b.phase })
}

/// Generation provenance carried by a circuit. Challenge exports drop it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub hidden_string: Option<BitString>,
    pub delta_target: Option<f64>,
    pub seed: u64,
}

/// An ordered sequence of brick layers over `n_q` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_q: usize,
    /// Depth n_l of the random half used to build this circuit.
    pub half_depth: usize,
    pub layers: Vec<Vec<Block>>,
    pub metadata: Option<Metadata>,
}

/// Qubit pairs of a brick-wall layer. Odd-numbered layers (index 0, 2, ...)
/// pair (0,1), (2,3), ...; even-numbered layers use the ring pairing
/// (n_q−1, 0), (1,2), (3,4), ...
pub fn layer_pairs(n_q: usize, layer_index: usize) -> Vec<(usize, usize)> {
    if layer_index % 2 == 0 {
        (0..n_q / 2).map(|k| (2 * k, 2 * k + 1)).collect()
    } else {
        let mut pairs = vec![(n_q - 1, 0)];
        pairs.extend((0..n_q / 2 - 1).map(|k| (2 * k + 1, 2 * k + 2)));
        pairs
    }
}

impl Circuit {
    pub fn total_blocks(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    /// Blocks in application order: layer by layer, within a layer in storage
    /// order.
    pub fn blocks_in_order(&self) -> impl Iterator<Item = &Block> {
        self.layers.iter().flatten()
    }

    /// (layer, position) of the k-th block in application order.
    pub fn block_position(&self, index: usize) -> Option<(usize, usize)> {
        let mut rest = index;
        for (l, layer) in self.layers.iter().enumerate() {
            if rest < layer.len() {
                return Some((l, rest));
            }
            rest -= layer.len();
        }
        None
    }

    /// The block in `layer` acting on `wire`, if any.
    pub fn block_on_wire(&self, layer: usize, wire: usize) -> Option<usize> {
        self.layers[layer].iter().position(|b| b.contains(wire))
    }

    /// True when the circuit still has the full mirrored shape produced by
    /// [`build_mirror`]: 2·half_depth layers.
    pub fn is_full_mirror_shape(&self) -> bool {
        self.layers.len() == 2 * self.half_depth
    }

    pub fn strip_metadata(&self) -> Circuit {
        Circuit { metadata: None, ..self.clone() }
    }

    /// Structural validation: even n_q, disjoint pairs per layer, block angle
    /// counts, qubit indices in range.
    pub fn validate(&self) -> Result<()> {
        if self.n_q == 0 || self.n_q % 2 != 0 {
            return Err(Error::invalid(format!("n_q must be even and positive, got {}", self.n_q)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.n_q];
            for b in layer {
                if b.pair.0 >= self.n_q || b.pair.1 >= self.n_q {
                    return Err(Error::MalformedBlock(format!(
                        "layer {l}: pair ({}, {}) out of range for n_q = {}",
                        b.pair.0, b.pair.1, self.n_q
                    )));
                }
                if b.pair.0 == b.pair.1 {
                    return Err(Error::MalformedBlock(format!("layer {l}: degenerate pair")));
                }
                if b.angles.len() != b.layout.u3_count() {
                    return Err(Error::MalformedBlock(format!(
                        "layer {l}: angle count {} does not match layout {:?}",
                        b.angles.len(),
                        b.layout
                    )));
                }
                for q in [b.pair.0, b.pair.1] {
                    if used[q] {
                        return Err(Error::MalformedBlock(format!(
                            "layer {l}: qubit {q} used by two blocks"
                        )));
                    }
                    used[q] = true;
                }
            }
        }
        Ok(())
    }
}

/// Generates the random half Q: `n_l` brick-wall layers with every angle
/// drawn independently and uniformly from (−π, π].
pub fn generate_random_half<R: Rng>(n_q: usize, n_l: usize, rng: &mut R) -> Result<Circuit> {
    use std::f64::consts::PI;
    if n_q % 2 != 0 || n_q < 4 {
        return Err(Error::invalid(format!(
            "n_q must be even and at least 4, got {n_q}"
        )));
    }
    if n_l < 1 {
        return Err(Error::invalid("n_l must be at least 1"));
    }
    let mut layers = Vec::with_capacity(n_l);
    for l in 0..n_l {
        let mut layer = Vec::with_capacity(n_q / 2);
        for pair in layer_pairs(n_q, l) {
            let angles = (0..6)
                .map(|_| {
                    U3Params::new(
                        -rng.gen_range(-PI..PI),
                        -rng.gen_range(-PI..PI),
                        -rng.gen_range(-PI..PI),
                    )
                })
                .collect();
            layer.push(Block { pair, layout: Layout::Standard2Cz, angles, phase: 0.0 });
        }
        layers.push(layer);
    }
    Ok(Circuit { n_q, half_depth: n_l, layers, metadata: None })
}

/// Appends the exact mirror: the original layers followed by inverted blocks
/// in fully reversed order. The result acts as the identity.
pub fn build_mirror(half: &Circuit) -> Result<Circuit> {
    if half.layers.len() != half.half_depth {
        return Err(Error::invalid(
            "build_mirror expects a pure random half (layer count == half_depth)",
        ));
    }
    let mut layers = half.layers.clone();
    for layer in half.layers.iter().rev() {
        let mirrored = layer
            .iter()
            .rev()
            .map(invert_block)
            .collect::<Result<Vec<Block>>>()?;
        layers.push(mirrored);
    }
    Ok(Circuit {
        n_q: half.n_q,
        half_depth: half.half_depth,
        layers,
        metadata: half.metadata.clone(),
    })
}

/// Per-pair mirror-symmetry detector: deviation between block i and the
/// inverse of block 2N−1−i (0-based application order), for i < N.
///
/// On a freshly mirrored circuit every entry is 0; obfuscation is meant to
/// destroy that.
pub fn mirror_symmetry_deviations(c: &Circuit) -> Result<Vec<Deviation>> {
    let blocks: Vec<&Block> = c.blocks_in_order().collect();
    let total = blocks.len();
    if total % 2 != 0 {
        return Err(Error::invalid("mirror symmetry check needs an even block count"));
    }
    let n = total / 2;
    (0..n)
        .map(|i| {
            let front = block_matrix(blocks[i])?;
            let back = block_matrix(&invert_block(blocks[total - 1 - i])?)?;
            deviation(&front, &back)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense application kernel and the unitary oracle.
// ---------------------------------------------------------------------------

/// Applies a 4×4 gate on qubits (qa, qb) to a 2^n amplitude vector in place.
/// Gate index convention: qa is the least-significant bit.
pub(crate) fn apply_two_qubit(amps: &mut [C64], qa: usize, qb: usize, m: &Mat4) {
    debug_assert_ne!(qa, qb);
    let n = amps.len();
    let ma = 1usize << qa;
    let mb = 1usize << qb;
    let mut i = 0usize;
    while i < n {
        if i & ma == 0 && i & mb == 0 {
            let (i0, i1, i2, i3) = (i, i | ma, i | mb, i | ma | mb);
            let v = [amps[i0], amps[i1], amps[i2], amps[i3]];
            for (r, &idx) in [i0, i1, i2, i3].iter().enumerate() {
                amps[idx] = m[r * 4] * v[0]
                    + m[r * 4 + 1] * v[1]
                    + m[r * 4 + 2] * v[2]
                    + m[r * 4 + 3] * v[3];
            }
        }
        i += 1;
    }
}

/// Applies a 2×2 gate on qubit q to a 2^n amplitude vector in place.
pub(crate) fn apply_single_qubit(amps: &mut [C64], q: usize, m: &[C64; 4]) {
    let mask = 1usize << q;
    for i in 0..amps.len() {
        if i & mask == 0 {
            let j = i | mask;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0] * a + m[1] * b;
            amps[j] = m[2] * a + m[3] * b;
        }
    }
}

/// Dense 2^n×2^n unitary of the whole circuit (test oracle; n_q ≤ 14).
pub fn circuit_unitary(c: &Circuit) -> Result<UnitaryMatrix> {
    if c.n_q > DENSE_ORACLE_MAX_QUBITS {
        return Err(Error::ResourceLimit(format!(
            "dense oracle capped at {DENSE_ORACLE_MAX_QUBITS} qubits, got {}",
            c.n_q
        )));
    }
    let dim = 1usize << c.n_q;
    // column-major scratch: each column is a contiguous statevector
    let mut cols = vec![C64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        cols[j * dim + j] = C64::new(1.0, 0.0);
    }
    for b in c.blocks_in_order() {
        let m = b.matrix4()?;
        for j in 0..dim {
            apply_two_qubit(&mut cols[j * dim..(j + 1) * dim], b.pair.0, b.pair.1, &m);
        }
    }
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            data[i * dim + j] = cols[j * dim + i];
        }
    }
    Ok(UnitaryMatrix::from_raw(dim, data))
}

// ---------------------------------------------------------------------------
// Flat gate stream (QASM-level view).
// ---------------------------------------------------------------------------

/// A single gate in a flattened circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    U3 { q: usize, p: U3Params },
    Cz { a: usize, b: usize },
    X { q: usize },
    /// Global phase factor e^{iφ}; irrelevant for probabilities.
    GlobalPhase(f64),
}

/// A circuit as a flat gate list, for inputs whose brick-wall structure is
/// not recognizable.
#[derive(Debug, Clone, PartialEq)]
pub struct GateList {
    pub n_q: usize,
    pub gates: Vec<GateOp>,
}

/// Either a structured brick-wall circuit or a flat gate list.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyCircuit {
    Blocks(Circuit),
    Flat(GateList),
}

impl AnyCircuit {
    pub fn n_q(&self) -> usize {
        match self {
            AnyCircuit::Blocks(c) => c.n_q,
            AnyCircuit::Flat(g) => g.n_q,
        }
    }

    pub fn to_gate_list(&self) -> GateList {
        match self {
            AnyCircuit::Blocks(c) => c.to_gate_list(),
            AnyCircuit::Flat(g) => g.clone(),
        }
    }
}

impl Circuit {
    /// Flattens blocks into the gate stream: per block, columns in time order
    /// with the pair's first qubit emitted before the second.
    pub fn to_gate_list(&self) -> GateList {
        let mut gates = Vec::new();
        for b in self.blocks_in_order() {
            for col in 0..b.layout.columns() {
                if col > 0 {
                    gates.push(GateOp::Cz { a: b.pair.0, b: b.pair.1 });
                }
                gates.push(GateOp::U3 { q: b.pair.0, p: b.angles[2 * col] });
                gates.push(GateOp::U3 { q: b.pair.1, p: b.angles[2 * col + 1] });
            }
            if b.phase != 0.0 {
                gates.push(GateOp::GlobalPhase(b.phase));
            }
        }
        GateList { n_q: self.n_q, gates }
    }
}

// ---------------------------------------------------------------------------
// JSON serialization (circuit schema v1).
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BlockV1 {
    pair: [usize; 2],
    layout: Layout,
    angles: Vec<f64>,
    phase: f64,
}

#[derive(Serialize, Deserialize)]
struct CircuitV1 {
    version: u32,
    n_q: usize,
    half_depth: usize,
    layers: Vec<Vec<BlockV1>>,
    metadata: Option<Metadata>,
}

/// Serialization format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Qasm,
}

/// Serializes a circuit. JSON round-trips losslessly (angles normalized to
/// (−π, π] first, which is idempotent); QASM drops block phases.
pub fn serialize(c: &Circuit, format: Format) -> Result<Vec<u8>> {
    c.validate()?;
    match format {
        Format::Json => {
            let v1 = CircuitV1 {
                version: 1,
                n_q: c.n_q,
                half_depth: c.half_depth,
                layers: c
                    .layers
                    .iter()
                    .map(|layer| {
                        layer
                            .iter()
                            .map(|b| BlockV1 {
                                pair: [b.pair.0, b.pair.1],
                                layout: b.layout,
                                angles: b
                                    .angles
                                    .iter()
                                    .flat_map(|p| {
                                        let n = p.normalized();
                                        [n.theta, n.phi, n.lambda]
                                    })
                                    .collect(),
                                phase: normalize_angle(b.phase),
                            })
                            .collect()
                    })
                    .collect(),
                metadata: c.metadata.clone(),
            };
            let mut out = serde_json::to_vec_pretty(&v1)
                .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Qasm => Ok(crate::qasm::emit(c).into_bytes()),
    }
}

/// Deserializes a circuit. For QASM the block structure is reconstructed when
/// recognizable; use [`crate::qasm::parse`] directly to obtain the flat
/// variant otherwise.
pub fn deserialize(bytes: &[u8], format: Format) -> Result<Circuit> {
    match format {
        Format::Json => {
            let v1: CircuitV1 = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
                line: e.line(),
                col: e.column(),
                msg: e.to_string(),
            })?;
            if v1.version != 1 {
                return Err(Error::Parse {
                    line: 1,
                    col: 1,
                    msg: format!("unsupported circuit schema version {}", v1.version),
                });
            }
            let layers = v1
                .layers
                .into_iter()
                .map(|layer| {
                    layer
                        .into_iter()
                        .map(|b| {
                            if b.angles.len() % 3 != 0 {
                                return Err(Error::MalformedBlock(format!(
                                    "angle list length {} is not a multiple of 3",
                                    b.angles.len()
                                )));
                            }
                            let angles = b
                                .angles
                                .chunks(3)
                                .map(|t| U3Params::new(t[0], t[1], t[2]))
                                .collect();
                            Block::new((b.pair[0], b.pair[1]), b.layout, angles, b.phase)
                        })
                        .collect::<Result<Vec<Block>>>()
                })
                .collect::<Result<Vec<Vec<Block>>>>()?;
            let c = Circuit {
                n_q: v1.n_q,
                half_depth: v1.half_depth,
                layers,
                metadata: v1.metadata,
            };
            c.validate()?;
            Ok(c)
        }
        Format::Qasm => {
            let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse {
                line: 1,
                col: 1,
                msg: "QASM input is not valid UTF-8".into(),
            })?;
            match crate::qasm::parse(text)? {
                AnyCircuit::Blocks(c) => Ok(c),
                AnyCircuit::Flat(_) => Err(Error::invalid(
                    "QASM input has no recognizable brick-wall structure; parse as a flat gate list instead",
                )),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;
    use std::f64::consts::PI;

    pub(crate) fn random_block<R: Rng>(pair: (usize, usize), rng: &mut R) -> Block {
        Block {
            pair,
            layout: Layout::Standard2Cz,
            angles: (0..6).map(|_| testutil::random_u3(rng)).collect(),
            phase: 0.0,
        }
    }

    #[test]
    fn zero_angle_standard_block_is_identity() {
        let b = Block::identity((0, 1));
        let m = block_matrix(&b).unwrap();
        assert!(m.frobenius_distance(&UnitaryMatrix::identity(4)) <= 1e-15);
    }

    #[test]
    fn block_matrix_matches_explicit_kron_oracle() {
        // first U3 = X on the pair's first qubit, everything else zero
        let mut b = Block::identity((0, 1));
        b.angles[0] = U3Params::new(PI, 0.0, PI);
        let got = block_matrix(&b).unwrap();

        // independent oracle: explicit Kronecker products and 4×4 multiplication
        let x = linalg::u3_matrix(U3Params::new(PI, 0.0, PI)).unwrap();
        let i2 = UnitaryMatrix::identity(2);
        let col0 = i2.kron(&x); // first qubit of the pair = low bit
        let col1 = i2.kron(&i2);
        let col2 = i2.kron(&i2);
        let cz = cz_matrix();
        let want = col2.matmul(&cz).matmul(&col1).matmul(&cz).matmul(&col0);
        assert!(got.frobenius_distance(&want) <= 1e-14);
    }

    #[test]
    fn block_matrix_random_matches_kron_oracle() {
        let mut rng = testutil::rng(23);
        for _ in 0..25 {
            let b = random_block((0, 1), &mut rng);
            let got = block_matrix(&b).unwrap();
            let cz = cz_matrix();
            let col = |k: usize| {
                let low = linalg::u3_matrix(b.angles[2 * k]).unwrap();
                let high = linalg::u3_matrix(b.angles[2 * k + 1]).unwrap();
                high.kron(&low)
            };
            let want = col(2).matmul(&cz).matmul(&col(1)).matmul(&cz).matmul(&col(0));
            assert!(got.frobenius_distance(&want) <= 1e-13);
            assert!(got.unitarity_defect() <= 1e-10 * 4.0);
        }
    }

    #[test]
    fn different_angle_sets_can_give_near_zero_deviation() {
        // A gauge pair: shifting opposite diagonal phases through the CZs
        // changes angles but not the matrix.
        let mut rng = testutil::rng(29);
        let b1 = random_block((0, 1), &mut rng);
        let mut b2 = b1.clone();
        // a diagonal phase on the first wire commutes through the CZ: pulling
        // e^{ia} out of column 0 (φ → φ−a) and into column 1 (λ → λ+a)
        // changes the angles but not the matrix
        let a = 1.234;
        b2.angles[0].phi -= a;
        b2.angles[2].lambda += a;
        let d = deviation(&block_matrix(&b1).unwrap(), &block_matrix(&b2).unwrap()).unwrap();
        assert!(d.value() <= 1e-12, "gauge shift should not change the matrix, got {}", d.value());
        assert!((b1.angles[0].phi - b2.angles[0].phi).abs() > 1.0);
    }

    #[test]
    fn malformed_block_rejected() {
        let b = Block::new((0, 1), Layout::Standard2Cz, vec![U3Params::ZERO; 5], 0.0);
        assert!(matches!(b, Err(Error::MalformedBlock(_))));
    }

    #[test]
    fn generate_counts_and_pairs() {
        let mut rng = testutil::rng(1);
        let c = generate_random_half(6, 4, &mut rng).unwrap();
        assert_eq!(c.total_blocks(), 12);
        assert_eq!(c.layers.len(), 4);
        c.validate().unwrap();

        let c = generate_random_half(4, 1, &mut rng).unwrap();
        let pairs: Vec<_> = c.layers[0].iter().map(|b| b.pair).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3)]);

        let c = generate_random_half(4, 2, &mut rng).unwrap();
        let pairs: Vec<_> = c.layers[1].iter().map(|b| b.pair).collect();
        assert_eq!(pairs, vec![(3, 0), (1, 2)]);
    }

    #[test]
    fn generate_rejects_bad_sizes() {
        let mut rng = testutil::rng(1);
        assert!(generate_random_half(5, 2, &mut rng).is_err());
        assert!(generate_random_half(2, 2, &mut rng).is_err());
        assert!(generate_random_half(6, 0, &mut rng).is_err());
    }

    #[test]
    fn invert_block_examples() {
        let zero = Block::identity((0, 1));
        assert_eq!(invert_block(&zero).unwrap(), zero);

        let mut rng = testutil::rng(41);
        for _ in 0..20 {
            let b = random_block((0, 1), &mut rng);
            let inv = invert_block(&b).unwrap();
            let prod = block_matrix(&inv).unwrap().matmul(&block_matrix(&b).unwrap());
            let d = deviation(&prod, &UnitaryMatrix::identity(4)).unwrap();
            assert!(d.value() <= 1e-10);

            let back = invert_block(&inv).unwrap();
            let d2 = block_matrix(&back)
                .unwrap()
                .frobenius_distance(&block_matrix(&b).unwrap());
            assert!(d2 <= 1e-12);
        }
    }

    #[test]
    fn invert_block_rejects_non_standard() {
        let b = Block::new((0, 1), Layout::Reduced, vec![U3Params::ZERO; 4], 0.0).unwrap();
        assert!(matches!(invert_block(&b), Err(Error::UnsupportedLayout(_))));
    }

    #[test]
    fn mirror_shape_and_symmetry() {
        let mut rng = testutil::rng(7);
        let half = generate_random_half(4, 2, &mut rng).unwrap();
        let full = build_mirror(&half).unwrap();
        assert_eq!(full.layers.len(), 4);
        assert_eq!(full.total_blocks(), 8);
        assert!(full.is_full_mirror_shape());
        for d in mirror_symmetry_deviations(&full).unwrap() {
            assert!(d.value() <= 1e-12);
        }
    }

    #[test]
    fn mirror_is_identity_up_to_phase() {
        let mut rng = testutil::rng(13);
        for n_q in [4usize, 6] {
            let half = generate_random_half(n_q, 2, &mut rng).unwrap();
            let full = build_mirror(&half).unwrap();
            let u = circuit_unitary(&full).unwrap();
            let d = crate::linalg::distance_up_to_phase(&u, &UnitaryMatrix::identity(1 << n_q))
                .unwrap();
            assert!(d <= 1e-8, "mirror defect {d:.3e} at n_q = {n_q}");
        }
    }

    #[test]
    fn unitary_oracle_base_cases() {
        let empty = Circuit { n_q: 2, half_depth: 0, layers: vec![], metadata: None };
        let u = circuit_unitary(&empty).unwrap();
        assert!(u.frobenius_distance(&UnitaryMatrix::identity(4)) == 0.0);

        let mut rng = testutil::rng(3);
        let b = random_block((0, 1), &mut rng);
        let c = Circuit { n_q: 2, half_depth: 1, layers: vec![vec![b.clone()]], metadata: None };
        let u = circuit_unitary(&c).unwrap();
        assert!(u.frobenius_distance(&block_matrix(&b).unwrap()) <= 1e-14);
    }

    #[test]
    fn unitary_oracle_respects_cap() {
        let c = Circuit { n_q: 16, half_depth: 0, layers: vec![], metadata: None };
        assert!(matches!(circuit_unitary(&c), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let mut rng = testutil::rng(99);
        let mut full = build_mirror(&generate_random_half(6, 3, &mut rng).unwrap()).unwrap();
        full.metadata = Some(Metadata {
            hidden_string: Some("101010".parse().unwrap()),
            delta_target: Some(0.003),
            seed: 99,
        });
        let bytes1 = serialize(&full, Format::Json).unwrap();
        let c2 = deserialize(&bytes1, Format::Json).unwrap();
        let bytes2 = serialize(&c2, Format::Json).unwrap();
        assert_eq!(bytes1, bytes2);
        assert_eq!(full.n_q, c2.n_q);
        assert_eq!(full.half_depth, c2.half_depth);
    }

    #[test]
    fn json_round_trip_preserves_block_matrices() {
        let mut rng = testutil::rng(101);
        let full = build_mirror(&generate_random_half(4, 2, &mut rng).unwrap()).unwrap();
        let bytes = serialize(&full, Format::Json).unwrap();
        let c2 = deserialize(&bytes, Format::Json).unwrap();
        for (a, b) in full.blocks_in_order().zip(c2.blocks_in_order()) {
            let d = block_matrix(a).unwrap().frobenius_distance(&block_matrix(b).unwrap());
            assert!(d <= 1e-15);
        }
    }

    #[test]
    fn json_parse_error_reports_position() {
        let bad = b"{\"version\":1,\n  \"n_q\": oops}";
        match deserialize(bad, Format::Json) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
