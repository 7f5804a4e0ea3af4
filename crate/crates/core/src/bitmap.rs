//! Input/output bitmaps, channel indexing, and their bit-exact wire format.
//!
//! Wire layout (all counts little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "QCTB"
//! 4       1     version (1)
//! 5       1     kind (1 = input bitmap, 2 = output bitmap)
//! 6       1     flags (bit 0: last input column is the randomize-output layer)
//! 7       1     reserved, zero
//! 8       4     rows (channels m, or shots)
//! 12      4     cols (sub-slots n, or qubits)
//! 16      ..    bits, row-major, 8 per byte LSB-first, last byte zero-padded
//! ```

use std::fmt;

use thiserror::Error;

use crate::circuit::{BackendDescriptor, Coupling, Qubit};

pub const MAGIC: &[u8; 4] = b"QCTB";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

const KIND_INPUT: u8 = 1;
const KIND_OUTPUT: u8 = 2;
const FLAG_RANDOMIZED_OUTPUT: u8 = 0b0000_0001;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitmapError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown bitmap kind {0}")]
    BadKind(u8),
    #[error("unknown flags {0:#04x} or nonzero reserved byte")]
    BadFlags(u8),
    #[error("length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("nonzero padding bits in final byte")]
    NonzeroPadding,
    #[error("expected an {expected} bitmap")]
    WrongKind { expected: &'static str },
    #[error("unknown channel {0}")]
    UnknownChannel(Channel),
    #[error("dimension overflow")]
    TooLarge,
}

/// Row-major boolean matrix.
#[derive(Clone, PartialEq, Eq, Default)]
struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BitMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix { rows, cols, bits: vec![false; rows * cols] }
    }

    fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "bit ({r},{c}) outside {}x{}", self.rows, self.cols);
        self.bits[r * self.cols + c]
    }

    fn set(&mut self, r: usize, c: usize, v: bool) {
        assert!(r < self.rows && c < self.cols, "bit ({r},{c}) outside {}x{}", self.rows, self.cols);
        self.bits[r * self.cols + c] = v;
    }

    fn encode(&self, kind: u8, flags: u8) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[VERSION, kind, flags, 0]);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        let mut payload = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, _) in self.bits.iter().enumerate().filter(|(_, b)| **b) {
            payload[i / 8] |= 1 << (i % 8);
        }
        out.extend_from_slice(&payload);
        out
    }

    fn decode(bytes: &[u8]) -> Result<(u8, u8, BitMatrix), BitmapError> {
        if bytes.len() < HEADER_LEN {
            return Err(BitmapError::LengthMismatch { expected: HEADER_LEN, actual: bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(BitmapError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(BitmapError::BadVersion(bytes[4]));
        }
        let (kind, flags) = (bytes[5], bytes[6]);
        if kind != KIND_INPUT && kind != KIND_OUTPUT {
            return Err(BitmapError::BadKind(kind));
        }
        let allowed = if kind == KIND_INPUT { FLAG_RANDOMIZED_OUTPUT } else { 0 };
        if flags & !allowed != 0 || bytes[7] != 0 {
            return Err(BitmapError::BadFlags(flags));
        }
        let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let n_bits = rows.checked_mul(cols).ok_or(BitmapError::TooLarge)?;
        let expected = HEADER_LEN + n_bits.div_ceil(8);
        if bytes.len() != expected {
            return Err(BitmapError::LengthMismatch { expected, actual: bytes.len() });
        }
        let payload = &bytes[HEADER_LEN..];
        if n_bits % 8 != 0 {
            let last = payload[payload.len() - 1];
            if last >> (n_bits % 8) != 0 {
                return Err(BitmapError::NonzeroPadding);
            }
        }
        let bits = (0..n_bits).map(|i| payload[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok((kind, flags, BitMatrix { rows, cols, bits }))
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: String = (0..self.cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// The `m x n` attenuation matrix: `1` means "attenuate channel `i` during
/// sub-slot `j`".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputBitmap {
    matrix: BitMatrix,
    randomized_output: bool,
}

impl InputBitmap {
    pub fn zeros(channels: usize, sub_slots: usize) -> Self {
        InputBitmap { matrix: BitMatrix::zeros(channels, sub_slots), randomized_output: false }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged bitmap rows");
        InputBitmap {
            matrix: BitMatrix { rows: rows.len(), cols, bits: rows.iter().flatten().copied().collect() },
            randomized_output: false,
        }
    }

    /// Number of channels (rows).
    pub fn m(&self) -> usize {
        self.matrix.rows
    }

    /// Number of sub-slots (columns).
    pub fn n(&self) -> usize {
        self.matrix.cols
    }

    pub fn get(&self, channel: usize, sub_slot: usize) -> bool {
        self.matrix.get(channel, sub_slot)
    }

    pub fn set(&mut self, channel: usize, sub_slot: usize, value: bool) {
        self.matrix.set(channel, sub_slot, value)
    }

    /// Whether the last column holds the randomize-output X layer.
    pub fn randomized_output(&self) -> bool {
        self.randomized_output
    }

    pub fn set_randomized_output(&mut self, on: bool) {
        self.randomized_output = on;
    }

    pub fn popcount(&self) -> usize {
        self.matrix.bits.iter().filter(|b| **b).count()
    }

    pub fn row(&self, channel: usize) -> impl Iterator<Item = bool> + '_ {
        let n = self.n();
        self.matrix.bits[channel * n..(channel + 1) * n].iter().copied()
    }

    /// Appends `extra` zero columns.
    pub fn extend_columns(&mut self, extra: usize) {
        let mut wider = BitMatrix::zeros(self.m(), self.n() + extra);
        for r in 0..self.m() {
            for c in 0..self.n() {
                wider.set(r, c, self.get(r, c));
            }
        }
        self.matrix = wider;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let flags = if self.randomized_output { FLAG_RANDOMIZED_OUTPUT } else { 0 };
        self.matrix.encode(KIND_INPUT, flags)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BitmapError> {
        match deserialize(bytes)? {
            Bitmap::Input(b) => Ok(b),
            Bitmap::Output(_) => Err(BitmapError::WrongKind { expected: "input" }),
        }
    }

    /// Overwrites every bit with zero.
    pub fn wipe(&mut self) {
        for b in self.matrix.bits.iter_mut() {
            // volatile so the erase survives as an observable store
            unsafe { std::ptr::write_volatile(b, false) };
        }
        self.randomized_output = false;
    }
}

/// Per-shot record of which final-layer X gates were actually applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBitmap {
    matrix: BitMatrix,
}

impl OutputBitmap {
    pub fn zeros(shots: usize, n_qubits: usize) -> Self {
        OutputBitmap { matrix: BitMatrix::zeros(shots, n_qubits) }
    }

    pub fn shots(&self) -> usize {
        self.matrix.rows
    }

    pub fn n_qubits(&self) -> usize {
        self.matrix.cols
    }

    pub fn get(&self, shot: usize, qubit: Qubit) -> bool {
        self.matrix.get(shot, qubit)
    }

    pub fn set(&mut self, shot: usize, qubit: Qubit, value: bool) {
        self.matrix.set(shot, qubit, value)
    }

    /// Row as a bit mask, bit `q` = qubit `q`.
    pub fn row_mask(&self, shot: usize) -> u64 {
        (0..self.n_qubits().min(64)).filter(|&q| self.get(shot, q)).fold(0, |m, q| m | 1 << q)
    }

    pub fn set_row_mask(&mut self, shot: usize, mask: u64) {
        for q in 0..self.n_qubits().min(64) {
            self.set(shot, q, mask >> q & 1 == 1);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.matrix.encode(KIND_OUTPUT, 0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BitmapError> {
        match deserialize(bytes)? {
            Bitmap::Output(b) => Ok(b),
            Bitmap::Input(_) => Err(BitmapError::WrongKind { expected: "output" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bitmap {
    Input(InputBitmap),
    Output(OutputBitmap),
}

pub fn serialize(bitmap: &Bitmap) -> Vec<u8> {
    match bitmap {
        Bitmap::Input(b) => b.to_bytes(),
        Bitmap::Output(b) => b.to_bytes(),
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Bitmap, BitmapError> {
    let (kind, flags, matrix) = BitMatrix::decode(bytes)?;
    Ok(match kind {
        KIND_INPUT => Bitmap::Input(InputBitmap { matrix, randomized_output: flags & FLAG_RANDOMIZED_OUTPUT != 0 }),
        _ => Bitmap::Output(OutputBitmap { matrix }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Drive(Qubit),
    /// Control channel of an unordered coupling.
    Control(Qubit, Qubit),
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Drive(q) => write!(f, "drive({q})"),
            Channel::Control(a, b) => write!(f, "control({a},{b})"),
        }
    }
}

/// Drive channels `0..n_qubits` first, then one control channel per coupling
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    n_qubits: usize,
    couplings: Vec<Coupling>,
}

impl ChannelLayout {
    pub fn new(n_qubits: usize, couplings: impl IntoIterator<Item = Coupling>) -> Self {
        let mut couplings: Vec<Coupling> = couplings.into_iter().collect();
        couplings.sort();
        couplings.dedup();
        ChannelLayout { n_qubits, couplings }
    }

    pub fn for_backend(backend: &BackendDescriptor) -> Self {
        Self::new(backend.n_qubits(), backend.couplings().iter().copied())
    }

    pub fn len(&self) -> usize {
        self.n_qubits + self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn channel_index(&self, channel: Channel) -> Result<usize, BitmapError> {
        match channel {
            Channel::Drive(q) if q < self.n_qubits => Ok(q),
            Channel::Control(a, b) => self
                .couplings
                .binary_search(&Coupling::new(a, b))
                .map(|rank| self.n_qubits + rank)
                .map_err(|_| BitmapError::UnknownChannel(channel)),
            _ => Err(BitmapError::UnknownChannel(channel)),
        }
    }

    pub fn channel(&self, index: usize) -> Option<Channel> {
        if index < self.n_qubits {
            Some(Channel::Drive(index))
        } else {
            self.couplings.get(index - self.n_qubits).map(|c| Channel::Control(c.lo, c.hi))
        }
    }
}

/// Free-function form of [`ChannelLayout::channel_index`].
pub fn channel_index(layout: &ChannelLayout, channel: Channel) -> Result<usize, BitmapError> {
    layout.channel_index(channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_three_packs_lsb_first() {
        let b = InputBitmap::from_rows(&[vec![true, false, true], vec![false, true, true]]);
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..4], b"QCTB");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[HEADER_LEN..], &[0x35]);
    }

    #[test]
    fn empty_bitmap_is_header_only() {
        let bytes = InputBitmap::zeros(0, 0).to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(InputBitmap::from_bytes(&bytes).unwrap(), InputBitmap::zeros(0, 0));
    }

    #[test]
    fn decode_errors() {
        let good = InputBitmap::from_rows(&[vec![true, false, true]]).to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(deserialize(&bad), Err(BitmapError::BadMagic(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(deserialize(&bad), Err(BitmapError::BadVersion(2)));

        let mut bad = good.clone();
        bad[5] = 9;
        assert_eq!(deserialize(&bad), Err(BitmapError::BadKind(9)));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(deserialize(&bad), Err(BitmapError::LengthMismatch { .. })));
        assert!(matches!(deserialize(&good[..10]), Err(BitmapError::LengthMismatch { .. })));

        let mut bad = good.clone();
        *bad.last_mut().unwrap() |= 0b1000_0000;
        assert_eq!(deserialize(&bad), Err(BitmapError::NonzeroPadding));

        let mut bad = good.clone();
        bad[7] = 1;
        assert!(matches!(deserialize(&bad), Err(BitmapError::BadFlags(_))));

        assert_eq!(OutputBitmap::from_bytes(&good), Err(BitmapError::WrongKind { expected: "output" }));
    }

    #[test]
    fn randomized_output_flag_round_trips() {
        let mut b = InputBitmap::zeros(2, 2);
        b.set_randomized_output(true);
        let again = InputBitmap::from_bytes(&b.to_bytes()).unwrap();
        assert!(again.randomized_output());
    }

    #[test]
    fn perth_channel_indices() {
        let layout = ChannelLayout::for_backend(&BackendDescriptor::ibm_perth());
        assert_eq!(layout.len(), 13);
        assert_eq!(layout.channel_index(Channel::Drive(3)), Ok(3));
        assert_eq!(layout.channel_index(Channel::Control(1, 3)), Ok(9));
        assert_eq!(layout.channel_index(Channel::Control(3, 1)), Ok(9));
        assert_eq!(
            layout.channel_index(Channel::Control(0, 6)),
            Err(BitmapError::UnknownChannel(Channel::Control(0, 6)))
        );
        assert!(layout.channel_index(Channel::Drive(7)).is_err());
        for i in 0..layout.len() {
            assert_eq!(layout.channel_index(layout.channel(i).unwrap()), Ok(i));
        }
    }

    #[test]
    fn wipe_clears_everything() {
        let mut b = InputBitmap::from_rows(&[vec![true, true], vec![true, false]]);
        b.set_randomized_output(true);
        b.wipe();
        assert_eq!(b.popcount(), 0);
        assert!(!b.randomized_output());
    }

    fn arb_bitmap() -> impl Strategy<Value = Bitmap> {
        (0usize..12, 0usize..40, any::<bool>(), any::<bool>()).prop_flat_map(|(rows, cols, input, flag)| {
            prop::collection::vec(any::<bool>(), rows * cols).prop_map(move |bits| {
                let matrix = BitMatrix { rows, cols, bits };
                if input {
                    Bitmap::Input(InputBitmap { matrix, randomized_output: flag })
                } else {
                    Bitmap::Output(OutputBitmap { matrix })
                }
            })
        })
    }

    proptest! {
        #[test]
        fn serialize_round_trips(b in arb_bitmap()) {
            let bytes = serialize(&b);
            prop_assert_eq!(bytes.len(), HEADER_LEN + match &b {
                Bitmap::Input(x) => (x.m() * x.n()).div_ceil(8),
                Bitmap::Output(x) => (x.shots() * x.n_qubits()).div_ceil(8),
            });
            prop_assert_eq!(deserialize(&bytes).unwrap(), b);
        }
    }
}
