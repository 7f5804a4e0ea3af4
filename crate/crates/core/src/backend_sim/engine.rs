use rand::RngCore;

use super::{EngineError, Setting};
use crate::bitmap::{ChannelLayout, InputBitmap, OutputBitmap};
use crate::circuit::BackendDescriptor;
use crate::envelope::{open_with_session, seal_in_session, Envelope, PrivateKey, PublicKey, Role, SessionKey};

/// What the input-bitmap memory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryState {
    Empty,
    Loaded,
    Zeroized,
}

/// Switch settings for one sub-slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tick {
    /// One setting per channel, in bitmap row order.
    pub settings: Vec<Setting>,
    /// Bit `q` set where the randomize-output X on qubit `q` was passed.
    /// Always zero outside the final layer.
    pub output_bits: u64,
}

/// The trusted controller inside the fridge: decrypts and holds the input
/// bitmap, drives the switches sub-slot by sub-slot, and erases everything
/// on tamper.
pub struct QcTeeEngine {
    n_qubits: usize,
    channels: usize,
    backend_key: PrivateKey,
    user_key: PublicKey,
    memory: Option<InputBitmap>,
    state: MemoryState,
    session: Option<SessionKey>,
    tick: usize,
    tampered: bool,
    records: u64,
}

impl std::fmt::Debug for QcTeeEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QcTeeEngine")
            .field("state", &self.state)
            .field("tick", &self.tick)
            .field("tampered", &self.tampered)
            .finish_non_exhaustive()
    }
}

impl QcTeeEngine {
    pub fn new(backend: &BackendDescriptor, backend_key: PrivateKey, user_key: PublicKey) -> Result<Self, EngineError> {
        let backend_key = backend_key.expect_role(Role::Backend)?;
        let user_key = user_key.expect_role(Role::User)?;
        if backend.n_qubits() > 64 {
            return Err(EngineError::TooManyQubits { n: backend.n_qubits(), max: 64 });
        }
        Ok(QcTeeEngine {
            n_qubits: backend.n_qubits(),
            channels: ChannelLayout::for_backend(backend).len(),
            backend_key,
            user_key,
            memory: None,
            state: MemoryState::Empty,
            session: None,
            tick: 0,
            tampered: false,
            records: 0,
        })
    }

    fn check(&self) -> Result<(), EngineError> {
        if self.tampered {
            Err(EngineError::Tampered)
        } else {
            Ok(())
        }
    }

    /// Decrypts, verifies and stores an input bitmap. On any failure the
    /// memory keeps its previous contents.
    pub fn load_input_bitmap(&mut self, envelope: &Envelope) -> Result<(), EngineError> {
        self.check()?;
        let (plain, session) = open_with_session(envelope, &self.backend_key, &self.user_key)?;
        let plain = zeroize::Zeroizing::new(plain);
        let bitmap = InputBitmap::from_bytes(&plain)?;
        if bitmap.m() != self.channels {
            return Err(EngineError::DimensionMismatch {
                what: "bitmap channels",
                expected: self.channels,
                found: bitmap.m(),
            });
        }
        if let Some(mut old) = self.memory.replace(bitmap) {
            old.wipe();
        }
        if let Some(mut old) = self.session.replace(session) {
            old.destroy();
        }
        self.state = MemoryState::Loaded;
        self.tick = 0;
        self.records = 0;
        Ok(())
    }

    pub fn bitmap(&self) -> Result<&InputBitmap, EngineError> {
        self.check()?;
        self.memory.as_ref().ok_or(EngineError::NoBitmap)
    }

    pub fn memory_state(&self) -> MemoryState {
        self.state
    }

    /// Set bits currently held in bitmap memory, readable even after a
    /// tamper event.
    pub fn memory_popcount(&self) -> usize {
        self.memory.as_ref().map_or(0, InputBitmap::popcount)
    }

    pub fn is_tampered(&self) -> bool {
        self.tampered
    }

    pub fn current_tick(&self) -> usize {
        self.tick
    }

    /// Whether `sub_slot` is the randomize-output layer.
    pub fn is_final_layer(&self, sub_slot: usize) -> Result<bool, EngineError> {
        let b = self.bitmap()?;
        Ok(b.randomized_output() && sub_slot + 1 == b.n())
    }

    /// Switch settings for `sub_slot`. Outside the final layer a channel is
    /// attenuated exactly when its bitmap bit is 1. In the final
    /// randomize-output layer every drive channel whose bit is 0 carries the
    /// masking X, which passes only when the TRNG draws a 1; that draw is
    /// returned in `output_bits`.
    pub fn engine_tick(&mut self, sub_slot: usize, trng: &mut impl RngCore) -> Result<Tick, EngineError> {
        let b = self.bitmap()?;
        if sub_slot >= b.n() {
            return Err(EngineError::SubSlotOutOfRange { sub_slot, n: b.n() });
        }
        let final_layer = self.is_final_layer(sub_slot)?;
        let b = self.bitmap()?;
        let mut output_bits = 0u64;
        let mut settings = Vec::with_capacity(b.m());
        for c in 0..b.m() {
            let bit = b.get(c, sub_slot);
            let s = if bit {
                Setting::Attenuate
            } else if final_layer && c < self.n_qubits {
                if trng.next_u32() & 1 == 1 {
                    output_bits |= 1 << c;
                    Setting::Pass
                } else {
                    Setting::Attenuate
                }
            } else {
                Setting::Pass
            };
            settings.push(s);
        }
        self.tick = sub_slot + 1;
        Ok(Tick { settings, output_bits })
    }

    /// Seals an output bitmap under the job session, signed by the backend.
    pub fn seal_output(&mut self, out: &OutputBitmap) -> Result<Envelope, EngineError> {
        self.check()?;
        let session = self.session.as_ref().ok_or(EngineError::NoBitmap)?;
        let env = seal_in_session(&out.to_bytes(), session, self.records, &self.backend_key)?;
        self.records += 1;
        Ok(env)
    }

    /// Erases the bitmap memory and the session key. Idempotent.
    pub fn tamper_event(&mut self) {
        // the wiped buffer stays in place so audits can inspect it
        if let Some(b) = self.memory.as_mut() {
            b.wipe();
        }
        if let Some(mut s) = self.session.take() {
            s.destroy();
        }
        self.state = MemoryState::Zeroized;
        self.tampered = true;
        self.tick = 0;
    }
}
