use serde::{Deserialize, Serialize};

use super::ObfuscationError;
use crate::circuit::{BackendDescriptor, Dt};

/// Single-qubit slot length relative to the CX slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quarter,
    Half,
    Max,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Quarter, Level::Half, Level::Max];

    fn divisor(self) -> Dt {
        match self {
            Level::Quarter => 4,
            Level::Half => 2,
            Level::Max => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Quarter => "quarter",
            Level::Half => "half",
            Level::Max => "max",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().trim_end_matches("-delay") {
            "quarter" => Ok(Level::Quarter),
            "half" => Ok(Level::Half),
            "max" => Ok(Level::Max),
            other => Err(format!("unknown obfuscation level `{other}`")),
        }
    }
}

/// Slot geometry for one backend at one obfuscation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPlan {
    /// Longest CX duration on the backend.
    pub max_cnot_dur: Dt,
    /// `max_cnot_dur` rounded up to an even multiple of the sub-slot.
    pub ceil_max_cnot_dur: Dt,
    /// Length of a single-qubit slot.
    pub sq_slot_dur: Dt,
    /// One sub-slot, equal to the single-qubit gate duration.
    pub sub_slot: Dt,
}

impl SlotPlan {
    pub fn cx_slot_sub_slots(&self) -> usize {
        (self.ceil_max_cnot_dur / self.sub_slot) as usize
    }

    pub fn sq_slot_sub_slots(&self) -> usize {
        (self.sq_slot_dur / self.sub_slot) as usize
    }
}

pub fn compute_slot_plan(backend: &BackendDescriptor, level: Level) -> Result<SlotPlan, ObfuscationError> {
    let max_cnot_dur = backend.max_cx_duration().ok_or(ObfuscationError::NoCouplings)?;
    let sub_slot = backend.sq_dur();
    let pair = 2 * sub_slot;
    let ceil_max_cnot_dur = max_cnot_dur.div_ceil(pair) * pair;
    // ceil/k rounded up to whole sub-slots keeps the bitmap grid uniform
    let sq_slot_dur = ceil_max_cnot_dur.div_ceil(level.divisor() * sub_slot) * sub_slot;
    Ok(SlotPlan { max_cnot_dur, ceil_max_cnot_dur, sq_slot_dur, sub_slot })
}
