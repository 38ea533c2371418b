use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Sensor family a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Usage,
    Pressure,
    Slurry,
    Rotation,
}

/// The 18 CMP sensor channels, declared in canonical order.
///
/// Feature vectors lay variables out in this order (usage, pressure, slurry,
/// rotation), which is also the `Ord` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    UsageOfBackingFilm,
    UsageOfDresser,
    UsageOfDresserTable,
    UsageOfMembrane,
    UsageOfPressurizedSheet,
    UsageOfPolishingTable,
    PressurizedChamberPressure,
    MainOuterAirBagPressure,
    CenterAirBagPressure,
    RetainerRingPressure,
    RippleAirBagPressure,
    EdgeAirBagPressure,
    SlurryFlowLineA,
    SlurryFlowLineB,
    SlurryFlowLineC,
    WaferRotation,
    StageRotation,
    HeadRotation,
}

impl Variable {
    pub const ALL: [Variable; 18] = [
        Variable::UsageOfBackingFilm,
        Variable::UsageOfDresser,
        Variable::UsageOfDresserTable,
        Variable::UsageOfMembrane,
        Variable::UsageOfPressurizedSheet,
        Variable::UsageOfPolishingTable,
        Variable::PressurizedChamberPressure,
        Variable::MainOuterAirBagPressure,
        Variable::CenterAirBagPressure,
        Variable::RetainerRingPressure,
        Variable::RippleAirBagPressure,
        Variable::EdgeAirBagPressure,
        Variable::SlurryFlowLineA,
        Variable::SlurryFlowLineB,
        Variable::SlurryFlowLineC,
        Variable::WaferRotation,
        Variable::StageRotation,
        Variable::HeadRotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::UsageOfBackingFilm => "USAGE_OF_BACKING_FILM",
            Variable::UsageOfDresser => "USAGE_OF_DRESSER",
            Variable::UsageOfDresserTable => "USAGE_OF_DRESSER_TABLE",
            Variable::UsageOfMembrane => "USAGE_OF_MEMBRANE",
            Variable::UsageOfPressurizedSheet => "USAGE_OF_PRESSURIZED_SHEET",
            Variable::UsageOfPolishingTable => "USAGE_OF_POLISHING_TABLE",
            Variable::PressurizedChamberPressure => "PRESSURIZED_CHAMBER_PRESSURE",
            Variable::MainOuterAirBagPressure => "MAIN_OUTER_AIR_BAG_PRESSURE",
            Variable::CenterAirBagPressure => "CENTER_AIR_BAG_PRESSURE",
            Variable::RetainerRingPressure => "RETAINER_RING_PRESSURE",
            Variable::RippleAirBagPressure => "RIPPLE_AIR_BAG_PRESSURE",
            Variable::EdgeAirBagPressure => "EDGE_AIR_BAG_PRESSURE",
            Variable::SlurryFlowLineA => "SLURRY_FLOW_LINE_A",
            Variable::SlurryFlowLineB => "SLURRY_FLOW_LINE_B",
            Variable::SlurryFlowLineC => "SLURRY_FLOW_LINE_C",
            Variable::WaferRotation => "WAFER_ROTATION",
            Variable::StageRotation => "STAGE_ROTATION",
            Variable::HeadRotation => "HEAD_ROTATION",
        }
    }

    pub fn family(self) -> Family {
        match self as usize {
            0..=5 => Family::Usage,
            6..=11 => Family::Pressure,
            12..=14 => Family::Slurry,
            _ => Family::Rotation,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariable(s.to_string()))
    }
}

/// Named variable subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariablePreset {
    /// All 18 channels.
    All18,
    /// Usage and pressure families only (slurry and rotation dropped).
    UsagePressure12,
}

impl VariablePreset {
    pub fn variables(self) -> Vec<Variable> {
        match self {
            VariablePreset::All18 => Variable::ALL.to_vec(),
            VariablePreset::UsagePressure12 => Variable::ALL
                .iter()
                .copied()
                .filter(|v| matches!(v.family(), Family::Usage | Family::Pressure))
                .collect(),
        }
    }
}
