//! Impulsive measurement experiments with guided pointer readout.

mod config;
mod experiment;

pub use config::{
    pointer_separation_check, EigenSpec, MeasurementConfig, MeasurementKind, PointerPacket, SystemComponent,
    SEPARATION_REQUIRED, SUPPORT_WIDTHS, WEIGHT_TOLERANCE,
};
pub use experiment::{
    chained_position_measurement, quantum_vs_classical, quantum_vs_classical_position, repeated_pointer_measurement,
    run_measurement, system_factor, ChainResult, ClassicalContrast, MeasurementResult, OutcomeHistogram, PointerDensity,
    PointerStage, UNRESOLVED_WARNING,
};
