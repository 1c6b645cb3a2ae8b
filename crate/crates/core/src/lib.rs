//! Capacity of tensor-network hypothesis classes: structures, contraction,
//! VC / pseudo-dimension bounds, shattering certificates and a tensor-train
//! learning experiment.

pub mod bounds;
pub mod contract;
pub mod learn;
pub mod shattering;
pub mod structure;
pub mod tensor;
pub mod tt;

pub use bounds::{
    bound_report, generalization_bound, growth_function_bound, lower_bounds, upper_bound_pdim,
    warren_bound, BoundError, BoundReport, FamilyParams, LowerBound, WarrenInput,
};
pub use contract::{
    contract, contract_brute_force, contract_with, ContractError, ContractionOrder,
    ContractionPlan, CoreAssignment,
};
pub use structure::{
    build_family, Edge, Family, RankSpec, StructureError, StructureSummary, TensorNetworkStructure,
};
pub use tensor::{feature_map, DenseTensor, TensorError};
pub use tt::{tt_inner_product, TensorTrain};
pub use shattering::{
    estimate_shattered_count, verify_certificate, Construction, ShatterError,
    ShatteringCertificate, VerificationRecord, VerifyMode,
};
pub use learn::{
    run_experiment, run_sweep, ExperimentConfig, ExperimentRecord, LearnError, SweepConfig,
    SweepResult,
};
