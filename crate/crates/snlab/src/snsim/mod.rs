//! The social-network model itself: coupled Poisson walker placement,
//! simultaneous lazy walks, meeting detection, friend clusters and the
//! vertex-level acquaintance graph.

pub mod coupling;
pub mod estimators;
pub mod field;
pub mod meetings;
pub mod unionfind;

pub use coupling::{step_walker, CouplingStream, StepOutcome};
pub use estimators::{
    pair_connectivity, run_pair_replica, LevelOutcome, PairConnectivityReport, PairSweepConfig,
    ReplicaRecord,
};
pub use field::{realize_field, Walker, WalkerField};
pub use meetings::{simulate_meetings, AcquaintanceGraph, FriendClusters, MergeEvent};
pub use unionfind::UnionFind;
