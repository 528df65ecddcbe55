pub mod center;
pub mod collision;
pub mod robustness;
pub mod rotational;
pub mod size;

pub use center::{center_control, geometric_center, CenterParams};
pub use collision::{collision_control, min_pair_distance, rpf_force, rpf_value, CollisionEvent, CollisionParams, CollisionVariant};
pub use robustness::{robustness_bound, robustness_ode_bound, RobustnessModel};
pub use rotational::{rotational_q1_control, RotationalTerm, SharedEdge};
pub use size::{
    inter_robot_errors, size_constants, size_cyclic_control, tau_bound, theorem5_certify, Shaping, SizeConstants,
    SizeParams, Theorem5Report,
};
