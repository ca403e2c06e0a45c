//! Motion representation, 6D rotations, skeletal kinematics, skinning and
//! point-to-mesh binding.

pub mod binding;
pub mod body;
pub mod human;
pub mod kinematics;
pub mod rotation;
pub mod sequence;

pub use binding::{bind_points, deform_points, deform_points_with_normals, BarycentricBinding, BoundPoint};
pub use body::{BodyModel, BodyModelData};
pub use human::{Human, PosedHuman};
pub use kinematics::{forward_kinematics, joint_positions, lbs_skin, Affine};
pub use rotation::{rot6d_to_matrix, IDENTITY_6D};
pub use sequence::{frame_dim, Frame, MotionSequence};
