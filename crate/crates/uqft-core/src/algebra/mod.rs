//! State-label algebra: four-vector kinematics, Gaussian packet labels, and
//! the graded *-algebra of terminating sequences they generate.

pub mod lorentz;
pub mod packet;
pub mod sequence;

pub use lorentz::{dot3, norm3, FourVector, Lorentz, LorentzError, PoincareTag, Vec3};
pub use packet::{GaussianPacket, Kinematics, PacketError};
pub use sequence::{
    b_decompose, b_lift, poincare_apply, seq_product, star, time_translate, AlgebraError,
    FunctionSequence, SeqTerm, Slot,
};
