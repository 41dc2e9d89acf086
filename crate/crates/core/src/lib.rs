//! Exact vertex-algebra and numerical contour tools for cubic affine `sl_M` Gaudin models.
//!
//! Everything exact is generic over a [`scalar::Field`]; the aliases below fix
//! it to `BigRational`, which is what the checks and the CLI use.

pub mod bethe;
pub mod contour;
pub mod gaudin;
pub mod linalg;
pub mod oper;
pub mod pbw;
pub mod poly;
pub mod ratfun;
pub mod scalar;
pub mod tensor;
pub mod twopoint;
pub mod vertex;

pub use num_rational::BigRational;

/// Exact rationals.
pub type Q = BigRational;
pub type QRatFun = ratfun::RatFun<Q>;
pub type QTwist = ratfun::TwistData<Q>;
pub type QState = pbw::PBWState<Q>;
pub type QFunState = vertex::FunState<Q>;
pub type QTensorTable = tensor::TensorTable<Q>;
pub type QGaudin = gaudin::GaudinContext<Q>;
pub type QMiura = oper::MiuraData<Q>;
pub type QVerma = bethe::TruncatedVerma<Q>;
pub type QTwoPoint = twopoint::TwoPointContext<Q>;
