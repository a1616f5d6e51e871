//! Geodesic flows of the two-parameter EPDiff metrics on diffeomorphism
//! groups: the kernel family K_{ε,η}, N-vorton Hamiltonian dynamics and its
//! two-body reduction, velocity fields and flow maps, a periodic spectral
//! solver for the momentum form, and vorton-cloud discretizations.

pub mod cloud;
pub mod error;
pub mod fields;
pub mod kernels;
pub mod ode;
pub mod quadrature;
pub mod specfun;
pub mod spectral;
pub mod twovorton;
pub mod vortons;

pub use error::{Error, Result};
pub use kernels::{radial_pair, KernelClass, KernelSpec, Mat3, RadialKernel, RadialValues, Vec3};
pub use ode::Method;
pub use specfun::{
    bessel_k, green_eval, mean_over_ball, radial_fourier_inverse, GreensKind, GreensProfile, Normalization,
};
pub use spectral::GridField;
pub use twovorton::{HyperboloidPoint, OrbitClass, ReducedTwoVortonState};
pub use vortons::{ConservedSnapshot, Trajectory, VortonSystem};
