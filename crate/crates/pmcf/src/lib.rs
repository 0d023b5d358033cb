//! Prescribed mean curvature flow of spacelike graphs in foliated Lorentz
//! manifolds.
//!
//! The geometry is generic over the scalar type ([`Real`]: `f32` or `f64`);
//! the aliases below fix `f64`.

pub use nalgebra;

pub mod chart;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod field;
pub mod foliation;
pub mod grid;
pub mod linalg;
pub mod real;
pub mod spacetimes;
pub mod surface;
pub mod sync;

pub use chart::{
    christoffel_at, metric_at, reference_norm, riemann_at, tilt_factor, ChartSpec, Christoffel, ReferenceFrame,
    Riemann, Slot, Tensor, TimeFunction,
};
pub use diagnostics::{
    barrier_check, decay_fit, ecker_quantity, evolution_residuals, BarrierSpec, DecayFit, DiagnosticsConfig,
    DiagnosticsRecord,
};
pub use engine::{
    flow_velocity, linearized_coefficients, run_flow, stationary_solve, step, Boundary, Flow, FlowConfig, FlowRun,
    Integrator, LinearizedCoefficients, Termination,
};
pub use error::{GeomError, Result};
pub use field::{ConstantField, PrescribedCurvatureField};
pub use foliation::{
    foliation_bounds_check, integrate_foliation, BoundsReport, FoliationConstants, FoliationOptions, FoliationSeries,
    FoliationState,
};
pub use grid::{GraphState, SpatialGrid, Topology};
pub use real::Real;
pub use surface::{
    embedding_geometry, graph_geometry, surface_laplacian, Background, NodeGeometry, Orientation, SurfaceGeometry,
};

pub type Graph = GraphState<f64>;
pub type Grid = SpatialGrid<f64>;
pub type Geometry = SurfaceGeometry<f64>;
pub type Frame = ReferenceFrame<f64>;
