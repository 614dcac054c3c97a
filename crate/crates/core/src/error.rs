use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polynomial must have degree 5 or 6, got {0}")]
    BadDegree(usize),
    #[error("branch points too close: separation {separation:e} below tolerance {tol:e}")]
    RepeatedRoots { separation: f64, tol: f64 },
    #[error("path passes within {clearance:e} of a branch point (tolerance {tol:e})")]
    PathTooClose { clearance: f64, tol: f64 },
    #[error("segments do not join: gap {0:e} after segment {1}")]
    BrokenPath(f64, usize),
    #[error("default generator routing failed: {0}")]
    DegenerateConfiguration(String),
    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tol:e}")]
    QuadratureNotConverged { estimate: f64, tol: f64 },
    #[error("quadratic differential vanishes on the path (relative size {0:e})")]
    ZeroOnPath(f64),
    #[error("step size underflow at s = {s} (step {step:e})")]
    StepUnderflow { s: f64, step: f64 },
    #[error("relation word defect {defect:e} exceeds tolerance {tol:e}")]
    RelationViolation { defect: f64, tol: f64 },
    #[error("trace vanishes numerically (|tr| = {0:e})")]
    VanishingTrace(f64),
    #[error("fewer than four usable points for the slope fit ({0})")]
    DegenerateFit(usize),
    #[error("paired edges do not match: {0}")]
    MismatchedEdges(String),
    #[error("surface is not connected")]
    Disconnected,
    #[error("trajectory hits a vertex of cone angle {angle} (vertex class {class})")]
    HitsConePoint { class: usize, angle: f64 },
    #[error("endpoint is {distance:e} from the start, more than eps = {eps:e}")]
    NotCloseEnough { distance: f64, eps: f64 },
    #[error("closing insert makes angle {angle} with the horizontal (bound {bound})")]
    InsertTooSteep { angle: f64, bound: f64 },
    #[error("no certified WKB curve found; best margin {best_margin}")]
    SearchExhausted { best_margin: f64 },
    #[error("no Newton start converged")]
    NoConvergence,
    #[error("Jacobian singular at a fiber point (|det J| = {0:e})")]
    JacobianSingular(f64),
    #[error("quadratic differential has colliding zeros (gap {0:e})")]
    ZeroCollision(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("point lies outside the model domain (margin {0})")]
    OutsideDomain(f64),
    #[error("finite-difference stencil leaves the domain (margin {margin}, reach {reach})")]
    StencilOutsideDomain { margin: f64, reach: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
