use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the analysis pipeline.
///
/// Mesh and solver failures are never repaired silently; they surface here
/// with enough context to identify the offending entity.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is not closed: {open_edges} open edge(s), {overshared_edges} edge(s) shared by >2 faces")]
    NotClosed {
        open_edges: usize,
        overshared_edges: usize,
    },

    #[error("mesh boundary is not connected: {components} components")]
    NotConnected { components: usize },

    #[error("mesh is inside out or degenerate: signed volume {volume:.6e} is not positive")]
    BadOrientation { volume: f64 },

    #[error("{count} degenerate face(s) below area floor {floor:.3e}; first: face {first}")]
    DegenerateFaces {
        count: usize,
        first: usize,
        floor: f64,
    },

    #[error("isosurface extraction failed: {0}")]
    Mesher(String),

    #[error("inversion center is outside the domain or within {min_dist:.3e} of the boundary (floor {floor:.3e})")]
    BadInversionCenter { min_dist: f64, floor: f64 },

    #[error("panel count {panels} exceeds solver budget {budget}")]
    PanelBudget { panels: usize, budget: usize },

    #[error("boundary-element system is ill-conditioned near panel {panel} (area {area:.3e})")]
    IllConditioned { panel: usize, area: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("evaluation point is inside the domain or in the near-field band (distance {dist:.3e}, floor {floor:.3e})")]
    NearField { dist: f64, floor: f64 },

    #[error("boundary-condition residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    BcResidual { residual: f64, tol: f64 },

    #[error("level t={t} is below the near-field floor t_min={t_min}")]
    LevelBelowFloor { t: f64, t_min: f64 },

    #[error("level t={t} rejected as near-critical: |grad w| below floor on {frac:.2}% of samples")]
    NearCritical { t: f64, frac: f64 },

    #[error("level set t={t} touches the sampling grid boundary")]
    GridClipped { t: f64 },

    #[error("sweep failed: {flagged} of {total} levels flagged (limit 20%)")]
    SweepTooCoarse { flagged: usize, total: usize },

    #[error("sweep too short to control tails: t_max={t_max} < 2")]
    SweepTooShort { t_max: f64 },

    #[error("boundary-limit extrapolation unstable: relative spread {spread:.3e} exceeds 5%")]
    ExtrapolationUnstable { spread: f64 },

    #[error("kernel identity `{name}` off by {diff:.3e} (tolerance {tol:.3e})")]
    KernelIdentity {
        name: &'static str,
        diff: f64,
        tol: f64,
    },

    #[error("computed capacity gap {gap:.3e} is not positive; quadrature failure")]
    NonPositiveGap { gap: f64 },

    #[error("no candidate ball found with separation angle >= {theta:.3} rad; smallest radius seen {best_r:.3e}")]
    NoAngleCandidate { theta: f64, best_r: f64 },

    #[error("query point is within sampling resolution h={h:.3e} of the boundary (distance {dist:.3e})")]
    TooNearBoundary { dist: f64, h: f64 },

    #[error("query point at ({x:.4}, {y:.4}, {z:.4}) is outside the domain")]
    OutsideDomain { x: f64, y: f64, z: f64 },

    #[error("flow step would exit the domain at ({x:.4}, {y:.4}, {z:.4}) even at the minimum step")]
    FlowExited { x: f64, y: f64, z: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
