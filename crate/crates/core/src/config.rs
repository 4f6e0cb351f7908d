//! Named tuning constants.
//!
//! Desk-scale runs replace the paper-sized bounds of the underlying argument
//! with small measured proxies; every such proxy lives here with its
//! rationale rather than being scattered as magic numbers.

/// Hard cap on enumerated elements per ball; past this the machinery refuses
/// rather than thrash (typed `ElementBudget` error).
pub const DEFAULT_ELEMENT_CAP: usize = 5_000_000;

/// Default step budget for the reduction pipeline.
pub const DEFAULT_STEP_BUDGET: usize = 10;

/// Default wall-clock budget for the reduction pipeline, seconds.
pub const DEFAULT_TIME_BUDGET_SECS: u64 = 600;

/// Tolerance for exact identities evaluated in floating point (convolution
/// identities, summation by parts, Dirichlet residuals).
pub const IDENTITY_TOL: f64 = 1e-9;

/// Slack added to the Poincare comparison so that ties in the last float bit
/// do not flip a theorem into a violation.
pub const POINCARE_SLACK: f64 = 1e-9;

/// Dirichlet systems up to this many interior sites use the dense
/// full-pivoting solve; larger systems switch to conjugate gradients.
pub const DIRICHLET_DENSE_LIMIT: usize = 4000;

/// Residual target for the conjugate-gradient Dirichlet path.
pub const CG_TOL: f64 = 1e-12;

/// Walk-length exponent for the branch split in the almost-harmonic
/// construction: the sign-kernel branch fires when |grad f|_1 >= R^(-2/3).
pub const CASE_SPLIT_EXPONENT: f64 = 2.0 / 3.0;

/// Target exponent for the almost-harmonic defect: eps <= |S| * R^(-1/3).
pub const EPS_TARGET_EXPONENT: f64 = 1.0 / 3.0;

/// Below this norm the spectral projection is considered degenerate.
pub const PROJECTION_DEGENERACY: f64 = 1e-12;

/// Gram determinants clamp eigenvalues at this floor before taking products,
/// so a rank-deficient basis reports volume 0 instead of a junk negative.
pub const GRAM_EIGEN_CLAMP: f64 = 1e-9;

/// Default stop factor for the greedy dimension scan: a candidate joins the
/// basis only while it adds at least this much base-times-height volume.
pub const DEFAULT_DROP_FACTOR: f64 = 1e-3;

/// Multiplicative slack of the iterative minimum-volume-ellipsoid fit.
pub const MVEE_TOL: f64 = 1e-3;

/// Sample count for ellipsoid fitting: this many times dim^2 draws.
pub const OMEGA_SAMPLES_PER_DIM_SQ: usize = 20;

/// Acceptance proxy: translation matrices should be multiplicative within
/// this fraction of the smallest ellipsoid radius.
pub const MULT_DEFECT_ACCEPT_FACTOR: f64 = 0.1;

/// Acceptance proxy: box-principle representatives should sit within this
/// many mesh widths of the identity matrix.
pub const BOX_MESH_ACCEPT_FACTOR: f64 = 10.0;

/// Acceptance proxy: a direction counts as trivial when the deviation stays
/// below this fraction of lip(u) times the window radius.
pub const TRIVIAL_DIRECTION_ACCEPT: f64 = 0.05;

/// Newton polishing tolerance for polynomial roots feeding Mahler measures.
pub const ROOT_NEWTON_TOL: f64 = 1e-13;

/// Guard band around the unit circle: spectra within this slack of modulus 1
/// take the periodicity branch of the dichotomy.
pub const UNIT_CIRCLE_SLACK: f64 = 1e-9;

/// A growth witness must beat this rate margin or the rounding escalates.
pub const RATE_MIN_MARGIN: f64 = 1e-6;

/// Continued-fraction rounding ladder for eigenvector rationalization.
pub const CF_DENOMINATOR_LADDER: [u64; 3] = [1_000, 1_000_000, 1_000_000_000];

/// Default relation-search reach for torsion-free reduction: F(M) = 8M + 8.
pub const TORSION_F_SLOPE: u64 = 8;
pub const TORSION_F_OFFSET: u64 = 8;

/// Last-ratio threshold above which a growth sequence is flagged
/// exponential. Polynomial balls of degree d have last ratios near
/// ((r+1)/r)^d, well under this at the radii we scan; free and
/// automaton-fed groups sit at 2 or more.
pub const EXPONENTIAL_RATIO_FLAG: f64 = 1.5;

/// Desk-scale reduction loop: a step counts as descending when the measured
/// growth degree drops by at least this much.
pub const DEGREE_DROP_MIN: f64 = 0.5;

pub fn torsion_reach(m: u64) -> u64 {
    TORSION_F_SLOPE * m + TORSION_F_OFFSET
}
