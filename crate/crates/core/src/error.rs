use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model or solver parameter is outside its admissible domain.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// Growth has no positive zero and no override density was given.
    NoConstantState,
    /// `w_u = 0`: the constant state is stable for every α.
    DegenerateMap,
    /// `f_u = 0`: the second-order correction divides by `f_u`.
    GrowthDegenerate,
    /// The `cos(2nx)` block of the second-order system is singular
    /// (mode `2n` is critical at the same α).
    ResonantMode {
        n: u32,
    },
    /// `α''(0) = 0`; higher-order terms would decide the direction.
    DegenerateCurvature,
    /// Closed-form and projected curvature disagree.
    CurvatureMismatch {
        closed_form: f64,
        projected: f64,
    },
    /// No leading-order branch on the requested side of the threshold.
    WrongSide,
    /// A field became non-finite or exceeded the blow-up ceiling.
    BlowUp {
        t: f64,
    },
    /// Field length does not match the grid.
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    InsufficientData(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::NoConstantState => write!(
                f,
                "no positive constant state (set u_star for no-growth models)"
            ),
            Error::DegenerateMap => write!(
                f,
                "w_u = 0: constant state is stable for every aggregation strength"
            ),
            Error::GrowthDegenerate => write!(
                f,
                "f_u = 0: second-order coefficients are undefined without growth"
            ),
            Error::ResonantMode { n } => {
                write!(f, "mode {} is critical together with mode {n}", 2 * n)
            }
            Error::DegenerateCurvature => write!(
                f,
                "alpha''(0) = 0: bifurcation direction undetermined at this order"
            ),
            Error::CurvatureMismatch {
                closed_form,
                projected,
            } => write!(
                f,
                "closed-form alpha''(0) = {closed_form} disagrees with projection {projected}"
            ),
            Error::WrongSide => write!(f, "no leading-order branch on this side of the threshold"),
            Error::BlowUp { t } => write!(f, "solution blew up at t = {t}"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "field has {found} values, grid needs {expected}")
            }
            Error::InsufficientData(what) => write!(f, "insufficient data: {what}"),
        }
    }
}

impl core::error::Error for Error {}
