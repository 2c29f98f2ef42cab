use thiserror::Error;

use crate::layers::Position;
use crate::needles::Needle;

pub type Result<T> = std::result::Result<T, CscError>;

#[derive(Debug, Error)]
pub enum CscError {
    #[error("patch position ({row}, {col}) out of range for a {height}x{width} plane with filter side {side}")]
    Position {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
        side: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    /// The local lasso solve failed to certify its KKT conditions.
    #[error("local solver did not converge{}: KKT violation {violation:.3e}", at_position(.position))]
    Solver {
        position: Option<Position>,
        violation: f64,
        best: Needle,
    },

    #[error("{0} did not converge")]
    Convergence(&'static str),

    #[error("atom {atom} has degenerate norm {norm:.3e}")]
    DegenerateAtom { atom: usize, norm: f64 },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_position(p: &Option<Position>) -> String {
    match p {
        Some(p) => format!(" at needle ({}, {})", p.row, p.col),
        None => String::new(),
    }
}

impl CscError {
    /// Attaches a needle position to a solver error; other variants pass through.
    pub fn at(self, pos: Position) -> Self {
        match self {
            CscError::Solver {
                violation, best, ..
            } => CscError::Solver {
                position: Some(pos),
                violation,
                best,
            },
            e => e,
        }
    }
}
