//! Expression mini-language, derivative jets, and the matrix-valued
//! differential-form algebra on chart domains.

pub mod expr;
pub mod form;
pub mod jet;
pub mod quad;

pub use expr::{parse_expr, Expr, ExprRef, ParseError};
pub use form::{ChartCoeffs, ExprMat, FormError, FormValue, IdxTuple, JetMat, MatrixForm};
pub use jet::{eval_jet, eval_value, EvalCtx, EvalError, Jet};
