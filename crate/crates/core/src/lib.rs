//! Spectra of symmetric pencils A v = λ (B − tC) v, their eigenvalue curves as
//! t → ±∞, the limiting problem on Ker(C), and numerical audits of the
//! associated convergence, blow-up and draining statements.

pub mod continuation;
pub mod error;
pub mod fem1d;
pub mod io;
pub mod linalg;
pub mod oracles;
pub mod pencil;
pub mod sturm1d;

pub use error::{PencilError, Result};
pub use linalg::{Basis, SpectralDecomp, SymMatrix};
pub use pencil::{Deflation, Eigenpair, Mode, Pencil, PencilSpec, Spectrum};
