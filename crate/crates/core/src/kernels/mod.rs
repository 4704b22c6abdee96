//! Random-variate generators and kernel functions used by the full conditionals.

mod categorical;
mod gig;
mod gp;
mod truncnorm;
mod wishart;

pub use categorical::{sample_categorical_index, sample_categorical_loglik};
pub use gig::{sample_gig, GigParams};
pub use gp::{default_kappa_grid, gp_kernel_matrix, se_kernel, DEFAULT_GP_JITTER};
pub use truncnorm::sample_truncated_normal;
pub use wishart::{sample_inverse_wishart, sample_matrix_normal};

