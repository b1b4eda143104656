//! Numerical substrate: random streams, special functions, dense linear
//! algebra, the Lasso solver and a few samplers.

pub mod lasso;
pub mod linalg;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod stats;

pub use lasso::{lasso_fit, reid_sigma2, soft_threshold, LassoOptions};
pub use linalg::{least_squares, DesignMatrix, Qr};
pub use rng::{RngStream, StreamRng};
pub use sampling::{student_t_vector_sample, von_mises_sample};
pub use special::{chisq_cdf, chisq_density, chisq_quantile, norm_cdf};
