//! Overlapping decomposition, partition of unity, GenEO coarse space and the
//! two-level additive Schwarz operators built on them.

mod geneo;
mod layout;
mod schwarz;

pub use geneo::{
    build_geneo_coarse, geneo_subdomain, subdomain_neumann, CoarseSpace, SubdomainCoarse,
    GENEO_REGULARIZATION,
};
pub use layout::{
    build_decomposition, build_partition_of_unity, detect_changed_subdomains, Decomposition,
    ElementBlock, PartitionOfUnity, Subdomain,
};
pub use schwarz::{LocalProduct, SchwarzOperators};
