use crate::error::{Error, Result};

/// Feature kinds with their frame dimensionality.
pub const REGISTRY: [(&str, usize); 10] = [
    ("MFCC", 13),
    ("PASE+", 256),
    ("vq_wav2vec", 512),
    ("wav2vec", 512),
    ("TERA", 768),
    ("AALBERT", 768),
    ("Mockingjay", 768),
    ("APC", 512),
    ("NPC", 512),
    ("DeCoAR", 2048),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureDescriptor {
    pub name: String,
    pub dim: usize,
}

/// Strips an `@version` suffix (as written by extractors that record the
/// upstream version next to the feature name).
fn base_name(name: &str) -> &str {
    name.split('@').next().unwrap_or(name)
}

/// Registry entry for `name` (case-insensitive, version suffix ignored).
pub fn registry_dim(name: &str) -> Option<FeatureDescriptor> {
    let base = base_name(name);
    REGISTRY
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(base))
        .map(|&(n, dim)| FeatureDescriptor { name: n.to_string(), dim })
}

/// Resolves the input dimension of a feature. Registered names must agree
/// with any explicit dim; unregistered names require one.
pub fn resolve_dim(name: &str, explicit: Option<usize>) -> Result<FeatureDescriptor> {
    match (registry_dim(name), explicit) {
        (Some(d), Some(dim)) if d.dim != dim => Err(Error::RegistryConflict {
            name: d.name,
            expected: d.dim,
            found: dim,
        }),
        (Some(d), _) => Ok(d),
        (None, Some(0)) => Err(Error::Parameter(format!("feature {name:?}: dim must be positive"))),
        (None, Some(dim)) => Ok(FeatureDescriptor { name: name.to_string(), dim }),
        (None, None) => Err(Error::UnknownFeature(name.to_string())),
    }
}
