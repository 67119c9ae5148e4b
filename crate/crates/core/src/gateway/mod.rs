//! Latent vector to image decoding behind one contract.

mod cache;
mod procedural;
mod remote;

use std::collections::HashMap;
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{content_hash, ImageCache};
pub use procedural::{ProceduralRenderer, IMAGE_SIZE, N_ATTRIBUTES};
pub use remote::{DecodeRequest, RemoteDecoder};

use crate::error::{Error, Result};
use crate::latent::{LatentSpace, LatentVector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub content_hash: String,
    pub media_type: String,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Procedural,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderBinding {
    pub kind: DecoderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_version")]
    pub version_tag: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_version() -> String {
    "procedural-v1".into()
}

fn default_timeout() -> u64 {
    5_000
}

impl Default for DecoderBinding {
    fn default() -> Self {
        Self::procedural()
    }
}

impl DecoderBinding {
    pub fn procedural() -> Self {
        DecoderBinding {
            kind: DecoderKind::Procedural,
            endpoint: None,
            version_tag: default_version(),
            timeout_ms: default_timeout(),
        }
    }

    pub fn remote(endpoint: impl Into<String>, version_tag: impl Into<String>, timeout_ms: u64) -> Self {
        DecoderBinding {
            kind: DecoderKind::Remote,
            endpoint: Some(endpoint.into()),
            version_tag: version_tag.into(),
            timeout_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == DecoderKind::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::config("decoder.endpoint", "a remote decoder needs an endpoint"));
        }
        if self.timeout_ms == 0 {
            return Err(Error::config("decoder.timeout_ms", "must be positive"));
        }
        if self.version_tag.is_empty() {
            return Err(Error::config("decoder.version_tag", "must not be empty"));
        }
        Ok(())
    }
}

enum Backend {
    Procedural(ProceduralRenderer),
    Remote(RemoteDecoder),
}

/// Decodes latent vectors for one space and keeps every image in a
/// content-addressed cache. Repeated latents are served from the cache
/// without a second render or request.
pub struct Gateway {
    space: LatentSpace,
    binding: DecoderBinding,
    backend: Backend,
    cache: ImageCache,
    index: RwLock<HashMap<Vec<u64>, String>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("space_id", &self.space.space_id)
            .field("binding", &self.binding)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(space: LatentSpace, binding: DecoderBinding, cache: ImageCache) -> Result<Self> {
        binding.validate()?;
        space.validate()?;
        let backend = match binding.kind {
            DecoderKind::Procedural => {
                Backend::Procedural(ProceduralRenderer::new(space.dim, &binding.version_tag)?)
            }
            DecoderKind::Remote => Backend::Remote(RemoteDecoder::new(
                binding.endpoint.clone().expect("validated"),
                Duration::from_millis(binding.timeout_ms),
            )),
        };
        Ok(Gateway {
            space,
            binding,
            backend,
            cache,
            index: RwLock::new(HashMap::new()),
        })
    }

    pub fn binding(&self) -> &DecoderBinding {
        &self.binding
    }

    pub fn cache(&self) -> &ImageCache {
        &self.cache
    }

    pub fn decode(&self, z: &LatentVector) -> Result<ImageRef> {
        self.space.check_state(z)?;
        let key: Vec<u64> = z.values().iter().map(|v| v.to_bits()).collect();
        let known = self.index.read().expect("index lock").get(&key).cloned();
        if let Some(hash) = known {
            if let Some(hit) = self.cache.get(&hash)? {
                return Ok(hit);
            }
        }
        let (media_type, bytes) = match &self.backend {
            Backend::Procedural(r) => ("image/png".to_string(), r.render_png(z)?),
            Backend::Remote(r) => r.fetch(&self.space.space_id, &self.binding.version_tag, z)?,
        };
        let image = self.cache.put(&media_type, bytes)?;
        self.index
            .write()
            .expect("index lock")
            .insert(key, image.content_hash.clone());
        Ok(image)
    }

    pub fn image(&self, hash: &str) -> Result<ImageRef> {
        self.cache
            .get(hash)?
            .ok_or_else(|| Error::NotFound(format!("image `{hash}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binding_validation() {
        assert!(DecoderBinding::procedural().validate().is_ok());
        let mut b = DecoderBinding::remote("", "v", 100);
        assert!(matches!(b.validate(), Err(Error::Config { .. })));
        b.endpoint = Some("http://127.0.0.1:1/decode".into());
        assert!(b.validate().is_ok());
        b.timeout_ms = 0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn same_latent_same_hash() {
        let space = LatentSpace::unit_hypercube("s", 4).unwrap();
        let g = Gateway::new(space, DecoderBinding::procedural(), ImageCache::in_memory()).unwrap();
        let z = LatentVector(vec![0.1, 0.2, -0.3, 0.4]);
        let a = g.decode(&z).unwrap();
        let b = g.decode(&z).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        assert_eq!(content_hash(&a.bytes), a.content_hash);
        assert_eq!(g.image(&a.content_hash).unwrap().bytes, a.bytes);
        assert!(g.decode(&LatentVector(vec![2.0, 0.0, 0.0, 0.0])).is_err());
    }
}
