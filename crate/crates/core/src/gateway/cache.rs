//! Content-addressed image store.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use super::ImageRef;
use crate::error::{Error, Result};

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn extension(media_type: &str) -> &'static str {
    match media_type {
        "image/png" => "png",
        "image/jpeg" => "jpg",
        "image/webp" => "webp",
        "image/gif" => "gif",
        _ => "bin",
    }
}

fn media_type_of(ext: &str) -> &'static str {
    match ext {
        "png" => "image/png",
        "jpg" => "image/jpeg",
        "webp" => "image/webp",
        "gif" => "image/gif",
        _ => "application/octet-stream",
    }
}

const EXTENSIONS: [&str; 5] = ["png", "jpg", "webp", "gif", "bin"];

fn valid_hash(hash: &str) -> bool {
    hash.len() == 64 && hash.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Images keyed by the SHA-256 of their bytes, either in memory or as files
/// under `dir/<first two hex digits>/<hash>.<ext>`.
#[derive(Debug)]
pub struct ImageCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, (String, Vec<u8>)>>,
}

impl ImageCache {
    pub fn in_memory() -> Self {
        ImageCache {
            dir: None,
            memory: RwLock::new(HashMap::new()),
        }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ImageCache {
            dir: Some(dir),
            memory: RwLock::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(dir: &Path, hash: &str, ext: &str) -> PathBuf {
        dir.join(&hash[..2]).join(format!("{hash}.{ext}"))
    }

    pub fn put(&self, media_type: &str, bytes: Vec<u8>) -> Result<ImageRef> {
        let hash = content_hash(&bytes);
        match &self.dir {
            Some(dir) => {
                let path = Self::path_for(dir, &hash, extension(media_type));
                if !path.exists() {
                    fs::create_dir_all(path.parent().expect("has parent"))?;
                    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
                    fs::write(&tmp, &bytes)?;
                    fs::rename(&tmp, &path)?;
                }
            }
            None => {
                self.memory
                    .write()
                    .expect("cache lock")
                    .entry(hash.clone())
                    .or_insert_with(|| (media_type.to_string(), bytes.clone()));
            }
        }
        Ok(ImageRef {
            content_hash: hash,
            media_type: media_type.to_string(),
            bytes,
        })
    }

    /// Looks up an image; bytes whose digest no longer matches the key are
    /// reported as corrupt rather than returned.
    pub fn get(&self, hash: &str) -> Result<Option<ImageRef>> {
        if !valid_hash(hash) {
            return Err(Error::Domain(format!("`{hash}` is not a content hash")));
        }
        let found = match &self.dir {
            Some(dir) => {
                let mut found = None;
                for ext in EXTENSIONS {
                    let path = Self::path_for(dir, hash, ext);
                    if path.exists() {
                        found = Some((media_type_of(ext).to_string(), fs::read(path)?));
                        break;
                    }
                }
                found
            }
            None => self.memory.read().expect("cache lock").get(hash).cloned(),
        };
        let Some((media_type, bytes)) = found else {
            return Ok(None);
        };
        if content_hash(&bytes) != hash {
            return Err(Error::DecodeFailure(format!("cached image `{hash}` is corrupt")));
        }
        Ok(Some(ImageRef {
            content_hash: hash.to_string(),
            media_type,
            bytes,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_round_trip() {
        let cache = ImageCache::in_memory();
        let r = cache.put("image/png", b"abc".to_vec()).unwrap();
        assert_eq!(r.content_hash, content_hash(b"abc"));
        let back = cache.get(&r.content_hash).unwrap().unwrap();
        assert_eq!(back.bytes, b"abc");
        assert_eq!(back.media_type, "image/png");
        assert!(cache.get(&content_hash(b"other")).unwrap().is_none());
        assert!(cache.get("../etc/passwd").is_err());
    }

    #[test]
    fn disk_layout_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ImageCache::on_disk(dir.path()).unwrap();
        let r = cache.put("image/png", vec![1, 2, 3]).unwrap();
        let path = dir
            .path()
            .join(&r.content_hash[..2])
            .join(format!("{}.png", r.content_hash));
        assert!(path.exists());
        assert_eq!(cache.get(&r.content_hash).unwrap().unwrap().bytes, vec![1, 2, 3]);
        fs::write(&path, [9, 9]).unwrap();
        assert!(matches!(cache.get(&r.content_hash), Err(Error::DecodeFailure(_))));
    }
}
