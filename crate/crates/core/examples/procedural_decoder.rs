//! The built-in procedural decoder and the content-addressed image cache.
//!
//! Writes a strip of images along one latent direction to a directory
//! (`procedural-strip` under the system temp dir unless given).

use std::path::PathBuf;

use deep_mcmcp::gateway::{DecoderBinding, Gateway, ImageCache};
use deep_mcmcp::latent::{LatentSpace, LatentVector};

fn main() -> deep_mcmcp::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("procedural-strip"));
    let space = LatentSpace::unit_hypercube("objects", 8)?;
    let gateway = Gateway::new(space, DecoderBinding::procedural(), ImageCache::on_disk(out.join("cache"))?)?;
    for i in 0..=8 {
        let t = -1.0 + 0.25 * i as f64;
        let z = LatentVector(vec![t, 0.0, 0.0, 0.0, -t / 2.0, 0.0, 0.0, 0.0]);
        let image = gateway.decode(&z)?;
        let path = out.join(format!("step-{i}.png"));
        std::fs::write(&path, &image.bytes)?;
        println!("{} {} bytes  {}", &image.content_hash[..12], image.bytes.len(), path.display());
    }
    // decoding the same point again is served from the cache
    let again = gateway.decode(&LatentVector(vec![-1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]))?;
    println!("repeat decode -> {}", &again.content_hash[..12]);
    Ok(())
}
