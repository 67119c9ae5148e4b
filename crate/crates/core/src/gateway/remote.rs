//! Client for an externally hosted decoder.
//!
//! Wire contract: `POST <endpoint>` with a JSON body
//! `{"space_id": "...", "version_tag": "...", "values": [f64, ...]}`; a
//! successful response is the raster bytes with an `image/*` content type.

use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::latent::LatentVector;

#[derive(Debug, Serialize)]
pub struct DecodeRequest<'a> {
    pub space_id: &'a str,
    pub version_tag: &'a str,
    pub values: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct RemoteDecoder {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteDecoder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteDecoder {
            endpoint: endpoint.into(),
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Returns `(media_type, bytes)`.
    pub fn fetch(&self, space_id: &str, version_tag: &str, z: &LatentVector) -> Result<(String, Vec<u8>)> {
        let body = serde_json::to_vec(&DecodeRequest {
            space_id,
            version_tag,
            values: z.values(),
        })?;
        let fail = |what: String| Error::DecodeFailure(format!("{}: {what}", self.endpoint));
        let response = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| fail(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(fail(format!("status {status}")));
        }
        let media_type = response
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(|v| v.split(';').next().unwrap_or("").trim().to_string())
            .unwrap_or_default();
        if !media_type.starts_with("image/") {
            return Err(fail(format!("unexpected content type `{media_type}`")));
        }
        let bytes = response
            .into_body()
            .read_to_vec()
            .map_err(|e| fail(e.to_string()))?;
        if bytes.is_empty() {
            return Err(fail("empty body".into()));
        }
        Ok((media_type, bytes))
    }
}
