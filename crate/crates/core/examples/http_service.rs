//! The respondent-facing HTTP API, driven by a scripted client.
//!
//! Starts the service on an ephemeral port, completes one 64-trial session
//! by clicking sides, then reads the admin view and the export.

use std::time::Duration;

use serde_json::{json, Value};

use deep_mcmcp::gateway::{DecoderBinding, Gateway, ImageCache};
use deep_mcmcp::latent::LatentSpace;
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::service::{http, Clock, EventLog, Experiment, ExperimentConfig};
use deep_mcmcp::synthetic::PlantedDesign;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = LatentSpace::unit_hypercube("objects", 8)?;
    let mut targets = PlantedDesign::five_in_eight().targets(1)?;
    targets.truncate(2);
    let config = ExperimentConfig::simulated(space.clone(), ProposalConfig::objects(), targets, 9);
    let gateway = Gateway::new(space, DecoderBinding::procedural(), ImageCache::in_memory())?;
    let exp = Experiment::create(config, EventLog::in_memory(), Some(gateway), Clock::System)?;

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    runtime.spawn(http::serve(exp, listener, Duration::from_secs(30)));
    println!("serving on {base}");

    let agent = ureq::Agent::new_with_defaults();
    let post = |path: &str, body: Value| -> Result<Value, Box<dyn std::error::Error>> {
        let mut response = agent
            .post(format!("{base}{path}"))
            .header("content-type", "application/json")
            .send(body.to_string())?;
        Ok(serde_json::from_str(&response.body_mut().read_to_string()?)?)
    };
    let get = |path: &str| -> Result<Value, Box<dyn std::error::Error>> {
        Ok(serde_json::from_str(&agent.get(format!("{base}{path}")).call()?.body_mut().read_to_string()?)?)
    };

    let start = post("/sessions", json!({ "participant_id": "demo" }))?;
    let mut trial = start["trial"].clone();
    let mut image_bytes = 0;
    loop {
        let left = agent.get(format!("{base}{}", trial["image_left"].as_str().unwrap())).call()?;
        image_bytes += left.into_body().read_to_vec()?.len();
        // this respondent always clicks the left image
        let outcome = post(&format!("/trials/{}/choice", trial["trial_id"].as_str().unwrap()), json!({ "side": "left" }))?;
        match outcome["status"].as_str() {
            Some("next") => trial = outcome["trial"].clone(),
            Some("completed") => {
                println!("completed; confirmation code {}", outcome["confirmation_code"]);
                break;
            }
            other => return Err(format!("unexpected outcome {other:?}").into()),
        }
    }
    println!("fetched {image_bytes} bytes of left-hand images");

    let chains = get("/admin/chains")?;
    for c in chains["chains"].as_array().unwrap() {
        println!("{:<14} length {:>3}  accepted {:>3}", c["chain_id"].as_str().unwrap(), c["length"], c["accept_count"]);
    }
    let export = get("/export?stride=1")?;
    println!("export at seq {}: {} samples", export["seq"], export["records"].as_array().unwrap().len());
    Ok(())
}
