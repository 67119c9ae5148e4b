use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::Value;

use deep_mcmcp::gateway::{content_hash, DecoderBinding, Gateway, ImageCache, ProceduralRenderer};
use deep_mcmcp::latent::{LatentSpace, LatentVector};
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::service::{replay_log, Clock, EventKind, EventLog, Experiment, ExperimentConfig};
use deep_mcmcp::synthetic::PlantedDesign;
use deep_mcmcp::Error;

const DIM: usize = 8;

/// A stand-in image service on an ephemeral port; counts decode requests.
fn spawn_decoder() -> (SocketAddr, Arc<AtomicUsize>) {
    let hits = Arc::new(AtomicUsize::new(0));
    let app = Router::new()
        .route("/ok", post(render))
        .route("/fail", post(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "boom") }))
        .route("/text", post(|| async { "not an image" }))
        .route(
            "/slow",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(3)).await;
                ([(header::CONTENT_TYPE, "image/png")], vec![1u8])
            }),
        )
        .with_state(hits.clone());
    let std_listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    std_listener.set_nonblocking(true).unwrap();
    let addr = std_listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (addr, hits)
}

async fn render(State(hits): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> impl axum::response::IntoResponse {
    hits.fetch_add(1, Ordering::SeqCst);
    assert_eq!(body["space_id"], "objects");
    assert_eq!(body["version_tag"], "gan-v2");
    let values: Vec<f64> = serde_json::from_value(body["values"].clone()).unwrap();
    let png = ProceduralRenderer::new(DIM, "gan-v2")
        .unwrap()
        .render_png(&LatentVector(values))
        .unwrap();
    ([(header::CONTENT_TYPE, "image/png")], png)
}

fn gateway(addr: SocketAddr, path: &str, timeout_ms: u64) -> Gateway {
    let space = LatentSpace::unit_hypercube("objects", DIM).unwrap();
    let binding = DecoderBinding::remote(format!("http://{addr}{path}"), "gan-v2", timeout_ms);
    Gateway::new(space, binding, ImageCache::in_memory()).unwrap()
}

#[test]
fn remote_images_are_cached_by_content() {
    let (addr, hits) = spawn_decoder();
    let gw = gateway(addr, "/ok", 5000);
    let z = LatentVector(vec![0.1; DIM]);
    let first = gw.decode(&z).unwrap();
    assert_eq!(first.media_type, "image/png");
    assert_eq!(first.content_hash, content_hash(&first.bytes));
    let again = gw.decode(&z).unwrap();
    assert_eq!(again.content_hash, first.content_hash);
    assert_eq!(hits.load(Ordering::SeqCst), 1);
    assert_eq!(gw.image(&first.content_hash).unwrap().bytes, first.bytes);
}

#[test]
fn on_disk_cache_survives_a_new_gateway() {
    let (addr, hits) = spawn_decoder();
    let dir = tempfile::tempdir().unwrap();
    let space = LatentSpace::unit_hypercube("objects", DIM).unwrap();
    let binding = DecoderBinding::remote(format!("http://{addr}/ok"), "gan-v2", 5000);
    let hash = {
        let gw = Gateway::new(space.clone(), binding.clone(), ImageCache::on_disk(dir.path()).unwrap()).unwrap();
        gw.decode(&LatentVector(vec![-0.3; DIM])).unwrap().content_hash
    };
    let gw = Gateway::new(space, binding, ImageCache::on_disk(dir.path()).unwrap()).unwrap();
    assert!(gw.image(&hash).unwrap().bytes.starts_with(b"\x89PNG"));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn bad_responses_are_decode_failures() {
    let (addr, _) = spawn_decoder();
    let z = LatentVector(vec![0.0; DIM]);
    for path in ["/fail", "/text"] {
        let err = gateway(addr, path, 5000).decode(&z).unwrap_err();
        assert!(matches!(err, Error::DecodeFailure(_)), "{path}: {err}");
    }
}

#[test]
fn slow_and_absent_decoders_fail_within_the_timeout() {
    let (addr, _) = spawn_decoder();
    let z = LatentVector(vec![0.0; DIM]);
    let started = Instant::now();
    let err = gateway(addr, "/slow", 300).decode(&z).unwrap_err();
    assert!(matches!(err, Error::DecodeFailure(_)));
    assert!(started.elapsed() < Duration::from_secs(2));

    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let err = gateway(closed, "/ok", 300).decode(&z).unwrap_err();
    assert!(matches!(err, Error::DecodeFailure(_)));
}

fn experiment(gateway: Gateway) -> Experiment {
    let space = LatentSpace::unit_hypercube("objects", DIM).unwrap();
    let mut targets = PlantedDesign::five_in_eight().targets(1).unwrap();
    targets.truncate(2);
    let mut config = ExperimentConfig::simulated(space, ProposalConfig::objects(), targets, 4);
    config.decoder = gateway.binding().clone();
    Experiment::create(config, EventLog::in_memory(), Some(gateway), Clock::Logical(0)).unwrap()
}

#[test]
fn decode_failure_discards_the_session() {
    let (addr, _) = spawn_decoder();
    let mut exp = experiment(gateway(addr, "/fail", 2000));
    let err = exp.start_session("p1").unwrap_err();
    assert!(matches!(err, Error::DecodeFailure(_)));
    assert_eq!(exp.engine().active_leases(), 0);
    let kinds: Vec<&EventKind> = exp.log().events().iter().map(|e| &e.event).collect();
    assert!(matches!(kinds.last(), Some(EventKind::SessionDiscarded { .. })));
    assert!(!kinds.iter().any(|k| matches!(k, EventKind::TrialServed(_))));
    let state = replay_log(exp.log().events()).unwrap();
    assert_eq!(state.engine.unwrap().active_leases(), 0);
}

#[test]
fn served_trials_reference_cached_remote_images() {
    let (addr, _) = spawn_decoder();
    let mut exp = experiment(gateway(addr, "/ok", 5000));
    let start = exp.start_session("p1").unwrap();
    let gw = exp.gateway().unwrap();
    for url in [&start.trial.image_left, &start.trial.image_right] {
        let hash = url.as_deref().unwrap().strip_prefix("/images/").unwrap();
        assert!(gw.image(hash).unwrap().bytes.starts_with(b"\x89PNG"));
    }
}
