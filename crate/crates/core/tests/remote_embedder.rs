use std::time::Duration;

use roleframe::embed::{EmbedError, RemoteEmbedder};
use roleframe::video::Frame;

#[test]
fn unreachable_service_exhausts_retries() {
    // nothing listens on this port; every attempt fails fast
    let embedder = RemoteEmbedder::new("http://127.0.0.1:9".into(), None)
        .with_retries(2)
        .with_timeout(Duration::from_millis(500));
    let frame = Frame::new(0, 0.0, 4, 4, 1, vec![0; 16]);
    match embedder.embed_batch(&[&frame]) {
        Err(EmbedError::RemoteExhausted { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected RemoteExhausted, got {other:?}"),
    }
}
