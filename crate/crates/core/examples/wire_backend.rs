//! Decodes through the HTTP predictor. A stand-in model server runs on a
//! local port and answers every request by typing all markers as `int`;
//! pass a URL to talk to a real server instead.
//!
//! ```text
//! cargo run --example wire_backend [URL]
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use pytypefill::*;

/// Minimal single-threaded HTTP endpoint speaking the predictor protocol.
fn spawn_stand_in() -> std::io::Result<String> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let url = format!("http://{}/predict", listener.local_addr()?);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let mut reader = BufReader::new(&stream);
            let mut length = 0;
            let mut line = String::new();
            while reader.read_line(&mut line).unwrap_or(0) > 0 && line != "\r\n" {
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                line.clear();
            }
            let mut body = vec![0; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
            let n = request["marker_count"].as_u64().unwrap_or(0);
            let raw: String = (0..n).map(|i| format!("<extra_id_{i}>int")).collect();
            let reply = serde_json::json!({ "raw_output": raw }).to_string();
            let _ = (&stream).write_all(
                format!("HTTP/1.1 200 OK\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}", reply.len()).as_bytes(),
            );
        }
    });
    Ok(url)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let url = match std::env::args().nth(1) {
        Some(url) => url,
        None => spawn_stand_in()?,
    };
    let predictor = WirePredictor::new(WireConfig::new(&url))?;
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/reverse");
    let project = load_project(&root)?.preprocessed();
    let graph = build_usage_graph(&project);
    let plan = make_plan(&graph, Strategy::UseeToUser, 0);
    let (m, trace) = run_decoding(&project, &graph, &plan, &predictor, &AtomTokenizer, &DecodeConfig::default());
    println!("backend {url}: {} visits, {} failed", trace.len(), trace.failures());
    for (id, slot, t) in m.iter() {
        println!("  {:<24} #{slot} {}", id.as_str(), t.ty);
    }
    Ok(())
}
