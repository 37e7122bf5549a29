//! Walks a review session the way the web UI would: accept the first
//! element, override a slot of the second, undo, then reopen the session
//! from its log and finish by accepting everything.
//!
//! ```text
//! cargo run -p pytypefill-cli --example review_session [PROJECT_DIR]
//! ```

use std::path::PathBuf;

use pytypefill_cli::session::{Action, CreateRequest, SlotDecision};
use pytypefill_cli::{Config, SessionStore};

fn accept_all(view: &pytypefill_cli::session::CurrentView) -> Vec<SlotDecision> {
    view.slots
        .iter()
        .filter(|s| s.pending)
        .map(|s| SlotDecision { slot: s.slot, action: Action::Accept, ty: None })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fig1"));
    let state = tempfile::tempdir()?;
    let config = Config { state_dir: state.path().to_path_buf(), ..Config::default() };

    let store = SessionStore::new(config.clone(), Some(project), false);
    let id = {
        let session = store.create(CreateRequest::default())?;
        let mut s = session.lock().unwrap();
        println!("session {} with {} elements", s.id(), s.element_count());

        let view = s.current();
        println!("accepting {}", view.element_id.as_ref().map_or("-", |e| e.as_str()));
        s.decide(&accept_all(&view))?;

        let view = s.current();
        let mut decisions = accept_all(&view);
        if let Some(first) = decisions.first_mut() {
            println!("overriding {} slot {} with `object`", view.element_id.as_ref().unwrap().as_str(), first.slot);
            *first = SlotDecision { slot: first.slot, action: Action::Override, ty: Some("object".into()) };
        }
        s.decide(&decisions)?;
        println!("decided {} elements, cursor {}", s.stats().decided_elements, s.current().cursor);
        // Undo rewinds the last fully decided element.
        s.undo()?;
        println!("after undo the cursor is {}", s.current().cursor);
        s.id().to_string()
    };

    // A fresh store stands in for a restarted service.
    let store = SessionStore::new(config, None, false);
    let session = store.get(&id)?;
    let mut s = session.lock().unwrap();
    println!("reopened at cursor {}", s.current().cursor);
    while !s.is_done() {
        let view = s.current();
        s.decide(&accept_all(&view))?;
    }
    let stats = s.stats();
    println!(
        "done: {} elements decided, {} accepted, {} overridden",
        stats.decided_elements, stats.accepted, stats.overridden
    );
    println!("{}", s.assignment().to_json());
    Ok(())
}
