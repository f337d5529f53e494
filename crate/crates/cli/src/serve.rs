// SPDX-License-Identifier: Apache-2.0

//! HTTP/WebSocket front end for a debug session.
//!
//! | method | path              | body / result                                    |
//! |--------|-------------------|--------------------------------------------------|
//! | GET    | `/api/modules`    | enumerated module descriptors                    |
//! | POST   | `/api/triggers`   | one trigger object or an array of them           |
//! | POST   | `/api/collection` | `{"action":"start"\|"stop","modules":"all"\|[id]}` |
//! | POST   | `/api/run`        | release a simulation held with `--hold`          |
//! | GET    | `/api/status`     | connection state, event count, chip cycle        |
//! | WS     | `/ws/events`      | merged event stream as JSON text messages        |
//!
//! Requests that need the chip answer 409 until a session exists and after
//! the simulation has ended. Every WebSocket client first receives all
//! events seen so far, then live events, and is closed once the stream ends.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tilesoc_host::{
    parse_trigger_file, Control, DebugModuleDescriptor, EventStream, ModuleKind, ModuleSet,
    Session, SessionError, SessionOptions, StreamMerger, TransportSpec, TriggerSpec,
};
use tokio::sync::watch;

use crate::{CmdResult, Exit, Failure};

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Simulator debug port.
    #[arg(long, value_name = "host:port")]
    pub connect: String,
    /// HTTP port; 0 picks a free one.
    #[arg(long, value_name = "port")]
    pub http: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Leave the simulation waiting until `POST /api/run`, and do not
    /// start collection automatically.
    #[arg(long)]
    pub hold: bool,
}

#[derive(Debug, Default, Clone, Copy, Serialize)]
struct Status {
    connected: bool,
    running: bool,
    ended: bool,
    events: usize,
}

struct Shared {
    control: Mutex<Option<Control>>,
    modules: Mutex<Vec<DebugModuleDescriptor>>,
    status: Mutex<Status>,
    history: Mutex<Vec<String>>,
    /// Bumped whenever `history` grows or the stream ends.
    notify: watch::Sender<u64>,
}

type AppState = Arc<Shared>;

impl Shared {
    fn new() -> Self {
        Shared {
            control: Mutex::new(None),
            modules: Mutex::new(Vec::new()),
            status: Mutex::new(Status::default()),
            history: Mutex::new(Vec::new()),
            notify: watch::channel(0).0,
        }
    }

    fn status(&self) -> Status {
        *self.status.lock().unwrap()
    }

    fn bump(&self) {
        self.notify.send_modify(|v| *v += 1);
    }

    fn append(&self, lines: Vec<String>) {
        if lines.is_empty() {
            return;
        }
        let mut h = self.history.lock().unwrap();
        h.extend(lines);
        self.status.lock().unwrap().events = h.len();
        drop(h);
        self.bump();
    }

    fn end(&self) {
        {
            let mut s = self.status.lock().unwrap();
            s.ended = true;
            s.running = false;
        }
        self.control.lock().unwrap().take();
        self.bump();
    }
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn session_error(e: SessionError) -> ApiError {
    let code = match e {
        SessionError::NoSuchModule(_) | SessionError::TypeMismatch { .. } => {
            StatusCode::BAD_REQUEST
        }
        SessionError::EndOfStream => StatusCode::CONFLICT,
        _ => StatusCode::BAD_GATEWAY,
    };
    ApiError(code, e.to_string())
}

/// Run `f` on the session's control side, one request at a time.
async fn with_control<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Control) -> Result<T, SessionError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = state.control.lock().unwrap();
        let Some(ctl) = guard.as_mut() else {
            let msg = if state.status().ended {
                "simulation has ended"
            } else {
                "not connected to a simulation"
            };
            return Err(ApiError(StatusCode::CONFLICT, msg.into()));
        };
        f(ctl).map_err(session_error)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn get_modules(
    State(state): State<AppState>,
) -> Result<Json<Vec<DebugModuleDescriptor>>, ApiError> {
    let st = state.status();
    if !st.connected {
        return Err(ApiError(
            StatusCode::CONFLICT,
            "not connected to a simulation".into(),
        ));
    }
    Ok(Json(state.modules.lock().unwrap().clone()))
}

fn parse_triggers(body: &str) -> Result<Vec<TriggerSpec>, ApiError> {
    let bad = |m: String| ApiError(StatusCode::BAD_REQUEST, m);
    let v: Value = serde_json::from_str(body).map_err(|e| bad(e.to_string()))?;
    if v.is_array() {
        parse_trigger_file(body).map_err(|e| bad(e.to_string()))
    } else {
        TriggerSpec::from_json(body)
            .map(|t| vec![t])
            .map_err(|e| bad(e.to_string()))
    }
}

async fn post_triggers(
    State(state): State<AppState>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let specs = parse_triggers(&body)?;
    let n = specs.len();
    with_control(&state, move |c| {
        specs.iter().try_for_each(|s| c.set_trigger(s))
    })
    .await?;
    Ok(Json(json!({ "applied": n })))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum CollectionAction {
    Start,
    Stop,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ModulesField {
    Named(String),
    Ids(Vec<u8>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CollectionRequest {
    action: CollectionAction,
    modules: ModulesField,
}

async fn post_collection(
    State(state): State<AppState>,
    body: String,
) -> Result<Json<Value>, ApiError> {
    let bad = |m: String| ApiError(StatusCode::BAD_REQUEST, m);
    let req: CollectionRequest = serde_json::from_str(&body).map_err(|e| bad(e.to_string()))?;
    let set = match req.modules {
        ModulesField::Named(s) if s == "all" => ModuleSet::All,
        ModulesField::Named(s) => {
            return Err(bad(format!(
                "modules must be \"all\" or a list of ids, got {s:?}"
            )))
        }
        ModulesField::Ids(ids) => ModuleSet::Some(ids),
    };
    let start = matches!(req.action, CollectionAction::Start);
    with_control(&state, move |c| {
        if start {
            c.start_collection(&set)
        } else {
            c.stop_collection(&set)
        }
    })
    .await?;
    Ok(Json(json!({ "ok": true })))
}

async fn post_run(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    with_control(&state, Control::run).await?;
    state.status.lock().unwrap().running = true;
    Ok(Json(json!({ "ok": true })))
}

async fn get_status(State(state): State<AppState>) -> Json<Value> {
    let st = state.status();
    let mut v = serde_json::to_value(st).expect("status serializes");
    if st.connected && !st.ended {
        if let Ok(cycle) = with_control(&state, Control::cycle).await {
            v["cycle"] = json!(cycle);
        }
    }
    Json(v)
}

async fn ws_events(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_events(state, socket))
}

async fn stream_events(state: AppState, mut socket: WebSocket) {
    let mut rx = state.notify.subscribe();
    let mut sent = 0usize;
    loop {
        rx.borrow_and_update();
        let batch: Vec<String> = state.history.lock().unwrap()[sent..].to_vec();
        let ended = state.status().ended;
        for line in batch {
            if socket.send(Message::Text(line.into())).await.is_err() {
                return;
            }
            sent += 1;
        }
        if ended && sent == state.history.lock().unwrap().len() {
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
        if rx.changed().await.is_err() {
            return;
        }
    }
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/modules", get(get_modules))
        .route("/api/triggers", post(post_triggers))
        .route("/api/collection", post(post_collection))
        .route("/api/run", post(post_run))
        .route("/api/status", get(get_status))
        .route("/ws/events", get(ws_events))
        .with_state(state)
}

/// Connect (retrying until the simulator is up), set up the session and
/// then pump events into the shared history until the stream ends.
fn session_thread(state: AppState, addr: String, hold: bool) {
    let session = loop {
        match Session::connect(TransportSpec::Tcp(addr.clone()), SessionOptions::default()) {
            Ok(s) => break s,
            Err(_) => std::thread::sleep(Duration::from_millis(200)),
        }
    };
    let (mut control, events) = session.split();
    let modules = match control.enumerate() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("tilesoc: enumerate failed: {e}");
            state.end();
            return;
        }
    };
    if !hold {
        if let Err(e) = control
            .start_collection(&ModuleSet::All)
            .and_then(|_| control.run())
        {
            eprintln!("tilesoc: cannot start the simulation: {e}");
        }
    }
    let tracked: Vec<u8> = modules
        .iter()
        .filter(|d| d.module_type != ModuleKind::Extif)
        .map(|d| d.id)
        .collect();
    *state.modules.lock().unwrap() = modules;
    *state.control.lock().unwrap() = Some(control);
    {
        let mut s = state.status.lock().unwrap();
        s.connected = true;
        s.running = !hold;
    }
    state.bump();
    pump_events(&state, events, StreamMerger::new(tracked));
}

fn pump_events(state: &Shared, mut events: EventStream, mut merger: StreamMerger) {
    let lines =
        |evs: Vec<tilesoc_host::TraceEvent>| evs.iter().map(|e| e.to_json()).collect::<Vec<_>>();
    loop {
        match events.next_event() {
            Ok(e) => match merger.push(e) {
                Ok(ready) => state.append(lines(ready)),
                Err(err) => eprintln!("tilesoc: {err}"),
            },
            Err(SessionError::Timeout) => {}
            Err(SessionError::EndOfStream) => break,
            Err(e) => eprintln!("tilesoc: {e}"),
        }
    }
    state.append(lines(merger.finish()));
    state.end();
}

pub fn cmd_serve(args: &ServeArgs) -> CmdResult {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(Exit::Failure, e.to_string()))?;
    rt.block_on(async {
        let addr = format!("{}:{}", args.bind, args.http);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::new(Exit::Load, format!("cannot listen on {addr}: {e}")))?;
        let local: SocketAddr = listener
            .local_addr()
            .map_err(|e| Failure::new(Exit::Load, e.to_string()))?;
        eprintln!("http-listen: {local}");

        let state: AppState = Arc::new(Shared::new());
        let (s, connect, hold) = (state.clone(), args.connect.clone(), args.hold);
        std::thread::Builder::new()
            .name("debug-session".into())
            .spawn(move || session_thread(s, connect, hold))
            .map_err(|e| Failure::new(Exit::Failure, e.to_string()))?;

        axum::serve(listener, router(state))
            .await
            .map_err(|e| Failure::new(Exit::Failure, e.to_string()))
    })
}
