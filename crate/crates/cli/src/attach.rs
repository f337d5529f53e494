// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tilesoc_host::event::TriggerAction;
use tilesoc_host::{
    parse_trigger_file, write_jsonl, ModuleKind, ModuleSet, Session, SessionError, SessionOptions,
    StreamMerger, TransportSpec, TriggerSpec,
};

use crate::{CmdResult, Exit, Failure};

fn io_failure(e: std::io::Error) -> Failure {
    Failure::new(Exit::Failure, e.to_string())
}

fn session_failure(e: SessionError) -> Failure {
    let exit = match e {
        SessionError::ConnectionRefused(_) | SessionError::HandshakeTimeout => Exit::Unreachable,
        SessionError::NoSuchModule(_) | SessionError::TypeMismatch { .. } => Exit::Invalid,
        _ => Exit::Failure,
    };
    Failure::new(exit, e.to_string())
}

/// Modules collecting from the start: every trace module except those
/// that a StartCollection trigger is meant to switch on.
pub fn initial_collection(modules: &[u8], triggers: &[TriggerSpec]) -> Vec<u8> {
    let gated: BTreeSet<u8> = triggers
        .iter()
        .filter(|t| t.action == TriggerAction::StartCollection)
        .map(|t| t.module)
        .collect();
    modules
        .iter()
        .copied()
        .filter(|m| !gated.contains(m))
        .collect()
}

pub fn cmd_attach(connect: &str, triggers: Option<&Path>, out: &Path) -> CmdResult {
    let triggers = match triggers {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::new(Exit::Invalid, format!("{}: {e}", p.display())))?;
            parse_trigger_file(&text)
                .map_err(|e| Failure::new(Exit::Invalid, format!("{}: {e}", p.display())))?
        }
        None => Vec::new(),
    };
    let mut file = BufWriter::new(File::create(out).map_err(io_failure)?);

    let mut session = Session::connect(
        TransportSpec::Tcp(connect.to_string()),
        SessionOptions::default(),
    )
    .map_err(session_failure)?;
    let modules = session.enumerate().map_err(session_failure)?;
    let trace_modules: Vec<u8> = modules
        .iter()
        .filter(|d| d.module_type != ModuleKind::Extif)
        .map(|d| d.id)
        .collect();
    for t in &triggers {
        session.set_trigger(t).map_err(session_failure)?;
    }
    let start = initial_collection(&trace_modules, &triggers);
    session
        .start_collection(&ModuleSet::Some(start))
        .map_err(session_failure)?;
    session.run().map_err(session_failure)?;

    let mut merger = StreamMerger::new(trace_modules);
    let (_control, mut events) = session.split();
    let mut malformed = 0usize;
    let mut written = 0usize;
    loop {
        match events.next_event() {
            Ok(e) => {
                let ready = merger
                    .push(e)
                    .map_err(|e| Failure::new(Exit::Failure, e.to_string()))?;
                write_jsonl(&mut file, &ready).map_err(io_failure)?;
                written += ready.len();
            }
            Err(SessionError::Timeout) => {}
            Err(SessionError::EndOfStream) => break,
            Err(e) => {
                eprintln!("tilesoc: {e}");
                malformed += 1;
            }
        }
    }
    let rest = merger.finish();
    write_jsonl(&mut file, &rest).map_err(io_failure)?;
    written += rest.len();
    file.flush().map_err(io_failure)?;
    eprintln!("{written} events written to {}", out.display());
    if malformed > 0 {
        return Err(Failure::new(
            Exit::Failure,
            format!("{malformed} malformed frames"),
        ));
    }
    Ok(())
}
