// SPDX-License-Identifier: Apache-2.0

//! Run a simulation on a background thread, connected to the host through
//! an in-process pipe.

use std::thread::JoinHandle;

use tilesoc::debug::{pipe, ChipLink};
use tilesoc::system::{SimError, SystemInstance};

use crate::transport::TransportSpec;

/// Start `sys` on its own thread, running at most `max_cycles` cycles,
/// then flushing the trace and closing the link. Build the instance with
/// `SystemOptions { gated: true, .. }` so it waits for
/// [`Control::run`](crate::Control::run).
pub fn spawn(
    mut sys: SystemInstance,
    max_cycles: u64,
) -> (TransportSpec, JoinHandle<Result<SystemInstance, SimError>>) {
    let (host, chip) = pipe();
    let handle = std::thread::spawn(move || {
        sys.attach_link(ChipLink::over_pipe(chip));
        let result = sys.run(max_cycles);
        sys.finish();
        result.map(|_| sys)
    });
    (TransportSpec::Loopback(host), handle)
}
