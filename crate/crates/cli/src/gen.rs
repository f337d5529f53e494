// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use tilesoc::platform::{map_description, to_canonical_json, PlatformDescription};

use crate::{CmdResult, Exit, Failure};

pub fn cmd_gen(input: &Path, output: &Path) -> CmdResult {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Failure::new(Exit::Load, format!("{}: {e}", input.display())))?;
    let desc = PlatformDescription::from_json(&text)
        .map_err(|e| Failure::new(Exit::Invalid, format!("{}: {e}", input.display())))?;
    let config = map_description(&desc).map_err(|e| Failure::new(Exit::Invalid, e.to_string()))?;
    std::fs::write(output, to_canonical_json(&config))
        .map_err(|e| Failure::new(Exit::Failure, format!("{}: {e}", output.display())))
}
