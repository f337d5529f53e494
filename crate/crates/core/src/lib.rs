// SPDX-License-Identifier: Apache-2.0

pub mod debug;
pub mod mem;
pub mod na;
pub mod noc;
pub mod pe;
pub mod platform;
pub mod system;
pub mod traffic;
