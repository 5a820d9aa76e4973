// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    eprintln!("qjump CLI: not wired up yet");
    std::process::exit(1);
}
