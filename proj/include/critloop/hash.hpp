// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace critloop::hash {

/// SHA-256 digest of `data`, returned as 64 lowercase hex characters.
std::string sha256_hex(std::string_view data);

/// Normalizes CRLF and lone CR line endings to LF.
std::string normalize_newlines(std::string_view text);

} // namespace critloop::hash
