// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fedtext::textproc {

/// Lowercases ASCII letters, splits on Unicode whitespace, strips leading and
/// trailing punctuation from every token and drops tokens left empty.
/// Interior punctuation ("don't", "e-mail") is kept. Input is UTF-8;
/// invalid bytes are passed through unchanged.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace fedtext::textproc
